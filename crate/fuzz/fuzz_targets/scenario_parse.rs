#![no_main]

use libfuzzer_sys::fuzz_target;
use legrm::scenario::{load_scenario, save_scenario, validate_scenario};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(s) = load_scenario(text) {
        assert!(validate_scenario(&s).is_empty());
        let again = load_scenario(&save_scenario(&s)).expect("saved scenarios load");
        assert_eq!(again, s);
    }
});
