#![no_main]

use libfuzzer_sys::fuzz_target;
use legrm::experiment::{parse_policy_list, Format};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(kinds) = parse_policy_list(text) {
        assert!(!kinds.is_empty());
        let joined = kinds.iter().map(|k| k.name()).collect::<Vec<_>>().join(",");
        assert_eq!(parse_policy_list(&joined).unwrap(), kinds);
    }
    let _ = text.parse::<Format>();
});
