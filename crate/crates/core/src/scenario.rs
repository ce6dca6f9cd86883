//! Scenario data: capacity, horizon, price ladders and per-(product, time)
//! demand cells, plus the TOML file format and a synthetic generator.
//!
//! Cells are stored with `t` ascending (`cells[0]` is the departure step),
//! while selling happens from `t = horizon - 1` down to `t = 0`.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::demand::{curve_from_frat5, survival_unchecked, DemandCurve};
use crate::error::{Error, Result, Violation};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DemandCell {
    /// Expected passengers at the product's minimum price.
    pub mean_demand_at_min: f64,
    pub frat5: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Product {
    pub id: String,
    /// Admissible prices, strictly increasing.
    pub price_ladder: Vec<f64>,
    /// Indexed by time step, `cells[t]`.
    pub cells: Vec<DemandCell>,
}

impl Product {
    pub fn min_price(&self) -> f64 {
        self.price_ladder[0]
    }

    pub fn max_price(&self) -> f64 {
        *self.price_ladder.last().expect("validated ladder is non-empty")
    }

    pub fn curve(&self, t: usize) -> DemandCurve {
        let c = &self.cells[t];
        curve_from_frat5(c.mean_demand_at_min, c.frat5, self.min_price())
            .expect("validated cell yields a curve")
    }

    pub fn survival(&self, t: usize, p: f64) -> f64 {
        survival_unchecked(self.cells[t].frat5, self.min_price(), p)
    }

    pub fn total_demand_at_min(&self) -> f64 {
        self.cells.iter().map(|c| c.mean_demand_at_min).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub capacity: u32,
    pub horizon: usize,
    pub products: Vec<Product>,
}

impl Scenario {
    pub fn n_products(&self) -> usize {
        self.products.len()
    }

    /// Time steps in selling order: `horizon - 1` down to `0`.
    pub fn selling_order(&self) -> impl Iterator<Item = usize> {
        (0..self.horizon).rev()
    }

    pub fn curve(&self, product: usize, t: usize) -> DemandCurve {
        self.products[product].curve(t)
    }

    /// Expected demand of every product summed over the horizon, at the
    /// products' minimum prices.
    pub fn demand_at_min(&self) -> Vec<f64> {
        self.products.iter().map(Product::total_demand_at_min).collect()
    }

    /// Total demand at minimum prices divided by capacity. Values well above
    /// one mark a demand-rich flight, values near or below one a demand-poor
    /// one.
    pub fn demand_pressure(&self) -> f64 {
        self.demand_at_min().iter().sum::<f64>() / f64::from(self.capacity.max(1))
    }

    /// Same products, ladders and horizon; cell data may differ.
    pub fn same_shape(&self, other: &Scenario) -> bool {
        self.horizon == other.horizon
            && self.products.len() == other.products.len()
            && self
                .products
                .iter()
                .zip(&other.products)
                .all(|(a, b)| a.id == b.id && a.price_ladder == b.price_ladder)
    }
}

/// Checks every scenario invariant and returns one record per violation.
pub fn validate_scenario(s: &Scenario) -> Vec<Violation> {
    let mut out = Vec::new();
    if s.capacity < 1 {
        out.push(Violation::new("capacity", "capacity >= 1"));
    }
    if s.horizon < 1 {
        out.push(Violation::new("horizon", "horizon >= 1"));
    }
    if s.products.is_empty() {
        out.push(Violation::new("products", "at least one product"));
    }
    let mut seen = HashSet::new();
    for (i, p) in s.products.iter().enumerate() {
        if !seen.insert(p.id.as_str()) {
            out.push(Violation::new(format!("products[{i}].id"), "product ids unique"));
        }
        check_ladder(&p.price_ladder, &format!("products[{i}].prices"), &mut out);
        if p.cells.len() != s.horizon {
            out.push(Violation::new(
                format!("products[{i}].cells"),
                format!("exactly horizon ({}) cells, found {}", s.horizon, p.cells.len()),
            ));
        }
        for (t, c) in p.cells.iter().enumerate() {
            if !(c.mean_demand_at_min >= 0.0 && c.mean_demand_at_min.is_finite()) {
                out.push(Violation::new(
                    format!("products[{i}].demand[{t}]"),
                    "demand >= 0 and finite",
                ));
            }
            if !(c.frat5 > 1.0 && c.frat5.is_finite()) {
                out.push(Violation::new(format!("products[{i}].frat5[{t}]"), "frat5 > 1"));
            }
        }
    }
    out
}

fn check_ladder(ladder: &[f64], path: &str, out: &mut Vec<Violation>) {
    if ladder.is_empty() {
        out.push(Violation::new(path, "price ladder non-empty"));
        return;
    }
    if ladder.iter().any(|p| !(*p > 0.0 && p.is_finite())) {
        out.push(Violation::new(path, "prices > 0 and finite"));
    }
    if ladder.windows(2).any(|w| !(w[0] < w[1])) {
        out.push(Violation::new(path, "prices strictly increasing"));
    }
}

// ---------------------------------------------------------------------------
// file format

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioDocument {
    capacity: i64,
    horizon: i64,
    products: Vec<ProductDocument>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProductDocument {
    id: String,
    prices: Vec<f64>,
    demand: Vec<f64>,
    frat5: Vec<f64>,
}

/// Parses and validates a scenario document.
///
/// The document is TOML:
///
/// ```toml
/// capacity = 180
/// horizon = 2
///
/// [[products]]
/// id = "Y"
/// prices = [150.0, 221.0, 250.0]
/// demand = [4.5, 3.25]     # mean demand at the lowest price, t = 0, 1, ...
/// frat5 = [2.4, 2.1]
/// ```
pub fn load_scenario(source: &str) -> Result<Scenario> {
    let doc: ScenarioDocument =
        toml::from_str(source).map_err(|e| Error::Parse(e.message().to_string()))?;

    let mut violations = Vec::new();
    let capacity = match u32::try_from(doc.capacity) {
        Ok(c) => c,
        Err(_) => {
            violations.push(Violation::new("capacity", "capacity >= 1 and fits in 32 bits"));
            0
        }
    };
    let horizon = match usize::try_from(doc.horizon) {
        Ok(h) => h,
        Err(_) => {
            violations.push(Violation::new("horizon", "horizon >= 1"));
            0
        }
    };

    let mut products = Vec::with_capacity(doc.products.len());
    for (i, p) in doc.products.into_iter().enumerate() {
        if p.demand.len() != horizon {
            violations.push(Violation::new(
                format!("products[{i}].demand"),
                format!("exactly horizon ({horizon}) values, found {}", p.demand.len()),
            ));
        }
        if p.frat5.len() != horizon {
            violations.push(Violation::new(
                format!("products[{i}].frat5"),
                format!("exactly horizon ({horizon}) values, found {}", p.frat5.len()),
            ));
        }
        let cells = p
            .demand
            .iter()
            .zip(&p.frat5)
            .map(|(&q, &f)| DemandCell {
                mean_demand_at_min: q,
                frat5: f,
            })
            .collect::<Vec<_>>();
        products.push(Product {
            id: p.id,
            price_ladder: p.prices,
            cells,
        });
    }

    let scenario = Scenario {
        capacity,
        horizon,
        products,
    };
    for v in validate_scenario(&scenario) {
        // length problems were already reported against demand/frat5
        if v.path.ends_with(".cells") || violations.iter().any(|w| w.path == v.path) {
            continue;
        }
        violations.push(v);
    }
    if violations.is_empty() {
        Ok(scenario)
    } else {
        Err(Error::Validation(violations))
    }
}

pub fn save_scenario(s: &Scenario) -> String {
    let doc = ScenarioDocument {
        capacity: i64::from(s.capacity),
        horizon: s.horizon as i64,
        products: s
            .products
            .iter()
            .map(|p| ProductDocument {
                id: p.id.clone(),
                prices: p.price_ladder.clone(),
                demand: p.cells.iter().map(|c| c.mean_demand_at_min).collect(),
                frat5: p.cells.iter().map(|c| c.frat5).collect(),
            })
            .collect(),
    };
    toml::to_string(&doc).expect("scenario documents always serialize")
}

// ---------------------------------------------------------------------------
// synthetic scenarios

/// Parameters for [`generate_synthetic`]. Ranges are inclusive `(lo, hi)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorSpec {
    pub products: usize,
    pub horizon: usize,
    pub capacity: u32,
    pub ladder_size: (usize, usize),
    pub price_range: (f64, f64),
    pub demand_range: (f64, f64),
    pub frat5_range: (f64, f64),
}

impl GeneratorSpec {
    /// Three products over 30 steps on a 180-seat aircraft, ladders of 5 to 8
    /// fares between 150 and 900.
    pub fn baseline() -> Self {
        Self {
            products: 3,
            horizon: 30,
            capacity: 180,
            ladder_size: (5, 8),
            price_range: (150.0, 900.0),
            demand_range: (2.0, 8.0),
            frat5_range: (1.8, 3.0),
        }
    }

    /// Demand at minimum prices well above capacity. Fares reach 2500 so the
    /// top of each ladder can still ration demand.
    pub fn demand_rich() -> Self {
        Self {
            demand_range: (4.0, 12.0),
            price_range: (150.0, 2500.0),
            ..Self::baseline()
        }
    }

    /// Demand at minimum prices around or below capacity, same fares as
    /// [`GeneratorSpec::demand_rich`].
    pub fn demand_poor() -> Self {
        Self {
            demand_range: (0.5, 3.0),
            price_range: (150.0, 2500.0),
            ..Self::baseline()
        }
    }

    fn check(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidArgument(format!("generator: {what}")));
        if self.products == 0 {
            return bad("products must be >= 1");
        }
        if self.horizon == 0 {
            return bad("horizon must be >= 1");
        }
        if self.capacity == 0 {
            return bad("capacity must be >= 1");
        }
        let (a, b) = self.ladder_size;
        if a == 0 || a > b {
            return bad("empty ladder size range");
        }
        let (lo, hi) = self.price_range;
        if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
            return bad("empty or non-positive price range");
        }
        let (lo, hi) = self.demand_range;
        if !(lo >= 0.0 && lo <= hi && hi.is_finite()) {
            return bad("empty or negative demand range");
        }
        let (lo, hi) = self.frat5_range;
        if !(lo > 1.0 && lo <= hi && hi.is_finite()) {
            return bad("frat5 range must lie above 1 and be non-empty");
        }
        Ok(())
    }
}

fn uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..=hi)
    }
}

/// Builds a random but reproducible scenario. FRAT5 values of each product
/// are sorted so that willingness to pay grows toward departure (largest
/// FRAT5 at `t = 0`). These scenarios are stand-ins; they do not come from
/// any airline's data.
pub fn generate_synthetic(spec: &GeneratorSpec, seed: u64) -> Result<Scenario> {
    spec.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (plo, phi) = spec.price_range;
    let mut products = Vec::with_capacity(spec.products);
    for i in 0..spec.products {
        let k = rng.random_range(spec.ladder_size.0..=spec.ladder_size.1);
        // wide ladders, so the highest fares can always ration demand
        let pmin = uniform(&mut rng, (plo, plo + 0.1 * (phi - plo)));
        let pmax = uniform(&mut rng, (phi - 0.1 * (phi - plo), phi));
        let mut ladder: Vec<f64> = (0..k)
            .map(|j| {
                let x = if k == 1 {
                    pmin
                } else {
                    pmin + (pmax - pmin) * j as f64 / (k - 1) as f64
                };
                x.round().max(1.0)
            })
            .collect();
        ladder.dedup();

        let mut frat5: Vec<f64> = (0..spec.horizon)
            .map(|_| uniform(&mut rng, spec.frat5_range))
            .collect();
        frat5.sort_by(|a, b| b.partial_cmp(a).expect("finite"));
        let cells = frat5
            .into_iter()
            .map(|f| DemandCell {
                mean_demand_at_min: uniform(&mut rng, spec.demand_range),
                frat5: f,
            })
            .collect();
        products.push(Product {
            id: format!("P{}", i + 1),
            price_ladder: ladder,
            cells,
        });
    }
    let s = Scenario {
        capacity: spec.capacity,
        horizon: spec.horizon,
        products,
    };
    debug_assert!(validate_scenario(&s).is_empty());
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
capacity = 50
horizon = 1

[[products]]
id = "A"
prices = [100]
demand = [10]
frat5 = [2]
"#;

    #[test]
    fn loads_minimal_document() {
        let s = load_scenario(MINIMAL).unwrap();
        assert_eq!(s.capacity, 50);
        assert_eq!(s.horizon, 1);
        assert_eq!(s.products.len(), 1);
        assert_eq!(s.products[0].cells.len(), 1);
        assert_eq!(s.products[0].min_price(), 100.0);
        assert_eq!(s.products[0].cells[0].mean_demand_at_min, 10.0);
    }

    #[test]
    fn frat5_of_one_is_rejected() {
        let doc = MINIMAL.replace("frat5 = [2]", "frat5 = [1.0]");
        match load_scenario(&doc) {
            Err(Error::Validation(v)) => {
                assert_eq!(v.len(), 1);
                assert_eq!(v[0].path, "products[0].frat5[0]");
                assert_eq!(v[0].rule, "frat5 > 1");
            }
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn unsorted_ladder_is_rejected() {
        let doc = MINIMAL.replace("prices = [100]", "prices = [250, 221]");
        match load_scenario(&doc) {
            Err(Error::Validation(v)) => {
                assert!(v.iter().any(|x| x.rule == "prices strictly increasing"));
            }
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn malformed_documents_are_parse_errors() {
        assert!(matches!(load_scenario("capacity = "), Err(Error::Parse(_))));
        assert!(matches!(load_scenario("capacity = 1\nhorizon = 1"), Err(Error::Parse(_))));
        let extra = format!("{MINIMAL}\nbogus = 1");
        assert!(matches!(load_scenario(&extra), Err(Error::Parse(_))));
    }

    #[test]
    fn negative_capacity_and_length_mismatch() {
        let doc = MINIMAL
            .replace("capacity = 50", "capacity = -3")
            .replace("demand = [10]", "demand = [10, 11]");
        match load_scenario(&doc) {
            Err(Error::Validation(v)) => {
                let paths: Vec<_> = v.iter().map(|x| x.path.as_str()).collect();
                assert!(paths.contains(&"capacity"));
                assert!(paths.contains(&"products[0].demand"));
            }
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    fn valid() -> Scenario {
        load_scenario(MINIMAL).unwrap()
    }

    #[test]
    fn validate_reports_each_rule() {
        assert!(validate_scenario(&valid()).is_empty());

        let mut s = valid();
        s.capacity = 0;
        let v = validate_scenario(&s);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].path, "capacity");

        let mut s = valid();
        s.horizon = 2;
        let mut second = s.products[0].clone();
        second.id = "B".into();
        s.products.push(second);
        let v = validate_scenario(&s);
        assert_eq!(v.len(), 2);
        assert!(v.iter().all(|x| x.path.ends_with(".cells")));

        let mut s = valid();
        let dup = s.products[0].clone();
        s.products.push(dup);
        let v = validate_scenario(&s);
        assert_eq!(v, vec![Violation::new("products[1].id", "product ids unique")]);

        let mut s = valid();
        s.products.clear();
        assert_eq!(validate_scenario(&s).len(), 1);
    }

    #[test]
    fn save_then_load_is_identity() {
        let s = generate_synthetic(&GeneratorSpec::baseline(), 7).unwrap();
        let text = save_scenario(&s);
        assert_eq!(load_scenario(&text).unwrap(), s);
    }

    #[test]
    fn generator_is_deterministic() {
        let spec = GeneratorSpec::baseline();
        let a = save_scenario(&generate_synthetic(&spec, 1).unwrap());
        let b = save_scenario(&generate_synthetic(&spec, 1).unwrap());
        assert_eq!(a, b);
        let c = save_scenario(&generate_synthetic(&spec, 2).unwrap());
        assert_ne!(a, c);
    }

    #[test]
    fn generator_zero_demand() {
        let spec = GeneratorSpec {
            demand_range: (0.0, 0.0),
            ..GeneratorSpec::baseline()
        };
        let s = generate_synthetic(&spec, 3).unwrap();
        assert!(s.demand_at_min().iter().all(|&d| d == 0.0));
        assert!(validate_scenario(&s).is_empty());
    }

    #[test]
    fn generator_rejects_empty_ranges() {
        let base = GeneratorSpec::baseline();
        for bad in [
            GeneratorSpec { demand_range: (3.0, 1.0), ..base.clone() },
            GeneratorSpec { ladder_size: (0, 0), ..base.clone() },
            GeneratorSpec { frat5_range: (0.5, 2.0), ..base.clone() },
            GeneratorSpec { price_range: (900.0, 150.0), ..base.clone() },
            GeneratorSpec { products: 0, ..base.clone() },
        ] {
            assert!(generate_synthetic(&bad, 0).is_err(), "{bad:?}");
        }
    }

    #[test]
    fn generated_ladders_respect_bounds() {
        let spec = GeneratorSpec::baseline();
        for seed in 0..50 {
            let s = generate_synthetic(&spec, seed).unwrap();
            assert!(validate_scenario(&s).is_empty());
            for p in &s.products {
                assert!(p.price_ladder.len() >= 1 && p.price_ladder.len() <= 8);
                assert!(p.min_price() >= 150.0 && p.max_price() <= 900.0);
                assert!(p.cells.windows(2).all(|w| w[0].frat5 >= w[1].frat5));
            }
        }
    }

    #[test]
    fn demand_pressure_classifies_presets() {
        let rich = generate_synthetic(&GeneratorSpec::demand_rich(), 11).unwrap();
        let poor = generate_synthetic(&GeneratorSpec::demand_poor(), 11).unwrap();
        assert!(rich.demand_pressure() > poor.demand_pressure());
    }
}
