//! Seat-protection policies: Littlewood's two-class rule, EMSRb with
//! Gaussian aggregate demand, the marginal revenue transformation for
//! families whose fares are substitutes, and their composition.

use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::scenario::Scenario;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FareClass {
    /// Product index in the scenario.
    pub family: usize,
    pub fare: f64,
    pub mean_demand: f64,
    pub std_demand: f64,
}

impl FareClass {
    pub fn new(family: usize, fare: f64, mean_demand: f64, std_demand: f64) -> Self {
        Self {
            family,
            fare,
            mean_demand,
            std_demand,
        }
    }

    fn check(&self) -> Result<()> {
        if !(self.fare > 0.0 && self.fare.is_finite()) {
            return Err(Error::InvalidArgument(format!("fare must be > 0, got {}", self.fare)));
        }
        if !(self.mean_demand >= 0.0 && self.std_demand >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "demand moments must be >= 0, got ({}, {})",
                self.mean_demand, self.std_demand
            )));
        }
        Ok(())
    }
}

/// A fare class after the marginal revenue transformation. For independent
/// classes the adjusted values equal the originals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdjustedClass {
    pub origin: FareClass,
    /// Marginal revenue per extra seat sold; may be zero or negative.
    pub adjusted_fare: f64,
    pub adjusted_mean: f64,
    pub adjusted_std: f64,
    /// Buyers when this is the cheapest open fare of its family.
    pub cumulative_demand: f64,
    /// Revenue when this is the cheapest open fare of its family.
    pub cumulative_revenue: f64,
}

impl AdjustedClass {
    pub fn identity(c: FareClass) -> Self {
        Self {
            origin: c,
            adjusted_fare: c.fare,
            adjusted_mean: c.mean_demand,
            adjusted_std: c.std_demand,
            cumulative_demand: c.mean_demand,
            cumulative_revenue: c.fare * c.mean_demand,
        }
    }
}

/// Classes in nesting order with their protection levels and booking
/// limits for a given capacity.
#[derive(Debug, Clone, PartialEq)]
pub struct NestedPolicy {
    pub capacity: f64,
    /// Sorted by adjusted fare, highest first.
    pub ordered_classes: Vec<AdjustedClass>,
    /// `protections[j]`: seats held back for classes `0..=j`; one entry per
    /// class except the last.
    pub protections: Vec<f64>,
    /// `booking_limits[0] = capacity`, `booking_limits[j] = capacity - protections[j-1]`.
    pub booking_limits: Vec<f64>,
}

impl NestedPolicy {
    /// Booking limits rebased to `remaining` seats.
    pub fn limits_for(&self, remaining: f64) -> Vec<f64> {
        (0..self.ordered_classes.len())
            .map(|j| {
                if j == 0 {
                    remaining
                } else {
                    (remaining - self.protections[j - 1]).max(0.0)
                }
            })
            .collect()
    }
}

/// Smallest `y` with `P(D >= y) = prob` for `D ~ N(mean, std^2)`.
/// A zero standard deviation is a point mass: `mean` for any `prob` in (0, 1).
fn upper_quantile(mean: f64, std: f64, prob: f64) -> f64 {
    if prob >= 1.0 {
        return f64::NEG_INFINITY;
    }
    if prob <= 0.0 {
        return f64::INFINITY;
    }
    if std == 0.0 {
        return mean;
    }
    let z = Normal::standard().inverse_cdf(1.0 - prob);
    mean + std * z
}

/// Seats to protect for the high fare `p1` against requests at `p2` when
/// high-fare demand is Gaussian.
pub fn littlewood_protection(p1: f64, p2: f64, mean: f64, std: f64) -> Result<f64> {
    if !(p1 > 0.0 && p2 > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "fares must be > 0, got ({p1}, {p2})"
        )));
    }
    if p2 >= p1 {
        return Ok(0.0);
    }
    Ok(upper_quantile(mean, std, p2 / p1).max(0.0))
}

/// EMSRb over already-adjusted classes.
fn emsrb_nest(mut classes: Vec<AdjustedClass>, capacity: f64) -> Result<NestedPolicy> {
    if classes.is_empty() {
        return Err(Error::InvalidArgument("no fare classes".into()));
    }
    if !(capacity >= 0.0) {
        return Err(Error::InvalidArgument(format!("capacity must be >= 0, got {capacity}")));
    }
    classes.sort_by(|a, b| b.adjusted_fare.total_cmp(&a.adjusted_fare));

    let n = classes.len();
    let mut protections = Vec::with_capacity(n.saturating_sub(1));
    let mut mean_sum = 0.0;
    let mut var_sum = 0.0;
    let mut weighted = 0.0;
    let mut floor: f64 = 0.0;
    for j in 0..n - 1 {
        let c = &classes[j];
        mean_sum += c.adjusted_mean;
        var_sum += c.adjusted_std * c.adjusted_std;
        weighted += c.adjusted_fare * c.adjusted_mean;
        let y = if mean_sum > 0.0 {
            let avg_fare = weighted / mean_sum;
            let ratio = classes[j + 1].adjusted_fare / avg_fare;
            upper_quantile(mean_sum, var_sum.sqrt(), ratio)
        } else {
            0.0
        };
        // keep protections nested
        floor = floor.max(y.clamp(0.0, capacity));
        protections.push(floor);
    }
    let booking_limits = (0..n)
        .map(|j| if j == 0 { capacity } else { (capacity - protections[j - 1]).max(0.0) })
        .collect();
    Ok(NestedPolicy {
        capacity,
        ordered_classes: classes,
        protections,
        booking_limits,
    })
}

/// EMSRb treating every class as independent.
pub fn emsrb_policy(classes: &[FareClass], capacity: f64) -> Result<NestedPolicy> {
    for c in classes {
        c.check()?;
    }
    emsrb_nest(classes.iter().copied().map(AdjustedClass::identity).collect(), capacity)
}

/// Marginal revenue transformation of one family whose fares are strictly
/// decreasing. Buyers always take the cheapest open fare, so opening class
/// `k` brings `d_k` new buyers and moves everyone onto `f_k`:
/// `TR_k = f_k * Q_k` and `MR_k = (TR_k - TR_{k-1}) / d_k`.
pub fn mr_transform(family_classes: &[FareClass]) -> Result<Vec<AdjustedClass>> {
    for c in family_classes {
        c.check()?;
    }
    if family_classes.windows(2).any(|w| !(w[0].fare > w[1].fare)) {
        return Err(Error::InvalidArgument(
            "fares within a family must be strictly decreasing".into(),
        ));
    }
    let mut out: Vec<AdjustedClass> = Vec::with_capacity(family_classes.len());
    let mut q_prev = 0.0;
    let mut tr_prev = 0.0;
    for (k, c) in family_classes.iter().enumerate() {
        let q = q_prev + c.mean_demand;
        let tr = c.fare * q;
        let mr = if k == 0 {
            c.fare
        } else if c.mean_demand > 0.0 {
            (tr - tr_prev) / c.mean_demand
        } else {
            // zero-width increment: keep the neighbour's value for ordering
            out[k - 1].adjusted_fare
        };
        out.push(AdjustedClass {
            origin: *c,
            adjusted_fare: mr,
            adjusted_mean: c.mean_demand,
            adjusted_std: c.std_demand,
            cumulative_demand: q,
            cumulative_revenue: tr,
        });
        q_prev = q;
        tr_prev = tr;
    }
    Ok(out)
}

/// Result of pooling transformed families: the nest plus the classes that
/// lost money and stay closed.
#[derive(Debug, Clone, PartialEq)]
pub struct StepPolicy {
    pub nest: Option<NestedPolicy>,
    pub closed: Vec<AdjustedClass>,
}

/// MR-transforms each family (fares highest first), closes classes with
/// non-positive marginal revenue and runs EMSRb on the rest.
pub fn mrt_emsrb_nest(families: &[Vec<FareClass>], capacity: f64) -> Result<StepPolicy> {
    let mut open = Vec::new();
    let mut closed = Vec::new();
    for fam in families {
        for c in mr_transform(fam)? {
            if c.adjusted_fare > 0.0 {
                open.push(c);
            } else {
                closed.push(c);
            }
        }
    }
    let nest = if open.is_empty() {
        None
    } else {
        Some(emsrb_nest(open, capacity)?)
    };
    Ok(StepPolicy { nest, closed })
}

/// Classic EMSRb on the pooled classes of all families.
pub fn classic_emsrb_nest(families: &[Vec<FareClass>], capacity: f64) -> Result<StepPolicy> {
    let all: Vec<FareClass> = families.iter().flatten().copied().collect();
    let nest = if all.is_empty() {
        None
    } else {
        Some(emsrb_policy(&all, capacity)?)
    };
    Ok(StepPolicy {
        nest,
        closed: Vec::new(),
    })
}

/// Per-step nested policies, `steps[t]` for `t <= as_of_time`.
#[derive(Debug, Clone, PartialEq)]
pub struct AvailabilityPolicy {
    pub name: String,
    pub capacity: f64,
    pub steps: Vec<StepPolicy>,
}

impl AvailabilityPolicy {
    pub fn as_of_time(&self) -> usize {
        self.steps.len().saturating_sub(1)
    }
}

/// Fare classes of family `i` seen from step `t`, fares highest first.
///
/// Demand is aggregated over the remaining steps `t, t-1, ..., 0`. A fare
/// receives the buyers whose willingness to pay falls between it and the
/// next fare up; the top fare keeps the whole tail. Variance equals the
/// mean, as for thinned Poisson arrivals.
pub fn family_classes(scenario: &Scenario, family: usize, t: usize) -> Vec<FareClass> {
    let product = &scenario.products[family];
    let ladder = &product.price_ladder;
    let mut means = vec![0.0; ladder.len()];
    for s in 0..=t {
        let q = product.cells[s].mean_demand_at_min;
        if q == 0.0 {
            continue;
        }
        for (k, &p) in ladder.iter().enumerate() {
            let above = ladder.get(k + 1).map_or(0.0, |&next| product.survival(s, next));
            means[k] += q * (product.survival(s, p) - above);
        }
    }
    ladder
        .iter()
        .zip(&means)
        .rev()
        .map(|(&fare, &m)| FareClass::new(family, fare, m.max(0.0), m.max(0.0).sqrt()))
        .collect()
}

fn build_policy(
    scenario: &Scenario,
    capacity: f64,
    as_of_time: usize,
    name: &str,
    nest: fn(&[Vec<FareClass>], f64) -> Result<StepPolicy>,
) -> Result<AvailabilityPolicy> {
    if as_of_time >= scenario.horizon {
        return Err(Error::InvalidArgument(format!(
            "as-of time {as_of_time} outside horizon {}",
            scenario.horizon
        )));
    }
    let steps = (0..=as_of_time)
        .map(|t| {
            let families: Vec<Vec<FareClass>> = (0..scenario.n_products())
                .map(|i| family_classes(scenario, i, t))
                .collect();
            nest(&families, capacity)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(AvailabilityPolicy {
        name: name.to_string(),
        capacity,
        steps,
    })
}

pub fn mrt_emsrb_policy(scenario: &Scenario, capacity: f64, as_of_time: usize) -> Result<AvailabilityPolicy> {
    build_policy(scenario, capacity, as_of_time, "mrt-emsrb", mrt_emsrb_nest)
}

pub fn classic_emsrb_policy(
    scenario: &Scenario,
    capacity: f64,
    as_of_time: usize,
) -> Result<AvailabilityPolicy> {
    build_policy(scenario, capacity, as_of_time, "emsrb", classic_emsrb_nest)
}

#[cfg(test)]
mod tests {
    use super::*;

    const Z80: f64 = 0.841_621_233_572_914_3; // standard normal 0.8-quantile

    #[test]
    fn littlewood_examples() {
        assert!((littlewood_protection(200.0, 100.0, 50.0, 10.0).unwrap() - 50.0).abs() < 1e-9);
        let y = littlewood_protection(200.0, 40.0, 50.0, 10.0).unwrap();
        assert!((y - (50.0 + 10.0 * Z80)).abs() < 1e-6, "{y}");
        assert!((y - 58.416).abs() < 1e-3);
        assert_eq!(littlewood_protection(100.0, 100.0, 50.0, 10.0).unwrap(), 0.0);
        assert_eq!(littlewood_protection(100.0, 150.0, 50.0, 10.0).unwrap(), 0.0);
        assert_eq!(littlewood_protection(200.0, 40.0, 50.0, 0.0).unwrap(), 50.0);
        assert!(littlewood_protection(0.0, 40.0, 50.0, 1.0).is_err());
        // deep low tail floors at zero
        assert_eq!(littlewood_protection(200.0, 199.0, 1.0, 10.0).unwrap(), 0.0);
    }

    #[test]
    fn single_class_gets_whole_cabin() {
        let p = emsrb_policy(&[FareClass::new(0, 500.0, 20.0, 4.0)], 80.0).unwrap();
        assert_eq!(p.booking_limits, vec![80.0]);
        assert!(p.protections.is_empty());
    }

    #[test]
    fn two_deterministic_classes() {
        let classes = [FareClass::new(0, 1200.0, 31.0, 0.0), FareClass::new(0, 1000.0, 11.0, 0.0)];
        let p = emsrb_policy(&classes, 40.0).unwrap();
        assert_eq!(p.protections, vec![31.0]);
        assert_eq!(p.booking_limits, vec![40.0, 9.0]);
    }

    #[test]
    fn three_deterministic_classes() {
        let classes = [
            FareClass::new(0, 1200.0, 31.0, 0.0),
            FareClass::new(0, 1000.0, 11.0, 0.0),
            FareClass::new(1, 800.0, 15.0, 0.0),
        ];
        let wide = emsrb_policy(&classes, 100.0).unwrap();
        assert_eq!(wide.protections, vec![31.0, 42.0]);
        let p = emsrb_policy(&classes, 40.0).unwrap();
        // 42 seats wanted for the top two classes, clamped to the cabin
        assert_eq!(p.protections, vec![31.0, 40.0]);
        assert_eq!(p.booking_limits, vec![40.0, 9.0, 0.0]);
    }

    #[test]
    fn zero_demand_opens_everything() {
        let classes = [FareClass::new(0, 300.0, 0.0, 0.0), FareClass::new(0, 200.0, 0.0, 0.0)];
        let p = emsrb_policy(&classes, 10.0).unwrap();
        assert_eq!(p.protections, vec![0.0]);
        assert_eq!(p.booking_limits, vec![10.0, 10.0]);
        assert!(emsrb_policy(&[], 10.0).is_err());
    }

    #[test]
    fn mr_transform_family_one() {
        let fam = [FareClass::new(0, 1200.0, 31.0, 0.0), FareClass::new(0, 1000.0, 11.0, 0.0)];
        let out = mr_transform(&fam).unwrap();
        assert_eq!(out[0].cumulative_demand, 31.0);
        assert_eq!(out[1].cumulative_demand, 42.0);
        assert_eq!(out[0].cumulative_revenue, 37_200.0);
        assert_eq!(out[1].cumulative_revenue, 42_000.0);
        assert_eq!(out[0].adjusted_fare, 1200.0);
        assert!((out[1].adjusted_fare - 4800.0 / 11.0).abs() < 1e-9);
        assert_eq!(out[1].adjusted_mean, 11.0);
    }

    #[test]
    fn mr_transform_single_class_is_identity() {
        let out = mr_transform(&[FareClass::new(1, 800.0, 15.0, 2.0)]).unwrap();
        assert_eq!(out[0], AdjustedClass::identity(FareClass::new(1, 800.0, 15.0, 2.0)));
    }

    #[test]
    fn mr_transform_rejects_bad_order() {
        let fam = [FareClass::new(0, 1000.0, 1.0, 0.0), FareClass::new(0, 1000.0, 1.0, 0.0)];
        assert!(mr_transform(&fam).is_err());
        let fam = [FareClass::new(0, 900.0, 1.0, 0.0), FareClass::new(0, 1000.0, 1.0, 0.0)];
        assert!(mr_transform(&fam).is_err());
    }

    #[test]
    fn mr_transform_zero_demand_class() {
        let fam = [
            FareClass::new(0, 900.0, 0.0, 0.0),
            FareClass::new(0, 700.0, 0.0, 0.0),
            FareClass::new(0, 500.0, 4.0, 2.0),
        ];
        let out = mr_transform(&fam).unwrap();
        assert_eq!(out[0].adjusted_fare, 900.0);
        assert_eq!(out[1].adjusted_fare, 900.0);
        assert_eq!(out[2].adjusted_fare, 500.0);
    }

    #[test]
    fn negative_marginal_revenue_closes_class() {
        // 40 buyers at 1000, 2 more at 500: opening 500 loses 19 000
        let fam = vec![FareClass::new(0, 1000.0, 40.0, 0.0), FareClass::new(0, 500.0, 2.0, 0.0)];
        let step = mrt_emsrb_nest(&[fam], 100.0).unwrap();
        assert_eq!(step.closed.len(), 1);
        assert_eq!(step.closed[0].origin.fare, 500.0);
        assert_eq!(step.nest.unwrap().ordered_classes.len(), 1);
    }

    #[test]
    fn three_class_instance_policies() {
        let families = vec![
            vec![FareClass::new(0, 1200.0, 31.0, 0.0), FareClass::new(0, 1000.0, 11.0, 0.0)],
            vec![FareClass::new(1, 800.0, 15.0, 0.0)],
        ];
        let mrt = mrt_emsrb_nest(&families, 40.0).unwrap().nest.unwrap();
        let order: Vec<f64> = mrt.ordered_classes.iter().map(|c| c.origin.fare).collect();
        assert_eq!(order, vec![1200.0, 800.0, 1000.0]);
        assert_eq!(mrt.booking_limits, vec![40.0, 9.0, 0.0]);

        let classic = classic_emsrb_nest(&families, 40.0).unwrap().nest.unwrap();
        let order: Vec<f64> = classic.ordered_classes.iter().map(|c| c.origin.fare).collect();
        assert_eq!(order, vec![1200.0, 1000.0, 800.0]);
        assert_eq!(classic.booking_limits, vec![40.0, 9.0, 0.0]);
    }

    #[test]
    fn zero_capacity_closes_everything() {
        let families = vec![vec![FareClass::new(0, 300.0, 5.0, 1.0)]];
        let p = mrt_emsrb_nest(&families, 0.0).unwrap().nest.unwrap();
        assert!(p.booking_limits.iter().all(|&b| b == 0.0));
    }

    #[test]
    fn rebased_limits() {
        let classes = [FareClass::new(0, 1200.0, 31.0, 0.0), FareClass::new(0, 1000.0, 11.0, 0.0)];
        let p = emsrb_policy(&classes, 40.0).unwrap();
        assert_eq!(p.limits_for(35.0), vec![35.0, 4.0]);
        assert_eq!(p.limits_for(20.0), vec![20.0, 0.0]);
    }
}
