//! Stochastic passenger arrivals and policy execution.
//!
//! # Random streams
//!
//! Every draw comes from ChaCha8. A replication `r` of a Monte Carlo run
//! with master seed `m` uses the seed [`replication_seed`]`(m, r)`. Within a
//! replication, the arrivals of family `i` at step `t` come from that seed
//! with stream id `(t << 16) | (i + 1)`, and the shuffle of step `t` from
//! stream id `t << 16`. Arrivals therefore depend only on
//! `(scenario, seed, t, family)`: two policies simulated with the same seed
//! face the same passengers.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Poisson};
use rayon::prelude::*;

use crate::demand::wtp_distribution;
use crate::discrete::{PricingPlan, PricingProblem, SearchConfig};
use crate::error::{Error, Result};
use crate::policies::{AvailabilityPolicy, StepPolicy};
use crate::scenario::Scenario;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArrivalEvent {
    pub family: usize,
    /// Highest price the passenger accepts.
    pub wtp: f64,
    pub time_step: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sale {
    pub family: usize,
    pub wtp: f64,
    pub price: f64,
}

/// A fare on sale during a step; `limit` is the nested booking limit at
/// the start of the step, absent for posted prices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Offer {
    pub family: usize,
    pub fare: f64,
    pub limit: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub t: usize,
    pub offers: Vec<Offer>,
    pub arrivals: usize,
    pub sales: Vec<Sale>,
    pub revenue: f64,
    pub remaining_after: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationOutcome {
    pub seed: u64,
    pub capacity: u32,
    pub revenue: f64,
    pub seats_sold: u32,
    pub ledger: Vec<StepRecord>,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of replication `index` under `master_seed`.
pub fn replication_seed(master_seed: u64, index: u64) -> u64 {
    splitmix64(master_seed ^ splitmix64(index))
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Passengers of step `t`: per family a Poisson count with the cell's mean
/// demand, each with `wtp = min_price + Exp(scale)`, all families shuffled
/// together.
pub fn sample_arrivals(scenario: &Scenario, t: usize, seed: u64) -> Vec<ArrivalEvent> {
    let mut events = Vec::new();
    for (i, product) in scenario.products.iter().enumerate() {
        let cell = product.cells[t];
        if cell.mean_demand_at_min <= 0.0 {
            continue;
        }
        let mut rng = stream(seed, ((t as u64) << 16) | (i as u64 + 1));
        let count = Poisson::new(cell.mean_demand_at_min)
            .expect("validated mean demand")
            .sample(&mut rng) as usize;
        let wtp = wtp_distribution(cell.frat5, product.min_price()).expect("validated cell");
        let tail = Exp::new(1.0 / wtp.scale).expect("positive scale");
        for _ in 0..count {
            events.push(ArrivalEvent {
                family: i,
                wtp: wtp.min_price + tail.sample(&mut rng),
                time_step: t,
            });
        }
    }
    let mut rng = stream(seed, (t as u64) << 16);
    events.shuffle(&mut rng);
    events
}

struct Ledger {
    remaining: u32,
    capacity: u32,
    revenue: f64,
    records: Vec<StepRecord>,
}

impl Ledger {
    fn new(capacity: u32) -> Self {
        Self {
            remaining: capacity,
            capacity,
            revenue: 0.0,
            records: Vec::new(),
        }
    }

    fn finish(self, seed: u64) -> SimulationOutcome {
        SimulationOutcome {
            seed,
            capacity: self.capacity,
            revenue: self.revenue,
            seats_sold: self.capacity - self.remaining,
            ledger: self.records,
        }
    }

    /// Each passenger buys at the posted price of their family if it does
    /// not exceed their willingness to pay.
    fn run_posted(&mut self, t: usize, prices: &[f64], arrivals: &[ArrivalEvent]) {
        let offers = prices
            .iter()
            .enumerate()
            .map(|(family, &fare)| Offer {
                family,
                fare,
                limit: None,
            })
            .collect();
        let mut sales = Vec::new();
        let mut revenue = 0.0;
        for a in arrivals {
            if self.remaining == 0 {
                break;
            }
            let price = prices[a.family];
            if a.wtp >= price {
                sales.push(Sale {
                    family: a.family,
                    wtp: a.wtp,
                    price,
                });
                revenue += price;
                self.remaining -= 1;
            }
        }
        self.push(t, offers, arrivals.len(), sales, revenue);
    }

    /// Each passenger buys the cheapest fare of their family that is open
    /// and within their willingness to pay. Limits are rebased on the seats
    /// left at the start of the step and count sales of the class and every
    /// class below it in the nest.
    fn run_nested(&mut self, t: usize, step: &StepPolicy, arrivals: &[ArrivalEvent]) {
        let Some(nest) = &step.nest else {
            self.push(t, Vec::new(), arrivals.len(), Vec::new(), 0.0);
            return;
        };
        let limits = nest.limits_for(f64::from(self.remaining));
        let caps: Vec<i64> = limits.iter().map(|l| (l + 1e-9).floor() as i64).collect();
        let offers = nest
            .ordered_classes
            .iter()
            .zip(&limits)
            .map(|(c, &l)| Offer {
                family: c.origin.family,
                fare: c.origin.fare,
                limit: Some(l),
            })
            .collect();
        let n = caps.len();
        let mut sold = vec![0i64; n];
        let available = |sold: &[i64], k: usize| -> bool {
            let mut below = sold[k..].iter().sum::<i64>();
            for j in (0..=k).rev() {
                if j < k {
                    below += sold[j];
                }
                if caps[j] - below < 1 {
                    return false;
                }
            }
            true
        };
        let mut sales = Vec::new();
        let mut revenue = 0.0;
        for a in arrivals {
            if self.remaining == 0 {
                break;
            }
            let mut pick: Option<usize> = None;
            for (k, c) in nest.ordered_classes.iter().enumerate() {
                if c.origin.family != a.family || c.origin.fare > a.wtp {
                    continue;
                }
                if pick.is_some_and(|p| nest.ordered_classes[p].origin.fare <= c.origin.fare) {
                    continue;
                }
                if available(&sold, k) {
                    pick = Some(k);
                }
            }
            if let Some(k) = pick {
                let price = nest.ordered_classes[k].origin.fare;
                sold[k] += 1;
                self.remaining -= 1;
                revenue += price;
                sales.push(Sale {
                    family: a.family,
                    wtp: a.wtp,
                    price,
                });
            }
        }
        self.push(t, offers, arrivals.len(), sales, revenue);
    }

    fn push(&mut self, t: usize, offers: Vec<Offer>, arrivals: usize, sales: Vec<Sale>, revenue: f64) {
        self.revenue += revenue;
        self.records.push(StepRecord {
            t,
            offers,
            arrivals,
            sales,
            revenue,
            remaining_after: self.remaining,
        });
    }
}

fn check_policy(policy: &AvailabilityPolicy, n_families: usize, steps: usize) -> Result<()> {
    if policy.steps.len() < steps {
        return Err(Error::MalformedPolicy(format!(
            "policy covers {} steps, need {steps}",
            policy.steps.len()
        )));
    }
    for (t, step) in policy.steps.iter().enumerate() {
        if let Some(nest) = &step.nest {
            if nest.protections.len() + 1 != nest.ordered_classes.len()
                || nest.booking_limits.len() != nest.ordered_classes.len()
            {
                return Err(Error::MalformedPolicy(format!("step {t}: inconsistent nest")));
            }
            if let Some(c) = nest.ordered_classes.iter().find(|c| c.origin.family >= n_families) {
                return Err(Error::MalformedPolicy(format!(
                    "step {t}: unknown family {}",
                    c.origin.family
                )));
            }
        }
    }
    Ok(())
}

/// Runs a nested availability policy over the whole horizon.
pub fn simulate_policy(
    scenario: &Scenario,
    policy: &AvailabilityPolicy,
    capacity: u32,
    seed: u64,
) -> Result<SimulationOutcome> {
    check_policy(policy, scenario.n_products(), scenario.horizon)?;
    let mut ledger = Ledger::new(capacity);
    for t in scenario.selling_order() {
        let arrivals = sample_arrivals(scenario, t, seed);
        ledger.run_nested(t, &policy.steps[t], &arrivals);
    }
    Ok(ledger.finish(seed))
}

/// Runs a policy against a given arrival sequence; `steps` lists
/// `(t, passengers in arrival order)` in the order they are played.
pub fn simulate_policy_with_arrivals(
    policy: &AvailabilityPolicy,
    capacity: u32,
    steps: &[(usize, Vec<ArrivalEvent>)],
) -> Result<SimulationOutcome> {
    let n_families = steps
        .iter()
        .flat_map(|(_, a)| a.iter().map(|e| e.family + 1))
        .max()
        .unwrap_or(0)
        .max(
            policy
                .steps
                .iter()
                .filter_map(|s| s.nest.as_ref())
                .flat_map(|n| n.ordered_classes.iter().map(|c| c.origin.family + 1))
                .max()
                .unwrap_or(0),
        );
    check_policy(policy, n_families, 0)?;
    let mut ledger = Ledger::new(capacity);
    for (t, arrivals) in steps {
        let step = policy
            .steps
            .get(*t)
            .ok_or_else(|| Error::MalformedPolicy(format!("no policy for step {t}")))?;
        ledger.run_nested(*t, step, arrivals);
    }
    Ok(ledger.finish(0))
}

/// Posts the plan's price for every (family, step).
pub fn simulate_fixed_prices(
    scenario: &Scenario,
    plan: &PricingPlan,
    capacity: u32,
    seed: u64,
) -> Result<SimulationOutcome> {
    if plan.start_time + 1 != scenario.horizon
        || plan.prices.len() != scenario.n_products()
        || plan.prices.iter().any(|r| r.len() != scenario.horizon)
    {
        return Err(Error::ShapeMismatch("plan must cover every product and step".into()));
    }
    let mut ledger = Ledger::new(capacity);
    let mut prices = vec![0.0; scenario.n_products()];
    for t in scenario.selling_order() {
        for (i, row) in plan.prices.iter().enumerate() {
            prices[i] = row[t];
        }
        let arrivals = sample_arrivals(scenario, t, seed);
        ledger.run_posted(t, &prices, &arrivals);
    }
    Ok(ledger.finish(seed))
}

/// Rolling-horizon greedy: at every step re-solve the remaining horizon of
/// `estimated` with the seats actually left, post that step's prices, and
/// let passengers drawn from `actual` buy.
pub fn simulate_greedy_rolling(
    estimated: &Scenario,
    actual: &Scenario,
    capacity: u32,
    seed: u64,
    config: &SearchConfig,
) -> Result<SimulationOutcome> {
    let problem = PricingProblem::new(estimated, config)?;
    simulate_greedy_rolling_with(&problem, estimated, actual, capacity, seed)
}

/// [`simulate_greedy_rolling`] with a prepared problem, so that pruned
/// ladders are shared across steps and replications.
pub fn simulate_greedy_rolling_with(
    problem: &PricingProblem,
    estimated: &Scenario,
    actual: &Scenario,
    capacity: u32,
    seed: u64,
) -> Result<SimulationOutcome> {
    if !estimated.same_shape(actual) {
        return Err(Error::ShapeMismatch(
            "estimated and actual scenarios differ in products, ladders or horizon".into(),
        ));
    }
    let mut ledger = Ledger::new(capacity);
    let mut prices: Vec<f64> = estimated.products.iter().map(|p| p.max_price()).collect();
    for t in actual.selling_order() {
        if ledger.remaining > 0 {
            let plan = problem.greedy(f64::from(ledger.remaining), t)?;
            for (i, row) in plan.prices.iter().enumerate() {
                prices[i] = row[t];
            }
        }
        let arrivals = sample_arrivals(actual, t, seed);
        ledger.run_posted(t, &prices, &arrivals);
    }
    Ok(ledger.finish(seed))
}

/// Sample mean and standard deviation (`n - 1` denominator; zero when
/// `n == 1`).
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloSummary {
    pub replications: usize,
    pub master_seed: u64,
    pub mean_revenue: f64,
    pub std_revenue: f64,
    pub mean_seats: f64,
    pub std_seats: f64,
    /// Set when `replications == 1`; the standard deviations are then
    /// reported as zero.
    pub single_replication: bool,
    pub outcomes: Vec<SimulationOutcome>,
}

/// Runs `n` replications in parallel; replication `i` receives
/// `replication_seed(master_seed, i)`. Outcomes keep replication order.
pub fn monte_carlo<F>(run: F, n: usize, master_seed: u64) -> Result<MonteCarloSummary>
where
    F: Fn(u64) -> Result<SimulationOutcome> + Sync,
{
    if n == 0 {
        return Err(Error::InvalidArgument("replications must be >= 1".into()));
    }
    let outcomes = (0..n as u64)
        .into_par_iter()
        .map(|i| run(replication_seed(master_seed, i)))
        .collect::<Result<Vec<_>>>()?;
    let revenue: Vec<f64> = outcomes.iter().map(|o| o.revenue).collect();
    let seats: Vec<f64> = outcomes.iter().map(|o| f64::from(o.seats_sold)).collect();
    let (mean_revenue, std_revenue) = mean_std(&revenue);
    let (mean_seats, std_seats) = mean_std(&seats);
    Ok(MonteCarloSummary {
        replications: n,
        master_seed,
        mean_revenue,
        std_revenue,
        mean_seats,
        std_seats,
        single_replication: n == 1,
        outcomes,
    })
}

/// Column order of [`ledger_csv`].
pub const LEDGER_HEADER: &str = "replication,t,offers,arrivals,sales,revenue,remaining";

/// One line per step per replication. `offers` lists `id=fare` for posted
/// prices and `id=fare@limit` for nested classes, separated by `;`.
pub fn ledger_csv(scenario: &Scenario, outcomes: &[SimulationOutcome]) -> String {
    let mut out = String::from(LEDGER_HEADER);
    out.push('\n');
    for (r, o) in outcomes.iter().enumerate() {
        for rec in &o.ledger {
            let offers = rec
                .offers
                .iter()
                .map(|of| {
                    let id = &scenario.products[of.family].id;
                    match of.limit {
                        Some(l) => format!("{id}={:.2}@{:.2}", of.fare, l),
                        None => format!("{id}={:.2}", of.fare),
                    }
                })
                .collect::<Vec<_>>()
                .join(";");
            out.push_str(&format!(
                "{r},{},{offers},{},{},{:.2},{}\n",
                rec.t,
                rec.arrivals,
                rec.sales.len(),
                rec.revenue,
                rec.remaining_after
            ));
        }
    }
    out
}
