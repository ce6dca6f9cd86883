//! Continuous price relaxation solved through its one-dimensional Lagrangian
//! dual.
//!
//! For a capacity multiplier `mu >= 0` the inner maximization over prices is
//! attained at `p = mu + 1/beta` for every cell, which leaves
//!
//! ```text
//! f(mu)  = mu * C + sum (alpha / beta) * exp(-beta * mu - 1)
//! f'(mu) = C - sum alpha * exp(-beta * mu - 1)
//! ```
//!
//! `f` is strictly convex and `f'` strictly increasing, so the dual optimum
//! is `max(0, root of f')`. There is no duality gap; the dual value is the
//! relaxed optimum and an upper bound on any ladder-restricted plan.

use crate::demand::DemandCurve;
use crate::error::{Error, Result};
use crate::scenario::Scenario;

pub const DEFAULT_TOL: f64 = 1e-9;
pub const DEFAULT_MAX_ITER: usize = 100;

/// Optimality residuals at the returned multiplier.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktResiduals {
    /// `|f'(mu*)|` when the constraint is active, zero otherwise.
    pub gradient: f64,
    /// `C - sum q(p*)`; non-negative up to the tolerance.
    pub capacity_slack: f64,
    /// `|mu* * f'(mu*)|`.
    pub complementary_slackness: f64,
    /// `|f(mu*) - sum p* q(p*)|`.
    pub duality_gap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualSolution {
    pub mu_star: f64,
    /// One price per input cell, `mu_star + 1/beta`.
    pub prices: Vec<f64>,
    pub bound: f64,
    pub newton_iterations: usize,
    pub kkt: KktResiduals,
}

pub fn dual_objective(cells: &[DemandCurve], capacity: f64, mu: f64) -> f64 {
    mu * capacity
        + cells
            .iter()
            .filter(|c| !c.is_zero())
            .map(|c| c.alpha / c.beta * (-c.beta * mu - 1.0).exp())
            .sum::<f64>()
}

pub fn dual_gradient(cells: &[DemandCurve], capacity: f64, mu: f64) -> f64 {
    capacity - load_at(cells, mu)
}

/// `sum alpha * exp(-beta*mu - 1)`: expected demand at prices `mu + 1/beta`.
fn load_at(cells: &[DemandCurve], mu: f64) -> f64 {
    cells
        .iter()
        .filter(|c| !c.is_zero())
        .map(|c| c.alpha * (-c.beta * mu - 1.0).exp())
        .sum()
}

fn load_and_slope(cells: &[DemandCurve], mu: f64) -> (f64, f64) {
    let mut load = 0.0;
    let mut slope = 0.0;
    for c in cells.iter().filter(|c| !c.is_zero()) {
        let q = c.alpha * (-c.beta * mu - 1.0).exp();
        load += q;
        slope += c.beta * q;
    }
    (load, slope)
}

/// Safeguarded Newton iteration on `f'`, started at zero. Returns the
/// multiplier and the number of Newton/bisection steps.
pub(crate) fn find_multiplier(
    cells: &[DemandCurve],
    capacity: f64,
    tol: f64,
    max_iter: usize,
) -> Result<(f64, usize)> {
    if !(capacity > 0.0 && capacity.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "capacity must be > 0, got {capacity}"
        )));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tol must be > 0, got {tol}")));
    }
    if cells.iter().all(DemandCurve::is_zero) {
        return Err(Error::NoDemand);
    }
    let g0 = dual_gradient(cells, capacity, 0.0);
    if g0 >= 0.0 {
        return Ok((0.0, 0));
    }

    // Bracket the root: f' tends to C > 0, so doubling terminates.
    let min_beta = cells
        .iter()
        .filter(|c| !c.is_zero())
        .map(|c| c.beta)
        .fold(f64::INFINITY, f64::min);
    let mut hi = 1.0 / min_beta;
    let mut doublings = 0;
    while dual_gradient(cells, capacity, hi) <= 0.0 {
        hi *= 2.0;
        doublings += 1;
        if doublings > 2000 || !hi.is_finite() {
            return Err(Error::NonConvergence {
                iterations: 0,
                residual: g0.abs(),
            });
        }
    }
    let mut lo = 0.0;

    let target = tol * capacity;
    let mut mu = 0.0;
    let mut residual = g0;
    for iter in 0..=max_iter {
        let (load, slope) = load_and_slope(cells, mu);
        residual = capacity - load;
        if residual.abs() <= target {
            return Ok((mu, iter));
        }
        if iter == max_iter {
            break;
        }
        if residual < 0.0 {
            lo = mu;
        } else {
            hi = mu;
        }
        let newton = mu - residual / slope;
        mu = if newton > lo && newton < hi && newton.is_finite() {
            newton
        } else {
            0.5 * (lo + hi)
        };
    }
    Err(Error::NonConvergence {
        iterations: max_iter,
        residual: residual.abs(),
    })
}

/// Minimizes the dual over `mu >= 0` and recovers the primal prices.
pub fn solve_dual(
    cells: &[DemandCurve],
    capacity: f64,
    tol: f64,
    max_iter: usize,
) -> Result<DualSolution> {
    let (mu, iterations) = find_multiplier(cells, capacity, tol, max_iter)?;
    let prices: Vec<f64> = cells.iter().map(|c| mu + 1.0 / c.beta).collect();
    let bound = dual_objective(cells, capacity, mu);
    let primal: f64 = cells
        .iter()
        .zip(&prices)
        .map(|(c, &p)| c.revenue_at(p))
        .sum();
    let grad = dual_gradient(cells, capacity, mu);
    Ok(DualSolution {
        mu_star: mu,
        prices,
        bound,
        newton_iterations: iterations,
        kkt: KktResiduals {
            gradient: if mu > 0.0 { grad.abs() } else { 0.0 },
            capacity_slack: grad,
            complementary_slackness: (mu * grad).abs(),
            duality_gap: (bound - primal).abs(),
        },
    })
}

/// Relaxed optimum value over `cells` with the given capacity; zero-demand
/// cell sets have value zero.
pub(crate) fn relaxed_value(cells: &[DemandCurve], capacity: f64) -> Result<f64> {
    if cells.iter().all(DemandCurve::is_zero) {
        return Ok(0.0);
    }
    let (mu, _) = find_multiplier(cells, capacity, DEFAULT_TOL, DEFAULT_MAX_ITER)?;
    Ok(dual_objective(cells, capacity, mu))
}

/// Continuous optimum for a whole scenario (steps `0..=start_time`).
#[derive(Debug, Clone, PartialEq)]
pub struct RelaxedSolution {
    pub dual: DualSolution,
    /// `prices[product][t]` for `t <= start_time`. Zero-demand cells carry
    /// their ladder maximum.
    pub prices: Vec<Vec<f64>>,
    pub expected_demand: f64,
}

pub fn solve_relaxed(
    scenario: &Scenario,
    capacity: f64,
    start_time: usize,
    tol: f64,
    max_iter: usize,
) -> Result<RelaxedSolution> {
    if start_time >= scenario.horizon {
        return Err(Error::InvalidArgument(format!(
            "start time {start_time} outside horizon {}",
            scenario.horizon
        )));
    }
    let mut curves = Vec::new();
    for (i, _) in scenario.products.iter().enumerate() {
        for t in 0..=start_time {
            curves.push(scenario.curve(i, t));
        }
    }
    let dual = solve_dual(&curves, capacity, tol, max_iter)?;
    let width = start_time + 1;
    let mut expected_demand = 0.0;
    let prices = scenario
        .products
        .iter()
        .enumerate()
        .map(|(i, product)| {
            (0..width)
                .map(|t| {
                    let k = i * width + t;
                    if curves[k].is_zero() {
                        product.max_price()
                    } else {
                        expected_demand += curves[k].demand_at(dual.prices[k]);
                        dual.prices[k]
                    }
                })
                .collect()
        })
        .collect();
    Ok(RelaxedSolution {
        dual,
        prices,
        expected_demand,
    })
}

/// Partial price assignment over a scenario: `fixed[product][t]`.
pub type PartialAssignment = Vec<Vec<Option<f64>>>;

pub fn empty_assignment(scenario: &Scenario) -> PartialAssignment {
    vec![vec![None; scenario.horizon]; scenario.n_products()]
}

/// Revenue of the fixed cells plus the relaxed optimum of the free cells
/// under the capacity left over by the fixed cells.
pub fn relaxed_bound(scenario: &Scenario, capacity: f64, fixed: &PartialAssignment) -> Result<f64> {
    if fixed.len() != scenario.n_products() {
        return Err(Error::ShapeMismatch(format!(
            "assignment has {} products, scenario {}",
            fixed.len(),
            scenario.n_products()
        )));
    }
    let mut fixed_revenue = 0.0;
    let mut fixed_demand = 0.0;
    let mut free = Vec::new();
    for (i, (product, row)) in scenario.products.iter().zip(fixed).enumerate() {
        if row.len() != scenario.horizon {
            return Err(Error::ShapeMismatch(format!(
                "assignment row {i} has {} steps, horizon is {}",
                row.len(),
                scenario.horizon
            )));
        }
        for (t, slot) in row.iter().enumerate() {
            let curve = scenario.curve(i, t);
            match *slot {
                Some(p) => {
                    if !product.price_ladder.contains(&p) {
                        return Err(Error::InvalidArgument(format!(
                            "price {p} is not on the ladder of {}",
                            product.id
                        )));
                    }
                    fixed_revenue += curve.revenue_at(p);
                    fixed_demand += curve.demand_at(p);
                }
                None => free.push(curve),
            }
        }
    }
    bound_from_parts(fixed_revenue, fixed_demand, &free, capacity)
}

pub(crate) fn bound_from_parts(
    fixed_revenue: f64,
    fixed_demand: f64,
    free: &[DemandCurve],
    capacity: f64,
) -> Result<f64> {
    let residual = capacity - fixed_demand;
    if free.iter().all(DemandCurve::is_zero) {
        if residual < -1e-9 * capacity.max(1.0) {
            return Err(Error::Infeasible(format!(
                "fixed demand {fixed_demand:.6} exceeds capacity {capacity}"
            )));
        }
        return Ok(fixed_revenue);
    }
    if residual <= 0.0 {
        return Err(Error::Infeasible(format!(
            "no residual capacity ({residual:.6}) for the unfixed cells"
        )));
    }
    Ok(fixed_revenue + relaxed_value(free, residual)?)
}
