//! Ladder-restricted pricing: one price per (product, time) chosen from the
//! product's ladder to maximize expected revenue subject to expected demand
//! fitting in the cabin.
//!
//! Both searches walk the same tree. Cells are fixed in selling order
//! (`t = start_time` down to `0`, products in scenario order within a step);
//! each node is scored with the relaxed bound of its free cells.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::demand::DemandCurve;
use crate::error::{Error, Result};
use crate::relaxed::{bound_from_parts, relaxed_bound, empty_assignment};
use crate::scenario::Scenario;

/// Absolute slack on the capacity constraint.
pub const CAPACITY_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct SearchConfig {
    /// Only consider plans whose prices never decrease toward departure.
    pub monotone_prices: bool,
    /// Drop ladder prices dominated by a higher price with at least the same
    /// revenue. Ignored when `monotone_prices` is set.
    pub prune_dominated: bool,
    /// Node budget for [`exact_optimize`]; also caps the product of the
    /// candidate ladder sizes.
    pub exact_size_limit: usize,
    /// Relative slack when comparing a node bound with the incumbent.
    pub bound_tolerance: f64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            monotone_prices: false,
            prune_dominated: true,
            exact_size_limit: 1_000_000,
            bound_tolerance: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PricingPlan {
    /// Last step covered; steps above it are in the past.
    pub start_time: usize,
    /// `prices[product][t]` for `t <= start_time`.
    pub prices: Vec<Vec<f64>>,
    pub expected_revenue: f64,
    pub expected_demand: f64,
    /// False when even the all-maximum-price plan overflows capacity; the
    /// plan then holds the ladder maxima.
    pub feasible: bool,
}

fn approx_ge(a: f64, b: f64) -> bool {
    a >= b - 1e-12 * a.abs().max(b.abs()).max(1.0)
}

/// Removes every price for which a higher ladder price earns at least as
/// much; the higher price also consumes less capacity.
pub fn prune_dominated_prices(ladder: &[f64], curve: &DemandCurve) -> Result<Vec<f64>> {
    if ladder.is_empty() {
        return Err(Error::InvalidArgument("empty price ladder".into()));
    }
    let mut kept = Vec::with_capacity(ladder.len());
    let mut best_above = f64::NEG_INFINITY;
    for &p in ladder.iter().rev() {
        let r = curve.revenue_at(p);
        if best_above.is_finite() && approx_ge(best_above, r) {
            continue;
        }
        kept.push(p);
        best_above = best_above.max(r);
    }
    kept.reverse();
    Ok(kept)
}

/// Least expected demand any completion can induce: every free cell at the
/// top of its ladder.
pub fn residual_min_demand<'a, I>(cells: I) -> f64
where
    I: IntoIterator<Item = (&'a DemandCurve, &'a [f64])>,
{
    cells
        .into_iter()
        .map(|(c, ladder)| ladder.last().map_or(0.0, |&p| c.demand_at(p)))
        .sum()
}

/// Cells of a scenario in visitation order with their candidate prices.
/// Built once and reused across capacities and start times.
#[derive(Debug, Clone)]
pub struct PricingProblem {
    n_products: usize,
    horizon: usize,
    monotone: bool,
    /// `(product, t)` per position, `t` descending from `horizon - 1`.
    slots: Vec<(usize, usize)>,
    curves: Vec<DemandCurve>,
    candidates: Vec<Vec<f64>>,
    max_price: Vec<f64>,
}

impl PricingProblem {
    pub fn new(scenario: &Scenario, config: &SearchConfig) -> Result<Self> {
        let n = scenario.n_products();
        let mut slots = Vec::with_capacity(n * scenario.horizon);
        let mut curves = Vec::with_capacity(slots.capacity());
        let mut candidates = Vec::with_capacity(slots.capacity());
        let mut max_price = Vec::with_capacity(slots.capacity());
        for t in scenario.selling_order() {
            for (i, product) in scenario.products.iter().enumerate() {
                let curve = scenario.curve(i, t);
                let cands = if config.prune_dominated && !config.monotone_prices {
                    prune_dominated_prices(&product.price_ladder, &curve)?
                } else {
                    product.price_ladder.clone()
                };
                slots.push((i, t));
                curves.push(curve);
                candidates.push(cands);
                max_price.push(product.max_price());
            }
        }
        Ok(Self {
            n_products: n,
            horizon: scenario.horizon,
            monotone: config.monotone_prices,
            slots,
            curves,
            candidates,
            max_price,
        })
    }

    /// Candidate prices of cell `(product, t)` after pruning.
    pub fn candidates(&self, product: usize, t: usize) -> &[f64] {
        let k = (self.horizon - 1 - t) * self.n_products + product;
        &self.candidates[k]
    }

    fn view(&self, capacity: f64, start_time: usize) -> Result<View<'_>> {
        if start_time >= self.horizon {
            return Err(Error::InvalidArgument(format!(
                "start time {start_time} outside horizon {}",
                self.horizon
            )));
        }
        if !(capacity >= 0.0 && capacity.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "capacity must be >= 0, got {capacity}"
            )));
        }
        let offset = (self.horizon - 1 - start_time) * self.n_products;
        let len = self.slots.len() - offset;
        let mut suffix_min = vec![0.0; len + 1];
        for k in (0..len).rev() {
            let g = offset + k;
            suffix_min[k] = suffix_min[k + 1] + self.curves[g].demand_at(self.max_price[g]);
        }
        Ok(View {
            problem: self,
            offset,
            len,
            capacity,
            start_time,
            suffix_min,
        })
    }

    pub fn greedy(&self, capacity: f64, start_time: usize) -> Result<PricingPlan> {
        self.view(capacity, start_time)?.greedy()
    }

    pub fn exact(&self, capacity: f64, start_time: usize, config: &SearchConfig) -> Result<PricingPlan> {
        self.view(capacity, start_time)?.exact(config)
    }
}

struct View<'a> {
    problem: &'a PricingProblem,
    offset: usize,
    len: usize,
    capacity: f64,
    start_time: usize,
    /// `suffix_min[k]`: demand of cells `k..` at their ladder maxima.
    suffix_min: Vec<f64>,
}

struct Child {
    price: f64,
    revenue: f64,
    demand: f64,
    bound: f64,
}

impl View<'_> {
    fn curve(&self, k: usize) -> &DemandCurve {
        &self.problem.curves[self.offset + k]
    }

    fn free_curves(&self, from: usize) -> &[DemandCurve] {
        &self.problem.curves[self.offset + from..]
    }

    /// Lowest price allowed at position `k` given the prices fixed so far.
    fn floor_price(&self, k: usize, prices: &[f64]) -> f64 {
        let n = self.problem.n_products;
        if self.problem.monotone && k >= n {
            prices[k - n]
        } else {
            f64::NEG_INFINITY
        }
    }

    /// Feasible children of the node at depth `k`, best bound first, ties
    /// broken toward the higher price.
    fn children(&self, k: usize, prices: &[f64], revenue: f64, demand: f64) -> Result<Vec<Child>> {
        let curve = self.curve(k);
        let floor = self.floor_price(k, prices);
        let mut out = Vec::new();
        for &p in self.problem.candidates[self.offset + k].iter().rev() {
            if p < floor {
                continue;
            }
            let d = demand + curve.demand_at(p);
            if d + self.suffix_min[k + 1] > self.capacity + CAPACITY_EPS {
                continue;
            }
            let r = revenue + curve.revenue_at(p);
            let bound = match bound_from_parts(r, d, self.free_curves(k + 1), self.capacity) {
                Ok(b) => b,
                Err(Error::Infeasible(_)) => continue,
                Err(e) => return Err(e),
            };
            out.push(Child {
                price: p,
                revenue: r,
                demand: d,
                bound,
            });
        }
        // candidates arrive highest price first; a stable selection keeps
        // that order among equal bounds
        let mut ordered = Vec::with_capacity(out.len());
        while !out.is_empty() {
            let mut best = 0;
            for j in 1..out.len() {
                if !approx_ge(out[best].bound, out[j].bound) {
                    best = j;
                }
            }
            ordered.push(out.remove(best));
        }
        Ok(ordered)
    }

    fn plan_from(&self, prices: &[f64], feasible: bool) -> PricingPlan {
        let n = self.problem.n_products;
        let mut table = vec![vec![0.0; self.start_time + 1]; n];
        let mut revenue = 0.0;
        let mut demand = 0.0;
        for (k, &p) in prices.iter().enumerate() {
            let (i, t) = self.problem.slots[self.offset + k];
            table[i][t] = p;
            revenue += self.curve(k).revenue_at(p);
            demand += self.curve(k).demand_at(p);
        }
        PricingPlan {
            start_time: self.start_time,
            prices: table,
            expected_revenue: revenue,
            expected_demand: demand,
            feasible,
        }
    }

    fn all_max(&self, feasible: bool) -> PricingPlan {
        let prices: Vec<f64> = (0..self.len)
            .map(|k| self.problem.max_price[self.offset + k])
            .collect();
        self.plan_from(&prices, feasible)
    }

    fn root_feasible(&self) -> bool {
        self.suffix_min[0] <= self.capacity + CAPACITY_EPS
    }

    fn greedy(&self) -> Result<PricingPlan> {
        if !self.root_feasible() {
            return Ok(self.all_max(false));
        }
        struct Frame {
            children: Vec<Child>,
            next: usize,
        }
        let mut prices: Vec<f64> = Vec::with_capacity(self.len);
        let mut stack = vec![Frame {
            children: self.children(0, &prices, 0.0, 0.0)?,
            next: 0,
        }];
        while !stack.is_empty() {
            let depth = stack.len() - 1;
            let frame = &mut stack[depth];
            prices.truncate(depth);
            if frame.next >= frame.children.len() {
                // dead end: climb to the parent and try its next-best child
                stack.pop();
                continue;
            }
            let child = &frame.children[frame.next];
            frame.next += 1;
            prices.push(child.price);
            if depth + 1 == self.len {
                return Ok(self.plan_from(&prices, true));
            }
            let (r, d) = (child.revenue, child.demand);
            let children = self.children(depth + 1, &prices, r, d)?;
            stack.push(Frame { children, next: 0 });
        }
        Ok(self.all_max(false))
    }

    fn exact(&self, config: &SearchConfig) -> Result<PricingPlan> {
        if config.exact_size_limit == 0 {
            return Err(Error::InvalidArgument("exact_size_limit must be > 0".into()));
        }
        let mut size: usize = 1;
        for k in 0..self.len {
            size = size.saturating_mul(self.problem.candidates[self.offset + k].len());
        }
        if size > config.exact_size_limit {
            return Err(Error::NodeBudgetExceeded {
                limit: config.exact_size_limit,
            });
        }
        if !self.root_feasible() {
            return Ok(self.all_max(false));
        }

        let tol = config.bound_tolerance;
        let dominated = |bound: f64, incumbent: f64| bound <= incumbent + tol * incumbent.abs().max(1.0);

        let root_bound = bound_from_parts(0.0, 0.0, self.free_curves(0), self.capacity)?;
        let mut heap = BinaryHeap::new();
        let mut seq = 0u64;
        heap.push(Node {
            bound: root_bound,
            seq,
            prices: Vec::new(),
            revenue: 0.0,
            demand: 0.0,
        });
        let mut incumbent = f64::NEG_INFINITY;
        let mut best: Option<Vec<f64>> = None;
        let mut expanded = 0usize;

        while let Some(node) = heap.pop() {
            if best.is_some() && dominated(node.bound, incumbent) {
                break;
            }
            expanded += 1;
            if expanded > config.exact_size_limit {
                return Err(Error::NodeBudgetExceeded {
                    limit: config.exact_size_limit,
                });
            }
            let depth = node.prices.len();
            for child in self.children(depth, &node.prices, node.revenue, node.demand)? {
                let mut prices = node.prices.clone();
                prices.push(child.price);
                if depth + 1 == self.len {
                    if best.is_none() || child.revenue > incumbent {
                        incumbent = child.revenue;
                        best = Some(prices);
                    }
                } else if best.is_none() || !dominated(child.bound, incumbent) {
                    seq += 1;
                    heap.push(Node {
                        bound: child.bound,
                        seq,
                        prices,
                        revenue: child.revenue,
                        demand: child.demand,
                    });
                }
            }
        }
        match best {
            Some(prices) => Ok(self.plan_from(&prices, true)),
            None => Ok(self.all_max(false)),
        }
    }
}

struct Node {
    bound: f64,
    seq: u64,
    prices: Vec<f64>,
    revenue: f64,
    demand: f64,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Node {}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Node {
    // max-heap on bound; earlier insertion wins ties
    fn cmp(&self, other: &Self) -> Ordering {
        self.bound
            .total_cmp(&other.bound)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

/// Bound-guided greedy descent with backtracking on capacity dead ends.
/// Cells with `t > start_time` are in the past and left out.
pub fn greedy_optimize(
    scenario: &Scenario,
    capacity: f64,
    start_time: usize,
    config: &SearchConfig,
) -> Result<PricingPlan> {
    PricingProblem::new(scenario, config)?.greedy(capacity, start_time)
}

/// Best-first branch and bound over the whole horizon. Only meant for
/// small instances; larger ones fail with [`Error::NodeBudgetExceeded`].
pub fn exact_optimize(scenario: &Scenario, capacity: f64, config: &SearchConfig) -> Result<PricingPlan> {
    PricingProblem::new(scenario, config)?.exact(capacity, scenario.horizon - 1, config)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanStats {
    pub expected_revenue: f64,
    pub expected_demand: f64,
    /// Relaxed optimum over the plan's cells.
    pub bound: f64,
    /// `expected_revenue / bound`; `None` when the bound is undefined
    /// (no capacity for a demand-carrying plan).
    pub bound_ratio: Option<f64>,
}

pub fn plan_stats(plan: &PricingPlan, scenario: &Scenario, capacity: f64) -> Result<PlanStats> {
    if plan.prices.len() != scenario.n_products()
        || plan.start_time >= scenario.horizon
        || plan.prices.iter().any(|row| row.len() != plan.start_time + 1)
    {
        return Err(Error::ShapeMismatch("plan does not match scenario".into()));
    }
    let mut revenue = 0.0;
    let mut demand = 0.0;
    let mut curves = Vec::new();
    for (i, row) in plan.prices.iter().enumerate() {
        for (t, &p) in row.iter().enumerate() {
            let c = scenario.curve(i, t);
            revenue += c.revenue_at(p);
            demand += c.demand_at(p);
            curves.push(c);
        }
    }
    let bound = if plan.start_time + 1 == scenario.horizon {
        relaxed_bound(scenario, capacity, &empty_assignment(scenario))
    } else {
        bound_from_parts(0.0, 0.0, &curves, capacity)
    };
    let (bound, ratio) = match bound {
        Ok(b) if b > 0.0 => (b, Some(revenue / b)),
        Ok(b) => (b, Some(1.0)),
        Err(Error::Infeasible(_)) | Err(Error::InvalidArgument(_)) => (f64::NAN, None),
        Err(e) => return Err(e),
    };
    Ok(PlanStats {
        expected_revenue: revenue,
        expected_demand: demand,
        bound,
        bound_ratio: ratio,
    })
}
