//! Experiment drivers behind the command-line front end, and the report
//! documents they produce.

use std::fmt::Write as _;
use std::str::FromStr;

use crate::discrete::{
    exact_optimize, greedy_optimize, plan_stats, PricingPlan, PricingProblem, SearchConfig,
};
use crate::error::{Error, Result};
use crate::policies::{classic_emsrb_policy, mrt_emsrb_policy, AvailabilityPolicy};
use crate::relaxed::{
    empty_assignment, relaxed_bound, solve_relaxed, RelaxedSolution, DEFAULT_MAX_ITER, DEFAULT_TOL,
};
use crate::scenario::Scenario;
use crate::simulator::{
    monte_carlo, simulate_fixed_prices, simulate_greedy_rolling_with, simulate_policy,
    MonteCarloSummary,
};

pub const DEFAULT_REPLICATIONS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PolicyKind {
    /// Continuous relaxed prices posted as-is.
    Relaxed,
    /// Rolling-horizon greedy re-optimization.
    Greedy,
    /// Exact branch-and-bound plan posted as fixed prices.
    Exact,
    Emsrb,
    MrtEmsrb,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 5] = [
        PolicyKind::Relaxed,
        PolicyKind::Greedy,
        PolicyKind::Exact,
        PolicyKind::Emsrb,
        PolicyKind::MrtEmsrb,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::Relaxed => "relaxed",
            PolicyKind::Greedy => "greedy",
            PolicyKind::Exact => "exact",
            PolicyKind::Emsrb => "emsrb",
            PolicyKind::MrtEmsrb => "mrt-emsrb",
        }
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PolicyKind::ALL
            .into_iter()
            .find(|k| k.name() == s.trim())
            .ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "unknown policy {s:?}; expected one of relaxed, greedy, exact, emsrb, mrt-emsrb"
                ))
            })
    }
}

/// Parses `NAME[,NAME...]`. Repeats are kept.
pub fn parse_policy_list(s: &str) -> Result<Vec<PolicyKind>> {
    if s.trim().is_empty() {
        return Err(Error::InvalidArgument("empty policy list".into()));
    }
    s.split(',').map(str::parse).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    /// Whitespace-aligned columns.
    Table,
    Csv,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "table" => Ok(Format::Table),
            "csv" => Ok(Format::Csv),
            _ => Err(Error::InvalidArgument(format!("unknown format {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Text(String),
    Int(i64),
    /// Two decimals.
    Money(f64),
    /// Fixed number of decimals.
    Real(f64, usize),
    /// Scientific notation, for residuals.
    Sci(f64),
}

impl Value {
    fn render(&self) -> String {
        fn zero(x: f64) -> f64 {
            if x == 0.0 { 0.0 } else { x }
        }
        match self {
            Value::Text(s) => s.clone(),
            Value::Int(i) => i.to_string(),
            Value::Money(x) => format!("{:.2}", zero(*x)),
            Value::Real(x, d) => format!("{:.*}", *d, zero(*x)),
            Value::Sci(x) => format!("{:.3e}", zero(*x)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Self {
            name: name.to_string(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Report {
    pub tables: Vec<Table>,
}

/// Renders a report. Identical reports render to identical bytes.
pub fn emit_report(report: &Report, format: Format) -> String {
    let mut out = String::new();
    for (k, table) in report.tables.iter().enumerate() {
        if k > 0 {
            out.push('\n');
        }
        let cells: Vec<Vec<String>> = table
            .rows
            .iter()
            .map(|r| r.iter().map(Value::render).collect())
            .collect();
        match format {
            Format::Csv => {
                let _ = writeln!(out, "# {}", table.name);
                let _ = writeln!(out, "{}", table.columns.join(","));
                for r in &cells {
                    let _ = writeln!(out, "{}", r.join(","));
                }
            }
            Format::Table => {
                let mut width: Vec<usize> = table.columns.iter().map(String::len).collect();
                for r in &cells {
                    for (w, c) in width.iter_mut().zip(r) {
                        *w = (*w).max(c.len());
                    }
                }
                let _ = writeln!(out, "## {}", table.name);
                let line = |cols: &[String]| {
                    cols.iter()
                        .zip(&width)
                        .map(|(c, w)| format!("{c:>w$}"))
                        .collect::<Vec<_>>()
                        .join("  ")
                };
                let _ = writeln!(out, "{}", line(&table.columns));
                for r in &cells {
                    let _ = writeln!(out, "{}", line(r));
                }
            }
        }
    }
    out
}

/// Capacity used by an experiment: the override when given, otherwise the
/// scenario's own.
pub fn effective_capacity(scenario: &Scenario, capacity_override: Option<u32>) -> u32 {
    capacity_override.unwrap_or(scenario.capacity)
}

// ---------------------------------------------------------------------------
// single-scenario commands

pub fn cmd_solve_relaxed(scenario: &Scenario, capacity: u32) -> Result<(RelaxedSolution, Report)> {
    let sol = solve_relaxed(
        scenario,
        f64::from(capacity),
        scenario.horizon - 1,
        DEFAULT_TOL,
        DEFAULT_MAX_ITER,
    )?;
    let mut summary = Table::new("relaxed solution", &["quantity", "value"]);
    let d = &sol.dual;
    summary.rows.push(vec![Value::Text("capacity".into()), Value::Int(i64::from(capacity))]);
    summary.rows.push(vec![Value::Text("mu_star".into()), Value::Real(d.mu_star, 6)]);
    summary.rows.push(vec![Value::Text("bound".into()), Value::Money(d.bound)]);
    summary
        .rows
        .push(vec![Value::Text("expected_demand".into()), Value::Real(sol.expected_demand, 2)]);
    summary.rows.push(vec![
        Value::Text("newton_iterations".into()),
        Value::Int(d.newton_iterations as i64),
    ]);
    summary.rows.push(vec![Value::Text("kkt_gradient".into()), Value::Sci(d.kkt.gradient)]);
    summary.rows.push(vec![
        Value::Text("kkt_capacity_slack".into()),
        Value::Sci(d.kkt.capacity_slack),
    ]);
    summary.rows.push(vec![
        Value::Text("kkt_complementary_slackness".into()),
        Value::Sci(d.kkt.complementary_slackness),
    ]);
    summary
        .rows
        .push(vec![Value::Text("duality_gap".into()), Value::Sci(d.kkt.duality_gap)]);

    let prices = price_table("relaxed prices", scenario, &sol.prices);
    Ok((
        sol,
        Report {
            tables: vec![summary, prices],
        },
    ))
}

/// `prices[product][t]` laid out in selling order, one row per step.
fn price_table(name: &str, scenario: &Scenario, prices: &[Vec<f64>]) -> Table {
    let mut cols = vec!["t".to_string()];
    cols.extend(scenario.products.iter().map(|p| p.id.clone()));
    let mut table = Table {
        name: name.to_string(),
        columns: cols,
        rows: Vec::new(),
    };
    let steps = prices.first().map_or(0, Vec::len);
    for t in (0..steps).rev() {
        let mut row = vec![Value::Int(t as i64)];
        row.extend(prices.iter().map(|r| Value::Money(r[t])));
        table.rows.push(row);
    }
    table
}

pub fn cmd_optimize(
    scenario: &Scenario,
    capacity: u32,
    exact: bool,
    config: &SearchConfig,
) -> Result<(PricingPlan, Report)> {
    let c = f64::from(capacity);
    let plan = if exact {
        exact_optimize(scenario, c, config)?
    } else {
        greedy_optimize(scenario, c, scenario.horizon - 1, config)?
    };
    if !plan.feasible {
        return Err(Error::Infeasible(format!(
            "even the highest prices exceed capacity {capacity}"
        )));
    }
    let stats = plan_stats(&plan, scenario, c)?;
    let mut summary = Table::new(
        if exact { "exact plan" } else { "greedy plan" },
        &["expected_revenue", "bound", "bound_ratio", "expected_demand"],
    );
    summary.rows.push(vec![
        Value::Money(stats.expected_revenue),
        Value::Money(stats.bound),
        Value::Real(stats.bound_ratio.unwrap_or(f64::NAN), 4),
        Value::Real(stats.expected_demand, 2),
    ]);
    let prices = price_table("prices", scenario, &plan.prices);
    Ok((
        plan,
        Report {
            tables: vec![summary, prices],
        },
    ))
}

pub fn build_policy(scenario: &Scenario, capacity: u32, kind: PolicyKind) -> Result<AvailabilityPolicy> {
    let c = f64::from(capacity);
    match kind {
        PolicyKind::Emsrb => classic_emsrb_policy(scenario, c, scenario.horizon - 1),
        PolicyKind::MrtEmsrb => mrt_emsrb_policy(scenario, c, scenario.horizon - 1),
        other => Err(Error::InvalidArgument(format!(
            "{} is not a booking-limit policy",
            other.name()
        ))),
    }
}

/// Per-step classes with protections and booking limits, selling order.
pub fn policy_report(scenario: &Scenario, policy: &AvailabilityPolicy) -> Report {
    let mut table = Table::new(
        &format!("{} policy", policy.name),
        &["t", "family", "fare", "adjusted_fare", "protection_above", "booking_limit", "status"],
    );
    for t in (0..policy.steps.len()).rev() {
        let step = &policy.steps[t];
        if let Some(nest) = &step.nest {
            for (j, c) in nest.ordered_classes.iter().enumerate() {
                let protected = if j == 0 { 0.0 } else { nest.protections[j - 1] };
                let limit = nest.booking_limits[j];
                table.rows.push(vec![
                    Value::Int(t as i64),
                    Value::Text(scenario.products[c.origin.family].id.clone()),
                    Value::Money(c.origin.fare),
                    Value::Money(c.adjusted_fare),
                    Value::Real(protected, 2),
                    Value::Real(limit, 2),
                    Value::Text(if limit >= 1.0 { "open" } else { "closed" }.into()),
                ]);
            }
        }
        for c in &step.closed {
            table.rows.push(vec![
                Value::Int(t as i64),
                Value::Text(scenario.products[c.origin.family].id.clone()),
                Value::Money(c.origin.fare),
                Value::Money(c.adjusted_fare),
                Value::Text(String::new()),
                Value::Real(0.0, 2),
                Value::Text("closed".into()),
            ]);
        }
    }
    Report {
        tables: vec![table],
    }
}

// ---------------------------------------------------------------------------
// Monte Carlo experiments

/// Simulates `kind` planned on `estimated` against passengers drawn from
/// `actual`. Every policy uses the same replication seeds, so two calls
/// with the same `master_seed` share arrival streams.
pub fn run_policy(
    estimated: &Scenario,
    actual: &Scenario,
    kind: PolicyKind,
    capacity: u32,
    replications: usize,
    master_seed: u64,
    config: &SearchConfig,
) -> Result<MonteCarloSummary> {
    if !estimated.same_shape(actual) {
        return Err(Error::ShapeMismatch(
            "estimated and actual scenarios differ in products, ladders or horizon".into(),
        ));
    }
    let c = f64::from(capacity);
    match kind {
        PolicyKind::Relaxed => {
            let sol = solve_relaxed(estimated, c, estimated.horizon - 1, DEFAULT_TOL, DEFAULT_MAX_ITER)?;
            let plan = PricingPlan {
                start_time: estimated.horizon - 1,
                prices: sol.prices,
                expected_revenue: sol.dual.bound,
                expected_demand: sol.expected_demand,
                feasible: true,
            };
            monte_carlo(|s| simulate_fixed_prices(actual, &plan, capacity, s), replications, master_seed)
        }
        PolicyKind::Exact => {
            let plan = exact_optimize(estimated, c, config)?;
            monte_carlo(|s| simulate_fixed_prices(actual, &plan, capacity, s), replications, master_seed)
        }
        PolicyKind::Greedy => {
            let problem = PricingProblem::new(estimated, config)?;
            monte_carlo(
                |s| simulate_greedy_rolling_with(&problem, estimated, actual, capacity, s),
                replications,
                master_seed,
            )
        }
        PolicyKind::Emsrb | PolicyKind::MrtEmsrb => {
            let policy = build_policy(estimated, capacity, kind)?;
            monte_carlo(|s| simulate_policy(actual, &policy, capacity, s), replications, master_seed)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub scenario: String,
    pub policy: PolicyKind,
    pub mean_revenue: f64,
    pub std_revenue: f64,
    pub mean_seats: f64,
    pub std_seats: f64,
    pub bound: f64,
    pub bound_ratio: f64,
    /// Revenues per replication, kept for paired comparisons.
    pub revenues: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ComparisonReport {
    pub replications: usize,
    pub master_seed: u64,
    pub rows: Vec<ComparisonRow>,
}

impl ComparisonReport {
    pub fn row(&self, scenario: &str, policy: PolicyKind) -> Option<&ComparisonRow> {
        self.rows
            .iter()
            .find(|r| r.scenario == scenario && r.policy == policy)
    }

    pub fn to_report(&self) -> Report {
        let mut table = Table::new(
            "comparison",
            &[
                "scenario",
                "policy",
                "mean_revenue",
                "std_revenue",
                "mean_seats",
                "std_seats",
                "bound",
                "bound_ratio",
            ],
        );
        for r in &self.rows {
            table.rows.push(vec![
                Value::Text(r.scenario.clone()),
                Value::Text(r.policy.name().into()),
                Value::Money(r.mean_revenue),
                Value::Money(r.std_revenue),
                Value::Real(r.mean_seats, 2),
                Value::Real(r.std_seats, 2),
                Value::Money(r.bound),
                Value::Real(r.bound_ratio, 4),
            ]);
        }
        Report {
            tables: vec![table],
        }
    }
}

/// Runs every policy on every scenario with the same master seed.
pub fn cmd_compare(
    scenarios: &[(String, Scenario)],
    policies: &[PolicyKind],
    capacity_override: Option<u32>,
    replications: usize,
    master_seed: u64,
    config: &SearchConfig,
) -> Result<ComparisonReport> {
    if policies.is_empty() {
        return Err(Error::InvalidArgument("no policy selected".into()));
    }
    let mut rows = Vec::new();
    for (name, scenario) in scenarios {
        let capacity = effective_capacity(scenario, capacity_override);
        let bound = relaxed_bound(scenario, f64::from(capacity), &empty_assignment(scenario))?;
        for &kind in policies {
            let mc = run_policy(scenario, scenario, kind, capacity, replications, master_seed, config)?;
            rows.push(ComparisonRow {
                scenario: name.clone(),
                policy: kind,
                mean_revenue: mc.mean_revenue,
                std_revenue: mc.std_revenue,
                mean_seats: mc.mean_seats,
                std_seats: mc.std_seats,
                bound,
                bound_ratio: if bound > 0.0 { mc.mean_revenue / bound } else { 1.0 },
                revenues: mc.outcomes.iter().map(|o| o.revenue).collect(),
            });
        }
    }
    Ok(ComparisonReport {
        replications,
        master_seed,
        rows,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RobustnessRow {
    pub estimated: String,
    pub actual: String,
    pub policy: PolicyKind,
    /// Planned on the actual scenario.
    pub potential_revenue: f64,
    pub potential_std: f64,
    /// Planned on the estimate, played against the actual scenario.
    pub achieved_revenue: f64,
    pub achieved_std: f64,
    pub achieved_seats: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RobustnessReport {
    pub rows: Vec<RobustnessRow>,
}

impl RobustnessReport {
    pub fn to_report(&self) -> Report {
        let mut table = Table::new(
            "robustness",
            &[
                "estimated",
                "actual",
                "policy",
                "potential_revenue",
                "potential_std",
                "achieved_revenue",
                "achieved_std",
                "achieved_seats",
            ],
        );
        for r in &self.rows {
            table.rows.push(vec![
                Value::Text(r.estimated.clone()),
                Value::Text(r.actual.clone()),
                Value::Text(r.policy.name().into()),
                Value::Money(r.potential_revenue),
                Value::Money(r.potential_std),
                Value::Money(r.achieved_revenue),
                Value::Money(r.achieved_std),
                Value::Real(r.achieved_seats, 2),
            ]);
        }
        Report {
            tables: vec![table],
        }
    }
}

pub fn cmd_robustness(
    estimated: &(String, Scenario),
    actual: &(String, Scenario),
    policies: &[PolicyKind],
    capacity_override: Option<u32>,
    replications: usize,
    master_seed: u64,
    config: &SearchConfig,
) -> Result<RobustnessReport> {
    if policies.is_empty() {
        return Err(Error::InvalidArgument("no policy selected".into()));
    }
    let (est_name, est) = estimated;
    let (act_name, act) = actual;
    if !est.same_shape(act) {
        return Err(Error::ShapeMismatch(format!(
            "{est_name} and {act_name} differ in products, ladders or horizon"
        )));
    }
    let capacity = effective_capacity(act, capacity_override);
    let mut rows = Vec::new();
    for &kind in policies {
        let potential = run_policy(act, act, kind, capacity, replications, master_seed, config)?;
        let achieved = if est == act {
            potential.clone()
        } else {
            run_policy(est, act, kind, capacity, replications, master_seed, config)?
        };
        rows.push(RobustnessRow {
            estimated: est_name.clone(),
            actual: act_name.clone(),
            policy: kind,
            potential_revenue: potential.mean_revenue,
            potential_std: potential.std_revenue,
            achieved_revenue: achieved.mean_revenue,
            achieved_std: achieved.std_revenue,
            achieved_seats: achieved.mean_seats,
        });
    }
    Ok(RobustnessReport { rows })
}

pub fn simulation_report(scenario_name: &str, kind: PolicyKind, mc: &MonteCarloSummary) -> Report {
    let mut table = Table::new(
        "simulation",
        &[
            "scenario",
            "policy",
            "replications",
            "seed",
            "mean_revenue",
            "std_revenue",
            "mean_seats",
            "std_seats",
        ],
    );
    table.rows.push(vec![
        Value::Text(scenario_name.into()),
        Value::Text(kind.name().into()),
        Value::Int(mc.replications as i64),
        Value::Text(mc.master_seed.to_string()),
        Value::Money(mc.mean_revenue),
        Value::Money(mc.std_revenue),
        Value::Real(mc.mean_seats, 2),
        Value::Real(mc.std_seats, 2),
    ]);
    Report {
        tables: vec![table],
    }
}
