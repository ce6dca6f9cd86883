use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use legrm::discrete::SearchConfig;
use legrm::experiment::{
    build_policy, cmd_compare, cmd_optimize, cmd_robustness, cmd_solve_relaxed,
    effective_capacity, emit_report, parse_policy_list, policy_report, run_policy,
    simulation_report, Format, PolicyKind, DEFAULT_REPLICATIONS,
};
use legrm::scenario::{generate_synthetic, load_scenario, save_scenario, GeneratorSpec, Scenario};
use legrm::simulator::ledger_csv;
use legrm::{Error, Result};

#[derive(Parser)]
#[command(name = "legrm", version, about = "Single-leg pricing and seat inventory experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// Scenario file. `compare` accepts it more than once.
    #[arg(long, global = true)]
    scenario: Vec<PathBuf>,
    /// Scenario that generates passengers (`robustness`, `simulate`).
    #[arg(long, global = true)]
    actual: Option<PathBuf>,
    /// Overrides the scenario capacity.
    #[arg(long, global = true)]
    capacity: Option<u32>,
    #[arg(long, global = true, default_value_t = DEFAULT_REPLICATIONS)]
    replications: usize,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// NAME[,NAME...] from relaxed, greedy, exact, emsrb, mrt-emsrb.
    #[arg(long, global = true)]
    policy: Option<String>,
    /// Require prices to be non-decreasing as departure approaches.
    #[arg(long, global = true)]
    monotone: bool,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, default_value = "table")]
    format: String,
}

#[derive(Subcommand)]
enum Command {
    SolveRelaxed,
    OptimizeGreedy,
    OptimizeExact,
    PolicyEmsrb,
    PolicyMrtEmsrb,
    Simulate {
        /// Also write the per-step sales ledger as CSV.
        #[arg(long)]
        ledger: Option<PathBuf>,
    },
    Compare,
    Robustness,
    Generate {
        /// baseline, demand-rich or demand-poor.
        #[arg(long, default_value = "baseline")]
        profile: String,
    },
}

fn read_scenario(path: &Path) -> Result<(String, Scenario)> {
    let text = fs::read_to_string(path)?;
    let name = path
        .file_stem()
        .map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned());
    Ok((name, load_scenario(&text)?))
}

fn single_scenario(common: &Common) -> Result<(String, Scenario)> {
    match common.scenario.as_slice() {
        [p] => read_scenario(p),
        [] => Err(Error::InvalidArgument("--scenario is required".into())),
        _ => Err(Error::InvalidArgument("expected exactly one --scenario".into())),
    }
}

fn write_output(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn policies(common: &Common, default: &[PolicyKind]) -> Result<Vec<PolicyKind>> {
    match &common.policy {
        Some(s) => parse_policy_list(s),
        None => Ok(default.to_vec()),
    }
}

fn run(cli: Cli) -> Result<()> {
    let c = &cli.common;
    let format: Format = c.format.parse()?;
    let config = SearchConfig {
        monotone_prices: c.monotone,
        ..SearchConfig::default()
    };
    let out = c.out.as_deref();
    let report = match &cli.command {
        Command::SolveRelaxed => {
            let (_, s) = single_scenario(c)?;
            cmd_solve_relaxed(&s, effective_capacity(&s, c.capacity))?.1
        }
        Command::OptimizeGreedy | Command::OptimizeExact => {
            let (_, s) = single_scenario(c)?;
            let exact = matches!(cli.command, Command::OptimizeExact);
            cmd_optimize(&s, effective_capacity(&s, c.capacity), exact, &config)?.1
        }
        Command::PolicyEmsrb | Command::PolicyMrtEmsrb => {
            let (_, s) = single_scenario(c)?;
            let kind = if matches!(cli.command, Command::PolicyEmsrb) {
                PolicyKind::Emsrb
            } else {
                PolicyKind::MrtEmsrb
            };
            let policy = build_policy(&s, effective_capacity(&s, c.capacity), kind)?;
            policy_report(&s, &policy)
        }
        Command::Simulate { ledger } => {
            let (name, est) = single_scenario(c)?;
            let actual = match &c.actual {
                Some(p) => read_scenario(p)?.1,
                None => est.clone(),
            };
            let kinds = policies(c, &[PolicyKind::MrtEmsrb])?;
            let [kind] = kinds.as_slice() else {
                return Err(Error::InvalidArgument("simulate takes exactly one --policy".into()));
            };
            let capacity = effective_capacity(&actual, c.capacity);
            let mc = run_policy(&est, &actual, *kind, capacity, c.replications, c.seed, &config)?;
            if let Some(path) = ledger {
                fs::write(path, ledger_csv(&actual, &mc.outcomes))?;
            }
            simulation_report(&name, *kind, &mc)
        }
        Command::Compare => {
            if c.scenario.is_empty() {
                return Err(Error::InvalidArgument("--scenario is required".into()));
            }
            let scenarios = c
                .scenario
                .iter()
                .map(|p| read_scenario(p))
                .collect::<Result<Vec<_>>>()?;
            let kinds = policies(c, &[PolicyKind::Greedy, PolicyKind::Emsrb, PolicyKind::MrtEmsrb])?;
            cmd_compare(&scenarios, &kinds, c.capacity, c.replications, c.seed, &config)?.to_report()
        }
        Command::Robustness => {
            let est = single_scenario(c)?;
            let actual = match &c.actual {
                Some(p) => read_scenario(p)?,
                None => return Err(Error::InvalidArgument("--actual is required".into())),
            };
            let kinds = policies(c, &[PolicyKind::Greedy, PolicyKind::Emsrb, PolicyKind::MrtEmsrb])?;
            cmd_robustness(&est, &actual, &kinds, c.capacity, c.replications, c.seed, &config)?
                .to_report()
        }
        Command::Generate { profile } => {
            let mut spec = match profile.as_str() {
                "baseline" => GeneratorSpec::baseline(),
                "demand-rich" => GeneratorSpec::demand_rich(),
                "demand-poor" => GeneratorSpec::demand_poor(),
                other => return Err(Error::InvalidArgument(format!("unknown profile {other:?}"))),
            };
            if let Some(cap) = c.capacity {
                spec.capacity = cap;
            }
            let s = generate_synthetic(&spec, c.seed)?;
            return write_output(out, &save_scenario(&s));
        }
    };
    write_output(out, &emit_report(&report, format))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // exit status 2 is reserved for numerical failures
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("legrm: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
