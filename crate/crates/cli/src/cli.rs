//! Command-line front end.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use platoon_core::sim::{run, EdgeBin, MetricsReport};
use platoon_core::threshold::{solve_threshold, value_iteration, PolicyParams, ThresholdError};
use platoon_core::EdgeId;

use crate::config::{parse_policy, AvailabilityEvent, ConfigError, ScenarioConfig, SweepVariable};
use crate::output::{self, Extras, LogEvent, SummaryRow};
use crate::sweep::{run_sweep, SweepPlan};

pub const OUT_DIR_ENV: &str = "PLATOON_OUT_DIR";

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_SOLVER: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "platoon", version, about = "Junction platoon coordination experiments")]
pub struct Cli {
    /// Worker threads for sweeps (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the threshold policy for one junction and print a CSV row.
    SolvePolicy(SolveArgs),
    /// Simulate one scenario.
    Run(RunArgs),
    /// Full-factorial sweep over one variable, policies and seeds.
    Sweep(SweepArgs),
    /// Disconnect an edge for a time window and log the network response.
    Resilience(ResilienceArgs),
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    /// Scenario file supplying cost, platoon and policy parameters.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Arrival rate, veh/hr.
    #[arg(long)]
    pub lambda: f64,
    /// Cruising distance after the junction, m.
    #[arg(long)]
    pub d2: f64,
    /// Coordinating zone length, m.
    #[arg(long, default_value_t = 1000.0)]
    pub d1: f64,
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Nominal speed, m/s.
    #[arg(long)]
    pub v0: Option<f64>,
    #[arg(long)]
    pub tol: Option<f64>,
    /// Also run the value-iteration oracle on this headway grid, s.
    #[arg(long)]
    pub oracle_dh: Option<f64>,
}

#[derive(Debug, Args)]
pub struct OutArgs {
    /// Output directory.
    #[arg(long, env = OUT_DIR_ENV, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub policy: Option<String>,
    #[command(flatten)]
    pub out: OutArgs,
    /// Also write routes.csv.
    #[arg(long)]
    pub routes: bool,
    /// Also write the final travel-time tables to tables.csv.
    #[arg(long)]
    pub tables: bool,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// critical_density (veh/km/ln) or od_rate (veh/hr).
    #[arg(long)]
    pub variable: Option<String>,
    #[arg(long, value_delimiter = ',')]
    pub values: Option<Vec<f64>>,
    #[arg(long = "policy", value_delimiter = ',')]
    pub policies: Option<Vec<String>>,
    #[arg(long = "seed", value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct ResilienceArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value = "threshold-network")]
    pub policy: String,
    #[arg(long, default_value_t = 18)]
    pub edge: u32,
    #[arg(long, default_value_t = 1000.0)]
    pub t_off: f64,
    #[arg(long, default_value_t = 2000.0)]
    pub t_on: f64,
    /// Run horizon, s.
    #[arg(long, default_value_t = 4000.0)]
    pub max_time: f64,
    #[command(flatten)]
    pub out: OutArgs,
}

/// Failure with an exit code attached.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub error: anyhow::Error,
}

impl Failure {
    fn usage(e: impl Into<anyhow::Error>) -> Self {
        Failure { code: EXIT_USAGE, error: e.into() }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::usage(e)
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure { code: EXIT_USAGE, error: e }
    }
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let stdout = std::io::stdout();
    match execute(cli, &mut stdout.lock()) {
        Ok(()) => EXIT_OK,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            f.code
        }
    }
}

pub fn execute(cli: Cli, out: &mut dyn Write) -> Result<(), Failure> {
    let jobs = cli.jobs;
    match cli.command {
        Command::SolvePolicy(a) => solve_policy(&a, out),
        Command::Run(a) => run_cmd(&a, out),
        Command::Sweep(a) => sweep_cmd(&a, jobs, out),
        Command::Resilience(a) => resilience_cmd(&a, out),
    }
}

fn load(path: &Option<PathBuf>) -> Result<ScenarioConfig, ConfigError> {
    match path {
        Some(p) => ScenarioConfig::load(p),
        None => Ok(ScenarioConfig::default()),
    }
}

fn solve_policy(a: &SolveArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let cfg = load(&a.config)?;
    let p = PolicyParams {
        w: cfg.weights(),
        fm: cfg.fuel_model(),
        d1: a.d1,
        d2: a.d2,
        v0: a.v0.unwrap_or(cfg.idm.v0),
        gamma: a.gamma.unwrap_or(cfg.policy.gamma),
        lambda: a.lambda / 3600.0,
    };
    let tol = a.tol.unwrap_or(cfg.policy.solver_tol);
    if let Err(e) = p.validate() {
        return Err(Failure::usage(e));
    }
    let header = "lambda_veh_per_hr,d2_m,theta_s,c_s,z_usd,r1,r2,r3,iterations,c_at_bound,status";
    let write = |out: &mut dyn Write, row: String| -> Result<(), Failure> {
        writeln!(out, "{header}\n{row}").map_err(|e| Failure::usage(anyhow::Error::from(e)))
    };
    let result = solve_threshold(&p, tol);
    let code = match result {
        Ok(s) => {
            let [r1, r2, r3] = s.residuals;
            let status = if s.c_at_bound { "converged-c-at-bound" } else { "converged" };
            write(
                out,
                format!(
                    "{},{},{},{},{},{r1:e},{r2:e},{r3:e},{},{},{status}",
                    a.lambda, a.d2, s.theta, s.c, s.z, s.iterations, s.c_at_bound
                ),
            )?;
            EXIT_OK
        }
        Err(ThresholdError::Degenerate { theta, c }) => {
            let z =
                platoon_core::threshold::merging_reward(theta, &p).map(|g| g.0 / (1.0 - p.gamma)).unwrap_or(f64::NAN);
            let r = platoon_core::threshold::residuals(theta, c, &p);
            write(
                out,
                format!("{},{},{theta},{c},{z},{:e},{:e},{:e},,false,degenerate", a.lambda, a.d2, r[0], r[1], r[2]),
            )?;
            EXIT_OK
        }
        Err(ThresholdError::SolverFailure { theta, c, iterations, .. }) => {
            let r = platoon_core::threshold::residuals(theta, c, &p);
            write(
                out,
                format!(
                    "{},{},{theta},{c},,{:e},{:e},{:e},{iterations},false,failed",
                    a.lambda, a.d2, r[0], r[1], r[2]
                ),
            )?;
            EXIT_SOLVER
        }
        Err(ThresholdError::InfeasiblePolicy { theta, .. }) => {
            write(out, format!("{},{},{theta},,,,,,,false,infeasible", a.lambda, a.d2))?;
            EXIT_SOLVER
        }
        Err(e) => return Err(Failure { code: EXIT_SOLVER, error: e.into() }),
    };
    if let Some(dh) = a.oracle_dh {
        let o = value_iteration(&p, dh).map_err(|e| Failure { code: EXIT_SOLVER, error: e.into() })?;
        writeln!(out, "# oracle dh={dh}: theta_s={} c_s={} iterations={}", o.theta, o.c, o.iterations)
            .map_err(|e| Failure::usage(anyhow::Error::from(e)))?;
    }
    if code == EXIT_OK {
        Ok(())
    } else {
        Err(Failure { code, error: anyhow::anyhow!("threshold solver did not converge") })
    }
}

fn summary_row(cfg: &ScenarioConfig, report: &MetricsReport) -> SummaryRow {
    let net = match cfg.network.kind {
        crate::config::NetworkType::NguyenDupuis => "nguyen-dupuis",
        crate::config::NetworkType::Cascade => "cascade",
        crate::config::NetworkType::Custom => "custom",
    };
    SummaryRow::new(&report.summary, net, cfg.network.critical_density_veh_per_km_ln, cfg.demand.penetration)
}

fn apply_overrides(cfg: &mut ScenarioConfig, seed: Option<u64>, policy: Option<&str>) -> Result<(), ConfigError> {
    if let Some(s) = seed {
        cfg.sim.seed = s;
    }
    if let Some(p) = policy {
        parse_policy(p).map_err(|m| ConfigError::Invalid(format!("  --policy: {m}")))?;
        cfg.policy.kind = p.to_string();
    }
    cfg.validate()
}

fn run_cmd(a: &RunArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let mut cfg = load(&a.config)?;
    apply_overrides(&mut cfg, a.seed, a.policy.as_deref())?;
    let sc = cfg.scenario()?;
    let report = run(&sc).map_err(Failure::usage)?;
    let row = summary_row(&cfg, &report);
    output::write_report(&a.out.out, &report, &row, Extras { routes: a.routes, tables: a.tables })?;
    report_line(out, &row, &a.out.out)
}

fn report_line(out: &mut dyn Write, row: &SummaryRow, dir: &Path) -> Result<(), Failure> {
    writeln!(
        out,
        "{} seed {}: {} of {} vehicles arrived, mean CAV cost {:.4} USD, {} merges -> {}",
        row.policy,
        row.seed,
        row.n_arrived,
        row.n_cav + row.n_background,
        row.mean_cav_cost_usd,
        row.merges,
        dir.display()
    )
    .map_err(|e| Failure::usage(anyhow::Error::from(e)))
}

fn sweep_cmd(a: &SweepArgs, jobs: Option<usize>, out: &mut dyn Write) -> Result<(), Failure> {
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = jobs {
        if n == 0 {
            return Err(Failure::usage(anyhow::anyhow!("--jobs must be at least 1")));
        }
        pool = pool.num_threads(n);
    }
    let pool = pool.build().map_err(|e| Failure::usage(anyhow::anyhow!(e)))?;
    let mut cfg = load(&a.config)?;
    if let Some(v) = &a.variable {
        cfg.sweep.variable = match v.as_str() {
            "critical_density" => SweepVariable::CriticalDensity,
            "od_rate" => SweepVariable::OdRate,
            other => {
                return Err(Failure::usage(anyhow::anyhow!(
                    "--variable: unknown '{other}' (expected critical_density or od_rate)"
                )))
            }
        };
    }
    if let Some(v) = &a.values {
        cfg.sweep.values = v.clone();
    }
    if let Some(p) = &a.policies {
        cfg.sweep.policies = p.clone();
    }
    if let Some(s) = &a.seeds {
        cfg.sweep.seeds = s.clone();
    }
    cfg.validate()?;
    let plan = SweepPlan::from_config(&cfg)?;
    let rows = pool.install(|| run_sweep(&cfg, &plan));
    std::fs::create_dir_all(&a.out.out).with_context(|| format!("creating {}", a.out.out.display()))?;
    let path = a.out.out.join("sweep.csv");
    output::write_rows(&path, &rows).with_context(|| format!("writing {}", path.display()))?;
    let failed = rows.iter().filter(|r| !r.ok()).count();
    writeln!(out, "{} cells ({} flagged) -> {}", rows.len(), failed, path.display())
        .map_err(|e| Failure::usage(anyhow::Error::from(e)))?;
    Ok(())
}

fn resilience_cmd(a: &ResilienceArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let mut cfg = load(&a.config)?;
    if !(0.0 <= a.t_off && a.t_off <= a.t_on && a.t_on <= a.max_time) {
        return Err(Failure::usage(anyhow::anyhow!("need 0 <= --t-off <= --t-on <= --max-time")));
    }
    cfg.sim.max_time_s = a.max_time;
    cfg.sim.availability.push(AvailabilityEvent { edge: a.edge, t_off_s: a.t_off, t_on_s: a.t_on });
    apply_overrides(&mut cfg, a.seed, Some(&a.policy))?;
    let sc = cfg.scenario()?;
    let mut report = run(&sc).map_err(Failure::usage)?;
    pad_bins(&mut report.edges, &sc, a.max_time);
    let row = summary_row(&cfg, &report);
    let dir = &a.out.out;
    output::write_report(dir, &report, &row, Extras { routes: true, tables: false })?;
    let events = event_log(&report, a.edge, a.t_off, a.t_on);
    output::write_events(std::fs::File::create(dir.join("events.csv")).context("events.csv")?, &events)
        .context("writing events.csv")?;
    report_line(out, &row, dir)
}

/// Extends the binned edge series with empty bins up to `until`.
pub fn pad_bins(bins: &mut Vec<EdgeBin>, sc: &platoon_core::Scenario, until: f64) {
    let bin = sc.sim.bin_s;
    let edges = sc.network.edges();
    let mut next = bins.last().map_or(0.0, |b| b.bin_start_s + bin);
    while next < until {
        for e in edges {
            bins.push(EdgeBin {
                bin_start_s: next,
                edge: e.id,
                mean_speed_mps: sc.v0,
                density_veh_per_m: 0.0,
                flow_veh_per_s: 0.0,
                entries: 0,
            });
        }
        next += bin;
    }
}

/// Availability changes plus every change in a probed greedy route.
pub fn event_log(report: &MetricsReport, edge: u32, t_off: f64, t_on: f64) -> Vec<LogEvent> {
    let mut log = Vec::new();
    if t_off < t_on {
        log.push(LogEvent { t_s: t_off, kind: "edge-off", detail: edge.to_string() });
        log.push(LogEvent { t_s: t_on, kind: "edge-on", detail: edge.to_string() });
    }
    let mut last: std::collections::BTreeMap<(u32, u32), &[EdgeId]> = std::collections::BTreeMap::new();
    for p in &report.routes {
        let key = (p.origin.0, p.destination.0);
        if last.get(&key).is_none_or(|prev| *prev != p.edges.as_slice()) {
            log.push(LogEvent {
                t_s: p.t_s,
                kind: "route",
                detail: format!("{}->{}: {}", key.0, key.1, output::route_string(&p.edges)),
            });
            last.insert(key, &p.edges);
        }
    }
    log.sort_by(|a, b| a.t_s.total_cmp(&b.t_s));
    log
}
