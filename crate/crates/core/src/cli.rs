//! Command-line front end.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use sha2::{Digest, Sha256};

use crate::demand::DemandSpec;
use crate::error::Error;
use crate::network::Network;
use crate::selfcheck;
use crate::solver::{self, EquilibriumResult, Mode, SolverConfig, Status};
use crate::tables;
use crate::tntp::{self, fmt_g17};

pub const SUMMARY_FILE: &str = "summary.txt";

pub const EXIT_CONVERGED: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_ITERATION_CAP: i32 = 2;
pub const EXIT_DIVERGED: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "twostage",
    version,
    about = "Two-stage traffic equilibrium solver"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Joint demand distribution and route assignment.
    Solve(RunArgs),
    /// Route assignment of the observed trip table.
    Assign(RunArgs),
    /// Alternate distribution and assignment until they agree.
    Baseline(RunArgs),
    /// Compare the solver with closed forms and the brute-force reference.
    Selfcheck,
}

#[derive(Debug, Args)]
struct RunArgs {
    /// TNTP network file.
    #[arg(long)]
    net: PathBuf,
    /// TNTP trips file.
    #[arg(long)]
    trips: PathBuf,
    /// Entropy temperature; defaults to 5% of the mean free-flow OD cost.
    #[arg(long)]
    gamma: Option<f64>,
    /// Target gap; defaults to 1e-3 x total demand x mean free-flow time.
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long, default_value_t = 3000)]
    max_iter: usize,
    /// Replace the b column on every link.
    #[arg(long)]
    kappa: Option<f64>,
    /// Replace the power column on every link.
    #[arg(long)]
    power: Option<f64>,
    /// Output directory for tables and the run summary.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Evaluate the gap every N iterations.
    #[arg(long, default_value_t = 10)]
    gap_every: usize,
    /// Initial smoothness estimate; by default sized so the first trial
    /// step is as long as the free-flow time vector.
    #[arg(long)]
    l0: Option<f64>,
    /// Outer passes of the baseline alternation.
    #[arg(long, default_value_t = 50)]
    max_passes: usize,
    /// Keep iterating to the cap even once the gap target is met.
    #[arg(long)]
    no_early_stop: bool,
    /// Write zero elapsed times so repeated runs give identical tables.
    #[arg(long)]
    no_timing: bool,
}

impl RunArgs {
    fn config(&self) -> SolverConfig {
        SolverConfig {
            gamma: self.gamma,
            eps: self.eps,
            max_iter: self.max_iter,
            initial_lipschitz: self.l0,
            gap_every: self.gap_every,
            stop_on_gap: !self.no_early_stop,
            baseline_max_passes: self.max_passes,
            record_timing: !self.no_timing,
            ..SolverConfig::default()
        }
    }
}

/// Resolved inputs of one run, written as the summary file.
#[derive(Debug, Clone)]
pub struct RunManifest {
    pub mode: Mode,
    pub net_path: PathBuf,
    pub net_sha256: String,
    pub trips_path: PathBuf,
    pub trips_sha256: String,
    pub started_unix: u64,
    pub config: SolverConfig,
    pub kappa_override: Option<f64>,
    pub power_override: Option<f64>,
    pub artifacts: Vec<PathBuf>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt_g17).unwrap_or_else(|| "none".into())
}

pub fn summary_text(
    m: &RunManifest,
    net: &Network,
    demand: &DemandSpec,
    r: &EquilibriumResult,
) -> String {
    let c = &m.config;
    let mut s = String::new();
    let mut kv = |k: &str, v: String| {
        let _ = writeln!(s, "{k} = {v}");
    };
    kv("mode", m.mode.to_string());
    kv("status", r.status.to_string());
    kv("started_unix", m.started_unix.to_string());
    kv("net_path", m.net_path.display().to_string());
    kv("net_sha256", m.net_sha256.clone());
    kv("trips_path", m.trips_path.display().to_string());
    kv("trips_sha256", m.trips_sha256.clone());
    kv("nodes", net.node_count.to_string());
    kv("links", net.link_count().to_string());
    kv("zones", net.zone_count.to_string());
    kv("od_pairs", demand.pairs.len().to_string());
    kv("total_demand", fmt_g17(r.total_demand));
    kv("gamma", opt(r.gamma));
    kv("eps", fmt_g17(r.eps));
    kv("kappa_override", opt(m.kappa_override));
    kv("power_override", opt(m.power_override));
    kv("max_iter", c.max_iter.to_string());
    kv("initial_lipschitz", fmt_g17(r.initial_lipschitz));
    kv("gap_every", c.gap_every.to_string());
    kv("stop_on_gap", c.stop_on_gap.to_string());
    kv("inner_tol_min", fmt_g17(c.inner_tolerance.min));
    kv("inner_tol_scale", fmt_g17(c.inner_tolerance.scale));
    kv("sinkhorn_max_iter", c.sinkhorn_max_iter.to_string());
    kv("eps_mass", fmt_g17(c.sanitize.eps_mass));
    kv("big_cost_factor", fmt_g17(c.sanitize.big_cost_factor));
    kv("baseline_max_passes", c.baseline_max_passes.to_string());
    kv("baseline_tol", fmt_g17(c.baseline_tol));
    kv("iterations", r.iterations.to_string());
    kv("objective", fmt_g17(r.objective));
    kv("gap", fmt_g17(r.gap));
    kv("fixed_point_residual", fmt_g17(r.fixed_point_residual()));
    if let Some(rate) = r.history.gap_rate(50, 2000) {
        kv("gap_rate_50_2000", fmt_g17(rate));
    }
    for a in &m.artifacts {
        let name = a
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        kv(&format!("artifact.{name}"), a.display().to_string());
    }
    s
}

pub fn exit_code(status: Status) -> i32 {
    match status {
        Status::Converged => EXIT_CONVERGED,
        Status::IterationCap => EXIT_ITERATION_CAP,
        Status::Diverged => EXIT_DIVERGED,
    }
}

fn read_input(flag: &str, path: &Path) -> Result<(String, String), String> {
    let bytes = fs::read(path).map_err(|e| format!("--{flag} {}: {e}", path.display()))?;
    let digest = sha256_hex(&bytes);
    let text = String::from_utf8(bytes)
        .map_err(|_| format!("--{flag} {}: file is not valid UTF-8", path.display()))?;
    Ok((text, digest))
}

fn execute(mode: Mode, args: &RunArgs) -> Result<i32, String> {
    let started_unix = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let (net_text, net_sha256) = read_input("net", &args.net)?;
    let (trips_text, trips_sha256) = read_input("trips", &args.trips)?;
    let in_file = |path: &Path, e: Error| format!("{}: {e}", path.display());
    let net = tntp::parse_net(&net_text)
        .and_then(|n| n.with_overrides(args.kappa, args.power))
        .map_err(|e| in_file(&args.net, e))?;
    let trips = tntp::parse_trips(&trips_text).map_err(|e| in_file(&args.trips, e))?;
    if let Some(&(o, d)) = trips
        .entries
        .keys()
        .find(|&&(o, d)| o >= net.node_count || d >= net.node_count)
    {
        return Err(format!(
            "{}: trips from zone {} to zone {} reference nodes outside the network",
            args.trips.display(),
            o + 1,
            d + 1
        ));
    }
    let demand = DemandSpec::from_trips(&trips).map_err(|e| in_file(&args.trips, e))?;
    let config = args.config();
    let result = solver::solve(mode, &net, &demand, &config).map_err(|e| e.to_string())?;

    let mut artifacts =
        tables::write_tables(&net, &demand, &result, &args.out).map_err(|e| e.to_string())?;
    let summary_path = args.out.join(SUMMARY_FILE);
    artifacts.push(summary_path.clone());
    let manifest = RunManifest {
        mode,
        net_path: args.net.clone(),
        net_sha256,
        trips_path: args.trips.clone(),
        trips_sha256,
        started_unix,
        config,
        kappa_override: args.kappa,
        power_override: args.power,
        artifacts,
    };
    let summary = summary_text(&manifest, &net, &demand, &result);
    fs::write(&summary_path, &summary).map_err(|e| format!("{}: {e}", summary_path.display()))?;
    println!(
        "{mode}: {} after {} iterations, objective {}, gap {}",
        result.status,
        result.iterations,
        fmt_g17(result.objective),
        fmt_g17(result.gap)
    );
    Ok(exit_code(result.status))
}

fn run_selfcheck() -> i32 {
    let checks = selfcheck::run();
    let mut ok = true;
    for c in &checks {
        println!(
            "{} {}: {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.detail
        );
        ok &= c.passed;
    }
    if ok {
        EXIT_CONVERGED
    } else {
        EXIT_DIVERGED
    }
}

/// Parses `argv` (including the program name) and runs; returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp
                | ErrorKind::DisplayVersion
                | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => EXIT_CONVERGED,
                _ => EXIT_INPUT,
            };
        }
    };
    let (mode, args) = match &cli.command {
        Command::Selfcheck => return run_selfcheck(),
        Command::Solve(a) => (Mode::TwoStage, a),
        Command::Assign(a) => (Mode::FixedDemand, a),
        Command::Baseline(a) => (Mode::Baseline, a),
    };
    match execute(mode, args) {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            EXIT_INPUT
        }
    }
}
