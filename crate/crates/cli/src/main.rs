//! `kaclab`: command-line driver for the Kac polynomial laboratory.
//!
//! Exit codes: 0 on success, 1 on usage or input errors, 2 when a
//! verification subcommand finds a failing check.

use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write as _};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use kaclab_core::coefficients::sample_coefficients;
use kaclab_core::evaluator::RegionEvaluator;
use kaclab_core::gram::verify_gram_grid;
use kaclab_core::lab::{
    fmt_f64, run_root_atlas, run_smallball_sweep, run_theorem_experiment, AtlasConfig, ExperimentConfig, KRule,
    SweepConfig, TRule,
};
use kaclab_core::region::build_region_spec;
use kaclab_core::smallball::BoundConstants;
use kaclab_core::{CoefficientLaw, Regime};

const OUT_ENV: &str = "KACLAB_OUT";

#[derive(Parser, Debug)]
#[command(name = "kaclab", version, about = "Random Kac polynomial laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Event counts for the small-minimum region experiment.
    Theorem(TheoremArgs),
    /// Small-ball probabilities of the discrete Fourier sums.
    Smallball(SmallballArgs),
    /// Roots of sampled polynomials.
    Roots(RootsArgs),
    /// Ball grid of the region.
    Region {
        #[command(subcommand)]
        action: RegionAction,
    },
    /// Gram determinant checks.
    Gram {
        #[command(subcommand)]
        action: GramAction,
    },
    /// Per-layer min/max of one sample on the region grid.
    Eval(EvalArgs),
}

#[derive(Subcommand, Debug)]
enum RegionAction {
    /// Centers as CSV on stdout; region.csv and region.svg under --out.
    Dump(RegionArgs),
}

#[derive(Subcommand, Debug)]
enum GramAction {
    /// Checks gram_det = n²/4 (and 0 at k = n/2) for every k.
    Verify(GramArgs),
}

#[derive(Args, Debug, Clone)]
struct RegionFlags {
    #[arg(long, default_value_t = 1.0)]
    p: f64,
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    #[arg(long, default_value = "half", value_parser = parse_regime)]
    regime: Regime,
}

#[derive(Args, Debug, Clone)]
struct RunFlags {
    #[arg(long, default_value = "rademacher", value_parser = parse_law)]
    law: CoefficientLaw,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long)]
    workers: Option<usize>,
    /// Output directory; the KACLAB_OUT environment variable takes precedence.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct TheoremArgs {
    /// Comma-separated, strictly increasing sizes.
    #[arg(long, value_delimiter = ',', default_value = "128,256,512")]
    n: Vec<usize>,
    #[arg(long, default_value_t = 200)]
    trials: u64,
    /// Also count samples with a root inside the region.
    #[arg(long)]
    roots: bool,
    #[command(flatten)]
    region: RegionFlags,
    #[command(flatten)]
    run: RunFlags,
}

#[derive(Args, Debug)]
struct SmallballArgs {
    #[arg(long, value_delimiter = ',', default_value = "256,512,1024,2048")]
    n: Vec<usize>,
    /// Frequency rules: an integer or n/d.
    #[arg(long, value_delimiter = ',', default_value = "1")]
    k: Vec<KRule>,
    /// Radius rules: a number or sqrt(n)/c.
    #[arg(long, value_delimiter = ',', default_value = "0.5,1,2,sqrt(n)/8")]
    t: Vec<TRule>,
    #[arg(long, default_value_t = 100_000)]
    trials: usize,
    /// With --c2, fills the bound column and exits 2 if a cell is not dominated.
    #[arg(long, requires = "c2")]
    c1: Option<f64>,
    #[arg(long, requires = "c1")]
    c2: Option<f64>,
    /// Constant of the bound used at k = 0 and k = n/2.
    #[arg(long, default_value_t = 1.0)]
    c_remark: f64,
    #[command(flatten)]
    run: RunFlags,
}

#[derive(Args, Debug)]
struct RootsArgs {
    #[arg(long, default_value_t = 256)]
    n: usize,
    #[arg(long, default_value_t = 1)]
    trials: u64,
    #[command(flatten)]
    region: RegionFlags,
    #[command(flatten)]
    run: RunFlags,
}

#[derive(Args, Debug)]
struct RegionArgs {
    #[arg(long)]
    n: usize,
    #[command(flatten)]
    region: RegionFlags,
    /// Most balls drawn in the SVG; larger grids are thinned by layer.
    #[arg(long, default_value_t = 4096)]
    max_balls: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct GramArgs {
    #[arg(long, value_delimiter = ',', default_value = "8,12,64,257,1024")]
    n: Vec<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    n: usize,
    #[arg(long, default_value = "rademacher", value_parser = parse_law)]
    law: CoefficientLaw,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0)]
    trial: u64,
    #[command(flatten)]
    region: RegionFlags,
}

fn parse_law(s: &str) -> std::result::Result<CoefficientLaw, String> {
    s.parse().map_err(|e: kaclab_core::KacError| e.to_string())
}

fn parse_regime(s: &str) -> std::result::Result<Regime, String> {
    s.parse().map_err(|e: kaclab_core::KacError| e.to_string())
}

fn out_dir(flag: Option<PathBuf>) -> Option<PathBuf> {
    std::env::var_os(OUT_ENV)
        .filter(|v| !v.is_empty())
        .map(PathBuf::from)
        .or(flag)
}

fn workers(flag: Option<usize>) -> usize {
    flag.unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
}

fn write_file(dir: &Path, name: &str, body: &str) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    fs::write(&path, body).with_context(|| format!("writing {}", path.display()))
}

fn emit(body: &str) -> Result<()> {
    let mut out = io::stdout().lock();
    out.write_all(body.as_bytes())?;
    out.flush()?;
    Ok(())
}

/// Outcome of a subcommand that ran to completion.
enum Status {
    Ok,
    CheckFailed,
}

fn theorem(args: TheoremArgs) -> Result<Status> {
    let cfg = ExperimentConfig {
        law: args.run.law,
        n_list: args.n,
        p: args.region.p,
        beta: args.region.beta,
        regime: args.region.regime,
        trials: args.trials,
        master_seed: args.run.seed,
        workers: workers(args.run.workers),
        out_dir: out_dir(args.run.out),
        roots: args.roots,
    };
    let report = run_theorem_experiment(&cfg)?;
    emit(&report.to_csv())?;
    Ok(Status::Ok)
}

fn smallball(args: SmallballArgs) -> Result<Status> {
    let bound = match (args.c1, args.c2) {
        (Some(c1), Some(c2)) => Some((BoundConstants { c1, c2 }, args.c_remark)),
        _ => None,
    };
    let cfg = SweepConfig {
        law: args.run.law,
        n_list: args.n,
        k_rules: args.k,
        t_rules: args.t,
        trials: args.trials,
        master_seed: args.run.seed,
        workers: workers(args.run.workers),
        out_dir: out_dir(args.run.out),
        bound,
    };
    let report = run_smallball_sweep(&cfg)?;
    emit(&report.to_csv())?;
    let undominated = report.cells.iter().filter(|c| c.dominated() == Some(false)).count();
    if undominated > 0 {
        eprintln!("{undominated} cells exceed bound + 3·ci");
        return Ok(Status::CheckFailed);
    }
    Ok(Status::Ok)
}

fn roots(args: RootsArgs) -> Result<Status> {
    let cfg = AtlasConfig {
        law: args.run.law,
        n: args.n,
        trials: args.trials,
        master_seed: args.run.seed,
        workers: workers(args.run.workers),
        out_dir: out_dir(args.run.out),
        p: args.region.p,
        beta: args.region.beta,
        regime: args.region.regime,
    };
    let report = run_root_atlas(&cfg)?;
    emit(&report.roots_csv())?;
    if let Some(ks) = report.mean_ks {
        eprintln!("mean angular KS {ks:.6} over {} samples", report.trials.len());
    }
    Ok(Status::Ok)
}

fn region_dump(args: RegionArgs) -> Result<Status> {
    let spec = build_region_spec(args.n, args.region.p, args.region.beta, args.region.regime)?;
    let csv = spec.centers_csv();
    if let Some(dir) = out_dir(args.out) {
        write_file(&dir, "region.csv", &csv)?;
        write_file(&dir, "region.svg", &spec.to_svg(&[], args.max_balls))?;
    }
    emit(&csv)?;
    Ok(Status::Ok)
}

fn gram_verify(args: GramArgs) -> Result<Status> {
    let rows = verify_gram_grid(&args.n)?;
    let mut csv = String::from("n,k,det,expected,pass\n");
    for r in &rows {
        let _ = writeln!(csv, "{},{},{},{},{}", r.n, r.k, fmt_f64(r.det), fmt_f64(r.expected), r.pass);
    }
    if let Some(dir) = out_dir(args.out) {
        write_file(&dir, "gram.csv", &csv)?;
    }
    emit(&csv)?;
    let failed = rows.iter().filter(|r| !r.pass).count();
    if failed > 0 {
        eprintln!("{failed} of {} checks failed", rows.len());
        return Ok(Status::CheckFailed);
    }
    Ok(Status::Ok)
}

fn eval(args: EvalArgs) -> Result<Status> {
    let spec = build_region_spec(args.n, args.region.p, args.region.beta, args.region.regime)?;
    let sample = sample_coefficients(args.law, args.n, args.seed, args.trial)?;
    let rows = RegionEvaluator::new(&spec).layer_extrema(&sample.coefficients)?;
    let mut csv = String::from("l,phi,min_modulus,argmin_k,max_modulus\n");
    for r in rows {
        let _ = writeln!(
            csv,
            "{},{},{},{},{}",
            r.l,
            fmt_f64(r.phi),
            fmt_f64(r.min_modulus),
            r.argmin_k,
            fmt_f64(r.max_modulus)
        );
    }
    emit(&csv)?;
    Ok(Status::Ok)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Theorem(a) => theorem(a),
        Command::Smallball(a) => smallball(a),
        Command::Roots(a) => roots(a),
        Command::Region { action: RegionAction::Dump(a) } => region_dump(a),
        Command::Gram { action: GramAction::Verify(a) } => gram_verify(a),
        Command::Eval(a) => eval(a),
    };
    match result {
        Ok(Status::Ok) => ExitCode::SUCCESS,
        Ok(Status::CheckFailed) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
