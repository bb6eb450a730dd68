//! Experiment drivers: the zero-free-region event counts, small-ball sweeps
//! and root atlases, with reproducible CSV/JSON output.
//!
//! Every report is a pure function of its config and master seed. Worker
//! count only sizes the thread pool; per-trial results are collected in
//! trial order before any aggregation, and wall times go to a separate
//! `timing.json` so the report files themselves never change.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::coefficients::{CoefficientLaw, PolynomialSample};
use crate::error::{KacError, Result};
use crate::evaluator::{tail_functional, RegionEvaluator};
use crate::region::{build_region_spec, unit_angle, Regime, RegionSpec};
use crate::rng::{derive_seed, trial_rng};
use crate::roots::{angular_ks, default_tol, find_roots, radial_stats, region_root_count, RootSet, DEFAULT_MAX_ITER};
use crate::smallball::{attach_bound, fit_scaling, mc_small_ball_multi, BoundConstants, SmallBallEstimate};
use crate::stats::{binomial_halfwidth, compensated_sum, least_squares, LinearFit, Z95};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Rows with fewer hits than this are left out of slope fits.
pub const MIN_FIT_HITS: u64 = 5;

/// Largest `trials · n` a root atlas accepts.
pub const ATLAS_BUDGET: u64 = 10_000_000;

/// Fixed-width float for CSV cells: 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

fn thread_pool(workers: usize) -> Result<rayon::ThreadPool> {
    if workers == 0 {
        return Err(KacError::Precondition("workers must be >= 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| KacError::Precondition(format!("thread pool: {e}")))
}

/// Output files opened (and truncated) up front, so an unwritable
/// destination fails before any computation starts.
struct Outputs {
    files: Vec<(PathBuf, File)>,
}

impl Outputs {
    fn open(dir: Option<&Path>, names: &[&str]) -> Result<Self> {
        let Some(dir) = dir else {
            return Ok(Self { files: Vec::new() });
        };
        fs::create_dir_all(dir).map_err(|e| KacError::io(dir, e))?;
        let files = names
            .iter()
            .map(|name| {
                let path = dir.join(name);
                File::create(&path)
                    .map(|f| (path.clone(), f))
                    .map_err(|e| KacError::io(path, e))
            })
            .collect::<Result<_>>()?;
        Ok(Self { files })
    }

    /// Writes `contents` in the order the names were given.
    fn write(self, contents: &[&str]) -> Result<()> {
        for ((path, mut file), body) in self.files.into_iter().zip(contents) {
            file.write_all(body.as_bytes())
                .map_err(|e| KacError::io(path, e))?;
        }
        Ok(())
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report types serialize");
    s.push('\n');
    s
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub law: CoefficientLaw,
    pub n_list: Vec<usize>,
    pub p: f64,
    pub beta: f64,
    pub regime: Regime,
    pub trials: u64,
    pub master_seed: u64,
    pub workers: usize,
    pub out_dir: Option<PathBuf>,
    /// Also locate roots and report the share of samples with a root in the region.
    pub roots: bool,
}

impl ExperimentConfig {
    pub fn new(law: CoefficientLaw, n_list: Vec<usize>, trials: u64, master_seed: u64) -> Self {
        Self {
            law,
            n_list,
            p: 1.0,
            beta: 1.0,
            regime: Regime::Half,
            trials,
            master_seed,
            workers: 1,
            out_dir: None,
            roots: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.law.validate()?;
        if self.n_list.is_empty() {
            return Err(KacError::Precondition("n_list is empty".into()));
        }
        if self.n_list.windows(2).any(|w| w[0] >= w[1]) {
            return Err(KacError::Precondition(
                "n_list must be strictly increasing".into(),
            ));
        }
        if self.trials == 0 {
            return Err(KacError::Precondition("trials must be >= 1".into()));
        }
        if self.workers == 0 {
            return Err(KacError::Precondition("workers must be >= 1".into()));
        }
        Ok(())
    }

    /// Seed used for the trials at size `n`.
    pub fn seed_for(&self, n: usize) -> u64 {
        derive_seed(self.master_seed, n as u64)
    }
}

/// The config fields that determine the results (no workers, no paths).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfigEcho {
    pub law: String,
    pub n_list: Vec<usize>,
    pub p: f64,
    pub beta: f64,
    pub regime: String,
    pub trials: u64,
    pub master_seed: u64,
    pub roots: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TheoremRow {
    pub n: usize,
    pub trials: u64,
    pub delta: f64,
    pub g: f64,
    pub threshold: f64,
    pub slack: f64,
    pub balls: u64,
    pub count_min_event: u64,
    pub count_joint_event: u64,
    pub count_fn_fail: u64,
    pub mean_min_modulus: f64,
    pub ci_min_event: f64,
    pub ci_joint_event: f64,
    pub ci_fn_fail: f64,
    pub count_root_in_region: Option<u64>,
    pub root_in_region_rate: Option<f64>,
    pub ci_root_in_region: Option<f64>,
    /// Samples whose root iteration hit the iteration cap.
    pub unconverged_roots: Option<u64>,
}

impl TheoremRow {
    pub fn min_event_rate(&self) -> f64 {
        self.count_min_event as f64 / self.trials as f64
    }
    pub fn joint_event_rate(&self) -> f64 {
        self.count_joint_event as f64 / self.trials as f64
    }
    pub fn fn_fail_rate(&self) -> f64 {
        self.count_fn_fail as f64 / self.trials as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EventFit {
    pub family: String,
    /// Sizes whose rows had enough hits to enter the fit.
    pub rows_used: Vec<usize>,
    pub fit: Option<LinearFit>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentReport {
    pub version: String,
    pub config: ConfigEcho,
    pub rows: Vec<TheoremRow>,
    pub fits: Vec<EventFit>,
    /// Wall seconds per row; kept out of the CSV and JSON report.
    #[serde(skip)]
    pub row_seconds: Vec<f64>,
}

pub const THEOREM_CSV_HEADER: &str = "n,trials,delta,g,threshold,slack,balls,count_min_event,count_joint_event,count_fn_fail,mean_min_modulus,p_min_event,ci_min_event,p_joint_event,ci_joint_event,p_fn_fail,ci_fn_fail,count_root_in_region,root_in_region_rate,ci_root_in_region,unconverged_roots";

impl ExperimentReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from(THEOREM_CSV_HEADER);
        s.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                r.n,
                r.trials,
                fmt_f64(r.delta),
                fmt_f64(r.g),
                fmt_f64(r.threshold),
                fmt_f64(r.slack),
                r.balls,
                r.count_min_event,
                r.count_joint_event,
                r.count_fn_fail,
                fmt_f64(r.mean_min_modulus),
                fmt_f64(r.min_event_rate()),
                fmt_f64(r.ci_min_event),
                fmt_f64(r.joint_event_rate()),
                fmt_f64(r.ci_joint_event),
                fmt_f64(r.fn_fail_rate()),
                fmt_f64(r.ci_fn_fail),
                r.count_root_in_region.map(|c| c.to_string()).unwrap_or_default(),
                fmt_opt(r.root_in_region_rate),
                fmt_opt(r.ci_root_in_region),
                r.unconverged_roots.map(|c| c.to_string()).unwrap_or_default(),
            );
        }
        s
    }

    pub fn to_json(&self) -> String {
        to_json(self)
    }

    pub fn fits_csv(&self) -> String {
        let mut s = String::from("family,rows_used,slope,intercept,r2\n");
        for f in &self.fits {
            let used = f.rows_used.iter().map(|n| n.to_string()).collect::<Vec<_>>().join(" ");
            let (slope, intercept, r2) = match &f.fit {
                Some(fit) => (fmt_f64(fit.slope), fmt_f64(fit.intercept), fmt_f64(fit.r2)),
                None => Default::default(),
            };
            let _ = writeln!(s, "{},{},{},{},{}", f.family, used, slope, intercept, r2);
        }
        s
    }

    pub fn timing_json(&self) -> String {
        #[derive(Serialize)]
        struct Timing {
            n: usize,
            seconds: f64,
        }
        let rows: Vec<Timing> = self
            .rows
            .iter()
            .zip(&self.row_seconds)
            .map(|(r, &seconds)| Timing { n: r.n, seconds })
            .collect();
        to_json(&rows)
    }

    pub fn row(&self, n: usize) -> Option<&TheoremRow> {
        self.rows.iter().find(|r| r.n == n)
    }
}

/// Two-sample pooled 95% half-width for a difference of proportions;
/// `3/min(trials)` when neither sample has a hit.
pub fn pooled_halfwidth(hits_a: u64, trials_a: u64, hits_b: u64, trials_b: u64) -> f64 {
    let total = (trials_a + trials_b) as f64;
    let p = (hits_a + hits_b) as f64 / total;
    if hits_a + hits_b == 0 {
        return 3.0 / trials_a.min(trials_b) as f64;
    }
    Z95 * (p * (1.0 - p) * (1.0 / trials_a as f64 + 1.0 / trials_b as f64)).sqrt()
}

#[derive(Debug, Clone, Copy)]
struct TrialOutcome {
    min_modulus: f64,
    min_event: bool,
    joint_event: bool,
    fn_fail: bool,
    roots_in_region: Option<(bool, bool)>,
}

fn theorem_trial(
    cfg: &ExperimentConfig,
    spec: &RegionSpec,
    seed: u64,
    trial: u64,
    eval: &mut RegionEvaluator,
    buf: &mut [f64],
) -> Result<TrialOutcome> {
    cfg.law.fill(&mut trial_rng(seed, trial), buf);
    let ext = eval.extrema(buf)?;
    let min_event = ext.min_modulus <= spec.min_threshold() + spec.slack();
    let roots_in_region = if cfg.roots {
        let sample = PolynomialSample {
            coefficients: buf.to_vec(),
            law: Some(cfg.law),
            seed,
            trial_index: trial,
        };
        let rs = find_roots(&sample, default_tol(spec.n), DEFAULT_MAX_ITER)?;
        Some((region_root_count(&rs, spec)? > 0, rs.converged))
    } else {
        None
    };
    Ok(TrialOutcome {
        min_modulus: ext.min_modulus,
        min_event,
        joint_event: min_event && ext.max_modulus <= spec.g,
        fn_fail: tail_functional(buf, spec.delta) > spec.g,
        roots_in_region,
    })
}

fn fit_family(rows: &[TheoremRow], family: &str, hits: impl Fn(&TheoremRow) -> Option<u64>) -> EventFit {
    let used: Vec<(usize, f64)> = rows
        .iter()
        .filter_map(|r| hits(r).map(|h| (r.n, h, r.trials)))
        .filter(|&(_, h, _)| h >= MIN_FIT_HITS)
        .map(|(n, h, t)| (n, h as f64 / t as f64))
        .collect();
    let xs: Vec<f64> = used.iter().map(|(n, _)| (*n as f64).ln()).collect();
    let ys: Vec<f64> = used.iter().map(|(_, p)| p.ln()).collect();
    EventFit {
        family: family.into(),
        rows_used: used.iter().map(|(n, _)| *n).collect(),
        fit: if xs.len() >= 2 { least_squares(&xs, &ys).ok() } else { None },
    }
}

/// Counts, for each `n`, how often the sampled polynomial comes close to zero
/// on the ball centers of the region, and related events.
///
/// * min event: `min over centers |G_n| <= threshold + g·δ`
/// * joint event: min event and `max over centers |G_n| <= g`
/// * F_n failure: `Σ|ξ_j|(1+δ)^j > g`, an upper bound on the disk maximum
///
/// With `out_dir` set, writes `theorem.csv`, `theorem_fit.csv`,
/// `theorem.json` and `timing.json`.
pub fn run_theorem_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let specs = cfg
        .n_list
        .iter()
        .map(|&n| build_region_spec(n, cfg.p, cfg.beta, cfg.regime))
        .collect::<Result<Vec<_>>>()?;
    let outputs = Outputs::open(
        cfg.out_dir.as_deref(),
        &["theorem.csv", "theorem_fit.csv", "theorem.json", "timing.json"],
    )?;
    let pool = thread_pool(cfg.workers)?;

    let mut rows = Vec::with_capacity(specs.len());
    let mut row_seconds = Vec::with_capacity(specs.len());
    for spec in &specs {
        let start = Instant::now();
        let seed = cfg.seed_for(spec.n);
        let outcomes: Vec<TrialOutcome> = pool.install(|| {
            (0..cfg.trials)
                .into_par_iter()
                .map_init(
                    || (RegionEvaluator::new(spec), vec![0.0; spec.n]),
                    |(eval, buf), trial| theorem_trial(cfg, spec, seed, trial, eval, buf),
                )
                .collect::<Result<_>>()
        })?;
        row_seconds.push(start.elapsed().as_secs_f64());
        rows.push(summarize(spec, cfg.trials, &outcomes));
    }

    let fits = vec![
        fit_family(&rows, "min_event", |r| Some(r.count_min_event)),
        fit_family(&rows, "joint_event", |r| Some(r.count_joint_event)),
        fit_family(&rows, "fn_fail", |r| Some(r.count_fn_fail)),
        fit_family(&rows, "root_in_region", |r| r.count_root_in_region),
    ];
    let report = ExperimentReport {
        version: VERSION.into(),
        config: ConfigEcho {
            law: cfg.law.to_string(),
            n_list: cfg.n_list.clone(),
            p: cfg.p,
            beta: cfg.beta,
            regime: cfg.regime.to_string(),
            trials: cfg.trials,
            master_seed: cfg.master_seed,
            roots: cfg.roots,
        },
        rows,
        fits,
        row_seconds,
    };
    outputs.write(&[
        &report.to_csv(),
        &report.fits_csv(),
        &report.to_json(),
        &report.timing_json(),
    ])?;
    Ok(report)
}

fn summarize(spec: &RegionSpec, trials: u64, outcomes: &[TrialOutcome]) -> TheoremRow {
    let count = |f: fn(&TrialOutcome) -> bool| outcomes.iter().filter(|o| f(o)).count() as u64;
    let count_min_event = count(|o| o.min_event);
    let count_joint_event = count(|o| o.joint_event);
    let count_fn_fail = count(|o| o.fn_fail);
    let roots: Option<Vec<(bool, bool)>> = outcomes.iter().map(|o| o.roots_in_region).collect();
    let count_root = roots
        .as_ref()
        .map(|r| r.iter().filter(|(inside, _)| *inside).count() as u64);
    TheoremRow {
        n: spec.n,
        trials,
        delta: spec.delta,
        g: spec.g,
        threshold: spec.min_threshold(),
        slack: spec.slack(),
        balls: spec.ball_count(),
        count_min_event,
        count_joint_event,
        count_fn_fail,
        mean_min_modulus: compensated_sum(outcomes.iter().map(|o| o.min_modulus)) / trials as f64,
        ci_min_event: binomial_halfwidth(count_min_event, trials),
        ci_joint_event: binomial_halfwidth(count_joint_event, trials),
        ci_fn_fail: binomial_halfwidth(count_fn_fail, trials),
        count_root_in_region: count_root,
        root_in_region_rate: count_root.map(|c| c as f64 / trials as f64),
        ci_root_in_region: count_root.map(|c| binomial_halfwidth(c, trials)),
        unconverged_roots: roots.map(|r| r.iter().filter(|(_, conv)| !conv).count() as u64),
    }
}

/// How the frequency `k` of a sweep cell is derived from `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum KRule {
    Fixed(usize),
    /// `k = n / d` (integer division).
    NOver(usize),
}

impl KRule {
    pub fn resolve(self, n: usize) -> Result<usize> {
        let k = match self {
            KRule::Fixed(k) => k,
            KRule::NOver(0) => return Err(KacError::Precondition("k rule n/0".into())),
            KRule::NOver(d) => n / d,
        };
        if k >= n {
            return Err(KacError::IndexOutOfRange { index: k, len: n });
        }
        Ok(k)
    }
}

impl std::fmt::Display for KRule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            KRule::Fixed(k) => write!(f, "k={k}"),
            KRule::NOver(d) => write!(f, "k=n/{d}"),
        }
    }
}

impl std::str::FromStr for KRule {
    type Err = KacError;

    /// `7` or `n/4`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || KacError::Parse(format!("bad k rule `{s}` (expected an integer or n/d)"));
        match s.strip_prefix("n/") {
            Some(d) => d.parse().map(KRule::NOver).map_err(|_| bad()),
            None => s.parse().map(KRule::Fixed).map_err(|_| bad()),
        }
    }
}

/// How the radius `t` of a sweep cell is derived from `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum TRule {
    Fixed(f64),
    /// `t = √n / c`.
    SqrtNOver(f64),
}

impl TRule {
    pub fn resolve(self, n: usize) -> f64 {
        match self {
            TRule::Fixed(t) => t,
            TRule::SqrtNOver(c) => (n as f64).sqrt() / c,
        }
    }

    /// `{0.5, 1, 2, √n/8}`.
    pub fn defaults() -> Vec<TRule> {
        vec![TRule::Fixed(0.5), TRule::Fixed(1.0), TRule::Fixed(2.0), TRule::SqrtNOver(8.0)]
    }
}

impl std::fmt::Display for TRule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TRule::Fixed(t) => write!(f, "t={t}"),
            TRule::SqrtNOver(c) => write!(f, "t=sqrt(n)/{c}"),
        }
    }
}

impl std::str::FromStr for TRule {
    type Err = KacError;

    /// `0.5` or `sqrt(n)/8`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || KacError::Parse(format!("bad t rule `{s}` (expected a number or sqrt(n)/c)"));
        let rule = match s.strip_prefix("sqrt(n)/") {
            Some(c) => TRule::SqrtNOver(c.parse().map_err(|_| bad())?),
            None => TRule::Fixed(s.parse().map_err(|_| bad())?),
        };
        match rule {
            TRule::Fixed(t) if t >= 0.0 && t.is_finite() => Ok(rule),
            TRule::SqrtNOver(c) if c > 0.0 && c.is_finite() => Ok(rule),
            _ => Err(bad()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub law: CoefficientLaw,
    pub n_list: Vec<usize>,
    pub k_rules: Vec<KRule>,
    pub t_rules: Vec<TRule>,
    pub trials: usize,
    pub master_seed: u64,
    pub workers: usize,
    pub out_dir: Option<PathBuf>,
    /// Constants for the `bound_value` column; left empty when `None`.
    pub bound: Option<(BoundConstants, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepFit {
    pub k_rule: String,
    pub t_rule: String,
    pub fit: Option<LinearFit>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub version: String,
    pub law: String,
    pub master_seed: u64,
    /// Cells in `n`, then `k` rule, then `t` rule order.
    pub cells: Vec<SmallBallEstimate>,
    pub fits: Vec<SweepFit>,
}

pub const SMALLBALL_CSV_HEADER: &str = "n,k,gcd,t,trials,hits,p_hat,ci,bound_value";

impl SweepReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from(SMALLBALL_CSV_HEADER);
        s.push('\n');
        for c in &self.cells {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{}",
                c.n,
                c.k,
                c.gcd_nk,
                fmt_f64(c.t),
                c.trials,
                c.hits,
                fmt_f64(c.p_hat),
                fmt_f64(c.ci_halfwidth),
                fmt_opt(c.bound_value)
            );
        }
        s
    }

    pub fn fits_csv(&self) -> String {
        let mut s = String::from("k_rule,t_rule,slope,intercept,r2\n");
        for f in &self.fits {
            let (slope, intercept, r2) = match &f.fit {
                Some(fit) => (fmt_f64(fit.slope), fmt_f64(fit.intercept), fmt_f64(fit.r2)),
                None => Default::default(),
            };
            let _ = writeln!(s, "{},{},{},{},{}", f.k_rule, f.t_rule, slope, intercept, r2);
        }
        s
    }
}

/// Small-ball estimates over the `n × k rule × t rule` grid.
///
/// All `t` rules of one `(n, k)` pair share a sample set. Writes
/// `smallball.csv`, `smallball_fit.csv` and `smallball.json` when `out_dir`
/// is set.
pub fn run_smallball_sweep(cfg: &SweepConfig) -> Result<SweepReport> {
    cfg.law.validate()?;
    if cfg.n_list.is_empty() || cfg.k_rules.is_empty() || cfg.t_rules.is_empty() {
        return Err(KacError::Precondition("empty sweep grid".into()));
    }
    let outputs = Outputs::open(
        cfg.out_dir.as_deref(),
        &["smallball.csv", "smallball_fit.csv", "smallball.json"],
    )?;
    let pool = thread_pool(cfg.workers)?;

    let mut cells = Vec::new();
    for &n in &cfg.n_list {
        for &rule in &cfg.k_rules {
            let k = rule.resolve(n)?;
            let ts: Vec<f64> = cfg.t_rules.iter().map(|r| r.resolve(n)).collect();
            let seed = derive_seed(derive_seed(cfg.master_seed, n as u64), k as u64);
            let mut est = pool.install(|| mc_small_ball_multi(cfg.law, n, k, &ts, cfg.trials, seed))?;
            if let Some((consts, c_remark)) = cfg.bound {
                est.iter_mut().for_each(|e| attach_bound(e, consts, c_remark));
            }
            cells.extend(est);
        }
    }

    let per_n = cfg.k_rules.len() * cfg.t_rules.len();
    let mut fits = Vec::new();
    for (ki, k_rule) in cfg.k_rules.iter().enumerate() {
        for (ti, t_rule) in cfg.t_rules.iter().enumerate() {
            let group: Vec<SmallBallEstimate> = (0..cfg.n_list.len())
                .map(|ni| cells[ni * per_n + ki * cfg.t_rules.len() + ti].clone())
                .collect();
            fits.push(SweepFit {
                k_rule: k_rule.to_string(),
                t_rule: t_rule.to_string(),
                fit: fit_scaling(&group).ok(),
            });
        }
    }

    let report = SweepReport {
        version: VERSION.into(),
        law: cfg.law.to_string(),
        master_seed: cfg.master_seed,
        cells,
        fits,
    };
    outputs.write(&[&report.to_csv(), &report.fits_csv(), &to_json(&report)])?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AtlasConfig {
    pub law: CoefficientLaw,
    pub n: usize,
    pub trials: u64,
    pub master_seed: u64,
    pub workers: usize,
    pub out_dir: Option<PathBuf>,
    /// Region used for the overlay and the in-region counts.
    pub p: f64,
    pub beta: f64,
    pub regime: Regime,
}

impl AtlasConfig {
    pub fn new(law: CoefficientLaw, n: usize, trials: u64, master_seed: u64) -> Self {
        Self {
            law,
            n,
            trials,
            master_seed,
            workers: 1,
            out_dir: None,
            p: 1.0,
            beta: 1.0,
            regime: Regime::Half,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AtlasTrial {
    pub trial: u64,
    pub degree: usize,
    pub converged: bool,
    pub iterations: usize,
    /// `None` below 32 roots.
    pub ks: Option<f64>,
    pub max_radial: f64,
    pub median_radial: f64,
    pub in_region: usize,
    pub certified: bool,
}

/// Histogram of `n(|z| - 1)` over `[-RANGE, RANGE]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RadialHistogram {
    pub range: f64,
    pub counts: Vec<u64>,
    pub below: u64,
    pub above: u64,
}

impl RadialHistogram {
    pub const RANGE: f64 = 8.0;
    pub const BINS: usize = 32;

    fn new() -> Self {
        Self {
            range: Self::RANGE,
            counts: vec![0; Self::BINS],
            below: 0,
            above: 0,
        }
    }

    fn add(&mut self, scaled: f64) {
        if scaled < -self.range {
            self.below += 1;
        } else if scaled >= self.range {
            self.above += 1;
        } else {
            let w = 2.0 * self.range / self.counts.len() as f64;
            let bin = (((scaled + self.range) / w) as usize).min(self.counts.len() - 1);
            self.counts[bin] += 1;
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum::<u64>() + self.below + self.above
    }

    pub fn to_csv(&self) -> String {
        let w = 2.0 * self.range / self.counts.len() as f64;
        let mut s = String::from("lo,hi,count\n");
        let _ = writeln!(s, "-inf,{},{}", fmt_f64(-self.range), self.below);
        for (i, c) in self.counts.iter().enumerate() {
            let lo = -self.range + i as f64 * w;
            let _ = writeln!(s, "{},{},{}", fmt_f64(lo), fmt_f64(lo + w), c);
        }
        let _ = writeln!(s, "{},inf,{}", fmt_f64(self.range), self.above);
        s
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AtlasReport {
    pub version: String,
    pub law: Option<String>,
    pub n: usize,
    pub master_seed: u64,
    pub trials: Vec<AtlasTrial>,
    pub mean_ks: Option<f64>,
    pub histogram: RadialHistogram,
    #[serde(skip)]
    pub roots: Vec<RootSet>,
    #[serde(skip)]
    pub spec: RegionSpec,
}

impl AtlasReport {
    pub fn roots_csv(&self) -> String {
        let mut s = String::from("trial,re,im,modulus,argument,residual\n");
        for (t, rs) in self.trials.iter().zip(&self.roots) {
            for (z, r) in rs.roots.iter().zip(&rs.residuals) {
                let _ = writeln!(
                    s,
                    "{},{},{},{},{},{}",
                    t.trial,
                    fmt_f64(z.re),
                    fmt_f64(z.im),
                    fmt_f64(z.norm()),
                    fmt_f64(unit_angle(*z)),
                    fmt_f64(*r)
                );
            }
        }
        s
    }

    pub fn summary_csv(&self) -> String {
        let mut s = String::from(
            "trial,degree,converged,iterations,ks,max_radial,median_radial,in_region,certified\n",
        );
        for t in &self.trials {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{}",
                t.trial,
                t.degree,
                t.converged,
                t.iterations,
                fmt_opt(t.ks),
                fmt_f64(t.max_radial),
                fmt_f64(t.median_radial),
                t.in_region,
                t.certified
            );
        }
        s
    }

    /// Region picture with every root overlaid.
    pub fn overlay_svg(&self) -> String {
        let all: Vec<Complex64> = self.roots.iter().flat_map(|r| r.roots.iter().copied()).collect();
        self.spec.to_svg(&all, 4096)
    }
}

/// Roots of `trials` samples of the law: per-root CSV, per-trial summary,
/// radial histogram, overlay SVG and JSON report.
pub fn run_root_atlas(cfg: &AtlasConfig) -> Result<AtlasReport> {
    cfg.law.validate()?;
    if cfg.trials == 0 {
        return Err(KacError::Precondition("trials must be >= 1".into()));
    }
    let cost = cfg.trials.saturating_mul(cfg.n as u64);
    if cost > ATLAS_BUDGET {
        return Err(KacError::Guard(format!(
            "trials * n = {cost} exceeds the budget of {ATLAS_BUDGET}"
        )));
    }
    let spec = build_region_spec(cfg.n, cfg.p, cfg.beta, cfg.regime)?;
    let seed = derive_seed(cfg.master_seed, cfg.n as u64);
    let samples = (0..cfg.trials)
        .map(|t| crate::coefficients::sample_coefficients(cfg.law, cfg.n, seed, t))
        .collect::<Result<Vec<_>>>()?;
    let mut report = root_atlas_for(&samples, &spec, cfg.workers, cfg.out_dir.as_deref())?;
    report.law = Some(cfg.law.to_string());
    report.master_seed = cfg.master_seed;
    if let Some(dir) = &cfg.out_dir {
        // rewrite the JSON with the law and seed filled in
        let path = dir.join("roots.json");
        fs::write(&path, to_json(&report)).map_err(|e| KacError::io(path, e))?;
    }
    Ok(report)
}

/// Atlas over explicit samples, which must all have `spec.n` coefficients.
pub fn root_atlas_for(
    samples: &[PolynomialSample],
    spec: &RegionSpec,
    workers: usize,
    out_dir: Option<&Path>,
) -> Result<AtlasReport> {
    if let Some(s) = samples.iter().find(|s| s.n() != spec.n) {
        return Err(KacError::InvalidInput(format!(
            "sample has n = {}, region has n = {}",
            s.n(),
            spec.n
        )));
    }
    let outputs = Outputs::open(
        out_dir,
        &[
            "roots.csv",
            "roots_summary.csv",
            "radial_histogram.csv",
            "roots_overlay.svg",
            "roots.json",
        ],
    )?;
    let pool = thread_pool(workers)?;
    let roots: Vec<RootSet> = pool.install(|| {
        samples
            .par_iter()
            .map(|s| find_roots(s, default_tol(s.n()), DEFAULT_MAX_ITER))
            .collect::<Result<_>>()
    })?;

    let mut histogram = RadialHistogram::new();
    let mut trials = Vec::with_capacity(roots.len());
    for (i, (s, rs)) in samples.iter().zip(&roots).enumerate() {
        let radial = radial_stats(rs);
        for z in &rs.roots {
            histogram.add(spec.n as f64 * (z.norm() - 1.0));
        }
        trials.push(AtlasTrial {
            trial: if s.law.is_some() { s.trial_index } else { i as u64 },
            degree: rs.degree,
            converged: rs.converged,
            iterations: rs.iterations,
            ks: angular_ks(rs).ok(),
            max_radial: radial.max_dist,
            median_radial: radial.median_dist,
            in_region: region_root_count(rs, spec)?,
            certified: rs.residuals_certified(&s.coefficients),
        });
    }
    let ks: Vec<f64> = trials.iter().filter_map(|t| t.ks).collect();
    let mean_ks = (!ks.is_empty()).then(|| compensated_sum(ks.iter().copied()) / ks.len() as f64);

    let report = AtlasReport {
        version: VERSION.into(),
        law: None,
        n: spec.n,
        master_seed: samples.first().map(|s| s.seed).unwrap_or(0),
        trials,
        mean_ks,
        histogram,
        roots,
        spec: spec.clone(),
    };
    outputs.write(&[
        &report.roots_csv(),
        &report.summary_csv(),
        &report.histogram.to_csv(),
        &report.overlay_svg(),
        &to_json(&report),
    ])?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(n_list: Vec<usize>, trials: u64) -> ExperimentConfig {
        ExperimentConfig::new(CoefficientLaw::Rademacher, n_list, trials, 7)
    }

    #[test]
    fn single_trial_shape() {
        let r = run_theorem_experiment(&cfg(vec![128], 1)).unwrap();
        assert_eq!(r.rows.len(), 1);
        let row = &r.rows[0];
        assert!(row.count_min_event <= 1 && row.count_joint_event <= 1 && row.count_fn_fail <= 1);
        assert_eq!(r.to_csv().lines().count(), 2);
        assert!(row.root_in_region_rate.is_none());
    }

    #[test]
    fn config_validation() {
        assert!(run_theorem_experiment(&cfg(vec![256, 128], 1)).is_err());
        assert!(run_theorem_experiment(&cfg(vec![128, 128], 1)).is_err());
        assert!(run_theorem_experiment(&cfg(vec![128], 0)).is_err());
        let mut c = cfg(vec![128], 1);
        c.workers = 0;
        assert!(run_theorem_experiment(&c).is_err());
    }

    #[test]
    fn event_algebra() {
        let mut c = cfg(vec![64, 128], 60);
        c.roots = true;
        c.workers = 2;
        let r = run_theorem_experiment(&c).unwrap();
        for row in &r.rows {
            assert!(row.count_joint_event <= row.count_min_event);
            assert!(row.count_min_event <= row.trials && row.count_fn_fail <= row.trials);
            assert!(row.count_root_in_region.unwrap() <= row.trials);
            assert!((row.slack - row.threshold).abs() <= 1e-12 * row.threshold);
        }
        assert_eq!(r.fits.len(), 4);
    }

    #[test]
    fn fit_uses_only_dense_rows() {
        let row = |n, hits| TheoremRow {
            n,
            trials: 100,
            delta: 0.0,
            g: 0.0,
            threshold: 0.0,
            slack: 0.0,
            balls: 0,
            count_min_event: hits,
            count_joint_event: 0,
            count_fn_fail: 0,
            mean_min_modulus: 0.0,
            ci_min_event: 0.0,
            ci_joint_event: 0.0,
            ci_fn_fail: 0.0,
            count_root_in_region: None,
            root_in_region_rate: None,
            ci_root_in_region: None,
            unconverged_roots: None,
        };
        let rows = vec![row(10, 40), row(100, 4), row(1000, 10)];
        let f = fit_family(&rows, "x", |r| Some(r.count_min_event));
        assert_eq!(f.rows_used, vec![10, 1000]);
        assert!((f.fit.unwrap().slope - (0.25f64.ln() / 100f64.ln())).abs() < 1e-12);
        let none = fit_family(&rows, "x", |r| r.count_root_in_region);
        assert!(none.fit.is_none() && none.rows_used.is_empty());
    }

    #[test]
    fn pooled_halfwidth_values() {
        assert_eq!(pooled_halfwidth(0, 100, 0, 200), 0.03);
        let h = pooled_halfwidth(10, 100, 10, 100);
        assert!((h - Z95 * (0.1f64 * 0.9 * 0.02).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn sweep_grid_shape_and_oracle() {
        let c = SweepConfig {
            law: CoefficientLaw::Rademacher,
            n_list: vec![2],
            k_rules: vec![KRule::Fixed(1)],
            t_rules: vec![TRule::Fixed(1.0)],
            trials: 20_000,
            master_seed: 3,
            workers: 2,
            out_dir: None,
            bound: None,
        };
        let r = run_smallball_sweep(&c).unwrap();
        assert_eq!(r.cells.len(), 1);
        assert!((r.cells[0].p_hat - 0.5).abs() <= 3.0 * r.cells[0].ci_halfwidth);

        let c = SweepConfig {
            n_list: vec![16, 32, 64, 128],
            k_rules: vec![KRule::Fixed(1), KRule::NOver(4)],
            t_rules: TRule::defaults(),
            trials: 10_000,
            ..c
        };
        let r = run_smallball_sweep(&c).unwrap();
        assert_eq!(r.cells.len(), 4 * 2 * 4);
        assert_eq!(r.to_csv().lines().count(), 1 + 32);
        assert_eq!(r.fits.len(), 8);
        let group: Vec<_> = r.cells.iter().filter(|e| e.k == 1 && e.t == 1.0).cloned().collect();
        assert_eq!(r.fits[1].fit, fit_scaling(&group).ok());
        assert_eq!(r.cells[2].t, 2.0);
        assert_eq!(r.cells[3].t, 0.5);
    }

    #[test]
    fn rules_resolve() {
        assert_eq!(KRule::NOver(4).resolve(64).unwrap(), 16);
        assert!(KRule::Fixed(64).resolve(64).is_err());
        assert!(KRule::NOver(0).resolve(64).is_err());
        assert_eq!(TRule::SqrtNOver(8.0).resolve(256), 2.0);
        assert_eq!("n/4".parse::<KRule>().unwrap(), KRule::NOver(4));
        assert_eq!("3".parse::<KRule>().unwrap(), KRule::Fixed(3));
        assert!("n/x".parse::<KRule>().is_err());
        assert_eq!("sqrt(n)/8".parse::<TRule>().unwrap(), TRule::SqrtNOver(8.0));
        assert_eq!("0.5".parse::<TRule>().unwrap(), TRule::Fixed(0.5));
        assert!("-1".parse::<TRule>().is_err());
        for rule in TRule::defaults() {
            assert_eq!(rule.to_string().trim_start_matches("t=").parse::<TRule>().unwrap(), rule);
        }
    }

    #[test]
    fn atlas_guard() {
        let c = AtlasConfig::new(CoefficientLaw::Rademacher, 10_000, 1001, 1);
        assert!(matches!(run_root_atlas(&c), Err(KacError::Guard(_))));
    }

    #[test]
    fn atlas_of_unity_polynomial() {
        let n = 64;
        let mut c = vec![0.0; n];
        c[0] = -1.0;
        c[n - 1] = 1.0;
        let s = PolynomialSample::from_coefficients(c).unwrap();
        let spec = build_region_spec(n, 1.0, 1.0, Regime::Half).unwrap();
        let r = root_atlas_for(&[s], &spec, 1, None).unwrap();
        assert!(r.trials[0].max_radial < 1e-10);
        assert!(r.trials[0].certified);
        assert_eq!(r.histogram.total(), 63);
        // all roots in the two central bins
        let mid = RadialHistogram::BINS / 2;
        assert_eq!(r.histogram.counts[mid - 1] + r.histogram.counts[mid], 63);
    }

    #[test]
    fn histogram_edges() {
        let mut h = RadialHistogram::new();
        for x in [-9.0, -8.0, 0.0, 7.999, 8.0] {
            h.add(x);
        }
        assert_eq!((h.below, h.above), (1, 1));
        assert_eq!(h.counts[0], 1);
        assert_eq!(h.counts[RadialHistogram::BINS - 1], 1);
        assert_eq!(h.total(), 5);
        assert_eq!(h.to_csv().lines().count(), RadialHistogram::BINS + 3);
    }
}
