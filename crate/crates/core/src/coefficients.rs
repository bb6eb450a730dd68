//! Coefficient laws, polynomial samples, and numerical checks of the
//! anti-concentration and moment hypotheses.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, RngCore};
use rand_distr::{Distribution, Normal, Pareto};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{KacError, Result};
use crate::rng::trial_rng;

/// An i.i.d. real coefficient law.
///
/// Serialized as its text token (`rademacher`, `uniform:M=1`, `gaussian:sigma=1`,
/// `pareto:p=0.9,scale=1`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum CoefficientLaw {
    /// Uniform on `{-1, +1}`.
    Rademacher,
    /// Uniform on `[-half_width, half_width]`.
    Uniform { half_width: f64 },
    /// Centered normal with standard deviation `sigma`.
    Gaussian { sigma: f64 },
    /// Symmetric Pareto: density proportional to `|x|^{-1-tail}` on `|x| >= scale`.
    /// The r-th absolute moment is finite iff `r < tail`.
    SymmetricPareto { tail: f64, scale: f64 },
}

fn positive(name: &str, v: f64) -> Result<f64> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(KacError::InvalidLaw(format!("{name} must be finite and > 0, got {v}")))
    }
}

impl CoefficientLaw {
    pub fn uniform(half_width: f64) -> Result<Self> {
        Ok(Self::Uniform {
            half_width: positive("M", half_width)?,
        })
    }

    pub fn gaussian(sigma: f64) -> Result<Self> {
        Ok(Self::Gaussian {
            sigma: positive("sigma", sigma)?,
        })
    }

    pub fn pareto(tail: f64, scale: f64) -> Result<Self> {
        Ok(Self::SymmetricPareto {
            tail: positive("p", tail)?,
            scale: positive("scale", scale)?,
        })
    }

    /// Re-checks parameters; variants can be built directly, bypassing the constructors.
    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::Rademacher => Ok(()),
            Self::Uniform { half_width } => positive("M", half_width).map(drop),
            Self::Gaussian { sigma } => positive("sigma", sigma).map(drop),
            Self::SymmetricPareto { tail, scale } => {
                positive("p", tail)?;
                positive("scale", scale).map(drop)
            }
        }
    }

    /// Exact `E|ξ|^r` where it exists in closed form (`None` for divergent
    /// Pareto moments and non-integer Gaussian moments).
    pub fn abs_moment(&self, r: f64) -> Option<f64> {
        match *self {
            Self::Rademacher => Some(1.0),
            Self::Uniform { half_width } => Some(half_width.powf(r) / (r + 1.0)),
            Self::Gaussian { sigma } if r == 2.0 => Some(sigma * sigma),
            Self::Gaussian { .. } => None,
            Self::SymmetricPareto { tail, scale } => {
                (r < tail).then(|| tail * scale.powf(r) / (tail - r))
            }
        }
    }

    /// Fills `out` with i.i.d. draws. This is the single sampling path used
    /// everywhere, so a given generator state always yields the same vector.
    pub fn fill<R: RngCore + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        match *self {
            Self::Rademacher => {
                for chunk in out.chunks_mut(64) {
                    let mut bits = rng.next_u64();
                    for x in chunk {
                        *x = if bits & 1 == 1 { 1.0 } else { -1.0 };
                        bits >>= 1;
                    }
                }
            }
            Self::Uniform { half_width } => {
                for x in out {
                    let u: f64 = rng.random();
                    *x = (2.0 * u - 1.0) * half_width;
                }
            }
            Self::Gaussian { sigma } => {
                let normal = Normal::new(0.0, sigma).expect("validated sigma");
                for x in out {
                    *x = normal.sample(rng);
                }
            }
            Self::SymmetricPareto { tail, scale } => {
                let pareto = Pareto::new(scale, tail).expect("validated pareto");
                for x in out {
                    let mag = pareto.sample(rng);
                    *x = if rng.random::<bool>() { mag } else { -mag };
                }
            }
        }
    }

    /// `count` i.i.d. draws, generated in fixed-size blocks that each own a
    /// stream, so the result is independent of the thread count.
    pub fn draws(&self, count: usize, seed: u64) -> Vec<f64> {
        const BLOCK: usize = 4096;
        let mut out = vec![0.0; count];
        out.par_chunks_mut(BLOCK)
            .enumerate()
            .for_each(|(b, chunk)| self.fill(&mut trial_rng(seed, b as u64), chunk));
        out
    }
}

impl fmt::Display for CoefficientLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Rademacher => write!(f, "rademacher"),
            Self::Uniform { half_width } => write!(f, "uniform:M={half_width}"),
            Self::Gaussian { sigma } => write!(f, "gaussian:sigma={sigma}"),
            Self::SymmetricPareto { tail, scale } => write!(f, "pareto:p={tail},scale={scale}"),
        }
    }
}

impl FromStr for CoefficientLaw {
    type Err = KacError;

    fn from_str(token: &str) -> Result<Self> {
        let token = token.trim();
        let (kind, params) = token.split_once(':').unwrap_or((token, ""));
        let mut kv = Vec::new();
        for part in params.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| KacError::Parse(format!("expected key=value in `{part}`")))?;
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|_| KacError::Parse(format!("bad number `{v}` in `{token}`")))?;
            kv.push((k.trim().to_ascii_lowercase(), v));
        }
        let get = |key: &str, default: Option<f64>| -> Result<f64> {
            kv.iter()
                .find(|(k, _)| k == key)
                .map(|&(_, v)| v)
                .or(default)
                .ok_or_else(|| KacError::Parse(format!("`{token}` is missing `{key}=`")))
        };
        let known: &[&str] = match kind.to_ascii_lowercase().as_str() {
            "rademacher" => &[],
            "uniform" => &["m"],
            "gaussian" => &["sigma"],
            "pareto" => &["p", "scale"],
            other => return Err(KacError::Parse(format!("unknown law `{other}`"))),
        };
        if let Some((k, _)) = kv.iter().find(|(k, _)| !known.contains(&k.as_str())) {
            return Err(KacError::Parse(format!("unknown parameter `{k}` in `{token}`")));
        }
        match kind.to_ascii_lowercase().as_str() {
            "rademacher" => Ok(Self::Rademacher),
            "uniform" => Self::uniform(get("m", Some(1.0))?),
            "gaussian" => Self::gaussian(get("sigma", Some(1.0))?),
            _ => Self::pareto(get("p", None)?, get("scale", Some(1.0))?),
        }
    }
}

impl From<CoefficientLaw> for String {
    fn from(law: CoefficientLaw) -> String {
        law.to_string()
    }
}

impl TryFrom<String> for CoefficientLaw {
    type Error = KacError;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

/// One realization `ξ_0, …, ξ_{n-1}` of a Kac polynomial.
#[derive(Debug, Clone, PartialEq)]
pub struct PolynomialSample {
    pub coefficients: Vec<f64>,
    /// `None` for hand-built polynomials.
    pub law: Option<CoefficientLaw>,
    pub seed: u64,
    pub trial_index: u64,
}

impl PolynomialSample {
    /// Wraps explicit coefficients (constant term first).
    pub fn from_coefficients(coefficients: Vec<f64>) -> Result<Self> {
        if coefficients.len() < 2 {
            return Err(KacError::InvalidSize(format!(
                "need at least 2 coefficients, got {}",
                coefficients.len()
            )));
        }
        Ok(Self {
            coefficients,
            law: None,
            seed: 0,
            trial_index: 0,
        })
    }

    /// Number of coefficients `n` (degree bound `n - 1`).
    pub fn n(&self) -> usize {
        self.coefficients.len()
    }

    /// Redraws from the recorded provenance. `None` for hand-built samples.
    pub fn regenerate(&self) -> Option<Result<Self>> {
        self.law
            .map(|law| sample_coefficients(law, self.n(), self.seed, self.trial_index))
    }
}

/// Draws `n` coefficients for trial `trial` of the experiment keyed by `seed`.
pub fn sample_coefficients(
    law: CoefficientLaw,
    n: usize,
    seed: u64,
    trial: u64,
) -> Result<PolynomialSample> {
    if n < 2 {
        return Err(KacError::InvalidSize(format!("n = {n}, need n >= 2")));
    }
    law.validate()?;
    let mut coefficients = vec![0.0; n];
    law.fill(&mut trial_rng(seed, trial), &mut coefficients);
    Ok(PolynomialSample {
        coefficients,
        law: Some(law),
        seed,
        trial_index: trial,
    })
}

/// Empirical check of `sup_u P(|ξ-u| <= a) <= 1-q` together with `P(|ξ| > M) <= q/2`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AntiConcentrationCert {
    pub width: f64,
    /// `1 - max_u` of the empirical concentration over the u-grid.
    pub q_hat: f64,
    /// Smallest `a·2^j` with empirical `P(|ξ| > M) <= q_hat / 2`.
    pub m_hat: f64,
    pub trials: usize,
    pub u_grid_step: f64,
    /// Half-width of the u-grid actually scanned.
    pub u_range: f64,
    /// DKW-type uncertainty of `q_hat`: `2·sqrt(ln(2/0.05) / (2·trials))`.
    pub mc_halfwidth: f64,
}

pub const MIN_CERT_TRIALS: usize = 10_000;

fn max_concentration(sorted: &[f64], width: f64, range: f64, step: f64) -> f64 {
    let half = (range / step).ceil() as i64;
    let total = sorted.len() as f64;
    (-half..=half)
        .map(|i| {
            let u = i as f64 * step;
            let lo = sorted.partition_point(|&x| x < u - width);
            let hi = sorted.partition_point(|&x| x <= u + width);
            (hi - lo) as f64 / total
        })
        .fold(0.0, f64::max)
}

/// Doubling search from `start` for the first `M` whose exceedance
/// fraction is at most `target`. `abs_sorted` holds sorted `|ξ|`.
fn doubling_search(abs_sorted: &[f64], start: f64, target: f64) -> f64 {
    let total = abs_sorted.len() as f64;
    let mut m = start;
    loop {
        let exceed = abs_sorted.len() - abs_sorted.partition_point(|&x| x <= m);
        if exceed as f64 / total <= target {
            return m;
        }
        m *= 2.0;
    }
}

/// Estimates the anti-concentration constants of `law` at `width`.
///
/// `u_range` fixes the scanned half-range of centers; with `None` the range is
/// `M_hat + width`, found by iterating the `q → M` search to a fixed point.
/// `u_step` defaults to `width / 4`.
pub fn estimate_anticoncentration(
    law: CoefficientLaw,
    width: f64,
    trials: usize,
    u_range: Option<f64>,
    u_step: Option<f64>,
    seed: u64,
) -> Result<AntiConcentrationCert> {
    law.validate()?;
    if !(width > 0.0 && width.is_finite()) {
        return Err(KacError::Precondition(format!("width must be > 0, got {width}")));
    }
    if trials < MIN_CERT_TRIALS {
        return Err(KacError::Precondition(format!(
            "trials = {trials}, need >= {MIN_CERT_TRIALS}"
        )));
    }
    let step = u_step.unwrap_or(width / 4.0);
    if !(step > 0.0 && step <= width) {
        return Err(KacError::Precondition(format!(
            "u_step = {step} must lie in (0, width]"
        )));
    }

    let mut sorted = law.draws(trials, seed);
    sorted.sort_by(f64::total_cmp);
    let mut abs_sorted: Vec<f64> = sorted.iter().map(|x| x.abs()).collect();
    abs_sorted.sort_by(f64::total_cmp);

    let (q_hat, m_hat, range) = match u_range {
        Some(range) => {
            let q = 1.0 - max_concentration(&sorted, width, range, step);
            (q, doubling_search(&abs_sorted, width, q / 2.0), range)
        }
        None => {
            // Widening the grid can only raise the sup, which lowers q and raises M,
            // so this terminates once M stops growing.
            let mut m = doubling_search(&abs_sorted, width, 0.5);
            loop {
                let range = m + width;
                let q = 1.0 - max_concentration(&sorted, width, range, step);
                let next = doubling_search(&abs_sorted, width, q / 2.0);
                if next <= m {
                    break (q, next, range);
                }
                m = next;
            }
        }
    };

    Ok(AntiConcentrationCert {
        width,
        q_hat: q_hat.clamp(0.0, 1.0),
        m_hat,
        trials,
        u_grid_step: step,
        u_range: range,
        mc_halfwidth: 2.0 * ((2.0f64 / 0.05).ln() / (2.0 * trials as f64)).sqrt(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentEstimate {
    pub mean: f64,
    pub std_err: f64,
    pub trials: usize,
}

/// Sample mean of `|ξ|^r` over `trials` draws.
pub fn empirical_moment(
    law: CoefficientLaw,
    r: f64,
    trials: usize,
    seed: u64,
) -> Result<MomentEstimate> {
    law.validate()?;
    if !(r > 0.0) {
        return Err(KacError::Precondition(format!("r must be > 0, got {r}")));
    }
    if trials < MIN_CERT_TRIALS {
        return Err(KacError::Precondition(format!(
            "trials = {trials}, need >= {MIN_CERT_TRIALS}"
        )));
    }
    let values: Vec<f64> = law.draws(trials, seed).iter().map(|x| x.abs().powf(r)).collect();
    let (mean, var) = crate::stats::mean_var(&values);
    Ok(MomentEstimate {
        mean,
        std_err: (var / trials as f64).sqrt(),
        trials,
    })
}
