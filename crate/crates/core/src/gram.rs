//! The 2×n frequency frames `V_k` behind the small-ball estimate.
//!
//! Column `j` of `V_k` is `(cos 2πj(k/n+η), sin 2πj(k/n+η))`. At `η = 0` and
//! `2k ≢ 0 (mod n)` the Gram matrix is exactly `diag(n/2, n/2)`, so its
//! determinant is `n²/4`. All sums run in ascending `j` with compensation.

use std::f64::consts::{PI, TAU};

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{KacError, Result};
use crate::rng::trial_rng;
use crate::stats::compensated_sum;

#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyFrame {
    pub n: usize,
    pub k: usize,
    pub eta: f64,
}

impl FrequencyFrame {
    pub fn new(n: usize, k: usize, eta: f64) -> Result<Self> {
        if n < 3 {
            return Err(KacError::TooSmall { n, min: 3 });
        }
        if !(0.0..=1.0 / n as f64).contains(&eta) {
            return Err(KacError::Precondition(format!("eta = {eta} outside [0, 1/n]")));
        }
        Ok(Self { n, k, eta })
    }

    /// Phase `2πj(k/n + η)`, with `jk` reduced mod n first.
    fn phase(&self, j: usize) -> f64 {
        let reduced = ((j as u128 * self.k as u128) % self.n as u128) as f64;
        TAU * (reduced / self.n as f64 + j as f64 * self.eta)
    }

    /// Column `j` as `(cos, sin)`.
    pub fn column(&self, j: usize) -> (f64, f64) {
        let a = self.phase(j);
        (a.cos(), a.sin())
    }

    pub fn columns(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        (0..self.n).map(|j| self.column(j))
    }

    /// `V_k^T θ` as an n-vector.
    pub fn image(&self, theta: [f64; 2]) -> Vec<f64> {
        self.columns().map(|(c, s)| theta[0] * c + theta[1] * s).collect()
    }

    /// Entries `(a, b, c)` of the Gram matrix `[[a, c], [c, b]]`.
    pub fn gram(&self) -> (f64, f64, f64) {
        let cols: Vec<(f64, f64)> = self.columns().collect();
        (
            compensated_sum(cols.iter().map(|&(c, _)| c * c)),
            compensated_sum(cols.iter().map(|&(_, s)| s * s)),
            compensated_sum(cols.iter().map(|&(c, s)| c * s)),
        )
    }
}

pub fn gram_det(n: usize, k: usize, eta: f64) -> Result<f64> {
    let (a, b, c) = FrequencyFrame::new(n, k, eta)?.gram();
    Ok(a * b - c * c)
}

/// `‖V_k^T θ‖²`.
pub fn image_norm_sq(n: usize, k: usize, eta: f64, theta: [f64; 2]) -> Result<f64> {
    let img = FrequencyFrame::new(n, k, eta)?.image(theta);
    Ok(compensated_sum(img.iter().map(|x| x * x)))
}

fn dist_to_integers(v: &[f64]) -> f64 {
    compensated_sum(v.iter().map(|x| {
        let d = x - x.round();
        d * d
    }))
    .sqrt()
}

/// Euclidean distance from `V_k^T θ` (at `η = 0`) to the integer lattice.
pub fn lattice_dist(n: usize, k: usize, theta: [f64; 2]) -> Result<f64> {
    Ok(dist_to_integers(&FrequencyFrame::new(n, k, 0.0)?.image(theta)))
}

/// Whether `θ` satisfies the least-common-denominator inequality
/// `dist(V^Tθ, Z^n) <= L·sqrt(log₊(‖V^Tθ‖/L))`.
pub fn lcd_condition(n: usize, k: usize, theta: [f64; 2], l_const: f64) -> Result<bool> {
    let img = FrequencyFrame::new(n, k, 0.0)?.image(theta);
    let norm = compensated_sum(img.iter().map(|x| x * x)).sqrt();
    let log_plus = (norm / l_const).ln().max(0.0);
    Ok(dist_to_integers(&img) <= l_const * log_plus.sqrt())
}

pub fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

#[derive(Debug, Clone)]
pub struct DvkOptions {
    pub samples: usize,
    pub seed: u64,
    /// Lower end of the sampled radius range; `None` means `1/√n`.
    pub r_min: Option<f64>,
    /// `L` of the least-common-denominator inequality.
    pub l_const: f64,
}

impl DvkOptions {
    pub fn new(samples: usize, seed: u64) -> Self {
        Self {
            samples,
            seed,
            r_min: None,
            // √(16/q) at q = 1/2, the Rademacher certificate at width 0.5.
            l_const: 32f64.sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DvkReport {
    pub n: usize,
    pub k: usize,
    pub gcd: u64,
    /// `n' = n / gcd(n, k)`.
    pub period: u64,
    pub r_min: f64,
    /// `n'/(8π)`.
    pub r_max: f64,
    /// `√(n/32)`.
    pub threshold: f64,
    pub samples: usize,
    /// Sampled `θ` with `lattice_dist < √(n/32)`.
    pub violations: usize,
    pub min_dist: f64,
    /// Largest sampled radius among the violations.
    pub max_violating_radius: Option<f64>,
    /// Sampled `θ` satisfying the LCD inequality itself.
    pub lcd_hits: usize,
    /// `1/(2·max column norm)`; columns are unit vectors, so 1/2.
    pub column_norm_bound: f64,
}

/// Samples `θ = r(cos a, sin a)` with `a ~ U[0, 2π)`, `r ~ U(r_min, n'/(8π)]` and
/// counts how often `dist(V_k^T θ, Z^n) >= √(n/32)` fails.
pub fn dvk_threshold_check(n: usize, k: usize, samples: usize, seed: u64) -> Result<DvkReport> {
    dvk_threshold_check_with(n, k, &DvkOptions::new(samples, seed))
}

pub fn dvk_threshold_check_with(n: usize, k: usize, opts: &DvkOptions) -> Result<DvkReport> {
    if n < 64 {
        return Err(KacError::Precondition(format!("n = {n}, need n >= 64")));
    }
    if k == 0 || k >= n || 2 * k == n {
        return Err(KacError::Precondition(format!(
            "k = {k} must lie in 1..n-1 and differ from n/2"
        )));
    }
    let g = gcd(n as u64, k as u64);
    let period = n as u64 / g;
    let r_max = period as f64 / (8.0 * PI);
    let r_min = opts.r_min.unwrap_or(1.0 / (n as f64).sqrt());
    if !(r_min < r_max) {
        return Err(KacError::Precondition(format!(
            "empty radius range ({r_min}, {r_max}]"
        )));
    }
    let threshold = (n as f64 / 32.0).sqrt();
    let frame = FrequencyFrame::new(n, k, 0.0)?;
    let max_col = frame
        .columns()
        .map(|(c, s)| (c * c + s * s).sqrt())
        .fold(0.0, f64::max);

    let outcomes: Vec<(f64, f64, bool)> = (0..opts.samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = trial_rng(opts.seed, i as u64);
            let a: f64 = rng.random_range(0.0..TAU);
            // (r_min, r_max]
            let r = r_max - rng.random::<f64>() * (r_max - r_min);
            let theta = [r * a.cos(), r * a.sin()];
            let img = frame.image(theta);
            let dist = dist_to_integers(&img);
            let norm = compensated_sum(img.iter().map(|x| x * x)).sqrt();
            let lcd = dist <= opts.l_const * (norm / opts.l_const).ln().max(0.0).sqrt();
            (r, dist, lcd)
        })
        .collect();

    let violating: Vec<f64> = outcomes
        .iter()
        .filter(|o| o.1 < threshold)
        .map(|o| o.0)
        .collect();
    Ok(DvkReport {
        n,
        k,
        gcd: g,
        period,
        r_min,
        r_max,
        threshold,
        samples: opts.samples,
        violations: violating.len(),
        min_dist: outcomes.iter().map(|o| o.1).fold(f64::INFINITY, f64::min),
        max_violating_radius: violating.iter().copied().reduce(f64::max),
        lcd_hits: outcomes.iter().filter(|o| o.2).count(),
        column_norm_bound: 1.0 / (2.0 * max_col),
    })
}

/// One row of the determinant verification table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GramCheck {
    pub n: usize,
    pub k: usize,
    pub det: f64,
    pub expected: f64,
    pub pass: bool,
}

/// Exact-determinant check over every `k` in `1..n` for each `n`:
/// `n²/4` to relative `1e-6` when `2k ≢ 0 (mod n)`, and `0` at `k = n/2`.
pub fn verify_gram_grid(ns: &[usize]) -> Result<Vec<GramCheck>> {
    let mut rows = Vec::new();
    for &n in ns {
        let quarter = (n * n) as f64 / 4.0;
        let per_n: Result<Vec<GramCheck>> = (1..n)
            .into_par_iter()
            .map(|k| {
                let det = gram_det(n, k, 0.0)?;
                let (expected, pass) = if 2 * k == n {
                    (0.0, det.abs() <= 1e-6 * quarter)
                } else {
                    (quarter, (det - quarter).abs() <= 1e-6 * quarter)
                };
                Ok(GramCheck { n, k, det, expected, pass })
            })
            .collect();
        rows.extend(per_n?);
    }
    Ok(rows)
}
