//! All roots of a sampled polynomial via Ehrlich–Aberth iteration, and their
//! location statistics relative to the unit circle and the ball grid.

use std::f64::consts::TAU;

use num_complex::Complex64;
use serde::Serialize;

use crate::coefficients::PolynomialSample;
use crate::error::{KacError, Result};
use crate::evaluator::horner_eval;
use crate::region::{unit_angle, RegionSpec};
use crate::stats::{ks_uniform, median};

/// `π(3 - √5)`.
const GOLDEN_ANGLE: f64 = 2.399_963_229_728_653;

pub fn default_tol(n: usize) -> f64 {
    1e-12 * n as f64
}

pub const DEFAULT_MAX_ITER: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RootSet {
    /// Coefficient count of the input polynomial.
    pub n: usize,
    /// Degree after trimming trailing zero coefficients.
    pub degree: usize,
    #[serde(skip)]
    pub roots: Vec<Complex64>,
    pub residuals: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub tol: f64,
}

/// `p(z)/p'(z)`. For `|z| > 1` the reversed polynomial is used so that
/// `z^d` never has to be formed.
fn newton_ratio(coeffs: &[f64], z: Complex64) -> Complex64 {
    let d = coeffs.len() - 1;
    let zero = Complex64::new(0.0, 0.0);
    if z.norm_sqr() <= 1.0 {
        let (mut p, mut dp) = (zero, zero);
        for &c in coeffs.iter().rev() {
            dp = dp * z + p;
            p = p * z + c;
        }
        if p == zero {
            return zero;
        }
        p / dp
    } else {
        // p(z) = z^d q(w), w = 1/z, q(w) = Σ c_j w^{d-j}
        // p/p' = z / (d - w q'(w)/q(w))
        let w = z.inv();
        let (mut q, mut dq) = (zero, zero);
        for &c in coeffs {
            dq = dq * w + q;
            q = q * w + c;
        }
        if q == zero {
            return zero;
        }
        z / (d as f64 - w * dq / q)
    }
}

/// Finds all `degree` roots of the sample.
///
/// Starting points sit on the circle of radius `|ξ_0/ξ_d|^{1/d}` at multiples
/// of the golden angle. Updates are applied in place (Gauss–Seidel order);
/// a root is frozen once its correction drops below `tol`.
pub fn find_roots(sample: &PolynomialSample, tol: f64, max_iter: usize) -> Result<RootSet> {
    let n = sample.n();
    let last = sample
        .coefficients
        .iter()
        .rposition(|&c| c != 0.0)
        .unwrap_or(0);
    if last == 0 {
        return Err(KacError::InvalidInput(
            "polynomial is constant after trimming trailing zeros".into(),
        ));
    }
    let coeffs = &sample.coefficients[..=last];
    let degree = last;

    let ratio = (coeffs[0] / coeffs[degree]).abs();
    let radius = if ratio > 0.0 && ratio.is_finite() {
        ratio.powf(1.0 / degree as f64)
    } else {
        1.0
    };
    let mut roots: Vec<Complex64> = (0..degree)
        .map(|j| Complex64::from_polar(radius, (j as f64 * GOLDEN_ANGLE) % TAU))
        .collect();
    let mut done = vec![false; degree];
    let mut iterations = 0;

    while iterations < max_iter && done.iter().any(|d| !d) {
        iterations += 1;
        for i in 0..degree {
            if done[i] {
                continue;
            }
            let z = roots[i];
            let newton = newton_ratio(coeffs, z);
            if newton == Complex64::new(0.0, 0.0) {
                done[i] = true;
                continue;
            }
            if !newton.is_finite() {
                // p' = 0 away from a root: nudge off the critical point.
                roots[i] = z * Complex64::from_polar(1.0 + tol, tol);
                continue;
            }
            let repulsion: Complex64 = roots
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, &r)| (z - r).inv())
                .sum();
            let step = newton / (Complex64::new(1.0, 0.0) - newton * repulsion);
            let step = if step.is_finite() { step } else { newton };
            roots[i] = z - step;
            if step.norm() < tol {
                done[i] = true;
            }
        }
    }

    let residuals = roots.iter().map(|&z| horner_eval(coeffs, z).norm()).collect();
    Ok(RootSet {
        n,
        degree,
        roots,
        residuals,
        iterations,
        converged: done.iter().all(|&d| d),
        tol,
    })
}

impl RootSet {
    /// Backward-error bound `tol·(1 + Σ|ξ_j|·max(1,|z|)^d)` for root `i`.
    pub fn residual_bound(&self, coefficients: &[f64], i: usize) -> f64 {
        let scale = self.roots[i].norm().max(1.0).powi(self.degree as i32);
        let mass: f64 = coefficients.iter().map(|c| c.abs()).sum();
        self.tol * (1.0 + mass * scale)
    }

    /// Whether every residual is within [`residual_bound`](Self::residual_bound).
    pub fn residuals_certified(&self, coefficients: &[f64]) -> bool {
        (0..self.roots.len()).all(|i| self.residuals[i] <= self.residual_bound(coefficients, i))
    }

    /// Largest distance from a root's conjugate to the nearest root.
    pub fn conjugate_mismatch(&self) -> f64 {
        self.roots
            .iter()
            .map(|z| {
                let c = z.conj();
                self.roots.iter().map(|w| (w - c).norm()).fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RadialStats {
    pub max_dist: f64,
    pub median_dist: f64,
    /// `||z| - 1|` per root, in root order.
    pub distances: Vec<f64>,
}

impl RadialStats {
    /// Share of roots with `||z| - 1| <= w`.
    pub fn fraction_within(&self, w: f64) -> f64 {
        if self.distances.is_empty() {
            return 0.0;
        }
        self.distances.iter().filter(|&&d| d <= w).count() as f64 / self.distances.len() as f64
    }
}

pub fn radial_stats(rs: &RootSet) -> RadialStats {
    let distances: Vec<f64> = rs.roots.iter().map(|z| (z.norm() - 1.0).abs()).collect();
    RadialStats {
        max_dist: distances.iter().copied().fold(0.0, f64::max),
        median_dist: median(&distances),
        distances,
    }
}

/// KS distance of the root arguments (as fractions of a turn) from uniform.
pub fn angular_ks(rs: &RootSet) -> Result<f64> {
    if rs.roots.len() < 32 {
        return Err(KacError::Precondition(format!(
            "{} roots, need >= 32",
            rs.roots.len()
        )));
    }
    let turns: Vec<f64> = rs.roots.iter().map(|&z| unit_angle(z) / TAU).collect();
    Ok(ks_uniform(&turns))
}

/// Number of roots inside the closed balls of `spec`.
pub fn region_root_count(rs: &RootSet, spec: &RegionSpec) -> Result<usize> {
    if rs.n != spec.n {
        return Err(KacError::InvalidInput(format!(
            "root set from n = {}, region has n = {}",
            rs.n, spec.n
        )));
    }
    Ok(rs.roots.iter().filter(|&&z| spec.contains(z)).count())
}
