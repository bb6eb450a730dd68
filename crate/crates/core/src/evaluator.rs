//! Evaluation of `G_n` on the ball grid.
//!
//! One layer of centers `e^{i(2πk/n + φ)}`, `k = 0..n-1`, is a DFT of the
//! twisted vector `(ξ_j e^{ijφ})_j` with kernel `e^{+2πijk/n}` (the
//! unnormalized inverse transform), so a layer costs `O(n log n)` for any `n`.

use std::f64::consts::TAU;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::Serialize;

use crate::coefficients::PolynomialSample;
use crate::error::{KacError, Result};
use crate::region::{GridPoint, RegionSpec};

/// Horner recurrence for `Σ ξ_j z^j`.
pub fn horner_eval(coefficients: &[f64], z: Complex64) -> Complex64 {
    coefficients
        .iter()
        .rev()
        .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c)
}

/// Upper bound `Σ |ξ_j| (1+δ)^j` for `max_{|z| <= 1+δ} |G_n(z)|`.
pub fn tail_functional(coefficients: &[f64], delta: f64) -> f64 {
    let x = 1.0 + delta.max(0.0);
    coefficients.iter().rev().fold(0.0, |acc, &c| acc * x + c.abs())
}

/// `|G_n|` on one rotated layer of n-th roots of unity.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalResult {
    pub phi: f64,
    /// `|G_n(e^{i(2πk/n + φ)})|` for `k = 0..n-1`.
    pub moduli: Vec<f64>,
    pub min_modulus: f64,
    /// Index `k` attaining `min_modulus`.
    pub argmin: usize,
    pub max_modulus: f64,
}

impl EvalResult {
    fn from_moduli(phi: f64, moduli: Vec<f64>) -> Self {
        let (argmin, min_modulus) = moduli
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::INFINITY), |best, (k, v)| if v < best.1 { (k, v) } else { best });
        let max_modulus = moduli.iter().copied().fold(0.0, f64::max);
        Self {
            phi,
            moduli,
            min_modulus,
            argmin,
            max_modulus,
        }
    }
}

/// Reusable FFT plan and buffers for layers of a fixed size `n`.
pub struct LayerEvaluator {
    n: usize,
    fft: Arc<dyn Fft<f64>>,
    buf: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

impl LayerEvaluator {
    pub fn new(n: usize) -> Self {
        let fft = FftPlanner::new().plan_fft_inverse(n);
        let scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
        Self {
            n,
            fft,
            buf: vec![Complex64::new(0.0, 0.0); n],
            scratch,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `G_n(e^{i(2πk/n + φ)})` for `k = 0..n-1`.
    ///
    /// The twist `e^{ijφ}` is built as `e^{i(j mod B)φ}·e^{i(j - j mod B)φ}` with
    /// both factors from direct trig calls, which keeps the phase error at a few
    /// ulps without `n` sin/cos evaluations per layer.
    pub fn values(&mut self, coefficients: &[f64], phi: f64) -> &[Complex64] {
        assert_eq!(coefficients.len(), self.n, "coefficient length must equal n");
        const B: usize = 32;
        if phi == 0.0 {
            for (slot, &c) in self.buf.iter_mut().zip(coefficients) {
                *slot = Complex64::new(c, 0.0);
            }
        } else {
            let fine: Vec<Complex64> = (0..B.min(self.n))
                .map(|r| Complex64::from_polar(1.0, r as f64 * phi))
                .collect();
            for (block, chunk) in coefficients.chunks(B).enumerate() {
                let coarse = Complex64::from_polar(1.0, (block * B) as f64 * phi);
                let out = &mut self.buf[block * B..block * B + chunk.len()];
                for ((slot, &c), &w) in out.iter_mut().zip(chunk).zip(&fine) {
                    *slot = coarse * w * c;
                }
            }
        }
        self.fft.process_with_scratch(&mut self.buf, &mut self.scratch);
        &self.buf
    }

    pub fn eval_layer(&mut self, coefficients: &[f64], phi: f64) -> EvalResult {
        let moduli = self.values(coefficients, phi).iter().map(|v| v.norm()).collect();
        EvalResult::from_moduli(phi, moduli)
    }
}

/// `|G_n|` on the layer rotated by `phi`.
pub fn eval_layer(sample: &PolynomialSample, phi: f64) -> EvalResult {
    LayerEvaluator::new(sample.n()).eval_layer(&sample.coefficients, phi)
}

/// Table of `e^{2πir/n}`, `r = 0..n-1`, for direct evaluation of single DFT bins.
#[derive(Debug, Clone)]
pub struct RootTable {
    roots: Vec<Complex64>,
}

impl RootTable {
    pub fn new(n: usize) -> Self {
        Self {
            roots: (0..n)
                .map(|r| Complex64::from_polar(1.0, TAU * r as f64 / n as f64))
                .collect(),
        }
    }

    pub fn n(&self) -> usize {
        self.roots.len()
    }

    /// `S_{n,k} = Σ_j ξ_j e^{2πikj/n}`, with the phase reduced exactly mod n.
    pub fn bin(&self, coefficients: &[f64], k: usize) -> Complex64 {
        let n = self.roots.len();
        let mut idx = 0usize;
        let mut acc = Complex64::new(0.0, 0.0);
        for &c in coefficients {
            acc += self.roots[idx] * c;
            idx += k;
            if idx >= n {
                idx -= n;
            }
        }
        acc
    }
}

/// `S_{n,k}` for one sample.
pub fn compute_s(sample: &PolynomialSample, k: usize) -> Result<Complex64> {
    let n = sample.n();
    if k >= n {
        return Err(KacError::IndexOutOfRange { index: k, len: n });
    }
    Ok(RootTable::new(n).bin(&sample.coefficients, k))
}

/// Extremes of `|G_n|` over all ball centers of a region.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegionExtrema {
    pub min_modulus: f64,
    pub max_modulus: f64,
    pub argmin: GridPoint,
}

/// Center-restricted extremes of one layer (for per-layer reports).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LayerExtrema {
    pub l: u64,
    pub phi: f64,
    pub min_modulus: f64,
    pub argmin_k: usize,
    pub max_modulus: f64,
}

/// Evaluates every layer of one region; holds the FFT plan for reuse across samples.
pub struct RegionEvaluator {
    spec: RegionSpec,
    layer: LayerEvaluator,
}

impl RegionEvaluator {
    pub fn new(spec: &RegionSpec) -> Self {
        Self {
            spec: spec.clone(),
            layer: LayerEvaluator::new(spec.n),
        }
    }

    pub fn spec(&self) -> &RegionSpec {
        &self.spec
    }

    fn check(&self, coefficients: &[f64]) -> Result<()> {
        if coefficients.len() != self.spec.n {
            return Err(KacError::InvalidInput(format!(
                "sample has n = {}, region has n = {}",
                coefficients.len(),
                self.spec.n
            )));
        }
        Ok(())
    }

    /// Calls `visit` with the center-restricted extremes of each layer, in order.
    fn scan(&mut self, coefficients: &[f64], mut visit: impl FnMut(LayerExtrema)) {
        for l in 0..=self.spec.layers {
            let phi = l as f64 * self.spec.alpha;
            // k = 0 is a center only on layer 0.
            let first = usize::from(l != 0);
            let values = self.layer.values(coefficients, phi);
            let mut ext = LayerExtrema {
                l,
                phi,
                min_modulus: f64::INFINITY,
                argmin_k: first,
                max_modulus: 0.0,
            };
            for (k, v) in values.iter().enumerate().skip(first) {
                let m = v.norm();
                if m < ext.min_modulus {
                    ext.min_modulus = m;
                    ext.argmin_k = k;
                }
                ext.max_modulus = ext.max_modulus.max(m);
            }
            visit(ext);
        }
    }

    /// Global extremes over all centers.
    pub fn extrema(&mut self, coefficients: &[f64]) -> Result<RegionExtrema> {
        self.check(coefficients)?;
        let mut best = (f64::INFINITY, 0usize, 0u64);
        let mut max_modulus: f64 = 0.0;
        self.scan(coefficients, |ext| {
            if ext.min_modulus < best.0 {
                best = (ext.min_modulus, ext.argmin_k, ext.l);
            }
            max_modulus = max_modulus.max(ext.max_modulus);
        });
        let (min_modulus, k, l) = best;
        let argmin = self
            .spec
            .grid_points()
            .nth(grid_offset(&self.spec, k, l))
            .expect("argmin is a grid point");
        debug_assert_eq!((argmin.k, argmin.l), (k, l));
        Ok(RegionExtrema {
            min_modulus,
            max_modulus,
            argmin,
        })
    }

    pub fn layer_extrema(&mut self, coefficients: &[f64]) -> Result<Vec<LayerExtrema>> {
        self.check(coefficients)?;
        let mut out = Vec::with_capacity(self.spec.layers as usize + 1);
        self.scan(coefficients, |ext| out.push(ext));
        Ok(out)
    }
}

/// Position of `(k, l)` in the order emitted by `RegionSpec::grid_points`.
fn grid_offset(spec: &RegionSpec, k: usize, l: u64) -> usize {
    if l == 0 {
        let dup = usize::from(spec.includes_half && k > spec.n / 2);
        k + dup
    } else {
        let layer0 = spec.n + usize::from(spec.includes_half);
        layer0 + (l as usize - 1) * (spec.n - 1) + (k - 1)
    }
}

/// Global `(min, max, argmin)` of `|G_n|` over the ball centers of `spec`.
pub fn region_min_max(sample: &PolynomialSample, spec: &RegionSpec) -> Result<RegionExtrema> {
    RegionEvaluator::new(spec).extrema(&sample.coefficients)
}
