//! Small-ball probabilities `P(|S_{n,k}| <= t)` of the Fourier sums
//! `S_{n,k} = Σ_j ξ_j e^{2πikj/n}` and the bounds they are compared against.

use std::collections::BTreeMap;
use std::f64::consts::{PI, SQRT_2};

use rayon::prelude::*;
use serde::Serialize;

use crate::coefficients::CoefficientLaw;
use crate::error::{KacError, Result};
use crate::evaluator::RootTable;
use crate::gram::gcd;
use crate::rng::trial_rng;
use crate::stats::{binomial_halfwidth, least_squares, LinearFit};

pub const MIN_TRIALS: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SmallBallEstimate {
    pub n: usize,
    pub k: usize,
    pub t: f64,
    pub trials: u64,
    pub hits: u64,
    pub p_hat: f64,
    /// 95% normal-approximation half-width; `3/trials` (rule of three) for zero hits.
    pub ci_halfwidth: f64,
    pub gcd_nk: u64,
    pub bound_value: Option<f64>,
}

impl SmallBallEstimate {
    fn new(n: usize, k: usize, t: f64, trials: u64, hits: u64) -> Self {
        Self {
            n,
            k,
            t,
            trials,
            hits,
            p_hat: hits as f64 / trials as f64,
            ci_halfwidth: binomial_halfwidth(hits, trials),
            gcd_nk: gcd(n as u64, k as u64),
            bound_value: None,
        }
    }

    /// `p_hat <= bound + 3·ci`, when a bound is attached.
    pub fn dominated(&self) -> Option<bool> {
        self.bound_value
            .map(|b| self.p_hat <= b + 3.0 * self.ci_halfwidth)
    }
}

/// Monte Carlo estimate of `P(|S_{n,k}| <= t)`.
///
/// Trial `i` uses the coefficients `sample_coefficients(law, n, seed, i)` would return.
pub fn mc_small_ball(
    law: CoefficientLaw,
    n: usize,
    k: usize,
    t: f64,
    trials: usize,
    seed: u64,
) -> Result<SmallBallEstimate> {
    Ok(mc_small_ball_multi(law, n, k, &[t], trials, seed)?.remove(0))
}

/// Several thresholds evaluated on one common set of samples, so estimates
/// are monotone in `t` by construction.
pub fn mc_small_ball_multi(
    law: CoefficientLaw,
    n: usize,
    k: usize,
    ts: &[f64],
    trials: usize,
    seed: u64,
) -> Result<Vec<SmallBallEstimate>> {
    law.validate()?;
    if n < 2 {
        return Err(KacError::InvalidSize(format!("n = {n}, need n >= 2")));
    }
    if k >= n {
        return Err(KacError::IndexOutOfRange { index: k, len: n });
    }
    if trials < MIN_TRIALS {
        return Err(KacError::Precondition(format!(
            "trials = {trials}, need >= {MIN_TRIALS}"
        )));
    }
    if ts.is_empty() || ts.iter().any(|t| !(*t >= 0.0)) {
        return Err(KacError::Precondition("thresholds must be >= 0".into()));
    }

    const CHUNK: usize = 512;
    let table = RootTable::new(n);
    let hits = (0..trials.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut buf = vec![0.0; n];
            let mut local = vec![0u64; ts.len()];
            for trial in c * CHUNK..((c + 1) * CHUNK).min(trials) {
                law.fill(&mut trial_rng(seed, trial as u64), &mut buf);
                let s = table.bin(&buf, k).norm();
                for (h, &t) in local.iter_mut().zip(ts) {
                    *h += u64::from(s <= t);
                }
            }
            local
        })
        .reduce(
            || vec![0u64; ts.len()],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        );
    Ok(ts
        .iter()
        .zip(hits)
        .map(|(&t, h)| SmallBallEstimate::new(n, k, t, trials as u64, h))
        .collect())
}

/// `n^{2/3} ln n`, the largest gcd the lattice bound admits.
pub fn gcd_admissibility_threshold(n: usize) -> f64 {
    let nf = n as f64;
    nf.powf(2.0 / 3.0) * nf.ln()
}

/// `(C1/n)(t/√2 + C2·gcd(n,k)/n)²` for `1 <= k <= n-1`, `k != n/2`,
/// `gcd(n,k) <= n^{2/3} ln n`.
pub fn rv_bound(n: usize, k: usize, t: f64, c1: f64, c2: f64) -> Result<f64> {
    if k == 0 || k >= n || 2 * k == n {
        return Err(KacError::Domain(format!(
            "k = {k} for n = {n}: use remark_bound for k in {{0, n/2}}"
        )));
    }
    let g = gcd(n as u64, k as u64);
    if g as f64 > gcd_admissibility_threshold(n) {
        return Err(KacError::Domain(format!(
            "gcd({n}, {k}) = {g} exceeds n^(2/3) ln n"
        )));
    }
    if !(c1 > 0.0 && c2 > 0.0) {
        return Err(KacError::Precondition("C1 and C2 must be positive".into()));
    }
    let nf = n as f64;
    Ok(c1 / nf * (t / SQRT_2 + c2 * g as f64 / nf).powi(2))
}

/// Column-norm fallback: `C/√n` for `k ∈ {0, n/2}`, else `(C1/n)(t/√2 + 2√2)²`.
pub fn remark_bound(n: usize, k: usize, t: f64, c1: f64, c: f64) -> Result<f64> {
    if k >= n {
        return Err(KacError::IndexOutOfRange { index: k, len: n });
    }
    let nf = n as f64;
    if k == 0 || 2 * k == n {
        Ok(c / nf.sqrt())
    } else {
        Ok(c1 / nf * (t / SQRT_2 + 2.0 * SQRT_2).powi(2))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GcdCensus {
    pub n: usize,
    pub threshold: f64,
    pub count: usize,
    /// Sorted `k ∈ 1..n` with `gcd(k, n) > threshold`.
    pub offenders: Vec<usize>,
}

pub fn divisors(n: usize) -> Vec<usize> {
    let mut small = Vec::new();
    let mut large = Vec::new();
    let mut d = 1;
    while d * d <= n {
        if n.is_multiple_of(d) {
            small.push(d);
            if d * d != n {
                large.push(n / d);
            }
        }
        d += 1;
    }
    small.extend(large.into_iter().rev());
    small
}

/// Exact census of `k ∈ {1, …, n-1}` with `gcd(k, n) > threshold`.
///
/// Each such `k` is `d·j` for a proper divisor `d > threshold` and `j` coprime
/// to `n/d`, so only multiples of large divisors are visited.
pub fn gcd_census(n: usize, threshold: f64) -> Result<GcdCensus> {
    if n < 2 {
        return Err(KacError::InvalidSize(format!("n = {n}, need n >= 2")));
    }
    if !(threshold > 0.0) {
        return Err(KacError::Precondition(format!("threshold = {threshold} must be > 0")));
    }
    let mut offenders: Vec<usize> = divisors(n)
        .into_iter()
        .filter(|&d| d < n && d as f64 > threshold)
        .flat_map(|d| {
            let period = (n / d) as u64;
            (1..period)
                .filter(move |&j| gcd(j, period) == 1)
                .map(move |j| d * j as usize)
        })
        .collect();
    offenders.sort_unstable();
    Ok(GcdCensus {
        n,
        threshold,
        count: offenders.len(),
        offenders,
    })
}

/// `n / (n^{2/3} ln n) = n^{1/3} / ln n`.
pub fn census_bound(n: usize) -> f64 {
    let nf = n as f64;
    nf.cbrt() / nf.ln()
}

/// Least-squares slope of `ln p_hat` against `ln n`.
///
/// Estimates sharing an `n` are pooled (hits and trials summed); pooled cells
/// with zero hits are dropped.
pub fn fit_scaling(estimates: &[SmallBallEstimate]) -> Result<LinearFit> {
    let mut pooled: BTreeMap<usize, (u64, u64)> = BTreeMap::new();
    for e in estimates {
        let cell = pooled.entry(e.n).or_default();
        cell.0 += e.hits;
        cell.1 += e.trials;
    }
    if pooled.len() < 4 {
        return Err(KacError::FitUndefined(format!(
            "{} distinct n, need >= 4",
            pooled.len()
        )));
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = pooled
        .iter()
        .filter(|(_, &(h, _))| h > 0)
        .map(|(&n, &(h, t))| ((n as f64).ln(), (h as f64 / t as f64).ln()))
        .unzip();
    if xs.is_empty() {
        return Err(KacError::FitUndefined("every cell has zero hits".into()));
    }
    least_squares(&xs, &ys)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundConstants {
    pub c1: f64,
    pub c2: f64,
}

/// Representative `k` for each admissible gcd class of `n`: `k = d` for every
/// divisor `d < n` with `d != n/2` and `d <= n^{2/3} ln n`.
pub fn gcd_class_representatives(n: usize) -> Vec<usize> {
    let limit = gcd_admissibility_threshold(n);
    divisors(n)
        .into_iter()
        .filter(|&d| d < n && 2 * d != n && d as f64 <= limit)
        .collect()
}

/// Fits `(C1, C2)` so the bound is tight on `cells`.
///
/// For each `C2` on a log grid over `[0.1, 1000]` (plus `8π`), `C1` is the
/// smallest value dominating every cell with hits; the pair with the smallest
/// mean log-excess `ln(bound / p_hat)` wins.
pub fn calibrate_constants(cells: &[SmallBallEstimate]) -> Result<BoundConstants> {
    let usable: Vec<&SmallBallEstimate> = cells
        .iter()
        .filter(|c| c.hits > 0 && c.k != 0 && 2 * c.k != c.n)
        .collect();
    if usable.is_empty() {
        return Err(KacError::FitUndefined("no calibration cell has hits".into()));
    }
    let shape = |c: &SmallBallEstimate, c2: f64| {
        let nf = c.n as f64;
        (c.t / SQRT_2 + c2 * c.gcd_nk as f64 / nf).powi(2) / nf
    };
    let mut grid: Vec<f64> = (0..=80).map(|i| 10f64.powf(-1.0 + 4.0 * i as f64 / 80.0)).collect();
    grid.push(8.0 * PI);

    let mut best: Option<(f64, BoundConstants)> = None;
    for c2 in grid {
        let c1 = usable
            .iter()
            .map(|c| c.p_hat / shape(c, c2))
            .fold(0.0, f64::max);
        let excess = usable
            .iter()
            .map(|c| (c1 * shape(c, c2) / c.p_hat).ln())
            .sum::<f64>()
            / usable.len() as f64;
        if best.as_ref().is_none_or(|(e, _)| excess < *e) {
            best = Some((excess, BoundConstants { c1, c2 }));
        }
    }
    Ok(best.expect("grid is non-empty").1)
}

/// Attaches the appropriate bound to an estimate: `rv_bound` where its domain
/// allows, otherwise `remark_bound` with `c_remark` for `k ∈ {0, n/2}` and the
/// generic column-norm branch for inadmissible gcds.
pub fn attach_bound(est: &mut SmallBallEstimate, consts: BoundConstants, c_remark: f64) {
    est.bound_value = rv_bound(est.n, est.k, est.t, consts.c1, consts.c2)
        .or_else(|_| remark_bound(est.n, est.k, est.t, consts.c1, c_remark))
        .ok();
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Exact P(|S_{n,k}| <= t) for Rademacher coefficients by enumerating all 2^n sign patterns.
    fn enumerate(n: usize, k: usize, t: f64) -> f64 {
        let table = RootTable::new(n);
        let mut hits = 0u64;
        for mask in 0u32..(1 << n) {
            let xi: Vec<f64> = (0..n)
                .map(|j| if mask >> j & 1 == 1 { 1.0 } else { -1.0 })
                .collect();
            hits += u64::from(table.bin(&xi, k).norm() <= t);
        }
        hits as f64 / (1u64 << n) as f64
    }

    #[test]
    fn enumeration_oracle_values() {
        assert_eq!(enumerate(2, 1, 1.0), 0.5);
        assert_eq!(enumerate(4, 0, 0.5), 0.375);
    }

    #[test]
    fn rademacher_small_cases_match_enumeration() {
        for (n, k, t) in [(2usize, 1usize, 1.0), (4, 0, 0.5), (3, 1, 1.1), (4, 1, 1.5)] {
            let exact = enumerate(n, k, t);
            let est = mc_small_ball(CoefficientLaw::Rademacher, n, k, t, 100_000, 17).unwrap();
            assert!(
                (est.p_hat - exact).abs() <= 3.0 * est.ci_halfwidth.max(1e-12),
                "n={n} k={k} t={t}: {} vs {exact}",
                est.p_hat
            );
        }
    }

    #[test]
    fn continuous_law_never_hits_zero_ball() {
        let est = mc_small_ball(CoefficientLaw::gaussian(1.0).unwrap(), 16, 3, 0.0, 20_000, 1).unwrap();
        assert_eq!(est.hits, 0);
        assert_eq!(est.p_hat, 0.0);
        assert_eq!(est.ci_halfwidth, 3.0 / 20_000.0);
    }

    #[test]
    fn common_samples_are_monotone_in_t() {
        let ts = [0.0, 0.5, 1.0, 2.0, 4.0];
        let est = mc_small_ball_multi(CoefficientLaw::uniform(1.0).unwrap(), 32, 5, &ts, 20_000, 3).unwrap();
        for w in est.windows(2) {
            assert!(w[0].hits <= w[1].hits);
        }
        let single = mc_small_ball(CoefficientLaw::uniform(1.0).unwrap(), 32, 5, 2.0, 20_000, 3).unwrap();
        assert_eq!(single.hits, est[3].hits);
    }

    #[test]
    fn mc_preconditions() {
        let law = CoefficientLaw::Rademacher;
        assert!(mc_small_ball(law, 8, 8, 1.0, 20_000, 0).is_err());
        assert!(mc_small_ball(law, 8, 1, 1.0, 100, 0).is_err());
        assert!(mc_small_ball(law, 8, 1, -1.0, 20_000, 0).is_err());
    }

    #[test]
    fn rv_bound_examples() {
        let b = rv_bound(100, 1, 0.0, 1.0, 8.0 * PI).unwrap();
        assert!((b - 0.01 * (8.0 * PI / 100.0).powi(2)).abs() < 1e-15);
        assert!((b - 6.32e-4).abs() < 0.01e-4);
        assert!(matches!(rv_bound(100, 50, 1.0, 1.0, 1.0), Err(KacError::Domain(_))));
        assert!(matches!(rv_bound(100, 0, 1.0, 1.0, 1.0), Err(KacError::Domain(_))));
        // t doubling with negligible gcd term quadruples the bound
        let a = rv_bound(1 << 20, 1, 1.0, 1.0, 1e-9).unwrap();
        let b = rv_bound(1 << 20, 1, 2.0, 1.0, 1e-9).unwrap();
        assert!((b / a - 4.0).abs() < 1e-6);
    }

    #[test]
    fn remark_bound_examples() {
        assert!((remark_bound(64, 0, 1.0, 1.0, 1.0).unwrap() - 0.125).abs() < 1e-15);
        assert!((remark_bound(64, 32, 1.0, 1.0, 1.0).unwrap() - 0.125).abs() < 1e-15);
        assert!((remark_bound(64, 3, 0.0, 1.0, 1.0).unwrap() - 0.125).abs() < 1e-15);
    }

    #[test]
    fn census_examples() {
        let c = gcd_census(12, 3.0).unwrap();
        assert_eq!(c.count, 3);
        assert_eq!(c.offenders, vec![4, 6, 8]);
        let thr = 12f64.powf(2.0 / 3.0) * 12f64.ln();
        assert!((thr - 13.03).abs() < 0.01);
        assert_eq!(gcd_census(12, thr).unwrap().count, 0);
        for p in [97usize, 7919] {
            assert_eq!(gcd_census(p, 1.0).unwrap().count, 0);
        }
    }

    #[test]
    fn census_matches_brute_force() {
        for n in 2..400usize {
            for thr in [1.0, 2.5, 7.0, gcd_admissibility_threshold(n)] {
                let brute: Vec<usize> = (1..n).filter(|&k| gcd(k as u64, n as u64) as f64 > thr).collect();
                assert_eq!(gcd_census(n, thr).unwrap().offenders, brute, "n={n} thr={thr}");
            }
        }
    }

    fn synthetic(n: usize, p: f64) -> SmallBallEstimate {
        let trials = 1_000_000_000u64;
        SmallBallEstimate::new(n, 1, 1.0, trials, (p * trials as f64).round() as u64)
    }

    #[test]
    fn fit_on_exact_power_laws() {
        let ns = [256usize, 512, 1024, 2048, 4096];
        let fit = fit_scaling(&ns.map(|n| synthetic(n, 1.0 / n as f64))).unwrap();
        assert!((fit.slope + 1.0).abs() < 1e-6);
        assert!((fit.r2 - 1.0).abs() < 1e-9);
        let flat = fit_scaling(&ns.map(|n| synthetic(n, 0.2))).unwrap();
        assert!(flat.slope.abs() < 1e-12);
    }

    #[test]
    fn fit_errors() {
        let three = [256usize, 512, 1024].map(|n| synthetic(n, 0.1));
        assert!(matches!(fit_scaling(&three), Err(KacError::FitUndefined(_))));
        let zeros = [256usize, 512, 1024, 2048].map(|n| synthetic(n, 0.0));
        assert!(matches!(fit_scaling(&zeros), Err(KacError::FitUndefined(_))));
    }

    #[test]
    fn gcd_classes() {
        assert_eq!(gcd_class_representatives(64), vec![1, 2, 4, 8, 16]);
        assert_eq!(divisors(12), vec![1, 2, 3, 4, 6, 12]);
    }

    #[test]
    fn calibration_is_tight_and_dominating() {
        let cells: Vec<SmallBallEstimate> = [(64usize, 1usize, 0.5, 0.004), (64, 8, 1.0, 0.03), (256, 1, 2.0, 0.015)]
            .iter()
            .map(|&(n, k, t, p)| SmallBallEstimate::new(n, k, t, 1_000_000, (p * 1e6) as u64))
            .collect();
        let consts = calibrate_constants(&cells).unwrap();
        let mut tight = false;
        for c in &cells {
            let b = rv_bound(c.n, c.k, c.t, consts.c1, consts.c2).unwrap();
            assert!(c.p_hat <= b * (1.0 + 1e-12));
            tight |= (b - c.p_hat).abs() < 1e-12;
        }
        assert!(tight);
    }
}
