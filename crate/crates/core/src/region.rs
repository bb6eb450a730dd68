//! The ball grid around the unit circle.
//!
//! Centers are the n-th roots of unity `e^{2πik/n}`, `k = 1..n-1`, rotated
//! through layers `l = 0..=m` by `l·α` radians with `α = 2π/N`, plus the two
//! unrotated centers `1` and (for even `n`) `-1`. All balls are closed with
//! radius `δ`.

use std::f64::consts::TAU;
use std::fmt::{self, Write as _};
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{KacError, Result};

/// Which δ(n) scale is used: `n^{-(1/p + 1/2)}` or `n^{-(1/p + 1/3)}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Half,
    Third,
}

impl Regime {
    pub fn exponent(self) -> f64 {
        match self {
            Regime::Half => 0.5,
            Regime::Third => 1.0 / 3.0,
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regime::Half => "half",
            Regime::Third => "third",
        })
    }
}

impl FromStr for Regime {
    type Err = KacError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "half" | "1/2" => Ok(Regime::Half),
            "third" | "1/3" => Ok(Regime::Third),
            other => Err(KacError::Parse(format!("unknown regime `{other}` (half|third)"))),
        }
    }
}

/// Every derived quantity of the region for one `n`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegionSpec {
    pub n: usize,
    pub p: f64,
    pub beta: f64,
    pub regime: Regime,
    /// Ball radius δ(n).
    pub delta: f64,
    /// Least integer N with `N·δ >= 2π`.
    pub rotations: u64,
    /// Real-valued `2π·n^{1/p+e}·(ln n)^{2β}`, kept for comparison with `rotations`.
    pub rotations_closed_form: f64,
    /// Rotation step `2π/N` in radians.
    pub alpha: f64,
    /// `ceil(N/n)`; layers run over `l = 0..=layers`.
    pub layers: u64,
    /// Max-modulus budget g(n), defined by `g·δ = n^{-e}(ln n)^{-β}`.
    pub g: f64,
    pub includes_half: bool,
}

pub fn build_region_spec(n: usize, p: f64, beta: f64, regime: Regime) -> Result<RegionSpec> {
    if n < 4 {
        return Err(KacError::TooSmall { n, min: 4 });
    }
    if !(p > 0.0 && p.is_finite()) {
        return Err(KacError::InvalidExponent(p));
    }
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(KacError::Precondition(format!("beta must be >= 0, got {beta}")));
    }
    let nf = n as f64;
    let ln = nf.ln();
    let e = regime.exponent();
    let scale = nf.powf(1.0 / p + e) * ln.powf(2.0 * beta);
    let delta = 1.0 / scale;

    let mut rotations = (TAU / delta).ceil() as u64;
    while rotations > 1 && (rotations - 1) as f64 * delta >= TAU {
        rotations -= 1;
    }
    while (rotations as f64) * delta < TAU {
        rotations += 1;
    }
    let budget = nf.powf(-e) * ln.powf(-beta);

    Ok(RegionSpec {
        n,
        p,
        beta,
        regime,
        delta,
        rotations,
        rotations_closed_form: TAU * scale,
        alpha: TAU / rotations as f64,
        layers: rotations.div_ceil(n as u64),
        g: budget / delta,
        includes_half: n.is_multiple_of(2),
    })
}

/// One ball center.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridPoint {
    pub k: usize,
    pub l: u64,
    pub angle: f64,
    #[serde(skip)]
    pub value: Complex64,
}

impl GridPoint {
    fn new(spec: &RegionSpec, k: usize, l: u64) -> Self {
        let angle = layer_angle(spec, k, l);
        Self {
            k,
            l,
            angle,
            value: Complex64::new(angle.cos(), angle.sin()),
        }
    }
}

fn layer_angle(spec: &RegionSpec, k: usize, l: u64) -> f64 {
    TAU * k as f64 / spec.n as f64 + l as f64 * spec.alpha
}

impl RegionSpec {
    /// Threshold `n^{-e}(ln n)^{-β}` of the small-minimum event.
    pub fn min_threshold(&self) -> f64 {
        (self.n as f64).powf(-self.regime.exponent()) * (self.n as f64).ln().powf(-self.beta)
    }

    /// Taylor slack `g·δ` between a ball center and any point of its ball.
    pub fn slack(&self) -> f64 {
        self.g * self.delta
    }

    /// `2 + (m+1)(n-1)` for even n, `1 + (m+1)(n-1)` for odd n.
    pub fn ball_count(&self) -> u64 {
        let special = if self.includes_half { 2 } else { 1 };
        special + (self.layers + 1) * (self.n as u64 - 1)
    }

    /// Same spec with the layer count replaced (small hand-checked grids).
    pub fn with_layers(&self, layers: u64) -> Self {
        Self {
            layers,
            ..self.clone()
        }
    }

    /// Whether center `k` is present on layer `l`.
    pub fn is_center(&self, k: usize, l: u64) -> bool {
        k < self.n && (l == 0 || (k != 0 && l <= self.layers))
    }

    /// All ball centers, layer by layer, `k` ascending within a layer.
    ///
    /// Layer 0 lists `k = 0` (the special center `1`) and, for even n, lists
    /// `k = n/2` twice: once as a rotated center and once as the special center
    /// `-1`. This keeps the emitted count equal to [`ball_count`](Self::ball_count).
    pub fn grid_points(&self) -> impl Iterator<Item = GridPoint> + '_ {
        (0..=self.layers).flat_map(move |l| {
            let first = usize::from(l != 0);
            (first..self.n).flat_map(move |k| {
                let dup = l == 0 && self.includes_half && k == self.n / 2;
                std::iter::repeat_n(GridPoint::new(self, k, l), 1 + usize::from(dup))
            })
        })
    }

    /// Distance from `z` to the nearest ball center.
    ///
    /// Per layer only the centers bracketing `arg z` (and their neighbours, in
    /// case a bracketing index is absent on that layer) can be nearest, so this
    /// costs `O(m)` instead of `O(m·n)`.
    pub fn nearest_center_distance(&self, z: Complex64) -> f64 {
        let n = self.n as i64;
        let theta = z.arg();
        let mut best = f64::INFINITY;
        for l in 0..=self.layers {
            let x = (theta - l as f64 * self.alpha) * self.n as f64 / TAU;
            let k0 = x.floor() as i64;
            for dk in -1..=2 {
                let k = (k0 + dk).rem_euclid(n) as usize;
                if !self.is_center(k, l) {
                    continue;
                }
                let a = layer_angle(self, k, l);
                let d = (z - Complex64::new(a.cos(), a.sin())).norm();
                best = best.min(d);
            }
        }
        best
    }

    /// Closed-ball membership: nearest center within `δ` (boundary included).
    pub fn contains(&self, z: Complex64) -> bool {
        self.nearest_center_distance(z) <= self.delta
    }

    /// Arc of the unit circle left uncovered by the balls, as `(start, end)` angles.
    ///
    /// The `k = 0` center is never rotated, so between angle `~δ` and the
    /// `k = 1` center at `2π/n` only the wrap-around of the `k = n-1` layers
    /// (which overshoot `2π` by less than `α`) reaches in. `None` when the balls
    /// overlap that arc completely.
    pub fn uncovered_arc(&self) -> Option<(f64, f64)> {
        // Chord δ subtends angle 2·asin(δ/2).
        let reach = 2.0 * (self.delta / 2.0).min(1.0).asin();
        let overshoot = (layer_angle(self, self.n - 1, self.layers) - TAU).max(0.0);
        let start = reach.max(overshoot + reach);
        let end = TAU / self.n as f64 - reach;
        (start < end).then_some((start, end))
    }

    /// CSV of all centers: `k,l,angle_rad,re,im`.
    pub fn centers_csv(&self) -> String {
        let mut out = String::from("k,l,angle_rad,re,im\n");
        for pt in self.grid_points() {
            let _ = writeln!(
                out,
                "{},{},{:.16e},{:.16e},{:.16e}",
                pt.k, pt.l, pt.angle, pt.value.re, pt.value.im
            );
        }
        out
    }

    /// SVG picture of the region, optionally with points (e.g. roots) overlaid.
    ///
    /// Grids with more than `max_balls` balls are thinned by drawing every
    /// s-th layer; the skipped stride is noted in a comment.
    pub fn to_svg(&self, overlay: &[Complex64], max_balls: usize) -> String {
        const SIZE: f64 = 800.0;
        const R: f64 = 300.0;
        let c = SIZE / 2.0;
        let to_px = |z: Complex64| (c + R * z.re, c - R * z.im);
        let per_layer = (self.n - 1) as u64;
        let stride = ((self.layers + 1) * per_layer)
            .div_ceil(max_balls.max(1) as u64)
            .max(1);

        let mut svg = String::new();
        let _ = writeln!(
            svg,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
        );
        let _ = writeln!(
            svg,
            "<!-- n={} p={} beta={} regime={} delta={:e} N={} m={} balls={} layer_stride={} -->",
            self.n,
            self.p,
            self.beta,
            self.regime,
            self.delta,
            self.rotations,
            self.layers,
            self.ball_count(),
            stride
        );
        let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(
            svg,
            r##"<circle cx="{c}" cy="{c}" r="{R}" fill="none" stroke="#000" stroke-width="1.5"/>"##
        );
        let rad = (R * self.delta).max(0.5);
        let _ = writeln!(svg, r##"<g fill="#4a90d9" fill-opacity="0.25" stroke="#1f4e79" stroke-width="0.4">"##);
        for pt in self.grid_points().filter(|pt| pt.l % stride == 0) {
            let (x, y) = to_px(pt.value);
            let _ = writeln!(svg, r#"<circle cx="{x:.3}" cy="{y:.3}" r="{rad:.3}"/>"#);
        }
        let _ = writeln!(svg, "</g>");
        if !overlay.is_empty() {
            let _ = writeln!(svg, r##"<g fill="#c0392b">"##);
            for &z in overlay {
                let (x, y) = to_px(z);
                if x.is_finite() && y.is_finite() {
                    let _ = writeln!(svg, r#"<circle cx="{x:.3}" cy="{y:.3}" r="2"/>"#);
                }
            }
            let _ = writeln!(svg, "</g>");
        }
        svg.push_str("</svg>\n");
        svg
    }
}

/// Brute-force nearest-center distance over every emitted grid point.
pub fn nearest_center_distance_brute(spec: &RegionSpec, z: Complex64) -> f64 {
    spec.grid_points()
        .map(|pt| (z - pt.value).norm())
        .fold(f64::INFINITY, f64::min)
}

/// Angle of `z` in `[0, 2π)`.
pub fn unit_angle(z: Complex64) -> f64 {
    let a = z.arg();
    if a < 0.0 {
        a + TAU
    } else {
        a
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use std::f64::consts::PI;
    use rand_chacha::ChaCha8Rng;

    fn spec4() -> RegionSpec {
        build_region_spec(4, 1.0, 0.0, Regime::Half).unwrap()
    }

    #[test]
    fn small_spec_by_hand() {
        let s = spec4();
        assert_eq!(s.delta, 0.125);
        assert_eq!(s.rotations, 51);
        assert_eq!((16.0 * PI).ceil() as u64, 51);
        assert_eq!(s.layers, 13);
        assert_eq!(s.ball_count(), 44);
        assert_eq!(s.grid_points().count(), 44);
        assert!(s.includes_half);
        assert!((s.rotations_closed_form - 16.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn delta_for_n256_beta1() {
        let s = build_region_spec(256, 1.0, 1.0, Regime::Half).unwrap();
        let expected = 1.0 / (256f64.powf(1.5) * 256f64.ln().powi(2));
        assert!((s.delta - expected).abs() / expected < 1e-14);
        assert!((s.delta - 7.94e-6).abs() < 0.01e-6);
    }

    #[test]
    fn odd_n_drops_half_ball() {
        let s = build_region_spec(5, 1.0, 0.0, Regime::Half).unwrap();
        assert!(!s.includes_half);
        assert_eq!(s.ball_count(), 1 + (s.layers + 1) * 4);
        assert_eq!(s.grid_points().count() as u64, s.ball_count());
    }

    #[test]
    fn build_errors() {
        assert!(matches!(
            build_region_spec(3, 1.0, 0.0, Regime::Half),
            Err(KacError::TooSmall { n: 3, .. })
        ));
        assert!(matches!(
            build_region_spec(8, 0.0, 0.0, Regime::Half),
            Err(KacError::InvalidExponent(_))
        ));
        assert!(build_region_spec(8, 1.0, -1.0, Regime::Half).is_err());
    }

    #[test]
    fn unrotated_layer_is_roots_of_unity() {
        let s = spec4().with_layers(0);
        let angles: Vec<f64> = s.grid_points().map(|p| p.angle).collect();
        // k = 2 appears twice: rotated center and special center -1.
        assert_eq!(angles, vec![0.0, PI / 2.0, PI, PI, 3.0 * PI / 2.0]);
    }

    #[test]
    fn first_layer_is_shifted_by_alpha() {
        let s = spec4();
        let l0: Vec<GridPoint> = s.grid_points().filter(|p| p.l == 0).collect();
        let l1: Vec<GridPoint> = s.grid_points().filter(|p| p.l == 1).collect();
        assert_eq!(l1.len(), 3);
        let rot = Complex64::from_polar(1.0, s.alpha);
        for b in &l1 {
            let a = l0.iter().find(|a| a.k == b.k).unwrap();
            assert!((b.angle - a.angle - s.alpha).abs() < 1e-15);
            assert!((b.value - a.value * rot).norm() < 1e-12);
        }
    }

    #[test]
    fn membership_basics() {
        let s = spec4();
        assert!(s.contains(Complex64::new(1.0, 0.0)));
        assert!(!s.contains(Complex64::new(0.0, 0.0)));
        // boundary of the ball around 1 is included
        assert!(s.contains(Complex64::new(1.0 + s.delta, 0.0)));
        assert!(!s.contains(Complex64::new(1.0 + s.delta * 1.000001, 0.0)));
    }

    #[test]
    fn fast_nearest_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for n in [4usize, 5, 7, 12, 33] {
            let s = build_region_spec(n, 1.0, 0.0, Regime::Third).unwrap();
            for _ in 0..300 {
                let z = Complex64::from_polar(rng.random_range(0.8..1.2), rng.random_range(-PI..PI));
                let fast = s.nearest_center_distance(z);
                let brute = nearest_center_distance_brute(&s, z);
                assert!((fast - brute).abs() < 1e-12, "n={n} z={z} {fast} {brute}");
            }
        }
    }

    #[test]
    fn circle_covered_outside_the_first_sector_gap() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for (n, p, beta) in [(4usize, 1.0, 0.0), (9, 1.0, 0.0), (16, 0.9, 0.5), (64, 1.0, 1.0)] {
            let s = build_region_spec(n, p, beta, Regime::Half).unwrap();
            let (gap_lo, gap_hi) = s.uncovered_arc().expect("gap exists");
            for _ in 0..10_000 {
                let a = rng.random_range(0.0..TAU);
                let z = Complex64::from_polar(1.0, a);
                let inside_gap = a > gap_lo && a < gap_hi;
                assert_eq!(s.contains(z), !inside_gap, "n={n} a={a} gap=({gap_lo},{gap_hi})");
            }
        }
    }

    #[test]
    fn svg_and_csv_shapes() {
        let s = spec4();
        let csv = s.centers_csv();
        assert_eq!(csv.lines().count(), 45);
        assert!(csv.starts_with("k,l,angle_rad,re,im\n0,0,"));
        let svg = s.to_svg(&[Complex64::new(0.5, 0.5)], 10_000);
        assert!(svg.starts_with("<svg"));
        assert_eq!(svg.matches("<circle").count(), 1 + 44 + 1);
    }

    #[test]
    fn regime_parse() {
        assert_eq!("half".parse::<Regime>().unwrap(), Regime::Half);
        assert_eq!("Third".parse::<Regime>().unwrap(), Regime::Third);
        assert!("quarter".parse::<Regime>().is_err());
    }
}
