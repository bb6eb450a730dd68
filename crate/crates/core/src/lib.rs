//! Numerical laboratory for random Kac polynomials
//! `G_n(z) = ξ_0 + ξ_1 z + … + ξ_{n-1} z^{n-1}` with i.i.d. real coefficients.
//!
//! The crate builds the deterministic ball grid around the unit circle on
//! which `|G_n|` is expected to stay large, evaluates polynomials on it with
//! FFTs, estimates small-ball probabilities of the discrete Fourier sums
//! `S_{n,k}`, checks the Gram-matrix identities behind those estimates, and
//! locates roots with an Ehrlich–Aberth iteration.
//!
//! Every random quantity is a pure function of an explicit `(seed, trial)`
//! pair, so results do not depend on thread count or scheduling.

pub mod coefficients;
pub mod error;
pub mod evaluator;
pub mod gram;
pub mod lab;
pub mod region;
pub mod rng;
pub mod roots;
pub mod smallball;
pub mod stats;

pub use coefficients::{CoefficientLaw, PolynomialSample};
pub use error::{KacError, Result};
pub use num_complex::Complex64;
pub use region::{GridPoint, Regime, RegionSpec};
