//! Intersection-size estimators over a pair of sketches.

mod likelihood;
mod ml;

pub use likelihood::{count_hessian, gradient, hessian, log_likelihood};
pub use ml::{
    ml_estimate, ml_estimate_from_stats, ml_estimate_with, Cardinalities, Fallback, Initializer,
    MlConfig, MlReport,
};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::sketch::{indicator_stats, MaxSketch};

/// A parameter point: the two set sizes and their overlap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProblemParams {
    a: f64,
    b: f64,
    n: f64,
}

impl ProblemParams {
    /// Requires finite `a, b > 0` and `0 <= n <= min(a, b)`.
    pub fn new(a: f64, b: f64, n: f64) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && n.is_finite()) || a <= 0.0 || b <= 0.0 {
            return Err(Error::Domain(format!("sizes must be positive and finite: a={a}, b={b}")));
        }
        if n < 0.0 || n > a.min(b) {
            return Err(Error::Domain(format!("overlap {n} outside [0, min({a}, {b})]")));
        }
        Ok(Self { a, b, n })
    }

    pub(crate) fn from_parts(n: f64, only_a: f64, only_b: f64) -> Self {
        Self {
            a: n + only_a,
            b: n + only_b,
            n,
        }
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    /// Size of the intersection.
    pub fn n(&self) -> f64 {
        self.n
    }

    pub fn union(&self) -> f64 {
        self.a + self.b - self.n
    }

    /// Elements of A outside B.
    pub fn only_a(&self) -> f64 {
        self.a - self.n
    }

    /// Elements of B outside A.
    pub fn only_b(&self) -> f64 {
        self.b - self.n
    }

    pub fn jaccard(&self) -> f64 {
        self.n / self.union()
    }
}

/// Fraction of slots where the two sketches hold the same maximum.
pub fn jaccard_estimate(sa: &MaxSketch, sb: &MaxSketch) -> Result<f64> {
    Ok(indicator_stats(sa, sb)?.jaccard())
}

/// Inclusion-exclusion: `a + b - u`. Not clamped, so noise can make it negative.
pub fn scheme1(a_hat: f64, b_hat: f64, u_hat: f64) -> f64 {
    a_hat + b_hat - u_hat
}

/// Jaccard estimate times the union estimate.
pub fn scheme2(rho_hat: f64, u_hat: f64) -> f64 {
    rho_hat * u_hat
}

/// `ρ/(1+ρ) · (a + b)`, from `n = ρ·u` and `u = a + b - n`.
pub fn scheme3(rho_hat: f64, a_hat: f64, b_hat: f64) -> f64 {
    if rho_hat == 0.0 {
        return 0.0;
    }
    rho_hat / (rho_hat + 1.0) * (a_hat + b_hat)
}
