//! Closed-form variance predictions for the intersection estimators.
//!
//! Variances marked `_norm` are of `n̂ / n`. Formulas that divide by the overlap return
//! [`Error::SingularParameters`] at `n = 0`; the Fisher matrix also needs both exclusive parts
//! positive. The remaining closed forms are polynomial ratios with a positive denominator and
//! are evaluated as written at identical sets.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::intersect::ProblemParams;

pub type Matrix3 = [[f64; 3]; 3];

fn require_overlap(p: &ProblemParams) -> Result<()> {
    if p.n() > 0.0 {
        Ok(())
    } else {
        Err(Error::SingularParameters("overlap n must be positive".into()))
    }
}

/// `α n (a² + αβ) + β n (b² + αβ) + (a² + αβ)(b² + αβ)`.
pub fn z_value(p: &ProblemParams) -> f64 {
    let (a, b, n) = (p.a(), p.b(), p.n());
    let (al, be) = (p.only_a(), p.only_b());
    let ab = al * be;
    al * n * (a * a + ab) + be * n * (b * b + ab) + (a * a + ab) * (b * b + ab)
}

/// Expected information of `m` slots about `(a, b, n)`.
pub fn fisher_matrix(p: &ProblemParams, m: usize) -> Result<Matrix3> {
    let (a, b, n, u) = (p.a(), p.b(), p.n(), p.union());
    let (al, be) = (p.only_a(), p.only_b());
    if !(n > 0.0 && al > 0.0 && be > 0.0) {
        return Err(Error::SingularParameters(format!(
            "information is singular unless n, a-n, b-n > 0 (n={n}, a-n={al}, b-n={be})"
        )));
    }
    let m = m as f64;
    let f11 = be / (u * a * a) + 1.0 / (u * al);
    let f22 = al / (u * b * b) + 1.0 / (u * be);
    let f33 = 1.0 / (u * n) + 1.0 / (u * be) + 1.0 / (u * al);
    let f13 = -1.0 / (u * al);
    let f23 = -1.0 / (u * be);
    Ok([
        [m * f11, 0.0, m * f13],
        [0.0, m * f22, m * f23],
        [m * f13, m * f23, m * f33],
    ])
}

/// Lower bound on the variance of an unbiased overlap estimate (not normalized).
pub fn cramer_rao_n(p: &ProblemParams, m: usize) -> Result<f64> {
    require_overlap(p)?;
    let (a, b, n, u) = (p.a(), p.b(), p.n(), p.union());
    let ab = p.only_a() * p.only_b();
    Ok(n * u / m as f64 * (b * b + ab) * (a * a + ab) / z_value(p))
}

pub fn cr_var_norm(p: &ProblemParams, m: usize) -> Result<f64> {
    Ok(cramer_rao_n(p, m)? / (p.n() * p.n()))
}

/// Inclusion-exclusion.
pub fn var_scheme1_norm(p: &ProblemParams, m: usize) -> Result<f64> {
    require_overlap(p)?;
    let (a, b, n, u) = (p.a(), p.b(), p.n(), p.union());
    let ab = p.only_a() * p.only_b();
    let m = m as f64;
    Ok((u * u - a * a - b * b) / (m * n * n) - 2.0 * a * b / (m * u * n)
        + 2.0 * u * (a * a * (b * b + ab) + b * b * (a * a + ab)) / (m * z_value(p) * n))
}

/// Jaccard times union: `1/(mρ)`.
pub fn var_scheme2_norm(p: &ProblemParams, m: usize) -> Result<f64> {
    require_overlap(p)?;
    Ok(p.union() / (m as f64 * p.n()))
}

/// Jaccard substitution.
pub fn var_scheme3_norm(p: &ProblemParams, m: usize) -> Result<f64> {
    require_overlap(p)?;
    let (a, b, n, u) = (p.a(), p.b(), p.n(), p.union());
    let s = a + b;
    Ok((1.0 + 2.0 * a * b / (u * s) + (p.only_a() + p.only_b()) * u * u / (n * s * s)) / m as f64)
}

/// Covariance of the two max-sketch cardinality estimates.
pub fn cov_ab(p: &ProblemParams, m: usize) -> f64 {
    p.n() * p.a() * p.b() / (m as f64 * p.union())
}

pub fn cov_an(p: &ProblemParams, m: usize) -> f64 {
    let ab = p.only_a() * p.only_b();
    p.union() * p.n() * p.a() * p.a() * (p.b() * p.b() + ab) / (m as f64 * z_value(p))
}

pub fn cov_bn(p: &ProblemParams, m: usize) -> f64 {
    cov_an(&swap(p), m)
}

pub fn cov_au(p: &ProblemParams, m: usize) -> f64 {
    p.a() * p.a() / m as f64 + cov_ab(p, m) - cov_an(p, m)
}

pub fn cov_bu(p: &ProblemParams, m: usize) -> f64 {
    cov_au(&swap(p), m)
}

fn swap(p: &ProblemParams) -> ProblemParams {
    ProblemParams::from_parts(p.n(), p.only_b(), p.only_a())
}

/// Mean and variance of the maximum of `n` independent uniforms, a Beta(n, 1) variable.
pub fn beta_max_moments(n: u64) -> Result<(f64, f64)> {
    if n == 0 {
        return Err(Error::Domain("need at least one uniform".into()));
    }
    let n = n as f64;
    Ok((n / (n + 1.0), n / ((n + 1.0) * (n + 1.0) * (n + 2.0))))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TheoryReport {
    pub params: ProblemParams,
    pub m: usize,
    /// `None` on the boundary, where the information matrix is singular.
    pub fisher: Option<Matrix3>,
    pub cr_var_n: f64,
    pub cr_var_norm: f64,
    pub var_scheme1_norm: f64,
    pub var_scheme2_norm: f64,
    pub var_scheme3_norm: f64,
    pub cov_ab: f64,
    pub cov_au: f64,
    pub cov_bu: f64,
    pub cov_an: f64,
    pub z_value: f64,
}

impl TheoryReport {
    /// Needs a positive overlap.
    pub fn new(p: &ProblemParams, m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::UnsupportedSize(0));
        }
        let cr = cramer_rao_n(p, m)?;
        Ok(Self {
            params: *p,
            m,
            fisher: fisher_matrix(p, m).ok(),
            cr_var_n: cr,
            cr_var_norm: cr / (p.n() * p.n()),
            var_scheme1_norm: var_scheme1_norm(p, m)?,
            var_scheme2_norm: var_scheme2_norm(p, m)?,
            var_scheme3_norm: var_scheme3_norm(p, m)?,
            cov_ab: cov_ab(p, m),
            cov_au: cov_au(p, m),
            cov_bu: cov_bu(p, m),
            cov_an: cov_an(p, m),
            z_value: z_value(p),
        })
    }
}
