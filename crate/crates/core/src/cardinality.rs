//! Single-set cardinality estimates from HyperLogLog registers or max-sketch maxima.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::hash::unit_complement;
use crate::sketch::{HllSketch, MaxSketch};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Hll,
    Maxsketch,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CardinalityEstimate {
    pub value: f64,
    pub method: Method,
    pub m: usize,
    pub correction_applied: bool,
}

const ALPHA_REL_TOL: f64 = 1e-10;

/// HyperLogLog bias constant for `m` registers.
///
/// Evaluates `1 / (m * I)` with `I = ∫_0^∞ log2((2+u)/(1+u))^m du`. The substitution
/// `t = 1/(1+u)` turns this into `∫_0^1 log2(1+t)^m / t^2 dt`, whose mass sits within about
/// `1/m` of `t = 1`; the interval is cut geometrically towards that end and each piece is
/// integrated by adaptive Simpson. Results are cached per `m`.
pub fn alpha_m(m: usize) -> Result<f64> {
    if m < 4 {
        return Err(Error::UnsupportedSize(m));
    }
    static CACHE: OnceLock<Mutex<HashMap<usize, f64>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(&a) = cache.lock().unwrap().get(&m) {
        return Ok(a);
    }
    let a = 1.0 / (m as f64 * alpha_integral(m));
    Ok(*cache.lock().unwrap().entry(m).or_insert(a))
}

fn alpha_integral(m: usize) -> f64 {
    let mf = m as f64;
    let f = |t: f64| {
        if t <= 0.0 {
            0.0
        } else {
            (mf * t.ln_1p().ln() - mf * std::f64::consts::LN_2.ln() - 2.0 * t.ln()).exp()
        }
    };
    // breakpoints 0 < ... < 1 - 4/m < 1 - 2/m < 1 - 1/m < 1
    let mut cuts = vec![1.0];
    let mut w = 1.0 / mf;
    while w < 1.0 {
        cuts.push(1.0 - w);
        w *= 2.0;
    }
    cuts.push(0.0);
    cuts.reverse();
    cuts.windows(2)
        .map(|ab| adaptive_simpson(&f, ab[0], ab[1], ALPHA_REL_TOL))
        .sum()
}

fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, rel_tol: f64) -> f64 {
    let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(f, a, b, fa, fm, fb, whole, rel_tol * whole.abs().max(f64::MIN_POSITIVE), 50)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step(
    f: &impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
}

/// HyperLogLog estimate with the linear-counting correction for small cardinalities.
pub fn hll_estimate(sketch: &HllSketch) -> CardinalityEstimate {
    hll_estimate_with(sketch, true)
}

/// HyperLogLog estimate; with `small_range_correction = false` the raw harmonic-mean value is
/// returned unconditionally.
pub fn hll_estimate_with(sketch: &HllSketch, small_range_correction: bool) -> CardinalityEstimate {
    let m = sketch.m();
    let mf = m as f64;
    let alpha = alpha_m(m).expect("hll sketches have at least 4 registers");
    let inv_sum: f64 = sketch
        .registers()
        .iter()
        .map(|&c| 2f64.powi(-(c as i32)))
        .sum();
    let raw = alpha * mf * mf / inv_sum;
    let zeros = sketch.registers().iter().filter(|&&c| c == 0).count();
    let (value, correction_applied) = if small_range_correction && raw <= 2.5 * mf && zeros > 0 {
        (mf * (mf / zeros as f64).ln(), true)
    } else {
        (raw, false)
    };
    CardinalityEstimate {
        value,
        method: Method::Hll,
        m,
        correction_applied,
    }
}

/// `m / Σ (1 - x_k)` over the unit maxima `x_k`.
pub fn maxsketch_cardinality(sketch: &MaxSketch) -> Result<CardinalityEstimate> {
    let maxima = sketch.maxima().ok_or(Error::EmptySketch)?;
    Ok(CardinalityEstimate {
        value: maxima_cardinality(maxima),
        method: Method::Maxsketch,
        m: sketch.m(),
        correction_applied: false,
    })
}

pub(crate) fn maxima_cardinality(maxima: &[u64]) -> f64 {
    let denom: f64 = maxima.iter().map(|&h| unit_complement(h)).sum();
    maxima.len() as f64 / denom
}
