//! Maximum-likelihood intersection estimate by damped, projected Newton iterations.
//!
//! The iteration runs in the coordinates `(n, α, β)` (overlap and the two exclusive parts),
//! where feasibility is a box: every coordinate stays above `clamp_floor_fraction · u0`.
//! Coordinates sitting on the floor with the gradient pointing outward are frozen for the
//! step, the Newton system is solved on the rest, and the result is projected back onto the
//! box. A step that lowers the likelihood is halved up to eight times.

use serde::Serialize;

use crate::cardinality::{hll_estimate, maxima_cardinality};
use crate::error::{Error, Result};
use crate::intersect::{gradient, hessian, log_likelihood, ProblemParams};
use crate::sketch::{indicator_stats, HllSketch, IndicatorStats, MaxSketch};

pub const MAX_ITERATIONS_CAP: u32 = 10;
const MAX_HALVINGS: u32 = 8;
/// Tolerated likelihood decrease, absorbing rounding in the exact difference.
const LL_SLACK: f64 = 1e-10;
/// Final-step relative change below which a run counts as converged.
const CONVERGED_CHANGE: f64 = 1e-6;
/// Overlap ceiling relative to the smaller set.
const OVERLAP_CEILING: f64 = 1.0 - 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Initializer {
    #[default]
    Maxsketch,
    Hll,
}

impl std::str::FromStr for Initializer {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "maxsketch" => Ok(Self::Maxsketch),
            "hll" => Ok(Self::Hll),
            other => Err(Error::InvalidConfig(format!("unknown initializer {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MlConfig {
    pub max_iterations: u32,
    pub rel_tolerance: f64,
    pub clamp_floor_fraction: f64,
    pub initializer: Initializer,
}

impl Default for MlConfig {
    fn default() -> Self {
        Self {
            max_iterations: 3,
            rel_tolerance: 1e-9,
            clamp_floor_fraction: 1e-6,
            initializer: Initializer::Maxsketch,
        }
    }
}

impl MlConfig {
    pub fn validate(&self) -> Result<()> {
        if !(1..=MAX_ITERATIONS_CAP).contains(&self.max_iterations) {
            return Err(Error::InvalidConfig(format!(
                "max_iterations must be in 1..={MAX_ITERATIONS_CAP}, got {}",
                self.max_iterations
            )));
        }
        if !(self.rel_tolerance > 0.0 && self.rel_tolerance.is_finite()) {
            return Err(Error::InvalidConfig("rel_tolerance must be positive".into()));
        }
        if !(self.clamp_floor_fraction > 0.0 && self.clamp_floor_fraction < 0.5) {
            return Err(Error::InvalidConfig(
                "clamp_floor_fraction must be in (0, 0.5)".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Fallback {
    /// No slot matched; the overlap is reported as zero.
    NoEqual,
    /// Every slot matched; the sets are reported identical.
    AllEqual,
    /// The Newton system could not be solved; the starting point is returned.
    SingularHessian,
}

impl Fallback {
    pub fn label(&self) -> &'static str {
        match self {
            Fallback::NoEqual => "no_equal",
            Fallback::AllEqual => "all_equal",
            Fallback::SingularHessian => "singular_hessian",
        }
    }
}

/// Cardinality estimates used to start the iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Cardinalities {
    pub a: f64,
    pub b: f64,
    pub union: f64,
}

impl Cardinalities {
    pub fn from_maxsketches(sa: &MaxSketch, sb: &MaxSketch) -> Result<Self> {
        let xa = sa.maxima().ok_or(Error::EmptySketch)?;
        let xb = sb.maxima().ok_or(Error::EmptySketch)?;
        Ok(Self::from_maxima(xa, xb))
    }

    pub(crate) fn from_maxima(xa: &[u64], xb: &[u64]) -> Self {
        let merged: Vec<u64> = xa.iter().zip(xb).map(|(&s, &t)| s.max(t)).collect();
        Self {
            a: maxima_cardinality(xa),
            b: maxima_cardinality(xb),
            union: maxima_cardinality(&merged),
        }
    }

    pub fn from_hll(ha: &HllSketch, hb: &HllSketch) -> Result<Self> {
        let u = ha.merge(hb)?;
        Ok(Self {
            a: hll_estimate(ha).value,
            b: hll_estimate(hb).value,
            union: hll_estimate(&u).value,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MlReport {
    pub n_hat: f64,
    pub a_hat: f64,
    pub b_hat: f64,
    pub iterations: u32,
    pub converged: bool,
    pub log_likelihood: f64,
    pub fallback: Option<Fallback>,
    /// Starting point `(a0, b0, n0)` after projection onto the feasible box.
    pub initial: [f64; 3],
    /// Relative parameter change of the last Newton step.
    pub last_change: f64,
}

/// ML estimate starting from the max-sketch cardinality estimates.
pub fn ml_estimate(sa: &MaxSketch, sb: &MaxSketch, config: &MlConfig) -> Result<MlReport> {
    if config.initializer == Initializer::Hll {
        return Err(Error::InvalidConfig(
            "the hll initializer needs hll sketches; use ml_estimate_with".into(),
        ));
    }
    let init = Cardinalities::from_maxsketches(sa, sb)?;
    ml_estimate_with(sa, sb, &init, config)
}

/// ML estimate from explicit starting cardinalities.
pub fn ml_estimate_with(
    sa: &MaxSketch,
    sb: &MaxSketch,
    init: &Cardinalities,
    config: &MlConfig,
) -> Result<MlReport> {
    let stats = indicator_stats(sa, sb)?;
    let identical = maxima_cardinality(sa.maxima().ok_or(Error::EmptySketch)?);
    ml_estimate_from_stats(&stats, init, identical, config)
}

/// ML estimate from precomputed slot statistics. `identical_cardinality` is reported when
/// every slot matches.
pub fn ml_estimate_from_stats(
    stats: &IndicatorStats,
    init: &Cardinalities,
    identical_cardinality: f64,
    config: &MlConfig,
) -> Result<MlReport> {
    config.validate()?;
    let rho = stats.jaccard();
    let [k1, k2, k3] = stats.counts();

    if k1 == 0 {
        let (a, b) = (init.a.max(f64::MIN_POSITIVE), init.b.max(f64::MIN_POSITIVE));
        let p = ProblemParams::from_parts(0.0, a, b);
        return Ok(MlReport {
            n_hat: 0.0,
            a_hat: a,
            b_hat: b,
            iterations: 0,
            converged: true,
            log_likelihood: log_likelihood(&p, stats)?,
            fallback: Some(Fallback::NoEqual),
            initial: [a, b, 0.0],
            last_change: 0.0,
        });
    }
    if k2 == 0 && k3 == 0 {
        let c = identical_cardinality;
        let p = ProblemParams::from_parts(c, 0.0, 0.0);
        return Ok(MlReport {
            n_hat: c,
            a_hat: c,
            b_hat: c,
            iterations: 0,
            converged: true,
            log_likelihood: log_likelihood(&p, stats)?,
            fallback: Some(Fallback::AllEqual),
            initial: [c, c, c],
            last_change: 0.0,
        });
    }

    let u0 = init.union.max(init.a).max(init.b);
    let floor = config.clamp_floor_fraction * u0;
    let n0 = rho * init.union;
    let start = project([n0, init.a - n0, init.b - n0], floor);
    let start_params = to_params(start);
    let initial = [start_params.a(), start_params.b(), start_params.n()];

    let mut phi = start;
    let mut ll = log_likelihood(&start_params, stats)?;
    let mut iterations = 0;
    let mut last_change = f64::INFINITY;
    let mut early_stop = false;

    while iterations < config.max_iterations {
        let p = to_params(phi);
        let step = match newton_direction(&p, phi, floor, stats)? {
            Some(s) => s,
            None => {
                return Ok(MlReport {
                    n_hat: initial[2],
                    a_hat: initial[0],
                    b_hat: initial[1],
                    iterations,
                    converged: false,
                    log_likelihood: log_likelihood(&start_params, stats)?,
                    fallback: Some(Fallback::SingularHessian),
                    initial,
                    last_change,
                })
            }
        };
        iterations += 1;

        let full = project(add(phi, step), floor);
        last_change = relative_change(phi, full);
        let mut scale = 1.0;
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let cand = project(add(phi, step.map(|d| d * scale)), floor);
            let gain = ll_difference(phi, cand, stats);
            if gain >= -LL_SLACK {
                accepted = Some((cand, gain));
                break;
            }
            scale *= 0.5;
        }
        let Some((next, gain)) = accepted else {
            break;
        };
        if scale < 1.0 {
            last_change = relative_change(phi, next);
        }
        phi = next;
        ll += gain;
        if last_change < config.rel_tolerance {
            early_stop = true;
            break;
        }
    }

    let p = to_params(phi);
    Ok(MlReport {
        n_hat: p.n(),
        a_hat: p.a(),
        b_hat: p.b(),
        iterations,
        converged: early_stop || last_change < CONVERGED_CHANGE,
        log_likelihood: log_likelihood(&p, stats).unwrap_or(ll),
        fallback: None,
        initial,
        last_change,
    })
}

fn to_params(phi: [f64; 3]) -> ProblemParams {
    ProblemParams::from_parts(phi[0], phi[1], phi[2])
}

fn add(x: [f64; 3], y: [f64; 3]) -> [f64; 3] {
    [x[0] + y[0], x[1] + y[1], x[2] + y[2]]
}

/// Clamps `(n, α, β)` onto the box and keeps the overlap strictly below both set sizes.
fn project(phi: [f64; 3], floor: f64) -> [f64; 3] {
    let mut out = phi.map(|x| if x.is_finite() { x.max(floor) } else { floor });
    let cap = (out[0] + out[1].min(out[2])) * OVERLAP_CEILING;
    if out[0] > cap {
        let shift = out[0] - cap;
        out[0] = cap;
        out[1] += shift;
        out[2] += shift;
    }
    out
}

/// Largest relative move among `a`, `b` and `n`.
fn relative_change(from: [f64; 3], to: [f64; 3]) -> f64 {
    let (p, q) = (to_params(from), to_params(to));
    [(p.a(), q.a()), (p.b(), q.b()), (p.n(), q.n())]
        .iter()
        .map(|&(x, y)| ((y - x) / x).abs())
        .fold(0.0, f64::max)
}

/// `LL(to) - LL(from)` assembled from differences and `ln_1p` of relative changes so that
/// tiny steps are not lost to cancellation.
fn ll_difference(from: [f64; 3], to: [f64; 3], stats: &IndicatorStats) -> f64 {
    let d = [to[0] - from[0], to[1] - from[1], to[2] - from[2]];
    let (dn, dal, dbe) = (d[0], d[1], d[2]);
    let (da, db, du) = (dn + dal, dn + dbe, dn + dal + dbe);
    let (n, al, be) = (from[0], from[1], from[2]);
    let (a, b) = (n + al, n + be);
    let [k1, k2, k3] = stats.counts().map(|c| c as f64);
    let ln_ratio = |c: f64, dx: f64, x: f64| if c > 0.0 { c * (dx / x).ln_1p() } else { 0.0 };
    let (eq, bl, alw) = (&stats.equal, &stats.b_larger, &stats.a_larger);
    ln_ratio(k1, dn, n)
        + du * eq.ln_a
        + ln_ratio(k2, dbe, be)
        + ln_ratio(k2, da, a)
        + dbe * bl.ln_b
        + da * bl.ln_a
        + ln_ratio(k3, dal, al)
        + ln_ratio(k3, db, b)
        + dal * alw.ln_a
        + db * alw.ln_b
}

/// Newton step in `(n, α, β)` with coordinates pinned at the floor held fixed. `None` when
/// the reduced system is singular.
fn newton_direction(
    p: &ProblemParams,
    phi: [f64; 3],
    floor: f64,
    stats: &IndicatorStats,
) -> Result<Option<[f64; 3]>> {
    let g = gradient(p, stats)?;
    let h = hessian(p, stats)?;
    // d(a, b, n)/d(n, α, β)
    const J: [[f64; 3]; 3] = [[1.0, 1.0, 0.0], [1.0, 0.0, 1.0], [1.0, 0.0, 0.0]];
    let mut g_phi = [0.0; 3];
    let mut h_phi = [[0.0; 3]; 3];
    for i in 0..3 {
        for r in 0..3 {
            g_phi[i] += J[r][i] * g[r];
        }
        for j in 0..3 {
            for r in 0..3 {
                for c in 0..3 {
                    h_phi[i][j] += J[r][i] * h[r][c] * J[c][j];
                }
            }
        }
    }
    let free: Vec<usize> = (0..3)
        .filter(|&i| !(phi[i] <= floor * (1.0 + 1e-12) && g_phi[i] < 0.0))
        .collect();
    let mut step = [0.0; 3];
    if free.is_empty() {
        return Ok(Some(step));
    }
    let k = free.len();
    let mut a = vec![vec![0.0; k + 1]; k];
    for (r, &i) in free.iter().enumerate() {
        for (c, &j) in free.iter().enumerate() {
            a[r][c] = h_phi[i][j];
        }
        a[r][k] = -g_phi[i];
    }
    let Some(x) = solve(a) else {
        return Ok(None);
    };
    for (r, &i) in free.iter().enumerate() {
        step[i] = x[r];
    }
    Ok(Some(step))
}

/// Gaussian elimination with partial pivoting on an augmented `k × (k+1)` system.
fn solve(mut a: Vec<Vec<f64>>) -> Option<Vec<f64>> {
    let k = a.len();
    let scale = a
        .iter()
        .flat_map(|row| row[..k].iter())
        .fold(0.0f64, |s, &v| s.max(v.abs()));
    if !(scale > 0.0 && scale.is_finite()) {
        return None;
    }
    for col in 0..k {
        let piv = (col..k).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() <= 1e-13 * scale {
            return None;
        }
        a.swap(col, piv);
        for r in col + 1..k {
            let f = a[r][col] / a[col][col];
            for c in col..=k {
                a[r][c] -= f * a[col][c];
            }
        }
    }
    let mut x = vec![0.0; k];
    for r in (0..k).rev() {
        let s: f64 = (r + 1..k).map(|c| a[r][c] * x[c]).sum();
        x[r] = (a[r][k] - s) / a[r][r];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}
