//! Log-likelihood of a sketch pair and its first and second derivatives in `(a, b, n)`.
//!
//! Per slot, with `s`, `t` the unit maxima of A and B:
//!
//! ```text
//! s == t : n · s^(u-1)
//! s <  t : a s^(a-1) · β t^(β-1)
//! s >  t : α s^(α-1) · b t^(b-1)
//! ```
//!
//! where `u` is the union size, `α = a - n` and `β = b - n`.

use crate::error::{Error, Result};
use crate::intersect::ProblemParams;
use crate::sketch::IndicatorStats;

fn check_domain(p: &ProblemParams, counts: [f64; 3]) -> Result<()> {
    let [equal, b_larger, a_larger] = counts;
    if equal > 0.0 && p.n() <= 0.0 {
        return Err(Error::Domain("matching slots need a positive overlap".into()));
    }
    if b_larger > 0.0 && p.only_b() <= 0.0 {
        return Err(Error::Domain("slots won by B need elements of B outside A".into()));
    }
    if a_larger > 0.0 && p.only_a() <= 0.0 {
        return Err(Error::Domain("slots won by A need elements of A outside B".into()));
    }
    Ok(())
}

fn counts_of(stats: &IndicatorStats) -> [f64; 3] {
    stats.counts().map(|c| c as f64)
}

/// `c · ln x`, dropping the term when the count is zero so boundary points stay finite.
fn weighted_ln(c: f64, x: f64) -> f64 {
    if c > 0.0 {
        c * x.ln()
    } else {
        0.0
    }
}

pub fn log_likelihood(p: &ProblemParams, stats: &IndicatorStats) -> Result<f64> {
    let k = counts_of(stats);
    check_domain(p, k)?;
    let (a, b, n) = (p.a(), p.b(), p.n());
    let (al, be, u) = (p.only_a(), p.only_b(), p.union());
    let (eq, bl, al_) = (&stats.equal, &stats.b_larger, &stats.a_larger);
    Ok(weighted_ln(k[0], n)
        + (u - 1.0) * eq.ln_a
        + weighted_ln(k[1], be)
        + weighted_ln(k[1], a)
        + (be - 1.0) * bl.ln_b
        + (a - 1.0) * bl.ln_a
        + weighted_ln(k[2], al)
        + weighted_ln(k[2], b)
        + (al - 1.0) * al_.ln_a
        + (b - 1.0) * al_.ln_b)
}

/// Partial derivatives with respect to `(a, b, n)`.
pub fn gradient(p: &ProblemParams, stats: &IndicatorStats) -> Result<[f64; 3]> {
    let k = counts_of(stats);
    check_domain(p, k)?;
    let (eq, bl, al) = (&stats.equal, &stats.b_larger, &stats.a_larger);
    let ratio = |c: f64, x: f64| if c > 0.0 { c / x } else { 0.0 };
    let k1_n = ratio(k[0], p.n());
    let k2_a = ratio(k[1], p.a());
    let k2_beta = ratio(k[1], p.only_b());
    let k3_b = ratio(k[2], p.b());
    let k3_alpha = ratio(k[2], p.only_a());
    Ok([
        eq.ln_a + k2_a + bl.ln_a + k3_alpha + al.ln_a,
        eq.ln_a + k2_beta + bl.ln_b + k3_b + al.ln_b,
        k1_n - eq.ln_a - k2_beta - bl.ln_b - k3_alpha - al.ln_a,
    ])
}

/// Hessian in `(a, b, n)`; it depends on the data only through the three slot counts.
pub fn hessian(p: &ProblemParams, stats: &IndicatorStats) -> Result<[[f64; 3]; 3]> {
    count_hessian(p, counts_of(stats))
}

/// Hessian for real-valued slot counts `[equal, b_larger, a_larger]`, e.g. their expectations.
pub fn count_hessian(p: &ProblemParams, counts: [f64; 3]) -> Result<[[f64; 3]; 3]> {
    check_domain(p, counts)?;
    let [k1, k2, k3] = counts;
    let inv_sq = |c: f64, x: f64| if c > 0.0 { c / (x * x) } else { 0.0 };
    let k1_n = inv_sq(k1, p.n());
    let k2_a = inv_sq(k2, p.a());
    let k2_beta = inv_sq(k2, p.only_b());
    let k3_b = inv_sq(k3, p.b());
    let k3_alpha = inv_sq(k3, p.only_a());
    Ok([
        [-k2_a - k3_alpha, 0.0, k3_alpha],
        [0.0, -k2_beta - k3_b, k2_beta],
        [k3_alpha, k2_beta, -k1_n - k2_beta - k3_alpha],
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sketch::SlotClass;
    use proptest::prelude::*;

    fn stats(k: [u64; 3], s1: f64, s2: (f64, f64), s3: (f64, f64)) -> IndicatorStats {
        IndicatorStats {
            m: k.iter().sum::<u64>() as usize,
            equal: SlotClass {
                count: k[0],
                ln_a: s1,
                ln_b: s1,
            },
            b_larger: SlotClass {
                count: k[1],
                ln_a: s2.0,
                ln_b: s2.1,
            },
            a_larger: SlotClass {
                count: k[2],
                ln_a: s3.0,
                ln_b: s3.1,
            },
        }
    }

    fn example() -> (ProblemParams, IndicatorStats) {
        (
            ProblemParams::new(3.0, 3.0, 1.0).unwrap(),
            stats([1, 1, 0], 0.8f64.ln(), (0.5f64.ln(), 0.9f64.ln()), (0.0, 0.0)),
        )
    }

    fn params(v: [f64; 3]) -> ProblemParams {
        ProblemParams::new(v[0], v[1], v[2]).unwrap()
    }

    /// Central differences of `f` at `x` with step `rel · x_i`.
    fn central_diff(f: impl Fn([f64; 3]) -> f64, x: [f64; 3], rel: f64) -> [f64; 3] {
        let mut out = [0.0; 3];
        for i in 0..3 {
            let h = rel * x[i];
            let (mut hi, mut lo) = (x, x);
            hi[i] += h;
            lo[i] -= h;
            out[i] = (f(hi) - f(lo)) / (2.0 * h);
        }
        out
    }

    #[test]
    fn example_log_likelihood() {
        let (p, st) = example();
        let ll = log_likelihood(&p, &st).unwrap();
        let hand = 4.0 * 0.8f64.ln() + (2.0 * 0.9 * 3.0 * 0.25f64).ln();
        assert!((ll - hand).abs() < 1e-12);
        assert!((ll - -0.59247).abs() < 5e-6);
    }

    #[test]
    fn example_gradient() {
        let (p, st) = example();
        let g = gradient(&p, &st).unwrap();
        let expect = [-0.58296, 0.17150, 0.82850];
        for i in 0..3 {
            assert!((g[i] - expect[i]).abs() < 5e-6, "{g:?}");
        }
        let fd = central_diff(
            |x| log_likelihood(&params(x), &st).unwrap(),
            [3.0, 3.0, 1.0],
            1e-6,
        );
        for i in 0..3 {
            assert!((g[i] - fd[i]).abs() < 1e-7);
        }
    }

    #[test]
    fn example_hessian() {
        let (p, st) = example();
        let h = hessian(&p, &st).unwrap();
        assert!((h[0][0] + 1.0 / 9.0).abs() < 1e-15);
        assert!((h[1][1] + 0.25).abs() < 1e-15);
        assert!((h[2][2] + 1.25).abs() < 1e-15);
        assert!((h[1][2] - 0.25).abs() < 1e-15);
        assert_eq!(h[0][2], 0.0);
        assert_eq!(h[0][1], 0.0);
    }

    #[test]
    fn all_equal_case() {
        let m = 50;
        let s1 = -12.5;
        let st = stats([m, 0, 0], s1, (0.0, 0.0), (0.0, 0.0));
        let p = ProblemParams::new(40.0, 40.0, 40.0).unwrap();
        let ll = log_likelihood(&p, &st).unwrap();
        assert!((ll - (m as f64 * 40f64.ln() + 39.0 * s1)).abs() < 1e-12);
        // along a = b = n the likelihood is m ln n + (n - 1) S1s, stationary at n = m / (-S1s)
        let root = m as f64 / -s1;
        let q = ProblemParams::new(root, root, root).unwrap();
        let g = gradient(&q, &st).unwrap();
        assert!((g[0] + g[1] + g[2]).abs() < 1e-12);
        let h = hessian(&q, &st).unwrap();
        for (i, row) in h.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                assert_eq!(v != 0.0, i == 2 && j == 2);
            }
        }
    }

    #[test]
    fn single_slot_matches_case_densities() {
        let (a, b, n) = (7.0, 5.0, 2.0);
        let (u, al, be) = (a + b - n, a - n, b - n);
        let p = params([a, b, n]);
        let (s, t) = (0.7f64, 0.85f64);
        let eq = stats([1, 0, 0], s.ln(), (0.0, 0.0), (0.0, 0.0));
        let lt = stats([0, 1, 0], 0.0, (s.ln(), t.ln()), (0.0, 0.0));
        let gt = stats([0, 0, 1], 0.0, (0.0, 0.0), (t.ln(), s.ln()));
        let dens_eq = n * s.powf(u - 1.0);
        let dens_lt = a * s.powf(a - 1.0) * be * t.powf(be - 1.0);
        let dens_gt = al * t.powf(al - 1.0) * b * s.powf(b - 1.0);
        for (st, d) in [(eq, dens_eq), (lt, dens_lt), (gt, dens_gt)] {
            let l = log_likelihood(&p, &st).unwrap().exp();
            assert!((l - d).abs() < 1e-12 * d, "{l} vs {d}");
        }
    }

    #[test]
    fn domain_errors() {
        let st = stats([1, 1, 1], -1.0, (-1.0, -0.5), (-0.5, -1.0));
        let zero_overlap = ProblemParams::new(5.0, 5.0, 0.0).unwrap();
        assert!(matches!(log_likelihood(&zero_overlap, &st), Err(Error::Domain(_))));
        let b_inside_a = ProblemParams::new(5.0, 3.0, 3.0).unwrap();
        assert!(gradient(&b_inside_a, &st).is_err());
        let a_inside_b = ProblemParams::new(3.0, 5.0, 3.0).unwrap();
        assert!(hessian(&a_inside_b, &st).is_err());
        // boundary is fine when the matching count is zero
        let no_a_wins = stats([1, 1, 0], -1.0, (-1.0, -0.5), (0.0, 0.0));
        assert!(log_likelihood(&a_inside_b, &no_a_wins).is_ok());
    }

    prop_compose! {
        fn point()(a in 10.0f64..1e4, fb in 0.1f64..10.0, frac in 0.01f64..0.99,
                   k in prop::array::uniform3(0u64..400),
                   logs in prop::array::uniform5(-50.0f64..-0.01))
                   -> (ProblemParams, IndicatorStats) {
            let b = a * fb;
            let n = frac * a.min(b);
            let st = stats([k[0] + 1, k[1] + 1, k[2] + 1], logs[0], (logs[1], logs[2]), (logs[3], logs[4]));
            (ProblemParams::new(a, b, n).unwrap(), st)
        }
    }

    proptest! {
        #[test]
        fn hessian_is_symmetric((p, st) in point()) {
            let h = hessian(&p, &st).unwrap();
            for i in 0..3 {
                for j in 0..3 {
                    prop_assert_eq!(h[i][j], h[j][i]);
                }
            }
        }

        #[test]
        fn gradient_matches_finite_differences((p, st) in point()) {
            let x = [p.a(), p.b(), p.n()];
            let g = gradient(&p, &st).unwrap();
            let fd = central_diff(|y| log_likelihood(&params(y), &st).unwrap(), x, 1e-6);
            let ll_scale = log_likelihood(&p, &st).unwrap().abs().max(1.0);
            for i in 0..3 {
                // cancellation in the differenced log-likelihood bounds the attainable accuracy
                let noise = 1e-15 * ll_scale / (1e-6 * x[i]);
                prop_assert!((g[i] - fd[i]).abs() <= 1e-6 * g[i].abs() + 10.0 * noise,
                    "component {} analytic {} fd {}", i, g[i], fd[i]);
            }
        }
    }
}
