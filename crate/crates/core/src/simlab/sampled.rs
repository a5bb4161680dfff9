//! Sketches drawn directly from their distributions under ideal uniform hashing.
//!
//! The maximum of `N` independent uniforms is `U^(1/N)`; its distance to one,
//! `-expm1(ln U / N)`, is computed directly and mapped onto the 64-bit hash grid. For HLL,
//! elements of a part are spread over the registers by a sequence of binomial draws, and the
//! largest of `c` ranks `R` with `P(R >= r) = 2^(1-r)` is drawn by inversion.
//! A and B share the overlap's draws, so their dependence matches that of hashed sets.

use rand::Rng;
use rand_distr::{Binomial, Distribution};

/// Raw hash of the maximum of `count` uniforms, `None` for an empty part.
fn max_of_uniforms<R: Rng>(rng: &mut R, count: u64) -> Option<u64> {
    if count == 0 {
        return None;
    }
    // 1 - random() lies in (0, 1]
    let u = 1.0 - rng.random::<f64>();
    let gap = -(u.ln() / count as f64).exp_m1();
    let steps = (gap * 18_446_744_073_709_551_616.0) as u64;
    Some(u64::MAX - steps)
}

/// Max-sketch maxima of A and B for parts `[only A, shared, only B]`.
pub fn sample_maxima<R: Rng>(rng: &mut R, parts: [u64; 3], m: usize) -> (Vec<u64>, Vec<u64>) {
    let mut xa = Vec::with_capacity(m);
    let mut xb = Vec::with_capacity(m);
    for _ in 0..m {
        let p = max_of_uniforms(rng, parts[0]);
        let q = max_of_uniforms(rng, parts[1]);
        let r = max_of_uniforms(rng, parts[2]);
        xa.push(p.max(q).unwrap_or(0));
        xb.push(q.max(r).unwrap_or(0));
    }
    (xa, xb)
}

/// Registers of one part of `count` elements.
fn sample_part_registers<R: Rng>(rng: &mut R, count: u64, m: usize, max_rank: u8) -> Vec<u8> {
    let mut regs = vec![0u8; m];
    let mut left = count;
    for (j, reg) in regs.iter_mut().enumerate() {
        if left == 0 {
            break;
        }
        let c = if j + 1 == m {
            left
        } else {
            Binomial::new(left, 1.0 / (m - j) as f64)
                .expect("probability in (0, 1]")
                .sample(rng)
        };
        left -= c;
        if c > 0 {
            let u = 1.0 - rng.random::<f64>();
            let tail = -(u.ln() / c as f64).exp_m1();
            let r = (-tail.log2()).ceil();
            *reg = r.clamp(1.0, max_rank as f64) as u8;
        }
    }
    regs
}

/// HLL registers of A and B with `m` registers (a power of two).
pub fn sample_registers<R: Rng>(rng: &mut R, parts: [u64; 3], m: usize) -> (Vec<u8>, Vec<u8>) {
    let max_rank = (65 - m.trailing_zeros()) as u8;
    let p = sample_part_registers(rng, parts[0], m, max_rank);
    let q = sample_part_registers(rng, parts[1], m, max_rank);
    let r = sample_part_registers(rng, parts[2], m, max_rank);
    let a = p.iter().zip(&q).map(|(&x, &y)| x.max(y)).collect();
    let b = q.iter().zip(&r).map(|(&x, &y)| x.max(y)).collect();
    (a, b)
}
