//! Synthetic set pairs and their hashed sketches.

use std::fmt::Write;
use std::ops::Range;

use crate::error::{Error, Result};
use crate::hash::HashFamily;
use crate::sketch::{HllSketch, MaxSketch};

/// A pair of id sets: `A = 0..a`, `B = 0..n ∪ a..a+b-n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Instance {
    pub a: u64,
    pub b: u64,
    pub n: u64,
}

/// Builds the instance with `|A| = a`, `|B| = round(f·a)` and overlap `round(alpha·a)`.
pub fn generate_instance(a: u64, f: f64, alpha: f64) -> Result<Instance> {
    if a == 0 || !(f > 0.0 && f.is_finite()) || !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidConfig(format!(
            "need a >= 1, f > 0, alpha in [0, 1] (a={a}, f={f}, alpha={alpha})"
        )));
    }
    let n = (alpha * a as f64).round() as u64;
    let b = (f * a as f64).round() as u64;
    if b < n || b == 0 {
        return Err(Error::InfeasibleInstance(format!(
            "|B| = round({f}·{a}) = {b} cannot hold an overlap of {n}"
        )));
    }
    Ok(Instance { a, b, n })
}

impl Instance {
    /// Elements of A outside B.
    pub fn only_a(&self) -> Range<u64> {
        self.n..self.a
    }

    pub fn shared(&self) -> Range<u64> {
        0..self.n
    }

    /// Elements of B outside A.
    pub fn only_b(&self) -> Range<u64> {
        self.a..self.a + self.b - self.n
    }

    pub fn a_ids(&self) -> Range<u64> {
        0..self.a
    }

    pub fn b_ids(&self) -> impl Iterator<Item = u64> {
        self.shared().chain(self.only_b())
    }

    /// Id span of one trial; trial `t` hashes ids shifted by `t · stride`.
    pub fn stride(&self) -> u64 {
        self.a + self.b
    }

    pub fn part_sizes(&self) -> [u64; 3] {
        [self.a - self.n, self.n, self.b - self.n]
    }
}

/// Max-sketches (and optionally HLL sketches) of A and B for one trial.
pub struct HashedPair {
    pub a: MaxSketch,
    pub b: MaxSketch,
    pub hll: Option<(HllSketch, HllSketch)>,
}

/// Hashes the decimal tokens of one trial. Each element is digested once and shared
/// between the max-sketch and the HLL sketch of its part.
pub fn hash_instance(
    inst: &Instance,
    family: &HashFamily,
    trial: u64,
    with_hll: bool,
) -> Result<HashedPair> {
    let offset = trial.wrapping_mul(inst.stride());
    let mut buf = String::with_capacity(24);
    let mut part = |ids: Range<u64>| -> Result<(MaxSketch, Option<HllSketch>)> {
        let mut s = MaxSketch::new(family.clone());
        let mut h = if with_hll {
            Some(HllSketch::new(family.base_seed(), family.m())?)
        } else {
            None
        };
        for id in ids {
            buf.clear();
            write!(buf, "{}", offset.wrapping_add(id)).expect("writing to a String");
            let d = family.digest(buf.as_bytes());
            s.update_digest(d);
            if let Some(h) = h.as_mut() {
                h.update_digest(d);
            }
        }
        Ok((s, h))
    };
    let (p, hp) = part(inst.only_a())?;
    let (q, hq) = part(inst.shared())?;
    let (r, hr) = part(inst.only_b())?;
    let hll = match (hp, hq, hr) {
        (Some(hp), Some(hq), Some(hr)) => Some((hp.merge(&hq)?, hq.merge(&hr)?)),
        _ => None,
    };
    Ok(HashedPair {
        a: p.merge(&q)?,
        b: q.merge(&r)?,
        hll,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_instance() {
        let inst = generate_instance(4, 1.0, 0.5).unwrap();
        assert_eq!(inst.n, 2);
        assert_eq!(inst.a_ids().collect::<Vec<_>>(), vec![0, 1, 2, 3]);
        assert_eq!(inst.b_ids().collect::<Vec<_>>(), vec![0, 1, 4, 5]);
    }

    #[test]
    fn identical_and_disjoint() {
        let same = generate_instance(10, 1.0, 1.0).unwrap();
        assert_eq!(same.b_ids().collect::<Vec<_>>(), same.a_ids().collect::<Vec<_>>());
        assert_eq!(same.n, 10);
        let apart = generate_instance(10, 1.0, 0.0).unwrap();
        assert_eq!(apart.n, 0);
        assert!(apart.b_ids().all(|id| id >= 10));
    }

    #[test]
    fn infeasible_overlap_is_rejected() {
        assert!(matches!(
            generate_instance(100, 0.3, 0.5),
            Err(Error::InfeasibleInstance(_))
        ));
        assert!(generate_instance(100, 0.0, 0.5).is_err());
        assert!(generate_instance(100, 1.0, 1.5).is_err());
    }

    #[test]
    fn hashed_pair_equals_direct_sketches() {
        let inst = generate_instance(50, 2.0, 0.4).unwrap();
        let family = HashFamily::new(9, 16).unwrap();
        let pair = hash_instance(&inst, &family, 3, true).unwrap();
        let off = 3 * inst.stride();
        let mut a = MaxSketch::new(family.clone());
        a.extend(inst.a_ids().map(|i| (off + i).to_string()));
        let mut b = MaxSketch::new(family.clone());
        b.extend(inst.b_ids().map(|i| (off + i).to_string()));
        assert_eq!(pair.a, a);
        assert_eq!(pair.b, b);
        let mut ha = HllSketch::new(9, 16).unwrap();
        ha.extend(inst.a_ids().map(|i| (off + i).to_string()));
        assert_eq!(pair.hll.unwrap().0, ha);
    }
}
