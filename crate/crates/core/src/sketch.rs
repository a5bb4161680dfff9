//! Max-hash sketches and HyperLogLog register arrays.

use crate::error::{Error, Result};
use crate::hash::{derive_key, element_digest, fmix64, ln_unit, HashFamily, HLL_KEY_INDEX};

/// Per-slot maxima of `m` keyed hashes over a set.
///
/// Maxima are kept as raw 64-bit integers so slot equality between two sketches is exact.
/// Equality between sketches ignores `count_observed`, which only records how many stream
/// items were fed in.
#[derive(Debug, Clone)]
pub struct MaxSketch {
    family: HashFamily,
    maxima: Vec<u64>,
    empty: bool,
    count_observed: u64,
}

impl MaxSketch {
    pub fn new(family: HashFamily) -> Self {
        let maxima = vec![0; family.m()];
        Self {
            family,
            maxima,
            empty: true,
            count_observed: 0,
        }
    }

    pub fn with_seed(base_seed: u64, m: usize) -> Result<Self> {
        Ok(Self::new(HashFamily::new(base_seed, m)?))
    }

    /// Rebuilds a non-empty sketch from stored maxima.
    pub fn from_maxima(family: HashFamily, maxima: Vec<u64>, count_observed: u64) -> Result<Self> {
        if maxima.len() != family.m() {
            return Err(Error::Format(format!(
                "expected {} maxima, found {}",
                family.m(),
                maxima.len()
            )));
        }
        Ok(Self {
            family,
            maxima,
            empty: false,
            count_observed,
        })
    }

    pub fn family(&self) -> &HashFamily {
        &self.family
    }

    pub fn m(&self) -> usize {
        self.family.m()
    }

    pub fn is_empty(&self) -> bool {
        self.empty
    }

    /// Raw maxima, or `None` for an empty sketch.
    pub fn maxima(&self) -> Option<&[u64]> {
        (!self.empty).then_some(self.maxima.as_slice())
    }

    pub fn count_observed(&self) -> u64 {
        self.count_observed
    }

    pub fn update(&mut self, element: &[u8]) {
        let digest = self.family.digest(element);
        self.update_digest(digest);
    }

    /// Folds in an element already reduced to its seeded digest.
    #[inline]
    pub(crate) fn update_digest(&mut self, digest: u64) {
        for (slot, &key) in self.maxima.iter_mut().zip(self.family.keys()) {
            let h = fmix64(digest ^ key);
            if h > *slot {
                *slot = h;
            }
        }
        self.empty = false;
        self.count_observed += 1;
    }

    pub fn extend<I, T>(&mut self, elements: I)
    where
        I: IntoIterator<Item = T>,
        T: AsRef<[u8]>,
    {
        for e in elements {
            self.update(e.as_ref());
        }
    }

    /// Slot-wise maximum; the sketch of the union of both sets.
    pub fn merge(&self, other: &MaxSketch) -> Result<MaxSketch> {
        let mut out = self.clone();
        out.merge_in(other)?;
        Ok(out)
    }

    pub fn merge_in(&mut self, other: &MaxSketch) -> Result<()> {
        if !self.family.is_compatible(&other.family) {
            return Err(incompatible(
                (self.family.base_seed(), self.m()),
                (other.family.base_seed(), other.m()),
            ));
        }
        if !other.empty {
            for (x, &y) in self.maxima.iter_mut().zip(&other.maxima) {
                *x = (*x).max(y);
            }
            self.empty = false;
        }
        self.count_observed += other.count_observed;
        Ok(())
    }
}

impl PartialEq for MaxSketch {
    fn eq(&self, other: &Self) -> bool {
        self.family == other.family
            && self.empty == other.empty
            && (self.empty || self.maxima == other.maxima)
    }
}

impl Eq for MaxSketch {}

fn incompatible(a: (u64, usize), b: (u64, usize)) -> Error {
    Error::IncompatibleSketches(format!(
        "seed {} with m = {} vs seed {} with m = {}",
        a.0, a.1, b.0, b.1
    ))
}

/// Largest supported register count is 2^MAX_PRECISION.
const MAX_PRECISION: u32 = 26;

/// HyperLogLog registers over one 64-bit hash per element.
///
/// The low `log2(m)` bits of the hash choose the register; the remaining bits give the rank,
/// one plus their leading-zero count.
#[derive(Debug, Clone)]
pub struct HllSketch {
    base_seed: u64,
    precision: u32,
    hll_key: u64,
    registers: Vec<u8>,
    count_observed: u64,
}

impl HllSketch {
    /// `m` must be a power of two, at least 4.
    pub fn new(base_seed: u64, m: usize) -> Result<Self> {
        if m < 4 || !m.is_power_of_two() || m.trailing_zeros() > MAX_PRECISION {
            return Err(Error::UnsupportedSize(m));
        }
        Ok(Self {
            base_seed,
            precision: m.trailing_zeros(),
            hll_key: derive_key(base_seed, HLL_KEY_INDEX),
            registers: vec![0; m],
            count_observed: 0,
        })
    }

    pub fn from_registers(base_seed: u64, registers: Vec<u8>, count_observed: u64) -> Result<Self> {
        let mut s = Self::new(base_seed, registers.len())?;
        let max_rank = s.max_rank();
        if let Some(&bad) = registers.iter().find(|&&r| r > max_rank) {
            return Err(Error::Format(format!(
                "register value {bad} exceeds the maximum rank {max_rank}"
            )));
        }
        s.registers = registers;
        s.count_observed = count_observed;
        Ok(s)
    }

    pub fn base_seed(&self) -> u64 {
        self.base_seed
    }

    pub fn m(&self) -> usize {
        self.registers.len()
    }

    pub fn precision(&self) -> u32 {
        self.precision
    }

    pub fn registers(&self) -> &[u8] {
        &self.registers
    }

    pub fn count_observed(&self) -> u64 {
        self.count_observed
    }

    pub fn is_empty(&self) -> bool {
        self.registers.iter().all(|&r| r == 0)
    }

    /// Rank of an all-zero pattern.
    pub fn max_rank(&self) -> u8 {
        (65 - self.precision) as u8
    }

    pub fn update(&mut self, element: &[u8]) {
        self.update_digest(element_digest(self.base_seed, element));
    }

    pub(crate) fn update_digest(&mut self, digest: u64) {
        self.insert_hash(fmix64(digest ^ self.hll_key));
    }

    /// Records a precomputed 64-bit hash.
    pub fn insert_hash(&mut self, h: u64) {
        let bucket = (h & (self.m() as u64 - 1)) as usize;
        let rank = rank_of(h >> self.precision, self.precision);
        let r = &mut self.registers[bucket];
        if rank > *r {
            *r = rank;
        }
        self.count_observed += 1;
    }

    pub fn extend<I, T>(&mut self, elements: I)
    where
        I: IntoIterator<Item = T>,
        T: AsRef<[u8]>,
    {
        for e in elements {
            self.update(e.as_ref());
        }
    }

    pub fn merge(&self, other: &HllSketch) -> Result<HllSketch> {
        let mut out = self.clone();
        out.merge_in(other)?;
        Ok(out)
    }

    pub fn merge_in(&mut self, other: &HllSketch) -> Result<()> {
        if self.base_seed != other.base_seed || self.m() != other.m() {
            return Err(incompatible(
                (self.base_seed, self.m()),
                (other.base_seed, other.m()),
            ));
        }
        for (x, &y) in self.registers.iter_mut().zip(&other.registers) {
            *x = (*x).max(y);
        }
        self.count_observed += other.count_observed;
        Ok(())
    }
}

impl PartialEq for HllSketch {
    fn eq(&self, other: &Self) -> bool {
        self.base_seed == other.base_seed && self.registers == other.registers
    }
}

impl Eq for HllSketch {}

/// Leading zeros of the `64 - precision` bit pattern `w`, plus one.
#[inline]
pub(crate) fn rank_of(w: u64, precision: u32) -> u8 {
    if w == 0 {
        (65 - precision) as u8
    } else {
        (w.leading_zeros() - precision + 1) as u8
    }
}

/// Slot count and log-sums for one class of slots.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SlotClass {
    pub count: u64,
    /// Sum of `ln_unit` over the first sketch's maxima in this class.
    pub ln_a: f64,
    /// Sum of `ln_unit` over the second sketch's maxima in this class.
    pub ln_b: f64,
}

/// Sufficient statistics of a max-sketch pair for the likelihood.
///
/// Every slot falls in exactly one class: the two maxima are equal, the second sketch's
/// maximum is larger, or the first's is larger. For the equal class `ln_a == ln_b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IndicatorStats {
    pub m: usize,
    pub equal: SlotClass,
    pub b_larger: SlotClass,
    pub a_larger: SlotClass,
}

impl IndicatorStats {
    /// Fraction of matching slots, the Jaccard estimate.
    pub fn jaccard(&self) -> f64 {
        self.equal.count as f64 / self.m as f64
    }

    pub fn counts(&self) -> [u64; 3] {
        [self.equal.count, self.b_larger.count, self.a_larger.count]
    }
}

/// Classifies every slot of two compatible, non-empty max-sketches.
pub fn indicator_stats(sa: &MaxSketch, sb: &MaxSketch) -> Result<IndicatorStats> {
    if !sa.family.is_compatible(&sb.family) {
        return Err(incompatible(
            (sa.family.base_seed(), sa.m()),
            (sb.family.base_seed(), sb.m()),
        ));
    }
    let (xa, xb) = match (sa.maxima(), sb.maxima()) {
        (Some(x), Some(y)) => (x, y),
        _ => return Err(Error::EmptySketch),
    };
    let mut st = IndicatorStats {
        m: sa.m(),
        equal: SlotClass::default(),
        b_larger: SlotClass::default(),
        a_larger: SlotClass::default(),
    };
    for (&s, &t) in xa.iter().zip(xb) {
        let class = match s.cmp(&t) {
            std::cmp::Ordering::Equal => &mut st.equal,
            std::cmp::Ordering::Less => &mut st.b_larger,
            std::cmp::Ordering::Greater => &mut st.a_larger,
        };
        class.count += 1;
        class.ln_a += ln_unit(s);
        class.ln_b += ln_unit(t);
    }
    Ok(st)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hash::to_unit;
    use proptest::prelude::*;
    use rand::{seq::SliceRandom, Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn tokens(ids: impl IntoIterator<Item = u64>) -> Vec<String> {
        ids.into_iter().map(|i| i.to_string()).collect()
    }

    fn max_of(seed: u64, m: usize, items: &[String]) -> MaxSketch {
        let mut s = MaxSketch::with_seed(seed, m).unwrap();
        s.extend(items);
        s
    }

    fn hll_of(seed: u64, m: usize, items: &[String]) -> HllSketch {
        let mut s = HllSketch::new(seed, m).unwrap();
        s.extend(items);
        s
    }

    /// Unit value `v` as the raw hash whose `to_unit` is closest to it.
    fn raw(v: f64) -> u64 {
        (v * 2f64.powi(64)) as u64
    }

    #[test]
    fn maxima_are_slot_maxima_of_hashes() {
        let items = tokens(0..50);
        let s = max_of(3, 8, &items);
        let f = HashFamily::new(3, 8).unwrap();
        for k in 0..8 {
            let expect = items
                .iter()
                .map(|e| f.hash64(k, e.as_bytes()).unwrap())
                .max()
                .unwrap();
            assert_eq!(s.maxima().unwrap()[k], expect);
        }
    }

    #[test]
    fn update_is_idempotent() {
        let mut s = MaxSketch::with_seed(1, 16).unwrap();
        s.update(b"e");
        let once = s.clone();
        s.update(b"e");
        assert_eq!(s, once);

        let mut h = HllSketch::new(1, 16).unwrap();
        h.update(b"e");
        let once = h.clone();
        h.update(b"e");
        assert_eq!(h, once);
    }

    #[test]
    fn repeated_stream_equals_distinct_set() {
        let stream = ["a", "b", "c", "d", "a", "b"];
        let set = ["a", "b", "c", "d"];
        let mut s1 = MaxSketch::with_seed(9, 32).unwrap();
        s1.extend(stream);
        let mut s2 = MaxSketch::with_seed(9, 32).unwrap();
        s2.extend(set);
        assert_eq!(s1, s2);
        assert_eq!(s1.count_observed(), 6);

        let mut h1 = HllSketch::new(9, 32).unwrap();
        h1.extend(stream);
        let mut h2 = HllSketch::new(9, 32).unwrap();
        h2.extend(set);
        assert_eq!(h1, h2);
    }

    #[test]
    fn ingest_order_does_not_matter() {
        let mut items = tokens(0..200);
        let a = max_of(4, 64, &items);
        let ha = hll_of(4, 64, &items);
        items.shuffle(&mut ChaCha8Rng::seed_from_u64(2));
        assert_eq!(a, max_of(4, 64, &items));
        assert_eq!(ha, hll_of(4, 64, &items));
    }

    #[test]
    fn merge_identities() {
        let s = max_of(5, 16, &tokens(0..30));
        let empty = MaxSketch::with_seed(5, 16).unwrap();
        assert_eq!(s.merge(&s).unwrap(), s);
        assert_eq!(s.merge(&empty).unwrap(), s);
        assert_eq!(empty.merge(&s).unwrap(), s);
        assert!(empty.merge(&empty).unwrap().is_empty());

        let h = hll_of(5, 16, &tokens(0..30));
        let hempty = HllSketch::new(5, 16).unwrap();
        assert_eq!(h.merge(&h).unwrap(), h);
        assert_eq!(h.merge(&hempty).unwrap(), h);
    }

    #[test]
    fn merge_equals_union_for_random_sets() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..20 {
            let a: Vec<u64> = (0..100).map(|_| rng.random_range(0..300)).collect();
            let b: Vec<u64> = (0..100).map(|_| rng.random_range(0..300)).collect();
            let (ta, tb) = (tokens(a.clone()), tokens(b.clone()));
            let union: Vec<String> = tokens(a.into_iter().chain(b));
            let merged = max_of(6, 32, &ta).merge(&max_of(6, 32, &tb)).unwrap();
            assert_eq!(merged, max_of(6, 32, &union));
            let hmerged = hll_of(6, 32, &ta).merge(&hll_of(6, 32, &tb)).unwrap();
            assert_eq!(hmerged, hll_of(6, 32, &union));
        }
    }

    #[test]
    fn merge_rejects_mismatched_families() {
        let a = MaxSketch::with_seed(1, 8).unwrap();
        assert!(matches!(
            a.merge(&MaxSketch::with_seed(2, 8).unwrap()),
            Err(Error::IncompatibleSketches(_))
        ));
        assert!(matches!(
            a.merge(&MaxSketch::with_seed(1, 16).unwrap()),
            Err(Error::IncompatibleSketches(_))
        ));
        let h = HllSketch::new(1, 8).unwrap();
        assert!(h.merge(&HllSketch::new(1, 16).unwrap()).is_err());
        assert!(h.merge(&HllSketch::new(3, 8).unwrap()).is_err());
    }

    #[test]
    fn hll_rejects_bad_sizes() {
        for m in [0, 1, 2, 3, 1000, 12] {
            assert!(matches!(HllSketch::new(0, m), Err(Error::UnsupportedSize(_))));
        }
        assert!(HllSketch::new(0, 4).is_ok());
    }

    #[test]
    fn update_uses_the_hll_hash() {
        let mut a = HllSketch::new(7, 64).unwrap();
        a.update(b"token");
        let mut b = HllSketch::new(7, 64).unwrap();
        b.insert_hash(crate::hash::hll_hash(7, b"token"));
        assert_eq!(a, b);
    }

    #[test]
    fn hll_rank_rule() {
        // m = 16: bucket 5, pattern with exactly three leading zeros
        let mut h = HllSketch::new(0, 16).unwrap();
        h.registers[5] = 2;
        let w: u64 = 1 << (59 - 3);
        h.insert_hash((w << 4) | 5);
        assert_eq!(h.registers()[5], 4);
        // lower rank leaves the register alone
        h.insert_hash(((1u64 << 59) << 4) | 5);
        assert_eq!(h.registers()[5], 4);
        // all-zero pattern reaches the maximum rank
        h.insert_hash(5);
        assert_eq!(h.registers()[5], 61);
        assert_eq!(h.max_rank(), 61);
    }

    #[test]
    fn rank_matches_bitwise_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for p in [2u32, 4, 10, 16] {
            for _ in 0..1000 {
                let w: u64 = rng.random::<u64>() >> (p + rng.random_range(0..(64 - p)));
                let bits = 64 - p;
                let mut zeros = 0;
                while zeros < bits && (w >> (bits - 1 - zeros)) & 1 == 0 {
                    zeros += 1;
                }
                assert_eq!(rank_of(w, p) as u32, zeros + 1);
            }
        }
    }

    #[test]
    fn from_registers_validates() {
        assert!(HllSketch::from_registers(0, vec![0, 1, 63, 3], 0).is_ok());
        assert!(HllSketch::from_registers(0, vec![0, 1, 64, 3], 0).is_err());
        assert!(HllSketch::from_registers(0, vec![0; 5], 0).is_err());
    }

    #[test]
    fn stats_of_identical_sketches() {
        let s = max_of(2, 64, &tokens(0..100));
        let st = indicator_stats(&s, &s).unwrap();
        assert_eq!(st.counts(), [64, 0, 0]);
        assert_eq!(st.b_larger, SlotClass::default());
        assert_eq!(st.a_larger, SlotClass::default());
        assert_eq!(st.jaccard(), 1.0);
    }

    #[test]
    fn stats_classify_slots() {
        let f = HashFamily::new(0, 2).unwrap();
        let sa = MaxSketch::from_maxima(f.clone(), vec![raw(0.8), raw(0.5)], 1).unwrap();
        let sb = MaxSketch::from_maxima(f, vec![raw(0.8), raw(0.9)], 1).unwrap();
        let st = indicator_stats(&sa, &sb).unwrap();
        assert_eq!(st.counts(), [1, 1, 0]);
        assert!((st.equal.ln_a - 0.8f64.ln()).abs() < 1e-12);
        assert_eq!(st.equal.ln_a, st.equal.ln_b);
        assert!((st.b_larger.ln_a - 0.5f64.ln()).abs() < 1e-12);
        assert!((st.b_larger.ln_b - 0.9f64.ln()).abs() < 1e-12);
        assert!((to_unit(raw(0.8)) - 0.8).abs() < 1e-15);
    }

    #[test]
    fn stats_reject_empty_and_mismatch() {
        let s = max_of(1, 4, &tokens(0..3));
        let empty = MaxSketch::with_seed(1, 4).unwrap();
        assert!(matches!(indicator_stats(&s, &empty), Err(Error::EmptySketch)));
        let other = max_of(2, 4, &tokens(0..3));
        assert!(matches!(
            indicator_stats(&s, &other),
            Err(Error::IncompatibleSketches(_))
        ));
    }

    #[test]
    fn matching_fraction_tracks_jaccard() {
        // |A ∩ B| / |A ∪ B| = 1/3; expected K1/m = 1/3
        let m = 256;
        let trials = 200;
        let mut total = 0u64;
        for t in 0..trials {
            let a = tokens(0..200);
            let b = tokens(100..300);
            let sa = max_of(1000 + t, m, &a);
            let sb = max_of(1000 + t, m, &b);
            total += indicator_stats(&sa, &sb).unwrap().equal.count;
        }
        let mean = total as f64 / (trials as f64 * m as f64);
        let se = ((1.0 / 3.0) * (2.0 / 3.0) / (m as f64 * trials as f64)).sqrt();
        assert!((mean - 1.0 / 3.0).abs() < 4.0 * se, "mean {mean}");
    }

    proptest! {
        #[test]
        fn counts_partition_slots(a in prop::collection::vec(0u32..500, 1..60),
                                  b in prop::collection::vec(0u32..500, 1..60),
                                  m in 1usize..40) {
            let sa = max_of(11, m, &tokens(a.iter().map(|&x| x as u64)));
            let sb = max_of(11, m, &tokens(b.iter().map(|&x| x as u64)));
            let st = indicator_stats(&sa, &sb).unwrap();
            prop_assert_eq!(st.counts().iter().sum::<u64>(), m as u64);
            for c in [st.equal, st.b_larger, st.a_larger] {
                prop_assert!(c.ln_a <= 0.0 && c.ln_b <= 0.0);
            }
            prop_assert_eq!(st, indicator_stats(&sa, &sb).unwrap());
        }
    }
}
