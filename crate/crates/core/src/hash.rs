//! Keyed 64-bit hashing shared by every sketch.
//!
//! Hash function `k` of a family seeded with `base_seed` is defined byte-exactly as
//!
//! ```text
//! digest   = XXH3_64(element, seed = base_seed)
//! key(k)   = fmix64(base_seed ^ fmix64((k + 1) * 0x9E3779B97F4A7C15))   (wrapping arithmetic)
//! h_k(e)   = fmix64(digest ^ key(k))
//! ```
//!
//! where `fmix64` is the MurmurHash3 64-bit finalizer. The element digest is computed once per
//! element and each of the `m` functions costs a single finalizer round, which keeps the
//! `m`-fold hashing of a max-sketch affordable. The HyperLogLog sketch uses the same
//! construction with the reserved index [`HLL_KEY_INDEX`], so its hash is disjoint from every
//! max-sketch slot of the same seed.

use xxhash_rust::xxh3::xxh3_64_with_seed;

use crate::error::{Error, Result};

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// Key index reserved for the single hash used by HyperLogLog registers.
pub const HLL_KEY_INDEX: u64 = u64::MAX;

const TWO_POW_NEG_64: f64 = 1.0 / 18_446_744_073_709_551_616.0;

/// Largest double strictly below one.
const ONE_MINUS_ULP: f64 = 1.0 - f64::EPSILON / 2.0;

/// MurmurHash3 64-bit finalizer.
#[inline(always)]
pub fn fmix64(mut k: u64) -> u64 {
    k ^= k >> 33;
    k = k.wrapping_mul(0xff51_afd7_ed55_8ccd);
    k ^= k >> 33;
    k = k.wrapping_mul(0xc4ce_b9fe_1a85_ec53);
    k ^= k >> 33;
    k
}

/// Key of hash function `index` for a family seeded with `base_seed`.
#[inline]
pub fn derive_key(base_seed: u64, index: u64) -> u64 {
    fmix64(base_seed ^ fmix64(index.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA)))
}

/// Seeded XXH3-64 digest of an element.
#[inline]
pub fn element_digest(base_seed: u64, element: &[u8]) -> u64 {
    xxh3_64_with_seed(element, base_seed)
}

/// The single HyperLogLog hash of `element` under `base_seed`.
#[inline]
pub fn hll_hash(base_seed: u64, element: &[u8]) -> u64 {
    fmix64(element_digest(base_seed, element) ^ derive_key(base_seed, HLL_KEY_INDEX))
}

/// A family of `m` keyed hash functions derived from one 64-bit seed.
#[derive(Debug, Clone)]
pub struct HashFamily {
    base_seed: u64,
    keys: Vec<u64>,
}

impl HashFamily {
    pub fn new(base_seed: u64, m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::UnsupportedSize(0));
        }
        let keys = (0..m as u64).map(|k| derive_key(base_seed, k)).collect();
        Ok(Self { base_seed, keys })
    }

    pub fn base_seed(&self) -> u64 {
        self.base_seed
    }

    pub fn m(&self) -> usize {
        self.keys.len()
    }

    /// Hash function `k` applied to `element`.
    pub fn hash64(&self, k: usize, element: &[u8]) -> Result<u64> {
        let key = self
            .keys
            .get(k)
            .ok_or(Error::HashIndexOutOfRange { index: k, m: self.m() })?;
        Ok(fmix64(self.digest(element) ^ key))
    }

    /// Seeded XXH3 digest of the element bytes, shared by all `m` functions.
    #[inline]
    pub fn digest(&self, element: &[u8]) -> u64 {
        element_digest(self.base_seed, element)
    }

    #[inline]
    pub(crate) fn keys(&self) -> &[u64] {
        &self.keys
    }

    /// Same seed and same number of functions.
    pub fn is_compatible(&self, other: &HashFamily) -> bool {
        self.base_seed == other.base_seed && self.m() == other.m()
    }
}

impl PartialEq for HashFamily {
    fn eq(&self, other: &Self) -> bool {
        self.is_compatible(other)
    }
}

impl Eq for HashFamily {}

/// Maps a raw hash to the open unit interval as `(h + 0.5) * 2^-64`.
///
/// Near one the exact value is not representable; results are capped at the largest double
/// below one so the interval stays open. Use [`unit_complement`] and [`ln_unit`] where the
/// distance to one matters.
#[inline]
pub fn to_unit(h: u64) -> f64 {
    ((h as f64 + 0.5) * TWO_POW_NEG_64).min(ONE_MINUS_ULP)
}

/// `1 - to_unit(h)` evaluated without cancellation for hashes close to the top of the range.
#[inline]
pub fn unit_complement(h: u64) -> f64 {
    if h >= 1 << 63 {
        ((!h) as f64 + 0.5) * TWO_POW_NEG_64
    } else {
        1.0 - to_unit(h)
    }
}

/// Natural log of `to_unit(h)`, accurate for hashes near the top of the range.
#[inline]
pub fn ln_unit(h: u64) -> f64 {
    if h >= 1 << 63 {
        (-unit_complement(h)).ln_1p()
    } else {
        to_unit(h).ln()
    }
}
