//! Estimating the size of a set intersection from two fixed-size sketches.
//!
//! Each set is summarized by a [`MaxSketch`] holding the maximal hash value under each of `m`
//! hash functions, optionally alongside a [`HllSketch`]. From a pair of sketches the crate
//! offers three plug-in estimators (inclusion-exclusion, Jaccard times union, Jaccard
//! substitution) and a maximum-likelihood estimator solved by Newton iterations, together with
//! closed-form variance predictions and a Monte-Carlo harness to compare them.

pub mod cardinality;
pub mod error;
pub mod hash;
pub mod intersect;
pub mod simlab;
pub mod sketch;
pub mod sketch_file;
pub mod theory;

pub use cardinality::{alpha_m, hll_estimate, maxsketch_cardinality, CardinalityEstimate, Method};
pub use error::{Error, Result};
pub use hash::{to_unit, HashFamily};
pub use intersect::{
    jaccard_estimate, ml_estimate, scheme1, scheme2, scheme3, Initializer, MlConfig, MlReport,
    ProblemParams,
};
pub use sketch::{indicator_stats, HllSketch, IndicatorStats, MaxSketch, SlotClass};
pub use sketch_file::SketchDoc;
