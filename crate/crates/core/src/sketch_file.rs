//! Versioned JSON encoding of sketches.
//!
//! ```json
//! {"format":"maxsketch-v1","base_seed":"42","m":2,"maxima":["0x00000000000000ff","0x..."],
//!  "count_observed":10,"empty":false}
//! {"format":"hll-v1","base_seed":"42","m":4,"registers":[0,3,1,2],"count_observed":10}
//! ```
//!
//! Seeds are decimal strings and maxima are hex strings so 64-bit values survive JSON readers
//! that parse numbers as doubles. An empty max-sketch carries `"empty": true` and no maxima.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hash::HashFamily;
use crate::sketch::{HllSketch, MaxSketch};

pub const MAXSKETCH_FORMAT: &str = "maxsketch-v1";
pub const HLL_FORMAT: &str = "hll-v1";

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SketchDoc {
    Max(MaxSketch),
    Hll(HllSketch),
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDoc {
    format: String,
    base_seed: String,
    m: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    maxima: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    registers: Option<Vec<u8>>,
    count_observed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    empty: Option<bool>,
}

impl SketchDoc {
    pub fn kind(&self) -> &'static str {
        match self {
            SketchDoc::Max(_) => MAXSKETCH_FORMAT,
            SketchDoc::Hll(_) => HLL_FORMAT,
        }
    }

    pub fn base_seed(&self) -> u64 {
        match self {
            SketchDoc::Max(s) => s.family().base_seed(),
            SketchDoc::Hll(s) => s.base_seed(),
        }
    }

    pub fn m(&self) -> usize {
        match self {
            SketchDoc::Max(s) => s.m(),
            SketchDoc::Hll(s) => s.m(),
        }
    }

    pub fn to_json(&self) -> String {
        let raw = match self {
            SketchDoc::Max(s) => RawDoc {
                format: MAXSKETCH_FORMAT.into(),
                base_seed: s.family().base_seed().to_string(),
                m: s.m(),
                maxima: Some(
                    s.maxima()
                        .unwrap_or(&[])
                        .iter()
                        .map(|x| format!("{x:#018x}"))
                        .collect(),
                ),
                registers: None,
                count_observed: s.count_observed(),
                empty: Some(s.is_empty()),
            },
            SketchDoc::Hll(s) => RawDoc {
                format: HLL_FORMAT.into(),
                base_seed: s.base_seed().to_string(),
                m: s.m(),
                maxima: None,
                registers: Some(s.registers().to_vec()),
                count_observed: s.count_observed(),
                empty: None,
            },
        };
        serde_json::to_string(&raw).expect("sketch documents always serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: RawDoc = serde_json::from_str(text)?;
        let seed: u64 = raw
            .base_seed
            .parse()
            .map_err(|_| Error::Format(format!("base_seed {:?} is not a u64", raw.base_seed)))?;
        match raw.format.as_str() {
            MAXSKETCH_FORMAT => {
                if raw.registers.is_some() {
                    return Err(Error::Format("max-sketch carries registers".into()));
                }
                let family = HashFamily::new(seed, raw.m)?;
                let maxima = raw.maxima.unwrap_or_default();
                let empty = raw.empty.unwrap_or(maxima.is_empty());
                if empty {
                    if !maxima.is_empty() {
                        return Err(Error::Format("empty max-sketch lists maxima".into()));
                    }
                    return Ok(SketchDoc::Max(MaxSketch::new(family)));
                }
                let maxima = maxima
                    .iter()
                    .map(|h| parse_hex(h))
                    .collect::<Result<Vec<_>>>()?;
                Ok(SketchDoc::Max(MaxSketch::from_maxima(
                    family,
                    maxima,
                    raw.count_observed,
                )?))
            }
            HLL_FORMAT => {
                if raw.maxima.is_some() || raw.empty.is_some() {
                    return Err(Error::Format("hll sketch carries max-sketch fields".into()));
                }
                let registers = raw
                    .registers
                    .ok_or_else(|| Error::Format("hll sketch without registers".into()))?;
                if registers.len() != raw.m {
                    return Err(Error::Format(format!(
                        "m = {} but {} registers",
                        raw.m,
                        registers.len()
                    )));
                }
                Ok(SketchDoc::Hll(HllSketch::from_registers(
                    seed,
                    registers,
                    raw.count_observed,
                )?))
            }
            other => Err(Error::Format(format!("unknown format tag {other:?}"))),
        }
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut text = self.to_json();
        text.push('\n');
        fs::write(path, text)?;
        Ok(())
    }
}

fn parse_hex(s: &str) -> Result<u64> {
    let digits = s
        .strip_prefix("0x")
        .or_else(|| s.strip_prefix("0X"))
        .ok_or_else(|| Error::Format(format!("maximum {s:?} lacks the 0x prefix")))?;
    u64::from_str_radix(digits, 16).map_err(|_| Error::Format(format!("bad hex maximum {s:?}")))
}
