//! Monte-Carlo comparison of the intersection estimators over a grid of set shapes.
//!
//! A grid point fixes the size ratio `f = |B|/|A|`, the overlap fraction `α = |A∩B|/|A|` and
//! the sketch size `m`. Each trial draws fresh sketches of the two sets and evaluates every
//! requested estimator; trials are aggregated into one row per estimator.
//!
//! Trials are independent: trial `t` of a point seeds its hashes (or its sampler) from a mix
//! of the sweep seed, the point's grid indices and `t`, so the output does not depend on how
//! trials are scheduled across threads.

mod csv;
mod instance;
mod sampled;

pub use self::csv::{format_g9, to_csv_string, write_csv, HEADER};
pub use instance::{generate_instance, hash_instance, HashedPair, Instance};
pub use sampled::{sample_maxima, sample_registers};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::cardinality::maxima_cardinality;
use crate::error::{Error, Result};
use crate::hash::{fmix64, HashFamily};
use crate::intersect::{
    ml_estimate_from_stats, scheme1, scheme2, scheme3, Cardinalities, Initializer, MlConfig,
    MlReport, ProblemParams,
};
use crate::sketch::{indicator_stats, HllSketch, IndicatorStats, MaxSketch};
use crate::theory;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Scheme {
    S1,
    S2,
    S3,
    Ml,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [Scheme::S1, Scheme::S2, Scheme::S3, Scheme::Ml];

    pub fn label(&self) -> &'static str {
        match self {
            Scheme::S1 => "s1",
            Scheme::S2 => "s2",
            Scheme::S3 => "s3",
            Scheme::Ml => "ml",
        }
    }
}

impl std::str::FromStr for Scheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|x| x.label() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown scheme {s:?}")))
    }
}

/// How a trial obtains its sketches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Mode {
    /// Hash every element token.
    #[default]
    Hashed,
    /// Draw the sketches from their exact distribution under ideal hashing; cost independent of
    /// the set sizes.
    Sampled,
}

impl std::str::FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hashed" => Ok(Mode::Hashed),
            "sampled" => Ok(Mode::Sampled),
            other => Err(Error::InvalidConfig(format!("unknown mode {other:?}"))),
        }
    }
}

/// Which sketch feeds `|A|`, `|B|` and `|A ∪ B|` to schemes 1 to 3.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CardinalitySource {
    #[default]
    Maxsketch,
    Hll,
}

impl std::str::FromStr for CardinalitySource {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "maxsketch" => Ok(Self::Maxsketch),
            "hll" => Ok(Self::Hll),
            other => Err(Error::InvalidConfig(format!("unknown cardinality source {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub a: u64,
    pub f_values: Vec<f64>,
    pub alpha_values: Vec<f64>,
    pub m_values: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
    pub schemes: Vec<Scheme>,
    pub ml: MlConfig,
    pub mode: Mode,
    pub cardinality_source: CardinalitySource,
    /// Worker threads; 0 uses the rayon default.
    pub workers: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            a: 10_000,
            f_values: vec![1.0, 5.0, 10.0],
            alpha_values: (1..=19).map(|i| i as f64 / 20.0).collect(),
            m_values: vec![256, 1024],
            trials: 2000,
            seed: 1,
            schemes: Scheme::ALL.to_vec(),
            ml: MlConfig::default(),
            mode: Mode::Hashed,
            cardinality_source: CardinalitySource::Maxsketch,
            workers: 0,
        }
    }
}

impl SweepConfig {
    /// Full-size grid: `a = 10⁶`, 10⁴ trials, α in steps of 0.01.
    pub fn paper_scale() -> Self {
        Self {
            a: 1_000_000,
            alpha_values: (0..=100).map(|i| i as f64 / 100.0).collect(),
            m_values: vec![100, 500, 1000, 10_000],
            trials: 10_000,
            ..Self::default()
        }
    }

    pub fn needs_hll(&self) -> bool {
        self.cardinality_source == CardinalitySource::Hll || self.ml.initializer == Initializer::Hll
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.a < 10 {
            return bad(format!("a must be at least 10, got {}", self.a));
        }
        if self.trials < 2 {
            return bad(format!("need at least 2 trials, got {}", self.trials));
        }
        if self.f_values.is_empty() || self.alpha_values.is_empty() || self.m_values.is_empty() {
            return bad("f, alpha and m lists must be non-empty".into());
        }
        if self.schemes.is_empty() {
            return bad("no schemes selected".into());
        }
        if let Some(f) = self.f_values.iter().find(|f| !(**f > 0.0 && f.is_finite())) {
            return bad(format!("f must be positive, got {f}"));
        }
        if let Some(al) = self.alpha_values.iter().find(|x| !(0.0..=1.0).contains(*x)) {
            return bad(format!("alpha must lie in [0, 1], got {al}"));
        }
        for &m in &self.m_values {
            if m == 0 {
                return Err(Error::UnsupportedSize(0));
            }
            if self.needs_hll() && (m < 4 || !m.is_power_of_two()) {
                return bad(format!("hll sketches need a power-of-two m >= 4, got {m}"));
            }
        }
        self.ml.validate()?;
        for &f in &self.f_values {
            for &al in &self.alpha_values {
                generate_instance(self.a, f, al)?;
            }
        }
        Ok(())
    }

    pub fn grid_points(&self) -> Vec<GridPoint> {
        let mut out = Vec::new();
        for (fi, &f) in self.f_values.iter().enumerate() {
            for (ai, &alpha) in self.alpha_values.iter().enumerate() {
                for (mi, &m) in self.m_values.iter().enumerate() {
                    out.push(GridPoint {
                        index: [fi as u64, ai as u64, mi as u64],
                        f,
                        alpha,
                        m,
                    });
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    /// Positions in the f, alpha and m lists; they enter the trial seeds.
    pub index: [u64; 3],
    pub f: f64,
    pub alpha: f64,
    pub m: usize,
}

/// Seed of one trial at one grid point.
pub fn trial_seed(seed: u64, point: &GridPoint, trial: u64) -> u64 {
    const GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;
    let mut s = fmix64(seed.wrapping_add(GAMMA));
    for x in [point.index[0], point.index[1], point.index[2], trial] {
        s = fmix64(s ^ fmix64(x.wrapping_add(1).wrapping_mul(GAMMA)));
    }
    s
}

/// Everything one trial produced.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub stats: IndicatorStats,
    /// Cardinalities from the max-sketches.
    pub maxsketch: Cardinalities,
    /// Cardinalities from HLL sketches, when built.
    pub hll: Option<Cardinalities>,
    pub ml: Option<MlReport>,
}

impl TrialOutcome {
    pub fn rho(&self) -> f64 {
        self.stats.jaccard()
    }

    pub fn cardinalities(&self, source: CardinalitySource) -> Option<&Cardinalities> {
        match source {
            CardinalitySource::Maxsketch => Some(&self.maxsketch),
            CardinalitySource::Hll => self.hll.as_ref(),
        }
    }

    /// Estimate of `scheme`, with schemes 1 to 3 fed from `source`.
    pub fn estimate(&self, scheme: Scheme, source: CardinalitySource) -> Option<f64> {
        let c = self.cardinalities(source)?;
        let rho = self.rho();
        match scheme {
            Scheme::S1 => Some(scheme1(c.a, c.b, c.union)),
            Scheme::S2 => Some(scheme2(rho, c.union)),
            Scheme::S3 => Some(scheme3(rho, c.a, c.b)),
            Scheme::Ml => self.ml.map(|r| r.n_hat),
        }
    }
}

/// Runs one trial: sketch both sets, then evaluate every estimator.
pub fn run_trial(config: &SweepConfig, point: &GridPoint, trial: u64) -> Result<TrialOutcome> {
    let inst = generate_instance(config.a, point.f, point.alpha)?;
    let seed = trial_seed(config.seed, point, trial);
    let with_hll = config.needs_hll();
    let (xa, xb, hll) = match config.mode {
        Mode::Hashed => {
            let family = HashFamily::new(seed, point.m)?;
            let pair = hash_instance(&inst, &family, trial, with_hll)?;
            let hll = pair.hll.map(|(ha, hb)| Cardinalities::from_hll(&ha, &hb)).transpose()?;
            (unwrap_maxima(&pair.a)?, unwrap_maxima(&pair.b)?, hll)
        }
        Mode::Sampled => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let parts = inst.part_sizes();
            let (xa, xb) = sample_maxima(&mut rng, parts, point.m);
            let hll = if with_hll {
                let (ra, rb) = sample_registers(&mut rng, parts, point.m);
                let ha = HllSketch::from_registers(seed, ra, inst.a)?;
                let hb = HllSketch::from_registers(seed, rb, inst.b)?;
                Some(Cardinalities::from_hll(&ha, &hb)?)
            } else {
                None
            };
            (xa, xb, hll)
        }
    };
    evaluate(config, &xa, &xb, hll)
}

fn unwrap_maxima(s: &MaxSketch) -> Result<Vec<u64>> {
    s.maxima().map(<[u64]>::to_vec).ok_or(Error::EmptySketch)
}

fn evaluate(
    config: &SweepConfig,
    xa: &[u64],
    xb: &[u64],
    hll: Option<Cardinalities>,
) -> Result<TrialOutcome> {
    let family = HashFamily::new(0, xa.len())?;
    let sa = MaxSketch::from_maxima(family.clone(), xa.to_vec(), 0)?;
    let sb = MaxSketch::from_maxima(family, xb.to_vec(), 0)?;
    let stats = indicator_stats(&sa, &sb)?;
    let maxsketch = Cardinalities::from_maxima(xa, xb);
    let ml = if config.schemes.contains(&Scheme::Ml) {
        let init = match config.ml.initializer {
            Initializer::Maxsketch => maxsketch,
            Initializer::Hll => hll.ok_or_else(|| {
                Error::InvalidConfig("hll initializer without hll sketches".into())
            })?,
        };
        Some(ml_estimate_from_stats(&stats, &init, maxima_cardinality(xa), &config.ml)?)
    } else {
        None
    };
    Ok(TrialOutcome {
        stats,
        maxsketch,
        hll,
        ml,
    })
}

/// All trials of one grid point, in trial order.
pub fn simulate_point(config: &SweepConfig, point: &GridPoint) -> Result<Vec<TrialOutcome>> {
    let run = || {
        (0..config.trials as u64)
            .into_par_iter()
            .map(|t| run_trial(config, point, t))
            .collect::<Result<Vec<_>>>()
    };
    with_pool(config.workers, run)
}

fn with_pool<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> T {
    if workers == 0 {
        return f();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
        Ok(pool) => pool.install(f),
        Err(_) => f(),
    }
}

/// One aggregated line of the results table.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub scheme: Scheme,
    pub f: f64,
    pub alpha: f64,
    pub m: usize,
    pub trials: usize,
    pub true_n: u64,
    pub mean_est: f64,
    /// `|mean/n - 1|`; `None` at `n = 0`, as are the other normalized fields.
    pub bias_norm: Option<f64>,
    /// Population variance of `n̂/n`.
    pub var_norm: Option<f64>,
    pub theory_var_norm: Option<f64>,
    pub cr_var_norm: Option<f64>,
    /// `(Var_scheme - Var_ml) / Var_scheme`; `None` on the ml row.
    pub improvement_of_ml: Option<f64>,
    pub fallback_count: usize,
    pub seed: u64,
    /// Population variance of `n̂`.
    pub var_abs: f64,
}

/// Population mean and variance, summed in order.
pub fn mean_var(xs: &[f64]) -> (f64, f64) {
    let t = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / t;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / t;
    (mean, var)
}

/// Aggregates the trials of one grid point into one row per requested scheme.
pub fn summarize(
    config: &SweepConfig,
    point: &GridPoint,
    outcomes: &[TrialOutcome],
) -> Result<Vec<SweepRow>> {
    let inst = generate_instance(config.a, point.f, point.alpha)?;
    let n = inst.n as f64;
    let truth = ProblemParams::new(inst.a as f64, inst.b as f64, n)?;
    let positive = inst.n > 0;
    let theory_of = |s: Scheme| -> Option<f64> {
        if !positive {
            return None;
        }
        match s {
            Scheme::S1 => theory::var_scheme1_norm(&truth, point.m),
            Scheme::S2 => theory::var_scheme2_norm(&truth, point.m),
            Scheme::S3 => theory::var_scheme3_norm(&truth, point.m),
            Scheme::Ml => theory::cr_var_norm(&truth, point.m),
        }
        .ok()
    };
    let cr = if positive {
        theory::cr_var_norm(&truth, point.m).ok()
    } else {
        None
    };

    let mut schemes = config.schemes.clone();
    schemes.sort();
    schemes.dedup();
    let mut rows = Vec::with_capacity(schemes.len());
    for &s in &schemes {
        let xs: Vec<f64> = outcomes
            .iter()
            .map(|o| o.estimate(s, config.cardinality_source))
            .collect::<Option<_>>()
            .ok_or_else(|| Error::InvalidConfig(format!("trials lack {} estimates", s.label())))?;
        let (mean, var) = mean_var(&xs);
        let fallback_count = match s {
            Scheme::Ml => outcomes
                .iter()
                .filter(|o| o.ml.is_some_and(|r| r.fallback.is_some()))
                .count(),
            _ => 0,
        };
        rows.push(SweepRow {
            scheme: s,
            f: point.f,
            alpha: point.alpha,
            m: point.m,
            trials: outcomes.len(),
            true_n: inst.n,
            mean_est: mean,
            bias_norm: positive.then(|| (mean / n - 1.0).abs()),
            var_norm: positive.then(|| var / (n * n)),
            theory_var_norm: theory_of(s),
            cr_var_norm: cr,
            improvement_of_ml: None,
            fallback_count,
            seed: config.seed,
            var_abs: var,
        });
    }
    if let Some(ml_var) = rows.iter().find(|r| r.scheme == Scheme::Ml).map(|r| r.var_abs) {
        for r in rows.iter_mut().filter(|r| r.scheme != Scheme::Ml) {
            if r.var_abs > 0.0 {
                r.improvement_of_ml = Some((r.var_abs - ml_var) / r.var_abs);
            }
        }
    }
    Ok(rows)
}

/// Runs every grid point and returns rows sorted by `(f, alpha, m, scheme)`.
/// `progress` is called with `(points done, total points)`.
pub fn run_sweep(
    config: &SweepConfig,
    progress: Option<&(dyn Fn(usize, usize) + Sync)>,
) -> Result<Vec<SweepRow>> {
    config.validate()?;
    let points = config.grid_points();
    let mut rows = Vec::new();
    for (i, point) in points.iter().enumerate() {
        let outcomes = simulate_point(config, point)?;
        rows.extend(summarize(config, point, &outcomes)?);
        if let Some(p) = progress {
            p(i + 1, points.len());
        }
    }
    rows.sort_by(|x, y| {
        x.f.total_cmp(&y.f)
            .then(x.alpha.total_cmp(&y.alpha))
            .then(x.m.cmp(&y.m))
            .then(x.scheme.cmp(&y.scheme))
    });
    Ok(rows)
}
