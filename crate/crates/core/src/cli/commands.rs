use std::fmt::Write as _;
use std::fs::File;
use std::io::{self, BufRead, BufReader};
use std::path::{Path, PathBuf};

use serde_json::json;

use intersketch::intersect::{ml_estimate_with, Cardinalities, MlConfig};
use intersketch::simlab::{self, format_g9, CardinalitySource, Mode, Scheme, SweepConfig};
use intersketch::{
    hll_estimate, jaccard_estimate, maxsketch_cardinality, scheme1, scheme2, scheme3, theory,
    Error, HllSketch, Initializer, MaxSketch, ProblemParams, SketchDoc,
};

use super::{
    Cli, Command, EstimateArgs, InitArg, Kind, MergeArgs, ModeArg, SchemeArg, SimulateArgs,
    SketchArgs, SourceArg, SweepScheme, TheoryArgs,
};

/// A failed command: message for standard error and the process exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

const EXIT_VALIDATION: i32 = 2;
const EXIT_INCOMPATIBLE: i32 = 3;
const EXIT_IO: i32 = 4;

impl Failure {
    fn validation(message: impl Into<String>) -> Self {
        Self { code: EXIT_VALIDATION, message: message.into() }
    }

    fn incompatible(message: impl Into<String>) -> Self {
        Self { code: EXIT_INCOMPATIBLE, message: message.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::IncompatibleSketches(_) => EXIT_INCOMPATIBLE,
            Error::Io(_) | Error::Json(_) | Error::Format(_) => EXIT_IO,
            _ => EXIT_VALIDATION,
        };
        Self { code, message: e.to_string() }
    }
}

fn at_path(path: &Path) -> impl FnOnce(Error) -> Failure + '_ {
    move |e| {
        let mut f = Failure::from(e);
        f.message = format!("{}: {}", path.display(), f.message);
        f
    }
}

pub fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Sketch(a) => sketch(a),
        Command::Merge(a) => merge(a),
        Command::Estimate(a) => estimate(a),
        Command::Theory(a) => theory_cmd(a),
        Command::Simulate(a) => simulate(a),
    }
}

fn read_tokens(input: Option<&Path>) -> Result<Box<dyn BufRead>, Failure> {
    match input {
        None => Ok(Box::new(BufReader::new(io::stdin()))),
        Some(p) if p == Path::new("-") => Ok(Box::new(BufReader::new(io::stdin()))),
        Some(p) => File::open(p)
            .map(|f| Box::new(BufReader::new(f)) as Box<dyn BufRead>)
            .map_err(|e| at_path(p)(e.into())),
    }
}

fn sketch(args: SketchArgs) -> Result<(), Failure> {
    let input_name = args.input.clone().unwrap_or_else(|| PathBuf::from("-"));
    let mut doc = match args.kind {
        Kind::Max => SketchDoc::Max(MaxSketch::with_seed(args.seed, args.m)?),
        Kind::Hll => SketchDoc::Hll(HllSketch::new(args.seed, args.m).map_err(|_| {
            Failure::validation(format!(
                "hll sketches need a power-of-two m >= 4, got {}",
                args.m
            ))
        })?),
    };
    let reader = read_tokens(args.input.as_deref())?;
    for line in reader.lines() {
        let line = line.map_err(|e| at_path(&input_name)(e.into()))?;
        let token = line.strip_suffix('\r').unwrap_or(&line);
        if token.is_empty() {
            continue;
        }
        match &mut doc {
            SketchDoc::Max(s) => s.update(token.as_bytes()),
            SketchDoc::Hll(s) => s.update(token.as_bytes()),
        }
    }
    doc.write(&args.out).map_err(at_path(&args.out))?;
    println!("estimate {}", format_g9(cardinality_of(&doc)));
    Ok(())
}

fn cardinality_of(doc: &SketchDoc) -> f64 {
    match doc {
        SketchDoc::Max(s) => maxsketch_cardinality(s).map(|e| e.value).unwrap_or(0.0),
        SketchDoc::Hll(s) => hll_estimate(s).value,
    }
}

fn read_doc(path: &Path) -> Result<SketchDoc, Failure> {
    SketchDoc::read(path).map_err(at_path(path))
}

fn check_pair(pa: &Path, da: &SketchDoc, pb: &Path, db: &SketchDoc) -> Result<(), Failure> {
    if da.kind() != db.kind() || da.base_seed() != db.base_seed() || da.m() != db.m() {
        return Err(Failure::incompatible(format!(
            "{} ({}, seed {}, m {}) and {} ({}, seed {}, m {}) are not compatible",
            pa.display(),
            da.kind(),
            da.base_seed(),
            da.m(),
            pb.display(),
            db.kind(),
            db.base_seed(),
            db.m()
        )));
    }
    Ok(())
}

fn merge(args: MergeArgs) -> Result<(), Failure> {
    let first = &args.inputs[0];
    let mut acc = read_doc(first)?;
    for p in &args.inputs[1..] {
        let next = read_doc(p)?;
        check_pair(first, &acc, p, &next)?;
        acc = match (acc, next) {
            (SketchDoc::Max(x), SketchDoc::Max(y)) => SketchDoc::Max(x.merge(&y)?),
            (SketchDoc::Hll(x), SketchDoc::Hll(y)) => SketchDoc::Hll(x.merge(&y)?),
            _ => unreachable!("kinds checked above"),
        };
    }
    acc.write(&args.out).map_err(at_path(&args.out))?;
    println!("estimate {}", format_g9(cardinality_of(&acc)));
    Ok(())
}

fn read_hll_pair(args: &EstimateArgs) -> Result<Option<(HllSketch, HllSketch)>, Failure> {
    match (&args.hll_a, &args.hll_b) {
        (None, None) => Ok(None),
        (Some(pa), Some(pb)) => {
            let (da, db) = (read_doc(pa)?, read_doc(pb)?);
            check_pair(pa, &da, pb, &db)?;
            match (da, db) {
                (SketchDoc::Hll(x), SketchDoc::Hll(y)) => Ok(Some((x, y))),
                _ => Err(Failure::validation("--hll-a and --hll-b must be hll sketches")),
            }
        }
        _ => Err(Failure::validation("--hll-a and --hll-b must be given together")),
    }
}

fn estimate(args: EstimateArgs) -> Result<(), Failure> {
    let (da, db) = (read_doc(&args.a)?, read_doc(&args.b)?);
    check_pair(&args.a, &da, &args.b, &db)?;
    let hll_pair = read_hll_pair(&args)?;

    let (max_pair, hll_pair) = match (da, db) {
        (SketchDoc::Max(x), SketchDoc::Max(y)) => (Some((x, y)), hll_pair),
        (SketchDoc::Hll(x), SketchDoc::Hll(y)) => {
            if hll_pair.is_some() {
                return Err(Failure::validation(
                    "--hll-a/--hll-b only accompany max-sketch inputs",
                ));
            }
            (None, Some((x, y)))
        }
        _ => unreachable!("kinds checked above"),
    };

    let max_cards = match &max_pair {
        Some((x, y)) => Some(Cardinalities::from_maxsketches(x, y)?),
        None => None,
    };
    let hll_cards = match &hll_pair {
        Some((x, y)) => Some(Cardinalities::from_hll(x, y)?),
        None => None,
    };
    let (source, cards) = match (hll_cards, max_cards) {
        (Some(c), _) => ("hll", c),
        (None, Some(c)) => ("maxsketch", c),
        (None, None) => unreachable!("one pair is always present"),
    };
    let rho = match &max_pair {
        Some((x, y)) => Some(jaccard_estimate(x, y)?),
        None => None,
    };

    let wanted: Vec<Scheme> = match args.scheme {
        SchemeArg::S1 => vec![Scheme::S1],
        SchemeArg::S2 => vec![Scheme::S2],
        SchemeArg::S3 => vec![Scheme::S3],
        SchemeArg::Ml => vec![Scheme::Ml],
        SchemeArg::All if rho.is_none() => {
            eprintln!("note: hll inputs carry no Jaccard estimate; reporting s1 only");
            vec![Scheme::S1]
        }
        SchemeArg::All => Scheme::ALL.to_vec(),
    };

    let mut estimates = Vec::new();
    let mut ml_report = None;
    for s in wanted {
        let value = match (s, rho) {
            (Scheme::S1, _) => scheme1(cards.a, cards.b, cards.union),
            (Scheme::S2, Some(r)) => scheme2(r, cards.union),
            (Scheme::S3, Some(r)) => scheme3(r, cards.a, cards.b),
            (Scheme::Ml, Some(_)) => {
                let (sa, sb) = max_pair.as_ref().expect("rho implies max-sketches");
                let cfg = MlConfig {
                    max_iterations: args.max_iterations,
                    initializer: match args.init {
                        InitArg::Maxsketch => Initializer::Maxsketch,
                        InitArg::Hll => Initializer::Hll,
                    },
                    ..MlConfig::default()
                };
                let init = match cfg.initializer {
                    Initializer::Maxsketch => max_cards.expect("max-sketches present"),
                    Initializer::Hll => hll_cards.ok_or_else(|| {
                        Failure::validation("--init hll needs --hll-a and --hll-b")
                    })?,
                };
                let r = ml_estimate_with(sa, sb, &init, &cfg)?;
                ml_report = Some(r);
                r.n_hat
            }
            (s, None) => {
                return Err(Failure::validation(format!(
                    "scheme {} needs max-sketch inputs",
                    s.label()
                )))
            }
        };
        estimates.push((s, value));
    }

    if args.json {
        let mut est = serde_json::Map::new();
        for (s, v) in &estimates {
            est.insert(s.label().into(), json!(v));
        }
        let out = json!({
            "a": args.a.display().to_string(),
            "b": args.b.display().to_string(),
            "cardinality_source": source,
            "rho_hat": rho,
            "a_hat": cards.a,
            "b_hat": cards.b,
            "u_hat": cards.union,
            "estimates": est,
            "ml": ml_report.map(|r| json!({
                "n_hat": r.n_hat,
                "a_hat": r.a_hat,
                "b_hat": r.b_hat,
                "iterations": r.iterations,
                "converged": r.converged,
                "fallback": r.fallback.map(|f| f.label()),
                "log_likelihood": r.log_likelihood,
                "initial": r.initial,
            })),
        });
        println!("{}", serde_json::to_string_pretty(&out).expect("json values serialize"));
        return Ok(());
    }

    let mut lines: Vec<(String, String)> = vec![
        ("cardinality_source".into(), source.into()),
        ("rho_hat".into(), rho.map(format_g9).unwrap_or_else(|| "-".into())),
        ("a_hat".into(), format_g9(cards.a)),
        ("b_hat".into(), format_g9(cards.b)),
        ("u_hat".into(), format_g9(cards.union)),
    ];
    for (s, v) in &estimates {
        lines.push((format!("n_hat[{}]", s.label()), format_g9(*v)));
    }
    if let Some(r) = ml_report {
        lines.push(("ml_iterations".into(), r.iterations.to_string()));
        lines.push(("ml_converged".into(), r.converged.to_string()));
        lines.push((
            "ml_fallback".into(),
            r.fallback.map_or("none", |f| f.label()).into(),
        ));
        lines.push(("ml_log_likelihood".into(), format_g9(r.log_likelihood)));
    }
    print!("{}", aligned(&lines));
    Ok(())
}

fn aligned(lines: &[(String, String)]) -> String {
    let width = lines.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
    let mut out = String::new();
    for (k, v) in lines {
        writeln!(out, "{k:<width$}  {v}").expect("writing to a String");
    }
    out
}

fn theory_cmd(args: TheoryArgs) -> Result<(), Failure> {
    let p = ProblemParams::new(args.a, args.b, args.n)?;
    if args.n <= 0.0 {
        return Err(Failure::validation("n must be positive; the normalized variances divide by n"));
    }
    if args.m == 0 {
        return Err(Failure::validation("m must be positive"));
    }
    let r = theory::TheoryReport::new(&p, args.m)?;
    if args.csv {
        print!("{}", theory_csv(&args, &r));
        return Ok(());
    }
    let mut lines: Vec<(String, String)> = vec![
        ("a".into(), format_g9(p.a())),
        ("b".into(), format_g9(p.b())),
        ("n".into(), format_g9(p.n())),
        ("u".into(), format_g9(p.union())),
        ("m".into(), args.m.to_string()),
    ];
    match r.fisher {
        Some(f) => {
            for (i, row) in f.iter().enumerate() {
                let cells: Vec<String> = row.iter().map(|&x| format_g9(x)).collect();
                lines.push((format!("fisher[{}]", i + 1), cells.join(" ")));
            }
        }
        None => lines.push(("fisher".into(), "singular (a = n or b = n)".into())),
    }
    for (k, v) in [
        ("cr_var_n", r.cr_var_n),
        ("cr_var_norm", r.cr_var_norm),
        ("var_scheme1_norm", r.var_scheme1_norm),
        ("var_scheme2_norm", r.var_scheme2_norm),
        ("var_scheme3_norm", r.var_scheme3_norm),
        ("cov_ab", r.cov_ab),
        ("cov_au", r.cov_au),
        ("cov_bu", r.cov_bu),
        ("cov_an", r.cov_an),
        ("z_value", r.z_value),
    ] {
        lines.push((k.into(), format_g9(v)));
    }
    print!("{}", aligned(&lines));
    Ok(())
}

/// One row per scheme in the results-table schema; the Monte-Carlo columns stay empty and the
/// improvement column compares predicted variances.
fn theory_csv(args: &TheoryArgs, r: &theory::TheoryReport) -> String {
    let mut out = String::from(simlab::HEADER);
    out.push('\n');
    let f = format_g9(args.b / args.a);
    let alpha = format_g9(args.n / args.a);
    for (s, v) in [
        (Scheme::S1, r.var_scheme1_norm),
        (Scheme::S2, r.var_scheme2_norm),
        (Scheme::S3, r.var_scheme3_norm),
        (Scheme::Ml, r.cr_var_norm),
    ] {
        let improvement = match s {
            Scheme::Ml => String::new(),
            _ => format_g9((v - r.cr_var_norm) / v),
        };
        let fields = [
            s.label().to_string(),
            f.clone(),
            alpha.clone(),
            args.m.to_string(),
            String::new(),
            format_g9(args.n),
            String::new(),
            String::new(),
            String::new(),
            format_g9(v),
            format_g9(r.cr_var_norm),
            improvement,
            String::new(),
            String::new(),
        ];
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

fn simulate(args: SimulateArgs) -> Result<(), Failure> {
    let mut cfg = if args.paper_scale {
        SweepConfig::paper_scale()
    } else {
        SweepConfig::default()
    };
    if let Some(a) = args.a {
        cfg.a = a;
    }
    if !args.f.is_empty() {
        cfg.f_values = args.f.clone();
    }
    if !args.alpha.is_empty() {
        cfg.alpha_values = args.alpha.clone();
    }
    if let Some(step) = args.alpha_step {
        if !(step > 0.0 && step <= 1.0) {
            return Err(Failure::validation("--alpha-step must be in (0, 1]"));
        }
        let k = (1.0 / step).round() as usize;
        cfg.alpha_values = (0..=k).map(|i| (i as f64 * step).min(1.0)).collect();
    }
    if !args.m.is_empty() {
        cfg.m_values = args.m.clone();
    }
    if let Some(t) = args.trials {
        cfg.trials = t;
    }
    if !args.schemes.is_empty() {
        cfg.schemes = args
            .schemes
            .iter()
            .map(|s| match s {
                SweepScheme::S1 => Scheme::S1,
                SweepScheme::S2 => Scheme::S2,
                SweepScheme::S3 => Scheme::S3,
                SweepScheme::Ml => Scheme::Ml,
            })
            .collect();
    }
    cfg.seed = args.seed;
    cfg.workers = args.workers;
    cfg.mode = match args.mode {
        ModeArg::Hashed => Mode::Hashed,
        ModeArg::Sampled => Mode::Sampled,
    };
    cfg.cardinality_source = match args.cardinality_source {
        SourceArg::Maxsketch => CardinalitySource::Maxsketch,
        SourceArg::Hll => CardinalitySource::Hll,
    };
    cfg.ml = MlConfig {
        max_iterations: args.max_iterations,
        initializer: match args.init {
            InitArg::Maxsketch => Initializer::Maxsketch,
            InitArg::Hll => Initializer::Hll,
        },
        ..MlConfig::default()
    };
    cfg.validate()?;

    if args.paper_scale {
        eprintln!(
            "warning: paper-scale sweep, roughly {} of hashing on {} thread(s)",
            rough_duration(&cfg),
            threads(&cfg)
        );
    }
    let progress = |done: usize, total: usize| {
        eprintln!("simulate: grid point {done}/{total}");
    };
    let rows = simlab::run_sweep(&cfg, Some(&progress))?;
    simlab::write_csv(&rows, &args.out).map_err(at_path(&args.out))?;
    eprintln!("simulate: wrote {} rows to {}", rows.len(), args.out.display());
    Ok(())
}

fn threads(cfg: &SweepConfig) -> usize {
    if cfg.workers > 0 {
        cfg.workers
    } else {
        rayon::current_num_threads()
    }
}

/// About 1.2 ns per keyed hash on one core, one keyed hash per element and slot.
fn rough_duration(cfg: &SweepConfig) -> String {
    let mut ops = 0.0;
    for &f in &cfg.f_values {
        for &al in &cfg.alpha_values {
            if let Ok(inst) = simlab::generate_instance(cfg.a, f, al) {
                let union = (inst.a + inst.b - inst.n) as f64;
                let m_sum: usize = cfg.m_values.iter().sum();
                ops += union * m_sum as f64 * cfg.trials as f64;
            }
        }
    }
    let secs = match cfg.mode {
        Mode::Hashed => ops * 1.2e-9,
        Mode::Sampled => 0.0,
    } / threads(cfg) as f64;
    if secs >= 3600.0 {
        format!("{:.1} hours", secs / 3600.0)
    } else {
        format!("{:.0} seconds", secs)
    }
}
