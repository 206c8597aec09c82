use std::fmt;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use log::{info, warn};
use serde_json::Value;

use mmdisc::simulate::generate_trial;
use mmdisc::stats::build_moments;
use mmdisc::{
    find_measurement_pattern, purify_pattern, run_replication, score_output, tetrad_test, Dataset,
    GroundTruth, MeasurementPattern, MomentCache, MomentOracle, PatternOptions,
    PureMeasurementModel, RunConfig, SignificanceConfig, StudyConfig, TestKind, Tetrad, TetradKind,
};

use crate::{
    DiscoverArgs, EvaluateArgs, InputArgs, PurifyArgs, ReplicateArgs, SimulateArgs, TestArgs,
    TestTetradArgs,
};

/// A bad request caught by the front end itself.
#[derive(Debug)]
pub struct Invalid(pub String);

impl fmt::Display for Invalid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Invalid {}

fn invalid(msg: impl Into<String>) -> anyhow::Error {
    Invalid(msg.into()).into()
}

/// 1 for bad input, 2 for anything that went wrong while running.
pub fn exit_code(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if cause.is::<Invalid>() {
            return 1;
        }
        if let Some(core) = cause.downcast_ref::<mmdisc::Error>() {
            return if core.is_validation() { 1 } else { 2 };
        }
    }
    2
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| invalid(format!("cannot open {}: {e}", path.display())))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let f = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    serde_json::from_reader(open(path)?)
        .map_err(mmdisc::Error::from)
        .with_context(|| format!("reading {}", path.display()))
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    info!("wrote {}", path.display());
    Ok(())
}

fn significance(t: &TestArgs) -> Result<SignificanceConfig> {
    Ok(SignificanceConfig::new(t.alpha, t.test_kind)?)
}

fn load_dataset(path: &Path) -> Result<Dataset> {
    Dataset::read_csv(open(path)?).with_context(|| format!("reading {}", path.display()))
}

/// Moments from `--data` or from `--cov` plus `--n`. `None` when neither was
/// given.
fn load_moments(
    input: &InputArgs,
    n: Option<usize>,
    kind: TestKind,
) -> Result<Option<MomentCache>> {
    match (&input.data, &input.cov) {
        (Some(path), _) => {
            if n.is_some() {
                warn!("--n is ignored with --data");
            }
            let ds = load_dataset(path)?;
            info!("{} rows, {} variables", ds.n_rows(), ds.n_cols());
            Ok(Some(build_moments(&ds, kind == TestKind::Bollen)?))
        }
        (None, Some(path)) => {
            let n = n.ok_or_else(|| invalid("--cov needs the sample size --n"))?;
            let cache = MomentCache::read_covariance_csv(open(path)?, n)
                .with_context(|| format!("reading {}", path.display()))?;
            Ok(Some(cache))
        }
        (None, None) => Ok(None),
    }
}

pub fn discover(a: &DiscoverArgs) -> Result<()> {
    let cache = load_moments(&a.input, a.n, a.test.test_kind)?
        .ok_or_else(|| invalid("one of --data or --cov is required"))?;
    let mut cfg = significance(&a.test)?;
    cfg.sample_partial_clause = a.partial_clause;
    let oracle = MomentOracle::new(&cache, cfg)?;
    let opts = PatternOptions {
        link_on_uncorrelated: a.link_on_uncorrelated,
    };
    let pattern = find_measurement_pattern(cache.labels(), &oracle, opts)?;
    info!(
        "{} latents, {} impurity edges",
        pattern.latents.len(),
        pattern.impurity_edges.len()
    );
    write_json(&a.out, &pattern)?;
    if let Some(path) = &a.report {
        std::fs::write(path, pattern.report())
            .with_context(|| format!("cannot write {}", path.display()))?;
    }
    Ok(())
}

pub fn purify(a: &PurifyArgs) -> Result<()> {
    let pattern: MeasurementPattern = read_json(&a.pattern)?;
    let cache = load_moments(&a.input, a.n, a.test.test_kind)?;
    let outcome = match &cache {
        Some(cache) => {
            let oracle = MomentOracle::new(cache, significance(&a.test)?)?;
            purify_pattern(&pattern, Some(&oracle), a.min_children)?
        }
        None => purify_pattern(&pattern, None, a.min_children)?,
    };
    if let Some(d) = &outcome.diagnostic {
        warn!("{d}");
    }
    let models = outcome.models();
    for m in &models {
        println!(
            "{} latents, {} indicators",
            m.clusters.len(),
            m.indicator_count()
        );
    }
    write_json(&a.out, &models)
}

fn study_config(
    k: u8,
    m: usize,
    n: usize,
    samples: usize,
    impurities: Option<mmdisc::ImpuritySpec>,
    seed: u64,
) -> Result<StudyConfig> {
    let mut cfg = StudyConfig::study(k, m, n, samples)?;
    if let Some(imp) = impurities {
        if cfg.nonlinear {
            return Err(invalid("--impurities does not apply to study 3"));
        }
        cfg.impurities = imp;
    }
    cfg.seed = seed;
    Ok(cfg)
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

pub fn simulate(a: &SimulateArgs) -> Result<()> {
    let cfg = study_config(a.study, a.m, a.n, a.samples, a.impurities, a.seed)?;
    let (data, truth) = generate_trial(&cfg, 0)?;
    let csv_path = with_suffix(&a.out_prefix, ".csv");
    let mut w = create(&csv_path)?;
    data.write_csv(&mut w)?;
    w.flush()?;
    write_json(&with_suffix(&a.out_prefix, ".truth.json"), &truth)?;
    println!(
        "{} observed, {} latents, {} rows",
        truth.graph.observed.len(),
        truth.graph.latents.len(),
        data.n_rows()
    );
    Ok(())
}

pub fn evaluate(a: &EvaluateArgs) -> Result<()> {
    let est: Value = read_json(&a.est)?;
    let est: PureMeasurementModel = match est {
        Value::Array(items) => {
            let models: Vec<PureMeasurementModel> =
                serde_json::from_value(Value::Array(items)).map_err(mmdisc::Error::from)?;
            // largest model, first one on ties
            models
                .into_iter()
                .rev()
                .max_by_key(|m| m.indicator_count())
                .ok_or_else(|| invalid(format!("{} holds no models", a.est.display())))?
        }
        other => serde_json::from_value(other).map_err(mmdisc::Error::from)?,
    };
    let truth: GroundTruth = read_json(&a.truth)?;
    let report = score_output(&est, &truth)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    write_json(&a.out, &report)
}

pub fn replicate(a: &ReplicateArgs) -> Result<()> {
    let mut study = study_config(a.study, a.m, a.n, a.samples, a.impurities, a.seed)?;
    study.trials = a.trials;
    let run = RunConfig {
        alpha: a.test.alpha,
        test_kind: a.test.test_kind,
        population_mode: a.population,
        link_on_uncorrelated: a.link_on_uncorrelated,
        sample_partial_clause: a.partial_clause,
        min_children: a.min_children,
    };
    let table = run_replication(&study, &run)?;
    print!("{}", table.to_text());
    if let Some(path) = &a.out {
        write_json(path, &table)?;
    }
    Ok(())
}

fn describe([a, b, c, d]: [&str; 4], kind: TetradKind) -> String {
    let s = |x: &str, y: &str| format!("s({x},{y})");
    let (l, r) = match kind {
        TetradKind::AbCdAcBd => ((a, b, c, d), (a, c, b, d)),
        TetradKind::AcBdAdBc => ((a, c, b, d), (a, d, b, c)),
        TetradKind::AbCdAdBc => ((a, b, c, d), (a, d, b, c)),
    };
    format!(
        "{}{} = {}{}",
        s(l.0, l.1),
        s(l.2, l.3),
        s(r.0, r.1),
        s(r.2, r.3)
    )
}

pub fn test_tetrad(a: &TestTetradArgs) -> Result<()> {
    if a.vars.len() != 4 {
        return Err(invalid(format!(
            "--vars needs four labels, got {}",
            a.vars.len()
        )));
    }
    let ds = load_dataset(&a.data)?;
    let cache = build_moments(&ds, a.test.test_kind == TestKind::Bollen)?;
    let cfg = significance(&a.test)?;
    let labels: [&str; 4] = [&a.vars[0], &a.vars[1], &a.vars[2], &a.vars[3]];
    for kind in [
        TetradKind::AbCdAcBd,
        TetradKind::AcBdAdBc,
        TetradKind::AbCdAdBc,
    ] {
        let t = Tetrad::from_labels(&cache, labels, kind)?;
        let out = tetrad_test(&cache, &t, &cfg)?;
        println!(
            "{:<40} estimate {:>10.6}  z {:>8.3}  p {:.4}  {}",
            describe(labels, kind),
            out.estimate,
            out.statistic,
            out.p_value,
            if out.decision.holds() {
                "vanishes"
            } else {
                "does not vanish"
            }
        );
    }
    Ok(())
}
