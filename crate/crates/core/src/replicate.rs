//! Simulation studies: generate, discover, purify and score over many trials.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constraints::MomentOracle;
use crate::error::{Error, Result};
use crate::evaluate::{score_output, EvaluationReport};
use crate::graph::{PureMeasurementModel, DEFAULT_MIN_CHILDREN};
use crate::pattern::{find_measurement_pattern, PatternOptions};
use crate::purify::purify_pattern;
use crate::simulate::{generate_trial, population_moments, StudyConfig};
use crate::stats::{build_moments, SignificanceConfig, TestKind, DEFAULT_ALPHA};

/// Largest share of trials allowed to abort before the run fails.
pub const MAX_ABORTED_SHARE: f64 = 0.2;

/// Discovery and purification settings for a replication run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub alpha: f64,
    pub test_kind: TestKind,
    /// Decide constraints on the exact population covariance instead of the
    /// sample (linear studies only).
    pub population_mode: bool,
    pub link_on_uncorrelated: bool,
    /// Test the partial-correlation clause of `Unclustered` on samples.
    #[serde(default)]
    pub sample_partial_clause: bool,
    pub min_children: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            alpha: DEFAULT_ALPHA,
            test_kind: TestKind::Wishart,
            population_mode: false,
            link_on_uncorrelated: true,
            sample_partial_clause: false,
            min_children: DEFAULT_MIN_CHILDREN,
        }
    }
}

impl RunConfig {
    pub fn significance(&self) -> Result<SignificanceConfig> {
        if self.population_mode {
            return Ok(SignificanceConfig::population());
        }
        let mut cfg = SignificanceConfig::new(self.alpha, self.test_kind)?;
        cfg.sample_partial_clause = self.sample_partial_clause;
        Ok(cfg)
    }

    pub fn pattern_options(&self) -> PatternOptions {
        PatternOptions {
            link_on_uncorrelated: self.link_on_uncorrelated,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub trial: usize,
    pub estimate: PureMeasurementModel,
    /// Number of purifications returned before picking the largest.
    pub solutions: usize,
    pub report: EvaluationReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub metric: String,
    pub mean: f64,
    pub sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyTable {
    pub study: StudyConfig,
    pub run: RunConfig,
    pub rows: Vec<MetricSummary>,
    pub trials: Vec<TrialResult>,
    /// Trial index and error message of every aborted trial.
    pub aborted: Vec<(usize, String)>,
    pub ties: usize,
}

impl StudyTable {
    pub fn metric(&self, name: &str) -> Option<&MetricSummary> {
        self.rows.iter().find(|r| r.metric == name)
    }

    /// Aligned text table, one metric per row.
    pub fn to_text(&self) -> String {
        let s = &self.study;
        let mut out = String::new();
        let kind = if s.nonlinear {
            "nonlinear diamond".to_string()
        } else if s.impurities.is_pure() {
            format!("{} indicators, pure", s.n)
        } else {
            format!("{} indicators + impurities ({})", s.n, s.impurities)
        };
        let _ = writeln!(
            out,
            "{kind}; {} latents, N = {}, {} trials",
            s.m, s.samples, s.trials
        );
        let _ = writeln!(out, "{:<22} {:>14}", "", "mean ± sd");
        for r in &self.rows {
            let _ = writeln!(out, "{:<22} {:>6.2} ± {:<5.2}", r.metric, r.mean, r.sd);
        }
        if !self.aborted.is_empty() {
            let _ = writeln!(out, "aborted trials: {}", self.aborted.len());
            for (t, e) in &self.aborted {
                let _ = writeln!(out, "  trial {t}: {e}");
            }
        }
        if self.ties > 0 {
            let _ = writeln!(out, "latent matching ties: {}", self.ties);
        }
        out
    }
}

/// Runs one trial end to end.
pub fn run_trial(study: &StudyConfig, run: &RunConfig, trial: usize) -> Result<TrialResult> {
    let (data, truth) = generate_trial(study, trial)?;
    let sig = run.significance()?;
    let cache = if run.population_mode {
        if study.nonlinear {
            return Err(Error::InvalidInput(
                "population mode needs a linear study".into(),
            ));
        }
        population_moments(&truth, study.samples)?.standardized()
    } else {
        build_moments(&data, run.test_kind == TestKind::Bollen)?
    };
    let oracle = MomentOracle::new(&cache, sig)?;
    let pattern = find_measurement_pattern(cache.labels(), &oracle, run.pattern_options())?;
    let outcome = purify_pattern(&pattern, Some(&oracle), run.min_children)?;
    let estimate = outcome
        .largest()
        .map(|p| p.model.clone())
        .unwrap_or_default();
    let report = score_output(&estimate, &truth)?;
    Ok(TrialResult {
        trial,
        estimate,
        solutions: outcome.solutions.len(),
        report,
    })
}

fn summarize(name: &str, values: &[f64]) -> MetricSummary {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sd = if values.len() > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    MetricSummary {
        metric: name.to_string(),
        mean,
        sd,
    }
}

/// Runs every trial of `study` in parallel and summarizes the scores as mean
/// and sample standard deviation. Fails when more than a fifth of the trials
/// abort.
pub fn run_replication(study: &StudyConfig, run: &RunConfig) -> Result<StudyTable> {
    study.validate()?;
    run.significance()?;
    if run.min_children < 2 {
        return Err(Error::InvalidInput(
            "min_children must be at least 2".into(),
        ));
    }
    let results: Vec<Result<TrialResult>> = (0..study.trials)
        .into_par_iter()
        .map(|t| run_trial(study, run, t))
        .collect();
    let mut trials = Vec::new();
    let mut aborted = Vec::new();
    for (t, r) in results.into_iter().enumerate() {
        match r {
            Ok(res) => trials.push(res),
            Err(e) => {
                log::warn!("trial {t} aborted: {e}");
                aborted.push((t, e.to_string()));
            }
        }
    }
    if aborted.len() as f64 > MAX_ABORTED_SHARE * study.trials as f64 {
        return Err(Error::Replication(format!(
            "{} of {} trials aborted; first: {}",
            aborted.len(),
            study.trials,
            aborted[0].1
        )));
    }
    let column = |f: fn(&EvaluationReport) -> f64| -> Vec<f64> {
        trials.iter().map(|t| f(&t.report)).collect()
    };
    let mut rows = vec![
        summarize("missing latents", &column(|r| r.missing_latents)),
        summarize("missing indicators", &column(|r| r.missing_indicators)),
        summarize("misplaced indicators", &column(|r| r.misplaced_indicators)),
    ];
    if !study.impurities.is_pure() || study.nonlinear {
        rows.push(summarize("impurities", &column(|r| r.impurities)));
    }
    let ties = trials.iter().map(|t| t.report.ties).sum();
    Ok(StudyTable {
        study: study.clone(),
        run: *run,
        rows,
        trials,
        aborted,
        ties,
    })
}
