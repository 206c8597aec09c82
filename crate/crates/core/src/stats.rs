//! Sample moments, correlations and vanishing-correlation tests.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::sync::OnceLock;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Threshold used in population mode: a correlation or tetrad difference
/// whose magnitude does not exceed this is treated as exactly zero.
pub const POPULATION_TOLERANCE: f64 = 1e-9;

pub const DEFAULT_ALPHA: f64 = 0.05;

/// An `N x n` table of observations with column labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub labels: Vec<String>,
    /// One row per observation.
    pub data: DMatrix<f64>,
}

impl Dataset {
    pub fn new(labels: Vec<String>, data: DMatrix<f64>) -> Result<Self> {
        if labels.len() != data.ncols() {
            return Err(Error::InvalidInput(format!(
                "{} labels for {} columns",
                labels.len(),
                data.ncols()
            )));
        }
        Ok(Self { labels, data })
    }

    pub fn n_rows(&self) -> usize {
        self.data.nrows()
    }

    pub fn n_cols(&self) -> usize {
        self.data.ncols()
    }

    /// Reads a headered CSV of reals.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(reader);
        let labels: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        let mut values = Vec::new();
        let mut rows = 0;
        for record in rdr.records() {
            let record = record?;
            if record.len() != labels.len() {
                return Err(Error::InvalidInput(format!(
                    "row {} has {} fields, expected {}",
                    rows + 1,
                    record.len(),
                    labels.len()
                )));
            }
            for (field, label) in record.iter().zip(&labels) {
                let v: f64 = field.parse().map_err(|_| {
                    Error::InvalidInput(format!(
                        "non-numeric or missing value `{field}` in column `{label}`"
                    ))
                })?;
                if !v.is_finite() {
                    return Err(Error::InvalidInput(format!(
                        "non-finite value in column `{label}`"
                    )));
                }
                values.push(v);
            }
            rows += 1;
        }
        let data = DMatrix::from_row_slice(rows, labels.len(), &values);
        Self::new(labels, data)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(&self.labels)?;
        for r in 0..self.n_rows() {
            w.write_record(self.data.row(r).iter().map(|v| format!("{v:?}")))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Unbiased (denominator `N - 1`) sample covariance, accumulated in a single
/// pass with running means.
pub fn sample_covariance(data: &DMatrix<f64>) -> DMatrix<f64> {
    let (n_rows, n_cols) = data.shape();
    let mut mean = vec![0.0; n_cols];
    let mut comoment = DMatrix::<f64>::zeros(n_cols, n_cols);
    let mut delta = vec![0.0; n_cols];
    for r in 0..n_rows {
        let k = (r + 1) as f64;
        for c in 0..n_cols {
            delta[c] = data[(r, c)] - mean[c];
            mean[c] += delta[c] / k;
        }
        for i in 0..n_cols {
            let after_i = data[(r, i)] - mean[i];
            for j in 0..=i {
                comoment[(i, j)] += delta[j] * after_i;
            }
        }
    }
    let denom = (n_rows.max(2) - 1) as f64;
    for i in 0..n_cols {
        for j in 0..=i {
            let v = comoment[(i, j)] / denom;
            comoment[(i, j)] = v;
            comoment[(j, i)] = v;
        }
    }
    comoment
}

/// Central fourth moments `E[(Xi-mi)(Xj-mj)(Xk-mk)(Xl-ml)]` (denominator
/// `N`), stored once per unordered index multiset.
#[derive(Debug, Clone, PartialEq)]
pub struct FourthMoments {
    n_vars: usize,
    values: Vec<f64>,
}

fn binom(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let mut r = 1usize;
    for i in 0..k {
        r = r * (n - i) / (i + 1);
    }
    r
}

fn multiset_index(mut idx: [usize; 4]) -> usize {
    idx.sort_unstable();
    binom(idx[0], 1) + binom(idx[1] + 1, 2) + binom(idx[2] + 2, 3) + binom(idx[3] + 3, 4)
}

impl FourthMoments {
    fn compute(data: &DMatrix<f64>, mean: &[f64]) -> Self {
        let (n_rows, n) = data.shape();
        let size = binom(n + 3, 4);
        let mut values = vec![0.0; size];
        let mut centered = vec![0.0; n];
        for r in 0..n_rows {
            for c in 0..n {
                centered[c] = data[(r, c)] - mean[c];
            }
            // Enumerate i <= j <= k <= l in the same order as `multiset_index`.
            let mut pos = 0;
            for l in 0..n {
                for k in 0..=l {
                    let kl = centered[k] * centered[l];
                    for j in 0..=k {
                        let jkl = centered[j] * kl;
                        for i in 0..=j {
                            values[pos] += centered[i] * jkl;
                            pos += 1;
                        }
                    }
                }
            }
        }
        let inv = 1.0 / n_rows as f64;
        values.iter_mut().for_each(|v| *v *= inv);
        Self { n_vars: n, values }
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn get(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        self.values[multiset_index([i, j, k, l])]
    }
}

/// Sample size, labelled covariance matrix and (optionally) the fourth-moment
/// table. Immutable once built.
#[derive(Debug, Clone)]
pub struct MomentCache {
    n_samples: usize,
    labels: Vec<String>,
    index: HashMap<String, usize>,
    covariance: DMatrix<f64>,
    fourth: Option<FourthMoments>,
    correlation: OnceLock<DMatrix<f64>>,
}

/// Computes the moment cache for a dataset. Fourth moments are only built on
/// request (one extra pass, `O(N n^4)`).
pub fn build_moments(dataset: &Dataset, with_fourth: bool) -> Result<MomentCache> {
    let n_rows = dataset.n_rows();
    if n_rows < 4 {
        return Err(Error::InvalidInput(format!(
            "need at least 4 observations, got {n_rows}"
        )));
    }
    let covariance = sample_covariance(&dataset.data);
    for (i, label) in dataset.labels.iter().enumerate() {
        if covariance[(i, i)] <= 0.0 {
            return Err(Error::ConstantColumn(label.clone()));
        }
    }
    let fourth = with_fourth.then(|| {
        let mean: Vec<f64> = (0..dataset.n_cols())
            .map(|c| dataset.data.column(c).mean())
            .collect();
        FourthMoments::compute(&dataset.data, &mean)
    });
    MomentCache::assemble(n_rows, dataset.labels.clone(), covariance, fourth)
}

impl MomentCache {
    /// Wraps a known covariance matrix (for example a population covariance)
    /// with a nominal sample size.
    pub fn from_covariance(
        labels: Vec<String>,
        covariance: DMatrix<f64>,
        n_samples: usize,
    ) -> Result<Self> {
        if covariance.nrows() != covariance.ncols() || covariance.nrows() != labels.len() {
            return Err(Error::InvalidInput(
                "covariance must be square and match the label count".into(),
            ));
        }
        for i in 0..labels.len() {
            if covariance[(i, i)] <= 0.0 {
                return Err(Error::ConstantColumn(labels[i].clone()));
            }
            for j in 0..i {
                let (a, b) = (covariance[(i, j)], covariance[(j, i)]);
                if (a - b).abs() > 1e-9 * (1.0 + a.abs().max(b.abs())) {
                    return Err(Error::InvalidInput(format!(
                        "covariance is not symmetric at ({}, {})",
                        labels[i], labels[j]
                    )));
                }
            }
        }
        let sym = (&covariance + covariance.transpose()) * 0.5;
        Self::assemble(n_samples, labels, sym, None)
    }

    fn assemble(
        n_samples: usize,
        labels: Vec<String>,
        covariance: DMatrix<f64>,
        fourth: Option<FourthMoments>,
    ) -> Result<Self> {
        let mut index = HashMap::with_capacity(labels.len());
        for (i, l) in labels.iter().enumerate() {
            if index.insert(l.clone(), i).is_some() {
                return Err(Error::InvalidInput(format!("duplicate label `{l}`")));
            }
        }
        Ok(Self {
            n_samples,
            labels,
            index,
            covariance,
            fourth,
            correlation: OnceLock::new(),
        })
    }

    /// Reads a covariance matrix from CSV: a header row of labels followed by
    /// one numeric row per variable.
    pub fn read_covariance_csv<R: Read>(reader: R, n_samples: usize) -> Result<Self> {
        let ds = Dataset::read_csv(reader)?;
        if ds.n_rows() != ds.n_cols() {
            return Err(Error::InvalidInput(format!(
                "covariance file has {} rows for {} labels",
                ds.n_rows(),
                ds.n_cols()
            )));
        }
        Self::from_covariance(ds.labels, ds.data, n_samples)
    }

    /// The same cache rescaled to unit variances; tetrad and partial
    /// correlation constraints are unchanged by rescaling.
    pub fn standardized(&self) -> MomentCache {
        let corr = self.correlation().clone();
        Self::assemble(self.n_samples, self.labels.clone(), corr, None)
            .expect("labels already validated")
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn n_vars(&self) -> usize {
        self.labels.len()
    }

    pub fn index_of(&self, label: &str) -> Result<usize> {
        self.index
            .get(label)
            .copied()
            .ok_or_else(|| Error::UnknownLabel(label.to_string()))
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    pub fn cov(&self, i: usize, j: usize) -> f64 {
        self.covariance[(i, j)]
    }

    pub fn fourth_moments(&self) -> Option<&FourthMoments> {
        self.fourth.as_ref()
    }

    pub fn correlation(&self) -> &DMatrix<f64> {
        self.correlation.get_or_init(|| {
            let n = self.n_vars();
            let sd: Vec<f64> = (0..n).map(|i| self.covariance[(i, i)].sqrt()).collect();
            DMatrix::from_fn(n, n, |i, j| {
                if i == j {
                    1.0
                } else {
                    (self.covariance[(i, j)] / (sd[i] * sd[j])).clamp(-1.0, 1.0)
                }
            })
        })
    }

    pub fn corr(&self, i: usize, j: usize) -> f64 {
        self.correlation()[(i, j)]
    }

    pub fn label(&self, i: usize) -> &str {
        &self.labels[i]
    }
}

/// Which tetrad test a [`SignificanceConfig`] selects.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TestKind {
    /// Normal-theory test.
    #[default]
    Wishart,
    /// Asymptotically distribution-free test built from fourth moments.
    Bollen,
}

impl std::str::FromStr for TestKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "wishart" => Ok(TestKind::Wishart),
            "bollen" => Ok(TestKind::Bollen),
            other => Err(Error::InvalidInput(format!("unknown test `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignificanceConfig {
    pub alpha: f64,
    pub test_kind: TestKind,
    /// Decide by exact thresholding at [`POPULATION_TOLERANCE`] instead of
    /// by a sampling test.
    pub population_mode: bool,
    /// When set, alpha is divided by this number of comparisons.
    pub bonferroni: Option<u64>,
    /// Test the nonzero-partial-correlation clause of `Unclustered` on
    /// samples too. Population decisions always test it.
    #[serde(default)]
    pub sample_partial_clause: bool,
}

impl Default for SignificanceConfig {
    fn default() -> Self {
        Self {
            alpha: DEFAULT_ALPHA,
            test_kind: TestKind::Wishart,
            population_mode: false,
            bonferroni: None,
            sample_partial_clause: false,
        }
    }
}

impl SignificanceConfig {
    pub fn new(alpha: f64, test_kind: TestKind) -> Result<Self> {
        let cfg = Self {
            alpha,
            test_kind,
            ..Self::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn population() -> Self {
        Self {
            population_mode: true,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidInput(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        if self.bonferroni == Some(0) {
            return Err(Error::InvalidInput(
                "bonferroni comparison count must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn effective_alpha(&self) -> f64 {
        match self.bonferroni {
            Some(m) => self.alpha / m as f64,
            None => self.alpha,
        }
    }

    /// Two-sided standard normal critical value at the effective alpha.
    pub fn critical_value(&self) -> f64 {
        normal_quantile(1.0 - self.effective_alpha() / 2.0)
    }
}

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("standard normal")
}

pub fn normal_quantile(p: f64) -> f64 {
    std_normal().inverse_cdf(p)
}

/// Two-sided p-value of a standard normal statistic.
pub fn two_sided_p(z: f64) -> f64 {
    2.0 * std_normal().cdf(-z.abs())
}

/// Outcome of testing a vanishing hypothesis (zero correlation or zero
/// tetrad difference).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    /// The vanishing hypothesis is retained.
    Holds,
    /// The vanishing hypothesis is rejected.
    Fails,
}

impl Decision {
    pub fn holds(self) -> bool {
        self == Decision::Holds
    }

    fn from_bool(holds: bool) -> Self {
        if holds {
            Decision::Holds
        } else {
            Decision::Fails
        }
    }
}

/// Test statistic, p-value and decision for one hypothesis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TestOutcome {
    pub estimate: f64,
    pub statistic: f64,
    pub p_value: f64,
    pub decision: Decision,
}

impl TestOutcome {
    pub(crate) fn from_z(estimate: f64, z: f64, cfg: &SignificanceConfig) -> Self {
        Self {
            estimate,
            statistic: z,
            p_value: two_sided_p(z),
            decision: Decision::from_bool(z.abs() <= cfg.critical_value()),
        }
    }

    pub(crate) fn population(estimate: f64) -> Self {
        let holds = estimate.abs() <= POPULATION_TOLERANCE;
        Self {
            estimate,
            statistic: f64::NAN,
            p_value: if holds { 1.0 } else { 0.0 },
            decision: Decision::from_bool(holds),
        }
    }
}

/// First-order partial correlation from three pairwise correlations.
pub fn partial_from_correlations(r_xy: f64, r_xz: f64, r_yz: f64) -> Option<f64> {
    let denom = ((1.0 - r_xz * r_xz) * (1.0 - r_yz * r_yz)).sqrt();
    if !(denom > 0.0) {
        return None;
    }
    Some((r_xy - r_xz * r_yz) / denom)
}

pub(crate) fn partial_correlation_idx(
    cache: &MomentCache,
    x: usize,
    y: usize,
    cond: Option<usize>,
) -> Result<f64> {
    match cond {
        None => Ok(cache.corr(x, y)),
        Some(z) => {
            let r_xz = cache.corr(x, z);
            let r_yz = cache.corr(y, z);
            if r_xz.abs() >= 1.0 || r_yz.abs() >= 1.0 {
                return Err(Error::UndefinedPartialCorrelation {
                    x: cache.label(x).into(),
                    y: cache.label(y).into(),
                    z: cache.label(z).into(),
                });
            }
            partial_from_correlations(cache.corr(x, y), r_xz, r_yz).ok_or_else(|| {
                Error::UndefinedPartialCorrelation {
                    x: cache.label(x).into(),
                    y: cache.label(y).into(),
                    z: cache.label(z).into(),
                }
            })
        }
    }
}

fn resolve_pair_and_cond(
    cache: &MomentCache,
    x: &str,
    y: &str,
    cond: &[&str],
) -> Result<(usize, usize, Option<usize>)> {
    if cond.len() > 1 {
        return Err(Error::InvalidInput(
            "at most one conditioning variable is supported".into(),
        ));
    }
    let xi = cache.index_of(x)?;
    let yi = cache.index_of(y)?;
    let zi = cond.first().map(|z| cache.index_of(z)).transpose()?;
    if xi == yi || zi == Some(xi) || zi == Some(yi) {
        return Err(Error::InvalidInput("labels must be distinct".into()));
    }
    Ok((xi, yi, zi))
}

/// Correlation of `x` and `y` (empty `cond`) or their partial correlation
/// given a single conditioner.
pub fn partial_correlation(cache: &MomentCache, x: &str, y: &str, cond: &[&str]) -> Result<f64> {
    let (xi, yi, zi) = resolve_pair_and_cond(cache, x, y, cond)?;
    partial_correlation_idx(cache, xi, yi, zi)
}

/// Fisher z statistic `atanh(r) * sqrt(N - 3 - |cond|)`.
pub fn fisher_z(r: f64, n_samples: usize, cond_len: usize) -> Result<f64> {
    let dof = n_samples as f64 - 3.0 - cond_len as f64;
    if dof <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "sample size {n_samples} too small for a Fisher z test with {cond_len} conditioners"
        )));
    }
    let r = r.clamp(-1.0 + 1e-15, 1.0 - 1e-15);
    Ok(r.atanh() * dof.sqrt())
}

pub(crate) fn vanishing_partial_idx(
    cache: &MomentCache,
    x: usize,
    y: usize,
    cond: Option<usize>,
    cfg: &SignificanceConfig,
) -> Result<TestOutcome> {
    let r = partial_correlation_idx(cache, x, y, cond)?;
    if cfg.population_mode {
        return Ok(TestOutcome::population(r));
    }
    let z = fisher_z(r, cache.n_samples(), usize::from(cond.is_some()))?;
    Ok(TestOutcome::from_z(r, z, cfg))
}

/// Tests whether the (partial) correlation of `x` and `y` vanishes.
pub fn test_vanishing_partial_correlation(
    cache: &MomentCache,
    x: &str,
    y: &str,
    cond: &[&str],
    cfg: &SignificanceConfig,
) -> Result<TestOutcome> {
    cfg.validate()?;
    let (xi, yi, zi) = resolve_pair_and_cond(cache, x, y, cond)?;
    vanishing_partial_idx(cache, xi, yi, zi, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn cache_from_corr(r_xy: f64, r_xz: f64, r_yz: f64, n: usize) -> MomentCache {
        let m = DMatrix::from_row_slice(3, 3, &[1.0, r_xy, r_xz, r_xy, 1.0, r_yz, r_xz, r_yz, 1.0]);
        MomentCache::from_covariance(vec!["x".into(), "y".into(), "z".into()], m, n).unwrap()
    }

    #[test]
    fn two_point_covariance() {
        let data = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 1.0, 1.0]);
        let cov = sample_covariance(&data);
        assert_abs_diff_eq!(cov[(0, 1)], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(
            cov[(0, 1)] / (cov[(0, 0)] * cov[(1, 1)]).sqrt(),
            1.0,
            epsilon = 1e-15
        );
    }

    #[test]
    fn alternating_column_has_unit_fourth_moment() {
        let rows: Vec<f64> = (0..8)
            .flat_map(|i| {
                let s = if i % 2 == 0 { 1.0 } else { -1.0 };
                [s, i as f64, (i * i) as f64, (i % 3) as f64]
            })
            .collect();
        let ds = Dataset::new(
            vec!["a".into(), "b".into(), "c".into(), "d".into()],
            DMatrix::from_row_slice(8, 4, &rows),
        )
        .unwrap();
        let cache = build_moments(&ds, true).unwrap();
        assert_abs_diff_eq!(
            cache.fourth_moments().unwrap().get(0, 0, 0, 0),
            1.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn constant_column_and_short_data_are_rejected() {
        let rows: Vec<f64> = (0..6)
            .flat_map(|i| [i as f64, 3.0, (i * i) as f64])
            .collect();
        let ds = Dataset::new(
            vec!["a".into(), "k".into(), "c".into()],
            DMatrix::from_row_slice(6, 3, &rows),
        )
        .unwrap();
        match build_moments(&ds, false) {
            Err(Error::ConstantColumn(c)) => assert_eq!(c, "k"),
            other => panic!("unexpected {other:?}"),
        }
        let short = Dataset::new(
            vec!["a".into(), "b".into()],
            DMatrix::from_row_slice(3, 2, &[0.0, 1.0, 1.0, 0.0, 2.0, 2.0]),
        )
        .unwrap();
        assert!(build_moments(&short, false).is_err());
    }

    #[test]
    fn partial_correlation_examples() {
        let c = cache_from_corr(0.5, 0.5, 0.5, 100);
        assert_abs_diff_eq!(
            partial_correlation(&c, "x", "y", &["z"]).unwrap(),
            1.0 / 3.0,
            epsilon = 1e-12
        );
        let c = cache_from_corr(0.64, 0.8, 0.8, 100);
        assert_abs_diff_eq!(
            partial_correlation(&c, "x", "y", &["z"]).unwrap(),
            0.0,
            epsilon = 1e-12
        );
        let c = cache_from_corr(0.0, 0.0, 0.0, 100);
        assert_eq!(partial_correlation(&c, "x", "y", &["z"]).unwrap(), 0.0);
        assert_eq!(partial_correlation(&c, "x", "y", &[]).unwrap(), 0.0);
    }

    #[test]
    fn partial_correlation_undefined_for_perfect_conditioner() {
        let c = cache_from_corr(0.3, 1.0, 0.3, 100);
        assert!(matches!(
            partial_correlation(&c, "x", "y", &["z"]),
            Err(Error::UndefinedPartialCorrelation { .. })
        ));
    }

    #[test]
    fn fisher_decisions() {
        let cfg = SignificanceConfig::default();
        // independent closed form: atanh(0.25) * sqrt(997)
        let expected = 0.5 * ((1.0 + 0.25f64) / (1.0 - 0.25)).ln() * 997f64.sqrt();
        assert_abs_diff_eq!(fisher_z(0.25, 1000, 0).unwrap(), expected, epsilon = 1e-12);
        assert!(expected > 8.0 && expected < 8.1);

        let c = cache_from_corr(0.25, 0.1, 0.1, 1000);
        let out = test_vanishing_partial_correlation(&c, "x", "y", &[], &cfg).unwrap();
        assert_eq!(out.decision, Decision::Fails);

        let c = cache_from_corr(0.05, 0.1, 0.1, 100);
        let out = test_vanishing_partial_correlation(&c, "x", "y", &[], &cfg).unwrap();
        assert!((out.statistic - 0.4935).abs() < 1e-3);
        assert_eq!(out.decision, Decision::Holds);

        let c = cache_from_corr(0.0, 0.1, 0.1, 50);
        let out = test_vanishing_partial_correlation(&c, "x", "y", &[], &cfg).unwrap();
        assert_eq!(out.statistic, 0.0);
        assert_eq!(out.decision, Decision::Holds);
    }

    #[test]
    fn population_mode_thresholds() {
        let cfg = SignificanceConfig::population();
        let c = cache_from_corr(0.64, 0.8, 0.8, 10);
        assert!(
            test_vanishing_partial_correlation(&c, "x", "y", &["z"], &cfg)
                .unwrap()
                .decision
                .holds()
        );
        assert!(!test_vanishing_partial_correlation(&c, "x", "y", &[], &cfg)
            .unwrap()
            .decision
            .holds());
    }

    #[test]
    fn bad_alpha_rejected() {
        assert!(SignificanceConfig::new(0.0, TestKind::Wishart).is_err());
        assert!(SignificanceConfig::new(1.0, TestKind::Bollen).is_err());
        let cfg = SignificanceConfig {
            bonferroni: Some(10),
            ..SignificanceConfig::default()
        };
        assert_abs_diff_eq!(cfg.effective_alpha(), 0.005, epsilon = 1e-15);
    }

    #[test]
    fn csv_round_trip_and_covariance_file() {
        let ds = Dataset::new(
            vec!["a".into(), "b".into()],
            DMatrix::from_row_slice(3, 2, &[1.0, 2.5, -0.125, 3.0, 7.0, 1e-3]),
        )
        .unwrap();
        let mut buf = Vec::new();
        ds.write_csv(&mut buf).unwrap();
        assert_eq!(Dataset::read_csv(buf.as_slice()).unwrap(), ds);

        let cov = "a,b\n2,0.5\n0.5,1\n";
        let c = MomentCache::read_covariance_csv(cov.as_bytes(), 100).unwrap();
        assert_eq!(c.n_samples(), 100);
        assert_abs_diff_eq!(c.corr(0, 1), 0.5 / 2f64.sqrt(), epsilon = 1e-15);
        assert!(Dataset::read_csv("a,b\n1,\n".as_bytes()).is_err());
    }

    fn naive_fourth(data: &DMatrix<f64>, i: usize, j: usize, k: usize, l: usize) -> f64 {
        let n = data.nrows();
        let m = |c: usize| data.column(c).mean();
        let (mi, mj, mk, ml) = (m(i), m(j), m(k), m(l));
        (0..n)
            .map(|r| {
                (data[(r, i)] - mi)
                    * (data[(r, j)] - mj)
                    * (data[(r, k)] - mk)
                    * (data[(r, l)] - ml)
            })
            .sum::<f64>()
            / n as f64
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn fourth_moments_match_naive_loops(values in proptest::collection::vec(-3.0f64..3.0, 250)) {
            let data = DMatrix::from_row_slice(50, 5, &values);
            let labels = (0..5).map(|i| format!("v{i}")).collect();
            let cache = build_moments(&Dataset::new(labels, data.clone()).unwrap(), true).unwrap();
            let fm = cache.fourth_moments().unwrap();
            for i in 0..5 { for j in 0..5 { for k in 0..5 { for l in 0..5 {
                prop_assert!((fm.get(i, j, k, l) - naive_fourth(&data, i, j, k, l)).abs() < 1e-12);
            }}}}
        }

        #[test]
        fn covariance_is_row_order_invariant(values in proptest::collection::vec(-5.0f64..5.0, 60), seed in 0u64..1000) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let data = DMatrix::from_row_slice(15, 4, &values);
            let mut order: Vec<usize> = (0..15).collect();
            order.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let permuted = DMatrix::from_fn(15, 4, |r, c| data[(order[r], c)]);
            let a = sample_covariance(&data);
            let b = sample_covariance(&permuted);
            for i in 0..4 { for j in 0..4 {
                prop_assert!((a[(i, j)] - b[(i, j)]).abs() < 1e-10);
            }}
        }

        #[test]
        fn partial_correlation_is_symmetric(r_xy in -0.9f64..0.9, r_xz in -0.9f64..0.9, r_yz in -0.9f64..0.9) {
            let c = cache_from_corr(r_xy, r_xz, r_yz, 100);
            let a = partial_correlation(&c, "x", "y", &["z"]).unwrap();
            let b = partial_correlation(&c, "y", "x", &["z"]).unwrap();
            prop_assert!((a - b).abs() < 1e-14);
        }
    }
}
