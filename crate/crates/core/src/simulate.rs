//! Ground-truth generation: random purifiable linear latent variable graphs,
//! Gaussian samples from them, and the nonlinear diamond study.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fixtures;
use crate::graph::{
    maximal_purifications, validate_graph, LatentVariableGraph, LinearParameters,
    PureMeasurementModel, WeightedEdge, DEFAULT_MIN_CHILDREN,
};
use crate::stats::{Dataset, MomentCache};

/// Magnitude range of sampled linear coefficients (sign is random).
pub const COEFFICIENT_RANGE: (f64, f64) = (0.5, 1.5);
/// Range of sampled exogenous variances.
pub const VARIANCE_RANGE: (f64, f64) = (1.0, 3.0);

/// Number of injected impurities of each kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ImpuritySpec {
    /// Pairs of pure indicators sharing an extra error node.
    pub correlated_errors: usize,
    /// Observed-to-observed edges between indicators of one latent.
    pub direct_edges: usize,
    /// Extra indicators with two latent parents.
    pub cross_loadings: usize,
}

impl ImpuritySpec {
    pub fn is_pure(&self) -> bool {
        self.correlated_errors == 0 && self.direct_edges == 0 && self.cross_loadings == 0
    }
}

impl fmt::Display for ImpuritySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "ce={},de={},cl={}",
            self.correlated_errors, self.direct_edges, self.cross_loadings
        )
    }
}

/// Parses `ce=2,de=1,cl=1` (any subset, any order) or `none`.
impl FromStr for ImpuritySpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut spec = ImpuritySpec::default();
        let s = s.trim();
        if s.is_empty() || s == "none" {
            return Ok(spec);
        }
        for part in s.split(',') {
            let (key, value) = part
                .split_once('=')
                .ok_or_else(|| Error::InvalidInput(format!("expected key=count, got `{part}`")))?;
            let count: usize = value
                .trim()
                .parse()
                .map_err(|_| Error::InvalidInput(format!("bad impurity count `{value}`")))?;
            match key.trim() {
                "ce" => spec.correlated_errors = count,
                "de" => spec.direct_edges = count,
                "cl" => spec.cross_loadings = count,
                other => {
                    return Err(Error::InvalidInput(format!(
                        "unknown impurity kind `{other}` (use ce, de or cl)"
                    )))
                }
            }
        }
        Ok(spec)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    /// Number of latents.
    pub m: usize,
    /// Pure indicators per latent.
    pub n: usize,
    /// Sample size.
    pub samples: usize,
    pub avg_latent_degree: f64,
    pub impurities: ImpuritySpec,
    /// Use the nonlinear diamond model instead of a random linear graph.
    pub nonlinear: bool,
    pub trials: usize,
    pub seed: u64,
}

impl StudyConfig {
    /// Linear Gaussian configuration with the default latent degree.
    pub fn linear(m: usize, n: usize, samples: usize, impurities: ImpuritySpec) -> Self {
        Self {
            m,
            n,
            samples,
            avg_latent_degree: default_latent_degree(m),
            impurities,
            nonlinear: false,
            trials: 10,
            seed: 0,
        }
    }

    /// Presets: 1 pure linear, 2 linear with impurities, 3 nonlinear diamond.
    pub fn study(k: u8, m: usize, n: usize, samples: usize) -> Result<Self> {
        match k {
            1 => Ok(Self::linear(m, n, samples, ImpuritySpec::default())),
            2 => Ok(Self::linear(m, n, samples, study2_impurities(n))),
            3 => Ok(Self {
                m: 4,
                n: 4,
                samples,
                avg_latent_degree: 2.0,
                impurities: ImpuritySpec {
                    correlated_errors: 1,
                    direct_edges: 0,
                    cross_loadings: 1,
                },
                nonlinear: true,
                trials: 10,
                seed: 0,
            }),
            _ => Err(Error::InvalidInput(format!(
                "unknown study {k} (use 1, 2 or 3)"
            ))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m < 1 {
            return Err(Error::InvalidInput("need at least one latent".into()));
        }
        if self.n < 3 {
            return Err(Error::InvalidInput(format!(
                "need at least 3 indicators per latent, got {}",
                self.n
            )));
        }
        if self.samples < 10 {
            return Err(Error::InvalidInput(format!(
                "sample size must be at least 10, got {}",
                self.samples
            )));
        }
        if self.trials < 1 {
            return Err(Error::InvalidInput("trials must be at least 1".into()));
        }
        if !(self.avg_latent_degree >= 0.0) {
            return Err(Error::InvalidInput(
                "average latent degree must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// Average latent degree used for random latent graphs: 2 up to five latents,
/// 4 beyond.
pub fn default_latent_degree(m: usize) -> f64 {
    if m <= 5 {
        2.0
    } else {
        4.0
    }
}

/// Impurities injected by the second study preset, sized so that every latent
/// keeps three pure indicators.
pub fn study2_impurities(n: usize) -> ImpuritySpec {
    match n {
        3 => ImpuritySpec {
            cross_loadings: 2,
            ..Default::default()
        },
        4 => ImpuritySpec {
            correlated_errors: 2,
            cross_loadings: 1,
            ..Default::default()
        },
        _ => ImpuritySpec {
            correlated_errors: 2,
            direct_edges: 1,
            cross_loadings: 1,
        },
    }
}

/// Seed of stream `stream` derived from `master`.
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(stream);
    rng.next_u64()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub graph: LatentVariableGraph,
    /// Linear parameters. For the nonlinear study only the measurement part
    /// is linear and latent edges carry no coefficients.
    pub params: LinearParameters,
    /// Every maximal purification of `graph`.
    pub true_pure_models: Vec<PureMeasurementModel>,
}

impl GroundTruth {
    pub fn new(graph: LatentVariableGraph, params: LinearParameters) -> Result<Self> {
        let report = validate_graph(&graph);
        if let Some(v) = report.first() {
            return Err(Error::InvalidGraph(v.to_string()));
        }
        let true_pure_models = maximal_purifications(&graph, DEFAULT_MIN_CHILDREN)?;
        if true_pure_models.is_empty() {
            return Err(Error::Unsatisfiable("graph has no purification".into()));
        }
        Ok(Self {
            graph,
            params,
            true_pure_models,
        })
    }
}

fn coefficient<R: Rng>(rng: &mut R) -> f64 {
    let magnitude = rng.random_range(COEFFICIENT_RANGE.0..=COEFFICIENT_RANGE.1);
    if rng.random_bool(0.5) {
        magnitude
    } else {
        -magnitude
    }
}

fn variance<R: Rng>(rng: &mut R) -> f64 {
    rng.random_range(VARIANCE_RANGE.0..=VARIANCE_RANGE.1)
}

fn edge(a: &str, b: &str) -> (String, String) {
    (a.to_string(), b.to_string())
}

/// Random latent DAG plus `n` pure indicators per latent and the requested
/// impurities, with coefficients and variances drawn from the configured
/// ranges. Deterministic in `cfg.seed`.
pub fn random_purifiable_graph(cfg: &StudyConfig) -> Result<GroundTruth> {
    cfg.validate()?;
    let imp = cfg.impurities;
    let spare = cfg.m * (cfg.n - 3);
    if 2 * (imp.correlated_errors + imp.direct_edges) > spare {
        return Err(Error::Unsatisfiable(format!(
            "{imp} needs {} spare indicators but only {spare} exist beyond three per latent",
            2 * (imp.correlated_errors + imp.direct_edges)
        )));
    }
    if imp.cross_loadings > 0 && cfg.m < 2 {
        return Err(Error::Unsatisfiable(
            "cross-loadings need at least two latents".into(),
        ));
    }
    if imp.direct_edges > 0 && cfg.n < 5 {
        return Err(Error::Unsatisfiable(
            "direct edges need five indicators per latent".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let latents: Vec<String> = (1..=cfg.m).map(|i| format!("L{i}")).collect();
    let mut g = LatentVariableGraph {
        latents: latents.clone(),
        ..Default::default()
    };

    // latent DAG: a random spanning tree plus uniformly chosen extra edges,
    // all oriented along a random order
    let mut order: Vec<usize> = (0..cfg.m).collect();
    order.shuffle(&mut rng);
    let mut positions: BTreeSet<(usize, usize)> =
        (1..cfg.m).map(|b| (rng.random_range(0..b), b)).collect();
    let mut pairs: Vec<(usize, usize)> = (0..cfg.m)
        .flat_map(|a| ((a + 1)..cfg.m).map(move |b| (a, b)))
        .filter(|p| !positions.contains(p))
        .collect();
    pairs.shuffle(&mut rng);
    let target = (cfg.avg_latent_degree * cfg.m as f64 / 2.0).round() as usize;
    let extra = target.saturating_sub(positions.len()).min(pairs.len());
    positions.extend(&pairs[..extra]);
    let mut chosen: Vec<(usize, usize)> = positions
        .into_iter()
        .map(|(a, b)| (order[a], order[b]))
        .collect();
    chosen.sort_unstable();
    for (a, b) in chosen {
        g.latent_edges.push(edge(&latents[a], &latents[b]));
    }

    // pure indicators
    let mut untouched: Vec<Vec<String>> = Vec::with_capacity(cfg.m);
    let mut next = 1;
    for l in &latents {
        let mut members = Vec::with_capacity(cfg.n);
        for _ in 0..cfg.n {
            let o = format!("X{next}");
            next += 1;
            g.observed.push(o.clone());
            g.measurement_edges.push(edge(l, &o));
            members.push(o);
        }
        untouched.push(members);
    }

    // direct edges first: they need two spare indicators under one latent
    for _ in 0..imp.direct_edges {
        let options: Vec<usize> = (0..cfg.m).filter(|&l| untouched[l].len() >= 5).collect();
        let &l = options
            .choose(&mut rng)
            .ok_or_else(|| Error::Unsatisfiable("no latent has two spare indicators".into()))?;
        let a = take_random(&mut untouched[l], &mut rng);
        let b = take_random(&mut untouched[l], &mut rng);
        let (from, to) = if indicator_number(&a) < indicator_number(&b) {
            (a, b)
        } else {
            (b, a)
        };
        g.measurement_edges.push((from, to));
    }
    for k in 1..=imp.correlated_errors {
        let mut picked: Vec<String> = Vec::with_capacity(2);
        for _ in 0..2 {
            let options: Vec<usize> = (0..cfg.m).filter(|&l| untouched[l].len() > 3).collect();
            let &l = options
                .choose(&mut rng)
                .ok_or_else(|| Error::Unsatisfiable("no spare indicator left".into()))?;
            picked.push(take_random(&mut untouched[l], &mut rng));
        }
        picked.sort_by_key(|o| indicator_number(o));
        let e = format!("E{k}");
        g.errors.push(e.clone());
        for o in picked {
            g.error_edges.push(edge(&e, &o));
        }
    }
    for _ in 0..imp.cross_loadings {
        let mut parents: Vec<usize> = (0..cfg.m).collect();
        parents.shuffle(&mut rng);
        let mut parents = parents[..2].to_vec();
        parents.sort_unstable();
        let o = format!("X{next}");
        next += 1;
        g.observed.push(o.clone());
        for p in parents {
            g.measurement_edges.push(edge(&latents[p], &o));
        }
    }

    let mut params = LinearParameters::default();
    for (a, b) in g.all_edges() {
        params.coefficients.push(WeightedEdge {
            from: a.clone(),
            to: b.clone(),
            weight: coefficient(&mut rng),
        });
    }
    for node in g.latents.iter().chain(&g.observed).chain(&g.errors) {
        params
            .exogenous_variances
            .insert(node.clone(), variance(&mut rng));
    }
    GroundTruth::new(g, params)
}

fn take_random<R: Rng>(items: &mut Vec<String>, rng: &mut R) -> String {
    let i = rng.random_range(0..items.len());
    items.remove(i)
}

fn indicator_number(label: &str) -> usize {
    label[1..].parse().unwrap_or(usize::MAX)
}

/// Population covariance of the observed variables (graph order) implied by
/// linear parameters: `A D A'` with `A = (I - B)^-1`.
pub fn population_covariance(
    g: &LatentVariableGraph,
    params: &LinearParameters,
) -> Result<DMatrix<f64>> {
    let idx = g.index()?;
    let n = idx.len();
    let mut b = DMatrix::<f64>::zeros(n, n);
    for (from, to) in g.all_edges() {
        let w = params
            .weight(from, to)
            .ok_or_else(|| Error::InvalidInput(format!("no coefficient for {from} -> {to}")))?;
        b[(idx.index_of(to)?, idx.index_of(from)?)] = w;
    }
    let mut d = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        let label = idx.label(i);
        d[(i, i)] = *params
            .exogenous_variances
            .get(label)
            .ok_or_else(|| Error::InvalidInput(format!("no exogenous variance for {label}")))?;
    }
    let a = (DMatrix::<f64>::identity(n, n) - b)
        .try_inverse()
        .ok_or_else(|| Error::InvalidGraph("graph is not acyclic".into()))?;
    let full = &a * d * a.transpose();
    let obs = g
        .observed
        .iter()
        .map(|o| idx.index_of(o))
        .collect::<Result<Vec<_>>>()?;
    Ok(DMatrix::from_fn(obs.len(), obs.len(), |i, j| {
        full[(obs[i], obs[j])]
    }))
}

/// Population moments of a linear ground truth, labelled by observed
/// variable, with a nominal sample size.
pub fn population_moments(gt: &GroundTruth, n_samples: usize) -> Result<MomentCache> {
    let cov = population_covariance(&gt.graph, &gt.params)?;
    MomentCache::from_covariance(gt.graph.observed.clone(), cov, n_samples)
}

/// Draws `n` rows by ancestral sampling with independent Gaussian exogenous
/// terms. Columns follow the graph's observed order.
pub fn sample_linear(gt: &GroundTruth, n: usize, seed: u64) -> Result<Dataset> {
    let g = &gt.graph;
    let idx = g.index()?;
    let order = idx
        .topological_order()
        .ok_or_else(|| Error::InvalidGraph("graph is not acyclic".into()))?;
    let k = idx.len();
    let mut weights: Vec<Vec<(usize, f64)>> = vec![Vec::new(); k];
    for (from, to) in g.all_edges() {
        let w = gt
            .params
            .weight(from, to)
            .ok_or_else(|| Error::InvalidInput(format!("no coefficient for {from} -> {to}")))?;
        weights[idx.index_of(to)?].push((idx.index_of(from)?, w));
    }
    let sd: Vec<f64> = (0..k)
        .map(|i| {
            gt.params
                .exogenous_variances
                .get(idx.label(i))
                .map(|v| v.sqrt())
                .ok_or_else(|| {
                    Error::InvalidInput(format!("no exogenous variance for {}", idx.label(i)))
                })
        })
        .collect::<Result<_>>()?;
    let obs = g
        .observed
        .iter()
        .map(|o| idx.index_of(o))
        .collect::<Result<Vec<_>>>()?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = DMatrix::<f64>::zeros(n, obs.len());
    let mut value = vec![0.0; k];
    for row in 0..n {
        for &v in &order {
            let noise: f64 = rng.sample(StandardNormal);
            value[v] = weights[v].iter().map(|&(p, w)| w * value[p]).sum::<f64>() + sd[v] * noise;
        }
        for (c, &o) in obs.iter().enumerate() {
            data[(row, c)] = value[o];
        }
    }
    Dataset::new(g.observed.clone(), data)
}

/// Two-component beta mixture: `first` with probability `weight`, otherwise
/// `second`, each optionally negated.
#[derive(Debug, Clone, Copy)]
struct BetaMixture {
    weight: f64,
    first: (Beta<f64>, f64),
    second: (Beta<f64>, f64),
}

impl BetaMixture {
    fn new(weight: f64, first: (f64, f64, f64), second: (f64, f64, f64)) -> Self {
        let beta = |a, b| Beta::new(a, b).expect("valid beta parameters");
        Self {
            weight,
            first: (beta(first.0, first.1), first.2),
            second: (beta(second.0, second.1), second.2),
        }
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        let (dist, sign) = if rng.random_bool(self.weight) {
            self.first
        } else {
            self.second
        };
        sign * dist.sample(rng)
    }
}

/// Nonlinear diamond study: `L1` is an even mixture of `Beta(2,4)` and
/// `Beta(4,2)`, `L2 = L1^2 + e`, `L3 = sqrt(L1) + e`, `L4 = sin(L2/L3) + e`.
/// Latent errors mix `Beta(4,2)` with the negated `Beta(2,4)`; indicator and
/// correlated-error terms mix `Beta(2,4)` and `Beta(4,2)`. Mixing weights are
/// uniform on `[0, 1]`, drawn once per node. Indicators load linearly with
/// coefficients from the usual range. Rows with `|L3| < 1e-6` are redrawn.
pub fn sample_study3(n: usize, seed: u64) -> Result<(Dataset, GroundTruth)> {
    if n < 10 {
        return Err(Error::InvalidInput(format!(
            "sample size must be at least 10, got {n}"
        )));
    }
    let g = fixtures::diamond_graph();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut params = LinearParameters::default();
    for (a, b) in g.measurement_edges.iter().chain(&g.error_edges) {
        params.coefficients.push(WeightedEdge {
            from: a.clone(),
            to: b.clone(),
            weight: coefficient(&mut rng),
        });
    }
    let l1 = BetaMixture::new(0.5, (2.0, 4.0, 1.0), (4.0, 2.0, 1.0));
    let latent_noise: Vec<BetaMixture> = (0..3)
        .map(|_| BetaMixture::new(rng.random(), (4.0, 2.0, 1.0), (2.0, 4.0, -1.0)))
        .collect();
    let mut node_noise: BTreeMap<String, BetaMixture> = BTreeMap::new();
    for node in g.observed.iter().chain(&g.errors) {
        node_noise.insert(
            node.clone(),
            BetaMixture::new(rng.random(), (2.0, 4.0, 1.0), (4.0, 2.0, 1.0)),
        );
    }

    let idx = g.index()?;
    let order = idx
        .topological_order()
        .ok_or_else(|| Error::InvalidGraph("fixture is not acyclic".into()))?;
    let mut weights: Vec<Vec<(usize, f64)>> = vec![Vec::new(); idx.len()];
    for e in &params.coefficients {
        weights[idx.index_of(&e.to)?].push((idx.index_of(&e.from)?, e.weight));
    }
    let latent_pos = |i: usize| g.latents.iter().position(|l| l == idx.label(i));
    let noise_of: Vec<Option<BetaMixture>> = (0..idx.len())
        .map(|i| node_noise.get(idx.label(i)).copied())
        .collect();
    let obs = g
        .observed
        .iter()
        .map(|o| idx.index_of(o))
        .collect::<Result<Vec<_>>>()?;

    let mut data = DMatrix::<f64>::zeros(n, obs.len());
    let mut value = vec![0.0; idx.len()];
    for row in 0..n {
        let lat = loop {
            let x1 = l1.sample(&mut rng);
            let x2 = x1 * x1 + latent_noise[0].sample(&mut rng);
            let x3 = x1.sqrt() + latent_noise[1].sample(&mut rng);
            if x3.abs() < 1e-6 {
                continue;
            }
            let x4 = (x2 / x3).sin() + latent_noise[2].sample(&mut rng);
            break [x1, x2, x3, x4];
        };
        for &v in &order {
            value[v] = match latent_pos(v) {
                Some(p) => lat[p],
                None => {
                    let noise = noise_of[v]
                        .expect("every non-latent node has noise")
                        .sample(&mut rng);
                    weights[v].iter().map(|&(p, w)| w * value[p]).sum::<f64>() + noise
                }
            };
        }
        for (c, &o) in obs.iter().enumerate() {
            data[(row, c)] = value[o];
        }
    }
    let dataset = Dataset::new(g.observed.clone(), data)?;
    Ok((dataset, GroundTruth::new(g, params)?))
}

/// Ground truth and dataset for one trial of a study configuration.
pub fn generate_trial(cfg: &StudyConfig, trial: usize) -> Result<(Dataset, GroundTruth)> {
    cfg.validate()?;
    let seed = derive_seed(cfg.seed, trial as u64);
    if cfg.nonlinear {
        return sample_study3(cfg.samples, seed);
    }
    let mut graph_cfg = cfg.clone();
    graph_cfg.seed = derive_seed(seed, 0);
    let gt = random_purifiable_graph(&graph_cfg)?;
    let data = sample_linear(&gt, cfg.samples, derive_seed(seed, 1))?;
    Ok((data, gt))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::is_pure;
    use crate::stats::sample_covariance;
    use crate::tetrad::{tetrad_difference, Tetrad, TetradKind};

    fn cfg(m: usize, n: usize, imp: &str) -> StudyConfig {
        StudyConfig::linear(m, n, 1000, imp.parse().unwrap())
    }

    #[test]
    fn pure_five_by_four() {
        let gt = random_purifiable_graph(&cfg(5, 4, "none")).unwrap();
        assert_eq!(gt.graph.observed.len(), 20);
        assert!(validate_graph(&gt.graph).is_empty());
        assert!(is_pure(&gt.graph).unwrap());
        for l in &gt.graph.latents {
            assert_eq!(
                gt.graph
                    .measurement_edges
                    .iter()
                    .filter(|(a, _)| a == l)
                    .count(),
                4
            );
        }
        assert_eq!(gt.graph.latent_edges.len(), 5);
        assert_eq!(gt.true_pure_models.len(), 1);
    }

    #[test]
    fn deterministic_under_seed() {
        let c = cfg(5, 5, "ce=2,de=1,cl=1");
        assert_eq!(
            random_purifiable_graph(&c).unwrap(),
            random_purifiable_graph(&c).unwrap()
        );
        let mut other = c.clone();
        other.seed = 99;
        assert_ne!(
            random_purifiable_graph(&c).unwrap().params,
            random_purifiable_graph(&other).unwrap().params
        );
    }

    #[test]
    fn correlated_error_pairs() {
        let gt = random_purifiable_graph(&cfg(4, 4, "ce=2")).unwrap();
        assert_eq!(gt.graph.errors.len(), 2);
        for e in &gt.graph.errors {
            assert_eq!(
                gt.graph.error_edges.iter().filter(|(a, _)| a == e).count(),
                2
            );
        }
        for m in &gt.true_pure_models {
            m.check(3).unwrap();
            assert!(is_pure(&m.to_graph()).unwrap());
        }
    }

    #[test]
    fn impurities_keep_three_pure_indicators() {
        for seed in 0..20 {
            let mut c = cfg(5, 5, "ce=2,de=1,cl=1");
            c.seed = seed;
            let gt = random_purifiable_graph(&c).unwrap();
            assert!(validate_graph(&gt.graph).is_empty());
            let best = gt
                .true_pure_models
                .iter()
                .map(|m| m.clusters.len())
                .max()
                .unwrap();
            assert_eq!(best, 5);
        }
    }

    #[test]
    fn unsatisfiable_specs() {
        assert!(matches!(
            random_purifiable_graph(&cfg(2, 3, "ce=1")),
            Err(Error::Unsatisfiable(_))
        ));
        assert!(matches!(
            random_purifiable_graph(&cfg(5, 4, "de=1")),
            Err(Error::Unsatisfiable(_))
        ));
        assert!(matches!(
            random_purifiable_graph(&cfg(1, 4, "cl=1")),
            Err(Error::Unsatisfiable(_))
        ));
        assert!("xx=1".parse::<ImpuritySpec>().is_err());
    }

    #[test]
    fn coefficients_in_range() {
        let gt = random_purifiable_graph(&cfg(5, 5, "ce=2,de=1,cl=1")).unwrap();
        for e in &gt.params.coefficients {
            assert!((0.5..=1.5).contains(&e.weight.abs()), "{}", e.weight);
        }
        for v in gt.params.exogenous_variances.values() {
            assert!((1.0..=3.0).contains(v));
        }
    }

    #[test]
    fn sample_matches_population() {
        let gt = random_purifiable_graph(&cfg(2, 3, "none")).unwrap();
        let pop = population_covariance(&gt.graph, &gt.params).unwrap();
        let ds = sample_linear(&gt, 200_000, 7).unwrap();
        assert_eq!(ds.n_rows(), 200_000);
        let s = sample_covariance(&ds.data);
        // tolerance relative to the variable scale
        for i in 0..pop.nrows() {
            for j in 0..pop.ncols() {
                let scale = (pop[(i, i)] * pop[(j, j)]).sqrt();
                assert!((s[(i, j)] - pop[(i, j)]).abs() / scale < 0.05, "({i},{j})");
            }
        }
        assert_eq!(
            sample_linear(&gt, 50, 3).unwrap(),
            sample_linear(&gt, 50, 3).unwrap()
        );
    }

    #[test]
    fn pure_block_has_vanishing_tetrads() {
        let gt = random_purifiable_graph(&cfg(1, 4, "none")).unwrap();
        let cache = population_moments(&gt, 1000).unwrap();
        for kind in TetradKind::ALL {
            let t = Tetrad::new([0, 1, 2, 3], kind).unwrap();
            assert!(tetrad_difference(&cache, &t).unwrap().abs() < 1e-9);
        }
    }

    #[test]
    fn study3_latent_moments() {
        let (ds, gt) = sample_study3(1000, 5).unwrap();
        assert_eq!(ds.n_cols(), 16);
        assert_eq!(gt.true_pure_models.len(), 2);
        assert_eq!(
            sample_study3(200, 9).unwrap().0,
            sample_study3(200, 9).unwrap().0
        );

        let l1 = BetaMixture::new(0.5, (2.0, 4.0, 1.0), (4.0, 2.0, 1.0));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let draws: Vec<f64> = (0..100_000).map(|_| l1.sample(&mut rng)).collect();
        assert!(draws.iter().all(|&x| x > 0.0 && x < 1.0));
        let mean_sq = draws.iter().map(|x| x * x).sum::<f64>() / draws.len() as f64;
        assert!((mean_sq - 13.0 / 42.0).abs() < 0.01, "{mean_sq}");
    }

    #[test]
    fn config_validation() {
        let mut c = cfg(5, 4, "none");
        c.trials = 0;
        assert!(c.validate().is_err());
        assert!(StudyConfig::linear(5, 2, 1000, ImpuritySpec::default())
            .validate()
            .is_err());
        assert!(StudyConfig::linear(5, 4, 5, ImpuritySpec::default())
            .validate()
            .is_err());
        assert!(StudyConfig::study(4, 5, 4, 1000).is_err());
        assert_eq!(study2_impurities(4).to_string(), "ce=2,de=0,cl=1");
    }

    #[test]
    fn study_presets_are_generable() {
        for n in 3..=5 {
            let c = StudyConfig::study(2, 5, n, 1000).unwrap();
            let (ds, gt) = generate_trial(&c, 0).unwrap();
            assert_eq!(ds.n_cols(), gt.graph.observed.len());
        }
    }

    #[test]
    fn derived_seeds_differ() {
        assert_ne!(derive_seed(1, 0), derive_seed(1, 1));
        assert_eq!(derive_seed(1, 3), derive_seed(1, 3));
    }
}
