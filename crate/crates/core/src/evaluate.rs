//! Scoring an estimated pure model against ground truth.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{GraphIndex, LatentVariableGraph, NodeKind, PureMeasurementModel};
use crate::simulate::GroundTruth;

/// Estimated latent to true latent assignment.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct LatentMatch {
    /// `None` when no indicator of the cluster has a single true latent.
    pub map: BTreeMap<String, Option<String>>,
    /// Number of clusters whose plurality was tied.
    pub ties: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub missing_latents: f64,
    pub missing_indicators: f64,
    pub misplaced_indicators: f64,
    pub impurities: f64,
    pub latent_map: BTreeMap<String, Option<String>>,
    pub ties: usize,
    /// Position in `true_pure_models` of the purification used as reference.
    pub reference: usize,
    /// Set when some proportion had a zero denominator and was reported as 0.
    pub zero_denominators: Vec<String>,
}

/// Immediate latent ancestors of each observed variable, by label.
fn latent_owners(
    g: &LatentVariableGraph,
) -> Result<(GraphIndex, BTreeMap<String, BTreeSet<String>>)> {
    let idx = g.index()?;
    let owners = idx
        .nodes_of(NodeKind::Observed)
        .map(|o| {
            let ila = idx
                .immediate_latent_ancestors(o)
                .into_iter()
                .map(|l| idx.label(l).to_string())
                .collect();
            (idx.label(o).to_string(), ila)
        })
        .collect();
    Ok((idx, owners))
}

fn check_labels(
    est: &PureMeasurementModel,
    owners: &BTreeMap<String, BTreeSet<String>>,
) -> Result<()> {
    for o in est.observed() {
        if !owners.contains_key(&o) {
            return Err(Error::UnknownLabel(o));
        }
    }
    Ok(())
}

fn match_with(
    est: &PureMeasurementModel,
    latents: &[String],
    owners: &BTreeMap<String, BTreeSet<String>>,
) -> LatentMatch {
    let mut out = LatentMatch::default();
    for (name, members) in &est.clusters {
        let mut votes = vec![0usize; latents.len()];
        for m in members {
            if let Some(ila) = owners.get(m) {
                if ila.len() == 1 {
                    let l = ila.iter().next().unwrap();
                    if let Some(p) = latents.iter().position(|x| x == l) {
                        votes[p] += 1;
                    }
                }
            }
        }
        let best = votes.iter().copied().max().unwrap_or(0);
        let target = if best == 0 {
            None
        } else {
            if votes.iter().filter(|&&v| v == best).count() > 1 {
                out.ties += 1;
            }
            votes
                .iter()
                .position(|&v| v == best)
                .map(|p| latents[p].clone())
        };
        out.map.insert(name.clone(), target);
    }
    out
}

/// Maps each estimated latent to the true latent owning the plurality of its
/// indicators. Ties go to the true latent declared first.
pub fn match_latents(est: &PureMeasurementModel, truth: &GroundTruth) -> Result<LatentMatch> {
    let (_, owners) = latent_owners(&truth.graph)?;
    check_labels(est, &owners)?;
    Ok(match_with(est, &truth.graph.latents, &owners))
}

/// One impurity of a graph: a pair of indicators sharing an error node or
/// joined by a direct edge, or a single indicator with several immediate
/// latent ancestors.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ImpurityUnit {
    Pair(String, String),
    MultipleAncestors(String),
}

impl ImpurityUnit {
    fn present_in(&self, kept: &BTreeSet<String>) -> bool {
        match self {
            ImpurityUnit::Pair(a, b) => kept.contains(a) && kept.contains(b),
            ImpurityUnit::MultipleAncestors(o) => kept.contains(o),
        }
    }
}

/// Impurity units of a ground-truth graph. A pair that is both an error pair
/// and a direct edge counts once.
pub fn impurity_units(g: &LatentVariableGraph) -> Result<Vec<ImpurityUnit>> {
    let (_, owners) = latent_owners(g)?;
    let mut units = BTreeSet::new();
    let ordered = |a: &String, b: &String| {
        if a < b {
            ImpurityUnit::Pair(a.clone(), b.clone())
        } else {
            ImpurityUnit::Pair(b.clone(), a.clone())
        }
    };
    for e in &g.errors {
        let children: Vec<&String> = g
            .error_edges
            .iter()
            .filter(|(from, _)| from == e)
            .map(|(_, to)| to)
            .collect();
        for (i, a) in children.iter().enumerate() {
            for b in &children[i + 1..] {
                units.insert(ordered(a, b));
            }
        }
    }
    for (a, b) in &g.measurement_edges {
        if g.observed.contains(a) {
            units.insert(ordered(a, b));
        }
    }
    for (o, ila) in &owners {
        if ila.len() > 1 {
            units.insert(ImpurityUnit::MultipleAncestors(o.clone()));
        }
    }
    Ok(units.into_iter().collect())
}

fn ratio(num: usize, den: usize, name: &str, zero: &mut Vec<String>) -> f64 {
    if den == 0 {
        zero.push(name.to_string());
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Computes the four proportions for `est`. The reference purification is
/// the true maximal purification sharing the most indicators with `est`
/// (first in canonical order on ties).
pub fn score_output(est: &PureMeasurementModel, truth: &GroundTruth) -> Result<EvaluationReport> {
    let (_, owners) = latent_owners(&truth.graph)?;
    check_labels(est, &owners)?;
    if truth.true_pure_models.is_empty() {
        return Err(Error::InvalidInput(
            "ground truth has no purification".into(),
        ));
    }
    let kept = est.observed();
    let reference = truth
        .true_pure_models
        .iter()
        .enumerate()
        .rev()
        .max_by_key(|(_, m)| m.observed().intersection(&kept).count())
        .map(|(i, _)| i)
        .unwrap();
    let ref_obs = truth.true_pure_models[reference].observed();
    let matching = match_with(est, &truth.graph.latents, &owners);
    let mut zero = Vec::new();

    let found: BTreeSet<&String> = matching.map.values().flatten().collect();
    let m = truth.graph.latents.len();
    let missing_latents = ratio(m - found.len(), m, "missing_latents", &mut zero);

    let absent = ref_obs.iter().filter(|o| !kept.contains(*o)).count();
    let missing_indicators = ratio(absent, ref_obs.len(), "missing_indicators", &mut zero);

    let mut misplaced = 0;
    for (name, members) in &est.clusters {
        let target = matching.map.get(name).cloned().flatten();
        for o in members {
            let ok = target.as_ref().is_some_and(|t| owners[o].contains(t));
            if !ok {
                misplaced += 1;
            }
        }
    }
    let misplaced_indicators = ratio(misplaced, kept.len(), "misplaced_indicators", &mut zero);

    let units = impurity_units(&truth.graph)?;
    let present = units.iter().filter(|u| u.present_in(&kept)).count();
    let impurities = ratio(present, units.len(), "impurities", &mut zero);

    Ok(EvaluationReport {
        missing_latents,
        missing_indicators,
        misplaced_indicators,
        impurities,
        latent_map: matching.map,
        ties: matching.ties,
        reference,
        zero_denominators: zero,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::simulate::{random_purifiable_graph, ImpuritySpec, StudyConfig};

    fn set(v: &[&str]) -> BTreeSet<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    fn model(clusters: &[(&str, &[&str])]) -> PureMeasurementModel {
        PureMeasurementModel::new(
            clusters
                .iter()
                .map(|(l, m)| (l.to_string(), set(m)))
                .collect(),
        )
    }

    fn two_latents() -> GroundTruth {
        GroundTruth::new(fixtures::g2x3_graph(), fixtures::g2x3_params()).unwrap()
    }

    #[test]
    fn perfect_recovery() {
        let gt = random_purifiable_graph(&StudyConfig::linear(5, 4, 1000, ImpuritySpec::default()))
            .unwrap();
        let est = gt.true_pure_models[0].clone();
        let r = score_output(&est, &gt).unwrap();
        assert_eq!(
            (
                r.missing_latents,
                r.missing_indicators,
                r.misplaced_indicators,
                r.impurities
            ),
            (0.0, 0.0, 0.0, 0.0)
        );
        for (k, v) in &r.latent_map {
            assert_eq!(Some(k), v.as_ref());
        }
        assert_eq!(r.zero_denominators, vec!["impurities".to_string()]);
    }

    #[test]
    fn one_missing_latent_of_five() {
        let gt = random_purifiable_graph(&StudyConfig::linear(5, 4, 1000, ImpuritySpec::default()))
            .unwrap();
        let mut est = gt.true_pure_models[0].clone();
        est.clusters.remove("L3");
        let r = score_output(&est, &gt).unwrap();
        assert!((r.missing_latents - 0.2).abs() < 1e-12);
        assert!((r.missing_indicators - 0.2).abs() < 1e-12);
        assert_eq!(r.misplaced_indicators, 0.0);
    }

    #[test]
    fn plurality_and_ties() {
        let gt = two_latents();
        let est = model(&[("A", &["X1", "Y1", "Y2"]), ("B", &["X2", "X3", "Y3"])]);
        let m = match_latents(&est, &gt).unwrap();
        assert_eq!(m.map["A"], Some("L2".to_string()));
        assert_eq!(m.map["B"], Some("L1".to_string()));
        assert_eq!(m.ties, 0);

        let est = model(&[("A", &["X1", "Y1"])]);
        let m = match_latents(&est, &gt).unwrap();
        assert_eq!(m.map["A"], Some("L1".to_string()));
        assert_eq!(m.ties, 1);
    }

    #[test]
    fn seventy_percent_cluster() {
        // 7 of 10 indicators from L2
        let mut g = LatentVariableGraph {
            latents: vec!["L1".into(), "L2".into()],
            ..Default::default()
        };
        for i in 0..10 {
            let (l, o) = if i < 3 {
                ("L1", format!("A{i}"))
            } else {
                ("L2", format!("B{i}"))
            };
            g.observed.push(o.clone());
            g.measurement_edges.push((l.to_string(), o));
        }
        let mut params = crate::graph::LinearParameters::default();
        for (a, b) in g.all_edges() {
            params.coefficients.push(crate::graph::WeightedEdge {
                from: a.clone(),
                to: b.clone(),
                weight: 1.0,
            });
        }
        let gt = GroundTruth::new(g.clone(), params).unwrap();
        let est = PureMeasurementModel::new(
            [("E".to_string(), g.observed.iter().cloned().collect())].into(),
        );
        let m = match_latents(&est, &gt).unwrap();
        assert_eq!(m.map["E"], Some("L2".to_string()));
        let r = score_output(&est, &gt).unwrap();
        assert!((r.misplaced_indicators - 0.3).abs() < 1e-12);
        assert!((r.missing_latents - 0.5).abs() < 1e-12);
    }

    #[test]
    fn disjoint_denominators() {
        let gt = two_latents();
        // 4 estimated indicators, one misplaced; 2 of 6 reference indicators missing
        let est = model(&[("A", &["X1", "X2", "Y1"]), ("B", &["Y2"])]);
        let r = score_output(&est, &gt).unwrap();
        assert!((r.misplaced_indicators - 0.25).abs() < 1e-12);
        assert!((r.missing_indicators - 2.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn relabeling_invariance() {
        let gt = two_latents();
        let a = model(&[("A", &["X1", "X2", "Y1"]), ("B", &["Y2", "Y3"])]);
        let b = model(&[("Q", &["X1", "X2", "Y1"]), ("P", &["Y2", "Y3"])]);
        let (ra, rb) = (
            score_output(&a, &gt).unwrap(),
            score_output(&b, &gt).unwrap(),
        );
        assert_eq!(
            (
                ra.missing_latents,
                ra.missing_indicators,
                ra.misplaced_indicators,
                ra.impurities
            ),
            (
                rb.missing_latents,
                rb.missing_indicators,
                rb.misplaced_indicators,
                rb.impurities
            )
        );
    }

    #[test]
    fn diamond_impurities() {
        let g = fixtures::diamond_graph();
        let units = impurity_units(&g).unwrap();
        assert_eq!(
            units,
            vec![
                ImpurityUnit::Pair("X13".into(), "X15".into()),
                ImpurityUnit::MultipleAncestors("X6".into())
            ]
        );
        let (_, gt) = crate::simulate::sample_study3(20, 1).unwrap();
        let mut est = gt.true_pure_models[0].clone();
        est.clusters.get_mut("L4").unwrap().insert("X13".into());
        est.clusters.get_mut("L4").unwrap().insert("X15".into());
        let r = score_output(&est, &gt).unwrap();
        assert!((r.impurities - 0.5).abs() < 1e-12);
        for m in &gt.true_pure_models {
            let r = score_output(m, &gt).unwrap();
            assert_eq!(
                (
                    r.missing_latents,
                    r.missing_indicators,
                    r.misplaced_indicators,
                    r.impurities
                ),
                (0.0, 0.0, 0.0, 0.0)
            );
        }
    }

    #[test]
    fn unknown_indicator_is_rejected() {
        let gt = two_latents();
        assert!(score_output(&model(&[("A", &["Z9"])]), &gt).is_err());
    }
}
