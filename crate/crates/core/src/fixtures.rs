//! Small hand-built models used by tests, examples and the nonlinear study.
//!
//! The diamond fixture is a reconstruction: its indicator numbering and
//! impurity placement are chosen so that the graph has exactly two maximal
//! purifications (both drop indicator 6, and one of 13 or 15).

use crate::graph::{LatentVariableGraph, LinearParameters, WeightedEdge};

fn edge(a: &str, b: &str) -> (String, String) {
    (a.to_string(), b.to_string())
}

/// Two correlated latents `L1 -> L2`, three pure indicators each
/// (`X1..X3` under `L1`, `Y1..Y3` under `L2`).
pub fn g2x3_graph() -> LatentVariableGraph {
    let mut g = LatentVariableGraph {
        latents: vec!["L1".into(), "L2".into()],
        latent_edges: vec![edge("L1", "L2")],
        ..Default::default()
    };
    for (latent, prefix) in [("L1", "X"), ("L2", "Y")] {
        for i in 1..=3 {
            let o = format!("{prefix}{i}");
            g.observed.push(o.clone());
            g.measurement_edges.push(edge(latent, &o));
        }
    }
    g
}

/// Unit loadings, unit latent variances with `cov(L1, L2) = 0.5`, unit
/// indicator noise: the population covariance has diagonal 2, within-cluster
/// covariance 1 and cross-cluster covariance 0.5.
pub fn g2x3_params() -> LinearParameters {
    let g = g2x3_graph();
    let mut p = LinearParameters::default();
    for (a, b) in g.all_edges() {
        let weight = if a == "L1" && b == "L2" { 0.5 } else { 1.0 };
        p.coefficients.push(WeightedEdge {
            from: a.clone(),
            to: b.clone(),
            weight,
        });
    }
    p.exogenous_variances.insert("L1".into(), 1.0);
    p.exogenous_variances.insert("L2".into(), 0.75);
    for o in &g.observed {
        p.exogenous_variances.insert(o.clone(), 1.0);
    }
    p
}

/// Indicator label used by the diamond fixture (`X1..X16`).
pub fn diamond_indicator(i: usize) -> String {
    format!("X{i}")
}

/// Diamond latent structure `L1 -> {L2, L3} -> L4`, four indicators per
/// latent (`X1..X4` under `L1`, `X5..X8` under `L2`, ...). `X6` also loads on
/// `L3`, and `X13`/`X15` share a correlated error `E1`.
pub fn diamond_graph() -> LatentVariableGraph {
    let mut g = LatentVariableGraph {
        latents: (1..=4).map(|i| format!("L{i}")).collect(),
        latent_edges: vec![
            edge("L1", "L2"),
            edge("L1", "L3"),
            edge("L2", "L4"),
            edge("L3", "L4"),
        ],
        errors: vec!["E1".into()],
        error_edges: vec![edge("E1", "X13"), edge("E1", "X15")],
        ..Default::default()
    };
    for i in 1..=16 {
        let o = diamond_indicator(i);
        g.observed.push(o.clone());
        let latent = format!("L{}", (i - 1) / 4 + 1);
        g.measurement_edges.push((latent, o));
    }
    g.measurement_edges.push(edge("L3", "X6"));
    g
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{maximal_purifications, purifications_oracle, validate_graph};

    #[test]
    fn diamond_has_two_maximal_purifications() {
        let g = diamond_graph();
        assert!(validate_graph(&g).is_empty());
        let sols = maximal_purifications(&g, 3).unwrap();
        assert_eq!(sols.len(), 2);
        for s in &sols {
            let obs = s.observed();
            assert!(!obs.contains("X6"));
            assert_eq!(obs.len(), 14);
            assert!(obs.contains("X13") != obs.contains("X15"));
        }
        assert_eq!(purifications_oracle(&g, 3).unwrap(), sols);
    }
}
