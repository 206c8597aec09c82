//! Measurement pattern discovery: prune a complete graph over the observed
//! variables with correlation, one-factor and `Unclustered` evidence, then
//! read clusters off the maximal cliques and link latents.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cliques::{maximal_cliques, UndirectedGraph};
use crate::constraints::{
    tetrad_score, unclustered, unclustered_branch, ConstraintOracle, UnclusteredBranch,
};
use crate::error::{Error, Result};
use crate::tetrad::{Tetrad, TetradKind};

/// Equivalence-class output of discovery.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct MeasurementPattern {
    /// Pattern latents in creation order.
    pub latents: Vec<String>,
    pub clusters: BTreeMap<String, BTreeSet<String>>,
    /// Undirected observed-observed edges marking pairs that cannot both be
    /// in a pure model.
    pub impurity_edges: Vec<(String, String)>,
    pub latent_links: Vec<(String, String)>,
    /// Observed variables that appear in some cluster.
    pub retained: BTreeSet<String>,
    /// Input variables that ended up in no cluster.
    #[serde(default)]
    pub dropped: BTreeSet<String>,
}

impl MeasurementPattern {
    /// Checks the structural invariants of a pattern.
    pub fn validate(&self) -> Result<()> {
        let declared: BTreeSet<&String> = self.latents.iter().collect();
        if declared.len() != self.latents.len() {
            return Err(Error::InvalidInput("duplicate pattern latent".into()));
        }
        for (latent, members) in &self.clusters {
            if !declared.contains(latent) {
                return Err(Error::InvalidInput(format!(
                    "cluster for undeclared latent `{latent}`"
                )));
            }
            if members.len() < 2 {
                return Err(Error::InvalidInput(format!(
                    "pattern latent `{latent}` has fewer than two children"
                )));
            }
        }
        for l in &self.latents {
            if !self.clusters.contains_key(l) {
                return Err(Error::InvalidInput(format!(
                    "pattern latent `{l}` has no cluster"
                )));
            }
        }
        let union: BTreeSet<String> = self.clusters.values().flatten().cloned().collect();
        if union != self.retained {
            return Err(Error::InvalidInput(
                "retained set must equal the union of the clusters".into(),
            ));
        }
        for (a, b) in &self.impurity_edges {
            if !self.retained.contains(a) || !self.retained.contains(b) || a == b {
                return Err(Error::InvalidInput(format!("bad impurity edge {a} -- {b}")));
            }
        }
        for (a, b) in &self.latent_links {
            if !declared.contains(a) || !declared.contains(b) || a == b {
                return Err(Error::InvalidInput(format!("bad latent link {a} -- {b}")));
            }
        }
        Ok(())
    }

    pub fn linked(&self, a: &str, b: &str) -> bool {
        self.latent_links
            .iter()
            .any(|(x, y)| (x == a && y == b) || (x == b && y == a))
    }

    /// Plain-text summary.
    pub fn report(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "latents: {}", self.latents.len());
        for l in &self.latents {
            let members: Vec<&str> = self.clusters[l].iter().map(String::as_str).collect();
            let _ = writeln!(s, "  {l}: {}", members.join(" "));
        }
        let _ = writeln!(s, "impurity edges: {}", self.impurity_edges.len());
        for (a, b) in &self.impurity_edges {
            let _ = writeln!(s, "  {a} -- {b}");
        }
        let _ = writeln!(s, "latent links: {}", self.latent_links.len());
        for (a, b) in &self.latent_links {
            let _ = writeln!(s, "  {a} -- {b}");
        }
        if !self.dropped.is_empty() {
            let d: Vec<&str> = self.dropped.iter().map(String::as_str).collect();
            let _ = writeln!(s, "dropped: {}", d.join(" "));
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatternOptions {
    /// Also link latents whose indicator triples are entirely uncorrelated.
    pub link_on_uncorrelated: bool,
}

impl Default for PatternOptions {
    fn default() -> Self {
        Self {
            link_on_uncorrelated: true,
        }
    }
}

/// Compatibility graph after the three pruning steps. Vertex `i` is the
/// `i`-th input label.
#[derive(Debug, Clone)]
pub struct CompatibilityGraph {
    pub vertices: Vec<String>,
    pub solid: UndirectedGraph,
    /// Pairs that cannot form a one-factor model with any other pair.
    pub dotted: Vec<(usize, usize)>,
}

fn resolve<O: ConstraintOracle + ?Sized>(labels: &[String], oracle: &O) -> Result<Vec<usize>> {
    if labels.len() < 4 {
        return Err(Error::InvalidInput(format!(
            "need at least 4 variables, got {}",
            labels.len()
        )));
    }
    let idx = labels
        .iter()
        .map(|l| oracle.index_of(l))
        .collect::<Result<Vec<_>>>()?;
    let unique: BTreeSet<usize> = idx.iter().copied().collect();
    if unique.len() != idx.len() {
        return Err(Error::InvalidInput("duplicate variable label".into()));
    }
    Ok(idx)
}

fn pairs(n: usize) -> Vec<(usize, usize)> {
    (0..n)
        .flat_map(|a| ((a + 1)..n).map(move |b| (a, b)))
        .collect()
}

/// Runs the pruning steps: uncorrelated pairs lose their edge, pairs with no
/// one-factor partner pair become dotted, and pairs separated by some
/// `Unclustered` witness lose their edge.
pub fn compatibility_graph<O: ConstraintOracle + ?Sized>(
    labels: &[String],
    oracle: &O,
) -> Result<CompatibilityGraph> {
    let vars = resolve(labels, oracle)?;
    let n = vars.len();
    let all_pairs = pairs(n);

    // step 1
    let correlated: Vec<bool> = all_pairs
        .par_iter()
        .map(|&(a, b)| Ok(!oracle.vanishing_correlation(vars[a], vars[b])?))
        .collect::<Result<_>>()?;
    let mut corr = vec![vec![false; n]; n];
    let mut solid = UndirectedGraph::new(n);
    for (&(a, b), &c) in all_pairs.iter().zip(&correlated) {
        corr[a][b] = c;
        corr[b][a] = c;
        if c {
            solid.add_edge(a, b);
        }
    }

    // step 2
    let candidates: Vec<(usize, usize)> = solid.edges();
    let dotted_flags: Vec<bool> = candidates
        .par_iter()
        .map(|&(x, y)| {
            for &(a, b) in &all_pairs {
                if a == x || a == y || b == x || b == y {
                    continue;
                }
                if tetrad_score([vars[x], vars[y], vars[a], vars[b]], oracle)? == 3 {
                    return Ok(false);
                }
            }
            Ok(true)
        })
        .collect::<Result<_>>()?;
    let dotted: Vec<(usize, usize)> = candidates
        .iter()
        .zip(&dotted_flags)
        .filter(|(_, &d)| d)
        .map(|(&p, _)| p)
        .collect();
    for &(a, b) in &dotted {
        solid.remove_edge(a, b);
    }

    // step 3
    let remaining = solid.edges();
    let separated: Vec<bool> = remaining
        .par_iter()
        .map(|&(x, y)| separated_by_unclustered(x, y, &vars, &corr, oracle))
        .collect::<Result<_>>()?;
    for (&(a, b), &sep) in remaining.iter().zip(&separated) {
        if sep {
            solid.remove_edge(a, b);
        }
    }

    Ok(CompatibilityGraph {
        vertices: labels.to_vec(),
        solid,
        dotted,
    })
}

/// Searches `{A, B, C, D}` with `Unclustered({X, A, B}, {Y, C, D})`. Only
/// pairs passing the clauses that involve `X` and `Y` alone are tried: every
/// variable must be correlated with both, and the one-factor tetrads on
/// `{Y, X, A, B}` and `{X, Y, C, D}` must hold.
fn separated_by_unclustered<O: ConstraintOracle + ?Sized>(
    x: usize,
    y: usize,
    vars: &[usize],
    corr: &[Vec<bool>],
    oracle: &O,
) -> Result<bool> {
    let n = vars.len();
    let one_factor = |v: usize, w: usize, a: usize, b: usize| -> Result<bool> {
        let quad = [vars[v], vars[w], vars[a], vars[b]];
        for kind in [TetradKind::AbCdAcBd, TetradKind::AcBdAdBc] {
            if !oracle.tetrad_holds(&Tetrad { quad, kind })? {
                return Ok(false);
            }
        }
        Ok(true)
    };
    let base: Vec<usize> = (0..n)
        .filter(|&v| v != x && v != y && corr[x][v] && corr[y][v])
        .collect();
    let mut ab = Vec::new();
    let mut cd = Vec::new();
    for (i, &a) in base.iter().enumerate() {
        for &b in &base[i + 1..] {
            if !corr[a][b] {
                continue;
            }
            if one_factor(y, x, a, b)? {
                ab.push((a, b));
            }
            if one_factor(x, y, a, b)? {
                cd.push((a, b));
            }
        }
    }
    for &(a, b) in &ab {
        for &(c, d) in &cd {
            if c == a || c == b || d == a || d == b {
                continue;
            }
            if unclustered(
                [vars[x], vars[a], vars[b]],
                [vars[y], vars[c], vars[d]],
                oracle,
            )? {
                return Ok(true);
            }
        }
    }
    Ok(false)
}

fn triples(members: &[usize]) -> Vec<[usize; 3]> {
    let mut out = Vec::new();
    for i in 0..members.len() {
        for j in (i + 1)..members.len() {
            for k in (j + 1)..members.len() {
                out.push([members[i], members[j], members[k]]);
            }
        }
    }
    out
}

/// Builds the measurement pattern for `labels` from the oracle's decisions.
pub fn find_measurement_pattern<O: ConstraintOracle + ?Sized>(
    labels: &[String],
    oracle: &O,
    options: PatternOptions,
) -> Result<MeasurementPattern> {
    let compat = compatibility_graph(labels, oracle)?;
    let vars = resolve(labels, oracle)?;

    // step 4: cliques of the solid graph (each lies inside one component)
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    for component in compat.solid.components() {
        if component.len() < 2 {
            continue;
        }
        let local = UndirectedGraph::from_edges(
            component.len(),
            pairs(component.len())
                .into_iter()
                .filter(|&(a, b)| compat.solid.has_edge(component[a], component[b])),
        );
        for clique in maximal_cliques(&local) {
            if clique.len() >= 2 {
                clusters.push(clique.into_iter().map(|i| component[i]).collect());
            }
        }
    }
    clusters.sort();

    let latents: Vec<String> = (1..=clusters.len()).map(|i| format!("T{i}")).collect();
    let retained_idx: BTreeSet<usize> = clusters.iter().flatten().copied().collect();

    let impurity_edges: Vec<(String, String)> = compat
        .dotted
        .iter()
        .filter(|(a, b)| retained_idx.contains(a) && retained_idx.contains(b))
        .map(|&(a, b)| (labels[a].clone(), labels[b].clone()))
        .collect();

    let cluster_pairs = pairs(clusters.len());
    let linked: Vec<bool> = cluster_pairs
        .par_iter()
        .map(|&(i, j)| {
            for t1 in triples(&clusters[i]) {
                for t2 in triples(&clusters[j]) {
                    if t2.iter().any(|v| t1.contains(v)) {
                        continue;
                    }
                    let o1 = t1.map(|v| vars[v]);
                    let o2 = t2.map(|v| vars[v]);
                    match unclustered_branch(o1, o2, oracle)? {
                        Some(UnclusteredBranch::Witnessed) => return Ok(true),
                        Some(UnclusteredBranch::Uncorrelated) if options.link_on_uncorrelated => {
                            return Ok(true)
                        }
                        _ => {}
                    }
                }
            }
            Ok(false)
        })
        .collect::<Result<_>>()?;
    let latent_links = cluster_pairs
        .iter()
        .zip(&linked)
        .filter(|(_, &l)| l)
        .map(|(&(i, j), _)| (latents[i].clone(), latents[j].clone()))
        .collect();

    let cluster_map = latents
        .iter()
        .zip(&clusters)
        .map(|(l, c)| (l.clone(), c.iter().map(|&v| labels[v].clone()).collect()))
        .collect();
    let retained: BTreeSet<String> = retained_idx.iter().map(|&v| labels[v].clone()).collect();
    let dropped = labels
        .iter()
        .filter(|l| !retained.contains(*l))
        .cloned()
        .collect();
    Ok(MeasurementPattern {
        latents,
        clusters: cluster_map,
        impurity_edges,
        latent_links,
        retained,
        dropped,
    })
}
