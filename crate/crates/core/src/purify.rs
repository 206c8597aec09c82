//! Purification of measurement patterns and measurement-model equivalence.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use serde::{Deserialize, Serialize};

use crate::cliques::{maximal_cliques, maximal_independent_sets, UndirectedGraph};
use crate::constraints::ConstraintOracle;
use crate::error::{Error, Result};
use crate::graph::PureMeasurementModel;
use crate::pattern::MeasurementPattern;
use crate::tetrad::{Tetrad, TetradKind};

/// Maximum number of variables involved in conflicts before enumeration is
/// refused.
pub const CONFLICT_GUARD: usize = 25;

/// Variables of a pattern that may share a pure model, and the pairs that may
/// not.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImpurityConflictGraph {
    pub vertices: Vec<String>,
    pub conflict_edges: Vec<(String, String)>,
}

/// One purification together with the latent clique it was computed for.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Purification {
    pub latent_clique: Vec<String>,
    pub model: PureMeasurementModel,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PurificationOutcome {
    pub solutions: Vec<Purification>,
    /// Set when no solution exists.
    pub diagnostic: Option<String>,
}

impl PurificationOutcome {
    pub fn models(&self) -> Vec<PureMeasurementModel> {
        self.solutions.iter().map(|s| s.model.clone()).collect()
    }

    /// Solution keeping the most indicators; ties go to the earliest in
    /// canonical order.
    pub fn largest(&self) -> Option<&Purification> {
        self.solutions
            .iter()
            .rev()
            .max_by_key(|s| s.model.indicator_count())
    }
}

/// Named clusters of vertex ids.
pub type IdClusters = Vec<(String, Vec<usize>)>;

/// Enumerates every inclusion-maximal set of variables that contains no
/// conflicting pair and leaves each cluster with either zero or at least
/// `min_children` members. Clusters must be disjoint; vertex ids are
/// arbitrary. Output clusters keep their input order and only list
/// surviving clusters; solutions are sorted.
pub fn maximal_solutions<F>(
    clusters: &[(String, Vec<usize>)],
    conflict: F,
    min_children: usize,
    guard: usize,
) -> Result<Vec<IdClusters>>
where
    F: Fn(usize, usize) -> bool,
{
    if min_children == 0 {
        return Err(Error::InvalidInput("min_children must be positive".into()));
    }
    // flatten to positions 0..total
    let mut vertex = Vec::new();
    let mut cluster_of = Vec::new();
    for (c, (_, members)) in clusters.iter().enumerate() {
        for &v in members {
            vertex.push(v);
            cluster_of.push(c);
        }
    }
    let total = vertex.len();
    let mut cg = UndirectedGraph::new(total);
    for a in 0..total {
        for b in (a + 1)..total {
            if conflict(vertex[a], vertex[b]) {
                cg.add_edge(a, b);
            }
        }
    }
    let involved = (0..total)
        .filter(|&v| cg.neighbors(v).next().is_some())
        .count();
    if involved > guard {
        return Err(Error::GuardExceeded {
            what: "conflict graph",
            size: involved,
            limit: guard,
            hint: "raise the significance level stringency or split the variable set",
        });
    }

    let k = clusters.len();
    let mut found: BTreeSet<Vec<usize>> = BTreeSet::new();
    let mut visited: HashSet<Vec<bool>> = HashSet::new();
    let mut stack = vec![vec![true; k]];
    while let Some(active) = stack.pop() {
        if !visited.insert(active.clone()) {
            continue;
        }
        let positions: Vec<usize> = (0..total).filter(|&p| active[cluster_of[p]]).collect();
        if positions.is_empty() {
            continue;
        }
        let local = UndirectedGraph::from_edges(
            positions.len(),
            (0..positions.len()).flat_map(|a| {
                let cg = &cg;
                let positions = &positions;
                ((a + 1)..positions.len())
                    .filter(move |&b| cg.has_edge(positions[a], positions[b]))
                    .map(move |b| (a, b))
            }),
        );
        for set in maximal_independent_sets(&local) {
            let mut counts = vec![0usize; k];
            for &i in &set {
                counts[cluster_of[positions[i]]] += 1;
            }
            let failing: Vec<usize> = (0..k)
                .filter(|&c| counts[c] > 0 && counts[c] < min_children)
                .collect();
            if failing.is_empty() {
                let mut chosen: Vec<usize> = set.iter().map(|&i| positions[i]).collect();
                chosen.sort_unstable();
                found.insert(chosen);
            } else {
                for c in failing {
                    let mut next = active.clone();
                    next[c] = false;
                    stack.push(next);
                }
            }
        }
    }

    let mut by_size: Vec<Vec<usize>> = found.into_iter().collect();
    by_size.sort_by_key(|s| std::cmp::Reverse(s.len()));
    let mut maximal: Vec<Vec<usize>> = Vec::new();
    for s in by_size {
        if !maximal.iter().any(|m| is_subset(&s, m)) {
            maximal.push(s);
        }
    }
    let mut out: Vec<Vec<(String, Vec<usize>)>> = maximal
        .into_iter()
        .map(|s| {
            let mut per: Vec<Vec<usize>> = vec![Vec::new(); k];
            for p in s {
                per[cluster_of[p]].push(vertex[p]);
            }
            per.into_iter()
                .enumerate()
                .filter(|(_, m)| !m.is_empty())
                .map(|(c, mut m)| {
                    m.sort_unstable();
                    (clusters[c].0.clone(), m)
                })
                .collect()
        })
        .collect();
    out.sort();
    Ok(out)
}

fn is_subset(small: &[usize], big: &[usize]) -> bool {
    small.iter().all(|v| big.binary_search(v).is_ok())
}

/// Largest cliques of the latent link graph, each sorted by pattern order.
pub fn maximum_latent_cliques(p: &MeasurementPattern) -> Vec<Vec<String>> {
    largest_cliques(p, |_| true)
}

fn largest_cliques(p: &MeasurementPattern, keep: impl Fn(&str) -> bool) -> Vec<Vec<String>> {
    let latents: Vec<&String> = p.latents.iter().filter(|l| keep(l)).collect();
    let pos: BTreeMap<&str, usize> = latents
        .iter()
        .enumerate()
        .map(|(i, l)| (l.as_str(), i))
        .collect();
    let g = UndirectedGraph::from_edges(
        latents.len(),
        p.latent_links
            .iter()
            .filter_map(|(a, b)| Some((*pos.get(a.as_str())?, *pos.get(b.as_str())?))),
    );
    let cliques = maximal_cliques(&g);
    let best = cliques.iter().map(Vec::len).max().unwrap_or(0);
    cliques
        .into_iter()
        .filter(|c| c.len() == best)
        .map(|c| c.into_iter().map(|i| latents[i].clone()).collect())
        .collect()
}

/// Variables claimed by two linked clusters. Linked clusters measure
/// distinct latents, so such a variable has more than one latent ancestor.
/// Overlap between unlinked clusters is left alone: those clusters may be
/// alternative groupings around the same latent.
fn shared_variables(p: &MeasurementPattern) -> BTreeSet<String> {
    p.latent_links
        .iter()
        .flat_map(|(a, b)| {
            p.clusters[a]
                .intersection(&p.clusters[b])
                .cloned()
                .collect::<Vec<_>>()
        })
        .collect()
}

/// Conflict graph over the pattern's variables. Variables claimed by two
/// linked clusters conflict with everything, so they never survive.
pub fn conflict_graph(p: &MeasurementPattern) -> ImpurityConflictGraph {
    let vertices: Vec<String> = p.retained.iter().cloned().collect();
    let shared = shared_variables(p);
    let mut edges: BTreeSet<(String, String)> = p
        .impurity_edges
        .iter()
        .map(|(a, b)| {
            if a < b {
                (a.clone(), b.clone())
            } else {
                (b.clone(), a.clone())
            }
        })
        .collect();
    for s in &shared {
        for v in &vertices {
            if v != s {
                let e = if s < v {
                    (s.clone(), v.clone())
                } else {
                    (v.clone(), s.clone())
                };
                edges.insert(e);
            }
        }
    }
    ImpurityConflictGraph {
        vertices,
        conflict_edges: edges.into_iter().collect(),
    }
}

/// All purifications of a pattern. Each maximum clique of linked latents is
/// processed separately: variables claimed by two linked clusters and one
/// endpoint of every impurity edge are removed, and every surviving
/// latent keeps at least `min_children` children. Latents that cannot keep
/// `min_children` children are left out before cliques are formed.
/// Solutions equal to or dominated by a solution from another clique are
/// discarded.
///
/// With an oracle, an impurity edge between two clique members only counts
/// when the data confirm it: most of the tetrad constraints that the pure
/// model implies and that involve the covariance of the pair must fail.
pub fn purify_pattern(
    p: &MeasurementPattern,
    oracle: Option<&dyn ConstraintOracle>,
    min_children: usize,
) -> Result<PurificationOutcome> {
    p.validate()?;
    if min_children < 2 {
        return Err(Error::InvalidInput(format!(
            "min_children must be at least 2, got {min_children}"
        )));
    }
    let shared = shared_variables(p);
    let vertices: Vec<String> = p.retained.iter().cloned().collect();
    let vpos: BTreeMap<&str, usize> = vertices
        .iter()
        .enumerate()
        .map(|(i, v)| (v.as_str(), i))
        .collect();
    let n = vertices.len();
    let oracle_ids: Vec<usize> = match oracle {
        Some(o) => vertices
            .iter()
            .map(|v| o.index_of(v))
            .collect::<Result<_>>()?,
        None => Vec::new(),
    };
    let edges: Vec<(usize, usize)> = p
        .impurity_edges
        .iter()
        .map(|(a, b)| (vpos[a.as_str()], vpos[b.as_str()]))
        .collect();

    let members = |l: &str| -> Vec<usize> {
        p.clusters[l]
            .iter()
            .filter(|v| !shared.contains(*v))
            .map(|v| vpos[v.as_str()])
            .collect()
    };
    let mut all: Vec<Purification> = Vec::new();
    for clique in largest_cliques(p, |l| members(l).len() >= min_children) {
        let clusters: Vec<(String, Vec<usize>)> =
            clique.iter().map(|l| (l.clone(), members(l))).collect();
        let mut conflict = vec![vec![false; n]; n];
        let mut owner: Vec<Option<usize>> = vec![None; n];
        for (c, (_, m)) in clusters.iter().enumerate() {
            for &v in m {
                owner[v] = Some(c);
            }
        }
        for &(i, j) in &edges {
            let confirmed = match oracle {
                Some(o) if owner[i].is_some() && owner[j].is_some() => {
                    impurity_confirmed(i, j, &owner, &oracle_ids, o)?
                }
                _ => true,
            };
            if confirmed {
                conflict[i][j] = true;
                conflict[j][i] = true;
            }
        }
        for mut sol in maximal_solutions(
            &clusters,
            |a, b| conflict[a][b],
            min_children,
            CONFLICT_GUARD,
        )? {
            if let Some(o) = oracle {
                sol = recheck_purity(sol, n, &oracle_ids, o, min_children)?;
                if sol.is_empty() {
                    continue;
                }
            }
            let model = PureMeasurementModel::new(
                sol.into_iter()
                    .map(|(l, m)| (l, m.into_iter().map(|i| vertices[i].clone()).collect()))
                    .collect(),
            );
            all.push(Purification {
                latent_clique: clique.clone(),
                model,
            });
        }
    }

    // drop duplicates and solutions dominated by one from another clique
    all.sort_by(|a, b| {
        b.model
            .indicator_count()
            .cmp(&a.model.indicator_count())
            .then_with(|| a.model.canonical().cmp(&b.model.canonical()))
    });
    let mut kept: Vec<Purification> = Vec::new();
    for s in all {
        if !kept.iter().any(|k| dominates(&k.model, &s.model)) {
            kept.push(s);
        }
    }
    kept.sort_by(|a, b| {
        a.model
            .canonical()
            .cmp(&b.model.canonical())
            .then_with(|| a.latent_clique.cmp(&b.latent_clique))
    });
    let diagnostic = kept.is_empty().then(|| {
        format!(
            "no subset of the {} retained variables leaves any latent with {min_children} or more pure children",
            p.retained.len()
        )
    });
    Ok(PurificationOutcome {
        solutions: kept,
        diagnostic,
    })
}

/// Whether a pure model with cluster assignment `owner` implies that the
/// products of pairings `p` and `q` of quad `[x, y, a, b]` agree: the two
/// pairings must join the same multiset of latent pairs.
fn implied(owner: &[usize; 4], p: usize, q: usize) -> bool {
    let pairing = |k: usize| -> [(usize, usize); 2] {
        let [x, y, a, b] = *owner;
        let sort = |u: usize, v: usize| (u.min(v), u.max(v));
        let mut s = match k {
            0 => [sort(x, y), sort(a, b)],
            1 => [sort(x, a), sort(y, b)],
            _ => [sort(x, b), sort(y, a)],
        };
        s.sort_unstable();
        s
    };
    pairing(p) == pairing(q)
}

/// Counts the implied tetrads containing `σ(i, j)` and how many of them the
/// oracle rejects. `owner` gives the cluster of each model member.
fn pair_failures(
    i: usize,
    j: usize,
    owner: &[Option<usize>],
    ids: &[usize],
    oracle: &dyn ConstraintOracle,
) -> Result<(usize, usize)> {
    let others: Vec<usize> = (0..owner.len())
        .filter(|&v| v != i && v != j && owner[v].is_some())
        .collect();
    let (mut tested, mut failed) = (0usize, 0usize);
    for (k, &a) in others.iter().enumerate() {
        for &b in &others[k + 1..] {
            let f = [i, j, a, b].map(|v| owner[v].expect("model member"));
            for (kind, q) in [(TetradKind::AbCdAcBd, 1), (TetradKind::AbCdAdBc, 2)] {
                if implied(&f, 0, q) {
                    tested += 1;
                    let t = Tetrad::new([ids[i], ids[j], ids[a], ids[b]], kind)?;
                    if !oracle.tetrad_holds(&t)? {
                        failed += 1;
                    }
                }
            }
        }
    }
    Ok((tested, failed))
}

/// A pair is impure under a model when most of the implied tetrads that
/// contain its covariance fail.
fn impure_pair(
    i: usize,
    j: usize,
    owner: &[Option<usize>],
    ids: &[usize],
    oracle: &dyn ConstraintOracle,
) -> Result<bool> {
    let (tested, failed) = pair_failures(i, j, owner, ids, oracle)?;
    Ok(2 * failed > tested)
}

/// Re-checks a solution against the oracle. While some pair of members is
/// impure, the member in the most impure pairs is removed (ties go to the
/// later variable), and clusters left with fewer than `min_children`
/// members are dropped.
fn recheck_purity(
    mut sol: Vec<(String, Vec<usize>)>,
    n: usize,
    ids: &[usize],
    oracle: &dyn ConstraintOracle,
    min_children: usize,
) -> Result<Vec<(String, Vec<usize>)>> {
    loop {
        sol.retain(|(_, m)| m.len() >= min_children);
        let mut owner: Vec<Option<usize>> = vec![None; n];
        for (c, (_, m)) in sol.iter().enumerate() {
            for &v in m {
                owner[v] = Some(c);
            }
        }
        let members: Vec<usize> = (0..n).filter(|&v| owner[v].is_some()).collect();
        let mut count = vec![0usize; n];
        for (k, &i) in members.iter().enumerate() {
            for &j in &members[k + 1..] {
                if impure_pair(i, j, &owner, ids, oracle)? {
                    count[i] += 1;
                    count[j] += 1;
                }
            }
        }
        let worst = members
            .iter()
            .copied()
            .filter(|&v| count[v] > 0)
            .max_by_key(|&v| (count[v], v));
        match worst {
            Some(v) => {
                for (_, m) in sol.iter_mut() {
                    m.retain(|&x| x != v);
                }
            }
            None => return Ok(sol),
        }
    }
}

/// Tests the implied tetrads that contain `σ(i, j)` and reports whether most
/// of them fail. With nothing to test the edge is kept.
fn impurity_confirmed(
    i: usize,
    j: usize,
    owner: &[Option<usize>],
    ids: &[usize],
    oracle: &dyn ConstraintOracle,
) -> Result<bool> {
    let (tested, failed) = pair_failures(i, j, owner, ids, oracle)?;
    Ok(tested == 0 || 2 * failed > tested)
}

/// True when every cluster of `small` is contained in a cluster of `big`.
/// Clusters of `big` are disjoint, so the containing clusters are distinct.
fn dominates(big: &PureMeasurementModel, small: &PureMeasurementModel) -> bool {
    small
        .clusters
        .values()
        .all(|members| big.clusters.values().any(|b| members.is_subset(b)))
}

/// Measurement-model equivalence: same observed variables and the same
/// partition into latent child sets, up to latent names.
pub fn mm_equal(a: &PureMeasurementModel, b: &PureMeasurementModel) -> bool {
    a.canonical() == b.canonical()
}

/// Set version of [`mm_equal`]: equal cardinality and a perfect matching.
pub fn mm_set_equal(a: &[PureMeasurementModel], b: &[PureMeasurementModel]) -> bool {
    if a.len() != b.len() {
        return false;
    }
    let mut ca: Vec<_> = a.iter().map(PureMeasurementModel::canonical).collect();
    let mut cb: Vec<_> = b.iter().map(PureMeasurementModel::canonical).collect();
    ca.sort();
    cb.sort();
    ca == cb
}
