//! Latent variable graphs: the DAG over latents, observed indicators and
//! correlated-error nodes, plus validity checks, d-separation and purity.
//!
//! Correlated errors are stored as explicit error nodes, each a parent of
//! two or more observed variables. A double-headed edge between two
//! indicators is written as one such error node.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default minimum number of observed children per latent in a purification.
pub const DEFAULT_MIN_CHILDREN: usize = 3;

/// Largest observed set accepted by [`purifications_oracle`].
pub const ORACLE_GUARD: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Latent,
    Observed,
    Error,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeId {
    pub kind: NodeKind,
    pub label: String,
}

/// A latent variable graph. Edge lists hold `[from, to]` label pairs.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct LatentVariableGraph {
    pub latents: Vec<String>,
    pub observed: Vec<String>,
    #[serde(default)]
    pub errors: Vec<String>,
    #[serde(default)]
    pub latent_edges: Vec<(String, String)>,
    /// Edges into observed variables, from latents or (impurities) from
    /// other observed variables.
    pub measurement_edges: Vec<(String, String)>,
    #[serde(default)]
    pub error_edges: Vec<(String, String)>,
}

/// A pure measurement model: disjoint clusters of observed variables, one
/// per latent.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PureMeasurementModel {
    pub clusters: BTreeMap<String, BTreeSet<String>>,
}

impl PureMeasurementModel {
    pub fn new(clusters: BTreeMap<String, BTreeSet<String>>) -> Self {
        Self { clusters }
    }

    /// All observed variables kept by the model.
    pub fn observed(&self) -> BTreeSet<String> {
        self.clusters.values().flatten().cloned().collect()
    }

    pub fn indicator_count(&self) -> usize {
        self.clusters.values().map(BTreeSet::len).sum()
    }

    /// Label-free form: the sorted list of sorted child sets.
    pub fn canonical(&self) -> Vec<Vec<String>> {
        let mut out: Vec<Vec<String>> = self
            .clusters
            .values()
            .map(|c| c.iter().cloned().collect())
            .collect();
        out.sort();
        out
    }

    /// Checks disjointness and the minimum cluster size.
    pub fn check(&self, min_children: usize) -> Result<()> {
        let mut seen = BTreeSet::new();
        for (latent, members) in &self.clusters {
            if members.len() < min_children {
                return Err(Error::InvalidInput(format!(
                    "cluster `{latent}` has {} indicators, need at least {min_children}",
                    members.len()
                )));
            }
            for m in members {
                if !seen.insert(m) {
                    return Err(Error::InvalidInput(format!(
                        "indicator `{m}` appears in more than one cluster"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Materializes the model as a pure latent variable graph with one latent
    /// per cluster and no latent-latent edges.
    pub fn to_graph(&self) -> LatentVariableGraph {
        let mut g = LatentVariableGraph::default();
        for (latent, members) in &self.clusters {
            g.latents.push(latent.clone());
            for m in members {
                g.observed.push(m.clone());
                g.measurement_edges.push((latent.clone(), m.clone()));
            }
        }
        g
    }
}

/// Linear structural parameters: one weight per directed edge and one
/// exogenous variance per node (latent disturbance, indicator noise, or the
/// variance of a correlated-error node).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LinearParameters {
    pub coefficients: Vec<WeightedEdge>,
    pub exogenous_variances: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedEdge {
    pub from: String,
    pub to: String,
    pub weight: f64,
}

impl LinearParameters {
    pub fn weight(&self, from: &str, to: &str) -> Option<f64> {
        self.coefficients
            .iter()
            .find(|e| e.from == from && e.to == to)
            .map(|e| e.weight)
    }
}

/// A clause of the measurement-model / latent-variable-graph definitions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Clause {
    DuplicateLabel,
    UnknownEndpoint,
    NotAcyclic,
    LatentWithoutObservedChild,
    ObservedWithoutLatentParent,
    ObservedParentOfLatentOrError,
    ErrorWithFewerThanTwoChildren,
    ErrorDependentOnLatent,
    LatentEdgeEndpointNotLatent,
    MeasurementEdgeNotIntoObserved,
    ErrorEdgeNotFromErrorIntoObserved,
}

impl fmt::Display for Clause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Clause::DuplicateLabel => "labels must be unique",
            Clause::UnknownEndpoint => "edge endpoints must be declared nodes",
            Clause::NotAcyclic => "the graph must be acyclic",
            Clause::LatentWithoutObservedChild => {
                "each latent must be a parent of at least one observed variable"
            }
            Clause::ObservedWithoutLatentParent => {
                "all observed nodes must be children of some node in L"
            }
            Clause::ObservedParentOfLatentOrError => {
                "no observed variable may be a parent of a latent or error node"
            }
            Clause::ErrorWithFewerThanTwoChildren => {
                "an error node must be a common parent of at least two observed nodes"
            }
            Clause::ErrorDependentOnLatent => {
                "an error node must be d-separated from every latent given the empty set"
            }
            Clause::LatentEdgeEndpointNotLatent => "latent edges must join two latents",
            Clause::MeasurementEdgeNotIntoObserved => {
                "measurement edges must point into observed variables"
            }
            Clause::ErrorEdgeNotFromErrorIntoObserved => {
                "error edges must point from an error node into an observed variable"
            }
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub clause: Clause,
    pub subject: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.subject, self.clause)
    }
}

/// Adjacency view of a [`LatentVariableGraph`], with nodes indexed by
/// position: latents first, then observed, then error nodes.
#[derive(Debug, Clone)]
pub struct GraphIndex {
    labels: Vec<String>,
    kinds: Vec<NodeKind>,
    by_label: HashMap<String, usize>,
    parents: Vec<Vec<usize>>,
    children: Vec<Vec<usize>>,
}

impl GraphIndex {
    pub fn new(g: &LatentVariableGraph) -> Result<Self> {
        let mut labels = Vec::new();
        let mut kinds = Vec::new();
        let mut by_label = HashMap::new();
        let groups = [
            (&g.latents, NodeKind::Latent),
            (&g.observed, NodeKind::Observed),
            (&g.errors, NodeKind::Error),
        ];
        for (names, kind) in groups {
            for name in names {
                if by_label.insert(name.clone(), labels.len()).is_some() {
                    return Err(Error::InvalidGraph(format!("duplicate label `{name}`")));
                }
                labels.push(name.clone());
                kinds.push(kind);
            }
        }
        let n = labels.len();
        let mut parents = vec![Vec::new(); n];
        let mut children = vec![Vec::new(); n];
        for (from, to) in g.all_edges() {
            let a = *by_label
                .get(from)
                .ok_or_else(|| Error::UnknownLabel(from.clone()))?;
            let b = *by_label
                .get(to)
                .ok_or_else(|| Error::UnknownLabel(to.clone()))?;
            if !children[a].contains(&b) {
                children[a].push(b);
                parents[b].push(a);
            }
        }
        Ok(Self {
            labels,
            kinds,
            by_label,
            parents,
            children,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn label(&self, i: usize) -> &str {
        &self.labels[i]
    }

    pub fn kind(&self, i: usize) -> NodeKind {
        self.kinds[i]
    }

    pub fn node(&self, i: usize) -> NodeId {
        NodeId {
            kind: self.kinds[i],
            label: self.labels[i].clone(),
        }
    }

    pub fn index_of(&self, label: &str) -> Result<usize> {
        self.by_label
            .get(label)
            .copied()
            .ok_or_else(|| Error::UnknownLabel(label.to_string()))
    }

    pub fn parents(&self, i: usize) -> &[usize] {
        &self.parents[i]
    }

    pub fn children(&self, i: usize) -> &[usize] {
        &self.children[i]
    }

    pub fn nodes_of(&self, kind: NodeKind) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(move |&i| self.kinds[i] == kind)
    }

    /// Kahn ordering; `None` when the graph has a directed cycle.
    pub fn topological_order(&self) -> Option<Vec<usize>> {
        let mut indeg: Vec<usize> = self.parents.iter().map(Vec::len).collect();
        let mut queue: VecDeque<usize> = (0..self.len()).filter(|&i| indeg[i] == 0).collect();
        let mut order = Vec::with_capacity(self.len());
        while let Some(v) = queue.pop_front() {
            order.push(v);
            for &c in &self.children[v] {
                indeg[c] -= 1;
                if indeg[c] == 0 {
                    queue.push_back(c);
                }
            }
        }
        (order.len() == self.len()).then_some(order)
    }

    fn ancestors_of(&self, set: &[usize]) -> Vec<bool> {
        let mut anc = vec![false; self.len()];
        let mut stack: Vec<usize> = set.to_vec();
        while let Some(v) = stack.pop() {
            if anc[v] {
                continue;
            }
            anc[v] = true;
            stack.extend(self.parents[v].iter().copied());
        }
        anc
    }

    /// Nodes reachable from `x` along trails that are active given `cond`
    /// (Bayes-ball reachability).
    pub fn reachable(&self, x: usize, cond: &[usize]) -> Vec<bool> {
        #[derive(Clone, Copy)]
        enum Dir {
            // arrived from a child
            Up,
            // arrived from a parent
            Down,
        }
        let n = self.len();
        let mut in_cond = vec![false; n];
        for &c in cond {
            in_cond[c] = true;
        }
        let anc = self.ancestors_of(cond);
        let mut visited = vec![[false; 2]; n];
        let mut reach = vec![false; n];
        let mut stack = vec![(x, Dir::Up)];
        while let Some((v, dir)) = stack.pop() {
            let slot = match dir {
                Dir::Up => 0,
                Dir::Down => 1,
            };
            if visited[v][slot] {
                continue;
            }
            visited[v][slot] = true;
            if !in_cond[v] {
                reach[v] = true;
            }
            match dir {
                Dir::Up => {
                    if !in_cond[v] {
                        stack.extend(self.parents[v].iter().map(|&p| (p, Dir::Up)));
                        stack.extend(self.children[v].iter().map(|&c| (c, Dir::Down)));
                    }
                }
                Dir::Down => {
                    if !in_cond[v] {
                        stack.extend(self.children[v].iter().map(|&c| (c, Dir::Down)));
                    }
                    if anc[v] {
                        stack.extend(self.parents[v].iter().map(|&p| (p, Dir::Up)));
                    }
                }
            }
        }
        reach
    }

    pub fn d_separated_idx(&self, x: usize, y: usize, cond: &[usize]) -> bool {
        !self.reachable(x, cond)[y]
    }

    /// Latents with a directed path into `o` whose interior nodes are all
    /// non-latent.
    pub fn immediate_latent_ancestors(&self, o: usize) -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        let mut seen = vec![false; self.len()];
        let mut stack = vec![o];
        while let Some(v) = stack.pop() {
            for &p in &self.parents[v] {
                if seen[p] {
                    continue;
                }
                seen[p] = true;
                match self.kinds[p] {
                    NodeKind::Latent => {
                        out.insert(p);
                    }
                    NodeKind::Observed => stack.push(p),
                    NodeKind::Error => {}
                }
            }
        }
        out
    }
}

impl LatentVariableGraph {
    pub fn all_edges(&self) -> impl Iterator<Item = &(String, String)> {
        self.latent_edges
            .iter()
            .chain(&self.measurement_edges)
            .chain(&self.error_edges)
    }

    pub fn index(&self) -> Result<GraphIndex> {
        GraphIndex::new(self)
    }

    /// The graph restricted to a subset of its observed variables; error
    /// nodes left with fewer than two children are dropped.
    pub fn restricted_to(&self, keep: &BTreeSet<String>) -> LatentVariableGraph {
        let obs_ok = |s: &String| !self.observed.contains(s) || keep.contains(s);
        let measurement_edges: Vec<_> = self
            .measurement_edges
            .iter()
            .filter(|(a, b)| obs_ok(a) && obs_ok(b))
            .cloned()
            .collect();
        let mut error_edges: Vec<_> = self
            .error_edges
            .iter()
            .filter(|(_, b)| keep.contains(b))
            .cloned()
            .collect();
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for (e, _) in &error_edges {
            *counts.entry(e.as_str()).or_default() += 1;
        }
        let errors: Vec<String> = self
            .errors
            .iter()
            .filter(|e| counts.get(e.as_str()).copied().unwrap_or(0) >= 2)
            .cloned()
            .collect();
        error_edges.retain(|(e, _)| errors.contains(e));
        LatentVariableGraph {
            latents: self.latents.clone(),
            observed: self
                .observed
                .iter()
                .filter(|o| keep.contains(*o))
                .cloned()
                .collect(),
            errors,
            latent_edges: self.latent_edges.clone(),
            measurement_edges,
            error_edges,
        }
    }
}

/// Lists every violated clause; an empty report means the graph is a valid
/// latent variable graph.
pub fn validate_graph(g: &LatentVariableGraph) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |clause: Clause, subject: String| out.push(Violation { clause, subject });

    let mut kinds: HashMap<&str, NodeKind> = HashMap::new();
    for (names, kind) in [
        (&g.latents, NodeKind::Latent),
        (&g.observed, NodeKind::Observed),
        (&g.errors, NodeKind::Error),
    ] {
        for name in names {
            if kinds.insert(name.as_str(), kind).is_some() {
                push(Clause::DuplicateLabel, name.clone());
            }
        }
    }

    let edge_name = |a: &str, b: &str| format!("{a} -> {b}");
    let mut structural_ok = true;
    for (a, b) in g.all_edges() {
        for end in [a, b] {
            if !kinds.contains_key(end.as_str()) {
                push(Clause::UnknownEndpoint, edge_name(a, b));
                structural_ok = false;
            }
        }
    }
    for (a, b) in &g.latent_edges {
        if kinds.get(a.as_str()) != Some(&NodeKind::Latent)
            || kinds.get(b.as_str()) != Some(&NodeKind::Latent)
        {
            push(Clause::LatentEdgeEndpointNotLatent, edge_name(a, b));
        }
    }
    for (a, b) in &g.measurement_edges {
        let from = kinds.get(a.as_str());
        if kinds.get(b.as_str()) != Some(&NodeKind::Observed)
            || !matches!(from, Some(NodeKind::Latent) | Some(NodeKind::Observed))
        {
            push(Clause::MeasurementEdgeNotIntoObserved, edge_name(a, b));
        }
    }
    for (a, b) in &g.error_edges {
        if kinds.get(a.as_str()) != Some(&NodeKind::Error)
            || kinds.get(b.as_str()) != Some(&NodeKind::Observed)
        {
            push(Clause::ErrorEdgeNotFromErrorIntoObserved, edge_name(a, b));
        }
    }
    if !structural_ok || out.iter().any(|v| v.clause == Clause::DuplicateLabel) {
        return out;
    }
    let idx = match GraphIndex::new(g) {
        Ok(idx) => idx,
        Err(e) => {
            out.push(Violation {
                clause: Clause::UnknownEndpoint,
                subject: e.to_string(),
            });
            return out;
        }
    };

    if idx.topological_order().is_none() {
        out.push(Violation {
            clause: Clause::NotAcyclic,
            subject: "graph".into(),
        });
    }
    for i in 0..idx.len() {
        let label = idx.label(i).to_string();
        match idx.kind(i) {
            NodeKind::Latent => {
                if !idx
                    .children(i)
                    .iter()
                    .any(|&c| idx.kind(c) == NodeKind::Observed)
                {
                    out.push(Violation {
                        clause: Clause::LatentWithoutObservedChild,
                        subject: label,
                    });
                }
            }
            NodeKind::Observed => {
                if !idx
                    .parents(i)
                    .iter()
                    .any(|&p| idx.kind(p) == NodeKind::Latent)
                {
                    out.push(Violation {
                        clause: Clause::ObservedWithoutLatentParent,
                        subject: label.clone(),
                    });
                }
                if idx
                    .children(i)
                    .iter()
                    .any(|&c| idx.kind(c) != NodeKind::Observed)
                {
                    out.push(Violation {
                        clause: Clause::ObservedParentOfLatentOrError,
                        subject: label,
                    });
                }
            }
            NodeKind::Error => {
                let observed_children = idx
                    .children(i)
                    .iter()
                    .filter(|&&c| idx.kind(c) == NodeKind::Observed)
                    .count();
                if observed_children < 2 {
                    out.push(Violation {
                        clause: Clause::ErrorWithFewerThanTwoChildren,
                        subject: label.clone(),
                    });
                }
                let reach = idx.reachable(i, &[]);
                if idx.nodes_of(NodeKind::Latent).any(|l| reach[l]) {
                    out.push(Violation {
                        clause: Clause::ErrorDependentOnLatent,
                        subject: label,
                    });
                }
            }
        }
    }
    out
}

/// Standard d-separation of `x` and `y` given `cond`.
pub fn d_separated(g: &LatentVariableGraph, x: &str, y: &str, cond: &[&str]) -> Result<bool> {
    let idx = g.index()?;
    let xi = idx.index_of(x)?;
    let yi = idx.index_of(y)?;
    let ci = cond
        .iter()
        .map(|c| idx.index_of(c))
        .collect::<Result<Vec<_>>>()?;
    if xi == yi {
        return Err(Error::InvalidInput(format!(
            "`{x}` cannot be d-separated from itself"
        )));
    }
    if ci.contains(&xi) || ci.contains(&yi) {
        return Err(Error::InvalidInput(
            "endpoints may not appear in the conditioning set".into(),
        ));
    }
    Ok(idx.d_separated_idx(xi, yi, &ci))
}

fn require_valid(g: &LatentVariableGraph) -> Result<GraphIndex> {
    let report = validate_graph(g);
    if let Some(v) = report.first() {
        return Err(Error::InvalidGraph(format!(
            "{v}{}",
            if report.len() > 1 {
                format!(" (and {} more)", report.len() - 1)
            } else {
                String::new()
            }
        )));
    }
    g.index()
}

/// True iff each observed variable has a single latent parent that
/// d-separates it from every other latent and observed variable, and there
/// are no error nodes.
pub fn is_pure(g: &LatentVariableGraph) -> Result<bool> {
    let idx = require_valid(g)?;
    if !g.errors.is_empty() || !g.error_edges.is_empty() {
        return Ok(false);
    }
    let latents: Vec<usize> = idx.nodes_of(NodeKind::Latent).collect();
    let observed: Vec<usize> = idx.nodes_of(NodeKind::Observed).collect();
    for &o in &observed {
        let parents = idx.parents(o);
        if parents.len() != 1 || idx.kind(parents[0]) != NodeKind::Latent {
            return Ok(false);
        }
        let li = parents[0];
        let reach = idx.reachable(o, &[li]);
        let leaks = latents
            .iter()
            .chain(&observed)
            .any(|&v| v != o && v != li && reach[v]);
        if leaks {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Pairwise purity structure of a graph's observed variables: which
/// variables can appear in a pure submodel at all (and under which latent),
/// and which pairs cannot appear together.
#[derive(Debug, Clone)]
pub struct PurityStructure {
    /// Observed labels in graph order.
    pub observed: Vec<String>,
    /// Latent owning each observed variable when it can be pure, else `None`.
    pub owner: Vec<Option<String>>,
    /// Symmetric incompatibility matrix over `observed`.
    pub conflict: Vec<Vec<bool>>,
}

/// Computes the per-variable and pairwise conditions under which a subset of
/// observed variables induces a pure measurement model. A variable `O` kept
/// in a subset `S` is pure iff it has exactly one immediate latent ancestor
/// `L` and `L` d-separates `O` from every other latent and every other member
/// of `S`; d-separation from a set decomposes into pairwise checks.
pub fn purity_structure(g: &LatentVariableGraph) -> Result<PurityStructure> {
    let idx = require_valid(g)?;
    let latents: Vec<usize> = idx.nodes_of(NodeKind::Latent).collect();
    let observed: Vec<usize> = idx.nodes_of(NodeKind::Observed).collect();
    let mut owner_idx = Vec::with_capacity(observed.len());
    let mut reach_given_owner = Vec::with_capacity(observed.len());
    for &o in &observed {
        let ila = idx.immediate_latent_ancestors(o);
        let mut owner = None;
        let mut reach = None;
        if ila.len() == 1 {
            let l = *ila.iter().next().unwrap();
            let r = idx.reachable(o, &[l]);
            if !latents.iter().any(|&m| m != l && r[m]) {
                owner = Some(l);
            }
            reach = Some(r);
        }
        owner_idx.push(owner);
        reach_given_owner.push(reach);
    }
    let n = observed.len();
    let mut conflict = vec![vec![false; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let blocked_i = reach_given_owner[i]
                .as_ref()
                .is_some_and(|r| !r[observed[j]]);
            let blocked_j = reach_given_owner[j]
                .as_ref()
                .is_some_and(|r| !r[observed[i]]);
            let c = !(blocked_i && blocked_j);
            conflict[i][j] = c;
            conflict[j][i] = c;
        }
    }
    Ok(PurityStructure {
        observed: observed.iter().map(|&o| idx.label(o).to_string()).collect(),
        owner: owner_idx
            .iter()
            .map(|o| o.map(|l| idx.label(l).to_string()))
            .collect(),
        conflict,
    })
}

/// Brute-force enumeration of every maximal purification of `g` in which each
/// surviving latent keeps at least `min_children` observed children. Latents
/// left without children are dropped from the solution. This is a testing
/// oracle; production code goes through [`maximal_purifications`].
pub fn purifications_oracle(
    g: &LatentVariableGraph,
    min_children: usize,
) -> Result<Vec<PureMeasurementModel>> {
    if g.observed.len() > ORACLE_GUARD {
        return Err(Error::GuardExceeded {
            what: "observed variable set",
            size: g.observed.len(),
            limit: ORACLE_GUARD,
            hint: "use purify_pattern on a discovered measurement pattern instead",
        });
    }
    let ps = purity_structure(g)?;
    let n = ps.observed.len();
    let latent_pos: HashMap<&str, usize> = g
        .latents
        .iter()
        .enumerate()
        .map(|(i, l)| (l.as_str(), i))
        .collect();
    let owner: Vec<Option<usize>> = ps
        .owner
        .iter()
        .map(|o| o.as_ref().map(|l| latent_pos[l.as_str()]))
        .collect();
    let conflict_mask: Vec<u32> = (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| ps.conflict[i][j])
                .fold(0u32, |m, j| m | (1 << j))
        })
        .collect();
    let usable: u32 = (0..n)
        .filter(|&i| owner[i].is_some())
        .fold(0u32, |m, i| m | (1 << i));

    let mut valid: Vec<u32> = Vec::new();
    let mut counts = vec![0usize; g.latents.len()];
    for mask in 0u32..(1u32 << n) {
        if mask & !usable != 0 || mask == 0 {
            continue;
        }
        if (0..n).any(|i| mask & (1 << i) != 0 && mask & conflict_mask[i] != 0) {
            continue;
        }
        counts.iter_mut().for_each(|c| *c = 0);
        for i in (0..n).filter(|&i| mask & (1 << i) != 0) {
            counts[owner[i].unwrap()] += 1;
        }
        if counts.iter().all(|&c| c == 0 || c >= min_children) {
            valid.push(mask);
        }
    }
    valid.sort_by_key(|m| std::cmp::Reverse(m.count_ones()));
    let mut maximal: Vec<u32> = Vec::new();
    for m in valid {
        if !maximal.iter().any(|&k| k & m == m) {
            maximal.push(m);
        }
    }
    let mut models: Vec<PureMeasurementModel> = maximal
        .into_iter()
        .map(|mask| {
            let mut clusters: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
            for i in (0..n).filter(|&i| mask & (1 << i) != 0) {
                clusters
                    .entry(ps.owner[i].clone().unwrap())
                    .or_default()
                    .insert(ps.observed[i].clone());
            }
            PureMeasurementModel::new(clusters)
        })
        .collect();
    models.sort_by_key(PureMeasurementModel::canonical);
    Ok(models)
}

/// Every maximal purification of `g`, computed by enumerating surviving
/// latent sets and maximal conflict-free indicator sets. Agrees with
/// [`purifications_oracle`] but has no observed-count guard.
pub fn maximal_purifications(
    g: &LatentVariableGraph,
    min_children: usize,
) -> Result<Vec<PureMeasurementModel>> {
    let ps = purity_structure(g)?;
    let mut clusters: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (i, o) in ps.owner.iter().enumerate() {
        if let Some(l) = o {
            clusters.entry(l.clone()).or_default().push(i);
        }
    }
    let cluster_list: Vec<(String, Vec<usize>)> = clusters.into_iter().collect();
    let sets = crate::purify::maximal_solutions(
        &cluster_list,
        |a, b| ps.conflict[a][b],
        min_children,
        crate::purify::CONFLICT_GUARD,
    )?;
    let mut models: Vec<PureMeasurementModel> = sets
        .into_iter()
        .map(|sol| {
            PureMeasurementModel::new(
                sol.into_iter()
                    .map(|(l, members)| {
                        (
                            l,
                            members
                                .into_iter()
                                .map(|i| ps.observed[i].clone())
                                .collect(),
                        )
                    })
                    .collect(),
            )
        })
        .collect();
    models.sort_by_key(PureMeasurementModel::canonical);
    Ok(models)
}
