//! Constraint oracles and the two composite predicates built on them:
//! the tetrad score of a quadruple and the `Unclustered` test for two
//! disjoint triples.

use std::sync::atomic::{AtomicU8, Ordering};

use crate::error::{Error, Result};
use crate::stats::{self, MomentCache, SignificanceConfig};
use crate::tetrad::{self, CanonicalTetrad, Tetrad, TetradKind};

/// Source of the elementary statistical decisions used by discovery.
/// Implementations must be deterministic for fixed inputs.
pub trait ConstraintOracle: Sync {
    /// Variable labels; indices passed to the other methods refer to this list.
    fn variables(&self) -> &[String];

    fn vanishing_correlation(&self, x: usize, y: usize) -> Result<bool>;

    fn vanishing_partial_correlation(&self, x: usize, y: usize, z: usize) -> Result<bool>;

    fn tetrad_holds(&self, t: &Tetrad) -> Result<bool>;

    /// Whether `Unclustered` should test its clause requiring every
    /// first-order partial correlation to be nonzero.
    fn partial_clause(&self) -> bool {
        true
    }

    fn index_of(&self, label: &str) -> Result<usize> {
        self.variables()
            .iter()
            .position(|v| v == label)
            .ok_or_else(|| Error::UnknownLabel(label.to_string()))
    }
}

const UNKNOWN: u8 = 0;
const NO: u8 = 1;
const YES: u8 = 2;

fn binom(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

/// Lock-free memo table of boolean decisions. Concurrent misses on the same
/// slot may both compute, but they store the same value.
struct Memo(Vec<AtomicU8>);

impl Memo {
    fn new(len: usize) -> Self {
        Self((0..len).map(|_| AtomicU8::new(UNKNOWN)).collect())
    }

    fn get_or(&self, slot: usize, f: impl FnOnce() -> Result<bool>) -> Result<bool> {
        match self.0[slot].load(Ordering::Relaxed) {
            YES => Ok(true),
            NO => Ok(false),
            _ => {
                let v = f()?;
                self.0[slot].store(if v { YES } else { NO }, Ordering::Relaxed);
                Ok(v)
            }
        }
    }
}

/// Oracle answering from a [`MomentCache`]: Fisher z tests for (partial)
/// correlations and the configured tetrad test, or exact thresholding in
/// population mode. Every decision is memoized.
pub struct MomentOracle<'a> {
    cache: &'a MomentCache,
    cfg: SignificanceConfig,
    corr: Memo,
    partial: Memo,
    tetrads: Memo,
}

impl<'a> MomentOracle<'a> {
    pub fn new(cache: &'a MomentCache, cfg: SignificanceConfig) -> Result<Self> {
        cfg.validate()?;
        let n = cache.n_vars();
        if n < 4 {
            return Err(Error::InvalidInput(format!(
                "need at least 4 variables, got {n}"
            )));
        }
        if cfg.test_kind == stats::TestKind::Bollen
            && !cfg.population_mode
            && cache.fourth_moments().is_none()
        {
            return Err(Error::MissingFourthMoments);
        }
        Ok(Self {
            cache,
            cfg,
            corr: Memo::new(n * n),
            partial: Memo::new(n * n * n),
            tetrads: Memo::new(3 * binom(n, 4)),
        })
    }

    pub fn cache(&self) -> &MomentCache {
        self.cache
    }

    pub fn config(&self) -> &SignificanceConfig {
        &self.cfg
    }

    fn tetrad_slot(c: &CanonicalTetrad) -> usize {
        let [a, b, cc, d] = c.quad;
        let q = binom(a, 1) + binom(b, 2) + binom(cc, 3) + binom(d, 4);
        3 * q + c.excluded as usize
    }
}

impl ConstraintOracle for MomentOracle<'_> {
    fn variables(&self) -> &[String] {
        self.cache.labels()
    }

    fn index_of(&self, label: &str) -> Result<usize> {
        self.cache.index_of(label)
    }

    fn vanishing_correlation(&self, x: usize, y: usize) -> Result<bool> {
        let n = self.cache.n_vars();
        let (a, b) = (x.min(y), x.max(y));
        self.corr.get_or(a * n + b, || {
            Ok(
                stats::vanishing_partial_idx(self.cache, a, b, None, &self.cfg)?
                    .decision
                    .holds(),
            )
        })
    }

    fn vanishing_partial_correlation(&self, x: usize, y: usize, z: usize) -> Result<bool> {
        let n = self.cache.n_vars();
        let (a, b) = (x.min(y), x.max(y));
        self.partial.get_or((a * n + b) * n + z, || {
            Ok(
                stats::vanishing_partial_idx(self.cache, a, b, Some(z), &self.cfg)?
                    .decision
                    .holds(),
            )
        })
    }

    fn partial_clause(&self) -> bool {
        self.cfg.population_mode || self.cfg.sample_partial_clause
    }

    fn tetrad_holds(&self, t: &Tetrad) -> Result<bool> {
        let canon = t.canonical();
        self.tetrads.get_or(Self::tetrad_slot(&canon), || {
            Ok(tetrad::tetrad_test(self.cache, &canon.tetrad(), &self.cfg)?
                .decision
                .holds())
        })
    }
}

fn distinct(vars: &[usize]) -> bool {
    vars.iter()
        .enumerate()
        .all(|(i, a)| vars[i + 1..].iter().all(|b| a != b))
}

/// Number of tetrad constraints (0 to 3) holding among four variables, or 0
/// when some triple among them has a vanishing partial correlation.
pub fn tetrad_score<O: ConstraintOracle + ?Sized>(vars: [usize; 4], oracle: &O) -> Result<u8> {
    if !distinct(&vars) {
        return Err(Error::InvalidInput(
            "tetrad score needs four distinct variables".into(),
        ));
    }
    for i in 0..4 {
        for j in (i + 1)..4 {
            for k in (0..4).filter(|&k| k != i && k != j) {
                if oracle.vanishing_partial_correlation(vars[i], vars[j], vars[k])? {
                    return Ok(0);
                }
            }
        }
    }
    let mut score = 0;
    for kind in TetradKind::ALL {
        if oracle.tetrad_holds(&Tetrad { quad: vars, kind })? {
            score += 1;
        }
    }
    Ok(score)
}

/// Which branch of `Unclustered` certified the two triples.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnclusteredBranch {
    /// Every cross pair is uncorrelated.
    Uncorrelated,
    /// The tetrad pattern witnesses separate latent parents.
    Witnessed,
}

/// `Unclustered(o1, o2)`, reporting the branch that returned true.
pub fn unclustered_branch<O: ConstraintOracle + ?Sized>(
    o1: [usize; 3],
    o2: [usize; 3],
    oracle: &O,
) -> Result<Option<UnclusteredBranch>> {
    let all = [o1[0], o1[1], o1[2], o2[0], o2[1], o2[2]];
    if !distinct(&all) {
        return Err(Error::InvalidInput(
            "unclustered needs two disjoint triples of distinct variables".into(),
        ));
    }

    let mut all_uncorrelated = true;
    for &a in &o1 {
        for &b in &o2 {
            if !oracle.vanishing_correlation(a, b)? {
                all_uncorrelated = false;
                break;
            }
        }
        if !all_uncorrelated {
            break;
        }
    }
    if all_uncorrelated {
        return Ok(Some(UnclusteredBranch::Uncorrelated));
    }

    // The second branch is a pure conjunction; clauses are evaluated cheapest
    // first, which does not change the result.

    // (a) every pair in the union is correlated
    for i in 0..6 {
        for j in (i + 1)..6 {
            if oracle.vanishing_correlation(all[i], all[j])? {
                return Ok(None);
            }
        }
    }

    // (c), (d): each variable of one triple forms a one-factor quad with the other triple
    for (v_side, other) in [(&o1, &o2), (&o2, &o1)] {
        for &v in v_side.iter() {
            let quad = [v, other[0], other[1], other[2]];
            for kind in [TetradKind::AbCdAcBd, TetradKind::AcBdAdBc] {
                if !oracle.tetrad_holds(&Tetrad { quad, kind })? {
                    return Ok(None);
                }
            }
        }
    }

    // (e) for pairs {i, j} of o1 and {p, q} of o2:
    //     s_ip s_jq = s_iq s_jp  and  s_iq s_jp != s_ij s_pq
    const PAIRS: [(usize, usize); 3] = [(0, 1), (0, 2), (1, 2)];
    for &(a, b) in &PAIRS {
        for &(c, d) in &PAIRS {
            let quad = [o1[a], o1[b], o2[c], o2[d]];
            if !oracle.tetrad_holds(&Tetrad {
                quad,
                kind: TetradKind::AcBdAdBc,
            })? {
                return Ok(None);
            }
            if oracle.tetrad_holds(&Tetrad {
                quad,
                kind: TetradKind::AbCdAdBc,
            })? {
                return Ok(None);
            }
        }
    }

    // (b) no vanishing first-order partial correlation within the union
    if !oracle.partial_clause() {
        return Ok(Some(UnclusteredBranch::Witnessed));
    }
    for i in 0..6 {
        for j in (i + 1)..6 {
            for k in (0..6).filter(|&k| k != i && k != j) {
                if oracle.vanishing_partial_correlation(all[i], all[j], all[k])? {
                    return Ok(None);
                }
            }
        }
    }
    Ok(Some(UnclusteredBranch::Witnessed))
}

/// True only if no variable of `o1` shares a latent parent with any variable
/// of `o2` (under the oracle's decisions).
pub fn unclustered<O: ConstraintOracle + ?Sized>(
    o1: [usize; 3],
    o2: [usize; 3],
    oracle: &O,
) -> Result<bool> {
    Ok(unclustered_branch(o1, o2, oracle)?.is_some())
}
