//! Tetrad differences and the two significance tests for a vanishing tetrad.
//!
//! For four variables `(A, B, C, D)` the three covariance products are the
//! pairings `AB|CD`, `AC|BD` and `AD|BC`; a tetrad constraint equates two of
//! them. The difference is always "left product minus right product".

use std::fmt;

use nalgebra::Matrix4;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{MomentCache, SignificanceConfig, TestKind, TestOutcome};

/// Which two pairings of the quad a constraint equates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TetradKind {
    /// `σAB σCD = σAC σBD`
    AbCdAcBd,
    /// `σAC σBD = σAD σBC`
    AcBdAdBc,
    /// `σAB σCD = σAD σBC`
    AbCdAdBc,
}

impl TetradKind {
    pub const ALL: [TetradKind; 3] = [
        TetradKind::AbCdAcBd,
        TetradKind::AcBdAdBc,
        TetradKind::AbCdAdBc,
    ];

    /// Pairing ids (0 = `AB|CD`, 1 = `AC|BD`, 2 = `AD|BC`) of the two sides.
    fn sides(self) -> (usize, usize) {
        match self {
            TetradKind::AbCdAcBd => (0, 1),
            TetradKind::AcBdAdBc => (1, 2),
            TetradKind::AbCdAdBc => (0, 2),
        }
    }
}

/// Position pairs of each pairing.
const PAIRINGS: [[(usize, usize); 2]; 3] = [[(0, 1), (2, 3)], [(0, 2), (1, 3)], [(0, 3), (1, 2)]];

/// A tetrad constraint over four distinct variables (indices into a
/// [`MomentCache`]).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Tetrad {
    pub quad: [usize; 4],
    pub kind: TetradKind,
}

/// Order-free identity of a tetrad constraint: the sorted quad plus the
/// pairing the constraint does not involve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CanonicalTetrad {
    pub quad: [usize; 4],
    /// Pairing of the sorted quad left out (0 = `ab|cd`, 1 = `ac|bd`, 2 = `ad|bc`).
    pub excluded: u8,
}

impl CanonicalTetrad {
    pub fn new(quad: [usize; 4], excluded: u8) -> Self {
        debug_assert!(quad.windows(2).all(|w| w[0] < w[1]) && excluded < 3);
        Self { quad, excluded }
    }

    /// Representative [`Tetrad`] of the same constraint.
    pub fn tetrad(self) -> Tetrad {
        let kind = match self.excluded {
            0 => TetradKind::AcBdAdBc,
            1 => TetradKind::AbCdAdBc,
            _ => TetradKind::AbCdAcBd,
        };
        Tetrad {
            quad: self.quad,
            kind,
        }
    }
}

impl Tetrad {
    pub fn new(quad: [usize; 4], kind: TetradKind) -> Result<Self> {
        for i in 0..4 {
            for j in (i + 1)..4 {
                if quad[i] == quad[j] {
                    return Err(Error::InvalidInput(
                        "tetrad variables must be distinct".into(),
                    ));
                }
            }
        }
        Ok(Self { quad, kind })
    }

    pub fn from_labels(cache: &MomentCache, labels: [&str; 4], kind: TetradKind) -> Result<Self> {
        let mut quad = [0; 4];
        for (q, l) in quad.iter_mut().zip(labels) {
            *q = cache.index_of(l)?;
        }
        Self::new(quad, kind)
    }

    fn pair(&self, pairing: usize, k: usize) -> (usize, usize) {
        let (a, b) = PAIRINGS[pairing][k];
        (self.quad[a], self.quad[b])
    }

    /// Canonical pairing id of one of this tetrad's pairings, relative to the
    /// sorted quad: determined by the partner of the smallest variable.
    fn canonical_pairing(&self, pairing: usize, sorted: &[usize; 4]) -> u8 {
        let min = sorted[0];
        let partner = PAIRINGS[pairing]
            .iter()
            .find_map(|&(a, b)| {
                let (x, y) = (self.quad[a], self.quad[b]);
                if x == min {
                    Some(y)
                } else if y == min {
                    Some(x)
                } else {
                    None
                }
            })
            .expect("every pairing covers all four variables");
        (sorted[1..].iter().position(|&v| v == partner).unwrap()) as u8
    }

    pub fn canonical(&self) -> CanonicalTetrad {
        let mut sorted = self.quad;
        sorted.sort_unstable();
        let (l, r) = self.kind.sides();
        let cl = self.canonical_pairing(l, &sorted);
        let cr = self.canonical_pairing(r, &sorted);
        CanonicalTetrad::new(sorted, 3 - cl - cr)
    }

    /// Pairs (as variable index pairs) of the pairing this constraint leaves
    /// out; the tetrad difference is, up to sign, the determinant of the
    /// cross-covariance block between these two pairs.
    fn excluded_pairs(&self) -> [(usize, usize); 2] {
        let (l, r) = self.kind.sides();
        let e = 3 - l - r;
        [self.pair(e, 0), self.pair(e, 1)]
    }
}

impl fmt::Display for Tetrad {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [a, b, c, d] = self.quad;
        let s = |i: usize, j: usize| format!("s{i},{j}");
        let (l, r) = self.kind.sides();
        let prod = |p: usize| {
            let [(w, x), (y, z)] = PAIRINGS[p];
            let q = [a, b, c, d];
            format!("{}*{}", s(q[w], q[x]), s(q[y], q[z]))
        };
        write!(f, "{} = {}", prod(l), prod(r))
    }
}

fn product(cache: &MomentCache, t: &Tetrad, pairing: usize) -> f64 {
    let (a, b) = t.pair(pairing, 0);
    let (c, d) = t.pair(pairing, 1);
    cache.cov(a, b) * cache.cov(c, d)
}

fn check_indices(cache: &MomentCache, t: &Tetrad) -> Result<()> {
    for &i in &t.quad {
        if i >= cache.n_vars() {
            return Err(Error::UnknownLabel(format!("#{i}")));
        }
    }
    Ok(())
}

/// Left product minus right product of the chosen constraint.
pub fn tetrad_difference(cache: &MomentCache, t: &Tetrad) -> Result<f64> {
    check_indices(cache, t)?;
    let (l, r) = t.kind.sides();
    Ok(product(cache, t, l) - product(cache, t, r))
}

fn describe(cache: &MomentCache, t: &Tetrad) -> String {
    let names: Vec<&str> = t.quad.iter().map(|&i| cache.label(i)).collect();
    format!("{:?} over ({})", t.kind, names.join(", "))
}

fn require_samples(cache: &MomentCache) -> Result<f64> {
    let n = cache.n_samples();
    if n <= 4 {
        return Err(Error::InvalidInput(format!(
            "tetrad tests need more than 4 samples, got {n}"
        )));
    }
    Ok(n as f64)
}

/// Normal-theory sampling variance of a tetrad difference: with the
/// constraint written as `det Σ[{u1,u2},{v1,v2}]`,
/// `Var = (D_u D_v (N+1)/(N-1) - D) / (N-2)` where `D_u`, `D_v` are the 2x2
/// determinants of each pair and `D` the 4x4 determinant.
pub fn wishart_variance(cache: &MomentCache, t: &Tetrad) -> Result<f64> {
    check_indices(cache, t)?;
    let n = require_samples(cache)?;
    let [(u1, u2), (v1, v2)] = t.excluded_pairs();
    let det2 = |a: usize, b: usize| cache.cov(a, a) * cache.cov(b, b) - cache.cov(a, b).powi(2);
    let q = [u1, u2, v1, v2];
    let det4 = Matrix4::from_fn(|i, j| cache.cov(q[i], q[j])).determinant();
    Ok((det2(u1, u2) * det2(v1, v2) * (n + 1.0) / (n - 1.0) - det4) / (n - 2.0))
}

/// Wishart test of a vanishing tetrad difference.
pub fn wishart_test(
    cache: &MomentCache,
    t: &Tetrad,
    cfg: &SignificanceConfig,
) -> Result<TestOutcome> {
    let diff = tetrad_difference(cache, t)?;
    if cfg.population_mode {
        return Ok(TestOutcome::population(diff));
    }
    let var = wishart_variance(cache, t)?;
    if !(var > 0.0) {
        return Err(Error::NonPositiveVariance(describe(cache, t)));
    }
    Ok(TestOutcome::from_z(diff, diff / var.sqrt(), cfg))
}

/// Delta-method variance of a tetrad difference built from fourth moments:
/// `g' Ω g / N` with `g` the gradient with respect to the involved
/// covariances and `Ω[(ij),(kl)] = μ_ijkl - σ_ij σ_kl`.
pub fn bollen_variance(cache: &MomentCache, t: &Tetrad) -> Result<f64> {
    check_indices(cache, t)?;
    let n = require_samples(cache)?;
    let fm = cache.fourth_moments().ok_or(Error::MissingFourthMoments)?;
    let (l, r) = t.kind.sides();
    let (p1, p2) = (t.pair(l, 0), t.pair(l, 1));
    let (q1, q2) = (t.pair(r, 0), t.pair(r, 1));
    let s = |(a, b): (usize, usize)| cache.cov(a, b);
    let terms = [(p1, s(p2)), (p2, s(p1)), (q1, -s(q2)), (q2, -s(q1))];
    // Moments about the mean with denominator N, to match the fourth-moment table.
    let shrink = (n - 1.0) / n;
    let mut var = 0.0;
    for &((a, b), ga) in &terms {
        for &((c, d), gb) in &terms {
            let omega = fm.get(a, b, c, d) - shrink * shrink * cache.cov(a, b) * cache.cov(c, d);
            var += ga * gb * omega;
        }
    }
    Ok(var / n)
}

/// Asymptotically distribution-free test of a vanishing tetrad difference.
pub fn bollen_test(
    cache: &MomentCache,
    t: &Tetrad,
    cfg: &SignificanceConfig,
) -> Result<TestOutcome> {
    if cache.fourth_moments().is_none() {
        return Err(Error::MissingFourthMoments);
    }
    let diff = tetrad_difference(cache, t)?;
    if cfg.population_mode {
        return Ok(TestOutcome::population(diff));
    }
    let var = bollen_variance(cache, t)?;
    if !(var > 0.0) {
        return Err(Error::NonPositiveVariance(describe(cache, t)));
    }
    Ok(TestOutcome::from_z(diff, diff / var.sqrt(), cfg))
}

/// Runs the test selected by `cfg.test_kind`.
pub fn tetrad_test(
    cache: &MomentCache,
    t: &Tetrad,
    cfg: &SignificanceConfig,
) -> Result<TestOutcome> {
    match cfg.test_kind {
        TestKind::Wishart => wishart_test(cache, t, cfg),
        TestKind::Bollen => bollen_test(cache, t, cfg),
    }
}
