//! Scalarisation of Q-vectors for action selection.
//!
//! Linear scalarisation is a weighted sum and is maximised. Chebyshev
//! scalarisation is the weighted L-infinity distance to a utopian point and
//! is minimised.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use smallvec::SmallVec;

use crate::error::{MorlError, Result};

/// Non-negative weights summing to one.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightVector(SmallVec<[f64; 4]>);

impl WeightVector {
    pub const SUM_TOLERANCE: f64 = 1e-9;

    pub fn new(weights: impl IntoIterator<Item = f64>) -> Result<Self> {
        let w: SmallVec<[f64; 4]> = weights.into_iter().collect();
        if w.is_empty() {
            return Err(MorlError::InvalidWeights("no weights given".into()));
        }
        if w.iter().any(|x| !x.is_finite() || *x < 0.0 || *x > 1.0) {
            return Err(MorlError::InvalidWeights(format!(
                "each weight must lie in [0, 1], got {w:?}"
            )));
        }
        let sum: f64 = w.iter().sum();
        if (sum - 1.0).abs() > Self::SUM_TOLERANCE {
            return Err(MorlError::InvalidWeights(format!("weights sum to {sum}, not 1")));
        }
        Ok(Self(w))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

impl fmt::Display for WeightVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, w) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{w}")?;
        }
        Ok(())
    }
}

impl FromStr for WeightVector {
    type Err = MorlError;

    fn from_str(s: &str) -> Result<Self> {
        let parsed: std::result::Result<Vec<f64>, _> =
            s.split(',').map(|x| x.trim().parse::<f64>()).collect();
        let w = parsed.map_err(|e| MorlError::InvalidWeights(format!("`{s}`: {e}")))?;
        Self::new(w)
    }
}

pub fn linear_scalarise(q: &[f64], w: &WeightVector) -> Result<f64> {
    MorlError::check_dim(w.dim(), q.len())?;
    Ok(linear(q, w.values()))
}

pub fn chebyshev_scalarise(q: &[f64], w: &WeightVector, utopia: &[f64]) -> Result<f64> {
    MorlError::check_dim(w.dim(), q.len())?;
    MorlError::check_dim(w.dim(), utopia.len())?;
    Ok(chebyshev(q, w.values(), utopia))
}

#[inline]
fn linear(q: &[f64], w: &[f64]) -> f64 {
    q.iter().zip(w).map(|(q, w)| q * w).sum()
}

#[inline]
fn chebyshev(q: &[f64], w: &[f64], z: &[f64]) -> f64 {
    q.iter()
        .zip(w)
        .zip(z)
        .map(|((q, w), z)| w * (q - z).abs())
        .fold(0.0, f64::max)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ScalariserKind {
    Linear,
    Chebyshev,
}

impl ScalariserKind {
    pub fn token(self) -> &'static str {
        match self {
            ScalariserKind::Linear => "linear",
            ScalariserKind::Chebyshev => "chebyshev",
        }
    }
}

impl fmt::Display for ScalariserKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for ScalariserKind {
    type Err = MorlError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(ScalariserKind::Linear),
            "chebyshev" => Ok(ScalariserKind::Chebyshev),
            other => Err(MorlError::Config(format!(
                "unknown scalariser `{other}` (expected linear or chebyshev)"
            ))),
        }
    }
}

/// Per-objective best Q-value seen so far, offset by `tau` to give the
/// utopian point `z`.
#[derive(Clone, Debug, PartialEq)]
pub struct UtopianTracker {
    best: SmallVec<[f64; 4]>,
    z: SmallVec<[f64; 4]>,
    tau: f64,
}

impl UtopianTracker {
    /// Starts at negative infinity; the first observation sets every component.
    pub fn new(dim: usize, tau: f64) -> Result<Self> {
        if !(tau >= 0.0 && tau.is_finite()) {
            return Err(MorlError::Config(format!("tau must be finite and >= 0, got {tau}")));
        }
        Ok(Self {
            best: SmallVec::from_elem(f64::NEG_INFINITY, dim),
            z: SmallVec::from_elem(f64::NEG_INFINITY, dim),
            tau,
        })
    }

    pub fn observe(&mut self, q: &[f64]) {
        debug_assert_eq!(q.len(), self.best.len());
        for ((b, z), v) in self.best.iter_mut().zip(self.z.iter_mut()).zip(q) {
            if *v > *b {
                *b = *v;
                *z = *v + self.tau;
            }
        }
    }

    /// Functional form of [`observe`](Self::observe).
    pub fn updated(mut self, q: &[f64]) -> Result<Self> {
        MorlError::check_dim(self.best.len(), q.len())?;
        self.observe(q);
        Ok(self)
    }

    pub fn best(&self) -> &[f64] {
        &self.best
    }

    pub fn utopia(&self) -> &[f64] {
        &self.z
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }
}

/// How [`greedy_action`] ranks the actions of a Q-row.
#[derive(Clone, Copy, Debug)]
pub enum SelectionRule<'a> {
    /// Maximise the weighted sum.
    Linear,
    /// Minimise the weighted distance to `utopia`.
    Chebyshev { utopia: &'a [f64] },
}

/// Picks the extremal action of `row`, a flattened `actions x objectives`
/// slice. Ties are broken uniformly at random with `rng`.
pub fn greedy_action<R: Rng + ?Sized>(
    rule: SelectionRule<'_>,
    row: &[f64],
    w: &WeightVector,
    rng: &mut R,
) -> Result<usize> {
    let m = w.dim();
    if row.is_empty() {
        return Err(MorlError::Contract("cannot select from an empty action set".into()));
    }
    if row.len() % m != 0 {
        return Err(MorlError::DimensionMismatch {
            expected: m,
            found: row.len() % m,
        });
    }
    if let SelectionRule::Chebyshev { utopia } = rule {
        MorlError::check_dim(m, utopia.len())?;
    }
    Ok(greedy_unchecked(rule, row, w.values(), rng))
}

pub(crate) fn greedy_unchecked<R: Rng + ?Sized>(
    rule: SelectionRule<'_>,
    row: &[f64],
    w: &[f64],
    rng: &mut R,
) -> usize {
    // Scores are oriented so that larger is better.
    let score = |q: &[f64]| match rule {
        SelectionRule::Linear => linear(q, w),
        SelectionRule::Chebyshev { utopia } => -chebyshev(q, w, utopia),
    };
    argmax_random_tie(row.chunks_exact(w.len()).map(score), rng)
}

/// Index of the largest score, ties broken uniformly with `rng`. A draw is
/// only consumed when there is an actual tie.
pub(crate) fn argmax_random_tie<R: Rng + ?Sized>(
    scores: impl Iterator<Item = f64>,
    rng: &mut R,
) -> usize {
    let mut best = f64::NEG_INFINITY;
    let mut tied: SmallVec<[usize; 8]> = SmallVec::new();
    for (a, s) in scores.enumerate() {
        if s > best {
            best = s;
            tied.clear();
            tied.push(a);
        } else if s == best {
            tied.push(a);
        }
    }
    match tied.len() {
        0 => 0,
        1 => tied[0],
        n => tied[rng.gen_range(0..n)],
    }
}

/// A scalariser bound to its weights, owning the utopian tracker when
/// Chebyshev.
#[derive(Clone, Debug)]
pub struct Scalariser {
    weights: WeightVector,
    tracker: Option<UtopianTracker>,
}

impl Scalariser {
    pub fn new(kind: ScalariserKind, weights: WeightVector, tau: f64) -> Result<Self> {
        let tracker = match kind {
            ScalariserKind::Linear => None,
            ScalariserKind::Chebyshev => Some(UtopianTracker::new(weights.dim(), tau)?),
        };
        Ok(Self { weights, tracker })
    }

    pub fn kind(&self) -> ScalariserKind {
        if self.tracker.is_some() {
            ScalariserKind::Chebyshev
        } else {
            ScalariserKind::Linear
        }
    }

    pub fn weights(&self) -> &WeightVector {
        &self.weights
    }

    pub fn tracker(&self) -> Option<&UtopianTracker> {
        self.tracker.as_ref()
    }

    /// Updates the utopian point from every Q-vector in `row`, then picks
    /// the greedy action.
    pub fn select<R: Rng + ?Sized>(&mut self, row: &[f64], rng: &mut R) -> usize {
        if let Some(t) = self.tracker.as_mut() {
            for q in row.chunks_exact(self.weights.dim()) {
                t.observe(q);
            }
        }
        self.greedy(row, rng)
    }

    /// Greedy action without touching the tracker.
    pub fn greedy<R: Rng + ?Sized>(&self, row: &[f64], rng: &mut R) -> usize {
        let rule = match &self.tracker {
            None => SelectionRule::Linear,
            Some(t) => SelectionRule::Chebyshev { utopia: t.utopia() },
        };
        greedy_unchecked(rule, row, self.weights.values(), rng)
    }
}
