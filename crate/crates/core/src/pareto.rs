//! Objective-space primitives: vectors, Pareto dominance and non-dominated archives.
//!
//! Every objective is maximised. Comparisons are exact; no epsilon is applied
//! anywhere, so identical seeds give identical archives bit for bit.

use std::cmp::Ordering;
use std::fmt;
use std::ops::Deref;

use smallvec::SmallVec;

use crate::error::{MorlError, Result};

/// A point in objective space: a reward, a discounted return or a Q-vector.
///
/// Values are finite and `-0.0` is normalised to `0.0`, which makes bitwise
/// equality coincide with numeric equality.
#[derive(Clone, PartialEq)]
pub struct ObjectiveVector(SmallVec<[f64; 4]>);

impl ObjectiveVector {
    pub fn new(values: impl IntoIterator<Item = f64>) -> Result<Self> {
        let values: SmallVec<[f64; 4]> = values.into_iter().collect();
        if values.is_empty() {
            return Err(MorlError::EmptyVector);
        }
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(MorlError::NonFinite { index, value });
        }
        Ok(Self(values.into_iter().map(|v| v + 0.0).collect()))
    }

    /// Builds a vector from values already known to be finite.
    pub(crate) fn from_finite(values: &[f64]) -> Self {
        debug_assert!(!values.is_empty() && values.iter().all(|v| v.is_finite()));
        Self(values.iter().map(|v| v + 0.0).collect())
    }

    pub fn zeros(dim: usize) -> Self {
        Self(SmallVec::from_elem(0.0, dim))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    /// `self + scale * other`, component-wise.
    pub fn add_scaled(&self, scale: f64, other: &[f64]) -> Self {
        debug_assert_eq!(self.dim(), other.len());
        Self(
            self.0
                .iter()
                .zip(other)
                .map(|(a, b)| a + scale * b + 0.0)
                .collect(),
        )
    }

    /// Total lexicographic order, used to keep archives in a canonical order.
    pub fn lex_cmp(&self, other: &Self) -> Ordering {
        for (a, b) in self.0.iter().zip(&other.0) {
            match a.total_cmp(b) {
                Ordering::Equal => continue,
                ord => return ord,
            }
        }
        self.dim().cmp(&other.dim())
    }
}

impl Deref for ObjectiveVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl fmt::Debug for ObjectiveVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for ObjectiveVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{v}")?;
        }
        write!(f, ")")
    }
}

impl<const N: usize> From<[f64; N]> for ObjectiveVector {
    /// Panics on empty or non-finite input; intended for literals.
    fn from(values: [f64; N]) -> Self {
        Self::new(values).expect("objective vector literal must be non-empty and finite")
    }
}

impl TryFrom<Vec<f64>> for ObjectiveVector {
    type Error = MorlError;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        Self::new(values)
    }
}

/// Slice-level dominance test without dimension checks.
#[inline]
pub(crate) fn dominates_slice(a: &[f64], b: &[f64]) -> bool {
    let mut strictly = false;
    for (x, y) in a.iter().zip(b) {
        if x < y {
            return false;
        }
        if x > y {
            strictly = true;
        }
    }
    strictly
}

/// `a` Pareto-dominates `b`: at least as good everywhere, strictly better somewhere.
pub fn dominates(a: &ObjectiveVector, b: &ObjectiveVector) -> Result<bool> {
    MorlError::check_dim(a.dim(), b.dim())?;
    Ok(dominates_slice(a, b))
}

/// A set of mutually non-dominated, distinct points kept in lexicographic order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParetoArchive {
    points: Vec<ObjectiveVector>,
}

impl ParetoArchive {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> Option<usize> {
        self.points.first().map(|p| p.dim())
    }

    pub fn points(&self) -> &[ObjectiveVector] {
        &self.points
    }

    pub fn contains(&self, p: &ObjectiveVector) -> bool {
        self.points.binary_search_by(|q| q.lex_cmp(p)).is_ok()
    }

    /// Inserts `p` unless it is dominated by or equal to an archived point.
    /// Archived points that `p` dominates are evicted. Returns whether `p` was added.
    pub fn insert(&mut self, p: ObjectiveVector) -> Result<bool> {
        if let Some(dim) = self.dim() {
            MorlError::check_dim(dim, p.dim())?;
        }
        if self
            .points
            .iter()
            .any(|q| q == &p || dominates_slice(q, &p))
        {
            return Ok(false);
        }
        self.points.retain(|q| !dominates_slice(&p, q));
        let at = self
            .points
            .binary_search_by(|q| q.lex_cmp(&p))
            .unwrap_or_else(|i| i);
        self.points.insert(at, p);
        Ok(true)
    }

    pub fn iter(&self) -> std::slice::Iter<'_, ObjectiveVector> {
        self.points.iter()
    }

    pub fn into_points(self) -> Vec<ObjectiveVector> {
        self.points
    }
}

impl Deref for ParetoArchive {
    type Target = [ObjectiveVector];

    fn deref(&self) -> &[ObjectiveVector] {
        &self.points
    }
}

impl<'a> IntoIterator for &'a ParetoArchive {
    type Item = &'a ObjectiveVector;
    type IntoIter = std::slice::Iter<'a, ObjectiveVector>;

    fn into_iter(self) -> Self::IntoIter {
        self.points.iter()
    }
}

pub(crate) fn check_common_dim(points: &[ObjectiveVector]) -> Result<Option<usize>> {
    let Some(first) = points.first() else {
        return Ok(None);
    };
    let dim = first.dim();
    for p in points {
        MorlError::check_dim(dim, p.dim())?;
    }
    Ok(Some(dim))
}

/// Keeps exactly the input points that no other input point dominates, once each.
pub fn nondominated_filter(points: &[ObjectiveVector]) -> Result<ParetoArchive> {
    check_common_dim(points)?;
    Ok(nondominated_unchecked(points.to_vec()))
}

/// A dominating point is lexicographically greater, so after a descending sort
/// each candidate only needs to be checked against the points already kept.
pub(crate) fn nondominated_unchecked(mut points: Vec<ObjectiveVector>) -> ParetoArchive {
    points.sort_by(|a, b| b.lex_cmp(a));
    points.dedup();
    let mut kept: Vec<ObjectiveVector> = Vec::with_capacity(points.len());
    for p in points {
        if !kept.iter().any(|q| dominates_slice(q, &p)) {
            kept.push(p);
        }
    }
    kept.reverse();
    ParetoArchive { points: kept }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v<const N: usize>(x: [f64; N]) -> ObjectiveVector {
        ObjectiveVector::from(x)
    }

    #[test]
    fn componentwise_dominance() {
        assert!(dominates(&v([2.0, 3.0]), &v([1.0, 3.0])).unwrap());
        assert!(!dominates(&v([1.0, 3.0]), &v([2.0, 3.0])).unwrap());
        assert!(!dominates(&v([1.0, 3.0]), &v([1.0, 3.0])).unwrap());
    }

    #[test]
    fn incomparable_points() {
        assert!(!dominates(&v([1.0, 2.0]), &v([2.0, 1.0])).unwrap());
        assert!(!dominates(&v([2.0, 1.0]), &v([1.0, 2.0])).unwrap());
        let shallow = v([1.0, -1.0]);
        let deep = v([18.61, -8.64]);
        assert!(!dominates(&shallow, &deep).unwrap());
        assert!(!dominates(&deep, &shallow).unwrap());
    }

    #[test]
    fn dominance_dimension_mismatch() {
        let err = dominates(&v([1.0]), &v([1.0, 2.0])).unwrap_err();
        assert!(matches!(err, MorlError::DimensionMismatch { .. }));
    }

    #[test]
    fn rejects_non_finite_and_empty() {
        assert!(matches!(
            ObjectiveVector::new([1.0, f64::NAN]),
            Err(MorlError::NonFinite { index: 1, .. })
        ));
        assert!(matches!(
            ObjectiveVector::new(Vec::new()),
            Err(MorlError::EmptyVector)
        ));
    }

    #[test]
    fn negative_zero_is_normalised() {
        assert_eq!(v([-0.0, 1.0]), v([0.0, 1.0]));
        assert_eq!(v([-0.0])[0].to_bits(), 0.0f64.to_bits());
    }

    #[test]
    fn filter_drops_dominated() {
        let nd = nondominated_filter(&[v([1.0, 2.0]), v([2.0, 1.0]), v([0.0, 0.0])]).unwrap();
        assert_eq!(nd.points(), &[v([1.0, 2.0]), v([2.0, 1.0])]);
    }

    #[test]
    fn filter_singleton_and_empty() {
        assert_eq!(nondominated_filter(&[v([5.0, 5.0])]).unwrap().points(), &[v([5.0, 5.0])]);
        assert!(nondominated_filter(&[]).unwrap().is_empty());
    }

    #[test]
    fn filter_deduplicates() {
        let nd = nondominated_filter(&[v([1.0, 2.0]), v([1.0, 2.0]), v([2.0, 1.0])]).unwrap();
        assert_eq!(nd.len(), 2);
    }

    #[test]
    fn filter_dimension_mismatch() {
        assert!(nondominated_filter(&[v([1.0, 2.0]), v([1.0])]).is_err());
    }

    #[test]
    fn archive_insert_evicts_and_rejects() {
        let mut a = ParetoArchive::new();
        assert!(a.insert(v([1.0, 1.0])).unwrap());
        assert!(!a.insert(v([1.0, 1.0])).unwrap());
        assert!(!a.insert(v([0.0, 1.0])).unwrap());
        assert!(a.insert(v([0.0, 3.0])).unwrap());
        assert!(a.insert(v([2.0, 2.0])).unwrap());
        assert_eq!(a.points(), &[v([0.0, 3.0]), v([2.0, 2.0])]);
        assert!(a.contains(&v([2.0, 2.0])));
        assert!(!a.contains(&v([1.0, 1.0])));
        assert!(a.insert(v([1.0])).is_err());
    }
}
