//! Finite metric spaces with labeled points and an exact distance matrix.
//!
//! A space is a list of distinct string labels together with a symmetric
//! positive matrix satisfying the triangle inequality — checked exactly, not
//! within a tolerance.  Matrix order follows the label list order; whenever
//! an algorithm needs a canonical traversal it uses lexicographic label
//! order (see [`FiniteMetricSpace::lex_order`]).
//!
//! The distinction between a metric and a pseudometric matters here:
//! distinct points at distance zero are rejected, because downstream
//! constructions (amalgamation, one-point extension) would silently identify
//! such points.

use std::collections::HashMap;
use std::fmt::Display;

use thiserror::Error;

use crate::scalar::Scalar;

/// Why a candidate distance matrix is not a metric, with the first witness
/// in axiom order: diagonal, symmetry, positivity, triangle.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricError<T: Scalar> {
    /// d(x,x) must be zero.
    #[error("zero-diagonal violation at {label}: d({label},{label}) = {value}")]
    ZeroDiagonalViolation { label: String, value: T },
    /// d(x,y) must equal d(y,x).
    #[error("symmetry violation at ({x},{y}): {forward} != {backward}")]
    SymmetryViolation {
        x: String,
        y: String,
        forward: T,
        backward: T,
    },
    /// Distinct points must be at strictly positive distance.
    #[error("positivity violation at ({x},{y}): d = {value}")]
    PositivityViolation { x: String, y: String, value: T },
    /// d(x,y) must not exceed d(x,via) + d(via,y).
    #[error("triangle violation at ({x},{y}) via {via}: {lhs} > {rhs}")]
    TriangleViolation {
        x: String,
        y: String,
        via: String,
        lhs: T,
        rhs: T,
    },
    /// Labels must be distinct.
    #[error("duplicate label {label}")]
    DuplicateLabel { label: String },
    /// The matrix must be square and match the label count.
    #[error("matrix shape {rows}x{cols} does not match {labels} labels")]
    ShapeMismatch {
        labels: usize,
        rows: usize,
        cols: usize,
    },
    /// A label was requested that the space does not contain.
    #[error("unknown label {label}")]
    UnknownLabel { label: String },
    /// Subspace restriction needs at least one point.
    #[error("empty subset")]
    EmptySubset,
}

/// A finite metric space: distinct labels and an exact distance matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FiniteMetricSpace<T: Scalar> {
    labels: Vec<String>,
    index: HashMap<String, usize>,
    rows: Vec<Vec<T>>, // row i = distances from point i, validated symmetric
}

impl<T: Scalar> FiniteMetricSpace<T> {
    /// Validates the metric axioms and builds the space.
    ///
    /// Axioms are checked in a fixed order (diagonal, symmetry, positivity,
    /// triangle), each by a row-major scan, and the first violation is
    /// returned with its witnessing points and values.
    pub fn validate_metric(
        labels: Vec<String>,
        rows: Vec<Vec<T>>,
    ) -> Result<Self, MetricError<T>> {
        let n = labels.len();
        if rows.len() != n || rows.iter().any(|r| r.len() != n) {
            return Err(MetricError::ShapeMismatch {
                labels: n,
                rows: rows.len(),
                cols: rows.iter().map(Vec::len).max().unwrap_or(0),
            });
        }
        let mut index = HashMap::with_capacity(n);
        for (i, l) in labels.iter().enumerate() {
            if index.insert(l.clone(), i).is_some() {
                return Err(MetricError::DuplicateLabel { label: l.clone() });
            }
        }
        for (i, row) in rows.iter().enumerate() {
            if !row[i].is_zero() {
                return Err(MetricError::ZeroDiagonalViolation {
                    label: labels[i].clone(),
                    value: row[i].clone(),
                });
            }
        }
        for i in 0..n {
            for j in (i + 1)..n {
                if rows[i][j] != rows[j][i] {
                    return Err(MetricError::SymmetryViolation {
                        x: labels[i].clone(),
                        y: labels[j].clone(),
                        forward: rows[i][j].clone(),
                        backward: rows[j][i].clone(),
                    });
                }
            }
        }
        for i in 0..n {
            for j in (i + 1)..n {
                if rows[i][j] <= T::zero() {
                    return Err(MetricError::PositivityViolation {
                        x: labels[i].clone(),
                        y: labels[j].clone(),
                        value: rows[i][j].clone(),
                    });
                }
            }
        }
        for i in 0..n {
            for j in (i + 1)..n {
                for k in 0..n {
                    if k == i || k == j {
                        continue;
                    }
                    let rhs = rows[i][k].clone() + rows[k][j].clone();
                    if rows[i][j] > rhs {
                        return Err(MetricError::TriangleViolation {
                            x: labels[i].clone(),
                            y: labels[j].clone(),
                            via: labels[k].clone(),
                            lhs: rows[i][j].clone(),
                            rhs,
                        });
                    }
                }
            }
        }
        Ok(FiniteMetricSpace {
            labels,
            index,
            rows,
        })
    }

    /// The one-point space.
    pub fn singleton(label: impl Into<String>) -> Self {
        let label = label.into();
        let mut index = HashMap::new();
        index.insert(label.clone(), 0);
        FiniteMetricSpace {
            labels: vec![label],
            index,
            rows: vec![vec![T::zero()]],
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> &str {
        &self.labels[i]
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.index.get(label).copied()
    }

    pub fn contains_label(&self, label: &str) -> bool {
        self.index.contains_key(label)
    }

    /// Distance by point indices (matrix order).
    pub fn dist(&self, i: usize, j: usize) -> &T {
        &self.rows[i][j]
    }

    /// Distance by labels.
    pub fn dist_by_label(&self, a: &str, b: &str) -> Result<&T, MetricError<T>> {
        let i = self
            .index_of(a)
            .ok_or_else(|| MetricError::UnknownLabel { label: a.into() })?;
        let j = self
            .index_of(b)
            .ok_or_else(|| MetricError::UnknownLabel { label: b.into() })?;
        Ok(self.dist(i, j))
    }

    /// Point indices sorted lexicographically by label — the canonical
    /// enumeration order used by every deterministic algorithm in the crate.
    pub fn lex_order(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.labels.len()).collect();
        idx.sort_by(|&a, &b| self.labels[a].cmp(&self.labels[b]));
        idx
    }

    /// The lexicographically smallest label, if any.
    pub fn lex_first_label(&self) -> Option<&str> {
        self.labels.iter().map(String::as_str).min()
    }

    /// Induced subspace on `subset`, in the order given.
    ///
    /// The inclusion map of the result into `self` is an isometric
    /// embedding by construction.
    pub fn restrict(&self, subset: &[String]) -> Result<Self, MetricError<T>> {
        if subset.is_empty() {
            return Err(MetricError::EmptySubset);
        }
        let mut ids = Vec::with_capacity(subset.len());
        let mut index = HashMap::with_capacity(subset.len());
        for (k, l) in subset.iter().enumerate() {
            let i = self
                .index_of(l)
                .ok_or_else(|| MetricError::UnknownLabel { label: l.clone() })?;
            if index.insert(l.clone(), k).is_some() {
                return Err(MetricError::DuplicateLabel { label: l.clone() });
            }
            ids.push(i);
        }
        let rows: Vec<Vec<T>> = ids
            .iter()
            .map(|&a| ids.iter().map(|&b| self.dist(a, b).clone()).collect())
            .collect();
        Ok(FiniteMetricSpace {
            labels: subset.to_vec(),
            index,
            rows,
        })
    }

    /// Appends a point with the given distances to the existing points,
    /// without re-validating the metric axioms.  Callers must guarantee the
    /// prescription is admissible; every call site in this crate does so via
    /// a Katětov check or a validated construction.
    pub(crate) fn push_point_unchecked(&mut self, label: String, dists: Vec<T>) {
        let n = self.labels.len();
        debug_assert_eq!(dists.len(), n);
        debug_assert!(!self.index.contains_key(&label));
        for (row, v) in self.rows.iter_mut().zip(dists.iter()) {
            row.push(v.clone());
        }
        let mut new_row = dists;
        new_row.push(T::zero());
        self.rows.push(new_row);
        self.index.insert(label.clone(), n);
        self.labels.push(label);
    }

    /// Re-checks all metric axioms on the current matrix.  Used by tests and
    /// by operations that assemble matrices from computed pieces.
    pub fn recheck(&self) -> Result<(), MetricError<T>> {
        Self::validate_metric(self.labels.to_vec(), self.rows.clone()).map(|_| ())
    }
}

impl<T: Scalar> Display for FiniteMetricSpace<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{{")?;
        for (i, l) in self.labels.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{l}")?;
        }
        write!(f, "}} ({} points)", self.labels.len())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::test_support::{rat, space_from_ints};
    use crate::Rational;

    #[test]
    fn two_point_space_validates() {
        let s = space_from_ints(&["a", "b"], &[&[0, 1], &[1, 0]]).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(*s.dist(0, 1), rat(1, 1));
    }

    #[test]
    fn long_edge_is_a_triangle_violation_with_witness() {
        let err = space_from_ints(
            &["a", "b", "c"],
            &[&[0, 1, 3], &[1, 0, 1], &[3, 1, 0]],
        )
        .unwrap_err();
        match err {
            MetricError::TriangleViolation { x, y, via, lhs, rhs } => {
                assert_eq!((x.as_str(), y.as_str(), via.as_str()), ("a", "c", "b"));
                assert_eq!(lhs, rat(3, 1));
                assert_eq!(rhs, rat(2, 1));
            }
            other => panic!("expected triangle violation, got {other:?}"),
        }
    }

    #[test]
    fn distinct_points_at_distance_zero_are_rejected() {
        let err = space_from_ints(&["a", "b"], &[&[0, 0], &[0, 0]]).unwrap_err();
        assert!(matches!(
            err,
            MetricError::PositivityViolation { ref x, ref y, .. }
                if x == "a" && y == "b"
        ));
    }

    #[test]
    fn asymmetry_is_reported_with_both_values() {
        let err = FiniteMetricSpace::validate_metric(
            vec!["a".into(), "b".into()],
            vec![
                vec![rat(0, 1), rat(1, 1)],
                vec![rat(2, 1), rat(0, 1)],
            ],
        )
        .unwrap_err();
        assert!(matches!(err, MetricError::SymmetryViolation { .. }));
    }

    #[test]
    fn nonzero_diagonal_is_reported_first() {
        let err = FiniteMetricSpace::validate_metric(
            vec!["a".into(), "b".into()],
            vec![
                vec![rat(1, 1), rat(0, 1)],
                vec![rat(0, 1), rat(0, 1)],
            ],
        )
        .unwrap_err();
        assert!(matches!(
            err,
            MetricError::ZeroDiagonalViolation { ref label, .. } if label == "a"
        ));
    }

    #[test]
    fn restrict_induces_distances_and_keeps_order() {
        let path = space_from_ints(
            &["a", "b", "c"],
            &[&[0, 1, 2], &[1, 0, 1], &[2, 1, 0]],
        )
        .unwrap();
        let sub = path.restrict(&["c".into(), "a".into()]).unwrap();
        assert_eq!(sub.labels(), &["c".to_string(), "a".to_string()]);
        assert_eq!(*sub.dist(0, 1), rat(2, 1));
        let full = path.restrict(&path.labels().to_vec()).unwrap();
        assert_eq!(full, path);
        let single = path.restrict(&["a".into()]).unwrap();
        assert_eq!(single.len(), 1);
    }

    #[test]
    fn restrict_rejects_unknown_and_empty() {
        let s = space_from_ints(&["a", "b"], &[&[0, 1], &[1, 0]]).unwrap();
        assert!(matches!(
            s.restrict(&["z".into()]),
            Err(MetricError::UnknownLabel { .. })
        ));
        assert!(matches!(
            s.restrict(&[]),
            Err(MetricError::EmptySubset)
        ));
    }

    #[test]
    fn lex_order_sorts_by_label_not_by_position() {
        let s = space_from_ints(
            &["q", "b", "m"],
            &[&[0, 1, 1], &[1, 0, 1], &[1, 1, 0]],
        )
        .unwrap();
        let order = s.lex_order();
        let labels: Vec<&str> = order.iter().map(|&i| s.label(i)).collect();
        assert_eq!(labels, vec!["b", "m", "q"]);
    }

    #[test]
    fn duplicate_labels_rejected() {
        let err = space_from_ints(&["a", "a"], &[&[0, 1], &[1, 0]]).unwrap_err();
        assert!(matches!(err, MetricError::DuplicateLabel { .. }));
    }

    #[test]
    fn recheck_accepts_validated_spaces() {
        let s = space_from_ints(
            &["a", "b", "c"],
            &[&[0, 2, 2], &[2, 0, 2], &[2, 2, 0]],
        )
        .unwrap();
        assert!(s.recheck().is_ok());
        let _: &Rational = s.dist(0, 1);
    }
}
