//! Katětov functions: distance prescriptions that a new point could realize.
//!
//! A function f on a subset S of a space is admissible when
//! |f(x) − f(y)| ≤ d(x,y) ≤ f(x) + f(y) for all x, y in S — exactly the
//! condition under which a new point at distance f(x) from each x extends
//! the metric.  The admissible interval for a further target point is the
//! set of values that keep this condition; it is never empty for a valid f,
//! a fact the proptests below hammer on.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::scalar::Scalar;
use crate::space::FiniteMetricSpace;

/// Why a prescription cannot be realized or even stated.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum KatetovError<T: Scalar> {
    #[error("unknown label {label}")]
    UnknownLabel { label: String },
    /// Lexicographically first pair on which the admissibility condition
    /// |f(x)−f(y)| ≤ d(x,y) ≤ f(x)+f(y) fails.
    #[error("Katetov violation on ({x},{y}): f={fx},{fy} against distance {distance}")]
    KatetovViolation {
        x: String,
        y: String,
        fx: T,
        fy: T,
        distance: T,
    },
    #[error("duplicate label {label}")]
    DuplicateLabel { label: String },
    #[error("no value assigned for {label}")]
    MissingValue { label: String },
    #[error("non-positive value {value} at {label}")]
    NonPositiveValue { label: String, value: T },
    #[error("empty function has no extension support")]
    EmptyFunction,
}

/// A partial assignment of prospective distances, keyed by label.
///
/// Iteration order is lexicographic in the label, which every deterministic
/// consumer in this crate relies on.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct KatetovFunction<T: Scalar> {
    values: BTreeMap<String, T>,
}

impl<T: Scalar> KatetovFunction<T> {
    pub fn new() -> Self {
        KatetovFunction {
            values: BTreeMap::new(),
        }
    }

    pub fn from_pairs<I, S>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (S, T)>,
        S: Into<String>,
    {
        KatetovFunction {
            values: pairs.into_iter().map(|(l, v)| (l.into(), v)).collect(),
        }
    }

    pub fn assign(&mut self, label: impl Into<String>, value: T) {
        self.values.insert(label.into(), value);
    }

    pub fn value(&self, label: &str) -> Option<&T> {
        self.values.get(label)
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    /// Assigned labels in lexicographic order.
    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.values.keys().map(|s| s.as_str())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &T)> {
        self.values.iter().map(|(l, v)| (l.as_str(), v))
    }

    pub fn is_total_on(&self, space: &FiniteMetricSpace<T>) -> bool {
        space.labels().iter().all(|l| self.values.contains_key(l))
    }

    /// Checks that every assigned label exists in `space`, every value is
    /// positive, and the admissibility condition holds pairwise.  The
    /// violation witness is the lexicographically first offending pair.
    pub fn check_admissible(
        &self,
        space: &FiniteMetricSpace<T>,
    ) -> Result<(), KatetovError<T>> {
        for (label, value) in &self.values {
            if !space.contains_label(label) {
                return Err(KatetovError::UnknownLabel {
                    label: label.clone(),
                });
            }
            if *value <= T::zero() {
                return Err(KatetovError::NonPositiveValue {
                    label: label.clone(),
                    value: value.clone(),
                });
            }
        }
        let assigned: Vec<(&String, &T)> = self.values.iter().collect();
        for i in 0..assigned.len() {
            for j in (i + 1)..assigned.len() {
                let (x, fx) = assigned[i];
                let (y, fy) = assigned[j];
                let d = space
                    .dist_by_label(x, y)
                    .expect("labels were checked above")
                    .clone();
                let diff = (fx.clone() - fy.clone()).abs();
                let sum = fx.clone() + fy.clone();
                if diff > d || d > sum {
                    return Err(KatetovError::KatetovViolation {
                        x: x.clone(),
                        y: y.clone(),
                        fx: fx.clone(),
                        fy: fy.clone(),
                        distance: d,
                    });
                }
            }
        }
        Ok(())
    }
}

/// The set of values a further distance may take without breaking
/// admissibility.
///
/// For a nonempty function this is the closed interval [lo, hi].  For an
/// empty function there is no constraint beyond positivity, reported as an
/// exclusive lower bound 0 with no upper bound.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdmissibleInterval<T: Scalar> {
    pub lo: T,
    pub lo_exclusive: bool,
    /// `None` means unbounded above.
    pub hi: Option<T>,
}

impl<T: Scalar> AdmissibleInterval<T> {
    pub fn contains(&self, value: &T) -> bool {
        let above = if self.lo_exclusive {
            *value > self.lo
        } else {
            *value >= self.lo
        };
        let below = match &self.hi {
            Some(h) => *value <= *h,
            None => true,
        };
        above && below
    }

    pub fn is_degenerate(&self) -> bool {
        match &self.hi {
            Some(h) => !self.lo_exclusive && self.lo == *h,
            None => false,
        }
    }
}

impl<T: Scalar> fmt::Display for AdmissibleInterval<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let open = if self.lo_exclusive { '(' } else { '[' };
        match &self.hi {
            Some(h) => write!(f, "{}{}, {}]", open, self.lo, h),
            None => write!(f, "{}{}, unbounded)", open, self.lo),
        }
    }
}

/// Computes the interval of distances to `target` compatible with the
/// already-assigned values of `f`:
/// lo = max |f(x) − d(x,target)|, hi = min (f(x) + d(x,target)).
///
/// An empty `f` yields the unconstrained interval (0, unbounded).  For a
/// valid `f` the interval is guaranteed nonempty.
pub fn admissible_interval<T: Scalar>(
    space: &FiniteMetricSpace<T>,
    f: &KatetovFunction<T>,
    target: &str,
) -> Result<AdmissibleInterval<T>, KatetovError<T>> {
    let t = space
        .index_of(target)
        .ok_or_else(|| KatetovError::UnknownLabel {
            label: target.to_string(),
        })?;
    let mut lo: Option<T> = None;
    let mut hi: Option<T> = None;
    for (label, value) in f.iter() {
        let x = space
            .index_of(label)
            .ok_or_else(|| KatetovError::UnknownLabel {
                label: label.to_string(),
            })?;
        let d = space.dist(x, t).clone();
        let low = (value.clone() - d.clone()).abs();
        let high = value.clone() + d;
        lo = Some(match lo {
            Some(cur) => cur.max(low),
            None => low,
        });
        hi = Some(match hi {
            Some(cur) => cur.min(high),
            None => high,
        });
    }
    match (lo, hi) {
        (Some(lo), Some(hi)) => Ok(AdmissibleInterval {
            lo,
            lo_exclusive: false,
            hi: Some(hi),
        }),
        _ => Ok(AdmissibleInterval {
            lo: T::zero(),
            lo_exclusive: true,
            hi: None,
        }),
    }
}

/// Adjoins a new point whose distances are prescribed by the total
/// function `f`.  Fails with the lexicographically first violating pair
/// when `f` is not admissible, and with `DuplicateLabel` when the new
/// label already exists.  The result always passes `validate_metric`.
pub fn one_point_extension<T: Scalar>(
    space: &FiniteMetricSpace<T>,
    f: &KatetovFunction<T>,
    new_label: &str,
) -> Result<FiniteMetricSpace<T>, KatetovError<T>> {
    if space.contains_label(new_label) {
        return Err(KatetovError::DuplicateLabel {
            label: new_label.to_string(),
        });
    }
    for l in space.labels() {
        if f.value(l).is_none() {
            return Err(KatetovError::MissingValue { label: l.clone() });
        }
    }
    f.check_admissible(space)?;
    let row: Vec<T> = space
        .labels()
        .iter()
        .map(|l| f.value(l).expect("totality was checked").clone())
        .collect();
    let mut out = space.clone();
    out.push_point_unchecked(new_label.to_string(), row);
    debug_assert!(out.recheck().is_ok());
    Ok(out)
}

/// Extends a nonempty partial prescription to a total one by the maximal
/// formula f̂(y) = min over assigned x of (f(x) + d(x,y)), keeping the
/// assigned values.  The result is always admissible and total.
pub fn maximal_extension<T: Scalar>(
    space: &FiniteMetricSpace<T>,
    f: &KatetovFunction<T>,
) -> Result<KatetovFunction<T>, KatetovError<T>> {
    if f.is_empty() {
        return Err(KatetovError::EmptyFunction);
    }
    f.check_admissible(space)?;
    let mut out = KatetovFunction::new();
    for y in space.labels() {
        if let Some(v) = f.value(y) {
            out.assign(y.clone(), v.clone());
            continue;
        }
        let yi = space.index_of(y).expect("label from the space itself");
        let mut best: Option<T> = None;
        for (x, fx) in f.iter() {
            let xi = space.index_of(x).ok_or_else(|| KatetovError::UnknownLabel {
                label: x.to_string(),
            })?;
            let cand = fx.clone() + space.dist(xi, yi).clone();
            best = Some(match best {
                Some(cur) => cur.min(cand),
                None => cand,
            });
        }
        out.assign(y.clone(), best.expect("f is nonempty"));
    }
    Ok(out)
}

/// Convenience used by agreement tests: the matrix that a prescribed
/// extension *would* produce, handed straight to the metric validator
/// without any admissibility pre-check.
pub fn raw_extension_matrix<T: Scalar>(
    space: &FiniteMetricSpace<T>,
    f: &KatetovFunction<T>,
    new_label: &str,
) -> Result<(Vec<String>, Vec<Vec<T>>), KatetovError<T>> {
    for l in space.labels() {
        if f.value(l).is_none() {
            return Err(KatetovError::MissingValue { label: l.clone() });
        }
    }
    let n = space.len();
    let mut labels: Vec<String> = space.labels().to_vec();
    labels.push(new_label.to_string());
    let mut rows: Vec<Vec<T>> = Vec::with_capacity(n + 1);
    for i in 0..n {
        let mut row: Vec<T> = (0..n).map(|j| space.dist(i, j).clone()).collect();
        row.push(f.value(space.label(i)).expect("checked total").clone());
        rows.push(row);
    }
    let mut last: Vec<T> = space
        .labels()
        .iter()
        .map(|l| f.value(l).expect("checked total").clone())
        .collect();
    last.push(T::zero());
    rows.push(last);
    Ok((labels, rows))
}

/// Validates the raw extension matrix; used as the independent oracle that
/// must agree with `one_point_extension`.
pub fn extension_matrix_is_metric<T: Scalar>(
    space: &FiniteMetricSpace<T>,
    f: &KatetovFunction<T>,
    new_label: &str,
) -> Result<bool, KatetovError<T>> {
    let (labels, rows) = raw_extension_matrix(space, f, new_label)?;
    Ok(FiniteMetricSpace::validate_metric(labels, rows).is_ok())
}
