//! Finite distance grids {k/q : 1 ≤ k ≤ B}: the positive rational values a
//! sampled or enumerated metric is allowed to use.

use thiserror::Error;

use crate::katetov::AdmissibleInterval;
use crate::scalar::{from_u64, Scalar};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("grid parameters must be positive: q={q}, max_numerator={max_numerator}")]
pub struct GridParameterError {
    pub q: u64,
    pub max_numerator: u64,
}

/// The grid {k/q : 1 ≤ k ≤ max_numerator}, finite and strictly positive.
/// No arithmetic closure is assumed — sums and differences of grid values
/// usually leave the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DistanceGrid {
    q: u64,
    max_numerator: u64,
}

impl DistanceGrid {
    pub fn new(q: u64, max_numerator: u64) -> Result<Self, GridParameterError> {
        if q == 0 || max_numerator == 0 {
            return Err(GridParameterError { q, max_numerator });
        }
        Ok(DistanceGrid { q, max_numerator })
    }

    pub fn denominator(&self) -> u64 {
        self.q
    }

    pub fn max_numerator(&self) -> u64 {
        self.max_numerator
    }

    pub fn len(&self) -> usize {
        self.max_numerator as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// The k-th grid value (1-based numerator) as an exact scalar.
    pub fn value<T: Scalar>(&self, k: u64) -> T {
        debug_assert!(k >= 1 && k <= self.max_numerator);
        let v = from_u64::<T>(k) / from_u64::<T>(self.q);
        debug_assert!(
            v.clone() * from_u64::<T>(self.q) == from_u64::<T>(k),
            "scalar type must divide exactly by the grid denominator"
        );
        v
    }

    /// All grid values in ascending order.
    pub fn values<T: Scalar>(&self) -> Vec<T> {
        (1..=self.max_numerator).map(|k| self.value(k)).collect()
    }

    /// The largest grid value.
    pub fn max_value<T: Scalar>(&self) -> T {
        self.value(self.max_numerator)
    }

    /// Grid values lying inside the interval, ascending.
    pub fn values_in<T: Scalar>(&self, interval: &AdmissibleInterval<T>) -> Vec<T> {
        self.values::<T>()
            .into_iter()
            .filter(|v| interval.contains(v))
            .collect()
    }

    pub fn contains<T: Scalar>(&self, v: &T) -> bool {
        self.values::<T>().iter().any(|g| g == v)
    }
}
