//! The scalar abstraction underneath every distance value.
//!
//! Everything in this crate computes with *exact* ordered arithmetic: a
//! distance is an element of an ordered field (or ring) in which equality is
//! decidable and `a + b - b == a` holds on the nose.  The [`Scalar`] trait
//! captures precisely that; the crate-level alias [`crate::Rational`]
//! instantiates it with arbitrary-precision rationals, which is what the CLI
//! and all acceptance checks use.
//!
//! The `Ord` bound is load-bearing: it rules out IEEE floats, whose partial
//! order and rounding would silently turn every zero-tolerance identity in
//! this crate into an approximate one.

use std::fmt::{Debug, Display};
use std::hash::Hash;

use num_traits::{FromPrimitive, Num, Signed, ToPrimitive};

/// An exact, totally ordered scalar usable as a metric distance value.
///
/// Implemented automatically for any type with the listed bounds, e.g.
/// `num_rational::BigRational`, `num_rational::Rational64`, or plain big
/// integers.  `f32`/`f64` do not qualify (no total order, no exactness).
///
/// The `ToPrimitive` bound supplies `to_f64`, which hot paths use purely
/// as a *pre-filter*: a float comparison with a generous safety margin may
/// prove that an exact comparison cannot change an outcome and skip it.
/// Every decision that survives the filter is made in exact arithmetic, so
/// conversion error can never alter a result — only how fast it is found.
pub trait Scalar:
    Num + Signed + Ord + Hash + Clone + Debug + Display + FromPrimitive + ToPrimitive
{
}

impl<T> Scalar for T where
    T: Num + Signed + Ord + Hash + Clone + Debug + Display + FromPrimitive + ToPrimitive
{
}

/// Convenience: the scalar `k` as a `T` (used for small grid constants).
pub fn from_u64<T: Scalar>(k: u64) -> T {
    T::from_u64(k).expect("small integer constant must be representable")
}
