//! Exact-arithmetic toolkit for finite metric spaces.
//!
//! Everything here is built from one move: adjoining a point whose
//! distances are prescribed by a Katětov function, the one-point case of
//! metric amalgamation.  Iterating that move yields amalgamated unions of
//! spaces, staged approximants saturated enough to absorb every small
//! space over a distance grid, back-and-forth extensions of partial
//! isometries to total ones, and tower constructions whose distance
//! identities are checked exactly.  All arithmetic is exact — distances
//! are arbitrary-precision rationals, every identity is an equality, and
//! every seeded construction is reproducible byte for byte.

pub mod amalgam;
pub mod builder;
pub mod cli;
pub mod dap;
pub mod generator;
pub mod grid;
pub mod io;
pub mod isometry;
pub mod katetov;
pub mod rng;
pub mod scalar;
pub mod space;

/// The concrete scalar used throughout the binary and the test suites:
/// arbitrary-precision rationals.
pub type Rational = num_rational::BigRational;

pub use amalgam::{amalgamated_union, AmalgamError, AmalgamResult, AmalgamSpec, NamingPolicy};
pub use builder::{Approximant, BuilderError, EmbedMode};
pub use dap::{
    dap_construct, dap_verify, graph_space, CheckKind, DapCheck, DapError, DapInstance,
    DapReport, DapStep, DapTrace, GraphSpace,
};
pub use generator::{
    enumerate_spaces, random_amalgam_spec, random_dap_instance, random_katetov_instance,
    random_space, sample_distance, GenerateError,
};
pub use io::{
    parse_families, parse_katetov, parse_labeled_values, parse_pairs, parse_sidecar,
    parse_space, parse_weights, serialize_labeled_values, serialize_pairs, serialize_sidecar,
    serialize_space, FormatError,
};
pub use grid::{DistanceGrid, GridParameterError};
pub use isometry::{find_embeddings, IsometryError, PartialIsometry};
pub use katetov::{
    admissible_interval, maximal_extension, one_point_extension, AdmissibleInterval,
    KatetovError, KatetovFunction,
};
pub use rng::SplitMix64;
pub use scalar::Scalar;
pub use space::{FiniteMetricSpace, MetricError};
