//! # protofit
//!
//! Least-squares prototypes for groups of sampled curves, with cheap
//! prototype updates as group membership changes and an exact test for when
//! a monomial basis with missing powers still gives an invertible
//! normal-equations matrix.
//!
//! The pieces, bottom up:
//!
//! - [`basis`]: exponent sets, time grids, design matrices, generalized
//!   Vandermonde matrices and their determinants.
//! - [`schur`]: partitions, two independent Schur polynomial evaluators, and
//!   [`is_gram_invertible`], which turns "some `k × k` minor of the design
//!   matrix is nonzero" into "some Schur value is nonzero".
//! - [`lsq`]: centroids, the collapsed normal equations, and the reusable
//!   [`SolverHandle`] (explicit inverse, or SVD pseudo-inverse when the
//!   basis is singular on the grid).
//! - [`cluster`]: k-means over curves and incremental membership moves.
//! - [`cli`]: the `protofit` command-line tool.
//!
//! ```
//! use protofit::{fit_prototype, is_gram_invertible, ExponentSet, GramCheck, SignalSet, TimeGrid};
//!
//! // t is missing from the basis {1, t²}
//! let basis = ExponentSet::new([0, 2]).unwrap();
//! let grid = TimeGrid::new(vec![0.5, 1.0, 2.0]).unwrap();
//! assert!(is_gram_invertible(&basis, &grid, &GramCheck::default()).unwrap().invertible);
//!
//! let signals = SignalSet::from_columns(grid, &[vec![1.25, 2.0, 5.0], vec![1.25, 2.0, 5.0]]).unwrap();
//! let p = fit_prototype(&basis, &signals).unwrap();
//! assert!((p.evaluate(3.0) - 10.0).abs() < 1e-10);
//! ```
//!
//! The guide under `book/` walks through each piece; its code listings are
//! compiled and run as doctests of this crate.

pub mod basis;
pub mod cli;
pub mod cluster;
pub mod error;
pub mod lsq;
pub mod schur;

pub use basis::{
    design_matrix, generalized_vandermonde, make_exponent_set, vandermonde_det, DesignMatrix, ExponentSet, TimeGrid,
};
pub use cluster::{apply_membership_moves, assign_signals, kmeans_curves, ClusterState, HandleBank, KMeansConfig, Move};
pub use error::{Error, Result};
pub use lsq::{
    assemble_normal_system, centroid, evaluate_prototype, fit_prototype, group_objective, precompute_solver, solve_with_handle,
    update_centroid, Centroid, Prototype, SignalSet, SolverHandle, SolverMode,
};
pub use schur::{
    exponents_from_partition, is_gram_invertible, partition_from_exponents, schur_bialternant, schur_combinatorial, GramCheck,
    InvertibilityReport, Partition, SchurValue,
};

// Runs every listing in the guide as a doctest.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../README.md")]
    mod readme {}
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/bases.md")]
    mod bases {}
    #[doc = include_str!("../../../book/src/schur.md")]
    mod schur {}
    #[doc = include_str!("../../../book/src/least_squares.md")]
    mod least_squares {}
    #[doc = include_str!("../../../book/src/clustering.md")]
    mod clustering {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
