//! Strong-disorder expansion of the root-averaged density of states for the
//! Anderson model on the `(q+1)`-regular tree.
//!
//! The crate is organized around five building blocks:
//!
//! * [`treewalk`] — closed-walk classes at the root with exact walk counts as
//!   polynomials in the branching number `q`, plus brute-force oracles and
//!   tree-geometry helpers.
//! * [`stieltjes`] — single-site Stieltjes transforms `s_k` of a compactly
//!   supported law, evaluated on the upper half-plane and holomorphically
//!   continued across a real window via contour quadrature.
//! * [`expansion`] — the coefficient functions `M_n`, the truncated expansion
//!   of the scaled averaged resolvent with explicit remainder budgets, and the
//!   density-of-states coefficients `a_n`.
//! * [`oracle`] — Monte Carlo estimation of the averaged root Green function
//!   through the cavity recursion on depth-truncated trees, cross-checked by a
//!   dense linear solve on small balls.
//! * [`verify`] — the invariant suite wired to the `verify` CLI subcommand.

// `!(x > 0.0)` is the deliberate NaN-rejecting form of parameter guards
// throughout the crate; the positive comparison would silently accept NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod expansion;
pub mod oracle;
pub mod stieltjes;
pub mod treewalk;
pub mod verify;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
