//! Iterates of positive Markov operators on `C([0,1])` and their duals.
//!
//! The crate covers the affine projection, Bernstein operators `B_k`,
//! Meyer-König–Zeller operators `T_i` and generalized Kantorovich operators
//! `T̂_i`, together with the dual action of `T̂_i` on measures that are
//! piecewise constant on the partition `I_j = [j/(i+j), (j+1)/(i+j+1))`.
//!
//! The central numerical fact checked here: `T̂_i^m f` converges uniformly
//! if and only if `f(1) = ∫₀¹ f`.
#![forbid(unsafe_code)]
// `!(x > 0.0)` style checks are meant to reject NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod cli;
pub mod discsim;
mod error;
pub mod grid;
pub mod measures;
pub mod observable;
pub mod operators;
pub mod quadrature;
pub mod seqcore;
pub mod verify;

pub use error::{Error, Result};
