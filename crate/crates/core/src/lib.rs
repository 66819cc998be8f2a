//! Numerical toolkit for state-constrained differential inclusions with
//! nonlocal boundary conditions.
//!
//! The modules build on each other: [`nonsmooth`] provides Clarke calculus
//! over Lipschitz expression trees, [`geometry`] turns representing
//! functions into constraint sets, [`multimap`] models set-valued right-hand
//! sides, [`integrate`] produces viable trajectories, [`degree`] computes
//! Brouwer degrees, and [`bvp`] certifies existence hypotheses and searches
//! for solutions of nonlocal problems.

// `!(x > 0.0)` is used on purpose so that NaN inputs are rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bvp;
pub mod degree;
pub mod error;
pub mod geometry;
pub mod integrate;
pub mod linalg;
pub mod multimap;
pub mod nonsmooth;

pub use error::{Error, Result};
