//! Numerical laboratory for smooth strictly convex billiard tables.
//!
//! Computes the marked length spectrum, Mather's β function and its
//! caustic / Lazutkin-parameter data, and the boundary integral invariants
//! `I₀ … I₄`, and cross-checks the two sides through the expansion
//! `|Γ| ∼ ℓ + Σ cₖ Q^{2k/3}`.

// `!(x < y)` is used deliberately so that NaN takes the rejecting branch
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod dynamics;
pub mod error;
pub mod fitting;
pub mod geometry;
pub mod invariants;
mod jet;
pub mod orbits;
pub mod roots;
pub mod spectrum;

pub use error::{Error, Result};
