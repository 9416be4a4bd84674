//! Generalized Bratteli diagrams with countably infinite levels.
//!
//! The crate computes exact tower heights, evaluates tail-invariant measures,
//! decides (with certificates) whether the canonical extension of a measure
//! from a subdiagram is finite, approximates Perron eigenpairs of infinite
//! matrices by finite corners, runs the Vershik successor on the ordered
//! diagrams `B(t_n)`, performs the 0-1 procedure and tracks convergence of
//! measure sequences on cylinder sets.
//!
//! All exact arithmetic is done with `num-bigint` integers and rationals.
//! Infinite levels are never materialized: every query goes through a finite
//! window of vertices.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod combinatorics;
pub mod convergence;
pub mod diagram;
pub mod dynamics;
mod error;
pub mod extension;
pub mod measure;
pub mod perron;
pub mod seq;
pub mod series;
pub mod transform;

pub use error::{Error, Result};

/// Exact rational numbers used throughout.
pub type Q = num_rational::BigRational;
/// Exact signed integers.
pub type Z = num_bigint::BigInt;
/// Exact nonnegative integers (heights, path counts).
pub type N = num_bigint::BigUint;
