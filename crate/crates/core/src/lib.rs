//! Broadband array imaging with randomized aperture codes.
//!
//! The crate builds stacked multi-wavelength forward operators for linear and planar
//! arrays, applies repeated-block-diagonal sketches to them, solves the resulting
//! least-squares problems, and analyzes the degrees of freedom of nested operator
//! ensembles.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod error;
pub mod forward;
pub mod geometry;
pub mod harness;
pub mod io;
pub mod linalg;
pub mod rng;
pub mod sketch;
pub mod solve;

pub use error::{Error, Result};
