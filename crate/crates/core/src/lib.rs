//! Numerical toolkit for higher-order parabolic semigroups perturbed by
//! Morrey-class potentials: scale-index calculus, discrete Morrey norms,
//! a spectral semigroup engine, a Volterra (Duhamel) solver and checks.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod fixtures;
pub mod grid;
pub mod io;
pub mod duhamel;
pub mod morrey_norm;
mod quad;
pub mod scale_index;
pub mod semigroup;
pub mod verify;

pub use error::{Error, Result};
pub use grid::{ComplexField, GridFunction};
pub use morrey_norm::{AtomicMeasure, RadiusLadder};
pub use scale_index::{Exponent, MorreyParams, PotentialClass, ProblemDims, ScaleIndex};
