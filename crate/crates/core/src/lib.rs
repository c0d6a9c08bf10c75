#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Harmonic analysis for products g x g* of a complex rectangular random matrix g
//! with a Hermitian matrix x: spherical functions and transforms, Polya ensembles,
//! joint eigenvalue densities, bi-orthonormal systems and kernels, plus the
//! Monte Carlo harness that checks all of them against sampled matrices.

pub mod ensembles;
pub mod error;
pub mod mellin;
pub mod montecarlo;
pub mod numerics;
pub mod products;
pub mod spherical;
pub mod verify;

pub use error::{Error, Result};
