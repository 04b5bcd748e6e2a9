//! Data-parallel majorization–minimization (MM) solvers.
//!
//! The crate is organised around one generic driver ([`mm::run_mm`]) and
//! three solvers built on it:
//!
//! * [`nnmf`]: nonnegative matrix factorization, Frobenius and Poisson loss
//! * [`pet`]: roughness-penalized emission tomography reconstruction
//! * [`mds`]: multidimensional scaling by stress majorization
//!
//! All heavy lifting goes through [`kernels`], whose serial and parallel
//! backends produce bitwise identical results.

// `!(x > 0.0)` is used on purpose so that NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod io;
pub mod kernels;
pub mod mds;
pub mod mm;
pub mod nnmf;
pub mod pet;

pub use error::{Error, Result};
pub use kernels::{Backend, BackendMode, DenseMatrix};
pub use mds::{mds_run, stress, MdsProblem};
pub use mm::{relative_change, run_mm, Direction, MmConfig, MmProblem, MmTrace, Surrogate};
pub use nnmf::{nnmf_poisson_run, nnmf_run, FactorPair, NnmfProblem};
pub use pet::{pet_run, PetGeometry, PetProblem};
