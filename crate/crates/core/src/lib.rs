//! Qudit displacement-amplitude learning with conjugate states.
//!
//! Dense simulation of Heisenberg–Weyl displacement operators, generalized
//! Bell measurements on `ρ ⊗ ρ*`, the three learning algorithms built on them,
//! generalized Clifford shadows and the numerical checks used to validate all
//! of it. The crate is `no_std` and only needs an allocator.

#![no_std]

extern crate alloc;

pub mod bell;
pub mod clifford;
mod error;
pub mod experiments;
pub mod field;
pub mod learner;
pub mod matrix;
pub mod qudit;
pub mod rng;
pub mod state;
pub mod verify;

pub use error::{Error, Result};
pub use field::{Dimension, DisplacementIndex};
pub use matrix::ComplexMatrix;
pub use num_complex::Complex64;
pub use state::{AmplitudeTable, DensityMatrix};
