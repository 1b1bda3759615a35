//! Adiabatic holonomic gates on driven (d+2)-level atoms.
//!
//! The crate builds the single- and two-atom Hamiltonians, their
//! zero-energy frames and connections, and computes the resulting gates
//! three ways: closed form, parallel transport and full Schrodinger
//! evolution. Coherent loop deformations and stochastic drive noise are
//! handled in [`noise`].
//!
//! Works without `std` (an allocator is required).

#![cfg_attr(not(any(test, feature = "std")), no_std)]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod dynamics;
pub mod error;
pub mod gates;
pub mod geometry;
pub mod integrate;
pub mod linalg;
pub mod model;
pub mod noise;
pub mod quadrature;

pub use nalgebra;
pub use num_complex::Complex64 as C64;

pub type CMat = nalgebra::DMatrix<C64>;
pub type CVec = nalgebra::DVector<C64>;

pub use error::{Error, Result};
pub use model::{Arity, ModelConfig, ParameterPoint};
