//! Numerical toolkit for (a,k)-regularized resolvent families generated by
//! finite matrices.
//!
//! The crate builds sampled families `S(t_i)` on uniform grids, extends local
//! families to longer intervals, and checks convolution, Laplace-transform and
//! functional-equation identities by computing residuals.
#![forbid(unsafe_code)]

pub mod bivar;
pub mod cli;
pub mod error;
pub mod extension;
pub mod families;
pub mod funceq;
pub mod kernels;
pub mod laplace;
pub mod mat;
pub mod quad;
pub mod report;
pub mod special;
pub mod suite;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
