//! Isothermal coordinates and quasiconformal moduli for planar Finsler fields.

pub mod beltrami_solver;
pub mod convex_kernel;
pub mod error;
pub mod modulus_engine;
pub mod norm_field;

pub use error::{Error, ErrorKind, Result};
