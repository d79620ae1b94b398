#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod frac_ops;
pub mod model;
pub mod quadrature;
pub mod stencil;

pub use error::{Error, Result};
pub mod forward;
pub mod tridiag;
pub mod functions;
pub mod transform;
pub mod carleman;
pub mod inverse;
pub mod stability;
pub mod cli;
