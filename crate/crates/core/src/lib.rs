//! Numerical verification toolkit for the Hessian equation `Hess w = w q`
//! on warped products and space forms.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod expr;
pub mod geomkit;
pub mod hill;
pub mod rigidity;
pub mod solspace;
pub mod spaceforms;
pub mod warp;

pub use error::{Error, Result};
