//! Computational potential theory for weighted planar measures: orthogonal
//! polynomials with varying weights, Christoffel functions, partition
//! functions of weighted Vandermonde ensembles, equilibrium measures and
//! weighted Fekete points.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod ensemble;
pub mod equilibrium;
pub mod error;
pub mod export;
pub mod linalg;
pub mod measures;
pub mod orthopoly;
pub mod partition;
pub mod problem;
pub mod quadrature;
pub mod reference;
pub mod scalar;
pub mod unbounded;

pub use error::{Error, Result};
pub use scalar::Precision;
