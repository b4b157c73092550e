//! Semigroup-based Sobolev space toolkit on finite weighted graphs.

// Negated comparisons reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::too_many_arguments)]

pub mod ensemble;
pub mod error;
pub mod functionals;
pub mod geometry;
pub mod harness;
pub mod io;
pub mod norms;
pub mod paraproducts;
pub mod pde;
pub mod scalar;
pub mod spectral;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Manifold = geometry::DiscreteManifold<f64>;
pub type Manifold32 = geometry::DiscreteManifold<f32>;
pub type Operator = spectral::SpectralOperator<f64>;
pub type Operator32 = spectral::SpectralOperator<f32>;
pub type Symbols = paraproducts::SymbolFamily<f64>;
pub type Quadrature = paraproducts::TQuadrature<f64>;
pub type Field = nalgebra::DVector<f64>;
pub type ComplexField = nalgebra::DVector<num_complex::Complex<f64>>;
