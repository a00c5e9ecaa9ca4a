//! Reference-element machinery: simplex quadrature, orthonormal polynomial
//! bases, BDM spaces and the associated interpolation operators.

pub mod polynomial;
pub mod quadrature;
pub mod space;

pub use quadrature::{simplex_quadrature, QuadRule};
pub use space::{divergence_coefficients, BdmSpace, BrokenScalarSpace, BrokenVectorSpace};
