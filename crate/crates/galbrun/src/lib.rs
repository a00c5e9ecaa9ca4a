//! Finite element library for the damped time-harmonic Galbrun equation.
//!
//! The discretization uses H(div)-conforming Brezzi–Douglas–Marini elements
//! on tetrahedral meshes. The convection operator, for which these elements
//! are nonconforming, is handled by a discontinuous Galerkin reconstruction:
//! per-face lifting operators absorb the b-weighted trace jumps, so no
//! penalty stabilization term is needed.
//!
//! Modules mirror the stages of a computation:
//!
//! - [`mesh`]: structured tetrahedral meshes of a box with full face topology
//!   and uniform red refinement,
//! - [`felib`]: simplex quadrature, orthonormal polynomial bases, BDM spaces,
//!   interpolation and broken L² projection,
//! - [`dgops`]: b-weighted jumps, the lifting operator, the reconstructed
//!   convection derivative, and the associated graph inner product/distance,
//! - [`physics`]: coefficient fields, manufactured solutions, the strong-form
//!   residual and Mach-number diagnostics,
//! - [`assembly`]: sparse complex system, load vector and Gram matrix,
//! - [`solver`]: sparse direct solve and a dense inf-sup probe (f64 only),
//! - [`harness`]: convergence studies, rate estimation and reports.
//!
//! The numeric kernels are generic over the scalar type through the [`Real`]
//! trait; `f64` aliases for the main types live at the crate root.

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};

pub mod assembly;
pub mod dgops;
pub mod error;
pub mod felib;
pub mod harness;
pub mod linalg;
pub mod mesh;
pub mod physics;
pub mod solver;

pub use error::Error;

/// Floating point scalar the core kernels are generic over: `f32` or `f64`.
pub trait Real:
    Float + FloatConst + NumAssign + FromPrimitive + ToPrimitive + Debug + Display + Send + Sync + 'static
{
}

impl Real for f32 {}
impl Real for f64 {}

/// Shorthand for converting literal constants into the generic scalar.
pub(crate) fn from_f64<R: Real>(x: f64) -> R {
    R::from_f64(x).expect("literal constant not representable in scalar type")
}

/// Complex number over the generic scalar.
pub type Cplx<R> = num_complex::Complex<R>;

/// DOF vectors carried through assembly and solves.
pub type DofVector<R> = Vec<Cplx<R>>;

// Concrete f64 aliases for the main types.
pub type Mesh64 = mesh::Mesh<f64>;
pub type QuadRule64 = felib::quadrature::QuadRule<f64>;
pub type BdmSpace64 = felib::space::BdmSpace<f64>;
pub type BrokenScalarSpace64 = felib::space::BrokenScalarSpace<f64>;
pub type BrokenVectorSpace64 = felib::space::BrokenVectorSpace<f64>;
pub type LiftingOperator64 = dgops::LiftingOperator<f64>;
pub type ParameterSet64 = physics::ParameterSet<f64>;
pub type MachReport64 = physics::MachReport<f64>;
pub type SystemMatrix64 = assembly::SystemMatrix<f64>;
