//! Barenblatt solutions of the parabolic p-Laplace equation, the particle
//! dynamics whose one-time marginals they are, and the tools to check both.
//!
//! The closed-form fields, quadrature, root finding and the radial solvers are
//! generic over [`Real`] (`f32` or `f64`); the particle engine and the
//! verification layer run in `f64`. Concrete aliases live at the crate root.

pub mod barenblatt;
pub mod error;
pub mod io;
pub mod numerics;
pub mod pde;
pub mod report;
pub mod scalar;
pub mod sde;
pub mod verify;

pub use barenblatt::{check_exponents, BarenblattParams, CoefficientField, DiffusionConvention, ExponentCheck, TimeSlice};
pub use error::{Error, Result};
pub use report::{Stat, VerificationReport};
pub use sde::{simulate, PathEnsemble, SimConfig};
pub use scalar::Real;

pub type Params = BarenblattParams<f64>;
pub type ParamsF32 = BarenblattParams<f32>;
pub type Field = CoefficientField<f64>;
