//! Shared numerical kernels.

pub mod ks;
pub mod quadrature;
pub mod radial_cdf;
pub mod rng;
pub mod roots;
pub mod sphere;

pub use ks::{chi_square_critical_99, critical_one_sample, critical_two_sample, ks_one_sample, ks_two_sample, EmpiricalCdf};
pub use quadrature::{integrate_radial, integrate_with, QuadSettings};
pub use radial_cdf::{sample_barenblatt, RadialCdf};
pub use rng::RngStream;
pub use roots::find_root;
