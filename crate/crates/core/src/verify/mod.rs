//! Deterministic and statistical checks of the Barenblatt family, the
//! particle engine and the radial solvers.

pub mod flow;
pub mod integrability;
pub mod suites;
pub mod test_functions;
pub mod weakform;

pub use test_functions::{TestFunction, TestFunctionFamily};
pub use weakform::{weakform_residual_nonlinear, weakform_residual_p_laplace, Residual};
pub use integrability::{integrability_check, GradedIntegral, Verdict};
pub use flow::{flow_property_analytic, flow_property_ensemble, translation_noninvariance_check, PATH_LAW_CAVEAT};
pub use suites::{run_suite, Suite, SuiteConfig, SuiteOutcome, Trace};
