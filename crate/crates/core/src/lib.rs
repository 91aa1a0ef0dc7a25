//! Numerical toolkit for mode-wise resolvent and semigroup analysis of the linearized
//! Navier–Stokes equations around concave boundary-layer shear profiles on the half-plane.
//!
//! Modules, bottom-up: [`numerics`] (grids, norms), [`specfun`] (complex Airy functions),
//! [`profiles`] (shear profiles and the concavity certificate), [`ossolve`] (Orr–Sommerfeld
//! and Rayleigh solves, Airy corrector), [`resolvent`] (regimes and estimate sweeps),
//! [`semigroup`] (contour, matrix-exponential and time-stepping evaluation of the mode
//! semigroup), [`nonlinear`] (Fourier–Chebyshev simulation with Gevrey-norm tracking) and
//! [`harness`] (scenario files and the CLI driver).

pub mod error;
pub mod numerics;
pub mod report;
pub mod profiles;
pub mod specfun;
pub mod ossolve;
pub mod resolvent;
pub mod semigroup;
pub mod nonlinear;
pub mod harness;

pub use error::{Error, Result};
pub use report::EstimateReport;
