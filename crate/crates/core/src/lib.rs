//! Simulation of noisy homodyne detection of an even cat state and
//! reconstruction of its Wigner function with a kernel-deconvolution
//! estimator.
//!
//! The crate is organized bottom-up:
//!
//! - [`states`]: closed-form Wigner function, quadrature densities and the
//!   interference witness of the cat state.
//! - [`sampling`]: seedable Monte Carlo generation of homodyne pairs.
//! - [`estimator`]: the deconvolution kernel, exact and fast grid
//!   reconstruction, and the deterministic mean-field oracle.
//! - [`analysis`]: L² error metrology, the analytic error bound and the
//!   witness statistics.
//! - [`io`]: batch and grid file formats.

pub mod analysis;
pub mod error;
pub mod estimator;
pub mod gof;
pub mod io;
pub mod quadrature;
pub mod sampling;
pub mod states;
pub mod summation;

pub use analysis::{BoundTerms, ErrorReport, WitnessStats};
pub use error::{Error, Result};
pub use estimator::{ReconstructionParams, WignerGrid};
pub use sampling::{QuadratureBatch, QuadratureSample};
pub use states::{CatState, NoiseModel, PhasePoint};
