//! Truncated-Galerkin spectral model of the conservative surface
//! quasi-geostrophic (SQG) equation on the 2-torus, with the diagnostics
//! needed to follow Sobolev-norm growth from a perturbed shear flow.
//!
//! The state is a real, even set of Fourier coefficients on the square
//! truncation `|k1|, |k2| <= N`; see [`lattice`]. The right-hand side is
//! evaluated either by an explicit triad sum or by a padded pseudo-spectral
//! product ([`tendency`]), advanced with RK4 ([`timeloop`]) and sampled
//! by [`diagnostics`]. [`quadform`] scans the 2x2 forms behind the sign of
//! the shear term, and [`experiment`] holds configuration and CSV output.

pub mod diagnostics;
pub mod error;
pub mod exec;
pub mod experiment;
pub mod lattice;
pub mod quadform;
pub mod tendency;
pub mod timeloop;

pub use diagnostics::{CaseLabel, DiagnosticsRecord};
pub use error::{Error, Result};
pub use exec::Parallelism;
pub use lattice::{initial_data, ModeIndex, Params, SpectralState, Tendency};
pub use tendency::{DirectEvaluator, FastEvaluator, Method, RhsEvaluator};
pub use timeloop::{run, step_rk4, DiagnosticsSink, RunOutcome, StepControl};
