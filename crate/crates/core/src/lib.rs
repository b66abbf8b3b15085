//! Numerical laboratory for quantum-nondemolition measurement of optical
//! amplitude fluctuations through radiation pressure on a mechanical
//! oscillator.
//!
//! The crate is layered bottom-up:
//!
//! * [`om`]: the linearized optomechanical model (steady state,
//!   susceptibilities, input/output coefficients, loss and mode-matching
//!   transforms, detection phases).
//! * [`theory`]: analytic spectra built on top of it, from the single-mode
//!   textbook model to the full multi-port noise budget.
//! * [`synth`]: seeded, segment-wise synthesis of three-channel detector
//!   records whose second-order statistics follow the model.
//! * [`estimation`]: the odd/even split residual estimator and the rest of
//!   the spectral pipeline (selection, calibration, banding, diagnostics).
//! * [`fitting`]: multistart simplex recovery of detuning, signal phase and
//!   cavity phase-noise background.
//! * [`config`]: the sectioned run configuration used by the `qndlab` binary.
//!
//! All spectra are two-sided and normalized so that a vacuum (shot-noise
//! limited) quadrature has spectral density 1.

pub mod cli;
pub mod config;
pub mod error;
pub mod estimation;
pub mod fitting;
pub mod om;
pub mod output;
pub mod params;
pub mod pipeline;
pub mod spectrum;
pub mod synth;
pub mod theory;
pub mod units;

pub use error::{Error, Result};
pub use num_complex::Complex64;
pub use params::SystemParams;
