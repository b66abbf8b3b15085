//! Analytic spectra: the single-mode model used to introduce the QND
//! residual, and the full multi-port model with its noise budgets.

pub mod budget;
pub mod full;
pub mod simple;

pub use budget::{noise_budget, residual_budget, NoiseBudget, Port, Source, SourceMask};
pub use full::{coherence, full_output_cross_spectra, point_spectra, residual_spectrum_theory, OutputSpectra};
pub use simple::{ReadoutMode, SimpleModelParams};
