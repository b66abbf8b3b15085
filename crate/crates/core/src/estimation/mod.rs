//! Spectral estimation from segmented three-channel records.
//!
//! Per-segment DFT bins are stored in periodogram units: for a segment
//! x₀..x_{N−1} the stored value is X̃_k/√(N·U) with U the mean squared window,
//! so white noise of unit variance has E|X̃|² = 1 and a shot-noise limited
//! channel reads 1 in SQL units once the detector gain is divided out.

pub mod banding;
pub mod calibration;
pub mod residual;
pub mod segments;
pub mod spectra;

pub use banding::{band_average, BandedEstimate};
pub use calibration::{
    electronic_noise_systematic, shot_calibration, shot_linearity, subtract_electronic_noise, LinearityReport,
    ShotCalibration,
};
pub use residual::{residual_single, residual_two_channel, split_consistency, ResidualEstimate, SplitConsistency};
pub use segments::{segment_and_select, transform, Selection, SegmentSet, Window};
pub use spectra::{msc_estimate, power_spectrum, SpectrumEstimate};
