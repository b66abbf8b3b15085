//! Full-model output spectra of the detected signal amplitude quadrature X_s
//! and meter quadrature Y_m, their coherence and the optimal residual.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::om::OmModel;
use crate::params::SystemParams;

/// Auto- and cross-spectra on a common grid, SQL units. The meter spectrum
/// includes the meter's white electronic noise, since that noise limits the
/// prediction and cannot be subtracted from the residual.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputSpectra {
    pub frequencies: Vec<f64>,
    pub s_xx: Vec<f64>,
    pub s_yy: Vec<f64>,
    pub s_xy: Vec<Complex64>,
}

impl OutputSpectra {
    pub fn coherence(&self) -> Result<Vec<f64>> {
        coherence(&self.s_xx, &self.s_yy, &self.s_xy)
    }

    pub fn residual(&self) -> Result<Vec<f64>> {
        Ok(residual_spectrum_theory(&self.s_xx, &self.coherence()?))
    }
}

/// Second-order statistics at one frequency: (S_XX, S_YY, S_XY).
pub fn point_spectra(model: &OmModel, omega: f64) -> Result<(f64, f64, Complex64)> {
    let (gs, gm) = model.gains(omega)?;
    let psd = model.classical_psd(omega);
    let s_xx = gs.power(&psd);
    let s_yy = gm.power(&psd) + model.params.detection.meter_electronic_noise;
    Ok((s_xx, s_yy, gs.cross(&gm, &psd)))
}

pub fn full_output_cross_spectra(system: &SystemParams, grid: &[f64]) -> Result<OutputSpectra> {
    let model = OmModel::new(system)?;
    spectra_for_model(&model, grid)
}

pub fn spectra_for_model(model: &OmModel, grid: &[f64]) -> Result<OutputSpectra> {
    crate::spectrum::check_grid(grid)?;
    let points = grid
        .par_iter()
        .map(|&w| point_spectra(model, w))
        .collect::<Result<Vec<_>>>()?;
    let mut out = OutputSpectra {
        frequencies: grid.to_vec(),
        s_xx: Vec::with_capacity(grid.len()),
        s_yy: Vec::with_capacity(grid.len()),
        s_xy: Vec::with_capacity(grid.len()),
    };
    for (a, b, c) in points {
        out.s_xx.push(a);
        out.s_yy.push(b);
        out.s_xy.push(c);
    }
    Ok(out)
}

/// Magnitude-squared coherence |S_XY|²/(S_XX S_YY).
pub fn coherence(s_xx: &[f64], s_yy: &[f64], s_xy: &[Complex64]) -> Result<Vec<f64>> {
    if s_xx.len() != s_yy.len() || s_xx.len() != s_xy.len() {
        return Err(Error::GridMismatch("coherence inputs differ in length".into()));
    }
    s_xx.iter()
        .zip(s_yy)
        .zip(s_xy)
        .enumerate()
        .map(|(i, ((&a, &b), c))| {
            if !(a > 0.0 && b > 0.0) {
                return Err(Error::DegenerateDenominator { index: i });
            }
            Ok((c.norm_sqr() / (a * b)).min(1.0))
        })
        .collect()
}

/// S_ΔX = S_XX(1 − C_XY).
pub fn residual_spectrum_theory(s_xx: &[f64], coherence: &[f64]) -> Vec<f64> {
    s_xx.iter().zip(coherence).map(|(s, c)| s * (1.0 - c)).collect()
}
