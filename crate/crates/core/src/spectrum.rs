//! Frequency grids and complex spectra.

use num_complex::Complex64;
use crate::error::{Error, Result};
use crate::units::hz_to_rad;

/// Complex values on a strictly increasing angular-frequency grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSpectrum {
    pub frequencies: Vec<f64>,
    pub values: Vec<Complex64>,
    pub meaning: String,
}

impl ComplexSpectrum {
    pub fn new(frequencies: Vec<f64>, values: Vec<Complex64>, meaning: impl Into<String>) -> Result<Self> {
        check_grid(&frequencies)?;
        if values.len() != frequencies.len() {
            return Err(Error::GridMismatch(format!(
                "{} values for {} frequencies",
                values.len(),
                frequencies.len()
            )));
        }
        if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::Domain("non-finite spectrum value".into()));
        }
        Ok(Self {
            frequencies,
            values,
            meaning: meaning.into(),
        })
    }

    /// Evaluate `f` at every grid point.
    pub fn from_fn(
        frequencies: Vec<f64>,
        meaning: impl Into<String>,
        f: impl Fn(f64) -> Result<Complex64>,
    ) -> Result<Self> {
        let values = frequencies.iter().map(|&w| f(w)).collect::<Result<Vec<_>>>()?;
        Self::new(frequencies, values, meaning)
    }

    pub fn len(&self) -> usize {
        self.frequencies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies.is_empty()
    }

    pub fn real(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.re).collect()
    }

    pub fn norm_sqr(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm_sqr()).collect()
    }
}

pub fn check_grid(frequencies: &[f64]) -> Result<()> {
    if frequencies.iter().any(|w| !w.is_finite()) {
        return Err(Error::Domain("non-finite grid frequency".into()));
    }
    if frequencies.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Domain("grid frequencies must be strictly increasing".into()));
    }
    Ok(())
}

/// `n` evenly spaced angular frequencies from `lo` to `hi` inclusive.
pub fn linear_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let step = (hi - lo) / (n - 1) as f64;
            (0..n).map(|i| lo + step * i as f64).collect()
        }
    }
}

/// Default analysis grid: 4096 points spanning ω_m ± 2π·25 kHz.
pub fn default_grid(omega_m: f64) -> Vec<f64> {
    let half = hz_to_rad(25e3);
    linear_grid(omega_m - half, omega_m + half, 4096)
}

/// Index of the grid point closest to `omega`.
pub fn nearest_index(frequencies: &[f64], omega: f64) -> usize {
    let i = frequencies.partition_point(|&w| w < omega);
    if i == 0 {
        0
    } else if i == frequencies.len() {
        frequencies.len() - 1
    } else if (frequencies[i] - omega).abs() < (omega - frequencies[i - 1]).abs() {
        i
    } else {
        i - 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_is_increasing_and_inclusive() {
        let g = default_grid(1.0e6);
        assert_eq!(g.len(), 4096);
        assert!(check_grid(&g).is_ok());
        assert!((g[4095] - g[0] - 2.0 * hz_to_rad(25e3)).abs() < 1e-6);
    }

    #[test]
    fn rejects_bad_spectra() {
        assert!(ComplexSpectrum::new(vec![1.0, 1.0], vec![Complex64::new(0.0, 0.0); 2], "x").is_err());
        assert!(ComplexSpectrum::new(vec![1.0, 2.0], vec![Complex64::new(f64::NAN, 0.0); 2], "x").is_err());
        assert!(ComplexSpectrum::new(vec![1.0, 2.0], vec![Complex64::new(0.0, 0.0)], "x").is_err());
    }

    #[test]
    fn nearest() {
        let g = linear_grid(0.0, 10.0, 11);
        assert_eq!(nearest_index(&g, 3.4), 3);
        assert_eq!(nearest_index(&g, 3.6), 4);
        assert_eq!(nearest_index(&g, -1.0), 0);
        assert_eq!(nearest_index(&g, 99.0), 10);
    }
}
