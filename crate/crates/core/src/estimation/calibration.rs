use super::spectra::SpectrumEstimate;
use crate::error::{Error, Result};

/// Shot-noise (SQL) level from the difference channel, interpolated linearly
/// to the analysis frequency from sideband intervals that avoid the
/// oscillator peak.
#[derive(Debug, Clone, PartialEq)]
pub struct ShotCalibration {
    pub sql_reference: f64,
    pub stderr: f64,
    pub slope_per_hz: f64,
    pub frequency_hz: f64,
    pub n_bins: usize,
}

pub const CALIBRATION_INTERVALS_HZ: [(f64, f64); 2] = [(154e3, 163e3), (176e3, 180e3)];
pub const CALIBRATION_FREQUENCY_HZ: f64 = 170e3;

/// Ordinary least squares y = a + b(x − x̄); returns (a, b, residual variance, x̄, Sxx).
fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64, f64, f64) {
    let n = x.len() as f64;
    let xm = x.iter().sum::<f64>() / n;
    let ym = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - xm).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - xm) * (b - ym)).sum();
    let b = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let ss: f64 = x.iter().zip(y).map(|(a, c)| (c - ym - b * (a - xm)).powi(2)).sum();
    let dof = (n - 2.0).max(1.0);
    (ym, b, ss / dof, xm, sxx)
}

pub fn shot_calibration(diff: &SpectrumEstimate, intervals_hz: &[(f64, f64)], at_hz: f64) -> Result<ShotCalibration> {
    let f = &diff.frequencies_hz;
    let (lo, hi) = (f.first().copied().unwrap_or(0.0), f.last().copied().unwrap_or(0.0));
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for &(a, b) in intervals_hz {
        if a < lo || b > hi || b <= a {
            return Err(Error::InsufficientBand { lo_hz: a, hi_hz: b });
        }
        for (i, &v) in f.iter().enumerate() {
            if v >= a && v <= b {
                xs.push(v);
                ys.push(diff.values[i]);
            }
        }
    }
    if xs.len() < 3 {
        return Err(Error::InsufficientBand { lo_hz: lo, hi_hz: hi });
    }
    let (a, b, var, xm, sxx) = linear_fit(&xs, &ys);
    let n = xs.len() as f64;
    let stderr = (var * (1.0 / n + (at_hz - xm).powi(2) / sxx.max(f64::MIN_POSITIVE))).sqrt();
    Ok(ShotCalibration {
        sql_reference: a + b * (at_hz - xm),
        stderr,
        slope_per_hz: b,
        frequency_hz: at_hz,
        n_bins: xs.len(),
    })
}

/// Linear fit of difference-channel variance against total level.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearityReport {
    pub slope: f64,
    pub slope_stderr: f64,
    pub intercept: f64,
    pub residuals: Vec<f64>,
    /// Residuals divided by their expected statistical scatter.
    pub normalized_residuals: Vec<f64>,
    /// Lag-one autocorrelation of the residuals: a curved response shows up
    /// as a strongly positive value.
    pub residual_lag1: f64,
}

/// `sample_counts[i]` is the number of samples behind `variances[i]`; the
/// statistical scatter of a Gaussian variance estimate is var·√(2/n).
pub fn shot_linearity(levels: &[f64], variances: &[f64], sample_counts: &[usize]) -> Result<LinearityReport> {
    if levels.len() < 3 || levels.len() != variances.len() || levels.len() != sample_counts.len() {
        return Err(Error::Config("linearity sweep needs at least 3 matching points".into()));
    }
    let (a, b, var, xm, sxx) = linear_fit(levels, variances);
    let residuals: Vec<f64> = levels.iter().zip(variances).map(|(x, y)| y - a - b * (x - xm)).collect();
    let normalized_residuals = residuals
        .iter()
        .zip(variances)
        .zip(sample_counts)
        .map(|((r, v), &n)| r / (v * (2.0 / n as f64).sqrt()))
        .collect();
    let r0: f64 = residuals.iter().map(|r| r * r).sum();
    let r1: f64 = residuals.windows(2).map(|w| w[0] * w[1]).sum();
    Ok(LinearityReport {
        slope: b,
        slope_stderr: (var / sxx).sqrt(),
        intercept: a - b * xm,
        residuals,
        normalized_residuals,
        residual_lag1: if r0 > 0.0 { r1 / r0 } else { 0.0 },
    })
}

/// Pointwise subtraction; stderr combined in quadrature, negative results
/// floored at 0. Returns the estimate and the number of floored bins.
pub fn subtract_electronic_noise(
    est: &SpectrumEstimate,
    electronic: &SpectrumEstimate,
) -> Result<(SpectrumEstimate, usize)> {
    if est.frequencies_hz != electronic.frequencies_hz {
        return Err(Error::GridMismatch(format!(
            "estimate has {} bins, electronic reference {}",
            est.frequencies_hz.len(),
            electronic.frequencies_hz.len()
        )));
    }
    let mut floored = 0;
    let values = est
        .values
        .iter()
        .zip(&electronic.values)
        .map(|(a, b)| {
            let d = a - b;
            if d < 0.0 {
                floored += 1;
                0.0
            } else {
                d
            }
        })
        .collect();
    let stderr = est
        .stderr
        .iter()
        .zip(&electronic.stderr)
        .map(|(a, b)| (a * a + b * b).sqrt())
        .collect();
    Ok((
        SpectrumEstimate {
            frequencies_hz: est.frequencies_hz.clone(),
            values,
            stderr,
            n_averages: est.n_averages,
            sql_reference: est.sql_reference,
            normalized: est.normalized,
        },
        floored,
    ))
}

/// Systematic uncertainty of an electronic-noise-subtracted, SQL-normalized
/// spectrum when the electronic level (relative to the raw SQL) is known
/// only to a fractional `reproducibility`.
pub fn electronic_noise_systematic(electronic_over_sql: f64, reproducibility: f64) -> f64 {
    reproducibility * electronic_over_sql / (1.0 - electronic_over_sql)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn est(f: Vec<f64>, v: Vec<f64>) -> SpectrumEstimate {
        let n = f.len();
        SpectrumEstimate {
            frequencies_hz: f,
            values: v,
            stderr: vec![0.01; n],
            n_averages: 10,
            sql_reference: None,
            normalized: false,
        }
    }

    fn grid() -> Vec<f64> {
        (0..6001).map(|i| 140e3 + 10.0 * i as f64).collect()
    }

    #[test]
    fn flat_channel_gives_band_mean() {
        let f = grid();
        let v: Vec<f64> = f.iter().map(|_| 2.5).collect();
        let c = shot_calibration(&est(f, v), &CALIBRATION_INTERVALS_HZ, CALIBRATION_FREQUENCY_HZ).unwrap();
        assert!((c.sql_reference - 2.5).abs() < 1e-12);
    }

    #[test]
    fn tilted_channel_recovers_midpoint() {
        let f = grid();
        let v: Vec<f64> = f.iter().map(|x| 1.0 + 2e-6 * (x - 170e3)).collect();
        let c = shot_calibration(&est(f, v), &CALIBRATION_INTERVALS_HZ, CALIBRATION_FREQUENCY_HZ).unwrap();
        assert!((c.sql_reference - 1.0).abs() < 1e-12);
        assert!((c.slope_per_hz - 2e-6).abs() < 1e-15);
    }

    #[test]
    fn intervals_outside_grid() {
        let f: Vec<f64> = (0..100).map(|i| 160e3 + 10.0 * i as f64).collect();
        let v = vec![1.0; 100];
        assert!(matches!(
            shot_calibration(&est(f, v), &CALIBRATION_INTERVALS_HZ, CALIBRATION_FREQUENCY_HZ),
            Err(Error::InsufficientBand { .. })
        ));
    }

    #[test]
    fn subtraction() {
        let f = vec![1.0, 2.0, 3.0];
        let a = est(f.clone(), vec![1.0, 1.0, 0.01]);
        let zero = SpectrumEstimate::constant(f.clone(), 0.0, 0.0, 1);
        let (same, fl) = subtract_electronic_noise(&a, &zero).unwrap();
        assert_eq!(same.values, a.values);
        assert_eq!(fl, 0);
        let e = SpectrumEstimate::constant(f.clone(), 10f64.powf(-1.5), 0.0, 1);
        let (s, fl) = subtract_electronic_noise(&a, &e).unwrap();
        assert!((s.values[0] - 0.968_377_223_398_316_2).abs() < 1e-12);
        assert_eq!(fl, 1);
        assert_eq!(s.values[2], 0.0);
        let other = SpectrumEstimate::constant(vec![1.0, 2.0], 0.0, 0.0, 1);
        assert!(matches!(subtract_electronic_noise(&a, &other), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn electronic_systematic_is_a_few_per_mille() {
        let s = electronic_noise_systematic(10f64.powf(-1.5), 0.10);
        assert!((s - 0.003).abs() < 0.0005, "{s}");
    }

    #[test]
    fn exact_line_has_no_residuals() {
        let l = [0.2, 0.4, 0.6, 0.8, 1.0];
        let v: Vec<f64> = l.iter().map(|x| 0.03 + 2.0 * x).collect();
        let r = shot_linearity(&l, &v, &[1000; 5]).unwrap();
        assert!((r.slope - 2.0).abs() < 1e-12 && (r.intercept - 0.03).abs() < 1e-12);
        assert!(r.residuals.iter().all(|x| x.abs() < 1e-12));
    }
}
