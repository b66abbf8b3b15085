use statrs::distribution::{ContinuousCDF, Normal};

use super::spectra::SpectrumEstimate;
use crate::output::Table;

/// Flat moving average with a normal-approximation confidence belt.
#[derive(Debug, Clone, PartialEq)]
pub struct BandedEstimate {
    pub frequencies_hz: Vec<f64>,
    pub values: Vec<f64>,
    pub stderr: Vec<f64>,
    pub belt_lo: Vec<f64>,
    pub belt_hi: Vec<f64>,
    pub bins_per_band: usize,
    pub confidence: f64,
}

/// Position, value and standard error of a banded minimum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandMinimum {
    pub frequency_hz: f64,
    pub value: f64,
    pub stderr: f64,
}

impl BandedEstimate {
    pub fn minimum_within(&self, lo_hz: f64, hi_hz: f64) -> Option<BandMinimum> {
        (0..self.values.len())
            .filter(|&i| self.frequencies_hz[i] >= lo_hz && self.frequencies_hz[i] <= hi_hz)
            .min_by(|&a, &b| self.values[a].total_cmp(&self.values[b]))
            .map(|i| BandMinimum {
                frequency_hz: self.frequencies_hz[i],
                value: self.values[i],
                stderr: self.stderr[i],
            })
    }

    pub fn to_table(&self) -> Table {
        let mut t = Table::new();
        t.push("frequency_hz", self.frequencies_hz.clone())
            .push("value", self.values.clone())
            .push("stderr", self.stderr.clone())
            .push("belt_lo", self.belt_lo.clone())
            .push("belt_hi", self.belt_hi.clone());
        t
    }
}

/// Average over windows of `band_width_hz` centred on each bin whose window
/// fits inside the grid. Bins are treated as independent, so the standard
/// error of a band is √(Σσ²)/m.
pub fn band_average(est: &SpectrumEstimate, band_width_hz: f64, confidence: f64) -> BandedEstimate {
    let f = &est.frequencies_hz;
    let df = if f.len() >= 2 { f[1] - f[0] } else { band_width_hz.max(1.0) };
    let m = ((band_width_hz / df).round() as usize).max(1).min(f.len().max(1));
    let z = Normal::new(0.0, 1.0).unwrap().inverse_cdf(0.5 + 0.5 * confidence);
    let mut out = BandedEstimate {
        frequencies_hz: Vec::new(),
        values: Vec::new(),
        stderr: Vec::new(),
        belt_lo: Vec::new(),
        belt_hi: Vec::new(),
        bins_per_band: m,
        confidence,
    };
    if f.len() < m {
        return out;
    }
    for start in 0..=f.len() - m {
        let r = start..start + m;
        let v = est.values[r.clone()].iter().sum::<f64>() / m as f64;
        let s = est.stderr[r.clone()].iter().map(|e| e * e).sum::<f64>().sqrt() / m as f64;
        let centre = if m % 2 == 1 {
            f[start + m / 2]
        } else {
            0.5 * (f[start + m / 2 - 1] + f[start + m / 2])
        };
        out.frequencies_hz.push(centre);
        out.values.push(v);
        out.stderr.push(s);
        out.belt_lo.push(v - z * s);
        out.belt_hi.push(v + z * s);
    }
    out
}
