use num_complex::Complex64;

use super::segments::SegmentSet;
use crate::error::{Error, Result};
use crate::output::Table;
use crate::synth::Channel;

/// A real spectrum estimate with per-bin standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumEstimate {
    pub frequencies_hz: Vec<f64>,
    pub values: Vec<f64>,
    pub stderr: Vec<f64>,
    pub n_averages: usize,
    /// Raw-unit SQL level used for normalization, once applied.
    pub sql_reference: Option<f64>,
    pub normalized: bool,
}

impl SpectrumEstimate {
    pub fn constant(frequencies_hz: Vec<f64>, value: f64, stderr: f64, n_averages: usize) -> Self {
        let n = frequencies_hz.len();
        Self {
            frequencies_hz,
            values: vec![value; n],
            stderr: vec![stderr; n],
            n_averages,
            sql_reference: None,
            normalized: false,
        }
    }

    /// Divide by a raw SQL level (after any subtraction).
    pub fn normalized_by(&self, sql: f64) -> Self {
        Self {
            frequencies_hz: self.frequencies_hz.clone(),
            values: self.values.iter().map(|v| v / sql).collect(),
            stderr: self.stderr.iter().map(|v| v / sql).collect(),
            n_averages: self.n_averages,
            sql_reference: Some(sql),
            normalized: true,
        }
    }

    pub fn to_table(&self) -> Table {
        let mut t = Table::new();
        t.push("frequency_hz", self.frequencies_hz.clone())
            .push("value", self.values.clone())
            .push("stderr", self.stderr.clone());
        t
    }
}

/// Mean and standard error of per-segment samples at each bin, summed in
/// segment order.
pub(crate) fn mean_and_stderr(samples: &[Vec<f64>], n_bins: usize) -> (Vec<f64>, Vec<f64>) {
    let n = samples.len() as f64;
    let mut mean = vec![0.0; n_bins];
    for s in samples {
        for (m, v) in mean.iter_mut().zip(s) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; n_bins];
    for s in samples {
        for ((q, v), m) in var.iter_mut().zip(s).zip(&mean) {
            *q += (v - m) * (v - m);
        }
    }
    let stderr = if samples.len() >= 2 {
        var.iter().map(|q| (q / (n - 1.0) / n).sqrt()).collect()
    } else {
        vec![0.0; n_bins]
    };
    (mean, stderr)
}

/// Ŝ = Σ|X̃⁽ⁿ⁾|²/N with stderr = sample standard deviation/√N.
pub fn power_spectrum(seg: &SegmentSet, channel: Channel) -> Result<SpectrumEstimate> {
    let data = seg.channel(channel)?;
    if data.is_empty() {
        return Err(Error::TooFewSegments { kept: 0, required: 1 });
    }
    let per: Vec<Vec<f64>> = data.iter().map(|s| s.iter().map(|v| v.norm_sqr()).collect()).collect();
    let (values, stderr) = mean_and_stderr(&per, seg.n_bins());
    Ok(SpectrumEstimate {
        frequencies_hz: seg.frequencies_hz.clone(),
        values,
        stderr,
        n_averages: data.len(),
        sql_reference: None,
        normalized: false,
    })
}

/// Averaged cross spectrum Σ X̃ Ỹ*/N.
pub fn cross_spectrum(seg: &SegmentSet, x: Channel, y: Channel) -> Result<Vec<Complex64>> {
    let xs = seg.channel(x)?;
    let ys = seg.channel(y)?;
    let mut acc = vec![Complex64::new(0.0, 0.0); seg.n_bins()];
    for (a, b) in xs.iter().zip(ys) {
        for ((s, u), v) in acc.iter_mut().zip(a).zip(b) {
            *s += u * v.conj();
        }
    }
    let n = xs.len().max(1) as f64;
    Ok(acc.into_iter().map(|v| v / n).collect())
}

/// Magnitude-squared coherence |Σ X̃*Ỹ|²/(Σ|X̃|² Σ|Ỹ|²). The standard error
/// uses the large-N approximation √2·(1 − C)·√C/√N.
pub fn msc_estimate(seg: &SegmentSet, x: Channel, y: Channel) -> Result<SpectrumEstimate> {
    let n = seg.n_segments();
    if n < 2 {
        return Err(Error::TooFewSegments { kept: n, required: 2 });
    }
    let sxy = cross_spectrum(seg, x, y)?;
    let sxx = power_spectrum(seg, x)?;
    let syy = power_spectrum(seg, y)?;
    let mut values = Vec::with_capacity(seg.n_bins());
    for i in 0..seg.n_bins() {
        let d = sxx.values[i] * syy.values[i];
        if !(d > 0.0) {
            return Err(Error::DegenerateDenominator { index: i });
        }
        values.push((sxy[i].norm_sqr() / d).clamp(0.0, 1.0));
    }
    let stderr = values
        .iter()
        .map(|c| std::f64::consts::SQRT_2 * (1.0 - c) * c.sqrt() / (n as f64).sqrt())
        .collect();
    Ok(SpectrumEstimate {
        frequencies_hz: seg.frequencies_hz.clone(),
        values,
        stderr,
        n_averages: n,
        sql_reference: None,
        normalized: false,
    })
}
