use std::collections::BTreeMap;

use num_complex::Complex64;
use rayon::prelude::*;
use realfft::RealFftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::synth::{BandDraw, Channel, DataSet, SynthConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Window {
    Rectangular,
    Hann,
}

impl Window {
    pub fn coefficients(self, n: usize) -> Vec<f64> {
        match self {
            Window::Rectangular => vec![1.0; n],
            // periodic Hann, matching the periodic segments
            Window::Hann => (0..n)
                .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos())
                .collect(),
        }
    }
}

/// Outcome of the segment quality cuts.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub kept_mask: Vec<bool>,
    /// Median difference-channel rms, the unit of the limits.
    pub reference_rms: f64,
    pub peak_limit: f64,
    pub rms_limit: f64,
}

impl Selection {
    pub fn kept(&self) -> Vec<usize> {
        self.kept_mask.iter().enumerate().filter(|(_, &k)| k).map(|(i, _)| i).collect()
    }

    pub fn n_kept(&self) -> usize {
        self.kept_mask.iter().filter(|&&k| k).count()
    }

    pub fn kept_fraction(&self) -> f64 {
        if self.kept_mask.is_empty() {
            0.0
        } else {
            self.n_kept() as f64 / self.kept_mask.len() as f64
        }
    }
}

pub const MIN_SEGMENTS: usize = 4;

fn rms(x: &[f64]) -> f64 {
    (x.iter().map(|v| v * v).sum::<f64>() / x.len().max(1) as f64).sqrt()
}

/// Reject segments whose sum-channel peak or rms exceeds the limits. Limits
/// are in units of the median difference-channel rms, which tracks the shot
/// noise whatever the detector gain.
pub fn segment_and_select(ds: &DataSet, peak_limit: f64, rms_limit: f64) -> Result<Selection> {
    if !(peak_limit > 0.0 && rms_limit > 0.0) {
        return Err(Error::Config("selection limits must be positive".into()));
    }
    ds.validate()?;
    let n = ds.meta.n_segments;
    let mut diff_rms: Vec<f64> = (0..n).map(|i| rms(ds.segment(Channel::Difference, i).unwrap())).collect();
    diff_rms.sort_by(f64::total_cmp);
    let reference_rms = if n == 0 {
        0.0
    } else if n % 2 == 1 {
        diff_rms[n / 2]
    } else {
        0.5 * (diff_rms[n / 2 - 1] + diff_rms[n / 2])
    };
    let kept_mask: Vec<bool> = (0..n)
        .map(|i| {
            let s = ds.segment(Channel::Sum, i).unwrap();
            let peak = s.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            peak <= peak_limit * reference_rms && rms(s) <= rms_limit * reference_rms
        })
        .collect();
    let sel = Selection {
        kept_mask,
        reference_rms,
        peak_limit,
        rms_limit,
    };
    if sel.n_kept() < MIN_SEGMENTS {
        return Err(Error::TooFewSegments {
            kept: sel.n_kept(),
            required: MIN_SEGMENTS,
        });
    }
    Ok(sel)
}

/// Kept segments transformed on an analysis band.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentSet {
    pub frequencies_hz: Vec<f64>,
    /// DFT index of the first stored bin.
    pub first_bin: usize,
    pub segment_length: usize,
    pub sample_rate_hz: f64,
    pub window: Window,
    /// Original indices of the stored segments.
    pub segment_index: Vec<usize>,
    /// `channels[ch][n][k]` in periodogram units.
    pub channels: BTreeMap<Channel, Vec<Vec<Complex64>>>,
}

impl SegmentSet {
    pub fn n_segments(&self) -> usize {
        self.segment_index.len()
    }

    pub fn n_bins(&self) -> usize {
        self.frequencies_hz.len()
    }

    pub fn channel(&self, ch: Channel) -> Result<&[Vec<Complex64>]> {
        self.channels
            .get(&ch)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::Config(format!("channel {} was not transformed", ch.label())))
    }

    pub fn resolution_hz(&self) -> f64 {
        self.sample_rate_hz / self.segment_length as f64
    }

    /// The same set restricted to the given positions (in stored order).
    pub fn subset(&self, positions: &[usize]) -> SegmentSet {
        let mut out = self.clone();
        out.segment_index = positions.iter().map(|&i| self.segment_index[i]).collect();
        for (ch, v) in out.channels.iter_mut() {
            let src = &self.channels[ch];
            *v = positions.iter().map(|&i| src[i].clone()).collect();
        }
        out
    }

    /// Directly drawn band bins as a rectangular-window set with the signal
    /// on the sum channel and the meter on the meter channel.
    pub fn from_band_draw(draw: BandDraw, cfg: &SynthConfig) -> SegmentSet {
        let n = draw.x.len();
        let first_bin = draw
            .frequencies_hz
            .first()
            .map_or(0, |f| (f / cfg.resolution_hz()).round() as usize);
        let mut channels = BTreeMap::new();
        channels.insert(Channel::Sum, draw.x);
        channels.insert(Channel::Meter, draw.y);
        SegmentSet {
            frequencies_hz: draw.frequencies_hz,
            first_bin,
            segment_length: cfg.segment_length,
            sample_rate_hz: cfg.sample_rate_hz,
            window: Window::Rectangular,
            segment_index: (0..n).collect(),
            channels,
        }
    }

    /// Multiply one channel by a constant (gain calibration, tests).
    pub fn scale_channel(&mut self, ch: Channel, c: f64) {
        if let Some(v) = self.channels.get_mut(&ch) {
            for seg in v.iter_mut() {
                for x in seg.iter_mut() {
                    *x *= c;
                }
            }
        }
    }
}

/// Bin range [k0, k1] covering `band_hz` for a given segment geometry.
pub fn band_bins(segment_length: usize, sample_rate_hz: f64, band_hz: (f64, f64)) -> Result<(usize, usize)> {
    let df = sample_rate_hz / segment_length as f64;
    let k0 = (band_hz.0 / df).ceil().max(0.0) as usize;
    let k1 = ((band_hz.1 / df).floor() as usize).min(segment_length / 2);
    if !(band_hz.1 > band_hz.0) || k1 < k0 {
        return Err(Error::InsufficientBand {
            lo_hz: band_hz.0,
            hi_hz: band_hz.1,
        });
    }
    Ok((k0, k1))
}

/// DFT of the kept segments of the sum, difference and meter channels and of
/// the mean-removed square of the meter, restricted to `band_hz`.
pub fn transform(ds: &DataSet, selection: &Selection, window: Window, band_hz: (f64, f64)) -> Result<SegmentSet> {
    let n = ds.meta.segment_length;
    let (k0, k1) = band_bins(n, ds.meta.sample_rate_hz, band_hz)?;
    let w = window.coefficients(n);
    let u = w.iter().map(|v| v * v).sum::<f64>() / n as f64;
    let norm = 1.0 / (n as f64 * u).sqrt();
    let kept = selection.kept();
    let fft = RealFftPlanner::<f64>::new().plan_fft_forward(n);
    let spectra: Vec<[Vec<Complex64>; 4]> = kept
        .par_iter()
        .map(|&s| -> Result<[Vec<Complex64>; 4]> {
            let mut scratch = fft.make_scratch_vec();
            let mut buf = vec![0.0; n];
            let mut out = fft.make_output_vec();
            let mut dft = |x: &[f64], buf: &mut Vec<f64>| -> Result<Vec<Complex64>> {
                for i in 0..n {
                    buf[i] = x[i] * w[i];
                }
                fft.process_with_scratch(buf, &mut out, &mut scratch)
                    .map_err(|e| Error::Domain(format!("forward transform failed: {e}")))?;
                Ok(out[k0..=k1].iter().map(|v| v * norm).collect())
            };
            let sum = dft(ds.segment(Channel::Sum, s).unwrap(), &mut buf)?;
            let diff = dft(ds.segment(Channel::Difference, s).unwrap(), &mut buf)?;
            let meter = ds.segment(Channel::Meter, s).unwrap();
            let m = dft(meter, &mut buf)?;
            let sq: Vec<f64> = meter.iter().map(|v| v * v).collect();
            let mean = sq.iter().sum::<f64>() / n as f64;
            let sq: Vec<f64> = sq.iter().map(|v| v - mean).collect();
            let m2 = dft(&sq, &mut buf)?;
            Ok([sum, diff, m, m2])
        })
        .collect::<Result<Vec<_>>>()?;
    let mut channels: BTreeMap<Channel, Vec<Vec<Complex64>>> = BTreeMap::new();
    for ch in [Channel::Sum, Channel::Difference, Channel::Meter, Channel::MeterSquared] {
        channels.insert(ch, Vec::with_capacity(kept.len()));
    }
    for [a, b, c, d] in spectra {
        channels.get_mut(&Channel::Sum).unwrap().push(a);
        channels.get_mut(&Channel::Difference).unwrap().push(b);
        channels.get_mut(&Channel::Meter).unwrap().push(c);
        channels.get_mut(&Channel::MeterSquared).unwrap().push(d);
    }
    let df = ds.meta.sample_rate_hz / n as f64;
    Ok(SegmentSet {
        frequencies_hz: (k0..=k1).map(|k| k as f64 * df).collect(),
        first_bin: k0,
        segment_length: n,
        sample_rate_hz: ds.meta.sample_rate_hz,
        window,
        segment_index: kept,
        channels,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::DataMeta;

    pub(crate) fn dataset(sum: Vec<f64>, diff: Vec<f64>, meter: Vec<f64>, len: usize) -> DataSet {
        let n_segments = sum.len() / len;
        DataSet {
            meta: DataMeta {
                sample_rate_hz: 1024.0,
                segment_length: len,
                n_segments,
                seed: 0,
                config_hash: String::new(),
                extra: BTreeMap::new(),
            },
            sum,
            difference: diff,
            meter,
        }
    }

    fn noise(n: usize, seed: u64) -> Vec<f64> {
        use rand_distr::{Distribution, StandardNormal};
        let mut rng = crate::synth::segment_rng(seed, 0);
        (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    #[test]
    fn quiet_data_all_kept_and_spike_rejected() {
        let len = 256;
        let mut sum = noise(8 * len, 1);
        let ds = dataset(sum.clone(), noise(8 * len, 2), noise(8 * len, 3), len);
        let sel = segment_and_select(&ds, 12.0, 3.0).unwrap();
        assert_eq!(sel.kept_fraction(), 1.0);
        sum[5 * len + 17] = 40.0;
        let ds = dataset(sum, noise(8 * len, 2), noise(8 * len, 3), len);
        let sel = segment_and_select(&ds, 12.0, 3.0).unwrap();
        assert_eq!(sel.kept(), vec![0, 1, 2, 3, 4, 6, 7]);
    }

    #[test]
    fn too_few_segments() {
        let len = 64;
        let mut sum = noise(5 * len, 1);
        for s in 0..2 {
            sum[s * len] = 100.0;
        }
        let ds = dataset(sum, noise(5 * len, 2), noise(5 * len, 3), len);
        let err = segment_and_select(&ds, 12.0, 3.0).unwrap_err();
        assert!(matches!(err, Error::TooFewSegments { kept: 3, required: 4 }));
    }

    #[test]
    fn sinusoid_at_bin_center_is_a_single_line() {
        let len = 1024;
        let k = 100;
        let x: Vec<f64> = (0..4 * len)
            .map(|i| (2.0 * std::f64::consts::PI * k as f64 * (i % len) as f64 / len as f64).cos())
            .collect();
        let ds = dataset(x.clone(), x.clone(), x, len);
        let sel = segment_and_select(&ds, 12.0, 3.0).unwrap();
        let seg = transform(&ds, &sel, Window::Rectangular, (0.0, 512.0)).unwrap();
        let s = &seg.channel(Channel::Sum).unwrap()[0];
        for (i, v) in s.iter().enumerate() {
            if i == k {
                assert!((v.norm_sqr() - len as f64 / 4.0).abs() < 1e-9);
            } else {
                assert!(v.norm() < 1e-9, "leak at {i}");
            }
        }
    }

    #[test]
    fn parseval() {
        let len = 512;
        let x = noise(4 * len, 9);
        let ds = dataset(x.clone(), x.clone(), x.clone(), len);
        let sel = segment_and_select(&ds, 100.0, 100.0).unwrap();
        let seg = transform(&ds, &sel, Window::Rectangular, (0.0, 512.0)).unwrap();
        for (n, s) in seg.channel(Channel::Sum).unwrap().iter().enumerate() {
            let time: f64 = x[n * len..(n + 1) * len].iter().map(|v| v * v).sum();
            // one-sided bins: DC and Nyquist once, the rest twice
            let freq: f64 = s
                .iter()
                .enumerate()
                .map(|(k, v)| if k == 0 || k == len / 2 { v.norm_sqr() } else { 2.0 * v.norm_sqr() })
                .sum();
            assert!((freq - time).abs() < 1e-9 * time);
        }
    }

    #[test]
    fn hann_keeps_white_level() {
        let len = 1024;
        let segs = 64;
        let x = noise(segs * len, 4);
        let ds = dataset(x.clone(), x.clone(), x, len);
        let sel = segment_and_select(&ds, 100.0, 100.0).unwrap();
        let seg = transform(&ds, &sel, Window::Hann, (100.0, 400.0)).unwrap();
        let s = seg.channel(Channel::Sum).unwrap();
        let mean: f64 = s.iter().flatten().map(|v| v.norm_sqr()).sum::<f64>() / (segs * seg.n_bins()) as f64;
        assert!((mean - 1.0).abs() < 0.03, "{mean}");
    }

    #[test]
    fn meter_squared_has_no_dc() {
        let len = 256;
        let x = noise(4 * len, 5);
        let ds = dataset(x.clone(), x.clone(), x, len);
        let sel = segment_and_select(&ds, 100.0, 100.0).unwrap();
        let seg = transform(&ds, &sel, Window::Rectangular, (0.0, 128.0)).unwrap();
        for s in seg.channel(Channel::MeterSquared).unwrap() {
            assert!(s[0].norm() < 1e-12);
        }
    }
}
