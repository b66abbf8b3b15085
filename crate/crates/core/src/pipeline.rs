//! End-to-end analysis of a dataset: selection, transforms, shot-noise
//! calibration, residual estimation, electronic-noise subtraction,
//! normalization and banding.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::banding::BandMinimum;
use crate::estimation::calibration::{CALIBRATION_FREQUENCY_HZ, CALIBRATION_INTERVALS_HZ};
use crate::estimation::{
    band_average, electronic_noise_systematic, msc_estimate, power_spectrum, residual_single, residual_two_channel,
    segment_and_select, shot_calibration, split_consistency, subtract_electronic_noise, transform, BandedEstimate,
    ResidualEstimate, SegmentSet, ShotCalibration, SpectrumEstimate, SplitConsistency, Window,
};
use crate::synth::{Channel, DataSet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineSettings {
    /// Selection limits in units of the median difference-channel rms.
    pub peak_limit: f64,
    pub rms_limit: f64,
    pub window: Window,
    pub analysis_band_hz: (f64, f64),
    /// Information channels for the residual: `meter` or `meter`, `meter_squared`.
    pub channels: Vec<Channel>,
    pub band_widths_hz: Vec<f64>,
    pub confidence: f64,
    pub calibration_intervals_hz: Vec<(f64, f64)>,
    pub calibration_frequency_hz: f64,
    /// Electronic-noise level in SQL units; `None` reads it from the dataset header.
    pub electronic_noise_level: Option<f64>,
    /// Fractional reproducibility of the electronic-noise level.
    pub electronic_reproducibility: f64,
    /// Frequency range searched for the banded residual minimum.
    pub minimum_search_hz: (f64, f64),
}

impl Default for PipelineSettings {
    fn default() -> Self {
        Self {
            peak_limit: 12.0,
            rms_limit: 3.0,
            window: Window::Rectangular,
            analysis_band_hz: (140e3, 200e3),
            channels: vec![Channel::Meter, Channel::MeterSquared],
            band_widths_hz: vec![150.0, 600.0],
            confidence: 0.9,
            calibration_intervals_hz: CALIBRATION_INTERVALS_HZ.to_vec(),
            calibration_frequency_hz: CALIBRATION_FREQUENCY_HZ,
            electronic_noise_level: None,
            electronic_reproducibility: 0.1,
            minimum_search_hz: (160e3, 180e3),
        }
    }
}

impl PipelineSettings {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if !(self.peak_limit > 0.0 && self.rms_limit > 0.0) {
            return bad("selection limits must be positive");
        }
        if !(self.analysis_band_hz.0 >= 0.0 && self.analysis_band_hz.1 > self.analysis_band_hz.0) {
            return bad("analysis band must be an increasing, non-negative range");
        }
        match self.channels.as_slice() {
            [Channel::Meter] | [Channel::Meter, Channel::MeterSquared] => {}
            _ => return bad("channels must be `meter` or `meter,meter_squared`"),
        }
        if self.band_widths_hz.iter().any(|w| !(*w > 0.0)) {
            return bad("band widths must be positive");
        }
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return bad("confidence must lie in (0, 1)");
        }
        if self.calibration_intervals_hz.is_empty() {
            return bad("at least one calibration interval is required");
        }
        if let Some(e) = self.electronic_noise_level {
            if !(e >= 0.0) {
                return bad("electronic noise level must be non-negative");
            }
        }
        if !(self.electronic_reproducibility >= 0.0) {
            return bad("electronic reproducibility must be non-negative");
        }
        Ok(())
    }
}

/// Banded residual at one band width with its minimum in the search range.
#[derive(Debug, Clone, PartialEq)]
pub struct BandedResult {
    pub width_hz: f64,
    pub banded: BandedEstimate,
    pub minimum: Option<BandMinimum>,
}

#[derive(Debug, Clone)]
pub struct PipelineReport {
    pub n_segments: usize,
    pub n_kept: usize,
    pub kept_fraction: f64,
    pub calibration: ShotCalibration,
    /// Electronic level in raw units, as subtracted.
    pub electronic_raw: f64,
    /// Electronic level relative to the raw SQL.
    pub electronic_over_sql: f64,
    pub floored_bins: usize,
    pub systematic: f64,
    /// Normalized (SQL = 1) spectra after electronic-noise subtraction.
    pub sum: SpectrumEstimate,
    pub difference: SpectrumEstimate,
    /// Meter spectrum divided by the squared meter gain.
    pub meter: SpectrumEstimate,
    pub msc: SpectrumEstimate,
    pub residual: ResidualEstimate,
    /// `residual.estimate` after subtraction and normalization.
    pub residual_normalized: SpectrumEstimate,
    pub consistency: SplitConsistency,
    pub banded: Vec<BandedResult>,
}

fn stage<T>(name: &'static str, r: Result<T>) -> Result<T> {
    r.map_err(|e| Error::Stage {
        stage: name,
        source: Box::new(e),
    })
}

/// Selection and transforms only.
pub fn prepare(ds: &DataSet, settings: &PipelineSettings) -> Result<(SegmentSet, usize, usize)> {
    settings.validate()?;
    let sel = stage("selection", segment_and_select(ds, settings.peak_limit, settings.rms_limit))?;
    let seg = stage("transform", transform(ds, &sel, settings.window, settings.analysis_band_hz))?;
    Ok((seg, ds.meta.n_segments, sel.n_kept()))
}

pub fn run(ds: &DataSet, settings: &PipelineSettings) -> Result<PipelineReport> {
    let (seg, n_segments, n_kept) = prepare(ds, settings)?;
    analyze(&seg, ds, settings, n_segments, n_kept)
}

fn analyze(
    seg: &SegmentSet,
    ds: &DataSet,
    settings: &PipelineSettings,
    n_segments: usize,
    n_kept: usize,
) -> Result<PipelineReport> {
    let gain = ds.meta.extra_f64("detector_gain").unwrap_or(1.0);
    let meter_gain = ds.meta.extra_f64("meter_gain").unwrap_or(1.0);
    let level = match settings.electronic_noise_level {
        Some(v) => v,
        None => ds.meta.extra_f64("electronic_noise_level").unwrap_or(0.0),
    };
    let electronic_raw = level * gain * gain;

    let sum_raw = stage("estimation", power_spectrum(seg, Channel::Sum))?;
    let diff_raw = stage("estimation", power_spectrum(seg, Channel::Difference))?;
    let meter_raw = stage("estimation", power_spectrum(seg, Channel::Meter))?;
    let calibration = stage(
        "calibration",
        shot_calibration(&diff_raw, &settings.calibration_intervals_hz, settings.calibration_frequency_hz),
    )?;
    let sql_net = calibration.sql_reference - electronic_raw;
    if !(sql_net > 0.0) {
        return Err(Error::Stage {
            stage: "calibration",
            source: Box::new(Error::Domain(format!(
                "electronic level {electronic_raw:.4e} is not below the SQL {:.4e}",
                calibration.sql_reference
            ))),
        });
    }

    let residual = stage(
        "estimation",
        match settings.channels.as_slice() {
            [y] => residual_single(seg, Channel::Sum, *y),
            [y1, y2] => residual_two_channel(seg, Channel::Sum, *y1, *y2),
            _ => Err(Error::Config("unsupported channel list".into())),
        },
    )?;
    let msc = stage("estimation", msc_estimate(seg, Channel::Sum, Channel::Meter))?;

    let electronic = SpectrumEstimate::constant(seg.frequencies_hz.clone(), electronic_raw, 0.0, sum_raw.n_averages);
    let subtract = |e: &SpectrumEstimate| stage("subtraction", subtract_electronic_noise(e, &electronic));
    let (sum_sub, f1) = subtract(&sum_raw)?;
    let (diff_sub, f2) = subtract(&diff_raw)?;
    let (res_sub, f3) = subtract(&residual.estimate)?;

    let sum = sum_sub.normalized_by(sql_net);
    let difference = diff_sub.normalized_by(sql_net);
    let residual_normalized = res_sub.normalized_by(sql_net);
    let mut meter = meter_raw.normalized_by(meter_gain * meter_gain);
    meter.sql_reference = None;

    let banded = settings
        .band_widths_hz
        .iter()
        .map(|&w| {
            let banded = band_average(&residual_normalized, w, settings.confidence);
            let minimum = banded.minimum_within(settings.minimum_search_hz.0, settings.minimum_search_hz.1);
            BandedResult {
                width_hz: w,
                banded,
                minimum,
            }
        })
        .collect();
    let electronic_over_sql = electronic_raw / calibration.sql_reference;
    Ok(PipelineReport {
        n_segments,
        n_kept,
        kept_fraction: n_kept as f64 / n_segments.max(1) as f64,
        electronic_raw,
        electronic_over_sql,
        floored_bins: f1 + f2 + f3,
        systematic: electronic_noise_systematic(electronic_over_sql, settings.electronic_reproducibility),
        calibration,
        sum,
        difference,
        meter,
        msc,
        consistency: split_consistency(&residual),
        residual,
        residual_normalized,
        banded,
    })
}

impl PipelineReport {
    /// SQL-relative standard error of the calibration.
    pub fn calibration_rel_stderr(&self) -> f64 {
        self.calibration.stderr / (self.calibration.sql_reference - self.electronic_raw)
    }

    pub fn summary(&self) -> String {
        use std::fmt::Write;
        let mut s = String::new();
        let _ = writeln!(s, "segments_total = {}", self.n_segments);
        let _ = writeln!(s, "segments_kept = {}", self.n_kept);
        let _ = writeln!(s, "kept_fraction = {:.4}", self.kept_fraction);
        let _ = writeln!(s, "sql_reference_raw = {:.6e}", self.calibration.sql_reference);
        let _ = writeln!(s, "sql_reference_stderr = {:.6e}", self.calibration.stderr);
        let _ = writeln!(s, "sql_frequency_hz = {:.1}", self.calibration.frequency_hz);
        let _ = writeln!(s, "electronic_raw = {:.6e}", self.electronic_raw);
        let _ = writeln!(s, "electronic_over_sql_db = {:.2}", 10.0 * self.electronic_over_sql.log10());
        let _ = writeln!(s, "electronic_systematic = {:.4}", self.systematic);
        let _ = writeln!(s, "floored_bins = {}", self.floored_bins);
        let labels: Vec<&str> = self.residual.channels_used.iter().map(|c| c.label()).collect();
        let _ = writeln!(s, "residual_channels = {}", labels.join(","));
        let _ = writeln!(s, "consistency_mean = {:.4} +- {:.4}", self.consistency.mean, self.consistency.mean_stderr);
        let _ = writeln!(s, "consistency_sd = {:.4}", self.consistency.sd);
        for b in &self.banded {
            match b.minimum {
                Some(m) => {
                    let _ = writeln!(
                        s,
                        "band_{:.0}hz_minimum = {:.4} +- {:.4} at {:.1} Hz",
                        b.width_hz, m.value, m.stderr, m.frequency_hz
                    );
                }
                None => {
                    let _ = writeln!(s, "band_{:.0}hz_minimum = none", b.width_hz);
                }
            }
        }
        s
    }
}
