//! Segment-wise synthesis of three-channel detector records (sum, difference,
//! meter) whose second-order statistics follow the full model, plus the
//! binary dataset format.
//!
//! Each segment is periodic: its DFT bins are drawn independently from the
//! model covariance at the bin frequencies and inverse-transformed. Inside
//! `model_band_hz` the full model is used; outside it every channel carries
//! vacuum only, standing in for the lock loops and AC coupling that remove
//! the large low-frequency content of a real record.

use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::Path;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use rayon::prelude::*;
use realfft::RealFftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::om::OmModel;
use crate::output::config_hash;
use crate::params::SystemParams;
use crate::units::hz_to_rad;

pub const MAGIC: &[u8; 4] = b"QNDL";
pub const FORMAT_VERSION: u8 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    pub sample_rate_hz: f64,
    pub segment_length: usize,
    pub n_segments: usize,
    /// Taken from the `[run]` section of a configuration file, never from `[synth]`.
    #[serde(skip, default = "default_seed")]
    pub seed: u64,
    /// White electronic noise of the sum and difference detectors, SQL units.
    pub electronic_noise_level: f64,
    /// Gain of the quadratic surrogate λ·(z² − ⟨z²⟩) added to the sum channel.
    pub nonlinearity_lambda: f64,
    /// Mean number of spike bursts per second on the sum channel.
    pub spike_rate: f64,
    /// Initial burst amplitude, SQL units of the sum channel.
    pub spike_amplitude: f64,
    pub spike_frequency_hz: f64,
    pub spike_decay_s: f64,
    /// Fraction of the sum-channel power leaking into the difference channel.
    pub common_mode_leak: f64,
    /// Volts-per-SQL-unit scale of the sum and difference detectors.
    pub detector_gain: f64,
    pub meter_gain: f64,
    pub model_band_hz: (f64, f64),
}

pub const DEFAULT_SEED: u64 = 20_240_917;

fn default_seed() -> u64 {
    DEFAULT_SEED
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            sample_rate_hz: 5e6,
            segment_length: 1 << 19,
            n_segments: 64,
            seed: DEFAULT_SEED,
            electronic_noise_level: 10f64.powf(-1.5),
            nonlinearity_lambda: 0.0,
            spike_rate: 0.0,
            spike_amplitude: 40.0,
            spike_frequency_hz: 2e3,
            spike_decay_s: 0.5e-3,
            common_mode_leak: 1e-4,
            detector_gain: 1.0,
            meter_gain: 1.0,
            model_band_hz: (20e3, 400e3),
        }
    }
}

impl SynthConfig {
    pub fn segment_duration(&self) -> f64 {
        self.segment_length as f64 / self.sample_rate_hz
    }

    /// Bin spacing in Hz.
    pub fn resolution_hz(&self) -> f64 {
        self.sample_rate_hz / self.segment_length as f64
    }

    /// Spike rate giving a 10% chance of at least one burst per segment.
    pub fn with_calibrated_spikes(mut self) -> Self {
        self.spike_rate = -(0.9f64).ln() / self.segment_duration();
        self
    }

    pub fn validate(&self, system: &SystemParams) -> Result<()> {
        let f_m = crate::units::rad_to_hz(system.mech.omega_m);
        if !(self.sample_rate_hz > 2.0 * (f_m + 50e3)) {
            return Err(Error::Config(format!(
                "sample rate {} Hz cannot resolve the band up to {} Hz",
                self.sample_rate_hz,
                f_m + 50e3
            )));
        }
        if self.segment_length < 16 || !is_smooth(self.segment_length) {
            return Err(Error::Config(format!(
                "segment length {} must be >= 16 and a product of 2, 3, 5 and 7",
                self.segment_length
            )));
        }
        let checks = [
            ("electronic_noise_level", self.electronic_noise_level),
            ("spike_rate", self.spike_rate),
            ("spike_amplitude", self.spike_amplitude),
            ("nonlinearity_lambda", self.nonlinearity_lambda.abs()),
        ];
        for (name, v) in checks {
            if !(v >= 0.0) {
                return Err(Error::Config(format!("{name} must be >= 0")));
            }
        }
        if !(0.0..=1.0).contains(&self.common_mode_leak) {
            return Err(Error::Config("common_mode_leak must lie in [0, 1]".into()));
        }
        if !(self.detector_gain > 0.0 && self.meter_gain != 0.0 && self.meter_gain.is_finite()) {
            return Err(Error::Config("detector gains must be nonzero".into()));
        }
        if !(self.spike_decay_s > 0.0 && self.spike_frequency_hz > 0.0) {
            return Err(Error::Config("spike shape parameters must be positive".into()));
        }
        let (lo, hi) = self.model_band_hz;
        if !(lo >= 0.0 && hi > lo) {
            return Err(Error::Config("model band must satisfy 0 <= lo < hi".into()));
        }
        Ok(())
    }
}

fn is_smooth(mut n: usize) -> bool {
    for p in [2, 3, 5, 7] {
        while n % p == 0 && n > 1 {
            n /= p;
        }
    }
    n == 1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    Sum,
    Difference,
    Meter,
    MeterSquared,
}

impl Channel {
    pub fn label(self) -> &'static str {
        match self {
            Channel::Sum => "sum",
            Channel::Difference => "difference",
            Channel::Meter => "meter",
            Channel::MeterSquared => "meter_squared",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "sum" => Ok(Channel::Sum),
            "difference" | "diff" => Ok(Channel::Difference),
            "meter" => Ok(Channel::Meter),
            "meter_squared" | "meter2" => Ok(Channel::MeterSquared),
            other => Err(Error::Config(format!("unknown channel {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DataMeta {
    pub sample_rate_hz: f64,
    pub segment_length: usize,
    pub n_segments: usize,
    pub seed: u64,
    pub config_hash: String,
    /// Further header entries (calibration hints, provenance).
    pub extra: BTreeMap<String, String>,
}

impl DataMeta {
    pub fn extra_f64(&self, key: &str) -> Option<f64> {
        self.extra.get(key).and_then(|v| v.parse().ok())
    }
}

/// Three synchronized channels stored contiguously, segment after segment.
#[derive(Debug, Clone, PartialEq)]
pub struct DataSet {
    pub meta: DataMeta,
    pub sum: Vec<f64>,
    pub difference: Vec<f64>,
    pub meter: Vec<f64>,
}

impl DataSet {
    pub fn channel(&self, ch: Channel) -> Option<&[f64]> {
        match ch {
            Channel::Sum => Some(&self.sum),
            Channel::Difference => Some(&self.difference),
            Channel::Meter => Some(&self.meter),
            Channel::MeterSquared => None,
        }
    }

    pub fn segment(&self, ch: Channel, n: usize) -> Option<&[f64]> {
        let len = self.meta.segment_length;
        self.channel(ch)?.get(n * len..(n + 1) * len)
    }

    pub fn validate(&self) -> Result<()> {
        let expected = self.meta.segment_length * self.meta.n_segments;
        for (name, c) in [("sum", &self.sum), ("difference", &self.difference), ("meter", &self.meter)] {
            if c.len() != expected {
                return Err(Error::Format(format!("{name} channel has {} samples, expected {expected}", c.len())));
            }
            if c.iter().any(|v| !v.is_finite()) {
                return Err(Error::Format(format!("{name} channel contains non-finite samples")));
            }
        }
        Ok(())
    }
}

/// Per-bin synthesis recipe: a Cholesky factor of the non-ζ part of the
/// (X_s, Y_m) covariance plus the ζ gains of both quadratures.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinModel {
    pub l11: f64,
    pub l21: Complex64,
    pub l22: f64,
    pub gx_zeta: Complex64,
    pub gy_zeta: Complex64,
    pub s_zeta: f64,
}

impl BinModel {
    pub const VACUUM: BinModel = BinModel {
        l11: 1.0,
        l21: Complex64 { re: 0.0, im: 0.0 },
        l22: 1.0,
        gx_zeta: Complex64 { re: 0.0, im: 0.0 },
        gy_zeta: Complex64 { re: 0.0, im: 0.0 },
        s_zeta: 0.0,
    };

    pub fn at(model: &OmModel, omega: f64) -> Result<Self> {
        let (gs, gm) = model.gains(omega)?;
        let mut psd = model.classical_psd(omega);
        let s_zeta = psd[1];
        psd[1] = 0.0;
        let sxx = gs.power(&psd);
        let syy = gm.power(&psd);
        let sxy = gs.cross(&gm, &psd);
        let l11 = sxx.sqrt();
        let l21 = sxy.conj() / l11;
        let l22 = (syy - l21.norm_sqr()).max(0.0).sqrt();
        Ok(Self {
            l11,
            l21,
            l22,
            gx_zeta: gs.classical[1],
            gy_zeta: gm.classical[1],
            s_zeta,
        })
    }

    /// Model covariance (S_XX, S_YY, S_XY) without electronic noise.
    pub fn covariance(&self) -> (f64, f64, Complex64) {
        let sxx = self.l11 * self.l11 + self.gx_zeta.norm_sqr() * self.s_zeta;
        let syy = self.l21.norm_sqr() + self.l22 * self.l22 + self.gy_zeta.norm_sqr() * self.s_zeta;
        let sxy = self.l11 * self.l21.conj() + self.gx_zeta * self.gy_zeta.conj() * self.s_zeta;
        (sxx, syy, sxy)
    }
}

/// Bin recipes for k = 0..=N/2.
pub fn bin_models(system: &SystemParams, cfg: &SynthConfig) -> Result<Vec<BinModel>> {
    let model = OmModel::new(system)?;
    let df = cfg.resolution_hz();
    let (lo, hi) = cfg.model_band_hz;
    (0..=cfg.segment_length / 2)
        .into_par_iter()
        .map(|k| {
            let f = k as f64 * df;
            if k == 0 || f < lo || f > hi {
                Ok(BinModel::VACUUM)
            } else {
                BinModel::at(&model, hz_to_rad(f))
            }
        })
        .collect()
}

fn cnormal(rng: &mut ChaCha8Rng, scale: f64) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re, im) * (scale * std::f64::consts::FRAC_1_SQRT_2)
}

pub fn segment_rng(seed: u64, segment: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(segment as u64);
    rng
}

/// Draw the signal, meter and ζ-driven meter spectra of one segment. Bin
/// amplitudes satisfy E|X_k|² = N·S(ω_k); DC and Nyquist are left at zero.
fn draw_bins(
    bins: &[BinModel],
    n: usize,
    rng: &mut ChaCha8Rng,
) -> (Vec<Complex64>, Vec<Complex64>, Vec<Complex64>) {
    let half = bins.len();
    let scale = (n as f64).sqrt();
    let mut x = vec![Complex64::new(0.0, 0.0); half];
    let mut y = x.clone();
    let mut z = x.clone();
    for k in 1..half - 1 {
        let b = &bins[k];
        let u1 = cnormal(rng, scale);
        let u2 = cnormal(rng, scale);
        let zeta = cnormal(rng, scale * b.s_zeta.sqrt());
        let zy = b.gy_zeta * zeta;
        x[k] = b.l11 * u1 + b.gx_zeta * zeta;
        y[k] = b.l21 * u1 + b.l22 * u2 + zy;
        z[k] = zy;
    }
    (x, y, z)
}

struct SegmentOut {
    sum: Vec<f64>,
    difference: Vec<f64>,
    meter: Vec<f64>,
}

fn synth_segment(
    bins: &[BinModel],
    cfg: &SynthConfig,
    meter_electronic: f64,
    index: usize,
) -> Result<SegmentOut> {
    let n = cfg.segment_length;
    let mut rng = segment_rng(cfg.seed, index);
    let (mut xk, mut yk, mut zk) = draw_bins(bins, n, &mut rng);
    let mut planner = RealFftPlanner::<f64>::new();
    let inv = planner.plan_fft_inverse(n);
    let irfft = |half: &mut Vec<Complex64>| -> Result<Vec<f64>> {
        let mut out = vec![0.0; n];
        inv.process(half, &mut out)
            .map_err(|e| Error::Domain(format!("inverse transform failed: {e}")))?;
        let norm = 1.0 / n as f64;
        out.iter_mut().for_each(|v| *v *= norm);
        Ok(out)
    };
    let mut xs = irfft(&mut xk)?;
    let mut ym = irfft(&mut yk)?;
    if cfg.nonlinearity_lambda != 0.0 {
        let z = irfft(&mut zk)?;
        let mean = z.iter().map(|v| v * v).sum::<f64>() / n as f64;
        for (s, zv) in xs.iter_mut().zip(&z) {
            *s += cfg.nonlinearity_lambda * (zv * zv - mean);
        }
    }
    let leak = cfg.common_mode_leak.sqrt();
    let keep = (1.0 - cfg.common_mode_leak).sqrt();
    let mut diff: Vec<f64> = xs
        .iter()
        .map(|s| {
            let v: f64 = StandardNormal.sample(&mut rng);
            keep * v + leak * s
        })
        .collect();
    let e = cfg.electronic_noise_level.sqrt();
    let em = meter_electronic.sqrt();
    for i in 0..n {
        let a: f64 = StandardNormal.sample(&mut rng);
        let b: f64 = StandardNormal.sample(&mut rng);
        let c: f64 = StandardNormal.sample(&mut rng);
        xs[i] += e * a;
        diff[i] += e * b;
        ym[i] += em * c;
    }
    if cfg.spike_rate > 0.0 && cfg.spike_amplitude > 0.0 {
        add_spikes(&mut xs, cfg, &mut rng);
    }
    for v in xs.iter_mut().chain(diff.iter_mut()) {
        *v *= cfg.detector_gain;
    }
    for v in ym.iter_mut() {
        *v *= cfg.meter_gain;
    }
    Ok(SegmentOut {
        sum: xs,
        difference: diff,
        meter: ym,
    })
}

/// Decaying kHz bursts A·e^{−t/τ}·sin(2πf t) at Poisson-distributed onsets.
fn add_spikes(x: &mut [f64], cfg: &SynthConfig, rng: &mut ChaCha8Rng) {
    let mean = cfg.spike_rate * cfg.segment_duration();
    let count = Poisson::new(mean).map(|p| p.sample(rng) as usize).unwrap_or(0);
    let dt = 1.0 / cfg.sample_rate_hz;
    let span = (cfg.spike_decay_s * 14.0 / dt) as usize;
    for _ in 0..count {
        let start = rng.random_range(0..x.len());
        // a random phase keeps the peak close to the nominal amplitude
        let phase = std::f64::consts::FRAC_PI_2 * rng.random::<f64>();
        for (j, v) in x[start..].iter_mut().take(span).enumerate() {
            let t = j as f64 * dt;
            let w = 2.0 * std::f64::consts::PI * cfg.spike_frequency_hz * t + phase;
            *v += cfg.spike_amplitude * (-t / cfg.spike_decay_s).exp() * w.cos();
        }
    }
}

#[derive(Serialize)]
struct HashInput<'a> {
    system: &'a SystemParams,
    synth: &'a SynthConfig,
    seed: u64,
}

pub fn dataset_hash(system: &SystemParams, cfg: &SynthConfig) -> String {
    config_hash(&HashInput {
        system,
        synth: cfg,
        seed: cfg.seed,
    })
}

/// Generate a dataset. Segments are produced in parallel from independent
/// counter-based streams, so the output does not depend on the worker count.
pub fn synthesize(system: &SystemParams, cfg: &SynthConfig) -> Result<DataSet> {
    cfg.validate(system)?;
    let bins = bin_models(system, cfg)?;
    let n = cfg.segment_length;
    let total = n * cfg.n_segments;
    let mut sum = vec![0.0; total];
    let mut difference = vec![0.0; total];
    let mut meter = vec![0.0; total];
    let meter_electronic = system.detection.meter_electronic_noise;
    sum.par_chunks_mut(n)
        .zip(difference.par_chunks_mut(n))
        .zip(meter.par_chunks_mut(n))
        .enumerate()
        .try_for_each(|(i, ((s, d), m))| -> Result<()> {
            let seg = synth_segment(&bins, cfg, meter_electronic, i)?;
            s.copy_from_slice(&seg.sum);
            d.copy_from_slice(&seg.difference);
            m.copy_from_slice(&seg.meter);
            Ok(())
        })?;
    let mut extra = BTreeMap::new();
    extra.insert("electronic_noise_level".into(), fmt_f64(cfg.electronic_noise_level));
    extra.insert("meter_electronic_noise".into(), fmt_f64(meter_electronic));
    extra.insert("detector_gain".into(), fmt_f64(cfg.detector_gain));
    extra.insert("meter_gain".into(), fmt_f64(cfg.meter_gain));
    extra.insert("generator".into(), format!("qndlab {}", env!("CARGO_PKG_VERSION")));
    Ok(DataSet {
        meta: DataMeta {
            sample_rate_hz: cfg.sample_rate_hz,
            segment_length: n,
            n_segments: cfg.n_segments,
            seed: cfg.seed,
            config_hash: dataset_hash(system, cfg),
            extra,
        },
        sum,
        difference,
        meter,
    })
}

fn fmt_f64(v: f64) -> String {
    format!("{v:e}")
}

/// Difference-channel records at several shot-noise levels (proportional to
/// the total photocurrent), for the calibration-linearity sweep. Each record
/// holds `n_segments` segments of white shot noise at `level` plus the
/// electronic floor, scaled by the detector gain.
pub fn synthesize_shot_sweep(levels: &[f64], cfg: &SynthConfig) -> Vec<Vec<f64>> {
    let n = cfg.segment_length * cfg.n_segments;
    levels
        .par_iter()
        .enumerate()
        .map(|(i, &level)| {
            let mut rng = segment_rng(cfg.seed ^ 0x5eed_ca11, i);
            let s = level.max(0.0).sqrt();
            let e = cfg.electronic_noise_level.sqrt();
            (0..n)
                .map(|_| {
                    let a: f64 = StandardNormal.sample(&mut rng);
                    let b: f64 = StandardNormal.sample(&mut rng);
                    cfg.detector_gain * (s * a + e * b)
                })
                .collect()
        })
        .collect()
}

/// Per-segment DFT bins of (X_s, Y_m) on a band, drawn directly from the
/// model covariance plus electronic noise. Statistically identical to
/// transforming a synthesized record with λ = 0 and no spikes, at a small
/// fraction of the cost; used by Monte-Carlo studies.
pub struct BandDraw {
    pub frequencies_hz: Vec<f64>,
    /// `x[n][k]`, normalized so that E|x|² = S (periodogram units).
    pub x: Vec<Vec<Complex64>>,
    pub y: Vec<Vec<Complex64>>,
}

pub fn draw_band(system: &SystemParams, cfg: &SynthConfig, band_hz: (f64, f64)) -> Result<BandDraw> {
    let model = OmModel::new(system)?;
    let df = cfg.resolution_hz();
    let k0 = (band_hz.0 / df).ceil().max(1.0) as usize;
    let k1 = ((band_hz.1 / df).floor() as usize).min(cfg.segment_length / 2 - 1);
    let freqs: Vec<f64> = (k0..=k1).map(|k| k as f64 * df).collect();
    let bins = freqs
        .iter()
        .map(|&f| BinModel::at(&model, hz_to_rad(f)))
        .collect::<Result<Vec<_>>>()?;
    let e = cfg.electronic_noise_level;
    let em = system.detection.meter_electronic_noise;
    let draws: Vec<(Vec<Complex64>, Vec<Complex64>)> = (0..cfg.n_segments)
        .into_par_iter()
        .map(|s| {
            let mut rng = segment_rng(cfg.seed, s);
            let mut xs = Vec::with_capacity(bins.len());
            let mut ys = Vec::with_capacity(bins.len());
            for b in &bins {
                let u1 = cnormal(&mut rng, 1.0);
                let u2 = cnormal(&mut rng, 1.0);
                let zeta = cnormal(&mut rng, b.s_zeta.sqrt());
                let ex = cnormal(&mut rng, e.sqrt());
                let ey = cnormal(&mut rng, em.sqrt());
                xs.push(b.l11 * u1 + b.gx_zeta * zeta + ex);
                ys.push(b.l21 * u1 + b.l22 * u2 + b.gy_zeta * zeta + ey);
            }
            (xs, ys)
        })
        .collect();
    let (x, y) = draws.into_iter().unzip();
    Ok(BandDraw {
        frequencies_hz: freqs,
        x,
        y,
    })
}

pub fn write_dataset(ds: &DataSet, path: &Path) -> Result<()> {
    ds.validate()?;
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    let io = |e| Error::io(path, e);
    w.write_all(MAGIC).map_err(io)?;
    w.write_all(&[FORMAT_VERSION]).map_err(io)?;
    let m = &ds.meta;
    let mut header = format!(
        "sample_rate_hz={}\nsegment_length={}\nn_segments={}\nseed={}\nconfig_hash={}\n",
        fmt_f64(m.sample_rate_hz),
        m.segment_length,
        m.n_segments,
        m.seed,
        m.config_hash
    );
    for (k, v) in &m.extra {
        if k.contains(['=', '\n']) || v.contains('\n') {
            return Err(Error::Format(format!("header entry {k:?} is not representable")));
        }
        header.push_str(&format!("{k}={v}\n"));
    }
    header.push('\n');
    w.write_all(header.as_bytes()).map_err(io)?;
    for c in [&ds.sum, &ds.difference, &ds.meter] {
        for v in c.iter() {
            w.write_all(&v.to_le_bytes()).map_err(io)?;
        }
    }
    w.flush().map_err(io)
}

pub fn read_dataset(path: &Path) -> Result<DataSet> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_dataset(&bytes)
}

pub fn parse_dataset(bytes: &[u8]) -> Result<DataSet> {
    if bytes.len() < 5 || &bytes[..4] != MAGIC {
        return Err(Error::Format("bad magic bytes, not a QNDL dataset".into()));
    }
    if bytes[4] != FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported format version {}", bytes[4])));
    }
    let rest = &bytes[5..];
    let end = rest
        .windows(2)
        .position(|w| w == b"\n\n")
        .ok_or_else(|| Error::Format("header is not terminated by a blank line".into()))?;
    let header = std::str::from_utf8(&rest[..end]).map_err(|_| Error::Format("header is not UTF-8".into()))?;
    let mut fields: BTreeMap<String, String> = BTreeMap::new();
    for line in header.lines() {
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Format(format!("malformed header line {line:?}")))?;
        fields.insert(k.to_string(), v.to_string());
    }
    let mut take = |key: &str| {
        fields
            .remove(key)
            .ok_or_else(|| Error::Format(format!("missing header key {key}")))
    };
    let num = |key: &str, v: String| -> Result<u64> {
        v.parse().map_err(|_| Error::Format(format!("bad value for {key}: {v:?}")))
    };
    let sample_rate_hz: f64 = {
        let v = take("sample_rate_hz")?;
        v.parse().map_err(|_| Error::Format(format!("bad sample_rate_hz {v:?}")))?
    };
    let segment_length = num("segment_length", take("segment_length")?)? as usize;
    let n_segments = num("n_segments", take("n_segments")?)? as usize;
    let seed = num("seed", take("seed")?)?;
    let config_hash = take("config_hash")?;
    let data = &rest[end + 2..];
    let per_channel = segment_length
        .checked_mul(n_segments)
        .ok_or_else(|| Error::Format("header sizes overflow".into()))?;
    let expected = per_channel * 3 * 8;
    if data.len() != expected {
        return Err(Error::Format(format!(
            "data section holds {} bytes, expected {expected}",
            data.len()
        )));
    }
    let channel = |c: usize| -> Vec<f64> {
        data[c * per_channel * 8..(c + 1) * per_channel * 8]
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
            .collect()
    };
    let (sum, difference, meter) = (channel(0), channel(1), channel(2));
    let ds = DataSet {
        meta: DataMeta {
            sample_rate_hz,
            segment_length,
            n_segments,
            seed,
            config_hash,
            extra: fields,
        },
        sum,
        difference,
        meter,
    };
    ds.validate()?;
    Ok(ds)
}
