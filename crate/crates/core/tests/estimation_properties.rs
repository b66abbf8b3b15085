use proptest::prelude::*;

use qndlab::estimation::residual::expected_bias_factor;
use qndlab::estimation::{
    msc_estimate, residual_single, residual_two_channel, split_consistency, SegmentSet,
};
use qndlab::om::OmModel;
use qndlab::pipeline::{run, PipelineSettings};
use qndlab::synth::{draw_band, synthesize, BinModel, Channel, SynthConfig};
use qndlab::units::hz_to_rad;
use qndlab::SystemParams;

const BAND: (f64, f64) = (164e3, 176e3);

fn small(seed: u64, n: usize) -> SynthConfig {
    SynthConfig {
        segment_length: 1 << 13,
        n_segments: n,
        seed,
        ..SynthConfig::default()
    }
}

fn drawn(seed: u64, n: usize) -> SegmentSet {
    let cfg = small(seed, n);
    SegmentSet::from_band_draw(draw_band(&SystemParams::reference(), &cfg, BAND).unwrap(), &cfg)
}

/// The set with a second information channel, a noisy copy of the meter.
fn with_second_channel(mut seg: SegmentSet, seed: u64) -> SegmentSet {
    let other = drawn(seed ^ 0xffff, seg.n_segments());
    let meter = seg.channel(Channel::Meter).unwrap().to_vec();
    let noise = other.channel(Channel::Sum).unwrap();
    let y2 = meter
        .iter()
        .zip(noise)
        .map(|(a, b)| a.iter().zip(b).map(|(u, v)| 0.3 * u + v).collect())
        .collect();
    seg.channels.insert(Channel::MeterSquared, y2);
    seg
}

fn rel_close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol * x.abs().max(y.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn swapping_odd_and_even_leaves_the_average(seed in any::<u64>(), pairs in 2usize..12) {
        let seg = drawn(seed, 2 * pairs);
        let swapped: Vec<usize> = (0..2 * pairs).map(|i| i ^ 1).collect();
        let a = residual_single(&seg, Channel::Sum, Channel::Meter).unwrap();
        let b = residual_single(&seg.subset(&swapped), Channel::Sum, Channel::Meter).unwrap();
        prop_assert!(rel_close(&a.estimate.values, &b.estimate.values, 1e-12));
    }

    #[test]
    fn meter_scale_is_absorbed(seed in any::<u64>(), c in prop_oneof![-1e3f64..-1e-3, 1e-3f64..1e3]) {
        let seg = with_second_channel(drawn(seed, 16), seed);
        let mut scaled = seg.clone();
        scaled.scale_channel(Channel::Meter, c);
        let a = residual_single(&seg, Channel::Sum, Channel::Meter).unwrap();
        let b = residual_single(&scaled, Channel::Sum, Channel::Meter).unwrap();
        prop_assert!(rel_close(&a.estimate.values, &b.estimate.values, 1e-12));
        let a2 = residual_two_channel(&seg, Channel::Sum, Channel::Meter, Channel::MeterSquared).unwrap();
        let b2 = residual_two_channel(&scaled, Channel::Sum, Channel::Meter, Channel::MeterSquared).unwrap();
        prop_assert!(rel_close(&a2.estimate.values, &b2.estimate.values, 1e-10));
    }

    #[test]
    fn coherence_estimate_is_bounded(seed in any::<u64>(), n in 2usize..20) {
        let seg = drawn(seed, n);
        let c = msc_estimate(&seg, Channel::Sum, Channel::Meter).unwrap();
        prop_assert!(c.values.iter().all(|v| (0.0..=1.0).contains(v)));
    }
}

#[test]
fn mean_residual_is_conservative_and_converges() {
    let system = SystemParams::reference();
    let model = OmModel::new(&system).unwrap();
    let e = SynthConfig::default().electronic_noise_level;
    let mut excess = Vec::new();
    for n in [8, 32, 128] {
        let mut sum: Vec<f64> = Vec::new();
        let mut optimum: Vec<f64> = Vec::new();
        for r in 0..200u64 {
            let cfg = small(1000 * n as u64 + r, n);
            let draw = draw_band(&system, &cfg, BAND).unwrap();
            if optimum.is_empty() {
                optimum = draw
                    .frequencies_hz
                    .iter()
                    .map(|&f| {
                        let (sxx, syy, sxy) = BinModel::at(&model, hz_to_rad(f)).unwrap().covariance();
                        sxx + e - sxy.norm_sqr() / (syy + system.detection.meter_electronic_noise)
                    })
                    .collect();
                sum = vec![0.0; optimum.len()];
            }
            let res = residual_single(&SegmentSet::from_band_draw(draw, &cfg), Channel::Sum, Channel::Meter).unwrap();
            for (s, v) in sum.iter_mut().zip(&res.estimate.values) {
                *s += v / 200.0;
            }
        }
        let ratio: Vec<f64> = sum.iter().zip(&optimum).map(|(s, o)| s / o).collect();
        let mean = ratio.iter().sum::<f64>() / ratio.len() as f64;
        assert!(ratio.iter().all(|&r| r >= 1.0), "N = {n}: a bin fell below the optimum");
        let want = expected_bias_factor(1, n);
        assert!((mean / want - 1.0).abs() < 0.02, "N = {n}: mean ratio {mean}, predicted {want}");
        excess.push(mean - 1.0);
    }
    assert!(excess[0] > excess[1] && excess[1] > excess[2], "{excess:?}");
}

#[test]
fn split_diagnostic_flags_a_gain_step() {
    let seg = drawn(77, 64);
    let good = split_consistency(&residual_single(&seg, Channel::Sum, Channel::Meter).unwrap());
    assert!(good.is_consistent(), "{} +- {}", good.mean, good.mean_stderr);
    assert!((0.7..=1.3).contains(&good.sd));

    // a 30% signal gain step on every other segment separates the halves
    let mut bad = seg.clone();
    let sum = bad.channels.get_mut(&Channel::Sum).unwrap();
    for (i, s) in sum.iter_mut().enumerate() {
        if i % 2 == 1 {
            s.iter_mut().for_each(|v| *v *= 1.3f64.sqrt());
        }
    }
    let flagged = split_consistency(&residual_single(&bad, Channel::Sum, Channel::Meter).unwrap());
    assert!(!flagged.is_consistent(), "{} +- {}", flagged.mean, flagged.mean_stderr);
}

#[test]
fn pipeline_is_identical_across_worker_counts() {
    let cfg = SynthConfig {
        segment_length: 1 << 15,
        n_segments: 12,
        nonlinearity_lambda: 2e-4,
        ..SynthConfig::default()
    };
    let ds = synthesize(&SystemParams::reference(), &cfg).unwrap();
    let settings = PipelineSettings::default();
    let reports: Vec<_> = [1, 4]
        .iter()
        .map(|&w| {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(w).build().unwrap();
            pool.install(|| run(&ds, &settings)).unwrap()
        })
        .collect();
    let (a, b) = (&reports[0], &reports[1]);
    assert_eq!(a.summary(), b.summary());
    assert_eq!(a.residual_normalized, b.residual_normalized);
    assert_eq!(a.msc, b.msc);
    assert_eq!(a.banded, b.banded);
}
