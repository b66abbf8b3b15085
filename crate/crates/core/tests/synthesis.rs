use num_complex::Complex64;

use qndlab::estimation::spectra::cross_spectrum;
use qndlab::estimation::{msc_estimate, power_spectrum, segment_and_select, transform, SegmentSet, Window};
use qndlab::synth::{synthesize, write_dataset, Channel, DataSet, SynthConfig};
use qndlab::theory::full_output_cross_spectra;
use qndlab::units::hz_to_rad;
use qndlab::SystemParams;

fn segments(ds: &DataSet, band: (f64, f64)) -> SegmentSet {
    let sel = segment_and_select(ds, 1e9, 1e9).unwrap();
    transform(ds, &sel, Window::Rectangular, band).unwrap()
}

fn fraction_within(est: &[f64], se: &[f64], want: &[f64], k: f64) -> f64 {
    let ok = est.iter().zip(se).zip(want).filter(|((e, s), w)| (*e - *w).abs() <= k * *s).count();
    ok as f64 / est.len() as f64
}

#[test]
fn welch_estimates_match_the_model() {
    let system = SystemParams::reference();
    let cfg = SynthConfig {
        segment_length: 1 << 13,
        n_segments: 240,
        ..SynthConfig::default()
    };
    let ds = synthesize(&system, &cfg).unwrap();
    let seg = segments(&ds, (140e3, 200e3));
    let grid: Vec<f64> = seg.frequencies_hz.iter().map(|&f| hz_to_rad(f)).collect();
    let theory = full_output_cross_spectra(&system, &grid).unwrap();

    let sxx = power_spectrum(&seg, Channel::Sum).unwrap();
    let want_xx: Vec<f64> = theory.s_xx.iter().map(|v| v + cfg.electronic_noise_level).collect();
    let fx = fraction_within(&sxx.values, &sxx.stderr, &want_xx, 3.0);

    let syy = power_spectrum(&seg, Channel::Meter).unwrap();
    let fy = fraction_within(&syy.values, &syy.stderr, &theory.s_yy, 3.0);

    // cross spectrum: real and imaginary parts with per-segment scatter
    let sxy = cross_spectrum(&seg, Channel::Sum, Channel::Meter).unwrap();
    let xs = seg.channel(Channel::Sum).unwrap();
    let ys = seg.channel(Channel::Meter).unwrap();
    let n = xs.len() as f64;
    let mut ok = 0;
    for k in 0..seg.n_bins() {
        let p: Vec<Complex64> = xs.iter().zip(ys).map(|(a, b)| a[k] * b[k].conj()).collect();
        let var_re = p.iter().map(|v| (v.re - sxy[k].re).powi(2)).sum::<f64>() / (n - 1.0);
        let var_im = p.iter().map(|v| (v.im - sxy[k].im).powi(2)).sum::<f64>() / (n - 1.0);
        let d = sxy[k] - theory.s_xy[k];
        if d.re.abs() <= 3.0 * (var_re / n).sqrt() && d.im.abs() <= 3.0 * (var_im / n).sqrt() {
            ok += 1;
        }
    }
    let fxy = ok as f64 / seg.n_bins() as f64;
    assert!(fx >= 0.95 && fy >= 0.95 && fxy >= 0.95, "S_XX {fx}, S_YY {fy}, S_XY {fxy}");
}

#[test]
fn difference_channel_is_independent_without_leak() {
    let cfg = SynthConfig {
        segment_length: 1 << 13,
        n_segments: 200,
        common_mode_leak: 0.0,
        ..SynthConfig::default()
    };
    let ds = synthesize(&SystemParams::reference(), &cfg).unwrap();
    let seg = segments(&ds, (140e3, 200e3));
    let n = seg.n_segments() as f64;
    for other in [Channel::Sum, Channel::Meter] {
        let c = msc_estimate(&seg, Channel::Difference, other).unwrap();
        let m = c.values.iter().sum::<f64>() / c.values.len() as f64;
        // for independent Gaussian bins the estimate is Beta(1, N − 1):
        // mean 1/N, standard deviation ≈ 1/N
        let se = (1.0 / n) / (c.values.len() as f64).sqrt();
        assert!((m - 1.0 / n).abs() < 4.0 * se, "{other:?}: mean MSC {m} vs floor {}", 1.0 / n);
    }
}

#[test]
fn files_are_identical_across_worker_counts() {
    let cfg = SynthConfig {
        segment_length: 1 << 12,
        n_segments: 9,
        spike_rate: 200.0,
        nonlinearity_lambda: 1e-4,
        ..SynthConfig::default()
    };
    let system = SystemParams::reference();
    let dir = tempfile::tempdir().unwrap();
    let mut bytes = Vec::new();
    for workers in [1, 3] {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(workers).build().unwrap();
        let ds = pool.install(|| synthesize(&system, &cfg)).unwrap();
        let path = dir.path().join(format!("w{workers}.qndl"));
        write_dataset(&ds, &path).unwrap();
        bytes.push(std::fs::read(&path).unwrap());
    }
    assert_eq!(bytes[0], bytes[1]);
}

#[test]
fn longer_records_keep_per_segment_statistics() {
    let system = SystemParams::reference();
    let short = SynthConfig {
        segment_length: 1 << 12,
        n_segments: 8,
        ..SynthConfig::default()
    };
    let long = SynthConfig { n_segments: 64, ..short };
    let a = synthesize(&system, &short).unwrap();
    let b = synthesize(&system, &long).unwrap();
    let len = short.segment_length * short.n_segments;
    // segments come from per-index substreams, so the shared prefix matches
    assert_eq!(a.sum[..], b.sum[..len]);
    assert_eq!(a.meter[..], b.meter[..len]);
    let sa = power_spectrum(&segments(&a, (140e3, 200e3)), Channel::Sum).unwrap();
    let sb = power_spectrum(&segments(&b, (140e3, 200e3)), Channel::Sum).unwrap();
    let ma = sa.values.iter().sum::<f64>() / sa.values.len() as f64;
    let mb = sb.values.iter().sum::<f64>() / sb.values.len() as f64;
    assert!((ma / mb - 1.0).abs() < 0.1, "{ma} vs {mb}");
}
