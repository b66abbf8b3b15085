//! Split-sample residual estimator.
//!
//! The prediction weights α are estimated on one half of the segments and
//! applied to the other; the two cross-evaluations are averaged. Because the
//! weights never see the data they are scored on, the estimate is not biased
//! low by overfitting: its expectation is S_opt·(1 + p/(N/2 − p)) for p
//! information channels and N segments, slightly above the optimum.

use num_complex::Complex64;

use super::segments::{SegmentSet, MIN_SEGMENTS};
use super::spectra::{mean_and_stderr, SpectrumEstimate};
use crate::error::{Error, Result};
use crate::synth::Channel;

/// Relative determinant below which the two-channel system is singular.
pub const SINGULAR_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct ResidualEstimate {
    pub estimate: SpectrumEstimate,
    pub channels_used: Vec<Channel>,
    /// Weights fitted on the odd and even half-sets, `[channel][bin]`.
    pub alpha_odd: Vec<Vec<Complex64>>,
    pub alpha_even: Vec<Vec<Complex64>>,
    /// Residual of the even half scored with odd-half weights, and vice versa.
    pub half_even: SpectrumEstimate,
    pub half_odd: SpectrumEstimate,
}

/// Segment positions of the two half-sets; an odd count drops the last.
fn halves(n: usize) -> Result<(Vec<usize>, Vec<usize>)> {
    if n < MIN_SEGMENTS {
        return Err(Error::TooFewSegments {
            kept: n,
            required: MIN_SEGMENTS,
        });
    }
    let m = n - n % 2;
    Ok(((0..m).step_by(2).collect(), (1..m).step_by(2).collect()))
}

/// Least-squares weights per bin over the given segments.
fn fit_weights(x: &[Vec<Complex64>], ys: &[&[Vec<Complex64>]], idx: &[usize], freqs: &[f64]) -> Result<Vec<Vec<Complex64>>> {
    let nb = freqs.len();
    let p = ys.len();
    let mut alpha = vec![vec![Complex64::new(0.0, 0.0); nb]; p];
    for k in 0..nb {
        // normal equations Σ_j M_ij α_j = b_i with M_ij = Σ Y_j Y_i*, b_i = Σ X Y_i*
        let mut m = [[Complex64::new(0.0, 0.0); 2]; 2];
        let mut b = [Complex64::new(0.0, 0.0); 2];
        for &n in idx {
            for i in 0..p {
                let yi = ys[i][n][k].conj();
                b[i] += x[n][k] * yi;
                for j in 0..p {
                    m[i][j] += ys[j][n][k] * yi;
                }
            }
        }
        match p {
            1 => {
                if m[0][0].re <= 0.0 {
                    return Err(Error::DegenerateDenominator { index: k });
                }
                alpha[0][k] = b[0] / m[0][0];
            }
            2 => {
                let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
                let scale = m[0][0].re * m[1][1].re;
                let rel = det.norm() / scale;
                if !(rel >= SINGULAR_FLOOR) {
                    return Err(Error::SingularCrossMatrix {
                        frequency_hz: freqs[k],
                        relative_det: rel,
                    });
                }
                alpha[0][k] = (b[0] * m[1][1] - m[0][1] * b[1]) / det;
                alpha[1][k] = (m[0][0] * b[1] - m[1][0] * b[0]) / det;
            }
            _ => unreachable!("one or two information channels"),
        }
    }
    Ok(alpha)
}

/// Per-segment residual powers |X − Σ α_j Y_j|² on the given segments.
fn residual_powers(
    x: &[Vec<Complex64>],
    ys: &[&[Vec<Complex64>]],
    alpha: &[Vec<Complex64>],
    idx: &[usize],
) -> Vec<Vec<f64>> {
    idx.iter()
        .map(|&n| {
            (0..x[n].len())
                .map(|k| {
                    let mut r = x[n][k];
                    for (y, a) in ys.iter().zip(alpha) {
                        r -= a[k] * y[n][k];
                    }
                    r.norm_sqr()
                })
                .collect()
        })
        .collect()
}

fn estimate(freqs: &[f64], samples: &[Vec<f64>]) -> SpectrumEstimate {
    let (values, stderr) = mean_and_stderr(samples, freqs.len());
    SpectrumEstimate {
        frequencies_hz: freqs.to_vec(),
        values,
        stderr,
        n_averages: samples.len(),
        sql_reference: None,
        normalized: false,
    }
}

fn split_residual(seg: &SegmentSet, x: Channel, ys: &[Channel]) -> Result<ResidualEstimate> {
    let (odd, even) = halves(seg.n_segments())?;
    let xd = seg.channel(x)?;
    let yd: Vec<&[Vec<Complex64>]> = ys.iter().map(|&c| seg.channel(c)).collect::<Result<_>>()?;
    let f = &seg.frequencies_hz;
    let alpha_odd = fit_weights(xd, &yd, &odd, f)?;
    let alpha_even = fit_weights(xd, &yd, &even, f)?;
    let r_even = residual_powers(xd, &yd, &alpha_odd, &even);
    let r_odd = residual_powers(xd, &yd, &alpha_even, &odd);
    let half_even = estimate(f, &r_even);
    let half_odd = estimate(f, &r_odd);
    let mut estimate_all = estimate(f, &[r_even, r_odd].concat());
    // the average of the two halves, identical to the pooled mean for equal sizes
    for k in 0..f.len() {
        estimate_all.values[k] = 0.5 * (half_even.values[k] + half_odd.values[k]);
    }
    Ok(ResidualEstimate {
        estimate: estimate_all,
        channels_used: ys.to_vec(),
        alpha_odd,
        alpha_even,
        half_even,
        half_odd,
    })
}

pub fn residual_single(seg: &SegmentSet, x: Channel, y: Channel) -> Result<ResidualEstimate> {
    split_residual(seg, x, &[y])
}

pub fn residual_two_channel(seg: &SegmentSet, x: Channel, y1: Channel, y2: Channel) -> Result<ResidualEstimate> {
    split_residual(seg, x, &[y1, y2])
}

/// Expected inflation of the split estimator over the optimum for `p`
/// channels and `n` segments (the weights come from n/2 segments).
pub fn expected_bias_factor(p: usize, n: usize) -> f64 {
    let h = (n / 2) as f64;
    1.0 + p as f64 / (h - p as f64)
}

/// Odd/even agreement normalized to the statistical uncertainty.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitConsistency {
    pub frequencies_hz: Vec<f64>,
    /// (odd − even)/√(σ_odd² + σ_even²) per bin.
    pub normalized_difference: Vec<f64>,
    pub mean: f64,
    pub sd: f64,
    /// Standard error of `mean` treating bins as independent.
    pub mean_stderr: f64,
}

impl SplitConsistency {
    pub fn is_consistent(&self) -> bool {
        self.mean.abs() <= 3.0 * self.mean_stderr
    }
}

pub fn split_consistency(res: &ResidualEstimate) -> SplitConsistency {
    let o = &res.half_odd;
    let e = &res.half_even;
    let d: Vec<f64> = (0..o.values.len())
        .map(|k| {
            let s = (o.stderr[k].powi(2) + e.stderr[k].powi(2)).sqrt();
            if s > 0.0 {
                (o.values[k] - e.values[k]) / s
            } else {
                0.0
            }
        })
        .collect();
    let n = d.len() as f64;
    let mean = d.iter().sum::<f64>() / n;
    let sd = (d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0)).sqrt();
    SplitConsistency {
        frequencies_hz: o.frequencies_hz.clone(),
        normalized_difference: d,
        mean,
        sd,
        mean_stderr: sd / n.sqrt(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimation::spectra::power_spectrum;
    use crate::estimation::spectra::tests::white_set;

    #[test]
    fn duplicate_channel_gives_zero_residual() {
        let mut seg = white_set(128, 10, 1, [1.0; 3]);
        let m = seg.channels[&Channel::Meter].clone();
        seg.channels.insert(Channel::Sum, m);
        let r = residual_single(&seg, Channel::Sum, Channel::Meter).unwrap();
        assert!(r.estimate.values.iter().all(|&v| v < 1e-20));
        for a in r.alpha_odd[0].iter().chain(&r.alpha_even[0]) {
            assert!((a - 1.0).norm() < 1e-12);
        }
    }

    #[test]
    fn odd_count_drops_last_segment() {
        let seg = white_set(64, 9, 2, [1.0; 3]);
        let r = residual_single(&seg, Channel::Sum, Channel::Meter).unwrap();
        assert_eq!(r.estimate.n_averages, 8);
        let seg8 = seg.subset(&(0..8).collect::<Vec<_>>());
        let r8 = residual_single(&seg8, Channel::Sum, Channel::Meter).unwrap();
        assert_eq!(r.estimate.values, r8.estimate.values);
    }

    #[test]
    fn too_few_segments_for_split() {
        let seg = white_set(64, 3, 2, [1.0; 3]);
        assert!(matches!(
            residual_single(&seg, Channel::Sum, Channel::Meter),
            Err(Error::TooFewSegments { .. })
        ));
    }

    #[test]
    fn exchange_symmetry() {
        let seg = white_set(128, 12, 3, [1.0; 3]);
        let r = residual_single(&seg, Channel::Sum, Channel::Meter).unwrap();
        // swapping the roles of the halves: segment order 1,0,3,2,...
        let order: Vec<usize> = (0..12).map(|i| i ^ 1).collect();
        let s = residual_single(&seg.subset(&order), Channel::Sum, Channel::Meter).unwrap();
        for (a, b) in r.estimate.values.iter().zip(&s.estimate.values) {
            assert!((a - b).abs() <= 1e-12 * a.abs());
        }
    }

    #[test]
    fn meter_scale_invariance() {
        let seg = white_set(128, 12, 4, [1.0; 3]);
        let r = residual_two_channel(&seg, Channel::Sum, Channel::Meter, Channel::MeterSquared).unwrap();
        let mut scaled = seg.clone();
        scaled.scale_channel(Channel::Meter, -3.7e4);
        let s = residual_two_channel(&scaled, Channel::Sum, Channel::Meter, Channel::MeterSquared).unwrap();
        for (a, b) in r.estimate.values.iter().zip(&s.estimate.values) {
            assert!((a - b).abs() <= 1e-12 * a.abs());
        }
    }

    #[test]
    fn duplicated_information_channel_is_singular() {
        let mut seg = white_set(64, 8, 5, [1.0; 3]);
        let m = seg.channels[&Channel::Meter].clone();
        seg.channels.insert(Channel::MeterSquared, m);
        assert!(matches!(
            residual_two_channel(&seg, Channel::Sum, Channel::Meter, Channel::MeterSquared),
            Err(Error::SingularCrossMatrix { .. })
        ));
    }

    #[test]
    fn identical_halves_are_consistent() {
        let mut seg = white_set(64, 8, 6, [1.0; 3]);
        for ch in [Channel::Sum, Channel::Meter] {
            let v = seg.channels.get_mut(&ch).unwrap();
            for n in (1..8).step_by(2) {
                v[n] = v[n - 1].clone();
            }
        }
        let r = residual_single(&seg, Channel::Sum, Channel::Meter).unwrap();
        let c = split_consistency(&r);
        assert!(c.normalized_difference.iter().all(|&d| d.abs() < 1e-9));
    }

    #[test]
    fn independent_meter_inflates_by_predicted_bias() {
        // averaged over many bins the inflation matches 1 + 1/(N/2 − 1)
        let n = 16;
        let seg = white_set(4096, n, 7, [1.0; 3]);
        let r = residual_single(&seg, Channel::Sum, Channel::Meter).unwrap();
        let sxx = power_spectrum(&seg, Channel::Sum).unwrap();
        let ratio: f64 = r.estimate.values.iter().sum::<f64>() / sxx.values.iter().sum::<f64>();
        let want = expected_bias_factor(1, n);
        assert!((ratio - want).abs() < 0.02, "{ratio} vs {want}");
    }
}
