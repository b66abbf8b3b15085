//! Least-squares recovery of the parameters that are not measured
//! independently: detuning, signal phase and the ζ background amplitude.
//!
//! The loss is a weighted log-spectral sum of squares over frequency bands,
//! minimized by a bounded Nelder–Mead simplex from several seeded starting
//! points.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::SpectrumEstimate;
use crate::om::OmModel;
use crate::output::Table;
use crate::params::SystemParams;
use crate::synth::segment_rng;
use crate::theory::point_spectra;
use crate::units::hz_to_rad;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FreeParam {
    /// Effective detuning in units of κ.
    Detuning,
    /// Signal phase φ_s in radians.
    SignalPhase,
    /// Background amplitude of the ζ spectrum.
    ZetaBackground,
}

impl FreeParam {
    pub fn label(self) -> &'static str {
        match self {
            FreeParam::Detuning => "detuning_kappa",
            FreeParam::SignalPhase => "signal_phase_rad",
            FreeParam::ZetaBackground => "zeta_background_amplitude",
        }
    }

    pub fn apply(self, p: &mut SystemParams, value: f64) {
        match self {
            FreeParam::Detuning => *p = p.with_detuning_kappa(value),
            FreeParam::SignalPhase => *p = p.with_signal_phase(value),
            FreeParam::ZetaBackground => p.drive.zeta.background_amplitude = value,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bound {
    pub param: FreeParam,
    pub lo: f64,
    pub hi: f64,
}

impl Bound {
    fn from_unit(&self, u: f64) -> f64 {
        self.lo + u.clamp(0.0, 1.0) * (self.hi - self.lo)
    }
}

pub fn default_bounds() -> Vec<Bound> {
    vec![
        Bound {
            param: FreeParam::Detuning,
            lo: -0.04,
            hi: -0.004,
        },
        Bound {
            param: FreeParam::SignalPhase,
            lo: -0.08,
            hi: 0.02,
        },
        Bound {
            param: FreeParam::ZetaBackground,
            lo: 0.5,
            hi: 20.0,
        },
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitSettings {
    pub band_hz: (f64, f64),
    /// Target bins are grouped into bands at least this wide.
    pub band_width_hz: f64,
    pub n_starts: usize,
    pub seed: u64,
    pub max_evaluations: usize,
    /// Convergence tolerance on the simplex extent in unit-box coordinates.
    pub x_tolerance: f64,
    /// Relative convergence tolerance on the loss spread across the simplex.
    pub f_tolerance: f64,
}

impl Default for FitSettings {
    fn default() -> Self {
        Self {
            band_hz: (145e3, 195e3),
            band_width_hz: 200.0,
            n_starts: 20,
            seed: 7,
            max_evaluations: 2000,
            x_tolerance: 1e-7,
            f_tolerance: 1e-12,
        }
    }
}

/// Which model spectrum a target is compared with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetKind {
    /// Detected signal amplitude quadrature S_XsXs.
    Signal,
    /// Meter quadrature S_YmYm, electronic noise included.
    Meter,
}

#[derive(Debug, Clone)]
pub struct FitProblem {
    pub base: SystemParams,
    pub bounds: Vec<Bound>,
    pub targets: Vec<(TargetKind, SpectrumEstimate)>,
    pub settings: FitSettings,
}

/// A target averaged into bands, in log space.
#[derive(Debug, Clone)]
struct Banded {
    kind: TargetKind,
    lo_hz: Vec<f64>,
    hi_hz: Vec<f64>,
    value: Vec<f64>,
    stderr: Vec<f64>,
    log_value: Vec<f64>,
    weight: Vec<f64>,
}

fn band_target(kind: TargetKind, t: &SpectrumEstimate, s: &FitSettings) -> Result<Banded> {
    let f = &t.frequencies_hz;
    if f.len() != t.values.len() || f.len() != t.stderr.len() {
        return Err(Error::GridMismatch("target columns differ in length".into()));
    }
    let idx: Vec<usize> = (0..f.len()).filter(|&i| f[i] >= s.band_hz.0 && f[i] <= s.band_hz.1).collect();
    if idx.len() < 2 {
        return Err(Error::InsufficientBand {
            lo_hz: s.band_hz.0,
            hi_hz: s.band_hz.1,
        });
    }
    let df = f[idx[1]] - f[idx[0]];
    let per = ((s.band_width_hz / df).round() as usize).max(1);
    let mut b = Banded {
        kind,
        lo_hz: vec![],
        hi_hz: vec![],
        value: vec![],
        stderr: vec![],
        log_value: vec![],
        weight: vec![],
    };
    for chunk in idx.chunks_exact(per) {
        let m = chunk.len() as f64;
        let v = chunk.iter().map(|&i| t.values[i]).sum::<f64>() / m;
        let e = chunk.iter().map(|&i| t.stderr[i].powi(2)).sum::<f64>().sqrt() / m;
        if !(v > 0.0 && e > 0.0) {
            continue;
        }
        b.lo_hz.push(f[chunk[0]] - 0.5 * df);
        b.hi_hz.push(f[chunk[chunk.len() - 1]] + 0.5 * df);
        b.value.push(v);
        b.stderr.push(e);
        b.log_value.push(v.ln());
        // the stderr of log S is σ/S
        b.weight.push((v / e).powi(2));
    }
    if b.value.is_empty() {
        return Err(Error::DegenerateTarget(
            "no band with positive value and standard error".into(),
        ));
    }
    Ok(b)
}

/// Three-point Gauss–Legendre average of a model spectrum over a band.
const GL_NODES: [(f64, f64); 3] = [(-0.774_596_669_241_483_4, 5.0 / 18.0), (0.0, 8.0 / 18.0), (0.774_596_669_241_483_4, 5.0 / 18.0)];

fn band_model(model: &OmModel, kind: TargetKind, lo: f64, hi: f64) -> Result<f64> {
    let c = 0.5 * (lo + hi);
    let h = 0.5 * (hi - lo);
    let mut acc = 0.0;
    for (x, w) in GL_NODES {
        let (sxx, syy, _) = point_spectra(model, hz_to_rad(c + h * x))?;
        acc += w * if kind == TargetKind::Signal { sxx } else { syy };
    }
    Ok(acc)
}

struct Objective<'a> {
    base: SystemParams,
    bounds: &'a [Bound],
    targets: Vec<Banded>,
}

impl Objective<'_> {
    fn params(&self, theta: &[f64]) -> SystemParams {
        let mut p = self.base;
        for (b, &v) in self.bounds.iter().zip(theta) {
            b.param.apply(&mut p, v);
        }
        p
    }

    fn physical(&self, u: &[f64]) -> Vec<f64> {
        self.bounds.iter().zip(u).map(|(b, &x)| b.from_unit(x)).collect()
    }

    fn model_curves(&self, theta: &[f64]) -> Result<Vec<Vec<f64>>> {
        let model = OmModel::new(&self.params(theta))?;
        self.targets
            .iter()
            .map(|t| {
                t.lo_hz
                    .iter()
                    .zip(&t.hi_hz)
                    .map(|(&lo, &hi)| band_model(&model, t.kind, lo, hi))
                    .collect()
            })
            .collect()
    }

    /// Weighted log-spectral sum of squares; model failures score +∞ so the
    /// simplex steps away from them.
    fn loss(&self, theta: &[f64]) -> f64 {
        match self.model_curves(theta) {
            Ok(curves) => {
                let mut acc = 0.0;
                for (t, m) in self.targets.iter().zip(&curves) {
                    for i in 0..m.len() {
                        if !(m[i] > 0.0) {
                            return f64::INFINITY;
                        }
                        acc += t.weight[i] * (m[i].ln() - t.log_value[i]).powi(2);
                    }
                }
                acc
            }
            Err(_) => f64::INFINITY,
        }
    }

    fn loss_unit(&self, u: &[f64]) -> f64 {
        self.loss(&self.physical(u))
    }

    fn n_points(&self) -> usize {
        self.targets.iter().map(|t| t.value.len()).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StartResult {
    pub initial: Vec<f64>,
    pub initial_loss: f64,
    pub values: Vec<f64>,
    pub loss: f64,
    pub evaluations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone)]
pub struct FitReport {
    pub params: Vec<FreeParam>,
    pub values: Vec<f64>,
    /// Curvature-based one-sigma proxy, scaled by the reduced χ² when it
    /// exceeds one. Infinite when the curvature is not positive definite.
    pub uncertainty: Vec<f64>,
    pub loss: f64,
    pub reduced_chi2: f64,
    pub n_points: usize,
    pub degenerate: bool,
    /// A competing optimum within 1% of the best loss, if one was found.
    pub alternative: Option<Vec<f64>>,
    pub starts: Vec<StartResult>,
    pub fitted: SystemParams,
    curves: Vec<(TargetKind, Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>)>,
}

impl FitReport {
    pub fn value(&self, p: FreeParam) -> Option<f64> {
        self.params.iter().position(|&q| q == p).map(|i| self.values[i])
    }

    /// Band centres with target, its standard error and the fitted model.
    pub fn curves_table(&self) -> Table {
        let mut t = Table::new();
        for (kind, f, v, e, m) in &self.curves {
            let tag = match kind {
                TargetKind::Signal => "signal",
                TargetKind::Meter => "meter",
            };
            t.push(format!("{tag}_frequency_hz"), f.clone())
                .push(format!("{tag}_target"), v.clone())
                .push(format!("{tag}_stderr"), e.clone())
                .push(format!("{tag}_model"), m.clone());
        }
        t
    }

    pub fn summary(&self) -> String {
        use std::fmt::Write;
        let mut s = String::new();
        for ((p, v), u) in self.params.iter().zip(&self.values).zip(&self.uncertainty) {
            let _ = writeln!(s, "{} = {:.6e} +- {:.3e}", p.label(), v, u);
        }
        let _ = writeln!(s, "loss = {:.6e}", self.loss);
        let _ = writeln!(s, "reduced_chi2 = {:.4}", self.reduced_chi2);
        let _ = writeln!(s, "n_points = {}", self.n_points);
        let _ = writeln!(s, "degenerate = {}", self.degenerate);
        if let Some(a) = &self.alternative {
            let txt: Vec<String> = a.iter().map(|v| format!("{v:.6e}")).collect();
            let _ = writeln!(s, "alternative = {}", txt.join(", "));
        }
        let conv = self.starts.iter().filter(|r| r.converged).count();
        let _ = writeln!(s, "starts_converged = {}/{}", conv, self.starts.len());
        s
    }
}

/// Bounded Nelder–Mead in the unit box. Points leaving the box are clamped.
fn nelder_mead(f: &dyn Fn(&[f64]) -> f64, x0: &[f64], step: f64, s: &FitSettings) -> (Vec<f64>, f64, usize, bool) {
    let n = x0.len();
    let clamp = |v: Vec<f64>| -> Vec<f64> { v.into_iter().map(|x| x.clamp(0.0, 1.0)).collect() };
    let mut simplex: Vec<Vec<f64>> = vec![x0.to_vec()];
    for i in 0..n {
        let mut v = x0.to_vec();
        // step inward so the vertex stays inside the box
        v[i] += if v[i] + step <= 1.0 { step } else { -step };
        simplex.push(clamp(v));
    }
    let mut fv: Vec<f64> = simplex.iter().map(|v| f(v)).collect();
    let mut evals = n + 1;
    let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);
    loop {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| fv[a].total_cmp(&fv[b]).then(a.cmp(&b)));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        fv = order.iter().map(|&i| fv[i]).collect();

        let extent = simplex[1..]
            .iter()
            .flat_map(|v| v.iter().zip(&simplex[0]).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        let spread = (fv[n] - fv[0]).abs();
        if fv[0].is_finite() && extent < s.x_tolerance && spread <= s.f_tolerance * (fv[0].abs() + 1e-300) + 1e-300 {
            return (simplex.swap_remove(0), fv[0], evals, true);
        }
        if fv[0].is_finite() && extent < s.x_tolerance * 1e-3 {
            // collapsed simplex on a flat loss: nothing left to improve
            return (simplex.swap_remove(0), fv[0], evals, true);
        }
        if evals >= s.max_evaluations {
            return (simplex.swap_remove(0), fv[0], evals, false);
        }

        let centroid: Vec<f64> = (0..n).map(|j| simplex[..n].iter().map(|v| v[j]).sum::<f64>() / n as f64).collect();
        let towards = |t: f64| -> Vec<f64> {
            clamp((0..n).map(|j| centroid[j] + t * (simplex[n][j] - centroid[j])).collect())
        };
        let xr = towards(-alpha);
        let fr = f(&xr);
        evals += 1;
        if fr < fv[0] {
            let xe = towards(-alpha * gamma);
            let fe = f(&xe);
            evals += 1;
            if fe < fr {
                simplex[n] = xe;
                fv[n] = fe;
            } else {
                simplex[n] = xr;
                fv[n] = fr;
            }
            continue;
        }
        if fr < fv[n - 1] {
            simplex[n] = xr;
            fv[n] = fr;
            continue;
        }
        let (xc, fc) = if fr < fv[n] {
            let x = towards(-alpha * rho);
            let v = f(&x);
            (x, v)
        } else {
            let x = towards(rho);
            let v = f(&x);
            (x, v)
        };
        evals += 1;
        if fc < fv[n].min(fr) {
            simplex[n] = xc;
            fv[n] = fc;
            continue;
        }
        for i in 1..=n {
            let v: Vec<f64> = (0..n).map(|j| simplex[0][j] + sigma * (simplex[i][j] - simplex[0][j])).collect();
            simplex[i] = v;
            fv[i] = f(&simplex[i]);
            evals += 1;
        }
    }
}

/// Inverse of a small symmetric matrix by Gauss–Jordan elimination with
/// partial pivoting; `None` if singular.
fn invert(a: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let mut row = r.clone();
            row.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            row
        })
        .collect();
    for c in 0..n {
        let p = (c..n).max_by(|&x, &y| m[x][c].abs().total_cmp(&m[y][c].abs()))?;
        if m[p][c].abs() < 1e-300 {
            return None;
        }
        m.swap(c, p);
        let d = m[c][c];
        m[c].iter_mut().for_each(|v| *v /= d);
        for r in 0..n {
            if r != c {
                let k = m[r][c];
                if k != 0.0 {
                    for j in 0..2 * n {
                        m[r][j] -= k * m[c][j];
                    }
                }
            }
        }
    }
    Some(m.into_iter().map(|r| r[n..].to_vec()).collect())
}

/// Finite-difference Hessian of the loss in physical units.
fn hessian(obj: &Objective, theta: &[f64]) -> Vec<Vec<f64>> {
    let n = theta.len();
    let h: Vec<f64> = obj.bounds.iter().map(|b| 1e-4 * (b.hi - b.lo)).collect();
    let at = |d: &[(usize, f64)]| {
        let mut t = theta.to_vec();
        for &(i, s) in d {
            t[i] += s * h[i];
        }
        obj.loss(&t)
    };
    let f0 = obj.loss(theta);
    let mut hm = vec![vec![0.0; n]; n];
    for i in 0..n {
        hm[i][i] = (at(&[(i, 1.0)]) - 2.0 * f0 + at(&[(i, -1.0)])) / (h[i] * h[i]);
        for j in 0..i {
            let v = (at(&[(i, 1.0), (j, 1.0)]) - at(&[(i, 1.0), (j, -1.0)]) - at(&[(i, -1.0), (j, 1.0)])
                + at(&[(i, -1.0), (j, -1.0)]))
                / (4.0 * h[i] * h[j]);
            hm[i][j] = v;
            hm[j][i] = v;
        }
    }
    hm
}

fn validate(problem: &FitProblem) -> Result<()> {
    if problem.bounds.is_empty() {
        return Err(Error::Config("at least one free parameter is required".into()));
    }
    for (i, b) in problem.bounds.iter().enumerate() {
        if !(b.lo.is_finite() && b.hi.is_finite() && b.hi > b.lo) {
            return Err(Error::Config(format!("bounds of {} must be finite and increasing", b.param.label())));
        }
        if problem.bounds[..i].iter().any(|c| c.param == b.param) {
            return Err(Error::Config(format!("{} listed twice", b.param.label())));
        }
    }
    if problem.targets.is_empty() {
        return Err(Error::Config("no fit target".into()));
    }
    if problem.targets.iter().all(|(_, t)| t.stderr.iter().all(|&e| e == 0.0)) {
        return Err(Error::DegenerateTarget("every standard error is zero".into()));
    }
    let s = &problem.settings;
    if s.n_starts == 0 || s.max_evaluations == 0 || !(s.band_width_hz > 0.0) {
        return Err(Error::Config("fit settings need starts, evaluations and a positive band width".into()));
    }
    problem.base.validate()
}

pub fn fit(problem: &FitProblem) -> Result<FitReport> {
    validate(problem)?;
    let s = &problem.settings;
    let targets = problem
        .targets
        .iter()
        .map(|(k, t)| band_target(*k, t, s))
        .collect::<Result<Vec<_>>>()?;
    let obj = Objective {
        base: problem.base,
        bounds: &problem.bounds,
        targets,
    };
    let dim = problem.bounds.len();

    let starts: Vec<StartResult> = (0..s.n_starts)
        .into_par_iter()
        .map(|i| {
            let mut rng = segment_rng(s.seed, i);
            let u0: Vec<f64> = (0..dim).map(|_| rng.random::<f64>()).collect();
            let initial_loss = obj.loss_unit(&u0);
            let (u, loss, evaluations, converged) = nelder_mead(&|u| obj.loss_unit(u), &u0, 0.1, s);
            StartResult {
                initial: obj.physical(&u0),
                initial_loss,
                values: obj.physical(&u),
                loss,
                evaluations,
                converged,
            }
        })
        .collect();

    let best = (0..starts.len())
        .filter(|&i| starts[i].converged && starts[i].loss.is_finite())
        .min_by(|&a, &b| starts[a].loss.total_cmp(&starts[b].loss).then(a.cmp(&b)))
        .ok_or(Error::FitNonConvergence {
            evaluations: starts.iter().map(|r| r.evaluations).sum(),
        })?;
    let theta = starts[best].values.clone();
    let loss = starts[best].loss;
    let n_points = obj.n_points();
    let dof = n_points.saturating_sub(dim).max(1) as f64;
    let reduced_chi2 = loss / dof;

    // loss = χ², so the curvature matrix is twice the Fisher information
    let hm = hessian(&obj, &theta);
    let uncertainty = match invert(&hm) {
        Some(inv) => (0..dim)
            .map(|i| {
                let v = 2.0 * inv[i][i] * reduced_chi2.max(1.0);
                if v > 0.0 {
                    v.sqrt()
                } else {
                    f64::INFINITY
                }
            })
            .collect(),
        None => vec![f64::INFINITY; dim],
    };

    // identifiability guard: a near-equal optimum far from the best one
    let alternative = starts
        .iter()
        .filter(|r| r.converged && r.loss.is_finite() && r.loss <= loss * 1.01 + 1e-12)
        .find(|r| {
            r.values
                .iter()
                .zip(&theta)
                .zip(&uncertainty)
                .any(|((a, b), u)| (a - b).abs() > u.min(f64::MAX))
        })
        .map(|r| r.values.clone());

    let curves_model = obj.model_curves(&theta)?;
    let curves = obj
        .targets
        .iter()
        .zip(curves_model)
        .map(|(t, m)| {
            let centres = t.lo_hz.iter().zip(&t.hi_hz).map(|(a, b)| 0.5 * (a + b)).collect();
            (t.kind, centres, t.value.clone(), t.stderr.clone(), m)
        })
        .collect();

    // a flat direction is as ambiguous as a competing optimum
    let degenerate = alternative.is_some() || uncertainty.iter().any(|u| !u.is_finite());
    Ok(FitReport {
        params: problem.bounds.iter().map(|b| b.param).collect(),
        fitted: obj.params(&theta),
        values: theta,
        uncertainty,
        loss,
        reduced_chi2,
        n_points,
        degenerate,
        alternative,
        starts,
        curves,
    })
}

/// A noiseless target: the model itself on a grid, with a constant
/// relative standard error.
pub fn model_target(
    system: &SystemParams,
    kind: TargetKind,
    frequencies_hz: &[f64],
    relative_stderr: f64,
) -> Result<SpectrumEstimate> {
    let model = OmModel::new(system)?;
    let values = frequencies_hz
        .par_iter()
        .map(|&f| {
            let (sxx, syy, _) = point_spectra(&model, hz_to_rad(f))?;
            Ok(if kind == TargetKind::Signal { sxx } else { syy })
        })
        .collect::<Result<Vec<f64>>>()?;
    let stderr = values.iter().map(|v| v * relative_stderr).collect();
    Ok(SpectrumEstimate {
        frequencies_hz: frequencies_hz.to_vec(),
        values,
        stderr,
        n_averages: 0,
        sql_reference: None,
        normalized: true,
    })
}
