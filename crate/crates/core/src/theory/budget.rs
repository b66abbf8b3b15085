//! Per-source decomposition of detected spectra.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::om::{quadrature_gains, OmModel};
use crate::output::Table;
use crate::params::{SystemParams, ZetaModel};
use crate::units::rad_to_hz;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Port {
    Signal,
    Meter,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    /// Drive vacuum a₁ plus classical excess amplitude noise ε.
    Laser,
    /// Brownian force ξ.
    Thermal,
    /// Vacuum entering through the cavity loss port, a₂.
    CavityLoss,
    /// Cavity phase noise ζ.
    CavityPhase,
    /// Vacuum admitted by detection losses and mode mismatch, a₃, a₄, a₅.
    DetectionVacuum,
    /// White electronic noise of the meter detector.
    Electronic,
}

impl Source {
    pub const ALL: [Source; 6] = [
        Source::Laser,
        Source::Thermal,
        Source::CavityLoss,
        Source::CavityPhase,
        Source::DetectionVacuum,
        Source::Electronic,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Source::Laser => "laser",
            Source::Thermal => "thermal",
            Source::CavityLoss => "cavity_loss",
            Source::CavityPhase => "cavity_phase",
            Source::DetectionVacuum => "detection_vacuum",
            Source::Electronic => "electronic",
        }
    }
}

/// Which sources are switched on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceMask {
    pub laser: bool,
    pub thermal: bool,
    pub cavity_loss: bool,
    pub cavity_phase: bool,
    pub detection_vacuum: bool,
    pub electronic: bool,
}

impl SourceMask {
    pub const ALL: SourceMask = SourceMask {
        laser: true,
        thermal: true,
        cavity_loss: true,
        cavity_phase: true,
        detection_vacuum: true,
        electronic: true,
    };

    pub fn only(source: Source) -> Self {
        let mut m = SourceMask {
            laser: false,
            thermal: false,
            cavity_loss: false,
            cavity_phase: false,
            detection_vacuum: false,
            electronic: false,
        };
        *m.flag_mut(source) = true;
        m
    }

    pub fn is_on(&self, source: Source) -> bool {
        match source {
            Source::Laser => self.laser,
            Source::Thermal => self.thermal,
            Source::CavityLoss => self.cavity_loss,
            Source::CavityPhase => self.cavity_phase,
            Source::DetectionVacuum => self.detection_vacuum,
            Source::Electronic => self.electronic,
        }
    }

    fn flag_mut(&mut self, source: Source) -> &mut bool {
        match source {
            Source::Laser => &mut self.laser,
            Source::Thermal => &mut self.thermal,
            Source::CavityLoss => &mut self.cavity_loss,
            Source::CavityPhase => &mut self.cavity_phase,
            Source::DetectionVacuum => &mut self.detection_vacuum,
            Source::Electronic => &mut self.electronic,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseBudget {
    pub frequencies: Vec<f64>,
    pub total: Vec<f64>,
    pub contributions: Vec<(Source, Vec<f64>)>,
}

impl NoiseBudget {
    pub fn contribution(&self, source: Source) -> Option<&[f64]> {
        self.contributions.iter().find(|(s, _)| *s == source).map(|(_, v)| v.as_slice())
    }

    pub fn to_table(&self) -> Table {
        let mut t = Table::new();
        t.push("frequency_hz", self.frequencies.iter().map(|&w| rad_to_hz(w)).collect());
        t.push("total", self.total.clone());
        for (s, v) in &self.contributions {
            t.push(s.label(), v.clone());
        }
        t
    }
}

/// Contributions of each source to one port's quadrature spectrum at ω.
fn point_budget(model: &OmModel, port: Port, phase: f64, omega: f64, mask: &SourceMask) -> Result<[f64; 6]> {
    let pos = model.ports(omega)?;
    let neg = model.ports(-omega)?;
    let (p, n) = match port {
        Port::Signal => (pos.signal, neg.signal),
        Port::Meter => (pos.meter, neg.meter),
    };
    let g = quadrature_gains(&p, &n, phase);
    let q = g.quantum_terms();
    let c = g.classical_terms(&model.classical_psd(omega));
    let electronic = match port {
        Port::Meter => model.params.detection.meter_electronic_noise,
        Port::Signal => 0.0,
    };
    let raw = [q[0] + c[0], c[2], q[1], c[1], q[2] + q[3] + q[4], electronic];
    Ok(std::array::from_fn(|k| if mask.is_on(Source::ALL[k]) { raw[k] } else { 0.0 }))
}

/// Budget of a port quadrature. `phase = None` uses the port's operating
/// phase (φ_s for the signal, φ_m for the meter).
pub fn noise_budget(system: &SystemParams, port: Port, phase: Option<f64>, grid: &[f64]) -> Result<NoiseBudget> {
    noise_budget_masked(system, port, phase, grid, &SourceMask::ALL)
}

pub fn noise_budget_masked(
    system: &SystemParams,
    port: Port,
    phase: Option<f64>,
    grid: &[f64],
    mask: &SourceMask,
) -> Result<NoiseBudget> {
    crate::spectrum::check_grid(grid)?;
    let model = OmModel::new(system)?;
    let phase = phase.unwrap_or(match port {
        Port::Signal => model.phases.phi_s,
        Port::Meter => model.phases.phi_m,
    });
    let rows = grid
        .par_iter()
        .map(|&w| point_budget(&model, port, phase, w, mask))
        .collect::<Result<Vec<_>>>()?;
    let contributions: Vec<(Source, Vec<f64>)> = Source::ALL
        .iter()
        .enumerate()
        .map(|(k, &s)| (s, rows.iter().map(|r| r[k]).collect()))
        .collect();
    let total = rows.iter().map(|r| r.iter().sum()).collect();
    Ok(NoiseBudget {
        frequencies: grid.to_vec(),
        total,
        contributions,
    })
}

/// Parameter sets of the cumulative residual budget: laser noise only on a
/// lossless cavity at zero temperature with ideal detection, then cavity
/// losses, thermal force, phase noise and detection losses switched on in
/// turn. The cavity linewidth is held fixed while the loss port is removed.
pub fn residual_stages(system: &SystemParams) -> Vec<(Source, SystemParams)> {
    let full = *system;
    let mut s = full;
    s.cavity.kappa1 = full.cavity.kappa();
    s.cavity.kappa2 = 0.0;
    s.mech.temperature = 0.0;
    s.drive.zeta = ZetaModel::off();
    s.detection.eta_meter = 1.0;
    s.detection.eta_signal = 1.0;
    s.detection.eta_modematch = 1.0;
    s.detection.meter_electronic_noise = 0.0;
    let mut stages = Vec::with_capacity(5);
    // zero temperature leaves the zero-point force; it is part of "thermal"
    let mut laser = s;
    laser.thermal = full.thermal;
    stages.push((Source::Laser, laser));
    s.cavity.kappa1 = full.cavity.kappa1;
    s.cavity.kappa2 = full.cavity.kappa2;
    stages.push((Source::CavityLoss, s));
    s.mech.temperature = full.mech.temperature;
    stages.push((Source::Thermal, s));
    s.drive.zeta = full.drive.zeta;
    stages.push((Source::CavityPhase, s));
    s.detection = full.detection;
    stages.push((Source::DetectionVacuum, s));
    stages
}

/// Budget of the optimal residual S_ΔX by cumulative source activation.
/// Each contribution is the change of the residual when its source is
/// added, so the contributions sum to the full residual; a contribution can
/// be negative when a source changes the signal–meter correlation.
pub fn residual_budget(system: &SystemParams, grid: &[f64]) -> Result<NoiseBudget> {
    let mut prev = vec![0.0; grid.len()];
    let mut contributions = Vec::new();
    for (source, params) in residual_stages(system) {
        let r = super::full::full_output_cross_spectra(&params, grid)?.residual()?;
        contributions.push((source, r.iter().zip(&prev).map(|(a, b)| a - b).collect()));
        prev = r;
    }
    Ok(NoiseBudget {
        frequencies: grid.to_vec(),
        total: prev,
        contributions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectrum::{default_grid, linear_grid};
    use crate::theory::full::full_output_cross_spectra;
    use crate::units::hz_to_rad;

    #[test]
    fn contributions_sum_to_total_and_match_spectra() {
        let p = SystemParams::reference();
        let g = default_grid(p.mech.omega_m);
        let b = noise_budget(&p, Port::Signal, None, &g).unwrap();
        let s = full_output_cross_spectra(&p, &g).unwrap();
        let m = noise_budget(&p, Port::Meter, None, &g).unwrap();
        for i in 0..g.len() {
            let sum: f64 = b.contributions.iter().map(|(_, v)| v[i]).sum();
            assert!((sum - b.total[i]).abs() <= 1e-9 * b.total[i]);
            assert!((b.total[i] - s.s_xx[i]).abs() <= 1e-9 * s.s_xx[i]);
            assert!((m.total[i] - s.s_yy[i]).abs() <= 1e-9 * s.s_yy[i]);
        }
    }

    #[test]
    fn single_source_activation() {
        let p = SystemParams::reference();
        let g = linear_grid(hz_to_rad(160e3), hz_to_rad(180e3), 64);
        for src in Source::ALL {
            let b = noise_budget_masked(&p, Port::Meter, None, &g, &SourceMask::only(src)).unwrap();
            for (s, v) in &b.contributions {
                if *s != src {
                    assert!(v.iter().all(|&x| x == 0.0));
                }
            }
            assert_eq!(b.total, b.contribution(src).unwrap());
        }
    }

    #[test]
    fn phase_noise_contribution_has_minimum_near_bare_resonance() {
        let p = SystemParams::reference();
        let g = default_grid(p.mech.omega_m);
        let b = noise_budget(&p, Port::Signal, None, &g).unwrap();
        let z = b.contribution(Source::CavityPhase).unwrap();
        let i0 = crate::spectrum::nearest_index(&g, p.mech.omega_m);
        let lo = i0 - 40;
        let imin = (lo..i0 + 40).min_by(|&a, &b| z[a].total_cmp(&z[b])).unwrap();
        assert!((imin as i64 - i0 as i64).abs() <= 2, "min at {imin}, bare at {i0}");
        assert!(z[imin] < z[imin - 1] && z[imin] < z[imin + 1]);
    }

    #[test]
    fn residual_budget_telescopes_to_full_residual() {
        let p = SystemParams::reference();
        let g = linear_grid(hz_to_rad(160e3), hz_to_rad(180e3), 200);
        let b = residual_budget(&p, &g).unwrap();
        let r = full_output_cross_spectra(&p, &g).unwrap().residual().unwrap();
        for i in 0..g.len() {
            let sum: f64 = b.contributions.iter().map(|(_, v)| v[i]).sum();
            assert!((sum - r[i]).abs() <= 1e-9 * r[i]);
            assert!((b.total[i] - r[i]).abs() <= 1e-12 * r[i]);
        }
        assert_eq!(b.contributions[0].0, Source::Laser);
    }
}
