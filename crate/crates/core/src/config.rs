//! Sectioned run configuration (TOML). Frequencies and rates are given in
//! Hz and converted to angular units when the physical parameter set is
//! built. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fitting::{default_bounds, Bound, FitSettings};
use crate::output::config_hash;
use crate::params::{
    CavityParams, DetectionParams, Detuning, DriveParams, MechanicalParams, SystemParams, ThermalFrequency, ZetaModel,
};
use crate::pipeline::PipelineSettings;
use crate::synth::{SynthConfig, DEFAULT_SEED};
use crate::units::{hz_to_rad, rad_to_hz, C_LIGHT};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub seed: u64,
    pub out_dir: PathBuf,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            seed: DEFAULT_SEED,
            out_dir: PathBuf::from("qndlab-out"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MechanicsSection {
    pub frequency_hz: f64,
    pub quality_factor: f64,
    pub mass_kg: f64,
    pub temperature_k: f64,
    pub thermal_frequency: ThermalFrequency,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CavitySection {
    /// Input-coupler half-linewidth contribution κ₁/2π.
    pub kappa_input_hz: f64,
    /// Internal-loss contribution κ₂/2π.
    pub kappa_loss_hz: f64,
    pub length_m: f64,
    pub wavelength_m: f64,
    /// Detuning in units of κ = κ₁ + κ₂.
    pub detuning_kappa: f64,
    /// Interpret `detuning_kappa` as the bare detuning and solve for the
    /// effective one.
    pub detuning_is_bare: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DriveSection {
    pub power_w: f64,
    /// Excess amplitude noise is power/excess_noise_power_w in SQL units; 0 disables it.
    pub excess_noise_power_w: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ZetaSection {
    pub peak_center_hz: f64,
    pub peak_width_hz: f64,
    pub peak_amplitude: f64,
    pub background_amplitude: f64,
    pub background_reference_hz: f64,
    pub low_cutoff_hz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectionSection {
    pub eta_meter: f64,
    pub eta_signal: f64,
    pub eta_modematch: f64,
    pub phi0_rad: f64,
    pub p_cavity_arm_w: f64,
    pub p_reference_arm_w: f64,
    pub signal_phase_rad: f64,
    /// Derive the signal phase from `phi0_rad` and the arm powers instead of
    /// using `signal_phase_rad`.
    pub derive_signal_phase: bool,
    pub meter_electronic_noise: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TheorySection {
    /// Full-model grid: `points` frequencies within ± `span_hz` of the resonance.
    pub span_hz: f64,
    pub points: usize,
    /// Simplified-model grid in units of ω_m, centred on 1.
    pub simple_span: f64,
    pub simple_points: usize,
    /// Fixed detection phase of the simplified-model output quadrature, rad.
    pub simple_phase_rad: f64,
}

impl Default for TheorySection {
    fn default() -> Self {
        Self {
            span_hz: 25e3,
            points: 4096,
            simple_span: 0.05,
            simple_points: 2001,
            simple_phase_rad: 0.002,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitSection {
    pub band_hz: (f64, f64),
    pub band_width_hz: f64,
    pub n_starts: usize,
    pub max_evaluations: usize,
    pub x_tolerance: f64,
    pub f_tolerance: f64,
    pub include_signal: bool,
    /// Fit the meter spectrum together with the signal spectrum.
    pub include_meter: bool,
    pub bounds: Vec<Bound>,
}

impl Default for FitSection {
    fn default() -> Self {
        let s = FitSettings::default();
        Self {
            band_hz: s.band_hz,
            band_width_hz: s.band_width_hz,
            n_starts: s.n_starts,
            max_evaluations: s.max_evaluations,
            x_tolerance: s.x_tolerance,
            f_tolerance: s.f_tolerance,
            include_signal: true,
            include_meter: true,
            bounds: default_bounds(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub run: RunSection,
    pub mechanics: MechanicsSection,
    pub cavity: CavitySection,
    pub drive: DriveSection,
    pub zeta: ZetaSection,
    pub detection: DetectionSection,
    pub theory: TheorySection,
    pub synth: SynthConfig,
    pub estimate: PipelineSettings,
    pub fit: FitSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self::from_system(&SystemParams::reference())
    }
}

impl RunConfig {
    /// Configuration whose physical sections reproduce `p`; other sections
    /// take their defaults.
    pub fn from_system(p: &SystemParams) -> Self {
        let kappa = p.cavity.kappa();
        let (detuning_kappa, detuning_is_bare) = match p.cavity.detuning {
            Detuning::Effective(d) => (d / kappa, false),
            Detuning::Bare(d) => (d / kappa, true),
        };
        let z = &p.drive.zeta;
        let d = &p.detection;
        Self {
            run: RunSection::default(),
            mechanics: MechanicsSection {
                frequency_hz: rad_to_hz(p.mech.omega_m),
                quality_factor: p.mech.quality_q(),
                mass_kg: p.mech.mass,
                temperature_k: p.mech.temperature,
                thermal_frequency: p.thermal,
            },
            cavity: CavitySection {
                kappa_input_hz: rad_to_hz(p.cavity.kappa1),
                kappa_loss_hz: rad_to_hz(p.cavity.kappa2),
                length_m: p.cavity.length,
                wavelength_m: 2.0 * std::f64::consts::PI * C_LIGHT / p.cavity.omega_laser,
                detuning_kappa,
                detuning_is_bare,
            },
            drive: DriveSection {
                power_w: p.drive.power,
                excess_noise_power_w: p.drive.excess_noise_power,
            },
            zeta: ZetaSection {
                peak_center_hz: rad_to_hz(z.peak_center),
                peak_width_hz: rad_to_hz(z.peak_width),
                peak_amplitude: z.peak_amplitude,
                background_amplitude: z.background_amplitude,
                background_reference_hz: rad_to_hz(z.background_reference),
                low_cutoff_hz: rad_to_hz(z.low_cutoff),
            },
            detection: DetectionSection {
                eta_meter: d.eta_meter,
                eta_signal: d.eta_signal,
                eta_modematch: d.eta_modematch,
                phi0_rad: d.phi0,
                p_cavity_arm_w: d.p_cavity_arm,
                p_reference_arm_w: d.p_reference_arm,
                signal_phase_rad: d.signal_phase.unwrap_or(0.0),
                derive_signal_phase: d.signal_phase.is_none(),
                meter_electronic_noise: d.meter_electronic_noise,
            },
            theory: TheorySection::default(),
            synth: SynthConfig::default(),
            estimate: PipelineSettings::default(),
            fit: FitSection::default(),
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            e => e,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration is always representable as TOML")
    }

    pub fn hash(&self) -> String {
        config_hash(self)
    }

    pub fn validate(&self) -> Result<()> {
        self.system()?;
        self.synth_config().validate(&self.system()?)?;
        self.estimate.validate()?;
        if !(self.fit.include_signal || self.fit.include_meter) {
            return Err(Error::Config("fit needs the signal or the meter spectrum as target".into()));
        }
        let t = &self.theory;
        if t.points < 2 || t.simple_points < 2 || !(t.span_hz > 0.0) || !(t.simple_span > 0.0 && t.simple_span < 1.0) {
            return Err(Error::Config("theory grids need at least 2 points and a positive span".into()));
        }
        Ok(())
    }

    pub fn system(&self) -> Result<SystemParams> {
        let m = &self.mechanics;
        if !(m.frequency_hz > 0.0 && m.quality_factor > 0.0) {
            return Err(Error::Config("mechanics.frequency_hz and quality_factor must be positive".into()));
        }
        let omega_m = hz_to_rad(m.frequency_hz);
        let c = &self.cavity;
        if !(c.wavelength_m > 0.0) {
            return Err(Error::Config("cavity.wavelength_m must be positive".into()));
        }
        let kappa1 = hz_to_rad(c.kappa_input_hz);
        let kappa2 = hz_to_rad(c.kappa_loss_hz);
        let delta = c.detuning_kappa * (kappa1 + kappa2);
        let z = &self.zeta;
        let d = &self.detection;
        let p = SystemParams {
            mech: MechanicalParams {
                omega_m,
                gamma_m: omega_m / m.quality_factor,
                mass: m.mass_kg,
                temperature: m.temperature_k,
            },
            cavity: CavityParams {
                kappa1,
                kappa2,
                length: c.length_m,
                detuning: if c.detuning_is_bare {
                    Detuning::Bare(delta)
                } else {
                    Detuning::Effective(delta)
                },
                omega_laser: 2.0 * std::f64::consts::PI * C_LIGHT / c.wavelength_m,
            },
            drive: DriveParams {
                power: self.drive.power_w,
                excess_noise_power: self.drive.excess_noise_power_w,
                zeta: ZetaModel {
                    peak_center: hz_to_rad(z.peak_center_hz),
                    peak_width: hz_to_rad(z.peak_width_hz),
                    peak_amplitude: z.peak_amplitude,
                    background_amplitude: z.background_amplitude,
                    background_reference: hz_to_rad(z.background_reference_hz),
                    low_cutoff: hz_to_rad(z.low_cutoff_hz),
                },
            },
            detection: DetectionParams {
                eta_meter: d.eta_meter,
                eta_signal: d.eta_signal,
                eta_modematch: d.eta_modematch,
                phi0: d.phi0_rad,
                p_cavity_arm: d.p_cavity_arm_w,
                p_reference_arm: d.p_reference_arm_w,
                signal_phase: if d.derive_signal_phase {
                    None
                } else {
                    Some(d.signal_phase_rad)
                },
                meter_electronic_noise: d.meter_electronic_noise,
            },
            thermal: m.thermal_frequency,
        };
        p.validate().map_err(|e| match e {
            Error::InvalidParameter(m) => Error::Config(m),
            e => e,
        })?;
        Ok(p)
    }

    pub fn synth_config(&self) -> SynthConfig {
        SynthConfig {
            seed: self.run.seed,
            ..self.synth
        }
    }

    pub fn fit_settings(&self) -> FitSettings {
        let f = &self.fit;
        FitSettings {
            band_hz: f.band_hz,
            band_width_hz: f.band_width_hz,
            n_starts: f.n_starts,
            seed: self.run.seed,
            max_evaluations: f.max_evaluations,
            x_tolerance: f.x_tolerance,
            f_tolerance: f.f_tolerance,
        }
    }
}

impl Default for MechanicsSection {
    fn default() -> Self {
        RunConfig::from_system(&SystemParams::reference()).mechanics
    }
}

impl Default for CavitySection {
    fn default() -> Self {
        RunConfig::from_system(&SystemParams::reference()).cavity
    }
}

impl Default for DriveSection {
    fn default() -> Self {
        RunConfig::from_system(&SystemParams::reference()).drive
    }
}

impl Default for ZetaSection {
    fn default() -> Self {
        RunConfig::from_system(&SystemParams::reference()).zeta
    }
}

impl Default for DetectionSection {
    fn default() -> Self {
        RunConfig::from_system(&SystemParams::reference()).detection
    }
}
