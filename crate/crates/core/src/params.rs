//! Physical parameter sets. Constructors named `reference` reproduce the
//! measured device and the operating point of the reference experiment; the
//! few values that were free fit parameters there (phase-noise background,
//! detuning, signal phase) carry documented placeholder defaults.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::{bose_occupancy, hz_to_rad, C_LIGHT, HBAR};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MechanicalParams {
    /// Resonance, rad/s.
    pub omega_m: f64,
    /// Energy damping rate, rad/s.
    pub gamma_m: f64,
    /// Effective mass, kg.
    pub mass: f64,
    /// Bath temperature, K.
    pub temperature: f64,
}

impl MechanicalParams {
    pub fn reference() -> Self {
        let omega_m = hz_to_rad(169_334.0);
        Self {
            omega_m,
            gamma_m: omega_m / 1.1e6,
            mass: 2.5e-7,
            temperature: 5.6,
        }
    }

    pub fn quality_q(&self) -> f64 {
        self.omega_m / self.gamma_m
    }

    /// Thermal occupancy of the mechanical mode at its resonance.
    pub fn n_thermal(&self) -> f64 {
        bose_occupancy(self.omega_m, self.temperature)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega_m > 0.0 && self.gamma_m > 0.0 && self.mass > 0.0) {
            return Err(Error::InvalidParameter(
                "omega_m, gamma_m and mass must be positive".into(),
            ));
        }
        if !(self.temperature >= 0.0) {
            return Err(Error::InvalidParameter("temperature must be >= 0".into()));
        }
        Ok(())
    }
}

/// How the cavity detuning is specified.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Detuning {
    /// Effective detuning Δ including the static radiation-pressure shift.
    Effective(f64),
    /// Bare detuning Δ₀; Δ is found self-consistently.
    Bare(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CavityParams {
    /// Input-coupler rate κ₁, rad/s.
    pub kappa1: f64,
    /// Internal loss rate κ₂, rad/s.
    pub kappa2: f64,
    /// Cavity length, m.
    pub length: f64,
    pub detuning: Detuning,
    /// Laser angular frequency ω₀ (also used for ω_c), rad/s.
    pub omega_laser: f64,
}

impl CavityParams {
    pub fn reference() -> Self {
        let kappa = hz_to_rad(2.85e6);
        Self {
            kappa1: hz_to_rad(2.58e6),
            kappa2: hz_to_rad(0.27e6),
            length: 1.455e-3,
            detuning: Detuning::Effective(-0.016 * kappa),
            omega_laser: 2.0 * std::f64::consts::PI * C_LIGHT / 1064e-9,
        }
    }

    /// Half linewidth κ = κ₁ + κ₂.
    pub fn kappa(&self) -> f64 {
        self.kappa1 + self.kappa2
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kappa1 > 0.0) {
            return Err(Error::InvalidParameter("kappa1 must be positive".into()));
        }
        if !(self.kappa2 >= 0.0) {
            return Err(Error::InvalidParameter("kappa2 must be >= 0".into()));
        }
        if !(self.length > 0.0 && self.omega_laser > 0.0) {
            return Err(Error::InvalidParameter(
                "cavity length and laser frequency must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Cavity phase-noise (detuning fluctuation ζ) spectrum: a Lorentzian
/// resonance plus a 1/ω² background rolled off below `low_cutoff`.
///
/// Amplitudes are two-sided spectral densities of ζ in rad²/s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZetaModel {
    pub peak_center: f64,
    /// Full width at half maximum, rad/s.
    pub peak_width: f64,
    /// Density at the peak center.
    pub peak_amplitude: f64,
    /// Density of the 1/ω² term at `background_reference`.
    pub background_amplitude: f64,
    pub background_reference: f64,
    pub low_cutoff: f64,
}

impl ZetaModel {
    pub fn reference(omega_m: f64) -> Self {
        Self {
            peak_center: hz_to_rad(208e3),
            peak_width: hz_to_rad(2e3),
            peak_amplitude: 50.0,
            background_amplitude: 5.0,
            background_reference: omega_m,
            low_cutoff: hz_to_rad(1e3),
        }
    }

    pub fn off() -> Self {
        Self {
            peak_center: 1.0,
            peak_width: 1.0,
            peak_amplitude: 0.0,
            background_amplitude: 0.0,
            background_reference: 1.0,
            low_cutoff: 1.0,
        }
    }

    pub fn spectral_density(&self, omega: f64) -> f64 {
        let w = omega.abs();
        let hw = 0.5 * self.peak_width;
        let peak = if self.peak_amplitude > 0.0 {
            self.peak_amplitude * hw * hw / ((w - self.peak_center).powi(2) + hw * hw)
        } else {
            0.0
        };
        let bg = if self.background_amplitude > 0.0 {
            let r2 = self.background_reference * self.background_reference;
            self.background_amplitude * r2 / (w * w + self.low_cutoff * self.low_cutoff)
        } else {
            0.0
        };
        peak + bg
    }

    pub fn validate(&self) -> Result<()> {
        if self.peak_amplitude < 0.0 || self.background_amplitude < 0.0 {
            return Err(Error::InvalidParameter(
                "phase-noise amplitudes must be >= 0".into(),
            ));
        }
        if !(self.peak_width > 0.0 && self.low_cutoff > 0.0 && self.background_reference > 0.0) {
            return Err(Error::InvalidParameter(
                "phase-noise widths and reference frequencies must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriveParams {
    /// Laser power impinging on the cavity, W.
    pub power: f64,
    /// Classical amplitude noise is `power / excess_noise_power` in SQL units.
    /// Zero disables it.
    pub excess_noise_power: f64,
    pub zeta: ZetaModel,
}

impl DriveParams {
    pub fn reference(omega_m: f64) -> Self {
        Self {
            power: 38e-3,
            excess_noise_power: 24e-3,
            zeta: ZetaModel::reference(omega_m),
        }
    }

    /// Real drive amplitude E₀ = √(2κ₁P/ħω₀) for the mode-matched power.
    pub fn e0(&self, cavity: &CavityParams, eta_modematch: f64) -> f64 {
        (2.0 * cavity.kappa1 * eta_modematch * self.power / (HBAR * cavity.omega_laser)).sqrt()
    }

    /// Spectral density of the real excess-amplitude-noise term ε (SQL units):
    /// a quarter of the excess intensity noise.
    pub fn s_epsilon(&self) -> f64 {
        if self.excess_noise_power > 0.0 {
            0.25 * self.power / self.excess_noise_power
        } else {
            0.0
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.power >= 0.0) || self.excess_noise_power < 0.0 {
            return Err(Error::InvalidParameter(
                "drive power and excess-noise reference must be >= 0".into(),
            ));
        }
        self.zeta.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionParams {
    pub eta_meter: f64,
    pub eta_signal: f64,
    pub eta_modematch: f64,
    /// Interferometer lock phase φ₀, rad.
    pub phi0: f64,
    /// Power reaching the polarizer from the cavity arm, W.
    pub p_cavity_arm: f64,
    /// Power reaching the polarizer from the reference arm, W.
    pub p_reference_arm: f64,
    /// When set, the signal quadrature phase is used directly instead of
    /// being derived from `phi0` and the arm powers.
    pub signal_phase: Option<f64>,
    /// White electronic noise on the meter, in meter SQL units.
    pub meter_electronic_noise: f64,
}

impl DetectionParams {
    pub fn reference() -> Self {
        Self {
            eta_meter: 0.027,
            eta_signal: 0.69,
            eta_modematch: 0.90,
            phi0: 0.0,
            p_cavity_arm: 25e-3,
            p_reference_arm: 2e-6,
            signal_phase: Some(-24e-3),
            meter_electronic_noise: 0.1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("eta_meter", self.eta_meter),
            ("eta_signal", self.eta_signal),
            ("eta_modematch", self.eta_modematch),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidParameter(format!("{name} must lie in [0, 1]")));
            }
        }
        if self.p_cavity_arm < 0.0 || self.p_reference_arm < 0.0 {
            return Err(Error::InvalidParameter("arm powers must be >= 0".into()));
        }
        if self.meter_electronic_noise < 0.0 {
            return Err(Error::InvalidParameter(
                "meter electronic noise must be >= 0".into(),
            ));
        }
        Ok(())
    }
}

/// Which frequency enters the thermal coupling rate Γ_th = (ω/Q)(n_T + 1/2).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThermalFrequency {
    /// Evaluate at the mechanical resonance (flat Markovian force noise).
    Resonance,
    /// Evaluate at the Fourier frequency, as written for the simplified model.
    Fourier,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    pub mech: MechanicalParams,
    pub cavity: CavityParams,
    pub drive: DriveParams,
    pub detection: DetectionParams,
    pub thermal: ThermalFrequency,
}

impl SystemParams {
    /// Device parameters at the operating point of the sub-SQL residual
    /// measurement (detuning −0.016κ, signal phase −24 mrad).
    pub fn reference() -> Self {
        let mech = MechanicalParams::reference();
        Self {
            mech,
            cavity: CavityParams::reference(),
            drive: DriveParams::reference(mech.omega_m),
            detection: DetectionParams::reference(),
            thermal: ThermalFrequency::Resonance,
        }
    }

    /// Operating point of the ponderomotive-squeezing measurement
    /// (detuning −0.019κ, signal phase −41.5 mrad).
    pub fn squeezing_condition() -> Self {
        let mut p = Self::reference();
        p.cavity.detuning = Detuning::Effective(-0.019 * p.cavity.kappa());
        p.detection.signal_phase = Some(-41.5e-3);
        p
    }

    /// Same detection chain with the drive switched off and every classical
    /// noise source removed: all ports carry vacuum only.
    pub fn vacuum_only(&self) -> Self {
        let mut p = *self;
        p.drive.power = 0.0;
        p.drive.excess_noise_power = 0.0;
        p.drive.zeta = ZetaModel::off();
        p.detection.meter_electronic_noise = 0.0;
        p
    }

    pub fn with_detuning_kappa(mut self, units_of_kappa: f64) -> Self {
        self.cavity.detuning = Detuning::Effective(units_of_kappa * self.cavity.kappa());
        self
    }

    pub fn with_signal_phase(mut self, phi_s: f64) -> Self {
        self.detection.signal_phase = Some(phi_s);
        self
    }

    /// Symmetrized spectral density of the Brownian force ξ at `omega`.
    pub fn s_xi(&self, omega: f64) -> f64 {
        let m = &self.mech;
        match self.thermal {
            ThermalFrequency::Resonance => 2.0 * m.gamma_m * (m.n_thermal() + 0.5),
            ThermalFrequency::Fourier => {
                let w = omega.abs();
                2.0 * (w / m.quality_q()) * (bose_occupancy(w, m.temperature) + 0.5)
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.mech.validate()?;
        self.cavity.validate()?;
        self.drive.validate()?;
        self.detection.validate()
    }
}
