//! Single-mode model: a resonant cavity whose intracavity amplitude
//! fluctuations drive the oscillator, read out through the phase quadrature.
//!
//! Displacement spectra use the normalization in which an input quadrature
//! has density 1/4; output quadrature spectra are in SQL units.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::SystemParams;

/// Input quadrature density in the displacement normalization.
const S_XIN: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReadoutMode {
    /// S_qr = 2 Im χ, the lowest readout noise allowed at each frequency.
    QuantumLimit,
    /// S_qr = 2|χ|.
    StandardQuantumLimit,
    /// S_qr = 1/γ_m + γ_m|χ|², readout optimized at resonance only.
    FixedImprecision,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimpleModelParams {
    pub omega_m: f64,
    pub gamma_m: f64,
    /// Back-action rate Γ_BA = G²/κ.
    pub gamma_ba: f64,
    /// Thermal decoherence rate Γ_th.
    pub gamma_th: f64,
    /// Cavity half-linewidth; `f64::INFINITY` makes χ_opt = 1.
    pub kappa: f64,
    pub readout_mode: ReadoutMode,
    /// Fixed output quadrature phase.
    pub phi: f64,
}

impl SimpleModelParams {
    /// γ_m = 0.005ω_m, Γ_BA = ω_m, Γ_th = 0.5ω_m, χ_opt = 1, φ = 2 mrad,
    /// with ω_m = 1.
    pub fn illustration() -> Self {
        Self {
            omega_m: 1.0,
            gamma_m: 0.005,
            gamma_ba: 1.0,
            gamma_th: 0.5,
            kappa: f64::INFINITY,
            readout_mode: ReadoutMode::QuantumLimit,
            phi: 0.002,
        }
    }

    /// Rates of the full device: Γ_th = γ_m(n_T + 1/2) and Γ_BA = |G|²/2κ.
    /// The factor 1/2 converts the full model's coupling to the
    /// single-mode normalization, in which Γ_BA = G²/κ; with it both models
    /// give the same back-action and meter response.
    pub fn from_system(system: &SystemParams) -> Result<Self> {
        let model = crate::om::OmModel::new(system)?;
        let kappa = system.cavity.kappa();
        let m = &system.mech;
        Ok(Self {
            omega_m: m.omega_m,
            gamma_m: m.gamma_m,
            gamma_ba: model.state.g.norm_sqr() / (2.0 * kappa),
            gamma_th: m.gamma_m * (m.n_thermal() + 0.5),
            kappa,
            readout_mode: ReadoutMode::QuantumLimit,
            phi: model.phases.phi_s,
        })
    }

    pub fn gamma_over_omega(&self) -> f64 {
        self.gamma_m / self.omega_m
    }

    pub fn chi(&self, omega: f64) -> Complex64 {
        let wm = self.omega_m;
        wm / Complex64::new(wm * wm - omega * omega, -omega * self.gamma_m)
    }

    pub fn chi_opt(&self, omega: f64) -> Complex64 {
        if self.kappa.is_infinite() {
            Complex64::new(1.0, 0.0)
        } else {
            1.0 / Complex64::new(1.0, -omega / self.kappa)
        }
    }

    /// C = Γ_BA|χ_opt|²/Γ_th.
    pub fn cooperativity(&self, omega: f64) -> f64 {
        self.gamma_ba * self.chi_opt(omega).norm_sqr() / self.gamma_th
    }

    /// R = S_qr/S_qth, the readout noise relative to the thermal motion.
    pub fn r_param(&self, omega: f64) -> f64 {
        let chi = self.chi(omega);
        self.readout_noise(omega) / (4.0 * self.gamma_th * chi.norm_sqr())
    }

    pub fn readout_noise(&self, omega: f64) -> f64 {
        let chi = self.chi(omega);
        match self.readout_mode {
            ReadoutMode::QuantumLimit => 2.0 * chi.im,
            ReadoutMode::StandardQuantumLimit => 2.0 * chi.norm(),
            ReadoutMode::FixedImprecision => 1.0 / self.gamma_m + self.gamma_m * chi.norm_sqr(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega_m > 0.0 && self.gamma_m > 0.0 && self.gamma_th > 0.0 && self.kappa > 0.0) {
            return Err(Error::InvalidParameter(
                "omega_m, gamma_m, gamma_th and kappa must be positive".into(),
            ));
        }
        if !(self.gamma_ba >= 0.0) {
            return Err(Error::InvalidParameter("gamma_ba must be >= 0".into()));
        }
        Ok(())
    }
}

/// Ratio of the fixed-imprecision readout noise to the quantum limit,
/// ≈ 1 + 2((ω − ω_m)/γ_m)² near resonance.
pub fn fixed_imprecision_multiplier(p: &SimpleModelParams, omega: f64) -> f64 {
    let chi = p.chi(omega);
    (1.0 / p.gamma_m + p.gamma_m * chi.norm_sqr()) / (2.0 * chi.im)
}

/// S_qq = 4Γ_th|χ|² + |4χχ_opt|²Γ_BA·S_XinXin.
pub fn displacement_spectrum(p: &SimpleModelParams, grid: &[f64]) -> Vec<f64> {
    grid.iter()
        .map(|&w| {
            let chi = p.chi(w);
            let thermal = 4.0 * p.gamma_th * chi.norm_sqr();
            let rp = (4.0 * chi * p.chi_opt(w)).norm_sqr() * p.gamma_ba * S_XIN;
            thermal + rp
        })
        .collect()
}

pub fn readout_noise_spectrum(p: &SimpleModelParams, grid: &[f64]) -> Vec<f64> {
    grid.iter().map(|&w| p.readout_noise(w)).collect()
}

/// S_ΔX = (1 + C/(1 + R))⁻¹.
pub fn simple_residual_spectrum(p: &SimpleModelParams, grid: &[f64]) -> Vec<f64> {
    grid.iter()
        .map(|&w| 1.0 / (1.0 + p.cooperativity(w) / (1.0 + p.r_param(w))))
        .collect()
}

/// S^min = (1 + sin²(arg χ)·C)/(1 + C).
pub fn min_quadrature_spectrum(p: &SimpleModelParams, grid: &[f64]) -> Vec<f64> {
    grid.iter()
        .map(|&w| {
            let c = p.cooperativity(w);
            let s = p.chi(w).arg().sin();
            (1.0 + s * s * c) / (1.0 + c)
        })
        .collect()
}

/// Spectrum of δX cos φ + δY sin φ with vacuum input and thermal drive.
///
/// δX_out is the unperturbed input amplitude quadrature; δY_out adds
/// 4Γ_BA|χ_opt|²χ·δX_in from radiation pressure and the thermal motion.
pub fn fixed_phase_output_spectrum(p: &SimpleModelParams, phi: f64, grid: &[f64]) -> Vec<f64> {
    let (s, c) = phi.sin_cos();
    grid.iter()
        .map(|&w| {
            let chi = p.chi(w);
            let o2 = p.chi_opt(w).norm_sqr();
            let k = 4.0 * p.gamma_ba * o2 * chi;
            let thermal = 16.0 * p.gamma_ba * o2 * p.gamma_th * chi.norm_sqr();
            (c + k * s).norm_sqr() + s * s + thermal * s * s
        })
        .collect()
}
