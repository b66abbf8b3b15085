//! Linearized optomechanical model: steady state, susceptibilities, output
//! transfer coefficients, detection phases and the loss / mode-matching
//! transforms that map the eight input channels onto the two detected ports.
//!
//! Conventions: ω is an angular Fourier frequency, fields are normalized so
//! that a vacuum quadrature has unit spectral density, G₀ is negative.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::params::{CavityParams, Detuning, DetectionParams, DriveParams, MechanicalParams, SystemParams};
use crate::units::HBAR;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Quantum input channels, in coefficient order.
pub const QUANTUM_INPUTS: [&str; 5] = ["a1", "a2", "a3", "a4", "a5"];
/// Classical input channels, in coefficient order.
pub const CLASSICAL_INPUTS: [&str; 3] = ["epsilon", "zeta", "xi"];

pub const STEADY_STATE_RTOL: f64 = 1e-12;
pub const STEADY_STATE_MAX_ITER: usize = 10_000;

pub fn mech_susceptibility(mech: &MechanicalParams, omega: f64) -> Complex64 {
    let wm = mech.omega_m;
    wm / Complex64::new(wm * wm - omega * omega, -omega * mech.gamma_m)
}

pub fn optical_susceptibility(kappa: f64, omega: f64) -> Complex64 {
    1.0 / Complex64::new(1.0, -omega / kappa)
}

/// Single-photon coupling G₀ = −(ω_c/L)·√(ħ/mω_m).
pub fn single_photon_coupling(mech: &MechanicalParams, cavity: &CavityParams) -> f64 {
    -(cavity.omega_laser / cavity.length) * (HBAR / (mech.mass * mech.omega_m)).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingState {
    pub g0: f64,
    /// Effective coupling G = G₀√2·α_s.
    pub g: Complex64,
    pub alpha_s: Complex64,
    pub q_s: f64,
    pub p_s: f64,
    pub n_cavity: f64,
    /// Effective detuning Δ.
    pub detuning: f64,
    /// Bare detuning Δ₀ = Δ − G₀q_s.
    pub detuning0: f64,
}

/// Stationary solution of the classical equations of motion for the drive
/// power in `drive` (callers apply any mode-matching reduction beforehand).
pub fn steady_state(
    mech: &MechanicalParams,
    cavity: &CavityParams,
    drive: &DriveParams,
) -> Result<CouplingState> {
    let g0 = single_photon_coupling(mech, cavity);
    let kappa = cavity.kappa();
    let e0 = drive.e0(cavity, 1.0);
    let detuning = match cavity.detuning {
        Detuning::Effective(d) => d,
        Detuning::Bare(d0) => solve_bare_detuning(g0, mech.omega_m, kappa, e0, d0)?,
    };
    let alpha_s = e0 / Complex64::new(kappa, -detuning);
    let n_cavity = alpha_s.norm_sqr();
    let q_s = g0 / mech.omega_m * n_cavity;
    Ok(CouplingState {
        g0,
        g: g0 * std::f64::consts::SQRT_2 * alpha_s,
        alpha_s,
        q_s,
        p_s: 0.0,
        n_cavity,
        detuning,
        detuning0: detuning - g0 * q_s,
    })
}

/// Damped fixed point on the photon number n = E₀²/(κ² + (Δ₀ + G₀²n/ω_m)²).
fn solve_bare_detuning(g0: f64, omega_m: f64, kappa: f64, e0: f64, d0: f64) -> Result<f64> {
    let shift = g0 * g0 / omega_m;
    let f = |n: f64| e0 * e0 / (kappa * kappa + (d0 + shift * n).powi(2));
    let mut n = f(0.0);
    let mut beta = 1.0;
    let mut last_step = f64::INFINITY;
    let mut residual = f64::INFINITY;
    for _ in 0..STEADY_STATE_MAX_ITER {
        let target = f(n);
        let step = target - n;
        residual = step.abs() / n.abs().max(f64::MIN_POSITIVE);
        if residual <= STEADY_STATE_RTOL {
            return Ok(d0 + shift * target);
        }
        if step.abs() >= last_step {
            beta *= 0.5;
        }
        last_step = step.abs();
        n += beta * step;
        if beta < 1e-12 {
            break;
        }
    }
    Err(Error::NonConvergence {
        iterations: STEADY_STATE_MAX_ITER,
        residual,
    })
}

/// ω_m·[ω_m² − ω² − iωγ_m + |G|²Δω_m/((κ−iω)² + Δ²)]⁻¹.
pub fn effective_susceptibility(
    state: &CouplingState,
    cavity: &CavityParams,
    mech: &MechanicalParams,
    omega: f64,
) -> Result<Complex64> {
    let wm = mech.omega_m;
    let kappa = cavity.kappa();
    let d = state.detuning;
    let k = Complex64::new(kappa, -omega);
    let bracket = Complex64::new(wm * wm - omega * omega, -omega * mech.gamma_m)
        + state.g.norm_sqr() * d * wm / (k * k + d * d);
    let modulus = bracket.norm();
    if !(modulus >= 1e-30 * wm * wm * wm) {
        return Err(Error::DivergentSusceptibility { omega, modulus });
    }
    Ok(wm / bracket)
}

/// The output-field coefficients ν₁..ν₇ at one Fourier frequency:
/// a_out = ν₁a₁ + ν₂a₁† + ν₃a₂ + ν₄a₂† + ν₅ζ + ν₆ε + ν₇ξ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransferCoefficients(pub [Complex64; 7]);

impl TransferCoefficients {
    pub fn nu(&self, index: usize) -> Complex64 {
        self.0[index - 1]
    }
}

pub fn transfer_coefficients(
    state: &CouplingState,
    cavity: &CavityParams,
    mech: &MechanicalParams,
    omega: f64,
) -> Result<TransferCoefficients> {
    let chi = effective_susceptibility(state, cavity, mech, omega)?;
    let kappa = cavity.kappa();
    let (k1, k2) = (cavity.kappa1, cavity.kappa2);
    let d = state.detuning;
    let g = state.g;
    let dp = Complex64::new(kappa, -(d + omega));
    let dm = Complex64::new(kappa, d - omega);
    let nu1 = Complex64::new(kappa - 2.0 * k2, d + omega) / dp
        + I * g.norm_sqr() * k1 * chi / (dp * dp);
    let nu2 = I * g * g * k1 * chi / (dp * dm);
    let r = (k2 / k1).sqrt();
    let nu3 = r * (nu1 + 1.0);
    let nu4 = r * nu2;
    // Exact solution of the linearized equations for complex α_s; it reduces
    // to iα_s(ν₁ − ν₂ + 1)/√(2κ₁) when α_s is real.
    let a = state.alpha_s;
    let nu5 = I / (2.0 * k1).sqrt() * (a * (nu1 + 1.0) - a.conj() * nu2);
    let nu6 = nu1 + nu2;
    let nu7 = I * g * k1.sqrt() * chi / dp;
    Ok(TransferCoefficients([nu1, nu2, nu3, nu4, nu5, nu6, nu7]))
}

/// Mean reflected field √(P/ħω₀)·(κ − 2κ₂ + iΔ)/(κ − iΔ).
pub fn mean_reflected_field(state: &CouplingState, cavity: &CavityParams, drive: &DriveParams) -> Complex64 {
    let kappa = cavity.kappa();
    let d = state.detuning;
    (drive.power / (HBAR * cavity.omega_laser)).sqrt() * Complex64::new(kappa - 2.0 * cavity.kappa2, d)
        / Complex64::new(kappa, -d)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraturePhases {
    pub phi_r: f64,
    pub phi_m: f64,
    pub phi_s: f64,
}

/// Reflected-field rotation, meter phase and the signal phase selected by
/// the interferometer lock phase φ₀ and the two arm powers.
pub fn quadrature_phases(
    state: &CouplingState,
    cavity: &CavityParams,
    det: &DetectionParams,
) -> Result<QuadraturePhases> {
    let kappa = cavity.kappa();
    let d = state.detuning;
    let phi_r = (d / (kappa - 2.0 * cavity.kappa2)).atan() + (d / kappa).atan();
    let phi_m = phi_r + std::f64::consts::FRAC_PI_2;
    if !(det.p_cavity_arm + det.p_reference_arm > 0.0) {
        return Err(Error::Domain("arm powers sum to zero".into()));
    }
    let offset = if det.p_reference_arm == 0.0 {
        0.0
    } else {
        let r = det.p_cavity_arm / det.p_reference_arm;
        let s = det.phi0.sin() / (1.0 + r + 2.0 * r.sqrt() * det.phi0.cos()).sqrt();
        if !s.is_finite() || s.abs() > 1.0 + 1e-12 {
            return Err(Error::Domain(format!("signal-phase arcsine argument {s} outside [-1, 1]")));
        }
        s.clamp(-1.0, 1.0).asin()
    };
    Ok(QuadraturePhases {
        phi_r,
        phi_m,
        phi_s: phi_r - offset,
    })
}

/// Largest |φ_s − φ_R| reachable by scanning φ₀ at fixed arm powers.
pub fn signal_phase_tuning_range(det: &DetectionParams) -> f64 {
    if det.p_reference_arm == 0.0 {
        return 0.0;
    }
    let r = det.p_cavity_arm / det.p_reference_arm;
    if r <= 1.0 {
        std::f64::consts::FRAC_PI_2
    } else {
        (1.0 / r.sqrt()).asin()
    }
}

/// Linear coefficients of one detected port over the eight input channels.
///
/// `quantum[j] = (μ_j, ν_j)` multiply `a_j` and `a_j†`; `classical` multiplies
/// the real noises ε, ζ and ξ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PortCoefficients {
    pub quantum: [(Complex64, Complex64); 5],
    pub classical: [Complex64; 3],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtendedCoefficients {
    pub meter: PortCoefficients,
    pub signal: PortCoefficients,
}

/// Mode mismatch followed by the meter and signal beam splitters.
///
/// The matched part of the drive b = a₁ + ε enters as √η_mm·b + √(1−η_mm)·a₅;
/// the mismatched part is reflected directly, giving
/// a_out' = √η_mm·a_out + (1−η_mm)·b − √(η_mm(1−η_mm))·a₅.
pub fn apply_losses_and_modematch(nu: &TransferCoefficients, det: &DetectionParams) -> ExtendedCoefficients {
    let zero = Complex64::new(0.0, 0.0);
    let [n1, n2, n3, n4, n5, _, n7] = nu.0;
    let s = det.eta_modematch.sqrt();
    let r = (1.0 - det.eta_modematch).sqrt();
    let b = (s * s * n1 + r * r, s * s * n2);
    let out_quantum = [b, (s * n3, s * n4), (zero, zero), (zero, zero), (s * r * n1 - r * s, s * r * n2)];
    let port = |eta: f64, vac: usize| {
        let t = eta.sqrt();
        let mut quantum = out_quantum.map(|(m, n)| (t * m, t * n));
        quantum[vac] = (Complex64::new((1.0 - eta).sqrt(), 0.0), zero);
        let (mb, nb) = quantum[0];
        PortCoefficients {
            quantum,
            classical: [mb + nb, t * s * n5, t * s * n7],
        }
    };
    ExtendedCoefficients {
        meter: port(det.eta_meter, 2),
        signal: port(det.eta_signal, 3),
    }
}

/// Coefficients of a quadrature X^φ = a e^{−iφ} + a† e^{iφ} over the
/// independent real inputs x_j = a_j + a_j†, y_j = −i(a_j − a_j†) and the
/// classical noises. Needs the port coefficients at +ω and −ω.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureGains {
    pub x: [Complex64; 5],
    pub y: [Complex64; 5],
    pub classical: [Complex64; 3],
}

pub fn quadrature_gains(pos: &PortCoefficients, neg: &PortCoefficients, phi: f64) -> QuadratureGains {
    let em = Complex64::from_polar(1.0, -phi);
    let ep = Complex64::from_polar(1.0, phi);
    let mut x = [Complex64::new(0.0, 0.0); 5];
    let mut y = x;
    for j in 0..5 {
        let (mp, np) = pos.quantum[j];
        let (mn, nn) = neg.quantum[j];
        x[j] = 0.5 * ((mp + np) * em + (mn + nn).conj() * ep);
        y[j] = 0.5 * (I * (mp - np) * em - I * (mn - nn).conj() * ep);
    }
    let mut classical = [Complex64::new(0.0, 0.0); 3];
    for k in 0..3 {
        classical[k] = pos.classical[k] * em + neg.classical[k].conj() * ep;
    }
    QuadratureGains { x, y, classical }
}

impl QuadratureGains {
    /// Cross spectrum ⟨A B*⟩ given the classical input densities.
    pub fn cross(&self, other: &QuadratureGains, classical_psd: &[f64; 3]) -> Complex64 {
        let mut s = Complex64::new(0.0, 0.0);
        for j in 0..5 {
            s += self.x[j] * other.x[j].conj() + self.y[j] * other.y[j].conj();
        }
        for k in 0..3 {
            s += self.classical[k] * other.classical[k].conj() * classical_psd[k];
        }
        s
    }

    pub fn power(&self, classical_psd: &[f64; 3]) -> f64 {
        self.cross(self, classical_psd).re
    }

    /// Contribution of each quantum input (x and y together) to the power.
    pub fn quantum_terms(&self) -> [f64; 5] {
        std::array::from_fn(|j| self.x[j].norm_sqr() + self.y[j].norm_sqr())
    }

    pub fn classical_terms(&self, classical_psd: &[f64; 3]) -> [f64; 3] {
        std::array::from_fn(|k| self.classical[k].norm_sqr() * classical_psd[k])
    }
}

/// Precomputed model for one parameter set: steady state at the mode-matched
/// power plus the detection phases.
#[derive(Debug, Clone, Copy)]
pub struct OmModel {
    pub params: SystemParams,
    pub state: CouplingState,
    pub phases: QuadraturePhases,
}

impl OmModel {
    pub fn new(params: &SystemParams) -> Result<Self> {
        params.validate()?;
        let mut drive = params.drive;
        drive.power *= params.detection.eta_modematch;
        let state = steady_state(&params.mech, &params.cavity, &drive)?;
        let mut phases = quadrature_phases(&state, &params.cavity, &params.detection)?;
        if let Some(phi_s) = params.detection.signal_phase {
            phases.phi_s = phi_s;
        }
        Ok(Self {
            params: *params,
            state,
            phases,
        })
    }

    pub fn transfer(&self, omega: f64) -> Result<TransferCoefficients> {
        transfer_coefficients(&self.state, &self.params.cavity, &self.params.mech, omega)
    }

    pub fn ports(&self, omega: f64) -> Result<ExtendedCoefficients> {
        Ok(apply_losses_and_modematch(&self.transfer(omega)?, &self.params.detection))
    }

    /// Signal and meter quadrature gains at Fourier frequency ω.
    pub fn gains(&self, omega: f64) -> Result<(QuadratureGains, QuadratureGains)> {
        let pos = self.ports(omega)?;
        let neg = self.ports(-omega)?;
        Ok((
            quadrature_gains(&pos.signal, &neg.signal, self.phases.phi_s),
            quadrature_gains(&pos.meter, &neg.meter, self.phases.phi_m),
        ))
    }

    /// Input densities of ε, ζ and ξ at ω.
    pub fn classical_psd(&self, omega: f64) -> [f64; 3] {
        let p = &self.params;
        [p.drive.s_epsilon(), p.drive.zeta.spectral_density(omega), p.s_xi(omega)]
    }

    pub fn effective_susceptibility(&self, omega: f64) -> Result<Complex64> {
        effective_susceptibility(&self.state, &self.params.cavity, &self.params.mech, omega)
    }
}
