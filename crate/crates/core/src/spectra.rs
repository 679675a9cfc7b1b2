//! Closed-form force-noise spectra.
//!
//! All spectra are dimensionless, in units of ħ m ω_m γ_m; the external force is
//! measured in units of √(ħ m ω_m γ_m). Vacuum quadratures carry a symmetrised
//! PSD of ½.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::constants::{HBAR, K_B};
use crate::error::{Error, Result};
use crate::params::{DerivedState, SystemParams, ThermalModel};
use crate::response::{chi_m, susceptibilities};

/// Vacuum PSD of each optical and atomic input quadrature.
pub const VACUUM_PSD: f64 = 0.5;

/// Coefficients of every input in the detected output quadrature p_a^out.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseTransfer {
    pub omega: f64,
    /// Coefficient of F_ext.
    pub signal: Complex64,
    pub c_xa: Complex64,
    pub c_pa: Complex64,
    pub c_xd: Complex64,
    pub c_pd: Complex64,
    pub c_fth: Complex64,
}

/// Solves the linearised equations for δp_a by substitution and applies
/// p_a^out = √κ δp_a − p_a^in.
pub fn noise_transfer(
    params: &SystemParams,
    derived: &DerivedState,
    omega: f64,
) -> Result<NoiseTransfer> {
    let s = susceptibilities(params, derived, omega)?;
    let coeffs = params.opa_coefficients();
    let k = s.amplitude_to_phase(derived, &coeffs);
    let sqrt_kappa = params.kappa.sqrt();
    let sqrt_gamma_atom = params.gamma_atom.sqrt();

    let signal = -derived.g * s.chi_a_dblprime * s.chi_m * (params.gamma_m * params.kappa).sqrt();
    let atomic =
        s.chi_a_dblprime * sqrt_kappa * derived.g_prime * s.chi_d_dblprime * sqrt_gamma_atom;
    Ok(NoiseTransfer {
        omega,
        signal,
        c_xa: s.chi_a_dblprime * k * s.chi_a_prime * params.kappa,
        c_pa: s.chi_a_dblprime * params.kappa - 1.0,
        c_xd: atomic / (params.omega_m * s.chi_d),
        c_pd: -atomic,
        c_fth: signal,
    })
}

/// Thermal force PSD in normalised units.
pub fn thermal_psd(params: &SystemParams) -> f64 {
    let t = params.temperature;
    match params.thermal_model {
        ThermalModel::HighTemperature => K_B * t / (HBAR * params.omega_m),
        ThermalModel::QuantumExact => {
            if t == 0.0 {
                0.5
            } else {
                0.5 / (HBAR * params.omega_m / (2.0 * K_B * t)).tanh()
            }
        }
    }
}

/// Force-referred added noise split by input channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NoiseBreakdown {
    pub thermal: f64,
    /// Phase-quadrature vacuum (shot noise).
    pub shot: f64,
    /// Amplitude-quadrature vacuum: back-action plus OPA/detuning leakage.
    pub amplitude: f64,
    /// Atomic input noise.
    pub atomic: f64,
}

impl NoiseBreakdown {
    pub fn total(&self) -> f64 {
        self.thermal + self.shot + self.amplitude + self.atomic
    }
}

pub fn s_add_breakdown(
    params: &SystemParams,
    derived: &DerivedState,
    omega: f64,
) -> Result<NoiseBreakdown> {
    let t = noise_transfer(params, derived, omega)?;
    let signal2 = t.signal.norm_sqr();
    if derived.g == 0.0 || !(signal2 > 0.0 && signal2.is_finite()) {
        return Err(Error::Unmeasurable { omega });
    }
    let referred = |c: Complex64| VACUUM_PSD * c.norm_sqr() / signal2;
    Ok(NoiseBreakdown {
        thermal: thermal_psd(params) * t.c_fth.norm_sqr() / signal2,
        shot: referred(t.c_pa),
        amplitude: referred(t.c_xa),
        atomic: referred(t.c_xd) + referred(t.c_pd),
    })
}

/// Added force noise with full frequency dependence.
pub fn s_add_exact(params: &SystemParams, derived: &DerivedState, omega: f64) -> Result<f64> {
    s_add_breakdown(params, derived, omega).map(|b| b.total())
}

/// Hybrid spectrum in the ω ≪ κ limit with the back-action term dropped:
/// k_BT/ħω_m + [|c₊ + s₊s₋/c₋|² + κ²|s₋/c₋|²]/(g²|χ_m|²γ_mκ) + ½(ω² + ω_m² + Γ²/4)/ω_m².
pub fn s_add_approx(params: &SystemParams, derived: &DerivedState, omega: f64) -> Result<f64> {
    if derived.g == 0.0 {
        return Err(Error::Unmeasurable { omega });
    }
    let c = params.opa_coefficients();
    if c.c_minus.abs() < params.pole_epsilon() {
        return Err(Error::Pole {
            what: "amplitude-quadrature damping c-",
            omega,
        });
    }
    let chi = chi_m(params, omega).norm();
    let shot = ((c.c_plus + c.s_plus * c.s_minus / c.c_minus).powi(2)
        + (params.kappa * c.s_minus / c.c_minus).powi(2))
        / (derived.g * derived.g * chi * chi * params.gamma_m * params.kappa);
    Ok(thermal_psd(params) + shot + s_cqnc_floor(params, omega))
}

/// Shot term of [`s_add_approx`] alone.
pub fn approx_shot_term(params: &SystemParams, g: f64, omega: f64) -> f64 {
    let c = params.opa_coefficients();
    let chi = chi_m(params, omega).norm();
    ((c.c_plus + c.s_plus * c.s_minus / c.c_minus).powi(2)
        + (params.kappa * c.s_minus / c.c_minus).powi(2))
        / (g * g * chi * chi * params.gamma_m * params.kappa)
}

/// Standard optomechanical sensor (no atoms, no OPA):
/// k_BT/ħω_m + ½[κ/(4γ_m g²|χ_m|²) + 4g²/(κγ_m)].
pub fn s_standard(params: &SystemParams, g: f64, omega: f64) -> f64 {
    let chi = chi_m(params, omega).norm();
    let (k, gm) = (params.kappa, params.gamma_m);
    thermal_psd(params) + 0.5 * (k / (4.0 * gm * g * g * chi * chi) + 4.0 * g * g / (k * gm))
}

/// Standard quantum limit 1/(γ_m|χ_m(ω)|).
pub fn s_sql(params: &SystemParams, omega: f64) -> f64 {
    1.0 / (params.gamma_m * chi_m(params, omega).norm())
}

/// Floor left once back-action cancels and shot noise is removed:
/// ½(ω² + ω_m² + Γ²/4)/ω_m².
pub fn s_cqnc_floor(params: &SystemParams, omega: f64) -> f64 {
    let w = params.omega_m;
    0.5 * (omega * omega + w * w + 0.25 * params.gamma_atom * params.gamma_atom) / (w * w)
}

/// Coupling that reaches the SQL in [`s_standard`]: g² = κ/(4|χ_m|).
pub fn g_opt_standard(params: &SystemParams, omega: f64) -> f64 {
    (params.kappa / (4.0 * chi_m(params, omega).norm())).sqrt()
}

/// Optimal coupling with an OPA of gain G: |κ − 4G|/(2√(κ|χ_m|)).
pub fn g_opt_opa(params: &SystemParams, omega: f64) -> f64 {
    (params.kappa - 4.0 * params.opa_gain).abs()
        / (2.0 * (params.kappa * chi_m(params, omega).norm()).sqrt())
}

/// Converts a normalised spectrum to N²/Hz.
pub fn to_absolute(params: &SystemParams, value: f64) -> f64 {
    value * params.force_unit()
}

/// Which formula (or the oracle) produced a spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectrumSource {
    /// 1/(γ_m|χ_m|).
    SqlClosedForm,
    /// Standard sensor at the configured coupling.
    Standard,
    HybridApprox,
    HybridExact,
    CqncFloor,
    Oracle,
    /// Shot term of the hybrid approximation alone.
    ShotApprox,
}

impl SpectrumSource {
    pub const ALL: [SpectrumSource; 7] = [
        SpectrumSource::SqlClosedForm,
        SpectrumSource::Standard,
        SpectrumSource::HybridApprox,
        SpectrumSource::HybridExact,
        SpectrumSource::CqncFloor,
        SpectrumSource::Oracle,
        SpectrumSource::ShotApprox,
    ];

    /// Column name used in emitted tables.
    pub fn column(self) -> &'static str {
        match self {
            SpectrumSource::SqlClosedForm => "S_sql",
            SpectrumSource::Standard => "S_standard",
            SpectrumSource::HybridApprox => "S_hybrid_approx",
            SpectrumSource::HybridExact => "S_hybrid_exact",
            SpectrumSource::CqncFloor => "S_cqnc",
            SpectrumSource::Oracle => "S_oracle",
            SpectrumSource::ShotApprox => "S_shot",
        }
    }

    pub fn from_column(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|s| s.column() == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectrumPoint {
    /// Sweep coordinate (ω/ω_m for frequency sweeps).
    pub x: f64,
    pub value: f64,
}

/// One spectrum along a sweep axis. Values are non-negative and `x` is strictly
/// increasing.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumSeries {
    pub source: SpectrumSource,
    pub points: Vec<SpectrumPoint>,
    pub params_snapshot: SystemParams,
}

impl SpectrumSeries {
    pub fn new(source: SpectrumSource, params_snapshot: SystemParams) -> Self {
        Self {
            source,
            points: Vec::new(),
            params_snapshot,
        }
    }

    /// Appends a point; non-finite or negative values and out-of-order
    /// coordinates are rejected.
    pub fn push(&mut self, x: f64, value: f64) -> bool {
        let ordered = self.points.last().is_none_or(|p| x > p.x);
        if ordered && value.is_finite() && value >= 0.0 {
            self.points.push(SpectrumPoint { x, value });
            true
        } else {
            false
        }
    }

    pub fn values(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.value).collect()
    }
}
