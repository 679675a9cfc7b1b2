//! Physical parameters, steady state, and the unit conventions shared by every
//! other module.
//!
//! Everything inside [`SystemParams`] is stored in SI units with angular
//! frequencies in rad/s. The JSON configuration ([`ParamsConfig`]) uses the
//! ω/2π convention (Hz) for every rate and frequency.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::constants::{hz_to_rad, rad_to_hz, HBAR};
use crate::error::{Error, Result};

/// Relation between the collective atomic dephasing rate Γ and γ_m under the
/// CQNC configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AtomDampingConvention {
    /// Γ = 2γ_m, as written in the source model.
    PaperHalf,
    /// Γ = γ_m, which makes the atomic amplitude decay match the mechanical one.
    Matched,
}

impl AtomDampingConvention {
    pub fn gamma_atom(self, gamma_m: f64) -> f64 {
        match self {
            AtomDampingConvention::PaperHalf => 2.0 * gamma_m,
            AtomDampingConvention::Matched => gamma_m,
        }
    }
}

/// Sign of the x_d self-damping entry of the drift matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriftRow5Sign {
    /// −Γ/2, re-derived from the atomic Langevin equation.
    Corrected,
    /// +Γ/2, the printed matrix.
    LiteralPaper,
}

/// Power spectral density assigned to the thermal Langevin force.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThermalModel {
    /// k_B T / (ħ ω_m); zero at T = 0.
    HighTemperature,
    /// ½ coth(ħ ω_m / 2 k_B T); ½ at T = 0.
    QuantumExact,
}

/// How the collective atom–cavity coupling G′ is set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AtomCoupling {
    /// Fixed G′ in rad/s.
    Fixed(f64),
    /// G′ = ratio · g, solved self-consistently with the steady state
    /// (g itself depends on G′ through the cavity shift).
    Ratio(f64),
}

impl AtomCoupling {
    pub const MATCHED: AtomCoupling = AtomCoupling::Ratio(1.0);

    /// G′ for a given effective optomechanical coupling.
    pub fn resolve(self, g: f64) -> f64 {
        match self {
            AtomCoupling::Fixed(v) => v,
            AtomCoupling::Ratio(r) => r * g,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    /// Mechanical mass, kg.
    pub mass: f64,
    pub omega_m: f64,
    pub gamma_m: f64,
    /// Cavity decay rate κ.
    pub kappa: f64,
    pub g0: f64,
    /// Drive power, W.
    pub power: f64,
    pub omega_laser: f64,
    /// Effective detuning Δ (an input, not recomputed from the bare cavity detuning).
    pub detuning: f64,
    /// OPA nonlinear gain G.
    pub opa_gain: f64,
    /// OPA pump phase θ in [−π, π).
    pub opa_phase: f64,
    /// Collective atomic dephasing rate Γ.
    pub gamma_atom: f64,
    pub atom_coupling: AtomCoupling,
    /// Bath temperature, K.
    pub temperature: f64,
    pub atom_number: f64,
    pub atom_damping_convention: AtomDampingConvention,
    pub drift_row5_sign: DriftRow5Sign,
    pub thermal_model: ThermalModel,
}

/// Reduces an angle to [−π, π). Angles already inside the interval are returned
/// bit-for-bit so that θ ↦ −θ symmetry survives the reduction.
pub fn reduce_angle(theta: f64) -> f64 {
    if (-PI..PI).contains(&theta) {
        return theta;
    }
    let turns = ((theta + PI) / (2.0 * PI)).floor();
    let r = theta - turns * 2.0 * PI;
    if r >= PI {
        r - 2.0 * PI
    } else if r < -PI {
        r + 2.0 * PI
    } else {
        r
    }
}

impl Default for SystemParams {
    fn default() -> Self {
        Self::baseline()
    }
}

impl SystemParams {
    /// Baseline device: 50 ng mirror, g₀/2π = 300 Hz, ω_m/2π = 300 kHz,
    /// γ_m/2π = 30 Hz, κ/2π = 1 MHz, 100 mW at 384 THz; CQNC configuration with
    /// Γ = 2γ_m, G′ = g, Δ = G = θ = 0, T = 0 and N = 10⁸.
    pub fn baseline() -> Self {
        let gamma_m = hz_to_rad(30.0);
        Self {
            mass: 50e-12,
            omega_m: hz_to_rad(300e3),
            gamma_m,
            kappa: hz_to_rad(1e6),
            g0: hz_to_rad(300.0),
            power: 0.1,
            omega_laser: hz_to_rad(384e12),
            detuning: 0.0,
            opa_gain: 0.0,
            opa_phase: 0.0,
            gamma_atom: AtomDampingConvention::PaperHalf.gamma_atom(gamma_m),
            atom_coupling: AtomCoupling::MATCHED,
            temperature: 0.0,
            atom_number: 1e8,
            atom_damping_convention: AtomDampingConvention::PaperHalf,
            drift_row5_sign: DriftRow5Sign::Corrected,
            thermal_model: ThermalModel::HighTemperature,
        }
    }

    /// CQNC configuration: G′ tracks g and Γ follows `convention`.
    pub fn cqnc(mut self, convention: AtomDampingConvention) -> Self {
        self.atom_damping_convention = convention;
        self.gamma_atom = convention.gamma_atom(self.gamma_m);
        self.atom_coupling = AtomCoupling::MATCHED;
        self
    }

    /// The same device with the atomic ensemble removed (G′ = 0).
    pub fn bare(&self) -> Self {
        Self {
            atom_coupling: AtomCoupling::Fixed(0.0),
            ..self.clone()
        }
    }

    pub fn with_power(&self, power: f64) -> Self {
        Self {
            power,
            ..self.clone()
        }
    }

    pub fn with_opa(&self, gain: f64, phase: f64) -> Self {
        Self {
            opa_gain: gain,
            opa_phase: reduce_angle(phase),
            ..self.clone()
        }
    }

    pub fn with_detuning(&self, detuning: f64) -> Self {
        Self {
            detuning,
            ..self.clone()
        }
    }

    /// Mechanical quality factor ω_m/γ_m.
    pub fn quality_factor(&self) -> f64 {
        self.omega_m / self.gamma_m
    }

    /// Scale used for pole detection.
    pub fn pole_epsilon(&self) -> f64 {
        1e-12 * self.omega_m.max(self.kappa)
    }

    /// Force PSD unit ħ m ω_m γ_m (N²/Hz) used to normalise every spectrum.
    pub fn force_unit(&self) -> f64 {
        HBAR * self.mass * self.omega_m * self.gamma_m
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("mass", self.mass),
            ("omega_m", self.omega_m),
            ("gamma_m", self.gamma_m),
            ("kappa", self.kappa),
            ("g0", self.g0),
            ("omega_laser", self.omega_laser),
            ("gamma_atom", self.gamma_atom),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(
                    name,
                    format!("must be finite and > 0, got {v}"),
                ));
            }
        }
        let non_negative = [
            ("power", self.power),
            ("opa_gain", self.opa_gain),
            ("temperature", self.temperature),
        ];
        for (name, v) in non_negative {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::invalid(
                    name,
                    format!("must be finite and >= 0, got {v}"),
                ));
            }
        }
        if !self.detuning.is_finite() {
            return Err(Error::invalid("detuning", "must be finite"));
        }
        if !(self.opa_phase.is_finite() && (-PI..PI).contains(&self.opa_phase)) {
            return Err(Error::invalid("opa_phase", "must lie in [-pi, pi)"));
        }
        match self.atom_coupling {
            AtomCoupling::Fixed(v) | AtomCoupling::Ratio(v) if !(v.is_finite() && v >= 0.0) => {
                return Err(Error::invalid(
                    "atom_coupling",
                    format!("must be >= 0, got {v}"),
                ));
            }
            _ => {}
        }
        if !(self.atom_number.is_finite() && self.atom_number >= 1.0) {
            return Err(Error::invalid("atom_number", "must be >= 1"));
        }
        Ok(())
    }

    /// Drive amplitude E_L = √(κ P_L / ħ ω_L), rad/s.
    pub fn drive_amplitude(&self) -> f64 {
        (self.kappa * self.power / (HBAR * self.omega_laser)).sqrt()
    }

    /// OPA/detuning coefficients c±, s±.
    pub fn opa_coefficients(&self) -> OpaCoefficients {
        let (sin, cos) = self.opa_phase.sin_cos();
        let two_g = 2.0 * self.opa_gain;
        OpaCoefficients {
            c_minus: -0.5 * self.kappa + two_g * cos,
            c_plus: 0.5 * self.kappa + two_g * cos,
            s_minus: -self.detuning + two_g * sin,
            s_plus: self.detuning + two_g * sin,
        }
    }

    /// Static cavity-shift weight ω_m/(ω_m² + Γ²/4) multiplying G′² in the
    /// steady-state denominator.
    fn atom_shift_weight(&self) -> f64 {
        self.omega_m / (self.omega_m * self.omega_m + 0.25 * self.gamma_atom * self.gamma_atom)
    }

    /// Steady-state denominator (iΔ + κ/2) − 2G e^{iθ} + iG′²ω_m/(ω_m² + Γ²/4).
    pub fn steady_state_denominator(&self, g_prime: f64) -> Complex64 {
        let (sin, cos) = self.opa_phase.sin_cos();
        Complex64::new(
            0.5 * self.kappa - 2.0 * self.opa_gain * cos,
            self.detuning - 2.0 * self.opa_gain * sin
                + g_prime * g_prime * self.atom_shift_weight(),
        )
    }
}

/// c± = ±κ/2 + 2G cos θ and s± = ±Δ + 2G sin θ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpaCoefficients {
    pub c_minus: f64,
    pub c_plus: f64,
    pub s_minus: f64,
    pub s_plus: f64,
}

/// Steady-state amplitudes and the effective couplings they imply.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DerivedState {
    /// E_L, rad/s.
    pub drive_amplitude: f64,
    pub alpha_s: Complex64,
    /// Static displacement in zero-point units.
    pub x_s: f64,
    pub d_s: Complex64,
    /// Effective optomechanical coupling g = √2 g₀ |α_s|, rad/s.
    pub g: f64,
    /// Resolved atom–cavity coupling G′, rad/s.
    pub g_prime: f64,
    pub quality_factor: f64,
    /// ⟨d†d⟩ = |d_s|².
    pub n_excitation: f64,
}

impl DerivedState {
    fn from_alpha(
        params: &SystemParams,
        drive_amplitude: f64,
        alpha_s: Complex64,
        g_prime: f64,
    ) -> Self {
        let n_photon = alpha_s.norm_sqr();
        let d_s = Complex64::i() * g_prime * alpha_s
            / Complex64::new(-0.5 * params.gamma_atom, params.omega_m);
        Self {
            drive_amplitude,
            alpha_s,
            x_s: -params.g0 * n_photon / params.omega_m,
            d_s,
            g: std::f64::consts::SQRT_2 * params.g0 * alpha_s.norm(),
            g_prime,
            quality_factor: params.quality_factor(),
            n_excitation: d_s.norm_sqr(),
        }
    }
}

/// Steady state for the configured drive power.
///
/// With `AtomCoupling::Ratio` the coupling g enters its own denominator through
/// G′ = r·g; |den|²·g² = 2g₀²E_L² is then a cubic in g² whose smallest
/// non-negative root (the lower branch) is returned.
pub fn derive(params: &SystemParams) -> Result<DerivedState> {
    params.validate()?;
    let e_l = params.drive_amplitude();
    let g_prime = match params.atom_coupling {
        AtomCoupling::Fixed(v) => v,
        AtomCoupling::Ratio(r) => r * self_consistent_coupling(params, r, e_l),
    };
    let den = params.steady_state_denominator(g_prime);
    if den.norm() < params.pole_epsilon() {
        return Err(Error::Pole {
            what: "steady-state amplitude",
            omega: 0.0,
        });
    }
    let alpha_s = e_l / den;
    Ok(DerivedState::from_alpha(params, e_l, alpha_s, g_prime))
}

fn self_consistent_coupling(params: &SystemParams, ratio: f64, e_l: f64) -> f64 {
    let target = 2.0 * params.g0 * params.g0 * e_l * e_l;
    if target == 0.0 {
        return 0.0;
    }
    let (sin, cos) = params.opa_phase.sin_cos();
    let a = 0.5 * params.kappa - 2.0 * params.opa_gain * cos;
    let b = params.detuning - 2.0 * params.opa_gain * sin;
    let c = ratio * ratio * params.atom_shift_weight();
    // y (a² + (b + c y)²) = target, y = g²
    let cubic = [c * c, 2.0 * b * c, a * a + b * b, -target];
    smallest_positive_root(cubic).sqrt()
}

/// Smallest positive root of p(y) = c₀y³ + c₁y² + c₂y + c₃ with c₃ < 0 and
/// c₀ ≥ 0 (p(0) < 0, p → +∞).
fn smallest_positive_root(coef: [f64; 4]) -> f64 {
    let p = |y: f64| ((coef[0] * y + coef[1]) * y + coef[2]) * y + coef[3];
    let mut lo = 0.0;
    // Critical points of p decide where the first sign change can be.
    let (a3, a2, a1) = (3.0 * coef[0], 2.0 * coef[1], coef[2]);
    if a3 > 0.0 {
        let disc = a2 * a2 - 4.0 * a3 * a1;
        if disc > 0.0 {
            let sq = disc.sqrt();
            let y_max = (-a2 - sq) / (2.0 * a3);
            let y_min = (-a2 + sq) / (2.0 * a3);
            if y_max > 0.0 && p(y_max) >= 0.0 {
                return bisect(&p, 0.0, y_max);
            }
            lo = y_min.max(0.0);
        }
    }
    let mut hi = if lo > 0.0 { 2.0 * lo } else { 1.0 };
    while p(hi) <= 0.0 {
        lo = hi;
        hi *= 2.0;
    }
    bisect(&p, lo, hi)
}

fn bisect(f: &impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    // endpoint with the smaller residual
    if f(lo).abs() <= f(hi).abs() {
        lo
    } else {
        hi
    }
}

/// Steady state that produces exactly the effective coupling `g`. Returns the
/// parameter set with the matching drive power alongside it.
pub fn derive_at_coupling(params: &SystemParams, g: f64) -> Result<(SystemParams, DerivedState)> {
    params.validate()?;
    if !(g.is_finite() && g >= 0.0) {
        return Err(Error::invalid(
            "g",
            format!("target coupling must be >= 0, got {g}"),
        ));
    }
    let g_prime = params.atom_coupling.resolve(g);
    let den = params.steady_state_denominator(g_prime);
    if den.norm() < params.pole_epsilon() {
        return Err(Error::Pole {
            what: "steady-state amplitude",
            omega: 0.0,
        });
    }
    let alpha_norm = g / (std::f64::consts::SQRT_2 * params.g0);
    let e_l = alpha_norm * den.norm();
    let alpha_s = if alpha_norm == 0.0 {
        Complex64::new(0.0, 0.0)
    } else {
        alpha_norm * den.conj() / den.norm()
    };
    let power = e_l * e_l * HBAR * params.omega_laser / params.kappa;
    let p = params.with_power(power);
    let mut derived = DerivedState::from_alpha(&p, e_l, alpha_s, g_prime);
    derived.g = g;
    Ok((p, derived))
}

/// Drive power that yields the effective coupling `g_target`.
pub fn power_for_coupling(params: &SystemParams, g_target: f64) -> Result<f64> {
    derive_at_coupling(params, g_target).map(|(p, _)| p.power)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LowExcitation {
    /// ⟨d†d⟩/N.
    pub ratio: f64,
    pub warning: bool,
}

/// Holstein–Primakoff validity: the bosonic atomic mode needs ⟨d†d⟩ ≪ N.
pub fn validate_low_excitation(params: &SystemParams, derived: &DerivedState) -> LowExcitation {
    let ratio = derived.n_excitation / params.atom_number;
    LowExcitation {
        ratio,
        warning: ratio >= 0.01,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RangeWarning {
    pub parameter: &'static str,
    pub value: f64,
    pub min: f64,
    pub max: f64,
}

impl std::fmt::Display for RangeWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} = {:e} outside the experimental range [{:e}, {:e}]",
            self.parameter, self.value, self.min, self.max
        )
    }
}

/// Reference ranges reported by current experiments (mass in kg, the rest as ω/2π in Hz).
pub const EXPERIMENTAL_RANGES: [(&str, f64, f64); 5] = [
    ("m", 1e-22, 1.9e-7),
    ("g0/2pi", 1.2, 9e5),
    ("omega_m/2pi", 9.7e3, 3.9e9),
    ("gamma_m/2pi", 1.3e-2, 3.9e4),
    ("kappa/2pi", 2e5, 3.9e8),
];

/// Informational warnings for parameters outside the experimentally demonstrated ranges.
pub fn validate_experimental_ranges(params: &SystemParams) -> Vec<RangeWarning> {
    let values = [
        params.mass,
        rad_to_hz(params.g0),
        rad_to_hz(params.omega_m),
        rad_to_hz(params.gamma_m),
        rad_to_hz(params.kappa),
    ];
    EXPERIMENTAL_RANGES
        .iter()
        .zip(values)
        .filter(|((_, lo, hi), v)| !(*v >= *lo && *v <= *hi))
        .map(|(&(parameter, min, max), value)| RangeWarning {
            parameter,
            value,
            min,
            max,
        })
        .collect()
}

/// `G_prime` in a configuration document: a number in Hz, `"matched"`, or
/// `{"ratio": r}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GPrimeConfig {
    Hz(f64),
    Keyword(GPrimeKeyword),
    Ratio { ratio: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GPrimeKeyword {
    Matched,
}

/// JSON configuration document. Rates and frequencies are ω/2π in Hz; missing
/// keys fall back to [`SystemParams::baseline`], unknown keys are rejected.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(non_snake_case)]
pub struct ParamsConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega_m: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma_m: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub P_L: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega_L: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub Delta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub G: Option<f64>,
    /// Radians.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    /// When absent, Γ follows `atom_damping_convention`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub Gamma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub G_prime: Option<GPrimeConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub T: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub N_atoms: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub atom_damping_convention: Option<AtomDampingConvention>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub drift_row5_sign: Option<DriftRow5Sign>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub thermal_model: Option<ThermalModel>,
}

impl ParamsConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Layers `other` on top of `self` (keys set in `other` win).
    pub fn overlay(&self, other: &ParamsConfig) -> ParamsConfig {
        macro_rules! pick {
            ($($f:ident),*) => { ParamsConfig { $($f: other.$f.or(self.$f)),* } };
        }
        pick!(
            m,
            omega_m,
            gamma_m,
            kappa,
            g0,
            P_L,
            omega_L,
            Delta,
            G,
            theta,
            Gamma,
            G_prime,
            T,
            N_atoms,
            atom_damping_convention,
            drift_row5_sign,
            thermal_model
        )
    }

    /// Resolves the document against the defaults and validates the result.
    pub fn to_params(&self) -> Result<SystemParams> {
        let d = SystemParams::baseline();
        let hz = |v: Option<f64>, default: f64| v.map(hz_to_rad).unwrap_or(default);
        let gamma_m = hz(self.gamma_m, d.gamma_m);
        let convention = self
            .atom_damping_convention
            .unwrap_or(d.atom_damping_convention);
        let atom_coupling = match self.G_prime {
            None => d.atom_coupling,
            Some(GPrimeConfig::Hz(v)) => AtomCoupling::Fixed(hz_to_rad(v)),
            Some(GPrimeConfig::Keyword(GPrimeKeyword::Matched)) => AtomCoupling::MATCHED,
            Some(GPrimeConfig::Ratio { ratio }) => AtomCoupling::Ratio(ratio),
        };
        let params = SystemParams {
            mass: self.m.unwrap_or(d.mass),
            omega_m: hz(self.omega_m, d.omega_m),
            gamma_m,
            kappa: hz(self.kappa, d.kappa),
            g0: hz(self.g0, d.g0),
            power: self.P_L.unwrap_or(d.power),
            omega_laser: hz(self.omega_L, d.omega_laser),
            detuning: hz(self.Delta, d.detuning),
            opa_gain: hz(self.G, d.opa_gain),
            opa_phase: reduce_angle(self.theta.unwrap_or(d.opa_phase)),
            gamma_atom: self
                .Gamma
                .map(hz_to_rad)
                .unwrap_or_else(|| convention.gamma_atom(gamma_m)),
            atom_coupling,
            temperature: self.T.unwrap_or(d.temperature),
            atom_number: self.N_atoms.unwrap_or(d.atom_number),
            atom_damping_convention: convention,
            drift_row5_sign: self.drift_row5_sign.unwrap_or(d.drift_row5_sign),
            thermal_model: self.thermal_model.unwrap_or(d.thermal_model),
        };
        params.validate()?;
        Ok(params)
    }

    /// Fully populated document describing `params` (the parameter snapshot).
    pub fn snapshot(params: &SystemParams) -> ParamsConfig {
        let g_prime = match params.atom_coupling {
            AtomCoupling::Fixed(v) => GPrimeConfig::Hz(rad_to_hz(v)),
            AtomCoupling::Ratio(1.0) => GPrimeConfig::Keyword(GPrimeKeyword::Matched),
            AtomCoupling::Ratio(ratio) => GPrimeConfig::Ratio { ratio },
        };
        ParamsConfig {
            m: Some(params.mass),
            omega_m: Some(rad_to_hz(params.omega_m)),
            gamma_m: Some(rad_to_hz(params.gamma_m)),
            kappa: Some(rad_to_hz(params.kappa)),
            g0: Some(rad_to_hz(params.g0)),
            P_L: Some(params.power),
            omega_L: Some(rad_to_hz(params.omega_laser)),
            Delta: Some(rad_to_hz(params.detuning)),
            G: Some(rad_to_hz(params.opa_gain)),
            theta: Some(params.opa_phase),
            Gamma: Some(rad_to_hz(params.gamma_atom)),
            G_prime: Some(g_prime),
            T: Some(params.temperature),
            N_atoms: Some(params.atom_number),
            atom_damping_convention: Some(params.atom_damping_convention),
            drift_row5_sign: Some(params.drift_row5_sign),
            thermal_model: Some(params.thermal_model),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("config serialises")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bare_baseline() -> SystemParams {
        SystemParams::baseline().bare()
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn reduce_angle_maps_into_half_open_interval() {
        assert_eq!(reduce_angle(PI), -PI);
        assert_eq!(reduce_angle(-PI), -PI);
        assert_eq!(reduce_angle(0.25 * PI), 0.25 * PI);
        assert!((reduce_angle(1.5 * PI) + 0.5 * PI).abs() < 1e-15);
        assert!((reduce_angle(-1.5 * PI) - 0.5 * PI).abs() < 1e-15);
        assert!((reduce_angle(7.0 * PI) + PI).abs() < 1e-12);
    }

    #[test]
    fn no_detuning_no_opa_no_atoms_gives_real_amplitude() {
        let p = bare_baseline();
        let d = derive(&p).unwrap();
        let expected = 2.0 * d.drive_amplitude / p.kappa;
        assert!(d.alpha_s.im.abs() < 1e-12 * expected);
        assert!(rel(d.alpha_s.re, expected) < 1e-14);
    }

    #[test]
    fn drive_amplitude_matches_direct_arithmetic() {
        // κ = 2π·1e6, P = 0.1 W, ω_L = 2π·384e12: E_L² = κP/(ħω_L) = 1e6·0.1/(ħ·384e12)
        let expected = (1e6_f64 * 0.1 / (1.054_571_817e-34 * 384e12)).sqrt();
        let e_l = SystemParams::baseline().drive_amplitude();
        assert!(rel(e_l, expected) < 1e-14, "{e_l} vs {expected}");
        // ≈ 1.5709e12 rad/s
        assert!((e_l - 1.5709e12).abs() < 1e9);
    }

    #[test]
    fn zero_drive_gives_zero_state() {
        for p in [
            bare_baseline().with_power(0.0),
            SystemParams::baseline().with_power(0.0),
        ] {
            let d = derive(&p).unwrap();
            assert_eq!(d.drive_amplitude, 0.0);
            assert_eq!(d.alpha_s.norm(), 0.0);
            assert_eq!(d.g, 0.0);
            assert_eq!(d.x_s, 0.0);
            assert_eq!(d.d_s.norm(), 0.0);
        }
    }

    #[test]
    fn matched_coupling_is_self_consistent() {
        let p = SystemParams::baseline();
        let d = derive(&p).unwrap();
        assert!(rel(d.g_prime, d.g) < 1e-15);
        // g must satisfy g |den(g)| = √2 g₀ E_L
        let lhs = d.g * p.steady_state_denominator(d.g).norm();
        let rhs = std::f64::consts::SQRT_2 * p.g0 * d.drive_amplitude;
        assert!(rel(lhs, rhs) < 1e-12);
    }

    #[test]
    fn bistable_branch_is_the_lowest_root() {
        // Negative detuning pulls the atom shift through resonance; pick a
        // drive where three roots exist and check the smallest one is returned.
        let mut p = SystemParams::baseline().with_detuning(-hz_to_rad(5e6));
        p.power = 1.6e-5;
        let d = derive(&p).unwrap();
        let f = |g: f64| {
            g * p.steady_state_denominator(g).norm()
                - std::f64::consts::SQRT_2 * p.g0 * d.drive_amplitude
        };
        assert!(f(d.g).abs() < 1e-9 * std::f64::consts::SQRT_2 * p.g0 * d.drive_amplitude);
        let steps = 10_000;
        for k in 0..steps {
            let g = d.g * k as f64 / steps as f64 * 0.999;
            assert!(f(g) < 0.0, "earlier root near g = {g}");
        }
    }

    #[test]
    fn pole_is_reported() {
        // θ = 0, G = κ/4 zeroes the real part; Δ = 0 and no atoms zero the rest.
        let p = bare_baseline().with_opa(0.25 * hz_to_rad(1e6), 0.0);
        assert!(matches!(derive(&p), Err(Error::Pole { .. })));
    }

    #[test]
    fn power_round_trip_on_baseline() {
        for p in [bare_baseline(), SystemParams::baseline()] {
            let d = derive(&p).unwrap();
            let power = power_for_coupling(&p, d.g).unwrap();
            assert!(rel(power, 0.1) < 1e-9, "{power}");
        }
    }

    #[test]
    fn power_for_zero_coupling_is_zero() {
        assert_eq!(
            power_for_coupling(&SystemParams::baseline(), 0.0).unwrap(),
            0.0
        );
    }

    #[test]
    fn doubling_coupling_quadruples_power() {
        let p = bare_baseline();
        let p1 = power_for_coupling(&p, 1e5).unwrap();
        let p2 = power_for_coupling(&p, 2e5).unwrap();
        assert!(rel(p2, 4.0 * p1) < 1e-14);
    }

    #[test]
    fn low_excitation_ratio() {
        let p = SystemParams::baseline().with_power(0.0);
        let d = derive(&p).unwrap();
        let r = validate_low_excitation(&p, &d);
        assert_eq!(r.ratio, 0.0);
        assert!(!r.warning);

        let mut d = derive(&SystemParams::baseline()).unwrap();
        d.n_excitation = 1e5;
        let r = validate_low_excitation(&SystemParams::baseline(), &d);
        assert!(rel(r.ratio, 1e-3) < 1e-15);
        assert!(!r.warning);

        d.n_excitation = 1e8;
        let r = validate_low_excitation(&SystemParams::baseline(), &d);
        assert_eq!(r.ratio, 1.0);
        assert!(r.warning);
    }

    #[test]
    fn baseline_is_inside_experimental_ranges() {
        assert!(validate_experimental_ranges(&SystemParams::baseline()).is_empty());
        let heavy = SystemParams {
            mass: 1.0,
            ..SystemParams::baseline()
        };
        let w = validate_experimental_ranges(&heavy);
        assert_eq!(w.len(), 1);
        assert_eq!(w[0].parameter, "m");
        let lossless = SystemParams {
            kappa: hz_to_rad(1.0),
            ..SystemParams::baseline()
        };
        let w = validate_experimental_ranges(&lossless);
        assert_eq!(w.len(), 1);
        assert_eq!(w[0].parameter, "kappa/2pi");
    }

    #[test]
    fn config_defaults_and_overrides() {
        let cfg =
            ParamsConfig::from_json(r#"{"P_L": 1e-3, "G_prime": {"ratio": 0.5}, "theta": 3.5}"#)
                .unwrap();
        let p = cfg.to_params().unwrap();
        assert_eq!(p.power, 1e-3);
        assert_eq!(p.atom_coupling, AtomCoupling::Ratio(0.5));
        assert!((p.opa_phase - (3.5 - 2.0 * PI)).abs() < 1e-15);
        assert_eq!(p.kappa, SystemParams::baseline().kappa);

        let cfg = ParamsConfig::from_json(r#"{"atom_damping_convention": "matched"}"#).unwrap();
        let p = cfg.to_params().unwrap();
        assert_eq!(p.gamma_atom, p.gamma_m);

        let cfg = ParamsConfig::from_json(r#"{"G_prime": "matched", "Gamma": 60}"#).unwrap();
        let p = cfg.to_params().unwrap();
        assert_eq!(p.atom_coupling, AtomCoupling::MATCHED);
        assert!(rel(p.gamma_atom, hz_to_rad(60.0)) < 1e-15);
    }

    #[test]
    fn config_rejects_unknown_keys_and_bad_values() {
        assert!(matches!(
            ParamsConfig::from_json(r#"{"bogus": 1}"#),
            Err(Error::Config(_))
        ));
        let cfg = ParamsConfig::from_json(r#"{"kappa": -1}"#).unwrap();
        assert!(matches!(
            cfg.to_params(),
            Err(Error::InvalidParams { name: "kappa", .. })
        ));
        let cfg = ParamsConfig::from_json(r#"{"N_atoms": 0.5}"#).unwrap();
        assert!(cfg.to_params().is_err());
    }

    #[test]
    fn snapshot_round_trips() {
        let p = SystemParams::baseline()
            .with_opa(hz_to_rad(3e5), 2.0)
            .with_detuning(hz_to_rad(3e5));
        let json = ParamsConfig::snapshot(&p).to_json();
        let back = ParamsConfig::from_json(&json).unwrap().to_params().unwrap();
        let again = ParamsConfig::snapshot(&back).to_json();
        assert_eq!(json, again);
        for (a, b) in [
            (p.kappa, back.kappa),
            (p.opa_gain, back.opa_gain),
            (p.detuning, back.detuning),
            (p.gamma_atom, back.gamma_atom),
        ] {
            assert!(rel(a, b) < 1e-15);
        }
    }
}
