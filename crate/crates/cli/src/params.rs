//! Parameter flags layered over a JSON config file and the baseline device.

use std::path::PathBuf;

use clap::{Args, ValueEnum};
use cqnc_core::params::{GPrimeConfig, GPrimeKeyword};
use cqnc_core::{AtomDampingConvention, DriftRow5Sign, ParamsConfig, SystemParams, ThermalModel};

use crate::units::{parse_angle, parse_freq, parse_plain, parse_power, Freq, Rates};
use crate::Failure;

#[derive(Args, Debug, Default, Clone)]
pub struct ParamArgs {
    /// JSON parameter file (rates in Hz); flags override its keys.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Mirror mass, kg.
    #[arg(long)]
    pub mass: Option<f64>,
    #[arg(long, value_parser = parse_freq)]
    pub omega_m: Option<Freq>,
    #[arg(long, value_parser = parse_freq)]
    pub gamma_m: Option<Freq>,
    #[arg(long, value_parser = parse_freq)]
    pub kappa: Option<Freq>,
    #[arg(long, value_parser = parse_freq)]
    pub g0: Option<Freq>,
    #[arg(long, value_parser = parse_power)]
    pub power: Option<f64>,
    #[arg(long, value_parser = parse_freq)]
    pub omega_laser: Option<Freq>,
    /// Effective detuning Δ.
    #[arg(long, value_parser = parse_freq, allow_hyphen_values = true)]
    pub delta: Option<Freq>,
    /// OPA gain G.
    #[arg(long, value_parser = parse_freq)]
    pub opa_gain: Option<Freq>,
    /// OPA phase θ (rad, or e.g. `pi`, `-0.5pi`).
    #[arg(long, value_parser = parse_angle, allow_hyphen_values = true)]
    pub theta: Option<f64>,
    /// Atomic dephasing Γ (default follows --damping-convention).
    #[arg(long, value_parser = parse_freq)]
    pub gamma_atom: Option<Freq>,
    /// Atom–cavity coupling: `matched`, `ratio:R`, or a frequency.
    #[arg(long)]
    pub g_prime: Option<String>,
    /// Bath temperature, K.
    #[arg(long)]
    pub temperature: Option<f64>,
    #[arg(long)]
    pub atoms: Option<f64>,
    #[arg(long, value_enum)]
    pub damping_convention: Option<ConventionArg>,
    #[arg(long = "row5-sign", value_enum)]
    pub row5_sign: Option<Row5Arg>,
    #[arg(long, value_enum)]
    pub thermal_model: Option<ThermalArg>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConventionArg {
    PaperHalf,
    Matched,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Row5Arg {
    Corrected,
    Literal,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum ThermalArg {
    HighTemperature,
    QuantumExact,
}

pub fn rates_of(params: &SystemParams) -> Rates {
    use cqnc_core::constants::rad_to_hz;
    Rates {
        kappa: rad_to_hz(params.kappa),
        omega_m: rad_to_hz(params.omega_m),
        gamma_m: rad_to_hz(params.gamma_m),
    }
}

fn parse_g_prime(s: &str, rates: &Rates) -> Result<GPrimeConfig, Failure> {
    if s == "matched" {
        return Ok(GPrimeConfig::Keyword(GPrimeKeyword::Matched));
    }
    if let Some(r) = s.strip_prefix("ratio:") {
        let ratio = parse_plain(r).map_err(Failure::config)?;
        return Ok(GPrimeConfig::Ratio { ratio });
    }
    let f = parse_freq(s).map_err(|e| Failure::config(format!("--g-prime: {e}")))?;
    Ok(GPrimeConfig::Hz(f.hz(rates)))
}

impl ParamArgs {
    /// Resolves flag > config file > baseline default. Relative frequencies
    /// (e.g. `0.3kappa`) refer to the rates after the file and the absolute
    /// rate flags are applied.
    pub fn resolve(&self) -> Result<SystemParams, Failure> {
        let file = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| Failure::config(format!("cannot read {}: {e}", path.display())))?;
                ParamsConfig::from_json(&text)?
            }
            None => ParamsConfig::default(),
        };

        let base = file.to_params()?;
        let rates = rates_of(&base);
        let rate_flags = ParamsConfig {
            omega_m: self.omega_m.map(|f| f.hz(&rates)),
            gamma_m: self.gamma_m.map(|f| f.hz(&rates)),
            kappa: self.kappa.map(|f| f.hz(&rates)),
            ..Default::default()
        };
        let with_rates = file.overlay(&rate_flags);
        let rates = rates_of(&with_rates.to_params()?);

        let hz = |f: Option<Freq>| f.map(|f| f.hz(&rates));
        let flags = ParamsConfig {
            m: self.mass,
            g0: hz(self.g0),
            P_L: self.power,
            omega_L: hz(self.omega_laser),
            Delta: hz(self.delta),
            G: hz(self.opa_gain),
            theta: self.theta,
            Gamma: hz(self.gamma_atom),
            G_prime: self
                .g_prime
                .as_deref()
                .map(|s| parse_g_prime(s, &rates))
                .transpose()?,
            T: self.temperature,
            N_atoms: self.atoms,
            atom_damping_convention: self.damping_convention.map(|c| match c {
                ConventionArg::PaperHalf => AtomDampingConvention::PaperHalf,
                ConventionArg::Matched => AtomDampingConvention::Matched,
            }),
            drift_row5_sign: self.row5_sign.map(|s| match s {
                Row5Arg::Corrected => DriftRow5Sign::Corrected,
                Row5Arg::Literal => DriftRow5Sign::LiteralPaper,
            }),
            thermal_model: self.thermal_model.map(|t| match t {
                ThermalArg::HighTemperature => ThermalModel::HighTemperature,
                ThermalArg::QuantumExact => ThermalModel::QuantumExact,
            }),
            ..Default::default()
        };
        Ok(with_rates.overlay(&flags).to_params()?)
    }
}
