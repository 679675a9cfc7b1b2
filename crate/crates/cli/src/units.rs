//! Parsing of quantities with unit suffixes.

use std::f64::consts::PI;

use cqnc_core::constants::TWO_PI;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Rate {
    Kappa,
    OmegaM,
    GammaM,
}

/// A frequency as typed on the command line: absolute (stored as ω/2π in Hz)
/// or a multiple of one of the device rates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Freq {
    Hz(f64),
    Relative(f64, Rate),
}

/// The device rates, ω/2π in Hz, against which relative values resolve.
#[derive(Debug, Clone, Copy)]
pub struct Rates {
    pub kappa: f64,
    pub omega_m: f64,
    pub gamma_m: f64,
}

impl Freq {
    pub fn hz(self, rates: &Rates) -> f64 {
        match self {
            Freq::Hz(v) => v,
            Freq::Relative(v, Rate::Kappa) => v * rates.kappa,
            Freq::Relative(v, Rate::OmegaM) => v * rates.omega_m,
            Freq::Relative(v, Rate::GammaM) => v * rates.gamma_m,
        }
    }

    pub fn rad(self, rates: &Rates) -> f64 {
        TWO_PI * self.hz(rates)
    }

    pub fn is_relative(self) -> bool {
        matches!(self, Freq::Relative(..))
    }
}

/// Splits "1.5MHz" into (1.5, "MHz") at the longest numeric prefix. A bare
/// unit such as "kappa" or "-pi" means ±1 of it.
fn split_number(s: &str) -> Result<(f64, &str), String> {
    let s = s.trim();
    let prefix = (1..=s.len())
        .rev()
        .filter(|&i| s.is_char_boundary(i))
        .find_map(|i| s[..i].parse::<f64>().ok().map(|v| (v, i)));
    let (value, rest) = match prefix {
        Some((v, i)) => (v, &s[i..]),
        None => match s.strip_prefix('-') {
            Some(rest) => (-1.0, rest),
            None => (1.0, s.strip_prefix('+').unwrap_or(s)),
        },
    };
    if !value.is_finite() {
        return Err(format!("{s:?} is not a finite number"));
    }
    let unit = rest.trim().trim_start_matches('*').trim();
    Ok((value, unit))
}

/// Frequencies: plain numbers and Hz/kHz/MHz/GHz/THz are ω/2π; `rad/s` is
/// angular; `kappa`, `omega_m` (or `wm`) and `gamma_m` scale the device rates.
pub fn parse_freq(s: &str) -> Result<Freq, String> {
    let (v, unit) = split_number(s)?;
    let f = match unit {
        "" | "Hz" | "hz" => Freq::Hz(v),
        "kHz" | "khz" => Freq::Hz(v * 1e3),
        "MHz" | "mhz" => Freq::Hz(v * 1e6),
        "GHz" | "ghz" => Freq::Hz(v * 1e9),
        "THz" | "thz" => Freq::Hz(v * 1e12),
        "rad/s" => Freq::Hz(v / TWO_PI),
        "kappa" => Freq::Relative(v, Rate::Kappa),
        "omega_m" | "wm" => Freq::Relative(v, Rate::OmegaM),
        "gamma_m" => Freq::Relative(v, Rate::GammaM),
        _ => return Err(format!("unknown frequency unit {unit:?} in {s:?}")),
    };
    Ok(f)
}

/// Powers in W, mW, uW, nW or pW (plain numbers are watts).
pub fn parse_power(s: &str) -> Result<f64, String> {
    let (v, unit) = split_number(s)?;
    let scale = match unit {
        "" | "W" => 1.0,
        "mW" => 1e-3,
        "uW" | "µW" => 1e-6,
        "nW" => 1e-9,
        "pW" => 1e-12,
        _ => return Err(format!("unknown power unit {unit:?} in {s:?}")),
    };
    Ok(v * scale)
}

/// Angles in radians, or multiples of π written as `0.5pi`, `-pi`.
pub fn parse_angle(s: &str) -> Result<f64, String> {
    let (v, unit) = split_number(s)?;
    match unit {
        "" | "rad" => Ok(v),
        "pi" => Ok(v * PI),
        _ => Err(format!("unknown angle unit {unit:?} in {s:?}")),
    }
}

pub fn parse_plain(s: &str) -> Result<f64, String> {
    let (v, unit) = split_number(s)?;
    if unit.is_empty() {
        Ok(v)
    } else {
        Err(format!("unexpected unit {unit:?} in {s:?}"))
    }
}

/// "min:max" with each side parsed by `part`.
pub fn parse_range<T>(s: &str, part: impl Fn(&str) -> Result<T, String>) -> Result<(T, T), String> {
    let (a, b) = s
        .split_once(':')
        .ok_or_else(|| format!("range {s:?} must look like min:max"))?;
    Ok((part(a)?, part(b)?))
}
