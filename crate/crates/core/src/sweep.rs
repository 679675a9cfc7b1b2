//! Parameter sweeps, coupling minimisation and the datasets behind Figs. 2–5.

use std::cell::RefCell;
use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optimize::golden_section;
use crate::oracle::{oracle_spectrum, NoiseModel};
use crate::params::{
    derive, derive_at_coupling, power_for_coupling, AtomCoupling, DerivedState, ParamsConfig,
    SystemParams,
};
use crate::response::{drift_matrix, stability};
use crate::spectra::{
    approx_shot_term, s_add_approx, s_add_exact, s_cqnc_floor, s_sql, s_standard, SpectrumSeries,
    SpectrumSource,
};
use crate::table::{OutputTable, TOOL_VERSION};

/// Quantity varied along a sweep. Grid values are in rad/s, W or rad, except
/// `Omega` (ω/ω_m) and `CouplingRatio` (G′/g).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    Omega,
    Power,
    OpaGain,
    OpaPhase,
    Detuning,
    CouplingRatio,
    /// Effective coupling g itself; the drive power follows from it.
    Coupling,
}

impl SweepAxis {
    pub fn column(self) -> &'static str {
        match self {
            SweepAxis::Omega => "omega_over_omega_m",
            SweepAxis::Power => "P_L",
            SweepAxis::OpaGain => "G",
            SweepAxis::OpaPhase => "theta",
            SweepAxis::Detuning => "Delta",
            SweepAxis::CouplingRatio => "G_prime_over_g",
            SweepAxis::Coupling => "g",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Spacing {
    Linear,
    Log,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub min: f64,
    pub max: f64,
    pub count: usize,
    pub spacing: Spacing,
}

impl Grid {
    pub fn linear(min: f64, max: f64, count: usize) -> Self {
        Self {
            min,
            max,
            count,
            spacing: Spacing::Linear,
        }
    }

    pub fn log(min: f64, max: f64, count: usize) -> Self {
        Self {
            min,
            max,
            count,
            spacing: Spacing::Log,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.count < 2 {
            return Err(Error::InvalidSweep(format!(
                "grid needs at least 2 points, got {}",
                self.count
            )));
        }
        if !(self.min.is_finite() && self.max.is_finite() && self.min < self.max) {
            return Err(Error::InvalidSweep(format!(
                "need min < max, got [{}, {}]",
                self.min, self.max
            )));
        }
        if self.spacing == Spacing::Log && self.min <= 0.0 {
            return Err(Error::InvalidSweep("log spacing needs min > 0".into()));
        }
        Ok(())
    }

    /// Grid points; the end points are exactly `min` and `max`.
    pub fn points(&self) -> Vec<f64> {
        let last = (self.count - 1) as f64;
        (0..self.count)
            .map(|i| {
                if i == 0 {
                    return self.min;
                }
                if i == self.count - 1 {
                    return self.max;
                }
                let t = i as f64 / last;
                match self.spacing {
                    Spacing::Linear => self.min + t * (self.max - self.min),
                    Spacing::Log => (self.min.ln() + t * (self.max / self.min).ln()).exp(),
                }
            })
            .collect()
    }
}

/// How the effective coupling g is obtained at each point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CouplingSpec {
    /// From the drive power through the steady state.
    FromPower,
    /// Held at this value (rad/s); the drive power is adjusted to match.
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub grid: Grid,
    pub fixed: SystemParams,
    pub sources: Vec<SpectrumSource>,
    /// Detection frequency (rad/s) for every axis except `Omega`.
    pub omega: f64,
    pub coupling: CouplingSpec,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        if self.sources.is_empty() {
            return Err(Error::InvalidSweep("no spectrum sources requested".into()));
        }
        for (i, s) in self.sources.iter().enumerate() {
            if self.sources[..i].contains(s) {
                return Err(Error::InvalidSweep(format!(
                    "source {} requested twice",
                    s.column()
                )));
            }
        }
        if !(self.omega.is_finite() && self.omega >= 0.0) {
            return Err(Error::InvalidSweep(format!(
                "detection frequency must be >= 0, got {}",
                self.omega
            )));
        }
        match (self.axis, self.coupling) {
            (SweepAxis::Power | SweepAxis::Coupling, CouplingSpec::Fixed(_)) => {
                Err(Error::InvalidSweep(
                    "a fixed coupling cannot be combined with a power or coupling axis".into(),
                ))
            }
            (_, CouplingSpec::Fixed(g)) if !(g.is_finite() && g >= 0.0) => Err(
                Error::InvalidSweep(format!("fixed coupling must be >= 0, got {g}")),
            ),
            _ => self.fixed.validate(),
        }
    }
}

/// Parameters, steady state and detection frequency at one grid point.
#[derive(Debug, Clone)]
pub struct PointState {
    pub params: SystemParams,
    pub derived: DerivedState,
    pub omega: f64,
}

pub fn point_state(spec: &SweepSpec, x: f64) -> Result<PointState> {
    let mut p = spec.fixed.clone();
    let mut omega = spec.omega;
    let mut coupling = spec.coupling;
    match spec.axis {
        SweepAxis::Omega => omega = x * p.omega_m,
        SweepAxis::Power => p.power = x,
        SweepAxis::OpaGain => p.opa_gain = x,
        SweepAxis::OpaPhase => p = p.with_opa(p.opa_gain, x),
        SweepAxis::Detuning => p.detuning = x,
        SweepAxis::CouplingRatio => p.atom_coupling = AtomCoupling::Ratio(x),
        SweepAxis::Coupling => coupling = CouplingSpec::Fixed(x),
    }
    let (params, derived) = match coupling {
        CouplingSpec::FromPower => {
            let d = derive(&p)?;
            (p, d)
        }
        CouplingSpec::Fixed(g) => derive_at_coupling(&p, g)?,
    };
    Ok(PointState {
        params,
        derived,
        omega,
    })
}

/// Evaluates one spectrum source at a prepared point.
pub fn evaluate(source: SpectrumSource, state: &PointState, coupling: CouplingSpec) -> Result<f64> {
    let (p, d, w) = (&state.params, &state.derived, state.omega);
    match source {
        SpectrumSource::SqlClosedForm => Ok(s_sql(p, w)),
        SpectrumSource::Standard => {
            // Same drive power with the atoms removed.
            let g = match coupling {
                CouplingSpec::Fixed(g) => g,
                CouplingSpec::FromPower => derive(&p.bare())?.g,
            };
            Ok(s_standard(p, g, w))
        }
        SpectrumSource::HybridApprox => s_add_approx(p, d, w),
        SpectrumSource::HybridExact => s_add_exact(p, d, w),
        SpectrumSource::CqncFloor => Ok(s_cqnc_floor(p, w)),
        SpectrumSource::Oracle => {
            oracle_spectrum(p, d, w, &NoiseModel::from_params(p)).map(|o| o.value)
        }
        SpectrumSource::ShotApprox => {
            if d.g == 0.0 {
                return Err(Error::Unmeasurable { omega: w });
            }
            if p.opa_coefficients().c_minus.abs() < p.pole_epsilon() {
                return Err(Error::Pole {
                    what: "amplitude-quadrature damping c-",
                    omega: w,
                });
            }
            Ok(approx_shot_term(p, d.g, w))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub axis: SweepAxis,
    pub x: Vec<f64>,
    pub sources: Vec<SpectrumSource>,
    /// `values[s][i]`: source `s` at grid point `i`.
    pub values: Vec<Vec<f64>>,
    /// Effective coupling at each point.
    pub g: Vec<f64>,
    /// Drift matrix has an eigenvalue with non-negative real part.
    pub unstable: Vec<bool>,
    pub fixed: SystemParams,
}

struct PointOutput {
    values: Vec<f64>,
    g: f64,
    unstable: bool,
}

/// Evaluates every source at every grid point in parallel. Results are in grid
/// order; per-point failures are collected with their indices.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepResult> {
    spec.validate()?;
    let x = spec.grid.points();
    let outputs: Vec<Result<PointOutput>> = x
        .par_iter()
        .map(|&xi| {
            let state = point_state(spec, xi)?;
            let coupling = match spec.axis {
                SweepAxis::Coupling => CouplingSpec::Fixed(xi),
                _ => spec.coupling,
            };
            let unstable = !stability(&drift_matrix(&state.params, &state.derived))?.stable;
            let values = spec
                .sources
                .iter()
                .map(|&s| evaluate(s, &state, coupling))
                .collect::<Result<Vec<f64>>>()?;
            Ok(PointOutput {
                values,
                g: state.derived.g,
                unstable,
            })
        })
        .collect();

    let mut errors = Vec::new();
    let mut values = vec![Vec::with_capacity(x.len()); spec.sources.len()];
    let (mut g, mut unstable) = (Vec::with_capacity(x.len()), Vec::with_capacity(x.len()));
    for (i, out) in outputs.into_iter().enumerate() {
        match out {
            Ok(o) => {
                for (col, v) in values.iter_mut().zip(o.values) {
                    col.push(v);
                }
                g.push(o.g);
                unstable.push(o.unstable);
            }
            Err(e) => errors.push((i, e)),
        }
    }
    if !errors.is_empty() {
        return Err(Error::Points(errors));
    }
    Ok(SweepResult {
        axis: spec.axis,
        x,
        sources: spec.sources.clone(),
        values,
        g,
        unstable,
        fixed: spec.fixed.clone(),
    })
}

impl SweepResult {
    pub fn column(&self, source: SpectrumSource) -> Option<&[f64]> {
        let i = self.sources.iter().position(|&s| s == source)?;
        Some(&self.values[i])
    }

    /// One series per source. Non-finite or negative values are dropped.
    pub fn series(&self) -> Vec<SpectrumSeries> {
        self.sources
            .iter()
            .zip(&self.values)
            .map(|(&source, col)| {
                let mut s = SpectrumSeries::new(source, self.fixed.clone());
                for (&x, &v) in self.x.iter().zip(col) {
                    s.push(x, v);
                }
                s
            })
            .collect()
    }

    pub fn to_table(&self) -> OutputTable {
        let mut columns = vec![self.axis.column().to_string()];
        columns.extend(self.sources.iter().map(|s| s.column().to_string()));
        let mut t = OutputTable::new(columns).expect("source columns are unique");
        stamp(&mut t, &self.fixed);
        let unstable = self.unstable.iter().filter(|&&u| u).count();
        t.add_metadata("unstable_points", unstable.to_string());
        for (i, &x) in self.x.iter().enumerate() {
            let mut row = vec![x];
            row.extend(self.values.iter().map(|c| c[i]));
            t.push_row(row).expect("row width matches");
        }
        t
    }
}

fn stamp(t: &mut OutputTable, params: &SystemParams) {
    t.add_metadata("tool", TOOL_VERSION);
    t.add_metadata("params", ParamsConfig::snapshot(params).to_json());
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    /// Standard sensor with the atoms and the OPA ignored.
    Standard,
    HybridApprox,
    HybridExact,
    Oracle,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Minimum {
    pub g_star: f64,
    pub p_star: f64,
    pub s_min: f64,
}

/// Relative width of the search in ln g.
const LN_TOL: f64 = 1e-7;

/// Minimises the chosen spectrum at `omega` over the effective coupling g in
/// [1e-3, 1e3]·√(κγ_m). An optimum on the bracket edge is reported as
/// [`Error::NoInteriorMinimum`].
pub fn minimize_over_power(
    params: &SystemParams,
    omega: f64,
    objective: Objective,
) -> Result<Minimum> {
    params.validate()?;
    let scale = (params.kappa * params.gamma_m).sqrt();
    let (lo, hi) = (1e-3 * scale, 1e3 * scale);
    let power_params = match objective {
        Objective::Standard => params.bare().with_opa(0.0, 0.0).with_detuning(0.0),
        _ => params.clone(),
    };
    let failure: RefCell<Option<Error>> = RefCell::new(None);
    let f = |ln_g: f64| -> f64 {
        let g = ln_g.exp();
        let value = match objective {
            Objective::Standard => Ok(s_standard(params, g, omega)),
            _ => derive_at_coupling(params, g).and_then(|(p, d)| match objective {
                Objective::HybridApprox => s_add_approx(&p, &d, omega),
                Objective::HybridExact => s_add_exact(&p, &d, omega),
                _ => oracle_spectrum(&p, &d, omega, &NoiseModel::from_params(&p)).map(|o| o.value),
            }),
        };
        value.unwrap_or_else(|e| {
            failure.borrow_mut().get_or_insert(e);
            f64::INFINITY
        })
    };
    let (ln_g, s_min) = golden_section(f, lo.ln(), hi.ln(), LN_TOL);
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    let g_star = ln_g.exp();
    if ln_g - lo.ln() < 10.0 * LN_TOL || hi.ln() - ln_g < 10.0 * LN_TOL {
        return Err(Error::NoInteriorMinimum { lo, hi, at: g_star });
    }
    Ok(Minimum {
        g_star,
        p_star: power_for_coupling(&power_params, g_star)?,
        s_min,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Figure {
    Fig2A,
    Fig2B,
    Fig3A,
    Fig3B,
    Fig4A,
    Fig4B,
    Fig5A,
    Fig5B,
    Fig5C,
}

impl Figure {
    pub const ALL: [Figure; 9] = [
        Figure::Fig2A,
        Figure::Fig2B,
        Figure::Fig3A,
        Figure::Fig3B,
        Figure::Fig4A,
        Figure::Fig4B,
        Figure::Fig5A,
        Figure::Fig5B,
        Figure::Fig5C,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Figure::Fig2A => "fig2a",
            Figure::Fig2B => "fig2b",
            Figure::Fig3A => "fig3a",
            Figure::Fig3B => "fig3b",
            Figure::Fig4A => "fig4a",
            Figure::Fig4B => "fig4b",
            Figure::Fig5A => "fig5a",
            Figure::Fig5B => "fig5b",
            Figure::Fig5C => "fig5c",
        }
    }

    pub fn from_id(id: &str) -> Option<Self> {
        let id = id.to_ascii_lowercase();
        Self::ALL.into_iter().find(|f| f.id() == id)
    }
}

/// Frequency-axis resolution of the `fig2a`/`fig2b` datasets.
pub const FIG2_POINTS: usize = 500;
/// Power-axis resolution of Figs. 3 and 4.
pub const POWER_POINTS: usize = 200;
/// Drive-power range of Figs. 3 and 4, picowatts.
pub const POWER_RANGE_PW: (f64, f64) = (1e-3, 1e6);
/// Side length of the `fig5*` contour grids.
pub const CONTOUR_POINTS: usize = 200;
/// g²/g₀² range of the `fig5*` contour grids.
pub const CONTOUR_G2_RANGE: (f64, f64) = (1.0, 1e8);
pub const FIG2A_GAINS: [f64; 3] = [0.0, 0.1, 0.3];
pub const FIG2B_PHASES: [f64; 7] = [0.0, 0.5, -0.5, 1.0, -1.0, 1.5, -1.5];
pub const FIG3_GAINS: [f64; 3] = [0.0, 0.1, 0.3];
pub const FIG4_DETUNINGS: [f64; 3] = [0.0, 1.0, 2.0];

fn label(v: f64) -> String {
    if v > 0.0 {
        format!("+{v}")
    } else {
        format!("{v}")
    }
}

/// Symmetric phase grid from −π to π; θ_k = −θ_{n−1−k} holds exactly.
pub fn symmetric_phase_grid(n: usize) -> Vec<f64> {
    let last = (n - 1) as f64;
    (0..n)
        .map(|k| PI * (2.0 * k as f64 - last) / last)
        .collect()
}

/// Baseline device used by every figure.
pub fn figure_baseline() -> SystemParams {
    SystemParams::baseline()
}

/// Builds the dataset for one figure panel. Hybrid curves use the ω ≪ κ
/// hybrid spectrum, standard curves the standard-sensor spectrum.
pub fn figure_dataset(which: Figure) -> Result<OutputTable> {
    let base = figure_baseline();
    let table = match which {
        Figure::Fig2A | Figure::Fig2B => frequency_figure(which, &base)?,
        Figure::Fig3A | Figure::Fig3B | Figure::Fig4A | Figure::Fig4B => {
            power_figure(which, &base)?
        }
        Figure::Fig5A | Figure::Fig5B | Figure::Fig5C => contour_figure(which, &base)?,
    };
    Ok(table)
}

fn frequency_figure(which: Figure, base: &SystemParams) -> Result<OutputTable> {
    let k = base.kappa;
    // Every curve shares the coupling that puts the standard sensor at the SQL on resonance.
    let g = crate::spectra::g_opt_standard(base, base.omega_m);
    let curves: Vec<(String, SystemParams)> = match which {
        Figure::Fig2A => FIG2A_GAINS
            .iter()
            .map(|&r| (format!("S_hybrid_G_{r}kappa"), base.with_opa(r * k, PI)))
            .collect(),
        _ => FIG2B_PHASES
            .iter()
            .map(|&t| {
                (
                    format!("S_hybrid_theta_{}pi", label(t)),
                    base.with_opa(0.3 * k, t * PI),
                )
            })
            .collect(),
    };
    let prepared = curves
        .into_iter()
        .map(|(name, p)| derive_at_coupling(&p, g).map(|(p, d)| (name, p, d)))
        .collect::<Result<Vec<_>>>()?;

    let mut columns = vec!["omega_over_omega_m".to_string(), "S_sql".to_string()];
    columns.extend(prepared.iter().map(|(n, _, _)| n.clone()));
    columns.push("S_cqnc".into());
    let mut t = OutputTable::new(columns)?;
    stamp(&mut t, base);
    t.add_metadata("figure", which.id());
    t.add_metadata("S_sql", "standard sensor at the fixed coupling g");
    t.add_metadata(
        "hybrid",
        "omega << kappa hybrid spectrum, back-action cancelled",
    );
    t.add_metadata("g", crate::table::format_number(g));
    match which {
        Figure::Fig2A => t.add_metadata("theta", "pi"),
        _ => t.add_metadata("G_over_kappa", "0.3"),
    }

    let xs = Grid::linear(0.2, 1.8, FIG2_POINTS).points();
    let rows = xs
        .par_iter()
        .map(|&x| {
            let w = x * base.omega_m;
            let mut row = vec![x, s_standard(base, g, w)];
            for (_, p, d) in &prepared {
                row.push(s_add_approx(p, d, w)?);
            }
            row.push(s_cqnc_floor(base, w));
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    for row in rows {
        t.push_row(row)?;
    }
    Ok(t)
}

fn power_figure(which: Figure, base: &SystemParams) -> Result<OutputTable> {
    let k = base.kappa;
    let omega = match which {
        Figure::Fig3A | Figure::Fig4A => base.omega_m,
        _ => base.omega_m + 4.0 * base.gamma_m,
    };
    let curves: Vec<(String, SystemParams)> = match which {
        Figure::Fig3A | Figure::Fig3B => FIG3_GAINS
            .iter()
            .map(|&r| (format!("S_hybrid_G_{r}kappa"), base.with_opa(r * k, PI)))
            .collect(),
        _ => FIG4_DETUNINGS
            .iter()
            .map(|&r| {
                let p = base.with_opa(0.3 * k, PI).with_detuning(r * base.omega_m);
                (format!("S_hybrid_Delta_{r}omega_m"), p)
            })
            .collect(),
    };
    let mut columns = vec![
        "P_L_pW".to_string(),
        "g2_over_g02".to_string(),
        "S_standard".to_string(),
    ];
    columns.extend(curves.iter().map(|(n, _)| n.clone()));
    columns.push("S_cqnc".into());
    let mut t = OutputTable::new(columns)?;
    stamp(&mut t, base);
    t.add_metadata("figure", which.id());
    t.add_metadata(
        "omega_over_omega_m",
        crate::table::format_number(omega / base.omega_m),
    );
    t.add_metadata("g2_over_g02", "standard sensor at this power");
    t.add_metadata(
        "hybrid",
        "omega << kappa hybrid spectrum, coupling from the steady state",
    );

    let bare = base.bare();
    let powers = Grid::log(POWER_RANGE_PW.0, POWER_RANGE_PW.1, POWER_POINTS).points();
    let rows = powers
        .par_iter()
        .map(|&pw| {
            let watts = pw * 1e-12;
            let g_std = derive(&bare.with_power(watts))?.g;
            let mut row = vec![
                pw,
                (g_std / base.g0).powi(2),
                s_standard(base, g_std, omega),
            ];
            for (_, p) in &curves {
                let p = p.with_power(watts);
                let d = derive(&p)?;
                row.push(s_add_approx(&p, &d, omega)?);
            }
            row.push(s_cqnc_floor(base, omega));
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    for row in rows {
        t.push_row(row)?;
    }
    Ok(t)
}

fn contour_figure(which: Figure, base: &SystemParams) -> Result<OutputTable> {
    let n = CONTOUR_POINTS;
    let ratios = Grid::log(CONTOUR_G2_RANGE.0, CONTOUR_G2_RANGE.1, n).points();
    let (second_name, second, gain) = match which {
        Figure::Fig5A => (
            "omega_over_omega_m",
            Grid::linear(0.01, 2.0, n).points(),
            0.0,
        ),
        Figure::Fig5B => (
            "omega_over_omega_m",
            Grid::linear(0.01, 2.0, n).points(),
            0.2,
        ),
        _ => ("theta", symmetric_phase_grid(n), 0.2),
    };
    let mut t = OutputTable::new(vec![
        second_name.to_string(),
        "g2_over_g02".into(),
        "S".into(),
    ])?;
    stamp(&mut t, base);
    t.add_metadata("figure", which.id());
    t.add_metadata("G_over_kappa", crate::table::format_number(gain));
    t.add_metadata(
        "grid",
        format!("{n}x{n}, g2_over_g02 log-spaced in [1, 1e8]"),
    );
    t.add_metadata("S", "omega << kappa hybrid spectrum at fixed coupling");
    match which {
        Figure::Fig5C => t.add_metadata("omega_over_omega_m", "1"),
        _ => t.add_metadata("theta", "pi"),
    }

    let rows = second
        .par_iter()
        .map(|&y| {
            let (p, w) = match which {
                Figure::Fig5C => (base.with_opa(gain * base.kappa, y), base.omega_m),
                _ => (base.with_opa(gain * base.kappa, PI), y * base.omega_m),
            };
            ratios
                .iter()
                .map(|&r| {
                    let (p, d) = derive_at_coupling(&p, r.sqrt() * base.g0)?;
                    Ok(vec![y, r, s_add_approx(&p, &d, w)?])
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    for row in rows.into_iter().flatten() {
        t.push_row(row)?;
    }
    Ok(t)
}
