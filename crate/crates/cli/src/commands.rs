use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::Path;

use cqnc_core::oracle::damping_convention_probe;
use cqnc_core::params::{validate_experimental_ranges, validate_low_excitation};
use cqnc_core::response::{self, chi_m, cqnc_residual, drift_matrix};
use cqnc_core::sweep::{
    figure_dataset, minimize_over_power, run_sweep, CouplingSpec, Figure, Grid, Objective, Spacing,
    SweepAxis, SweepSpec,
};
use cqnc_core::table::{format_number, OutputTable};
use cqnc_core::{derive, derive_at_coupling, Error, ParamsConfig, SpectrumSource, SystemParams};
use serde_json::json;

use crate::params::rates_of;
use crate::units::{parse_angle, parse_freq, parse_plain, parse_power, parse_range};
use crate::{
    AxisArg, Failure, FiguresArgs, FormulaArg, SpacingArg, SpectrumArgs, StabilityArgs,
    SteadyStateArgs, SweepArgs, EXIT_UNSTABLE, EXIT_UNSTABLE_ORACLE,
};

type Outcome = Result<u8, Failure>;

fn parse_sources(list: &str) -> Result<Vec<SpectrumSource>, Failure> {
    list.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            SpectrumSource::from_column(s)
                .ok_or_else(|| Failure::config(format!("unknown source {s:?}")))
        })
        .collect()
}

fn freq_rad(s: &str, params: &SystemParams, flag: &str) -> Result<f64, Failure> {
    parse_freq(s)
        .map(|f| f.rad(&rates_of(params)))
        .map_err(|e| Failure::config(format!("{flag}: {e}")))
}

fn coupling(g: &Option<String>, params: &SystemParams) -> Result<CouplingSpec, Failure> {
    Ok(match g {
        Some(s) => CouplingSpec::Fixed(freq_rad(s, params, "--g")?),
        None => CouplingSpec::FromPower,
    })
}

fn spacing(s: SpacingArg) -> Spacing {
    match s {
        SpacingArg::Linear => Spacing::Linear,
        SpacingArg::Log => Spacing::Log,
    }
}

/// Writes CSV plus a `.json` sidecar, or the CSV alone to stdout.
fn emit(table: &OutputTable, output: Option<&Path>) -> Result<(), Failure> {
    match output {
        Some(path) => {
            fs::write(path, table.to_csv())?;
            fs::write(path.with_extension("json"), table.sidecar_json())?;
        }
        None => print_stdout(&table.to_csv())?,
    }
    Ok(())
}

/// Writes to stdout; a reader that closes the pipe early is not an error.
fn print_stdout(text: &str) -> Result<(), Failure> {
    match std::io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn pretty(doc: &serde_json::Value) -> String {
    serde_json::to_string_pretty(doc).expect("report serialises") + "\n"
}

fn unstable_oracle(spec: &SweepSpec, allow: bool, unstable: &[bool]) -> Option<Failure> {
    let flagged = unstable.iter().filter(|&&u| u).count();
    if flagged > 0 && spec.sources.contains(&SpectrumSource::Oracle) && !allow {
        return Some(Failure {
            code: EXIT_UNSTABLE_ORACLE,
            message: format!(
                "drift matrix is not Hurwitz at {flagged} point(s); the oracle spectrum is not stationary (use --allow-unstable)"
            ),
        });
    }
    None
}

pub fn spectrum(a: SpectrumArgs) -> Outcome {
    let params = a.params.resolve()?;
    let lo = freq_rad(&a.omega_min, &params, "--omega-min")? / params.omega_m;
    let hi = freq_rad(&a.omega_max, &params, "--omega-max")? / params.omega_m;
    let spec = SweepSpec {
        axis: SweepAxis::Omega,
        grid: Grid {
            min: lo,
            max: hi,
            count: a.points,
            spacing: spacing(a.spacing),
        },
        sources: parse_sources(&a.sources)?,
        omega: 0.0,
        coupling: coupling(&a.g, &params)?,
        fixed: params,
    };
    spec.validate()?;
    let result = run_sweep(&spec)?;
    if let Some(f) = unstable_oracle(&spec, a.allow_unstable, &result.unstable) {
        return Err(f);
    }
    let mut table = result.to_table();
    table.add_metadata("command", "spectrum");
    table.add_metadata("grid", grid_label(&spec.grid));
    emit(&table, a.output.as_deref())?;
    Ok(0)
}

fn grid_label(g: &Grid) -> String {
    let kind = match g.spacing {
        Spacing::Linear => "linear",
        Spacing::Log => "log",
    };
    format!(
        "{kind} {} points in [{}, {}]",
        g.count,
        format_number(g.min),
        format_number(g.max)
    )
}

pub fn figures(a: FiguresArgs) -> Outcome {
    let mut wanted = Vec::new();
    for id in &a.which {
        if id.eq_ignore_ascii_case("all") {
            wanted.extend(Figure::ALL);
            continue;
        }
        match Figure::from_id(id) {
            Some(f) => wanted.push(f),
            None => {
                return Err(Failure::config(format!(
                    "unknown figure {id:?} (expected fig2a … fig5c or all)"
                )))
            }
        }
    }
    wanted.dedup();
    fs::create_dir_all(&a.output_dir)?;
    for f in wanted {
        let table = figure_dataset(f)?;
        let path = a.output_dir.join(format!("{}.csv", f.id()));
        emit(&table, Some(&path))?;
        eprintln!("wrote {} ({} rows)", path.display(), table.rows.len());
    }
    Ok(0)
}

pub fn stability(a: StabilityArgs) -> Outcome {
    let params = a.params.resolve()?;
    let derived = derive(&params)?;
    let report = response::stability(&drift_matrix(&params, &derived))?;
    let residual = cqnc_residual(&params, &derived, params.omega_m)?;
    let chi = chi_m(&params, params.omega_m).norm();
    let residual_rel = if derived.g > 0.0 {
        residual.norm() / (derived.g * derived.g * chi)
    } else {
        0.0
    };
    let excitation = validate_low_excitation(&params, &derived);
    let ranges = validate_experimental_ranges(&params);
    let probe = damping_convention_probe(&params, 0.5 * params.omega_m).ok();

    if a.json {
        let doc = json!({
            "stable": report.stable,
            "marginal": report.marginal,
            "eigenvalues": report.eigenvalues.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>(),
            "g": derived.g,
            "g_prime": derived.g_prime,
            "cqnc_residual_at_omega_m": residual_rel,
            "low_excitation": excitation,
            "range_warnings": ranges.iter().map(ToString::to_string).collect::<Vec<_>>(),
            "damping_probe": probe,
        });
        print_stdout(&pretty(&doc))?;
    } else {
        let mut out = String::new();
        writeln!(out, "eigenvalues of the drift matrix (rad/s):").expect("writing to a String");
        for z in &report.eigenvalues {
            writeln!(out, "  {:+.9e} {:+.9e}i", z.re, z.im).expect("writing to a String");
        }
        let verdict = if report.stable {
            "stable"
        } else if report.marginal && report.max_real_part() <= report.tolerance {
            "unstable (marginal: undamped mode)"
        } else {
            "unstable"
        };
        writeln!(out, "verdict: {verdict}").expect("writing to a String");
        writeln!(
            out,
            "g = {:e} rad/s, G' = {:e} rad/s",
            derived.g, derived.g_prime
        )
        .expect("writing to a String");
        writeln!(
            out,
            "CQNC residual |g^2 chi_m + G'^2 chi''_d| / (g^2 |chi_m|) at omega_m: {residual_rel:e}"
        )
        .expect("writing to a String");
        writeln!(out, "low excitation <d+d>/N = {:e}", excitation.ratio)
            .expect("writing to a String");
        if excitation.warning {
            writeln!(
                out,
                "warning: <d+d>/N >= 0.01, the bosonic atomic model is not reliable"
            )
            .expect("writing to a String");
        }
        for w in &ranges {
            writeln!(out, "warning: {w}").expect("writing to a String");
        }
        if let Some(p) = probe {
            writeln!(
                out,
                "damping probe at 0.5 omega_m: paper-half {:e}, matched {:e}, prefers {:?}",
                p.residuals[0].constancy, p.residuals[1].constancy, p.preferred
            )
            .expect("writing to a String");
        }
        print_stdout(&out)?;
    }
    Ok(if report.stable { 0 } else { EXIT_UNSTABLE })
}

fn axis_of(a: AxisArg) -> SweepAxis {
    match a {
        AxisArg::Omega => SweepAxis::Omega,
        AxisArg::Power => SweepAxis::Power,
        AxisArg::OpaGain => SweepAxis::OpaGain,
        AxisArg::Theta => SweepAxis::OpaPhase,
        AxisArg::Detuning => SweepAxis::Detuning,
        AxisArg::CouplingRatio => SweepAxis::CouplingRatio,
        AxisArg::Coupling => SweepAxis::Coupling,
    }
}

/// Parses one end of `--range` into the sweep's internal units.
fn axis_value(axis: AxisArg, s: &str, params: &SystemParams) -> Result<f64, String> {
    let rates = rates_of(params);
    match axis {
        AxisArg::Omega => parse_freq(s).map(|f| f.rad(&rates) / params.omega_m),
        AxisArg::Power => parse_power(s),
        AxisArg::Theta => parse_angle(s),
        AxisArg::CouplingRatio => parse_plain(s),
        AxisArg::OpaGain | AxisArg::Detuning | AxisArg::Coupling => {
            parse_freq(s).map(|f| f.rad(&rates))
        }
    }
}

pub fn sweep(a: SweepArgs) -> Outcome {
    let params = a.params.resolve()?;
    let omega = match a.omega_at.as_str() {
        "resonance" => params.omega_m,
        s => freq_rad(s, &params, "--omega-at")?,
    };

    if a.minimize {
        let objective = match a.formula {
            FormulaArg::Standard => Objective::Standard,
            FormulaArg::HybridApprox => Objective::HybridApprox,
            FormulaArg::HybridExact => Objective::HybridExact,
            FormulaArg::Oracle => Objective::Oracle,
        };
        let doc = match minimize_over_power(&params, omega, objective) {
            Ok(m) => json!({
                "interior_minimum": true,
                "g_star": m.g_star,
                "P_star": m.p_star,
                "s_min": m.s_min,
                "omega": omega,
            }),
            Err(Error::NoInteriorMinimum { lo, hi, at }) => json!({
                "interior_minimum": false,
                "bracket": [lo, hi],
                "best_g": at,
                "omega": omega,
            }),
            Err(e) => return Err(e.into()),
        };
        print_stdout(&pretty(&doc))?;
        return Ok(0);
    }

    let range = a
        .range
        .as_deref()
        .ok_or_else(|| Failure::config("--range min:max is required unless --minimize is given"))?;
    let (min, max) = parse_range(range, |s| axis_value(a.axis, s, &params))
        .map_err(|e| Failure::config(format!("--range: {e}")))?;
    let default_spacing = match a.axis {
        AxisArg::Power | AxisArg::Coupling => Spacing::Log,
        _ => Spacing::Linear,
    };
    let spec = SweepSpec {
        axis: axis_of(a.axis),
        grid: Grid {
            min,
            max,
            count: a.points,
            spacing: a.spacing.map_or(default_spacing, spacing),
        },
        sources: parse_sources(&a.sources)?,
        omega,
        coupling: coupling(&a.g, &params)?,
        fixed: params,
    };
    spec.validate()?;
    let result = run_sweep(&spec)?;
    if let Some(f) = unstable_oracle(&spec, a.allow_unstable, &result.unstable) {
        return Err(f);
    }
    let mut table = result.to_table();
    table.add_metadata("command", "sweep");
    table.add_metadata("grid", grid_label(&spec.grid));
    table.add_metadata("omega", format_number(omega));
    emit(&table, a.output.as_deref())?;
    Ok(0)
}

pub fn steady_state(a: SteadyStateArgs) -> Outcome {
    let params = a.params.resolve()?;
    let (params, derived) = match &a.g {
        Some(s) => derive_at_coupling(&params, freq_rad(s, &params, "--g")?)?,
        None => {
            let d = derive(&params)?;
            (params, d)
        }
    };
    let excitation = validate_low_excitation(&params, &derived);
    let doc = json!({
        "params": ParamsConfig::snapshot(&params),
        "P_L": params.power,
        "E_L": derived.drive_amplitude,
        "alpha_s": [derived.alpha_s.re, derived.alpha_s.im],
        "alpha_s_abs": derived.alpha_s.norm(),
        "X_s": derived.x_s,
        "d_s": [derived.d_s.re, derived.d_s.im],
        "g": derived.g,
        "g_prime": derived.g_prime,
        "g2_over_g02": (derived.g / params.g0).powi(2),
        "quality_factor": derived.quality_factor,
        "low_excitation": excitation,
    });
    print_stdout(&pretty(&doc))?;
    if excitation.warning {
        eprintln!(
            "warning: <d+d>/N = {:e} >= 0.01, the bosonic atomic model is not reliable",
            excitation.ratio
        );
    }
    Ok(0)
}
