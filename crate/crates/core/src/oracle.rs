//! Brute-force linear response: solve (iωI − A) δu = n for every input channel
//! and read out p_a^out = √κ δp_a − p_a^in. Nothing here uses the closed-form
//! susceptibilities, so it serves as ground truth for the spectra module.

use nalgebra::{Matrix6, Vector6};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::params::{derive_at_coupling, AtomDampingConvention, DerivedState, SystemParams};
use crate::response::{drift_matrix, stability};
use crate::spectra::{thermal_psd, VACUUM_PSD};

/// Channel order of the input-noise vector (same as the state order).
pub const CHANNELS: [&str; 6] = ["none", "F_th", "x_a_in", "p_a_in", "x_d_in", "p_d_in"];

/// Index of the phase-quadrature input, which also leaks directly into the output.
const PA_IN: usize = 3;
/// Index of the force channel.
const FORCE: usize = 1;

/// Symmetrised per-quadrature input PSDs. The coupling rates (γ_m, κ, Γ) are
/// applied separately as amplitude weights in [`input_weights`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NoiseModel {
    pub psd: [f64; 6],
}

impl NoiseModel {
    pub fn from_params(params: &SystemParams) -> Self {
        let v = VACUUM_PSD;
        Self {
            psd: [0.0, thermal_psd(params), v, v, v, v],
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            psd: self.psd.map(|x| x * factor),
        }
    }

    /// Diagonal of the input correlation in the state basis:
    /// (0, γ_m S_th, κ/2, κ/2, Γ/2, Γ/2) for vacuum inputs.
    pub fn rate_weighted(&self, params: &SystemParams) -> [f64; 6] {
        let w = input_weights(params);
        std::array::from_fn(|i| w[i] * w[i] * self.psd[i])
    }
}

/// Amplitude weights with which each input enters the state equations.
pub fn input_weights(params: &SystemParams) -> [f64; 6] {
    let (gm, k, ga) = (
        params.gamma_m.sqrt(),
        params.kappa.sqrt(),
        params.gamma_atom.sqrt(),
    );
    [0.0, gm, k, k, ga, ga]
}

/// Output coefficients for unit excitation of each input channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransferRow {
    pub omega: f64,
    /// Coefficient of F_ext (identical to the F_th channel).
    pub signal: Complex64,
    pub coefficients: [Complex64; 6],
}

/// Generic readout: coefficient_k = r·(iωI − A)⁻¹·(w_k e_k) + direct_k.
pub fn response_row(
    a: &Matrix6<f64>,
    weights: &[f64; 6],
    readout: &[f64; 6],
    direct: &[f64; 6],
    omega: f64,
) -> Result<[Complex64; 6]> {
    let m: Matrix6<Complex64> = Matrix6::from_fn(|i, j| {
        let diag = if i == j {
            Complex64::new(0.0, omega)
        } else {
            Complex64::new(0.0, 0.0)
        };
        diag - a[(i, j)]
    });
    let scale = m.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let lu = m.lu();
    let u = lu.u();
    let min_pivot = (0..6)
        .map(|i| u[(i, i)].norm())
        .fold(f64::INFINITY, f64::min);
    if min_pivot.is_nan() || min_pivot <= 1e-14 * scale {
        return Err(Error::Singular { omega });
    }
    let mut out = [Complex64::new(0.0, 0.0); 6];
    for k in 0..6 {
        if weights[k] == 0.0 {
            out[k] = Complex64::new(direct[k], 0.0);
            continue;
        }
        let mut rhs = Vector6::<Complex64>::zeros();
        rhs[k] = Complex64::new(weights[k], 0.0);
        let x = lu.solve(&rhs).ok_or(Error::Singular { omega })?;
        let dot: Complex64 = (0..6).map(|i| x[i] * readout[i]).sum();
        out[k] = dot + direct[k];
    }
    Ok(out)
}

pub fn transfer_row(
    params: &SystemParams,
    derived: &DerivedState,
    omega: f64,
) -> Result<TransferRow> {
    let a = drift_matrix(params, derived).a;
    let mut readout = [0.0; 6];
    readout[PA_IN] = params.kappa.sqrt();
    let mut direct = [0.0; 6];
    direct[PA_IN] = -1.0;
    let coefficients = response_row(&a, &input_weights(params), &readout, &direct, omega)?;
    Ok(TransferRow {
        omega,
        signal: coefficients[FORCE],
        coefficients,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OracleSpectrum {
    pub value: f64,
    /// False when the drift matrix has an eigenvalue with non-negative real part;
    /// the stationary spectrum is then formal only.
    pub stable: bool,
}

/// Σ_k |coeff_k|² psd_k / |signal|².
pub fn oracle_spectrum(
    params: &SystemParams,
    derived: &DerivedState,
    omega: f64,
    noise: &NoiseModel,
) -> Result<OracleSpectrum> {
    let stable = stability(&drift_matrix(params, derived))?.stable;
    let row = transfer_row(params, derived, omega)?;
    let value = refer_to_force(&row, noise).ok_or(Error::Unmeasurable { omega })?;
    Ok(OracleSpectrum { value, stable })
}

fn refer_to_force(row: &TransferRow, noise: &NoiseModel) -> Option<f64> {
    let signal2 = row.signal.norm_sqr();
    if !(signal2 > 0.0 && signal2.is_finite()) {
        return None;
    }
    let total: f64 = row
        .coefficients
        .iter()
        .zip(noise.psd)
        .map(|(c, s)| c.norm_sqr() * s)
        .sum();
    Some(total / signal2)
}

/// Shot plus amplitude-quadrature contributions, i.e. everything except the
/// thermal and atomic inputs, computed from the oracle's transfer row.
pub fn optical_noise(params: &SystemParams, derived: &DerivedState, omega: f64) -> Result<f64> {
    let row = transfer_row(params, derived, omega)?;
    let signal2 = row.signal.norm_sqr();
    if !(signal2 > 0.0 && signal2.is_finite()) {
        return Err(Error::Unmeasurable { omega });
    }
    Ok(VACUUM_PSD * (row.coefficients[2].norm_sqr() + row.coefficients[3].norm_sqr()) / signal2)
}

/// Relative drift of B(g)·g² between g and `factor`·g, where B is the optical
/// (shot + back-action) part of the added noise. Zero when the back-action is
/// cancelled and the shot term scales as 1/g².
pub fn backaction_constancy(params: &SystemParams, g: f64, factor: f64, omega: f64) -> Result<f64> {
    if g == 0.0 {
        return Ok(0.0);
    }
    let at = |g: f64| -> Result<f64> {
        let (p, d) = derive_at_coupling(params, g)?;
        Ok(optical_noise(&p, &d, omega)? * g * g)
    };
    let b1 = at(g)?;
    let b2 = at(factor * g)?;
    Ok((b2 - b1).abs() / b1)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConventionResidual {
    pub convention: AtomDampingConvention,
    pub gamma_atom: f64,
    /// Relative drift of B(g)·g² between g and 10g.
    pub constancy: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProbeReport {
    pub omega: f64,
    pub g: f64,
    pub residuals: [ConventionResidual; 2],
    /// Convention with the smaller residual back-action.
    pub preferred: AtomDampingConvention,
}

/// Compares Γ = 2γ_m against Γ = γ_m under matched couplings G′ = g, with g
/// taken from the drive power in `params`.
pub fn damping_convention_probe(params: &SystemParams, omega: f64) -> Result<ProbeReport> {
    let g = crate::params::derive(params)?.g;
    probe_at_coupling(params, g, omega)
}

pub fn probe_at_coupling(params: &SystemParams, g: f64, omega: f64) -> Result<ProbeReport> {
    let conventions = [
        AtomDampingConvention::PaperHalf,
        AtomDampingConvention::Matched,
    ];
    let mut residuals = [ConventionResidual {
        convention: AtomDampingConvention::PaperHalf,
        gamma_atom: 0.0,
        constancy: 0.0,
    }; 2];
    for (slot, conv) in residuals.iter_mut().zip(conventions) {
        let p = params.clone().cqnc(conv);
        *slot = ConventionResidual {
            convention: conv,
            gamma_atom: p.gamma_atom,
            constancy: backaction_constancy(&p, g, 10.0, omega)?,
        };
    }
    let preferred = if residuals[1].constancy <= residuals[0].constancy {
        AtomDampingConvention::Matched
    } else {
        AtomDampingConvention::PaperHalf
    };
    Ok(ProbeReport {
        omega,
        g,
        residuals,
        preferred,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::derive;
    use crate::spectra::s_add_exact;
    use proptest::prelude::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    fn log_grid(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
        (0..n).map(move |i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64))
    }

    fn spectrum_from_row(row: &[Complex64; 6], psd: &[f64; 6]) -> f64 {
        let total: f64 = row.iter().zip(psd).map(|(c, s)| c.norm_sqr() * s).sum();
        total / row[FORCE].norm_sqr()
    }

    #[test]
    fn rate_weighted_noise_matches_state_basis_diagonal() {
        let p = SystemParams::baseline();
        let w = NoiseModel::from_params(&p).rate_weighted(&p);
        assert_eq!(w[0], 0.0);
        assert!(rel(w[2], p.kappa / 2.0) < 1e-15);
        assert!(rel(w[5], p.gamma_atom / 2.0) < 1e-15);
    }

    #[test]
    fn optical_block_reflects_phase_quadrature_at_dc() {
        let p = SystemParams::baseline().bare().with_power(0.0);
        let d = derive(&p).unwrap();
        let row = transfer_row(&p, &d, 0.0).unwrap();
        assert!((row.coefficients[PA_IN] - 1.0).norm() < 1e-14);
        let w = 0.3 * p.kappa;
        let row = transfer_row(&p, &d, w).unwrap();
        let expected = p.kappa / Complex64::new(p.kappa / 2.0, w) - 1.0;
        assert!((row.coefficients[PA_IN] - expected).norm() < 1e-14);
        assert_eq!(row.signal.norm(), 0.0);
    }

    #[test]
    fn high_frequency_limit_is_direct_reflection() {
        let p = SystemParams::baseline();
        let d = derive(&p).unwrap();
        let row = transfer_row(&p, &d, 1e6 * p.kappa).unwrap();
        assert!((row.coefficients[PA_IN] + 1.0).norm() < 1e-5);
        for k in [1, 2, 4, 5] {
            assert!(row.coefficients[k].norm() < 1e-5, "channel {k}");
        }
    }

    #[test]
    fn signal_matches_closed_chain_without_atoms_or_opa() {
        let p = SystemParams::baseline().bare();
        let d = derive(&p).unwrap();
        for w in log_grid(0.01 * p.omega_m, 10.0 * p.omega_m, 50) {
            let row = transfer_row(&p, &d, w).unwrap();
            let chi_a = 1.0 / Complex64::new(p.kappa / 2.0, w);
            let chi_m = p.omega_m / Complex64::new(p.omega_m * p.omega_m - w * w, w * p.gamma_m);
            let expected = -d.g * chi_a * chi_m * (p.gamma_m * p.kappa).sqrt();
            assert!(
                (row.signal - expected).norm() / expected.norm() < 1e-10,
                "omega = {w}"
            );
        }
    }

    #[test]
    fn doubling_all_psds_doubles_the_spectrum() {
        let p = SystemParams::baseline().with_opa(0.1 * 2.0 * std::f64::consts::PI * 1e6, 0.4);
        let d = derive(&p).unwrap();
        let noise = NoiseModel::from_params(&p);
        let s1 = oracle_spectrum(&p, &d, 0.8 * p.omega_m, &noise).unwrap();
        let s2 = oracle_spectrum(&p, &d, 0.8 * p.omega_m, &noise.scaled(2.0)).unwrap();
        assert!(rel(s2.value, 2.0 * s1.value) < 1e-14);
    }

    #[test]
    fn agrees_with_closed_form_exact_spectrum() {
        let p = SystemParams::baseline();
        let d = derive(&p).unwrap();
        let noise = NoiseModel::from_params(&p);
        for w in log_grid(0.01 * p.omega_m, 10.0 * p.omega_m, 100) {
            let o = oracle_spectrum(&p, &d, w, &noise).unwrap();
            assert!(o.stable);
            let e = s_add_exact(&p, &d, w).unwrap();
            assert!(rel(e, o.value) < 1e-8, "omega = {w}: {e} vs {}", o.value);
        }
    }

    #[test]
    fn agrees_with_closed_form_under_opa_and_detuning() {
        let base = SystemParams::baseline().with_power(1e-9);
        for (gain, phase, det) in [
            (0.1, 0.0, 0.0),
            (0.2, 1.3, 0.0),
            (0.05, -2.0, 0.5),
            (0.0, 0.0, 1.0),
        ] {
            let p = base
                .with_opa(gain * base.kappa, phase)
                .with_detuning(det * base.omega_m);
            let d = derive(&p).unwrap();
            let noise = NoiseModel::from_params(&p);
            for w in log_grid(0.05 * p.omega_m, 5.0 * p.omega_m, 30) {
                let o = oracle_spectrum(&p, &d, w, &noise).unwrap();
                let e = s_add_exact(&p, &d, w).unwrap();
                assert!(
                    rel(e, o.value) < 1e-8,
                    "G={gain} theta={phase} Delta={det} omega={w}"
                );
            }
        }
    }

    #[test]
    fn probe_reports_zero_without_coupling() {
        let p = SystemParams::baseline().with_power(0.0);
        let r = damping_convention_probe(&p, p.omega_m).unwrap();
        assert_eq!(r.g, 0.0);
        assert!(r.residuals.iter().all(|c| c.constancy == 0.0));
    }

    #[test]
    fn singular_matrix_is_reported() {
        let a = Matrix6::<f64>::zeros();
        let err = response_row(&a, &[1.0; 6], &[1.0; 6], &[0.0; 6], 0.0).unwrap_err();
        assert_eq!(err, Error::Singular { omega: 0.0 });
    }

    proptest! {
        #[test]
        fn spectrum_invariant_under_diagonal_rescaling(
            scale in proptest::array::uniform6(0.01f64..100.0),
            wf in 0.05f64..5.0,
        ) {
            let p = SystemParams::baseline();
            let d = derive(&p).unwrap();
            let w = wf * p.omega_m;
            let a = drift_matrix(&p, &d).a;
            let weights = input_weights(&p);
            let mut readout = [0.0; 6];
            readout[PA_IN] = p.kappa.sqrt();
            let mut direct = [0.0; 6];
            direct[PA_IN] = -1.0;
            let psd = NoiseModel::from_params(&p).psd;
            let base = spectrum_from_row(&response_row(&a, &weights, &readout, &direct, w).unwrap(), &psd);

            let s = nalgebra::Matrix6::from_diagonal(&nalgebra::Vector6::from_column_slice(&scale));
            let s_inv = nalgebra::Matrix6::from_diagonal(&nalgebra::Vector6::from_iterator(scale.iter().map(|x| 1.0 / x)));
            let a2 = s * a * s_inv;
            // The state u' = S u is driven by S n and read out through r S⁻¹.
            let mut readout2 = readout;
            for i in 0..6 {
                readout2[i] /= scale[i];
            }
            let weights2: [f64; 6] = std::array::from_fn(|k| weights[k] * scale[k]);
            let row2 = response_row(&a2, &weights2, &readout2, &direct, w).unwrap();
            let scaled = spectrum_from_row(&row2, &psd);
            prop_assert!(rel(scaled, base) < 1e-9, "{} vs {}", scaled, base);
        }
    }
}
