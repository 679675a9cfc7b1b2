//! Frequency-domain response: susceptibilities, the drift matrix of the
//! linearised Langevin equations, its stability, and the back-action matching
//! residual.
//!
//! State order is (δX, δP, δx_a, δp_a, δx_d, δp_d). The Fourier convention is
//! O(ω) = ∫ O(t) e^{−iωt} dt, so d/dt ↦ iω.

use nalgebra::{Matrix6, Schur};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::params::{DerivedState, DriftRow5Sign, OpaCoefficients, SystemParams};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SusceptibilitySet {
    pub omega: f64,
    /// χ_m = ω_m/(ω_m² − ω² + iωγ_m).
    pub chi_m: Complex64,
    /// χ_d = 1/(iω + Γ/2).
    pub chi_d: Complex64,
    /// χ′_d = (1 + ω_m²χ_d²)⁻¹, dimensionless.
    pub chi_d_prime: Complex64,
    /// χ″_d = −χ′_d χ_d² ω_m.
    pub chi_d_dblprime: Complex64,
    /// χ′_a = 1/(iω − c₋).
    pub chi_a_prime: Complex64,
    /// Dressed phase-quadrature response, 1/χ″_a = (iω + c₊) − K χ′_a s₊ with
    /// K = g²χ_m + s₋ + G′²χ″_d.
    pub chi_a_dblprime: Complex64,
}

impl SusceptibilitySet {
    /// K = g²χ_m + s₋ + G′²χ″_d: everything that converts δx_a into δp_a.
    pub fn amplitude_to_phase(
        &self,
        derived: &DerivedState,
        coeffs: &OpaCoefficients,
    ) -> Complex64 {
        derived.g * derived.g * self.chi_m
            + coeffs.s_minus
            + derived.g_prime * derived.g_prime * self.chi_d_dblprime
    }
}

fn checked_inverse(
    den: Complex64,
    scale: f64,
    eps: f64,
    what: &'static str,
    omega: f64,
) -> Result<Complex64> {
    if den.norm() < eps * scale {
        return Err(Error::Pole { what, omega });
    }
    Ok(den.inv())
}

/// Mechanical susceptibility alone (needs nothing but ω_m and γ_m).
pub fn chi_m(params: &SystemParams, omega: f64) -> Complex64 {
    let w = params.omega_m;
    // (ω_m − ω)(ω_m + ω) keeps precision near resonance
    w / Complex64::new((w - omega) * (w + omega), omega * params.gamma_m)
}

pub fn susceptibilities(
    params: &SystemParams,
    derived: &DerivedState,
    omega: f64,
) -> Result<SusceptibilitySet> {
    let eps = params.pole_epsilon();
    let w = params.omega_m;
    let iw = Complex64::new(0.0, omega);
    let coeffs = params.opa_coefficients();

    let mech_den = Complex64::new((w - omega) * (w + omega), omega * params.gamma_m);
    let chi_m = w * checked_inverse(mech_den, w, eps, "mechanical susceptibility", omega)?;

    let chi_d = checked_inverse(
        iw + 0.5 * params.gamma_atom,
        1.0,
        eps,
        "atomic susceptibility",
        omega,
    )?;
    let chi_d_prime = checked_inverse(
        1.0 + w * w * chi_d * chi_d,
        1.0,
        1e-12,
        "dressed atomic susceptibility",
        omega,
    )?;
    let chi_d_dblprime = -chi_d_prime * chi_d * chi_d * w;

    let chi_a_prime = checked_inverse(
        iw - coeffs.c_minus,
        1.0,
        eps,
        "amplitude-quadrature susceptibility",
        omega,
    )?;
    let k = derived.g * derived.g * chi_m
        + coeffs.s_minus
        + derived.g_prime * derived.g_prime * chi_d_dblprime;
    let chi_a_dblprime = checked_inverse(
        iw + coeffs.c_plus - k * chi_a_prime * coeffs.s_plus,
        1.0,
        eps,
        "phase-quadrature susceptibility",
        omega,
    )?;

    Ok(SusceptibilitySet {
        omega,
        chi_m,
        chi_d,
        chi_d_prime,
        chi_d_dblprime,
        chi_a_prime,
        chi_a_dblprime,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DriftMatrix {
    pub a: Matrix6<f64>,
    pub coeffs: OpaCoefficients,
}

pub fn drift_matrix(params: &SystemParams, derived: &DerivedState) -> DriftMatrix {
    let c = params.opa_coefficients();
    let (w, g, gp) = (params.omega_m, derived.g, derived.g_prime);
    let half_gamma = 0.5 * params.gamma_atom;
    let xd_damping = match params.drift_row5_sign {
        DriftRow5Sign::Corrected => -half_gamma,
        DriftRow5Sign::LiteralPaper => half_gamma,
    };
    #[rustfmt::skip]
    let a = Matrix6::new(
        0.0, w,               0.0,         0.0,        0.0,        0.0,
        -w,  -params.gamma_m, -g,          0.0,        0.0,        0.0,
        0.0, 0.0,             c.c_minus,   c.s_plus,   0.0,        0.0,
        -g,  0.0,             c.s_minus,   -c.c_plus,  -gp,        0.0,
        0.0, 0.0,             0.0,         0.0,        xd_damping, -w,
        0.0, 0.0,             -gp,         0.0,        w,          -half_gamma,
    );
    DriftMatrix { a, coeffs: c }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityReport {
    /// Every real part is below −tolerance.
    pub stable: bool,
    /// Some real part lies within ±tolerance of zero.
    pub marginal: bool,
    /// Roundoff scale of the eigenvalue computation, 1e-12·max|A_ij|.
    pub tolerance: f64,
    /// Sorted by real part, largest first.
    pub eigenvalues: [Complex64; 6],
}

impl StabilityReport {
    pub fn max_real_part(&self) -> f64 {
        self.eigenvalues[0].re
    }
}

/// Hurwitz test on the drift matrix through its eigenvalues (real Schur form).
pub fn stability(drift: &DriftMatrix) -> Result<StabilityReport> {
    let scale = drift.a.amax();
    let schur = Schur::try_new(drift.a, f64::EPSILON, 10_000).ok_or(Error::EigenNoConvergence)?;
    let ev = schur.complex_eigenvalues();
    let mut eigenvalues: [Complex64; 6] = std::array::from_fn(|i| ev[i]);
    if eigenvalues
        .iter()
        .any(|z| !z.re.is_finite() || !z.im.is_finite())
        || !scale.is_finite()
    {
        return Err(Error::EigenNoConvergence);
    }
    eigenvalues.sort_by(|a, b| b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im)));
    let tolerance = 1e-12 * scale;
    Ok(StabilityReport {
        stable: eigenvalues.iter().all(|z| z.re < -tolerance),
        marginal: eigenvalues.iter().any(|z| z.re.abs() <= tolerance),
        tolerance,
        eigenvalues,
    })
}

/// g²χ_m(ω) + G′²χ″_d(ω): zero when the mechanical and atomic back-action
/// paths cancel exactly.
pub fn cqnc_residual(
    params: &SystemParams,
    derived: &DerivedState,
    omega: f64,
) -> Result<Complex64> {
    let s = susceptibilities(params, derived, omega)?;
    Ok(derived.g * derived.g * s.chi_m + derived.g_prime * derived.g_prime * s.chi_d_dblprime)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::{derive, derive_at_coupling, AtomCoupling, AtomDampingConvention};

    fn decoupled() -> (SystemParams, DerivedState) {
        let p = SystemParams {
            atom_coupling: AtomCoupling::Fixed(0.0),
            ..SystemParams::baseline()
        };
        derive_at_coupling(&p, 0.0).unwrap()
    }

    fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() <= tol * b.norm().max(f64::MIN_POSITIVE)
    }

    #[test]
    fn mechanical_susceptibility_limits() {
        let (p, d) = decoupled();
        let s = susceptibilities(&p, &d, 0.0).unwrap();
        assert!(close(s.chi_m, Complex64::new(1.0 / p.omega_m, 0.0), 1e-15));
        let s = susceptibilities(&p, &d, p.omega_m).unwrap();
        assert!(close(s.chi_m, Complex64::new(0.0, -1.0 / p.gamma_m), 1e-15));
        assert!((s.chi_m.norm() * p.gamma_m - 1.0).abs() < 1e-15);
    }

    #[test]
    fn optical_susceptibility_without_opa() {
        let (p, d) = decoupled();
        let s = susceptibilities(&p, &d, 0.0).unwrap();
        assert!(close(
            s.chi_a_prime,
            Complex64::new(2.0 / p.kappa, 0.0),
            1e-15
        ));
        assert!(close(
            s.chi_a_dblprime,
            Complex64::new(2.0 / p.kappa, 0.0),
            1e-15
        ));
    }

    #[test]
    fn dressed_atomic_susceptibility_closed_form() {
        let p = SystemParams::baseline();
        let d = derive(&p).unwrap();
        let half = 0.5 * p.gamma_atom;
        for k in 0..200 {
            let omega = p.omega_m * 10f64.powf(-2.0 + 3.0 * k as f64 / 199.0);
            let s = susceptibilities(&p, &d, omega).unwrap();
            let q = Complex64::new(half, omega);
            let closed = -p.omega_m / (q * q + p.omega_m * p.omega_m);
            assert!(close(s.chi_d_dblprime, closed, 1e-12), "omega = {omega}");
            assert!(close(s.chi_d, q.inv(), 1e-15));
        }
    }

    #[test]
    fn opa_coefficients() {
        let (p, d) = decoupled();
        let c = drift_matrix(&p, &d).coeffs;
        assert_eq!((c.c_minus, c.c_plus), (-0.5 * p.kappa, 0.5 * p.kappa));
        assert_eq!((c.s_minus, c.s_plus), (0.0, 0.0));

        let p2 = p.with_opa(0.3 * p.kappa, std::f64::consts::PI);
        let c = drift_matrix(&p2, &d).coeffs;
        let k = p.kappa;
        assert!((c.c_minus - (-0.5 * k - 0.6 * k)).abs() < 1e-9);
        assert!((c.c_plus - (0.5 * k - 0.6 * k)).abs() < 1e-9);
        assert!(c.s_minus.abs() < 1e-9 && c.s_plus.abs() < 1e-9);
        assert_eq!(c.s_minus, c.s_plus);
    }

    #[test]
    fn drift_matrix_entries() {
        let p = SystemParams::baseline();
        let d = derive(&p).unwrap();
        let a = drift_matrix(&p, &d).a;
        assert_eq!(a[(0, 1)], p.omega_m);
        assert_eq!(a[(1, 0)], -p.omega_m);
        assert_eq!(a[(1, 1)], -p.gamma_m);
        assert_eq!(a[(1, 2)], -d.g);
        assert_eq!(a[(3, 0)], -d.g);
        assert_eq!(a[(3, 4)], -d.g_prime);
        assert_eq!(a[(5, 2)], -d.g_prime);
        assert_eq!(a[(5, 4)], p.omega_m);
        assert_eq!(a[(5, 5)], -0.5 * p.gamma_atom);
        assert_eq!(a[(4, 4)], -0.5 * p.gamma_atom);
        assert_eq!(a[(4, 5)], -p.omega_m);

        let literal = SystemParams {
            drift_row5_sign: DriftRow5Sign::LiteralPaper,
            ..p
        };
        assert_eq!(
            drift_matrix(&literal, &d).a[(4, 4)],
            0.5 * literal.gamma_atom
        );
    }

    #[test]
    fn decoupled_eigenvalues_are_analytic() {
        let (p, d) = decoupled();
        let r = stability(&drift_matrix(&p, &d)).unwrap();
        assert!(r.stable);
        let mech_im = (p.omega_m.powi(2) - 0.25 * p.gamma_m.powi(2)).sqrt();
        let atom_im = p.omega_m;
        let expected = [
            Complex64::new(-0.5 * p.gamma_m, mech_im),
            Complex64::new(-0.5 * p.gamma_m, -mech_im),
            Complex64::new(-0.5 * p.gamma_atom, atom_im),
            Complex64::new(-0.5 * p.gamma_atom, -atom_im),
            Complex64::new(-0.5 * p.kappa, 0.0),
            Complex64::new(-0.5 * p.kappa, 0.0),
        ];
        for e in expected {
            let hit = r
                .eigenvalues
                .iter()
                .any(|z| (z - e).norm() < 1e-9 * p.kappa);
            assert!(hit, "missing eigenvalue {e}: {:?}", r.eigenvalues);
        }
        for w in r.eigenvalues.windows(2) {
            assert!(w[0].re >= w[1].re);
        }
    }

    #[test]
    fn literal_row5_sign_leaves_the_atomic_mode_undamped() {
        // Trace-free atomic block: eigenvalues ±i√(ω_m² − Γ²/4).
        let p = SystemParams {
            drift_row5_sign: DriftRow5Sign::LiteralPaper,
            ..SystemParams::baseline()
        };
        let d = derive(&p).unwrap();
        let r = stability(&drift_matrix(&p, &d)).unwrap();
        assert!(!r.stable);
        assert!(r.marginal);
        let w = (p.omega_m.powi(2) - 0.25 * p.gamma_atom.powi(2)).sqrt();
        assert!((r.eigenvalues[0].im.abs() - w).abs() < 1e-6 * w);
    }

    #[test]
    fn antidamped_mechanics_is_unstable() {
        let (p, d) = decoupled();
        let p = SystemParams {
            gamma_m: -p.gamma_m,
            ..p
        };
        let r = stability(&drift_matrix(&p, &d)).unwrap();
        assert!(!r.stable);
        assert!(r.max_real_part() > 0.0);
    }

    #[test]
    fn residual_vanishes_without_couplings() {
        let (p, d) = decoupled();
        assert_eq!(
            cqnc_residual(&p, &d, p.omega_m).unwrap(),
            Complex64::new(0.0, 0.0)
        );
    }

    #[test]
    fn residual_on_resonance_with_doubled_atomic_damping() {
        // Γ = 2γ_m: χ_m(ω_m) = −i/γ_m, −χ″_d(ω_m) = ω_m/(iω_mΓ + Γ²/4) ≈ −i/(2γ_m)
        let p = SystemParams::baseline().cqnc(AtomDampingConvention::PaperHalf);
        let d = derive(&p).unwrap();
        let r = cqnc_residual(&p, &d, p.omega_m).unwrap();
        let g2 = d.g * d.g;
        let q = Complex64::new(0.5 * p.gamma_atom, p.omega_m);
        let expected = g2
            * (Complex64::new(0.0, -1.0 / p.gamma_m) - p.omega_m / (q * q + p.omega_m * p.omega_m));
        assert!(close(r, expected, 1e-9));
        let half = g2 * Complex64::new(0.0, -0.5 / p.gamma_m);
        assert!(close(r, half, 1e-3), "{r} vs {half}");
    }

    #[test]
    fn residual_far_from_resonance_with_matched_damping() {
        // Γ = γ_m: χ_m + χ″_d = ω_m (Γ²/4) / (D (D + Γ²/4)), D = ω_m² − ω² + iωγ_m
        let p = SystemParams::baseline().cqnc(AtomDampingConvention::Matched);
        let d = derive(&p).unwrap();
        for ratio in [0.2, 0.5, 2.0, 5.0] {
            let omega = ratio * p.omega_m;
            let r = cqnc_residual(&p, &d, omega).unwrap();
            let s = susceptibilities(&p, &d, omega).unwrap();
            let rel = r.norm() / (d.g * d.g * s.chi_m.norm());
            let dd = Complex64::new(p.omega_m.powi(2) - omega * omega, omega * p.gamma_m);
            let quarter = 0.25 * p.gamma_atom.powi(2);
            let exact = quarter / (dd + quarter).norm();
            // χ_m + χ″_d cancels to ~1e-10, leaving about six significant digits
            assert!((rel - exact).abs() < 1e-4 * exact, "{rel} vs {exact}");
            let bound = p.gamma_atom.powi(2) / (2.0 * (p.omega_m.powi(2) - omega * omega).abs());
            assert!(rel <= bound);
        }
    }

    #[test]
    fn pole_detection() {
        let (p, d) = decoupled();
        // Γ → 0 puts the atomic pole at ω = 0: χ_d(0) = 2/Γ
        let p0 = SystemParams {
            gamma_atom: 1e-30,
            ..p.clone()
        };
        assert!(matches!(
            susceptibilities(&p0, &d, 0.0),
            Err(Error::Pole { .. })
        ));
        // G = κ/4 at θ = 0 parks the amplitude quadrature on the threshold
        let p1 = p.with_opa(0.25 * p.kappa, 0.0);
        assert!(matches!(
            susceptibilities(&p1, &d, 0.0),
            Err(Error::Pole { .. })
        ));
        assert!(susceptibilities(&p1, &d, p.omega_m).is_ok());
    }
}
