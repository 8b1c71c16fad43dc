//! One-dimensional channel quantities: the BPSK scalar mutual information
//! I₁(χ), its derivatives, and the fourth-cumulant functions entering the
//! small-correlation expansions.
//!
//! Everything is a Gaussian average of smooth functions of χ + √χ z and is
//! evaluated by Gauss–Hermite quadrature. With the posterior magnetization
//! m = tanh(χ + √χ z):
//!
//!   I₁(χ)  = χ - E ln cosh(χ + √χ z)
//!   I₁'(χ) = (1/2) E[1 - m²]            (half the scalar mmse)
//!   I₁''(χ) = -(1/2) E[(1 - m²)²]
//!   Ĉ(χ)   = -2 E[(1 - m²)(1 - 3m²)]    (averaged fourth cumulant)
//!
//! I₁ saturates at ln 2: the printed transcription with a halved Gaussian
//! term is kept behind [`mi_scalar_bpsk_half_gaussian_term`] for comparison
//! but fails that saturation check.

use crate::channel::Constellation;
use crate::error::{CoreError, Result};
use crate::quad::GH_DEFAULT;

/// Numerically stable ln cosh.
fn ln_cosh(x: f64) -> f64 {
    x.abs() + (-2.0 * x.abs()).exp().ln_1p() - std::f64::consts::LN_2
}

fn check_chi(chi: f64) -> Result<()> {
    if chi < 0.0 || !chi.is_finite() {
        return Err(CoreError::InvalidParameter(format!(
            "scalar-channel parameter must be finite and nonnegative, got {chi}"
        )));
    }
    Ok(())
}

/// Mutual information (nats) of the real scalar BPSK channel r = √χ b + z.
pub fn mi_scalar_bpsk(chi: f64) -> Result<f64> {
    check_chi(chi)?;
    let s = chi.sqrt();
    Ok(chi - GH_DEFAULT.integrate(|z| ln_cosh(chi + s * z)))
}

/// The transcription with a (1/2) prefactor on the Gaussian term. Saturates
/// at the wrong value; retained only for side-by-side comparison.
pub fn mi_scalar_bpsk_half_gaussian_term(chi: f64) -> Result<f64> {
    check_chi(chi)?;
    let s = chi.sqrt();
    Ok(chi - 0.5 * GH_DEFAULT.integrate(|z| ln_cosh(chi + s * z)))
}

/// I₁'(χ) = (1/2) E[1 - tanh²(χ + √χ z)].
pub fn mi_scalar_bpsk_deriv(chi: f64) -> Result<f64> {
    check_chi(chi)?;
    let s = chi.sqrt();
    Ok(0.5
        * GH_DEFAULT.integrate(|z| {
            let m = (chi + s * z).tanh();
            1.0 - m * m
        }))
}

/// I₁''(χ) = -(1/2) E[(1 - tanh²(χ + √χ z))²].
pub fn mi_scalar_bpsk_second_deriv(chi: f64) -> Result<f64> {
    check_chi(chi)?;
    let s = chi.sqrt();
    Ok(-0.5
        * GH_DEFAULT.integrate(|z| {
            let m = (chi + s * z).tanh();
            (1.0 - m * m).powi(2)
        }))
}

/// Ĉ(χ) = -2 ∫ Dz (1 - tanh²)(1 - 3 tanh²): the Gaussian-averaged fourth
/// cumulant of the tilted binary spin. Ĉ(0) = -2, Ĉ(∞) = 0.
pub fn c_hat(chi: f64) -> Result<f64> {
    check_chi(chi)?;
    let s = chi.sqrt();
    Ok(-2.0
        * GH_DEFAULT.integrate(|z| {
            let m2 = (chi + s * z).tanh().powi(2);
            (1.0 - m2) * (1.0 - 3.0 * m2)
        }))
}

/// Per-symbol mutual information of the uncorrelated (identity) channel at
/// gain χ. BPSK is the real scalar channel; QPSK decomposes into two real
/// components each carrying half the power, which lands on the same χ, so
/// the complex value is exactly twice the real one.
pub fn mi_identity(chi: f64, constellation: Constellation) -> Result<f64> {
    let i1 = mi_scalar_bpsk(chi)?;
    Ok(match constellation {
        Constellation::Bpsk => i1,
        Constellation::Qpsk => 2.0 * i1,
    })
}

/// d/dχ of [`mi_identity`].
pub fn mi_identity_deriv(chi: f64, constellation: Constellation) -> Result<f64> {
    let d = mi_scalar_bpsk_deriv(chi)?;
    Ok(match constellation {
        Constellation::Bpsk => d,
        Constellation::Qpsk => 2.0 * d,
    })
}

/// d²/dχ² of [`mi_identity`].
pub fn mi_identity_second_deriv(chi: f64, constellation: Constellation) -> Result<f64> {
    let d = mi_scalar_bpsk_second_deriv(chi)?;
    Ok(match constellation {
        Constellation::Bpsk => d,
        Constellation::Qpsk => 2.0 * d,
    })
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-x / std::f64::consts::SQRT_2)
}

/// Hard-decision error rate of the scalar BPSK channel at SNR s:
/// P_b = Φ(-√s).
pub fn bpsk_error_rate(snr: f64) -> f64 {
    normal_cdf(-snr.sqrt())
}

/// Monte-Carlo fourth-cumulant function C(χ) of the complex scalar channel
/// r = √χ b + z with z unit complex Gaussian:
/// C(χ) = 2 E_r[⟨Re(b)⁴ + Im(b)⁴⟩_c]. Only constellations whose components
/// factorize with per-component power 1/2 qualify (QPSK). Returns
/// (estimate, standard error).
pub fn c_complex<R: rand::Rng>(
    chi: f64,
    constellation: Constellation,
    n_samples: usize,
    rng: &mut R,
) -> Result<(f64, f64)> {
    check_chi(chi)?;
    if constellation != Constellation::Qpsk {
        return Err(CoreError::InvalidParameter(
            "fourth-cumulant function requires a component-factorizing constellation (QPSK)".into(),
        ));
    }
    if n_samples < 100 {
        return Err(CoreError::InvalidParameter(
            "need at least 100 samples for a meaningful standard error".into(),
        ));
    }
    use rand_distr::{Distribution, StandardNormal};
    let s = chi.sqrt();
    let comp = 0.5f64.sqrt();
    // the QPSK posterior factorizes per real component; each component is a
    // two-point variable ±1/√2 with mean tanh of the matched-filter field
    let mut sum = 0.0;
    let mut sumsq = 0.0;
    for _ in 0..n_samples {
        let mut cum = 0.0;
        for _ in 0..2 {
            let b0: f64 = if rng.gen_bool(0.5) { comp } else { -comp };
            let noise: f64 = StandardNormal.sample(rng);
            let r_comp = s * b0 + noise * comp; // component noise variance 1/2
            let t = (2.0 * s * comp * r_comp).tanh();
            // fourth cumulant of ±1/√2 with sign mean t
            cum += -2.0 * 0.25 * (1.0 - t * t) * (1.0 - 3.0 * t * t);
        }
        let val = 2.0 * cum;
        sum += val;
        sumsq += val * val;
    }
    let n = n_samples as f64;
    let mean = sum / n;
    let var = (sumsq / n - mean * mean).max(0.0) / (n - 1.0);
    Ok((mean, var.sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::gauss_hermite_normal;
    use rand::{Rng, SeedableRng};

    #[test]
    fn mi_zero_and_saturation() {
        assert_eq!(mi_scalar_bpsk(0.0).unwrap(), 0.0);
        // χ → ∞ saturates at ln 2 with the unit prefactor
        let ln2 = std::f64::consts::LN_2;
        assert!((mi_scalar_bpsk(50.0).unwrap() - ln2).abs() < 1e-6);
        // the halved transcription fails that check
        assert!((mi_scalar_bpsk_half_gaussian_term(50.0).unwrap() - ln2).abs() > 1.0);
        assert!(mi_scalar_bpsk(-0.1).is_err());
    }

    #[test]
    fn quadrature_order_is_converged() {
        let fine = gauss_hermite_normal(255);
        for chi in [0.25f64, 1.0, 4.0, 16.0, 50.0] {
            let s = chi.sqrt();
            let coarse = mi_scalar_bpsk(chi).unwrap();
            let reference = chi - fine.integrate(|z| super::ln_cosh(chi + s * z));
            assert!(
                (coarse - reference).abs() < 1e-11,
                "chi={chi}: {coarse} vs {reference}"
            );
        }
    }

    #[test]
    fn small_chi_expansion() {
        // I₁(χ) ≈ χ/2 for small χ (real channel capacity slope 1/2)
        let chi = 1e-4;
        let v = mi_scalar_bpsk(chi).unwrap();
        assert!((v - chi / 2.0).abs() < 1e-7);
        assert!((mi_scalar_bpsk_deriv(0.0).unwrap() - 0.5).abs() < 1e-14);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        for chi in [0.3, 1.0, 3.0] {
            let h = 1e-5;
            let fd1 = (mi_scalar_bpsk(chi + h).unwrap() - mi_scalar_bpsk(chi - h).unwrap())
                / (2.0 * h);
            let an1 = mi_scalar_bpsk_deriv(chi).unwrap();
            assert!((fd1 - an1).abs() < 1e-8, "chi={chi}: {fd1} vs {an1}");
            let fd2 = (mi_scalar_bpsk_deriv(chi + h).unwrap()
                - mi_scalar_bpsk_deriv(chi - h).unwrap())
                / (2.0 * h);
            let an2 = mi_scalar_bpsk_second_deriv(chi).unwrap();
            assert!((fd2 - an2).abs() < 1e-7, "chi={chi}: {fd2} vs {an2}");
        }
    }

    #[test]
    fn monotone_in_chi() {
        let mut prev = -1.0;
        for i in 0..=100 {
            let v = mi_scalar_bpsk(0.1 * i as f64).unwrap();
            assert!(v >= prev - 1e-14);
            prev = v;
        }
    }

    #[test]
    fn c_hat_endpoints() {
        assert!((c_hat(0.0).unwrap() + 2.0).abs() < 1e-12);
        assert!(c_hat(60.0).unwrap().abs() < 1e-6);
        // cross-check against an independent quadrature at χ=1
        let fine = gauss_hermite_normal(301);
        let chi = 1.0f64;
        let s = chi.sqrt();
        let reference = -2.0
            * fine.integrate(|z| {
                let m2 = (chi + s * z).tanh().powi(2);
                (1.0 - m2) * (1.0 - 3.0 * m2)
            });
        assert!((c_hat(chi).unwrap() - reference).abs() < 1e-8);
    }

    #[test]
    fn qpsk_identity_doubles_bpsk() {
        for chi in [0.0, 0.5, 2.0] {
            let b = mi_identity(chi, Constellation::Bpsk).unwrap();
            let q = mi_identity(chi, Constellation::Qpsk).unwrap();
            assert!((q - 2.0 * b).abs() < 1e-14);
        }
    }

    #[test]
    fn qpsk_mi_against_monte_carlo() {
        // plug-in MC estimate of the complex scalar channel at χ = 2
        use rand_distr::{Distribution, StandardNormal};
        let chi = 2.0f64;
        let s = chi.sqrt();
        let comp = 0.5f64.sqrt();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        let n = 2_000_000usize;
        let mut acc = 0.0;
        for _ in 0..n {
            // per-component real channels of power 1/2, noise 1/2
            for _ in 0..2 {
                let b0: f64 = if rng.gen_bool(0.5) { comp } else { -comp };
                let z: f64 = StandardNormal.sample(&mut rng);
                let r = s * b0 + z * comp;
                // ln p(r|b0) - ln p(r), both densities N(±s·comp, 1/2)
                let d = |b: f64| -(r - s * b).powi(2);
                let log_like = d(b0);
                let log_mix = 0.5 * ((d(comp) - log_like).exp() + (d(-comp) - log_like).exp());
                acc += -log_mix.ln();
            }
        }
        let mc = acc / n as f64;
        let analytic = mi_identity(chi, Constellation::Qpsk).unwrap();
        assert!(
            (mc - analytic).abs() < 1e-3,
            "MC {mc} vs quadrature {analytic}"
        );
    }

    #[test]
    fn c_complex_matches_c_hat() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for chi in [0.0, 1.0, 4.0] {
            let (est, se) = c_complex(chi, Constellation::Qpsk, 400_000, &mut rng).unwrap();
            let reference = c_hat(chi).unwrap();
            assert!(
                (est - reference).abs() < 4.0 * se.max(1e-4),
                "chi={chi}: {est}±{se} vs {reference}"
            );
        }
        // χ=0: prior cumulant of ±1/√2 components, exactly -2
        let (v0, _) = c_complex(0.0, Constellation::Qpsk, 1000, &mut rng).unwrap();
        assert!((v0 + 2.0).abs() < 1e-12);
        assert!(c_complex(1.0, Constellation::Bpsk, 1000, &mut rng).is_err());
    }

    #[test]
    fn error_rate_is_gaussian_tail() {
        assert!((bpsk_error_rate(0.0) - 0.5).abs() < 1e-15);
        assert!((normal_cdf(0.0) - 0.5).abs() < 1e-15);
        assert!((normal_cdf(1.6448536269514722) - 0.95).abs() < 1e-9);
    }
}
