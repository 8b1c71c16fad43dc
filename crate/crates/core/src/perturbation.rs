//! Small-correlation expansions of the transmit-side mutual information,
//! from both the matrix-integration approximation and the exact evaluation,
//! together with their fourth-order discrepancy.
//!
//! Both expansions run in the moments of the zero-diagonal coupling matrix
//! R and in derivatives of the uncorrelated MI. They agree through third
//! order; the fourth order splits by
//!
//!   Δ = -(ρχ)⁴ [ S₁ D A₁²/4 + S₂ (D² + Ĉ²/6)/8 ] · (field factor)
//!
//! with A₁ = 2I₁', D = -2I₁'' - (2I₁')² ≥ 0 (a variance, hence the
//! approximation is an upper bound to this order), S₁ the per-site variance
//! of (R²)_ii, and S₂ = Σ_ij R_ij⁴ / K.

use nalgebra::DMatrix;

use crate::channel::Constellation;
use crate::error::{CoreError, Result};
use crate::scalar::{c_hat, mi_scalar_bpsk, mi_scalar_bpsk_deriv, mi_scalar_bpsk_second_deriv};

/// Moment statistics of a zero-diagonal symmetric coupling matrix R.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatrixStats {
    pub tr_r2_per_k: f64,
    pub tr_r3_per_k: f64,
    pub tr_r4_per_k: f64,
    /// Σ_i (R²)_ii² / K
    pub sum_diag_r2_sq_per_k: f64,
    /// Σ_ij R_ij⁴ / K (real and imaginary fourth powers for complex R;
    /// all couplings here are real)
    pub sum_rij4_per_k: f64,
}

impl MatrixStats {
    /// Asymptotic nearest-neighbour chain: every site has two unit bonds.
    pub fn chain_asymptotic() -> Self {
        MatrixStats {
            tr_r2_per_k: 2.0,
            tr_r3_per_k: 0.0,
            tr_r4_per_k: 6.0,
            sum_diag_r2_sq_per_k: 4.0,
            sum_rij4_per_k: 2.0,
        }
    }

    /// Statistics from an explicit dense coupling matrix.
    pub fn from_dense(r: &DMatrix<f64>) -> Result<Self> {
        let k = r.nrows();
        if k != r.ncols() {
            return Err(CoreError::DimensionMismatch("coupling matrix must be square".into()));
        }
        if (0..k).any(|i| r[(i, i)].abs() > 1e-14) {
            return Err(CoreError::InvalidParameter(
                "coupling matrix must have zero diagonal".into(),
            ));
        }
        let kf = k as f64;
        let r2 = r * r;
        let r3 = &r2 * r;
        let r4 = &r2 * &r2;
        let sum_diag_sq: f64 = (0..k).map(|i| r2[(i, i)] * r2[(i, i)]).sum();
        let sum_fourth: f64 = r.iter().map(|x| x.powi(4)).sum();
        Ok(MatrixStats {
            tr_r2_per_k: r2.trace() / kf,
            tr_r3_per_k: r3.trace() / kf,
            tr_r4_per_k: r4.trace() / kf,
            sum_diag_r2_sq_per_k: sum_diag_sq / kf,
            sum_rij4_per_k: sum_fourth / kf,
        })
    }

    /// Open chain of k sites.
    pub fn chain_finite(k: usize) -> Result<Self> {
        let mut r = DMatrix::zeros(k, k);
        for i in 0..k - 1 {
            r[(i, i + 1)] = 1.0;
            r[(i + 1, i)] = 1.0;
        }
        Self::from_dense(&r)
    }

    /// Periodic ring of k sites.
    pub fn ring(k: usize) -> Result<Self> {
        let mut r = DMatrix::zeros(k, k);
        for i in 0..k {
            r[(i, (i + 1) % k)] += 1.0;
            r[((i + 1) % k, i)] += 1.0;
        }
        Self::from_dense(&r)
    }

    /// Per-site variance of the diagonal of R²: Σ((R²)_ii - tr R²/K)²/K.
    pub fn s1(&self) -> f64 {
        self.sum_diag_r2_sq_per_k - self.tr_r2_per_k * self.tr_r2_per_k
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExpansionMethod {
    MatrixIntegration,
    Exact,
}

/// Terms ρ⁰..ρ⁴ of one expansion at the given (χ, ρ).
#[derive(Debug, Clone)]
pub struct ExpansionCoefficients {
    pub orders: [f64; 5],
    pub method: ExpansionMethod,
    pub stats: MatrixStats,
}

impl ExpansionCoefficients {
    pub fn total(&self) -> f64 {
        self.orders.iter().sum()
    }
}

fn field_factor(constellation: Constellation) -> f64 {
    match constellation {
        Constellation::Bpsk => 1.0,
        Constellation::Qpsk => 2.0,
    }
}

struct ScalarDerivs {
    i1: f64,
    a1: f64, // 2 I₁'
    a2: f64, // 2 I₁''
    f4: f64, // Ĉ
}

fn scalar_derivs(chi: f64) -> Result<ScalarDerivs> {
    Ok(ScalarDerivs {
        i1: mi_scalar_bpsk(chi)?,
        a1: 2.0 * mi_scalar_bpsk_deriv(chi)?,
        a2: 2.0 * mi_scalar_bpsk_second_deriv(chi)?,
        f4: c_hat(chi)?,
    })
}

/// Expansion of the matrix-integration (rotation-mixed) value.
pub fn expand_matrix_integration(
    chi: f64,
    rho: f64,
    stats: &MatrixStats,
    constellation: Constellation,
) -> Result<ExpansionCoefficients> {
    let d = scalar_derivs(chi)?;
    let fac = field_factor(constellation);
    let rc = rho * chi;
    let l2 = stats.tr_r2_per_k;
    let l3 = stats.tr_r3_per_k;
    let l4 = stats.tr_r4_per_k;
    let orders = [
        fac * d.i1,
        0.0,
        fac * (-rc.powi(2) / 4.0 * l2 * d.a1 * d.a1),
        fac * (rc.powi(3) / 6.0 * l3 * d.a1.powi(3)),
        fac * (-rc.powi(4) / 8.0 * (l4 - 2.0 * l2 * l2) * d.a1.powi(4)
            + rc.powi(4) / 4.0 * l2 * l2 * d.a2 * d.a1 * d.a1),
    ];
    Ok(ExpansionCoefficients {
        orders,
        method: ExpansionMethod::MatrixIntegration,
        stats: *stats,
    })
}

/// Expansion of the exact (fixed-coupling) value.
pub fn expand_exact(
    chi: f64,
    rho: f64,
    stats: &MatrixStats,
    constellation: Constellation,
) -> Result<ExpansionCoefficients> {
    let d = scalar_derivs(chi)?;
    let fac = field_factor(constellation);
    let rc = rho * chi;
    let l2 = stats.tr_r2_per_k;
    let l3 = stats.tr_r3_per_k;
    let l4 = stats.tr_r4_per_k;
    let big_d = -d.a2 - d.a1 * d.a1;
    let order4 = -rc.powi(4) / 8.0 * l4 * d.a1.powi(4)
        - rc.powi(4) / 8.0
            * (2.0 * stats.sum_diag_r2_sq_per_k * big_d * d.a1 * d.a1
                + stats.sum_rij4_per_k * (big_d * big_d + d.f4 * d.f4 / 6.0));
    let orders = [
        fac * d.i1,
        0.0,
        fac * (-rc.powi(2) / 4.0 * l2 * d.a1 * d.a1),
        fac * (rc.powi(3) / 6.0 * l3 * d.a1.powi(3)),
        fac * order4,
    ];
    Ok(ExpansionCoefficients {
        orders,
        method: ExpansionMethod::Exact,
        stats: *stats,
    })
}

/// Leading discrepancy exact − matrix-integration:
/// -(ρχ)⁴ [ S₁ D A₁²/4 + S₂ (D² + Ĉ²/6)/8 ] · field factor. Nonpositive for
/// every constellation with factorizing symmetric components.
pub fn discrepancy(
    chi: f64,
    rho: f64,
    stats: &MatrixStats,
    constellation: Constellation,
) -> Result<f64> {
    let d = scalar_derivs(chi)?;
    let fac = field_factor(constellation);
    let rc = rho * chi;
    let big_d = -d.a2 - d.a1 * d.a1;
    Ok(-fac
        * rc.powi(4)
        * (stats.s1() * big_d * d.a1 * d.a1 / 4.0
            + stats.sum_rij4_per_k * (big_d * big_d + d.f4 * d.f4 / 6.0) / 8.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::trial_rng;
    use crate::spectrum::{ChainSize, Spectrum};
    use rand::Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn stats_for_chain_and_ring() {
        let s = MatrixStats::chain_asymptotic();
        assert_eq!(s.s1(), 0.0);
        // ring of k ≥ 5 reproduces the asymptotic values exactly
        let r = MatrixStats::ring(8).unwrap();
        assert!((r.tr_r2_per_k - 2.0).abs() < 1e-12);
        assert!(r.tr_r3_per_k.abs() < 1e-12);
        assert!((r.tr_r4_per_k - 6.0).abs() < 1e-12);
        assert!((r.sum_rij4_per_k - 2.0).abs() < 1e-12);
        assert!(r.s1().abs() < 1e-12);
        // finite open chain: Tr R³ = 0 (bipartite), boundary effects in S₁
        let c = MatrixStats::chain_finite(64).unwrap();
        assert!(c.tr_r3_per_k.abs() < 1e-12);
        assert!(c.s1() > 0.0);
        // 3-ring is the complete graph on 3 vertices: odd closed walks exist
        let r3 = MatrixStats::ring(3).unwrap();
        assert!((r3.tr_r2_per_k - 2.0).abs() < 1e-12);
        assert!((r3.tr_r3_per_k - 2.0).abs() < 1e-12);
        assert!((r3.tr_r4_per_k - 6.0).abs() < 1e-12);
        assert!(r3.s1().abs() < 1e-12);
    }

    #[test]
    fn zero_correlation_collapses() {
        let stats = MatrixStats::chain_asymptotic();
        for constellation in [Constellation::Bpsk, Constellation::Qpsk] {
            let e = expand_matrix_integration(1.3, 0.0, &stats, constellation).unwrap();
            let want = crate::scalar::mi_identity(1.3, constellation).unwrap();
            assert!((e.orders[0] - want).abs() < 1e-14);
            assert!(e.orders[1..].iter().all(|&x| x == 0.0));
            assert_eq!(discrepancy(1.3, 0.0, &stats, constellation).unwrap(), 0.0);
        }
    }

    #[test]
    fn low_orders_agree_across_methods() {
        let stats = MatrixStats::ring(16).unwrap();
        for chi in [0.4, 1.0, 3.0] {
            let a = expand_matrix_integration(chi, 0.15, &stats, Constellation::Qpsk).unwrap();
            let b = expand_exact(chi, 0.15, &stats, Constellation::Qpsk).unwrap();
            for i in 0..4 {
                assert!(
                    (a.orders[i] - b.orders[i]).abs() < 1e-10,
                    "order {i} differs"
                );
            }
            // fourth-order split equals the discrepancy formula identically
            let gap = b.orders[4] - a.orders[4];
            let disc = discrepancy(chi, 0.15, &stats, Constellation::Qpsk).unwrap();
            assert!((gap - disc).abs() < 1e-12, "{gap} vs {disc}");
        }
    }

    #[test]
    fn chain_order3_vanishes() {
        let stats = MatrixStats::chain_asymptotic();
        let e = expand_exact(1.0, 0.2, &stats, Constellation::Bpsk).unwrap();
        assert_eq!(e.orders[3], 0.0);
        // chain discrepancy reduces to -(ρχ)⁴/4 [D² + Ĉ²/6]
        let (chi, rho) = (1.0, 0.2);
        let a1 = 2.0 * mi_scalar_bpsk_deriv(chi).unwrap();
        let a2 = 2.0 * mi_scalar_bpsk_second_deriv(chi).unwrap();
        let big_d = -a2 - a1 * a1;
        let want = -(rho * chi).powi(4) / 4.0
            * (big_d * big_d + c_hat(chi).unwrap().powi(2) / 6.0);
        let got = discrepancy(chi, rho, &stats, Constellation::Bpsk).unwrap();
        assert!((got - want).abs() < 1e-14);
    }

    #[test]
    fn truncation_error_is_fifth_order() {
        // matrix-integration value vs its expansion: remainder O(ρ⁵)
        let chi = 1.5;
        let stats = MatrixStats::chain_asymptotic();
        let residual = |rho: f64| {
            let rt = Spectrum::tridiagonal_chain(rho, ChainSize::Asymptotic).unwrap();
            let full = crate::replica::mi_transmitter_matrix_integration(
                &rt,
                chi,
                Constellation::Bpsk,
            )
            .unwrap()
            .value;
            let series = expand_matrix_integration(chi, rho, &stats, Constellation::Bpsk)
                .unwrap()
                .total();
            (full - series).abs()
        };
        let (r1, r2) = (residual(0.1), residual(0.05));
        assert!(
            r1 / r2 > 16.0,
            "remainder should scale ~ρ⁵ (ratio {}, {r1} vs {r2})",
            r1 / r2
        );
    }

    #[test]
    fn exact_expansion_matches_small_ring_quadrature() {
        // 3-site ring, deterministic quadrature; residual O(ρ⁵)
        let chi = 1.0;
        let stats = MatrixStats::ring(3).unwrap();
        let residual = |rho: f64| {
            let exact = crate::replica::mi_exact_chain_quadrature(rho, chi, 3, 32).unwrap();
            let series = expand_exact(chi, rho, &stats, Constellation::Bpsk)
                .unwrap()
                .total();
            (exact - series).abs()
        };
        let (r1, r2) = (residual(0.12), residual(0.06));
        assert!(
            r1 / r2 > 16.0,
            "remainder should scale ~ρ⁵ (ratio {}, {r1} vs {r2})",
            r1 / r2
        );
    }

    #[test]
    fn discrepancy_nonpositive_on_grid() {
        let stats = MatrixStats::chain_asymptotic();
        for constellation in [Constellation::Bpsk, Constellation::Qpsk] {
            for i in 0..=40 {
                let chi = 0.25 * i as f64;
                let d = discrepancy(chi, 0.2, &stats, constellation).unwrap();
                assert!(d <= 1e-15, "discrepancy must be ≤ 0, got {d} at χ={chi}");
            }
        }
    }

    #[test]
    fn variance_combination_nonnegative() {
        // -I'' - I'² ≥ 0 for the identity channel on a grid (it is the
        // disorder variance of the posterior second cumulant)
        for i in 0..=40 {
            let chi = 0.5 * i as f64;
            let a1 = 2.0 * mi_scalar_bpsk_deriv(chi).unwrap();
            let a2 = 2.0 * mi_scalar_bpsk_second_deriv(chi).unwrap();
            assert!(-a2 - a1 * a1 >= -1e-12, "χ={chi}");
        }
    }

    #[test]
    fn cumulant_identities_by_monte_carlo() {
        // [⟨b̃²⟩_c] = 2 I₁' and [⟨b̃²⟩_c²] = -2 I₁'' on the scalar channel
        let chi = 1.2f64;
        let s = chi.sqrt();
        let mut rng = trial_rng(55, 0);
        let n = 400_000;
        let (mut m1, mut m2) = (0.0, 0.0);
        let (mut q1, mut q2) = (0.0, 0.0);
        for _ in 0..n {
            let b: f64 = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            let z: f64 = StandardNormal.sample(&mut rng);
            let r = s * b + z;
            let m = (s * r).tanh();
            let v = 1.0 - m * m;
            m1 += v;
            q1 += v * v;
            m2 += v * v;
            q2 += v.powi(4);
        }
        let nf = n as f64;
        let (mean1, mean2) = (m1 / nf, m2 / nf);
        let se1 = ((q1 / nf - mean1 * mean1) / nf).sqrt();
        let se2 = ((q2 / nf - mean2 * mean2) / nf).sqrt();
        let want1 = 2.0 * mi_scalar_bpsk_deriv(chi).unwrap();
        let want2 = -2.0 * mi_scalar_bpsk_second_deriv(chi).unwrap();
        assert!((mean1 - want1).abs() < 3.0 * se1, "{mean1} vs {want1}");
        assert!((mean2 - want2).abs() < 3.0 * se2, "{mean2} vs {want2}");
    }

    #[test]
    fn from_dense_validates() {
        let mut r = DMatrix::zeros(3, 3);
        r[(0, 0)] = 1.0;
        assert!(MatrixStats::from_dense(&r).is_err());
    }
}
