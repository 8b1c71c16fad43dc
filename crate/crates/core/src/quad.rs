//! Gaussian quadrature rules (Golub–Welsch) and small root-finding helpers.
//!
//! Two rules are used throughout the crate:
//! * Gauss–Hermite for averages ∫ Dz f(z) with Dz = e^{-z²/2}/√(2π),
//! * Gauss–Legendre for compact-support spectral integrals.

use nalgebra::{DMatrix, SymmetricEigen};
use once_cell::sync::Lazy;

/// Nodes/weights of a quadrature rule.
#[derive(Debug, Clone)]
pub struct QuadRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl QuadRule {
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

/// Eigen-decompose the Jacobi matrix of a three-term recurrence.
/// Returns (nodes, first components squared) sorted by node.
fn golub_welsch(diag: &[f64], offdiag: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = diag.len();
    let mut m = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        m[(i, i)] = diag[i];
        if i + 1 < n {
            m[(i, i + 1)] = offdiag[i];
            m[(i + 1, i)] = offdiag[i];
        }
    }
    let eig = SymmetricEigen::new(m);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|j| {
            let v0 = eig.eigenvectors[(0, j)];
            (eig.eigenvalues[j], v0 * v0)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

/// Gauss–Hermite rule adapted to the standard normal weight:
/// ∫ f(z) e^{-z²/2}/√(2π) dz ≈ Σ w_i f(z_i), weights sum to 1.
pub fn gauss_hermite_normal(order: usize) -> QuadRule {
    assert!(order >= 2, "quadrature order must be at least 2");
    // Physicists' Hermite recurrence: off-diagonal sqrt(k/2); nodes are for
    // weight e^{-x²}; rescale x = z/√2.
    let diag = vec![0.0; order];
    let offdiag: Vec<f64> = (1..order).map(|k| (k as f64 / 2.0).sqrt()).collect();
    let (nodes, w0) = golub_welsch(&diag, &offdiag);
    // Total mass of e^{-x²} is √π; normalizing gives probabilists' weights.
    let nodes: Vec<f64> = nodes.iter().map(|x| x * std::f64::consts::SQRT_2).collect();
    let weights: Vec<f64> = w0.to_vec();
    QuadRule { nodes, weights }
}

/// Gauss–Legendre rule on [a, b] with unit weight.
pub fn gauss_legendre(order: usize, a: f64, b: f64) -> QuadRule {
    assert!(order >= 2, "quadrature order must be at least 2");
    let diag = vec![0.0; order];
    let offdiag: Vec<f64> = (1..order)
        .map(|k| {
            let k = k as f64;
            k / (4.0 * k * k - 1.0).sqrt()
        })
        .collect();
    let (nodes, w0) = golub_welsch(&diag, &offdiag);
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let nodes: Vec<f64> = nodes.iter().map(|x| mid + half * x).collect();
    let weights: Vec<f64> = w0.iter().map(|w| 2.0 * w * half).collect();
    QuadRule { nodes, weights }
}

/// Default Hermite rule shared by the scalar-channel integrals.
pub static GH_DEFAULT: Lazy<QuadRule> = Lazy::new(|| gauss_hermite_normal(127));

/// Bisection refined by Newton steps where the derivative is supplied.
/// `f` must have opposite signs at the bracket ends.
pub fn solve_bracketed<F>(f: F, mut lo: f64, mut hi: f64, tol: f64, max_iter: usize) -> f64
where
    F: Fn(f64) -> f64,
{
    if lo > hi {
        std::mem::swap(&mut lo, &mut hi);
    }
    let mut flo = f(lo);
    let fhi = f(hi);
    debug_assert!(
        flo == 0.0 || fhi == 0.0 || (flo < 0.0) != (fhi < 0.0),
        "root not bracketed: f({lo})={flo}, f({hi})={fhi}"
    );
    if flo == 0.0 {
        return lo;
    }
    if fhi == 0.0 {
        return hi;
    }
    for _ in 0..max_iter {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm == 0.0 || hi - lo < tol {
            return mid;
        }
        if (fm < 0.0) == (flo < 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Golden-section minimization of a unimodal function on [a, b].
pub fn golden_minimize<F>(f: F, mut a: f64, mut b: f64, tol: f64) -> f64
where
    F: Fn(f64) -> f64,
{
    const INVPHI: f64 = 0.618_033_988_749_894_9;
    let mut c = b - INVPHI * (b - a);
    let mut d = a + INVPHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INVPHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INVPHI * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Two-sided Kolmogorov distance between empirical samples (consumed sorted)
/// or between a sample and a reference CDF.
pub fn kolmogorov_distance_sorted(a: &[f64], b: &[f64]) -> f64 {
    let (na, nb) = (a.len(), b.len());
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < na && j < nb {
        if a[i] <= b[j] {
            i += 1;
        } else {
            j += 1;
        }
        d = d.max((i as f64 / na as f64 - j as f64 / nb as f64).abs());
    }
    d
}

/// Kolmogorov distance between a sorted sample and a reference CDF.
pub fn kolmogorov_distance_cdf<F: Fn(f64) -> f64>(sorted: &[f64], cdf: F) -> f64 {
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let c = cdf(x);
            (c - i as f64 / n).abs().max(((i + 1) as f64 / n - c).abs())
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hermite_moments() {
        let q = gauss_hermite_normal(64);
        assert!((q.integrate(|_| 1.0) - 1.0).abs() < 1e-13);
        assert!(q.integrate(|z| z).abs() < 1e-13);
        assert!((q.integrate(|z| z * z) - 1.0).abs() < 1e-12);
        assert!((q.integrate(|z| z.powi(4)) - 3.0).abs() < 1e-11);
    }

    #[test]
    fn hermite_nonpolynomial() {
        // E[cos z] = e^{-1/2} for z ~ N(0,1)
        let q = gauss_hermite_normal(64);
        assert!((q.integrate(f64::cos) - (-0.5f64).exp()).abs() < 1e-13);
    }

    #[test]
    fn legendre_polynomials() {
        let q = gauss_legendre(32, 0.0, 2.0);
        assert!((q.integrate(|x| x * x) - 8.0 / 3.0).abs() < 1e-12);
        assert!((q.integrate(f64::exp) - (2.0f64.exp() - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn bisection_root() {
        let r = solve_bracketed(|x| x * x - 2.0, 0.0, 2.0, 1e-14, 200);
        assert!((r - 2.0f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn ks_distance_identical() {
        let a = vec![0.1, 0.5, 0.9];
        assert!(kolmogorov_distance_sorted(&a, &a) <= 1.0 / 3.0 + 1e-12);
        let d = kolmogorov_distance_cdf(&a, |x| x);
        assert!(d < 0.35);
    }
}
