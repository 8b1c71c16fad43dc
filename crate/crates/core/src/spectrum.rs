//! Eigenvalue spectra and the random-matrix functionals built on them.
//!
//! A [`Spectrum`] is an asymptotic (or empirical) eigenvalue distribution
//! ρ(λ) with compact support. Three functionals drive the analysis:
//!
//! * the log-det average `G(x) = (1/β) ∫ ρ(λ) ln(1 - βλx) dλ`, which is the
//!   exact Gaussian-integral result for receiver-side correlation,
//! * the integrated R-transform `∫₀^z R(x) dx` obtained by Stieltjes
//!   inversion, and
//! * its Legendre transform, the large-deviation rate `Ĝ(λ)` of the
//!   effective channel gain λ. Orthogonal (real) ensembles carry the usual
//!   factor-of-two rescaling relative to unitary ones: Ĝ_O(λ) = Ĝ_U(λ)/2.
//!
//! For the nearest-neighbour correlation chain the asymptotic spectrum is an
//! arcsine law and `Ĝ_O(λ) = -(1/2) ln(1 - (λ-1)²/4ρ²)`; the numeric route
//! below reproduces that closed form and is validated against it in tests.

use crate::error::{CoreError, Result};
use crate::quad::{gauss_legendre, solve_bracketed, QuadRule};

/// Matrix ensemble behind a rotation-invariant average.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ensemble {
    /// Real orthogonal conjugation (real channels).
    Orthogonal,
    /// Complex unitary conjugation (complex channels).
    Unitary,
}

/// Finite or asymptotic realization of the correlation-chain spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChainSize {
    Finite(usize),
    Asymptotic,
}

/// An eigenvalue distribution with quadrature and moment access.
#[derive(Debug, Clone, PartialEq)]
pub enum Spectrum {
    /// Point mass at `at`.
    Delta { at: f64 },
    /// Arcsine law on [center-halfwidth, center+halfwidth] with density
    /// 1/(π √(halfwidth² - (λ-center)²)).
    Arcsine { center: f64, halfwidth: f64 },
    /// Empirical spectrum: equal weight on each listed eigenvalue (sorted).
    Empirical { eigenvalues: Vec<f64> },
}

const ARCSINE_QUAD_ORDER: usize = 192;

impl Spectrum {
    pub fn delta(at: f64) -> Self {
        Spectrum::Delta { at }
    }

    pub fn arcsine(center: f64, halfwidth: f64) -> Result<Self> {
        if !(halfwidth > 0.0) || !halfwidth.is_finite() || !center.is_finite() {
            return Err(CoreError::InvalidParameter(format!(
                "arcsine spectrum needs finite center and positive halfwidth, got ({center}, {halfwidth})"
            )));
        }
        Ok(Spectrum::Arcsine { center, halfwidth })
    }

    pub fn empirical(mut eigenvalues: Vec<f64>) -> Result<Self> {
        if eigenvalues.is_empty() || eigenvalues.iter().any(|x| !x.is_finite()) {
            return Err(CoreError::InvalidParameter(
                "empirical spectrum needs a nonempty list of finite eigenvalues".into(),
            ));
        }
        eigenvalues.sort_by(f64::total_cmp);
        Ok(Spectrum::Empirical { eigenvalues })
    }

    /// Spectrum of the tridiagonal correlation matrix I + ρR (unit diagonal,
    /// ρ on the first off-diagonals). Finite size K gives the exact
    /// eigenvalues 1 + 2ρ cos(kπ/(K+1)); the asymptotic law is arcsine with
    /// halfwidth 2|ρ|. Requires |ρ| ≤ 1/2 so the limit stays PSD.
    pub fn tridiagonal_chain(rho: f64, size: ChainSize) -> Result<Self> {
        if rho.abs() > 0.5 {
            return Err(CoreError::InvalidParameter(format!(
                "|rho| = {} exceeds 1/2; the asymptotic chain spectrum reaches negative eigenvalues",
                rho.abs()
            )));
        }
        if rho == 0.0 {
            return Ok(Spectrum::delta(1.0));
        }
        match size {
            ChainSize::Finite(k) => {
                if k == 0 {
                    return Err(CoreError::InvalidParameter("chain size must be >= 1".into()));
                }
                let evs = (1..=k)
                    .map(|j| 1.0 + 2.0 * rho * (std::f64::consts::PI * j as f64 / (k as f64 + 1.0)).cos())
                    .collect();
                Spectrum::empirical(evs)
            }
            ChainSize::Asymptotic => Spectrum::arcsine(1.0, 2.0 * rho.abs()),
        }
    }

    /// Spectrum of the periodic chain I + ρR on a ring of K sites:
    /// eigenvalues 1 + 2ρ cos(2πj/K).
    pub fn ring_chain(rho: f64, k: usize) -> Result<Self> {
        if rho.abs() > 0.5 {
            return Err(CoreError::InvalidParameter(format!(
                "|rho| = {} exceeds 1/2",
                rho.abs()
            )));
        }
        if k == 0 {
            return Err(CoreError::InvalidParameter("ring size must be >= 1".into()));
        }
        let evs = (0..k)
            .map(|j| 1.0 + 2.0 * rho * (2.0 * std::f64::consts::PI * j as f64 / k as f64).cos())
            .collect();
        Spectrum::empirical(evs)
    }

    /// Support interval [min, max].
    pub fn support(&self) -> (f64, f64) {
        match self {
            Spectrum::Delta { at } => (*at, *at),
            Spectrum::Arcsine { center, halfwidth } => (center - halfwidth, center + halfwidth),
            Spectrum::Empirical { eigenvalues } => {
                (eigenvalues[0], *eigenvalues.last().unwrap())
            }
        }
    }

    /// ∫ ρ(λ) f(λ) dλ. The arcsine branch substitutes λ = c + h sinθ so the
    /// inverse-square-root endpoint singularity never meets the quadrature.
    pub fn average<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        match self {
            Spectrum::Delta { at } => f(*at),
            Spectrum::Arcsine { center, halfwidth } => {
                let rule = arcsine_rule();
                let s: f64 = rule
                    .nodes
                    .iter()
                    .zip(&rule.weights)
                    .map(|(&th, &w)| w * f(center + halfwidth * th.sin()))
                    .sum();
                s / std::f64::consts::PI
            }
            Spectrum::Empirical { eigenvalues } => {
                let s: f64 = eigenvalues.iter().map(|&l| f(l)).sum();
                s / eigenvalues.len() as f64
            }
        }
    }

    /// n-th moment ∫ ρ(λ) λⁿ dλ.
    pub fn moment(&self, n: u32) -> f64 {
        match self {
            Spectrum::Delta { at } => at.powi(n as i32),
            Spectrum::Arcsine { center, halfwidth } => {
                // binomial expansion with E[sin^{2j}] = C(2j, j)/4^j
                let mut total = 0.0;
                for j in 0..=(n / 2) {
                    let k = 2 * j;
                    let binom_nk = binomial(n, k);
                    let sin_moment = binomial(k, j) / 4f64.powi(j as i32);
                    total += binom_nk
                        * center.powi((n - k) as i32)
                        * halfwidth.powi(k as i32)
                        * sin_moment;
                }
                total
            }
            Spectrum::Empirical { .. } => self.average(|l| l.powi(n as i32)),
        }
    }

    pub fn mean(&self) -> f64 {
        self.moment(1)
    }

    fn check_log_domain(&self, beta: f64, x: f64) -> Result<()> {
        let (lo, hi) = self.support();
        for lambda in [lo, hi] {
            let argument = 1.0 - beta * lambda * x;
            if argument <= 0.0 {
                return Err(CoreError::LogDomain { lambda, argument });
            }
        }
        Ok(())
    }

    /// Log-det average G(x) = (1/β) ∫ ρ(λ) ln(1 - βλx) dλ.
    ///
    /// This is the exact large-size value of (1/K) ln E exp[-tr(Ξ†RΞ·xK·…)]
    /// over an i.i.d. Gaussian Ξ when ρ is the spectrum of R, with β the
    /// column/row aspect ratio. G(0) = 0, G' < 0, G'' < 0 for nonnegative
    /// spectra.
    pub fn g_function(&self, beta: f64, x: f64) -> Result<f64> {
        self.check_log_domain(beta, x)?;
        match self {
            Spectrum::Delta { at } => Ok((1.0 - beta * at * x).ln() / beta),
            _ => Ok(self.average(|l| (1.0 - beta * l * x).ln()) / beta),
        }
    }

    /// Analytic derivative G'(x) = -∫ ρ(λ) λ/(1 - βλx) dλ.
    pub fn g_derivative(&self, beta: f64, x: f64) -> Result<f64> {
        self.check_log_domain(beta, x)?;
        Ok(-self.average(|l| l / (1.0 - beta * l * x)))
    }

    /// Literal Legendre transform of `g_function`:
    /// Ĝ(λ) = Extr_χ {λχ - G(χ)}, solved through λ = G'(χ*).
    ///
    /// Returns (value, χ*). λ must lie in the range of G' (a subset of the
    /// negative axis for nonnegative spectra).
    pub fn legendre_g_hat(&self, beta: f64, lambda: f64) -> Result<(f64, f64)> {
        let (lo_s, hi_s) = self.support();
        // Domain of G: 1 - βλx > 0 at both support ends.
        let upper = if hi_s > 0.0 { 1.0 / (beta * hi_s) } else { f64::INFINITY };
        let lower = if lo_s < 0.0 { 1.0 / (beta * lo_s) } else { f64::NEG_INFINITY };
        let margin = 1e-12_f64.max(1e-9 * (upper - lower).abs().min(1e9));
        let clamp = |v: f64, big: f64| if v.is_finite() { v } else { big };
        let lo = clamp(lower, -1e6) + margin;
        let hi = clamp(upper, 1e6) - margin;

        let grad = |chi: f64| self.g_derivative(beta, chi).unwrap_or(f64::NAN) - lambda;
        // scan for a sign change
        let n = 200;
        let mut scan = Vec::new();
        let mut bracket = None;
        let mut prev = (lo, grad(lo));
        for i in 1..=n {
            let x = lo + (hi - lo) * i as f64 / n as f64;
            let g = grad(x);
            if prev.1.is_finite() && g.is_finite() && (prev.1 <= 0.0) != (g <= 0.0) {
                bracket = Some((prev.0, x));
                break;
            }
            if i % 20 == 0 {
                scan.push((x, g));
            }
            prev = (x, g);
        }
        let (a, b) = bracket.ok_or(CoreError::NoExtremum { lo, hi, scan })?;
        let chi_star = solve_bracketed(grad, a, b, 1e-14, 200);
        let value = lambda * chi_star - self.g_function(beta, chi_star)?;
        Ok((value, chi_star))
    }

    /// Stieltjes transform s(w) = ∫ ρ(λ)/(w - λ) dλ for w outside the support.
    pub fn stieltjes(&self, w: f64) -> Result<f64> {
        let (lo, hi) = self.support();
        if w >= lo && w <= hi {
            return Err(CoreError::OutOfRange { value: w, lo, hi });
        }
        Ok(match self {
            Spectrum::Delta { at } => 1.0 / (w - at),
            Spectrum::Arcsine { center, halfwidth } => {
                let a = w - center;
                a.signum() / (a * a - halfwidth * halfwidth).sqrt()
            }
            Spectrum::Empirical { .. } => self.average(|l| 1.0 / (w - l)),
        })
    }

    /// ∫ ρ(t) ln|w - t| dt for w outside the support.
    fn log_resolvent(&self, w: f64) -> f64 {
        match self {
            Spectrum::Delta { at } => (w - at).abs().ln(),
            Spectrum::Arcsine { center, halfwidth } => {
                let a = (w - center).abs();
                (0.5 * (a + (a * a - halfwidth * halfwidth).sqrt())).ln()
            }
            Spectrum::Empirical { .. } => self.average(|l| (w - l).abs().ln()),
        }
    }

    /// First four free cumulants (κ₁..κ₄) from the moments.
    pub fn free_cumulants(&self) -> [f64; 4] {
        let m1 = self.moment(1);
        let m2 = self.moment(2);
        let m3 = self.moment(3);
        let m4 = self.moment(4);
        let k1 = m1;
        let k2 = m2 - k1 * k1;
        let k3 = m3 - 3.0 * k2 * k1 - k1 * k1 * k1;
        let k4 = m4 - 4.0 * k3 * k1 - 2.0 * k2 * k2 - 6.0 * k2 * k1 * k1 - k1.powi(4);
        [k1, k2, k3, k4]
    }

    /// Coefficients of z, z², z³, z⁴ in the small-z expansion of the
    /// integrated R-transform: [κ₁, κ₂/2, κ₃/3, κ₄/4] truncated to `order`.
    /// Orders above 4 are unsupported.
    pub fn series_coefficients(&self, order: usize) -> Result<Vec<f64>> {
        if order > 4 {
            return Err(CoreError::InvalidParameter(format!(
                "series order {order} unsupported (max 4)"
            )));
        }
        let k = self.free_cumulants();
        Ok((0..order).map(|i| k[i] / (i as f64 + 1.0)).collect())
    }

    /// Solve λ = w - 1/s(w) for w outside the support. λ must lie strictly
    /// inside (support min, support max); λ equal to the mean maps to |w|→∞.
    fn gain_to_resolvent_point(&self, lambda: f64) -> Result<f64> {
        let (lo, hi) = self.support();
        let mean = self.mean();
        if lambda <= lo || lambda >= hi {
            return Err(CoreError::OutOfRange { value: lambda, lo, hi });
        }
        let width = (hi - lo).max(1e-12);
        let target = |w: f64| w - 1.0 / self.stieltjes(w).unwrap() - lambda;
        if lambda > mean {
            // w decreasing from support top: λ(w) sweeps (mean, hi)
            let mut a = hi + 1e-13 * width.max(hi.abs());
            while !target(a).is_finite() || target(a) < 0.0 {
                // so close to the edge that s(w) overflowed; back off
                a = hi + (a - hi) * 10.0;
                if a > hi + width * 1e6 {
                    return Err(CoreError::OutOfRange { value: lambda, lo, hi });
                }
            }
            let mut b = hi + width;
            while target(b) > 0.0 {
                b = hi + (b - hi) * 2.0;
                if b > hi + width * 1e12 {
                    return Err(CoreError::OutOfRange { value: lambda, lo: mean, hi });
                }
            }
            Ok(solve_bracketed(target, a, b, 1e-15 * width, 200))
        } else {
            let mut a = lo - 1e-13 * width.max(lo.abs());
            while !target(a).is_finite() || target(a) > 0.0 {
                a = lo - (lo - a) * 10.0;
                if a < lo - width * 1e6 {
                    return Err(CoreError::OutOfRange { value: lambda, lo, hi });
                }
            }
            let mut b = lo - width;
            while target(b) < 0.0 {
                b = lo - (lo - b) * 2.0;
                if b < lo - width * 1e12 {
                    return Err(CoreError::OutOfRange { value: lambda, lo, hi: mean });
                }
            }
            Ok(solve_bracketed(target, a, b, 1e-15 * width, 200))
        }
    }

    /// Large-deviation rate Ĝ(λ) of the effective channel gain: the Legendre
    /// transform of the integrated R-transform of the spectrum, with the
    /// orthogonal ensemble carrying half the unitary value.
    ///
    /// Returns (Ĝ(λ), χ*) where χ* is the conjugate extremizer, i.e.
    /// Ĝ'(λ) = χ*. For a Delta spectrum the gain is pinned to the atom.
    pub fn gain_rate(&self, lambda: f64, ensemble: Ensemble) -> Result<(f64, f64)> {
        if let Spectrum::Delta { at } = self {
            if (lambda - at).abs() < 1e-12 {
                return Ok((0.0, 0.0));
            }
            return Err(CoreError::OutOfRange {
                value: lambda,
                lo: *at,
                hi: *at,
            });
        }
        let mean = self.mean();
        if (lambda - mean).abs() < 1e-13 {
            return Ok((0.0, 0.0));
        }
        let w = self.gain_to_resolvent_point(lambda)?;
        let s = self.stieltjes(w)?;
        // product s·exp(∫ρ ln(w-t)) is positive on both sides of the support
        let unitary_value = s.abs().ln() + self.log_resolvent(w);
        match ensemble {
            Ensemble::Unitary => Ok((unitary_value, s)),
            Ensemble::Orthogonal => Ok((0.5 * unitary_value, 0.5 * s)),
        }
    }

    /// Integrated R-transform ∫₀^z R(x) dx (unitary convention); the
    /// orthogonal value is (1/2)∫₀^{2z} R. Switches to the free-cumulant
    /// series for small |z| where the closed identity loses digits.
    pub fn g_rate(&self, z: f64, ensemble: Ensemble) -> Result<f64> {
        let y = match ensemble {
            Ensemble::Unitary => z,
            Ensemble::Orthogonal => 2.0 * z,
        };
        let scale = match ensemble {
            Ensemble::Unitary => 1.0,
            Ensemble::Orthogonal => 0.5,
        };
        if let Spectrum::Delta { at } = self {
            return Ok(scale * at * y);
        }
        let k = self.free_cumulants();
        let small = 0.02 / (1.0 + k[1].abs().sqrt());
        if y.abs() < small {
            let series = k[0] * y + k[1] * y * y / 2.0 + k[2] * y.powi(3) / 3.0 + k[3] * y.powi(4) / 4.0;
            return Ok(scale * series);
        }
        // A(y) = y·w - 1 - ln|y| - ∫ρ(t) ln|w-t| dt with s(w) = y
        let w = self.inverse_stieltjes(y)?;
        let a = y * w - 1.0 - y.abs().ln() - self.log_resolvent(w);
        Ok(scale * a)
    }

    /// Solve s(w) = y for w outside the support (y ≠ 0; sign of y selects
    /// the side).
    fn inverse_stieltjes(&self, y: f64) -> Result<f64> {
        let (lo, hi) = self.support();
        let width = (hi - lo).max(1e-9);
        if y > 0.0 {
            // w above support: s decreases from +∞ to 0+
            let mut a = hi + 1e-13 * width.max(hi.abs());
            while !self.stieltjes(a).map(|v| v > y).unwrap_or(false) {
                a = hi + (a - hi) * 10.0;
                if a > hi + width * 1e9 {
                    return Err(CoreError::OutOfRange { value: y, lo: 0.0, hi: f64::INFINITY });
                }
            }
            let mut b = hi + width;
            while self.stieltjes(b)? > y {
                b = hi + (b - hi) * 2.0;
            }
            Ok(solve_bracketed(
                |w| self.stieltjes(w).unwrap() - y,
                a,
                b,
                1e-15 * width,
                200,
            ))
        } else {
            let mut a = lo - 1e-13 * width.max(lo.abs());
            while !self.stieltjes(a).map(|v| v < y).unwrap_or(false) {
                a = lo - (lo - a) * 10.0;
                if a < lo - width * 1e9 {
                    return Err(CoreError::OutOfRange { value: y, lo: f64::NEG_INFINITY, hi: 0.0 });
                }
            }
            let mut b = lo - width;
            while self.stieltjes(b)? < y {
                b = lo - (lo - b) * 2.0;
            }
            Ok(solve_bracketed(
                |w| self.stieltjes(w).unwrap() - y,
                b,
                a,
                1e-15 * width,
                200,
            ))
        }
    }
}

fn binomial(n: u32, k: u32) -> f64 {
    let mut r = 1.0;
    for i in 0..k {
        r = r * (n - i) as f64 / (i + 1) as f64;
    }
    r
}

fn arcsine_rule() -> &'static QuadRule {
    use once_cell::sync::Lazy;
    static RULE: Lazy<QuadRule> = Lazy::new(|| {
        gauss_legendre(
            ARCSINE_QUAD_ORDER,
            -std::f64::consts::FRAC_PI_2,
            std::f64::consts::FRAC_PI_2,
        )
    });
    &RULE
}

/// CDF of the arcsine law with the given center and halfwidth.
pub fn arcsine_cdf(center: f64, halfwidth: f64, x: f64) -> f64 {
    if x <= center - halfwidth {
        0.0
    } else if x >= center + halfwidth {
        1.0
    } else {
        0.5 + ((x - center) / halfwidth).asin() / std::f64::consts::PI
    }
}

/// CDF of the Marchenko–Pastur law with aspect ratio β (mean normalized to
/// 1, edges (1 ± √β)²), including the atom at zero when β > 1. Evaluated by
/// quadrature of the density with the edge singularities substituted away.
pub fn marchenko_pastur_cdf(beta: f64, x: f64) -> f64 {
    let lo = (1.0 - beta.sqrt()).powi(2);
    let hi = (1.0 + beta.sqrt()).powi(2);
    let atom = (1.0 - 1.0 / beta).max(0.0);
    if x < lo.min(0.0) {
        return 0.0;
    }
    if x <= lo {
        return atom;
    }
    if x >= hi {
        return 1.0;
    }
    // t-substitution x(θ) = mid + half·sinθ regularizes both edges
    let mid = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let theta_max = ((x - mid) / half).asin();
    let rule = gauss_legendre(256, -std::f64::consts::FRAC_PI_2, theta_max);
    let integral = rule.integrate(|th| {
        let t = mid + half * th.sin();
        // density × dx/dθ; √((hi-t)(t-lo)) = half·cosθ
        half * th.cos() * (half * th.cos()) / (2.0 * std::f64::consts::PI * beta * t)
    });
    atom + integral
}
