//! Random-field Ising-chain machinery for the nearest-neighbour correlated
//! channel: bidiagonal chain factorization, bond factor weights, cavity
//! (belief-propagation) recursions, exhaustive small-chain oracles, and
//! population dynamics for the stationary belief distributions.
//!
//! The correlation matrix I + ρR factorizes through a bidiagonal Λ with
//! constant diagonal l₀ and subdiagonal l₁ satisfying l₀² + l₁² = 1 and
//! l₀l₁ = ρ. Conditioned on the planted (gauge-removed) signal and the
//! Gaussian disorder η, the posterior of the chain channel is a
//! one-dimensional Ising model with bond disorder; BP is exact on it.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{CoreError, Result};
use crate::quad::kolmogorov_distance_sorted;

/// Bulk factorization constants of I + ρR = ΛΛᵀ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainFactorization {
    pub l0: f64,
    pub l1: f64,
    pub rho: f64,
}

/// Solve l₀² = (1 + √(1-4ρ²))/2, l₁ = ρ/l₀. Requires |ρ| ≤ 1/2.
pub fn cholesky_chain(rho: f64) -> Result<ChainFactorization> {
    if !(rho.abs() <= 0.5) {
        return Err(CoreError::InvalidParameter(format!(
            "no real chain factorization for |rho| = {} > 1/2",
            rho.abs()
        )));
    }
    let l0 = (0.5 * (1.0 + (1.0 - 4.0 * rho * rho).sqrt())).sqrt();
    let l1 = if rho == 0.0 { 0.0 } else { rho / l0 };
    Ok(ChainFactorization { l0, l1, rho })
}

/// Numerically stable ln cosh.
#[inline]
fn ln_cosh(x: f64) -> f64 {
    x.abs() + (-2.0 * x.abs()).exp().ln_1p() - std::f64::consts::LN_2
}

/// atanh(tanh(a)·tanh(b)) without intermediate saturation:
/// = (1/2) ln(cosh(a+b)/cosh(a-b)).
#[inline]
pub fn atanh_tanh_tanh(a: f64, b: f64) -> f64 {
    0.5 * (ln_cosh(a + b) - ln_cosh(a - b))
}

/// Boltzmann weight of one chain bond in the gauged spin variables:
/// φ(τ, τ'| τ̄, η) = (1/2) exp[-(χ/2)(l₀(τ-1) + l₁τ̄(τ'-1))²
///                            + √χ η (l₀τ + l₁τ̄τ')].
pub fn factor_weight(
    tau_k: i8,
    tau_k1: i8,
    tau_bar: i8,
    eta: f64,
    chi: f64,
    f: &ChainFactorization,
) -> f64 {
    debug_assert!(tau_k.abs() == 1 && tau_k1.abs() == 1 && tau_bar.abs() == 1);
    let (t, t1, tb) = (tau_k as f64, tau_k1 as f64, tau_bar as f64);
    let q = f.l0 * (t - 1.0) + f.l1 * tb * (t1 - 1.0);
    let lin = chi.sqrt() * eta * (f.l0 * t + f.l1 * tb * t1);
    0.5 * (-(chi / 2.0) * q * q + lin).exp()
}

/// One step of the left-to-right cavity recursion:
/// h_→ ↦ χl₁² + χρτ̄ + √χ l₁ τ̄ η
///        - τ̄ · atanh(tanh(ρχ) tanh(h_→ + χl₀² + χρτ̄ + √χ l₀ η)).
pub fn forward_cavity(h_in: f64, tau_bar: i8, eta: f64, chi: f64, f: &ChainFactorization) -> f64 {
    let tb = tau_bar as f64;
    let s = chi.sqrt();
    let inner = h_in + chi * f.l0 * f.l0 + chi * f.rho * tb + s * f.l0 * eta;
    chi * f.l1 * f.l1 + chi * f.rho * tb + s * f.l1 * tb * eta
        - tb * atanh_tanh_tanh(f.rho * chi, inner)
}

/// One step of the right-to-left cavity recursion; the l₀/l₁ roles swap.
pub fn backward_cavity(h_in: f64, tau_bar: i8, eta: f64, chi: f64, f: &ChainFactorization) -> f64 {
    let tb = tau_bar as f64;
    let s = chi.sqrt();
    let inner = h_in + chi * f.l1 * f.l1 + chi * f.rho * tb + s * f.l1 * tb * eta;
    chi * f.l0 * f.l0 + chi * f.rho * tb + s * f.l0 * eta
        - tb * atanh_tanh_tanh(f.rho * chi, inner)
}

/// Generic nearest-neighbour Ising chain with per-site fields and per-bond
/// couplings (couplings.len() = fields.len() - 1).
#[derive(Debug, Clone)]
pub struct IsingChain {
    pub fields: Vec<f64>,
    pub couplings: Vec<f64>,
}

/// BP solution of a chain: exact marginals, nearest-neighbour pair moments,
/// log partition function, and the cavity messages.
#[derive(Debug, Clone)]
pub struct ChainSolution {
    pub magnetizations: Vec<f64>,
    pub pair_moments: Vec<f64>,
    pub ln_z: f64,
    /// message into site k from the left (index 0 is the open boundary, 0.0)
    pub forward: Vec<f64>,
    /// message into site k from the right
    pub backward: Vec<f64>,
}

impl IsingChain {
    pub fn solve(&self) -> ChainSolution {
        let n = self.fields.len();
        assert_eq!(self.couplings.len() + 1, n, "need K-1 couplings for K sites");
        let mut forward = vec![0.0; n];
        for k in 0..n - 1 {
            forward[k + 1] = atanh_tanh_tanh(self.couplings[k], self.fields[k] + forward[k]);
        }
        let mut backward = vec![0.0; n];
        for k in (0..n - 1).rev() {
            backward[k] = atanh_tanh_tanh(self.couplings[k], self.fields[k + 1] + backward[k + 1]);
        }
        let magnetizations: Vec<f64> = (0..n)
            .map(|k| (self.fields[k] + forward[k] + backward[k]).tanh())
            .collect();
        let pair_moments: Vec<f64> = (0..n - 1)
            .map(|k| {
                let a = self.fields[k] + forward[k];
                let b = self.fields[k + 1] + backward[k + 1];
                (self.couplings[k] + 0.5 * (ln_cosh(a + b) - ln_cosh(a - b))).tanh()
            })
            .collect();
        // lnZ by log-domain sweep over the two spin states
        let mut w_plus = self.fields[0];
        let mut w_minus = -self.fields[0];
        let mut ln_z = 0.0;
        for k in 0..n - 1 {
            let (j, f) = (self.couplings[k], self.fields[k + 1]);
            let shift = w_plus.max(w_minus);
            ln_z += shift;
            let (ep, em) = ((w_plus - shift).exp(), (w_minus - shift).exp());
            w_plus = f + (ep * j.exp() + em * (-j).exp()).ln();
            w_minus = -f + (ep * (-j).exp() + em * j.exp()).ln();
        }
        let shift = w_plus.max(w_minus);
        ln_z += shift + ((w_plus - shift).exp() + (w_minus - shift).exp()).ln();
        ChainSolution {
            magnetizations,
            pair_moments,
            ln_z,
            forward,
            backward,
        }
    }
}

/// Open chain or periodic ring.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChainTopology {
    Open,
    Ring,
}

/// One disorder realization of the gauged random-field chain at gain χ.
///
/// Open topology: K sites, K-1 pair bonds carrying (τ̄_k, η_k), plus a
/// single-site boundary factor on the last site driven by η_{K-1}; so
/// `eta.len() = K`, `tau_bar.len() = K-1`. Ring topology: K bonds, both
/// arrays of length K.
#[derive(Debug, Clone)]
pub struct RandomFieldChain<'a> {
    pub chi: f64,
    pub fact: ChainFactorization,
    pub tau_bar: &'a [i8],
    pub eta: &'a [f64],
    pub topology: ChainTopology,
}

impl<'a> RandomFieldChain<'a> {
    pub fn sites(&self) -> usize {
        match self.topology {
            ChainTopology::Open => self.eta.len(),
            ChainTopology::Ring => self.eta.len(),
        }
    }

    fn check(&self) -> Result<()> {
        let k = self.sites();
        let want_bonds = match self.topology {
            ChainTopology::Open => k - 1,
            ChainTopology::Ring => k,
        };
        if self.tau_bar.len() != want_bonds {
            return Err(CoreError::DimensionMismatch(format!(
                "expected {want_bonds} bond signs for {k} sites, got {}",
                self.tau_bar.len()
            )));
        }
        if k < 2 {
            return Err(CoreError::InvalidParameter("need at least 2 sites".into()));
        }
        Ok(())
    }

    /// Field contributed by bond k on its left site (l₀ side).
    fn field_l0(&self, k: usize) -> f64 {
        let f = &self.fact;
        let tb = self.tau_bar[k] as f64;
        self.chi * f.l0 * f.l0 + self.chi * f.rho * tb + self.chi.sqrt() * f.l0 * self.eta[k]
    }

    /// Field contributed by bond k on its right site (l₁ side).
    fn field_l1(&self, k: usize) -> f64 {
        let f = &self.fact;
        let tb = self.tau_bar[k] as f64;
        self.chi * f.l1 * f.l1 + self.chi * f.rho * tb + self.chi.sqrt() * f.l1 * tb * self.eta[k]
    }

    /// Spin-independent log-constant of the centered bond factor
    /// (the factor equals 1 at τ = τ' = +1).
    fn bond_const(&self, k: usize) -> f64 {
        let f = &self.fact;
        let tb = self.tau_bar[k] as f64;
        -self.chi - self.chi * f.rho * tb - self.chi.sqrt() * self.eta[k] * (f.l0 + f.l1 * tb)
    }

    /// Open-chain reduction to per-site fields and per-bond couplings.
    pub fn to_ising(&self) -> Result<IsingChain> {
        self.check()?;
        if self.topology != ChainTopology::Open {
            return Err(CoreError::InvalidParameter(
                "site/bond reduction implemented for the open topology".into(),
            ));
        }
        let k = self.sites();
        let f = &self.fact;
        let mut fields = vec![0.0; k];
        let mut couplings = vec![0.0; k - 1];
        for b in 0..k - 1 {
            fields[b] += self.field_l0(b);
            fields[b + 1] += self.field_l1(b);
            couplings[b] = -self.chi * f.rho * self.tau_bar[b] as f64;
        }
        // boundary factor: l₀ part only, no neighbour
        fields[k - 1] += self.chi * f.l0 * f.l0 + self.chi.sqrt() * f.l0 * self.eta[k - 1];
        Ok(IsingChain { fields, couplings })
    }

    /// ln of the centered partition function 2^{-K} Tr_τ Π φ̂, where every
    /// factor is normalized to 1 at the planted configuration. This is the
    /// per-sample quantity whose disorder average gives ln 2 - I.
    pub fn ln_z_centered(&self) -> Result<f64> {
        self.check()?;
        let k = self.sites();
        match self.topology {
            ChainTopology::Open => {
                let ising = self.to_ising()?;
                let mut consts = 0.0;
                for b in 0..k - 1 {
                    consts += self.bond_const(b);
                }
                consts += -self.chi * self.fact.l0 * self.fact.l0
                    - self.chi.sqrt() * self.eta[k - 1] * self.fact.l0;
                Ok(ising.solve().ln_z + consts - k as f64 * std::f64::consts::LN_2)
            }
            ChainTopology::Ring => {
                // 2x2 transfer-matrix product with per-step renormalization
                let mut m = [[1.0f64, 0.0], [0.0, 1.0]];
                let mut log_scale = 0.0;
                let mut consts = 0.0;
                for b in 0..k {
                    let a = self.field_l0(b);
                    let c = self.field_l1(b);
                    let j = -self.chi * self.fact.rho * self.tau_bar[b] as f64;
                    consts += self.bond_const(b);
                    let spin = [1.0, -1.0];
                    let mut t = [[0.0f64; 2]; 2];
                    for (si, &s) in spin.iter().enumerate() {
                        for (ti, &u) in spin.iter().enumerate() {
                            t[si][ti] = (a * s + c * u + j * s * u - a.abs() - c.abs() - j.abs()).exp();
                        }
                    }
                    log_scale += a.abs() + c.abs() + j.abs();
                    let mut next = [[0.0f64; 2]; 2];
                    for r in 0..2 {
                        for cc in 0..2 {
                            next[r][cc] = m[r][0] * t[0][cc] + m[r][1] * t[1][cc];
                        }
                    }
                    let norm = next
                        .iter()
                        .flatten()
                        .fold(0.0f64, |acc, &x| acc.max(x.abs()));
                    for row in next.iter_mut() {
                        for x in row.iter_mut() {
                            *x /= norm;
                        }
                    }
                    log_scale += norm.ln();
                    m = next;
                }
                let trace = m[0][0] + m[1][1];
                Ok(trace.ln() + log_scale + consts - k as f64 * std::f64::consts::LN_2)
            }
        }
    }

    /// Exact BP solution (open topology); marginal fields are
    /// fields + forward + backward per site.
    pub fn solve(&self) -> Result<ChainSolution> {
        Ok(self.to_ising()?.solve())
    }
}

/// Exhaustive 2^K posterior marginals of an open random-field chain.
#[derive(Debug, Clone)]
pub struct ExactMarginals {
    pub magnetizations: Vec<f64>,
    pub pair_moments: Vec<f64>,
    pub ln_z_centered: f64,
}

/// Brute-force oracle for chains of K ≤ 16 sites.
pub fn exact_chain_marginals(
    chi: f64,
    rho: f64,
    tau_bar: &[i8],
    eta: &[f64],
) -> Result<ExactMarginals> {
    let k = eta.len();
    if k > 16 {
        return Err(CoreError::InvalidParameter(format!(
            "exhaustive enumeration limited to 16 sites, asked for {k}"
        )));
    }
    let fact = cholesky_chain(rho)?;
    let chain = RandomFieldChain {
        chi,
        fact,
        tau_bar,
        eta,
        topology: ChainTopology::Open,
    };
    chain.check()?;
    let ising = chain.to_ising()?;
    let mut z = 0.0;
    let mut mag = vec![0.0; k];
    let mut pair = vec![0.0; k - 1];
    let mut consts = 0.0;
    for b in 0..k - 1 {
        consts += chain.bond_const(b);
    }
    consts += -chi * fact.l0 * fact.l0 - chi.sqrt() * eta[k - 1] * fact.l0;
    for mask in 0..(1usize << k) {
        let spin = |i: usize| if mask >> i & 1 == 0 { 1.0 } else { -1.0 };
        let mut log_w = 0.0;
        for i in 0..k {
            log_w += ising.fields[i] * spin(i);
        }
        for b in 0..k - 1 {
            log_w += ising.couplings[b] * spin(b) * spin(b + 1);
        }
        let w = log_w.exp();
        z += w;
        for i in 0..k {
            mag[i] += w * spin(i);
        }
        for b in 0..k - 1 {
            pair[b] += w * spin(b) * spin(b + 1);
        }
    }
    for m in mag.iter_mut() {
        *m /= z;
    }
    for p in pair.iter_mut() {
        *p /= z;
    }
    Ok(ExactMarginals {
        magnetizations: mag,
        pair_moments: pair,
        ln_z_centered: z.ln() + consts - k as f64 * std::f64::consts::LN_2,
    })
}

/// Message direction of a cavity population.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
}

/// Equally-weighted sample representation of a stationary belief
/// distribution.
#[derive(Debug, Clone)]
pub struct CavityPopulation {
    pub samples: Vec<f64>,
    pub direction: Direction,
    pub chi: f64,
    pub rho: f64,
}

/// Population-dynamics solution of the stationary cavity equations.
///
/// Each sweep performs `pop_size` resampling updates per direction: pick a
/// random member, draw fresh (τ̄, η), apply the cavity update, overwrite a
/// random member. Convergence is declared when the Kolmogorov distance
/// between successive sweeps drops below max(0.01, 3/√pop_size) after a
/// short burn-in (the floor accounts for the resampling noise of finite
/// populations).
pub fn population_dynamics<R: Rng>(
    chi: f64,
    rho: f64,
    pop_size: usize,
    max_sweeps: usize,
    rng: &mut R,
) -> Result<(CavityPopulation, CavityPopulation)> {
    if pop_size < 1000 {
        return Err(CoreError::InvalidParameter(
            "population size below 10^3 is too noisy to converge".into(),
        ));
    }
    let fact = cholesky_chain(rho)?;
    let sqrt_chi = chi.sqrt();
    let mut plus = vec![0.0f64; pop_size];
    let mut minus: Vec<f64> = (0..pop_size)
        .map(|_| {
            let eta: f64 = StandardNormal.sample(rng);
            chi * fact.l0 * fact.l0 + sqrt_chi * fact.l0 * eta
        })
        .collect();
    let tol = 0.01f64.max(3.0 / (pop_size as f64).sqrt());
    let burn_in = 8usize;
    let mut trace = Vec::new();
    let mut prev_plus = sorted(&plus);
    let mut prev_minus = sorted(&minus);
    for sweep in 0..max_sweeps {
        for _ in 0..pop_size {
            let tb: i8 = if rng.gen_bool(0.5) { 1 } else { -1 };
            let eta: f64 = StandardNormal.sample(rng);
            let src = plus[rng.gen_range(0..pop_size)];
            plus[rng.gen_range(0..pop_size)] = forward_cavity(src, tb, eta, chi, &fact);

            let tb: i8 = if rng.gen_bool(0.5) { 1 } else { -1 };
            let eta: f64 = StandardNormal.sample(rng);
            let src = minus[rng.gen_range(0..pop_size)];
            minus[rng.gen_range(0..pop_size)] = backward_cavity(src, tb, eta, chi, &fact);
        }
        let cur_plus = sorted(&plus);
        let cur_minus = sorted(&minus);
        let d = kolmogorov_distance_sorted(&prev_plus, &cur_plus)
            .max(kolmogorov_distance_sorted(&prev_minus, &cur_minus));
        trace.push(d);
        prev_plus = cur_plus;
        prev_minus = cur_minus;
        if sweep >= burn_in && d < tol {
            return Ok((
                CavityPopulation {
                    samples: plus,
                    direction: Direction::Forward,
                    chi,
                    rho,
                },
                CavityPopulation {
                    samples: minus,
                    direction: Direction::Backward,
                    chi,
                    rho,
                },
            ));
        }
    }
    Err(CoreError::NoConvergence {
        iterations: max_sweeps,
        residual: *trace.last().unwrap_or(&f64::NAN),
        trace,
    })
}

fn sorted(v: &[f64]) -> Vec<f64> {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    s
}

/// Bit error rate from the two stationary populations:
/// P_b = E[(1 - sgn(h_→ + h_←))/2], evaluated exactly over the empirical
/// product measure (sgn(0) counts as half an error).
pub fn ber_from_populations(pi_plus: &CavityPopulation, pi_minus: &CavityPopulation) -> f64 {
    let minus = sorted(&pi_minus.samples);
    let n_minus = minus.len() as f64;
    let mut total = 0.0;
    for &h in &pi_plus.samples {
        let below = minus.partition_point(|&x| x < -h);
        let equal = minus.partition_point(|&x| x <= -h) - below;
        total += below as f64 + 0.5 * equal as f64;
    }
    total / (pi_plus.samples.len() as f64 * n_minus)
}

/// Direct finite-chain BER: sample open chains, solve them exactly by BP,
/// count marginal sign errors. Returns (ber, standard error across chains).
pub fn chain_ber_mc<R: Rng>(
    chi: f64,
    rho: f64,
    k: usize,
    n_chains: usize,
    rng: &mut R,
) -> Result<(f64, f64)> {
    let fact = cholesky_chain(rho)?;
    let mut per_chain = Vec::with_capacity(n_chains);
    let mut tau_bar = vec![0i8; k - 1];
    let mut eta = vec![0.0f64; k];
    for _ in 0..n_chains {
        for t in tau_bar.iter_mut() {
            *t = if rng.gen_bool(0.5) { 1 } else { -1 };
        }
        for e in eta.iter_mut() {
            *e = StandardNormal.sample(rng);
        }
        let chain = RandomFieldChain {
            chi,
            fact,
            tau_bar: &tau_bar,
            eta: &eta,
            topology: ChainTopology::Open,
        };
        let sol = chain.solve()?;
        let ising = chain.to_ising()?;
        let mut errs = 0.0;
        for i in 0..k {
            let field = ising.fields[i] + sol.forward[i] + sol.backward[i];
            if field < 0.0 {
                errs += 1.0;
            } else if field == 0.0 {
                errs += 0.5;
            }
        }
        per_chain.push(errs / k as f64);
    }
    let n = n_chains as f64;
    let mean = per_chain.iter().sum::<f64>() / n;
    let var = per_chain.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n * (n - 1.0));
    Ok((mean, var.sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::trial_rng;
    use crate::scalar::normal_cdf;

    #[test]
    fn factorization_identities() {
        // trivial endpoints
        let f = cholesky_chain(0.0).unwrap();
        assert_eq!((f.l0, f.l1), (1.0, 0.0));
        let f = cholesky_chain(0.5).unwrap();
        assert!((f.l0 - 0.5f64.sqrt()).abs() < 1e-15);
        assert!((f.l1 - 0.5f64.sqrt()).abs() < 1e-15);
        assert!(cholesky_chain(0.6).is_err());
        // identities on a grid
        for i in 0..=100 {
            let rho = -0.5 + i as f64 / 100.0;
            let f = cholesky_chain(rho).unwrap();
            assert!((f.l0 * f.l0 + f.l1 * f.l1 - 1.0).abs() < 1e-14);
            assert!((f.l0 * f.l1 - rho).abs() < 1e-14);
            assert!(f.l0 >= f.l1.abs());
        }
        // the derived ρ=0.2 values
        let f = cholesky_chain(0.2).unwrap();
        assert!((f.l0 - 0.978_906_290_690_897_9).abs() < 1e-12);
        assert!((f.l1 - 0.2 / 0.978_906_290_690_897_9).abs() < 1e-12);
    }

    #[test]
    fn bidiagonal_reconstruction() {
        // open chain: ΛΛᵀ = I + ρR everywhere except the (1,1) corner,
        // which is l₀² (semi-infinite factorization boundary)
        let rho = 0.3;
        let f = cholesky_chain(rho).unwrap();
        let k = 7;
        let mut lam = nalgebra::DMatrix::<f64>::zeros(k, k);
        for i in 0..k {
            lam[(i, i)] = f.l0;
            if i + 1 < k {
                lam[(i + 1, i)] = f.l1;
            }
        }
        let prod = &lam * lam.transpose();
        for i in 0..k {
            for j in 0..k {
                let want = if i == j {
                    if i == 0 { f.l0 * f.l0 } else { 1.0 }
                } else if i.abs_diff(j) == 1 {
                    rho
                } else {
                    0.0
                };
                assert!((prod[(i, j)] - want).abs() < 1e-12);
            }
        }
        // ring: the cyclic bidiagonal factorization is exact in every entry
        let mut lam = nalgebra::DMatrix::<f64>::zeros(k, k);
        for i in 0..k {
            lam[(i, i)] = f.l0;
            lam[((i + 1) % k, i)] = f.l1;
        }
        let prod = &lam * lam.transpose();
        for i in 0..k {
            for j in 0..k {
                let d = (i + k - j) % k;
                let want = if d == 0 {
                    1.0
                } else if d == 1 || d == k - 1 {
                    rho
                } else {
                    0.0
                };
                assert!((prod[(i, j)] - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn factor_weight_aligned_spins() {
        let f = cholesky_chain(0.25).unwrap();
        let (chi, eta) = (1.3, 0.7);
        for tb in [1i8, -1] {
            let w = factor_weight(1, 1, tb, eta, chi, &f);
            let expect = 0.5 * (chi.sqrt() * eta * (f.l0 + f.l1 * tb as f64)).exp();
            assert!((w - expect).abs() < 1e-14);
        }
    }

    /// Direct two-spin trace evaluation of the forward message.
    fn forward_by_trace(h_in: f64, tb: i8, eta: f64, chi: f64, f: &ChainFactorization) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for tau in [1i8, -1] {
            for tau1 in [1i8, -1] {
                let w = factor_weight(tau, tau1, tb, eta, chi, f) * (h_in * tau as f64).exp();
                num += w * tau1 as f64;
                den += w;
            }
        }
        (num / den).atanh()
    }

    fn backward_by_trace(h_in: f64, tb: i8, eta: f64, chi: f64, f: &ChainFactorization) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for tau in [1i8, -1] {
            for tau1 in [1i8, -1] {
                let w = factor_weight(tau, tau1, tb, eta, chi, f) * (h_in * tau1 as f64).exp();
                num += w * tau as f64;
                den += w;
            }
        }
        (num / den).atanh()
    }

    #[test]
    fn cavity_closed_forms_match_trace() {
        let mut rng = trial_rng(21, 0);
        for _ in 0..100 {
            let rho = rng.gen_range(-0.49..0.49);
            let f = cholesky_chain(rho).unwrap();
            let chi = rng.gen_range(0.05..4.0);
            let h = rng.gen_range(-3.0..3.0);
            let tb: i8 = if rng.gen_bool(0.5) { 1 } else { -1 };
            let eta: f64 = rng.gen_range(-2.5..2.5);
            let closed = forward_cavity(h, tb, eta, chi, &f);
            let direct = forward_by_trace(h, tb, eta, chi, &f);
            assert!(
                (closed - direct).abs() < 1e-12,
                "forward rho={rho} chi={chi}: {closed} vs {direct}"
            );
            let closed = backward_cavity(h, tb, eta, chi, &f);
            let direct = backward_by_trace(h, tb, eta, chi, &f);
            assert!(
                (closed - direct).abs() < 1e-12,
                "backward rho={rho} chi={chi}: {closed} vs {direct}"
            );
        }
    }

    #[test]
    fn forward_decouples_at_zero_correlation() {
        let f = cholesky_chain(0.0).unwrap();
        for h in [-2.0, 0.0, 3.0] {
            // no dependence on the incoming message, and the outgoing
            // message is identically zero
            assert_eq!(forward_cavity(h, 1, 0.8, 1.5, &f), 0.0);
            let b = backward_cavity(h, -1, 0.8, 1.5, &f);
            assert!((b - (1.5 + 1.5f64.sqrt() * 0.8)).abs() < 1e-14);
        }
    }

    #[test]
    fn disorder_negation_is_a_distributional_symmetry() {
        // the closed form is not pointwise invariant under
        // (τ̄, η) → (-τ̄, -η); check the distributional statement instead:
        // pushing a symmetric message ensemble through mirrored disorder
        // gives the same law.
        let f = cholesky_chain(0.3).unwrap();
        let chi = 1.2;
        let mut rng = trial_rng(23, 0);
        let inputs: Vec<f64> = (0..20000).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let mut out = Vec::new();
        let mut out_mirror = Vec::new();
        for &h in &inputs {
            let tb: i8 = if rng.gen_bool(0.5) { 1 } else { -1 };
            let eta: f64 = StandardNormal.sample(&mut rng);
            out.push(forward_cavity(h, tb, eta, chi, &f));
            out_mirror.push(forward_cavity(h, -tb, -eta, chi, &f));
        }
        out.sort_by(f64::total_cmp);
        out_mirror.sort_by(f64::total_cmp);
        let d = kolmogorov_distance_sorted(&out, &out_mirror);
        assert!(d < 0.02, "Kolmogorov distance under disorder negation: {d}");
    }

    #[test]
    fn bp_is_exact_on_chains() {
        let mut rng = trial_rng(25, 0);
        for trial in 0..100 {
            let k = rng.gen_range(2..=12);
            let rho = rng.gen_range(-0.45..0.45);
            let chi = rng.gen_range(0.1..3.0);
            let fact = cholesky_chain(rho).unwrap();
            let tau_bar: Vec<i8> = (0..k - 1)
                .map(|_| if rng.gen_bool(0.5) { 1 } else { -1 })
                .collect();
            let eta: Vec<f64> = (0..k).map(|_| StandardNormal.sample(&mut rng)).collect();
            let chain = RandomFieldChain {
                chi,
                fact,
                tau_bar: &tau_bar,
                eta: &eta,
                topology: ChainTopology::Open,
            };
            let bp = chain.solve().unwrap();
            let exact = exact_chain_marginals(chi, rho, &tau_bar, &eta).unwrap();
            for i in 0..k {
                assert!(
                    (bp.magnetizations[i] - exact.magnetizations[i]).abs() < 1e-10,
                    "trial {trial} site {i}"
                );
            }
            for b in 0..k - 1 {
                assert!((bp.pair_moments[b] - exact.pair_moments[b]).abs() < 1e-10);
            }
            let lnz = chain.ln_z_centered().unwrap();
            assert!((lnz - exact.ln_z_centered).abs() < 1e-10);
        }
    }

    #[test]
    fn gauge_invariance_small_chain() {
        // partition function in the original b-variables with planted signal
        // b̄ equals the gauged τ-representation, K = 3
        let mut rng = trial_rng(27, 0);
        let k = 3;
        let rho = 0.3;
        let chi = 0.9;
        let fact = cholesky_chain(rho).unwrap();
        for _ in 0..20 {
            let b_bar: Vec<f64> = (0..k)
                .map(|_| if rng.gen_bool(0.5) { 1.0 } else { -1.0 })
                .collect();
            let z: Vec<f64> = (0..k).map(|_| StandardNormal.sample(&mut rng)).collect();
            // gauged disorder: τ̄_b = b̄_b b̄_{b+1}, η_b = z_b b̄_b
            let tau_bar: Vec<i8> = (0..k - 1)
                .map(|b| (b_bar[b] * b_bar[b + 1]) as i8)
                .collect();
            let eta: Vec<f64> = (0..k).map(|b| z[b] * b_bar[b]).collect();
            let gauged = exact_chain_marginals(chi, rho, &tau_bar, &eta)
                .unwrap()
                .ln_z_centered;

            // ungauged enumeration over b with mixing rows l0 b_i + l1 b_{i+1},
            // each factor normalized to 1 at b = b̄
            let mix = |v: &[f64], row: usize| {
                fact.l0 * v[row] + if row + 1 < k { fact.l1 * v[row + 1] } else { 0.0 }
            };
            let mut z_sum = 0.0;
            for mask in 0..(1usize << k) {
                let b: Vec<f64> = (0..k)
                    .map(|i| if mask >> i & 1 == 0 { 1.0 } else { -1.0 })
                    .collect();
                let mut log_w = 0.0;
                for row in 0..k {
                    // observation is mix(b̄) + z/√χ
                    let resid = mix(&b_bar, row) + z[row] / chi.sqrt() - mix(&b, row);
                    log_w += -(chi / 2.0) * resid * resid + 0.5 * z[row] * z[row];
                }
                z_sum += log_w.exp();
            }
            let ungauged = (z_sum / (1 << k) as f64).ln();
            assert!(
                (gauged - ungauged).abs() < 1e-12,
                "gauge mismatch: {gauged} vs {ungauged}"
            );
        }
    }

    #[test]
    fn population_dynamics_uncoupled_limit() {
        let mut rng = trial_rng(29, 0);
        let chi = 1.8;
        let (pi_p, pi_m) = population_dynamics(chi, 0.0, 20_000, 100, &mut rng).unwrap();
        // forward population collapses to zero, backward is N(χ, χ)
        assert!(pi_p.samples.iter().all(|&h| h == 0.0));
        let ber = ber_from_populations(&pi_p, &pi_m);
        let expect = normal_cdf(-chi.sqrt());
        assert!(
            (ber - expect).abs() < 5e-3,
            "uncoupled BER {ber} vs Φ(-√χ) = {expect}"
        );
    }

    #[test]
    fn population_dynamics_is_deterministic() {
        let run = || {
            let mut rng = trial_rng(31, 0);
            population_dynamics(1.0, 0.2, 2_000, 60, &mut rng)
                .unwrap()
                .0
                .samples
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn population_ber_matches_finite_chain() {
        let mut rng = trial_rng(33, 0);
        let (chi, rho) = (1.0, 0.05);
        let (pi_p, pi_m) = population_dynamics(chi, rho, 50_000, 150, &mut rng).unwrap();
        let pd = ber_from_populations(&pi_p, &pi_m);
        let (mc, se) = chain_ber_mc(chi, rho, 1000, 400, &mut rng).unwrap();
        assert!(
            (pd - mc).abs() < 3.0 * se.max(2e-3),
            "population {pd} vs chain MC {mc} ± {se}"
        );
    }

    #[test]
    fn ber_edge_cases() {
        let mk = |v: Vec<f64>, d| CavityPopulation {
            samples: v,
            direction: d,
            chi: 1.0,
            rho: 0.1,
        };
        let plus = mk(vec![0.5, 1.0, 2.0], Direction::Forward);
        let minus = mk(vec![0.1, 0.2, 0.3], Direction::Backward);
        assert_eq!(ber_from_populations(&plus, &minus), 0.0);
        // exactly symmetric independent populations → 1/2
        let plus = mk(vec![-1.0, 1.0, -2.0, 2.0], Direction::Forward);
        let minus = mk(vec![-0.4, 0.4], Direction::Backward);
        assert!((ber_from_populations(&plus, &minus) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn population_ber_nonincreasing_in_chi() {
        let mut prev = f64::INFINITY;
        for (i, chi) in [0.5, 1.0, 2.0, 4.0].into_iter().enumerate() {
            let mut rng = trial_rng(35, i as u64);
            let (p, m) = population_dynamics(chi, 0.2, 20_000, 120, &mut rng).unwrap();
            let ber = ber_from_populations(&p, &m);
            assert!(
                ber <= prev + 3e-3,
                "BER should not increase with χ: {prev} -> {ber}"
            );
            prev = ber;
        }
    }
}
