//! Correlated MIMO channel construction and sampling.
//!
//! The channel is H = √R_r Ξ √R_t with Ξ i.i.d. Gaussian of per-entry
//! variance 1/L, R_r / R_t the receive/transmit correlation matrices, and
//! r = H b + σ η. Real (BPSK) and complex (QPSK) variants share the
//! correlation machinery; correlation matrices themselves are real
//! symmetric PSD in all the models treated here.

use std::sync::Arc;

use nalgebra::{Complex, DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{CoreError, Result};
use crate::spectrum::Spectrum;

pub type C64 = Complex<f64>;

/// Real or complex signalling.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldKind {
    Real,
    Complex,
}

/// Unit-power symbol constellations with uniform priors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Constellation {
    Bpsk,
    Qpsk,
}

impl Constellation {
    pub fn field_kind(self) -> FieldKind {
        match self {
            Constellation::Bpsk => FieldKind::Real,
            Constellation::Qpsk => FieldKind::Complex,
        }
    }

    /// Number of constellation points.
    pub fn size(self) -> usize {
        match self {
            Constellation::Bpsk => 2,
            Constellation::Qpsk => 4,
        }
    }

    /// Prior entropy ln|B| in nats.
    pub fn prior_entropy(self) -> f64 {
        (self.size() as f64).ln()
    }

    pub fn symbols_complex(self) -> Vec<C64> {
        match self {
            Constellation::Bpsk => vec![C64::new(1.0, 0.0), C64::new(-1.0, 0.0)],
            Constellation::Qpsk => {
                let c = 0.5f64.sqrt();
                vec![
                    C64::new(c, c),
                    C64::new(c, -c),
                    C64::new(-c, c),
                    C64::new(-c, -c),
                ]
            }
        }
    }

    /// Mean symbol power; exactly 1 for both constellations.
    pub fn mean_power(self) -> f64 {
        let syms = self.symbols_complex();
        syms.iter().map(|s| s.norm_sqr()).sum::<f64>() / syms.len() as f64
    }
}

/// Structure of a correlation matrix.
#[derive(Debug, Clone)]
pub enum CorrelationForm {
    Identity,
    /// Unit diagonal, `rho` on the first off-diagonals.
    Tridiagonal { rho: f64 },
    /// Arbitrary symmetric PSD matrix.
    Dense(DMatrix<f64>),
}

/// Symmetric PSD correlation matrix, validated at construction.
#[derive(Debug, Clone)]
pub struct CorrelationMatrix {
    dim: usize,
    form: CorrelationForm,
}

const PSD_TOL: f64 = 1e-10;

impl CorrelationMatrix {
    pub fn identity(dim: usize) -> Self {
        CorrelationMatrix {
            dim,
            form: CorrelationForm::Identity,
        }
    }

    /// Nearest-neighbour correlation I + ρR. |ρ| ≤ 1/2 keeps the matrix PSD
    /// at every dimension (smallest eigenvalue 1 - 2|ρ|cos(π/(dim+1)) > 0).
    pub fn tridiagonal(dim: usize, rho: f64) -> Result<Self> {
        if dim == 0 {
            return Err(CoreError::InvalidParameter("dimension must be >= 1".into()));
        }
        if !(rho.abs() <= 0.5) {
            return Err(CoreError::InvalidParameter(format!(
                "|rho| = {} > 1/2 violates positive semidefiniteness",
                rho.abs()
            )));
        }
        Ok(CorrelationMatrix {
            dim,
            form: CorrelationForm::Tridiagonal { rho },
        })
    }

    /// Dense symmetric matrix; rejected if any eigenvalue is negative beyond
    /// tolerance.
    pub fn dense(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(CoreError::DimensionMismatch(format!(
                "correlation matrix must be square, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        let asym = (&m - m.transpose()).abs().max();
        if asym > 1e-12 * m.abs().max().max(1.0) {
            return Err(CoreError::InvalidParameter(
                "correlation matrix must be symmetric".into(),
            ));
        }
        let eig = m.clone().symmetric_eigen();
        let max_ev = eig.eigenvalues.iter().cloned().fold(f64::MIN, f64::max);
        let min_ev = eig.eigenvalues.iter().cloned().fold(f64::MAX, f64::min);
        if min_ev < -PSD_TOL * max_ev.abs().max(1.0) {
            return Err(CoreError::InvalidParameter(format!(
                "negative eigenvalue {min_ev} beyond tolerance"
            )));
        }
        let dim = m.nrows();
        Ok(CorrelationMatrix {
            dim,
            form: CorrelationForm::Dense(m),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn form(&self) -> &CorrelationForm {
        &self.form
    }

    pub fn is_identity(&self) -> bool {
        matches!(self.form, CorrelationForm::Identity)
    }

    pub fn trace(&self) -> f64 {
        match &self.form {
            CorrelationForm::Identity | CorrelationForm::Tridiagonal { .. } => self.dim as f64,
            CorrelationForm::Dense(m) => m.trace(),
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        match &self.form {
            CorrelationForm::Identity => DMatrix::identity(self.dim, self.dim),
            CorrelationForm::Tridiagonal { rho } => {
                let mut m = DMatrix::identity(self.dim, self.dim);
                for i in 0..self.dim - 1 {
                    m[(i, i + 1)] = *rho;
                    m[(i + 1, i)] = *rho;
                }
                m
            }
            CorrelationForm::Dense(m) => m.clone(),
        }
    }

    /// Empirical eigenvalue spectrum.
    pub fn spectrum(&self) -> Result<Spectrum> {
        match &self.form {
            CorrelationForm::Identity => Ok(Spectrum::delta(1.0)),
            CorrelationForm::Tridiagonal { rho } => Spectrum::tridiagonal_chain(
                *rho,
                crate::spectrum::ChainSize::Finite(self.dim),
            ),
            CorrelationForm::Dense(m) => {
                let eig = m.clone().symmetric_eigen();
                Spectrum::empirical(eig.eigenvalues.iter().cloned().collect())
            }
        }
    }

    /// Symmetric PSD square root S with S·S = C. Eigendecomposition keeps S
    /// symmetric; the tridiagonal form uses its exact sine eigenbasis.
    pub fn sqrt_matrix(&self) -> DMatrix<f64> {
        match &self.form {
            CorrelationForm::Identity => DMatrix::identity(self.dim, self.dim),
            CorrelationForm::Tridiagonal { rho } => {
                let k = self.dim;
                let kp1 = (k + 1) as f64;
                let norm = (2.0 / kp1).sqrt();
                let mut v = DMatrix::zeros(k, k);
                for j in 0..k {
                    for i in 0..k {
                        v[(i, j)] = norm
                            * (std::f64::consts::PI * (i as f64 + 1.0) * (j as f64 + 1.0) / kp1)
                                .sin();
                    }
                }
                let mut d = DMatrix::zeros(k, k);
                for j in 0..k {
                    let ev = 1.0 + 2.0 * rho * (std::f64::consts::PI * (j as f64 + 1.0) / kp1).cos();
                    d[(j, j)] = ev.max(0.0).sqrt();
                }
                &v * d * v.transpose()
            }
            CorrelationForm::Dense(m) => {
                let eig = m.clone().symmetric_eigen();
                let mut d = DMatrix::zeros(self.dim, self.dim);
                for j in 0..self.dim {
                    d[(j, j)] = eig.eigenvalues[j].max(0.0).sqrt();
                }
                &eig.eigenvectors * d * eig.eigenvectors.transpose()
            }
        }
    }

    /// Lower Cholesky factor (for the chain factorization cross-checks).
    pub fn cholesky(&self) -> Result<DMatrix<f64>> {
        nalgebra::Cholesky::new(self.to_dense())
            .map(|c| c.l())
            .ok_or_else(|| CoreError::InvalidParameter("matrix not positive definite".into()))
    }

    /// y = C x without materializing the dense form.
    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        match &self.form {
            CorrelationForm::Identity => x.clone(),
            CorrelationForm::Tridiagonal { rho } => {
                let n = x.len();
                let mut y = x.clone();
                for i in 0..n {
                    if i > 0 {
                        y[i] += rho * x[i - 1];
                    }
                    if i + 1 < n {
                        y[i] += rho * x[i + 1];
                    }
                }
                y
            }
            CorrelationForm::Dense(m) => m * x,
        }
    }
}

/// Symmetric PSD square root of a correlation matrix (S·S = C).
pub fn matrix_sqrt(c: &CorrelationMatrix) -> DMatrix<f64> {
    c.sqrt_matrix()
}

/// i.i.d. real Gaussian L×K matrix with entry variance 1/L.
pub fn sample_xi_real<R: Rng>(l: usize, k: usize, rng: &mut R) -> Result<DMatrix<f64>> {
    if l == 0 || k == 0 {
        return Err(CoreError::InvalidParameter(
            "matrix dimensions must be >= 1".into(),
        ));
    }
    let sd = (1.0 / l as f64).sqrt();
    Ok(DMatrix::from_fn(l, k, |_, _| {
        let z: f64 = StandardNormal.sample(rng);
        sd * z
    }))
}

/// i.i.d. complex Gaussian L×K matrix with E|Ξ_lk|² = 1/L
/// (variance 1/(2L) per real component).
pub fn sample_xi_complex<R: Rng>(l: usize, k: usize, rng: &mut R) -> Result<DMatrix<C64>> {
    if l == 0 || k == 0 {
        return Err(CoreError::InvalidParameter(
            "matrix dimensions must be >= 1".into(),
        ));
    }
    let sd = (0.5 / l as f64).sqrt();
    Ok(DMatrix::from_fn(l, k, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        C64::new(sd * re, sd * im)
    }))
}

/// Channel ensemble description: dimensions, correlations, signalling.
#[derive(Debug, Clone)]
pub struct ChannelModel {
    pub k: usize,
    pub l: usize,
    pub rr: CorrelationMatrix,
    pub rt: CorrelationMatrix,
    pub constellation: Constellation,
}

impl ChannelModel {
    pub fn new(
        k: usize,
        l: usize,
        rr: CorrelationMatrix,
        rt: CorrelationMatrix,
        constellation: Constellation,
    ) -> Result<Self> {
        if rr.dim() != l {
            return Err(CoreError::DimensionMismatch(format!(
                "receive correlation is {}-dimensional but L = {l}",
                rr.dim()
            )));
        }
        if rt.dim() != k {
            return Err(CoreError::DimensionMismatch(format!(
                "transmit correlation is {}-dimensional but K = {k}",
                rt.dim()
            )));
        }
        Ok(ChannelModel {
            k,
            l,
            rr,
            rt,
            constellation,
        })
    }

    pub fn beta(&self) -> f64 {
        self.k as f64 / self.l as f64
    }

    /// Expected signal power per receive dimension, E|Hb|²/L. Exact:
    /// β · (tr R_r / L) · (tr R_t / K).
    pub fn signal_power_per_rx_dim(&self) -> f64 {
        self.beta() * (self.rr.trace() / self.l as f64) * (self.rt.trace() / self.k as f64)
    }

    /// Noise power for a target SNR in dB, with SNR defined as signal power
    /// per receive dimension over σ². The convention travels with every
    /// result row so curves are self-describing.
    pub fn snr_to_sigma2(&self, snr_db: f64) -> f64 {
        self.signal_power_per_rx_dim() * 10f64.powf(-snr_db / 10.0)
    }

    /// Precompute the correlation square roots shared by all trials.
    pub fn prepare(&self) -> PreparedModel {
        let rr_sqrt = if self.rr.is_identity() {
            None
        } else {
            Some(Arc::new(self.rr.sqrt_matrix()))
        };
        let rt_sqrt = if self.rt.is_identity() {
            None
        } else {
            Some(Arc::new(self.rt.sqrt_matrix()))
        };
        PreparedModel {
            model: self.clone(),
            rr_sqrt,
            rt_sqrt,
        }
    }
}

/// A channel model with its correlation square roots materialized.
#[derive(Debug, Clone)]
pub struct PreparedModel {
    pub model: ChannelModel,
    rr_sqrt: Option<Arc<DMatrix<f64>>>,
    rt_sqrt: Option<Arc<DMatrix<f64>>>,
}

impl PreparedModel {
    /// Draw a real channel instance at the given noise power.
    pub fn sample_real<R: Rng>(&self, sigma2: f64, rng: &mut R) -> Result<ChannelInstance> {
        if sigma2 < 0.0 {
            return Err(CoreError::InvalidParameter("noise power must be >= 0".into()));
        }
        let xi = sample_xi_real(self.model.l, self.model.k, rng)?;
        Ok(ChannelInstance {
            k: self.model.k,
            l: self.model.l,
            sigma2,
            beta: self.model.beta(),
            xi,
            rr_sqrt: self.rr_sqrt.clone(),
            rt_sqrt: self.rt_sqrt.clone(),
        })
    }
}

/// One sampled real channel (H, Ξ, σ). H is kept in factored form; the
/// dense matrix is materialized only on request.
#[derive(Debug, Clone)]
pub struct ChannelInstance {
    pub k: usize,
    pub l: usize,
    pub sigma2: f64,
    pub beta: f64,
    xi: DMatrix<f64>,
    rr_sqrt: Option<Arc<DMatrix<f64>>>,
    rt_sqrt: Option<Arc<DMatrix<f64>>>,
}

impl ChannelInstance {
    pub fn xi(&self) -> &DMatrix<f64> {
        &self.xi
    }

    /// Dense H = √R_r Ξ √R_t.
    pub fn h_matrix(&self) -> DMatrix<f64> {
        let mut h = self.xi.clone();
        if let Some(s) = &self.rt_sqrt {
            h = &h * s.as_ref();
        }
        if let Some(s) = &self.rr_sqrt {
            h = s.as_ref() * h;
        }
        h
    }

    /// H v.
    pub fn apply_h(&self, v: &DVector<f64>) -> DVector<f64> {
        let v = match &self.rt_sqrt {
            Some(s) => s.as_ref() * v,
            None => v.clone(),
        };
        let v = &self.xi * v;
        match &self.rr_sqrt {
            Some(s) => s.as_ref() * v,
            None => v,
        }
    }

    /// Hᵀ v.
    pub fn apply_ht(&self, v: &DVector<f64>) -> DVector<f64> {
        let v = match &self.rr_sqrt {
            Some(s) => s.as_ref() * v,
            None => v.clone(),
        };
        let v = self.xi.tr_mul(&v);
        match &self.rt_sqrt {
            Some(s) => s.as_ref() * v,
            None => v,
        }
    }

    /// HᵀH v.
    pub fn apply_hth(&self, v: &DVector<f64>) -> DVector<f64> {
        self.apply_ht(&self.apply_h(v))
    }

    /// r = H b + σ η with η standard normal per component.
    pub fn transmit<R: Rng>(&self, b: &DVector<f64>, rng: &mut R) -> Result<DVector<f64>> {
        if b.len() != self.k {
            return Err(CoreError::DimensionMismatch(format!(
                "symbol vector has length {} but K = {}",
                b.len(),
                self.k
            )));
        }
        let mut r = self.apply_h(b);
        let sigma = self.sigma2.sqrt();
        for x in r.iter_mut() {
            let z: f64 = StandardNormal.sample(rng);
            *x += sigma * z;
        }
        Ok(r)
    }
}

/// Complex channel instance (used by the complex-signalling checks; the
/// demodulator itself operates on the real model).
#[derive(Debug, Clone)]
pub struct ComplexChannelInstance {
    pub k: usize,
    pub l: usize,
    pub sigma2: f64,
    pub beta: f64,
    xi: DMatrix<C64>,
    rr_sqrt: Option<Arc<DMatrix<f64>>>,
    rt_sqrt: Option<Arc<DMatrix<f64>>>,
}

impl ComplexChannelInstance {
    pub fn sample<R: Rng>(model: &PreparedModel, sigma2: f64, rng: &mut R) -> Result<Self> {
        let xi = sample_xi_complex(model.model.l, model.model.k, rng)?;
        Ok(ComplexChannelInstance {
            k: model.model.k,
            l: model.model.l,
            sigma2,
            beta: model.model.beta(),
            xi,
            rr_sqrt: model.rr_sqrt.clone(),
            rt_sqrt: model.rt_sqrt.clone(),
        })
    }

    pub fn h_matrix(&self) -> DMatrix<C64> {
        let complexify = |m: &DMatrix<f64>| m.map(|x| C64::new(x, 0.0));
        let mut h = self.xi.clone();
        if let Some(s) = &self.rt_sqrt {
            h = &h * complexify(s);
        }
        if let Some(s) = &self.rr_sqrt {
            h = complexify(s) * h;
        }
        h
    }

    /// r = H b + σ η with η unit complex Gaussian per component
    /// (variance 1/2 per real part).
    pub fn transmit<R: Rng>(&self, b: &DVector<C64>, rng: &mut R) -> Result<DVector<C64>> {
        if b.len() != self.k {
            return Err(CoreError::DimensionMismatch(format!(
                "symbol vector has length {} but K = {}",
                b.len(),
                self.k
            )));
        }
        let mut r = self.h_matrix() * b;
        let part_sd = (self.sigma2 * 0.5).sqrt();
        for x in r.iter_mut() {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            *x += C64::new(part_sd * re, part_sd * im);
        }
        Ok(r)
    }
}

/// Draw a uniform BPSK vector.
pub fn random_bpsk<R: Rng>(k: usize, rng: &mut R) -> DVector<f64> {
    DVector::from_fn(k, |_, _| if rng.gen_bool(0.5) { 1.0 } else { -1.0 })
}
