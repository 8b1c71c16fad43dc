//! Numerical laboratory for correlated (Kronecker-type) MIMO channels:
//! channel sampling, mutual-information evaluation by matrix-integration
//! and by exact random-field Ising-chain analysis, small-correlation
//! expansions, cavity/population-dynamics error-rate predictions, and an
//! iterative O(K) demodulator.

pub mod channel;
pub mod demod;
pub mod error;
pub mod ising;
pub mod perturbation;
pub mod quad;
pub mod replica;
pub mod rng;
pub mod scalar;
pub mod spectrum;

pub use channel::{
    matrix_sqrt, random_bpsk, sample_xi_complex, sample_xi_real, ChannelInstance, ChannelModel,
    ComplexChannelInstance, Constellation, CorrelationForm, CorrelationMatrix, FieldKind,
    PreparedModel,
};
pub use demod::{
    demod_init, map_oracle, DemodOptions, DemodResult, DemodState, Demodulator, IterationRecord,
};
pub use error::{CoreError, Result};
pub use ising::{
    atanh_tanh_tanh, backward_cavity, ber_from_populations, chain_ber_mc, cholesky_chain,
    exact_chain_marginals, factor_weight, forward_cavity, population_dynamics, CavityPopulation,
    ChainFactorization, ChainSolution, ChainTopology, Direction, IsingChain, RandomFieldChain,
};
pub use perturbation::{
    discrepancy, expand_exact, expand_matrix_integration, ExpansionCoefficients, ExpansionMethod,
    MatrixStats,
};
pub use replica::{
    chain_effective_fixed_point, chain_replica_ber, chain_variance_mc, conditional_entropy,
    effective_precision, mi_exact_chain_mc, mi_exact_chain_quadrature, mi_matrix_integration,
    mi_transmitter_matrix_integration, orthogonal_effective_fixed_point, orthogonal_replica_ber,
    EffectiveFixedPoint, MiMethod, MiResult,
};
pub use rng::trial_rng;
pub use scalar::{
    bpsk_error_rate, c_complex, c_hat, mi_identity, mi_identity_deriv, mi_identity_second_deriv,
    mi_scalar_bpsk, mi_scalar_bpsk_deriv, mi_scalar_bpsk_half_gaussian_term,
    mi_scalar_bpsk_second_deriv, normal_cdf,
};
pub use spectrum::{arcsine_cdf, marchenko_pastur_cdf, ChainSize, Ensemble, Spectrum};
