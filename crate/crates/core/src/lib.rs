//! Capacity bounds for two-way binary noiseless channels in which every
//! transmitted "1" carries one energy unit from the sender to the receiver.
//!
//! The total number of units `U` in the system is fixed. The energy state is
//! the number of units held by node 1 (node 2 holds the rest), and it evolves
//! as a birth-death Markov chain once the nodes fix their signalling
//! probabilities. On top of that chain the crate provides:
//!
//! * [`inner`]: achievable rates of independently generated, state-multiplexed
//!   codebooks and a multi-start optimizer over the per-level probabilities;
//! * [`outer`]: the converse bound over correlated per-state symbol
//!   distributions, and its maximization;
//! * [`protocol`]: executable strategies, from the single-unit schemes to a
//!   Monte Carlo simulation of the random-coding construction;
//! * [`sweep`]: the conventional / optimized / outer sum-rate table.
//!
//! All probability math is generic over [`Scalar`] (`f32` or `f64`); the
//! `*F64` aliases below cover the common case.

pub mod chain;
pub mod entropy;
pub mod error;
pub mod inner;
pub mod outer;
pub mod protocol;
pub mod scalar;
pub mod search;
pub mod sweep;

pub use chain::{
    build_kernel, occupancy_clt_std, simulate_chain, stationary, EnergyBudget, MarginalPolicy,
    StatePolicy, StationaryDistribution, TransitionKernel,
};
pub use entropy::{
    binary_entropy, joint_entropy, joint_from_marginals, marginals_and_conditionals,
    BernoulliParam, Conditional, JointSymbolDist, MarginalsAndConditionals,
};
pub use error::{Error, Result};
pub use inner::{optimize_sum_rate, rates_for_policy, region_sweep, OptimizationResult, RatePair};
pub use outer::{
    optimize_outer_sum, optimize_outer_sum_seeded, optimize_outer_weighted, outer_values,
    JointStatePolicy, OuterBoundValues, OuterOptimum,
};
pub use scalar::Scalar;
pub use search::SearchConfig;
pub use sweep::{sweep, sweep_row, SweepRow};

pub type BernoulliParamF64 = BernoulliParam<f64>;
pub type JointSymbolDistF64 = JointSymbolDist<f64>;
pub type MarginalPolicyF64 = MarginalPolicy<f64>;
pub type JointStatePolicyF64 = JointStatePolicy<f64>;
pub type TransitionKernelF64 = TransitionKernel<f64>;
pub type StationaryDistributionF64 = StationaryDistribution<f64>;
pub type RatePairF64 = RatePair<f64>;
pub type OptimizationResultF64 = OptimizationResult<f64>;
pub type OuterBoundValuesF64 = OuterBoundValues<f64>;

pub type MarginalPolicyF32 = MarginalPolicy<f32>;
pub type JointStatePolicyF32 = JointStatePolicy<f32>;
