//! Fairness-aware linear bandits: FairLinBandit and the tooling to measure
//! Nash, p-mean and average regret.
//!
//! The math modules are generic over the scalar type through [`Real`]
//! (implemented for `f32` and `f64`). The `F64`-suffixed aliases below name
//! the `f64` instantiations used by the experiment harness and CLI.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod design;
pub mod geometry;
pub mod harness;
pub mod instances;
pub mod lp;
pub mod metrics;
pub mod numerics;
pub mod policies;
pub mod real;

pub use design::{d_optimal_design, g_value, round_robin_schedule, DesignOptions, DesignWeights};
pub use geometry::{chebyshev_center, john_distribution, JohnDistribution};
pub use instances::{make_synthetic_instance, ArmSet, BanditInstance, InstanceDoc};
pub use metrics::{nash_regret, p_regret, ExpectedRewardTrace, RegretReport};
pub use numerics::{Cholesky, SymMatrix};
pub use policies::{
    run_fair_lin_bandit, run_plain_lin_ucb_baseline, BanditConfig, FairLinBandit, Phase2Policy,
    RunTrace,
};
pub use real::Real;

pub type SymMatrixF64 = SymMatrix<f64>;
pub type ArmSetF64 = ArmSet<f64>;
pub type BanditInstanceF64 = BanditInstance<f64>;
pub type DesignWeightsF64 = DesignWeights<f64>;
pub type JohnDistributionF64 = JohnDistribution<f64>;
pub type BanditConfigF64 = BanditConfig<f64>;
pub type FairLinBanditF64 = FairLinBandit<f64>;
pub type RunTraceF64 = RunTrace<f64>;
pub type ExpectedRewardTraceF64 = ExpectedRewardTrace<f64>;
pub type RegretReportF64 = RegretReport<f64>;
