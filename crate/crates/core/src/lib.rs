//! Average-cost reinforcement learning in finite unichain MDPs.
//!
//! The crate implements exploration-enhanced Politex (EE-Politex): policy
//! iteration where each phase plays a Boltzmann policy over the sum of all
//! past action-value estimates, with value estimates fitted by
//! least-squares Monte-Carlo (LSMC) from on-policy rollouts whose start
//! states are re-randomised by short segments of a fixed exploration policy.
//!
//! Around the learner sit exact solvers used as ground truth
//! ([`exact`]), feature maps ([`features`]), estimators ([`estimation`]),
//! benchmark environments ([`envs`]) and a regret harness ([`harness`]).
//!
//! ```no_run
//! use politex_lab::prelude::*;
//!
//! let env: EnvSpec = "deepsea:N=4".parse().unwrap();
//! let env = env.build().unwrap();
//! let opt = optimal_average_cost_policy(&env.mdp).unwrap();
//! println!("optimal average reward {}", -opt.lambda);
//! ```

// `!(x >= 0.0)` is deliberate: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod agents;
pub mod envs;
pub mod error;
pub mod estimation;
pub mod exact;
pub mod features;
pub mod harness;
pub mod linalg;
pub mod mdp;
pub mod rng;

pub use error::{Error, Result};

/// The names most programs need.
pub mod prelude {
    pub use crate::agents::{
        boltzmann_policy, collect_data, make_schedule, run_agent, run_ee_politex, run_politex_lspe,
        run_politex_no_explore, run_rlsvi_baseline, AgentConfig, AgentKind, RunOutput, Schedule,
    };
    pub use crate::envs::{deepsea, random_unichain, two_state_chain, DeepSeaSpec, EnvSpec, Environment, RandomMdpSpec};
    pub use crate::estimation::{
        clip_estimate, lsmc_fit, lsmc_fit_batch, lspe_fit, lstd_fit, regression_rows, regression_targets,
        LambdaEstimator, QEstimate, Ridge, RolloutBatch, VisitMode,
    };
    pub use crate::exact::{
        average_cost, exact_values, gain, mixing_coefficient, optimal_average_cost_policy, stationary, td_fixed_point,
    };
    pub use crate::features::{excitation, FeatureMap};
    pub use crate::harness::{
        attach_baseline, decompose, regret, run_experiment, BaselineMode, ExperimentConfig, RegretLedger,
    };
    pub use crate::mdp::{simulate, Mdp, StochasticPolicy};
    pub use crate::rng::RngStreams;
}
