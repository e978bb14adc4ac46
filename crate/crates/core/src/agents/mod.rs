//! Learners that produce policies from interaction: Politex in its
//! exploration-enhanced, plain and LSPE forms, an RLSVI-style baseline and
//! fixed-policy agents.

mod collect;
mod policy;
mod runners;
mod schedule;

pub use collect::{collect_data, collect_on, CollectPlan, Interaction};
pub use policy::{boltzmann_policy, greedy_policy, PolitexState};
pub use runners::{
    run_agent, run_ee_politex, run_fixed_policy, run_politex_lspe, run_politex_no_explore, run_rlsvi_baseline,
    AgentConfig, AgentKind, ExplorationChoice, PhaseRecord, RunOutput, BASELINE_STREAM, ENV_STREAM, NOISE_STREAM,
};
pub use schedule::{make_schedule, Schedule, ScheduleOverrides};
