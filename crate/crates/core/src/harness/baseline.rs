use serde::{Deserialize, Serialize};

use super::ledger::{Baseline, BaselineCosts};
use crate::agents::{RunOutput, BASELINE_STREAM};
use crate::error::{Error, Result};
use crate::exact::{average_cost, optimal_average_cost_policy};
use crate::mdp::{simulate, Mdp, StochasticPolicy};
use crate::rng::RngStreams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineMode {
    /// Replace the comparator's cost sum by `T·λ*`.
    #[default]
    Exact,
    /// Simulate the comparator for `T` steps on its own substream.
    Sampled,
}

impl std::str::FromStr for BaselineMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(BaselineMode::Exact),
            "sampled" => Ok(BaselineMode::Sampled),
            other => Err(Error::Config(format!("unknown baseline mode `{other}`"))),
        }
    }
}

/// Builds a baseline for `comparator` over `steps` steps.
pub fn make_baseline(
    mdp: &Mdp,
    comparator: &StochasticPolicy,
    steps: usize,
    mode: BaselineMode,
    seed: u64,
) -> Result<Baseline> {
    let lambda_star = average_cost(mdp, comparator)?;
    let costs = match mode {
        BaselineMode::Exact => BaselineCosts::Exact,
        BaselineMode::Sampled => {
            let traj = simulate(
                mdp,
                comparator,
                mdp.start_state(),
                steps,
                &RngStreams::new(seed),
                BASELINE_STREAM,
            )?;
            BaselineCosts::Sampled {
                costs: traj.costs().collect(),
            }
        }
    };
    Ok(Baseline {
        lambda_star,
        actions: comparator.greedy_actions(),
        costs,
    })
}

/// Attaches the average-cost optimal policy as comparator.
pub fn attach_baseline(output: &mut RunOutput, mdp: &Mdp, mode: BaselineMode) -> Result<()> {
    let opt = optimal_average_cost_policy(mdp)?;
    let baseline = make_baseline(mdp, &opt.policy, output.ledger.len(), mode, output.seed)?;
    output.ledger.baseline = Some(baseline);
    Ok(())
}

/// Resolves `uniform`, `explore`, `optimal`, `action:K` or `file:PATH`
/// (a policy JSON document) against an environment.
pub fn named_policy(env: &crate::envs::Environment, name: &str) -> Result<StochasticPolicy> {
    let mdp = &env.mdp;
    match name.split_once(':') {
        None => match name {
            "uniform" => Ok(StochasticPolicy::uniform(mdp.num_states(), mdp.num_actions())),
            "explore" => Ok(env.default_exploration.clone()),
            "optimal" => Ok(optimal_average_cost_policy(mdp)?.policy),
            other => Err(Error::Config(format!("unknown policy `{other}`"))),
        },
        Some(("action", k)) => {
            let a: usize = k
                .parse()
                .map_err(|_| Error::Config(format!("bad action `{k}`")))?;
            StochasticPolicy::constant_action(mdp.num_states(), mdp.num_actions(), a)
        }
        Some(("file", path)) => {
            let policy: StochasticPolicy = serde_json::from_str(&std::fs::read_to_string(path)?)?;
            mdp.check_policy(&policy)?;
            Ok(policy)
        }
        Some((kind, _)) => Err(Error::Config(format!("unknown policy kind `{kind}`"))),
    }
}
