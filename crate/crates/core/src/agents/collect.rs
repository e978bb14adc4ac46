use std::collections::HashMap;

use log::warn;

use crate::error::{Error, Result};
use crate::estimation::{BatchEntry, LambdaEstimator, RolloutBatch};
use crate::exact::gain;
use crate::harness::ledger::{LedgerStep, SegmentKind, UNIFORM_POLICY_ID};
use crate::mdp::{Mdp, Step, StochasticPolicy, Trajectory};
use crate::rng::StreamRng;

/// One unbroken interaction with the environment under a step budget.
/// Every transition is logged.
pub struct Interaction<'a> {
    mdp: &'a Mdp,
    state: usize,
    rng: StreamRng,
    budget: usize,
    steps: Vec<LedgerStep>,
    total_cost: f64,
    uniform: StochasticPolicy,
    /// Per-state gain of every acting policy, by policy id.
    lambdas: Option<HashMap<u32, Option<Vec<f64>>>>,
}

impl<'a> Interaction<'a> {
    pub fn new(mdp: &'a Mdp, start: usize, rng: StreamRng, budget: usize) -> Self {
        Self {
            mdp,
            state: start,
            rng,
            budget,
            steps: Vec::with_capacity(budget.min(1 << 24)),
            total_cost: 0.0,
            uniform: StochasticPolicy::uniform(mdp.num_states(), mdp.num_actions()),
            lambdas: None,
        }
    }

    /// Attach the exact average cost of every acting policy to its steps.
    /// A multichain policy gets the gain of the state the step starts in.
    pub fn with_exact_lambdas(mut self) -> Self {
        self.lambdas = Some(HashMap::new());
        self
    }

    pub fn state(&self) -> usize {
        self.state
    }

    pub fn steps_taken(&self) -> usize {
        self.steps.len()
    }

    pub fn remaining(&self) -> usize {
        self.budget - self.steps.len()
    }

    pub fn is_exhausted(&self) -> bool {
        self.remaining() == 0
    }

    /// Mean of all costs observed so far.
    pub fn running_mean_cost(&self) -> f64 {
        if self.steps.is_empty() {
            0.0
        } else {
            self.total_cost / self.steps.len() as f64
        }
    }

    pub fn rng(&mut self) -> &mut StreamRng {
        &mut self.rng
    }

    pub fn into_steps(self) -> Vec<LedgerStep> {
        self.steps
    }

    fn lambda_of(&mut self, policy: &StochasticPolicy, policy_id: u32) -> Option<f64> {
        let (mdp, state) = (self.mdp, self.state);
        let cache = self.lambdas.as_mut()?;
        cache
            .entry(policy_id)
            .or_insert_with(|| match gain(mdp, policy) {
                Ok(g) => Some(g),
                Err(e) => {
                    warn!("no exact average cost for policy {policy_id}: {e}");
                    None
                }
            })
            .as_ref()
            .map(|g| g[state])
    }

    /// Takes one step under `policy`; `None` once the budget is spent.
    pub fn step(&mut self, policy: &StochasticPolicy, segment: SegmentKind, policy_id: u32) -> Option<Step> {
        if self.is_exhausted() {
            return None;
        }
        let lambda = self.lambda_of(policy, policy_id);
        let state = self.state;
        let action = policy.sample_action(state, &mut self.rng);
        let next_state = self.mdp.sample_next(state, action, &mut self.rng);
        let cost = self.mdp.cost(state, action);
        self.steps.push(LedgerStep {
            t: self.steps.len(),
            state,
            action,
            cost,
            segment,
            policy_id,
            lambda,
        });
        self.total_cost += cost;
        self.state = next_state;
        Some(Step {
            state,
            action,
            cost,
            next_state,
        })
    }

    fn uniform_step(&mut self) -> Option<Step> {
        let uniform = std::mem::replace(&mut self.uniform, StochasticPolicy::uniform(0, 0));
        let step = self.step(&uniform, SegmentKind::UniformAction, UNIFORM_POLICY_ID);
        self.uniform = uniform;
        step
    }
}

/// Lengths and policies of one CollectData call.
pub struct CollectPlan<'p> {
    pub target: &'p StochasticPolicy,
    pub target_id: u32,
    pub exploration: Option<(&'p StochasticPolicy, u32)>,
    pub rollouts: usize,
    pub rollout_len: usize,
    pub explore_len: usize,
    /// Draw `a_j` uniformly (CollectData); otherwise the target policy acts.
    pub uniform_action: bool,
    pub lambda_estimator: LambdaEstimator,
}

/// Runs CollectData on the interaction stream. Records cut short by the
/// budget are dropped; `None` means no record completed.
pub fn collect_on(stream: &mut Interaction<'_>, plan: &CollectPlan<'_>) -> Result<Option<RolloutBatch>> {
    if plan.explore_len > 0 && plan.exploration.is_none() {
        return Err(Error::Config("exploration segments need an exploration policy".into()));
    }
    let mut entries = Vec::with_capacity(plan.rollouts);
    'records: for _ in 0..plan.rollouts {
        if let Some((explore, id)) = plan.exploration {
            for _ in 0..plan.explore_len {
                if stream.step(explore, SegmentKind::Explore, id).is_none() {
                    break 'records;
                }
            }
        }
        let first = if plan.uniform_action {
            stream.uniform_step()
        } else {
            stream.step(plan.target, SegmentKind::Target, plan.target_id)
        };
        let Some(first) = first else { break };
        let mut steps = Vec::with_capacity(plan.rollout_len);
        for _ in 0..plan.rollout_len {
            match stream.step(plan.target, SegmentKind::Target, plan.target_id) {
                Some(s) => steps.push(s),
                None => break 'records,
            }
        }
        entries.push(BatchEntry {
            state: first.state,
            action: first.action,
            first_cost: first.cost,
            next_state: first.next_state,
            rollout: Trajectory {
                start_state: first.next_state,
                steps,
                rng_stream_id: 0,
            },
        });
    }
    if entries.is_empty() {
        return Ok(None);
    }
    RolloutBatch::new(entries, plan.rollout_len, plan.lambda_estimator).map(Some)
}

/// CollectData from `start` on a fresh stream: `m` records of `s'` exploration
/// steps, one uniformly random action, then `s` target-policy steps. Returns
/// the batch and the state the stream ended in.
#[allow(clippy::too_many_arguments)]
pub fn collect_data(
    mdp: &Mdp,
    target: &StochasticPolicy,
    exploration: &StochasticPolicy,
    rollouts: usize,
    rollout_len: usize,
    explore_len: usize,
    start: usize,
    rng: StreamRng,
) -> Result<(RolloutBatch, usize)> {
    mdp.check_policy(target)?;
    mdp.check_policy(exploration)?;
    if rollouts < 1 || rollout_len < 1 {
        return Err(Error::Config("collect_data needs m >= 1 and s >= 1".into()));
    }
    let budget = rollouts * (explore_len + 1 + rollout_len);
    let mut stream = Interaction::new(mdp, start, rng, budget);
    let plan = CollectPlan {
        target,
        target_id: 2,
        exploration: Some((exploration, 0)),
        rollouts,
        rollout_len,
        explore_len,
        uniform_action: true,
        lambda_estimator: LambdaEstimator::default(),
    };
    let batch = collect_on(&mut stream, &plan)?.expect("budget covers every record");
    Ok((batch, stream.state()))
}
