//! Multi-run orchestration: single runs, seed/agent sweeps, the
//! sublinearity probe and the DeepSea comparison.

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::baseline::{attach_baseline, BaselineMode};
use super::config::ExperimentConfig;
use super::ledger::{decompose, regret};
use super::stats::{iqr, loglog_slope, median};
use crate::agents::{run_agent, AgentConfig, AgentKind, RunOutput};
use crate::envs::{EnvSpec, Environment};
use crate::error::Result;
use crate::estimation::VisitMode;
use crate::exact::{average_cost, optimal_average_cost_policy};

/// Builds the environment and runs the configured agent with a baseline.
pub fn run_experiment(config: &ExperimentConfig) -> Result<(Environment, RunOutput)> {
    let env = config.env.parse::<EnvSpec>()?.build()?;
    let mut out = run_agent(&env, &config.agent, config.seed)?;
    attach_baseline(&mut out, &env.mdp, config.baseline)?;
    Ok((env, out))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub env: String,
    pub agent: AgentKind,
    pub seed: u64,
    pub steps: usize,
    pub status: String,
    pub average_cost: Option<f64>,
    pub target_average_cost: Option<f64>,
    pub regret: Option<f64>,
    pub regret_per_step: Option<f64>,
    pub exploration: Option<f64>,
    pub pseudo_regret: Option<f64>,
    pub agent_noise: Option<f64>,
    pub baseline_noise: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub env: String,
    pub agent: AgentKind,
    pub runs: usize,
    pub failed: usize,
    pub median_regret_per_step: Option<f64>,
    pub iqr_regret_per_step: Option<f64>,
    pub median_target_average_cost: Option<f64>,
    pub iqr_target_average_cost: Option<f64>,
}

/// Trailing fraction of a run used for "final" performance numbers.
pub const TAIL_FRACTION: f64 = 0.25;

fn run_cell(env: &str, agent: AgentKind, seed: u64, config: &ExperimentConfig) -> CellResult {
    let mut cell = CellResult {
        env: env.to_string(),
        agent,
        seed,
        steps: config.agent.steps,
        status: "ok".into(),
        average_cost: None,
        target_average_cost: None,
        regret: None,
        regret_per_step: None,
        exploration: None,
        pseudo_regret: None,
        agent_noise: None,
        baseline_noise: None,
    };
    let cfg = ExperimentConfig {
        env: env.to_string(),
        seed,
        agent: AgentConfig {
            agent,
            ..config.agent.clone()
        },
        ..config.clone()
    };
    match run_experiment(&cfg) {
        Ok((_, out)) => {
            let ledger = &out.ledger;
            cell.average_cost = Some(ledger.average_cost());
            cell.target_average_cost = ledger.target_average_cost(TAIL_FRACTION);
            if let Ok(r) = regret(ledger) {
                cell.regret = Some(r);
                cell.regret_per_step = Some(r / ledger.len().max(1) as f64);
            }
            if let Ok(d) = decompose(ledger) {
                cell.exploration = Some(d.exploration);
                cell.pseudo_regret = Some(d.pseudo_regret);
                cell.agent_noise = Some(d.agent_noise);
                cell.baseline_noise = Some(d.baseline_noise);
            }
        }
        Err(e) => {
            warn!("cell {env} / {agent} / seed {seed} failed: {e}");
            cell.status = format!("error: {e}");
        }
    }
    cell
}

/// Runs every (environment, agent, seed) cell in parallel. A failing cell
/// is reported in its row and does not stop the others.
pub fn run_sweep(config: &ExperimentConfig) -> (Vec<CellResult>, Vec<SummaryRow>) {
    let mut grid = Vec::new();
    for env in config.sweep_envs() {
        for agent in config.sweep_agents() {
            for seed in config.sweep_seeds() {
                grid.push((env.clone(), agent, seed));
            }
        }
    }
    let cells: Vec<CellResult> = grid
        .par_iter()
        .map(|(env, agent, seed)| run_cell(env, *agent, *seed, config))
        .collect();
    let mut summary = Vec::new();
    for env in config.sweep_envs() {
        for agent in config.sweep_agents() {
            let group: Vec<&CellResult> = cells.iter().filter(|c| c.env == env && c.agent == agent).collect();
            let per_step: Vec<f64> = group.iter().filter_map(|c| c.regret_per_step).collect();
            let target: Vec<f64> = group.iter().filter_map(|c| c.target_average_cost).collect();
            summary.push(SummaryRow {
                env: env.clone(),
                agent,
                runs: group.len(),
                failed: group.iter().filter(|c| c.status != "ok").count(),
                median_regret_per_step: median(&per_step),
                iqr_regret_per_step: iqr(&per_step),
                median_target_average_cost: median(&target),
                iqr_target_average_cost: iqr(&target),
            });
        }
    }
    (cells, summary)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeRow {
    pub steps: usize,
    pub median_regret: f64,
    pub median_regret_per_step: f64,
    pub iqr_regret: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeTable {
    pub rows: Vec<ProbeRow>,
    /// Log-log slope of median regret against `T`; absent for fewer than
    /// two grid points or non-positive medians.
    pub slope: Option<f64>,
}

/// Median regret over seeds for each horizon, with exact-λ substitution.
pub fn sublinearity_probe(
    env: &Environment,
    config: &AgentConfig,
    horizons: &[usize],
    seeds: &[u64],
) -> Result<ProbeTable> {
    let opt = optimal_average_cost_policy(&env.mdp)?;
    let lambda_star = average_cost(&env.mdp, &opt.policy)?;
    let jobs: Vec<(usize, u64)> = horizons
        .iter()
        .flat_map(|&t| seeds.iter().map(move |&s| (t, s)))
        .collect();
    let results: Vec<Result<(usize, f64)>> = jobs
        .par_iter()
        .map(|&(t, seed)| {
            let cfg = AgentConfig {
                steps: t,
                attach_exact: false,
                ..config.clone()
            };
            let out = run_agent(env, &cfg, seed)?;
            Ok((t, out.ledger.total_cost() - t as f64 * lambda_star))
        })
        .collect();
    let results: Vec<(usize, f64)> = results.into_iter().collect::<Result<_>>()?;
    let mut rows = Vec::new();
    for &t in horizons {
        let r: Vec<f64> = results.iter().filter(|x| x.0 == t).map(|x| x.1).collect();
        let med = median(&r).unwrap_or(f64::NAN);
        rows.push(ProbeRow {
            steps: t,
            median_regret: med,
            median_regret_per_step: med / t as f64,
            iqr_regret: iqr(&r).unwrap_or(f64::NAN),
        });
    }
    let points: Vec<(f64, f64)> = rows.iter().map(|r| (r.steps as f64, r.median_regret)).collect();
    let slope = loglog_slope(&points);
    if slope.is_none() && horizons.len() > 1 {
        warn!("slope undefined: some median regret is not positive");
    }
    Ok(ProbeTable { rows, slope })
}

/// DeepSea comparison settings. The exploration length follows the
/// environment's preference (`max(1, N/2)`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    pub sizes: Vec<usize>,
    pub seeds: Vec<u64>,
    pub agents: Vec<AgentKind>,
    /// Also report EE-Politex with the other two visit modes.
    pub all_visit_modes: bool,
    pub steps: usize,
    /// Rollouts per phase; `None` keeps the default `T^(2/5)`.
    pub rollouts: Option<usize>,
    /// Target rollout length. Short rollouts keep a near-uniform policy
    /// from stumbling on the goal inside its own rollouts.
    pub rollout_len: usize,
    pub noise_scale: f64,
    /// Multiplies every Politex temperature.
    pub eta_scale: f64,
    pub tail_fraction: f64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            sizes: vec![2, 4, 6, 8, 10],
            seeds: (0..5).collect(),
            agents: vec![
                AgentKind::PolitexLspe,
                AgentKind::Politex,
                AgentKind::EePolitex,
                AgentKind::Rlsvi,
            ],
            all_visit_modes: false,
            steps: 200_000,
            rollouts: None,
            rollout_len: 4,
            noise_scale: 1.0,
            eta_scale: 1.0,
            tail_fraction: TAIL_FRACTION,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub seed: u64,
    pub n: usize,
    pub agent: AgentKind,
    pub visit_mode: VisitMode,
    pub steps: usize,
    /// Mean reward of target-segment steps in the tail of the run.
    pub target_average_reward: Option<f64>,
    /// Mean reward of all steps in the tail of the run.
    pub tail_average_reward: Option<f64>,
    /// Exact average reward of the last policy played.
    pub final_policy_reward: Option<f64>,
    pub optimal_reward: f64,
    pub status: String,
}

impl BenchConfig {
    pub fn agent_config(&self, agent: AgentKind, visit_mode: VisitMode) -> AgentConfig {
        let mut cfg = AgentConfig::new(agent, self.steps);
        cfg.visit_mode = visit_mode;
        cfg.noise_scale = self.noise_scale;
        cfg.eta_scale = self.eta_scale;
        cfg.attach_exact = false;
        cfg.schedule.rollouts = self.rollouts;
        cfg.schedule.rollout_len = Some(self.rollout_len);
        cfg
    }

    fn variants(&self) -> Vec<(AgentKind, VisitMode)> {
        let mut v = Vec::new();
        for &a in &self.agents {
            if a == AgentKind::EePolitex {
                v.push((a, VisitMode::FirstVisit));
                if self.all_visit_modes {
                    v.push((a, VisitMode::OneVisit));
                    v.push((a, VisitMode::EveryVisit));
                }
            } else {
                v.push((a, VisitMode::FirstVisit));
            }
        }
        v
    }
}

fn bench_cell(cfg: &BenchConfig, seed: u64, n: usize, agent: AgentKind, visit: VisitMode) -> BenchRow {
    let mut row = BenchRow {
        seed,
        n,
        agent,
        visit_mode: visit,
        steps: cfg.steps,
        target_average_reward: None,
        tail_average_reward: None,
        final_policy_reward: None,
        optimal_reward: f64::NAN,
        status: "ok".into(),
    };
    let result = (|| -> Result<()> {
        let env = EnvSpec::DeepSea(crate::envs::DeepSeaSpec::new(n)).build()?;
        row.optimal_reward = -optimal_average_cost_policy(&env.mdp)?.lambda;
        let out = run_agent(&env, &cfg.agent_config(agent, visit), seed)?;
        row.target_average_reward = out.ledger.target_average_cost(cfg.tail_fraction).map(|c| -c);
        row.tail_average_reward = out.ledger.tail_average_cost(cfg.tail_fraction).map(|c| -c);
        row.final_policy_reward = average_cost(&env.mdp, &out.final_policy).ok().map(|c| -c);
        Ok(())
    })();
    if let Err(e) = result {
        warn!("deepsea N={n} {agent} seed {seed} failed: {e}");
        row.status = format!("error: {e}");
    }
    row
}

/// One row per (seed, N, agent variant), ordered by seed, then N, then agent.
pub fn deepsea_bench(cfg: &BenchConfig) -> Vec<BenchRow> {
    let mut jobs = Vec::new();
    for &seed in &cfg.seeds {
        for &n in &cfg.sizes {
            for (agent, visit) in cfg.variants() {
                jobs.push((seed, n, agent, visit));
            }
        }
    }
    jobs.par_iter()
        .map(|&(seed, n, agent, visit)| bench_cell(cfg, seed, n, agent, visit))
        .collect()
}

/// Convenience used by examples: attach an exact or sampled baseline and
/// report regret with its decomposition.
pub fn with_baseline(mut out: RunOutput, env: &Environment, mode: BaselineMode) -> Result<RunOutput> {
    attach_baseline(&mut out, &env.mdp, mode)?;
    Ok(out)
}
