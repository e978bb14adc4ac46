use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use log::{info, warn};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::collect::{collect_on, CollectPlan, Interaction};
use super::policy::{greedy_policy, PolitexState};
use super::schedule::{make_schedule, Schedule, ScheduleOverrides};
use crate::envs::Environment;
use crate::error::{Error, Result};
use crate::estimation::{
    clip_estimate, lsmc_fit, lspe_fit, mean_cost, regression_rows, transitions_from_batch, FitMethod, LambdaEstimator,
    LspeOptions, QEstimate, Ridge, VisitMode,
};
use crate::exact::{stationary, with_uniform_actions};
use crate::features::{excitation, FeatureMap};
use crate::linalg::{self, Mat, Vector};
use crate::harness::ledger::{phase_policy_id, RegretLedger, SegmentKind, EXPLORE_POLICY_ID};
use crate::mdp::{Mdp, StochasticPolicy};
use crate::rng::RngStreams;

/// Substream ids of a run.
pub const ENV_STREAM: u64 = 0;
pub const NOISE_STREAM: u64 = 1;
pub const BASELINE_STREAM: u64 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AgentKind {
    /// Politex with exploration segments and LSMC estimates.
    EePolitex,
    /// Politex with LSMC estimates and no exploration segments.
    Politex,
    /// Politex with LSPE estimates and no exploration segments.
    PolitexLspe,
    /// Greedy in randomized least-squares relative value iteration over all data.
    Rlsvi,
    FixedUniform,
    FixedExplore,
    FixedOptimal,
}

impl AgentKind {
    pub const ALL: [AgentKind; 7] = [
        AgentKind::EePolitex,
        AgentKind::Politex,
        AgentKind::PolitexLspe,
        AgentKind::Rlsvi,
        AgentKind::FixedUniform,
        AgentKind::FixedExplore,
        AgentKind::FixedOptimal,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            AgentKind::EePolitex => "ee-politex",
            AgentKind::Politex => "politex",
            AgentKind::PolitexLspe => "politex-lspe",
            AgentKind::Rlsvi => "rlsvi",
            AgentKind::FixedUniform => "fixed-uniform",
            AgentKind::FixedExplore => "fixed-explore",
            AgentKind::FixedOptimal => "fixed-optimal",
        }
    }
}

impl fmt::Display for AgentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AgentKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        AgentKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown agent `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExplorationChoice {
    /// The environment's own exploration policy.
    #[default]
    Environment,
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentConfig {
    pub agent: AgentKind,
    /// Total environment steps `T`.
    pub steps: usize,
    pub visit_mode: VisitMode,
    pub lambda_estimator: LambdaEstimator,
    pub ridge: Ridge,
    /// Fixed temperature; replaces `√(8 ln A / n) / Q_max`.
    pub eta: Option<f64>,
    /// Multiplies the default temperature.
    pub eta_scale: f64,
    /// Standard deviation of the target noise of the RLSVI baseline.
    pub noise_scale: f64,
    /// Standard deviation of the RLSVI prior over weights.
    pub prior_scale: f64,
    pub schedule: ScheduleOverrides,
    /// Fixed weight-norm bound; otherwise calibrated on the first phases.
    pub w_max: Option<f64>,
    pub calibration_phases: usize,
    pub clip: bool,
    pub exploration: ExplorationChoice,
    pub lspe: LspeOptions,
    /// Attach exact average costs to every step (small MDPs).
    pub attach_exact: bool,
    /// Warn when the exploration distribution excites the features less.
    pub excitation_floor: f64,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            agent: AgentKind::EePolitex,
            steps: 10_000,
            visit_mode: VisitMode::OneVisit,
            lambda_estimator: LambdaEstimator::MeanCost,
            ridge: Ridge::Auto,
            eta: None,
            eta_scale: 1.0,
            noise_scale: 1.0,
            prior_scale: 1.0,
            schedule: ScheduleOverrides::default(),
            w_max: None,
            calibration_phases: 1,
            clip: true,
            exploration: ExplorationChoice::Environment,
            lspe: LspeOptions::default(),
            attach_exact: true,
            excitation_floor: 1e-6,
        }
    }
}

impl AgentConfig {
    pub fn new(agent: AgentKind, steps: usize) -> Self {
        Self {
            agent,
            steps,
            ..Self::default()
        }
    }

    /// Schedule after overrides; no-exploration learners get `s' = 0` and
    /// `env_explore_len` fills in `s'` when not overridden.
    pub fn schedule(&self, env_explore_len: Option<usize>) -> Schedule {
        let mut s = make_schedule(self.steps);
        if let Some(len) = env_explore_len {
            s.explore_len = len;
        }
        let mut s = self.schedule.apply(s);
        if !matches!(self.agent, AgentKind::EePolitex) {
            s.explore_len = 0;
        }
        s
    }
}

/// Summary of one learning phase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseRecord {
    pub phase: usize,
    pub records: usize,
    pub rows: usize,
    pub weight_norm: f64,
    pub moment_condition: f64,
    pub clipped_pairs: usize,
    pub singular: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunOutput {
    pub config: AgentConfig,
    pub seed: u64,
    pub schedule: Schedule,
    pub ledger: RegretLedger,
    pub phases: Vec<PhaseRecord>,
    pub final_policy: StochasticPolicy,
    pub eta: Option<f64>,
    pub q_max: Option<f64>,
    pub excitation: Option<f64>,
    pub weights: Vec<Vec<f64>>,
}

/// Temperature and clipping bookkeeping shared by the Politex learners.
struct Calibration {
    max_norm: f64,
    q_max: Option<f64>,
    eta: f64,
}

impl Calibration {
    fn new(config: &AgentConfig, features: &FeatureMap, phases: usize, num_actions: usize) -> Self {
        let mut c = Self {
            max_norm: 0.0,
            q_max: None,
            eta: config.eta.unwrap_or(0.0),
        };
        if let Some(w) = config.w_max {
            c.freeze(w, config, features, phases, num_actions);
        }
        c
    }

    fn freeze(&mut self, w_max: f64, config: &AgentConfig, features: &FeatureMap, phases: usize, num_actions: usize) {
        let w_max = if w_max > 0.0 && w_max.is_finite() { w_max } else { 1.0 };
        let q_max = (2.0 * w_max * features.feature_bound()).max(1e-12);
        self.q_max = Some(q_max);
        self.eta = match config.eta {
            Some(eta) => eta,
            None => config.eta_scale * (8.0 * (num_actions as f64).ln() / phases as f64).sqrt() / q_max,
        };
        info!("W_max = {w_max:.4}, Q_max = {q_max:.4}, eta = {:.6}", self.eta);
    }

    /// Feeds one fitted estimate; freezes after the calibration phases.
    fn observe(
        &mut self,
        phase: usize,
        estimate: &QEstimate,
        config: &AgentConfig,
        features: &FeatureMap,
        phases: usize,
        num_actions: usize,
    ) {
        if self.q_max.is_some() {
            return;
        }
        self.max_norm = self.max_norm.max(estimate.weight_norm());
        if phase + 1 >= config.calibration_phases.max(1) {
            self.freeze(1.5 * self.max_norm, config, features, phases, num_actions);
        }
    }

    fn clip(&self, estimate: QEstimate, enabled: bool) -> Result<QEstimate> {
        match self.q_max {
            Some(q_max) if enabled => clip_estimate(&estimate, -q_max / 2.0, q_max),
            _ => Ok(estimate),
        }
    }
}

fn check_excitation(mdp: &Mdp, features: &FeatureMap, exploration: &StochasticPolicy, floor: f64) -> Option<f64> {
    let mu = match stationary(mdp, exploration) {
        Ok(d) => d.mu,
        Err(e) => {
            warn!("exploration policy has no unique stationary distribution: {e}");
            return None;
        }
    };
    let nu = with_uniform_actions(&mu, mdp.num_actions());
    match excitation(features, &nu) {
        Ok(sigma) => {
            if sigma < floor {
                warn!("exploration excitation {sigma:.3e} is below the floor {floor:.1e}");
            }
            Some(sigma)
        }
        Err(e) => {
            warn!("could not compute excitation: {e}");
            None
        }
    }
}

enum Estimator {
    Lsmc,
    Lspe,
}

fn run_politex(
    mdp: &Mdp,
    features: &FeatureMap,
    exploration: Option<&StochasticPolicy>,
    config: &AgentConfig,
    schedule: Schedule,
    seed: u64,
    estimator: Estimator,
) -> Result<RunOutput> {
    features.check_shape(mdp.num_states(), mdp.num_actions())?;
    let (na, ns) = (mdp.num_actions(), mdp.num_states());
    let streams = RngStreams::new(seed);
    let mut stream = Interaction::new(mdp, mdp.start_state(), streams.stream(ENV_STREAM), config.steps);
    if config.attach_exact {
        stream = stream.with_exact_lambdas();
    }
    let excitation = exploration.and_then(|e| check_excitation(mdp, features, e, config.excitation_floor));
    let mut calibration = Calibration::new(config, features, schedule.phases, na);
    let mut state = PolitexState::new(ns, na, calibration.eta);
    let mut phases = Vec::new();
    let mut policy = state.policy()?;
    let mut warm: Option<Vec<f64>> = None;
    let mut phase = 0;
    while !stream.is_exhausted() {
        let plan = CollectPlan {
            target: &policy,
            target_id: phase_policy_id(phase),
            exploration: exploration.map(|e| (e, EXPLORE_POLICY_ID)),
            rollouts: schedule.rollouts,
            rollout_len: schedule.rollout_len,
            explore_len: schedule.explore_len,
            uniform_action: exploration.is_some(),
            lambda_estimator: config.lambda_estimator,
        };
        let Some(batch) = collect_on(&mut stream, &plan)? else { break };
        let estimate = match estimator {
            Estimator::Lsmc => {
                let rows = regression_rows(&batch, config.visit_mode)?;
                lsmc_fit(
                    &rows,
                    features,
                    config.ridge,
                    FitMethod::Lsmc {
                        visit_mode: config.visit_mode,
                        lambda_estimator: config.lambda_estimator,
                    },
                )?
            }
            Estimator::Lspe => {
                let transitions = transitions_from_batch(&batch);
                // mean cost of this phase's data: with the all-ones direction
                // in the feature span an off-policy λ̂ makes the system inconsistent
                let lambda_hat = mean_cost(&transitions);
                let fit = lspe_fit(&transitions, features, lambda_hat, config.lspe, warm.as_deref())?;
                warm = Some(fit.weights.clone());
                fit
            }
        };
        calibration.observe(phase, &estimate, config, features, schedule.phases, na);
        let estimate = calibration.clip(estimate, config.clip)?;
        phases.push(PhaseRecord {
            phase,
            records: batch.len(),
            rows: estimate.diagnostics.rows,
            weight_norm: estimate.weight_norm(),
            moment_condition: estimate.diagnostics.moment_condition,
            clipped_pairs: estimate.clipped_pairs(features),
            singular: estimate.diagnostics.singular,
        });
        state.eta = calibration.eta;
        state.clipping = calibration.q_max.map(|q| (-q / 2.0, q));
        state.push(&estimate, features);
        policy = state.policy()?;
        phase += 1;
    }
    Ok(RunOutput {
        config: config.clone(),
        seed,
        schedule,
        ledger: RegretLedger {
            steps: stream.into_steps(),
            baseline: None,
        },
        phases,
        final_policy: policy,
        eta: Some(state.eta),
        q_max: calibration.q_max,
        excitation,
        weights: state.weight_history,
    })
}

/// EE-Politex: every phase collects CollectData records whose start states
/// are re-randomised by `s'` steps of `exploration`, fits a clipped LSMC
/// estimate and plays the Boltzmann policy over the sum of all estimates.
pub fn run_ee_politex(
    mdp: &Mdp,
    features: &FeatureMap,
    exploration: &StochasticPolicy,
    config: &AgentConfig,
    schedule: Schedule,
    seed: u64,
) -> Result<RunOutput> {
    mdp.check_policy(exploration)?;
    run_politex(mdp, features, Some(exploration), config, schedule, seed, Estimator::Lsmc)
}

/// Politex with LSMC estimates; records start wherever the running
/// trajectory happens to be.
pub fn run_politex_no_explore(
    mdp: &Mdp,
    features: &FeatureMap,
    config: &AgentConfig,
    schedule: Schedule,
    seed: u64,
) -> Result<RunOutput> {
    let schedule = Schedule { explore_len: 0, ..schedule };
    run_politex(mdp, features, None, config, schedule, seed, Estimator::Lsmc)
}

/// Politex with warm-started LSPE estimates and no exploration segments.
pub fn run_politex_lspe(
    mdp: &Mdp,
    features: &FeatureMap,
    config: &AgentConfig,
    schedule: Schedule,
    seed: u64,
) -> Result<RunOutput> {
    let schedule = Schedule { explore_len: 0, ..schedule };
    run_politex(mdp, features, None, config, schedule, seed, Estimator::Lspe)
}

#[derive(Debug, Default, Clone)]
struct PairStats {
    visits: f64,
    cost_sum: f64,
    next: BTreeMap<usize, f64>,
}

const RLSVI_DAMPING: f64 = 0.5;
const RLSVI_MAX_SWEEPS: usize = 200;
const RLSVI_TOLERANCE: f64 = 1e-9;

/// Randomised least-squares relative value iteration. Every observed
/// transition is kept; at the start of each phase the agent draws a prior
/// anchor `w₀ ~ N(0, prior_scale² I)` and one Gaussian perturbation per
/// observation (scale `noise_scale`), runs damped fitted relative value
/// iteration with Bellman targets `c + min_a' Q(x', a') - mean` regularised
/// towards `w₀`, and plays greedily on the result for one phase.
pub fn run_rlsvi_baseline(
    mdp: &Mdp,
    features: &FeatureMap,
    config: &AgentConfig,
    schedule: Schedule,
    seed: u64,
) -> Result<RunOutput> {
    features.check_shape(mdp.num_states(), mdp.num_actions())?;
    if !(config.noise_scale >= 0.0) || !(config.prior_scale > 0.0) {
        return Err(Error::Config("noise_scale must be non-negative and prior_scale positive".into()));
    }
    let schedule = Schedule { explore_len: 0, ..schedule };
    let phase_len = (schedule.rollouts * schedule.record_len()).max(1);
    let (ns, na, d) = (mdp.num_states(), mdp.num_actions(), features.dim());
    let streams = RngStreams::new(seed);
    let mut noise_rng = streams.stream(NOISE_STREAM);
    let mut stream = Interaction::new(mdp, mdp.start_state(), streams.stream(ENV_STREAM), config.steps);
    if config.attach_exact {
        stream = stream.with_exact_lambdas();
    }
    let precision = (config.noise_scale / config.prior_scale).powi(2);
    let mut moment = Mat::zeros(d, d);
    let mut pairs: BTreeMap<(usize, usize), PairStats> = BTreeMap::new();
    let mut weights = vec![0.0; d];
    let mut policy = greedy_policy(&features.evaluate(&weights), ns, na)?;
    let mut phases = Vec::new();
    let mut history = Vec::new();
    let mut phase = 0;
    while !stream.is_exhausted() {
        let id = phase_policy_id(phase);
        let mut played = 0;
        while played < phase_len {
            let Some(step) = stream.step(&policy, SegmentKind::Target, id) else { break };
            let f = Vector::from_row_slice(features.feature(step.state, step.action));
            moment.ger(1.0, &f, &f, 1.0);
            let stats = pairs.entry((step.state, step.action)).or_default();
            stats.visits += 1.0;
            stats.cost_sum += step.cost;
            *stats.next.entry(step.next_state).or_default() += 1.0;
            played += 1;
        }
        let ridge = if precision > 0.0 {
            precision
        } else {
            match config.ridge {
                Ridge::Fixed(r) => r,
                Ridge::Auto => 1e-8 * moment.trace() / d as f64,
            }
        };
        let regularised = &moment + Mat::identity(d, d) * ridge;
        let anchor = Vector::from_iterator(
            d,
            (0..d).map(|_| {
                let z: f64 = StandardNormal.sample(&mut noise_rng);
                config.prior_scale * z
            }),
        );
        // c + noise part of the right-hand side; the noise of n observations
        // at one pair sums to a single N(0, n σ²) draw
        let mut fixed = &anchor * ridge;
        for (&(x, a), stats) in &pairs {
            let z: f64 = StandardNormal.sample(&mut noise_rng);
            let target = stats.cost_sum + config.noise_scale * stats.visits.sqrt() * z;
            fixed.axpy(target, &Vector::from_row_slice(features.feature(x, a)), 1.0);
        }
        let total_visits: f64 = pairs.values().map(|p| p.visits).sum();
        let chol = regularised.clone().cholesky();
        let solve = |b: &Vector| match &chol {
            Some(c) => (c.solve(b), false),
            None => linalg::solve_or_min_norm(&regularised, b),
        };
        let mut w = Vector::from_row_slice(&weights);
        let mut singular = chol.is_none();
        for _ in 0..RLSVI_MAX_SWEEPS {
            let q = features.evaluate(w.as_slice());
            let v: Vec<f64> = q
                .chunks(na)
                .map(|row| row.iter().copied().fold(f64::INFINITY, f64::min))
                .collect();
            let v_bar = pairs
                .values()
                .flat_map(|p| p.next.iter().map(|(&y, &n)| n * v[y]))
                .sum::<f64>()
                / total_visits;
            let mut b = fixed.clone();
            for (&(x, a), stats) in &pairs {
                let future: f64 = stats.next.iter().map(|(&y, &n)| n * (v[y] - v_bar)).sum();
                b.axpy(future, &Vector::from_row_slice(features.feature(x, a)), 1.0);
            }
            let (fit, sing) = solve(&b);
            singular |= sing;
            let next = &w * (1.0 - RLSVI_DAMPING) + fit * RLSVI_DAMPING;
            let change = (&next - &w).amax();
            w = next;
            if change <= RLSVI_TOLERANCE * (1.0 + w.amax()) {
                break;
            }
        }
        phases.push(PhaseRecord {
            phase,
            records: played,
            rows: pairs.len(),
            weight_norm: w.norm(),
            moment_condition: linalg::condition_number(&moment),
            clipped_pairs: 0,
            singular,
        });
        weights = w.iter().copied().collect();
        history.push(weights.clone());
        policy = greedy_policy(&features.evaluate(&weights), ns, na)?;
        phase += 1;
    }
    Ok(RunOutput {
        config: config.clone(),
        seed,
        schedule,
        ledger: RegretLedger {
            steps: stream.into_steps(),
            baseline: None,
        },
        phases,
        final_policy: policy,
        eta: None,
        q_max: None,
        excitation: None,
        weights: history,
    })
}

/// Plays one fixed policy for `config.steps` steps as a single target segment.
pub fn run_fixed_policy(mdp: &Mdp, policy: &StochasticPolicy, config: &AgentConfig, seed: u64) -> Result<RunOutput> {
    mdp.check_policy(policy)?;
    let streams = RngStreams::new(seed);
    let mut stream = Interaction::new(mdp, mdp.start_state(), streams.stream(ENV_STREAM), config.steps);
    if config.attach_exact {
        stream = stream.with_exact_lambdas();
    }
    let id = phase_policy_id(0);
    while stream
        .step(policy, crate::harness::ledger::SegmentKind::Target, id)
        .is_some()
    {}
    Ok(RunOutput {
        config: config.clone(),
        seed,
        schedule: Schedule {
            total: config.steps,
            phases: 1,
            rollouts: 1,
            rollout_len: config.steps.max(1),
            explore_len: 0,
        },
        ledger: RegretLedger {
            steps: stream.into_steps(),
            baseline: None,
        },
        phases: Vec::new(),
        final_policy: policy.clone(),
        eta: None,
        q_max: None,
        excitation: None,
        weights: Vec::new(),
    })
}

/// Runs the configured agent on an environment. The baseline is not
/// attached here; see [`crate::harness::attach_baseline`].
pub fn run_agent(env: &Environment, config: &AgentConfig, seed: u64) -> Result<RunOutput> {
    let mdp = &env.mdp;
    let features = &env.default_features;
    let exploration = match config.exploration {
        ExplorationChoice::Environment => env.default_exploration.clone(),
        ExplorationChoice::Uniform => StochasticPolicy::uniform(mdp.num_states(), mdp.num_actions()),
    };
    let schedule = config.schedule(env.exploration_length);
    match config.agent {
        AgentKind::EePolitex => run_ee_politex(mdp, features, &exploration, config, schedule, seed),
        AgentKind::Politex => run_politex_no_explore(mdp, features, config, schedule, seed),
        AgentKind::PolitexLspe => run_politex_lspe(mdp, features, config, schedule, seed),
        AgentKind::Rlsvi => run_rlsvi_baseline(mdp, features, config, schedule, seed),
        AgentKind::FixedUniform => {
            let uniform = StochasticPolicy::uniform(mdp.num_states(), mdp.num_actions());
            run_fixed_policy(mdp, &uniform, config, seed)
        }
        AgentKind::FixedExplore => run_fixed_policy(mdp, &exploration, config, seed),
        AgentKind::FixedOptimal => {
            let opt = crate::exact::optimal_average_cost_policy(mdp)?;
            run_fixed_policy(mdp, &opt.policy, config, seed)
        }
    }
}
