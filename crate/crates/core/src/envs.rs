//! Benchmark MDPs: DeepSea, a symmetric two-state chain and a random
//! unichain generator, plus `name:key=value` addressing for run configs.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{config_err, Error, Result};
use crate::exact::check_unichain;
use crate::features::FeatureMap;
use crate::mdp::{policy_transition_matrix, Mdp, StochasticPolicy};
use crate::rng::RngStreams;

/// DeepSea parameters. Rewards are stored as negated costs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeepSeaSpec {
    pub n: usize,
    /// Reward collected in the bottom-right cell, for either action.
    pub reward_goal: f64,
    /// Reward of action 1 outside the goal cell.
    pub action1_penalty: f64,
    /// Also charge the action-1 penalty in the goal cell.
    pub penalty_at_goal: bool,
}

impl DeepSeaSpec {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            reward_goal: 2.0 * n as f64,
            action1_penalty: -1.0,
            penalty_at_goal: false,
        }
    }

    pub fn num_states(&self) -> usize {
        self.n * self.n
    }

    pub fn state(&self, row: usize, col: usize) -> usize {
        row * self.n + col
    }

    pub fn coords(&self, state: usize) -> (usize, usize) {
        (state / self.n, state % self.n)
    }

    /// Next cell: the row always advances (mod N); action 0 moves left and
    /// action 1 right, clamped to the grid.
    pub fn next_cell(&self, row: usize, col: usize, action: usize) -> (usize, usize) {
        let next_row = (row + 1) % self.n;
        let next_col = if action == 0 {
            col.saturating_sub(1)
        } else {
            (col + 1).min(self.n - 1)
        };
        (next_row, next_col)
    }

    pub fn reward(&self, row: usize, col: usize, action: usize) -> f64 {
        let goal = row == self.n - 1 && col == self.n - 1;
        let penalty = if action == 1 { self.action1_penalty } else { 0.0 };
        if goal {
            self.reward_goal + if self.penalty_at_goal { penalty } else { 0.0 }
        } else {
            penalty
        }
    }

    pub fn build(&self) -> Result<Mdp> {
        if self.n == 0 {
            return Err(config_err("DeepSea size must be at least 1"));
        }
        let s = self.num_states();
        let mut cost = vec![0.0; s * 2];
        let mut transition = vec![0.0; s * 2 * s];
        for row in 0..self.n {
            for col in 0..self.n {
                let x = self.state(row, col);
                for a in 0..2 {
                    let (r, c) = self.next_cell(row, col, a);
                    cost[x * 2 + a] = -self.reward(row, col, a);
                    transition[(x * 2 + a) * s + self.state(r, c)] = 1.0;
                }
            }
        }
        Mdp::new(s, 2, cost, transition)?.with_start_state(0)
    }
}

/// DeepSea with the literal reward reading (no penalty at the goal).
pub fn deepsea(n: usize) -> Result<Mdp> {
    DeepSeaSpec::new(n).build()
}

pub fn always_action_one_policy(n: usize) -> StochasticPolicy {
    StochasticPolicy::constant_action(n * n, 2, 1).expect("action 1 exists")
}

/// Default exploration segment length for DeepSea runs.
pub fn deepsea_exploration_length(n: usize) -> usize {
    (n / 2).max(1)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RandomMdpSpec {
    pub num_states: usize,
    pub num_actions: usize,
    /// Fraction of states in the random support of each transition row.
    pub sparsity: f64,
    pub cost_range: (f64, f64),
    /// Weight of the uniform component mixed into every row.
    pub mixture: f64,
}

impl RandomMdpSpec {
    pub fn new(num_states: usize, num_actions: usize) -> Self {
        Self {
            num_states,
            num_actions,
            sparsity: 1.0,
            cost_range: (0.0, 1.0),
            mixture: 0.1,
        }
    }
}

const MAX_REGENERATIONS: usize = 16;

/// Random MDP whose every transition row contains a uniform component, so
/// every policy's chain is irreducible (unichain and one-step contracting).
pub fn random_unichain<R: Rng + ?Sized>(spec: &RandomMdpSpec, rng: &mut R) -> Result<Mdp> {
    let (s, a) = (spec.num_states, spec.num_actions);
    if s == 0 || a == 0 {
        return Err(config_err("random MDP needs at least one state and action"));
    }
    if !(spec.sparsity > 0.0 && spec.sparsity <= 1.0) {
        return Err(config_err("sparsity must lie in (0, 1]"));
    }
    if !(0.0..=1.0).contains(&spec.mixture) {
        return Err(config_err("mixture weight must lie in [0, 1]"));
    }
    let (lo, hi) = spec.cost_range;
    if !(lo <= hi) {
        return Err(config_err("cost range is empty"));
    }
    let support = ((spec.sparsity * s as f64).round() as usize).clamp(1, s);
    for _ in 0..MAX_REGENERATIONS {
        let mut transition = Vec::with_capacity(s * a * s);
        for _ in 0..s * a {
            let mut row = vec![0.0; s];
            let chosen = rand::seq::index::sample(rng, s, support);
            let draws: Vec<f64> = (0..support).map(|_| Exp1.sample(rng)).collect();
            let total: f64 = draws.iter().sum();
            for (k, y) in chosen.iter().enumerate() {
                row[y] = (1.0 - spec.mixture) * draws[k] / total;
            }
            for p in row.iter_mut() {
                *p += spec.mixture / s as f64;
            }
            let total: f64 = row.iter().sum();
            row.iter_mut().for_each(|p| *p /= total);
            transition.extend(row);
        }
        let cost = (0..s * a).map(|_| lo + (hi - lo) * rng.random::<f64>()).collect();
        let mdp = Mdp::new(s, a, cost, transition)?;
        let p = policy_transition_matrix(&mdp, &StochasticPolicy::uniform(s, a))?;
        if check_unichain(&p).is_ok() {
            return Ok(mdp);
        }
    }
    Err(Error::InvalidMdp(format!(
        "no unichain instance after {MAX_REGENERATIONS} attempts"
    )))
}

/// Policy with rows drawn uniformly from the probability simplex.
pub fn random_policy<R: Rng + ?Sized>(num_states: usize, num_actions: usize, rng: &mut R) -> Result<StochasticPolicy> {
    let mut probs = Vec::with_capacity(num_states * num_actions);
    for _ in 0..num_states {
        let draws: Vec<f64> = (0..num_actions).map(|_| Exp1.sample(rng)).collect();
        let total: f64 = draws.iter().sum();
        probs.extend(draws.iter().map(|d| d / total));
    }
    StochasticPolicy::new(num_states, num_actions, probs)
}

/// Symmetric two-state, one-action chain flipping with probability `p_flip`.
pub fn two_state_chain(p_flip: f64, costs: (f64, f64)) -> Result<Mdp> {
    if !(p_flip > 0.0 && p_flip <= 1.0) {
        return Err(config_err("flip probability must lie in (0, 1]"));
    }
    Mdp::new(
        2,
        1,
        vec![costs.0, costs.1],
        vec![1.0 - p_flip, p_flip, p_flip, 1.0 - p_flip],
    )
}

/// An environment addressable from configs and the command line, e.g.
/// `deepsea:N=8`, `chain:p=0.3`, `random:S=6,A=3,seed=4`, `file:mdp.json`.
#[derive(Debug, Clone, PartialEq)]
pub enum EnvSpec {
    DeepSea(DeepSeaSpec),
    Chain { p_flip: f64, costs: (f64, f64) },
    Random { spec: RandomMdpSpec, seed: u64 },
    File(PathBuf),
}

fn parse_kv(body: &str) -> Result<Vec<(String, String)>> {
    body.split(',')
        .filter(|kv| !kv.trim().is_empty())
        .map(|kv| {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| config_err(format!("expected key=value, got `{kv}`")))?;
            Ok((k.trim().to_string(), v.trim().to_string()))
        })
        .collect()
}

fn num<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| config_err(format!("bad value `{value}` for `{key}`")))
}

impl FromStr for EnvSpec {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let (kind, body) = text.split_once(':').unwrap_or((text, ""));
        match kind.trim() {
            "deepsea" => {
                let mut spec = DeepSeaSpec::new(0);
                let mut n = None;
                for (k, v) in parse_kv(body)? {
                    match k.as_str() {
                        "N" | "n" => n = Some(num::<usize>(&k, &v)?),
                        "penalty_at_goal" => spec.penalty_at_goal = num(&k, &v)?,
                        _ => return Err(config_err(format!("unknown deepsea key `{k}`"))),
                    }
                }
                let n = n.ok_or_else(|| config_err("deepsea needs N"))?;
                if n == 0 {
                    return Err(config_err("deepsea needs N >= 1"));
                }
                let penalty_at_goal = spec.penalty_at_goal;
                spec = DeepSeaSpec::new(n);
                spec.penalty_at_goal = penalty_at_goal;
                Ok(EnvSpec::DeepSea(spec))
            }
            "chain" => {
                let mut p_flip = None;
                let mut costs = (0.0, 1.0);
                for (k, v) in parse_kv(body)? {
                    match k.as_str() {
                        "p" => p_flip = Some(num(&k, &v)?),
                        "c0" => costs.0 = num(&k, &v)?,
                        "c1" => costs.1 = num(&k, &v)?,
                        _ => return Err(config_err(format!("unknown chain key `{k}`"))),
                    }
                }
                let p_flip: f64 = p_flip.ok_or_else(|| config_err("chain needs p"))?;
                if !(p_flip > 0.0 && p_flip <= 1.0) {
                    return Err(config_err("chain p must lie in (0, 1]"));
                }
                Ok(EnvSpec::Chain { p_flip, costs })
            }
            "random" => {
                let mut spec = RandomMdpSpec::new(0, 0);
                let mut seed = 0;
                for (k, v) in parse_kv(body)? {
                    match k.as_str() {
                        "S" => spec.num_states = num(&k, &v)?,
                        "A" => spec.num_actions = num(&k, &v)?,
                        "seed" => seed = num(&k, &v)?,
                        "sparsity" => spec.sparsity = num(&k, &v)?,
                        "mixture" => spec.mixture = num(&k, &v)?,
                        "cmin" => spec.cost_range.0 = num(&k, &v)?,
                        "cmax" => spec.cost_range.1 = num(&k, &v)?,
                        _ => return Err(config_err(format!("unknown random key `{k}`"))),
                    }
                }
                if spec.num_states == 0 || spec.num_actions == 0 {
                    return Err(config_err("random needs S and A"));
                }
                Ok(EnvSpec::Random { spec, seed })
            }
            "file" if !body.is_empty() => Ok(EnvSpec::File(PathBuf::from(body))),
            other => Err(config_err(format!("unknown environment `{other}`"))),
        }
    }
}

impl fmt::Display for EnvSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EnvSpec::DeepSea(spec) if spec.penalty_at_goal => {
                write!(f, "deepsea:N={},penalty_at_goal=true", spec.n)
            }
            EnvSpec::DeepSea(spec) => write!(f, "deepsea:N={}", spec.n),
            EnvSpec::Chain { p_flip, costs } => {
                write!(f, "chain:p={p_flip},c0={},c1={}", costs.0, costs.1)
            }
            EnvSpec::Random { spec, seed } => write!(
                f,
                "random:S={},A={},seed={seed},sparsity={},mixture={},cmin={},cmax={}",
                spec.num_states,
                spec.num_actions,
                spec.sparsity,
                spec.mixture,
                spec.cost_range.0,
                spec.cost_range.1
            ),
            EnvSpec::File(p) => write!(f, "file:{}", p.display()),
        }
    }
}

/// A constructed environment with its natural defaults.
#[derive(Debug, Clone)]
pub struct Environment {
    pub name: String,
    pub mdp: Mdp,
    pub default_features: FeatureMap,
    pub default_exploration: StochasticPolicy,
    /// Exploration segment length this environment prefers, if any.
    pub exploration_length: Option<usize>,
}

impl EnvSpec {
    pub fn build(&self) -> Result<Environment> {
        let name = self.to_string();
        match self {
            EnvSpec::DeepSea(spec) => Ok(Environment {
                name,
                mdp: spec.build()?,
                default_features: FeatureMap::deepsea(spec.n)?,
                default_exploration: always_action_one_policy(spec.n),
                exploration_length: Some(deepsea_exploration_length(spec.n)),
            }),
            EnvSpec::Chain { p_flip, costs } => tabular_env(name, two_state_chain(*p_flip, *costs)?),
            EnvSpec::Random { spec, seed } => {
                let mut rng = RngStreams::new(*seed).stream(0);
                tabular_env(name, random_unichain(spec, &mut rng)?)
            }
            EnvSpec::File(path) => {
                let text = std::fs::read_to_string(path)?;
                tabular_env(name, Mdp::from_json(&text)?)
            }
        }
    }
}

fn tabular_env(name: String, mdp: Mdp) -> Result<Environment> {
    let (s, a) = (mdp.num_states(), mdp.num_actions());
    Ok(Environment {
        name,
        default_features: FeatureMap::tabular(s, a),
        default_exploration: StochasticPolicy::uniform(s, a),
        exploration_length: None,
        mdp,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{exact_values, mixing_coefficient, optimal_average_cost_policy, stationary};
    use crate::features::excitation;

    #[test]
    fn deepsea_transitions_match_rule_exhaustively() {
        for n in 1..=6 {
            let spec = DeepSeaSpec::new(n);
            let mdp = spec.build().unwrap();
            for i in 0..n {
                for j in 0..n {
                    let x = spec.state(i, j);
                    let left = spec.state((i + 1) % n, j.saturating_sub(1));
                    let right = spec.state((i + 1) % n, (j + 1).min(n - 1));
                    assert_eq!(mdp.transition_row(x, 0)[left], 1.0);
                    assert_eq!(mdp.transition_row(x, 1)[right], 1.0);
                    let goal = i == n - 1 && j == n - 1;
                    let (c0, c1) = (mdp.cost(x, 0), mdp.cost(x, 1));
                    if goal {
                        assert_eq!((c0, c1), (-2.0 * n as f64, -2.0 * n as f64));
                    } else {
                        assert_eq!((c0, c1), (0.0, 1.0));
                    }
                }
            }
        }
    }

    #[test]
    fn deepsea_quoted_cases() {
        let spec = DeepSeaSpec::new(2);
        let mdp = spec.build().unwrap();
        assert_eq!(mdp.transition_row(0, 1)[spec.state(1, 1)], 1.0);
        assert_eq!(mdp.cost(spec.state(1, 1), 0), -4.0);
        assert_eq!(mdp.cost(spec.state(1, 1), 1), -4.0);
        let spec = DeepSeaSpec::new(4);
        let mdp = spec.build().unwrap();
        assert_eq!(mdp.transition_row(spec.state(3, 0), 0)[0], 1.0);
        assert_eq!(mdp.start_state(), 0);
    }

    #[test]
    fn always_one_average_reward() {
        for n in 1..=8 {
            let mdp = deepsea(n).unwrap();
            let v = exact_values(&mdp, &always_action_one_policy(n)).unwrap();
            let expect = (n as f64 + 1.0) / n as f64;
            assert!((-v.lambda - expect).abs() < 1e-10, "N={n}: {}", -v.lambda);
        }
        let v = exact_values(&deepsea(4).unwrap(), &always_action_one_policy(4)).unwrap();
        assert!((-v.lambda - 1.25).abs() < 1e-12);
    }

    #[test]
    fn always_one_concentrates_on_right_edge() {
        let n = 5;
        let spec = DeepSeaSpec::new(n);
        let st = stationary(&spec.build().unwrap(), &always_action_one_policy(n)).unwrap();
        for (x, &m) in st.mu.iter().enumerate() {
            let (_, col) = spec.coords(x);
            if col == n - 1 {
                assert!((m - 1.0 / n as f64).abs() < 1e-10);
            } else {
                assert!(m.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn always_one_with_uniform_perturbation_excites() {
        let n = 4;
        let mdp = deepsea(n).unwrap();
        let mixed = always_action_one_policy(n)
            .mix(&StochasticPolicy::uniform(n * n, 2), 0.5)
            .unwrap();
        let st = stationary(&mdp, &mixed).unwrap();
        let f = FeatureMap::deepsea(n).unwrap();
        assert!(excitation(&f, &st.nu).unwrap() > 1e-4);
    }

    #[test]
    fn deepsea_two_optimum() {
        let opt = optimal_average_cost_policy(&deepsea(2).unwrap()).unwrap();
        assert!(opt.converged);
        assert!((opt.lambda + 1.5).abs() < 1e-8, "{}", opt.lambda);
    }

    #[test]
    fn two_state_chain_closed_form() {
        let mdp = two_state_chain(1.0, (0.0, 1.0)).unwrap();
        let v = exact_values(&mdp, &StochasticPolicy::uniform(2, 1)).unwrap();
        assert!((v.lambda - 0.5).abs() < 1e-12);
        assert!((v.v[0] + 0.25).abs() < 1e-12 && (v.v[1] - 0.25).abs() < 1e-12);
        for p in [0.1, 0.3, 0.77] {
            let mdp = two_state_chain(p, (0.2, 1.4)).unwrap();
            let v = exact_values(&mdp, &StochasticPolicy::uniform(2, 1)).unwrap();
            let v0 = -(1.4 - 0.2) / (4.0 * p);
            assert!((v.v[0] - v0).abs() < 1e-10 && (v.v[1] + v0).abs() < 1e-10);
            assert!((v.mu[0] - 0.5).abs() < 1e-12);
        }
        let flat = two_state_chain(0.4, (0.7, 0.7)).unwrap();
        let v = exact_values(&flat, &StochasticPolicy::uniform(2, 1)).unwrap();
        assert!(v.v.iter().all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn half_flip_chain_mixes_in_one_step() {
        let mdp = two_state_chain(0.5, (0.0, 1.0)).unwrap();
        let m = mixing_coefficient(&mdp, &StochasticPolicy::uniform(2, 1), 1).unwrap();
        assert_eq!(m.contraction_factor, 0.0);
        assert_eq!(m.kappa, Some(f64::MIN_POSITIVE));
    }

    #[test]
    fn random_generator_properties() {
        let mut rng = RngStreams::new(5).stream(0);
        for i in 0..100 {
            let s = 1 + i % 8;
            let a = 1 + i % 3;
            let mut spec = RandomMdpSpec::new(s, a);
            spec.sparsity = 0.3 + 0.7 * ((i % 5) as f64 / 4.0);
            let mdp = random_unichain(&spec, &mut rng).unwrap();
            let pi = StochasticPolicy::uniform(s, a);
            let p = policy_transition_matrix(&mdp, &pi).unwrap();
            assert!(check_unichain(&p).is_ok());
            assert!(mixing_coefficient(&mdp, &pi, 1).unwrap().is_finite());
        }
    }

    #[test]
    fn full_mixture_gives_uniform_rows() {
        let mut rng = RngStreams::new(1).stream(0);
        let mut spec = RandomMdpSpec::new(4, 2);
        spec.mixture = 1.0;
        let mdp = random_unichain(&spec, &mut rng).unwrap();
        assert!(mdp.transitions().iter().all(|&p| (p - 0.25).abs() < 1e-15));
        let m = mixing_coefficient(&mdp, &StochasticPolicy::uniform(4, 2), 1).unwrap();
        assert!(m.contraction_factor < 1e-12);
        let single = random_unichain(&RandomMdpSpec::new(1, 2), &mut rng).unwrap();
        assert_eq!(single.transitions(), &[1.0, 1.0]);
    }

    #[test]
    fn env_spec_parsing() {
        let e: EnvSpec = "deepsea:N=8".parse().unwrap();
        assert_eq!(e, EnvSpec::DeepSea(DeepSeaSpec::new(8)));
        let c: EnvSpec = "chain:p=0.3".parse().unwrap();
        assert_eq!(c, EnvSpec::Chain { p_flip: 0.3, costs: (0.0, 1.0) });
        let r: EnvSpec = "random:S=6,A=3,seed=9".parse().unwrap();
        let again: EnvSpec = r.to_string().parse().unwrap();
        assert_eq!(r, again);
        assert!("deepsea".parse::<EnvSpec>().is_err());
        assert!("chain:p=0".parse::<EnvSpec>().is_err());
        assert!("moon:x=1".parse::<EnvSpec>().is_err());
        let built = r.build().unwrap();
        assert_eq!(built.mdp, r.build().unwrap().mdp);
    }
}
