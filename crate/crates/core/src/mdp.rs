//! Finite MDPs, stochastic policies and trajectory simulation.
//!
//! States and actions are dense 0-based indices and a state-action pair
//! `(x, a)` is linearised as `x * A + a`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::rng::{sample_index, RngStreams, StreamRng};

/// Row-sum tolerance enforced when an MDP or policy is constructed.
pub const CONSTRUCTION_TOL: f64 = 1e-12;
/// Row-sum tolerance for matrices derived from products.
pub const DERIVED_TOL: f64 = 1e-10;

/// On-disk layout: flat row-major arrays.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MdpDocument {
    pub num_states: usize,
    pub num_actions: usize,
    pub cost: Vec<f64>,
    pub transition: Vec<f64>,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub start_state: usize,
}

fn is_zero(x: &usize) -> bool {
    *x == 0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MdpDocument", into = "MdpDocument")]
pub struct Mdp {
    num_states: usize,
    num_actions: usize,
    cost: Vec<f64>,
    transition: Vec<f64>,
    start_state: usize,
    // (next_state, probability) with probability > 0, per state-action pair
    successors: Vec<Vec<(usize, f64)>>,
}

impl TryFrom<MdpDocument> for Mdp {
    type Error = Error;

    fn try_from(doc: MdpDocument) -> Result<Self> {
        let mut mdp = Mdp::new(doc.num_states, doc.num_actions, doc.cost, doc.transition)?;
        mdp.set_start_state(doc.start_state)?;
        Ok(mdp)
    }
}

impl From<Mdp> for MdpDocument {
    fn from(mdp: Mdp) -> Self {
        MdpDocument {
            num_states: mdp.num_states,
            num_actions: mdp.num_actions,
            cost: mdp.cost,
            transition: mdp.transition,
            start_state: mdp.start_state,
        }
    }
}

impl Mdp {
    pub fn new(
        num_states: usize,
        num_actions: usize,
        cost: Vec<f64>,
        transition: Vec<f64>,
    ) -> Result<Self> {
        if num_states == 0 || num_actions == 0 {
            return Err(Error::InvalidMdp("state and action counts must be positive".into()));
        }
        let sa = num_states * num_actions;
        if cost.len() != sa {
            return Err(Error::InvalidMdp(format!(
                "cost table has {} entries, expected {sa}",
                cost.len()
            )));
        }
        if transition.len() != sa * num_states {
            return Err(Error::InvalidMdp(format!(
                "transition table has {} entries, expected {}",
                transition.len(),
                sa * num_states
            )));
        }
        if let Some(i) = cost.iter().position(|c| !c.is_finite()) {
            return Err(Error::InvalidMdp(format!("cost entry {i} is not finite")));
        }
        let mut successors = Vec::with_capacity(sa);
        for (idx, row) in transition.chunks(num_states).enumerate() {
            if row.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
                return Err(Error::InvalidMdp(format!(
                    "transition row for pair {idx} has a negative or non-finite entry"
                )));
            }
            let total: f64 = row.iter().sum();
            if (total - 1.0).abs() > CONSTRUCTION_TOL {
                return Err(Error::InvalidMdp(format!(
                    "transition row for pair {idx} sums to {total}"
                )));
            }
            successors.push(
                row.iter()
                    .enumerate()
                    .filter(|(_, &p)| p > 0.0)
                    .map(|(y, &p)| (y, p))
                    .collect(),
            );
        }
        Ok(Self {
            num_states,
            num_actions,
            cost,
            transition,
            start_state: 0,
            successors,
        })
    }

    pub fn set_start_state(&mut self, state: usize) -> Result<()> {
        if state >= self.num_states {
            return Err(Error::InvalidMdp(format!("start state {state} out of range")));
        }
        self.start_state = state;
        Ok(())
    }

    pub fn with_start_state(mut self, state: usize) -> Result<Self> {
        self.set_start_state(state)?;
        Ok(self)
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn num_pairs(&self) -> usize {
        self.num_states * self.num_actions
    }

    pub fn start_state(&self) -> usize {
        self.start_state
    }

    #[inline]
    pub fn pair(&self, state: usize, action: usize) -> usize {
        state * self.num_actions + action
    }

    #[inline]
    pub fn cost(&self, state: usize, action: usize) -> f64 {
        self.cost[self.pair(state, action)]
    }

    pub fn costs(&self) -> &[f64] {
        &self.cost
    }

    pub fn transition_row(&self, state: usize, action: usize) -> &[f64] {
        let p = self.pair(state, action);
        &self.transition[p * self.num_states..(p + 1) * self.num_states]
    }

    pub fn transitions(&self) -> &[f64] {
        &self.transition
    }

    pub fn successors(&self, state: usize, action: usize) -> &[(usize, f64)] {
        &self.successors[self.pair(state, action)]
    }

    pub fn max_abs_cost(&self) -> f64 {
        self.cost.iter().fold(0.0, |m, c| m.max(c.abs()))
    }

    /// Samples `x' ~ P(·|x, a)`.
    pub fn sample_next<R: rand::Rng + ?Sized>(&self, state: usize, action: usize, rng: &mut R) -> usize {
        let succ = self.successors(state, action);
        if succ.len() == 1 {
            return succ[0].0;
        }
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for &(y, p) in succ {
            acc += p;
            if u < acc {
                return y;
            }
        }
        succ.last().map(|&(y, _)| y).unwrap_or(state)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub(crate) fn check_policy(&self, policy: &StochasticPolicy) -> Result<()> {
        if policy.num_states() != self.num_states || policy.num_actions() != self.num_actions {
            return Err(Error::Config(format!(
                "policy is {}x{} but MDP is {}x{}",
                policy.num_states(),
                policy.num_actions(),
                self.num_states,
                self.num_actions
            )));
        }
        Ok(())
    }
}

/// Per-state action distributions, stored row-major as `probs[x * A + a]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StochasticPolicy {
    num_states: usize,
    num_actions: usize,
    probs: Vec<f64>,
}

impl StochasticPolicy {
    pub fn new(num_states: usize, num_actions: usize, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != num_states * num_actions {
            return Err(Error::InvalidPolicy(format!(
                "{} probabilities for {num_states}x{num_actions}",
                probs.len()
            )));
        }
        for (x, row) in probs.chunks(num_actions).enumerate() {
            if row.iter().any(|&p| !(p >= 0.0)) {
                return Err(Error::InvalidPolicy(format!("state {x} has a negative entry")));
            }
            let total: f64 = row.iter().sum();
            if (total - 1.0).abs() > CONSTRUCTION_TOL {
                return Err(Error::InvalidPolicy(format!("state {x} sums to {total}")));
            }
        }
        Ok(Self {
            num_states,
            num_actions,
            probs,
        })
    }

    pub fn uniform(num_states: usize, num_actions: usize) -> Self {
        let p = 1.0 / num_actions as f64;
        Self {
            num_states,
            num_actions,
            probs: vec![p; num_states * num_actions],
        }
    }

    pub fn deterministic(num_actions: usize, actions: &[usize]) -> Result<Self> {
        let mut probs = vec![0.0; actions.len() * num_actions];
        for (x, &a) in actions.iter().enumerate() {
            if a >= num_actions {
                return Err(Error::InvalidPolicy(format!("action {a} out of range at state {x}")));
            }
            probs[x * num_actions + a] = 1.0;
        }
        Ok(Self {
            num_states: actions.len(),
            num_actions,
            probs,
        })
    }

    pub fn constant_action(num_states: usize, num_actions: usize, action: usize) -> Result<Self> {
        Self::deterministic(num_actions, &vec![action; num_states])
    }

    /// Convex combination `(1 − w)·self + w·other`.
    pub fn mix(&self, other: &StochasticPolicy, weight: f64) -> Result<Self> {
        if self.num_states != other.num_states || self.num_actions != other.num_actions {
            return Err(Error::InvalidPolicy("mixing policies of different shapes".into()));
        }
        let probs = self
            .probs
            .iter()
            .zip(&other.probs)
            .map(|(p, q)| (1.0 - weight) * p + weight * q)
            .collect();
        Ok(Self {
            num_states: self.num_states,
            num_actions: self.num_actions,
            probs,
        })
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    #[inline]
    pub fn prob(&self, state: usize, action: usize) -> f64 {
        self.probs[state * self.num_actions + action]
    }

    pub fn row(&self, state: usize) -> &[f64] {
        &self.probs[state * self.num_actions..(state + 1) * self.num_actions]
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn sample_action<R: rand::Rng + ?Sized>(&self, state: usize, rng: &mut R) -> usize {
        sample_index(self.row(state), rng)
    }

    /// Most likely action per state, ties to the lowest index.
    pub fn greedy_actions(&self) -> Vec<usize> {
        (0..self.num_states)
            .map(|x| {
                let row = self.row(x);
                let mut best = 0;
                for a in 1..row.len() {
                    if row[a] > row[best] {
                        best = a;
                    }
                }
                best
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub state: usize,
    pub action: usize,
    pub cost: f64,
    pub next_state: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub start_state: usize,
    pub steps: Vec<Step>,
    pub rng_stream_id: u64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn costs(&self) -> impl Iterator<Item = f64> + '_ {
        self.steps.iter().map(|s| s.cost)
    }

    pub fn final_state(&self) -> usize {
        self.steps.last().map(|s| s.next_state).unwrap_or(self.start_state)
    }
}

/// Runs `policy` for `num_steps` steps from `start` using an existing stream.
pub fn rollout(
    mdp: &Mdp,
    policy: &StochasticPolicy,
    start: usize,
    num_steps: usize,
    rng: &mut StreamRng,
) -> Vec<Step> {
    let mut steps = Vec::with_capacity(num_steps);
    let mut state = start;
    for _ in 0..num_steps {
        let action = policy.sample_action(state, rng);
        let next_state = mdp.sample_next(state, action, rng);
        steps.push(Step {
            state,
            action,
            cost: mdp.cost(state, action),
            next_state,
        });
        state = next_state;
    }
    steps
}

/// Simulates a trajectory on its own substream; a pure function of its
/// arguments.
pub fn simulate(
    mdp: &Mdp,
    policy: &StochasticPolicy,
    start: usize,
    num_steps: usize,
    streams: &RngStreams,
    stream_id: u64,
) -> Result<Trajectory> {
    mdp.check_policy(policy)?;
    if start >= mdp.num_states() {
        return Err(Error::Config(format!("start state {start} out of range")));
    }
    let mut rng = streams.stream(stream_id);
    Ok(Trajectory {
        start_state: start,
        steps: rollout(mdp, policy, start, num_steps, &mut rng),
        rng_stream_id: stream_id,
    })
}

/// State transition matrix `P_π` (S×S).
pub fn policy_transition_matrix(mdp: &Mdp, policy: &StochasticPolicy) -> Result<Mat> {
    mdp.check_policy(policy)?;
    let s = mdp.num_states();
    let mut p = Mat::zeros(s, s);
    for x in 0..s {
        for a in 0..mdp.num_actions() {
            let w = policy.prob(x, a);
            if w == 0.0 {
                continue;
            }
            for &(y, q) in mdp.successors(x, a) {
                p[(x, y)] += w * q;
            }
        }
    }
    Ok(p)
}

/// State-action kernel `H_π[(x,a),(x',a')] = P(x'|x,a) π(a'|x')` (SA×SA).
pub fn state_action_kernel(mdp: &Mdp, policy: &StochasticPolicy) -> Result<Mat> {
    mdp.check_policy(policy)?;
    let na = mdp.num_actions();
    let sa = mdp.num_pairs();
    let mut h = Mat::zeros(sa, sa);
    for x in 0..mdp.num_states() {
        for a in 0..na {
            let row = mdp.pair(x, a);
            for &(y, q) in mdp.successors(x, a) {
                for b in 0..na {
                    h[(row, mdp.pair(y, b))] = q * policy.prob(y, b);
                }
            }
        }
    }
    Ok(h)
}

/// Expected one-step cost per state under `policy`.
pub fn policy_cost(mdp: &Mdp, policy: &StochasticPolicy) -> Vec<f64> {
    (0..mdp.num_states())
        .map(|x| {
            (0..mdp.num_actions())
                .map(|a| policy.prob(x, a) * mdp.cost(x, a))
                .sum()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn random_instance(s: usize, a: usize, seed: u64) -> (Mdp, StochasticPolicy) {
        let mut rng = RngStreams::new(seed).stream(0);
        let mut transition = Vec::new();
        for _ in 0..s * a {
            let row: Vec<f64> = (0..s).map(|_| rng.random::<f64>() + 0.01).collect();
            let total: f64 = row.iter().sum();
            transition.extend(row.iter().map(|p| p / total));
        }
        // renormalise the last entry so rows sum to one within construction tolerance
        for r in transition.chunks_mut(s) {
            let head: f64 = r[..s - 1].iter().sum();
            r[s - 1] = 1.0 - head;
        }
        let cost = (0..s * a).map(|_| rng.random::<f64>()).collect();
        let mut probs = Vec::new();
        for _ in 0..s {
            let row: Vec<f64> = (0..a).map(|_| rng.random::<f64>() + 0.05).collect();
            let total: f64 = row.iter().sum();
            let mut row: Vec<f64> = row.iter().map(|p| p / total).collect();
            let head: f64 = row[..a - 1].iter().sum();
            row[a - 1] = 1.0 - head;
            probs.extend(row);
        }
        (
            Mdp::new(s, a, cost, transition).unwrap(),
            StochasticPolicy::new(s, a, probs).unwrap(),
        )
    }

    fn two_state_deterministic() -> Mdp {
        // action 0 stays, action 1 flips
        Mdp::new(
            2,
            2,
            vec![0.0, 1.0, 0.0, 1.0],
            vec![1.0, 0.0, 0.0, 1.0, 0.0, 1.0, 1.0, 0.0],
        )
        .unwrap()
    }

    #[test]
    fn rejects_bad_rows() {
        assert!(Mdp::new(1, 1, vec![0.0], vec![0.9]).is_err());
        assert!(Mdp::new(2, 1, vec![0.0, 0.0], vec![1.5, -0.5, 0.0, 1.0]).is_err());
        assert!(Mdp::new(1, 1, vec![f64::NAN], vec![1.0]).is_err());
        assert!(Mdp::new(0, 1, vec![], vec![]).is_err());
    }

    #[test]
    fn single_state_transition_matrix() {
        let mdp = Mdp::new(1, 2, vec![0.0, 1.0], vec![1.0, 1.0]).unwrap();
        let p = policy_transition_matrix(&mdp, &StochasticPolicy::uniform(1, 2)).unwrap();
        assert_eq!(p, Mat::from_element(1, 1, 1.0));
        let one = Mdp::new(1, 1, vec![0.0], vec![1.0]).unwrap();
        let h = state_action_kernel(&one, &StochasticPolicy::uniform(1, 1)).unwrap();
        assert_eq!(h, Mat::from_element(1, 1, 1.0));
    }

    #[test]
    fn uniform_policy_averages_action_rows() {
        let mdp = two_state_deterministic();
        let p = policy_transition_matrix(&mdp, &StochasticPolicy::uniform(2, 2)).unwrap();
        for x in 0..2 {
            for y in 0..2 {
                let avg = 0.5 * (mdp.transition_row(x, 0)[y] + mdp.transition_row(x, 1)[y]);
                assert_eq!(p[(x, y)], avg);
            }
        }
    }

    #[test]
    fn deterministic_kernel_is_zero_one() {
        let mdp = two_state_deterministic();
        let pi = StochasticPolicy::deterministic(2, &[1, 0]).unwrap();
        let h = state_action_kernel(&mdp, &pi).unwrap();
        for r in 0..4 {
            let ones = h.row(r).iter().filter(|&&v| v == 1.0).count();
            let zeros = h.row(r).iter().filter(|&&v| v == 0.0).count();
            assert_eq!((ones, zeros), (1, 3));
        }
        // (0,1) flips to state 1 where the policy plays action 0
        assert_eq!(h[(1, 2)], 1.0);
    }

    #[test]
    fn matrices_match_brute_force_loops() {
        let (mdp, pi) = random_instance(5, 3, 11);
        let p = policy_transition_matrix(&mdp, &pi).unwrap();
        for x in 0..5 {
            for y in 0..5 {
                let mut expect = 0.0;
                for a in 0..3 {
                    expect += pi.prob(x, a) * mdp.transition_row(x, a)[y];
                }
                assert!((p[(x, y)] - expect).abs() < 1e-14);
            }
            assert!((p.row(x).sum() - 1.0).abs() < DERIVED_TOL);
        }
        let h = state_action_kernel(&mdp, &pi).unwrap();
        for x in 0..5 {
            for a in 0..3 {
                for y in 0..5 {
                    for b in 0..3 {
                        let expect = mdp.transition_row(x, a)[y] * pi.prob(y, b);
                        assert!((h[(x * 3 + a, y * 3 + b)] - expect).abs() < 1e-15);
                    }
                }
                assert!((h.row(x * 3 + a).sum() - 1.0).abs() < DERIVED_TOL);
            }
        }
    }

    #[test]
    fn kernel_marginalises_to_transition() {
        let (mdp, pi) = random_instance(4, 2, 5);
        let h = state_action_kernel(&mdp, &pi).unwrap();
        for x in 0..4 {
            for a in 0..2 {
                for y in 0..4 {
                    let m: f64 = (0..2).map(|b| h[(x * 2 + a, y * 2 + b)]).sum();
                    assert!((m - mdp.transition_row(x, a)[y]).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn dimension_mismatch_is_config_error() {
        let mdp = two_state_deterministic();
        let pi = StochasticPolicy::uniform(3, 2);
        assert!(matches!(policy_transition_matrix(&mdp, &pi), Err(Error::Config(_))));
        assert!(matches!(state_action_kernel(&mdp, &pi), Err(Error::Config(_))));
    }

    #[test]
    fn simulate_zero_steps_and_determinism() {
        let mdp = two_state_deterministic();
        let pi = StochasticPolicy::deterministic(2, &[1, 1]).unwrap();
        let streams = RngStreams::new(3);
        assert!(simulate(&mdp, &pi, 0, 0, &streams, 0).unwrap().is_empty());
        let traj = simulate(&mdp, &pi, 0, 5, &streams, 0).unwrap();
        let states: Vec<usize> = traj.steps.iter().map(|s| s.state).collect();
        assert_eq!(states, vec![0, 1, 0, 1, 0]);
        for w in traj.steps.windows(2) {
            assert_eq!(w[0].next_state, w[1].state);
        }
        for s in &traj.steps {
            assert_eq!(s.cost, mdp.cost(s.state, s.action));
        }
    }

    #[test]
    fn simulate_flip_frequency() {
        let p = 0.3;
        let mdp = Mdp::new(2, 1, vec![0.0, 1.0], vec![1.0 - p, p, p, 1.0 - p]).unwrap();
        let pi = StochasticPolicy::uniform(2, 1);
        let streams = RngStreams::new(99);
        let traj = simulate(&mdp, &pi, 0, 100_000, &streams, 1).unwrap();
        let flips = traj.steps.iter().filter(|s| s.state != s.next_state).count();
        let freq = flips as f64 / 100_000.0;
        assert!((freq - 0.3).abs() < 0.01, "flip frequency {freq}");
        let again = simulate(&mdp, &pi, 0, 100_000, &streams, 1).unwrap();
        assert_eq!(traj, again);
    }

    #[test]
    fn json_round_trip_is_exact() {
        let (mdp, _) = random_instance(4, 3, 21);
        let text = mdp.to_json().unwrap();
        let back = Mdp::from_json(&text).unwrap();
        assert_eq!(mdp, back);
        assert_eq!(mdp.transitions(), back.transitions());
    }

    #[test]
    fn json_rejects_invalid_rows() {
        let bad = r#"{"num_states":1,"num_actions":1,"cost":[0.0],"transition":[0.5]}"#;
        assert!(Mdp::from_json(bad).is_err());
    }
}
