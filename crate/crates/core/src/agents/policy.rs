use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::QEstimate;
use crate::features::FeatureMap;
use crate::mdp::StochasticPolicy;

/// `π(a|x) ∝ exp(−η q(x,a))`, evaluated after subtracting the per-state
/// minimum of `q` so the largest exponent is zero.
pub fn boltzmann_policy(
    summed_q: &[f64],
    num_states: usize,
    num_actions: usize,
    eta: f64,
) -> Result<StochasticPolicy> {
    if !(eta >= 0.0) || !eta.is_finite() {
        return Err(Error::Config(format!("temperature must be finite and non-negative, got {eta}")));
    }
    if summed_q.len() != num_states * num_actions {
        return Err(Error::LengthMismatch {
            expected: num_states * num_actions,
            actual: summed_q.len(),
        });
    }
    if let Some(i) = summed_q.iter().position(|q| !q.is_finite()) {
        return Err(Error::Numerical {
            message: format!("non-finite action value at pair {i}"),
            condition: f64::NAN,
        });
    }
    let mut probs = Vec::with_capacity(summed_q.len());
    for row in summed_q.chunks(num_actions) {
        let min = row.iter().copied().fold(f64::INFINITY, f64::min);
        let weights: Vec<f64> = row.iter().map(|&q| (-eta * (q - min)).exp()).collect();
        let z: f64 = weights.iter().sum();
        probs.extend(weights.iter().map(|w| w / z));
    }
    StochasticPolicy::new(num_states, num_actions, probs)
}

/// Greedy policy on costs; ties go to the lowest action.
pub fn greedy_policy(q: &[f64], num_states: usize, num_actions: usize) -> Result<StochasticPolicy> {
    let actions: Vec<usize> = q
        .chunks(num_actions)
        .map(|row| {
            row.iter()
                .enumerate()
                .fold((0, f64::INFINITY), |(best, bq), (a, &v)| if v < bq { (a, v) } else { (best, bq) })
                .0
        })
        .collect();
    debug_assert_eq!(actions.len(), num_states);
    StochasticPolicy::deterministic(num_actions, &actions)
}

/// Learner state between phases: every fitted estimate plus the running sum
/// of their clipped values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolitexState {
    pub weight_history: Vec<Vec<f64>>,
    pub eta: f64,
    pub phase_index: usize,
    /// `(b, Q_max)` once calibrated.
    pub clipping: Option<(f64, f64)>,
    summed_q: Vec<f64>,
    num_states: usize,
    num_actions: usize,
}

impl PolitexState {
    pub fn new(num_states: usize, num_actions: usize, eta: f64) -> Self {
        Self {
            weight_history: Vec::new(),
            eta,
            phase_index: 0,
            clipping: None,
            summed_q: vec![0.0; num_states * num_actions],
            num_states,
            num_actions,
        }
    }

    pub fn summed_q(&self) -> &[f64] {
        &self.summed_q
    }

    /// Adds one estimate; its values are clamped with the estimate's own clip.
    pub fn push(&mut self, estimate: &QEstimate, features: &FeatureMap) {
        for (acc, q) in self.summed_q.iter_mut().zip(estimate.q_values(features)) {
            *acc += q;
        }
        self.weight_history.push(estimate.weights.clone());
        self.phase_index += 1;
    }

    pub fn policy(&self) -> Result<StochasticPolicy> {
        boltzmann_policy(&self.summed_q, self.num_states, self.num_actions, self.eta)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimation::{FitDiagnostics, FitMethod, VisitMode};
    use approx::assert_abs_diff_eq;

    proptest::proptest! {
        #[test]
        fn boltzmann_rows_are_distributions(
            q in proptest::collection::vec(-1e3f64..1e3, 12),
            eta in 0.0f64..50.0,
        ) {
            let p = boltzmann_policy(&q, 4, 3, eta).unwrap();
            for x in 0..4 {
                let row = p.row(x);
                proptest::prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                let best = (0..3).min_by(|&a, &b| q[3 * x + a].total_cmp(&q[3 * x + b])).unwrap();
                proptest::prop_assert!(row.iter().all(|&r| r <= row[best] + 1e-15));
            }
        }
    }

    #[test]
    fn softmax_by_hand() {
        let p = boltzmann_policy(&[0.0, 1.0], 1, 2, 4f64.ln()).unwrap();
        assert_abs_diff_eq!(p.prob(0, 0), 0.8, epsilon = 1e-15);
        assert_abs_diff_eq!(p.prob(0, 1), 0.2, epsilon = 1e-15);
    }

    #[test]
    fn zero_temperature_is_uniform() {
        let p = boltzmann_policy(&[3.0, -7.0, 1e6, 0.5, 0.0, 2.0], 2, 3, 0.0).unwrap();
        assert_eq!(p, StochasticPolicy::uniform(2, 3));
    }

    #[test]
    fn rows_sum_to_one_and_favour_low_cost() {
        let q = [1e300, -1e300, 5.0, 5.0 + 1e-9, 0.0, 700.0];
        let p = boltzmann_policy(&q, 3, 2, 2.5).unwrap();
        for x in 0..3 {
            assert!((p.row(x).iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        }
        assert_eq!(p.prob(0, 1), 1.0);
        assert!(p.prob(1, 0) > p.prob(1, 1));
        assert!(p.prob(2, 0) > 0.999);
    }

    #[test]
    fn bad_inputs_are_rejected() {
        assert!(boltzmann_policy(&[0.0, f64::NAN], 1, 2, 1.0).is_err());
        assert!(boltzmann_policy(&[0.0, f64::INFINITY], 1, 2, 1.0).is_err());
        assert!(boltzmann_policy(&[0.0, 1.0], 1, 2, -1.0).is_err());
        assert!(boltzmann_policy(&[0.0, 1.0], 1, 3, 1.0).is_err());
    }

    #[test]
    fn greedy_breaks_ties_low() {
        let p = greedy_policy(&[1.0, 1.0, 2.0, -1.0], 2, 2).unwrap();
        assert_eq!(p.greedy_actions(), vec![0, 1]);
    }

    fn estimate(weights: Vec<f64>) -> QEstimate {
        QEstimate {
            weights,
            clip: None,
            diagnostics: FitDiagnostics {
                method: FitMethod::Lsmc {
                    visit_mode: VisitMode::OneVisit,
                    lambda_estimator: Default::default(),
                },
                rows: 0,
                ridge: 0.0,
                moment_condition: 1.0,
                singular: false,
                iteration_radius: None,
            },
        }
    }

    #[test]
    fn state_sums_history() {
        let f = FeatureMap::tabular(1, 2);
        let mut state = PolitexState::new(1, 2, 4f64.ln());
        state.push(&estimate(vec![0.5, 0.0]), &f);
        state.push(&estimate(vec![-0.5, 1.0]), &f);
        assert_eq!(state.phase_index, 2);
        assert_eq!(state.weight_history.len(), 2);
        assert_eq!(state.summed_q(), &[0.0, 1.0]);
        assert_abs_diff_eq!(state.policy().unwrap().prob(0, 0), 0.8, epsilon = 1e-15);
    }
}
