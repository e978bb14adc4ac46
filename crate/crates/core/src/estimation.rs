//! Finite-sample action-value estimators.
//!
//! Least-squares Monte-Carlo (LSMC) regresses rollout-based targets
//! `Q*(x_j, a_j) = c(x_j, a_j) − λ* + Σ_{k=1}^{s} (c_k − λ*)` onto the
//! features; `c_k` is the k-th cost of the target-policy rollout started in
//! `x'_j`. LSTD and LSPE solve the empirical projected Bellman equation
//! instead and serve as baselines.

use std::collections::HashSet;

use log::{debug, warn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureMap;
use crate::linalg::{self, Mat, Vector};
use crate::mdp::Trajectory;

/// How the per-rollout average-cost estimate λ* is formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LambdaEstimator {
    /// The last cost of the rollout, `c_s`.
    LastCost,
    /// Mean of every rollout cost in the batch.
    #[default]
    MeanCost,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum VisitMode {
    /// One regression row per batch entry.
    #[default]
    OneVisit,
    /// Also a row for the first occurrence of each pair inside each rollout.
    FirstVisit,
    /// Also a row for every occurrence of each pair inside each rollout.
    EveryVisit,
}

impl std::str::FromStr for VisitMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "one_visit" | "one" => Ok(VisitMode::OneVisit),
            "first_visit" | "first" => Ok(VisitMode::FirstVisit),
            "every_visit" | "every" => Ok(VisitMode::EveryVisit),
            other => Err(Error::Config(format!("unknown visit mode `{other}`"))),
        }
    }
}

impl VisitMode {
    pub fn name(&self) -> &'static str {
        match self {
            VisitMode::OneVisit => "one-visit",
            VisitMode::FirstVisit => "first-visit",
            VisitMode::EveryVisit => "every-visit",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchEntry {
    pub state: usize,
    pub action: usize,
    pub first_cost: f64,
    pub next_state: usize,
    pub rollout: Trajectory,
}

/// The dataset `{(x_j, a_j, R_j)}` of one data-collection call.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolloutBatch {
    entries: Vec<BatchEntry>,
    rollout_len: usize,
    lambda_estimator: LambdaEstimator,
}

impl RolloutBatch {
    pub fn new(entries: Vec<BatchEntry>, rollout_len: usize, lambda_estimator: LambdaEstimator) -> Result<Self> {
        if rollout_len < 1 {
            return Err(Error::InvalidBatch("rollout length must be at least 1".into()));
        }
        for (j, e) in entries.iter().enumerate() {
            if e.rollout.len() != rollout_len {
                return Err(Error::InvalidBatch(format!(
                    "rollout {j} has {} steps, expected {rollout_len}",
                    e.rollout.len()
                )));
            }
            if e.rollout.start_state != e.next_state {
                return Err(Error::InvalidBatch(format!("rollout {j} does not start at x'")));
            }
        }
        Ok(Self {
            entries,
            rollout_len,
            lambda_estimator,
        })
    }

    pub fn entries(&self) -> &[BatchEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn rollout_len(&self) -> usize {
        self.rollout_len
    }

    pub fn lambda_estimator(&self) -> LambdaEstimator {
        self.lambda_estimator
    }

    pub fn with_lambda_estimator(mut self, kind: LambdaEstimator) -> Self {
        self.lambda_estimator = kind;
        self
    }

    /// λ* for every entry.
    pub fn lambdas(&self) -> Vec<f64> {
        match self.lambda_estimator {
            LambdaEstimator::LastCost => self
                .entries
                .iter()
                .map(|e| e.rollout.steps.last().map(|s| s.cost).unwrap_or(0.0))
                .collect(),
            LambdaEstimator::MeanCost => {
                let (sum, count) = self
                    .entries
                    .iter()
                    .flat_map(|e| e.rollout.costs())
                    .fold((0.0, 0usize), |(s, n), c| (s + c, n + 1));
                let mean = if count == 0 { 0.0 } else { sum / count as f64 };
                vec![mean; self.entries.len()]
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegressionRow {
    pub state: usize,
    pub action: usize,
    pub target: f64,
}

/// One `(x_j, a_j, Q*(x_j, a_j))` row per batch entry.
pub fn regression_targets(batch: &RolloutBatch) -> Result<Vec<RegressionRow>> {
    if batch.is_empty() {
        return Err(Error::InvalidBatch("batch is empty".into()));
    }
    let lambdas = batch.lambdas();
    Ok(batch
        .entries
        .iter()
        .zip(&lambdas)
        .map(|(e, &lam)| {
            let tail: f64 = e.rollout.costs().map(|c| c - lam).sum();
            RegressionRow {
                state: e.state,
                action: e.action,
                target: e.first_cost - lam + tail,
            }
        })
        .collect())
}

/// Regression rows for the requested visit mode. First- and every-visit
/// rows use the partial return after the visit, with the entry's λ*.
pub fn regression_rows(batch: &RolloutBatch, mode: VisitMode) -> Result<Vec<RegressionRow>> {
    let mut rows = regression_targets(batch)?;
    if mode == VisitMode::OneVisit {
        return Ok(rows);
    }
    let lambdas = batch.lambdas();
    for (e, &lam) in batch.entries.iter().zip(&lambdas) {
        let steps = &e.rollout.steps;
        // returns-to-go, accumulated backwards
        let mut to_go = vec![0.0; steps.len()];
        let mut acc = 0.0;
        for k in (0..steps.len()).rev() {
            acc += steps[k].cost - lam;
            to_go[k] = acc;
        }
        let mut seen = HashSet::new();
        for (k, st) in steps.iter().enumerate() {
            if mode == VisitMode::FirstVisit && !seen.insert((st.state, st.action)) {
                continue;
            }
            rows.push(RegressionRow {
                state: st.state,
                action: st.action,
                target: to_go[k],
            });
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Ridge {
    /// `1e-8 · trace(Σψψ^T) / d`.
    #[default]
    Auto,
    Fixed(f64),
}

impl Ridge {
    fn resolve(&self, moment: &Mat) -> f64 {
        match *self {
            Ridge::Auto => 1e-8 * moment.trace() / moment.nrows().max(1) as f64,
            Ridge::Fixed(r) => r,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum FitMethod {
    Lsmc { visit_mode: VisitMode, lambda_estimator: LambdaEstimator },
    Lstd { lambda_hat: f64 },
    Lspe { lambda_hat: f64, step: f64, iterations: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    pub method: FitMethod,
    pub rows: usize,
    pub ridge: f64,
    /// Condition number of the unregularised empirical moment matrix.
    pub moment_condition: f64,
    /// A minimum-norm fallback was needed (singular system).
    pub singular: bool,
    /// Spectral radius of the LSPE iteration map, when applicable.
    pub iteration_radius: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Clip {
    pub lower: f64,
    pub range: f64,
}

/// `Q̂ = Ψŵ`, optionally clamped into `[b, b + Q_max]` at evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QEstimate {
    pub weights: Vec<f64>,
    pub clip: Option<Clip>,
    pub diagnostics: FitDiagnostics,
}

impl QEstimate {
    pub fn weight_norm(&self) -> f64 {
        self.weights.iter().map(|w| w * w).sum::<f64>().sqrt()
    }

    fn clamp(&self, v: f64) -> f64 {
        match self.clip {
            Some(Clip { lower, range }) => v.clamp(lower, lower + range),
            None => v,
        }
    }

    pub fn value(&self, features: &FeatureMap, state: usize, action: usize) -> f64 {
        self.clamp(features.value(state, action, &self.weights))
    }

    /// Clipped `Q̂` for every pair.
    pub fn q_values(&self, features: &FeatureMap) -> Vec<f64> {
        features
            .evaluate(&self.weights)
            .into_iter()
            .map(|v| self.clamp(v))
            .collect()
    }

    /// Number of pairs where clipping changes the value.
    pub fn clipped_pairs(&self, features: &FeatureMap) -> usize {
        features
            .evaluate(&self.weights)
            .into_iter()
            .filter(|&v| self.clamp(v) != v)
            .count()
    }
}

/// Attaches the evaluation-time clamp `[b, b + q_max]`; weights are untouched.
pub fn clip_estimate(estimate: &QEstimate, lower: f64, q_max: f64) -> Result<QEstimate> {
    if !(q_max > 0.0) {
        return Err(Error::Config("clipping range must be positive".into()));
    }
    Ok(QEstimate {
        clip: Some(Clip { lower, range: q_max }),
        ..estimate.clone()
    })
}

/// Ridge-regularised least squares on the rows; with zero ridge and a
/// singular system the minimum-norm solution is returned.
pub fn lsmc_fit(
    rows: &[RegressionRow],
    features: &FeatureMap,
    ridge: Ridge,
    method: FitMethod,
) -> Result<QEstimate> {
    if rows.is_empty() {
        return Err(Error::InvalidBatch("no regression rows".into()));
    }
    let d = features.dim();
    let mut moment = Mat::zeros(d, d);
    let mut rhs = Vector::zeros(d);
    for row in rows {
        let f = Vector::from_row_slice(features.feature(row.state, row.action));
        moment.ger(1.0, &f, &f, 1.0);
        rhs.axpy(row.target, &f, 1.0);
    }
    let moment_condition = linalg::condition_number(&moment);
    let ridge = ridge.resolve(&moment);
    let (weights, singular) = if ridge > 0.0 {
        let reg = &moment + Mat::identity(d, d) * ridge;
        match reg.clone().cholesky() {
            Some(ch) => (ch.solve(&rhs), false),
            None => (linalg::min_norm_solve(&reg, &rhs), true),
        }
    } else {
        linalg::solve_or_min_norm(&moment, &rhs)
    };
    Ok(QEstimate {
        weights: weights.iter().copied().collect(),
        clip: None,
        diagnostics: FitDiagnostics {
            method,
            rows: rows.len(),
            ridge,
            moment_condition,
            singular,
            iteration_radius: None,
        },
    })
}

/// Convenience: targets for `mode` followed by [`lsmc_fit`].
pub fn lsmc_fit_batch(batch: &RolloutBatch, features: &FeatureMap, mode: VisitMode, ridge: Ridge) -> Result<QEstimate> {
    let rows = regression_rows(batch, mode)?;
    lsmc_fit(
        &rows,
        features,
        ridge,
        FitMethod::Lsmc {
            visit_mode: mode,
            lambda_estimator: batch.lambda_estimator(),
        },
    )
}

/// A sampled (or enumerated, when `weight` carries its probability)
/// transition `(x, a, c, x', a')`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub state: usize,
    pub action: usize,
    pub cost: f64,
    pub next_state: usize,
    pub next_action: usize,
    pub weight: f64,
}

/// Consecutive pairs of the batch whose next action was chosen by the target
/// policy: the uniform-action step into each rollout and every in-rollout
/// step except the last.
pub fn transitions_from_batch(batch: &RolloutBatch) -> Vec<Transition> {
    let mut out = Vec::new();
    for e in &batch.entries {
        let steps = &e.rollout.steps;
        if let Some(first) = steps.first() {
            out.push(Transition {
                state: e.state,
                action: e.action,
                cost: e.first_cost,
                next_state: e.next_state,
                next_action: first.action,
                weight: 1.0,
            });
        }
        for w in steps.windows(2) {
            out.push(Transition {
                state: w[0].state,
                action: w[0].action,
                cost: w[0].cost,
                next_state: w[1].state,
                next_action: w[1].action,
                weight: 1.0,
            });
        }
    }
    out
}

/// Weighted running mean of observed costs.
pub fn mean_cost(transitions: &[Transition]) -> f64 {
    let (num, den) = transitions
        .iter()
        .fold((0.0, 0.0), |(n, d), t| (n + t.weight * t.cost, d + t.weight));
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

struct EmpiricalSystem {
    // Σ w ψ ψ^T
    moment: Mat,
    // Σ w ψ (ψ − ψ')^T
    a: Mat,
    // Σ w ψ (c − λ̂)
    b: Vector,
    // Σ w ψ
    gauge: Vector,
}

fn empirical_system(transitions: &[Transition], features: &FeatureMap, lambda_hat: f64) -> EmpiricalSystem {
    let d = features.dim();
    let mut sys = EmpiricalSystem {
        moment: Mat::zeros(d, d),
        a: Mat::zeros(d, d),
        b: Vector::zeros(d),
        gauge: Vector::zeros(d),
    };
    for t in transitions {
        let f = Vector::from_row_slice(features.feature(t.state, t.action));
        let g = Vector::from_row_slice(features.feature(t.next_state, t.next_action));
        sys.moment.ger(t.weight, &f, &f, 1.0);
        sys.a.ger(t.weight, &f, &(&f - &g), 1.0);
        sys.b.axpy(t.weight * (t.cost - lambda_hat), &f, 1.0);
        sys.gauge.axpy(t.weight, &f, 1.0);
    }
    sys
}

/// Empirical LSTD: `Σψ(ψ − ψ')^T w = Σψ(c − λ̂)`. When the system is
/// singular the solution with `Σψ^T w = 0` (zero empirical mean value) and
/// minimum norm is returned and the fit is flagged.
pub fn lstd_fit(transitions: &[Transition], features: &FeatureMap, lambda_hat: f64) -> Result<QEstimate> {
    if transitions.is_empty() {
        return Err(Error::InvalidBatch("no transitions".into()));
    }
    let sys = empirical_system(transitions, features, lambda_hat);
    let scale = linalg::spectral_norm(&sys.moment);
    let (w, singular) = linalg::solve_with_gauge(&sys.a, &sys.b, &sys.gauge, scale);
    if singular {
        warn!("LSTD system is singular; using the gauge-fixed minimum-norm solution");
    }
    Ok(QEstimate {
        weights: w.iter().copied().collect(),
        clip: None,
        diagnostics: FitDiagnostics {
            method: FitMethod::Lstd { lambda_hat },
            rows: transitions.len(),
            ridge: 0.0,
            moment_condition: linalg::condition_number(&sys.moment),
            singular,
            iteration_radius: None,
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LspeOptions {
    pub step: f64,
    pub iterations: usize,
    pub ridge: Ridge,
}

impl Default for LspeOptions {
    fn default() -> Self {
        Self {
            step: 0.5,
            iterations: 20,
            ridge: Ridge::Auto,
        }
    }
}

/// LSPE: `w ← w + step · M^{-1}(b − A w)` from `init` (zeros if absent).
pub fn lspe_fit(
    transitions: &[Transition],
    features: &FeatureMap,
    lambda_hat: f64,
    opts: LspeOptions,
    init: Option<&[f64]>,
) -> Result<QEstimate> {
    if transitions.is_empty() {
        return Err(Error::InvalidBatch("no transitions".into()));
    }
    let d = features.dim();
    let sys = empirical_system(transitions, features, lambda_hat);
    let ridge = opts.ridge.resolve(&sys.moment);
    let reg = &sys.moment + Mat::identity(d, d) * ridge;
    let (m_inv, singular) = match reg.clone().try_inverse() {
        Some(inv) if ridge > 0.0 || !linalg::is_rank_deficient(&reg) => (inv, false),
        _ => (linalg::pseudo_inverse(&reg), true),
    };
    if singular {
        warn!("LSPE moment matrix is singular; using its pseudo-inverse");
    }
    let mut w = match init {
        Some(w0) if w0.len() == d => Vector::from_row_slice(w0),
        Some(w0) => {
            return Err(Error::LengthMismatch {
                expected: d,
                actual: w0.len(),
            })
        }
        None => Vector::zeros(d),
    };
    for _ in 0..opts.iterations {
        let residual = &sys.b - &sys.a * &w;
        w += (&m_inv * residual) * opts.step;
    }
    let iteration = Mat::identity(d, d) - (&m_inv * &sys.a) * opts.step;
    // bounded Schur iteration: the unbounded one can stall on defective maps
    let radius = nalgebra::Schur::try_new(iteration, f64::EPSILON, 10_000).map(|schur| {
        schur
            .complex_eigenvalues()
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    });
    match radius {
        Some(r) if r > 1.0 + 1e-9 => debug!("LSPE iteration is not contractive (spectral radius {r:.4})"),
        None => debug!("LSPE spectral radius did not converge"),
        _ => {}
    }
    Ok(QEstimate {
        weights: w.iter().copied().collect(),
        clip: None,
        diagnostics: FitDiagnostics {
            method: FitMethod::Lspe {
                lambda_hat,
                step: opts.step,
                iterations: opts.iterations,
            },
            rows: transitions.len(),
            ridge,
            moment_condition: linalg::condition_number(&sys.moment),
            singular,
            iteration_radius: radius,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{random_policy, random_unichain, RandomMdpSpec};
    use crate::exact::{exact_values, stationary, td_fixed_point};
    use crate::mdp::{Mdp, Step, StochasticPolicy};
    use crate::rng::RngStreams;
    use approx::assert_abs_diff_eq;

    fn entry(state: usize, action: usize, first_cost: f64, next: usize, path: &[(usize, usize, f64)]) -> BatchEntry {
        let steps = path
            .iter()
            .enumerate()
            .map(|(k, &(s, a, c))| Step {
                state: s,
                action: a,
                cost: c,
                next_state: path.get(k + 1).map_or(0, |p| p.0),
            })
            .collect();
        BatchEntry {
            state,
            action,
            first_cost,
            next_state: next,
            rollout: Trajectory {
                start_state: next,
                steps,
                rng_stream_id: 0,
            },
        }
    }

    #[test]
    fn constant_costs_give_zero_targets() {
        let e = entry(0, 1, 3.0, 1, &[(1, 0, 3.0), (0, 0, 3.0), (1, 1, 3.0)]);
        for kind in [LambdaEstimator::LastCost, LambdaEstimator::MeanCost] {
            let batch = RolloutBatch::new(vec![e.clone()], 3, kind).unwrap();
            assert_eq!(batch.lambdas(), vec![3.0]);
            let rows = regression_rows(&batch, VisitMode::EveryVisit).unwrap();
            assert!(rows.iter().all(|r| r.target == 0.0));
        }
    }

    #[test]
    fn periodic_cycle_mean_is_exact() {
        let e = entry(1, 0, 1.0, 0, &[(0, 0, 0.0), (1, 0, 1.0), (0, 0, 0.0), (1, 0, 1.0)]);
        let batch = RolloutBatch::new(vec![e], 4, LambdaEstimator::MeanCost).unwrap();
        assert_eq!(batch.lambdas(), vec![0.5]);
        let t = regression_targets(&batch).unwrap();
        // 1 − 0.5 + (−0.5 + 0.5 − 0.5 + 0.5)
        assert_eq!(t[0].target, 0.5);
        let last = batch.with_lambda_estimator(LambdaEstimator::LastCost);
        assert_eq!(last.lambdas(), vec![1.0]);
    }

    #[test]
    fn visit_modes_add_rows() {
        let e = entry(0, 0, 1.0, 1, &[(1, 0, 1.0), (1, 0, 2.0), (0, 1, 3.0)]);
        let batch = RolloutBatch::new(vec![e], 3, LambdaEstimator::MeanCost).unwrap();
        assert_eq!(regression_rows(&batch, VisitMode::OneVisit).unwrap().len(), 1);
        let first = regression_rows(&batch, VisitMode::FirstVisit).unwrap();
        assert_eq!(first.len(), 3);
        // returns-to-go after the first visit of (1,0): (1−2)+(2−2)+(3−2)
        assert_eq!(first[1].target, 0.0);
        let every = regression_rows(&batch, VisitMode::EveryVisit).unwrap();
        assert_eq!(every.len(), 4);
        assert_eq!(every[2].target, 1.0);
        assert_eq!(every[3].target, 1.0);
    }

    #[test]
    fn malformed_batches_are_rejected() {
        let e = entry(0, 0, 1.0, 1, &[(1, 0, 1.0)]);
        assert!(RolloutBatch::new(vec![e.clone()], 2, LambdaEstimator::MeanCost).is_err());
        assert!(RolloutBatch::new(vec![e], 0, LambdaEstimator::MeanCost).is_err());
        let empty = RolloutBatch::new(vec![], 1, LambdaEstimator::MeanCost).unwrap();
        assert!(regression_targets(&empty).is_err());
    }

    fn instance(seed: u64) -> (Mdp, StochasticPolicy) {
        let mut rng = RngStreams::new(seed).stream(0);
        let mdp = random_unichain(&RandomMdpSpec::new(4, 2), &mut rng).unwrap();
        let pi = random_policy(4, 2, &mut rng).unwrap();
        (mdp, pi)
    }

    #[test]
    fn exact_targets_are_interpolated() {
        let (mdp, pi) = instance(1);
        let q = exact_values(&mdp, &pi).unwrap().q;
        let rows: Vec<RegressionRow> = (0..8)
            .map(|i| RegressionRow {
                state: i / 2,
                action: i % 2,
                target: q[i],
            })
            .collect();
        let method = FitMethod::Lsmc {
            visit_mode: VisitMode::OneVisit,
            lambda_estimator: LambdaEstimator::MeanCost,
        };
        let fit = lsmc_fit(&rows, &FeatureMap::tabular(4, 2), Ridge::Fixed(0.0), method.clone()).unwrap();
        for (w, q) in fit.weights.iter().zip(&q) {
            assert_abs_diff_eq!(*w, *q, epsilon = 1e-10);
        }
        let constant: Vec<RegressionRow> = rows.iter().map(|r| RegressionRow { target: 1.25, ..*r }).collect();
        let fit = lsmc_fit(&constant, &FeatureMap::constant(4, 2), Ridge::Fixed(0.0), method.clone()).unwrap();
        assert_abs_diff_eq!(fit.weights[0], 1.25, epsilon = 1e-12);
        assert!(lsmc_fit(&[], &FeatureMap::constant(4, 2), Ridge::Auto, method).is_err());
    }

    fn enumerated_transitions(mdp: &Mdp, pi: &StochasticPolicy, nu: &[f64]) -> Vec<Transition> {
        let mut out = Vec::new();
        for x in 0..mdp.num_states() {
            for a in 0..mdp.num_actions() {
                for &(y, p) in mdp.successors(x, a) {
                    for b in 0..mdp.num_actions() {
                        out.push(Transition {
                            state: x,
                            action: a,
                            cost: mdp.cost(x, a),
                            next_state: y,
                            next_action: b,
                            weight: nu[mdp.pair(x, a)] * p * pi.prob(y, b),
                        });
                    }
                }
            }
        }
        out
    }

    #[test]
    fn enumerated_lstd_matches_td_fixed_point() {
        for seed in 0..5 {
            let (mdp, pi) = instance(10 + seed);
            let nu = stationary(&mdp, &pi).unwrap().nu;
            let lambda = exact_values(&mdp, &pi).unwrap().lambda;
            let transitions = enumerated_transitions(&mdp, &pi, &nu);
            let mut rng = RngStreams::new(seed).stream(3);
            for features in [FeatureMap::tabular(4, 2), FeatureMap::random(4, 2, 3, &mut rng).unwrap()] {
                let td = td_fixed_point(&mdp, &pi, &nu, &features).unwrap();
                let fit = lstd_fit(&transitions, &features, lambda).unwrap();
                let (a, b) = (features.evaluate(&fit.weights), features.evaluate(&td.weights));
                for i in 0..8 {
                    assert_abs_diff_eq!(a[i], b[i], epsilon = 1e-8);
                }
                let lspe = lspe_fit(
                    &transitions,
                    &features,
                    lambda,
                    LspeOptions {
                        iterations: 2000,
                        ridge: Ridge::Fixed(0.0),
                        ..LspeOptions::default()
                    },
                    None,
                )
                .unwrap();
                assert!(lspe.diagnostics.iteration_radius.unwrap() <= 1.0 + 1e-9);
            }
        }
    }

    #[test]
    fn lstd_on_constant_costs_is_flat() {
        let (base, pi) = instance(4);
        let mdp = Mdp::new(4, 2, vec![0.7; 8], base.transitions().to_vec()).unwrap();
        let nu = stationary(&mdp, &pi).unwrap().nu;
        let transitions = enumerated_transitions(&mdp, &pi, &nu);
        let fit = lstd_fit(&transitions, &FeatureMap::tabular(4, 2), mean_cost(&transitions)).unwrap();
        assert!(fit.weights.iter().all(|w| w.abs() < 1e-10));
    }

    #[test]
    fn clipping_happens_at_evaluation() {
        let f = FeatureMap::tabular(1, 3);
        let est = QEstimate {
            weights: vec![-6.0, 0.5, 9.0],
            clip: None,
            diagnostics: FitDiagnostics {
                method: FitMethod::Lstd { lambda_hat: 0.0 },
                rows: 0,
                ridge: 0.0,
                moment_condition: 1.0,
                singular: false,
                iteration_radius: None,
            },
        };
        let clipped = clip_estimate(&est, -1.0, 4.0).unwrap();
        assert_eq!(clipped.weights, est.weights);
        assert_eq!(clipped.q_values(&f), vec![-1.0, 0.5, 3.0]);
        assert_eq!(clipped.clipped_pairs(&f), 2);
        assert!(clip_estimate(&est, 0.0, 0.0).is_err());
    }

    #[test]
    fn batches_round_trip_through_json() {
        let e = entry(0, 1, 0.25, 1, &[(1, 0, 0.1), (0, 1, 1.0 / 3.0)]);
        let batch = RolloutBatch::new(vec![e], 2, LambdaEstimator::LastCost).unwrap();
        let text = serde_json::to_string(&batch).unwrap();
        assert_eq!(serde_json::from_str::<RolloutBatch>(&text).unwrap(), batch);
    }
}
