//! Ground-truth quantities for small MDPs.
//!
//! Everything here is exact linear algebra on the induced chain: stationary
//! distributions, average cost and differential values (gauge
//! `μ_π^T V_π = 0`), one-step mixing coefficients, the projected-Bellman TD
//! fixed point and an average-cost optimal policy.

use log::warn;
use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureMap;
use crate::linalg::{self, Mat, Vector};
use crate::mdp::{policy_cost, policy_transition_matrix, state_action_kernel, Mdp, StochasticPolicy};

/// Condition number above which the fundamental-matrix solve is reported
/// as numerically singular.
const MAX_CONDITION: f64 = 1e13;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationaryDistributions {
    pub mu: Vec<f64>,
    pub nu: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactValues {
    pub lambda: f64,
    pub q: Vec<f64>,
    pub v: Vec<f64>,
    pub mu: Vec<f64>,
    pub condition: f64,
}

/// Closed communicating classes of the support digraph of a stochastic
/// matrix. A chain is unichain iff there is exactly one.
pub fn closed_classes(p: &Mat) -> Vec<Vec<usize>> {
    let n = p.nrows();
    let mut graph = DiGraph::<(), ()>::with_capacity(n, n * 2);
    let nodes: Vec<_> = (0..n).map(|_| graph.add_node(())).collect();
    for x in 0..n {
        for y in 0..n {
            if p[(x, y)] > 0.0 {
                graph.add_edge(nodes[x], nodes[y], ());
            }
        }
    }
    let sccs = tarjan_scc(&graph);
    let mut component = vec![0usize; n];
    for (c, scc) in sccs.iter().enumerate() {
        for node in scc {
            component[node.index()] = c;
        }
    }
    let mut classes: Vec<Vec<usize>> = sccs
        .iter()
        .enumerate()
        .filter(|(c, scc)| {
            scc.iter().all(|node| {
                let x = node.index();
                (0..n).all(|y| p[(x, y)] <= 0.0 || component[y] == *c)
            })
        })
        .map(|(_, scc)| {
            let mut states: Vec<usize> = scc.iter().map(|node| node.index()).collect();
            states.sort_unstable();
            states
        })
        .collect();
    classes.sort();
    classes
}

pub fn check_unichain(p: &Mat) -> Result<()> {
    let closed = closed_classes(p).len();
    if closed == 1 {
        Ok(())
    } else {
        Err(Error::NotUnichain {
            closed_classes: closed,
        })
    }
}

/// Left fixed point of a unichain stochastic matrix.
pub fn stationary_of(p: &Mat) -> Result<Vec<f64>> {
    check_unichain(p)?;
    let n = p.nrows();
    // (I − P^T) μ = 0 with the last equation replaced by Σ μ = 1
    let mut a = Mat::identity(n, n) - p.transpose();
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    let mut rhs = Vector::zeros(n);
    rhs[n - 1] = 1.0;
    let mu = a.clone().lu().solve(&rhs).ok_or_else(|| Error::Numerical {
        message: "stationary system is singular".into(),
        condition: linalg::condition_number(&a),
    })?;
    // clean rounding noise so the result is a probability vector
    let mut mu: Vec<f64> = mu.iter().map(|&m| m.max(0.0)).collect();
    let total: f64 = mu.iter().sum();
    mu.iter_mut().for_each(|m| *m /= total);
    Ok(mu)
}

pub fn stationary(mdp: &Mdp, policy: &StochasticPolicy) -> Result<StationaryDistributions> {
    let p = policy_transition_matrix(mdp, policy)?;
    let mu = stationary_of(&p)?;
    let nu = state_action_distribution(&mu, policy);
    Ok(StationaryDistributions { mu, nu })
}

/// `ν(x, a) = μ(x) π(a|x)`.
pub fn state_action_distribution(mu: &[f64], policy: &StochasticPolicy) -> Vec<f64> {
    let na = policy.num_actions();
    let mut nu = vec![0.0; mu.len() * na];
    for (x, &m) in mu.iter().enumerate() {
        for a in 0..na {
            nu[x * na + a] = m * policy.prob(x, a);
        }
    }
    nu
}

/// `μ ⊗ u`: state distribution paired with uniform actions.
pub fn with_uniform_actions(mu: &[f64], num_actions: usize) -> Vec<f64> {
    let u = 1.0 / num_actions as f64;
    mu.iter().flat_map(|&m| std::iter::repeat_n(m * u, num_actions)).collect()
}

pub fn exact_values(mdp: &Mdp, policy: &StochasticPolicy) -> Result<ExactValues> {
    let p = policy_transition_matrix(mdp, policy)?;
    let mu = stationary_of(&p)?;
    let c_pi = policy_cost(mdp, policy);
    let lambda: f64 = mu.iter().zip(&c_pi).map(|(m, c)| m * c).sum();
    let s = mdp.num_states();

    // (I − P + 1 μ^T) V = c_π − λ 1 enforces both the Poisson equation and
    // μ^T V = 0.
    let mut a = Mat::identity(s, s) - &p;
    for x in 0..s {
        for y in 0..s {
            a[(x, y)] += mu[y];
        }
    }
    let condition = linalg::condition_number(&a);
    if !condition.is_finite() || condition > MAX_CONDITION {
        return Err(Error::Numerical {
            message: "differential-value system is singular".into(),
            condition,
        });
    }
    let rhs = Vector::from_iterator(s, c_pi.iter().map(|c| c - lambda));
    let v = a.lu().solve(&rhs).ok_or_else(|| Error::Numerical {
        message: "differential-value solve failed".into(),
        condition,
    })?;
    let v: Vec<f64> = v.iter().copied().collect();

    let mut q = vec![0.0; mdp.num_pairs()];
    for x in 0..s {
        for act in 0..mdp.num_actions() {
            let ev: f64 = mdp.successors(x, act).iter().map(|&(y, pr)| pr * v[y]).sum();
            q[mdp.pair(x, act)] = mdp.cost(x, act) - lambda + ev;
        }
    }
    Ok(ExactValues {
        lambda,
        q,
        v,
        mu,
        condition,
    })
}

/// Average cost only.
pub fn average_cost(mdp: &Mdp, policy: &StochasticPolicy) -> Result<f64> {
    let p = policy_transition_matrix(mdp, policy)?;
    let mu = stationary_of(&p)?;
    let c_pi = policy_cost(mdp, policy);
    Ok(mu.iter().zip(&c_pi).map(|(m, c)| m * c).sum())
}

/// Long-run average cost from each start state, `P* c_π` with `P*` the
/// Cesàro limit of the chain. Constant and equal to [`average_cost`] for
/// unichain policies; still defined when a deterministic policy splits the
/// chain into several closed classes.
pub fn gain(mdp: &Mdp, policy: &StochasticPolicy) -> Result<Vec<f64>> {
    let p = policy_transition_matrix(mdp, policy)?;
    let n = p.nrows();
    if check_unichain(&p).is_ok() {
        let mu = stationary_of(&p)?;
        let c_pi = policy_cost(mdp, policy);
        return Ok(vec![mu.iter().zip(&c_pi).map(|(m, c)| m * c).sum(); n]);
    }
    // the lazy chain is aperiodic with the same limit, and squaring reaches
    // P^(2^k) quickly
    let mut limit = (p + Mat::identity(n, n)) * 0.5;
    for _ in 0..64 {
        let next = &limit * &limit;
        let change = (&next - &limit).amax();
        limit = next;
        if change < 1e-15 {
            break;
        }
    }
    let c_pi = Vector::from_vec(policy_cost(mdp, policy));
    Ok((limit * c_pi).iter().copied().collect())
}

/// `‖Q − (c − λ1 + H Q)‖_∞`.
pub fn bellman_residual(mdp: &Mdp, policy: &StochasticPolicy, lambda: f64, q: &[f64]) -> Result<f64> {
    let h = state_action_kernel(mdp, policy)?;
    let qv = Vector::from_row_slice(q);
    let hq = h * &qv;
    Ok((0..q.len())
        .map(|i| (q[i] - (mdp.costs()[i] - lambda + hq[i])).abs())
        .fold(0.0, f64::max))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixingEstimate {
    /// Worst L1 contraction factor over point-mass probes.
    pub contraction_factor: f64,
    /// `None` when some probe fails to contract (κ infinite).
    pub kappa: Option<f64>,
    pub horizon: usize,
}

impl MixingEstimate {
    pub fn is_finite(&self) -> bool {
        self.kappa.is_some()
    }

    pub fn kappa_or_inf(&self) -> f64 {
        self.kappa.unwrap_or(f64::INFINITY)
    }
}

/// Smallest κ with `‖(μ − δ_x)^T P^h‖₁ ≤ exp(−h/κ) ‖μ − δ_x‖₁` for every
/// state x. `horizon = 1` is the one-step coefficient.
pub fn mixing_coefficient(mdp: &Mdp, policy: &StochasticPolicy, horizon: usize) -> Result<MixingEstimate> {
    let horizon = horizon.max(1);
    let p = policy_transition_matrix(mdp, policy)?;
    let Ok(mu) = stationary_of(&p) else {
        return Ok(MixingEstimate {
            contraction_factor: 1.0,
            kappa: None,
            horizon,
        });
    };
    let mut ph = p.clone();
    for _ in 1..horizon {
        ph = &ph * &p;
    }
    let n = mu.len();
    let mut worst: f64 = 0.0;
    for x in 0..n {
        let diff: Vec<f64> = (0..n).map(|y| mu[y] - if y == x { 1.0 } else { 0.0 }).collect();
        let before: f64 = diff.iter().map(|d| d.abs()).sum();
        if before < 1e-15 {
            continue;
        }
        let after: f64 = (0..n)
            .map(|y| (0..n).map(|z| diff[z] * ph[(z, y)]).sum::<f64>().abs())
            .sum();
        worst = worst.max(after / before);
    }
    let kappa = if worst >= 1.0 - 1e-12 {
        None
    } else if worst <= 0.0 {
        Some(f64::MIN_POSITIVE)
    } else {
        Some(-(horizon as f64) / worst.ln())
    };
    Ok(MixingEstimate {
        contraction_factor: worst,
        kappa,
        horizon,
    })
}

/// Per-policy κ and their supremum (infinite if any is).
pub fn kappa_supremum(mdp: &Mdp, policies: &[StochasticPolicy]) -> Result<(Vec<MixingEstimate>, Option<f64>)> {
    let estimates = policies
        .iter()
        .map(|pi| mixing_coefficient(mdp, pi, 1))
        .collect::<Result<Vec<_>>>()?;
    let mut sup: Option<f64> = Some(0.0);
    for e in &estimates {
        sup = match (sup, e.kappa) {
            (Some(s), Some(k)) => Some(s.max(k)),
            _ => None,
        };
    }
    Ok((estimates, sup))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TdFixedPoint {
    pub weights: Vec<f64>,
    pub lambda: f64,
    /// `‖(I − ΠH)^{-1} ΠH (I − Π)‖²_ν` (pseudo-inverse when `I − ΠH` is
    /// singular along the constant direction).
    pub rho: f64,
    /// `‖ΠH‖_ν`.
    pub contraction: f64,
    /// `‖Q − Ψ w^TD‖_ν`.
    pub td_error: f64,
    /// `min_w ‖Q − Ψ w‖_ν`.
    pub best_error: f64,
    /// `√(1 + ρ) · best_error − td_error`; non-negative when the bound holds.
    pub slack: f64,
    /// True when the projected system was rank-deficient and the gauge
    /// `ν^T Ψ w = 0` selected the solution.
    pub gauge_fixed: bool,
    pub condition: f64,
}

/// Solves the projected Bellman equation `Ψw = Π_ν(c − λ_π + H_π Ψ w)` and
/// measures the approximation-error inflation against the best linear fit.
pub fn td_fixed_point(
    mdp: &Mdp,
    target: &StochasticPolicy,
    nu: &[f64],
    features: &FeatureMap,
) -> Result<TdFixedPoint> {
    features.check_shape(mdp.num_states(), mdp.num_actions())?;
    let sa = mdp.num_pairs();
    if nu.len() != sa {
        return Err(Error::LengthMismatch {
            expected: sa,
            actual: nu.len(),
        });
    }
    if nu.iter().any(|&w| !(w > 0.0)) {
        return Err(Error::Config("TD weighting must be strictly positive".into()));
    }
    let exact = exact_values(mdp, target)?;
    let psi = features.matrix();
    let h = state_action_kernel(mdp, target)?;
    let d = Mat::from_diagonal(&Vector::from_row_slice(nu));

    let psi_t_d = psi.transpose() * &d;
    let a = &psi_t_d * (&psi - &h * &psi);
    let centered = Vector::from_iterator(sa, mdp.costs().iter().map(|c| c - exact.lambda));
    let b = &psi_t_d * &centered;
    let gauge = psi.transpose() * Vector::from_row_slice(nu);
    let condition = linalg::condition_number(&a);
    let gram = &psi_t_d * &psi;
    let (w, gauge_fixed) = linalg::solve_with_gauge(&a, &b, &gauge, linalg::spectral_norm(&gram));
    let residual = (&a * &w - &b).amax();
    if !w.iter().all(|v| v.is_finite()) || residual > 1e-8 * (1.0 + b.amax()) {
        return Err(Error::TdUndefined(format!(
            "projected system is singular and inconsistent (residual {residual:.3e})"
        )));
    }

    // everything below in ν-weighted coordinates: M ↦ D^{1/2} M D^{-1/2}
    let sqrt_nu: Vec<f64> = nu.iter().map(|v| v.sqrt()).collect();
    let weigh = |m: &Mat| {
        let mut out = m.clone();
        for i in 0..sa {
            for j in 0..sa {
                out[(i, j)] *= sqrt_nu[i] / sqrt_nu[j];
            }
        }
        out
    };
    let proj = &psi * linalg::pseudo_inverse(&gram) * &psi_t_d;
    let ident = Mat::identity(sa, sa);
    let proj_h = &proj * &h;
    let m_w = weigh(&(&ident - &proj_h));
    let m_inv = if linalg::is_rank_deficient(&m_w) {
        linalg::pseudo_inverse(&m_w)
    } else {
        m_w.clone().try_inverse().unwrap_or_else(|| linalg::pseudo_inverse(&m_w))
    };
    let b_w = m_inv * weigh(&proj_h) * weigh(&(&ident - &proj));
    let rho = linalg::spectral_norm(&b_w).powi(2);
    let contraction = linalg::spectral_norm(&weigh(&proj_h));

    let q = Vector::from_row_slice(&exact.q);
    let fitted = &psi * &w;
    let td_err: Vec<f64> = (0..sa).map(|i| q[i] - fitted[i]).collect();
    let best = &q - &proj * &q;
    let td_error = linalg::weighted_norm(&td_err, nu);
    let best_error = linalg::weighted_norm(best.as_slice(), nu);
    Ok(TdFixedPoint {
        weights: w.iter().copied().collect(),
        lambda: exact.lambda,
        rho,
        contraction,
        td_error,
        best_error,
        slack: (1.0 + rho).sqrt() * best_error - td_error,
        gauge_fixed,
        condition,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimalPolicy {
    pub policy: StochasticPolicy,
    pub actions: Vec<usize>,
    /// Average cost of the returned policy (exact when it is unichain,
    /// otherwise the value-iteration gain).
    pub lambda: f64,
    pub gain_estimate: f64,
    pub iterations: usize,
    pub converged: bool,
    pub unichain: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct RviOptions {
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Self-loop weight of the aperiodicity transform `τI + (1 − τ)P`.
    pub aperiodicity: f64,
}

impl Default for RviOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-10,
            max_iterations: 2_000_000,
            aperiodicity: 0.5,
        }
    }
}

pub fn optimal_average_cost_policy(mdp: &Mdp) -> Result<OptimalPolicy> {
    optimal_average_cost_policy_with(mdp, RviOptions::default())
}

/// Relative value iteration on the aperiodicity-transformed MDP, which has
/// the same stationary distributions (hence gains) as the original, so
/// periodic chains such as DeepSea converge.
pub fn optimal_average_cost_policy_with(mdp: &Mdp, opts: RviOptions) -> Result<OptimalPolicy> {
    let (s, na) = (mdp.num_states(), mdp.num_actions());
    let tau = opts.aperiodicity;
    let mut h = vec![0.0; s];
    let mut next = vec![0.0; s];
    let mut converged = false;
    let mut iterations = 0;
    let mut gain = 0.0;
    while iterations < opts.max_iterations {
        iterations += 1;
        for x in 0..s {
            let mut best = f64::INFINITY;
            for a in 0..na {
                let ev: f64 = mdp.successors(x, a).iter().map(|&(y, p)| p * h[y]).sum();
                best = best.min(mdp.cost(x, a) + tau * h[x] + (1.0 - tau) * ev);
            }
            next[x] = best;
        }
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for x in 0..s {
            let d = next[x] - h[x];
            lo = lo.min(d);
            hi = hi.max(d);
        }
        gain = 0.5 * (lo + hi);
        let anchor = next[0];
        for x in 0..s {
            h[x] = next[x] - anchor;
        }
        if hi - lo <= opts.tolerance {
            converged = true;
            break;
        }
    }
    if !converged {
        warn!("relative value iteration stopped after {iterations} iterations without converging");
    }

    let scale = 1.0 + h.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let actions: Vec<usize> = (0..s)
        .map(|x| {
            // h solves the transformed problem, whose transitions carry
            // weight 1 − τ
            let vals: Vec<f64> = (0..na)
                .map(|a| {
                    mdp.cost(x, a)
                        + (1.0 - tau) * mdp.successors(x, a).iter().map(|&(y, p)| p * h[y]).sum::<f64>()
                })
                .collect();
            let min = vals.iter().cloned().fold(f64::INFINITY, f64::min);
            vals.iter().position(|&v| v <= min + 1e-9 * scale).unwrap_or(0)
        })
        .collect();
    let policy = StochasticPolicy::deterministic(na, &actions)?;
    let (lambda, unichain) = match average_cost(mdp, &policy) {
        Ok(l) => (l, true),
        Err(Error::NotUnichain { .. }) => (gain, false),
        Err(e) => return Err(e),
    };
    Ok(OptimalPolicy {
        policy,
        actions,
        lambda,
        gain_estimate: gain,
        iterations,
        converged,
        unichain,
    })
}

/// Flat diagnostics record for one (MDP, policy) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactDiagnostics {
    pub num_states: usize,
    pub num_actions: usize,
    pub unichain: bool,
    pub lambda: Option<f64>,
    pub kappa: Option<f64>,
    pub contraction_factor: f64,
    pub condition_number: Option<f64>,
    pub bellman_residual: Option<f64>,
    pub excitation: Option<f64>,
    pub td_rho: Option<f64>,
    pub td_contraction: Option<f64>,
    pub td_fit_error: Option<f64>,
    pub td_error_bound: Option<f64>,
    pub td_bound_slack: Option<f64>,
    pub q: Option<Vec<f64>>,
    pub v: Option<Vec<f64>>,
    pub mu: Option<Vec<f64>>,
}

/// Collects every exact diagnostic available for the pair; quantities that
/// are undefined (e.g. for a multichain policy) are left empty.
pub fn diagnostics(mdp: &Mdp, policy: &StochasticPolicy, features: Option<&FeatureMap>) -> Result<ExactDiagnostics> {
    let p = policy_transition_matrix(mdp, policy)?;
    let unichain = check_unichain(&p).is_ok();
    let mixing = mixing_coefficient(mdp, policy, 1)?;
    let mut out = ExactDiagnostics {
        num_states: mdp.num_states(),
        num_actions: mdp.num_actions(),
        unichain,
        lambda: None,
        kappa: mixing.kappa,
        contraction_factor: mixing.contraction_factor,
        condition_number: None,
        bellman_residual: None,
        excitation: None,
        td_rho: None,
        td_contraction: None,
        td_fit_error: None,
        td_error_bound: None,
        td_bound_slack: None,
        q: None,
        v: None,
        mu: None,
    };
    if !unichain {
        return Ok(out);
    }
    let values = exact_values(mdp, policy)?;
    out.lambda = Some(values.lambda);
    out.condition_number = Some(values.condition);
    out.bellman_residual = Some(bellman_residual(mdp, policy, values.lambda, &values.q)?);
    let nu = state_action_distribution(&values.mu, policy);
    if let Some(f) = features {
        out.excitation = Some(crate::features::excitation(f, &nu)?);
        if nu.iter().all(|&w| w > 0.0) {
            if let Ok(td) = td_fixed_point(mdp, policy, &nu, f) {
                out.td_rho = Some(td.rho);
                out.td_contraction = Some(td.contraction);
                out.td_fit_error = Some(td.td_error);
                out.td_error_bound = Some((1.0 + td.rho).sqrt() * td.best_error);
                out.td_bound_slack = Some(td.slack);
            }
        }
    }
    out.q = Some(values.q);
    out.v = Some(values.v);
    out.mu = Some(values.mu);
    Ok(out)
}
