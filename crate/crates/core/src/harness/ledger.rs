//! Step-level regret accounting.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentKind {
    Explore,
    UniformAction,
    Target,
}

impl SegmentKind {
    pub fn name(&self) -> &'static str {
        match self {
            SegmentKind::Explore => "explore",
            SegmentKind::UniformAction => "uniform_action",
            SegmentKind::Target => "target",
        }
    }
}

/// Policy ids used in ledgers: the exploration policy, the uniform policy of
/// the CollectData action step, then one id per phase.
pub const EXPLORE_POLICY_ID: u32 = 0;
pub const UNIFORM_POLICY_ID: u32 = 1;

pub fn phase_policy_id(phase: usize) -> u32 {
    2 + phase as u32
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LedgerStep {
    pub t: usize,
    pub state: usize,
    pub action: usize,
    pub cost: f64,
    pub segment: SegmentKind,
    pub policy_id: u32,
    /// Exact average cost of the policy that chose the action.
    pub lambda: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum BaselineCosts {
    /// The baseline sum is replaced by `T·λ*`.
    Exact,
    /// Costs of a simulated trajectory of the comparator.
    Sampled { costs: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Baseline {
    pub lambda_star: f64,
    pub actions: Vec<usize>,
    pub costs: BaselineCosts,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RegretLedger {
    pub steps: Vec<LedgerStep>,
    pub baseline: Option<Baseline>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    /// Price of exploration: non-target steps.
    pub exploration: f64,
    /// Pseudo-regret of the played target policies.
    pub pseudo_regret: f64,
    /// Deviation of agent costs from the played policies' averages.
    pub agent_noise: f64,
    /// Deviation of the baseline from its average.
    pub baseline_noise: f64,
}

impl Decomposition {
    pub fn total(&self) -> f64 {
        self.exploration + self.pseudo_regret + self.agent_noise + self.baseline_noise
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SegmentCounts {
    pub explore: usize,
    pub uniform_action: usize,
    pub target: usize,
}

impl RegretLedger {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn total_cost(&self) -> f64 {
        self.steps.iter().map(|s| s.cost).sum()
    }

    pub fn average_cost(&self) -> f64 {
        if self.steps.is_empty() {
            0.0
        } else {
            self.total_cost() / self.steps.len() as f64
        }
    }

    pub fn segment_counts(&self) -> SegmentCounts {
        let mut c = SegmentCounts::default();
        for s in &self.steps {
            match s.segment {
                SegmentKind::Explore => c.explore += 1,
                SegmentKind::UniformAction => c.uniform_action += 1,
                SegmentKind::Target => c.target += 1,
            }
        }
        c
    }

    /// Mean cost over the target-segment steps in the trailing `fraction` of
    /// the run (all target steps when `fraction >= 1`).
    pub fn target_average_cost(&self, fraction: f64) -> Option<f64> {
        let start = self.tail_start(fraction);
        let (sum, n) = self.steps[start..]
            .iter()
            .filter(|s| s.segment == SegmentKind::Target)
            .fold((0.0, 0usize), |(a, n), s| (a + s.cost, n + 1));
        (n > 0).then(|| sum / n as f64)
    }

    /// Mean cost over every step in the trailing `fraction` of the run.
    pub fn tail_average_cost(&self, fraction: f64) -> Option<f64> {
        let tail = &self.steps[self.tail_start(fraction)..];
        (!tail.is_empty()).then(|| tail.iter().map(|s| s.cost).sum::<f64>() / tail.len() as f64)
    }

    fn tail_start(&self, fraction: f64) -> usize {
        let f = fraction.clamp(0.0, 1.0);
        let keep = (self.steps.len() as f64 * f).round() as usize;
        self.steps.len() - keep.min(self.steps.len())
    }

    fn baseline(&self) -> Result<&Baseline> {
        self.baseline
            .as_ref()
            .ok_or_else(|| Error::MissingLambda("ledger has no baseline attached".into()))
    }

    /// Per-step baseline costs `c*_t` (λ* repeated under exact substitution).
    fn baseline_cost(&self, baseline: &Baseline, t: usize) -> f64 {
        match &baseline.costs {
            BaselineCosts::Exact => baseline.lambda_star,
            BaselineCosts::Sampled { costs } => costs[t],
        }
    }

    fn check_baseline_len(&self, baseline: &Baseline) -> Result<()> {
        if let BaselineCosts::Sampled { costs } = &baseline.costs {
            if costs.len() != self.steps.len() {
                return Err(Error::LengthMismatch {
                    expected: self.steps.len(),
                    actual: costs.len(),
                });
            }
        }
        Ok(())
    }

    /// Running regret after each step.
    pub fn cumulative_regret(&self) -> Result<Vec<f64>> {
        let baseline = self.baseline()?;
        self.check_baseline_len(baseline)?;
        let mut acc = 0.0;
        Ok(self
            .steps
            .iter()
            .enumerate()
            .map(|(t, s)| {
                acc += s.cost - self.baseline_cost(baseline, t);
                acc
            })
            .collect())
    }
}

/// `R_T = Σ c_t − Σ c*_t`, or `Σ c_t − T·λ*` under exact substitution.
pub fn regret(ledger: &RegretLedger) -> Result<f64> {
    let baseline = ledger.baseline()?;
    ledger.check_baseline_len(baseline)?;
    Ok(match &baseline.costs {
        BaselineCosts::Exact => ledger.total_cost() - ledger.len() as f64 * baseline.lambda_star,
        BaselineCosts::Sampled { costs } => ledger.total_cost() - costs.iter().sum::<f64>(),
    })
}

/// Splits the regret into exploration price, pseudo-regret and the two noise
/// terms. The noise terms run over every step, so the four terms add up to
/// [`regret`] exactly.
pub fn decompose(ledger: &RegretLedger) -> Result<Decomposition> {
    let baseline = ledger.baseline()?;
    ledger.check_baseline_len(baseline)?;
    let lam_star = baseline.lambda_star;
    let mut d = Decomposition {
        exploration: 0.0,
        pseudo_regret: 0.0,
        agent_noise: 0.0,
        baseline_noise: 0.0,
    };
    for (t, s) in ledger.steps.iter().enumerate() {
        let lam = s
            .lambda
            .ok_or_else(|| Error::MissingLambda(format!("step {t} has no exact λ; run with exact attachments enabled")))?;
        match s.segment {
            SegmentKind::Target => d.pseudo_regret += lam - lam_star,
            _ => d.exploration += lam - lam_star,
        }
        d.agent_noise += s.cost - lam;
        d.baseline_noise += lam_star - ledger.baseline_cost(baseline, t);
    }
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn step(t: usize, cost: f64, segment: SegmentKind, lambda: f64) -> LedgerStep {
        LedgerStep {
            t,
            state: 0,
            action: 0,
            cost,
            segment,
            policy_id: 0,
            lambda: Some(lambda),
        }
    }

    fn ledger(costs: BaselineCosts) -> RegretLedger {
        RegretLedger {
            steps: vec![
                step(0, 1.0, SegmentKind::Explore, 0.8),
                step(1, 0.0, SegmentKind::UniformAction, 0.5),
                step(2, 2.0, SegmentKind::Target, 0.6),
                step(3, 0.0, SegmentKind::Target, 0.6),
            ],
            baseline: Some(Baseline {
                lambda_star: 0.25,
                actions: vec![0],
                costs,
            }),
        }
    }

    #[test]
    fn regret_by_hand() {
        let l = ledger(BaselineCosts::Exact);
        assert_abs_diff_eq!(regret(&l).unwrap(), 3.0 - 1.0, epsilon = 1e-15);
        let d = decompose(&l).unwrap();
        assert_abs_diff_eq!(d.exploration, 0.55 + 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(d.pseudo_regret, 0.7, epsilon = 1e-15);
        assert_abs_diff_eq!(d.agent_noise, 3.0 - 2.5, epsilon = 1e-15);
        assert_eq!(d.baseline_noise, 0.0);
        assert_abs_diff_eq!(d.total(), 2.0, epsilon = 1e-15);
        assert_eq!(l.cumulative_regret().unwrap(), vec![0.75, 0.5, 2.25, 2.0]);
    }

    #[test]
    fn sampled_baseline() {
        let l = ledger(BaselineCosts::Sampled {
            costs: vec![0.0, 1.0, 0.0, 0.0],
        });
        assert_abs_diff_eq!(regret(&l).unwrap(), 2.0, epsilon = 1e-15);
        let d = decompose(&l).unwrap();
        assert_abs_diff_eq!(d.baseline_noise, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(d.total(), 2.0, epsilon = 1e-15);

        let short = ledger(BaselineCosts::Sampled { costs: vec![0.0] });
        assert!(matches!(regret(&short), Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn missing_pieces_are_errors() {
        let mut l = ledger(BaselineCosts::Exact);
        l.steps[2].lambda = None;
        assert!(matches!(decompose(&l), Err(Error::MissingLambda(_))));
        l.baseline = None;
        assert!(regret(&l).is_err());
    }

    #[test]
    fn tail_averages_and_counts() {
        let l = ledger(BaselineCosts::Exact);
        assert_eq!(
            l.segment_counts(),
            SegmentCounts {
                explore: 1,
                uniform_action: 1,
                target: 2
            }
        );
        assert_eq!(l.target_average_cost(1.0), Some(1.0));
        assert_eq!(l.target_average_cost(0.25), Some(0.0));
        assert_eq!(l.target_average_cost(0.0), None);
        assert_eq!(l.tail_average_cost(0.5), Some(1.0));
        assert_eq!(l.average_cost(), 0.75);
    }
}
