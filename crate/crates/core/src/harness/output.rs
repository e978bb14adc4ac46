//! CSV and JSON emission.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::ledger::{decompose, regret, Decomposition, RegretLedger};
use crate::agents::{RunOutput, Schedule};
use crate::error::Result;

#[derive(Debug, Clone, Serialize)]
struct LedgerRow {
    t: usize,
    state: usize,
    action: usize,
    cost: f64,
    segment_kind: &'static str,
    policy_id: u32,
    cum_cost: f64,
    cum_regret: Option<f64>,
}

/// One row per environment step; `cum_regret` is empty without a baseline.
pub fn write_ledger_csv<W: Write>(ledger: &RegretLedger, out: W) -> Result<()> {
    let cum_regret = ledger.cumulative_regret().ok();
    let mut w = csv::Writer::from_writer(out);
    let mut cum_cost = 0.0;
    for (i, s) in ledger.steps.iter().enumerate() {
        cum_cost += s.cost;
        w.serialize(LedgerRow {
            t: s.t,
            state: s.state,
            action: s.action,
            cost: s.cost,
            segment_kind: s.segment.name(),
            policy_id: s.policy_id,
            cum_cost,
            cum_regret: cum_regret.as_ref().map(|r| r[i]),
        })?;
    }
    w.flush()?;
    Ok(())
}

/// Writes any serialisable rows as CSV.
pub fn write_rows_csv<W: Write, T: Serialize>(rows: &[T], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub seed: u64,
    pub env: String,
    pub config: ExperimentConfig,
    pub schedule: Schedule,
    pub steps: usize,
    pub eta: Option<f64>,
    pub q_max: Option<f64>,
    pub excitation: Option<f64>,
    pub lambda_star: Option<f64>,
    pub regret: Option<f64>,
    pub decomposition: Option<Decomposition>,
    pub phases: usize,
}

impl Manifest {
    pub fn new(config: &ExperimentConfig, output: &RunOutput) -> Self {
        Self {
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed: output.seed,
            env: config.env.clone(),
            config: config.clone(),
            schedule: output.schedule,
            steps: output.ledger.len(),
            eta: output.eta,
            q_max: output.q_max,
            excitation: output.excitation,
            lambda_star: output.ledger.baseline.as_ref().map(|b| b.lambda_star),
            regret: regret(&output.ledger).ok(),
            decomposition: decompose(&output.ledger).ok(),
            phases: output.phases.len(),
        }
    }
}
