//! Regret accounting, experiment orchestration and output formats.

mod baseline;
mod config;
mod experiments;
pub mod ledger;
mod output;
pub mod stats;

pub use baseline::{attach_baseline, make_baseline, named_policy, BaselineMode};
pub use config::ExperimentConfig;
pub use experiments::{
    deepsea_bench, run_experiment, run_sweep, sublinearity_probe, with_baseline, BenchConfig, BenchRow, CellResult,
    ProbeRow, ProbeTable, SummaryRow, TAIL_FRACTION,
};
pub use ledger::{decompose, regret, Baseline, BaselineCosts, Decomposition, LedgerStep, RegretLedger, SegmentKind};
pub use output::{write_ledger_csv, write_rows_csv, Manifest};
