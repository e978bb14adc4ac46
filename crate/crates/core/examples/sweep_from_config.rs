// A declarative sweep: environments, agents and seeds from a TOML document,
// summarised as CSV on stdout.
//
// cargo run --release --example sweep_from_config

use std::error::Error;

use politex_lab::harness::{run_sweep, write_rows_csv};
use politex_lab::prelude::*;

const CONFIG: &str = r#"
env = "chain:p=0.3"
envs = ["chain:p=0.3", "random:S=4,A=2,seed=7"]
agents = ["ee-politex", "politex", "fixed-uniform"]
seeds = [0, 1, 2]

[agent]
steps = 20000
visit_mode = "first_visit"
"#;

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let config = ExperimentConfig::from_toml(CONFIG)?;
    let (cells, summary) = run_sweep(&config);
    eprintln!("{} cells", cells.len());
    let mut csv = Vec::new();
    write_rows_csv(&summary, &mut csv)?;
    print!("{}", String::from_utf8(csv)?);
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
