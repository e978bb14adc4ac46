// Median regret of EE-Politex on a small tabular problem at growing
// horizons, with the fitted log-log slope. Constant features, which cannot
// tell actions apart, give linear regret for contrast.
//
// cargo run --release --example sublinearity_probe

use std::error::Error;

use politex_lab::harness::sublinearity_probe;
use politex_lab::prelude::*;

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let mdp = random_unichain(&RandomMdpSpec::new(4, 2), &mut RngStreams::new(11).stream(0))?;
    let tabular = Environment {
        name: "random 4x2".into(),
        default_features: FeatureMap::tabular(4, 2),
        default_exploration: StochasticPolicy::uniform(4, 2),
        exploration_length: Some(1),
        mdp,
    };
    let constant = Environment {
        default_features: FeatureMap::constant(4, 2),
        ..tabular.clone()
    };
    let config = AgentConfig {
        attach_exact: false,
        ..AgentConfig::new(AgentKind::EePolitex, 0)
    };
    let horizons = [10_000, 40_000, 160_000];
    let seeds: Vec<u64> = (0..5).collect();
    for (label, env) in [("tabular", &tabular), ("constant", &constant)] {
        let table = sublinearity_probe(env, &config, &horizons, &seeds)?;
        println!("{label} features");
        for row in &table.rows {
            println!(
                "  T={:>7}  median regret {:>9.1}  per step {:.4}",
                row.steps, row.median_regret, row.median_regret_per_step
            );
        }
        println!("  slope {:.3}", table.slope.unwrap_or(f64::NAN));
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
