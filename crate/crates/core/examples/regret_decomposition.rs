// One EE-Politex run with its regret split into the price of exploration,
// the pseudo-regret of the played policies and the two noise terms.
//
// cargo run --release --example regret_decomposition

use std::error::Error;

use politex_lab::prelude::*;

pub fn run_example() -> Result<(), Box<dyn Error>> {
    for baseline in [BaselineMode::Exact, BaselineMode::Sampled] {
        let config = ExperimentConfig {
            env: "random:S=5,A=3,seed=2".into(),
            seed: 1,
            baseline,
            agent: AgentConfig::new(AgentKind::EePolitex, 50_000),
            ..ExperimentConfig::default()
        };
        let (env, out) = run_experiment(&config)?;
        let r = regret(&out.ledger)?;
        let d = decompose(&out.ledger)?;
        println!("{} with {baseline:?} baseline over {} steps", env.name, out.ledger.len());
        println!("  regret          {r:>10.2}");
        println!("  exploration     {:>10.2}", d.exploration);
        println!("  pseudo-regret   {:>10.2}", d.pseudo_regret);
        println!("  agent noise     {:>10.2}", d.agent_noise);
        println!("  baseline noise  {:>10.2}", d.baseline_noise);
        println!("  identity gap    {:>10.2e}", r - d.total());
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
