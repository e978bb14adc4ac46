// The TD fixed point against the best linear fit: how much the projected
// Bellman solution inflates the approximation error, and what LSTD and LSPE
// recover from data.
//
// cargo run --example td_fixed_point

use std::error::Error;

use politex_lab::envs::random_policy;
use politex_lab::estimation::{transitions_from_batch, LspeOptions};
use politex_lab::prelude::*;

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let (s, a, d) = (6, 2, 3);
    println!("{:>4} {:>8} {:>10} {:>10} {:>10}", "seed", "rho", "best", "td", "slack");
    for seed in 0..5 {
        let mut rng = RngStreams::new(seed).stream(0);
        let mdp = random_unichain(&RandomMdpSpec::new(s, a), &mut rng)?;
        let pi = random_policy(s, a, &mut rng)?;
        let features = FeatureMap::random(s, a, d, &mut rng)?;
        let nu = stationary(&mdp, &pi)?.nu;
        let td = td_fixed_point(&mdp, &pi, &nu, &features)?;
        println!(
            "{seed:>4} {:>8.3} {:>10.4} {:>10.4} {:>10.2e}",
            td.rho, td.best_error, td.td_error, td.slack
        );
    }

    // on-policy data: LSTD and LSPE approach the TD weights
    let mut rng = RngStreams::new(42).stream(0);
    let mdp = random_unichain(&RandomMdpSpec::new(s, a), &mut rng)?;
    let pi = random_policy(s, a, &mut rng)?;
    let features = FeatureMap::random(s, a, d, &mut rng)?;
    let nu = stationary(&mdp, &pi)?.nu;
    let td = td_fixed_point(&mdp, &pi, &nu, &features)?;
    let (batch, _) = collect_data(&mdp, &pi, &pi, 2000, 50, 5, 0, RngStreams::new(1).stream(0))?;
    let transitions = transitions_from_batch(&batch);
    let lambda_hat = politex_lab::estimation::mean_cost(&transitions);
    let lstd = lstd_fit(&transitions, &features, lambda_hat)?;
    let opts = LspeOptions {
        iterations: 200,
        ..LspeOptions::default()
    };
    let lspe = lspe_fit(&transitions, &features, lambda_hat, opts, None)?;
    println!("exact TD weights {:.3?}", td.weights);
    println!("LSTD             {:.3?}", lstd.weights);
    println!("LSPE             {:.3?}", lspe.weights);
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
