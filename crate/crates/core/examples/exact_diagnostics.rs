// Exact quantities of a policy: average cost, differential values under the
// `μᵀV = 0` gauge, mixing, and the average-cost optimum.
//
// cargo run --example exact_diagnostics

use std::error::Error;

use politex_lab::envs::{always_action_one_policy, random_policy};
use politex_lab::exact::diagnostics;
use politex_lab::prelude::*;

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let chain = two_state_chain(0.3, (0.0, 1.0))?;
    let ex = exact_values(&chain, &StochasticPolicy::uniform(2, 1))?;
    println!("two-state chain: lambda {:.4}, V {:?}, mu {:?}", ex.lambda, ex.v, ex.mu);

    let mut rng = RngStreams::new(3).stream(0);
    let mdp = random_unichain(&RandomMdpSpec::new(6, 3), &mut rng)?;
    let pi = random_policy(6, 3, &mut rng)?;
    let features = FeatureMap::random(6, 3, 4, &mut rng)?;
    let diag = diagnostics(&mdp, &pi, Some(&features))?;
    println!(
        "random 6x3: lambda {:.4}, kappa {:?}, Bellman residual {:.1e}",
        diag.lambda.unwrap_or(f64::NAN),
        diag.kappa,
        diag.bellman_residual.unwrap_or(f64::NAN)
    );
    let opt = optimal_average_cost_policy(&mdp)?;
    println!(
        "  optimum {:.4} after {} sweeps, actions {:?}",
        opt.lambda, opt.iterations, opt.actions
    );

    for n in [2, 4, 8] {
        let sea = deepsea(n)?;
        let best = optimal_average_cost_policy(&sea)?;
        let right = average_cost(&sea, &always_action_one_policy(n))?;
        println!(
            "deepsea N={n}: optimal reward {:.3}, always-right reward {:.3}",
            -best.lambda, -right
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
