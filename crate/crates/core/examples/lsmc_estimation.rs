// Least-squares Monte-Carlo estimates from soft-reset rollouts, for the three
// visit modes, against the exact action values.
//
// cargo run --example lsmc_estimation

use std::error::Error;

use politex_lab::envs::random_policy;
use politex_lab::exact::with_uniform_actions;
use politex_lab::prelude::*;

fn nu_error(estimate: &[f64], exact: &[f64], nu: &[f64]) -> f64 {
    estimate
        .iter()
        .zip(exact)
        .zip(nu)
        .map(|((e, q), w)| w * (e - q).powi(2))
        .sum::<f64>()
        .sqrt()
}

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let (s, a) = (6, 2);
    let mut rng = RngStreams::new(77).stream(0);
    let mdp = random_unichain(&RandomMdpSpec::new(s, a), &mut rng)?;
    let target = random_policy(s, a, &mut rng)?;
    let explore = StochasticPolicy::uniform(s, a);
    let features = FeatureMap::tabular(s, a);
    let q = exact_values(&mdp, &target)?.q;
    let nu = with_uniform_actions(&stationary(&mdp, &explore)?.mu, a);

    println!("{:>6} {:>10} {:>10} {:>10}", "m", "one", "first", "every");
    for m in [100, 400, 1600, 6400] {
        let (batch, _) = collect_data(&mdp, &target, &explore, m, 20, 3, 0, RngStreams::new(m as u64).stream(0))?;
        let errs: Vec<f64> = [VisitMode::OneVisit, VisitMode::FirstVisit, VisitMode::EveryVisit]
            .into_iter()
            .map(|mode| lsmc_fit_batch(&batch, &features, mode, Ridge::Auto).map(|e| nu_error(&e.q_values(&features), &q, &nu)))
            .collect::<politex_lab::Result<_>>()?;
        println!("{m:>6} {:>10.4} {:>10.4} {:>10.4}", errs[0], errs[1], errs[2]);
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
