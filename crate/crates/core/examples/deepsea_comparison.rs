// EE-Politex, Politex without exploration, Politex-LSPE and RLSVI on DeepSea.
// Only EE-Politex keeps collecting the corner reward in its target segments
// as the grid grows. The second table evaluates the last policy exactly from
// its own stationary distribution, without the help of exploration segments.
//
// cargo run --release --example deepsea_comparison [-- SEEDS]

use std::error::Error;

use politex_lab::harness::stats::median;
use politex_lab::harness::{deepsea_bench, BenchConfig, BenchRow};

pub fn run_example_with(seeds: u64, sizes: Vec<usize>) -> Result<(), Box<dyn Error>> {
    let cfg = BenchConfig {
        sizes: sizes.clone(),
        seeds: (0..seeds).collect(),
        ..BenchConfig::default()
    };
    let rows = deepsea_bench(&cfg);
    type Metric = fn(&BenchRow) -> Option<f64>;
    let tables: [(&str, Metric); 2] = [
        ("target-segment reward, last quarter", |r| r.target_average_reward),
        ("exact reward of the last policy", |r| r.final_policy_reward),
    ];
    for (title, metric) in tables {
        println!("{title}");
        print!("{:>4}", "N");
        for agent in &cfg.agents {
            print!(" {:>14}", agent.name());
        }
        println!(" {:>8}", "optimum");
        for &n in &sizes {
            print!("{n:>4}");
            for agent in &cfg.agents {
                let values: Vec<f64> = rows
                    .iter()
                    .filter(|r| r.n == n && r.agent == *agent)
                    .filter_map(metric)
                    .collect();
                print!(" {:>14.3}", median(&values).unwrap_or(f64::NAN));
            }
            let optimum = rows.iter().find(|r| r.n == n).map(|r| r.optimal_reward).unwrap_or(f64::NAN);
            println!(" {optimum:>8.3}");
        }
    }
    Ok(())
}

pub fn run_example() -> Result<(), Box<dyn Error>> {
    run_example_with(1, vec![2, 4])
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    let seeds = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(5);
    run_example_with(seeds, vec![2, 4, 6, 8, 10])
}
