use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use politex_lab::agents::AgentKind;
use politex_lab::envs::EnvSpec;
use politex_lab::estimation::VisitMode;
use politex_lab::exact::diagnostics;
use politex_lab::harness::{
    deepsea_bench, named_policy, run_experiment, run_sweep, write_ledger_csv, write_rows_csv, BaselineMode,
    BenchConfig, ExperimentConfig, Manifest,
};
use politex_lab::Result;

#[derive(Parser)]
#[command(name = "politex", version, about = "Average-cost RL experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one agent on one environment; writes ledger.csv and manifest.json.
    Run(RunArgs),
    /// Run a grid of environments, agents and seeds; writes cells.csv and summary.csv.
    Sweep(SweepArgs),
    /// Print exact diagnostics of a policy as JSON.
    Exact(ExactArgs),
    /// Compare the learners on DeepSea grids of several sizes.
    DeepseaBench(BenchArgs),
}

#[derive(Args)]
struct Common {
    /// Experiment file (.toml or .json); flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long = "T", alias = "steps")]
    steps: Option<usize>,
    #[arg(long)]
    visit_mode: Option<VisitMode>,
    #[arg(long)]
    baseline: Option<BaselineMode>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    env: Option<String>,
    #[arg(long)]
    agent: Option<AgentKind>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long = "env")]
    envs: Vec<String>,
    #[arg(long = "agent")]
    agents: Vec<AgentKind>,
    /// Seeds 0..N.
    #[arg(long)]
    seeds: Option<u64>,
}

#[derive(Args)]
struct ExactArgs {
    #[arg(long)]
    env: String,
    /// uniform, explore, optimal, action:K or file:PATH
    #[arg(long, default_value = "uniform")]
    policy: String,
    /// Include feature diagnostics for the environment's features.
    #[arg(long)]
    features: bool,
}

#[derive(Args)]
struct BenchArgs {
    /// Bench settings file (.toml or .json).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Seeds 0..N.
    #[arg(long)]
    seeds: Option<u64>,
    #[arg(long = "T", alias = "steps")]
    steps: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    sizes: Option<Vec<usize>>,
    #[arg(long)]
    all_visit_modes: bool,
    #[arg(long, default_value = "deepsea_bench.csv")]
    out: PathBuf,
}

fn load_experiment(common: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(t) = common.steps {
        cfg.agent.steps = t;
    }
    if let Some(v) = common.visit_mode {
        cfg.agent.visit_mode = v;
    }
    if let Some(b) = common.baseline {
        cfg.baseline = b;
    }
    if common.eta.is_some() {
        cfg.agent.eta = common.eta;
    }
    Ok(cfg)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

fn run(args: RunArgs) -> Result<()> {
    let mut cfg = load_experiment(&args.common)?;
    if let Some(env) = args.env {
        cfg.env = env;
    }
    if let Some(agent) = args.agent {
        cfg.agent.agent = agent;
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    let (_, out) = run_experiment(&cfg)?;
    let dir = &args.common.out_dir;
    write_ledger_csv(&out.ledger, create(&dir.join("ledger.csv"))?)?;
    let manifest = Manifest::new(&cfg, &out);
    serde_json::to_writer_pretty(create(&dir.join("manifest.json"))?, &manifest)?;
    println!(
        "{} on {}: {} steps, average cost {:.6}, regret {}",
        cfg.agent.agent,
        cfg.env,
        out.ledger.len(),
        out.ledger.average_cost(),
        manifest.regret.map_or("n/a".into(), |r| format!("{r:.3}"))
    );
    Ok(())
}

fn sweep(args: SweepArgs) -> Result<()> {
    let mut cfg = load_experiment(&args.common)?;
    if !args.envs.is_empty() {
        cfg.envs = args.envs;
    }
    if !args.agents.is_empty() {
        cfg.agents = args.agents;
    }
    if let Some(n) = args.seeds {
        cfg.seeds = (0..n).collect();
    }
    let (cells, summary) = run_sweep(&cfg);
    let dir = &args.common.out_dir;
    write_rows_csv(&cells, create(&dir.join("cells.csv"))?)?;
    write_rows_csv(&summary, create(&dir.join("summary.csv"))?)?;
    let failed = cells.iter().filter(|c| c.status != "ok").count();
    println!("{} cells, {failed} failed", cells.len());
    Ok(())
}

fn exact(args: ExactArgs) -> Result<()> {
    let env = args.env.parse::<EnvSpec>()?.build()?;
    let policy = named_policy(&env, &args.policy)?;
    let features = args.features.then_some(&env.default_features);
    let diag = diagnostics(&env.mdp, &policy, features)?;
    println!("{}", serde_json::to_string_pretty(&diag)?);
    Ok(())
}

fn bench(args: BenchArgs) -> Result<()> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path)?;
            if path.extension().is_some_and(|e| e == "json") {
                serde_json::from_str(&text)?
            } else {
                toml::from_str(&text)?
            }
        }
        None => BenchConfig::default(),
    };
    if let Some(n) = args.seeds {
        cfg.seeds = (0..n).collect();
    }
    if let Some(t) = args.steps {
        cfg.steps = t;
    }
    if let Some(sizes) = args.sizes {
        cfg.sizes = sizes;
    }
    cfg.all_visit_modes |= args.all_visit_modes;
    let rows = deepsea_bench(&cfg);
    write_rows_csv(&rows, create(&args.out)?)?;
    println!("{} rows written to {}", rows.len(), args.out.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => run(a),
        Command::Sweep(a) => sweep(a),
        Command::Exact(a) => exact(a),
        Command::DeepseaBench(a) => bench(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
