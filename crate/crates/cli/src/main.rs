//! `infogather`: world generation, training, evaluation and verification.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.

mod config;
mod policies;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use infogather::eval::{evaluate, instances, write_curve, write_final, write_trajectories, REPORT_FORMAT_VERSION};
use infogather::learner::{save_policy, MODEL_FORMAT_VERSION};
use infogather::sensor::SensorConfig;
use infogather::training::{train, Algorithm, TrainConfig};
use infogather::verify::{run_suite, SUITES};
use infogather::worldgen::{generate, load_dataset, save_dataset, CellEncoding, Generator, Split, FORMAT_VERSION};

use config::{config_error, ConfigError, EvalConfig, WorldgenConfig};

fn long_version() -> &'static str {
    Box::leak(
        format!(
            "{}\nworld format {FORMAT_VERSION}\nmodel format {MODEL_FORMAT_VERSION}\nreport format {REPORT_FORMAT_VERSION}",
            env!("CARGO_PKG_VERSION")
        )
        .into_boxed_str(),
    )
}

#[derive(Parser)]
#[command(name = "infogather", version, long_version = long_version(), about = "Learn adaptive information-gathering policies by imitating clairvoyant oracles")]
struct Cli {
    /// Worker threads for all parallel work (default: available cores).
    /// Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate train/test/validation world datasets.
    Worldgen(WorldgenArgs),
    /// Train a policy by imitating the clairvoyant oracle.
    Train(TrainArgs),
    /// Roll policies out on a test dataset and write reward curves.
    Eval(EvalArgs),
    /// Run the exhaustive reference suites.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct WorldgenArgs {
    /// parallel-lines, distributed-blocks or poisson-forest.
    #[arg(long)]
    generator: Option<String>,
    /// Worlds in the train and test splits.
    #[arg(long)]
    count: Option<usize>,
    #[arg(long)]
    validation_count: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Nodes sampled per world.
    #[arg(long)]
    nodes: Option<usize>,
    #[arg(long)]
    width: Option<usize>,
    #[arg(long)]
    height: Option<usize>,
    /// Splits to write; repeat or comma-separate (train, test, validation).
    #[arg(long, value_delimiter = ',')]
    split: Vec<String>,
    /// json or packed.
    #[arg(long)]
    format: Option<String>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    /// Training worlds.
    #[arg(long)]
    train: PathBuf,
    /// Held-out worlds used to pick the returned iterate.
    #[arg(long)]
    validation: PathBuf,
    /// reward-ft, qval-ft, reward-agg or qval-agg.
    #[arg(long)]
    algo: Option<String>,
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    episodes: Option<usize>,
    #[arg(long)]
    horizon: Option<usize>,
    /// Travel budget in meters; required by the qval algorithms.
    #[arg(long)]
    budget: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    actions_per_state: Option<usize>,
    #[command(flatten)]
    sensor: SensorArgs,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SensorArgs {
    /// Sensor range in meters.
    #[arg(long)]
    range: Option<f64>,
    #[arg(long)]
    rays: Option<usize>,
}

impl SensorArgs {
    fn is_set(&self) -> bool {
        self.range.is_some() || self.rays.is_some()
    }

    fn apply(&self, s: &mut SensorConfig) {
        if let Some(r) = self.range {
            s.max_range = r;
        }
        if let Some(n) = self.rays {
            s.num_rays = n;
        }
    }
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    test: PathBuf,
    /// Repeatable: a model file, random, oracle, oracle-greedy, oracle-gcb,
    /// or a heuristic name with optional `+motion` or `+motion=λ`.
    #[arg(long = "policy")]
    policies: Vec<String>,
    #[arg(long)]
    horizon: Option<usize>,
    #[arg(long)]
    budget: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    sensor: SensorArgs,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct VerifyArgs {
    /// Suites to run (default: all); repeat or comma-separate.
    #[arg(long, value_delimiter = ',')]
    suite: Vec<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if cause.is::<ConfigError>() {
            return 2;
        }
        if let Some(err) = cause.downcast_ref::<infogather::Error>() {
            return match err {
                infogather::Error::InvalidConfig(_) | infogather::Error::ConfigMismatch(_) => 2,
                _ => 1,
            };
        }
    }
    1
}

fn run(cli: Cli) -> Result<ExitCode> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(config_error("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    match cli.command {
        Command::Worldgen(a) => cmd_worldgen(a),
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Verify(a) => cmd_verify(a),
    }
}

fn create_out_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating output directory {}", dir.display()))
}

fn echo_config(dir: &Path, toml: &str) -> Result<()> {
    println!("# effective config\n{toml}");
    fs::write(dir.join("config.toml"), toml).context("writing config.toml")
}

fn cmd_worldgen(a: WorldgenArgs) -> Result<ExitCode> {
    let mut cfg: WorldgenConfig = match &a.config {
        Some(p) => config::load(p)?,
        None => WorldgenConfig::default(),
    };
    if let Some(g) = &a.generator {
        // a different generator starts from its default parameters
        if g != cfg.world.generator.name() {
            cfg.world.generator = Generator::by_name(g)?;
        }
    }
    if let Some(n) = a.count {
        cfg.count = n;
    }
    if let Some(n) = a.validation_count {
        cfg.validation_count = n;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(n) = a.nodes {
        cfg.world.num_nodes = n;
    }
    if let Some(w) = a.width {
        cfg.world.width = w;
    }
    if let Some(h) = a.height {
        cfg.world.height = h;
    }
    if !a.split.is_empty() {
        cfg.splits = a.split.clone();
    }
    if let Some(f) = &a.format {
        cfg.format = match f.as_str() {
            "json" => CellEncoding::Json,
            "packed" => CellEncoding::Packed,
            other => return Err(config_error(format!("unknown format '{other}' (json or packed)"))),
        };
    }
    let splits = cfg
        .splits
        .iter()
        .map(|s| s.parse::<Split>())
        .collect::<infogather::Result<Vec<_>>>()?;
    create_out_dir(&a.out)?;
    echo_config(&a.out, &config::to_toml(&cfg)?)?;
    let ext = match cfg.format {
        CellEncoding::Json => "json",
        CellEncoding::Packed => "igwd",
    };
    for split in splits {
        let count = if split == Split::Validation { cfg.validation_count } else { cfg.count };
        let data = generate(&cfg.world, count, split.seed(cfg.seed), split)?;
        let path = a.out.join(format!("{}.{ext}", split.as_str()));
        save_dataset(&data, &path, cfg.format)?;
        eprintln!("wrote {} worlds to {}", data.len(), path.display());
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_train(a: TrainArgs) -> Result<ExitCode> {
    let mut cfg: TrainConfig = match &a.config {
        Some(p) => config::load(p)?,
        None => TrainConfig::default(),
    };
    if let Some(name) = &a.algo {
        cfg.algorithm = Algorithm::by_name(name)
            .ok_or_else(|| config_error(format!("unknown algorithm '{name}'")))?;
    }
    if let Some(n) = a.iters {
        cfg.iterations = n;
    }
    if let Some(n) = a.episodes {
        cfg.episodes = n;
    }
    if let Some(t) = a.horizon {
        cfg.spec.horizon = t;
    }
    if a.budget.is_some() {
        cfg.spec.budget = a.budget;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(n) = a.actions_per_state {
        cfg.actions_per_state = n;
    }
    a.sensor.apply(&mut cfg.sensor);
    cfg.validate()?;

    let train_set = load_dataset(&a.train).with_context(|| format!("loading {}", a.train.display()))?;
    let val_set = load_dataset(&a.validation).with_context(|| format!("loading {}", a.validation.display()))?;
    create_out_dir(&a.out)?;
    echo_config(&a.out, &config::to_toml(&cfg)?)?;

    let train_worlds = instances(&train_set, cfg.sensor)?;
    let val_worlds = instances(&val_set, cfg.sensor)?;
    let out = train(&cfg, &train_worlds, &val_worlds)?;
    save_policy(&out.policy, &a.out.join("model.json"))?;
    out.report.write(&a.out.join("report.csv"), &a.out.join("report.txt"))?;
    print!("{}", out.report.to_text());
    eprintln!("wrote {}", a.out.join("model.json").display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_eval(a: EvalArgs) -> Result<ExitCode> {
    let mut cfg: EvalConfig = match &a.config {
        Some(p) => config::load(p)?,
        None => EvalConfig::default(),
    };
    if !a.policies.is_empty() {
        cfg.policies = a.policies.clone();
    }
    if cfg.policies.is_empty() {
        return Err(config_error("give at least one --policy"));
    }
    if let Some(t) = a.horizon {
        cfg.spec.horizon = t;
    }
    if a.budget.is_some() {
        cfg.spec.budget = a.budget;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    cfg.spec.validate()?;

    // models load before any long work so a bad path fails fast
    let loaded = cfg
        .policies
        .iter()
        .map(|p| policies::parse(p, &cfg.spec))
        .collect::<Result<Vec<_>>>()?;
    if cfg.sensor.is_none() || a.sensor.is_set() {
        let mut sensor = cfg
            .sensor
            .or_else(|| loaded.iter().find_map(|p| p.sensor()))
            .unwrap_or_default();
        a.sensor.apply(&mut sensor);
        cfg.sensor = Some(sensor);
    }
    let sensor = cfg.sensor.expect("resolved above");
    sensor.validate()?;

    let test_set = load_dataset(&a.test).with_context(|| format!("loading {}", a.test.display()))?;
    create_out_dir(&a.out)?;
    echo_config(&a.out, &config::to_toml(&cfg)?)?;
    let worlds = instances(&test_set, sensor)?;

    let mut summaries = Vec::new();
    let mut used_names: Vec<String> = Vec::new();
    for policy in &loaded {
        let (summary, trajs) = evaluate(policy.as_policy(), &worlds, &cfg.spec, cfg.seed)?;
        if let Some(bad) = trajs.iter().find(|t| matches!(t.terminal, infogather::eval::Terminal::Aborted(_))) {
            bail!("policy {} aborted on world {}: {:?}", summary.policy, bad.world, bad.terminal);
        }
        let dir_name = unique_name(&policies::file_stem(&summary.policy), &mut used_names);
        let dir = a.out.join(&dir_name);
        create_out_dir(&dir)?;
        write_curve(&dir.join("curve.csv"), &summary)?;
        write_trajectories(&dir.join("trajectories.jsonl"), &trajs)?;
        println!(
            "{:<28} final mean {:.4} ± {:.4}  median {:.4}  n {}",
            summary.policy, summary.final_mean, summary.final_ci_half, summary.final_median, summary.n
        );
        summaries.push(summary);
    }
    write_final(&a.out.join("final.csv"), &summaries)?;
    Ok(ExitCode::SUCCESS)
}

fn unique_name(base: &str, used: &mut Vec<String>) -> String {
    let mut name = base.to_string();
    let mut k = 2;
    while used.contains(&name) {
        name = format!("{base}-{k}");
        k += 1;
    }
    used.push(name.clone());
    name
}

fn cmd_verify(a: VerifyArgs) -> Result<ExitCode> {
    let names: Vec<String> = if a.suite.is_empty() {
        SUITES.iter().map(|s| s.to_string()).collect()
    } else {
        a.suite.clone()
    };
    if let Some(bad) = names.iter().find(|n| !SUITES.contains(&n.as_str())) {
        return Err(config_error(format!("unknown suite '{bad}' (known: {})", SUITES.join(", "))));
    }
    println!("{:<14} {:>6} {:>8} {:>8}  result  note", "suite", "cases", "failures", "secs");
    let mut all_ok = true;
    for name in &names {
        let r = run_suite(name, a.seed).expect("suite names checked above");
        println!(
            "{:<14} {:>6} {:>8} {:>8.2}  {:<6}  {}",
            r.name,
            r.cases,
            r.failures.len(),
            r.secs,
            if r.passed() { "PASS" } else { "FAIL" },
            r.note
        );
        for f in &r.failures {
            println!("    seed {}: {}", f.seed, f.detail);
        }
        all_ok &= r.passed();
    }
    Ok(if all_ok { ExitCode::SUCCESS } else { ExitCode::from(1) })
}
