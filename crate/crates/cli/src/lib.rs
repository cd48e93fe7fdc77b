//! Command-line runner: single episodes, seeded batches, the forward-simulation
//! comparison and scenario presets.

pub mod output;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use roundabout_core::geometry::RoundaboutLayout;
use roundabout_core::planner::Budget;
use roundabout_core::simulator::{
    forward_simulation, run_episode, EpisodeMetrics, ForwardSimConfig, ForwardSimulation, PlannerKind, ScenarioConfig,
};

use crate::output::{sig9, trajectory_bytes, write_forward, write_summary, ArtifactSink, RunManifest};

pub const PRESETS: [&str; 3] = ["ego_only", "two_vehicle", "multi_vehicle"];

#[derive(Debug, Parser)]
#[command(name = "roundabout", version, about = "Roundabout merging planner and microsimulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one episode and write its trajectory, metrics and manifest.
    Run(RunArgs),
    /// Run every planner and seed combination and write a summary table.
    Batch(BatchArgs),
    /// Compare constant-heading and policy-based rollouts against the path.
    ForwardSim(ForwardArgs),
    /// Print a built-in scenario as JSON.
    Preset {
        #[arg(value_parser = clap::builder::PossibleValuesParser::new(PRESETS))]
        name: String,
    },
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct ScenarioSource {
    /// Scenario JSON file.
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    /// Built-in scenario instead of a file.
    #[arg(long, value_parser = clap::builder::PossibleValuesParser::new(PRESETS))]
    pub preset: Option<String>,
}

#[derive(Debug, Args)]
pub struct Common {
    #[command(flatten)]
    pub source: ScenarioSource,
    /// Output directory.
    #[arg(long, env = "ROUNDABOUT_OUT", default_value = "out")]
    pub out: PathBuf,
    /// Simulations per decision, overriding the scenario.
    #[arg(long)]
    pub sims: Option<u64>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub common: Common,
    /// One of policy, plain, baseline.
    #[arg(long, value_parser = parse_planner)]
    pub planner: PlannerKind,
    /// Overrides the scenario seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct BatchArgs {
    #[command(flatten)]
    pub common: Common,
    /// Comma-separated planner kinds.
    #[arg(long, value_delimiter = ',', value_parser = parse_planner, default_value = "policy,plain,baseline")]
    pub planners: Vec<PlannerKind>,
    /// Inclusive range `a..b`, or a single seed.
    #[arg(long, value_parser = parse_seeds)]
    pub seeds: SeedRange,
    /// Worker threads; 0 lets the pool decide.
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
}

#[derive(Debug, Args)]
pub struct ForwardArgs {
    #[arg(long, env = "ROUNDABOUT_OUT", default_value = "out")]
    pub out: PathBuf,
    /// Layout taken from this scenario file instead of the default.
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    #[arg(long, default_value_t = 3)]
    pub entry_arm: usize,
    #[arg(long, default_value_t = 1)]
    pub exit_arm: usize,
    #[arg(long, default_value_t = 5.5)]
    pub speed: f64,
    #[arg(long, default_value_t = 100)]
    pub steps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedRange {
    pub first: u64,
    pub last: u64,
}

impl SeedRange {
    pub fn iter(self) -> impl Iterator<Item = u64> {
        self.first..=self.last
    }
}

pub fn parse_planner(s: &str) -> Result<PlannerKind, String> {
    s.trim().parse()
}

pub fn parse_seeds(s: &str) -> Result<SeedRange, String> {
    let num = |x: &str| x.trim().parse::<u64>().map_err(|e| format!("bad seed '{x}': {e}"));
    let (first, last) = match s.split_once("..") {
        Some((a, b)) => (num(a)?, num(b.trim_start_matches('='))?),
        None => (num(s)?, num(s)?),
    };
    if last < first {
        return Err(format!("empty seed range {s}"));
    }
    Ok(SeedRange { first, last })
}

pub fn load_scenario(source: &ScenarioSource) -> Result<(ScenarioConfig<f64>, String)> {
    match (&source.scenario, &source.preset) {
        (Some(path), _) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let cfg = ScenarioConfig::from_json(&text).with_context(|| format!("loading {}", path.display()))?;
            Ok((cfg, path.display().to_string()))
        }
        (None, Some(name)) => {
            let cfg = ScenarioConfig::preset(name).with_context(|| format!("unknown preset {name}"))?;
            Ok((cfg, format!("preset:{name}")))
        }
        (None, None) => bail!("either --scenario or --preset is required"),
    }
}

fn configure(common: &Common) -> Result<(ScenarioConfig<f64>, String)> {
    let (mut cfg, origin) = load_scenario(&common.source)?;
    if let Some(n) = common.sims {
        cfg.planner.budget = Budget::Simulations(n);
    }
    Ok((cfg, origin))
}

pub fn execute(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Run(args) => cmd_run(args).map(|_| ()),
        Command::Batch(args) => cmd_batch(args).map(|_| ()),
        Command::ForwardSim(args) => cmd_forward_sim(args).map(|_| ()),
        Command::Preset { name } => {
            let cfg = ScenarioConfig::<f64>::preset(name).context("unknown preset")?;
            println!("{}", serde_json::to_string_pretty(&cfg)?);
            Ok(())
        }
    }
}

/// Runs one episode and writes `trajectory.csv` and `metrics.json` below `dir`.
fn episode_files(cfg: &ScenarioConfig<f64>, kind: PlannerKind, sink: &mut ArtifactSink, dir: &Path) -> Result<EpisodeMetrics> {
    let result = run_episode(cfg, kind).with_context(|| format!("{kind} seed {}", cfg.seed))?;
    sink.write(dir.join("trajectory.csv"), &trajectory_bytes(&result.log)?)?;
    sink.write_json(dir.join("metrics.json"), &result.metrics)?;
    Ok(result.metrics)
}

pub fn cmd_run(args: &RunArgs) -> Result<RunManifest> {
    let (mut cfg, origin) = configure(&args.common)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    let mut sink = ArtifactSink::create(&args.common.out)?;
    let m = episode_files(&cfg, args.planner, &mut sink, Path::new(""))?;
    println!(
        "{} {} seed {}: reward {} time {} s collisions {} brakes {} end {:?}",
        cfg.name,
        m.planner,
        m.seed,
        sig9(m.total_reward),
        sig9(m.travel_time),
        m.collision_events,
        m.emergency_brake_events,
        m.end_reason
    );
    sink.finish(RunManifest {
        command: "run".into(),
        scenario: Some(origin),
        planners: vec![args.planner.name().into()],
        seeds: Some((cfg.seed, cfg.seed)),
        out_dir: PathBuf::new(),
        artifacts: Vec::new(),
    })
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        (xs[n / 2 - 1] + xs[n / 2]) / 2.0
    }
}

pub fn cmd_batch(args: &BatchArgs) -> Result<(RunManifest, Vec<EpisodeMetrics>)> {
    let (cfg, origin) = configure(&args.common)?;
    if args.planners.is_empty() {
        bail!("no planners given");
    }
    let runs: Vec<(PlannerKind, u64)> = args
        .planners
        .iter()
        .flat_map(|&k| args.seeds.iter().map(move |s| (k, s)))
        .collect();
    let root = args.common.out.clone();
    fs::create_dir_all(&root).with_context(|| format!("creating output directory {}", root.display()))?;
    let work = || {
        runs.par_iter()
            .map(|&(kind, seed)| {
                let mut c = cfg.clone();
                c.seed = seed;
                let dir = PathBuf::from("runs").join(format!("{kind}-seed{seed}"));
                let mut sink = ArtifactSink::create(&root)?;
                let m = episode_files(&c, kind, &mut sink, &dir)?;
                log::info!("{kind} seed {seed}: reward {:.1} time {:.1}", m.total_reward, m.travel_time);
                Ok((m, vec![dir.join("trajectory.csv"), dir.join("metrics.json")]))
            })
            .collect::<Result<Vec<_>>>()
    };
    let done = if args.jobs > 0 {
        rayon::ThreadPoolBuilder::new().num_threads(args.jobs).build()?.install(work)?
    } else {
        work()?
    };
    let mut sink = ArtifactSink::create(&root)?;
    let mut rows = Vec::with_capacity(done.len());
    for (m, files) in done {
        sink.adopt(files);
        rows.push(m);
    }
    let mut summary = Vec::new();
    write_summary(&mut summary, &rows)?;
    sink.write("summary.csv", &summary)?;

    let mut by_kind: BTreeMap<&str, Vec<&EpisodeMetrics>> = BTreeMap::new();
    for m in &rows {
        by_kind.entry(m.planner.name()).or_default().push(m);
    }
    println!("planner   runs  median_reward  median_time  collisions  brakes  safety_violations");
    for (name, ms) in &by_kind {
        println!(
            "{name:<9} {:>4}  {:>13}  {:>11}  {:>10}  {:>6}  {:>17}",
            ms.len(),
            sig9(median(ms.iter().map(|m| m.total_reward).collect())),
            sig9(median(ms.iter().map(|m| m.travel_time).collect())),
            ms.iter().map(|m| m.collision_events).sum::<u32>(),
            ms.iter().map(|m| m.emergency_brake_events).sum::<u32>(),
            ms.iter().map(|m| m.safety_violations).sum::<u32>(),
        );
    }
    let manifest = sink.finish(RunManifest {
        command: "batch".into(),
        scenario: Some(origin),
        planners: args.planners.iter().map(|k| k.name().to_string()).collect(),
        seeds: Some((args.seeds.first, args.seeds.last)),
        out_dir: PathBuf::new(),
        artifacts: Vec::new(),
    })?;
    Ok((manifest, rows))
}

pub fn cmd_forward_sim(args: &ForwardArgs) -> Result<(RunManifest, ForwardSimulation<f64>)> {
    let (layout, origin) = match &args.scenario {
        Some(path) => {
            let source = ScenarioSource {
                scenario: Some(path.clone()),
                preset: None,
            };
            (load_scenario(&source)?.0.layout, Some(path.display().to_string()))
        }
        None => (RoundaboutLayout::four_way(), None),
    };
    let fcfg = ForwardSimConfig {
        entry_arm: args.entry_arm,
        exit_arm: args.exit_arm,
        speed: args.speed,
        steps: args.steps,
        ..ForwardSimConfig::default()
    };
    let fs = forward_simulation(&layout, &fcfg)?;
    let mut sink = ArtifactSink::create(&args.out)?;
    for (name, samples) in [("truth", &fs.truth), ("constant", &fs.constant), ("policy", &fs.policy)] {
        let mut buf = Vec::new();
        write_forward(&mut buf, samples, fcfg.dt)?;
        sink.write(format!("{name}.csv"), &buf)?;
    }
    let policy_max = ForwardSimulation::max_error(&fs.policy);
    let constant_after = ForwardSimulation::max_error_after(&fs.constant, fs.ring_entry_step);
    sink.write_json(
        "forward_sim.json",
        &serde_json::json!({
            "ring_entry_step": fs.ring_entry_step,
            "policy_max_lateral_error": policy_max,
            "constant_max_lateral_error": ForwardSimulation::max_error(&fs.constant),
            "constant_max_lateral_error_after_ring_entry": constant_after,
        }),
    )?;
    println!(
        "ring entry at step {}; max lateral error: policy {} m, constant after entry {} m",
        fs.ring_entry_step,
        sig9(policy_max),
        sig9(constant_after)
    );
    let manifest = sink.finish(RunManifest {
        command: "forward-sim".into(),
        scenario: origin,
        planners: Vec::new(),
        seeds: None,
        out_dir: PathBuf::new(),
        artifacts: Vec::new(),
    })?;
    Ok((manifest, fs))
}
