//! The `ipp` command line.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::{Config, FeatureToggles, Variant};
use crate::environment::write_episode_log;
use crate::error::{Error, Result};
use crate::evaluation::{
    mean_std, run_benchmark, run_mission, write_benchmark_csv, write_mission_metrics, MapScope, PlannerSpec,
    TerrainSource, TrialStats,
};
use crate::gridmap::GroundTruthMap;
use crate::policy::{Actor, SampleMode};
use crate::raster::ingest_raster;
use crate::training::{write_train_log, Trainer};

#[derive(Debug, Parser)]
#[command(name = "ipp", version, about = "Multi-agent informative path planning")]
pub struct Cli {
    /// Configuration file; built-in defaults when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Worker threads for mission-level parallelism (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train an actor-critic team.
    Train(TrainArgs),
    /// Benchmark planners on paired missions.
    Evaluate(EvaluateArgs),
    /// Train and evaluate with feature planes or training variants changed.
    AblateFeatures(AblateArgs),
    /// Threshold a scalar raster into ground truth.
    Ingest(IngestArgs),
    /// Benchmark the coverage planner at every flight level.
    SweepCoverageAltitude(SweepArgs),
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Overrides `train.variant`.
    #[arg(long)]
    pub variant: Option<String>,
    /// Record elapsed seconds in the training log (breaks byte-identical reruns).
    #[arg(long)]
    pub wallclock: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PlannerKind {
    Random,
    Coverage,
    GreedyIg,
    Learned,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PolicyMode {
    Sample,
    Argmax,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Planners to compare; repeat or separate with commas.
    #[arg(long = "planner", value_enum, value_delimiter = ',', required = true)]
    pub planners: Vec<PlannerKind>,
    /// Actor checkpoint for the learned planner.
    #[arg(long)]
    pub actor_weights: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "sample")]
    pub policy_mode: PolicyMode,
    /// Overrides `env.num_agents`.
    #[arg(long)]
    pub agents: Option<usize>,
    /// Overrides `env.comm_radius`; `inf` for unlimited range.
    #[arg(long)]
    pub comm_radius: Option<String>,
    #[arg(long, default_value_t = 50)]
    pub missions: usize,
    /// Ground-truth text grid used for every mission instead of random terrains.
    #[arg(long)]
    pub terrain: Option<PathBuf>,
    /// Also write per-mission metrics, episode logs and belief maps.
    #[arg(long)]
    pub dump_maps: bool,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    /// Plane toggles such as `entropy_map=off`; each one is a separate run.
    #[arg(long = "toggle", value_delimiter = ',')]
    pub toggles: Vec<String>,
    /// Training variants to compare, each a separate run.
    #[arg(long, value_delimiter = ',')]
    pub variants: Vec<String>,
    /// Evaluation missions per trained actor.
    #[arg(long, default_value_t = 20)]
    pub missions: usize,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Text raster: header `W H r_M`, then row-major values.
    #[arg(long)]
    pub raster: PathBuf,
    #[arg(long, default_value_t = 25.0, allow_negative_numbers = true)]
    pub threshold: f64,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long, default_value_t = 50)]
    pub missions: usize,
}

/// Parsed configuration, reproducibility record and output location of one
/// command.
pub struct RunManifest {
    pub command: String,
    pub seed: u64,
    pub version: &'static str,
    pub config: Config,
    pub outputs: Vec<PathBuf>,
}

impl RunManifest {
    pub fn write(&self, dir: &Path) -> Result<()> {
        create_dir(dir)?;
        let cfg_path = dir.join("config.cfg");
        write_file(&cfg_path, self.config.to_text().as_bytes())?;
        let mut s = String::new();
        s.push_str(&format!("command = {}\n", self.command));
        s.push_str(&format!("seed = {}\n", self.seed));
        s.push_str(&format!("version = {}\n", self.version));
        s.push_str("config = config.cfg\n");
        for o in &self.outputs {
            s.push_str(&format!("output = {}\n", o.display()));
        }
        s.push_str("\n# resolved configuration\n");
        for line in self.config.to_text().lines() {
            s.push_str("# ");
            s.push_str(line);
            s.push('\n');
        }
        write_file(&dir.join("manifest.txt"), s.as_bytes())
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn with_writer(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    f(&mut w).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

fn load_config(path: Option<&Path>) -> Result<Config> {
    match path {
        Some(p) => Config::load(p),
        None => Ok(Config::default()),
    }
}

fn command_line() -> String {
    std::env::args().collect::<Vec<_>>().join(" ")
}

/// Runs a parsed command line.
pub fn run(cli: Cli) -> Result<()> {
    if cli.threads > 0 {
        // a pool may already exist when called twice in one process
        let _ = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global();
    }
    let cfg = load_config(cli.config.as_deref())?;
    match &cli.command {
        Command::Train(a) => cmd_train(&cli, cfg, a),
        Command::Evaluate(a) => cmd_evaluate(&cli, cfg, a),
        Command::AblateFeatures(a) => cmd_ablate(&cli, cfg, a),
        Command::Ingest(a) => cmd_ingest(&cli, cfg, a),
        Command::SweepCoverageAltitude(a) => cmd_sweep(&cli, cfg, a),
    }
}

fn manifest(cli: &Cli, config: &Config, outputs: Vec<PathBuf>) -> RunManifest {
    RunManifest {
        command: command_line(),
        seed: cli.seed,
        version: env!("CARGO_PKG_VERSION"),
        config: config.clone(),
        outputs,
    }
}

/// Trains with `cfg` into `dir`: training log, periodic and final checkpoints.
pub fn train_into(cfg: &Config, seed: u64, dir: &Path, wallclock: bool) -> Result<Trainer> {
    let mut trainer = Trainer::new(cfg.clone(), seed)?;
    trainer.record_wallclock(wallclock);
    let ckpt = dir.join("checkpoints");
    let every = cfg.train.checkpoint_every;
    trainer.train(|t| {
        let block = t.log().last().map(|r| r.block).unwrap_or(0);
        if every > 0 && (block + 1) % every == 0 {
            t.save_checkpoint(&ckpt.join(format!("block_{block:05}")))?;
        }
        Ok(())
    })?;
    trainer.save_checkpoint(&ckpt.join("final"))?;
    with_writer(&dir.join("train_log.csv"), |w| write_train_log(w, trainer.log()))?;
    Ok(trainer)
}

fn cmd_train(cli: &Cli, mut cfg: Config, a: &TrainArgs) -> Result<()> {
    if let Some(v) = &a.variant {
        cfg.train.variant = v.parse()?;
    }
    cfg.validate()?;
    let out = &cli.out;
    manifest(cli, &cfg, vec![out.join("train_log.csv"), out.join("checkpoints")]).write(out)?;
    let trainer = train_into(&cfg, cli.seed, out, a.wallclock)?;
    if let Some(r) = trainer.log().last() {
        println!(
            "trained {} missions in {} blocks; last block mean return {:.4}",
            r.missions_done,
            r.block + 1,
            r.mean_return
        );
    }
    Ok(())
}

fn parse_radius(s: &str) -> Result<f64> {
    match s.trim() {
        "inf" => Ok(f64::INFINITY),
        t => t
            .parse::<f64>()
            .ok()
            .filter(|r| *r >= 0.0)
            .ok_or_else(|| Error::Usage(format!("bad communication radius {t:?}"))),
    }
}

fn load_terrain(path: &Path) -> Result<GroundTruthMap> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    GroundTruthMap::read_text(std::io::BufReader::new(f))
}

fn cmd_evaluate(cli: &Cli, mut cfg: Config, a: &EvaluateArgs) -> Result<()> {
    if a.missions < 2 {
        return Err(Error::Usage(format!("--missions must be at least 2, got {}", a.missions)));
    }
    if let Some(n) = a.agents {
        cfg.env.num_agents = n;
    }
    if let Some(r) = &a.comm_radius {
        cfg.env.comm_radius = parse_radius(r)?;
    }
    cfg.validate()?;
    let mode = match a.policy_mode {
        PolicyMode::Sample => SampleMode::Sample,
        PolicyMode::Argmax => SampleMode::Argmax,
    };
    let mut specs = Vec::new();
    for p in &a.planners {
        specs.push(match p {
            PlannerKind::Random => PlannerSpec::Random,
            PlannerKind::Coverage => PlannerSpec::Coverage,
            PlannerKind::GreedyIg => PlannerSpec::GreedyIg,
            PlannerKind::Learned => {
                let path = a
                    .actor_weights
                    .as_ref()
                    .ok_or_else(|| Error::Usage("the learned planner needs --actor-weights".into()))?;
                PlannerSpec::Learned(Arc::new(Actor::load(path)?), mode)
            }
        });
    }
    let terrain = match &a.terrain {
        Some(p) => TerrainSource::Fixed(Arc::new(load_terrain(p)?)),
        None => TerrainSource::Random,
    };
    let out = &cli.out;
    let mut outputs = vec![out.join("benchmark.csv")];
    if a.dump_maps {
        outputs.push(out.join("missions"));
    }
    manifest(cli, &cfg, outputs).write(out)?;
    let stats = run_benchmark(&specs, a.missions, cli.seed, &cfg.env, &terrain)?;
    with_writer(&out.join("benchmark.csv"), |w| write_benchmark_csv(w, &stats))?;
    if a.dump_maps {
        dump_missions(&specs, a.missions, cli.seed, &cfg, &terrain, &out.join("missions"))?;
    }
    print_summary(&stats);
    Ok(())
}

fn print_summary(stats: &[TrialStats]) {
    for s in stats {
        if let Some(c) = s.checkpoints.last() {
            println!(
                "{:10} final ROI entropy {:.4} ± {:.4}   F1 {:.4} ± {:.4}",
                s.planner, c.entropy_mean, c.entropy_std, c.f1_mean, c.f1_std
            );
        }
    }
}

fn dump_missions(
    specs: &[PlannerSpec],
    missions: usize,
    seed: u64,
    cfg: &Config,
    terrain: &TerrainSource,
    dir: &Path,
) -> Result<()> {
    create_dir(dir)?;
    for m in 0..missions {
        for (k, spec) in specs.iter().enumerate() {
            let r = run_mission(spec, &cfg.env, terrain, seed, m, MapScope::Global)?;
            let stem = format!("{:02}_{}_{m:03}", k, spec.name());
            with_writer(&dir.join(format!("{stem}_metrics.csv")), |w| write_mission_metrics(w, &r.metrics))?;
            with_writer(&dir.join(format!("{stem}_episode.csv")), |w| write_episode_log(w, &r.log))?;
            with_writer(&dir.join(format!("{stem}_belief.pgm")), |w| r.final_map.write_pgm(w))?;
            if k == 0 {
                with_writer(&dir.join(format!("terrain_{m:03}.pgm")), |w| r.terrain.write_pgm(w))?;
            }
        }
    }
    Ok(())
}

pub const ABLATION_HEADER: &str = "run,variant,features,final_block_return,entropy_mean,entropy_std,f1_mean,f1_std";

fn feature_list(t: &FeatureToggles) -> String {
    FeatureToggles::NAMES
        .iter()
        .filter(|n| t.get(n).unwrap_or(false))
        .copied()
        .collect::<Vec<_>>()
        .join(" ")
}

fn parse_toggle(spec: &str) -> Result<(String, bool)> {
    let (name, value) = spec
        .split_once('=')
        .ok_or_else(|| Error::Usage(format!("toggle {spec:?} must look like `name=on` or `name=off`")))?;
    let on = match value.trim() {
        "on" => true,
        "off" => false,
        v => return Err(Error::Usage(format!("toggle value must be on or off, got {v:?}"))),
    };
    let name = name.trim().to_string();
    FeatureToggles::default().set(&name, on)?;
    Ok((name, on))
}

fn cmd_ablate(cli: &Cli, cfg: Config, a: &AblateArgs) -> Result<()> {
    let mut runs: Vec<(String, Config)> = Vec::new();
    let toggles = a.toggles.iter().map(|t| parse_toggle(t)).collect::<Result<Vec<_>>>()?;
    let variants = a.variants.iter().map(|v| v.parse::<Variant>()).collect::<Result<Vec<_>>>()?;
    runs.push(("base".into(), cfg.clone()));
    for (name, on) in &toggles {
        let mut c = cfg.clone();
        c.features.set(name, *on)?;
        runs.push((format!("{name}-{}", if *on { "on" } else { "off" }), c));
    }
    for v in &variants {
        if *v == cfg.train.variant {
            continue;
        }
        let mut c = cfg.clone();
        c.train.variant = *v;
        runs.push((format!("variant-{v}"), c));
    }
    for (_, c) in &runs {
        c.validate()?;
    }
    let out = &cli.out;
    let mut outputs = vec![out.join("ablation.csv")];
    outputs.extend(runs.iter().map(|(n, _)| out.join(n)));
    manifest(cli, &cfg, outputs).write(out)?;
    let mut lines = vec![ABLATION_HEADER.to_string()];
    for (name, c) in &runs {
        let dir = out.join(name);
        create_dir(&dir)?;
        write_file(&dir.join("config.cfg"), c.to_text().as_bytes())?;
        let trainer = train_into(c, cli.seed, &dir, false)?;
        let actor = Arc::new(trainer.actor.clone());
        let stats = run_benchmark(
            &[PlannerSpec::Learned(actor, SampleMode::Sample)],
            a.missions,
            cli.seed,
            &c.env,
            &TerrainSource::Random,
        )?;
        with_writer(&dir.join("benchmark.csv"), |w| write_benchmark_csv(w, &stats))?;
        let last = stats[0].checkpoints.last().expect("three checkpoints");
        let ret = trainer.log().last().map(|r| r.mean_return).unwrap_or(0.0);
        lines.push(format!(
            "{name},{},{},{ret},{},{},{},{}",
            c.train.variant,
            feature_list(&c.features),
            last.entropy_mean,
            last.entropy_std,
            last.f1_mean,
            last.f1_std
        ));
        println!("{name:28} final ROI entropy {:.4}  F1 {:.4}", last.entropy_mean, last.f1_mean);
    }
    lines.push(String::new());
    write_file(&out.join("ablation.csv"), lines.join("\n").as_bytes())
}

fn cmd_ingest(cli: &Cli, cfg: Config, a: &IngestArgs) -> Result<()> {
    let out = &cli.out;
    manifest(cli, &cfg, vec![out.join("ground_truth.txt"), out.join("ground_truth.pgm")]).write(out)?;
    let ing = ingest_raster(&a.raster, a.threshold)?;
    if ing.degenerate {
        eprintln!("warning: no cell reaches the threshold {}; the ground truth is empty", a.threshold);
    }
    with_writer(&out.join("ground_truth.txt"), |w| ing.map.write_text(w))?;
    with_writer(&out.join("ground_truth.pgm"), |w| ing.map.write_pgm(w))?;
    println!(
        "{} x {} cells, interesting fraction {:.4}",
        ing.map.width(),
        ing.map.height(),
        ing.interesting_fraction
    );
    Ok(())
}

pub const SWEEP_HEADER: &str = "altitude,entropy_mean,entropy_std,f1_mean,f1_std";

fn cmd_sweep(cli: &Cli, cfg: Config, a: &SweepArgs) -> Result<()> {
    let out = &cli.out;
    manifest(cli, &cfg, vec![out.join("coverage_altitude.csv")]).write(out)?;
    let mut lines = vec![SWEEP_HEADER.to_string()];
    for level in 0..cfg.env.num_levels() {
        let mut env = cfg.env.clone();
        env.coverage_altitude = env.altitude(level);
        let stats = run_benchmark(&[PlannerSpec::Coverage], a.missions, cli.seed, &env, &TerrainSource::Random)?;
        let e = stats[0].final_entropies();
        let f = stats[0].final_f1();
        let (em, es) = mean_std(&e);
        let (fm, fs) = mean_std(&f);
        lines.push(format!("{},{em},{es},{fm},{fs}", env.coverage_altitude));
        println!("altitude {:5} m  final ROI entropy {em:.4}  F1 {fm:.4}", env.coverage_altitude);
    }
    lines.push(String::new());
    write_file(&out.join("coverage_altitude.csv"), lines.join("\n").as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn command_line_is_well_formed() {
        Cli::command().debug_assert();
    }

    #[test]
    fn toggles_and_radius() {
        assert_eq!(parse_toggle("entropy_map=off").unwrap(), ("entropy_map".into(), false));
        assert!(matches!(parse_toggle("nope=on"), Err(Error::Usage(_))));
        assert!(matches!(parse_toggle("entropy_map"), Err(Error::Usage(_))));
        assert_eq!(parse_radius("inf").unwrap(), f64::INFINITY);
        assert_eq!(parse_radius("0").unwrap(), 0.0);
        assert!(parse_radius("-1").is_err());
    }

    #[test]
    fn global_flags_after_subcommand() {
        let cli = Cli::try_parse_from(["ipp", "evaluate", "--planner", "coverage,greedy-ig", "--seed", "3"]).unwrap();
        assert_eq!(cli.seed, 3);
        match cli.command {
            Command::Evaluate(a) => assert_eq!(a.planners, vec![PlannerKind::Coverage, PlannerKind::GreedyIg]),
            _ => panic!(),
        }
    }
}
