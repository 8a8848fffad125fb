//! `sport`: dataset generation, training, sampling and evaluation.
//!
//! Exit codes: 2 config error, 3 generation exhaustion, 4 non-finite
//! loss, 5 unparseable instruction, 6 degenerate sampling.

mod render;

use std::fs;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use sport_core::datagen::{
    generate_dataset, parse_instruction, read_dataset, write_dataset, DatagenError, GenConfig,
    Instance,
};
use sport_core::diffusion::{
    prepare_instance, sample as sample_pose, DiffusionError, SampleOptions, TrainConfig,
};
use sport_core::encoder::HashTextEncoder;
use sport_core::eval::{aggregate, eval_dataset, results_csv};
use sport_core::geometry::partial_view;
use sport_core::nn::{read_checkpoint, write_checkpoint, Checkpoint};
use sport_core::rng::derive_rng;
use sport_core::scene::{procedural_catalog, Relation, Role, Scene};

/// Frozen text-embedding seed; must agree between training and inference.
const TEXT_EMBEDDING_SEED: u64 = 0x7465_7874;

#[derive(Parser)]
#[command(name = "sport", about = "Language-conditioned goal-pose generation pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a dataset of placement instances.
    GenData(GenDataArgs),
    /// Train the denoiser on a dataset.
    Train(TrainArgs),
    /// Sample a goal pose for one scene + instruction.
    Sample(SampleArgs),
    /// Evaluate a checkpoint on a dataset.
    Eval(EvalArgs),
}

#[derive(Args)]
struct GenDataArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    count: u64,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated relation names (default: all six).
    #[arg(long)]
    relations: Option<String>,
    #[arg(long, default_value_t = 3)]
    objects_min: usize,
    #[arg(long, default_value_t = 5)]
    objects_max: usize,
    /// Round-robin relations so per-relation counts differ by at most 1.
    #[arg(long, default_value_t = true)]
    balanced: bool,
    /// Dataset split tag recorded in the manifest.
    #[arg(long, default_value = "train")]
    split: String,
    /// Model variations per object category in the procedural catalog.
    #[arg(long, default_value_t = 3)]
    catalog_variations: usize,
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    /// Flat key-value config file; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory: checkpoint.spck1 + loss.csv + config.json.
    #[arg(long)]
    out: PathBuf,
    /// Resume from an existing checkpoint.
    #[arg(long)]
    resume: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct SampleArgs {
    #[arg(long)]
    model: PathBuf,
    /// Scene JSON (objects with poses; roles are assigned from the
    /// instruction).
    #[arg(long)]
    scene: PathBuf,
    #[arg(long)]
    instruction: String,
    /// Output directory: goal_scene.json + render.svg.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Report JSON path; a per-instance CSV is written alongside it.
    #[arg(long)]
    report: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    jobs: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::GenData(args) => cmd_gen_data(args),
        Command::Train(args) => cmd_train(args),
        Command::Sample(args) => cmd_sample(args),
        Command::Eval(args) => cmd_eval(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}

fn exit_code_for(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<DatagenError>() {
            return match e {
                DatagenError::GenerationExhausted { .. } => 3,
                DatagenError::UnparseableInstruction(_) => 5,
                DatagenError::UnknownCategory(_) => 2,
                _ => 1,
            };
        }
        if let Some(e) = cause.downcast_ref::<DiffusionError>() {
            return match e {
                DiffusionError::NonFiniteLoss { .. } => 4,
                DiffusionError::SamplingDegenerate { .. } => 6,
                DiffusionError::BadConfig(_) => 2,
                _ => 1,
            };
        }
        if cause.downcast_ref::<ConfigError>().is_some() {
            return 2;
        }
    }
    1
}

/// Marker for invalid run configuration (exit code 2).
#[derive(Debug)]
struct ConfigError(String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for ConfigError {}

fn config_err(msg: impl Into<String>) -> anyhow::Error {
    anyhow::Error::new(ConfigError(msg.into()))
}

/// --seed, then SPORT_SEED, then 0.
fn resolve_seed(flag: Option<u64>) -> Result<u64> {
    if let Some(s) = flag {
        return Ok(s);
    }
    match std::env::var("SPORT_SEED") {
        Ok(v) => v
            .parse()
            .map_err(|_| config_err(format!("SPORT_SEED is not an integer: {v:?}"))),
        Err(_) => Ok(0),
    }
}

fn init_jobs(jobs: Option<usize>) -> Result<()> {
    if let Some(n) = jobs {
        if n == 0 {
            return Err(config_err("--jobs must be >= 1"));
        }
        rayon_pool(n)?;
    }
    Ok(())
}

fn rayon_pool(n: usize) -> Result<()> {
    sport_core::rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| config_err(format!("thread pool: {e}")))
}

fn parse_relations(spec: Option<&str>) -> Result<Vec<Relation>> {
    match spec {
        None => Ok(Relation::ALL.to_vec()),
        Some(s) => s
            .split(',')
            .map(|tok| {
                let tok = tok.trim();
                Relation::from_name(tok)
                    .ok_or_else(|| config_err(format!("unknown relation name {tok:?}")))
            })
            .collect(),
    }
}

fn canonical_json_bytes<T: sport_core::serde::Serialize>(value: &T) -> Result<Vec<u8>> {
    let v = serde_json::to_value(value)?;
    let mut bytes = serde_json::to_vec_pretty(&v)?;
    bytes.push(b'\n');
    Ok(bytes)
}

fn cmd_gen_data(args: GenDataArgs) -> Result<()> {
    init_jobs(args.jobs)?;
    let seed = resolve_seed(args.seed)?;
    if args.count == 0 {
        return Err(config_err("--count must be >= 1"));
    }
    if args.objects_min < 2 || args.objects_min > args.objects_max {
        return Err(config_err("need 2 <= --objects-min <= --objects-max"));
    }
    let relations = parse_relations(args.relations.as_deref())?;
    let catalog = procedural_catalog(args.catalog_variations, seed);
    let cfg = GenConfig {
        n_objects_min: args.objects_min,
        n_objects_max: args.objects_max,
        ..GenConfig::default()
    };
    eprintln!(
        "gen-data: count={} seed={seed} relations={:?} objects={}..={} balanced={}",
        args.count,
        relations.iter().map(|r| r.name()).collect::<Vec<_>>(),
        args.objects_min,
        args.objects_max,
        args.balanced
    );
    let instances = generate_dataset(&catalog, &relations, args.count, args.balanced, &cfg, seed)?;
    let manifest = write_dataset(&args.out, seed, &args.split, &catalog, &instances)?;
    for (rel, count) in &manifest.relation_counts {
        println!("{rel}: {count}");
    }
    println!("total: {}", manifest.count);
    Ok(())
}

fn load_train_config(path: Option<&Path>, seed: Option<u64>) -> Result<TrainConfig> {
    let mut cfg = match path {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            TrainConfig::parse(&text)?
        }
        None => TrainConfig::default(),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    } else if path.is_none() || !fs::read_to_string(path.unwrap())?.contains("seed") {
        cfg.seed = resolve_seed(None)?;
    }
    Ok(cfg)
}

fn cmd_train(args: TrainArgs) -> Result<()> {
    let cfg = load_train_config(args.config.as_deref(), args.seed)?;
    let (_, instances) = read_dataset(&args.data)?;
    if instances.is_empty() {
        return Err(config_err("dataset is empty"));
    }
    let resume = match &args.resume {
        Some(p) => {
            let mut r = BufReader::new(fs::File::open(p)?);
            Some(read_checkpoint(&mut r)?)
        }
        None => None,
    };
    fs::create_dir_all(&args.out)?;
    fs::write(args.out.join("config.json"), canonical_json_bytes(&cfg)?)?;
    eprintln!("train: {} instances, {}", instances.len(), summarize(&cfg));

    let encoder = HashTextEncoder::new(cfg.model_dim, TEXT_EMBEDDING_SEED);
    let mut loss_log = String::from("epoch,loss\n");
    let (ckpt, report) = sport_core::diffusion::train(&instances, &encoder, &cfg, resume, |e, l| {
        eprintln!("epoch {e}: loss {l}");
        loss_log.push_str(&format!("{e},{l}\n"));
    })?;
    fs::write(args.out.join("loss.csv"), loss_log)?;
    let mut w = BufWriter::new(fs::File::create(args.out.join("checkpoint.spck1"))?);
    write_checkpoint(&mut w, &ckpt)?;
    println!(
        "trained {} steps; final loss {}",
        report.steps,
        report.epoch_losses.last().copied().unwrap_or(f64::NAN)
    );
    Ok(())
}

fn summarize(cfg: &TrainConfig) -> String {
    format!(
        "T={} epochs={} batch={} lr={} dim={} blocks={} heads={} seed={}",
        cfg.t_steps, cfg.epochs, cfg.batch, cfg.lr, cfg.model_dim, cfg.blocks, cfg.heads, cfg.seed
    )
}

fn load_checkpoint(path: &Path) -> Result<(Checkpoint, TrainConfig)> {
    let mut r = BufReader::new(fs::File::open(path).with_context(|| format!("opening {}", path.display()))?);
    let ckpt = read_checkpoint(&mut r)?;
    let cfg: TrainConfig = serde_json::from_value(ckpt.config.clone())
        .map_err(|e| config_err(format!("checkpoint config: {e}")))?;
    Ok((ckpt, cfg))
}

/// Turns a bare scene + instruction into a dataset-shaped instance:
/// roles from the parsed instruction, partial-view clouds from the
/// scene's camera.
fn instance_from_scene(scene: &Scene, instruction: &str, seed: u64) -> Result<Instance> {
    let descriptors: Vec<String> = scene.objects.iter().map(|o| o.model.descriptor()).collect();
    let parsed = parse_instruction(instruction, &descriptors)?;

    let mut scene = scene.clone();
    let find = |d: &str| descriptors.iter().position(|x| x == d).expect("parser returns known descriptors");
    for obj in &mut scene.objects {
        obj.role = Role::Irrelevant;
    }
    let movable_index = find(&parsed.movable);
    scene.objects[movable_index].role = Role::Movable;
    let mut reference_indices = Vec::new();
    for r in &parsed.references {
        let i = find(r);
        scene.objects[i].role = Role::Reference;
        reference_indices.push(i);
    }

    let mut rng = derive_rng(seed, "scene-clouds", 0);
    let clouds = scene
        .objects
        .iter()
        .map(|obj| {
            let cloud_seed: u64 = sport_core::rand::Rng::gen(&mut rng);
            partial_view(&obj.model.proxy(), &obj.pose, &scene.camera, 1024, cloud_seed)
                .map_err(anyhow::Error::from)
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(Instance {
        id: "sample".to_string(),
        goal_scene: scene.clone(),
        initial_scene: scene,
        relation: parsed.relation,
        movable_index,
        reference_indices,
        instruction: instruction.to_string(),
        clouds,
    })
}

fn cmd_sample(args: SampleArgs) -> Result<()> {
    let seed = resolve_seed(args.seed)?;
    let (ckpt, cfg) = load_checkpoint(&args.model)?;
    let scene: Scene = serde_json::from_slice(&fs::read(&args.scene)?)
        .map_err(|e| config_err(format!("scene file: {e}")))?;
    if scene.objects.is_empty() {
        return Err(config_err("scene has no objects"));
    }

    let instance = instance_from_scene(&scene, &args.instruction, seed)?;
    let encoder = HashTextEncoder::new(cfg.model_dim, TEXT_EMBEDDING_SEED);
    let prep = prepare_instance(&instance, &encoder, &cfg.model_config())?;
    let opts = SampleOptions { strict_paper_update: cfg.strict_paper_update, ..Default::default() };
    let (pose, _) = sample_pose(&ckpt.store, &cfg.model_config(), &cfg.schedule(), &prep, seed, &opts)?;

    let mut goal = instance.initial_scene.clone();
    goal.objects[instance.movable_index].pose = pose;

    fs::create_dir_all(&args.out)?;
    fs::write(args.out.join("goal_scene.json"), canonical_json_bytes(&goal)?)?;
    let svg = render::scene_svg(&instance.initial_scene, &goal);
    fs::write(args.out.join("render.svg"), svg)?;
    println!(
        "movable {:?} -> translation ({}, {}, {})",
        instance.initial_scene.objects[instance.movable_index].model.descriptor(),
        pose.translation.x,
        pose.translation.y,
        pose.translation.z
    );
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> Result<()> {
    init_jobs(args.jobs)?;
    let seed = resolve_seed(args.seed)?;
    let (ckpt, cfg) = load_checkpoint(&args.model)?;
    let (_, instances) = read_dataset(&args.data)?;
    if instances.is_empty() {
        return Err(config_err("dataset is empty"));
    }
    eprintln!("eval: {} instances, {}", instances.len(), summarize(&cfg));

    let encoder = HashTextEncoder::new(cfg.model_dim, TEXT_EMBEDDING_SEED);
    let results = eval_dataset(&ckpt.store, &cfg, &instances, &encoder, seed)?;
    let report = aggregate(&results, seed, serde_json::to_value(&cfg)?)?;

    if let Some(dir) = args.report.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    fs::write(&args.report, canonical_json_bytes(&report)?)?;
    fs::write(args.report.with_extension("csv"), results_csv(&results))?;

    println!("pose accuracy:    {:.2}", report.pose_accuracy);
    println!("physical realism: {:.2}", report.physical_realism);
    println!("overall success:  {:.2}", report.overall_success);
    for (rel, stats) in &report.per_relation {
        println!("  {rel}: {:.2} ({} instances)", stats.pose_accuracy, stats.count);
    }
    Ok(())
}
