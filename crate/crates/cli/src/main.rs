//! `factorvae`: train, resume, evaluate, score and sweep models from the
//! command line.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical failure,
//! 4 input or path error, 1 anything else.

mod config;
mod plot;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use clap::{Args, Parser, Subcommand, ValueEnum};
use factorvae::data::{generate_mini_shapes, load_dsprites, load_factor_archive, FactorDataset};
use factorvae::evaluation::{
    discriminator_accuracy, iwae_bound, marginal_histograms, reconstruction_error, sample_prior, traversal_grid,
    write_image_grid,
};
use factorvae::experiment::{summarise, EvalSettings, SWEEP_HEADER};
use factorvae::metrics::{higgins_metric_on, new_metric_on, MetricReport, RepresentationTable};
use factorvae::models::ModelBundle;
use factorvae::objectives::Family;
use factorvae::rng::SeedStream;
use factorvae::training::{latest_checkpoint, RunLog, TrainConfig, Trainer};
use serde::{Deserialize, Serialize};
use serde_json::Value;

pub const OUTPUT_ROOT_ENV: &str = "FACTORVAE_OUTPUT_ROOT";

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        Self { code: 2, message: message.into() }
    }

    pub fn path(message: impl Into<String>) -> Self {
        Self { code: 4, message: message.into() }
    }
}

impl From<factorvae::Error> for CliError {
    fn from(e: factorvae::Error) -> Self {
        use factorvae::Error as E;
        let code = match &e {
            E::Config(_) => 2,
            E::NonFinite { .. } => 3,
            E::Io { .. } | E::Format { .. } => 4,
            _ => 1,
        };
        Self { code, message: e.to_string() }
    }
}

type CliResult<T = ()> = Result<T, CliError>;

#[derive(Parser)]
#[command(name = "factorvae", version, about = "Train and evaluate disentangling VAEs")]
struct Cli {
    /// Root directory for new runs (default: ./runs).
    #[arg(long, global = true, env = OUTPUT_ROOT_ENV)]
    output_root: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model into a new run directory.
    Train(TrainArgs),
    /// Continue a run from its latest checkpoint.
    Resume(ResumeArgs),
    /// Reconstruction error, IWAE bound, discriminator accuracy and latent histograms.
    Evaluate(EvaluateArgs),
    /// Disentanglement metrics for a run or a fixture representation.
    Metric(MetricArgs),
    /// Latent traversal grid as a PNG.
    Traverse(TraverseArgs),
    /// Decoded prior samples as a PNG.
    Sample(SampleArgs),
    /// Train and score a grid of coefficients × seeds.
    Sweep(SweepArgs),
    /// Write a dataset in the `.npz` interchange layout.
    Export(ExportArgs),
}

#[derive(Args, Clone)]
struct ConfigArgs {
    /// JSON train configuration; missing keys take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dotted-path override, e.g. `--set objective.gamma=35`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long, value_name = "FAMILY")]
    objective: Option<String>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    lambda_od: Option<f64>,
    #[arg(long)]
    lambda_d: Option<f64>,
    #[arg(long)]
    iterations: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// `mini-shapes`, `dsprites:PATH` or `npz:PATH`.
    #[arg(long, default_value = "mini-shapes")]
    dataset: String,
}

impl ConfigArgs {
    fn resolve(&self) -> CliResult<TrainConfig> {
        let mut v = config::load(self.config.as_deref())?;
        for o in &self.overrides {
            config::set(&mut v, o)?;
        }
        if let Some(f) = &self.objective {
            if Family::parse(f).is_none() {
                return Err(CliError::config(format!("unknown objective family `{f}`")));
            }
            config::set(&mut v, &format!("objective.family=\"{f}\""))?;
        }
        let flags = [
            ("objective.beta", self.beta),
            ("objective.gamma", self.gamma),
            ("objective.lambda_od", self.lambda_od),
            ("objective.lambda_d", self.lambda_d),
        ];
        for (key, value) in flags {
            if let Some(x) = value {
                config::set(&mut v, &format!("{key}={x}"))?;
            }
        }
        if let Some(n) = self.iterations {
            config::set(&mut v, &format!("iterations={n}"))?;
        }
        if let Some(s) = self.seed {
            config::set(&mut v, &format!("seed={s}"))?;
        }
        config::resolve(v)
    }
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Run directory (default: a fresh directory under the output root).
    #[arg(long)]
    run_dir: Option<PathBuf>,
    /// Print the resolved configuration and exit.
    #[arg(long)]
    dry_run: bool,
}

#[derive(Args)]
struct ResumeArgs {
    #[arg(long)]
    run_dir: PathBuf,
    /// Further iterations to train.
    #[arg(long)]
    iterations: u64,
    #[arg(long)]
    dry_run: bool,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    run_dir: PathBuf,
    #[arg(long, default_value_t = 100)]
    particles: usize,
    /// Images (a seeded subset) for the IWAE bound.
    #[arg(long, default_value_t = 64)]
    iwae_points: usize,
    #[arg(long, default_value_t = 40)]
    bins: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    dry_run: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Which {
    New,
    Higgins,
    Both,
}

#[derive(Clone, Copy, ValueEnum)]
enum Fixture {
    /// Every factor in its own coordinate.
    Oracle,
    /// All factors but the first, each in its own coordinate.
    Partial,
}

#[derive(Args)]
struct MetricArgs {
    #[arg(long, required_unless_present = "fixture")]
    run_dir: Option<PathBuf>,
    /// Score a hand-built representation of the dataset instead of a run.
    #[arg(long, value_enum, conflicts_with = "run_dir")]
    fixture: Option<Fixture>,
    /// Dataset for fixtures (runs use the dataset in their manifest).
    #[arg(long, default_value = "mini-shapes")]
    dataset: String,
    #[arg(long, value_enum, default_value = "both")]
    which: Which,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Where reports are written (default: the run directory, or the current
    /// directory for fixtures).
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    dry_run: bool,
}

#[derive(Args)]
struct TraverseArgs {
    #[arg(long)]
    run_dir: PathBuf,
    #[arg(long, default_value_t = 10)]
    steps: usize,
    #[arg(long, default_value_t = -3.0, allow_negative_numbers = true)]
    min: f64,
    #[arg(long, default_value_t = 3.0, allow_negative_numbers = true)]
    max: f64,
    /// Dataset rows used as references; the first is traversed.
    #[arg(long, value_delimiter = ',', default_value = "0")]
    rows: Vec<usize>,
    #[arg(long)]
    dry_run: bool,
}

#[derive(Args)]
struct SampleArgs {
    #[arg(long)]
    run_dir: PathBuf,
    #[arg(long, default_value_t = 16)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    dry_run: bool,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Coefficient values for the family's coefficient.
    #[arg(long, value_delimiter = ',', required = true)]
    grid: Vec<f64>,
    /// Seeds per coefficient, counting up from the configured seed.
    #[arg(long, default_value_t = 1)]
    seeds: u64,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    #[arg(long)]
    sweep_dir: Option<PathBuf>,
    #[arg(long)]
    dry_run: bool,
}

#[derive(Args)]
struct ExportArgs {
    #[arg(long, default_value = "mini-shapes")]
    dataset: String,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    dry_run: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetInfo {
    pub source: String,
    pub name: String,
    pub content_hash: String,
    pub size: usize,
}

/// Everything needed to reconstruct a run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub config: TrainConfig,
    pub code_version: String,
    pub dataset: DatasetInfo,
    pub seeds: Value,
    pub outputs: Value,
}

const MANIFEST: &str = "manifest.json";
const RUNLOG: &str = "runlog.csv";
const CHECKPOINTS: &str = "checkpoints";

fn load_dataset(source: &str) -> CliResult<FactorDataset> {
    let ds = if source == "mini-shapes" {
        generate_mini_shapes()
    } else if let Some(p) = source.strip_prefix("dsprites:") {
        load_dsprites(Path::new(p))?
    } else if let Some(p) = source.strip_prefix("npz:") {
        load_factor_archive(Path::new(p))?
    } else {
        return Err(CliError::config(format!(
            "unknown dataset `{source}` (expected mini-shapes, dsprites:PATH or npz:PATH)"
        )));
    };
    Ok(ds)
}

fn dataset_info(source: &str, ds: &FactorDataset) -> DatasetInfo {
    DatasetInfo {
        source: source.to_string(),
        name: ds.name.clone(),
        content_hash: ds.content_hash(),
        size: ds.len(),
    }
}

fn write_json<S: Serialize>(path: &Path, value: &S) -> CliResult {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::config(e.to_string()))?;
    std::fs::write(path, text + "\n").map_err(|e| CliError::path(format!("{}: {e}", path.display())))
}

fn read_manifest(run_dir: &Path) -> CliResult<RunManifest> {
    let p = run_dir.join(MANIFEST);
    let text = std::fs::read_to_string(&p).map_err(|e| CliError::path(format!("{}: {e}", p.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::path(format!("{}: {e}", p.display())))
}

fn create_dir(dir: &Path) -> CliResult {
    std::fs::create_dir_all(dir).map_err(|e| CliError::path(format!("{}: {e}", dir.display())))
}

fn output_root(cli_root: &Option<PathBuf>) -> PathBuf {
    cli_root.clone().unwrap_or_else(|| PathBuf::from("runs"))
}

fn default_run_name(cfg: &TrainConfig) -> String {
    format!(
        "{}-{}-s{}",
        cfg.objective.family.name(),
        cfg.objective.coefficient(),
        cfg.seed
    )
}

/// A run's dataset, checked against the hash recorded in its manifest.
fn run_dataset(manifest: &RunManifest) -> CliResult<FactorDataset> {
    let ds = load_dataset(&manifest.dataset.source)?;
    if ds.content_hash() != manifest.dataset.content_hash {
        return Err(CliError::path(format!(
            "dataset `{}` no longer matches the hash in the run manifest",
            manifest.dataset.source
        )));
    }
    Ok(ds)
}

/// The run's latest checkpoint and bundle.
fn latest_bundle(run_dir: &Path) -> CliResult<(PathBuf, ModelBundle<f32>)> {
    let dir = run_dir.join(CHECKPOINTS);
    let path = latest_checkpoint(&dir)
        .map_err(|e| CliError::path(e.to_string()))?
        .ok_or_else(|| CliError::path(format!("no checkpoint in {}", dir.display())))?;
    let bundle = ModelBundle::load(&path)?;
    Ok((path, bundle))
}

/// Creates the run directory, writes the manifest and trains.
fn train_into(run_dir: &Path, cfg: &TrainConfig, source: &str, ds: &FactorDataset) -> CliResult<(ModelBundle<f32>, RunLog)> {
    create_dir(&run_dir.join(CHECKPOINTS))?;
    let manifest = RunManifest {
        config: cfg.clone(),
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        dataset: dataset_info(source, ds),
        seeds: serde_json::json!({ "train": cfg.seed }),
        outputs: serde_json::json!({ "checkpoints": CHECKPOINTS, "runlog": RUNLOG }),
    };
    write_json(&run_dir.join(MANIFEST), &manifest)?;
    let mut trainer = Trainer::new(ds, cfg.clone())?;
    let result = trainer.run(cfg.iterations, Some(&run_dir.join(CHECKPOINTS)));
    // The log up to the failure is still useful.
    trainer.log().write_csv(&run_dir.join(RUNLOG))?;
    result?;
    Ok(trainer.into_parts())
}

fn cmd_train(args: TrainArgs, root: &Option<PathBuf>) -> CliResult {
    let cfg = args.config.resolve()?;
    if args.dry_run {
        println!("{}", serde_json::to_string_pretty(&cfg).expect("config serialises"));
        return Ok(());
    }
    let ds = load_dataset(&args.config.dataset)?;
    let run_dir = args
        .run_dir
        .unwrap_or_else(|| output_root(root).join(default_run_name(&cfg)));
    train_into(&run_dir, &cfg, &args.config.dataset, &ds)?;
    println!("{}", run_dir.display());
    Ok(())
}

fn cmd_resume(args: ResumeArgs) -> CliResult {
    let manifest = read_manifest(&args.run_dir)?;
    let mut cfg = manifest.config.clone();
    cfg.iterations = args.iterations;
    if args.dry_run {
        println!("{}", serde_json::to_string_pretty(&cfg).expect("config serialises"));
        return Ok(());
    }
    let ds = run_dataset(&manifest)?;
    let (path, _) = latest_bundle(&args.run_dir)?;
    let mut trainer = Trainer::from_checkpoint(&path, &ds, cfg)?;
    let result = trainer.run(args.iterations, Some(&args.run_dir.join(CHECKPOINTS)));
    let log_path = args.run_dir.join(RUNLOG);
    let mut log = RunLog::read_csv(&log_path)?;
    log.extend(trainer.log().clone())?;
    log.write_csv(&log_path)?;
    result?;
    println!("{}", args.run_dir.display());
    Ok(())
}

fn cmd_evaluate(args: EvaluateArgs) -> CliResult {
    let manifest = read_manifest(&args.run_dir)?;
    if args.dry_run {
        println!("{}", serde_json::to_string_pretty(&manifest.config).expect("config serialises"));
        return Ok(());
    }
    let ds = run_dataset(&manifest)?;
    let (path, bundle) = latest_bundle(&args.run_dir)?;
    let mut s = SeedStream::new(args.seed);
    let mut rows = s.permutation(ds.len());
    rows.truncate(args.iwae_points.min(ds.len()));
    let iwae = iwae_bound(&bundle, &ds.batch(&rows), args.particles, args.seed)?;
    let hist = marginal_histograms(&bundle, &ds, args.bins, 10_000, args.seed)?;
    let report = serde_json::json!({
        "checkpoint": path,
        "reconstruction_error": reconstruction_error(&bundle, &ds, args.seed)?,
        "iwae_bound": iwae,
        "iwae_particles": args.particles,
        "iwae_points": rows.len(),
        "discriminator_accuracy": discriminator_accuracy(&bundle, &ds, 1000, args.seed)?,
        "histograms": hist,
    });
    write_json(&args.run_dir.join("evaluation.json"), &report)?;
    let mut csv = String::from("dim,bin_centre,count,normal_pdf\n");
    for (j, counts) in hist.counts.iter().enumerate() {
        for (b, c) in counts.iter().enumerate() {
            csv.push_str(&format!("{j},{},{c},{}\n", hist.centres[b], hist.normal_pdf[b]));
        }
    }
    let p = args.run_dir.join("histograms.csv");
    std::fs::write(&p, csv).map_err(|e| CliError::path(format!("{}: {e}", p.display())))?;
    println!("{}", serde_json::to_string_pretty(&report["reconstruction_error"]).unwrap_or_default());
    Ok(())
}

fn fixture_table(ds: &FactorDataset, fixture: Fixture) -> CliResult<RepresentationTable> {
    let k = ds.num_factors();
    let skip = match fixture {
        Fixture::Oracle => 0,
        Fixture::Partial => 1,
    };
    Ok(RepresentationTable::from_factors(ds, k - skip, |f| {
        f[skip..].iter().map(|&v| v as f64).collect()
    })?)
}

fn cmd_metric(args: MetricArgs) -> CliResult {
    if args.dry_run {
        println!("{}", serde_json::to_string_pretty(&EvalSettings { seed: args.seed, ..Default::default() }).unwrap_or_default());
        return Ok(());
    }
    let (table, ds, out_dir) = match (&args.run_dir, args.fixture) {
        (Some(dir), _) => {
            let manifest = read_manifest(dir)?;
            let ds = run_dataset(&manifest)?;
            if !ds.has_factors() {
                return Err(CliError::path("metric requires ground-truth factors"));
            }
            let (_, bundle) = latest_bundle(dir)?;
            let table = RepresentationTable::from_bundle(&bundle, &ds)?;
            (table, ds, args.out_dir.clone().unwrap_or_else(|| dir.clone()))
        }
        (None, Some(fixture)) => {
            let ds = load_dataset(&args.dataset)?;
            if !ds.has_factors() {
                return Err(CliError::path("metric requires ground-truth factors"));
            }
            let table = fixture_table(&ds, fixture)?;
            (table, ds, args.out_dir.clone().unwrap_or_else(|| PathBuf::from(".")))
        }
        (None, None) => return Err(CliError::config("either --run-dir or --fixture is required")),
    };
    create_dir(&out_dir)?;
    let eval = EvalSettings { seed: args.seed, ..Default::default() };
    let mut reports: Vec<(&str, MetricReport)> = Vec::new();
    if matches!(args.which, Which::New | Which::Both) {
        reports.push(("new", new_metric_on(&table, &ds, &eval.new_metric, eval.seed)?));
    }
    if matches!(args.which, Which::Higgins | Which::Both) {
        reports.push(("higgins", higgins_metric_on(&table, &ds, &eval.higgins, eval.seed)?));
    }
    for (name, report) in &reports {
        write_json(&out_dir.join(format!("metric_{name}.json")), report)?;
        println!("{name} {}", report.score);
    }
    Ok(())
}

fn cmd_traverse(args: TraverseArgs) -> CliResult {
    let manifest = read_manifest(&args.run_dir)?;
    if args.dry_run {
        println!("{}", serde_json::to_string_pretty(&manifest.config).expect("config serialises"));
        return Ok(());
    }
    let ds = run_dataset(&manifest)?;
    if let Some(&bad) = args.rows.iter().find(|&&r| r >= ds.len()) {
        return Err(CliError::config(format!("row {bad} is outside the {}-row dataset", ds.len())));
    }
    let (_, bundle) = latest_bundle(&args.run_dir)?;
    let grid = traversal_grid(&bundle, &ds.batch(&args.rows), (args.min, args.max), args.steps)?;
    grid.write_png(&args.run_dir.join("traversal.png"))?;
    write_json(
        &args.run_dir.join("traversal.json"),
        &serde_json::json!({ "dim_order": grid.dim_order, "kl": grid.kl, "range": grid.range, "steps": grid.steps }),
    )?;
    println!("{}", args.run_dir.join("traversal.png").display());
    Ok(())
}

fn cmd_sample(args: SampleArgs) -> CliResult {
    let manifest = read_manifest(&args.run_dir)?;
    if args.dry_run {
        println!("{}", serde_json::to_string_pretty(&manifest.config).expect("config serialises"));
        return Ok(());
    }
    let (_, bundle) = latest_bundle(&args.run_dir)?;
    let samples = sample_prior(&bundle, args.count, args.seed)?;
    let per_row = (args.count as f64).sqrt().ceil().max(1.0) as usize;
    let rows: Vec<Vec<Vec<f32>>> = samples.chunks(per_row).map(<[Vec<f32>]>::to_vec).collect();
    let s = bundle.spec.input_shape;
    let path = args.run_dir.join("samples.png");
    write_image_grid(&path, &rows, s.height, s.width, s.channels)?;
    println!("{}", path.display());
    Ok(())
}

fn cmd_sweep(args: SweepArgs, root: &Option<PathBuf>) -> CliResult {
    let base = args.config.resolve()?;
    let family = base.objective.family;
    let mut cells = Vec::new();
    for &c in &args.grid {
        for k in 0..args.seeds {
            let mut v = serde_json::to_value(&base).expect("config serialises");
            let key = match family.coefficient_name() {
                "none" => None,
                name => Some(format!("objective.{name}={c}")),
            };
            if let Some(k) = key {
                config::set(&mut v, &k)?;
            }
            config::set(&mut v, &format!("seed={}", base.seed + k))?;
            cells.push(config::resolve(v)?);
        }
    }
    if args.dry_run {
        println!("{}", serde_json::to_string_pretty(&cells).expect("config serialises"));
        return Ok(());
    }
    let ds = load_dataset(&args.config.dataset)?;
    let sweep_dir = args
        .sweep_dir
        .unwrap_or_else(|| output_root(root).join(format!("sweep-{}", family.name())));
    create_dir(&sweep_dir)?;
    let eval = EvalSettings::default();
    let results: Mutex<Vec<Option<Result<String, String>>>> = Mutex::new(vec![None; cells.len()]);
    let next = AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..args.workers.max(1) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(cfg) = cells.get(i) else { break };
                let dir = sweep_dir.join(default_run_name(cfg));
                let outcome = train_into(&dir, cfg, &args.config.dataset, &ds)
                    .and_then(|(bundle, log)| Ok(summarise(&bundle, &log, cfg, &ds, &eval)?))
                    .map(|s| s.csv_row())
                    .map_err(|e| e.message);
                results.lock().expect("no worker panicked")[i] = Some(outcome);
            });
        }
    });
    let results = results.into_inner().expect("no worker panicked");
    let mut csv = format!("{SWEEP_HEADER}\n");
    let mut failures = String::new();
    let mut points = Vec::new();
    for (cfg, r) in cells.iter().zip(results) {
        match r.expect("every cell ran") {
            Ok(row) => {
                let f: Vec<&str> = row.split(',').collect();
                let group = args.grid.iter().position(|&g| g == cfg.objective.coefficient()).unwrap_or(0);
                points.push((f[3].parse().unwrap_or(f64::NAN), f[4].parse().unwrap_or(f64::NAN), group));
                csv.push_str(&row);
                csv.push('\n');
            }
            Err(msg) => failures.push_str(&format!("{}: {msg}\n", default_run_name(cfg))),
        }
    }
    let p = sweep_dir.join("sweep.csv");
    std::fs::write(&p, csv).map_err(|e| CliError::path(format!("{}: {e}", p.display())))?;
    plot::scatter(&sweep_dir.join("sweep.png"), &points)
        .map_err(|e| CliError::path(format!("{}: {e}", sweep_dir.display())))?;
    println!("{}", p.display());
    if !failures.is_empty() {
        let fp = sweep_dir.join("failures.txt");
        std::fs::write(&fp, &failures).map_err(|e| CliError::path(format!("{}: {e}", fp.display())))?;
        return Err(CliError { code: 1, message: format!("some sweep cells failed:\n{failures}") });
    }
    Ok(())
}

fn cmd_export(args: ExportArgs) -> CliResult {
    if args.dry_run {
        println!("{} -> {}", args.dataset, args.out.display());
        return Ok(());
    }
    let ds = load_dataset(&args.dataset)?;
    ds.export_npz(&args.out)?;
    println!("{}", args.out.display());
    Ok(())
}

fn run(cli: Cli) -> CliResult {
    let root = cli.output_root;
    match cli.command {
        Command::Train(a) => cmd_train(a, &root),
        Command::Resume(a) => cmd_resume(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Metric(a) => cmd_metric(a),
        Command::Traverse(a) => cmd_traverse(a),
        Command::Sample(a) => cmd_sample(a),
        Command::Sweep(a) => cmd_sweep(a, &root),
        Command::Export(a) => cmd_export(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
