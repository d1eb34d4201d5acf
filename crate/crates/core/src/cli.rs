//! Command-line front end. [`run`] parses arguments, dispatches to a
//! subcommand and returns the process exit code: 0 on success, 1 on a data,
//! validation or training failure, 2 on a usage error.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::eventlog::{log_stats, parse_log, validate_log, EventLog, Schema};
use crate::features::{encode_dataset, fit_encoder, parse_statics, Dataset, Encoder, Task};
use crate::model::{Predictor, Variant};
use crate::neural::CellType;
use crate::synthgen::{self, GenConfig};
use crate::trainer::{
    self, run_ablation, run_cell_benchmark, run_experiment, split, ExperimentConfig, History, MetricsReport,
    ResultTable, Split, ThirdColumn, BENCH_ARCHITECTURES,
};

pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const HISTORY_FILE: &str = "history.csv";
pub const ENCODER_FILE: &str = "encoder.json";
pub const SPLIT_FILE: &str = "split.json";
pub const METRICS_FILE: &str = "metrics.json";
pub const EXPERIMENT_FILE: &str = "experiment.json";
pub const ENCODED_FILE: &str = "encoded.json";
pub const ABLATION_STEM: &str = "ablation";
pub const BENCH_STEM: &str = "bench";
pub const SUMMARY_FILE: &str = "summary.md";

#[derive(Debug, Parser)]
#[command(name = "leadtime", version, about = "Process-aware procurement lead time prediction")]
pub struct Cli {
    /// JSON file with optional `gen` and `experiment` sections.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Single-threaded training with zeroed wall-clock columns, so reruns
    /// produce identical files.
    #[arg(long, global = true)]
    pub deterministic: bool,
    /// Seed for generation, splitting, initialization and batch order.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for parsing, synthesis, evaluation and independent
    /// experiment runs.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset.
    Synth(SynthArgs),
    /// Check an event log for structural violations.
    Validate(ValidateArgs),
    /// Fit the encoder on the training split and write encoded cases.
    Featurize(FeaturizeArgs),
    /// Train one predictor and test it.
    Train(TrainArgs),
    /// Evaluate a trained predictor.
    Eval(EvalArgs),
    /// Compare the full, no-TRF and no-EL variants.
    Ablate(SweepArgs),
    /// Compare the five recurrent encoders.
    Bench(SweepArgs),
    /// Merge outputs of earlier commands into one summary.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Output directory for the CSVs and manifest.
    #[arg(long)]
    pub out: PathBuf,
    /// Number of spools (default 5000).
    #[arg(long)]
    pub n: Option<usize>,
    /// Probability that an inspection fails and triggers rework (default 0.15).
    #[arg(long)]
    pub rework_prob: Option<f64>,
    /// Standard deviation of processing-time noise in days (default 0.25).
    #[arg(long)]
    pub noise: Option<f64>,
    /// Shortest allowed trace (default 18).
    #[arg(long)]
    pub min_len: Option<usize>,
    /// Longest allowed trace (default 36).
    #[arg(long)]
    pub max_len: Option<usize>,
    /// Number of vendors (default 5).
    #[arg(long)]
    pub vendors: Option<usize>,
    /// Disable congestion, rework and the weekend effect.
    #[arg(long)]
    pub no_latent: bool,
    /// Also print the linear-probe signal audit.
    #[arg(long)]
    pub audit: bool,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    /// Event log CSV to check.
    #[arg(long)]
    pub log: PathBuf,
}

#[derive(Debug, Args, Clone)]
pub struct DataArgs {
    /// Directory holding `event_log.csv` and `static.csv`.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Event log CSV (with --static, instead of --data).
    #[arg(long)]
    pub log: Option<PathBuf>,
    /// Static attribute and target CSV (with --log, instead of --data).
    #[arg(long = "static")]
    pub statics: Option<PathBuf>,
}

#[derive(Debug, Args, Clone, Default)]
pub struct ModelArgs {
    /// Target: production, postprocessing or procurement (default procurement).
    #[arg(long)]
    pub task: Option<Task>,
    /// Recurrent cell: rnn, lstm or gru.
    #[arg(long)]
    pub cell: Option<CellType>,
    /// Run the recurrent encoder in both directions (the default).
    #[arg(long, conflicts_with = "unidirectional")]
    pub bi: bool,
    /// Run the recurrent encoder forward only.
    #[arg(long)]
    pub unidirectional: bool,
    /// Feature variant: full, no_trf or no_el.
    #[arg(long)]
    pub variant: Option<Variant>,
    /// Hidden units per recurrent direction.
    #[arg(long)]
    pub hidden: Option<usize>,
    /// Maximum training epochs.
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Epochs without validation improvement before stopping.
    #[arg(long)]
    pub patience: Option<usize>,
    /// Optimizer learning rate.
    #[arg(long)]
    pub lr: Option<f64>,
    /// Mini-batch size.
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Use the shorter desk-scale training schedule.
    #[arg(long)]
    pub quick: bool,
}

#[derive(Debug, Args)]
pub struct FeaturizeArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Output directory for encoder.json, split.json and encoded.json.
    #[arg(long)]
    pub out: PathBuf,
    /// Target whose normalized values are cached.
    #[arg(long, default_value = "procurement")]
    pub task: Task,
    /// Feature variant deciding which blocks are encoded.
    #[arg(long, default_value = "full")]
    pub variant: Variant,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Output directory for the checkpoint, history and metrics.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Output directory of `train`.
    #[arg(long)]
    pub model: PathBuf,
    /// Which split partition to score: train, valid, test or all.
    #[arg(long, default_value = "test")]
    pub partition: String,
    /// Print the report as JSON.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Output directory for the markdown and CSV tables.
    #[arg(long)]
    pub out: PathBuf,
    /// Number of seeds, counting up from --seed (default 0).
    #[arg(long, default_value_t = 3)]
    pub seeds: u64,
    /// Comma-separated tasks.
    #[arg(long, value_delimiter = ',', default_value = "production,postprocessing,procurement")]
    pub tasks: Vec<Task>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Directories written by train, ablate or bench.
    #[arg(long = "input", required = true)]
    pub inputs: Vec<PathBuf>,
    /// Output directory for summary.md and the series CSVs.
    #[arg(long)]
    pub out: PathBuf,
}

/// Contents of a `--config` file. Missing fields take their defaults.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub gen: GenConfig,
    pub experiment: ExperimentConfig,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Failure(String),
}

impl<E: std::error::Error> From<E> for CliError {
    fn from(e: E) -> Self {
        CliError::Failure(e.to_string())
    }
}

type CliResult<T> = Result<T, CliError>;

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(CliError::Usage(m)) => {
            eprintln!("error: {m}");
            2
        }
        Err(CliError::Failure(m)) => {
            eprintln!("error: {m}");
            1
        }
    }
}

struct Context {
    file: FileConfig,
    deterministic: bool,
    seed: Option<u64>,
    jobs: usize,
}

fn execute(cli: &Cli) -> CliResult<()> {
    let file = match &cli.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?;
            serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?
        }
        None => FileConfig::default(),
    };
    if let Some(n) = cli.jobs {
        if n == 0 {
            return Err(CliError::Usage("--jobs must be at least 1".into()));
        }
        // Fails only if a pool already exists, e.g. when called twice in
        // one process; the existing pool is then reused.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let ctx = Context {
        file,
        deterministic: cli.deterministic,
        seed: cli.seed,
        jobs: cli.jobs.unwrap_or(1),
    };
    match &cli.command {
        Command::Synth(a) => synth(&ctx, a),
        Command::Validate(a) => validate(a),
        Command::Featurize(a) => featurize(&ctx, a),
        Command::Train(a) => train(&ctx, a),
        Command::Eval(a) => eval(a),
        Command::Ablate(a) => sweep(&ctx, a, SweepKind::Ablation),
        Command::Bench(a) => sweep(&ctx, a, SweepKind::Bench),
        Command::Report(a) => report(a),
    }
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Failure(format!("{}: {e}", path.display())))
}

fn open(path: &Path) -> CliResult<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::Failure(format!("{}: {e}", path.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> CliResult<T> {
    Ok(serde_json::from_reader(open(path)?)?)
}

fn synth(ctx: &Context, a: &SynthArgs) -> CliResult<()> {
    let mut cfg = ctx.file.gen.clone();
    if let Some(s) = ctx.seed {
        cfg.seed = s;
    }
    macro_rules! set {
        ($field:ident, $arg:expr) => {
            if let Some(v) = $arg {
                cfg.$field = v;
            }
        };
    }
    set!(n_spools, a.n);
    set!(rework_prob, a.rework_prob);
    set!(noise_scale, a.noise);
    set!(min_trace_len, a.min_len);
    set!(max_trace_len, a.max_len);
    set!(n_vendors, a.vendors);
    if a.no_latent {
        cfg.latent_factors = false;
    }
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let out = synthgen::generate(&cfg)?;
    let manifest = synthgen::write_outputs(&a.out, &cfg, &out)?;
    println!(
        "wrote {} cases, {} events to {}",
        manifest.n_cases,
        manifest.n_events,
        a.out.display()
    );
    if a.audit {
        print!("{}", synthgen::signal_audit(&out.dataset()?)?);
    }
    Ok(())
}

fn read_log(path: &Path) -> CliResult<EventLog> {
    parse_log(open(path)?, &Schema::default()).map_err(|e| CliError::Failure(format!("{}: {e}", path.display())))
}

fn validate(a: &ValidateArgs) -> CliResult<()> {
    let log = read_log(&a.log)?;
    let violations = validate_log(&log);
    println!("{}", log_stats(&log)?);
    if violations.is_empty() {
        println!("no violations");
        return Ok(());
    }
    for v in &violations {
        println!("{v}");
    }
    Err(CliError::Failure(format!("{} violation(s)", violations.len())))
}

fn load_dataset(d: &DataArgs) -> CliResult<Dataset> {
    let pick = |explicit: &Option<PathBuf>, name: &str, flag: &str| -> CliResult<PathBuf> {
        explicit
            .clone()
            .or_else(|| d.data.as_ref().map(|dir| dir.join(name)))
            .ok_or_else(|| CliError::Usage(format!("give --data or --{flag}")))
    };
    let log = read_log(&pick(&d.log, synthgen::EVENT_LOG_FILE, "log")?)?;
    let statics_path = pick(&d.statics, synthgen::STATIC_FILE, "static")?;
    let statics = parse_statics(open(&statics_path)?)
        .map_err(|e| CliError::Failure(format!("{}: {e}", statics_path.display())))?;
    Ok(Dataset::join(&log, &statics)?)
}

fn experiment_config(ctx: &Context, m: &ModelArgs) -> CliResult<(ExperimentConfig, Task)> {
    let mut cfg = if m.quick {
        ExperimentConfig::benchmark()
    } else {
        ctx.file.experiment.clone()
    };
    if let Some(s) = ctx.seed {
        cfg = cfg.with_seed(s);
    }
    if ctx.deterministic {
        cfg.train.deterministic = true;
    }
    if let Some(c) = m.cell {
        cfg.model.cell = c;
    }
    if m.bi {
        cfg.model.bidirectional = true;
    }
    if m.unidirectional {
        cfg.model.bidirectional = false;
    }
    if let Some(h) = m.hidden {
        cfg.model.hidden_dim = h;
    }
    if let Some(v) = m.variant {
        cfg.model.variant = v;
    }
    cfg.model = cfg.model.with_consistent_fc();
    if let Some(e) = m.epochs {
        cfg.train.max_epochs = e;
        cfg.train.patience = cfg.train.patience.min(e);
    }
    if let Some(p) = m.patience {
        cfg.train.patience = p;
    }
    if let Some(lr) = m.lr {
        cfg.train.learning_rate = lr;
    }
    if let Some(b) = m.batch_size {
        cfg.train.batch_size = b;
    }
    cfg.model.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    cfg.train.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok((cfg, m.task.unwrap_or(Task::Procurement)))
}

#[derive(Serialize)]
struct EncodedCacheEntry<'a> {
    case_id: &'a str,
    partition: &'static str,
    target_days: f64,
    static_vec: &'a [f64],
    steps: Vec<&'a [f64]>,
}

fn featurize(ctx: &Context, a: &FeaturizeArgs) -> CliResult<()> {
    let data = load_dataset(&a.data)?;
    let mut spec = ctx.file.experiment.split;
    if let Some(s) = ctx.seed {
        spec.seed = s;
    }
    let parts = split(&data.case_ids(), &spec)?;
    let encoder = fit_encoder(&data.subset(&parts.train))?;
    for w in &encoder.warnings {
        eprintln!("warning: {w}");
    }
    std::fs::create_dir_all(&a.out)?;
    std::fs::write(a.out.join(ENCODER_FILE), encoder.to_json())?;
    write_json(&a.out.join(SPLIT_FILE), &parts)?;
    let blocks = a.variant.blocks();
    let mut w = create(&a.out.join(ENCODED_FILE))?;
    w.write_all(b"[\n")?;
    let mut first = true;
    for (name, ids) in [("train", &parts.train), ("valid", &parts.valid), ("test", &parts.test)] {
        let enc = encode_dataset(&data.subset(ids), &encoder, a.task, blocks)?;
        for c in &enc.cases {
            if !first {
                w.write_all(b",\n")?;
            }
            first = false;
            let entry = EncodedCacheEntry {
                case_id: &c.case_id,
                partition: name,
                target_days: c.target_days,
                static_vec: &c.static_vec,
                steps: c.steps.iter_rows().collect(),
            };
            serde_json::to_writer(&mut w, &entry)?;
        }
    }
    w.write_all(b"\n]\n")?;
    w.flush()?;
    println!(
        "encoder: {} step features ({}), {} static features, fingerprint {}",
        encoder.step_dim(blocks),
        a.variant,
        encoder.static_dim(),
        &encoder.fingerprint()[..16]
    );
    Ok(())
}

fn train(ctx: &Context, a: &TrainArgs) -> CliResult<()> {
    let data = load_dataset(&a.data)?;
    let (cfg, task) = experiment_config(ctx, &a.model)?;
    let res = run_experiment(&data, task, &cfg)?;
    std::fs::create_dir_all(&a.out)?;
    res.predictor.save(a.out.join(CHECKPOINT_FILE))?;
    std::fs::write(a.out.join(ENCODER_FILE), res.predictor.encoder().to_json())?;
    res.history.write_csv(create(&a.out.join(HISTORY_FILE))?)?;
    write_json(&a.out.join(SPLIT_FILE), &split(&data.case_ids(), &cfg.split)?)?;
    write_json(&a.out.join(EXPERIMENT_FILE), &cfg)?;
    write_json(&a.out.join(METRICS_FILE), &res.report)?;
    println!(
        "{} {} — best epoch {} of {}",
        cfg.model.arch_label(),
        cfg.model.variant,
        res.history.best_epoch,
        res.history.epochs.len()
    );
    println!("{}", res.report);
    Ok(())
}

fn eval(a: &EvalArgs) -> CliResult<()> {
    let data = load_dataset(&a.data)?;
    let encoder_json = std::fs::read_to_string(a.model.join(ENCODER_FILE))?;
    let encoder = Arc::new(Encoder::from_json(&encoder_json)?);
    let predictor = Predictor::load(a.model.join(CHECKPOINT_FILE), encoder, None)?;
    let parts: Split = read_json(&a.model.join(SPLIT_FILE))?;
    let ids = match a.partition.as_str() {
        "train" => parts.train,
        "valid" => parts.valid,
        "test" => parts.test,
        "all" => data.case_ids(),
        other => return Err(CliError::Usage(format!("unknown partition {other:?}"))),
    };
    let subset = data.subset(&ids);
    if subset.len() != ids.len() {
        return Err(CliError::Failure(format!(
            "{} of {} split cases are missing from the data",
            ids.len() - subset.len(),
            ids.len()
        )));
    }
    let encoded = encode_dataset(&subset, predictor.encoder(), predictor.task, predictor.blocks())?;
    let report = trainer::evaluate(&predictor, &encoded)?;
    if a.json {
        println!("{}", serde_json::to_string_pretty(&report)?);
    } else {
        println!("{report}");
    }
    Ok(())
}

#[derive(Clone, Copy)]
enum SweepKind {
    Ablation,
    Bench,
}

fn sweep(ctx: &Context, a: &SweepArgs, kind: SweepKind) -> CliResult<()> {
    let data = load_dataset(&a.data)?;
    let (cfg, _) = experiment_config(ctx, &a.model)?;
    if a.seeds == 0 || a.tasks.is_empty() {
        return Err(CliError::Usage("need at least one seed and one task".into()));
    }
    let first = ctx.seed.unwrap_or(0);
    let seeds: Vec<u64> = (first..first + a.seeds).collect();
    let (mut table, stem, third) = match kind {
        SweepKind::Ablation => (
            run_ablation(&data, &cfg, &a.tasks, &seeds, ctx.jobs)?,
            ABLATION_STEM,
            ThirdColumn::Mape,
        ),
        SweepKind::Bench => (
            run_cell_benchmark(&data, &cfg, &BENCH_ARCHITECTURES, &a.tasks, &seeds, ctx.jobs)?,
            BENCH_STEM,
            ThirdColumn::Cost,
        ),
    };
    if ctx.deterministic {
        table.rows.iter_mut().for_each(|r| r.report.wall_s = 0.0);
    }
    std::fs::create_dir_all(&a.out)?;
    let md = table.to_markdown(third);
    std::fs::write(a.out.join(format!("{stem}.md")), &md)?;
    table.write_csv(create(&a.out.join(format!("{stem}.csv")))?)?;
    print!("{md}");
    Ok(())
}

fn report(a: &ReportArgs) -> CliResult<()> {
    std::fs::create_dir_all(&a.out)?;
    let mut md = String::from("# Lead time prediction summary\n\n");
    let mut found = 0;
    for dir in &a.inputs {
        if !dir.is_dir() {
            return Err(CliError::Usage(format!("{} is not a directory", dir.display())));
        }
        let tag = dir
            .file_name()
            .map_or_else(|| "run".to_string(), |s| s.to_string_lossy().into_owned());
        for (stem, title, third) in [
            (ABLATION_STEM, "Ablation study", ThirdColumn::Mape),
            (BENCH_STEM, "Sequential architecture comparison", ThirdColumn::Cost),
        ] {
            let path = dir.join(format!("{stem}.csv"));
            if path.exists() {
                let table = ResultTable::read_csv(open(&path)?, &format!("{title} ({tag})"))?;
                md.push_str(&table.to_markdown(third));
                md.push('\n');
                table.write_summary_csv(create(&a.out.join(format!("series_{tag}_{stem}.csv")))?)?;
                found += 1;
            }
        }
        let metrics = dir.join(METRICS_FILE);
        if metrics.exists() {
            let r: MetricsReport = read_json(&metrics)?;
            md.push_str(&format!("### Training run ({tag})\n\n{r}\n\n"));
            found += 1;
        }
        let history = dir.join(HISTORY_FILE);
        if history.exists() {
            let h = History::read_csv(open(&history)?)?;
            md.push_str(&format!(
                "Best validation MAE {:.3} d at epoch {} of {}.\n\n",
                h.best_valid_mae().unwrap_or(f64::NAN),
                h.best_epoch,
                h.epochs.len()
            ));
            h.write_csv(create(&a.out.join(format!("series_{tag}_history.csv")))?)?;
            found += 1;
        }
    }
    if found == 0 {
        return Err(CliError::Failure("no ablation, bench or training outputs found".into()));
    }
    std::fs::write(a.out.join(SUMMARY_FILE), &md)?;
    println!("wrote {}", a.out.join(SUMMARY_FILE).display());
    Ok(())
}
