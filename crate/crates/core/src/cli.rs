//! The `seqrec` command line.
//!
//! Every subcommand accepts `--config FILE` with `key = value` lines using
//! the subcommand's long flag names; flags given on the command line win.
//! Results go to stdout as JSON. On failure a single JSON line
//! `{"error": kind, "message": ...}` goes to stderr and the exit code is 2
//! for usage and parameter errors, 1 otherwise.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::config::load_config;
use crate::corpus::{
    build_sequences, filter_min_count, item_set, load_interactions, make_token_map, split_leave_one_out, Format,
    SplitDataset, TokenMap,
};
use crate::distill::{distill, DistillConfig};
use crate::error::{Error, Result};
use crate::evaluate::{
    evaluate, stability_experiment, sweep, Axis, ModelScorer, PipelineConfig, RunSetup, Split, Stage, SweepValue,
};
use crate::model::{init_params, load_checkpoint, save_checkpoint, InitMode, ModelConfig, ModelParams};
use crate::service::{bench, serve, ServerConfig, ServingBundle};
use crate::train::{train, TrainConfig};

#[derive(Parser, Debug)]
#[command(name = "seqrec", version, about = "Masked-item transformer recommenders with distillation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Filter an interaction log, map items to tokens and write the split dataset.
    Prepare(PrepareArgs),
    /// Train a model with masked-item prediction.
    Train(TrainArgs),
    /// Train a student against a trained teacher.
    Distill(DistillArgs),
    /// Write HR@K / NDCG@K for a checkpoint.
    Eval(EvalArgs),
    /// Run one training per value of a hyperparameter.
    Sweep(SweepArgs),
    /// Repeat the pipeline under several item-to-token mapping seeds.
    Stability(StabilityArgs),
    /// Serve recommendations over HTTP.
    Serve(ServeArgs),
    /// Compare single-request latency of a teacher and a student.
    Bench(BenchArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Role {
    Teacher,
    Student,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum StageKind {
    Train,
    Distill,
}

#[derive(Args, Debug)]
struct ModelArgs {
    /// Architecture preset (teacher: 12x768, 12 heads; student: 2x256, 4 heads).
    #[arg(long, value_enum, default_value = "student")]
    role: Role,
    #[arg(long)]
    layers: Option<usize>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    heads: Option<usize>,
    /// Feed-forward width (default 4 x hidden).
    #[arg(long)]
    ffn: Option<usize>,
    #[arg(long)]
    dropout: Option<f64>,
    /// Score with the transposed token embedding.
    #[arg(long)]
    tie_output: Option<bool>,
}

impl ModelArgs {
    fn build(&self, vocab_size: usize, max_len: usize) -> Result<ModelConfig> {
        let mut c = match self.role {
            Role::Teacher => ModelConfig::teacher(vocab_size, max_len),
            Role::Student => ModelConfig::student(vocab_size, max_len),
        };
        if let Some(d) = self.hidden {
            c.hidden_dim = d;
            c.ffn_dim = 4 * d;
        }
        c.num_layers = self.layers.unwrap_or(c.num_layers);
        c.num_heads = self.heads.unwrap_or(c.num_heads);
        c.ffn_dim = self.ffn.unwrap_or(c.ffn_dim);
        c.dropout = self.dropout.unwrap_or(c.dropout);
        c.tie_output = self.tie_output.unwrap_or(c.tie_output);
        c.validate().map_err(|e| Error::param(e.to_string()))?;
        Ok(c)
    }
}

#[derive(Args, Debug)]
struct TrainingArgs {
    /// Learning rate (default 2e-5 for the teacher role, 1e-4 otherwise).
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long, default_value_t = 32)]
    batch_size: usize,
    /// Maximum number of epochs.
    #[arg(long, default_value_t = 150)]
    epochs: usize,
    /// Epochs without strict improvement before stopping.
    #[arg(long, default_value_t = 5)]
    patience: usize,
    /// Mask ratio.
    #[arg(long, default_value_t = 0.35)]
    rho: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Clip gradients to this global L2 norm.
    #[arg(long)]
    grad_clip: Option<f64>,
    /// Validation metric used for early stopping.
    #[arg(long, default_value = "NDCG@10")]
    metric: String,
    /// CSV training log (epoch,step,loss,metric).
    #[arg(long)]
    log: Option<PathBuf>,
}

impl TrainingArgs {
    fn build(&self, role: Role) -> Result<TrainConfig> {
        let base = match role {
            Role::Teacher => TrainConfig::teacher(),
            Role::Student => TrainConfig::default(),
        };
        let cfg = TrainConfig {
            learning_rate: self.lr.unwrap_or(base.learning_rate),
            batch_size: self.batch_size,
            max_epochs: self.epochs,
            patience: self.patience,
            rho: self.rho,
            seed: self.seed,
            grad_clip: self.grad_clip,
            selection_metric: self.metric.clone(),
            ..base
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn open_log(&self) -> Result<Option<BufWriter<File>>> {
        Ok(match &self.log {
            Some(p) => Some(BufWriter::new(File::create(p)?)),
            None => None,
        })
    }
}

#[derive(Args, Debug)]
struct InitArgs {
    #[arg(long, default_value = "scratch_all")]
    init_mode: String,
    /// Checkpoint for every init mode other than scratch_all.
    #[arg(long)]
    init_checkpoint: Option<PathBuf>,
}

impl InitArgs {
    fn load(&self) -> Result<(InitMode, Option<ModelParams>)> {
        let mode: InitMode = self.init_mode.parse()?;
        let ckpt = match &self.init_checkpoint {
            Some(p) => Some(load_checkpoint(p)?.0),
            None => None,
        };
        Ok((mode, ckpt))
    }
}

#[derive(Args, Debug)]
struct PrepareArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Interaction log to read.
    #[arg(long)]
    input: PathBuf,
    /// ml-1m (`user::item::rating::timestamp`) or tsv (`user<TAB>item<TAB>timestamp`).
    #[arg(long, default_value = "ml-1m")]
    format: String,
    #[arg(long, default_value_t = 5)]
    min_count: usize,
    /// Seed of the item-to-token mapping.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 200)]
    max_len: usize,
    /// Output directory for dataset.srds and tokenmap.json.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Prepared dataset (dataset.srds).
    #[arg(long)]
    data: PathBuf,
    /// Where to write the best checkpoint.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    training: TrainingArgs,
    #[command(flatten)]
    init: InitArgs,
}

#[derive(Args, Debug)]
struct DistillArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    data: PathBuf,
    /// Trained teacher checkpoint.
    #[arg(long)]
    teacher: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Weight of the hard-label loss.
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
    #[arg(long, default_value_t = 1.5)]
    temperature: f64,
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    training: TrainingArgs,
    #[command(flatten)]
    init: InitArgs,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "test")]
    split: String,
    #[arg(long, value_delimiter = ',', default_value = "5,10")]
    ks: Vec<usize>,
    /// Keep per-user ranks in the report.
    #[arg(long)]
    ranks: Option<bool>,
    /// Report path (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// rho, alpha, temperature or init_mode.
    #[arg(long)]
    axis: String,
    #[arg(long, value_delimiter = ',', required = true)]
    values: Vec<String>,
    #[arg(long)]
    data: PathBuf,
    /// Defaults to distill for alpha and temperature sweeps.
    #[arg(long, value_enum)]
    stage: Option<StageKind>,
    #[arg(long)]
    teacher: Option<PathBuf>,
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
    #[arg(long, default_value_t = 1.5)]
    temperature: f64,
    #[arg(long, default_value = "val")]
    split: String,
    #[arg(long, value_delimiter = ',', default_value = "5,10")]
    ks: Vec<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    training: TrainingArgs,
    #[command(flatten)]
    init: InitArgs,
}

#[derive(Args, Debug)]
struct StabilityArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = "ml-1m")]
    format: String,
    #[arg(long, default_value_t = 5)]
    min_count: usize,
    #[arg(long, default_value_t = 200)]
    max_len: usize,
    /// Mapping seeds, at least two.
    #[arg(long, value_delimiter = ',', default_value = "0,1,2")]
    seeds: Vec<u64>,
    #[arg(long, value_enum, default_value = "train")]
    stage: StageKind,
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
    #[arg(long, default_value_t = 1.5)]
    temperature: f64,
    #[arg(long)]
    teacher_layers: Option<usize>,
    #[arg(long)]
    teacher_hidden: Option<usize>,
    #[arg(long)]
    teacher_heads: Option<usize>,
    #[arg(long)]
    teacher_lr: Option<f64>,
    #[arg(long)]
    teacher_epochs: Option<usize>,
    #[arg(long, default_value = "test")]
    split: String,
    #[arg(long, value_delimiter = ',', default_value = "5,10")]
    ks: Vec<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    training: TrainingArgs,
}

#[derive(Args, Debug)]
struct ServeArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    tokenmap: PathBuf,
    /// Port (default: $SEQREC_PORT, then 8080).
    #[arg(long)]
    port: Option<u16>,
    #[arg(long, default_value = "127.0.0.1")]
    host: String,
    #[arg(long, default_value_t = 1000)]
    deadline_ms: u64,
    #[arg(long, default_value_t = 64)]
    max_in_flight: usize,
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    teacher: PathBuf,
    #[arg(long)]
    student: PathBuf,
    #[arg(long)]
    tokenmap: PathBuf,
    /// One request per line: item IDs separated by spaces or commas.
    #[arg(long)]
    trace: PathBuf,
    #[arg(long, default_value_t = 20)]
    warmup: usize,
    #[arg(long, default_value_t = 10)]
    k: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Inserts `--key value` for config-file entries not already on the
/// command line. Keys the subcommand does not know are configuration errors.
fn merge_config_file(args: Vec<OsString>) -> Result<Vec<OsString>> {
    let strs: Vec<String> = args.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    let Some(pos) = strs.iter().position(|a| a == "--config" || a.starts_with("--config=")) else {
        return Ok(args);
    };
    let path = match strs[pos].strip_prefix("--config=") {
        Some(p) => p.to_string(),
        None => strs
            .get(pos + 1)
            .cloned()
            .ok_or_else(|| Error::Config("--config needs a path".into()))?,
    };
    let Some(sub_pos) = strs.iter().skip(1).position(|a| !a.starts_with('-')).map(|p| p + 1) else {
        return Ok(args);
    };
    let root = Cli::command();
    let Some(sub) = root.find_subcommand(&strs[sub_pos]) else {
        return Ok(args);
    };
    let present = |key: &str| {
        let flag = format!("--{key}");
        strs.iter().any(|a| *a == flag || a.starts_with(&format!("{flag}=")))
    };
    let mut extra = Vec::new();
    for (key, value) in load_config(&path)? {
        let Some(arg) = sub.get_arguments().find(|a| a.get_long() == Some(key.as_str())) else {
            return Err(Error::Config(format!("unknown key {key:?} for {}", sub.get_name())));
        };
        if key == "config" || present(&key) {
            continue;
        }
        if !arg.get_action().takes_values() {
            return Err(Error::Config(format!("key {key:?} takes no value")));
        }
        extra.push(OsString::from(format!("--{key}")));
        extra.push(OsString::from(value));
    }
    let mut merged = args;
    merged.splice(sub_pos + 1..sub_pos + 1, extra);
    Ok(merged)
}

fn emit(value: &impl Serialize, out: Option<&PathBuf>) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match out {
        Some(p) => std::fs::write(p, text + "\n")?,
        None => println!("{text}"),
    }
    Ok(())
}

fn check_ks(ks: &[usize]) -> Result<()> {
    if ks.is_empty() || ks.contains(&0) {
        return Err(Error::param("every K must be at least 1"));
    }
    Ok(())
}

fn prepare_cmd(a: PrepareArgs) -> Result<()> {
    let format: Format = a.format.parse()?;
    let interactions = filter_min_count(load_interactions(&a.input, format)?, a.min_count)?;
    let sequences = build_sequences(&interactions);
    let items = item_set(&sequences);
    let map = make_token_map(&items, a.seed)?;
    let mut outcome = split_leave_one_out(&sequences, a.max_len, &map)?;
    outcome.dataset.provenance = format.name().to_string();
    std::fs::create_dir_all(&a.out)?;
    outcome.dataset.save(a.out.join("dataset.srds"))?;
    map.save(a.out.join("tokenmap.json"))?;
    emit(
        &serde_json::json!({
            "users": outcome.dataset.user_count(),
            "items": items.len(),
            "excluded_users": outcome.excluded_users,
            "vocab_size": map.vocab_size(),
            "max_len": a.max_len,
        }),
        None,
    )
}

fn train_cmd(a: TrainArgs) -> Result<()> {
    let ds = SplitDataset::load(&a.data)?;
    let cfg = a.model.build(ds.vocab_size, ds.max_len)?;
    let mut tc = a.training.build(a.model.role)?;
    tc.checkpoint_path = Some(a.out.clone());
    let (mode, ckpt) = a.init.load()?;
    let init = init_params(&cfg, tc.seed, mode, ckpt.as_ref())?;
    let mut log = a.training.open_log()?;
    let (best, history) = train(init, &cfg, &ds, &tc, log.as_mut().map(|w| w as &mut dyn Write))?;
    save_checkpoint(&best, &cfg, &a.out)?;
    emit(&history, None)
}

fn distill_cmd(a: DistillArgs) -> Result<()> {
    let ds = SplitDataset::load(&a.data)?;
    let cfg = a.model.build(ds.vocab_size, ds.max_len)?;
    let mut train = a.training.build(a.model.role)?;
    train.checkpoint_path = Some(a.out.clone());
    let dc = DistillConfig {
        alpha: a.alpha,
        temperature: a.temperature,
        train,
    };
    dc.validate()?;
    let (teacher, teacher_cfg) = load_checkpoint(&a.teacher)?;
    let (mode, ckpt) = a.init.load()?;
    let init = init_params(&cfg, dc.train.seed, mode, ckpt.as_ref())?;
    let mut log = a.training.open_log()?;
    let (best, history) = distill(
        &teacher,
        &teacher_cfg,
        init,
        &cfg,
        &ds,
        &dc,
        log.as_mut().map(|w| w as &mut dyn Write),
    )?;
    save_checkpoint(&best, &cfg, &a.out)?;
    emit(&history, None)
}

fn eval_cmd(a: EvalArgs) -> Result<()> {
    let split: Split = a.split.parse()?;
    check_ks(&a.ks)?;
    let (params, config) = load_checkpoint(&a.checkpoint)?;
    let ds = SplitDataset::load(&a.data)?;
    let mut report = evaluate(&ModelScorer { params: &params, config: &config }, &ds, split, &a.ks)?;
    if !a.ranks.unwrap_or(false) {
        report = report.without_ranks();
    }
    emit(&report, a.out.as_ref())
}

fn sweep_cmd(a: SweepArgs) -> Result<()> {
    let axis: Axis = a.axis.parse()?;
    let values = a
        .values
        .iter()
        .map(|v| SweepValue::parse(axis, v))
        .collect::<Result<Vec<_>>>()?;
    check_ks(&a.ks)?;
    let ds = SplitDataset::load(&a.data)?;
    let model = a.model.build(ds.vocab_size, ds.max_len)?;
    let train = a.training.build(a.model.role)?;
    let default_stage = match axis {
        Axis::Alpha | Axis::Temperature => StageKind::Distill,
        _ => StageKind::Train,
    };
    let stage = match a.stage.unwrap_or(default_stage) {
        StageKind::Train => Stage::Train,
        StageKind::Distill => Stage::Distill {
            alpha: a.alpha,
            temperature: a.temperature,
        },
    };
    let teacher = match &a.teacher {
        Some(p) => Some(load_checkpoint(p)?),
        None => None,
    };
    let (init_mode, init_ckpt) = a.init.load()?;
    let setup = RunSetup {
        stage,
        teacher: teacher.as_ref().map(|(p, c)| (p, c)),
        init_mode,
        init_checkpoint: init_ckpt.as_ref(),
        split: a.split.parse()?,
        ks: a.ks.clone(),
        ..RunSetup::new(&ds, model, train)
    };
    emit(&sweep(axis, &values, &setup)?, a.out.as_ref())
}

fn stability_cmd(a: StabilityArgs) -> Result<()> {
    let format: Format = a.format.parse()?;
    check_ks(&a.ks)?;
    let interactions = filter_min_count(load_interactions(&a.input, format)?, a.min_count)?;
    let sequences = build_sequences(&interactions);
    // Vocabulary and length are filled in per mapping.
    let model = a.model.build(3, a.max_len)?;
    let train = a.training.build(a.model.role)?;
    let (stage, teacher) = match a.stage {
        StageKind::Train => (Stage::Train, None),
        StageKind::Distill => {
            let mut tc = ModelConfig::teacher(3, a.max_len);
            if let Some(d) = a.teacher_hidden {
                tc.hidden_dim = d;
                tc.ffn_dim = 4 * d;
            }
            tc.num_layers = a.teacher_layers.unwrap_or(tc.num_layers);
            tc.num_heads = a.teacher_heads.unwrap_or(tc.num_heads);
            tc.validate().map_err(|e| Error::param(e.to_string()))?;
            let tt = TrainConfig {
                learning_rate: a.teacher_lr.unwrap_or(TrainConfig::teacher().learning_rate),
                max_epochs: a.teacher_epochs.unwrap_or(train.max_epochs),
                ..train.clone()
            };
            tt.validate()?;
            let stage = Stage::Distill {
                alpha: a.alpha,
                temperature: a.temperature,
            };
            (stage, Some((tc, tt)))
        }
    };
    let cfg = PipelineConfig {
        max_len: a.max_len,
        model,
        train,
        stage,
        teacher,
        split: a.split.parse()?,
        ks: a.ks.clone(),
    };
    emit(&stability_experiment(&sequences, &a.seeds, &cfg)?, a.out.as_ref())
}

fn serve_cmd(a: ServeArgs) -> Result<()> {
    let port = match a.port {
        Some(p) => p,
        None => match std::env::var("SEQREC_PORT") {
            Ok(v) => v
                .parse()
                .map_err(|_| Error::param(format!("SEQREC_PORT={v:?} is not a port")))?,
            Err(_) => 8080,
        },
    };
    if a.deadline_ms == 0 || a.max_in_flight == 0 {
        return Err(Error::param("deadline-ms and max-in-flight must be positive"));
    }
    let bundle = Arc::new(ServingBundle::load(&a.checkpoint, &a.tokenmap)?);
    let config = ServerConfig {
        deadline: Duration::from_millis(a.deadline_ms),
        max_in_flight: a.max_in_flight,
    };
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind((a.host.as_str(), port)).await?;
        let addr = listener.local_addr()?;
        println!("{}", serde_json::json!({ "listening": addr.to_string() }));
        std::io::stdout().flush()?;
        let shutdown = async {
            let _ = tokio::signal::ctrl_c().await;
        };
        serve(listener, bundle, config, shutdown).await
    })
}

/// Reads one history per line, items separated by whitespace or commas.
pub fn read_trace(path: &PathBuf) -> Result<Vec<Vec<String>>> {
    let file = File::open(path)?;
    let mut out = Vec::new();
    for line in BufReader::new(file).lines() {
        let items: Vec<String> = line?
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|s| !s.is_empty())
            .map(str::to_string)
            .collect();
        out.push(items);
    }
    Ok(out)
}

fn bench_cmd(a: BenchArgs) -> Result<()> {
    let map = TokenMap::load(&a.tokenmap)?;
    let (tp, tc) = load_checkpoint(&a.teacher)?;
    let (sp, sc) = load_checkpoint(&a.student)?;
    let teacher = ServingBundle::new(tp, tc, map.clone())?;
    let student = ServingBundle::new(sp, sc, map)?;
    if a.k == 0 {
        return Err(Error::param("k must be at least 1"));
    }
    let trace = read_trace(&a.trace)?;
    emit(&bench(&teacher, &student, &trace, a.warmup, a.k)?, a.out.as_ref())
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Prepare(a) => prepare_cmd(a),
        Command::Train(a) => train_cmd(a),
        Command::Distill(a) => distill_cmd(a),
        Command::Eval(a) => eval_cmd(a),
        Command::Sweep(a) => sweep_cmd(a),
        Command::Stability(a) => stability_cmd(a),
        Command::Serve(a) => serve_cmd(a),
        Command::Bench(a) => bench_cmd(a),
    }
}

fn report_error(kind: &str, message: &str) {
    eprintln!("{}", serde_json::json!({ "error": kind, "message": message }));
}

/// Runs the command line and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let args = match merge_config_file(args) {
        Ok(a) => a,
        Err(e) => {
            report_error(e.kind(), &e.to_string());
            return 2;
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("invalid arguments");
            report_error("usage", first.trim_start_matches("error: "));
            return 2;
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            report_error(e.kind(), &e.to_string());
            match e {
                Error::Parameter(_) => 2,
                _ => 1,
            }
        }
    }
}
