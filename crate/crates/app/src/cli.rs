use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use nftmine_core::baselines::{self, LrConfig, LrModel, NbModel};
use nftmine_core::container;
use nftmine_core::eda;
use nftmine_core::ffm::{self, default_field_spec, FieldDecl, FfmRow, Vocabulary};
use nftmine_core::ingest::{
    self, clean, group_records, parse_events, parse_timestamp, sample_negatives, serialize_events,
    split_dataset, CleaningConfig, Grouping, InteractionRecord, SplitFractions, SynthSpec,
};
use nftmine_core::metrics;
use nftmine_core::model::{self, ModelConfig, VocabRef};
use nftmine_core::recommend::{recommend, CandidateOptions, Catalog};

use crate::server;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;

pub const TRAIN_FILE: &str = "train.jsonl";
pub const VALIDATION_FILE: &str = "validation.jsonl";
pub const TEST_FILE: &str = "test.jsonl";
pub const CATALOG_FILE: &str = "catalog.json";
pub const VOCAB_FILE: &str = "vocab.json";

#[derive(Parser, Debug)]
#[command(name = "nftmine", version, about = "NFT marketplace recommender pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic event stream as line-delimited JSON
    Synth(SynthArgs),
    /// Clean events and write labeled train/validation/test records
    Ingest(IngestArgs),
    /// Write the exploratory statistics report
    Eda(EdaArgs),
    /// Build the vocabulary and write libffm datasets
    Encode(EncodeArgs),
    /// Train the xDeepFM model
    Train(TrainArgs),
    /// Train a logistic regression or naive Bayes baseline
    Baseline(BaselineArgs),
    /// Score an encoded dataset with a saved model
    Eval(EvalArgs),
    /// Print the top-K recommendations for one user
    Recommend(RecommendArgs),
    /// Run the HTTP recommendation service
    Serve(ServeArgs),
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long, default_value_t = 200)]
    users: usize,
    #[arg(long, default_value_t = 500)]
    assets: usize,
    #[arg(long, default_value_t = 20)]
    collections: usize,
    #[arg(long, default_value_t = 20_000)]
    events: usize,
    #[arg(long, default_value_t = 4)]
    clusters: usize,
    #[arg(long, default_value_t = SynthSpec::default().affinity)]
    affinity: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum GroupingArg {
    Asset,
    Collection,
}

impl From<GroupingArg> for Grouping {
    fn from(g: GroupingArg) -> Self {
        match g {
            GroupingArg::Asset => Grouping::AssetBased,
            GroupingArg::Collection => Grouping::CollectionBased,
        }
    }
}

fn parse_fractions(s: &str) -> std::result::Result<SplitFractions, String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("{p:?}: {e}")))
        .collect::<std::result::Result<_, _>>()?;
    let [train, validation, test] = parts[..] else {
        return Err("expected three comma-separated fractions".into());
    };
    let f = SplitFractions { train, validation, test };
    f.validate().map_err(|e| e.to_string())?;
    Ok(f)
}

#[derive(Args, Debug)]
struct IngestArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    window_start: Option<String>,
    #[arg(long)]
    window_end: Option<String>,
    #[arg(long, default_value_t = 0.25)]
    threshold: f64,
    #[arg(long, default_value_t = 1.0)]
    neg_ratio: f64,
    #[arg(long, value_enum, default_value_t = GroupingArg::Asset)]
    grouping: GroupingArg,
    /// Train, validation and test fractions
    #[arg(long, value_parser = parse_fractions, default_value = "0.8,0.1,0.1")]
    split: SplitFractions,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct EdaArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = "1h")]
    bucket: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct EncodeArgs {
    /// Directory written by `ingest`
    #[arg(long)]
    data: PathBuf,
    /// JSON list of field declarations; the built-in list when absent
    #[arg(long)]
    fields: Option<PathBuf>,
    /// Output directory; defaults to --data
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// Directory holding train.ffm, validation.ffm and vocab.json
    #[arg(long)]
    data: PathBuf,
    /// Model config JSON; missing keys take defaults
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    out: PathBuf,
    /// Where to write the per-epoch report
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Algo {
    Lr,
    Nb,
}

#[derive(Args, Debug)]
struct BaselineArgs {
    #[arg(long, value_enum)]
    algo: Algo,
    #[arg(long)]
    data: PathBuf,
    /// LR config JSON; missing keys take defaults
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    /// Encoded dataset (.ffm)
    #[arg(long)]
    data: PathBuf,
}

#[derive(Args, Debug)]
struct RecommendArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    catalog: PathBuf,
    /// Vocabulary; defaults to the one recorded in the model file
    #[arg(long)]
    vocab: Option<PathBuf>,
    #[arg(long)]
    user: String,
    #[arg(long, default_value_t = 10)]
    k: usize,
    #[arg(long)]
    collection: Option<String>,
    #[arg(long)]
    exclude_owned: bool,
}

#[derive(Args, Debug)]
struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:8080")]
    bind: String,
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    catalog: PathBuf,
    #[arg(long)]
    vocab: Option<PathBuf>,
    #[arg(long)]
    exclude_owned: bool,
}

/// Parses `argv` (program name first) and runs the subcommand. Returns the
/// process exit code: 0 on success, 1 on usage errors, 2 on data errors.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    init_logging();
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_DATA
        }
    }
}

fn init_logging() {
    let env = env_logger::Env::new().filter_or("NFTMINE_LOG", "warn");
    let _ = env_logger::Builder::from_env(env).format_timestamp(None).try_init();
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Synth(a) => synth(a),
        Command::Ingest(a) => ingest_cmd(a),
        Command::Eda(a) => eda_cmd(a),
        Command::Encode(a) => encode(a),
        Command::Train(a) => train_cmd(a),
        Command::Baseline(a) => baseline(a),
        Command::Eval(a) => eval(a),
        Command::Recommend(a) => recommend_cmd(a),
        Command::Serve(a) => serve(a),
    }
}

fn print_json(v: &serde_json::Value) -> Result<()> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer(&mut out, v)?;
    writeln!(out)?;
    Ok(())
}

fn synth(a: SynthArgs) -> Result<()> {
    let spec = SynthSpec {
        n_users: a.users,
        n_assets: a.assets,
        n_collections: a.collections,
        n_events: a.events,
        n_clusters: a.clusters,
        affinity: a.affinity,
        seed: a.seed,
    };
    let events = ingest::generate_synthetic(&spec);
    fs::write(&a.out, serialize_events(&events)).with_context(|| format!("writing {}", a.out.display()))?;
    log::info!("wrote {} events to {}", events.len(), a.out.display());
    Ok(())
}

fn read_events(path: &Path) -> Result<Vec<ingest::RawEvent>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let parsed = parse_events(&text).with_context(|| format!("parsing {}", path.display()))?;
    if !parsed.skipped.is_empty() {
        log::warn!("skipped {} malformed records", parsed.skipped.len());
    }
    Ok(parsed.events)
}

fn timestamp_arg(s: &Option<String>, default: chrono::DateTime<chrono::Utc>) -> Result<chrono::DateTime<chrono::Utc>> {
    match s {
        None => Ok(default),
        Some(s) => parse_timestamp(s).with_context(|| format!("bad timestamp {s:?}")),
    }
}

fn write_jsonl(path: &Path, records: &[InteractionRecord]) -> Result<()> {
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    ingest::write_records(BufWriter::new(f), records)?;
    Ok(())
}

fn read_jsonl(path: &Path) -> Result<Vec<InteractionRecord>> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    ingest::read_records(BufReader::new(f)).with_context(|| format!("reading {}", path.display()))
}

fn ingest_cmd(a: IngestArgs) -> Result<()> {
    let defaults = CleaningConfig::default();
    let cfg = CleaningConfig {
        window_start: timestamp_arg(&a.window_start, defaults.window_start)?,
        window_end: timestamp_arg(&a.window_end, defaults.window_end)?,
        empty_rate_threshold: a.threshold,
        negative_ratio: a.neg_ratio,
        rng_seed: a.seed,
    };
    let events = read_events(&a.input)?;
    let cleaned = clean(&events, &cfg)?;
    if cleaned.records.is_empty() {
        bail!("no positive interactions survived cleaning");
    }
    let grouping: Grouping = a.grouping.into();
    let positives = group_records(&cleaned.records, grouping);
    let negatives = sample_negatives(&positives, &cfg);
    let mut all = positives.clone();
    all.extend(negatives.records.iter().cloned());
    let bundle = split_dataset(all, a.split, a.seed, grouping)?;

    fs::create_dir_all(&a.out)?;
    write_jsonl(&a.out.join(TRAIN_FILE), &bundle.train)?;
    write_jsonl(&a.out.join(VALIDATION_FILE), &bundle.validation)?;
    write_jsonl(&a.out.join(TEST_FILE), &bundle.test)?;
    Catalog::from_records(&positives).save(a.out.join(CATALOG_FILE))?;

    print_json(&json!({
        "events": events.len(),
        "out_of_window": cleaned.out_of_window,
        "non_interest": cleaned.non_interest,
        "missing_keys": cleaned.missing_keys,
        "dropped_columns": cleaned.dropped_columns,
        "positives": positives.len(),
        "negatives": negatives.records.len(),
        "negatives_requested": negatives.requested,
        "negative_pool": negatives.pool_size,
        "train": bundle.train.len(),
        "validation": bundle.validation.len(),
        "test": bundle.test.len(),
    }))
}

fn eda_cmd(a: EdaArgs) -> Result<()> {
    let width = eda::parse_duration(&a.bucket)?;
    let events = read_events(&a.input)?;
    let summaries = eda::summarize_features(&events)?;
    let records: Vec<InteractionRecord> = events
        .iter()
        .filter_map(|e| InteractionRecord::from_event(e, e.event_type.is_interest() as u8, |_| true))
        .collect();
    let columns = eda::numeric_columns(&records);
    let matrix = eda::correlation_matrix(&records, &columns)?;
    let trend = eda::market_trend(&events, width)?;
    let report = eda::emit_report(summaries, matrix, trend, eda::bivariate(&events));
    fs::write(&a.out, report).with_context(|| format!("writing {}", a.out.display()))?;
    Ok(())
}

fn ffm_name(jsonl: &str) -> String {
    jsonl.replace(".jsonl", ".ffm")
}

fn encode(a: EncodeArgs) -> Result<()> {
    let spec: Vec<FieldDecl> = match &a.fields {
        Some(p) => serde_json::from_str(&fs::read_to_string(p)?).with_context(|| format!("parsing {}", p.display()))?,
        None => default_field_spec(),
    };
    let out = a.out.clone().unwrap_or_else(|| a.data.clone());
    fs::create_dir_all(&out)?;
    let splits = [TRAIN_FILE, VALIDATION_FILE, TEST_FILE];
    let data: Vec<Vec<InteractionRecord>> =
        splits.iter().map(|f| read_jsonl(&a.data.join(f))).collect::<Result<_>>()?;
    let union: Vec<InteractionRecord> = data.iter().flatten().cloned().collect();
    let vocab = Vocabulary::build(&union, &spec)?;
    vocab.save(out.join(VOCAB_FILE))?;
    for (name, records) in splits.iter().zip(&data) {
        let rows: Vec<FfmRow> = records.iter().map(|r| vocab.encode(r)).collect();
        ffm::write_dataset(&rows, out.join(ffm_name(name)))?;
    }
    print_json(&json!({ "n_fields": vocab.n_fields(), "n_features": vocab.n_features }))
}

fn load_vocab(dir: &Path) -> Result<(Vocabulary, PathBuf)> {
    let path = dir.join(VOCAB_FILE);
    let vocab = Vocabulary::load(&path).with_context(|| format!("loading {}", path.display()))?;
    let abs = fs::canonicalize(&path).unwrap_or(path);
    Ok((vocab, abs))
}

fn read_split(dir: &Path, jsonl: &str, required: bool) -> Result<Vec<FfmRow>> {
    let path = dir.join(ffm_name(jsonl));
    if !required && !path.exists() {
        return Ok(Vec::new());
    }
    ffm::read_dataset(&path).with_context(|| format!("reading {}", path.display()))
}

fn train_cmd(a: TrainArgs) -> Result<()> {
    let (vocab, vocab_path) = load_vocab(&a.data)?;
    let mut cfg: ModelConfig = match &a.config {
        Some(p) => serde_json::from_str(&fs::read_to_string(p)?).with_context(|| format!("parsing {}", p.display()))?,
        None => ModelConfig::default(),
    };
    cfg.n_fields = vocab.n_fields();
    cfg.n_features = vocab.n_features as usize;
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(e) = a.epochs {
        cfg.epochs = e;
    }
    let train_rows = read_split(&a.data, TRAIN_FILE, true)?;
    let val_rows = read_split(&a.data, VALIDATION_FILE, false)?;
    let (params, report) = model::train(&cfg, &train_rows, &val_rows)?;
    let vocab_ref = VocabRef {
        path: vocab_path.to_string_lossy().into_owned(),
        n_fields: vocab.n_fields(),
        n_features: vocab.n_features as usize,
    };
    model::save_model(&params, &cfg, &vocab_ref, &a.out)?;
    let report_json = serde_json::to_value(&report)?;
    if let Some(p) = &a.report {
        fs::write(p, serde_json::to_string_pretty(&report_json)? + "\n")?;
    }
    print_json(&json!({ "best_epoch": report.best_epoch, "epochs": report.epochs.len() }))
}

fn baseline(a: BaselineArgs) -> Result<()> {
    let (vocab, _) = load_vocab(&a.data)?;
    let n = vocab.n_features as usize;
    let rows = read_split(&a.data, TRAIN_FILE, true)?;
    let c = match a.algo {
        Algo::Lr => {
            let mut cfg: LrConfig = match &a.config {
                Some(p) => serde_json::from_str(&fs::read_to_string(p)?)?,
                None => LrConfig::default(),
            };
            if let Some(s) = a.seed {
                cfg.seed = s;
            }
            baselines::lr_train(&rows, n, &cfg)?.to_container()
        }
        Algo::Nb => baselines::nb_train(&rows, n)?.to_container(),
    };
    container::write_file(&c, &a.out)?;
    Ok(())
}

/// Any saved model, dispatched on the container kind.
#[allow(clippy::large_enum_variant)]
pub enum AnyModel {
    XDeepFm(model::LoadedModel),
    Lr(LrModel),
    Nb(NbModel),
}

impl AnyModel {
    pub fn load(path: &Path) -> Result<Self> {
        let c = container::read_file(path).with_context(|| format!("loading {}", path.display()))?;
        Ok(match c.kind.as_str() {
            model::MODEL_KIND => Self::XDeepFm(model::load_model(path)?),
            baselines::LR_KIND => Self::Lr(LrModel::from_container(c)?),
            baselines::NB_KIND => Self::Nb(NbModel::from_container(c)?),
            other => bail!("unknown model kind {other:?}"),
        })
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Self::XDeepFm(_) => model::MODEL_KIND,
            Self::Lr(_) => baselines::LR_KIND,
            Self::Nb(_) => baselines::NB_KIND,
        }
    }

    pub fn predict(&self, rows: &[FfmRow]) -> Result<Vec<f64>> {
        let each = |f: &dyn Fn(&FfmRow) -> Result<f64, baselines::BaselineError>| -> Result<Vec<f64>> {
            rows.iter().enumerate().map(|(i, r)| f(r).with_context(|| format!("row {i}"))).collect()
        };
        match self {
            Self::XDeepFm(m) => Ok(model::predict_batch(&m.params, rows)?),
            Self::Lr(m) => each(&|r| baselines::lr_predict(m, r)),
            Self::Nb(m) => each(&|r| baselines::nb_predict(m, r)),
        }
    }
}

fn eval(a: EvalArgs) -> Result<()> {
    let m = AnyModel::load(&a.model)?;
    let rows = ffm::read_dataset(&a.data).with_context(|| format!("reading {}", a.data.display()))?;
    let probs = m.predict(&rows)?;
    let labels: Vec<u8> = rows.iter().map(|r| r.label).collect();
    let r = metrics::evaluate(&probs, &labels)?;
    print_json(&json!({
        "model": m.kind(),
        "auc": r.auc,
        "logloss": r.logloss,
        "n_pos": r.n_pos,
        "n_neg": r.n_neg,
    }))
}

/// Loads an xDeepFM model, its vocabulary and a catalog for serving.
pub fn load_serving(model_path: &Path, catalog: &Path, vocab: Option<&Path>) -> Result<server::Snapshot> {
    let m = model::load_model(model_path).with_context(|| format!("loading {}", model_path.display()))?;
    let vocab_path = match vocab {
        Some(p) => p.to_path_buf(),
        None => PathBuf::from(&m.vocab_ref.path),
    };
    let vocab = Vocabulary::load(&vocab_path).with_context(|| format!("loading {}", vocab_path.display()))?;
    if vocab.n_fields() != m.config.n_fields || vocab.n_features as usize != m.config.n_features {
        bail!("vocabulary {} does not match the model shapes", vocab_path.display());
    }
    let catalog = Catalog::load(catalog).with_context(|| format!("loading {}", catalog.display()))?;
    if catalog.is_empty() {
        bail!("catalog is empty");
    }
    Ok(server::Snapshot::new(m, catalog, vocab))
}

fn recommend_cmd(a: RecommendArgs) -> Result<()> {
    if a.k == 0 {
        bail!("--k must be at least 1");
    }
    let snap = load_serving(&a.model, &a.catalog, a.vocab.as_deref())?;
    let opts = CandidateOptions { collection: a.collection.as_deref(), exclude_owned: a.exclude_owned };
    let rec = recommend(&a.user, a.k, &opts, &snap.model.params, &snap.catalog, &snap.vocab)?;
    print_json(&serde_json::to_value(&rec)?)
}

fn serve(a: ServeArgs) -> Result<()> {
    let mut snap = load_serving(&a.model, &a.catalog, a.vocab.as_deref())?;
    snap.exclude_owned = a.exclude_owned;
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(&a.bind).await.with_context(|| format!("binding {}", a.bind))?;
        let addr = listener.local_addr()?;
        println!("listening on http://{addr}");
        std::io::stdout().flush()?;
        log::info!("serving model {}", snap.model_version);
        server::serve(listener, snap).await?;
        Ok(())
    })
}
