//! `topicseed` command line: preprocess, run, eval, report.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage or validation error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use topicseed::config::RunConfig;
use topicseed::corpus::{load_corpus, SeedSet};
use topicseed::eval::{evaluate, GoldLabels, MetricsReport};
use topicseed::pipeline::{read_run_state, write_run_state, TopicResult};
use topicseed::plm::load_mentions;
use topicseed::workflow::{init_threads, Bundle, Prepared};

#[derive(Parser)]
#[command(name = "topicseed", version, about = "Seed-guided topic term discovery")]
struct Cli {
    /// Log more (repeat for debug output).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Split a corpus, build its vocabulary and write a corpus bundle.
    Preprocess {
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        seeds: Option<PathBuf>,
        /// Bundle directory to create.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Run the iterative pipeline on a bundle.
    Run {
        #[arg(long)]
        bundle: Option<PathBuf>,
        /// Encoder mention file exported for the bundle's train.txt.
        #[arg(long)]
        mentions: Option<PathBuf>,
        /// Output directory for topics, run report and checkpoints.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Continue from a run-state checkpoint.
        #[arg(long)]
        resume: Option<PathBuf>,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Score a topics file: NPMI on the test split, P@k and NDCG@k on gold.
    Eval {
        /// topics.txt or topics.json from `run`.
        #[arg(long)]
        topics: PathBuf,
        #[arg(long)]
        bundle: Option<PathBuf>,
        #[arg(long)]
        gold: Option<PathBuf>,
        #[arg(long, default_value_t = 20)]
        k: usize,
        /// Directory for metrics.json and metrics.txt.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Print topics with supporting sentences and, if given, metrics.
    Report {
        #[arg(long)]
        topics: PathBuf,
        /// Bundle to quote supporting sentences from.
        #[arg(long)]
        bundle: Option<PathBuf>,
        #[arg(long)]
        metrics: Option<PathBuf>,
        /// Terms shown per seed.
        #[arg(long, default_value_t = 20)]
        top: usize,
        #[command(flatten)]
        config: ConfigArgs,
    },
}

/// A config file plus one flag per config key.
#[derive(Args, Default)]
struct ConfigArgs {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,

    #[arg(long, help_heading = "corpus")]
    min_count: Option<u64>,
    #[arg(long, help_heading = "corpus")]
    train_fraction: Option<f64>,
    #[arg(long, help_heading = "corpus")]
    split_seed: Option<u64>,
    #[arg(long, help_heading = "corpus")]
    sentence_delimiter: Option<String>,
    #[arg(long, help_heading = "corpus")]
    lowercase: Option<bool>,

    #[arg(long, help_heading = "embedding")]
    dimension: Option<usize>,
    #[arg(long, help_heading = "embedding")]
    window: Option<usize>,
    #[arg(long, help_heading = "embedding")]
    negatives: Option<usize>,
    #[arg(long, help_heading = "embedding")]
    epochs: Option<usize>,
    #[arg(long, help_heading = "embedding")]
    learning_rate: Option<f64>,
    #[arg(long, help_heading = "embedding")]
    kappa_init: Option<f64>,
    #[arg(long, help_heading = "embedding")]
    kappa_max: Option<f64>,
    #[arg(long, help_heading = "embedding")]
    category_context: Option<bool>,
    #[arg(long, help_heading = "embedding")]
    embedding_seed: Option<u64>,

    #[arg(long, help_heading = "plm")]
    mention_cap: Option<usize>,
    #[arg(long, help_heading = "plm")]
    plm_seed: Option<u64>,

    #[arg(long, help_heading = "bm25")]
    k1: Option<f64>,
    #[arg(long, help_heading = "bm25")]
    b: Option<f64>,

    #[arg(long, help_heading = "pipeline")]
    tau: Option<usize>,
    #[arg(long, help_heading = "pipeline")]
    anchor_limit: Option<usize>,
    #[arg(long, help_heading = "pipeline")]
    neighbor_window: Option<usize>,
    #[arg(long, help_heading = "pipeline")]
    rho: Option<u32>,
    #[arg(long, help_heading = "pipeline")]
    eta: Option<f64>,
    #[arg(long, help_heading = "pipeline")]
    iterations: Option<usize>,
    #[arg(long, help_heading = "pipeline")]
    alpha: Option<f64>,
    #[arg(long, help_heading = "pipeline")]
    exclusive: Option<bool>,
    #[arg(long, help_heading = "pipeline")]
    embedding_signal: Option<bool>,
    #[arg(long, help_heading = "pipeline")]
    plm_signal: Option<bool>,
    #[arg(long, help_heading = "pipeline")]
    sentence_signal: Option<bool>,

    #[arg(long, help_heading = "runtime")]
    threads: Option<usize>,
}

macro_rules! apply {
    ($($flag:expr => $target:expr),* $(,)?) => {
        $(if let Some(v) = $flag.clone() { $target = v; })*
    };
}

impl ConfigArgs {
    fn resolve(&self) -> anyhow::Result<RunConfig> {
        let mut c = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        apply! {
            self.min_count => c.corpus.min_count,
            self.train_fraction => c.corpus.train_fraction,
            self.split_seed => c.corpus.split_seed,
            self.sentence_delimiter => c.corpus.sentence_delimiter,
            self.lowercase => c.corpus.lowercase,
            self.dimension => c.embedding.dimension,
            self.window => c.embedding.window,
            self.negatives => c.embedding.negatives,
            self.epochs => c.embedding.epochs,
            self.learning_rate => c.embedding.learning_rate,
            self.kappa_init => c.embedding.kappa_init,
            self.kappa_max => c.embedding.kappa_max,
            self.category_context => c.embedding.category_context,
            self.embedding_seed => c.embedding.seed,
            self.mention_cap => c.plm.mention_cap,
            self.plm_seed => c.plm.seed,
            self.k1 => c.bm25.k1,
            self.b => c.bm25.b,
            self.tau => c.pipeline.tau,
            self.anchor_limit => c.pipeline.anchor_limit,
            self.neighbor_window => c.pipeline.neighbor_window,
            self.rho => c.pipeline.rho,
            self.eta => c.pipeline.eta,
            self.iterations => c.pipeline.iterations,
            self.alpha => c.pipeline.alpha,
            self.exclusive => c.pipeline.exclusive,
            self.embedding_signal => c.pipeline.signals.embedding,
            self.plm_signal => c.pipeline.signals.plm,
            self.sentence_signal => c.pipeline.signals.sentences,
            self.threads => c.runtime.threads,
        }
        c.validate()?;
        Ok(c)
    }
}

/// A missing required path, reported as a usage error.
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn required(flag: Option<&PathBuf>, from_config: &Option<PathBuf>, name: &str) -> anyhow::Result<PathBuf> {
    flag.or(from_config.as_ref())
        .cloned()
        .ok_or_else(|| Usage(format!("--{name} is required (or set paths.{name} in the config)")).into())
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> anyhow::Result<()> {
    fs::write(path, contents).with_context(|| format!("cannot write {}", path.display()))
}

fn read_topics(path: &Path) -> anyhow::Result<TopicResult> {
    let text = fs::read_to_string(path).map_err(|e| topicseed::Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    if text.trim_start().starts_with('{') {
        Ok(serde_json::from_str(&text).map_err(topicseed::Error::from)?)
    } else {
        Ok(TopicResult::parse_text(&text, &path.display().to_string())?)
    }
}

fn preprocess(
    corpus: Option<PathBuf>,
    seeds: Option<PathBuf>,
    out: Option<PathBuf>,
    args: &ConfigArgs,
) -> anyhow::Result<()> {
    let config = args.resolve()?;
    let corpus_path = required(corpus.as_ref(), &config.paths.corpus, "corpus")?;
    let seeds_path = required(seeds.as_ref(), &config.paths.seeds, "seeds")?;
    let out = required(out.as_ref(), &config.paths.bundle, "out")?;

    let seeds = SeedSet::load(&seeds_path)?;
    let corpus = load_corpus(&corpus_path, &config.corpus.format())?;
    let mut bundle = Bundle::prepare(&corpus, seeds, &config)?;
    bundle.write(&out, &config)?;
    let m = &bundle.manifest;
    println!(
        "bundle {}: {} train / {} test documents, {} terms, train checksum {}",
        out.display(),
        m.train_documents,
        m.test_documents,
        m.vocabulary_size,
        m.train_checksum
    );
    Ok(())
}

fn run(
    bundle: Option<PathBuf>,
    mentions: Option<PathBuf>,
    out: Option<PathBuf>,
    resume: Option<PathBuf>,
    args: &ConfigArgs,
) -> anyhow::Result<()> {
    let config = args.resolve()?;
    let bundle_dir = required(bundle.as_ref(), &config.paths.bundle, "bundle")?;
    let out = required(out.as_ref(), &config.paths.out, "out")?;
    init_threads(config.runtime.threads);

    let bundle = Bundle::read(&bundle_dir, &config)?;
    let store = if config.pipeline.signals.plm {
        let path = required(mentions.as_ref(), &config.paths.mentions, "mentions")?;
        Some(load_mentions(&path, &bundle.train)?)
    } else {
        None
    };
    let resume_state = match &resume {
        Some(path) => {
            let file = fs::File::open(path).map_err(|e| topicseed::Error::Io {
                path: path.clone(),
                source: e,
            })?;
            Some(read_run_state(file)?)
        }
        None => None,
    };

    let prepared = Prepared::new(&bundle.train, &bundle.seeds, store.as_ref(), &config)?;
    let pipeline = prepared.pipeline(&config)?;
    let checkpoints = out.join("checkpoints");
    fs::create_dir_all(&checkpoints).with_context(|| format!("cannot create {}", checkpoints.display()))?;

    let started = Instant::now();
    let mut iterations = Vec::new();
    let state = pipeline.run_from(resume_state, |record, state| {
        let path = checkpoints.join(format!("iter_{}.json", record.iteration));
        let file = fs::File::create(&path).map_err(|e| topicseed::Error::Io {
            path: path.clone(),
            source: e,
        })?;
        write_run_state(std::io::BufWriter::new(file), state)?;
        let sizes: Vec<_> = state
            .topics
            .iter()
            .map(|t| {
                json!({
                    "seed": t.seed,
                    "terms": t.terms.len(),
                    "anchors": t.anchors.len(),
                    "neighbors": t.neighbors.len(),
                })
            })
            .collect();
        log::info!("iteration {} done after {:.1?}", record.iteration, started.elapsed());
        iterations.push(json!({ "iteration": record.iteration, "topics": sizes }));
        Ok(())
    })?;
    let result = pipeline.result(&state);

    write_file(&out.join("topics.txt"), result.to_text())?;
    write_file(&out.join("topics.json"), serde_json::to_string_pretty(&result)? + "\n")?;
    write_file(
        &out.join("config.toml"),
        format!("# config_hash: {}\n{}", result.config_hash, config.to_toml()),
    )?;
    let report = json!({
        "config_hash": result.config_hash,
        "resumed_from": resume.map(|p| p.display().to_string()),
        "iterations": iterations,
        "seconds": started.elapsed().as_secs_f64(),
    });
    write_file(&out.join("run.json"), serde_json::to_string_pretty(&report)? + "\n")?;
    print!("{}", result.to_text());
    Ok(())
}

fn eval(
    topics: PathBuf,
    bundle: Option<PathBuf>,
    gold: Option<PathBuf>,
    k: usize,
    out: Option<PathBuf>,
    args: &ConfigArgs,
) -> anyhow::Result<()> {
    let config = args.resolve()?;
    let bundle_dir = required(bundle.as_ref(), &config.paths.bundle, "bundle")?;
    let gold_path = required(gold.as_ref(), &config.paths.gold, "gold")?;
    if k == 0 {
        return Err(Usage("--k must be positive".into()).into());
    }
    let result = read_topics(&topics)?;
    let gold = GoldLabels::load(&gold_path)?;
    let bundle = Bundle::read(&bundle_dir, &config)?;
    let metrics = evaluate(&result, &bundle.test, &gold, k)?;
    if let Some(dir) = out.or(config.paths.out.clone()) {
        fs::create_dir_all(&dir).with_context(|| format!("cannot create {}", dir.display()))?;
        write_file(&dir.join("metrics.json"), metrics_json(&metrics)? + "\n")?;
        write_file(&dir.join("metrics.txt"), metrics.to_table())?;
    }
    print!("{}", metrics.to_table());
    Ok(())
}

fn metrics_json(m: &MetricsReport) -> anyhow::Result<String> {
    let k = m.k;
    let mut obj = serde_json::to_value(m)?;
    obj["summary"] = json!({
        "NPMI": m.npmi,
        format!("P@{k}"): m.precision,
        format!("NDCG@{k}"): m.ndcg,
    });
    Ok(serde_json::to_string_pretty(&obj)?)
}

fn report(
    topics: PathBuf,
    bundle: Option<PathBuf>,
    metrics: Option<PathBuf>,
    top: usize,
    args: &ConfigArgs,
) -> anyhow::Result<()> {
    let config = args.resolve()?;
    let result = read_topics(&topics)?;
    let bundle = match bundle.or(config.paths.bundle.clone()) {
        Some(dir) => Some(Bundle::read(&dir, &config)?),
        None => None,
    };
    println!("config_hash {}  iterations {}", result.config_hash, result.iterations);
    for topic in &result.topics {
        println!("\n[{}]", topic.seed);
        for (rank, t) in topic.terms.iter().take(top).enumerate() {
            let r = |x: Option<u32>| x.map_or("-".into(), |x| x.to_string());
            println!(
                "{:>3}. {:<24} mrr {:.4}  ranks {}/{}/{}",
                rank + 1,
                t.term,
                t.mrr,
                t.r_all,
                r(t.r_emb),
                r(t.r_plm)
            );
            if let (Some(b), Some(anchor)) = (&bundle, t.anchors.first()) {
                if let Some(s) = b.train.sentence(*anchor) {
                    println!(
                        "       \"{}\" (doc {}, sentence {})",
                        s.tokens.join(" "),
                        anchor.doc,
                        anchor.sent
                    );
                }
            }
        }
    }
    if let Some(path) = metrics {
        let text = fs::read_to_string(&path).with_context(|| format!("cannot read {}", path.display()))?;
        let m: MetricsReport = serde_json::from_str(&text).map_err(topicseed::Error::from)?;
        if m.config_hash != result.config_hash {
            bail!(
                "metrics were computed for config {} but topics come from {}",
                m.config_hash,
                result.config_hash
            );
        }
        println!();
        print!("{}", m.to_table());
    }
    Ok(())
}

/// The error chain, skipping causes already spelled out by their parent.
fn message(err: &anyhow::Error) -> String {
    let mut out = String::new();
    for cause in err.chain() {
        let text = cause.to_string();
        if !out.contains(&text) {
            if !out.is_empty() {
                out.push_str(": ");
            }
            out.push_str(&text);
        }
    }
    out
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<Usage>().is_some() {
        return 2;
    }
    match err.downcast_ref::<topicseed::Error>() {
        Some(e) if e.is_validation() => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();

    let outcome = match cli.command {
        Command::Preprocess {
            corpus,
            seeds,
            out,
            config,
        } => preprocess(corpus, seeds, out, &config),
        Command::Run {
            bundle,
            mentions,
            out,
            resume,
            config,
        } => run(bundle, mentions, out, resume, &config),
        Command::Eval {
            topics,
            bundle,
            gold,
            k,
            out,
            config,
        } => eval(topics, bundle, gold, k, out, &config),
        Command::Report {
            topics,
            bundle,
            metrics,
            top,
            config,
        } => report(topics, bundle, metrics, top, &config),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {}", message(&err));
            ExitCode::from(exit_code(&err))
        }
    }
}
