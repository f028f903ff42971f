use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use newsview_core::classify::ModelSpec;
use newsview_core::config::Config;
use newsview_core::eval::{self, Dimension};
use newsview_core::llm::{Gateway, HttpBackend, API_KEY_ENV};
use newsview_core::model::{ContextConfig, LearningMode, Split};
use newsview_core::par::Parallelism;
use newsview_core::pipeline::{self, BuildInputs, ClassifyPlan, PipelineError, Stage, Workspace};
use newsview_core::wikidata::{FixtureApi, HttpApi, OfflineApi, RecordingApi, WikidataApi};

/// Viewpoint benchmark pipeline: claims, viewpoints, actor profiles,
/// dataset construction, classification and evaluation.
#[derive(Debug, Parser)]
#[command(name = "newsview", version)]
struct Cli {
    /// Configuration file (TOML). Defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Workspace directory; overrides the config file.
    #[arg(long, global = true)]
    workspace: Option<PathBuf>,
    /// Answer model calls from a recorded transcript instead of the network.
    #[arg(long, global = true, value_name = "TRANSCRIPT")]
    replay: Option<PathBuf>,
    /// Append every model exchange to this transcript.
    #[arg(long, global = true, value_name = "TRANSCRIPT")]
    record: Option<PathBuf>,
    /// Run every stage on one thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Normalize a raw JSONL article dump into the workspace corpus.
    Ingest {
        /// Raw JSONL file (one article object per line).
        input: PathBuf,
    },
    /// Extract claims from topic-relevant articles.
    Extract,
    /// Viewpoint induction and expert review.
    #[command(subcommand)]
    Viewpoints(ViewpointsCmd),
    /// Resolve claim actors to Wikidata profiles.
    Enrich(WikidataArgs),
    /// Filter, aggregate and split annotations into benchmark instances.
    BuildDataset {
        /// Annotation CSV (claim_id, viewpoint_id, annotator_id, label).
        #[arg(long)]
        annotations: PathBuf,
        /// CSV of instance_id,split to use instead of a seeded split.
        #[arg(long)]
        published_split: Option<PathBuf>,
        /// Claim-id list (one per line) selecting the benchmark claims.
        #[arg(long)]
        select: Option<PathBuf>,
    },
    /// Write chat fine-tuning files built from the inference prompts.
    ExportFinetune {
        /// Context configuration: text, kg or text+kg.
        #[arg(long, default_value = "text+kg")]
        context: ContextConfig,
        /// Splits to export.
        #[arg(long, value_delimiter = ',', default_value = "train,validation")]
        split: Vec<Split>,
    },
    /// Classify instances for one cell, or every configured cell.
    Classify(ClassifyArgs),
    /// Score a run against gold labels.
    Evaluate {
        /// Cell name as recorded in the run manifest.
        #[arg(long)]
        run: String,
        /// Second cell; prints per-viewpoint F1 deltas (compare minus run).
        #[arg(long)]
        compare: Option<String>,
    },
    /// Positive-label distribution over party, source, month or actor.
    Analytics {
        #[arg(long)]
        dimension: Dimension,
        /// Use this run's predictions instead of gold labels.
        #[arg(long)]
        run: Option<String>,
    },
    /// Check that every transcript entry's digest matches its request.
    ReplayVerify {
        transcript: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
enum ViewpointsCmd {
    /// Propose candidate viewpoints from batches of utterances.
    Propose,
    /// Merge candidates into one numbered machine set.
    Consolidate,
    /// Write the machine set as an editable review file.
    ExportReview,
    /// Read an edited review file and store the reviewed set.
    ImportReview {
        /// Review file; defaults to the one written by export-review.
        #[arg(long)]
        file: Option<PathBuf>,
    },
    /// Install the bundled, reviewed immigration viewpoint set.
    CaseStudy,
}

#[derive(Debug, Args)]
struct WikidataArgs {
    /// Serve Wikidata from a fixture directory (search/, entities/).
    #[arg(long, conflicts_with_all = ["offline", "record_wikidata"])]
    wikidata_fixtures: Option<PathBuf>,
    /// Use only the profile cache and overrides; never contact Wikidata.
    #[arg(long, conflicts_with = "record_wikidata")]
    offline: bool,
    /// Save raw live responses into this fixture directory.
    #[arg(long)]
    record_wikidata: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ClassifyArgs {
    /// Model name from the config table, or a raw model id.
    #[arg(long, required_unless_present = "all")]
    model: Option<String>,
    /// Fine-tuned model id when --model is not in the config table.
    #[arg(long)]
    fine_tuned_model: Option<String>,
    /// Run every configured model.
    #[arg(long, conflicts_with = "model")]
    all: bool,
    /// Context configurations.
    #[arg(long, value_delimiter = ',', default_value = "text,kg,text+kg")]
    context: Vec<ContextConfig>,
    /// Learning modes: zsl, ft.
    #[arg(long, value_delimiter = ',', default_value = "zsl")]
    mode: Vec<LearningMode>,
    /// Restrict to one split.
    #[arg(long, default_value = "test")]
    split: Split,
}

fn gateway(cli: &Cli, config: &Config) -> Result<Gateway, PipelineError> {
    let gw = match &cli.replay {
        Some(path) => Gateway::replay(path)?,
        None => {
            if std::env::var(API_KEY_ENV).map(|k| k.is_empty()).unwrap_or(true) {
                return Err(PipelineError::Usage(format!("{API_KEY_ENV} is not set; export it or pass --replay")));
            }
            Gateway::new(Arc::new(HttpBackend::from_env(config.llm.http.clone())?), &config.llm.gateway)
        }
    };
    Ok(match &cli.record {
        Some(path) => gw.with_recorder(path)?,
        None => gw,
    })
}

fn wikidata_api(args: &WikidataArgs, config: &Config) -> Result<Arc<dyn WikidataApi>, PipelineError> {
    if let Some(dir) = &args.wikidata_fixtures {
        return Ok(Arc::new(FixtureApi::open(dir)?));
    }
    if args.offline {
        return Ok(Arc::new(OfflineApi));
    }
    let live = HttpApi::new(&config.wikidata.endpoint, config.wikidata.retry.clone())?;
    Ok(match &args.record_wikidata {
        Some(dir) => Arc::new(RecordingApi::new(live, dir)),
        None => Arc::new(live),
    })
}

fn load_config(cli: &Cli) -> Result<Config, PipelineError> {
    let mut config = match &cli.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    if let Some(ws) = &cli.workspace {
        config.workspace = ws.clone();
    }
    if cli.sequential {
        config.parallelism = Parallelism::Sequential;
    }
    Ok(config)
}

fn print_lines<T: std::fmt::Display>(items: &[T]) {
    for i in items {
        println!("{i}");
    }
}

fn run(cli: &Cli) -> Result<(), PipelineError> {
    if let Command::ReplayVerify { transcript } = &cli.command {
        let (summary, bad) = pipeline::replay_verify(transcript)?;
        println!("{summary}");
        return if bad.is_empty() {
            Ok(())
        } else {
            Err(PipelineError::Integrity(format!("digest mismatch on lines {bad:?}")))
        };
    }
    let config = load_config(cli)?;
    let ws = Workspace::new(&config.workspace);
    let _lock = ws.lock()?;
    let stage = Stage::new(&ws, &config)?;
    match &cli.command {
        Command::Ingest { input } => println!("{}", pipeline::ingest(&stage, input)?),
        Command::Extract => println!("{}", pipeline::extract(&stage, &gateway(cli, &config)?)?),
        Command::Viewpoints(cmd) => match cmd {
            ViewpointsCmd::Propose => println!("{}", pipeline::propose(&stage, &gateway(cli, &config)?)?),
            ViewpointsCmd::Consolidate => println!("{}", pipeline::consolidate(&stage, &gateway(cli, &config)?)?),
            ViewpointsCmd::ExportReview => println!("{}", pipeline::export_review(&stage)?),
            ViewpointsCmd::ImportReview { file } => println!("{}", pipeline::import_review(&stage, file.as_deref())?),
            ViewpointsCmd::CaseStudy => println!("{}", pipeline::install_case_study(&stage)?),
        },
        Command::Enrich(args) => println!("{}", pipeline::enrich(&stage, wikidata_api(args, &config)?)?),
        Command::BuildDataset { annotations, published_split, select } => {
            let inputs = BuildInputs { annotations, published_split: published_split.as_deref(), selection: select.as_deref() };
            println!("{}", pipeline::build_dataset(&stage, inputs)?)
        }
        Command::ExportFinetune { context, split } => print_lines(&pipeline::export_finetune(&stage, *context, split)?),
        Command::Classify(args) => {
            let adhoc;
            let models: Vec<&ModelSpec> = if args.all {
                if config.models.is_empty() {
                    return Err(PipelineError::Usage("--all needs a [[models]] table in the config".into()));
                }
                config.models.iter().collect()
            } else {
                let name = args.model.as_deref().expect("clap requires --model without --all");
                match config.model(name) {
                    Some(m) if args.fine_tuned_model.is_none() => vec![m],
                    found => {
                        adhoc = ModelSpec {
                            name: name.to_string(),
                            base_model: found.map_or(name.to_string(), |m| m.base_model.clone()),
                            fine_tuned_model: args.fine_tuned_model.clone().or_else(|| found.and_then(|m| m.fine_tuned_model.clone())),
                        };
                        vec![&adhoc]
                    }
                }
            };
            let plan = ClassifyPlan { models, contexts: args.context.clone(), modes: args.mode.clone(), split: Some(args.split) };
            print_lines(&pipeline::classify(&stage, &gateway(cli, &config)?, &plan)?);
        }
        Command::Evaluate { run, compare } => {
            let (summary, report) = pipeline::evaluate(&stage, run)?;
            println!("{summary}");
            if let Some(other) = compare {
                let (_, b) = pipeline::evaluate(&stage, other)?;
                for d in eval::compare_runs(&report, &b) {
                    let vp = d.viewpoint_id.map_or("overall".to_string(), |v| v.to_string());
                    println!("delta viewpoint={vp} f1_a={:.2} f1_b={:.2} delta={:+.2}", d.f1_a * 100.0, d.f1_b * 100.0, d.delta * 100.0);
                }
            }
        }
        Command::Analytics { dimension, run } => println!("{}", pipeline::analytics(&stage, *dimension, run.as_deref())?.0),
        Command::ReplayVerify { .. } => unreachable!("handled before locking"),
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.category().exit_code() as u8)
        }
    }
}
