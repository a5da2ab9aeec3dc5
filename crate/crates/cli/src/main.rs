use std::collections::HashMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use opinionlens_core::embedding::{embed_units, load_vectors, save_vectors, ProviderSource};
use opinionlens_core::evaluation::{
    generate_synthetic, precision_report, read_annotations_csv, sample_for_annotation, write_workbook_csv,
    Aggregation, GroundTruth, SampleConfig, SyntheticSpec,
};
use opinionlens_core::extraction::{extract_corpus, read_reviews, HttpChatClient};
use opinionlens_core::regression::{build_features, run_regression, FitArtifact, RegressConfig};
use opinionlens_core::report::{build_report, FrequencySplit, ReportFormat};
use opinionlens_core::topics::fit_topic_model;
use opinionlens_core::{
    jsonl, ExtractionConfig, FeatureMode, Method, OpinionUnit, ProviderConfig, TopicModel, TopicModelConfig,
};

/// Opinion-unit topic analytics: extraction, clustering, rating-impact regression and reports.
#[derive(Parser)]
#[command(name = "opinionlens", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Extract opinion units from reviews through a chat-completion endpoint.
    Extract(ExtractArgs),
    /// Embed opinion units ("label: excerpt").
    Embed(EmbedArgs),
    /// Cluster embedded units into topics.
    Cluster(ClusterArgs),
    /// Regress star ratings on per-topic features and cross-validate.
    Regress(RegressArgs),
    /// Annotation workbooks and precision scoring.
    #[command(subcommand)]
    Evaluate(EvaluateCommand),
    /// Render the topic-impact report.
    Report(ReportArgs),
    /// Generate a planted synthetic corpus with known coefficients.
    Synth(SynthArgs),
    /// Run the HTTP API.
    Serve(ServeArgs),
}

#[derive(Args)]
struct ExtractArgs {
    #[arg(long)]
    reviews: PathBuf,
    /// Output directory for units.jsonl and extract_stats.json.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    endpoint: Option<String>,
    #[arg(long)]
    llm_model: Option<String>,
    #[arg(long)]
    cache_dir: Option<PathBuf>,
    #[arg(long, default_value_t = 4)]
    parallelism: usize,
}

#[derive(Args)]
struct EmbedArgs {
    #[arg(long)]
    units: PathBuf,
    /// Vector file; `.bin` selects the binary format, anything else JSONL.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "http://127.0.0.1:8001/v1/embeddings")]
    endpoint: String,
    #[arg(long, default_value = "all-mpnet-base-v2")]
    embed_model: String,
    #[arg(long, default_value_t = 64)]
    batch_size: usize,
    /// Take precomputed vectors from this file instead of calling an endpoint.
    #[arg(long, conflicts_with = "endpoint")]
    from_file: Option<PathBuf>,
    #[arg(long)]
    no_normalize: bool,
}

#[derive(Args)]
struct ClusterArgs {
    #[arg(long)]
    units: PathBuf,
    #[arg(long)]
    vectors: PathBuf,
    #[arg(long, default_value = "m1")]
    method: Method,
    #[arg(long, default_value_t = 20)]
    k: usize,
    #[arg(long, default_value_t = 50)]
    min_cluster_size: usize,
    #[arg(long)]
    min_samples: Option<usize>,
    #[arg(long, default_value_t = 5)]
    reduced_dim: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Model directory to create.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RegressArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    reviews: PathBuf,
    /// Use 0/1 topic-mention indicators instead of mean sentiment.
    #[arg(long)]
    without_sentiment: bool,
    #[arg(long, default_value_t = 5)]
    folds: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Regress onto the latent ratings in a synthetic ground_truth.json instead of stars.
    #[arg(long)]
    latent_targets: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum EvaluateCommand {
    /// Write a per-topic annotation workbook (CSV).
    Sample {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        units: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 3)]
        evaluators: usize,
        #[arg(long, default_value_t = 20)]
        per_topic: usize,
        #[arg(long, default_value_t = 5)]
        overlap: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Score a filled-in workbook: topic and sentiment precision per topic.
    Score {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        annotations: PathBuf,
        /// Pool judgements across evaluators instead of averaging per evaluator.
        #[arg(long)]
        pooled: bool,
    },
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    fit: PathBuf,
    #[arg(long, default_value = "md")]
    format: ReportFormat,
    #[arg(long, default_value = "median")]
    split: FrequencySplit,
    /// Defaults to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 5000)]
    reviews: usize,
    #[arg(long, default_value_t = 8)]
    topics: usize,
    #[arg(long, default_value_t = 32)]
    dim: usize,
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, default_value = "data")]
    data_dir: PathBuf,
    #[arg(long, default_value = "127.0.0.1:8080")]
    addr: String,
    #[arg(long, default_value_t = 2)]
    workers: usize,
    #[arg(long)]
    llm_endpoint: Option<String>,
    #[arg(long)]
    embed_endpoint: Option<String>,
}

fn main() -> Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    match Cli::parse().command {
        Command::Extract(a) => extract(a),
        Command::Embed(a) => embed(a),
        Command::Cluster(a) => cluster(a),
        Command::Regress(a) => regress(a),
        Command::Evaluate(c) => evaluate(c),
        Command::Report(a) => report(a),
        Command::Synth(a) => synth(a),
        Command::Serve(a) => serve(a),
    }
}

fn extract(a: ExtractArgs) -> Result<()> {
    let reviews = read_reviews(&a.reviews)?;
    let mut config = ExtractionConfig {
        cache_dir: a.cache_dir,
        parallelism: a.parallelism,
        ..Default::default()
    };
    if let Some(e) = a.endpoint {
        config.endpoint_url = e;
    }
    if let Some(m) = a.llm_model {
        config.model = m;
    }
    let client = HttpChatClient::from_config(&config)?;
    let out = extract_corpus(&reviews, &config, &client)?;
    std::fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    jsonl::write(&a.out.join("units.jsonl"), &out.units)?;
    jsonl::write_json(
        &a.out.join("extract_stats.json"),
        &serde_json::json!({ "stats": out.stats, "failures": out.failures }),
    )?;
    eprintln!(
        "{} units from {} reviews ({} failed)",
        out.units.len(),
        reviews.len(),
        out.failures.len()
    );
    Ok(())
}

fn embed(a: EmbedArgs) -> Result<()> {
    let units: Vec<OpinionUnit> = jsonl::read(&a.units)?;
    let source = match a.from_file {
        Some(path) => ProviderSource::File { path },
        None => ProviderSource::Remote {
            endpoint: a.endpoint,
            model: a.embed_model,
            batch_size: a.batch_size,
            max_retries: 3,
        },
    };
    let config = ProviderConfig {
        source,
        normalize: !a.no_normalize,
    };
    let vectors = embed_units(&units, &config)?;
    save_vectors(&vectors, &a.out)?;
    eprintln!("{} vectors written to {}", vectors.len(), a.out.display());
    Ok(())
}

fn cluster(a: ClusterArgs) -> Result<()> {
    let units: Vec<OpinionUnit> = jsonl::read(&a.units)?;
    let vectors = load_vectors(&a.vectors)?;
    let config = TopicModelConfig {
        method: a.method,
        k: a.k,
        min_cluster_size: a.min_cluster_size,
        min_samples: a.min_samples,
        reduced_dim: a.reduced_dim,
        seed: a.seed,
        ..Default::default()
    };
    let model = fit_topic_model(&units, &vectors, &config)?;
    model.save(&a.out)?;
    eprintln!(
        "model {}: {} topics, outlier rate {:.3}",
        model.id(),
        model.topics().len(),
        model.summaries.outlier_rate
    );
    Ok(())
}

fn regress(a: RegressArgs) -> Result<()> {
    let model = TopicModel::load(&a.model)?;
    let reviews = read_reviews(&a.reviews)?;
    let config = RegressConfig {
        mode: if a.without_sentiment {
            FeatureMode::WithoutSentiment
        } else {
            FeatureMode::WithSentiment
        },
        folds: a.folds,
        seed: a.seed,
    };
    let mut matrix = build_features(&reviews, &model, config.mode)?;
    if let Some(path) = &a.latent_targets {
        let truth: GroundTruth = jsonl::read_json(path)?;
        if truth.latent_ratings.len() != reviews.len() {
            bail!(
                "{} latent ratings for {} reviews",
                truth.latent_ratings.len(),
                reviews.len()
            );
        }
        let latent: HashMap<&str, f64> = reviews
            .iter()
            .map(|r| r.review_id.as_str())
            .zip(truth.latent_ratings.iter().copied())
            .collect();
        let target = matrix.review_ids.iter().map(|id| latent[id.as_str()]).collect();
        matrix = matrix.with_target(target)?;
    }
    let fit = run_regression(&matrix, &config, model.id(), &model.header.config_hash)?;
    jsonl::write_json(&a.out, &fit)?;
    eprintln!(
        "fit {}: R2 {} (cv mean {}), {} significant topics",
        fit.fit_id,
        fmt_opt(fit.r_squared),
        fmt_opt(fit.cv.mean_r_squared),
        fit.significant_count
    );
    Ok(())
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(|| "n/a".into(), |v| format!("{v:.3}"))
}

fn evaluate(c: EvaluateCommand) -> Result<()> {
    match c {
        EvaluateCommand::Sample {
            model,
            units,
            out,
            evaluators,
            per_topic,
            overlap,
            seed,
        } => {
            let model = TopicModel::load(&model)?;
            let units: Vec<OpinionUnit> = jsonl::read(&units)?;
            let config = SampleConfig {
                evaluators,
                per_topic,
                overlap,
                seed,
            };
            let workbook = sample_for_annotation(&model, &units, &config)?;
            write_workbook_csv(&workbook.rows, &out)?;
            eprintln!("{} rows written to {}", workbook.rows.len(), out.display());
        }
        EvaluateCommand::Score {
            model,
            annotations,
            pooled,
        } => {
            let model = TopicModel::load(&model)?;
            let records = read_annotations_csv(&annotations)?;
            let agg = if pooled { Aggregation::Pooled } else { Aggregation::Mean };
            let report = precision_report(&model, &records, agg)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
    }
    Ok(())
}

fn report(a: ReportArgs) -> Result<()> {
    let model = TopicModel::load(&a.model)?;
    let fit: FitArtifact = jsonl::read_json(&a.fit)?;
    let text = build_report(&model, &fit, a.split)?.render(a.format)?;
    write_or_print(a.out.as_deref(), &text)
}

fn write_or_print(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn synth(a: SynthArgs) -> Result<()> {
    let defaults = SyntheticSpec::default();
    let spec = SyntheticSpec {
        reviews: a.reviews,
        topics: a.topics,
        dim: a.dim,
        noise: a.noise.unwrap_or(defaults.noise),
        seed: a.seed,
        ..defaults
    };
    let corpus = generate_synthetic(&spec)?;
    corpus.write_dir(&a.out)?;
    eprintln!(
        "{} reviews, {} units, analytic R2 {:.4}",
        corpus.reviews.len(),
        corpus.units.len(),
        corpus.truth.analytic_r2
    );
    Ok(())
}

fn serve(a: ServeArgs) -> Result<()> {
    let mut config = opinionlens_service::ServiceConfig::new(&a.data_dir);
    config.workers = a.workers;
    if let Some(e) = a.llm_endpoint {
        config.extraction.endpoint_url = e;
    }
    if let (Some(e), ProviderSource::Remote { endpoint, .. }) = (a.embed_endpoint, &mut config.embedding.source) {
        *endpoint = e;
    }
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(&a.addr)
            .await
            .with_context(|| format!("binding {}", a.addr))?;
        opinionlens_service::serve(config, listener).await?;
        Ok(())
    })
}
