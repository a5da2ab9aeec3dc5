use std::path::Path;

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use opinionlens_core::embedding::{embed_units, ProviderSource};
use opinionlens_core::evaluation::{sample_for_annotation, workbook_to_csv, SampleConfig};
use opinionlens_core::extraction::{extract_corpus, HttpChatClient};
use opinionlens_core::hash::{config_hash, short_id};
use opinionlens_core::regression::{build_features, fit_hash, run_regression, FitArtifact, RegressConfig};
use opinionlens_core::report::{build_report, FrequencySplit, ReportFormat};
use opinionlens_core::topics::{fit_topic_model, model_header};
use opinionlens_core::{jsonl, FeatureMode, ProviderConfig, Review, TopicModel, TopicModelConfig};
use serde::Deserialize;
use serde_json::{json, Value};

use crate::error::ApiError;
use crate::jobs::{JobKind, JobRecord, JobStatus};
use crate::store::{valid_id, ModelSource};
use crate::AppState;

type ApiResult<T> = Result<T, ApiError>;

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/corpora", post(create_corpus))
        .route("/corpora/{id}", get(corpus_info))
        .route("/corpora/{id}/extract", post(extract))
        .route("/corpora/{id}/embed", post(embed))
        .route("/corpora/{id}/models", post(create_model))
        .route("/models/{id}/topics", get(topics))
        .route("/models/{id}/topics/{topic}/units", get(topic_units))
        .route("/models/{id}/regress", post(regress))
        .route("/models/{id}/report", get(report))
        .route("/models/{id}/annotation-sample", get(annotation_sample))
        .route("/fits/{id}", get(fit))
        .route("/jobs/{id}", get(job))
        .with_state(state)
}

/// Runs blocking store or compute work off the async executor.
async fn blocking<T, F>(f: F) -> ApiResult<T>
where
    T: Send + 'static,
    F: FnOnce() -> ApiResult<T> + Send + 'static,
{
    tokio::task::spawn_blocking(f).await?
}

fn job_response(record: JobRecord) -> Response {
    let status = match record.status {
        JobStatus::Done => StatusCode::OK,
        _ => StatusCode::ACCEPTED,
    };
    (status, Json(record)).into_response()
}

/// Parses an optional JSON body; an empty body means all defaults.
fn optional_body<T: for<'de> Deserialize<'de> + Default>(body: &Bytes) -> ApiResult<T> {
    if body.iter().all(u8::is_ascii_whitespace) {
        return Ok(T::default());
    }
    serde_json::from_slice(body).map_err(|e| ApiError::Invalid(format!("request body: {e}")))
}

fn check_id(id: &str, what: &str) -> ApiResult<()> {
    if valid_id(id) {
        Ok(())
    } else {
        Err(ApiError::NotFound(format!("no {what} {id}")))
    }
}

async fn create_corpus(State(s): State<AppState>, body: String) -> ApiResult<Response> {
    let reviews: Vec<Review> = jsonl::parse_str(&body, Path::new("request body"))?;
    if reviews.is_empty() {
        return Err(ApiError::Invalid("request body holds no reviews".into()));
    }
    let n = reviews.len();
    let store = s.store.clone();
    let id = blocking(move || store.put_corpus(&reviews)).await?;
    Ok((StatusCode::CREATED, Json(json!({ "corpus_id": id, "reviews": n }))).into_response())
}

async fn corpus_info(State(s): State<AppState>, UrlPath(id): UrlPath<String>) -> ApiResult<Json<Value>> {
    check_id(&id, "corpus")?;
    blocking(move || {
        let reviews = s.store.reviews(&id)?;
        let units = s.store.units(&id)?;
        Ok(Json(json!({
            "corpus_id": id,
            "reviews": reviews.len(),
            "units": units.map(|u| u.len()),
            "vector_sets": s.store.vector_sets(&id),
            "has_models": s.store.is_locked(&id),
        })))
    })
    .await
}

async fn extract(State(s): State<AppState>, UrlPath(id): UrlPath<String>) -> ApiResult<Response> {
    check_id(&id, "corpus")?;
    if !s.store.corpus_exists(&id) {
        return Err(ApiError::NotFound(format!("no corpus {id}")));
    }
    let cfg = &s.config.extraction;
    let hash = config_hash(&(&id, &cfg.endpoint_url, &cfg.model, &cfg.overall_label));
    let record = JobRecord::new(JobKind::Extract, &hash);
    if s.store.units_path(&id).is_file() {
        return Ok(job_response(s.jobs.done(record, id)));
    }
    if s.store.is_locked(&id) {
        return Err(ApiError::Conflict(format!("corpus {id} already has models")));
    }
    let (store, config) = (s.store.clone(), s.config.clone());
    let record = s.jobs.submit(record, move || {
        let run = || -> ApiResult<String> {
            let reviews = store.reviews(&id)?;
            let client = HttpChatClient::from_config(&config.extraction)?;
            let out = extract_corpus(&reviews, &config.extraction, &client)?;
            let stats = json!({ "stats": out.stats, "failures": out.failures });
            store.write_units(&id, &out.units, &stats)?;
            Ok(id)
        };
        run().map_err(|e| e.to_string())
    });
    Ok(job_response(record))
}

#[derive(Debug, Default, Deserialize)]
struct EmbedRequest {
    name: Option<String>,
    provider: Option<ProviderConfig>,
}

async fn embed(State(s): State<AppState>, UrlPath(id): UrlPath<String>, body: Bytes) -> ApiResult<Response> {
    check_id(&id, "corpus")?;
    let req: EmbedRequest = optional_body(&body)?;
    let name = req.name.unwrap_or_else(|| "default".into());
    if !valid_id(&name) {
        return Err(ApiError::Invalid(format!("vector set name {name:?} must match [A-Za-z0-9_-]+")));
    }
    if let Some(ProviderConfig { source: ProviderSource::File { .. }, .. }) = &req.provider {
        return Err(ApiError::Invalid("file providers are not accepted over HTTP".into()));
    }
    let provider = req.provider.unwrap_or_else(|| s.config.embedding.clone());
    if !s.store.corpus_exists(&id) {
        return Err(ApiError::NotFound(format!("no corpus {id}")));
    }
    if !s.store.units_path(&id).is_file() {
        return Err(ApiError::Conflict(format!("corpus {id} has no extracted units yet")));
    }
    let hash = config_hash(&(&id, &name, &provider));
    let record = JobRecord::new(JobKind::Embed, &hash);
    let artifact = format!("{id}/{name}");
    if s.store.vectors_path(&id, &name).is_file() {
        let stored = s.store.vector_provider(&id, &name);
        if stored.is_some() && stored != serde_json::to_value(&provider).ok() {
            return Err(ApiError::Conflict(format!(
                "vector set {name} already exists with a different provider"
            )));
        }
        return Ok(job_response(s.jobs.done(record, artifact)));
    }
    if s.store.is_locked(&id) {
        return Err(ApiError::Conflict(format!("corpus {id} already has models")));
    }
    let store = s.store.clone();
    let record = s.jobs.submit(record, move || {
        let run = || -> ApiResult<String> {
            let units = store
                .units(&id)?
                .ok_or_else(|| ApiError::Conflict("units disappeared".into()))?;
            let vectors = embed_units(&units, &provider)?;
            store.write_vectors(&id, &name, &vectors, &provider)?;
            Ok(artifact)
        };
        run().map_err(|e| e.to_string())
    });
    Ok(job_response(record))
}

#[derive(Debug, Deserialize)]
struct ModelRequest {
    #[serde(flatten)]
    config: TopicModelConfig,
    #[serde(default = "default_vectors")]
    vectors: String,
}

impl Default for ModelRequest {
    fn default() -> Self {
        Self {
            config: TopicModelConfig::default(),
            vectors: default_vectors(),
        }
    }
}

fn default_vectors() -> String {
    "default".into()
}

async fn create_model(State(s): State<AppState>, UrlPath(id): UrlPath<String>, body: Bytes) -> ApiResult<Response> {
    check_id(&id, "corpus")?;
    let req: ModelRequest = optional_body(&body)?;
    req.config.validate()?;
    if !valid_id(&req.vectors) {
        return Err(ApiError::Invalid(format!("vector set name {:?} is not valid", req.vectors)));
    }
    if !s.store.corpus_exists(&id) {
        return Err(ApiError::NotFound(format!("no corpus {id}")));
    }
    let store = s.store.clone();
    let (cid, vname, config) = (id.clone(), req.vectors.clone(), req.config.clone());
    let header = blocking(move || {
        let units = store
            .units(&cid)?
            .ok_or_else(|| ApiError::Conflict(format!("corpus {cid} has no extracted units yet")))?;
        let vectors = store
            .vectors(&cid, &vname)?
            .ok_or_else(|| ApiError::Conflict(format!("corpus {cid} has no vector set {vname}")))?;
        Ok(model_header(&units, &vectors, &config)?)
    })
    .await?;

    let record = JobRecord::new(JobKind::Model, &header.config_hash);
    if s.store.model_exists(&header.model_id) {
        return Ok(job_response(s.jobs.done(record, header.model_id)));
    }
    s.store.lock(&id)?;
    let store = s.store.clone();
    let source = ModelSource {
        corpus_id: id,
        vectors: req.vectors,
    };
    let config = req.config;
    let record = s.jobs.submit(record, move || {
        let run = || -> ApiResult<String> {
            let units = store.units(&source.corpus_id)?.unwrap_or_default();
            let vectors = store.vectors(&source.corpus_id, &source.vectors)?.unwrap_or_default();
            let model = fit_topic_model(&units, &vectors, &config)?;
            store.put_model(&model, &source)?;
            Ok(model.id().to_string())
        };
        run().map_err(|e| e.to_string())
    });
    Ok(job_response(record))
}

async fn topics(State(s): State<AppState>, UrlPath(id): UrlPath<String>) -> ApiResult<Json<Value>> {
    check_id(&id, "model")?;
    blocking(move || {
        let (model, source) = s.store.model(&id)?;
        Ok(Json(json!({
            "model_id": model.id(),
            "corpus_id": source.corpus_id,
            "vectors": source.vectors,
            "config": model.config(),
            "outlier_rate": model.summaries.outlier_rate,
            "degenerate_reduction": model.summaries.degenerate_reduction,
            "merge_log": model.summaries.merge_log,
            "topics": model.topics(),
        })))
    })
    .await
}

#[derive(Debug, Deserialize)]
struct PageQuery {
    #[serde(default = "default_limit")]
    limit: usize,
    #[serde(default)]
    offset: usize,
}

fn default_limit() -> usize {
    20
}

async fn topic_units(
    State(s): State<AppState>,
    UrlPath((id, topic)): UrlPath<(String, usize)>,
    Query(page): Query<PageQuery>,
) -> ApiResult<Json<Value>> {
    check_id(&id, "model")?;
    blocking(move || {
        let (model, source) = s.store.model(&id)?;
        if topic >= model.topics().len() {
            return Err(ApiError::NotFound(format!("model {id} has no topic {topic}")));
        }
        let units = s.store.units(&source.corpus_id)?.unwrap_or_default();
        let text: std::collections::HashMap<&str, _> =
            units.iter().map(|u| (u.unit_id.as_str(), u)).collect();
        let members: Vec<_> = model.units.iter().filter(|u| u.topic == topic as i32).collect();
        let page: Vec<Value> = members
            .iter()
            .skip(page.offset)
            .take(page.limit)
            .map(|a| {
                let u = text.get(a.unit_id.as_str());
                json!({
                    "unit_id": a.unit_id,
                    "review_id": a.review_id,
                    "label": u.map(|u| u.label.as_str()),
                    "excerpt": u.map(|u| u.excerpt.as_str()),
                    "sentiment": a.sentiment,
                })
            })
            .collect();
        Ok(Json(json!({ "topic_id": topic, "total": members.len(), "units": page })))
    })
    .await
}

#[derive(Debug, Deserialize)]
#[serde(default)]
struct RegressRequest {
    with_sentiment: bool,
    folds: usize,
    seed: u64,
}

impl Default for RegressRequest {
    fn default() -> Self {
        let d = RegressConfig::default();
        Self {
            with_sentiment: true,
            folds: d.folds,
            seed: d.seed,
        }
    }
}

impl RegressRequest {
    fn config(&self) -> ApiResult<RegressConfig> {
        if self.folds < 2 {
            return Err(ApiError::Invalid(format!("folds must be at least 2, got {}", self.folds)));
        }
        Ok(RegressConfig {
            mode: if self.with_sentiment {
                FeatureMode::WithSentiment
            } else {
                FeatureMode::WithoutSentiment
            },
            folds: self.folds,
            seed: self.seed,
        })
    }
}

struct PreparedFit {
    fit_id: String,
    hash: String,
    model: TopicModel,
    matrix: opinionlens_core::FeatureMatrix,
    config: RegressConfig,
}

fn prepare_fit(s: &AppState, model_id: &str, config: RegressConfig) -> ApiResult<PreparedFit> {
    let (model, source) = s.store.model(model_id)?;
    let reviews = s.store.reviews(&source.corpus_id)?;
    let matrix = build_features(&reviews, &model, config.mode)?;
    let hash = fit_hash(&model.header.config_hash, &config, &matrix.target);
    Ok(PreparedFit {
        fit_id: short_id(&hash),
        hash,
        model,
        matrix,
        config,
    })
}

fn compute_fit(s: &AppState, p: &PreparedFit) -> ApiResult<FitArtifact> {
    if let Some(fit) = s.store.fit(&p.fit_id)? {
        return Ok(fit);
    }
    let fit = run_regression(&p.matrix, &p.config, p.model.id(), &p.model.header.config_hash)?;
    debug_assert_eq!(fit.fit_id, p.fit_id);
    s.store.put_fit(&fit)?;
    Ok(fit)
}

async fn regress(State(s): State<AppState>, UrlPath(id): UrlPath<String>, body: Bytes) -> ApiResult<Response> {
    check_id(&id, "model")?;
    let config = optional_body::<RegressRequest>(&body)?.config()?;
    let state = s.clone();
    let prepared = blocking(move || prepare_fit(&state, &id, config)).await?;
    let record = JobRecord::new(JobKind::Regress, &prepared.hash);
    if s.store.fit_path(&prepared.fit_id).is_file() {
        return Ok(job_response(s.jobs.done(record, prepared.fit_id)));
    }
    let state = s.clone();
    let record = s.jobs.submit(record, move || {
        compute_fit(&state, &prepared)
            .map(|f| f.fit_id)
            .map_err(|e| e.to_string())
    });
    Ok(job_response(record))
}

async fn fit(State(s): State<AppState>, UrlPath(id): UrlPath<String>) -> ApiResult<Json<FitArtifact>> {
    check_id(&id, "fit")?;
    blocking(move || {
        s.store
            .fit(&id)?
            .map(Json)
            .ok_or_else(|| ApiError::NotFound(format!("no fit {id}")))
    })
    .await
}

// Query strings cannot go through `#[serde(flatten)]`: numbers would arrive as strings.
#[derive(Debug, Deserialize)]
struct ReportQuery {
    format: Option<String>,
    split: Option<String>,
    with_sentiment: Option<bool>,
    folds: Option<usize>,
    seed: Option<u64>,
}

async fn report(
    State(s): State<AppState>,
    UrlPath(id): UrlPath<String>,
    Query(q): Query<ReportQuery>,
) -> ApiResult<Response> {
    check_id(&id, "model")?;
    let format: ReportFormat = q
        .format
        .as_deref()
        .unwrap_or("json")
        .parse()
        .map_err(ApiError::Invalid)?;
    let split: FrequencySplit = q
        .split
        .as_deref()
        .unwrap_or("median")
        .parse()
        .map_err(ApiError::Invalid)?;
    let d = RegressRequest::default();
    let config = RegressRequest {
        with_sentiment: q.with_sentiment.unwrap_or(d.with_sentiment),
        folds: q.folds.unwrap_or(d.folds),
        seed: q.seed.unwrap_or(d.seed),
    }
    .config()?;
    let body = blocking(move || {
        let prepared = prepare_fit(&s, &id, config)?;
        let fit = compute_fit(&s, &prepared)?;
        Ok(build_report(&prepared.model, &fit, split)?.render(format)?)
    })
    .await?;
    Ok(([(header::CONTENT_TYPE, format.content_type())], body).into_response())
}

#[derive(Debug, Deserialize)]
struct SampleQuery {
    format: Option<String>,
    evaluators: Option<usize>,
    per_topic: Option<usize>,
    overlap: Option<usize>,
    seed: Option<u64>,
}

async fn annotation_sample(
    State(s): State<AppState>,
    UrlPath(id): UrlPath<String>,
    Query(q): Query<SampleQuery>,
) -> ApiResult<Response> {
    check_id(&id, "model")?;
    let as_json = match q.format.as_deref().unwrap_or("csv") {
        "csv" => false,
        "json" => true,
        other => return Err(ApiError::Invalid(format!("unknown sample format {other:?}"))),
    };
    let d = SampleConfig::default();
    let config = SampleConfig {
        evaluators: q.evaluators.unwrap_or(d.evaluators),
        per_topic: q.per_topic.unwrap_or(d.per_topic),
        overlap: q.overlap.unwrap_or(d.overlap),
        seed: q.seed.unwrap_or(d.seed),
    };
    blocking(move || {
        let (model, source) = s.store.model(&id)?;
        let units = s.store.units(&source.corpus_id)?.unwrap_or_default();
        let workbook = sample_for_annotation(&model, &units, &config)?;
        Ok(if as_json {
            Json(workbook).into_response()
        } else {
            let csv = workbook_to_csv(&workbook.rows)?;
            ([(header::CONTENT_TYPE, "text/csv; charset=utf-8")], csv).into_response()
        })
    })
    .await
}

async fn job(State(s): State<AppState>, UrlPath(id): UrlPath<String>) -> ApiResult<Json<JobRecord>> {
    s.jobs
        .get(&id)
        .map(Json)
        .ok_or_else(|| ApiError::NotFound(format!("no job {id}")))
}
