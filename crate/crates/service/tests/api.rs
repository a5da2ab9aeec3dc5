use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use axum::routing::post;
use axum::{Json, Router};
use opinionlens_core::evaluation::{generate_synthetic, SyntheticSpec};
use opinionlens_core::jsonl;
use opinionlens_service::{serve, ServiceConfig};
use reqwest::blocking::Client;
use reqwest::StatusCode;
use serde_json::{json, Value};

struct Env {
    base: String,
    http: Client,
    llm_calls: Arc<AtomicUsize>,
    corpus_jsonl: String,
    _data: tempfile::TempDir,
}

/// Starts a fake chat endpoint, a fake embedding endpoint and the service,
/// all backed by a small planted corpus.
fn start(reviews: usize) -> Env {
    let corpus = generate_synthetic(&SyntheticSpec {
        reviews,
        topics: 4,
        seed: 3,
        ..Default::default()
    })
    .unwrap();

    let mut answers: HashMap<String, Vec<Value>> = HashMap::new();
    let text_of: HashMap<&str, &str> = corpus.reviews.iter().map(|r| (r.review_id.as_str(), r.text.as_str())).collect();
    for u in &corpus.units {
        answers
            .entry(text_of[u.review_id.as_str()].to_string())
            .or_default()
            .push(json!([u.label, u.excerpt, u.sentiment]));
    }
    for rows in answers.values_mut() {
        rows.push(json!(["overall experience", "fine overall", 7]));
    }
    let mut vectors: HashMap<String, Vec<f32>> = HashMap::new();
    for (u, v) in corpus.units.iter().zip(&corpus.sentiment_vectors) {
        vectors.entry(u.text()).or_insert_with(|| v.values.clone());
    }

    let llm_calls = Arc::new(AtomicUsize::new(0));
    let data = tempfile::tempdir().unwrap();
    let data_dir = data.path().to_path_buf();
    let (tx, rx) = std::sync::mpsc::channel();
    let calls = llm_calls.clone();
    std::thread::spawn(move || {
        let rt = tokio::runtime::Runtime::new().unwrap();
        rt.block_on(async move {
            let answers = Arc::new(answers);
            let chat = Router::new().route(
                "/chat",
                post(move |Json(body): Json<Value>| {
                    let answers = answers.clone();
                    calls.fetch_add(1, Ordering::SeqCst);
                    async move {
                        let prompt = body["messages"][0]["content"].as_str().unwrap_or_default();
                        let input = prompt
                            .rsplit_once("Input: ")
                            .map(|(_, rest)| rest.trim_end_matches("\n\nOutput:"))
                            .unwrap_or_default();
                        let content = serde_json::to_string(&answers.get(input).cloned().unwrap_or_default()).unwrap();
                        Json(json!({"choices": [{"message": {"content": content}}]}))
                    }
                }),
            );
            let vectors = Arc::new(vectors);
            let embed = Router::new().route(
                "/embed",
                post(move |Json(body): Json<Value>| {
                    let vectors = vectors.clone();
                    async move {
                        let data: Vec<Value> = body["input"]
                            .as_array()
                            .unwrap()
                            .iter()
                            .enumerate()
                            .map(|(i, t)| json!({"index": i, "embedding": vectors[t.as_str().unwrap()]}))
                            .collect();
                        Json(json!({ "data": data }))
                    }
                }),
            );
            let chat_addr = spawn_router(chat).await;
            let embed_addr = spawn_router(embed).await;

            let mut config = ServiceConfig::new(&data_dir);
            config.extraction.endpoint_url = format!("http://{chat_addr}/chat");
            config.extraction.backoff_base = Duration::from_millis(1);
            config.embedding.source = opinionlens_core::embedding::ProviderSource::Remote {
                endpoint: format!("http://{embed_addr}/embed"),
                model: "fake".into(),
                batch_size: 256,
                max_retries: 0,
            };
            let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
            tx.send(listener.local_addr().unwrap()).unwrap();
            serve(config, listener).await.unwrap();
        });
    });
    let addr = rx.recv_timeout(Duration::from_secs(30)).unwrap();
    Env {
        base: format!("http://{addr}"),
        http: Client::builder().timeout(Duration::from_secs(300)).build().unwrap(),
        llm_calls,
        corpus_jsonl: jsonl::to_string(&corpus.reviews).unwrap(),
        _data: data,
    }
}

async fn spawn_router(router: Router) -> SocketAddr {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move { axum::serve(listener, router).await.unwrap() });
    addr
}

impl Env {
    fn post(&self, path: &str, body: Value) -> (StatusCode, Value) {
        let r = self.http.post(format!("{}{path}", self.base)).json(&body).send().unwrap();
        (r.status(), r.json().unwrap())
    }

    fn get(&self, path: &str) -> (StatusCode, String) {
        let r = self.http.get(format!("{}{path}", self.base)).send().unwrap();
        (r.status(), r.text().unwrap())
    }

    fn get_json(&self, path: &str) -> Value {
        let (status, body) = self.get(path);
        assert_eq!(status, StatusCode::OK, "{path}: {body}");
        serde_json::from_str(&body).unwrap()
    }

    fn upload(&self) -> String {
        let r = self
            .http
            .post(format!("{}/corpora", self.base))
            .body(self.corpus_jsonl.clone())
            .send()
            .unwrap();
        assert_eq!(r.status(), StatusCode::CREATED);
        r.json::<Value>().unwrap()["corpus_id"].as_str().unwrap().to_string()
    }

    /// Submits a job and polls it to completion; returns the artifact id.
    fn run_job(&self, path: &str, body: Value) -> String {
        let (status, job) = self.post(path, body);
        assert!(status.is_success(), "{path}: {job}");
        let id = job["job_id"].as_str().unwrap().to_string();
        let start = Instant::now();
        loop {
            let job = self.get_json(&format!("/jobs/{id}"));
            match job["status"].as_str().unwrap() {
                "done" => return job["artifact"].as_str().unwrap().to_string(),
                "failed" => panic!("job {id} failed: {job}"),
                _ => {}
            }
            assert!(start.elapsed() < Duration::from_secs(300), "job {id} timed out");
            std::thread::sleep(Duration::from_millis(50));
        }
    }
}

#[test]
fn full_pipeline_over_http() {
    let env = start(300);
    let cid = env.upload();
    assert_eq!(env.upload(), cid, "corpus ids are content-addressed");

    env.run_job(&format!("/corpora/{cid}/extract"), json!({}));
    let calls = env.llm_calls.load(Ordering::SeqCst);
    assert_eq!(calls, 300);
    let (status, again) = env.post(&format!("/corpora/{cid}/extract"), json!({}));
    assert_eq!(status, StatusCode::OK);
    assert_eq!(again["status"], "done");
    assert_eq!(env.llm_calls.load(Ordering::SeqCst), calls, "no re-extraction");

    let info = env.get_json(&format!("/corpora/{cid}"));
    assert!(info["units"].as_u64().unwrap() > 300);

    env.run_job(&format!("/corpora/{cid}/embed"), json!({}));

    let model_req = json!({"method": "m3", "K": 4, "min_cluster_size": 20, "seed": 1});
    let mid = env.run_job(&format!("/corpora/{cid}/models"), model_req.clone());
    let (status, again) = env.post(&format!("/corpora/{cid}/models"), model_req);
    assert_eq!(status, StatusCode::OK, "identical config returns the stored model");
    assert_eq!(again["status"], "done");
    assert_eq!(again["artifact"], mid.as_str());

    let topics = env.get_json(&format!("/models/{mid}/topics"));
    let list = topics["topics"].as_array().unwrap();
    assert!(!list.is_empty() && list.len() <= 4);
    for t in list {
        let p = t["polarity"].as_str().unwrap();
        assert!(p == "negative" || p == "positive", "{p}");
    }
    assert_eq!(topics["corpus_id"], cid.as_str());

    let units = env.get_json(&format!("/models/{mid}/topics/0/units?limit=3"));
    assert_eq!(units["units"].as_array().unwrap().len(), 3);
    assert!(units["total"].as_u64().unwrap() >= 3);
    assert_eq!(env.get(&format!("/models/{mid}/topics/99/units")).0, StatusCode::NOT_FOUND);

    let fid = env.run_job(&format!("/models/{mid}/regress"), json!({"with_sentiment": true, "folds": 5, "seed": 0}));
    let fit = env.get_json(&format!("/fits/{fid}"));
    assert_eq!(fit["model_id"], mid.as_str());
    assert!(fit["cv"]["mean_rmse"].as_f64().unwrap() > 0.0);

    // The report reuses the stored fit, so its coefficients are the fit's.
    let report = env.get_json(&format!("/models/{mid}/report?format=json&with_sentiment=true"));
    assert_eq!(report["fit_id"], fid.as_str());
    for row in report["rows"].as_array().unwrap() {
        let tid = row["topic_id"].as_u64().unwrap();
        let coef = fit["coefficients"]
            .as_array()
            .unwrap()
            .iter()
            .find(|c| c["topic_id"].as_u64() == Some(tid));
        match coef {
            Some(c) => {
                assert_eq!(row["beta"], c["beta"]);
                assert_eq!(row["p"], c["p"]);
            }
            None => assert!(row["beta"].is_null()),
        }
    }
    let first = env.get(&format!("/models/{mid}/report?format=csv"));
    let second = env.get(&format!("/models/{mid}/report?format=csv"));
    assert_eq!(first, second, "identical GETs give identical bodies");
    assert!(first.1.starts_with("topic_id,name,polarity,beta,p,size,quadrant,representative"));

    let (status, sample) = env.get(&format!("/models/{mid}/annotation-sample?per_topic=6&overlap=2"));
    assert_eq!(status, StatusCode::OK);
    assert!(sample.starts_with("topic_id,evaluator_id,unit_id,label,excerpt,topic_name,error"));

    // Units and vectors are frozen once a model exists.
    let (status, _) = env.post(&format!("/corpora/{cid}/embed"), json!({"name": "other"}));
    assert_eq!(status, StatusCode::CONFLICT);
}

#[test]
fn error_statuses() {
    let env = start(40);
    assert_eq!(env.get("/models/nope/topics").0, StatusCode::NOT_FOUND);
    assert_eq!(env.get("/fits/nope").0, StatusCode::NOT_FOUND);
    assert_eq!(env.get("/jobs/nope").0, StatusCode::NOT_FOUND);
    assert_eq!(env.post("/corpora/nope/extract", json!({})).0, StatusCode::NOT_FOUND);

    let r = env.http.post(format!("{}/corpora", env.base)).body("{not json").send().unwrap();
    assert_eq!(r.status(), StatusCode::UNPROCESSABLE_ENTITY);

    let cid = env.upload();
    let (status, _) = env.post(&format!("/corpora/{cid}/models"), json!({"method": "m1", "K": 4}));
    assert_eq!(status, StatusCode::CONFLICT, "no units yet");
    assert_eq!(env.post(&format!("/corpora/{cid}/embed"), json!({})).0, StatusCode::CONFLICT);

    let (status, body) = env.post(&format!("/corpora/{cid}/models"), json!({"method": "m1", "K": 0}));
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY, "{body}");
    let (status, _) = env.post(&format!("/corpora/{cid}/models"), json!({"method": "m9"}));
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    let (status, _) = env.post(
        &format!("/corpora/{cid}/embed"),
        json!({"provider": {"kind": "file", "path": "/etc/passwd"}}),
    );
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
}
