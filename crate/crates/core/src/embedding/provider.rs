use std::collections::HashMap;
use std::path::PathBuf;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{check_vectors, load_vectors, normalize, EmbeddingVector};
use crate::error::{Error, Result};
use crate::extraction::OpinionUnit;

/// Turns strings into vectors, one per input, in input order.
pub trait TextEmbedder: Send + Sync {
    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f32>>>;
}

impl<F> TextEmbedder for F
where
    F: Fn(&[String]) -> Result<Vec<Vec<f32>>> + Send + Sync,
{
    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f32>>> {
        self(texts)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProviderSource {
    Remote {
        endpoint: String,
        model: String,
        #[serde(default = "default_batch")]
        batch_size: usize,
        #[serde(default = "default_retries")]
        max_retries: u32,
    },
    File {
        path: PathBuf,
    },
}

fn default_batch() -> usize {
    64
}

fn default_retries() -> u32 {
    3
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderConfig {
    #[serde(flatten)]
    pub source: ProviderSource,
    #[serde(default = "default_true")]
    pub normalize: bool,
}

/// Embeds units with the configured provider.
pub fn embed_units(units: &[OpinionUnit], config: &ProviderConfig) -> Result<Vec<EmbeddingVector>> {
    match &config.source {
        ProviderSource::Remote {
            endpoint,
            model,
            batch_size,
            max_retries,
        } => {
            let client = HttpEmbedder::new(endpoint, model, *max_retries)?;
            embed_with(units, &client, *batch_size, config.normalize)
        }
        ProviderSource::File { path } => {
            let stored = load_vectors(path)?;
            let mut by_id: HashMap<&str, &EmbeddingVector> = HashMap::with_capacity(stored.len());
            for v in &stored {
                by_id.insert(v.unit_id.as_str(), v);
            }
            let mut out = Vec::with_capacity(units.len());
            for unit in units {
                let v = by_id.get(unit.unit_id.as_str()).ok_or_else(|| {
                    Error::invalid(
                        "embedding file",
                        format!("{} has no vector for unit {}", path.display(), unit.unit_id),
                    )
                })?;
                let mut values = v.values.clone();
                if config.normalize {
                    normalize(&mut values);
                }
                out.push(EmbeddingVector {
                    unit_id: unit.unit_id.clone(),
                    values,
                });
            }
            check_vectors(&out)?;
            Ok(out)
        }
    }
}

/// Embeds `"{label}: {excerpt}"` for every unit, `batch_size` texts per call,
/// with up to four batches in flight.
pub fn embed_with(
    units: &[OpinionUnit],
    embedder: &dyn TextEmbedder,
    batch_size: usize,
    normalize_output: bool,
) -> Result<Vec<EmbeddingVector>> {
    if units.is_empty() {
        return Err(Error::invalid("embedding input", "no units to embed"));
    }
    let texts: Vec<String> = units.iter().map(OpinionUnit::text).collect();
    let batches: Vec<&[String]> = texts.chunks(batch_size.max(1)).collect();
    let mut results: Vec<Option<Result<Vec<Vec<f32>>>>> = (0..batches.len()).map(|_| None).collect();

    for window in (0..batches.len()).collect::<Vec<_>>().chunks(4) {
        let outputs: Vec<Result<Vec<Vec<f32>>>> = std::thread::scope(|s| {
            let handles: Vec<_> = window
                .iter()
                .map(|&b| {
                    let batch = batches[b];
                    s.spawn(move || embedder.embed(batch))
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("embedding worker panicked"))
                .collect()
        });
        for (&b, out) in window.iter().zip(outputs) {
            results[b] = Some(out);
        }
    }

    let mut vectors = Vec::with_capacity(units.len());
    let mut offset = 0;
    for (batch, result) in batches.iter().zip(results) {
        let values = result.expect("batch ran").map_err(|e| {
            Error::Transport(format!(
                "embedding units {}..{} failed: {e}",
                units[offset].unit_id,
                units[offset + batch.len() - 1].unit_id
            ))
        })?;
        if values.len() != batch.len() {
            return Err(Error::invalid(
                "embedding response",
                format!("expected {} vectors, got {}", batch.len(), values.len()),
            ));
        }
        for mut v in values {
            if normalize_output {
                normalize(&mut v);
            }
            vectors.push(EmbeddingVector {
                unit_id: units[offset].unit_id.clone(),
                values: v,
            });
            offset += 1;
        }
    }
    check_vectors(&vectors)?;
    Ok(vectors)
}

/// Client for an embeddings endpoint taking `{"model", "input": [..]}`.
///
/// Accepts either a bare array of float arrays or the
/// `{"data": [{"embedding": [..], "index": i}]}` shape.
pub struct HttpEmbedder {
    http: reqwest::blocking::Client,
    endpoint: String,
    model: String,
    max_retries: u32,
}

impl HttpEmbedder {
    pub fn new(endpoint: &str, model: &str, max_retries: u32) -> Result<Self> {
        let http = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(120))
            .build()
            .map_err(|e| Error::Transport(e.to_string()))?;
        Ok(Self {
            http,
            endpoint: endpoint.into(),
            model: model.into(),
            max_retries,
        })
    }

    fn call(&self, texts: &[String]) -> Result<Vec<Vec<f32>>> {
        let response = self
            .http
            .post(&self.endpoint)
            .json(&json!({"model": self.model, "input": texts}))
            .send()
            .map_err(|e| Error::Transport(e.to_string()))?;
        if !response.status().is_success() {
            return Err(Error::Transport(format!(
                "{} returned {}",
                self.endpoint,
                response.status()
            )));
        }
        let payload: Value = response
            .json()
            .map_err(|e| Error::Transport(e.to_string()))?;
        parse_embedding_payload(payload)
    }
}

impl TextEmbedder for HttpEmbedder {
    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f32>>> {
        let mut last = None;
        for attempt in 0..=self.max_retries {
            if attempt > 0 {
                std::thread::sleep(Duration::from_millis(200) * (1 << (attempt - 1).min(10)));
            }
            match self.call(texts) {
                Ok(v) => return Ok(v),
                Err(e) => last = Some(e),
            }
        }
        Err(last.expect("at least one attempt"))
    }
}

fn parse_embedding_payload(payload: Value) -> Result<Vec<Vec<f32>>> {
    let bad = || Error::Transport("unrecognised embeddings response shape".into());
    let rows: Vec<Value> = match payload {
        Value::Array(rows) => rows,
        Value::Object(mut obj) => {
            let Some(Value::Array(mut data)) = obj.remove("data") else {
                return Err(bad());
            };
            data.sort_by_key(|d| d.get("index").and_then(Value::as_u64).unwrap_or(0));
            data.into_iter()
                .map(|mut d| d.get_mut("embedding").map(Value::take).ok_or_else(bad))
                .collect::<Result<_>>()?
        }
        _ => return Err(bad()),
    };
    rows.into_iter()
        .map(|row| {
            row.as_array()
                .ok_or_else(bad)?
                .iter()
                .map(|x| x.as_f64().map(|f| f as f32).ok_or_else(bad))
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use std::sync::Mutex;

    use super::*;

    fn unit(id: &str, label: &str, excerpt: &str) -> OpinionUnit {
        OpinionUnit {
            unit_id: id.into(),
            review_id: "r".into(),
            label: label.into(),
            excerpt: excerpt.into(),
            sentiment: 3,
        }
    }

    #[test]
    fn provider_receives_label_colon_excerpt() {
        let seen = Mutex::new(Vec::new());
        let embedder = |texts: &[String]| {
            seen.lock().unwrap().extend_from_slice(texts);
            Ok(texts.iter().map(|_| vec![3.0f32, 4.0]).collect())
        };
        let out = embed_with(&[unit("u1", "Service", "slow staff")], &embedder, 8, false).unwrap();
        assert_eq!(*seen.lock().unwrap(), ["Service: slow staff"]);
        assert_eq!(out[0].values, [3.0, 4.0]);
    }

    #[test]
    fn normalized_output_has_unit_norm_and_input_order() {
        let units: Vec<_> = (0..10).map(|i| unit(&format!("u{i}"), "L", &format!("e{i}"))).collect();
        let embedder = |texts: &[String]| {
            Ok(texts
                .iter()
                .map(|t| vec![t.len() as f32, 2.0, -1.0])
                .collect())
        };
        let out = embed_with(&units, &embedder, 3, true).unwrap();
        for (u, v) in units.iter().zip(&out) {
            assert_eq!(u.unit_id, v.unit_id);
            assert!((v.norm() - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn inconsistent_dims_rejected() {
        let units = [unit("a", "x", "y"), unit("b", "x", "yy")];
        let embedder = |texts: &[String]| Ok(texts.iter().map(|t| vec![1.0; t.len()]).collect());
        assert!(matches!(
            embed_with(&units, &embedder, 1, false),
            Err(Error::DimMismatch { .. })
        ));
    }

    #[test]
    fn file_provider_passes_vectors_through() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.jsonl");
        let fixture = vec![
            EmbeddingVector { unit_id: "a".into(), values: vec![1.0, 2.0] },
            EmbeddingVector { unit_id: "b".into(), values: vec![0.5, -1.0] },
            EmbeddingVector { unit_id: "c".into(), values: vec![0.0, 3.0] },
        ];
        super::super::save_vectors(&fixture, &path).unwrap();
        let units = [unit("a", "", ""), unit("b", "", ""), unit("c", "", "")];
        let config = ProviderConfig {
            source: ProviderSource::File { path },
            normalize: false,
        };
        assert_eq!(embed_units(&units, &config).unwrap(), fixture);
    }

    #[test]
    fn openai_shaped_payload() {
        let payload = json!({"data": [
            {"index": 1, "embedding": [0.0, 1.0]},
            {"index": 0, "embedding": [1.0, 0.0]}
        ]});
        assert_eq!(
            parse_embedding_payload(payload).unwrap(),
            vec![vec![1.0, 0.0], vec![0.0, 1.0]]
        );
        assert_eq!(
            parse_embedding_payload(json!([[1.0], [2.0]])).unwrap(),
            vec![vec![1.0], vec![2.0]]
        );
    }

    #[test]
    fn config_json_shape() {
        let cfg: ProviderConfig =
            serde_json::from_str(r#"{"kind":"remote","endpoint":"http://x/v1/embeddings","model":"m"}"#).unwrap();
        assert!(cfg.normalize);
        assert!(matches!(cfg.source, ProviderSource::Remote { batch_size: 64, .. }));
        let cfg: ProviderConfig =
            serde_json::from_str(r#"{"kind":"file","path":"v.bin","normalize":false}"#).unwrap();
        assert!(!cfg.normalize);
    }
}
