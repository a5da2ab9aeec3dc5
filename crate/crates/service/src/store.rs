//! On-disk artifact store. Every artifact is written to a scratch location
//! and moved into place once complete, and never modified afterwards.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use opinionlens_core::embedding::{load_vectors, save_vectors};
use opinionlens_core::extraction::validate_reviews;
use opinionlens_core::hash::{sha256_hex, short_id};
use opinionlens_core::regression::FitArtifact;
use opinionlens_core::{jsonl, EmbeddingVector, OpinionUnit, Review, TopicModel};
use serde::{Deserialize, Serialize};

use crate::error::ApiError;

const LOCK_FILE: &str = "has_models";

/// Where a model's inputs came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSource {
    pub corpus_id: String,
    pub vectors: String,
}

pub struct Store {
    root: PathBuf,
}

impl Store {
    pub fn open(root: &Path) -> io::Result<Self> {
        for sub in ["corpora", "models", "fits", "tmp", "llm_cache"] {
            fs::create_dir_all(root.join(sub))?;
        }
        Ok(Self { root: root.to_path_buf() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn corpus_dir(&self, id: &str) -> PathBuf {
        self.root.join("corpora").join(id)
    }

    pub fn model_dir(&self, id: &str) -> PathBuf {
        self.root.join("models").join(id)
    }

    pub fn fit_path(&self, id: &str) -> PathBuf {
        self.root.join("fits").join(id).join("fit.json")
    }

    pub fn units_path(&self, corpus: &str) -> PathBuf {
        self.corpus_dir(corpus).join("units.jsonl")
    }

    pub fn vectors_path(&self, corpus: &str, name: &str) -> PathBuf {
        self.corpus_dir(corpus).join("vectors").join(format!("{name}.jsonl"))
    }

    /// Stores a review corpus under the hash of its canonical JSONL form.
    pub fn put_corpus(&self, reviews: &[Review]) -> Result<String, ApiError> {
        validate_reviews(reviews)?;
        let text = jsonl::to_string(reviews)?;
        let id = short_id(&sha256_hex(text.as_bytes()));
        let dir = self.corpus_dir(&id);
        if !dir.exists() {
            self.publish_dir(&dir, |tmp| {
                fs::create_dir(tmp.join("vectors"))?;
                fs::write(tmp.join("reviews.jsonl"), &text)?;
                Ok(())
            })?;
        }
        Ok(id)
    }

    pub fn corpus_exists(&self, id: &str) -> bool {
        valid_id(id) && self.corpus_dir(id).join("reviews.jsonl").is_file()
    }

    pub fn reviews(&self, corpus: &str) -> Result<Vec<Review>, ApiError> {
        if !self.corpus_exists(corpus) {
            return Err(ApiError::NotFound(format!("no corpus {corpus}")));
        }
        Ok(jsonl::read(&self.corpus_dir(corpus).join("reviews.jsonl"))?)
    }

    pub fn units(&self, corpus: &str) -> Result<Option<Vec<OpinionUnit>>, ApiError> {
        let path = self.units_path(corpus);
        if !path.is_file() {
            return Ok(None);
        }
        Ok(Some(jsonl::read(&path)?))
    }

    pub fn vectors(&self, corpus: &str, name: &str) -> Result<Option<Vec<EmbeddingVector>>, ApiError> {
        let path = self.vectors_path(corpus, name);
        if !path.is_file() {
            return Ok(None);
        }
        Ok(Some(load_vectors(&path)?))
    }

    pub fn vector_sets(&self, corpus: &str) -> Vec<String> {
        let mut names: Vec<String> = fs::read_dir(self.corpus_dir(corpus).join("vectors"))
            .into_iter()
            .flatten()
            .flatten()
            .filter_map(|e| e.file_name().to_str()?.strip_suffix(".jsonl").map(str::to_owned))
            .collect();
        names.sort();
        names
    }

    pub fn is_locked(&self, corpus: &str) -> bool {
        self.corpus_dir(corpus).join(LOCK_FILE).exists()
    }

    /// Marks the corpus as having models; its units and vectors are frozen from here on.
    pub fn lock(&self, corpus: &str) -> io::Result<()> {
        let path = self.corpus_dir(corpus).join(LOCK_FILE);
        if !path.exists() {
            fs::write(path, b"")?;
        }
        Ok(())
    }

    pub fn write_units(&self, corpus: &str, units: &[OpinionUnit], stats: &impl Serialize) -> Result<(), ApiError> {
        let dir = self.corpus_dir(corpus);
        self.publish_file(&dir.join("extract_stats.json"), |p| Ok(jsonl::write_json(p, stats)?))?;
        self.publish_file(&self.units_path(corpus), |p| Ok(jsonl::write(p, units)?))
    }

    pub fn write_vectors<T: Serialize>(
        &self,
        corpus: &str,
        name: &str,
        vectors: &[EmbeddingVector],
        provider: &T,
    ) -> Result<(), ApiError> {
        let meta = self.corpus_dir(corpus).join("vectors").join(format!("{name}.provider.json"));
        self.publish_file(&meta, |p| Ok(jsonl::write_json(p, provider)?))?;
        self.publish_file(&self.vectors_path(corpus, name), |p| Ok(save_vectors(vectors, p)?))
    }

    pub fn vector_provider(&self, corpus: &str, name: &str) -> Option<serde_json::Value> {
        let meta = self.corpus_dir(corpus).join("vectors").join(format!("{name}.provider.json"));
        jsonl::read_json(&meta).ok()
    }

    pub fn model_exists(&self, id: &str) -> bool {
        valid_id(id) && self.model_dir(id).join("topics.json").is_file()
    }

    pub fn model(&self, id: &str) -> Result<(TopicModel, ModelSource), ApiError> {
        if !self.model_exists(id) {
            return Err(ApiError::NotFound(format!("no model {id}")));
        }
        let dir = self.model_dir(id);
        Ok((TopicModel::load(&dir)?, jsonl::read_json(&dir.join("source.json"))?))
    }

    pub fn put_model(&self, model: &TopicModel, source: &ModelSource) -> Result<(), ApiError> {
        let dir = self.model_dir(model.id());
        if dir.exists() {
            return Ok(());
        }
        self.publish_dir(&dir, |tmp| {
            model.save(tmp)?;
            jsonl::write_json(&tmp.join("source.json"), source)?;
            Ok(())
        })
    }

    pub fn fit(&self, id: &str) -> Result<Option<FitArtifact>, ApiError> {
        let path = self.fit_path(id);
        if !valid_id(id) || !path.is_file() {
            return Ok(None);
        }
        Ok(Some(jsonl::read_json(&path)?))
    }

    pub fn put_fit(&self, fit: &FitArtifact) -> Result<(), ApiError> {
        let path = self.fit_path(&fit.fit_id);
        let dir = path.parent().expect("fit path has a parent");
        if dir.exists() {
            return Ok(());
        }
        self.publish_dir(dir, |tmp| Ok(jsonl::write_json(&tmp.join("fit.json"), fit)?))
    }

    fn publish_dir(
        &self,
        dest: &Path,
        fill: impl FnOnce(&Path) -> Result<(), ApiError>,
    ) -> Result<(), ApiError> {
        let tmp = tempfile::Builder::new().prefix("dir").tempdir_in(self.root.join("tmp"))?;
        fill(tmp.path())?;
        let staged = tmp.keep();
        if let Err(e) = fs::rename(&staged, dest) {
            let _ = fs::remove_dir_all(&staged);
            // A concurrent writer got there first with identical content.
            if !dest.exists() {
                return Err(e.into());
            }
        }
        Ok(())
    }

    fn publish_file(
        &self,
        dest: &Path,
        fill: impl FnOnce(&Path) -> Result<(), ApiError>,
    ) -> Result<(), ApiError> {
        let suffix = dest
            .extension()
            .map(|e| format!(".{}", e.to_string_lossy()))
            .unwrap_or_default();
        let tmp = tempfile::Builder::new()
            .suffix(&suffix)
            .tempfile_in(self.root.join("tmp"))?;
        fill(tmp.path())?;
        match tmp.persist_noclobber(dest) {
            Ok(_) => Ok(()),
            Err(e) if dest.exists() => {
                drop(e);
                Ok(())
            }
            Err(e) => Err(e.error.into()),
        }
    }
}

/// Ids and names are used as path components; anything but `[A-Za-z0-9_-]` is refused.
pub fn valid_id(id: &str) -> bool {
    !id.is_empty() && id.len() <= 64 && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}
