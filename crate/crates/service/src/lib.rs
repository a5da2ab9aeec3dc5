//! HTTP API over the opinion-topic pipeline.
//!
//! Artifacts live under a data directory and are content-addressed by the
//! hash of their inputs and configuration, so resubmitting an identical
//! request returns the existing artifact. Long-running work (extraction,
//! embedding, clustering, regression) runs as jobs on a bounded worker pool
//! and is polled through `GET /jobs/{id}`.

mod api;
mod error;
mod jobs;
mod store;

use std::path::PathBuf;
use std::sync::Arc;

use opinionlens_core::embedding::ProviderSource;
use opinionlens_core::{ExtractionConfig, ProviderConfig};

pub use api::router;
pub use error::ApiError;
pub use jobs::{JobKind, JobRecord, JobStatus};
pub use store::Store;

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub data_dir: PathBuf,
    /// Jobs allowed to run at once.
    pub workers: usize,
    pub extraction: ExtractionConfig,
    /// Provider used when an embed request does not name one.
    pub embedding: ProviderConfig,
}

impl ServiceConfig {
    pub fn new(data_dir: impl Into<PathBuf>) -> Self {
        let data_dir = data_dir.into();
        Self {
            extraction: ExtractionConfig {
                cache_dir: Some(data_dir.join("llm_cache")),
                ..Default::default()
            },
            data_dir,
            workers: 2,
            embedding: ProviderConfig {
                source: ProviderSource::Remote {
                    endpoint: "http://127.0.0.1:8001/v1/embeddings".into(),
                    model: "all-mpnet-base-v2".into(),
                    batch_size: 64,
                    max_retries: 3,
                },
                normalize: true,
            },
        }
    }
}

#[derive(Clone)]
pub struct AppState {
    pub(crate) config: Arc<ServiceConfig>,
    pub(crate) store: Arc<Store>,
    pub(crate) jobs: Arc<jobs::Jobs>,
}

impl AppState {
    pub fn new(config: ServiceConfig) -> std::io::Result<Self> {
        let store = Store::open(&config.data_dir)?;
        Ok(Self {
            jobs: Arc::new(jobs::Jobs::new(config.workers.max(1))),
            store: Arc::new(store),
            config: Arc::new(config),
        })
    }
}

/// Serves the API on `listener` until the future is dropped or ctrl-c.
pub async fn serve(config: ServiceConfig, listener: tokio::net::TcpListener) -> std::io::Result<()> {
    let app = router(AppState::new(config)?);
    tracing::info!(addr = %listener.local_addr()?, "serving");
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
