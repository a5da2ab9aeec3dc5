//! Opinion-unit topic analytics.
//!
//! The pipeline runs in four stages, each in its own module:
//!
//! 1. [`extraction`] turns raw reviews into opinion units `(label, excerpt, sentiment)`
//!    through a chat-completion endpoint.
//! 2. [`embedding`] attaches one vector per unit, and [`topics`] clusters them with
//!    PCA + HDBSCAN into a fixed number of topics (optionally split by sentiment).
//! 3. [`regression`] regresses per-topic sentiment onto star ratings and cross-validates.
//! 4. [`report`] renders the topic-impact table and the priority matrix.
//!
//! [`evaluation`] holds cluster-quality metrics, annotation workbooks and the
//! synthetic planted benchmark.

pub mod embedding;
pub mod error;
pub mod evaluation;
pub mod extraction;
pub mod hash;
pub mod jsonl;
pub mod regression;
pub mod report;
pub mod topics;

pub use embedding::{EmbeddingVector, ProviderConfig};
pub use error::{Error, Result};
pub use extraction::{ExtractionConfig, OpinionUnit, Review};
pub use regression::{CrossValReport, FeatureMatrix, FeatureMode, RegressionFit};
pub use topics::{ClusterAssignment, Method, Polarity, Topic, TopicModel, TopicModelConfig};
