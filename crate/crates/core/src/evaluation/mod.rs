//! Cluster-quality metrics, annotation workbooks, and the synthetic planted
//! benchmark.

mod annotation;
mod metrics;
mod synthetic;

pub use annotation::{
    read_annotations_csv, sample_for_annotation, workbook_to_csv, write_workbook_csv, AnnotationWorkbook, SampleConfig, TopicSample,
    WorkbookRow,
};
pub use metrics::{
    inter_rater_agreement, precision_report, sentiment_precision, topic_precision, AnnotationRecord, Aggregation,
    PrecisionReport, TopicPrecision,
};
pub use synthetic::{analytic_r2, generate_synthetic, GroundTruth, SyntheticCorpus, SyntheticSpec, TopicLayout};
