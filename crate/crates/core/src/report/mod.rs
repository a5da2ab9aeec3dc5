//! Topic-impact table and priority matrix, rendered as markdown, CSV or JSON.

mod matrix;
mod render;
mod table;

pub use matrix::{priority_matrix, FrequencySplit, PriorityMatrix, PriorityPoint, Quadrant};
pub use render::{build_report, Report, ReportFormat};
pub use table::{format_sig3, impact_table, TopicImpactRow};

/// Rows with p above this render as "n.s.".
pub const NOT_SIGNIFICANT_ABOVE: f64 = 0.05;
