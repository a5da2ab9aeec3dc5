use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{format_sig3, impact_table, priority_matrix, FrequencySplit, PriorityMatrix, TopicImpactRow};
use crate::error::{Error, Result};
use crate::regression::{FeatureMode, FitArtifact};
use crate::topics::{Method, TopicModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Markdown,
    Csv,
    Json,
}

impl ReportFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ReportFormat::Markdown => "md",
            ReportFormat::Csv => "csv",
            ReportFormat::Json => "json",
        }
    }

    pub fn content_type(self) -> &'static str {
        match self {
            ReportFormat::Markdown => "text/markdown; charset=utf-8",
            ReportFormat::Csv => "text/csv; charset=utf-8",
            ReportFormat::Json => "application/json",
        }
    }
}

impl std::str::FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "md" | "markdown" => Ok(ReportFormat::Markdown),
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            other => Err(format!("unknown report format {other:?} (expected md, csv or json)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub model_id: String,
    pub fit_id: String,
    pub method: Method,
    pub mode: FeatureMode,
    pub outlier_rate: f64,
    pub cv_mean_r_squared: Option<f64>,
    pub cv_mean_rmse: f64,
    pub cv_mean_significant: f64,
    pub rows: Vec<TopicImpactRow>,
    /// Absent when no topic is significant.
    pub priority: Option<PriorityMatrix>,
}

pub fn build_report(model: &TopicModel, fit: &FitArtifact, split: FrequencySplit) -> Result<Report> {
    if fit.model_config_hash != model.header.config_hash {
        return Err(Error::invalid("report", format!("fit {} was not built from model {}", fit.fit_id, model.id())));
    }
    let rows = impact_table(model, fit);
    let priority = priority_matrix(&rows, split).ok();
    Ok(Report {
        model_id: model.id().to_string(),
        fit_id: fit.fit_id.clone(),
        method: model.config().method,
        mode: fit.config.mode,
        outlier_rate: model.summaries.outlier_rate,
        cv_mean_r_squared: fit.cv.mean_r_squared,
        cv_mean_rmse: fit.cv.mean_rmse,
        cv_mean_significant: fit.cv.mean_significant,
        rows,
        priority,
    })
}

fn opt3(x: Option<f64>) -> String {
    x.map_or_else(|| "n/a".to_string(), format_sig3)
}

fn md_cell(s: &str) -> String {
    s.replace('|', "\\|").replace('\n', " ")
}

impl Report {
    fn quadrant_of(&self, topic_id: usize) -> String {
        self.priority
            .as_ref()
            .and_then(|m| m.points.iter().find(|p| p.topic_id == topic_id))
            .map_or("", |p| p.quadrant.as_str())
            .to_string()
    }

    pub fn render(&self, format: ReportFormat) -> Result<String> {
        match format {
            ReportFormat::Json => Ok(serde_json::to_string_pretty(self)? + "\n"),
            ReportFormat::Csv => self.render_csv(),
            ReportFormat::Markdown => Ok(self.render_markdown()),
        }
    }

    fn render_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["topic_id", "name", "polarity", "beta", "p", "size", "quadrant", "representative"])?;
        for r in &self.rows {
            w.write_record([
                r.topic_id.to_string(),
                r.name.clone(),
                format!("{:?}", r.polarity).to_lowercase(),
                r.beta_display.clone(),
                opt3(r.p),
                r.size.to_string(),
                self.quadrant_of(r.topic_id),
                r.representative.clone().unwrap_or_default(),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| Error::invalid("csv", e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv writer emits utf-8"))
    }

    fn render_markdown(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# Topic impact\n");
        let _ = writeln!(
            s,
            "Model `{}` ({:?}), fit `{}` ({}).\n",
            self.model_id,
            self.method,
            self.fit_id,
            match self.mode {
                FeatureMode::WithSentiment => "with sentiment",
                FeatureMode::WithoutSentiment => "without sentiment",
            }
        );
        let _ = writeln!(
            s,
            "Hold-out R² {}, RMSE {}, significant coefficients per fold {}, outliers {}.\n",
            opt3(self.cv_mean_r_squared),
            format_sig3(self.cv_mean_rmse),
            format_sig3(self.cv_mean_significant),
            format_sig3(self.outlier_rate)
        );
        let _ = writeln!(s, "| topic_id | name | polarity | beta | p | size | quadrant | representative |");
        let _ = writeln!(s, "|---|---|---|---|---|---|---|---|");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "| {} | {} | {} | {} | {} | {} | {} | {} |",
                r.topic_id,
                md_cell(&r.name),
                format!("{:?}", r.polarity).to_lowercase(),
                r.beta_display,
                opt3(r.p),
                r.size,
                self.quadrant_of(r.topic_id),
                md_cell(r.representative.as_deref().unwrap_or(""))
            );
        }
        if let Some(m) = &self.priority {
            let _ = writeln!(s, "\n## Priority matrix\n");
            let _ = writeln!(s, "Frequency split at {} ({:?}).\n", format_sig3(m.threshold), m.split);
            for q in ["urgent", "monitor", "maintain", "promote"] {
                let names: Vec<String> = m
                    .points
                    .iter()
                    .filter(|p| self.quadrant_of(p.topic_id) == q)
                    .map(|p| format!("{} ({})", md_cell(&p.name), p.topic_id))
                    .collect();
                let _ = writeln!(s, "- **{q}**: {}", if names.is_empty() { "none".into() } else { names.join("; ") });
            }
        }
        s
    }
}
