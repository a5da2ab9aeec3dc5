use serde::{Deserialize, Serialize};

use super::ols::extended_f64;
use super::{build_features, kfold_cv, ols_fit, CrossValReport, FeatureMatrix, FeatureMode, SIGNIFICANCE_LEVEL};
use crate::error::Result;
use crate::extraction::Review;
use crate::hash::{config_hash, short_id};
use crate::topics::TopicModel;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct RegressConfig {
    pub mode: FeatureMode,
    pub folds: usize,
    pub seed: u64,
}

impl Default for RegressConfig {
    fn default() -> Self {
        Self {
            mode: FeatureMode::WithSentiment,
            folds: 5,
            seed: 0,
        }
    }
}

/// One coefficient of the full-data fit; `topic_id` is `None` for the intercept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientRow {
    pub topic_id: Option<usize>,
    pub beta: f64,
    pub se: f64,
    #[serde(with = "extended_f64")]
    pub t: f64,
    pub p: f64,
    pub significant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitArtifact {
    pub fit_id: String,
    pub config_hash: String,
    pub model_id: String,
    pub model_config_hash: String,
    pub config: RegressConfig,
    pub n: usize,
    pub df: usize,
    pub r_squared: Option<f64>,
    pub rmse: f64,
    pub coefficients: Vec<CoefficientRow>,
    pub dropped_topics: Vec<usize>,
    pub significant_count: usize,
    pub cv: CrossValReport,
}

impl FitArtifact {
    pub fn coefficient(&self, topic_id: usize) -> Option<&CoefficientRow> {
        self.coefficients.iter().find(|c| c.topic_id == Some(topic_id))
    }
}

/// Content hash of a fit: source model, regression config and target values.
pub fn fit_hash(model_config_hash: &str, config: &RegressConfig, target: &[f64]) -> String {
    config_hash(&(model_config_hash, config, target))
}

/// Full-data fit plus cross-validation on a prepared feature matrix.
pub fn run_regression(
    matrix: &FeatureMatrix,
    config: &RegressConfig,
    model_id: &str,
    model_config_hash: &str,
) -> Result<FitArtifact> {
    let fit = ols_fit(&matrix.rows, &matrix.target)?;
    let cv = kfold_cv(matrix, config.folds, config.seed)?;
    let row = |topic_id, e: super::ols::Estimate| CoefficientRow {
        topic_id,
        beta: e.beta,
        se: e.se,
        t: e.t,
        p: e.p,
        significant: e.p < SIGNIFICANCE_LEVEL,
    };
    let mut coefficients = vec![row(None, fit.intercept)];
    for (col, est) in fit.coefficients.iter().enumerate() {
        if let Some(e) = est {
            coefficients.push(row(Some(matrix.topic_ids[col]), *e));
        }
    }
    let hash = fit_hash(model_config_hash, config, &matrix.target);
    Ok(FitArtifact {
        fit_id: short_id(&hash),
        config_hash: hash,
        model_id: model_id.to_string(),
        model_config_hash: model_config_hash.to_string(),
        config: config.clone(),
        n: fit.n,
        df: fit.df,
        r_squared: fit.r_squared,
        rmse: fit.rmse,
        significant_count: fit.significant_count(SIGNIFICANCE_LEVEL),
        dropped_topics: fit.dropped.iter().map(|&c| matrix.topic_ids[c]).collect(),
        coefficients,
        cv,
    })
}

/// Builds features for `model` against star ratings and regresses.
pub fn fit_model(reviews: &[Review], model: &TopicModel, config: &RegressConfig) -> Result<FitArtifact> {
    let matrix = build_features(reviews, model, config.mode)?;
    run_regression(&matrix, config, model.id(), &model.header.config_hash)
}
