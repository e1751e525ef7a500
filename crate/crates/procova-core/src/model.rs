//! Second-stage model variants and design-matrix construction.
//!
//! Three variants are supported: the plain ANCOVA regression of outcome on
//! intercept, treatment and raw prognostic score; the same model with the
//! score centered at its trial-sample mean; and the ANHECOVA model which adds
//! the treatment-by-centered-score product term. Centering always uses the
//! trial-sample mean of the scores, which is the estimable form.

use crate::data::{HistoricalDataset, TrialDataset};
use crate::error::{Error, Result};
use crate::numeric::{Matrix, Vector};
use serde::{Deserialize, Serialize};

/// Which second-stage regression to fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelSpec {
    /// Outcome on (1, A, score). Three parameters.
    #[default]
    Ancova,
    /// Outcome on (1, A, score - mean(score)). Three parameters.
    AncovaCentered,
    /// Outcome on (1, A, centered score, A * centered score). Four parameters.
    Anhecova,
}

impl ModelSpec {
    /// Number of second-stage regression parameters.
    pub fn param_count(self) -> usize {
        match self {
            ModelSpec::Ancova | ModelSpec::AncovaCentered => 3,
            ModelSpec::Anhecova => 4,
        }
    }

    /// True for the variants whose score column has mean zero by construction.
    pub fn is_centered(self) -> bool {
        matches!(self, ModelSpec::AncovaCentered | ModelSpec::Anhecova)
    }

    pub fn coefficient_labels(self) -> &'static [&'static str] {
        match self {
            ModelSpec::Ancova | ModelSpec::AncovaCentered => &["beta0", "betaA", "beta1"],
            ModelSpec::Anhecova => &["beta0", "betaA", "beta1", "beta2"],
        }
    }
}

impl std::fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ModelSpec::Ancova => write!(f, "ancova"),
            ModelSpec::AncovaCentered => write!(f, "ancova-centered"),
            ModelSpec::Anhecova => write!(f, "anhecova"),
        }
    }
}

/// Linear combinations of the second-stage coefficients that the theory
/// singles out.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContrastTarget {
    Intercept,
    Treatment,
    Score,
    /// The treatment-by-score interaction coefficient (ANHECOVA only).
    ScoreByTreatment,
    /// Intercept plus treatment coefficient; estimates the treated-arm mean
    /// under the centered variants.
    ControlMeanPlusEffect,
}

/// Assembled second-stage design matrix together with the centering constant
/// and the raw scores it was built from.
#[derive(Debug, Clone)]
pub struct SecondStageDesign {
    pub design: Matrix,
    /// Sample mean subtracted from the scores; 0 for plain ANCOVA.
    pub centering_offset: f64,
    /// Raw prognostic scores theta^T W_i, before any centering.
    pub score_column: Vector,
    pub spec: ModelSpec,
}

/// First-stage design: one row per historical subject, covariates as-is
/// (the intercept is already the first covariate entry).
pub fn prognostic_design(historical: &HistoricalDataset) -> Result<Matrix> {
    if historical.is_empty() {
        return Err(Error::EmptyData("historical dataset has no rows".into()));
    }
    Ok(historical.covariates().clone())
}

/// Raw prognostic scores theta^T W_i over the trial subjects.
pub fn prognostic_scores(trial: &TrialDataset, theta: &Vector) -> Result<Vector> {
    if theta.len() != trial.covariate_dim() {
        return Err(Error::DimensionMismatch(format!(
            "theta has {} entries, covariates have {}",
            theta.len(),
            trial.covariate_dim()
        )));
    }
    trial.covariates().mat_vec(theta)
}

/// Builds the second-stage design for the given variant.
pub fn second_stage_design(
    trial: &TrialDataset,
    theta: &Vector,
    spec: ModelSpec,
) -> Result<SecondStageDesign> {
    let scores = prognostic_scores(trial, theta)?;
    let n = trial.len();
    if n == 0 {
        return Err(Error::EmptyData("trial dataset has no rows".into()));
    }
    let offset = if spec.is_centered() {
        scores.as_slice().iter().sum::<f64>() / n as f64
    } else {
        0.0
    };
    let p = spec.param_count();
    let mut design = Matrix::zeros(n, p);
    for i in 0..n {
        let a = trial.treatment()[i] as f64;
        let s = scores.get(i) - offset;
        design.set(i, 0, 1.0);
        design.set(i, 1, a);
        design.set(i, 2, s);
        if spec == ModelSpec::Anhecova {
            design.set(i, 3, a * s);
        }
    }
    Ok(SecondStageDesign { design, centering_offset: offset, score_column: scores, spec })
}

/// Selector vector for a coefficient combination under the given variant.
pub fn contrast_vector(spec: ModelSpec, target: ContrastTarget) -> Result<Vector> {
    let p = spec.param_count();
    let mut e = vec![0.0; p];
    match target {
        ContrastTarget::Intercept => e[0] = 1.0,
        ContrastTarget::Treatment => e[1] = 1.0,
        ContrastTarget::Score => e[2] = 1.0,
        ContrastTarget::ScoreByTreatment => {
            if spec != ModelSpec::Anhecova {
                return Err(Error::InvalidTarget(format!(
                    "score-by-treatment requires the anhecova variant, not {spec}"
                )));
            }
            e[3] = 1.0;
        }
        ContrastTarget::ControlMeanPlusEffect => {
            if !spec.is_centered() {
                return Err(Error::InvalidTarget(format!(
                    "control-mean-plus-effect requires a centered variant, not {spec}"
                )));
            }
            e[0] = 1.0;
            e[1] = 1.0;
        }
    }
    Vector::new(e)
}
