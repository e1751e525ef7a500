//! Trial and historical datasets.
//!
//! Covariate vectors carry the intercept as their first entry; the ingestion
//! layer (CLI or simulation engine) prepends it rather than the estimators
//! inferring it.

use crate::error::{Error, Result};
use crate::numeric::{Matrix, Vector};

/// Randomized-trial data: covariates (with intercept), binary treatment
/// assignment and outcome.
#[derive(Debug, Clone)]
pub struct TrialDataset {
    covariates: Matrix,
    treatment: Vec<u8>,
    outcome: Vector,
}

/// Historical control data: covariates (with intercept) and outcome. All
/// subjects are untreated by construction, so no assignment is stored.
#[derive(Debug, Clone)]
pub struct HistoricalDataset {
    covariates: Matrix,
    outcome: Vector,
}

impl TrialDataset {
    pub fn new(covariates: Matrix, treatment: Vec<u8>, outcome: Vector) -> Result<Self> {
        let n = covariates.rows();
        if treatment.len() != n || outcome.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "{} covariate rows, {} assignments, {} outcomes",
                n,
                treatment.len(),
                outcome.len()
            )));
        }
        if let Some(bad) = treatment.iter().find(|a| **a > 1) {
            return Err(Error::InvalidConfig(format!(
                "treatment assignment must be 0 or 1, got {bad}"
            )));
        }
        Ok(Self { covariates, treatment, outcome })
    }

    pub fn len(&self) -> usize {
        self.covariates.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Covariate dimension including the intercept.
    pub fn covariate_dim(&self) -> usize {
        self.covariates.cols()
    }

    pub fn covariates(&self) -> &Matrix {
        &self.covariates
    }

    pub fn covariate_row(&self, i: usize) -> &[f64] {
        self.covariates.row(i)
    }

    pub fn treatment(&self) -> &[u8] {
        &self.treatment
    }

    pub fn outcome(&self) -> &Vector {
        &self.outcome
    }

    /// True when both arms are present.
    pub fn has_both_arms(&self) -> bool {
        self.treatment.contains(&0) && self.treatment.contains(&1)
    }
}

impl HistoricalDataset {
    pub fn new(covariates: Matrix, outcome: Vector) -> Result<Self> {
        if covariates.rows() != outcome.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} covariate rows, {} outcomes",
                covariates.rows(),
                outcome.len()
            )));
        }
        Ok(Self { covariates, outcome })
    }

    pub fn len(&self) -> usize {
        self.covariates.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn covariate_dim(&self) -> usize {
        self.covariates.cols()
    }

    pub fn covariates(&self) -> &Matrix {
        &self.covariates
    }

    pub fn covariate_row(&self, i: usize) -> &[f64] {
        self.covariates.row(i)
    }

    pub fn outcome(&self) -> &Vector {
        &self.outcome
    }
}
