//! Prognostic covariate adjustment for randomized-trial treatment-effect
//! estimation.
//!
//! The pipeline has two stages: a linear prognostic model is fit on
//! historical control data, then the trial outcome is regressed on intercept,
//! treatment assignment and the plugged-in prognostic score (optionally
//! centered, optionally with a treatment-by-score interaction). Two sandwich
//! variance estimators accompany the second-stage coefficients: one treating
//! the prognostic model as known and one propagating its estimation
//! uncertainty from the historical sample. The crate also ships a scenario
//! simulation engine for coverage and variance-ratio studies, an exact
//! finite-population oracle for the orthogonality and derivative identities
//! behind the estimators, and a self-validation suite wiring those together.

pub mod check;
pub mod data;
pub mod error;
pub mod estimate;
pub mod inference;
pub mod model;
pub mod numeric;
pub mod oracle;
pub mod sim;
pub mod variance;

pub use data::{HistoricalDataset, TrialDataset};
pub use error::{Error, Result};
pub use estimate::{fit_procova, fit_prognostic, ProcovaFit, PrognosticFit};
pub use inference::{summarize, InferenceResult};
pub use model::{contrast_vector, ContrastTarget, ModelSpec};
pub use numeric::{Matrix, Vector};
