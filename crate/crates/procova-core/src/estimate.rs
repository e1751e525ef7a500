//! Two-stage fitting: first-stage least squares on historical control data,
//! second-stage least squares on trial data with plugged-in prognostic
//! scores, and the sandwich variance components captured along the way.

use crate::data::{HistoricalDataset, TrialDataset};
use crate::error::{Error, Result};
use crate::model::{prognostic_design, second_stage_design, ModelSpec, SecondStageDesign};
use crate::numeric::{solve_least_squares, Matrix, Vector};
use crate::variance::{assemble, compute_q0_omega, compute_q1, compute_v_theta, SandwichComponents};

/// First-stage fit: prognostic-model coefficients plus the Gram blocks needed
/// for the first-stage sandwich.
#[derive(Debug, Clone)]
pub struct PrognosticFit {
    pub theta_hat: Vector,
    pub n_hist: usize,
    pub residuals: Vector,
    /// Negated mean Gram matrix of the historical covariates (q x q).
    pub q2_hat: Matrix,
    /// Residual-weighted mean Gram matrix of the historical covariates (q x q).
    pub q3_hat: Matrix,
}

/// Second-stage fit with both sandwich variance estimators.
#[derive(Debug, Clone)]
pub struct ProcovaFit {
    pub beta_hat: Vector,
    pub spec: ModelSpec,
    pub n_trial: usize,
    pub n_hist: usize,
    pub residuals: Vector,
    pub design: SecondStageDesign,
    pub components: SandwichComponents,
    /// Sandwich treating the prognostic model as known.
    pub v_fix: Matrix,
    /// Sandwich accounting for prognostic-model estimation.
    pub v_est: Matrix,
}

impl ProcovaFit {
    /// Trial-to-historical sample-size ratio.
    pub fn kappa_hat(&self) -> f64 {
        self.components.kappa_hat
    }
}

/// Fits the linear prognostic model on historical data by least squares and
/// captures the first-stage sandwich blocks.
pub fn fit_prognostic(historical: &HistoricalDataset) -> Result<PrognosticFit> {
    let design = prognostic_design(historical)?;
    let n = design.rows();
    let q = design.cols();
    if n <= q {
        return Err(Error::RankDeficient(format!(
            "{n} historical rows cannot identify {q} prognostic coefficients"
        )));
    }
    let theta_hat = solve_least_squares(&design, historical.outcome())?;
    let fitted = design.mat_vec(&theta_hat)?;
    let residuals = historical.outcome().sub(&fitted)?;

    let inv_n = 1.0 / n as f64;
    let mut q2 = Matrix::zeros(q, q);
    let mut q3 = Matrix::zeros(q, q);
    for i in 0..n {
        let w = design.row(i);
        let r2 = residuals.get(i) * residuals.get(i);
        for a in 0..q {
            for b in 0..q {
                let g = w[a] * w[b];
                q2.set(a, b, q2.get(a, b) - inv_n * g);
                q3.set(a, b, q3.get(a, b) + inv_n * r2 * g);
            }
        }
    }
    Ok(PrognosticFit { theta_hat, n_hist: n, residuals, q2_hat: q2, q3_hat: q3 })
}

/// Fits the second-stage model on trial data with the plugged-in prognostic
/// scores and assembles both variance estimators.
pub fn fit_procova(
    trial: &TrialDataset,
    prog: &PrognosticFit,
    spec: ModelSpec,
) -> Result<ProcovaFit> {
    if trial.is_empty() {
        return Err(Error::EmptyData("trial dataset has no rows".into()));
    }
    if !trial.has_both_arms() {
        return Err(Error::SingleArm);
    }
    let design = second_stage_design(trial, &prog.theta_hat, spec)?;
    let beta_hat = solve_least_squares(&design.design, trial.outcome())?;
    let fitted = design.design.mat_vec(&beta_hat)?;
    let residuals = trial.outcome().sub(&fitted)?;

    let (q0_hat, omega_hat) = compute_q0_omega(&design, &residuals)?;
    let q1_hat = compute_q1(trial, &beta_hat, &prog.theta_hat, spec)?;
    let v_theta_hat = compute_v_theta(prog)?;
    let components = SandwichComponents {
        q0_hat,
        omega_hat,
        q1_hat,
        v_theta_hat,
        kappa_hat: trial.len() as f64 / prog.n_hist as f64,
    };
    let (v_fix, v_est) = assemble(&components)?;

    Ok(ProcovaFit {
        beta_hat,
        spec,
        n_trial: trial.len(),
        n_hist: prog.n_hist,
        residuals,
        design,
        components,
        v_fix,
        v_est,
    })
}
