//! Sandwich variance estimators for the two-stage fit.
//!
//! Two estimators are assembled for the second-stage coefficients: `v_fix`,
//! the plug-in sandwich that treats the first-stage coefficients as known
//! (equivalently, the HC0 robust covariance of the second-stage regression
//! scaled by n), and `v_est`, which adds the first-stage estimation
//! uncertainty propagated through the cross-derivative of the estimating
//! function:
//!
//! ```text
//! v_fix = Q0^-1 Omega Q0^-T
//! v_est = v_fix + (n/n_hist) * Q0^-1 Q1 V_theta Q1^T Q0^-T
//! ```
//!
//! with Q0 the (negated) mean Gram matrix of the design, Omega the
//! residual-weighted Gram matrix, Q1 the mean derivative of the estimating
//! function in the first-stage coefficients, and V_theta the first-stage
//! sandwich. All averages are plain 1/n and 1/n_hist; no degrees-of-freedom
//! correction is applied.
//!
//! For the centered variants, the score centering constant is the trial
//! sample mean and is itself a function of the first-stage coefficients, so
//! its derivative (the mean covariate vector) propagates through Q1. The
//! binding definition of Q1 is the central finite difference of the empirical
//! estimating-function mean; the analytic forms here are checked against it
//! in the validation suite.

use crate::data::TrialDataset;
use crate::error::{Error, Result};
use crate::estimate::PrognosticFit;
use crate::model::{second_stage_design, ModelSpec, SecondStageDesign};
use crate::numeric::{invert, Matrix, Vector};

/// Everything needed to assemble the two sandwich estimators.
#[derive(Debug, Clone)]
pub struct SandwichComponents {
    /// Negated mean Gram matrix of the second-stage design (p x p).
    pub q0_hat: Matrix,
    /// Residual-weighted mean Gram matrix of the design (p x p).
    pub omega_hat: Matrix,
    /// Mean derivative of the second-stage estimating function in the
    /// first-stage coefficients (p x q).
    pub q1_hat: Matrix,
    /// First-stage sandwich (q x q).
    pub v_theta_hat: Matrix,
    /// Trial-to-historical sample-size ratio n / n_hist.
    pub kappa_hat: f64,
}

/// Computes the second-stage bread and meat matrices from the realized design
/// and residuals.
pub fn compute_q0_omega(design: &SecondStageDesign, residuals: &Vector) -> Result<(Matrix, Matrix)> {
    let n = design.design.rows();
    let p = design.design.cols();
    if residuals.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "{n} design rows, {} residuals",
            residuals.len()
        )));
    }
    let mut q0 = Matrix::zeros(p, p);
    let mut omega = Matrix::zeros(p, p);
    let inv_n = 1.0 / n as f64;
    for i in 0..n {
        let x = design.design.row(i);
        let r2 = residuals.get(i) * residuals.get(i);
        for a in 0..p {
            for b in 0..p {
                let g = x[a] * x[b];
                q0.set(a, b, q0.get(a, b) - inv_n * g);
                omega.set(a, b, omega.get(a, b) + inv_n * r2 * g);
            }
        }
    }
    Ok((q0, omega))
}

/// Analytic mean derivative of the second-stage estimating function with
/// respect to the first-stage coefficients, evaluated at the fitted values.
///
/// For each subject the estimating function is `(y - beta^T x) x` where the
/// design row `x` depends on theta through the score and, for the centered
/// variants, through the sample score mean. Its theta-derivative is
/// `-x (beta^T dx) + r dx` with `dx` the Jacobian of the design row: zero in
/// the intercept and treatment rows, the (possibly mean-corrected) covariate
/// vector in the score row, and its treatment multiple in the interaction row.
pub fn compute_q1(
    trial: &TrialDataset,
    beta_hat: &Vector,
    theta_hat: &Vector,
    spec: ModelSpec,
) -> Result<Matrix> {
    if beta_hat.len() != spec.param_count() {
        return Err(Error::DimensionMismatch(format!(
            "beta has {} entries, {spec} needs {}",
            beta_hat.len(),
            spec.param_count()
        )));
    }
    let design = second_stage_design(trial, theta_hat, spec)?;
    let n = trial.len();
    let q = trial.covariate_dim();
    let p = spec.param_count();
    let inv_n = 1.0 / n as f64;

    // Mean covariate vector; the derivative of the sample score mean.
    let mut w_bar = vec![0.0; q];
    if spec.is_centered() {
        for i in 0..n {
            for (acc, w) in w_bar.iter_mut().zip(trial.covariate_row(i)) {
                *acc += inv_n * w;
            }
        }
    }

    let beta2 = if spec == ModelSpec::Anhecova { beta_hat.get(3) } else { 0.0 };
    let mut q1 = Matrix::zeros(p, q);
    for i in 0..n {
        let x = design.design.row(i);
        let a = trial.treatment()[i] as f64;
        let y = trial.outcome().get(i);
        let mut r = y;
        for (b, xv) in beta_hat.as_slice().iter().zip(x) {
            r -= b * xv;
        }
        // beta^T dx collapses to a scalar multiple of the effective covariate
        // vector: (beta1 + beta2 * a) per subject.
        let slope = beta_hat.get(2) + beta2 * a;
        // Per-row weights on the effective covariate vector for each
        // estimating-equation coordinate.
        let mut coef = [0.0; 4];
        for (k, c) in coef.iter_mut().take(p).enumerate() {
            *c = -x[k] * slope;
        }
        coef[2] += r;
        if spec == ModelSpec::Anhecova {
            coef[3] += r * a;
        }
        let w = trial.covariate_row(i);
        for (k, c) in coef.iter().take(p).enumerate() {
            if *c == 0.0 {
                continue;
            }
            for j in 0..q {
                let w_eff = if spec.is_centered() { w[j] - w_bar[j] } else { w[j] };
                q1.set(k, j, q1.get(k, j) + inv_n * c * w_eff);
            }
        }
    }
    Ok(q1)
}

/// First-stage sandwich from the stored historical Gram blocks.
pub fn compute_v_theta(prog: &PrognosticFit) -> Result<Matrix> {
    let q2_inv = invert(&prog.q2_hat)?;
    let v = q2_inv
        .mat_mul(&prog.q3_hat)?
        .mat_mul(&q2_inv.transpose())?;
    Ok(v.symmetrized())
}

/// Assembles the two sandwich estimators from their components. Both are
/// symmetrized after assembly.
pub fn assemble(components: &SandwichComponents) -> Result<(Matrix, Matrix)> {
    if !components.kappa_hat.is_finite() || components.kappa_hat <= 0.0 {
        return Err(Error::InvalidConfig(format!(
            "sample-size ratio must be finite and positive, got {}",
            components.kappa_hat
        )));
    }
    let q0_inv = invert(&components.q0_hat)?;
    let v_fix = q0_inv
        .mat_mul(&components.omega_hat)?
        .mat_mul(&q0_inv.transpose())?
        .symmetrized();
    let b = q0_inv.mat_mul(&components.q1_hat)?;
    let addon = b
        .mat_mul(&components.v_theta_hat)?
        .mat_mul(&b.transpose())?
        .scale(components.kappa_hat);
    let v_est = v_fix.add(&addon)?.symmetrized();
    if !v_fix.is_finite() || !v_est.is_finite() {
        return Err(Error::NonFinite("sandwich estimate".into()));
    }
    Ok((v_fix, v_est))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::quadratic_form;

    fn design_of(matrix: Matrix, spec: ModelSpec) -> SecondStageDesign {
        let n = matrix.rows();
        SecondStageDesign {
            design: matrix,
            centering_offset: 0.0,
            score_column: Vector::zeros(n),
            spec,
        }
    }

    #[test]
    fn zero_residuals_zero_meat() {
        let d = design_of(
            Matrix::from_rows(&[vec![1.0, 1.0, 0.5], vec![1.0, 0.0, -0.5]]).unwrap(),
            ModelSpec::Ancova,
        );
        let (_, omega) = compute_q0_omega(&d, &Vector::zeros(2)).unwrap();
        assert_eq!(omega.max_abs(), 0.0);
    }

    #[test]
    fn scalar_bread_and_meat() {
        let d = design_of(Matrix::from_rows(&[vec![1.0], vec![1.0]]).unwrap(), ModelSpec::Ancova);
        let resid = Vector::new(vec![1.0, -1.0]).unwrap();
        let (q0, omega) = compute_q0_omega(&d, &resid).unwrap();
        assert!((q0.get(0, 0) + 1.0).abs() < 1e-15);
        assert!((omega.get(0, 0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn q0_omega_match_direct_summation() {
        // 10-row fixture, checked against an explicit elementwise sum.
        let rows: Vec<Vec<f64>> = (0..10)
            .map(|i| {
                let a = (i % 2) as f64;
                let s = 0.3 * i as f64 - 1.2;
                vec![1.0, a, s]
            })
            .collect();
        let d = design_of(Matrix::from_rows(&rows).unwrap(), ModelSpec::Ancova);
        let resid =
            Vector::new((0..10).map(|i| ((i * 7 + 3) % 5) as f64 * 0.25 - 0.5).collect()).unwrap();
        let (q0, omega) = compute_q0_omega(&d, &resid).unwrap();
        for a in 0..3 {
            for b in 0..3 {
                let mut sq0 = 0.0;
                let mut som = 0.0;
                for i in 0..10 {
                    let x = &rows[i];
                    sq0 -= x[a] * x[b] / 10.0;
                    som += resid.get(i) * resid.get(i) * x[a] * x[b] / 10.0;
                }
                assert!((q0.get(a, b) - sq0).abs() < 1e-12);
                assert!((omega.get(a, b) - som).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn q1_zero_rows_when_score_coefficient_zero() {
        // Outcome depends only on treatment: beta1 = 0, so rows 1-2 of Q1
        // vanish for the plain variant.
        let rows = vec![
            vec![1.0, 0.4],
            vec![1.0, -0.3],
            vec![1.0, 1.9],
            vec![1.0, 0.6],
        ];
        let treatment = vec![0u8, 1, 0, 1];
        let y: Vec<f64> = treatment.iter().map(|a| 2.0 + 1.5 * *a as f64).collect();
        let trial = TrialDataset::new(
            Matrix::from_rows(&rows).unwrap(),
            treatment,
            Vector::new(y).unwrap(),
        )
        .unwrap();
        let beta = Vector::new(vec![2.0, 1.5, 0.0]).unwrap();
        let theta = Vector::new(vec![0.0, 1.0]).unwrap();
        let q1 = compute_q1(&trial, &beta, &theta, ModelSpec::Ancova).unwrap();
        for j in 0..2 {
            assert!(q1.get(0, j).abs() < 1e-15);
            assert!(q1.get(1, j).abs() < 1e-15);
        }
    }

    #[test]
    fn v_theta_examples() {
        use crate::data::HistoricalDataset;
        use crate::estimate::fit_prognostic;

        // Zero residuals give a zero first-stage sandwich.
        let rows: Vec<Vec<f64>> = (0..6).map(|i| vec![1.0, i as f64]).collect();
        let y: Vec<f64> = rows.iter().map(|r| 2.0 * r[1] - 1.0).collect();
        let hist = HistoricalDataset::new(
            Matrix::from_rows(&rows).unwrap(),
            Vector::new(y).unwrap(),
        )
        .unwrap();
        let prog = fit_prognostic(&hist).unwrap();
        assert!(compute_v_theta(&prog).unwrap().max_abs() < 1e-18);

        // Intercept-only model: the sandwich collapses to the residual
        // second moment.
        let rows = vec![vec![1.0]; 8];
        let y: Vec<f64> = (0..8).map(|i| (i % 3) as f64).collect();
        let hist = HistoricalDataset::new(
            Matrix::from_rows(&rows).unwrap(),
            Vector::new(y.clone()).unwrap(),
        )
        .unwrap();
        let prog = fit_prognostic(&hist).unwrap();
        let mean = y.iter().sum::<f64>() / 8.0;
        let second_moment = y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / 8.0;
        let v = compute_v_theta(&prog).unwrap();
        assert!((v.get(0, 0) - second_moment).abs() < 1e-12);

        // 30-row two-covariate fixture against a direct evaluation of the
        // sandwich product with an independently inverted Gram block.
        let mut state = 5u64;
        let mut next = || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
        };
        let rows: Vec<Vec<f64>> = (0..30).map(|_| vec![1.0, 3.0 * next()]).collect();
        let y: Vec<f64> = rows.iter().map(|r| 0.4 + 1.7 * r[1] + 0.5 * next()).collect();
        let hist = HistoricalDataset::new(
            Matrix::from_rows(&rows).unwrap(),
            Vector::new(y.clone()).unwrap(),
        )
        .unwrap();
        let prog = fit_prognostic(&hist).unwrap();
        let v = compute_v_theta(&prog).unwrap();
        // Direct 2x2 inverse of q2 and explicit triple product.
        let (a, b, c, d) = (
            prog.q2_hat.get(0, 0),
            prog.q2_hat.get(0, 1),
            prog.q2_hat.get(1, 0),
            prog.q2_hat.get(1, 1),
        );
        let det = a * d - b * c;
        let inv = [[d / det, -b / det], [-c / det, a / det]];
        for i in 0..2 {
            for j in 0..2 {
                let mut expect = 0.0;
                for k in 0..2 {
                    for l in 0..2 {
                        expect += inv[i][k] * prog.q3_hat.get(k, l) * inv[j][l];
                    }
                }
                assert!((v.get(i, j) - expect).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn assemble_with_zero_q1_gives_equal_estimates() {
        let q0 = Matrix::from_rows(&[vec![-1.0, -0.5], vec![-0.5, -1.0]]).unwrap();
        let omega = Matrix::from_rows(&[vec![0.8, 0.1], vec![0.1, 0.6]]).unwrap();
        let c = SandwichComponents {
            q0_hat: q0,
            omega_hat: omega,
            q1_hat: Matrix::zeros(2, 3),
            v_theta_hat: Matrix::identity(3),
            kappa_hat: 0.5,
        };
        let (v_fix, v_est) = assemble(&c).unwrap();
        assert!(v_est.sub(&v_fix).unwrap().max_abs() == 0.0);
    }

    #[test]
    fn addon_linear_in_kappa() {
        let q0 = Matrix::from_rows(&[vec![-1.0, -0.2], vec![-0.2, -0.9]]).unwrap();
        let omega = Matrix::from_rows(&[vec![0.8, 0.1], vec![0.1, 0.6]]).unwrap();
        let q1 = Matrix::from_rows(&[vec![0.3, -0.1], vec![0.2, 0.4]]).unwrap();
        let v_theta = Matrix::from_rows(&[vec![1.1, 0.3], vec![0.3, 0.7]]).unwrap();
        let base = SandwichComponents {
            q0_hat: q0.clone(),
            omega_hat: omega.clone(),
            q1_hat: q1.clone(),
            v_theta_hat: v_theta.clone(),
            kappa_hat: 0.25,
        };
        let doubled = SandwichComponents { kappa_hat: 0.5, ..base.clone() };
        let (v_fix_a, v_est_a) = assemble(&base).unwrap();
        let (v_fix_b, v_est_b) = assemble(&doubled).unwrap();
        let add_a = v_est_a.sub(&v_fix_a).unwrap();
        let add_b = v_est_b.sub(&v_fix_b).unwrap();
        let diff = add_b.sub(&add_a.scale(2.0)).unwrap().max_abs();
        assert!(diff < 1e-14, "add-on not linear in kappa: {diff}");
    }

    #[test]
    fn addon_nonnegative_over_random_contrasts() {
        let q0 = Matrix::from_rows(&[vec![-1.0, -0.2], vec![-0.2, -0.9]]).unwrap();
        let omega = Matrix::from_rows(&[vec![0.8, 0.1], vec![0.1, 0.6]]).unwrap();
        let q1 = Matrix::from_rows(&[vec![0.3, -0.1], vec![0.2, 0.4]]).unwrap();
        // PSD v_theta built as L L^T.
        let l = Matrix::from_rows(&[vec![0.9, 0.0], vec![0.4, 1.2]]).unwrap();
        let v_theta = l.mat_mul(&l.transpose()).unwrap();
        let c = SandwichComponents {
            q0_hat: q0,
            omega_hat: omega,
            q1_hat: q1,
            v_theta_hat: v_theta,
            kappa_hat: 0.7,
        };
        let (v_fix, v_est) = assemble(&c).unwrap();
        let mut state = 42u64;
        let mut next = || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
        };
        for _ in 0..1000 {
            let e = Vector::new(vec![next(), next()]).unwrap();
            let qf_fix = quadratic_form(&e, &v_fix).unwrap();
            let qf_est = quadratic_form(&e, &v_est).unwrap();
            assert!(qf_est >= qf_fix - 1e-12);
        }
    }
}
