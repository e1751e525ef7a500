//! Exact population calculator over a finite discrete covariate support.
//!
//! Replaces Monte Carlo noise with exact sums: every expectation is a finite
//! weighted sum over (covariate point, arm), with the outcome entering only
//! through its conditional mean and variance. Used to verify the
//! orthogonality identities (the treatment contrast of the bread-inverse
//! times the nuisance cross-derivative vanishes) and the derivative identity
//! linking the population coefficient map to those matrices, without any
//! sampling error.
//!
//! Unlike the estimation path, the centered variants here center the score at
//! its population mean; that is the form in which the identities are stated.

use crate::error::{Error, Result};
use crate::model::ModelSpec;
use crate::numeric::{invert, Matrix, Vector};

/// Finite joint distribution: covariate support with probabilities, an
/// independent Bernoulli treatment, and conditional outcome moments.
#[derive(Debug, Clone)]
pub struct DiscretePopulation {
    support: Vec<(Vector, f64)>,
    pi: f64,
    /// Conditional outcome mean per support point: `[m(0, w), m(1, w)]`.
    outcome_mean: Vec<[f64; 2]>,
    outcome_variance: f64,
}

/// Exact population moments for a given first-stage coefficient vector.
#[derive(Debug, Clone)]
pub struct PopulationMoments {
    /// Negated design Gram expectation (p x p).
    pub q0: Matrix,
    /// Expectation of the estimating function's theta-derivative (p x q).
    pub q1: Matrix,
    /// Population regression coefficients beta*(theta).
    pub beta_star: Vector,
}

impl DiscretePopulation {
    pub fn new(
        support: Vec<(Vector, f64)>,
        pi: f64,
        outcome_mean: Vec<[f64; 2]>,
        outcome_variance: f64,
    ) -> Result<Self> {
        if support.is_empty() {
            return Err(Error::EmptyData("population support is empty".into()));
        }
        if !(0.0 < pi && pi < 1.0) {
            return Err(Error::InvalidProbability(pi));
        }
        if outcome_mean.len() != support.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} support points, {} outcome means",
                support.len(),
                outcome_mean.len()
            )));
        }
        let dim = support[0].0.len();
        if support.iter().any(|(w, _)| w.len() != dim) {
            return Err(Error::DimensionMismatch("ragged covariate support".into()));
        }
        let total: f64 = support.iter().map(|(_, p)| p).sum();
        if (total - 1.0).abs() > 1e-14 {
            return Err(Error::InvalidConfig(format!(
                "support probabilities sum to {total}, not 1"
            )));
        }
        if support.iter().any(|(_, p)| *p < 0.0) {
            return Err(Error::InvalidConfig("negative support probability".into()));
        }
        if !outcome_variance.is_finite() || outcome_variance < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "outcome variance {outcome_variance} invalid"
            )));
        }
        if outcome_mean.iter().flatten().any(|m| !m.is_finite()) {
            return Err(Error::NonFinite("outcome mean table".into()));
        }
        Ok(Self { support, pi, outcome_mean, outcome_variance })
    }

    pub fn covariate_dim(&self) -> usize {
        self.support[0].0.len()
    }

    pub fn pi(&self) -> f64 {
        self.pi
    }

    /// Conditional outcome variance. The identity checks depend only on
    /// conditional means, so this enters none of them; it completes the
    /// population description for callers that build their own moments.
    pub fn outcome_variance(&self) -> f64 {
        self.outcome_variance
    }

    fn mean_covariates(&self) -> Vec<f64> {
        let q = self.covariate_dim();
        let mut out = vec![0.0; q];
        for (w, p) in &self.support {
            for (acc, wj) in out.iter_mut().zip(w.as_slice()) {
                *acc += p * wj;
            }
        }
        out
    }

    fn scores(&self, theta: &Vector) -> Result<Vec<f64>> {
        if theta.len() != self.covariate_dim() {
            return Err(Error::DimensionMismatch(format!(
                "theta has {} entries, support has dimension {}",
                theta.len(),
                self.covariate_dim()
            )));
        }
        Ok(self
            .support
            .iter()
            .map(|(w, _)| theta.dot(w).expect("dimension checked"))
            .collect())
    }

    fn check_score_variance(&self, scores: &[f64]) -> Result<()> {
        let mean: f64 = scores
            .iter()
            .zip(&self.support)
            .map(|(s, (_, p))| p * s)
            .sum();
        let mut var = 0.0;
        let mut scale = 1.0f64;
        for (s, (_, p)) in scores.iter().zip(&self.support) {
            var += p * (s - mean) * (s - mean);
            scale = scale.max(s * s);
        }
        if var <= 1e-12 * scale {
            return Err(Error::DegenerateScore);
        }
        Ok(())
    }
}

fn design_row(spec: ModelSpec, a: f64, centered_score: f64) -> Vec<f64> {
    match spec {
        ModelSpec::Ancova | ModelSpec::AncovaCentered => vec![1.0, a, centered_score],
        ModelSpec::Anhecova => vec![1.0, a, centered_score, a * centered_score],
    }
}

/// Exact Q0, Q1 and beta*(theta) by enumeration over the support.
pub fn population_moments(
    pop: &DiscretePopulation,
    theta: &Vector,
    spec: ModelSpec,
) -> Result<PopulationMoments> {
    let scores = pop.scores(theta)?;
    pop.check_score_variance(&scores)?;
    let p = spec.param_count();
    let q = pop.covariate_dim();
    let mean_score: f64 = scores
        .iter()
        .zip(&pop.support)
        .map(|(s, (_, pw))| pw * s)
        .sum();
    let offset = if spec.is_centered() { mean_score } else { 0.0 };
    let mean_w = pop.mean_covariates();

    let mut exx = Matrix::zeros(p, p);
    let mut exy = vec![0.0; p];
    for (k, (_, pw)) in pop.support.iter().enumerate() {
        for (a_idx, pa) in [1.0 - pop.pi, pop.pi].iter().enumerate() {
            let weight = pw * pa;
            let x = design_row(spec, a_idx as f64, scores[k] - offset);
            let m = pop.outcome_mean[k][a_idx];
            for i in 0..p {
                exy[i] += weight * x[i] * m;
                for j in 0..p {
                    exx.set(i, j, exx.get(i, j) + weight * x[i] * x[j]);
                }
            }
        }
    }

    let exx_inv = invert(&exx).map_err(|_| Error::DegenerateScore)?;
    let beta_star = exx_inv.mat_vec(&Vector::from(exy))?;
    let q0 = exx.scale(-1.0);

    let beta2 = if spec == ModelSpec::Anhecova { beta_star.get(3) } else { 0.0 };
    let mut q1 = Matrix::zeros(p, q);
    for (k, (w, pw)) in pop.support.iter().enumerate() {
        for (a_idx, pa) in [1.0 - pop.pi, pop.pi].iter().enumerate() {
            let weight = pw * pa;
            let a = a_idx as f64;
            let x = design_row(spec, a, scores[k] - offset);
            let m = pop.outcome_mean[k][a_idx];
            let resid_mean = m - beta_star
                .as_slice()
                .iter()
                .zip(&x)
                .map(|(b, xv)| b * xv)
                .sum::<f64>();
            let slope = beta_star.get(2) + beta2 * a;
            let mut coef = [0.0; 4];
            for (i, c) in coef.iter_mut().take(p).enumerate() {
                *c = -x[i] * slope;
            }
            coef[2] += resid_mean;
            if spec == ModelSpec::Anhecova {
                coef[3] += resid_mean * a;
            }
            for (i, c) in coef.iter().take(p).enumerate() {
                if *c == 0.0 {
                    continue;
                }
                for j in 0..q {
                    let w_eff = if spec.is_centered() {
                        w.get(j) - mean_w[j]
                    } else {
                        w.get(j)
                    };
                    q1.set(i, j, q1.get(i, j) + weight * c * w_eff);
                }
            }
        }
    }

    Ok(PopulationMoments { q0, q1, beta_star })
}

/// Population mean of the estimating function at an arbitrary beta: exactly
/// `E[X Y] - E[X X^T] beta` as a finite sum. Zero (to rounding) at beta*.
pub fn psi_mean(
    pop: &DiscretePopulation,
    theta: &Vector,
    spec: ModelSpec,
    beta: &Vector,
) -> Result<Vector> {
    let scores = pop.scores(theta)?;
    let p = spec.param_count();
    if beta.len() != p {
        return Err(Error::DimensionMismatch(format!(
            "beta has {} entries, {spec} needs {p}",
            beta.len()
        )));
    }
    let mean_score: f64 = scores
        .iter()
        .zip(&pop.support)
        .map(|(s, (_, pw))| pw * s)
        .sum();
    let offset = if spec.is_centered() { mean_score } else { 0.0 };
    let mut acc = vec![0.0; p];
    for (k, (_, pw)) in pop.support.iter().enumerate() {
        for (a_idx, pa) in [1.0 - pop.pi, pop.pi].iter().enumerate() {
            let weight = pw * pa;
            let x = design_row(spec, a_idx as f64, scores[k] - offset);
            let resid_mean = pop.outcome_mean[k][a_idx]
                - beta.as_slice().iter().zip(&x).map(|(b, xv)| b * xv).sum::<f64>();
            for i in 0..p {
                acc[i] += weight * resid_mean * x[i];
            }
        }
    }
    Vector::new(acc)
}

/// Max absolute entry of `e^T Q0^-1 Q1`; the orthogonality identities say
/// this is zero for the protected contrasts.
pub fn orthogonality_check(
    pop: &DiscretePopulation,
    theta: &Vector,
    spec: ModelSpec,
    e: &Vector,
) -> Result<f64> {
    let m = population_moments(pop, theta, spec)?;
    let q0_inv = invert(&m.q0)?;
    let row = q0_inv.transpose().mat_vec(e)?; // Q0^-T e, so row^T Q1 = e^T Q0^-1 Q1
    let v = m.q1.transpose().mat_vec(&row)?;
    Ok(v.as_slice().iter().fold(0.0f64, |acc, x| acc.max(x.abs())))
}

/// Max entrywise gap between the central finite difference of beta*(theta)
/// and `-Q0^-1 Q1`.
pub fn beta_star_derivative_check(
    pop: &DiscretePopulation,
    theta: &Vector,
    spec: ModelSpec,
) -> Result<f64> {
    const STEP: f64 = 1e-6;
    let m = population_moments(pop, theta, spec)?;
    let q0_inv = invert(&m.q0)?;
    let grad = q0_inv.mat_mul(&m.q1)?.scale(-1.0);

    let p = spec.param_count();
    let q = theta.len();
    let mut worst = 0.0f64;
    for j in 0..q {
        let mut up = theta.as_slice().to_vec();
        let mut dn = up.clone();
        up[j] += STEP;
        dn[j] -= STEP;
        let beta_up = population_moments(pop, &Vector::from(up), spec)?.beta_star;
        let beta_dn = population_moments(pop, &Vector::from(dn), spec)?.beta_star;
        for i in 0..p {
            let fd = (beta_up.get(i) - beta_dn.get(i)) / (2.0 * STEP);
            worst = worst.max((fd - grad.get(i, j)).abs());
        }
    }
    Ok(worst)
}
