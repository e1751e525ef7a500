//! Self-validation suite: exact population identities and the empirical
//! finite-difference gate.
//!
//! The suite runs three kinds of checks. The population checks enumerate a
//! randomized family of small discrete populations and verify, by exact
//! sums, that the protected contrasts of the two variance estimators
//! coincide (orthogonality), that the estimating-function mean vanishes at
//! the population coefficients, and that the coefficient map's derivative in
//! the first-stage coefficients equals the negated bread-inverse times the
//! nuisance cross-derivative. The empirical gate checks the analytic
//! cross-derivative matrix against a central finite difference of the
//! estimating-function mean on simulated datasets; that finite difference is
//! the binding definition of the matrix. A final ordering check verifies the
//! estimation-aware sandwich dominates the known-score one over random
//! contrasts on every fitted dataset.

use crate::error::{Error, Result};
use crate::estimate::{fit_procova, fit_prognostic};
use crate::model::{second_stage_design, ModelSpec};
use crate::numeric::{quadratic_form, Matrix, Vector};
use crate::oracle::{
    beta_star_derivative_check, orthogonality_check, population_moments, psi_mean,
    DiscretePopulation,
};
use crate::sim::{generate_pair, OutcomeModel, ShiftPattern};
use crate::variance::compute_q1;
use crate::data::TrialDataset;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Tolerances for the validation suite.
#[derive(Debug, Clone)]
pub struct ToleranceProfile {
    pub name: &'static str,
    /// Exact orthogonality identities.
    pub orthogonality: f64,
    /// Derivative identity (finite difference of the population coefficients).
    pub derivative: f64,
    /// Estimating-function mean at the population coefficients.
    pub psi_zero: f64,
    /// Empirical cross-derivative vs central finite difference.
    pub q1_gate: f64,
    /// Allowed slack in the variance-ordering inequality.
    pub ordering_slack: f64,
}

impl ToleranceProfile {
    pub fn default_profile() -> Self {
        Self {
            name: "default",
            orthogonality: 1e-10,
            derivative: 1e-5,
            psi_zero: 1e-12,
            q1_gate: 1e-4,
            ordering_slack: 1e-12,
        }
    }

    /// Every tolerance halved.
    pub fn strict() -> Self {
        let d = Self::default_profile();
        Self {
            name: "strict",
            orthogonality: d.orthogonality / 2.0,
            derivative: d.derivative / 2.0,
            psi_zero: d.psi_zero / 2.0,
            q1_gate: d.q1_gate / 2.0,
            ordering_slack: d.ordering_slack / 2.0,
        }
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "default" => Ok(Self::default_profile()),
            "strict" => Ok(Self::strict()),
            other => Err(Error::InvalidConfig(format!(
                "unknown tolerance profile {other:?}"
            ))),
        }
    }
}

/// One named check with its worst observed discrepancy.
#[derive(Debug, Clone)]
pub struct CheckOutcome {
    pub name: String,
    pub max_discrepancy: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl CheckOutcome {
    fn new(name: &str, max_discrepancy: f64, tolerance: f64) -> Self {
        Self {
            name: name.to_string(),
            max_discrepancy,
            tolerance,
            passed: max_discrepancy <= tolerance,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CheckReport {
    pub outcomes: Vec<CheckOutcome>,
}

impl CheckReport {
    pub fn all_passed(&self) -> bool {
        self.outcomes.iter().all(|o| o.passed)
    }
}

/// Randomized family of small discrete populations used by the exact checks:
/// supports of size 3..=8, covariate dimension 2..=4 (intercept first),
/// assignment probability in [0.1, 0.9], arbitrary bounded outcome means.
pub fn population_family(count: usize, seed: u64) -> Vec<(DiscretePopulation, Vector)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut family = Vec::with_capacity(count);
    while family.len() < count {
        let dim = rng.gen_range(2..=4usize);
        let size = rng.gen_range(3..=8usize);
        let mut support = Vec::with_capacity(size);
        let mut raw: Vec<f64> = (0..size).map(|_| rng.gen_range(0.05..1.0)).collect();
        let total: f64 = raw.iter().sum();
        raw.iter_mut().for_each(|p| *p /= total);
        // Nudge the last weight so the sum is exactly one.
        let adjust: f64 = 1.0 - raw.iter().take(size - 1).sum::<f64>();
        raw[size - 1] = adjust;
        for p in &raw {
            let mut w = vec![1.0];
            for _ in 1..dim {
                w.push(rng.gen_range(-2.0..2.0));
            }
            support.push((Vector::new(w).expect("finite"), *p));
        }
        let outcome_mean = (0..size)
            .map(|_| [rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)])
            .collect();
        let pi = rng.gen_range(0.1..0.9);
        let variance = rng.gen_range(0.25..4.0);
        let pop = match DiscretePopulation::new(support, pi, outcome_mean, variance) {
            Ok(pop) => pop,
            Err(_) => continue,
        };
        let theta = Vector::new((0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .expect("finite");
        // Reject degenerate score directions.
        if population_moments(&pop, &theta, ModelSpec::Ancova).is_ok() {
            family.push((pop, theta));
        }
    }
    family
}

/// Mean of the second-stage estimating function over the trial sample at an
/// arbitrary (beta, theta). The design is rebuilt at the given theta, so for
/// the centered variants the sample score mean moves with theta; this is
/// exactly the map the finite-difference gate differentiates.
pub fn empirical_estimating_mean(
    trial: &TrialDataset,
    beta: &Vector,
    theta: &Vector,
    spec: ModelSpec,
) -> Result<Vector> {
    let design = second_stage_design(trial, theta, spec)?;
    let n = trial.len();
    let p = spec.param_count();
    let mut acc = vec![0.0; p];
    for i in 0..n {
        let x = design.design.row(i);
        let mut r = trial.outcome().get(i);
        for (b, xv) in beta.as_slice().iter().zip(x) {
            r -= b * xv;
        }
        for (a, xv) in acc.iter_mut().zip(x) {
            *a += r * xv / n as f64;
        }
    }
    Vector::new(acc)
}

/// Central finite difference of the estimating-function mean in theta, with
/// per-coordinate step `1e-5 * max(1, |theta_j|)`.
pub fn q1_finite_difference(
    trial: &TrialDataset,
    beta: &Vector,
    theta: &Vector,
    spec: ModelSpec,
) -> Result<Matrix> {
    let p = spec.param_count();
    let q = theta.len();
    let mut out = Matrix::zeros(p, q);
    for j in 0..q {
        let h = 1e-5 * theta.get(j).abs().max(1.0);
        let mut up = theta.as_slice().to_vec();
        let mut dn = up.clone();
        up[j] += h;
        dn[j] -= h;
        let psi_up = empirical_estimating_mean(trial, beta, &Vector::from(up), spec)?;
        let psi_dn = empirical_estimating_mean(trial, beta, &Vector::from(dn), spec)?;
        for i in 0..p {
            out.set(i, j, (psi_up.get(i) - psi_dn.get(i)) / (2.0 * h));
        }
    }
    Ok(out)
}

const POPULATION_COUNT: usize = 20;
const POPULATION_SEED: u64 = 0x0bad_5eed;
const GATE_DATASETS: usize = 50;
const GATE_N_TRIAL: usize = 200;
const GATE_N_HIST: usize = 300;
const GATE_SEED: u64 = 0x51ab_0042;
const ORDERING_CONTRASTS: usize = 1000;

const ANCOVA_TREATMENT: [f64; 3] = [0.0, 1.0, 0.0];
const ANHECOVA_CONTRASTS: [[f64; 4]; 3] = [
    [0.0, 1.0, 0.0, 0.0],
    [1.0, 0.0, 0.0, 0.0],
    [1.0, 1.0, 0.0, 0.0],
];
const CENTERED_CONTRASTS: [[f64; 3]; 3] = [
    [0.0, 1.0, 0.0],
    [1.0, 0.0, 0.0],
    [1.0, 1.0, 0.0],
];

/// Runs the whole suite. `q1_perturbation` is a fault-injection hook: it is
/// added to one entry of the analytic cross-derivative before the gate
/// comparison, so a nonzero value must make the gate fail.
pub fn run_checks(profile: &ToleranceProfile, q1_perturbation: f64) -> Result<CheckReport> {
    let family = population_family(POPULATION_COUNT, POPULATION_SEED);
    let mut outcomes = Vec::new();

    // Orthogonality of the protected contrasts, exact populations.
    let mut worst = 0.0f64;
    for (pop, theta) in &family {
        let e = Vector::new(ANCOVA_TREATMENT.to_vec())?;
        worst = worst.max(orthogonality_check(pop, theta, ModelSpec::Ancova, &e)?);
    }
    outcomes.push(CheckOutcome::new(
        "orthogonality: plain variant, treatment contrast",
        worst,
        profile.orthogonality,
    ));

    let mut worst = 0.0f64;
    for (pop, theta) in &family {
        for e in ANHECOVA_CONTRASTS {
            let e = Vector::new(e.to_vec())?;
            worst = worst.max(orthogonality_check(pop, theta, ModelSpec::Anhecova, &e)?);
        }
    }
    outcomes.push(CheckOutcome::new(
        "orthogonality: interaction variant, protected contrasts",
        worst,
        profile.orthogonality,
    ));

    let mut worst = 0.0f64;
    for (pop, theta) in &family {
        for e in CENTERED_CONTRASTS {
            let e = Vector::new(e.to_vec())?;
            worst = worst.max(orthogonality_check(pop, theta, ModelSpec::AncovaCentered, &e)?);
        }
    }
    outcomes.push(CheckOutcome::new(
        "orthogonality: centered variant, protected contrasts",
        worst,
        profile.orthogonality,
    ));

    // Estimating-function mean vanishes at the population coefficients.
    let mut worst = 0.0f64;
    for (pop, theta) in &family {
        for spec in [ModelSpec::Ancova, ModelSpec::AncovaCentered, ModelSpec::Anhecova] {
            let m = population_moments(pop, theta, spec)?;
            let psi = psi_mean(pop, theta, spec, &m.beta_star)?;
            worst = worst.max(psi.as_slice().iter().fold(0.0f64, |a, x| a.max(x.abs())));
        }
    }
    outcomes.push(CheckOutcome::new(
        "population estimating-function mean at the solution",
        worst,
        profile.psi_zero,
    ));

    // Derivative identity.
    let mut worst = 0.0f64;
    for (pop, theta) in &family {
        for spec in [ModelSpec::Ancova, ModelSpec::AncovaCentered, ModelSpec::Anhecova] {
            worst = worst.max(beta_star_derivative_check(pop, theta, spec)?);
        }
    }
    outcomes.push(CheckOutcome::new(
        "coefficient derivative identity",
        worst,
        profile.derivative,
    ));

    // Finite-difference gate and variance ordering on simulated fits.
    let mut gate_worst = 0.0f64;
    let mut ordering_worst = 0.0f64;
    let mut contrast_rng = ChaCha8Rng::seed_from_u64(GATE_SEED ^ 0xffff);
    for d in 0..GATE_DATASETS {
        let model = OutcomeModel::ALL[d % 4];
        let shift = ShiftPattern::ALL[d % 9];
        let (trial, historical) =
            generate_pair(model, shift, GATE_N_TRIAL, GATE_N_HIST, GATE_SEED, d)?;
        let prog = fit_prognostic(&historical)?;
        for spec in [ModelSpec::Ancova, ModelSpec::AncovaCentered, ModelSpec::Anhecova] {
            let fit = fit_procova(&trial, &prog, spec)?;
            let mut analytic = compute_q1(&trial, &fit.beta_hat, &prog.theta_hat, spec)?;
            if q1_perturbation != 0.0 {
                analytic.set(0, 0, analytic.get(0, 0) + q1_perturbation);
            }
            let fd = q1_finite_difference(&trial, &fit.beta_hat, &prog.theta_hat, spec)?;
            gate_worst = gate_worst.max(analytic.sub(&fd)?.max_abs());

            let p = spec.param_count();
            for _ in 0..ORDERING_CONTRASTS / GATE_DATASETS {
                let e = Vector::new(
                    (0..p).map(|_| contrast_rng.gen_range(-1.0..1.0)).collect(),
                )?;
                let gap = quadratic_form(&e, &fit.v_est)? - quadratic_form(&e, &fit.v_fix)?;
                ordering_worst = ordering_worst.max(-gap);
            }
        }
    }
    outcomes.push(CheckOutcome::new(
        "cross-derivative finite-difference gate",
        gate_worst,
        profile.q1_gate,
    ));
    outcomes.push(CheckOutcome::new(
        "variance-estimator ordering over random contrasts",
        ordering_worst,
        profile.ordering_slack,
    ));

    Ok(CheckReport { outcomes })
}
