//! Scenario simulation engine: replication runs, coverage and
//! variance-ratio metrics.

pub mod dgp;
pub mod targets;

use crate::error::{Error, Result};
use crate::estimate::{fit_procova, fit_prognostic};
use crate::inference::summarize;
use crate::model::ModelSpec;
use crate::numeric::{quadratic_form, Vector};
use serde::{Deserialize, Serialize};

pub use dgp::{generate_pair, OutcomeModel, ShiftPattern, RNG_ALGORITHM};
pub use targets::{coefficient_targets, scenario_targets, true_ate};

/// One simulation scenario: outcome model, covariate-shift pattern, sample
/// sizes, replication count and seed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub outcome_model: OutcomeModel,
    pub shift_pattern: ShiftPattern,
    pub n_trial: usize,
    pub n_hist: usize,
    pub replications: usize,
    pub seed: u64,
    pub spec: ModelSpec,
    pub level: f64,
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::InvalidConfig("replications must be >= 1".into()));
        }
        if self.n_trial == 0 || self.n_hist == 0 {
            return Err(Error::InvalidConfig("sample sizes must be positive".into()));
        }
        if !(0.0 < self.level && self.level < 1.0) {
            return Err(Error::InvalidProbability(self.level));
        }
        Ok(())
    }

    /// Historical covariate shifts (b, c) implied by the pattern.
    pub fn shifts(&self) -> (f64, f64) {
        self.shift_pattern.shifts()
    }
}

/// Aggregated metrics for one coefficient across replications.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoefficientMetrics {
    pub label: String,
    pub true_value: f64,
    /// Fraction of completed replications whose CI under the known-score
    /// variance covers the true value.
    pub coverage_fix: f64,
    /// Same under the estimation-aware variance.
    pub coverage_est: f64,
    /// Mean over replications of the variance-estimator ratio for this
    /// coefficient's contrast.
    pub mean_variance_ratio: f64,
    pub mean_estimate: f64,
}

/// Result of a replication sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReplicationMetrics {
    pub coefficients: Vec<CoefficientMetrics>,
    pub replications_completed: usize,
    pub replications_failed: usize,
}

struct RepRecord {
    estimates: Vec<f64>,
    hits_fix: Vec<bool>,
    hits_est: Vec<bool>,
    ratios: Vec<f64>,
}

fn run_one(config: &ScenarioConfig, rep_index: usize, targets: &[(String, f64)]) -> Result<RepRecord> {
    let (trial, historical) = generate_pair(
        config.outcome_model,
        config.shift_pattern,
        config.n_trial,
        config.n_hist,
        config.seed,
        rep_index,
    )?;
    let prog = fit_prognostic(&historical)?;
    let fit = fit_procova(&trial, &prog, config.spec)?;
    let rows = summarize(&fit, config.level)?;

    let mut estimates = Vec::with_capacity(targets.len());
    let mut hits_fix = Vec::with_capacity(targets.len());
    let mut hits_est = Vec::with_capacity(targets.len());
    let mut ratios = Vec::with_capacity(targets.len());
    for (label, truth) in targets {
        let row = rows
            .iter()
            .find(|r| &r.coefficient_label == label)
            .ok_or_else(|| Error::InvalidConfig(format!("missing coefficient {label}")))?;
        estimates.push(row.estimate);
        hits_fix.push(row.ci_fix.0 <= *truth && *truth <= row.ci_fix.1);
        hits_est.push(row.ci_est.0 <= *truth && *truth <= row.ci_est.1);
        // Variance ratio straight from the quadratic forms; summarize
        // already floor-clamped the variances at zero.
        let e = contrast_for(config.spec, label)?;
        let qf_fix = quadratic_form(&e, &fit.v_fix)?;
        let qf_est = quadratic_form(&e, &fit.v_est)?;
        ratios.push(qf_est / qf_fix);
    }
    Ok(RepRecord { estimates, hits_fix, hits_est, ratios })
}

fn contrast_for(spec: ModelSpec, label: &str) -> Result<Vector> {
    let p = spec.param_count();
    let mut e = vec![0.0; p];
    let indices: &[usize] = match label {
        "beta0" => &[0],
        "betaA" => &[1],
        "beta1" => &[2],
        "beta2" => &[3],
        "beta0+betaA" => &[0, 1],
        other => return Err(Error::InvalidConfig(format!("unknown coefficient {other}"))),
    };
    for &i in indices {
        if i >= p {
            return Err(Error::InvalidConfig(format!("{label} not present under {spec}")));
        }
        e[i] = 1.0;
    }
    Ok(Vector::from(e))
}

/// Runs the configured number of replications, fanning them over `threads`
/// workers. Replications draw from index-derived streams and the final
/// reduction walks records in index order, so the metrics do not depend on
/// the thread count.
pub fn run_replications(config: &ScenarioConfig, threads: usize) -> Result<ReplicationMetrics> {
    config.validate()?;
    let targets: Vec<(String, f64)> =
        coefficient_targets(config.outcome_model, config.shift_pattern, config.spec)
            .into_iter()
            .collect();

    let reps = config.replications;
    let mut records: Vec<Option<RepRecord>> = Vec::with_capacity(reps);
    records.resize_with(reps, || None);
    let workers = threads.max(1).min(reps);

    if workers == 1 {
        for (i, slot) in records.iter_mut().enumerate() {
            *slot = run_one(config, i, &targets).ok();
        }
    } else {
        let chunk = reps.div_ceil(workers);
        std::thread::scope(|scope| {
            for (w, slice) in records.chunks_mut(chunk).enumerate() {
                let targets = &targets;
                scope.spawn(move || {
                    let base = w * chunk;
                    for (off, slot) in slice.iter_mut().enumerate() {
                        *slot = run_one(config, base + off, targets).ok();
                    }
                });
            }
        });
    }

    let completed = records.iter().flatten().count();
    if completed == 0 {
        return Err(Error::AllReplicationsFailed(reps));
    }
    let failed = reps - completed;

    let k = targets.len();
    let mut sum_est = vec![0.0; k];
    let mut sum_ratio = vec![0.0; k];
    let mut hits_fix = vec![0usize; k];
    let mut hits_est = vec![0usize; k];
    for rec in records.iter().flatten() {
        for j in 0..k {
            sum_est[j] += rec.estimates[j];
            sum_ratio[j] += rec.ratios[j];
            hits_fix[j] += rec.hits_fix[j] as usize;
            hits_est[j] += rec.hits_est[j] as usize;
        }
    }

    let coefficients = targets
        .iter()
        .enumerate()
        .map(|(j, (label, truth))| CoefficientMetrics {
            label: label.clone(),
            true_value: *truth,
            coverage_fix: hits_fix[j] as f64 / completed as f64,
            coverage_est: hits_est[j] as f64 / completed as f64,
            mean_variance_ratio: sum_ratio[j] / completed as f64,
            mean_estimate: sum_est[j] / completed as f64,
        })
        .collect();

    Ok(ReplicationMetrics {
        coefficients,
        replications_completed: completed,
        replications_failed: failed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(model: OutcomeModel, shift: u8, n: usize, n_hist: usize, reps: usize) -> ScenarioConfig {
        ScenarioConfig {
            outcome_model: model,
            shift_pattern: ShiftPattern::new(shift).unwrap(),
            n_trial: n,
            n_hist,
            replications: reps,
            seed: 20_240_601,
            spec: ModelSpec::Ancova,
            level: 0.95,
        }
    }

    #[test]
    fn single_replication_coverage_is_zero_or_one() {
        let metrics = run_replications(&config(OutcomeModel::A, 1, 200, 400, 1), 1).unwrap();
        assert_eq!(metrics.replications_completed, 1);
        for c in &metrics.coefficients {
            assert!(c.coverage_fix == 0.0 || c.coverage_fix == 1.0);
            assert!(c.coverage_est == 0.0 || c.coverage_est == 1.0);
            assert!(c.mean_variance_ratio >= 1.0 - 1e-12);
        }
    }

    #[test]
    fn thread_counts_agree_exactly() {
        let cfg = config(OutcomeModel::D, 5, 60, 120, 24);
        let a = run_replications(&cfg, 1).unwrap();
        let b = run_replications(&cfg, 8).unwrap();
        assert_eq!(a.replications_completed, b.replications_completed);
        for (x, y) in a.coefficients.iter().zip(&b.coefficients) {
            assert_eq!(x.coverage_fix, y.coverage_fix);
            assert_eq!(x.coverage_est, y.coverage_est);
            assert_eq!(x.mean_variance_ratio, y.mean_variance_ratio);
            assert_eq!(x.mean_estimate, y.mean_estimate);
        }
    }

    #[test]
    fn ratio_bound_holds_replication_wise() {
        let cfg = config(OutcomeModel::B, 3, 80, 40, 20);
        for spec in [ModelSpec::Ancova, ModelSpec::AncovaCentered, ModelSpec::Anhecova] {
            let cfg = ScenarioConfig { spec, ..cfg.clone() };
            let targets: Vec<(String, f64)> =
                coefficient_targets(cfg.outcome_model, cfg.shift_pattern, cfg.spec);
            for rep in 0..cfg.replications {
                if let Ok(rec) = run_one(&cfg, rep, &targets) {
                    for r in rec.ratios {
                        assert!(r >= 1.0 - 1e-12, "{spec}: ratio {r}");
                    }
                }
            }
        }
    }

    #[test]
    fn tiny_historical_sample_counts_failures() {
        // n_hist = 9 cannot identify 8 coefficients.
        let metrics = run_replications(&config(OutcomeModel::A, 1, 30, 8, 5), 1);
        assert!(matches!(metrics, Err(Error::AllReplicationsFailed(5))));
    }
}
