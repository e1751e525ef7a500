//! CSV ingestion with schema validation and the machine-readable reports.

use procova_core::sim::{ReplicationMetrics, ScenarioConfig, RNG_ALGORITHM};
use procova_core::{
    HistoricalDataset, InferenceResult, Matrix, ModelSpec, ProcovaFit, TrialDataset, Vector,
};
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Schema violation carrying the offending column/row for the error message.
#[derive(Debug)]
pub struct SchemaError(pub String);

impl std::fmt::Display for SchemaError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for SchemaError {}

fn parse_cell(raw: &str, column: &str, row: usize, path: &Path) -> Result<f64, SchemaError> {
    let trimmed = raw.trim();
    if trimmed.is_empty() {
        return Err(SchemaError(format!(
            "{}: empty cell in column '{column}' at data row {row}",
            path.display()
        )));
    }
    let value: f64 = trimmed.parse().map_err(|_| {
        SchemaError(format!(
            "{}: cannot parse '{trimmed}' in column '{column}' at data row {row}",
            path.display()
        ))
    })?;
    if !value.is_finite() {
        return Err(SchemaError(format!(
            "{}: non-finite value in column '{column}' at data row {row}",
            path.display()
        )));
    }
    Ok(value)
}

/// Reads the trial CSV: header `y,a,<covariates...>`; outcome real, treatment
/// 0/1, covariates real. Returns the dataset (intercept prepended) and the
/// covariate column names.
pub fn read_trial_csv(path: &Path) -> Result<(TrialDataset, Vec<String>), SchemaError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| SchemaError(format!("{}: {e}", path.display())))?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| SchemaError(format!("{}: {e}", path.display())))?
        .iter()
        .map(str::to_string)
        .collect();
    if headers.len() < 3 || headers[0] != "y" || headers[1] != "a" {
        return Err(SchemaError(format!(
            "{}: trial header must start with 'y,a' followed by covariate columns, got {:?}",
            path.display(),
            headers
        )));
    }
    let covariate_names: Vec<String> = headers[2..].to_vec();

    let mut rows = Vec::new();
    let mut treatment = Vec::new();
    let mut outcome = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let row = idx + 1;
        let record = record.map_err(|e| SchemaError(format!("{}: {e}", path.display())))?;
        if record.len() != headers.len() {
            return Err(SchemaError(format!(
                "{}: expected {} fields at data row {row}, got {}",
                path.display(),
                headers.len(),
                record.len()
            )));
        }
        outcome.push(parse_cell(&record[0], "y", row, path)?);
        let a = parse_cell(&record[1], "a", row, path)?;
        if a != 0.0 && a != 1.0 {
            return Err(SchemaError(format!(
                "{}: treatment column 'a' must be 0 or 1, got {a} at data row {row}",
                path.display()
            )));
        }
        treatment.push(a as u8);
        let mut w = Vec::with_capacity(headers.len() - 1);
        w.push(1.0);
        for (j, name) in covariate_names.iter().enumerate() {
            w.push(parse_cell(&record[j + 2], name, row, path)?);
        }
        rows.push(w);
    }
    if rows.is_empty() {
        return Err(SchemaError(format!("{}: no data rows", path.display())));
    }
    let covariates = Matrix::from_rows(&rows)
        .map_err(|e| SchemaError(format!("{}: {e}", path.display())))?;
    let outcome =
        Vector::new(outcome).map_err(|e| SchemaError(format!("{}: {e}", path.display())))?;
    let dataset = TrialDataset::new(covariates, treatment, outcome)
        .map_err(|e| SchemaError(format!("{}: {e}", path.display())))?;
    Ok((dataset, covariate_names))
}

/// Reads the historical CSV: header `y,<covariates...>` where the covariate
/// names must match the trial's, in order. A treatment column named `a` may
/// be present anywhere; it is skipped without being read.
pub fn read_historical_csv(
    path: &Path,
    trial_covariates: &[String],
) -> Result<HistoricalDataset, SchemaError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| SchemaError(format!("{}: {e}", path.display())))?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| SchemaError(format!("{}: {e}", path.display())))?
        .iter()
        .map(str::to_string)
        .collect();
    // Positions of every column except an optional treatment column.
    let kept: Vec<(usize, &String)> = headers
        .iter()
        .enumerate()
        .filter(|(_, name)| name.as_str() != "a")
        .collect();
    let kept_names: Vec<&str> = kept.iter().map(|(_, n)| n.as_str()).collect();
    let mut expected = vec!["y"];
    expected.extend(trial_covariates.iter().map(String::as_str));
    if kept_names != expected {
        return Err(SchemaError(format!(
            "{}: historical columns {kept_names:?} do not match expected {expected:?}",
            path.display()
        )));
    }

    let mut rows = Vec::new();
    let mut outcome = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let row = idx + 1;
        let record = record.map_err(|e| SchemaError(format!("{}: {e}", path.display())))?;
        if record.len() != headers.len() {
            return Err(SchemaError(format!(
                "{}: expected {} fields at data row {row}, got {}",
                path.display(),
                headers.len(),
                record.len()
            )));
        }
        outcome.push(parse_cell(&record[kept[0].0], "y", row, path)?);
        let mut w = Vec::with_capacity(kept.len());
        w.push(1.0);
        for (pos, name) in kept.iter().skip(1) {
            w.push(parse_cell(&record[*pos], name, row, path)?);
        }
        rows.push(w);
    }
    if rows.is_empty() {
        return Err(SchemaError(format!("{}: no data rows", path.display())));
    }
    let covariates = Matrix::from_rows(&rows)
        .map_err(|e| SchemaError(format!("{}: {e}", path.display())))?;
    let outcome =
        Vector::new(outcome).map_err(|e| SchemaError(format!("{}: {e}", path.display())))?;
    HistoricalDataset::new(covariates, outcome)
        .map_err(|e| SchemaError(format!("{}: {e}", path.display())))
}

/// Per-coefficient block of the fit report.
#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct CoefficientReport {
    pub label: String,
    pub estimate: f64,
    pub se_fix: f64,
    pub se_est: f64,
    pub ci_fix: [f64; 2],
    pub ci_est: [f64; 2],
    pub variance_ratio: f64,
    pub df: usize,
}

/// Machine-readable fit report. Field order is the canonical key order of
/// the emitted JSON.
#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct FitReport {
    pub model: ModelSpec,
    pub level: f64,
    pub n_trial: usize,
    pub n_hist: usize,
    pub kappa_hat: f64,
    pub coefficients: Vec<CoefficientReport>,
}

pub fn fit_report(fit: &ProcovaFit, rows: &[InferenceResult], level: f64) -> FitReport {
    let coefficients = rows
        .iter()
        .map(|r| CoefficientReport {
            label: r.coefficient_label.clone(),
            estimate: r.estimate,
            se_fix: r.se_fix,
            se_est: r.se_est,
            ci_fix: [r.ci_fix.0, r.ci_fix.1],
            ci_est: [r.ci_est.0, r.ci_est.1],
            variance_ratio: if r.se_fix > 0.0 {
                (r.se_est / r.se_fix) * (r.se_est / r.se_fix)
            } else if r.se_est == 0.0 {
                1.0
            } else {
                f64::INFINITY
            },
            df: r.df,
        })
        .collect();
    FitReport {
        model: fit.spec,
        level,
        n_trial: fit.n_trial,
        n_hist: fit.n_hist,
        kappa_hat: fit.kappa_hat(),
        coefficients,
    }
}

pub fn fit_report_csv(report: &FitReport) -> String {
    let mut out = String::from(
        "label,estimate,se_fix,se_est,ci_fix_lo,ci_fix_hi,ci_est_lo,ci_est_hi,variance_ratio,df\n",
    );
    for c in &report.coefficients {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            c.label,
            c.estimate,
            c.se_fix,
            c.se_est,
            c.ci_fix[0],
            c.ci_fix[1],
            c.ci_est[0],
            c.ci_est[1],
            c.variance_ratio,
            c.df
        ));
    }
    out
}

/// Scenario summary embedding the config (with the pinned stream-generator
/// identity) and the aggregated metrics.
#[derive(Debug, Serialize, Deserialize)]
pub struct SimulationSummary {
    pub rng: String,
    pub config: ScenarioConfig,
    pub metrics: ReplicationMetrics,
}

pub fn simulation_summary(config: &ScenarioConfig, metrics: &ReplicationMetrics) -> SimulationSummary {
    SimulationSummary {
        rng: RNG_ALGORITHM.to_string(),
        config: config.clone(),
        metrics: ReplicationMetrics {
            coefficients: metrics.coefficients.clone(),
            replications_completed: metrics.replications_completed,
            replications_failed: metrics.replications_failed,
        },
    }
}

/// One CSV row per coefficient and estimator.
pub fn metrics_csv(config: &ScenarioConfig, metrics: &ReplicationMetrics) -> String {
    let mut out = String::from(
        "scenario,shift,model,n_trial,n_hist,replications,seed,coefficient,estimator,coverage,\
         mean_variance_ratio,mean_estimate,true_value,replications_completed,replications_failed\n",
    );
    let base = format!(
        "{},{},{},{},{},{},{}",
        config.outcome_model,
        config.shift_pattern,
        config.spec,
        config.n_trial,
        config.n_hist,
        config.replications,
        config.seed
    );
    for c in &metrics.coefficients {
        for (estimator, coverage) in [("fix", c.coverage_fix), ("est", c.coverage_est)] {
            out.push_str(&format!(
                "{base},{},{estimator},{coverage},{},{},{},{},{}\n",
                c.label,
                c.mean_variance_ratio,
                c.mean_estimate,
                c.true_value,
                metrics.replications_completed,
                metrics.replications_failed
            ));
        }
    }
    out
}
