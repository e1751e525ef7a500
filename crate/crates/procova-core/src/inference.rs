//! Standard errors and t-based confidence intervals for the second-stage
//! coefficients.
//!
//! The t quantile is computed by monotone root-finding on a CDF built from
//! the regularized incomplete beta function; no table interpolation and no
//! normal shortcut. Degrees of freedom are n minus the number of second-stage
//! parameters.

use crate::error::{Error, Result};
use crate::estimate::ProcovaFit;
use crate::model::{contrast_vector, ContrastTarget};
use crate::numeric::{quadratic_form, Vector};

/// Per-coefficient inference under both variance estimators.
#[derive(Debug, Clone)]
pub struct InferenceResult {
    pub coefficient_label: String,
    pub estimate: f64,
    pub se_fix: f64,
    pub se_est: f64,
    pub ci_fix: (f64, f64),
    pub ci_est: (f64, f64),
    pub df: usize,
    pub level: f64,
}

const LANCZOS_G: f64 = 7.0;
// Published g = 7 coefficient table, kept digit-for-digit.
#[allow(clippy::excessive_precision)]
const LANCZOS_COEF: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// Natural log of the gamma function (Lanczos approximation, g = 7, n = 9).
fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // Reflection formula.
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = LANCZOS_COEF[0];
    for (i, c) in LANCZOS_COEF.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + LANCZOS_G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

/// Continued fraction for the incomplete beta function (modified Lentz).
fn beta_cf(x: f64, a: f64, b: f64) -> Result<f64> {
    const MAX_ITER: usize = 100_000;
    const EPS: f64 = 1e-15;
    const FPMIN: f64 = 1e-300;

    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < FPMIN {
        d = FPMIN;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < FPMIN {
            d = FPMIN;
        }
        c = 1.0 + aa / c;
        if c.abs() < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < FPMIN {
            d = FPMIN;
        }
        c = 1.0 + aa / c;
        if c.abs() < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            return Ok(h);
        }
    }
    Err(Error::InvalidConfig(
        "incomplete beta continued fraction did not converge".into(),
    ))
}

/// Regularized incomplete beta function I_x(a, b).
fn inc_beta_reg(x: f64, a: f64, b: f64) -> Result<f64> {
    if x <= 0.0 {
        return Ok(0.0);
    }
    if x >= 1.0 {
        return Ok(1.0);
    }
    let ln_front = a * x.ln() + b * (1.0 - x).ln() - ln_beta(a, b);
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        Ok(front * beta_cf(x, a, b)? / a)
    } else {
        Ok(1.0 - front * beta_cf(1.0 - x, b, a)? / b)
    }
}

/// CDF of Student's t distribution with `df` degrees of freedom.
pub fn t_cdf(t: f64, df: usize) -> Result<f64> {
    let nu = df as f64;
    let x = nu / (nu + t * t);
    let half_tail = 0.5 * inc_beta_reg(x, 0.5 * nu, 0.5)?;
    Ok(if t >= 0.0 { 1.0 - half_tail } else { half_tail })
}

/// Quantile of Student's t distribution: the q with `t_cdf(q, df) = p`.
///
/// Monotone bisection on the CDF, run to an interval width far below the
/// 1e-9 absolute target.
pub fn t_quantile(df: usize, p: f64) -> Result<f64> {
    if !(0.0 < p && p < 1.0) {
        return Err(Error::InvalidProbability(p));
    }
    if df == 0 {
        return Err(Error::InvalidConfig("degrees of freedom must be >= 1".into()));
    }
    if p == 0.5 {
        return Ok(0.0);
    }
    if p < 0.5 {
        return Ok(-t_quantile(df, 1.0 - p)?);
    }
    // Bracket the root above zero.
    let mut lo = 0.0;
    let mut hi = 1.0;
    while t_cdf(hi, df)? < p {
        lo = hi;
        hi *= 2.0;
        if hi > 1e12 {
            return Err(Error::InvalidConfig(format!(
                "t quantile bracket failed for p = {p}"
            )));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if t_cdf(mid, df)? < p {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-13 * hi.max(1.0) {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Standard errors and two-sided confidence intervals for every second-stage
/// coefficient, plus the control-mean-plus-effect combination under the
/// centered variants.
pub fn summarize(fit: &ProcovaFit, level: f64) -> Result<Vec<InferenceResult>> {
    if !(0.0 < level && level < 1.0) {
        return Err(Error::InvalidProbability(level));
    }
    let n = fit.n_trial;
    let p = fit.spec.param_count();
    if n <= p {
        return Err(Error::InvalidConfig(format!(
            "{n} trial rows leave no residual degrees of freedom for {p} parameters"
        )));
    }
    let df = n - p;
    let t_crit = t_quantile(df, 1.0 - (1.0 - level) / 2.0)?;

    let mut contrasts: Vec<(String, Vector)> = fit
        .spec
        .coefficient_labels()
        .iter()
        .enumerate()
        .map(|(k, label)| {
            let mut e = vec![0.0; p];
            e[k] = 1.0;
            (label.to_string(), Vector::from(e))
        })
        .collect();
    if fit.spec.is_centered() {
        let e = contrast_vector(fit.spec, ContrastTarget::ControlMeanPlusEffect)?;
        contrasts.push(("beta0+betaA".to_string(), e));
    }

    let mut out = Vec::with_capacity(contrasts.len());
    for (label, e) in contrasts {
        let estimate = e.dot(&fit.beta_hat)?;
        let var_fix = quadratic_form(&e, &fit.v_fix)?.max(0.0);
        let var_est = quadratic_form(&e, &fit.v_est)?.max(0.0);
        let se_fix = (var_fix / n as f64).sqrt();
        let se_est = (var_est / n as f64).sqrt();
        out.push(InferenceResult {
            coefficient_label: label,
            estimate,
            se_fix,
            se_est,
            ci_fix: (estimate - t_crit * se_fix, estimate + t_crit * se_fix),
            ci_est: (estimate - t_crit * se_est, estimate + t_crit * se_est),
            df,
            level,
        });
    }
    Ok(out)
}
