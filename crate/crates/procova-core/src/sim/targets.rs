//! Frozen per-scenario population targets.
//!
//! Coverage of the intercept and score coefficients needs their population
//! values, which have no closed form under the nonlinear scenarios. The
//! table below was produced by `regenerate_scenario_target_table` (ignored
//! test at the bottom of this file): a 10^7-sample evaluation of the
//! first-stage population coefficients on shifted historical data followed by
//! a 10^7-sample pass over the trial distribution accumulating the score and
//! outcome-mean moments that the closed-form coefficient expressions need.
//! Rerun that test and paste its output here to regenerate.

use super::dgp::{OutcomeModel, ShiftPattern};
use crate::model::ModelSpec;

/// Population moments of the prognostic score and the outcome means under
/// one scenario, enough to evaluate every variant's coefficient targets.
#[derive(Debug, Clone, Copy)]
pub struct ScenarioTargets {
    /// E[Y | A=0] over the trial distribution.
    pub control_mean: f64,
    /// E[Y | A=1] over the trial distribution.
    pub treated_mean: f64,
    /// E[s], the mean prognostic score at the population first-stage fit.
    pub score_mean: f64,
    /// V[s].
    pub score_variance: f64,
    /// Cov[s, Y | A=0].
    pub score_outcome_cov_control: f64,
    /// Cov[s, Y | A=1].
    pub score_outcome_cov_treated: f64,
}

/// Average treatment effect used as the coverage target for the treatment
/// coefficient. Constant by construction (exactly 0.835) for models A and C.
/// For B and D the design value is the rounded large-sample one: nine
/// independent 10^7-sample potential-outcome evaluations gave
/// 0.8368 +/- 0.0006 for B (analytically 0.83725 from the moment identities)
/// and 0.8362 +/- 0.0002 for D. The bias of the rounded constant is two
/// orders of magnitude below the treatment coefficient's standard error at
/// every sample size simulated here.
pub fn true_ate(_model: OutcomeModel) -> f64 {
    0.835
}

/// Frozen moment table; see the module docs for provenance.
pub fn scenario_targets(model: OutcomeModel, shift: ShiftPattern) -> ScenarioTargets {
    let row = match model {
        OutcomeModel::A => &TABLE_A[shift.index() as usize - 1],
        OutcomeModel::B => &TABLE_B[shift.index() as usize - 1],
        OutcomeModel::C => &TABLE_C[shift.index() as usize - 1],
        OutcomeModel::D => &TABLE_D[shift.index() as usize - 1],
    };
    ScenarioTargets {
        control_mean: row[0],
        treated_mean: row[1],
        score_mean: row[2],
        score_variance: row[3],
        score_outcome_cov_control: row[4],
        score_outcome_cov_treated: row[5],
    }
}

/// Per-coefficient coverage targets for a variant, labelled the way
/// `summarize` labels its rows.
pub fn coefficient_targets(
    model: OutcomeModel,
    shift: ShiftPattern,
    spec: ModelSpec,
) -> Vec<(String, f64)> {
    let t = scenario_targets(model, shift);
    let ate = true_ate(model);
    let pi = 0.5;
    let cov_sy =
        pi * t.score_outcome_cov_treated + (1.0 - pi) * t.score_outcome_cov_control;
    match spec {
        ModelSpec::Ancova => vec![
            (
                "beta0".into(),
                t.control_mean - t.score_mean * cov_sy / t.score_variance,
            ),
            ("betaA".into(), ate),
            ("beta1".into(), cov_sy / t.score_variance),
        ],
        ModelSpec::AncovaCentered => vec![
            ("beta0".into(), t.control_mean),
            ("betaA".into(), ate),
            ("beta1".into(), cov_sy / t.score_variance),
            ("beta0+betaA".into(), t.control_mean + ate),
        ],
        ModelSpec::Anhecova => vec![
            ("beta0".into(), t.control_mean),
            ("betaA".into(), ate),
            (
                "beta1".into(),
                t.score_outcome_cov_control / t.score_variance,
            ),
            (
                "beta2".into(),
                (t.score_outcome_cov_treated - t.score_outcome_cov_control) / t.score_variance,
            ),
            ("beta0+betaA".into(), t.control_mean + ate),
        ],
    }
}

// Columns: control_mean, treated_mean, score_mean, score_variance,
// cov(s, Y | A=0), cov(s, Y | A=1).
const TABLE_A: [[f64; 6]; 9] = [
    [-3.675743, -2.840743, -3.675743, 34.798178, 34.798178, 34.798178], // A-1 ate=0.83500
    [-3.674377, -2.839377, -3.674377, 34.793388, 34.793388, 34.793388], // A-2 ate=0.83500
    [-3.676121, -2.841121, -3.676121, 34.786122, 34.786122, 34.786122], // A-3 ate=0.83500
    [-3.675447, -2.840447, -3.675447, 34.800851, 34.800851, 34.800851], // A-4 ate=0.83500
    [-3.676783, -2.841783, -3.676783, 34.765878, 34.765878, 34.765878], // A-5 ate=0.83500
    [-3.673047, -2.838047, -3.673047, 34.776084, 34.776084, 34.776084], // A-6 ate=0.83500
    [-3.675972, -2.840972, -3.675972, 34.777060, 34.777060, 34.777060], // A-7 ate=0.83500
    [-3.673718, -2.838718, -3.673718, 34.800339, 34.800339, 34.800339], // A-8 ate=0.83500
    [-3.676398, -2.841398, -3.676398, 34.791421, 34.791421, 34.791421], // A-9 ate=0.83500
];
const TABLE_B: [[f64; 6]; 9] = [
    [-3.676551, -2.837584, -3.676551, 34.809807, 34.809807, 0.487518], // B-1 ate=0.83897
    [-3.673425, -2.837183, -3.673425, 34.791492, 34.791492, 0.483673], // B-2 ate=0.83624
    [-3.675917, -2.836736, -3.675917, 34.786859, 34.786859, 0.476209], // B-3 ate=0.83918
    [-3.675752, -2.838474, -3.675752, 34.794133, 34.794133, 0.484937], // B-4 ate=0.83728
    [-3.675815, -2.839356, -3.675815, 34.784474, 34.784474, 0.498794], // B-5 ate=0.83646
    [-3.674644, -2.838559, -3.674644, 34.783048, 34.783048, 0.486503], // B-6 ate=0.83609
    [-3.673125, -2.837716, -3.673125, 34.792887, 34.792887, 0.490388], // B-7 ate=0.83541
    [-3.672105, -2.838240, -3.672105, 34.794665, 34.794665, 0.482437], // B-8 ate=0.83387
    [-3.674984, -2.836941, -3.674984, 34.789171, 34.789171, 0.486217], // B-9 ate=0.83804
];
const TABLE_C: [[f64; 6]; 9] = [
    [5.057489, 5.892489, 5.058368, 0.761239, 0.761408, 0.761408], // C-1 ate=0.83500
    [5.057642, 5.892642, 4.031602, 0.359513, 0.510567, 0.510567], // C-2 ate=0.83500
    [5.056814, 5.891814, 0.057827, 0.699835, -0.464384, -0.464384], // C-3 ate=0.83500
    [5.057535, 5.892535, 5.059568, 0.761128, 0.761574, 0.761574], // C-4 ate=0.83500
    [5.057117, 5.892117, 4.031217, 0.359254, 0.510147, 0.510147], // C-5 ate=0.83500
    [5.056496, 5.891496, 0.058855, 0.699402, -0.464645, -0.464645], // C-6 ate=0.83500
    [5.056932, 5.891932, 8.019533, 1.333913, -0.034850, -0.034850], // C-7 ate=0.83500
    [5.057102, 5.892102, 6.995255, 1.567680, -0.287256, -0.287256], // C-8 ate=0.83500
    [5.057475, 5.892475, 3.016344, 4.374349, -1.261421, -1.261421], // C-9 ate=0.83500
];
const TABLE_D: [[f64; 6]; 9] = [
    [5.057066, 5.893126, 5.057523, 0.762043, 0.762138, 0.394415], // D-1 ate=0.83606
    [5.057528, 5.893864, 4.032075, 0.359087, 0.509508, 0.283059], // D-2 ate=0.83634
    [5.057724, 5.894186, 0.058857, 0.702465, -0.465214, -0.143386], // D-3 ate=0.83646
    [5.057453, 5.893644, 5.057453, 0.761755, 0.762037, 0.394292], // D-4 ate=0.83619
    [5.057546, 5.894543, 4.030929, 0.359821, 0.510334, 0.283754], // D-5 ate=0.83700
    [5.057958, 5.894145, 0.056946, 0.699667, -0.463922, -0.142672], // D-6 ate=0.83619
    [5.057040, 5.893209, 8.022447, 1.334698, -0.035224, 0.044477], // D-7 ate=0.83617
    [5.058522, 5.894565, 7.001171, 1.570545, -0.286733, -0.065989], // D-8 ate=0.83604
    [5.056609, 5.892782, 3.014880, 4.378085, -1.261758, -0.493205], // D-9 ate=0.83617
];

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::{invert, Matrix, Vector};
    use crate::sim::dgp::{control_mean, treated_mean, replication_rng};
    use rand::Rng;
    use rand_distr::{Distribution, Exp, Gamma, Normal, Uniform};

    struct Sampler {
        w1: Uniform<f64>,
        w2: Uniform<f64>,
        w3: Normal<f64>,
        w4: Exp<f64>,
        w5: Gamma<f64>,
        w67: Uniform<f64>,
        u: Uniform<f64>,
    }

    impl Sampler {
        fn new(b: f64, c: f64) -> Self {
            Self {
                w1: Uniform::new(-2.0 + b, 1.0 + b),
                w2: Uniform::new(-2.0, 1.0),
                w3: Normal::new(0.0, 3.0).unwrap(),
                w4: Exp::new(0.8).unwrap(),
                w5: Gamma::new(5.0, 0.1).unwrap(),
                w67: Uniform::new(1.0, 2.0),
                u: Uniform::new(c, 1.0 + c),
            }
        }

        fn sample<R: Rng>(&self, rng: &mut R) -> ([f64; 7], f64) {
            (
                [
                    self.w1.sample(rng),
                    self.w2.sample(rng),
                    self.w3.sample(rng),
                    self.w4.sample(rng),
                    self.w5.sample(rng),
                    self.w67.sample(rng),
                    self.w67.sample(rng),
                ],
                self.u.sample(rng),
            )
        }
    }

    /// Regenerates the frozen table. Run with
    /// `cargo test -p procova-core --release regenerate_scenario_target_table -- --ignored --nocapture`
    /// and paste the printed arrays over the constants above.
    #[test]
    #[ignore = "long-running table regeneration; run manually"]
    fn regenerate_scenario_target_table() {
        const N: usize = 10_000_000;
        for model in OutcomeModel::ALL {
            println!("const TABLE_{model}: [[f64; 6]; 9] = [");
            for shift in ShiftPattern::ALL {
                let (b, c) = shift.shifts();
                let scenario_id =
                    (model as u64) * 16 + shift.index() as u64;

                // First-stage population coefficients from shifted
                // historical data (noise-free outcome moments).
                let mut rng = replication_rng(0x7a6c_0001, scenario_id as usize);
                let hist = Sampler::new(b, c);
                let mut gram = [[0.0f64; 8]; 8];
                let mut xty = [0.0f64; 8];
                for _ in 0..N {
                    let (w, u) = hist.sample(&mut rng);
                    let m0 = control_mean(model, &w, u);
                    let row = [1.0, w[0], w[1], w[2], w[3], w[4], w[5], w[6]];
                    for i in 0..8 {
                        xty[i] += row[i] * m0;
                        for j in 0..8 {
                            gram[i][j] += row[i] * row[j];
                        }
                    }
                }
                let gram = Matrix::new(
                    8,
                    8,
                    gram.iter().flatten().map(|v| v / N as f64).collect(),
                )
                .unwrap();
                let xty = Vector::new(xty.iter().map(|v| v / N as f64).collect()).unwrap();
                let theta = invert(&gram).unwrap().mat_vec(&xty).unwrap();

                // Trial-distribution moments of score and outcome means.
                let mut rng = replication_rng(0x7a6c_0002, scenario_id as usize);
                let trial = Sampler::new(0.0, 0.0);
                let (mut e_s, mut e_ss) = (0.0f64, 0.0f64);
                let (mut e_m0, mut e_m1) = (0.0f64, 0.0f64);
                let (mut e_sm0, mut e_sm1) = (0.0f64, 0.0f64);
                for _ in 0..N {
                    let (w, u) = trial.sample(&mut rng);
                    let row = [1.0, w[0], w[1], w[2], w[3], w[4], w[5], w[6]];
                    let s: f64 = row
                        .iter()
                        .zip(theta.as_slice())
                        .map(|(x, t)| x * t)
                        .sum();
                    let m0 = control_mean(model, &w, u);
                    let m1 = treated_mean(model, &w, u);
                    e_s += s;
                    e_ss += s * s;
                    e_m0 += m0;
                    e_m1 += m1;
                    e_sm0 += s * m0;
                    e_sm1 += s * m1;
                }
                let inv_n = 1.0 / N as f64;
                let (e_s, e_ss) = (e_s * inv_n, e_ss * inv_n);
                let (e_m0, e_m1) = (e_m0 * inv_n, e_m1 * inv_n);
                let (e_sm0, e_sm1) = (e_sm0 * inv_n, e_sm1 * inv_n);
                let v_s = e_ss - e_s * e_s;
                let g0 = e_sm0 - e_s * e_m0;
                let g1 = e_sm1 - e_s * e_m1;
                println!(
                    "    [{e_m0:.6}, {e_m1:.6}, {e_s:.6}, {v_s:.6}, {g0:.6}, {g1:.6}], // {model}-{shift} ate={:.5}",
                    e_m1 - e_m0
                );
            }
            println!("];");
        }
    }

    #[test]
    fn contrast_labels_match_summarize_layout() {
        let shift = ShiftPattern::new(5).unwrap();
        let t = coefficient_targets(OutcomeModel::D, shift, ModelSpec::Anhecova);
        let labels: Vec<&str> = t.iter().map(|(l, _)| l.as_str()).collect();
        assert_eq!(labels, ["beta0", "betaA", "beta1", "beta2", "beta0+betaA"]);
        let t = coefficient_targets(OutcomeModel::A, shift, ModelSpec::Ancova);
        let labels: Vec<&str> = t.iter().map(|(l, _)| l.as_str()).collect();
        assert_eq!(labels, ["beta0", "betaA", "beta1"]);
    }
}
