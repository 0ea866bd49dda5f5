//! Randomized soundness batteries for the matrix inequalities and the MQLE
//! solver. Each battery compares against an independent reference: a dense
//! eigensolve, a brute-force grid, or Gaussian elimination on the normal
//! equations.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{map_indexed, Execution};
use crate::glm::LinkFunction;
use crate::linalg::{norm_inf, Matrix};
use crate::mqle::{solve_mqle, Dataset, OnlineRidge};
use crate::spectral::{
    approx_isometry_margin, concentration_violation_rate, f_p_bound, f_p_grid_min, lambda_max,
    lambda_min, schur_lower_bound, BlockMatrix,
};

pub const SCHUR_SLACK: f64 = 1e-10;
pub const FP_SLACK: f64 = 1e-6;
pub const FP_GRID: usize = 1_000_000;
pub const ISOMETRY_SLACK: f64 = 1e-10;
pub const MQLE_ORACLE_TOL: f64 = 1e-8;
pub const CONCENTRATION_MAX_RATE: f64 = 0.01;
pub const CONCENTRATION_DIM: usize = 3;
pub const CONCENTRATION_T_MAX: u64 = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Prop4,
    FpLemma,
    Concentration,
    Isometry,
    MqleOracle,
}

impl Suite {
    pub const ALL: [Suite; 5] = [
        Suite::Prop4,
        Suite::FpLemma,
        Suite::Concentration,
        Suite::Isometry,
        Suite::MqleOracle,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Prop4 => "prop4",
            Suite::FpLemma => "fp_lemma",
            Suite::Concentration => "concentration",
            Suite::Isometry => "isometry",
            Suite::MqleOracle => "mqle_oracle",
        }
    }

    pub fn default_trials(self) -> usize {
        match self {
            Suite::Prop4 | Suite::Isometry => 1000,
            Suite::FpLemma | Suite::MqleOracle => 100,
            Suite::Concentration => 200,
        }
    }
}

impl std::str::FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::InvalidField {
                field: "suite".into(),
                reason: format!(
                    "unknown suite `{s}` (expected one of prop4, fp_lemma, concentration, isometry, mqle_oracle)"
                ),
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub suite: Suite,
    pub trials: usize,
    pub seed: u64,
    pub checks: usize,
    pub violations: usize,
    /// Smallest slack observed; negative values are violations (before the
    /// suite's tolerance is applied).
    pub worst_margin: f64,
    pub worst_trial: Option<usize>,
    /// The instance attaining the worst margin (or the first violation).
    pub instance: Option<serde_json::Value>,
    /// Suite-specific summary numbers.
    pub metrics: serde_json::Map<String, serde_json::Value>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

fn trial_rng(seed: u64, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    rng
}

fn uniform_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> Matrix {
    let data = (0..rows * cols)
        .map(|_| rng.random_range(-1.0..1.0))
        .collect();
    Matrix::from_row_major(rows, cols, data).expect("sized")
}

/// Random PSD `GᵀG` of size `n` with `G` drawn `r × n`.
fn random_psd<R: Rng + ?Sized>(rng: &mut R, n: usize, r: usize) -> Matrix {
    let g = uniform_matrix(rng, r, n);
    g.transpose().matmul(&g).expect("conformable")
}

fn matrix_json(m: &Matrix) -> serde_json::Value {
    let rows: Vec<Vec<f64>> = (0..m.rows()).map(|i| m.row(i).to_vec()).collect();
    serde_json::json!(rows)
}

struct Trial {
    margin: f64,
    violated: bool,
    instance: serde_json::Value,
}

fn collect(suite: Suite, trials: usize, seed: u64, results: Vec<Trial>) -> VerifyReport {
    let mut report = VerifyReport {
        suite,
        trials,
        seed,
        checks: results.len(),
        violations: 0,
        worst_margin: f64::INFINITY,
        worst_trial: None,
        instance: None,
        metrics: serde_json::Map::new(),
    };
    let mut first_violation = None;
    for (i, r) in results.into_iter().enumerate() {
        if r.violated {
            report.violations += 1;
            if first_violation.is_none() {
                first_violation = Some((i, r.instance.clone()));
            }
        }
        if r.margin < report.worst_margin {
            report.worst_margin = r.margin;
            report.worst_trial = Some(i);
            if first_violation.is_none() {
                report.instance = Some(r.instance);
            }
        }
    }
    if let Some((i, inst)) = first_violation {
        report.worst_trial = Some(i);
        report.instance = Some(inst);
    }
    report
}

pub fn verify_suite(
    suite: Suite,
    trials: usize,
    seed: u64,
    exec: Execution,
) -> Result<VerifyReport> {
    match suite {
        Suite::Prop4 => verify_prop4(trials, seed, exec),
        Suite::FpLemma => verify_fp_lemma(trials, seed, exec),
        Suite::Concentration => verify_concentration(trials, seed),
        Suite::Isometry => verify_isometry(trials, seed, exec),
        Suite::MqleOracle => verify_mqle_oracle(trials, seed, exec),
    }
}

/// Schur-complement bound against `λ_min(M)` on random PSD block matrices
/// with block sizes 1–6.
pub fn verify_prop4(trials: usize, seed: u64, exec: Execution) -> Result<VerifyReport> {
    let results = map_indexed(trials, exec, |i| -> Result<Trial> {
        let mut rng = trial_rng(seed, i);
        loop {
            let m = rng.random_range(1..=6);
            let k = rng.random_range(1..=6);
            let n = m + k;
            // rank anywhere from 1 to 2n so that singular M also shows up
            let r = rng.random_range(1..=2 * n);
            let mat = random_psd(&mut rng, n, r);
            let blocks = BlockMatrix::split(&mat, m)?;
            if lambda_min(&blocks.c)? <= 1e-8 {
                continue;
            }
            let bound = schur_lower_bound(&blocks)?;
            let lmin = lambda_min(&mat)?;
            return Ok(Trial {
                margin: lmin - bound,
                violated: bound > lmin + SCHUR_SLACK,
                instance: serde_json::json!({
                    "m": m, "k": k, "matrix": matrix_json(&mat),
                    "bound": bound, "lambda_min": lmin,
                }),
            });
        }
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok(collect(Suite::Prop4, trials, seed, results))
}

/// Grid minimum of `f(p)` against `1/((b+1)² + 1)` for `b ~ U[0, 20]`.
pub fn verify_fp_lemma(trials: usize, seed: u64, exec: Execution) -> Result<VerifyReport> {
    let results = map_indexed(trials, exec, |i| {
        let mut rng = trial_rng(seed, i);
        let b = rng.random_range(0.0..20.0);
        let bound = f_p_bound(b);
        let gmin = f_p_grid_min(b, FP_GRID);
        Trial {
            margin: gmin - bound,
            violated: gmin < bound - FP_SLACK,
            instance: serde_json::json!({ "b": b, "grid_min": gmin, "bound": bound }),
        }
    });
    Ok(collect(Suite::FpLemma, trials, seed, results))
}

/// `λ_min(A) ≥ λ_min(B) − ‖A − B‖_op` on random PSD pairs, half of them
/// close to each other.
pub fn verify_isometry(trials: usize, seed: u64, exec: Execution) -> Result<VerifyReport> {
    let results = map_indexed(trials, exec, |i| -> Result<Trial> {
        let mut rng = trial_rng(seed, i);
        let n = rng.random_range(1..=6);
        let b = random_psd(&mut rng, n, n + 2);
        let a = if i % 2 == 0 {
            let rank = rng.random_range(1..=n + 2);
            random_psd(&mut rng, n, rank)
        } else {
            let e = uniform_matrix(&mut rng, n, n).symmetrized()?.scale(0.1);
            b.add(&e)?
        };
        let margin = approx_isometry_margin(&a, &b)?;
        Ok(Trial {
            margin,
            violated: margin < -ISOMETRY_SLACK,
            instance: serde_json::json!({ "a": matrix_json(&a), "b": matrix_json(&b) }),
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok(collect(Suite::Isometry, trials, seed, results))
}

/// Violation rate of the covariance envelope (dimension 3, `t ≤ 1000`).
/// Fails when the rate exceeds 1%.
pub fn verify_concentration(trials: usize, seed: u64) -> Result<VerifyReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r = concentration_violation_rate(CONCENTRATION_DIM, CONCENTRATION_T_MAX, trials, &mut rng)?;
    let rate = r.rate();
    let mut metrics = serde_json::Map::new();
    metrics.insert("rate".into(), rate.into());
    metrics.insert("envelope_exceedances".into(), r.violations.into());
    metrics.insert("max_rate".into(), CONCENTRATION_MAX_RATE.into());
    Ok(VerifyReport {
        suite: Suite::Concentration,
        trials,
        seed,
        checks: r.checks,
        violations: usize::from(rate > CONCENTRATION_MAX_RATE),
        worst_margin: r.worst_margin,
        worst_trial: r.worst_instance.map(|(trial, _)| trial),
        instance: r
            .worst_instance
            .map(|(trial, t)| serde_json::json!({ "trial": trial, "t": t })),
        metrics,
    })
}

/// Gaussian elimination with partial pivoting; the reference solver for the
/// MQLE batteries (independent of the Cholesky path the estimator uses).
pub fn gauss_solve(a: &Matrix, b: &[f64]) -> Option<Vec<f64>> {
    let n = a.rows();
    let mut m: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut row = a.row(i).to_vec();
            row.push(b[i]);
            row
        })
        .collect();
    for col in 0..n {
        let piv = (col..n).max_by(|&x, &y| m[x][col].abs().total_cmp(&m[y][col].abs()))?;
        if m[piv][col].abs() < 1e-300 {
            return None;
        }
        m.swap(col, piv);
        for r in (col + 1)..n {
            let f = m[r][col] / m[col][col];
            if f != 0.0 {
                let pivot_row = m[col].clone();
                for (dst, src) in m[r][col..].iter_mut().zip(&pivot_row[col..]) {
                    *dst -= f * src;
                }
            }
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = ((i + 1)..n).map(|j| m[i][j] * x[j]).sum();
        x[i] = (m[i][n] - s) / m[i][i];
    }
    Some(x)
}

pub const ORACLE_ROWS: usize = 50;
pub const ORACLE_DIM: usize = 5;
pub const ORACLE_MAX_CONDITION: f64 = 1e6;

/// Identity-link MQLE against the normal equations, and recursive ridge
/// updates against a batch ridge solve, on random 50 × 5 data sets.
pub fn verify_mqle_oracle(trials: usize, seed: u64, exec: Execution) -> Result<VerifyReport> {
    let results = map_indexed(trials, exec, |i| -> Result<(Trial, f64, f64)> {
        let mut rng = trial_rng(seed, i);
        let (data, cond) = loop {
            let beta: Vec<f64> = (0..ORACLE_DIM)
                .map(|_| rng.random_range(-2.0..2.0))
                .collect();
            let mut data = Dataset::new(ORACLE_DIM);
            for _ in 0..ORACLE_ROWS {
                let x: Vec<f64> = (0..ORACLE_DIM)
                    .map(|_| rng.random_range(-1.0..1.0))
                    .collect();
                let y = crate::linalg::dot(&beta, &x) + rng.random_range(-0.5..0.5);
                data.push_slice(&x, y)?;
            }
            let lo = lambda_min(data.gram())?;
            let hi = lambda_max(data.gram())?;
            if lo > 0.0 && hi / lo < ORACLE_MAX_CONDITION {
                break (data, hi / lo);
            }
        };

        let ols = gauss_solve(data.gram(), data.xty())
            .ok_or_else(|| Error::Precondition("singular normal equations".into()))?;
        let est = solve_mqle(
            &data,
            LinkFunction::Identity,
            &[0.0; ORACLE_DIM],
            crate::mqle::DEFAULT_TOL,
            crate::mqle::DEFAULT_MAX_ITER,
            1e6,
        )?;
        let dev_mqle = norm_inf(
            &est.beta
                .iter()
                .zip(&ols)
                .map(|(a, b)| a - b)
                .collect::<Vec<_>>(),
        );

        let ridge = 1.0;
        let mut online = OnlineRidge::new(LinkFunction::Identity, ORACLE_DIM, ridge)?;
        for (x, y) in data.rows() {
            online.update(x, y)?;
        }
        let regularized = data
            .gram()
            .add(&Matrix::identity(ORACLE_DIM).scale(ridge))?;
        let batch = gauss_solve(&regularized, data.xty())
            .ok_or_else(|| Error::Precondition("singular ridge system".into()))?;
        let dev_ridge = norm_inf(
            &online
                .estimate()
                .iter()
                .zip(&batch)
                .map(|(a, b)| a - b)
                .collect::<Vec<_>>(),
        );

        let worst = dev_mqle.max(dev_ridge);
        Ok((
            Trial {
                margin: MQLE_ORACLE_TOL - worst,
                violated: worst > MQLE_ORACLE_TOL,
                instance: serde_json::json!({
                    "condition": cond, "mqle_dev": dev_mqle, "ridge_dev": dev_ridge,
                    "projected": est.projected, "score_norm": est.score_norm,
                }),
            },
            dev_mqle,
            dev_ridge,
        ))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let max_mqle = results.iter().map(|r| r.1).fold(0.0, f64::max);
    let max_ridge = results.iter().map(|r| r.2).fold(0.0, f64::max);
    let mut report = collect(
        Suite::MqleOracle,
        trials,
        seed,
        results.into_iter().map(|r| r.0).collect(),
    );
    report
        .metrics
        .insert("max_mqle_deviation".into(), max_mqle.into());
    report
        .metrics
        .insert("max_ridge_deviation".into(), max_ridge.into());
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_names_round_trip() {
        for s in Suite::ALL {
            assert_eq!(s.name().parse::<Suite>().unwrap(), s);
        }
        assert!("nope".parse::<Suite>().is_err());
    }

    #[test]
    fn gauss_matches_known_solution() {
        let a = Matrix::from_rows(&[vec![0.0, 2.0], vec![3.0, 1.0]]).unwrap();
        let x = gauss_solve(&a, &[4.0, 5.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-15 && (x[1] - 2.0).abs() < 1e-15);
        assert!(gauss_solve(&Matrix::zeros(2, 2), &[1.0, 1.0]).is_none());
    }

    #[test]
    fn small_batteries_pass() {
        let exec = Execution::Sequential;
        assert!(verify_prop4(50, 1, exec).unwrap().passed());
        assert!(verify_isometry(50, 1, exec).unwrap().passed());
        assert!(verify_mqle_oracle(10, 1, exec).unwrap().passed());
    }
}
