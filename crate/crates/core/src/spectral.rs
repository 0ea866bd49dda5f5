//! Design-matrix bookkeeping and eigenvalue tools.
//!
//! Besides the running design matrix `V_t = Σ x_s x_sᵀ`, this module carries
//! the matrix inequalities the regret analysis rests on, each in a form that
//! can be checked numerically:
//!
//! * a Schur-complement lower bound on `λ_min` of a 2×2 block matrix,
//! * the scalar bound `min_p f(p) ≥ 1/((b+1)² + 1)` used inside it,
//! * `λ_min(A) ≥ λ_min(B) − ‖A − B‖_op`,
//! * the high-probability envelope on `‖Σ_s (x_s x_sᵀ − Σ)‖_op`.

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::perturbation::PerturbationSchedule;

/// Sweeps stop once the off-diagonal Frobenius mass drops below this
/// (relative to `max(1, ‖M‖_F)`).
pub const JACOBI_OFF_TOL: f64 = 1e-12;
const JACOBI_MAX_SWEEPS: usize = 100;

/// Eigenvalues of a symmetric matrix in ascending order, by cyclic Jacobi.
/// The input is symmetrized first.
pub fn symmetric_eigenvalues(m: &Matrix) -> Result<Vec<f64>> {
    let mut a = m.symmetrized()?;
    let n = a.rows();
    if a.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("non-finite matrix entry".into()));
    }
    let target = JACOBI_OFF_TOL * a.frobenius().max(1.0);

    for _ in 0..JACOBI_MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)] * a[(i, j)])
            .sum::<f64>()
            .sqrt();
        if off < target {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
            }
        }
    }

    let mut eig: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
    eig.sort_by(f64::total_cmp);
    Ok(eig)
}

pub fn lambda_min(m: &Matrix) -> Result<f64> {
    symmetric_eigenvalues(m)?
        .first()
        .copied()
        .ok_or_else(|| Error::Precondition("empty matrix".into()))
}

pub fn lambda_max(m: &Matrix) -> Result<f64> {
    symmetric_eigenvalues(m)?
        .last()
        .copied()
        .ok_or_else(|| Error::Precondition("empty matrix".into()))
}

/// Largest singular value, `sqrt(λ_max(MᵀM))`.
pub fn operator_norm(m: &Matrix) -> f64 {
    if m.rows() == 0 || m.cols() == 0 {
        return 0.0;
    }
    let gram = m.transpose().matmul(m).expect("MᵀM is always conformable");
    lambda_max(&gram)
        .map(|v| v.max(0.0).sqrt())
        .unwrap_or(f64::NAN)
}

/// Running `V_t = Σ x_s x_sᵀ` with a sparse trace of `λ_min(V_t)`.
#[derive(Debug, Clone)]
pub struct DesignAccumulator {
    v: Matrix,
    t: u64,
    trace: Vec<(u64, f64)>,
}

impl DesignAccumulator {
    /// Every step is recorded up to this `t`, then every [`Self::STRIDE`] steps.
    pub const DENSE_UNTIL: u64 = 200;
    pub const STRIDE: u64 = 10;

    pub fn new(dim: usize) -> Self {
        Self {
            v: Matrix::zeros(dim, dim),
            t: 0,
            trace: Vec::new(),
        }
    }

    pub fn push(&mut self, x: &[f64]) -> Result<()> {
        crate::error::check_dim(self.v.rows(), x.len())?;
        self.v.add_outer(x, 1.0);
        self.t += 1;
        Ok(())
    }

    pub fn is_due(t: u64) -> bool {
        t <= Self::DENSE_UNTIL || t.is_multiple_of(Self::STRIDE)
    }

    /// Appends `(t, λ_min(V_t))` to the trace and returns the value.
    pub fn record(&mut self) -> Result<f64> {
        let l = lambda_min(&self.v)?;
        self.trace.push((self.t, l));
        Ok(l)
    }

    pub fn record_if_due(&mut self) -> Result<Option<f64>> {
        if Self::is_due(self.t) {
            self.record().map(Some)
        } else {
            Ok(None)
        }
    }

    pub fn matrix(&self) -> &Matrix {
        &self.v
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn trace(&self) -> &[(u64, f64)] {
        &self.trace
    }

    pub fn lambda_min(&self) -> Result<f64> {
        lambda_min(&self.v)
    }

    pub fn lambda_max(&self) -> Result<f64> {
        lambda_max(&self.v)
    }
}

/// `M = [[A, B], [Bᵀ, C]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockMatrix {
    pub a: Matrix,
    pub b: Matrix,
    pub c: Matrix,
}

impl BlockMatrix {
    pub fn new(a: Matrix, b: Matrix, c: Matrix) -> Result<Self> {
        if !a.is_square() || !c.is_square() || b.rows() != a.rows() || b.cols() != c.rows() {
            return Err(Error::Dimension {
                expected: a.rows() * c.rows(),
                got: b.rows() * b.cols(),
            });
        }
        Ok(Self { a, b, c })
    }

    /// Splits a square matrix after its first `m` rows/columns.
    pub fn split(m: &Matrix, upper: usize) -> Result<Self> {
        let n = m.rows();
        if !m.is_square() || upper == 0 || upper >= n {
            return Err(Error::Precondition(format!(
                "cannot split a {}x{} matrix at {upper}",
                m.rows(),
                m.cols()
            )));
        }
        let k = n - upper;
        Self::new(
            m.block(0, 0, upper, upper),
            m.block(0, upper, upper, k),
            m.block(upper, upper, k, k),
        )
    }

    pub fn assemble(&self) -> Matrix {
        let (m, k) = (self.a.rows(), self.c.rows());
        let mut out = Matrix::zeros(m + k, m + k);
        for i in 0..m {
            for j in 0..m {
                out[(i, j)] = self.a[(i, j)];
            }
            for j in 0..k {
                out[(i, m + j)] = self.b[(i, j)];
                out[(m + j, i)] = self.b[(i, j)];
            }
        }
        for i in 0..k {
            for j in 0..k {
                out[(m + i, m + j)] = self.c[(i, j)];
            }
        }
        out
    }

    /// `A − B C⁻¹ Bᵀ`.
    pub fn schur_complement(&self) -> Result<Matrix> {
        let c_inv = self
            .c
            .inverse_spd(1e-300)
            .ok_or_else(|| Error::Precondition("C is not positive definite".into()))?;
        let bcb = self.b.matmul(&c_inv)?.matmul(&self.b.transpose())?;
        self.a.sub(&bcb)?.symmetrized()
    }
}

/// Lower bound on `λ_min(M)` from the Schur decomposition of `M`:
///
/// `λ_min(C)² / ((‖B‖_op + λ_min(C))² + λ_min(C)²) · min{λ_min(A − B C⁻¹ Bᵀ), λ_min(C)}`.
///
/// Requires `λ_min(C) > 0`.
pub fn schur_lower_bound(blocks: &BlockMatrix) -> Result<f64> {
    let lc = lambda_min(&blocks.c)?;
    if !(lc > 0.0) {
        return Err(Error::Precondition(format!(
            "λ_min(C) must be positive, got {lc}"
        )));
    }
    let nb = operator_norm(&blocks.b);
    let ls = lambda_min(&blocks.schur_complement()?)?;
    let factor = lc * lc / ((nb + lc).powi(2) + lc * lc);
    Ok(factor * ls.min(lc))
}

/// `1 / ((b + 1)² + 1)`.
pub fn f_p_bound(b: f64) -> f64 {
    1.0 / ((b + 1.0).powi(2) + 1.0)
}

/// `f(p) = p + ((√(1−p) − b√p) ∨ 0)²`.
pub fn f_p_value(p: f64, b: f64) -> f64 {
    let r = ((1.0 - p).max(0.0).sqrt() - b * p.sqrt()).max(0.0);
    p + r * r
}

/// Minimum of `f` over a uniform grid of `grid_points` on `[0, 1]`.
pub fn f_p_grid_min(b: f64, grid_points: usize) -> f64 {
    let n = grid_points.max(2);
    let h = 1.0 / (n - 1) as f64;
    (0..n)
        .map(|i| f_p_value(if i + 1 == n { 1.0 } else { h * i as f64 }, b))
        .fold(f64::INFINITY, f64::min)
}

/// Slack in `λ_min(A) ≥ λ_min(B) − ‖A − B‖_op` (non-negative when it holds).
pub fn approx_isometry_margin(a: &Matrix, b: &Matrix) -> Result<f64> {
    let diff = a.sub(b)?;
    Ok(lambda_min(a)? - (lambda_min(b)? - operator_norm(&diff)))
}

pub fn approx_isometry_check(a: &Matrix, b: &Matrix) -> Result<bool> {
    Ok(approx_isometry_margin(a, b)? >= -1e-10)
}

/// `√(16 t log t (x_max² + ‖Σ‖_op)²)`.
pub fn covariance_envelope(t: u64, x_max: f64, sigma_op: f64) -> f64 {
    let t = t as f64;
    (16.0 * t * t.ln() * (x_max * x_max + sigma_op).powi(2)).sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConcentrationReport {
    pub checks: usize,
    pub violations: usize,
    /// Smallest `envelope − deviation` seen (negative on violation).
    pub worst_margin: f64,
    pub worst_instance: Option<(usize, u64)>,
}

impl ConcentrationReport {
    pub fn rate(&self) -> f64 {
        if self.checks == 0 {
            0.0
        } else {
            self.violations as f64 / self.checks as f64
        }
    }
}

/// Checkpoints used by the covariance concentration check.
pub fn concentration_checkpoints(t_max: u64) -> Vec<u64> {
    let mut cps: Vec<u64> = [t_max / 4, t_max / 2, t_max]
        .into_iter()
        .filter(|&t| t >= 2)
        .collect();
    cps.dedup();
    cps
}

/// Runs `trials` independent sequences from `sample` and compares
/// `‖Σ_{s≤t}(x_s x_sᵀ − Σ)‖_op` against [`covariance_envelope`] at each
/// checkpoint (`t < 2` is skipped since the envelope degenerates).
pub fn concentration_check<F>(
    sigma: &Matrix,
    x_max: f64,
    t_max: u64,
    trials: usize,
    mut sample: F,
) -> Result<ConcentrationReport>
where
    F: FnMut() -> Vec<f64>,
{
    let dim = sigma.rows();
    let sigma_op = operator_norm(sigma);
    let checkpoints = concentration_checkpoints(t_max);
    let mut report = ConcentrationReport {
        checks: 0,
        violations: 0,
        worst_margin: f64::INFINITY,
        worst_instance: None,
    };
    for trial in 0..trials {
        let mut dev = Matrix::zeros(dim, dim);
        let mut next = checkpoints.iter().peekable();
        for t in 1..=t_max {
            let x = sample();
            crate::error::check_dim(dim, x.len())?;
            dev.add_outer(&x, 1.0);
            dev = dev.sub(sigma)?;
            if next.peek() == Some(&&t) {
                next.next();
                let margin = covariance_envelope(t, x_max, sigma_op) - operator_norm(&dev);
                report.checks += 1;
                if margin < 0.0 {
                    report.violations += 1;
                }
                if margin < report.worst_margin {
                    report.worst_margin = margin;
                    report.worst_instance = Some((trial, t));
                }
            }
        }
    }
    Ok(report)
}

/// Violation rate of the covariance envelope for i.i.d. vectors uniform on
/// `[−1, 1]^dim` (`Σ = I/3`, `x_max = 1`).
pub fn concentration_violation_rate<R: Rng + ?Sized>(
    dim: usize,
    t_max: u64,
    trials: usize,
    rng: &mut R,
) -> Result<ConcentrationReport> {
    let sigma = Matrix::identity(dim).scale(1.0 / 3.0);
    concentration_check(&sigma, 1.0, t_max, trials, || {
        (0..dim).map(|_| 2.0 * rng.random::<f64>() - 1.0).collect()
    })
}

/// `λ_min(t) / Σ_{s≤t} α_s²` for each recorded `(t, λ_min(t))`.
pub fn lambda_growth_ratio(trace: &[(u64, f64)], schedule: &PerturbationSchedule) -> Vec<f64> {
    let mut out = Vec::with_capacity(trace.len());
    let mut sum = 0.0;
    let mut s = 0u64;
    for &(t, l) in trace {
        while s < t {
            s += 1;
            let a = schedule.alpha_unchecked(s);
            sum += a * a;
        }
        out.push(if sum > 0.0 { l / sum } else { 0.0 });
    }
    out
}
