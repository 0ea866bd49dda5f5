//! Maximum quasi-likelihood estimation: solves `Σ x_s (y_s − μ(βᵀx_s)) = 0`.

use crate::error::{check_dim, Error, Result};
use crate::glm::{FeatureVector, LinkFunction};
use crate::linalg::{dot, norm2, Matrix};

/// Pivot floor (relative to the largest diagonal entry) below which a Newton
/// system is treated as singular.
pub const SINGULAR_FLOOR: f64 = 1e-12;

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 100;

/// Append-only data set of `(x_s, y_s)` pairs.
///
/// The Gram matrix `Σ x xᵀ` and `Σ x y` are maintained alongside the rows so
/// identity-link solves cost O(d³) regardless of `t`.
#[derive(Debug, Clone)]
pub struct Dataset {
    dim: usize,
    xs: Vec<f64>,
    ys: Vec<f64>,
    gram: Matrix,
    xty: Vec<f64>,
}

impl Dataset {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            xs: Vec::new(),
            ys: Vec::new(),
            gram: Matrix::zeros(dim, dim),
            xty: vec![0.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ys.is_empty()
    }

    pub fn push(&mut self, x: &FeatureVector, y: f64) -> Result<()> {
        self.push_slice(x.as_slice(), y)
    }

    pub fn push_slice(&mut self, x: &[f64], y: f64) -> Result<()> {
        check_dim(self.dim, x.len())?;
        if !y.is_finite() || x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("non-finite observation".into()));
        }
        self.xs.extend_from_slice(x);
        self.ys.push(y);
        self.gram.add_outer(x, 1.0);
        for (acc, xi) in self.xty.iter_mut().zip(x) {
            *acc += xi * y;
        }
        Ok(())
    }

    pub fn rows(&self) -> impl Iterator<Item = (&[f64], f64)> {
        self.xs
            .chunks_exact(self.dim.max(1))
            .zip(self.ys.iter().copied())
    }

    /// `Σ x_s x_sᵀ`.
    pub fn gram(&self) -> &Matrix {
        &self.gram
    }

    pub fn xty(&self) -> &[f64] {
        &self.xty
    }
}

/// Solver output.
#[derive(Debug, Clone, PartialEq)]
pub struct BetaEstimate {
    pub beta: Vec<f64>,
    pub score_norm: f64,
    pub iterations: usize,
    pub projected: bool,
    pub converged: bool,
    pub beta_max: f64,
}

/// `Σ x_s (y_s − μ(βᵀx_s))`.
pub fn score(beta: &[f64], data: &Dataset, link: LinkFunction) -> Result<Vec<f64>> {
    check_dim(data.dim(), beta.len())?;
    Ok(score_unchecked(beta, data, link))
}

fn score_unchecked(beta: &[f64], data: &Dataset, link: LinkFunction) -> Vec<f64> {
    let mut g = vec![0.0; data.dim()];
    for (x, y) in data.rows() {
        let r = y - link.mean(dot(beta, x));
        for (gi, xi) in g.iter_mut().zip(x) {
            *gi += r * xi;
        }
    }
    g
}

/// `Σ μ̇(βᵀx_s) x_s x_sᵀ`, the negative Jacobian of the score.
fn jacobian(beta: &[f64], data: &Dataset, link: LinkFunction) -> Matrix {
    if link == LinkFunction::Identity {
        return data.gram().clone();
    }
    let d = data.dim();
    let mut j = Matrix::zeros(d, d);
    for (x, _) in data.rows() {
        let w = link.slope(dot(beta, x));
        for a in 0..d {
            let wa = w * x[a];
            for b in 0..=a {
                j[(a, b)] += wa * x[b];
            }
        }
    }
    for a in 0..d {
        for b in 0..a {
            j[(b, a)] = j[(a, b)];
        }
    }
    j
}

/// Damped Newton on the score with Euclidean projection onto `‖β‖ ≤ beta_max`.
///
/// Each Newton step is halved until the score norm decreases. A singular
/// Newton system falls back to a scaled gradient step. Iterates that leave
/// the ball by a wide margin stop the search early; the returned estimate is
/// then the projection of the last iterate.
pub fn solve_mqle(
    data: &Dataset,
    link: LinkFunction,
    init: &[f64],
    tol: f64,
    max_iter: usize,
    beta_max: f64,
) -> Result<BetaEstimate> {
    check_dim(data.dim(), init.len())?;
    if data.is_empty() {
        return Err(Error::Precondition(
            "MQLE needs at least one observation".into(),
        ));
    }
    if init.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("non-finite initial estimate".into()));
    }
    if !(tol > 0.0) || !(beta_max > 0.0) || max_iter == 0 {
        return Err(Error::Precondition(
            "tol, beta_max and max_iter must be positive".into(),
        ));
    }

    let mut beta = init.to_vec();
    let mut g = score_unchecked(&beta, data, link);
    let mut gnorm = norm2(&g);
    let mut iterations = 0;
    let escape = 10.0 * beta_max;

    while gnorm > tol && iterations < max_iter {
        iterations += 1;
        let jac = jacobian(&beta, data, link);
        let step = match jac.solve_spd(&g, SINGULAR_FLOOR) {
            Some(s) => s,
            None => {
                let lip: f64 = data.rows().map(|(x, _)| dot(x, x)).sum::<f64>() * link.lipschitz();
                g.iter().map(|v| v / lip.max(f64::MIN_POSITIVE)).collect()
            }
        };

        let mut scale = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let trial: Vec<f64> = beta.iter().zip(&step).map(|(b, s)| b + scale * s).collect();
            let tg = score_unchecked(&trial, data, link);
            let tn = norm2(&tg);
            if tn < gnorm {
                accepted = Some((trial, tg, tn));
                break;
            }
            scale *= 0.5;
        }
        let Some((b, tg, tn)) = accepted else {
            break;
        };
        beta = b;
        g = tg;
        gnorm = tn;
        if norm2(&beta) > escape {
            break;
        }
    }

    let norm = norm2(&beta);
    let projected = norm > beta_max;
    if projected {
        let s = beta_max / norm;
        beta.iter_mut().for_each(|v| *v *= s);
        gnorm = norm2(&score_unchecked(&beta, data, link));
    }
    Ok(BetaEstimate {
        converged: !projected && gnorm <= tol,
        beta,
        score_norm: gnorm,
        iterations,
        projected,
        beta_max,
    })
}

/// Recursive ridge regression for the identity link, holding
/// `(Σ x xᵀ + ridge·I)⁻¹` and `Σ x y`.
#[derive(Debug, Clone, PartialEq)]
pub struct OnlineRidge {
    inv: Matrix,
    xty: Vec<f64>,
    ridge: f64,
    count: usize,
}

impl OnlineRidge {
    pub fn new(link: LinkFunction, dim: usize, ridge: f64) -> Result<Self> {
        if link != LinkFunction::Identity {
            return Err(Error::Config(
                "rank-one recursive updates require the identity link".into(),
            ));
        }
        if !(ridge > 0.0 && ridge.is_finite()) {
            return Err(Error::InvalidField {
                field: "ridge".into(),
                reason: format!("must be positive and finite, got {ridge}"),
            });
        }
        Ok(Self {
            inv: Matrix::identity(dim).scale(1.0 / ridge),
            xty: vec![0.0; dim],
            ridge,
            count: 0,
        })
    }

    /// Sherman–Morrison: `(P⁻¹ + x xᵀ)⁻¹ = P − P x xᵀ P / (1 + xᵀ P x)`.
    pub fn update(&mut self, x: &[f64], y: f64) -> Result<()> {
        check_dim(self.xty.len(), x.len())?;
        let px = self.inv.matvec(x)?;
        let denom = 1.0 + dot(x, &px);
        let n = x.len();
        for i in 0..n {
            for j in 0..n {
                self.inv[(i, j)] -= px[i] * px[j] / denom;
            }
        }
        for (acc, xi) in self.xty.iter_mut().zip(x) {
            *acc += xi * y;
        }
        self.count += 1;
        Ok(())
    }

    pub fn estimate(&self) -> Vec<f64> {
        // dimension is consistent by construction
        self.inv.matvec(&self.xty).expect("square state")
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn ridge(&self) -> f64 {
        self.ridge
    }

    pub fn inverse(&self) -> &Matrix {
        &self.inv
    }
}
