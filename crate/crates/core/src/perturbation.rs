//! Decreasing exploration schedule `α_t = t^(−η)` and the i.i.d. perturbations `u_t`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::revenue::PriceBox;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbationSchedule {
    eta: f64,
}

impl PerturbationSchedule {
    pub fn new(eta: f64) -> Result<Self> {
        if !(0.0..0.5).contains(&eta) {
            return Err(Error::InvalidField {
                field: "eta".into(),
                reason: format!("must lie in [0, 1/2), got {eta}"),
            });
        }
        Ok(Self { eta })
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn alpha(&self, t: u64) -> Result<f64> {
        if t == 0 {
            return Err(Error::Precondition("schedule is indexed from t = 1".into()));
        }
        Ok(self.alpha_unchecked(t))
    }

    #[inline]
    pub(crate) fn alpha_unchecked(&self, t: u64) -> f64 {
        (t as f64).powf(-self.eta)
    }

    /// Integral-test bracket for `Σ_{s≤t} α_s²`.
    pub fn alpha_sq_sum_bounds(&self, t: u64) -> (f64, f64) {
        let gamma = 2.0 * self.eta;
        let t = t.max(1) as f64;
        let integral = (t.powf(1.0 - gamma) - 1.0) / (1.0 - gamma);
        (integral, 1.0 + integral)
    }

    /// `Σ_{s≤t} α_s²` by direct summation.
    pub fn alpha_sq_sum(&self, t: u64) -> f64 {
        (1..=t).map(|s| (s as f64).powf(-2.0 * self.eta)).sum()
    }
}

/// Same bracket as [`PerturbationSchedule::alpha_sq_sum_bounds`].
pub fn alpha_sq_sum_bounds(schedule: &PerturbationSchedule, t: u64) -> (f64, f64) {
    schedule.alpha_sq_sum_bounds(t)
}

/// Distribution of the perturbation direction over the free price coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PerturbationDist {
    /// Uniform on `[−u_max, u_max]^m`.
    UniformCube { u_max: f64 },
    /// Uniform on `{±e_1, …, ±e_m}`.
    UnitCoordinate,
}

impl Default for PerturbationDist {
    fn default() -> Self {
        PerturbationDist::UniformCube { u_max: 1.0 }
    }
}

impl PerturbationDist {
    pub fn validate(&self) -> Result<()> {
        if let PerturbationDist::UniformCube { u_max } = self {
            if !(u_max.is_finite() && *u_max > 0.0) {
                return Err(Error::InvalidField {
                    field: "u_max".into(),
                    reason: format!("must be positive and finite, got {u_max}"),
                });
            }
        }
        Ok(())
    }

    /// Per-coordinate variance; the covariance is this times the identity.
    pub fn variance(&self, dim: usize) -> f64 {
        match self {
            PerturbationDist::UniformCube { u_max } => u_max * u_max / 3.0,
            PerturbationDist::UnitCoordinate => 1.0 / dim.max(1) as f64,
        }
    }

    /// Almost-sure bound on `‖u‖_∞`.
    pub fn bound(&self) -> f64 {
        match self {
            PerturbationDist::UniformCube { u_max } => *u_max,
            PerturbationDist::UnitCoordinate => 1.0,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, dim: usize, rng: &mut R) -> Vec<f64> {
        match self {
            PerturbationDist::UniformCube { u_max } => (0..dim)
                .map(|_| {
                    let v: f64 = rng.random();
                    u_max * (2.0 * v - 1.0)
                })
                .collect(),
            PerturbationDist::UnitCoordinate => {
                let mut u = vec![0.0; dim];
                if dim > 0 {
                    let i = rng.random_range(0..dim);
                    u[i] = if rng.random::<bool>() { 1.0 } else { -1.0 };
                }
                u
            }
        }
    }
}

pub fn sample_perturbation<R: Rng + ?Sized>(
    dist: &PerturbationDist,
    dim: usize,
    rng: &mut R,
) -> Vec<f64> {
    dist.sample(dim, rng)
}

/// `clamp(p_ce + α·u, box)` for a single free price.
pub fn perturbed_price(p_ce: f64, alpha_t: f64, u: &[f64], price_box: &PriceBox) -> Result<f64> {
    check_dim(1, u.len())?;
    Ok(price_box.clamp(p_ce + alpha_t * u[0]))
}
