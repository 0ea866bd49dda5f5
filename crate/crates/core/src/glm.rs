//! Link functions, the response model `y = μ(β₀ᵀx) + ε`, and feature assembly.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::linalg::dot;

/// GLM mean function μ.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LinkFunction {
    Identity,
    Logistic,
}

impl LinkFunction {
    /// Lipschitz constant of μ on the real line.
    pub fn lipschitz(self) -> f64 {
        match self {
            LinkFunction::Identity => 1.0,
            LinkFunction::Logistic => 0.25,
        }
    }

    /// μ(z) without the finiteness check; used on hot paths where `z` is
    /// already known to be finite.
    #[inline]
    pub fn mean(self, z: f64) -> f64 {
        match self {
            LinkFunction::Identity => z,
            LinkFunction::Logistic => sigmoid(z),
        }
    }

    /// μ̇(z), unchecked.
    #[inline]
    pub fn slope(self, z: f64) -> f64 {
        match self {
            LinkFunction::Identity => 1.0,
            LinkFunction::Logistic => {
                let s = sigmoid(z);
                s * (1.0 - s)
            }
        }
    }
}

impl std::str::FromStr for LinkFunction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "identity" | "linear" => Ok(LinkFunction::Identity),
            "logistic" | "logit" => Ok(LinkFunction::Logistic),
            other => Err(Error::InvalidField {
                field: "link".into(),
                reason: format!("unknown link `{other}` (expected identity|logistic)"),
            }),
        }
    }
}

#[inline]
fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

pub fn link_eval(link: LinkFunction, z: f64) -> Result<f64> {
    if !z.is_finite() {
        return Err(Error::Domain(format!("link argument {z}")));
    }
    Ok(link.mean(z))
}

pub fn link_derivative(link: LinkFunction, z: f64) -> Result<f64> {
    if !z.is_finite() {
        return Err(Error::Domain(format!("link argument {z}")));
    }
    Ok(link.slope(z))
}

/// Response noise. `AdditiveUniform` draws ε ~ U[−w, w]; `Bernoulli` draws
/// `y ∈ {0, 1}` with success probability μ(β₀ᵀx).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseModel {
    AdditiveUniform { half_width: f64 },
    Bernoulli,
}

impl NoiseModel {
    /// Almost-sure bound on |ε|.
    pub fn bound(&self) -> f64 {
        match self {
            NoiseModel::AdditiveUniform { half_width } => *half_width,
            NoiseModel::Bernoulli => 1.0,
        }
    }

    pub fn validate(&self, link: LinkFunction) -> Result<()> {
        match self {
            NoiseModel::AdditiveUniform { half_width } => {
                if !(half_width.is_finite() && *half_width >= 0.0) {
                    return Err(Error::InvalidField {
                        field: "noise_half_width".into(),
                        reason: format!("must be finite and non-negative, got {half_width}"),
                    });
                }
            }
            NoiseModel::Bernoulli => {
                if link != LinkFunction::Logistic {
                    return Err(Error::Config(
                        "Bernoulli responses require the logistic link".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Feature vector `x = (p, c)`: the price block followed by the context.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    x: Vec<f64>,
    price_len: usize,
}

impl FeatureVector {
    pub fn new(price: &[f64], context: &[f64]) -> Self {
        let mut x = Vec::with_capacity(price.len() + context.len());
        x.extend_from_slice(price);
        x.extend_from_slice(context);
        Self {
            x,
            price_len: price.len(),
        }
    }

    /// Price block `(1, q)` with a fixed intercept.
    pub fn with_intercept(q: f64, context: &[f64]) -> Self {
        Self::new(&[1.0, q], context)
    }

    pub fn from_raw(x: Vec<f64>) -> Self {
        let price_len = x.len();
        Self { x, price_len }
    }

    pub fn price(&self) -> &[f64] {
        &self.x[..self.price_len]
    }

    pub fn context(&self) -> &[f64] {
        &self.x[self.price_len..]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.x
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    pub fn within(&self, p_max: f64, c_max: f64) -> bool {
        self.price().iter().all(|v| v.abs() <= p_max)
            && self.context().iter().all(|v| v.abs() <= c_max)
    }
}

/// Draws a response with conditional mean μ(β₀ᵀx).
pub fn sample_response<R: Rng + ?Sized>(
    link: LinkFunction,
    noise: &NoiseModel,
    beta0: &[f64],
    x: &FeatureVector,
    rng: &mut R,
) -> Result<f64> {
    check_dim(beta0.len(), x.dim())?;
    noise.validate(link)?;
    let z = dot(beta0, x.as_slice());
    let mean = link_eval(link, z)?;
    Ok(draw(mean, noise, rng))
}

#[inline]
pub(crate) fn draw<R: Rng + ?Sized>(mean: f64, noise: &NoiseModel, rng: &mut R) -> f64 {
    match noise {
        NoiseModel::AdditiveUniform { half_width } => {
            let u: f64 = rng.random();
            mean + half_width * (2.0 * u - 1.0)
        }
        NoiseModel::Bernoulli => {
            let u: f64 = rng.random();
            if u < mean {
                1.0
            } else {
                0.0
            }
        }
    }
}

/// Smallest μ̇(βᵀx) over a grid of feature vectors; a diagnostic stand-in for
/// the curvature constant κ.
pub fn min_slope_over(link: LinkFunction, beta: &[f64], xs: &[FeatureVector]) -> Option<f64> {
    xs.iter()
        .map(|x| link.slope(dot(beta, x.as_slice())))
        .reduce(f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn grid() -> impl Iterator<Item = f64> {
        (0..1000).map(|i| -10.0 + 20.0 * i as f64 / 999.0)
    }

    #[test]
    fn link_values() {
        assert_eq!(link_eval(LinkFunction::Identity, 0.7).unwrap(), 0.7);
        assert_eq!(link_eval(LinkFunction::Logistic, 0.0).unwrap(), 0.5);
        // 1 / (1 + 1/3)
        let v = link_eval(LinkFunction::Logistic, 3f64.ln()).unwrap();
        assert!((v - 0.75).abs() < 1e-15);
        assert!(link_eval(LinkFunction::Logistic, f64::NAN).is_err());
        assert!(link_derivative(LinkFunction::Identity, f64::INFINITY).is_err());
    }

    #[test]
    fn derivative_values() {
        assert_eq!(link_derivative(LinkFunction::Identity, -3.2).unwrap(), 1.0);
        assert_eq!(link_derivative(LinkFunction::Logistic, 0.0).unwrap(), 0.25);
        let h = 1e-6;
        for z in -4..=4 {
            let z = z as f64;
            let fd = (sigmoid(z + h) - sigmoid(z - h)) / (2.0 * h);
            let d = link_derivative(LinkFunction::Logistic, z).unwrap();
            assert!((fd - d).abs() < 1e-6, "z={z}");
        }
    }

    #[test]
    fn monotone_and_lipschitz_on_grid() {
        for link in [LinkFunction::Identity, LinkFunction::Logistic] {
            let zs: Vec<f64> = grid().collect();
            for w in zs.windows(2) {
                let (a, b) = (link.mean(w[0]), link.mean(w[1]));
                assert!(a < b);
                assert!((b - a).abs() <= link.lipschitz() * (w[1] - w[0]) + 1e-15);
            }
            for z in zs {
                assert!(link.slope(z) > 0.0);
                let h = 1e-6;
                let fd = (link.mean(z + h) - link.mean(z - h)) / (2.0 * h);
                assert!((fd - link.slope(z)).abs() <= 1e-6);
            }
        }
        assert!(grid().all(|z| {
            let m = sigmoid(z);
            m > 0.0 && m < 1.0
        }));
    }

    #[test]
    fn zero_width_noise_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = FeatureVector::from_raw(vec![1.0, 0.3]);
        let y = sample_response(
            LinkFunction::Identity,
            &NoiseModel::AdditiveUniform { half_width: 0.0 },
            &[1.0, 1.0],
            &x,
            &mut rng,
        )
        .unwrap();
        assert_eq!(y, 1.3);
    }

    #[test]
    fn bernoulli_mean_and_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x = FeatureVector::from_raw(vec![0.0]);
        let n = 100_000;
        let mut sum = 0.0;
        for _ in 0..n {
            let y = sample_response(
                LinkFunction::Logistic,
                &NoiseModel::Bernoulli,
                &[1.0],
                &x,
                &mut rng,
            )
            .unwrap();
            let eps = y - 0.5;
            assert!((-1.0..=1.0).contains(&eps));
            assert!(y == 0.0 || y == 1.0);
            sum += y;
        }
        assert!((sum / n as f64 - 0.5).abs() <= 0.01);
    }

    #[test]
    fn uniform_noise_mean_and_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let noise = NoiseModel::AdditiveUniform { half_width: 0.5 };
        let beta = [0.4, -1.0];
        let x = FeatureVector::from_raw(vec![1.0, 2.0]);
        let z = dot(&beta, x.as_slice());
        let n = 100_000;
        let mut sum = 0.0;
        for _ in 0..n {
            let eps =
                sample_response(LinkFunction::Identity, &noise, &beta, &x, &mut rng).unwrap() - z;
            assert!(eps.abs() <= 0.5);
            sum += eps;
        }
        assert!((sum / n as f64).abs() <= 0.005);
    }

    #[test]
    fn configuration_errors() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let x = FeatureVector::from_raw(vec![1.0]);
        assert!(matches!(
            sample_response(
                LinkFunction::Identity,
                &NoiseModel::Bernoulli,
                &[0.0],
                &x,
                &mut rng
            ),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            sample_response(
                LinkFunction::Logistic,
                &NoiseModel::Bernoulli,
                &[0.0, 1.0],
                &x,
                &mut rng
            ),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn feature_vector_concatenates() {
        let f = FeatureVector::with_intercept(2.5, &[0.1, -0.2]);
        assert_eq!(f.as_slice(), &[1.0, 2.5, 0.1, -0.2]);
        assert_eq!(f.price(), &[1.0, 2.5]);
        assert_eq!(f.context(), &[0.1, -0.2]);
        assert!(f.within(5.0, 1.0));
        assert!(!f.within(2.0, 1.0));
    }
}
