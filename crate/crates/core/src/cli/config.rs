//! Flat JSON experiment configuration with command-line overrides.
//!
//! Every key is optional; missing keys take the defaults of the reference
//! experiment (T = 2000, η = 1/4, box [0.5, 5], price coefficients (1, −0.5),
//! 15 context dimensions, 20 replications). Unknown keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::glm::{LinkFunction, NoiseModel};
use crate::perturbation::{PerturbationDist, PerturbationSchedule};
use crate::revenue::PriceBox;
use crate::simulator::SimulationConfig;

pub const DEFAULT_REPS: usize = 20;
pub const DEFAULT_HALF_WIDTH: f64 = 0.5;
pub const DEFAULT_ETAS: [f64; 3] = [0.125, 0.25, 0.375];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    Uniform,
    Bernoulli,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbationKind {
    UniformCube,
    UnitCoordinate,
}

/// On-disk form: all keys optional.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    #[serde(rename = "T")]
    horizon: Option<u64>,
    eta: Option<f64>,
    context_dim: Option<usize>,
    link: Option<LinkFunction>,
    noise: Option<NoiseKind>,
    noise_half_width: Option<f64>,
    price_lower: Option<f64>,
    price_upper: Option<f64>,
    beta_price: Option<Vec<f64>>,
    context_coefficients: Option<Vec<f64>>,
    perturbation: Option<PerturbationKind>,
    u_max: Option<f64>,
    beta_max: Option<f64>,
    beta_init: Option<Vec<f64>>,
    clamp_perturbed_price: Option<bool>,
    opt_tol: Option<f64>,
    mqle_tol: Option<f64>,
    mqle_max_iter: Option<usize>,
    seed: Option<u64>,
    reps: Option<usize>,
    etas: Option<Vec<f64>>,
}

/// Fully resolved configuration. Serializes to the same flat key set the
/// file parser accepts, so `parse(emit(c)) == c`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    #[serde(rename = "T")]
    pub horizon: u64,
    pub eta: f64,
    pub context_dim: usize,
    pub link: LinkFunction,
    pub noise: NoiseKind,
    pub noise_half_width: f64,
    pub price_lower: f64,
    pub price_upper: f64,
    pub beta_price: Vec<f64>,
    pub context_coefficients: Option<Vec<f64>>,
    pub perturbation: PerturbationKind,
    pub u_max: f64,
    pub beta_max: Option<f64>,
    pub beta_init: Option<Vec<f64>>,
    pub clamp_perturbed_price: bool,
    pub opt_tol: f64,
    pub mqle_tol: f64,
    pub mqle_max_iter: usize,
    pub seed: u64,
    pub reps: usize,
    pub etas: Vec<f64>,
}

/// Flag overrides; flags win over the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub horizon: Option<u64>,
    pub eta: Option<f64>,
    pub seed: Option<u64>,
    pub reps: Option<usize>,
    pub link: Option<LinkFunction>,
}

impl ExperimentConfig {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn simulation(&self) -> SimulationConfig {
        SimulationConfig {
            horizon: self.horizon,
            eta: self.eta,
            context_dim: self.context_dim,
            beta_price: self.beta_price.clone(),
            context_coefficients: self.context_coefficients.clone(),
            link: self.link,
            noise: match self.noise {
                NoiseKind::Uniform => NoiseModel::AdditiveUniform {
                    half_width: self.noise_half_width,
                },
                NoiseKind::Bernoulli => NoiseModel::Bernoulli,
            },
            price_box: PriceBox {
                lower: self.price_lower,
                upper: self.price_upper,
            },
            perturbation: match self.perturbation {
                PerturbationKind::UniformCube => {
                    PerturbationDist::UniformCube { u_max: self.u_max }
                }
                PerturbationKind::UnitCoordinate => PerturbationDist::UnitCoordinate,
            },
            beta_max: self.beta_max,
            beta_init: self.beta_init.clone(),
            clamp_perturbed_price: self.clamp_perturbed_price,
            opt_tol: self.opt_tol,
            mqle_tol: self.mqle_tol,
            mqle_max_iter: self.mqle_max_iter,
            seed: self.seed,
        }
    }

    fn validate(&self) -> Result<()> {
        PerturbationSchedule::new(self.eta)?;
        if self.horizon == 0 {
            return Err(field("T", "must be at least 1".into()));
        }
        if !(self.price_lower.is_finite() && self.price_upper.is_finite())
            || self.price_lower >= self.price_upper
        {
            return Err(field(
                "price_lower",
                format!(
                    "price_lower ({}) must be below price_upper ({})",
                    self.price_lower, self.price_upper
                ),
            ));
        }
        if self.reps == 0 {
            return Err(field("reps", "must be at least 1".into()));
        }
        for &e in &self.etas {
            PerturbationSchedule::new(e)
                .map_err(|_| field("etas", format!("every eta must lie in [0, 1/2), got {e}")))?;
        }
        self.simulation().validate()
    }
}

fn field(name: &str, reason: String) -> Error {
    Error::InvalidField {
        field: name.into(),
        reason,
    }
}

pub fn parse_config_str(text: &str, overrides: &Overrides) -> Result<ExperimentConfig> {
    let file: FileConfig = if text.trim().is_empty() {
        FileConfig::default()
    } else {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("malformed config: {e}")))?
    };
    resolve(file, overrides)
}

pub fn parse_config(path: Option<&Path>, overrides: &Overrides) -> Result<ExperimentConfig> {
    match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", p.display())))?;
            parse_config_str(&text, overrides)
        }
        None => parse_config_str("", overrides),
    }
}

fn resolve(f: FileConfig, o: &Overrides) -> Result<ExperimentConfig> {
    let defaults = SimulationConfig::default();
    let link = o.link.or(f.link).unwrap_or(LinkFunction::Identity);
    let noise = f.noise.unwrap_or(match link {
        LinkFunction::Identity => NoiseKind::Uniform,
        LinkFunction::Logistic => NoiseKind::Bernoulli,
    });
    let cfg = ExperimentConfig {
        horizon: o.horizon.or(f.horizon).unwrap_or(defaults.horizon),
        eta: o.eta.or(f.eta).unwrap_or(defaults.eta),
        context_dim: f.context_dim.unwrap_or(defaults.context_dim),
        link,
        noise,
        noise_half_width: f.noise_half_width.unwrap_or(DEFAULT_HALF_WIDTH),
        price_lower: f.price_lower.unwrap_or(defaults.price_box.lower),
        price_upper: f.price_upper.unwrap_or(defaults.price_box.upper),
        beta_price: f.beta_price.unwrap_or(defaults.beta_price),
        context_coefficients: f.context_coefficients,
        perturbation: f.perturbation.unwrap_or(PerturbationKind::UniformCube),
        u_max: f.u_max.unwrap_or(1.0),
        beta_max: f.beta_max,
        beta_init: f.beta_init,
        clamp_perturbed_price: f
            .clamp_perturbed_price
            .unwrap_or(defaults.clamp_perturbed_price),
        opt_tol: f.opt_tol.unwrap_or(defaults.opt_tol),
        mqle_tol: f.mqle_tol.unwrap_or(defaults.mqle_tol),
        mqle_max_iter: f.mqle_max_iter.unwrap_or(defaults.mqle_max_iter),
        seed: o.seed.or(f.seed).unwrap_or(0),
        reps: o.reps.or(f.reps).unwrap_or(DEFAULT_REPS),
        etas: f.etas.unwrap_or_else(|| DEFAULT_ETAS.to_vec()),
    };
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_gives_reference_defaults() {
        let c = parse_config_str("", &Overrides::default()).unwrap();
        assert_eq!(c.horizon, 2000);
        assert_eq!(c.eta, 0.25);
        assert_eq!((c.price_lower, c.price_upper), (0.5, 5.0));
        assert_eq!(c.beta_price, vec![1.0, -0.5]);
        assert_eq!(c.context_dim, 15);
        assert_eq!(c.link, LinkFunction::Identity);
        assert_eq!(c.noise, NoiseKind::Uniform);
        assert_eq!(c.reps, 20);
        assert_eq!(parse_config_str("{}", &Overrides::default()).unwrap(), c);
    }

    #[test]
    fn rejects_bad_eta_with_field_name() {
        let err = parse_config_str(r#"{"eta": 0.6}"#, &Overrides::default()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("eta") && msg.contains("1/2"), "{msg}");
        assert!(parse_config_str(r#"{"eta": -0.1}"#, &Overrides::default()).is_err());
    }

    #[test]
    fn rejects_inverted_box() {
        let err = parse_config_str(
            r#"{"price_lower": 2, "price_upper": 2}"#,
            &Overrides::default(),
        )
        .unwrap_err();
        assert!(err.to_string().contains("price_lower"));
    }

    #[test]
    fn rejects_unknown_and_malformed() {
        assert!(parse_config_str(r#"{"etaa": 0.2}"#, &Overrides::default()).is_err());
        assert!(parse_config_str(r#"{"eta": "x"}"#, &Overrides::default()).is_err());
        assert!(parse_config_str("{", &Overrides::default()).is_err());
    }

    #[test]
    fn flags_override_file() {
        let o = Overrides {
            eta: Some(0.375),
            ..Overrides::default()
        };
        let c = parse_config_str(r#"{"eta": 0.25, "T": 10}"#, &o).unwrap();
        assert_eq!(c.eta, 0.375);
        assert_eq!(c.horizon, 10);
    }

    #[test]
    fn logistic_defaults_to_bernoulli() {
        let o = Overrides {
            link: Some(LinkFunction::Logistic),
            ..Overrides::default()
        };
        let c = parse_config_str("", &o).unwrap();
        assert_eq!(c.noise, NoiseKind::Bernoulli);
        assert!(parse_config_str(r#"{"noise": "bernoulli"}"#, &Overrides::default()).is_err());
    }

    #[test]
    fn round_trips() {
        let c = parse_config_str(
            r#"{"T": 321, "link": "logistic", "beta_max": 7.5, "context_dim": 2,
                "context_coefficients": [0.1, -0.30000000000000004], "etas": [0.1]}"#,
            &Overrides::default(),
        )
        .unwrap();
        let back = parse_config_str(&c.to_json(), &Overrides::default()).unwrap();
        assert_eq!(back, c);
    }
}
