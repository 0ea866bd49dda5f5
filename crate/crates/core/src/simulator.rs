//! End-to-end perturbed certainty-equivalent pricing episodes.
//!
//! Each step: draw a context, price at the certainty-equivalent optimum plus
//! a shrinking perturbation, observe a response, and re-solve the MQLE on all
//! data so far (warm-started from the previous estimate).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{map_indexed, Execution};
use crate::glm::{draw, LinkFunction, NoiseModel};
use crate::linalg::{dist_sq, dot, norm2};
use crate::mqle::{solve_mqle, Dataset, SINGULAR_FLOOR};
use crate::perturbation::{PerturbationDist, PerturbationSchedule};
use crate::revenue::{PriceBox, RevenueModel};
use crate::spectral::DesignAccumulator;

/// Sub-stream ids derived from the master seed.
const STREAM_COEFFICIENTS: u64 = 0;
const STREAM_CONTEXTS: u64 = 1;
const STREAM_NOISE: u64 = 2;
const STREAM_PERTURBATION: u64 = 3;

/// Context coordinates are standard normal truncated (by rejection) to this bound.
pub const CONTEXT_TRUNCATION: f64 = 6.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub horizon: u64,
    pub eta: f64,
    pub context_dim: usize,
    /// Intercept and price coefficient, `(β_int, β_price)`.
    pub beta_price: Vec<f64>,
    /// Context coefficients; drawn i.i.d. N(0, 1) from the seed when `None`.
    pub context_coefficients: Option<Vec<f64>>,
    pub link: LinkFunction,
    pub noise: NoiseModel,
    pub price_box: PriceBox,
    pub perturbation: PerturbationDist,
    /// Projection radius; `2‖β₀‖` when `None`.
    pub beta_max: Option<f64>,
    /// Initial estimate; zero when `None`.
    pub beta_init: Option<Vec<f64>>,
    /// Clamp perturbed prices into the box. Off by default: the policy
    /// perturbs around the (always feasible) certainty-equivalent price.
    pub clamp_perturbed_price: bool,
    pub opt_tol: f64,
    pub mqle_tol: f64,
    pub mqle_max_iter: usize,
    pub seed: u64,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            horizon: 2000,
            eta: 0.25,
            context_dim: 15,
            beta_price: vec![1.0, -0.5],
            context_coefficients: None,
            link: LinkFunction::Identity,
            noise: NoiseModel::AdditiveUniform { half_width: 0.5 },
            price_box: PriceBox {
                lower: 0.5,
                upper: 5.0,
            },
            perturbation: PerturbationDist::UniformCube { u_max: 1.0 },
            beta_max: None,
            beta_init: None,
            clamp_perturbed_price: false,
            opt_tol: crate::revenue::DEFAULT_OPT_TOL,
            mqle_tol: crate::mqle::DEFAULT_TOL,
            mqle_max_iter: crate::mqle::DEFAULT_MAX_ITER,
            seed: 0,
        }
    }
}

impl SimulationConfig {
    /// The logistic experiment: same parameters, Bernoulli responses.
    pub fn logistic() -> Self {
        Self {
            link: LinkFunction::Logistic,
            noise: NoiseModel::Bernoulli,
            ..Self::default()
        }
    }

    pub fn dim(&self) -> usize {
        self.beta_price.len() + self.context_dim
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(invalid("T", "horizon must be at least 1"));
        }
        PerturbationSchedule::new(self.eta)?;
        PriceBox::new(self.price_box.lower, self.price_box.upper)?;
        self.noise.validate(self.link)?;
        self.perturbation.validate()?;
        if self.beta_price.len() != 2 {
            return Err(invalid(
                "beta_price",
                "expected (intercept, price) of length 2",
            ));
        }
        if let Some(cc) = &self.context_coefficients {
            if cc.len() != self.context_dim {
                return Err(invalid(
                    "context_coefficients",
                    &format!("expected length {}, got {}", self.context_dim, cc.len()),
                ));
            }
        }
        if let Some(b) = &self.beta_init {
            if b.len() != self.dim() || b.iter().any(|v| !v.is_finite()) {
                return Err(invalid(
                    "beta_init",
                    &format!("expected {} finite values", self.dim()),
                ));
            }
        }
        if let Some(r) = self.beta_max {
            if !(r > 0.0 && r.is_finite()) {
                return Err(invalid("beta_max", "must be positive and finite"));
            }
        }
        if !(self.opt_tol > 0.0) || !(self.mqle_tol > 0.0) || self.mqle_max_iter == 0 {
            return Err(invalid(
                "opt_tol/mqle_tol/mqle_max_iter",
                "must be positive",
            ));
        }
        Ok(())
    }

    /// True parameter `β₀ = (β_price, β_context)`.
    pub fn beta0(&self) -> Vec<f64> {
        let mut b = self.beta_price.clone();
        b.extend(self.resolved_context_coefficients());
        b
    }

    pub fn resolved_context_coefficients(&self) -> Vec<f64> {
        match &self.context_coefficients {
            Some(c) => c.clone(),
            None => {
                let mut rng = stream(self.seed, STREAM_COEFFICIENTS);
                (0..self.context_dim)
                    .map(|_| rng.sample(StandardNormal))
                    .collect()
            }
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            seed,
            ..self.clone()
        }
    }
}

fn invalid(field: &str, reason: &str) -> Error {
    Error::InvalidField {
        field: field.into(),
        reason: reason.into(),
    }
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

fn truncated_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let z: f64 = rng.sample(StandardNormal);
        if z.abs() <= CONTEXT_TRUNCATION {
            return z;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Policy {
    /// Certainty-equivalent price plus `α_t u_t`.
    Perturbed,
    /// Certainty-equivalent price only (`α_t ≡ 0`).
    Greedy,
}

impl Policy {
    /// Schedule whose `Σ α_s²` normalizes `λ_min(t)`: the configured one for
    /// the perturbed policy, all ones for greedy.
    pub fn reference_schedule(self, eta: f64) -> PerturbationSchedule {
        let eta = match self {
            Policy::Perturbed => eta,
            Policy::Greedy => 0.0,
        };
        PerturbationSchedule::new(eta).expect("validated eta")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: u64,
    pub context: Vec<f64>,
    pub alpha: f64,
    pub price: f64,
    pub price_opt: f64,
    pub response: f64,
    pub expected_reward: f64,
    pub optimal_reward: f64,
    pub realized_reward: f64,
    pub beta_err_sq: f64,
    pub lambda_min: Option<f64>,
    pub regret_expected: f64,
    pub regret_realized: f64,
    /// The estimator did not produce a usable update at this step.
    pub solver_flag: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationResult {
    pub config: SimulationConfig,
    pub policy: Policy,
    pub beta0: Vec<f64>,
    pub beta_final: Vec<f64>,
    pub steps: Vec<StepRecord>,
}

impl SimulationResult {
    pub fn horizon(&self) -> u64 {
        self.steps.len() as u64
    }

    pub fn cumulative_regret(&self) -> f64 {
        self.steps.last().map_or(0.0, |s| s.regret_expected)
    }

    pub fn cumulative_realized_regret(&self) -> f64 {
        self.steps.last().map_or(0.0, |s| s.regret_realized)
    }

    pub fn final_beta_err_sq(&self) -> f64 {
        self.steps.last().map_or(f64::NAN, |s| s.beta_err_sq)
    }

    /// `(t, λ_min(V_t))` at the recorded steps.
    pub fn lambda_trace(&self) -> Vec<(u64, f64)> {
        self.steps
            .iter()
            .filter_map(|s| s.lambda_min.map(|l| (s.t, l)))
            .collect()
    }

    /// `λ_min(t) / Σ_{s≤t} α_s²` along the recorded trace.
    pub fn lambda_ratio_trace(&self) -> Vec<(u64, f64)> {
        let trace = self.lambda_trace();
        let ratios = crate::spectral::lambda_growth_ratio(
            &trace,
            &self.policy.reference_schedule(self.config.eta),
        );
        trace.iter().map(|(t, _)| *t).zip(ratios).collect()
    }

    /// `Σ_t (realized − expected reward)`.
    pub fn reward_martingale(&self) -> f64 {
        self.steps
            .iter()
            .map(|s| s.realized_reward - s.expected_reward)
            .sum()
    }

    /// Largest expected revenue attainable on the box over the episode's contexts.
    pub fn max_optimal_reward(&self) -> f64 {
        self.steps
            .iter()
            .map(|s| s.optimal_reward)
            .fold(0.0, f64::max)
    }

    pub fn flagged_steps(&self) -> usize {
        self.steps.iter().filter(|s| s.solver_flag).count()
    }
}

/// Cumulative expected regret at `t` over `√t · ln t`.
pub fn regret_ratio(result: &SimulationResult, t: u64) -> Result<f64> {
    if t < 2 {
        return Err(Error::Precondition("regret ratio needs t ≥ 2".into()));
    }
    let step = result
        .steps
        .get((t - 1) as usize)
        .ok_or_else(|| Error::Precondition(format!("t = {t} beyond horizon")))?;
    Ok(ratio_at(step.regret_expected, t))
}

pub(crate) fn ratio_at(regret: f64, t: u64) -> f64 {
    let tf = t as f64;
    regret / (tf.sqrt() * tf.ln())
}

pub fn run_episode(config: &SimulationConfig) -> Result<SimulationResult> {
    simulate(config, Policy::Perturbed)
}

pub fn greedy_baseline(config: &SimulationConfig) -> Result<SimulationResult> {
    simulate(config, Policy::Greedy)
}

pub fn simulate(config: &SimulationConfig, policy: Policy) -> Result<SimulationResult> {
    config.validate()?;
    let d = config.dim();
    let beta0 = config.beta0();
    let beta_max = config.beta_max.unwrap_or(2.0 * norm2(&beta0));
    let schedule = PerturbationSchedule::new(config.eta)?;
    let model = RevenueModel::new(config.link);
    let pbox = config.price_box;

    let mut ctx_rng = stream(config.seed, STREAM_CONTEXTS);
    let mut noise_rng = stream(config.seed, STREAM_NOISE);
    let mut pert_rng = stream(config.seed, STREAM_PERTURBATION);

    let mut beta_hat = config.beta_init.clone().unwrap_or_else(|| vec![0.0; d]);
    let mut data = Dataset::new(d);
    let mut design = DesignAccumulator::new(d);
    let mut steps = Vec::with_capacity(config.horizon as usize);
    let (mut regret_e, mut regret_r) = (0.0, 0.0);

    for t in 1..=config.horizon {
        let context: Vec<f64> = (0..config.context_dim)
            .map(|_| truncated_normal(&mut ctx_rng))
            .collect();

        let p_ce = model
            .curve(&context, &beta_hat)?
            .argmax(&pbox, config.opt_tol);
        let alpha = match policy {
            Policy::Perturbed => schedule.alpha_unchecked(t),
            Policy::Greedy => 0.0,
        };
        // drawn under both policies so the streams stay paired
        let u = config.perturbation.sample(1, &mut pert_rng)[0];
        let mut price = p_ce + alpha * u;
        if config.clamp_perturbed_price {
            price = pbox.clamp(price);
        }

        let truth = model.curve(&context, &beta0)?;
        let mean = truth.demand(price);
        let response = draw(mean, &config.noise, &mut noise_rng);
        let price_opt = truth.argmax(&pbox, config.opt_tol);
        let optimal_reward = truth.value(price_opt);
        let expected_reward = price * mean;
        let realized_reward = price * response;
        regret_e += optimal_reward - expected_reward;
        regret_r += optimal_reward - realized_reward;

        let mut x = Vec::with_capacity(d);
        x.push(1.0);
        x.push(price);
        x.extend_from_slice(&context);
        data.push_slice(&x, response)?;
        design.push(&x)?;

        let mut solver_flag = false;
        if t as usize >= d && data.gram().cholesky(SINGULAR_FLOOR).is_some() {
            match solve_mqle(
                &data,
                config.link,
                &beta_hat,
                config.mqle_tol,
                config.mqle_max_iter,
                beta_max,
            ) {
                Ok(est) if est.beta.iter().all(|v| v.is_finite()) => {
                    solver_flag = !est.converged && !est.projected;
                    beta_hat = est.beta;
                }
                _ => solver_flag = true,
            }
        }

        let lambda_min = if DesignAccumulator::is_due(t) || t == config.horizon {
            Some(design.record()?)
        } else {
            None
        };

        steps.push(StepRecord {
            t,
            context,
            alpha,
            price,
            price_opt,
            response,
            expected_reward,
            optimal_reward,
            realized_reward,
            beta_err_sq: dist_sq(&beta_hat, &beta0),
            lambda_min,
            regret_expected: regret_e,
            regret_realized: regret_r,
            solver_flag,
        });
    }

    Ok(SimulationResult {
        config: config.clone(),
        policy,
        beta0,
        beta_final: beta_hat,
        steps,
    })
}

/// Mean and standard error of the mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanSe {
    pub mean: f64,
    pub se: f64,
}

impl MeanSe {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Self {
                mean: f64::NAN,
                se: f64::NAN,
            };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let se = if n > 1 {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        } else {
            0.0
        };
        Self { mean, se }
    }
}

/// Per-step means across replications.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateStep {
    pub t: u64,
    pub alpha: f64,
    pub price: f64,
    pub price_opt: f64,
    pub beta_err_sq: MeanSe,
    pub lambda_min: Option<MeanSe>,
    pub lambda_ratio: Option<MeanSe>,
    pub regret_expected: MeanSe,
    pub regret_realized: MeanSe,
    pub regret_ratio: Option<MeanSe>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationSummary {
    pub seed: u64,
    pub context_coefficients: Vec<f64>,
    pub final_beta_err_sq: f64,
    pub final_regret_expected: f64,
    pub final_regret_realized: f64,
    pub reward_martingale: f64,
    pub max_optimal_reward: f64,
    pub flagged_steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub config: SimulationConfig,
    pub policy: Policy,
    pub n_reps: usize,
    pub base_seed: u64,
    pub steps: Vec<AggregateStep>,
    pub replications: Vec<ReplicationSummary>,
}

impl Aggregate {
    pub fn final_step(&self) -> &AggregateStep {
        self.steps.last().expect("horizon ≥ 1")
    }

    pub fn step(&self, t: u64) -> Option<&AggregateStep> {
        self.steps.get(t.checked_sub(1)? as usize)
    }
}

pub fn run_replications(
    config: &SimulationConfig,
    n_reps: usize,
    base_seed: u64,
) -> Result<Aggregate> {
    run_replications_with(
        config,
        Policy::Perturbed,
        n_reps,
        base_seed,
        Execution::default(),
    )
}

pub fn run_replications_with(
    config: &SimulationConfig,
    policy: Policy,
    n_reps: usize,
    base_seed: u64,
    exec: Execution,
) -> Result<Aggregate> {
    if n_reps == 0 {
        return Err(Error::InvalidField {
            field: "reps".into(),
            reason: "need at least one replication".into(),
        });
    }
    config.validate()?;
    let episodes: Vec<SimulationResult> = map_indexed(n_reps, exec, |i| {
        simulate(&config.with_seed(base_seed.wrapping_add(i as u64)), policy)
    })
    .into_iter()
    .collect::<Result<_>>()?;
    Ok(aggregate(config, policy, base_seed, &episodes))
}

/// Sequential reduction over episodes in index order.
pub fn aggregate(
    config: &SimulationConfig,
    policy: Policy,
    base_seed: u64,
    episodes: &[SimulationResult],
) -> Aggregate {
    let horizon = config.horizon as usize;
    let ratios: Vec<Vec<(u64, f64)>> = episodes.iter().map(|e| e.lambda_ratio_trace()).collect();
    let mut ratio_cursor = vec![0usize; episodes.len()];
    let n = episodes.len() as f64;
    let mut steps = Vec::with_capacity(horizon);

    for i in 0..horizon {
        let col = |f: &dyn Fn(&StepRecord) -> f64| -> Vec<f64> {
            episodes.iter().map(|e| f(&e.steps[i])).collect()
        };
        let t = (i + 1) as u64;
        let lambdas: Vec<f64> = episodes
            .iter()
            .filter_map(|e| e.steps[i].lambda_min)
            .collect();
        let lambda_min = (lambdas.len() == episodes.len()).then(|| MeanSe::of(&lambdas));
        let lambda_ratio = lambda_min.map(|_| {
            let r: Vec<f64> = ratios
                .iter()
                .zip(ratio_cursor.iter_mut())
                .map(|(tr, cur)| {
                    while tr[*cur].0 < t {
                        *cur += 1;
                    }
                    tr[*cur].1
                })
                .collect();
            MeanSe::of(&r)
        });
        let regret = col(&|s| s.regret_expected);
        let regret_ratio = (t >= 2).then(|| {
            let r: Vec<f64> = regret.iter().map(|g| ratio_at(*g, t)).collect();
            MeanSe::of(&r)
        });
        steps.push(AggregateStep {
            t,
            alpha: col(&|s| s.alpha).iter().sum::<f64>() / n,
            price: col(&|s| s.price).iter().sum::<f64>() / n,
            price_opt: col(&|s| s.price_opt).iter().sum::<f64>() / n,
            beta_err_sq: MeanSe::of(&col(&|s| s.beta_err_sq)),
            lambda_min,
            lambda_ratio,
            regret_expected: MeanSe::of(&regret),
            regret_realized: MeanSe::of(&col(&|s| s.regret_realized)),
            regret_ratio,
        });
    }

    let replications = episodes
        .iter()
        .map(|e| ReplicationSummary {
            seed: e.config.seed,
            context_coefficients: e.beta0[e.config.beta_price.len()..].to_vec(),
            final_beta_err_sq: e.final_beta_err_sq(),
            final_regret_expected: e.cumulative_regret(),
            final_regret_realized: e.cumulative_realized_regret(),
            reward_martingale: e.reward_martingale(),
            max_optimal_reward: e.max_optimal_reward(),
            flagged_steps: e.flagged_steps(),
        })
        .collect();

    Aggregate {
        config: config.clone(),
        policy,
        n_reps: episodes.len(),
        base_seed,
        steps,
        replications,
    }
}

/// `4 √(2 r_max T log T)`.
pub fn azuma_envelope(r_max: f64, horizon: u64) -> f64 {
    let t = horizon as f64;
    4.0 * (2.0 * r_max * t * t.ln()).sqrt()
}

/// Linear predictor `βᵀ(1, q, c)`; exposed for diagnostics.
pub fn linear_predictor(beta: &[f64], q: f64, context: &[f64]) -> f64 {
    beta[0] + beta[1] * q + dot(&beta[2..], context)
}
