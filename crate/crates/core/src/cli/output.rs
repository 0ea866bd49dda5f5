//! CSV and JSON writers. Numbers are written with 17 significant digits so
//! every value parses back to the identical `f64`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::simulator::{
    Aggregate, AggregateStep, MeanSe, Policy, ReplicationSummary, SimulationResult,
};

use super::config::ExperimentConfig;

pub const TRACE_HEADER: &str =
    "t,alpha,price,price_opt,beta_err_sq,lambda_min,regret_expected,regret_realized,regret_ratio";

pub const SWEEP_HEADER: &str = "eta,policy,reps,regret_ratio_mean,regret_ratio_se,beta_err_sq_mean,beta_err_sq_se,lambda_ratio_mean,lambda_ratio_se";

pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

/// One trace row per time step.
pub trait TraceSource {
    fn rows(&self) -> Vec<[Option<f64>; 9]>;
}

impl TraceSource for SimulationResult {
    fn rows(&self) -> Vec<[Option<f64>; 9]> {
        self.steps
            .iter()
            .map(|s| {
                let ratio = (s.t >= 2).then(|| crate::simulator::ratio_at(s.regret_expected, s.t));
                [
                    Some(s.t as f64),
                    Some(s.alpha),
                    Some(s.price),
                    Some(s.price_opt),
                    Some(s.beta_err_sq),
                    s.lambda_min,
                    Some(s.regret_expected),
                    Some(s.regret_realized),
                    ratio,
                ]
            })
            .collect()
    }
}

impl TraceSource for Aggregate {
    fn rows(&self) -> Vec<[Option<f64>; 9]> {
        self.steps
            .iter()
            .map(|s| {
                [
                    Some(s.t as f64),
                    Some(s.alpha),
                    Some(s.price),
                    Some(s.price_opt),
                    Some(s.beta_err_sq.mean),
                    s.lambda_min.map(|m| m.mean),
                    Some(s.regret_expected.mean),
                    Some(s.regret_realized.mean),
                    s.regret_ratio.map(|m| m.mean),
                ]
            })
            .collect()
    }
}

pub fn render_trace(src: &impl TraceSource) -> String {
    let mut out = String::from(TRACE_HEADER);
    out.push('\n');
    for row in src.rows() {
        let fields: Vec<String> = row
            .iter()
            .enumerate()
            .map(|(i, v)| match (i, v) {
                (0, Some(t)) => format!("{}", *t as u64),
                _ => fmt_opt(*v),
            })
            .collect();
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

pub(crate) fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("cannot create output directory {}: {e}", dir.display()),
        ))
    })
}

/// Writes `trace.csv` into `dir`.
pub fn emit_traces(src: &impl TraceSource, dir: &Path) -> Result<PathBuf> {
    ensure_dir(dir)?;
    let path = dir.join("trace.csv");
    fs::write(&path, render_trace(src))?;
    Ok(path)
}

/// Parses a `trace.csv` back into rows (empty fields become `None`).
pub fn parse_trace(text: &str) -> Result<Vec<[Option<f64>; 9]>> {
    let mut lines = text.lines();
    if lines.next() != Some(TRACE_HEADER) {
        return Err(Error::Config("unexpected trace header".into()));
    }
    lines
        .map(|line| {
            let mut row = [None; 9];
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 9 {
                return Err(Error::Config(format!("bad trace row `{line}`")));
            }
            for (slot, f) in row.iter_mut().zip(fields) {
                if !f.is_empty() {
                    *slot = Some(
                        f.parse::<f64>()
                            .map_err(|e| Error::Config(format!("{e}: `{f}`")))?,
                    );
                }
            }
            Ok(row)
        })
        .collect()
}

#[derive(Debug, Serialize)]
pub struct Checkpoint {
    pub t: u64,
    pub beta_err_sq: MeanSe,
    pub regret_expected: MeanSe,
    pub regret_realized: MeanSe,
    pub regret_ratio: Option<MeanSe>,
    pub lambda_min: Option<MeanSe>,
    pub lambda_ratio: Option<MeanSe>,
}

impl From<&AggregateStep> for Checkpoint {
    fn from(s: &AggregateStep) -> Self {
        Self {
            t: s.t,
            beta_err_sq: s.beta_err_sq,
            regret_expected: s.regret_expected,
            regret_realized: s.regret_realized,
            regret_ratio: s.regret_ratio,
            lambda_min: s.lambda_min,
            lambda_ratio: s.lambda_ratio,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct Summary<'a> {
    pub command: &'a str,
    pub policy: Policy,
    pub n_reps: usize,
    pub base_seed: u64,
    pub config: &'a ExperimentConfig,
    #[serde(rename = "final")]
    pub final_metrics: Checkpoint,
    pub checkpoints: Vec<Checkpoint>,
    pub replications: &'a [ReplicationSummary],
}

pub const CHECKPOINTS: [u64; 4] = [250, 500, 1000, 2000];

pub fn summary<'a>(command: &'a str, cfg: &'a ExperimentConfig, agg: &'a Aggregate) -> Summary<'a> {
    Summary {
        command,
        policy: agg.policy,
        n_reps: agg.n_reps,
        base_seed: agg.base_seed,
        config: cfg,
        final_metrics: agg.final_step().into(),
        checkpoints: CHECKPOINTS
            .iter()
            .filter_map(|&t| agg.step(t))
            .map(Checkpoint::from)
            .collect(),
        replications: &agg.replications,
    }
}

pub fn write_json(value: &impl Serialize, path: &Path) -> Result<()> {
    if let Some(parent) = path.parent() {
        ensure_dir(parent)?;
    }
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub eta: f64,
    pub policy: Policy,
    pub reps: usize,
    pub regret_ratio: MeanSe,
    pub beta_err_sq: MeanSe,
    pub lambda_ratio: MeanSe,
}

pub fn render_sweep(rows: &[SweepRow]) -> String {
    let mut out = String::from(SWEEP_HEADER);
    out.push('\n');
    for r in rows {
        let policy = match r.policy {
            Policy::Perturbed => "perturbed",
            Policy::Greedy => "greedy",
        };
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            fmt_f64(r.eta),
            policy,
            r.reps,
            fmt_f64(r.regret_ratio.mean),
            fmt_f64(r.regret_ratio.se),
            fmt_f64(r.beta_err_sq.mean),
            fmt_f64(r.beta_err_sq.se),
            fmt_f64(r.lambda_ratio.mean),
            fmt_f64(r.lambda_ratio.se),
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn seventeen_digits_round_trip(v in proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO) {
            prop_assert_eq!(fmt_f64(v).parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn mantissa_has_seventeen_digits() {
        let s = fmt_f64(0.1);
        let mantissa = s.split('e').next().unwrap().replace(['.', '-'], "");
        assert_eq!(mantissa.len(), 17);
    }
}
