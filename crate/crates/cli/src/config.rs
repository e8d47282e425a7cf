//! Experiment configuration: JSON parsing, defaults and validation.
//!
//! Defaults that depend on the problem:
//!
//! ```text
//!                 pricing   consensus_regression
//! algo.T          50000     10000
//! algo.epsilon    0.01      1/sqrt(T)
//! algo.delta      1e-5      1.0
//! ```
//!
//! Shared defaults: async mode, uniform delays with `tau_max = 10` (0 in sync
//! mode), 2000 Monte Carlo samples, seeds 0..=4, a 200000-step reference run,
//! output to `out/` with every snapshot kept.

use std::fmt;
use std::path::{Path, PathBuf};

use assp_core::apps::{ConsensusRegressionConfig, PricingConfig};
use assp_core::metrics::{DEFAULT_BURN_IN, DEFAULT_MC_SAMPLES};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const DEFAULT_TAU: usize = 10;
pub const DEFAULT_OPTIMUM_BUDGET: usize = 200_000;
pub const DEFAULT_AUDIT_SAMPLES: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Sync,
    Async,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DelayKindName {
    Zero,
    Fixed,
    Uniform,
    Table,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "name", content = "params", rename_all = "snake_case")]
pub enum ProblemConfig {
    Pricing(PricingConfig),
    ConsensusRegression(ConsensusRegressionConfig),
}

impl ProblemConfig {
    pub fn name(&self) -> &'static str {
        match self {
            ProblemConfig::Pricing(_) => "pricing",
            ProblemConfig::ConsensusRegression(_) => "consensus_regression",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlgoConfig {
    pub epsilon: f64,
    pub delta: f64,
    #[serde(rename = "T")]
    pub horizon: usize,
    pub mode: Mode,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DelayConfig {
    pub kind: DelayKindName,
    pub tau_max: usize,
    /// Offset added to the run seed to seed random delays.
    pub seed: u64,
    pub table: Option<Vec<Vec<usize>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalConfig {
    pub mc_samples: usize,
    pub optimum_budget: usize,
    pub seeds: Vec<u64>,
    /// Seed of the fixed Monte Carlo evaluation sample set.
    pub eval_seed: u64,
    /// Seed of the long synchronous reference run.
    pub optimum_seed: u64,
    /// Seed of random problem data such as regression weights.
    pub instance_seed: u64,
    pub burn_in: f64,
    pub audit_samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutputConfig {
    /// Left out of serialized summaries so they do not depend on where they
    /// were written.
    #[serde(skip)]
    pub dir: PathBuf,
    pub thin_every: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub problem: ProblemConfig,
    pub algo: AlgoConfig,
    pub delay: DelayConfig,
    pub eval: EvalConfig,
    pub output: OutputConfig,
}

/// Command-line overrides, applied before defaults are resolved.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seeds: Option<Vec<u64>>,
    pub out: Option<PathBuf>,
    pub tau: Option<usize>,
    pub horizon: Option<usize>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawProblem {
    Name(String),
    Block {
        name: String,
        #[serde(default)]
        params: Option<serde_json::Value>,
    },
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGraph {
    n_nodes: Option<usize>,
    edges: Option<Vec<(usize, usize)>>,
}

#[derive(Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
struct RawAlgo {
    epsilon: Option<f64>,
    delta: Option<f64>,
    #[serde(rename = "T")]
    horizon: Option<usize>,
    mode: Option<Mode>,
}

#[derive(Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
struct RawDelay {
    kind: Option<DelayKindName>,
    tau_max: Option<usize>,
    seed: Option<u64>,
    table: Option<Vec<Vec<usize>>>,
}

#[derive(Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
struct RawEval {
    mc_samples: Option<usize>,
    optimum_budget: Option<usize>,
    seeds: Option<Vec<u64>>,
    eval_seed: Option<u64>,
    optimum_seed: Option<u64>,
    instance_seed: Option<u64>,
    burn_in: Option<f64>,
    audit_samples: Option<usize>,
}

#[derive(Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
struct RawOutput {
    dir: Option<PathBuf>,
    thin_every: Option<usize>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    problem: RawProblem,
    #[serde(default)]
    graph: Option<RawGraph>,
    #[serde(default)]
    algo: RawAlgo,
    #[serde(default)]
    delay: RawDelay,
    #[serde(default)]
    eval: RawEval,
    #[serde(default)]
    output: RawOutput,
}

fn invalid(key: &str, message: impl fmt::Display) -> CliError {
    CliError::Validation {
        key: key.to_string(),
        message: message.to_string(),
    }
}

fn parse_params<T: DeserializeOwned + Default>(
    params: Option<serde_json::Value>,
) -> Result<T, CliError> {
    let Some(value) = params else {
        return Ok(T::default());
    };
    serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        let key = if path == "." {
            "problem.params".to_string()
        } else {
            format!("problem.params.{path}")
        };
        CliError::Parse {
            line: None,
            column: None,
            key,
            message: e.into_inner().to_string(),
        }
    })
}

/// Parses, fills defaults and validates a config file.
pub fn parse_config(path: &Path) -> Result<ExperimentConfig, CliError> {
    load_config(path, &Overrides::default())
}

pub fn load_config(path: &Path, overrides: &Overrides) -> Result<ExperimentConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::ConfigRead {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    parse_config_str(&text, overrides)
}

pub fn parse_config_str(text: &str, overrides: &Overrides) -> Result<ExperimentConfig, CliError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let raw: RawConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let key = e.path().to_string();
        let inner = e.into_inner();
        CliError::Parse {
            line: Some(inner.line()),
            column: Some(inner.column()),
            key,
            message: inner.to_string(),
        }
    })?;
    resolve(raw, overrides)
}

fn resolve(raw: RawConfig, ov: &Overrides) -> Result<ExperimentConfig, CliError> {
    let (name, params) = match raw.problem {
        RawProblem::Name(n) => (n, None),
        RawProblem::Block { name, params } => (name, params),
    };
    let mut problem = match name.as_str() {
        "pricing" => ProblemConfig::Pricing(parse_params(params)?),
        "consensus_regression" | "consensus" => {
            ProblemConfig::ConsensusRegression(parse_params(params)?)
        }
        other => {
            return Err(invalid(
                "problem.name",
                format!("unknown problem `{other}`; expected `pricing` or `consensus_regression`"),
            ))
        }
    };
    if let Some(g) = raw.graph {
        match &mut problem {
            ProblemConfig::ConsensusRegression(c) => {
                if let Some(n) = g.n_nodes {
                    c.n_nodes = n;
                }
                if g.edges.is_some() {
                    c.edges = g.edges;
                }
            }
            ProblemConfig::Pricing(_) => {
                return Err(invalid(
                    "graph",
                    "the pricing topology follows from `assignment`; remove the graph block",
                ))
            }
        }
    }
    match &problem {
        ProblemConfig::Pricing(p) => p.validate(),
        ProblemConfig::ConsensusRegression(c) => c.validate(),
    }
    .map_err(|e| invalid("problem.params", e))?;

    let pricing = matches!(problem, ProblemConfig::Pricing(_));
    let horizon = ov
        .horizon
        .or(raw.algo.horizon)
        .unwrap_or(if pricing { 50_000 } else { 10_000 });
    if horizon < 1 {
        return Err(invalid("algo.T", "T must be at least 1"));
    }
    let epsilon = raw.algo.epsilon.unwrap_or(if pricing {
        0.01
    } else {
        1.0 / (horizon as f64).sqrt()
    });
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(invalid(
            "algo.epsilon",
            format!("must be positive, got {epsilon}"),
        ));
    }
    let delta = raw.algo.delta.unwrap_or(if pricing { 1e-5 } else { 1.0 });
    if !(delta.is_finite() && delta >= 0.0) {
        return Err(invalid(
            "algo.delta",
            format!("must be nonnegative, got {delta}"),
        ));
    }
    let mode = raw.algo.mode.unwrap_or(Mode::Async);

    let tau_given = ov.tau.or(raw.delay.tau_max);
    let mut kind = raw.delay.kind.unwrap_or(if raw.delay.table.is_some() {
        DelayKindName::Table
    } else {
        DelayKindName::Uniform
    });
    let tau_max = match mode {
        Mode::Sync => {
            if let Some(t) = tau_given.filter(|&t| t > 0) {
                return Err(invalid(
                    "delay.tau_max",
                    format!("sync mode has no delays, got tau_max = {t}"),
                ));
            }
            kind = DelayKindName::Zero;
            0
        }
        Mode::Async if kind == DelayKindName::Zero => {
            if let Some(t) = tau_given.filter(|&t| t > 0) {
                return Err(invalid(
                    "delay.tau_max",
                    format!("delay kind `zero` conflicts with tau_max = {t}"),
                ));
            }
            0
        }
        Mode::Async => tau_given.unwrap_or(DEFAULT_TAU),
    };
    if kind == DelayKindName::Table {
        match &raw.delay.table {
            None => return Err(invalid("delay.table", "kind `table` needs a table")),
            Some(rows) if rows.is_empty() => {
                return Err(invalid("delay.table", "table must have at least one row"))
            }
            Some(rows) => {
                if rows.iter().flatten().any(|&d| d > tau_max) {
                    return Err(invalid(
                        "delay.table",
                        format!("entries must not exceed tau_max = {tau_max}"),
                    ));
                }
            }
        }
    }

    let seeds = ov
        .seeds
        .clone()
        .or(raw.eval.seeds)
        .unwrap_or_else(|| (0..5).collect());
    if seeds.is_empty() {
        return Err(invalid("eval.seeds", "at least one seed is required"));
    }
    let mc_samples = raw.eval.mc_samples.unwrap_or(DEFAULT_MC_SAMPLES);
    if mc_samples == 0 {
        return Err(invalid("eval.mc_samples", "must be positive"));
    }
    let burn_in = raw.eval.burn_in.unwrap_or(DEFAULT_BURN_IN);
    if !(0.0..1.0).contains(&burn_in) {
        return Err(invalid(
            "eval.burn_in",
            format!("must lie in [0, 1), got {burn_in}"),
        ));
    }
    let audit_samples = raw.eval.audit_samples.unwrap_or(DEFAULT_AUDIT_SAMPLES);
    if audit_samples < 100 {
        return Err(invalid("eval.audit_samples", "must be at least 100"));
    }
    let thin_every = raw.output.thin_every.unwrap_or(1);
    if thin_every == 0 {
        return Err(invalid("output.thin_every", "must be positive"));
    }

    Ok(ExperimentConfig {
        problem,
        algo: AlgoConfig {
            epsilon,
            delta,
            horizon,
            mode,
        },
        delay: DelayConfig {
            kind,
            tau_max,
            seed: raw.delay.seed.unwrap_or(0),
            table: raw.delay.table,
        },
        eval: EvalConfig {
            mc_samples,
            optimum_budget: raw.eval.optimum_budget.unwrap_or(DEFAULT_OPTIMUM_BUDGET),
            seeds,
            eval_seed: raw.eval.eval_seed.unwrap_or(777),
            optimum_seed: raw.eval.optimum_seed.unwrap_or(999),
            instance_seed: raw.eval.instance_seed.unwrap_or(0),
            burn_in,
            audit_samples,
        },
        output: OutputConfig {
            dir: ov
                .out
                .clone()
                .or(raw.output.dir)
                .unwrap_or_else(|| PathBuf::from("out")),
            thin_every,
        },
    })
}
