//! Suboptimality, constraint violation, rate fits and assumption estimates.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::problem::{Observation, ProblemSpec};
use crate::rng::{stream_rng, Stream};
use crate::saddle::{run_synchronous, Hyperparams, RunOptions, RunTrace};

/// Default number of Monte Carlo samples behind `F̂`.
pub const DEFAULT_MC_SAMPLES: usize = 2000;
/// Default fraction of a series discarded before fitting a rate.
pub const DEFAULT_BURN_IN: f64 = 0.2;

/// Monte Carlo estimator of `F(x) = Σ_i E[f^i(x^i, θ^i)]` and of the expected
/// slacks, over a fixed sample set drawn from a dedicated evaluation stream.
///
/// The same samples are reused for every point, so differences such as
/// `F̂(x_t) − F̂(x*)` carry no evaluation noise of their own.
#[derive(Debug, Clone)]
pub struct Evaluator {
    /// `samples[s][i]` is the `s`-th joint draw at node `i`.
    samples: Vec<Vec<Observation>>,
}

impl Evaluator {
    pub fn new(spec: &ProblemSpec, n_samples: usize, eval_seed: u64) -> Self {
        let n = spec.n_nodes();
        let samples = (0..n_samples.max(1))
            .map(|s| {
                (0..n)
                    .map(|i| {
                        let mut rng = stream_rng(eval_seed, Stream::Evaluation, i, s as u64);
                        spec.sample_from(&mut rng, i)
                    })
                    .collect()
            })
            .collect();
        Self { samples }
    }

    pub fn n_samples(&self) -> usize {
        self.samples.len()
    }

    pub fn objective(&self, spec: &ProblemSpec, x: &[Vec<f64>]) -> f64 {
        let objective = spec.objective();
        let mut total = 0.0;
        for (i, xi) in x.iter().enumerate() {
            let sum: f64 = self
                .samples
                .iter()
                .map(|draw| objective.value(i, xi, &draw[i]))
                .sum();
            total += sum / self.samples.len() as f64;
        }
        total
    }

    pub fn slacks(&self, spec: &ProblemSpec, x: &[Vec<f64>]) -> Vec<f64> {
        let mut acc = vec![0.0; spec.n_duals()];
        for draw in &self.samples {
            for (a, s) in acc.iter_mut().zip(spec.all_slacks(x, draw)) {
                *a += s;
            }
        }
        let n = self.samples.len() as f64;
        acc.iter().map(|a| a / n).collect()
    }
}

/// Reference optimum from a long synchronous run.
///
/// Returns `F̂(x̂)` and `x̂`, the average of the iterates over the second half
/// of the run (the initial point when `budget = 0`).
pub fn estimate_optimum(
    spec: &ProblemSpec,
    hp: Hyperparams,
    budget: usize,
    seed: u64,
    evaluator: &Evaluator,
) -> Result<(f64, Vec<Vec<f64>>)> {
    let hp = Hyperparams {
        horizon: budget,
        ..hp
    };
    let trace = run_synchronous(
        spec,
        hp,
        seed,
        RunOptions {
            thin_every: 1,
            evaluator: None,
            track_current_slack: false,
        },
    )?;
    let start = if budget == 0 { 0 } else { budget / 2 + 1 };
    let mut avg: Vec<Vec<f64>> = spec
        .initial_point()
        .iter()
        .map(|x| vec![0.0; x.len()])
        .collect();
    let mut count = 0usize;
    for (t, x) in trace.snapshots() {
        if t < start {
            continue;
        }
        for (a, xi) in avg.iter_mut().zip(x) {
            for (ak, v) in a.iter_mut().zip(xi) {
                *ak += v;
            }
        }
        count += 1;
    }
    for a in &mut avg {
        for v in a.iter_mut() {
            *v /= count as f64;
        }
    }
    Ok((evaluator.objective(spec, &avg), avg))
}

/// Prefix sums.
pub fn cumulative(values: &[f64]) -> Vec<f64> {
    values
        .iter()
        .scan(0.0, |acc, v| {
            *acc += v;
            Some(*acc)
        })
        .collect()
}

/// `s_t = (1/t) Σ_{u<=t} (v_u − F*)` for `t = 1..=len`.
pub fn running_suboptimality(values: &[f64], f_star: f64) -> Vec<f64> {
    let gaps: Vec<f64> = values.iter().map(|v| v - f_star).collect();
    cumulative(&gaps)
        .into_iter()
        .enumerate()
        .map(|(k, c)| c / (k + 1) as f64)
        .collect()
}

/// `[Σ_{u<=t} s_u]_+` for `t = 1..=len`.
pub fn clipped_cumsum(slacks: &[f64]) -> Vec<f64> {
    cumulative(slacks).into_iter().map(|c| c.max(0.0)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ViolationSeries {
    /// Clipped cumulative delayed slack per multiplier.
    pub per_constraint: Vec<Vec<f64>>,
    /// Sum over multipliers.
    pub aggregate: Vec<f64>,
}

/// Clipped cumulative violation of the delayed slacks, for rows `1..=T`.
pub fn delayed_violation(trace: &RunTrace) -> ViolationSeries {
    let steps = &trace.rows[1.min(trace.rows.len())..];
    let m = steps.first().map_or(0, |r| r.delayed_slack.len());
    let per_constraint: Vec<Vec<f64>> = (0..m)
        .map(|k| {
            let s: Vec<f64> = steps.iter().map(|r| r.delayed_slack[k]).collect();
            clipped_cumsum(&s)
        })
        .collect();
    let aggregate = (0..steps.len())
        .map(|t| per_constraint.iter().map(|v| v[t]).sum())
        .collect();
    ViolationSeries {
        per_constraint,
        aggregate,
    }
}

/// Least-squares slope of `log v_t` against `log t` (`t` is 1-based) over the
/// positive entries after discarding the first `burn_in` fraction.
pub fn fit_rate(series: &[f64], burn_in: f64) -> Result<f64> {
    let start = ((series.len() as f64) * burn_in.clamp(0.0, 1.0)).floor() as usize;
    let points: Vec<(f64, f64)> = series
        .iter()
        .enumerate()
        .skip(start)
        .filter(|(_, v)| **v > 0.0 && v.is_finite())
        .map(|(k, v)| (((k + 1) as f64).ln(), v.ln()))
        .collect();
    if points.len() < 10 {
        return Err(Error::DegenerateSeries {
            positive: points.len(),
        });
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = points.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
    Ok(sxy / sxx)
}

/// Empirical stand-ins for the bounded-moment and Lipschitz assumptions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AssumptionEstimates {
    /// Max over nodes and sampled points of `E‖∇f‖²`.
    pub sigma_f_sq: f64,
    /// Max over constraints and sampled points of `E‖∇h‖²`.
    pub sigma_h_sq: f64,
    /// Max over constraints and sampled points of `E[(h − γ)²]`.
    pub sigma_lambda_sq: f64,
    /// Largest secant slope `|F̂(x) − F̂(y)| / ‖x − y‖`.
    pub lipschitz_f: f64,
}

/// Observation draws averaged per sampled point.
const AUDIT_DRAWS_PER_POINT: usize = 16;

/// Monte Carlo estimates of the assumption constants over `n_samples` random
/// feasible points.
pub fn audit_assumptions(
    spec: &ProblemSpec,
    n_samples: usize,
    seed: u64,
) -> Result<AssumptionEstimates> {
    if n_samples < 100 {
        return Err(Error::InvalidConfig(format!(
            "assumption audit needs at least 100 samples, got {n_samples}"
        )));
    }
    let n = spec.n_nodes();
    let evaluator = Evaluator::new(spec, 200, seed ^ 0x5eed);
    let mut sigma_f_sq: f64 = 0.0;
    let mut sigma_h_sq: f64 = 0.0;
    let mut sigma_lambda_sq: f64 = 0.0;
    let mut lipschitz_f: f64 = 0.0;
    let mut prev: Option<(Vec<Vec<f64>>, f64)> = None;

    for p in 0..n_samples {
        let mut rng = stream_rng(seed, Stream::Audit, 0, p as u64);
        let x: Vec<Vec<f64>> = (0..n)
            .map(|i| spec.domain(i).sample_point(&mut rng))
            .collect();
        let mut grad_f = vec![0.0; n];
        let mut grad_h = vec![0.0; spec.n_duals()];
        let mut slack_sq = vec![0.0; spec.n_duals()];
        for d in 0..AUDIT_DRAWS_PER_POINT {
            let mut obs_rng = stream_rng(seed, Stream::Audit, 1 + d, p as u64);
            let theta: Vec<Observation> =
                (0..n).map(|i| spec.sample_from(&mut obs_rng, i)).collect();
            for i in 0..n {
                grad_f[i] += norm_sq(&spec.objective().grad(i, &x[i], &theta[i]));
            }
            for (k, s) in spec.all_slacks(&x, &theta).iter().enumerate() {
                slack_sq[k] += s * s;
            }
            for (k, g) in constraint_grad_norms(spec, &x, &theta).iter().enumerate() {
                grad_h[k] += g;
            }
        }
        let draws = AUDIT_DRAWS_PER_POINT as f64;
        sigma_f_sq = grad_f.iter().fold(sigma_f_sq, |m, v| m.max(v / draws));
        sigma_h_sq = grad_h.iter().fold(sigma_h_sq, |m, v| m.max(v / draws));
        sigma_lambda_sq = slack_sq
            .iter()
            .fold(sigma_lambda_sq, |m, v| m.max(v / draws));

        let fx = evaluator.objective(spec, &x);
        if let Some((y, fy)) = &prev {
            let dist = x
                .iter()
                .zip(y)
                .map(|(a, b)| norm_sq_diff(a, b))
                .sum::<f64>()
                .sqrt();
            if dist > 1e-12 {
                lipschitz_f = lipschitz_f.max((fx - fy).abs() / dist);
            }
        }
        prev = Some((x, fx));
    }
    Ok(AssumptionEstimates {
        sigma_f_sq,
        sigma_h_sq,
        sigma_lambda_sq,
        lipschitz_f,
    })
}

/// Squared norm of the full gradient of each scalar constraint.
fn constraint_grad_norms(spec: &ProblemSpec, x: &[Vec<f64>], theta: &[Observation]) -> Vec<f64> {
    use crate::problem::{local_view, Arg, ConstraintFamily};
    let graph = spec.graph();
    match spec.constraints() {
        ConstraintFamily::Pairwise { h, .. } => graph
            .edges()
            .iter()
            .map(|&(i, j)| {
                norm_sq(&h.grad(i, j, Arg::First, &x[i], &x[j], &theta[i], &theta[j]))
                    + norm_sq(&h.grad(i, j, Arg::Second, &x[i], &x[j], &theta[i], &theta[j]))
            })
            .collect(),
        ConstraintFamily::Neighborhood(h) => {
            let mut out = Vec::with_capacity(spec.n_duals());
            for k in 0..spec.n_nodes() {
                let count = h.count(k);
                if count == 0 {
                    continue;
                }
                let nbhd = graph.closed_neighborhood(k);
                let local = local_view(&nbhd, x, theta);
                let mut sq = vec![0.0; count];
                for pos in 0..nbhd.len() {
                    for (r, row) in h.jacobian(k, pos, &local).iter().enumerate() {
                        sq[r] += norm_sq(row);
                    }
                }
                out.extend(sq);
            }
            out
        }
    }
}

fn norm_sq(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum()
}

fn norm_sq_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Counts of invariant breaches in a trace.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct InvariantAudit {
    pub negative_duals: usize,
    pub domain_violations: usize,
    pub staleness_exceeded: usize,
    pub nonmonotone_indices: usize,
}

impl InvariantAudit {
    pub fn passed(&self) -> bool {
        *self == Self::default()
    }

    pub fn merge(self, other: Self) -> Self {
        Self {
            negative_duals: self.negative_duals + other.negative_duals,
            domain_violations: self.domain_violations + other.domain_violations,
            staleness_exceeded: self.staleness_exceeded + other.staleness_exceeded,
            nonmonotone_indices: self.nonmonotone_indices + other.nonmonotone_indices,
        }
    }
}

/// Checks `λ_t >= 0`, `x_t ∈ X`, `t − [t]_i <= τ` and monotone `[t]_i`.
pub fn audit_trace(spec: &ProblemSpec, trace: &RunTrace) -> InvariantAudit {
    let mut audit = InvariantAudit {
        domain_violations: trace.domain_violations,
        ..InvariantAudit::default()
    };
    let mut prev: Option<&Vec<usize>> = None;
    for row in &trace.rows {
        if row.lambda_min < 0.0 {
            audit.negative_duals += 1;
        }
        if let Some(x) = &row.x {
            if !spec.contains(x, 1e-9) {
                audit.domain_violations += 1;
            }
        }
        if row.t == 0 {
            continue;
        }
        let step = row.t - 1;
        if row
            .resolved
            .iter()
            .any(|&s| s > step || step - s > trace.tau_max)
        {
            audit.staleness_exceeded += 1;
        }
        if let Some(p) = prev {
            if p.iter().zip(&row.resolved).any(|(a, b)| b < a) {
                audit.nonmonotone_indices += 1;
            }
        }
        prev = Some(&row.resolved);
    }
    audit
}
