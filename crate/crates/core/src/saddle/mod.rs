//! The saddle-point engine.
//!
//! The regularized stochastic Lagrangian is
//!
//! ```text
//! L̂(x, λ) = Σ_i f^i(x^i, θ^i) + Σ_m [ λ_m s_m(x, θ) − (δε/2) λ_m² ]
//! ```
//!
//! where `s_m` ranges over the constraint slacks (one per directed edge, or
//! one per neighborhood component). The asynchronous method steps
//! `x_{t+1} = P_X[x_t − ε ∇_x L̂(x_[t], λ_t)]` and
//! `λ_{t+1} = [(1 − ε²δ) λ_t + ε s(x_[t])]_+`, with every gradient evaluated
//! at the stale iterates and observations `[t]_i`.

mod advisor;
mod engine;
mod sync;
mod trace;

pub use advisor::{advise, AdvisorConstants};
pub use engine::{run, run_generalized, run_with_hook, Engine, RunOptions, StepInfo};
pub use sync::run_synchronous;
pub use trace::{RunTrace, TraceRow};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::{local_view, ConstraintFamily, Observation, ProblemSpec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    /// Constant step size ε.
    pub epsilon: f64,
    /// Dual regularizer δ.
    pub delta: f64,
    /// Number of iterations T.
    pub horizon: usize,
}

impl Hyperparams {
    pub fn new(epsilon: f64, delta: f64, horizon: usize) -> Result<Self> {
        let hp = Self {
            epsilon,
            delta,
            horizon,
        };
        hp.validate()?;
        Ok(hp)
    }

    /// `ε = 1/√T`.
    pub fn for_horizon(horizon: usize, delta: f64) -> Result<Self> {
        Self::new(1.0 / (horizon.max(1) as f64).sqrt(), delta, horizon)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon.is_finite() && self.epsilon >= 0.0) {
            return Err(Error::InvalidHyperparams(format!(
                "epsilon must be finite and nonnegative, got {}",
                self.epsilon
            )));
        }
        if !(self.delta.is_finite() && self.delta >= 0.0) {
            return Err(Error::InvalidHyperparams(format!(
                "delta must be finite and nonnegative, got {}",
                self.delta
            )));
        }
        let decay = self.dual_decay();
        if !(decay > 0.0 && decay <= 1.0) {
            return Err(Error::InvalidHyperparams(format!(
                "1 - eps^2 delta = {decay} must lie in (0, 1]"
            )));
        }
        Ok(())
    }

    /// The dual contraction factor `1 − ε²δ`.
    pub fn dual_decay(&self) -> f64 {
        1.0 - self.epsilon * self.epsilon * self.delta
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SaddleState {
    pub t: usize,
    pub x: Vec<Vec<f64>>,
    /// Flat multipliers: one per directed edge (pairwise family) or the
    /// concatenated per-node vectors (neighborhood family).
    pub lambda: Vec<f64>,
}

impl SaddleState {
    /// `x_0` from the problem, `λ_0 = 0`.
    pub fn initial(spec: &ProblemSpec) -> Self {
        Self {
            t: 0,
            x: spec.initial_point(),
            lambda: vec![0.0; spec.n_duals()],
        }
    }

    pub fn lambda_norm(&self) -> f64 {
        self.lambda.iter().map(|l| l * l).sum::<f64>().sqrt()
    }
}

/// Value of the regularized stochastic Lagrangian at `(x, λ)` with per-node
/// observations `theta`.
pub fn stochastic_lagrangian(
    spec: &ProblemSpec,
    hp: &Hyperparams,
    x: &[Vec<f64>],
    lambda: &[f64],
    theta: &[Observation],
) -> f64 {
    let reg = 0.5 * hp.delta * hp.epsilon;
    let slacks = spec.all_slacks(x, theta);
    let dual: f64 = lambda
        .iter()
        .zip(&slacks)
        .map(|(l, s)| l * s - reg * l * l)
        .sum();
    spec.total_objective(x, theta) + dual
}

/// `∇_x L̂(x, λ)` for every node.
pub fn lagrangian_primal_gradient(
    spec: &ProblemSpec,
    x: &[Vec<f64>],
    lambda: &[f64],
    theta: &[Observation],
) -> Vec<Vec<f64>> {
    let graph = spec.graph();
    let objective = spec.objective();
    match spec.constraints() {
        ConstraintFamily::Pairwise { h, .. } => (0..spec.n_nodes())
            .map(|i| {
                let mut g = objective.grad(i, &x[i], &theta[i]);
                for &j in graph.neighbors(i) {
                    let out_edge = graph.edge_id(i, j).expect("edge (i, j)");
                    let in_edge = graph.edge_id(j, i).expect("edge (j, i)");
                    let d_out = h.grad(
                        i,
                        j,
                        crate::problem::Arg::First,
                        &x[i],
                        &x[j],
                        &theta[i],
                        &theta[j],
                    );
                    let d_in = h.grad(
                        j,
                        i,
                        crate::problem::Arg::Second,
                        &x[j],
                        &x[i],
                        &theta[j],
                        &theta[i],
                    );
                    for ((gk, a), b) in g.iter_mut().zip(&d_out).zip(&d_in) {
                        *gk += lambda[out_edge] * a + lambda[in_edge] * b;
                    }
                }
                g
            })
            .collect(),
        ConstraintFamily::Neighborhood(h) => {
            let nbhds: Vec<Vec<usize>> = (0..spec.n_nodes())
                .map(|k| graph.closed_neighborhood(k))
                .collect();
            (0..spec.n_nodes())
                .map(|i| {
                    let mut g = objective.grad(i, &x[i], &theta[i]);
                    for &k in &nbhds[i] {
                        if h.count(k) == 0 {
                            continue;
                        }
                        let local = local_view(&nbhds[k], x, theta);
                        let pos = nbhds[k]
                            .iter()
                            .position(|&j| j == i)
                            .expect("symmetric neighborhoods");
                        let jac = h.jacobian(k, pos, &local);
                        let duals = &lambda[spec.dual_range(k)];
                        for (row, l) in jac.iter().zip(duals) {
                            for (gk, r) in g.iter_mut().zip(row) {
                                *gk += l * r;
                            }
                        }
                    }
                    g
                })
                .collect()
        }
    }
}

/// `λ⁺ = [(1 − ε²δ) λ + ε s]_+`, componentwise.
pub fn dual_update(hp: &Hyperparams, lambda: &[f64], slacks: &[f64]) -> Vec<f64> {
    let decay = hp.dual_decay();
    lambda
        .iter()
        .zip(slacks)
        .map(|(l, s)| (decay * l + hp.epsilon * s).max(0.0))
        .collect()
}

/// `x⁺ = P_X[x − ε g]`, node by node.
pub fn primal_update(
    spec: &ProblemSpec,
    hp: &Hyperparams,
    x: &[Vec<f64>],
    grad: &[Vec<f64>],
) -> Vec<Vec<f64>> {
    x.iter()
        .zip(grad)
        .enumerate()
        .map(|(i, (xi, gi))| {
            let u: Vec<f64> = xi.iter().zip(gi).map(|(a, g)| a - hp.epsilon * g).collect();
            spec.domain(i).project_unchecked(&u)
        })
        .collect()
}
