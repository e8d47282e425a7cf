//! Decentralized linear regression with approximate consensus.
//!
//! Node `i` streams pairs `(z, y)` with `y = w_iᵀ z + noise` and fits
//! `f^i = ½ (zᵀ x^i − y)²`, while `‖x^i − x^j‖ <= γ_ij` keeps neighboring
//! models close without forcing them to agree.

use std::sync::Arc;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::domain::DomainSpec;
use crate::error::{Error, Result};
use crate::graph::NetworkGraph;
use crate::problem::{
    ConstraintFamily, LeastSquares, NormProximity, Observation, ProblemSpec, Sampler,
};
use crate::rng::{stream_rng, Stream, StreamRng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConsensusRegressionConfig {
    pub n_nodes: usize,
    /// Undirected edges; a ring over `n_nodes` when absent.
    pub edges: Option<Vec<(usize, usize)>>,
    /// Feature dimension `p`.
    pub dim: usize,
    /// Proximity tolerance on every edge.
    pub gamma: f64,
    /// Per-edge tolerances in edge-id order; overrides `gamma`.
    pub gamma_per_edge: Option<Vec<f64>>,
    /// Shared part of the ground-truth weights; one entry applies to every
    /// coordinate.
    pub weight_base: Vec<f64>,
    /// Scale of the seeded per-node perturbation of the weights.
    pub weight_spread: f64,
    /// Explicit per-node weights; override `weight_base` and `weight_spread`.
    pub weights: Option<Vec<Vec<f64>>>,
    /// Mean of every feature coordinate.
    pub feature_mean: f64,
    pub noise_std: f64,
    /// Box `[-box_bound, box_bound]^p`.
    pub box_bound: f64,
}

impl Default for ConsensusRegressionConfig {
    fn default() -> Self {
        Self {
            n_nodes: 5,
            edges: None,
            dim: 4,
            gamma: 0.5,
            gamma_per_edge: None,
            weight_base: vec![1.5, -1.5, 3.0, 0.75],
            weight_spread: 0.5,
            weights: None,
            feature_mean: 0.0,
            noise_std: 0.5,
            box_bound: 5.0,
        }
    }
}

impl ConsensusRegressionConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.n_nodes == 0 || self.dim == 0 {
            return bad("n_nodes and dim must be positive".into());
        }
        if !(self.gamma.is_finite() && self.gamma >= 0.0) {
            return bad(format!(
                "gamma must be finite and nonnegative, got {}",
                self.gamma
            ));
        }
        if !(self.box_bound.is_finite() && self.box_bound > 0.0) {
            return bad(format!(
                "box_bound must be positive, got {}",
                self.box_bound
            ));
        }
        if !(self.noise_std.is_finite() && self.noise_std >= 0.0) {
            return bad(format!(
                "noise_std must be nonnegative, got {}",
                self.noise_std
            ));
        }
        if !(self.weight_spread.is_finite() && self.weight_spread >= 0.0) {
            return bad(format!(
                "weight_spread must be nonnegative, got {}",
                self.weight_spread
            ));
        }
        if !self.feature_mean.is_finite() {
            return bad("feature_mean must be finite".into());
        }
        if self.weight_base.len() != 1 && self.weight_base.len() != self.dim {
            return bad(format!(
                "weight_base has {} entries, expected 1 or {}",
                self.weight_base.len(),
                self.dim
            ));
        }
        if let Some(w) = &self.weights {
            if w.len() != self.n_nodes || w.iter().any(|wi| wi.len() != self.dim) {
                return bad(format!(
                    "weights must be {} vectors of length {}",
                    self.n_nodes, self.dim
                ));
            }
        }
        Ok(())
    }

    fn graph(&self) -> Result<NetworkGraph> {
        match &self.edges {
            Some(e) => NetworkGraph::new(self.n_nodes, e),
            None if self.n_nodes <= 2 => NetworkGraph::path(self.n_nodes),
            None => NetworkGraph::ring(self.n_nodes),
        }
    }

    /// Ground-truth weights `w_i`, drawn from the instance stream of `seed`.
    pub fn ground_truth(&self, seed: u64) -> Vec<Vec<f64>> {
        if let Some(w) = &self.weights {
            return w.clone();
        }
        (0..self.n_nodes)
            .map(|i| {
                let mut rng = stream_rng(seed, Stream::Instance, i, 0);
                (0..self.dim)
                    .map(|k| {
                        let base =
                            self.weight_base[if self.weight_base.len() == 1 { 0 } else { k }];
                        let xi: f64 = StandardNormal.sample(&mut rng);
                        base + self.weight_spread * xi
                    })
                    .collect()
            })
            .collect()
    }
}

/// `z ~ N(m·1, I)`, `y = w_iᵀ z + σ ξ`; observations are `(z, y)`.
#[derive(Debug, Clone)]
pub struct RegressionSampler {
    pub weights: Vec<Vec<f64>>,
    pub feature_mean: f64,
    pub noise_std: f64,
}

impl Sampler for RegressionSampler {
    fn sample(&self, node: usize, rng: &mut StreamRng) -> Observation {
        let w = &self.weights[node];
        let mut out: Vec<f64> = (0..w.len())
            .map(|_| {
                let e: f64 = StandardNormal.sample(rng);
                self.feature_mean + e
            })
            .collect();
        let noise: f64 = StandardNormal.sample(rng);
        let y = w.iter().zip(&out).map(|(a, b)| a * b).sum::<f64>() + self.noise_std * noise;
        out.push(y);
        out
    }
}

/// Least-squares objectives, `‖x^i − x^j‖` proximity constraints and a box.
pub fn build_consensus_problem(cfg: &ConsensusRegressionConfig, seed: u64) -> Result<ProblemSpec> {
    cfg.validate()?;
    let graph = cfg.graph()?;
    let tolerance = match &cfg.gamma_per_edge {
        Some(g) => g.clone(),
        None => vec![cfg.gamma; graph.n_edges()],
    };
    let domains =
        vec![DomainSpec::uniform_box(cfg.dim, -cfg.box_bound, cfg.box_bound); cfg.n_nodes];
    ProblemSpec::new(
        graph,
        domains,
        Arc::new(LeastSquares),
        ConstraintFamily::Pairwise {
            h: Arc::new(NormProximity),
            tolerance,
        },
        Arc::new(RegressionSampler {
            weights: cfg.ground_truth(seed),
            feature_mean: cfg.feature_mean,
            noise_std: cfg.noise_std,
        }),
    )
}
