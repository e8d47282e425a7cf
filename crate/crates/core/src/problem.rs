//! Constrained stochastic programs over a network.
//!
//! A [`ProblemSpec`] bundles the graph, one compact convex domain per node, a
//! per-node stochastic objective, a constraint family and the observation
//! sampler. Constraints are stored as slack functions: every value reported
//! by this module already has the tolerance subtracted, so `<= 0` means
//! satisfied.

use std::fmt;
use std::sync::Arc;

use rand_distr::{Distribution, Exp};

use crate::domain::DomainSpec;
use crate::error::{Error, Result};
use crate::graph::NetworkGraph;
use crate::rng::{stream_rng, Stream, StreamRng};

/// One realization `θ^i_t`.
pub type Observation = Vec<f64>;

/// Per-node stochastic loss `f^i(x^i, θ^i)`.
pub trait Objective: Send + Sync {
    fn value(&self, node: usize, x: &[f64], theta: &[f64]) -> f64;
    /// Gradient (or a subgradient at kinks) with respect to `x`.
    fn grad(&self, node: usize, x: &[f64], theta: &[f64]) -> Vec<f64>;
}

/// Which argument of a pairwise constraint to differentiate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Arg {
    First,
    Second,
}

/// Pairwise proximity function `h^{ij}(x^i, x^j, θ^i, θ^j)`, tolerance excluded.
pub trait PairwiseConstraint: Send + Sync {
    fn value(&self, i: usize, j: usize, xi: &[f64], xj: &[f64], ti: &[f64], tj: &[f64]) -> f64;
    #[allow(clippy::too_many_arguments)]
    fn grad(
        &self,
        i: usize,
        j: usize,
        which: Arg,
        xi: &[f64],
        xj: &[f64],
        ti: &[f64],
        tj: &[f64],
    ) -> Vec<f64>;
}

/// The state of one member of a closed neighborhood.
#[derive(Debug, Clone, Copy)]
pub struct Local<'a> {
    pub node: usize,
    pub x: &'a [f64],
    pub theta: &'a [f64],
}

/// Vector constraint `h^i({x^j, θ^j}_{j ∈ n_i'}) <= 0` owned by node `i`.
///
/// `local` always lists the closed neighborhood of `node` in ascending node
/// order. Values are slacks (tolerances folded in).
pub trait NeighborhoodConstraint: Send + Sync {
    /// Number of components owned by `node`; may be zero.
    fn count(&self, node: usize) -> usize;
    fn value(&self, node: usize, local: &[Local<'_>]) -> Vec<f64>;
    /// Jacobian rows of `h^node` with respect to the variable of `local[wrt]`.
    fn jacobian(&self, node: usize, wrt: usize, local: &[Local<'_>]) -> Vec<Vec<f64>>;
}

/// Per-node observation distribution.
pub trait Sampler: Send + Sync {
    fn sample(&self, node: usize, rng: &mut StreamRng) -> Observation;
}

#[derive(Clone)]
pub enum ConstraintFamily {
    /// One scalar constraint and one multiplier per directed edge; `tolerance`
    /// is indexed by edge id.
    Pairwise {
        h: Arc<dyn PairwiseConstraint>,
        tolerance: Vec<f64>,
    },
    Neighborhood(Arc<dyn NeighborhoodConstraint>),
}

impl ConstraintFamily {
    pub fn pairwise_uniform(
        h: Arc<dyn PairwiseConstraint>,
        gamma: f64,
        graph: &NetworkGraph,
    ) -> Self {
        ConstraintFamily::Pairwise {
            h,
            tolerance: vec![gamma; graph.n_edges()],
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            ConstraintFamily::Pairwise { .. } => "pairwise",
            ConstraintFamily::Neighborhood(_) => "neighborhood",
        }
    }

    /// Re-encodes a pairwise family in neighborhood form: node `i` owns one
    /// component `h^{ij} - γ_ij` per neighbor `j`, in adjacency order.
    pub fn to_neighborhood(&self, graph: &NetworkGraph) -> Result<ConstraintFamily> {
        match self {
            ConstraintFamily::Pairwise { h, tolerance } => Ok(ConstraintFamily::Neighborhood(
                Arc::new(PairwiseAsNeighborhood {
                    h: h.clone(),
                    tolerance: tolerance.clone(),
                    graph: graph.clone(),
                }),
            )),
            ConstraintFamily::Neighborhood(_) => Err(Error::WrongConstraintFamily {
                expected: "pairwise",
            }),
        }
    }
}

impl fmt::Debug for ConstraintFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConstraintFamily::Pairwise { tolerance, .. } => f
                .debug_struct("Pairwise")
                .field("tolerance", tolerance)
                .finish_non_exhaustive(),
            ConstraintFamily::Neighborhood(_) => f.write_str("Neighborhood(..)"),
        }
    }
}

struct PairwiseAsNeighborhood {
    h: Arc<dyn PairwiseConstraint>,
    tolerance: Vec<f64>,
    graph: NetworkGraph,
}

impl PairwiseAsNeighborhood {
    fn find<'a>(local: &'a [Local<'a>], node: usize) -> &'a Local<'a> {
        local
            .iter()
            .find(|l| l.node == node)
            .expect("closed neighborhood contains every neighbor")
    }
}

impl NeighborhoodConstraint for PairwiseAsNeighborhood {
    fn count(&self, node: usize) -> usize {
        self.graph.neighbors(node).len()
    }

    fn value(&self, node: usize, local: &[Local<'_>]) -> Vec<f64> {
        let me = Self::find(local, node);
        self.graph
            .neighbors(node)
            .iter()
            .map(|&j| {
                let other = Self::find(local, j);
                let e = self.graph.edge_id(node, j).expect("neighbor edge");
                self.h.value(node, j, me.x, other.x, me.theta, other.theta) - self.tolerance[e]
            })
            .collect()
    }

    fn jacobian(&self, node: usize, wrt: usize, local: &[Local<'_>]) -> Vec<Vec<f64>> {
        let me = Self::find(local, node);
        let target = local[wrt].node;
        self.graph
            .neighbors(node)
            .iter()
            .map(|&j| {
                let other = Self::find(local, j);
                if target == node {
                    self.h
                        .grad(node, j, Arg::First, me.x, other.x, me.theta, other.theta)
                } else if target == j {
                    self.h
                        .grad(node, j, Arg::Second, me.x, other.x, me.theta, other.theta)
                } else {
                    vec![0.0; local[wrt].x.len()]
                }
            })
            .collect()
    }
}

#[derive(Clone)]
pub struct ProblemSpec {
    graph: NetworkGraph,
    domains: Vec<DomainSpec>,
    objective: Arc<dyn Objective>,
    constraints: ConstraintFamily,
    sampler: Arc<dyn Sampler>,
    initial: Option<Vec<Vec<f64>>>,
    dual_offsets: Vec<usize>,
}

impl fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("graph", &self.graph)
            .field("domains", &self.domains)
            .field("constraints", &self.constraints)
            .finish_non_exhaustive()
    }
}

impl ProblemSpec {
    pub fn new(
        graph: NetworkGraph,
        domains: Vec<DomainSpec>,
        objective: Arc<dyn Objective>,
        constraints: ConstraintFamily,
        sampler: Arc<dyn Sampler>,
    ) -> Result<Self> {
        if domains.len() != graph.n_nodes() {
            return Err(Error::DimensionMismatch {
                expected: graph.n_nodes(),
                got: domains.len(),
            });
        }
        for d in &domains {
            d.validate()?;
        }
        let mut dual_offsets = Vec::with_capacity(graph.n_nodes() + 1);
        match &constraints {
            ConstraintFamily::Pairwise { tolerance, .. } => {
                if tolerance.len() != graph.n_edges() {
                    return Err(Error::DimensionMismatch {
                        expected: graph.n_edges(),
                        got: tolerance.len(),
                    });
                }
                if let Some(g) = tolerance.iter().find(|g| !g.is_finite() || **g < 0.0) {
                    return Err(Error::InvalidConfig(format!(
                        "constraint tolerance {g} must be finite and nonnegative"
                    )));
                }
            }
            ConstraintFamily::Neighborhood(h) => {
                let mut acc = 0;
                for i in 0..graph.n_nodes() {
                    dual_offsets.push(acc);
                    acc += h.count(i);
                }
                dual_offsets.push(acc);
            }
        }
        Ok(Self {
            graph,
            domains,
            objective,
            constraints,
            sampler,
            initial: None,
            dual_offsets,
        })
    }

    /// Sets the configured starting point; it is projected onto the domain
    /// when the run starts.
    pub fn with_initial(mut self, initial: Vec<Vec<f64>>) -> Result<Self> {
        if initial.len() != self.n_nodes() {
            return Err(Error::DimensionMismatch {
                expected: self.n_nodes(),
                got: initial.len(),
            });
        }
        for (i, x) in initial.iter().enumerate() {
            self.check_dim(i, x)?;
        }
        self.initial = Some(initial);
        Ok(self)
    }

    /// Replaces the constraint family, keeping everything else.
    pub fn with_constraints(self, constraints: ConstraintFamily) -> Result<Self> {
        let initial = self.initial.clone();
        let spec = Self::new(
            self.graph,
            self.domains,
            self.objective,
            constraints,
            self.sampler,
        )?;
        match initial {
            Some(x0) => spec.with_initial(x0),
            None => Ok(spec),
        }
    }

    pub fn graph(&self) -> &NetworkGraph {
        &self.graph
    }

    pub fn n_nodes(&self) -> usize {
        self.graph.n_nodes()
    }

    pub fn dim(&self, node: usize) -> usize {
        self.domains[node].dim()
    }

    pub fn domain(&self, node: usize) -> &DomainSpec {
        &self.domains[node]
    }

    pub fn domains(&self) -> &[DomainSpec] {
        &self.domains
    }

    pub fn objective(&self) -> &dyn Objective {
        self.objective.as_ref()
    }

    pub fn constraints(&self) -> &ConstraintFamily {
        &self.constraints
    }

    /// Total number of scalar multipliers.
    pub fn n_duals(&self) -> usize {
        match &self.constraints {
            ConstraintFamily::Pairwise { .. } => self.graph.n_edges(),
            ConstraintFamily::Neighborhood(_) => *self.dual_offsets.last().unwrap_or(&0),
        }
    }

    /// Range of the flat dual vector owned by `node` (neighborhood family), or
    /// the single entry of edge `node` (pairwise family).
    pub fn dual_range(&self, node: usize) -> std::ops::Range<usize> {
        match &self.constraints {
            ConstraintFamily::Pairwise { .. } => node..node + 1,
            ConstraintFamily::Neighborhood(_) => {
                self.dual_offsets[node]..self.dual_offsets[node + 1]
            }
        }
    }

    /// The starting iterate: the configured point (or each domain's center),
    /// projected onto the domain.
    pub fn initial_point(&self) -> Vec<Vec<f64>> {
        (0..self.n_nodes())
            .map(|i| match &self.initial {
                Some(x0) => self.domains[i].project_unchecked(&x0[i]),
                None => self.domains[i].center(),
            })
            .collect()
    }

    fn check_dim(&self, node: usize, x: &[f64]) -> Result<()> {
        let expected = self.dim(node);
        if x.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Draws `θ^node_t`. The draw depends only on `(seed, node, t)`.
    pub fn sample_observation(&self, seed: u64, node: usize, t: u64) -> Observation {
        let mut rng = stream_rng(seed, Stream::Observation, node, t);
        self.sampler.sample(node, &mut rng)
    }

    /// Draws from an explicitly chosen stream (evaluation, audit, ...).
    pub fn sample_from(&self, rng: &mut StreamRng, node: usize) -> Observation {
        self.sampler.sample(node, rng)
    }

    pub fn objective_value(&self, node: usize, x: &[f64], theta: &[f64]) -> Result<f64> {
        self.check_dim(node, x)?;
        Ok(self.objective.value(node, x, theta))
    }

    pub fn objective_grad(&self, node: usize, x: &[f64], theta: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(node, x)?;
        Ok(self.objective.grad(node, x, theta))
    }

    fn pairwise(&self) -> Result<(&dyn PairwiseConstraint, &[f64])> {
        match &self.constraints {
            ConstraintFamily::Pairwise { h, tolerance } => Ok((h.as_ref(), tolerance)),
            ConstraintFamily::Neighborhood(_) => Err(Error::WrongConstraintFamily {
                expected: "pairwise",
            }),
        }
    }

    /// Signed slack `h^{ij}(x_i, x_j, θ_i, θ_j) - γ_ij` on the directed edge `(i, j)`.
    pub fn constraint_value(
        &self,
        edge: (usize, usize),
        xi: &[f64],
        xj: &[f64],
        ti: &[f64],
        tj: &[f64],
    ) -> Result<f64> {
        let (h, tolerance) = self.pairwise()?;
        let (i, j) = edge;
        let e = self.graph.edge_id(i, j).ok_or(Error::NotAnEdge(i, j))?;
        self.check_dim(i, xi)?;
        self.check_dim(j, xj)?;
        Ok(h.value(i, j, xi, xj, ti, tj) - tolerance[e])
    }

    #[allow(clippy::too_many_arguments)]
    pub fn constraint_grad(
        &self,
        edge: (usize, usize),
        which: Arg,
        xi: &[f64],
        xj: &[f64],
        ti: &[f64],
        tj: &[f64],
    ) -> Result<Vec<f64>> {
        let (h, _) = self.pairwise()?;
        let (i, j) = edge;
        self.graph.edge_id(i, j).ok_or(Error::NotAnEdge(i, j))?;
        self.check_dim(i, xi)?;
        self.check_dim(j, xj)?;
        Ok(h.grad(i, j, which, xi, xj, ti, tj))
    }

    /// Neighborhood slack vector of `node`, given per-node states.
    pub fn neighborhood_value(
        &self,
        node: usize,
        x: &[Vec<f64>],
        theta: &[Observation],
    ) -> Result<Vec<f64>> {
        match &self.constraints {
            ConstraintFamily::Neighborhood(h) => {
                let nbhd = self.graph.closed_neighborhood(node);
                let local = local_view(&nbhd, x, theta);
                Ok(h.value(node, &local))
            }
            ConstraintFamily::Pairwise { .. } => Err(Error::WrongConstraintFamily {
                expected: "neighborhood",
            }),
        }
    }

    /// Slack of every multiplier in flat dual order, evaluated with per-node
    /// iterates `x` and observations `theta`.
    pub fn all_slacks(&self, x: &[Vec<f64>], theta: &[Observation]) -> Vec<f64> {
        match &self.constraints {
            ConstraintFamily::Pairwise { h, tolerance } => self
                .graph
                .edges()
                .iter()
                .zip(tolerance)
                .map(|(&(i, j), g)| h.value(i, j, &x[i], &x[j], &theta[i], &theta[j]) - g)
                .collect(),
            ConstraintFamily::Neighborhood(h) => {
                let mut out = Vec::with_capacity(self.n_duals());
                for i in 0..self.n_nodes() {
                    if h.count(i) == 0 {
                        continue;
                    }
                    let nbhd = self.graph.closed_neighborhood(i);
                    let local = local_view(&nbhd, x, theta);
                    out.extend(h.value(i, &local));
                }
                out
            }
        }
    }

    /// `F̂` summand: `Σ_i f^i(x^i, θ^i)`.
    pub fn total_objective(&self, x: &[Vec<f64>], theta: &[Observation]) -> f64 {
        (0..self.n_nodes())
            .map(|i| self.objective.value(i, &x[i], &theta[i]))
            .sum()
    }

    pub fn contains(&self, x: &[Vec<f64>], tol: f64) -> bool {
        x.len() == self.n_nodes()
            && x.iter()
                .zip(&self.domains)
                .all(|(xi, d)| d.contains(xi, tol))
    }
}

pub(crate) fn local_view<'a>(
    nbhd: &[usize],
    x: &'a [Vec<f64>],
    theta: &'a [Observation],
) -> Vec<Local<'a>> {
    nbhd.iter()
        .map(|&j| Local {
            node: j,
            x: &x[j],
            theta: &theta[j],
        })
        .collect()
}

/// Every node always observes the same fixed vector.
#[derive(Debug, Clone)]
pub struct PointMass {
    pub values: Vec<Observation>,
}

impl Sampler for PointMass {
    fn sample(&self, node: usize, _rng: &mut StreamRng) -> Observation {
        self.values[node % self.values.len()].clone()
    }
}

/// I.i.d. exponential entries with a common mean; `lengths[i]` entries at node `i`.
#[derive(Debug, Clone)]
pub struct ExponentialSampler {
    pub lengths: Vec<usize>,
    pub mean: f64,
}

impl Sampler for ExponentialSampler {
    fn sample(&self, node: usize, rng: &mut StreamRng) -> Observation {
        let exp = Exp::new(1.0 / self.mean).expect("positive mean");
        (0..self.lengths[node]).map(|_| exp.sample(rng)).collect()
    }
}

/// `f(x) = ½‖x‖²`, no randomness.
#[derive(Debug, Clone, Copy)]
pub struct HalfSquaredNorm;

impl Objective for HalfSquaredNorm {
    fn value(&self, _node: usize, x: &[f64], _theta: &[f64]) -> f64 {
        0.5 * x.iter().map(|v| v * v).sum::<f64>()
    }
    fn grad(&self, _node: usize, x: &[f64], _theta: &[f64]) -> Vec<f64> {
        x.to_vec()
    }
}

/// `f(x) = cᵀx`.
#[derive(Debug, Clone)]
pub struct LinearObjective {
    pub c: Vec<f64>,
}

impl Objective for LinearObjective {
    fn value(&self, _node: usize, x: &[f64], _theta: &[f64]) -> f64 {
        x.iter().zip(&self.c).map(|(a, b)| a * b).sum()
    }
    fn grad(&self, _node: usize, _x: &[f64], _theta: &[f64]) -> Vec<f64> {
        self.c.clone()
    }
}

/// `f(x, θ) = ½(zᵀx − y)²` with `θ = (z, y)`, `y` stored last.
#[derive(Debug, Clone, Copy)]
pub struct LeastSquares;

impl LeastSquares {
    fn residual(x: &[f64], theta: &[f64]) -> f64 {
        let (z, y) = theta.split_at(theta.len() - 1);
        z.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() - y[0]
    }
}

impl Objective for LeastSquares {
    fn value(&self, _node: usize, x: &[f64], theta: &[f64]) -> f64 {
        let r = Self::residual(x, theta);
        0.5 * r * r
    }
    fn grad(&self, _node: usize, x: &[f64], theta: &[f64]) -> Vec<f64> {
        let r = Self::residual(x, theta);
        theta[..x.len()].iter().map(|z| r * z).collect()
    }
}

/// Objective that is identically zero.
#[derive(Debug, Clone, Copy)]
pub struct ZeroObjective;

impl Objective for ZeroObjective {
    fn value(&self, _node: usize, _x: &[f64], _theta: &[f64]) -> f64 {
        0.0
    }
    fn grad(&self, _node: usize, x: &[f64], _theta: &[f64]) -> Vec<f64> {
        vec![0.0; x.len()]
    }
}

/// Approximate consensus `h^{ij} = ‖x^i − x^j‖`; the subgradient at `x^i = x^j` is 0.
#[derive(Debug, Clone, Copy)]
pub struct NormProximity;

impl PairwiseConstraint for NormProximity {
    fn value(&self, _i: usize, _j: usize, xi: &[f64], xj: &[f64], _: &[f64], _: &[f64]) -> f64 {
        xi.iter()
            .zip(xj)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    fn grad(
        &self,
        _i: usize,
        _j: usize,
        which: Arg,
        xi: &[f64],
        xj: &[f64],
        _: &[f64],
        _: &[f64],
    ) -> Vec<f64> {
        let norm = self.value(0, 0, xi, xj, &[], &[]);
        if norm == 0.0 {
            return vec![0.0; xi.len()];
        }
        let sign = match which {
            Arg::First => 1.0,
            Arg::Second => -1.0,
        };
        xi.iter()
            .zip(xj)
            .map(|(a, b)| sign * (a - b) / norm)
            .collect()
    }
}

/// Pairwise constraint that is identically zero.
#[derive(Debug, Clone, Copy)]
pub struct ZeroPairwise;

impl PairwiseConstraint for ZeroPairwise {
    fn value(&self, _: usize, _: usize, _: &[f64], _: &[f64], _: &[f64], _: &[f64]) -> f64 {
        0.0
    }
    fn grad(
        &self,
        _: usize,
        _: usize,
        which: Arg,
        xi: &[f64],
        xj: &[f64],
        _: &[f64],
        _: &[f64],
    ) -> Vec<f64> {
        match which {
            Arg::First => vec![0.0; xi.len()],
            Arg::Second => vec![0.0; xj.len()],
        }
    }
}
