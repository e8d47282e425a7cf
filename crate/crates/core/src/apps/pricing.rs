//! Pricing-based interference management in a two-tier cellular network.
//!
//! Each macro user (MU) `i` owns a subchannel shared by a set `N_i` of small
//! cell base stations (SCBS). The base station charges SCBS `n` a price
//! `x_n^i` per unit of interference it causes on channel `i`; the SCBS reacts
//! with the water-filling power
//!
//! ```text
//! p_n^i = ( W / (c μ_n + ν_n x_n^i) − 1 / h_n^i )_+
//! ```
//!
//! and the base station maximizes its expected revenue `Σ x g p` subject to an
//! average interference budget `E[Σ_n g_ni p_n^i] <= γ_i` at every MU, while
//! keeping the total price charged to each SCBS within `[C_min, C_max]`.
//!
//! Agents are the SCBSs; two of them are linked when they share a channel.
//! The per-MU interference budget is a neighborhood constraint owned by the
//! lowest-index SCBS on that channel.

use std::sync::Arc;

use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::domain::DomainSpec;
use crate::error::{Error, Result};
use crate::graph::NetworkGraph;
use crate::problem::{
    ConstraintFamily, Local, NeighborhoodConstraint, Objective, Observation, ProblemSpec, Sampler,
};
use crate::rng::{stream_rng, Stream, StreamRng};
use crate::saddle::RunTrace;

use super::{from_db, to_db};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PricingConfig {
    #[serde(alias = "M")]
    pub n_mu: usize,
    #[serde(alias = "N")]
    pub n_scbs: usize,
    /// `assignment[i]` lists the SCBSs (0-based) sharing the channel of MU `i`.
    pub assignment: Vec<Vec<usize>>,
    /// Mean of the exponential SCBS-to-MU gains `g_ni`.
    pub interference_gain_mean: f64,
    /// Mean of the exponential SCBS-to-own-user gains `h_n^i`.
    pub link_gain_mean: f64,
    /// Bandwidth per subcarrier `W`, in MHz.
    pub bandwidth: f64,
    /// Cost per unit transmit power `c`.
    pub cost: f64,
    /// `μ_n`; a single entry applies to every SCBS.
    pub mu_n: Vec<f64>,
    /// `ν_n`; a single entry applies to every SCBS.
    pub nu_n: Vec<f64>,
    /// Interference margin `γ_i` in dB relative to unit power; one entry
    /// applies to every MU.
    pub gamma_db: Vec<f64>,
    pub c_min: f64,
    pub c_max: f64,
    /// Starting price on every channel an SCBS serves.
    pub initial_price: f64,
    /// Receiver noise power `σ²` at the MUs.
    pub noise_power: f64,
    /// MU transmit power used for SINR reporting.
    pub mu_tx_power: f64,
    /// Mean of the exponential MU direct-link gain.
    pub mu_gain_mean: f64,
}

impl Default for PricingConfig {
    fn default() -> Self {
        Self {
            n_mu: 2,
            n_scbs: 3,
            assignment: vec![vec![0, 1], vec![1, 2]],
            interference_gain_mean: 3.0,
            link_gain_mean: 3.0,
            bandwidth: 1.0,
            cost: 0.1,
            mu_n: vec![1.0],
            nu_n: vec![1.0],
            gamma_db: vec![-3.0],
            c_min: 0.9,
            c_max: 20.0,
            initial_price: 5.0,
            noise_power: 1.0,
            mu_tx_power: 370.0,
            mu_gain_mean: 3.0,
        }
    }
}

fn broadcast(name: &str, v: &[f64], n: usize) -> Result<Vec<f64>> {
    match v.len() {
        1 => Ok(vec![v[0]; n]),
        len if len == n => Ok(v.to_vec()),
        len => Err(Error::InvalidConfig(format!(
            "{name} has {len} entries, expected 1 or {n}"
        ))),
    }
}

impl PricingConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.n_mu == 0 || self.n_scbs == 0 {
            return bad("n_mu and n_scbs must be positive".into());
        }
        if self.assignment.len() != self.n_mu {
            return bad(format!(
                "assignment lists {} channels for {} MUs",
                self.assignment.len(),
                self.n_mu
            ));
        }
        let mut served = vec![false; self.n_scbs];
        for (i, set) in self.assignment.iter().enumerate() {
            if set.is_empty() {
                return bad(format!("assignment[{i}] is empty"));
            }
            let mut sorted = set.clone();
            sorted.sort_unstable();
            sorted.dedup();
            if sorted.len() != set.len() {
                return bad(format!("assignment[{i}] repeats an SCBS"));
            }
            for &n in set {
                if n >= self.n_scbs {
                    return bad(format!("assignment[{i}] names SCBS {n} of {}", self.n_scbs));
                }
                served[n] = true;
            }
        }
        if let Some(n) = served.iter().position(|s| !s) {
            return bad(format!("SCBS {n} serves no channel"));
        }
        for (name, v) in [
            ("bandwidth", self.bandwidth),
            ("cost", self.cost),
            ("noise_power", self.noise_power),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        for (name, v) in [
            ("interference_gain_mean", self.interference_gain_mean),
            ("link_gain_mean", self.link_gain_mean),
            ("mu_tx_power", self.mu_tx_power),
            ("mu_gain_mean", self.mu_gain_mean),
            ("initial_price", self.initial_price),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("{name} must be nonnegative, got {v}"));
            }
        }
        for (name, v) in [("mu_n", &self.mu_n), ("nu_n", &self.nu_n)] {
            if broadcast(name, v, self.n_scbs)?
                .iter()
                .any(|a| !(a.is_finite() && *a > 0.0))
            {
                return bad(format!("{name} entries must be positive"));
            }
        }
        if broadcast("gamma_db", &self.gamma_db, self.n_mu)?
            .iter()
            .any(|g| g.is_nan() || *g == f64::NEG_INFINITY)
        {
            return bad("gamma_db entries must be numbers".into());
        }
        if !(self.c_min >= 0.0 && self.c_min <= self.c_max && self.c_max.is_finite()) {
            return bad(format!(
                "price budget [{}, {}] must satisfy 0 <= c_min <= c_max < inf",
                self.c_min, self.c_max
            ));
        }
        Ok(())
    }

    /// `γ_i` on the linear scale.
    pub fn gamma_linear(&self) -> Result<Vec<f64>> {
        Ok(broadcast("gamma_db", &self.gamma_db, self.n_mu)?
            .into_iter()
            .map(from_db)
            .collect())
    }
}

/// `p = (W / (c μ_n + ν_n x) − 1/h)_+`.
pub fn power_allocation(cfg: &PricingConfig, n: usize, x: f64, h: f64) -> f64 {
    let mu = cfg.mu_n[if cfg.mu_n.len() == 1 { 0 } else { n }];
    let nu = cfg.nu_n[if cfg.nu_n.len() == 1 { 0 } else { n }];
    power(cfg.bandwidth, cfg.cost * mu, nu, x, h)
}

fn power(w: f64, c_mu: f64, nu: f64, x: f64, h: f64) -> f64 {
    (w / (c_mu + nu * x) - 1.0 / h).max(0.0)
}

/// Channel layout and physical parameters shared by the objective, the
/// constraint and the sampler.
#[derive(Debug)]
struct Model {
    w: f64,
    c_mu: Vec<f64>,
    nu: Vec<f64>,
    gamma: Vec<f64>,
    g_mean: f64,
    h_mean: f64,
    /// `channels[n]`: MUs served by SCBS `n`, ascending; the slot order of `x^n`.
    channels: Vec<Vec<usize>>,
    /// `members[i]`: `(n, slot)` for every SCBS on channel `i`.
    members: Vec<Vec<(usize, usize)>>,
    /// `owned[k]`: MUs whose budget SCBS `k` enforces.
    owned: Vec<Vec<usize>>,
}

impl Model {
    fn power(&self, n: usize, x: f64, h: f64) -> f64 {
        power(self.w, self.c_mu[n], self.nu[n], x, h)
    }

    /// `∂p/∂x`, zero where the power is clipped.
    fn power_slope(&self, n: usize, x: f64, h: f64) -> f64 {
        if self.power(n, x, h) > 0.0 {
            let d = self.c_mu[n] + self.nu[n] * x;
            -self.w * self.nu[n] / (d * d)
        } else {
            0.0
        }
    }
}

fn exp_draw(mean: f64, rng: &mut StreamRng) -> f64 {
    if mean > 0.0 {
        Exp::new(1.0 / mean).expect("positive rate").sample(rng)
    } else {
        0.0
    }
}

/// Negated revenue `−Σ_slots x g p`.
struct NegRevenue(Arc<Model>);

impl Objective for NegRevenue {
    fn value(&self, node: usize, x: &[f64], theta: &[f64]) -> f64 {
        -x.iter()
            .enumerate()
            .map(|(s, &xs)| xs * theta[2 * s] * self.0.power(node, xs, theta[2 * s + 1]))
            .sum::<f64>()
    }

    fn grad(&self, node: usize, x: &[f64], theta: &[f64]) -> Vec<f64> {
        let m = &self.0;
        x.iter()
            .enumerate()
            .map(|(s, &xs)| {
                let (g, h) = (theta[2 * s], theta[2 * s + 1]);
                if m.power(node, xs, h) > 0.0 {
                    let d = m.c_mu[node] + m.nu[node] * xs;
                    -g * (m.w * m.c_mu[node] / (d * d) - 1.0 / h)
                } else {
                    0.0
                }
            })
            .collect()
    }
}

/// `Σ_{n ∈ N_i} g_ni p_n^i − γ_i` for every MU owned by the node.
struct InterferenceBudget(Arc<Model>);

impl InterferenceBudget {
    fn find<'a>(local: &'a [Local<'a>], n: usize) -> &'a Local<'a> {
        local
            .iter()
            .find(|l| l.node == n)
            .expect("channel members are neighbors of the owner")
    }
}

impl NeighborhoodConstraint for InterferenceBudget {
    fn count(&self, node: usize) -> usize {
        self.0.owned[node].len()
    }

    fn value(&self, node: usize, local: &[Local<'_>]) -> Vec<f64> {
        let m = &self.0;
        m.owned[node]
            .iter()
            .map(|&i| {
                let interference: f64 = m.members[i]
                    .iter()
                    .map(|&(n, s)| {
                        let l = Self::find(local, n);
                        l.theta[2 * s] * m.power(n, l.x[s], l.theta[2 * s + 1])
                    })
                    .sum();
                interference - m.gamma[i]
            })
            .collect()
    }

    fn jacobian(&self, node: usize, wrt: usize, local: &[Local<'_>]) -> Vec<Vec<f64>> {
        let m = &self.0;
        let l = &local[wrt];
        let n = l.node;
        m.owned[node]
            .iter()
            .map(|&i| {
                let mut row = vec![0.0; l.x.len()];
                if let Some(&(_, s)) = m.members[i].iter().find(|(k, _)| *k == n) {
                    row[s] = l.theta[2 * s] * m.power_slope(n, l.x[s], l.theta[2 * s + 1]);
                }
                row
            })
            .collect()
    }
}

/// `(g, h)` per served channel, exponential.
struct GainSampler(Arc<Model>);

impl Sampler for GainSampler {
    fn sample(&self, node: usize, rng: &mut StreamRng) -> Observation {
        let mut out = Vec::with_capacity(2 * self.0.channels[node].len());
        for _ in &self.0.channels[node] {
            out.push(exp_draw(self.0.g_mean, rng));
            out.push(exp_draw(self.0.h_mean, rng));
        }
        out
    }
}

/// A pricing instance: the generic problem plus its channel layout.
#[derive(Debug, Clone)]
pub struct PricingProblem {
    pub spec: ProblemSpec,
    pub config: PricingConfig,
    model: Arc<Model>,
}

pub fn build_pricing_problem(cfg: &PricingConfig) -> Result<PricingProblem> {
    cfg.validate()?;
    let mut channels = vec![Vec::new(); cfg.n_scbs];
    for (i, set) in cfg.assignment.iter().enumerate() {
        for &n in set {
            channels[n].push(i);
        }
    }
    let members: Vec<Vec<(usize, usize)>> = cfg
        .assignment
        .iter()
        .enumerate()
        .map(|(i, set)| {
            let mut v: Vec<(usize, usize)> = set
                .iter()
                .map(|&n| (n, channels[n].iter().position(|&c| c == i).expect("served")))
                .collect();
            v.sort_unstable();
            v
        })
        .collect();
    let mut owned = vec![Vec::new(); cfg.n_scbs];
    for (i, m) in members.iter().enumerate() {
        owned[m[0].0].push(i);
    }

    let mut edges = Vec::new();
    for set in &cfg.assignment {
        for (a, &u) in set.iter().enumerate() {
            for &v in &set[a + 1..] {
                edges.push((u, v));
            }
        }
    }
    let graph = NetworkGraph::new(cfg.n_scbs, &edges)?;

    let mu = broadcast("mu_n", &cfg.mu_n, cfg.n_scbs)?;
    let model = Arc::new(Model {
        w: cfg.bandwidth,
        c_mu: mu.iter().map(|m| cfg.cost * m).collect(),
        nu: broadcast("nu_n", &cfg.nu_n, cfg.n_scbs)?,
        gamma: cfg.gamma_linear()?,
        g_mean: cfg.interference_gain_mean,
        h_mean: cfg.link_gain_mean,
        channels,
        members,
        owned,
    });

    let domains = model
        .channels
        .iter()
        .map(|ch| DomainSpec::SumInterval {
            dim: ch.len(),
            c_min: cfg.c_min,
            c_max: cfg.c_max,
            nonnegative: true,
        })
        .collect();
    let initial = model
        .channels
        .iter()
        .map(|ch| vec![cfg.initial_price; ch.len()])
        .collect();
    let spec = ProblemSpec::new(
        graph,
        domains,
        Arc::new(NegRevenue(model.clone())),
        ConstraintFamily::Neighborhood(Arc::new(InterferenceBudget(model.clone()))),
        Arc::new(GainSampler(model.clone())),
    )?
    .with_initial(initial)?;
    Ok(PricingProblem {
        spec,
        config: cfg.clone(),
        model,
    })
}

impl PricingProblem {
    pub fn n_mu(&self) -> usize {
        self.config.n_mu
    }

    /// MUs served by SCBS `n`, in the order of its price vector.
    pub fn channels(&self, n: usize) -> &[usize] {
        &self.model.channels[n]
    }

    /// `(SCBS, slot)` pairs transmitting on the channel of MU `i`.
    pub fn members(&self, i: usize) -> &[(usize, usize)] {
        &self.model.members[i]
    }

    /// Index of the multiplier of MU `i` in the flat dual vector.
    pub fn dual_index(&self, i: usize) -> usize {
        let owner = self.model.members[i][0].0;
        let pos = self.model.owned[owner]
            .iter()
            .position(|&k| k == i)
            .expect("owned");
        self.spec.dual_range(owner).start + pos
    }

    /// Interference `Σ_{n ∈ N_i} g_ni p_n^i` at every MU.
    pub fn interference(&self, x: &[Vec<f64>], theta: &[Observation]) -> Vec<f64> {
        self.model
            .members
            .iter()
            .map(|m| {
                m.iter()
                    .map(|&(n, s)| {
                        theta[n][2 * s] * self.model.power(n, x[n][s], theta[n][2 * s + 1])
                    })
                    .sum()
            })
            .collect()
    }

    /// Interference when every SCBS transmits at unit power.
    pub fn unit_power_interference(&self, theta: &[Observation]) -> Vec<f64> {
        self.model
            .members
            .iter()
            .map(|m| m.iter().map(|&(n, s)| theta[n][2 * s]).sum())
            .collect()
    }

    /// Instantaneous revenue `Σ_i Σ_{n ∈ N_i} x g p`.
    pub fn revenue(&self, x: &[Vec<f64>], theta: &[Observation]) -> f64 {
        (0..x.len())
            .map(|n| -self.spec.objective().value(n, &x[n], &theta[n]))
            .sum()
    }

    /// Received MU signal powers at slot `t`.
    pub fn mu_signal(&self, seed: u64, t: usize) -> Vec<f64> {
        (0..self.n_mu())
            .map(|i| {
                let mut rng = stream_rng(seed, Stream::Signal, i, t as u64);
                self.config.mu_tx_power * exp_draw(self.config.mu_gain_mean, &mut rng)
            })
            .collect()
    }

    fn observations(&self, seed: u64, t: usize) -> Vec<Observation> {
        (0..self.spec.n_nodes())
            .map(|n| self.spec.sample_observation(seed, n, t as u64))
            .collect()
    }
}

fn sinr_db(signal: &[f64], interference: &[f64], count: usize, noise: f64) -> Vec<f64> {
    signal
        .iter()
        .zip(interference)
        .map(|(s, i)| to_db((s / count as f64) / (noise + i / count as f64)))
        .collect()
}

/// Time-average SINR per MU, in dB, when every SCBS transmits at unit power.
pub fn naive_baseline(cfg: &PricingConfig, seed: u64, horizon: usize) -> Result<Vec<f64>> {
    let problem = build_pricing_problem(cfg)?;
    let m = problem.n_mu();
    let mut signal = vec![0.0; m];
    let mut interference = vec![0.0; m];
    for t in 0..horizon.max(1) {
        let theta = problem.observations(seed, t);
        for (a, v) in interference
            .iter_mut()
            .zip(problem.unit_power_interference(&theta))
        {
            *a += v;
        }
        for (a, v) in signal.iter_mut().zip(problem.mu_signal(seed, t)) {
            *a += v;
        }
    }
    Ok(sinr_db(
        &signal,
        &interference,
        horizon.max(1),
        cfg.noise_power,
    ))
}

/// SINR per MU in dB under the prices of a run, over the second half of
/// its horizon.
///
/// Every kept snapshot `x_t` with `t >= T/2` is paired with the gains
/// revealed at slot `t`, which the prices at `t` have not seen yet.
pub fn sinr_report(problem: &PricingProblem, trace: &RunTrace) -> Result<Vec<f64>> {
    let horizon = trace.horizon();
    let m = problem.n_mu();
    let mut signal = vec![0.0; m];
    let mut interference = vec![0.0; m];
    let mut count = 0;
    for (t, x) in trace.snapshots() {
        if t < horizon / 2 {
            continue;
        }
        let theta = problem.observations(trace.seed, t);
        for (a, v) in interference.iter_mut().zip(problem.interference(x, &theta)) {
            *a += v;
        }
        for (a, v) in signal.iter_mut().zip(problem.mu_signal(trace.seed, t)) {
            *a += v;
        }
        count += 1;
    }
    if count == 0 {
        return Err(Error::InvalidConfig(
            "trace keeps no price snapshots in the second half of the run".into(),
        ));
    }
    Ok(sinr_db(
        &signal,
        &interference,
        count,
        problem.config.noise_power,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RevenueSeries {
    /// Iterations with a price snapshot.
    pub t: Vec<usize>,
    pub instantaneous: Vec<f64>,
    /// Prefix mean of `instantaneous`.
    pub running: Vec<f64>,
}

impl RevenueSeries {
    /// Mean instantaneous revenue over the last quarter of the snapshots.
    pub fn final_quarter_mean(&self) -> f64 {
        let n = self.instantaneous.len();
        let tail = &self.instantaneous[n - (n / 4).max(1).min(n)..];
        tail.iter().sum::<f64>() / tail.len().max(1) as f64
    }
}

/// Revenue at every kept snapshot from `t = 1` on, with the gains of that slot.
pub fn revenue_series(problem: &PricingProblem, trace: &RunTrace) -> RevenueSeries {
    let mut t_out = Vec::new();
    let mut inst = Vec::new();
    for (t, x) in trace.snapshots() {
        if t == 0 {
            continue;
        }
        t_out.push(t);
        inst.push(problem.revenue(x, &problem.observations(trace.seed, t)));
    }
    let running = crate::metrics::cumulative(&inst)
        .into_iter()
        .enumerate()
        .map(|(k, c)| c / (k + 1) as f64)
        .collect();
    RevenueSeries {
        t: t_out,
        instantaneous: inst,
        running,
    }
}
