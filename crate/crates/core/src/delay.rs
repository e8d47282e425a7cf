//! Bounded staleness.
//!
//! A [`DelaySchedule`] produces per-node delays `τ_i(t) <= τ`; [`DelaySchedule::resolve`]
//! turns them into delayed indices `[t]_i = max([t-1]_i, t - τ_i(t), 0)`, so a
//! node never falls back to an older copy than the one it already used.
//! [`StalenessBuffer`] keeps the last `τ + 1` iterates and observations of
//! every node so delayed reads return exactly what was produced back then.

use std::collections::VecDeque;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::Observation;
use crate::rng::{stream_rng, Stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DelayKind {
    Zero,
    /// Constant delay per node.
    Fixed {
        per_node: Vec<usize>,
    },
    /// `τ_i(t) ~ Uniform{0, …, τ}` independently per `(i, t)`.
    UniformRandom {
        seed: u64,
    },
    /// Row `t % rows.len()` gives the delays of every node at time `t`.
    CustomTable {
        rows: Vec<Vec<usize>>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelaySchedule {
    pub kind: DelayKind,
    pub tau_max: usize,
}

impl DelaySchedule {
    pub fn zero() -> Self {
        Self {
            kind: DelayKind::Zero,
            tau_max: 0,
        }
    }

    pub fn fixed(tau: usize, n_nodes: usize) -> Self {
        Self {
            kind: DelayKind::Fixed {
                per_node: vec![tau; n_nodes],
            },
            tau_max: tau,
        }
    }

    pub fn fixed_per_node(per_node: Vec<usize>) -> Self {
        let tau_max = per_node.iter().copied().max().unwrap_or(0);
        Self {
            kind: DelayKind::Fixed { per_node },
            tau_max,
        }
    }

    pub fn uniform(tau_max: usize, seed: u64) -> Self {
        Self {
            kind: DelayKind::UniformRandom { seed },
            tau_max,
        }
    }

    pub fn table(rows: Vec<Vec<usize>>, tau_max: usize) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::InvalidConfig("delay table has no rows".into()));
        }
        if let Some(bad) = rows.iter().flatten().find(|&&d| d > tau_max) {
            return Err(Error::InvalidConfig(format!(
                "delay table entry {bad} exceeds tau_max {tau_max}"
            )));
        }
        Ok(Self {
            kind: DelayKind::CustomTable { rows },
            tau_max,
        })
    }

    pub fn is_zero(&self) -> bool {
        self.tau_max == 0 || matches!(self.kind, DelayKind::Zero)
    }

    /// Raw delay `τ_i(t)`, capped at `tau_max`.
    pub fn raw_delay(&self, t: usize, i: usize) -> usize {
        let d = match &self.kind {
            DelayKind::Zero => 0,
            DelayKind::Fixed { per_node } => per_node.get(i).copied().unwrap_or(0),
            DelayKind::UniformRandom { seed } => {
                if self.tau_max == 0 {
                    0
                } else {
                    stream_rng(*seed, Stream::Delay, i, t as u64).random_range(0..=self.tau_max)
                }
            }
            DelayKind::CustomTable { rows } => {
                let row = &rows[t % rows.len()];
                row.get(i).copied().unwrap_or(0)
            }
        };
        d.min(self.tau_max)
    }

    /// Delayed index `[t]_i` given the previous one `[t-1]_i`.
    pub fn resolve(&self, t: usize, i: usize, prev: usize) -> usize {
        let fresh = t.saturating_sub(self.raw_delay(t, i));
        fresh.max(prev).min(t)
    }
}

#[derive(Debug, Clone)]
struct Entry {
    x: Vec<f64>,
    theta: Observation,
}

/// Ring of the last `depth = τ + 1` states of every node.
#[derive(Debug, Clone)]
pub struct StalenessBuffer {
    depth: usize,
    newest: Option<usize>,
    nodes: Vec<VecDeque<Entry>>,
}

impl StalenessBuffer {
    pub fn new(n_nodes: usize, tau_max: usize) -> Self {
        Self {
            depth: tau_max + 1,
            newest: None,
            nodes: vec![VecDeque::with_capacity(tau_max + 1); n_nodes],
        }
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    /// Oldest and newest buffered time indices.
    pub fn window(&self) -> Option<(usize, usize)> {
        self.newest.map(|n| {
            let len = self.nodes.iter().map(VecDeque::len).max().unwrap_or(0);
            (n + 1 - len.max(1), n)
        })
    }

    /// Stores `(x^i_t, θ^i_t)`. Every node must be recorded once per time
    /// index, in nondecreasing time order.
    pub fn record(&mut self, t: usize, i: usize, x: &[f64], theta: &[f64]) {
        match self.newest {
            Some(n) if t < n => panic!("record at t={t} after t={n}"),
            _ => self.newest = Some(t),
        }
        let ring = &mut self.nodes[i];
        if ring.len() == self.depth {
            ring.pop_front();
        }
        ring.push_back(Entry {
            x: x.to_vec(),
            theta: theta.to_vec(),
        });
    }

    fn entry(&self, s: usize, i: usize) -> Result<&Entry> {
        let newest = self.newest.ok_or(Error::OutOfWindow {
            index: s,
            oldest: 0,
            newest: 0,
        })?;
        let ring = &self.nodes[i];
        let oldest = (newest + 1).saturating_sub(ring.len());
        if s > newest || s < oldest || ring.is_empty() {
            return Err(Error::OutOfWindow {
                index: s,
                oldest,
                newest,
            });
        }
        Ok(&ring[s - oldest])
    }

    /// The iterate `x^i_s`.
    pub fn fetch(&self, s: usize, i: usize) -> Result<&[f64]> {
        self.entry(s, i).map(|e| e.x.as_slice())
    }

    /// The observation `θ^i_s`.
    pub fn fetch_observation(&self, s: usize, i: usize) -> Result<&[f64]> {
        self.entry(s, i).map(|e| e.theta.as_slice())
    }
}
