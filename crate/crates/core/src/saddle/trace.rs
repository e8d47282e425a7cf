use serde::Serialize;

use super::SaddleState;

/// Diagnostics after `t` iterations.
///
/// The step-related fields (`resolved`, `max_staleness`, `delayed_slack`)
/// describe the step `t − 1 → t`; they are empty or zero on row 0.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRow {
    pub t: usize,
    /// Monte Carlo estimate `F̂(x_t)`, when an evaluator was attached.
    pub f_hat: Option<f64>,
    pub lambda_norm: f64,
    pub lambda_min: f64,
    /// `[t−1]_i` for every node.
    pub resolved: Vec<usize>,
    pub max_staleness: usize,
    /// Slacks evaluated at the delayed arguments, in flat dual order.
    pub delayed_slack: Vec<f64>,
    /// Monte Carlo slack estimate at the current iterate `x_t`.
    pub current_slack: Option<Vec<f64>>,
    /// Primal snapshot, kept every `thin_every` rows and on the last row.
    pub x: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub seed: u64,
    pub tau_max: usize,
    pub rows: Vec<TraceRow>,
    pub final_state: SaddleState,
    /// Steps whose projected iterate failed the domain membership check.
    pub domain_violations: usize,
}

impl RunTrace {
    pub fn horizon(&self) -> usize {
        self.rows.len().saturating_sub(1)
    }

    /// `F̂(x_t)` for `t = 1..=T`.
    pub fn objective_series(&self) -> Option<Vec<f64>> {
        self.rows.iter().skip(1).map(|r| r.f_hat).collect()
    }

    /// Rows that carry a primal snapshot.
    pub fn snapshots(&self) -> impl Iterator<Item = (usize, &Vec<Vec<f64>>)> {
        self.rows
            .iter()
            .filter_map(|r| r.x.as_ref().map(|x| (r.t, x)))
    }
}
