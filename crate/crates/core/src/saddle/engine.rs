use crate::delay::{DelaySchedule, StalenessBuffer};
use crate::error::{Error, Result};
use crate::metrics::Evaluator;
use crate::problem::{ConstraintFamily, Observation, ProblemSpec};

use super::{
    dual_update, lagrangian_primal_gradient, primal_update, Hyperparams, RunTrace, SaddleState,
    TraceRow,
};

/// Membership tolerance for the per-step domain audit.
const DOMAIN_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy)]
pub struct RunOptions<'a> {
    /// Keep a primal snapshot every `thin_every` rows (0 keeps only the first
    /// and last).
    pub thin_every: usize,
    pub evaluator: Option<&'a Evaluator>,
    /// Also estimate the slack at the current iterate on every row.
    pub track_current_slack: bool,
}

impl Default for RunOptions<'_> {
    fn default() -> Self {
        Self {
            thin_every: 1,
            evaluator: None,
            track_current_slack: false,
        }
    }
}

/// Everything that went into one step, handed to run hooks.
#[derive(Debug)]
pub struct StepInfo<'a> {
    pub t: usize,
    pub resolved: &'a [usize],
    pub x: &'a [Vec<f64>],
    pub lambda: &'a [f64],
    pub x_delayed: &'a [Vec<f64>],
    pub theta_delayed: &'a [Observation],
    pub primal_grad: &'a [Vec<f64>],
    /// `s(x_[t]) − εδ λ_t`.
    pub dual_grad: &'a [f64],
    pub x_next: &'a [Vec<f64>],
    pub lambda_next: &'a [f64],
}

/// Deterministic simulation of the asynchronous method.
///
/// One global clock advances `t`; at each tick every node reveals a fresh
/// observation, the schedule resolves the delayed indices, and the primal and
/// dual blocks are updated simultaneously from the time-`t` state using
/// gradients taken at the delayed iterates.
pub struct Engine<'a> {
    spec: &'a ProblemSpec,
    hp: Hyperparams,
    schedule: DelaySchedule,
    seed: u64,
    opts: RunOptions<'a>,
    state: SaddleState,
    buffer: StalenessBuffer,
    resolved: Vec<usize>,
    trace: RunTrace,
}

impl<'a> Engine<'a> {
    pub fn new(
        spec: &'a ProblemSpec,
        hp: Hyperparams,
        schedule: DelaySchedule,
        seed: u64,
        opts: RunOptions<'a>,
    ) -> Result<Self> {
        hp.validate()?;
        let state = SaddleState::initial(spec);
        let first = initial_row(spec, &state, &opts);
        Ok(Self {
            spec,
            hp,
            buffer: StalenessBuffer::new(spec.n_nodes(), schedule.tau_max),
            schedule: schedule.clone(),
            seed,
            opts,
            resolved: vec![0; spec.n_nodes()],
            trace: RunTrace {
                seed,
                tau_max: schedule.tau_max,
                rows: vec![first],
                final_state: state.clone(),
                domain_violations: 0,
            },
            state,
        })
    }

    pub fn state(&self) -> &SaddleState {
        &self.state
    }

    pub fn trace(&self) -> &RunTrace {
        &self.trace
    }

    pub fn into_trace(mut self) -> RunTrace {
        self.trace.final_state = self.state.clone();
        self.trace
    }

    pub fn step(&mut self) -> Result<()> {
        self.step_with(&mut |_: &StepInfo<'_>| {})
    }

    pub fn step_with(&mut self, hook: &mut dyn FnMut(&StepInfo<'_>)) -> Result<()> {
        let spec = self.spec;
        let n = spec.n_nodes();
        let t = self.state.t;

        for i in 0..n {
            let theta = spec.sample_observation(self.seed, i, t as u64);
            self.buffer.record(t, i, &self.state.x[i], &theta);
        }
        for i in 0..n {
            self.resolved[i] = if t == 0 {
                0
            } else {
                self.schedule.resolve(t, i, self.resolved[i])
            };
        }
        let mut x_delayed = Vec::with_capacity(n);
        let mut theta_delayed = Vec::with_capacity(n);
        for (i, &s) in self.resolved.iter().enumerate() {
            x_delayed.push(self.buffer.fetch(s, i)?.to_vec());
            theta_delayed.push(self.buffer.fetch_observation(s, i)?.to_vec());
        }

        let grad = lagrangian_primal_gradient(spec, &x_delayed, &self.state.lambda, &theta_delayed);
        let x_next = primal_update(spec, &self.hp, &self.state.x, &grad);
        let slacks = spec.all_slacks(&x_delayed, &theta_delayed);
        let lambda_next = dual_update(&self.hp, &self.state.lambda, &slacks);

        let reg = self.hp.epsilon * self.hp.delta;
        let dual_grad: Vec<f64> = slacks
            .iter()
            .zip(&self.state.lambda)
            .map(|(s, l)| s - reg * l)
            .collect();
        hook(&StepInfo {
            t,
            resolved: &self.resolved,
            x: &self.state.x,
            lambda: &self.state.lambda,
            x_delayed: &x_delayed,
            theta_delayed: &theta_delayed,
            primal_grad: &grad,
            dual_grad: &dual_grad,
            x_next: &x_next,
            lambda_next: &lambda_next,
        });

        if !spec.contains(&x_next, DOMAIN_TOL) {
            self.trace.domain_violations += 1;
        }
        let max_staleness = self.resolved.iter().map(|&s| t - s).max().unwrap_or(0);
        self.state = SaddleState {
            t: t + 1,
            x: x_next,
            lambda: lambda_next,
        };
        let row = state_row(
            spec,
            &self.state,
            &self.opts,
            self.hp.horizon,
            self.resolved.clone(),
            max_staleness,
            slacks,
        );
        self.trace.rows.push(row);
        Ok(())
    }

    /// Runs `steps` iterations.
    pub fn run(&mut self, steps: usize) -> Result<()> {
        for _ in 0..steps {
            self.step()?;
        }
        Ok(())
    }
}

pub(super) fn initial_row(
    spec: &ProblemSpec,
    state: &SaddleState,
    opts: &RunOptions<'_>,
) -> TraceRow {
    let mut row = state_row(spec, state, opts, 0, vec![0; spec.n_nodes()], 0, Vec::new());
    row.x = Some(state.x.clone());
    row
}

pub(super) fn state_row(
    spec: &ProblemSpec,
    state: &SaddleState,
    opts: &RunOptions<'_>,
    horizon: usize,
    resolved: Vec<usize>,
    max_staleness: usize,
    delayed_slack: Vec<f64>,
) -> TraceRow {
    let t = state.t;
    let keep = t == horizon || (opts.thin_every > 0 && t.is_multiple_of(opts.thin_every));
    TraceRow {
        t,
        f_hat: opts.evaluator.map(|e| e.objective(spec, &state.x)),
        lambda_norm: state.lambda_norm(),
        lambda_min: state.lambda.iter().copied().fold(f64::INFINITY, f64::min),
        resolved,
        max_staleness,
        delayed_slack,
        current_slack: if opts.track_current_slack {
            opts.evaluator.map(|e| e.slacks(spec, &state.x))
        } else {
            None
        },
        x: keep.then(|| state.x.clone()),
    }
}

/// Runs the asynchronous method for `hp.horizon` iterations.
pub fn run(
    spec: &ProblemSpec,
    hp: Hyperparams,
    schedule: &DelaySchedule,
    seed: u64,
    opts: RunOptions<'_>,
) -> Result<RunTrace> {
    run_with_hook(spec, hp, schedule, seed, opts, &mut |_: &StepInfo<'_>| {})
}

pub fn run_with_hook(
    spec: &ProblemSpec,
    hp: Hyperparams,
    schedule: &DelaySchedule,
    seed: u64,
    opts: RunOptions<'_>,
    hook: &mut dyn FnMut(&StepInfo<'_>),
) -> Result<RunTrace> {
    let mut engine = Engine::new(spec, hp, schedule.clone(), seed, opts)?;
    for _ in 0..hp.horizon {
        engine.step_with(hook)?;
    }
    Ok(engine.into_trace())
}

/// [`run`] restricted to neighborhood-constrained problems.
pub fn run_generalized(
    spec: &ProblemSpec,
    hp: Hyperparams,
    schedule: &DelaySchedule,
    seed: u64,
    opts: RunOptions<'_>,
) -> Result<RunTrace> {
    match spec.constraints() {
        ConstraintFamily::Neighborhood(_) => run(spec, hp, schedule, seed, opts),
        ConstraintFamily::Pairwise { .. } => Err(Error::WrongConstraintFamily {
            expected: "neighborhood",
        }),
    }
}
