use crate::error::Result;
use crate::problem::{Observation, ProblemSpec};

use super::engine::{initial_row, state_row, RunOptions};
use super::{
    dual_update, lagrangian_primal_gradient, primal_update, Hyperparams, RunTrace, SaddleState,
};

/// Synchronous stochastic saddle point: every node uses its current iterate
/// and current observation. Reference method for the zero-delay case.
pub fn run_synchronous(
    spec: &ProblemSpec,
    hp: Hyperparams,
    seed: u64,
    opts: RunOptions<'_>,
) -> Result<RunTrace> {
    hp.validate()?;
    let n = spec.n_nodes();
    let mut state = SaddleState::initial(spec);
    let mut rows = vec![initial_row(spec, &state, &opts)];
    let mut domain_violations = 0;

    for t in 0..hp.horizon {
        let theta: Vec<Observation> = (0..n)
            .map(|i| spec.sample_observation(seed, i, t as u64))
            .collect();
        let grad = lagrangian_primal_gradient(spec, &state.x, &state.lambda, &theta);
        let x_next = primal_update(spec, &hp, &state.x, &grad);
        let slacks = spec.all_slacks(&state.x, &theta);
        let lambda_next = dual_update(&hp, &state.lambda, &slacks);
        if !spec.contains(&x_next, 1e-9) {
            domain_violations += 1;
        }
        state = SaddleState {
            t: t + 1,
            x: x_next,
            lambda: lambda_next,
        };
        rows.push(state_row(
            spec,
            &state,
            &opts,
            hp.horizon,
            vec![t; n],
            0,
            slacks,
        ));
    }

    Ok(RunTrace {
        seed,
        tau_max: 0,
        rows,
        final_state: state,
        domain_violations,
    })
}
