use std::sync::Arc;

use assp_core::apps::{build_consensus_problem, ConsensusRegressionConfig};
use assp_core::domain::DomainSpec;
use assp_core::graph::NetworkGraph;
use assp_core::metrics::{
    audit_assumptions, estimate_optimum, fit_rate, running_suboptimality, AssumptionEstimates,
    Evaluator,
};
use assp_core::problem::{
    HalfSquaredNorm, LinearObjective, Objective, PointMass, Sampler, ZeroPairwise,
};
use assp_core::rng::StreamRng;
use assp_core::saddle::advise;
use assp_core::{ConstraintFamily, Error, Hyperparams, ProblemSpec};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

struct Gaussian;
impl Sampler for Gaussian {
    fn sample(&self, _: usize, rng: &mut StreamRng) -> Vec<f64> {
        vec![Normal::new(1.0, 1.0).unwrap().sample(rng)]
    }
}

/// `½(x − θ)²`; with `θ ~ N(1, 1)` the minimum of the mean is `½` at `x = 1`.
struct Tracking;
impl Objective for Tracking {
    fn value(&self, _: usize, x: &[f64], t: &[f64]) -> f64 {
        0.5 * (x[0] - t[0]).powi(2)
    }
    fn grad(&self, _: usize, x: &[f64], t: &[f64]) -> Vec<f64> {
        vec![x[0] - t[0]]
    }
}

fn single_node(
    objective: Arc<dyn Objective>,
    sampler: Arc<dyn Sampler>,
    domain: DomainSpec,
) -> ProblemSpec {
    let g = NetworkGraph::new(1, &[]).unwrap();
    let c = ConstraintFamily::pairwise_uniform(Arc::new(ZeroPairwise), 0.0, &g);
    ProblemSpec::new(g, vec![domain], objective, c, sampler).unwrap()
}

#[test]
fn optimum_of_gaussian_tracking() {
    let spec = single_node(
        Arc::new(Tracking),
        Arc::new(Gaussian),
        DomainSpec::uniform_box(1, -5.0, 5.0),
    );
    let eval = Evaluator::new(&spec, 20_000, 3);
    let hp = Hyperparams::new(0.01, 0.0, 1).unwrap();
    let (f, x) = estimate_optimum(&spec, hp, 50_000, 11, &eval).unwrap();
    assert!((x[0][0] - 1.0).abs() <= 0.05, "{x:?}");
    assert!((f - 0.5).abs() <= 0.05, "{f}");

    let (f0, x0) = estimate_optimum(&spec, hp, 0, 11, &eval).unwrap();
    assert_eq!(x0, spec.initial_point());
    assert_eq!(f0, eval.objective(&spec, &x0));
}

#[test]
fn evaluator_uses_common_samples() {
    let spec = single_node(
        Arc::new(Tracking),
        Arc::new(Gaussian),
        DomainSpec::uniform_box(1, -5.0, 5.0),
    );
    let a = Evaluator::new(&spec, 500, 9);
    let b = Evaluator::new(&spec, 500, 9);
    assert_eq!(a.n_samples(), 500);
    let x = vec![vec![0.3]];
    assert_eq!(a.objective(&spec, &x), b.objective(&spec, &x));
    assert_ne!(
        a.objective(&spec, &x),
        Evaluator::new(&spec, 500, 10).objective(&spec, &x)
    );
}

#[test]
fn fit_rate_under_noise() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let noise = Normal::new(0.0, 0.05).unwrap();
    for &p in &[0.5, 0.75] {
        let s: Vec<f64> = (1..=10_000)
            .map(|t| (t as f64).powf(p) * (1.0 + noise.sample(&mut rng)))
            .collect();
        assert!((fit_rate(&s, 0.2).unwrap() - p).abs() <= 0.01);
    }
    // a 1/√t gap averages to a running suboptimality decaying like t^-1/2
    let vals: Vec<f64> = (1..=10_000)
        .map(|u| 1.0 + 1.0 / (u as f64).sqrt())
        .collect();
    let r = running_suboptimality(&vals, 1.0);
    assert!((fit_rate(&r, 0.2).unwrap() + 0.5).abs() <= 0.01);
    assert!(matches!(
        fit_rate(&[0.0; 50], 0.0),
        Err(Error::DegenerateSeries { positive: 0 })
    ));
}

#[test]
fn audit_of_linear_objective() {
    let c = vec![3.0, -4.0];
    let spec = single_node(
        Arc::new(LinearObjective { c }),
        Arc::new(PointMass {
            values: vec![vec![]],
        }),
        DomainSpec::uniform_box(2, -1.0, 1.0),
    );
    let est = audit_assumptions(&spec, 200, 1).unwrap();
    assert!((est.sigma_f_sq - 25.0).abs() < 1e-12);
    assert!(est.lipschitz_f <= 5.0 + 1e-9);
    assert!(est.lipschitz_f > 0.0);
    assert!(audit_assumptions(&spec, 99, 1).is_err());
}

#[test]
fn deterministic_specs_audit_identically() {
    let spec = single_node(
        Arc::new(HalfSquaredNorm),
        Arc::new(PointMass {
            values: vec![vec![]],
        }),
        DomainSpec::uniform_box(3, -2.0, 2.0),
    );
    let a = audit_assumptions(&spec, 150, 1).unwrap();
    let b = audit_assumptions(&spec, 150, 1).unwrap();
    assert_eq!(a, b);
    // ‖x‖² <= 12 on the box
    assert!(a.sigma_f_sq <= 12.0 && a.sigma_f_sq > 0.0);
}

#[test]
fn audit_of_consensus_is_bounded() {
    let spec = build_consensus_problem(&ConsensusRegressionConfig::default(), 0).unwrap();
    let est = audit_assumptions(&spec, 100, 2).unwrap();
    // each side of ‖x^i − x^j‖ has a unit-norm gradient
    assert!((est.sigma_h_sq - 2.0).abs() < 1e-9, "{est:?}");
    // box ±5 in four coordinates: diameter 20
    assert!(est.sigma_lambda_sq <= (20.0f64 + 0.5).powi(2));
    assert!(est.sigma_f_sq > 0.0 && est.lipschitz_f > 0.0);
}

/// δ-independent constant, computed directly.
fn c_const(est: &AssumptionEstimates, n: usize, m: usize, tau: usize) -> f64 {
    let l2 = est.sigma_f_sq.max(est.sigma_h_sq);
    let k1 = (n as f64 + (m * m) as f64) * l2;
    let t = tau as f64;
    2.0 * k1 + (t + 1.0) * t * (k1 + 4.0 * est.lipschitz_f * k1.sqrt())
}

proptest! {
    #[test]
    fn advisor_feasibility_matches_discriminant(
        sf in 0.0f64..5.0, sh in 0.0f64..5.0, sl in 0.0f64..5.0, lf in 0.0f64..5.0,
        n in 1usize..8, m in 0usize..6, tau in 0usize..12, log_t in 1.0f64..9.0,
    ) {
        let est = AssumptionEstimates { sigma_f_sq: sf, sigma_h_sq: sh, sigma_lambda_sq: sl, lipschitz_f: lf };
        let horizon = 10f64.powf(log_t) as usize;
        let eps = 1.0 / (horizon as f64).sqrt();
        let c = c_const(&est, n, m, tau);
        let disc = 1.0 - 8.0 * c * eps * eps;
        match advise(&est, n, m, tau, horizon) {
            Ok((hp, k)) => {
                prop_assert!(disc >= -1e-12);
                prop_assert!((hp.epsilon - eps).abs() < 1e-15);
                prop_assert!(k.k4 - hp.delta <= 1e-9 * (1.0 + hp.delta));
                prop_assert!(k.slack_at(hp.delta, eps) <= 1e-9 * (1.0 + hp.delta));
                prop_assert!(hp.delta >= c - 1e-9 * (1.0 + c));
            }
            Err(Error::NoFeasibleDelta { .. }) => prop_assert!(disc < 1e-12),
            Err(e) => prop_assert!(false, "{e}"),
        }
    }
}

#[test]
fn advisor_small_step_limit() {
    let est = AssumptionEstimates {
        sigma_f_sq: 2.0,
        sigma_h_sq: 1.0,
        sigma_lambda_sq: 4.0,
        lipschitz_f: 1.5,
    };
    let c = c_const(&est, 5, 10, 10);
    let (hp, k) = advise(&est, 5, 10, 10, 1_000_000_000_000).unwrap();
    assert!((hp.delta - c).abs() <= 1e-6 * c);
    assert!((k.c - c).abs() <= 1e-9 * c);
    assert!(matches!(
        advise(&est, 5, 10, 10, 10),
        Err(Error::NoFeasibleDelta { .. })
    ));
}
