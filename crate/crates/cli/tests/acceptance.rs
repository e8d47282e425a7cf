//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use assp_cli::config::Overrides;
use assp_cli::{compare_modes, compute_experiment, parse_config_str, ExperimentConfig};
use assp_core::apps::{
    build_consensus_problem, build_pricing_problem, ConsensusRegressionConfig, PricingConfig,
};
use assp_core::metrics::{audit_trace, fit_rate, AssumptionEstimates, InvariantAudit};
use assp_core::problem::{Arg, LeastSquares, NormProximity, Objective, PairwiseConstraint};
use assp_core::rng::{stream_rng, Stream, StreamRng};
use assp_core::saddle::{
    advise, lagrangian_primal_gradient, run, run_generalized, run_synchronous,
    stochastic_lagrangian, RunOptions,
};
use assp_core::{DelaySchedule, DomainSpec, Error, Hyperparams, ProblemSpec};
use rand::Rng;

const CONSENSUS: &str = r#"{
  "problem": "consensus_regression",
  "algo": {"T": 10000, "delta": 1.0},
  "delay": {"kind": "uniform", "tau_max": 10},
  "eval": {"seeds": [0, 1, 2, 3, 4]}
}"#;

fn pricing(gamma_db: f64) -> String {
    format!(
        r#"{{
  "problem": {{"name": "pricing", "params": {{"M": 2, "N": 3, "gamma_db": [{gamma_db}]}}}},
  "algo": {{"epsilon": 0.01, "delta": 1e-5, "T": 50000}},
  "delay": {{"kind": "uniform", "tau_max": 10}},
  "eval": {{"seeds": [0, 1, 2, 3, 4]}}
}}"#
    )
}

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

struct Suite {
    results: Vec<(usize, &'static str, Verdict, Duration)>,
    audits: InvariantAudit,
    audited_runs: usize,
}

impl Suite {
    fn check(
        &mut self,
        id: usize,
        name: &'static str,
        f: impl FnOnce(&mut Self) -> Result<Verdict, String>,
    ) {
        let start = Instant::now();
        let v = f(self).unwrap_or_else(|e| verdict(false, format!("error: {e}")));
        let elapsed = start.elapsed();
        println!(
            "criterion {id} {} {name}: {} [{:.1}s]",
            if v.pass { "PASS" } else { "FAIL" },
            v.detail,
            elapsed.as_secs_f64()
        );
        self.results.push((id, name, v, elapsed));
    }

    fn absorb(&mut self, audit: InvariantAudit, runs: usize) {
        self.audits = self.audits.merge(audit);
        self.audited_runs += runs;
    }
}

fn config(text: &str, dir: &std::path::Path) -> Result<ExperimentConfig, String> {
    let mut cfg = parse_config_str(text, &Overrides::default()).map_err(|e| e.to_string())?;
    cfg.output.dir = dir.to_path_buf();
    Ok(cfg)
}

fn consensus_spec() -> ProblemSpec {
    build_consensus_problem(&ConsensusRegressionConfig::default(), 0).expect("default instance")
}

fn zero_delay_equivalence(s: &mut Suite) -> Result<Verdict, String> {
    let spec = consensus_spec();
    let hp = Hyperparams::for_horizon(2000, 1.0).map_err(|e| e.to_string())?;
    let start = Instant::now();
    let mut identical = 0;
    for seed in 0..5 {
        let a = run(
            &spec,
            hp,
            &DelaySchedule::zero(),
            seed,
            RunOptions::default(),
        )
        .map_err(|e| e.to_string())?;
        let b =
            run_synchronous(&spec, hp, seed, RunOptions::default()).map_err(|e| e.to_string())?;
        if a == b {
            identical += 1;
        }
        s.absorb(audit_trace(&spec, &a).merge(audit_trace(&spec, &b)), 2);
    }
    let secs = start.elapsed().as_secs_f64();
    Ok(verdict(
        identical == 5 && secs < 10.0,
        format!("{identical}/5 seeds bitwise identical, {secs:.2}s (limit 10s)"),
    ))
}

fn consensus_rates(s: &mut Suite, dir: &std::path::Path) -> Result<(Verdict, Verdict), String> {
    let cfg = config(CONSENSUS, dir)?;
    let start = Instant::now();
    let r = compute_experiment(&cfg).map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    s.absorb(r.summary.audit.counts, cfg.eval.seeds.len());
    let sub = r.summary.slope_subopt_cumsum;
    let vio = r.summary.slope_violation_cumsum;
    let v2 = verdict(
        sub.is_some_and(|v| v <= 0.6) && secs < 120.0,
        format!("cumulative suboptimality slope {sub:?} (limit 0.6), {secs:.1}s (limit 120s)"),
    );
    let v3 = verdict(
        vio.is_some_and(|v| v <= 0.8),
        format!("clipped cumulative violation slope {vio:?} (limit 0.8)"),
    );
    Ok((v2, v3))
}

fn sinr_bands(s: &mut Suite, dir: &std::path::Path) -> Result<(Verdict, f64), String> {
    let cfg = config(&pricing(-3.0), dir)?;
    let start = Instant::now();
    let r = compute_experiment(&cfg).map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    s.absorb(r.summary.audit.counts, cfg.eval.seeds.len());
    let algo = r.summary.sinr_db.clone().ok_or("no SINR")?;
    let naive = r.summary.naive_sinr_db.clone().ok_or("no baseline")?;
    let targets = [29.0, 28.0];
    let mut pass = secs < 120.0;
    for i in 0..2 {
        pass &= (algo[i] - targets[i]).abs() <= 3.0;
        pass &= (naive[i] - 22.0).abs() <= 3.0;
        pass &= algo[i] - naive[i] >= 4.0;
    }
    Ok((
        verdict(
            pass,
            format!(
                "algorithm {:.2}/{:.2} dB (29±3, 28±3), naive {:.2}/{:.2} dB (22±3), gain {:.2}/{:.2} dB (>= 4), {secs:.1}s",
                algo[0],
                algo[1],
                naive[0],
                naive[1],
                algo[0] - naive[0],
                algo[1] - naive[1]
            ),
        ),
        r.summary.final_revenue.ok_or("no revenue")?,
    ))
}

fn revenue_ordering(s: &mut Suite, dir: &std::path::Path, low: f64) -> Result<Verdict, String> {
    let cfg = config(&pricing(4.0), dir)?;
    let r = compute_experiment(&cfg).map_err(|e| e.to_string())?;
    s.absorb(r.summary.audit.counts, cfg.eval.seeds.len());
    let high = r.summary.final_revenue.ok_or("no revenue")?;
    Ok(verdict(
        high >= 1.1 * low,
        format!(
            "final-quarter revenue {high:.4} at 4 dB vs {low:.4} at -3 dB, margin {:.1}% (>= 10%)",
            100.0 * (high - low) / low
        ),
    ))
}

fn async_vs_sync(s: &mut Suite, dir: &std::path::Path) -> Result<Verdict, String> {
    let cfg = config(&pricing(-3.0), dir)?;
    let r = compare_modes(&cfg).map_err(|e| e.to_string())?;
    s.absorb(r.summary.audit.counts, 2 * cfg.eval.seeds.len());
    let horizon = cfg.algo.horizon;
    let a_end = r.asynchronous.subopt_running[horizon];
    let a_decade = r.asynchronous.subopt_running[horizon / 10];
    let s_end = r.sync.subopt_running[horizon];
    Ok(verdict(
        a_end >= s_end && a_end < a_decade,
        format!(
            "running suboptimality at T: async {a_end:.5} vs sync {s_end:.5} (ratio {:.3}); async at T/10 {a_decade:.5}",
            a_end / s_end
        ),
    ))
}

/// Best point of `{y >= 0, c_lo <= Σy <= c_hi}` among the clamped point and
/// every face `y_S = u_S − ν`, `Σ y_S = b`, `b ∈ {c_lo, c_hi}`.
fn projection_oracle(u: &[f64], c_lo: f64, c_hi: f64) -> Vec<f64> {
    let dist = |y: &[f64]| u.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut consider = |y: Vec<f64>| {
        let d = dist(&y);
        if best.as_ref().is_none_or(|(bd, _)| d < *bd) {
            best = Some((d, y));
        }
    };
    let clamped: Vec<f64> = u.iter().map(|v| v.max(0.0)).collect();
    let sum: f64 = clamped.iter().sum();
    if sum >= c_lo && sum <= c_hi {
        consider(clamped);
    }
    let n = u.len();
    for b in [c_lo, c_hi] {
        for mask in 1u32..(1 << n) {
            let members: Vec<usize> = (0..n).filter(|k| mask & (1 << k) != 0).collect();
            let nu = (members.iter().map(|&k| u[k]).sum::<f64>() - b) / members.len() as f64;
            let mut y = vec![0.0; n];
            for &k in &members {
                y[k] = u[k] - nu;
            }
            if y.iter().all(|&v| v >= -1e-12) {
                consider(y);
            }
        }
    }
    best.expect("nonempty set").1
}

fn fd(f: &dyn Fn(&[f64]) -> f64, x: &[f64]) -> Vec<f64> {
    const H: f64 = 1e-6;
    (0..x.len())
        .map(|k| {
            let (mut up, mut dn) = (x.to_vec(), x.to_vec());
            up[k] += H;
            dn[k] -= H;
            (f(&up) - f(&dn)) / (2.0 * H)
        })
        .collect()
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let e = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt();
    e / a.iter().map(|x| x * x).sum::<f64>().sqrt().max(1.0)
}

fn vec_in(rng: &mut StreamRng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(lo..hi)).collect()
}

fn lagrangian_fd_error(
    spec: &ProblemSpec,
    x: &[Vec<f64>],
    lambda: &[f64],
    theta: &[Vec<f64>],
) -> f64 {
    let hp = Hyperparams::new(0.1, 0.5, 1).expect("valid");
    let g = lagrangian_primal_gradient(spec, x, lambda, theta);
    (0..spec.n_nodes())
        .map(|i| {
            let f = |y: &[f64]| {
                let mut xx = x.to_vec();
                xx[i] = y.to_vec();
                stochastic_lagrangian(spec, &hp, &xx, lambda, theta)
            };
            rel_err(&g[i], &fd(&f, &x[i]))
        })
        .fold(0.0, f64::max)
}

fn oracle_suites() -> Result<Verdict, String> {
    let mut rng = stream_rng(42, Stream::Audit, 0, 0);

    let mut proj_err: f64 = 0.0;
    for _ in 0..100 {
        let n = rng.random_range(1..=4);
        let c_lo = rng.random_range(0.0..3.0);
        let c_hi = c_lo + rng.random_range(0.0..5.0);
        let u = vec_in(&mut rng, n, -6.0, 8.0);
        let d = DomainSpec::SumInterval {
            dim: n,
            c_min: c_lo,
            c_max: c_hi,
            nonnegative: true,
        };
        let y = d.project(&u).map_err(|e| e.to_string())?;
        let o = projection_oracle(&u, c_lo, c_hi);
        proj_err = y
            .iter()
            .zip(&o)
            .map(|(a, b)| (a - b).abs())
            .fold(proj_err, f64::max);
    }

    let mut grad_err: f64 = 0.0;
    let mut points = 0;
    while points < 100 {
        let x = vec_in(&mut rng, 4, -3.0, 3.0);
        let th = vec_in(&mut rng, 5, -2.0, 2.0);
        grad_err = grad_err.max(rel_err(
            &LeastSquares.grad(0, &x, &th),
            &fd(&|y| LeastSquares.value(0, y, &th), &x),
        ));
        let xj = vec_in(&mut rng, 4, -3.0, 3.0);
        if NormProximity.value(0, 1, &x, &xj, &[], &[]) < 1e-3 {
            continue;
        }
        let g1 = NormProximity.grad(0, 1, Arg::First, &x, &xj, &[], &[]);
        let g2 = NormProximity.grad(0, 1, Arg::Second, &x, &xj, &[], &[]);
        grad_err = grad_err.max(rel_err(
            &g1,
            &fd(&|y| NormProximity.value(0, 1, y, &xj, &[], &[]), &x),
        ));
        grad_err = grad_err.max(rel_err(
            &g2,
            &fd(&|y| NormProximity.value(0, 1, &x, y, &[], &[]), &xj),
        ));
        points += 1;
    }
    let consensus = consensus_spec();
    let pricing = build_pricing_problem(&PricingConfig::default()).map_err(|e| e.to_string())?;
    let mut t = 0u64;
    let (mut done_c, mut done_p) = (0, 0);
    while done_c < 100 || done_p < 100 {
        t += 1;
        if done_c < 100 {
            let x: Vec<Vec<f64>> = (0..5).map(|_| vec_in(&mut rng, 4, -4.0, 4.0)).collect();
            let smooth = consensus
                .graph()
                .edges()
                .iter()
                .all(|&(i, j)| NormProximity.value(i, j, &x[i], &x[j], &[], &[]) > 1e-3);
            if smooth {
                let theta: Vec<Vec<f64>> = (0..5)
                    .map(|i| consensus.sample_observation(1, i, t))
                    .collect();
                let lam = vec_in(&mut rng, consensus.n_duals(), 0.0, 3.0);
                grad_err = grad_err.max(lagrangian_fd_error(&consensus, &x, &lam, &theta));
                done_c += 1;
            }
        }
        if done_p < 100 {
            let spec = &pricing.spec;
            let x: Vec<Vec<f64>> = (0..3)
                .map(|n| vec_in(&mut rng, spec.dim(n), 0.0, 1.5))
                .collect();
            let theta: Vec<Vec<f64>> = (0..3).map(|n| spec.sample_observation(2, n, t)).collect();
            // keep away from the power clipping kink
            let smooth = x.iter().zip(&theta).all(|(xn, tn)| {
                xn.iter()
                    .enumerate()
                    .all(|(s, &v)| (1.0 / (0.1 + v) - 1.0 / tn[2 * s + 1]).abs() > 1e-3)
            });
            if smooth {
                let lam = vec_in(&mut rng, spec.n_duals(), 0.0, 3.0);
                grad_err = grad_err.max(lagrangian_fd_error(spec, &x, &lam, &theta));
                done_p += 1;
            }
        }
    }

    let mut fit_err: f64 = 0.0;
    for &p in &[0.5, 0.75] {
        let s: Vec<f64> = (1..=10_000)
            .map(|t| (t as f64).powf(p) * (1.0 + 0.05 * (rng.random::<f64>() - 0.5)))
            .collect();
        fit_err = fit_err.max((fit_rate(&s, 0.2).map_err(|e| e.to_string())? - p).abs());
    }

    let path = ConsensusRegressionConfig {
        n_nodes: 3,
        edges: Some(vec![(0, 1), (1, 2)]),
        ..ConsensusRegressionConfig::default()
    };
    let pairwise = build_consensus_problem(&path, 0).map_err(|e| e.to_string())?;
    let nbhd = pairwise
        .clone()
        .with_constraints(
            pairwise
                .constraints()
                .to_neighborhood(pairwise.graph())
                .map_err(|e| e.to_string())?,
        )
        .map_err(|e| e.to_string())?;
    let hp = Hyperparams::for_horizon(2000, 1.0).map_err(|e| e.to_string())?;
    let sched = DelaySchedule::uniform(5, 3);
    let a = run(&pairwise, hp, &sched, 1, RunOptions::default()).map_err(|e| e.to_string())?;
    let b =
        run_generalized(&nbhd, hp, &sched, 1, RunOptions::default()).map_err(|e| e.to_string())?;
    let mut enc_err: f64 = 0.0;
    for (ra, rb) in a.rows.iter().zip(&b.rows) {
        let (xa, xb) = (
            ra.x.as_ref().ok_or("no snapshot")?,
            rb.x.as_ref().ok_or("no snapshot")?,
        );
        for (u, v) in xa.iter().flatten().zip(xb.iter().flatten()) {
            enc_err = enc_err.max((u - v).abs());
        }
    }
    for (u, v) in a.final_state.lambda.iter().zip(&b.final_state.lambda) {
        enc_err = enc_err.max((u - v).abs());
    }

    Ok(verdict(
        proj_err <= 1e-6 && grad_err <= 1e-5 && fit_err <= 0.01 && enc_err <= 1e-12,
        format!(
            "projection {proj_err:.1e} (<= 1e-6), gradients rel {grad_err:.1e} (<= 1e-5), \
             fit_rate {fit_err:.1e} (<= 0.01), encodings {enc_err:.1e} (<= 1e-12)"
        ),
    ))
}

fn advisor_consistency() -> Result<Verdict, String> {
    let mut rng = stream_rng(43, Stream::Audit, 0, 0);
    let (mut feasible, mut infeasible, mut bad) = (0, 0, 0);
    for _ in 0..500 {
        let est = AssumptionEstimates {
            sigma_f_sq: rng.random_range(0.0..10.0),
            sigma_h_sq: rng.random_range(0.0..10.0),
            sigma_lambda_sq: rng.random_range(0.0..10.0),
            lipschitz_f: rng.random_range(0.0..10.0),
        };
        let (n, m, tau) = (
            rng.random_range(1..10),
            rng.random_range(0..20),
            rng.random_range(0..15),
        );
        let horizon = 10f64.powf(rng.random_range(1.0..12.0)) as usize;
        let l2 = est.sigma_f_sq.max(est.sigma_h_sq);
        let k1 = (n as f64 + (m * m) as f64) * l2;
        let tf = tau as f64;
        let c = 2.0 * k1 + (tf + 1.0) * tf * (k1 + 4.0 * est.lipschitz_f * k1.sqrt());
        let disc = 1.0 - 8.0 * c / horizon as f64;
        match advise(&est, n, m, tau, horizon) {
            Ok((hp, k)) if disc >= 0.0 && k.k4 - hp.delta <= 0.0 => feasible += 1,
            Err(Error::NoFeasibleDelta { .. }) if disc < 0.0 => infeasible += 1,
            _ => bad += 1,
        }
    }
    Ok(verdict(
        bad == 0 && feasible > 0 && infeasible > 0,
        format!("{feasible} feasible with K4 - delta <= 0, {infeasible} rejected on a negative discriminant, {bad} inconsistent"),
    ))
}

fn main() -> ExitCode {
    let tmp = tempfile::tempdir().expect("temp dir");
    let mut suite = Suite {
        results: Vec::new(),
        audits: InvariantAudit::default(),
        audited_runs: 0,
    };
    suite.check(1, "zero-delay equivalence", zero_delay_equivalence);

    let mut violation = None;
    suite.check(2, "suboptimality rate", |s| {
        consensus_rates(s, tmp.path()).map(|(v2, v3)| {
            violation = Some(v3);
            v2
        })
    });
    suite.check(3, "violation rate", |_| {
        violation.ok_or_else(|| "the consensus run did not complete".to_string())
    });

    let mut low_revenue = None;
    suite.check(4, "SINR bands", |s| {
        sinr_bands(s, tmp.path()).map(|(v, rev)| {
            low_revenue = Some(rev);
            v
        })
    });
    suite.check(5, "revenue ordering", |s| match low_revenue {
        Some(low) => revenue_ordering(s, tmp.path(), low),
        None => Err("the -3 dB run did not complete".into()),
    });
    suite.check(6, "async vs sync suboptimality", |s| {
        async_vs_sync(s, tmp.path())
    });
    suite.check(7, "oracle suites", |_| oracle_suites());
    suite.check(8, "invariant audit", |s| {
        Ok(verdict(
            s.audits.passed() && s.audited_runs > 0,
            format!("{} runs audited, counts {:?}", s.audited_runs, s.audits),
        ))
    });
    suite.check(9, "advisor consistency", |_| advisor_consistency());

    let failed: Vec<usize> = suite
        .results
        .iter()
        .filter(|r| !r.2.pass)
        .map(|r| r.0)
        .collect();
    let total: f64 = suite.results.iter().map(|r| r.3.as_secs_f64()).sum();
    println!(
        "acceptance: {}/{} criteria passed in {total:.1}s",
        suite.results.len() - failed.len(),
        suite.results.len()
    );
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("failed criteria: {failed:?}");
        ExitCode::FAILURE
    }
}
