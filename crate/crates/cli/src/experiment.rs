//! Multi-seed runs, derived series and summaries.

use assp_core::apps::{
    build_consensus_problem, build_pricing_problem, naive_baseline, revenue_series, sinr_report,
    PricingProblem,
};
use assp_core::metrics::{
    audit_assumptions, audit_trace, cumulative, delayed_violation, estimate_optimum, fit_rate,
    AssumptionEstimates, Evaluator, InvariantAudit,
};
use assp_core::saddle::{advise, run, run_synchronous, AdvisorConstants, RunOptions};
use assp_core::{DelaySchedule, Hyperparams, ProblemSpec, RunTrace};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{DelayKindName, ExperimentConfig, Mode, ProblemConfig};
use crate::error::CliError;
use crate::output;

/// A built problem; pricing instances keep their channel layout for SINR and
/// revenue reporting.
pub struct Instance {
    pub spec: ProblemSpec,
    pub pricing: Option<PricingProblem>,
}

pub fn build_instance(cfg: &ExperimentConfig) -> Result<Instance, CliError> {
    Ok(match &cfg.problem {
        ProblemConfig::Pricing(p) => {
            let problem = build_pricing_problem(p)?;
            Instance {
                spec: problem.spec.clone(),
                pricing: Some(problem),
            }
        }
        ProblemConfig::ConsensusRegression(c) => Instance {
            spec: build_consensus_problem(c, cfg.eval.instance_seed)?,
            pricing: None,
        },
    })
}

pub fn hyperparams(cfg: &ExperimentConfig) -> Result<Hyperparams, CliError> {
    Ok(Hyperparams::new(
        cfg.algo.epsilon,
        cfg.algo.delta,
        cfg.algo.horizon,
    )?)
}

fn schedule(
    cfg: &ExperimentConfig,
    n_nodes: usize,
    run_seed: u64,
) -> Result<DelaySchedule, CliError> {
    let tau = cfg.delay.tau_max;
    Ok(match cfg.delay.kind {
        DelayKindName::Zero => DelaySchedule::zero(),
        _ if tau == 0 => DelaySchedule::zero(),
        DelayKindName::Fixed => DelaySchedule::fixed(tau, n_nodes),
        DelayKindName::Uniform => {
            DelaySchedule::uniform(tau, cfg.delay.seed.wrapping_add(run_seed))
        }
        DelayKindName::Table => {
            DelaySchedule::table(cfg.delay.table.clone().unwrap_or_default(), tau)?
        }
    })
}

/// Per-iteration series written to the trace CSVs, rows `t = 0..=T`.
///
/// Running quantities at `t >= 1` average over `u = 1..=t`; row 0 holds the
/// gap of the initial point and zero violation.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SeriesTable {
    pub t: Vec<usize>,
    pub f_hat: Vec<f64>,
    pub subopt_running: Vec<f64>,
    pub violation_agg_running: Vec<f64>,
    pub violation_agg_cumclip: Vec<f64>,
    pub lambda_norm: Vec<f64>,
    pub max_staleness: Vec<f64>,
}

impl SeriesTable {
    pub fn from_trace(trace: &RunTrace, f_star: f64) -> Self {
        let f_hat: Vec<f64> = trace
            .rows
            .iter()
            .map(|r| r.f_hat.unwrap_or(f64::NAN))
            .collect();
        let gaps: Vec<f64> = f_hat[1..].iter().map(|f| f - f_star).collect();
        let mut subopt_running = vec![f_hat[0] - f_star];
        subopt_running.extend(
            cumulative(&gaps)
                .iter()
                .enumerate()
                .map(|(k, c)| c / (k + 1) as f64),
        );
        let mut cumclip = vec![0.0];
        cumclip.extend(delayed_violation(trace).aggregate);
        let violation_agg_running = cumclip
            .iter()
            .enumerate()
            .map(|(t, v)| if t == 0 { 0.0 } else { v / t as f64 })
            .collect();
        Self {
            t: trace.rows.iter().map(|r| r.t).collect(),
            f_hat,
            subopt_running,
            violation_agg_running,
            violation_agg_cumclip: cumclip,
            lambda_norm: trace.rows.iter().map(|r| r.lambda_norm).collect(),
            max_staleness: trace.rows.iter().map(|r| r.max_staleness as f64).collect(),
        }
    }

    /// Pointwise mean over tables of equal length.
    pub fn mean(tables: &[SeriesTable]) -> Self {
        let n = tables.len() as f64;
        let avg = |pick: fn(&SeriesTable) -> &Vec<f64>| -> Vec<f64> {
            (0..pick(&tables[0]).len())
                .map(|k| tables.iter().map(|s| pick(s)[k]).sum::<f64>() / n)
                .collect()
        };
        Self {
            t: tables[0].t.clone(),
            f_hat: avg(|s| &s.f_hat),
            subopt_running: avg(|s| &s.subopt_running),
            violation_agg_running: avg(|s| &s.violation_agg_running),
            violation_agg_cumclip: avg(|s| &s.violation_agg_cumclip),
            lambda_norm: avg(|s| &s.lambda_norm),
            max_staleness: avg(|s| &s.max_staleness),
        }
    }

    /// `Σ_{u<=t} (F̂(x_u) − F*)` for `t = 1..=T`.
    pub fn cumulative_suboptimality(&self) -> Vec<f64> {
        self.subopt_running[1..]
            .iter()
            .enumerate()
            .map(|(k, s)| s * (k + 1) as f64)
            .collect()
    }

    pub fn last_subopt(&self) -> f64 {
        *self.subopt_running.last().expect("nonempty table")
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AuditReport {
    pub passed: bool,
    pub counts: InvariantAudit,
}

impl AuditReport {
    fn from_traces<'a>(spec: &ProblemSpec, traces: impl IntoIterator<Item = &'a RunTrace>) -> Self {
        let counts = traces
            .into_iter()
            .map(|t| audit_trace(spec, t))
            .fold(InvariantAudit::default(), InvariantAudit::merge);
        Self {
            passed: counts.passed(),
            counts,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AdvisorReport {
    pub estimates: AssumptionEstimates,
    pub n_nodes: usize,
    pub n_constraints: usize,
    pub tau_max: usize,
    #[serde(rename = "T")]
    pub horizon: usize,
    pub recommended_epsilon: Option<f64>,
    pub recommended_delta: Option<f64>,
    pub constants: Option<AdvisorConstants>,
    /// Why no regularizer could be recommended.
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SummaryReport {
    pub config: ExperimentConfig,
    pub f_star: f64,
    pub final_subopt_running: f64,
    pub final_violation_agg_cumclip: f64,
    /// Log-log slope of the seed-averaged cumulative suboptimality.
    pub slope_subopt_cumsum: Option<f64>,
    /// Log-log slope of the seed-averaged clipped cumulative violation.
    pub slope_violation_cumsum: Option<f64>,
    /// Per-MU SINR in dB, averaged over seeds.
    pub sinr_db: Option<Vec<f64>>,
    pub naive_sinr_db: Option<Vec<f64>>,
    /// Final-quarter mean revenue, averaged over seeds.
    pub final_revenue: Option<f64>,
    pub audit: AuditReport,
    pub advisor: AdvisorReport,
}

pub struct ExperimentResult {
    pub summary: SummaryReport,
    pub per_seed: Vec<SeriesTable>,
    pub averaged: SeriesTable,
}

#[derive(Debug, Clone, Serialize)]
pub struct CompareReport {
    pub config: ExperimentConfig,
    pub f_star: f64,
    pub final_subopt_running_sync: f64,
    pub final_subopt_running_async: f64,
    /// Async over sync final running suboptimality.
    pub subopt_ratio: f64,
    pub audit: AuditReport,
}

pub struct CompareResult {
    pub summary: CompareReport,
    pub sync: SeriesTable,
    pub asynchronous: SeriesTable,
}

fn optimum(
    cfg: &ExperimentConfig,
    inst: &Instance,
    evaluator: &Evaluator,
) -> Result<f64, CliError> {
    let hp = hyperparams(cfg)?;
    Ok(estimate_optimum(
        &inst.spec,
        hp,
        cfg.eval.optimum_budget,
        cfg.eval.optimum_seed,
        evaluator,
    )?
    .0)
}

fn run_seeds(
    cfg: &ExperimentConfig,
    inst: &Instance,
    mode: Mode,
    evaluator: &Evaluator,
) -> Result<Vec<RunTrace>, CliError> {
    let hp = hyperparams(cfg)?;
    cfg.eval
        .seeds
        .par_iter()
        .map(|&seed| {
            let opts = RunOptions {
                thin_every: cfg.output.thin_every,
                evaluator: Some(evaluator),
                track_current_slack: false,
            };
            let trace = match mode {
                Mode::Sync => run_synchronous(&inst.spec, hp, seed, opts)?,
                Mode::Async => run(
                    &inst.spec,
                    hp,
                    &schedule(cfg, inst.spec.n_nodes(), seed)?,
                    seed,
                    opts,
                )?,
            };
            Ok(trace)
        })
        .collect()
}

fn mean_vectors(v: &[Vec<f64>]) -> Vec<f64> {
    (0..v[0].len())
        .map(|k| v.iter().map(|r| r[k]).sum::<f64>() / v.len() as f64)
        .collect()
}

/// Assumption estimates plus the advisor's recommendation for the config.
pub fn advise_config(cfg: &ExperimentConfig) -> Result<AdvisorReport, CliError> {
    let inst = build_instance(cfg)?;
    let estimates = audit_config_with(cfg, &inst)?;
    let (n, m) = (inst.spec.n_nodes(), inst.spec.n_duals());
    let mut report = AdvisorReport {
        estimates,
        n_nodes: n,
        n_constraints: m,
        tau_max: cfg.delay.tau_max,
        horizon: cfg.algo.horizon,
        recommended_epsilon: None,
        recommended_delta: None,
        constants: None,
        error: None,
    };
    match advise(&estimates, n, m, cfg.delay.tau_max, cfg.algo.horizon) {
        Ok((hp, k)) => {
            report.recommended_epsilon = Some(hp.epsilon);
            report.recommended_delta = Some(hp.delta);
            report.constants = Some(k);
        }
        Err(e @ assp_core::Error::NoFeasibleDelta { .. }) => report.error = Some(e.to_string()),
        Err(e) => return Err(e.into()),
    }
    Ok(report)
}

pub fn audit_config(cfg: &ExperimentConfig) -> Result<AssumptionEstimates, CliError> {
    audit_config_with(cfg, &build_instance(cfg)?)
}

fn audit_config_with(
    cfg: &ExperimentConfig,
    inst: &Instance,
) -> Result<AssumptionEstimates, CliError> {
    Ok(audit_assumptions(
        &inst.spec,
        cfg.eval.audit_samples,
        cfg.eval.instance_seed,
    )?)
}

/// Runs every seed, derives the series and the summary; writes nothing.
pub fn compute_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult, CliError> {
    let inst = build_instance(cfg)?;
    let evaluator = Evaluator::new(&inst.spec, cfg.eval.mc_samples, cfg.eval.eval_seed);
    let f_star = optimum(cfg, &inst, &evaluator)?;
    let traces = run_seeds(cfg, &inst, cfg.algo.mode, &evaluator)?;
    let per_seed: Vec<SeriesTable> = traces
        .iter()
        .map(|t| SeriesTable::from_trace(t, f_star))
        .collect();
    let averaged = SeriesTable::mean(&per_seed);

    let (mut sinr_db, mut naive_sinr_db, mut final_revenue) = (None, None, None);
    if let (Some(p), ProblemConfig::Pricing(pc)) = (&inst.pricing, &cfg.problem) {
        let sinr: Vec<Vec<f64>> = traces
            .iter()
            .map(|t| sinr_report(p, t))
            .collect::<Result<_, _>>()?;
        let naive: Vec<Vec<f64>> = traces
            .iter()
            .map(|t| naive_baseline(pc, t.seed, cfg.algo.horizon))
            .collect::<Result<_, _>>()?;
        let revenue: f64 = traces
            .iter()
            .map(|t| revenue_series(p, t).final_quarter_mean())
            .sum::<f64>()
            / traces.len() as f64;
        sinr_db = Some(mean_vectors(&sinr));
        naive_sinr_db = Some(mean_vectors(&naive));
        final_revenue = Some(revenue);
    }

    let burn_in = cfg.eval.burn_in;
    let summary = SummaryReport {
        config: cfg.clone(),
        f_star,
        final_subopt_running: averaged.last_subopt(),
        final_violation_agg_cumclip: *averaged.violation_agg_cumclip.last().expect("nonempty"),
        slope_subopt_cumsum: fit_rate(&averaged.cumulative_suboptimality(), burn_in).ok(),
        slope_violation_cumsum: fit_rate(&averaged.violation_agg_cumclip[1..], burn_in).ok(),
        sinr_db,
        naive_sinr_db,
        final_revenue,
        audit: AuditReport::from_traces(&inst.spec, &traces),
        advisor: advise_config(cfg)?,
    };
    Ok(ExperimentResult {
        summary,
        per_seed,
        averaged,
    })
}

/// [`compute_experiment`], then one trace CSV per seed, `averaged.csv` and
/// `summary.json` under the output directory.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult, CliError> {
    let result = compute_experiment(cfg)?;
    let dir = &cfg.output.dir;
    output::ensure_dir(dir)?;
    for (seed, table) in cfg.eval.seeds.iter().zip(&result.per_seed) {
        output::write_series(&dir.join(format!("trace_seed{seed}.csv")), table)?;
    }
    output::write_series(&dir.join("averaged.csv"), &result.averaged)?;
    output::write_json(&dir.join("summary.json"), &result.summary)?;
    Ok(result)
}

/// Synchronous and asynchronous runs over the same seeds against one
/// reference optimum; writes `compare.csv` and `compare_summary.json`.
pub fn compare_modes(cfg: &ExperimentConfig) -> Result<CompareResult, CliError> {
    let inst = build_instance(cfg)?;
    let evaluator = Evaluator::new(&inst.spec, cfg.eval.mc_samples, cfg.eval.eval_seed);
    let f_star = optimum(cfg, &inst, &evaluator)?;
    let sync_traces = run_seeds(cfg, &inst, Mode::Sync, &evaluator)?;
    let async_traces = run_seeds(cfg, &inst, Mode::Async, &evaluator)?;
    let table = |traces: &[RunTrace]| {
        let per: Vec<SeriesTable> = traces
            .iter()
            .map(|t| SeriesTable::from_trace(t, f_star))
            .collect();
        SeriesTable::mean(&per)
    };
    let sync = table(&sync_traces);
    let asynchronous = table(&async_traces);
    let (s, a) = (sync.last_subopt(), asynchronous.last_subopt());
    let summary = CompareReport {
        config: cfg.clone(),
        f_star,
        final_subopt_running_sync: s,
        final_subopt_running_async: a,
        subopt_ratio: a / s,
        audit: AuditReport::from_traces(&inst.spec, sync_traces.iter().chain(&async_traces)),
    };
    let dir = &cfg.output.dir;
    output::ensure_dir(dir)?;
    output::write_overlay(&dir.join("compare.csv"), &sync, &asynchronous)?;
    output::write_json(&dir.join("compare_summary.json"), &summary)?;
    Ok(CompareResult {
        summary,
        sync,
        asynchronous,
    })
}
