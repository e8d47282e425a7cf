//! Ready-made problem instances.

pub mod consensus;
pub mod pricing;

pub use consensus::{build_consensus_problem, ConsensusRegressionConfig, RegressionSampler};
pub use pricing::{
    build_pricing_problem, naive_baseline, power_allocation, revenue_series, sinr_report,
    PricingConfig, PricingProblem, RevenueSeries,
};

/// `10 log10(v)`.
pub fn to_db(v: f64) -> f64 {
    10.0 * v.log10()
}

/// `10^(db / 10)`.
pub fn from_db(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}
