//! Theory-driven hyperparameters.
//!
//! With `L² = max(σ_f², σ_h²)`:
//!
//! ```text
//! K1 = (N + M²) L²
//! K2 = M σ_λ² + (N + M²) L² + τ K1
//! K3 = δ² ε² + (N + M²) L²
//! K4 = 2 K3 + (τ + 1) τ (K1 + 4 L_f √K1)
//! K  = 2 K2 + 4 τ L_f √K1
//! ```
//!
//! The regularizer must satisfy `K4(δ) − δ <= 0`. Since `K4 = 2ε²δ² + C`
//! with `C` independent of δ, the smallest admissible δ is the smaller root
//! of `2ε²δ² − δ + C = 0`, which exists iff `1 − 8Cε² >= 0`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::metrics::AssumptionEstimates;

use super::Hyperparams;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AdvisorConstants {
    pub l_sq: f64,
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
    pub k4: f64,
    pub k: f64,
    /// δ-independent part of `K4`.
    pub c: f64,
    pub discriminant: f64,
}

impl AdvisorConstants {
    /// `K4(δ) − δ` for a candidate regularizer, with `ε` fixed.
    pub fn slack_at(&self, delta: f64, epsilon: f64) -> f64 {
        2.0 * delta * delta * epsilon * epsilon + self.c - delta
    }
}

/// Recommends `ε = 1/√T` and the smallest `δ` with `K4(δ) <= δ`.
///
/// `n_constraints` is `M`, the number of scalar multipliers.
pub fn advise(
    est: &AssumptionEstimates,
    n_nodes: usize,
    n_constraints: usize,
    tau: usize,
    horizon: usize,
) -> Result<(Hyperparams, AdvisorConstants)> {
    for (name, v) in [
        ("sigma_f_sq", est.sigma_f_sq),
        ("sigma_h_sq", est.sigma_h_sq),
        ("sigma_lambda_sq", est.sigma_lambda_sq),
        ("lipschitz_f", est.lipschitz_f),
    ] {
        if !(v.is_finite() && v >= 0.0) {
            return Err(Error::InvalidHyperparams(format!(
                "{name} must be finite and nonnegative, got {v}"
            )));
        }
    }
    if horizon == 0 {
        return Err(Error::InvalidHyperparams("horizon must be positive".into()));
    }
    let n = n_nodes as f64;
    let m = n_constraints as f64;
    let tau_f = tau as f64;
    let eps = 1.0 / (horizon as f64).sqrt();

    let l_sq = est.sigma_f_sq.max(est.sigma_h_sq);
    let base = (n + m * m) * l_sq;
    let k1 = base;
    let sqrt_k1 = k1.sqrt();
    let delay_term = (tau_f + 1.0) * tau_f * (k1 + 4.0 * est.lipschitz_f * sqrt_k1);
    let c = 2.0 * base + delay_term;
    let discriminant = 1.0 - 8.0 * c * eps * eps;
    if discriminant < 0.0 {
        return Err(Error::NoFeasibleDelta {
            c,
            epsilon: eps,
            discriminant,
            min_horizon: 8.0 * c,
        });
    }

    let root = discriminant.sqrt();
    // smaller root of 2ε²δ² − δ + C, written to avoid cancellation
    let small = 2.0 * c / (1.0 + root);
    let large = (1.0 + root) / (4.0 * eps * eps);
    // nudge into the interior so K4(δ) − δ is strictly negative despite rounding
    let delta = if large > small {
        small + (1e-9 * small.max(f64::MIN_POSITIVE)).min(0.5 * (large - small))
    } else {
        small
    };

    let k2 = m * est.sigma_lambda_sq + base + tau_f * k1;
    let k3 = delta * delta * eps * eps + base;
    let k4 = 2.0 * k3 + delay_term;
    let k = 2.0 * k2 + 4.0 * tau_f * est.lipschitz_f * sqrt_k1;

    let hp = Hyperparams {
        epsilon: eps,
        delta,
        horizon,
    };
    Ok((
        hp,
        AdvisorConstants {
            l_sq,
            k1,
            k2,
            k3,
            k4,
            k,
            c,
            discriminant,
        },
    ))
}
