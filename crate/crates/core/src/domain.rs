//! Compact convex per-node domains and their Euclidean projections.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DomainSpec {
    /// Coordinatewise bounds `lo <= y <= hi`.
    Box { lo: Vec<f64>, hi: Vec<f64> },
    /// `c_min <= sum(y) <= c_max`, optionally with `y >= 0`.
    ///
    /// For `dim > 1` the set is only bounded with `nonnegative = true`.
    SumInterval {
        dim: usize,
        c_min: f64,
        c_max: f64,
        nonnegative: bool,
    },
}

impl DomainSpec {
    pub fn uniform_box(dim: usize, lo: f64, hi: f64) -> Self {
        DomainSpec::Box {
            lo: vec![lo; dim],
            hi: vec![hi; dim],
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            DomainSpec::Box { lo, .. } => lo.len(),
            DomainSpec::SumInterval { dim, .. } => *dim,
        }
    }

    /// Checks that the set is nonempty, compact and well formed.
    pub fn validate(&self) -> Result<()> {
        match self {
            DomainSpec::Box { lo, hi } => {
                if lo.len() != hi.len() {
                    return Err(Error::DimensionMismatch {
                        expected: lo.len(),
                        got: hi.len(),
                    });
                }
                if lo.is_empty() {
                    return Err(Error::InfeasibleDomain("zero-dimensional box".into()));
                }
                for (k, (&l, &h)) in lo.iter().zip(hi).enumerate() {
                    if !l.is_finite() || !h.is_finite() {
                        return Err(Error::InfeasibleDomain(format!(
                            "box bound {k} is not finite"
                        )));
                    }
                    if l > h {
                        return Err(Error::InfeasibleDomain(format!(
                            "box bound {k}: lo {l} > hi {h}"
                        )));
                    }
                }
                Ok(())
            }
            DomainSpec::SumInterval {
                dim,
                c_min,
                c_max,
                nonnegative,
            } => {
                if *dim == 0 {
                    return Err(Error::InfeasibleDomain(
                        "zero-dimensional sum interval".into(),
                    ));
                }
                if !c_min.is_finite() || !c_max.is_finite() || c_min > c_max {
                    return Err(Error::InfeasibleDomain(format!(
                        "sum interval [{c_min}, {c_max}] is empty or unbounded"
                    )));
                }
                if *nonnegative && *c_max < 0.0 {
                    return Err(Error::InfeasibleDomain(format!(
                        "nonnegative coordinates cannot sum to at most {c_max}"
                    )));
                }
                if *dim > 1 && !nonnegative {
                    return Err(Error::InfeasibleDomain(
                        "sum interval without nonnegativity is unbounded for dim > 1".into(),
                    ));
                }
                Ok(())
            }
        }
    }

    /// Euclidean projection of `u` onto the domain.
    pub fn project(&self, u: &[f64]) -> Result<Vec<f64>> {
        self.validate()?;
        if u.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: u.len(),
            });
        }
        Ok(self.project_unchecked(u))
    }

    /// Projection without validation; callers must have validated the domain
    /// and the dimension.
    pub(crate) fn project_unchecked(&self, u: &[f64]) -> Vec<f64> {
        match self {
            DomainSpec::Box { lo, hi } => u
                .iter()
                .zip(lo.iter().zip(hi))
                .map(|(&v, (&l, &h))| v.clamp(l, h))
                .collect(),
            DomainSpec::SumInterval {
                c_min,
                c_max,
                nonnegative,
                ..
            } => {
                if *nonnegative {
                    project_nonneg_sum_interval(u, *c_min, *c_max)
                } else {
                    let n = u.len() as f64;
                    let sum: f64 = u.iter().sum();
                    let target = if sum < *c_min {
                        *c_min
                    } else if sum > *c_max {
                        *c_max
                    } else {
                        return u.to_vec();
                    };
                    if u.len() == 1 {
                        return vec![target];
                    }
                    let shift = (target - sum) / n;
                    u.iter().map(|v| v + shift).collect()
                }
            }
        }
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        if x.len() != self.dim() || x.iter().any(|v| !v.is_finite()) {
            return false;
        }
        match self {
            DomainSpec::Box { lo, hi } => x
                .iter()
                .zip(lo.iter().zip(hi))
                .all(|(&v, (&l, &h))| v >= l - tol && v <= h + tol),
            DomainSpec::SumInterval {
                c_min,
                c_max,
                nonnegative,
                ..
            } => {
                let sum: f64 = x.iter().sum();
                let scale = tol * (1.0 + c_max.abs());
                sum >= c_min - scale
                    && sum <= c_max + scale
                    && (!nonnegative || x.iter().all(|&v| v >= -tol))
            }
        }
    }

    /// A canonical interior point: the box midpoint, or equal coordinates
    /// summing to the middle of the interval.
    pub fn center(&self) -> Vec<f64> {
        match self {
            DomainSpec::Box { lo, hi } => lo.iter().zip(hi).map(|(l, h)| 0.5 * (l + h)).collect(),
            DomainSpec::SumInterval {
                dim, c_min, c_max, ..
            } => vec![0.5 * (c_min + c_max) / *dim as f64; *dim],
        }
    }

    /// Random feasible point; uniform for boxes, uniform on the simplex slice
    /// `sum = s` with `s ~ U[c_min, c_max]` for nonnegative sum intervals.
    pub fn sample_point<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        match self {
            DomainSpec::Box { lo, hi } => lo
                .iter()
                .zip(hi)
                .map(|(&l, &h)| if h > l { rng.random_range(l..=h) } else { l })
                .collect(),
            DomainSpec::SumInterval {
                dim, c_min, c_max, ..
            } => {
                let total = if c_max > c_min {
                    rng.random_range(*c_min..=*c_max)
                } else {
                    *c_min
                };
                let weights: Vec<f64> = (0..*dim)
                    .map(|_| -(1.0 - rng.random::<f64>()).ln())
                    .collect();
                let norm: f64 = weights.iter().sum();
                weights.iter().map(|w| total * w / norm).collect()
            }
        }
    }
}

/// Projection onto `{y >= 0, c_min <= sum(y) <= c_max}`.
///
/// The solution is `y = max(u - nu, 0)` for a scalar `nu`: zero when the
/// clamped point already satisfies the sum bounds, otherwise the unique shift
/// making the clamped sum hit the violated bound.
fn project_nonneg_sum_interval(u: &[f64], c_min: f64, c_max: f64) -> Vec<f64> {
    let clamped_sum: f64 = u.iter().map(|v| v.max(0.0)).sum();
    let target = if clamped_sum > c_max {
        c_max
    } else if clamped_sum < c_min {
        c_min
    } else {
        return u.iter().map(|v| v.max(0.0)).collect();
    };
    if target <= 0.0 {
        return vec![0.0; u.len()];
    }
    let nu = threshold_for_sum(u, target);
    u.iter().map(|v| (v - nu).max(0.0)).collect()
}

/// Solves `sum_k max(u_k - nu, 0) = target` for `target > 0`.
fn threshold_for_sum(u: &[f64], target: f64) -> f64 {
    let mut sorted = u.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut prefix = 0.0;
    for (k, &v) in sorted.iter().enumerate() {
        prefix += v;
        let nu = (prefix - target) / (k + 1) as f64;
        let next_inactive = sorted.get(k + 1).is_none_or(|&w| w <= nu);
        if v > nu && next_inactive {
            return nu;
        }
    }
    (prefix - target) / sorted.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn approx(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn feasible_point_is_fixed() {
        let d = DomainSpec::SumInterval {
            dim: 2,
            c_min: 0.9,
            c_max: 20.0,
            nonnegative: true,
        };
        assert_eq!(d.project(&[1.0, 2.0]).unwrap(), vec![1.0, 2.0]);
    }

    #[test]
    fn low_sum_shifts_up() {
        let d = DomainSpec::SumInterval {
            dim: 2,
            c_min: 0.9,
            c_max: 20.0,
            nonnegative: true,
        };
        assert!(approx(&d.project(&[0.2, 0.3]).unwrap(), &[0.4, 0.5], 1e-12));
    }

    #[test]
    fn high_sum_hits_cap_and_clamps() {
        let d = DomainSpec::SumInterval {
            dim: 3,
            c_min: 0.9,
            c_max: 20.0,
            nonnegative: true,
        };
        let y = d.project(&[30.0, 2.0, -5.0]).unwrap();
        assert!(approx(&y, &[20.0, 0.0, 0.0], 1e-12), "{y:?}");
    }

    #[test]
    fn box_clamps() {
        let d = DomainSpec::uniform_box(2, 0.0, 1.0);
        assert_eq!(d.project(&[-1.0, 0.5]).unwrap(), vec![0.0, 0.5]);
    }

    #[test]
    fn scalar_interval_without_nonnegativity() {
        let d = DomainSpec::SumInterval {
            dim: 1,
            c_min: 0.9,
            c_max: 20.0,
            nonnegative: false,
        };
        assert_eq!(d.project(&[-3.0]).unwrap(), vec![0.9]);
        assert_eq!(d.project(&[25.0]).unwrap(), vec![20.0]);
    }

    #[test]
    fn empty_domains_are_rejected() {
        let d = DomainSpec::Box {
            lo: vec![1.0],
            hi: vec![0.0],
        };
        assert!(matches!(d.project(&[0.5]), Err(Error::InfeasibleDomain(_))));
        let d = DomainSpec::SumInterval {
            dim: 2,
            c_min: 3.0,
            c_max: 1.0,
            nonnegative: true,
        };
        assert!(matches!(
            d.project(&[0.5, 0.5]),
            Err(Error::InfeasibleDomain(_))
        ));
    }

    #[test]
    fn dimension_is_checked() {
        let d = DomainSpec::uniform_box(2, 0.0, 1.0);
        assert_eq!(
            d.project(&[0.0]).unwrap_err(),
            Error::DimensionMismatch {
                expected: 2,
                got: 1
            }
        );
    }

    #[test]
    fn center_is_feasible() {
        let d = DomainSpec::SumInterval {
            dim: 2,
            c_min: 0.9,
            c_max: 20.0,
            nonnegative: true,
        };
        let c = d.center();
        assert!(approx(&c, &[5.225, 5.225], 1e-12));
        assert!(d.contains(&c, 0.0));
    }
}
