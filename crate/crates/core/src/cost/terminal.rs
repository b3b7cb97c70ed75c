use serde::{Deserialize, Serialize};

use super::transport;
use crate::error::ValidationIssue;
use crate::measures::{EmpiricalMeasure, MASS_TOL};

/// Terminal cost `G(x, mu)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum TerminalCost {
    Zero,
    /// `lambda * |x - T(x)|^2` averaged over the optimal transport of the
    /// atom at `x` onto `target`.
    WassersteinPenalty { lambda: f64, target: EmpiricalMeasure },
    /// Indicator of `{target}`: `0` when the final measure equals the target
    /// atom for atom, `+inf` otherwise.
    HardTarget { target: EmpiricalMeasure },
}

impl TerminalCost {
    /// `G(x_a, mu)` for every atom `x_a` of `mu`, in atom order.
    pub fn atom_values(&self, mu: &EmpiricalMeasure) -> Vec<f64> {
        match self {
            Self::Zero => vec![0.0; mu.len()],
            Self::HardTarget { target } => {
                let g = if mu.approx_eq(target, MASS_TOL) {
                    0.0
                } else {
                    f64::INFINITY
                };
                vec![g; mu.len()]
            }
            Self::WassersteinPenalty { lambda, target } => {
                let a: Vec<f64> = mu.atoms().iter().map(|x| x.mass).collect();
                let b: Vec<f64> = target.atoms().iter().map(|y| y.mass).collect();
                let cost: Vec<Vec<f64>> = mu
                    .atoms()
                    .iter()
                    .map(|x| target.atoms().iter().map(|y| sq_dist(&x.point, &y.point)).collect())
                    .collect();
                let plan = transport::optimal_plan(&a, &b, &cost);
                plan.iter()
                    .zip(&cost)
                    .zip(&a)
                    .map(|((row, crow), &mass)| {
                        let moved: f64 = row.iter().zip(crow).map(|(p, c)| p * c).sum();
                        lambda * moved / mass
                    })
                    .collect()
            }
        }
    }

    pub fn target(&self) -> Option<&EmpiricalMeasure> {
        match self {
            Self::Zero => None,
            Self::WassersteinPenalty { target, .. } | Self::HardTarget { target } => Some(target),
        }
    }

    pub fn is_hard(&self) -> bool {
        matches!(self, Self::HardTarget { .. })
    }

    pub fn validate(&self, path: &str, d: usize) -> Vec<ValidationIssue> {
        let mut out = Vec::new();
        if let Self::WassersteinPenalty { lambda, .. } = self {
            if !(lambda.is_finite() && *lambda >= 0.0) {
                out.push(ValidationIssue::new(format!("{path}/params/lambda"), "must be >= 0"));
            }
        }
        if let Some(t) = self.target() {
            if t.dim() != d {
                out.push(ValidationIssue::new(
                    format!("{path}/params/target"),
                    format!("dimension {} does not match d = {d}", t.dim()),
                ));
            }
        }
        out
    }
}

pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}
