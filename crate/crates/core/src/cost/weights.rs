use serde::{Deserialize, Serialize};

use crate::error::ValidationIssue;

/// Slack when comparing a realized multiplicity against a jump threshold,
/// so that sums like `0.5 + 0.5` land on the closed side of the jump.
const JUMP_SLACK: f64 = 1e-12;

/// Non-increasing, lower semicontinuous weight applied to multiplicity.
/// Used both for the running weight (psi) and the terminal weight (phi).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum MultiplicityWeight {
    /// `|log r|`
    LogAbs,
    /// `r^(-p) - 1`, `p > 0`
    Power { p: f64 },
    /// `+inf` for `r < r0`, else `0`
    IndicatorBelow { r0: f64 },
    ConstantOne,
    /// Step function: `values[j]` on `[thresholds[j], thresholds[j+1])`.
    /// `thresholds[0] == 0`, thresholds increasing, values non-increasing.
    /// Jumps take the right value, which makes the step l.s.c.
    Tabulated {
        thresholds: Vec<f64>,
        #[serde(with = "crate::ext::real_vec")]
        values: Vec<f64>,
    },
}

impl MultiplicityWeight {
    pub fn eval(&self, r: f64) -> f64 {
        match self {
            Self::LogAbs => r.ln().abs(),
            Self::Power { p } => (r.powf(-p) - 1.0).max(0.0),
            Self::IndicatorBelow { r0 } => {
                if r < r0 - JUMP_SLACK {
                    f64::INFINITY
                } else {
                    0.0
                }
            }
            Self::ConstantOne => 1.0,
            Self::Tabulated { thresholds, values } => {
                let j = thresholds.partition_point(|&th| th <= r + JUMP_SLACK);
                values[j.saturating_sub(1)]
            }
        }
    }

    pub fn validate(&self, path: &str) -> Vec<ValidationIssue> {
        let mut out = Vec::new();
        match self {
            Self::Power { p } if !(p.is_finite() && *p > 0.0) => {
                out.push(ValidationIssue::new(format!("{path}/params/p"), "must be > 0"));
            }
            Self::IndicatorBelow { r0 } if !(*r0 > 0.0 && *r0 <= 1.0) => {
                out.push(ValidationIssue::new(format!("{path}/params/r0"), "must lie in (0, 1]"));
            }
            Self::Tabulated { thresholds, values } => {
                if thresholds.is_empty() || thresholds.len() != values.len() {
                    out.push(ValidationIssue::new(
                        format!("{path}/params"),
                        "thresholds and values must be non-empty and of equal length",
                    ));
                    return out;
                }
                if thresholds[0] != 0.0 {
                    out.push(ValidationIssue::new(format!("{path}/params/thresholds/0"), "must be 0"));
                }
                if thresholds.windows(2).any(|w| w[1] <= w[0]) {
                    out.push(ValidationIssue::new(
                        format!("{path}/params/thresholds"),
                        "must be strictly increasing",
                    ));
                }
                if values.iter().any(|v| v.is_nan() || *v < 0.0) {
                    out.push(ValidationIssue::new(format!("{path}/params/values"), "must be >= 0"));
                }
                if values.windows(2).any(|w| w[1] > w[0]) {
                    out.push(ValidationIssue::new(
                        format!("{path}/params/values"),
                        "must be non-increasing",
                    ));
                }
            }
            _ => {}
        }
        out
    }
}
