//! Admissibility under the differential inclusion `x' in B(0, v(t, x))`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, ValidationIssue};
use crate::measures::{PathPolyline, TimeGrid, TrajectoryEnsemble, MASS_TOL};
use crate::poly::Polynomial;
use crate::scenario::Scenario;

/// Speed field given as a polynomial in `(t, x)`, clamped to `[v_lo, v_hi]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedField {
    #[serde(flatten)]
    pub expr: Polynomial,
    pub v_lo: f64,
    pub v_hi: f64,
}

/// Radius of the admissible velocity ball.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum VelocityConstraint {
    Max { v_max: f64 },
    Field { v_field: SpeedField },
}

impl VelocityConstraint {
    pub fn speed(&self, t: f64, x: &[f64]) -> f64 {
        match self {
            Self::Max { v_max } => *v_max,
            Self::Field { v_field } => v_field.expr.eval(t, x).clamp(v_field.v_lo, v_field.v_hi),
        }
    }

    /// Upper bound of the speed over all `(t, x)`.
    pub fn v_upper(&self) -> f64 {
        match self {
            Self::Max { v_max } => *v_max,
            Self::Field { v_field } => v_field.v_hi,
        }
    }

    pub fn validate(&self, path: &str, d: usize) -> Vec<ValidationIssue> {
        let mut out = Vec::new();
        match self {
            Self::Max { v_max } => {
                if !(v_max.is_finite() && *v_max > 0.0) {
                    out.push(ValidationIssue::new(format!("{path}/v_max"), "must be finite and > 0"));
                }
            }
            Self::Field { v_field } => {
                let p = format!("{path}/v_field");
                v_field.expr.check_shape(&p, d, &mut out);
                if !(v_field.v_lo.is_finite() && v_field.v_lo > 0.0) {
                    out.push(ValidationIssue::new(format!("{p}/v_lo"), "must be finite and > 0"));
                }
                if !(v_field.v_hi.is_finite() && v_field.v_hi >= v_field.v_lo) {
                    out.push(ValidationIssue::new(format!("{p}/v_hi"), "must be finite and >= v_lo"));
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub feasible: bool,
    /// `max |v_seg| / v_allowed - 1` over all segments; `-1` when nothing moves.
    pub worst_violation: f64,
    /// `(particle, interval)` pairs over the speed limit.
    pub offending: Vec<(usize, usize)>,
    pub initial_ok: bool,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Checks the initial marginal against the scenario and every segment speed
/// against the constraint at the segment midpoint.
pub fn check_admissible(ens: &TrajectoryEnsemble, scenario: &Scenario) -> Result<FeasibilityReport> {
    if ens.dim() != scenario.d {
        return Err(Error::DimensionMismatch {
            expected: scenario.d,
            found: ens.dim(),
        });
    }
    let grid = ens.grid();
    let initial_ok = ens
        .evaluate_at(grid.t_start())?
        .approx_eq(&scenario.initial, MASS_TOL);
    let tol = scenario.tolerances.speed_tol;
    let mut worst = f64::NEG_INFINITY;
    let mut offending = Vec::new();
    for k in 0..grid.intervals() {
        let t_mid = grid.mid(k);
        let dt = grid.dt(k);
        for (i, p) in ens.paths().iter().enumerate() {
            let (a, b) = (p.point(k), p.point(k + 1));
            let speed = a.iter().zip(b).map(|(x, y)| (y - x) * (y - x)).sum::<f64>().sqrt() / dt;
            let allowed = match &scenario.constraint {
                VelocityConstraint::Max { v_max } => *v_max,
                field => field.speed(t_mid, &p.interpolate(k, 0.5)),
            };
            let ratio = speed / allowed - 1.0;
            worst = worst.max(ratio);
            if ratio > tol {
                offending.push((i, k));
            }
        }
    }
    Ok(FeasibilityReport {
        feasible: initial_ok && offending.is_empty(),
        worst_violation: worst,
        offending,
        initial_ok,
    })
}

/// Forward pass that clips each displacement to the admissible length while
/// keeping its direction. The start point is fixed.
pub fn project_feasible(path: &PathPolyline, constraint: &VelocityConstraint, grid: &TimeGrid) -> PathPolyline {
    let d = path.dim();
    let mut out = path.clone();
    for k in 0..grid.intervals() {
        let dt = grid.dt(k);
        let t_mid = grid.mid(k);
        let start = out.point(k).to_vec();
        let target = path.point(k + 1);
        let disp: Vec<f64> = target.iter().zip(&start).map(|(b, a)| b - a).collect();
        let len = norm(&disp);
        let midpoint = |scale: f64| -> Vec<f64> {
            start.iter().zip(&disp).map(|(a, v)| a + 0.5 * scale * v).collect()
        };
        let allowed = |scale: f64| constraint.speed(t_mid, &midpoint(scale)) * dt;
        if len <= allowed(1.0) {
            out.point_mut(k + 1).copy_from_slice(target);
            continue;
        }
        // For a varying field the allowed length depends on where the
        // midpoint lands, so iterate to a fixed point and shrink if needed.
        let mut scale = allowed(1.0) / len;
        for _ in 0..50 {
            let next = allowed(scale) / len;
            if (next - scale).abs() <= 1e-15 * scale {
                break;
            }
            scale = next.min(1.0);
        }
        while scale * len > allowed(scale) {
            scale *= 1.0 - 1e-12;
        }
        let p = out.point_mut(k + 1);
        for j in 0..d {
            p[j] = start[j] + scale * disp[j];
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::Monomial;

    fn line(speed: f64, m: usize) -> (TimeGrid, PathPolyline) {
        let grid = TimeGrid::uniform(0.0, 1.0, m).unwrap();
        let pts: Vec<Vec<f64>> = grid.nodes().iter().map(|&t| vec![speed * t, 0.0]).collect();
        (grid, PathPolyline::from_points(&pts).unwrap())
    }

    #[test]
    fn projection_is_identity_on_feasible_paths() {
        let (grid, p) = line(0.5, 10);
        let c = VelocityConstraint::Max { v_max: 1.0 };
        assert_eq!(project_feasible(&p, &c, &grid), p);
        let still = PathPolyline::from_points(&vec![vec![1.0, 2.0]; 11]).unwrap();
        assert_eq!(project_feasible(&still, &c, &grid), still);
    }

    #[test]
    fn projection_slows_a_fast_line() {
        let (grid, p) = line(2.0, 10);
        let c = VelocityConstraint::Max { v_max: 1.0 };
        let q = project_feasible(&p, &c, &grid);
        assert!((q.point(10)[0] - 1.0).abs() < 1e-12);
        assert_eq!(q.point(10)[1], 0.0);
        for k in 0..10 {
            assert!(norm(&q.velocity(&grid, k)) <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn projection_respects_a_field() {
        // v(x) = 0.5 + x0^2, clamped to [0.5, 2].
        let c = VelocityConstraint::Field {
            v_field: SpeedField {
                expr: Polynomial {
                    constant: 0.5,
                    terms: vec![Monomial { coeff: 1.0, t_power: 0, x_powers: vec![2, 0] }],
                },
                v_lo: 0.5,
                v_hi: 2.0,
            },
        };
        let (grid, p) = line(5.0, 20);
        let q = project_feasible(&p, &c, &grid);
        for k in 0..20 {
            let allowed = c.speed(grid.mid(k), &q.interpolate(k, 0.5));
            assert!(norm(&q.velocity(&grid, k)) <= allowed * (1.0 + 1e-12));
        }
        assert_eq!(project_feasible(&q, &c, &grid), q);
    }

    #[test]
    fn constraint_json_forms() {
        let c: VelocityConstraint = serde_json::from_str(r#"{"v_max": 1}"#).unwrap();
        assert_eq!(c, VelocityConstraint::Max { v_max: 1.0 });
        let c: VelocityConstraint =
            serde_json::from_str(r#"{"v_field": {"constant": 1, "terms": [], "v_lo": 0.5, "v_hi": 3}}"#).unwrap();
        assert_eq!(c.speed(0.0, &[0.0]), 1.0);
        assert_eq!(c.v_upper(), 3.0);
    }
}
