//! Closed-form rendezvous of two half-masses heading for a common target.
//!
//! Two particles start at `(0, 1)` and `(0, -1)` with speed at most 1, cost
//! `|log m|` per unit time and must end at `(R, 0)` at time `T`. Optimal
//! play meets as early as possible at some `(alpha, 0)` and then travels
//! together.

use serde::{Deserialize, Serialize};

use crate::cost::{total_cost, Lagrangian, MultiplicityWeight, TerminalCost};
use crate::dynamics::VelocityConstraint;
use crate::error::{Error, Result};
use crate::measures::{Atom, EmpiricalMeasure, PathPolyline, TimeGrid, TrajectoryEnsemble};
use crate::scenario::{Scenario, Tolerances};

/// Arrival positions within this (relative) distance of the target are
/// snapped onto it so the hard terminal constraint holds bit-exactly.
const ARRIVAL_SNAP: f64 = 1e-12;

pub fn example1_scenario(r: f64, t: f64, m: usize) -> Scenario {
    Scenario {
        d: 2,
        horizon: [0.0, t],
        m,
        initial: EmpiricalMeasure::new(vec![
            Atom { point: vec![0.0, 1.0], mass: 0.5 },
            Atom { point: vec![0.0, -1.0], mass: 0.5 },
        ])
        .expect("two half atoms"),
        constraint: VelocityConstraint::Max { v_max: 1.0 },
        psi: MultiplicityWeight::LogAbs,
        phi: MultiplicityWeight::ConstantOne,
        lagrangian: Lagrangian::ConstantOne,
        terminal: TerminalCost::HardTarget {
            target: EmpiricalMeasure::dirac(vec![r, 0.0]).expect("finite target"),
        },
        tolerances: Tolerances::default(),
        seed: 0,
    }
}

/// Optimal meeting abscissa, `None` when the target is unreachable.
pub fn alpha_bar(r: f64, t: f64) -> Option<f64> {
    if t < (1.0 + r * r).sqrt() {
        return None;
    }
    let gap = t - r;
    Some(((1.0 - gap * gap) / (2.0 * gap)).max(0.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Example1Solution {
    pub feasible: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha_bar: Option<f64>,
    /// Meeting time `sqrt(1 + alpha^2)`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s_bar: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub meet_point: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub arrival_time: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cost: Option<f64>,
    /// Cost of the minimizer sampled on the grid, which carries the
    /// discretization error of the meeting time.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sampled_cost: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub minimizer: Option<TrajectoryEnsemble>,
}

/// Exact optimum for target `(r, 0)` and horizon `t`, plus the minimizer
/// sampled on `grid` (which must span `[0, t]`).
pub fn example1_optimum(r: f64, t: f64, grid: &TimeGrid) -> Result<Example1Solution> {
    if !(r.is_finite() && r > 0.0 && t.is_finite() && t > 0.0) {
        return Err(Error::domain(format!("need R > 0 and T > 0, got R = {r}, T = {t}")));
    }
    if grid.t_start() != 0.0 || grid.t_end() != t {
        return Err(Error::domain(format!(
            "grid spans [{}, {}], expected [0, {t}]",
            grid.t_start(),
            grid.t_end()
        )));
    }
    let Some(alpha) = alpha_bar(r, t) else {
        return Ok(Example1Solution {
            feasible: false,
            alpha_bar: None,
            s_bar: None,
            meet_point: None,
            arrival_time: None,
            cost: None,
            sampled_cost: None,
            minimizer: None,
        });
    };
    let s_bar = (1.0 + alpha * alpha).sqrt();
    let cost = s_bar * std::f64::consts::LN_2;
    let minimizer = sample_minimizer(r, alpha, s_bar, grid)?;
    let sampled_cost = total_cost(&minimizer, &example1_scenario(r, t, grid.intervals())).total;
    Ok(Example1Solution {
        feasible: true,
        alpha_bar: Some(alpha),
        s_bar: Some(s_bar),
        meet_point: Some([alpha, 0.0]),
        arrival_time: Some(s_bar + r - alpha),
        cost: Some(cost),
        sampled_cost: Some(sampled_cost),
        minimizer: Some(minimizer),
    })
}

/// Samples the continuous minimizer at the nodes. Both particles sit at the
/// same computed point from the first node at or after `s_bar`, so the
/// sampled ensemble stays admissible; the price is an `O(dt)` delay of the
/// recorded meeting.
fn sample_minimizer(r: f64, alpha: f64, s_bar: f64, grid: &TimeGrid) -> Result<TrajectoryEnsemble> {
    let path = |y0: f64| -> Vec<Vec<f64>> {
        grid.nodes()
            .iter()
            .map(|&t| {
                if t < s_bar {
                    let f = t / s_bar;
                    vec![f * alpha, y0 - f * y0]
                } else {
                    let a = alpha + (t - s_bar);
                    let a = if a >= r - ARRIVAL_SNAP * (1.0 + r) { r } else { a };
                    vec![a, 0.0]
                }
            })
            .collect()
    };
    let paths = vec![
        PathPolyline::from_points(&path(1.0))?,
        PathPolyline::from_points(&path(-1.0))?,
    ];
    TrajectoryEnsemble::from_paths(grid.clone(), paths, vec![0.5, 0.5])
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::LN_2;

    #[test]
    fn alpha_regimes() {
        assert_eq!(alpha_bar(3.0, 5.0), Some(0.0));
        assert!((alpha_bar(3.0, 3.5).unwrap() - 0.75).abs() < 1e-15);
        assert_eq!(alpha_bar(3.0, 3.1), None);
        // At the threshold the meeting happens at the target.
        let t = 10f64.sqrt();
        assert!((alpha_bar(3.0, t).unwrap() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn interior_meeting_is_tight() {
        let grid = TimeGrid::uniform(0.0, 3.5, 70).unwrap();
        let s = example1_optimum(3.0, 3.5, &grid).unwrap();
        let (a, sb) = (s.alpha_bar.unwrap(), s.s_bar.unwrap());
        assert!((sb - 1.25).abs() < 1e-15);
        assert!((sb + 3.0 - a - 3.5).abs() < 1e-12);
        assert!((s.cost.unwrap() - 1.25 * LN_2).abs() < 1e-12);
    }

    #[test]
    fn infeasible_serializes_compactly() {
        let grid = TimeGrid::uniform(0.0, 3.1, 10).unwrap();
        let s = example1_optimum(3.0, 3.1, &grid).unwrap();
        assert_eq!(serde_json::to_string(&s).unwrap(), r#"{"feasible":false}"#);
    }

    #[test]
    fn grid_must_span_horizon() {
        let grid = TimeGrid::uniform(0.0, 4.0, 10).unwrap();
        assert!(example1_optimum(3.0, 5.0, &grid).is_err());
        assert!(example1_optimum(-1.0, 4.0, &grid).is_err());
    }
}
