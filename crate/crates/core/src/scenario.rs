//! Problem instances.

use serde::{Deserialize, Serialize};

use crate::cost::{Lagrangian, MultiplicityWeight, TerminalCost};
use crate::dynamics::VelocityConstraint;
use crate::error::{Error, Result, ValidationIssue};
use crate::measures::{EmpiricalMeasure, TimeGrid};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    /// Relative slack on the speed bound.
    pub speed_tol: f64,
    /// Objective tolerance of the inner search and of refinement.
    pub f_tol: f64,
    /// Step tolerance of the inner search, relative to the problem scale.
    pub x_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            speed_tol: 1e-9,
            f_tol: 1e-9,
            x_tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub d: usize,
    /// `[t0, T]`
    pub horizon: [f64; 2],
    /// Number of grid intervals.
    #[serde(rename = "M")]
    pub m: usize,
    pub initial: EmpiricalMeasure,
    pub constraint: VelocityConstraint,
    pub psi: MultiplicityWeight,
    pub phi: MultiplicityWeight,
    pub lagrangian: Lagrangian,
    pub terminal: TerminalCost,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub seed: u64,
}

impl Scenario {
    pub fn t0(&self) -> f64 {
        self.horizon[0]
    }

    pub fn t_end(&self) -> f64 {
        self.horizon[1]
    }

    pub fn grid(&self) -> Result<TimeGrid> {
        TimeGrid::uniform(self.horizon[0], self.horizon[1], self.m)
    }

    pub fn issues(&self) -> Vec<ValidationIssue> {
        let mut out = Vec::new();
        let d = self.d;
        if d == 0 {
            out.push(ValidationIssue::new("/d", "must be >= 1"));
        }
        let [t0, t1] = self.horizon;
        if !(t0.is_finite() && t1.is_finite() && t1 > t0) {
            out.push(ValidationIssue::new("/horizon", "must be finite with t0 < T"));
        }
        if self.m == 0 {
            out.push(ValidationIssue::new("/M", "must be >= 1"));
        }
        if self.initial.dim() != d {
            out.push(ValidationIssue::new(
                "/initial",
                format!("dimension {} does not match d = {d}", self.initial.dim()),
            ));
        }
        out.extend(self.constraint.validate("/constraint", d));
        out.extend(self.psi.validate("/psi"));
        out.extend(self.phi.validate("/phi"));
        out.extend(self.lagrangian.validate("/lagrangian", d));
        out.extend(self.terminal.validate("/terminal", d));
        let tol = &self.tolerances;
        for (name, v) in [("speed_tol", tol.speed_tol), ("f_tol", tol.f_tol), ("x_tol", tol.x_tol)] {
            if !(v.is_finite() && v > 0.0) {
                out.push(ValidationIssue::new(format!("/tolerances/{name}"), "must be finite and > 0"));
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let issues = self.issues();
        if issues.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(issues))
        }
    }

    /// Same problem started at `t0` from `initial`, keeping `T`.
    pub fn restarted(&self, t0: f64, m: usize, initial: EmpiricalMeasure) -> Self {
        Self {
            horizon: [t0, self.horizon[1]],
            m,
            initial,
            ..self.clone()
        }
    }
}
