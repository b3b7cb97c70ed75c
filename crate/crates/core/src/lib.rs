//! Multi-agent optimal control with time-dependent multiplicity.
//!
//! Path measures are finitely supported ensembles of polylines whose
//! coincidences are declared by an explicit cluster schedule. The running
//! cost weights each particle by a non-increasing function of the mass it
//! currently shares a position with, so aggregation is rewarded.

pub mod cost;
pub mod dpp;
pub mod dynamics;
mod error;
pub mod ext;
pub mod measures;
pub mod oracle;
pub mod poly;
pub mod scenario;
pub mod solver;

pub use cost::{running_cost, terminal_cost, total_cost, CostBreakdown};
pub use dynamics::{check_admissible, project_feasible, FeasibilityReport, VelocityConstraint};
pub use error::{Error, Result, ValidationIssue};
pub use measures::{Atom, ClusterSchedule, EmpiricalMeasure, PathPolyline, TimeGrid, TrajectoryEnsemble};
pub use scenario::{Scenario, Tolerances};
