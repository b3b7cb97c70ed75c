//! Waypoint descent with the cluster schedule frozen.
//!
//! With the schedule fixed every multiplicity factor is a constant, so only
//! the smooth part of the cost moves. Whole clusters are shifted at interior
//! nodes; a move is kept only if it is admissible, keeps clusters apart and
//! strictly lowers the cost of the two adjacent intervals.

use super::{Solution, SolverConfig};
use crate::cost::{interval_cost, total_cost};
use crate::dynamics::check_admissible;
use crate::error::{Error, Result};
use crate::measures::TrajectoryEnsemble;
use crate::scenario::Scenario;

fn segment_ok(ens: &TrajectoryEnsemble, scenario: &Scenario, i: usize, k: usize) -> bool {
    let p = ens.path(i);
    let grid = ens.grid();
    let speed = p.velocity(grid, k).iter().map(|v| v * v).sum::<f64>().sqrt();
    let allowed = scenario.constraint.speed(grid.mid(k), &p.interpolate(k, 0.5));
    speed <= allowed * (1.0 + scenario.tolerances.speed_tol)
}

pub fn refine(solution: &Solution, scenario: &Scenario, config: &SolverConfig) -> Result<Solution> {
    if !config.refine.enabled || scenario.lagrangian.is_path_independent() {
        return Ok(solution.clone());
    }
    let mut ens = solution.ensemble.clone();
    let grid = ens.grid().clone();
    let m = grid.intervals();
    let d = ens.dim();
    let scale = ens
        .paths()
        .iter()
        .flat_map(|p| p.coords().iter().map(|x| x.abs()))
        .fold(1.0, f64::max);
    let f_tol = config.f_tol(scenario);
    let x_tol = config.x_tol(scenario);
    let mut h = config.refine.initial_step * scale;
    for _ in 0..config.refine.max_sweeps {
        let mut gain = 0.0;
        for k in 1..m {
            let clusters = ens.schedule().members(k);
            for (ci, cluster) in clusters.iter().enumerate() {
                for j in 0..d {
                    for sign in [1.0, -1.0] {
                        let before = interval_cost(&ens, k - 1, scenario) + interval_cost(&ens, k, scenario);
                        let old = ens.path(cluster[0]).point(k)[j];
                        let new = old + sign * h;
                        for &i in cluster {
                            ens.path_mut(i).point_mut(k)[j] = new;
                        }
                        let here = ens.path(cluster[0]).point(k).to_vec();
                        let apart = clusters
                            .iter()
                            .enumerate()
                            .all(|(cj, other)| cj == ci || ens.path(other[0]).point(k) != here.as_slice());
                        let ok = apart
                            && cluster
                                .iter()
                                .all(|&i| segment_ok(&ens, scenario, i, k - 1) && segment_ok(&ens, scenario, i, k));
                        let after = if ok {
                            interval_cost(&ens, k - 1, scenario) + interval_cost(&ens, k, scenario)
                        } else {
                            f64::INFINITY
                        };
                        if after < before {
                            gain += before - after;
                            break;
                        }
                        for &i in cluster {
                            ens.path_mut(i).point_mut(k)[j] = old;
                        }
                    }
                }
            }
        }
        if gain < f_tol {
            h *= 0.5;
            if h < x_tol * scale {
                break;
            }
        }
    }
    let report = check_admissible(&ens, scenario)?;
    if !report.feasible {
        return Err(Error::invalid(format!(
            "refinement produced an inadmissible ensemble (worst violation {})",
            report.worst_violation
        )));
    }
    let breakdown = total_cost(&ens, scenario);
    if breakdown.total > solution.breakdown.total {
        return Ok(solution.clone());
    }
    Ok(Solution {
        ensemble: ens,
        breakdown,
        ..solution.clone()
    })
}
