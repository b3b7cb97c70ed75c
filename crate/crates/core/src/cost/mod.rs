//! Multiplicity-weighted running and terminal costs.

mod lagrangian;
mod terminal;
pub mod transport;
mod weights;

use std::io::Write;

use serde::{Deserialize, Serialize};

pub use lagrangian::Lagrangian;
pub use terminal::TerminalCost;
pub use weights::MultiplicityWeight;

use crate::ext;
use crate::measures::{Atom, EmpiricalMeasure, TrajectoryEnsemble};
use crate::scenario::Scenario;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalCost {
    pub k: usize,
    pub t_mid: f64,
    #[serde(with = "ext::real")]
    pub contribution: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    #[serde(with = "ext::real")]
    pub running: f64,
    #[serde(with = "ext::real")]
    pub terminal: f64,
    #[serde(with = "ext::real")]
    pub total: f64,
    /// Running cost carried by each particle.
    #[serde(with = "ext::real_vec")]
    pub per_particle: Vec<f64>,
    pub per_interval: Vec<IntervalCost>,
}

impl CostBreakdown {
    /// CSV with one row per interval: `k,t_mid,contribution`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "k,t_mid,contribution")?;
        for row in &self.per_interval {
            writeln!(w, "{},{},{}", row.k, row.t_mid, fmt_ext(row.contribution))?;
        }
        Ok(())
    }
}

pub(crate) fn fmt_ext(x: f64) -> String {
    if x == f64::INFINITY {
        "inf".to_string()
    } else {
        x.to_string()
    }
}

/// Per-particle contributions of interval `k`, summed in particle order.
pub(crate) fn interval_terms<'a>(
    ens: &'a TrajectoryEnsemble,
    k: usize,
    scenario: &'a Scenario,
) -> impl Iterator<Item = f64> + 'a {
    let grid = ens.grid();
    let dt = grid.dt(k);
    let t_mid = grid.mid(k);
    let second_moment = if scenario.lagrangian.needs_measure() {
        ens.paths()
            .iter()
            .zip(ens.weights())
            .map(|(p, w)| w * p.interpolate(k, 0.5).iter().map(|x| x * x).sum::<f64>())
            .sum()
    } else {
        0.0
    };
    let lagr = &scenario.lagrangian;
    let psi = &scenario.psi;
    ens.paths().iter().enumerate().map(move |(i, p)| {
        let weight = ens.weights()[i] * dt;
        let psi_val = psi.eval(ens.interval_multiplicity(k, i));
        let l = if lagr.is_path_independent() {
            lagr.eval(t_mid, &[], &[], 0.0)
        } else {
            lagr.eval(t_mid, &p.interpolate(k, 0.5), &p.velocity(grid, k), second_moment)
        };
        ext::mul(ext::mul(weight, psi_val), l)
    })
}

/// Cost of interval `k` alone.
pub(crate) fn interval_cost(ens: &TrajectoryEnsemble, k: usize, scenario: &Scenario) -> f64 {
    interval_terms(ens, k, scenario).sum()
}

/// `sum_k sum_i w_i dt_k psi(m_{k,i}) L(t_mid, x_mid, v_seg, mu_mid)`.
pub fn running_cost(ens: &TrajectoryEnsemble, scenario: &Scenario) -> f64 {
    (0..ens.grid().intervals()).map(|k| interval_cost(ens, k, scenario)).sum()
}

/// `sum_i w_i phi(m(b, x_i)) G(x_i, mu_b)` evaluated per final cluster.
pub fn terminal_cost(ens: &TrajectoryEnsemble, scenario: &Scenario) -> f64 {
    if matches!(scenario.terminal, TerminalCost::Zero) {
        return 0.0;
    }
    let last = ens.grid().intervals();
    let members = ens.schedule().members(last);
    let atoms = members
        .iter()
        .map(|c| Atom {
            point: ens.path(c[0]).point(last).to_vec(),
            mass: c.iter().map(|&i| ens.weights()[i]).sum(),
        })
        .collect();
    // Clusters sit at distinct points, so atom order follows cluster ids.
    let mu = EmpiricalMeasure::merged(atoms).expect("valid ensemble has a valid final marginal");
    terminal_cost_of_measure(&mu, scenario)
}

/// Terminal cost of a static measure, i.e. of an ensemble on a degenerate
/// interval.
pub fn terminal_cost_of_measure(mu: &EmpiricalMeasure, scenario: &Scenario) -> f64 {
    let g = scenario.terminal.atom_values(mu);
    mu.atoms()
        .iter()
        .zip(g)
        .map(|(a, g)| ext::mul(ext::mul(a.mass, scenario.phi.eval(a.mass)), g))
        .sum()
}

pub fn total_cost(ens: &TrajectoryEnsemble, scenario: &Scenario) -> CostBreakdown {
    let grid = ens.grid();
    let mut per_particle = vec![0.0; ens.len()];
    let mut per_interval = Vec::with_capacity(grid.intervals());
    for k in 0..grid.intervals() {
        let mut contribution = 0.0;
        for (i, term) in interval_terms(ens, k, scenario).enumerate() {
            per_particle[i] += term;
            contribution += term;
        }
        per_interval.push(IntervalCost {
            k,
            t_mid: grid.mid(k),
            contribution,
        });
    }
    let running: f64 = per_interval.iter().map(|r| r.contribution).sum();
    let terminal = terminal_cost(ens, scenario);
    CostBreakdown {
        running,
        terminal,
        total: running + terminal,
        per_particle,
        per_interval,
    }
}
