//! Numerical checks of the dynamic programming principle.
//!
//! `V(t, mu)` is estimated by solving the problem restarted at the grid node
//! `t` from `mu` on the tail of the original grid, so running costs of
//! restrictions and of tail solutions share quadrature cells.

use std::collections::HashMap;
use std::sync::RwLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cost::{running_cost, terminal_cost_of_measure};
use crate::dynamics::check_admissible;
use crate::error::{Error, Result};
use crate::ext;
use crate::measures::{EmpiricalMeasure, TimeGrid, TrajectoryEnsemble};
use crate::scenario::Scenario;
use crate::solver::{solve_on_grid, SolveOutcome, SolverConfig};

/// Quantum of the canonical measure keys used for caching.
pub const CACHE_QUANTUM: f64 = 1e-12;

type Key = (usize, Vec<(Vec<i64>, i64)>);

/// Memoized value-function estimates for one scenario.
pub struct ValueEstimator<'a> {
    scenario: &'a Scenario,
    grid: TimeGrid,
    config: SolverConfig,
    cache: RwLock<HashMap<Key, f64>>,
}

impl<'a> ValueEstimator<'a> {
    pub fn new(scenario: &'a Scenario, config: SolverConfig) -> Result<Self> {
        scenario.validate()?;
        let grid = TimeGrid::uniform(scenario.t0(), scenario.t_end(), config.m.unwrap_or(scenario.m))?;
        Ok(Self {
            scenario,
            grid,
            config,
            cache: RwLock::new(HashMap::new()),
        })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn scenario(&self) -> &Scenario {
        self.scenario
    }

    /// Solver tolerance used to qualify every DPP assertion.
    pub fn epsilon(&self) -> f64 {
        2.0 * self.config.f_tol(self.scenario)
    }

    pub fn node_index(&self, t: f64) -> Result<usize> {
        self.grid
            .index_of(t)
            .ok_or_else(|| Error::domain(format!("time {t} is not a grid node")))
    }

    /// Solve the problem restarted at node `k` from `mu`.
    pub fn solve_from(&self, k: usize, mu: &EmpiricalMeasure) -> Result<SolveOutcome> {
        let last = self.grid.intervals();
        if k >= last {
            return Err(Error::domain("no interval left after the final node"));
        }
        let grid = self.grid.slice(k, last)?;
        let sub = self.scenario.restarted(grid.t_start(), last - k, mu.clone());
        solve_on_grid(&sub, &grid, &self.config)
    }

    /// `V(t_k, mu)`; `+inf` when the restarted problem is infeasible.
    pub fn value_at_node(&self, k: usize, mu: &EmpiricalMeasure) -> Result<f64> {
        let key = (k, mu.canonical_key(CACHE_QUANTUM));
        if let Some(v) = self.cache.read().expect("cache lock").get(&key) {
            return Ok(*v);
        }
        let v = if k == self.grid.intervals() {
            terminal_cost_of_measure(mu, self.scenario)
        } else {
            self.solve_from(k, mu)?.value()
        };
        self.cache.write().expect("cache lock").entry(key).or_insert(v);
        Ok(v)
    }

    pub fn value_estimate(&self, t: f64, mu: &EmpiricalMeasure) -> Result<f64> {
        self.value_at_node(self.node_index(t)?, mu)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EllPoint {
    pub s: f64,
    #[serde(with = "ext::real")]
    pub ell: f64,
    pub running_part: f64,
    #[serde(with = "ext::real")]
    pub value_part: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EllCurve {
    pub tau: f64,
    #[serde(with = "ext::real")]
    pub v_tau: f64,
    pub points: Vec<EllPoint>,
}

impl EllCurve {
    /// `max ell - min ell` over the finite points.
    pub fn spread(&self) -> f64 {
        let vals = self.points.iter().map(|p| p.ell).filter(|v| v.is_finite());
        let (lo, hi) = vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
        hi - lo
    }

    /// Largest drop `ell(s1) - ell(s2)` over `s1 < s2`.
    pub fn max_decrease(&self) -> f64 {
        let mut best = f64::NEG_INFINITY;
        let mut worst_drop = 0.0f64;
        for p in &self.points {
            best = best.max(p.ell);
            worst_drop = worst_drop.max(best - p.ell);
        }
        worst_drop
    }

    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "s,ell,running_part,value_part")?;
        for p in &self.points {
            writeln!(
                w,
                "{},{},{},{}",
                p.s,
                crate::cost::fmt_ext(p.ell),
                p.running_part,
                crate::cost::fmt_ext(p.value_part)
            )?;
        }
        Ok(())
    }
}

/// `ell(s) = L(eta restricted to [tau, s]) + V(s, eta_s)` at each node `s`
/// of `eta`'s grid listed in `s_nodes` (indices into that grid).
pub fn ell_curve(est: &ValueEstimator<'_>, eta: &TrajectoryEnsemble, s_nodes: &[usize]) -> Result<EllCurve> {
    let tau = eta.grid().t_start();
    let k_tau = est.node_index(tau)?;
    let v_tau = est.value_at_node(k_tau, &eta.evaluate_at(tau)?)?;
    let points = s_nodes
        .par_iter()
        .map(|&j| ell_at(est, eta, k_tau, j))
        .collect::<Result<Vec<_>>>()?;
    Ok(EllCurve { tau, v_tau, points })
}

fn ell_at(est: &ValueEstimator<'_>, eta: &TrajectoryEnsemble, k_tau: usize, j: usize) -> Result<EllPoint> {
    if j >= eta.grid().nodes().len() {
        return Err(Error::domain(format!("node {j} outside the ensemble grid")));
    }
    let s = eta.grid().nodes()[j];
    let running_part = if j == 0 {
        0.0
    } else {
        running_cost(&eta.restrict_nodes(0, j)?, est.scenario())
    };
    let value_part = est.value_at_node(k_tau + j, &eta.evaluate_at(s)?)?;
    Ok(EllPoint {
        s,
        ell: running_part + value_part,
        running_part,
        value_part,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DppGap {
    pub tau: f64,
    pub s: f64,
    #[serde(with = "ext::real")]
    pub lhs: f64,
    #[serde(with = "ext::real")]
    pub rhs: f64,
    pub gap: f64,
    pub candidates: usize,
}

/// Compares `V(tau, mu)` with the minimum of `ell(s)` over the solver's
/// minimizer from `(tau, mu)` and `k` seeded admissible perturbations of it.
pub fn dpp_gap(
    est: &ValueEstimator<'_>,
    tau: f64,
    mu: &EmpiricalMeasure,
    s: f64,
    k: usize,
    seed: u64,
) -> Result<DppGap> {
    let k_tau = est.node_index(tau)?;
    let k_s = est.node_index(s)?;
    if k_s < k_tau {
        return Err(Error::domain(format!("s = {s} precedes tau = {tau}")));
    }
    let lhs = est.value_at_node(k_tau, mu)?;
    let Some(solution) = (if k_tau < est.grid().intervals() {
        est.solve_from(k_tau, mu)?.solution().cloned()
    } else {
        None
    }) else {
        return Ok(DppGap {
            tau,
            s,
            lhs,
            rhs: lhs,
            gap: 0.0,
            candidates: 0,
        });
    };
    let eta = solution.ensemble;
    let j = k_s - k_tau;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sub = est
        .scenario()
        .restarted(tau, est.grid().intervals() - k_tau, mu.clone());
    let mut candidates = vec![eta.clone()];
    for _ in 0..k {
        if let Some(p) = perturb(&eta, &sub, j, &mut rng) {
            candidates.push(p);
        }
    }
    let rhs = candidates
        .par_iter()
        .map(|c| ell_at(est, c, k_tau, j).map(|p| p.ell))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    let gap = if lhs == rhs { 0.0 } else { (lhs - rhs).abs() };
    Ok(DppGap {
        tau,
        s,
        lhs,
        rhs,
        gap,
        candidates: candidates.len(),
    })
}

/// Moves one cluster at one interior node in `1..=j` (never the last node),
/// shrinking the offset until the result is admissible.
fn perturb(eta: &TrajectoryEnsemble, scenario: &Scenario, j: usize, rng: &mut ChaCha8Rng) -> Option<TrajectoryEnsemble> {
    let last = eta.grid().intervals();
    let hi = j.min(last - 1);
    if hi < 1 {
        return None;
    }
    let node = rng.gen_range(1..=hi);
    let clusters = eta.schedule().members(node);
    let cluster = &clusters[rng.gen_range(0..clusters.len())];
    let d = eta.dim();
    let dt = eta.grid().dt(node - 1).min(eta.grid().dt(node));
    let reach = scenario.constraint.v_upper() * dt;
    let dir: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut amount = rng.gen_range(0.05..0.5) * reach;
    for _ in 0..20 {
        let mut cand = eta.clone();
        for &i in cluster {
            let p = cand.path_mut(i).point_mut(node);
            for (x, v) in p.iter_mut().zip(&dir) {
                *x += amount * v;
            }
        }
        let here = cand.path(cluster[0]).point(node).to_vec();
        let apart = clusters
            .iter()
            .filter(|c| c[0] != cluster[0])
            .all(|c| cand.path(c[0]).point(node) != here.as_slice());
        if apart && matches!(check_admissible(&cand, scenario), Ok(r) if r.feasible) {
            return Some(cand);
        }
        amount *= 0.5;
    }
    None
}
