#![allow(dead_code)]

use coalesce_core::cost::{Lagrangian, MultiplicityWeight, TerminalCost};
use coalesce_core::{Atom, EmpiricalMeasure, PathPolyline, Scenario, TimeGrid, Tolerances, TrajectoryEnsemble, VelocityConstraint};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Random positive weights summing to one.
pub fn random_weights(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(0.2..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let mut w: Vec<f64> = raw.iter().map(|x| x / total).collect();
    let head: f64 = w[..n - 1].iter().sum();
    w[n - 1] = 1.0 - head;
    w
}

/// Lattice random walks with unit time steps, so coincidences are frequent
/// and every speed is at most `sqrt(d)`.
pub fn random_walks(rng: &mut ChaCha8Rng, starts: &[Vec<f64>], m: usize) -> Vec<PathPolyline> {
    starts
        .iter()
        .map(|s| {
            let mut pts = vec![s.clone()];
            for _ in 0..m {
                let last = pts.last().unwrap();
                let next: Vec<f64> = last.iter().map(|x| (x + rng.gen_range(-1i32..=1) as f64).clamp(-2.0, 2.0)).collect();
                pts.push(next);
            }
            PathPolyline::from_points(&pts).unwrap()
        })
        .collect()
}

pub fn random_ensemble(rng: &mut ChaCha8Rng, n: usize, d: usize, m: usize, t0: f64) -> TrajectoryEnsemble {
    let starts: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..d).map(|_| rng.gen_range(-2i32..=2) as f64).collect())
        .collect();
    let grid = TimeGrid::uniform(t0, t0 + m as f64, m).unwrap();
    TrajectoryEnsemble::from_paths(grid, random_walks(rng, &starts, m), random_weights(rng, n)).unwrap()
}

pub fn scenario_for(
    ens: &TrajectoryEnsemble,
    lagrangian: Lagrangian,
    psi: MultiplicityWeight,
    terminal: TerminalCost,
) -> Scenario {
    let grid = ens.grid();
    Scenario {
        d: ens.dim(),
        horizon: [grid.t_start(), grid.t_end()],
        m: grid.intervals(),
        initial: ens.evaluate_at(grid.t_start()).unwrap(),
        constraint: VelocityConstraint::Max { v_max: (ens.dim() as f64).sqrt() },
        psi,
        phi: MultiplicityWeight::Power { p: 1.0 },
        lagrangian,
        terminal,
        tolerances: Tolerances::default(),
        seed: 0,
    }
}

pub fn atoms(list: &[(&[f64], f64)]) -> EmpiricalMeasure {
    EmpiricalMeasure::new(list.iter().map(|(p, m)| Atom { point: p.to_vec(), mass: *m }).collect()).unwrap()
}

/// Ensemble starting where `left` ends: every junction atom is split among
/// several fresh paths, exercising the product coupling in `concat`.
pub fn continuation(rng: &mut ChaCha8Rng, left: &TrajectoryEnsemble, m: usize) -> TrajectoryEnsemble {
    let b = left.grid().t_end();
    let mu = left.evaluate_at(b).unwrap();
    let mut starts = Vec::new();
    let mut weights = Vec::new();
    for a in mu.atoms() {
        let k = rng.gen_range(1..=3);
        let split = random_weights(rng, k);
        for s in split {
            starts.push(a.point.clone());
            weights.push(a.mass * s);
        }
    }
    let total: f64 = weights.iter().sum();
    let last = weights.len() - 1;
    weights[last] += 1.0 - total;
    let grid = TimeGrid::uniform(b, b + m as f64, m).unwrap();
    TrajectoryEnsemble::from_paths(grid, random_walks(rng, &starts, m), weights).unwrap()
}
