//! Exhaustive minimization over lattice-valued waypoints.
//!
//! On a lattice two particles coincide exactly when they sit on the same
//! lattice point, so the cluster schedule is read off the positions. Paths
//! may split and re-merge freely, which the coalescing solver cannot do.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cost::total_cost;
use crate::dynamics::check_admissible;
use crate::error::{Error, Result};
use crate::ext;
use crate::measures::{PathPolyline, TrajectoryEnsemble};
use crate::scenario::Scenario;

/// Refuse enumerations larger than this many candidate ensembles.
pub const BRUTE_FORCE_LIMIT: u128 = 10_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeSpec {
    pub points: Vec<Vec<f64>>,
}

impl LatticeSpec {
    /// Integer points `lo..=hi` on the line.
    pub fn line(lo: i64, hi: i64) -> Self {
        Self {
            points: (lo..=hi).map(|x| vec![x as f64]).collect(),
        }
    }

    fn index_of(&self, p: &[f64]) -> Option<usize> {
        self.points.iter().position(|q| q.as_slice() == p)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BruteForceResult {
    #[serde(with = "ext::real")]
    pub value: f64,
    pub argmin: Option<TrajectoryEnsemble>,
    /// Number of candidate ensembles enumerated.
    pub candidates: u64,
}

pub fn brute_force_value(scenario: &Scenario, lattice: &LatticeSpec) -> Result<BruteForceResult> {
    scenario.validate()?;
    let n = scenario.initial.len();
    if n > 3 || scenario.d > 2 || scenario.m > 6 {
        return Err(Error::domain(format!(
            "brute force handles N <= 3, d <= 2, M <= 6; got N = {n}, d = {}, M = {}",
            scenario.d, scenario.m
        )));
    }
    if lattice.points.iter().any(|p| p.len() != scenario.d) {
        return Err(Error::DimensionMismatch {
            expected: scenario.d,
            found: lattice.points.iter().map(Vec::len).find(|&l| l != scenario.d).unwrap_or(0),
        });
    }
    let starts = scenario
        .initial
        .atoms()
        .iter()
        .map(|a| {
            lattice
                .index_of(&a.point)
                .ok_or_else(|| Error::domain(format!("initial atom {:?} is not a lattice point", a.point)))
        })
        .collect::<Result<Vec<_>>>()?;
    let ends: Option<Vec<usize>> = match scenario.terminal.target() {
        Some(target) => Some(
            target
                .atoms()
                .iter()
                .map(|a| {
                    lattice
                        .index_of(&a.point)
                        .ok_or_else(|| Error::domain(format!("target atom {:?} is not a lattice point", a.point)))
                })
                .collect::<Result<Vec<_>>>()?,
        ),
        None => None,
    };
    // Under a hard target only paths ending on its support can score finitely.
    let allowed_ends = if scenario.terminal.is_hard() { ends } else { None };

    let grid = scenario.grid()?;
    let count = starts
        .iter()
        .map(|&s| count_sequences(scenario, lattice, s, allowed_ends.as_deref()))
        .fold(1u128, u128::saturating_mul);
    if count > BRUTE_FORCE_LIMIT {
        return Err(Error::LatticeTooLarge {
            count,
            limit: BRUTE_FORCE_LIMIT,
        });
    }
    let per_particle: Vec<Vec<Vec<usize>>> = starts
        .iter()
        .map(|&s| admissible_sequences(scenario, lattice, s, allowed_ends.as_deref()))
        .collect();
    let weights: Vec<f64> = scenario.initial.atoms().iter().map(|a| a.mass).collect();
    let build = |idx: u64| -> Result<TrajectoryEnsemble> {
        // Particle 0 is the most significant digit: index order is the
        // lexicographic order of the concatenated waypoint sequences.
        let mut rem = idx;
        let mut choice = vec![0usize; n];
        for i in (0..n).rev() {
            let len = per_particle[i].len() as u64;
            choice[i] = (rem % len) as usize;
            rem /= len;
        }
        let paths = (0..n)
            .map(|i| {
                let pts: Vec<Vec<f64>> = per_particle[i][choice[i]]
                    .iter()
                    .map(|&j| lattice.points[j].clone())
                    .collect();
                PathPolyline::from_points(&pts)
            })
            .collect::<Result<Vec<_>>>()?;
        TrajectoryEnsemble::from_paths(grid.clone(), paths, weights.clone())
    };
    let best = (0..count as u64)
        .into_par_iter()
        .map(|idx| -> Result<(f64, u64)> {
            let ens = build(idx)?;
            let value = if check_admissible(&ens, scenario)?.feasible {
                total_cost(&ens, scenario).total
            } else {
                f64::INFINITY
            };
            Ok((value, idx))
        })
        .try_reduce(
            || (f64::INFINITY, u64::MAX),
            |a, b| Ok(if (b.0, b.1) < (a.0, a.1) { b } else { a }),
        )?;
    let argmin = if best.0.is_finite() { Some(build(best.1)?) } else { None };
    Ok(BruteForceResult {
        value: best.0,
        argmin,
        candidates: count as u64,
    })
}

/// Whether the lattice step `a -> b` over interval `k` respects the speed bound.
fn step_ok(scenario: &Scenario, lattice: &LatticeSpec, k: usize, a: usize, b: usize) -> bool {
    let grid = scenario.grid().expect("validated scenario");
    let (pa, pb) = (&lattice.points[a], &lattice.points[b]);
    let dist = pa.iter().zip(pb).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let mid: Vec<f64> = pa.iter().zip(pb).map(|(x, y)| 0.5 * (x + y)).collect();
    dist / grid.dt(k) <= scenario.constraint.speed(grid.mid(k), &mid) * (1.0 + scenario.tolerances.speed_tol)
}

/// Number of admissible sequences from `start`, by dynamic programming.
fn count_sequences(scenario: &Scenario, lattice: &LatticeSpec, start: usize, ends: Option<&[usize]>) -> u128 {
    let p = lattice.points.len();
    let mut ways = vec![0u128; p];
    ways[start] = 1;
    for k in 0..scenario.m {
        let mut next = vec![0u128; p];
        for a in (0..p).filter(|&a| ways[a] > 0) {
            for (b, slot) in next.iter_mut().enumerate() {
                if step_ok(scenario, lattice, k, a, b) {
                    *slot = slot.saturating_add(ways[a]);
                }
            }
        }
        ways = next;
    }
    (0..p)
        .filter(|b| ends.is_none_or(|e| e.contains(b)))
        .fold(0u128, |acc, b| acc.saturating_add(ways[b]))
}

/// All lattice index sequences from `start` respecting the speed bound on
/// every segment, in lexicographic order.
fn admissible_sequences(
    scenario: &Scenario,
    lattice: &LatticeSpec,
    start: usize,
    ends: Option<&[usize]>,
) -> Vec<Vec<usize>> {
    let m = scenario.m;
    let step_ok = |k: usize, a: usize, b: usize| step_ok(scenario, lattice, k, a, b);
    let mut out = Vec::new();
    let mut seq = vec![start];
    fn dfs(
        seq: &mut Vec<usize>,
        m: usize,
        points: usize,
        ends: Option<&[usize]>,
        step_ok: &dyn Fn(usize, usize, usize) -> bool,
        out: &mut Vec<Vec<usize>>,
    ) {
        let k = seq.len() - 1;
        if k == m {
            if ends.is_none_or(|e| e.contains(&seq[k])) {
                out.push(seq.clone());
            }
            return;
        }
        for next in 0..points {
            if step_ok(k, seq[k], next) {
                seq.push(next);
                dfs(seq, m, points, ends, step_ok, out);
                seq.pop();
            }
        }
    }
    dfs(&mut seq, m, lattice.points.len(), ends, &step_ok, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::{Lagrangian, MultiplicityWeight, TerminalCost};
    use crate::dynamics::VelocityConstraint;
    use crate::measures::{Atom, EmpiricalMeasure};
    use crate::scenario::Tolerances;

    fn line_scenario(starts: &[(f64, f64)], target: Option<f64>, m: usize) -> Scenario {
        Scenario {
            d: 1,
            horizon: [0.0, m as f64],
            m,
            initial: EmpiricalMeasure::new(
                starts.iter().map(|&(x, w)| Atom { point: vec![x], mass: w }).collect(),
            )
            .unwrap(),
            constraint: VelocityConstraint::Max { v_max: 1.0 },
            psi: MultiplicityWeight::LogAbs,
            phi: MultiplicityWeight::ConstantOne,
            lagrangian: Lagrangian::ConstantOne,
            terminal: match target {
                Some(y) => TerminalCost::HardTarget {
                    target: EmpiricalMeasure::dirac(vec![y]).unwrap(),
                },
                None => TerminalCost::Zero,
            },
            tolerances: Tolerances::default(),
            seed: 0,
        }
    }

    #[test]
    fn single_particle_costs_nothing() {
        let s = line_scenario(&[(2.0, 1.0)], Some(4.0), 3);
        let r = brute_force_value(&s, &LatticeSpec::line(0, 8)).unwrap();
        assert_eq!(r.value, 0.0);
    }

    #[test]
    fn pair_meets_as_early_as_possible() {
        // Starting 4 apart, the pair can meet at time 2.
        let s = line_scenario(&[(0.0, 0.5), (4.0, 0.5)], None, 4);
        let r = brute_force_value(&s, &LatticeSpec::line(0, 8)).unwrap();
        assert!((r.value - 2.0 * std::f64::consts::LN_2).abs() < 1e-12);
        let e = r.argmin.unwrap();
        assert_eq!(e.schedule().cluster_count(2), 1);
    }

    #[test]
    fn unreachable_target_is_infinite() {
        let s = line_scenario(&[(0.0, 1.0)], Some(8.0), 3);
        let r = brute_force_value(&s, &LatticeSpec::line(0, 8)).unwrap();
        assert_eq!(r.value, f64::INFINITY);
        assert!(r.argmin.is_none());
    }

    #[test]
    fn refuses_oversized_instances() {
        let mut s = line_scenario(&[(0.0, 0.25), (1.0, 0.25), (2.0, 0.5)], None, 6);
        s.constraint = VelocityConstraint::Max { v_max: 100.0 };
        let big = LatticeSpec::line(0, 39);
        match brute_force_value(&s, &big) {
            Err(Error::LatticeTooLarge { count, .. }) => assert!(count > BRUTE_FORCE_LIMIT),
            other => panic!("expected refusal, got {other:?}"),
        }
    }
}
