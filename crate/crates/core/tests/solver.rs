mod common;

use std::f64::consts::LN_2;

use coalesce_core::cost::{Lagrangian, MultiplicityWeight, TerminalCost};
use coalesce_core::oracle::example1_scenario;
use coalesce_core::solver::{optimize_plan, refine, solve, PlanTopology, SolveOutcome, SolverConfig};
use coalesce_core::{check_admissible, total_cost, EmpiricalMeasure, PathPolyline, Scenario, Tolerances, TrajectoryEnsemble, VelocityConstraint};
use common::atoms;

fn solved(out: SolveOutcome) -> coalesce_core::solver::Solution {
    match out {
        SolveOutcome::Solved(s) => *s,
        SolveOutcome::Infeasible(c) => panic!("unexpectedly infeasible: {}", c.reason),
    }
}

fn square_scenario(t: f64) -> Scenario {
    let p = 0.25;
    Scenario {
        d: 2,
        horizon: [0.0, t],
        m: 24,
        initial: atoms(&[(&[0.0, 0.0], p), (&[1.0, 0.0], p), (&[0.0, 1.0], p), (&[1.0, 1.0], p)]),
        constraint: VelocityConstraint::Max { v_max: 1.0 },
        psi: MultiplicityWeight::LogAbs,
        phi: MultiplicityWeight::ConstantOne,
        lagrangian: Lagrangian::ConstantOne,
        terminal: TerminalCost::Zero,
        tolerances: Tolerances::default(),
        seed: 11,
    }
}

fn assert_consistent(sol: &coalesce_core::solver::Solution, sc: &Scenario) {
    let report = check_admissible(&sol.ensemble, sc).unwrap();
    assert!(report.feasible && report.initial_ok, "{report:?}");
    let again = total_cost(&sol.ensemble, sc);
    assert!((again.total - sol.breakdown.total).abs() <= 1e-9);
}

#[test]
fn lone_particle_travels_straight() {
    let sc = Scenario {
        d: 1,
        horizon: [0.0, 2.0],
        m: 8,
        initial: EmpiricalMeasure::dirac(vec![0.0]).unwrap(),
        constraint: VelocityConstraint::Max { v_max: 2.0 },
        psi: MultiplicityWeight::LogAbs,
        phi: MultiplicityWeight::ConstantOne,
        lagrangian: Lagrangian::Kinetic,
        terminal: TerminalCost::HardTarget { target: EmpiricalMeasure::dirac(vec![3.0]).unwrap() },
        tolerances: Tolerances::default(),
        seed: 0,
    };
    let sol = solved(solve(&sc, &SolverConfig::default()).unwrap());
    assert_consistent(&sol, &sc);
    // psi(1) = 0 wipes out the kinetic term.
    assert_eq!(sol.value(), 0.0);
    assert_eq!(sol.plan.merges, 0);
}

#[test]
fn rendezvous_beats_separate_travel() {
    let sc = example1_scenario(3.0, 5.0, 200);
    let cfg = SolverConfig::default();
    let apart = optimize_plan(&PlanTopology::singletons(2), &sc, &cfg).unwrap();
    // Apart for the whole horizon, meeting only at the target.
    assert!((apart.cost - 5.0 * LN_2).abs() <= 1e-9);
    let sol = solved(solve(&sc, &cfg).unwrap());
    assert_consistent(&sol, &sc);
    assert!(sol.value() < apart.cost);
    assert_eq!(sol.plan.merges, 1);
    assert!((sol.value() - LN_2).abs() <= 0.02 * LN_2);
}

#[test]
fn unreachable_target_yields_certificate() {
    let sc = example1_scenario(3.0, 3.1, 50);
    match solve(&sc, &SolverConfig::default()).unwrap() {
        SolveOutcome::Infeasible(c) => {
            assert!((c.required_time - 10f64.sqrt()).abs() <= 1e-12);
            assert_eq!(c.horizon_end, 3.1);
        }
        SolveOutcome::Solved(_) => panic!("expected infeasible"),
    }
}

#[test]
fn value_does_not_increase_with_horizon() {
    // A common step keeps the grids nested, so the comparison is not
    // polluted by where the merge time falls between nodes.
    let mut last = f64::INFINITY;
    for (t, m) in [(3.2, 64), (3.5, 70), (4.0, 80), (5.0, 100), (6.0, 120)] {
        let v = solve(&example1_scenario(3.0, t, m), &SolverConfig::default()).unwrap().value();
        assert!(v <= last + 1e-12, "T = {t}: {v} > {last}");
        last = v;
    }
}

#[test]
fn heavier_weight_costs_more() {
    let base = square_scenario(3.0);
    let heavy = Scenario { psi: MultiplicityWeight::Power { p: 1.0 }, ..base.clone() };
    let cfg = SolverConfig::default();
    let a = solve(&base, &cfg).unwrap().value();
    let b = solve(&heavy, &cfg).unwrap().value();
    assert!(b >= a - 1e-9, "{b} < {a}");
}

#[test]
fn beam_never_beats_exhaustive() {
    let sc = square_scenario(3.0);
    let exhaustive = solved(solve(&sc, &SolverConfig::default()).unwrap());
    let cfg = SolverConfig { exhaustive_up_to_n: 3, beam_width: 2, ..SolverConfig::default() };
    let beam = solved(solve(&sc, &cfg).unwrap());
    assert_eq!(exhaustive.search.mode, "exhaustive");
    assert_eq!(beam.search.mode, "beam");
    assert!(!beam.search.warnings.is_empty());
    assert_consistent(&exhaustive, &sc);
    assert_consistent(&beam, &sc);
    assert!(beam.value() >= exhaustive.value() - 1e-12);
    assert!(exhaustive.plan.merges >= 1);
}

#[test]
fn repeated_solves_are_byte_identical() {
    let sc = square_scenario(2.5);
    let cfg = SolverConfig::default();
    let a = serde_json::to_string(&solve(&sc, &cfg).unwrap()).unwrap();
    let b = serde_json::to_string(&solve(&sc, &cfg).unwrap()).unwrap();
    assert_eq!(a, b);
}

fn kinetic_pair() -> Scenario {
    Scenario {
        d: 1,
        horizon: [0.0, 4.0],
        m: 8,
        initial: atoms(&[(&[-1.0], 0.5), (&[1.0], 0.5)]),
        constraint: VelocityConstraint::Max { v_max: 3.0 },
        psi: MultiplicityWeight::Power { p: 1.0 },
        phi: MultiplicityWeight::ConstantOne,
        lagrangian: Lagrangian::Kinetic,
        terminal: TerminalCost::HardTarget { target: EmpiricalMeasure::dirac(vec![4.0]).unwrap() },
        tolerances: Tolerances::default(),
        seed: 5,
    }
}

#[test]
fn refine_straightens_a_zigzag() {
    let sc = kinetic_pair();
    let sol = solved(solve(&sc, &SolverConfig::default()).unwrap());
    assert_consistent(&sol, &sc);
    // Both particles wiggle around the solver's waypoints while keeping
    // the schedule: clusters move together.
    let grid = sol.ensemble.grid().clone();
    let paths: Vec<PathPolyline> = sol
        .ensemble
        .paths()
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let pts: Vec<Vec<f64>> = (0..grid.nodes().len())
                .map(|k| {
                    let interior = k > 0 && k < grid.intervals();
                    let shared = sol.ensemble.node_multiplicity(k, i) > 0.75;
                    let wiggle = if interior && shared { if k % 2 == 0 { 0.2 } else { -0.2 } } else { 0.0 };
                    vec![p.point(k)[0] + wiggle]
                })
                .collect();
            PathPolyline::from_points(&pts).unwrap()
        })
        .collect();
    let zig = TrajectoryEnsemble::new(grid, paths, sol.ensemble.weights().to_vec(), sol.ensemble.schedule().clone()).unwrap();
    assert!(check_admissible(&zig, &sc).unwrap().feasible);
    let zig_cost = total_cost(&zig, &sc);
    assert!(zig_cost.total > sol.value());
    let start = coalesce_core::solver::Solution { ensemble: zig, breakdown: zig_cost.clone(), ..sol.clone() };
    let out = refine(&start, &sc, &SolverConfig::default()).unwrap();
    assert_eq!(out.ensemble.schedule(), start.ensemble.schedule());
    assert!(out.value() < zig_cost.total);
    assert!(out.value() <= sol.value() + 1e-6, "{} vs {}", out.value(), sol.value());
    assert_consistent(&out, &sc);
}

#[test]
fn refine_keeps_stationary_solution() {
    let sc = kinetic_pair();
    let sol = solved(solve(&sc, &SolverConfig::default()).unwrap());
    let again = refine(&sol, &sc, &SolverConfig::default()).unwrap();
    assert!(again.value() <= sol.value());
    assert!(sol.value() - again.value() <= 1e-9);
}

#[test]
fn soft_target_is_pulled_in() {
    let sc = Scenario {
        terminal: TerminalCost::WassersteinPenalty {
            lambda: 4.0,
            target: EmpiricalMeasure::dirac(vec![2.0]).unwrap(),
        },
        ..kinetic_pair()
    };
    let sol = solved(solve(&sc, &SolverConfig::default()).unwrap());
    assert_consistent(&sol, &sc);
    assert!(sol.value().is_finite());
    let end = sol.ensemble.evaluate_at(4.0).unwrap();
    let mean: f64 = end.atoms().iter().map(|a| a.mass * a.point[0]).sum();
    assert!(mean > 0.5, "terminal mean {mean}");
}
