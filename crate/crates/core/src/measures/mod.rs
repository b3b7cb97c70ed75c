//! Finitely supported measures on path space.
//!
//! A [`TrajectoryEnsemble`] is a weighted family of polylines on a shared
//! [`TimeGrid`] together with a [`ClusterSchedule`] declaring, node by node,
//! which particles coincide. Multiplicity is read from the schedule only,
//! never from floating-point position comparisons, so the (discontinuous)
//! multiplicity-weighted costs are reproducible.

mod empirical;
mod ensemble;
mod grid;

pub use empirical::{Atom, EmpiricalMeasure, MASS_TOL};
pub use ensemble::{ClusterSchedule, PathPolyline, TrajectoryEnsemble, SNAP_TOL};
pub use grid::{Location, TimeGrid};

#[cfg(test)]
mod tests {
    use super::*;

    fn path(points: &[&[f64]]) -> PathPolyline {
        PathPolyline::from_points(&points.iter().map(|p| p.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    /// Two particles of weight 1/2 meeting at node 1 of a 2-interval grid.
    fn meeting_pair() -> TrajectoryEnsemble {
        let grid = TimeGrid::uniform(0.0, 2.0, 2).unwrap();
        TrajectoryEnsemble::from_paths(
            grid,
            vec![
                path(&[&[0.0, 1.0], &[0.0, 0.0], &[1.0, 0.0]]),
                path(&[&[0.0, -1.0], &[0.0, 0.0], &[1.0, 0.0]]),
            ],
            vec![0.5, 0.5],
        )
        .unwrap()
    }

    #[test]
    fn coinciding_pair_is_one_atom_at_the_node() {
        let e = meeting_pair();
        let mu = e.evaluate_at(1.0).unwrap();
        assert_eq!(mu.len(), 1);
        assert_eq!(mu.atoms()[0].mass, 1.0);
        let mu0 = e.evaluate_at(0.0).unwrap();
        assert_eq!(mu0.len(), 2);
        assert_eq!(mu0.mass_at(&[0.0, 1.0]), 0.5);
        assert_eq!(mu0.mass_at(&[0.0, -1.0]), 0.5);
    }

    #[test]
    fn between_nodes_atoms_need_both_endpoints() {
        let e = meeting_pair();
        // Interval 0: clustered only on the right -> two atoms.
        assert_eq!(e.evaluate_at(0.5).unwrap().len(), 2);
        assert_eq!(e.multiplicity(0.5, 0).unwrap(), 0.5);
        // Interval 1: clustered on both ends -> one atom moving together.
        let mu = e.evaluate_at(1.5).unwrap();
        assert_eq!(mu.len(), 1);
        assert_eq!(mu.atoms()[0].point, vec![0.5, 0.0]);
        assert_eq!(e.multiplicity(1.5, 1).unwrap(), 1.0);
    }

    #[test]
    fn three_paths_with_one_pair_clustered() {
        let grid = TimeGrid::uniform(0.0, 1.0, 1).unwrap();
        let e = TrajectoryEnsemble::from_paths(
            grid,
            vec![
                path(&[&[0.0], &[0.0]]),
                path(&[&[1.0], &[2.0]]),
                path(&[&[1.0], &[2.0]]),
            ],
            vec![0.5, 0.25, 0.25],
        )
        .unwrap();
        let mut masses: Vec<f64> = e.evaluate_at(1.0).unwrap().atoms().iter().map(|a| a.mass).collect();
        masses.sort_by(f64::total_cmp);
        assert_eq!(masses, vec![0.5, 0.5]);
    }

    #[test]
    fn multiplicity_of_four_equal_particles() {
        let grid = TimeGrid::uniform(0.0, 1.0, 1).unwrap();
        let e = TrajectoryEnsemble::from_paths(
            grid,
            vec![
                path(&[&[0.0], &[0.0]]),
                path(&[&[0.0], &[0.0]]),
                path(&[&[1.0], &[1.0]]),
                path(&[&[2.0], &[2.0]]),
            ],
            vec![0.25; 4],
        )
        .unwrap();
        for t in [0.0, 0.3, 1.0] {
            assert_eq!(e.multiplicity(t, 0).unwrap(), 0.5);
            assert_eq!(e.multiplicity(t, 1).unwrap(), 0.5);
            assert_eq!(e.multiplicity(t, 2).unwrap(), 0.25);
            assert_eq!(e.multiplicity(t, 3).unwrap(), 0.25);
        }
        assert!(e.multiplicity(0.5, 4).is_err());
        assert!(e.multiplicity(1.5, 0).is_err());
    }

    #[test]
    fn schedule_must_match_positions() {
        let grid = TimeGrid::uniform(0.0, 1.0, 1).unwrap();
        let paths = vec![path(&[&[0.0], &[0.0]]), path(&[&[1.0], &[0.0]])];
        // Same cluster at node 0 but far apart.
        let bad = ClusterSchedule::new(vec![vec![0, 0], vec![0, 0]]).unwrap();
        assert!(TrajectoryEnsemble::new(grid.clone(), paths.clone(), vec![0.5, 0.5], bad).is_err());
        // Different clusters at the same point at node 1.
        let bad = ClusterSchedule::new(vec![vec![0, 1], vec![0, 1]]).unwrap();
        assert!(TrajectoryEnsemble::new(grid.clone(), paths.clone(), vec![0.5, 0.5], bad).is_err());
        let good = ClusterSchedule::new(vec![vec![0, 1], vec![0, 0]]).unwrap();
        assert!(TrajectoryEnsemble::new(grid, paths, vec![0.5, 0.5], good).is_ok());
    }

    #[test]
    fn near_coincident_members_are_snapped() {
        let grid = TimeGrid::uniform(0.0, 1.0, 1).unwrap();
        let paths = vec![path(&[&[0.0], &[0.3]]), path(&[&[1.0], &[0.3 + 1e-14]])];
        let sched = ClusterSchedule::new(vec![vec![0, 1], vec![0, 0]]).unwrap();
        let e = TrajectoryEnsemble::new(grid, paths, vec![0.5, 0.5], sched).unwrap();
        assert_eq!(e.path(1).point(1), &[0.3]);
    }

    #[test]
    fn weights_must_be_positive_and_normalized() {
        let grid = TimeGrid::uniform(0.0, 1.0, 1).unwrap();
        let paths = vec![path(&[&[0.0], &[0.0]]), path(&[&[1.0], &[1.0]])];
        assert!(TrajectoryEnsemble::from_paths(grid.clone(), paths.clone(), vec![0.5, 0.4]).is_err());
        assert!(TrajectoryEnsemble::from_paths(grid, paths, vec![1.5, -0.5]).is_err());
    }

    #[test]
    fn restrict_full_interval_is_identity() {
        let e = meeting_pair();
        assert_eq!(e.restrict(0.0, 2.0).unwrap(), e);
        assert!(e.restrict(0.0, 0.5).is_err());
        assert!(e.restrict(1.0, 1.0).is_err());
    }

    #[test]
    fn restriction_keeps_multiplicity() {
        let e = meeting_pair();
        let r = e.restrict(1.0, 2.0).unwrap();
        for t in [1.0, 1.25, 1.5, 2.0] {
            for i in 0..2 {
                assert_eq!(e.multiplicity(t, i).unwrap(), r.multiplicity(t, i).unwrap());
            }
        }
    }

    #[test]
    fn concat_singleton_junction_preserves_paths() {
        let e = meeting_pair();
        let a = e.restrict(0.0, 1.0).unwrap();
        let b = e.restrict(1.0, 2.0).unwrap();
        // Junction atom has two left and two right members: product coupling.
        let c = a.concat(&b).unwrap();
        assert_eq!(c.len(), 4);
        assert!((c.weights().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for w in c.weights() {
            assert_eq!(*w, 0.25);
        }
        for t in [0.0, 0.5, 1.0, 1.5, 2.0] {
            assert!(c.evaluate_at(t).unwrap().approx_eq(&e.evaluate_at(t).unwrap(), MASS_TOL));
        }
    }

    #[test]
    fn concat_two_into_one() {
        // Junction atom of mass 1 with two left paths and one right path.
        let g1 = TimeGrid::uniform(0.0, 1.0, 1).unwrap();
        let g2 = TimeGrid::uniform(1.0, 2.0, 1).unwrap();
        let left = TrajectoryEnsemble::from_paths(
            g1,
            vec![path(&[&[0.0], &[1.0]]), path(&[&[2.0], &[1.0]])],
            vec![0.5, 0.5],
        )
        .unwrap();
        let right = TrajectoryEnsemble::from_paths(g2, vec![path(&[&[1.0], &[3.0]])], vec![1.0]).unwrap();
        let c = left.concat(&right).unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(c.weights(), &[0.5, 0.5]);
        assert_eq!(c.path(0).coords(), &[0.0, 1.0, 3.0]);
        assert_eq!(c.path(1).coords(), &[2.0, 1.0, 3.0]);
    }

    #[test]
    fn concat_rejects_mismatched_junction() {
        let g1 = TimeGrid::uniform(0.0, 1.0, 1).unwrap();
        let g2 = TimeGrid::uniform(1.0, 2.0, 1).unwrap();
        let left = TrajectoryEnsemble::from_paths(g1, vec![path(&[&[0.0], &[1.0]])], vec![1.0]).unwrap();
        let right = TrajectoryEnsemble::from_paths(g2, vec![path(&[&[1.5], &[3.0]])], vec![1.0]).unwrap();
        match left.concat(&right) {
            Err(crate::Error::JunctionMismatch(list)) => assert_eq!(list.len(), 2),
            other => panic!("expected junction mismatch, got {other:?}"),
        }
    }

    #[test]
    fn ensemble_json_roundtrip_is_bit_exact() {
        let grid = TimeGrid::uniform(0.0, 3.5, 7).unwrap();
        let paths = (0..3)
            .map(|i| {
                let pts: Vec<Vec<f64>> = (0..8)
                    .map(|k| vec![0.1 * (i as f64) + (k as f64).sqrt() / 3.0, -1.0 / (k as f64 + 1.0)])
                    .collect();
                PathPolyline::from_points(&pts).unwrap()
            })
            .collect();
        let e = TrajectoryEnsemble::from_paths(grid, paths, vec![0.2, 0.3, 0.5]).unwrap();
        let s = serde_json::to_string(&e).unwrap();
        let back: TrajectoryEnsemble = serde_json::from_str(&s).unwrap();
        assert_eq!(back, e);
    }
}
