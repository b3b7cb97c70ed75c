use std::collections::HashMap;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::empirical::{Atom, EmpiricalMeasure, MASS_TOL};
use super::grid::{Location, TimeGrid};
use crate::error::{Error, Result};

/// Co-clustered positions further apart than this are rejected rather than snapped.
pub const SNAP_TOL: f64 = 1e-9;

/// Positions of one particle at every grid node, stored flat.
#[derive(Debug, Clone, PartialEq)]
pub struct PathPolyline {
    dim: usize,
    coords: Vec<f64>,
}

impl PathPolyline {
    pub fn new(dim: usize, coords: Vec<f64>) -> Result<Self> {
        if dim == 0 || coords.is_empty() || !coords.len().is_multiple_of(dim) {
            return Err(Error::invalid(format!(
                "path with {} coordinates is not a list of {dim}-dimensional points",
                coords.len()
            )));
        }
        if coords.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("path coordinates must be finite"));
        }
        Ok(Self { dim, coords })
    }

    pub fn from_points(points: &[Vec<f64>]) -> Result<Self> {
        let dim = points.first().map_or(0, Vec::len);
        if points.iter().any(|p| p.len() != dim) {
            return Err(Error::invalid("path points have inconsistent dimension"));
        }
        Self::new(dim, points.concat())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn point(&self, k: usize) -> &[f64] {
        &self.coords[k * self.dim..(k + 1) * self.dim]
    }

    pub(crate) fn point_mut(&mut self, k: usize) -> &mut [f64] {
        &mut self.coords[k * self.dim..(k + 1) * self.dim]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.dim)
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    /// Segment velocity on interval `k`.
    pub fn velocity(&self, grid: &TimeGrid, k: usize) -> Vec<f64> {
        let dt = grid.dt(k);
        self.point(k + 1)
            .iter()
            .zip(self.point(k))
            .map(|(b, a)| (b - a) / dt)
            .collect()
    }

    /// Linear interpolation on interval `k` at fraction `frac`.
    pub fn interpolate(&self, k: usize, frac: f64) -> Vec<f64> {
        self.point(k)
            .iter()
            .zip(self.point(k + 1))
            .map(|(a, b)| a + frac * (b - a))
            .collect()
    }

    pub fn at(&self, loc: Location) -> Vec<f64> {
        match loc {
            Location::Node(k) => self.point(k).to_vec(),
            Location::Interval(k, frac) => self.interpolate(k, frac),
        }
    }
}

/// Per-node partition of particle indices into clusters of coincident particles.
/// Cluster ids are contiguous (`0..count`) at each node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ClusterSchedule {
    ids: Vec<Vec<usize>>,
}

impl ClusterSchedule {
    pub fn new(ids: Vec<Vec<usize>>) -> Result<Self> {
        for (k, row) in ids.iter().enumerate() {
            let count = row.iter().max().map_or(0, |m| m + 1);
            let mut seen = vec![false; count];
            for &c in row {
                seen[c] = true;
            }
            if seen.iter().any(|s| !s) {
                return Err(Error::invalid(format!(
                    "cluster ids at node {k} are not contiguous"
                )));
            }
        }
        Ok(Self { ids })
    }

    pub fn nodes(&self) -> usize {
        self.ids.len()
    }

    pub fn row(&self, k: usize) -> &[usize] {
        &self.ids[k]
    }

    pub fn cluster_of(&self, k: usize, particle: usize) -> usize {
        self.ids[k][particle]
    }

    pub fn cluster_count(&self, k: usize) -> usize {
        self.ids[k].iter().max().map_or(0, |m| m + 1)
    }

    /// Members of each cluster at node `k`, in cluster-id order.
    pub fn members(&self, k: usize) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.cluster_count(k)];
        for (i, &c) in self.ids[k].iter().enumerate() {
            out[c].push(i);
        }
        out
    }

    pub fn rows(&self) -> &[Vec<usize>] {
        &self.ids
    }
}

/// Relabels ids of a row in order of first appearance.
fn canonical_row(row: &[usize]) -> Vec<usize> {
    let mut map: HashMap<usize, usize> = HashMap::new();
    row.iter()
        .map(|&c| {
            let next = map.len();
            *map.entry(c).or_insert(next)
        })
        .collect()
}

/// A finitely supported probability measure on polyline paths over a shared
/// time grid, with an explicit coincidence schedule.
#[derive(Debug, Clone)]
pub struct TrajectoryEnsemble {
    grid: TimeGrid,
    dim: usize,
    paths: Vec<PathPolyline>,
    weights: Vec<f64>,
    schedule: ClusterSchedule,
    node_mass: Vec<Vec<f64>>,
    interval_ids: Vec<Vec<usize>>,
    interval_mass: Vec<Vec<f64>>,
}

impl PartialEq for TrajectoryEnsemble {
    fn eq(&self, other: &Self) -> bool {
        self.grid == other.grid
            && self.dim == other.dim
            && self.paths == other.paths
            && self.weights == other.weights
            && self.schedule == other.schedule
    }
}

impl TrajectoryEnsemble {
    /// Validates every invariant. Co-clustered positions within [`SNAP_TOL`]
    /// of the cluster's first member are snapped onto it.
    pub fn new(
        grid: TimeGrid,
        mut paths: Vec<PathPolyline>,
        weights: Vec<f64>,
        schedule: ClusterSchedule,
    ) -> Result<Self> {
        let n = paths.len();
        if n == 0 {
            return Err(Error::invalid("ensemble needs at least one path"));
        }
        if weights.len() != n {
            return Err(Error::invalid(format!(
                "{} weights for {n} paths",
                weights.len()
            )));
        }
        let dim = paths[0].dim();
        let nodes = grid.nodes().len();
        for (i, p) in paths.iter().enumerate() {
            if p.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: p.dim(),
                });
            }
            if p.len() != nodes {
                return Err(Error::invalid(format!(
                    "path {i} has {} points, grid has {nodes} nodes",
                    p.len()
                )));
            }
        }
        check_weights(&weights)?;
        if schedule.nodes() != nodes {
            return Err(Error::invalid(format!(
                "schedule has {} rows, grid has {nodes} nodes",
                schedule.nodes()
            )));
        }
        for k in 0..nodes {
            let row = schedule.row(k);
            if row.len() != n {
                return Err(Error::invalid(format!(
                    "schedule row {k} has {} entries for {n} particles",
                    row.len()
                )));
            }
            // First member of each cluster; the others are snapped onto it.
            let mut rep = vec![usize::MAX; n];
            for i in 0..n {
                let c = row[i];
                if c >= n {
                    return Err(Error::invalid(format!("schedule row {k} has cluster id {c} >= {n}")));
                }
                if rep[c] == usize::MAX {
                    rep[c] = i;
                    continue;
                }
                let r = rep[c];
                for j in 0..dim {
                    let target = paths[r].coords[k * dim + j];
                    let x = &mut paths[i].coords[k * dim + j];
                    if (*x - target).abs() > SNAP_TOL * (1.0 + target.abs()) {
                        return Err(Error::invalid(format!(
                            "particles {r} and {i} share a cluster at node {k} but sit at different points"
                        )));
                    }
                    *x = target;
                }
            }
            let reps: Vec<usize> = rep.into_iter().filter(|&r| r != usize::MAX).collect();
            for a in 0..reps.len() {
                for b in a + 1..reps.len() {
                    if paths[reps[a]].point(k) == paths[reps[b]].point(k) {
                        return Err(Error::invalid(format!(
                            "clusters {a} and {b} at node {k} occupy the same point"
                        )));
                    }
                }
            }
        }
        Ok(Self::assemble(grid, dim, paths, weights, schedule))
    }

    /// Derives the schedule from bit-exact position equality at each node.
    pub fn from_paths(grid: TimeGrid, paths: Vec<PathPolyline>, weights: Vec<f64>) -> Result<Self> {
        let nodes = grid.nodes().len();
        if paths.iter().any(|p| p.len() != nodes) {
            return Err(Error::invalid("path length does not match grid"));
        }
        let schedule = ClusterSchedule {
            ids: (0..nodes).map(|k| coincidence_row(&paths, k)).collect(),
        };
        Self::new(grid, paths, weights, schedule)
    }

    /// Builds the derived multiplicity tables. Caller guarantees validity.
    pub(crate) fn assemble(
        grid: TimeGrid,
        dim: usize,
        paths: Vec<PathPolyline>,
        weights: Vec<f64>,
        schedule: ClusterSchedule,
    ) -> Self {
        let nodes = grid.nodes().len();
        let node_mass: Vec<Vec<f64>> = (0..nodes)
            .map(|k| {
                let mut mass = vec![0.0; schedule.cluster_count(k)];
                for (i, &c) in schedule.row(k).iter().enumerate() {
                    mass[c] += weights[i];
                }
                mass
            })
            .collect();
        let mut interval_ids = Vec::with_capacity(nodes - 1);
        let mut interval_mass = Vec::with_capacity(nodes - 1);
        for k in 0..nodes - 1 {
            let (left, right) = (schedule.row(k), schedule.row(k + 1));
            // Linear lookup: cluster counts are small and this runs inside
            // the solver's objective.
            let mut keys: Vec<(usize, usize)> = Vec::new();
            let ids: Vec<usize> = left
                .iter()
                .zip(right)
                .map(|(&a, &b)| match keys.iter().position(|&key| key == (a, b)) {
                    Some(c) => c,
                    None => {
                        keys.push((a, b));
                        keys.len() - 1
                    }
                })
                .collect();
            let mut mass = vec![0.0; keys.len()];
            for (i, &c) in ids.iter().enumerate() {
                mass[c] += weights[i];
            }
            interval_ids.push(ids);
            interval_mass.push(mass);
        }
        Self {
            grid,
            dim,
            paths,
            weights,
            schedule,
            node_mass,
            interval_ids,
            interval_mass,
        }
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    pub fn paths(&self) -> &[PathPolyline] {
        &self.paths
    }

    pub fn path(&self, i: usize) -> &PathPolyline {
        &self.paths[i]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn schedule(&self) -> &ClusterSchedule {
        &self.schedule
    }

    /// Multiplicity of particle `i` on interval `k` (constant there).
    pub fn interval_multiplicity(&self, k: usize, i: usize) -> f64 {
        self.interval_mass[k][self.interval_ids[k][i]]
    }

    /// Multiplicity of particle `i` at node `k`.
    pub fn node_multiplicity(&self, k: usize, i: usize) -> f64 {
        self.node_mass[k][self.schedule.cluster_of(k, i)]
    }

    /// Refined partition on interval `k`: particles co-clustered at both ends.
    pub fn interval_clusters(&self, k: usize) -> &[usize] {
        &self.interval_ids[k]
    }

    /// Time-`t` marginal `ev_t # eta`.
    ///
    /// At nodes the atoms are the schedule clusters. Strictly between nodes
    /// an atom is a set of particles co-clustered at both endpoints, placed
    /// at their (shared) linear interpolant.
    pub fn evaluate_at(&self, t: f64) -> Result<EmpiricalMeasure> {
        let loc = self.grid.locate(t)?;
        let (ids, masses) = match loc {
            Location::Node(k) => (self.schedule.row(k), &self.node_mass[k]),
            Location::Interval(k, _) => (&self.interval_ids[k][..], &self.interval_mass[k]),
        };
        let mut first = vec![usize::MAX; masses.len()];
        for (i, &c) in ids.iter().enumerate() {
            if first[c] == usize::MAX {
                first[c] = i;
            }
        }
        let atoms = first
            .iter()
            .zip(masses)
            .map(|(&i, &mass)| Atom {
                point: self.paths[i].at(loc),
                mass,
            })
            .collect();
        EmpiricalMeasure::merged(atoms)
    }

    /// `m(t, gamma_i(t), eta)`: mass of the cluster holding particle `i` at `t`.
    pub fn multiplicity(&self, t: f64, i: usize) -> Result<f64> {
        if i >= self.len() {
            return Err(Error::domain(format!(
                "particle index {i} out of range for {} particles",
                self.len()
            )));
        }
        Ok(match self.grid.locate(t)? {
            Location::Node(k) => self.node_multiplicity(k, i),
            Location::Interval(k, _) => self.interval_multiplicity(k, i),
        })
    }

    /// Restriction to `[a, b]`; both ends must be grid nodes.
    pub fn restrict(&self, a: f64, b: f64) -> Result<Self> {
        let ka = self
            .grid
            .index_of(a)
            .ok_or_else(|| Error::domain(format!("restriction start {a} is not a grid node")))?;
        let kb = self
            .grid
            .index_of(b)
            .ok_or_else(|| Error::domain(format!("restriction end {b} is not a grid node")))?;
        self.restrict_nodes(ka, kb)
    }

    pub fn restrict_nodes(&self, ka: usize, kb: usize) -> Result<Self> {
        let grid = self.grid.slice(ka, kb)?;
        let d = self.dim;
        let paths = self
            .paths
            .iter()
            .map(|p| PathPolyline {
                dim: d,
                coords: p.coords[ka * d..(kb + 1) * d].to_vec(),
            })
            .collect();
        let schedule = ClusterSchedule {
            ids: self.schedule.ids[ka..=kb].to_vec(),
        };
        Ok(Self::assemble(grid, d, paths, self.weights.clone(), schedule))
    }

    /// Concatenation through the product coupling of the disintegrations at
    /// the junction: inside each junction atom of mass `m`, every left path
    /// `i` (weight `u_i`) is glued to every right path `j` (weight `v_j`)
    /// with weight `u_i * v_j / m`.
    pub fn concat(&self, other: &TrajectoryEnsemble) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: other.dim,
            });
        }
        let b = self.grid.t_end();
        if b != other.grid.t_start() {
            return Err(Error::domain(format!(
                "cannot concatenate: left ends at {b}, right starts at {}",
                other.grid.t_start()
            )));
        }
        let left = self.evaluate_at(b)?;
        let right = other.evaluate_at(b)?;
        let bad = left.mismatches(&right, MASS_TOL);
        if !bad.is_empty() {
            return Err(Error::JunctionMismatch(bad));
        }

        let kl = self.grid.intervals();
        let left_ids = self.schedule.row(kl);
        let right_ids = other.schedule.row(0);
        // Right cluster holding each left junction cluster's point.
        let mut matched = vec![usize::MAX; self.node_mass[kl].len()];
        for (i, &c) in left_ids.iter().enumerate() {
            if matched[c] != usize::MAX {
                continue;
            }
            let point = self.paths[i].point(kl);
            matched[c] = right_ids
                .iter()
                .enumerate()
                .find(|(j, _)| other.paths[*j].point(0) == point)
                .map(|(_, &rc)| rc)
                .ok_or_else(|| Error::JunctionMismatch(vec![format!("no right atom at {point:?}")]))?;
        }

        let grid = self.grid.concat(&other.grid)?;
        let d = self.dim;
        let mut paths = Vec::new();
        let mut weights = Vec::new();
        let mut pairs = Vec::new();
        for (i, &lc) in left_ids.iter().enumerate() {
            let m = self.node_mass[kl][lc];
            for (j, &rc) in right_ids.iter().enumerate() {
                if rc != matched[lc] {
                    continue;
                }
                let mut coords = self.paths[i].coords.clone();
                coords.extend_from_slice(&other.paths[j].coords[d..]);
                paths.push(PathPolyline { dim: d, coords });
                weights.push(self.weights[i] * other.weights[j] / m);
                pairs.push((i, j));
            }
        }
        let mut rows = Vec::with_capacity(grid.nodes().len());
        for k in 0..=kl {
            rows.push(canonical_row(
                &pairs.iter().map(|&(i, _)| self.schedule.cluster_of(k, i)).collect::<Vec<_>>(),
            ));
        }
        for k in 1..other.grid.nodes().len() {
            rows.push(canonical_row(
                &pairs.iter().map(|&(_, j)| other.schedule.cluster_of(k, j)).collect::<Vec<_>>(),
            ));
        }
        Self::new(grid, paths, weights, ClusterSchedule { ids: rows })
    }

    /// Mutable access for local search that moves whole clusters. The
    /// caller keeps co-clustered positions equal and clusters distinct.
    pub(crate) fn path_mut(&mut self, i: usize) -> &mut PathPolyline {
        &mut self.paths[i]
    }
}

fn check_weights(weights: &[f64]) -> Result<()> {
    if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
        return Err(Error::invalid("weights must be finite and strictly positive"));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > MASS_TOL {
        return Err(Error::invalid(format!("weights sum to {total}, not 1")));
    }
    Ok(())
}

/// Cluster ids at node `k` from bit-exact position equality.
pub(crate) fn coincidence_row(paths: &[PathPolyline], k: usize) -> Vec<usize> {
    let mut reps: Vec<&[f64]> = Vec::new();
    paths
        .iter()
        .map(|p| {
            let x = p.point(k);
            match reps.iter().position(|r| *r == x) {
                Some(c) => c,
                None => {
                    reps.push(x);
                    reps.len() - 1
                }
            }
        })
        .collect()
}

#[derive(Serialize, Deserialize)]
struct EnsembleRepr {
    grid: TimeGrid,
    d: usize,
    weights: Vec<f64>,
    paths: Vec<Vec<Vec<f64>>>,
    schedule: Vec<Vec<usize>>,
}

impl Serialize for TrajectoryEnsemble {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        EnsembleRepr {
            grid: self.grid.clone(),
            d: self.dim,
            weights: self.weights.clone(),
            paths: self
                .paths
                .iter()
                .map(|p| p.points().map(<[f64]>::to_vec).collect())
                .collect(),
            schedule: self.schedule.ids.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for TrajectoryEnsemble {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let repr = EnsembleRepr::deserialize(d)?;
        let paths = repr
            .paths
            .iter()
            .map(|p| {
                if p.iter().any(|x| x.len() != repr.d) {
                    return Err(Error::DimensionMismatch {
                        expected: repr.d,
                        found: p.iter().map(Vec::len).find(|&l| l != repr.d).unwrap_or(0),
                    });
                }
                PathPolyline::from_points(p)
            })
            .collect::<Result<Vec<_>>>()
            .map_err(D::Error::custom)?;
        let schedule = ClusterSchedule::new(repr.schedule).map_err(D::Error::custom)?;
        TrajectoryEnsemble::new(repr.grid, paths, repr.weights, schedule).map_err(D::Error::custom)
    }
}
