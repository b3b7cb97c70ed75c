//! Continuous optimization of event times and points for one topology.
//!
//! Decision variables per merge event are a slack `s >= 0` and the event
//! point `p`. The event time is the earliest moment every child can reach
//! `p` at the reference speed, plus the slack. Roots travel at constant
//! speed to their terminal point, reached exactly at `T`. Terminal points
//! are fixed under a hard target and free otherwise.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::plan::{AggregationPlan, Layout, PlanEvent, PlanLeaf, PlanRoot, PlanTopology};
use super::search::{PatternSearch, Score};
use super::SolverConfig;
use crate::cost::{running_cost, terminal_cost, TerminalCost};
use crate::dynamics::check_admissible;
use crate::measures::{PathPolyline, TimeGrid, TrajectoryEnsemble};
use crate::scenario::Scenario;

/// Event times this close to a node (relative to the horizon) land on it.
const NODE_SNAP: f64 = 1e-12;
/// Tolerance when matching root masses to target atoms.
const ASSIGN_TOL: f64 = 1e-9;

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn lerp(a: &[f64], b: &[f64], f: f64) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + f * (y - x)).collect()
}

/// Shared data for optimizing plans of one scenario on one grid.
pub(crate) struct PlanContext<'a> {
    pub scenario: &'a Scenario,
    pub grid: &'a TimeGrid,
    pub config: &'a SolverConfig,
    leaf_points: Vec<Vec<f64>>,
    leaf_mass: Vec<f64>,
    v_ref: f64,
    spatial_scale: f64,
}

#[derive(Debug, Clone)]
pub(crate) struct Timing {
    pub time: Vec<f64>,
    pub point: Vec<Vec<f64>>,
    pub terminal: Vec<Vec<f64>>,
}

/// A topology with a fixed root-to-target assignment.
struct Setup {
    layout: Layout,
    mass: Vec<f64>,
    /// Root index of each node's tree.
    root_of: Vec<usize>,
    fixed_terminal: Vec<Option<(usize, Vec<f64>)>>,
    free_terminal: bool,
}

pub(crate) struct PlanOutcome {
    pub score: Score,
    pub evals: usize,
    pub plan: Option<AggregationPlan>,
    pub ensemble: Option<TrajectoryEnsemble>,
}

impl<'a> PlanContext<'a> {
    pub fn new(scenario: &'a Scenario, grid: &'a TimeGrid, config: &'a SolverConfig) -> Self {
        let leaf_points: Vec<Vec<f64>> = scenario.initial.atoms().iter().map(|a| a.point.clone()).collect();
        let leaf_mass = scenario.initial.atoms().iter().map(|a| a.mass).collect();
        let mut all: Vec<&Vec<f64>> = leaf_points.iter().collect();
        if let Some(t) = scenario.terminal.target() {
            all.extend(t.atoms().iter().map(|a| &a.point));
        }
        let extent = (0..scenario.d)
            .map(|j| {
                let lo = all.iter().map(|p| p[j]).fold(f64::INFINITY, f64::min);
                let hi = all.iter().map(|p| p[j]).fold(f64::NEG_INFINITY, f64::max);
                hi - lo
            })
            .fold(0.0, f64::max);
        Self {
            scenario,
            grid,
            config,
            leaf_points,
            leaf_mass,
            v_ref: scenario.constraint.v_upper(),
            spatial_scale: extent.max(1.0),
        }
    }

    /// Lower bound on the time needed to put every initial atom on the
    /// target support.
    pub fn required_time(&self) -> f64 {
        let t0 = self.grid.t_start();
        match &self.scenario.terminal {
            TerminalCost::HardTarget { target } => {
                let worst = self
                    .leaf_points
                    .iter()
                    .map(|x| {
                        target
                            .atoms()
                            .iter()
                            .map(|y| dist(x, &y.point))
                            .fold(f64::INFINITY, f64::min)
                    })
                    .fold(0.0, f64::max);
                t0 + worst / self.v_ref
            }
            _ => t0,
        }
    }

    /// Best timing for `topology` over all admissible target assignments.
    pub fn optimize(&self, topology: &PlanTopology, index: usize) -> PlanOutcome {
        let layout = topology.layout();
        let n = layout.n;
        let mut mass = self.leaf_mass.clone();
        for children in &layout.events {
            mass.push(children.iter().map(|&c| mass[c]).sum());
        }
        let mut root_of = vec![0; mass.len()];
        for (r, &root) in layout.roots.iter().enumerate() {
            let mut stack = vec![root];
            while let Some(v) = stack.pop() {
                root_of[v] = r;
                if v >= n {
                    stack.extend(&layout.events[v - n]);
                }
            }
        }
        let assignments: Vec<Vec<Option<(usize, Vec<f64>)>>> = match &self.scenario.terminal {
            TerminalCost::HardTarget { target } => {
                let root_mass: Vec<f64> = layout.roots.iter().map(|&r| mass[r]).collect();
                let atom_mass: Vec<f64> = target.atoms().iter().map(|a| a.mass).collect();
                matchings(&root_mass, &atom_mass)
                    .into_iter()
                    .map(|perm| {
                        perm.into_iter()
                            .map(|j| Some((j, target.atoms()[j].point.clone())))
                            .collect()
                    })
                    .collect()
            }
            _ => vec![vec![None; layout.roots.len()]],
        };
        let mut best = PlanOutcome {
            score: Score::INFEASIBLE,
            evals: 0,
            plan: None,
            ensemble: None,
        };
        let mut evals = 0;
        for fixed_terminal in assignments {
            let setup = Setup {
                free_terminal: !self.scenario.terminal.is_hard(),
                layout: layout.clone(),
                mass: mass.clone(),
                root_of: root_of.clone(),
                fixed_terminal,
            };
            let (score, x, e) = self.search(&setup, index);
            evals += e;
            if score.is_finite() && score.better_than(&best.score) {
                let timing = self.decode(&setup, &x).expect("finite score decodes");
                let ensemble = self.build(&setup, &timing).ok();
                best = PlanOutcome {
                    score,
                    evals: 0,
                    plan: Some(self.describe(topology, &setup, &timing)),
                    ensemble,
                };
            }
        }
        best.evals = evals;
        best
    }

    fn n_vars(&self, setup: &Setup) -> usize {
        let d = self.scenario.d;
        setup.layout.events.len() * (1 + d) + if setup.free_terminal { setup.layout.roots.len() * d } else { 0 }
    }

    fn decode(&self, setup: &Setup, x: &[f64]) -> Option<Timing> {
        let d = self.scenario.d;
        let layout = &setup.layout;
        let n = layout.n;
        let t0 = self.grid.t_start();
        let t_end = self.grid.t_end();
        let snap = NODE_SNAP * self.grid.span();
        let nodes = self.grid.nodes();
        let mut time = vec![t0; n + layout.events.len()];
        let mut point = self.leaf_points.clone();
        for (e, children) in layout.events.iter().enumerate() {
            let off = e * (1 + d);
            let s = x[off];
            if !(s >= 0.0) {
                return None;
            }
            let p = x[off + 1..off + 1 + d].to_vec();
            let mut te = children
                .iter()
                .map(|&c| time[c] + dist(&p, &point[c]) / self.v_ref)
                .fold(f64::NEG_INFINITY, f64::max)
                + s;
            // Moving the event down to a node just below is admissible as
            // long as the shortest incoming leg stays within the speed
            // tolerance; this absorbs the search's finite resolution.
            let shortest = children.iter().map(|&c| te - time[c]).fold(f64::INFINITY, f64::min);
            let below = snap.max(0.5 * self.scenario.tolerances.speed_tol * shortest);
            let k = nodes.partition_point(|&t| t < te);
            if k < nodes.len() && nodes[k] - te <= snap {
                te = nodes[k];
            } else if k > 0 && te - nodes[k - 1] <= below {
                te = nodes[k - 1];
            }
            if te > t_end || !te.is_finite() {
                return None;
            }
            if children.iter().any(|&c| te <= time[c]) {
                return None;
            }
            time[n + e] = te;
            point.push(p);
        }
        let tol = self.scenario.tolerances.speed_tol;
        let mut terminal = Vec::with_capacity(layout.roots.len());
        let toff = layout.events.len() * (1 + d);
        for (r, &root) in layout.roots.iter().enumerate() {
            let q = match &setup.fixed_terminal[r] {
                Some((_, q)) => q.clone(),
                None => x[toff + r * d..toff + (r + 1) * d].to_vec(),
            };
            let dur = t_end - time[root];
            let len = dist(&q, &point[root]);
            if dur <= 0.0 {
                if len != 0.0 {
                    return None;
                }
            } else if len / dur > self.v_ref * (1.0 + tol) {
                return None;
            }
            terminal.push(q);
        }
        Some(Timing { time, point, terminal })
    }

    /// Samples every leaf's chain of legs at the grid nodes. Co-clustered
    /// particles evaluate the same leg, so their positions agree bit-exactly.
    fn build(&self, setup: &Setup, timing: &Timing) -> crate::Result<TrajectoryEnsemble> {
        let layout = &setup.layout;
        let t_end = self.grid.t_end();
        let mut paths = Vec::with_capacity(layout.n);
        for leaf in 0..layout.n {
            let mut chain = vec![leaf];
            while let Some(p) = layout.parent[*chain.last().unwrap()] {
                chain.push(p);
            }
            let d = self.scenario.d;
            let mut at = 0;
            let mut coords = Vec::with_capacity(self.grid.nodes().len() * d);
            for &t in self.grid.nodes() {
                while at + 1 < chain.len() && timing.time[chain[at + 1]] <= t {
                    at += 1;
                }
                let c = chain[at];
                let (end_t, end_p) = match layout.parent[c] {
                    Some(par) => (timing.time[par], &timing.point[par]),
                    None => (t_end, &timing.terminal[setup.root_of[c]]),
                };
                let start_t = timing.time[c];
                if t >= end_t {
                    coords.extend_from_slice(end_p);
                } else {
                    let f = (t - start_t) / (end_t - start_t);
                    coords.extend(timing.point[c].iter().zip(end_p).map(|(x, y)| x + f * (y - x)));
                }
            }
            paths.push(PathPolyline::new(d, coords)?);
        }
        TrajectoryEnsemble::from_paths(self.grid.clone(), paths, self.leaf_mass.clone())
    }

    fn score(&self, setup: &Setup, x: &[f64]) -> Score {
        let Some(timing) = self.decode(setup, x) else {
            return Score::INFEASIBLE;
        };
        let Ok(ens) = self.build(setup, &timing) else {
            return Score::INFEASIBLE;
        };
        match check_admissible(&ens, self.scenario) {
            Ok(r) if r.feasible => {}
            _ => return Score::INFEASIBLE,
        }
        let total = running_cost(&ens, self.scenario) + terminal_cost(&ens, self.scenario);
        if !total.is_finite() {
            return Score::INFEASIBLE;
        }
        let n = setup.layout.n;
        Score(total, timing.time[n..].iter().sum())
    }

    fn search(&self, setup: &Setup, index: usize) -> (Score, Vec<f64>, usize) {
        let d = self.scenario.d;
        let nv = self.n_vars(setup);
        // Each event's slack and point form a group, as does each free
        // terminal point.
        let mut scale = Vec::with_capacity(nv);
        let mut group = Vec::with_capacity(nv);
        for e in 0..setup.layout.events.len() {
            scale.push(self.grid.span());
            scale.extend(std::iter::repeat_n(self.spatial_scale, d));
            group.extend(std::iter::repeat_n(e, 1 + d));
        }
        if setup.free_terminal {
            for r in 0..setup.layout.roots.len() {
                scale.extend(std::iter::repeat_n(self.spatial_scale, d));
                group.extend(std::iter::repeat_n(setup.layout.events.len() + r, d));
            }
        }
        debug_assert_eq!(scale.len(), nv);
        let mut starts = self.starts(setup);
        let inner = &self.config.inner;
        if nv > 0 && inner.random_starts > 0 {
            let seed = self.config.seed.unwrap_or(self.scenario.seed)
                ^ (index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let base = starts[0].clone();
            for _ in 0..inner.random_starts {
                let mut x = base.clone();
                for (j, v) in x.iter_mut().enumerate() {
                    *v += rng.gen_range(-0.1..0.1) * scale[j];
                }
                for e in 0..setup.layout.events.len() {
                    x[e * (1 + d)] = rng.gen_range(0.0..0.05) * self.grid.span();
                }
                starts.push(x);
            }
        }
        let mut evals = 0;
        let mut scored: Vec<(Score, Vec<f64>)> = starts
            .into_iter()
            .map(|x| {
                evals += 1;
                (self.score(setup, &x), x)
            })
            .collect();
        scored.sort_by(|a, b| a.0.cmp(&b.0));
        let search = PatternSearch {
            max_evals: inner.max_evals,
            x_tol: self.config.x_tol(self.scenario),
            initial_step: 0.1,
            diagonal_up_to: 4,
        };
        let mut best = (Score::INFEASIBLE, scored[0].1.clone());
        for (s0, x0) in scored.into_iter().take(inner.starts.max(1)) {
            if !s0.is_finite() {
                break;
            }
            let r = search.minimize(|x| self.score(setup, x), x0, &scale, &group);
            evals += r.evals;
            if r.score.better_than(&best.0) {
                best = (r.score, r.x);
            }
        }
        (best.0, best.1, evals)
    }

    /// Deterministic starting points: each event point is blended between
    /// a center of its leaves and its tree's destination.
    fn starts(&self, setup: &Setup) -> Vec<Vec<f64>> {
        let layout = &setup.layout;
        let n = layout.n;
        let leaves_under = |v: usize| -> Vec<usize> {
            let mut out = Vec::new();
            let mut stack = vec![v];
            while let Some(u) = stack.pop() {
                if u < n {
                    out.push(u);
                } else {
                    stack.extend(&layout.events[u - n]);
                }
            }
            out.sort_unstable();
            out
        };
        let destination = |r: usize| -> Option<Vec<f64>> {
            if let Some((_, q)) = &setup.fixed_terminal[r] {
                return Some(q.clone());
            }
            match &self.scenario.terminal {
                TerminalCost::WassersteinPenalty { target, .. } => {
                    let c = self.centroid(&leaves_under(layout.roots[r]));
                    target
                        .atoms()
                        .iter()
                        .min_by(|a, b| dist(&a.point, &c).total_cmp(&dist(&b.point, &c)))
                        .map(|a| a.point.clone())
                }
                _ => None,
            }
        };
        let dest: Vec<Option<Vec<f64>>> = (0..layout.roots.len()).map(destination).collect();
        let mut out: Vec<Vec<f64>> = Vec::new();
        for center in [true, false] {
            for lambda in [0.0, 0.25, 0.5, 0.75, 1.0] {
                let mut x = Vec::new();
                let mut event_points = Vec::new();
                for e in 0..layout.events.len() {
                    let leaves = leaves_under(n + e);
                    let base = if center { self.one_center(&leaves) } else { self.centroid(&leaves) };
                    let p = match &dest[setup.root_of[n + e]] {
                        Some(y) => lerp(&base, y, lambda),
                        None => base,
                    };
                    x.push(0.0);
                    x.extend_from_slice(&p);
                    event_points.push(p);
                }
                if setup.free_terminal {
                    for (r, &root) in layout.roots.iter().enumerate() {
                        let from = if root < n { self.leaf_points[root].clone() } else { event_points[root - n].clone() };
                        let q = match &dest[r] {
                            Some(y) => lerp(&from, y, lambda),
                            None => from,
                        };
                        x.extend(q);
                    }
                }
                if !out.contains(&x) {
                    out.push(x);
                }
            }
        }
        out
    }

    fn centroid(&self, leaves: &[usize]) -> Vec<f64> {
        let total: f64 = leaves.iter().map(|&i| self.leaf_mass[i]).sum();
        let mut c = vec![0.0; self.scenario.d];
        for &i in leaves {
            for (cj, pj) in c.iter_mut().zip(&self.leaf_points[i]) {
                *cj += self.leaf_mass[i] / total * pj;
            }
        }
        c
    }

    /// Minimax center: exact for two points, Badoiu-Clarkson otherwise.
    fn one_center(&self, leaves: &[usize]) -> Vec<f64> {
        if let [a, b] = leaves {
            return lerp(&self.leaf_points[*a], &self.leaf_points[*b], 0.5);
        }
        let mut c = self.leaf_points[leaves[0]].clone();
        for it in 1..=200 {
            let far = leaves
                .iter()
                .map(|&i| &self.leaf_points[i])
                .max_by(|a, b| dist(a, &c).total_cmp(&dist(b, &c)))
                .expect("non-empty");
            c = lerp(&c, far, 1.0 / (it as f64 + 1.0));
        }
        c
    }

    fn describe(&self, topology: &PlanTopology, setup: &Setup, timing: &Timing) -> AggregationPlan {
        let layout = &setup.layout;
        let n = layout.n;
        AggregationPlan {
            topology: topology.encoding(),
            merges: topology.merges(),
            leaves: (0..n)
                .map(|i| PlanLeaf {
                    point: self.leaf_points[i].clone(),
                    mass: self.leaf_mass[i],
                })
                .collect(),
            events: layout
                .events
                .iter()
                .enumerate()
                .map(|(e, children)| PlanEvent {
                    children: children.clone(),
                    time: timing.time[n + e],
                    point: timing.point[n + e].clone(),
                    mass: setup.mass[n + e],
                })
                .collect(),
            roots: layout
                .roots
                .iter()
                .enumerate()
                .map(|(r, &node)| PlanRoot {
                    node,
                    terminal: timing.terminal[r].clone(),
                    target_atom: setup.fixed_terminal[r].as_ref().map(|(j, _)| *j),
                })
                .collect(),
        }
    }
}

/// Maps roots -> atoms such that each atom receives exactly its mass, in
/// lexicographic order. Roots sharing an atom arrive together at `T`.
fn matchings(roots: &[f64], atoms: &[f64]) -> Vec<Vec<usize>> {
    fn rec(roots: &[f64], room: &mut Vec<f64>, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == roots.len() {
            if room.iter().all(|r| r.abs() <= ASSIGN_TOL) {
                out.push(cur.clone());
            }
            return;
        }
        let m = roots[cur.len()];
        for j in 0..room.len() {
            if m <= room[j] + ASSIGN_TOL {
                room[j] -= m;
                cur.push(j);
                rec(roots, room, cur, out);
                cur.pop();
                room[j] += m;
            }
        }
    }
    let mut out = Vec::new();
    rec(roots, &mut atoms.to_vec(), &mut Vec::new(), &mut out);
    out
}
