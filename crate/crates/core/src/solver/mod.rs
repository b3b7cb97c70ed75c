//! Search over coalescence plans.
//!
//! The outer loop enumerates merge topologies; the inner loop places merge
//! events in time and space by pattern search; a final pass moves interior
//! waypoints with the cluster schedule frozen.

mod build;
mod plan;
mod refine;
mod search;

use std::collections::HashSet;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use plan::{enumerate_plans, set_partitions, AggregationPlan, PlanEvent, PlanLeaf, PlanRoot, PlanTopology, Tree};
pub use refine::refine;

use build::{PlanContext, PlanOutcome};
use search::Score;

use crate::cost::{total_cost, CostBreakdown};
use crate::error::{Result, ValidationIssue};
use crate::ext;
use crate::measures::{TimeGrid, TrajectoryEnsemble};
use crate::scenario::Scenario;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InnerConfig {
    /// Objective evaluations per pattern search.
    pub max_evals: usize,
    /// Pattern searches started from the best initial points.
    pub starts: usize,
    /// Seeded random starting points added to the deterministic ones.
    pub random_starts: usize,
    /// Overrides the scenario's `x_tol`.
    pub x_tol: Option<f64>,
    /// Overrides the scenario's `f_tol`.
    pub f_tol: Option<f64>,
}

impl Default for InnerConfig {
    fn default() -> Self {
        Self {
            max_evals: 20_000,
            starts: 3,
            random_starts: 2,
            x_tol: None,
            f_tol: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RefineConfig {
    pub enabled: bool,
    /// First step, relative to the spatial scale of the instance.
    pub initial_step: f64,
    pub max_sweeps: usize,
}

impl Default for RefineConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            initial_step: 0.05,
            max_sweeps: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Overrides the scenario's number of intervals.
    #[serde(rename = "M")]
    pub m: Option<usize>,
    pub exhaustive_up_to_n: usize,
    pub beam_width: usize,
    pub inner: InnerConfig,
    pub refine: RefineConfig,
    /// Overrides the scenario's seed.
    pub seed: Option<u64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            m: None,
            exhaustive_up_to_n: 6,
            beam_width: 4,
            inner: InnerConfig::default(),
            refine: RefineConfig::default(),
            seed: None,
        }
    }
}

impl SolverConfig {
    pub fn x_tol(&self, scenario: &Scenario) -> f64 {
        self.inner.x_tol.unwrap_or(scenario.tolerances.x_tol)
    }

    pub fn f_tol(&self, scenario: &Scenario) -> f64 {
        self.inner.f_tol.unwrap_or(scenario.tolerances.f_tol)
    }

    pub fn issues(&self) -> Vec<ValidationIssue> {
        let mut out = Vec::new();
        if self.m == Some(0) {
            out.push(ValidationIssue::new("/M", "must be >= 1"));
        }
        if self.beam_width == 0 {
            out.push(ValidationIssue::new("/beam_width", "must be >= 1"));
        }
        if self.inner.max_evals == 0 {
            out.push(ValidationIssue::new("/inner/max_evals", "must be >= 1"));
        }
        for (name, v) in [("x_tol", self.inner.x_tol), ("f_tol", self.inner.f_tol)] {
            if let Some(v) = v.filter(|v| !(v.is_finite() && *v > 0.0)) {
                out.push(ValidationIssue::new(format!("/inner/{name}"), format!("{v} is not finite and > 0")));
            }
        }
        let step = self.refine.initial_step;
        if !(step.is_finite() && step > 0.0) {
            out.push(ValidationIssue::new("/refine/initial_step", "must be finite and > 0"));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SolverStats {
    pub plans_evaluated: usize,
    pub inner_iters: usize,
    /// Excluded from JSON so that output bytes depend only on the inputs.
    #[serde(skip)]
    pub wall_time: Duration,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchInfo {
    /// `exhaustive` or `beam`.
    pub mode: String,
    /// Plans never split a merged cluster.
    pub coalescing_only: bool,
    /// Set when the restricted search space may exclude better minimizers.
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub ensemble: TrajectoryEnsemble,
    pub breakdown: CostBreakdown,
    pub plan: AggregationPlan,
    pub solver_stats: SolverStats,
    pub search: SearchInfo,
}

impl Solution {
    pub fn value(&self) -> f64 {
        self.breakdown.total
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfeasibilityCertificate {
    /// Lower bound on the time needed to reach the terminal constraint.
    pub required_time: f64,
    pub horizon_end: f64,
    pub plans_evaluated: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum SolveOutcome {
    Solved(Box<Solution>),
    Infeasible(InfeasibilityCertificate),
}

impl SolveOutcome {
    pub fn value(&self) -> f64 {
        match self {
            Self::Solved(s) => s.value(),
            Self::Infeasible(_) => f64::INFINITY,
        }
    }

    pub fn solution(&self) -> Option<&Solution> {
        match self {
            Self::Solved(s) => Some(s),
            Self::Infeasible(_) => None,
        }
    }
}

/// Optimized plan for a single topology.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanSolution {
    pub plan: Option<AggregationPlan>,
    pub ensemble: Option<TrajectoryEnsemble>,
    #[serde(with = "ext::real")]
    pub cost: f64,
    pub evals: usize,
}

pub fn optimize_plan(topology: &PlanTopology, scenario: &Scenario, config: &SolverConfig) -> Result<PlanSolution> {
    scenario.validate()?;
    let grid = grid_for(scenario, config)?;
    let ctx = PlanContext::new(scenario, &grid, config);
    let out = ctx.optimize(topology, 0);
    Ok(PlanSolution {
        cost: out.score.0,
        plan: out.plan,
        ensemble: out.ensemble,
        evals: out.evals,
    })
}

fn grid_for(scenario: &Scenario, config: &SolverConfig) -> Result<TimeGrid> {
    TimeGrid::uniform(scenario.t0(), scenario.t_end(), config.m.unwrap_or(scenario.m))
}

pub fn solve(scenario: &Scenario, config: &SolverConfig) -> Result<SolveOutcome> {
    scenario.validate()?;
    let grid = grid_for(scenario, config)?;
    solve_on_grid(scenario, &grid, config)
}

struct Ranked {
    score: Score,
    merges: usize,
    encoding: String,
    outcome: PlanOutcome,
}

fn rank_key(a: &Ranked, b: &Ranked) -> std::cmp::Ordering {
    a.score
        .0
        .total_cmp(&b.score.0)
        .then(a.merges.cmp(&b.merges))
        .then_with(|| a.encoding.cmp(&b.encoding))
}

/// Solves on an explicit grid spanning the scenario horizon. Sub-problems
/// use this to keep the exact node values of the parent grid.
pub fn solve_on_grid(scenario: &Scenario, grid: &TimeGrid, config: &SolverConfig) -> Result<SolveOutcome> {
    scenario.validate()?;
    let started = Instant::now();
    let ctx = PlanContext::new(scenario, grid, config);
    let n = scenario.initial.len();
    let evaluate = |topologies: &[PlanTopology], offset: usize| -> Vec<Ranked> {
        topologies
            .par_iter()
            .enumerate()
            .map(|(i, t)| Ranked {
                outcome: ctx.optimize(t, offset + i),
                merges: t.merges(),
                encoding: t.encoding(),
                score: Score::INFEASIBLE,
            })
            .map(|mut r| {
                r.score = r.outcome.score;
                r
            })
            .collect()
    };
    let mut warnings = Vec::new();
    let (mode, ranked) = if n <= config.exhaustive_up_to_n {
        ("exhaustive", evaluate(&enumerate_plans(n), 0))
    } else {
        let msg = format!(
            "{n} atoms exceed exhaustive_up_to_n = {}; beam search over pairwise merges (width {})",
            config.exhaustive_up_to_n, config.beam_width
        );
        log::warn!("{msg}");
        warnings.push(msg);
        ("beam", beam(n, config.beam_width, &evaluate))
    };
    let plans_evaluated = ranked.len();
    let inner_iters: usize = ranked.iter().map(|r| r.outcome.evals).sum();
    let best = ranked.into_iter().min_by(rank_key);
    let Some(best) = best.filter(|b| b.score.is_finite()) else {
        let required_time = ctx.required_time();
        let reason = if required_time > grid.t_end() {
            format!(
                "terminal target needs time {required_time} at the maximal speed, horizon ends at {}",
                grid.t_end()
            )
        } else {
            "no coalescing plan admits a feasible timing".to_string()
        };
        return Ok(SolveOutcome::Infeasible(InfeasibilityCertificate {
            required_time,
            horizon_end: grid.t_end(),
            plans_evaluated,
            reason,
        }));
    };
    let ensemble = best.outcome.ensemble.expect("finite plan has an ensemble");
    let plan = best.outcome.plan.expect("finite plan is described");
    let breakdown = total_cost(&ensemble, scenario);
    let solution = Solution {
        ensemble,
        breakdown,
        plan,
        solver_stats: SolverStats {
            plans_evaluated,
            inner_iters,
            wall_time: Duration::ZERO,
        },
        search: SearchInfo {
            mode: mode.to_string(),
            coalescing_only: true,
            warnings,
        },
    };
    let mut solution = refine(&solution, scenario, config)?;
    solution.solver_stats.wall_time = started.elapsed();
    Ok(SolveOutcome::Solved(Box::new(solution)))
}

/// Greedy beam over pairwise root merges starting from the singletons.
fn beam(n: usize, width: usize, evaluate: &dyn Fn(&[PlanTopology], usize) -> Vec<Ranked>) -> Vec<Ranked> {
    let start = PlanTopology::singletons(n);
    let mut seen: HashSet<String> = HashSet::from([start.encoding()]);
    let mut all = evaluate(std::slice::from_ref(&start), 0);
    let mut frontier = vec![start];
    for _ in 1..n {
        let mut next = Vec::new();
        for p in &frontier {
            let roots = p.trees().len();
            for a in 0..roots {
                for b in a + 1..roots {
                    let q = p.merge_roots(a, b);
                    if seen.insert(q.encoding()) {
                        next.push(q);
                    }
                }
            }
        }
        if next.is_empty() {
            break;
        }
        let mut ranked: Vec<(Ranked, PlanTopology)> = evaluate(&next, all.len()).into_iter().zip(next).collect();
        ranked.sort_by(|a, b| rank_key(&a.0, &b.0));
        frontier = ranked.iter().take(width.max(1)).map(|(_, t)| t.clone()).collect();
        all.extend(ranked.into_iter().map(|(r, _)| r));
    }
    all
}
