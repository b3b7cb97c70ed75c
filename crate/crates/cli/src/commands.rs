use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use coalesce_core::dpp::{dpp_gap, ell_curve, DppGap, ValueEstimator};
use coalesce_core::oracle::{brute_force_value, example1_optimum, example1_scenario, LatticeSpec};
use coalesce_core::solver::{solve, SolveOutcome, SolverConfig};
use coalesce_core::{check_admissible, ext, total_cost, Scenario, TimeGrid, TrajectoryEnsemble};

use crate::args::{BruteArgs, DppCheckArgs, EvaluateArgs, Example1Args, SolverArgs};
use crate::io::{read_json, sha256_hex, CliError, CliResult, ErrorItem};
use crate::{Run, Status};

fn source(path: &Path) -> String {
    path.display().to_string()
}

fn load_scenario(run: &mut Run, path: &Path) -> CliResult<Scenario> {
    let (scenario, raw): (Scenario, Value) = read_json(path)?;
    let issues = scenario.issues();
    if !issues.is_empty() {
        return Err(CliError::from_issues(&source(path), issues));
    }
    run.record.scenario_sha256 = Some(sha256_hex(&raw));
    Ok(scenario)
}

fn load_ensemble(path: &Path, scenario: &Scenario) -> CliResult<TrajectoryEnsemble> {
    let (ens, _): (TrajectoryEnsemble, Value) = read_json(path)?;
    if ens.dim() != scenario.d {
        return Err(CliError::invalid(
            source(path),
            "/d",
            format!("dimension {} does not match the scenario's d = {}", ens.dim(), scenario.d),
        ));
    }
    Ok(ens)
}

/// Resolves the solver configuration; `--seed` wins over both files.
fn load_config(run: &mut Run, args: &SolverArgs, scenario: &mut Scenario) -> CliResult<SolverConfig> {
    let mut config = match &args.config {
        Some(path) => {
            let (config, _): (SolverConfig, Value) = read_json(path)?;
            let issues = config.issues();
            if !issues.is_empty() {
                return Err(CliError::from_issues(&source(path), issues));
            }
            config
        }
        None => SolverConfig::default(),
    };
    if let Some(seed) = args.seed {
        config.seed = Some(seed);
        scenario.seed = seed;
    }
    run.record.seed = Some(config.seed.unwrap_or(scenario.seed));
    run.record.config = Some(serde_json::to_value(&config).map_err(anyhow::Error::from)?);
    Ok(config)
}

/// Speed violations as one error per `(particle, interval)`.
fn speed_errors(src: &str, ens: &TrajectoryEnsemble, scenario: &Scenario, offending: &[(usize, usize)]) -> Vec<ErrorItem> {
    let grid = ens.grid();
    offending
        .iter()
        .map(|&(i, k)| {
            let p = ens.path(i);
            let speed = p.velocity(grid, k).iter().map(|v| v * v).sum::<f64>().sqrt();
            let allowed = scenario.constraint.speed(grid.mid(k), &p.interpolate(k, 0.5));
            let [a, b] = [grid.nodes()[k], grid.nodes()[k + 1]];
            ErrorItem {
                particle: Some(i),
                interval: Some(k),
                ..ErrorItem::new(
                    src,
                    format!("/paths/{i}"),
                    format!("speed {speed} exceeds the allowed {allowed} on [{a}, {b}]"),
                )
            }
        })
        .collect()
}

pub fn evaluate(run: &mut Run, args: &EvaluateArgs) -> CliResult<Status> {
    let scenario = load_scenario(run, &args.scenario)?;
    let src = source(&args.ensemble);
    let ens = load_ensemble(&args.ensemble, &scenario)?;
    let grid = ens.grid();
    if grid.t_start() != scenario.t0() || grid.t_end() != scenario.t_end() {
        return Err(CliError::invalid(
            &src,
            "/grid",
            format!(
                "grid spans [{}, {}], the scenario horizon is [{}, {}]",
                grid.t_start(),
                grid.t_end(),
                scenario.t0(),
                scenario.t_end()
            ),
        ));
    }
    let report = check_admissible(&ens, &scenario).map_err(|e| CliError::core(&src, e))?;
    let mut errors = Vec::new();
    if !report.initial_ok {
        errors.push(ErrorItem::new(&src, "", "initial marginal differs from the scenario's initial measure"));
    }
    errors.extend(speed_errors(&src, &ens, &scenario, &report.offending));
    if !errors.is_empty() {
        return Err(CliError::Invalid(errors));
    }
    let breakdown = total_cost(&ens, &scenario);
    if run.format.json() {
        run.out.write_json("breakdown.json", &breakdown)?;
    }
    if run.format.csv() {
        run.out.write_with("breakdown.csv", |w| breakdown.write_csv(w))?;
    }
    Ok(if breakdown.total.is_finite() {
        Status::Ok
    } else {
        Status::Infeasible
    })
}

pub fn solve_cmd(run: &mut Run, scenario: &Path, solver: &SolverArgs) -> CliResult<Status> {
    let mut scenario_v = load_scenario(run, scenario)?;
    let config = load_config(run, solver, &mut scenario_v)?;
    let outcome = solve(&scenario_v, &config).map_err(|e| CliError::core(&source(scenario), e))?;
    match &outcome {
        SolveOutcome::Solved(sol) => {
            log::info!("value {} over {} plans", sol.value(), sol.solver_stats.plans_evaluated);
            if run.format.json() {
                run.out.write_json("solution.json", &outcome)?;
                run.out.write_json("ensemble.json", &sol.ensemble)?;
            }
            if run.format.csv() {
                run.out.write_with("breakdown.csv", |w| sol.breakdown.write_csv(w))?;
            }
            Ok(Status::Ok)
        }
        SolveOutcome::Infeasible(cert) => {
            log::warn!("infeasible: {}", cert.reason);
            run.out.write_json("solution.json", &outcome)?;
            Ok(Status::Infeasible)
        }
    }
}

/// Parsed `T=a:b:n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepSpec {
    pub from: f64,
    pub to: f64,
    pub count: usize,
}

impl SweepSpec {
    pub fn parse(spec: &str) -> Result<Self, String> {
        let body = spec
            .strip_prefix("T=")
            .ok_or_else(|| format!("expected T=a:b:n, got {spec:?}"))?;
        let parts: Vec<&str> = body.split(':').collect();
        let [a, b, n] = parts[..] else {
            return Err(format!("expected three fields a:b:n, got {body:?}"));
        };
        let num = |s: &str| s.trim().parse::<f64>().map_err(|e| format!("{s:?}: {e}"));
        let (from, to) = (num(a)?, num(b)?);
        let count: usize = n.trim().parse().map_err(|e| format!("{n:?}: {e}"))?;
        if !(from.is_finite() && to.is_finite()) || count == 0 || (count == 1 && from != to) {
            return Err("need finite end points and n >= 1 (n = 1 only when a = b)".to_string());
        }
        Ok(Self { from, to, count })
    }

    pub fn values(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.from];
        }
        let last = (self.count - 1) as f64;
        (0..self.count)
            .map(|i| (self.from * (last - i as f64) + self.to * i as f64) / last)
            .collect()
    }
}

#[derive(Debug, Clone, Serialize)]
struct SweepRow {
    #[serde(rename = "T")]
    t: f64,
    feasible: bool,
    #[serde(with = "ext::real")]
    value: f64,
    alpha_of_first_merge: Option<f64>,
}

/// Solves once per horizon end. The grid step of the scenario is kept, so
/// every run places nodes at the same times.
pub fn sweep(run: &mut Run, scenario: &Path, spec: &str, solver: &SolverArgs) -> CliResult<Status> {
    let spec = SweepSpec::parse(spec).map_err(|m| CliError::invalid("--sweep", "", m))?;
    let mut base = load_scenario(run, scenario)?;
    let mut config = load_config(run, solver, &mut base)?;
    let m = config.m.take().unwrap_or(base.m);
    let dt = (base.t_end() - base.t0()) / m as f64;
    let mut rows = Vec::with_capacity(spec.count);
    for t in spec.values() {
        if t <= base.t0() {
            return Err(CliError::invalid("--sweep", "", format!("T = {t} does not exceed t0 = {}", base.t0())));
        }
        let mut sc = base.clone();
        sc.horizon[1] = t;
        sc.m = (((t - base.t0()) / dt).round() as usize).max(1);
        let outcome = solve(&sc, &config).map_err(|e| CliError::core(&source(scenario), e))?;
        let alpha = outcome.solution().and_then(|s| {
            s.plan
                .events
                .iter()
                .min_by(|a, b| a.time.total_cmp(&b.time))
                .map(|e| e.point[0])
        });
        log::info!("T = {t}: value {}", outcome.value());
        rows.push(SweepRow {
            t,
            feasible: outcome.solution().is_some(),
            value: outcome.value(),
            alpha_of_first_merge: alpha,
        });
    }
    if run.format.json() {
        run.out.write_json("sweep.json", &rows)?;
    }
    if run.format.csv() {
        run.out.write_with("sweep.csv", |w| {
            use std::io::Write;
            writeln!(w, "T,feasible,value,alpha_of_first_merge")?;
            for r in &rows {
                let value = if r.value.is_finite() { r.value.to_string() } else { "inf".to_string() };
                let alpha = r.alpha_of_first_merge.map(|a| a.to_string()).unwrap_or_default();
                writeln!(w, "{},{},{},{}", r.t, r.feasible, value, alpha)?;
            }
            Ok(())
        })?;
    }
    Ok(Status::Ok)
}

pub fn example1(run: &mut Run, args: &Example1Args) -> CliResult<Status> {
    let grid = TimeGrid::uniform(0.0, args.t, args.m).map_err(|e| CliError::invalid("--t", "", e.to_string()))?;
    let mut sol = example1_optimum(args.r, args.t, &grid).map_err(|e| CliError::core("oracle", e))?;
    let scenario = example1_scenario(args.r, args.t, args.m);
    let scenario_json = serde_json::to_value(&scenario).map_err(anyhow::Error::from)?;
    run.record.scenario_sha256 = Some(sha256_hex(&scenario_json));
    let minimizer = sol.minimizer.take();
    if run.format.json() {
        run.out.write_json("oracle.json", &sol)?;
        run.out.write_json("scenario.json", &scenario_json)?;
        if let Some(m) = &minimizer {
            run.out.write_json("ensemble.json", m)?;
        }
    }
    if run.format.csv() {
        run.out.write_with("oracle.csv", |w| {
            use std::io::Write;
            let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
            writeln!(w, "R,T,feasible,alpha_bar,s_bar,cost")?;
            writeln!(
                w,
                "{},{},{},{},{},{}",
                args.r,
                args.t,
                sol.feasible,
                opt(sol.alpha_bar),
                opt(sol.s_bar),
                opt(sol.cost)
            )
        })?;
    }
    Ok(if sol.feasible { Status::Ok } else { Status::Infeasible })
}

fn parse_line(spec: &str) -> Result<LatticeSpec, String> {
    let (lo, hi) = spec.split_once(':').ok_or_else(|| format!("expected lo:hi, got {spec:?}"))?;
    let lo: i64 = lo.trim().parse().map_err(|e| format!("{lo:?}: {e}"))?;
    let hi: i64 = hi.trim().parse().map_err(|e| format!("{hi:?}: {e}"))?;
    if lo > hi {
        return Err(format!("empty range {lo}:{hi}"));
    }
    Ok(LatticeSpec::line(lo, hi))
}

#[derive(Serialize)]
struct BruteSummary {
    #[serde(with = "ext::real")]
    value: f64,
    candidates: u64,
}

pub fn brute(run: &mut Run, args: &BruteArgs) -> CliResult<Status> {
    let scenario = load_scenario(run, &args.scenario)?;
    let lattice = match (&args.lattice, &args.line) {
        (Some(path), _) => read_json::<LatticeSpec>(path)?.0,
        (None, Some(spec)) => parse_line(spec).map_err(|m| CliError::invalid("--line", "", m))?,
        (None, None) => return Err(CliError::invalid("--lattice", "", "one of --lattice or --line is required")),
    };
    let result = brute_force_value(&scenario, &lattice).map_err(|e| CliError::core(&source(&args.scenario), e))?;
    let summary = BruteSummary {
        value: result.value,
        candidates: result.candidates,
    };
    if run.format.json() {
        run.out.write_json("brute.json", &summary)?;
        if let Some(argmin) = &result.argmin {
            run.out.write_json("ensemble.json", argmin)?;
        }
    }
    if run.format.csv() {
        run.out.write_with("brute.csv", |w| {
            use std::io::Write;
            let value = if summary.value.is_finite() { summary.value.to_string() } else { "inf".to_string() };
            writeln!(w, "value,candidates\n{value},{}", summary.candidates)
        })?;
    }
    Ok(if result.value.is_finite() { Status::Ok } else { Status::Infeasible })
}

#[derive(Debug, Serialize)]
struct DppSummary {
    pass: bool,
    /// `minimizer` when following the solver's output, else `ensemble`.
    along: &'static str,
    tau: f64,
    epsilon: f64,
    #[serde(with = "ext::real")]
    v_tau: f64,
    spread: f64,
    relative_spread: f64,
    max_decrease: f64,
    monotone: bool,
    /// Only judged along a minimizer, where `ell` should be constant.
    #[serde(skip_serializing_if = "Option::is_none")]
    flat: Option<bool>,
    gaps: Vec<DppGap>,
    gaps_ok: bool,
}

/// Relative spread of `ell` tolerated along a minimizer.
const FLAT_TOL: f64 = 0.02;

pub fn dpp_check(run: &mut Run, args: &DppCheckArgs) -> CliResult<Status> {
    if args.points < 2 {
        return Err(CliError::invalid("--points", "", "need at least 2 points"));
    }
    let src = source(&args.scenario);
    let mut scenario = load_scenario(run, &args.scenario)?;
    let config = load_config(run, &args.solver, &mut scenario)?;
    let seed = config.seed.unwrap_or(scenario.seed);
    let est = ValueEstimator::new(&scenario, config.clone()).map_err(|e| CliError::core(&src, e))?;
    let (eta, along) = match &args.ensemble {
        Some(path) => {
            let eta = load_ensemble(path, &scenario)?;
            check_follows_grid(path, &eta, &est)?;
            (eta, "ensemble")
        }
        None => match solve(&scenario, &config).map_err(|e| CliError::core(&src, e))? {
            SolveOutcome::Solved(sol) => (sol.ensemble, "minimizer"),
            SolveOutcome::Infeasible(cert) => {
                log::warn!("no minimizer to follow: {}", cert.reason);
                run.out.write_json("solution.json", &SolveOutcome::Infeasible(cert))?;
                return Ok(Status::Infeasible);
            }
        },
    };
    let n = eta.grid().intervals();
    let mut s_nodes: Vec<usize> = (0..args.points)
        .map(|i| ((i * n) as f64 / (args.points - 1) as f64).round() as usize)
        .collect();
    s_nodes.dedup();
    let curve = ell_curve(&est, &eta, &s_nodes).map_err(|e| CliError::core(&src, e))?;
    let tau = eta.grid().t_start();
    let mu = eta.evaluate_at(tau).map_err(|e| CliError::core(&src, e))?;
    let mut gap_nodes: Vec<usize> = [n / 4, n / 2, 3 * n / 4].into_iter().filter(|&j| j > 0 && j < n).collect();
    gap_nodes.dedup();
    let gaps = gap_nodes
        .iter()
        .map(|&j| dpp_gap(&est, tau, &mu, eta.grid().nodes()[j], args.perturbations, seed))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| CliError::core(&src, e))?;
    let epsilon = est.epsilon();
    let spread = curve.spread();
    let relative_spread = if curve.v_tau != 0.0 { spread / curve.v_tau.abs() } else { spread };
    let max_decrease = curve.max_decrease();
    let monotone = max_decrease <= epsilon;
    let flat = (along == "minimizer").then_some(relative_spread <= FLAT_TOL);
    let gaps_ok = gaps.iter().all(|g| g.gap <= epsilon);
    let pass = curve.v_tau.is_finite() && monotone && gaps_ok && flat.unwrap_or(true);
    let summary = DppSummary {
        pass,
        along,
        tau,
        epsilon,
        v_tau: curve.v_tau,
        spread,
        relative_spread,
        max_decrease,
        monotone,
        flat,
        gaps,
        gaps_ok,
    };
    if run.format.json() {
        run.out.write_json("ell.json", &curve)?;
    }
    if run.format.csv() {
        run.out.write_with("ell.csv", |w| curve.write_csv(w))?;
    }
    run.out.write_json("dpp_summary.json", &summary)?;
    Ok(if pass { Status::Ok } else { Status::CheckFailed })
}

/// The value estimates index the scenario grid, so a followed ensemble must
/// live on a tail of it and respect the speed limit.
fn check_follows_grid(path: &Path, eta: &TrajectoryEnsemble, est: &ValueEstimator<'_>) -> CliResult<()> {
    let src = source(path);
    let grid = est.grid();
    let last = grid.intervals();
    let tail = est
        .node_index(eta.grid().t_start())
        .ok()
        .filter(|&k| k < last)
        .and_then(|k| grid.slice(k, last).ok());
    if tail.as_ref().map(TimeGrid::nodes) != Some(eta.grid().nodes()) {
        return Err(CliError::invalid(&src, "/grid", "nodes must be a tail of the scenario grid"));
    }
    let scenario = est.scenario();
    let mu = eta.evaluate_at(eta.grid().t_start()).map_err(|e| CliError::core(&src, e))?;
    let sub = scenario.restarted(eta.grid().t_start(), eta.grid().intervals(), mu);
    let report = check_admissible(eta, &sub).map_err(|e| CliError::core(&src, e))?;
    if report.offending.is_empty() {
        Ok(())
    } else {
        Err(CliError::Invalid(speed_errors(&src, eta, &sub, &report.offending)))
    }
}
