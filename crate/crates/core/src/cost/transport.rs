//! Exact discrete optimal transport between two finitely supported measures.
//!
//! When every mass is a multiple of a common unit `1/q` (`q <= MAX_UNITS`),
//! atoms are split into unit copies and the problem becomes an assignment
//! solved by the Hungarian method. Otherwise a successive-shortest-path
//! min-cost flow handles arbitrary real masses.

/// Largest common refinement handed to the Hungarian method.
pub const MAX_UNITS: usize = 256;

const UNIT_TOL: f64 = 1e-9;

/// Minimum-cost assignment of rows to distinct columns (`rows <= cols`).
/// Returns the column chosen for each row.
pub fn hungarian(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    if n == 0 {
        return Vec::new();
    }
    let m = cost[0].len();
    assert!(n <= m, "hungarian needs rows <= cols");
    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut ans = vec![0; n];
    for j in 1..=m {
        if p[j] != 0 {
            ans[p[j] - 1] = j - 1;
        }
    }
    ans
}

/// Smallest `q <= MAX_UNITS` with every mass an integer multiple of `1/q`.
fn common_unit(a: &[f64], b: &[f64]) -> Option<usize> {
    (1..=MAX_UNITS).find(|&q| {
        let qf = q as f64;
        a.iter()
            .chain(b)
            .all(|&x| (x * qf - (x * qf).round()).abs() <= UNIT_TOL * qf && (x * qf).round() >= 1.0)
    })
}

/// Optimal coupling of masses `a` (rows) and `b` (cols) for `cost`.
pub fn optimal_plan(a: &[f64], b: &[f64], cost: &[Vec<f64>]) -> Vec<Vec<f64>> {
    match common_unit(a, b) {
        Some(q) => plan_by_assignment(a, b, cost, q),
        None => plan_by_flow(a, b, cost),
    }
}

fn plan_by_assignment(a: &[f64], b: &[f64], cost: &[Vec<f64>], q: usize) -> Vec<Vec<f64>> {
    let qf = q as f64;
    let expand = |w: &[f64]| -> Vec<usize> {
        w.iter()
            .enumerate()
            .flat_map(|(i, &x)| std::iter::repeat_n(i, (x * qf).round() as usize))
            .collect()
    };
    let rows = expand(a);
    let cols = expand(b);
    // Both sides hold q units up to rounding; surplus rows stay unassigned.
    let n = rows.len().min(cols.len());
    let unit_cost: Vec<Vec<f64>> = rows[..n]
        .iter()
        .map(|&i| cols.iter().map(|&j| cost[i][j]).collect())
        .collect();
    let assign = hungarian(&unit_cost);
    let mut plan = vec![vec![0.0; b.len()]; a.len()];
    for (r, &c) in assign.iter().enumerate() {
        plan[rows[r]][cols[c]] += 1.0 / qf;
    }
    plan
}

struct Edge {
    to: usize,
    cap: f64,
    cost: f64,
    rev: usize,
}

fn plan_by_flow(a: &[f64], b: &[f64], cost: &[Vec<f64>]) -> Vec<Vec<f64>> {
    const EPS: f64 = 1e-15;
    let (n, m) = (a.len(), b.len());
    let source = n + m;
    let sink = source + 1;
    let mut g: Vec<Vec<Edge>> = (0..n + m + 2).map(|_| Vec::new()).collect();
    let add = |g: &mut Vec<Vec<Edge>>, from: usize, to: usize, cap: f64, cost: f64| {
        let rf = g[to].len();
        let rt = g[from].len();
        g[from].push(Edge { to, cap, cost, rev: rf });
        g[to].push(Edge { to: from, cap: 0.0, cost: -cost, rev: rt });
    };
    for (i, &x) in a.iter().enumerate() {
        add(&mut g, source, i, x, 0.0);
    }
    for (j, &y) in b.iter().enumerate() {
        add(&mut g, n + j, sink, y, 0.0);
    }
    for i in 0..n {
        for j in 0..m {
            add(&mut g, i, n + j, f64::INFINITY, cost[i][j]);
        }
    }
    loop {
        // Bellman-Ford on the residual graph.
        let size = g.len();
        let mut dist = vec![f64::INFINITY; size];
        let mut prev: Vec<Option<(usize, usize)>> = vec![None; size];
        dist[source] = 0.0;
        for _ in 0..size {
            let mut changed = false;
            for u in 0..size {
                if !dist[u].is_finite() {
                    continue;
                }
                for (ei, e) in g[u].iter().enumerate() {
                    if e.cap > EPS && dist[u] + e.cost < dist[e.to] - 1e-15 {
                        dist[e.to] = dist[u] + e.cost;
                        prev[e.to] = Some((u, ei));
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        if !dist[sink].is_finite() {
            break;
        }
        let mut push = f64::INFINITY;
        let mut v = sink;
        while let Some((u, ei)) = prev[v] {
            push = push.min(g[u][ei].cap);
            v = u;
        }
        if push <= EPS {
            break;
        }
        let mut v = sink;
        while let Some((u, ei)) = prev[v] {
            g[u][ei].cap -= push;
            let (to, rev) = (g[u][ei].to, g[u][ei].rev);
            g[to][rev].cap += push;
            v = u;
        }
    }
    let mut plan = vec![vec![0.0; m]; n];
    for i in 0..n {
        for e in &g[i] {
            if e.to >= n && e.to < n + m {
                // Flow on a forward edge shows up as reverse capacity.
                plan[i][e.to - n] = g[e.to][e.rev].cap;
            }
        }
    }
    plan
}

pub fn plan_cost(plan: &[Vec<f64>], cost: &[Vec<f64>]) -> f64 {
    plan.iter()
        .zip(cost)
        .map(|(pr, cr)| pr.iter().zip(cr).map(|(p, c)| p * c).sum::<f64>())
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Exhaustive minimum over permutations.
    fn brute_assignment(cost: &[Vec<f64>]) -> f64 {
        fn rec(cost: &[Vec<f64>], row: usize, used: &mut Vec<bool>) -> f64 {
            if row == cost.len() {
                return 0.0;
            }
            let mut best = f64::INFINITY;
            for j in 0..used.len() {
                if !used[j] {
                    used[j] = true;
                    best = best.min(cost[row][j] + rec(cost, row + 1, used));
                    used[j] = false;
                }
            }
            best
        }
        rec(cost, 0, &mut vec![false; cost[0].len()])
    }

    #[test]
    fn hungarian_matches_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in 1..=6 {
            for _ in 0..20 {
                let cost: Vec<Vec<f64>> = (0..n).map(|_| (0..n).map(|_| rng.gen_range(0.0..10.0)).collect()).collect();
                let assign = hungarian(&cost);
                let got: f64 = assign.iter().enumerate().map(|(i, &j)| cost[i][j]).sum();
                assert!((got - brute_assignment(&cost)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn flow_and_assignment_agree_on_commensurate_masses() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let n = rng.gen_range(1..5);
            let m = rng.gen_range(1..5);
            let q = 12usize;
            let split = |k: usize, rng: &mut ChaCha8Rng| -> Vec<f64> {
                let mut units = vec![1usize; k];
                for _ in k..q {
                    units[rng.gen_range(0..k)] += 1;
                }
                units.iter().map(|&u| u as f64 / q as f64).collect()
            };
            let a = split(n, &mut rng);
            let b = split(m, &mut rng);
            let cost: Vec<Vec<f64>> = (0..n).map(|_| (0..m).map(|_| rng.gen_range(0.0..5.0)).collect()).collect();
            let p1 = plan_by_assignment(&a, &b, &cost, q);
            let p2 = plan_by_flow(&a, &b, &cost);
            assert!((plan_cost(&p1, &cost) - plan_cost(&p2, &cost)).abs() < 1e-9);
            for (i, row) in p2.iter().enumerate() {
                assert!((row.iter().sum::<f64>() - a[i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn irrational_masses_use_flow() {
        let s = 1.0 / std::f64::consts::PI;
        let a = [s, 1.0 - s];
        let b = [1.0];
        assert!(common_unit(&a, &b).is_none());
        let plan = optimal_plan(&a, &b, &[vec![1.0], vec![2.0]]);
        assert!((plan[0][0] - s).abs() < 1e-15);
        assert!((plan[1][0] - (1.0 - s)).abs() < 1e-15);
    }
}
