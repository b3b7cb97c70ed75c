//! Deterministic compass search with lexicographic objectives.

use std::cmp::Ordering;

/// Objective value compared lexicographically. The second entry breaks ties
/// on plateaus of the first, which is piecewise constant for
/// position-independent Lagrangians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Score(pub f64, pub f64);

impl Score {
    pub const INFEASIBLE: Score = Score(f64::INFINITY, f64::INFINITY);

    pub fn cmp(&self, other: &Score) -> Ordering {
        self.0.total_cmp(&other.0).then(self.1.total_cmp(&other.1))
    }

    pub fn better_than(&self, other: &Score) -> bool {
        self.cmp(other) == Ordering::Less
    }

    pub fn is_finite(&self) -> bool {
        self.0.is_finite()
    }
}

#[derive(Debug, Clone)]
pub(crate) struct PatternSearch {
    pub max_evals: usize,
    /// Stop once the relative step falls below this.
    pub x_tol: f64,
    /// Starting relative step.
    pub initial_step: f64,
    /// Diagonal moves pair any two variables up to this many variables;
    /// beyond it only variables of the same group are paired.
    pub diagonal_up_to: usize,
}

pub(crate) struct SearchResult {
    pub x: Vec<f64>,
    pub score: Score,
    pub evals: usize,
}

impl PatternSearch {
    /// Minimizes `f` from `x0`; variable `j` moves in units of `scale[j]`
    /// and belongs to group `group[j]`.
    pub fn minimize<F: FnMut(&[f64]) -> Score>(
        &self,
        mut f: F,
        x0: Vec<f64>,
        scale: &[f64],
        group: &[usize],
    ) -> SearchResult {
        let n = x0.len();
        let all_pairs = n <= self.diagonal_up_to;
        let mut x = x0;
        let mut fx = f(&x);
        let mut evals = 1;
        if n == 0 {
            return SearchResult { x, score: fx, evals };
        }
        let mut step = self.initial_step;
        let mut trial = x.clone();
        while step >= self.x_tol && evals < self.max_evals {
            let mut improved = false;
            for j in 0..n {
                for sign in [1.0, -1.0] {
                    trial.copy_from_slice(&x);
                    trial[j] += sign * step * scale[j];
                    let ft = f(&trial);
                    evals += 1;
                    if ft.better_than(&fx) {
                        x.copy_from_slice(&trial);
                        fx = ft;
                        improved = true;
                        break;
                    }
                }
            }
            if !improved {
                'diag: for j in 0..n {
                    for l in (j + 1..n).filter(|&l| all_pairs || group[l] == group[j]) {
                        for (sj, sl) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
                            trial.copy_from_slice(&x);
                            trial[j] += sj * step * scale[j];
                            trial[l] += sl * step * scale[l];
                            let ft = f(&trial);
                            evals += 1;
                            if ft.better_than(&fx) {
                                x.copy_from_slice(&trial);
                                fx = ft;
                                improved = true;
                                break 'diag;
                            }
                        }
                    }
                }
            }
            if !improved {
                step *= 0.5;
            }
        }
        SearchResult { x, score: fx, evals }
    }
}
