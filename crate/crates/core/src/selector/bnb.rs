use std::collections::BTreeMap;

use super::lp::{solve_l1, L1Problem};
use super::{CompressedRows, SelectError};

/// Exact binary selection result.
#[derive(Clone, Debug, PartialEq)]
pub struct SelectionResult {
    pub weights: Vec<bool>,
    /// L1 deviation of `weights`, including rows no surface touches.
    pub objective: f64,
    /// Lower bound from the relaxation.
    pub relaxed_objective: f64,
    /// Number of weights fixed straight from the relaxation.
    pub n_fixed: usize,
    /// Branch-and-bound nodes visited.
    pub nodes: usize,
}

impl SelectionResult {
    pub fn fixed_fraction(&self) -> f64 {
        if self.weights.is_empty() {
            return 1.0;
        }
        self.n_fixed as f64 / self.weights.len() as f64
    }

    pub fn selected(&self) -> Vec<usize> {
        (0..self.weights.len()).filter(|&i| self.weights[i]).collect()
    }
}

/// Residual L1 program after fixing some columns. Free columns are renumbered
/// `0..free.len()`.
struct Reduced {
    problem: L1Problem,
    constant: f64,
}

fn reduce(rows: &CompressedRows, assignment: &[Option<bool>], free: &[usize]) -> Reduced {
    let mut local = vec![u32::MAX; assignment.len()];
    for (k, &j) in free.iter().enumerate() {
        local[j] = k as u32;
    }
    let mut merged: BTreeMap<(Vec<u32>, i64), f64> = BTreeMap::new();
    let mut constant = rows.empty as f64;
    for (support, &count) in rows.supports.iter().zip(&rows.counts) {
        let mut rhs = 1i64;
        let mut sub = Vec::new();
        for &j in support {
            match assignment[j as usize] {
                Some(true) => rhs -= 1,
                Some(false) => {}
                None => sub.push(local[j as usize]),
            }
        }
        if sub.is_empty() {
            constant += count as f64 * rhs.abs() as f64;
        } else {
            *merged.entry((sub, rhs)).or_default() += count as f64;
        }
    }
    let mut problem = L1Problem {
        n: free.len(),
        rows: Vec::with_capacity(merged.len()),
        cost: Vec::with_capacity(merged.len()),
        rhs: Vec::with_capacity(merged.len()),
    };
    for ((sub, rhs), c) in merged {
        problem.rows.push(sub);
        problem.rhs.push(rhs as f64);
        problem.cost.push(c);
    }
    Reduced { problem, constant }
}

/// Objective values are integers (integer counts and targets), so a bound
/// can be rounded up.
fn integer_bound(lb: f64) -> f64 {
    (lb - 1e-6).ceil()
}

struct Search<'a> {
    rows: &'a CompressedRows,
    best: Vec<bool>,
    best_value: u64,
    nodes: usize,
}

impl Search<'_> {
    fn offer(&mut self, w: &[bool]) {
        let v = self.rows.objective(w);
        if v < self.best_value {
            self.best_value = v;
            self.best = w.to_vec();
        }
    }

    fn visit(&mut self, assignment: &mut Vec<Option<bool>>) -> Result<(), SelectError> {
        self.nodes += 1;
        let free: Vec<usize> = (0..assignment.len()).filter(|&j| assignment[j].is_none()).collect();
        let red = reduce(self.rows, assignment, &free);
        let sol = solve_l1(&red.problem)?;
        let bound = integer_bound(red.constant + sol.lower_bound);
        if bound >= self.best_value as f64 {
            return Ok(());
        }
        let complete = |w_free: &dyn Fn(usize, f64) -> bool| -> Vec<bool> {
            let mut w: Vec<bool> = assignment.iter().map(|a| a.unwrap_or(false)).collect();
            for (k, &j) in free.iter().enumerate() {
                w[j] = w_free(k, sol.w[k]);
            }
            w
        };
        self.offer(&complete(&|_, v| v >= 0.5));
        if bound >= self.best_value as f64 {
            return Ok(());
        }
        let Some(k) = (0..free.len())
            .filter(|&k| sol.w[k] > 1e-9 && sol.w[k] < 1.0 - 1e-9)
            .max_by(|&a, &b| {
                let fa = 0.5 - (sol.w[a] - 0.5).abs();
                let fb = 0.5 - (sol.w[b] - 0.5).abs();
                fa.total_cmp(&fb).then(b.cmp(&a))
            })
            // integral but not yet proven: split on any free column
            .or_else(|| free.first().map(|_| 0))
        else {
            return Ok(());
        };
        let j = free[k];
        let first = sol.w[k] >= 0.5;
        for value in [first, !first] {
            assignment[j] = Some(value);
            self.visit(assignment)?;
        }
        assignment[j] = None;
        Ok(())
    }
}

/// Fix near-integral relaxed weights and solve the rest exactly by
/// branch and bound. A negative `tol_fix` fixes nothing, which makes the
/// result the exact optimum of the whole problem.
pub fn finalize_binary(
    rows: &CompressedRows,
    w_relaxed: &[f64],
    relaxed_objective: f64,
    tol_fix: f64,
    max_free: usize,
) -> Result<SelectionResult, SelectError> {
    let n = rows.n;
    if w_relaxed.len() != n {
        return Err(SelectError::InvalidParam(format!(
            "{} weights for {n} surfaces",
            w_relaxed.len()
        )));
    }
    let mut assignment: Vec<Option<bool>> = w_relaxed
        .iter()
        .map(|&w| {
            if w <= tol_fix {
                Some(false)
            } else if w >= 1.0 - tol_fix {
                Some(true)
            } else {
                None
            }
        })
        .collect();
    let n_fixed = assignment.iter().filter(|a| a.is_some()).count();
    let n_free = n - n_fixed;
    if n_free > max_free {
        return Err(SelectError::TooManyFreeVariables {
            free: n_free,
            budget: max_free,
        });
    }
    let start: Vec<bool> = assignment
        .iter()
        .zip(w_relaxed)
        .map(|(a, &w)| a.unwrap_or(w >= 0.5))
        .collect();
    let mut search = Search {
        rows,
        best_value: rows.objective(&start),
        best: start,
        nodes: 0,
    };
    if n_free > 0 || tol_fix < 0.0 {
        search.visit(&mut assignment)?;
    }
    Ok(SelectionResult {
        weights: search.best,
        objective: search.best_value as f64,
        relaxed_objective,
        n_fixed,
        nodes: search.nodes,
    })
}
