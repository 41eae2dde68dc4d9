//! Weighted L1 regression with box constraints:
//!
//! ```text
//! minimize  sum_r c_r |a_r . w - b_r|   over  w in [0, 1]^n
//! ```
//!
//! solved through its dual
//!
//! ```text
//! maximize  sum_r b_r y_r - sum_j v_j
//! s.t.      (A^T y)_j - v_j + t_j = 0,   -c_r <= y_r <= c_r,   v, t >= 0
//! ```
//!
//! with a bounded-variable primal simplex. The basis has one column per
//! surface, so the work per pivot does not grow with the number of probe rows.
//! The primal weights are the simplex multipliers of the optimal basis, which
//! makes them a vertex of the primal feasible set.

use nalgebra::DMatrix;

use super::SelectError;

/// One L1 program. Row `r` touches the columns listed in `rows[r]`.
#[derive(Clone, Debug)]
pub struct L1Problem {
    pub n: usize,
    pub rows: Vec<Vec<u32>>,
    pub cost: Vec<f64>,
    pub rhs: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct LpSolution {
    /// Optimal weights, clipped to `[0, 1]`.
    pub w: Vec<f64>,
    /// Value of the dual objective at a dual feasible point. Never exceeds the
    /// true optimum.
    pub lower_bound: f64,
    /// Primal objective at `w`.
    pub objective: f64,
    pub iterations: usize,
}

impl L1Problem {
    pub fn evaluate(&self, w: &[f64]) -> f64 {
        self.rows
            .iter()
            .zip(self.cost.iter().zip(&self.rhs))
            .map(|(row, (c, b))| {
                let s: f64 = row.iter().map(|&j| w[j as usize]).sum();
                c * (s - b).abs()
            })
            .sum()
    }

    fn dual_value(&self, y: &[f64]) -> f64 {
        let mut aty = vec![0.0; self.n];
        let mut val = 0.0;
        for (r, row) in self.rows.iter().enumerate() {
            let yr = y[r].clamp(-self.cost[r], self.cost[r]);
            val += self.rhs[r] * yr;
            for &j in row {
                aty[j as usize] += yr;
            }
        }
        val - aty.iter().map(|v| v.max(0.0)).sum::<f64>()
    }
}

const DUAL_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-9;
const REFACTOR_EVERY: usize = 64;
/// Consecutive pivots without objective progress before switching to Bland's rule.
const STALL_LIMIT: usize = 200;

#[derive(Clone, Copy, PartialEq)]
enum Var {
    Y(usize),
    V(usize),
    T(usize),
}

struct Simplex<'a> {
    p: &'a L1Problem,
    m: usize,
    n: usize,
    x: Vec<f64>,
    basis: Vec<usize>,
    /// Position in `basis`, `usize::MAX` when nonbasic.
    pos: Vec<usize>,
    binv: DMatrix<f64>,
}

impl<'a> Simplex<'a> {
    fn new(p: &'a L1Problem) -> Self {
        let (m, n) = (p.rows.len(), p.n);
        let mut x = vec![0.0; m + 2 * n];
        for r in 0..m {
            x[r] = -p.cost[r];
            for &j in &p.rows[r] {
                x[m + n + j as usize] += p.cost[r];
            }
        }
        let basis: Vec<usize> = (0..n).map(|j| m + n + j).collect();
        let mut pos = vec![usize::MAX; m + 2 * n];
        for (k, &b) in basis.iter().enumerate() {
            pos[b] = k;
        }
        Self {
            p,
            m,
            n,
            x,
            basis,
            pos,
            binv: DMatrix::identity(n, n),
        }
    }

    fn kind(&self, q: usize) -> Var {
        if q < self.m {
            Var::Y(q)
        } else if q < self.m + self.n {
            Var::V(q - self.m)
        } else {
            Var::T(q - self.m - self.n)
        }
    }

    fn bounds(&self, q: usize) -> (f64, f64) {
        match self.kind(q) {
            Var::Y(r) => (-self.p.cost[r], self.p.cost[r]),
            _ => (0.0, f64::INFINITY),
        }
    }

    fn obj(&self, q: usize) -> f64 {
        match self.kind(q) {
            Var::Y(r) => self.p.rhs[r],
            Var::V(_) => -1.0,
            Var::T(_) => 0.0,
        }
    }

    /// Sparse column of the constraint matrix.
    fn column(&self, q: usize, mut f: impl FnMut(usize, f64)) {
        match self.kind(q) {
            Var::Y(r) => self.p.rows[r].iter().for_each(|&j| f(j as usize, 1.0)),
            Var::V(j) => f(j, -1.0),
            Var::T(j) => f(j, 1.0),
        }
    }

    fn ftran(&self, q: usize) -> Vec<f64> {
        let mut alpha = vec![0.0; self.n];
        self.column(q, |j, a| {
            for (k, al) in alpha.iter_mut().enumerate() {
                *al += self.binv[(k, j)] * a;
            }
        });
        alpha
    }

    fn multipliers(&self) -> Vec<f64> {
        let cb: Vec<f64> = self.basis.iter().map(|&b| self.obj(b)).collect();
        (0..self.n)
            .map(|i| (0..self.n).map(|k| cb[k] * self.binv[(k, i)]).sum())
            .collect()
    }

    fn reduced_cost(&self, q: usize, pi: &[f64]) -> f64 {
        let mut d = self.obj(q);
        self.column(q, |j, a| d -= pi[j] * a);
        d
    }

    fn objective(&self) -> f64 {
        (0..self.m + 2 * self.n).map(|q| self.obj(q) * self.x[q]).sum()
    }

    /// Rebuild `B^-1` from scratch and recompute basic values from `B x_B = -N x_N`.
    fn refactor(&mut self) -> Result<(), SelectError> {
        let mut b = DMatrix::zeros(self.n, self.n);
        for (k, &q) in self.basis.iter().enumerate() {
            self.column(q, |j, a| b[(j, k)] += a);
        }
        self.binv = b
            .try_inverse()
            .ok_or_else(|| SelectError::SolverFailure("singular basis".into()))?;
        let mut rhs = vec![0.0; self.n];
        for q in 0..self.m + 2 * self.n {
            if self.pos[q] == usize::MAX && self.x[q] != 0.0 {
                let xq = self.x[q];
                self.column(q, |j, a| rhs[j] -= a * xq);
            }
        }
        for k in 0..self.n {
            let v: f64 = (0..self.n).map(|j| self.binv[(k, j)] * rhs[j]).sum();
            self.x[self.basis[k]] = v;
        }
        Ok(())
    }

    /// Ratio test for entering `q` moving in direction `s`. Returns the step
    /// and the leaving basis position (`None` for a bound flip).
    fn ratio(&self, q: usize, s: f64, alpha: &[f64], bland: bool) -> (f64, Option<usize>) {
        let (lq, uq) = self.bounds(q);
        let mut theta = uq - lq;
        let mut leave: Option<usize> = None;
        for (k, &a) in alpha.iter().enumerate() {
            if a.abs() <= PIVOT_TOL {
                continue;
            }
            let b = self.basis[k];
            let (lb, ub) = self.bounds(b);
            let rate = -s * a;
            let room = if rate < 0.0 {
                (self.x[b] - lb).max(0.0) / -rate
            } else if ub.is_finite() {
                (ub - self.x[b]).max(0.0) / rate
            } else {
                continue;
            };
            let better = match leave {
                _ if room < theta - 1e-12 => true,
                Some(l) if room <= theta + 1e-12 => {
                    if bland {
                        b < self.basis[l]
                    } else {
                        a.abs() > alpha[l].abs()
                    }
                }
                None if room <= theta + 1e-12 => true,
                _ => false,
            };
            if better {
                theta = room;
                leave = Some(k);
            }
        }
        (theta, leave)
    }

    /// Move `q` by `s * theta`; pivot it in at `leave` if given.
    fn step(&mut self, q: usize, s: f64, theta: f64, alpha: &[f64], leave: Option<usize>) {
        for (k, &a) in alpha.iter().enumerate() {
            self.x[self.basis[k]] -= s * theta * a;
        }
        let (lq, uq) = self.bounds(q);
        let Some(k) = leave else {
            self.x[q] = if s > 0.0 { uq } else { lq };
            return;
        };
        self.x[q] += s * theta;
        let out = self.basis[k];
        let (lo, uo) = self.bounds(out);
        // snap the leaving variable onto the bound it reached
        self.x[out] = if (self.x[out] - lo).abs() <= (self.x[out] - uo).abs() { lo } else { uo };
        self.pos[out] = usize::MAX;
        self.basis[k] = q;
        self.pos[q] = k;
        let piv = alpha[k];
        let n = self.n;
        for j in 0..n {
            self.binv[(k, j)] /= piv;
        }
        for i in 0..n {
            if i != k && alpha[i] != 0.0 {
                let f = alpha[i];
                for j in 0..n {
                    let v = self.binv[(k, j)];
                    self.binv[(i, j)] -= f * v;
                }
            }
        }
    }

    fn eligible(&self, q: usize, d: f64) -> Option<f64> {
        if self.pos[q] != usize::MAX {
            return None;
        }
        let (l, u) = self.bounds(q);
        if d > DUAL_TOL && self.x[q] < u {
            Some(1.0)
        } else if d < -DUAL_TOL && self.x[q] > l {
            Some(-1.0)
        } else {
            None
        }
    }

    fn solve(&mut self, max_iter: usize) -> Result<usize, SelectError> {
        let total = self.m + 2 * self.n;
        let mut pivots = 0usize;
        let mut stall = 0usize;
        let mut best = self.objective();
        for iter in 0..max_iter {
            let pi = self.multipliers();
            let bland = stall >= STALL_LIMIT;
            let mut cands: Vec<(usize, f64, f64)> = (0..total)
                .filter_map(|q| {
                    let d = self.reduced_cost(q, &pi);
                    self.eligible(q, d).map(|s| (q, s, d))
                })
                .collect();
            if cands.is_empty() {
                return Ok(iter);
            }
            if bland {
                cands.truncate(1);
            } else {
                cands.sort_by(|a, b| b.2.abs().total_cmp(&a.2.abs()).then(a.0.cmp(&b.0)));
            }
            // bound flips leave the basis, and hence the prices, unchanged
            for (q, s, _) in cands {
                let alpha = self.ftran(q);
                let (theta, leave) = self.ratio(q, s, &alpha, bland);
                if !theta.is_finite() {
                    return Err(SelectError::SolverFailure("dual unbounded".into()));
                }
                self.step(q, s, theta, &alpha, leave);
                if leave.is_some() {
                    pivots += 1;
                    if pivots % REFACTOR_EVERY == 0 {
                        self.refactor()?;
                    }
                    break;
                }
            }
            let now = self.objective();
            if now > best + 1e-12 * (1.0 + best.abs()) {
                best = now;
                stall = 0;
            } else {
                stall += 1;
            }
        }
        Err(SelectError::SolverFailure(format!(
            "no convergence within {max_iter} iterations"
        )))
    }
}

/// Solve the box-constrained L1 program.
pub fn solve_l1(p: &L1Problem) -> Result<LpSolution, SelectError> {
    if p.n == 0 {
        return Ok(LpSolution {
            w: Vec::new(),
            lower_bound: p.evaluate(&[]),
            objective: p.evaluate(&[]),
            iterations: 0,
        });
    }
    let mut sx = Simplex::new(p);
    let budget = 100 * (p.rows.len() + 2 * p.n) + 10_000;
    let iterations = sx.solve(budget)?;
    sx.refactor()?;
    let w: Vec<f64> = sx.multipliers().iter().map(|v| v.clamp(0.0, 1.0)).collect();
    let lower_bound = p.dual_value(&sx.x[..sx.m]);
    let objective = p.evaluate(&w);
    let tol = 1e-6 * (1.0 + objective.abs());
    if objective - lower_bound > tol {
        return Err(SelectError::SolverFailure(format!(
            "duality gap {} after {iterations} iterations",
            objective - lower_bound
        )));
    }
    Ok(LpSolution {
        w,
        lower_bound,
        objective,
        iterations,
    })
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Dense tableau simplex on the primal
    /// `min c.(u+ + u-)  s.t.  A w - u+ + u- = b,  w + s = 1`,
    /// phase one from artificial variables. Independent of the solver above.
    pub(crate) fn tableau_l1(p: &L1Problem) -> f64 {
        let (m, n) = (p.rows.len(), p.n);
        // columns: w (n), u+ (m), u- (m), s (n), artificials (m + n), rhs
        let nv = n + 2 * m + n;
        let na = m + n;
        let cols = nv + na + 1;
        let rows = m + n;
        let mut t = vec![vec![0.0f64; cols]; rows];
        for r in 0..m {
            for &j in &p.rows[r] {
                t[r][j as usize] = 1.0;
            }
            t[r][n + r] = -1.0;
            t[r][n + m + r] = 1.0;
            t[r][cols - 1] = p.rhs[r];
            if p.rhs[r] < 0.0 {
                t[r].iter_mut().for_each(|v| *v = -*v);
            }
            t[r][nv + r] = 1.0;
        }
        for j in 0..n {
            let r = m + j;
            t[r][j] = 1.0;
            t[r][n + 2 * m + j] = 1.0;
            t[r][nv + r] = 1.0;
            t[r][cols - 1] = 1.0;
        }
        let mut basis: Vec<usize> = (nv..nv + na).collect();
        let run = |t: &mut Vec<Vec<f64>>, basis: &mut Vec<usize>, cost: &[f64], allowed: usize| {
            loop {
                // reduced costs of a minimization
                let mut enter = None;
                let mut basic = vec![false; cols];
                basis.iter().for_each(|&b| basic[b] = true);
                let prices: Vec<f64> = basis.iter().map(|&b| cost[b]).collect();
                for q in 0..allowed {
                    if basic[q] {
                        continue;
                    }
                    let d = cost[q] - (0..rows).map(|i| prices[i] * t[i][q]).sum::<f64>();
                    if d < -1e-10 {
                        enter = Some(q);
                        break;
                    }
                }
                let Some(q) = enter else { return };
                let mut leave = None;
                let mut best = f64::INFINITY;
                for i in 0..rows {
                    if t[i][q] > 1e-9 {
                        let ratio = t[i][cols - 1] / t[i][q];
                        if ratio < best - 1e-12 {
                            best = ratio;
                            leave = Some(i);
                        }
                    }
                }
                let i = leave.expect("bounded");
                let piv = t[i][q];
                t[i].iter_mut().for_each(|v| *v /= piv);
                let prow = t[i].clone();
                for (k, row) in t.iter_mut().enumerate() {
                    if k != i && row[q] != 0.0 {
                        let f = row[q];
                        row.iter_mut().zip(&prow).for_each(|(v, pv)| *v -= f * pv);
                    }
                }
                basis[i] = q;
            }
        };
        let mut phase1 = vec![0.0; cols - 1];
        phase1[nv..nv + na].iter_mut().for_each(|c| *c = 1.0);
        run(&mut t, &mut basis, &phase1, nv + na);
        // drive zero-valued artificials out so phase two cannot raise them
        for i in 0..rows {
            if basis[i] < nv {
                continue;
            }
            if let Some(q) = (0..nv).find(|q| !basis.contains(q) && t[i][*q].abs() > 1e-9) {
                let piv = t[i][q];
                t[i].iter_mut().for_each(|v| *v /= piv);
                let prow = t[i].clone();
                for (k, row) in t.iter_mut().enumerate() {
                    if k != i && row[q] != 0.0 {
                        let f = row[q];
                        row.iter_mut().zip(&prow).for_each(|(v, pv)| *v -= f * pv);
                    }
                }
                basis[i] = q;
            }
        }
        let mut phase2 = vec![0.0; cols - 1];
        for r in 0..m {
            phase2[n + r] = p.cost[r];
            phase2[n + m + r] = p.cost[r];
        }
        run(&mut t, &mut basis, &phase2, nv);
        (0..rows).map(|i| phase2[basis[i]] * t[i][cols - 1]).sum()
    }

    pub(crate) fn random_problem(rng: &mut ChaCha8Rng, m: usize, n: usize, density: f64) -> L1Problem {
        let rows: Vec<Vec<u32>> = (0..m)
            .map(|_| (0..n as u32).filter(|_| rng.gen_bool(density)).collect())
            .collect();
        L1Problem {
            n,
            cost: (0..m).map(|_| rng.gen_range(1..4) as f64).collect(),
            rhs: vec![1.0; m],
            rows,
        }
    }

    #[test]
    fn identity_has_zero_objective() {
        let p = L1Problem {
            n: 5,
            rows: (0..5).map(|j| vec![j]).collect(),
            cost: vec![1.0; 5],
            rhs: vec![1.0; 5],
        };
        let s = solve_l1(&p).unwrap();
        assert!(s.w.iter().all(|&w| (w - 1.0).abs() < 1e-9));
        assert!(s.objective.abs() < 1e-9 && s.lower_bound.abs() < 1e-9);
    }

    #[test]
    fn duplicate_columns_split_freely() {
        let p = L1Problem {
            n: 2,
            rows: vec![vec![0, 1]; 4],
            cost: vec![1.0; 4],
            rhs: vec![1.0; 4],
        };
        let s = solve_l1(&p).unwrap();
        assert!((s.w[0] + s.w[1] - 1.0).abs() < 1e-9);
        assert!(s.objective.abs() < 1e-9);
    }

    #[test]
    fn matches_tableau_oracle_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let p = random_problem(&mut rng, 50, 20, 0.15);
            let s = solve_l1(&p).unwrap();
            let oracle = tableau_l1(&p);
            assert!((s.objective - oracle).abs() < 1e-5, "{} vs {oracle}", s.objective);
            assert!(s.lower_bound <= oracle + 1e-9);
        }
    }

    #[test]
    fn general_right_hand_sides() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let mut p = random_problem(&mut rng, 30, 8, 0.3);
            p.rhs = (0..30).map(|_| rng.gen_range(-1..3) as f64).collect();
            let s = solve_l1(&p).unwrap();
            assert!((s.objective - tableau_l1(&p)).abs() < 1e-6);
        }
    }
}
