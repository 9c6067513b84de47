//! Dense two-phase simplex with Bland's rule.
//!
//! Solutions are only used as proposals: every bound derived from them is
//! re-evaluated with sound arithmetic by the caller.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cmp {
    Le,
    Ge,
    Eq,
}

/// `minimize objective . x` subject to `rows` and `x >= 0`.
#[derive(Debug, Clone, Default)]
pub struct Lp {
    pub objective: Vec<f64>,
    pub rows: Vec<(Vec<f64>, Cmp, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    /// Optimal point, objective value and one multiplier per row, signed so
    /// that `objective - sum_i duals[i] * rows[i].0 >= 0` at optimality.
    Optimal { x: Vec<f64>, value: f64, duals: Vec<f64> },
    Infeasible,
    Unbounded,
    IterationLimit,
}

const PIVOT_TOL: f64 = 1e-9;
const FEAS_TOL: f64 = 1e-7;

struct Tableau {
    t: Vec<Vec<f64>>,
    basis: Vec<usize>,
    cols: usize,
}

impl Tableau {
    fn rhs(&self, r: usize) -> f64 {
        self.t[r][self.cols]
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let p = self.t[row][col];
        for v in self.t[row].iter_mut() {
            *v /= p;
        }
        let pivot_row = self.t[row].clone();
        for (r, line) in self.t.iter_mut().enumerate() {
            if r == row {
                continue;
            }
            let f = line[col];
            if f != 0.0 {
                for (v, pv) in line.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
                line[col] = 0.0;
            }
        }
        self.basis[row] = col;
    }

    /// Minimize `cost` over the current basis. Columns with `allowed == false`
    /// never enter.
    fn optimize(&mut self, cost: &[f64], allowed: &[bool], max_iter: usize) -> Result<(), LpOutcome> {
        for _ in 0..max_iter {
            let m = self.t.len();
            let mut entering = None;
            for j in 0..self.cols {
                if !allowed[j] || self.basis.contains(&j) {
                    continue;
                }
                let mut reduced = cost[j];
                for r in 0..m {
                    reduced -= cost[self.basis[r]] * self.t[r][j];
                }
                if reduced < -PIVOT_TOL {
                    entering = Some(j);
                    break;
                }
            }
            let Some(col) = entering else { return Ok(()) };
            let mut best: Option<(f64, usize)> = None;
            for r in 0..m {
                let a = self.t[r][col];
                if a > PIVOT_TOL {
                    let ratio = self.rhs(r) / a;
                    best = match best {
                        Some((br, bi)) if ratio > br + 1e-12 || (ratio >= br - 1e-12 && self.basis[r] > self.basis[bi]) => {
                            Some((br, bi))
                        }
                        _ => Some((ratio, r)),
                    };
                }
            }
            let Some((_, row)) = best else { return Err(LpOutcome::Unbounded) };
            self.pivot(row, col);
        }
        Err(LpOutcome::IterationLimit)
    }
}

impl Lp {
    pub fn new(objective: Vec<f64>) -> Self {
        Self { objective, rows: Vec::new() }
    }

    pub fn row(&mut self, coeffs: Vec<f64>, cmp: Cmp, rhs: f64) -> &mut Self {
        self.rows.push((coeffs, cmp, rhs));
        self
    }

    pub fn solve(&self) -> LpOutcome {
        let n = self.objective.len();
        let m = self.rows.len();
        // Columns: structural, one slack/surplus per inequality, one artificial per Ge/Eq row.
        let mut flipped = vec![false; m];
        let mut kinds = Vec::with_capacity(m);
        for (i, (_, cmp, rhs)) in self.rows.iter().enumerate() {
            let neg = *rhs < 0.0;
            flipped[i] = neg;
            kinds.push(match (cmp, neg) {
                (Cmp::Le, false) | (Cmp::Ge, true) => Cmp::Le,
                (Cmp::Ge, false) | (Cmp::Le, true) => Cmp::Ge,
                (Cmp::Eq, _) => Cmp::Eq,
            });
        }
        let n_slack = kinds.iter().filter(|k| **k != Cmp::Eq).count();
        let n_art = kinds.iter().filter(|k| **k != Cmp::Le).count();
        let cols = n + n_slack + n_art;
        let mut t = vec![vec![0.0; cols + 1]; m];
        let mut basis = vec![0; m];
        let mut init_col = vec![0; m];
        let (mut next_slack, mut next_art) = (n, n + n_slack);
        for (i, (coeffs, _, rhs)) in self.rows.iter().enumerate() {
            let sign = if flipped[i] { -1.0 } else { 1.0 };
            for (j, &a) in coeffs.iter().enumerate().take(n) {
                t[i][j] = sign * a;
            }
            t[i][cols] = sign * rhs;
            match kinds[i] {
                Cmp::Le => {
                    t[i][next_slack] = 1.0;
                    basis[i] = next_slack;
                    init_col[i] = next_slack;
                    next_slack += 1;
                }
                Cmp::Ge => {
                    t[i][next_slack] = -1.0;
                    next_slack += 1;
                    t[i][next_art] = 1.0;
                    basis[i] = next_art;
                    init_col[i] = next_art;
                    next_art += 1;
                }
                Cmp::Eq => {
                    t[i][next_art] = 1.0;
                    basis[i] = next_art;
                    init_col[i] = next_art;
                    next_art += 1;
                }
            }
        }
        let mut tab = Tableau { t, basis, cols };
        let max_iter = 50 * (m + cols) + 100;
        let art_start = n + n_slack;

        if n_art > 0 {
            let mut cost1 = vec![0.0; cols];
            cost1[art_start..].iter_mut().for_each(|c| *c = 1.0);
            let allowed = vec![true; cols];
            if let Err(e) = tab.optimize(&cost1, &allowed, max_iter) {
                return e;
            }
            let infeas: f64 = (0..m).filter(|&r| tab.basis[r] >= art_start).map(|r| tab.rhs(r)).sum();
            if infeas > FEAS_TOL {
                return LpOutcome::Infeasible;
            }
            // Drive zero-valued artificials out of the basis where possible.
            for r in 0..m {
                if tab.basis[r] >= art_start {
                    if let Some(j) = (0..art_start).find(|&j| tab.t[r][j].abs() > PIVOT_TOL && !tab.basis.contains(&j)) {
                        tab.pivot(r, j);
                    }
                }
            }
        }

        let mut cost = vec![0.0; cols];
        cost[..n].copy_from_slice(&self.objective);
        let mut allowed = vec![true; cols];
        allowed[art_start..].iter_mut().for_each(|a| *a = false);
        if let Err(e) = tab.optimize(&cost, &allowed, max_iter) {
            return e;
        }
        let mut x = vec![0.0; n];
        for r in 0..m {
            if tab.basis[r] < n {
                x[tab.basis[r]] = tab.rhs(r).max(0.0);
            }
        }
        let value = x.iter().zip(&self.objective).map(|(a, b)| a * b).sum();
        let duals = (0..m)
            .map(|i| {
                let y: f64 = (0..m).map(|r| cost[tab.basis[r]] * tab.t[r][init_col[i]]).sum();
                if flipped[i] {
                    -y
                } else {
                    y
                }
            })
            .collect();
        LpOutcome::Optimal { x, value, duals }
    }
}
