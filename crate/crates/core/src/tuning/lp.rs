//! Dense tableau simplex for packing programs `max 1'x  s.t.  G x <= 1, x >= 0`.
//!
//! This is the linear program of a zero-sum game with non-negative payoffs:
//! with `x*` optimal, `lambda = x* / sum(x*)` is a minimax strategy for the
//! column player and `1 / sum(x*)` the game value. Rows can be added after a
//! solve; the tableau is then re-optimized by dual simplex pivots.

use crate::error::{Error, Result};

const EPS: f64 = 1e-11;
/// Consecutive degenerate pivots tolerated before switching to Bland's rule.
const DEGENERATE_LIMIT: usize = 50;

#[derive(Debug, Clone)]
pub(crate) struct PackingLp {
    nvar: usize,
    rows: Vec<Vec<f64>>,
    rhs: Vec<f64>,
    /// Reduced costs of the maximization, non-negative at optimality.
    obj: Vec<f64>,
    obj_val: f64,
    basis: Vec<usize>,
    bland: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Outcome {
    Optimal,
    /// Some column is unconstrained by the current rows.
    Unbounded(usize),
}

impl PackingLp {
    pub(crate) fn new(nvar: usize) -> Self {
        Self {
            nvar,
            rows: Vec::new(),
            rhs: Vec::new(),
            obj: vec![-1.0; nvar],
            obj_val: 0.0,
            basis: Vec::new(),
            bland: false,
        }
    }

    /// Adds the constraint `g . x <= 1`, expressed in the current basis.
    pub(crate) fn add_row(&mut self, g: &[f64]) {
        debug_assert_eq!(g.len(), self.nvar);
        for r in &mut self.rows {
            r.push(0.0);
        }
        self.obj.push(0.0);
        let width = self.obj.len();
        let mut row = vec![0.0; width];
        row[..self.nvar].copy_from_slice(g);
        row[width - 1] = 1.0;
        let mut rhs = 1.0;
        for (i, &b) in self.basis.iter().enumerate() {
            let coef = row[b];
            if coef != 0.0 {
                for (v, t) in row.iter_mut().zip(&self.rows[i]) {
                    *v -= coef * t;
                }
                rhs -= coef * self.rhs[i];
            }
        }
        self.rows.push(row);
        self.rhs.push(rhs);
        self.basis.push(width - 1);
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.rows[r][c];
        self.rows[r].iter_mut().for_each(|v| *v /= p);
        self.rhs[r] /= p;
        let pivot_row = self.rows[r].clone();
        let pivot_rhs = self.rhs[r];
        for i in 0..self.rows.len() {
            if i == r {
                continue;
            }
            let f = self.rows[i][c];
            if f != 0.0 {
                for (v, t) in self.rows[i].iter_mut().zip(&pivot_row) {
                    *v -= f * t;
                }
                self.rhs[i] -= f * pivot_rhs;
            }
        }
        let f = self.obj[c];
        if f != 0.0 {
            for (v, t) in self.obj.iter_mut().zip(&pivot_row) {
                *v -= f * t;
            }
            self.obj_val -= f * pivot_rhs;
        }
        self.basis[r] = c;
    }

    fn iteration_cap(&self) -> usize {
        200 * (self.obj.len() + self.rows.len()) + 1000
    }

    fn primal(&mut self) -> Result<Outcome> {
        let mut degenerate = 0;
        for _ in 0..self.iteration_cap() {
            let entering = if self.bland {
                self.obj.iter().position(|&v| v < -EPS)
            } else {
                self.obj
                    .iter()
                    .enumerate()
                    .filter(|(_, &v)| v < -EPS)
                    .min_by(|a, b| a.1.partial_cmp(b.1).expect("finite tableau"))
                    .map(|(j, _)| j)
            };
            let Some(c) = entering else {
                return Ok(Outcome::Optimal);
            };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.rows.len() {
                let a = self.rows[i][c];
                if a > EPS {
                    let ratio = self.rhs[i].max(0.0) / a;
                    let better = match leave {
                        None => true,
                        Some((l, best)) => ratio < best - EPS || (ratio <= best + EPS && self.basis[i] < self.basis[l]),
                    };
                    if better {
                        leave = Some((i, ratio));
                    }
                }
            }
            let Some((r, ratio)) = leave else {
                return Ok(Outcome::Unbounded(c));
            };
            if ratio <= EPS {
                degenerate += 1;
                if degenerate > DEGENERATE_LIMIT {
                    self.bland = true;
                }
            } else {
                degenerate = 0;
            }
            self.pivot(r, c);
        }
        Err(Error::LinearProgram("primal simplex iteration limit reached".into()))
    }

    fn dual(&mut self) -> Result<()> {
        for _ in 0..self.iteration_cap() {
            let leaving = if self.bland {
                (0..self.rows.len())
                    .filter(|&i| self.rhs[i] < -EPS)
                    .min_by_key(|&i| self.basis[i])
            } else {
                (0..self.rows.len())
                    .filter(|&i| self.rhs[i] < -EPS)
                    .min_by(|&a, &b| self.rhs[a].partial_cmp(&self.rhs[b]).expect("finite tableau"))
            };
            let Some(r) = leaving else {
                return Ok(());
            };
            let mut enter: Option<(usize, f64)> = None;
            for (j, &a) in self.rows[r].iter().enumerate() {
                if a < -EPS {
                    let ratio = self.obj[j].max(0.0) / -a;
                    if enter.is_none_or(|(_, best)| ratio < best - EPS) {
                        enter = Some((j, ratio));
                    }
                }
            }
            let Some((c, _)) = enter else {
                // x = 0 is always feasible, so this row is round-off.
                if self.rhs[r] > -1e-8 {
                    self.rhs[r] = 0.0;
                    continue;
                }
                return Err(Error::LinearProgram("packing program became infeasible".into()));
            };
            self.pivot(r, c);
        }
        Err(Error::LinearProgram("dual simplex iteration limit reached".into()))
    }

    /// Re-optimizes after construction or row additions.
    pub(crate) fn solve(&mut self) -> Result<Outcome> {
        for _ in 0..8 {
            self.dual()?;
            match self.primal()? {
                Outcome::Optimal => {}
                unbounded => return Ok(unbounded),
            }
            if self.rhs.iter().all(|&v| v >= -EPS) {
                return Ok(Outcome::Optimal);
            }
        }
        Err(Error::LinearProgram("simplex phases did not settle".into()))
    }

    /// Current primal solution.
    pub(crate) fn primal_solution(&self) -> Vec<f64> {
        let mut x = vec![0.0; self.nvar];
        for (i, &b) in self.basis.iter().enumerate() {
            if b < self.nvar {
                x[b] = self.rhs[i].max(0.0);
            }
        }
        x
    }

    /// Dual prices of the rows in insertion order.
    pub(crate) fn dual_solution(&self) -> Vec<f64> {
        (0..self.rows.len()).map(|k| self.obj[self.nvar + k].max(0.0)).collect()
    }

    #[cfg(test)]
    fn objective(&self) -> f64 {
        self.obj_val
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rock_paper_scissors_shifted() {
        // Payoffs shifted by +1 so they are non-negative; value 1.
        let g = [[1.0, 2.0, 0.0], [0.0, 1.0, 2.0], [2.0, 0.0, 1.0]];
        let mut lp = PackingLp::new(3);
        for row in &g {
            lp.add_row(row);
        }
        assert_eq!(lp.solve().unwrap(), Outcome::Optimal);
        let x = lp.primal_solution();
        let total: f64 = x.iter().sum();
        assert!((1.0 / total - 1.0).abs() < 1e-12);
        for xi in x {
            assert!((xi / total - 1.0 / 3.0).abs() < 1e-12);
        }
        let y = lp.dual_solution();
        assert!((y.iter().sum::<f64>() - total).abs() < 1e-12);
    }

    #[test]
    fn rows_added_after_solve() {
        let mut lp = PackingLp::new(2);
        lp.add_row(&[1.0, 0.0]);
        lp.add_row(&[0.0, 1.0]);
        lp.solve().unwrap();
        assert!((lp.objective() - 2.0).abs() < 1e-12);
        lp.add_row(&[1.0, 1.0]);
        lp.add_row(&[2.0, 0.5]);
        lp.solve().unwrap();
        // Optimum of x + y with x + y <= 1 is 1.
        assert!((lp.objective() - 1.0).abs() < 1e-12);
        let x = lp.primal_solution();
        assert!(x[0] + x[1] <= 1.0 + 1e-12 && 2.0 * x[0] + 0.5 * x[1] <= 1.0 + 1e-12);
    }

    #[test]
    fn unbounded_column_reported() {
        let mut lp = PackingLp::new(2);
        lp.add_row(&[1.0, 0.0]);
        assert_eq!(lp.solve().unwrap(), Outcome::Unbounded(1));
    }

    #[test]
    fn degenerate_program_terminates() {
        // Many identical rows force degenerate pivots.
        let mut lp = PackingLp::new(3);
        for _ in 0..30 {
            lp.add_row(&[1.0, 1.0, 1.0]);
            lp.add_row(&[1.0, 0.0, 2.0]);
        }
        lp.solve().unwrap();
        assert!((lp.objective() - 1.0).abs() < 1e-12);
    }
}
