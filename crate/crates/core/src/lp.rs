//! Dense two-phase simplex for the small linear programs of the geometry
//! harness. Minimizes cᵀx subject to row constraints and x ≥ 0.

use crate::error::{Error, Result};

const PIVOT_TOL: f64 = 1e-9;
const COST_TOL: f64 = 1e-11;
const MAX_PIVOTS: usize = 100_000;
/// Consecutive degenerate pivots before switching to Bland's rule.
const DEGENERATE_SWITCH: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone)]
pub(crate) struct LinearProgram {
    n_vars: usize,
    cost: Vec<f64>,
    rows: Vec<(Vec<f64>, Relation, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum LpOutcome {
    Optimal { x: Vec<f64>, value: f64 },
    Infeasible,
    Unbounded,
}

impl LinearProgram {
    pub(crate) fn minimize(cost: Vec<f64>) -> Self {
        Self { n_vars: cost.len(), cost, rows: Vec::new() }
    }

    pub(crate) fn constrain(&mut self, coeffs: Vec<f64>, rel: Relation, rhs: f64) {
        debug_assert_eq!(coeffs.len(), self.n_vars);
        self.rows.push((coeffs, rel, rhs));
    }

    pub(crate) fn solve(&self) -> Result<LpOutcome> {
        Tableau::build(self).run(self)
    }
}

struct Tableau {
    m: usize,
    /// structural + slack/surplus + artificial columns
    cols: usize,
    n_artificial_start: usize,
    /// m rows of `cols + 1` entries, rhs last
    a: Vec<f64>,
    basis: Vec<usize>,
}

impl Tableau {
    fn build(lp: &LinearProgram) -> Self {
        let m = lp.rows.len();
        let n = lp.n_vars;
        let n_slack = lp.rows.iter().filter(|r| r.1 != Relation::Eq).count();
        // every row gets an artificial column; rows whose slack can start
        // basic never use theirs
        let cols = n + n_slack + m;
        let width = cols + 1;
        let mut a = vec![0.0; m * width];
        let mut basis = vec![0; m];
        let mut slack = n;
        for (i, (coeffs, rel, rhs)) in lp.rows.iter().enumerate() {
            let flip = *rhs < 0.0;
            let s = if flip { -1.0 } else { 1.0 };
            let row = &mut a[i * width..(i + 1) * width];
            for (dst, &c) in row.iter_mut().zip(coeffs) {
                *dst = s * c;
            }
            row[cols] = s * rhs;
            let rel = match (rel, flip) {
                (Relation::Le, true) => Relation::Ge,
                (Relation::Ge, true) => Relation::Le,
                (r, _) => *r,
            };
            let artificial = n + n_slack + i;
            match rel {
                Relation::Le => {
                    row[slack] = 1.0;
                    basis[i] = slack;
                    slack += 1;
                }
                Relation::Ge => {
                    row[slack] = -1.0;
                    slack += 1;
                    row[artificial] = 1.0;
                    basis[i] = artificial;
                }
                Relation::Eq => {
                    row[artificial] = 1.0;
                    basis[i] = artificial;
                }
            }
        }
        Self { m, cols, n_artificial_start: n + n_slack, a, basis }
    }

    fn width(&self) -> usize {
        self.cols + 1
    }

    fn at(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.width() + j]
    }

    fn rhs(&self, i: usize) -> f64 {
        self.at(i, self.cols)
    }

    fn pivot(&mut self, r: usize, c: usize, reduced: &mut [f64]) {
        let w = self.width();
        let p = self.at(r, c);
        for x in &mut self.a[r * w..(r + 1) * w] {
            *x /= p;
        }
        let pivot_row: Vec<f64> = self.a[r * w..(r + 1) * w].to_vec();
        for i in 0..self.m {
            if i == r {
                continue;
            }
            let f = self.a[i * w + c];
            if f != 0.0 {
                for (x, &y) in self.a[i * w..(i + 1) * w].iter_mut().zip(&pivot_row) {
                    *x -= f * y;
                }
                self.a[i * w + c] = 0.0;
            }
        }
        let f = reduced[c];
        if f != 0.0 {
            for (x, &y) in reduced.iter_mut().zip(&pivot_row) {
                *x -= f * y;
            }
            reduced[c] = 0.0;
        }
        self.basis[r] = c;
    }

    /// Reduced-cost row for `cost` (indexed by column) in the current basis;
    /// the last entry is −(objective value).
    fn reduced_costs(&self, cost: &[f64]) -> Vec<f64> {
        let mut d: Vec<f64> = cost.to_vec();
        d.push(0.0);
        for i in 0..self.m {
            let cb = cost[self.basis[i]];
            if cb != 0.0 {
                for (j, x) in d.iter_mut().enumerate() {
                    *x -= cb * self.at(i, j);
                }
            }
        }
        d
    }

    /// Returns false if unbounded.
    fn optimize(&mut self, reduced: &mut [f64], allowed: usize) -> Result<bool> {
        let mut degenerate = 0;
        for _ in 0..MAX_PIVOTS {
            let bland = degenerate >= DEGENERATE_SWITCH;
            let mut enter = None;
            let mut most = -COST_TOL;
            for (j, &d) in reduced[..allowed].iter().enumerate() {
                if d < most {
                    enter = Some(j);
                    if bland {
                        break;
                    }
                    most = d;
                }
            }
            let Some(c) = enter else {
                return Ok(true);
            };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.m {
                let aic = self.at(i, c);
                if aic > PIVOT_TOL {
                    let ratio = self.rhs(i) / aic;
                    let better = match leave {
                        None => true,
                        Some((l, best)) => {
                            ratio < best - 1e-14 || (ratio <= best + 1e-14 && self.basis[i] < self.basis[l])
                        }
                    };
                    if better {
                        leave = Some((i, ratio));
                    }
                }
            }
            let Some((r, ratio)) = leave else {
                return Ok(false);
            };
            degenerate = if ratio.abs() < 1e-14 { degenerate + 1 } else { 0 };
            self.pivot(r, c, reduced);
        }
        Err(Error::TooLarge(format!("simplex exceeded {MAX_PIVOTS} pivots")))
    }

    fn run(mut self, lp: &LinearProgram) -> Result<LpOutcome> {
        let n = lp.n_vars;
        let art = self.n_artificial_start;
        if self.basis.iter().any(|&b| b >= art) {
            let mut phase1 = vec![0.0; self.cols];
            for x in &mut phase1[art..] {
                *x = 1.0;
            }
            let mut reduced = self.reduced_costs(&phase1);
            self.optimize(&mut reduced, self.cols)?;
            let scale = 1.0 + lp.rows.iter().map(|r| r.2.abs()).fold(0.0, f64::max);
            if -reduced[self.cols] > 1e-9 * scale {
                return Ok(LpOutcome::Infeasible);
            }
            // drive zero-level artificials out of the basis
            for i in 0..self.m {
                if self.basis[i] >= art {
                    let entering = (0..art).find(|&j| self.at(i, j).abs() > PIVOT_TOL);
                    if let Some(j) = entering {
                        let mut dummy = vec![0.0; self.cols + 1];
                        self.pivot(i, j, &mut dummy);
                    }
                    // otherwise the row is redundant; its artificial stays
                    // basic at zero and is never allowed to re-enter
                }
            }
        }
        let mut cost = vec![0.0; self.cols];
        cost[..n].copy_from_slice(&lp.cost);
        let mut reduced = self.reduced_costs(&cost);
        if !self.optimize(&mut reduced, art)? {
            return Ok(LpOutcome::Unbounded);
        }
        let mut x = vec![0.0; n];
        for i in 0..self.m {
            if self.basis[i] < n {
                x[self.basis[i]] = self.rhs(i).max(0.0);
            }
        }
        let value = lp.cost.iter().zip(&x).map(|(c, v)| c * v).sum();
        Ok(LpOutcome::Optimal { x, value })
    }
}
