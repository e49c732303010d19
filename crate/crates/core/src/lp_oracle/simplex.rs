//! Dense two-phase primal simplex, generic over the scalar type.
//!
//! Pivoting is deterministic: Dantzig's largest reduced cost with lowest-index
//! ties, switching to Bland's rule after a run of degenerate pivots so
//! degenerate problems cannot cycle.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Largest dense tableau (rows x columns) the solver will allocate.
pub const TABLEAU_BUDGET: u128 = 30_000_000;

const DEGENERATE_RUN: usize = 50;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Constraint<T> {
    pub coeffs: Vec<(usize, T)>,
    pub relation: Relation,
    pub rhs: T,
}

/// `maximize objective . x` subject to the constraints and `x >= 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearProgram<T> {
    pub num_vars: usize,
    pub objective: Vec<T>,
    pub constraints: Vec<Constraint<T>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LpOptimum<T> {
    pub x: Vec<T>,
    pub objective: T,
    /// One multiplier per constraint; `sum_i duals[i] * rhs[i]` is the dual objective.
    pub duals: Vec<T>,
    pub pivots: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub enum LpOutcome<T> {
    Optimal(LpOptimum<T>),
    Infeasible,
    Unbounded,
}

impl<T: Scalar> LinearProgram<T> {
    pub fn new(num_vars: usize) -> Self {
        LinearProgram {
            num_vars,
            objective: vec![T::zero(); num_vars],
            constraints: Vec::new(),
        }
    }

    pub fn add(&mut self, coeffs: Vec<(usize, T)>, relation: Relation, rhs: T) {
        self.constraints.push(Constraint { coeffs, relation, rhs });
    }

    pub fn dual_objective(&self, duals: &[T]) -> T {
        self.constraints
            .iter()
            .zip(duals)
            .fold(T::zero(), |acc, (c, y)| acc + c.rhs.clone() * y.clone())
    }

    /// Writes the program in CPLEX LP text format.
    pub fn to_lp_text(&self, names: &dyn Fn(usize) -> String) -> String {
        let mut out = String::new();
        let term = |out: &mut String, first: bool, coef: &T, var: usize| {
            let sign = if coef.is_negative() { " -" } else if first { "" } else { " +" };
            let _ = write!(out, "{sign} {} {}", coef.abs().encode(), names(var));
        };
        out.push_str("Maximize\n obj:");
        let mut first = true;
        for (j, c) in self.objective.iter().enumerate() {
            if !c.is_zero() {
                term(&mut out, first, c, j);
                first = false;
            }
        }
        if first {
            out.push_str(" 0");
        }
        out.push_str("\nSubject To\n");
        for (i, c) in self.constraints.iter().enumerate() {
            let _ = write!(out, " c{i}:");
            let mut first = true;
            for (j, a) in &c.coeffs {
                if !a.is_zero() {
                    term(&mut out, first, a, *j);
                    first = false;
                }
            }
            if first {
                out.push_str(" 0");
            }
            let rel = match c.relation {
                Relation::Le => "<=",
                Relation::Eq => "=",
                Relation::Ge => ">=",
            };
            let _ = writeln!(out, " {rel} {}", c.rhs.encode());
        }
        out.push_str("End\n");
        out
    }

    pub fn solve(&self) -> Result<LpOutcome<T>> {
        Tableau::build(self)?.run(self)
    }
}

struct Tableau<T> {
    rows: Vec<Vec<T>>,
    /// Reduced costs `c_j - c_B B^-1 A_j`; the last entry is minus the objective.
    cost: Vec<T>,
    basis: Vec<usize>,
    /// Column that was the identity for each original row (slack or artificial).
    unit_col: Vec<usize>,
    /// Original constraint behind each tableau row, and whether it was negated.
    origin: Vec<(usize, bool)>,
    first_artificial: usize,
    width: usize,
    pivots: usize,
}

fn chop<T: Scalar>(x: T) -> T {
    if !T::EXACT && x.abs().to_f64_lossy() < 1e-13 {
        T::zero()
    } else {
        x
    }
}

impl<T: Scalar> Tableau<T> {
    fn build(lp: &LinearProgram<T>) -> Result<Self> {
        let m = lp.constraints.len();
        let n = lp.num_vars;
        let mut slack_count = 0;
        let mut art_count = 0;
        let mut normalized = Vec::with_capacity(m);
        for c in &lp.constraints {
            let flip = c.rhs.is_negative();
            let relation = match (c.relation, flip) {
                (Relation::Le, true) => Relation::Ge,
                (Relation::Ge, true) => Relation::Le,
                (r, _) => r,
            };
            match relation {
                Relation::Le => slack_count += 1,
                Relation::Eq => art_count += 1,
                Relation::Ge => {
                    slack_count += 1;
                    art_count += 1;
                }
            }
            normalized.push((relation, flip));
        }
        let width = n + slack_count + art_count;
        let size = (m as u128 + 1) * (width as u128 + 1);
        if size > TABLEAU_BUDGET {
            return Err(Error::capacity("simplex tableau entries", size, TABLEAU_BUDGET));
        }
        let first_artificial = n + slack_count;
        let mut rows = Vec::with_capacity(m);
        let mut basis = Vec::with_capacity(m);
        let mut unit_col = Vec::with_capacity(m);
        let mut next_slack = n;
        let mut next_art = first_artificial;
        for (i, c) in lp.constraints.iter().enumerate() {
            let (relation, flip) = normalized[i];
            let mut row = vec![T::zero(); width + 1];
            for (j, a) in &c.coeffs {
                if *j >= n {
                    return Err(Error::internal(format!("constraint {i} references variable {j} of {n}")));
                }
                let a = if flip { -a.clone() } else { a.clone() };
                row[*j] = row[*j].clone() + a;
            }
            row[width] = if flip { -c.rhs.clone() } else { c.rhs.clone() };
            match relation {
                Relation::Le => {
                    row[next_slack] = T::one();
                    basis.push(next_slack);
                    unit_col.push(next_slack);
                    next_slack += 1;
                }
                Relation::Eq => {
                    row[next_art] = T::one();
                    basis.push(next_art);
                    unit_col.push(next_art);
                    next_art += 1;
                }
                Relation::Ge => {
                    row[next_slack] = -T::one();
                    next_slack += 1;
                    row[next_art] = T::one();
                    basis.push(next_art);
                    unit_col.push(next_art);
                    next_art += 1;
                }
            }
            rows.push(row);
        }
        Ok(Tableau {
            rows,
            cost: vec![T::zero(); width + 1],
            basis,
            unit_col,
            origin: normalized.iter().enumerate().map(|(i, (_, f))| (i, *f)).collect(),
            first_artificial,
            width,
            pivots: 0,
        })
    }

    /// Resets the cost row for objective `c` over the current basis.
    fn price(&mut self, c: &[T]) {
        let mut cost: Vec<T> = (0..=self.width).map(|j| if j < c.len() { c[j].clone() } else { T::zero() }).collect();
        for (i, &b) in self.basis.iter().enumerate() {
            let cb = if b < c.len() { c[b].clone() } else { T::zero() };
            if cb.is_zero() {
                continue;
            }
            for (j, a) in self.rows[i].iter().enumerate() {
                if !a.is_zero() {
                    cost[j] = cost[j].clone() - cb.clone() * a.clone();
                }
            }
        }
        self.cost = cost.into_iter().map(chop).collect();
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let pivot = self.rows[r][c].clone();
        let row: Vec<T> = self.rows[r].iter().map(|a| chop(a.clone() / pivot.clone())).collect();
        let nonzero: Vec<usize> = (0..=self.width).filter(|&j| !row[j].is_zero()).collect();
        for (i, other) in self.rows.iter_mut().enumerate() {
            if i == r || other[c].is_zero() {
                continue;
            }
            let factor = other[c].clone();
            for &j in &nonzero {
                other[j] = chop(other[j].clone() - factor.clone() * row[j].clone());
            }
            other[c] = T::zero();
        }
        if !self.cost[c].is_zero() {
            let factor = self.cost[c].clone();
            for &j in &nonzero {
                self.cost[j] = chop(self.cost[j].clone() - factor.clone() * row[j].clone());
            }
            self.cost[c] = T::zero();
        }
        self.rows[r] = row;
        self.basis[r] = c;
        self.pivots += 1;
    }

    /// Runs primal simplex on the current cost row. Columns `>= limit` never enter.
    fn optimize(&mut self, limit: usize) -> Result<bool> {
        let tol = T::tolerance();
        let ptol = T::pivot_tolerance();
        let max_pivots = 50 * (self.rows.len() + self.width) + 10_000;
        let mut degenerate = 0usize;
        loop {
            let bland = degenerate >= DEGENERATE_RUN;
            let mut enter: Option<usize> = None;
            for j in 0..limit {
                if self.cost[j] > tol {
                    match enter {
                        None => enter = Some(j),
                        Some(e) if !bland && self.cost[j] > self.cost[e] => enter = Some(j),
                        _ => {}
                    }
                    if bland {
                        break;
                    }
                }
            }
            let Some(c) = enter else { return Ok(true) };
            let mut leave: Option<(usize, T)> = None;
            for (i, row) in self.rows.iter().enumerate() {
                if row[c] > ptol {
                    let ratio = row[self.width].clone() / row[c].clone();
                    leave = match leave {
                        None => Some((i, ratio)),
                        Some((li, lr)) => {
                            let slack = if T::EXACT {
                                T::zero()
                            } else {
                                tol.clone() * (T::one() + lr.abs())
                            };
                            if ratio < lr.clone() - slack.clone() {
                                Some((i, ratio))
                            } else if ratio <= lr.clone() + slack && self.basis[i] < self.basis[li] {
                                Some((i, ratio))
                            } else {
                                Some((li, lr))
                            }
                        }
                    };
                }
            }
            let Some((r, ratio)) = leave else { return Ok(false) };
            if ratio.abs() <= tol {
                degenerate += 1;
            } else {
                degenerate = 0;
            }
            self.pivot(r, c);
            if self.pivots > max_pivots {
                return Err(Error::internal(format!("simplex exceeded {max_pivots} pivots")));
            }
        }
    }

    fn run(mut self, lp: &LinearProgram<T>) -> Result<LpOutcome<T>> {
        let n = lp.num_vars;
        let feas_tol = if T::EXACT { T::zero() } else { T::from_f64_lossy(1e-9) };
        if self.first_artificial < self.width {
            let phase1: Vec<T> = (0..self.width)
                .map(|j| if j >= self.first_artificial { -T::one() } else { T::zero() })
                .collect();
            self.price(&phase1);
            self.optimize(self.width)?;
            let infeasibility = self.cost[self.width].clone();
            if infeasibility > feas_tol {
                return Ok(LpOutcome::Infeasible);
            }
            self.drive_out_artificials();
        }
        let mut phase2 = lp.objective.clone();
        phase2.resize(self.width, T::zero());
        self.price(&phase2);
        if !self.optimize(self.first_artificial)? {
            return Ok(LpOutcome::Unbounded);
        }
        let mut x = vec![T::zero(); n];
        for (i, &b) in self.basis.iter().enumerate() {
            if b < n {
                x[b] = self.rows[i][self.width].clone();
            }
        }
        let objective = x
            .iter()
            .zip(&lp.objective)
            .fold(T::zero(), |acc, (xi, ci)| acc + xi.clone() * ci.clone());
        let mut duals = vec![T::zero(); lp.constraints.len()];
        for (row, &(orig, flip)) in self.origin.iter().enumerate() {
            let y = -self.cost[self.unit_col[row]].clone();
            duals[orig] = if flip { -y } else { y };
        }
        Ok(LpOutcome::Optimal(LpOptimum { x, objective, duals, pivots: self.pivots }))
    }

    /// Pivots basic artificials (at value zero) out of the basis; drops rows
    /// that turn out to be redundant.
    fn drive_out_artificials(&mut self) {
        let ptol = T::pivot_tolerance();
        let mut r = 0;
        while r < self.rows.len() {
            if self.basis[r] >= self.first_artificial {
                let col = (0..self.first_artificial).find(|&j| self.rows[r][j].abs() > ptol);
                match col {
                    Some(c) => self.pivot(r, c),
                    None => {
                        self.rows.remove(r);
                        self.basis.remove(r);
                        self.unit_col.remove(r);
                        self.origin.remove(r);
                        continue;
                    }
                }
            }
            r += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::BigRational;

    type Q = BigRational;

    fn q(a: i64, b: i64) -> Q {
        Q::new(a.into(), b.into())
    }

    fn optimum<T: Scalar>(lp: &LinearProgram<T>) -> LpOptimum<T> {
        match lp.solve().unwrap() {
            LpOutcome::Optimal(o) => o,
            other => panic!("expected optimum, got {other:?}"),
        }
    }

    #[test]
    fn textbook_maximum() {
        // max 3x + 5y, x <= 4, 2y <= 12, 3x + 2y <= 18 -> (2, 6), 36
        let mut lp = LinearProgram::<Q>::new(2);
        lp.objective = vec![q(3, 1), q(5, 1)];
        lp.add(vec![(0, q(1, 1))], Relation::Le, q(4, 1));
        lp.add(vec![(1, q(2, 1))], Relation::Le, q(12, 1));
        lp.add(vec![(0, q(3, 1)), (1, q(2, 1))], Relation::Le, q(18, 1));
        let o = optimum(&lp);
        assert_eq!(o.x, vec![q(2, 1), q(6, 1)]);
        assert_eq!(o.objective, q(36, 1));
        assert_eq!(lp.dual_objective(&o.duals), q(36, 1));
        assert_eq!(o.duals, vec![q(0, 1), q(3, 2), q(1, 1)]);
    }

    #[test]
    fn equalities_and_negative_rhs() {
        // max -x - y, x + y = 2, x - y >= -1, x >= 0.5 -> x = 0.5 is feasible? y = 1.5, x - y = -1 ok
        let mut lp = LinearProgram::<f64>::new(2);
        lp.objective = vec![-1.0, -2.0];
        lp.add(vec![(0, 1.0), (1, 1.0)], Relation::Eq, 2.0);
        lp.add(vec![(0, 1.0), (1, -1.0)], Relation::Ge, -1.0);
        lp.add(vec![(0, 1.0)], Relation::Ge, 0.5);
        let o = optimum(&lp);
        assert!((o.x[0] - 2.0).abs() < 1e-12 && o.x[1].abs() < 1e-12);
        assert!((o.objective + 2.0).abs() < 1e-12);
        assert!((lp.dual_objective(&o.duals) - o.objective).abs() < 1e-12);
    }

    #[test]
    fn infeasible_and_unbounded() {
        let mut lp = LinearProgram::<Q>::new(1);
        lp.add(vec![(0, q(1, 1))], Relation::Le, q(1, 1));
        lp.add(vec![(0, q(1, 1))], Relation::Ge, q(2, 1));
        assert_eq!(lp.solve().unwrap(), LpOutcome::Infeasible);
        let mut lp = LinearProgram::<Q>::new(2);
        lp.objective = vec![q(1, 1), q(0, 1)];
        lp.add(vec![(0, q(1, 1)), (1, q(-1, 1))], Relation::Le, q(1, 1));
        assert_eq!(lp.solve().unwrap(), LpOutcome::Unbounded);
    }

    #[test]
    fn redundant_equalities_are_dropped() {
        let mut lp = LinearProgram::<Q>::new(2);
        lp.objective = vec![q(1, 1), q(2, 1)];
        lp.add(vec![(0, q(1, 1)), (1, q(1, 1))], Relation::Eq, q(1, 1));
        lp.add(vec![(0, q(2, 1)), (1, q(2, 1))], Relation::Eq, q(2, 1));
        let o = optimum(&lp);
        assert_eq!(o.objective, q(2, 1));
        assert_eq!(lp.dual_objective(&o.duals), q(2, 1));
    }

    #[test]
    fn degenerate_cycling_example_terminates() {
        // Beale's example cycles under naive Dantzig pivoting
        let mut lp = LinearProgram::<Q>::new(4);
        lp.objective = vec![q(3, 4), q(-150, 1), q(1, 50), q(-6, 1)];
        lp.add(vec![(0, q(1, 4)), (1, q(-60, 1)), (2, q(-1, 25)), (3, q(9, 1))], Relation::Le, q(0, 1));
        lp.add(vec![(0, q(1, 2)), (1, q(-90, 1)), (2, q(-1, 50)), (3, q(3, 1))], Relation::Le, q(0, 1));
        lp.add(vec![(2, q(1, 1))], Relation::Le, q(1, 1));
        let o = optimum(&lp);
        assert_eq!(o.objective, q(1, 20));
    }

    #[test]
    fn lp_text_format() {
        let mut lp = LinearProgram::<Q>::new(2);
        lp.objective = vec![q(1, 2), q(-1, 1)];
        lp.add(vec![(0, q(1, 1)), (1, q(1, 1))], Relation::Eq, q(1, 1));
        let text = lp.to_lp_text(&|j| format!("x{j}"));
        assert_eq!(text, "Maximize\n obj: 1/2 x0 - 1 x1\nSubject To\n c0: 1 x0 + 1 x1 = 1\nEnd\n");
    }
}
