//! Independent exact cross-check of the oracle.
//!
//! Shares no code with the main solver: free payments are split into
//! positive and negative parts, IR is an explicit row, incentive rows are
//! written directly in payment form, and the tableau runs Bland's rule in
//! exact rational arithmetic.

use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::lp_oracle::oracle::{IcMode, OracleProblem};
use crate::scalar::{decimal_rational, Scalar};

pub const BRUTE_FORCE_PROFILES: usize = 16;
pub const BRUTE_FORCE_OUTCOMES: usize = 16;

type Q = BigRational;

/// Optimal objective of the problem, computed exactly.
pub fn brute_force_optimal<T: Scalar>(problem: &OracleProblem<'_, T>) -> Result<Q> {
    let prior = problem.prior;
    let profiles: Vec<(Vec<u32>, Q)> = prior.profiles().into_iter().map(|(v, p)| (v, p.to_rational())).collect();
    let outcomes = problem.space.len();
    if profiles.len() > BRUTE_FORCE_PROFILES || outcomes > BRUTE_FORCE_OUTCOMES {
        return Err(Error::usage(format!(
            "brute force handles at most {BRUTE_FORCE_PROFILES} profiles and {BRUTE_FORCE_OUTCOMES} outcomes, got {} and {outcomes}",
            profiles.len()
        )));
    }
    let (n, m) = (prior.n(), prior.m());
    let grid = prior.grid();
    let value = |i: usize, t: &[u32], o: usize| -> Q { problem.model.value_at_grid::<Q>(problem.space, grid, i, t, o) };
    let index_of = |v: &[u32]| profiles.iter().position(|(p, _)| p == v);

    // columns: x[r][o], then p+[r][i], then p-[r][i]
    let nr = profiles.len();
    let x = |r: usize, o: usize| r * outcomes + o;
    let pp = |r: usize, i: usize| nr * outcomes + r * n + i;
    let pm = |r: usize, i: usize| nr * outcomes + nr * n + r * n + i;
    let cols = nr * outcomes + 2 * nr * n;

    let mut eq_rows: Vec<Vec<Q>> = Vec::new();
    let mut ge_rows: Vec<(Vec<Q>, Q)> = Vec::new();
    for r in 0..nr {
        let mut row = vec![Q::zero(); cols];
        for o in 0..outcomes {
            row[x(r, o)] = Q::one();
        }
        eq_rows.push(row);
    }
    // utility of bidder k with true type t at profile r: sum_o x v_k(t,o) - p+ + p-
    let add_utility = |row: &mut Vec<Q>, r: usize, k: usize, t: &[u32], w: &Q| {
        for o in 0..outcomes {
            row[x(r, o)] += w * value(k, t, o);
        }
        row[pp(r, k)] -= w;
        row[pm(r, k)] += w;
    };
    for r in 0..nr {
        for k in 0..n {
            let own = &profiles[r].0[k * m..(k + 1) * m];
            let mut row = vec![Q::zero(); cols];
            add_utility(&mut row, r, k, own, &Q::one());
            ge_rows.push((row, Q::zero()));
        }
    }
    let types_of = |k: usize| -> Vec<Vec<u32>> {
        let mut seen: Vec<Vec<u32>> = Vec::new();
        for (v, _) in &profiles {
            let t = v[k * m..(k + 1) * m].to_vec();
            if !seen.contains(&t) {
                seen.push(t);
            }
        }
        seen
    };
    match problem.mode {
        IcMode::Bic => {
            for k in 0..n {
                for t in types_of(k) {
                    for d in types_of(k) {
                        if t == d {
                            continue;
                        }
                        let mut row = vec![Q::zero(); cols];
                        for (r, (v, p)) in profiles.iter().enumerate() {
                            if v[k * m..(k + 1) * m] != t[..] {
                                continue;
                            }
                            let p_rest = p / marginal_prob(problem, k, &t);
                            let mut lie = v.clone();
                            lie[k * m..(k + 1) * m].copy_from_slice(&d);
                            let r_lie = index_of(&lie).expect("product support");
                            add_utility(&mut row, r, k, &t, &p_rest);
                            add_utility(&mut row, r_lie, k, &t, &-p_rest.clone());
                        }
                        ge_rows.push((row, Q::zero()));
                    }
                }
            }
        }
        IcMode::DsicSlack(eta) => {
            let eta = decimal_rational(eta);
            for (r, (v, _)) in profiles.iter().enumerate() {
                for k in 0..n {
                    let t = v[k * m..(k + 1) * m].to_vec();
                    for d in types_of(k) {
                        if d == t {
                            continue;
                        }
                        let mut lie = v.clone();
                        lie[k * m..(k + 1) * m].copy_from_slice(&d);
                        let r_lie = index_of(&lie).expect("product support");
                        let mut row = vec![Q::zero(); cols];
                        add_utility(&mut row, r, k, &t, &Q::one());
                        add_utility(&mut row, r_lie, k, &t, &-Q::one());
                        ge_rows.push((row, -eta.clone()));
                    }
                }
            }
        }
    }
    let mut objective = vec![Q::zero(); cols];
    for (r, (_, p)) in profiles.iter().enumerate() {
        for i in 0..n {
            objective[pp(r, i)] = p.clone();
            objective[pm(r, i)] = -p.clone();
        }
    }
    bland_maximize(cols, &objective, &eq_rows, &ge_rows)
}

fn marginal_prob<T: Scalar>(problem: &OracleProblem<'_, T>, k: usize, t: &[u32]) -> Q {
    t.iter()
        .enumerate()
        .fold(Q::one(), |acc, (j, &g)| acc * problem.prior.marginal(k, j).mass(g).to_rational())
}

/// `max c.x` s.t. `E x = 1` (each row), `G x >= h`, `x >= 0`; exact Bland simplex.
fn bland_maximize(cols: usize, c: &[Q], eq_rows: &[Vec<Q>], ge_rows: &[(Vec<Q>, Q)]) -> Result<Q> {
    // every G row is rewritten as -G x + s = -h with h <= 0, so slacks start basic;
    // each equality row gets an artificial variable
    let n_ge = ge_rows.len();
    let n_eq = eq_rows.len();
    let width = cols + n_ge + n_eq;
    let mut t: Vec<Vec<Q>> = Vec::with_capacity(n_ge + n_eq);
    let mut basis = Vec::with_capacity(n_ge + n_eq);
    for (k, (row, h)) in ge_rows.iter().enumerate() {
        if h.is_positive() {
            return Err(Error::internal("brute force expects nonpositive lower bounds"));
        }
        let mut r: Vec<Q> = row.iter().map(|a| -a).collect();
        r.resize(width + 1, Q::zero());
        r[cols + k] = Q::one();
        r[width] = -h.clone();
        t.push(r);
        basis.push(cols + k);
    }
    for (k, row) in eq_rows.iter().enumerate() {
        let mut r = row.clone();
        r.resize(width + 1, Q::zero());
        r[cols + n_ge + k] = Q::one();
        r[width] = Q::one();
        t.push(r);
        basis.push(cols + n_ge + k);
    }
    // phase one: maximize -sum(artificials)
    let mut phase1 = vec![Q::zero(); width];
    for k in 0..n_eq {
        phase1[cols + n_ge + k] = -Q::one();
    }
    run_bland(&mut t, &mut basis, &phase1, width, width)?;
    let artificial_sum: Q = basis
        .iter()
        .enumerate()
        .filter(|(_, &b)| b >= cols + n_ge)
        .map(|(i, _)| t[i][width].clone())
        .fold(Q::zero(), |a, b| a + b);
    if !artificial_sum.is_zero() {
        return Err(Error::internal("brute force LP infeasible"));
    }
    // replace basic artificials (all at zero) where possible
    for i in 0..t.len() {
        if basis[i] >= cols + n_ge {
            if let Some(j) = (0..cols + n_ge).find(|&j| !t[i][j].is_zero()) {
                pivot(&mut t, &mut basis, i, j, width);
            }
        }
    }
    let mut phase2 = c.to_vec();
    phase2.resize(width, Q::zero());
    run_bland(&mut t, &mut basis, &phase2, width, cols + n_ge)?;
    let mut value = Q::zero();
    for (i, &b) in basis.iter().enumerate() {
        if b < width {
            value += &phase2[b] * &t[i][width];
        }
    }
    Ok(value)
}

fn pivot(t: &mut [Vec<Q>], basis: &mut [usize], r: usize, c: usize, width: usize) {
    let p = t[r][c].clone();
    for j in 0..=width {
        t[r][j] = &t[r][j] / &p;
    }
    for i in 0..t.len() {
        if i != r && !t[i][c].is_zero() {
            let f = t[i][c].clone();
            for j in 0..=width {
                let delta = &f * &t[r][j];
                t[i][j] -= delta;
            }
        }
    }
    basis[r] = c;
}

/// Bland's rule: lowest-index improving column, lowest-index basic variable on ratio ties.
fn run_bland(t: &mut [Vec<Q>], basis: &mut [usize], c: &[Q], width: usize, limit: usize) -> Result<()> {
    loop {
        // reduced cost of column j: c_j - sum_i c_{B_i} t[i][j]
        let reduced = |j: usize, t: &[Vec<Q>], basis: &[usize]| -> Q {
            let mut d = c[j].clone();
            for (i, &b) in basis.iter().enumerate() {
                if !c[b].is_zero() && !t[i][j].is_zero() {
                    d -= &c[b] * &t[i][j];
                }
            }
            d
        };
        let Some(col) = (0..limit).find(|&j| !basis.contains(&j) && reduced(j, t, basis).is_positive()) else {
            return Ok(());
        };
        let mut best: Option<(usize, Q)> = None;
        for i in 0..t.len() {
            if t[i][col].is_positive() {
                let ratio = &t[i][width] / &t[i][col];
                let take = match &best {
                    None => true,
                    Some((bi, br)) => ratio < *br || (ratio == *br && basis[i] < basis[*bi]),
                };
                if take {
                    best = Some((i, ratio));
                }
            }
        }
        let Some((row, _)) = best else {
            return Err(Error::internal("brute force LP unbounded"));
        };
        pivot(t, basis, row, col, width);
    }
}
