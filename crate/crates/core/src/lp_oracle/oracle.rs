use crate::error::{Error, Result};
use crate::grid_prior::{Domain, ProductPrior};
use crate::lp_oracle::simplex::{LinearProgram, LpOutcome, Relation};
use crate::mechanism_core::{regret_report_on_domain, revenue, LotteryEntry, MechanismTable};
use crate::scalar::Scalar;
use crate::valuation_outcome::{BidderValues, OutcomeSpace, ValuationModel};

/// Largest LP (in variables) the oracle will build.
pub const VARIABLE_BUDGET: u128 = 500_000;

/// Constraint audit slack for floating-point solves.
pub const AUDIT_TOLERANCE: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum IcMode {
    /// Interim incentive constraints, exact.
    Bic,
    /// Ex-post incentive constraints relaxed by `eta`.
    DsicSlack(f64),
}

impl IcMode {
    pub fn name(&self) -> String {
        match self {
            IcMode::Bic => "bic".into(),
            IcMode::DsicSlack(eta) => format!("dsic_slack({eta})"),
        }
    }
}

/// Revenue maximization over IR mechanisms on the support of a finite product prior.
#[derive(Clone, Debug)]
pub struct OracleProblem<'a, T> {
    pub prior: &'a ProductPrior<T>,
    pub space: &'a OutcomeSpace,
    pub model: &'a ValuationModel,
    pub mode: IcMode,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolverStatus {
    Optimal,
    Infeasible,
    BudgetExceeded,
}

#[derive(Clone, Debug)]
pub struct LpSolution<T> {
    /// Mechanism over the product of the prior's supports.
    pub mechanism: MechanismTable<T>,
    pub objective_value: T,
    pub status: SolverStatus,
    /// Dual objective value at the reported optimum.
    pub certificate: T,
    pub pivots: usize,
}

/// Variable layout of the profile-form LP.
///
/// `x[r][o]` is the probability of outcome `o` at support profile `r`;
/// `q[r][i]` is bidder `i`'s ex-post utility there, so IR is `q >= 0` and the
/// payment is recovered as `sum_o x[r][o] v_i(r, o) - q[r][i]`.
pub(crate) struct Layout {
    pub rows: usize,
    pub outcomes: usize,
    pub n: usize,
}

impl Layout {
    pub fn x(&self, r: usize, o: usize) -> usize {
        r * self.outcomes + o
    }

    pub fn q(&self, r: usize, i: usize) -> usize {
        self.rows * self.outcomes + r * self.n + i
    }

    pub fn len(&self) -> usize {
        self.rows * (self.outcomes + self.n)
    }
}

impl<'a, T: Scalar> OracleProblem<'a, T> {
    pub fn new(prior: &'a ProductPrior<T>, space: &'a OutcomeSpace, model: &'a ValuationModel, mode: IcMode) -> Result<Self> {
        if space.n() != prior.n() {
            return Err(Error::usage(format!("outcome space has {} bidders, prior has {}", space.n(), prior.n())));
        }
        model.check_compatible(space, prior.m())?;
        if let IcMode::DsicSlack(eta) = mode {
            if !(eta >= 0.0 && eta.is_finite()) {
                return Err(Error::usage(format!("DSIC slack must be finite and >= 0, got {eta}")));
            }
        }
        Ok(OracleProblem { prior, space, model, mode })
    }

    pub fn domain(&self) -> Domain {
        self.prior.support_domain()
    }

    pub fn variable_count(&self) -> u128 {
        self.prior.profile_count() * (self.space.len() as u128 + self.prior.n() as u128)
    }

    fn check_budget(&self) -> Result<()> {
        let vars = self.variable_count();
        if vars > VARIABLE_BUDGET {
            return Err(Error::capacity(
                "oracle LP variables (use smaller supports or fewer outcomes)",
                vars,
                VARIABLE_BUDGET,
            ));
        }
        Ok(())
    }

    /// The profile-form LP and its variable layout.
    pub(crate) fn build(&self) -> Result<(LinearProgram<T>, Layout)> {
        self.check_budget()?;
        let prior = self.prior;
        let (n, m) = (prior.n(), prior.m());
        let domain = self.domain();
        let grid = prior.grid();
        let layout = Layout { rows: domain.profile_count(), outcomes: self.space.len(), n };
        let values: Vec<BidderValues<T>> =
            (0..n).map(|i| BidderValues::new(self.model, self.space, grid, &domain, i)).collect();
        let mut lp = LinearProgram::new(layout.len());

        for r in 0..layout.rows {
            let profile = domain.profile_at(r);
            let pr = prior.profile_prob(&profile);
            let types: Vec<usize> = (0..n)
                .map(|i| domain.bidder_type_index(i, &profile[i * m..(i + 1) * m]).expect("in domain"))
                .collect();
            for o in 0..layout.outcomes {
                let welfare = (0..n).fold(T::zero(), |acc, i| acc + values[i].get(types[i], o).clone());
                lp.objective[layout.x(r, o)] = pr.clone() * welfare;
            }
            for i in 0..n {
                lp.objective[layout.q(r, i)] = -pr.clone();
            }
            lp.add((0..layout.outcomes).map(|o| (layout.x(r, o), T::one())).collect(), Relation::Eq, T::one());
        }

        // deviation rows: x at the misreported profile valued at the true type,
        // minus the misreporter's own utility there, minus truthful utility
        let deviation = |coeffs: &mut Vec<(usize, T)>, weight: &T, k: usize, t: usize, r_true: usize, r_dev: usize, t_dev: usize| {
            for o in 0..layout.outcomes {
                let diff = values[k].get(t, o).clone() - values[k].get(t_dev, o).clone();
                if !diff.is_zero() {
                    coeffs.push((layout.x(r_dev, o), weight.clone() * diff));
                }
            }
            coeffs.push((layout.q(r_dev, k), weight.clone()));
            coeffs.push((layout.q(r_true, k), -weight.clone()));
        };
        match self.mode {
            IcMode::Bic => {
                for k in 0..n {
                    let types = domain.bidder_types(k);
                    let others = prior.others_profiles(k);
                    for (t, tv) in types.iter().enumerate() {
                        for (t_dev, dv) in types.iter().enumerate() {
                            if t == t_dev {
                                continue;
                            }
                            let mut coeffs = Vec::new();
                            for (rest, p_rest) in &others {
                                let mut truthful = rest.clone();
                                truthful[k * m..(k + 1) * m].copy_from_slice(tv);
                                let mut lie = rest.clone();
                                lie[k * m..(k + 1) * m].copy_from_slice(dv);
                                let r_true = domain.row_index(&truthful).expect("support");
                                let r_dev = domain.row_index(&lie).expect("support");
                                deviation(&mut coeffs, p_rest, k, t, r_true, r_dev, t_dev);
                            }
                            lp.add(merge(coeffs), Relation::Le, T::zero());
                        }
                    }
                }
            }
            IcMode::DsicSlack(eta) => {
                let eta = T::from_f64_lossy(eta);
                for r in 0..layout.rows {
                    let profile = domain.profile_at(r);
                    for k in 0..n {
                        let own = &profile[k * m..(k + 1) * m];
                        let t = domain.bidder_type_index(k, own).expect("in domain");
                        for (t_dev, dv) in domain.bidder_types(k).iter().enumerate() {
                            if t == t_dev {
                                continue;
                            }
                            let mut lie = profile.clone();
                            lie[k * m..(k + 1) * m].copy_from_slice(dv);
                            let r_dev = domain.row_index(&lie).expect("support");
                            let mut coeffs = Vec::new();
                            deviation(&mut coeffs, &T::one(), k, t, r, r_dev, t_dev);
                            lp.add(coeffs, Relation::Le, eta.clone());
                        }
                    }
                }
            }
        }
        Ok((lp, layout))
    }

    /// CPLEX LP text of the oracle program.
    pub fn lp_text(&self) -> Result<String> {
        let (lp, layout) = self.build()?;
        let domain = self.domain();
        let x_len = layout.rows * layout.outcomes;
        let name = |j: usize| {
            if j < x_len {
                format!("x_{}_{}", j / layout.outcomes, j % layout.outcomes)
            } else {
                let k = j - x_len;
                format!("q_{}_{}", k / layout.n, k % layout.n)
            }
        };
        let mut text = format!(
            "\\ profile-form revenue LP, mode {}, {} profiles, {} outcomes\n\\ profile r is row r of domain {:?}\n",
            self.mode.name(),
            layout.rows,
            layout.outcomes,
            domain.coords()
        );
        text.push_str(&lp.to_lp_text(&name));
        Ok(text)
    }
}

/// Sums duplicate variable entries so each variable appears once, in index order.
fn merge<T: Scalar>(mut coeffs: Vec<(usize, T)>) -> Vec<(usize, T)> {
    coeffs.sort_by_key(|(j, _)| *j);
    let mut out: Vec<(usize, T)> = Vec::with_capacity(coeffs.len());
    for (j, a) in coeffs {
        match out.last_mut() {
            Some((lj, la)) if *lj == j => *la = la.clone() + a,
            _ => out.push((j, a)),
        }
    }
    out.retain(|(_, a)| !a.is_zero());
    out
}

/// Exactly optimal mechanism on the prior's support (deterministic pivoting).
pub fn solve_optimal<T: Scalar>(problem: &OracleProblem<'_, T>) -> Result<LpSolution<T>> {
    let (lp, layout) = problem.build()?;
    let optimum = match lp.solve()? {
        LpOutcome::Optimal(o) => o,
        LpOutcome::Infeasible => {
            return Err(Error::internal("oracle LP reported infeasible, but the zero mechanism is feasible"))
        }
        LpOutcome::Unbounded => return Err(Error::internal("oracle LP reported unbounded, but IR bounds revenue")),
    };
    let prior = problem.prior;
    let (n, m) = (prior.n(), prior.m());
    let domain = problem.domain();
    let grid = prior.grid();
    let values: Vec<BidderValues<T>> =
        (0..n).map(|i| BidderValues::new(problem.model, problem.space, grid, &domain, i)).collect();
    let floor = if T::EXACT { T::zero() } else { T::from_f64_lossy(1e-12) };
    let mut rows = Vec::with_capacity(layout.rows);
    for r in 0..layout.rows {
        let profile = domain.profile_at(r);
        let mut probs: Vec<(usize, T)> = (0..layout.outcomes)
            .map(|o| (o, optimum.x[layout.x(r, o)].clone()))
            .filter(|(_, p)| *p > floor)
            .collect();
        if !T::EXACT {
            let total = probs.iter().fold(T::zero(), |acc, (_, p)| acc + p.clone());
            for (_, p) in probs.iter_mut() {
                *p = p.clone() / total.clone();
            }
        }
        let payments: Vec<T> = (0..n)
            .map(|i| {
                let t = domain.bidder_type_index(i, &profile[i * m..(i + 1) * m]).expect("in domain");
                let value = probs
                    .iter()
                    .fold(T::zero(), |acc, (o, p)| acc + p.clone() * values[i].get(t, *o).clone());
                value - optimum.x[layout.q(r, i)].clone()
            })
            .collect();
        rows.push(
            probs
                .into_iter()
                .map(|(outcome, prob)| LotteryEntry { prob, outcome, payments: payments.clone() })
                .collect(),
        );
    }
    let mechanism = MechanismTable::new(*grid, domain, problem.space, rows)?;
    let certificate = lp.dual_objective(&optimum.duals);
    let solution = LpSolution {
        objective_value: optimum.objective,
        mechanism,
        status: SolverStatus::Optimal,
        certificate,
        pivots: optimum.pivots,
    };
    audit(problem, &solution)?;
    Ok(solution)
}

/// Post-hoc check of the declared solution invariants.
fn audit<T: Scalar>(problem: &OracleProblem<'_, T>, solution: &LpSolution<T>) -> Result<()> {
    let tol = AUDIT_TOLERANCE;
    let primal = solution.objective_value.to_f64_lossy();
    let dual = solution.certificate.to_f64_lossy();
    if (primal - dual).abs() > 1e-7 * (1.0 + primal.abs()) {
        return Err(Error::internal(format!("duality gap: primal {primal}, dual {dual}")));
    }
    let report = regret_report_on_domain(&solution.mechanism, problem.prior, problem.model, problem.space)?;
    if report.ir_slack.to_f64_lossy() < -tol {
        return Err(Error::internal(format!("oracle mechanism violates IR by {}", report.ir_slack)));
    }
    let ic = match problem.mode {
        IcMode::Bic => report.bic_regret.to_f64_lossy(),
        IcMode::DsicSlack(eta) => report.dsic_regret.to_f64_lossy() - eta,
    };
    if ic > tol {
        return Err(Error::internal(format!("oracle mechanism violates {} by {ic}", problem.mode.name())));
    }
    let recomputed = revenue(&solution.mechanism, problem.prior)?.to_f64_lossy();
    if (recomputed - primal).abs() > tol * (1.0 + primal.abs()) {
        return Err(Error::internal(format!("objective {primal} but mechanism revenue {recomputed}")));
    }
    Ok(())
}
