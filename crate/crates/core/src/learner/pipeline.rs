use num_rational::BigRational;
use num_traits::Zero;

use crate::error::{Error, Result};
use crate::grid_prior::{Domain, GridSpec, ProductPrior, Radix, SampleSet, TruePrior};
use crate::lp_oracle::{extend_bic, extend_dsic, solve_optimal, IcMode, OracleProblem};
use crate::mechanism_core::{regret_report, regret_report_on_support, Lottery, MechanismTable, RegretReport};
use crate::scalar::Scalar;
use crate::valuation_outcome::{check_weakly_downward_closed, OutcomeSpace, ValuationModel};

/// Tolerance added to the proven regret bounds in audits.
pub const AUDIT_SLACK: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LearnMode {
    Bic,
    Dsic,
    SingleParameter,
    SingleBidderIc,
}

impl LearnMode {
    pub fn name(self) -> &'static str {
        match self {
            LearnMode::Bic => "bic",
            LearnMode::Dsic => "dsic",
            LearnMode::SingleParameter => "single_parameter",
            LearnMode::SingleBidderIc => "single_bidder_ic",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        [LearnMode::Bic, LearnMode::Dsic, LearnMode::SingleParameter, LearnMode::SingleBidderIc]
            .into_iter()
            .find(|m| m.name() == name)
    }
}

/// A full-grid mechanism that accepts real bids by rounding them down.
#[derive(Clone, Debug, PartialEq)]
pub struct LearnedMechanism<T> {
    inner: MechanismTable<T>,
    mode: LearnMode,
    objective: Option<T>,
}

impl<T: Scalar> LearnedMechanism<T> {
    pub fn new(inner: MechanismTable<T>, mode: LearnMode, objective: Option<T>) -> Result<Self> {
        if !inner.is_full() {
            return Err(Error::usage("learned mechanisms must cover the full grid"));
        }
        Ok(LearnedMechanism { inner, mode, objective })
    }

    pub fn inner(&self) -> &MechanismTable<T> {
        &self.inner
    }

    pub fn into_inner(self) -> MechanismTable<T> {
        self.inner
    }

    pub fn grid(&self) -> &GridSpec {
        self.inner.grid()
    }

    pub fn mode(&self) -> LearnMode {
        self.mode
    }

    /// Oracle objective on the empirical prior, when an oracle was used.
    pub fn objective(&self) -> Option<&T> {
        self.objective.as_ref()
    }

    /// Grid profile of a real bid vector.
    pub fn round_bids(&self, bids: &[f64]) -> Result<Vec<u32>> {
        let expected = self.inner.n() * self.inner.m();
        if bids.len() != expected {
            return Err(Error::usage(format!("expected {expected} bids, got {}", bids.len())));
        }
        bids.iter().map(|&b| self.grid().round_down(b).map(|g| g.0)).collect()
    }
}

/// Outcome lottery for real bids: each bid is rounded down to the grid.
pub fn evaluate_on_reals<'a, T: Scalar>(mech: &'a LearnedMechanism<T>, bids: &[f64]) -> Result<&'a Lottery<T>> {
    let profile = mech.round_bids(bids)?;
    Ok(mech.inner.lottery(&profile).expect("full grid"))
}

fn empirical<T: Scalar>(samples: &SampleSet, grid: &GridSpec) -> Result<ProductPrior<T>> {
    samples.check_range(grid.h())?;
    samples.empirical_prior(grid)
}

/// BIC pipeline: empirical prior on the grid, optimal BIC mechanism for it,
/// best-response extension to every grid profile.
pub fn learn_bic<T: Scalar>(
    samples: &SampleSet,
    grid: &GridSpec,
    space: &OutcomeSpace,
    model: &ValuationModel,
) -> Result<LearnedMechanism<T>> {
    let prior = empirical::<T>(samples, grid)?;
    let solution = solve_optimal(&OracleProblem::new(&prior, space, model, IcMode::Bic)?)?;
    let full = extend_bic(&solution.mechanism, &prior, model, space)?;
    LearnedMechanism::new(full, LearnMode::Bic, Some(solution.objective_value))
}

/// DSIC pipeline: requires a weakly downward closed space, solves with
/// `2 m eps` ex-post slack and zeroes out off-support profiles.
pub fn learn_dsic<T: Scalar>(
    samples: &SampleSet,
    grid: &GridSpec,
    space: &OutcomeSpace,
    model: &ValuationModel,
) -> Result<LearnedMechanism<T>> {
    let m = samples.m();
    let closure = check_weakly_downward_closed(space, model, grid, m);
    if let Some((x, k)) = closure.counterexample() {
        return Err(Error::Precondition(format!(
            "outcome space is not weakly downward closed: outcome {x} has no zeroed-out counterpart for bidder {k}"
        )));
    }
    let prior = empirical::<T>(samples, grid)?;
    let slack = 2.0 * m as f64 * grid.epsilon();
    let solution = solve_optimal(&OracleProblem::new(&prior, space, model, IcMode::DsicSlack(slack))?)?;
    let full = extend_dsic(&solution.mechanism, space, model, &closure)?;
    let report = regret_report(&full, &prior, model, space)?;
    let bound = 4.0 * m as f64 * grid.epsilon() + AUDIT_SLACK;
    if report.dsic_regret.to_f64_lossy() > bound || report.ir_slack.to_f64_lossy() < -AUDIT_SLACK {
        return Err(Error::internal(format!(
            "DSIC audit failed: regret {} (bound {bound}), IR slack {}",
            report.dsic_regret, report.ir_slack
        )));
    }
    LearnedMechanism::new(full, LearnMode::Dsic, Some(solution.objective_value))
}

/// Result of checking a learned mechanism against a reference grid prior.
#[derive(Clone, Debug)]
pub struct BoundAudit<T> {
    pub report: RegretReport<T>,
    pub bound: f64,
    pub within: bool,
}

/// Grid regret of the types a reference prior can produce, compared with
/// `2 m eps` (BIC) or `4 m eps` (DSIC). A miss is logged, not raised: the
/// bound only holds on the concentration event.
pub fn audit_against<T: Scalar>(
    mech: &LearnedMechanism<T>,
    prior: &ProductPrior<T>,
    model: &ValuationModel,
    space: &OutcomeSpace,
) -> Result<BoundAudit<T>> {
    let report = regret_report_on_support(mech.inner(), prior, model, space)?;
    let eps_m = mech.inner().m() as f64 * mech.grid().epsilon();
    let (bound, regret) = match mech.mode() {
        LearnMode::Dsic => (4.0 * eps_m, report.dsic_regret.to_f64_lossy()),
        LearnMode::Bic => (2.0 * eps_m, report.bic_regret.to_f64_lossy()),
        _ => (0.0, report.bic_regret.to_f64_lossy()),
    };
    let within = regret <= bound + AUDIT_SLACK && report.ir_slack.to_f64_lossy() >= -AUDIT_SLACK;
    if !within {
        log::warn!(
            "{} regret {regret} exceeds {bound} or IR slack {} is negative",
            mech.mode().name(),
            report.ir_slack
        );
    }
    Ok(BoundAudit { report, bound, within })
}

/// Exact revenue of real-bid evaluation under a discrete true prior.
pub fn revenue_on_true_prior<T: Scalar>(mech: &LearnedMechanism<T>, truth: &TruePrior) -> Result<BigRational> {
    let atoms: Vec<Vec<(f64, BigRational)>> = truth
        .cells()
        .iter()
        .map(|c| c.atoms().ok_or_else(|| Error::usage("exact revenue needs a discrete true prior")))
        .collect::<Result<_>>()?;
    let cells = atoms.len();
    if cells != mech.inner().n() * mech.inner().m() {
        return Err(Error::usage("true prior shape does not match the mechanism"));
    }
    let mut digits = vec![0usize; cells];
    let radix = Radix::new(atoms.iter().map(Vec::len).collect());
    let mut total = BigRational::zero();
    loop {
        let bids: Vec<f64> = (0..cells).map(|c| atoms[c][digits[c]].0).collect();
        let prob = (0..cells).fold(BigRational::from_integer(1.into()), |acc, c| acc * &atoms[c][digits[c]].1);
        let lottery = evaluate_on_reals(mech, &bids)?;
        for i in 0..mech.inner().n() {
            total += &prob * MechanismTable::expected_payment(lottery, i).to_rational();
        }
        if !radix.step(&mut digits) {
            break;
        }
    }
    Ok(total)
}

/// Real-lattice audit: largest ex-post gain from misreporting when true values
/// and reports range over `points` evenly spaced reals per coordinate, and the
/// most negative truthful utility.
pub fn real_lattice_dsic_regret<T: Scalar>(
    mech: &LearnedMechanism<T>,
    model: &ValuationModel,
    space: &OutcomeSpace,
    points: usize,
) -> Result<(f64, f64)> {
    let (n, m) = (mech.inner().n(), mech.inner().m());
    let h = mech.grid().h();
    let lattice: Vec<f64> = (0..points).map(|k| h * k as f64 / (points - 1).max(1) as f64).collect();
    let cells = n * m;
    let profiles = Domain::new(n, m, vec![(0..points as u32).collect(); cells])?;
    let utility = |i: usize, truth: &[f64], bids: &[f64]| -> Result<f64> {
        let lottery = evaluate_on_reals(mech, bids)?;
        let params: Vec<f64> = truth[i * m..(i + 1) * m].to_vec();
        let mut u = 0.0;
        for e in lottery {
            u += e.prob.to_f64_lossy() * (model.value::<f64>(space, i, &params, e.outcome)? - e.payments[i].to_f64_lossy());
        }
        Ok(u)
    };
    let mut worst_gain = 0.0f64;
    let mut worst_ir = f64::INFINITY;
    let lies = Domain::new(1, m, vec![(0..points as u32).collect(); m])?;
    for r in 0..profiles.profile_count() {
        let truth: Vec<f64> = profiles.profile_at(r).iter().map(|&k| lattice[k as usize]).collect();
        for i in 0..n {
            let honest = utility(i, &truth, &truth)?;
            worst_ir = worst_ir.min(honest);
            for l in 0..lies.profile_count() {
                let mut bids = truth.clone();
                for (j, &k) in lies.profile_at(l).iter().enumerate() {
                    bids[i * m + j] = lattice[k as usize];
                }
                worst_gain = worst_gain.max(utility(i, &truth, &bids)? - honest);
            }
        }
    }
    Ok((worst_gain, worst_ir))
}

/// Real-lattice interim audit: a bidder with real type on the lattice reports
/// any lattice point while the others draw grid types from `prior`.
pub fn real_lattice_bic_regret<T: Scalar>(
    mech: &LearnedMechanism<T>,
    prior: &ProductPrior<T>,
    model: &ValuationModel,
    space: &OutcomeSpace,
    points: usize,
) -> Result<f64> {
    let (n, m) = (mech.inner().n(), mech.inner().m());
    let grid = *mech.grid();
    let h = grid.h();
    let lattice: Vec<f64> = (0..points).map(|k| h * k as f64 / (points - 1).max(1) as f64).collect();
    let types = Domain::new(1, m, vec![(0..points as u32).collect(); m])?;
    let mut worst = 0.0f64;
    for i in 0..n {
        let others = prior.others_profiles(i);
        // interim allocation and payment of each lattice report
        let reports: Vec<(Vec<f64>, f64)> = (0..types.profile_count())
            .map(|r| {
                let report: Vec<u32> = types
                    .profile_at(r)
                    .iter()
                    .map(|&k| grid.round_down(lattice[k as usize]).map(|g| g.0))
                    .collect::<Result<_>>()?;
                let mut alloc = vec![0.0; space.len()];
                let mut pay = 0.0;
                for (profile, p) in &others {
                    let mut full = profile.clone();
                    full[i * m..(i + 1) * m].copy_from_slice(&report);
                    let p = p.to_f64_lossy();
                    for e in mech.inner().lottery(&full).expect("full grid") {
                        alloc[e.outcome] += p * e.prob.to_f64_lossy();
                        pay += p * e.prob.to_f64_lossy() * e.payments[i].to_f64_lossy();
                    }
                }
                Ok((alloc, pay))
            })
            .collect::<Result<_>>()?;
        for t in 0..types.profile_count() {
            let params: Vec<f64> = types.profile_at(t).iter().map(|&k| lattice[k as usize]).collect();
            let values: Vec<f64> =
                (0..space.len()).map(|o| model.value::<f64>(space, i, &params, o)).collect::<Result<_>>()?;
            let u = |(alloc, pay): &(Vec<f64>, f64)| alloc.iter().zip(&values).map(|(a, v)| a * v).sum::<f64>() - pay;
            let honest = u(&reports[t]);
            for rep in &reports {
                worst = worst.max(u(rep) - honest);
            }
        }
    }
    Ok(worst)
}
