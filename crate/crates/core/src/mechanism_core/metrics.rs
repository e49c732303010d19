use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid_prior::{set_bidder, Domain, ProductPrior};
use crate::mechanism_core::table::{Lottery, MechanismTable};
use crate::scalar::Scalar;
use crate::valuation_outcome::{BidderValues, OutcomeSpace, ValuationModel};

/// Fails with a usage error naming the first prior profile the mechanism does not cover.
pub fn check_covers<T: Scalar, P: Scalar>(mech: &MechanismTable<T>, prior: &ProductPrior<P>) -> Result<()> {
    if prior.grid() != mech.grid() {
        return Err(Error::usage("prior and mechanism use different grids"));
    }
    if prior.n() != mech.n() || prior.m() != mech.m() {
        return Err(Error::usage(format!(
            "prior is {}x{}, mechanism is {}x{}",
            prior.n(),
            prior.m(),
            mech.n(),
            mech.m()
        )));
    }
    let domain = mech.domain();
    for (cell, marginal) in prior.marginals().iter().enumerate() {
        if let Some(&g) = marginal.support().iter().find(|g| domain.coords()[cell].binary_search(g).is_err()) {
            let mut profile: Vec<u32> = prior.marginals().iter().map(|mg| mg.support()[0]).collect();
            profile[cell] = g;
            return Err(Error::usage(format!("mechanism has no row for prior profile {profile:?}")));
        }
    }
    Ok(())
}

/// Expected revenue `sum_v Pr(v) * sum_i E[p_i(v)]` over the prior's support.
pub fn revenue<T: Scalar>(mech: &MechanismTable<T>, prior: &ProductPrior<T>) -> Result<T> {
    check_covers(mech, prior)?;
    let mut total = T::zero();
    for (profile, prob) in prior.profiles() {
        let lottery = mech.lottery(&profile).expect("covered");
        let paid = (0..mech.n()).fold(T::zero(), |acc, i| acc + MechanismTable::expected_payment(lottery, i));
        total = total + prob * paid;
    }
    Ok(total)
}

/// `E_lottery[v_k(t, outcome) - p_k]` with bidder values taken from `values` row `t`.
pub fn lottery_utility<T: Scalar>(lottery: &Lottery<T>, bidder: usize, values: &[T]) -> T {
    lottery.iter().fold(T::zero(), |acc, e| {
        acc + e.prob.clone() * (values[e.outcome].clone() - e.payments[bidder].clone())
    })
}

/// Ex-post utility of bidder `k` with true type `true_type` at the row for `reported`.
pub fn ex_post_utility<T: Scalar>(
    mech: &MechanismTable<T>,
    model: &ValuationModel,
    space: &OutcomeSpace,
    bidder: usize,
    true_type: &[u32],
    reported: &[u32],
) -> Result<T> {
    let lottery = mech
        .lottery(reported)
        .ok_or_else(|| Error::usage(format!("profile {reported:?} outside the mechanism domain")))?;
    let values: Vec<T> = (0..space.len())
        .map(|o| model.value_at_grid(space, mech.grid(), bidder, true_type, o))
        .collect();
    Ok(lottery_utility(lottery, bidder, &values))
}

/// Interim allocation, payment and utility tables of one bidder.
///
/// Types are the bidder's types in the mechanism domain; expectations are over
/// the other bidders' prior and the mechanism's randomness.
#[derive(Clone, Debug, PartialEq)]
pub struct InterimForm<T> {
    pub bidder: usize,
    pub types: Vec<Vec<u32>>,
    /// `allocation[t'][o]`: probability of outcome `o` when reporting `t'`.
    pub allocation: Vec<Vec<T>>,
    /// `payment[t']`: expected payment when reporting `t'`.
    pub payment: Vec<T>,
    /// `utility[t][t']`: expected utility of true type `t` reporting `t'`.
    pub utility: Vec<Vec<T>>,
}

fn check_others_covered<T: Scalar>(mech: &MechanismTable<T>, prior: &ProductPrior<T>, k: usize) -> Result<()> {
    if prior.grid() != mech.grid() || prior.n() != mech.n() || prior.m() != mech.m() {
        return Err(Error::usage("prior and mechanism shapes differ"));
    }
    let m = mech.m();
    for i in (0..mech.n()).filter(|&i| i != k) {
        for j in 0..m {
            let coords = mech.domain().coord(i, j);
            if let Some(g) = prior.marginal(i, j).support().iter().find(|g| coords.binary_search(g).is_err()) {
                return Err(Error::usage(format!(
                    "mechanism domain misses value index {g} of bidder {i}, parameter {j}"
                )));
            }
        }
    }
    Ok(())
}

/// Interim allocation and payment per reported type, from the given bidder values.
fn interim_tables<T: Scalar>(
    mech: &MechanismTable<T>,
    prior: &ProductPrior<T>,
    k: usize,
    types: &[Vec<u32>],
) -> (Vec<Vec<T>>, Vec<T>) {
    let m = mech.m();
    let others = prior.others_profiles(k);
    let mut allocation = vec![vec![T::zero(); mech.outcome_count()]; types.len()];
    let mut payment = vec![T::zero(); types.len()];
    for (ti, t) in types.iter().enumerate() {
        for (rest, p_rest) in &others {
            let mut profile = rest.clone();
            set_bidder(&mut profile, m, k, t);
            let lottery = mech.lottery(&profile).expect("covered");
            for e in lottery {
                let w = p_rest.clone() * e.prob.clone();
                allocation[ti][e.outcome] = allocation[ti][e.outcome].clone() + w.clone();
                payment[ti] = payment[ti].clone() + w * e.payments[k].clone();
            }
        }
    }
    (allocation, payment)
}

fn interim_utility<T: Scalar>(allocation: &[T], payment: &T, values: &[T]) -> T {
    allocation
        .iter()
        .zip(values)
        .filter(|(a, _)| !a.is_zero())
        .fold(T::zero(), |acc, (a, v)| acc + a.clone() * v.clone())
        - payment.clone()
}

pub fn interim_form<T: Scalar>(
    mech: &MechanismTable<T>,
    prior: &ProductPrior<T>,
    model: &ValuationModel,
    space: &OutcomeSpace,
    k: usize,
) -> Result<InterimForm<T>> {
    if k >= mech.n() {
        return Err(Error::usage(format!("bidder {k} out of range")));
    }
    check_others_covered(mech, prior, k)?;
    let values: BidderValues<T> = BidderValues::new(model, space, mech.grid(), mech.domain(), k);
    let types = values.types().to_vec();
    let (allocation, payment) = interim_tables(mech, prior, k, &types);
    let utility = (0..types.len())
        .map(|t| {
            (0..types.len())
                .map(|r| interim_utility(&allocation[r], &payment[r], values.row(t)))
                .collect()
        })
        .collect();
    Ok(InterimForm { bidder: k, types, allocation, payment, utility })
}

/// Revenue recomputed from interim payments: `sum_k sum_t Pr(t) P_k[t]`.
pub fn revenue_from_interim<T: Scalar>(forms: &[InterimForm<T>], prior: &ProductPrior<T>) -> T {
    let mut total = T::zero();
    for form in forms {
        for (t, p) in prior.bidder_types(form.bidder) {
            let idx = form.types.iter().position(|x| *x == t).expect("support type in domain");
            total = total + p * form.payment[idx].clone();
        }
    }
    total
}

#[derive(Clone, Debug, PartialEq)]
pub struct BicWitness {
    pub bidder: usize,
    pub true_type: Vec<u32>,
    pub report: Vec<u32>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DsicWitness {
    pub bidder: usize,
    pub profile: Vec<u32>,
    pub report: Vec<u32>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct IrWitness {
    pub bidder: usize,
    pub profile: Vec<u32>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BidderRegret<T> {
    pub bic_regret: T,
    pub dsic_regret: T,
    pub ir_slack: T,
}

/// Incentive and participation audit of a mechanism over its domain.
///
/// Regrets are clamped below at zero; the witnesses name the maximizing
/// deviation (or the truthful report when nothing beats it).
#[derive(Clone, Debug, PartialEq)]
pub struct RegretReport<T> {
    pub bic_regret: T,
    pub bic_witness: BicWitness,
    pub dsic_regret: T,
    pub dsic_witness: DsicWitness,
    pub ir_slack: T,
    pub ir_witness: IrWitness,
    pub per_bidder: Vec<BidderRegret<T>>,
}

/// Audit over the full grid; deviations range over all of `[0, H]_eps^m`.
pub fn regret_report<T: Scalar>(
    mech: &MechanismTable<T>,
    prior: &ProductPrior<T>,
    model: &ValuationModel,
    space: &OutcomeSpace,
) -> Result<RegretReport<T>> {
    if !mech.is_full() {
        return Err(Error::usage("regret report needs a full-grid mechanism; extend it first"));
    }
    regret_report_on_domain(mech, prior, model, space)
}

struct Best<T, W> {
    value: T,
    witness: W,
}

impl<T: Scalar, W> Best<T, W> {
    /// Keeps the first maximizer (or minimizer when `min`) in visiting order.
    fn offer(slot: &mut Option<Self>, value: T, witness: W, min: bool) {
        let better = match slot {
            None => true,
            Some(b) => {
                if min {
                    value < b.value
                } else {
                    value > b.value
                }
            }
        };
        if better {
            *slot = Some(Best { value, witness });
        }
    }
}

/// Audit restricted to the mechanism's own domain (deviations to domain types only).
pub fn regret_report_on_domain<T: Scalar>(
    mech: &MechanismTable<T>,
    prior: &ProductPrior<T>,
    model: &ValuationModel,
    space: &OutcomeSpace,
) -> Result<RegretReport<T>> {
    audit(mech, prior, model, space, false)
}

/// Audit in which only types and profiles the prior can produce are checked
/// for truthfulness and participation; deviations still range over the whole
/// domain.
pub fn regret_report_on_support<T: Scalar>(
    mech: &MechanismTable<T>,
    prior: &ProductPrior<T>,
    model: &ValuationModel,
    space: &OutcomeSpace,
) -> Result<RegretReport<T>> {
    check_covers(mech, prior)?;
    audit(mech, prior, model, space, true)
}

fn audit<T: Scalar>(
    mech: &MechanismTable<T>,
    prior: &ProductPrior<T>,
    model: &ValuationModel,
    space: &OutcomeSpace,
    support_only: bool,
) -> Result<RegretReport<T>> {
    mech.check_space(space)?;
    if mech.domain().profile_count() == 0 {
        return Err(Error::usage("regret report on an empty domain"));
    }
    let n = mech.n();
    let domain = mech.domain();
    let mut per_bidder = Vec::with_capacity(n);
    let mut bic: Option<Best<T, BicWitness>> = None;
    let mut dsic: Option<Best<T, DsicWitness>> = None;
    let mut ir: Option<Best<T, IrWitness>> = None;
    let rows = domain.profile_count();
    // masks[i][t]: whether bidder i's domain type t is audited as a true type
    let masks: Vec<Vec<bool>> = (0..n)
        .map(|i| {
            domain
                .bidder_types(i)
                .iter()
                .map(|t| {
                    !support_only
                        || t.iter().enumerate().all(|(j, g)| prior.marginal(i, j).support().binary_search(g).is_ok())
                })
                .collect()
        })
        .collect();
    for k in 0..n {
        check_others_covered(mech, prior, k)?;
        let values: BidderValues<T> = BidderValues::new(model, space, mech.grid(), domain, k);
        let types = values.types();
        let (allocation, payment) = interim_tables(mech, prior, k, types);

        let mut bic_k: Option<Best<T, (usize, usize)>> = None;
        for t in (0..types.len()).filter(|&t| masks[k][t]) {
            let truthful = interim_utility(&allocation[t], &payment[t], values.row(t));
            for r in 0..types.len() {
                let gain = interim_utility(&allocation[r], &payment[r], values.row(t)) - truthful.clone();
                Best::offer(&mut bic_k, gain, (t, r), false);
            }
        }
        let bic_k = bic_k.expect("nonempty");

        let offsets = bidder_offsets(domain, k);
        let per_row: Vec<(usize, T, usize, T)> = (0..rows)
            .into_par_iter()
            .filter(|&row| (0..n).all(|i| masks[i][bidder_type_of_row(domain, row, i)]))
            .map(|row| {
                let t = bidder_type_of_row(domain, row, k);
                let base = row - offsets[t];
                let truthful = lottery_utility(mech.row_at(row), k, values.row(t));
                let mut best_gain: Option<(T, usize)> = None;
                for (r, off) in offsets.iter().enumerate() {
                    let gain = lottery_utility(mech.row_at(base + off), k, values.row(t)) - truthful.clone();
                    if best_gain.as_ref().map_or(true, |(g, _)| gain > *g) {
                        best_gain = Some((gain, r));
                    }
                }
                let (gain, r) = best_gain.expect("nonempty");
                (row, gain, r, truthful)
            })
            .collect();
        let mut dsic_k: Option<Best<T, (usize, usize)>> = None;
        let mut ir_k: Option<Best<T, usize>> = None;
        for (row, gain, r, truthful) in per_row {
            Best::offer(&mut dsic_k, gain, (row, r), false);
            Best::offer(&mut ir_k, truthful, row, true);
        }
        let dsic_k = dsic_k.expect("nonempty");
        let ir_k = ir_k.expect("nonempty");

        per_bidder.push(BidderRegret {
            bic_regret: T::max_of(bic_k.value.clone(), T::zero()),
            dsic_regret: T::max_of(dsic_k.value.clone(), T::zero()),
            ir_slack: ir_k.value.clone(),
        });
        let (t, r) = bic_k.witness;
        Best::offer(
            &mut bic,
            bic_k.value,
            BicWitness { bidder: k, true_type: types[t].clone(), report: types[r].clone() },
            false,
        );
        let (row, r) = dsic_k.witness;
        Best::offer(
            &mut dsic,
            dsic_k.value,
            DsicWitness { bidder: k, profile: domain.profile_at(row), report: types[r].clone() },
            false,
        );
        Best::offer(&mut ir, ir_k.value, IrWitness { bidder: k, profile: domain.profile_at(ir_k.witness) }, true);
    }
    let (bic, dsic, ir) = (bic.expect("n >= 1"), dsic.expect("n >= 1"), ir.expect("n >= 1"));
    Ok(RegretReport {
        bic_regret: T::max_of(bic.value, T::zero()),
        bic_witness: bic.witness,
        dsic_regret: T::max_of(dsic.value, T::zero()),
        dsic_witness: dsic.witness,
        ir_slack: ir.value,
        ir_witness: ir.witness,
        per_bidder,
    })
}

/// Row offset contributed by each of bidder `k`'s domain types.
pub(crate) fn bidder_offsets(domain: &Domain, k: usize) -> Vec<usize> {
    let sizes: Vec<usize> = domain.coords().iter().map(Vec::len).collect();
    let m = domain.m();
    let mut strides = vec![1usize; sizes.len()];
    for c in (0..sizes.len().saturating_sub(1)).rev() {
        strides[c] = strides[c + 1] * sizes[c + 1];
    }
    let own = crate::grid_prior::Radix::new(sizes[k * m..(k + 1) * m].to_vec());
    (0..own.len())
        .map(|t| {
            own.decode(t)
                .iter()
                .enumerate()
                .map(|(j, d)| d * strides[k * m + j])
                .sum()
        })
        .collect()
}

/// Index of bidder `k`'s type within the profile at `row`.
pub(crate) fn bidder_type_of_row(domain: &Domain, row: usize, k: usize) -> usize {
    let m = domain.m();
    let sizes: Vec<usize> = domain.coords().iter().map(Vec::len).collect();
    let after: usize = sizes[(k + 1) * m..].iter().product();
    let own: usize = sizes[k * m..(k + 1) * m].iter().product();
    (row / after) % own
}
