//! Extensions of a support-only mechanism to every grid profile.

use crate::error::{Error, Result};
use crate::grid_prior::{Domain, GridSpec, ProductPrior};
use crate::mechanism_core::{interim_form, lottery_utility, Lottery, LotteryEntry, MechanismTable};
use crate::scalar::Scalar;
use crate::valuation_outcome::{BidderValues, ClosureReport, OutcomeSpace, ValuationModel};

/// Largest full-grid table the extensions will materialize.
pub const FULL_GRID_BUDGET: u128 = 2_000_000;

fn full_domain<T: Scalar>(mech: &MechanismTable<T>) -> Result<Domain> {
    let domain = Domain::full(mech.grid(), mech.n(), mech.m())?;
    let rows = domain.checked_profile_count().unwrap_or(u128::MAX);
    if rows > FULL_GRID_BUDGET {
        return Err(Error::capacity("full-grid mechanism rows", rows, FULL_GRID_BUDGET));
    }
    Ok(domain)
}

/// First index whose score beats every earlier one by more than the tolerance.
fn first_argmax<T: Scalar>(scores: impl Iterator<Item = T>) -> Option<(usize, T)> {
    let tol = T::tolerance();
    let mut best: Option<(usize, T)> = None;
    for (i, s) in scores.enumerate() {
        match &best {
            Some((_, b)) if s <= b.clone() + tol.clone() => {}
            _ => best = Some((i, s)),
        }
    }
    best
}

/// Replaces each off-support bidder's report by the support type that maximizes
/// the bidder's interim utility under the prior, ties to the lexicographically
/// smallest type, and materializes the full-grid table.
pub fn extend_bic<T: Scalar>(
    mech: &MechanismTable<T>,
    prior: &ProductPrior<T>,
    model: &ValuationModel,
    space: &OutcomeSpace,
) -> Result<MechanismTable<T>> {
    mech.check_space(space)?;
    let grid = *mech.grid();
    let full = full_domain(mech)?;
    let (n, m) = (mech.n(), mech.m());
    // replacement[k][full type index] = support type vector
    let mut replacement: Vec<Vec<Vec<u32>>> = Vec::with_capacity(n);
    for k in 0..n {
        let form = interim_form(mech, prior, model, space, k)?;
        let values: BidderValues<T> = BidderValues::new(model, space, &grid, &full, k);
        let map = values
            .types()
            .iter()
            .enumerate()
            .map(|(ft, t)| {
                if mech.domain().contains_type(k, t) {
                    return t.clone();
                }
                let row = values.row(ft);
                let scores = (0..form.types.len()).map(|r| {
                    form.allocation[r]
                        .iter()
                        .zip(row)
                        .fold(T::zero(), |acc, (a, v)| acc + a.clone() * v.clone())
                        - form.payment[r].clone()
                });
                let (best, _) = first_argmax(scores).expect("nonempty support");
                form.types[best].clone()
            })
            .collect();
        replacement.push(map);
    }
    let rows = (0..full.profile_count())
        .map(|r| {
            let profile = full.profile_at(r);
            let mut mapped = Vec::with_capacity(n * m);
            for k in 0..n {
                let t = full.bidder_type_index(k, &profile[k * m..(k + 1) * m]).expect("full grid");
                mapped.extend_from_slice(&replacement[k][t]);
            }
            mech.lottery(&mapped).expect("support profile").clone()
        })
        .collect();
    MechanismTable::new(grid, full, space, rows)
}

/// Zero-out extension for weakly downward closed spaces.
///
/// One off-support bidder `k`: `k` gets the support report maximizing her
/// ex-post utility, each outcome is replaced by its closure witness for `k`,
/// and everyone else pays nothing. If even the best report leaves `k` with
/// negative utility she gets the zero outcome for free instead. Two or more
/// off-support bidders: zero outcome, zero payments.
pub fn extend_dsic<T: Scalar>(
    mech: &MechanismTable<T>,
    space: &OutcomeSpace,
    model: &ValuationModel,
    closure: &ClosureReport,
) -> Result<MechanismTable<T>> {
    mech.check_space(space)?;
    if let Some((x, k)) = closure.counterexample() {
        return Err(Error::Precondition(format!(
            "outcome {x} has no downward-closure witness for bidder {k}; verify weak downward closure first"
        )));
    }
    let grid = *mech.grid();
    let full = full_domain(mech)?;
    let (n, m) = (mech.n(), mech.m());
    let zero = closure.zero_outcome();
    if n >= 2 && zero.is_none() {
        return Err(Error::Precondition("no zero outcome; verify weak downward closure first".into()));
    }
    let values: Vec<BidderValues<T>> = (0..n).map(|k| BidderValues::new(model, space, &grid, &full, k)).collect();
    let support_types: Vec<Vec<Vec<u32>>> = (0..n).map(|k| mech.domain().bidder_types(k)).collect();
    let nothing = |o: usize| vec![LotteryEntry { prob: T::one(), outcome: o, payments: vec![T::zero(); n] }];
    let tol = T::tolerance();

    let rows: Vec<Lottery<T>> = (0..full.profile_count())
        .map(|r| -> Result<Lottery<T>> {
            let profile = full.profile_at(r);
            let off: Vec<usize> = (0..n)
                .filter(|&k| !mech.domain().contains_type(k, &profile[k * m..(k + 1) * m]))
                .collect();
            match off.as_slice() {
                [] => Ok(mech.lottery(&profile).expect("support").clone()),
                [k] => {
                    let k = *k;
                    let ft = full.bidder_type_index(k, &profile[k * m..(k + 1) * m]).expect("full grid");
                    let own = values[k].row(ft);
                    let candidates: Vec<&Lottery<T>> = support_types[k]
                        .iter()
                        .map(|t| {
                            let mut lie = profile.clone();
                            lie[k * m..(k + 1) * m].copy_from_slice(t);
                            mech.lottery(&lie).expect("others on support")
                        })
                        .collect();
                    let (best, utility) =
                        first_argmax(candidates.iter().map(|l| lottery_utility(l, k, own))).expect("nonempty support");
                    if utility < -tol.clone() {
                        if let Some(z) = zero {
                            return Ok(nothing(z));
                        }
                    }
                    candidates[best]
                        .iter()
                        .map(|e| {
                            let outcome = closure.witness(e.outcome, k).ok_or_else(|| {
                                Error::Precondition(format!("missing witness for outcome {} and bidder {k}", e.outcome))
                            })?;
                            let mut payments = vec![T::zero(); n];
                            payments[k] = e.payments[k].clone();
                            Ok(LotteryEntry { prob: e.prob.clone(), outcome, payments })
                        })
                        .collect()
                }
                _ => Ok(nothing(zero.expect("checked above"))),
            }
        })
        .collect::<Result<_>>()?;
    MechanismTable::new(grid, full, space, rows)
}

/// Full-grid table of a rule that only reads rounded grid profiles.
pub fn tabulate<T: Scalar, F>(grid: GridSpec, n: usize, m: usize, space: &OutcomeSpace, rule: F) -> Result<MechanismTable<T>>
where
    F: FnMut(&[u32]) -> Lottery<T>,
{
    let full = Domain::full(&grid, n, m)?;
    let rows = full.checked_profile_count().unwrap_or(u128::MAX);
    if rows > FULL_GRID_BUDGET {
        return Err(Error::capacity("full-grid mechanism rows", rows, FULL_GRID_BUDGET));
    }
    MechanismTable::from_fn(grid, full, space, rule)
}
