use crate::error::{Error, Result};
use crate::grid_prior::{Domain, GridSpec};
use crate::lp_oracle::tabulate;
use crate::mechanism_core::{lottery_utility, sure, Lottery, MechanismTable};
use crate::scalar::{decimal_rational, Scalar};
use crate::valuation_outcome::{check_weakly_downward_closed, BidderValues, OutcomeSpace, ValuationModel};

/// Priced lotteries offered to a single bidder, who picks her favorite.
/// The first entry is always the free zero outcome.
#[derive(Clone, Debug, PartialEq)]
pub struct Menu<T> {
    entries: Vec<Lottery<T>>,
}

impl<T: Scalar> Menu<T> {
    /// Deduplicates the entries and puts the zero entry first.
    pub fn new(zero_outcome: usize, entries: impl IntoIterator<Item = Lottery<T>>) -> Result<Self> {
        let mut all: Vec<Lottery<T>> = vec![sure(zero_outcome, vec![T::zero()])];
        for e in entries {
            if e.iter().any(|x| x.payments.len() != 1) {
                return Err(Error::usage("menu entries must price a single bidder"));
            }
            if !all.contains(&e) {
                all.push(e);
            }
        }
        Ok(Menu { entries: all })
    }

    pub fn entries(&self) -> &[Lottery<T>] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Utility-maximizing entry for the given outcome values; ties go to the
    /// highest expected payment, then to the earliest entry.
    pub fn select(&self, values: &[T]) -> usize {
        let tol = T::tolerance();
        let mut best = 0;
        let mut best_u = lottery_utility(&self.entries[0], 0, values);
        let mut best_p = MechanismTable::expected_payment(&self.entries[0], 0);
        for (k, e) in self.entries.iter().enumerate().skip(1) {
            let u = lottery_utility(e, 0, values);
            let p = MechanismTable::expected_payment(e, 0);
            let better = u.clone() > best_u.clone() + tol.clone()
                || (u.clone() >= best_u.clone() - tol.clone() && p > best_p);
            if better {
                best = k;
                best_u = u;
                best_p = p;
            }
        }
        best
    }

    /// Full-grid single-bidder mechanism in which every type takes its selection.
    pub fn to_table(&self, grid: GridSpec, m: usize, space: &OutcomeSpace, model: &ValuationModel) -> Result<MechanismTable<T>> {
        let full = Domain::full(&grid, 1, m)?;
        let values: BidderValues<T> = BidderValues::new(model, space, &grid, &full, 0);
        tabulate(grid, 1, m, space, |v| {
            let t = full.bidder_type_index(0, v).expect("grid type");
            self.entries[self.select(values.row(t))].clone()
        })
    }
}

/// The distinct lotteries of a single-bidder full-grid mechanism, plus the zero entry.
pub fn mechanism_to_menu<T: Scalar>(mech: &MechanismTable<T>, space: &OutcomeSpace, model: &ValuationModel) -> Result<Menu<T>> {
    if mech.n() != 1 {
        return Err(Error::usage(format!("menus describe single-bidder mechanisms, got {} bidders", mech.n())));
    }
    if !mech.is_full() {
        return Err(Error::usage("menu extraction needs a full-grid mechanism"));
    }
    mech.check_space(space)?;
    let zero = check_weakly_downward_closed(space, model, mech.grid(), mech.m())
        .zero_outcome()
        .ok_or_else(|| Error::usage("the outcome space has no zero outcome for the menu"))?;
    Menu::new(zero, mech.rows().iter().cloned())
}

/// Scales every payment by `1 - sqrt(eps)`; with utility-maximizing selection
/// and seller-favorable ties the result is exactly IC and IR.
pub fn nudge_to_ic<T: Scalar>(menu: &Menu<T>, eps: f64) -> Result<Menu<T>> {
    if !(eps >= 0.0) || !eps.is_finite() {
        return Err(Error::usage(format!("nudge parameter must be a nonnegative number, got {eps}")));
    }
    let root = eps.sqrt();
    let factor = if T::EXACT {
        T::one() - T::from_rational(&decimal_rational(root))
    } else {
        T::one() - T::from_f64_lossy(root)
    };
    let entries = menu
        .entries
        .iter()
        .map(|lottery| {
            lottery
                .iter()
                .map(|e| {
                    let mut e = e.clone();
                    e.payments[0] = e.payments[0].clone() * factor.clone();
                    e
                })
                .collect()
        })
        .collect();
    Ok(Menu { entries })
}
