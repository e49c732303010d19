//! Finite outcome spaces and parametrized valuation models.

mod closure;
mod outcome;
mod valuation;

pub use closure::{check_weakly_downward_closed, ClosureReport};
pub use outcome::{OutcomeKind, OutcomeSpace, OutcomeSpaceFile, OUTCOME_BUDGET};
pub use valuation::{BidderValues, ModelKind, ModelSpec, TableValuation, ValuationModel};

/// One outcome together with the payment charged to each bidder.
#[derive(Clone, Debug, PartialEq)]
pub struct PricedOutcome<T> {
    pub outcome: usize,
    pub payments: Vec<T>,
}
