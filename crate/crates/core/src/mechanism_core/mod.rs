//! Explicit mechanisms over grid profiles, with revenue and incentive metrics.

mod metrics;
mod serialize;
mod table;

pub use metrics::{
    check_covers, ex_post_utility, interim_form, lottery_utility, regret_report, regret_report_on_domain, regret_report_on_support, revenue,
    revenue_from_interim, BicWitness, BidderRegret, DsicWitness, InterimForm, IrWitness, RegretReport,
};
pub use serialize::{Provenance, FORMAT};
pub use table::{sure, validate_lottery, Lottery, LotteryEntry, MechanismTable, ROW_SUM_TOLERANCE};

#[cfg(test)]
mod tests;
