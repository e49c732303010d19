//! End-to-end learning pipelines, the real-bid wrapper and the single-bidder nudge.

mod menu;
mod pipeline;

pub use menu::{mechanism_to_menu, nudge_to_ic, Menu};
pub use pipeline::{
    audit_against, evaluate_on_reals, learn_bic, learn_dsic, real_lattice_bic_regret, real_lattice_dsic_regret,
    revenue_on_true_prior, BoundAudit, LearnMode, LearnedMechanism, AUDIT_SLACK,
};

#[cfg(test)]
mod tests;
