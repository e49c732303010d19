//! Single-parameter machinery: ironed virtual values, the virtual-welfare
//! auction with threshold payments, and the sample-based learner.

mod auction;
mod ironing;

pub use auction::{fit_myerson, learn_single_parameter, run_myerson, MyersonAuction};
pub use ironing::{iron, snap_to_support, IronedVirtuals};
