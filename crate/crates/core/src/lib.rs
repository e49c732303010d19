//! Learning up-to-epsilon revenue-optimal auctions from samples.

pub mod error;
pub mod experiments;
pub mod grid_prior;
pub mod learner;
pub mod lp_oracle;
pub mod mechanism_core;
pub mod myerson;
pub mod valuation_outcome;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Rational = num_rational::BigRational;
