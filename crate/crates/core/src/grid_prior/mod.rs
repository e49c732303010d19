//! Value grids, rounding, discrete marginals, product priors and sampling.

mod grid;
mod marginal;
mod sample_count;
mod sampling;

pub use grid::{bidder_slice, set_bidder, Domain, GridSpec, GridValue, Radix};
pub use marginal::{empirical_marginal, DiscreteMarginal, ProductPrior};
pub use sample_count::{recommended_sample_count, SampleCountParams};
pub use sampling::{PriorFamily, PriorSpec, SampleSet, TruePrior};

/// Largest grid point not exceeding `v`.
pub fn round_down(v: f64, grid: &GridSpec) -> crate::Result<GridValue> {
    grid.round_down(v)
}
