use crate::error::{Error, Result};
use crate::grid_prior::TruePrior;
use crate::learner::{evaluate_on_reals, LearnedMechanism};
use crate::mechanism_core::MechanismTable;
use crate::scalar::Scalar;

/// Sample mean with its standard error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
    pub samples: usize,
}

/// Seeded Monte-Carlo estimate of the revenue of real-bid evaluation.
pub fn monte_carlo_revenue<T: Scalar>(
    mech: &LearnedMechanism<T>,
    truth: &TruePrior,
    samples: usize,
    seed: u64,
) -> Result<Estimate> {
    if samples == 0 {
        return Err(Error::usage("Monte-Carlo estimate needs at least one sample"));
    }
    let (n, m) = (truth.n(), truth.m());
    if n != mech.inner().n() || m != mech.inner().m() {
        return Err(Error::usage("true prior shape does not match the mechanism"));
    }
    let draws = truth.sample(samples, seed)?;
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    let mut bids = vec![0.0; n * m];
    for k in 0..samples {
        for i in 0..n {
            for j in 0..m {
                bids[i * m + j] = draws.cell(i, j)[k];
            }
        }
        let lottery = evaluate_on_reals(mech, &bids)?;
        let r: f64 = (0..n).map(|i| MechanismTable::expected_payment(lottery, i).to_f64_lossy()).sum();
        sum += r;
        sum_sq += r * r;
    }
    let count = samples as f64;
    let mean = sum / count;
    let var = if samples > 1 { ((sum_sq - count * mean * mean) / (count - 1.0)).max(0.0) } else { 0.0 };
    Ok(Estimate { mean, se: (var / count).sqrt(), samples })
}
