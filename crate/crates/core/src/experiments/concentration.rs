use rand::distributions::{Distribution, WeightedIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid_prior::ProductPrior;
use crate::scalar::Scalar;

/// Outcome of repeated empirical-versus-true expectation comparisons.
#[derive(Clone, Debug, PartialEq)]
pub struct ConcentrationResult {
    pub trials: usize,
    pub violations: usize,
    pub frequency: f64,
    /// Binomial standard error of the frequency, evaluated at the bound.
    pub standard_error: f64,
    pub bound: f64,
    pub true_mean: f64,
    pub max_deviation: f64,
}

impl ConcentrationResult {
    /// Frequency within the bound plus three standard errors.
    pub fn within_bound(&self) -> bool {
        self.frequency <= self.bound + 3.0 * self.standard_error
    }
}

/// Tail bound `(4 H / eps) exp(-eps^2 S / (8 H^2))` for a function with range width `H`.
pub fn concentration_bound(h: f64, eps: f64, s: usize) -> f64 {
    4.0 * h / eps * (-(eps * eps) * s as f64 / (8.0 * h * h)).exp()
}

/// Draws `s` samples per marginal in each trial, builds the empirical product
/// and counts trials where its expectation of `f` misses the true one by more
/// than `eps`. `f` must take values in `[low, high]` on every support profile.
pub fn concentration_experiment<T: Scalar>(
    prior: &ProductPrior<T>,
    f: &(dyn Fn(&[u32]) -> f64 + Sync),
    range: (f64, f64),
    s: usize,
    eps: f64,
    trials: usize,
    seed: u64,
) -> Result<ConcentrationResult> {
    let (low, high) = range;
    if !(low.is_finite() && high.is_finite() && high > low) {
        return Err(Error::usage(format!("f needs a finite range, got [{low}, {high}]")));
    }
    if s == 0 || trials == 0 || !(eps > 0.0) {
        return Err(Error::usage("need S >= 1, trials >= 1 and eps > 0"));
    }
    let cells = prior.marginals();
    let supports: Vec<&[u32]> = cells.iter().map(|c| c.support()).collect();
    let weights: Vec<Vec<f64>> = cells.iter().map(|c| c.probs().iter().map(Scalar::to_f64_lossy).collect()).collect();
    // f on the support product, indexed by mixed-radix position
    let radix = crate::grid_prior::Radix::new(supports.iter().map(|s| s.len()).collect());
    let size = radix.checked_len().filter(|&l| l <= 1 << 22).ok_or_else(|| {
        Error::capacity("concentration support profiles", radix.checked_len().unwrap_or(u128::MAX), 1 << 22)
    })? as usize;
    let mut values = Vec::with_capacity(size);
    let mut true_mean = 0.0;
    let mut digits = vec![0usize; supports.len()];
    loop {
        let profile: Vec<u32> = digits.iter().enumerate().map(|(c, &d)| supports[c][d]).collect();
        let v = f(&profile);
        if !(v >= low - 1e-12 && v <= high + 1e-12) {
            return Err(Error::usage(format!("f({profile:?}) = {v} leaves the declared range [{low}, {high}]")));
        }
        true_mean += v * digits.iter().enumerate().map(|(c, &d)| weights[c][d]).product::<f64>();
        values.push(v);
        if !radix.step(&mut digits) {
            break;
        }
    }
    let samplers: Vec<WeightedIndex<f64>> =
        weights.iter().map(|w| WeightedIndex::new(w).map_err(|e| Error::internal(e.to_string()))).collect::<Result<_>>()?;
    let deviations: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(t as u64);
            let freq: Vec<Vec<f64>> = samplers
                .iter()
                .zip(&supports)
                .map(|(d, sup)| {
                    let mut counts = vec![0usize; sup.len()];
                    for _ in 0..s {
                        counts[d.sample(&mut rng)] += 1;
                    }
                    counts.into_iter().map(|c| c as f64 / s as f64).collect()
                })
                .collect();
            let mut digits = vec![0usize; supports.len()];
            let mut emp = 0.0;
            for v in &values {
                let w: f64 = digits.iter().enumerate().map(|(c, &d)| freq[c][d]).product();
                emp += w * v;
                radix.step(&mut digits);
            }
            (emp - true_mean).abs()
        })
        .collect();
    let violations = deviations.iter().filter(|&&d| d > eps).count();
    let bound = concentration_bound(high - low, eps, s);
    let p = bound.min(1.0);
    Ok(ConcentrationResult {
        trials,
        violations,
        frequency: violations as f64 / trials as f64,
        standard_error: (p * (1.0 - p) / trials as f64).sqrt(),
        bound,
        true_mean,
        max_deviation: deviations.iter().cloned().fold(0.0, f64::max),
    })
}

/// Bounded test functions of a grid profile.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FunctionSpec {
    /// The same value everywhere; range `[0, max(value, eps)]`.
    Constant { value: f64 },
    /// Largest parameter value in the profile; range `[0, H]`.
    MaxValue,
    /// Average parameter value; range `[0, H]`.
    MeanValue,
    /// Sum over cells of `price` when the value reaches it; range `[0, n m price]`.
    PostedPriceRevenue { price: f64 },
    /// Total payment of the exact DSIC optimum for the rounded prior; range `[0, n m L H]`.
    OracleRevenue,
}

/// A concentration run over the rounded true prior of an instance.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConcentrationConfig {
    pub instance: crate::experiments::InstanceConfig,
    pub function: FunctionSpec,
    pub samples: usize,
    pub tolerance: f64,
    pub trials: usize,
}

/// Runs the configured experiment with the given seed.
pub fn run_concentration(config: &ConcentrationConfig, seed: u64) -> Result<ConcentrationResult> {
    use num_rational::BigRational;

    use crate::grid_prior::GridValue;
    use crate::lp_oracle::{solve_optimal, IcMode, OracleProblem};
    use crate::mechanism_core::MechanismTable;

    let instance = config.instance.build()?;
    let grid = instance.grid;
    let prior = instance.truth.rounded::<f64>(&grid)?;
    let (n, m) = (prior.n(), prior.m());
    let h = grid.h();
    let value = move |g: u32| grid.value_f64(GridValue(g));
    match &config.function {
        FunctionSpec::Constant { value: c } => {
            let c = *c;
            let range = (0.0, c.max(config.tolerance));
            concentration_experiment(&prior, &move |_| c, range, config.samples, config.tolerance, config.trials, seed)
        }
        FunctionSpec::MaxValue => concentration_experiment(
            &prior,
            &move |p| p.iter().map(|&g| value(g)).fold(0.0, f64::max),
            (0.0, h),
            config.samples,
            config.tolerance,
            config.trials,
            seed,
        ),
        FunctionSpec::MeanValue => concentration_experiment(
            &prior,
            &move |p| p.iter().map(|&g| value(g)).sum::<f64>() / p.len() as f64,
            (0.0, h),
            config.samples,
            config.tolerance,
            config.trials,
            seed,
        ),
        FunctionSpec::PostedPriceRevenue { price } => {
            let price = *price;
            if !(price > 0.0) {
                return Err(Error::config("posted price must be positive"));
            }
            concentration_experiment(
                &prior,
                &move |p| p.iter().filter(|&&g| value(g) >= price - 1e-12).count() as f64 * price,
                (0.0, (n * m) as f64 * price),
                config.samples,
                config.tolerance,
                config.trials,
                seed,
            )
        }
        FunctionSpec::OracleRevenue => {
            let exact = instance.truth.rounded::<BigRational>(&grid)?;
            let solution =
                solve_optimal(&OracleProblem::new(&exact, &instance.space, &instance.model, IcMode::DsicSlack(0.0))?)?;
            let mech = solution.mechanism;
            let top = instance.model.value_cap(m, h) * n as f64;
            let f = move |p: &[u32]| {
                let lottery = mech.lottery(p).expect("support profile");
                (0..n).map(|i| MechanismTable::expected_payment(lottery, i).to_f64_lossy()).sum::<f64>()
            };
            concentration_experiment(&prior, &f, (0.0, top), config.samples, config.tolerance, config.trials, seed)
        }
    }
}
