//! Ground-truth priors, seeded sampling and sample files.

use std::io::{Read, Write};

use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::distributions::{Distribution, Uniform, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid_prior::grid::GridSpec;
use crate::grid_prior::marginal::{DiscreteMarginal, ProductPrior};
use crate::scalar::{decimal_rational, ExactNumber, Scalar};

/// One supported ground-truth distribution for a single (bidder, parameter) cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "params", rename_all = "snake_case", deny_unknown_fields)]
pub enum PriorFamily {
    /// Finite mixture of point masses (values need not lie on the grid).
    Discrete { values: Vec<f64>, probs: Vec<ExactNumber> },
    PointMass { value: f64 },
    Uniform { low: f64, high: f64 },
    /// Exponential with the given rate, conditioned on `[low, high]`.
    TruncatedExponential { rate: f64, low: f64, high: f64 },
}

impl PriorFamily {
    pub fn from_json(value: &serde_json::Value) -> Result<Self> {
        serde_json::from_value(value.clone()).map_err(|e| Error::config(format!("unsupported prior description: {e}")))
    }

    pub fn validate(&self, h: f64) -> Result<()> {
        let in_range = |v: f64| v.is_finite() && (0.0..=h).contains(&v);
        match self {
            PriorFamily::Discrete { values, probs } => {
                if values.is_empty() || values.len() != probs.len() {
                    return Err(Error::config("discrete prior needs equally many values and probs (at least one)"));
                }
                if let Some(v) = values.iter().find(|v| !in_range(**v)) {
                    return Err(Error::config(format!("discrete value {v} outside [0, {h}]")));
                }
                let mut total = BigRational::zero();
                for p in probs {
                    let p = p.to_rational()?;
                    if p.is_negative() {
                        return Err(Error::config("negative probability in discrete prior"));
                    }
                    total += p;
                }
                let total = total.to_f64().unwrap_or(f64::NAN);
                if (total - 1.0).abs() > 1e-12 {
                    return Err(Error::config(format!("discrete probabilities sum to {total}")));
                }
            }
            PriorFamily::PointMass { value } => {
                if !in_range(*value) {
                    return Err(Error::config(format!("point mass {value} outside [0, {h}]")));
                }
            }
            PriorFamily::Uniform { low, high } => {
                if !(in_range(*low) && in_range(*high) && low < high) {
                    return Err(Error::config(format!("uniform [{low}, {high}] must satisfy 0 <= low < high <= {h}")));
                }
            }
            PriorFamily::TruncatedExponential { rate, low, high } => {
                if !(rate.is_finite() && *rate > 0.0) {
                    return Err(Error::config(format!("exponential rate {rate} must be positive")));
                }
                if !(in_range(*low) && in_range(*high) && low < high) {
                    return Err(Error::config(format!(
                        "truncation [{low}, {high}] must satisfy 0 <= low < high <= {h}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Atoms with exact probabilities, for finitely supported families.
    pub fn atoms(&self) -> Option<Vec<(f64, BigRational)>> {
        match self {
            PriorFamily::Discrete { values, probs } => values
                .iter()
                .zip(probs)
                .map(|(v, p)| p.to_rational().ok().map(|p| (*v, p)))
                .collect(),
            PriorFamily::PointMass { value } => Some(vec![(*value, BigRational::from_integer(1.into()))]),
            _ => None,
        }
    }

    pub fn is_discrete(&self) -> bool {
        self.atoms().is_some()
    }

    fn sampler(&self) -> Sampler {
        match self {
            PriorFamily::Discrete { values, probs } => {
                let weights: Vec<f64> = probs
                    .iter()
                    .map(|p| p.to_rational().ok().and_then(|r| r.to_f64()).unwrap_or(0.0))
                    .collect();
                Sampler::Discrete(values.clone(), WeightedIndex::new(weights).expect("validated weights"))
            }
            PriorFamily::PointMass { value } => Sampler::Constant(*value),
            PriorFamily::Uniform { low, high } => Sampler::Uniform(Uniform::new_inclusive(*low, *high)),
            PriorFamily::TruncatedExponential { rate, low, high } => Sampler::TruncExp {
                rate: *rate,
                low: *low,
                mass: 1.0 - (-rate * (high - low)).exp(),
                high: *high,
            },
        }
    }

    /// CDF at `x`.
    fn cdf(&self, x: f64) -> f64 {
        match self {
            PriorFamily::Discrete { .. } | PriorFamily::PointMass { .. } => self
                .atoms()
                .expect("discrete")
                .iter()
                .filter(|(v, _)| *v <= x)
                .map(|(_, p)| p.to_f64().unwrap_or(0.0))
                .sum(),
            PriorFamily::Uniform { low, high } => ((x - low) / (high - low)).clamp(0.0, 1.0),
            PriorFamily::TruncatedExponential { rate, low, high } => {
                if x < *low {
                    0.0
                } else if x >= *high {
                    1.0
                } else {
                    (1.0 - (-rate * (x - low)).exp()) / (1.0 - (-rate * (high - low)).exp())
                }
            }
        }
    }

    /// Distribution of the value rounded down to the grid.
    ///
    /// Exact for finitely supported families; continuous families go through
    /// the CDF in floating point.
    pub fn rounded<T: Scalar>(&self, grid: &GridSpec) -> Result<DiscreteMarginal<T>> {
        if let Some(atoms) = self.atoms() {
            let mut masses = Vec::with_capacity(atoms.len());
            for (v, p) in atoms {
                masses.push((grid.round_down(v)?.0, T::from_rational(&p)));
            }
            return DiscreteMarginal::new(*grid, masses);
        }
        if let PriorFamily::Uniform { low, high } = self {
            return Self::rounded_uniform(*low, *high, grid);
        }
        let top = grid.top_index();
        let mut masses = Vec::new();
        let mut below = 0.0;
        for g in 0..=top {
            // values in [g*eps, (g+1)*eps) round to g; the top cell also holds h
            let upper = if g == top { f64::INFINITY } else { grid.epsilon() * (g + 1) as f64 };
            let cdf = if g == top { 1.0 } else { self.cdf(upper - 0.0) };
            let mass = (cdf - below).max(0.0);
            below = cdf;
            if mass > 0.0 {
                masses.push((g, mass));
            }
        }
        let total: f64 = masses.iter().map(|(_, p)| p).sum();
        let masses = masses.into_iter().map(|(g, p)| (g, T::from_f64_lossy(p / total))).collect();
        DiscreteMarginal::new(*grid, masses)
    }

    /// Cell masses of a uniform law, computed exactly from the decimal endpoints.
    fn rounded_uniform<T: Scalar>(low: f64, high: f64, grid: &GridSpec) -> Result<DiscreteMarginal<T>> {
        let (low, high) = (decimal_rational(low), decimal_rational(high));
        let eps = decimal_rational(grid.epsilon());
        let width = &high - &low;
        let top = grid.top_index();
        let mut masses = Vec::new();
        let mut below = BigRational::zero();
        for g in 0..=top {
            let cdf = if g == top {
                BigRational::one()
            } else {
                let upper = &eps * BigRational::from_integer((g + 1).into());
                ((upper - &low) / &width).clamp(BigRational::zero(), BigRational::one())
            };
            if cdf > below {
                masses.push((g, T::from_rational(&(&cdf - &below))));
                below = cdf;
            }
        }
        DiscreteMarginal::new(*grid, masses)
    }
}

enum Sampler {
    Discrete(Vec<f64>, WeightedIndex<f64>),
    Constant(f64),
    Uniform(Uniform<f64>),
    TruncExp { rate: f64, low: f64, high: f64, mass: f64 },
}

impl Sampler {
    fn draw<R: Rng>(&self, rng: &mut R) -> f64 {
        match self {
            Sampler::Discrete(values, index) => values[index.sample(rng)],
            Sampler::Constant(v) => *v,
            Sampler::Uniform(u) => u.sample(rng),
            Sampler::TruncExp { rate, low, high, mass } => {
                let u: f64 = rng.gen();
                (low - (1.0 - u * mass).ln() / rate).clamp(*low, *high)
            }
        }
    }
}

/// Either one family for every cell or an `n x m` table of families.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PriorSpec {
    Broadcast(PriorFamily),
    PerCell(Vec<Vec<PriorFamily>>),
}

/// The ground-truth product prior `V_{i,j}` used by experiments.
#[derive(Clone, Debug, PartialEq)]
pub struct TruePrior {
    n: usize,
    m: usize,
    h: f64,
    cells: Vec<PriorFamily>,
}

impl TruePrior {
    pub fn new(n: usize, m: usize, h: f64, spec: &PriorSpec) -> Result<Self> {
        if n == 0 || m == 0 {
            return Err(Error::config("prior needs n >= 1 and m >= 1"));
        }
        let cells = match spec {
            PriorSpec::Broadcast(f) => vec![f.clone(); n * m],
            PriorSpec::PerCell(rows) => {
                if rows.len() != n || rows.iter().any(|r| r.len() != m) {
                    return Err(Error::config(format!("per-cell prior table must be {n} x {m}")));
                }
                rows.iter().flatten().cloned().collect()
            }
        };
        for c in &cells {
            c.validate(h)?;
        }
        Ok(TruePrior { n, m, h, cells })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn cell(&self, bidder: usize, param: usize) -> &PriorFamily {
        &self.cells[bidder * self.m + param]
    }

    pub fn cells(&self) -> &[PriorFamily] {
        &self.cells
    }

    pub fn is_discrete(&self) -> bool {
        self.cells.iter().all(PriorFamily::is_discrete)
    }

    /// True when every cell is finitely supported on grid points.
    pub fn is_grid_supported(&self, grid: &GridSpec) -> bool {
        self.cells.iter().all(|c| {
            c.atoms()
                .map(|atoms| atoms.iter().all(|(v, _)| grid.exact_index(*v).is_some()))
                .unwrap_or(false)
        })
    }

    /// The pushforward product prior under rounding down to the grid.
    pub fn rounded<T: Scalar>(&self, grid: &GridSpec) -> Result<ProductPrior<T>> {
        let marginals = self.cells.iter().map(|c| c.rounded(grid)).collect::<Result<Vec<_>>>()?;
        ProductPrior::new(self.n, self.m, marginals)
    }

    /// `n * m * s` draws, cell by cell, from a generator seeded with `seed`.
    pub fn sample(&self, s: usize, seed: u64) -> Result<SampleSet> {
        if s == 0 {
            return Err(Error::usage("sample count must be at least 1"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut values = Vec::with_capacity(self.cells.len() * s);
        for cell in &self.cells {
            let sampler = cell.sampler();
            values.extend((0..s).map(|_| sampler.draw(&mut rng)));
        }
        Ok(SampleSet {
            n: self.n,
            m: self.m,
            s,
            values,
            seed,
        })
    }
}

/// `n * m * s` real samples in `[0, h]`, laid out cell-major.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleSet {
    n: usize,
    m: usize,
    s: usize,
    values: Vec<f64>,
    seed: u64,
}

impl SampleSet {
    pub fn from_values(n: usize, m: usize, s: usize, values: Vec<f64>, seed: u64) -> Result<Self> {
        if n == 0 || m == 0 || s == 0 {
            return Err(Error::usage("sample set needs n, m, s >= 1"));
        }
        if values.len() != n * m * s {
            return Err(Error::usage(format!(
                "expected {} sample values, got {}",
                n * m * s,
                values.len()
            )));
        }
        Ok(SampleSet { n, m, s, values, seed })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn samples_per_cell(&self) -> usize {
        self.s
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn cell(&self, bidder: usize, param: usize) -> &[f64] {
        let start = (bidder * self.m + param) * self.s;
        &self.values[start..start + self.s]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Checks every value lies in `[0, h]`.
    pub fn check_range(&self, h: f64) -> Result<()> {
        match self.values.iter().find(|v| !(v.is_finite() && (0.0..=h).contains(*v))) {
            Some(&v) => Err(Error::Domain {
                value: v,
                low: 0.0,
                high: h,
                context: "sample value".into(),
            }),
            None => Ok(()),
        }
    }

    /// Per-cell empirical distributions of the rounded samples.
    pub fn empirical_prior<T: Scalar>(&self, grid: &GridSpec) -> Result<ProductPrior<T>> {
        let mut marginals = Vec::with_capacity(self.n * self.m);
        for i in 0..self.n {
            for j in 0..self.m {
                marginals.push(crate::grid_prior::marginal::empirical_marginal(self.cell(i, j), grid)?);
            }
        }
        ProductPrior::new(self.n, self.m, marginals)
    }

    /// CSV with columns `bidder,parameter,sample_index,value`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["bidder", "parameter", "sample_index", "value"])?;
        for i in 0..self.n {
            for j in 0..self.m {
                for (t, v) in self.cell(i, j).iter().enumerate() {
                    w.write_record([i.to_string(), j.to_string(), t.to_string(), v.encode()])?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R, seed: u64) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let mut rows: Vec<(usize, usize, usize, f64)> = Vec::new();
        for (line, record) in r.records().enumerate() {
            let record = record?;
            let location = format!("row {}", line + 2);
            if record.len() != 4 {
                return Err(Error::parse(location, "expected 4 columns"));
            }
            let field = |k: usize| -> Result<usize> {
                record[k]
                    .trim()
                    .parse::<usize>()
                    .map_err(|e| Error::parse(format!("row {}", line + 2), e.to_string()))
            };
            let value = f64::decode(&record[3]).ok_or_else(|| Error::parse(location.clone(), "bad value"))?;
            rows.push((field(0)?, field(1)?, field(2)?, value));
        }
        if rows.is_empty() {
            return Err(Error::parse("file", "no samples"));
        }
        let n = rows.iter().map(|r| r.0).max().unwrap_or(0) + 1;
        let m = rows.iter().map(|r| r.1).max().unwrap_or(0) + 1;
        let s = rows.iter().map(|r| r.2).max().unwrap_or(0) + 1;
        if rows.len() != n * m * s {
            return Err(Error::parse("file", format!("expected {} rows for {n}x{m}x{s}", n * m * s)));
        }
        let mut values = vec![f64::NAN; n * m * s];
        for (i, j, t, v) in rows {
            let slot = &mut values[(i * m + j) * s + t];
            if !slot.is_nan() {
                return Err(Error::parse(format!("bidder {i} parameter {j} sample {t}"), "duplicate row"));
            }
            *slot = v;
        }
        SampleSet::from_values(n, m, s, values, seed)
    }
}
