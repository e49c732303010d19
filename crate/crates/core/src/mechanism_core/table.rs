use crate::error::{Error, Result};
use crate::grid_prior::{Domain, GridSpec};
use crate::scalar::Scalar;
use crate::valuation_outcome::OutcomeSpace;

/// Lottery rows must sum to one within this slack.
pub const ROW_SUM_TOLERANCE: f64 = 1e-9;

/// One branch of a lottery: with probability `prob`, outcome `outcome` at `payments`.
#[derive(Clone, Debug, PartialEq)]
pub struct LotteryEntry<T> {
    pub prob: T,
    pub outcome: usize,
    pub payments: Vec<T>,
}

pub type Lottery<T> = Vec<LotteryEntry<T>>;

/// Explicit mechanism: one lottery over priced outcomes per grid profile of `domain`.
#[derive(Clone, Debug, PartialEq)]
pub struct MechanismTable<T> {
    grid: GridSpec,
    domain: Domain,
    outcome_count: usize,
    outcome_hash: String,
    rows: Vec<Lottery<T>>,
}

/// Checks a lottery against the invariants; `location` names it in errors.
pub fn validate_lottery<T: Scalar>(lottery: &Lottery<T>, n: usize, outcome_count: usize, location: &str) -> Result<()> {
    let mut total = T::zero();
    for entry in lottery {
        if entry.prob.is_negative() {
            return Err(Error::parse(location, format!("negative probability {}", entry.prob)));
        }
        if entry.outcome >= outcome_count {
            return Err(Error::parse(location, format!("outcome {} out of range ({outcome_count} outcomes)", entry.outcome)));
        }
        if entry.payments.len() != n {
            return Err(Error::parse(location, format!("expected {n} payments, got {}", entry.payments.len())));
        }
        if entry.payments.iter().any(|p| !p.to_f64_lossy().is_finite()) {
            return Err(Error::parse(location, "payment is not finite"));
        }
        total = total + entry.prob.clone();
    }
    let gap = (total.clone() - T::one()).abs().to_f64_lossy();
    if !(gap <= ROW_SUM_TOLERANCE) {
        return Err(Error::parse(location, format!("lottery probabilities sum to {total}, not 1")));
    }
    Ok(())
}

impl<T: Scalar> MechanismTable<T> {
    pub fn new(grid: GridSpec, domain: Domain, space: &OutcomeSpace, rows: Vec<Lottery<T>>) -> Result<Self> {
        Self::with_hash(grid, domain, space.len(), space.hash(), rows)
    }

    /// Builds a table against an outcome space known only by size and hash.
    pub fn with_hash(grid: GridSpec, domain: Domain, outcome_count: usize, outcome_hash: String, rows: Vec<Lottery<T>>) -> Result<Self> {
        let expected = domain.profile_count();
        if rows.len() != expected {
            return Err(Error::usage(format!("mechanism needs {expected} rows, got {}", rows.len())));
        }
        if let Some(g) = domain.coords().iter().flatten().find(|&&g| g > grid.top_index()) {
            return Err(Error::usage(format!("domain coordinate {g} above top grid index {}", grid.top_index())));
        }
        for (r, lottery) in rows.iter().enumerate() {
            validate_lottery(lottery, domain.n(), outcome_count, &format!("profile {:?}", domain.profile_at(r)))
                .map_err(|e| match e {
                    Error::Parse { location, message } => Error::usage(format!("{location}: {message}")),
                    other => other,
                })?;
        }
        Ok(MechanismTable { grid, domain, outcome_count, outcome_hash, rows })
    }

    /// A table defined by a rule evaluated at every profile of `domain`.
    pub fn from_fn<F>(grid: GridSpec, domain: Domain, space: &OutcomeSpace, mut rule: F) -> Result<Self>
    where
        F: FnMut(&[u32]) -> Lottery<T>,
    {
        let rows = (0..domain.profile_count()).map(|r| rule(&domain.profile_at(r))).collect();
        Self::new(grid, domain, space, rows)
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn n(&self) -> usize {
        self.domain.n()
    }

    pub fn m(&self) -> usize {
        self.domain.m()
    }

    pub fn outcome_count(&self) -> usize {
        self.outcome_count
    }

    pub fn outcome_hash(&self) -> &str {
        &self.outcome_hash
    }

    pub fn rows(&self) -> &[Lottery<T>] {
        &self.rows
    }

    pub fn row_at(&self, index: usize) -> &Lottery<T> {
        &self.rows[index]
    }

    pub fn is_full(&self) -> bool {
        self.domain.is_full(&self.grid)
    }

    /// The lottery at a grid profile, if the profile is in the domain.
    pub fn lottery(&self, profile: &[u32]) -> Option<&Lottery<T>> {
        self.domain.row_index(profile).map(|r| &self.rows[r])
    }

    /// Fails unless `space` is the outcome space this table was built against.
    pub fn check_space(&self, space: &OutcomeSpace) -> Result<()> {
        if space.len() != self.outcome_count || space.hash() != self.outcome_hash {
            return Err(Error::usage("outcome space does not match the mechanism"));
        }
        Ok(())
    }

    pub fn expected_payment(lottery: &Lottery<T>, bidder: usize) -> T {
        lottery
            .iter()
            .fold(T::zero(), |acc, e| acc + e.prob.clone() * e.payments[bidder].clone())
    }

    /// Every payment multiplied by `c`.
    pub fn scale_payments(&self, c: &T) -> Self {
        let rows = self
            .rows
            .iter()
            .map(|lottery| {
                lottery
                    .iter()
                    .map(|e| LotteryEntry {
                        prob: e.prob.clone(),
                        outcome: e.outcome,
                        payments: e.payments.iter().map(|p| p.clone() * c.clone()).collect(),
                    })
                    .collect()
            })
            .collect();
        MechanismTable { rows, ..self.clone() }
    }

    /// Same rows against a relabeled outcome space: outcome `o` becomes `perm[o]`.
    pub fn relabel_outcomes(&self, perm: &[usize], space: &OutcomeSpace) -> Result<Self> {
        let rows = self
            .rows
            .iter()
            .map(|lottery| {
                lottery
                    .iter()
                    .map(|e| LotteryEntry { outcome: perm[e.outcome], ..e.clone() })
                    .collect()
            })
            .collect();
        Self::new(self.grid, self.domain.clone(), space, rows)
    }

    pub fn cast<U: Scalar>(&self) -> MechanismTable<U> {
        MechanismTable {
            grid: self.grid,
            domain: self.domain.clone(),
            outcome_count: self.outcome_count,
            outcome_hash: self.outcome_hash.clone(),
            rows: self
                .rows
                .iter()
                .map(|lottery| {
                    lottery
                        .iter()
                        .map(|e| LotteryEntry {
                            prob: e.prob.cast(),
                            outcome: e.outcome,
                            payments: e.payments.iter().map(Scalar::cast).collect(),
                        })
                        .collect()
                })
                .collect(),
        }
    }
}

/// A deterministic lottery: `outcome` for sure at `payments`.
pub fn sure<T: Scalar>(outcome: usize, payments: Vec<T>) -> Lottery<T> {
    vec![LotteryEntry { prob: T::one(), outcome, payments }]
}
