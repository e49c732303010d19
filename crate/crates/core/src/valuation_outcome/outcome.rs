use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::grid_prior::Radix;
use crate::scalar::{parse_rational, Scalar};

/// Largest outcome space the enumerators will build.
pub const OUTCOME_BUDGET: u128 = 1_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeKind {
    MultiItem,
    SingleParameter,
    Custom,
}

/// A finite, explicitly enumerated set of outcomes.
///
/// Each outcome is an `n x items` allocation matrix with entries in `[0, 1]`.
/// Multi-item spaces use one item per parameter; single-parameter spaces have
/// one "item" per bidder (the allocation level `x_i`).
#[derive(Clone, Debug)]
pub struct OutcomeSpace {
    kind: OutcomeKind,
    n: usize,
    items: usize,
    alloc: Vec<BigRational>,
    alloc_f64: Vec<f64>,
}

impl PartialEq for OutcomeSpace {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind && self.n == other.n && self.items == other.items && self.alloc == other.alloc
    }
}

impl OutcomeSpace {
    fn build(kind: OutcomeKind, n: usize, items: usize, alloc: Vec<BigRational>) -> Result<Self> {
        if n == 0 || items == 0 {
            return Err(Error::usage("outcome space needs n >= 1 and at least one item"));
        }
        if alloc.is_empty() || alloc.len() % (n * items) != 0 {
            return Err(Error::usage("outcome space must be nonempty with n x items entries per outcome"));
        }
        if let Some(x) = alloc.iter().find(|x| x.is_negative() || **x > BigRational::one()) {
            return Err(Error::usage(format!("allocation entry {x} outside [0, 1]")));
        }
        let alloc_f64 = alloc.iter().map(|x| x.to_f64().unwrap_or(f64::NAN)).collect();
        Ok(OutcomeSpace { kind, n, items, alloc, alloc_f64 })
    }

    /// All ways to give each of `m` items to at most one of `n` bidders.
    ///
    /// Outcome `o` in mixed radix `n + 1` (item 0 most significant) names the
    /// owner of each item; digit 0 means unassigned, digit `i + 1` bidder `i`.
    pub fn multi_item(n: usize, m: usize) -> Result<Self> {
        let radix = Radix::new(vec![n + 1; m]);
        let size = radix.checked_len().unwrap_or(u128::MAX);
        if size > OUTCOME_BUDGET {
            return Err(Error::capacity("multi-item outcome space", size, OUTCOME_BUDGET));
        }
        let count = size as usize;
        let mut alloc = vec![BigRational::zero(); count * n * m];
        for o in 0..count {
            for (j, owner) in radix.decode(o).into_iter().enumerate() {
                if owner > 0 {
                    alloc[(o * n + owner - 1) * m + j] = BigRational::one();
                }
            }
        }
        Self::build(OutcomeKind::MultiItem, n, m, alloc)
    }

    /// Single-parameter space from explicit allocation vectors `x in [0,1]^n`.
    pub fn single_parameter(n: usize, outcomes: &[Vec<BigRational>]) -> Result<Self> {
        if outcomes.iter().any(|x| x.len() != n) {
            return Err(Error::usage(format!("single-parameter outcomes need {n} entries")));
        }
        Self::build(OutcomeKind::SingleParameter, n, 1, outcomes.iter().flatten().cloned().collect())
    }

    /// The single-item auction: nobody wins, or exactly one bidder wins.
    pub fn single_item(n: usize) -> Result<Self> {
        let outcomes: Vec<Vec<BigRational>> = (0..=n)
            .map(|w| {
                (0..n)
                    .map(|i| if w == i + 1 { BigRational::one() } else { BigRational::zero() })
                    .collect()
            })
            .collect();
        Self::single_parameter(n, &outcomes)
    }

    /// Custom space from `outcomes[o][bidder][item]`.
    pub fn custom(n: usize, items: usize, outcomes: &[Vec<Vec<BigRational>>]) -> Result<Self> {
        let mut alloc = Vec::new();
        for (o, rows) in outcomes.iter().enumerate() {
            if rows.len() != n || rows.iter().any(|r| r.len() != items) {
                return Err(Error::usage(format!("outcome {o} must be a {n} x {items} allocation")));
            }
            alloc.extend(rows.iter().flatten().cloned());
        }
        Self::build(OutcomeKind::Custom, n, items, alloc)
    }

    pub fn kind(&self) -> OutcomeKind {
        self.kind
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn items(&self) -> usize {
        self.items
    }

    pub fn len(&self) -> usize {
        self.alloc.len() / (self.n * self.items)
    }

    pub fn is_empty(&self) -> bool {
        self.alloc.is_empty()
    }

    pub fn allocation_exact(&self, outcome: usize, bidder: usize, item: usize) -> &BigRational {
        &self.alloc[(outcome * self.n + bidder) * self.items + item]
    }

    pub fn allocation_f64(&self, outcome: usize, bidder: usize, item: usize) -> f64 {
        self.alloc_f64[(outcome * self.n + bidder) * self.items + item]
    }

    pub fn allocation<T: Scalar>(&self, outcome: usize, bidder: usize, item: usize) -> T {
        if T::EXACT {
            T::from_rational(self.allocation_exact(outcome, bidder, item))
        } else {
            T::from_f64_lossy(self.allocation_f64(outcome, bidder, item))
        }
    }

    /// Bidder's allocation row in outcome `o`.
    pub fn row_f64(&self, outcome: usize, bidder: usize) -> &[f64] {
        let start = (outcome * self.n + bidder) * self.items;
        &self.alloc_f64[start..start + self.items]
    }

    /// Per-item owner digits for a multi-item outcome.
    pub fn decode_multi_item(&self, outcome: usize) -> Option<Vec<usize>> {
        if self.kind != OutcomeKind::MultiItem || outcome >= self.len() {
            return None;
        }
        Some(Radix::new(vec![self.n + 1; self.items]).decode(outcome))
    }

    pub fn encode_multi_item(&self, owners: &[usize]) -> Option<usize> {
        if self.kind != OutcomeKind::MultiItem || owners.len() != self.items || owners.iter().any(|&d| d > self.n) {
            return None;
        }
        Some(Radix::new(vec![self.n + 1; self.items]).encode(owners))
    }

    /// `outcomes[o][bidder][item]` as exact strings.
    pub fn to_json(&self) -> OutcomeSpaceFile {
        let outcomes = (0..self.len())
            .map(|o| {
                (0..self.n)
                    .map(|i| (0..self.items).map(|j| self.allocation_exact(o, i, j).encode()).collect())
                    .collect()
            })
            .collect();
        OutcomeSpaceFile {
            kind: self.kind,
            n: self.n,
            items: self.items,
            outcomes,
        }
    }

    pub fn from_json(file: &OutcomeSpaceFile) -> Result<Self> {
        let mut parsed = Vec::with_capacity(file.outcomes.len());
        for (o, rows) in file.outcomes.iter().enumerate() {
            let mut out_rows = Vec::with_capacity(rows.len());
            for row in rows {
                let mut r = Vec::with_capacity(row.len());
                for x in row {
                    r.push(
                        parse_rational(x)
                            .ok_or_else(|| Error::parse(format!("outcome {o}"), format!("bad allocation {x:?}")))?,
                    );
                }
                out_rows.push(r);
            }
            parsed.push(out_rows);
        }
        let mut space = Self::custom(file.n, file.items, &parsed)?;
        space.kind = file.kind;
        Ok(space)
    }

    /// SHA-256 of the canonical JSON encoding, hex encoded.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(&self.to_json()).expect("serializable");
        let digest = Sha256::digest(text.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// JSON form of an outcome space; allocation entries are decimal or `p/q` strings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutcomeSpaceFile {
    pub kind: OutcomeKind,
    pub n: usize,
    pub items: usize,
    pub outcomes: Vec<Vec<Vec<String>>>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn multi_item_sizes() {
        assert_eq!(OutcomeSpace::multi_item(1, 1).unwrap().len(), 2);
        assert_eq!(OutcomeSpace::multi_item(2, 2).unwrap().len(), 9);
        assert_eq!(OutcomeSpace::multi_item(3, 2).unwrap().len(), 16);
    }

    #[test]
    fn multi_item_feasibility_and_bijection() {
        let space = OutcomeSpace::multi_item(2, 3).unwrap();
        let mut brute = 0;
        for a in 0..3 {
            for b in 0..3 {
                for c in 0..3 {
                    let o = space.encode_multi_item(&[a, b, c]).unwrap();
                    assert_eq!(o, brute);
                    brute += 1;
                    assert_eq!(space.decode_multi_item(o).unwrap(), vec![a, b, c]);
                }
            }
        }
        assert_eq!(brute, space.len());
        for o in 0..space.len() {
            for j in 0..3 {
                let total: f64 = (0..2).map(|i| space.allocation_f64(o, i, j)).sum();
                assert!(total <= 1.0);
            }
        }
        assert!((0..2).all(|i| space.row_f64(0, i).iter().all(|&x| x == 0.0)));
    }

    #[test]
    fn budget_guard() {
        match OutcomeSpace::multi_item(9, 7) {
            Err(Error::Capacity { size, .. }) => assert_eq!(size, 10_000_000),
            other => panic!("expected capacity error, got {other:?}"),
        }
    }

    #[test]
    fn json_round_trip_and_hash() {
        let space = OutcomeSpace::single_parameter(
            2,
            &[
                vec![BigRational::zero(), BigRational::zero()],
                vec![BigRational::new(1.into(), 2.into()), BigRational::zero()],
            ],
        )
        .unwrap();
        let back = OutcomeSpace::from_json(&space.to_json()).unwrap();
        assert_eq!(back, space);
        assert_eq!(back.hash(), space.hash());
        assert_ne!(space.hash(), OutcomeSpace::single_item(2).unwrap().hash());
    }

    #[test]
    fn rejects_out_of_range_allocation() {
        let bad = OutcomeSpace::single_parameter(1, &[vec![BigRational::from_integer(2.into())]]);
        assert!(bad.is_err());
    }
}
