use crate::grid_prior::{Domain, GridSpec};
use crate::valuation_outcome::outcome::OutcomeSpace;
use crate::valuation_outcome::valuation::{BidderValues, ValuationModel};

const TOL: f64 = 1e-12;

/// Result of the weak downward-closure search.
///
/// `witnesses[x][k]` is an outcome that gives bidder `k` the same value as `x`
/// at every grid type and every other bidder value 0 at every grid type.
#[derive(Clone, Debug, PartialEq)]
pub struct ClosureReport {
    witnesses: Vec<Vec<Option<usize>>>,
    counterexample: Option<(usize, usize)>,
    zero_outcome: Option<usize>,
}

impl ClosureReport {
    pub fn is_closed(&self) -> bool {
        self.counterexample.is_none()
    }

    pub fn witness(&self, outcome: usize, bidder: usize) -> Option<usize> {
        self.witnesses.get(outcome)?.get(bidder).copied().flatten()
    }

    /// First `(outcome, bidder)` pair without a witness.
    pub fn counterexample(&self) -> Option<(usize, usize)> {
        self.counterexample
    }

    /// An outcome worth 0 to every bidder at every grid type, if one exists.
    pub fn zero_outcome(&self) -> Option<usize> {
        self.zero_outcome
    }
}

/// Searches, for every outcome `x` and bidder `k`, for the smallest-index `x'`
/// with `v_k(., x') = v_k(., x)` and `v_i(., x') = 0` for `i != k`, over all grid types.
pub fn check_weakly_downward_closed(space: &OutcomeSpace, model: &ValuationModel, grid: &GridSpec, m: usize) -> ClosureReport {
    let n = space.n();
    let outcomes = space.len();
    let domain = Domain::full(grid, n, m).expect("n, m >= 1");
    // profile[i][o] = bidder i's values on outcome o across all grid types
    let profile: Vec<Vec<Vec<f64>>> = (0..n)
        .map(|i| {
            let vals: BidderValues<f64> = BidderValues::new(model, space, grid, &domain, i);
            (0..outcomes)
                .map(|o| (0..vals.types().len()).map(|t| *vals.get(t, o)).collect())
                .collect()
        })
        .collect();
    let is_zero = |i: usize, o: usize| profile[i][o].iter().all(|v| v.abs() <= TOL);
    let same = |a: &[f64], b: &[f64]| a.iter().zip(b).all(|(x, y)| (x - y).abs() <= TOL);

    let mut witnesses = vec![vec![None; n]; outcomes];
    let mut counterexample = None;
    for x in 0..outcomes {
        for k in 0..n {
            let found = (0..outcomes)
                .find(|&c| same(&profile[k][c], &profile[k][x]) && (0..n).all(|i| i == k || is_zero(i, c)));
            witnesses[x][k] = found;
            if found.is_none() && counterexample.is_none() {
                counterexample = Some((x, k));
            }
        }
    }
    let zero_outcome = (0..outcomes).find(|&o| (0..n).all(|i| is_zero(i, o)));
    ClosureReport {
        witnesses,
        counterexample,
        zero_outcome,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::BigRational;
    use num_traits::{One, Zero};

    #[test]
    fn multi_item_additive_is_closed() {
        let grid = GridSpec::new(1.0, 2.0).unwrap();
        let space = OutcomeSpace::multi_item(2, 2).unwrap();
        let report = check_weakly_downward_closed(&space, &ValuationModel::additive(), &grid, 2);
        assert!(report.is_closed());
        // bidder 0 gets item 0, bidder 1 gets item 1; witness for bidder 0 drops item 1
        let x = space.encode_multi_item(&[1, 2]).unwrap();
        assert_eq!(report.witness(x, 0), space.encode_multi_item(&[1, 0]));
        assert_eq!(report.witness(x, 1), space.encode_multi_item(&[0, 2]));
        assert_eq!(report.zero_outcome(), Some(0));
    }

    #[test]
    fn shared_outcome_is_not_closed() {
        let grid = GridSpec::new(1.0, 1.0).unwrap();
        let one = BigRational::one();
        let space = OutcomeSpace::single_parameter(2, &[vec![one.clone(), one]]).unwrap();
        let report = check_weakly_downward_closed(&space, &ValuationModel::additive(), &grid, 1);
        assert!(!report.is_closed());
        assert_eq!(report.counterexample(), Some((0, 0)));
        assert_eq!(report.zero_outcome(), None);
    }

    #[test]
    fn single_parameter_with_axis_restrictions() {
        let grid = GridSpec::new(0.5, 1.0).unwrap();
        let (z, o, half) = (BigRational::zero(), BigRational::one(), BigRational::new(1.into(), 2.into()));
        // {0, (1, 1/2), (1, 0), (0, 1/2)}
        let space = OutcomeSpace::single_parameter(
            2,
            &[
                vec![z.clone(), z.clone()],
                vec![o.clone(), half.clone()],
                vec![o, z.clone()],
                vec![z, half],
            ],
        )
        .unwrap();
        let report = check_weakly_downward_closed(&space, &ValuationModel::additive(), &grid, 1);
        assert!(report.is_closed());
        assert_eq!(report.witness(1, 0), Some(2));
        assert_eq!(report.witness(1, 1), Some(3));
        // dropping the (0, 1/2) axis outcome breaks closure for bidder 1
        let space = OutcomeSpace::single_parameter(
            2,
            &[
                vec![BigRational::zero(), BigRational::zero()],
                vec![BigRational::one(), BigRational::new(1.into(), 2.into())],
                vec![BigRational::one(), BigRational::zero()],
            ],
        )
        .unwrap();
        let report = check_weakly_downward_closed(&space, &ValuationModel::additive(), &grid, 1);
        assert_eq!(report.counterexample(), Some((1, 1)));
    }
}
