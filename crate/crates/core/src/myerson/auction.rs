use num_rational::BigRational;
use num_traits::Zero;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid_prior::{Domain, GridSpec, SampleSet};
use crate::lp_oracle::tabulate;
use crate::mechanism_core::{sure, Lottery, MechanismTable};
use crate::myerson::ironing::{iron, IronedVirtuals};
use crate::scalar::Scalar;
use crate::valuation_outcome::{OutcomeSpace, PricedOutcome};

type Q = BigRational;

/// Virtual-welfare maximizer over a finite single-parameter outcome space,
/// with threshold payments.
#[derive(Clone, Debug)]
pub struct MyersonAuction {
    virtuals: Vec<IronedVirtuals>,
    space: OutcomeSpace,
    grid: GridSpec,
    allocate_ties: bool,
    /// Outcomes in tie-break priority order.
    order: Vec<usize>,
}

impl MyersonAuction {
    /// `allocate_ties` prefers outcomes with more total allocation among
    /// virtual-welfare ties; remaining ties go to the lowest outcome index.
    pub fn new(virtuals: Vec<IronedVirtuals>, space: &OutcomeSpace, allocate_ties: bool) -> Result<Self> {
        if space.items() != 1 {
            return Err(Error::usage(format!(
                "Myerson auctions need a single-parameter space, got {} items per bidder",
                space.items()
            )));
        }
        if virtuals.len() != space.n() {
            return Err(Error::usage(format!("{} bidders in the space but {} marginals", space.n(), virtuals.len())));
        }
        let grid = *virtuals
            .first()
            .ok_or_else(|| Error::usage("Myerson auction with no bidders"))?
            .marginal()
            .grid();
        if virtuals.iter().any(|v| *v.marginal().grid() != grid) {
            return Err(Error::usage("marginals live on different grids"));
        }
        let total = |o: usize| (0..space.n()).fold(Q::zero(), |acc, i| acc + space.allocation_exact(o, i, 0));
        let mut order: Vec<usize> = (0..space.len()).collect();
        order.sort_by(|&a, &b| {
            let (ta, tb) = (total(a), total(b));
            let primary = if allocate_ties { tb.cmp(&ta) } else { ta.cmp(&tb) };
            primary.then(a.cmp(&b))
        });
        Ok(MyersonAuction { virtuals, space: space.clone(), grid, allocate_ties, order })
    }

    pub fn virtuals(&self) -> &[IronedVirtuals] {
        &self.virtuals
    }

    pub fn space(&self) -> &OutcomeSpace {
        &self.space
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn n(&self) -> usize {
        self.virtuals.len()
    }

    pub fn allocate_ties(&self) -> bool {
        self.allocate_ties
    }

    /// Outcome chosen when bidder `i` reports support level `levels[i]`;
    /// `None` marks a non-participating bidder, who must get nothing.
    pub fn allocate(&self, levels: &[Option<usize>]) -> Result<usize> {
        let mut best: Option<(usize, Q)> = None;
        for &o in &self.order {
            let mut welfare = Q::zero();
            let mut feasible = true;
            for (i, level) in levels.iter().enumerate() {
                let x = self.space.allocation_exact(o, i, 0);
                match level {
                    Some(s) => welfare += x * &self.virtuals[i].phi()[*s],
                    None if !x.is_zero() => {
                        feasible = false;
                        break;
                    }
                    None => {}
                }
            }
            if !feasible {
                continue;
            }
            if best.as_ref().is_none_or(|(_, w)| welfare > *w) {
                best = Some((o, welfare));
            }
        }
        best.map(|(o, _)| o)
            .ok_or_else(|| Error::usage("no outcome leaves every non-participating bidder unallocated"))
    }

    /// Chosen outcome and threshold payments at the given support levels.
    pub fn run_levels(&self, levels: &[Option<usize>]) -> Result<PricedOutcome<Q>> {
        if levels.len() != self.n() {
            return Err(Error::usage(format!("expected {} bids, got {}", self.n(), levels.len())));
        }
        let outcome = self.allocate(levels)?;
        let mut payments = vec![Q::zero(); self.n()];
        let mut probe = levels.to_vec();
        for (i, level) in levels.iter().enumerate() {
            let Some(k) = *level else { continue };
            let w = self.virtuals[i].values();
            let mut p = self.space.allocation_exact(outcome, i, 0) * &w[k];
            for l in 0..k {
                probe[i] = Some(l);
                let o = self.allocate(&probe)?;
                p -= self.space.allocation_exact(o, i, 0) * (&w[l + 1] - &w[l]);
            }
            probe[i] = *level;
            payments[i] = p;
        }
        Ok(PricedOutcome { outcome, payments })
    }

    /// Support levels for grid bids, snapping down and marking bids below the support.
    pub fn snap_levels(&self, bids: &[u32]) -> Vec<Option<usize>> {
        bids.iter().zip(&self.virtuals).map(|(&g, v)| v.snap_level(g)).collect()
    }

    /// Mechanism table of the auction on a domain, snapping grid bids to the supports.
    pub fn table<T: Scalar>(&self, domain: Domain) -> Result<MechanismTable<T>> {
        if domain.m() != 1 || domain.n() != self.n() {
            return Err(Error::usage("domain shape does not match the auction"));
        }
        let rows = (0..domain.profile_count())
            .into_par_iter()
            .map(|r| self.lottery::<T>(&domain.profile_at(r)))
            .collect::<Result<Vec<_>>>()?;
        MechanismTable::new(self.grid, domain, &self.space, rows)
    }

    /// Table over every grid profile.
    pub fn full_table<T: Scalar>(&self) -> Result<MechanismTable<T>> {
        let empty = tabulate::<T, _>(self.grid, self.n(), 1, &self.space, |_| sure(0, vec![T::zero(); self.n()]))?;
        self.table(empty.domain().clone())
    }

    /// Table over the product of the bidders' supports.
    pub fn support_table<T: Scalar>(&self) -> Result<MechanismTable<T>> {
        let coords = self.virtuals.iter().map(|v| v.support().to_vec()).collect();
        self.table(Domain::new(self.n(), 1, coords)?)
    }

    fn lottery<T: Scalar>(&self, bids: &[u32]) -> Result<Lottery<T>> {
        let priced = self.run_levels(&self.snap_levels(bids))?;
        Ok(sure(priced.outcome, priced.payments.iter().map(T::from_rational).collect()))
    }
}

/// Runs the auction on support bids.
pub fn run_myerson<T: Scalar>(auction: &MyersonAuction, bids: &[u32]) -> Result<PricedOutcome<T>> {
    let levels = bids
        .iter()
        .zip(auction.virtuals())
        .enumerate()
        .map(|(i, (&g, v))| {
            v.level_of(g).map(Some).ok_or_else(|| {
                Error::usage(format!("bid {g} of bidder {i} is off the support; apply snap_to_support first"))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let priced = auction.run_levels(&levels)?;
    Ok(PricedOutcome { outcome: priced.outcome, payments: priced.payments.iter().map(T::from_rational).collect() })
}

/// Myerson auction for the empirical distribution of single-parameter samples.
pub fn fit_myerson(samples: &SampleSet, grid: &GridSpec, space: &OutcomeSpace, allocate_ties: bool) -> Result<MyersonAuction> {
    if samples.m() != 1 {
        return Err(Error::usage(format!("single-parameter learning needs m = 1, got m = {}", samples.m())));
    }
    let prior = samples.empirical_prior::<Q>(grid)?;
    let virtuals = prior.marginals().par_iter().map(iron).collect();
    MyersonAuction::new(virtuals, space, allocate_ties)
}

/// Learns an exactly IR and DSIC single-parameter auction over every grid bid.
pub fn learn_single_parameter<T: Scalar>(samples: &SampleSet, grid: &GridSpec, space: &OutcomeSpace) -> Result<MechanismTable<T>> {
    fit_myerson(samples, grid, space, true)?.full_table()
}
