use std::io::Write;

use num_rational::BigRational;
use num_traits::{Signed, Zero};

use crate::error::Result;
use crate::grid_prior::{DiscreteMarginal, GridValue};
use crate::scalar::Scalar;

type Q = BigRational;

/// Ironed virtual values of one bidder, computed exactly from the concave
/// hull of the revenue curve in quantile space.
#[derive(Clone, Debug, PartialEq)]
pub struct IronedVirtuals {
    marginal: DiscreteMarginal<Q>,
    values: Vec<Q>,
    quantiles: Vec<Q>,
    revenue: Vec<Q>,
    hull: Vec<Q>,
    phi: Vec<Q>,
}

fn cross(a: &(Q, Q), b: &(Q, Q), c: &(Q, Q)) -> Q {
    (&b.0 - &a.0) * (&c.1 - &a.1) - (&b.1 - &a.1) * (&c.0 - &a.0)
}

/// Irons a marginal: `phi` at each support point is the slope of the upper
/// concave hull of `q -> w(q) q` on that point's quantile segment.
pub fn iron<T: Scalar>(marginal: &DiscreteMarginal<T>) -> IronedVirtuals {
    let exact: DiscreteMarginal<Q> = marginal.cast();
    let grid = *exact.grid();
    let k = exact.len();
    let values: Vec<Q> = exact.support().iter().map(|&g| grid.value::<Q>(GridValue(g))).collect();
    // quantile of support point s = Pr(V >= w_s)
    let mut quantiles = vec![Q::zero(); k];
    let mut tail = Q::zero();
    for s in (0..k).rev() {
        tail += &exact.probs()[s];
        quantiles[s] = tail.clone();
    }
    let revenue: Vec<Q> = (0..k).map(|s| &values[s] * &quantiles[s]).collect();
    // points by increasing quantile: origin, then support from the top down
    let mut points: Vec<(Q, Q)> = vec![(Q::zero(), Q::zero())];
    points.extend((0..k).rev().map(|s| (quantiles[s].clone(), revenue[s].clone())));
    let mut upper: Vec<usize> = Vec::with_capacity(points.len());
    for j in 0..points.len() {
        while upper.len() >= 2 {
            let a = &points[upper[upper.len() - 2]];
            let b = &points[upper[upper.len() - 1]];
            if cross(a, b, &points[j]).is_negative() {
                break;
            }
            upper.pop();
        }
        upper.push(j);
    }
    let mut hull = vec![Q::zero(); k];
    let mut phi = vec![Q::zero(); k];
    for edge in upper.windows(2) {
        let (a, b) = (&points[edge[0]], &points[edge[1]]);
        let slope = (&b.1 - &a.1) / (&b.0 - &a.0);
        for j in edge[0] + 1..=edge[1] {
            let s = k - j;
            phi[s] = slope.clone();
            hull[s] = &a.1 + &slope * (&points[j].0 - &a.0);
        }
    }
    IronedVirtuals { marginal: exact, values, quantiles, revenue, hull, phi }
}

impl IronedVirtuals {
    pub fn marginal(&self) -> &DiscreteMarginal<Q> {
        &self.marginal
    }

    pub fn support(&self) -> &[u32] {
        self.marginal.support()
    }

    /// Support values in increasing order.
    pub fn values(&self) -> &[Q] {
        &self.values
    }

    pub fn phi(&self) -> &[Q] {
        &self.phi
    }

    /// Ironed virtual value at a support grid index.
    pub fn phi_at(&self, g: u32) -> Option<&Q> {
        self.level_of(g).map(|s| &self.phi[s])
    }

    /// Position of a grid index within the support.
    pub fn level_of(&self, g: u32) -> Option<usize> {
        self.marginal.support().binary_search(&g).ok()
    }

    /// Largest support level at or below grid index `g`; `None` below the support.
    pub fn snap_level(&self, g: u32) -> Option<usize> {
        match self.marginal.support().binary_search(&g) {
            Ok(s) => Some(s),
            Err(0) => None,
            Err(s) => Some(s - 1),
        }
    }

    /// Columns: value, quantile, revenue-curve point, hull point, phi.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(writer);
        out.write_record(["value", "quantile", "revenue", "hull", "phi"])?;
        for s in 0..self.values.len() {
            out.write_record(
                [&self.values[s], &self.quantiles[s], &self.revenue[s], &self.hull[s], &self.phi[s]]
                    .iter()
                    .map(|x| format!("{}", x.to_f64_lossy())),
            )?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Largest support point at or below `v`, or `None` (non-participation) below the support.
pub fn snap_to_support<T: Scalar>(v: f64, marginal: &DiscreteMarginal<T>) -> Result<Option<GridValue>> {
    let g = marginal.grid().round_down(v)?;
    Ok(match marginal.support().binary_search(&g.0) {
        Ok(s) => Some(GridValue(marginal.support()[s])),
        Err(0) => None,
        Err(s) => Some(GridValue(marginal.support()[s - 1])),
    })
}
