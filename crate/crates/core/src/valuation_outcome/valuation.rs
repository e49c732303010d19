use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid_prior::{Domain, GridSpec, GridValue, Radix};
use crate::scalar::{decimal_rational, ExactNumber, Scalar};
use crate::valuation_outcome::outcome::OutcomeSpace;

/// Per-bidder valuation `v_i(params, x)` over a finite outcome space.
#[derive(Clone, Debug, PartialEq)]
pub enum ModelKind {
    /// `sum_j x_ij v_ij`.
    Additive,
    /// `max_j x_ij v_ij`.
    UnitDemand,
    /// Sum of the `k` largest `x_ij v_ij`.
    AdditiveUpToK(usize),
    /// Items come in pairs `(2j, 2j+1)`; parameter `j` is earned only when both are held.
    PairedComplements,
    Table(TableValuation),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ValuationModel {
    kind: ModelKind,
    lipschitz: f64,
}

/// Lookup-table valuation on grid parameter vectors, multilinear in between.
#[derive(Clone, Debug, PartialEq)]
pub struct TableValuation {
    grid: GridSpec,
    n: usize,
    m: usize,
    outcomes: usize,
    values: Vec<BigRational>,
    values_f64: Vec<f64>,
}

impl TableValuation {
    /// `values[bidder][type][outcome]`, types in lexicographic grid order.
    pub fn new(grid: GridSpec, n: usize, m: usize, outcomes: usize, values: Vec<Vec<Vec<BigRational>>>) -> Result<Self> {
        let types = Radix::new(vec![grid.levels(); m])
            .checked_len()
            .filter(|&t| t <= 1_000_000)
            .ok_or_else(|| Error::capacity("table valuation types", u128::MAX, 1_000_000))? as usize;
        if values.len() != n || values.iter().any(|b| b.len() != types || b.iter().any(|r| r.len() != outcomes)) {
            return Err(Error::config(format!(
                "table valuation must be {n} bidders x {types} types x {outcomes} outcomes"
            )));
        }
        let values: Vec<BigRational> = values.into_iter().flatten().flatten().collect();
        let values_f64 = values.iter().map(|v| v.to_f64().unwrap_or(f64::NAN)).collect();
        Ok(TableValuation { grid, n, m, outcomes, values, values_f64 })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    fn type_index(&self, t: &[u32]) -> usize {
        let levels = self.grid.levels();
        t.iter().fold(0, |acc, &g| acc * levels + g as usize)
    }

    pub fn at_grid<T: Scalar>(&self, bidder: usize, t: &[u32], outcome: usize) -> T {
        let idx = (bidder * self.type_count() + self.type_index(t)) * self.outcomes + outcome;
        if T::EXACT {
            T::from_rational(&self.values[idx])
        } else {
            T::from_f64_lossy(self.values_f64[idx])
        }
    }

    fn type_count(&self) -> usize {
        self.grid.levels().pow(self.m as u32)
    }

    /// Multilinear interpolation between the surrounding grid points; constant
    /// beyond the top grid point.
    fn interpolate<T: Scalar>(&self, bidder: usize, params: &[T], outcome: usize) -> T {
        let top = self.grid.top_index();
        let eps = T::from_f64_lossy(self.grid.epsilon());
        let mut base = Vec::with_capacity(self.m);
        let mut frac = Vec::with_capacity(self.m);
        for v in params {
            let raw = (v.to_f64_lossy() / self.grid.epsilon()).floor().max(0.0) as u32;
            if raw >= top {
                base.push(top);
                frac.push(T::zero());
                continue;
            }
            let mut k = raw;
            let mut t = v.clone() / eps.clone() - T::from_usize_lossy(k as usize);
            // float floor can be off by one next to a grid point
            if t < T::zero() && k > 0 {
                k -= 1;
                t = t + T::one();
            } else if t >= T::one() && k + 1 < top {
                k += 1;
                t = t - T::one();
            }
            base.push(k);
            frac.push(T::min_of(T::max_of(t, T::zero()), T::one()));
        }
        let mut total = T::zero();
        let mut corner = vec![0u32; self.m];
        for mask in 0..(1usize << self.m) {
            let mut weight = T::one();
            for j in 0..self.m {
                if mask >> j & 1 == 1 {
                    if frac[j].is_zero() {
                        weight = T::zero();
                        break;
                    }
                    corner[j] = base[j] + 1;
                    weight = weight * frac[j].clone();
                } else {
                    corner[j] = base[j];
                    weight = weight * (T::one() - frac[j].clone());
                }
            }
            if !weight.is_zero() {
                total = total + weight * self.at_grid::<T>(bidder, &corner, outcome);
            }
        }
        total
    }
}

/// JSON description of a valuation model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    Additive,
    UnitDemand,
    AdditiveUpToK {
        k: usize,
    },
    PairedComplements,
    Table {
        epsilon: f64,
        h: f64,
        lipschitz: f64,
        values: Vec<Vec<Vec<ExactNumber>>>,
    },
}

impl ValuationModel {
    pub fn additive() -> Self {
        ValuationModel { kind: ModelKind::Additive, lipschitz: 1.0 }
    }

    pub fn unit_demand() -> Self {
        ValuationModel { kind: ModelKind::UnitDemand, lipschitz: 1.0 }
    }

    pub fn additive_up_to_k(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::config("additive_up_to_k needs k >= 1"));
        }
        Ok(ValuationModel { kind: ModelKind::AdditiveUpToK(k), lipschitz: 1.0 })
    }

    pub fn paired_complements() -> Self {
        ValuationModel { kind: ModelKind::PairedComplements, lipschitz: 1.0 }
    }

    /// Table model with declared Lipschitz constant `lipschitz`; fails unless
    /// every grid neighbor pair and every range bound passes the audit.
    pub fn table(table: TableValuation, lipschitz: f64) -> Result<Self> {
        if !(lipschitz.is_finite() && lipschitz > 0.0) {
            return Err(Error::config("lipschitz constant must be positive"));
        }
        let grid = table.grid;
        // grid neighbours are exactly epsilon apart
        let step = decimal_rational(lipschitz) * decimal_rational(grid.epsilon());
        let cap = decimal_rational(lipschitz) * decimal_rational(grid.h()) * BigRational::from_integer(table.m.into());
        let levels = grid.levels();
        let radix = Radix::new(vec![levels; table.m]);
        for bidder in 0..table.n {
            for t in 0..radix.len() {
                let digits: Vec<u32> = radix.decode(t).into_iter().map(|d| d as u32).collect();
                for o in 0..table.outcomes {
                    let here = &table.values[(bidder * radix.len() + t) * table.outcomes + o];
                    if here.is_negative() || *here > cap {
                        return Err(Error::config(format!(
                            "table value {here} for bidder {bidder}, type {digits:?}, outcome {o} outside [0, mLH]"
                        )));
                    }
                    for j in 0..table.m {
                        if digits[j] as usize + 1 >= levels {
                            continue;
                        }
                        let mut up = digits.clone();
                        up[j] += 1;
                        let there = &table.values[(bidder * radix.len() + table.type_index(&up)) * table.outcomes + o];
                        if (there - here).abs() > step {
                            return Err(Error::config(format!(
                                "table valuation is not {lipschitz}-Lipschitz: bidder {bidder}, type {digits:?}, parameter {j}, outcome {o}"
                            )));
                        }
                    }
                }
            }
        }
        Ok(ValuationModel { kind: ModelKind::Table(table), lipschitz })
    }

    pub fn from_spec(spec: &ModelSpec, space: &OutcomeSpace, m: usize) -> Result<Self> {
        let model = match spec {
            ModelSpec::Additive => Self::additive(),
            ModelSpec::UnitDemand => Self::unit_demand(),
            ModelSpec::AdditiveUpToK { k } => Self::additive_up_to_k(*k)?,
            ModelSpec::PairedComplements => Self::paired_complements(),
            ModelSpec::Table { epsilon, h, lipschitz, values } => {
                let grid = GridSpec::new(*epsilon, *h)?;
                let parsed = values
                    .iter()
                    .map(|b| {
                        b.iter()
                            .map(|r| r.iter().map(ExactNumber::to_rational).collect::<Result<Vec<_>>>())
                            .collect::<Result<Vec<_>>>()
                    })
                    .collect::<Result<Vec<_>>>()?;
                let table = TableValuation::new(grid, space.n(), m, space.len(), parsed)?;
                Self::table(table, *lipschitz)?
            }
        };
        model.check_compatible(space, m)?;
        Ok(model)
    }

    pub fn to_spec(&self) -> ModelSpec {
        match &self.kind {
            ModelKind::Additive => ModelSpec::Additive,
            ModelKind::UnitDemand => ModelSpec::UnitDemand,
            ModelKind::AdditiveUpToK(k) => ModelSpec::AdditiveUpToK { k: *k },
            ModelKind::PairedComplements => ModelSpec::PairedComplements,
            ModelKind::Table(t) => {
                let types = t.type_count();
                ModelSpec::Table {
                    epsilon: t.grid.epsilon(),
                    h: t.grid.h(),
                    lipschitz: self.lipschitz,
                    values: (0..t.n)
                        .map(|b| {
                            (0..types)
                                .map(|ty| {
                                    (0..t.outcomes)
                                        .map(|o| ExactNumber::Text(t.values[(b * types + ty) * t.outcomes + o].encode()))
                                        .collect()
                                })
                                .collect()
                        })
                        .collect(),
                }
            }
        }
    }

    pub fn kind(&self) -> &ModelKind {
        &self.kind
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    /// Items per bidder the model expects in the outcome space for `m` parameters.
    pub fn items_for(&self, m: usize) -> usize {
        match self.kind {
            ModelKind::PairedComplements => 2 * m,
            _ => m,
        }
    }

    pub fn check_compatible(&self, space: &OutcomeSpace, m: usize) -> Result<()> {
        if let ModelKind::Table(t) = &self.kind {
            if t.n != space.n() || t.m != m || t.outcomes != space.len() {
                return Err(Error::usage(format!(
                    "table valuation is {} x {} x {} outcomes, space is {} bidders with {} outcomes and m = {m}",
                    t.n,
                    t.m,
                    t.outcomes,
                    space.n(),
                    space.len()
                )));
            }
            return Ok(());
        }
        if space.items() != self.items_for(m) {
            return Err(Error::usage(format!(
                "model expects {} items per bidder for m = {m}, outcome space has {}",
                self.items_for(m),
                space.items()
            )));
        }
        Ok(())
    }

    /// `v_bidder(params, outcome)`.
    pub fn value<T: Scalar>(&self, space: &OutcomeSpace, bidder: usize, params: &[T], outcome: usize) -> Result<T> {
        if bidder >= space.n() || outcome >= space.len() {
            return Err(Error::usage(format!("bidder {bidder} or outcome {outcome} out of range")));
        }
        let m = match &self.kind {
            ModelKind::Table(t) => t.m,
            _ => space.items() / if matches!(self.kind, ModelKind::PairedComplements) { 2 } else { 1 },
        };
        if params.len() != m || space.items() != self.items_for(m) && !matches!(self.kind, ModelKind::Table(_)) {
            return Err(Error::usage(format!(
                "expected {m} parameters, got {} (space has {} items)",
                params.len(),
                space.items()
            )));
        }
        Ok(self.value_unchecked(space, bidder, params, outcome))
    }

    pub fn value_unchecked<T: Scalar>(&self, space: &OutcomeSpace, bidder: usize, params: &[T], outcome: usize) -> T {
        let weighted = |j: usize| space.allocation::<T>(outcome, bidder, j) * params[j].clone();
        match &self.kind {
            ModelKind::Additive => (0..params.len()).fold(T::zero(), |acc, j| acc + weighted(j)),
            ModelKind::UnitDemand => (0..params.len()).fold(T::zero(), |acc, j| T::max_of(acc, weighted(j))),
            ModelKind::AdditiveUpToK(k) => {
                let mut parts: Vec<T> = (0..params.len()).map(weighted).collect();
                parts.sort_by(|a, b| b.partial_cmp(a).expect("comparable"));
                parts.into_iter().take(*k).fold(T::zero(), |acc, x| acc + x)
            }
            ModelKind::PairedComplements => (0..params.len()).fold(T::zero(), |acc, j| {
                acc + space.allocation::<T>(outcome, bidder, 2 * j)
                    * space.allocation::<T>(outcome, bidder, 2 * j + 1)
                    * params[j].clone()
            }),
            ModelKind::Table(t) => t.interpolate(bidder, params, outcome),
        }
    }

    /// Value at a grid type (exact lookup for tables).
    pub fn value_at_grid<T: Scalar>(&self, space: &OutcomeSpace, grid: &GridSpec, bidder: usize, t: &[u32], outcome: usize) -> T {
        match &self.kind {
            ModelKind::Table(table) if table.grid == *grid => table.at_grid(bidder, t, outcome),
            _ => {
                let params: Vec<T> = t.iter().map(|&g| grid.value::<T>(GridValue(g))).collect();
                self.value_unchecked(space, bidder, &params, outcome)
            }
        }
    }

    /// Upper bound `m * L * H` on any value.
    pub fn value_cap(&self, m: usize, h: f64) -> f64 {
        m as f64 * self.lipschitz * h
    }
}

/// Values of one bidder at every type of a domain, for every outcome.
#[derive(Clone, Debug)]
pub struct BidderValues<T> {
    types: Vec<Vec<u32>>,
    outcomes: usize,
    values: Vec<T>,
}

impl<T: Scalar> BidderValues<T> {
    pub fn new(model: &ValuationModel, space: &OutcomeSpace, grid: &GridSpec, domain: &Domain, bidder: usize) -> Self {
        let types = domain.bidder_types(bidder);
        let outcomes = space.len();
        let mut values = Vec::with_capacity(types.len() * outcomes);
        for t in &types {
            for o in 0..outcomes {
                values.push(model.value_at_grid::<T>(space, grid, bidder, t, o));
            }
        }
        BidderValues { types, outcomes, values }
    }

    pub fn types(&self) -> &[Vec<u32>] {
        &self.types
    }

    pub fn get(&self, type_index: usize, outcome: usize) -> &T {
        &self.values[type_index * self.outcomes + outcome]
    }

    pub fn row(&self, type_index: usize) -> &[T] {
        &self.values[type_index * self.outcomes..(type_index + 1) * self.outcomes]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    type Q = BigRational;

    fn q(a: i64, b: i64) -> Q {
        Q::new(a.into(), b.into())
    }

    #[test]
    fn additive_examples() {
        let space = OutcomeSpace::multi_item(1, 2).unwrap();
        let model = ValuationModel::additive();
        let both = space.encode_multi_item(&[1, 1]).unwrap();
        assert_eq!(model.value(&space, 0, &[1.0, 2.0], both).unwrap(), 3.0);
        assert_eq!(model.value(&space, 0, &[1.0, 2.0], 0).unwrap(), 0.0);
        assert!(matches!(model.value(&space, 0, &[1.0], both), Err(Error::Usage(_))));
    }

    #[test]
    fn paired_complements_need_both_items() {
        let space = OutcomeSpace::multi_item(1, 2).unwrap();
        let model = ValuationModel::paired_complements();
        let first_only = space.encode_multi_item(&[1, 0]).unwrap();
        let both = space.encode_multi_item(&[1, 1]).unwrap();
        assert_eq!(model.value(&space, 0, &[5.0], first_only).unwrap(), 0.0);
        assert_eq!(model.value(&space, 0, &[5.0], both).unwrap(), 5.0);
    }

    #[test]
    fn unit_demand_and_top_k() {
        let space = OutcomeSpace::multi_item(1, 3).unwrap();
        let all = space.encode_multi_item(&[1, 1, 1]).unwrap();
        let p = [q(1, 2), q(2, 1), q(3, 2)];
        assert_eq!(ValuationModel::unit_demand().value(&space, 0, &p, all).unwrap(), q(2, 1));
        assert_eq!(ValuationModel::additive_up_to_k(2).unwrap().value(&space, 0, &p, all).unwrap(), q(7, 2));
    }

    fn small_table(lipschitz: f64, bump: i64) -> Result<ValuationModel> {
        // one bidder, one parameter, grid {0, 1, 2}, outcomes {nothing, item}
        let grid = GridSpec::new(1.0, 2.0).unwrap();
        let values = vec![vec![
            vec![q(0, 1), q(0, 1)],
            vec![q(0, 1), q(1, 1)],
            vec![q(0, 1), q(2 + bump, 1)],
        ]];
        ValuationModel::table(TableValuation::new(grid, 1, 1, 2, values)?, lipschitz)
    }

    #[test]
    fn table_audit_and_interpolation() {
        let model = small_table(1.0, 0).unwrap();
        let space = OutcomeSpace::single_item(1).unwrap();
        assert_eq!(model.value(&space, 0, &[q(3, 2)], 1).unwrap(), q(3, 2));
        assert_eq!(model.value(&space, 0, &[q(2, 1)], 1).unwrap(), q(2, 1));
        assert!((model.value(&space, 0, &[0.25_f64], 1).unwrap() - 0.25).abs() < 1e-15);
        assert!(matches!(small_table(1.0, 1), Err(Error::Config(_))));
        assert!(small_table(2.0, 1).is_ok());
    }

    #[test]
    fn table_spec_round_trip() {
        let model = small_table(1.0, 0).unwrap();
        let space = OutcomeSpace::single_item(1).unwrap();
        let back = ValuationModel::from_spec(&model.to_spec(), &space, 1).unwrap();
        assert_eq!(back, model);
    }

    #[test]
    fn lipschitz_spot_audit() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let h = 2.0;
        let eps = 0.25;
        let cases: Vec<(ValuationModel, OutcomeSpace, usize)> = vec![
            (ValuationModel::additive(), OutcomeSpace::multi_item(2, 2).unwrap(), 2),
            (ValuationModel::unit_demand(), OutcomeSpace::multi_item(2, 3).unwrap(), 3),
            (ValuationModel::additive_up_to_k(2).unwrap(), OutcomeSpace::multi_item(1, 3).unwrap(), 3),
            (ValuationModel::paired_complements(), OutcomeSpace::multi_item(2, 4).unwrap(), 2),
        ];
        for _ in 0..10_000 {
            let (model, space, m) = &cases[rng.gen_range(0..cases.len())];
            let bidder = rng.gen_range(0..space.n());
            let outcome = rng.gen_range(0..space.len());
            let v: Vec<f64> = (0..*m).map(|_| rng.gen_range(0.0..h - eps)).collect();
            let j = rng.gen_range(0..*m);
            let delta = rng.gen_range(0.0..=eps);
            let mut w = v.clone();
            w[j] += delta;
            let a = model.value(space, bidder, &v, outcome).unwrap();
            let b = model.value(space, bidder, &w, outcome).unwrap();
            assert!((a - b).abs() <= model.lipschitz() * delta + 1e-12);
            assert!(a >= 0.0 && a <= model.value_cap(*m, h));
        }
    }

    #[test]
    fn additive_values_monotone() {
        let space = OutcomeSpace::multi_item(2, 2).unwrap();
        let model = ValuationModel::additive();
        for o in 0..space.len() {
            for i in 0..2 {
                let lo = model.value(&space, i, &[0.5, 1.0], o).unwrap();
                let hi = model.value(&space, i, &[0.75, 1.0], o).unwrap();
                assert!(hi >= lo);
            }
        }
    }

    #[test]
    fn bidder_values_table() {
        let grid = GridSpec::new(1.0, 2.0).unwrap();
        let domain = Domain::full(&grid, 1, 2).unwrap();
        let space = OutcomeSpace::multi_item(1, 2).unwrap();
        let vals: BidderValues<Q> = BidderValues::new(&ValuationModel::additive(), &space, &grid, &domain, 0);
        assert_eq!(vals.types().len(), 9);
        let both = space.encode_multi_item(&[1, 1]).unwrap();
        assert_eq!(vals.get(8, both), &q(4, 1));
    }
}
