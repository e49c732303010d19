use crate::error::{Error, Result};
use crate::grid_prior::grid::{Domain, GridSpec, GridValue, Radix};
use crate::scalar::{frac, Scalar};

/// A finite distribution over grid points. Only positive masses are stored;
/// the support is sorted by grid index.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteMarginal<T> {
    grid: GridSpec,
    support: Vec<u32>,
    probs: Vec<T>,
}

impl<T: Scalar> DiscreteMarginal<T> {
    pub fn new(grid: GridSpec, masses: Vec<(u32, T)>) -> Result<Self> {
        let mut masses = masses;
        masses.sort_by_key(|(g, _)| *g);
        let mut support: Vec<u32> = Vec::with_capacity(masses.len());
        let mut probs: Vec<T> = Vec::with_capacity(masses.len());
        for (g, p) in masses {
            if !grid.contains(GridValue(g)) {
                return Err(Error::usage(format!(
                    "grid index {g} above top index {}",
                    grid.top_index()
                )));
            }
            if p.is_negative() {
                return Err(Error::usage(format!("negative probability {p} at grid index {g}")));
            }
            if p.is_zero() {
                continue;
            }
            if support.last() == Some(&g) {
                let last = probs.pop().expect("parallel vectors");
                probs.push(last + p);
            } else {
                support.push(g);
                probs.push(p);
            }
        }
        if support.is_empty() {
            return Err(Error::usage("marginal has no positive mass"));
        }
        let total = probs.iter().cloned().fold(T::zero(), |a, b| a + b);
        let slack = if T::EXACT {
            T::zero()
        } else {
            T::max_of(T::from_f64_lossy(1e-12), T::tolerance() * T::from_f64_lossy(10.0))
        };
        if (total.clone() - T::one()).abs() > slack {
            return Err(Error::usage(format!("probabilities sum to {total}, not 1")));
        }
        Ok(DiscreteMarginal { grid, support, probs })
    }

    pub fn point_mass(grid: GridSpec, g: GridValue) -> Result<Self> {
        Self::new(grid, vec![(g.0, T::one())])
    }

    /// Uniform over the given grid indices (duplicates count with multiplicity).
    pub fn uniform_over(grid: GridSpec, indices: &[u32]) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::usage("uniform distribution over an empty list"));
        }
        let total = indices.len();
        Self::new(grid, indices.iter().map(|&g| (g, frac(1, total))).collect())
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn support(&self) -> &[u32] {
        &self.support
    }

    pub fn probs(&self) -> &[T] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    pub fn mass(&self, g: u32) -> T {
        match self.support.binary_search(&g) {
            Ok(pos) => self.probs[pos].clone(),
            Err(_) => T::zero(),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, &T)> {
        self.support.iter().copied().zip(self.probs.iter())
    }

    pub fn total(&self) -> T {
        self.probs.iter().cloned().fold(T::zero(), |a, b| a + b)
    }

    pub fn mean(&self) -> T {
        self.iter()
            .map(|(g, p)| self.grid.value::<T>(GridValue(g)) * p.clone())
            .fold(T::zero(), |a, b| a + b)
    }

    pub fn cast<U: Scalar>(&self) -> DiscreteMarginal<U> {
        DiscreteMarginal {
            grid: self.grid,
            support: self.support.clone(),
            probs: self.probs.iter().map(Scalar::cast).collect(),
        }
    }
}

/// Empirical distribution of the rounded samples; every mass is `count / S`.
pub fn empirical_marginal<T: Scalar>(samples: &[f64], grid: &GridSpec) -> Result<DiscreteMarginal<T>> {
    if samples.is_empty() {
        return Err(Error::usage("empirical marginal needs at least one sample"));
    }
    let mut counts = vec![0usize; grid.levels()];
    for &v in samples {
        counts[grid.round_down(v)?.0 as usize] += 1;
    }
    let s = samples.len();
    let masses = counts
        .into_iter()
        .enumerate()
        .filter(|(_, c)| *c > 0)
        .map(|(g, c)| (g as u32, frac(c, s)))
        .collect();
    DiscreteMarginal::new(*grid, masses)
}

/// Independent product of `n * m` marginals over one grid, stored bidder-major.
#[derive(Clone, Debug, PartialEq)]
pub struct ProductPrior<T> {
    n: usize,
    m: usize,
    marginals: Vec<DiscreteMarginal<T>>,
}

impl<T: Scalar> ProductPrior<T> {
    pub fn new(n: usize, m: usize, marginals: Vec<DiscreteMarginal<T>>) -> Result<Self> {
        if n == 0 || m == 0 {
            return Err(Error::usage("product prior needs n >= 1 and m >= 1"));
        }
        if marginals.len() != n * m {
            return Err(Error::usage(format!(
                "product prior needs {} marginals, got {}",
                n * m,
                marginals.len()
            )));
        }
        let grid = *marginals[0].grid();
        if marginals.iter().any(|mg| *mg.grid() != grid) {
            return Err(Error::usage("all marginals must share one grid"));
        }
        Ok(ProductPrior { n, m, marginals })
    }

    /// The same marginal for every (bidder, parameter) cell.
    pub fn iid(n: usize, m: usize, marginal: DiscreteMarginal<T>) -> Result<Self> {
        Self::new(n, m, vec![marginal; n * m])
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn grid(&self) -> &GridSpec {
        self.marginals[0].grid()
    }

    pub fn marginal(&self, bidder: usize, param: usize) -> &DiscreteMarginal<T> {
        &self.marginals[bidder * self.m + param]
    }

    pub fn marginals(&self) -> &[DiscreteMarginal<T>] {
        &self.marginals
    }

    /// Product of the marginal supports.
    pub fn support_domain(&self) -> Domain {
        Domain::new(
            self.n,
            self.m,
            self.marginals.iter().map(|mg| mg.support().to_vec()).collect(),
        )
        .expect("supports are sorted and sized n*m")
    }

    pub fn profile_count(&self) -> u128 {
        self.marginals.iter().map(|mg| mg.len() as u128).product()
    }

    /// Probability of a full profile (zero off the support).
    pub fn profile_prob(&self, profile: &[u32]) -> T {
        self.marginals
            .iter()
            .zip(profile)
            .fold(T::one(), |acc, (mg, &g)| acc * mg.mass(g))
    }

    /// Every support profile with its probability, in lexicographic order.
    pub fn profiles(&self) -> Vec<(Vec<u32>, T)> {
        enumerate_weighted(&self.marginals.iter().collect::<Vec<_>>())
    }

    /// Support types of bidder `k` with their probabilities, in lexicographic order.
    pub fn bidder_types(&self, k: usize) -> Vec<(Vec<u32>, T)> {
        let cells: Vec<&DiscreteMarginal<T>> = (0..self.m).map(|j| self.marginal(k, j)).collect();
        enumerate_weighted(&cells)
    }

    /// Support profiles of every bidder except `k`, as full-length profiles whose
    /// slots for bidder `k` are left at zero.
    pub fn others_profiles(&self, k: usize) -> Vec<(Vec<u32>, T)> {
        let cells: Vec<&DiscreteMarginal<T>> = (0..self.n)
            .filter(|&i| i != k)
            .flat_map(|i| (0..self.m).map(move |j| (i, j)))
            .map(|(i, j)| self.marginal(i, j))
            .collect();
        enumerate_weighted(&cells)
            .into_iter()
            .map(|(rest, p)| {
                let mut profile = vec![0u32; self.n * self.m];
                let mut it = rest.into_iter();
                for i in (0..self.n).filter(|&i| i != k) {
                    for j in 0..self.m {
                        profile[i * self.m + j] = it.next().expect("sized");
                    }
                }
                (profile, p)
            })
            .collect()
    }

    pub fn cast<U: Scalar>(&self) -> ProductPrior<U> {
        ProductPrior {
            n: self.n,
            m: self.m,
            marginals: self.marginals.iter().map(DiscreteMarginal::cast).collect(),
        }
    }
}

fn enumerate_weighted<T: Scalar>(cells: &[&DiscreteMarginal<T>]) -> Vec<(Vec<u32>, T)> {
    let radix = Radix::new(cells.iter().map(|c| c.len()).collect());
    let mut out = Vec::with_capacity(radix.len());
    let mut digits = vec![0usize; cells.len()];
    if cells.is_empty() {
        return vec![(Vec::new(), T::one())];
    }
    loop {
        let mut prob = T::one();
        let mut profile = Vec::with_capacity(cells.len());
        for (cell, &d) in cells.iter().zip(&digits) {
            profile.push(cell.support()[d]);
            prob = prob * cell.probs()[d].clone();
        }
        out.push((profile, prob));
        if !radix.step(&mut digits) {
            break;
        }
    }
    out
}
