use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Relative slack used when deciding whether a float sits on a grid point.
///
/// `0.3 / 0.1` evaluates to `2.9999999999999996`; without the snap the value
/// 0.3 would round down to index 2.
const SNAP: f64 = 1e-9;

/// Rounding step `epsilon` and value cap `h`.
///
/// Grid points are `k * epsilon` for `k = 0..=top_index()`; the top point is the
/// largest multiple of `epsilon` not exceeding `h`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    epsilon: f64,
    h: f64,
}

/// A grid point, stored as its integer multiple of `epsilon`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct GridValue(pub u32);

impl GridValue {
    pub fn index(self) -> u32 {
        self.0
    }
}

fn snapped_floor(x: f64) -> f64 {
    (x + SNAP * x.abs().max(1.0)).floor()
}

impl GridSpec {
    pub fn new(epsilon: f64, h: f64) -> Result<Self> {
        if !(epsilon.is_finite() && h.is_finite()) || epsilon <= 0.0 || h <= 0.0 {
            return Err(Error::config(format!(
                "grid needs finite epsilon > 0 and h > 0, got epsilon={epsilon}, h={h}"
            )));
        }
        if epsilon > h {
            return Err(Error::config(format!("grid needs epsilon <= h, got epsilon={epsilon}, h={h}")));
        }
        let top = snapped_floor(h / epsilon);
        if top > u32::MAX as f64 - 1.0 {
            return Err(Error::capacity("grid levels", top as u128, u32::MAX as u128));
        }
        Ok(GridSpec { epsilon, h })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// Index of the top grid point, `floor(h / epsilon)`.
    pub fn top_index(&self) -> u32 {
        snapped_floor(self.h / self.epsilon) as u32
    }

    /// Number of grid points in `[0, h]`.
    pub fn levels(&self) -> usize {
        self.top_index() as usize + 1
    }

    /// `ceil(h / epsilon)`, the cell count used by the sample-size bound.
    pub fn cell_count(&self) -> u64 {
        let x = self.h / self.epsilon;
        let floor = snapped_floor(x);
        if (x - floor).abs() <= SNAP * x.max(1.0) {
            floor as u64
        } else {
            floor as u64 + 1
        }
    }

    pub fn value<T: Scalar>(&self, g: GridValue) -> T {
        T::from_f64_lossy(self.epsilon) * T::from_usize_lossy(g.0 as usize)
    }

    pub fn value_f64(&self, g: GridValue) -> f64 {
        self.epsilon * g.0 as f64
    }

    /// Largest grid point not exceeding `v`.
    pub fn round_down(&self, v: f64) -> Result<GridValue> {
        if !v.is_finite() || v < 0.0 || v > self.h * (1.0 + SNAP) {
            return Err(Error::Domain {
                value: v,
                low: 0.0,
                high: self.h,
                context: "round_down".into(),
            });
        }
        let k = snapped_floor(v / self.epsilon).max(0.0) as u32;
        Ok(GridValue(k.min(self.top_index())))
    }

    /// The grid point equal to `v`, if `v` is one.
    pub fn exact_index(&self, v: f64) -> Option<GridValue> {
        let g = self.round_down(v).ok()?;
        let back = self.value_f64(g);
        ((back - v).abs() <= SNAP * self.epsilon.max(v.abs())).then_some(g)
    }

    pub fn contains(&self, g: GridValue) -> bool {
        g.0 <= self.top_index()
    }
}

/// Mixed-radix enumeration helper; the first digit is the most significant,
/// so enumeration order is lexicographic.
#[derive(Clone, Debug)]
pub struct Radix {
    sizes: Vec<usize>,
}

impl Radix {
    pub fn new(sizes: Vec<usize>) -> Self {
        Radix { sizes }
    }

    pub fn len(&self) -> usize {
        self.sizes.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Checked product, for budget guards.
    pub fn checked_len(&self) -> Option<u128> {
        self.sizes.iter().try_fold(1u128, |acc, &s| acc.checked_mul(s as u128))
    }

    pub fn encode(&self, digits: &[usize]) -> usize {
        digits
            .iter()
            .zip(&self.sizes)
            .fold(0, |acc, (&d, &s)| acc * s + d)
    }

    pub fn decode(&self, mut index: usize) -> Vec<usize> {
        let mut digits = vec![0; self.sizes.len()];
        for (slot, &s) in digits.iter_mut().zip(&self.sizes).rev() {
            *slot = index % s;
            index /= s;
        }
        digits
    }

    /// Advances `digits` in place; returns `false` after the last combination.
    pub fn step(&self, digits: &mut [usize]) -> bool {
        for pos in (0..digits.len()).rev() {
            digits[pos] += 1;
            if digits[pos] < self.sizes[pos] {
                return true;
            }
            digits[pos] = 0;
        }
        false
    }
}

/// The set of grid profiles a mechanism or prior lives on: a Cartesian product
/// of per-(bidder, parameter) coordinate lists.
///
/// Profiles are `n * m` grid indices laid out bidder-major (`i * m + j`).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Domain {
    n: usize,
    m: usize,
    coords: Vec<Vec<u32>>,
}

impl Domain {
    pub fn new(n: usize, m: usize, coords: Vec<Vec<u32>>) -> Result<Self> {
        if n == 0 || m == 0 {
            return Err(Error::usage("domain needs n >= 1 and m >= 1"));
        }
        if coords.len() != n * m {
            return Err(Error::usage(format!(
                "domain needs {} coordinate lists, got {}",
                n * m,
                coords.len()
            )));
        }
        for (cell, list) in coords.iter().enumerate() {
            if list.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::usage(format!("coordinate list {cell} is not strictly increasing")));
            }
        }
        Ok(Domain { n, m, coords })
    }

    /// Every grid profile in `[0, h]_eps^{n*m}`.
    pub fn full(grid: &GridSpec, n: usize, m: usize) -> Result<Self> {
        let all: Vec<u32> = (0..=grid.top_index()).collect();
        Domain::new(n, m, vec![all; n * m])
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn coords(&self) -> &[Vec<u32>] {
        &self.coords
    }

    pub fn coord(&self, bidder: usize, param: usize) -> &[u32] {
        &self.coords[bidder * self.m + param]
    }

    pub fn is_full(&self, grid: &GridSpec) -> bool {
        let levels = grid.levels();
        self.coords
            .iter()
            .all(|c| c.len() == levels && c.iter().enumerate().all(|(k, &g)| g as usize == k))
    }

    pub fn radix(&self) -> Radix {
        Radix::new(self.coords.iter().map(Vec::len).collect())
    }

    pub fn profile_count(&self) -> usize {
        self.radix().len()
    }

    pub fn checked_profile_count(&self) -> Option<u128> {
        self.radix().checked_len()
    }

    fn position(list: &[u32], g: u32) -> Option<usize> {
        list.binary_search(&g).ok()
    }

    /// Row index of a profile, or `None` if some coordinate is outside the domain.
    pub fn row_index(&self, profile: &[u32]) -> Option<usize> {
        if profile.len() != self.coords.len() {
            return None;
        }
        let mut index = 0usize;
        for (list, &g) in self.coords.iter().zip(profile) {
            index = index * list.len() + Self::position(list, g)?;
        }
        Some(index)
    }

    pub fn profile_at(&self, row: usize) -> Vec<u32> {
        self.radix()
            .decode(row)
            .into_iter()
            .zip(&self.coords)
            .map(|(d, list)| list[d])
            .collect()
    }

    pub fn contains(&self, profile: &[u32]) -> bool {
        self.row_index(profile).is_some()
    }

    fn bidder_radix(&self, k: usize) -> Radix {
        Radix::new((0..self.m).map(|j| self.coord(k, j).len()).collect())
    }

    pub fn bidder_type_count(&self, k: usize) -> usize {
        self.bidder_radix(k).len()
    }

    /// Types of bidder `k` in lexicographic order.
    pub fn bidder_types(&self, k: usize) -> Vec<Vec<u32>> {
        let radix = self.bidder_radix(k);
        (0..radix.len())
            .map(|t| {
                radix
                    .decode(t)
                    .into_iter()
                    .enumerate()
                    .map(|(j, d)| self.coord(k, j)[d])
                    .collect()
            })
            .collect()
    }

    /// Lexicographic position of a bidder type, if every coordinate is in the domain.
    pub fn bidder_type_index(&self, k: usize, t: &[u32]) -> Option<usize> {
        let mut index = 0usize;
        for (j, &g) in t.iter().enumerate() {
            let list = self.coord(k, j);
            index = index * list.len() + Self::position(list, g)?;
        }
        Some(index)
    }

    pub fn contains_type(&self, k: usize, t: &[u32]) -> bool {
        t.len() == self.m && self.bidder_type_index(k, t).is_some()
    }

    /// True if every coordinate list of `self` is contained in `other`'s.
    pub fn is_subset_of(&self, other: &Domain) -> bool {
        self.n == other.n
            && self.m == other.m
            && self
                .coords
                .iter()
                .zip(&other.coords)
                .all(|(a, b)| a.iter().all(|g| b.binary_search(g).is_ok()))
    }
}

/// Splits a profile into bidder `k`'s type and writes a replacement type back.
pub fn bidder_slice(profile: &[u32], m: usize, k: usize) -> &[u32] {
    &profile[k * m..(k + 1) * m]
}

pub fn set_bidder(profile: &mut [u32], m: usize, k: usize, t: &[u32]) {
    profile[k * m..(k + 1) * m].copy_from_slice(t);
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(eps: f64, h: f64) -> GridSpec {
        GridSpec::new(eps, h).unwrap()
    }

    #[test]
    fn round_down_examples() {
        let g = grid(0.25, 2.0);
        assert_eq!(g.round_down(0.0).unwrap(), GridValue(0));
        assert_eq!(g.round_down(0.75).unwrap(), GridValue(3));
        assert_eq!(g.value_f64(g.round_down(0.75).unwrap()), 0.75);
        // floor(74 / 25) = 2 in integer arithmetic
        assert_eq!(g.round_down(0.74).unwrap(), GridValue((74 / 25) as u32));
        assert_eq!(g.value_f64(GridValue(2)), 0.5);
    }

    #[test]
    fn round_down_rejects_out_of_range() {
        let g = grid(0.25, 2.0);
        for v in [-0.1, 2.5, f64::NAN, f64::INFINITY] {
            match g.round_down(v) {
                Err(Error::Domain { value, .. }) => assert!(value.is_nan() || value == v),
                other => panic!("expected domain error for {v}, got {other:?}"),
            }
        }
    }

    #[test]
    fn float_drift_does_not_move_grid_points() {
        let g = grid(0.1, 1.0);
        assert_eq!(g.round_down(0.3).unwrap(), GridValue(3));
        assert_eq!(g.round_down(0.7).unwrap(), GridValue(7));
        assert_eq!(g.top_index(), 10);
        assert_eq!(g.exact_index(0.3), Some(GridValue(3)));
        assert_eq!(g.exact_index(0.35), None);
    }

    #[test]
    fn partial_top_cell() {
        let g = grid(0.3, 1.0);
        assert_eq!(g.top_index(), 3);
        assert_eq!(g.levels(), 4);
        assert_eq!(g.cell_count(), 4);
        assert_eq!(g.round_down(1.0).unwrap(), GridValue(3));
        let exact = grid(0.25, 2.0);
        assert_eq!(exact.cell_count(), 8);
        assert_eq!(exact.levels(), 9);
    }

    #[test]
    fn rounding_brackets_every_lattice_point() {
        for (eps, h) in [(0.25, 2.0), (0.3, 1.0), (0.1, 1.0), (1.0, 3.0)] {
            let g = grid(eps, h);
            let steps = (h * 1000.0).round() as usize;
            for s in 0..=steps {
                let v = s as f64 / 1000.0;
                let r = g.round_down(v).unwrap();
                let low = g.value_f64(r);
                assert!(low <= v + 1e-12, "eps={eps} v={v} low={low}");
                if r.0 < g.top_index() {
                    assert!(v < low + eps - 1e-12, "eps={eps} v={v} low={low}");
                } else {
                    assert!(v <= h + 1e-12);
                }
            }
        }
    }

    #[test]
    fn grid_points_are_fixed_points() {
        let g = grid(0.1, 2.0);
        for k in 0..=g.top_index() {
            let v = g.value_f64(GridValue(k));
            assert_eq!(g.round_down(v).unwrap(), GridValue(k));
        }
    }

    #[test]
    fn invalid_grids() {
        assert!(GridSpec::new(0.0, 1.0).is_err());
        assert!(GridSpec::new(2.0, 1.0).is_err());
        assert!(GridSpec::new(0.5, -1.0).is_err());
    }

    #[test]
    fn domain_indexing_is_lexicographic() {
        let d = Domain::new(2, 1, vec![vec![1, 3], vec![0, 2, 4]]).unwrap();
        assert_eq!(d.profile_count(), 6);
        assert_eq!(d.row_index(&[1, 0]), Some(0));
        assert_eq!(d.row_index(&[1, 4]), Some(2));
        assert_eq!(d.row_index(&[3, 0]), Some(3));
        assert_eq!(d.row_index(&[2, 0]), None);
        for row in 0..d.profile_count() {
            assert_eq!(d.row_index(&d.profile_at(row)), Some(row));
        }
        assert_eq!(d.bidder_types(1), vec![vec![0], vec![2], vec![4]]);
    }

    #[test]
    fn radix_step_visits_everything_once() {
        let r = Radix::new(vec![2, 3, 2]);
        let mut digits = vec![0; 3];
        let mut seen = vec![digits.clone()];
        while r.step(&mut digits) {
            seen.push(digits.clone());
        }
        assert_eq!(seen.len(), 12);
        for (i, d) in seen.iter().enumerate() {
            assert_eq!(r.encode(d), i);
            assert_eq!(&r.decode(i), d);
        }
    }
}
