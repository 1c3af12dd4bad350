//! The index set `Λ_n = {1,…,n}^d` and its design points `i/n ∈ (0,1]^d`.
//!
//! Multi-indices are 1-based; the linear index is 0-based and follows the
//! lexicographic order (first coordinate slowest), so a `d = 2` lattice
//! stored linearly is a row-major image with `i_1` as the row.

use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Lattice {
    n: usize,
    d: usize,
    len: usize,
}

/// A point of `Λ_n`, coordinates in `1..=n`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MultiIndex(Vec<usize>);

impl MultiIndex {
    pub fn new(coords: Vec<usize>) -> Self {
        MultiIndex(coords)
    }

    pub fn coords(&self) -> &[usize] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// `|i − j| = max_ℓ |i_ℓ − j_ℓ|`.
    pub fn max_distance(&self, other: &MultiIndex) -> usize {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(&a, &b)| a.abs_diff(b))
            .max()
            .unwrap_or(0)
    }
}

impl From<Vec<usize>> for MultiIndex {
    fn from(v: Vec<usize>) -> Self {
        MultiIndex(v)
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (k, c) in self.0.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

impl Lattice {
    pub fn new(n: usize, d: usize) -> Result<Self> {
        if n == 0 || d == 0 {
            return Err(Error::param(format!(
                "lattice needs n >= 1 and d >= 1, got n={n}, d={d}"
            )));
        }
        let len = u32::try_from(d)
            .ok()
            .and_then(|e| n.checked_pow(e))
            .filter(|&l| l <= isize::MAX as usize / std::mem::size_of::<f64>())
            .ok_or(Error::Size { n, d })?;
        Ok(Lattice { n, d, len })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// Cardinality `n^d`.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, i: &MultiIndex) -> bool {
        i.dim() == self.d && i.coords().iter().all(|&c| (1..=self.n).contains(&c))
    }

    fn check(&self, i: &MultiIndex) -> Result<()> {
        if i.dim() != self.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                got: i.dim(),
            });
        }
        if !self.contains(i) {
            return Err(Error::IndexOutOfRange(format!("{i} not in {{1..{}}}^{}", self.n, self.d)));
        }
        Ok(())
    }

    pub fn linearize(&self, i: &MultiIndex) -> Result<usize> {
        self.check(i)?;
        Ok(i.coords().iter().fold(0, |acc, &c| acc * self.n + (c - 1)))
    }

    pub fn delinearize(&self, k: usize) -> Result<MultiIndex> {
        if k >= self.len {
            return Err(Error::IndexOutOfRange(format!("linear index {k} >= {}", self.len)));
        }
        let mut coords = vec![0; self.d];
        self.coords_of(k, &mut coords);
        Ok(MultiIndex(coords))
    }

    /// Writes the 1-based coordinates of linear index `k` into `out`.
    pub(crate) fn coords_of(&self, mut k: usize, out: &mut [usize]) {
        for c in out.iter_mut().rev() {
            *c = k % self.n + 1;
            k /= self.n;
        }
    }

    pub fn design_point(&self, i: &MultiIndex) -> Result<Vec<f64>> {
        self.check(i)?;
        let n = self.n as f64;
        Ok(i.coords().iter().map(|&c| c as f64 / n).collect())
    }

    /// Design point of the `k`-th index in lexicographic order.
    pub fn design_point_linear(&self, k: usize) -> Vec<f64> {
        let mut coords = vec![0; self.d];
        self.coords_of(k, &mut coords);
        let n = self.n as f64;
        coords.iter().map(|&c| c as f64 / n).collect()
    }

    /// All multi-indices in lexicographic order.
    pub fn indices(&self) -> impl Iterator<Item = MultiIndex> + '_ {
        (0..self.len).map(move |k| {
            let mut coords = vec![0; self.d];
            self.coords_of(k, &mut coords);
            MultiIndex(coords)
        })
    }

    /// Max-norm distance from `i` to the lattice boundary.
    pub fn boundary_distance(&self, i: &MultiIndex) -> usize {
        i.coords()
            .iter()
            .map(|&c| (c - 1).min(self.n - c))
            .min()
            .unwrap_or(0)
    }

    /// `Λ_n^N = {i ∈ Λ_n : d(i, ∂Λ_n) ≥ N}`, in lexicographic order.
    pub fn interior_indices(&self, margin: usize) -> Vec<MultiIndex> {
        let lo = margin + 1;
        let Some(hi) = self.n.checked_sub(margin) else {
            return Vec::new();
        };
        if lo > hi {
            return Vec::new();
        }
        let side = hi - lo + 1;
        let count = side.pow(self.d as u32);
        (0..count)
            .map(|mut k| {
                let mut coords = vec![0; self.d];
                for c in coords.iter_mut().rev() {
                    *c = lo + k % side;
                    k /= side;
                }
                MultiIndex(coords)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn mi(c: &[usize]) -> MultiIndex {
        MultiIndex::new(c.to_vec())
    }

    #[test]
    fn cardinality() {
        assert_eq!(Lattice::new(3, 2).unwrap().len(), 9);
        assert_eq!(Lattice::new(256, 2).unwrap().len(), 65536);
        let one = Lattice::new(1, 5).unwrap();
        assert_eq!(one.len(), 1);
        assert_eq!(one.indices().collect::<Vec<_>>(), vec![mi(&[1; 5])]);
    }

    #[test]
    fn overflow_is_size_error() {
        assert!(matches!(Lattice::new(1 << 20, 8), Err(Error::Size { .. })));
        assert!(Lattice::new(0, 2).is_err());
        assert!(Lattice::new(2, 0).is_err());
    }

    #[test]
    fn design_points() {
        let l = Lattice::new(4, 1).unwrap();
        assert_eq!(l.design_point(&mi(&[2])).unwrap(), vec![0.5]);
        let l = Lattice::new(4, 2).unwrap();
        assert_eq!(l.design_point(&mi(&[4, 4])).unwrap(), vec![1.0, 1.0]);
        let l = Lattice::new(256, 2).unwrap();
        assert_eq!(l.design_point(&mi(&[128, 64])).unwrap(), vec![0.5, 0.25]);
        assert!(l.design_point(&mi(&[0, 1])).is_err());
        assert!(l.design_point(&mi(&[257, 1])).is_err());
        assert!(l.design_point(&mi(&[1])).is_err());
    }

    #[test]
    fn interior_examples() {
        let l = Lattice::new(5, 1).unwrap();
        assert_eq!(l.interior_indices(1), vec![mi(&[2]), mi(&[3]), mi(&[4])]);
        assert!(l.interior_indices(3).is_empty());
        assert_eq!(l.interior_indices(0).len(), 5);
        let l = Lattice::new(5, 2).unwrap();
        assert_eq!(l.interior_indices(2), vec![mi(&[3, 3])]);
    }

    #[test]
    fn interior_count_matches_brute_force() {
        for d in 1..=3 {
            for n in 1..=10 {
                let l = Lattice::new(n, d).unwrap();
                for margin in 0..=6 {
                    let brute = l
                        .indices()
                        .filter(|i| l.boundary_distance(i) >= margin)
                        .collect::<Vec<_>>();
                    let fast = l.interior_indices(margin);
                    assert_eq!(fast, brute, "n={n} d={d} N={margin}");
                    assert_eq!(fast.len(), n.saturating_sub(2 * margin).pow(d as u32));
                }
            }
        }
    }

    #[test]
    fn linear_order_is_lexicographic() {
        let l = Lattice::new(4, 3).unwrap();
        let all: Vec<_> = l.indices().collect();
        assert!(all.windows(2).all(|w| w[0] < w[1]));
    }

    proptest! {
        #[test]
        fn linearization_round_trips(n in 1usize..12, d in 1usize..4, seed in 0usize..10_000) {
            let l = Lattice::new(n, d).unwrap();
            let k = seed % l.len();
            let i = l.delinearize(k).unwrap();
            prop_assert!(l.contains(&i));
            prop_assert_eq!(l.linearize(&i).unwrap(), k);
        }

        #[test]
        fn design_point_in_unit_cube(n in 1usize..300, c in 1usize..300) {
            let l = Lattice::new(n, 1).unwrap();
            let c = (c - 1) % n + 1;
            let x = l.design_point(&mi(&[c])).unwrap()[0];
            prop_assert!(x > 0.0 && x <= 1.0);
            if c < n {
                prop_assert!(l.design_point(&mi(&[c + 1])).unwrap()[0] > x);
            }
        }
    }
}
