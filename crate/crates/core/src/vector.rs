//! Finitely supported vectors in `l²(G)`, its multiples and finite-dimensional blocks.

use std::collections::btree_map::{self, Entry};
use std::collections::{BTreeMap, BTreeSet};
use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;

use crate::group::GroupElement;

/// Position of a basis vector inside one block of a representation.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Site {
    /// `δ_g` in a copy of the regular representation.
    Element(GroupElement),
    /// The `i`-th standard basis vector of a finite-dimensional block.
    Coord(usize),
}

/// A basis vector of the ambient space: block (copy) index plus site.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Key {
    pub block: usize,
    pub site: Site,
}

impl Key {
    pub fn element(block: usize, g: GroupElement) -> Self {
        Key {
            block,
            site: Site::Element(g),
        }
    }

    pub fn coord(block: usize, i: usize) -> Self {
        Key {
            block,
            site: Site::Coord(i),
        }
    }
}

/// A finitely supported vector, stored as an ordered map from basis keys to amplitudes.
///
/// Amplitudes are stored exactly as given; [`prune`](Self::prune) removes small entries on request.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SparseVector {
    entries: BTreeMap<Key, Complex64>,
}

impl SparseVector {
    pub fn zero() -> Self {
        Self::default()
    }

    /// `δ_g` in regular copy `block`.
    pub fn delta(block: usize, g: GroupElement) -> Self {
        Self::from_entries([(Key::element(block, g), Complex64::new(1.0, 0.0))])
    }

    /// Standard basis vector `e_i` of finite-dimensional block `block`.
    pub fn basis(block: usize, i: usize) -> Self {
        Self::from_entries([(Key::coord(block, i), Complex64::new(1.0, 0.0))])
    }

    /// A vector of block `block` from dense coordinates; zero coordinates are not stored.
    pub fn from_coords(block: usize, coords: &[Complex64]) -> Self {
        Self::from_entries(
            coords
                .iter()
                .enumerate()
                .filter(|(_, a)| **a != Complex64::new(0.0, 0.0))
                .map(|(i, a)| (Key::coord(block, i), *a)),
        )
    }

    /// Builds a vector, summing amplitudes of repeated keys.
    pub fn from_entries(entries: impl IntoIterator<Item = (Key, Complex64)>) -> Self {
        let mut v = Self::zero();
        for (k, a) in entries {
            v.add_at(k, a);
        }
        v
    }

    pub fn get(&self, key: &Key) -> Complex64 {
        self.entries.get(key).copied().unwrap_or_default()
    }

    pub fn add_at(&mut self, key: Key, amplitude: Complex64) {
        match self.entries.entry(key) {
            Entry::Occupied(mut e) => {
                *e.get_mut() += amplitude;
            }
            Entry::Vacant(e) => {
                e.insert(amplitude);
            }
        }
    }

    pub fn iter(&self) -> btree_map::Iter<'_, Key, Complex64> {
        self.entries.iter()
    }

    pub fn keys(&self) -> impl Iterator<Item = &Key> {
        self.entries.keys()
    }

    /// Number of stored entries.
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// True when every stored amplitude is exactly zero.
    pub fn is_zero(&self) -> bool {
        self.entries.values().all(|a| *a == Complex64::new(0.0, 0.0))
    }

    pub fn norm_sqr(&self) -> f64 {
        self.entries.values().fold(0.0, |s, a| s + a.norm_sqr())
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// `⟨self, other⟩ = Σ self_k · conj(other_k)`, linear in the first argument.
    pub fn inner(&self, other: &SparseVector) -> Complex64 {
        if self.len() <= other.len() {
            self.entries
                .iter()
                .filter_map(|(k, a)| other.entries.get(k).map(|b| a * b.conj()))
                .sum()
        } else {
            other
                .entries
                .iter()
                .filter_map(|(k, b)| self.entries.get(k).map(|a| a * b.conj()))
                .sum()
        }
    }

    pub fn scale(&self, c: Complex64) -> SparseVector {
        SparseVector {
            entries: self.entries.iter().map(|(k, a)| (k.clone(), a * c)).collect(),
        }
    }

    /// `self += c · x`
    pub fn axpy(&mut self, c: Complex64, x: &SparseVector) {
        for (k, a) in &x.entries {
            self.add_at(k.clone(), c * a);
        }
    }

    /// Removes entries with modulus strictly below `tol`.
    pub fn prune(&mut self, tol: f64) {
        self.entries.retain(|_, a| a.norm() >= tol);
    }

    /// Block indices carrying at least one stored entry.
    pub fn blocks(&self) -> BTreeSet<usize> {
        self.entries.keys().map(|k| k.block).collect()
    }

    /// Entries whose block satisfies `keep`.
    pub fn restrict(&self, mut keep: impl FnMut(usize) -> bool) -> SparseVector {
        SparseVector {
            entries: self
                .entries
                .iter()
                .filter(|(k, _)| keep(k.block))
                .map(|(k, a)| (k.clone(), *a))
                .collect(),
        }
    }

    /// Relabels blocks through `f`; `f` must be injective on the stored blocks.
    pub fn map_blocks(&self, mut f: impl FnMut(usize) -> usize) -> SparseVector {
        SparseVector {
            entries: self
                .entries
                .iter()
                .map(|(k, a)| {
                    (
                        Key {
                            block: f(k.block),
                            site: k.site.clone(),
                        },
                        *a,
                    )
                })
                .collect(),
        }
    }

    pub fn max_abs_diff(&self, other: &SparseVector) -> f64 {
        let mut worst: f64 = 0.0;
        for (k, a) in &self.entries {
            worst = worst.max((a - other.get(k)).norm());
        }
        for (k, b) in &other.entries {
            if !self.entries.contains_key(k) {
                worst = worst.max(b.norm());
            }
        }
        worst
    }
}

impl FromIterator<(Key, Complex64)> for SparseVector {
    fn from_iter<I: IntoIterator<Item = (Key, Complex64)>>(iter: I) -> Self {
        Self::from_entries(iter)
    }
}

impl Add for &SparseVector {
    type Output = SparseVector;

    fn add(self, rhs: &SparseVector) -> SparseVector {
        let mut out = self.clone();
        out.axpy(Complex64::new(1.0, 0.0), rhs);
        out
    }
}

impl Sub for &SparseVector {
    type Output = SparseVector;

    fn sub(self, rhs: &SparseVector) -> SparseVector {
        let mut out = self.clone();
        out.axpy(Complex64::new(-1.0, 0.0), rhs);
        out
    }
}

impl Mul<Complex64> for &SparseVector {
    type Output = SparseVector;

    fn mul(self, rhs: Complex64) -> SparseVector {
        self.scale(rhs)
    }
}

impl Mul<f64> for &SparseVector {
    type Output = SparseVector;

    fn mul(self, rhs: f64) -> SparseVector {
        self.scale(Complex64::new(rhs, 0.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn z(k: i64) -> GroupElement {
        GroupElement::vector(&[k])
    }

    #[test]
    fn deltas() {
        let d0 = SparseVector::delta(0, z(0));
        let d1 = SparseVector::delta(0, z(1));
        assert_eq!(d0.inner(&d0), Complex64::new(1.0, 0.0));
        assert_eq!(d0.inner(&d1), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn conjugate_symmetric() {
        let i = Complex64::new(0.0, 1.0);
        let u = SparseVector::from_entries([(Key::coord(0, 0), i), (Key::coord(0, 1), Complex64::new(2.0, 0.0))]);
        let v = SparseVector::from_entries([(Key::coord(0, 0), Complex64::new(1.0, 1.0))]);
        assert_eq!(u.inner(&v), v.inner(&u).conj());
        assert_eq!(u.inner(&v), i * Complex64::new(1.0, -1.0));
    }

    #[test]
    fn pythagoras_across_blocks() {
        let u = SparseVector::from_coords(0, &[Complex64::new(3.0, 0.0)]);
        let v = SparseVector::from_coords(1, &[Complex64::new(0.0, 4.0)]);
        let s = &u + &v;
        assert_eq!(s.norm_sqr(), 25.0);
        assert_eq!(u.inner(&v), Complex64::new(0.0, 0.0));
    }
}
