//! Finite-dimensional subspaces given by orthonormal bases of sparse vectors.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::vector::SparseVector;

/// Orthonormality tolerance for stored bases.
pub const ORTHONORMAL_TOL: f64 = 1e-10;
/// Residual norm below which a vector counts as linearly dependent.
pub const DEPENDENCE_TOL: f64 = 1e-10;

/// The span of an orthonormal list of vectors.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Subspace {
    basis: Vec<SparseVector>,
}

impl Subspace {
    pub fn zero() -> Self {
        Self::default()
    }

    /// Wraps a basis after checking `⟨bᵢ, bⱼ⟩ = δᵢⱼ` within [`ORTHONORMAL_TOL`].
    pub fn from_orthonormal(basis: Vec<SparseVector>) -> Result<Self> {
        for i in 0..basis.len() {
            for j in 0..=i {
                let want = if i == j { 1.0 } else { 0.0 };
                let got = basis[i].inner(&basis[j]);
                if (got - Complex64::new(want, 0.0)).norm() > ORTHONORMAL_TOL {
                    return Err(Error::precondition(format!(
                        "basis is not orthonormal: ⟨b{i}, b{j}⟩ = {got}"
                    )));
                }
            }
        }
        Ok(Self { basis })
    }

    /// Orthonormalizes `vectors` in order (modified Gram–Schmidt, applied twice),
    /// dropping those whose residual norm is below [`DEPENDENCE_TOL`].
    pub fn span(vectors: impl IntoIterator<Item = SparseVector>, cap: usize) -> Result<Self> {
        let mut s = Self::zero();
        for v in vectors {
            s.extend(&v, cap)?;
        }
        Ok(s)
    }

    /// Adds `v` to the spanning set. Returns the new basis vector, if any.
    pub fn extend(&mut self, v: &SparseVector, cap: usize) -> Result<Option<&SparseVector>> {
        let r = self.residual_twice(v);
        let norm = r.norm();
        if norm < DEPENDENCE_TOL {
            return Ok(None);
        }
        if self.basis.len() >= cap {
            return Err(Error::Resource {
                cap: "closure-dim",
                limit: cap,
                detail: "subspace dimension".into(),
            });
        }
        let mut q = r.scale(Complex64::new(1.0 / norm, 0.0));
        q.prune(0.0);
        self.basis.push(q);
        Ok(self.basis.last())
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[SparseVector] {
        &self.basis
    }

    pub fn into_basis(self) -> Vec<SparseVector> {
        self.basis
    }

    /// Orthogonal projection `P v = Σ ⟨v, bₖ⟩ bₖ`.
    pub fn project(&self, v: &SparseVector) -> SparseVector {
        let mut p = SparseVector::zero();
        for b in &self.basis {
            let c = v.inner(b);
            if c != Complex64::new(0.0, 0.0) {
                p.axpy(c, b);
            }
        }
        p
    }

    /// `v − P v`.
    pub fn residual(&self, v: &SparseVector) -> SparseVector {
        let mut r = v.clone();
        for b in &self.basis {
            let c = r.inner(b);
            if c != Complex64::new(0.0, 0.0) {
                r.axpy(-c, b);
            }
        }
        r
    }

    fn residual_twice(&self, v: &SparseVector) -> SparseVector {
        let r = self.residual(v);
        self.residual(&r)
    }

    /// Coefficients `⟨v, bₖ⟩`.
    pub fn coordinates(&self, v: &SparseVector) -> Vec<Complex64> {
        self.basis.iter().map(|b| v.inner(b)).collect()
    }

    /// Largest deviation of the basis Gram matrix from the identity.
    pub fn orthonormality_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.basis.len() {
            for j in 0..=i {
                let want = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((self.basis[i].inner(&self.basis[j]) - Complex64::new(want, 0.0)).norm());
            }
        }
        worst
    }
}
