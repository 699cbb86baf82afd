//! Gram data `g ↦ ⟨π(g)vᵢ, vⱼ⟩` of a finite family of vectors over a finite set of group elements.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::group::GroupElement;
use crate::rep::{max_abs, CMatrix, Representation};
use crate::vector::SparseVector;

/// The matrices `M[g]_{ij} = ⟨π(g)vᵢ, vⱼ⟩` for `g` in a finite list `F`.
#[derive(Clone, Debug, PartialEq)]
pub struct GramFunction {
    elements: Vec<GroupElement>,
    n: usize,
    matrices: Vec<CMatrix>,
}

impl GramFunction {
    /// Assembles Gram data from explicit matrices, one `n×n` matrix per element of `elements`.
    pub fn from_parts(elements: Vec<GroupElement>, matrices: Vec<CMatrix>) -> Result<Self> {
        if elements.is_empty() {
            return Err(Error::precondition("F is empty"));
        }
        if elements.len() != matrices.len() {
            return Err(Error::precondition(format!(
                "{} elements but {} matrices",
                elements.len(),
                matrices.len()
            )));
        }
        let n = matrices[0].nrows();
        if matrices.iter().any(|m| m.nrows() != n || m.ncols() != n) {
            return Err(Error::precondition(format!("Gram matrices must all be {n}×{n}")));
        }
        Ok(Self { elements, n, matrices })
    }

    pub fn elements(&self) -> &[GroupElement] {
        &self.elements
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn matrices(&self) -> &[CMatrix] {
        &self.matrices
    }

    pub fn matrix(&self, g: &GroupElement) -> Option<&CMatrix> {
        self.elements.iter().position(|x| x == g).map(|i| &self.matrices[i])
    }

    /// `max_{g,i,j} |M[g]_{ij} − N[g]_{ij}|`; both must be over the same `F` and `n`.
    pub fn max_abs_diff(&self, other: &GramFunction) -> Result<f64> {
        if self.elements != other.elements || self.n != other.n {
            return Err(Error::precondition("Gram functions are over different F or vector counts"));
        }
        Ok(self
            .matrices
            .iter()
            .zip(&other.matrices)
            .map(|(a, b)| max_abs(&(a - b)))
            .fold(0.0, f64::max))
    }

    /// Restriction to the elements selected by `keep`.
    pub fn restrict(&self, mut keep: impl FnMut(&GroupElement) -> bool) -> Result<GramFunction> {
        let (elements, matrices): (Vec<_>, Vec<_>) = self
            .elements
            .iter()
            .zip(&self.matrices)
            .filter(|(g, _)| keep(g))
            .map(|(g, m)| (g.clone(), m.clone()))
            .unzip();
        GramFunction::from_parts(elements, matrices)
    }

    /// `‖M[e] − M[e]*‖_max` plus the magnitude of the most negative eigenvalue of `M[e]`,
    /// or `None` when `e ∉ F`.
    pub fn identity_defect(&self, identity: &GroupElement) -> Option<f64> {
        let m = self.matrix(identity)?;
        let herm = max_abs(&(m - m.adjoint()));
        let sym = (m + m.adjoint()).scale(0.5);
        let min_eig = sym.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min);
        Some(herm + (-min_eig).max(0.0))
    }

    /// Worst `‖M[g⁻¹] − M[g]*‖_max` over pairs with both `g, g⁻¹ ∈ F`.
    pub fn inverse_defect(&self, invert: impl Fn(&GroupElement) -> Result<GroupElement>) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for (g, m) in self.elements.iter().zip(&self.matrices) {
            if let Some(mi) = self.matrix(&invert(g)?) {
                worst = worst.max(max_abs(&(mi - m.adjoint())));
            }
        }
        Ok(worst)
    }
}

/// `M[g]_{ij} = ⟨rep(g)vᵢ, vⱼ⟩` for `g ∈ elements`.
pub fn gram(rep: &Representation, vectors: &[SparseVector], elements: &[GroupElement]) -> Result<GramFunction> {
    if elements.is_empty() {
        return Err(Error::precondition("F is empty"));
    }
    for v in vectors {
        rep.check_vector(v)?;
    }
    let n = vectors.len();
    let mut matrices = Vec::with_capacity(elements.len());
    for g in elements {
        let images = vectors.iter().map(|v| rep.apply(g, v)).collect::<Result<Vec<_>>>()?;
        let mut m = CMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
        for (i, gv) in images.iter().enumerate() {
            for (j, w) in vectors.iter().enumerate() {
                m[(i, j)] = gv.inner(w);
            }
        }
        matrices.push(m);
    }
    Ok(GramFunction {
        elements: elements.to_vec(),
        n,
        matrices,
    })
}

/// `max_{g ∈ F, i, j} |target[g]_{ij} − ⟨rep(g)wᵢ, wⱼ⟩|`.
pub fn discrepancy(target: &GramFunction, rep: &Representation, witnesses: &[SparseVector]) -> Result<f64> {
    if witnesses.len() != target.n {
        return Err(Error::precondition(format!(
            "{} witnesses for a target with {} vectors",
            witnesses.len(),
            target.n
        )));
    }
    target.max_abs_diff(&gram(rep, witnesses, &target.elements)?)
}
