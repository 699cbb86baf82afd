//! Amalgamation of two finite-dimensional extensions over a common subrepresentation.
//!
//! Given isometric equivariant inclusions `ι_ρ : π → ρ` and `ι_η : π → η`,
//! the amalgam is `π ⊕ ρ′ ⊕ η′` where `ρ′` and `η′` are the restrictions to
//! the orthogonal complements of the images. A vector `x ∈ ρ` is sent to
//! `(ι_ρ* x, Q_ρ* x, 0)` with `Q_ρ` an orthonormal basis of the complement.

use std::sync::Arc;

use nalgebra::DVector;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::group::GroupOracle;
use crate::rep::{max_abs, CMatrix, MatrixRep, Representation};
use crate::subspace::Subspace;
use crate::vector::{Key, SparseVector};

/// Tolerance on invariance and equivariance of the inclusions.
pub const INVARIANCE_TOL: f64 = 1e-8;

/// The amalgam and the isometric embeddings of both factors.
#[derive(Clone, Debug)]
pub struct Amalgam {
    pub rep: Representation,
    pub dim_pi: usize,
    pub dim_rho_complement: usize,
    pub dim_eta_complement: usize,
    /// `dim × dim ρ` matrix of the embedding of `ρ`, in dense bases.
    pub rho_map: CMatrix,
    /// `dim × dim η` matrix of the embedding of `η`.
    pub eta_map: CMatrix,
    rho_keys: Vec<Key>,
    eta_keys: Vec<Key>,
}

impl Amalgam {
    pub fn dim(&self) -> usize {
        self.dim_pi + self.dim_rho_complement + self.dim_eta_complement
    }

    /// Image of a vector of `ρ`.
    pub fn embed_rho(&self, v: &SparseVector) -> Result<SparseVector> {
        Ok(from_dense(&(&self.rho_map * to_dense(&self.rho_keys, v)?)))
    }

    /// Image of a vector of `η`.
    pub fn embed_eta(&self, v: &SparseVector) -> Result<SparseVector> {
        Ok(from_dense(&(&self.eta_map * to_dense(&self.eta_keys, v)?)))
    }
}

fn dense_keys(rep: &Representation, name: &str) -> Result<Vec<Key>> {
    rep.dense_basis()
        .ok_or_else(|| Error::precondition(format!("{name} must be finite-dimensional")))
}

fn to_dense(keys: &[Key], v: &SparseVector) -> Result<DVector<Complex64>> {
    let mut x = DVector::zeros(keys.len());
    for (k, a) in v.iter() {
        let i = keys
            .binary_search(k)
            .map_err(|_| Error::structural(format!("vector entry {k:?} is outside the representation")))?;
        x[i] = *a;
    }
    Ok(x)
}

fn from_dense(x: &DVector<Complex64>) -> SparseVector {
    SparseVector::from_coords(0, x.as_slice())
}

/// One factor after validation: generator matrices, inclusion and complement.
struct Factor {
    keys: Vec<Key>,
    gens: Vec<CMatrix>,
    iota: CMatrix,
    complement: CMatrix,
}

fn factor(
    name: &str,
    oracle: &Arc<GroupOracle>,
    dpi: usize,
    pi_gens: &[CMatrix],
    rep: &Representation,
    embedding: &Subspace,
) -> Result<Factor> {
    if **rep.oracle() != **oracle {
        return Err(Error::structural(format!("{name} uses a different group")));
    }
    let mut keys = dense_keys(rep, name)?;
    keys.sort();
    let d = keys.len();
    if embedding.dim() != dpi {
        return Err(Error::precondition(format!(
            "the inclusion into {name} lists {} images for a {dpi}-dimensional π",
            embedding.dim()
        )));
    }
    for b in embedding.basis() {
        rep.check_vector(b)?;
    }
    let cols = embedding
        .basis()
        .iter()
        .map(|b| to_dense(&keys, b))
        .collect::<Result<Vec<_>>>()?;
    let iota = if cols.is_empty() { CMatrix::zeros(d, 0) } else { CMatrix::from_columns(&cols) };
    let letters = oracle.presentation_generators();
    let mut gens = Vec::with_capacity(letters.len());
    let projector = &iota * iota.adjoint();
    for (s, (letter, p)) in letters.iter().zip(pi_gens).enumerate() {
        let u = dense_in(rep, &keys, letter)?;
        let image = &u * &iota;
        let invariance = max_abs(&(&image - &projector * &image));
        if invariance > INVARIANCE_TOL {
            return Err(Error::precondition(format!(
                "image of π in {name} is not invariant: generator {s} ({}) moves it by {invariance:.3e}",
                oracle.format_element(letter)
            )));
        }
        let equivariance = max_abs(&(&image - &iota * p));
        if equivariance > INVARIANCE_TOL {
            return Err(Error::precondition(format!(
                "inclusion into {name} is not equivariant: generator {s} ({}) defect {equivariance:.3e}",
                oracle.format_element(letter)
            )));
        }
        gens.push(u);
    }
    let complement = complement_basis(&iota, d)?;
    Ok(Factor {
        keys,
        gens,
        iota,
        complement,
    })
}

fn dense_in(rep: &Representation, keys: &[Key], g: &crate::group::GroupElement) -> Result<CMatrix> {
    let mut m = CMatrix::zeros(keys.len(), keys.len());
    for (j, k) in keys.iter().enumerate() {
        let col = rep.apply(g, &SparseVector::from_entries([(k.clone(), Complex64::new(1.0, 0.0))]))?;
        m.set_column(j, &to_dense(keys, &col)?);
    }
    Ok(m)
}

/// Orthonormal basis of the complement of `span(iota)` in `ℂ^d`, by Gram–Schmidt
/// of the standard basis with re-orthogonalization.
fn complement_basis(iota: &CMatrix, d: usize) -> Result<CMatrix> {
    let want = d - iota.ncols();
    let mut basis: Vec<DVector<Complex64>> = iota.column_iter().map(|c| c.into_owned()).collect();
    let start = basis.len();
    for i in 0..d {
        if basis.len() - start == want {
            break;
        }
        let mut v = DVector::<Complex64>::zeros(d);
        v[i] = Complex64::new(1.0, 0.0);
        for _ in 0..2 {
            for b in &basis {
                let c = b.dotc(&v);
                v -= b * c;
            }
        }
        let n = v.norm();
        if n > 1e-6 {
            basis.push(v / Complex64::new(n, 0.0));
        }
    }
    if basis.len() - start != want {
        return Err(Error::Structural("could not complete the inclusion to a unitary basis".into()));
    }
    Ok(if want == 0 {
        CMatrix::zeros(d, 0)
    } else {
        CMatrix::from_columns(&basis[start..])
    })
}

/// `π ⊕ ρ′ ⊕ η′` with the canonical embeddings of `ρ` and `η`.
///
/// `rho_embedding.basis()[k]` is the image in `ρ` of the `k`-th dense basis
/// vector of `π` (see [`Representation::dense_basis`]); likewise for `η`.
pub fn amalgamate(
    pi: &Representation,
    rho: &Representation,
    rho_embedding: &Subspace,
    eta: &Representation,
    eta_embedding: &Subspace,
) -> Result<Amalgam> {
    let oracle = pi.oracle().clone();
    let pi_keys = dense_keys(pi, "π")?;
    let letters = oracle.presentation_generators();
    let pi_gens = letters.iter().map(|s| pi.dense_matrix(s)).collect::<Result<Vec<_>>>()?;
    let dpi = pi_keys.len();
    let r = factor("ρ", &oracle, dpi, &pi_gens, rho, rho_embedding)?;
    let e = factor("η", &oracle, dpi, &pi_gens, eta, eta_embedding)?;
    let dr = r.complement.ncols();
    let de = e.complement.ncols();
    let n = dpi + dr + de;
    if n == 0 {
        return Err(Error::precondition("amalgam of zero-dimensional representations"));
    }

    let mut gens = Vec::with_capacity(letters.len());
    for (s, p) in pi_gens.iter().enumerate() {
        let mut m = CMatrix::zeros(n, n);
        m.view_mut((0, 0), (dpi, dpi)).copy_from(p);
        let rr = r.complement.adjoint() * &r.gens[s] * &r.complement;
        m.view_mut((dpi, dpi), (dr, dr)).copy_from(&rr);
        let ee = e.complement.adjoint() * &e.gens[s] * &e.complement;
        m.view_mut((dpi + dr, dpi + dr), (de, de)).copy_from(&ee);
        gens.push(m);
    }
    let rep = Representation::matrix(MatrixRep::new(oracle, gens, vec![])?);

    let mut rho_map = CMatrix::zeros(n, r.keys.len());
    rho_map.view_mut((0, 0), (dpi, r.keys.len())).copy_from(&r.iota.adjoint());
    rho_map.view_mut((dpi, 0), (dr, r.keys.len())).copy_from(&r.complement.adjoint());
    let mut eta_map = CMatrix::zeros(n, e.keys.len());
    eta_map.view_mut((0, 0), (dpi, e.keys.len())).copy_from(&e.iota.adjoint());
    eta_map.view_mut((dpi + dr, 0), (de, e.keys.len())).copy_from(&e.complement.adjoint());

    Ok(Amalgam {
        rep,
        dim_pi: dpi,
        dim_rho_complement: dr,
        dim_eta_complement: de,
        rho_map,
        eta_map,
        rho_keys: r.keys,
        eta_keys: e.keys,
    })
}

/// `max |⟨x, y⟩ − ⟨J x, J y⟩|` over the dense basis: zero for an isometry.
pub fn isometry_defect(map: &CMatrix) -> f64 {
    max_abs(&(map.adjoint() * map - CMatrix::identity(map.ncols(), map.ncols())))
}
