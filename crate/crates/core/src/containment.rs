//! `(ε, F)`-containment: witness search, Følner witnesses and witness transfer.
//!
//! A Gram target `M` over `F` is `(ε, F)`-contained in `π` when there are
//! vectors `w₁, …, wₙ` of `π` with `|M[g]ᵢⱼ − ⟨π(g)wᵢ, wⱼ⟩| < ε` for all
//! `g ∈ F`. Gram data and the discrepancy itself live in [`crate::gram`].

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use nalgebra::{DMatrix, DVector};
use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::amenability::compressed_markov;
use crate::eigen::largest_eigenpair;
use crate::error::{Error, Result};
use crate::gram::{discrepancy, gram, GramFunction};
use crate::group::{ball, GroupElement, GroupKind, GroupOracle};
use crate::rep::{CMatrix, CopyAllocator, Leaf, Representation};
use crate::subspace::Subspace;
use crate::vector::{Key, Site, SparseVector};
use crate::Caps;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Witnesses found for a Gram target.
#[derive(Clone, Debug)]
pub struct WitnessReport {
    pub witnesses: Vec<SparseVector>,
    /// Max-abs deviation of the witnesses' Gram function from the target.
    pub discrepancy: f64,
    /// Gram function of the witnesses over the target's `F`.
    pub witness_gram: GramFunction,
    pub iterations: usize,
    pub converged: bool,
    /// Restart that produced the witnesses.
    pub restart: usize,
}

/// Parameters of [`search_witness`].
#[derive(Clone, Debug)]
pub struct SearchOptions {
    pub tol: f64,
    /// Damped Gauss–Newton steps per restart.
    pub budget: usize,
    pub seed: u64,
    pub restarts: usize,
    /// Candidate witnesses, projected onto the basis and tried after the random restarts.
    pub warm_start: Option<Vec<SparseVector>>,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            budget: 2000,
            seed: 0,
            restarts: 8,
            warm_start: None,
        }
    }
}

/// The Gram target of one invariant unit vector: `M[g] = (1)` for every `g ∈ F`.
pub fn trivial_target(elements: &[GroupElement]) -> Result<GramFunction> {
    GramFunction::from_parts(
        elements.to_vec(),
        vec![CMatrix::from_element(1, 1, ONE); elements.len()],
    )
}

/// `{e} ∪ S`, the usual `F` for trivial targets.
pub fn identity_and_generators(oracle: &GroupOracle) -> Vec<GroupElement> {
    let mut f = vec![oracle.identity()];
    f.extend(oracle.generators().iter().cloned());
    f
}

/// δ-vectors on `B_r` in each of the given regular blocks of `rep`.
pub fn default_basis(rep: &Representation, r: usize, blocks: &[usize], caps: &Caps) -> Result<Subspace> {
    let b = ball(rep.oracle(), r, caps.ball)?;
    let mut basis = Vec::with_capacity(b.len() * blocks.len());
    for &block in blocks {
        match rep.leaf(block) {
            Some(Leaf::Regular(_)) => {}
            _ => return Err(Error::precondition(format!("block {block} is not a regular copy"))),
        }
        basis.extend(b.elements().iter().map(|x| SparseVector::delta(block, x.clone())));
    }
    if basis.len() > caps.closure_dim {
        return Err(Error::Resource {
            cap: "closure-dim",
            limit: caps.closure_dim,
            detail: format!("ball basis with {} vectors", basis.len()),
        });
    }
    Ok(Subspace::from_orthonormal(basis).expect("distinct deltas are orthonormal"))
}

/// Lower bound on the trivial-target discrepancy over `F ⊇ {e} ∪ S` for
/// witnesses supported on `B_r` in any number of regular copies:
/// `(1 − μ_r)/(1 + μ_r)` with `μ_r` the top eigenvalue of the Markov
/// operator compressed to `B_r`.
///
/// The eigenvalue is computed from below, so the value is rounded up by the
/// eigen-residual before use.
pub fn trivial_target_lower_bound(oracle: &GroupOracle, r: usize, caps: &Caps) -> Result<f64> {
    let b = ball(oracle, r, caps.ball)?;
    let m = compressed_markov(oracle, &b)?;
    let mut shifted = m.clone();
    for i in 0..b.len() {
        shifted.add(i, i, 1.0);
    }
    let pair = largest_eigenpair(&shifted, 1e-10, 200_000)?;
    let mu = (pair.value - 1.0 + pair.residual).min(1.0);
    Ok((1.0 - mu) / (1.0 + mu))
}

/// `T[k, l]` as nonzero triplets.
#[derive(Clone, Debug)]
struct SparseTensor {
    k: usize,
    entries: Vec<(usize, usize, Complex64)>,
}

impl SparseTensor {
    /// `C T`.
    fn left(&self, c: &CMatrix) -> CMatrix {
        let mut out = CMatrix::zeros(c.nrows(), self.k);
        for &(k, l, t) in &self.entries {
            for a in 0..c.nrows() {
                out[(a, l)] += c[(a, k)] * t;
            }
        }
        out
    }

    /// `T C^H`.
    fn right_adjoint(&self, c: &CMatrix) -> CMatrix {
        let mut out = CMatrix::zeros(self.k, c.nrows());
        for &(k, l, t) in &self.entries {
            for b in 0..c.nrows() {
                out[(k, b)] += t * c[(b, l)].conj();
            }
        }
        out
    }
}

/// Ball Gram tensors `T_g[k, l] = ⟨π(g)b_k, b_l⟩`.
fn basis_tensors(pi: &Representation, basis: &[SparseVector], elements: &[GroupElement]) -> Result<Vec<SparseTensor>> {
    let k = basis.len();
    let mut owners: HashMap<&Key, Vec<(usize, Complex64)>> = HashMap::new();
    for (l, b) in basis.iter().enumerate() {
        for (key, a) in b.iter() {
            owners.entry(key).or_default().push((l, a.conj()));
        }
    }
    elements
        .iter()
        .map(|g| {
            let rows = basis
                .par_iter()
                .map(|b| {
                    let mut row: BTreeMap<usize, Complex64> = BTreeMap::new();
                    for (key, a) in pi.apply(g, b)?.iter() {
                        if let Some(list) = owners.get(key) {
                            for &(l, c) in list {
                                *row.entry(l).or_insert(ZERO) += a * c;
                            }
                        }
                    }
                    Ok(row)
                })
                .collect::<Result<Vec<_>>>()?;
            let entries = rows
                .into_iter()
                .enumerate()
                .flat_map(|(i, row)| row.into_iter().filter(|(_, v)| *v != ZERO).map(move |(j, v)| (i, j, v)))
                .collect();
            Ok(SparseTensor { k, entries })
        })
        .collect()
}

struct Objective<'a> {
    tensors: &'a [SparseTensor],
    targets: &'a [CMatrix],
}

impl Objective<'_> {
    /// Residuals `R_g = C T_g C^H − M_g`.
    fn residuals(&self, c: &CMatrix) -> Vec<CMatrix> {
        let ch = c.adjoint();
        self.tensors
            .iter()
            .zip(self.targets)
            .map(|(t, m)| t.left(c) * &ch - m)
            .collect()
    }

    fn value(r: &[CMatrix]) -> f64 {
        r.iter().map(|x| x.norm_squared()).sum()
    }

    fn max_abs(r: &[CMatrix]) -> f64 {
        r.iter()
            .flat_map(|x| x.iter().map(|z| z.norm()))
            .fold(0.0, f64::max)
    }

    /// Real Jacobian of the stacked `(Re, Im)` residual entries with respect to
    /// the stacked `(Re, Im)` coefficients, using
    /// `dR_g = dC T_g C^H + C T_g dC^H`.
    fn jacobian(&self, c: &CMatrix) -> DMatrix<f64> {
        let (n, k) = c.shape();
        let mut jac = DMatrix::zeros(2 * n * n * self.tensors.len(), 2 * n * k);
        for (gi, t) in self.tensors.iter().enumerate() {
            let p = t.right_adjoint(c);
            let q = t.left(c);
            let base = gi * 2 * n * n;
            for i in 0..n {
                for kk in 0..k {
                    for (zi, z) in [(0, ONE), (1, Complex64::new(0.0, 1.0))] {
                        let col = 2 * (i * k + kk) + zi;
                        for m in 0..n {
                            // row i: dC_{ik} z (T C^H)_{k,m}; column i: (C T)_{m,k} conj(z)
                            let mut put = |a: usize, b: usize, v: Complex64| {
                                let row = base + 2 * (a * n + b);
                                jac[(row, col)] += v.re;
                                jac[(row + 1, col)] += v.im;
                            };
                            put(i, m, z * p[(kk, m)]);
                            put(m, i, q[(m, kk)] * z.conj());
                        }
                    }
                }
            }
        }
        jac
    }

    fn stack(r: &[CMatrix]) -> DVector<f64> {
        let n = r[0].nrows();
        let mut out = DVector::zeros(2 * n * n * r.len());
        for (gi, m) in r.iter().enumerate() {
            for a in 0..n {
                for b in 0..n {
                    let row = gi * 2 * n * n + 2 * (a * n + b);
                    out[row] = m[(a, b)].re;
                    out[row + 1] = m[(a, b)].im;
                }
            }
        }
        out
    }
}

struct RunResult {
    coeffs: CMatrix,
    max_abs: f64,
    value: f64,
    iterations: usize,
}

/// Rescales `C ↦ √u·C` to minimize the max-abs residual, which is convex in `u`.
fn polish_scale(obj: &Objective<'_>, run: RunResult) -> RunResult {
    let r = obj.residuals(&run.coeffs);
    let grams: Vec<CMatrix> = r.iter().zip(obj.targets).map(|(x, m)| x + m).collect();
    let at = |u: f64| -> f64 {
        grams
            .iter()
            .zip(obj.targets)
            .flat_map(|(g, m)| g.iter().zip(m.iter()).map(move |(a, b)| (a * u - b).norm()))
            .fold(0.0, f64::max)
    };
    let (mut lo, mut hi) = (0.0, 4.0);
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..100 {
        let a = hi - phi * (hi - lo);
        let b = lo + phi * (hi - lo);
        if at(a) <= at(b) {
            hi = b;
        } else {
            lo = a;
        }
    }
    let u = (lo + hi) / 2.0;
    if at(u) >= run.max_abs {
        return run;
    }
    let coeffs = &run.coeffs * Complex64::new(u.sqrt(), 0.0);
    let r = obj.residuals(&coeffs);
    RunResult {
        max_abs: Objective::max_abs(&r),
        value: Objective::value(&r),
        coeffs,
        iterations: run.iterations,
    }
}

/// Levenberg–Marquardt in residual space: `δ = −Jᵀ (J Jᵀ + μI)⁻¹ r`,
/// which needs one small solve per step however large the basis is.
fn descend(obj: &Objective<'_>, mut c: CMatrix, tol: f64, budget: usize) -> RunResult {
    let (n, k) = c.shape();
    let mut r = obj.residuals(&c);
    let mut f = Objective::value(&r);
    let mut jac = obj.jacobian(&c);
    let mut jjt = &jac * jac.transpose();
    let mut mu = 1e-3 * jjt.diagonal().max().max(1e-12);
    let mut iterations = 0;
    let mut stalled = 0;
    while iterations < budget && Objective::max_abs(&r) > tol {
        iterations += 1;
        let rv = Objective::stack(&r);
        let mut a = jjt.clone();
        for i in 0..a.nrows() {
            a[(i, i)] += mu;
        }
        let Some(chol) = a.cholesky() else {
            mu *= 4.0;
            continue;
        };
        let delta = -(jac.transpose() * chol.solve(&rv));
        let trial = &c + CMatrix::from_fn(n, k, |i, kk| Complex64::new(delta[2 * (i * k + kk)], delta[2 * (i * k + kk) + 1]));
        let rt = obj.residuals(&trial);
        let ft = Objective::value(&rt);
        if ft.is_finite() && ft < f {
            stalled = if f - ft <= 1e-14 * f { stalled + 1 } else { 0 };
            c = trial;
            r = rt;
            f = ft;
            jac = obj.jacobian(&c);
            jjt = &jac * jac.transpose();
            mu = (mu / 3.0).max(1e-15);
            if stalled >= 10 {
                break;
            }
        } else {
            mu *= 4.0;
            if mu > 1e20 {
                break;
            }
        }
    }
    RunResult {
        max_abs: Objective::max_abs(&r),
        value: f,
        coeffs: c,
        iterations,
    }
}

/// Searches `span(basis)` for witnesses of `target` in `pi`.
///
/// Minimizes `Σ_{g,i,j} |Δ_{g,ij}|²` over coefficient matrices by damped
/// Gauss–Newton steps from seeded random starts, then rescales each result
/// to minimize the true max-abs discrepancy. Restarts run in parallel and the best by max-abs
/// discrepancy wins, ties going to the lowest restart index.
pub fn search_witness(
    target: &GramFunction,
    pi: &Representation,
    basis: &Subspace,
    opts: &SearchOptions,
) -> Result<WitnessReport> {
    if basis.dim() == 0 {
        return Err(Error::precondition("witness basis is empty"));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::precondition("tol must be positive"));
    }
    if opts.restarts == 0 {
        return Err(Error::precondition("at least one restart is required"));
    }
    for g in target.elements() {
        pi.oracle().check(g)?;
    }
    for b in basis.basis() {
        pi.check_vector(b)?;
    }
    let tensors = basis_tensors(pi, basis.basis(), target.elements())?;
    let obj = Objective {
        tensors: &tensors,
        targets: target.matrices(),
    };
    let n = target.n();
    let k = basis.dim();
    let scales: Vec<f64> = match target.matrix(&pi.oracle().identity()) {
        Some(m) => (0..n).map(|i| m[(i, i)].re.max(0.0).sqrt()).collect(),
        None => vec![1.0; n],
    };
    if let Some(w) = &opts.warm_start {
        if w.len() != n {
            return Err(Error::precondition(format!("warm start has {} vectors, target needs {n}", w.len())));
        }
    }
    let mut runs: Vec<RunResult> = (0..opts.restarts)
        .into_par_iter()
        .map(|restart| {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            rng.set_stream(restart as u64);
            let norm = (2.0 * k as f64).sqrt();
            let c = CMatrix::from_fn(n, k, |i, _| {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                Complex64::new(re, im) * (scales[i] / norm)
            });
            polish_scale(&obj, descend(&obj, c, opts.tol, opts.budget))
        })
        .collect();
    if let Some(w) = &opts.warm_start {
        let coords: Vec<Vec<Complex64>> = w.iter().map(|v| basis.coordinates(v)).collect();
        let c = CMatrix::from_fn(n, k, |i, kk| coords[i][kk]);
        let r = obj.residuals(&c);
        let start = RunResult {
            max_abs: Objective::max_abs(&r),
            value: Objective::value(&r),
            coeffs: c.clone(),
            iterations: 0,
        };
        runs.push(if start.max_abs <= opts.tol {
            start
        } else {
            polish_scale(&obj, descend(&obj, c, opts.tol, opts.budget))
        });
    }
    let (restart, best) = runs
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1.max_abs, a.1.value).partial_cmp(&(b.1.max_abs, b.1.value)).expect("finite"))
        .expect("at least one restart");
    let witnesses: Vec<SparseVector> = (0..n)
        .map(|i| {
            let mut w = SparseVector::zero();
            for (kk, b) in basis.basis().iter().enumerate() {
                let c = best.coeffs[(i, kk)];
                if c != ZERO {
                    w.axpy(c, b);
                }
            }
            w
        })
        .collect();
    let witness_gram = gram(pi, &witnesses, target.elements())?;
    let disc = target.max_abs_diff(&witness_gram)?;
    Ok(WitnessReport {
        witnesses,
        discrepancy: disc,
        witness_gram,
        iterations: best.iterations,
        converged: disc <= opts.tol,
        restart,
    })
}

/// A normalized indicator `χ_Φ/√|Φ|` with its exactly computed defect.
#[derive(Clone, Debug)]
pub struct FolnerWitness {
    pub vector: SparseVector,
    /// Side `N` of the box `[0, N)` in the free coordinates, when the group is infinite.
    pub side: Option<u64>,
    /// `|Φ|`.
    pub size: usize,
    /// `max_{g ∈ F} ‖λ(g)w − w‖² = max_g 2(1 − |gΦ ∩ Φ|/|Φ|)`, exact.
    pub defect: BigRational,
}

impl FolnerWitness {
    pub fn defect_f64(&self) -> f64 {
        self.defect.to_f64().expect("finite")
    }
}

/// A Følner witness in copy 0 of `λ_G` with `max_{g ∈ F} ‖λ(g)w − w‖² ≤ eps`.
///
/// Finite groups get the normalized constant vector. Finitely generated
/// abelian groups get the box `[0, N)` in every free coordinate times the full
/// torsion part, with the least `N` meeting the bound.
pub fn folner_witness(oracle: &GroupOracle, elements: &[GroupElement], eps: f64, caps: &Caps) -> Result<FolnerWitness> {
    if !(eps > 0.0) {
        return Err(Error::precondition("eps must be positive"));
    }
    for g in elements {
        oracle.check(g)?;
    }
    let (phi, side) = match oracle.kind() {
        GroupKind::FiniteTable(t) => {
            if t.order() > caps.support {
                return Err(support_error(caps, t.order()));
            }
            ((0..t.order()).map(GroupElement::Index).collect::<Vec<_>>(), None)
        }
        GroupKind::Abelian { torsion } => {
            let bound = BigRational::from_float(eps).expect("finite eps");
            let mut n: u64 = 1;
            loop {
                if box_defect(torsion, n, elements) <= bound {
                    break;
                }
                n += 1;
            }
            (abelian_box(torsion, n, caps)?, torsion.contains(&0).then_some(n))
        }
        other => {
            return Err(Error::Unsupported(format!(
                "no Følner witness construction for {} groups",
                other.name()
            )))
        }
    };
    let defect = exact_defect(oracle, &phi, elements)?;
    if defect > BigRational::from_float(eps).expect("finite eps") {
        return Err(Error::Structural(format!("Følner box fails its own bound: {defect}")));
    }
    let amp = Complex64::new(1.0 / (phi.len() as f64).sqrt(), 0.0);
    Ok(FolnerWitness {
        size: phi.len(),
        vector: SparseVector::from_entries(phi.into_iter().map(|x| (Key::element(0, x), amp))),
        side,
        defect,
    })
}

fn support_error(caps: &Caps, size: usize) -> Error {
    Error::Resource {
        cap: "support",
        limit: caps.support,
        detail: format!("Følner set of {size} elements"),
    }
}

/// Defect of the box of side `n` from the product formula `Π (n − |gᵢ|)⁺ / n` over free coordinates.
fn box_defect(torsion: &[u64], n: u64, elements: &[GroupElement]) -> BigRational {
    let mut worst = BigRational::zero();
    for g in elements {
        let GroupElement::Vector(v) = g else { continue };
        let mut num = BigInt::from(1);
        let mut den = BigInt::from(1);
        for (x, &t) in v.iter().zip(torsion) {
            if t == 0 {
                num *= BigInt::from(n.saturating_sub(x.unsigned_abs()));
                den *= BigInt::from(n);
            }
        }
        let d = (BigRational::from_integer(1.into()) - BigRational::new(num, den)) * BigRational::from_integer(2.into());
        if d > worst {
            worst = d;
        }
    }
    worst
}

fn abelian_box(torsion: &[u64], n: u64, caps: &Caps) -> Result<Vec<GroupElement>> {
    let size = torsion
        .iter()
        .map(|&t| if t == 0 { n as u128 } else { t as u128 })
        .try_fold(1u128, |acc, x| acc.checked_mul(x))
        .unwrap_or(u128::MAX);
    if size > caps.support as u128 {
        return Err(support_error(caps, size.min(usize::MAX as u128) as usize));
    }
    let mut coords: Vec<Vec<i64>> = vec![vec![]];
    for &t in torsion {
        let range = if t == 0 { n } else { t } as i64;
        coords = coords
            .into_iter()
            .flat_map(|c| {
                (0..range).map(move |x| {
                    let mut c = c.clone();
                    c.push(x);
                    c
                })
            })
            .collect();
    }
    Ok(coords.into_iter().map(GroupElement::Vector).collect())
}

/// `max_g 2(1 − |gΦ ∩ Φ|/|Φ|)` by set membership.
fn exact_defect(oracle: &GroupOracle, phi: &[GroupElement], elements: &[GroupElement]) -> Result<BigRational> {
    let set: HashSet<&GroupElement> = phi.iter().collect();
    let mut worst = BigRational::zero();
    for g in elements {
        let mut overlap = 0usize;
        for x in phi {
            if set.contains(&oracle.multiply(g, x)?) {
                overlap += 1;
            }
        }
        let d = BigRational::new(BigInt::from(2 * (phi.len() - overlap)), BigInt::from(phi.len()));
        if d > worst {
            worst = d;
        }
    }
    Ok(worst)
}

/// A vector of an extension `ρ = η ⊕ σ`, split into its `η` and `σ` parts.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SplitVector {
    pub eta: SparseVector,
    pub complement: SparseVector,
}

/// Output of [`transfer_witness`].
#[derive(Clone, Debug)]
pub struct TransferReport {
    /// `vᵢ′ = uᵢ + wᵢ′` in `η`, one per target.
    pub witnesses: Vec<SparseVector>,
    /// Max-abs deviation over `F` between the Gram data of `params ++ targets` in `ρ`
    /// and of `params ++ witnesses` in `η`.
    pub discrepancy: f64,
    pub target_gram: GramFunction,
    pub witness_gram: GramFunction,
    /// Largest `|⟨η(g)x, wⱼ′⟩|` over `g ∈ F`, `x` a parameter or a kept part `uᵢ`.
    pub cross_term: f64,
    /// Fresh regular copies of `η` that received the moved parts.
    pub fresh_copies: Vec<usize>,
    /// Side of the Følner box used for finite-dimensional complement blocks.
    pub folner: Option<FolnerWitness>,
}

/// Moves targets of an extension `ρ = η ⊕ σ` into `η = π ⊕ ∞λ_G`.
///
/// Each target `vᵢ = uᵢ + wᵢ` keeps its `η`-part `uᵢ`; the complement part
/// `wᵢ ∈ σ` is copied into regular copies of `η` that no parameter or `uᵢ`
/// touches. Regular blocks of `σ` are relabeled, which is exact. A
/// finite-dimensional block is absorbed into `dim` fresh copies through
/// `x ↦ (h ↦ χ_Φ(h) σ(h)⁻¹x / √|Φ|)` for a Følner set `Φ`, which scales
/// `⟨σ(g)x, y⟩` by `|gΦ ∩ Φ|/|Φ|`.
pub fn transfer_witness(
    eta: &Representation,
    sigma: &Representation,
    params: &[SparseVector],
    targets: &[SplitVector],
    elements: &[GroupElement],
    eps: f64,
    caps: &Caps,
) -> Result<TransferReport> {
    if !(eps > 0.0) {
        return Err(Error::precondition("eps must be positive"));
    }
    let oracle = eta.oracle().clone();
    if **sigma.oracle() != *oracle {
        return Err(Error::structural("η and σ use different groups"));
    }
    if !matches!(oracle.kind(), GroupKind::FiniteTable(_) | GroupKind::Abelian { .. }) {
        return Err(Error::Unsupported(format!(
            "witness transfer needs an amenable oracle kind; got {}",
            oracle.kind().name()
        )));
    }
    if eta.blocks().is_some() {
        return Err(Error::precondition("η must end in an infinite multiple of the regular representation"));
    }
    let sigma_blocks = sigma
        .blocks()
        .ok_or_else(|| Error::precondition("the complement σ must have finitely many blocks"))?;
    for p in params {
        eta.check_vector(p)?;
    }
    for t in targets {
        eta.check_vector(&t.eta)?;
        sigma.check_vector(&t.complement)?;
    }

    let used: Vec<&SparseVector> = params.iter().chain(targets.iter().map(|t| &t.eta)).collect();
    let mut alloc = CopyAllocator::new(eta, used.iter().copied(), caps.copies)?;
    let touched: BTreeSet<usize> = targets.iter().flat_map(|t| t.complement.blocks()).collect();

    let max_norm_sq = targets.iter().map(|t| t.complement.norm_sqr()).fold(0.0, f64::max);
    let needs_folner = touched.iter().any(|&b| !matches!(sigma.leaf(b), Some(Leaf::Regular(_))));
    let folner = if needs_folner {
        // the absorbed Gram entries are off by at most (defect/2)·‖x‖‖y‖
        let eps_f = eps / max_norm_sq.max(f64::MIN_POSITIVE);
        Some(folner_witness(&oracle, elements, eps_f.min(2.0), caps)?)
    } else {
        None
    };

    let mut fresh_copies = Vec::new();
    let mut moved: Vec<SparseVector> = vec![SparseVector::zero(); targets.len()];
    for b in 0..sigma_blocks {
        if !touched.contains(&b) {
            continue;
        }
        let leaf = sigma.leaf(b).expect("block in range");
        match leaf {
            Leaf::Regular(_) => {
                let copy = alloc.fresh()?;
                fresh_copies.push(copy);
                for (t, out) in targets.iter().zip(moved.iter_mut()) {
                    let part = t.complement.restrict(|x| x == b).map_blocks(|_| copy);
                    *out = &*out + &part;
                }
            }
            Leaf::Trivial(_) | Leaf::Matrix(_) => {
                let dim = leaf.dim().expect("finite block");
                let copies = (0..dim).map(|_| alloc.fresh()).collect::<Result<Vec<_>>>()?;
                fresh_copies.extend(&copies);
                let f = folner.as_ref().expect("Følner set computed");
                let phi: Vec<&GroupElement> = f
                    .vector
                    .keys()
                    .map(|k| match &k.site {
                        Site::Element(g) => g,
                        Site::Coord(_) => unreachable!("Følner vectors live in a regular block"),
                    })
                    .collect();
                let amp = 1.0 / (phi.len() as f64).sqrt();
                for (t, out) in targets.iter().zip(moved.iter_mut()) {
                    let x = t.complement.restrict(|blk| blk == b);
                    if x.is_zero() {
                        continue;
                    }
                    let mut entries = Vec::new();
                    for h in &phi {
                        let y = sigma.apply(&oracle.invert(h)?, &x)?;
                        for (key, a) in y.iter() {
                            let Site::Coord(i) = key.site else { unreachable!() };
                            entries.push((Key::element(copies[i], (*h).clone()), a * amp));
                        }
                    }
                    *out = &*out + &SparseVector::from_entries(entries);
                }
            }
        }
    }

    let witnesses: Vec<SparseVector> = targets.iter().zip(&moved).map(|(t, w)| &t.eta + w).collect();

    let zero = SparseVector::zero();
    let eta_parts: Vec<SparseVector> = params.iter().cloned().chain(targets.iter().map(|t| t.eta.clone())).collect();
    let sigma_parts: Vec<SparseVector> = params
        .iter()
        .map(|_| zero.clone())
        .chain(targets.iter().map(|t| t.complement.clone()))
        .collect();
    let g_eta = gram(eta, &eta_parts, elements)?;
    let g_sigma = gram(sigma, &sigma_parts, elements)?;
    let target_gram = GramFunction::from_parts(
        elements.to_vec(),
        g_eta.matrices().iter().zip(g_sigma.matrices()).map(|(a, b)| a + b).collect(),
    )?;
    let all: Vec<SparseVector> = params.iter().cloned().chain(witnesses.iter().cloned()).collect();
    let witness_gram = gram(eta, &all, elements)?;
    let disc = target_gram.max_abs_diff(&witness_gram)?;

    let mut cross_term: f64 = 0.0;
    for g in elements {
        for x in params.iter().chain(targets.iter().map(|t| &t.eta)) {
            let gx = eta.apply(g, x)?;
            for w in &moved {
                cross_term = cross_term.max(gx.inner(w).norm());
            }
        }
    }

    Ok(TransferReport {
        witnesses,
        discrepancy: disc,
        target_gram,
        witness_gram,
        cross_term,
        fresh_copies,
        folner,
    })
}

/// Recomputes a witness report's discrepancy from its witnesses.
pub fn reverify(target: &GramFunction, pi: &Representation, report: &WitnessReport) -> Result<f64> {
    discrepancy(target, pi, &report.witnesses)
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::rep::MatrixRep;

    fn zk(k: i64) -> GroupElement {
        GroupElement::vector(&[k])
    }

    fn caps() -> Caps {
        Caps::default()
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let z = Arc::new(GroupOracle::integer_lattice(1));
        let lam = Representation::regular(z.clone());
        let basis = default_basis(&lam, 2, &[0], &caps()).unwrap();
        let f = vec![zk(0), zk(1), zk(-2)];
        let tensors = basis_tensors(&lam, basis.basis(), &f).unwrap();
        let target = gram(&lam, &[SparseVector::delta(0, zk(0)), SparseVector::delta(0, zk(1))], &f).unwrap();
        let obj = Objective {
            tensors: &tensors,
            targets: target.matrices(),
        };
        let c = CMatrix::from_fn(2, 5, |i, j| Complex64::new(0.1 * (i + 2 * j) as f64 - 0.3, 0.05 * (j as f64 - i as f64)));
        let jac = obj.jacobian(&c);
        let h = 1e-6;
        for i in 0..2 {
            for j in 0..5 {
                for (zi, dir) in [(0, ONE), (1, Complex64::new(0.0, 1.0))] {
                    let mut d = CMatrix::zeros(2, 5);
                    d[(i, j)] = dir * h;
                    let rp = Objective::stack(&obj.residuals(&(&c + &d)));
                    let rm = Objective::stack(&obj.residuals(&(&c - &d)));
                    let numeric = (rp - rm) / (2.0 * h);
                    let col = jac.column(2 * (i * 5 + j) + zi);
                    assert!((numeric - col).amax() < 1e-7);
                }
            }
        }
    }

    #[test]
    fn realizable_target_is_found() {
        let z = Arc::new(GroupOracle::integer_lattice(1));
        let lam = Representation::regular(z);
        let v = vec![
            SparseVector::delta(0, zk(0)),
            &SparseVector::delta(0, zk(1)) * Complex64::new(0.0, 1.0),
        ];
        let f = vec![zk(-1), zk(0), zk(1), zk(2)];
        let target = gram(&lam, &v, &f).unwrap();
        let basis = default_basis(&lam, 3, &[0], &caps()).unwrap();
        let rep = search_witness(&target, &lam, &basis, &SearchOptions::default()).unwrap();
        assert!(rep.converged && rep.discrepancy <= 1e-6, "{}", rep.discrepancy);
        assert!((reverify(&target, &lam, &rep).unwrap() - rep.discrepancy).abs() <= 1e-12);
    }

    #[test]
    fn warm_start_on_own_witnesses_is_exact() {
        let f2 = Arc::new(GroupOracle::free(2));
        let lam = Representation::regular(f2.clone());
        let v = vec![SparseVector::from_entries([
            (Key::element(0, GroupElement::word(&[1])), Complex64::new(0.6, 0.0)),
            (Key::element(0, GroupElement::word(&[2, -1])), Complex64::new(0.0, 0.8)),
        ])];
        let target = gram(&lam, &v, &identity_and_generators(&f2)).unwrap();
        let basis = default_basis(&lam, 2, &[0], &caps()).unwrap();
        let opts = SearchOptions {
            restarts: 2,
            warm_start: Some(v.clone()),
            ..SearchOptions::default()
        };
        let rep = search_witness(&target, &lam, &basis, &opts).unwrap();
        assert_eq!(rep.discrepancy, 0.0);
        assert_eq!(rep.restart, 2);
        assert_eq!(rep.witnesses, v);
    }

    #[test]
    fn integers_almost_invariant_vector() {
        let z = Arc::new(GroupOracle::integer_lattice(1));
        let lam = Representation::regular(z.clone());
        let target = trivial_target(&identity_and_generators(&z)).unwrap();
        let basis = default_basis(&lam, 40, &[0], &caps()).unwrap();
        let opts = SearchOptions {
            tol: 0.05,
            ..SearchOptions::default()
        };
        let rep = search_witness(&target, &lam, &basis, &opts).unwrap();
        assert!(rep.discrepancy <= 0.05, "{}", rep.discrepancy);
    }

    #[test]
    fn free_group_stays_above_bound() {
        let f2 = Arc::new(GroupOracle::free(2));
        let lam = Representation::regular(f2.clone());
        let bound = trivial_target_lower_bound(&f2, 5, &caps()).unwrap();
        assert!((bound - 0.1137).abs() < 1e-3, "{bound}");
        let target = trivial_target(&identity_and_generators(&f2)).unwrap();
        let basis = default_basis(&lam, 5, &[0], &caps()).unwrap();
        for seed in [0, 1] {
            let opts = SearchOptions {
                seed,
                tol: 1e-3,
                budget: 500,
                restarts: 2,
                ..SearchOptions::default()
            };
            let rep = search_witness(&target, &lam, &basis, &opts).unwrap();
            assert!(rep.discrepancy >= bound - 1e-9);
            // the scale polish balances |‖w‖² − 1| against 1 − ⟨λ(s)w, w⟩, which attains the bound
            assert!(rep.discrepancy < bound + 1e-3, "{} vs {bound}", rep.discrepancy);
            assert!(!rep.converged);
        }
    }

    #[test]
    fn search_is_deterministic() {
        let z = Arc::new(GroupOracle::integer_lattice(1));
        let lam = Representation::regular(z.clone());
        let target = trivial_target(&identity_and_generators(&z)).unwrap();
        let basis = default_basis(&lam, 6, &[0], &caps()).unwrap();
        let opts = SearchOptions {
            seed: 7,
            budget: 100,
            ..SearchOptions::default()
        };
        let a = search_witness(&target, &lam, &basis, &opts).unwrap();
        let b = search_witness(&target, &lam, &basis, &opts).unwrap();
        assert_eq!(a.witnesses, b.witnesses);
        assert_eq!(a.restart, b.restart);
    }

    #[test]
    fn empty_basis_rejected() {
        let z = Arc::new(GroupOracle::integer_lattice(1));
        let lam = Representation::regular(z.clone());
        let target = trivial_target(&[zk(1)]).unwrap();
        let err = search_witness(&target, &lam, &Subspace::zero(), &SearchOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Precondition(_)));
    }

    #[test]
    fn folner_examples() {
        let z = GroupOracle::integer_lattice(1);
        let w = folner_witness(&z, &[zk(1)], 0.2, &caps()).unwrap();
        assert_eq!(w.side, Some(10));
        assert_eq!(w.defect, BigRational::new(1.into(), 5.into()));

        let z2 = GroupOracle::integer_lattice(2);
        let f = vec![GroupElement::vector(&[1, 0]), GroupElement::vector(&[0, 1])];
        let w = folner_witness(&z2, &f, 0.1, &caps()).unwrap();
        assert_eq!(w.side, Some(20));
        assert_eq!(w.defect, BigRational::new(1.into(), 10.into()));

        let c5 = GroupOracle::cyclic(5);
        let w = folner_witness(&c5, &[GroupElement::Index(2)], 1e-9, &caps()).unwrap();
        assert!(w.defect.is_zero());
        assert_eq!(w.size, 5);

        let mixed = GroupOracle::abelian(vec![0, 3]).unwrap();
        let w = folner_witness(&mixed, &[GroupElement::vector(&[0, 1]), GroupElement::vector(&[1, 0])], 0.5, &caps()).unwrap();
        assert_eq!((w.side, w.size), (Some(4), 12));

        let err = folner_witness(&GroupOracle::free(2), &[GroupElement::word(&[1])], 0.1, &caps()).unwrap_err();
        assert!(matches!(err, Error::Unsupported(_)));
    }

    #[test]
    fn folner_defect_matches_sparse_norm() {
        let z = Arc::new(GroupOracle::integer_lattice(1));
        let lam = Representation::regular(z.clone());
        let w = folner_witness(&z, &[zk(1), zk(-3)], 0.05, &caps()).unwrap();
        for g in [zk(1), zk(-3)] {
            let d = (&lam.apply(&g, &w.vector).unwrap() - &w.vector).norm_sqr();
            assert!(d <= w.defect_f64() + 1e-12);
        }
    }

    fn eta_z() -> (Arc<GroupOracle>, Representation) {
        let z = Arc::new(GroupOracle::integer_lattice(1));
        let eta = Representation::with_regular_tail(Representation::trivial(z.clone(), 1)).unwrap();
        (z, eta)
    }

    #[test]
    fn transfer_unchanged_inside_eta() {
        let (z, eta) = eta_z();
        let sigma = Representation::regular(z);
        let params = vec![SparseVector::delta(1, zk(0))];
        let t = SplitVector {
            eta: &SparseVector::basis(0, 0) + &SparseVector::delta(1, zk(3)),
            complement: SparseVector::zero(),
        };
        let rep = transfer_witness(&eta, &sigma, &params, std::slice::from_ref(&t), &[zk(0), zk(1)], 0.01, &caps()).unwrap();
        assert_eq!(rep.witnesses, vec![t.eta]);
        assert_eq!(rep.discrepancy, 0.0);
        assert!(rep.fresh_copies.is_empty());
    }

    #[test]
    fn transfer_regular_complement_is_exact() {
        let (z, eta) = eta_z();
        let sigma = Representation::regular(z);
        let params = vec![SparseVector::delta(1, zk(0))];
        let t = SplitVector {
            eta: SparseVector::zero(),
            complement: &SparseVector::delta(0, zk(0)) + &SparseVector::delta(0, zk(1)),
        };
        let f = vec![zk(-1), zk(0), zk(1), zk(2)];
        let rep = transfer_witness(&eta, &sigma, &params, &[t], &f, 1e-3, &caps()).unwrap();
        assert_eq!(rep.discrepancy, 0.0);
        assert_eq!(rep.fresh_copies, vec![2]);
        assert_eq!(rep.cross_term, 0.0);
    }

    #[test]
    fn transfer_mixed_parts_with_fell_absorption() {
        let (z, eta) = eta_z();
        // σ = a rotation character ⊕ trivial(1)
        let theta = 0.7f64;
        let rot = MatrixRep::new(
            z.clone(),
            vec![CMatrix::from_element(1, 1, Complex64::from_polar(1.0, theta))],
            vec![],
        )
        .unwrap();
        let sigma = Representation::direct_sum(vec![Representation::matrix(rot), Representation::trivial(z.clone(), 1)]).unwrap();
        let params = vec![SparseVector::delta(1, zk(0)), SparseVector::basis(0, 0)];
        let targets = vec![
            SplitVector {
                eta: SparseVector::delta(1, zk(2)),
                complement: &SparseVector::basis(0, 0) + &SparseVector::basis(1, 0),
            },
            SplitVector {
                eta: SparseVector::delta(2, zk(0)),
                complement: &SparseVector::basis(1, 0) * Complex64::new(0.0, 0.5),
            },
        ];
        let f = vec![zk(-1), zk(0), zk(1)];
        let rep = transfer_witness(&eta, &sigma, &params, &targets, &f, 0.05, &caps()).unwrap();
        assert!(rep.discrepancy <= 0.05, "{}", rep.discrepancy);
        assert_eq!(rep.cross_term, 0.0);
        assert!(rep.fresh_copies.iter().all(|&c| c >= 3));
        let direct = rep.target_gram.max_abs_diff(&gram(&eta, &[params, rep.witnesses.clone()].concat(), &f).unwrap()).unwrap();
        assert_eq!(direct, rep.discrepancy);
    }

    #[test]
    fn transfer_rejects_free_groups() {
        let f2 = Arc::new(GroupOracle::free(2));
        let eta = Representation::with_regular_tail(Representation::trivial(f2.clone(), 1)).unwrap();
        let sigma = Representation::trivial(f2, 1);
        let err = transfer_witness(&eta, &sigma, &[], &[], &[GroupElement::word(&[1])], 0.1, &caps()).unwrap_err();
        assert!(matches!(err, Error::Unsupported(_)));
    }
}
