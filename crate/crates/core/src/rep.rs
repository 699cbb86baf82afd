//! Unitary representations: regular, trivial, finite-dimensional matrix, direct sums and multiples.
//!
//! Every representation is laid out as a sequence of *blocks*. A block is a
//! copy of the regular representation (indexed by group elements) or a
//! finite-dimensional space (indexed by coordinates). The block index is the
//! copy-index used in vector literals. An infinite multiple can only be the
//! last summand, so blocks are numbered consistently.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::group::{GroupElement, GroupKind, GroupOracle};
use crate::vector::{Key, Site, SparseVector};

/// Maximum deviation `‖U*U − I‖_max` accepted for a generator matrix.
pub const UNITARY_TOL: f64 = 1e-10;
/// Maximum deviation accepted when checking relations and homomorphism consistency.
pub const RELATION_TOL: f64 = 1e-8;

pub type CMatrix = DMatrix<Complex64>;

/// How many copies a [`Representation::Multiple`] holds.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Multiplicity {
    Finite(usize),
    /// `ℵ₀` copies, materialized lazily.
    Infinite,
}

/// A finite-dimensional unitary representation given by generator matrices.
#[derive(Clone, Debug, PartialEq)]
pub struct MatrixRep {
    oracle: Arc<GroupOracle>,
    dim: usize,
    generators: Vec<CMatrix>,
    relations: Vec<Vec<i32>>,
    /// Images of all elements, for finite-table oracles.
    table_images: Option<Vec<CMatrix>>,
}

impl MatrixRep {
    /// Validates unitarity of each generator and the defining relations of the group.
    ///
    /// `generators` are indexed like [`GroupOracle::presentation_generators`].
    /// `relations` are extra words (free and rewriting kinds) that must act as the identity.
    pub fn new(oracle: Arc<GroupOracle>, generators: Vec<CMatrix>, relations: Vec<Vec<i32>>) -> Result<Self> {
        let letters = oracle.presentation_generators();
        if generators.len() != letters.len() {
            return Err(Error::precondition(format!(
                "matrix representation needs {} generator matrices, got {}",
                letters.len(),
                generators.len()
            )));
        }
        let dim = generators.first().map_or(0, |m| m.nrows());
        for (i, u) in generators.iter().enumerate() {
            if u.nrows() != dim || u.ncols() != dim {
                return Err(Error::precondition(format!("generator matrix {i} is not {dim}×{dim}")));
            }
            let defect = max_abs(&(u.adjoint() * u - CMatrix::identity(dim, dim)));
            if defect > UNITARY_TOL {
                return Err(Error::precondition(format!(
                    "generator matrix {i} is not unitary: ‖U*U − I‖_max = {defect:.3e}"
                )));
            }
        }
        let mut rep = Self {
            oracle,
            dim,
            generators,
            relations,
            table_images: None,
        };
        rep.check_relations()?;
        Ok(rep)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn oracle(&self) -> &Arc<GroupOracle> {
        &self.oracle
    }

    pub fn generators(&self) -> &[CMatrix] {
        &self.generators
    }

    pub fn relations(&self) -> &[Vec<i32>] {
        &self.relations
    }

    fn check_relations(&mut self) -> Result<()> {
        let id = CMatrix::identity(self.dim, self.dim);
        match self.oracle.kind().clone() {
            GroupKind::FiniteTable(table) => {
                let n = table.order();
                let mut images: Vec<Option<CMatrix>> = vec![None; n];
                let e = table.identity();
                images[e] = Some(id.clone());
                let gens: Vec<(usize, CMatrix)> = self
                    .oracle
                    .generators()
                    .iter()
                    .zip(&self.generators)
                    .flat_map(|(g, u)| {
                        let GroupElement::Index(s) = g else { unreachable!() };
                        let inv = self.oracle.invert(g).expect("table element");
                        let GroupElement::Index(si) = inv else { unreachable!() };
                        [(*s, u.clone()), (si, u.adjoint())]
                    })
                    .collect();
                let mut queue = vec![e];
                let mut head = 0;
                while head < queue.len() {
                    let x = queue[head];
                    head += 1;
                    let ux = images[x].clone().expect("visited");
                    for (s, us) in &gens {
                        let y = table.rows()[x][*s];
                        let uy = &ux * us;
                        match &images[y] {
                            Some(existing) => {
                                let d = max_abs(&(existing - &uy));
                                if d > RELATION_TOL {
                                    return Err(Error::precondition(format!(
                                        "generator matrices do not define a homomorphism (defect {d:.3e} at element {y})"
                                    )));
                                }
                            }
                            None => {
                                images[y] = Some(uy);
                                queue.push(y);
                            }
                        }
                    }
                }
                if queue.len() != n {
                    return Err(Error::precondition("generators do not generate the finite group"));
                }
                self.table_images = Some(images.into_iter().map(|m| m.expect("reached")).collect());
            }
            GroupKind::Abelian { torsion } => {
                for i in 0..self.generators.len() {
                    for j in 0..i {
                        let (a, b) = (&self.generators[i], &self.generators[j]);
                        let d = max_abs(&(a * b - b * a));
                        if d > RELATION_TOL {
                            return Err(Error::precondition(format!(
                                "generator matrices {j} and {i} do not commute (defect {d:.3e})"
                            )));
                        }
                    }
                    if torsion[i] > 0 {
                        let d = max_abs(&(matrix_power(&self.generators[i], torsion[i] as i64) - &id));
                        if d > RELATION_TOL {
                            return Err(Error::precondition(format!(
                                "generator matrix {i} does not have order dividing {} (defect {d:.3e})",
                                torsion[i]
                            )));
                        }
                    }
                }
            }
            GroupKind::Rewriting(sys) => {
                for (k, (lhs, rhs)) in sys.rules().iter().enumerate() {
                    let d = max_abs(&(self.eval_letters(lhs) - self.eval_letters(rhs)));
                    if d > RELATION_TOL {
                        return Err(Error::precondition(format!(
                            "rewriting rule {k} is violated by the generator matrices (defect {d:.3e})"
                        )));
                    }
                }
            }
            GroupKind::Free { .. } => {}
        }
        for (k, word) in self.relations.iter().enumerate() {
            if !matches!(self.oracle.kind(), GroupKind::Free { .. } | GroupKind::Rewriting(_)) {
                return Err(Error::precondition("relation words are only meaningful for word groups"));
            }
            if word.iter().any(|&l| l == 0 || l.unsigned_abs() as usize > self.generators.len()) {
                return Err(Error::precondition(format!("relation {k} uses an unknown letter")));
            }
            let d = max_abs(&(self.eval_letters(word) - &id));
            if d > RELATION_TOL {
                return Err(Error::precondition(format!(
                    "relation {k} does not evaluate to the identity (defect {d:.3e})"
                )));
            }
        }
        Ok(())
    }

    fn eval_letters(&self, word: &[i32]) -> CMatrix {
        let mut m = CMatrix::identity(self.dim, self.dim);
        for &l in word {
            let u = &self.generators[l.unsigned_abs() as usize - 1];
            m = if l > 0 { m * u } else { m * u.adjoint() };
        }
        m
    }

    /// The matrix `π(g)`.
    pub fn matrix(&self, g: &GroupElement) -> Result<CMatrix> {
        self.oracle.check(g)?;
        Ok(match g {
            GroupElement::Index(i) => self.table_images.as_ref().expect("table kind")[*i].clone(),
            GroupElement::Word(w) => self.eval_letters(w),
            GroupElement::Vector(v) => {
                let mut m = CMatrix::identity(self.dim, self.dim);
                for (u, &c) in self.generators.iter().zip(v) {
                    if c != 0 {
                        m *= matrix_power(u, c);
                    }
                }
                m
            }
        })
    }
}

/// A unitary representation of the workbench group.
#[derive(Clone, Debug, PartialEq)]
pub enum Representation {
    /// Left translation on `l²(G)`: `λ(g)δ_h = δ_{gh}`.
    Regular(Arc<GroupOracle>),
    /// `dim` copies of the identity action.
    Trivial { oracle: Arc<GroupOracle>, dim: usize },
    Matrix(Arc<MatrixRep>),
    DirectSum(Vec<Representation>),
    Multiple(Box<Representation>, Multiplicity),
}

/// One block of a representation's layout.
#[derive(Clone, Copy, Debug)]
pub enum Leaf<'a> {
    Regular(&'a GroupOracle),
    Trivial(usize),
    Matrix(&'a MatrixRep),
}

impl Leaf<'_> {
    pub fn is_regular(&self) -> bool {
        matches!(self, Leaf::Regular(_))
    }

    /// Dimension of a finite-dimensional block; `None` for regular blocks of infinite groups.
    pub fn dim(&self) -> Option<usize> {
        match self {
            Leaf::Regular(o) => o.order(),
            Leaf::Trivial(d) => Some(*d),
            Leaf::Matrix(m) => Some(m.dim()),
        }
    }
}

impl Representation {
    pub fn regular(oracle: Arc<GroupOracle>) -> Self {
        Representation::Regular(oracle)
    }

    pub fn trivial(oracle: Arc<GroupOracle>, dim: usize) -> Self {
        Representation::Trivial { oracle, dim }
    }

    pub fn matrix(rep: MatrixRep) -> Self {
        Representation::Matrix(Arc::new(rep))
    }

    /// `⊕ reps`; all summands must share the oracle and only the last may be infinite.
    pub fn direct_sum(reps: Vec<Representation>) -> Result<Self> {
        if reps.is_empty() {
            return Err(Error::precondition("direct sum of an empty list"));
        }
        let oracle = reps[0].oracle().clone();
        for (i, r) in reps.iter().enumerate() {
            if **r.oracle() != *oracle {
                return Err(Error::structural(format!("summand {i} uses a different group")));
            }
            if i + 1 < reps.len() && r.blocks().is_none() {
                return Err(Error::precondition(format!(
                    "summand {i} is infinite; only the last summand may be an infinite multiple"
                )));
            }
        }
        Ok(Representation::DirectSum(reps))
    }

    /// `count · rep`, with finite counts bounded by `cap`.
    pub fn multiple(rep: Representation, count: Multiplicity, cap: usize) -> Result<Self> {
        if rep.blocks().is_none() {
            return Err(Error::precondition("cannot take a multiple of an infinite multiple"));
        }
        if rep.blocks() == Some(0) {
            return Err(Error::precondition("cannot take a multiple of an empty representation"));
        }
        match count {
            Multiplicity::Finite(0) => Err(Error::precondition("multiplicity must be at least 1")),
            Multiplicity::Finite(n) if n > cap => Err(Error::Resource {
                cap: "copies",
                limit: cap,
                detail: format!("multiple with {n} copies"),
            }),
            _ => Ok(Representation::Multiple(Box::new(rep), count)),
        }
    }

    /// `π ⊕ ∞λ_G`.
    pub fn with_regular_tail(pi: Representation) -> Result<Self> {
        let oracle = pi.oracle().clone();
        let tail = Representation::multiple(Representation::Regular(oracle), Multiplicity::Infinite, usize::MAX)?;
        Representation::direct_sum(vec![pi, tail])
    }

    pub fn oracle(&self) -> &Arc<GroupOracle> {
        match self {
            Representation::Regular(o) | Representation::Trivial { oracle: o, .. } => o,
            Representation::Matrix(m) => m.oracle(),
            Representation::DirectSum(rs) => rs[0].oracle(),
            Representation::Multiple(r, _) => r.oracle(),
        }
    }

    /// Number of blocks, or `None` for an infinite layout.
    pub fn blocks(&self) -> Option<usize> {
        match self {
            Representation::Regular(_) | Representation::Trivial { .. } | Representation::Matrix(_) => Some(1),
            Representation::DirectSum(rs) => rs.iter().map(|r| r.blocks()).sum(),
            Representation::Multiple(r, Multiplicity::Finite(n)) => r.blocks().map(|m| m * n),
            Representation::Multiple(_, Multiplicity::Infinite) => None,
        }
    }

    /// Total dimension when finite.
    pub fn dim(&self) -> Option<usize> {
        match self {
            Representation::Regular(o) => o.order(),
            Representation::Trivial { dim, .. } => Some(*dim),
            Representation::Matrix(m) => Some(m.dim()),
            Representation::DirectSum(rs) => rs.iter().map(|r| r.dim()).sum(),
            Representation::Multiple(r, Multiplicity::Finite(n)) => r.dim().map(|d| d * n),
            Representation::Multiple(_, Multiplicity::Infinite) => None,
        }
    }

    /// The block at `index`, if it exists.
    pub fn leaf(&self, index: usize) -> Option<Leaf<'_>> {
        match self {
            Representation::Regular(o) => (index == 0).then_some(Leaf::Regular(o)),
            Representation::Trivial { dim, .. } => (index == 0).then_some(Leaf::Trivial(*dim)),
            Representation::Matrix(m) => (index == 0).then_some(Leaf::Matrix(m)),
            Representation::DirectSum(rs) => {
                let mut offset = 0;
                for r in rs {
                    match r.blocks() {
                        Some(b) if index >= offset + b => offset += b,
                        _ => return r.leaf(index - offset),
                    }
                }
                None
            }
            Representation::Multiple(r, count) => {
                let m = r.blocks()?;
                if let Multiplicity::Finite(n) = count {
                    if index >= m * n {
                        return None;
                    }
                }
                r.leaf(index % m)
            }
        }
    }

    /// Block offset of summand `i` of a direct sum or copy `i` of a multiple.
    pub fn summand_offset(&self, i: usize) -> Result<usize> {
        match self {
            Representation::DirectSum(rs) => {
                if i >= rs.len() {
                    return Err(Error::structural(format!("summand {i} out of range ({} summands)", rs.len())));
                }
                Ok(rs[..i].iter().map(|r| r.blocks().expect("finite prefix")).sum())
            }
            Representation::Multiple(r, count) => {
                if let Multiplicity::Finite(n) = count {
                    if i >= *n {
                        return Err(Error::structural(format!("copy-index {i} out of range ({n} copies)")));
                    }
                }
                Ok(i * r.blocks().expect("finite summand"))
            }
            _ if i == 0 => Ok(0),
            _ => Err(Error::structural("representation has a single summand")),
        }
    }

    /// Embeds a vector of summand (or copy) `i` into this representation.
    pub fn embed(&self, i: usize, v: &SparseVector) -> Result<SparseVector> {
        let offset = self.summand_offset(i)?;
        Ok(v.map_blocks(|b| b + offset))
    }

    /// Checks that every key of `v` names a basis vector of this representation.
    pub fn check_vector(&self, v: &SparseVector) -> Result<()> {
        let mut last: Option<(usize, Option<Leaf<'_>>)> = None;
        for key in v.keys() {
            let leaf = match last {
                Some((b, l)) if b == key.block => l,
                _ => {
                    let l = self.leaf(key.block);
                    last = Some((key.block, l));
                    l
                }
            };
            let leaf = leaf.ok_or_else(|| Error::structural(format!("copy-index {} out of range", key.block)))?;
            check_site(leaf, key)?;
        }
        Ok(())
    }

    /// `π(g)v`.
    pub fn apply(&self, g: &GroupElement, v: &SparseVector) -> Result<SparseVector> {
        self.oracle().check(g)?;
        let mut by_block: BTreeMap<usize, Vec<(&Key, Complex64)>> = BTreeMap::new();
        for (k, a) in v.iter() {
            by_block.entry(k.block).or_default().push((k, *a));
        }
        let mut out = Vec::with_capacity(v.len());
        let mut cache: HashMap<*const MatrixRep, CMatrix> = HashMap::new();
        for (block, entries) in by_block {
            let leaf = self
                .leaf(block)
                .ok_or_else(|| Error::structural(format!("copy-index {block} out of range")))?;
            match leaf {
                Leaf::Regular(oracle) => {
                    for (k, a) in entries {
                        let Site::Element(h) = &k.site else {
                            return Err(Error::structural(format!("block {block} is regular; got a coordinate")));
                        };
                        out.push((Key::element(block, oracle.multiply(g, h)?), a));
                    }
                }
                Leaf::Trivial(dim) => {
                    for (k, a) in entries {
                        check_site(Leaf::Trivial(dim), k)?;
                        out.push((k.clone(), a));
                    }
                }
                Leaf::Matrix(m) => {
                    let mut x = DVector::<Complex64>::zeros(m.dim());
                    for (k, a) in entries {
                        check_site(leaf, k)?;
                        let Site::Coord(i) = k.site else { unreachable!() };
                        x[i] += a;
                    }
                    let key = m as *const MatrixRep;
                    if let std::collections::hash_map::Entry::Vacant(e) = cache.entry(key) {
                        e.insert(m.matrix(g)?);
                    }
                    let y = &cache[&key] * x;
                    for (i, a) in y.iter().enumerate() {
                        if *a != Complex64::new(0.0, 0.0) {
                            out.push((Key::coord(block, i), *a));
                        }
                    }
                }
            }
        }
        Ok(SparseVector::from_entries(out))
    }

    /// Ordered basis keys of a finite-dimensional representation.
    pub fn dense_basis(&self) -> Option<Vec<Key>> {
        let blocks = self.blocks()?;
        let mut keys = Vec::new();
        for b in 0..blocks {
            match self.leaf(b)? {
                Leaf::Regular(o) => {
                    let GroupKind::FiniteTable(t) = o.kind() else {
                        // finite abelian groups: enumerate the product of cyclic factors
                        let GroupKind::Abelian { torsion } = o.kind() else { return None };
                        if torsion.contains(&0) {
                            return None;
                        }
                        let mut coords = vec![vec![]];
                        for &t in torsion {
                            coords = coords
                                .into_iter()
                                .flat_map(|c: Vec<i64>| {
                                    (0..t as i64).map(move |x| {
                                        let mut c = c.clone();
                                        c.push(x);
                                        c
                                    })
                                })
                                .collect();
                        }
                        keys.extend(coords.into_iter().map(|c| Key::element(b, GroupElement::Vector(c))));
                        continue;
                    };
                    keys.extend((0..t.order()).map(|i| Key::element(b, GroupElement::Index(i))));
                }
                Leaf::Trivial(d) => keys.extend((0..d).map(|i| Key::coord(b, i))),
                Leaf::Matrix(m) => keys.extend((0..m.dim()).map(|i| Key::coord(b, i))),
            }
        }
        Some(keys)
    }

    /// Matrix of `π(g)` in the [`dense_basis`](Self::dense_basis) ordering.
    pub fn dense_matrix(&self, g: &GroupElement) -> Result<CMatrix> {
        let keys = self
            .dense_basis()
            .ok_or_else(|| Error::precondition("representation is not finite-dimensional"))?;
        let index: HashMap<&Key, usize> = keys.iter().enumerate().map(|(i, k)| (k, i)).collect();
        let n = keys.len();
        let mut m = CMatrix::zeros(n, n);
        for (j, k) in keys.iter().enumerate() {
            let col = self.apply(g, &SparseVector::from_entries([(k.clone(), Complex64::new(1.0, 0.0))]))?;
            for (key, a) in col.iter() {
                m[(index[key], j)] += *a;
            }
        }
        Ok(m)
    }

    /// Lowest block of the infinite regular tail that none of `used` touches.
    pub fn fresh_copy<'a>(&self, used: impl IntoIterator<Item = &'a SparseVector>) -> Result<usize> {
        let start = self.finite_prefix_blocks();
        let mut touched: Vec<usize> = used.into_iter().flat_map(|v| v.blocks()).filter(|&b| b >= start).collect();
        touched.sort_unstable();
        touched.dedup();
        let mut candidate = start;
        for b in touched {
            if b == candidate {
                candidate += 1;
            } else if b > candidate {
                break;
            }
        }
        if self.blocks().is_some() {
            return Err(Error::precondition("representation has no infinite tail"));
        }
        Ok(candidate)
    }

    /// Blocks preceding the infinite tail (all blocks for a finite layout).
    pub fn finite_prefix_blocks(&self) -> usize {
        match self {
            Representation::DirectSum(rs) => {
                let mut n = 0;
                for r in rs {
                    match r.blocks() {
                        Some(b) => n += b,
                        None => return n + r.finite_prefix_blocks(),
                    }
                }
                n
            }
            Representation::Multiple(_, Multiplicity::Infinite) => 0,
            r => r.blocks().unwrap_or(0),
        }
    }
}

/// Hands out fresh copies of an infinite regular tail, one at a time.
///
/// This is the only stateful piece of the representation layer; give each task its own allocator.
#[derive(Debug, Clone)]
pub struct CopyAllocator {
    next: usize,
    cap: usize,
    issued: usize,
}

impl CopyAllocator {
    /// Starts above every block touched by `used`.
    pub fn new<'a>(rep: &Representation, used: impl IntoIterator<Item = &'a SparseVector>, cap: usize) -> Result<Self> {
        let start = rep.finite_prefix_blocks();
        let next = used
            .into_iter()
            .flat_map(|v| v.blocks())
            .map(|b| b + 1)
            .max()
            .unwrap_or(0)
            .max(rep.fresh_copy(std::iter::empty())?)
            .max(start);
        Ok(Self { next, cap, issued: 0 })
    }

    pub fn fresh(&mut self) -> Result<usize> {
        if self.issued >= self.cap {
            return Err(Error::Resource {
                cap: "copies",
                limit: self.cap,
                detail: "no fresh regular copies left".into(),
            });
        }
        self.issued += 1;
        self.next += 1;
        Ok(self.next - 1)
    }
}

fn check_site(leaf: Leaf<'_>, key: &Key) -> Result<()> {
    match (leaf, &key.site) {
        (Leaf::Regular(o), Site::Element(h)) => o.check(h),
        (Leaf::Trivial(d), Site::Coord(i)) if *i < d => Ok(()),
        (Leaf::Matrix(m), Site::Coord(i)) if *i < m.dim() => Ok(()),
        (Leaf::Regular(_), Site::Coord(_)) => Err(Error::structural(format!(
            "block {} is a regular copy; coordinates are group elements",
            key.block
        ))),
        (_, Site::Coord(i)) => Err(Error::structural(format!("coordinate {i} out of range in block {}", key.block))),
        (_, Site::Element(_)) => Err(Error::structural(format!(
            "block {} is finite-dimensional; coordinates are indices",
            key.block
        ))),
    }
}

/// Largest entry modulus.
pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn matrix_power(u: &CMatrix, exp: i64) -> CMatrix {
    let n = u.nrows();
    let mut base = if exp < 0 { u.adjoint() } else { u.clone() };
    let mut e = exp.unsigned_abs();
    let mut acc = CMatrix::identity(n, n);
    while e > 0 {
        if e & 1 == 1 {
            acc = &acc * &base;
        }
        base = &base * &base;
        e >>= 1;
    }
    acc
}
