//! Exact arithmetic for the supported group families.
//!
//! Four concrete kinds of countable discrete group are available, each with a
//! decidable word problem and a canonical form for its elements:
//!
//! * finite groups given by a multiplication table,
//! * free groups of finite rank (freely reduced words),
//! * finitely generated abelian groups `ℤ^a × ℤ/t₁ × … ` (integer tuples),
//! * groups presented by a complete rewriting system over the free alphabet.
//!
//! Words are sequences of signed, one-based letters: `2` is the second
//! generator and `-2` its inverse.

use std::collections::HashMap;
use std::fmt;

use rand::Rng;

use crate::error::{Error, Result};

/// Upper bound on rewriting steps performed while normalizing one word.
const MAX_REWRITE_STEPS: usize = 1_000_000;

/// A group element in canonical form for its oracle.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum GroupElement {
    /// Row index into a multiplication table.
    Index(usize),
    /// Reduced (or rewriting-normal) word over signed one-based letters.
    Word(Vec<i32>),
    /// Coordinates of an element of a finitely generated abelian group.
    Vector(Vec<i64>),
}

impl GroupElement {
    pub fn word(letters: &[i32]) -> Self {
        GroupElement::Word(letters.to_vec())
    }

    pub fn vector(coords: &[i64]) -> Self {
        GroupElement::Vector(coords.to_vec())
    }
}

/// Multiplication table of a finite group.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CayleyTable {
    table: Vec<Vec<usize>>,
    identity: usize,
    inverses: Vec<usize>,
}

impl CayleyTable {
    /// Validates `table` as a group law: square, closed, with a two-sided
    /// identity, inverses and associativity.
    pub fn new(table: Vec<Vec<usize>>) -> Result<Self> {
        let n = table.len();
        if n == 0 {
            return Err(Error::precondition("multiplication table is empty"));
        }
        for (i, row) in table.iter().enumerate() {
            if row.len() != n {
                return Err(Error::precondition(format!(
                    "table row {i} has {} entries, expected {n}",
                    row.len()
                )));
            }
            if let Some(&bad) = row.iter().find(|&&x| x >= n) {
                return Err(Error::precondition(format!("table entry {bad} out of range in row {i}")));
            }
        }
        let identity = (0..n)
            .find(|&e| (0..n).all(|x| table[e][x] == x && table[x][e] == x))
            .ok_or_else(|| Error::precondition("multiplication table has no identity"))?;
        let mut inverses = Vec::with_capacity(n);
        for x in 0..n {
            let inv = (0..n)
                .find(|&y| table[x][y] == identity && table[y][x] == identity)
                .ok_or_else(|| Error::precondition(format!("element {x} has no inverse")))?;
            inverses.push(inv);
        }
        for a in 0..n {
            for b in 0..n {
                let ab = table[a][b];
                for c in 0..n {
                    if table[ab][c] != table[a][table[b][c]] {
                        return Err(Error::precondition(format!(
                            "table is not associative at ({a}, {b}, {c})"
                        )));
                    }
                }
            }
        }
        Ok(Self {
            table,
            identity,
            inverses,
        })
    }

    /// The cyclic group `ℤ/n` with `i·j = i + j mod n`.
    pub fn cyclic(n: usize) -> Self {
        let table = (0..n).map(|i| (0..n).map(|j| (i + j) % n).collect()).collect();
        Self::new(table).expect("cyclic table is a group")
    }

    pub fn order(&self) -> usize {
        self.table.len()
    }

    pub fn identity(&self) -> usize {
        self.identity
    }

    pub fn rows(&self) -> &[Vec<usize>] {
        &self.table
    }
}

/// A complete, confluent rewriting system over the letters `±1..=±rank`.
///
/// Free cancellation `x·x⁻¹ → e` is always applied in addition to the rules.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RewritingSystem {
    rank: usize,
    rules: Vec<(Vec<i32>, Vec<i32>)>,
}

impl RewritingSystem {
    pub fn new(rank: usize, rules: Vec<(Vec<i32>, Vec<i32>)>) -> Result<Self> {
        for (i, (lhs, rhs)) in rules.iter().enumerate() {
            if lhs.is_empty() {
                return Err(Error::precondition(format!("rule {i} has an empty left-hand side")));
            }
            if lhs == rhs {
                return Err(Error::precondition(format!("rule {i} rewrites a word to itself")));
            }
            for &x in lhs.iter().chain(rhs) {
                check_letter(x, rank)?;
            }
        }
        Ok(Self { rank, rules })
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn rules(&self) -> &[(Vec<i32>, Vec<i32>)] {
        &self.rules
    }

    fn normalize(&self, mut word: Vec<i32>) -> Result<Vec<i32>> {
        let mut steps = 0;
        loop {
            word = free_reduce(word);
            let hit = self.rules.iter().find_map(|(lhs, rhs)| {
                word.windows(lhs.len())
                    .position(|w| w == lhs.as_slice())
                    .map(|p| (p, lhs.len(), rhs))
            });
            match hit {
                None => return Ok(word),
                Some((pos, len, rhs)) => {
                    word.splice(pos..pos + len, rhs.iter().copied());
                }
            }
            steps += 1;
            if steps > MAX_REWRITE_STEPS {
                return Err(Error::Resource {
                    cap: "rewrite-steps",
                    limit: MAX_REWRITE_STEPS,
                    detail: "rewriting did not terminate; is the system complete?".into(),
                });
            }
        }
    }

    fn is_normal(&self, word: &[i32]) -> bool {
        word.windows(2).all(|w| w[0] != -w[1])
            && self
                .rules
                .iter()
                .all(|(lhs, _)| !word.windows(lhs.len()).any(|w| w == lhs.as_slice()))
    }
}

/// The concrete family a [`GroupOracle`] belongs to.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum GroupKind {
    FiniteTable(CayleyTable),
    Free { rank: usize },
    /// `torsion[i] == 0` means the `i`-th coordinate is a copy of ℤ.
    Abelian { torsion: Vec<u64> },
    Rewriting(RewritingSystem),
}

impl GroupKind {
    pub fn name(&self) -> &'static str {
        match self {
            GroupKind::FiniteTable(_) => "finite-table",
            GroupKind::Free { .. } => "free",
            GroupKind::Abelian { .. } => "fg-abelian",
            GroupKind::Rewriting(_) => "rewriting-presented",
        }
    }
}

/// Arithmetic for a countable group with a distinguished finite generating set.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GroupOracle {
    kind: GroupKind,
    generators: Vec<GroupElement>,
}

impl GroupOracle {
    /// Builds an oracle, validating that each generator is canonical and not the identity.
    pub fn new(kind: GroupKind, generators: Vec<GroupElement>) -> Result<Self> {
        let oracle = Self {
            kind,
            generators: Vec::new(),
        };
        if generators.is_empty() && oracle.order() != Some(1) {
            return Err(Error::precondition("generating set is empty"));
        }
        let e = oracle.identity();
        for (i, g) in generators.iter().enumerate() {
            oracle.check(g)?;
            if *g == e {
                return Err(Error::precondition(format!("generator {i} is the identity")));
            }
        }
        Ok(Self { generators, ..oracle })
    }

    /// Free group on `rank` letters with the free basis as generators.
    pub fn free(rank: usize) -> Self {
        let generators = (1..=rank as i32).map(|i| GroupElement::Word(vec![i])).collect();
        Self::new(GroupKind::Free { rank }, generators).expect("free basis is valid")
    }

    /// `ℤ^rank` with the standard basis.
    pub fn integer_lattice(rank: usize) -> Self {
        Self::abelian(vec![0; rank]).expect("lattice basis is valid")
    }

    /// Abelian group with the given torsion orders (`0` for ℤ) and standard basis generators.
    pub fn abelian(torsion: Vec<u64>) -> Result<Self> {
        let d = torsion.len();
        let generators = (0..d)
            .filter(|&i| torsion[i] != 1)
            .map(|i| {
                let mut v = vec![0; d];
                v[i] = 1;
                GroupElement::Vector(v)
            })
            .collect();
        Self::new(GroupKind::Abelian { torsion }, generators)
    }

    /// Finite group from a table; `generators` are row indices.
    pub fn finite(table: CayleyTable, generators: &[usize]) -> Result<Self> {
        let gens = generators.iter().map(|&i| GroupElement::Index(i)).collect();
        Self::new(GroupKind::FiniteTable(table), gens)
    }

    /// The cyclic group `ℤ/n` generated by `1` (the trivial group for `n = 1`).
    pub fn cyclic(n: usize) -> Self {
        let gens: &[usize] = if n == 1 { &[] } else { &[1] };
        Self::finite(CayleyTable::cyclic(n), gens).expect("n ≥ 1")
    }

    /// Group presented by a complete rewriting system with the letters as generators.
    pub fn rewriting(system: RewritingSystem) -> Result<Self> {
        let generators = (1..=system.rank() as i32)
            .map(|i| system.normalize(vec![i]).map(GroupElement::Word))
            .collect::<Result<Vec<_>>>()?;
        Self::new(GroupKind::Rewriting(system), generators)
    }

    pub fn kind(&self) -> &GroupKind {
        &self.kind
    }

    pub fn generators(&self) -> &[GroupElement] {
        &self.generators
    }

    /// Replaces the generating set.
    pub fn with_generators(self, generators: Vec<GroupElement>) -> Result<Self> {
        Self::new(self.kind, generators)
    }

    /// Whether the group is finite (only finite-table oracles, or abelian with all coordinates torsion).
    pub fn order(&self) -> Option<usize> {
        match &self.kind {
            GroupKind::FiniteTable(t) => Some(t.order()),
            GroupKind::Abelian { torsion } if torsion.iter().all(|&t| t > 0) => {
                Some(torsion.iter().map(|&t| t as usize).product())
            }
            _ => None,
        }
    }

    pub fn identity(&self) -> GroupElement {
        match &self.kind {
            GroupKind::FiniteTable(t) => GroupElement::Index(t.identity),
            GroupKind::Free { .. } | GroupKind::Rewriting(_) => GroupElement::Word(Vec::new()),
            GroupKind::Abelian { torsion } => GroupElement::Vector(vec![0; torsion.len()]),
        }
    }

    /// Checks that `g` is a canonical element for this oracle.
    pub fn check(&self, g: &GroupElement) -> Result<()> {
        match (&self.kind, g) {
            (GroupKind::FiniteTable(t), GroupElement::Index(i)) => {
                if *i < t.order() {
                    Ok(())
                } else {
                    Err(Error::structural(format!("table index {i} out of range (order {})", t.order())))
                }
            }
            (GroupKind::Free { rank }, GroupElement::Word(w)) => {
                for &x in w {
                    check_letter(x, *rank)?;
                }
                if w.windows(2).any(|p| p[0] == -p[1]) {
                    return Err(Error::structural(format!("word {} is not freely reduced", format_word(w))));
                }
                Ok(())
            }
            (GroupKind::Rewriting(sys), GroupElement::Word(w)) => {
                for &x in w {
                    check_letter(x, sys.rank())?;
                }
                if sys.is_normal(w) {
                    Ok(())
                } else {
                    Err(Error::structural(format!("word {} is not in normal form", format_word(w))))
                }
            }
            (GroupKind::Abelian { torsion }, GroupElement::Vector(v)) => {
                if v.len() != torsion.len() {
                    return Err(Error::structural(format!(
                        "abelian element has {} coordinates, expected {}",
                        v.len(),
                        torsion.len()
                    )));
                }
                for (c, &t) in v.iter().zip(torsion) {
                    if t > 0 && !(0..t as i64).contains(c) {
                        return Err(Error::structural(format!("coordinate {c} not reduced mod {t}")));
                    }
                }
                Ok(())
            }
            (kind, _) => Err(Error::structural(format!(
                "element {g:?} does not belong to a {} group",
                kind.name()
            ))),
        }
    }

    pub fn multiply(&self, a: &GroupElement, b: &GroupElement) -> Result<GroupElement> {
        match (&self.kind, a, b) {
            (GroupKind::FiniteTable(t), GroupElement::Index(x), GroupElement::Index(y)) => {
                self.check(a)?;
                self.check(b)?;
                Ok(GroupElement::Index(t.table[*x][*y]))
            }
            (GroupKind::Free { rank }, GroupElement::Word(x), GroupElement::Word(y)) => {
                for &l in x.iter().chain(y) {
                    check_letter(l, *rank)?;
                }
                Ok(GroupElement::Word(concat_reduce(x, y)))
            }
            (GroupKind::Rewriting(sys), GroupElement::Word(x), GroupElement::Word(y)) => {
                for &l in x.iter().chain(y) {
                    check_letter(l, sys.rank())?;
                }
                Ok(GroupElement::Word(sys.normalize(concat_reduce(x, y))?))
            }
            (GroupKind::Abelian { torsion }, GroupElement::Vector(x), GroupElement::Vector(y)) => {
                if x.len() != torsion.len() || y.len() != torsion.len() {
                    return Err(Error::structural("abelian operands have the wrong rank"));
                }
                Ok(GroupElement::Vector(
                    x.iter()
                        .zip(y)
                        .zip(torsion)
                        .map(|((&p, &q), &t)| reduce_coord(p + q, t))
                        .collect(),
                ))
            }
            (kind, _, _) => Err(Error::structural(format!(
                "operands {a:?}, {b:?} do not belong to a {} group",
                kind.name()
            ))),
        }
    }

    pub fn invert(&self, a: &GroupElement) -> Result<GroupElement> {
        match (&self.kind, a) {
            (GroupKind::FiniteTable(t), GroupElement::Index(x)) => {
                self.check(a)?;
                Ok(GroupElement::Index(t.inverses[*x]))
            }
            (GroupKind::Free { rank }, GroupElement::Word(w)) => {
                for &l in w {
                    check_letter(l, *rank)?;
                }
                Ok(GroupElement::Word(free_reduce(w.iter().rev().map(|&l| -l).collect())))
            }
            (GroupKind::Rewriting(sys), GroupElement::Word(w)) => {
                for &l in w {
                    check_letter(l, sys.rank())?;
                }
                Ok(GroupElement::Word(sys.normalize(w.iter().rev().map(|&l| -l).collect())?))
            }
            (GroupKind::Abelian { torsion }, GroupElement::Vector(v)) => {
                if v.len() != torsion.len() {
                    return Err(Error::structural("abelian operand has the wrong rank"));
                }
                Ok(GroupElement::Vector(
                    v.iter().zip(torsion).map(|(&c, &t)| reduce_coord(-c, t)).collect(),
                ))
            }
            (kind, _) => Err(Error::structural(format!(
                "element {a:?} does not belong to a {} group",
                kind.name()
            ))),
        }
    }

    /// Normal form of an arbitrary word over the presentation letters
    /// (free and rewriting kinds only).
    pub fn normalize_word(&self, word: Vec<i32>) -> Result<GroupElement> {
        match &self.kind {
            GroupKind::Free { rank } => {
                for &l in &word {
                    check_letter(l, *rank)?;
                }
                Ok(GroupElement::Word(free_reduce(word)))
            }
            GroupKind::Rewriting(sys) => {
                for &l in &word {
                    check_letter(l, sys.rank())?;
                }
                Ok(GroupElement::Word(sys.normalize(word)?))
            }
            kind => Err(Error::structural(format!("{} groups have no word normal form", kind.name()))),
        }
    }

    /// `S ∪ S⁻¹` without repetitions, ordered `s₁, s₁⁻¹, s₂, s₂⁻¹, …`.
    ///
    /// Empty only for the trivial group.
    pub fn symmetric_generators(&self) -> Result<Vec<GroupElement>> {
        let mut out: Vec<GroupElement> = Vec::with_capacity(2 * self.generators.len());
        for s in &self.generators {
            for x in [s.clone(), self.invert(s)?] {
                if !out.contains(&x) {
                    out.push(x);
                }
            }
        }
        Ok(out)
    }

    /// The letters a matrix representation assigns matrices to: free and
    /// rewriting letters, abelian basis vectors, or the table generators.
    pub fn presentation_generators(&self) -> Vec<GroupElement> {
        match &self.kind {
            GroupKind::Free { rank } => (1..=*rank as i32).map(|i| GroupElement::Word(vec![i])).collect(),
            GroupKind::Rewriting(sys) => (1..=sys.rank() as i32).map(|i| GroupElement::Word(vec![i])).collect(),
            GroupKind::Abelian { torsion } => (0..torsion.len())
                .map(|i| {
                    let mut v = vec![0; torsion.len()];
                    v[i] = reduce_coord(1, torsion[i]);
                    GroupElement::Vector(v)
                })
                .collect(),
            GroupKind::FiniteTable(_) => self.generators.clone(),
        }
    }

    /// A uniformly chosen word of length `len` over `S ∪ S⁻¹`, evaluated.
    pub fn random_element<R: Rng>(&self, rng: &mut R, len: usize) -> Result<GroupElement> {
        let steps = self.symmetric_generators()?;
        let mut g = self.identity();
        for _ in 0..len {
            g = self.multiply(&g, &steps[rng.random_range(0..steps.len())])?;
        }
        Ok(g)
    }

    /// Canonical text form: `e` or `1,-2` for words, `0,3` for abelian tuples, `4` for table rows.
    pub fn format_element(&self, g: &GroupElement) -> String {
        match g {
            GroupElement::Index(i) => i.to_string(),
            GroupElement::Word(w) => format_word(w),
            GroupElement::Vector(v) => v.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(","),
        }
    }

    /// Parses the text form produced by [`format_element`](Self::format_element).
    ///
    /// Words and abelian tuples are brought to canonical form; table indices are range checked.
    pub fn parse_element(&self, s: &str) -> Result<GroupElement> {
        let s = s.trim();
        let bad = |m: String| Error::parse(format!("element `{s}`"), m);
        match &self.kind {
            GroupKind::FiniteTable(_) => {
                let i: usize = s.parse().map_err(|e| bad(format!("{e}")))?;
                let g = GroupElement::Index(i);
                self.check(&g).map_err(|e| bad(e.to_string()))?;
                Ok(g)
            }
            GroupKind::Free { .. } | GroupKind::Rewriting(_) => {
                let word = if s == "e" || s.is_empty() {
                    Vec::new()
                } else {
                    s.split(',')
                        .map(|t| t.trim().parse::<i32>().map_err(|e| bad(format!("{e}"))))
                        .collect::<Result<Vec<_>>>()?
                };
                self.normalize_word(word).map_err(|e| bad(e.to_string()))
            }
            GroupKind::Abelian { torsion } => {
                let coords = if s.is_empty() {
                    Vec::new()
                } else {
                    s.split(',')
                        .map(|t| t.trim().parse::<i64>().map_err(|e| bad(format!("{e}"))))
                        .collect::<Result<Vec<_>>>()?
                };
                if coords.len() != torsion.len() {
                    return Err(bad(format!("expected {} coordinates", torsion.len())));
                }
                Ok(GroupElement::Vector(
                    coords.iter().zip(torsion).map(|(&c, &t)| reduce_coord(c, t)).collect(),
                ))
            }
        }
    }

    /// Random-triple checks of associativity and the inverse law; returns the first failing triple.
    pub fn spot_check<R: Rng>(&self, rng: &mut R, trials: usize, word_len: usize) -> Result<()> {
        let e = self.identity();
        for _ in 0..trials {
            let len_a = rng.random_range(0..=word_len);
            let a = self.random_element(rng, len_a)?;
            let len_b = rng.random_range(0..=word_len);
            let b = self.random_element(rng, len_b)?;
            let len_c = rng.random_range(0..=word_len);
            let c = self.random_element(rng, len_c)?;
            let left = self.multiply(&self.multiply(&a, &b)?, &c)?;
            let right = self.multiply(&a, &self.multiply(&b, &c)?)?;
            if left != right {
                return Err(Error::precondition(format!(
                    "associativity fails on ({}, {}, {})",
                    self.format_element(&a),
                    self.format_element(&b),
                    self.format_element(&c)
                )));
            }
            if self.multiply(&a, &self.invert(&a)?)? != e {
                return Err(Error::precondition(format!(
                    "inverse law fails on {}",
                    self.format_element(&a)
                )));
            }
        }
        Ok(())
    }
}

impl fmt::Display for GroupElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GroupElement::Index(i) => write!(f, "{i}"),
            GroupElement::Word(w) => f.write_str(&format_word(w)),
            GroupElement::Vector(v) => {
                write!(f, "(")?;
                for (i, c) in v.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{c}")?;
                }
                write!(f, ")")
            }
        }
    }
}

/// A Cayley ball `B_r` enumerated breadth first over `S ∪ S⁻¹`.
#[derive(Clone, Debug)]
pub struct Ball {
    radius: usize,
    elements: Vec<GroupElement>,
    lengths: Vec<usize>,
    index: HashMap<GroupElement, usize>,
}

impl Ball {
    pub fn radius(&self) -> usize {
        self.radius
    }

    /// Elements in breadth-first order; word length is non-decreasing along the list.
    pub fn elements(&self) -> &[GroupElement] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn word_length(&self, g: &GroupElement) -> Option<usize> {
        self.index.get(g).map(|&i| self.lengths[i])
    }

    pub fn lengths(&self) -> &[usize] {
        &self.lengths
    }

    pub fn position(&self, g: &GroupElement) -> Option<usize> {
        self.index.get(g).copied()
    }

    pub fn contains(&self, g: &GroupElement) -> bool {
        self.index.contains_key(g)
    }

    /// Number of elements of word length at most `r` (`r ≤ radius`).
    pub fn count_within(&self, r: usize) -> usize {
        self.lengths.partition_point(|&l| l <= r)
    }
}

/// Breadth-first enumeration of `B_r`, failing once more than `cap` elements are found.
pub fn ball(oracle: &GroupOracle, radius: usize, cap: usize) -> Result<Ball> {
    let steps = oracle.symmetric_generators()?;
    let e = oracle.identity();
    let mut elements = vec![e.clone()];
    let mut lengths = vec![0];
    let mut index = HashMap::from([(e, 0)]);
    let mut frontier = 0..1;
    for r in 1..=radius {
        let start = elements.len();
        for i in frontier.clone() {
            for s in &steps {
                let y = oracle.multiply(&elements[i], s)?;
                if !index.contains_key(&y) {
                    if elements.len() >= cap {
                        return Err(Error::Resource {
                            cap: "ball",
                            limit: cap,
                            detail: format!("ball of radius {radius} while enumerating sphere {r}"),
                        });
                    }
                    index.insert(y.clone(), elements.len());
                    elements.push(y);
                    lengths.push(r);
                }
            }
        }
        frontier = start..elements.len();
    }
    Ok(Ball {
        radius,
        elements,
        lengths,
        index,
    })
}

fn check_letter(x: i32, rank: usize) -> Result<()> {
    if x == 0 || x.unsigned_abs() as usize > rank {
        Err(Error::structural(format!("letter {x} outside alphabet of rank {rank}")))
    } else {
        Ok(())
    }
}

fn reduce_coord(c: i64, torsion: u64) -> i64 {
    if torsion == 0 {
        c
    } else {
        c.rem_euclid(torsion as i64)
    }
}

fn free_reduce(word: Vec<i32>) -> Vec<i32> {
    let mut out: Vec<i32> = Vec::with_capacity(word.len());
    for x in word {
        if out.last() == Some(&-x) {
            out.pop();
        } else {
            out.push(x);
        }
    }
    out
}

fn concat_reduce(x: &[i32], y: &[i32]) -> Vec<i32> {
    let mut k = 0;
    while k < x.len() && k < y.len() && x[x.len() - 1 - k] == -y[k] {
        k += 1;
    }
    let mut out = Vec::with_capacity(x.len() + y.len() - 2 * k);
    out.extend_from_slice(&x[..x.len() - k]);
    out.extend_from_slice(&y[k..]);
    out
}

fn format_word(w: &[i32]) -> String {
    if w.is_empty() {
        "e".to_string()
    } else {
        w.iter().map(|l| l.to_string()).collect::<Vec<_>>().join(",")
    }
}
