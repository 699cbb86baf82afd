//! JSON descriptors for groups, representations and vectors.
//!
//! The descriptors are plain serde types; `build` turns them into the
//! computational objects and `describe` goes back. Serializing through
//! [`to_json`] yields sorted keys, so a descriptor written by the crate
//! re-parses and re-serializes to the same bytes.
//!
//! ```
//! use unirep::config::{from_json, to_json, GroupSpec};
//!
//! let text = r#"{"kind": "free", "rank": 2}"#;
//! let spec: GroupSpec = from_json(text).unwrap();
//! let oracle = spec.build("group").unwrap();
//! let canonical = to_json(&GroupSpec::describe(&oracle)).unwrap();
//! assert_eq!(canonical, r#"{"generators":["1","2"],"kind":"free","rank":2}"#);
//! ```

use std::sync::Arc;

use serde::de::{self, DeserializeOwned, Error as _};
use serde_json::Value;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::group::{CayleyTable, GroupKind, GroupOracle, RewritingSystem};
use crate::rep::{CMatrix, Leaf, MatrixRep, Multiplicity, Representation};
use crate::vector::{Key, Site, SparseVector};
use crate::{Caps, Complex64, Error, Result};

/// Group block of a config.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum GroupSpec {
    FiniteTable(FiniteTableSpec),
    Free(FreeSpec),
    FgAbelian(AbelianSpec),
    RewritingPresented(RewritingSpec),
}

/// `generators` are row indices as strings; defaults to every non-identity row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FiniteTableSpec {
    pub table: Vec<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generators: Option<Vec<String>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FreeSpec {
    pub rank: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generators: Option<Vec<String>>,
}

/// `torsion[i] == 0` is a copy of ℤ.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AbelianSpec {
    pub torsion: Vec<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generators: Option<Vec<String>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RewritingSpec {
    pub rank: usize,
    pub rules: Vec<(Vec<i32>, Vec<i32>)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generators: Option<Vec<String>>,
}

impl<'de> Deserialize<'de> for GroupSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let (kind, body) = split_kind(d)?;
        match kind.as_str() {
            "finite-table" => tagged_body(body).map(GroupSpec::FiniteTable),
            "free" => tagged_body(body).map(GroupSpec::Free),
            "fg-abelian" => tagged_body(body).map(GroupSpec::FgAbelian),
            "rewriting-presented" => tagged_body(body).map(GroupSpec::RewritingPresented),
            other => Err(unknown_kind(other, &["finite-table", "free", "fg-abelian", "rewriting-presented"])),
        }
    }
}

/// Splits an object into its `kind` tag and the remaining fields.
fn split_kind<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<(String, Value), D::Error> {
    let mut map = serde_json::Map::deserialize(d)?;
    match map.remove("kind") {
        Some(Value::String(k)) => Ok((k, Value::Object(map))),
        Some(_) => Err(D::Error::custom(format!("{PATH_MARK}kind{PATH_END}expected a string"))),
        None => Err(D::Error::missing_field("kind")),
    }
}

const PATH_MARK: char = '\u{1}';
const PATH_END: char = '\u{2}';

/// Deserializes a variant body, keeping the inner field path in the error message.
fn tagged_body<T: DeserializeOwned, E: de::Error>(body: Value) -> std::result::Result<T, E> {
    serde_path_to_error::deserialize(body).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner().to_string();
        if path == "." {
            E::custom(inner)
        } else {
            E::custom(format!("{PATH_MARK}{path}{PATH_END}{inner}"))
        }
    })
}

fn unknown_kind<E: de::Error>(kind: &str, expected: &'static [&'static str]) -> E {
    E::custom(format!(
        "{PATH_MARK}kind{PATH_END}unknown kind `{kind}`, expected one of {}",
        expected.join(", ")
    ))
}

impl GroupSpec {
    /// Builds the oracle; `path` prefixes parse error locations.
    pub fn build(&self, path: &str) -> Result<GroupOracle> {
        let at = |field: &str, e: Error| relocate(e, &format!("{path}.{field}"));
        let (oracle, generators) = match self {
            GroupSpec::FiniteTable(FiniteTableSpec { table, generators }) => {
                let t = CayleyTable::new(table.clone()).map_err(|e| at("table", e))?;
                let all: Vec<usize> = (0..t.order()).filter(|&i| i != t.identity()).collect();
                (GroupOracle::finite(t, &all).map_err(|e| at("table", e))?, generators)
            }
            GroupSpec::Free(FreeSpec { rank, generators }) => (GroupOracle::free(*rank), generators),
            GroupSpec::FgAbelian(AbelianSpec { torsion, generators }) => (
                GroupOracle::abelian(torsion.clone()).map_err(|e| at("torsion", e))?,
                generators,
            ),
            GroupSpec::RewritingPresented(RewritingSpec { rank, rules, generators }) => {
                let system = RewritingSystem::new(*rank, rules.clone()).map_err(|e| at("rules", e))?;
                (GroupOracle::rewriting(system).map_err(|e| at("rules", e))?, generators)
            }
        };
        let Some(names) = generators else {
            return Ok(oracle);
        };
        let gens = names
            .iter()
            .enumerate()
            .map(|(i, s)| oracle.parse_element(s).map_err(|e| at(&format!("generators[{i}]"), e)))
            .collect::<Result<Vec<_>>>()?;
        oracle.with_generators(gens).map_err(|e| at("generators", e))
    }

    /// Descriptor of an oracle, with the generating set spelled out.
    pub fn describe(oracle: &GroupOracle) -> Self {
        let generators = Some(oracle.generators().iter().map(|g| oracle.format_element(g)).collect());
        match oracle.kind() {
            GroupKind::FiniteTable(t) => GroupSpec::FiniteTable(FiniteTableSpec {
                table: t.rows().to_vec(),
                generators,
            }),
            GroupKind::Free { rank } => GroupSpec::Free(FreeSpec { rank: *rank, generators }),
            GroupKind::Abelian { torsion } => GroupSpec::FgAbelian(AbelianSpec {
                torsion: torsion.clone(),
                generators,
            }),
            GroupKind::Rewriting(s) => GroupSpec::RewritingPresented(RewritingSpec {
                rank: s.rank(),
                rules: s.rules().to_vec(),
                generators,
            }),
        }
    }
}

/// Number of copies in a `multiple` descriptor: a positive integer or `"inf"`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Count(pub Multiplicity);

impl Serialize for Count {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self.0 {
            Multiplicity::Finite(n) => s.serialize_u64(n as u64),
            Multiplicity::Infinite => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Count {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            N(usize),
            S(String),
        }
        match Raw::deserialize(d)? {
            Raw::N(n) => Ok(Count(Multiplicity::Finite(n))),
            Raw::S(s) if s == "inf" => Ok(Count(Multiplicity::Infinite)),
            Raw::S(s) => Err(serde::de::Error::custom(format!("expected a count or \"inf\", got \"{s}\""))),
        }
    }
}

/// A complex number as `[re, im]`.
pub type ComplexLiteral = [f64; 2];

/// Representation descriptor mirroring [`Representation`].
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum RepSpec {
    Regular,
    Trivial(TrivialSpec),
    Matrix(MatrixSpec),
    DirectSum(DirectSumSpec),
    Multiple(MultipleSpec),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrivialSpec {
    pub dim: usize,
}

/// One row-major matrix per presentation generator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixSpec {
    pub generators: Vec<Vec<Vec<ComplexLiteral>>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub relations: Vec<Vec<i32>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DirectSumSpec {
    pub summands: Vec<RepSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MultipleSpec {
    pub of: Box<RepSpec>,
    pub count: Count,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Empty {}

impl<'de> Deserialize<'de> for RepSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let (kind, body) = split_kind(d)?;
        match kind.as_str() {
            "regular" => tagged_body::<Empty, _>(body).map(|_| RepSpec::Regular),
            "trivial" => tagged_body(body).map(RepSpec::Trivial),
            "matrix" => tagged_body(body).map(RepSpec::Matrix),
            "direct-sum" => tagged_body(body).map(RepSpec::DirectSum),
            "multiple" => tagged_body(body).map(RepSpec::Multiple),
            other => Err(unknown_kind(other, &["regular", "trivial", "matrix", "direct-sum", "multiple"])),
        }
    }
}

impl RepSpec {
    pub fn build(&self, oracle: &Arc<GroupOracle>, caps: &Caps, path: &str) -> Result<Representation> {
        let wrap = |e: Error| relocate(e, path);
        match self {
            RepSpec::Regular => Ok(Representation::regular(oracle.clone())),
            RepSpec::Trivial(TrivialSpec { dim }) => Ok(Representation::trivial(oracle.clone(), *dim)),
            RepSpec::Matrix(MatrixSpec { generators, relations }) => {
                let mats = generators
                    .iter()
                    .enumerate()
                    .map(|(i, rows)| dense_matrix(rows).map_err(|m| Error::parse(format!("{path}.generators[{i}]"), m)))
                    .collect::<Result<Vec<_>>>()?;
                let m = MatrixRep::new(oracle.clone(), mats, relations.clone()).map_err(wrap)?;
                Ok(Representation::matrix(m))
            }
            RepSpec::DirectSum(DirectSumSpec { summands }) => {
                let reps = summands
                    .iter()
                    .enumerate()
                    .map(|(i, s)| s.build(oracle, caps, &format!("{path}.summands[{i}]")))
                    .collect::<Result<Vec<_>>>()?;
                Representation::direct_sum(reps).map_err(wrap)
            }
            RepSpec::Multiple(MultipleSpec { of, count }) => {
                let inner = of.build(oracle, caps, &format!("{path}.of"))?;
                Representation::multiple(inner, count.0, caps.copies).map_err(wrap)
            }
        }
    }

    pub fn describe(rep: &Representation) -> Self {
        match rep {
            Representation::Regular(_) => RepSpec::Regular,
            Representation::Trivial { dim, .. } => RepSpec::Trivial(TrivialSpec { dim: *dim }),
            Representation::Matrix(m) => RepSpec::Matrix(MatrixSpec {
                generators: m.generators().iter().map(matrix_literal).collect(),
                relations: m.relations().to_vec(),
            }),
            Representation::DirectSum(rs) => RepSpec::DirectSum(DirectSumSpec {
                summands: rs.iter().map(RepSpec::describe).collect(),
            }),
            Representation::Multiple(r, count) => RepSpec::Multiple(MultipleSpec {
                of: Box::new(RepSpec::describe(r)),
                count: Count(*count),
            }),
        }
    }
}

fn dense_matrix(rows: &[Vec<ComplexLiteral>]) -> std::result::Result<CMatrix, String> {
    let n = rows.len();
    if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != n) {
        return Err(format!("row {i} has {} entries, expected {n}", r.len()));
    }
    Ok(CMatrix::from_fn(n, n, |i, j| Complex64::new(rows[i][j][0], rows[i][j][1])))
}

/// Row-major `[re, im]` literal of a matrix.
pub fn matrix_literal(m: &CMatrix) -> Vec<Vec<ComplexLiteral>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
        .collect()
}

/// One stored amplitude: `[copy-index, element-or-coordinate, re, im]`.
///
/// In regular blocks the second field is an element string; in
/// finite-dimensional blocks it is the coordinate index in decimal.
pub type EntryLiteral = (usize, String, f64, f64);

pub type VectorLiteral = Vec<EntryLiteral>;

/// Parses a vector literal against the block layout of `rep`.
pub fn parse_vector(rep: &Representation, literal: &[EntryLiteral], path: &str) -> Result<SparseVector> {
    let oracle = rep.oracle();
    let mut v = SparseVector::zero();
    for (i, (block, site, re, im)) in literal.iter().enumerate() {
        let here = || format!("{path}[{i}]");
        let leaf = rep
            .leaf(*block)
            .ok_or_else(|| Error::parse(here(), format!("copy-index {block} out of range")))?;
        let site = match leaf {
            Leaf::Regular(_) => Site::Element(oracle.parse_element(site).map_err(|e| relocate(e, &here()))?),
            _ => {
                let c: usize = site
                    .trim()
                    .parse()
                    .map_err(|_| Error::parse(here(), format!("expected a coordinate index, got `{site}`")))?;
                Site::Coord(c)
            }
        };
        v.add_at(Key { block: *block, site }, Complex64::new(*re, *im));
    }
    rep.check_vector(&v).map_err(|e| relocate(e, path))?;
    Ok(v)
}

/// Literal of a vector of `rep`, in key order.
pub fn vector_literal(rep: &Representation, v: &SparseVector) -> VectorLiteral {
    let oracle = rep.oracle();
    v.iter()
        .map(|(k, a)| {
            let site = match &k.site {
                Site::Element(g) => oracle.format_element(g),
                Site::Coord(c) => c.to_string(),
            };
            (k.block, site, a.re, a.im)
        })
        .collect()
}

pub fn parse_vectors(rep: &Representation, literals: &[VectorLiteral], path: &str) -> Result<Vec<SparseVector>> {
    literals
        .iter()
        .enumerate()
        .map(|(i, l)| parse_vector(rep, l, &format!("{path}[{i}]")))
        .collect()
}

pub fn vector_literals(rep: &Representation, vs: &[SparseVector]) -> Vec<VectorLiteral> {
    vs.iter().map(|v| vector_literal(rep, v)).collect()
}

/// Deserializes with the JSON path of the first offending field in the error.
pub fn from_json<T: DeserializeOwned>(text: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let mut path = String::from("$");
        let outer = e.path().to_string();
        if outer != "." {
            push_segment(&mut path, &outer);
        }
        let mut message = e.into_inner().to_string();
        while let Some(rest) = message.strip_prefix(PATH_MARK) {
            let Some((segment, tail)) = rest.split_once(PATH_END) else {
                break;
            };
            push_segment(&mut path, segment);
            message = tail.to_string();
        }
        Error::parse(path, message)
    })
}

fn push_segment(path: &mut String, segment: &str) {
    if !segment.starts_with('[') {
        path.push('.');
    }
    path.push_str(segment);
}

/// Serializes with sorted object keys and no whitespace.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let v = serde_json::to_value(value).map_err(|e| Error::structural(e.to_string()))?;
    serde_json::to_string(&v).map_err(|e| Error::structural(e.to_string()))
}

/// Like [`to_json`], indented.
pub fn to_json_pretty<T: Serialize>(value: &T) -> Result<String> {
    let v = serde_json::to_value(value).map_err(|e| Error::structural(e.to_string()))?;
    serde_json::to_string_pretty(&v).map_err(|e| Error::structural(e.to_string()))
}

/// Turns any error into a parse error located at `path`.
fn relocate(e: Error, path: &str) -> Error {
    match e {
        Error::Parse { path: inner, message } if inner.starts_with('$') => Error::Parse { path: inner, message },
        Error::Parse { path: inner, message } => Error::parse(path, format!("{inner}: {message}")),
        Error::Resource { .. } => e,
        other => Error::parse(path, other.to_string()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn roundtrip<T: Serialize + DeserializeOwned>(text: &str) -> String {
        let first = to_json(&from_json::<T>(text).unwrap()).unwrap();
        let second = to_json(&from_json::<T>(&first).unwrap()).unwrap();
        assert_eq!(first, second);
        first
    }

    #[test]
    fn group_specs_roundtrip_through_oracles() {
        let texts = [
            r#"{"kind":"free","rank":2}"#,
            r#"{"kind":"free","rank":2,"generators":["1","1,2"]}"#,
            r#"{"kind":"fg-abelian","torsion":[0,3]}"#,
            r#"{"kind":"finite-table","table":[[0,1,2],[1,2,0],[2,0,1]],"generators":["1"]}"#,
            r#"{"kind":"rewriting-presented","rank":2,"rules":[[[2,1],[1,2]],[[-2,1],[1,-2]],[[2,-1],[-1,2]],[[-2,-1],[-1,-2]]]}"#,
        ];
        for t in texts {
            let spec: GroupSpec = from_json(t).unwrap();
            let oracle = spec.build("$.group").unwrap();
            let described = GroupSpec::describe(&oracle);
            let rebuilt = described.build("$.group").unwrap();
            assert_eq!(rebuilt, oracle);
            roundtrip::<GroupSpec>(&to_json(&described).unwrap());
        }
    }

    #[test]
    fn default_generators_are_explicit_after_describe() {
        let spec: GroupSpec = from_json(r#"{"kind":"fg-abelian","torsion":[0,0]}"#).unwrap();
        let s = to_json(&GroupSpec::describe(&spec.build("g").unwrap())).unwrap();
        assert_eq!(s, r#"{"generators":["1,0","0,1"],"kind":"fg-abelian","torsion":[0,0]}"#);
    }

    #[test]
    fn bad_fields_are_located() {
        let err = from_json::<GroupSpec>(r#"{"kind":"free","rank":"two"}"#).unwrap_err();
        assert!(matches!(&err, Error::Parse { path, .. } if path == "$.rank"), "{err}");
        let err = from_json::<GroupSpec>(r#"{"kind":"free","rank":2,"colour":1}"#).unwrap_err();
        assert!(err.to_string().contains("colour"), "{err}");
        let spec: GroupSpec = from_json(r#"{"kind":"free","rank":2,"generators":["1","x"]}"#).unwrap();
        let err = spec.build("$.group").unwrap_err();
        assert!(matches!(&err, Error::Parse { path, .. } if path == "$.group.generators[1]"), "{err}");
    }

    #[test]
    fn rep_specs_roundtrip() {
        let oracle = Arc::new(GroupOracle::cyclic(2));
        let text = r#"{"kind":"direct-sum","summands":[
            {"kind":"matrix","generators":[[[[0,0],[1,0]],[[1,0],[0,0]]]]},
            {"kind":"trivial","dim":2},
            {"kind":"multiple","of":{"kind":"regular"},"count":"inf"}]}"#;
        let spec: RepSpec = from_json(text).unwrap();
        let rep = spec.build(&oracle, &Caps::default(), "$.rep").unwrap();
        assert_eq!(rep.blocks(), None);
        assert_eq!(RepSpec::describe(&rep), spec);
        roundtrip::<RepSpec>(text);
    }

    #[test]
    fn nested_rep_errors_are_located() {
        let text = r#"{"kind":"direct-sum","summands":[{"kind":"regular"},{"kind":"trivial","dim":-1}]}"#;
        let err = from_json::<RepSpec>(text).unwrap_err();
        assert!(matches!(&err, Error::Parse { path, .. } if path == "$.summands[1].dim"), "{err}");
        let err = from_json::<RepSpec>(r#"{"kind":"regulr"}"#).unwrap_err();
        assert!(matches!(&err, Error::Parse { path, .. } if path == "$.kind"), "{err}");
    }

    #[test]
    fn non_unitary_matrix_is_a_located_error() {
        let oracle = Arc::new(GroupOracle::cyclic(2));
        let spec: RepSpec = from_json(r#"{"kind":"matrix","generators":[[[[2,0]]]]}"#).unwrap();
        let err = spec.build(&oracle, &Caps::default(), "$.rep").unwrap_err();
        assert!(matches!(&err, Error::Parse { path, message } if path == "$.rep" && message.contains("unitary")));
    }

    #[test]
    fn multiple_count_respects_cap() {
        let oracle = Arc::new(GroupOracle::free(2));
        let spec: RepSpec = from_json(r#"{"kind":"multiple","of":{"kind":"regular"},"count":5}"#).unwrap();
        let caps = Caps { copies: 4, ..Caps::default() };
        assert!(matches!(spec.build(&oracle, &caps, "r"), Err(Error::Resource { cap: "copies", .. })));
        assert!(from_json::<RepSpec>(r#"{"kind":"multiple","of":{"kind":"regular"},"count":"many"}"#).is_err());
    }

    #[test]
    fn vector_literals_roundtrip() {
        let oracle = Arc::new(GroupOracle::free(2));
        let rep = Representation::direct_sum(vec![
            Representation::trivial(oracle.clone(), 2),
            Representation::regular(oracle.clone()),
        ])
        .unwrap();
        let lit: VectorLiteral = from_json(r#"[[1,"1,-1,2",0.5,0],[0,"1",0,-1],[1,"e",0.25,0.0]]"#).unwrap();
        let v = parse_vector(&rep, &lit, "$.v").unwrap();
        assert_eq!(v.len(), 3);
        let back = vector_literal(&rep, &v);
        assert_eq!(parse_vector(&rep, &back, "$.v").unwrap(), v);
        assert_eq!(back[0], (0, "1".to_string(), 0.0, -1.0));

        let bad: VectorLiteral = from_json(r#"[[0,"e",1,0]]"#).unwrap();
        let err = parse_vector(&rep, &bad, "$.v").unwrap_err();
        assert!(matches!(&err, Error::Parse { path, .. } if path == "$.v[0]"), "{err}");
        let bad: VectorLiteral = from_json(r#"[[2,"e",1,0]]"#).unwrap();
        assert!(parse_vector(&rep, &bad, "$.v").is_err());
    }

    #[test]
    fn words_are_canonicalized_on_parse() {
        let oracle = Arc::new(GroupOracle::free(2));
        let rep = Representation::regular(oracle);
        let lit: VectorLiteral = from_json(r#"[[0,"1,2,-2",1,0]]"#).unwrap();
        let v = parse_vector(&rep, &lit, "v").unwrap();
        assert_eq!(vector_literal(&rep, &v)[0].1, "1");
    }
}
