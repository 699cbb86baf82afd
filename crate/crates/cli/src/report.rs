//! Report layout and JSON encodings shared by the subcommands and `verify`.

use serde_json::{json, Value};
use unirep::config::matrix_literal;
use unirep::gram::GramFunction;
use unirep::rep::CMatrix;
use unirep::{Complex64, Error, GroupElement, GroupOracle, Result};

/// Report format version.
pub const FORMAT: u64 = 1;

/// Accepted deviation of a recomputed headline.
pub const VERIFY_TOL: f64 = 1e-9;

pub struct Report {
    pub command: &'static str,
    pub inputs: Value,
    pub parameters: Value,
    pub outputs: Value,
    pub headline: (&'static str, f64),
    /// Header plus rows.
    pub csv: Option<Vec<Vec<String>>>,
}

impl Report {
    pub fn to_value(&self) -> Value {
        json!({
            "command": self.command,
            "format": FORMAT,
            "inputs": self.inputs,
            "parameters": self.parameters,
            "outputs": self.outputs,
            "headline": {"name": self.headline.0, "value": self.headline.1},
        })
    }
}

pub fn complex(z: Complex64) -> Value {
    json!([z.re, z.im])
}

pub fn gram_json(oracle: &GroupOracle, g: &GramFunction) -> Value {
    json!({
        "elements": g.elements().iter().map(|x| oracle.format_element(x)).collect::<Vec<_>>(),
        "matrices": g.matrices().iter().map(matrix_literal).collect::<Vec<_>>(),
    })
}

pub fn parse_gram(oracle: &GroupOracle, v: &Value, path: &str) -> Result<GramFunction> {
    let elements = field(v, "elements", path)?
        .as_array()
        .ok_or_else(|| Error::Parse {
            path: format!("{path}.elements"),
            message: "expected an array".into(),
        })?
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let s = s.as_str().ok_or_else(|| Error::Parse {
                path: format!("{path}.elements[{i}]"),
                message: "expected a string".into(),
            })?;
            oracle.parse_element(s)
        })
        .collect::<Result<Vec<GroupElement>>>()?;
    let literals: Vec<Vec<Vec<[f64; 2]>>> = decode(field(v, "matrices", path)?, &format!("{path}.matrices"))?;
    let matrices = literals.iter().map(|m| matrix_from_literal(m)).collect::<Result<Vec<_>>>()?;
    GramFunction::from_parts(elements, matrices)
}

pub fn matrix_from_literal(rows: &[Vec<[f64; 2]>]) -> Result<CMatrix> {
    let n = rows.len();
    let m = rows.first().map_or(0, |r| r.len());
    if rows.iter().any(|r| r.len() != m) {
        return Err(Error::Parse {
            path: "matrix".into(),
            message: "ragged rows".into(),
        });
    }
    Ok(CMatrix::from_fn(n, m, |i, j| Complex64::new(rows[i][j][0], rows[i][j][1])))
}

/// `v[name]`, or a parse error naming the missing field.
pub fn field<'a>(v: &'a Value, name: &str, path: &str) -> Result<&'a Value> {
    v.get(name).ok_or_else(|| Error::Parse {
        path: format!("{path}.{name}"),
        message: "missing field".into(),
    })
}

pub fn decode<T: serde::de::DeserializeOwned>(v: &Value, path: &str) -> Result<T> {
    let text = v.to_string();
    unirep::config::from_json(&text).map_err(|e| match e {
        Error::Parse { path: inner, message } => Error::Parse {
            path: format!("{path}{}", inner.trim_start_matches('$')),
            message,
        },
        other => other,
    })
}
