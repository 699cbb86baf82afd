//! Recomputes the numbers a report claims from the data it carries.

use serde_json::Value;
use unirep::amalgam::isometry_defect;
use unirep::config::{parse_vector, parse_vectors, RepSpec, VectorLiteral};
use unirep::gram::gram;
use unirep::stability::{canonical_base_defect, closure};
use unirep::{Error, Representation, Result, SparseVector, Subspace};

use crate::commands::{equivariance_defect, Ctx};
use crate::config::WorkbenchConfig;
use crate::report::{decode, field, matrix_from_literal, parse_gram};

/// One recomputed quantity next to the reported one.
#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub reported: f64,
    pub recomputed: f64,
}

impl Check {
    fn new(name: impl Into<String>, reported: f64, recomputed: f64) -> Self {
        Self {
            name: name.into(),
            reported,
            recomputed,
        }
    }

    pub fn deviation(&self) -> f64 {
        (self.reported - self.recomputed).abs()
    }
}

/// The headline check first, then secondary consistency checks.
pub fn recompute(report: &Value) -> Result<Vec<Check>> {
    let command = str_at(report, "command", "$")?;
    let headline = field(report, "headline", "$")?;
    let name = str_at(headline, "name", "$.headline")?;
    let reported = f64_at(headline, "value", "$.headline")?;
    let cfg: WorkbenchConfig = decode(
        field(field(report, "inputs", "$")?, "config", "$.inputs")?,
        "$.inputs.config",
    )?;
    let ctx = Ctx::new(cfg)?;
    let out = field(report, "outputs", "$")?;
    let params = field(report, "parameters", "$")?;
    let mut checks = Vec::new();
    let head = |checks: &mut Vec<Check>, value: f64| checks.insert(0, Check::new(name.clone(), reported, value));
    match command.as_str() {
        "probe-amenability" => {
            let p: Vec<f64> = field(out, "trace", "$.outputs")?
                .as_array()
                .ok_or_else(|| bad("$.outputs.trace", "expected an array"))?
                .iter()
                .enumerate()
                .map(|(n, row)| f64_at(row, "p", &format!("$.outputs.trace[{n}]")))
                .collect::<Result<_>>()?;
            if p.len() < 2 {
                return Err(bad("$.outputs.trace", "needs at least two rows"));
            }
            let n = p.len() - 1;
            head(&mut checks, (p[n] / p[n - 1]).sqrt());
            if let Some(lit) = out.get("argmin").filter(|v| !v.is_null()) {
                let lam = Representation::regular(ctx.oracle.clone());
                let lit: VectorLiteral = decode(lit, "$.outputs.argmin")?;
                let w = parse_vector(&lam, &lit, "$.outputs.argmin")?;
                let defects = field(out, "defects", "$.outputs")?
                    .as_array()
                    .ok_or_else(|| bad("$.outputs.defects", "expected an array"))?;
                let last = defects.last().ok_or_else(|| bad("$.outputs.defects", "empty"))?;
                let reported = f64_at(last, "min_avg_sq_defect", "$.outputs.defects[-1]")?;
                checks.push(Check::new("min_avg_sq_defect", reported, averaged_defect(&lam, &w)?));
            }
        }
        "contain" => {
            let pi = ctx.rep(ctx.cfg.representation.as_ref(), "$.inputs.config.representation")?;
            let target = parse_gram(&ctx.oracle, field(out, "target_gram", "$.outputs")?, "$.outputs.target_gram")?;
            let w = vectors_at(&pi, out, "witnesses")?;
            let actual = gram(&pi, &w, target.elements())?;
            head(&mut checks, target.max_abs_diff(&actual)?);
            let claimed = parse_gram(&ctx.oracle, field(out, "witness_gram", "$.outputs")?, "$.outputs.witness_gram")?;
            checks.push(Check::new("witness_gram", 0.0, claimed.max_abs_diff(&actual)?));
        }
        "folner-witness" => {
            let lam = Representation::regular(ctx.oracle.clone());
            let lit: VectorLiteral = decode(field(out, "vector", "$.outputs")?, "$.outputs.vector")?;
            let w = parse_vector(&lam, &lit, "$.outputs.vector")?;
            let f: Vec<String> = decode(field(params, "elements", "$.parameters")?, "$.parameters.elements")?;
            let f = ctx.elements(Some(&f), "$.parameters.elements")?;
            let mut worst: f64 = 0.0;
            for g in &f {
                worst = worst.max((&lam.apply(g, &w)? - &w).norm_sqr());
            }
            head(&mut checks, worst);
        }
        "transfer" => {
            let eta = ctx.rep(ctx.cfg.representation.as_ref(), "$.inputs.config.representation")?;
            let target = parse_gram(&ctx.oracle, field(out, "target_gram", "$.outputs")?, "$.outputs.target_gram")?;
            let mut family = ctx.optional_vectors(&eta, "params")?;
            family.extend(vectors_at(&eta, out, "witnesses")?);
            let actual = gram(&eta, &family, target.elements())?;
            head(&mut checks, target.max_abs_diff(&actual)?);
        }
        "nondividing" => {
            let pi = ctx.rep(ctx.cfg.representation.as_ref(), "$.inputs.config.representation")?;
            let r = usize_at(params, "radius", "$.parameters")?;
            let c = closure(&pi, &ctx.vectors(&pi, "closure", "verify")?, r, &[], &ctx.cfg.task.caps)?;
            let worst = field(out, "worst", "$.outputs")?;
            if worst.is_null() {
                head(&mut checks, 0.0);
            } else {
                let a = ctx.vectors(&pi, "a", "verify")?;
                let b = ctx.vectors(&pi, "b", "verify")?;
                let i = usize_at(worst, "i", "$.outputs.worst")?;
                let j = usize_at(worst, "b", "$.outputs.worst")?;
                let g = ctx.oracle.parse_element(&str_at(worst, "g", "$.outputs.worst")?)?;
                let h = ctx.oracle.parse_element(&str_at(worst, "h", "$.outputs.worst")?)?;
                let ai = a.get(i).ok_or_else(|| bad("$.outputs.worst.i", "out of range"))?;
                let bj = b.get(j).ok_or_else(|| bad("$.outputs.worst.b", "out of range"))?;
                let x = c.realized.residual(&pi.apply(&g, ai)?);
                let y = c.realized.residual(&pi.apply(&h, bj)?);
                head(&mut checks, x.inner(&y).norm());
            }
        }
        "canonical-base" => {
            let pi = ctx.rep(ctx.cfg.representation.as_ref(), "$.inputs.config.representation")?;
            let r = usize_at(params, "radius", "$.parameters")?;
            let a = ctx.vectors(&pi, "a", "verify")?;
            let c = closure(&pi, &ctx.vectors(&pi, "closure", "verify")?, r, &[], &ctx.cfg.task.caps)?;
            let d = Subspace::from_orthonormal(vectors_at(&pi, out, "basis")?)?;
            head(&mut checks, canonical_base_defect(&pi, &a, &c.realized, &d, &c.elements)?);
        }
        "superstable" => {
            let pi = ctx.rep(ctx.cfg.representation.as_ref(), "$.inputs.config.representation")?;
            let r = usize_at(params, "radius", "$.parameters")?;
            let caps = ctx.cfg.task.caps;
            let a = ctx.vectors(&pi, "a", "verify")?;
            let c = closure(&pi, &ctx.vectors(&pi, "generators", "verify")?, r, &[], &caps)?;
            let c0 = Subspace::span(vectors_at(&pi, out, "a0")?, caps.closure_dim)?;
            let b = vectors_at(&pi, out, "b")?;
            let mut gap: f64 = 0.0;
            let mut b_dev: f64 = 0.0;
            for (ai, bi) in a.iter().zip(&b) {
                let pc = c.realized.project(ai);
                let p0 = c0.project(ai);
                gap = gap.max((&pc - &p0).norm());
                let expected = &(ai - &pc) + &p0;
                b_dev = b_dev.max((&expected - bi).norm());
            }
            head(&mut checks, gap);
            checks.push(Check::new("b", 0.0, b_dev));
        }
        "amalgamate" => {
            let maps: Vec<_> = ["rho_map", "eta_map"]
                .iter()
                .map(|k| {
                    let lit: Vec<Vec<[f64; 2]>> = decode(field(out, k, "$.outputs")?, &format!("$.outputs.{k}"))?;
                    matrix_from_literal(&lit)
                })
                .collect::<Result<_>>()?;
            head(&mut checks, isometry_defect(&maps[0]).max(isometry_defect(&maps[1])));
            let spec: RepSpec = decode(field(out, "representation", "$.outputs")?, "$.outputs.representation")?;
            let am = spec.build(&ctx.oracle, &ctx.cfg.task.caps, "$.outputs.representation")?;
            let eq = field(out, "equivariance_defect", "$.outputs")?;
            for (k, spec, map) in [("rho", &ctx.cfg.rho, &maps[0]), ("eta", &ctx.cfg.eta, &maps[1])] {
                let factor = ctx.rep(spec.as_ref(), &format!("$.inputs.config.{k}"))?;
                let reported = f64_at(eq, k, "$.outputs.equivariance_defect")?;
                checks.push(Check::new(format!("equivariance_defect.{k}"), reported, equivariance_defect(&am, &factor, map)?));
            }
        }
        other => return Err(bad("$.command", &format!("unknown report command `{other}`"))),
    }
    Ok(checks)
}

/// `avg_{s ∈ S±} ‖λ(s)w − w‖² / ‖w‖²`.
fn averaged_defect(lam: &Representation, w: &SparseVector) -> Result<f64> {
    let sym = lam.oracle().symmetric_generators()?;
    let mut total = 0.0;
    for s in &sym {
        total += (&lam.apply(s, w)? - w).norm_sqr();
    }
    Ok(total / sym.len() as f64 / w.norm_sqr())
}

fn vectors_at(rep: &Representation, out: &Value, name: &str) -> Result<Vec<SparseVector>> {
    let path = format!("$.outputs.{name}");
    let lits: Vec<VectorLiteral> = decode(field(out, name, "$.outputs")?, &path)?;
    parse_vectors(rep, &lits, &path)
}

fn bad(path: &str, message: &str) -> Error {
    Error::Parse {
        path: path.to_string(),
        message: message.to_string(),
    }
}

fn str_at(v: &Value, name: &str, path: &str) -> Result<String> {
    field(v, name, path)?
        .as_str()
        .map(str::to_string)
        .ok_or_else(|| bad(&format!("{path}.{name}"), "expected a string"))
}

fn f64_at(v: &Value, name: &str, path: &str) -> Result<f64> {
    field(v, name, path)?
        .as_f64()
        .ok_or_else(|| bad(&format!("{path}.{name}"), "expected a number"))
}

fn usize_at(v: &Value, name: &str, path: &str) -> Result<usize> {
    field(v, name, path)?
        .as_u64()
        .map(|x| x as usize)
        .ok_or_else(|| bad(&format!("{path}.{name}"), "expected a non-negative integer"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn deviation_is_absolute() {
        assert_eq!(Check::new("x", 1.0, 0.75).deviation(), 0.25);
    }

    #[test]
    fn unknown_command_is_rejected() {
        let report = json!({
            "command": "teleport",
            "headline": {"name": "x", "value": 0.0},
            "inputs": {"config": {"group": {"kind": "free", "rank": 1}}},
            "outputs": {},
            "parameters": {},
        });
        let err = recompute(&report).unwrap_err().to_string();
        assert!(err.contains("teleport"), "{err}");
    }

    #[test]
    fn missing_headline_names_field() {
        let err = recompute(&json!({"command": "contain"})).unwrap_err().to_string();
        assert!(err.contains("$.headline"), "{err}");
    }
}
