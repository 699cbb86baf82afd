//! One function per computing subcommand. Each returns a [`Report`] whose
//! `inputs.config` is the effective config, so `verify` can rebuild every object.

use std::sync::Arc;

use serde_json::{json, Value};
use unirep::amalgam::{amalgamate, isometry_defect};
use unirep::amenability::{min_defect, return_probabilities, spectral_radius_bound, DEFAULT_EXACT_STEPS};
use unirep::config::{matrix_literal, parse_vectors, vector_literal, vector_literals, GroupSpec, RepSpec};
use unirep::containment::{
    default_basis, folner_witness, identity_and_generators, search_witness, transfer_witness, trivial_target,
    trivial_target_lower_bound, SearchOptions, SplitVector,
};
use unirep::gram::{gram, GramFunction};
use unirep::rep::{max_abs, Leaf};
use unirep::stability::{
    canonical_base, canonical_base_defect, closure, nondividing, superstable_approx, ClosureSpec, NondividingOptions,
    TraceRow, INDEPENDENCE_TOL,
};
use unirep::{Caps, Error, GroupElement, GroupOracle, Representation, Result, SparseVector, Subspace};

use crate::config::{TargetSpec, WorkbenchConfig};
use crate::report::{complex, gram_json, matrix_from_literal, Report};

/// Built group plus the effective config.
pub struct Ctx {
    pub cfg: WorkbenchConfig,
    pub oracle: Arc<GroupOracle>,
}

impl Ctx {
    pub fn new(mut cfg: WorkbenchConfig) -> Result<Self> {
        let oracle = Arc::new(cfg.group.build("$.group")?);
        cfg.group = GroupSpec::describe(&oracle);
        Ok(Self { cfg, oracle })
    }

    pub fn caps(&self) -> Caps {
        self.cfg.task.caps
    }

    pub fn rep(&self, spec: Option<&RepSpec>, path: &str) -> Result<Representation> {
        match spec {
            Some(s) => s.build(&self.oracle, &self.caps(), path),
            None => Ok(Representation::regular(self.oracle.clone())),
        }
    }

    pub fn required_rep(&self, spec: Option<&RepSpec>, path: &str, command: &str) -> Result<Representation> {
        match spec {
            Some(s) => s.build(&self.oracle, &self.caps(), path),
            None => Err(missing(path, command)),
        }
    }

    pub fn vectors(&self, rep: &Representation, name: &str, command: &str) -> Result<Vec<SparseVector>> {
        let path = format!("$.vectors.{name}");
        let lits = self.cfg.vectors.get(name).ok_or_else(|| missing(&path, command))?;
        parse_vectors(rep, lits, &path)
    }

    pub fn optional_vectors(&self, rep: &Representation, name: &str) -> Result<Vec<SparseVector>> {
        match self.cfg.vectors.get(name) {
            Some(lits) => parse_vectors(rep, lits, &format!("$.vectors.{name}")),
            None => Ok(Vec::new()),
        }
    }

    /// `F` from an explicit list, else `{e} ∪ S`.
    pub fn elements(&self, list: Option<&Vec<String>>, path: &str) -> Result<Vec<GroupElement>> {
        match list {
            Some(l) => l
                .iter()
                .enumerate()
                .map(|(i, s)| {
                    self.oracle.parse_element(s).map_err(|e| Error::Parse {
                        path: format!("{path}[{i}]"),
                        message: e.to_string(),
                    })
                })
                .collect(),
            None => Ok(identity_and_generators(&self.oracle)),
        }
    }

    pub fn format_elements(&self, f: &[GroupElement]) -> Vec<String> {
        f.iter().map(|g| self.oracle.format_element(g)).collect()
    }

    fn inputs(&self) -> Value {
        json!({ "config": serde_json::to_value(&self.cfg).expect("config serializes") })
    }
}

fn missing(path: &str, command: &str) -> Error {
    Error::Parse {
        path: path.to_string(),
        message: format!("required by `{command}`"),
    }
}

fn radius(ctx: &mut Ctx, default: usize) -> usize {
    *ctx.cfg.task.radius.get_or_insert(default)
}

fn tol(ctx: &mut Ctx, default: f64) -> f64 {
    *ctx.cfg.task.tol.get_or_insert(default)
}

fn eps(ctx: &mut Ctx, default: f64) -> f64 {
    *ctx.cfg.task.eps.get_or_insert(default)
}

pub fn probe_amenability(mut ctx: Ctx) -> Result<Report> {
    let nmax = *ctx.cfg.task.nmax.get_or_insert(50);
    let exact_steps = *ctx.cfg.task.exact_steps.get_or_insert(DEFAULT_EXACT_STEPS);
    let r = radius(&mut ctx, 6);
    let caps = ctx.caps();
    let table = return_probabilities(&ctx.oracle, nmax, exact_steps, &caps)?;
    let trace: Vec<Value> = (0..=nmax)
        .map(|n| {
            json!({
                "n": n,
                "p": table.p[n],
                "exact": table.exact[n].as_ref().map(|q| q.to_string()),
                "root": table.root[n],
                "ratio": table.ratio[n],
            })
        })
        .collect();
    let mut defects = Vec::with_capacity(r);
    let mut argmin = None;
    for radius in 1..=r {
        let d = min_defect(&ctx.oracle, radius, &caps)?;
        let s = spectral_radius_bound(&ctx.oracle, radius, &caps)?;
        defects.push(json!({
            "radius": radius,
            "ball_size": d.ball_size,
            "min_avg_sq_defect": d.min_avg_sq_defect,
            "residual": d.residual,
            "certified": d.certified,
            "spectral_lower": s.lower,
            "spectral_upper": s.upper,
            "schur_q": s.q,
        }));
        if radius == r {
            argmin = Some(d.argmin);
        }
    }
    let lam = Representation::regular(ctx.oracle.clone());
    let csv = std::iter::once(vec!["n", "p", "exact", "root", "ratio"].into_iter().map(String::from).collect())
        .chain((0..=nmax).map(|n| {
            vec![
                n.to_string(),
                table.p[n].to_string(),
                table.exact[n].as_ref().map_or(String::new(), |q| q.to_string()),
                table.root[n].to_string(),
                table.ratio[n].to_string(),
            ]
        }))
        .collect();
    let estimate = table.ratio_estimate();
    Ok(Report {
        command: "probe-amenability",
        inputs: ctx.inputs(),
        parameters: json!({"nmax": nmax, "exact_steps": exact_steps, "radius": r}),
        outputs: json!({
            "method": table.method,
            "trace": trace,
            "ratio_estimate": estimate,
            "defects": defects,
            "argmin": argmin.map(|v| vector_literal(&lam, &v)),
        }),
        headline: ("ratio_estimate", estimate),
        csv: Some(csv),
    })
}

/// Gram target and optional warm start for `contain`.
fn contain_target(ctx: &Ctx, pi: &Representation, t: &TargetSpec) -> Result<(GramFunction, Option<Vec<SparseVector>>)> {
    let f = ctx.elements(t.elements.as_ref().or(ctx.cfg.elements.as_ref()), "$.target.elements")?;
    if let Some(ms) = &t.matrices {
        if t.vectors.is_some() {
            return Err(Error::Parse {
                path: "$.target".into(),
                message: "give either `vectors` or `matrices`".into(),
            });
        }
        let mats = ms.iter().map(|m| matrix_from_literal(m)).collect::<Result<Vec<_>>>()?;
        return Ok((GramFunction::from_parts(f, mats)?, None));
    }
    let Some(lits) = &t.vectors else {
        return Ok((trivial_target(&f)?, None));
    };
    let same = t.representation.is_none() || t.representation == ctx.cfg.representation;
    let rho = match &t.representation {
        Some(s) => s.build(&ctx.oracle, &ctx.caps(), "$.target.representation")?,
        None => pi.clone(),
    };
    let vs = parse_vectors(&rho, lits, "$.target.vectors")?;
    let g = gram(&rho, &vs, &f)?;
    Ok((g, same.then_some(vs)))
}

/// Blocks spanned by the default `contain` basis: the finite prefix plus the first tail copy.
fn default_blocks(pi: &Representation) -> Vec<usize> {
    let p = pi.finite_prefix_blocks();
    if pi.blocks().is_none() {
        (0..=p).collect()
    } else {
        (0..p).collect()
    }
}

/// δ-vectors on `B_r` in regular blocks, all coordinates in finite-dimensional blocks.
fn search_basis(pi: &Representation, r: usize, blocks: &[usize], caps: &Caps) -> Result<Subspace> {
    let mut regular = Vec::new();
    let mut coords = Vec::new();
    for &b in blocks {
        match pi.leaf(b) {
            Some(Leaf::Regular(_)) => regular.push(b),
            Some(l) => coords.extend((0..l.dim().expect("finite block")).map(|i| SparseVector::basis(b, i))),
            None => {
                return Err(Error::Parse {
                    path: "$.task.copies".into(),
                    message: format!("copy-index {b} out of range"),
                })
            }
        }
    }
    let mut basis = default_basis(pi, r, &regular, caps)?.into_basis();
    basis.extend(coords);
    if basis.len() > caps.closure_dim {
        return Err(Error::Resource {
            cap: "closure-dim",
            limit: caps.closure_dim,
            detail: format!("search basis with {} vectors", basis.len()),
        });
    }
    Subspace::from_orthonormal(basis)
}

pub fn contain(mut ctx: Ctx, target: Option<TargetSpec>) -> Result<Report> {
    let r = radius(&mut ctx, 4);
    let tol = tol(&mut ctx, 1e-6);
    let defaults = SearchOptions::default();
    let restarts = *ctx.cfg.task.restarts.get_or_insert(defaults.restarts);
    let budget = *ctx.cfg.task.budget.get_or_insert(defaults.budget);
    if let Some(t) = target {
        ctx.cfg.target = Some(t);
    }
    let t = ctx.cfg.target.clone().unwrap_or_default();
    let pi = ctx.rep(ctx.cfg.representation.as_ref(), "$.representation")?;
    let blocks = ctx.cfg.task.copies.clone().unwrap_or_else(|| default_blocks(&pi));
    ctx.cfg.task.copies = Some(blocks.clone());
    let caps = ctx.caps();
    let (target_gram, warm_start) = contain_target(&ctx, &pi, &t)?;
    let basis = search_basis(&pi, r, &blocks, &caps)?;
    let opts = SearchOptions {
        tol,
        budget,
        seed: ctx.cfg.task.seed,
        restarts,
        warm_start,
    };
    let found = search_witness(&target_gram, &pi, &basis, &opts)?;

    let f = target_gram.elements();
    let e = ctx.oracle.identity();
    let trivial = t.vectors.is_none() && t.matrices.is_none();
    let covers = f.contains(&e) && ctx.oracle.generators().iter().all(|s| f.contains(s));
    let all_regular = blocks.iter().all(|&b| matches!(pi.leaf(b), Some(Leaf::Regular(_))));
    let lower_bound = if trivial && covers && all_regular && ctx.oracle.order().is_none() {
        Some(trivial_target_lower_bound(&ctx.oracle, r, &caps)?)
    } else {
        None
    };
    Ok(Report {
        command: "contain",
        inputs: ctx.inputs(),
        parameters: json!({
            "radius": r, "tol": tol, "seed": opts.seed, "restarts": restarts, "budget": budget,
            "copies": blocks,
        }),
        outputs: json!({
            "discrepancy": found.discrepancy,
            "converged": found.converged,
            "iterations": found.iterations,
            "restart": found.restart,
            "basis_dim": basis.dim(),
            "witnesses": vector_literals(&pi, &found.witnesses),
            "witness_gram": gram_json(&ctx.oracle, &found.witness_gram),
            "target_gram": gram_json(&ctx.oracle, &target_gram),
            "lower_bound": lower_bound,
        }),
        headline: ("discrepancy", found.discrepancy),
        csv: None,
    })
}

pub fn folner(mut ctx: Ctx) -> Result<Report> {
    let eps = eps(&mut ctx, 0.05);
    let f = ctx.elements(ctx.cfg.elements.as_ref(), "$.elements")?;
    let w = folner_witness(&ctx.oracle, &f, eps, &ctx.caps())?;
    let lam = Representation::regular(ctx.oracle.clone());
    let defect = w.defect_f64();
    Ok(Report {
        command: "folner-witness",
        inputs: ctx.inputs(),
        parameters: json!({"eps": eps, "elements": ctx.format_elements(&f)}),
        outputs: json!({
            "side": w.side,
            "size": w.size,
            "defect_exact": w.defect.to_string(),
            "defect": defect,
            "vector": vector_literal(&lam, &w.vector),
        }),
        headline: ("defect", defect),
        csv: None,
    })
}

pub fn transfer(mut ctx: Ctx) -> Result<Report> {
    let eps = eps(&mut ctx, 0.05);
    let eta = ctx.required_rep(ctx.cfg.representation.as_ref(), "$.representation", "transfer")?;
    let sigma = ctx.required_rep(ctx.cfg.complement.as_ref(), "$.complement", "transfer")?;
    let params = ctx.optional_vectors(&eta, "params")?;
    let lits = ctx.cfg.targets.as_ref().ok_or_else(|| missing("$.targets", "transfer"))?;
    let targets = lits
        .iter()
        .enumerate()
        .map(|(i, t)| {
            Ok(SplitVector {
                eta: unirep::config::parse_vector(&eta, &t.eta, &format!("$.targets[{i}].eta"))?,
                complement: unirep::config::parse_vector(&sigma, &t.complement, &format!("$.targets[{i}].complement"))?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let f = ctx.elements(ctx.cfg.elements.as_ref(), "$.elements")?;
    let rep = transfer_witness(&eta, &sigma, &params, &targets, &f, eps, &ctx.caps())?;
    Ok(Report {
        command: "transfer",
        inputs: ctx.inputs(),
        parameters: json!({"eps": eps, "elements": ctx.format_elements(&f)}),
        outputs: json!({
            "discrepancy": rep.discrepancy,
            "witnesses": vector_literals(&eta, &rep.witnesses),
            "target_gram": gram_json(&ctx.oracle, &rep.target_gram),
            "witness_gram": gram_json(&ctx.oracle, &rep.witness_gram),
            "cross_term": rep.cross_term,
            "fresh_copies": rep.fresh_copies,
            "folner": rep.folner.as_ref().map(|w| json!({
                "side": w.side, "size": w.size, "defect_exact": w.defect.to_string(), "defect": w.defect_f64(),
            })),
        }),
        headline: ("discrepancy", rep.discrepancy),
        csv: None,
    })
}

fn trace_csv(trace: &[TraceRow]) -> Vec<Vec<String>> {
    let probes = trace.first().map_or(0, |t| t.probe_norms.len());
    let mut header: Vec<String> = vec!["radius".into(), "dim".into()];
    header.extend((0..probes).map(|i| format!("probe_{i}")));
    std::iter::once(header)
        .chain(trace.iter().map(|t| {
            let mut row = vec![t.radius.to_string(), t.dim.to_string()];
            row.extend(t.probe_norms.iter().map(|x| x.to_string()));
            row
        }))
        .collect()
}

fn trace_json(trace: &[TraceRow]) -> Value {
    trace
        .iter()
        .map(|t| json!({"radius": t.radius, "dim": t.dim, "probe_norms": t.probe_norms}))
        .collect()
}

/// `C` for the stability subcommands: the closure of `vectors.closure` over `B_r`.
pub fn closure_of(ctx: &Ctx, pi: &Representation, r: usize, probes: &[SparseVector], command: &str) -> Result<ClosureSpec> {
    let gens = ctx.vectors(pi, "closure", command)?;
    closure(pi, &gens, r, probes, &ctx.caps())
}

pub fn nondividing_cmd(mut ctx: Ctx) -> Result<Report> {
    let r = radius(&mut ctx, 2);
    let tol = tol(&mut ctx, INDEPENDENCE_TOL);
    let a_radius = *ctx.cfg.task.a_radius.get_or_insert(r);
    let b_radius = *ctx.cfg.task.b_radius.get_or_insert(r);
    let pi = ctx.rep(ctx.cfg.representation.as_ref(), "$.representation")?;
    let a = ctx.vectors(&pi, "a", "nondividing")?;
    let b = ctx.vectors(&pi, "b", "nondividing")?;
    let probes: Vec<SparseVector> = a.iter().chain(&b).cloned().collect();
    let c = closure_of(&ctx, &pi, r, &probes, "nondividing")?;
    let opts = NondividingOptions { tol, a_radius, b_radius };
    let verdict = nondividing(&pi, &a, &b, &c.realized, &opts, &ctx.caps())?;
    let worst = verdict.worst.as_ref().map(|w| {
        json!({
            "i": w.i, "b": w.b,
            "g": ctx.oracle.format_element(&w.g), "h": ctx.oracle.format_element(&w.h),
            "value": complex(w.value), "abs": w.value.norm(),
        })
    });
    Ok(Report {
        command: "nondividing",
        inputs: ctx.inputs(),
        parameters: json!({"radius": r, "tol": tol, "a_radius": a_radius, "b_radius": b_radius}),
        outputs: json!({
            "independent": verdict.independent,
            "worst": worst,
            "closure_dim": c.dim(),
            "trace": trace_json(&c.trace),
        }),
        headline: ("worst_abs", verdict.worst_abs()),
        csv: Some(trace_csv(&c.trace)),
    })
}

pub fn canonical_base_cmd(mut ctx: Ctx) -> Result<Report> {
    let r = radius(&mut ctx, 2);
    let pi = ctx.rep(ctx.cfg.representation.as_ref(), "$.representation")?;
    let a = ctx.vectors(&pi, "a", "canonical-base")?;
    let c = closure_of(&ctx, &pi, r, &a, "canonical-base")?;
    let d = canonical_base(&pi, &a, &c, &ctx.caps())?;
    let defect = canonical_base_defect(&pi, &a, &c.realized, &d, &c.elements)?;
    Ok(Report {
        command: "canonical-base",
        inputs: ctx.inputs(),
        parameters: json!({"radius": r}),
        outputs: json!({
            "dim": d.dim(),
            "basis": vector_literals(&pi, d.basis()),
            "defect": defect,
            "closure_dim": c.dim(),
            "trace": trace_json(&c.trace),
        }),
        headline: ("defect", defect),
        csv: Some(trace_csv(&c.trace)),
    })
}

pub fn superstable(mut ctx: Ctx) -> Result<Report> {
    let r = radius(&mut ctx, 2);
    let eps = eps(&mut ctx, 1e-3);
    let pi = ctx.rep(ctx.cfg.representation.as_ref(), "$.representation")?;
    let a = ctx.vectors(&pi, "a", "superstable")?;
    let gens = ctx.vectors(&pi, "generators", "superstable")?;
    let s = superstable_approx(&pi, &a, &gens, eps, r, &ctx.caps())?;
    let max_gap = s.gaps.iter().cloned().fold(0.0, f64::max);
    Ok(Report {
        command: "superstable",
        inputs: ctx.inputs(),
        parameters: json!({"radius": r, "eps": eps}),
        outputs: json!({
            "selected": s.selected,
            "a0": vector_literals(&pi, &s.a0),
            "b": vector_literals(&pi, &s.b),
            "gaps": s.gaps,
            "max_gap": max_gap,
            "closure_dim": s.closure.dim(),
            "c0_dim": s.c0.dim(),
            "trace": trace_json(&s.closure.trace),
        }),
        headline: ("max_gap", max_gap),
        csv: Some(trace_csv(&s.closure.trace)),
    })
}

/// `max_s |A(s)J − Jρ(s)|` over presentation generators.
pub fn equivariance_defect(amalgam: &Representation, factor: &Representation, map: &unirep::rep::CMatrix) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for s in amalgam.oracle().presentation_generators() {
        let lhs = amalgam.dense_matrix(&s)? * map;
        let rhs = map * factor.dense_matrix(&s)?;
        worst = worst.max(max_abs(&(lhs - rhs)));
    }
    Ok(worst)
}

pub fn amalgamate_cmd(ctx: Ctx) -> Result<Report> {
    let pi = ctx.required_rep(ctx.cfg.representation.as_ref(), "$.representation", "amalgamate")?;
    let rho = ctx.required_rep(ctx.cfg.rho.as_ref(), "$.rho", "amalgamate")?;
    let eta = ctx.required_rep(ctx.cfg.eta.as_ref(), "$.eta", "amalgamate")?;
    let embedding = |rep: &Representation, name: &str| -> Result<Subspace> {
        let vs = ctx.vectors(rep, name, "amalgamate")?;
        Subspace::from_orthonormal(vs).map_err(|e| Error::Parse {
            path: format!("$.vectors.{name}"),
            message: e.to_string(),
        })
    };
    let rho_emb = embedding(&rho, "rho-embedding")?;
    let eta_emb = embedding(&eta, "eta-embedding")?;
    let am = amalgamate(&pi, &rho, &rho_emb, &eta, &eta_emb)?;
    let iso_rho = isometry_defect(&am.rho_map);
    let iso_eta = isometry_defect(&am.eta_map);
    let headline = iso_rho.max(iso_eta);
    Ok(Report {
        command: "amalgamate",
        outputs: json!({
            "dim": am.dim(),
            "dim_pi": am.dim_pi,
            "dim_rho_complement": am.dim_rho_complement,
            "dim_eta_complement": am.dim_eta_complement,
            "representation": serde_json::to_value(RepSpec::describe(&am.rep)).expect("descriptor serializes"),
            "rho_map": matrix_literal(&am.rho_map),
            "eta_map": matrix_literal(&am.eta_map),
            "isometry_defect": {"rho": iso_rho, "eta": iso_eta},
            "equivariance_defect": {
                "rho": equivariance_defect(&am.rep, &rho, &am.rho_map)?,
                "eta": equivariance_defect(&am.rep, &eta, &am.eta_map)?,
            },
        }),
        inputs: ctx.inputs(),
        parameters: json!({}),
        headline: ("isometry_defect", headline),
        csv: None,
    })
}
