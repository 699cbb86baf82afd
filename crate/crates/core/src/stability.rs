//! Orbit closures, projections and projection-based independence.
//!
//! `C` stands for the closed span of an orbit `{π(g)a : g ∈ G, a ∈ A}`,
//! truncated to `g ∈ B_r`. A tuple `a` is independent from `B` over `C` when
//! the residuals `π(g)aᵢ − P_C π(g)aᵢ` and `π(h)b − P_C π(h)b` are orthogonal.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::group::{ball, GroupElement};
use crate::rep::Representation;
use crate::subspace::Subspace;
use crate::vector::SparseVector;
use crate::Caps;

/// Default orthogonality tolerance for verdicts.
pub const INDEPENDENCE_TOL: f64 = 1e-6;

/// Projection norms of the probe vectors after each completed sphere.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceRow {
    pub radius: usize,
    pub dim: usize,
    pub probe_norms: Vec<f64>,
}

/// `span{π(g)a : g ∈ B_r, a ∈ A}` with its orthonormal basis and convergence trace.
#[derive(Clone, Debug)]
pub struct ClosureSpec {
    pub generators: Vec<SparseVector>,
    pub radius: usize,
    pub elements: Vec<GroupElement>,
    pub realized: Subspace,
    pub trace: Vec<TraceRow>,
}

impl ClosureSpec {
    pub fn dim(&self) -> usize {
        self.realized.dim()
    }

    /// The orbit vectors in enumeration order: elements outer, generators inner.
    pub fn orbit(&self, pi: &Representation) -> Result<Vec<SparseVector>> {
        orbit(pi, &self.generators, &self.elements)
    }
}

fn orbit(pi: &Representation, vectors: &[SparseVector], elements: &[GroupElement]) -> Result<Vec<SparseVector>> {
    let mut out = Vec::with_capacity(vectors.len() * elements.len());
    for g in elements {
        for a in vectors {
            out.push(pi.apply(g, a)?);
        }
    }
    Ok(out)
}

/// Orthonormalizes the orbit of `a` over `B_r` sphere by sphere.
pub fn closure(
    pi: &Representation,
    a: &[SparseVector],
    r: usize,
    probes: &[SparseVector],
    caps: &Caps,
) -> Result<ClosureSpec> {
    if a.is_empty() {
        return Err(Error::precondition("closure of an empty set"));
    }
    for v in a.iter().chain(probes) {
        pi.check_vector(v)?;
    }
    let b = ball(pi.oracle(), r, caps.ball)?;
    let mut realized = Subspace::zero();
    let mut trace = Vec::with_capacity(r + 1);
    let mut done = 0;
    for s in 0..=r {
        let end = b.count_within(s);
        for g in &b.elements()[done..end] {
            for v in a {
                realized.extend(&pi.apply(g, v)?, caps.closure_dim)?;
            }
        }
        done = end;
        trace.push(TraceRow {
            radius: s,
            dim: realized.dim(),
            probe_norms: probes.iter().map(|p| realized.project(p).norm()).collect(),
        });
    }
    Ok(ClosureSpec {
        generators: a.to_vec(),
        radius: r,
        elements: b.elements().to_vec(),
        realized,
        trace,
    })
}

/// `P_C v`.
pub fn project(v: &SparseVector, c: &Subspace) -> SparseVector {
    c.project(v)
}

/// Which orbit radii to test on each side of a verdict.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NondividingOptions {
    pub tol: f64,
    /// `g ∈ B_{a_radius}` acts on the `a`-side.
    pub a_radius: usize,
    /// `h ∈ B_{b_radius}` acts on the `b`-side.
    pub b_radius: usize,
}

impl NondividingOptions {
    pub fn at(radius: usize, tol: f64) -> Self {
        Self {
            tol,
            a_radius: radius,
            b_radius: radius,
        }
    }
}

/// The pair with the largest residual inner product.
#[derive(Clone, Debug, PartialEq)]
pub struct WorstPair {
    /// Index into the `a` tuple.
    pub i: usize,
    /// Index into `B`.
    pub b: usize,
    pub g: GroupElement,
    pub h: GroupElement,
    /// `⟨π(g)aᵢ − P_C π(g)aᵢ, π(h)b − P_C π(h)b⟩`.
    pub value: Complex64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct IndependenceVerdict {
    pub independent: bool,
    /// `None` when one side is empty.
    pub worst: Option<WorstPair>,
    pub tol: f64,
}

impl IndependenceVerdict {
    pub fn worst_abs(&self) -> f64 {
        self.worst.as_ref().map_or(0.0, |w| w.value.norm())
    }
}

/// Checks `π(g)aᵢ − P_C π(g)aᵢ ⟂ π(h)b − P_C π(h)b` for all `g`, `h` in the configured balls.
pub fn nondividing(
    pi: &Representation,
    a: &[SparseVector],
    b: &[SparseVector],
    c: &Subspace,
    opts: &NondividingOptions,
    caps: &Caps,
) -> Result<IndependenceVerdict> {
    for v in a.iter().chain(b) {
        pi.check_vector(v)?;
    }
    let ga = ball(pi.oracle(), opts.a_radius, caps.ball)?;
    let gb = ball(pi.oracle(), opts.b_radius, caps.ball)?;
    let ra = orbit_residuals(pi, c, a, ga.elements())?;
    let rb = orbit_residuals(pi, c, b, gb.elements())?;
    // merge by largest modulus; ties keep the earliest pair in enumeration order
    let worst = ra
        .par_iter()
        .enumerate()
        .map(|(ai, (i, g, x))| {
            let mut best: Option<(f64, usize, usize, Complex64)> = None;
            for (bi, (_, _, y)) in rb.iter().enumerate() {
                let v = x.inner(y);
                if best.is_none_or(|(m, ..)| v.norm() > m) {
                    best = Some((v.norm(), ai, bi, v));
                }
            }
            best.map(|(m, ai, bi, v)| (m, ai, bi, v, *i, (*g).clone()))
        })
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .fold(None::<(f64, usize, usize, Complex64, usize, GroupElement)>, |acc, cur| match acc {
            Some(a) if a.0 >= cur.0 => Some(a),
            _ => Some(cur),
        });
    let worst = worst.map(|(_, _, bi, value, i, g)| WorstPair {
        i,
        b: rb[bi].0,
        g,
        h: rb[bi].1.clone(),
        value,
    });
    let independent = worst.as_ref().is_none_or(|w| w.value.norm() <= opts.tol);
    Ok(IndependenceVerdict {
        independent,
        worst,
        tol: opts.tol,
    })
}

fn orbit_residuals<'a>(
    pi: &Representation,
    c: &Subspace,
    vs: &[SparseVector],
    elements: &'a [GroupElement],
) -> Result<Vec<(usize, &'a GroupElement, SparseVector)>> {
    let mut out = Vec::with_capacity(vs.len() * elements.len());
    for g in elements {
        for (i, v) in vs.iter().enumerate() {
            out.push((i, g, c.residual(&pi.apply(g, v)?)));
        }
    }
    Ok(out)
}

/// [`nondividing`] over a closure, at the closure's radius on both sides.
pub fn nondividing_over(
    pi: &Representation,
    a: &[SparseVector],
    b: &[SparseVector],
    c: &ClosureSpec,
    tol: f64,
    caps: &Caps,
) -> Result<IndependenceVerdict> {
    nondividing(pi, a, b, &c.realized, &NondividingOptions::at(c.radius, tol), caps)
}

/// Orthonormal basis of `span{P_C π(g)aᵢ : g ∈ B_r}`, `r` the closure radius.
pub fn canonical_base(pi: &Representation, a: &[SparseVector], c: &ClosureSpec, caps: &Caps) -> Result<Subspace> {
    canonical_base_from(pi, a, &c.realized, &c.elements, caps)
}

/// [`canonical_base`] with an explicit enumeration of group elements.
pub fn canonical_base_from(
    pi: &Representation,
    a: &[SparseVector],
    c: &Subspace,
    elements: &[GroupElement],
    caps: &Caps,
) -> Result<Subspace> {
    for v in a {
        pi.check_vector(v)?;
    }
    let mut d = Subspace::zero();
    for g in elements {
        for v in a {
            d.extend(&c.project(&pi.apply(g, v)?), caps.closure_dim)?;
        }
    }
    Ok(d)
}

/// `max_{g, i} ‖P_C(π(g)aᵢ − P_D π(g)aᵢ)‖`: zero when `a` does not divide over `D` against anything in `C`.
pub fn canonical_base_defect(
    pi: &Representation,
    a: &[SparseVector],
    c: &Subspace,
    d: &Subspace,
    elements: &[GroupElement],
) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for g in elements {
        for v in a {
            let x = pi.apply(g, v)?;
            worst = worst.max(c.project(&d.residual(&x)).norm());
        }
    }
    Ok(worst)
}

/// Output of [`superstable_approx`].
#[derive(Clone, Debug)]
pub struct SuperstableApprox {
    pub closure: ClosureSpec,
    /// Positions of the selected orbit vectors in [`ClosureSpec::orbit`] order, in selection order.
    pub selected: Vec<usize>,
    /// The selected orbit vectors `A₀`.
    pub a0: Vec<SparseVector>,
    /// `C₀ = span A₀`.
    pub c0: Subspace,
    /// `bᵢ = aᵢ − P_C aᵢ + P_{C₀} aᵢ`.
    pub b: Vec<SparseVector>,
    /// `‖P_C aᵢ − P_{C₀} aᵢ‖`.
    pub gaps: Vec<f64>,
}

/// Greedily picks orbit vectors of `A` until every `P_C aᵢ` is within `eps` of `C₀ = span A₀`.
///
/// Each step adds the orbit vector whose normalized residual captures the
/// most of `Σᵢ ‖P_C aᵢ − P_{C₀} aᵢ‖²`, ties going to the earliest in orbit order.
pub fn superstable_approx(
    pi: &Representation,
    a: &[SparseVector],
    generators: &[SparseVector],
    eps: f64,
    r: usize,
    caps: &Caps,
) -> Result<SuperstableApprox> {
    if !(eps > 0.0) {
        return Err(Error::precondition("eps must be positive"));
    }
    for v in a {
        pi.check_vector(v)?;
    }
    let closure = closure(pi, generators, r, &[], caps)?;
    let candidates = closure.orbit(pi)?;
    let targets: Vec<SparseVector> = a.iter().map(|v| closure.realized.project(v)).collect();

    let mut c0 = Subspace::zero();
    let mut selected = Vec::new();
    let mut errors = targets.clone();
    let mut residuals = candidates.clone();
    let gap = |errors: &[SparseVector]| errors.iter().map(|e| e.norm()).fold(0.0, f64::max);
    while gap(&errors) >= eps {
        let scores: Vec<f64> = residuals
            .par_iter()
            .map(|rc| {
                let n2 = rc.norm_sqr();
                if n2 < 1e-20 {
                    return 0.0;
                }
                errors.iter().map(|e| e.inner(rc).norm_sqr()).sum::<f64>() / n2
            })
            .collect();
        let (best, score) = scores
            .iter()
            .enumerate()
            .fold((usize::MAX, 0.0), |acc, (i, &s)| if s > acc.1 { (i, s) } else { acc });
        if best == usize::MAX || score <= 1e-28 {
            return Err(Error::NoConvergence {
                iterations: selected.len(),
                best: gap(&errors),
            });
        }
        let Some(q) = c0.extend(&candidates[best], caps.closure_dim).map_err(|e| match e {
            Error::Resource { cap, limit, .. } => Error::Resource {
                cap,
                limit,
                detail: format!("superstable approximation stopped at gap {}", gap(&errors)),
            },
            other => other,
        })?
        else {
            residuals[best] = SparseVector::zero();
            continue;
        };
        let q = q.clone();
        selected.push(best);
        for v in errors.iter_mut().chain(residuals.iter_mut()) {
            let c = v.inner(&q);
            if c != Complex64::new(0.0, 0.0) {
                v.axpy(-c, &q);
            }
        }
    }

    let mut b = Vec::with_capacity(a.len());
    let mut gaps = Vec::with_capacity(a.len());
    for (v, t) in a.iter().zip(&targets) {
        let p0 = c0.project(v);
        gaps.push((t - &p0).norm());
        b.push(&(v - t) + &p0);
    }
    Ok(SuperstableApprox {
        a0: selected.iter().map(|&i| candidates[i].clone()).collect(),
        closure,
        selected,
        c0,
        b,
        gaps,
    })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::group::GroupOracle;
    use crate::vector::Key;

    fn z() -> Arc<GroupOracle> {
        Arc::new(GroupOracle::integer_lattice(1))
    }

    fn d(k: i64) -> SparseVector {
        SparseVector::delta(0, GroupElement::vector(&[k]))
    }

    fn caps() -> Caps {
        Caps::default()
    }

    #[test]
    fn closure_examples() {
        let lam = Representation::regular(z());
        let c = closure(&lam, &[d(0)], 2, &[d(5)], &caps()).unwrap();
        assert_eq!(c.dim(), 5);
        for k in -2..=2 {
            assert!(c.realized.residual(&d(k)).norm() < 1e-12);
        }
        assert_eq!(c.trace.iter().map(|t| t.dim).collect::<Vec<_>>(), vec![1, 3, 5]);

        let with_zero = closure(&lam, &[d(0), SparseVector::zero()], 2, &[], &caps()).unwrap();
        assert_eq!(with_zero.dim(), 5);

        let triv = Representation::trivial(z(), 3);
        let a = vec![SparseVector::from_coords(0, &[Complex64::new(1.0, 0.0), Complex64::new(0.0, 2.0)])];
        for r in 0..4 {
            assert_eq!(closure(&triv, &a, r, &[], &caps()).unwrap().dim(), 1);
        }
    }

    #[test]
    fn closure_is_monotone() {
        let lam = Representation::regular(z());
        let a = vec![&d(0) + &(&d(3) * Complex64::new(0.0, 1.0))];
        let lo = closure(&lam, &a, 2, &[], &caps()).unwrap();
        let hi = closure(&lam, &a, 3, &[], &caps()).unwrap();
        for v in lo.realized.basis() {
            assert!(hi.realized.residual(v).norm() < 1e-8);
        }
    }

    #[test]
    fn projection_example() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let c = Subspace::from_orthonormal(vec![&(&d(0) + &d(1)) * s]).unwrap();
        let p = project(&d(0), &c);
        assert!(p.max_abs_diff(&(&(&d(0) + &d(1)) * 0.5)) < 1e-15);
    }

    #[test]
    fn verdict_examples() {
        let lam = Representation::regular(z());
        let c = closure(&lam, &[d(0)], 3, &[], &caps()).unwrap();
        let v = nondividing_over(&lam, &[d(5)], &[d(100)], &c, 1e-6, &caps()).unwrap();
        assert!(v.independent);

        let v = nondividing(&lam, &[d(0)], &[d(0)], &Subspace::zero(), &NondividingOptions::at(0, 1e-6), &caps()).unwrap();
        assert!(!v.independent);
        assert_eq!(v.worst_abs(), 1.0);

        // B ⊆ C; the truncated C is not invariant, so only h = e is tested on the B side
        let opts = NondividingOptions {
            tol: 1e-6,
            a_radius: 3,
            b_radius: 0,
        };
        let v = nondividing(&lam, &[d(7)], &[d(1), d(-2)], &c.realized, &opts, &caps()).unwrap();
        assert!(v.independent);

        let v = nondividing_over(&lam, &[d(5)], &[d(8)], &c, 1e-6, &caps()).unwrap();
        assert!(!v.independent);
        let w = v.worst.unwrap();
        // one inner product re-verifies the witness
        let x = c.realized.residual(&lam.apply(&w.g, &d(5)).unwrap());
        let y = c.realized.residual(&lam.apply(&w.h, &d(8)).unwrap());
        assert_eq!(x.inner(&y), w.value);
    }

    #[test]
    fn canonical_base_examples() {
        let lam = Representation::regular(z());
        let c = closure(&lam, &[d(0)], 2, &[], &caps()).unwrap();
        assert_eq!(canonical_base(&lam, &[d(10)], &c, &caps()).unwrap().dim(), 0);
        let base = canonical_base(&lam, &[d(0)], &c, &caps()).unwrap();
        assert!(base.dim() >= 1 && base.dim() <= c.dim());
        assert!(canonical_base_defect(&lam, &[d(0)], &c.realized, &base, &c.elements).unwrap() < 1e-12);

        let a = vec![&d(1) + &d(4)];
        let base = canonical_base(&lam, &a, &c, &caps()).unwrap();
        let mut shuffled = c.elements.clone();
        shuffled.reverse();
        let other = canonical_base_from(&lam, &a, &c.realized, &shuffled, &caps()).unwrap();
        for v in base.basis() {
            assert!(other.residual(v).norm() < 1e-8);
        }
        for v in other.basis() {
            assert!(base.residual(v).norm() < 1e-8);
        }
    }

    #[test]
    fn superstable_examples() {
        let lam = Representation::regular(z());
        let a = vec![&d(0) + &d(2), &d(40) * Complex64::new(0.0, 1.0)];
        let gens = vec![d(0), &d(1) * 2.0];
        let out = superstable_approx(&lam, &a, &gens, 1e-12, 3, &caps()).unwrap();
        assert!(out.gaps.iter().all(|&g| g < 1e-12));
        for (b, v) in out.b.iter().zip(&a) {
            assert!(b.max_abs_diff(v) < 1e-12);
        }
        // a ⟂ C
        let far = vec![d(50)];
        let out = superstable_approx(&lam, &far, &gens, 1e-3, 3, &caps()).unwrap();
        assert!(out.a0.is_empty());
        assert_eq!(out.b, far);
    }

    #[test]
    fn superstable_identity_for_gaps() {
        let lam = Representation::regular(z());
        let gens: Vec<SparseVector> = (0..4)
            .map(|i| {
                SparseVector::from_entries((0..5).map(|k| {
                    (
                        Key::element(0, GroupElement::vector(&[k - 2])),
                        Complex64::new(((i * 7 + k * 3) % 5) as f64 - 2.0, ((i + k) % 3) as f64),
                    )
                }))
            })
            .collect();
        let a = vec![&d(1) + &d(30), &(&d(-4) * Complex64::new(0.0, 1.0)) + &d(2)];
        let out = superstable_approx(&lam, &a, &gens, 1e-3, 6, &caps()).unwrap();
        for (i, v) in a.iter().enumerate() {
            let direct = (v - &out.b[i]).norm();
            assert!((direct - out.gaps[i]).abs() < 1e-10);
            assert!(direct < 1e-3);
        }
        let v = nondividing(
            &lam,
            &out.b,
            &gens,
            &out.c0,
            &NondividingOptions {
                tol: 1e-3,
                a_radius: 0,
                b_radius: 6,
            },
            &caps(),
        )
        .unwrap();
        assert!(v.independent, "{:?}", v.worst);
    }
}
