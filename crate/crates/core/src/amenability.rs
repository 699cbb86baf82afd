//! Amenability probes for the simple random walk on a Cayley graph.
//!
//! The Markov operator `M = |S±|⁻¹ Σ_{s ∈ S±} λ(s)` has norm 1 exactly when
//! the group is amenable. Three computations bracket that norm:
//!
//! * [`return_probabilities`]: `p_{2n} = ⟨M^{2n}δ_e, δ_e⟩` by exact convolution;
//!   `p_{2n}^{1/2n}` and `(p_{2n}/p_{2n-2})^{1/2}` increase to `‖M‖`;
//! * [`min_defect`]: the smallest value of `|S±|⁻¹ Σ_s ‖λ(s)w − w‖²` over unit
//!   vectors supported on `B_r`, which equals `2 − 2μ_r` where `μ_r` is the top
//!   eigenvalue of `M` compressed to `B_r`;
//! * [`spectral_radius_bound`]: `μ_r` from below and a Schur test with a
//!   word-length weight `q^{|x|}` from above.

use std::collections::{BTreeMap, HashMap};

use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

use crate::eigen::{largest_eigenpair, SparseSymmetric};
use crate::error::{Error, Result};
use crate::group::{ball, Ball, GroupElement, GroupKind, GroupOracle};
use crate::vector::{Key, SparseVector};
use crate::Caps;

/// Eigenvalue tolerance for [`min_defect`] and [`spectral_radius_bound`].
pub const EIGEN_TOL: f64 = 1e-9;
/// Default largest `2n` for which return probabilities are kept as exact rationals.
pub const DEFAULT_EXACT_STEPS: usize = 40;
const MAX_MATVECS: usize = 200_000;

/// Return probabilities `p_{2n}(e)` of the simple random walk and their estimator traces.
#[derive(Clone, Debug)]
pub struct ReturnProbabilityTable {
    pub n_max: usize,
    /// `p[n] = p_{2n}(e)`, `n = 0..=n_max`.
    pub p: Vec<f64>,
    /// Exact values for `2n ≤` the exact limit.
    pub exact: Vec<Option<BigRational>>,
    /// `p_{2n}^{1/(2n)}` for `n ≥ 1` (index 0 holds 1).
    pub root: Vec<f64>,
    /// `√(p_{2n}/p_{2n−2})` for `n ≥ 1` (index 0 holds 1).
    pub ratio: Vec<f64>,
    /// `"convolution"` or `"word-length"` (lumped chain for free bases).
    pub method: &'static str,
}

impl ReturnProbabilityTable {
    /// The ratio estimator at `n_max`.
    pub fn ratio_estimate(&self) -> f64 {
        *self.ratio.last().expect("n_max ≥ 1")
    }
}

/// `p_{2n}(e)` for `n ≤ n_max`, exact rationals while `2n ≤ exact_steps`.
///
/// For a free group generated by its free basis the walk is lumped by word
/// length, which is exact on the tree; otherwise the `n`-step distribution is
/// convolved on group elements and `p_{2n} = Σ_x μ_n(x)²`.
pub fn return_probabilities(
    oracle: &GroupOracle,
    n_max: usize,
    exact_steps: usize,
    caps: &Caps,
) -> Result<ReturnProbabilityTable> {
    if n_max < 1 {
        return Err(Error::precondition("n_max must be at least 1"));
    }
    let (exact, p, method) = match free_basis_rank(oracle) {
        Some(k) => {
            let (e, p) = word_length_chain(k, n_max, exact_steps);
            (e, p, "word-length")
        }
        None => {
            let (e, p) = convolve(oracle, n_max, exact_steps, caps)?;
            (e, p, "convolution")
        }
    };
    let mut root = vec![1.0];
    let mut ratio = vec![1.0];
    for n in 1..=n_max {
        root.push(p[n].powf(1.0 / (2 * n) as f64));
        ratio.push((p[n] / p[n - 1]).sqrt());
    }
    Ok(ReturnProbabilityTable {
        n_max,
        p,
        exact,
        root,
        ratio,
        method,
    })
}

fn walk_steps(oracle: &GroupOracle) -> Result<Vec<GroupElement>> {
    let s = oracle.symmetric_generators()?;
    Ok(if s.is_empty() { vec![oracle.identity()] } else { s })
}

/// Rank `k` when the generating set is exactly one letter `±i` per `i ∈ 1..=k` of a free group.
fn free_basis_rank(oracle: &GroupOracle) -> Option<usize> {
    let GroupKind::Free { rank } = oracle.kind() else { return None };
    let mut seen = vec![false; *rank];
    for g in oracle.generators() {
        let GroupElement::Word(w) = g else { return None };
        if w.len() != 1 {
            return None;
        }
        let i = w[0].unsigned_abs() as usize - 1;
        if seen[i] {
            return None;
        }
        seen[i] = true;
    }
    seen.iter().all(|&b| b).then_some(*rank)
}

fn word_length_chain(rank: usize, n_max: usize, exact_steps: usize) -> (Vec<Option<BigRational>>, Vec<f64>) {
    let d = 2 * rank;
    let steps = 2 * n_max;
    let exact_until = exact_steps.min(steps);
    // counts[l] = number of walks of the current length ending at word length l
    let mut counts: Vec<BigUint> = vec![BigUint::one()];
    let mut exact = vec![Some(BigRational::one())];
    let mut p = vec![1.0];
    let mut probs: Vec<f64> = Vec::new();
    let d_big = BigUint::from(d);
    let mut denom = BigUint::one();
    for m in 1..=steps {
        if m <= exact_until {
            let mut next = vec![BigUint::zero(); counts.len() + 1];
            for (l, c) in counts.iter().enumerate() {
                if c.is_zero() {
                    continue;
                }
                if l == 0 {
                    next[1] += c * BigUint::from(d);
                } else {
                    next[l - 1] += c;
                    next[l + 1] += c * BigUint::from(d - 1);
                }
            }
            counts = next;
            denom *= &d_big;
            if m % 2 == 0 {
                let r = BigRational::new(counts[0].clone().into(), denom.clone().into());
                p.push(r.to_f64().expect("finite"));
                exact.push(Some(r));
            }
            if m == exact_until {
                probs = counts
                    .iter()
                    .map(|c| BigRational::new(c.clone().into(), denom.clone().into()).to_f64().expect("finite"))
                    .collect();
            }
        } else {
            if probs.is_empty() {
                probs = vec![1.0];
            }
            let mut next = vec![0.0; probs.len() + 1];
            for (l, &q) in probs.iter().enumerate() {
                if l == 0 {
                    next[1] += q;
                } else {
                    next[l - 1] += q / d as f64;
                    next[l + 1] += q * (d - 1) as f64 / d as f64;
                }
            }
            probs = next;
            if m % 2 == 0 {
                p.push(probs[0]);
                exact.push(None);
            }
        }
    }
    (exact, p)
}

fn convolve(
    oracle: &GroupOracle,
    n_max: usize,
    exact_steps: usize,
    caps: &Caps,
) -> Result<(Vec<Option<BigRational>>, Vec<f64>)> {
    let steps = walk_steps(oracle)?;
    let d = steps.len();
    let exact_half = (exact_steps / 2).min(n_max);
    let mut counts: HashMap<GroupElement, BigUint> = HashMap::from([(oracle.identity(), BigUint::one())]);
    let mut exact = vec![Some(BigRational::one())];
    let mut p = vec![1.0];
    let mut denom = BigUint::one();
    let d_big = BigUint::from(d);
    let support_error = |step: usize| Error::Resource {
        cap: "support",
        limit: caps.support,
        detail: format!("random-walk support at step {step}"),
    };
    for n in 1..=exact_half {
        let mut next: HashMap<GroupElement, BigUint> = HashMap::with_capacity(counts.len() * 2);
        for (x, c) in &counts {
            for s in &steps {
                *next.entry(oracle.multiply(s, x)?).or_default() += c;
            }
        }
        if next.len() > caps.support {
            return Err(support_error(n));
        }
        counts = next;
        denom *= &d_big;
        let sum_sq: BigUint = counts.values().map(|c| c * c).sum();
        let r = BigRational::new(sum_sq.into(), (&denom * &denom).into());
        p.push(r.to_f64().expect("finite"));
        exact.push(Some(r));
    }
    if exact_half < n_max {
        let mut probs: BTreeMap<GroupElement, f64> = counts
            .into_iter()
            .map(|(x, c)| {
                let q = BigRational::new(c.into(), denom.clone().into()).to_f64().expect("finite");
                (x, q)
            })
            .collect();
        for n in exact_half + 1..=n_max {
            let mut next: BTreeMap<GroupElement, f64> = BTreeMap::new();
            for (x, q) in &probs {
                let share = q / d as f64;
                for s in &steps {
                    *next.entry(oracle.multiply(s, x)?).or_default() += share;
                }
            }
            if next.len() > caps.support {
                return Err(support_error(n));
            }
            probs = next;
            p.push(probs.values().fold(0.0, |acc, q| acc + q * q));
            exact.push(None);
        }
    }
    Ok((exact, p))
}

/// The Markov operator compressed to `B_r`: entries `|S±|⁻¹ #{s : s·x = y}`.
pub fn compressed_markov(oracle: &GroupOracle, b: &Ball) -> Result<SparseSymmetric> {
    let steps = walk_steps(oracle)?;
    let w = 1.0 / steps.len() as f64;
    let mut m = SparseSymmetric::new(b.len());
    for (i, x) in b.elements().iter().enumerate() {
        for s in &steps {
            if let Some(j) = b.position(&oracle.multiply(s, x)?) {
                m.add(j, i, w);
            }
        }
    }
    Ok(m)
}

/// The averaged defect form `Q(w) = |S±|⁻¹ Σ_s ‖λ(s)w − w‖²` restricted to `span{δ_x : x ∈ B_r}`.
pub fn defect_form(oracle: &GroupOracle, b: &Ball) -> Result<SparseSymmetric> {
    let m = compressed_markov(oracle, b)?;
    let mut q = SparseSymmetric::new(b.len());
    for i in 0..b.len() {
        q.add(i, i, 2.0);
        for &(j, v) in m.row(i) {
            q.add(i, j, -2.0 * v);
        }
    }
    Ok(q)
}

/// Minimal averaged squared defect of unit vectors supported on `B_r`.
#[derive(Clone, Debug)]
pub struct DefectReport {
    pub radius: usize,
    pub ball_size: usize,
    /// Smallest eigenvalue of the defect form.
    pub min_avg_sq_defect: f64,
    /// Unit eigenvector in regular copy 0, normalized to a nonnegative coefficient sum.
    pub argmin: SparseVector,
    /// Eigen-residual bound; the reported value is within this of an eigenvalue.
    pub residual: f64,
    /// True when the residual bound met [`EIGEN_TOL`].
    pub certified: bool,
}

/// Smallest eigenvalue of the defect form on `B_r` (shifted Lanczos on `2I − Q`).
pub fn min_defect(oracle: &GroupOracle, r: usize, caps: &Caps) -> Result<DefectReport> {
    if r < 1 {
        return Err(Error::precondition("radius must be at least 1"));
    }
    let b = ball(oracle, r, caps.ball)?;
    let q = defect_form(oracle, &b)?;
    let mut shifted = SparseSymmetric::new(b.len());
    for i in 0..b.len() {
        for &(j, v) in q.row(i) {
            shifted.add(i, j, -v);
        }
        shifted.add(i, i, 2.0);
    }
    let pair = largest_eigenpair(&shifted, EIGEN_TOL, MAX_MATVECS).map_err(|e| match e {
        Error::NoConvergence { iterations, best } => Error::NoConvergence {
            iterations,
            best: 2.0 - best,
        },
        other => other,
    })?;
    let sign = if pair.vector.iter().sum::<f64>() < 0.0 { -1.0 } else { 1.0 };
    let argmin = SparseVector::from_entries(
        b.elements()
            .iter()
            .zip(&pair.vector)
            .filter(|(_, &a)| a != 0.0)
            .map(|(x, &a)| (Key::element(0, x.clone()), crate::Complex64::new(sign * a, 0.0))),
    );
    Ok(DefectReport {
        radius: r,
        ball_size: b.len(),
        min_avg_sq_defect: (2.0 - pair.value).max(0.0),
        argmin,
        residual: pair.residual,
        certified: pair.residual <= EIGEN_TOL,
    })
}

/// Two-sided certificate for the spectral radius `‖M‖`.
#[derive(Clone, Debug)]
pub struct SpectralBound {
    pub radius: usize,
    /// Top eigenvalue (Rayleigh quotient) of `M` compressed to `B_r`: a lower bound.
    pub lower: f64,
    /// Schur-test bound `min_q max_{x ∈ B_{r−1}} |S±|⁻¹ Σ_s q^{|sx|−|x|}`: an upper bound.
    pub upper: f64,
    /// Weight base attaining `upper`.
    pub q: f64,
}

impl SpectralBound {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lower <= x && x <= self.upper
    }
}

/// Lower and upper bounds for `‖M‖` from the ball of radius `r`.
///
/// The upper end is a Schur test with weights `q^{|x|}`: if `Mf ≤ c f`
/// pointwise for a positive `f` then `‖M‖ ≤ c`. The pointwise ratio at `x`
/// depends only on how many neighbours of `x` are one step closer, level or
/// farther, so the maximum over `B_{r−1}` is the global maximum whenever every
/// such neighbour profile of the group already occurs in `B_{r−1}`. This holds
/// for free groups on a free basis, free abelian groups on the standard basis
/// and finite groups with `r` past the diameter.
pub fn spectral_radius_bound(oracle: &GroupOracle, r: usize, caps: &Caps) -> Result<SpectralBound> {
    if r < 1 {
        return Err(Error::precondition("radius must be at least 1"));
    }
    if oracle.order() == Some(1) {
        return Ok(SpectralBound {
            radius: r,
            lower: 1.0,
            upper: 1.0,
            q: 1.0,
        });
    }
    let b = ball(oracle, r, caps.ball)?;
    let m = compressed_markov(oracle, &b)?;
    // shift by I so the spectrum is nonnegative and the Perron value is dominant
    let mut shifted = m.clone();
    for i in 0..b.len() {
        shifted.add(i, i, 1.0);
    }
    let pair = largest_eigenpair(&shifted, EIGEN_TOL, MAX_MATVECS)?;
    let lower = m.rayleigh(&pair.vector);

    let steps = walk_steps(oracle)?;
    let d = steps.len() as f64;
    let inner = b.count_within(r - 1);
    let mut profiles: Vec<[usize; 3]> = Vec::new();
    for x in &b.elements()[..inner] {
        let lx = b.word_length(x).expect("in ball");
        let mut prof = [0usize; 3];
        for s in &steps {
            let y = oracle.multiply(s, x)?;
            let ly = b.word_length(&y).expect("ball is closed under one step");
            prof[(ly as isize - lx as isize + 1) as usize] += 1;
        }
        if !profiles.contains(&prof) {
            profiles.push(prof);
        }
    }
    let c = |q: f64| {
        profiles
            .iter()
            .map(|p| (p[0] as f64 / q + p[1] as f64 + p[2] as f64 * q) / d)
            .fold(f64::NEG_INFINITY, f64::max)
    };
    // c is convex in q on (0, 1]; golden-section search
    let (mut lo, mut hi) = (1e-6, 1.0);
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..200 {
        let a = hi - phi * (hi - lo);
        let bq = lo + phi * (hi - lo);
        if c(a) <= c(bq) {
            hi = bq;
        } else {
            lo = a;
        }
    }
    let q = (lo + hi) / 2.0;
    let upper = c(q).min(1.0);
    // round outward by a few ulps of accumulated error
    Ok(SpectralBound {
        radius: r,
        lower: lower - 4.0 * f64::EPSILON,
        upper: upper + 4.0 * f64::EPSILON,
        q,
    })
}
