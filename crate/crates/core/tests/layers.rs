use std::sync::Arc;

use proptest::prelude::*;
use unirep::amenability::{min_defect, spectral_radius_bound};
use unirep::config::{from_json, parse_vector, to_json, vector_literal, GroupSpec, RepSpec};
use unirep::containment::{default_basis, identity_and_generators, search_witness, trivial_target, SearchOptions};
use unirep::gram::discrepancy;
use unirep::stability::closure;
use unirep::{Caps, Complex64, GroupElement, GroupOracle, Key, Representation, SparseVector, Subspace};

fn z2_vector(points: &[(i64, i64, f64, f64)]) -> SparseVector {
    SparseVector::from_entries(
        points
            .iter()
            .map(|&(x, y, re, im)| (Key::element(0, GroupElement::vector(&[x, y])), Complex64::new(re, im))),
    )
}

fn points(len: usize) -> impl Strategy<Value = Vec<(i64, i64, f64, f64)>> {
    prop::collection::vec((-3..=3i64, -3..=3i64, -1.0..1.0f64, -1.0..1.0f64), 1..=len)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn projection_is_idempotent_and_self_adjoint(
        span in prop::collection::vec(points(4), 1..4),
        v in points(6),
        w in points(6),
    ) {
        let s = Subspace::span(span.iter().map(|p| z2_vector(p)), 64).unwrap();
        prop_assert!(s.orthonormality_defect() <= 1e-10);
        let (v, w) = (z2_vector(&v), z2_vector(&w));
        let pv = s.project(&v);
        prop_assert!(s.project(&pv).max_abs_diff(&pv) <= 1e-12);
        let lhs = pv.inner(&w);
        let rhs = v.inner(&s.project(&w));
        prop_assert!((lhs - rhs).norm() <= 1e-12);
        // residual is orthogonal to the subspace
        for b in s.basis() {
            prop_assert!(s.residual(&v).inner(b).norm() <= 1e-12);
        }
    }

    #[test]
    fn closure_grows_with_radius(a in prop::collection::vec(points(3), 1..3)) {
        let lam = Representation::regular(Arc::new(GroupOracle::integer_lattice(2)));
        let a: Vec<_> = a.iter().map(|p| z2_vector(p)).collect();
        prop_assume!(a.iter().all(|x| x.norm() > 1e-6));
        let caps = Caps::default();
        let mut prev: Option<Subspace> = None;
        for r in 0..=3 {
            let c = closure(&lam, &a, r, &[], &caps).unwrap();
            if let Some(p) = &prev {
                prop_assert!(c.dim() >= p.dim());
                for b in p.basis() {
                    prop_assert!(c.realized.residual(b).norm() <= 1e-9);
                }
            }
            for x in &a {
                prop_assert!(c.realized.residual(x).norm() <= 1e-9);
            }
            prev = Some(c.realized);
        }
    }

    #[test]
    fn vector_literals_round_trip(p in points(6)) {
        let lam = Representation::regular(Arc::new(GroupOracle::integer_lattice(2)));
        let v = z2_vector(&p);
        let lit = vector_literal(&lam, &v);
        let text = to_json(&lit).unwrap();
        let back = parse_vector(&lam, &from_json::<Vec<_>>(&text).unwrap(), "$").unwrap();
        prop_assert_eq!(back, v);
    }

    #[test]
    fn witness_reports_match_recomputation(seed in 0..1000u64) {
        let z = Arc::new(GroupOracle::integer_lattice(1));
        let lam = Representation::regular(z.clone());
        let target = trivial_target(&identity_and_generators(&z)).unwrap();
        let basis = default_basis(&lam, 3, &[0], &Caps::default()).unwrap();
        let opts = SearchOptions { seed, restarts: 1, budget: 50, ..SearchOptions::default() };
        let rep = search_witness(&target, &lam, &basis, &opts).unwrap();
        let again = discrepancy(&target, &lam, &rep.witnesses).unwrap();
        prop_assert_eq!(again, rep.discrepancy);
    }
}

#[test]
fn group_and_representation_descriptors_round_trip() {
    let texts = [
        r#"{"kind": "free", "rank": 3}"#,
        r#"{"kind": "fg-abelian", "torsion": [0, 4]}"#,
        r#"{"kind": "finite-table", "table": [[0, 1], [1, 0]]}"#,
    ];
    for text in texts {
        let spec: GroupSpec = from_json(text).unwrap();
        let oracle = Arc::new(spec.build("$").unwrap());
        let described = GroupSpec::describe(&oracle);
        let again = described.build("$").unwrap();
        assert_eq!(again.generators(), oracle.generators());
        assert_eq!(to_json(&GroupSpec::describe(&again)).unwrap(), to_json(&described).unwrap());

        let rep: RepSpec = from_json(
            r#"{"kind": "direct-sum", "summands": [{"kind": "trivial", "dim": 2}, {"kind": "multiple", "of": {"kind": "regular"}, "count": "inf"}]}"#,
        )
        .unwrap();
        let built = rep.build(&oracle, &Caps::default(), "$").unwrap();
        let text = to_json(&RepSpec::describe(&built)).unwrap();
        let rebuilt = from_json::<RepSpec>(&text).unwrap().build(&oracle, &Caps::default(), "$").unwrap();
        assert_eq!(to_json(&RepSpec::describe(&rebuilt)).unwrap(), text);
    }
}

#[test]
fn malformed_descriptor_reports_path() {
    let err = from_json::<RepSpec>(r#"{"kind": "direct-sum", "summands": [{"kind": "regular"}, {"kind": "trivial", "dim": -1}]}"#)
        .unwrap_err()
        .to_string();
    assert!(err.contains("$.summands[1].dim"), "{err}");
}

#[test]
fn min_defect_decreases_with_radius() {
    let caps = Caps::default();
    for oracle in [GroupOracle::integer_lattice(1), GroupOracle::free(2)] {
        let mut prev = f64::INFINITY;
        for r in 1..=5 {
            let d = min_defect(&oracle, r, &caps).unwrap();
            assert!(d.certified);
            assert!(d.min_avg_sq_defect <= prev + 1e-9, "r = {r}");
            assert!((d.argmin.norm() - 1.0).abs() <= 1e-9);
            prev = d.min_avg_sq_defect;
        }
    }
}

#[test]
fn spectral_interval_is_ordered_and_tightens() {
    let caps = Caps::default();
    let f2 = GroupOracle::free(2);
    let mut width = f64::INFINITY;
    for r in 2..=6 {
        let b = spectral_radius_bound(&f2, r, &caps).unwrap();
        assert!(b.lower <= b.upper);
        assert!(b.width() <= width + 1e-12);
        width = b.width();
    }
}
