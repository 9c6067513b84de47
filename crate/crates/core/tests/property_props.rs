use std::path::Path;

use nnreach::interval::Interval;
use nnreach::property::{textual, vnnlib, Goal, LinearAtom, Predicate, Tri};
use nnreach::{IntervalTensor, Rounding};
use proptest::prelude::*;

const OUTS: usize = 3;
const INS: usize = 2;

fn coeff() -> impl Strategy<Value = f64> {
    prop_oneof![-3i32..=-1, 1i32..=3].prop_map(|c| c as f64)
}

/// Atoms with small integer coefficients and half-integer right-hand sides,
/// so that grid points can land exactly on the boundary.
fn atom() -> impl Strategy<Value = LinearAtom> {
    (
        proptest::collection::btree_map(0..OUTS, coeff(), 1..=2),
        proptest::collection::btree_map(0..INS, coeff(), 0..=1),
        -6i32..=6,
        any::<bool>(),
    )
        .prop_map(|(o, i, rhs, strict)| LinearAtom {
            outputs: o.into_iter().collect(),
            inputs: i.into_iter().collect(),
            rhs: rhs as f64 / 2.0,
            strict,
        })
}

fn predicate() -> impl Strategy<Value = Predicate> {
    atom().prop_map(Predicate::Atom).prop_recursive(3, 16, 3, |inner| {
        prop_oneof![
            inner.clone().prop_map(|p| Predicate::Not(Box::new(p))),
            proptest::collection::vec(inner.clone(), 1..=3).prop_map(Predicate::And),
            proptest::collection::vec(inner, 1..=3).prop_map(Predicate::Or),
        ]
    })
}

fn half_grid(n: usize) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec((-6i32..=6).prop_map(|v| v as f64 / 2.0), n)
}

/// A box, a sub-box of it and a point of the sub-box, as `(lo, hi)` lists.
fn nested(n: usize) -> impl Strategy<Value = (IntervalTensor, IntervalTensor, Vec<f64>)> {
    proptest::collection::vec((-6i32..=6, 0i32..=4, 0.0f64..1.0, 0.0f64..1.0, 0.0f64..1.0), n).prop_map(|dims| {
        let (mut lo, mut hi, mut slo, mut shi, mut p) = (vec![], vec![], vec![], vec![], vec![]);
        for (l, w, a, b, t) in dims {
            let (l, u) = (l as f64 / 2.0, (l + w) as f64 / 2.0);
            let (s, e) = (l + (u - l) * a.min(b), l + (u - l) * a.max(b));
            let snap = |v: f64| if t < 0.2 { (v * 2.0).round() / 2.0 } else { v };
            let (s, e) = (snap(s).clamp(l, u), snap(e).clamp(l, u).max(snap(s).clamp(l, u)));
            lo.push(l);
            hi.push(u);
            slo.push(s);
            shi.push(e);
            p.push(if t < 0.5 { s } else { s + (e - s) * t });
        }
        (IntervalTensor::from_bounds(lo, hi).unwrap(), IntervalTensor::from_bounds(slo, shi).unwrap(), p)
    })
}

fn point_box(v: &[f64]) -> IntervalTensor {
    IntervalTensor::from_bounds(v.to_vec(), v.to_vec()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn verdicts_are_monotone_under_refinement(p in predicate(), (yb, ys, y) in nested(OUTS), (xb, xs, x) in nested(INS)) {
        let r = Rounding::Sound;
        let outer = p.evaluate(&yb, Some(&xb), r);
        let inner = p.evaluate(&ys, Some(&xs), r);
        let at = p.holds_at(&x, &y);
        if outer != Tri::Unknown {
            prop_assert_eq!(inner, outer);
        }
        if inner != Tri::Unknown {
            prop_assert_eq!(inner == Tri::True, at);
        }
        let exact = p.evaluate(&point_box(&y), Some(&point_box(&x)), r);
        prop_assert_eq!(exact, if at { Tri::True } else { Tri::False });
    }

    #[test]
    fn double_negation_and_nnf_agree(p in predicate(), (yb, _, y) in nested(OUTS), (xb, _, x) in nested(INS)) {
        let r = Rounding::Sound;
        let nn = Predicate::Not(Box::new(Predicate::Not(Box::new(p.clone()))));
        let nnf = p.nnf();
        let v = p.evaluate(&yb, Some(&xb), r);
        prop_assert_eq!(nn.evaluate(&yb, Some(&xb), r), v);
        prop_assert_eq!(nnf.evaluate(&yb, Some(&xb), r), v);
        prop_assert_eq!(nn.holds_at(&x, &y), p.holds_at(&x, &y));
        prop_assert_eq!(nnf.holds_at(&x, &y), p.holds_at(&x, &y));
        let neg = Predicate::Not(Box::new(p.clone()));
        prop_assert_eq!(neg.holds_at(&x, &y), !p.holds_at(&x, &y));
        prop_assert_eq!(neg.evaluate(&yb, Some(&xb), r), v.not());
        let margin = p.margin(&x, &y);
        if margin != 0.0 {
            prop_assert_eq!(margin > 0.0, p.holds_at(&x, &y), "margin {}", margin);
        }
    }

    #[test]
    fn vnnlib_and_textual_agree(
        box_lo in half_grid(INS),
        widths in proptest::collection::vec(0i32..=4, INS),
        region in proptest::collection::vec(proptest::collection::vec(atom(), 1..=3), 1..=3),
        points in proptest::collection::vec((half_grid(INS), half_grid(OUTS)), 64),
    ) {
        let box_hi: Vec<f64> = box_lo.iter().zip(&widths).map(|(l, &w)| l + w as f64 / 2.0).collect();
        let (vnn, text) = render(&box_lo, &box_hi, &region);
        let a = vnnlib::parse(&vnn).unwrap();
        let b = textual::parse(&text, Some(OUTS), Path::new(".")).unwrap();
        prop_assert_eq!(&a.input_box, &b.input_box);
        prop_assert_eq!(a.input_box.lower.clone(), box_lo);
        prop_assert_eq!(a.input_box.upper.clone(), box_hi);
        prop_assert_eq!(a.goal, Goal::RefuteAssertion);
        for (x, y) in &points {
            prop_assert_eq!(a.predicate.holds_at(x, y), b.predicate.holds_at(x, y), "{}\n{}\n{:?} {:?}", vnn, text, x, y);
        }
    }
}

fn term(c: f64, var: &str) -> (String, String) {
    (format!("(* {c} {var})"), format!("{c}*{}", var.replace('_', "[").to_lowercase() + "]"))
}

/// The same unsafe region in both syntaxes: VNN-LIB asserts it, the textual
/// form proves its negation.
fn render(lo: &[f64], hi: &[f64], region: &[Vec<LinearAtom>]) -> (String, String) {
    let mut vnn = String::new();
    let mut text = String::new();
    for i in 0..INS {
        vnn += &format!("(declare-const X_{i} Real)\n");
    }
    for j in 0..OUTS {
        vnn += &format!("(declare-const Y_{j} Real)\n");
    }
    for i in 0..INS {
        vnn += &format!("(assert (>= X_{i} {}))\n(assert (<= X_{i} {}))\n", lo[i], hi[i]);
        text += &format!("x[{i}] in [{}, {}]\n", lo[i], hi[i]);
    }
    let mut v_or = Vec::new();
    let mut t_or = Vec::new();
    for conj in region {
        let mut v_and = Vec::new();
        let mut t_and = Vec::new();
        for a in conj {
            let terms: Vec<(String, String)> = a
                .outputs
                .iter()
                .map(|&(j, c)| term(c, &format!("Y_{j}")))
                .chain(a.inputs.iter().map(|&(i, c)| term(c, &format!("X_{i}"))))
                .collect();
            let op = if a.strict { "<" } else { "<=" };
            let v_terms: Vec<&str> = terms.iter().map(|t| t.0.as_str()).collect();
            let t_terms: Vec<&str> = terms.iter().map(|t| t.1.as_str()).collect();
            v_and.push(format!("({op} (+ {}) {})", v_terms.join(" "), a.rhs));
            t_and.push(format!("{} {op} {}", t_terms.join(" + ").replace("+ -", "- "), a.rhs));
        }
        v_or.push(format!("(and {})", v_and.join(" ")));
        t_or.push(format!("({})", t_and.join(" and ")));
    }
    vnn += &format!("(assert (or {}))\n", v_or.join(" "));
    text += &format!("prove not ({})\n", t_or.join(" or "));
    (vnn, text)
}

#[test]
fn kleene_laws() {
    let all = [Tri::True, Tri::False, Tri::Unknown];
    for a in all {
        assert_eq!(a.not().not(), a);
        for b in all {
            assert_eq!(a.and(b), b.and(a));
            assert_eq!(a.or(b), b.or(a));
            assert_eq!(a.and(b).not(), a.not().or(b.not()));
            for c in all {
                assert_eq!(a.and(b.and(c)), a.and(b).and(c));
                assert_eq!(a.and(b.or(c)), a.and(b).or(a.and(c)));
            }
        }
    }
}

#[test]
fn atom_decisions_at_the_boundary() {
    let le = LinearAtom::output_le(vec![(0, 1.0)], 1.0);
    let lt = LinearAtom { strict: true, ..le.clone() };
    assert_eq!(le.decide(Interval::new(0.0, 1.0)), Tri::True);
    assert_eq!(lt.decide(Interval::new(0.0, 1.0)), Tri::Unknown);
    assert_eq!(lt.decide(Interval::new(1.0, 2.0)), Tri::False);
    assert_eq!(le.decide(Interval::new(1.0, 2.0)), Tri::Unknown);
    assert!(le.holds(&[], &[1.0]) && !lt.holds(&[], &[1.0]));
    assert_eq!(le.negated().negated(), le);
}
