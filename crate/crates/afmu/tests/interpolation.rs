mod common;

use std::collections::BTreeSet;

use afmu::formula::is_alternation_free;
use afmu::generate::{valid_implication, FormulaConfig};
use afmu::interpolation::{
    balance, connectedness_classes, fixpoint_colouring, induce_partition, interpolate, interpolate_proof, simple_negation, simplify,
    verification, verify_interpolant, Colour, InterpolationError,
};
use afmu::proofs::{Ann, ProofTree, Rule};
use afmu::prover::is_valid;
use afmu::semantics::denote;
use afmu::{Formula, Sequent};
use common::{example_interpolant, example_left, example_right, example_split, f, rng, worked_example, Variant};

fn equivalent(a: &Formula, b: &Formula) -> bool {
    is_valid(&[a.negation(), b.clone()]).unwrap() && is_valid(&[b.negation(), a.clone()]).unwrap()
}

#[test]
fn worked_example_from_scratch() {
    let phi = example_left().negation();
    let psi = example_right();
    let out = interpolate(&phi, &psi).unwrap();
    let e = example_interpolant();
    assert!(equivalent(&out.raw, &e));
    assert!(equivalent(&out.simplified, &e));
    assert_eq!(out.raw.free_vars().iter().map(|v| v.to_string()).collect::<Vec<_>>(), vec!["r"]);
    verify_interpolant(&phi, &psi, &e).unwrap();
    verify_interpolant(&phi, &psi, &out.simplified).unwrap();
    assert!(out.colouring.class_colours().contains(&Colour::Mu));
}

#[test]
fn small_implications() {
    let out = interpolate(&f("p"), &f("p")).unwrap();
    assert!(equivalent(&out.raw, &f("p")));
    let out = interpolate(&f("p & q"), &f("p | r")).unwrap();
    assert!(out.raw.free_vars().iter().all(|v| &**v == "p"));
    assert!(equivalent(&out.raw, &f("p")));
    let out = interpolate(&f("p & ~p"), &f("q")).unwrap();
    assert!(out.raw.free_vars().is_empty());
    assert!(matches!(interpolate(&f("p"), &f("q")), Err(InterpolationError::Invalid { .. })));
}

#[test]
fn axiom_splits() {
    let root: Sequent = [(f("~p"), Ann::F), (f("p"), Ann::F)].into_iter().collect();
    let proof = ProofTree::leaf(root.clone(), Rule::Ax1).into_proof();
    let left: Sequent = [(f("~p"), Ann::F)].into_iter().collect();
    assert_eq!(interpolate_proof(&proof, &left).unwrap().raw, f("p"));
    let left: Sequent = [(f("p"), Ann::F)].into_iter().collect();
    assert_eq!(interpolate_proof(&proof, &left).unwrap().raw, f("~p"));
    assert_eq!(interpolate_proof(&proof, &root).unwrap().raw, f("false"));
    assert_eq!(interpolate_proof(&proof, &Sequent::new()).unwrap().raw, f("true"));
    let other: Sequent = [(f("q"), Ann::F)].into_iter().collect();
    assert!(matches!(interpolate_proof(&proof, &other), Err(InterpolationError::NotPartition)));
}

#[test]
fn simple_negation_examples() {
    let fixed: BTreeSet<_> = ["x".into()].into_iter().collect();
    assert_eq!(simple_negation(&Formula::prop("x"), &fixed), Formula::prop("x"));
    let g = Formula::fix(afmu::Fix::Mu, "y".into(), Formula::or(Formula::prop("p"), Formula::dia(Formula::prop("y"))));
    assert_eq!(simple_negation(&g, &BTreeSet::new()), g.negation());
    let with_token = Formula::and(Formula::prop("p"), Formula::boxed(Formula::prop("x")));
    assert_eq!(simple_negation(&with_token, &fixed), Formula::or(Formula::neg_prop("p"), Formula::dia(Formula::prop("x"))));
}

#[test]
fn simplification_examples() {
    assert_eq!(simplify(&f("false | p")), f("p"));
    assert_eq!(simplify(&f("p & true")), f("p"));
    assert_eq!(simplify(&f("<>false | []true")), f("true"));
    assert_eq!(simplify(&f("p | p | q")), f("p | q"));
    assert_eq!(simplify(&f("mu x. p")), f("p"));
}

#[test]
fn partition_colouring_and_balance() {
    let proof = worked_example(Variant::Faithful);
    let split = example_split();
    let part = induce_partition(&proof, &split).unwrap();
    for (i, n) in proof.nodes.iter().enumerate() {
        let l = &part.left[i];
        let r = &part.right[i];
        assert!(l.iter().all(|e| !r.iter().any(|x| x == e)));
        let both: Sequent = l.iter().chain(r.iter()).cloned().collect();
        assert_eq!(both, n.seq);
    }
    let (balanced, bpart) = balance(&proof, &part).unwrap();
    assert_eq!(balanced, proof);
    let (again, _) = balance(&balanced, &bpart).unwrap();
    assert_eq!(again, balanced);
    let col = fixpoint_colouring(&balanced, &bpart).unwrap();
    assert_eq!(col.class_colours(), vec![Colour::Mu]);
    let classes = connectedness_classes(&balanced);
    for c in classes.iter().flatten().collect::<BTreeSet<_>>() {
        let members: Vec<usize> = (0..balanced.len()).filter(|&i| classes[i] == Some(*c)).collect();
        let lf: BTreeSet<bool> = members.iter().map(|&i| bpart.left[i].has_focus()).collect();
        assert_eq!(lf.len(), 1, "left focus differs within a class");
    }

    let all: Sequent = proof.nodes[0].seq.clone();
    let part = induce_partition(&proof, &all).unwrap();
    assert!(part.right.iter().all(|s| s.is_empty()));

    let ax = ProofTree::leaf([(f("true"), Ann::U)].into_iter().collect(), Rule::Ax2).into_proof();
    let part = induce_partition(&ax, &Sequent::new()).unwrap();
    let col = fixpoint_colouring(&ax, &part).unwrap();
    assert_eq!(col.colour, vec![Colour::Transparent]);
}

#[test]
fn idle_discharge_is_rejected() {
    let s: Sequent = [(f("true"), Ann::F)].into_iter().collect();
    let proof = ProofTree::node(s.clone(), Rule::D, vec![ProofTree::leaf(s.clone(), Rule::Ax2)]).with_token("x").into_proof();
    assert!(matches!(interpolate_proof(&proof, &s), Err(InterpolationError::IdleDischarge(0)) | Err(InterpolationError::Proof(_))));
}

#[test]
fn generated_implications() {
    let cfg = FormulaConfig::new(&["p", "q", "r"], 4, 24);
    let chi = FormulaConfig::new(&["s"], 2, 8);
    let mut r = rng(3);
    for _ in 0..25 {
        let (phi, psi) = valid_implication(&mut r, &cfg, &chi, 2);
        let out = interpolate(&phi, &psi).unwrap_or_else(|e| panic!("{phi} -> {psi}: {e}"));
        let v = verification(&phi, &psi, &out.simplified).unwrap();
        assert!(v.holds(), "{phi} -> {psi}: {v:?}");
        assert!(is_alternation_free(&out.raw));
        assert!(equivalent(&out.raw, &out.simplified));
        let m = afmu::generate::model(&mut r, 3, &["p", "q", "r", "s"], 0.4);
        let th = denote(&out.raw, &m);
        assert!(denote(&phi, &m).is_subset(&th) && th.is_subset(&denote(&psi, &m)));
    }
}

#[test]
fn simple_negation_is_negation_without_tokens() {
    let cfg = FormulaConfig::new(&["p", "q"], 5, 30);
    let mut r = rng(21);
    for _ in 0..300 {
        let g = afmu::generate::formula(&mut r, &cfg);
        assert_eq!(simple_negation(&g, &BTreeSet::new()), g.negation(), "{g}");
    }
}
