mod common;

use afmu::interpolation::{interpolate_proof, verify_interpolant};
use afmu::proofs::{check_proof, is_progressive, is_thin, Proof, Rule};
use afmu::prover::is_valid;
use common::{example_interpolant, example_right, example_split, mutations, worked_example, Variant};

const FIXTURE: &str = common::WORKED_EXAMPLE_JSON;

#[test]
fn fixture_matches_builder() {
    let built = worked_example(Variant::Faithful);
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/worked_example.json");
    if std::env::var_os("AFMU_BLESS").is_some() {
        std::fs::write(path, built.to_json()).unwrap();
    }
    assert_eq!(Proof::from_json(FIXTURE).unwrap(), built);
}

#[test]
fn fixture_is_a_thin_progressive_proof() {
    let p = Proof::from_json(FIXTURE).unwrap();
    assert_eq!(check_proof(&p, false), Ok(()));
    assert!(is_thin(&p));
    assert!(is_progressive(&p));
    assert_eq!(p.nodes.iter().filter(|n| n.rule == Rule::Box).count(), 4);
}

#[test]
fn fixture_interpolant() {
    let p = Proof::from_json(FIXTURE).unwrap();
    let out = interpolate_proof(&p, &example_split()).unwrap();
    let e = example_interpolant();
    assert!(is_valid(&[out.raw.negation(), e.clone()]).unwrap());
    assert!(is_valid(&[e.negation(), out.raw.clone()]).unwrap());
    assert_eq!(out.raw.free_vars().iter().map(|n| n.to_string()).collect::<Vec<_>>(), ["r"]);
    verify_interpolant(&common::example_left().negation(), &example_right(), &out.simplified).unwrap();
}

#[test]
fn mutations_are_rejected() {
    let all = mutations();
    assert!(all.len() >= 10);
    for m in &all {
        assert!(m.rejected_as_expected(), "{}: expected {:?}, got {:?}", m.name, m.expect, m.conditions());
    }
    let open = all.iter().find(|m| m.name == "discharged leaf left open").unwrap();
    assert_eq!(check_proof(&open.proof, true), Ok(()));
}
