mod common;

use afmu::games::{solve, Condition};
use afmu::generate::FormulaConfig;
use afmu::semantics::{all_models, approximants, denote, evaluation_game, model_check, SemanticsError};
use afmu::{parse, KripkeModel, Player};
use common::{arb_formula, corpus, iso_models, naive_denote};
use proptest::prelude::*;

fn one_loop(p_true: bool) -> KripkeModel {
    let mut m = KripkeModel::new(1);
    m.add_edge(0, 0);
    if p_true {
        m.set_true("p", 0);
    }
    m
}

fn bits(s: &afmu::semantics::WorldSet) -> Vec<usize> {
    s.ones().collect()
}

#[test]
fn denotation_examples() {
    let m = one_loop(true);
    assert_eq!(bits(&denote(&parse("nu x. p & []x").unwrap(), &m)), vec![0]);
    assert_eq!(bits(&denote(&parse("mu x. p & <>x").unwrap(), &m)), Vec::<usize>::new());
    assert_eq!(bits(&denote(&parse("true").unwrap(), &m)), vec![0]);
    assert_eq!(bits(&denote(&parse("q").unwrap(), &m)), Vec::<usize>::new());
}

#[test]
fn model_check_examples() {
    let nu_box = parse("nu x. []x").unwrap();
    let excluded = parse("p | ~p").unwrap();
    for m in all_models(2, &["p".to_string()]) {
        for w in 0..2 {
            assert!(model_check(&nu_box, &m, w).unwrap());
            assert!(model_check(&excluded, &m, w).unwrap());
        }
    }
    assert!(!model_check(&parse("mu x. []x").unwrap(), &one_loop(false), 0).unwrap());
    assert!(matches!(
        model_check(&parse("mu x. nu y. [](x | y)").unwrap(), &one_loop(false), 0),
        Err(SemanticsError::NotAlternationFree(_))
    ));
}

#[test]
fn evaluation_game_rows() {
    let phi = parse("(p | <>q) & mu x. []x").unwrap();
    let m = one_loop(true);
    let g = evaluation_game(&phi, &m).unwrap();
    let pos = |t: &str| g.position(&parse(t).unwrap(), 0, 1).unwrap();
    assert_eq!(g.arena.owner[pos("p")], Some(Player::Forall));
    assert!(g.arena.moves[pos("p")].is_empty());
    assert_eq!(g.arena.owner[pos("p | <>q")], Some(Player::Exists));
    assert_eq!(g.arena.moves[pos("p | <>q")], vec![pos("p"), pos("<>q")]);
    assert_eq!(g.arena.owner[pos("q")], Some(Player::Exists));
    let fix = pos("mu x. []x");
    assert_eq!(g.arena.owner[fix], None);
    assert_eq!(g.arena.moves[fix], vec![pos("[]mu x. []x")]);
    let Condition::WeakParity(pr) = &g.arena.condition else { panic!("weak condition expected") };
    assert_eq!(pr[fix] % 2, 1);
}

#[test]
fn json_round_trip_and_errors() {
    let text = r#"{"worlds":["a","b"],"rel":[["a","b"],["b","b"]],"val":{"p":["b"]}}"#;
    let m = KripkeModel::from_json(text).unwrap();
    assert_eq!(m.world("b").unwrap(), 1);
    assert!(m.holds("p", 1) && !m.holds("p", 0));
    assert_eq!(KripkeModel::from_json(&m.to_json().to_string()).unwrap(), m);
    assert!(matches!(KripkeModel::from_json(r#"{"worlds":["a","a"],"rel":[]}"#), Err(SemanticsError::DuplicateWorld(_))));
    assert!(matches!(KripkeModel::from_json(r#"{"worlds":["a"],"rel":[["a","z"]]}"#), Err(SemanticsError::UnknownWorld(_))));
    assert!(matches!(KripkeModel::from_json("{"), Err(SemanticsError::Json(_))));
}

#[test]
fn game_and_denotation_agree_on_corpus() {
    let letters: Vec<String> = ["p", "q"].iter().map(|s| s.to_string()).collect();
    for phi in corpus() {
        for n in 1..=2 {
            for m in all_models(n, &letters) {
                let d = denote(&phi, &m);
                let g = evaluation_game(&phi, &m).unwrap();
                let sol = solve(&g.arena).unwrap();
                for w in 0..n {
                    let v = g.position(&phi, w, n).unwrap();
                    assert_eq!(sol.winner[v] == Player::Exists, d.contains(w), "{phi} at {w} of {m:?}");
                }
            }
        }
    }
}

#[test]
fn isomorphism_classes_cover_all_relations() {
    let none: Vec<String> = Vec::new();
    let counts: Vec<usize> = (1..=4).map(|n| iso_models(n, &none).count()).collect();
    assert_eq!(counts, vec![2, 10, 104, 3044]);
}

fn small() -> FormulaConfig {
    FormulaConfig::new(&["p", "q"], 4, 30)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(150))]

    #[test]
    fn complement_law(phi in arb_formula(small()), seed in any::<u64>(), n in 1usize..=4) {
        let m = afmu::generate::model(&mut common::rng(seed), n, &["p", "q"], 0.4);
        let mut c = denote(&phi, &m);
        c.toggle_range(..);
        prop_assert_eq!(denote(&phi.negation(), &m), c);
    }

    #[test]
    fn fixpoint_equation(phi in arb_formula(small()), seed in any::<u64>(), n in 1usize..=4) {
        let m = afmu::generate::model(&mut common::rng(seed), n, &["p", "q"], 0.4);
        let mut ok = true;
        phi.visit(&mut |g| {
            if g.fixpoint().is_some() && g.free_vars().iter().all(|v| &**v == "p" || &**v == "q") {
                ok &= denote(&g.unfold().unwrap(), &m) == denote(g, &m);
            }
        });
        prop_assert!(ok);
    }

    #[test]
    fn approximants_are_monotone(phi in arb_formula(small()), seed in any::<u64>(), n in 1usize..=4) {
        let m = afmu::generate::model(&mut common::rng(seed), n, &["p", "q"], 0.4);
        let mut ok = true;
        phi.visit(&mut |g| {
            if let Some((eta, _, _)) = g.fixpoint() {
                if g.free_vars().iter().all(|v| &**v == "p" || &**v == "q") {
                    let a = approximants(g, &m);
                    ok &= a.len() <= n + 1;
                    ok &= a.windows(2).all(|w| match eta {
                        afmu::Fix::Mu => w[0].is_subset(&w[1]),
                        afmu::Fix::Nu => w[1].is_subset(&w[0]),
                    });
                    ok &= a.last() == Some(&denote(g, &m));
                }
            }
        });
        prop_assert!(ok);
    }

    #[test]
    fn model_check_matches_naive_fixpoints(phi in arb_formula(FormulaConfig::new(&["p", "q"], 3, 20)), seed in any::<u64>()) {
        let m = afmu::generate::model(&mut common::rng(seed), 3, &["p", "q"], 0.5);
        let naive = naive_denote(&phi, &m);
        for w in 0..3 {
            prop_assert_eq!(model_check(&phi, &m, w).unwrap(), naive >> w & 1 == 1);
        }
    }
}
