mod common;

use afmu::generate::{formula, FormulaConfig};
use afmu::proofs::TrailKind;
use afmu::semantics::denote;
use afmu::tableaux::{
    build_tableau, build_tableau_with, extract_countermodel, is_nu_trail, solve_tableau_game, tableau_game, tableau_trail_step, tighten,
    winner, Schedule, TRule, TableauError, Trail,
};
use afmu::{Formula, Player};
use common::{f, rng};

fn refuted(phi: &[Formula]) -> bool {
    let g = tableau_game(&build_tableau(phi).unwrap());
    let (w, sol) = solve_tableau_game(&g).unwrap();
    if w == Player::Exists {
        return false;
    }
    let (m, s) = extract_countermodel(&g, &sol).unwrap();
    for x in phi {
        assert!(!denote(x, &m).contains(s), "{x} holds at the countermodel root");
    }
    true
}

#[test]
fn build_examples() {
    let t = build_tableau(&[f("true")]).unwrap();
    assert_eq!(t.nodes.len(), 1);
    assert_eq!(t.nodes[0].rule, TRule::Ax2);
    let t = build_tableau(&[f("p"), f("~p"), f("<>q")]).unwrap();
    assert_eq!(t.nodes[t.initial].rule, TRule::Ax1);
    let t = build_tableau(&[f("mu x. <>x")]).unwrap();
    assert!(t.nodes.len() <= 4);
    let m = t.nodes.iter().find(|n| n.rule == TRule::M).unwrap();
    assert!(m.succ.is_empty());
    let t = build_tableau(&[f("mu x. <>x"), f("[]p")]).unwrap();
    assert!(t.nodes.len() <= 4);
    assert!(t.nodes.iter().any(|n| n.rule == TRule::M && !n.succ.is_empty()));
    assert_eq!(build_tableau(&[]).unwrap_err(), TableauError::Empty);
    assert!(matches!(build_tableau(&[f("mu x. x")]), Err(TableauError::Unguarded(_))));
    assert!(matches!(build_tableau(&[f("mu x. nu y. <>(x | y)")]), Err(TableauError::NotAlternationFree(_))));
}

#[test]
fn game_examples() {
    assert_eq!(winner(&[f("true")], Schedule::Least).unwrap(), Player::Exists);
    assert_eq!(winner(&[f("~p"), f("p")], Schedule::Least).unwrap(), Player::Exists);
    assert_eq!(winner(&[f("mu x. <>x")], Schedule::Least).unwrap(), Player::Forall);
    assert_eq!(winner(&[f("nu x. []x")], Schedule::Least).unwrap(), Player::Exists);
}

#[test]
fn countermodel_examples() {
    let phi = [f("mu x. <>x")];
    let g = tableau_game(&build_tableau(&phi).unwrap());
    let (_, sol) = solve_tableau_game(&g).unwrap();
    let (m, s) = extract_countermodel(&g, &sol).unwrap();
    assert_eq!(m.worlds.len(), 1);
    assert!(m.succ[s].is_empty());
    assert!(refuted(&phi));
    assert!(refuted(&[f("mu x. <>x"), f("[]p")]));

    let g = tableau_game(&build_tableau(&[f("p")]).unwrap());
    let (_, sol) = solve_tableau_game(&g).unwrap();
    let (m, s) = extract_countermodel(&g, &sol).unwrap();
    assert_eq!(m.worlds.len(), 1);
    assert!(!m.holds("p", s));

    assert!(refuted(&[f("nu x. p & []x"), f("~p")]));

    let g = tableau_game(&build_tableau(&[f("true")]).unwrap());
    let (_, sol) = solve_tableau_game(&g).unwrap();
    assert!(matches!(extract_countermodel(&g, &sol), Err(TableauError::NotWinning(_))));
}

#[test]
fn trail_steps() {
    let t = build_tableau(&[f("p | q"), f("<>r")]).unwrap();
    let root = t.initial;
    assert_eq!(t.nodes[root].rule, TRule::Or);
    let id = |s: &str| t.id_of(&f(s)).unwrap();
    let mut steps = tableau_trail_step(&t, root, 0);
    steps.sort();
    let mut want = vec![
        (id("p | q"), id("p"), TrailKind::Active),
        (id("p | q"), id("q"), TrailKind::Active),
        (id("<>r"), id("<>r"), TrailKind::Passive),
    ];
    want.sort();
    assert_eq!(steps, want);

    let t = build_tableau(&[f("[]p"), f("<>q"), f("<>r")]).unwrap();
    let m = (0..t.nodes.len()).find(|&i| t.nodes[i].rule == TRule::M).unwrap();
    let steps = tableau_trail_step(&t, m, 0);
    assert!(steps.iter().all(|s| s.2 == TrailKind::Active));
    assert_eq!(steps.len(), 3);
}

#[test]
fn trail_classification() {
    let nu = f("nu x. []x");
    let body = f("[]nu x. []x");
    let lp = Trail { formulas: vec![nu.clone(), body.clone()], kinds: vec![TrailKind::Active, TrailKind::Active] };
    assert!(is_nu_trail(&lp).unwrap());
    let with_passive = Trail { formulas: vec![nu.clone(), body.clone(), body], kinds: vec![TrailKind::Active, TrailKind::Passive, TrailKind::Active] };
    let open = Trail { formulas: with_passive.formulas.clone(), kinds: with_passive.kinds[..2].to_vec() };
    assert_eq!(tighten(&open).len(), 2);
    assert!(is_nu_trail(&with_passive).unwrap());
    let mu = f("mu x. <>x");
    let lp = Trail { formulas: vec![mu, f("<>mu x. <>x")], kinds: vec![TrailKind::Active, TrailKind::Active] };
    assert!(!is_nu_trail(&lp).unwrap());
    let idle = Trail { formulas: vec![nu], kinds: vec![TrailKind::Passive] };
    assert!(is_nu_trail(&idle).is_err());
}

/// Every cycle of Prover's strategy subgraph inside her region passes a
/// modal position.
fn prover_plays_pass_modal_rule(phi: &[Formula]) -> bool {
    let g = tableau_game(&build_tableau(phi).unwrap());
    let (_, sol) = solve_tableau_game(&g).unwrap();
    let a = &g.arena;
    let n = a.len();
    let modal = |p: usize| g.tableau.nodes[g.positions[p].0].rule == TRule::M;
    let succ = |p: usize| -> Vec<usize> {
        if modal(p) || sol.winner[p] != Player::Exists {
            return Vec::new();
        }
        a.moves[p].iter().copied().filter(|&q| sol.winner[q] == Player::Exists).collect()
    };
    // Kahn's algorithm on the non-modal part.
    let mut indeg = vec![0; n];
    for p in 0..n {
        for q in succ(p) {
            indeg[q] += 1;
        }
    }
    let mut stack: Vec<usize> = (0..n).filter(|&p| indeg[p] == 0).collect();
    let mut seen = 0;
    while let Some(p) = stack.pop() {
        seen += 1;
        for q in succ(p) {
            indeg[q] -= 1;
            if indeg[q] == 0 {
                stack.push(q);
            }
        }
    }
    seen == n
}

#[test]
fn generated_formulas() {
    let cfg = FormulaConfig::new(&["p", "q"], 5, 30);
    let mut r = rng(11);
    let mut valid = 0;
    for _ in 0..150 {
        let phi = formula(&mut r, &cfg);
        let seq = [phi.clone()];
        let least = winner(&seq, Schedule::Least).unwrap();
        assert_eq!(least, winner(&seq, Schedule::Greatest).unwrap(), "{phi}");
        let t = build_tableau_with(&seq, Schedule::Greatest).unwrap();
        assert!(t.nodes.iter().all(|n| n.rule != TRule::M || n.succ.len() == n.boxes.len()));
        if least == Player::Exists {
            valid += 1;
            assert!(prover_plays_pass_modal_rule(&seq), "{phi}");
            for m in afmu::semantics::all_models(2, &["p".into(), "q".into()]) {
                assert_eq!(denote(&phi, &m), m.full_set(), "{phi}");
            }
        } else {
            assert!(refuted(&seq));
        }
    }
    assert!(valid > 0);
}
