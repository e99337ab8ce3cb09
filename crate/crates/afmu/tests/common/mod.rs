#![allow(dead_code)]

use afmu::proofs::{apply_rule, Ann, AnnFormula, Proof, ProofTree, Rule, Sequent};
use afmu::formula::parse_exact;
use afmu::{Formula, Kind};

pub fn f(text: &str) -> Formula {
    parse_exact(text).unwrap_or_else(|e| panic!("{text}: {e}"))
}

pub fn psi1(v: &str) -> String {
    format!("((({v} & <>{v}) | (~r & <>{v})) | (~{v} & (r & []~{v})))")
}

pub fn psi2(v: &str) -> String {
    format!("({v} & ~r)")
}

pub fn psi3(v: &str) -> String {
    format!("(<>~{v} & <>{v})")
}

pub const PHI: &str = "(nu y. [](r & y))";

pub fn alpha(v: &str) -> String {
    format!("(mu x. ((({} | {}) | {}) | {PHI}) | <>x)", psi1(v), psi2(v), psi3(v))
}

/// The premise of the implication in the worked example, as a sequent formula.
pub fn example_left() -> Formula {
    f(&format!("~p | {}", alpha("p")))
}

pub fn example_right() -> Formula {
    f(&format!("q | {}", alpha("q")))
}

pub fn example_interpolant() -> Formula {
    f("mu x. r & <>(~r | <>x)")
}

struct Step {
    seq: Sequent,
    rule: Rule,
    token: Option<String>,
    side: Option<(usize, ProofTree)>,
}

/// A linear stretch of a proof built bottom-up; conjunctions close one
/// premise on the side.
pub struct Line {
    cur: Sequent,
    steps: Vec<Step>,
}

impl Line {
    pub fn new(s: Sequent) -> Line {
        Line { cur: s, steps: Vec::new() }
    }

    pub fn cur(&self) -> &Sequent {
        &self.cur
    }

    /// The unique element matching `text`, optionally suffixed `^f`/`^u`.
    pub fn find(&self, text: &str) -> AnnFormula {
        find(&self.cur, text)
    }

    fn push(&mut self, rule: Rule, token: Option<String>, side: Option<(usize, ProofTree)>, next: Sequent) {
        let seq = std::mem::replace(&mut self.cur, next);
        self.steps.push(Step { seq, rule, token, side });
    }

    pub fn apply(mut self, rule: Rule, text: &str) -> Line {
        let pi = self.find(text);
        let prem = apply_rule(rule, &self.cur, Some(&pi)).unwrap_or_else(|e| panic!("{e} at {}", self.cur));
        assert_eq!(prem.len(), 1, "{rule} is not unary");
        self.push(rule, None, None, prem[0].clone());
        self
    }

    pub fn and(mut self, text: &str, closed: usize, side: impl FnOnce(Sequent) -> ProofTree) -> Line {
        let pi = self.find(text);
        let prem = apply_rule(Rule::And, &self.cur, Some(&pi)).unwrap_or_else(|e| panic!("{e} at {}", self.cur));
        let tree = side(prem[closed].clone());
        self.push(Rule::And, None, Some((closed, tree)), prem[1 - closed].clone());
        self
    }

    pub fn weaken(mut self, texts: &[&str]) -> Line {
        for t in texts {
            let e = self.find(t);
            let next = self.cur.without(&e);
            self.push(Rule::W, None, None, next);
        }
        self
    }

    /// Weakens everything except the listed formulas, unfocused twins first.
    pub fn keep(mut self, texts: &[&str]) -> Line {
        let kept: Vec<AnnFormula> = texts.iter().map(|t| self.find(t)).collect();
        let mut drop: Vec<AnnFormula> = self.cur.iter().filter(|e| !kept.contains(e)).cloned().collect();
        drop.sort_by_key(|(g, a)| !(*a == Ann::U && self.cur.contains(g, Ann::F)));
        for e in drop {
            let next = self.cur.without(&e);
            self.push(Rule::W, None, None, next);
        }
        self
    }

    pub fn discharge(mut self, token: &str) -> Line {
        let s = self.cur.clone();
        self.push(Rule::D, Some(token.to_string()), None, s);
        self
    }

    pub fn end(self, top: ProofTree) -> ProofTree {
        let mut tree = top;
        for step in self.steps.into_iter().rev() {
            let children = match step.side {
                Some((0, side)) => vec![side, tree],
                Some((_, side)) => vec![tree, side],
                None => vec![tree],
            };
            tree = ProofTree::node(step.seq, step.rule, children);
            if let Some(t) = step.token {
                tree = tree.with_token(&t);
            }
        }
        tree
    }

    pub fn leaf(self, rule: Rule) -> ProofTree {
        let s = self.cur.clone();
        self.end(ProofTree::leaf(s, rule))
    }

    pub fn discharged(self, token: &str) -> ProofTree {
        let s = self.cur.clone();
        self.end(ProofTree::leaf(s, Rule::Discharged).with_token(token))
    }
}

pub fn find(s: &Sequent, text: &str) -> AnnFormula {
    let (body, ann) = match text.rsplit_once('^') {
        Some((b, "f")) => (b, Some(Ann::F)),
        Some((b, "u")) => (b, Some(Ann::U)),
        _ => (text, None),
    };
    let g = f(body);
    let hits: Vec<&AnnFormula> = s.iter().filter(|(h, a)| *h == g && ann.is_none_or(|b| b == *a)).collect();
    assert_eq!(hits.len(), 1, "{text} matches {} elements of {s}", hits.len());
    hits[0].clone()
}

/// Weakens down to a complementary pair and closes.
pub fn close(s: Sequent, a: &str, b: &str) -> ProofTree {
    Line::new(s).keep(&[a, b]).leaf(Rule::Ax1)
}

/// Weakens to a box and a diamond whose bodies are complementary, then closes.
pub fn box_close(s: Sequent, bx: &str, dia: &str) -> ProofTree {
    Line::new(s).keep(&[bx, dia]).apply(Rule::Box, bx).leaf(Rule::Ax1)
}

/// Unfolds the alpha formula over letter `v` and splits its disjunctions.
pub fn unfold_alpha(line: Line, v: &str, drop_twin: bool) -> Line {
    let (p1, p2, p3) = (psi1(v), psi2(v), psi3(v));
    let d2 = format!("(({p1} | {p2}) | {p3})");
    let d3 = format!("({d2} | {PHI})");
    let a = alpha(v);
    let mut line = line.apply(Rule::Mu, &a).apply(Rule::Or, &format!("{d3} | <>{a}")).apply(Rule::Or, &d3);
    if drop_twin {
        line = line.weaken(&[&format!("{PHI}^u")]);
    }
    line.apply(Rule::Or, &d2)
        .apply(Rule::Or, &format!("{p1} | {p2}"))
        .apply(Rule::Or, &p1)
        .apply(Rule::Or, &format!("({v} & <>{v}) | (~r & <>{v})"))
}

/// Deliberately broken constructions of the worked example.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Variant {
    Faithful,
    /// The greatest fixpoint is never put in focus.
    NoFocus,
    /// A focus/unfocus pair right above the discharge node.
    FocusPair,
    /// The cycle is closed right after the discharge node, without a box.
    Shortcut,
}

/// The worked-example proof, with its root split `left | right`.
pub fn worked_example(variant: Variant) -> Proof {
    let rphi = format!("r & {PHI}");
    let box_rphi = format!("[]({rphi})");
    let ap = alpha("p");
    let aq = alpha("q");
    let dap = format!("<>{ap}");
    let daq = format!("<>{aq}");
    let root: Sequent = [(example_left(), Ann::F), (example_right(), Ann::F)].into_iter().collect();
    let line = Line::new(root)
        .apply(Rule::Or, &format!("~p | {ap}"))
        .apply(Rule::Or, &format!("q | {aq}"));
    let line = unfold_alpha(line, "p", false)
        .keep(&["~p", "p & <>p", "p & ~r", PHI, &dap, "q", &aq])
        .and("p & <>p", 0, |s| close(s, "p", "~p"))
        .and("p & ~r", 0, |s| close(s, "p", "~p"));
    let line = if variant == Variant::NoFocus { line } else { line.apply(Rule::F, PHI) };
    let mut line = line.apply(Rule::U, "~p").apply(Rule::U, "q").apply(Rule::U, &aq).discharge("x");
    match variant {
        Variant::FocusPair => line = line.apply(Rule::F, "~p").apply(Rule::U, "~p"),
        Variant::Shortcut => return line.apply(Rule::F, "~p").apply(Rule::U, "~p").discharged("x").into_proof(),
        _ => {}
    }
    let line = unfold_alpha(line, "q", variant != Variant::NoFocus)
        .keep(&["~p", "<>p", "~r", PHI, &dap, "q", "~q & (r & []~q)", &psi3("q"), &daq])
        .and("~q & (r & []~q)", 0, |s| close(s, "q", "~q"))
        .and("r & []~q", 0, |s| close(s, "r", "~r"))
        .and(&psi3("q"), 1, |s| box_close(s, "[]~q", "<>q"))
        .apply(Rule::Nu, PHI)
        .keep(&["<>p", &box_rphi, &dap, "<>~q", &daq])
        .apply(Rule::Box, &box_rphi);
    let line = unfold_alpha(line, "q", false)
        .keep(&["p", &rphi, &ap, "~q", "q & <>q", "q & ~r", &daq])
        .and("q & <>q", 0, |s| close(s, "q", "~q"))
        .and("q & ~r", 0, |s| close(s, "q", "~q"));
    let line = unfold_alpha(line, "p", false)
        .keep(&["p", &rphi, "~p & (r & []~p)", &psi3("p"), &dap, "~q", "<>q", "~r", &daq])
        .and("~p & (r & []~p)", 0, |s| close(s, "p", "~p"))
        .and("r & []~p", 0, |s| close(s, "r", "~r"))
        .and(&psi3("p"), 1, |s| box_close(s, "[]~p", "<>p"))
        .and(&rphi, 0, |s| close(s, "r", "~r"))
        .apply(Rule::Nu, PHI)
        .keep(&[&box_rphi, "<>~p", &dap, "<>q", &daq])
        .apply(Rule::Box, &box_rphi);
    unfold_alpha(line, "p", false)
        .keep(&[&rphi, "~p", "p & <>p", "p & ~r", &dap, "q", &aq])
        .and("p & <>p", 0, |s| close(s, "p", "~p"))
        .and("p & ~r", 0, |s| close(s, "p", "~p"))
        .and(&rphi, 0, |s| close(s, "r", "~r"))
        .discharged("x")
        .into_proof()
}

/// The left part of the worked example's root.
pub fn example_split() -> Sequent {
    [(example_left(), Ann::F)].into_iter().collect()
}

pub fn corpus() -> Vec<Formula> {
    include_str!("../fixtures/corpus.txt")
        .lines()
        .filter(|l| !l.trim().is_empty() && !l.starts_with('#'))
        .map(|l| afmu::parse(l).unwrap_or_else(|e| panic!("{l}: {e}")))
        .collect()
}

pub fn rng(seed: u64) -> rand_chacha::ChaCha8Rng {
    use rand::SeedableRng;
    rand_chacha::ChaCha8Rng::seed_from_u64(seed)
}

/// Seeded formulas as a proptest strategy; shrinking moves towards smaller seeds.
pub fn arb_formula(cfg: afmu::generate::FormulaConfig) -> impl proptest::strategy::Strategy<Value = Formula> {
    use proptest::strategy::Strategy;
    (0u64..1 << 48).prop_map(move |s| afmu::generate::formula(&mut rng(s), &cfg))
}

/// Denotation by Knaster-Tarski over all subsets of at most 16 worlds.
pub fn naive_denote(f: &Formula, m: &afmu::KripkeModel) -> u32 {
    fn go(f: &Formula, m: &afmu::KripkeModel, env: &mut Vec<(String, u32)>) -> u32 {
        use afmu::Kind;
        let n = m.len();
        let full = (1u32 << n) - 1;
        let letter = |p: &str| (0..n).filter(|&w| m.holds(p, w)).fold(0, |s, w| s | 1 << w);
        match f.kind() {
            Kind::Top => full,
            Kind::Bottom => 0,
            Kind::Prop(p) => env.iter().rev().find(|(x, _)| x == &**p).map_or_else(|| letter(p), |e| e.1),
            Kind::NegProp(p) => full & !letter(p),
            Kind::Or(a, b) => go(a, m, env) | go(b, m, env),
            Kind::And(a, b) => go(a, m, env) & go(b, m, env),
            Kind::Dia(a) => {
                let s = go(a, m, env);
                (0..n).filter(|&w| m.succ[w].iter().any(|&v| s >> v & 1 == 1)).fold(0, |t, w| t | 1 << w)
            }
            Kind::Box(a) => {
                let s = go(a, m, env);
                (0..n).filter(|&w| m.succ[w].iter().all(|&v| s >> v & 1 == 1)).fold(0, |t, w| t | 1 << w)
            }
            Kind::Mu(x, a) | Kind::Nu(x, a) => {
                let mu = matches!(f.kind(), Kind::Mu(..));
                let mut acc = if mu { full } else { 0 };
                for s in 0..=full {
                    env.push((x.to_string(), s));
                    let img = go(a, m, env);
                    env.pop();
                    if mu && img & !s == 0 {
                        acc &= s;
                    }
                    if !mu && s & !img == 0 {
                        acc |= s;
                    }
                }
                acc
            }
        }
    }
    assert!(m.len() <= 16);
    go(f, m, &mut Vec::new())
}

/// Winning regions by enumerating every positional strategy of Exists and
/// every simple lasso of the resulting one-player graph.
pub fn brute_force_winners(a: &afmu::games::GameArena) -> Vec<afmu::Player> {
    use afmu::games::Condition;
    use afmu::Player;
    let n = a.len();
    let exists_choice: Vec<usize> = (0..n).filter(|&v| a.mover(v) == Player::Exists && a.moves[v].len() > 1).collect();
    let wins_cycle = |cycle: &[usize]| match &a.condition {
        Condition::Reachability(_) => false,
        Condition::Buchi(b) => cycle.iter().any(|v| b.contains(v)),
        Condition::CoBuchi(c) => !cycle.iter().any(|v| c.contains(v)),
        Condition::WeakParity(pr) => cycle.iter().map(|&v| pr[v]).max().expect("cycle") % 2 == 0,
    };
    let target = |v: usize| matches!(&a.condition, Condition::Reachability(t) if t.contains(&v));
    // Does Forall have a play from `v` that Exists loses, given Exists's successor table?
    fn refuted(
        v: usize,
        path: &mut Vec<usize>,
        succ: &dyn Fn(usize) -> Vec<usize>,
        wins_cycle: &dyn Fn(&[usize]) -> bool,
        target: &dyn Fn(usize) -> bool,
        exists_dead: &dyn Fn(usize) -> bool,
    ) -> bool {
        if target(v) {
            return false;
        }
        if let Some(i) = path.iter().position(|&w| w == v) {
            return !wins_cycle(&path[i..]);
        }
        let next = succ(v);
        if next.is_empty() {
            return exists_dead(v);
        }
        path.push(v);
        let r = next.into_iter().any(|w| refuted(w, path, succ, wins_cycle, target, exists_dead));
        path.pop();
        r
    }
    let mut winner = vec![Player::Forall; n];
    let mut choice = vec![0usize; exists_choice.len()];
    loop {
        let pick = |v: usize| exists_choice.iter().position(|&u| u == v).map(|i| choice[i]);
        let succ = |v: usize| match pick(v) {
            Some(k) => vec![a.moves[v][k]],
            None => a.moves[v].clone(),
        };
        let exists_dead = |v: usize| a.mover(v) == Player::Exists;
        for v in 0..n {
            if winner[v] == Player::Forall && !refuted(v, &mut Vec::new(), &succ, &wins_cycle, &target, &exists_dead) {
                winner[v] = Player::Exists;
            }
        }
        let mut i = 0;
        loop {
            if i == choice.len() {
                return winner;
            }
            choice[i] += 1;
            if choice[i] < a.moves[exists_choice[i]].len() {
                break;
            }
            choice[i] = 0;
            i += 1;
        }
    }
}

/// Accessibility relations on `n <= 4` worlds, one per isomorphism class,
/// as edge bitmasks over `n * n` bits.
pub fn canonical_relations(n: usize) -> Vec<u32> {
    assert!(n <= 4);
    let perms = permutations(n);
    let edges = n * n;
    (0u32..1 << edges)
        .filter(|&code| {
            perms.iter().all(|pi| {
                let mut img = 0u32;
                for e in 0..edges {
                    if code >> e & 1 == 1 {
                        img |= 1 << (pi[e / n] * n + pi[e % n]);
                    }
                }
                img >= code
            })
        })
        .collect()
}

/// Every model on `n <= 4` worlds over `letters` up to isomorphism of the
/// accessibility relation: one relation per orbit, all valuations.
pub fn iso_models(n: usize, letters: &[String]) -> impl Iterator<Item = afmu::KripkeModel> + '_ {
    let vbits = n * letters.len();
    canonical_relations(n).into_iter().flat_map(move |code| (0u32..1 << vbits).map(move |v| valued_copy(n, code, letters, v, 1)))
}

/// The disjoint union of the models on relation `code` under every
/// valuation of `letters`; copy `c` occupies worlds `c * n .. (c + 1) * n`.
pub fn valuation_union(n: usize, code: u32, letters: &[String]) -> afmu::KripkeModel {
    valued_copy(n, code, letters, 0, 1 << (n * letters.len()))
}

fn valued_copy(n: usize, code: u32, letters: &[String], first: u32, copies: u32) -> afmu::KripkeModel {
    let mut m = afmu::KripkeModel::new(n * copies as usize);
    for c in 0..copies as usize {
        let v = first as usize + c;
        for e in 0..n * n {
            if code >> e & 1 == 1 {
                m.add_edge(c * n + e / n, c * n + e % n);
            }
        }
        for (i, p) in letters.iter().enumerate() {
            for w in 0..n {
                if v >> (i * n + w) & 1 == 1 {
                    m.set_true(p, c * n + w);
                }
            }
        }
    }
    m
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for i in 0..n {
            let mut q = p.clone();
            q.insert(i, n - 1);
            out.push(q);
        }
    }
    out
}

/// Replaces negated occurrences of the letter `x` by positive ones.
pub fn positive_in_x(f: &Formula) -> Formula {
    match f.kind() {
        Kind::NegProp(n) if &**n == "x" => Formula::prop("x"),
        Kind::Or(a, b) => Formula::or(positive_in_x(a), positive_in_x(b)),
        Kind::And(a, b) => Formula::and(positive_in_x(a), positive_in_x(b)),
        Kind::Dia(a) => Formula::dia(positive_in_x(a)),
        Kind::Box(a) => Formula::boxed(positive_in_x(a)),
        Kind::Mu(y, a) => Formula::fix(afmu::Fix::Mu, y.clone(), positive_in_x(a)),
        Kind::Nu(y, a) => Formula::fix(afmu::Fix::Nu, y.clone(), positive_in_x(a)),
        _ => f.clone(),
    }
}

pub const WORKED_EXAMPLE_JSON: &str = include_str!("../fixtures/worked_example.json");

/// What a mutated proof must be rejected with.
#[derive(Clone, Copy, Debug)]
pub enum Expect {
    /// The violations include this condition.
    Includes(&'static str),
    /// The violations are exactly this condition.
    Only(&'static str),
}

pub struct Mutation {
    pub name: &'static str,
    pub proof: afmu::Proof,
    pub expect: Expect,
}

impl Mutation {
    pub fn conditions(&self) -> std::collections::BTreeSet<&'static str> {
        match afmu::check_proof(&self.proof, false) {
            Ok(()) => Default::default(),
            Err(v) => v.iter().map(|x| x.condition.id()).collect(),
        }
    }

    pub fn rejected_as_expected(&self) -> bool {
        let got = self.conditions();
        match self.expect {
            Expect::Includes(id) => got.contains(id),
            Expect::Only(id) => got.len() == 1 && got.contains(id),
        }
    }
}

fn position(v: &serde_json::Value, rule: Rule, nth: usize) -> usize {
    v["nodes"]
        .as_array()
        .expect("nodes")
        .iter()
        .enumerate()
        .filter(|(_, n)| n["rule"] == rule.name())
        .nth(nth)
        .unwrap_or_else(|| panic!("no {rule} number {nth}"))
        .0
}

fn mutate(edit: impl FnOnce(&mut serde_json::Value)) -> afmu::Proof {
    let mut v: serde_json::Value = serde_json::from_str(WORKED_EXAMPLE_JSON).expect("fixture");
    edit(&mut v);
    afmu::Proof::from_json(&v.to_string()).expect("mutated proof parses")
}

/// Single-rule mutations of the worked example proof.
pub fn mutations() -> Vec<Mutation> {
    use serde_json::{json, Value};
    let m = |name, proof, expect| Mutation { name, proof, expect };
    vec![
        m("rule swap at the root", mutate(|v| v["nodes"][0]["rule"] = json!("RAnd")), Expect::Includes("1")),
        m("annotation flip at the root", mutate(|v| v["nodes"][0]["seq"][0][1] = json!("u")), Expect::Includes("1")),
        m(
            "axiom swap",
            mutate(|v| {
                let i = position(v, Rule::Ax1, 0);
                v["nodes"][i]["rule"] = json!("Ax2");
            }),
            Expect::Includes("1"),
        ),
        m(
            "box rule relabelled",
            mutate(|v| {
                let i = position(v, Rule::Box, 2);
                v["nodes"][i]["rule"] = json!("RNu");
            }),
            Expect::Includes("1"),
        ),
        m(
            "discharged leaf left open",
            mutate(|v| {
                let i = position(v, Rule::Discharged, 0);
                v["nodes"][i]["rule"] = json!("Star");
                v["nodes"][i]["token"] = Value::Null;
                v["nodes"][i]["companion"] = Value::Null;
            }),
            Expect::Only("open"),
        ),
        m(
            "dangling token",
            mutate(|v| {
                let i = position(v, Rule::Discharged, 0);
                v["nodes"][i]["token"] = json!("y");
            }),
            Expect::Includes("3"),
        ),
        m(
            "companion pointer moved",
            mutate(|v| {
                let d = position(v, Rule::D, 0);
                let i = position(v, Rule::Discharged, 0);
                v["nodes"][i]["companion"] = json!(d + 1);
            }),
            Expect::Includes("3"),
        ),
        m(
            "leaf annotation differs from companion",
            mutate(|v| {
                let i = position(v, Rule::Discharged, 0);
                for e in v["nodes"][i]["seq"].as_array_mut().expect("seq") {
                    if e[1] == "f" {
                        e[1] = json!("u");
                    }
                }
            }),
            Expect::Includes("3"),
        ),
        m(
            "discharged node with children",
            mutate(|v| {
                let d = position(v, Rule::D, 0);
                v["nodes"][d + 1]["rule"] = json!("Token");
                v["nodes"][d + 1]["token"] = json!("x");
                v["nodes"][d + 1]["companion"] = json!(d);
            }),
            Expect::Includes("2"),
        ),
        m("focus rules on the cycle", worked_example(Variant::FocusPair), Expect::Only("4a")),
        m("cycle without a box rule", worked_example(Variant::Shortcut), Expect::Includes("4b")),
        m("cycle out of focus", worked_example(Variant::NoFocus), Expect::Only("4c")),
    ]
}
