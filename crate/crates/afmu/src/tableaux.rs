//! Graph tableaux, trails, the focus-tracking tableau game and countermodels.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use fixedbitset::FixedBitSet;
use thiserror::Error;

use crate::formula::{classify_trace, closure, is_alternation_free, is_guarded, Fix, Formula, FormulaError, Kind, TraceLasso};
use crate::games::{self, Condition, GameArena, GameError, Player, Solution};
use crate::proofs::TrailKind;
use crate::semantics::KripkeModel;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TableauError {
    #[error("the sequent is empty")]
    Empty,
    #[error("formula is not guarded: {0}")]
    Unguarded(String),
    #[error("formula is not alternation-free: {0}")]
    NotAlternationFree(String),
    #[error(transparent)]
    Game(#[from] GameError),
    #[error("the strategy is not winning: {0}")]
    NotWinning(String),
}

/// Tableau rule labels.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TRule {
    Ax1,
    Ax2,
    Or,
    And,
    Mu,
    Nu,
    M,
}

impl TRule {
    pub fn name(self) -> &'static str {
        match self {
            TRule::Ax1 => "Ax1",
            TRule::Ax2 => "Ax2",
            TRule::Or => "ROr",
            TRule::And => "RAnd",
            TRule::Mu => "RMu",
            TRule::Nu => "RNu",
            TRule::M => "M",
        }
    }
}

/// Which non-modal principal formula is expanded first.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Schedule {
    /// The least formula in the fixed formula order.
    Least,
    /// The greatest formula in the fixed formula order.
    Greatest,
    /// The least formula of the given set if there is one, else the least.
    Prefer(BTreeSet<Formula>),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TNode {
    /// Plain sequent over the universe.
    pub seq: FixedBitSet,
    pub rule: TRule,
    /// Principal formula of the boolean and fixpoint rules.
    pub principal: Option<usize>,
    pub succ: Vec<usize>,
    /// For `M`: the box formula behind each successor.
    pub boxes: Vec<usize>,
}

/// A finite graph tableau. Formulas are indices into `universe`, which is
/// the closure of the root sequent sorted by the formula order.
#[derive(Clone, Debug)]
pub struct Tableau {
    pub universe: Vec<Formula>,
    pub nodes: Vec<TNode>,
    pub initial: usize,
}

impl Tableau {
    pub fn formula(&self, id: usize) -> &Formula {
        &self.universe[id]
    }

    pub fn id_of(&self, f: &Formula) -> Option<usize> {
        self.universe.binary_search(f).ok()
    }

    pub fn sequent(&self, node: usize) -> Vec<Formula> {
        self.nodes[node].seq.ones().map(|i| self.universe[i].clone()).collect()
    }

    pub fn to_json(&self) -> serde_json::Value {
        let nodes: Vec<serde_json::Value> = self
            .nodes
            .iter()
            .map(|n| {
                serde_json::json!({
                    "seq": n.seq.ones().map(|i| self.universe[i].to_string()).collect::<Vec<_>>(),
                    "rule": n.rule.name(),
                    "principal": n.principal.map(|i| self.universe[i].to_string()),
                    "succ": n.succ,
                })
            })
            .collect();
        serde_json::json!({ "initial": self.initial, "nodes": nodes })
    }
}

/// Rejects formulas outside the guarded alternation-free fragment.
pub fn check_input(phi: &[Formula]) -> Result<(), TableauError> {
    if phi.is_empty() {
        return Err(TableauError::Empty);
    }
    for f in phi {
        if !is_guarded(f) {
            return Err(TableauError::Unguarded(f.to_string()));
        }
        if !is_alternation_free(f) {
            return Err(TableauError::NotAlternationFree(f.to_string()));
        }
    }
    Ok(())
}

pub fn build_tableau(phi: &[Formula]) -> Result<Tableau, TableauError> {
    build_tableau_with(phi, Schedule::Least)
}

/// Builds the tableau reachable from `phi`; nodes are shared by sequent.
pub fn build_tableau_with(phi: &[Formula], schedule: Schedule) -> Result<Tableau, TableauError> {
    check_input(phi)?;
    let mut universe = closure(phi.iter());
    universe.sort();
    let n = universe.len();
    let id = |f: &Formula| universe.binary_search(f).expect("closure member");
    let kind_ids: Vec<&Kind> = universe.iter().map(|f| f.kind()).collect();
    let preferred: FixedBitSet = match &schedule {
        Schedule::Prefer(set) => universe.iter().enumerate().filter(|(_, f)| set.contains(*f)).map(|(i, _)| i).collect(),
        _ => FixedBitSet::new(),
    };
    let mut root = FixedBitSet::with_capacity(n);
    for f in phi {
        root.insert(id(f));
    }
    let mut nodes: Vec<TNode> = Vec::new();
    let mut index: HashMap<FixedBitSet, usize> = HashMap::new();
    let mut queue = VecDeque::new();
    index.insert(root.clone(), 0);
    nodes.push(TNode { seq: root.clone(), rule: TRule::M, principal: None, succ: Vec::new(), boxes: Vec::new() });
    queue.push_back(0);
    while let Some(v) = queue.pop_front() {
        let seq = nodes[v].seq.clone();
        let (rule, principal, premises, boxes) = expand(&seq, &universe, &kind_ids, &schedule, &preferred, &id);
        let mut succ = Vec::with_capacity(premises.len());
        for p in premises {
            let w = match index.get(&p) {
                Some(&w) => w,
                None => {
                    let w = nodes.len();
                    index.insert(p.clone(), w);
                    nodes.push(TNode { seq: p, rule: TRule::M, principal: None, succ: Vec::new(), boxes: Vec::new() });
                    queue.push_back(w);
                    w
                }
            };
            succ.push(w);
        }
        nodes[v].rule = rule;
        nodes[v].principal = principal;
        nodes[v].succ = succ;
        nodes[v].boxes = boxes;
    }
    Ok(Tableau { universe, nodes, initial: 0 })
}

type Expansion = (TRule, Option<usize>, Vec<FixedBitSet>, Vec<usize>);

fn expand(
    seq: &FixedBitSet,
    universe: &[Formula],
    kinds: &[&Kind],
    schedule: &Schedule,
    preferred: &FixedBitSet,
    id: &dyn Fn(&Formula) -> usize,
) -> Expansion {
    if seq.ones().any(|i| matches!(kinds[i], Kind::Top)) {
        return (TRule::Ax2, None, Vec::new(), Vec::new());
    }
    let clash = seq.ones().any(|i| match kinds[i] {
        Kind::Prop(p) => seq.ones().any(|j| matches!(kinds[j], Kind::NegProp(q) if q == p)),
        _ => false,
    });
    if clash {
        return (TRule::Ax1, None, Vec::new(), Vec::new());
    }
    let mut candidates = seq.ones().filter(|&i| !universe[i].is_atomic() && !universe[i].is_modal());
    let pick = match schedule {
        Schedule::Least => candidates.next(),
        Schedule::Greatest => candidates.last(),
        Schedule::Prefer(_) => {
            let all: Vec<usize> = candidates.collect();
            all.iter().copied().find(|&i| preferred.contains(i)).or(all.first().copied())
        }
    };
    if let Some(p) = pick {
        let mut rest = seq.clone();
        rest.set(p, false);
        let with = |fs: &[&Formula]| {
            let mut s = rest.clone();
            for f in fs {
                s.insert(id(f));
            }
            s
        };
        let f = &universe[p];
        return match kinds[p] {
            Kind::Or(a, b) => (TRule::Or, Some(p), vec![with(&[a, b])], Vec::new()),
            Kind::And(a, b) => (TRule::And, Some(p), vec![with(&[a]), with(&[b])], Vec::new()),
            Kind::Mu(..) => (TRule::Mu, Some(p), vec![with(&[&f.unfold().expect("fixpoint")])], Vec::new()),
            Kind::Nu(..) => (TRule::Nu, Some(p), vec![with(&[&f.unfold().expect("fixpoint")])], Vec::new()),
            _ => unreachable!("non-atomic non-modal"),
        };
    }
    let diamonds: Vec<usize> = seq
        .ones()
        .filter_map(|i| match kinds[i] {
            Kind::Dia(b) => Some(id(b)),
            _ => None,
        })
        .collect();
    let mut premises = Vec::new();
    let mut boxes = Vec::new();
    for i in seq.ones() {
        if let Kind::Box(b) = kinds[i] {
            let mut s = FixedBitSet::with_capacity(universe.len());
            s.insert(id(b));
            for &d in &diamonds {
                s.insert(d);
            }
            premises.push(s);
            boxes.push(i);
        }
    }
    (TRule::M, None, premises, boxes)
}

/// Trail steps along the tableau edge from `u` to its `k`-th successor, as
/// (from, to, kind) over universe indices.
pub fn tableau_trail_step(t: &Tableau, u: usize, k: usize) -> Vec<(usize, usize, TrailKind)> {
    let node = &t.nodes[u];
    let v = node.succ[k];
    let target = &t.nodes[v].seq;
    let mut out = Vec::new();
    let id = |f: &Formula| t.id_of(f).expect("closure member");
    match node.rule {
        TRule::Ax1 | TRule::Ax2 => {}
        TRule::M => {
            let b = node.boxes[k];
            if let Kind::Box(body) = t.universe[b].kind() {
                out.push((b, id(body), TrailKind::Active));
            }
            for i in node.seq.ones() {
                if let Kind::Dia(body) = t.universe[i].kind() {
                    out.push((i, id(body), TrailKind::Active));
                }
            }
        }
        rule => {
            let p = node.principal.expect("principal");
            let f = &t.universe[p];
            let targets: Vec<Formula> = match (rule, f.kind()) {
                (TRule::Or, Kind::Or(a, b)) => vec![a.clone(), b.clone()],
                (TRule::And, Kind::And(a, b)) => vec![if k == 0 { a.clone() } else { b.clone() }],
                _ => vec![f.unfold().expect("fixpoint")],
            };
            for g in targets {
                out.push((p, id(&g), TrailKind::Active));
            }
            for i in node.seq.ones() {
                if i != p && target.contains(i) {
                    out.push((i, i, TrailKind::Passive));
                }
            }
        }
    }
    out
}

/// A finite stretch of a trail: `formulas[i]` steps to `formulas[i + 1]`
/// with kind `kinds[i]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Trail {
    pub formulas: Vec<Formula>,
    pub kinds: Vec<TrailKind>,
}

/// Removes the targets of passive steps.
pub fn tighten(trail: &Trail) -> Vec<Formula> {
    let mut out = Vec::new();
    if let Some(first) = trail.formulas.first() {
        out.push(first.clone());
    }
    for (k, g) in trail.kinds.iter().zip(trail.formulas.iter().skip(1)) {
        if *k == TrailKind::Active {
            out.push(g.clone());
        }
    }
    out
}

/// Classifies the infinite trail that repeats `lp` forever. The loop's last
/// formula steps back to its first with kind `lp.kinds.last()`.
pub fn is_nu_trail(lp: &Trail) -> Result<bool, FormulaError> {
    if lp.formulas.is_empty() || lp.kinds.len() != lp.formulas.len() {
        return Err(FormulaError::EmptyLoop);
    }
    let mut tight = Vec::new();
    for (i, k) in lp.kinds.iter().enumerate() {
        if *k == TrailKind::Active {
            tight.push(lp.formulas[(i + 1) % lp.formulas.len()].clone());
        }
    }
    if tight.is_empty() {
        return Err(FormulaError::EmptyLoop);
    }
    Ok(classify_trace(&TraceLasso { prefix: Vec::new(), lp: tight })? == Fix::Nu)
}

/// The tableau game played on tableau nodes paired with the set of formulas
/// in focus. An empty focus set marks a position where every formula is put
/// back in focus before the rule is applied.
#[derive(Clone, Debug)]
pub struct TableauGame {
    pub tableau: Tableau,
    /// Tableau node and focus set of each arena position.
    pub positions: Vec<(usize, FixedBitSet)>,
    pub arena: GameArena,
}

impl TableauGame {
    /// The focus set in force at a position.
    pub fn effective_focus(&self, pos: usize) -> FixedBitSet {
        let (node, focus) = &self.positions[pos];
        if focus.is_clear() {
            self.tableau.nodes[*node].seq.clone()
        } else {
            focus.clone()
        }
    }

    pub fn is_reset(&self, pos: usize) -> bool {
        self.positions[pos].1.is_clear()
    }
}

/// Focus set at the `k`-th successor of `node` given the focus in force.
pub fn next_focus(t: &Tableau, node: usize, k: usize, eff: &FixedBitSet) -> FixedBitSet {
    let n = &t.nodes[node];
    let id = |f: &Formula| t.id_of(f).expect("closure member");
    let mut out = FixedBitSet::with_capacity(t.universe.len());
    match n.rule {
        TRule::Ax1 | TRule::Ax2 => {}
        TRule::M => {
            let b = n.boxes[k];
            if eff.contains(b) {
                if let Kind::Box(body) = t.universe[b].kind() {
                    out.insert(id(body));
                }
            }
            for i in eff.ones() {
                if let Kind::Dia(body) = t.universe[i].kind() {
                    out.insert(id(body));
                }
            }
        }
        rule => {
            let p = n.principal.expect("principal");
            out = eff.clone();
            out.set(p, false);
            if eff.contains(p) {
                let f = &t.universe[p];
                match (rule, f.kind()) {
                    (TRule::Or, Kind::Or(a, b)) => {
                        out.insert(id(a));
                        out.insert(id(b));
                    }
                    (TRule::And, Kind::And(a, b)) => out.insert(id(if k == 0 { a } else { b })),
                    (TRule::Nu, _) => out.insert(id(&f.unfold().expect("fixpoint"))),
                    _ => {}
                }
            }
        }
    }
    out
}

/// Builds the product arena. Prover (`Exists`) wins when only finitely many
/// refocusing positions are visited.
pub fn tableau_game(t: &Tableau) -> TableauGame {
    let mut positions: Vec<(usize, FixedBitSet)> = Vec::new();
    let mut index: HashMap<(usize, FixedBitSet), usize> = HashMap::new();
    let mut moves: Vec<Vec<usize>> = Vec::new();
    let mut owner: Vec<Option<Player>> = Vec::new();
    let start = (t.initial, t.nodes[t.initial].seq.clone());
    index.insert(start.clone(), 0);
    positions.push(start);
    let mut queue = VecDeque::from([0usize]);
    while let Some(p) = queue.pop_front() {
        let (node, focus) = positions[p].clone();
        let eff = if focus.is_clear() { t.nodes[node].seq.clone() } else { focus };
        let tn = &t.nodes[node];
        let mut out = Vec::with_capacity(tn.succ.len());
        for (k, &w) in tn.succ.iter().enumerate() {
            let key = (w, next_focus(t, node, k, &eff));
            let q = match index.get(&key) {
                Some(&q) => q,
                None => {
                    let q = positions.len();
                    index.insert(key.clone(), q);
                    positions.push(key);
                    queue.push_back(q);
                    q
                }
            };
            out.push(q);
        }
        while moves.len() <= p {
            moves.push(Vec::new());
            owner.push(None);
        }
        owner[p] = match tn.rule {
            TRule::Ax1 | TRule::Ax2 | TRule::And => Some(Player::Forall),
            TRule::M => Some(Player::Exists),
            _ => None,
        };
        moves[p] = out;
    }
    let resets = (0..positions.len()).filter(|&p| positions[p].1.is_clear()).collect();
    let arena = GameArena { moves, owner, initial: 0, condition: Condition::CoBuchi(resets) };
    TableauGame { tableau: t.clone(), positions, arena }
}

/// Solves the game; returns the winner at the initial position.
pub fn solve_tableau_game(g: &TableauGame) -> Result<(Player, Solution), TableauError> {
    let sol = games::solve(&g.arena)?;
    Ok((sol.winner[g.arena.initial], sol))
}

/// Decides the tableau game for `phi` with the given schedule.
pub fn winner(phi: &[Formula], schedule: Schedule) -> Result<Player, TableauError> {
    let t = build_tableau_with(phi, schedule)?;
    let g = tableau_game(&t);
    Ok(solve_tableau_game(&g)?.0)
}

/// A pointed model falsifying every formula of the root sequent, read off a
/// winning strategy for Refuter (`Forall`).
///
/// Worlds are the initial position and the positions entered by a modal
/// move. From each world the strategy determines a unique modal position;
/// its successors are the worlds it points to and its letters are false.
pub fn extract_countermodel(g: &TableauGame, sol: &Solution) -> Result<(KripkeModel, usize), TableauError> {
    let a = &g.arena;
    if sol.winner[a.initial] != Player::Forall {
        return Err(TableauError::NotWinning("Refuter does not win the initial position".into()));
    }
    let strat = sol.strategy(Player::Forall);
    let modal_of = |start: usize| -> Result<usize, TableauError> {
        let mut p = start;
        for _ in 0..=a.len() {
            let node = g.positions[p].0;
            match g.tableau.nodes[node].rule {
                TRule::M => return Ok(p),
                TRule::Ax1 | TRule::Ax2 => return Err(TableauError::NotWinning(format!("play reaches axiom position {p}"))),
                TRule::And => {
                    p = *strat.get(&p).ok_or_else(|| TableauError::NotWinning(format!("no move at position {p}")))?
                }
                _ => p = a.moves[p][0],
            }
        }
        Err(TableauError::NotWinning("play avoids the modal rule forever".into()))
    };
    let mut worlds: BTreeMap<usize, usize> = BTreeMap::new();
    let mut order = vec![a.initial];
    worlds.insert(a.initial, 0);
    let mut edges = Vec::new();
    let mut falsified: Vec<usize> = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let m = modal_of(order[i])?;
        falsified.push(m);
        for &q in &a.moves[m] {
            let w = *worlds.entry(q).or_insert_with(|| {
                order.push(q);
                order.len() - 1
            });
            edges.push((i, w));
        }
        i += 1;
    }
    let mut model = KripkeModel::new(order.len());
    for (x, y) in edges {
        model.add_edge(x, y);
    }
    let mut letters = std::collections::BTreeSet::new();
    for f in &g.tableau.universe {
        if let Kind::Prop(p) | Kind::NegProp(p) = f.kind() {
            letters.insert(p.to_string());
        }
    }
    for (w, &m) in falsified.iter().enumerate() {
        let seq = &g.tableau.nodes[g.positions[m].0].seq;
        for p in &letters {
            let has = seq.ones().any(|i| matches!(g.tableau.universe[i].kind(), Kind::Prop(q) if &**q == p.as_str()));
            if !has {
                model.set_true(p, w);
            }
        }
    }
    Ok((model, 0))
}
