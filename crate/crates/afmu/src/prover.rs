//! The decision procedure: cyclic proofs from Prover strategies and
//! countermodels from Refuter strategies.

use std::collections::BTreeMap;

use fixedbitset::FixedBitSet;
use thiserror::Error;

use crate::formula::{Formula, Kind};
use crate::games::{Player, Solution};
use crate::proofs::{apply_rule, check_proof, prune, thinning, Ann, AnnFormula, Proof, ProofNode, Rule, Sequent};
use crate::semantics::KripkeModel;
use crate::tableaux::{build_tableau, build_tableau_with, extract_countermodel, solve_tableau_game, tableau_game, Schedule, TRule, TableauError, TableauGame};

/// Upper bound on the size of an extracted proof.
pub const MAX_PROOF_NODES: usize = 4_000_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ProverError {
    #[error(transparent)]
    Tableau(#[from] TableauError),
    #[error("internal error: {0}")]
    Internal(String),
}

#[derive(Clone, Debug)]
pub enum Verdict {
    Valid(Proof),
    Invalid { model: KripkeModel, world: usize },
}

impl Verdict {
    pub fn is_valid(&self) -> bool {
        matches!(self, Verdict::Valid(_))
    }
}

/// Decides a sequent of guarded alternation-free formulas.
pub fn decide(phi: &[Formula]) -> Result<Verdict, ProverError> {
    decide_with(phi, Schedule::Least)
}

/// Decides with a chosen expansion order; the order only affects the proof.
pub fn decide_with(phi: &[Formula], schedule: Schedule) -> Result<Verdict, ProverError> {
    let t = build_tableau_with(phi, schedule)?;
    let g = tableau_game(&t);
    let (winner, sol) = solve_tableau_game(&g)?;
    match winner {
        Player::Exists => Ok(Verdict::Valid(prune(&strategy_to_cyclic_proof(&g, &sol)?))),
        Player::Forall => {
            let (model, world) = extract_countermodel(&g, &sol)?;
            Ok(Verdict::Invalid { model, world })
        }
    }
}

/// Is the sequent valid? Skips proof extraction.
pub fn is_valid(phi: &[Formula]) -> Result<bool, ProverError> {
    let t = build_tableau(phi)?;
    let g = tableau_game(&t);
    Ok(solve_tableau_game(&g)?.0 == Player::Exists)
}

struct BNode {
    seq: Sequent,
    rule: Rule,
    children: Vec<usize>,
    /// For discharged leaves: the companion.
    companion: Option<usize>,
    token: Option<String>,
}

/// How the extracted proof treats the rule of a strategy position.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Use {
    Apply,
    /// The residual is never used: the position is passed without a rule.
    Skip,
    /// Only this premise of a conjunction is followed.
    Branch(usize),
}

/// The annotated sequent of a position, put in focus at refocusing positions.
fn effective(g: &TableauGame, pos: usize) -> Sequent {
    let (node, focus) = &g.positions[pos];
    let t = &g.tableau;
    let reset = focus.is_clear();
    t.nodes[*node]
        .seq
        .ones()
        .map(|i| (t.universe[i].clone(), if reset || focus.contains(i) { Ann::F } else { Ann::U }))
        .collect()
}

/// Entry sequent of a position given its needed formulas: unfocused at
/// refocusing positions.
fn entry_of(g: &TableauGame, need: &Sequent, pos: usize) -> Sequent {
    if g.is_reset(pos) {
        need.iter().map(|(f, _)| (f.clone(), Ann::U)).collect()
    } else {
        need.clone()
    }
}

fn axiom_pair(seq: &Sequent) -> Option<Sequent> {
    seq.iter().find_map(|(f, a)| match f.kind() {
        Kind::Prop(p) => {
            let neg = Formula::neg_prop(p);
            seq.ann_of(&neg).map(|b| [(f.clone(), *a), (neg, b)].into_iter().collect())
        }
        _ => None,
    })
}

/// For every position reachable under `strat`, the annotated formulas that
/// the proof needs there, as a least fixpoint over the strategy graph. Every
/// position that has a focused formula keeps one.
fn relevance(g: &TableauGame, strat: &BTreeMap<usize, usize>) -> Option<(Vec<Sequent>, Vec<Use>)> {
    let a = &g.arena;
    let t = &g.tableau;
    let n = a.len();
    let mut reach = vec![false; n];
    let mut order = Vec::new();
    let mut stack = vec![a.initial];
    while let Some(p) = stack.pop() {
        if reach[p] {
            continue;
        }
        reach[p] = true;
        order.push(p);
        if t.nodes[g.positions[p].0].rule == TRule::M {
            stack.push(*strat.get(&p)?);
        } else {
            stack.extend(a.moves[p].iter().copied());
        }
    }
    let eff: Vec<Sequent> = (0..n).map(|p| if reach[p] { effective(g, p) } else { Sequent::new() }).collect();
    let mut need = vec![Sequent::new(); n];
    let mut usage: Vec<Option<Use>> = vec![None; n];
    for _ in 0..1024 {
        let mut changed = false;
        for &p in order.iter().rev() {
            let node = &t.nodes[g.positions[p].0];
            let moves = &a.moves[p];
            let out = |k: usize| entry_of(g, &need[moves[k]], moves[k]);
            let (u, mut next) = match node.rule {
                TRule::Ax1 => (Use::Apply, axiom_pair(&eff[p])?),
                TRule::Ax2 => {
                    let top = Formula::top();
                    let ann = eff[p].ann_of(&top)?;
                    (Use::Apply, [(top, ann)].into_iter().collect())
                }
                TRule::M => {
                    let q = *strat.get(&p)?;
                    let k = moves.iter().position(|&m| m == q)?;
                    let b = t.universe[node.boxes[k]].clone();
                    let ann = eff[p].ann_of(&b)?;
                    let target = out(k);
                    let mut s: Sequent = [(b, ann)].into_iter().collect();
                    for (f, c) in eff[p].iter() {
                        if let Kind::Dia(body) = f.kind() {
                            if target.contains(body, *c) {
                                s.insert(f.clone(), *c);
                            }
                        }
                    }
                    (Use::Apply, s)
                }
                trule => {
                    let rule = match trule {
                        TRule::Or => Rule::Or,
                        TRule::And => Rule::And,
                        TRule::Mu => Rule::Mu,
                        _ => Rule::Nu,
                    };
                    let f = t.universe[node.principal?].clone();
                    let pi = (f.clone(), eff[p].ann_of(&f)?);
                    let single: Sequent = [pi.clone()].into_iter().collect();
                    let residual = apply_rule(rule, &single, Some(&pi)).ok()?;
                    let outs: Vec<Sequent> = (0..moves.len()).map(out).collect();
                    let used = |k: usize| outs[k].iter().any(|e| e == &pi || residual[k].iter().any(|r| r == e));
                    let unused: Vec<usize> = (0..moves.len()).filter(|&k| !used(k)).collect();
                    let choice = match (rule, usage[p]) {
                        (Rule::And, Some(Use::Branch(b))) if unused.contains(&b) => Use::Branch(b),
                        (Rule::And, None) if !unused.is_empty() => Use::Branch(unused[0]),
                        (Rule::And, _) => Use::Apply,
                        (_, Some(Use::Apply)) => Use::Apply,
                        _ if unused.is_empty() => Use::Apply,
                        _ => Use::Skip,
                    };
                    match choice {
                        Use::Branch(b) => (choice, outs[b].clone()),
                        Use::Skip => (choice, outs[0].clone()),
                        Use::Apply => {
                            let mut s: Sequent = [pi].into_iter().collect();
                            for (k, o) in outs.iter().enumerate() {
                                for e in o.iter().filter(|e| !residual[k].iter().any(|r| r == *e)) {
                                    s.insert(e.0.clone(), e.1);
                                }
                            }
                            (choice, s)
                        }
                    }
                }
            };
            for e in need[p].iter() {
                next.insert(e.0.clone(), e.1);
            }
            if !next.has_focus() {
                if let Some(e) = eff[p].iter().find(|e| e.1 == Ann::F) {
                    next.insert(e.0.clone(), Ann::F);
                }
            }
            if !next.is_subset(&eff[p]) {
                return None;
            }
            if next != need[p] || usage[p] != Some(u) {
                need[p] = next;
                usage[p] = Some(u);
                changed = true;
            }
        }
        if !changed {
            let usage = usage.into_iter().map(|u| u.unwrap_or(Use::Apply)).collect();
            return Some((need, usage));
        }
    }
    None
}

struct Builder<'a> {
    g: &'a TableauGame,
    strat: &'a BTreeMap<usize, usize>,
    /// Annotated formulas kept at each position.
    need: Vec<Sequent>,
    usage: Vec<Use>,
    nodes: Vec<BNode>,
    branch: Vec<usize>,
    focus_rules: Vec<u32>,
    box_rules: Vec<u32>,
    unfocused: Vec<u32>,
    /// Branch depths and sequents of the potential companions on the branch.
    anchors: Vec<(usize, Sequent)>,
    next_token: usize,
}

impl<'a> Builder<'a> {
    fn entry(&self, pos: usize) -> Sequent {
        entry_of(self.g, &self.need[pos], pos)
    }

    /// Appends a node below the current branch end.
    fn push(&mut self, seq: Sequent) -> Result<usize, ProverError> {
        if self.nodes.len() >= MAX_PROOF_NODES {
            return Err(ProverError::Internal("proof size limit exceeded".into()));
        }
        let id = self.nodes.len();
        let k = self.branch.len();
        if k == 0 {
            self.focus_rules.push(0);
            self.box_rules.push(0);
            self.unfocused.push(0);
        } else {
            let prev = &self.nodes[self.branch[k - 1]];
            let f = self.focus_rules[k - 1] + u32::from(matches!(prev.rule, Rule::F | Rule::U));
            let b = self.box_rules[k - 1] + u32::from(prev.rule == Rule::Box);
            let u = self.unfocused[k - 1] + u32::from(!prev.seq.has_focus());
            self.focus_rules.push(f);
            self.box_rules.push(b);
            self.unfocused.push(u);
            self.nodes[self.branch[k - 1]].children.push(id);
        }
        self.nodes.push(BNode { seq, rule: Rule::Open, children: Vec::new(), companion: None, token: None });
        self.branch.push(id);
        Ok(id)
    }

    fn truncate(&mut self, len: usize) {
        self.branch.truncate(len);
        self.focus_rules.truncate(len);
        self.box_rules.truncate(len);
        self.unfocused.truncate(len);
    }

    /// Applies `rule` at the branch end and pushes its single premise.
    fn step(&mut self, rule: Rule, premise: Sequent) -> Result<Sequent, ProverError> {
        let cur = *self.branch.last().expect("non-empty branch");
        self.nodes[cur].rule = rule;
        self.push(premise.clone())?;
        Ok(premise)
    }

    fn weaken_to(&mut self, from: Sequent, keep: &Sequent) -> Result<Sequent, ProverError> {
        let mut cur = from;
        let drop: Vec<AnnFormula> = cur.iter().filter(|e| !keep.iter().any(|k| k == *e)).cloned().collect();
        for e in drop {
            let next = cur.without(&e);
            cur = self.step(Rule::W, next)?;
        }
        Ok(cur)
    }

    fn thin_out(&mut self, s: Sequent) -> Result<Sequent, ProverError> {
        let t = thinning(&s);
        self.weaken_to(s, &t)
    }

    /// The deepest admissible companion whose sequent is contained in `seq`.
    fn companion_for(&self, seq: &Sequent) -> Option<(usize, Sequent)> {
        if !seq.has_focus() {
            return None;
        }
        let k = self.branch.len() - 1;
        self.anchors.iter().rev().find(|(d, s)| {
            self.focus_rules[k] == self.focus_rules[*d]
                && self.box_rules[k] > self.box_rules[*d]
                && self.unfocused[k] == self.unfocused[*d]
                && s.has_focus()
                && s.is_subset(seq)
        }).cloned()
    }

    /// Builds the subproof for arena position `pos`, starting from a fresh
    /// node at the end of the branch holding the entry sequent of `pos`.
    fn visit(&mut self, pos: usize) -> Result<(), ProverError> {
        let base = self.branch.len();
        self.push(self.entry(pos))?;
        let res = self.continue_at(pos);
        self.truncate(base);
        res
    }

    /// Continues at `pos` from the node at the branch end.
    fn continue_at(&mut self, pos: usize) -> Result<(), ProverError> {
        let cur = *self.branch.last().expect("non-empty branch");
        let mut seq = self.nodes[cur].seq.clone();
        if !seq.has_focus() {
            let flips: Vec<Formula> = seq.iter().map(|(f, _)| f.clone()).collect();
            for f in flips {
                let next = seq.without(&(f.clone(), Ann::U)).with(f, Ann::F);
                seq = self.step(Rule::F, next)?;
            }
        }
        if let Some((d, target)) = self.companion_for(&seq) {
            let comp = self.branch[d];
            if self.nodes[comp].token.is_none() {
                self.nodes[comp].token = Some(format!("x{}", self.next_token));
                self.next_token += 1;
            }
            self.weaken_to(seq, &target)?;
            let leaf = *self.branch.last().expect("non-empty");
            self.nodes[leaf].rule = Rule::Discharged;
            self.nodes[leaf].companion = Some(comp);
            return Ok(());
        }
        let anchor_depth = self.branch.len() - 1;
        self.anchors.push((anchor_depth, seq.clone()));
        let res = self.apply(pos, seq);
        self.anchors.pop();
        res
    }

    fn apply(&mut self, pos: usize, seq: Sequent) -> Result<(), ProverError> {
        let g = self.g;
        let t = &g.tableau;
        let node = &t.nodes[g.positions[pos].0];
        let moves = &g.arena.moves[pos];
        let pass = match self.usage[pos] {
            Use::Skip => Some(moves[0]),
            Use::Branch(b) => Some(moves[b]),
            Use::Apply => None,
        };
        if let Some(q) = pass {
            let target = self.entry(q);
            if !target.is_subset(&seq) {
                return Err(ProverError::Internal(format!("position {q} needs formulas missing at {pos}")));
            }
            self.weaken_to(seq, &target)?;
            return self.continue_at(q);
        }
        match node.rule {
            TRule::Ax1 => {
                let keep = axiom_pair(&seq).ok_or_else(|| ProverError::Internal("axiom without complementary literals".into()))?;
                self.weaken_to(seq, &keep)?;
                let cur = *self.branch.last().expect("non-empty");
                self.nodes[cur].rule = Rule::Ax1;
                Ok(())
            }
            TRule::Ax2 => {
                let top = Formula::top();
                let keep: Sequent = [(top.clone(), seq.ann_of(&top).expect("true present"))].into_iter().collect();
                self.weaken_to(seq, &keep)?;
                let cur = *self.branch.last().expect("non-empty");
                self.nodes[cur].rule = Rule::Ax2;
                Ok(())
            }
            TRule::M => {
                let Some(&q) = self.strat.get(&pos) else {
                    return Err(ProverError::Internal(format!("no Prover move at position {pos}")));
                };
                let k = moves.iter().position(|&m| m == q).expect("legal move");
                let b = t.universe[node.boxes[k]].clone();
                let pi = (b.clone(), seq.ann_of(&b).expect("box present"));
                let keep: Sequent =
                    seq.iter().filter(|(f, _)| f == &b || matches!(f.kind(), Kind::Dia(_))).cloned().collect();
                let cur = self.weaken_to(seq, &keep)?;
                let prem = apply_rule(Rule::Box, &cur, Some(&pi)).map_err(|e| ProverError::Internal(e.to_string()))?;
                let prem = self.step(Rule::Box, prem[0].clone())?;
                self.descend(prem, q)
            }
            trule => {
                let rule = match trule {
                    TRule::Or => Rule::Or,
                    TRule::And => Rule::And,
                    TRule::Mu => Rule::Mu,
                    _ => Rule::Nu,
                };
                let f = t.universe[node.principal.expect("principal")].clone();
                let pi = (f.clone(), seq.ann_of(&f).expect("principal present"));
                let prems = apply_rule(rule, &seq, Some(&pi)).map_err(|e| ProverError::Internal(e.to_string()))?;
                let at = *self.branch.last().expect("non-empty");
                self.nodes[at].rule = rule;
                let depth = self.branch.len();
                for (k, p) in prems.into_iter().enumerate() {
                    self.truncate(depth);
                    self.push(p.clone())?;
                    self.descend(p, moves[k])?;
                }
                Ok(())
            }
        }
    }

    /// Thins the premise at the branch end down to the entry sequent of `q`,
    /// then continues there.
    fn descend(&mut self, premise: Sequent, q: usize) -> Result<(), ProverError> {
        let thin = self.thin_out(premise)?;
        let expected = self.entry(q);
        if !expected.is_subset(&thin) {
            return Err(ProverError::Internal(format!("premise {thin} does not cover position {q}")));
        }
        self.weaken_to(thin, &expected)?;
        // The node holding the entry sequent is re-created by `visit`.
        let last = self.branch.pop().expect("non-empty");
        self.focus_rules.pop();
        self.box_rules.pop();
        self.unfocused.pop();
        let parent = *self.branch.last().expect("premise has a parent");
        self.nodes[parent].children.retain(|&c| c != last);
        self.nodes.truncate(last);
        self.visit(q)
    }

    fn into_proof(self) -> Proof {
        let mut proof = Proof::default();
        let mut out_id: Vec<usize> = vec![usize::MAX; self.nodes.len()];
        let mut stack: Vec<(usize, Option<usize>)> = vec![(0, None)];
        while let Some((b, parent)) = stack.pop() {
            let n = &self.nodes[b];
            let mut parent = parent;
            if let Some(tok) = &n.token {
                let d = proof.push(ProofNode { seq: n.seq.clone(), rule: Rule::D, parent, companion: None, token: Some(tok.clone()) });
                parent = Some(d);
            }
            let token = n.companion.and_then(|c| self.nodes[c].token.clone());
            let id = proof.push(ProofNode { seq: n.seq.clone(), rule: n.rule, parent, companion: None, token });
            out_id[b] = id;
            for &c in n.children.iter().rev() {
                stack.push((c, Some(id)));
            }
        }
        proof.link_companions();
        proof
    }
}

/// Unrolls Prover's positional strategy into a finite cyclic proof of the
/// root sequent with every formula in focus.
pub fn strategy_to_cyclic_proof(g: &TableauGame, sol: &Solution) -> Result<Proof, ProverError> {
    if sol.winner[g.arena.initial] != Player::Exists {
        return Err(ProverError::Internal("Prover does not win the initial position".into()));
    }
    let strat = sol.strategy(Player::Exists);
    if let Some((need, usage)) = relevance(g, strat) {
        if let Ok(p) = build_proof(g, strat, need, usage) {
            if check_proof(&p, false).is_ok() {
                return Ok(p);
            }
        }
    }
    let n = g.arena.len();
    let full = (0..n).map(|p| effective(g, p)).collect();
    build_proof(g, strat, full, vec![Use::Apply; n])
}

fn build_proof(g: &TableauGame, strat: &BTreeMap<usize, usize>, need: Vec<Sequent>, usage: Vec<Use>) -> Result<Proof, ProverError> {
    std::thread::scope(|s| {
        std::thread::Builder::new()
            .stack_size(1 << 30)
            .spawn_scoped(s, || {
                let mut b = Builder {
                    g,
                    strat,
                    need,
                    usage,
                    nodes: Vec::new(),
                    branch: Vec::new(),
                    focus_rules: Vec::new(),
                    box_rules: Vec::new(),
                    unfocused: Vec::new(),
                    anchors: Vec::new(),
                    next_token: 0,
                };
                let init = g.arena.initial;
                let root = entry_of(g, &effective(g, init), init);
                b.push(root.clone())?;
                let entry = b.entry(init);
                b.weaken_to(root, &entry)?;
                b.continue_at(init)?;
                Ok(b.into_proof())
            })
            .expect("spawn proof builder")
            .join()
            .expect("proof builder panicked")
    })
}

/// The plain focus set of a position, for diagnostics.
pub fn focus_formulas(g: &TableauGame, pos: usize) -> Vec<Formula> {
    let focus: &FixedBitSet = &g.positions[pos].1;
    focus.ones().map(|i| g.tableau.universe[i].clone()).collect()
}
