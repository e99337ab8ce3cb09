//! Craig interpolants from partitioned cyclic proofs.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use thiserror::Error;

use crate::formula::{closure_set, fresh_name, in_theta, is_alternation_free, Fix, Formula, Kind, Name};
use crate::proofs::{apply_rule, check_proof, idle_discharges, Ann, AnnFormula, Proof, ProofNode, Rule, Sequent, Violation};
use crate::prover::{decide_with, is_valid, ProverError, Verdict, MAX_PROOF_NODES};
use crate::semantics::KripkeModel;
use crate::tableaux::Schedule;

#[derive(Debug, Error, Clone)]
pub enum InterpolationError {
    #[error("the implication is not valid")]
    Invalid { model: KripkeModel, world: usize },
    #[error(transparent)]
    Prover(#[from] ProverError),
    #[error("the proof is not valid: {0:?}")]
    Proof(Vec<Violation>),
    #[error("discharge node {0} discharges no leaf")]
    IdleDischarge(usize),
    #[error("the left part is not a subset of the root sequent")]
    NotPartition,
    #[error("no principal formula at node {0}")]
    Principal(usize),
    #[error("connectedness class of node {0} has neither side uniformly in focus")]
    Colouring(usize),
    #[error("companion node {0} is transparent")]
    TransparentCompanion(usize),
    #[error("invariant violated at node {node}: {msg}")]
    Invariant { node: usize, msg: String },
    #[error("balanced proof exceeds the size limit")]
    TooLarge,
    #[error("contract check failed: {0}")]
    Contract(String),
}

/// Left and right parts of every node sequent.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NodewisePartition {
    pub left: Vec<Sequent>,
    pub right: Vec<Sequent>,
}

impl NodewisePartition {
    /// Discharged leaves are split like their companions.
    pub fn is_balanced(&self, proof: &Proof) -> bool {
        proof
            .nodes
            .iter()
            .enumerate()
            .all(|(i, n)| n.companion.is_none_or(|c| self.left[i] == self.left[c]))
    }
}

/// The premises of `rule` on the principal alone: the formulas it introduces.
fn residuals(rule: Rule, principal: Option<&AnnFormula>) -> Vec<Sequent> {
    match principal {
        Some(pi) => {
            let alone: Sequent = [pi.clone()].into_iter().collect();
            apply_rule(rule, &alone, Some(pi)).unwrap_or_default()
        }
        None => Vec::new(),
    }
}

/// The split of each premise of node `i` given the split `left` of its conclusion.
fn premise_splits(proof: &Proof, i: usize, left: &Sequent, children: &[Vec<usize>]) -> Result<Vec<Sequent>, InterpolationError> {
    let node = &proof.nodes[i];
    let kids = &children[i];
    if kids.is_empty() {
        return Ok(Vec::new());
    }
    if node.rule == Rule::D {
        return Ok(vec![left.clone()]);
    }
    let pi = proof.principal(i, children).ok_or(InterpolationError::Principal(i))?;
    let res = residuals(node.rule, Some(&pi));
    let on_left = left.iter().any(|e| *e == pi);
    Ok(kids
        .iter()
        .enumerate()
        .map(|(k, &c)| {
            let fresh = res.get(k).cloned().unwrap_or_default();
            proof.nodes[c]
                .seq
                .iter()
                .filter(|e| {
                    if fresh.iter().any(|r| r == *e) {
                        return on_left;
                    }
                    let origin = if node.rule == Rule::Box { (Formula::dia(e.0.clone()), e.1) } else { (*e).clone() };
                    left.iter().any(|l| *l == origin)
                })
                .cloned()
                .collect()
        })
        .collect())
}

/// The coherent nodewise partition induced by splitting the root as
/// `root_left | root \ root_left`.
pub fn induce_partition(proof: &Proof, root_left: &Sequent) -> Result<NodewisePartition, InterpolationError> {
    let root = proof.root_sequent().ok_or(InterpolationError::NotPartition)?;
    if !root_left.is_subset(root) {
        return Err(InterpolationError::NotPartition);
    }
    let children = proof.children_table();
    let mut left = vec![Sequent::new(); proof.len()];
    left[0] = root_left.clone();
    for i in 0..proof.len() {
        let splits = premise_splits(proof, i, &left[i], &children)?;
        for (k, s) in splits.into_iter().enumerate() {
            left[children[i][k]] = s;
        }
    }
    let right = proof.nodes.iter().zip(&left).map(|(n, l)| n.seq.iter().filter(|e| !l.iter().any(|x| x == *e)).cloned().collect()).collect();
    Ok(NodewisePartition { left, right })
}

struct Emitted {
    seq: Sequent,
    left: Sequent,
    rule: Rule,
    children: Vec<usize>,
    companion: Option<usize>,
    token: Option<String>,
}

struct Balancer<'a> {
    proof: &'a Proof,
    children: Vec<Vec<usize>>,
    out: Vec<Emitted>,
    branch: Vec<usize>,
    focus_rules: Vec<u32>,
    box_rules: Vec<u32>,
    unfocused: Vec<u32>,
    anchors: HashMap<(Sequent, Sequent), Vec<usize>>,
    next_token: usize,
}

impl Balancer<'_> {
    fn push(&mut self, seq: Sequent, left: Sequent) -> Result<usize, InterpolationError> {
        if self.out.len() >= MAX_PROOF_NODES {
            return Err(InterpolationError::TooLarge);
        }
        let id = self.out.len();
        let k = self.branch.len();
        if k == 0 {
            self.focus_rules.push(0);
            self.box_rules.push(0);
            self.unfocused.push(0);
        } else {
            let prev = &self.out[self.branch[k - 1]];
            self.focus_rules.push(self.focus_rules[k - 1] + u32::from(matches!(prev.rule, Rule::F | Rule::U)));
            self.box_rules.push(self.box_rules[k - 1] + u32::from(prev.rule == Rule::Box));
            self.unfocused.push(self.unfocused[k - 1] + u32::from(!prev.seq.has_focus()));
            self.out[self.branch[k - 1]].children.push(id);
        }
        self.out.push(Emitted { seq, left, rule: Rule::Open, children: Vec::new(), companion: None, token: None });
        self.branch.push(id);
        Ok(id)
    }

    fn truncate(&mut self, len: usize) {
        self.branch.truncate(len);
        self.focus_rules.truncate(len);
        self.box_rules.truncate(len);
        self.unfocused.truncate(len);
    }

    fn visit(&mut self, mut o: usize, left: Sequent) -> Result<(), InterpolationError> {
        loop {
            match self.proof.nodes[o].rule {
                Rule::D => o = self.children[o][0],
                Rule::Discharged => o = self.proof.nodes[o].companion.expect("checked proof"),
                _ => break,
            }
        }
        let base = self.branch.len();
        let seq = self.proof.nodes[o].seq.clone();
        let id = self.push(seq.clone(), left.clone())?;
        let key = (seq, left);
        let k = base;
        let comp = if key.0.has_focus() {
            self.anchors.get(&key).and_then(|ds| {
                ds.iter().rev().copied().find(|&d| {
                    self.focus_rules[k] == self.focus_rules[d]
                        && self.box_rules[k] > self.box_rules[d]
                        && self.unfocused[k] == self.unfocused[d]
                })
            })
        } else {
            None
        };
        if let Some(d) = comp {
            let c = self.branch[d];
            if self.out[c].token.is_none() {
                self.out[c].token = Some(format!("x{}", self.next_token));
                self.next_token += 1;
            }
            self.out[id].rule = Rule::Discharged;
            self.out[id].companion = Some(c);
            self.truncate(base);
            return Ok(());
        }
        self.anchors.entry(key.clone()).or_default().push(k);
        self.out[id].rule = self.proof.nodes[o].rule;
        let res = premise_splits(self.proof, o, &key.1, &self.children).and_then(|splits| {
            for (j, s) in splits.into_iter().enumerate() {
                self.truncate(base + 1);
                self.visit(self.children[o][j], s)?;
            }
            Ok(())
        });
        let list = self.anchors.get_mut(&key).expect("registered");
        list.pop();
        if list.is_empty() {
            self.anchors.remove(&key);
        }
        self.truncate(base);
        res
    }

    fn finish(self) -> (Proof, NodewisePartition) {
        let mut proof = Proof::default();
        let mut left = Vec::new();
        let mut stack: Vec<(usize, Option<usize>)> = vec![(0, None)];
        while let Some((b, parent)) = stack.pop() {
            let n = &self.out[b];
            let mut parent = parent;
            if let Some(tok) = &n.token {
                let d = proof.push(ProofNode { seq: n.seq.clone(), rule: Rule::D, parent, companion: None, token: Some(tok.clone()) });
                left.push(n.left.clone());
                parent = Some(d);
            }
            let token = n.companion.and_then(|c| self.out[c].token.clone());
            let id = proof.push(ProofNode { seq: n.seq.clone(), rule: n.rule, parent, companion: None, token });
            left.push(n.left.clone());
            for &c in n.children.iter().rev() {
                stack.push((c, Some(id)));
            }
        }
        proof.link_companions();
        let right = proof.nodes.iter().zip(&left).map(|(n, l)| n.seq.iter().filter(|e| !l.iter().any(|x| x == *e)).cloned().collect()).collect();
        (proof, NodewisePartition { left, right })
    }
}

/// A proof of the same root whose induced partition is balanced: the input is
/// unravelled with its partition and cut at the first admissible repeat of a
/// sequent together with its split.
pub fn balance(proof: &Proof, partition: &NodewisePartition) -> Result<(Proof, NodewisePartition), InterpolationError> {
    if partition.is_balanced(proof) {
        return Ok((proof.clone(), partition.clone()));
    }
    let root_left = partition.left[0].clone();
    std::thread::scope(|s| {
        std::thread::Builder::new()
            .stack_size(1 << 30)
            .spawn_scoped(s, || {
                let mut b = Balancer {
                    proof,
                    children: proof.children_table(),
                    out: Vec::new(),
                    branch: Vec::new(),
                    focus_rules: Vec::new(),
                    box_rules: Vec::new(),
                    unfocused: Vec::new(),
                    anchors: HashMap::new(),
                    next_token: 0,
                };
                b.visit(0, root_left)?;
                Ok(b.finish())
            })
            .expect("spawn balancer")
            .join()
            .expect("balancer panicked")
    })
}

/// Classes of the connectedness relation: `class[i]` is `None` for nodes on no
/// companion-to-leaf path.
pub fn connectedness_classes(proof: &Proof) -> Vec<Option<usize>> {
    let n = proof.len();
    let mut parent: Vec<usize> = (0..n).collect();
    let mut on_path = vec![false; n];
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for (l, node) in proof.nodes.iter().enumerate() {
        let Some(c) = node.companion else { continue };
        let mut u = l;
        on_path[l] = true;
        while u != c {
            let up = proof.nodes[u].parent.expect("companion is an ancestor");
            on_path[up] = true;
            let (a, b) = (find(&mut parent, u), find(&mut parent, up));
            parent[a] = b;
            u = up;
        }
    }
    let mut ids: BTreeMap<usize, usize> = BTreeMap::new();
    (0..n)
        .map(|i| {
            if !on_path[i] {
                return None;
            }
            let r = find(&mut parent, i);
            let next = ids.len();
            Some(*ids.entry(r).or_insert(next))
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Colour {
    Mu,
    Nu,
    Transparent,
}

impl Colour {
    pub fn fix(self) -> Option<Fix> {
        match self {
            Colour::Mu => Some(Fix::Mu),
            Colour::Nu => Some(Fix::Nu),
            Colour::Transparent => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FixpointColouring {
    pub colour: Vec<Colour>,
    pub class: Vec<Option<usize>>,
}

impl FixpointColouring {
    /// Number of nodes of colour `c`.
    pub fn count(&self, c: Colour) -> usize {
        self.colour.iter().filter(|&&x| x == c).count()
    }

    /// The colour of each connectedness class.
    pub fn class_colours(&self) -> Vec<Colour> {
        let mut out = vec![Colour::Transparent; self.class.iter().flatten().max().map_or(0, |m| m + 1)];
        for (c, &col) in self.class.iter().zip(&self.colour) {
            if let Some(c) = *c {
                out[c] = col;
            }
        }
        out
    }
}

/// Colours each class mu when all its left parts carry focus, nu when all its
/// right parts do.
pub fn fixpoint_colouring(proof: &Proof, partition: &NodewisePartition) -> Result<FixpointColouring, InterpolationError> {
    let class = connectedness_classes(proof);
    let classes = class.iter().flatten().max().map_or(0, |m| m + 1);
    let mut left_all = vec![true; classes];
    let mut right_all = vec![true; classes];
    let mut witness = vec![0; classes];
    for (i, c) in class.iter().enumerate() {
        if let Some(c) = *c {
            left_all[c] &= partition.left[i].has_focus();
            right_all[c] &= partition.right[i].has_focus();
            witness[c] = i;
        }
    }
    let mut colour_of = Vec::with_capacity(classes);
    for c in 0..classes {
        colour_of.push(if left_all[c] {
            Colour::Mu
        } else if right_all[c] {
            Colour::Nu
        } else {
            return Err(InterpolationError::Colouring(witness[c]));
        });
    }
    let colour = class.iter().map(|c| c.map_or(Colour::Transparent, |c| colour_of[c])).collect();
    Ok(FixpointColouring { colour, class })
}

/// Dualises everything except the variables in `fixed` and bound variables.
pub fn simple_negation(f: &Formula, fixed: &BTreeSet<Name>) -> Formula {
    match f.kind() {
        Kind::Prop(x) if fixed.contains(x) => f.clone(),
        Kind::Top | Kind::Bottom | Kind::Prop(_) | Kind::NegProp(_) => f.negation(),
        Kind::Or(a, b) => Formula::and(simple_negation(a, fixed), simple_negation(b, fixed)),
        Kind::And(a, b) => Formula::or(simple_negation(a, fixed), simple_negation(b, fixed)),
        Kind::Dia(a) => Formula::boxed(simple_negation(a, fixed)),
        Kind::Box(a) => Formula::dia(simple_negation(a, fixed)),
        Kind::Mu(x, a) | Kind::Nu(x, a) => {
            let mut inner = fixed.clone();
            inner.insert(x.clone());
            let eta = if matches!(f.kind(), Kind::Mu(..)) { Fix::Nu } else { Fix::Mu };
            Formula::fix(eta, x.clone(), simple_negation(a, &inner))
        }
    }
}

/// Removes unit, annihilator and repeated-operand redexes bottom-up, and
/// binders whose variable does not occur.
pub fn simplify(f: &Formula) -> Formula {
    match f.kind() {
        Kind::Or(..) => junction(f, true),
        Kind::And(..) => junction(f, false),
        Kind::Dia(a) => {
            let a = simplify(a);
            if matches!(a.kind(), Kind::Bottom) {
                a
            } else {
                Formula::dia(a)
            }
        }
        Kind::Box(a) => {
            let a = simplify(a);
            if matches!(a.kind(), Kind::Top) {
                a
            } else {
                Formula::boxed(a)
            }
        }
        Kind::Mu(x, a) | Kind::Nu(x, a) => {
            let eta = if matches!(f.kind(), Kind::Mu(..)) { Fix::Mu } else { Fix::Nu };
            let a = simplify(a);
            if a.free_vars().contains(x) {
                Formula::fix(eta, x.clone(), a)
            } else {
                a
            }
        }
        _ => f.clone(),
    }
}

/// Simplifies a maximal chain of disjunctions (or conjunctions), dropping
/// units and repeated operands.
fn junction(f: &Formula, or: bool) -> Formula {
    fn operands(f: &Formula, or: bool, out: &mut Vec<Formula>) {
        match f.kind() {
            Kind::Or(a, b) if or => {
                operands(a, or, out);
                operands(b, or, out);
            }
            Kind::And(a, b) if !or => {
                operands(a, or, out);
                operands(b, or, out);
            }
            _ => out.push(simplify(f)),
        }
    }
    let (unit, zero) = if or { (Formula::bottom(), Formula::top()) } else { (Formula::top(), Formula::bottom()) };
    let mut parts = Vec::new();
    operands(f, or, &mut parts);
    let mut kept: Vec<Formula> = Vec::new();
    for g in parts {
        if g == zero {
            return zero;
        }
        if g != unit && !kept.contains(&g) {
            kept.push(g);
        }
    }
    let join = if or { Formula::or } else { Formula::and };
    kept.into_iter().reduce(join).unwrap_or(unit)
}

/// The interpolant of a balanced, coloured proof. Discharge tokens become the
/// bound variables named in `names`.
pub fn interpolant(
    proof: &Proof,
    partition: &NodewisePartition,
    colouring: &FixpointColouring,
    names: &BTreeMap<String, Name>,
) -> Result<Formula, InterpolationError> {
    let children = proof.children_table();
    let n = proof.len();
    let var = |tok: &Option<String>, i: usize| -> Result<Name, InterpolationError> {
        tok.as_ref()
            .and_then(|t| names.get(t).cloned())
            .ok_or_else(|| InterpolationError::Invariant { node: i, msg: "unnamed discharge token".into() })
    };
    let mut bound: Vec<BTreeSet<Name>> = vec![BTreeSet::new(); n];
    for i in 1..n {
        let p = proof.nodes[i].parent.expect("non-root");
        let connected = colouring.class[i].is_some() && colouring.class[i] == colouring.class[p];
        if connected {
            let mut x = bound[p].clone();
            if proof.nodes[p].rule == Rule::D {
                x.insert(var(&proof.nodes[p].token, p)?);
            }
            bound[i] = x;
        }
    }
    let mut itp: Vec<Option<Formula>> = vec![None; n];
    for i in (0..n).rev() {
        let node = &proof.nodes[i];
        let left = &partition.left[i];
        let on_left = |e: &AnnFormula| left.iter().any(|l| l == e);
        let child = |k: usize, itp: &mut Vec<Option<Formula>>| itp[children[i][k]].take().expect("child interpolant");
        let f = match node.rule {
            Rule::Discharged => Formula::new(Kind::Prop(var(&node.token, i)?)),
            Rule::D => {
                let eta = colouring.colour[i].fix().ok_or(InterpolationError::TransparentCompanion(i))?;
                Formula::fix(eta, var(&node.token, i)?, child(0, &mut itp))
            }
            Rule::Ax1 => {
                let pos = node.seq.iter().find(|(f, _)| matches!(f.kind(), Kind::Prop(_))).expect("letter");
                let neg = node.seq.iter().find(|(f, _)| matches!(f.kind(), Kind::NegProp(_))).expect("negated letter");
                match (on_left(pos), on_left(neg)) {
                    (true, false) => pos.0.negation(),
                    (false, true) => pos.0.clone(),
                    (true, true) => Formula::bottom(),
                    (false, false) => Formula::top(),
                }
            }
            Rule::Ax2 => {
                if left.is_empty() {
                    Formula::top()
                } else {
                    Formula::bottom()
                }
            }
            Rule::And | Rule::Box => {
                let pi = proof.principal(i, &children).ok_or(InterpolationError::Principal(i))?;
                let l = on_left(&pi);
                if node.rule == Rule::Box {
                    let x = child(0, &mut itp);
                    if l {
                        Formula::dia(x)
                    } else {
                        Formula::boxed(x)
                    }
                } else {
                    let (a, b) = (child(0, &mut itp), child(1, &mut itp));
                    if l {
                        Formula::or(a, b)
                    } else {
                        Formula::and(a, b)
                    }
                }
            }
            Rule::Open => return Err(InterpolationError::Invariant { node: i, msg: "open leaf".into() }),
            _ => child(0, &mut itp),
        };
        let fv = f.free_vars();
        let lv: BTreeSet<Name> = left.iter().flat_map(|(g, _)| g.free_vars()).collect();
        let rv: BTreeSet<Name> = partition.right[i].iter().flat_map(|(g, _)| g.free_vars()).collect();
        if let Some(v) = fv.iter().find(|v| !(lv.contains(*v) && rv.contains(*v)) && !bound[i].contains(*v)) {
            return Err(InterpolationError::Invariant { node: i, msg: format!("{v} is not a common or bound variable") });
        }
        if let Some(eta) = colouring.colour[i].fix() {
            if !in_theta(&f, eta, &bound[i]) {
                return Err(InterpolationError::Invariant { node: i, msg: format!("{f} leaves the {eta:?}-fragment") });
            }
        }
        itp[i] = Some(f);
    }
    Ok(itp[0].take().expect("root interpolant"))
}

/// Fresh bound-variable names for the tokens of a proof, avoiding `taken`.
pub fn token_names(proof: &Proof, taken: &BTreeSet<Name>) -> BTreeMap<String, Name> {
    let mut used: HashSet<Name> = taken.iter().cloned().collect();
    let mut out = BTreeMap::new();
    for tok in crate::proofs::tokens(proof) {
        let name = fresh_name("x", &used);
        used.insert(name.clone());
        out.insert(tok, name);
    }
    out
}

/// Everything computed along the way to an interpolant.
#[derive(Clone, Debug)]
pub struct Interpolation {
    pub raw: Formula,
    pub simplified: Formula,
    pub proof_nodes: usize,
    pub balanced_nodes: usize,
    pub colouring: FixpointColouring,
}

/// Interpolant of a given proof for the split `root_left | rest` of its root.
pub fn interpolate_proof(proof: &Proof, root_left: &Sequent) -> Result<Interpolation, InterpolationError> {
    check_proof(proof, false).map_err(InterpolationError::Proof)?;
    if let Some(&i) = idle_discharges(proof).first() {
        return Err(InterpolationError::IdleDischarge(i));
    }
    let partition = induce_partition(proof, root_left)?;
    let (balanced, partition) = balance(proof, &partition)?;
    let colouring = fixpoint_colouring(&balanced, &partition)?;
    let taken: BTreeSet<Name> = balanced.nodes[0].seq.iter().flat_map(|(f, _)| f.names()).collect();
    let names = token_names(&balanced, &taken);
    let raw = interpolant(&balanced, &partition, &colouring, &names)?;
    Ok(Interpolation { simplified: simplify(&raw), raw, proof_nodes: proof.len(), balanced_nodes: balanced.len(), colouring })
}

/// A formula implied by `phi` that implies `psi`, over their common
/// vocabulary. The contract is verified before returning. Formulas only on
/// the right are expanded first, so shared formulas end up on the left.
pub fn interpolate(phi: &Formula, psi: &Formula) -> Result<Interpolation, InterpolationError> {
    let left = phi.negation();
    let prefer = closure_set([psi]).difference(&closure_set([&left])).cloned().collect();
    let proof = match decide_with(&[left.clone(), psi.clone()], Schedule::Prefer(prefer))? {
        Verdict::Valid(p) => p,
        Verdict::Invalid { model, world } => return Err(InterpolationError::Invalid { model, world }),
    };
    let root_left: Sequent = [(left, Ann::F)].into_iter().collect();
    let out = interpolate_proof(&proof, &root_left)?;
    verify_interpolant(phi, psi, &out.raw)?;
    Ok(out)
}

/// Outcome of the interpolation contract checks.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Verification {
    /// The interpolant only uses variables common to both sides.
    pub vocabulary: bool,
    pub alternation_free: bool,
    /// The premise implies the interpolant.
    pub premise: bool,
    /// The interpolant implies the conclusion.
    pub conclusion: bool,
}

impl Verification {
    pub fn holds(&self) -> bool {
        self.vocabulary && self.alternation_free && self.premise && self.conclusion
    }
}

/// Runs every contract check on `theta` for the implication `phi -> psi`.
pub fn verification(phi: &Formula, psi: &Formula, theta: &Formula) -> Result<Verification, ProverError> {
    let common: BTreeSet<Name> = phi.free_vars().intersection(&psi.free_vars()).cloned().collect();
    Ok(Verification {
        vocabulary: theta.free_vars().is_subset(&common),
        alternation_free: is_alternation_free(theta),
        premise: is_valid(&[phi.negation(), theta.clone()])?,
        conclusion: is_valid(&[theta.negation(), psi.clone()])?,
    })
}

/// Checks vocabulary, alternation-freeness and both implications.
pub fn verify_interpolant(phi: &Formula, psi: &Formula, theta: &Formula) -> Result<(), InterpolationError> {
    let v = verification(phi, psi, theta)?;
    let failed = [
        (v.vocabulary, "uses variables outside the common vocabulary"),
        (v.alternation_free, "is not alternation-free"),
        (v.premise, "is not implied by the premise"),
        (v.conclusion, "does not imply the conclusion"),
    ];
    match failed.iter().find(|(ok, _)| !ok) {
        Some((_, why)) => Err(InterpolationError::Contract(format!("{theta} {why}"))),
        None => Ok(()),
    }
}
