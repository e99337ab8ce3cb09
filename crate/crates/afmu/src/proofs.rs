//! Annotated sequents, the focus rules and finite cyclic proofs.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::formula::{closure, parse_exact, Formula, Kind, ParseError};
use crate::games::sccs;

/// Focus annotation, ordered `U < F`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Ann {
    U,
    F,
}

impl Ann {
    pub fn flag(self) -> &'static str {
        match self {
            Ann::U => "u",
            Ann::F => "f",
        }
    }

    pub fn from_flag(s: &str) -> Option<Ann> {
        match s {
            "u" => Some(Ann::U),
            "f" => Some(Ann::F),
            _ => None,
        }
    }
}

pub type AnnFormula = (Formula, Ann);

/// A finite set of annotated formulas, read disjunctively.
#[derive(Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Sequent(BTreeSet<AnnFormula>);

impl Sequent {
    pub fn new() -> Sequent {
        Sequent::default()
    }

    /// Every formula in focus.
    pub fn focused<'a>(fs: impl IntoIterator<Item = &'a Formula>) -> Sequent {
        fs.into_iter().map(|f| (f.clone(), Ann::F)).collect()
    }

    /// Every formula out of focus.
    pub fn unfocused<'a>(fs: impl IntoIterator<Item = &'a Formula>) -> Sequent {
        fs.into_iter().map(|f| (f.clone(), Ann::U)).collect()
    }

    pub fn insert(&mut self, f: Formula, a: Ann) -> bool {
        self.0.insert((f, a))
    }

    pub fn remove(&mut self, e: &AnnFormula) -> bool {
        self.0.remove(e)
    }

    pub fn contains(&self, f: &Formula, a: Ann) -> bool {
        self.0.contains(&(f.clone(), a))
    }

    /// The strongest annotation `f` carries here, if any.
    pub fn ann_of(&self, f: &Formula) -> Option<Ann> {
        if self.contains(f, Ann::F) {
            Some(Ann::F)
        } else if self.contains(f, Ann::U) {
            Some(Ann::U)
        } else {
            None
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &AnnFormula> {
        self.0.iter()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn has_focus(&self) -> bool {
        self.0.iter().any(|(_, a)| *a == Ann::F)
    }

    /// The underlying plain sequent.
    pub fn formulas(&self) -> BTreeSet<Formula> {
        self.0.iter().map(|(f, _)| f.clone()).collect()
    }

    pub fn all_focus(&self) -> Sequent {
        self.0.iter().map(|(f, _)| (f.clone(), Ann::F)).collect()
    }

    pub fn is_thin(&self) -> bool {
        !self.0.iter().any(|(f, a)| *a == Ann::U && self.contains(f, Ann::F))
    }

    pub fn is_subset(&self, other: &Sequent) -> bool {
        self.0.is_subset(&other.0)
    }

    pub fn without(&self, e: &AnnFormula) -> Sequent {
        let mut s = self.clone();
        s.0.remove(e);
        s
    }

    pub fn with(&self, f: Formula, a: Ann) -> Sequent {
        let mut s = self.clone();
        s.0.insert((f, a));
        s
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::Value::Array(
            self.0.iter().map(|(f, a)| serde_json::json!([f.to_string(), a.flag()])).collect(),
        )
    }

    fn from_pairs(pairs: &[(String, String)]) -> Result<Sequent, ProofFormatError> {
        let mut s = Sequent::new();
        for (text, flag) in pairs {
            let f = parse_exact(text).map_err(|e| ProofFormatError::Formula(text.clone(), e))?;
            let a = Ann::from_flag(flag).ok_or_else(|| ProofFormatError::Annotation(flag.clone()))?;
            s.insert(f, a);
        }
        Ok(s)
    }
}

impl FromIterator<AnnFormula> for Sequent {
    fn from_iter<I: IntoIterator<Item = AnnFormula>>(iter: I) -> Sequent {
        Sequent(iter.into_iter().collect())
    }
}

impl fmt::Display for Sequent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|(g, a)| format!("({g})^{}", a.flag())).collect();
        write!(f, "{{{}}}", parts.join(", "))
    }
}

impl fmt::Debug for Sequent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

/// Rule labels of proof nodes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Rule {
    Ax1,
    Ax2,
    Or,
    And,
    Box,
    Mu,
    Nu,
    W,
    F,
    U,
    /// Discharge rule; the node carries its token.
    D,
    /// Discharged leaf; the node carries the token of its companion.
    Discharged,
    /// Open assumption.
    Open,
}

impl Rule {
    pub const ALL: [Rule; 13] = [
        Rule::Ax1,
        Rule::Ax2,
        Rule::Or,
        Rule::And,
        Rule::Box,
        Rule::Mu,
        Rule::Nu,
        Rule::W,
        Rule::F,
        Rule::U,
        Rule::D,
        Rule::Discharged,
        Rule::Open,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Rule::Ax1 => "Ax1",
            Rule::Ax2 => "Ax2",
            Rule::Or => "ROr",
            Rule::And => "RAnd",
            Rule::Box => "RBox",
            Rule::Mu => "RMu",
            Rule::Nu => "RNu",
            Rule::W => "W",
            Rule::F => "F",
            Rule::U => "U",
            Rule::D => "D",
            Rule::Discharged => "Token",
            Rule::Open => "Star",
        }
    }

    pub fn from_name(s: &str) -> Option<Rule> {
        Rule::ALL.into_iter().find(|r| r.name() == s)
    }

    /// Rules that take a principal formula.
    pub fn has_principal(self) -> bool {
        matches!(self, Rule::Or | Rule::And | Rule::Box | Rule::Mu | Rule::Nu | Rule::W | Rule::F | Rule::U)
    }

    fn latex(self) -> &'static str {
        match self {
            Rule::Ax1 => "\\textsf{Ax1}",
            Rule::Ax2 => "\\textsf{Ax2}",
            Rule::Or => "$\\mathsf{R}_{\\lor}$",
            Rule::And => "$\\mathsf{R}_{\\land}$",
            Rule::Box => "$\\mathsf{R}_{\\Box}$",
            Rule::Mu => "$\\mathsf{R}_{\\mu}$",
            Rule::Nu => "$\\mathsf{R}_{\\nu}$",
            Rule::W => "\\textsf{W}",
            Rule::F => "\\textsf{F}",
            Rule::U => "\\textsf{U}",
            Rule::D => "\\textsf{D}",
            Rule::Discharged | Rule::Open => "",
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("{rule} is not applicable: {reason}")]
pub struct RuleError {
    pub rule: Rule,
    pub reason: String,
}

fn not_applicable<T>(rule: Rule, reason: impl Into<String>) -> Result<T, RuleError> {
    Err(RuleError { rule, reason: reason.into() })
}

/// The premises of `rule` applied backwards to `conclusion`.
///
/// Boolean and fixpoint rules drop the principal formula. `W`, `F` and `U`
/// take the formula they act on as principal.
pub fn apply_rule(rule: Rule, conclusion: &Sequent, principal: Option<&AnnFormula>) -> Result<Vec<Sequent>, RuleError> {
    if rule.has_principal() {
        let Some(pi) = principal else {
            return not_applicable(rule, "a principal formula is required");
        };
        if !conclusion.0.contains(pi) {
            return not_applicable(rule, format!("principal ({})^{} is not in the conclusion", pi.0, pi.1.flag()));
        }
    }
    match rule {
        Rule::Ax1 => {
            let lits: Vec<&AnnFormula> = conclusion.iter().collect();
            let ok = lits.len() == 2
                && match (lits[0].0.kind(), lits[1].0.kind()) {
                    (Kind::Prop(p), Kind::NegProp(q)) | (Kind::NegProp(q), Kind::Prop(p)) => p == q,
                    _ => false,
                };
            if ok {
                Ok(Vec::new())
            } else {
                not_applicable(rule, "the conclusion must be exactly a letter and its negation")
            }
        }
        Rule::Ax2 => {
            if conclusion.len() == 1 && conclusion.iter().all(|(f, _)| matches!(f.kind(), Kind::Top)) {
                Ok(Vec::new())
            } else {
                not_applicable(rule, "the conclusion must be exactly true")
            }
        }
        Rule::Or | Rule::And | Rule::Mu | Rule::Nu => {
            let (f, a) = principal.expect("checked");
            let rest = conclusion.without(&(f.clone(), *a));
            match (rule, f.kind()) {
                (Rule::Or, Kind::Or(l, r)) => Ok(vec![rest.with(l.clone(), *a).with(r.clone(), *a)]),
                (Rule::And, Kind::And(l, r)) => Ok(vec![rest.with(l.clone(), *a), rest.with(r.clone(), *a)]),
                (Rule::Mu, Kind::Mu(..)) => Ok(vec![rest.with(f.unfold().expect("fixpoint"), Ann::U)]),
                (Rule::Nu, Kind::Nu(..)) => Ok(vec![rest.with(f.unfold().expect("fixpoint"), *a)]),
                _ => not_applicable(rule, format!("principal {f} has the wrong main connective")),
            }
        }
        Rule::Box => {
            let (f, a) = principal.expect("checked");
            let Kind::Box(body) = f.kind() else {
                return not_applicable(rule, format!("principal {f} is not a box formula"));
            };
            let mut premise = Sequent::new();
            premise.insert(body.clone(), *a);
            for (g, b) in conclusion.iter() {
                if g == f && b == a {
                    continue;
                }
                match g.kind() {
                    Kind::Dia(h) => {
                        premise.insert(h.clone(), *b);
                    }
                    _ => return not_applicable(rule, format!("context formula {g} is not a diamond formula")),
                }
            }
            Ok(vec![premise])
        }
        Rule::W => Ok(vec![conclusion.without(principal.expect("checked"))]),
        Rule::F | Rule::U => {
            let (f, a) = principal.expect("checked");
            let (from, to) = if rule == Rule::F { (Ann::U, Ann::F) } else { (Ann::F, Ann::U) };
            if *a != from {
                return not_applicable(rule, format!("principal must be annotated {}", from.flag()));
            }
            Ok(vec![conclusion.without(&(f.clone(), from)).with(f.clone(), to)])
        }
        Rule::D => Ok(vec![conclusion.clone()]),
        Rule::Discharged | Rule::Open => Ok(Vec::new()),
    }
}

/// The principal formula that makes `premises` the result of `rule` on
/// `conclusion`. Boolean and fixpoint rules may also keep their principal.
pub fn infer_principal(rule: Rule, conclusion: &Sequent, premises: &[&Sequent]) -> Option<Option<AnnFormula>> {
    let matches = |out: &[Sequent], pi: Option<&AnnFormula>| {
        if out.len() != premises.len() {
            return false;
        }
        out.iter().zip(premises).all(|(o, p)| {
            o == *p
                || (matches!(rule, Rule::Or | Rule::And | Rule::Mu | Rule::Nu)
                    && pi.is_some_and(|pi| &o.with(pi.0.clone(), pi.1) == *p))
        })
    };
    if !rule.has_principal() {
        return match apply_rule(rule, conclusion, None) {
            Ok(out) if matches(&out, None) => Some(None),
            _ => None,
        };
    }
    conclusion.iter().find_map(|pi| match apply_rule(rule, conclusion, Some(pi)) {
        Ok(out) if matches(&out, Some(pi)) => Some(Some(pi.clone())),
        _ => None,
    })
}

/// Keeps every focused formula and the unfocused ones without a focused twin.
pub fn thinning(s: &Sequent) -> Sequent {
    s.iter().filter(|(f, a)| *a == Ann::F || !s.contains(f, Ann::F)).cloned().collect()
}

/// Every `phi^a` in `gamma` has some `phi^b` with `b >= a` in `sigma`.
pub fn more_focus(gamma: &Sequent, sigma: &Sequent) -> bool {
    gamma.iter().all(|(f, a)| sigma.ann_of(f).is_some_and(|b| b >= *a))
}

/// Membership of `phi^a` in the backwards closure of `sigma`.
pub fn in_backwards_closure(sigma: &Sequent, f: &Formula, a: Ann) -> bool {
    q_member(sigma, f, a, &mut Vec::new())
}

fn q_member(sigma: &Sequent, f: &Formula, a: Ann, stack: &mut Vec<AnnFormula>) -> bool {
    if sigma.ann_of(f).is_some_and(|b| b >= a) {
        return true;
    }
    let key = (f.clone(), a);
    if stack.contains(&key) {
        return false;
    }
    stack.push(key);
    let res = match f.kind() {
        Kind::Or(l, r) => q_member(sigma, l, a, stack) && q_member(sigma, r, a, stack),
        Kind::And(l, r) => q_member(sigma, l, a, stack) || q_member(sigma, r, a, stack),
        Kind::Mu(..) => q_member(sigma, &f.unfold().expect("fixpoint"), Ann::U, stack),
        Kind::Nu(..) => q_member(sigma, &f.unfold().expect("fixpoint"), a, stack),
        _ => false,
    };
    stack.pop();
    res
}

/// `gamma` is contained in the backwards closure of `sigma`.
pub fn within_backwards_closure(gamma: &Sequent, sigma: &Sequent) -> bool {
    gamma.iter().all(|(f, a)| in_backwards_closure(sigma, f, *a))
}

/// The backwards closure of `sigma`, restricted to its closure formulas.
pub fn backwards_closure(sigma: &Sequent) -> BTreeSet<AnnFormula> {
    let fs = sigma.formulas();
    let universe = closure(fs.iter());
    let mut out: BTreeSet<AnnFormula> = sigma.iter().cloned().collect();
    loop {
        let mut grew = false;
        for f in &universe {
            for a in [Ann::U, Ann::F] {
                if out.contains(&(f.clone(), a)) {
                    continue;
                }
                let has = |g: &Formula, b: Ann| out.contains(&(g.clone(), b));
                let hit = has(f, Ann::F)
                    || match f.kind() {
                        Kind::Or(l, r) => has(l, a) && has(r, a),
                        Kind::And(l, r) => has(l, a) || has(r, a),
                        Kind::Mu(..) => has(&f.unfold().expect("fixpoint"), Ann::U),
                        Kind::Nu(..) => has(&f.unfold().expect("fixpoint"), a),
                        _ => false,
                    };
                if hit {
                    out.insert((f.clone(), a));
                    grew = true;
                }
            }
        }
        if !grew {
            return out;
        }
    }
}

/// A node of a proof in preorder storage.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProofNode {
    pub seq: Sequent,
    pub rule: Rule,
    pub parent: Option<usize>,
    pub companion: Option<usize>,
    pub token: Option<String>,
}

/// A finite proof tree whose discharged leaves point back to companions.
/// Nodes are stored in preorder with the root at index 0.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Proof {
    pub nodes: Vec<ProofNode>,
}

/// A proof as a recursive tree, convenient for construction.
#[derive(Clone, Debug)]
pub struct ProofTree {
    pub seq: Sequent,
    pub rule: Rule,
    pub token: Option<String>,
    pub children: Vec<ProofTree>,
}

impl ProofTree {
    pub fn node(seq: Sequent, rule: Rule, children: Vec<ProofTree>) -> ProofTree {
        ProofTree { seq, rule, token: None, children }
    }

    pub fn leaf(seq: Sequent, rule: Rule) -> ProofTree {
        ProofTree::node(seq, rule, Vec::new())
    }

    pub fn with_token(mut self, token: &str) -> ProofTree {
        self.token = Some(token.to_string());
        self
    }

    /// Flattens into preorder, linking each discharged leaf to the nearest
    /// ancestor discharge node with the same token.
    pub fn into_proof(self) -> Proof {
        let mut proof = Proof::default();
        let mut stack = vec![(self, None)];
        while let Some((t, parent)) = stack.pop() {
            let ProofTree { seq, rule, token, children } = t;
            let id = proof.push(ProofNode { seq, rule, parent, companion: None, token });
            for c in children.into_iter().rev() {
                stack.push((c, Some(id)));
            }
        }
        proof.link_companions();
        proof
    }
}

#[derive(Debug, Error)]
pub enum ProofFormatError {
    #[error("malformed proof JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("cannot parse formula {0:?}: {1}")]
    Formula(String, ParseError),
    #[error("unknown annotation {0:?}")]
    Annotation(String),
    #[error("unknown rule {0:?}")]
    Rule(String),
    #[error("node {0}: {1}")]
    Shape(usize, String),
}

#[derive(Serialize, Deserialize)]
struct NodeJson {
    seq: Vec<(String, String)>,
    rule: String,
    parent: Option<usize>,
    companion: Option<usize>,
    token: Option<String>,
}

#[derive(Serialize, Deserialize)]
struct ProofJson {
    nodes: Vec<NodeJson>,
}

/// Condition identifiers reported by [`check_proof`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Condition {
    /// Local rule application.
    Local,
    /// Discharged and open nodes are leaves.
    Leaf,
    /// Discharge bookkeeping.
    Discharge,
    /// No focus rule between companion and leaf.
    NoFocusRule,
    /// Some box rule between companion and leaf.
    BoxRule,
    /// A focused formula at every node between companion and leaf.
    Focus,
    /// An open leaf in a closed proof.
    Open,
}

impl Condition {
    pub fn id(self) -> &'static str {
        match self {
            Condition::Local => "1",
            Condition::Leaf => "2",
            Condition::Discharge => "3",
            Condition::NoFocusRule => "4a",
            Condition::BoxRule => "4b",
            Condition::Focus => "4c",
            Condition::Open => "open",
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub node: usize,
    /// Node indices from the root down to `node`.
    pub path: Vec<usize>,
    pub condition: Condition,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] node {}: {}", self.condition, self.node, self.message)
    }
}

impl Proof {
    /// Appends a node; callers must respect preorder.
    pub fn push(&mut self, node: ProofNode) -> usize {
        self.nodes.push(node);
        self.nodes.len() - 1
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn root_sequent(&self) -> Option<&Sequent> {
        self.nodes.first().map(|n| &n.seq)
    }

    pub fn children_table(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.nodes.len()];
        for (i, n) in self.nodes.iter().enumerate() {
            if let Some(p) = n.parent {
                if p < out.len() {
                    out[p].push(i);
                }
            }
        }
        out
    }

    /// Node indices from the root down to `i`.
    pub fn path_to(&self, i: usize) -> Vec<usize> {
        let mut path = vec![i];
        let mut cur = i;
        while let Some(p) = self.nodes[cur].parent {
            if path.len() > self.nodes.len() {
                break;
            }
            path.push(p);
            cur = p;
        }
        path.reverse();
        path
    }

    /// Is `a` a proper ancestor of `b`?
    pub fn is_proper_ancestor(&self, a: usize, b: usize) -> bool {
        let mut cur = self.nodes[b].parent;
        while let Some(p) = cur {
            if p == a {
                return true;
            }
            cur = self.nodes[p].parent;
        }
        false
    }

    /// Length of the longest root-to-leaf path, counted in nodes.
    pub fn height(&self) -> usize {
        let mut depth = vec![0usize; self.nodes.len()];
        for (i, n) in self.nodes.iter().enumerate() {
            depth[i] = n.parent.map_or(1, |p| depth[p] + 1);
        }
        depth.into_iter().max().unwrap_or(0)
    }

    /// Sets `companion` of every discharged leaf to the nearest ancestor
    /// discharge node carrying the same token.
    pub fn link_companions(&mut self) {
        for i in 0..self.nodes.len() {
            if self.nodes[i].rule != Rule::Discharged {
                continue;
            }
            let token = self.nodes[i].token.clone();
            let mut cur = self.nodes[i].parent;
            while let Some(p) = cur {
                if self.nodes[p].rule == Rule::D && self.nodes[p].token == token {
                    self.nodes[i].companion = Some(p);
                    break;
                }
                cur = self.nodes[p].parent;
            }
        }
    }

    /// Checks parent indices for preorder storage.
    pub fn validate_shape(&self) -> Result<(), ProofFormatError> {
        if self.nodes.is_empty() {
            return Err(ProofFormatError::Shape(0, "a proof needs at least one node".into()));
        }
        let mut ancestors: Vec<usize> = Vec::new();
        for (i, n) in self.nodes.iter().enumerate() {
            match n.parent {
                None if i == 0 => {}
                None => return Err(ProofFormatError::Shape(i, "only the root may lack a parent".into())),
                Some(_) if i == 0 => return Err(ProofFormatError::Shape(0, "the root has a parent".into())),
                Some(p) => {
                    while ancestors.last().is_some_and(|&a| a != p) {
                        ancestors.pop();
                    }
                    if ancestors.is_empty() {
                        return Err(ProofFormatError::Shape(i, format!("parent {p} breaks preorder")));
                    }
                }
            }
            if let Some(c) = n.companion {
                if c >= self.nodes.len() {
                    return Err(ProofFormatError::Shape(i, format!("companion {c} out of range")));
                }
            }
            ancestors.push(i);
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let nodes = self
            .nodes
            .iter()
            .map(|n| NodeJson {
                seq: n.seq.iter().map(|(f, a)| (f.to_string(), a.flag().to_string())).collect(),
                rule: n.rule.name().to_string(),
                parent: n.parent,
                companion: n.companion,
                token: n.token.clone(),
            })
            .collect();
        serde_json::to_string_pretty(&ProofJson { nodes }).expect("serializable")
    }

    pub fn from_json(text: &str) -> Result<Proof, ProofFormatError> {
        let raw: ProofJson = serde_json::from_str(text)?;
        let mut nodes = Vec::with_capacity(raw.nodes.len());
        for n in raw.nodes {
            nodes.push(ProofNode {
                seq: Sequent::from_pairs(&n.seq)?,
                rule: Rule::from_name(&n.rule).ok_or_else(|| ProofFormatError::Rule(n.rule.clone()))?,
                parent: n.parent,
                companion: n.companion,
                token: n.token,
            });
        }
        let proof = Proof { nodes };
        proof.validate_shape()?;
        Ok(proof)
    }

    /// A bussproofs rendering of the proof.
    pub fn to_latex(&self) -> String {
        let children = self.children_table();
        let mut out = String::from("\\begin{prooftree}\n");
        if !self.nodes.is_empty() {
            self.latex_node(0, &children, &mut out);
        }
        out.push_str("\\end{prooftree}\n");
        out
    }

    fn latex_node(&self, i: usize, children: &[Vec<usize>], out: &mut String) {
        let n = &self.nodes[i];
        let seq = latex_sequent(&n.seq);
        let token = n.token.as_deref().unwrap_or("");
        match n.rule {
            Rule::Discharged => out.push_str(&format!("\\AxiomC{{$[{seq}]^{{\\mathsf{{{token}}}}}$}}\n")),
            Rule::Open => out.push_str(&format!("\\AxiomC{{${seq}$}}\n")),
            Rule::Ax1 | Rule::Ax2 => {
                out.push_str("\\AxiomC{}\n");
                out.push_str(&format!("\\RightLabel{{{}}}\n\\UnaryInfC{{${seq}$}}\n", n.rule.latex()));
            }
            _ => {
                for &c in &children[i] {
                    self.latex_node(c, children, out);
                }
                let label = if n.rule == Rule::D {
                    format!("$\\mathsf{{D}}^{{\\mathsf{{{token}}}}}$")
                } else {
                    n.rule.latex().to_string()
                };
                let inf = match children[i].len() {
                    0 => "AxiomC",
                    1 => "UnaryInfC",
                    2 => "BinaryInfC",
                    _ => "TrinaryInfC",
                };
                if children[i].is_empty() {
                    out.push_str("\\AxiomC{}\n");
                    out.push_str(&format!("\\RightLabel{{{label}}}\n\\UnaryInfC{{${seq}$}}\n"));
                } else {
                    out.push_str(&format!("\\RightLabel{{{label}}}\n\\{inf}{{${seq}$}}\n"));
                }
            }
        }
    }

    /// The principal formula of node `i`, inferred from its children.
    pub fn principal(&self, i: usize, children: &[Vec<usize>]) -> Option<AnnFormula> {
        let prem: Vec<&Sequent> = children[i].iter().map(|&c| &self.nodes[c].seq).collect();
        infer_principal(self.nodes[i].rule, &self.nodes[i].seq, &prem).flatten()
    }
}

/// LaTeX for a formula.
pub fn latex_formula(f: &Formula) -> String {
    fn wrap(g: &Formula) -> String {
        match g.kind() {
            Kind::Or(..) | Kind::And(..) | Kind::Mu(..) | Kind::Nu(..) => format!("({})", latex_formula(g)),
            _ => latex_formula(g),
        }
    }
    match f.kind() {
        Kind::Top => "\\top".into(),
        Kind::Bottom => "\\bot".into(),
        Kind::Prop(n) => n.to_string(),
        Kind::NegProp(n) => format!("\\neg {n}"),
        Kind::Or(a, b) => format!("{} \\lor {}", wrap(a), wrap(b)),
        Kind::And(a, b) => format!("{} \\land {}", wrap(a), wrap(b)),
        Kind::Dia(a) => format!("\\Diamond {}", wrap(a)),
        Kind::Box(a) => format!("\\Box {}", wrap(a)),
        Kind::Mu(x, a) => format!("\\mu {x}. {}", latex_formula(a)),
        Kind::Nu(x, a) => format!("\\nu {x}. {}", latex_formula(a)),
    }
}

fn latex_sequent(s: &Sequent) -> String {
    let parts: Vec<String> = s
        .iter()
        .map(|(f, a)| {
            let body = latex_formula(f);
            let body = if f.is_atomic() { body } else { format!("({body})") };
            format!("{body}^{{{}}}", a.flag())
        })
        .collect();
    parts.join(", ")
}

/// Checks a proof. With `allow_open` set, open leaves are permitted and the
/// result is a proof from assumptions.
pub fn check_proof(proof: &Proof, allow_open: bool) -> Result<(), Vec<Violation>> {
    let mut out = Vec::new();
    if let Err(e) = proof.validate_shape() {
        let node = match e {
            ProofFormatError::Shape(i, _) => i,
            _ => 0,
        };
        return Err(vec![Violation { node, path: Vec::new(), condition: Condition::Local, message: e.to_string() }]);
    }
    let children = proof.children_table();
    let mut report = |node: usize, condition: Condition, message: String| {
        out.push(Violation { node, path: proof.path_to(node), condition, message });
    };
    let mut d_nodes: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, n) in proof.nodes.iter().enumerate() {
        if n.rule == Rule::D {
            match n.token.as_deref() {
                Some(t) => d_nodes.entry(t).or_default().push(i),
                None => report(i, Condition::Local, "discharge rule without a token".into()),
            }
        }
    }
    for (t, ds) in &d_nodes {
        if ds.len() > 1 {
            for &d in &ds[1..] {
                report(d, Condition::Discharge, format!("token {t} is introduced more than once"));
            }
        }
    }
    for (i, n) in proof.nodes.iter().enumerate() {
        if n.seq.is_empty() {
            report(i, Condition::Local, "empty sequent".into());
        }
        let kids = &children[i];
        match n.rule {
            Rule::Open => {
                if !kids.is_empty() {
                    report(i, Condition::Leaf, "an open assumption has children".into());
                }
                if !allow_open {
                    report(i, Condition::Open, "open assumption in a closed proof".into());
                }
            }
            Rule::Discharged => {
                if !kids.is_empty() {
                    report(i, Condition::Leaf, "a discharged leaf has children".into());
                }
                let Some(t) = n.token.as_deref() else {
                    report(i, Condition::Discharge, "discharged leaf without a token".into());
                    continue;
                };
                let ds = d_nodes.get(t).cloned().unwrap_or_default();
                if ds.len() != 1 {
                    report(i, Condition::Discharge, format!("token {t} needs exactly one discharge node, found {}", ds.len()));
                    continue;
                }
                let c = ds[0];
                if n.companion.is_some_and(|k| k != c) || n.companion.is_none() {
                    report(i, Condition::Discharge, format!("companion must be node {c}"));
                    continue;
                }
                if !proof.is_proper_ancestor(c, i) {
                    report(i, Condition::Discharge, format!("companion {c} is not a proper ancestor"));
                    continue;
                }
                if children[c].first().is_none_or(|&cc| cc == i || !proof.is_proper_ancestor(cc, i)) {
                    report(i, Condition::Discharge, format!("the child of companion {c} is not a proper ancestor"));
                    continue;
                }
                if proof.nodes[c].seq != n.seq {
                    report(i, Condition::Discharge, format!("sequent differs from companion {c}"));
                    continue;
                }
                let path: Vec<usize> = {
                    let full = proof.path_to(i);
                    let pos = full.iter().position(|&x| x == c).expect("ancestor");
                    full[pos..].to_vec()
                };
                let inner = &path[..path.len() - 1];
                if let Some(&bad) = inner.iter().find(|&&x| matches!(proof.nodes[x].rule, Rule::F | Rule::U)) {
                    report(i, Condition::NoFocusRule, format!("focus rule at node {bad} between companion {c} and leaf"));
                }
                if !inner.iter().any(|&x| proof.nodes[x].rule == Rule::Box) {
                    report(i, Condition::BoxRule, format!("no box rule between companion {c} and leaf"));
                }
                if let Some(&bad) = path.iter().find(|&&x| !proof.nodes[x].seq.has_focus()) {
                    report(i, Condition::Focus, format!("node {bad} between companion {c} and leaf has no focused formula"));
                }
            }
            Rule::D => {
                if kids.len() != 1 || proof.nodes[kids[0]].seq != n.seq {
                    report(i, Condition::Local, "a discharge node needs one child with the same sequent".into());
                }
            }
            rule => {
                if n.token.is_some() {
                    report(i, Condition::Local, format!("{rule} carries a token"));
                }
                let prem: Vec<&Sequent> = kids.iter().map(|&c| &proof.nodes[c].seq).collect();
                if infer_principal(rule, &n.seq, &prem).is_none() {
                    report(i, Condition::Local, format!("premises do not match an application of {rule}"));
                }
            }
        }
    }
    if out.is_empty() {
        Ok(())
    } else {
        Err(out)
    }
}

/// Thin: a non-thin node is a weakening that drops an unfocused twin.
pub fn is_thin(proof: &Proof) -> bool {
    let children = proof.children_table();
    proof.nodes.iter().enumerate().all(|(i, n)| {
        if n.seq.is_thin() {
            return true;
        }
        if n.rule != Rule::W || children[i].len() != 1 {
            return false;
        }
        match proof.principal(i, &children) {
            Some((f, Ann::U)) => n.seq.contains(&f, Ann::F),
            _ => false,
        }
    })
}

/// Progressive: boolean and fixpoint rules drop their principal formula.
pub fn is_progressive(proof: &Proof) -> bool {
    let children = proof.children_table();
    proof.nodes.iter().enumerate().all(|(i, n)| {
        if !matches!(n.rule, Rule::Or | Rule::And | Rule::Mu | Rule::Nu) {
            return true;
        }
        match proof.principal(i, &children) {
            Some(pi) => children[i].iter().all(|&c| !proof.nodes[c].seq.0.contains(&pi)),
            None => false,
        }
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TrailKind {
    Active,
    Passive,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TrailStep {
    pub kind: TrailKind,
    pub from: AnnFormula,
    pub to: AnnFormula,
}

/// Trail steps along the edge from `u` to `v`, where `v` is a child of `u`
/// or `u` is a discharged leaf and `v` its companion.
pub fn trail_step(proof: &Proof, u: usize, v: usize) -> Vec<TrailStep> {
    let children = proof.children_table();
    trail_step_with(proof, &children, u, v)
}

fn trail_step_with(proof: &Proof, children: &[Vec<usize>], u: usize, v: usize) -> Vec<TrailStep> {
    let su = &proof.nodes[u].seq;
    let sv = &proof.nodes[v].seq;
    let step = |kind, from: &AnnFormula, to: AnnFormula| TrailStep { kind, from: from.clone(), to };
    let identity = |skip: Option<&AnnFormula>| -> Vec<TrailStep> {
        su.iter()
            .filter(|e| Some(*e) != skip && sv.0.contains(*e))
            .map(|e| step(TrailKind::Passive, e, e.clone()))
            .collect()
    };
    let rule = proof.nodes[u].rule;
    if rule == Rule::Discharged || rule == Rule::D {
        return identity(None);
    }
    let Some(pi) = proof.principal(u, children) else {
        return Vec::new();
    };
    let (f, a) = (&pi.0, pi.1);
    let mut out = Vec::new();
    match (rule, f.kind()) {
        (Rule::Or, Kind::Or(l, r)) => {
            out.push(step(TrailKind::Active, &pi, (l.clone(), a)));
            out.push(step(TrailKind::Active, &pi, (r.clone(), a)));
            out.extend(identity(Some(&pi)));
        }
        (Rule::And, Kind::And(l, r)) => {
            let idx = children[u].iter().position(|&c| c == v).unwrap_or(0);
            let part = if idx == 0 { l } else { r };
            out.push(step(TrailKind::Active, &pi, (part.clone(), a)));
            out.extend(identity(Some(&pi)));
        }
        (Rule::Mu, _) => {
            out.push(step(TrailKind::Active, &pi, (f.unfold().expect("fixpoint"), Ann::U)));
            out.extend(identity(Some(&pi)));
        }
        (Rule::Nu, _) => {
            out.push(step(TrailKind::Active, &pi, (f.unfold().expect("fixpoint"), a)));
            out.extend(identity(Some(&pi)));
        }
        (Rule::Box, Kind::Box(body)) => {
            out.push(step(TrailKind::Active, &pi, (body.clone(), a)));
            for e in su.iter() {
                if let Kind::Dia(h) = e.0.kind() {
                    out.push(step(TrailKind::Active, e, (h.clone(), e.1)));
                }
            }
        }
        (Rule::W, _) => out.extend(identity(Some(&pi))),
        (Rule::F, _) | (Rule::U, _) => {
            let flipped = if rule == Rule::F { Ann::F } else { Ann::U };
            out.push(step(TrailKind::Passive, &pi, (f.clone(), flipped)));
            out.extend(identity(Some(&pi)));
        }
        _ => {}
    }
    out.retain(|s| sv.0.contains(&s.to));
    out
}

/// The general trail relation composed along `path`.
pub fn proof_trails(proof: &Proof, path: &[usize]) -> BTreeSet<(AnnFormula, AnnFormula)> {
    let children = proof.children_table();
    let Some(&first) = path.first() else {
        return BTreeSet::new();
    };
    let mut rel: BTreeSet<(AnnFormula, AnnFormula)> = proof.nodes[first].seq.iter().map(|e| (e.clone(), e.clone())).collect();
    for w in path.windows(2) {
        let steps = trail_step_with(proof, &children, w[0], w[1]);
        let mut next = BTreeSet::new();
        for (start, mid) in &rel {
            for s in steps.iter().filter(|s| &s.from == mid) {
                next.insert((start.clone(), s.to.clone()));
            }
        }
        rel = next;
    }
    rel
}

/// A cyclic path through a proof: `prefix` then `lp` forever. Steps follow
/// parent-child edges and discharged-leaf-to-companion edges.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NodeLasso {
    pub prefix: Vec<usize>,
    pub lp: Vec<usize>,
}

/// Does the infinite path described by `lasso` carry a trail whose loop
/// avoids least fixpoint formulas?
pub fn nu_trail_exists(proof: &Proof, lasso: &NodeLasso) -> bool {
    if lasso.lp.is_empty() {
        return false;
    }
    let children = proof.children_table();
    let seq: Vec<usize> = lasso.prefix.iter().chain(lasso.lp.iter()).copied().collect();
    let start_loop = lasso.prefix.len();
    let mut ids: BTreeMap<(usize, AnnFormula), usize> = BTreeMap::new();
    let mut keys: Vec<(usize, AnnFormula)> = Vec::new();
    for (pos, &n) in seq.iter().enumerate() {
        for e in proof.nodes[n].seq.iter() {
            ids.insert((pos, e.clone()), keys.len());
            keys.push((pos, e.clone()));
        }
    }
    let mut moves = vec![Vec::new(); keys.len()];
    for pos in 0..seq.len() {
        let next = if pos + 1 < seq.len() { pos + 1 } else { start_loop };
        for s in trail_step_with(proof, &children, seq[pos], seq[next]) {
            if let (Some(&a), Some(&b)) = (ids.get(&(pos, s.from.clone())), ids.get(&(next, s.to.clone()))) {
                moves[a].push(b);
            }
        }
    }
    let mut reach = vec![false; keys.len()];
    let mut stack: Vec<usize> = (0..keys.len()).filter(|&k| keys[k].0 == 0).collect();
    for &k in &stack {
        reach[k] = true;
    }
    while let Some(k) = stack.pop() {
        for &m in &moves[k] {
            if !reach[m] {
                reach[m] = true;
                stack.push(m);
            }
        }
    }
    let keep: Vec<bool> = (0..keys.len())
        .map(|k| reach[k] && keys[k].0 >= start_loop && !matches!(keys[k].1 .0.kind(), Kind::Mu(..)))
        .collect();
    let sub: Vec<Vec<usize>> =
        (0..keys.len()).map(|k| if keep[k] { moves[k].iter().copied().filter(|&m| keep[m]).collect() } else { Vec::new() }).collect();
    sccs(&sub).iter().any(|c| c.len() > 1 || (keep[c[0]] && sub[c[0]].contains(&c[0])))
}

/// A finite prefix of the infinite unravelling. Discharge nodes are elided,
/// discharged leaves continue at their companion while fewer than `depth`
/// back edges have been taken on the branch, and become open leaves after.
pub fn unravel_prefix(proof: &Proof, depth: usize) -> Proof {
    let children = proof.children_table();
    let mut out = Proof::default();
    let mut stack: Vec<(usize, Option<usize>, usize)> = vec![(0, None, 0)];
    while let Some((mut n, parent, mut used)) = stack.pop() {
        let mut hops = 0;
        loop {
            hops += 1;
            if hops > proof.nodes.len() + 2 {
                break;
            }
            match proof.nodes[n].rule {
                Rule::D if children[n].len() == 1 => n = children[n][0],
                Rule::Discharged if used < depth && proof.nodes[n].companion.is_some() => {
                    used += 1;
                    n = proof.nodes[n].companion.expect("checked");
                }
                _ => break,
            }
        }
        let node = &proof.nodes[n];
        let rule = if matches!(node.rule, Rule::Discharged | Rule::D) { Rule::Open } else { node.rule };
        let id = out.push(ProofNode { seq: node.seq.clone(), rule, parent, companion: None, token: None });
        if rule != Rule::Open {
            for &c in children[n].iter().rev() {
                stack.push((c, Some(id), used));
            }
        }
    }
    out
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SimulationError {
    #[error("not a basic proof: {0}")]
    NotBasic(String),
    #[error("the target sequent is not thin")]
    NotThin,
    #[error("the root sequent is not contained in the backwards closure of the target")]
    NotCovered,
}

/// A thin, progressive proof of `target` from assumptions that simulates the
/// single rule application `basic`.
pub fn simulate_basic_step(basic: &Proof, target: &Sequent) -> Result<Proof, SimulationError> {
    if basic.is_empty() {
        return Err(SimulationError::NotBasic("empty proof".into()));
    }
    let children = basic.children_table();
    if children[0].iter().any(|&c| basic.nodes[c].rule != Rule::Open) || basic.len() != 1 + children[0].len() {
        return Err(SimulationError::NotBasic("premises must be open leaves".into()));
    }
    if !target.is_thin() {
        return Err(SimulationError::NotThin);
    }
    let root = &basic.nodes[0];
    if !within_backwards_closure(&root.seq, target) {
        return Err(SimulationError::NotCovered);
    }
    let rule = root.rule;
    let principal = match rule {
        Rule::D | Rule::Discharged | Rule::Open => return Err(SimulationError::NotBasic(format!("{rule} at the root"))),
        _ => basic.principal(0, &children),
    };
    if rule.has_principal() && principal.is_none() {
        return Err(SimulationError::NotBasic(format!("{rule} does not match its premises")));
    }
    let open = |s: &Sequent| ProofTree::leaf(s.clone(), Rule::Open);
    let upgrade = |s: &Sequent| -> Sequent {
        s.iter().map(|(f, _)| (f.clone(), target.ann_of(f).expect("covered by more_focus"))).collect()
    };
    let tree = match rule {
        Rule::Ax1 | Rule::Ax2 => {
            let keep = upgrade(&root.seq);
            weaken_to(target, &keep, ProofTree::leaf(keep.clone(), rule))
        }
        Rule::Box => {
            let keep = upgrade(&root.seq);
            let (bf, _) = principal.clone().expect("checked");
            let pi = (bf.clone(), keep.ann_of(&bf).expect("present"));
            let prem = apply_rule(Rule::Box, &keep, Some(&pi)).expect("shape preserved");
            let top = ProofTree::node(keep.clone(), Rule::Box, vec![thin_out(&prem[0], open(&thinning(&prem[0])))]);
            weaken_to(target, &keep, top)
        }
        Rule::Or | Rule::And | Rule::Mu | Rule::Nu => {
            let (f, a) = principal.clone().expect("checked");
            match target.ann_of(&f) {
                Some(b) if b >= a => {
                    let prem = apply_rule(rule, target, Some(&(f.clone(), b))).expect("principal present");
                    let kids = prem.iter().map(|p| thin_out(p, open(&thinning(p)))).collect();
                    ProofTree::node(target.clone(), rule, kids)
                }
                _ => open(target),
            }
        }
        Rule::F => {
            let mut seqs = vec![target.clone()];
            for (f, _) in target.iter().filter(|(_, a)| *a == Ann::U) {
                let last = seqs.last().expect("non-empty");
                let next = last.without(&(f.clone(), Ann::U)).with(f.clone(), Ann::F);
                seqs.push(next);
            }
            let mut tree = open(seqs.last().expect("non-empty"));
            for s in seqs[..seqs.len() - 1].iter().rev() {
                tree = ProofTree::node(s.clone(), Rule::F, vec![tree]);
            }
            tree
        }
        Rule::W | Rule::U => open(target),
        Rule::D | Rule::Discharged | Rule::Open => unreachable!(),
    };
    Ok(tree.into_proof())
}

/// Weakens `from` one formula at a time down to `to`, then continues with
/// `top`, whose sequent must be `to`.
pub fn weaken_to(from: &Sequent, to: &Sequent, top: ProofTree) -> ProofTree {
    let drop: Vec<AnnFormula> = from.iter().filter(|e| !to.0.contains(*e)).cloned().collect();
    let mut seqs = Vec::with_capacity(drop.len());
    let mut cur = from.clone();
    for e in &drop {
        seqs.push(cur.clone());
        cur = cur.without(e);
    }
    let mut tree = top;
    for s in seqs.into_iter().rev() {
        tree = ProofTree::node(s, Rule::W, vec![tree]);
    }
    tree
}

/// Weakens away the unfocused twins of `s`, then continues with `top`.
pub fn thin_out(s: &Sequent, top: ProofTree) -> ProofTree {
    weaken_to(s, &thinning(s), top)
}

/// The set of tokens introduced by discharge nodes.
pub fn tokens(proof: &Proof) -> BTreeSet<String> {
    proof.nodes.iter().filter(|n| n.rule == Rule::D).filter_map(|n| n.token.clone()).collect()
}

/// Discharge nodes that discharge no leaf.
pub fn idle_discharges(proof: &Proof) -> Vec<usize> {
    let used: HashSet<usize> = proof.nodes.iter().filter(|n| n.rule == Rule::Discharged).filter_map(|n| n.companion).collect();
    (0..proof.len()).filter(|&i| proof.nodes[i].rule == Rule::D && !used.contains(&i)).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Keep {
    Apply,
    Skip,
    Branch(usize),
}

/// Removes every rule application whose residuals are never used, replacing
/// it by weakening, and keeps a single premise of a conjunction when that
/// premise does not use its residual. The input is returned unchanged if the
/// result fails to check.
pub fn prune(proof: &Proof) -> Proof {
    prune_once(proof).filter(|p| check_proof(p, false).is_ok()).unwrap_or_else(|| proof.clone())
}

fn prune_once(proof: &Proof) -> Option<Proof> {
    let n = proof.len();
    let children = proof.children_table();
    let principal: Vec<Option<AnnFormula>> =
        (0..n).map(|i| if proof.nodes[i].rule.has_principal() { proof.principal(i, &children) } else { None }).collect();
    let residual: Vec<Vec<Sequent>> = principal
        .iter()
        .zip(&proof.nodes)
        .map(|(pi, node)| match pi {
            Some(pi) => apply_rule(node.rule, &[pi.clone()].into_iter().collect(), Some(pi)).unwrap_or_default(),
            None => Vec::new(),
        })
        .collect();
    let companion_child: Vec<bool> = proof.nodes.iter().map(|m| m.parent.is_some_and(|p| proof.nodes[p].rule == Rule::D)).collect();
    let uses = |need: &Sequent, res: &Sequent, pi: &AnnFormula| need.0.contains(pi) || res.iter().any(|e| need.0.contains(e));
    let mut keep: Vec<Option<Keep>> = vec![None; n];
    let mut need = vec![Sequent::new(); n];
    let mut leaf_need = vec![Sequent::new(); n];
    let mut stable = false;
    for _ in 0..64 {
        for i in (0..n).rev() {
            let node = &proof.nodes[i];
            let kids = &children[i];
            let (k, mut s) = match node.rule {
                Rule::Open => return None,
                Rule::Ax1 | Rule::Ax2 => (Keep::Apply, node.seq.clone()),
                Rule::Discharged => (Keep::Apply, leaf_need[i].clone()),
                Rule::D => (Keep::Apply, need[kids[0]].clone()),
                Rule::W => (Keep::Skip, need[kids[0]].clone()),
                Rule::Box => {
                    let pi = principal[i].clone()?;
                    let mut s: Sequent = [pi].into_iter().collect();
                    for e in need[kids[0]].iter() {
                        if residual[i][0].0.contains(e) {
                            continue;
                        }
                        let d = Formula::dia(e.0.clone());
                        if node.seq.contains(&d, e.1) {
                            s.insert(d, e.1);
                        }
                    }
                    (Keep::Apply, s)
                }
                Rule::And => {
                    let pi = principal[i].clone()?;
                    let unused: Vec<usize> = (0..kids.len()).filter(|&k| !uses(&need[kids[k]], &residual[i][k], &pi)).collect();
                    let choice = match keep[i] {
                        Some(Keep::Branch(b)) if unused.contains(&b) => Keep::Branch(b),
                        None if !unused.is_empty() => Keep::Branch(unused[0]),
                        _ => Keep::Apply,
                    };
                    match choice {
                        Keep::Branch(b) => (choice, need[kids[b]].clone()),
                        _ => {
                            let mut s: Sequent = [pi].into_iter().collect();
                            for (k, &c) in kids.iter().enumerate() {
                                for e in need[c].iter().filter(|e| !residual[i][k].0.contains(*e)) {
                                    s.0.insert(e.clone());
                                }
                            }
                            (Keep::Apply, s)
                        }
                    }
                }
                _ => {
                    let pi = principal[i].clone()?;
                    let c = kids[0];
                    if uses(&need[c], &residual[i][0], &pi) {
                        let mut s: Sequent = need[c].iter().filter(|e| !residual[i][0].0.contains(*e)).cloned().collect();
                        s.0.insert(pi);
                        (Keep::Apply, s)
                    } else {
                        (Keep::Skip, need[c].clone())
                    }
                }
            };
            if companion_child[i] {
                for e in node.seq.iter().filter(|e| e.1 == Ann::F) {
                    s.0.insert(e.clone());
                }
            }
            keep[i] = Some(k);
            need[i] = s;
        }
        let mut changed = false;
        for (l, node) in proof.nodes.iter().enumerate() {
            if let (Rule::Discharged, Some(c)) = (node.rule, node.companion) {
                if leaf_need[l] != need[c] {
                    leaf_need[l] = need[c].clone();
                    changed = true;
                }
            }
        }
        if !changed {
            stable = true;
            break;
        }
    }
    if !stable {
        return None;
    }
    let keep: Vec<Keep> = keep.into_iter().map(|k| k.unwrap_or(Keep::Apply)).collect();
    let mut used = HashSet::new();
    let mut stack = vec![0];
    while let Some(i) = stack.pop() {
        if proof.nodes[i].rule == Rule::Discharged {
            used.extend(proof.nodes[i].companion);
        }
        match keep[i] {
            Keep::Branch(b) => stack.push(children[i][b]),
            _ => stack.extend(children[i].iter().copied()),
        }
    }
    let mut out = Proof::default();
    let mut stack: Vec<(usize, Option<usize>, Sequent)> = vec![(0, None, proof.nodes[0].seq.clone())];
    while let Some((i, parent, arriving)) = stack.pop() {
        let mut parent = parent;
        let mut cur = arriving;
        let mut drops: Vec<AnnFormula> = cur.iter().filter(|e| !need[i].0.contains(*e)).cloned().collect();
        drops.sort_by_key(|(f, a)| !(*a == Ann::U && cur.contains(f, Ann::F)));
        for e in drops {
            let id = out.push(ProofNode { seq: cur.clone(), rule: Rule::W, parent, companion: None, token: None });
            parent = Some(id);
            cur = cur.without(&e);
        }
        let node = &proof.nodes[i];
        let kids = &children[i];
        match (node.rule, keep[i]) {
            (Rule::D, _) if !used.contains(&i) => stack.push((kids[0], parent, cur)),
            (Rule::W, _) | (_, Keep::Skip) => stack.push((kids[0], parent, cur)),
            (_, Keep::Branch(b)) => stack.push((kids[b], parent, cur)),
            (Rule::Discharged | Rule::Ax1 | Rule::Ax2, _) => {
                out.push(ProofNode { seq: cur, rule: node.rule, parent, companion: None, token: node.token.clone() });
            }
            (Rule::D, _) => {
                let id = out.push(ProofNode { seq: cur.clone(), rule: Rule::D, parent, companion: None, token: node.token.clone() });
                stack.push((kids[0], Some(id), cur));
            }
            (rule, _) => {
                let prems = apply_rule(rule, &cur, principal[i].as_ref()).ok()?;
                let id = out.push(ProofNode { seq: cur, rule, parent, companion: None, token: None });
                for (k, p) in prems.into_iter().enumerate().rev() {
                    stack.push((kids[k], Some(id), p));
                }
            }
        }
    }
    out.link_companions();
    Some(out)
}
