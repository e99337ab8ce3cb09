//! Formulas of the modal mu-calculus in negation normal form.
//!
//! Formulas are immutable, reference counted and carry a precomputed hash and
//! size, so cloning is cheap and equality checks usually short-circuit.

mod fragment;
mod parser;

use std::cmp::Ordering;
use std::collections::hash_map::DefaultHasher;
use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use thiserror::Error;

pub use fragment::{guard, in_theta, is_af_inductive, is_af_scoping, is_alternation_free, is_guarded};
pub use parser::{parse, parse_exact, ParseError};

/// A proposition letter or fixpoint variable.
pub type Name = Arc<str>;

/// The two fixpoint operators.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Fix {
    Mu,
    Nu,
}

impl Fix {
    pub fn dual(self) -> Fix {
        match self {
            Fix::Mu => Fix::Nu,
            Fix::Nu => Fix::Mu,
        }
    }
}

impl fmt::Display for Fix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Fix::Mu => "mu",
            Fix::Nu => "nu",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Kind {
    Top,
    Bottom,
    Prop(Name),
    NegProp(Name),
    Or(Formula, Formula),
    And(Formula, Formula),
    Dia(Formula),
    Box(Formula),
    Mu(Name, Formula),
    Nu(Name, Formula),
}

impl Kind {
    fn tag(&self) -> u8 {
        match self {
            Kind::Top => 0,
            Kind::Bottom => 1,
            Kind::Prop(_) => 2,
            Kind::NegProp(_) => 3,
            Kind::Or(..) => 4,
            Kind::And(..) => 5,
            Kind::Dia(_) => 6,
            Kind::Box(_) => 7,
            Kind::Mu(..) => 8,
            Kind::Nu(..) => 9,
        }
    }
}

#[derive(Debug)]
struct Node {
    kind: Kind,
    hash: u64,
    size: u32,
}

#[derive(Clone)]
pub struct Formula(Arc<Node>);

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FormulaError {
    #[error("substitution would capture {0}")]
    Capture(String),
    #[error("negated occurrence of {0} cannot be substituted")]
    NegatedVariable(String),
    #[error("not a fixpoint formula: {0}")]
    NotFixpoint(String),
    #[error("trace loop is empty")]
    EmptyLoop,
    #[error("trace step {from} -> {to} is not a closure step")]
    BadTraceStep { from: String, to: String },
    #[error("trace loop contains both mu- and nu-formulas")]
    MixedLoop,
    #[error("trace loop contains no fixpoint formula")]
    NoFixpointOnLoop,
}

impl Formula {
    pub fn new(kind: Kind) -> Formula {
        let mut h = DefaultHasher::new();
        let tag = kind.tag();
        tag.hash(&mut h);
        let size = match &kind {
            Kind::Top | Kind::Bottom => 1,
            Kind::Prop(n) | Kind::NegProp(n) => {
                n.hash(&mut h);
                1
            }
            Kind::Or(a, b) | Kind::And(a, b) => {
                a.0.hash.hash(&mut h);
                b.0.hash.hash(&mut h);
                1 + a.0.size + b.0.size
            }
            Kind::Dia(a) | Kind::Box(a) => {
                a.0.hash.hash(&mut h);
                1 + a.0.size
            }
            Kind::Mu(n, a) | Kind::Nu(n, a) => {
                n.hash(&mut h);
                a.0.hash.hash(&mut h);
                1 + a.0.size
            }
        };
        Formula(Arc::new(Node { kind, hash: h.finish(), size }))
    }

    pub fn top() -> Formula {
        Formula::new(Kind::Top)
    }
    pub fn bottom() -> Formula {
        Formula::new(Kind::Bottom)
    }
    pub fn prop(name: &str) -> Formula {
        Formula::new(Kind::Prop(name.into()))
    }
    pub fn neg_prop(name: &str) -> Formula {
        Formula::new(Kind::NegProp(name.into()))
    }
    pub fn or(a: Formula, b: Formula) -> Formula {
        Formula::new(Kind::Or(a, b))
    }
    pub fn and(a: Formula, b: Formula) -> Formula {
        Formula::new(Kind::And(a, b))
    }
    pub fn dia(a: Formula) -> Formula {
        Formula::new(Kind::Dia(a))
    }
    pub fn boxed(a: Formula) -> Formula {
        Formula::new(Kind::Box(a))
    }
    pub fn mu(var: &str, body: Formula) -> Formula {
        Formula::new(Kind::Mu(var.into(), body))
    }
    pub fn nu(var: &str, body: Formula) -> Formula {
        Formula::new(Kind::Nu(var.into(), body))
    }
    pub fn fix(eta: Fix, var: Name, body: Formula) -> Formula {
        match eta {
            Fix::Mu => Formula::new(Kind::Mu(var, body)),
            Fix::Nu => Formula::new(Kind::Nu(var, body)),
        }
    }

    pub fn kind(&self) -> &Kind {
        &self.0.kind
    }

    /// Number of symbols.
    pub fn size(&self) -> usize {
        self.0.size as usize
    }

    pub fn is_literal(&self) -> bool {
        matches!(self.kind(), Kind::Prop(_) | Kind::NegProp(_))
    }

    /// Atomic formulas: the constants and literals.
    pub fn is_atomic(&self) -> bool {
        matches!(self.kind(), Kind::Top | Kind::Bottom | Kind::Prop(_) | Kind::NegProp(_))
    }

    pub fn is_modal(&self) -> bool {
        matches!(self.kind(), Kind::Dia(_) | Kind::Box(_))
    }

    pub fn fixpoint(&self) -> Option<(Fix, &Name, &Formula)> {
        match self.kind() {
            Kind::Mu(x, b) => Some((Fix::Mu, x, b)),
            Kind::Nu(x, b) => Some((Fix::Nu, x, b)),
            _ => None,
        }
    }

    pub fn free_vars(&self) -> BTreeSet<Name> {
        let mut out = BTreeSet::new();
        free_into(self, &mut Vec::new(), &mut out);
        out
    }

    pub fn bound_vars(&self) -> BTreeSet<Name> {
        let mut out = BTreeSet::new();
        self.visit(&mut |g| {
            if let Some((_, x, _)) = g.fixpoint() {
                out.insert(x.clone());
            }
        });
        out
    }

    /// Calls `f` on every subformula occurrence, parents before children.
    pub fn visit(&self, f: &mut impl FnMut(&Formula)) {
        f(self);
        match self.kind() {
            Kind::Or(a, b) | Kind::And(a, b) => {
                a.visit(f);
                b.visit(f);
            }
            Kind::Dia(a) | Kind::Box(a) | Kind::Mu(_, a) | Kind::Nu(_, a) => a.visit(f),
            _ => {}
        }
    }

    pub fn subformulas(&self) -> BTreeSet<Formula> {
        let mut out = BTreeSet::new();
        self.visit(&mut |g| {
            out.insert(g.clone());
        });
        out
    }

    /// Every name occurring in the formula, free or bound.
    pub fn names(&self) -> BTreeSet<Name> {
        let mut out = BTreeSet::new();
        self.visit(&mut |g| match g.kind() {
            Kind::Prop(n) | Kind::NegProp(n) | Kind::Mu(n, _) | Kind::Nu(n, _) => {
                out.insert(n.clone());
            }
            _ => {}
        });
        out
    }

    /// Tidy: no name is both free and bound.
    pub fn is_tidy(&self) -> bool {
        self.free_vars().is_disjoint(&self.bound_vars())
    }

    /// Positivity: no binder has a negated occurrence of its own variable.
    pub fn is_positive(&self) -> bool {
        let mut ok = true;
        self.visit(&mut |g| {
            if let Some((_, x, b)) = g.fixpoint() {
                if occurs_negated_free(b, x) {
                    ok = false;
                }
            }
        });
        ok
    }

    /// Swaps the connectives and fixpoints, fixing literals.
    pub fn boolean_dual(&self) -> Formula {
        self.map_dual(&|k| match k {
            Kind::Prop(n) => Formula::new(Kind::Prop(n.clone())),
            Kind::NegProp(n) => Formula::new(Kind::NegProp(n.clone())),
            _ => unreachable!(),
        })
    }

    /// The negation normal form of the negation.
    pub fn negation(&self) -> Formula {
        let fv = self.free_vars();
        self.negation_fixing(&|n| !fv.contains(n))
    }

    /// Dual that swaps the polarity of every literal except those whose name
    /// satisfies `fixed`.
    pub(crate) fn negation_fixing(&self, fixed: &dyn Fn(&Name) -> bool) -> Formula {
        self.map_dual(&|k| match k {
            Kind::Prop(n) if fixed(n) => Formula::new(Kind::Prop(n.clone())),
            Kind::NegProp(n) if fixed(n) => Formula::new(Kind::NegProp(n.clone())),
            Kind::Prop(n) => Formula::new(Kind::NegProp(n.clone())),
            Kind::NegProp(n) => Formula::new(Kind::Prop(n.clone())),
            _ => unreachable!(),
        })
    }

    fn map_dual(&self, lit: &dyn Fn(&Kind) -> Formula) -> Formula {
        match self.kind() {
            Kind::Top => Formula::bottom(),
            Kind::Bottom => Formula::top(),
            Kind::Prop(_) | Kind::NegProp(_) => lit(self.kind()),
            Kind::Or(a, b) => Formula::and(a.map_dual(lit), b.map_dual(lit)),
            Kind::And(a, b) => Formula::or(a.map_dual(lit), b.map_dual(lit)),
            Kind::Dia(a) => Formula::boxed(a.map_dual(lit)),
            Kind::Box(a) => Formula::dia(a.map_dual(lit)),
            Kind::Mu(x, a) => Formula::new(Kind::Nu(x.clone(), a.map_dual(lit))),
            Kind::Nu(x, a) => Formula::new(Kind::Mu(x.clone(), a.map_dual(lit))),
        }
    }

    /// Replaces the free occurrences of `x` by `xi`.
    pub fn substitute(&self, x: &str, xi: &Formula) -> Result<Formula, FormulaError> {
        if occurs_negated_free(self, x) {
            return Err(FormulaError::NegatedVariable(x.to_string()));
        }
        let fv = xi.free_vars();
        if let Some(n) = self.bound_vars().intersection(&fv).next() {
            return Err(FormulaError::Capture(n.to_string()));
        }
        Ok(self.subst_unchecked(x, xi))
    }

    pub(crate) fn subst_unchecked(&self, x: &str, xi: &Formula) -> Formula {
        match self.kind() {
            Kind::Prop(n) if &**n == x => xi.clone(),
            Kind::Top | Kind::Bottom | Kind::Prop(_) | Kind::NegProp(_) => self.clone(),
            Kind::Or(a, b) => Formula::or(a.subst_unchecked(x, xi), b.subst_unchecked(x, xi)),
            Kind::And(a, b) => Formula::and(a.subst_unchecked(x, xi), b.subst_unchecked(x, xi)),
            Kind::Dia(a) => Formula::dia(a.subst_unchecked(x, xi)),
            Kind::Box(a) => Formula::boxed(a.subst_unchecked(x, xi)),
            Kind::Mu(y, _) | Kind::Nu(y, _) if &**y == x => self.clone(),
            Kind::Mu(y, a) => Formula::new(Kind::Mu(y.clone(), a.subst_unchecked(x, xi))),
            Kind::Nu(y, a) => Formula::new(Kind::Nu(y.clone(), a.subst_unchecked(x, xi))),
        }
    }

    /// The unfolding of a fixpoint formula.
    pub fn unfold(&self) -> Result<Formula, FormulaError> {
        match self.fixpoint() {
            Some((_, x, body)) => Ok(body.subst_unchecked(x, self)),
            None => Err(FormulaError::NotFixpoint(self.to_string())),
        }
    }

    /// The immediate closure successors.
    pub fn clos0(&self) -> Vec<Formula> {
        match self.kind() {
            Kind::Or(a, b) | Kind::And(a, b) => vec![a.clone(), b.clone()],
            Kind::Dia(a) | Kind::Box(a) => vec![a.clone()],
            Kind::Mu(..) | Kind::Nu(..) => vec![self.unfold().expect("fixpoint")],
            _ => Vec::new(),
        }
    }

    /// Renames every binder to a fresh name so that binders are pairwise
    /// distinct and disjoint from the free names.
    pub fn rename_apart(&self) -> Formula {
        let mut used: HashSet<Name> = self.free_vars().into_iter().collect();
        rename_rec(self, &mut used, &mut Vec::new())
    }
}

fn rename_rec(f: &Formula, used: &mut HashSet<Name>, env: &mut Vec<(Name, Name)>) -> Formula {
    match f.kind() {
        Kind::Top | Kind::Bottom => f.clone(),
        Kind::Prop(n) => match env.iter().rev().find(|(a, _)| a == n) {
            Some((_, b)) => Formula::new(Kind::Prop(b.clone())),
            None => f.clone(),
        },
        Kind::NegProp(n) => match env.iter().rev().find(|(a, _)| a == n) {
            Some((_, b)) => Formula::new(Kind::NegProp(b.clone())),
            None => f.clone(),
        },
        Kind::Or(a, b) => Formula::or(rename_rec(a, used, env), rename_rec(b, used, env)),
        Kind::And(a, b) => Formula::and(rename_rec(a, used, env), rename_rec(b, used, env)),
        Kind::Dia(a) => Formula::dia(rename_rec(a, used, env)),
        Kind::Box(a) => Formula::boxed(rename_rec(a, used, env)),
        Kind::Mu(x, a) | Kind::Nu(x, a) => {
            let fresh = fresh_name(x, used);
            used.insert(fresh.clone());
            env.push((x.clone(), fresh.clone()));
            let body = rename_rec(a, used, env);
            env.pop();
            let eta = if matches!(f.kind(), Kind::Mu(..)) { Fix::Mu } else { Fix::Nu };
            Formula::fix(eta, fresh, body)
        }
    }
}

/// `base` itself when unused, otherwise `base_1`, `base_2`, ...
pub(crate) fn fresh_name(base: &str, used: &HashSet<Name>) -> Name {
    if !used.contains(base) {
        return base.into();
    }
    let stem = base.split('_').next().filter(|s| !s.is_empty()).unwrap_or(base);
    (1..)
        .map(|i| format!("{stem}_{i}"))
        .find(|c| !used.contains(c.as_str()))
        .expect("infinite supply")
        .into()
}

fn free_into(f: &Formula, bound: &mut Vec<Name>, out: &mut BTreeSet<Name>) {
    match f.kind() {
        Kind::Top | Kind::Bottom => {}
        Kind::Prop(n) | Kind::NegProp(n) => {
            if !bound.contains(n) {
                out.insert(n.clone());
            }
        }
        Kind::Or(a, b) | Kind::And(a, b) => {
            free_into(a, bound, out);
            free_into(b, bound, out);
        }
        Kind::Dia(a) | Kind::Box(a) => free_into(a, bound, out),
        Kind::Mu(x, a) | Kind::Nu(x, a) => {
            bound.push(x.clone());
            free_into(a, bound, out);
            bound.pop();
        }
    }
}

pub(crate) fn occurs_negated_free(f: &Formula, x: &str) -> bool {
    match f.kind() {
        Kind::NegProp(n) => &**n == x,
        Kind::Top | Kind::Bottom | Kind::Prop(_) => false,
        Kind::Or(a, b) | Kind::And(a, b) => occurs_negated_free(a, x) || occurs_negated_free(b, x),
        Kind::Dia(a) | Kind::Box(a) => occurs_negated_free(a, x),
        Kind::Mu(y, a) | Kind::Nu(y, a) => &**y != x && occurs_negated_free(a, x),
    }
}

impl PartialEq for Formula {
    fn eq(&self, other: &Formula) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
            || (self.0.hash == other.0.hash && self.0.size == other.0.size && self.0.kind == other.0.kind)
    }
}

impl Eq for Formula {}

impl Hash for Formula {
    fn hash<H: Hasher>(&self, state: &mut H) {
        state.write_u64(self.0.hash);
    }
}

impl Ord for Formula {
    /// Size first, then structure.
    fn cmp(&self, other: &Formula) -> Ordering {
        if Arc::ptr_eq(&self.0, &other.0) {
            return Ordering::Equal;
        }
        self.0
            .size
            .cmp(&other.0.size)
            .then_with(|| self.kind().tag().cmp(&other.kind().tag()))
            .then_with(|| match (self.kind(), other.kind()) {
                (Kind::Prop(a), Kind::Prop(b)) | (Kind::NegProp(a), Kind::NegProp(b)) => a.cmp(b),
                (Kind::Or(a, b), Kind::Or(c, d)) | (Kind::And(a, b), Kind::And(c, d)) => {
                    a.cmp(c).then_with(|| b.cmp(d))
                }
                (Kind::Dia(a), Kind::Dia(b)) | (Kind::Box(a), Kind::Box(b)) => a.cmp(b),
                (Kind::Mu(x, a), Kind::Mu(y, b)) | (Kind::Nu(x, a), Kind::Nu(y, b)) => {
                    x.cmp(y).then_with(|| a.cmp(b))
                }
                _ => Ordering::Equal,
            })
    }
}

impl PartialOrd for Formula {
    fn partial_cmp(&self, other: &Formula) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

#[derive(Clone, Copy, PartialEq, PartialOrd)]
enum Prec {
    Or,
    And,
    Unary,
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_formula(self, Prec::Or, true, f)
    }
}

/// `last` is set when nothing follows the formula inside its enclosing
/// context, so a binder may extend to the right without parentheses.
fn write_formula(g: &Formula, ctx: Prec, last: bool, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    match g.kind() {
        Kind::Top => f.write_str("true"),
        Kind::Bottom => f.write_str("false"),
        Kind::Prop(n) => f.write_str(n),
        Kind::NegProp(n) => write!(f, "~{n}"),
        Kind::Or(a, b) => {
            let paren = ctx > Prec::Or;
            if paren {
                f.write_str("(")?;
            }
            write_formula(a, Prec::Or, false, f)?;
            f.write_str(" | ")?;
            write_formula(b, Prec::And, last || paren, f)?;
            if paren {
                f.write_str(")")?;
            }
            Ok(())
        }
        Kind::And(a, b) => {
            let paren = ctx > Prec::And;
            if paren {
                f.write_str("(")?;
            }
            write_formula(a, Prec::And, false, f)?;
            f.write_str(" & ")?;
            write_formula(b, Prec::Unary, last || paren, f)?;
            if paren {
                f.write_str(")")?;
            }
            Ok(())
        }
        Kind::Dia(a) => {
            f.write_str("<>")?;
            write_formula(a, Prec::Unary, last, f)
        }
        Kind::Box(a) => {
            f.write_str("[]")?;
            write_formula(a, Prec::Unary, last, f)
        }
        Kind::Mu(x, a) | Kind::Nu(x, a) => {
            let eta = if matches!(g.kind(), Kind::Mu(..)) { "mu" } else { "nu" };
            if !last {
                f.write_str("(")?;
            }
            write!(f, "{eta} {x}. ")?;
            write_formula(a, Prec::Or, true, f)?;
            if !last {
                f.write_str(")")?;
            }
            Ok(())
        }
    }
}

/// The least closure-saturated set containing `seeds`, in discovery order.
pub fn closure<'a>(seeds: impl IntoIterator<Item = &'a Formula>) -> Vec<Formula> {
    let mut seen: HashSet<Formula> = HashSet::new();
    let mut out = Vec::new();
    let mut stack: Vec<Formula> = seeds.into_iter().cloned().collect();
    stack.reverse();
    while let Some(f) = stack.pop() {
        if seen.insert(f.clone()) {
            let succ = f.clos0();
            out.push(f);
            for s in succ.into_iter().rev() {
                if !seen.contains(&s) {
                    stack.push(s);
                }
            }
        }
    }
    out
}

/// Closure as a sorted set.
pub fn closure_set<'a>(seeds: impl IntoIterator<Item = &'a Formula>) -> BTreeSet<Formula> {
    closure(seeds).into_iter().collect()
}

/// A finite presentation of an infinite trace: `prefix` followed by `lp`
/// repeated forever.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceLasso {
    pub prefix: Vec<Formula>,
    pub lp: Vec<Formula>,
}

impl TraceLasso {
    /// Checks that consecutive elements are closure steps.
    pub fn validate(&self) -> Result<(), FormulaError> {
        if self.lp.is_empty() {
            return Err(FormulaError::EmptyLoop);
        }
        let seq: Vec<&Formula> = self.prefix.iter().chain(self.lp.iter()).chain(self.lp.first()).collect();
        for w in seq.windows(2) {
            if !w[0].clos0().contains(w[1]) {
                return Err(FormulaError::BadTraceStep { from: w[0].to_string(), to: w[1].to_string() });
            }
        }
        Ok(())
    }
}

/// Which kind of fixpoint is unfolded infinitely often on the trace.
pub fn classify_trace(t: &TraceLasso) -> Result<Fix, FormulaError> {
    t.validate()?;
    let mu = t.lp.iter().any(|f| matches!(f.kind(), Kind::Mu(..)));
    let nu = t.lp.iter().any(|f| matches!(f.kind(), Kind::Nu(..)));
    match (mu, nu) {
        (true, true) => Err(FormulaError::MixedLoop),
        (true, false) => Ok(Fix::Mu),
        (false, true) => Ok(Fix::Nu),
        (false, false) => Err(FormulaError::NoFixpointOnLoop),
    }
}
