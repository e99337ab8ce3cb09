//! Seeded random instances: guarded alternation-free formulas, valid
//! implications, Kripke models and game arenas.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::formula::{closure, Fix, Formula, Kind};
use crate::games::{sccs, Condition, GameArena, Player};
use crate::semantics::KripkeModel;

/// Shape parameters for [`formula`].
#[derive(Clone, Debug)]
pub struct FormulaConfig {
    pub letters: Vec<String>,
    /// Maximal nesting depth of connectives.
    pub depth: usize,
    /// Formulas with a larger closure are rejected and redrawn.
    pub max_closure: usize,
    /// Probability of a fixpoint binder at an inner node.
    pub fixpoint_rate: f64,
}

impl FormulaConfig {
    pub fn new(letters: &[&str], depth: usize, max_closure: usize) -> FormulaConfig {
        FormulaConfig { letters: letters.iter().map(|s| s.to_string()).collect(), depth, max_closure, fixpoint_rate: 0.3 }
    }
}

struct Scope {
    var: String,
    eta: Fix,
    guarded: bool,
}

struct Gen<'a, R> {
    rng: &'a mut R,
    cfg: &'a FormulaConfig,
    next_var: usize,
}

impl<R: Rng> Gen<'_, R> {
    fn leaf(&mut self, env: &[Scope]) -> Formula {
        let usable: Vec<&Scope> = env.iter().filter(|s| s.guarded).collect();
        if !usable.is_empty() && self.rng.gen_bool(0.5) {
            return Formula::prop(&usable.choose(self.rng).expect("nonempty").var);
        }
        match self.rng.gen_range(0..10) {
            0 => Formula::top(),
            1 => Formula::bottom(),
            k => {
                let p = self.cfg.letters.choose(self.rng).expect("letters");
                if k % 2 == 0 {
                    Formula::prop(p)
                } else {
                    Formula::neg_prop(p)
                }
            }
        }
    }

    fn node(&mut self, depth: usize, env: &mut Vec<Scope>) -> Formula {
        if depth == 0 || self.rng.gen_bool(0.15) {
            return self.leaf(env);
        }
        if self.rng.gen_bool(self.cfg.fixpoint_rate) {
            let eta = if self.rng.gen_bool(0.5) { Fix::Mu } else { Fix::Nu };
            let var = format!("x{}", self.next_var);
            self.next_var += 1;
            // Variables of the other kind are hidden, which keeps the result
            // alternation-free.
            let (keep, hidden): (Vec<Scope>, Vec<Scope>) = std::mem::take(env).into_iter().partition(|s| s.eta == eta);
            *env = keep;
            env.push(Scope { var: var.clone(), eta, guarded: false });
            let body = self.node(depth - 1, env);
            env.pop();
            env.extend(hidden);
            return Formula::fix(eta, var.as_str().into(), body);
        }
        match self.rng.gen_range(0..4) {
            0 => Formula::or(self.node(depth - 1, env), self.node(depth - 1, env)),
            1 => Formula::and(self.node(depth - 1, env), self.node(depth - 1, env)),
            k => {
                let saved: Vec<bool> = env.iter().map(|s| s.guarded).collect();
                env.iter_mut().for_each(|s| s.guarded = true);
                let a = self.node(depth - 1, env);
                for (s, g) in env.iter_mut().zip(saved) {
                    s.guarded = g;
                }
                if k == 2 {
                    Formula::dia(a)
                } else {
                    Formula::boxed(a)
                }
            }
        }
    }
}

/// A closed, tidy, guarded and alternation-free formula.
pub fn formula<R: Rng>(rng: &mut R, cfg: &FormulaConfig) -> Formula {
    loop {
        let mut g = Gen { rng: &mut *rng, cfg, next_var: 0 };
        let f = g.node(cfg.depth, &mut Vec::new());
        if closure([&f]).len() <= cfg.max_closure {
            return f;
        }
    }
}

/// Replaces the `i`-th subformula occurrence (preorder) by `edit` of it.
fn rewrite_at(f: &Formula, i: &mut usize, edit: &mut impl FnMut(&Formula) -> Formula) -> Formula {
    if *i == 0 {
        *i = usize::MAX;
        return edit(f);
    }
    *i -= 1;
    match f.kind() {
        Kind::Or(a, b) => {
            let a = rewrite_at(a, i, edit);
            Formula::or(a, rewrite_at(b, i, edit))
        }
        Kind::And(a, b) => {
            let a = rewrite_at(a, i, edit);
            Formula::and(a, rewrite_at(b, i, edit))
        }
        Kind::Dia(a) => Formula::dia(rewrite_at(a, i, edit)),
        Kind::Box(a) => Formula::boxed(rewrite_at(a, i, edit)),
        Kind::Mu(x, a) => Formula::fix(Fix::Mu, x.clone(), rewrite_at(a, i, edit)),
        Kind::Nu(x, a) => Formula::fix(Fix::Nu, x.clone(), rewrite_at(a, i, edit)),
        _ => f.clone(),
    }
}

/// Kinds of validity-preserving weakening steps.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Weakening {
    /// `g` becomes `g | chi` for a fresh closed `chi`.
    Disjunct,
    /// `g & h` becomes `g` or `h`.
    Conjunct,
    /// `[]g` becomes `[](g | chi)`.
    BoxRelax,
}

/// Applies one weakening step at a random occurrence. Every context of a
/// formula in negation normal form is monotone, so `f -> result` is valid.
pub fn weaken<R: Rng>(rng: &mut R, f: &Formula, chi_cfg: &FormulaConfig) -> (Formula, Weakening) {
    let kind = *[Weakening::Disjunct, Weakening::Conjunct, Weakening::BoxRelax].choose(rng).expect("kinds");
    let wanted = |g: &Formula| match kind {
        Weakening::Disjunct => true,
        Weakening::Conjunct => matches!(g.kind(), Kind::And(..)),
        Weakening::BoxRelax => matches!(g.kind(), Kind::Box(..)),
    };
    let mut candidates = Vec::new();
    let mut k = 0;
    f.visit(&mut |g| {
        if wanted(g) {
            candidates.push(k);
        }
        k += 1;
    });
    let Some(&target) = candidates.choose(rng) else {
        return (Formula::or(f.clone(), formula(rng, chi_cfg)).rename_apart(), Weakening::Disjunct);
    };
    let chi = formula(rng, chi_cfg);
    let left = rng.gen_bool(0.5);
    let mut edit = |g: &Formula| match (kind, g.kind()) {
        (Weakening::Conjunct, Kind::And(a, b)) => {
            if left {
                a.clone()
            } else {
                b.clone()
            }
        }
        (Weakening::BoxRelax, Kind::Box(a)) => Formula::boxed(Formula::or(a.clone(), chi.clone())),
        _ => Formula::or(g.clone(), chi.clone()),
    };
    let mut i = target;
    (rewrite_at(f, &mut i, &mut edit).rename_apart(), kind)
}

/// A valid implication `phi -> psi` where `psi` is `phi` after `steps`
/// weakenings; `chi` formulas draw on `chi_cfg`'s letters.
pub fn valid_implication<R: Rng>(rng: &mut R, cfg: &FormulaConfig, chi_cfg: &FormulaConfig, steps: usize) -> (Formula, Formula) {
    let phi = formula(rng, cfg);
    let mut psi = phi.clone();
    for _ in 0..steps {
        psi = weaken(rng, &psi, chi_cfg).0;
    }
    (phi, psi)
}

/// A model on `n` worlds where each edge is present with probability `p`.
pub fn model<R: Rng>(rng: &mut R, n: usize, letters: &[&str], p: f64) -> KripkeModel {
    let mut m = KripkeModel::new(n);
    for a in 0..n {
        for b in 0..n {
            if rng.gen_bool(p) {
                m.add_edge(a, b);
            }
        }
    }
    for l in letters {
        for w in 0..n {
            if rng.gen_bool(0.5) {
                m.set_true(l, w);
            }
        }
    }
    m
}

/// Winning conditions for [`arena`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConditionKind {
    Reachability,
    Buchi,
    CoBuchi,
    WeakParity,
}

/// A random arena with `n` positions and out-degree between 0 and 3.
pub fn arena<R: Rng>(rng: &mut R, n: usize, kind: ConditionKind) -> GameArena {
    let mut moves = Vec::with_capacity(n);
    let mut owner = Vec::with_capacity(n);
    for _ in 0..n {
        let k = if rng.gen_bool(0.05) { 0 } else { rng.gen_range(1..=3) };
        let mut ms: Vec<usize> = (0..k).map(|_| rng.gen_range(0..n)).collect();
        ms.sort_unstable();
        ms.dedup();
        let o = if ms.len() == 1 && rng.gen_bool(0.3) {
            None
        } else if rng.gen_bool(0.5) {
            Some(Player::Exists)
        } else {
            Some(Player::Forall)
        };
        moves.push(ms);
        owner.push(o);
    }
    let set: BTreeSet<usize> = (0..n).filter(|_| rng.gen_bool(0.3)).collect();
    let condition = match kind {
        ConditionKind::Reachability => Condition::Reachability(set),
        ConditionKind::Buchi => Condition::Buchi(set),
        ConditionKind::CoBuchi => Condition::CoBuchi(set),
        ConditionKind::WeakParity => {
            let mut pr = vec![0; n];
            for scc in sccs(&moves) {
                let p = rng.gen_range(0..4);
                for v in scc {
                    pr[v] = p;
                }
            }
            Condition::WeakParity(pr)
        }
    };
    GameArena { moves, owner, initial: 0, condition }
}
