//! Guardedness and the alternation-free fragment.

use std::collections::BTreeSet;

use super::{Fix, Formula, Kind, Name};

/// Does `x` occur free in `f` outside the scope of every modality?
fn unguarded_in(f: &Formula, x: &str) -> bool {
    match f.kind() {
        Kind::Prop(n) | Kind::NegProp(n) => &**n == x,
        Kind::Top | Kind::Bottom | Kind::Dia(_) | Kind::Box(_) => false,
        Kind::Or(a, b) | Kind::And(a, b) => unguarded_in(a, x) || unguarded_in(b, x),
        Kind::Mu(y, a) | Kind::Nu(y, a) => &**y != x && unguarded_in(a, x),
    }
}

/// Every bound variable occurs under a modality inside its binder's body.
pub fn is_guarded(f: &Formula) -> bool {
    let mut ok = true;
    f.visit(&mut |g| {
        if let Some((_, x, b)) = g.fixpoint() {
            if unguarded_in(b, x) {
                ok = false;
            }
        }
    });
    ok
}

/// An equivalent guarded formula.
///
/// Inner fixpoints are guarded first; unguarded occurrences of a variable that
/// sit inside an inner fixpoint are exposed by unfolding it, after which they
/// are replaced by false (for mu) or true (for nu).
pub fn guard(f: &Formula) -> Formula {
    if is_guarded(f) {
        return f.clone();
    }
    guard_rec(f).rename_apart()
}

fn guard_rec(f: &Formula) -> Formula {
    match f.kind() {
        Kind::Top | Kind::Bottom | Kind::Prop(_) | Kind::NegProp(_) => f.clone(),
        Kind::Or(a, b) => Formula::or(guard_rec(a), guard_rec(b)),
        Kind::And(a, b) => Formula::and(guard_rec(a), guard_rec(b)),
        Kind::Dia(a) => Formula::dia(guard_rec(a)),
        Kind::Box(a) => Formula::boxed(guard_rec(a)),
        Kind::Mu(x, a) | Kind::Nu(x, a) => {
            let eta = if matches!(f.kind(), Kind::Mu(..)) { Fix::Mu } else { Fix::Nu };
            let body = eliminate(&guard_rec(a), x, eta);
            Formula::fix(eta, x.clone(), body)
        }
    }
}

fn eliminate(f: &Formula, x: &str, eta: Fix) -> Formula {
    match f.kind() {
        Kind::Prop(n) if &**n == x => match eta {
            Fix::Mu => Formula::bottom(),
            Fix::Nu => Formula::top(),
        },
        Kind::Top | Kind::Bottom | Kind::Prop(_) | Kind::NegProp(_) | Kind::Dia(_) | Kind::Box(_) => f.clone(),
        Kind::Or(a, b) => Formula::or(eliminate(a, x, eta), eliminate(b, x, eta)),
        Kind::And(a, b) => Formula::and(eliminate(a, x, eta), eliminate(b, x, eta)),
        Kind::Mu(..) | Kind::Nu(..) => {
            if unguarded_in(f, x) {
                eliminate(&f.unfold().expect("fixpoint"), x, eta)
            } else {
                f.clone()
            }
        }
    }
}

/// Scoping criterion: no free occurrence of the variable of an eta-binder
/// lies inside a subformula headed by the dual binder.
pub fn is_af_scoping(f: &Formula) -> bool {
    let mut ok = true;
    f.visit(&mut |g| {
        if !ok {
            return;
        }
        if let Some((eta, x, body)) = g.fixpoint() {
            body.visit(&mut |h| {
                if let Some((theta, _, _)) = h.fixpoint() {
                    if theta != eta && h.free_vars().contains(x) {
                        ok = false;
                    }
                }
            });
        }
    });
    ok
}

/// Inductive membership in the alternation-free fragment.
pub fn is_af_inductive(f: &Formula) -> bool {
    match f.kind() {
        Kind::Top | Kind::Bottom | Kind::Prop(_) | Kind::NegProp(_) => true,
        Kind::Or(a, b) | Kind::And(a, b) => is_af_inductive(a) && is_af_inductive(b),
        Kind::Dia(a) | Kind::Box(a) => is_af_inductive(a),
        Kind::Mu(x, a) => in_theta(a, Fix::Mu, &BTreeSet::from([x.clone()])),
        Kind::Nu(x, a) => in_theta(a, Fix::Nu, &BTreeSet::from([x.clone()])),
    }
}

/// Membership in the noetherian `eta`-fragment over `q`.
pub fn in_theta(f: &Formula, eta: Fix, q: &BTreeSet<Name>) -> bool {
    if f.free_vars().is_disjoint(q) {
        return is_af_inductive(f);
    }
    match f.kind() {
        Kind::Top | Kind::Bottom => true,
        Kind::Prop(n) => q.contains(n),
        Kind::NegProp(_) => false,
        Kind::Or(a, b) | Kind::And(a, b) => in_theta(a, eta, q) && in_theta(b, eta, q),
        Kind::Dia(a) | Kind::Box(a) => in_theta(a, eta, q),
        Kind::Mu(x, a) | Kind::Nu(x, a) => {
            let theta = if matches!(f.kind(), Kind::Mu(..)) { Fix::Mu } else { Fix::Nu };
            if theta != eta {
                return false;
            }
            let mut q2 = q.clone();
            q2.insert(x.clone());
            in_theta(a, eta, &q2)
        }
    }
}

/// Both criteria; they are required to agree.
pub fn is_alternation_free(f: &Formula) -> bool {
    let a = is_af_inductive(f);
    debug_assert_eq!(a, is_af_scoping(f), "alternation-freeness criteria disagree on {f}");
    a
}
