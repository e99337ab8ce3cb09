//! Kripke models, the denotational semantics, the evaluation game and a model
//! checker that runs both and insists they agree.
//!
//! Proposition letters without a valuation are false everywhere.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use fixedbitset::FixedBitSet;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::formula::{closure, is_alternation_free, Formula, Kind, Name};
use crate::games::{self, Condition, GameArena, Player};

pub type WorldSet = FixedBitSet;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KripkeModel {
    pub worlds: Vec<String>,
    pub succ: Vec<Vec<usize>>,
    pub val: BTreeMap<String, WorldSet>,
}

#[derive(Debug, Error)]
pub enum SemanticsError {
    #[error("unknown world {0}")]
    UnknownWorld(String),
    #[error("duplicate world {0}")]
    DuplicateWorld(String),
    #[error("malformed model: {0}")]
    Json(#[from] serde_json::Error),
    #[error("evaluation games need alternation-free formulas: {0}")]
    NotAlternationFree(String),
    #[error("denotation and evaluation game disagree on {formula} at {world}")]
    OracleDisagreement { formula: String, world: String },
}

#[derive(Serialize, Deserialize)]
struct ModelJson {
    worlds: Vec<String>,
    rel: Vec<(String, String)>,
    #[serde(default)]
    val: BTreeMap<String, Vec<String>>,
}

impl KripkeModel {
    /// A model with no edges and an empty valuation.
    pub fn new(n: usize) -> KripkeModel {
        KripkeModel { worlds: (0..n).map(|i| format!("s{i}")).collect(), succ: vec![Vec::new(); n], val: BTreeMap::new() }
    }

    pub fn len(&self) -> usize {
        self.worlds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.worlds.is_empty()
    }

    pub fn add_edge(&mut self, a: usize, b: usize) {
        if !self.succ[a].contains(&b) {
            self.succ[a].push(b);
            self.succ[a].sort_unstable();
        }
    }

    pub fn set_true(&mut self, p: &str, w: usize) {
        let n = self.len();
        self.val.entry(p.to_string()).or_insert_with(|| FixedBitSet::with_capacity(n)).insert(w);
    }

    pub fn holds(&self, p: &str, w: usize) -> bool {
        self.val.get(p).is_some_and(|s| s.contains(w))
    }

    pub fn world(&self, name: &str) -> Result<usize, SemanticsError> {
        self.worlds.iter().position(|w| w == name).ok_or_else(|| SemanticsError::UnknownWorld(name.to_string()))
    }

    pub fn empty_set(&self) -> WorldSet {
        FixedBitSet::with_capacity(self.len())
    }

    pub fn full_set(&self) -> WorldSet {
        let mut s = self.empty_set();
        s.insert_range(..);
        s
    }

    pub fn from_json(text: &str) -> Result<KripkeModel, SemanticsError> {
        let m: ModelJson = serde_json::from_str(text)?;
        let mut idx = HashMap::new();
        for (i, w) in m.worlds.iter().enumerate() {
            if idx.insert(w.clone(), i).is_some() {
                return Err(SemanticsError::DuplicateWorld(w.clone()));
            }
        }
        let get = |w: &String| idx.get(w).copied().ok_or_else(|| SemanticsError::UnknownWorld(w.clone()));
        let mut model = KripkeModel::new(m.worlds.len());
        model.worlds = m.worlds.clone();
        for (a, b) in &m.rel {
            model.add_edge(get(a)?, get(b)?);
        }
        for (p, ws) in &m.val {
            let mut s = model.empty_set();
            for w in ws {
                s.insert(get(w)?);
            }
            model.val.insert(p.clone(), s);
        }
        Ok(model)
    }

    pub fn to_json(&self) -> serde_json::Value {
        let rel = self
            .succ
            .iter()
            .enumerate()
            .flat_map(|(a, ss)| ss.iter().map(move |&b| (a, b)))
            .map(|(a, b)| (self.worlds[a].clone(), self.worlds[b].clone()))
            .collect();
        let val = self
            .val
            .iter()
            .map(|(p, s)| (p.clone(), s.ones().map(|w| self.worlds[w].clone()).collect()))
            .collect();
        serde_json::to_value(ModelJson { worlds: self.worlds.clone(), rel, val }).expect("model serializes")
    }

    fn pre_exists(&self, s: &WorldSet) -> WorldSet {
        let mut out = self.empty_set();
        for (w, ss) in self.succ.iter().enumerate() {
            if ss.iter().any(|&v| s.contains(v)) {
                out.insert(w);
            }
        }
        out
    }

    fn pre_forall(&self, s: &WorldSet) -> WorldSet {
        let mut out = self.empty_set();
        for (w, ss) in self.succ.iter().enumerate() {
            if ss.iter().all(|&v| s.contains(v)) {
                out.insert(w);
            }
        }
        out
    }
}

/// The worlds where `f` holds.
pub fn denote(f: &Formula, m: &KripkeModel) -> WorldSet {
    denote_env(f, m, &mut Vec::new())
}

/// As [`denote`], with an explicit interpretation for some variables; later
/// entries shadow earlier ones.
pub fn denote_env(f: &Formula, m: &KripkeModel, env: &mut Vec<(Name, WorldSet)>) -> WorldSet {
    let letter = |n: &Name, env: &Vec<(Name, WorldSet)>| -> WorldSet {
        match env.iter().rev().find(|(x, _)| x == n) {
            Some((_, s)) => s.clone(),
            None => m.val.get(&**n).cloned().map(|mut s| {
                s.grow(m.len());
                s
            }).unwrap_or_else(|| m.empty_set()),
        }
    };
    match f.kind() {
        Kind::Top => m.full_set(),
        Kind::Bottom => m.empty_set(),
        Kind::Prop(n) => letter(n, env),
        Kind::NegProp(n) => {
            let mut s = letter(n, env);
            s.toggle_range(..);
            s
        }
        Kind::Or(a, b) => {
            let mut s = denote_env(a, m, env);
            s.union_with(&denote_env(b, m, env));
            s
        }
        Kind::And(a, b) => {
            let mut s = denote_env(a, m, env);
            s.intersect_with(&denote_env(b, m, env));
            s
        }
        Kind::Dia(a) => m.pre_exists(&denote_env(a, m, env)),
        Kind::Box(a) => m.pre_forall(&denote_env(a, m, env)),
        Kind::Mu(x, a) | Kind::Nu(x, a) => {
            let mut cur = if matches!(f.kind(), Kind::Mu(..)) { m.empty_set() } else { m.full_set() };
            loop {
                env.push((x.clone(), cur.clone()));
                let next = denote_env(a, m, env);
                env.pop();
                if next == cur {
                    return cur;
                }
                cur = next;
            }
        }
    }
}

/// The approximants `U_0, U_1, ...` of a fixpoint formula up to stabilisation.
pub fn approximants(f: &Formula, m: &KripkeModel) -> Vec<WorldSet> {
    let Some((eta, x, body)) = f.fixpoint() else { return Vec::new() };
    let mut cur = if eta == crate::formula::Fix::Mu { m.empty_set() } else { m.full_set() };
    let mut out = vec![cur.clone()];
    loop {
        let next = denote_env(body, m, &mut vec![(x.clone(), cur.clone())]);
        if next == cur {
            return out;
        }
        out.push(next.clone());
        cur = next;
    }
}

/// The evaluation game of an alternation-free formula on a model.
#[derive(Clone, Debug)]
pub struct EvaluationGame {
    pub formulas: Vec<Formula>,
    pub arena: GameArena,
}

impl EvaluationGame {
    pub fn position(&self, f: &Formula, w: usize, worlds: usize) -> Option<usize> {
        self.formulas.iter().position(|g| g == f).map(|i| i * worlds + w)
    }
}

pub fn evaluation_game(xi: &Formula, m: &KripkeModel) -> Result<EvaluationGame, SemanticsError> {
    if !is_alternation_free(xi) {
        return Err(SemanticsError::NotAlternationFree(xi.to_string()));
    }
    let formulas = closure([xi]);
    let index: HashMap<&Formula, usize> = formulas.iter().enumerate().map(|(i, f)| (f, i)).collect();
    let n = m.len();
    let pos = |f: &Formula, w: usize| index[f] * n + w;
    let total = formulas.len() * n;
    let mut moves = vec![Vec::new(); total];
    let mut owner = vec![None; total];
    for f in &formulas {
        for w in 0..n {
            let v = pos(f, w);
            let (o, ms) = match f.kind() {
                Kind::Top => (Some(Player::Forall), Vec::new()),
                Kind::Bottom => (Some(Player::Exists), Vec::new()),
                Kind::Prop(p) => (Some(if m.holds(p, w) { Player::Forall } else { Player::Exists }), Vec::new()),
                Kind::NegProp(p) => (Some(if m.holds(p, w) { Player::Exists } else { Player::Forall }), Vec::new()),
                Kind::Or(a, b) => (Some(Player::Exists), vec![pos(a, w), pos(b, w)]),
                Kind::And(a, b) => (Some(Player::Forall), vec![pos(a, w), pos(b, w)]),
                Kind::Dia(a) => (Some(Player::Exists), m.succ[w].iter().map(|&t| pos(a, t)).collect()),
                Kind::Box(a) => (Some(Player::Forall), m.succ[w].iter().map(|&t| pos(a, t)).collect()),
                Kind::Mu(..) | Kind::Nu(..) => (None, vec![pos(&f.unfold().expect("fixpoint"), w)]),
            };
            let mut ms = ms;
            ms.dedup();
            owner[v] = if ms.len() == 1 && o.is_some() && matches!(f.kind(), Kind::Mu(..) | Kind::Nu(..)) { None } else { o };
            moves[v] = ms;
        }
    }
    let mut prio = vec![0u32; total];
    for comp in games::sccs(&moves) {
        let nontrivial = comp.len() > 1 || moves[comp[0]].contains(&comp[0]);
        if !nontrivial {
            continue;
        }
        let kinds: BTreeSet<bool> = comp
            .iter()
            .filter_map(|&v| match formulas[v / n.max(1)].kind() {
                Kind::Mu(..) => Some(true),
                Kind::Nu(..) => Some(false),
                _ => None,
            })
            .collect();
        if kinds.len() > 1 {
            return Err(SemanticsError::NotAlternationFree(xi.to_string()));
        }
        let p = if kinds.contains(&true) { 1 } else { 0 };
        for &v in &comp {
            prio[v] = p;
        }
    }
    let initial = if n == 0 { 0 } else { pos(xi, 0) };
    Ok(EvaluationGame { formulas, arena: GameArena { moves, owner, initial, condition: Condition::WeakParity(prio) } })
}

/// Truth of `f` at `w`, computed both denotationally and through the
/// evaluation game.
pub fn model_check(f: &Formula, m: &KripkeModel, w: usize) -> Result<bool, SemanticsError> {
    let by_denotation = denote(f, m).contains(w);
    let game = evaluation_game(f, m)?;
    let sol = games::solve(&game.arena).expect("evaluation games are well formed");
    let v = game.position(f, w, m.len()).expect("root position");
    let by_game = sol.winner[v] == Player::Exists;
    if by_denotation != by_game {
        return Err(SemanticsError::OracleDisagreement { formula: f.to_string(), world: m.worlds[w].clone() });
    }
    Ok(by_denotation)
}

/// Every model with exactly `n` worlds over `letters`, in a fixed order.
pub fn all_models(n: usize, letters: &[String]) -> impl Iterator<Item = KripkeModel> + '_ {
    let edges = n * n;
    let bits = edges + n * letters.len();
    assert!(bits < 63, "too many models to enumerate");
    (0u64..(1u64 << bits)).map(move |code| {
        let mut m = KripkeModel::new(n);
        for e in 0..edges {
            if code >> e & 1 == 1 {
                m.add_edge(e / n, e % n);
            }
        }
        for (i, p) in letters.iter().enumerate() {
            let mut s = m.empty_set();
            for w in 0..n {
                if code >> (edges + i * n + w) & 1 == 1 {
                    s.insert(w);
                }
            }
            m.val.insert(p.clone(), s);
        }
        m
    })
}
