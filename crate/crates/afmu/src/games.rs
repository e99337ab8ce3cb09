//! Finite two-player games with reachability, Büchi, co-Büchi and weak
//! parity conditions, solved with positional strategies.
//!
//! A player who cannot move at one of their own positions loses. For the
//! reachability condition a play is won by Exists as soon as it visits the
//! target; the other conditions judge infinite plays only.

use std::collections::{BTreeMap, BTreeSet};

use petgraph::graph::DiGraph;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Player {
    Exists,
    Forall,
}

impl Player {
    pub fn opponent(self) -> Player {
        match self {
            Player::Exists => Player::Forall,
            Player::Forall => Player::Exists,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Condition {
    /// Exists wins by visiting the set.
    Reachability(BTreeSet<usize>),
    /// Exists wins by visiting the set infinitely often.
    Buchi(BTreeSet<usize>),
    /// Exists wins by visiting the set only finitely often.
    CoBuchi(BTreeSet<usize>),
    /// Exists wins if the priority seen infinitely often is even; the
    /// priority is constant on every strongly connected component.
    WeakParity(Vec<u32>),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GameArena {
    pub moves: Vec<Vec<usize>>,
    pub owner: Vec<Option<Player>>,
    pub initial: usize,
    pub condition: Condition,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GameError {
    #[error("position {0} has no owner but {1} moves")]
    MissingOwner(usize, usize),
    #[error("move {0} -> {1} leaves the arena")]
    BadMove(usize, usize),
    #[error("position {0} is outside the arena")]
    BadPosition(usize),
    #[error("owner and move tables differ in length")]
    Shape,
    #[error("priorities differ inside a strongly connected component ({0} and {1})")]
    NotWeak(usize, usize),
}

/// Winning regions and positional winning strategies for both players.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Solution {
    pub winner: Vec<Player>,
    pub exists_strategy: BTreeMap<usize, usize>,
    pub forall_strategy: BTreeMap<usize, usize>,
}

impl Solution {
    pub fn region(&self, p: Player) -> BTreeSet<usize> {
        (0..self.winner.len()).filter(|&v| self.winner[v] == p).collect()
    }

    pub fn strategy(&self, p: Player) -> &BTreeMap<usize, usize> {
        match p {
            Player::Exists => &self.exists_strategy,
            Player::Forall => &self.forall_strategy,
        }
    }
}

impl GameArena {
    pub fn len(&self) -> usize {
        self.moves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.moves.is_empty()
    }

    /// The owner, with forced positions attributed to Exists.
    pub fn mover(&self, v: usize) -> Player {
        self.owner[v].unwrap_or(Player::Exists)
    }

    pub fn validate(&self) -> Result<(), GameError> {
        let n = self.moves.len();
        if self.owner.len() != n {
            return Err(GameError::Shape);
        }
        if n > 0 && self.initial >= n {
            return Err(GameError::BadPosition(self.initial));
        }
        for (v, ms) in self.moves.iter().enumerate() {
            if ms.len() != 1 && self.owner[v].is_none() {
                return Err(GameError::MissingOwner(v, ms.len()));
            }
            if let Some(&w) = ms.iter().find(|&&w| w >= n) {
                return Err(GameError::BadMove(v, w));
            }
        }
        match &self.condition {
            Condition::Reachability(s) | Condition::Buchi(s) | Condition::CoBuchi(s) => {
                if let Some(&v) = s.iter().find(|&&v| v >= n) {
                    return Err(GameError::BadPosition(v));
                }
            }
            Condition::WeakParity(pr) => {
                if pr.len() != n {
                    return Err(GameError::Shape);
                }
                for scc in sccs(&self.moves) {
                    if let Some(&w) = scc.iter().find(|&&w| pr[w] != pr[scc[0]]) {
                        return Err(GameError::NotWeak(scc[0], w));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("arena serializes")
    }
}

/// Strongly connected components, each sorted, listed with successors' components first.
pub fn sccs(moves: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let mut g: DiGraph<(), ()> = DiGraph::with_capacity(moves.len(), 0);
    let idx: Vec<_> = (0..moves.len()).map(|_| g.add_node(())).collect();
    for (v, ms) in moves.iter().enumerate() {
        for &w in ms {
            g.add_edge(idx[v], idx[w], ());
        }
    }
    petgraph::algo::tarjan_scc(&g)
        .into_iter()
        .map(|c| {
            let mut c: Vec<usize> = c.into_iter().map(|i| i.index()).collect();
            c.sort_unstable();
            c
        })
        .collect()
}

struct Ctx<'a> {
    arena: &'a GameArena,
    preds: Vec<Vec<usize>>,
}

impl<'a> Ctx<'a> {
    fn new(arena: &'a GameArena) -> Ctx<'a> {
        let mut preds = vec![Vec::new(); arena.len()];
        for (v, ms) in arena.moves.iter().enumerate() {
            for &w in ms {
                preds[w].push(v);
            }
        }
        for p in &mut preds {
            p.sort_unstable();
            p.dedup();
        }
        Ctx { arena, preds }
    }

    /// Positions inside `within` from which `p` can force a visit to `target`
    /// (or the opponent getting stuck), with attractor moves for `p`.
    fn attractor(&self, p: Player, target: &[bool], within: &[bool], strat: &mut BTreeMap<usize, usize>) -> Vec<bool> {
        let n = self.arena.len();
        let mut attr = vec![false; n];
        let mut count = vec![0usize; n];
        let mut queue = Vec::new();
        for v in 0..n {
            if !within[v] {
                continue;
            }
            let mut seen = BTreeSet::new();
            count[v] = self.arena.moves[v].iter().filter(|&&w| within[w] && seen.insert(w)).count();
            if target[v] || (self.arena.mover(v) != p && count[v] == 0) {
                attr[v] = true;
                queue.push(v);
            }
        }
        let mut head = 0;
        while head < queue.len() {
            let w = queue[head];
            head += 1;
            for &v in &self.preds[w] {
                if !within[v] || attr[v] {
                    continue;
                }
                if self.arena.mover(v) == p {
                    attr[v] = true;
                    strat.insert(v, w);
                    queue.push(v);
                } else {
                    count[v] -= 1;
                    if count[v] == 0 {
                        attr[v] = true;
                        queue.push(v);
                    }
                }
            }
        }
        attr
    }

    fn first_move_in(&self, v: usize, set: &[bool], within: &[bool]) -> Option<usize> {
        self.arena.moves[v].iter().copied().find(|&w| set[w] && within[w])
    }

    /// Büchi condition for `p`: visit `target` infinitely often.
    fn buchi(&self, p: Player, target: &[bool]) -> (Vec<bool>, BTreeMap<usize, usize>, BTreeMap<usize, usize>) {
        let n = self.arena.len();
        let opp = p.opponent();
        let mut cur = vec![true; n];
        let mut strat_opp = BTreeMap::new();
        let mut strat_p;
        loop {
            let t: Vec<bool> = (0..n)
                .map(|v| {
                    cur[v]
                        && target[v]
                        && !(self.arena.mover(v) == p && self.first_move_in(v, &cur, &cur).is_none())
                })
                .collect();
            strat_p = BTreeMap::new();
            let a = self.attractor(p, &t, &cur, &mut strat_p);
            let trap: Vec<bool> = (0..n).map(|v| cur[v] && !a[v]).collect();
            if !trap.iter().any(|&b| b) {
                for v in 0..n {
                    if t[v] && self.arena.mover(v) == p {
                        if let Some(w) = self.first_move_in(v, &cur, &cur) {
                            strat_p.insert(v, w);
                        }
                    }
                }
                break;
            }
            for v in 0..n {
                if trap[v] && self.arena.mover(v) == opp {
                    if let Some(w) = self.first_move_in(v, &trap, &cur) {
                        strat_opp.insert(v, w);
                    }
                }
            }
            let d = self.attractor(opp, &trap, &cur, &mut strat_opp);
            for v in 0..n {
                if d[v] {
                    cur[v] = false;
                }
            }
        }
        strat_p.retain(|&v, _| self.arena.mover(v) == p && self.arena.owner[v].is_some());
        strat_opp.retain(|&v, _| self.arena.mover(v) == opp && self.arena.owner[v].is_some() && !cur[v]);
        (cur, strat_p, strat_opp)
    }

    fn weak(&self, pr: &[u32]) -> (Vec<bool>, BTreeMap<usize, usize>, BTreeMap<usize, usize>) {
        let n = self.arena.len();
        let mut decided = vec![false; n];
        let mut win_e = vec![false; n];
        let mut se = BTreeMap::new();
        let mut sf = BTreeMap::new();
        for comp in sccs(&self.arena.moves) {
            let in_c: Vec<bool> = {
                let mut m = vec![false; n];
                for &v in &comp {
                    m[v] = true;
                }
                m
            };
            let within: Vec<bool> = (0..n).map(|v| in_c[v] || decided[v]).collect();
            let good = if pr[comp[0]] % 2 == 0 { Player::Exists } else { Player::Forall };
            let bad = good.opponent();
            let bad_won: Vec<bool> = (0..n).map(|v| decided[v] && win_e[v] == (bad == Player::Exists)).collect();
            let mut sbad = BTreeMap::new();
            let attr = self.attractor(bad, &bad_won, &within, &mut sbad);
            let good_won: Vec<bool> = (0..n).map(|v| within[v] && !attr[v]).collect();
            for &v in &comp {
                let wins_e = if attr[v] { bad == Player::Exists } else { good == Player::Exists };
                win_e[v] = wins_e;
                decided[v] = true;
                if self.arena.owner[v].is_none() {
                    continue;
                }
                let m = self.arena.mover(v);
                if attr[v] && m == bad {
                    if let Some(&w) = sbad.get(&v) {
                        if m == Player::Exists { se.insert(v, w) } else { sf.insert(v, w) };
                    }
                } else if !attr[v] && m == good {
                    if let Some(w) = self.first_move_in(v, &good_won, &within) {
                        if m == Player::Exists { se.insert(v, w) } else { sf.insert(v, w) };
                    }
                }
            }
        }
        (win_e, se, sf)
    }
}

/// Solves the game from every position.
pub fn solve(arena: &GameArena) -> Result<Solution, GameError> {
    arena.validate()?;
    let n = arena.len();
    let ctx = Ctx::new(arena);
    let as_mask = |s: &BTreeSet<usize>| {
        let mut m = vec![false; n];
        for &v in s {
            m[v] = true;
        }
        m
    };
    let (win_e, mut se, mut sf) = match &arena.condition {
        Condition::Reachability(t) => {
            let mut se = BTreeMap::new();
            let all = vec![true; n];
            let a = ctx.attractor(Player::Exists, &as_mask(t), &all, &mut se);
            let not_a: Vec<bool> = a.iter().map(|b| !b).collect();
            let mut sf = BTreeMap::new();
            for v in 0..n {
                if !a[v] && arena.mover(v) == Player::Forall && arena.owner[v].is_some() {
                    if let Some(w) = ctx.first_move_in(v, &not_a, &all) {
                        sf.insert(v, w);
                    }
                }
            }
            se.retain(|&v, _| arena.owner[v].is_some());
            (a, se, sf)
        }
        Condition::Buchi(b) => ctx.buchi(Player::Exists, &as_mask(b)),
        Condition::CoBuchi(c) => {
            let (wf, sf, se) = ctx.buchi(Player::Forall, &as_mask(c));
            (wf.iter().map(|b| !b).collect(), se, sf)
        }
        Condition::WeakParity(pr) => ctx.weak(pr),
    };
    se.retain(|&v, _| win_e[v]);
    sf.retain(|&v, _| !win_e[v]);
    let winner = win_e.iter().map(|&b| if b { Player::Exists } else { Player::Forall }).collect();
    Ok(Solution { winner, exists_strategy: se, forall_strategy: sf })
}

/// Does `player` win every play that starts in `region` and follows `strategy`?
pub fn verify_strategy(arena: &GameArena, player: Player, region: &BTreeSet<usize>, strategy: &BTreeMap<usize, usize>) -> bool {
    let n = arena.len();
    if arena.validate().is_err() {
        return false;
    }
    let target: Vec<bool> = match &arena.condition {
        Condition::Reachability(t) | Condition::Buchi(t) | Condition::CoBuchi(t) => {
            let mut m = vec![false; n];
            for &v in t {
                m[v] = true;
            }
            m
        }
        Condition::WeakParity(pr) => pr.iter().map(|p| p % 2 == 0).collect(),
    };
    let reach_stop = matches!(arena.condition, Condition::Reachability(_)) && player == Player::Exists;
    let succ = |v: usize| -> Option<Vec<usize>> {
        if arena.owner[v] == Some(player) {
            let w = *strategy.get(&v)?;
            if !arena.moves[v].contains(&w) {
                return None;
            }
            Some(vec![w])
        } else {
            Some(arena.moves[v].clone())
        }
    };
    let mut seen = vec![false; n];
    let mut stack: Vec<usize> = region.iter().copied().collect();
    let mut g: Vec<Vec<usize>> = vec![Vec::new(); n];
    while let Some(v) = stack.pop() {
        if v >= n || seen[v] {
            if v >= n {
                return false;
            }
            continue;
        }
        seen[v] = true;
        if reach_stop && target[v] {
            continue;
        }
        let Some(ws) = succ(v) else { return false };
        if ws.is_empty() && arena.owner[v] == Some(player) {
            return false;
        }
        if ws.is_empty() && arena.owner[v].is_none() {
            return false;
        }
        for &w in &ws {
            stack.push(w);
        }
        g[v] = ws;
    }
    // Which reachable positions may lie on a cycle the player must avoid?
    let avoid: Vec<bool> = match (&arena.condition, player) {
        (Condition::Reachability(_), Player::Exists) => (0..n).map(|v| seen[v] && !target[v]).collect(),
        (Condition::Reachability(_), Player::Forall) => {
            if (0..n).any(|v| seen[v] && target[v]) {
                return false;
            }
            vec![false; n]
        }
        (Condition::Buchi(_), Player::Exists) | (Condition::WeakParity(_), Player::Exists) => {
            (0..n).map(|v| seen[v] && !target[v]).collect()
        }
        (Condition::Buchi(_), Player::Forall) | (Condition::WeakParity(_), Player::Forall) => {
            return !cycle_through(&g, &seen, &target);
        }
        (Condition::CoBuchi(_), Player::Exists) => return !cycle_through(&g, &seen, &target),
        (Condition::CoBuchi(_), Player::Forall) => (0..n).map(|v| seen[v] && !target[v]).collect(),
    };
    !has_cycle(&g, &avoid)
}

/// Is there a cycle inside the positions marked `within`?
fn has_cycle(g: &[Vec<usize>], within: &[bool]) -> bool {
    let n = g.len();
    let mut out = vec![0usize; n];
    let mut preds = vec![Vec::new(); n];
    for v in 0..n {
        if within[v] {
            for &w in &g[v] {
                if within[w] {
                    out[v] += 1;
                    preds[w].push(v);
                }
            }
        }
    }
    let mut alive = within.to_vec();
    let mut queue: Vec<usize> = (0..n).filter(|&v| within[v] && out[v] == 0).collect();
    while let Some(w) = queue.pop() {
        alive[w] = false;
        for &v in &preds[w] {
            out[v] -= 1;
            if out[v] == 0 {
                queue.push(v);
            }
        }
    }
    alive.iter().any(|&b| b)
}

/// Is there a cycle among `within` positions that passes a `mark` position?
fn cycle_through(g: &[Vec<usize>], within: &[bool], mark: &[bool]) -> bool {
    let moves: Vec<Vec<usize>> = (0..g.len())
        .map(|v| if within[v] { g[v].iter().copied().filter(|&w| within[w]).collect() } else { Vec::new() })
        .collect();
    sccs(&moves).into_iter().any(|c| {
        let nontrivial = c.len() > 1 || moves[c[0]].contains(&c[0]);
        nontrivial && c.iter().any(|&v| mark[v])
    })
}
