//! Common extensions of two top-free members of a pairwise-equivalent
//! separated family, found by constrained backtracking.
//!
//! The search starts from `X_p ∪ X_q` with the transitive closure of both
//! orders (which is exactly the cross order through the root) and both meet
//! maps. While the default completion fails validation on a repairable meet
//! clause it either adds a fresh point at a level of some `D(I(α))`, placed
//! above root points only and below an `h`-invariant up-set, or enlarges the
//! up-set of an existing fresh point. Levels are tried in increasing order.

use std::collections::{BTreeSet, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::stamp::{EquivalenceStamp, StampError};
use super::Bijection;
use crate::conditions::{Clause, Condition, ConditionBuilder, Dialect, ValidateError, Violation};
use crate::interval_tree::IntervalTree;
use crate::ordinal::Ordinal;
use crate::point::{Level, Point};
use crate::unbounded::UnboundedFn;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EtaError {
    #[error("amalgamation below the top needs top-free kappa conditions")]
    NotTopFree,
    #[error("h does not map the first condition onto the second fixing the root")]
    BadBijection,
    #[error("{0} and its image carry different interval tags")]
    NotEquivalent(Point),
    #[error("search exhausted after {nodes} nodes; first unsatisfiable constraint: {constraint}")]
    SearchExhausted {
        nodes: usize,
        partial: Box<Condition>,
        constraint: String,
    },
    #[error(transparent)]
    Stamp(#[from] StampError),
    #[error(transparent)]
    Validate(#[from] ValidateError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EtaOptions {
    /// Maximal number of fresh points; defaults to `|X_p ∖ root|`, the size
    /// of the domain of the adequate bijection onto the fresh points.
    pub max_fresh: Option<usize>,
    pub node_budget: usize,
}

impl Default for EtaOptions {
    fn default() -> Self {
        EtaOptions {
            max_fresh: None,
            node_budget: 20_000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EtaAmalgam {
    pub r: Condition,
    pub fresh: Vec<Point>,
    pub gamma: Ordinal,
    /// Candidate fresh levels, increasing.
    pub levels: Vec<Ordinal>,
    pub nodes: usize,
}

/// Verifies `(R1)` and `(R2)(a)–(d)` plus `r ≤ p, q` for a candidate `r`
/// whose points outside `X_p ∪ X_q` are `fresh`. Returns the failed clauses.
pub fn check_r_contract(
    p: &Condition,
    q: &Condition,
    h: &Bijection,
    r: &Condition,
    gamma: &Ordinal,
) -> Vec<String> {
    let mut out = Vec::new();
    if !Condition::leq(r, p) {
        out.push("r does not extend p".to_string());
    }
    if !Condition::leq(r, q) {
        out.push("r does not extend q".to_string());
    }
    if !out.is_empty() {
        return out;
    }
    let fresh: Vec<&Point> = r.points().iter().filter(|x| !p.contains(x) && !q.contains(x)).collect();
    let shared: Vec<&Point> = p.points().iter().filter(|x| q.contains(x)).collect();
    for y in &fresh {
        if y.level >= Level::Ord(gamma.clone()) {
            out.push(format!("R1: fresh {y} not below γ = {gamma}"));
        }
        for s in p.points() {
            let hs = h.apply(s);
            if r.lt(y, s) != r.lt(y, &hs) {
                out.push(format!("R2a: {y} against {s} and {hs}"));
            }
            if r.lt(s, y) != r.lt(&hs, y) {
                out.push(format!("R2b: {s} and {hs} against {y}"));
            }
        }
        for s in p.points().iter().chain(q.points()) {
            if r.lt(s, y) && !shared.iter().any(|w| r.le(s, w) && r.lt(w, y)) {
                out.push(format!("R2c: {s} below {y} without a root point between"));
            }
        }
    }
    for s in p.points().iter().filter(|x| !q.contains(x)) {
        for t in q.points().iter().filter(|x| !p.contains(x)) {
            let up = shared.iter().any(|u| p.lt(s, u) && q.lt(u, t));
            if r.lt(s, t) != up {
                out.push(format!("R2d: {s} against {t}"));
            }
            let down = shared.iter().any(|u| q.lt(t, u) && p.lt(u, s));
            if r.lt(t, s) != down {
                out.push(format!("R2d: {t} against {s}"));
            }
        }
    }
    out
}

#[derive(Clone)]
struct State {
    b: ConditionBuilder,
    fresh: Vec<Point>,
}

impl State {
    fn key(&self) -> String {
        let r = self.b.build().expect("declared");
        let rel: Vec<(usize, usize)> = r.strict_pairs();
        format!("{:?}|{:?}", r.points(), rel)
    }
}

struct Search<'a> {
    p: &'a Condition,
    q: &'a Condition,
    h: &'a Bijection,
    hinv: Bijection,
    root: BTreeSet<Point>,
    tree: &'a IntervalTree,
    f: &'a UnboundedFn,
    gamma: Ordinal,
    levels: Vec<Ordinal>,
    max_fresh: usize,
    budget: usize,
    nodes: usize,
    seen: HashSet<String>,
    first_failure: Option<String>,
    best_partial: Option<Condition>,
}

enum Outcome {
    Found(State, Condition),
    Dead(String),
}

impl Search<'_> {
    fn partner(&self, x: &Point) -> Option<Point> {
        if let Some(y) = self.h.get(x) {
            Some(y.clone())
        } else {
            self.hinv.get(x).cloned()
        }
    }

    /// Up-closure of `gens` in `r` that also contains the `h`-partner of
    /// every member.
    fn invariant_upset(&self, r: &Condition, gens: &[Point]) -> BTreeSet<Point> {
        let mut set: BTreeSet<Point> = BTreeSet::new();
        let mut todo: Vec<Point> = gens.to_vec();
        while let Some(x) = todo.pop() {
            if !set.insert(x.clone()) {
                continue;
            }
            for y in r.points() {
                if r.lt(&x, y) && !set.contains(y) {
                    todo.push(y.clone());
                }
            }
            if let Some(y) = self.partner(&x) {
                if !set.contains(&y) {
                    todo.push(y);
                }
            }
        }
        set
    }

    fn fresh_column(&self, st: &State, level: &Ordinal) -> Option<Point> {
        (0..self.tree.params().kappa_w)
            .map(|xi| Point::new(level.clone(), xi))
            .find(|x| !st.b.has_point(x))
    }

    fn run(&mut self, st: State) -> Outcome {
        self.nodes += 1;
        if self.nodes > self.budget {
            return Outcome::Dead("node budget exhausted".into());
        }
        if !self.seen.insert(st.key()) {
            return Outcome::Dead("repeated state".into());
        }
        let r = st.b.build().expect("declared");
        let violations = match r.validate(self.tree, self.f) {
            Ok(v) => v,
            Err(e) => return Outcome::Dead(e.to_string()),
        };
        if violations.is_empty() {
            let issues = check_r_contract(self.p, self.q, self.h, &r, &self.gamma);
            return match issues.into_iter().next() {
                None => Outcome::Found(st, r),
                Some(i) => Outcome::Dead(i),
            };
        }
        if self.best_partial.is_none() {
            self.best_partial = Some(r.clone());
        }
        let Some(v) = violations.iter().find(|v| self.repairable(v)) else {
            let why = violations[0].to_string();
            self.first_failure.get_or_insert(why.clone());
            return Outcome::Dead(why);
        };
        let mut last = v.to_string();
        for child in self.repairs(&st, &r, v) {
            match self.run(child) {
                Outcome::Found(s, r) => return Outcome::Found(s, r),
                Outcome::Dead(why) => last = why,
            }
            if self.nodes > self.budget {
                break;
            }
        }
        Outcome::Dead(last)
    }

    fn repairable(&self, v: &Violation) -> bool {
        matches!(v.clause, Clause::MeetArity | Clause::OrbitMeet | Clause::MeetAxiom)
    }

    fn repairs(&self, st: &State, r: &Condition, v: &Violation) -> Vec<State> {
        let mut out = Vec::new();
        let (a, b) = (&v.points[0], &v.points[1]);
        let is_fresh = |x: &Point| st.fresh.contains(x);
        if v.clause == Clause::MeetAxiom && v.points.len() >= 3 {
            // a fresh common lower bound not below the prescribed meet: lift
            // it under the meet
            let x = &v.points[2];
            if is_fresh(x) {
                for m in &v.points[3..] {
                    if x.level < m.level {
                        out.push(self.with_upset(st, r, x, std::slice::from_ref(m)));
                    }
                }
            }
            return out;
        }
        // lower-bound sets with one or more maximal elements
        let lower: Vec<&Point> = r.points().iter().filter(|x| r.le(x, a) && r.le(x, b)).collect();
        let maximal: Vec<Point> = lower
            .iter()
            .filter(|x| !lower.iter().any(|y| r.lt(x, y)))
            .map(|x| (*x).clone())
            .collect();
        // lift a fresh maximal element above the other (root) maximal
        // elements, or add a fresh point above all of them
        for z in maximal.iter().filter(|z| is_fresh(z)) {
            let others: Vec<Point> = maximal.iter().filter(|o| *o != z).cloned().collect();
            if others.iter().all(|o| self.root.contains(o) && o.level < z.level) {
                out.push(self.with_downset(st, z, &others));
            }
        }
        if maximal.iter().any(|m| !self.root.contains(m) && !is_fresh(m)) {
            return out;
        }
        let floor = maximal.iter().map(|m| m.level.clone()).max();
        let cap = a.level.clone().min(b.level.clone());
        for beta in &self.levels {
            if st.fresh.len() >= self.max_fresh {
                break;
            }
            let lb = Level::Ord(beta.clone());
            if floor.as_ref().is_some_and(|f| &lb <= f) || lb >= cap {
                continue;
            }
            let Some(y) = self.fresh_column(st, beta) else {
                continue;
            };
            let mut next = st.clone();
            next.b.point(y.clone());
            next.fresh.push(y.clone());
            for m in &maximal {
                next.b.relate(m.clone(), y.clone());
            }
            let ups = self.invariant_upset(r, &[a.clone(), b.clone()]);
            if ups.iter().any(|u| u.level <= lb) {
                continue;
            }
            for u in ups {
                next.b.relate(y.clone(), u);
            }
            out.push(next);
        }
        out
    }

    fn with_upset(&self, st: &State, r: &Condition, z: &Point, gens: &[Point]) -> State {
        let mut next = st.clone();
        for u in self.invariant_upset(r, gens) {
            next.b.relate(z.clone(), u);
        }
        next
    }

    fn with_downset(&self, st: &State, z: &Point, below: &[Point]) -> State {
        let mut next = st.clone();
        for w in below {
            next.b.relate(w.clone(), z.clone());
        }
        next
    }
}

/// Searches for `r ≤ p, q` satisfying `(R1)`–`(R2)`. `h: X_p → X_q` is the
/// family bijection and `stamp` the tags relative to the family root.
#[allow(clippy::too_many_arguments)]
pub fn amalgamate_eta(
    p: &Condition,
    q: &Condition,
    h: &Bijection,
    stamp: &EquivalenceStamp,
    tree: &IntervalTree,
    f: &UnboundedFn,
    opts: &EtaOptions,
) -> Result<EtaAmalgam, EtaError> {
    for c in [p, q] {
        if c.dialect() != Dialect::Kappa || c.points().iter().any(|x| x.is_top()) {
            return Err(EtaError::NotTopFree);
        }
    }
    let dom: BTreeSet<&Point> = h.domain().collect();
    let img: BTreeSet<Point> = h.pairs().map(|(_, y)| y.clone()).collect();
    if dom != p.points().iter().collect::<BTreeSet<_>>()
        || img != q.points().iter().cloned().collect::<BTreeSet<_>>()
    {
        return Err(EtaError::BadBijection);
    }
    let root: BTreeSet<Point> = p.points().iter().filter(|x| q.contains(x)).cloned().collect();
    let free_points = p.len() - root.len();
    if root.iter().any(|x| &h.apply(x) != x) {
        return Err(EtaError::BadBijection);
    }
    for s in p.points() {
        if stamp.tag(&s.level, tree)? != stamp.tag(&h.apply(s).level, tree)? {
            return Err(EtaError::NotEquivalent(s.clone()));
        }
    }
    let gamma = stamp.gamma(p.points(), tree)?;
    let root_levels: BTreeSet<&Level> = root.iter().map(|x| &x.level).collect();
    let free_levels: BTreeSet<&Level> = p
        .points()
        .iter()
        .map(|x| &x.level)
        .filter(|l| !root_levels.contains(l))
        .collect();
    let mut levels: BTreeSet<Ordinal> = BTreeSet::new();
    for l in &free_levels {
        levels.extend(stamp.d_of(l, tree)?);
    }
    let levels: Vec<Ordinal> = levels.into_iter().collect();

    let mut b = ConditionBuilder::new(Dialect::Kappa);
    for c in [p, q] {
        for x in c.points() {
            b.point(x.clone());
        }
        for (i, j) in c.strict_pairs() {
            b.relate(c.points()[i].clone(), c.points()[j].clone());
        }
        for (i, j, v) in c.meet_entries() {
            b.meet(
                &c.points()[i],
                &c.points()[j],
                v.iter().map(|&k| c.points()[k].clone()),
            );
        }
    }
    let mut search = Search {
        p,
        q,
        h,
        hinv: h.inverse(),
        root,
        tree,
        f,
        gamma: gamma.clone(),
        levels: levels.clone(),
        max_fresh: opts.max_fresh.unwrap_or(free_points),
        budget: opts.node_budget,
        nodes: 0,
        seen: HashSet::new(),
        first_failure: None,
        best_partial: None,
    };
    let start = State { b, fresh: Vec::new() };
    match search.run(start.clone()) {
        Outcome::Found(st, r) => Ok(EtaAmalgam {
            r,
            fresh: st.fresh,
            gamma,
            levels,
            nodes: search.nodes,
        }),
        Outcome::Dead(why) => {
            let constraint = search.first_failure.take().unwrap_or(why);
            let partial = search
                .best_partial
                .take()
                .unwrap_or_else(|| start.b.build().expect("declared"));
            Err(EtaError::SearchExhausted {
                nodes: search.nodes,
                partial: Box::new(partial),
                constraint,
            })
        }
    }
}
