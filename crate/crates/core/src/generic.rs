//! Finite approximations of a generic filter: a descending chain of
//! conditions driven by a schedule of density requirements, and the checks
//! run on its union.

use std::collections::BTreeSet;
use std::fmt::{self, Write as _};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::conditions::{extend_below, Condition, ConditionBuilder, Dialect};
use crate::interval_tree::{Interval, IntervalTree};
use crate::ordinal::{Class, Ordinal};
use crate::point::{Level, Point};
use crate::unbounded::UnboundedFn;

pub const SCHEDULE_HEADER: &str = "# sposet schedule v1";

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Requirement {
    /// The point must belong to the condition.
    RealizePoint(Point),
    /// A fresh predecessor of `target` at `level` with column above
    /// `xi_floor`.
    PredecessorBelow {
        target: Point,
        level: Ordinal,
        xi_floor: u32,
    },
}

impl fmt::Display for Requirement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Requirement::RealizePoint(p) => write!(f, "realize {} {}", p.xi, p.level),
            Requirement::PredecessorBelow {
                target,
                level,
                xi_floor,
            } => write!(f, "below {} {} ; {level} ; {xi_floor}", target.xi, target.level),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScheduleParseError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Schedule {
    /// Seed the schedule was generated from; recorded for provenance.
    pub seed: u64,
    pub requirements: Vec<Requirement>,
}

fn parse_point(xi: &str, level: &str) -> Result<Point, String> {
    let xi: u32 = xi.trim().parse().map_err(|_| format!("bad column {xi:?}"))?;
    let level: Level = level.trim().parse().map_err(|e| format!("bad level: {e}"))?;
    Ok(Point::new(level, xi))
}

impl Schedule {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "{SCHEDULE_HEADER}").unwrap();
        writeln!(s, "seed {}", self.seed).unwrap();
        for r in &self.requirements {
            writeln!(s, "{r}").unwrap();
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self, ScheduleParseError> {
        let err = |line: usize, msg: String| ScheduleParseError::Parse { line, msg };
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(n, l)| (n + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty());
        match lines.next() {
            Some((_, l)) if l == SCHEDULE_HEADER => {}
            Some((n, _)) => return Err(err(n, "missing format header".into())),
            None => return Err(err(1, "empty document".into())),
        }
        let mut sch = Schedule::default();
        for (n, l) in lines {
            let (kw, rest) = l.split_once(' ').unwrap_or((l, ""));
            match kw {
                "seed" => sch.seed = rest.trim().parse().map_err(|_| err(n, "bad seed".into()))?,
                "realize" => {
                    let (xi, level) = rest
                        .split_once(' ')
                        .ok_or_else(|| err(n, "expected `realize XI LEVEL`".into()))?;
                    sch.requirements
                        .push(Requirement::RealizePoint(parse_point(xi, level).map_err(|m| err(n, m))?));
                }
                "below" => {
                    let parts: Vec<&str> = rest.split(';').collect();
                    let [tgt, level, floor] = parts[..] else {
                        return Err(err(n, "expected `below XI LEVEL ; LEVEL ; FLOOR`".into()));
                    };
                    let (xi, tl) = tgt
                        .trim()
                        .split_once(' ')
                        .ok_or_else(|| err(n, "expected target `XI LEVEL`".into()))?;
                    sch.requirements.push(Requirement::PredecessorBelow {
                        target: parse_point(xi, tl).map_err(|m| err(n, m))?,
                        level: level
                            .trim()
                            .parse()
                            .map_err(|e| err(n, format!("bad level: {e}")))?,
                        xi_floor: floor.trim().parse().map_err(|_| err(n, "bad floor".into()))?,
                    });
                }
                _ => return Err(err(n, format!("unknown line {kw:?}"))),
            }
        }
        Ok(sch)
    }

    /// `count` predecessors of `target` at each of `levels`.
    pub fn planted(target: Point, levels: &[Ordinal], count: usize) -> Self {
        let mut requirements = vec![Requirement::RealizePoint(target.clone())];
        for level in levels {
            for _ in 0..count {
                requirements.push(Requirement::PredecessorBelow {
                    target: target.clone(),
                    level: level.clone(),
                    xi_floor: 0,
                });
            }
        }
        Schedule {
            seed: 0,
            requirements,
        }
    }

    /// A random schedule of `steps` satisfiable requirements, found by
    /// replaying each candidate.
    pub fn random(
        seed: u64,
        steps: usize,
        dialect: Dialect,
        tree: &IntervalTree,
        f: &UnboundedFn,
    ) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = tree.params();
        let mut cur = Condition::empty(dialect);
        let mut requirements = Vec::new();
        let top_block = params.e_budget.min(6);
        while requirements.len() < steps {
            let mut placed = false;
            for _ in 0..16 {
                let realize_top = cur.is_empty() || rng.gen_bool(0.15);
                let req = if realize_top {
                    Requirement::RealizePoint(Point::top(rng.gen_range(0..params.lambda_w)))
                } else {
                    let target = cur.points().choose(&mut rng).expect("nonempty").clone();
                    let b = rng.gen_range(0..top_block);
                    let (Ok(lo), Ok(hi)) = (tree.eps(b), tree.eps(b + 1)) else {
                        continue;
                    };
                    let Ok(e) = tree.e_set(&Interval::new(lo, hi)) else {
                        continue;
                    };
                    let base = e[rng.gen_range(0..e.len().min(4))].clone();
                    let level = base
                        .checked_add(&Ordinal::nat(rng.gen_range(0..3)))
                        .unwrap_or(base);
                    Requirement::PredecessorBelow {
                        target,
                        level,
                        xi_floor: 0,
                    }
                };
                if let Ok(next) = apply(&cur, &req, tree, f) {
                    cur = next.0;
                    requirements.push(req);
                    placed = true;
                    break;
                }
            }
            if !placed {
                break;
            }
        }
        Schedule { seed, requirements }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Step {
    pub requirement: Requirement,
    /// Points added at this step.
    pub added: Vec<Point>,
    /// The point meeting the requirement.
    pub witness: Point,
}

/// Union of a descending chain of conditions. The union is the last
/// condition; `chain[k]` is the condition after `k` steps.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FinitePoset {
    pub poset: Condition,
    pub chain: Vec<Condition>,
    pub steps: Vec<Step>,
}

impl FinitePoset {
    pub fn from_condition(c: Condition) -> Self {
        FinitePoset {
            poset: c.clone(),
            chain: vec![c],
            steps: Vec::new(),
        }
    }

    /// `(target, level)` pairs the schedule asked predecessors for.
    pub fn targets(&self) -> Vec<(Point, Ordinal)> {
        let mut set = BTreeSet::new();
        for s in &self.steps {
            if let Requirement::PredecessorBelow { target, level, .. } = &s.requirement {
                set.insert((target.clone(), level.clone()));
            }
        }
        set.into_iter().collect()
    }
}

#[derive(Debug, Clone, Error)]
#[error("step {step} ({requirement}) cannot be met: {reason}")]
pub struct ScheduleError {
    pub step: usize,
    pub requirement: Requirement,
    pub reason: String,
    pub partial: Box<FinitePoset>,
}

fn apply(
    cur: &Condition,
    req: &Requirement,
    tree: &IntervalTree,
    f: &UnboundedFn,
) -> Result<(Condition, Point), String> {
    let (next, witness) = match req {
        Requirement::RealizePoint(p) => {
            if cur.contains(p) {
                return Ok((cur.clone(), p.clone()));
            }
            if p.xi >= tree.params().width(&p.level) {
                return Err(format!("column {} exceeds the width of {}", p.xi, p.level));
            }
            if cur.len() >= tree.params().size_cap {
                return Err("size cap exhausted".into());
            }
            let mut b: ConditionBuilder = cur.to_builder();
            b.point(p.clone());
            (b.build().map_err(|e| e.to_string())?, p.clone())
        }
        Requirement::PredecessorBelow {
            target,
            level,
            xi_floor,
        } => extend_below(cur, target, level, *xi_floor, tree).map_err(|e| e.to_string())?,
    };
    match next.validate(tree, f) {
        Ok(v) if v.is_empty() => {}
        Ok(v) => return Err(format!("result invalid: {}", v[0])),
        Err(e) => return Err(e.to_string()),
    }
    if !Condition::leq(&next, cur) {
        return Err("result does not extend the previous condition".into());
    }
    Ok((next, witness))
}

/// Meets the requirements in order, each by one extension of the previous
/// condition.
pub fn run_schedule(
    sch: &Schedule,
    tree: &IntervalTree,
    f: &UnboundedFn,
    dialect: Dialect,
) -> Result<FinitePoset, ScheduleError> {
    let mut out = FinitePoset::from_condition(Condition::empty(dialect));
    for (k, req) in sch.requirements.iter().enumerate() {
        let cur = out.poset.clone();
        match apply(&cur, req, tree, f) {
            Ok((next, witness)) => {
                let added = next.points().iter().filter(|p| !cur.contains(p)).cloned().collect();
                out.steps.push(Step {
                    requirement: req.clone(),
                    added,
                    witness,
                });
                out.chain.push(next.clone());
                out.poset = next;
            }
            Err(reason) => {
                return Err(ScheduleError {
                    step: k,
                    requirement: req.clone(),
                    reason,
                    partial: Box::new(out),
                })
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClauseResult {
    pub clause: String,
    pub pass: bool,
    pub witnesses: Vec<Vec<Point>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredecessorCount {
    pub target: Point,
    pub level: Ordinal,
    pub count: usize,
    pub budget: usize,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SposetReport {
    /// Clauses `1`, `2`, `3` in order.
    pub clauses: Vec<ClauseResult>,
    /// Clause `4`, one entry per targeted pair.
    pub counts: Vec<PredecessorCount>,
}

impl SposetReport {
    pub fn structural_pass(&self) -> bool {
        self.clauses.iter().all(|c| c.pass)
    }

    pub fn budget_pass(&self) -> bool {
        self.counts.iter().all(|c| c.pass)
    }
}

const MAX_WITNESSES: usize = 8;

/// Clause (1): a partial order on points `(level, ξ)` with `ξ` inside the
/// level's width. Clause (2): strict order raises the level. Clause (3): the
/// meet axiom. Clause (4): at least `budget` predecessors at each targeted
/// level below each targeted point.
pub fn sposet_check(t: &FinitePoset, tree: &IntervalTree, budget: usize) -> SposetReport {
    let c = &t.poset;
    let n = c.len();
    let pts = c.points();
    let mut one = Vec::new();
    for i in 0..n {
        if pts[i].xi >= tree.params().width(&pts[i].level) {
            one.push(vec![pts[i].clone()]);
        }
        if !c.le_idx(i, i) {
            one.push(vec![pts[i].clone()]);
        }
        for j in 0..n {
            if i != j && c.le_idx(i, j) && c.le_idx(j, i) {
                one.push(vec![pts[i].clone(), pts[j].clone()]);
            }
            for k in 0..n {
                if c.le_idx(i, j) && c.le_idx(j, k) && !c.le_idx(i, k) {
                    one.push(vec![pts[i].clone(), pts[j].clone(), pts[k].clone()]);
                }
            }
        }
    }
    let mut two = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i != j && c.le_idx(i, j) && pts[i].level >= pts[j].level {
                two.push(vec![pts[i].clone(), pts[j].clone()]);
            }
        }
    }
    let mut three = Vec::new();
    for s in 0..n {
        for tt in s + 1..n {
            let m = c.meet_idx(s, tt);
            for u in 0..n {
                let lower = c.le_idx(u, s) && c.le_idx(u, tt);
                let via = m.iter().any(|&v| c.le_idx(u, v));
                if lower != via {
                    three.push(vec![pts[s].clone(), pts[tt].clone(), pts[u].clone()]);
                }
            }
        }
    }
    let clause = |name: &str, mut w: Vec<Vec<Point>>| {
        let pass = w.is_empty();
        w.truncate(MAX_WITNESSES);
        ClauseResult {
            clause: name.to_string(),
            pass,
            witnesses: w,
        }
    };
    let counts = t
        .targets()
        .into_iter()
        .map(|(target, level)| {
            let lv = Level::Ord(level.clone());
            let count = match c.index_of(&target) {
                Some(ti) => (0..n).filter(|&k| pts[k].level == lv && c.lt_idx(k, ti)).count(),
                None => 0,
            };
            PredecessorCount {
                target,
                level,
                count,
                budget,
                pass: count >= budget,
            }
        })
        .collect();
    SposetReport {
        clauses: vec![clause("1", one), clause("2", two), clause("3", three)],
        counts,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoneVerdict {
    pub level: Ordinal,
    /// Two distinct points of the level with a nonempty meet.
    pub same_level_meet: Option<(Point, Point)>,
    /// `y ≺ x` with `x` one level up and no `z` of this level between.
    pub unfactored: Option<(Point, Point)>,
    pub bone: bool,
}

/// Bone-level verdict for each of `levels`: same-level meets vanish, and
/// every predecessor of a point at the next level factors through this one.
pub fn skeleton_check(t: &FinitePoset, levels: &[Ordinal]) -> Vec<BoneVerdict> {
    let c = &t.poset;
    let pts = c.points();
    let n = c.len();
    levels
        .iter()
        .map(|g| {
            let at = Level::Ord(g.clone());
            let up = Level::Ord(g.succ());
            let here: Vec<usize> = (0..n).filter(|&k| pts[k].level == at).collect();
            let mut same_level_meet = None;
            'outer: for (a, &s) in here.iter().enumerate() {
                for &u in &here[a + 1..] {
                    if !c.meet_idx(s, u).is_empty() {
                        same_level_meet = Some((pts[s].clone(), pts[u].clone()));
                        break 'outer;
                    }
                }
            }
            let mut unfactored = None;
            'x: for x in (0..n).filter(|&k| pts[k].level == up) {
                for y in (0..n).filter(|&y| c.lt_idx(y, x)) {
                    if !here.iter().any(|&z| c.le_idx(y, z) && c.lt_idx(z, x)) {
                        unfactored = Some((pts[y].clone(), pts[x].clone()));
                        break 'x;
                    }
                }
            }
            BoneVerdict {
                level: g.clone(),
                bone: same_level_meet.is_none() && unfactored.is_none(),
                same_level_meet,
                unfactored,
            }
        })
        .collect()
}

/// Sub-top levels holding at least one point.
pub fn sub_top_levels(t: &FinitePoset) -> Vec<Ordinal> {
    t.poset
        .levels()
        .into_iter()
        .filter_map(|l| l.ordinal().cloned())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProbeError {
    #[error("{0} is not at a successor level")]
    NotSuccessor(Point),
    #[error("{0} is not a point of the poset")]
    Missing(Point),
    #[error("{a} is not below {x}")]
    NotBelow { a: Point, x: Point },
    #[error("no point one level below {0} lies above a member of A; probe inconclusive")]
    EmptyU(Point),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TightnessReport {
    pub u: Vec<Point>,
    /// One witness `a_u` per member of `u`, in the same order.
    pub b: Vec<Point>,
    /// Largest `|{b ∈ B : b ⪯ y}|` over `y ≺ x`.
    pub max_count: usize,
    /// Points `y ≺ x` lying above two or more members of `B`.
    pub violations: Vec<(Point, Vec<Point>)>,
    pub pass: bool,
}

/// Counting step of the tightness argument: with `x` at level `α + 1`,
/// `U` = points at `α` below `x` above some `a ∈ A`, `B` = the first such `a`
/// per member of `U`; every `y ≺ x` lies above at most one member of `B`.
pub fn tightness_probe(
    t: &FinitePoset,
    x: &Point,
    a: &[Point],
) -> Result<TightnessReport, ProbeError> {
    let c = &t.poset;
    let Level::Ord(lx) = &x.level else {
        return Err(ProbeError::NotSuccessor(x.clone()));
    };
    let Class::Successor(alpha) = lx.classify() else {
        return Err(ProbeError::NotSuccessor(x.clone()));
    };
    if !c.contains(x) {
        return Err(ProbeError::Missing(x.clone()));
    }
    for p in a {
        if !c.contains(p) || !c.lt(p, x) {
            return Err(ProbeError::NotBelow {
                a: p.clone(),
                x: x.clone(),
            });
        }
    }
    let at = Level::Ord(alpha);
    let mut u = Vec::new();
    let mut b = Vec::new();
    for v in c.points().iter().filter(|v| v.level == at && c.lt(v, x)) {
        if let Some(w) = a.iter().filter(|w| c.le(w, v)).min() {
            u.push(v.clone());
            b.push(w.clone());
        }
    }
    if u.is_empty() {
        return Err(ProbeError::EmptyU(x.clone()));
    }
    let bset: BTreeSet<&Point> = b.iter().collect();
    let mut max_count = 0;
    let mut violations = Vec::new();
    for y in c.points().iter().filter(|y| c.lt(y, x)) {
        let below: Vec<Point> = bset.iter().filter(|w| c.le(w, y)).map(|w| (*w).clone()).collect();
        max_count = max_count.max(below.len());
        if below.len() > 1 {
            violations.push((y.clone(), below));
        }
    }
    Ok(TightnessReport {
        pass: violations.is_empty(),
        u,
        b,
        max_count,
        violations,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelProfile {
    pub levels: Vec<(Ordinal, usize)>,
    pub top: usize,
}

impl fmt::Display for LevelProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let counts: Vec<String> = self.levels.iter().map(|(_, n)| n.to_string()).collect();
        write!(f, "({} | {})", counts.join(","), self.top)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProfileError {
    #[error("meet axiom fails at {0:?}; levels are not meaningful")]
    MeetAxiom(Vec<Point>),
}

/// Point counts per occupied sub-top level, top counted separately.
pub fn cardinal_profile(t: &FinitePoset, tree: &IntervalTree) -> Result<LevelProfile, ProfileError> {
    let report = sposet_check(t, tree, 0);
    let meet = &report.clauses[2];
    if !meet.pass {
        return Err(ProfileError::MeetAxiom(meet.witnesses[0].clone()));
    }
    let mut levels: Vec<(Ordinal, usize)> = Vec::new();
    let mut top = 0;
    for p in t.poset.points() {
        match &p.level {
            Level::Top => top += 1,
            Level::Ord(a) => match levels.last_mut() {
                Some((l, n)) if l == a => *n += 1,
                _ => levels.push((a.clone(), 1)),
            },
        }
    }
    Ok(LevelProfile { levels, top })
}

#[cfg(test)]
mod tests;
