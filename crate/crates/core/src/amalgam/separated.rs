//! Separated families: Δ-system root, per-level disjointness and adequate
//! structure-preserving bijections between members.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::delta::delta_root;
use super::stamp::{EquivalenceStamp, StampError, Tag};
use super::Bijection;
use crate::conditions::{Condition, Dialect};
use crate::interval_tree::IntervalTree;
use crate::ordinal::Ordinal;
use crate::point::{Level, Point};

/// A violated clause of adequacy or separatedness.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeparationIssue {
    pub clause: String,
    pub members: Vec<usize>,
    pub points: Vec<Point>,
    pub detail: String,
}

impl fmt::Display for SeparationIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (members {:?}): {}", self.clause, self.members, self.detail)
    }
}

fn issue(clause: &str, members: &[usize], points: &[&Point], detail: String) -> SeparationIssue {
    SeparationIssue {
        clause: clause.to_string(),
        members: members.to_vec(),
        points: points.iter().map(|p| (*p).clone()).collect(),
        detail,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RefineError {
    #[error("family is empty")]
    Empty,
    #[error("members mix dialects")]
    MixedDialects,
    #[error("largest separated subfamily has {best} members, target is {target} ({reason})")]
    Infeasible {
        target: usize,
        best: usize,
        reason: String,
    },
    #[error("constructed family violates {}", .0.first().map(|i| i.to_string()).unwrap_or_default())]
    ClauseViolation(Vec<SeparationIssue>),
    #[error(transparent)]
    Stamp(#[from] StampError),
}

/// A separated family with its root and the bijections `h_{0,k}` from the
/// first member; `h_{p,q} = h_{0,q} ∘ h_{0,p}⁻¹`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeparatedFamily {
    pub members: Vec<Condition>,
    pub root: Vec<Point>,
    from_first: Vec<Bijection>,
    /// Positions of the members in the family they were drawn from.
    pub source: Vec<usize>,
    /// Whether pairwise equivalence was established.
    pub equivalent: bool,
}

impl SeparatedFamily {
    /// Assembles a family without checking any clause.
    pub fn new_unchecked(
        members: Vec<Condition>,
        root: Vec<Point>,
        from_first: Vec<Bijection>,
    ) -> Self {
        let source = (0..members.len()).collect();
        SeparatedFamily {
            members,
            root,
            from_first,
            source,
            equivalent: false,
        }
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// `h_{p,q}: X_p → X_q`.
    pub fn h(&self, p: usize, q: usize) -> Bijection {
        self.from_first[p].inverse().then(&self.from_first[q])
    }

    pub fn root_sub_top(&self) -> Vec<Point> {
        self.root.iter().filter(|p| !p.is_top()).cloned().collect()
    }
}

/// The four adequacy clauses for `g: A → B`.
pub fn check_adequate(g: &Bijection, a: &[Point], b: &[Point]) -> Vec<SeparationIssue> {
    let mut out = Vec::new();
    let dom: BTreeSet<&Point> = g.domain().collect();
    let img: BTreeSet<Point> = g.pairs().map(|(_, y)| y.clone()).collect();
    if dom != a.iter().collect::<BTreeSet<_>>() || img != b.iter().cloned().collect::<BTreeSet<_>>() {
        out.push(issue("bijection", &[], &[], "domain or image mismatch".into()));
        return out;
    }
    for (s, gs) in g.pairs() {
        if s.is_top() != gs.is_top() {
            out.push(issue("adequacy-1", &[], &[s, gs], "stratum not preserved".into()));
        }
        if !s.is_top() && s.xi != gs.xi {
            out.push(issue("adequacy-3", &[], &[s, gs], "column not preserved below top".into()));
        }
        for (t, gt) in g.pairs() {
            if (s.level < t.level) != (gs.level < gt.level) {
                out.push(issue("adequacy-2", &[], &[s, t], "level order not preserved".into()));
            }
            if s.is_top() && t.is_top() && (s.xi < t.xi) != (gs.xi < gt.xi) {
                out.push(issue("adequacy-4", &[], &[s, t], "top column order not preserved".into()));
            }
        }
    }
    out
}

/// Re-verifies every clause of a separated family pointwise.
pub fn check_separated(fam: &SeparatedFamily) -> Vec<SeparationIssue> {
    let mut out = Vec::new();
    let m = fam.len();
    let root: BTreeSet<&Point> = fam.root.iter().collect();
    let sets: Vec<BTreeSet<&Point>> = fam.members.iter().map(|c| c.points().iter().collect()).collect();
    for p in 0..m {
        if !root.is_subset(&sets[p]) {
            out.push(issue("delta", &[p], &[], "root not contained in member".into()));
        }
        for q in p + 1..m {
            let inter: BTreeSet<&Point> = sets[p].intersection(&sets[q]).copied().collect();
            if inter != root {
                out.push(issue("delta", &[p, q], &[], "intersection differs from root".into()));
            }
        }
    }
    let mut levels: BTreeSet<&Level> = BTreeSet::new();
    for c in &fam.members {
        levels.extend(c.points().iter().filter(|x| !x.is_top()).map(|x| &x.level));
    }
    for lvl in levels {
        let at = |c: &Condition| -> BTreeSet<Point> {
            c.points().iter().filter(|x| &x.level == lvl).cloned().collect()
        };
        let root_at: BTreeSet<Point> = fam.root.iter().filter(|x| &x.level == lvl).cloned().collect();
        let all_root = fam.members.iter().all(|c| at(c) == root_at);
        let occupied: Vec<usize> = (0..m).filter(|&k| !at(&fam.members[k]).is_empty()).collect();
        if !all_root && occupied.len() > 1 {
            out.push(issue(
                "level",
                &occupied,
                &[],
                format!("level {lvl} is shared but not equal to the root there"),
            ));
        }
    }
    if fam.members.first().map(|c| c.dialect()) == Some(Dialect::Omega) {
        let root_levels: BTreeSet<&Level> = fam.root.iter().filter(|x| !x.is_top()).map(|x| &x.level).collect();
        for (k, c) in fam.members.iter().enumerate() {
            let max_root = root_levels.iter().max();
            if let Some(mr) = max_root {
                for x in c.points() {
                    if !x.is_top() && &&x.level <= mr && !root_levels.contains(&x.level) {
                        out.push(issue(
                            "initial-segment",
                            &[k],
                            &[x],
                            "root levels are not an initial segment".into(),
                        ));
                    }
                }
            }
        }
    }
    for p in 0..m {
        for q in 0..m {
            if p == q {
                continue;
            }
            let h = fam.h(p, q);
            let (cp, cq) = (&fam.members[p], &fam.members[q]);
            let mut adequacy = check_adequate(&h, cp.points(), cq.points());
            for i in &mut adequacy {
                i.members = vec![p, q];
            }
            let broken = adequacy.iter().any(|i| i.clause == "bijection");
            out.extend(adequacy);
            if broken {
                continue;
            }
            for r in &fam.root {
                if &h.apply(r) != r {
                    out.push(issue("separated-a", &[p, q], &[r], "root point moved".into()));
                }
            }
            for s in cp.points() {
                for t in cp.points() {
                    if cp.lt(s, t) != cq.lt(&h.apply(s), &h.apply(t)) {
                        out.push(issue("separated-b", &[p, q], &[s, t], "order not preserved".into()));
                    }
                    if s < t {
                        let img: BTreeSet<Point> = cp.meet(s, t).iter().map(|v| h.apply(v)).collect();
                        let there: BTreeSet<Point> =
                            cq.meet(&h.apply(s), &h.apply(t)).into_iter().collect();
                        if img != there {
                            out.push(issue("separated-c", &[p, q], &[s, t], "meet not preserved".into()));
                        }
                    }
                }
            }
        }
    }
    out
}

/// A root point `s` below the top and a point `t` of some member,
/// compatible and incomparable there, whose meet leaves the root.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KerneldownCounterexample {
    pub member: usize,
    pub s: Point,
    pub t: Point,
    pub meet: Vec<Point>,
}

/// Checks that meets of sub-top root points with compatible incomparable
/// points stay in the root, on every member.
pub fn kerneldown_check(fam: &SeparatedFamily) -> Result<(), KerneldownCounterexample> {
    let root: BTreeSet<&Point> = fam.root.iter().collect();
    for (k, c) in fam.members.iter().enumerate() {
        for s in fam.root.iter().filter(|s| !s.is_top()) {
            for t in c.points() {
                if s == t || c.comparable(s, t) || !c.compatible(s, t) {
                    continue;
                }
                let meet = c.meet(s, t);
                if meet.iter().any(|v| !root.contains(v)) {
                    return Err(KerneldownCounterexample {
                        member: k,
                        s: s.clone(),
                        t: t.clone(),
                        meet,
                    });
                }
            }
        }
    }
    Ok(())
}

/// Position-independent description of a point relative to the root.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
enum Key {
    Sub { rank: usize, xi: u32 },
    TopRoot(u32),
    TopNew(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct Signature {
    levels: Vec<Option<Ordinal>>,
    keys: Vec<Key>,
    order: Vec<(usize, usize)>,
    meets: Vec<(usize, usize, Vec<usize>)>,
    top_pattern: Vec<Key>,
    tags: Vec<Tag>,
}

struct Shape {
    sig: Signature,
    keys: Vec<Key>,
    free_levels: BTreeSet<Level>,
}

fn shape(
    c: &Condition,
    root: &BTreeSet<Point>,
    stamp: Option<(&EquivalenceStamp, &IntervalTree)>,
) -> Result<Result<Shape, String>, StampError> {
    let root_levels: BTreeSet<&Level> = root.iter().filter(|x| !x.is_top()).map(|x| &x.level).collect();
    let sub_levels: Vec<&Level> = {
        let mut v: Vec<&Level> = c.points().iter().filter(|x| !x.is_top()).map(|x| &x.level).collect();
        v.dedup();
        v
    };
    for lvl in &sub_levels {
        if root_levels.contains(lvl) {
            let mine: BTreeSet<&Point> = c.points().iter().filter(|x| &&x.level == lvl).collect();
            let theirs: BTreeSet<&Point> = root.iter().filter(|x| &&x.level == lvl).collect();
            if mine != theirs {
                return Ok(Err(format!("level {lvl} mixes root and other points")));
            }
        }
    }
    if c.dialect() == Dialect::Omega {
        if let Some(max_root) = root_levels.iter().max() {
            if sub_levels.iter().any(|l| l <= max_root && !root_levels.contains(l)) {
                return Ok(Err("root levels are not an initial segment".into()));
            }
        }
    }
    let new_tops: Vec<&Point> = c.points().iter().filter(|x| x.is_top() && !root.contains(x)).collect();
    let keys: Vec<Key> = c
        .points()
        .iter()
        .map(|x| {
            if x.is_top() {
                if root.contains(x) {
                    Key::TopRoot(x.xi)
                } else {
                    Key::TopNew(new_tops.iter().position(|y| *y == x).expect("listed"))
                }
            } else {
                Key::Sub {
                    rank: sub_levels.iter().position(|l| *l == &x.level).expect("listed"),
                    xi: x.xi,
                }
            }
        })
        .collect();
    let levels = sub_levels
        .iter()
        .map(|l| {
            if root_levels.contains(l) {
                l.ordinal().cloned()
            } else {
                None
            }
        })
        .collect();
    let top_pattern = if c.dialect() == Dialect::Kappa {
        let mut tops: Vec<(u32, Key)> = c
            .points()
            .iter()
            .zip(&keys)
            .filter(|(x, _)| x.is_top())
            .map(|(x, k)| (x.xi, k.clone()))
            .collect();
        tops.sort();
        tops.into_iter().map(|(_, k)| k).collect()
    } else {
        Vec::new()
    };
    let tags = match stamp {
        Some((st, tree)) => c
            .points()
            .iter()
            .map(|x| st.tag(&x.level, tree))
            .collect::<Result<Vec<_>, _>>()?,
        None => Vec::new(),
    };
    let free_levels = c
        .points()
        .iter()
        .filter(|x| !x.is_top() && !root_levels.contains(&x.level))
        .map(|x| x.level.clone())
        .collect();
    Ok(Ok(Shape {
        sig: Signature {
            levels,
            keys: keys.clone(),
            order: c.strict_pairs(),
            meets: c
                .meet_entries()
                .into_iter()
                .map(|(i, j, v)| (i, j, v.to_vec()))
                .collect(),
            top_pattern,
            tags,
        },
        keys,
        free_levels,
    }))
}

/// Thins `family` to a separated subfamily of at least `target` members:
/// a Δ-system of point sets, then the largest class of members with the same
/// shape relative to the root whose non-root levels are pairwise disjoint.
/// With `equivalence`, members must also carry the same interval tags.
pub fn separated_refine(
    family: &[Condition],
    tree: &IntervalTree,
    target: usize,
    equivalence: bool,
) -> Result<SeparatedFamily, RefineError> {
    let Some(first) = family.first() else {
        return Err(RefineError::Empty);
    };
    if family.iter().any(|c| c.dialect() != first.dialect()) {
        return Err(RefineError::MixedDialects);
    }
    let sets: Vec<BTreeSet<Point>> = family.iter().map(|c| c.points().iter().cloned().collect()).collect();
    let delta = delta_root(&sets, target).map_err(|e| RefineError::Infeasible {
        target,
        best: e.best,
        reason: "no large enough Δ-system".into(),
    })?;
    let root = delta.root;
    let stamp = equivalence.then(|| EquivalenceStamp::new(root.iter(), tree));

    let mut classes: BTreeMap<Signature, Vec<(usize, Shape)>> = BTreeMap::new();
    let mut rejected = Vec::new();
    for &k in &delta.members {
        match shape(&family[k], &root, stamp.as_ref().map(|s| (s, tree)))? {
            Ok(sh) => classes.entry(sh.sig.clone()).or_default().push((k, sh)),
            Err(why) => rejected.push(why),
        }
    }
    let mut best: Vec<&(usize, Shape)> = Vec::new();
    for members in classes.values() {
        let mut chosen: Vec<&(usize, Shape)> = Vec::new();
        for m in members {
            if chosen.iter().all(|c| c.1.free_levels.is_disjoint(&m.1.free_levels)) {
                chosen.push(m);
            }
        }
        let better = chosen.len() > best.len()
            || (chosen.len() == best.len() && !chosen.is_empty() && chosen[0].0 < best[0].0);
        if better {
            best = chosen;
        }
    }
    if best.len() < target || best.is_empty() {
        let reason = if rejected.is_empty() {
            "members differ in shape or share levels".to_string()
        } else {
            rejected[0].clone()
        };
        return Err(RefineError::Infeasible {
            target,
            best: best.len(),
            reason,
        });
    }
    best.sort_by_key(|m| m.0);
    let reference = &best[0].1;
    let mut from_first = Vec::with_capacity(best.len());
    for (k, sh) in &best {
        let by_key: BTreeMap<&Key, &Point> = sh.keys.iter().zip(family[*k].points()).collect();
        let pairs = reference
            .keys
            .iter()
            .zip(family[best[0].0].points())
            .map(|(key, x)| (x.clone(), (*by_key[key]).clone()));
        from_first.push(Bijection::from_pairs(pairs).expect("keys are unique"));
    }
    let fam = SeparatedFamily {
        members: best.iter().map(|(k, _)| family[*k].clone()).collect(),
        root: root.into_iter().collect(),
        from_first,
        source: best.iter().map(|(k, _)| *k).collect(),
        equivalent: equivalence,
    };
    let issues = check_separated(&fam);
    if !issues.is_empty() {
        return Err(RefineError::ClauseViolation(issues));
    }
    Ok(fam)
}
