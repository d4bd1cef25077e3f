//! Amalgamation of two members of a separated family in the countable-level
//! dialect: union of points and orders, cross meets from the root.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::conditions::{Condition, ConditionBuilder, Dialect, ValidateError, Violation};
use crate::interval_tree::IntervalTree;
use crate::ordinal::Ordinal;
use crate::point::{Level, Point};
use crate::unbounded::UnboundedFn;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OmegaError {
    #[error("both conditions must be in the omega dialect")]
    WrongDialect,
    #[error("root point {0} is missing from one side")]
    RootMissing(Point),
    #[error("level {level} holds non-root points in a root level or below the root levels")]
    NotInitialSegment { level: Level },
    #[error("F{{{a}, {b}}} = {value} does not exceed δ = {delta}")]
    FGap {
        a: u32,
        b: u32,
        value: Ordinal,
        delta: Ordinal,
    },
    #[error("the two sides disagree on the root pair {{{0}, {1}}}")]
    RootDisagreement(Point, Point),
    #[error("result fails validation: {}", .0.first().map(|v| v.to_string()).unwrap_or_default())]
    Invalid(Vec<Violation>),
    #[error("result does not extend both inputs")]
    NotBelow,
    #[error(transparent)]
    Validate(#[from] ValidateError),
}

/// `r = ⟨X_p ∪ X_q, ⪯_p ∪ ⪯_q, i_r⟩` with
/// `i_r{x, y} = {u ∈ X* : u ≺ x, y}` for `x ∈ X_p ∖ X_q`, `y ∈ X_q ∖ X_p`.
///
/// Checks the hypotheses first: the sub-top root levels are an initial
/// segment of both level sets and carry only root points, and
/// `F{ξ(s), ξ(t)} > δ` for new top points on opposite sides.
pub fn amalgamate_omega(
    p: &Condition,
    q: &Condition,
    root: &[Point],
    f: &UnboundedFn,
    tree: &IntervalTree,
) -> Result<Condition, OmegaError> {
    if p.dialect() != Dialect::Omega || q.dialect() != Dialect::Omega {
        return Err(OmegaError::WrongDialect);
    }
    let root: BTreeSet<&Point> = root.iter().collect();
    for r in &root {
        if !p.contains(r) || !q.contains(r) {
            return Err(OmegaError::RootMissing((*r).clone()));
        }
    }
    let root_levels: BTreeSet<&Level> = root.iter().filter(|x| !x.is_top()).map(|x| &x.level).collect();
    let delta = root_levels.iter().max().map(|l| (*l).clone());
    if let Some(d) = &delta {
        for c in [p, q] {
            for x in c.points() {
                if !x.is_top() && &x.level <= d && !root.contains(x) {
                    return Err(OmegaError::NotInitialSegment { level: x.level.clone() });
                }
            }
        }
    }
    if let Some(Level::Ord(d)) = &delta {
        for s in p.points().iter().filter(|x| x.is_top() && !root.contains(x)) {
            for t in q.points().iter().filter(|x| x.is_top() && !root.contains(x)) {
                if s.xi != t.xi && !f.exceeds(s.xi, t.xi, d) {
                    return Err(OmegaError::FGap {
                        a: s.xi,
                        b: t.xi,
                        value: f.value(s.xi, t.xi).clone(),
                        delta: d.clone(),
                    });
                }
            }
        }
    }
    for a in &root {
        for b in &root {
            if a < b && p.meet(a, b) != q.meet(a, b) {
                return Err(OmegaError::RootDisagreement((*a).clone(), (*b).clone()));
            }
        }
    }

    let mut b = ConditionBuilder::new(Dialect::Omega);
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
    for x in p.points().iter().filter(|x| !q.contains(x)) {
        for y in q.points().iter().filter(|y| !p.contains(y)) {
            let m: Vec<Point> = root
                .iter()
                .filter(|u| p.lt(u, x) && q.lt(u, y))
                .map(|u| (*u).clone())
                .collect();
            b.meet(x, y, m);
        }
    }
    let r = b.build().expect("all points declared");
    let v = r.validate(tree, f)?;
    if !v.is_empty() {
        return Err(OmegaError::Invalid(v));
    }
    if !Condition::leq(&r, p) || !Condition::leq(&r, q) {
        return Err(OmegaError::NotBelow);
    }
    Ok(r)
}
