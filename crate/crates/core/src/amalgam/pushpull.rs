//! Moving top points down to a high limit-role level of `E` and transporting
//! an amalgam back up.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::Bijection;
use crate::conditions::{Clause, Condition, ConditionBuilder, Dialect, ValidateError, Violation};
use crate::interval_tree::IntervalTree;
use crate::ordinal::Ordinal;
use crate::point::{Level, Point};
use crate::unbounded::UnboundedFn;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PushDownError {
    #[error("push-down needs the kappa dialect")]
    WrongDialect,
    #[error("ζ = {zeta} is not a limit-role position (positive multiple of {step})")]
    NotLimitRole { zeta: usize, step: usize },
    #[error("ε_{zeta} is not materialized (budget {budget})")]
    Unmaterialized { zeta: usize, budget: usize },
    #[error("{point} is not below ε_{{ζ-1}} = {bound}")]
    Gap { point: Point, bound: Ordinal },
    #[error("{needed} top points exceed the width {width}")]
    Width { needed: usize, width: u32 },
    #[error("pushed condition fails validation: {}", .0.first().map(|v| v.to_string()).unwrap_or_default())]
    Invalid(Vec<Violation>),
    #[error(transparent)]
    Validate(#[from] ValidateError),
}

/// `r'` with the top points `Z` replaced by `(ε_ζ, 0..|Z|)` in column order,
/// and the natural bijection `g: X' → X`.
///
/// `ζ` must be a positive multiple of `kappa_w` and every sub-top level of
/// `r` must lie below `ε_{ζ-1}`.
pub fn push_down(
    r: &Condition,
    zeta: usize,
    tree: &IntervalTree,
    f: &UnboundedFn,
) -> Result<(Condition, Bijection), PushDownError> {
    if r.dialect() != Dialect::Kappa {
        return Err(PushDownError::WrongDialect);
    }
    let params = tree.params();
    let step = params.kappa_w as usize;
    if zeta == 0 || !zeta.is_multiple_of(step) {
        return Err(PushDownError::NotLimitRole { zeta, step });
    }
    let alpha = tree.eps(zeta).map_err(|_| PushDownError::Unmaterialized {
        zeta,
        budget: params.e_budget,
    })?;
    let bound = tree.eps(zeta - 1).expect("below a materialized position");
    let (ys, zs) = r.split_top();
    if let Some(y) = ys.iter().find(|y| y.level >= Level::Ord(bound.clone())) {
        return Err(PushDownError::Gap {
            point: y.clone(),
            bound,
        });
    }
    if zs.len() > params.kappa_w as usize {
        return Err(PushDownError::Width {
            needed: zs.len(),
            width: params.kappa_w,
        });
    }
    // `split_top` keeps canonical order, so `zs` is sorted by column
    let mut pairs: Vec<(Point, Point)> = ys.iter().map(|y| (y.clone(), y.clone())).collect();
    for (k, z) in zs.iter().enumerate() {
        pairs.push((Point::new(alpha.clone(), k as u32), z.clone()));
    }
    let g = Bijection::from_pairs(pairs).expect("fresh level is above every sub-top level");
    let back = g.inverse();
    let mut b = ConditionBuilder::new(Dialect::Kappa);
    for x in g.domain() {
        b.point(x.clone());
    }
    for (i, j) in r.strict_pairs() {
        b.relate(back.apply(&r.points()[i]), back.apply(&r.points()[j]));
    }
    for (i, j, v) in r.meet_entries() {
        b.meet(
            &back.apply(&r.points()[i]),
            &back.apply(&r.points()[j]),
            v.iter().map(|&k| back.apply(&r.points()[k])),
        );
    }
    let rp = b.build().expect("all points declared");
    let v = rp.validate(tree, f)?;
    if !v.is_empty() {
        return Err(PushDownError::Invalid(v));
    }
    Ok((rp, g))
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PullBackError {
    #[error("pull-back needs the kappa dialect")]
    WrongDialect,
    #[error("{0} of a pushed-down condition is missing from the amalgam")]
    Missing(Point),
    #[error("F{{{a}, {b}}} = {value} does not exceed γ₀ = {gamma0}")]
    FGap {
        a: u32,
        b: u32,
        value: Ordinal,
        gamma0: Ordinal,
    },
    #[error("no ≺'-maximum among the meets over the preimages of {{{s}, {t}}}")]
    MaxUndefined { s: Point, t: Point, candidates: Vec<Vec<Point>> },
    #[error("top meet clause fails on a cross pair: {0}")]
    TopMeet(Violation),
    #[error("pulled-back condition fails validation: {}", .0.first().map(|v| v.to_string()).unwrap_or_default())]
    Invalid(Vec<Violation>),
    #[error("pulled-back condition does not extend both inputs")]
    NotBelow,
    #[error(transparent)]
    Validate(#[from] ValidateError),
}

/// One evaluation of the max formula over several preimage pairs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaxCheck {
    pub s: Point,
    pub t: Point,
    pub candidates: Vec<Vec<Point>>,
    pub chosen: Vec<Point>,
}

#[derive(Debug, Clone)]
pub struct PullBack {
    pub r: Condition,
    pub gamma0: Ordinal,
    pub checks: Vec<MaxCheck>,
}

/// Transports a common extension `rp` of two push-downs back to a common
/// extension of `r_nu` and `r_mu`. `h = g_ν ∪ g_μ ∪ id`; `s ≺ t` iff
/// `s ≺' t'` for some `t'` over `t`; `i{s, t}` is the `≺'`-maximum of the
/// meets over all preimage pairs.
#[allow(clippy::too_many_arguments)]
pub fn pull_back(
    rp: &Condition,
    r_nu: &Condition,
    r_mu: &Condition,
    g_nu: &Bijection,
    g_mu: &Bijection,
    gamma: &Ordinal,
    tree: &IntervalTree,
    f: &UnboundedFn,
) -> Result<PullBack, PullBackError> {
    if [rp, r_nu, r_mu].iter().any(|c| c.dialect() != Dialect::Kappa) {
        return Err(PullBackError::WrongDialect);
    }
    for x in g_nu.domain().chain(g_mu.domain()) {
        if !rp.contains(x) {
            return Err(PullBackError::Missing(x.clone()));
        }
    }
    let h = |x: &Point| -> Point {
        g_nu.get(x)
            .or_else(|| g_mu.get(x))
            .cloned()
            .unwrap_or_else(|| x.clone())
    };

    let mut gamma0 = gamma.clone();
    for y in r_nu.points().iter().filter(|y| !y.is_top() && r_mu.contains(y)) {
        if let Level::Ord(a) = &y.level {
            gamma0 = gamma0.max(a.clone());
        }
    }
    let z_nu: Vec<&Point> = r_nu.points().iter().filter(|x| x.is_top() && !r_mu.contains(x)).collect();
    let z_mu: Vec<&Point> = r_mu.points().iter().filter(|x| x.is_top() && !r_nu.contains(x)).collect();
    for s in &z_nu {
        for t in &z_mu {
            if !f.exceeds(s.xi, t.xi, &gamma0) {
                return Err(PullBackError::FGap {
                    a: s.xi,
                    b: t.xi,
                    value: f.value(s.xi, t.xi).clone(),
                    gamma0,
                });
            }
        }
    }

    let mut pre: BTreeMap<Point, Vec<usize>> = BTreeMap::new();
    for (k, x) in rp.points().iter().enumerate() {
        pre.entry(h(x)).or_default().push(k);
    }
    let xs: Vec<Point> = pre.keys().cloned().collect();
    let mut b = ConditionBuilder::new(Dialect::Kappa);
    for x in &xs {
        b.point(x.clone());
    }
    for s in &xs {
        let Some(si) = rp.index_of(s) else {
            // top points have no strict upper bounds
            continue;
        };
        for t in &xs {
            if s != t && pre[t].iter().any(|&tk| rp.lt_idx(si, tk)) {
                b.relate(s.clone(), t.clone());
            }
        }
    }
    let mut checks = Vec::new();
    for (a, s) in xs.iter().enumerate() {
        for t in &xs[a + 1..] {
            let mut cands: Vec<&[usize]> = Vec::new();
            for &sk in &pre[s] {
                for &tk in &pre[t] {
                    cands.push(rp.meet_idx(sk, tk));
                }
            }
            let nonempty: BTreeSet<usize> = cands.iter().flat_map(|c| c.iter().copied()).collect();
            let max = nonempty
                .iter()
                .copied()
                .find(|&m| nonempty.iter().all(|&o| rp.le_idx(o, m)));
            let chosen: Vec<Point> = match (nonempty.is_empty(), max) {
                (true, _) => Vec::new(),
                (false, Some(m)) => vec![h(&rp.points()[m])],
                (false, None) => {
                    return Err(PullBackError::MaxUndefined {
                        s: s.clone(),
                        t: t.clone(),
                        candidates: cands
                            .iter()
                            .map(|c| c.iter().map(|&k| rp.points()[k].clone()).collect())
                            .collect(),
                    })
                }
            };
            if cands.len() > 1 {
                checks.push(MaxCheck {
                    s: s.clone(),
                    t: t.clone(),
                    candidates: cands
                        .iter()
                        .map(|c| c.iter().map(|&k| rp.points()[k].clone()).collect())
                        .collect(),
                    chosen: chosen.clone(),
                });
            }
            b.meet(s, t, chosen);
        }
    }
    let r = b.build().expect("all points declared");
    let v = r.validate(tree, f)?;
    if let Some(top) = v.iter().find(|v| {
        v.clause == Clause::TopMeet
            && v.points.len() >= 2
            && z_nu.iter().chain(&z_mu).any(|z| *z == &v.points[0])
            && z_nu.iter().chain(&z_mu).any(|z| *z == &v.points[1])
    }) {
        return Err(PullBackError::TopMeet(top.clone()));
    }
    if !v.is_empty() {
        return Err(PullBackError::Invalid(v));
    }
    if !Condition::leq(&r, r_nu) || !Condition::leq(&r, r_mu) {
        return Err(PullBackError::NotBelow);
    }
    Ok(PullBack { r, gamma0, checks })
}
