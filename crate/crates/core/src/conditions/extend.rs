//! Inserting a fresh point below a given point of a condition.

use thiserror::Error;

use super::{Condition, Dialect};
use crate::interval_tree::{IntervalTree, TreeError};
use crate::ordinal::{Class, Ordinal};
use crate::point::{Level, Point};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExtendError {
    #[error("{0} is not a point of the condition")]
    MissingTarget(Point),
    #[error("level {alpha} is not below the target level {target}")]
    NotBelow { alpha: Ordinal, target: Level },
    #[error("no free column above {floor:?} at level {level}")]
    WidthExhausted { level: Level, floor: Option<u32> },
    #[error("extension needs {needed} points, size cap is {cap}")]
    SizeCapExhausted { needed: usize, cap: usize },
    #[error("level {level} is not materialized: {source}")]
    Unmaterialized { level: Ordinal, source: TreeError },
}

/// Smallest free column at `level`, strictly above `floor` when given.
fn fresh_column(
    taken: impl Fn(&Point) -> bool,
    level: &Level,
    floor: Option<u32>,
    width: u32,
) -> Result<Point, ExtendError> {
    let start = floor.map(|f| f + 1).unwrap_or(0);
    (start..width)
        .map(|xi| Point::new(level.clone(), xi))
        .find(|p| !taken(p))
        .ok_or(ExtendError::WidthExhausted {
            level: level.clone(),
            floor,
        })
}

/// Adds a fresh point `s` at level `alpha` with column above `nu_floor`
/// such that for every old point `x`, `s ⪯ x` iff `tgt ⪯ x`.
///
/// Kappa dialect: one auxiliary point at the right end of every interval
/// isolating `s` from `tgt`, chained below `tgt` (the target itself serves
/// when that right end is the target's level). Omega dialect: a ladder of
/// points at `alpha` and at the finite predecessors of `π(tgt)` above it.
pub fn extend_below(
    p: &Condition,
    tgt: &Point,
    alpha: &Ordinal,
    nu_floor: u32,
    tree: &IntervalTree,
) -> Result<(Condition, Point), ExtendError> {
    if !p.contains(tgt) {
        return Err(ExtendError::MissingTarget(tgt.clone()));
    }
    let alpha_level = Level::Ord(alpha.clone());
    if alpha_level >= tgt.level {
        return Err(ExtendError::NotBelow {
            alpha: alpha.clone(),
            target: tgt.level.clone(),
        });
    }
    let unmat = |level: &Ordinal, source: TreeError| ExtendError::Unmaterialized {
        level: level.clone(),
        source,
    };
    let params = tree.params();
    if alpha >= tree.eta() {
        return Err(unmat(
            alpha,
            TreeError::OutOfRange {
                alpha: alpha.clone(),
                eta: tree.eta().clone(),
            },
        ));
    }

    let above_tgt: Vec<Point> = p
        .points()
        .iter()
        .filter(|y| p.le(tgt, y))
        .cloned()
        .collect();
    let mut b = p.to_builder();

    // the chain from bottom (s) to top, excluding tgt
    let mut chain: Vec<Point> = Vec::new();
    let s = match p.dialect() {
        Dialect::Kappa => {
            tree.n_of(alpha).map_err(|e| unmat(alpha, e))?;
            let s = fresh_column(|q| b.has_point(q), &alpha_level, Some(nu_floor), params.kappa_w)?;
            b.point(s.clone());
            chain.push(s.clone());
            let isolating = tree
                .isolating(alpha, &tgt.level)
                .map_err(|e| unmat(alpha, e))?;
            // deepest interval first: smallest right end
            for i in isolating.iter().rev() {
                let gamma = if &i.hi == tree.eta() {
                    Level::Top
                } else {
                    Level::Ord(i.hi.clone())
                };
                if gamma == tgt.level {
                    continue;
                }
                if let Level::Ord(g) = &gamma {
                    tree.n_of(g).map_err(|e| unmat(g, e))?;
                }
                let c = fresh_column(|q| b.has_point(q), &gamma, None, params.width(&gamma))?;
                b.point(c.clone());
                chain.push(c);
            }
            s
        }
        Dialect::Omega => {
            let mut ladder = vec![alpha.clone()];
            if let Level::Ord(top) = &tgt.level {
                // top = λ + n with λ limit or zero
                let mut preds = Vec::new();
                let mut cur = top.clone();
                while let Class::Successor(prev) = cur.classify() {
                    if &prev <= alpha {
                        break;
                    }
                    preds.push(prev.clone());
                    cur = prev;
                }
                preds.reverse();
                ladder.extend(preds);
            }
            for lvl in &ladder {
                let level = Level::Ord(lvl.clone());
                let q = fresh_column(|q| b.has_point(q), &level, Some(nu_floor), params.kappa_w)?;
                b.point(q.clone());
                chain.push(q);
            }
            chain[0].clone()
        }
    };

    let needed = p.len() + chain.len();
    if needed > params.size_cap {
        return Err(ExtendError::SizeCapExhausted {
            needed,
            cap: params.size_cap,
        });
    }
    for (k, lo) in chain.iter().enumerate() {
        for hi in &chain[k + 1..] {
            b.relate(lo.clone(), hi.clone());
        }
        for y in &above_tgt {
            b.relate(lo.clone(), y.clone());
        }
    }
    // every new point is comparable or incompatible with every other point,
    // so the builder's default meets are the forced ones
    let q = b.build().expect("all referenced points were declared");
    Ok((q, s))
}
