//! Δ-system (sunflower) extraction from finite families of finite sets.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Families smaller than this are searched exactly.
const EXACT_LIMIT: usize = 20;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeltaSystem<T: Ord> {
    /// Indices into the input family, increasing.
    pub members: Vec<usize>,
    pub root: BTreeSet<T>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("largest Δ-subsystem found has {best} members, target is {target}")]
pub struct DeltaError {
    pub target: usize,
    pub best: usize,
    pub best_members: Vec<usize>,
}

/// Largest subfamily whose pairwise intersections all equal one root. Exact
/// for fewer than 20 sets, greedy above. Ties go to the candidate root that
/// is first in set order, then to the lexicographically first members.
pub fn delta_root<T: Ord + Clone>(
    family: &[BTreeSet<T>],
    target: usize,
) -> Result<DeltaSystem<T>, DeltaError> {
    if family.is_empty() {
        return if target == 0 {
            Ok(DeltaSystem {
                members: Vec::new(),
                root: BTreeSet::new(),
            })
        } else {
            Err(DeltaError {
                target,
                best: 0,
                best_members: Vec::new(),
            })
        };
    }
    // every root of a subfamily with two or more members is a pairwise
    // intersection; single sets are their own root
    let mut roots: BTreeSet<BTreeSet<T>> = BTreeSet::new();
    for (i, a) in family.iter().enumerate() {
        roots.insert(a.clone());
        for b in &family[i + 1..] {
            roots.insert(a.intersection(b).cloned().collect());
        }
    }
    let exact = family.len() < EXACT_LIMIT;
    let mut best: Option<DeltaSystem<T>> = None;
    for root in roots {
        let cands: Vec<usize> = (0..family.len())
            .filter(|&i| root.is_subset(&family[i]))
            .collect();
        if best.as_ref().is_some_and(|b| b.members.len() >= cands.len()) {
            continue;
        }
        let petals: Vec<BTreeSet<&T>> = cands
            .iter()
            .map(|&i| family[i].difference(&root).collect())
            .collect();
        let n = cands.len();
        let conflict: Vec<Vec<bool>> = (0..n)
            .map(|a| {
                (0..n)
                    .map(|b| a != b && !petals[a].is_disjoint(&petals[b]))
                    .collect()
            })
            .collect();
        let chosen = if exact {
            max_independent(&conflict)
        } else {
            greedy_independent(&conflict, &petals)
        };
        if best.as_ref().is_none_or(|b| chosen.len() > b.members.len()) {
            best = Some(DeltaSystem {
                members: chosen.iter().map(|&k| cands[k]).collect(),
                root,
            });
        }
    }
    let best = best.expect("at least one candidate root");
    if best.members.len() >= target {
        Ok(best)
    } else {
        Err(DeltaError {
            target,
            best: best.members.len(),
            best_members: best.members,
        })
    }
}

/// Maximum independent set by branch and bound; lexicographically first
/// among the maximum ones.
fn max_independent(conflict: &[Vec<bool>]) -> Vec<usize> {
    fn go(
        k: usize,
        conflict: &[Vec<bool>],
        cur: &mut Vec<usize>,
        best: &mut Vec<usize>,
    ) {
        let n = conflict.len();
        if cur.len() + (n - k) <= best.len() {
            return;
        }
        if k == n {
            *best = cur.clone();
            return;
        }
        if cur.iter().all(|&c| !conflict[c][k]) {
            cur.push(k);
            go(k + 1, conflict, cur, best);
            cur.pop();
        }
        go(k + 1, conflict, cur, best);
    }
    let mut best = Vec::new();
    go(0, conflict, &mut Vec::new(), &mut best);
    best
}

fn greedy_independent<T>(conflict: &[Vec<bool>], petals: &[BTreeSet<&T>]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..conflict.len()).collect();
    order.sort_by_key(|&k| (petals[k].len(), k));
    let mut out: Vec<usize> = Vec::new();
    for k in order {
        if out.iter().all(|&c| !conflict[c][k]) {
            out.push(k);
        }
    }
    out.sort_unstable();
    out
}
