//! Interval tags for pairwise equivalence.
//!
//! For a root `X̄` and every limit-ended interval `I` of the tree, `ξ(I)` is
//! the least position with `ε^I_ξ` above every root level inside `I`,
//! `γ(I) = ε^I_{ξ(I) + κ}` (κ read as `kappa_w`) and `D(I)` holds the
//! `kappa_w` elements `ε^I_{ξ(I)}, ..., ε^I_{ξ(I) + κ - 1}`. The tag of a
//! level `α` is the first `I(α, k)` with a limit right end and
//! `γ(I) <= α`, or `α` itself when there is none.

use std::collections::BTreeMap;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::interval_tree::{Interval, IntervalTree, TreeError};
use crate::ordinal::{Class, Ordinal};
use crate::point::{Level, Point};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StampError {
    #[error("γ({interval}) needs E position {needed}, budget is {budget}")]
    Unmaterialized {
        interval: Interval,
        needed: usize,
        budget: usize,
    },
    #[error(transparent)]
    Tree(#[from] TreeError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntervalStamp {
    pub xi: usize,
    pub gamma: Ordinal,
    pub d: Vec<Ordinal>,
}

/// `I(α)`: an interval of the tree or the singleton `{α}`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Tag {
    Interval(Interval),
    Singleton(Ordinal),
    Top,
}

/// Tags relative to a fixed root.
#[derive(Debug)]
pub struct EquivalenceStamp {
    root_levels: Vec<Ordinal>,
    kappa_w: usize,
    cache: Mutex<BTreeMap<Interval, IntervalStamp>>,
}

impl EquivalenceStamp {
    pub fn new<'a>(root: impl IntoIterator<Item = &'a Point>, tree: &IntervalTree) -> Self {
        let mut root_levels: Vec<Ordinal> = root
            .into_iter()
            .filter_map(|p| p.level.ordinal().cloned())
            .collect();
        root_levels.sort();
        root_levels.dedup();
        EquivalenceStamp {
            root_levels,
            kappa_w: tree.params().kappa_w as usize,
            cache: Mutex::new(BTreeMap::new()),
        }
    }

    /// `ξ(I)`, `γ(I)` and `D(I)` for a limit-ended interval.
    pub fn interval(&self, i: &Interval, tree: &IntervalTree) -> Result<IntervalStamp, StampError> {
        if let Some(s) = self.cache.lock().expect("stamp cache").get(i) {
            return Ok(s.clone());
        }
        let e = tree.e_set(i)?;
        let top_root = self.root_levels.iter().filter(|a| i.contains(a)).max();
        let xi = match top_root {
            None => 0,
            Some(a) => e
                .iter()
                .position(|x| x > a)
                .ok_or(StampError::Unmaterialized {
                    interval: i.clone(),
                    needed: e.len(),
                    budget: e.len() - 1,
                })?,
        };
        let needed = xi + self.kappa_w;
        if needed >= e.len() {
            return Err(StampError::Unmaterialized {
                interval: i.clone(),
                needed,
                budget: e.len() - 1,
            });
        }
        let s = IntervalStamp {
            xi,
            gamma: e[needed].clone(),
            d: e[xi..needed].to_vec(),
        };
        self.cache
            .lock()
            .expect("stamp cache")
            .insert(i.clone(), s.clone());
        Ok(s)
    }

    pub fn tag(&self, level: &Level, tree: &IntervalTree) -> Result<Tag, StampError> {
        let Level::Ord(alpha) = level else {
            return Ok(Tag::Top);
        };
        let n = tree.n_of(alpha)?;
        for i in tree.path(alpha, n)? {
            if i.is_singleton() || i.hi.classify() != Class::Limit {
                continue;
            }
            let s = self.interval(&i, tree)?;
            if &s.gamma <= alpha {
                return Ok(Tag::Interval(i));
            }
        }
        Ok(Tag::Singleton(alpha.clone()))
    }

    /// `D(I(α))`, empty for singleton tags.
    pub fn d_of(&self, level: &Level, tree: &IntervalTree) -> Result<Vec<Ordinal>, StampError> {
        match self.tag(level, tree)? {
            Tag::Interval(i) => Ok(self.interval(&i, tree)?.d),
            _ => Ok(Vec::new()),
        }
    }

    /// `γ = sup ⋃ {D(I) : I ∈ J} + 1` over the tags of `points`.
    pub fn gamma<'a>(
        &self,
        points: impl IntoIterator<Item = &'a Point>,
        tree: &IntervalTree,
    ) -> Result<Ordinal, StampError> {
        let mut sup = Ordinal::zero();
        for p in points {
            for d in self.d_of(&p.level, tree)? {
                sup = sup.max(d);
            }
        }
        Ok(sup.succ())
    }
}
