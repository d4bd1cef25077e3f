//! Amalgamation machinery: Δ-systems, adequate bijections, separated and
//! pairwise-equivalent families, the countable-level amalgamation, and the
//! push-down / amalgamate / pull-back pipeline for the interval-tree dialect.

mod delta;
mod eta;
mod omega;
mod pushpull;
mod separated;
mod stamp;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::point::Point;

pub use delta::{delta_root, DeltaError, DeltaSystem};
pub use eta::{amalgamate_eta, check_r_contract, EtaAmalgam, EtaError, EtaOptions};
pub use omega::{amalgamate_omega, OmegaError};
pub use pushpull::{pull_back, push_down, MaxCheck, PullBack, PullBackError, PushDownError};
pub use separated::{
    check_adequate, check_separated, kerneldown_check, separated_refine, KerneldownCounterexample,
    RefineError, SeparatedFamily, SeparationIssue,
};
pub use stamp::{EquivalenceStamp, IntervalStamp, StampError, Tag};

/// A finite bijection between point sets.
#[derive(Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Bijection {
    map: BTreeMap<Point, Point>,
}

impl fmt::Debug for Bijection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_map().entries(self.map.iter()).finish()
    }
}

impl Bijection {
    /// Builds from pairs; `None` if the pairs do not define an injective map.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (Point, Point)>) -> Option<Self> {
        let mut map = BTreeMap::new();
        let mut seen = std::collections::BTreeSet::new();
        for (a, b) in pairs {
            if !seen.insert(b.clone()) {
                return None;
            }
            if map.insert(a, b).is_some() {
                return None;
            }
        }
        Some(Bijection { map })
    }

    pub fn identity<'a>(points: impl IntoIterator<Item = &'a Point>) -> Self {
        Bijection {
            map: points.into_iter().map(|p| (p.clone(), p.clone())).collect(),
        }
    }

    pub fn get(&self, p: &Point) -> Option<&Point> {
        self.map.get(p)
    }

    /// Image of `p`. Panics outside the domain.
    pub fn apply(&self, p: &Point) -> Point {
        self.map
            .get(p)
            .unwrap_or_else(|| panic!("{p} is outside the bijection's domain"))
            .clone()
    }

    pub fn inverse(&self) -> Self {
        Bijection {
            map: self.map.iter().map(|(a, b)| (b.clone(), a.clone())).collect(),
        }
    }

    /// `other ∘ self`.
    pub fn then(&self, other: &Bijection) -> Self {
        Bijection {
            map: self
                .map
                .iter()
                .map(|(a, b)| (a.clone(), other.apply(b)))
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn pairs(&self) -> impl Iterator<Item = (&Point, &Point)> {
        self.map.iter()
    }

    pub fn domain(&self) -> impl Iterator<Item = &Point> {
        self.map.keys()
    }

    pub fn is_identity(&self) -> bool {
        self.map.iter().all(|(a, b)| a == b)
    }
}
