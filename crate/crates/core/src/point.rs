//! Levels and points of the grid `T`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::ordinal::{Ordinal, OrdinalError};

/// A level is either an ordinal below `η` or the top level.
///
/// `Top` compares above every ordinal level.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Level {
    Ord(Ordinal),
    Top,
}

impl Level {
    pub fn is_top(&self) -> bool {
        matches!(self, Level::Top)
    }

    pub fn ordinal(&self) -> Option<&Ordinal> {
        match self {
            Level::Ord(o) => Some(o),
            Level::Top => None,
        }
    }
}

impl From<Ordinal> for Level {
    fn from(o: Ordinal) -> Self {
        Level::Ord(o)
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Level::Ord(o) => write!(f, "{o}"),
            Level::Top => write!(f, "TOP"),
        }
    }
}

impl fmt::Debug for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl FromStr for Level {
    type Err = OrdinalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.trim().eq_ignore_ascii_case("top") {
            Ok(Level::Top)
        } else {
            s.parse().map(Level::Ord)
        }
    }
}

impl Serialize for Level {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Level {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A point `(π, ξ)` of the grid. The derived order is the canonical point
/// order used for tie-breaking: level first, then column.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Point {
    pub level: Level,
    pub xi: u32,
}

impl Point {
    pub fn new(level: impl Into<Level>, xi: u32) -> Self {
        Point {
            level: level.into(),
            xi,
        }
    }

    pub fn top(xi: u32) -> Self {
        Point {
            level: Level::Top,
            xi,
        }
    }

    pub fn is_top(&self) -> bool {
        self.level.is_top()
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.level, self.xi)
    }
}

impl fmt::Debug for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}
