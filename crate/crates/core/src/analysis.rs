//! Cantor–Bendixson derivatives: exact computation on finite spaces given by
//! a subbase, the space of a poset, and symbolic levels of ordinal spaces.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::generic::FinitePoset;
use crate::ordinal::{Class, Ordinal};

/// Largest space representable with bitmask point sets.
pub const MAX_POINTS: usize = 64;
pub const DEFAULT_CB_CAP: usize = 16;

pub type PointSet = u64;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnalysisError {
    #[error("space has {points} points, cap is {cap}")]
    CapExceeded { points: usize, cap: usize },
    #[error("subbase set {0:#x} names points outside the space")]
    Foreign(PointSet),
    #[error("{0} is not below ω^ω")]
    OutOfRange(Ordinal),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// Points `0..labels.len()` with the topology generated by `subbase`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FiniteSpace {
    pub labels: Vec<String>,
    pub subbase: Vec<PointSet>,
}

pub const SPACE_HEADER: &str = "# sposet space v1";

impl FiniteSpace {
    pub fn new(labels: Vec<String>, subbase: Vec<PointSet>) -> Result<Self, AnalysisError> {
        if labels.len() > MAX_POINTS {
            return Err(AnalysisError::CapExceeded {
                points: labels.len(),
                cap: MAX_POINTS,
            });
        }
        let s = FiniteSpace { labels, subbase };
        if let Some(&u) = s.subbase.iter().find(|&&u| u & !s.full() != 0) {
            return Err(AnalysisError::Foreign(u));
        }
        Ok(s)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn full(&self) -> PointSet {
        mask(self.len())
    }

    /// Smallest open set containing `p`: the intersection of the subbase
    /// sets through `p` (the whole space when there are none).
    pub fn neighbourhood(&self, p: usize) -> PointSet {
        self.subbase
            .iter()
            .filter(|&&u| u >> p & 1 == 1)
            .fold(self.full(), |acc, &u| acc & u)
    }

    /// Line document: header, then `point LABEL` lines, then `open I J ...`
    /// lines listing subbase sets by point index.
    pub fn to_text(&self) -> String {
        let mut s = format!("{SPACE_HEADER}\n");
        for l in &self.labels {
            s.push_str(&format!("point {l}\n"));
        }
        for &u in &self.subbase {
            let idx: Vec<String> = members(u).map(|i| i.to_string()).collect();
            s.push_str(&format!("open {}\n", idx.join(" ")).replace(" \n", "\n"));
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self, AnalysisError> {
        let err = |line: usize, msg: &str| AnalysisError::Parse {
            line,
            msg: msg.to_string(),
        };
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(n, l)| (n + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty());
        match lines.next() {
            Some((_, l)) if l == SPACE_HEADER => {}
            Some((n, _)) => return Err(err(n, "missing format header")),
            None => return Err(err(1, "empty document")),
        }
        let mut labels = Vec::new();
        let mut subbase = Vec::new();
        for (n, l) in lines {
            let (kw, rest) = l.split_once(' ').unwrap_or((l, ""));
            match kw {
                "point" => labels.push(rest.trim().to_string()),
                "open" => {
                    let mut u: PointSet = 0;
                    for t in rest.split_whitespace() {
                        let i: usize = t.parse().map_err(|_| err(n, "bad point index"))?;
                        if i >= labels.len() {
                            return Err(err(n, "point index out of range"));
                        }
                        u |= 1 << i;
                    }
                    subbase.push(u);
                }
                _ => return Err(err(n, "unknown line")),
            }
        }
        Self::new(labels, subbase)
    }
}

pub fn mask(n: usize) -> PointSet {
    if n >= 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

pub fn members(u: PointSet) -> impl Iterator<Item = usize> {
    (0..64).filter(move |i| u >> i & 1 == 1)
}

/// Subbase `{U(x), T ∖ U(x)}` with `U(x) = {y : y ⪯ x}`.
pub fn space_from_poset(t: &FinitePoset) -> Result<FiniteSpace, AnalysisError> {
    let c = &t.poset;
    let n = c.len();
    let labels: Vec<String> = c.points().iter().map(|p| p.to_string()).collect();
    let full = mask(n);
    let mut subbase = Vec::with_capacity(2 * n);
    for x in 0..n {
        let down: PointSet = (0..n).filter(|&y| c.le_idx(y, x)).fold(0, |acc, y| acc | 1 << y);
        subbase.push(down);
        subbase.push(full & !down);
    }
    FiniteSpace::new(labels, subbase)
}

/// Cantor–Bendixson levels of a space.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelReport {
    /// `I_k`: points isolated in the `k`-th derivative.
    pub levels: Vec<Vec<usize>>,
    pub widths: Vec<usize>,
    /// Least `δ` with `X^δ = ∅`, or the index where derivatives stabilise.
    pub height: usize,
    /// Least `δ` with `X^δ` finite; always 0 for finite spaces.
    pub reduced_height: usize,
    /// The perfect kernel left when the derivative stabilises.
    pub residual: Vec<usize>,
    /// `X^0 ⊋ X^1 ⊋ ...` as point sets, ending with the residual.
    pub derivatives: Vec<PointSet>,
}

impl fmt::Display for LevelReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "height {}", self.height)?;
        writeln!(f, "reduced-height {}", self.reduced_height)?;
        for (k, l) in self.levels.iter().enumerate() {
            let pts: Vec<String> = l.iter().map(|i| i.to_string()).collect();
            writeln!(f, "level {k} width {} : {}", l.len(), pts.join(" "))?;
        }
        let res: Vec<String> = self.residual.iter().map(|i| i.to_string()).collect();
        write!(f, "residual {}", res.join(" "))
    }
}

/// Iterated removal of isolated points. A point is isolated in `Y` when its
/// smallest open neighbourhood meets `Y` only in itself.
pub fn finite_cb(s: &FiniteSpace, cap: usize) -> Result<LevelReport, AnalysisError> {
    if s.len() > cap {
        return Err(AnalysisError::CapExceeded {
            points: s.len(),
            cap,
        });
    }
    let nbhd: Vec<PointSet> = (0..s.len()).map(|p| s.neighbourhood(p)).collect();
    let mut cur = s.full();
    let mut levels = Vec::new();
    let mut derivatives = vec![cur];
    loop {
        let isolated: PointSet = members(cur)
            .filter(|&p| nbhd[p] & cur == 1 << p)
            .fold(0, |acc, p| acc | 1 << p);
        if isolated == 0 {
            break;
        }
        levels.push(members(isolated).collect::<Vec<_>>());
        cur &= !isolated;
        derivatives.push(cur);
    }
    Ok(LevelReport {
        widths: levels.iter().map(Vec::len).collect(),
        height: levels.len(),
        reduced_height: 0,
        residual: members(cur).collect(),
        levels,
        derivatives,
    })
}

/// Size of a level of an ordinal space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LevelSize {
    Finite(u64),
    Omega,
}

impl fmt::Display for LevelSize {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LevelSize::Finite(n) => write!(f, "{n}"),
            LevelSize::Omega => write!(f, "ω"),
        }
    }
}

/// Symbolic levels of `[0, α]`: `I_e` is the set of `β ≤ α` removed at the
/// `e`-th derivative.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrdinalLevels {
    pub alpha: Ordinal,
    pub sizes: Vec<LevelSize>,
    pub height: usize,
}

impl fmt::Display for OrdinalLevels {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "space [0, {}]", self.alpha)?;
        writeln!(f, "height {}", self.height)?;
        for (e, s) in self.sizes.iter().enumerate() {
            writeln!(f, "level {e} width {s}")?;
        }
        Ok(())
    }
}

impl OrdinalLevels {
    /// The level of `β ≤ α`: the last derivative containing it.
    pub fn level_of(&self, beta: &Ordinal) -> Option<usize> {
        if beta > &self.alpha {
            return None;
        }
        (0..self.height).rev().find(|&e| in_derivative(beta, e))
    }
}

/// `β ∈ X^e` for `X = [0, α]`: `e = 0`, or `β` is a limit of points of
/// `X^{e-1}`, read off its fundamental sequence.
fn in_derivative(beta: &Ordinal, e: usize) -> bool {
    if e == 0 {
        return true;
    }
    if beta.classify() != Class::Limit {
        return false;
    }
    // canonical sequences are uniform in shape, so a few terms decide
    (1..=3).all(|k| beta.fund_seq(k).is_ok_and(|b| in_derivative(&b, e - 1)))
}

pub fn ordinal_space_levels(alpha: &Ordinal) -> Result<OrdinalLevels, AnalysisError> {
    if !alpha.below_omega_omega() {
        return Err(AnalysisError::OutOfRange(alpha.clone()));
    }
    let d = alpha.degree().as_nat().expect("finite degree") as usize;
    let mut sizes = Vec::with_capacity(d + 1);
    for e in 0..=d {
        if e < d {
            sizes.push(LevelSize::Omega);
        } else {
            // ω^d·k for k = 1..c, or the single point 0 when α is finite
            let lead = alpha.terms().first().map(|t| t.coefficient).unwrap_or(0);
            sizes.push(LevelSize::Finite(if d == 0 {
                alpha.as_nat().expect("finite") + 1
            } else {
                lead
            }));
        }
    }
    Ok(OrdinalLevels {
        alpha: alpha.clone(),
        height: sizes.len(),
        sizes,
    })
}
