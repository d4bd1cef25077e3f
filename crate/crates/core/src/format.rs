//! Line documents for conditions.
//!
//! ```text
//! # sposet condition v1
//! dialect kappa
//! params eta=w^2 kappa_w=3 lambda_w=6 e_budget=16 size_cap=64 depth_cap=16
//! point 0 w + 1
//! point 0 TOP
//! order 0 1
//! meet 0 1 : 0
//! ```
//!
//! `point XI LEVEL` lines come in canonical order; `order` lists every strict
//! pair by index; `meet` lists every pair whose meet is nonempty or which
//! has a common lower bound.

use std::fmt::Write as _;

use thiserror::Error;

use crate::conditions::{Condition, ConditionBuilder, Dialect};
use crate::interval_tree::Params;
use crate::point::{Level, Point};

pub const CONDITION_HEADER: &str = "# sposet condition v1";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FormatError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// A condition together with the parameters it was built under.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConditionDocument {
    pub params: Params,
    pub condition: Condition,
}

pub fn params_line(p: &Params) -> String {
    format!(
        "params eta={} kappa_w={} lambda_w={} e_budget={} size_cap={} depth_cap={}",
        p.eta, p.kappa_w, p.lambda_w, p.e_budget, p.size_cap, p.depth_cap
    )
}

pub fn parse_params_line(line: &str) -> Result<Params, String> {
    let rest = line
        .strip_prefix("params ")
        .ok_or_else(|| "expected `params ...`".to_string())?;
    // eta may contain spaces, so split on ` key=` boundaries
    let keys = ["eta", "kappa_w", "lambda_w", "e_budget", "size_cap", "depth_cap"];
    let mut starts = Vec::new();
    for k in keys {
        let pat = format!("{k}=");
        let pos = if rest.starts_with(&pat) {
            Some(0)
        } else {
            rest.find(&format!(" {pat}")).map(|p| p + 1)
        };
        starts.push((pos.ok_or_else(|| format!("missing {k}"))?, k));
    }
    starts.sort();
    let mut vals = std::collections::BTreeMap::new();
    for (n, &(pos, k)) in starts.iter().enumerate() {
        let end = starts.get(n + 1).map(|s| s.0).unwrap_or(rest.len());
        vals.insert(k, rest[pos + k.len() + 1..end].trim());
    }
    let nat = |k: &str| -> Result<usize, String> {
        vals[k].parse::<usize>().map_err(|_| format!("bad {k}"))
    };
    let p = Params {
        eta: vals["eta"].parse().map_err(|e| format!("bad eta: {e}"))?,
        kappa_w: nat("kappa_w")? as u32,
        lambda_w: nat("lambda_w")? as u32,
        e_budget: nat("e_budget")?,
        size_cap: nat("size_cap")?,
        depth_cap: nat("depth_cap")?,
    };
    p.validate().map_err(|e| e.to_string())?;
    Ok(p)
}

impl ConditionDocument {
    pub fn to_text(&self) -> String {
        let c = &self.condition;
        let mut s = String::new();
        writeln!(s, "{CONDITION_HEADER}").unwrap();
        writeln!(s, "dialect {}", c.dialect()).unwrap();
        writeln!(s, "{}", params_line(&self.params)).unwrap();
        for p in c.points() {
            writeln!(s, "point {} {}", p.xi, p.level).unwrap();
        }
        for (i, j) in c.strict_pairs() {
            writeln!(s, "order {i} {j}").unwrap();
        }
        for (i, j, v) in c.meet_entries() {
            let lower = (0..c.len()).any(|k| c.le_idx(k, i) && c.le_idx(k, j));
            if v.is_empty() && !lower {
                continue;
            }
            let vs: Vec<String> = v.iter().map(|k| k.to_string()).collect();
            if vs.is_empty() {
                writeln!(s, "meet {i} {j} :").unwrap();
            } else {
                writeln!(s, "meet {i} {j} : {}", vs.join(" ")).unwrap();
            }
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self, FormatError> {
        let err = |line: usize, msg: &str| FormatError::Parse {
            line,
            msg: msg.to_string(),
        };
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(n, l)| (n + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty());
        match lines.next() {
            Some((_, l)) if l == CONDITION_HEADER => {}
            Some((n, _)) => return Err(err(n, "missing format header")),
            None => return Err(err(1, "empty document")),
        }
        let dialect: Dialect = match lines.next() {
            Some((n, l)) => l
                .strip_prefix("dialect ")
                .ok_or_else(|| err(n, "expected `dialect D`"))?
                .parse()
                .map_err(|e: String| err(n, &e))?,
            None => return Err(err(2, "missing dialect")),
        };
        let params = match lines.next() {
            Some((n, l)) => parse_params_line(l).map_err(|e| err(n, &e))?,
            None => return Err(err(3, "missing params")),
        };
        let mut points: Vec<Point> = Vec::new();
        let mut b = ConditionBuilder::new(dialect);
        let idx = |n: usize, tok: Option<&str>, points: &[Point]| -> Result<Point, FormatError> {
            let k: usize = tok
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| err(n, "expected a point index"))?;
            points
                .get(k)
                .cloned()
                .ok_or_else(|| err(n, "point index out of range"))
        };
        for (n, l) in lines {
            let (kw, rest) = l.split_once(' ').unwrap_or((l, ""));
            match kw {
                "point" => {
                    let (xi, level) = rest
                        .split_once(' ')
                        .ok_or_else(|| err(n, "expected `point XI LEVEL`"))?;
                    let xi: u32 = xi.parse().map_err(|_| err(n, "bad column"))?;
                    let level: Level = level.parse().map_err(|e| err(n, &format!("bad level: {e}")))?;
                    let p = Point::new(level, xi);
                    if points.last().is_some_and(|q| q >= &p) {
                        return Err(err(n, "points must be in strictly increasing order"));
                    }
                    b.point(p.clone());
                    points.push(p);
                }
                "order" => {
                    let mut it = rest.split_whitespace();
                    let a = idx(n, it.next(), &points)?;
                    let c = idx(n, it.next(), &points)?;
                    if it.next().is_some() {
                        return Err(err(n, "trailing tokens"));
                    }
                    b.relate(a, c);
                }
                "meet" => {
                    let (pair, val) = rest
                        .split_once(':')
                        .ok_or_else(|| err(n, "expected `meet I J : K...`"))?;
                    let mut it = pair.split_whitespace();
                    let a = idx(n, it.next(), &points)?;
                    let c = idx(n, it.next(), &points)?;
                    let v = val
                        .split_whitespace()
                        .map(|t| idx(n, Some(t), &points))
                        .collect::<Result<Vec<_>, _>>()?;
                    b.meet(&a, &c, v);
                }
                _ => return Err(err(n, "unknown line")),
            }
        }
        let condition = b.build().map_err(|e| err(0, &e.to_string()))?;
        Ok(ConditionDocument { params, condition })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conditions::extend_below;
    use crate::interval_tree::IntervalTree;
    use crate::ordinal::ord;

    #[test]
    fn round_trip_is_bit_exact() {
        let params = Params::new(ord("w^2"), 3, 6, 16).unwrap();
        let t = IntervalTree::new(params.clone());
        let mut b = ConditionBuilder::new(Dialect::Kappa);
        b.point(Point::top(0)).point(Point::top(1));
        let c = b.build().unwrap();
        let (c, _) = extend_below(&c, &Point::top(0), &ord("w + 1"), 0, &t).unwrap();
        let (c, s) = extend_below(&c, &Point::top(1), &ord("w*3 + 2"), 0, &t).unwrap();
        let (c, _) = extend_below(&c, &s, &ord("3"), 0, &t).unwrap();
        let doc = ConditionDocument {
            params,
            condition: c,
        };
        let text = doc.to_text();
        let back = ConditionDocument::from_text(&text).unwrap();
        assert_eq!(back, doc);
        assert_eq!(back.to_text(), text);
    }

    #[test]
    fn rejects_bad_documents() {
        assert!(ConditionDocument::from_text("").is_err());
        assert!(ConditionDocument::from_text("# other\n").is_err());
        let head = "# sposet condition v1\ndialect omega\nparams eta=w^2 kappa_w=3 lambda_w=6 e_budget=16 size_cap=64 depth_cap=16\n";
        assert!(ConditionDocument::from_text(&format!("{head}point 0 TOP\npoint 0 1\n")).is_err());
        assert!(ConditionDocument::from_text(&format!("{head}point 0 1\norder 0 3\n")).is_err());
        let ok = ConditionDocument::from_text(&format!("{head}point 0 1\npoint 1 w + 2\n")).unwrap();
        assert_eq!(ok.condition.len(), 2);
        assert_eq!(ok.params.eta, ord("w^2"));
    }
}
