//! Seeded families of isomorphic conditions.
//!
//! A template condition is grown by random extensions. Its sub-top points
//! live in a low region (levels at most `ε_2`, shared by every member) or in
//! a free block starting at `ε_{3 + kappa_w}`; top points are either shared
//! columns `0..root_tops` or the `new_tops` columns after them. Member `ν` is the template with the
//! free block moved up by `2ν` positions of `E` and the new top columns
//! moved right by `ν · new_tops`.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::amalgam::Bijection;
use crate::conditions::{extend_below, Condition, ConditionBuilder, Dialect, ValidateError};
use crate::interval_tree::{Interval, IntervalTree, TreeError};
use crate::ordinal::{Ordinal, OrdinalError};
use crate::point::{Level, Point};
use crate::unbounded::UnboundedFn;

/// E positions spanned by one member's free block.
pub const BLOCK_STRIDE: usize = 2;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FamilyConfig {
    pub dialect: Dialect,
    pub members: usize,
    pub steps: usize,
    pub root_tops: u32,
    pub new_tops: u32,
    /// Whether extensions may use the shared low region.
    pub low_region: bool,
    pub seed: u64,
}

impl FamilyConfig {
    pub fn new(dialect: Dialect, members: usize, seed: u64) -> Self {
        FamilyConfig {
            dialect,
            members,
            steps: 6,
            root_tops: 2,
            new_tops: 1,
            low_region: true,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CorpusError {
    #[error("{needed} top columns needed, lambda_w is {lambda_w}")]
    TopWidth { needed: u32, lambda_w: u32 },
    #[error("free block of member {member} needs ε_{needed}, budget is {budget}")]
    Budget {
        member: usize,
        needed: usize,
        budget: usize,
    },
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error(transparent)]
    Ordinal(#[from] OrdinalError),
    #[error(transparent)]
    Validate(#[from] ValidateError),
}

#[derive(Debug, Clone)]
pub struct TemplateFamily {
    pub template: Condition,
    /// Members that validate; `kept[k]` is the member index of `members[k]`.
    pub members: Vec<Condition>,
    pub kept: Vec<usize>,
    /// Points shared by every member.
    pub root: Vec<Point>,
    /// `member k → template` point maps.
    pub to_template: Vec<Bijection>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Region {
    Low,
    Free,
    Top,
}

struct Layout {
    low_bound: Ordinal,
    free_start: usize,
    free_lo: Ordinal,
    free_hi: Ordinal,
    root_tops: u32,
    new_tops: u32,
}

impl Layout {
    fn new(cfg: &FamilyConfig, tree: &IntervalTree) -> Result<Self, CorpusError> {
        let free_start = 3 + tree.params().kappa_w as usize;
        Ok(Layout {
            low_bound: tree.eps(2)?,
            free_start,
            free_lo: tree.eps(free_start)?,
            free_hi: tree.eps(free_start + 1)?,
            root_tops: cfg.root_tops,
            new_tops: cfg.new_tops,
        })
    }

    fn region(&self, p: &Point) -> Region {
        match &p.level {
            Level::Top => Region::Top,
            Level::Ord(a) if a <= &self.low_bound => Region::Low,
            Level::Ord(_) => Region::Free,
        }
    }

    fn is_root(&self, p: &Point) -> bool {
        match self.region(p) {
            Region::Low => true,
            Region::Free => false,
            Region::Top => p.xi < self.root_tops,
        }
    }
}

/// A level `E(I)[k] + j` inside `[ε_b, ε_{b+1})`.
fn sample_in_block(
    b: usize,
    tree: &IntervalTree,
    rng: &mut ChaCha8Rng,
) -> Result<Ordinal, CorpusError> {
    let i = Interval::new(tree.eps(b)?, tree.eps(b + 1)?);
    let e = tree.e_set(&i)?;
    let k = rng.gen_range(0..e.len().min(4));
    let j = rng.gen_range(0..3u64);
    let a = e[k].checked_add(&Ordinal::nat(j))?;
    Ok(if i.contains(&a) { a } else { e[k].clone() })
}

/// Moves a free level from block `b` to block `b + shift`.
fn shift_level(a: &Ordinal, shift: usize, tree: &IntervalTree) -> Result<Ordinal, CorpusError> {
    let e = tree.eps_all();
    let b = e.partition_point(|x| x <= a) - 1;
    let target = b + shift;
    let base = tree.eps(target)?;
    Ok(base.checked_add(&a.sub_left(&e[b])?)?)
}

fn grow_template(
    cfg: &FamilyConfig,
    lay: &Layout,
    tree: &IntervalTree,
    f: &UnboundedFn,
    rng: &mut ChaCha8Rng,
) -> Result<Condition, CorpusError> {
    let mut b = ConditionBuilder::new(cfg.dialect);
    for xi in 0..cfg.root_tops + cfg.new_tops {
        b.point(Point::top(xi));
    }
    let mut c = b.build().expect("points only");
    if c.is_empty() {
        return Ok(c);
    }
    for _ in 0..cfg.steps {
        for _attempt in 0..8 {
            let tgt = c.points().choose(rng).expect("nonempty").clone();
            let low = lay.region(&tgt) == Region::Low || (cfg.low_region && rng.gen_bool(0.4));
            let alpha = if low {
                sample_in_block(rng.gen_range(0..2), tree, rng)?
            } else {
                sample_in_block(lay.free_start, tree, rng)?
            };
            if Level::Ord(alpha.clone()) >= tgt.level {
                continue;
            }
            let Ok((next, _)) = extend_below(&c, &tgt, &alpha, 0, tree) else {
                continue;
            };
            let in_layout = next.points().iter().all(|p| match lay.region(p) {
                Region::Free => {
                    let a = p.level.ordinal().expect("sub-top");
                    a >= &lay.free_lo && a <= &lay.free_hi
                }
                _ => true,
            });
            if in_layout && next.is_valid(tree, f) {
                c = next;
                break;
            }
        }
    }
    Ok(c)
}

fn member_map(
    template: &Condition,
    nu: usize,
    lay: &Layout,
    tree: &IntervalTree,
) -> Result<Bijection, CorpusError> {
    let mut pairs = Vec::new();
    for p in template.points() {
        let img = match lay.region(p) {
            _ if lay.is_root(p) => p.clone(),
            Region::Free => {
                let a = p.level.ordinal().expect("sub-top");
                Point::new(shift_level(a, nu * BLOCK_STRIDE, tree)?, p.xi)
            }
            _ => Point::top(p.xi + nu as u32 * lay.new_tops),
        };
        pairs.push((img, p.clone()));
    }
    Ok(Bijection::from_pairs(pairs).expect("shifts are injective"))
}

/// Grows one template and instantiates `cfg.members` shifted copies.
/// Members failing validation are dropped.
pub fn template_family(
    cfg: &FamilyConfig,
    tree: &IntervalTree,
    f: &UnboundedFn,
) -> Result<TemplateFamily, CorpusError> {
    let needed = cfg.root_tops + cfg.members as u32 * cfg.new_tops;
    if needed > tree.params().lambda_w {
        return Err(CorpusError::TopWidth {
            needed,
            lambda_w: tree.params().lambda_w,
        });
    }
    let lay = Layout::new(cfg, tree)?;
    let last = lay.free_start + cfg.members.saturating_sub(1) * BLOCK_STRIDE + 1;
    if last > tree.params().e_budget {
        return Err(CorpusError::Budget {
            member: cfg.members - 1,
            needed: last,
            budget: tree.params().e_budget,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let template = grow_template(cfg, &lay, tree, f, &mut rng)?;
    let root: Vec<Point> = template
        .points()
        .iter()
        .filter(|p| lay.is_root(p))
        .cloned()
        .collect();
    let mut out = TemplateFamily {
        template: template.clone(),
        members: Vec::new(),
        kept: Vec::new(),
        root,
        to_template: Vec::new(),
    };
    for nu in 0..cfg.members {
        let g = member_map(&template, nu, &lay, tree)?;
        let back = g.inverse();
        let mut b = ConditionBuilder::new(cfg.dialect);
        for x in g.domain() {
            b.point(x.clone());
        }
        let pts = template.points();
        for (i, j) in template.strict_pairs() {
            b.relate(back.apply(&pts[i]), back.apply(&pts[j]));
        }
        for (i, j, v) in template.meet_entries() {
            b.meet(&back.apply(&pts[i]), &back.apply(&pts[j]), v.iter().map(|&k| back.apply(&pts[k])));
        }
        let m = b.build().expect("all points declared");
        if m.validate(tree, f)?.is_empty() {
            out.members.push(m);
            out.kept.push(nu);
            out.to_template.push(g);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interval_tree::Params;
    use crate::ordinal::ord;

    fn setup() -> (IntervalTree, UnboundedFn) {
        let t = IntervalTree::new(Params::new(ord("w^2"), 3, 6, 32).unwrap());
        let f = UnboundedFn::constant(6, t.eps_all(), 32).unwrap();
        (t, f)
    }

    #[test]
    fn members_are_shifted_copies() {
        let (t, f) = setup();
        for dialect in [Dialect::Kappa, Dialect::Omega] {
            for seed in 0..20 {
                let fam = template_family(&FamilyConfig::new(dialect, 4, seed), &t, &f).unwrap();
                assert_eq!(fam.members.len(), 4, "seed {seed}");
                for (k, m) in fam.members.iter().enumerate() {
                    assert_eq!(m.len(), fam.template.len());
                    for r in &fam.root {
                        assert!(m.contains(r));
                    }
                    let g = &fam.to_template[k];
                    for (i, j) in m.strict_pairs() {
                        assert!(fam.template.lt(&g.apply(&m.points()[i]), &g.apply(&m.points()[j])));
                    }
                }
                // pairwise intersections are exactly the root
                for a in 0..4 {
                    for b in a + 1..4 {
                        let n = fam.members[a]
                            .points()
                            .iter()
                            .filter(|p| fam.members[b].contains(p))
                            .count();
                        assert_eq!(n, fam.root.len());
                    }
                }
            }
        }
    }

    #[test]
    fn shift_moves_whole_blocks() {
        let (t, _) = setup();
        assert_eq!(shift_level(&ord("w*6 + 2"), 2, &t).unwrap(), ord("w*8 + 2"));
        assert_eq!(shift_level(&ord("w*7"), 4, &t).unwrap(), ord("w*11"));
    }

    #[test]
    fn rejects_too_many_members() {
        let (t, f) = setup();
        let cfg = FamilyConfig::new(Dialect::Kappa, 5, 1);
        assert!(matches!(template_family(&cfg, &t, &f), Err(CorpusError::TopWidth { .. })));
    }
}
