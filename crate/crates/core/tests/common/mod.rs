//! Oracles and fixtures shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeSet;

use sposet_core::amalgam::{check_r_contract, Bijection};
use sposet_core::conditions::{Condition, ConditionBuilder, Dialect};
use sposet_core::{ord, IntervalTree, Level, Ordinal, Params, Point};
use sposet_core::unbounded::UnboundedFn;

pub fn setup(eta: &str, e_budget: usize) -> (IntervalTree, UnboundedFn) {
    let t = IntervalTree::new(Params::new(ord(eta), 3, 6, e_budget).unwrap());
    let f = UnboundedFn::constant(6, t.eps_all(), e_budget).unwrap();
    (t, f)
}

/// `{u ∈ root : u ≺ x, y}` computed from the two inputs.
pub fn root_filter(p: &Condition, q: &Condition, root: &[Point], x: &Point, y: &Point) -> Vec<Point> {
    let lt = |c: &Condition, a: &Point, b: &Point| c.contains(a) && c.contains(b) && c.lt(a, b);
    let mut v: Vec<Point> = root
        .iter()
        .filter(|u| (lt(p, u, x) || lt(q, u, x)) && (lt(p, u, y) || lt(q, u, y)))
        .cloned()
        .collect();
    v.sort();
    v
}

/// Subsets of `items` as index masks, smallest first.
fn subsets<T: Clone>(items: &[T]) -> Vec<Vec<T>> {
    (0u32..1 << items.len())
        .map(|m| {
            items
                .iter()
                .enumerate()
                .filter(|(i, _)| m >> i & 1 == 1)
                .map(|(_, x)| x.clone())
                .collect()
        })
        .collect()
}

#[derive(Clone)]
struct FreshOption {
    down: Vec<Point>,
    up: Vec<Point>,
}

/// Exhaustive search for a common extension of `p` and `q` with at most
/// `max_fresh` fresh points at `levels` satisfying the amalgamation
/// contract. Fresh points take the smallest free columns; down-sets are
/// generated by root points, up-sets by `h`-invariant up-closed subsets of
/// `X_p`, and fresh-fresh order is tried both ways. Returns the first
/// solution by number of fresh points.
#[allow(clippy::too_many_arguments)]
pub fn eta_oracle(
    p: &Condition,
    q: &Condition,
    h: &Bijection,
    levels: &[Ordinal],
    gamma: &Ordinal,
    tree: &IntervalTree,
    f: &UnboundedFn,
    max_fresh: usize,
) -> Option<(Condition, usize)> {
    let mut base = ConditionBuilder::new(Dialect::Kappa);
    for c in [p, q] {
        for x in c.points() {
            base.point(x.clone());
        }
        for (i, j) in c.strict_pairs() {
            base.relate(c.points()[i].clone(), c.points()[j].clone());
        }
        for (i, j, v) in c.meet_entries() {
            base.meet(&c.points()[i], &c.points()[j], v.iter().map(|&k| c.points()[k].clone()));
        }
    }
    let union = base.build().unwrap();
    let root: Vec<Point> = p.points().iter().filter(|x| q.contains(x) && !x.is_top()).cloned().collect();
    let xp: Vec<Point> = p.points().to_vec();
    let mut ups: Vec<Vec<Point>> = Vec::new();
    for u in subsets(&xp) {
        let set: BTreeSet<&Point> = u.iter().collect();
        let closed = u.iter().all(|a| xp.iter().all(|b| !p.lt(a, b) || set.contains(b)));
        if !closed {
            continue;
        }
        let mut full: BTreeSet<Point> = u.iter().cloned().collect();
        full.extend(u.iter().map(|x| h.apply(x)));
        ups.push(full.into_iter().collect());
    }
    let downs = subsets(&root);
    let options = |beta: &Ordinal| -> Vec<FreshOption> {
        let lb = Level::Ord(beta.clone());
        let mut out = Vec::new();
        for d in &downs {
            if d.iter().any(|x| x.level >= lb) {
                continue;
            }
            for u in &ups {
                if u.iter().any(|x| x.level <= lb) {
                    continue;
                }
                // a new relation between old points would break extension
                if d.iter().any(|a| u.iter().any(|b| !union.lt(a, b))) {
                    continue;
                }
                out.push(FreshOption { down: d.clone(), up: u.clone() });
            }
        }
        out
    };
    let check = |b: &ConditionBuilder| -> Option<Condition> {
        let r = b.build().ok()?;
        if !r.validate(tree, f).ok()?.is_empty() {
            return None;
        }
        check_r_contract(p, q, h, &r, gamma).is_empty().then_some(r)
    };
    if let Some(r) = check(&base) {
        return Some((r, 0));
    }
    let levels: Vec<Ordinal> = levels.iter().filter(|l| *l < gamma).cloned().collect();
    let width = tree.params().kappa_w;
    let fresh_at = |b: &ConditionBuilder, beta: &Ordinal| {
        (0..width).map(|xi| Point::new(beta.clone(), xi)).find(|x| !b.has_point(x))
    };
    if max_fresh >= 1 {
        for beta in &levels {
            let Some(y) = fresh_at(&base, beta) else { continue };
            for o in options(beta) {
                let mut b = base.clone();
                b.point(y.clone());
                for d in &o.down {
                    b.relate(d.clone(), y.clone());
                }
                for u in &o.up {
                    b.relate(y.clone(), u.clone());
                }
                if let Some(r) = check(&b) {
                    return Some((r, 1));
                }
            }
        }
    }
    if max_fresh >= 2 {
        for (i, b1) in levels.iter().enumerate() {
            for b2 in &levels[i..] {
                let o1 = options(b1);
                let o2 = options(b2);
                let mut b0 = base.clone();
                let Some(y1) = fresh_at(&b0, b1) else { continue };
                b0.point(y1.clone());
                let Some(y2) = fresh_at(&b0, b2) else { continue };
                b0.point(y2.clone());
                for a in &o1 {
                    for c in &o2 {
                        for rel in 0..3 {
                            if rel == 1 && y1.level >= y2.level || rel == 2 && y2.level >= y1.level {
                                continue;
                            }
                            let mut b = b0.clone();
                            for (y, o) in [(&y1, a), (&y2, c)] {
                                for d in &o.down {
                                    b.relate(d.clone(), y.clone());
                                }
                                for u in &o.up {
                                    b.relate(y.clone(), u.clone());
                                }
                            }
                            match rel {
                                1 => {
                                    b.relate(y1.clone(), y2.clone());
                                }
                                2 => {
                                    b.relate(y2.clone(), y1.clone());
                                }
                                _ => {}
                            }
                            if let Some(r) = check(&b) {
                                return Some((r, 2));
                            }
                        }
                    }
                }
            }
        }
    }
    None
}

/// Brute force over ordered `m`-tuples of `nu`-subsets given as bitmasks;
/// tuples with repeated or overlapping members are skipped. True when every
/// family has two members with `F > γ` pointwise, for every `γ`.
pub fn naive_star(f: &UnboundedFn, m: usize, nu: usize, gammas: &[Ordinal]) -> bool {
    let l = f.lambda_w();
    let masks: Vec<u32> = (0u32..1 << l).filter(|x| x.count_ones() as usize == nu).collect();
    let good = |a: u32, b: u32, g: &Ordinal| {
        (0..l).all(|x| (0..l).all(|y| a >> x & 1 == 0 || b >> y & 1 == 0 || f.value(x, y) > g))
    };
    let mut idx = vec![0usize; m];
    for g in gammas {
        loop {
            let fam: Vec<u32> = idx.iter().map(|&i| masks[i]).collect();
            let disjoint = (0..m).all(|a| (0..m).all(|b| a == b || fam[a] & fam[b] == 0));
            if disjoint && !(0..m).any(|a| (0..m).any(|b| a != b && good(fam[a], fam[b], g))) {
                return false;
            }
            // odometer over all m-tuples
            let mut k = 0;
            while k < m {
                idx[k] += 1;
                if idx[k] < masks.len() {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
            if k == m {
                break;
            }
        }
    }
    true
}

/// All open sets of the topology generated by `subbase` on `n` points:
/// finite intersections closed under unions, by saturation.
pub fn open_sets(n: usize, subbase: &[u64]) -> BTreeSet<u64> {
    let full = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
    let mut base: BTreeSet<u64> = BTreeSet::from([full]);
    for &s in subbase {
        let next: Vec<u64> = base.iter().map(|b| b & s).collect();
        base.extend(next);
    }
    let mut open: BTreeSet<u64> = BTreeSet::from([0]);
    for b in base {
        let next: Vec<u64> = open.iter().map(|o| o | b).collect();
        open.extend(next);
    }
    open
}

/// Cantor–Bendixson levels by brute force: `p` is isolated in `Y` when some
/// open set meets `Y` exactly in `{p}`.
pub fn naive_cb(n: usize, subbase: &[u64]) -> (Vec<Vec<usize>>, Vec<usize>) {
    let open = open_sets(n, subbase);
    let mut y: BTreeSet<usize> = (0..n).collect();
    let mut levels = Vec::new();
    loop {
        let ymask: u64 = y.iter().fold(0, |a, &p| a | 1 << p);
        let iso: Vec<usize> = y.iter().copied().filter(|&p| open.iter().any(|&o| o & ymask == 1 << p)).collect();
        if iso.is_empty() {
            break;
        }
        for p in &iso {
            y.remove(p);
        }
        levels.push(iso);
    }
    (levels, y.into_iter().collect())
}
