//! The cofinal tree of ordinal intervals over `[0, η)`.
//!
//! Every interval `I = [lo, hi)` of the tree carries a closed cofinal set
//! `E(I)`. For limit `hi` it is the ω-sequence `ε_0 = lo`,
//! `ε_{k+1} = max(hi[k+1], ε_k + 1)` and the children are the consecutive
//! blocks `[ε_k, ε_{k+1})`. For successor `hi = b + 1` we have
//! `E(I) = {lo, b}` and children `[lo, b)` (dropped when empty) and `{b}`.
//! A singleton `{b}` reproduces itself at every deeper level.
//!
//! Only the first `e_budget + 1` elements of each `E(I)` are materialized,
//! so a limit node has `e_budget` children.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ordinal::{Class, Ordinal, OrdinalError};
use crate::point::Level;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TreeError {
    #[error("{alpha} lies beyond the {budget} materialized children of {interval}")]
    BudgetExceeded {
        interval: Interval,
        alpha: Ordinal,
        budget: usize,
    },
    #[error("requested {requested} children of {interval}, budget is {budget}")]
    PrefixTooLong {
        interval: Interval,
        requested: usize,
        budget: usize,
    },
    #[error("no interval starting at {alpha} within depth {cap}")]
    DepthExceeded { alpha: Ordinal, cap: usize },
    #[error("singleton interval {0} has no proper children")]
    Degenerate(Interval),
    #[error("{alpha} is not below eta = {eta}")]
    OutOfRange { alpha: Ordinal, eta: Ordinal },
    #[error(transparent)]
    Ordinal(#[from] OrdinalError),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParamsError {
    #[error("kappa_w must be at least 2 (got {0})")]
    KappaTooSmall(u32),
    #[error("lambda_w must exceed kappa_w ({lambda_w} <= {kappa_w})")]
    LambdaTooSmall { kappa_w: u32, lambda_w: u32 },
    #[error("e_budget must be at least 2 (got {0})")]
    BudgetTooSmall(usize),
    #[error("eta = {0} is not a limit ordinal")]
    EtaNotLimit(Ordinal),
    #[error("{0} must be positive")]
    Zero(&'static str),
}

/// Half-open ordinal interval `[lo, hi)`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Interval {
    pub lo: Ordinal,
    pub hi: Ordinal,
}

impl Interval {
    pub fn new(lo: Ordinal, hi: Ordinal) -> Self {
        debug_assert!(lo <= hi);
        Interval { lo, hi }
    }

    pub fn contains(&self, a: &Ordinal) -> bool {
        &self.lo <= a && a < &self.hi
    }

    pub fn is_singleton(&self) -> bool {
        self.lo.succ() == self.hi
    }

    pub fn is_subset_of(&self, other: &Interval) -> bool {
        other.lo <= self.lo && self.hi <= other.hi
    }

    pub fn is_disjoint_from(&self, other: &Interval) -> bool {
        self.hi <= other.lo || other.hi <= self.lo
    }

    /// Whether this interval isolates a point at `low` from one at `high`:
    /// `lo < low < hi <= high`.
    pub fn isolates(&self, low: &Ordinal, high: &Level) -> bool {
        let below_high = match high {
            Level::Top => true,
            Level::Ord(h) => &self.hi <= h,
        };
        &self.lo < low && low < &self.hi && below_high
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {})", self.lo, self.hi)
    }
}

impl fmt::Debug for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

/// Desk-scale stand-ins for the cardinals and the top level.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Params {
    pub eta: Ordinal,
    /// Width of every level below the top.
    pub kappa_w: u32,
    /// Width of the top level.
    pub lambda_w: u32,
    /// Number of children materialized per limit node.
    pub e_budget: usize,
    /// Maximal number of points in a condition.
    pub size_cap: usize,
    /// Maximal tree depth explored when locating left endpoints.
    pub depth_cap: usize,
}

impl Params {
    pub const DEFAULT_SIZE_CAP: usize = 64;
    pub const DEFAULT_DEPTH_CAP: usize = 16;

    pub fn new(
        eta: Ordinal,
        kappa_w: u32,
        lambda_w: u32,
        e_budget: usize,
    ) -> Result<Self, ParamsError> {
        let p = Params {
            eta,
            kappa_w,
            lambda_w,
            e_budget,
            size_cap: Self::DEFAULT_SIZE_CAP,
            depth_cap: Self::DEFAULT_DEPTH_CAP,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), ParamsError> {
        if self.kappa_w < 2 {
            return Err(ParamsError::KappaTooSmall(self.kappa_w));
        }
        if self.lambda_w <= self.kappa_w {
            return Err(ParamsError::LambdaTooSmall {
                kappa_w: self.kappa_w,
                lambda_w: self.lambda_w,
            });
        }
        if self.e_budget < 2 {
            return Err(ParamsError::BudgetTooSmall(self.e_budget));
        }
        if !self.eta.is_limit() {
            return Err(ParamsError::EtaNotLimit(self.eta.clone()));
        }
        if self.size_cap == 0 {
            return Err(ParamsError::Zero("size_cap"));
        }
        if self.depth_cap == 0 {
            return Err(ParamsError::Zero("depth_cap"));
        }
        Ok(())
    }

    /// Column bound for a level.
    pub fn width(&self, level: &Level) -> u32 {
        match level {
            Level::Top => self.lambda_w,
            Level::Ord(_) => self.kappa_w,
        }
    }
}

#[derive(Default)]
struct Memo {
    e: HashMap<Interval, Arc<[Ordinal]>>,
    orbit: HashMap<Ordinal, Arc<[Ordinal]>>,
}

/// Lazily expanded interval tree with memoized `E(I)` prefixes.
pub struct IntervalTree {
    params: Params,
    memo: RwLock<Memo>,
}

impl fmt::Debug for IntervalTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("IntervalTree")
            .field("params", &self.params)
            .finish_non_exhaustive()
    }
}

impl IntervalTree {
    pub fn new(params: Params) -> Self {
        IntervalTree {
            params,
            memo: RwLock::new(Memo::default()),
        }
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn eta(&self) -> &Ordinal {
        &self.params.eta
    }

    pub fn root(&self) -> Interval {
        Interval::new(Ordinal::zero(), self.params.eta.clone())
    }

    /// The materialized prefix of `E(I)`: `e_budget + 1` elements for limit
    /// right endpoints, `{lo, b}` for `hi = b + 1`.
    pub fn e_set(&self, i: &Interval) -> Result<Arc<[Ordinal]>, TreeError> {
        if let Some(v) = self.memo.read().expect("memo lock").e.get(i) {
            return Ok(v.clone());
        }
        let v: Arc<[Ordinal]> = match i.hi.classify() {
            Class::Limit => {
                let mut seq = Vec::with_capacity(self.params.e_budget + 1);
                seq.push(i.lo.clone());
                for k in 1..=self.params.e_budget as u64 {
                    let candidate = i.hi.fund_seq(k)?;
                    let bumped = seq.last().expect("nonempty").checked_add(&Ordinal::one())?;
                    seq.push(candidate.max(bumped));
                }
                Arc::from(seq)
            }
            Class::Successor(b) => {
                if b == i.lo {
                    Arc::from(vec![b])
                } else {
                    Arc::from(vec![i.lo.clone(), b])
                }
            }
            Class::Zero => Arc::from(Vec::new()),
        };
        self.memo
            .write()
            .expect("memo lock")
            .e
            .entry(i.clone())
            .or_insert(v.clone());
        Ok(v)
    }

    /// `ε_ν = E([0, η))[ν]` for `ν <= e_budget`.
    pub fn eps(&self, nu: usize) -> Result<Ordinal, TreeError> {
        let root = self.root();
        let e = self.e_set(&root)?;
        e.get(nu).cloned().ok_or(TreeError::PrefixTooLong {
            interval: root,
            requested: nu + 1,
            budget: self.params.e_budget + 1,
        })
    }

    /// All materialized `ε_ν`, `ν <= e_budget`.
    pub fn eps_all(&self) -> Arc<[Ordinal]> {
        self.e_set(&self.root()).expect("root expansion cannot fail")
    }

    /// Index `ν` with `ε_ν == a`, if `a` is a materialized element of `E`.
    pub fn eps_index(&self, a: &Ordinal) -> Option<usize> {
        self.eps_all().binary_search(a).ok()
    }

    /// Upper bound (exclusive) of the ordinals whose root-level position is
    /// materialized: `ε_{e_budget}`.
    pub fn horizon(&self) -> Ordinal {
        self.eps_all().last().cloned().expect("nonempty")
    }

    /// The first `prefix` children of `I` (all of them for successor `hi`).
    pub fn children(&self, i: &Interval, prefix: usize) -> Result<Vec<Interval>, TreeError> {
        if i.is_singleton() {
            return Err(TreeError::Degenerate(i.clone()));
        }
        let e = self.e_set(i)?;
        match i.hi.classify() {
            Class::Limit => {
                if prefix > self.params.e_budget {
                    return Err(TreeError::PrefixTooLong {
                        interval: i.clone(),
                        requested: prefix,
                        budget: self.params.e_budget,
                    });
                }
                Ok(e.windows(2)
                    .take(prefix)
                    .map(|w| Interval::new(w[0].clone(), w[1].clone()))
                    .collect())
            }
            _ => {
                let b = e.last().expect("nonempty").clone();
                let mut out = Vec::with_capacity(2);
                if i.lo < b {
                    out.push(Interval::new(i.lo.clone(), b.clone()));
                }
                out.push(Interval::new(b.clone(), b.succ()));
                Ok(out)
            }
        }
    }

    /// The child of `I` containing `alpha` (`I` itself for singletons).
    fn step(&self, i: &Interval, alpha: &Ordinal) -> Result<Interval, TreeError> {
        if i.is_singleton() {
            return Ok(i.clone());
        }
        let e = self.e_set(i)?;
        match i.hi.classify() {
            Class::Limit => {
                // largest k with e[k] <= alpha
                let k = match e.binary_search(alpha) {
                    Ok(k) => k,
                    Err(k) => k - 1,
                };
                if k + 1 >= e.len() {
                    return Err(TreeError::BudgetExceeded {
                        interval: i.clone(),
                        alpha: alpha.clone(),
                        budget: self.params.e_budget,
                    });
                }
                Ok(Interval::new(e[k].clone(), e[k + 1].clone()))
            }
            _ => {
                let b = e.last().expect("nonempty").clone();
                if alpha < &b {
                    Ok(Interval::new(i.lo.clone(), b))
                } else {
                    let hi = b.succ();
                    Ok(Interval::new(b, hi))
                }
            }
        }
    }

    fn check_range(&self, alpha: &Ordinal) -> Result<(), TreeError> {
        if alpha >= &self.params.eta {
            return Err(TreeError::OutOfRange {
                alpha: alpha.clone(),
                eta: self.params.eta.clone(),
            });
        }
        Ok(())
    }

    /// `I(α, n)`: the member of the `n`-th layer containing `alpha`.
    pub fn locate(&self, alpha: &Ordinal, n: usize) -> Result<Interval, TreeError> {
        self.check_range(alpha)?;
        let mut cur = self.root();
        for _ in 0..n {
            cur = self.step(&cur, alpha)?;
        }
        Ok(cur)
    }

    /// The chain `I(α, 0), I(α, 1), ..., I(α, n)`.
    pub fn path(&self, alpha: &Ordinal, n: usize) -> Result<Vec<Interval>, TreeError> {
        self.check_range(alpha)?;
        let mut out = Vec::with_capacity(n + 1);
        out.push(self.root());
        for _ in 0..n {
            let next = self.step(out.last().expect("nonempty"), alpha)?;
            out.push(next);
        }
        Ok(out)
    }

    /// `n(α)`: the least depth at which `alpha` is a left endpoint.
    pub fn n_of(&self, alpha: &Ordinal) -> Result<usize, TreeError> {
        self.check_range(alpha)?;
        let mut cur = self.root();
        for n in 0..=self.params.depth_cap {
            if &cur.lo == alpha {
                return Ok(n);
            }
            cur = self.step(&cur, alpha)?;
        }
        Err(TreeError::DepthExceeded {
            alpha: alpha.clone(),
            cap: self.params.depth_cap,
        })
    }

    /// `o(α) = ⋃_{m < n(α)} E(I(α, m)) ∩ α`, sorted.
    pub fn orbit(&self, alpha: &Ordinal) -> Result<Arc<[Ordinal]>, TreeError> {
        if let Some(v) = self.memo.read().expect("memo lock").orbit.get(alpha) {
            return Ok(v.clone());
        }
        let n = self.n_of(alpha)?;
        let mut out: Vec<Ordinal> = Vec::new();
        let mut cur = self.root();
        for _ in 0..n {
            let e = self.e_set(&cur)?;
            out.extend(e.iter().filter(|x| *x < alpha).cloned());
            cur = self.step(&cur, alpha)?;
        }
        out.sort();
        out.dedup();
        let v: Arc<[Ordinal]> = Arc::from(out);
        self.memo
            .write()
            .expect("memo lock")
            .orbit
            .entry(alpha.clone())
            .or_insert(v.clone());
        Ok(v)
    }

    /// Membership test for `o(α)`.
    pub fn in_orbit(&self, beta: &Ordinal, alpha: &Ordinal) -> Result<bool, TreeError> {
        Ok(self.orbit(alpha)?.binary_search(beta).is_ok())
    }

    /// `(j(α, β), J(α, β))`; for `β = Top` this is `(None, I(α, 1))`.
    pub fn j_and_big_j(
        &self,
        alpha: &Ordinal,
        beta: &Level,
    ) -> Result<(Option<usize>, Interval), TreeError> {
        let beta = match beta {
            Level::Top => return Ok((None, self.locate(alpha, 1)?)),
            Level::Ord(b) => b,
        };
        self.check_range(beta)?;
        assert!(alpha < beta, "j(α, β) needs α < β");
        let mut a = self.root();
        let mut b = self.root();
        for j in 0..=self.params.depth_cap {
            let na = self.step(&a, alpha)?;
            let nb = self.step(&b, beta)?;
            if na != nb {
                return Ok((Some(j), na));
            }
            a = na;
            b = nb;
        }
        Err(TreeError::DepthExceeded {
            alpha: beta.clone(),
            cap: self.params.depth_cap,
        })
    }

    /// `J(α, β)`.
    pub fn big_j(&self, alpha: &Ordinal, beta: &Level) -> Result<Interval, TreeError> {
        self.j_and_big_j(alpha, beta).map(|(_, j)| j)
    }

    /// Every interval of the tree that isolates a point at `low` from one at
    /// `high`. Such intervals lie on the path of `low` at depths `1..n(low)`.
    pub fn isolating(&self, low: &Ordinal, high: &Level) -> Result<Vec<Interval>, TreeError> {
        let n = self.n_of(low)?;
        let path = self.path(low, n)?;
        let mut out: Vec<Interval> = path
            .into_iter()
            .filter(|i| i.isolates(low, high))
            .collect();
        out.dedup();
        Ok(out)
    }

    /// Breadth-first truncation: every node up to depth `depth`, limit nodes
    /// expanded to `e_budget` children. Singletons are listed once, at the
    /// depth where they first appear.
    pub fn truncation(&self, depth: usize) -> Result<Vec<TreeNode>, TreeError> {
        let mut out = vec![TreeNode {
            interval: self.root(),
            depth: 0,
            parent: None,
        }];
        let mut frontier = vec![0usize];
        for d in 1..=depth {
            let mut next = Vec::new();
            for &idx in &frontier {
                let node = out[idx].interval.clone();
                if node.is_singleton() {
                    continue;
                }
                for child in self.children(&node, self.params.e_budget)? {
                    out.push(TreeNode {
                        interval: child,
                        depth: d,
                        parent: Some(idx),
                    });
                    next.push(out.len() - 1);
                }
            }
            frontier = next;
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreeNode {
    pub interval: Interval,
    pub depth: usize,
    pub parent: Option<usize>,
}

/// A violated tree axiom found by [`check_tree_axioms`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AxiomViolation {
    pub axiom: &'static str,
    pub detail: String,
}

/// Checks the five tree axioms on the truncation of depth `depth`:
/// (i) laminarity, (ii) proper subintervals of limit-ended intervals end
/// strictly earlier, (iii) each layer is pairwise disjoint and children tile
/// their parent from its left endpoint, (iv) refinement, (v) every
/// materialized endpoint is a left endpoint within the depth cap.
pub fn check_tree_axioms(
    tree: &IntervalTree,
    depth: usize,
) -> Result<Vec<AxiomViolation>, TreeError> {
    let nodes = tree.truncation(depth)?;
    let mut bad = Vec::new();

    let mut distinct: Vec<&Interval> = nodes.iter().map(|n| &n.interval).collect();
    distinct.sort_by(|a, b| a.lo.cmp(&b.lo).then(b.hi.cmp(&a.hi)));
    distinct.dedup();

    // (i) and (ii) with a containment stack
    let mut stack: Vec<&Interval> = Vec::new();
    for i in &distinct {
        while let Some(top) = stack.last() {
            if top.hi <= i.lo {
                stack.pop();
            } else {
                break;
            }
        }
        if let Some(top) = stack.last() {
            if i.hi > top.hi {
                bad.push(AxiomViolation {
                    axiom: "(i)",
                    detail: format!("{i} overlaps {top} without nesting"),
                });
            }
        }
        for outer in &stack {
            if outer.hi.is_limit() && i.hi >= outer.hi {
                bad.push(AxiomViolation {
                    axiom: "(ii)",
                    detail: format!("{i} inside {outer} does not end earlier"),
                });
            }
        }
        stack.push(i);
    }

    // (iii) children tile the parent from its left endpoint
    let mut kids: HashMap<usize, Vec<&Interval>> = HashMap::new();
    for n in &nodes {
        if let Some(p) = n.parent {
            kids.entry(p).or_default().push(&n.interval);
        }
    }
    for (p, ch) in &kids {
        let parent = &nodes[*p].interval;
        let mut expect = parent.lo.clone();
        for c in ch {
            if c.lo != expect {
                bad.push(AxiomViolation {
                    axiom: "(iii)",
                    detail: format!("child {c} of {parent} does not start at {expect}"),
                });
            }
            expect = c.hi.clone();
        }
        if !parent.hi.is_limit() && expect != parent.hi {
            bad.push(AxiomViolation {
                axiom: "(iii)",
                detail: format!("children of {parent} stop at {expect}"),
            });
        }
    }
    // (iii) each layer, with singletons carried forward, is pairwise disjoint
    for d in 0..=depth {
        let mut layer: Vec<&Interval> = nodes
            .iter()
            .filter(|n| n.depth == d || (n.depth < d && n.interval.is_singleton()))
            .map(|n| &n.interval)
            .collect();
        layer.sort();
        for w in layer.windows(2) {
            if !w[0].is_disjoint_from(w[1]) {
                bad.push(AxiomViolation {
                    axiom: "(iii)",
                    detail: format!("{} and {} overlap in layer {d}", w[0], w[1]),
                });
            }
        }
    }

    // (iv) refinement
    for n in &nodes {
        if let Some(p) = n.parent {
            if !n.interval.is_subset_of(&nodes[p].interval) {
                bad.push(AxiomViolation {
                    axiom: "(iv)",
                    detail: format!("{} not inside parent {}", n.interval, nodes[p].interval),
                });
            }
        }
    }

    // (v) endpoints are realized as left endpoints
    let mut endpoints: Vec<&Ordinal> = Vec::new();
    for n in &nodes {
        endpoints.push(&n.interval.lo);
        if &n.interval.hi < tree.eta() {
            endpoints.push(&n.interval.hi);
        }
    }
    endpoints.sort();
    endpoints.dedup();
    for a in endpoints {
        match tree.n_of(a) {
            Ok(k) => {
                let i = tree.locate(a, k)?;
                if &i.lo != a {
                    bad.push(AxiomViolation {
                        axiom: "(v)",
                        detail: format!("I({a}, n({a})) = {i}"),
                    });
                }
            }
            Err(TreeError::BudgetExceeded { .. }) => {}
            Err(e) => bad.push(AxiomViolation {
                axiom: "(v)",
                detail: e.to_string(),
            }),
        }
    }
    Ok(bad)
}
