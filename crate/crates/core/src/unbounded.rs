//! Symmetric colourings `F : [λ]² → E` and the finite unboundedness check.
//!
//! Values are stored as indices into the materialized `E = {ε_ν}`. An
//! ordinal is the set of smaller ordinals, so "`β ∈ F{i, j}`" is read as
//! `β < F{i, j}` throughout.

use std::fmt::Write as _;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ordinal::Ordinal;

pub const FORMAT_HEADER: &str = "# sposet unbounded-fn v1";

/// Default number of families `star_search` will enumerate without `force`.
pub const DEFAULT_FAMILY_LIMIT: u128 = 10_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum UnboundedError {
    #[error("family members {0} and {1} intersect")]
    NotDisjoint(usize, usize),
    #[error("family member {index} has {size} elements, limit is {limit}")]
    SetTooLarge {
        index: usize,
        size: usize,
        limit: usize,
    },
    #[error("element {0} is outside lambda_w")]
    OutOfRange(u32),
    #[error("{count} families exceed the enumeration limit {limit}")]
    TooManyFamilies { count: u128, limit: u128 },
    #[error("invalid search shape: {0}")]
    Shape(String),
    #[error("table value index {index} is not materialized (only {available})")]
    ValueOutOfRange { index: usize, available: usize },
    #[error("greedy generation found no passing value for pair {{{0}, {1}}}")]
    GreedyFailed(u32, u32),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// `F` restricted to `lambda_w` top columns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnboundedFn {
    lambda_w: u32,
    eps: Arc<[Ordinal]>,
    table: Vec<usize>,
}

/// Result of checking one family against one threshold.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum StarVerdict {
    /// Indices `(a, b)` into the family with `F > γ` on `a × b`.
    Witness(usize, usize),
    Counterexample,
}

/// Result of an exhaustive search.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum SearchOutcome {
    Certificate { instances: u64 },
    Failure { gamma: Ordinal, family: Vec<Vec<u32>> },
}

impl SearchOutcome {
    pub fn is_certificate(&self) -> bool {
        matches!(self, SearchOutcome::Certificate { .. })
    }
}

/// One probe for greedy generation: every family of `m` disjoint
/// `nu`-sets against every `gamma`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Probe {
    pub m: usize,
    pub nu: usize,
    pub gammas: Vec<Ordinal>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Strategy {
    Random(u64),
    Greedy(Vec<Probe>),
}

fn pair_index(lambda_w: u32, i: u32, j: u32) -> usize {
    let (i, j) = if i < j { (i, j) } else { (j, i) };
    assert!(i != j && j < lambda_w, "bad pair {{{i}, {j}}}");
    let (i, j, l) = (i as usize, j as usize, lambda_w as usize);
    i * (2 * l - i - 1) / 2 + (j - i - 1)
}

fn pair_count(lambda_w: u32) -> usize {
    let l = lambda_w as usize;
    l * l.saturating_sub(1) / 2
}

impl UnboundedFn {
    /// Builds a table from `(i, j) ↦ eps index` given in pair order
    /// `{0,1}, {0,2}, ..., {1,2}, ...`.
    pub fn from_table(
        lambda_w: u32,
        eps: Arc<[Ordinal]>,
        table: Vec<usize>,
    ) -> Result<Self, UnboundedError> {
        if table.len() != pair_count(lambda_w) {
            return Err(UnboundedError::Shape(format!(
                "table has {} entries, expected {}",
                table.len(),
                pair_count(lambda_w)
            )));
        }
        if let Some(&bad) = table.iter().find(|&&v| v >= eps.len()) {
            return Err(UnboundedError::ValueOutOfRange {
                index: bad,
                available: eps.len(),
            });
        }
        Ok(UnboundedFn {
            lambda_w,
            eps,
            table,
        })
    }

    pub fn constant(lambda_w: u32, eps: Arc<[Ordinal]>, index: usize) -> Result<Self, UnboundedError> {
        Self::from_table(lambda_w, eps, vec![index; pair_count(lambda_w)])
    }

    pub fn from_fn(
        lambda_w: u32,
        eps: Arc<[Ordinal]>,
        mut f: impl FnMut(u32, u32) -> usize,
    ) -> Result<Self, UnboundedError> {
        let mut table = Vec::with_capacity(pair_count(lambda_w));
        for i in 0..lambda_w {
            for j in i + 1..lambda_w {
                table.push(f(i, j));
            }
        }
        Self::from_table(lambda_w, eps, table)
    }

    pub fn lambda_w(&self) -> u32 {
        self.lambda_w
    }

    pub fn eps(&self) -> &Arc<[Ordinal]> {
        &self.eps
    }

    /// The `E`-index of `F{i, j}`.
    pub fn index(&self, i: u32, j: u32) -> usize {
        self.table[pair_index(self.lambda_w, i, j)]
    }

    /// `F{i, j}`.
    pub fn value(&self, i: u32, j: u32) -> &Ordinal {
        &self.eps[self.index(i, j)]
    }

    /// `F{i, j} > gamma`.
    pub fn exceeds(&self, i: u32, j: u32, gamma: &Ordinal) -> bool {
        self.value(i, j) > gamma
    }

    /// Pairs in canonical order with their value indices.
    pub fn entries(&self) -> impl Iterator<Item = (u32, u32, usize)> + '_ {
        let l = self.lambda_w;
        (0..l)
            .flat_map(move |i| (i + 1..l).map(move |j| (i, j)))
            .zip(self.table.iter().copied())
            .map(|((i, j), v)| (i, j, v))
    }

    fn check_family(&self, family: &[Vec<u32>], kappa_w: usize) -> Result<(), UnboundedError> {
        let mut owner = vec![usize::MAX; self.lambda_w as usize];
        for (k, a) in family.iter().enumerate() {
            if a.len() >= kappa_w {
                return Err(UnboundedError::SetTooLarge {
                    index: k,
                    size: a.len(),
                    limit: kappa_w - 1,
                });
            }
            for &x in a {
                let slot = owner
                    .get_mut(x as usize)
                    .ok_or(UnboundedError::OutOfRange(x))?;
                if *slot != usize::MAX {
                    return Err(UnboundedError::NotDisjoint(*slot, k));
                }
                *slot = k;
            }
        }
        Ok(())
    }

    fn dominates(&self, a: &[u32], b: &[u32], gamma: &Ordinal) -> bool {
        a.iter()
            .all(|&x| b.iter().all(|&y| self.exceeds(x, y, gamma)))
    }

    fn first_witness(&self, family: &[Vec<u32>], gamma: &Ordinal) -> StarVerdict {
        for a in 0..family.len() {
            for b in a + 1..family.len() {
                if self.dominates(&family[a], &family[b], gamma) {
                    return StarVerdict::Witness(a, b);
                }
            }
        }
        StarVerdict::Counterexample
    }

    /// Looks for distinct `a, b` in `family` with `F > gamma` on `a × b`.
    /// Members must be pairwise disjoint with fewer than `kappa_w` elements.
    pub fn star_verify(
        &self,
        gamma: &Ordinal,
        family: &[Vec<u32>],
        kappa_w: usize,
    ) -> Result<StarVerdict, UnboundedError> {
        self.check_family(family, kappa_w)?;
        Ok(self.first_witness(family, gamma))
    }

    /// Exhausts every family of `m` pairwise-disjoint `nu`-subsets of
    /// `lambda_w` against every threshold in `gammas`.
    ///
    /// Families are visited in a canonical order (members sorted by their
    /// least element, members enumerated lexicographically) and thresholds
    /// in the given order, so the reported failure is deterministic.
    pub fn star_search(
        &self,
        m: usize,
        nu: usize,
        gammas: &[Ordinal],
        limit: u128,
        force: bool,
    ) -> Result<SearchOutcome, UnboundedError> {
        if m < 2 {
            return Err(UnboundedError::Shape(format!("m = {m} must be at least 2")));
        }
        if nu == 0 {
            return Err(UnboundedError::Shape("nu must be positive".into()));
        }
        let count = family_count(self.lambda_w as usize, m, nu);
        if count > limit && !force {
            return Err(UnboundedError::TooManyFamilies { count, limit });
        }
        let mut instances = 0u64;
        for gamma in gammas {
            let mut failure = None;
            let mut used = vec![false; self.lambda_w as usize];
            let mut fam: Vec<Vec<u32>> = Vec::with_capacity(m);
            enumerate_families(
                self.lambda_w as usize,
                m,
                nu,
                &mut used,
                &mut fam,
                &mut |f| {
                    instances += 1;
                    if self.first_witness(f, gamma) == StarVerdict::Counterexample {
                        failure = Some(f.to_vec());
                        false
                    } else {
                        true
                    }
                },
            );
            if let Some(family) = failure {
                return Ok(SearchOutcome::Failure {
                    gamma: gamma.clone(),
                    family,
                });
            }
        }
        Ok(SearchOutcome::Certificate { instances })
    }

    /// Generates a table over the materialized `E` (`eps`).
    pub fn generate(
        lambda_w: u32,
        eps: Arc<[Ordinal]>,
        strategy: &Strategy,
    ) -> Result<Self, UnboundedError> {
        if eps.is_empty() {
            return Err(UnboundedError::Shape("no materialized E values".into()));
        }
        match strategy {
            Strategy::Random(seed) => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let n = eps.len();
                Self::from_fn(lambda_w, eps, |_, _| rng.gen_range(0..n))
            }
            Strategy::Greedy(probes) => Self::greedy(lambda_w, eps, probes),
        }
    }

    /// Per pair in canonical order, the largest value that keeps every probe
    /// passing while the still-unassigned pairs sit at the maximum.
    fn greedy(lambda_w: u32, eps: Arc<[Ordinal]>, probes: &[Probe]) -> Result<Self, UnboundedError> {
        let top = eps.len() - 1;
        let mut f = Self::constant(lambda_w, eps, top)?;
        let pairs: Vec<(u32, u32)> = f.entries().map(|(i, j, _)| (i, j)).collect();
        for (k, (i, j)) in pairs.into_iter().enumerate() {
            let mut chosen = None;
            for v in (0..=top).rev() {
                f.table[k] = v;
                let mut ok = true;
                for p in probes {
                    if !f.star_search(p.m, p.nu, &p.gammas, u128::MAX, true)?.is_certificate() {
                        ok = false;
                        break;
                    }
                }
                if ok {
                    chosen = Some(v);
                    break;
                }
            }
            match chosen {
                Some(v) => f.table[k] = v,
                None => return Err(UnboundedError::GreedyFailed(i, j)),
            }
        }
        Ok(f)
    }

    /// Line document: header, `lambda_w N`, then `i j eps_index` per pair.
    pub fn to_document(&self) -> String {
        let mut s = String::new();
        writeln!(s, "{FORMAT_HEADER}").unwrap();
        writeln!(s, "lambda_w {}", self.lambda_w).unwrap();
        for (i, j, v) in self.entries() {
            writeln!(s, "{i} {j} {v}").unwrap();
        }
        s
    }

    pub fn from_document(text: &str, eps: Arc<[Ordinal]>) -> Result<Self, UnboundedError> {
        let err = |line: usize, msg: &str| UnboundedError::Parse {
            line,
            msg: msg.to_string(),
        };
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        match lines.next() {
            Some((_, l)) if l.trim() == FORMAT_HEADER => {}
            Some((n, _)) => return Err(err(n + 1, "missing format header")),
            None => return Err(err(1, "empty document")),
        }
        let lambda_w = match lines.next() {
            Some((n, l)) => {
                let mut it = l.split_whitespace();
                if it.next() != Some("lambda_w") {
                    return Err(err(n + 1, "expected `lambda_w N`"));
                }
                it.next()
                    .and_then(|v| v.parse::<u32>().ok())
                    .ok_or_else(|| err(n + 1, "bad lambda_w"))?
            }
            None => return Err(err(2, "missing lambda_w")),
        };
        let mut table = vec![usize::MAX; pair_count(lambda_w)];
        for (n, l) in lines {
            let nums: Vec<u64> = l
                .split_whitespace()
                .map(|x| x.parse::<u64>())
                .collect::<Result<_, _>>()
                .map_err(|_| err(n + 1, "expected three naturals"))?;
            let [i, j, v] = nums[..] else {
                return Err(err(n + 1, "expected three naturals"));
            };
            if i >= j || j >= lambda_w as u64 {
                return Err(err(n + 1, "pair must satisfy i < j < lambda_w"));
            }
            let slot = &mut table[pair_index(lambda_w, i as u32, j as u32)];
            if *slot != usize::MAX {
                return Err(err(n + 1, "duplicate pair"));
            }
            *slot = v as usize;
        }
        if table.contains(&usize::MAX) {
            return Err(err(0, "table is not total"));
        }
        Self::from_table(lambda_w, eps, table)
    }
}

/// Number of families of `m` pairwise-disjoint `nu`-subsets of an
/// `l`-element set: `C(l, νm) · (νm)! / ((ν!)^m · m!)`. Saturates.
pub fn family_count(l: usize, m: usize, nu: usize) -> u128 {
    let total = nu * m;
    if total > l {
        return 0;
    }
    // C(l, νm)·(νm)! = l!/(l-νm)!
    let mut num: u128 = 1;
    for k in 0..total {
        num = num.saturating_mul((l - k) as u128);
    }
    let mut den: u128 = 1;
    for _ in 0..m {
        for k in 1..=nu {
            den = den.saturating_mul(k as u128);
        }
    }
    for k in 1..=m {
        den = den.saturating_mul(k as u128);
    }
    if num == u128::MAX {
        return u128::MAX;
    }
    num / den
}

/// Calls `visit` on every family; stops early when `visit` returns false.
/// Returns false if stopped.
fn enumerate_families(
    l: usize,
    m: usize,
    nu: usize,
    used: &mut [bool],
    fam: &mut Vec<Vec<u32>>,
    visit: &mut dyn FnMut(&[Vec<u32>]) -> bool,
) -> bool {
    if fam.len() == m {
        return visit(fam);
    }
    let min_start = fam.last().map(|a| a[0] as usize + 1).unwrap_or(0);
    for start in min_start..l {
        if used[start] {
            continue;
        }
        used[start] = true;
        let mut set = vec![start as u32];
        let cont = extend_set(l, m, nu, start + 1, used, &mut set, fam, visit);
        used[start] = false;
        if !cont {
            return false;
        }
    }
    true
}

#[allow(clippy::too_many_arguments)]
fn extend_set(
    l: usize,
    m: usize,
    nu: usize,
    from: usize,
    used: &mut [bool],
    set: &mut Vec<u32>,
    fam: &mut Vec<Vec<u32>>,
    visit: &mut dyn FnMut(&[Vec<u32>]) -> bool,
) -> bool {
    if set.len() == nu {
        fam.push(set.clone());
        let cont = enumerate_families(l, m, nu, used, fam, visit);
        fam.pop();
        return cont;
    }
    for x in from..l {
        if used[x] {
            continue;
        }
        used[x] = true;
        set.push(x as u32);
        let cont = extend_set(l, m, nu, x + 1, used, set, fam, visit);
        set.pop();
        used[x] = false;
        if !cont {
            return false;
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ordinal::ord;

    fn eps(n: usize) -> Arc<[Ordinal]> {
        (0..n as u64).map(|k| ord("w^2").fund_seq(k).unwrap()).collect()
    }

    /// Naive oracle: ordered tuples of bitmasks, deduplicated by requiring
    /// strictly increasing masks.
    fn naive(f: &UnboundedFn, m: usize, nu: usize, gammas: &[Ordinal]) -> bool {
        let l = f.lambda_w();
        let masks: Vec<u32> = (0u32..1 << l).filter(|x| x.count_ones() as usize == nu).collect();
        fn rec(
            f: &UnboundedFn,
            masks: &[u32],
            m: usize,
            chosen: &mut Vec<u32>,
            g: &Ordinal,
        ) -> bool {
            if chosen.len() == m {
                for a in 0..m {
                    for b in 0..m {
                        if a == b {
                            continue;
                        }
                        let mut all = true;
                        for x in 0..32 {
                            for y in 0..32 {
                                if chosen[a] >> x & 1 == 1 && chosen[b] >> y & 1 == 1 && !(f.value(x, y) > g) {
                                    all = false;
                                }
                            }
                        }
                        if all {
                            return true;
                        }
                    }
                }
                return false;
            }
            for &mk in masks {
                if chosen.last().is_some_and(|&p| mk <= p) {
                    continue;
                }
                if chosen.iter().any(|&c| c & mk != 0) {
                    continue;
                }
                chosen.push(mk);
                let ok = rec(f, masks, m, chosen, g);
                chosen.pop();
                if !ok {
                    return false;
                }
            }
            true
        }
        gammas.iter().all(|g| rec(f, &masks, m, &mut Vec::new(), g))
    }

    #[test]
    fn pair_index_is_bijective() {
        for l in 2..9u32 {
            let mut seen = vec![false; pair_count(l)];
            for i in 0..l {
                for j in i + 1..l {
                    let k = pair_index(l, i, j);
                    assert!(!seen[k]);
                    seen[k] = true;
                    assert_eq!(k, pair_index(l, j, i));
                }
            }
            assert!(seen.iter().all(|&b| b));
        }
    }

    #[test]
    fn verify_examples() {
        let e = eps(4);
        let f = UnboundedFn::constant(6, e.clone(), 3).unwrap();
        let fam = vec![vec![0, 1], vec![2], vec![4, 5]];
        assert_eq!(f.star_verify(&e[2], &fam, 3).unwrap(), StarVerdict::Witness(0, 1));
        let zero = UnboundedFn::constant(6, e.clone(), 0).unwrap();
        assert_eq!(zero.star_verify(&e[0], &fam, 3).unwrap(), StarVerdict::Counterexample);
        let g = UnboundedFn::from_fn(4, e.clone(), |i, j| match (i, j) {
            (0, 1) | (2, 3) => 1,
            _ => 2,
        })
        .unwrap();
        assert_eq!(
            g.star_verify(&e[1], &[vec![0, 1], vec![2, 3]], 3).unwrap(),
            StarVerdict::Witness(0, 1)
        );
        assert_eq!(
            f.star_verify(&e[1], &[vec![0, 1], vec![1, 2]], 3),
            Err(UnboundedError::NotDisjoint(0, 1))
        );
        assert!(matches!(
            f.star_verify(&e[1], &[vec![0, 1, 2]], 3),
            Err(UnboundedError::SetTooLarge { .. })
        ));
        assert_eq!(g.value(3, 2), g.value(2, 3));
    }

    #[test]
    fn search_examples() {
        let e = eps(4);
        let f = UnboundedFn::constant(3, e.clone(), 2).unwrap();
        assert!(f.star_search(2, 1, &[e[1].clone()], DEFAULT_FAMILY_LIMIT, false).unwrap().is_certificate());
        let g = UnboundedFn::constant(2, e.clone(), 1).unwrap();
        assert_eq!(
            g.star_search(2, 1, &[e[1].clone()], DEFAULT_FAMILY_LIMIT, false).unwrap(),
            SearchOutcome::Failure {
                gamma: e[1].clone(),
                family: vec![vec![0], vec![1]]
            }
        );
        let r = UnboundedFn::generate(5, e.clone(), &Strategy::Random(7)).unwrap();
        let gammas = [e[1].clone(), e[2].clone()];
        assert_eq!(
            r.star_search(2, 2, &gammas, DEFAULT_FAMILY_LIMIT, false).unwrap().is_certificate(),
            naive(&r, 2, 2, &gammas)
        );
        assert!(matches!(
            f.star_search(2, 1, &[], 1, false),
            Err(UnboundedError::TooManyFamilies { .. })
        ));
    }

    #[test]
    fn family_count_matches_enumeration() {
        for l in 1..=8 {
            for m in 2..=3 {
                for nu in 1..=2 {
                    let mut n = 0u128;
                    enumerate_families(l, m, nu, &mut vec![false; l], &mut Vec::new(), &mut |_| {
                        n += 1;
                        true
                    });
                    assert_eq!(n, family_count(l, m, nu), "l={l} m={m} nu={nu}");
                }
            }
        }
    }

    #[test]
    fn search_agrees_with_naive_on_random_tables() {
        for seed in 0..40 {
            let e = eps(5);
            let l = 4 + (seed % 3) as u32;
            let f = UnboundedFn::generate(l, e.clone(), &Strategy::Random(seed)).unwrap();
            for m in 2..=3 {
                for nu in 1..=2 {
                    let gammas = [e[0].clone(), e[2].clone()];
                    let fast = f.star_search(m, nu, &gammas, DEFAULT_FAMILY_LIMIT, false).unwrap();
                    assert_eq!(fast.is_certificate(), naive(&f, m, nu, &gammas), "seed {seed}");
                }
            }
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let e = eps(8);
        let a = UnboundedFn::generate(6, e.clone(), &Strategy::Random(1)).unwrap();
        let b = UnboundedFn::generate(6, e.clone(), &Strategy::Random(1)).unwrap();
        assert_eq!(a, b);
        let single = UnboundedFn::generate(2, e, &Strategy::Random(3)).unwrap();
        assert_eq!(single.entries().count(), 1);
    }

    #[test]
    fn greedy_passes_its_probes() {
        let e = eps(3);
        let probes = vec![Probe {
            m: 2,
            nu: 2,
            gammas: vec![e[1].clone()],
        }];
        let f = UnboundedFn::generate(5, e.clone(), &Strategy::Greedy(probes.clone())).unwrap();
        assert!(f.star_search(2, 2, &probes[0].gammas, DEFAULT_FAMILY_LIMIT, false).unwrap().is_certificate());

        // exhaustive existence check: some table on 4 points with values in
        // {ε_1, ε_2} passes the m = 2, ν = 1 probe at γ = ε_1
        let exists = (0u32..1 << 6).any(|bits| {
            let mut k = 0;
            let t = UnboundedFn::from_fn(4, e.clone(), |_, _| {
                k += 1;
                1 + (bits >> (k - 1) & 1) as usize
            })
            .unwrap();
            naive(&t, 2, 1, &[e[1].clone()])
        });
        assert!(exists);
        let g = UnboundedFn::generate(
            4,
            e.clone(),
            &Strategy::Greedy(vec![Probe { m: 2, nu: 1, gammas: vec![e[1].clone()] }]),
        )
        .unwrap();
        assert!(naive(&g, 2, 1, &[e[1].clone()]));
        // adversarial probe: nothing exceeds the largest value
        assert!(matches!(
            UnboundedFn::generate(
                4,
                e.clone(),
                &Strategy::Greedy(vec![Probe { m: 2, nu: 1, gammas: vec![e[2].clone()] }])
            ),
            Err(UnboundedError::GreedyFailed(0, 1))
        ));
    }

    #[test]
    fn document_roundtrip() {
        let e = eps(6);
        let f = UnboundedFn::generate(6, e.clone(), &Strategy::Random(11)).unwrap();
        let doc = f.to_document();
        let g = UnboundedFn::from_document(&doc, e.clone()).unwrap();
        assert_eq!(f, g);
        assert_eq!(doc, g.to_document());
        assert!(UnboundedFn::from_document("lambda_w 2\n0 1 0\n", e.clone()).is_err());
        assert!(UnboundedFn::from_document(&format!("{FORMAT_HEADER}\nlambda_w 3\n0 1 0\n"), e).is_err());
    }
}
