//! Ordinals below ε₀ in Cantor normal form.
//!
//! An [`Ordinal`] is a finite list of terms `ω^e·c` with strictly decreasing
//! exponents and positive coefficients. The representation is canonical, so
//! structural equality is ordinal equality and the derived hash is sound.
//!
//! The textual wire format is
//!
//! ```text
//! expr := term ("+" term)*
//! term := "w" ("^" atom)? ("*" nat)? | nat
//! atom := nat | "w" ("^" atom)? | "(" expr ")"
//! ```
//!
//! Rendering always produces the canonical form, e.g. `w^2 + w*3 + 5`.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OrdinalError {
    #[error("parse error at byte {pos}: {msg}")]
    Parse { pos: usize, msg: String },
    #[error("coefficient overflow")]
    Overflow,
    #[error("{0} is not a limit ordinal")]
    NotLimit(Ordinal),
    #[error("{0} is not below w^w")]
    OutOfRange(Ordinal),
    #[error("cannot subtract {sub} from the smaller ordinal {from}")]
    Underflow { from: Ordinal, sub: Ordinal },
}

/// One Cantor-normal-form term `ω^exponent · coefficient`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Term {
    pub exponent: Ordinal,
    pub coefficient: u64,
}

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Ordinal {
    terms: Arc<[Term]>,
}

/// Zero, successor or limit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Class {
    Zero,
    Successor(Ordinal),
    Limit,
}

impl Ordinal {
    pub fn zero() -> Self {
        Ordinal {
            terms: Arc::from(Vec::new()),
        }
    }

    pub fn one() -> Self {
        Self::nat(1)
    }

    pub fn nat(n: u64) -> Self {
        if n == 0 {
            return Self::zero();
        }
        Self::from_terms_unchecked(vec![Term {
            exponent: Self::zero(),
            coefficient: n,
        }])
    }

    pub fn omega() -> Self {
        Self::omega_pow(Self::one())
    }

    /// `ω^e`.
    pub fn omega_pow(e: Ordinal) -> Self {
        Self::monomial(e, 1)
    }

    /// `ω^e · c`; zero when `c == 0`.
    pub fn monomial(e: Ordinal, c: u64) -> Self {
        if c == 0 {
            return Self::zero();
        }
        Self::from_terms_unchecked(vec![Term {
            exponent: e,
            coefficient: c,
        }])
    }

    /// Builds an ordinal from `(exponent, coefficient)` pairs read as a sum
    /// from left to right. Any list is accepted; absorption normalizes it.
    pub fn from_sum<I>(terms: I) -> Result<Self, OrdinalError>
    where
        I: IntoIterator<Item = (Ordinal, u64)>,
    {
        let mut acc = Self::zero();
        for (e, c) in terms {
            acc = acc.checked_add(&Self::monomial(e, c))?;
        }
        Ok(acc)
    }

    fn from_terms_unchecked(terms: Vec<Term>) -> Self {
        debug_assert!(terms.windows(2).all(|w| w[0].exponent > w[1].exponent));
        debug_assert!(terms.iter().all(|t| t.coefficient > 0));
        Ordinal {
            terms: Arc::from(terms),
        }
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// The value as a natural number, if finite.
    pub fn as_nat(&self) -> Option<u64> {
        match &*self.terms {
            [] => Some(0),
            [t] if t.exponent.is_zero() => Some(t.coefficient),
            _ => None,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.as_nat().is_some()
    }

    pub fn classify(&self) -> Class {
        match self.terms.last() {
            None => Class::Zero,
            Some(last) if last.exponent.is_zero() => {
                let mut terms = self.terms.to_vec();
                let last = terms.last_mut().expect("nonempty");
                if last.coefficient == 1 {
                    terms.pop();
                } else {
                    last.coefficient -= 1;
                }
                Class::Successor(Self::from_terms_unchecked(terms))
            }
            Some(_) => Class::Limit,
        }
    }

    pub fn is_limit(&self) -> bool {
        matches!(self.classify(), Class::Limit)
    }

    pub fn is_successor(&self) -> bool {
        matches!(self.classify(), Class::Successor(_))
    }

    /// `self + 1`.
    pub fn succ(&self) -> Self {
        self.checked_add(&Self::one()).expect("coefficient overflow")
    }

    pub fn checked_add(&self, rhs: &Ordinal) -> Result<Ordinal, OrdinalError> {
        let Some(head) = rhs.terms.first() else {
            return Ok(self.clone());
        };
        let mut out: Vec<Term> = Vec::with_capacity(self.terms.len() + rhs.terms.len());
        let mut merged = None;
        for t in self.terms.iter() {
            match t.exponent.cmp(&head.exponent) {
                Ordering::Greater => out.push(t.clone()),
                Ordering::Equal => {
                    merged = Some(
                        t.coefficient
                            .checked_add(head.coefficient)
                            .ok_or(OrdinalError::Overflow)?,
                    );
                    break;
                }
                Ordering::Less => break,
            }
        }
        out.push(Term {
            exponent: head.exponent.clone(),
            coefficient: merged.unwrap_or(head.coefficient),
        });
        out.extend(rhs.terms[1..].iter().cloned());
        Ok(Self::from_terms_unchecked(out))
    }

    /// `self · n` for a natural `n`.
    pub fn mul_nat(&self, n: u64) -> Result<Ordinal, OrdinalError> {
        if n == 0 || self.is_zero() {
            return Ok(Self::zero());
        }
        // (ω^a·c + rest)·n = ω^a·(c·n) + rest
        let mut terms = self.terms.to_vec();
        terms[0].coefficient = terms[0]
            .coefficient
            .checked_mul(n)
            .ok_or(OrdinalError::Overflow)?;
        Ok(Self::from_terms_unchecked(terms))
    }

    /// The unique `d` with `sub + d == self`.
    pub fn sub_left(&self, sub: &Ordinal) -> Result<Ordinal, OrdinalError> {
        if sub > self {
            return Err(OrdinalError::Underflow {
                from: self.clone(),
                sub: sub.clone(),
            });
        }
        for (i, a) in self.terms.iter().enumerate() {
            let Some(b) = sub.terms.get(i) else {
                return Ok(Self::from_terms_unchecked(self.terms[i..].to_vec()));
            };
            if a == b {
                continue;
            }
            if a.exponent == b.exponent {
                let mut rest = vec![Term {
                    exponent: a.exponent.clone(),
                    coefficient: a.coefficient - b.coefficient,
                }];
                rest.extend(self.terms[i + 1..].iter().cloned());
                return Ok(Self::from_terms_unchecked(rest));
            }
            return Ok(Self::from_terms_unchecked(self.terms[i..].to_vec()));
        }
        Ok(Self::zero())
    }

    /// Exponent of the leading term (zero for zero).
    pub fn degree(&self) -> Ordinal {
        self.terms
            .first()
            .map(|t| t.exponent.clone())
            .unwrap_or_else(Self::zero)
    }

    /// Canonical fundamental sequence: for `λ = γ + ω^(β+1)` this is
    /// `γ + ω^β·k`, for `λ = γ + ω^β` with `β` limit it is `γ + ω^(β[k])`.
    pub fn fund_seq(&self, k: u64) -> Result<Ordinal, OrdinalError> {
        if !self.is_limit() {
            return Err(OrdinalError::NotLimit(self.clone()));
        }
        let (last, init) = self.terms.split_last().expect("limit is nonzero");
        let mut base = init.to_vec();
        if last.coefficient > 1 {
            base.push(Term {
                exponent: last.exponent.clone(),
                coefficient: last.coefficient - 1,
            });
        }
        let base = Self::from_terms_unchecked(base);
        let tail = match last.exponent.classify() {
            Class::Successor(pred) => Self::monomial(pred, k),
            Class::Limit => Self::omega_pow(last.exponent.fund_seq(k)?),
            Class::Zero => unreachable!("limit ordinals end in a positive exponent"),
        };
        base.checked_add(&tail)
    }

    /// Largest `e` such that `ω^e` divides `self` (0 for zero). This is the
    /// Cantor–Bendixson level of the point `self` in any ordinal space.
    pub fn cb_level(&self) -> Result<u64, OrdinalError> {
        if self.terms.iter().any(|t| !t.exponent.is_finite()) {
            return Err(OrdinalError::OutOfRange(self.clone()));
        }
        Ok(self
            .terms
            .last()
            .and_then(|t| t.exponent.as_nat())
            .unwrap_or(0))
    }

    /// True when every exponent is finite, i.e. `self < ω^ω`.
    pub fn below_omega_omega(&self) -> bool {
        self.terms.iter().all(|t| t.exponent.is_finite())
    }

    fn fmt_atom(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &*self.terms {
            [] => write!(f, "0"),
            [t] if t.exponent.is_zero() => write!(f, "{}", t.coefficient),
            [t] if t.coefficient == 1 => t.fmt_power(f),
            _ => write!(f, "({self})"),
        }
    }
}

impl Term {
    fn fmt_power(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "w")?;
        if self.exponent != Ordinal::one() {
            write!(f, "^")?;
            self.exponent.fmt_atom(f)?;
        }
        Ok(())
    }
}

impl Ord for Ordinal {
    fn cmp(&self, other: &Self) -> Ordering {
        for (a, b) in self.terms.iter().zip(other.terms.iter()) {
            let c = a
                .exponent
                .cmp(&b.exponent)
                .then(a.coefficient.cmp(&b.coefficient));
            if c != Ordering::Equal {
                return c;
            }
        }
        self.terms.len().cmp(&other.terms.len())
    }
}

impl PartialOrd for Ordinal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl std::ops::Add for &Ordinal {
    type Output = Ordinal;

    /// Panics on coefficient overflow; use [`Ordinal::checked_add`] otherwise.
    fn add(self, rhs: &Ordinal) -> Ordinal {
        self.checked_add(rhs).expect("ordinal coefficient overflow")
    }
}

impl std::ops::Add for Ordinal {
    type Output = Ordinal;

    fn add(self, rhs: Ordinal) -> Ordinal {
        &self + &rhs
    }
}

impl From<u64> for Ordinal {
    fn from(n: u64) -> Self {
        Ordinal::nat(n)
    }
}

impl fmt::Display for Ordinal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        for (i, t) in self.terms.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            if t.exponent.is_zero() {
                write!(f, "{}", t.coefficient)?;
                continue;
            }
            t.fmt_power(f)?;
            if t.coefficient != 1 {
                write!(f, "*{}", t.coefficient)?;
            }
        }
        Ok(())
    }
}

impl fmt::Debug for Ordinal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Debug for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:?}, {})", self.exponent, self.coefficient)
    }
}

impl FromStr for Ordinal {
    type Err = OrdinalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut p = Parser {
            src: s.as_bytes(),
            pos: 0,
        };
        let v = p.expr()?;
        p.skip_ws();
        if p.pos != p.src.len() {
            return Err(p.error("trailing input"));
        }
        Ok(v)
    }
}

impl Serialize for Ordinal {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Ordinal {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn error(&self, msg: &str) -> OrdinalError {
        OrdinalError::Parse {
            pos: self.pos,
            msg: msg.to_string(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    /// Consumes `w` or the UTF-8 encoding of `ω`.
    fn eat_omega(&mut self) -> bool {
        match self.peek() {
            Some(b'w') => {
                self.pos += 1;
                true
            }
            Some(0xCF) if self.src.get(self.pos + 1) == Some(&0x89) => {
                self.pos += 2;
                true
            }
            _ => false,
        }
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn nat(&mut self) -> Result<u64, OrdinalError> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.error("expected a natural number"));
        }
        std::str::from_utf8(&self.src[start..self.pos])
            .expect("ascii digits")
            .parse()
            .map_err(|_| OrdinalError::Overflow)
    }

    fn expr(&mut self) -> Result<Ordinal, OrdinalError> {
        let mut acc = self.term()?;
        while self.eat(b'+') {
            let t = self.term()?;
            acc = acc.checked_add(&t)?;
        }
        Ok(acc)
    }

    fn term(&mut self) -> Result<Ordinal, OrdinalError> {
        if self.eat_omega() {
            let exponent = if self.eat(b'^') {
                self.atom()?
            } else {
                Ordinal::one()
            };
            let coefficient = if self.eat(b'*') {
                let c = self.nat()?;
                if c == 0 {
                    return Err(self.error("coefficient must be positive"));
                }
                c
            } else {
                1
            };
            Ok(Ordinal::monomial(exponent, coefficient))
        } else {
            self.nat().map(Ordinal::nat)
        }
    }

    fn atom(&mut self) -> Result<Ordinal, OrdinalError> {
        if self.eat(b'(') {
            let v = self.expr()?;
            if !self.eat(b')') {
                return Err(self.error("expected ')'"));
            }
            Ok(v)
        } else if self.eat_omega() {
            let exponent = if self.eat(b'^') {
                self.atom()?
            } else {
                Ordinal::one()
            };
            Ok(Ordinal::omega_pow(exponent))
        } else {
            self.nat().map(Ordinal::nat)
        }
    }
}

/// Shorthand used throughout the tests and the corpus generators.
///
/// Panics on malformed input.
pub fn ord(s: &str) -> Ordinal {
    s.parse()
        .unwrap_or_else(|e| panic!("bad ordinal literal {s:?}: {e}"))
}
