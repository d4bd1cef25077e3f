use proptest::prelude::*;
use sposet_core::{ord, Ordinal};

/// Ordinals below ω^ω as coefficient vectors, lowest exponent first.
#[derive(Debug, Clone, PartialEq, Eq)]
struct Cnf(Vec<u64>);

impl Cnf {
    fn trim(mut self) -> Self {
        while self.0.last() == Some(&0) {
            self.0.pop();
        }
        self
    }

    fn cmp(&self, o: &Cnf) -> std::cmp::Ordering {
        let n = self.0.len().max(o.0.len());
        for e in (0..n).rev() {
            let a = self.0.get(e).copied().unwrap_or(0);
            let b = o.0.get(e).copied().unwrap_or(0);
            if a != b {
                return a.cmp(&b);
            }
        }
        std::cmp::Ordering::Equal
    }

    fn add(&self, o: &Cnf) -> Cnf {
        let Some(h) = o.0.iter().rposition(|&c| c != 0) else {
            return self.clone();
        };
        let n = self.0.len().max(o.0.len());
        let mut out = vec![0; n];
        for e in 0..n {
            let a = self.0.get(e).copied().unwrap_or(0);
            let b = o.0.get(e).copied().unwrap_or(0);
            out[e] = match e.cmp(&h) {
                std::cmp::Ordering::Greater => a,
                std::cmp::Ordering::Equal => a + b,
                std::cmp::Ordering::Less => b,
            };
        }
        Cnf(out).trim()
    }

    fn to_ordinal(&self) -> Ordinal {
        let terms = self
            .0
            .iter()
            .enumerate()
            .rev()
            .filter(|(_, &c)| c != 0)
            .map(|(e, &c)| (Ordinal::nat(e as u64), c));
        Ordinal::from_sum(terms).unwrap()
    }

    fn lowest(&self) -> u64 {
        self.0.iter().position(|&c| c != 0).unwrap_or(0) as u64
    }
}

fn cnf() -> impl Strategy<Value = Cnf> {
    prop::collection::vec(prop_oneof![Just(0u64), 0u64..5], 0..5).prop_map(|v| Cnf(v).trim())
}

proptest! {
    #[test]
    fn order_matches_coefficient_model(a in cnf(), b in cnf()) {
        prop_assert_eq!(a.to_ordinal().cmp(&b.to_ordinal()), a.cmp(&b));
    }

    #[test]
    fn addition_matches_coefficient_model(a in cnf(), b in cnf()) {
        let sum = a.to_ordinal().checked_add(&b.to_ordinal()).unwrap();
        prop_assert_eq!(sum, a.add(&b).to_ordinal());
    }

    #[test]
    fn text_round_trips(a in cnf()) {
        let o = a.to_ordinal();
        prop_assert_eq!(o.to_string().parse::<Ordinal>().unwrap(), o);
    }

    #[test]
    fn cb_level_is_lowest_exponent(a in cnf()) {
        prop_assert_eq!(a.to_ordinal().cb_level().unwrap(), a.lowest());
    }

    #[test]
    fn left_subtraction_inverts_addition(a in cnf(), b in cnf()) {
        let (x, y) = (a.to_ordinal(), b.to_ordinal());
        prop_assert_eq!(x.checked_add(&y).unwrap().sub_left(&x).unwrap(), y);
    }

    #[test]
    fn fundamental_sequences_are_cofinal(a in cnf(), b in cnf()) {
        let lam = a.to_ordinal();
        prop_assume!(lam.is_limit());
        let below = b.to_ordinal();
        let mut prev = Ordinal::zero();
        let mut hit = below >= lam;
        for k in 1..12 {
            let x = lam.fund_seq(k).unwrap();
            prop_assert!(x < lam);
            prop_assert!(k == 1 || x > prev);
            hit |= x > below;
            prev = x;
        }
        // cofinality within twelve steps holds for coefficients below 5
        prop_assert!(hit);
    }
}

#[test]
fn classification() {
    assert!(ord("0").is_zero());
    assert!(ord("w*3").is_limit());
    assert!(ord("w^2 + 4").is_successor());
    assert_eq!(ord("w^2 + w").degree(), ord("2"));
    assert_eq!(ord("w^w").fund_seq(3).unwrap(), ord("w^3"));
    assert!(ord("w^w").cb_level().is_err());
    assert!(ord("5").fund_seq(1).is_err());
}

#[test]
fn absorption_on_the_left() {
    assert_eq!(ord("3").checked_add(&ord("w")).unwrap(), ord("w"));
    assert_eq!(ord("w").checked_add(&ord("w^2")).unwrap(), ord("w^2"));
    assert_eq!(ord("w + 1").mul_nat(3).unwrap(), ord("w*3 + 1"));
}
