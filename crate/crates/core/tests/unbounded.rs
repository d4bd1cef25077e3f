mod common;

use std::sync::Arc;

use common::naive_star;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sposet_core::unbounded::*;
use sposet_core::{ord, Ordinal};

fn eps() -> Arc<[Ordinal]> {
    Arc::from((0..6u64).map(|k| Ordinal::omega().mul_nat(k).unwrap()).collect::<Vec<_>>())
}

#[test]
fn search_agrees_with_brute_force() {
    let gammas: Vec<Ordinal> = (0..4u64).map(|k| Ordinal::omega().mul_nat(k).unwrap()).collect();
    let mut agree = [0, 0];
    for seed in 0..60 {
        let f = UnboundedFn::generate(5, eps(), &Strategy::Random(seed)).unwrap();
        for (m, nu) in [(2, 1), (2, 2), (3, 1)] {
            let g = &gammas[..(seed as usize % 4) + 1];
            let fast = f.star_search(m, nu, g, DEFAULT_FAMILY_LIMIT, false).unwrap();
            let slow = naive_star(&f, m, nu, g);
            assert_eq!(fast.is_certificate(), slow, "seed {seed} m {m} nu {nu}");
            agree[slow as usize] += 1;
        }
    }
    assert!(agree[0] > 0 && agree[1] > 0, "{agree:?}");
}

#[test]
fn witnesses_and_failures_are_genuine() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for seed in 0..40 {
        let f = UnboundedFn::generate(6, eps(), &Strategy::Random(seed)).unwrap();
        let gamma = Ordinal::omega().mul_nat(rng.gen_range(0..5)).unwrap();
        let mut cols: Vec<u32> = (0..6).collect();
        for i in (1..6).rev() {
            cols.swap(i, rng.gen_range(0..=i));
        }
        let fam: Vec<Vec<u32>> = cols.chunks(2).map(|c| c.to_vec()).collect();
        let pointwise = |a: &[u32], b: &[u32]| a.iter().all(|&x| b.iter().all(|&y| f.value(x, y) > &gamma));
        match f.star_verify(&gamma, &fam, 3).unwrap() {
            StarVerdict::Witness(a, b) => assert!(a != b && pointwise(&fam[a], &fam[b])),
            StarVerdict::Counterexample => {
                for a in 0..fam.len() {
                    for b in 0..fam.len() {
                        assert!(a == b || !pointwise(&fam[a], &fam[b]));
                    }
                }
            }
        }
        if let SearchOutcome::Failure { gamma, family } = f.star_search(2, 1, &[gamma], DEFAULT_FAMILY_LIMIT, false).unwrap() {
            assert_eq!(f.star_verify(&gamma, &family, 3).unwrap(), StarVerdict::Counterexample);
        }
    }
}

#[test]
fn greedy_generation_meets_its_probe() {
    let probe = Probe {
        m: 2,
        nu: 1,
        gammas: vec![ord("w"), ord("w*2")],
    };
    let f = UnboundedFn::generate(5, eps(), &Strategy::Greedy(vec![probe.clone()])).unwrap();
    assert!(naive_star(&f, probe.m, probe.nu, &probe.gammas));
}

#[test]
fn family_count_matches_enumeration() {
    for l in 1..7usize {
        for nu in 1..3usize {
            for m in 1..4usize {
                let sets: Vec<u32> = (0u32..1 << l).filter(|x| x.count_ones() as usize == nu).collect();
                // increasing tuples of disjoint sets, counted once per family
                fn go(sets: &[u32], from: usize, used: u32, left: usize) -> u128 {
                    if left == 0 {
                        return 1;
                    }
                    (from..sets.len())
                        .filter(|&i| sets[i] & used == 0)
                        .map(|i| go(sets, i + 1, used | sets[i], left - 1))
                        .sum()
                }
                assert_eq!(family_count(l, m, nu), go(&sets, 0, 0, m), "l {l} m {m} nu {nu}");
            }
        }
    }
}

#[test]
fn documents_round_trip_and_reject_garbage() {
    let f = UnboundedFn::generate(4, eps(), &Strategy::Random(3)).unwrap();
    let text = f.to_document();
    assert!(text.starts_with(FORMAT_HEADER));
    assert_eq!(UnboundedFn::from_document(&text, eps()).unwrap(), f);
    assert!(UnboundedFn::from_document("# other\n", eps()).is_err());
    assert!(UnboundedFn::from_document(&text.replace("lambda_w 4", "lambda_w 5"), eps()).is_err());
}

#[test]
fn shape_errors() {
    let f = UnboundedFn::constant(4, eps(), 2).unwrap();
    assert!(f.star_search(1, 1, &[], DEFAULT_FAMILY_LIMIT, false).is_err());
    assert!(f.star_verify(&ord("0"), &[vec![0, 1], vec![1, 2]], 3).is_err());
    assert!(f.star_search(2, 1, &[ord("0")], 1, false).is_err());
    assert!(UnboundedFn::constant(4, eps(), 6).is_err());
}
