mod common;

use common::naive_cb;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sposet_core::analysis::*;
use sposet_core::conditions::{ConditionBuilder, Dialect};
use sposet_core::generic::FinitePoset;
use sposet_core::{ord, Ordinal, Point};

#[test]
fn finite_levels_match_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..150 {
        let n = rng.gen_range(1..9);
        let subbase: Vec<u64> = (0..rng.gen_range(0..6)).map(|_| rng.gen_range(0..1u64 << n)).collect();
        let s = FiniteSpace::new((0..n).map(|i| format!("p{i}")).collect(), subbase.clone()).unwrap();
        let r = finite_cb(&s, DEFAULT_CB_CAP).unwrap();
        let (levels, residual) = naive_cb(n, &subbase);
        assert_eq!(r.levels, levels, "{subbase:?}");
        assert_eq!(r.residual, residual, "{subbase:?}");
        assert_eq!(r.height, levels.len());
    }
}

#[test]
fn poset_spaces_are_scattered() {
    let mut b = ConditionBuilder::new(Dialect::Kappa);
    let pts = [Point::new(ord("0"), 0), Point::new(ord("w"), 0), Point::top(0), Point::top(1)];
    for p in &pts {
        b.point(p.clone());
    }
    b.relate(pts[0].clone(), pts[1].clone()).relate(pts[1].clone(), pts[2].clone());
    let t = FinitePoset::from_condition(b.build().unwrap());
    let s = space_from_poset(&t).unwrap();
    let r = finite_cb(&s, DEFAULT_CB_CAP).unwrap();
    assert!(r.residual.is_empty());
    let (levels, _) = naive_cb(s.len(), &s.subbase);
    assert_eq!(r.levels, levels);
}

#[test]
fn ordinal_levels_are_cb_ranks() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..300 {
        let pick = |rng: &mut ChaCha8Rng| {
            Ordinal::from_sum((0..4u64).rev().map(|e| (Ordinal::nat(e), rng.gen_range(0..3)))).unwrap()
        };
        let alpha = pick(&mut rng);
        let beta = pick(&mut rng);
        let lv = ordinal_space_levels(&alpha).unwrap();
        assert_eq!(lv.height as u64, alpha.degree().as_nat().unwrap() + 1);
        match lv.level_of(&beta) {
            None => assert!(beta > alpha),
            Some(e) => assert_eq!(e as u64, beta.cb_level().unwrap(), "{beta} in [0, {alpha}]"),
        }
    }
    let lv = ordinal_space_levels(&ord("w^2*2 + 1")).unwrap();
    assert_eq!(lv.sizes, vec![LevelSize::Omega, LevelSize::Omega, LevelSize::Finite(2)]);
    assert!(ordinal_space_levels(&ord("w^w")).is_err());
}

#[test]
fn space_text_round_trips() {
    let s = FiniteSpace::new(vec!["a".into(), "b".into(), "c".into()], vec![0b001, 0b110]).unwrap();
    let back = FiniteSpace::from_text(&s.to_text()).unwrap();
    assert_eq!(back, s);
    assert!(FiniteSpace::from_text("point a\n").is_err());
    assert!(FiniteSpace::new(vec!["a".into()], vec![0b10]).is_err());
    let big = FiniteSpace::new((0..20).map(|i| i.to_string()).collect(), vec![]).unwrap();
    assert!(matches!(finite_cb(&big, DEFAULT_CB_CAP), Err(AnalysisError::CapExceeded { .. })));
}
