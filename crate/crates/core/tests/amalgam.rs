mod common;

use std::collections::BTreeSet;

use common::{eta_oracle, root_filter, setup};
use sposet_core::amalgam::*;
use sposet_core::conditions::{Condition, ConditionBuilder, Dialect};
use sposet_core::corpus::{template_family, FamilyConfig};
use sposet_core::pipeline::{run_family, run_instance, Stage};
use sposet_core::unbounded::UnboundedFn;
use sposet_core::{ord, Level, Point};

fn pt(level: &str, xi: u32) -> Point {
    Point::new(ord(level), xi)
}

fn build(dialect: Dialect, points: &[Point], rel: &[(usize, usize)]) -> Condition {
    let mut b = ConditionBuilder::new(dialect);
    for p in points {
        b.point(p.clone());
    }
    for &(i, j) in rel {
        b.relate(points[i].clone(), points[j].clone());
    }
    b.build().unwrap()
}

#[test]
fn template_family_refines_to_itself() {
    let (t, f) = setup("w^2", 32);
    for dialect in [Dialect::Kappa, Dialect::Omega] {
        for seed in 0..10 {
            let fam = template_family(&FamilyConfig::new(dialect, 4, seed), &t, &f).unwrap();
            let sep = separated_refine(&fam.members, &t, 4, false).unwrap();
            assert_eq!(sep.len(), 4);
            assert_eq!(sep.root, fam.root);
            assert_eq!(check_separated(&sep), vec![]);
            // adequacy recomputed here: strata, level order, columns below
            // the top, column order on the top
            for a in 0..4 {
                for b in 0..4 {
                    let h = sep.h(a, b);
                    for (s, hs) in h.pairs() {
                        assert_eq!(s.is_top(), hs.is_top());
                        if !s.is_top() {
                            assert_eq!(s.xi, hs.xi);
                        }
                        for (u, hu) in h.pairs() {
                            assert_eq!(s.level < u.level, hs.level < hu.level);
                            if s.is_top() && u.is_top() {
                                assert_eq!(s.xi < u.xi, hs.xi < hu.xi);
                            }
                        }
                    }
                }
            }
            assert!(kerneldown_check(&sep).is_ok());
        }
    }
}

#[test]
fn disjoint_template_has_empty_root() {
    let (t, f) = setup("w^2", 32);
    let mut found = 0;
    for seed in 0..40 {
        let mut cfg = FamilyConfig::new(Dialect::Kappa, 4, seed);
        cfg.root_tops = 0;
        cfg.low_region = false;
        let fam = template_family(&cfg, &t, &f).unwrap();
        if !fam.root.is_empty() || fam.members.len() < 4 {
            continue;
        }
        found += 1;
        let sep = separated_refine(&fam.members, &t, 4, false).unwrap();
        assert_eq!(sep.len(), 4);
        assert!(sep.root.is_empty());
        assert!(kerneldown_check(&sep).is_ok());
    }
    assert!(found > 0);
}

#[test]
fn top_column_order_mismatch_is_rejected() {
    let (t, _) = setup("w^2", 32);
    let p = build(Dialect::Kappa, &[pt("w*6", 0), Point::top(2), Point::top(3)], &[(0, 1)]);
    let q = build(Dialect::Kappa, &[pt("w*8", 0), Point::top(4), Point::top(5)], &[(0, 2)]);
    let g = Bijection::from_pairs([
        (pt("w*6", 0), pt("w*8", 0)),
        (Point::top(2), Point::top(5)),
        (Point::top(3), Point::top(4)),
    ])
    .unwrap();
    let issues = check_adequate(&g, p.points(), q.points());
    assert!(issues.iter().any(|i| i.clause == "adequacy-4"));
    assert!(issues.iter().all(|i| i.clause == "adequacy-4"));
    assert!(matches!(
        separated_refine(&[p, q], &t, 2, false),
        Err(RefineError::Infeasible { best: 1, .. })
    ));
}

#[test]
fn singleton_family_is_separated() {
    let (t, f) = setup("w^2", 32);
    let fam = template_family(&FamilyConfig::new(Dialect::Kappa, 1, 3), &t, &f).unwrap();
    let sep = separated_refine(&fam.members, &t, 1, false).unwrap();
    assert_eq!(sep.len(), 1);
    assert_eq!(check_separated(&sep), vec![]);
    assert!(kerneldown_check(&sep).is_ok());
}

#[test]
fn kerneldown_flags_meet_outside_root() {
    let a = pt("3", 0);
    let mut members = Vec::new();
    let mut maps = Vec::new();
    for nu in 0..2u64 {
        let c = Point::new(sposet_core::Ordinal::nat(nu + 1), 0);
        let s = pt(if nu == 0 { "w*6" } else { "w*8" }, 0);
        let mut b = ConditionBuilder::new(Dialect::Kappa);
        b.point(a.clone()).point(c.clone()).point(s.clone());
        b.relate(c.clone(), a.clone()).relate(c.clone(), s.clone());
        members.push(b.build().unwrap());
        maps.push((c, s));
    }
    let from_first: Vec<Bijection> = (0..2)
        .map(|k| {
            Bijection::from_pairs([
                (a.clone(), a.clone()),
                (maps[0].0.clone(), maps[k].0.clone()),
                (maps[0].1.clone(), maps[k].1.clone()),
            ])
            .unwrap()
        })
        .collect();
    let fam = SeparatedFamily::new_unchecked(members, vec![a.clone()], from_first);
    let ce = kerneldown_check(&fam).unwrap_err();
    assert_eq!(ce.member, 0);
    assert_eq!(ce.s, a);
    assert_eq!(ce.meet, vec![pt("1", 0)]);
}

#[test]
fn omega_amalgam_trivial_cases() {
    let (t, f) = setup("w^2", 32);
    let fam = template_family(&FamilyConfig::new(Dialect::Omega, 2, 5), &t, &f).unwrap();
    let p = &fam.members[0];
    assert_eq!(&amalgamate_omega(p, p, p.points(), &f, &t).unwrap(), p);

    let p = build(Dialect::Omega, &[pt("w + 1", 1), pt("w + 2", 1), Point::top(0)], &[(0, 1), (1, 2)]);
    let q = build(Dialect::Omega, &[pt("w*3", 1), Point::top(1)], &[(0, 1)]);
    assert!(p.is_valid(&t, &f) && q.is_valid(&t, &f));
    let r = amalgamate_omega(&p, &q, &[], &f, &t).unwrap();
    assert_eq!(r.len(), 5);
    for x in p.points() {
        for y in q.points() {
            assert!(r.meet(x, y).is_empty());
            assert!(!r.comparable(x, y));
        }
    }
}

#[test]
fn omega_amalgam_matches_root_filter() {
    let (t, f) = setup("w^2", 32);
    for seed in 0..60 {
        let fam = template_family(&FamilyConfig::new(Dialect::Omega, 3, seed), &t, &f).unwrap();
        let sep = separated_refine(&fam.members, &t, 2, false).unwrap();
        let (p, q) = (&sep.members[0], &sep.members[1]);
        let r = amalgamate_omega(p, q, &sep.root, &f, &t).unwrap();
        assert!(r.is_valid(&t, &f));
        assert!(Condition::leq(&r, p) && Condition::leq(&r, q));
        for x in p.points().iter().filter(|x| !q.contains(x)) {
            for y in q.points().iter().filter(|y| !p.contains(y)) {
                assert_eq!(r.meet(x, y), root_filter(p, q, &sep.root, x, y), "seed {seed}");
            }
        }
    }
}

#[test]
fn omega_amalgam_reports_f_gap() {
    let (t, _) = setup("w^2", 32);
    let zero = UnboundedFn::constant(6, t.eps_all(), 0).unwrap();
    let root = pt("3", 1);
    let p = build(Dialect::Omega, &[root.clone(), Point::top(0)], &[(0, 1)]);
    let q = build(Dialect::Omega, &[root.clone(), Point::top(1)], &[(0, 1)]);
    assert!(matches!(
        amalgamate_omega(&p, &q, &[root], &zero, &t),
        Err(OmegaError::FGap { a: 0, b: 1, .. })
    ));
}

#[test]
fn omega_amalgam_reports_initial_segment_breach() {
    let (t, f) = setup("w^2", 32);
    let root = pt("w + 3", 1);
    let p = build(Dialect::Omega, &[pt("2", 1), root.clone()], &[]);
    let q = build(Dialect::Omega, std::slice::from_ref(&root), &[]);
    assert!(matches!(
        amalgamate_omega(&p, &q, &[root], &f, &t),
        Err(OmegaError::NotInitialSegment { .. })
    ));
}

#[test]
fn push_down_examples() {
    let (t, f) = setup("w^2", 32);
    let plain = build(Dialect::Kappa, &[pt("w + 1", 0), pt("w*2", 0)], &[(0, 1)]);
    let (r, g) = push_down(&plain, 6, &t, &f).unwrap();
    assert_eq!(r, plain);
    assert!(g.is_identity());

    let s = pt("w + 1", 0);
    let c = pt("w*2", 0);
    let r = build(Dialect::Kappa, &[s.clone(), c.clone(), Point::top(0)], &[(0, 1), (1, 2)]);
    assert!(r.is_valid(&t, &f));
    let (rp, g) = push_down(&r, 6, &t, &f).unwrap();
    let low = pt("w*6", 0);
    assert_eq!(g.apply(&low), Point::top(0));
    assert!(rp.lt(&s, &c) && rp.lt(&c, &low) && rp.lt(&s, &low));
    assert_eq!(rp.meet(&s, &low), vec![s.clone()]);
    assert!(rp.points().iter().all(|x| !x.is_top()));
    assert!(rp.is_valid(&t, &f));

    // ζ = 3 puts ε_2 = ω·2 in the gap
    assert!(matches!(push_down(&r, 3, &t, &f), Err(PushDownError::Gap { .. })));
    assert!(matches!(push_down(&r, 4, &t, &f), Err(PushDownError::NotLimitRole { .. })));

    let two = build(Dialect::Kappa, &[pt("w", 0), Point::top(1), Point::top(4)], &[(0, 1)]);
    let (rp, g) = push_down(&two, 3, &t, &f).unwrap();
    assert_eq!(g.apply(&pt("w*3", 0)), Point::top(1));
    assert_eq!(g.apply(&pt("w*3", 1)), Point::top(4));
    assert!(rp.is_valid(&t, &f));
}

#[test]
fn eta_amalgam_trivial_cases() {
    let (t, f) = setup("w^2", 64);
    let fam = template_family(&FamilyConfig::new(Dialect::Kappa, 2, 7), &t, &f).unwrap();
    let (pp, _) = push_down(&fam.members[0], 18, &t, &f).unwrap();
    let id = Bijection::identity(pp.points());
    let stamp = EquivalenceStamp::new(pp.points(), &t);
    let am = amalgamate_eta(&pp, &pp, &id, &stamp, &t, &f, &EtaOptions::default()).unwrap();
    assert_eq!(am.r, pp);
    assert!(am.fresh.is_empty());

    let p = build(Dialect::Kappa, &[pt("w*6 + 1", 0), pt("w*7", 0)], &[(0, 1)]);
    let q = build(Dialect::Kappa, &[pt("w*8 + 1", 0), pt("w*9", 0)], &[(0, 1)]);
    let h = Bijection::from_pairs(p.points().iter().cloned().zip(q.points().iter().cloned())).unwrap();
    let stamp = EquivalenceStamp::new([], &t);
    let am = amalgamate_eta(&p, &q, &h, &stamp, &t, &f, &EtaOptions::default()).unwrap();
    assert!(am.fresh.is_empty());
    assert_eq!(am.r.len(), 4);
    assert_eq!(check_r_contract(&p, &q, &h, &am.r, &am.gamma), Vec::<String>::new());
}

#[test]
fn eta_amalgam_agrees_with_oracle() {
    let (t, f) = setup("w^2", 64);
    let mut compared = 0;
    for seed in 0..40 {
        let mut cfg = FamilyConfig::new(Dialect::Kappa, 3, seed);
        cfg.steps = 3;
        cfg.root_tops = 1;
        let Ok(run) = run_instance(&cfg, &t, &f, &EtaOptions::default()) else {
            panic!("seed {seed} failed");
        };
        let (p, q) = (&run.pushed_nu, &run.pushed_mu);
        let union: BTreeSet<&Point> = p.points().iter().chain(q.points()).collect();
        if union.len() > 12 {
            continue;
        }
        let root: Vec<&Point> = p.points().iter().filter(|x| q.contains(x)).collect();
        let stamp = EquivalenceStamp::new(root, &t);
        let gamma = stamp.gamma(p.points(), &t).unwrap();
        let mut levels = BTreeSet::new();
        for x in p.points().iter().filter(|x| !q.contains(x)) {
            levels.extend(stamp.d_of(&x.level, &t).unwrap());
        }
        let levels: Vec<_> = levels.into_iter().collect();
        let oracle = eta_oracle(p, q, &run.h, &levels, &gamma, &t, &f, 2);
        let (_, k) = oracle.expect("search found an amalgam the oracle missed");
        assert!(k <= run.fresh, "seed {seed}: oracle needs {k}, search used {}", run.fresh);
        compared += 1;
    }
    assert!(compared >= 10, "only {compared} small instances");
}

#[test]
fn pipeline_end_to_end() {
    let (t, f) = setup("w^2", 64);
    for seed in 0..30 {
        let run = run_instance(&FamilyConfig::new(Dialect::Kappa, 4, seed), &t, &f, &EtaOptions::default())
            .unwrap_or_else(|e| panic!("seed {seed}: {e:?}"));
        assert!(run.r.is_valid(&t, &f));
        assert!(Condition::leq(&run.r, &run.r_nu) && Condition::leq(&run.r, &run.r_mu));
        for x in run.amalgam.points() {
            if !run.pushed_nu.contains(x) && !run.pushed_mu.contains(x) {
                assert!(x.level < Level::Ord(run.gamma.clone()));
            }
        }
        let four: Vec<_> = run.checks.iter().filter(|c| c.candidates.len() == 4).collect();
        assert!(!four.is_empty());
        for c in four {
            assert_eq!(c.chosen, run.r_nu.meet(&c.s, &c.t));
            assert_eq!(c.chosen, run.r_mu.meet(&c.s, &c.t));
        }
    }
}

#[test]
fn pipeline_trivial_cases() {
    let (t, f) = setup("w^2", 64);
    // no top points: pull-back is the identity transport
    let p = build(Dialect::Kappa, &[pt("w*6 + 1", 0), pt("w*7", 0)], &[(0, 1)]);
    let q = build(Dialect::Kappa, &[pt("w*8 + 1", 0), pt("w*9", 0)], &[(0, 1)]);
    let run = run_family(&[p, q], &t, &f, &EtaOptions::default()).unwrap();
    assert_eq!(run.r, run.amalgam);
    // r_ν = r_μ
    let fam = template_family(&FamilyConfig::new(Dialect::Kappa, 1, 2), &t, &f).unwrap();
    let r = &fam.members[0];
    let (rp, g) = push_down(r, 18, &t, &f).unwrap();
    let pb = pull_back(&rp, r, r, &g, &g, &sposet_core::Ordinal::one(), &t, &f).unwrap();
    assert_eq!(&pb.r, r);
}

#[test]
fn pipeline_reports_f_gap() {
    let (t, _) = setup("w^2", 64);
    let zero = UnboundedFn::constant(6, t.eps_all(), 0).unwrap();
    let mut gaps = 0;
    for seed in 0..30 {
        let mut cfg = FamilyConfig::new(Dialect::Kappa, 3, seed);
        cfg.root_tops = 1;
        match run_instance(&cfg, &t, &zero, &EtaOptions::default()) {
            Err(e) if e.stage == Stage::PullBack => {
                assert_eq!(e.category, "f-gap");
                gaps += 1;
            }
            Err(_) => {}
            Ok(run) => panic!("seed {seed}: constant-zero F let {:?} through", run.r),
        }
    }
    assert!(gaps > 0);
}
