use super::*;
use crate::interval_tree::Params;
use crate::ordinal::ord;

fn setup(kappa_w: u32) -> (IntervalTree, UnboundedFn) {
    let t = IntervalTree::new(Params::new(ord("w^2"), kappa_w, 8, 32).unwrap());
    let f = UnboundedFn::constant(8, t.eps_all(), 32).unwrap();
    (t, f)
}

fn pt(level: &str, xi: u32) -> Point {
    Point::new(ord(level), xi)
}

/// Rebuilds `c` with the meet of `a` and `b` replaced, bypassing closure.
fn with_meet(c: &Condition, a: &Point, b: &Point, value: Vec<Point>) -> Condition {
    let mut bld = c.to_builder();
    bld.meet(a, b, value);
    bld.build().unwrap()
}

#[test]
fn empty_schedule_gives_empty_poset() {
    let (t, f) = setup(3);
    let p = run_schedule(&Schedule::default(), &t, &f, Dialect::Kappa).unwrap();
    assert!(p.poset.is_empty());
    assert_eq!(p.chain.len(), 1);
    let r = sposet_check(&p, &t, 5);
    assert!(r.structural_pass());
    assert!(r.counts.is_empty());
    assert_eq!(cardinal_profile(&p, &t).unwrap(), LevelProfile { levels: vec![], top: 0 });
}

#[test]
fn two_step_schedule_replays_extension() {
    let (t, f) = setup(3);
    let sch = Schedule::from_text("# sposet schedule v1\nseed 1\nrealize 0 TOP\nbelow 0 TOP ; w*2 ; 0\n").unwrap();
    let p = run_schedule(&sch, &t, &f, Dialect::Kappa).unwrap();
    // ω·2 is a left end of every interval around it, so nothing interpolates
    let s = pt("w*2", 1);
    assert_eq!(p.poset.points(), &[s.clone(), Point::top(0)]);
    assert!(p.poset.lt(&s, &Point::top(0)));
    assert_eq!(p.steps[1].witness, s);
    for w in p.chain.windows(2) {
        assert!(Condition::leq(&w[1], &w[0]));
    }
    let again = run_schedule(&sch, &t, &f, Dialect::Kappa).unwrap();
    assert_eq!(again, p);
    assert_eq!(Schedule::from_text(&sch.to_text()).unwrap(), sch);
}

#[test]
fn unsatisfiable_requirement_returns_partial_trace() {
    let (t, f) = setup(3);
    let sch = Schedule::planted(Point::top(0), &[ord("w")], 4);
    let err = run_schedule(&sch, &t, &f, Dialect::Omega).unwrap_err();
    // columns above the floor at ω are 1 and 2
    assert_eq!(err.step, 3);
    assert_eq!(err.partial.poset.len(), 3);
}

#[test]
fn planted_predecessors_meet_budget() {
    let (t, f) = setup(6);
    for dialect in [Dialect::Omega, Dialect::Kappa] {
        let sch = Schedule::planted(Point::top(0), &[ord("w"), ord("w*3 + 1")], 5);
        let p = run_schedule(&sch, &t, &f, dialect).unwrap();
        let r = sposet_check(&p, &t, 5);
        assert!(r.structural_pass(), "{dialect}: {r:?}");
        assert_eq!(r.counts.len(), 2);
        assert!(r.counts.iter().all(|c| c.count == 5 && c.pass));
        assert!(!sposet_check(&p, &t, 6).budget_pass());
    }
}

#[test]
fn meet_mutation_fails_clause_three() {
    let (t, f) = setup(6);
    let sch = Schedule::planted(Point::top(0), &[ord("w")], 2);
    let p = run_schedule(&sch, &t, &f, Dialect::Omega).unwrap();
    let (a, b) = (pt("w", 1), Point::top(0));
    assert_eq!(p.poset.meet(&a, &b), vec![a.clone()]);
    let bad = FinitePoset::from_condition(with_meet(&p.poset, &a, &b, vec![]));
    let r = sposet_check(&bad, &t, 0);
    assert!(r.clauses[0].pass && r.clauses[1].pass);
    assert!(!r.clauses[2].pass);
    assert_eq!(r.clauses[2].witnesses[0], vec![a.clone(), b.clone(), a.clone()]);
    assert!(matches!(cardinal_profile(&bad, &t), Err(ProfileError::MeetAxiom(_))));
}

#[test]
fn omega_runs_are_skeletons() {
    let (t, f) = setup(3);
    for seed in 0..20 {
        let sch = Schedule::random(seed, 12, Dialect::Omega, &t, &f);
        let p = run_schedule(&sch, &t, &f, Dialect::Omega).unwrap();
        for v in skeleton_check(&p, &sub_top_levels(&p)) {
            assert!(v.bone, "seed {seed}: {v:?}");
        }
    }
}

#[test]
fn same_level_meet_breaks_bone() {
    let (t, f) = setup(6);
    let sch = Schedule::from_text(
        "# sposet schedule v1\nrealize 0 TOP\nbelow 0 TOP ; 4 ; 0\nbelow 0 TOP ; 4 ; 0\nbelow 1 4 ; 2 ; 0\n",
    )
    .unwrap();
    let p = run_schedule(&sch, &t, &f, Dialect::Omega).unwrap();
    let (s, u, low) = (pt("4", 1), pt("4", 2), pt("2", 1));
    assert!(skeleton_check(&p, &[ord("4")])[0].bone);
    let mut b = p.poset.to_builder();
    b.relate(low.clone(), u.clone());
    b.meet(&s, &u, [low.clone()]);
    let bad = FinitePoset::from_condition(b.build().unwrap());
    let v = &skeleton_check(&bad, &[ord("4")])[0];
    assert_eq!(v.same_level_meet, Some((s, u)));
    assert!(!v.bone);
}

#[test]
fn single_level_poset_is_bone() {
    let (t, f) = setup(3);
    let sch = Schedule::from_text("# sposet schedule v1\nrealize 0 w\nrealize 1 w\n").unwrap();
    let p = run_schedule(&sch, &t, &f, Dialect::Omega).unwrap();
    assert!(skeleton_check(&p, &[ord("w")])[0].bone);
}

fn planted_tightness(k: u32) -> (FinitePoset, IntervalTree, Point, Vec<Point>) {
    let (t, f) = setup(6);
    let mut text = String::from("# sposet schedule v1\nrealize 1 w + 1\n");
    for _ in 0..k {
        text.push_str("below 1 w + 1 ; w ; 0\n");
    }
    for u in 0..k {
        text.push_str(&format!("below {} w ; 3 ; 0\n", u + 1));
    }
    let p = run_schedule(&Schedule::from_text(&text).unwrap(), &t, &f, Dialect::Omega).unwrap();
    let a: Vec<Point> = (1..=k).map(|c| pt("3", c)).collect();
    (p, t, pt("w + 1", 1), a)
}

#[test]
fn tightness_single_point() {
    let (p, _, x, a) = planted_tightness(3);
    let r = tightness_probe(&p, &x, &a[..1]).unwrap();
    assert_eq!(r.b.len(), 1);
    assert!(r.pass && r.max_count <= 1);
}

#[test]
fn tightness_planted_instance() {
    let (p, _, x, a) = planted_tightness(4);
    let r = tightness_probe(&p, &x, &a).unwrap();
    assert_eq!(r.u.len(), 4);
    assert!(r.pass);
    assert_eq!(r.max_count, 1);
    assert!(matches!(tightness_probe(&p, &Point::top(0), &a), Err(ProbeError::NotSuccessor(_))));
    assert!(matches!(tightness_probe(&p, &pt("w", 1), &a), Err(ProbeError::NotSuccessor(_))));
}

#[test]
fn tightness_mutation_is_flagged() {
    let (p, _, x, a) = planted_tightness(3);
    let y = pt("w", 1);
    let mut b = p.poset.to_builder();
    b.relate(a[1].clone(), y.clone());
    let bad = FinitePoset::from_condition(b.build().unwrap());
    let r = tightness_probe(&bad, &x, &a).unwrap();
    assert!(!r.pass);
    assert_eq!(r.violations[0].0, y);
    assert_eq!(r.violations[0].1, vec![a[0].clone(), a[1].clone()]);
}

#[test]
fn profile_counts_levels() {
    let (t, f) = setup(3);
    let mut text = String::from("# sposet schedule v1\n");
    for l in ["1", "w", "w + 5", "w*4"] {
        for xi in 0..3 {
            text.push_str(&format!("realize {xi} {l}\n"));
        }
    }
    for xi in 0..5 {
        text.push_str(&format!("realize {xi} TOP\n"));
    }
    let p = run_schedule(&Schedule::from_text(&text).unwrap(), &t, &f, Dialect::Kappa).unwrap();
    let prof = cardinal_profile(&p, &t).unwrap();
    assert_eq!(prof.to_string(), "(3,3,3,3 | 5)");
}
