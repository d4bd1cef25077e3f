//! One instance of the interval-tree amalgamation pipeline: grow a family,
//! thin it to a separated family, push every member down, thin again with
//! interval tags, amalgamate the first pair below the top and pull the
//! result back up.

use serde::{Deserialize, Serialize};

use crate::amalgam::{
    amalgamate_eta, check_r_contract, pull_back, push_down, separated_refine, Bijection,
    EquivalenceStamp, EtaOptions, MaxCheck,
};
use crate::conditions::{Condition, Dialect};
use crate::corpus::{template_family, FamilyConfig};
use crate::interval_tree::IntervalTree;
use crate::ordinal::Ordinal;
use crate::point::Level;
use crate::unbounded::UnboundedFn;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Corpus,
    Separate,
    PushDown,
    Equivalence,
    Amalgamate,
    PullBack,
    Verify,
}

impl Stage {
    pub const ALL: [Stage; 7] = [
        Stage::Corpus,
        Stage::Separate,
        Stage::PushDown,
        Stage::Equivalence,
        Stage::Amalgamate,
        Stage::PullBack,
        Stage::Verify,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Corpus => "corpus",
            Stage::Separate => "separate",
            Stage::PushDown => "push-down",
            Stage::Equivalence => "equivalence",
            Stage::Amalgamate => "amalgamate",
            Stage::PullBack => "pull-back",
            Stage::Verify => "verify",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageError {
    pub stage: Stage,
    /// Short machine-readable category, e.g. `f-gap`.
    pub category: String,
    pub detail: String,
}

/// Everything a successful instance produced.
#[derive(Debug, Clone)]
pub struct PipelineRun {
    pub r_nu: Condition,
    pub r_mu: Condition,
    pub pushed_nu: Condition,
    pub pushed_mu: Condition,
    pub g_nu: Bijection,
    pub g_mu: Bijection,
    pub h: Bijection,
    pub amalgam: Condition,
    pub fresh: usize,
    pub gamma: Ordinal,
    pub gamma0: Ordinal,
    pub r: Condition,
    pub checks: Vec<MaxCheck>,
    pub nodes: usize,
}

fn fail(stage: Stage, category: &str, detail: impl ToString) -> StageError {
    StageError {
        stage,
        category: category.to_string(),
        detail: detail.to_string(),
    }
}

/// Smallest `c` such that `ε_{kappa_w·c}` lies above `γ(I)` for the top
/// interval, where `ξ(I)` is bounded by the largest sub-top level of the
/// family.
fn first_push_slot(family: &[Condition], tree: &IntervalTree) -> usize {
    let step = tree.params().kappa_w as usize;
    let eps = tree.eps_all();
    let top = family
        .iter()
        .flat_map(|c| c.points())
        .filter_map(|p| p.level.ordinal())
        .max()
        .cloned()
        .unwrap_or_else(Ordinal::zero);
    let xi = eps.iter().position(|e| *e > top).unwrap_or(eps.len());
    (xi + step) / step + 1
}

/// Runs the kappa pipeline on the family generated by `cfg`.
pub fn run_instance(
    cfg: &FamilyConfig,
    tree: &IntervalTree,
    f: &UnboundedFn,
    opts: &EtaOptions,
) -> Result<PipelineRun, StageError> {
    if cfg.dialect != Dialect::Kappa {
        return Err(fail(Stage::Corpus, "dialect", "pipeline runs in the kappa dialect"));
    }
    let fam = template_family(cfg, tree, f).map_err(|e| fail(Stage::Corpus, "corpus", e))?;
    if fam.members.len() < 2 {
        return Err(fail(
            Stage::Corpus,
            "too-few-members",
            format!("{} valid members", fam.members.len()),
        ));
    }
    run_family(&fam.members, tree, f, opts)
}

/// Runs the pipeline on an explicit family of kappa conditions.
pub fn run_family(
    family: &[Condition],
    tree: &IntervalTree,
    f: &UnboundedFn,
    opts: &EtaOptions,
) -> Result<PipelineRun, StageError> {
    let sep = separated_refine(family, tree, 2, false)
        .map_err(|e| fail(Stage::Separate, "refine", e))?;
    let step = tree.params().kappa_w as usize;
    let c0 = first_push_slot(&sep.members, tree);
    let mut pushed = Vec::new();
    let mut gs = Vec::new();
    for (k, m) in sep.members.iter().enumerate() {
        let (rp, g) = push_down(m, step * (c0 + k), tree, f)
            .map_err(|e| fail(Stage::PushDown, "push-down", e))?;
        pushed.push(rp);
        gs.push(g);
    }
    let eq = separated_refine(&pushed, tree, 2, true)
        .map_err(|e| fail(Stage::Equivalence, "refine", e))?;
    let (a, b) = (eq.source[0], eq.source[1]);
    let stamp = EquivalenceStamp::new(eq.root.iter(), tree);
    let h = eq.h(0, 1);
    let am = amalgamate_eta(&pushed[a], &pushed[b], &h, &stamp, tree, f, opts)
        .map_err(|e| fail(Stage::Amalgamate, "search", e))?;
    let broken = check_r_contract(&pushed[a], &pushed[b], &h, &am.r, &am.gamma);
    if !broken.is_empty() {
        return Err(fail(Stage::Amalgamate, "contract", broken.join("; ")));
    }
    let pb = pull_back(&am.r, &sep.members[a], &sep.members[b], &gs[a], &gs[b], &am.gamma, tree, f)
        .map_err(|e| {
            let cat = match &e {
                crate::amalgam::PullBackError::FGap { .. } => "f-gap",
                crate::amalgam::PullBackError::MaxUndefined { .. } => "max-undefined",
                crate::amalgam::PullBackError::TopMeet(_) => "top-meet",
                _ => "pull-back",
            };
            fail(Stage::PullBack, cat, e)
        })?;
    let run = PipelineRun {
        r_nu: sep.members[a].clone(),
        r_mu: sep.members[b].clone(),
        pushed_nu: pushed[a].clone(),
        pushed_mu: pushed[b].clone(),
        g_nu: gs[a].clone(),
        g_mu: gs[b].clone(),
        h,
        amalgam: am.r,
        fresh: am.fresh.len(),
        gamma: am.gamma,
        gamma0: pb.gamma0,
        r: pb.r,
        checks: pb.checks,
        nodes: am.nodes,
    };
    let issues = verify(&run, tree, f);
    if !issues.is_empty() {
        return Err(fail(Stage::Verify, "verify", issues.join("; ")));
    }
    Ok(run)
}

/// Independent checks on a finished run: validity, extension of both
/// inputs, and the max formula on pairs with four preimage pairs.
pub fn verify(run: &PipelineRun, tree: &IntervalTree, f: &UnboundedFn) -> Vec<String> {
    let mut out = Vec::new();
    match run.r.validate(tree, f) {
        Ok(v) if v.is_empty() => {}
        Ok(v) => out.push(format!("r invalid: {}", v[0])),
        Err(e) => out.push(format!("r not checkable: {e}")),
    }
    if !Condition::leq(&run.r, &run.r_nu) {
        out.push("r does not extend r_ν".into());
    }
    if !Condition::leq(&run.r, &run.r_mu) {
        out.push("r does not extend r_μ".into());
    }
    for c in run.checks.iter().filter(|c| c.candidates.len() == 4) {
        let nu = run.r_nu.meet(&c.s, &c.t);
        let mu = run.r_mu.meet(&c.s, &c.t);
        if c.chosen != nu || nu != mu {
            out.push(format!(
                "max over four preimages of {{{}, {}}} is {:?}, sides give {:?} and {:?}",
                c.s, c.t, c.chosen, nu, mu
            ));
        }
    }
    if run.r.points().iter().any(|p| p.level == Level::Top && !run.r_nu.contains(p) && !run.r_mu.contains(p)) {
        out.push("r has a top point outside both inputs".into());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interval_tree::Params;
    use crate::ordinal::ord;

    fn setup() -> (IntervalTree, UnboundedFn) {
        let t = IntervalTree::new(Params::new(ord("w^2"), 3, 6, 64).unwrap());
        let f = UnboundedFn::constant(6, t.eps_all(), 64).unwrap();
        (t, f)
    }

    #[test]
    fn runs_are_deterministic() {
        let (t, f) = setup();
        for seed in 0..5 {
            let cfg = FamilyConfig::new(Dialect::Kappa, 4, seed);
            let a = run_instance(&cfg, &t, &f, &EtaOptions::default()).unwrap();
            let b = run_instance(&cfg, &t, &f, &EtaOptions::default()).unwrap();
            assert_eq!(a.r, b.r);
            assert_eq!(a.gamma, b.gamma);
            assert!(verify(&a, &t, &f).is_empty());
        }
    }

    #[test]
    fn omega_dialect_is_refused() {
        let (t, f) = setup();
        let cfg = FamilyConfig::new(Dialect::Omega, 4, 0);
        let e = run_instance(&cfg, &t, &f, &EtaOptions::default()).unwrap_err();
        assert_eq!((e.stage, e.category.as_str()), (Stage::Corpus, "dialect"));
    }
}
