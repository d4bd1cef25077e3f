//! Corpus generation and the end-to-end pipeline with its summary table.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use anyhow::Result;
use sposet_core::amalgam::EtaOptions;
use sposet_core::conditions::{Condition, Dialect};
use sposet_core::corpus::{template_family, FamilyConfig};
use sposet_core::format::{params_line, ConditionDocument};
use sposet_core::pipeline::{run_family, PipelineRun, Stage, StageError};
use sposet_core::unbounded::UnboundedFn;

use crate::commands::tree_text;
use crate::config::{write_checked, Config, GlobalArgs};

pub const SUMMARY_HEADER: &str = "# sposet pipeline summary v1";
pub const RUN_HEADER: &str = "# sposet run report v1";
/// Depth of the tree dump stored with a corpus.
const CORPUS_TREE_DEPTH: usize = 1;

enum Outcome {
    Ok(Box<PipelineRun>),
    Err(StageError),
}

struct Instance {
    seed: u64,
    members: usize,
    outcome: Outcome,
    /// Violations of the emitted condition, re-read from its document.
    invalid: Vec<String>,
}

fn run_one(cfg: &Config, seed: u64, members: usize) -> (Vec<Condition>, Outcome) {
    let fc = FamilyConfig::new(Dialect::Kappa, members, seed);
    let fam = match template_family(&fc, &cfg.tree, &cfg.f) {
        Ok(f) => f.members,
        Err(e) => {
            return (
                Vec::new(),
                Outcome::Err(StageError {
                    stage: Stage::Corpus,
                    category: "corpus".into(),
                    detail: e.to_string(),
                }),
            )
        }
    };
    if fam.len() < 2 {
        let e = StageError {
            stage: Stage::Corpus,
            category: "too-few-members".into(),
            detail: format!("{} valid members", fam.len()),
        };
        return (fam, Outcome::Err(e));
    }
    let out = match run_family(&fam, &cfg.tree, &cfg.f, &EtaOptions::default()) {
        Ok(r) => Outcome::Ok(Box::new(r)),
        Err(e) => Outcome::Err(e),
    };
    (fam, out)
}

fn doc(cfg: &Config, c: &Condition) -> String {
    ConditionDocument {
        params: cfg.params.clone(),
        condition: c.clone(),
    }
    .to_text()
}

fn parse_doc(t: &str) -> Result<ConditionDocument> {
    Ok(ConditionDocument::from_text(t)?)
}

fn run_report(k: usize, inst: &Instance) -> String {
    let mut s = format!("{RUN_HEADER}\ninstance {k}\nseed {}\nmembers {}\n", inst.seed, inst.members);
    match &inst.outcome {
        Outcome::Ok(r) => {
            let four = r.checks.iter().filter(|c| c.candidates.len() == 4).count();
            writeln!(s, "status ok").unwrap();
            writeln!(s, "points {}", r.r.len()).unwrap();
            writeln!(s, "fresh {}", r.fresh).unwrap();
            writeln!(s, "gamma {}", r.gamma).unwrap();
            writeln!(s, "gamma0 {}", r.gamma0).unwrap();
            writeln!(s, "max-checks {} four-candidate {four}", r.checks.len()).unwrap();
            writeln!(s, "search-nodes {}", r.nodes).unwrap();
            for v in &inst.invalid {
                writeln!(s, "violation {v}").unwrap();
            }
        }
        Outcome::Err(e) => {
            writeln!(s, "status error").unwrap();
            writeln!(s, "stage {}", e.stage.name()).unwrap();
            writeln!(s, "category {}", e.category).unwrap();
            writeln!(s, "detail {}", e.detail).unwrap();
        }
    }
    s
}

/// Runs `instances` seeded instances; seeds are `seed, seed + 1, ...`.
pub fn run(g: &GlobalArgs, instances: usize, members: usize, out: Option<&Path>) -> Result<bool> {
    let cfg = g.config()?;
    if let Some(dir) = out {
        write_checked(&dir.join("tree/tree.txt"), &tree_text(&cfg.tree, CORPUS_TREE_DEPTH)?, |t| {
            Ok(t.to_string())
        })?;
        let eps = cfg.tree.eps_all();
        write_checked(&dir.join("F/f.txt"), &cfg.f.to_document(), |t| {
            Ok(UnboundedFn::from_document(t, eps.clone())?)
        })?;
    }
    let mut done = Vec::with_capacity(instances);
    for k in 0..instances {
        let seed = g.seed.wrapping_add(k as u64);
        let (fam, outcome) = run_one(&cfg, seed, members);
        let mut invalid = Vec::new();
        if let Outcome::Ok(r) = &outcome {
            let text = doc(&cfg, &r.r);
            let back = ConditionDocument::from_text(&text)?;
            match back.condition.validate(&cfg.tree, &cfg.f) {
                Ok(v) => invalid.extend(v.iter().map(|x| x.to_string())),
                Err(e) => invalid.push(e.to_string()),
            }
            if let Some(dir) = out {
                write_checked(&dir.join(format!("runs/instance-{k:04}.cond")), &text, parse_doc)?;
            }
        }
        if let Some(dir) = out {
            for (m, c) in fam.iter().enumerate() {
                let path = dir.join(format!("conditions/instance-{k:04}/member-{m}.cond"));
                write_checked(&path, &doc(&cfg, c), parse_doc)?;
            }
        }
        let inst = Instance {
            seed,
            members,
            outcome,
            invalid,
        };
        if let Some(dir) = out {
            let rep = run_report(k, &inst);
            write_checked(&dir.join(format!("reports/instance-{k:04}.txt")), &rep, |t| Ok(t.to_string()))?;
        }
        done.push(inst);
    }
    let (summary, ok) = summary(g, &cfg, &done);
    if let Some(dir) = out {
        write_checked(&dir.join("reports/summary.txt"), &summary, |t| Ok(t.to_string()))?;
    }
    print!("{summary}");
    Ok(ok)
}

fn summary(g: &GlobalArgs, cfg: &Config, done: &[Instance]) -> (String, bool) {
    let successes = done.iter().filter(|i| matches!(i.outcome, Outcome::Ok(_))).count();
    let invalid = done.iter().filter(|i| !i.invalid.is_empty()).count();
    let mut errors: BTreeMap<(Stage, &str), usize> = BTreeMap::new();
    for i in done {
        if let Outcome::Err(e) = &i.outcome {
            *errors.entry((e.stage, e.category.as_str())).or_default() += 1;
        }
    }
    let mut s = String::new();
    writeln!(s, "{SUMMARY_HEADER}").unwrap();
    writeln!(s, "{}", params_line(&cfg.params)).unwrap();
    writeln!(s, "f {}", cfg.f_source).unwrap();
    writeln!(s, "seed {}", g.seed).unwrap();
    writeln!(s, "instances {}", done.len()).unwrap();
    writeln!(s, "successes {successes}").unwrap();
    writeln!(s, "errors {}", done.len() - successes).unwrap();
    writeln!(s, "invalid-emissions {invalid}").unwrap();
    writeln!(s, "{:<12} {:<16} {:>5}", "stage", "category", "count").unwrap();
    for ((stage, cat), n) in &errors {
        writeln!(s, "{:<12} {:<16} {:>5}", stage.name(), cat, n).unwrap();
    }
    for (k, i) in done.iter().enumerate() {
        match &i.outcome {
            Outcome::Ok(r) => writeln!(
                s,
                "instance {k} seed {} ok points={} fresh={} gamma={}",
                i.seed,
                r.r.len(),
                r.fresh,
                r.gamma
            )
            .unwrap(),
            Outcome::Err(e) => writeln!(s, "instance {k} seed {} error {} {}", i.seed, e.stage.name(), e.category).unwrap(),
        }
    }
    let ok = successes == done.len() && invalid == 0;
    (s, ok)
}
