use std::fmt::Write as _;
use std::path::Path;

use anyhow::{bail, Context, Result};
use sposet_core::amalgam::{amalgamate_omega, EtaOptions};
use sposet_core::analysis::{finite_cb, ordinal_space_levels, space_from_poset, FiniteSpace};
use sposet_core::conditions::{extend_below, Condition, Dialect};
use sposet_core::format::{params_line, ConditionDocument};
use sposet_core::generic::{
    cardinal_profile, run_schedule, skeleton_check, sposet_check, sub_top_levels, tightness_probe,
    FinitePoset, ProbeError, Schedule,
};
use sposet_core::interval_tree::TreeNode;
use sposet_core::ordinal::Class;
use sposet_core::pipeline::run_family;
use sposet_core::unbounded::{Probe, SearchOutcome, StarVerdict, Strategy, UnboundedFn, DEFAULT_FAMILY_LIMIT};
use sposet_core::{IntervalTree, Level, Ordinal, Point};

use crate::config::{emit, read, read_condition, Cli, Command, Config, GlobalArgs, TreeFormat, UnboundedCmd};
use crate::pipeline;

pub const TREE_HEADER: &str = "# sposet tree v1";
pub const AMALGAM_REPORT_HEADER: &str = "# sposet amalgamation report v1";
pub const SIMULATION_HEADER: &str = "# sposet simulation v1";
pub const LEVELS_HEADER: &str = "# sposet levels v1";

/// Runs one subcommand. `Ok(false)` means a check failed.
pub fn run(cli: &Cli) -> Result<bool> {
    let g = &cli.global;
    match &cli.command {
        Command::Tree { depth, format } => tree(g, *depth, *format),
        Command::Orbit { alpha, beta } => orbit(g, alpha, beta.as_ref()),
        Command::Unbounded { action } => unbounded(g, action),
        Command::Validate { file } => validate(g, file),
        Command::Extend {
            file,
            xi,
            level,
            alpha,
            floor,
            out,
        } => extend(g, file, &Point::new(level.clone(), *xi), alpha, *floor, out.as_deref()),
        Command::Amalgamate { p, q, family, out } => amalgamate(g, p, q, family.as_deref(), out.as_deref()),
        Command::Simulate { schedule, steps } => simulate(g, schedule.as_deref(), *steps),
        Command::Analyze {
            space,
            poset,
            ordinal,
            cap,
        } => analyze(space.as_deref(), poset.as_deref(), ordinal.as_ref(), *cap),
        Command::Pipeline {
            instances,
            members,
            out,
        } => pipeline::run(g, *instances, *members, out.as_deref()),
    }
}

fn children_of(nodes: &[TreeNode]) -> Vec<Vec<usize>> {
    let mut ch = vec![Vec::new(); nodes.len()];
    for (k, n) in nodes.iter().enumerate() {
        if let Some(p) = n.parent {
            ch[p].push(k);
        }
    }
    ch
}

fn ordinal_list(v: &[Ordinal]) -> String {
    v.iter().map(|o| o.to_string()).collect::<Vec<_>>().join(", ")
}

/// Indented dump, depth-first: `I=[lo,hi) depth=n E=[...]`.
pub fn tree_text(tree: &IntervalTree, depth: usize) -> Result<String> {
    let nodes = tree.truncation(depth)?;
    let ch = children_of(&nodes);
    let mut s = format!("{TREE_HEADER}\n{}\n", params_line(tree.params()));
    let mut stack = vec![0usize];
    while let Some(k) = stack.pop() {
        let n = &nodes[k];
        let e = tree.e_set(&n.interval)?;
        writeln!(
            s,
            "{}I=[{},{}) depth={} E=[{}]",
            "  ".repeat(n.depth),
            n.interval.lo,
            n.interval.hi,
            n.depth,
            ordinal_list(&e)
        )?;
        stack.extend(ch[k].iter().rev());
    }
    Ok(s)
}

fn tree(g: &GlobalArgs, depth: usize, format: TreeFormat) -> Result<bool> {
    let cfg = g.config()?;
    match format {
        TreeFormat::Text => print!("{}", tree_text(&cfg.tree, depth)?),
        TreeFormat::Json => {
            let nodes = cfg.tree.truncation(depth)?;
            let mut out = Vec::with_capacity(nodes.len());
            for n in &nodes {
                out.push(serde_json::json!({
                    "interval": n.interval,
                    "depth": n.depth,
                    "parent": n.parent,
                    "e": cfg.tree.e_set(&n.interval)?.to_vec(),
                }));
            }
            let doc = serde_json::json!({ "params": cfg.params, "nodes": out });
            println!("{}", serde_json::to_string_pretty(&doc)?);
        }
    }
    Ok(true)
}

fn orbit(g: &GlobalArgs, alpha: &Ordinal, beta: Option<&Level>) -> Result<bool> {
    let cfg = g.config()?;
    let t = &cfg.tree;
    let n = t.n_of(alpha)?;
    println!("alpha {alpha}");
    println!("n {n}");
    for (k, i) in t.path(alpha, n)?.iter().enumerate() {
        println!("path {k} {i}");
    }
    println!("orbit {{{}}}", ordinal_list(&t.orbit(alpha)?));
    if let Some(b) = beta {
        // β = η is the top of the tree
        let b = &match b {
            Level::Ord(x) if x == t.eta() => Level::Top,
            other => other.clone(),
        };
        if Level::Ord(alpha.clone()) >= *b {
            bail!("--beta must lie above alpha");
        }
        let (j, big) = t.j_and_big_j(alpha, b)?;
        match j {
            Some(j) => println!("j {j}"),
            None => println!("j -"),
        }
        println!("J {big}");
    }
    Ok(true)
}

fn parse_family(s: &str) -> Result<Vec<Vec<u32>>> {
    s.split(';')
        .map(|m| {
            m.split(',')
                .map(str::trim)
                .filter(|t| !t.is_empty())
                .map(|t| t.parse::<u32>().with_context(|| format!("bad column {t:?}")))
                .collect()
        })
        .collect()
}

fn load_f(path: &Path, cfg: &Config) -> Result<UnboundedFn> {
    let f = UnboundedFn::from_document(&read(path)?, cfg.tree.eps_all())?;
    if f.lambda_w() != cfg.params.lambda_w {
        bail!("F has lambda_w {}, parameters say {}", f.lambda_w(), cfg.params.lambda_w);
    }
    Ok(f)
}

fn unbounded(g: &GlobalArgs, action: &UnboundedCmd) -> Result<bool> {
    let cfg = g.config()?;
    let eps = cfg.tree.eps_all();
    match action {
        UnboundedCmd::Gen {
            greedy,
            m,
            nu,
            gammas,
            out,
        } => {
            let strategy = if *greedy {
                Strategy::Greedy(vec![Probe {
                    m: *m,
                    nu: *nu,
                    gammas: g.parse_gammas(gammas)?,
                }])
            } else {
                Strategy::Random(g.seed)
            };
            let f = UnboundedFn::generate(cfg.params.lambda_w, eps.clone(), &strategy)?;
            emit(out.as_deref(), &f.to_document(), |t| {
                Ok(UnboundedFn::from_document(t, eps.clone())?)
            })?;
            Ok(true)
        }
        UnboundedCmd::Verify { file, gamma, family } => {
            let f = load_f(file, &cfg)?;
            let fam = parse_family(family)?;
            match f.star_verify(gamma, &fam, cfg.params.kappa_w as usize)? {
                StarVerdict::Witness(a, b) => {
                    println!("witness {a} {b}");
                    Ok(true)
                }
                StarVerdict::Counterexample => {
                    println!("counterexample");
                    Ok(false)
                }
            }
        }
        UnboundedCmd::Search {
            file,
            m,
            nu,
            gammas,
            force,
        } => {
            let f = load_f(file, &cfg)?;
            let gs = g.parse_gammas(gammas)?;
            match f.star_search(*m, *nu, &gs, DEFAULT_FAMILY_LIMIT, *force)? {
                SearchOutcome::Certificate { instances } => {
                    println!("certificate instances={instances}");
                    Ok(true)
                }
                SearchOutcome::Failure { gamma, family } => {
                    let members: Vec<String> = family
                        .iter()
                        .map(|m| m.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(","))
                        .collect();
                    println!("failure gamma={gamma} family={}", members.join(";"));
                    Ok(false)
                }
            }
        }
    }
}

/// One line per violation, `ok` when there are none.
fn violation_lines(c: &Condition, cfg: &Config) -> Result<Vec<String>> {
    Ok(c.validate(&cfg.tree, &cfg.f)?.iter().map(|v| v.to_string()).collect())
}

fn validate(g: &GlobalArgs, file: &Path) -> Result<bool> {
    let doc = read_condition(file)?;
    let cfg = g.config_for(doc.params.clone())?;
    let bad = violation_lines(&doc.condition, &cfg)?;
    println!("points {}", doc.condition.len());
    if bad.is_empty() {
        println!("valid");
    } else {
        for v in &bad {
            println!("violation {v}");
        }
        println!("invalid {}", bad.len());
    }
    Ok(bad.is_empty())
}

fn parse_doc(t: &str) -> Result<ConditionDocument> {
    Ok(ConditionDocument::from_text(t)?)
}

fn extend(g: &GlobalArgs, file: &Path, tgt: &Point, alpha: &Ordinal, floor: u32, out: Option<&Path>) -> Result<bool> {
    let doc = read_condition(file)?;
    let cfg = g.config_for(doc.params.clone())?;
    let (next, s) = extend_below(&doc.condition, tgt, alpha, floor, &cfg.tree)?;
    // s ⪯ x iff tgt ⪯ x for old points x
    let broken: Vec<&Point> = doc
        .condition
        .points()
        .iter()
        .filter(|x| next.le(&s, x) != next.le(tgt, x))
        .collect();
    let bad = violation_lines(&next, &cfg)?;
    let text = ConditionDocument {
        params: doc.params,
        condition: next,
    }
    .to_text();
    emit(out, &text, parse_doc)?;
    eprintln!("new point {s}");
    for v in &bad {
        eprintln!("violation {v}");
    }
    for x in &broken {
        eprintln!("contract broken at {x}");
    }
    Ok(bad.is_empty() && broken.is_empty())
}

fn amalgamate(g: &GlobalArgs, p: &Path, q: &Path, family: Option<&Path>, out: Option<&Path>) -> Result<bool> {
    let dp = read_condition(p)?;
    let dq = read_condition(q)?;
    if dp.params != dq.params {
        bail!("the two documents carry different parameters");
    }
    let cfg = g.config_for(dp.params.clone())?;
    let (pc, qc) = (&dp.condition, &dq.condition);
    if pc.dialect() != g.dialect || qc.dialect() != g.dialect {
        bail!("--dialect is {}, documents are {} and {}", g.dialect, pc.dialect(), qc.dialect());
    }
    let mut rep = format!("{AMALGAM_REPORT_HEADER}\ndialect {}\n", g.dialect);
    let mut ok = true;
    let (r, sides) = match g.dialect {
        Dialect::Omega => {
            let root: Vec<Point> = pc.points().iter().filter(|x| qc.contains(x)).cloned().collect();
            writeln!(rep, "root {}", root.len())?;
            let r = amalgamate_omega(pc, qc, &root, &cfg.f, &cfg.tree)?;
            // cross meets against the root filter
            let lt = |c: &Condition, a: &Point, b: &Point| c.contains(a) && c.contains(b) && c.lt(a, b);
            let mut checked = 0;
            for x in pc.points().iter().filter(|x| !qc.contains(x)) {
                for y in qc.points().iter().filter(|y| !pc.contains(y)) {
                    let want: Vec<Point> = root
                        .iter()
                        .filter(|u| (lt(pc, u, x) || lt(qc, u, x)) && (lt(pc, u, y) || lt(qc, u, y)))
                        .cloned()
                        .collect();
                    checked += 1;
                    if r.meet(x, y) != want {
                        ok = false;
                        writeln!(rep, "cross-meet-mismatch {x} {y}")?;
                    }
                }
            }
            writeln!(rep, "cross-meets {checked}")?;
            (r, vec![("p".to_string(), pc.clone()), ("q".to_string(), qc.clone())])
        }
        Dialect::Kappa => {
            let mut fam = vec![pc.clone(), qc.clone()];
            if let Some(dir) = family {
                let mut paths: Vec<_> = std::fs::read_dir(dir)
                    .with_context(|| format!("reading {}", dir.display()))?
                    .filter_map(|e| e.ok().map(|e| e.path()))
                    .filter(|p| p.extension().is_some_and(|x| x == "cond"))
                    .collect();
                paths.sort();
                for path in paths {
                    fam.push(read_condition(&path)?.condition);
                }
            }
            writeln!(rep, "family {}", fam.len())?;
            let run = run_family(&fam, &cfg.tree, &cfg.f, &EtaOptions::default())
                .map_err(|e| anyhow::anyhow!("{} ({}): {}", e.stage.name(), e.category, e.detail))?;
            writeln!(rep, "fresh {}", run.fresh)?;
            writeln!(rep, "gamma {}", run.gamma)?;
            writeln!(rep, "gamma0 {}", run.gamma0)?;
            let four = run.checks.iter().filter(|c| c.candidates.len() == 4).count();
            writeln!(rep, "max-checks {} four-candidate {four}", run.checks.len())?;
            for c in &run.checks {
                let chosen: Vec<String> = c.chosen.iter().map(|x| x.to_string()).collect();
                writeln!(rep, "max {} {} : {}", c.s, c.t, chosen.join(" "))?;
            }
            let amalgamated: Vec<usize> = [&run.r_nu, &run.r_mu]
                .iter()
                .map(|m| fam.iter().position(|c| &c == m).expect("member of the family"))
                .collect();
            writeln!(rep, "members {} {}", amalgamated[0], amalgamated[1])?;
            let sides = vec![
                (format!("member-{}", amalgamated[0]), run.r_nu.clone()),
                (format!("member-{}", amalgamated[1]), run.r_mu.clone()),
            ];
            (run.r, sides)
        }
    };
    let bad = violation_lines(&r, &cfg)?;
    writeln!(rep, "validate {}", if bad.is_empty() { "ok".to_string() } else { bad.join("; ") })?;
    for (name, c) in &sides {
        let below = Condition::leq(&r, c);
        ok &= below;
        writeln!(rep, "leq-{name} {}", if below { "ok" } else { "fail" })?;
    }
    ok &= bad.is_empty();
    writeln!(rep, "result {}", if ok { "pass" } else { "fail" })?;
    let text = ConditionDocument {
        params: dp.params.clone(),
        condition: r,
    }
    .to_text();
    match out {
        Some(path) => {
            emit(Some(path), &text, parse_doc)?;
            print!("{rep}");
        }
        None => print!("{text}{rep}"),
    }
    Ok(ok)
}

fn simulate(g: &GlobalArgs, schedule: Option<&Path>, steps: usize) -> Result<bool> {
    let cfg = g.config()?;
    let sch = match schedule {
        Some(p) => Schedule::from_text(&read(p)?).with_context(|| format!("parsing {}", p.display()))?,
        None => Schedule::random(g.seed, steps, g.dialect, &cfg.tree, &cfg.f),
    };
    let t = run_schedule(&sch, &cfg.tree, &cfg.f, g.dialect)?;
    let doc = ConditionDocument {
        params: cfg.params.clone(),
        condition: t.poset.clone(),
    };
    let mut s = format!("{SIMULATION_HEADER}\nseed {}\nsteps {}\n", sch.seed, t.steps.len());
    for (k, st) in t.steps.iter().enumerate() {
        writeln!(s, "step {k} {} -> {}", st.requirement, st.witness)?;
    }
    let mut ok = true;
    let rep = sposet_check(&t, &cfg.tree, g.budget_n);
    for c in &rep.clauses {
        writeln!(s, "clause {} {}", c.clause, if c.pass { "pass" } else { "fail" })?;
        ok &= c.pass;
    }
    for c in &rep.counts {
        writeln!(
            s,
            "clause 4 {} {} count={} budget={} {}",
            c.target,
            c.level,
            c.count,
            c.budget,
            if c.pass { "pass" } else { "fail" }
        )?;
        ok &= c.pass;
    }
    if g.dialect == Dialect::Omega {
        for b in skeleton_check(&t, &sub_top_levels(&t)) {
            writeln!(s, "bone {} {}", b.level, if b.bone { "yes" } else { "no" })?;
            ok &= b.bone;
        }
    }
    for (x, a) in probe_instances(&t) {
        match tightness_probe(&t, &x, &a) {
            Ok(r) => {
                writeln!(s, "tightness {x} |U|={} max={} {}", r.u.len(), r.max_count, if r.pass { "pass" } else { "fail" })?;
                ok &= r.pass;
            }
            Err(ProbeError::EmptyU(_)) => writeln!(s, "tightness {x} inconclusive")?,
            Err(e) => bail!("tightness probe: {e}"),
        }
    }
    match cardinal_profile(&t, &cfg.tree) {
        Ok(p) => writeln!(s, "profile {p}")?,
        Err(e) => writeln!(s, "profile unavailable: {e}")?,
    }
    print!("{}{s}", doc.to_text());
    Ok(ok)
}

/// Points `x` at successor levels `α + 1` with `A` = the points below `x`
/// at levels under `α`.
fn probe_instances(t: &FinitePoset) -> Vec<(Point, Vec<Point>)> {
    let c = &t.poset;
    let mut out = Vec::new();
    for x in c.points() {
        let Some(lx) = x.level.ordinal() else { continue };
        let Class::Successor(alpha) = lx.classify() else { continue };
        let a: Vec<Point> = c
            .points()
            .iter()
            .filter(|p| p.level.ordinal().is_some_and(|l| l < &alpha) && c.lt(p, x))
            .cloned()
            .collect();
        if !a.is_empty() {
            out.push((x.clone(), a));
        }
    }
    out
}

fn analyze(space: Option<&Path>, poset: Option<&Path>, ordinal: Option<&Ordinal>, cap: usize) -> Result<bool> {
    let sp = match (space, poset, ordinal) {
        (_, _, Some(a)) => {
            print!("{LEVELS_HEADER}\n{}", ordinal_space_levels(a)?);
            return Ok(true);
        }
        (Some(p), _, _) => FiniteSpace::from_text(&read(p)?)?,
        (_, Some(p), _) => space_from_poset(&FinitePoset::from_condition(read_condition(p)?.condition))?,
        _ => bail!("one of --space, --poset or --ordinal is required"),
    };
    let r = finite_cb(&sp, cap)?;
    println!("{LEVELS_HEADER}");
    println!("points {}", sp.len());
    for (k, l) in sp.labels.iter().enumerate() {
        println!("label {k} {l}");
    }
    println!("{r}");
    Ok(true)
}
