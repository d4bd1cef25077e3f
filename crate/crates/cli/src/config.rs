use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use sposet_core::conditions::Dialect;
use sposet_core::format::ConditionDocument;
use sposet_core::unbounded::UnboundedFn;
use sposet_core::{IntervalTree, Ordinal, Params};

#[derive(Debug, Parser)]
#[command(name = "sposet", version, about = "Finite experiments with graded posets over interval trees")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

/// Flags shared by every subcommand. Each has an `SPOSET_*` environment
/// override.
#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// Height η of the poset, a limit ordinal in Cantor normal form.
    #[arg(long, global = true, env = "SPOSET_ETA", default_value = "w^2")]
    pub eta: String,
    /// Width of every level below the top.
    #[arg(long, global = true, env = "SPOSET_KAPPA_W", default_value_t = 3)]
    pub kappa_w: u32,
    /// Width of the top level.
    #[arg(long, global = true, env = "SPOSET_LAMBDA_W", default_value_t = 6)]
    pub lambda_w: u32,
    /// Children materialized per limit node of the interval tree.
    #[arg(long, global = true, env = "SPOSET_E_BUDGET", default_value_t = 32)]
    pub e_budget: usize,
    #[arg(long, global = true, env = "SPOSET_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Predecessor budget N checked by `simulate`.
    #[arg(long, global = true, env = "SPOSET_BUDGET_N", default_value_t = 5)]
    pub budget_n: usize,
    #[arg(long, global = true, env = "SPOSET_DIALECT", default_value = "kappa")]
    pub dialect: Dialect,
    /// Read F from an unbounded-fn document.
    #[arg(long = "f-file", global = true, env = "SPOSET_F_FILE", conflicts_with = "f_const")]
    pub f_file: Option<PathBuf>,
    /// Use F constant at ε_K (default: the largest materialized index).
    #[arg(long = "f-const", global = true, env = "SPOSET_F_CONST")]
    pub f_const: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Dump a truncation of the interval tree.
    Tree {
        #[arg(long, default_value_t = 1)]
        depth: usize,
        #[arg(long, value_enum, default_value = "text")]
        format: TreeFormat,
    },
    /// Orbit, path and n(α) of an ordinal; with `--beta`, also j and J.
    Orbit {
        alpha: Ordinal,
        #[arg(long)]
        beta: Option<sposet_core::Level>,
    },
    /// Strongly unbounded functions.
    Unbounded {
        #[command(subcommand)]
        action: UnboundedCmd,
    },
    /// Validate a condition document.
    Validate { file: PathBuf },
    /// Add a point below a target of a condition.
    Extend {
        file: PathBuf,
        /// Target column.
        #[arg(long)]
        xi: u32,
        /// Target level (`TOP` or an ordinal).
        #[arg(long)]
        level: sposet_core::Level,
        /// Level of the new point.
        #[arg(long)]
        alpha: Ordinal,
        /// Columns of new points lie above this floor (omega dialect).
        #[arg(long, default_value_t = 0)]
        floor: u32,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Amalgamate two conditions and report the checks performed.
    Amalgamate {
        p: PathBuf,
        q: PathBuf,
        /// Extra family members (kappa dialect), every `*.cond` in the directory.
        #[arg(long)]
        family: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a schedule of requirements and check the resulting poset.
    Simulate {
        #[arg(long)]
        schedule: Option<PathBuf>,
        /// Length of the random schedule used when no file is given.
        #[arg(long, default_value_t = 12)]
        steps: usize,
    },
    /// Cantor–Bendixson levels of a finite space, a poset or an ordinal.
    Analyze {
        #[arg(long, group = "input")]
        space: Option<PathBuf>,
        #[arg(long, group = "input")]
        poset: Option<PathBuf>,
        #[arg(long, group = "input")]
        ordinal: Option<Ordinal>,
        /// Largest finite space analysed.
        #[arg(long, default_value_t = sposet_core::analysis::DEFAULT_CB_CAP)]
        cap: usize,
    },
    /// Generate a corpus and run the push-down amalgamation pipeline on it.
    Pipeline {
        #[arg(long, default_value_t = 10)]
        instances: usize,
        /// Family size per instance.
        #[arg(long, default_value_t = 4)]
        members: usize,
        /// Write the corpus directory here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum TreeFormat {
    Text,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum UnboundedCmd {
    /// Generate F at random (from `--seed`) or greedily against a probe.
    Gen {
        #[arg(long)]
        greedy: bool,
        #[arg(long, default_value_t = 2)]
        m: usize,
        #[arg(long, default_value_t = 1)]
        nu: usize,
        /// Comma-separated thresholds for the greedy probe.
        #[arg(long, default_value = "")]
        gammas: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check one family against one threshold.
    Verify {
        file: PathBuf,
        #[arg(long)]
        gamma: Ordinal,
        /// Members separated by `;`, elements by `,`, e.g. `0,1;2,3`.
        #[arg(long)]
        family: String,
    },
    /// Exhaust all families of `m` disjoint `nu`-sets.
    Search {
        file: PathBuf,
        #[arg(long)]
        m: usize,
        #[arg(long)]
        nu: usize,
        #[arg(long)]
        gammas: String,
        #[arg(long)]
        force: bool,
    },
}

/// Parameters plus the tree and F they determine.
pub struct Config {
    pub params: Params,
    pub tree: IntervalTree,
    pub f: UnboundedFn,
    pub f_source: String,
}

impl GlobalArgs {
    pub fn params(&self) -> Result<Params> {
        let eta: Ordinal = self.eta.parse().with_context(|| format!("bad --eta {:?}", self.eta))?;
        Ok(Params::new(eta, self.kappa_w, self.lambda_w, self.e_budget)?)
    }

    pub fn config(&self) -> Result<Config> {
        self.config_for(self.params()?)
    }

    /// Builds the tree and F for `params`, which may come from a document.
    pub fn config_for(&self, params: Params) -> Result<Config> {
        let tree = IntervalTree::new(params.clone());
        let eps = tree.eps_all();
        let (f, f_source) = match (&self.f_file, self.f_const) {
            (Some(path), _) => {
                let text = read(path)?;
                let f = UnboundedFn::from_document(&text, eps)?;
                if f.lambda_w() != params.lambda_w {
                    bail!("F has lambda_w {}, parameters say {}", f.lambda_w(), params.lambda_w);
                }
                (f, format!("file {}", path.display()))
            }
            (None, k) => {
                let k = k.unwrap_or(eps.len() - 1);
                (UnboundedFn::constant(params.lambda_w, eps, k)?, format!("constant {k}"))
            }
        };
        Ok(Config {
            params,
            tree,
            f,
            f_source,
        })
    }

    pub fn parse_gammas(&self, s: &str) -> Result<Vec<Ordinal>> {
        s.split(',')
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .map(|t| t.parse().with_context(|| format!("bad threshold {t:?}")))
            .collect()
    }
}

pub fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

pub fn read_condition(path: &Path) -> Result<ConditionDocument> {
    ConditionDocument::from_text(&read(path)?).with_context(|| format!("parsing {}", path.display()))
}

/// Writes `text` and checks the file reads back to the same document.
pub fn write_checked<T: PartialEq>(
    path: &Path,
    text: &str,
    parse: impl Fn(&str) -> Result<T>,
) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    let back = read(path)?;
    if back != text || parse(&back)? != parse(text)? {
        bail!("{} does not read back identically", path.display());
    }
    Ok(())
}

/// Prints `text` to stdout or writes it to `out`.
pub fn emit<T: PartialEq>(
    out: Option<&Path>,
    text: &str,
    parse: impl Fn(&str) -> Result<T>,
) -> Result<()> {
    match out {
        Some(p) => write_checked(p, text, parse),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}
