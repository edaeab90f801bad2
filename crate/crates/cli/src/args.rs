//! Flag definitions and `key=value` config-file merging.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "adadif", version, about = "Adaptive random-walk diffusions for graph node classification")]
pub struct Cli {
    /// File of `flag=value` lines; flags given on the command line win.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Worker thread cap.
    #[arg(long, global = true, value_name = "N")]
    pub jobs: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Repeated trials of one method; writes per-trial and aggregate scores.
    Run(RunArgs),
    /// Walk-length bounds and the measured threshold for two seed sets.
    Bound(BoundArgs),
    /// Accuracy of several methods over a grid of label corruption rates.
    Corrupt(CorruptArgs),
    /// Outlier detection rates over a grid of outlier penalties.
    Roc(RocArgs),
    /// Dataset sizes, checked against reference values for known names.
    Stats(StatsArgs),
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Edge list, one `u v [w]` per line.
    #[arg(long, value_name = "PATH")]
    pub edges: PathBuf,
    /// Labels, one `node label` pair per line.
    #[arg(long, value_name = "PATH")]
    pub labels: PathBuf,
    /// Dataset name; known benchmark names are validated. Defaults to the
    /// edge file stem.
    #[arg(long)]
    pub name: Option<String>,
    /// Keep only the largest connected component.
    #[arg(long)]
    pub largest_component: bool,
    /// Ignore labels of nodes absent from the edge list.
    #[arg(long)]
    pub drop_unknown_labels: bool,
}

#[derive(Debug, Args)]
#[group(id = "sampling", required = true, multiple = false)]
pub struct SamplingArgs {
    /// Seeds drawn per class.
    #[arg(long, group = "sampling", value_name = "N")]
    pub per_class: Option<usize>,
    /// Fraction of all nodes drawn uniformly.
    #[arg(long, group = "sampling", value_name = "F")]
    pub fraction: Option<f64>,
}

#[derive(Debug, Args)]
pub struct TrialArgs {
    /// Default 20 for multiclass data, 10 for multilabel data.
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// JSON results path; stdout when absent.
    #[arg(long, value_name = "PATH")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Adadif,
    Radadif,
    Ppr,
    Hk,
    Lp,
    Kstep,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutlierStepArg {
    AsPrinted,
    Exact,
}

/// Method hyperparameters. Each is optional; flags a method does not use
/// are rejected.
#[derive(Debug, Args, Default)]
pub struct ModelArgs {
    /// Walk length K (the step for `kstep`).
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub t: Option<f64>,
    /// Heat-kernel `t` candidates chosen by k-fold validation.
    #[arg(long, value_delimiter = ',', conflicts_with = "t")]
    pub t_grid: Option<Vec<f64>>,
    /// Folds for `--t-grid`, default 10.
    #[arg(long, requires = "t_grid")]
    pub cv_folds: Option<usize>,
    /// Label propagation iterations.
    #[arg(long)]
    pub iters: Option<usize>,
    #[arg(long)]
    pub lambda_o: Option<f64>,
    #[arg(long)]
    pub lambda_theta: Option<f64>,
    /// Ridge for unconstrained coefficients.
    #[arg(long)]
    pub ridge: Option<f64>,
    #[arg(long)]
    pub dictionary: bool,
    #[arg(long)]
    pub unconstrained: bool,
    #[arg(long, value_enum)]
    pub outlier_step: Option<OutlierStepArg>,
    /// Robust fit stopping threshold on the coefficient change.
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub max_sweeps: Option<usize>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, value_enum)]
    pub method: Method,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub sampling: SamplingArgs,
    #[command(flatten)]
    pub trial: TrialArgs,
    /// Flip each sampled label with this probability.
    #[arg(long)]
    pub p_cor: Option<f64>,
}

#[derive(Debug, Args)]
pub struct BoundArgs {
    #[arg(long, value_name = "PATH")]
    pub edges: PathBuf,
    #[arg(long)]
    pub gamma: f64,
    /// Positive seed node ids.
    #[arg(long, value_delimiter = ',')]
    pub plus: Option<Vec<u64>>,
    /// Negative seed node ids.
    #[arg(long, value_delimiter = ',')]
    pub minus: Option<Vec<u64>>,
    /// Label file; with `--plus-class`/`--minus-class` the seed sets are
    /// whole classes.
    #[arg(long, value_name = "PATH", conflicts_with_all = ["plus", "minus"])]
    pub labels: Option<PathBuf>,
    #[arg(long, requires = "labels")]
    pub plus_class: Option<u64>,
    #[arg(long, requires = "labels")]
    pub minus_class: Option<u64>,
    /// Also report the bound for PageRank coefficients.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Longest walk searched for the measured threshold.
    #[arg(long, default_value_t = 200)]
    pub k_max: usize,
    #[arg(long, value_name = "PATH")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CorruptArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "adadif,radadif")]
    pub methods: Vec<Method>,
    #[arg(long, value_delimiter = ',', default_value = "0,0.05,0.1,0.15,0.2,0.25,0.3")]
    pub p_grid: Vec<f64>,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub sampling: SamplingArgs,
    #[command(flatten)]
    pub trial: TrialArgs,
}

#[derive(Debug, Args)]
pub struct RocArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub p_cor: f64,
    /// Outlier penalties; default 13 values log-spaced over [1e-4, 1].
    #[arg(long, value_delimiter = ',')]
    pub lambda_grid: Option<Vec<f64>>,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub sampling: SamplingArgs,
    #[command(flatten)]
    pub trial: TrialArgs,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, value_name = "PATH")]
    pub output: Option<PathBuf>,
}

/// Reads `key=value` lines; `#` starts a comment. Keys are flag names
/// without the leading dashes.
pub fn read_config(path: &Path) -> Result<BTreeMap<String, String>, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let mut out = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format!("{} line {}: expected key=value", path.display(), idx + 1))?;
        out.insert(key.trim().trim_start_matches("--").to_string(), value.trim().to_string());
    }
    Ok(out)
}

/// Appends config entries for flags absent from `argv`. Entries go after
/// the subcommand, so global and subcommand flags both resolve.
pub fn merge_config(argv: &[String], config: &BTreeMap<String, String>) -> Result<Vec<String>, String> {
    let cmd = Cli::command();
    let sub_name = argv.iter().skip(1).find(|a| cmd.find_subcommand(a.as_str()).is_some());
    let sub = sub_name.and_then(|s| cmd.find_subcommand(s.as_str()));
    let present = |flag: &str| {
        argv.iter()
            .any(|a| a == &format!("--{flag}") || a.starts_with(&format!("--{flag}=")))
    };
    let mut out = argv.to_vec();
    for (key, value) in config {
        if key == "config" || present(key) {
            continue;
        }
        let arg = sub
            .into_iter()
            .flat_map(|s| s.get_arguments())
            .chain(cmd.get_arguments())
            .find(|a| a.get_long() == Some(key.as_str()))
            .ok_or_else(|| format!("unknown key {key:?} in config file"))?;
        if arg.get_action().takes_values() {
            out.push(format!("--{key}"));
            out.push(value.clone());
        } else {
            match value.as_str() {
                "true" | "1" | "yes" => out.push(format!("--{key}")),
                "false" | "0" | "no" => {}
                other => return Err(format!("config key {key}: expected a boolean, got {other:?}")),
            }
        }
    }
    Ok(out)
}
