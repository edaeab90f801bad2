//! Subcommand implementations.

use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use adadif::{
    empirical_kgamma, kgamma_bound, kgamma_bound_ppr, load_graph, spectral_summary, BoundInputs,
    HyperParams, OutlierStep, RobustParams,
};
use adadif_harness::dataset::DatasetStats;
use adadif_harness::{
    corruption_sweep, load_dataset, read_dataset, roc_sweep, run_experiment, Dataset, LabelOptions,
    MethodSpec, Report, SamplingSpec, TrialOptions,
};
use serde::Serialize;
use serde_json::json;

use crate::args::{
    BoundArgs, CorruptArgs, DataArgs, Method, ModelArgs, OutlierStepArg, RocArgs, RunArgs, SamplingArgs,
    StatsArgs, TrialArgs,
};
use crate::error::CliError;

type Result<T> = std::result::Result<T, CliError>;

fn require_file(path: &Path) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::missing_file(path))
    }
}

fn dataset_name(data: &DataArgs) -> String {
    data.name.clone().unwrap_or_else(|| {
        data.edges
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "dataset".into())
    })
}

/// Loads and validates, then optionally restricts to the largest component.
fn load(data: &DataArgs) -> Result<Dataset> {
    require_file(&data.edges)?;
    require_file(&data.labels)?;
    let options = LabelOptions {
        drop_unknown_nodes: data.drop_unknown_labels,
    };
    let ds = load_dataset(&dataset_name(data), &data.edges, &data.labels, options)?;
    if data.largest_component {
        let lcc = ds.largest_component()?;
        log::info!(
            "kept {} of {} nodes in the largest component",
            lcc.graph.num_nodes(),
            ds.graph.num_nodes()
        );
        Ok(lcc)
    } else {
        Ok(ds)
    }
}

fn emit<T: Serialize>(command: &str, body: T, output: Option<&Path>, summary: &str) -> Result<()> {
    let report = Report::new(command, body);
    match output {
        Some(path) => {
            report.write(path)?;
            println!("{summary}");
        }
        None => {
            println!("{}", report.to_json()?);
            eprintln!("{summary}");
        }
    }
    Ok(())
}

fn sampling(args: &SamplingArgs) -> SamplingSpec {
    match (args.per_class, args.fraction) {
        (Some(count), _) => SamplingSpec::PerClass { count },
        (None, Some(fraction)) => SamplingSpec::Fraction { fraction },
        (None, None) => unreachable!("clap requires one sampling flag"),
    }
}

fn trials(args: &TrialArgs, ds: &Dataset) -> usize {
    args.trials.unwrap_or(if ds.truth.multilabel { 10 } else { 20 })
}

/// Flags that were set, by name.
fn set_flags(m: &ModelArgs) -> Vec<&'static str> {
    let mut out = Vec::new();
    let mut mark = |set: bool, name: &'static str| {
        if set {
            out.push(name);
        }
    };
    mark(m.k.is_some(), "k");
    mark(m.lambda.is_some(), "lambda");
    mark(m.alpha.is_some(), "alpha");
    mark(m.t.is_some(), "t");
    mark(m.t_grid.is_some(), "t-grid");
    mark(m.cv_folds.is_some(), "cv-folds");
    mark(m.iters.is_some(), "iters");
    mark(m.lambda_o.is_some(), "lambda-o");
    mark(m.lambda_theta.is_some(), "lambda-theta");
    mark(m.ridge.is_some(), "ridge");
    mark(m.dictionary, "dictionary");
    mark(m.unconstrained, "unconstrained");
    mark(m.outlier_step.is_some(), "outlier-step");
    mark(m.eps.is_some(), "eps");
    mark(m.max_sweeps.is_some(), "max-sweeps");
    out
}

fn accepted_flags(method: Method) -> &'static [&'static str] {
    match method {
        Method::Adadif => &["k", "lambda", "ridge", "dictionary", "unconstrained"],
        Method::Radadif => &["k", "lambda-o", "lambda-theta", "outlier-step", "eps", "max-sweeps"],
        Method::Ppr => &["k", "alpha"],
        Method::Hk => &["k", "t", "t-grid", "cv-folds"],
        Method::Lp => &["iters"],
        Method::Kstep => &["k"],
    }
}

/// Rejects flags that none of `methods` uses.
fn check_flags(methods: &[Method], model: &ModelArgs) -> Result<()> {
    for flag in set_flags(model) {
        if !methods.iter().any(|&m| accepted_flags(m).contains(&flag)) {
            let names: Vec<String> = methods.iter().map(|m| format!("{m:?}").to_lowercase()).collect();
            return Err(CliError::conflict(format!(
                "--{flag} does not apply to method {}",
                names.join(",")
            )));
        }
    }
    Ok(())
}

pub fn method_spec(method: Method, m: &ModelArgs, multilabel: bool) -> Result<MethodSpec> {
    let spec = match method {
        Method::Adadif => {
            let base = if multilabel {
                HyperParams::multilabel()
            } else {
                HyperParams::multiclass()
            };
            MethodSpec::Adadif {
                hp: HyperParams {
                    k: m.k.unwrap_or(base.k),
                    lambda: m.lambda.unwrap_or(base.lambda),
                    dictionary: m.dictionary,
                    unconstrained: m.unconstrained,
                    ridge: m.ridge,
                    ..base
                },
            }
        }
        Method::Radadif => {
            let base = RobustParams::default();
            MethodSpec::Radadif {
                params: RobustParams {
                    k: m.k.unwrap_or(base.k),
                    lambda_o: m.lambda_o.unwrap_or(base.lambda_o),
                    lambda_theta: m.lambda_theta.unwrap_or(base.lambda_theta),
                    eps: m.eps.unwrap_or(base.eps),
                    max_sweeps: m.max_sweeps.unwrap_or(base.max_sweeps),
                    outlier_step: match m.outlier_step {
                        None => base.outlier_step,
                        Some(OutlierStepArg::AsPrinted) => OutlierStep::AsPrinted,
                        Some(OutlierStepArg::Exact) => OutlierStep::Exact,
                    },
                    ..base
                },
            }
        }
        Method::Ppr => MethodSpec::Ppr {
            alpha: m.alpha.unwrap_or(0.98),
            k: m.k.unwrap_or(50),
        },
        Method::Hk => {
            let k = m.k.unwrap_or(50);
            match (m.t, &m.t_grid) {
                (Some(t), None) => MethodSpec::Hk { t, k },
                (None, Some(grid)) => MethodSpec::hk_cross_validated(grid, k, m.cv_folds.unwrap_or(10)),
                _ => return Err(CliError::usage("missing-argument", "method hk needs --t or --t-grid")),
            }
        }
        Method::Lp => MethodSpec::Lp {
            iters: m.iters.unwrap_or(50),
        },
        Method::Kstep => MethodSpec::Kstep {
            k: m
                .k
                .ok_or_else(|| CliError::usage("missing-argument", "method kstep needs --k"))?,
        },
    };
    spec.validate()?;
    Ok(spec)
}

fn stats_line(name: &str, s: &DatasetStats) -> String {
    format!(
        "{name}: N={} |E|={} |Y|={} multilabel={} components={}",
        s.nodes,
        s.edges,
        s.classes,
        if s.multilabel { "yes" } else { "no" },
        s.components
    )
}

pub fn run(args: &RunArgs) -> Result<()> {
    check_flags(&[args.method], &args.model)?;
    if let Some(p) = args.p_cor {
        if !(0.0..=1.0).contains(&p) {
            return Err(CliError::usage("invalid-value", format!("--p-cor must lie in [0,1], got {p}")));
        }
    }
    // Validate what can be validated before touching the data.
    method_spec(args.method, &args.model, false)?;
    let ds = load(&args.data)?;
    let spec = method_spec(args.method, &args.model, ds.truth.multilabel)?;
    let sampling = sampling(&args.sampling);
    let n_trials = trials(&args.trial, &ds);
    let options = TrialOptions {
        p_cor: args.p_cor,
        min_per_class: None,
    };
    let result = run_experiment(&ds, &spec, &sampling, n_trials, args.trial.seed, options)?;
    let a = &result.aggregate;
    let summary = format!(
        "{} on {}: micro-F1 {:.1} ± {:.1}, macro-F1 {:.1} ± {:.1} over {} trials",
        a.method,
        ds.name,
        100.0 * a.micro_mean,
        100.0 * a.micro_std,
        100.0 * a.macro_mean,
        100.0 * a.macro_std,
        a.trials
    );
    let body = json!({
        "dataset": ds.name,
        "stats": ds.stats(),
        "seed": args.trial.seed,
        "trials": result.trials,
        "aggregate": result.aggregate,
    });
    emit("run", body, args.trial.output.as_deref(), &summary)
}

/// Node ids of `class` in a label file, mapped to graph indices.
fn class_members(labels: &Path, graph: &adadif::Graph, class: u64) -> Result<Vec<usize>> {
    let reader = File::open(labels).map(BufReader::new).map_err(|_| CliError::missing_file(labels))?;
    let truth = adadif_harness::load_labels(reader, graph, LabelOptions::default())?;
    let c = truth
        .class_ids
        .binary_search(&class)
        .map_err(|_| CliError::usage("invalid-value", format!("label {class} does not occur")))?;
    Ok(truth.members()[c].clone())
}

fn node_indices(graph: &adadif::Graph, ids: &[u64]) -> Result<Vec<usize>> {
    ids.iter()
        .map(|&id| {
            graph
                .index_of(id)
                .ok_or_else(|| CliError::usage("invalid-value", format!("node {id} is not in the graph")))
        })
        .collect()
}

pub fn bound(args: &BoundArgs) -> Result<()> {
    if args.gamma.is_nan() || args.gamma <= 0.0 {
        return Err(CliError::usage("invalid-value", format!("--gamma must be positive, got {}", args.gamma)));
    }
    require_file(&args.edges)?;
    let reader = File::open(&args.edges).map(BufReader::new).map_err(|_| CliError::missing_file(&args.edges))?;
    let g = load_graph(reader).map_err(adadif_harness::Error::from)?;
    let (plus, minus) = match (&args.labels, &args.plus, &args.minus) {
        (Some(labels), _, _) => {
            require_file(labels)?;
            let (pc, mc) = match (args.plus_class, args.minus_class) {
                (Some(p), Some(m)) => (p, m),
                _ => {
                    return Err(CliError::usage(
                        "missing-argument",
                        "--labels needs --plus-class and --minus-class",
                    ))
                }
            };
            (class_members(labels, &g, pc)?, class_members(labels, &g, mc)?)
        }
        (None, Some(p), Some(m)) => (node_indices(&g, p)?, node_indices(&g, m)?),
        _ => {
            return Err(CliError::usage(
                "missing-argument",
                "give --plus and --minus, or --labels with --plus-class and --minus-class",
            ))
        }
    };
    if g.is_bipartite() {
        return Err(CliError::data(
            "bipartite-graph",
            "graph is bipartite, so walks never mix and no walk-length bound exists",
        ));
    }
    let spectrum = spectral_summary(&g, 1e-10).map_err(adadif_harness::Error::from)?;
    let mut inputs =
        BoundInputs::from_graph(&g, &plus, &minus, args.gamma, &spectrum).map_err(adadif_harness::Error::from)?;
    let theorem = kgamma_bound(&inputs).map_err(adadif_harness::Error::from)?;
    let ppr = match args.alpha {
        Some(alpha) => {
            inputs.alpha = Some(alpha);
            Some(kgamma_bound_ppr(&inputs).map_err(adadif_harness::Error::from)?)
        }
        None => None,
    };
    let measured = empirical_kgamma(&g, &plus, &minus, args.gamma, args.k_max).map_err(adadif_harness::Error::from)?;
    let summary = format!(
        "mu' = {:.4}: bound K = {theorem}{}, measured K = {}",
        spectrum.mu_prime,
        ppr.map(|k| format!(", PageRank bound K = {k}")).unwrap_or_default(),
        measured
            .k()
            .map(|k| k.to_string())
            .unwrap_or_else(|| format!("> {}", args.k_max))
    );
    let body = json!({
        "spectrum": spectrum,
        "inputs": inputs,
        "bound": theorem,
        "ppr_bound": ppr,
        "measured": measured,
    });
    emit("bound", body, args.output.as_deref(), &summary)
}

pub fn corrupt(args: &CorruptArgs) -> Result<()> {
    check_flags(&args.methods, &args.model)?;
    if args.methods.is_empty() || args.p_grid.is_empty() {
        return Err(CliError::usage("invalid-value", "--methods and --p-grid must be nonempty"));
    }
    let ds = load(&args.data)?;
    let specs: Vec<MethodSpec> = args
        .methods
        .iter()
        .map(|&m| {
            let own = restrict(&args.model, m);
            method_spec(m, &own, ds.truth.multilabel)
        })
        .collect::<Result<_>>()?;
    let n_trials = trials(&args.trial, &ds);
    let points = corruption_sweep(&ds, &specs, &sampling(&args.sampling), &args.p_grid, n_trials, args.trial.seed)?;
    let summary = points
        .iter()
        .map(|p| format!("{}@{}: {:.1}", p.result.aggregate.method, p.p_cor, 100.0 * p.result.aggregate.micro_mean))
        .collect::<Vec<_>>()
        .join(", ");
    let body = json!({
        "dataset": ds.name,
        "seed": args.trial.seed,
        "points": points,
    });
    emit("corrupt", body, args.trial.output.as_deref(), &format!("micro-F1 {summary}"))
}

/// Copy of `m` with only the flags that `method` accepts.
fn restrict(m: &ModelArgs, method: Method) -> ModelArgs {
    let ok = |flag: &str| accepted_flags(method).contains(&flag);
    ModelArgs {
        k: m.k.filter(|_| ok("k")),
        lambda: m.lambda.filter(|_| ok("lambda")),
        alpha: m.alpha.filter(|_| ok("alpha")),
        t: m.t.filter(|_| ok("t")),
        t_grid: m.t_grid.clone().filter(|_| ok("t-grid")),
        cv_folds: m.cv_folds.filter(|_| ok("cv-folds")),
        iters: m.iters.filter(|_| ok("iters")),
        lambda_o: m.lambda_o.filter(|_| ok("lambda-o")),
        lambda_theta: m.lambda_theta.filter(|_| ok("lambda-theta")),
        ridge: m.ridge.filter(|_| ok("ridge")),
        dictionary: m.dictionary && ok("dictionary"),
        unconstrained: m.unconstrained && ok("unconstrained"),
        outlier_step: m.outlier_step.filter(|_| ok("outlier-step")),
        eps: m.eps.filter(|_| ok("eps")),
        max_sweeps: m.max_sweeps.filter(|_| ok("max-sweeps")),
    }
}

pub fn roc(args: &RocArgs) -> Result<()> {
    check_flags(&[Method::Radadif], &args.model)?;
    let MethodSpec::Radadif { params } = method_spec(Method::Radadif, &args.model, false)? else {
        unreachable!()
    };
    let grid = args
        .lambda_grid
        .clone()
        .unwrap_or_else(|| (0..13).map(|j| 10f64.powf(-4.0 + j as f64 / 3.0)).collect());
    let ds = load(&args.data)?;
    let n_trials = trials(&args.trial, &ds);
    let points = roc_sweep(&ds, &sampling(&args.sampling), args.p_cor, &grid, n_trials, args.trial.seed, &params)?;
    let summary = format!(
        "{} ROC points at p_cor {}: {}",
        points.len(),
        args.p_cor,
        points
            .iter()
            .map(|p| format!("({:.2}, {:.2})", p.p_fa, p.p_d))
            .collect::<Vec<_>>()
            .join(" ")
    );
    let body = json!({
        "dataset": ds.name,
        "seed": args.trial.seed,
        "p_cor": args.p_cor,
        "params": params,
        "points": points,
    });
    emit("roc", body, args.trial.output.as_deref(), &summary)
}

pub fn stats(args: &StatsArgs) -> Result<()> {
    require_file(&args.data.edges)?;
    require_file(&args.data.labels)?;
    let options = LabelOptions {
        drop_unknown_nodes: args.data.drop_unknown_labels,
    };
    let ds = read_dataset(&dataset_name(&args.data), &args.data.edges, &args.data.labels, options)?;
    let report = ds.validate();
    let mut line = stats_line(&ds.name, &report.observed);
    match (&report.expected, report.ok) {
        (None, _) => line.push_str(" (no reference sizes)"),
        (Some(_), true) => line.push_str(", OK"),
        (Some(_), false) => line.push_str(&format!(", MISMATCH: {}", report.diffs.join("; "))),
    }
    let ok = report.ok;
    let diffs = report.diffs.join("; ");
    emit("stats", report, args.output.as_deref(), &line)?;
    if ok {
        Ok(())
    } else {
        Err(CliError::data("stats-mismatch", format!("{}: {diffs}", ds.name)))
    }
}
