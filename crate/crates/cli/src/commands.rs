use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use mvembed::baselines::{run_baseline, BaselineKind, BaselineParams, EdgeWeighting};
use mvembed::data::{generate_synthetic, MultiViewDataset, SynthSpec, ViewSpec, LATENT_DIM};
use mvembed::evaluation::{
    curves, curves_csv, knn_classify_eval, queries_from_labels, retrieval_eval,
    ClassificationReport, RetrievalSpec, SplitSpec,
};
use mvembed::io::{
    load_embedding, load_manifest_dataset, read_embedding_csv, read_json, read_labels,
    save_dataset, save_embedding, write_csv_matrix, write_json, LoadOptions, EMBEDDING_FILE,
    META_FILE,
};
use mvembed::mrpe::{fit, EmbeddingResult, MrpeConfig};
use mvembed::seeding::named_seed;
use mvembed::Error;
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::args::{
    BaselineArgs, DataArgs, FitArgs, KnnArgs, RetrievalArgs, SweepArgs, SynthArgs, TraceArgs,
    Weighting,
};
use crate::CliError;

type CliResult<T> = std::result::Result<T, CliError>;

/// Config echo written to every `meta.json`.
fn run_meta<A: Serialize>(command: &str, args: &A, seeds: Value) -> Value {
    json!({
        "tool": "mvembed",
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "args": args,
        "seeds": seeds,
    })
}

fn create_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e).into())
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e).into())
}

fn load(data: &DataArgs) -> CliResult<MultiViewDataset> {
    let opts = LoadOptions {
        header: data.header,
        standardize: data.standardize,
    };
    Ok(load_manifest_dataset(&data.manifest, opts)?)
}

fn fmt_list(values: &[f64]) -> String {
    values
        .iter()
        .map(f64::to_string)
        .collect::<Vec<_>>()
        .join(";")
}

fn alpha_dispersion(alpha: &[f64]) -> f64 {
    let uniform = 1.0 / alpha.len() as f64;
    alpha
        .iter()
        .map(|a| (a - uniform).abs())
        .fold(0.0, f64::max)
}

pub fn synth(args: &SynthArgs) -> CliResult<()> {
    let synth_seed = named_seed(args.seed, "synth");
    let views = args
        .dims
        .iter()
        .enumerate()
        .map(|(v, &dim)| {
            if args.full_views {
                ViewSpec::full(dim)
            } else {
                ViewSpec::axis(dim, v % LATENT_DIM)
            }
        })
        .collect();
    let spec = SynthSpec {
        n: args.n,
        n_classes: args.classes,
        noise_sigma: args.noise,
        seed: synth_seed,
        views,
    };
    let ds = generate_synthetic(&spec)?;
    let manifest = save_dataset(&ds, &args.out)?;
    let meta = run_meta(
        "synth",
        args,
        json!({ "base": args.seed, "synth": synth_seed }),
    );
    write_json(
        &args.out.join(META_FILE),
        &json!({ "run": meta, "spec": spec }),
    )?;
    println!("{}", manifest.display());
    Ok(())
}

pub fn mrpe_config(args: &FitArgs) -> MrpeConfig {
    MrpeConfig {
        d: args.embed.d,
        k: args.embed.k,
        r: args.r,
        reg_eps: args.embed.reg_eps,
        max_iters: args.max_iters,
        tol: args.tol,
        drop_trivial: !args.embed.keep_trivial,
    }
}

pub fn fit_cmd(args: &FitArgs) -> CliResult<()> {
    let ds = load(&args.data)?;
    let result = fit(&ds, &mrpe_config(args))?;
    if !result.converged {
        log::warn!(
            "stopped after {} iterations without meeting tol",
            result.iters_run
        );
    }
    let meta = run_meta("fit", args, json!({ "base": args.seed }));
    save_embedding(&result, &args.out, Some(meta))?;
    println!(
        "{}",
        json!({
            "iters_run": result.iters_run,
            "converged": result.converged,
            "alpha": result.alpha,
            "objective": result.objective_trace.last(),
        })
    );
    Ok(())
}

pub fn baseline_cmd(args: &BaselineArgs) -> CliResult<()> {
    let kind: BaselineKind = args.kind.parse()?;
    let ds = load(&args.data)?;
    let params = BaselineParams {
        d: args.embed.d,
        k: args.embed.k,
        reg_eps: args.embed.reg_eps,
        drop_trivial: !args.embed.keep_trivial,
        weighting: match args.weighting {
            Weighting::Heat => EdgeWeighting::Heat(args.sigma),
            Weighting::Binary => EdgeWeighting::Binary,
        },
    };
    let embeddings = run_baseline(kind, &ds, &params)?;
    create_dir(&args.out)?;
    let mut entries = Vec::new();
    for e in &embeddings {
        let rel = match e.view {
            Some(v) => PathBuf::from(format!("view{v}")).join(EMBEDDING_FILE),
            None => PathBuf::from(EMBEDDING_FILE),
        };
        let path = args.out.join(&rel);
        if let Some(parent) = path.parent() {
            create_dir(parent)?;
        }
        write_csv_matrix(&path, &e.y.transpose())?;
        entries.push(json!({
            "view": e.view,
            "embedding": rel,
            "eigenvalues": e.eigenvalues,
            "degenerate_subspace": e.degenerate_subspace,
            "disconnected": e.disconnected,
        }));
    }
    let meta = json!({
        "run": run_meta("baseline", args, json!({ "base": args.seed })),
        "kind": kind.as_str(),
        "params": params,
        "embeddings": entries,
    });
    write_json(&args.out.join(META_FILE), &meta)?;
    println!("{}", args.out.display());
    Ok(())
}

fn read_embedding_and_labels(
    embedding: &Path,
    labels: &Path,
    header: bool,
) -> CliResult<(DMatrix<f64>, Vec<i64>)> {
    let y = read_embedding_csv(embedding)?;
    let labels = read_labels(labels, header)?;
    if labels.len() != y.ncols() {
        return Err(Error::MismatchedSampleCount {
            view: "labels".into(),
            expected: y.ncols(),
            found: labels.len(),
        }
        .into());
    }
    Ok((y, labels))
}

fn accuracies_csv(report: &ClassificationReport) -> String {
    let mut out = String::from("repeat,accuracy\n");
    for (i, a) in report.accuracies.iter().enumerate() {
        let _ = writeln!(out, "{i},{a}");
    }
    out
}

pub fn knn_cmd(args: &KnnArgs) -> CliResult<()> {
    let (y, labels) = read_embedding_and_labels(&args.embedding, &args.labels, args.header)?;
    let split_seed = named_seed(args.seed, "knn-split");
    let spec = SplitSpec {
        test_fraction: args.test_frac,
        n_repeats: args.repeats,
        seed: split_seed,
        stratified: args.stratified,
    };
    let report = knn_classify_eval(&y, &labels, &spec)?;
    if let Some(out) = &args.out {
        create_dir(out)?;
        write_json(&out.join("knn.json"), &report)?;
        write_text(&out.join("knn_accuracies.csv"), &accuracies_csv(&report))?;
        let meta = run_meta(
            "eval knn",
            args,
            json!({ "base": args.seed, "split": split_seed }),
        );
        write_json(&out.join(META_FILE), &json!({ "run": meta }))?;
    }
    println!(
        "{}",
        json!({ "mean_accuracy": report.summary.mean, "max_accuracy": report.summary.max })
    );
    Ok(())
}

pub fn retrieval_cmd(args: &RetrievalArgs) -> CliResult<()> {
    let y = read_embedding_csv(&args.embedding)?;
    let query_seed = named_seed(args.seed, "queries");
    let spec = match (&args.queries, &args.labels) {
        (Some(path), _) => {
            let mut spec: RetrievalSpec = read_json(path)?;
            spec.top_k = args.top_k;
            spec
        }
        (None, Some(path)) => {
            let labels = read_labels(path, args.header)?;
            if labels.len() != y.ncols() {
                return Err(Error::MismatchedSampleCount {
                    view: "labels".into(),
                    expected: y.ncols(),
                    found: labels.len(),
                }
                .into());
            }
            queries_from_labels(&labels, args.per_class, args.top_k, query_seed)?
        }
        (None, None) => {
            return Err(CliError::Usage(
                "either --queries or --labels is required".into(),
            ))
        }
    };
    let report = retrieval_eval(&y, &spec)?;
    let curve = if args.curve_k.is_empty() {
        None
    } else {
        Some(curves(&y, &spec, &args.curve_k)?)
    };
    if let Some(out) = &args.out {
        create_dir(out)?;
        write_json(&out.join("retrieval.json"), &report)?;
        write_json(&out.join("queries.json"), &spec)?;
        let mut per_query = String::from("query,precision,recall,average_precision\n");
        for q in &report.per_query {
            let _ = writeln!(
                per_query,
                "{},{},{},{}",
                q.query, q.precision, q.recall, q.average_precision
            );
        }
        write_text(&out.join("retrieval_queries.csv"), &per_query)?;
        if let Some(points) = &curve {
            write_text(&out.join("curves.csv"), &curves_csv(points))?;
        }
        let meta = run_meta(
            "eval retrieval",
            args,
            json!({ "base": args.seed, "queries": query_seed }),
        );
        write_json(&out.join(META_FILE), &json!({ "run": meta }))?;
    }
    println!(
        "{}",
        json!({ "precision": report.precision, "recall": report.recall, "map": report.map, "f1": report.f1 })
    );
    Ok(())
}

/// `iter,objective,rel_change,alpha_0..` with one row per iteration.
pub fn trace_csv(result: &EmbeddingResult, with_timing: bool) -> String {
    let m = result.alpha.len();
    let mut out = String::from("iter,objective,rel_change");
    for v in 0..m {
        let _ = write!(out, ",alpha_{v}");
    }
    if with_timing {
        out.push_str(",seconds");
    }
    out.push('\n');
    for (t, obj) in result.objective_trace.iter().enumerate() {
        let rel = match t.checked_sub(1).map(|p| result.objective_trace[p]) {
            Some(prev) if prev != 0.0 => ((obj - prev) / prev.abs()).to_string(),
            _ => String::new(),
        };
        let _ = write!(out, "{},{obj},{rel}", t + 1);
        for a in &result.alpha_trace[t] {
            let _ = write!(out, ",{a}");
        }
        if with_timing {
            let secs = result
                .iteration_seconds
                .get(t)
                .map(f64::to_string)
                .unwrap_or_default();
            let _ = write!(out, ",{secs}");
        }
        out.push('\n');
    }
    out
}

pub fn trace_cmd(args: &TraceArgs) -> CliResult<()> {
    let (result, _) = load_embedding(&args.result)?;
    let out = args
        .out
        .clone()
        .unwrap_or_else(|| args.result.join("trace.csv"));
    write_text(&out, &trace_csv(&result, args.with_timing))?;
    println!("{}", out.display());
    Ok(())
}

struct Cell {
    r: f64,
    k: usize,
    d: usize,
}

impl Cell {
    fn tag(&self) -> String {
        format!("r{}_k{}_d{}", self.r, self.k, self.d)
    }
}

pub fn sweep_cmd(args: &SweepArgs) -> CliResult<()> {
    if args.r_grid.is_empty() || args.k_grid.is_empty() || args.d_grid.is_empty() {
        return Err(CliError::Usage("sweep grid is empty".into()));
    }
    let ds = load(&args.data)?;
    let labels = ds
        .labels()
        .ok_or_else(|| CliError::Usage("sweep needs a labels file in the manifest".into()))?
        .to_vec();
    let split_seed = named_seed(args.seed, "knn-split");
    let split = SplitSpec {
        test_fraction: args.test_frac,
        n_repeats: args.repeats,
        seed: split_seed,
        stratified: false,
    };
    let mut cells = Vec::new();
    for &r in &args.r_grid {
        for &k in &args.k_grid {
            for &d in &args.d_grid {
                cells.push(Cell { r, k, d });
            }
        }
    }
    let trace_dir = args.out.join("traces");
    create_dir(&trace_dir)?;

    let rows: Vec<CliResult<String>> = cells
        .par_iter()
        .map(|cell| {
            let config = MrpeConfig {
                d: cell.d,
                k: cell.k,
                r: cell.r,
                reg_eps: args.reg_eps,
                max_iters: args.max_iters,
                tol: args.tol,
                drop_trivial: !args.keep_trivial,
            };
            let outcome = fit(&ds, &config).and_then(|res| {
                let report = knn_classify_eval(&res.y, &labels, &split)?;
                Ok((res, report))
            });
            let row = match outcome {
                Ok((res, report)) => {
                    write_text(
                        &trace_dir.join(format!("{}.csv", cell.tag())),
                        &trace_csv(&res, false),
                    )?;
                    format!(
                        "{},{},{},ok,{},{},{},{},{},{},",
                        cell.r,
                        cell.k,
                        cell.d,
                        report.summary.mean,
                        report.summary.max,
                        fmt_list(&res.alpha),
                        alpha_dispersion(&res.alpha),
                        res.iters_run,
                        res.converged,
                    )
                }
                Err(e) => {
                    log::warn!("sweep cell {} failed: {e}", cell.tag());
                    let msg = e.to_string().replace(['"', '\n'], "'");
                    format!("{},{},{},failed,,,,,,,\"{}\"", cell.r, cell.k, cell.d, msg)
                }
            };
            Ok(row)
        })
        .collect();

    let mut csv = String::from("r,k,d,status,mean_accuracy,max_accuracy,alpha,alpha_dispersion,iters_run,converged,error\n");
    for row in rows {
        csv.push_str(&row?);
        csv.push('\n');
    }
    write_text(&args.out.join("sweep.csv"), &csv)?;
    let meta = run_meta(
        "sweep",
        args,
        json!({ "base": args.seed, "split": split_seed }),
    );
    write_json(&args.out.join(META_FILE), &json!({ "run": meta }))?;
    println!("{}", args.out.join("sweep.csv").display());
    Ok(())
}
