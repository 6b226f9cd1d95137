//! `hiersparse` command-line front end.
//!
//! Every command writes its artifact plus a `run.json` sidecar holding the
//! resolved configuration. Randomized steps default to seed 7.

use std::collections::BTreeMap;
use std::error::Error as StdError;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use hiersparse::data::{self, axis_names, fmt_real, load_csv, load_sites_csv, sniff_header};
use hiersparse::diagnostics;
use hiersparse::faer::{Mat, MatRef};
use hiersparse::hierfit::{fit_scale, fit_trace};
use hiersparse::predict::intervals;
use hiersparse::{
    baseline, Dataset, Error, FitSettings, GridSpec, HierModel, Sampling, ScaleFit, TestFunction,
};
use serde::Serialize;

type CliResult<T> = std::result::Result<T, Box<dyn StdError>>;

#[derive(Parser)]
#[command(name = "hiersparse", version, about = "Scale-hierarchical sparse kernel representations")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Global {
    /// Seed for every randomized step.
    #[arg(long, global = true, default_value_t = 7)]
    seed: u64,
    /// Residual tolerance in normalized units; `inf` stops at scale 0.
    #[arg(long, global = true, default_value = "1e-2", value_parser = parse_tol, allow_hyphen_values = true)]
    tol: f64,
    /// Ratio between successive length scales.
    #[arg(long = "p-factor", global = true, default_value_t = 2.0)]
    p_factor: f64,
    /// Base length scale T (default: 2 (diam/2)² of the normalized sites).
    #[arg(long = "t", global = true)]
    t: Option<f64>,
    /// Relative eigenvalue cutoff for the numerical rank.
    #[arg(long, global = true, default_value_t = 1e-10)]
    delta: f64,
    /// Extra sketch rows beyond the rank.
    #[arg(long, global = true, default_value_t = 8)]
    oversample: usize,
    #[arg(long = "max-scale", global = true, default_value_t = 25)]
    max_scale: usize,
    /// Significance level of the t-bands.
    #[arg(long, global = true, default_value_t = 0.05)]
    alpha: f64,
    /// Output file, or directory for diagnose and importance.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

fn parse_tol(s: &str) -> Result<f64, String> {
    let v = f64::from_str(s).map_err(|e| e.to_string())?;
    if v.is_nan() || v < 0.0 {
        return Err(format!("TOL must be non-negative, got {s}"));
    }
    Ok(v)
}

#[derive(Subcommand)]
enum Command {
    /// Sample a test function (TF1..TF4) to CSV.
    Gen {
        id: String,
        #[arg(long, conflicts_with_all = ["grid", "uniform"])]
        equidistant: Option<usize>,
        #[arg(long, conflicts_with = "uniform")]
        grid: Option<usize>,
        /// Uniform random sites, drawn with --seed.
        #[arg(long)]
        uniform: Option<usize>,
    },
    /// Fit a sparse model; writes the model JSON and a trace CSV.
    Fit {
        #[arg(long)]
        data: PathBuf,
        /// Keep this scale instead of the terminal one.
        #[arg(long)]
        scale: Option<usize>,
    },
    /// Evaluate a model at new sites, with t-bands when --data is given.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, conflicts_with = "grid", required_unless_present = "grid")]
        sites: Option<PathBuf>,
        /// Regular grid with this cell size over the training (or model) box.
        #[arg(long)]
        grid: Option<f64>,
        /// Training set, needed for interval bands.
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Evaluate a model at the sites of a dataset and report residuals.
    Reconstruct {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
    },
    /// Bound, power-function and stability tables for a fit.
    Diagnose {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        scale: Option<usize>,
    },
    /// Pivot-order importance over repeated sketches at one scale.
    Importance {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        scale: usize,
        #[arg(long, default_value_t = 100)]
        runs: usize,
    },
    /// Compare the hierarchical fit with the residual cascade.
    Compare {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 1000)]
        queries: usize,
    },
}

#[derive(Serialize)]
struct RunConfig {
    command: &'static str,
    inputs: BTreeMap<&'static str, String>,
    outputs: Vec<String>,
    tol: f64,
    p_factor: f64,
    t: Option<f64>,
    t_resolved: Option<f64>,
    delta: f64,
    k_oversample: usize,
    seed: u64,
    alpha: f64,
    max_scale: usize,
    scale: Option<usize>,
    summary: serde_json::Value,
}

impl RunConfig {
    fn new(command: &'static str, g: &Global) -> Self {
        Self {
            command,
            inputs: BTreeMap::new(),
            outputs: Vec::new(),
            tol: g.tol,
            p_factor: g.p_factor,
            t: g.t,
            t_resolved: None,
            delta: g.delta,
            k_oversample: g.oversample,
            seed: g.seed,
            alpha: g.alpha,
            max_scale: g.max_scale,
            scale: None,
            summary: serde_json::Value::Null,
        }
    }

    fn input(mut self, key: &'static str, path: &Path) -> Self {
        self.inputs.insert(key, path.display().to_string());
        self
    }

    fn save(mut self, outputs: &[&Path], path: &Path) -> CliResult<()> {
        self.outputs = outputs.iter().map(|p| p.display().to_string()).collect();
        let mut text = serde_json::to_string_pretty(&self)?;
        text.push('\n');
        write_file(path, text.as_bytes())
    }
}

fn settings(g: &Global) -> FitSettings {
    FitSettings {
        tol: g.tol,
        p: g.p_factor,
        t: g.t,
        delta: g.delta,
        k_oversample: g.oversample,
        seed: g.seed,
        max_scale: g.max_scale,
        ..FitSettings::default()
    }
}

fn out_path(g: &Global) -> CliResult<PathBuf> {
    g.out.clone().ok_or_else(|| "--out is required".into())
}

/// `model.json` -> `model.<suffix>`.
fn sidecar(out: &Path, suffix: &str) -> PathBuf {
    out.with_extension(suffix)
}

fn write_file(path: &Path, bytes: &[u8]) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, bytes)?;
    Ok(())
}

/// Renders into memory first so a failed run leaves no partial file.
fn write_with<F>(path: &Path, render: F) -> CliResult<()>
where
    F: FnOnce(&mut Vec<u8>) -> hiersparse::Result<()>,
{
    let mut buf = Vec::new();
    render(&mut buf)?;
    write_file(path, &buf)
}

fn load_raw(path: &Path) -> CliResult<Dataset> {
    Ok(load_csv(path, sniff_header(path)?)?)
}

fn load_normalized(path: &Path) -> CliResult<Dataset> {
    Ok(load_raw(path)?.normalize())
}

fn write_table<W: std::io::Write>(
    writer: W,
    sites: MatRef<'_, f64>,
    names: &[&str],
    columns: &[&[f64]],
) -> hiersparse::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = axis_names(sites.ncols());
    header.extend(names.iter().map(|s| s.to_string()));
    w.write_record(&header)?;
    for i in 0..sites.nrows() {
        let mut row: Vec<String> = (0..sites.ncols()).map(|k| fmt_real(sites[(i, k)])).collect();
        row.extend(columns.iter().map(|c| fmt_real(c[i])));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: &Cli) -> CliResult<()> {
    let g = &cli.global;
    match &cli.command {
        Command::Gen {
            id,
            equidistant,
            grid,
            uniform,
        } => cmd_gen(g, id, *equidistant, *grid, *uniform),
        Command::Fit { data, scale } => cmd_fit(g, data, *scale),
        Command::Predict {
            model,
            sites,
            grid,
            data,
        } => cmd_predict(g, model, sites.as_deref(), *grid, data.as_deref()),
        Command::Reconstruct { model, data } => cmd_reconstruct(g, model, data),
        Command::Diagnose { data, scale } => cmd_diagnose(g, data, *scale),
        Command::Importance { data, scale, runs } => cmd_importance(g, data, *scale, *runs),
        Command::Compare { data, queries } => cmd_compare(g, data, *queries),
    }
}

fn cmd_gen(
    g: &Global,
    id: &str,
    equidistant: Option<usize>,
    grid: Option<usize>,
    uniform: Option<usize>,
) -> CliResult<()> {
    let tf = TestFunction::from_str(id)?;
    let out = out_path(g)?;
    let sampling = match (equidistant, grid, uniform) {
        (Some(n), _, _) => Sampling::Equidistant(n),
        (_, Some(n), _) => Sampling::Grid(n),
        (_, _, Some(n)) => Sampling::Uniform { n, seed: g.seed },
        _ => tf.default_sampling(),
    };
    let ds = tf.generate(sampling)?;
    write_with(&out, |w| ds.write_csv(w, true))?;
    let mut cfg = RunConfig::new("gen", g);
    cfg.summary = serde_json::json!({
        "id": tf.to_string(),
        "sampling": format!("{sampling:?}"),
        "n": ds.n(),
    });
    cfg.save(&[&out], &sidecar(&out, "run.json"))?;
    println!("{tf}: wrote {} sites to {}", ds.n(), out.display());
    Ok(())
}

fn cmd_fit(g: &Global, data: &Path, scale: Option<usize>) -> CliResult<()> {
    let out = out_path(g)?;
    let ds = load_normalized(data)?;
    let st = settings(g);
    let trace = fit_trace(&ds, &st)?;
    let rec = match scale {
        None => trace.last().clone(),
        Some(s) => match trace.record(s) {
            Some(r) => r.clone(),
            None => {
                let eps = hiersparse::kernel::epsilon(trace.t, trace.p, s);
                fit_scale(&ds, s, eps, &st)?
            }
        },
    };
    let model = HierModel::from_record(&ds, &st, &trace, &rec)?;
    let trace_path = sidecar(&out, "trace.csv");
    let mut json = model.to_json()?;
    json.push('\n');
    write_file(&out, json.as_bytes())?;
    write_with(&trace_path, |w| trace.write_csv(w))?;
    let mut cfg = RunConfig::new("fit", g).input("data", data);
    cfg.t_resolved = Some(trace.t);
    cfg.scale = scale;
    cfg.summary = serde_json::json!({
        "scale": model.scale,
        "rank": model.len(),
        "n": model.n_train,
        "residual_2norm": model.residual_2norm,
        "sampled_fraction": model.sampled_fraction,
        "terminal_status": trace.terminal_status.to_string(),
        "critical_scale": trace.critical_scale(),
    });
    cfg.save(&[&out, &trace_path], &sidecar(&out, "run.json"))?;
    println!(
        "scale {} ({}): {} of {} sites, residual {:.3e}",
        model.scale,
        trace.terminal_status,
        model.len(),
        model.n_train,
        model.residual_2norm
    );
    Ok(())
}

/// Query sites in raw units. Files with one extra column (a response) are
/// accepted and the last column ignored.
fn query_sites(
    model: &HierModel,
    sites: Option<&Path>,
    grid: Option<f64>,
    train: Option<&Dataset>,
) -> CliResult<Mat<f64>> {
    let d = model.d();
    if let Some(path) = sites {
        let m = load_sites_csv(path, sniff_header(path)?)?;
        return match m.ncols() {
            c if c == d => Ok(m),
            c if c == d + 1 => Ok(Mat::from_fn(m.nrows(), d, |i, k| m[(i, k)])),
            c => Err(Error::DimensionMismatch { expected: d, found: c }.into()),
        };
    }
    let cell = grid.ok_or("either --sites or --grid is required")?;
    let bbox = match train {
        Some(ds) => ds.denormalize().bounding_box(),
        None => data::bounding_box(model.raw_sites().as_ref()),
    };
    Ok(GridSpec::covering(&bbox, cell)?.nodes())
}

fn cmd_predict(
    g: &Global,
    model_path: &Path,
    sites: Option<&Path>,
    grid: Option<f64>,
    data: Option<&Path>,
) -> CliResult<()> {
    let out = out_path(g)?;
    let model = HierModel::load(model_path)?;
    let train = match data {
        Some(p) => Some(load_raw(p)?.normalize_with(&model.normalization)?),
        None => None,
    };
    let raw = query_sites(&model, sites, grid, train.as_ref())?;
    let z = model.normalization.normalize_sites(raw.as_ref())?;
    let mut cfg = RunConfig::new("predict", g).input("model", model_path);
    if let Some(p) = sites {
        cfg = cfg.input("sites", p);
    }
    if let Some(p) = data {
        cfg = cfg.input("data", p);
    }
    cfg.t_resolved = Some(model.t);
    cfg.scale = Some(model.scale);

    let band = match &train {
        Some(ds) => {
            let fit = ScaleFit::from_model(ds, &model)?;
            match intervals(&fit, z.as_ref(), g.alpha) {
                Ok(b) => Some(b.denormalize(&model.normalization)),
                Err(Error::DegenerateDof { n, rank }) => {
                    eprintln!("warning: degenerate dof (n = {n}, l = {rank}); bands omitted");
                    None
                }
                Err(e) => return Err(e.into()),
            }
        }
        None => None,
    };
    match &band {
        Some(b) => {
            write_with(&out, |w| b.write_csv(w, raw.as_ref()))?;
            cfg.summary = serde_json::json!({
                "points": raw.nrows(),
                "bands": true,
                "dof": b.dof,
                "sigma_hat": b.sigma_hat,
            });
        }
        None => {
            let mean = model.reconstruct(raw.as_ref())?;
            write_with(&out, |w| write_table(w, raw.as_ref(), &["mean"], &[&mean]))?;
            cfg.summary = serde_json::json!({ "points": raw.nrows(), "bands": false });
        }
    }
    cfg.save(&[&out], &sidecar(&out, "run.json"))?;
    println!("wrote {} predictions to {}", raw.nrows(), out.display());
    Ok(())
}

fn cmd_reconstruct(g: &Global, model_path: &Path, data: &Path) -> CliResult<()> {
    let out = out_path(g)?;
    let model = HierModel::load(model_path)?;
    let ds = load_raw(data)?;
    let rec = model.reconstruct(ds.sites.as_ref())?;
    let res: Vec<f64> = ds.values.iter().zip(&rec).map(|(v, r)| v - r).collect();
    write_with(&out, |w| {
        write_table(
            w,
            ds.sites.as_ref(),
            &["value", "reconstructed", "residual"],
            &[&ds.values, &rec, &res],
        )
    })?;
    let mut cfg = RunConfig::new("reconstruct", g)
        .input("model", model_path)
        .input("data", data);
    cfg.t_resolved = Some(model.t);
    cfg.scale = Some(model.scale);
    let r2 = res.iter().map(|r| r * r).sum::<f64>().sqrt();
    cfg.summary = serde_json::json!({ "points": ds.n(), "residual_2norm_raw": r2 });
    cfg.save(&[&out], &sidecar(&out, "run.json"))?;
    println!("residual 2-norm {:.3e} over {} sites", r2, ds.n());
    Ok(())
}

/// Points per axis of the power-function sweep.
fn sweep_points(d: usize) -> usize {
    match d {
        1 => 201,
        2 => 41,
        _ => 11,
    }
}

fn cmd_diagnose(g: &Global, data: &Path, scale: Option<usize>) -> CliResult<()> {
    let dir = out_path(g)?;
    let ds = load_normalized(data)?;
    let st = settings(g);
    let trace = fit_trace(&ds, &st)?;
    let lengths = diagnostics::box_lengths(&ds);
    let rows = diagnostics::bound_report(&trace, &ds.values, &lengths, &st);
    let rec = match scale {
        None => trace.last().clone(),
        Some(s) => match trace.record(s) {
            Some(r) => r.clone(),
            None => fit_scale(&ds, s, hiersparse::kernel::epsilon(trace.t, trace.p, s), &st)?,
        },
    };
    let fit = ScaleFit::from_record(&ds, &rec)?;

    let bbox = ds.bounding_box();
    let span = lengths.iter().cloned().fold(0.0, f64::max);
    let cell = if span > 0.0 {
        span / (sweep_points(ds.d()) - 1) as f64
    } else {
        1.0
    };
    let xs = GridSpec::covering(&bbox, cell)?.nodes();
    let power = diagnostics::power_bound(&fit, xs.as_ref())?;
    let xs_raw = ds.normalization.denormalize_sites(xs.as_ref())?;
    let stab = diagnostics::stability_diag(&fit)?;

    let paths = ["trace.csv", "bounds.csv", "power.csv", "stability.csv"].map(|f| dir.join(f));
    write_with(&paths[0], |w| trace.write_csv(w))?;
    write_with(&paths[1], |w| diagnostics::write_bound_csv(&rows, w))?;
    write_with(&paths[2], |w| diagnostics::write_power_csv(&power, xs_raw.as_ref(), w))?;
    write_with(&paths[3], |w| diagnostics::write_stability_csv(&stab, w))?;

    let mut cfg = RunConfig::new("diagnose", g).input("data", data);
    cfg.t_resolved = Some(trace.t);
    cfg.scale = scale;
    cfg.summary = serde_json::json!({
        "diagnosed_scale": rec.s,
        "rank": rec.rank,
        "terminal_status": trace.terminal_status.to_string(),
        "stability_lower": stab.lower,
        "stability_upper": stab.upper,
        "sweep_points": xs.nrows(),
    });
    let refs: Vec<&Path> = paths.iter().map(|p| p.as_path()).collect();
    cfg.save(&refs, &dir.join("run.json"))?;
    println!("diagnostics for scale {} written to {}", rec.s, dir.display());
    Ok(())
}

fn cmd_importance(g: &Global, data: &Path, scale: usize, runs: usize) -> CliResult<()> {
    let dir = out_path(g)?;
    let ds = load_normalized(data)?;
    let st = settings(g);
    let report = diagnostics::importance(&ds, scale, runs, &st)?;
    let raw = ds.denormalize();
    let ranking = dir.join("ranking.csv");
    let histogram = dir.join("histogram.csv");
    write_with(&ranking, |w| report.write_ranking_csv(w))?;
    write_with(&histogram, |w| report.write_histogram_csv(w, raw.sites.as_ref()))?;
    let mut cfg = RunConfig::new("importance", g).input("data", data);
    cfg.t_resolved = Some(st.resolve_t(&ds)?);
    cfg.scale = Some(scale);
    cfg.summary = serde_json::json!({
        "runs": runs,
        "rank": report.rank,
        "max_top_share": report.max_top_share(),
    });
    cfg.save(&[&ranking, &histogram], &dir.join("run.json"))?;
    println!(
        "scale {scale}: rank {}, largest rank-1 share {:.3}",
        report.rank,
        report.max_top_share()
    );
    Ok(())
}

fn cmd_compare(g: &Global, data: &Path, queries: usize) -> CliResult<()> {
    let out = out_path(g)?;
    let ds = load_normalized(data)?;
    let st = settings(g);
    let query = data::uniform_in_box(&ds.bounding_box(), queries, g.seed)?;
    let report = baseline::compare(&ds, &st, query.as_ref())?;
    write_with(&out, |w| report.write_csv(w))?;
    let mut cfg = RunConfig::new("compare", g).input("data", data);
    cfg.t_resolved = Some(st.resolve_t(&ds)?);
    cfg.summary = serde_json::json!({
        "queries": queries,
        "hier_scale": report.hier_scale,
        "hier_status": report.hier_status.to_string(),
        "hier_sites": report.hier_model.len(),
        "cascade_scale": report.cascade_scale,
        "cascade_status": report.cascade_status.to_string(),
        "cascade_sites": report.cascade_model.total_sites(),
        "kevals_hier": report.kevals_hier,
        "kevals_cascade": report.kevals_cascade,
    });
    cfg.save(&[&out], &sidecar(&out, "run.json"))?;
    println!(
        "hierarchical: scale {} ({}), {} kernel evals, {:.4} s",
        report.hier_scale, report.hier_status, report.kevals_hier, report.seconds_hier
    );
    println!(
        "cascade:      scale {} ({}), {} kernel evals, {:.4} s",
        report.cascade_scale, report.cascade_status, report.kevals_cascade, report.seconds_cascade
    );
    Ok(())
}
