//! Argument structs and runners for the subcommands. Each runner returns
//! `Ok(true)` when the run's property verdict holds, `Ok(false)` when the
//! run completed but the verdict is false, and `Err` on operational
//! failures.

use crate::config::{
    is_generator_spec, parse_data_spec, radius_grid, resolve_loss, resolve_losses, DataSource,
    FileConfig,
};
use anyhow::{anyhow, bail, Context, Result};
use clap::Args;
use margin_paths::analysis::{
    compare_directions, oscillation_experiment, scaling_fit, scaling_point, ScalingPoint,
};
use margin_paths::data::{decompose, save_csv};
use margin_paths::linalg;
use margin_paths::losses::{validate, Grid};
use margin_paths::regpath::{save_path_csv, solve_path};
use margin_paths::risk::{gd_run, pick_step_size, save_trace_csv, RiskProblem, StopRule};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::{Path, PathBuf};

const DEFAULT_TOL: f64 = 1e-8;
const DECOMPOSE_TOL: f64 = 1e-9;
const DEFAULT_MAX_STEPS: usize = 100_000;
const DEFAULT_B_MAX: f64 = 4096.0;
const DEFAULT_GRID_FACTOR: f64 = 2.0;
const DEFAULT_ANGLE_GATE: f64 = 0.02;
const DEFAULT_NS: [usize; 5] = [10, 20, 40, 80, 160];
const SLOPE_WINDOW: f64 = 0.08;
const SPREAD_WINDOW: f64 = 1e-3;

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// JSON config file; explicit flags override its fields.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory; defaults to the config value, then $MARGIN_PATHS_OUT,
    /// then ./out.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Check the resolved configuration and inputs, then exit without running.
    #[arg(long)]
    pub dry_run: bool,
    /// Solver tolerance.
    #[arg(long, value_name = "EPS")]
    pub tol: Option<f64>,
}

impl CommonArgs {
    fn load(&self) -> Result<FileConfig> {
        FileConfig::load(self.config.as_deref())
    }

    fn out_dir(&self, cfg: &FileConfig) -> PathBuf {
        crate::config::resolve_out(self.out.clone(), cfg)
    }

    fn tol(&self, cfg: &FileConfig, default: f64) -> Result<f64> {
        let tol = self.tol.or(cfg.tol).unwrap_or(default);
        if !(tol.is_finite() && tol > 0.0) {
            bail!("tol must be a positive number, got {tol}");
        }
        Ok(tol)
    }
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Dataset: margin_scaling:n=<count>, clouds[:seed=<seed>], or a CSV path.
    #[arg(long, value_name = "SPEC")]
    pub data: Option<String>,
    /// Seed for generator specs that omit seed=.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Rescale CSV datasets into the unit ball instead of rejecting them.
    #[arg(long)]
    pub normalize: bool,
}

impl DataArgs {
    fn resolve(&self, cfg: &FileConfig) -> Result<DataSource> {
        let spec = self
            .data
            .clone()
            .or_else(|| cfg.data.clone())
            .ok_or_else(|| anyhow!("no dataset given; pass --data or set \"data\" in the config"))?;
        let seed = self.seed.or(cfg.seed);
        let normalize = self.normalize || cfg.normalize.unwrap_or(false);
        parse_data_spec(&spec, seed, normalize)
    }
}

fn ensure_out(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating output directory {}", dir.display()))
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).context("serializing summary")?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn dry_run_ok(desc: &str) -> Result<bool> {
    println!("dry-run ok: {desc}");
    Ok(true)
}

/// Runs one closure per input, preserving input order in the returned
/// vector. `jobs > 1` fans out on a thread pool of that width.
fn run_jobs<T, R, F>(jobs: usize, inputs: Vec<T>, f: F) -> Result<Vec<R>>
where
    T: Send,
    R: Send,
    F: Fn(T) -> Result<R> + Sync + Send,
{
    if jobs <= 1 || inputs.len() <= 1 {
        return inputs.into_iter().map(f).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.min(inputs.len()))
        .build()
        .context("building the job pool")?;
    pool.install(|| inputs.into_par_iter().map(&f).collect())
}

fn positive_steps(max_steps: usize) -> Result<usize> {
    if max_steps == 0 {
        bail!("max-steps must be positive");
    }
    Ok(max_steps)
}

#[derive(Debug, Args)]
pub struct DecomposeArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub common: CommonArgs,
}

pub fn run_decompose(args: DecomposeArgs) -> Result<bool> {
    let cfg = args.common.load()?;
    let out = args.common.out_dir(&cfg);
    let tol = args.common.tol(&cfg, DECOMPOSE_TOL)?;
    let source = args.data.resolve(&cfg)?;
    if args.common.dry_run {
        return dry_run_ok(&format!(
            "decompose data={} tol={tol:?} out={}",
            source.describe,
            out.display()
        ));
    }
    ensure_out(&out)?;
    let dec = decompose(&source.dataset, tol)?;
    write_text(&out.join("decomposition.json"), &(dec.to_json() + "\n"))?;
    let summary = serde_json::json!({
        "data": source.describe,
        "n": source.dataset.n(),
        "dim": source.dataset.dim(),
        "spanned_points": dec.sc_indices.len(),
        "separable_points": dec.comp_indices.len(),
        "spanned_rank": dec.basis_s.len(),
        "separator_gamma": dec.separator.as_ref().map(|s| s.gamma),
        "verdict": true,
    });
    write_json(&out.join("decompose_summary.json"), &summary)?;
    println!(
        "decompose: {} spanned / {} separable points, wrote {}",
        dec.sc_indices.len(),
        dec.comp_indices.len(),
        out.display()
    );
    Ok(true)
}

#[derive(Debug, Args)]
pub struct GdArgs {
    /// Loss spec or loss JSON path.
    #[arg(long, value_name = "SPEC")]
    pub loss: Option<String>,
    #[command(flatten)]
    pub data: DataArgs,
    /// Step size; defaults to the smoothness-based pick.
    #[arg(long)]
    pub eta: Option<f64>,
    /// Step budget.
    #[arg(long, value_name = "T")]
    pub max_steps: Option<usize>,
    /// Record every k-th step; 0 records on the power-of-two schedule.
    #[arg(long, value_name = "K")]
    pub record_every: Option<usize>,
    /// Stop once the iterate norm reaches this value.
    #[arg(long, value_name = "B")]
    pub target_norm: Option<f64>,
    /// Stop once the risk falls below this value.
    #[arg(long, value_name = "R")]
    pub target_risk: Option<f64>,
    #[command(flatten)]
    pub common: CommonArgs,
}

pub fn run_gd(args: GdArgs) -> Result<bool> {
    let cfg = args.common.load()?;
    let out = args.common.out_dir(&cfg);
    let entry = resolve_loss(args.loss.as_ref(), &cfg)?;
    let source = args.data.resolve(&cfg)?;
    let max_steps = positive_steps(args.max_steps.or(cfg.max_steps).unwrap_or(DEFAULT_MAX_STEPS))?;
    let record_every = args.record_every.or(cfg.record_every).unwrap_or(0);
    let p = RiskProblem::new(entry.loss, source.dataset)?;
    let w0 = vec![0.0; p.dim()];
    let eta = match args.eta.or(cfg.eta) {
        Some(eta) => eta,
        None => pick_step_size(&p, &w0),
    };
    if !(eta.is_finite() && eta > 0.0) {
        bail!("eta must be a positive number, got {eta}");
    }
    if args.common.dry_run {
        return dry_run_ok(&format!(
            "gd loss={} data={} eta={eta:?} max_steps={max_steps} out={}",
            entry.key,
            source.describe,
            out.display()
        ));
    }
    ensure_out(&out)?;
    let stop = StopRule {
        max_steps,
        target_norm: args.target_norm.or(cfg.target_norm),
        target_risk: args.target_risk.or(cfg.target_risk),
    };
    let trace = gd_run(&p, &w0, eta, stop, record_every)?;
    save_trace_csv(&trace, p.dim(), &out.join("gd_trace.csv"))?;
    let last = trace.records.last().unwrap();
    let summary = serde_json::json!({
        "loss": entry.key,
        "data": source.describe,
        "eta": trace.eta,
        "steps": last.t,
        "final_risk": last.risk,
        "final_grad_norm": last.grad_norm,
        "final_norm": last.norm,
        "worst_descent_residual": trace.worst_descent,
        "verdict": true,
    });
    write_json(&out.join("gd_summary.json"), &summary)?;
    println!(
        "gd: {} steps, final risk {:.6e}, final norm {:.4}, wrote {}",
        last.t,
        last.risk,
        last.norm,
        out.display()
    );
    Ok(true)
}

#[derive(Debug, Args)]
pub struct RegpathArgs {
    /// Loss spec or loss JSON path.
    #[arg(long, value_name = "SPEC")]
    pub loss: Option<String>,
    #[command(flatten)]
    pub data: DataArgs,
    /// Largest path radius.
    #[arg(long, value_name = "B")]
    pub bmax: Option<f64>,
    /// Multiplicative spacing of the radius grid.
    #[arg(long, value_name = "F")]
    pub grid_factor: Option<f64>,
    #[command(flatten)]
    pub common: CommonArgs,
}

pub fn run_regpath(args: RegpathArgs) -> Result<bool> {
    let cfg = args.common.load()?;
    let out = args.common.out_dir(&cfg);
    let tol = args.common.tol(&cfg, DEFAULT_TOL)?;
    let entry = resolve_loss(args.loss.as_ref(), &cfg)?;
    let source = args.data.resolve(&cfg)?;
    let b_max = args.bmax.or(cfg.b_max).unwrap_or(DEFAULT_B_MAX);
    let factor = args.grid_factor.or(cfg.grid_factor).unwrap_or(DEFAULT_GRID_FACTOR);
    let bs = radius_grid(b_max, factor)?;
    let p = RiskProblem::new(entry.loss, source.dataset)?;
    if args.common.dry_run {
        return dry_run_ok(&format!(
            "regpath loss={} data={} radii={} (up to {b_max}) tol={tol:?} out={}",
            entry.key,
            source.describe,
            bs.len(),
            out.display()
        ));
    }
    ensure_out(&out)?;
    let path = solve_path(&p, &bs, tol)?;
    save_path_csv(&path, p.dim(), &out.join("regpath.csv"))?;
    let last = path.points.last().unwrap();
    let summary = serde_json::json!({
        "loss": entry.key,
        "data": source.describe,
        "b_max": b_max,
        "grid_factor": factor,
        "points": path.points.len(),
        "final_b": last.b,
        "final_risk": last.risk,
        "final_log_risk": last.log_risk,
        "final_boundary": last.boundary,
        "final_collinearity_residual": last.collinearity_residual,
        "final_direction": linalg::normalized(&last.w_bar),
        "verdict": true,
    });
    write_json(&out.join("regpath_summary.json"), &summary)?;
    println!(
        "regpath: {} radii up to {b_max}, final collinearity residual {:.2e}, wrote {}",
        path.points.len(),
        last.collinearity_residual,
        out.display()
    );
    Ok(true)
}

/// Per-loss result of a compare run; serialized to the per-job file and
/// read back during the merge.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CompareCell {
    pub loss: String,
    pub data: String,
    pub b_max: f64,
    pub eta: f64,
    pub steps: usize,
    pub final_gd_norm: f64,
    pub matched_pairs: usize,
    pub final_angle: f64,
    pub trend_slope: f64,
    pub decreasing_last_octaves: bool,
}

fn compare_cell_path(dir: &Path, key: &str) -> PathBuf {
    dir.join(format!("compare_job_{key}.json"))
}

fn compare_pairs_path(dir: &Path, key: &str) -> PathBuf {
    dir.join(format!("compare_job_{key}_pairs.csv"))
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Loss spec or loss JSON path; repeat to compare several losses.
    #[arg(long = "loss", value_name = "SPEC")]
    pub losses: Vec<String>,
    #[command(flatten)]
    pub data: DataArgs,
    /// Largest path radius; also the gradient-descent norm target.
    #[arg(long, value_name = "B")]
    pub bmax: Option<f64>,
    /// Multiplicative spacing of the radius grid.
    #[arg(long, value_name = "F")]
    pub grid_factor: Option<f64>,
    /// Gradient-descent step budget.
    #[arg(long, value_name = "T")]
    pub max_steps: Option<usize>,
    /// Step size; defaults to the per-loss smoothness-based pick.
    #[arg(long)]
    pub eta: Option<f64>,
    /// Verdict gate on the final norm-matched angle, in radians.
    #[arg(long, value_name = "RAD")]
    pub angle_gate: Option<f64>,
    /// Concurrent jobs for the per-loss fan-out.
    #[arg(long, value_name = "N")]
    pub jobs: Option<usize>,
    #[command(flatten)]
    pub common: CommonArgs,
}

pub fn run_compare(args: CompareArgs) -> Result<bool> {
    let cfg = args.common.load()?;
    let out = args.common.out_dir(&cfg);
    let tol = args.common.tol(&cfg, DEFAULT_TOL)?;
    let entries = resolve_losses(&args.losses, &cfg)?;
    let source = args.data.resolve(&cfg)?;
    let b_max = args.bmax.or(cfg.b_max).unwrap_or(DEFAULT_B_MAX);
    let factor = args.grid_factor.or(cfg.grid_factor).unwrap_or(DEFAULT_GRID_FACTOR);
    let max_steps = positive_steps(args.max_steps.or(cfg.max_steps).unwrap_or(DEFAULT_MAX_STEPS))?;
    let angle_gate = args.angle_gate.or(cfg.angle_gate).unwrap_or(DEFAULT_ANGLE_GATE);
    let jobs = args.jobs.or(cfg.jobs).unwrap_or(1).max(1);
    let eta_flag = args.eta.or(cfg.eta);
    let bs = radius_grid(b_max, factor)?;
    if !(angle_gate.is_finite() && angle_gate > 0.0) {
        bail!("angle-gate must be a positive number, got {angle_gate}");
    }
    let problems: Vec<(String, RiskProblem)> = entries
        .into_iter()
        .map(|e| Ok((e.key, RiskProblem::new(e.loss, source.dataset.clone())?)))
        .collect::<Result<_>>()?;
    if args.common.dry_run {
        let keys: Vec<&str> = problems.iter().map(|(k, _)| k.as_str()).collect();
        return dry_run_ok(&format!(
            "compare losses=[{}] data={} b_max={b_max} max_steps={max_steps} jobs={jobs} out={}",
            keys.join(", "),
            source.describe,
            out.display()
        ));
    }
    ensure_out(&out)?;
    let describe = source.describe.clone();
    let keys = run_jobs(jobs, problems, |(key, p)| {
        let w0 = vec![0.0; p.dim()];
        let eta = eta_flag.unwrap_or_else(|| pick_step_size(&p, &w0));
        let stop = StopRule {
            max_steps,
            target_norm: Some(b_max),
            target_risk: None,
        };
        let trace = gd_run(&p, &w0, eta, stop, 1)
            .with_context(|| format!("gradient descent for loss {key}"))?;
        let path = solve_path(&p, &bs, tol)
            .with_context(|| format!("regularization path for loss {key}"))?;
        let cmp = compare_directions(&trace, &path)
            .with_context(|| format!("norm matching for loss {key}"))?;
        let mut pairs_csv = String::from("loss,t,B,angle\n");
        for pair in &cmp.pairs {
            pairs_csv.push_str(&format!("{key},{},{:?},{:?}\n", pair.t, pair.b, pair.angle));
        }
        write_text(&compare_pairs_path(&out, &key), &pairs_csv)?;
        let last = trace.records.last().unwrap();
        let cell = CompareCell {
            loss: key.clone(),
            data: describe.clone(),
            b_max,
            eta,
            steps: last.t,
            final_gd_norm: last.norm,
            matched_pairs: cmp.pairs.len(),
            final_angle: cmp.final_angle,
            trend_slope: cmp.trend_slope,
            decreasing_last_octaves: cmp.decreasing_last_octaves,
        };
        write_json(&compare_cell_path(&out, &key), &serde_json::to_value(&cell)?)?;
        Ok(key)
    })?;

    let mut sorted = keys;
    sorted.sort();
    let mut cells = Vec::new();
    let mut merged = String::from("loss,t,B,angle\n");
    for key in &sorted {
        let cell_file = compare_cell_path(&out, key);
        let text = fs::read_to_string(&cell_file)
            .with_context(|| format!("reading job file {}", cell_file.display()))?;
        cells.push(serde_json::from_str::<CompareCell>(&text)?);
        let pairs_file = compare_pairs_path(&out, key);
        let pairs_text = fs::read_to_string(&pairs_file)
            .with_context(|| format!("reading job file {}", pairs_file.display()))?;
        if let Some((_, body)) = pairs_text.split_once('\n') {
            merged.push_str(body);
        }
    }
    write_text(&out.join("compare_pairs.csv"), &merged)?;
    let verdict = cells.iter().all(|c| c.final_angle <= angle_gate);
    let summary = serde_json::json!({
        "data": source.describe,
        "b_max": b_max,
        "max_steps": max_steps,
        "angle_gate": angle_gate,
        "cells": cells,
        "verdict": verdict,
    });
    write_json(&out.join("compare_summary.json"), &summary)?;
    for cell in &cells {
        println!(
            "compare {}: final angle {:.6} over {} matched radii",
            cell.loss, cell.final_angle, cell.matched_pairs
        );
    }
    println!(
        "compare: verdict {} (gate {angle_gate}), wrote {}",
        if verdict { "pass" } else { "fail" },
        out.display()
    );
    Ok(verdict)
}

fn scaling_job_path(dir: &Path, n: usize) -> PathBuf {
    dir.join(format!("scaling_job_n{n:06}.json"))
}

#[derive(Debug, Args)]
pub struct MarginScalingArgs {
    /// Polynomial decay exponent of the loss value tail.
    #[arg(long)]
    pub b: Option<f64>,
    /// Cluster sizes, comma separated.
    #[arg(long, value_delimiter = ',', value_name = "N1,N2,...")]
    pub ns: Option<Vec<usize>>,
    /// Largest path radius per cluster size.
    #[arg(long, value_name = "B")]
    pub bmax: Option<f64>,
    /// Concurrent jobs for the per-size fan-out.
    #[arg(long, value_name = "N")]
    pub jobs: Option<usize>,
    #[command(flatten)]
    pub common: CommonArgs,
}

pub fn run_margin_scaling(args: MarginScalingArgs) -> Result<bool> {
    let cfg = args.common.load()?;
    let out = args.common.out_dir(&cfg);
    let tol = args.common.tol(&cfg, DEFAULT_TOL)?;
    let b = args.b.or(cfg.b).unwrap_or(1.0);
    let mut ns = args
        .ns
        .filter(|v| !v.is_empty())
        .or_else(|| cfg.ns.clone())
        .unwrap_or_else(|| DEFAULT_NS.to_vec());
    ns.sort_unstable();
    ns.dedup();
    let b_max = args.bmax.or(cfg.b_max).unwrap_or(DEFAULT_B_MAX);
    let jobs = args.jobs.or(cfg.jobs).unwrap_or(1).max(1);
    if !(b > 0.0) {
        bail!("b must be positive, got {b}");
    }
    if ns.len() < 4 {
        bail!("need at least 4 cluster sizes, got {}", ns.len());
    }
    let (lo, hi) = (ns[0], *ns.last().unwrap());
    if lo < 2 || hi < 10 * lo {
        bail!("cluster sizes must span a decade with min >= 2, got {lo}..{hi}");
    }
    if !(b_max.is_finite() && b_max >= 2.0) {
        bail!("bmax must be a finite number >= 2, got {b_max}");
    }
    if args.common.dry_run {
        return dry_run_ok(&format!(
            "margin-scaling b={b} ns={ns:?} b_max={b_max} jobs={jobs} out={}",
            out.display()
        ));
    }
    ensure_out(&out)?;
    let out_ref = &out;
    let files = run_jobs(jobs, ns.clone(), |n| {
        let point = scaling_point(b, n, b_max, tol)?;
        let file = scaling_job_path(out_ref, n);
        write_json(&file, &serde_json::to_value(&point)?)?;
        Ok(file)
    })?;
    let mut sorted = files;
    sorted.sort();
    let points: Vec<ScalingPoint> = sorted
        .iter()
        .map(|f| {
            let text = fs::read_to_string(f)
                .with_context(|| format!("reading job file {}", f.display()))?;
            Ok(serde_json::from_str(&text)?)
        })
        .collect::<Result<_>>()?;
    let report = scaling_fit(b, &points)?;
    let mut csv = String::from("n,margin,pq_ratio,u_gap,gamma_hat\n");
    for p in &points {
        csv.push_str(&format!(
            "{},{:?},{:?},{:?},{:?}\n",
            p.n, p.margin, p.pq_ratio, p.u_gap, p.gamma_hat
        ));
    }
    write_text(&out.join("margin_scaling.csv"), &csv)?;
    let in_window = (report.slope - report.expected_slope).abs() <= SLOPE_WINDOW;
    let spread_ok = report.gamma_hat_spread <= SPREAD_WINDOW;
    let verdict = in_window && spread_ok;
    let summary = serde_json::json!({
        "b": b,
        "b_max": b_max,
        "report": report,
        "slope_window": SLOPE_WINDOW,
        "spread_window": SPREAD_WINDOW,
        "verdict": verdict,
    });
    write_json(&out.join("margin_scaling_summary.json"), &summary)?;
    println!(
        "margin-scaling: slope {:.6} vs expected {:.4} (+-{SLOPE_WINDOW}), max-margin spread {:.1e}, verdict {}, wrote {}",
        report.slope,
        report.expected_slope,
        report.gamma_hat_spread,
        if verdict { "pass" } else { "fail" },
        out.display()
    );
    Ok(verdict)
}

#[derive(Debug, Args)]
pub struct OscillateArgs {
    /// Cluster size of the two-cluster dataset.
    #[arg(long)]
    pub n: Option<usize>,
    /// Radius where the first reciprocal window opens.
    #[arg(long)]
    pub b0: Option<f64>,
    /// Number of tail alternations.
    #[arg(long, value_name = "K")]
    pub switches: Option<usize>,
    #[command(flatten)]
    pub common: CommonArgs,
}

pub fn run_oscillate(args: OscillateArgs) -> Result<bool> {
    let cfg = args.common.load()?;
    let out = args.common.out_dir(&cfg);
    let tol = args.common.tol(&cfg, DEFAULT_TOL)?;
    let n = args.n.or(cfg.n).unwrap_or(100);
    let b0 = args.b0.or(cfg.b0).unwrap_or(1.0);
    let switches = args.switches.or(cfg.switches).unwrap_or(2);
    if n < 2 {
        bail!("n must be at least 2, got {n}");
    }
    if !(b0.is_finite() && b0 >= 1.0) {
        bail!("b0 must be a finite number >= 1, got {b0}");
    }
    if switches < 2 {
        bail!("switches must be at least 2, got {switches}");
    }
    if args.common.dry_run {
        return dry_run_ok(&format!(
            "oscillate n={n} b0={b0} switches={switches} tol={tol:?} out={}",
            out.display()
        ));
    }
    ensure_out(&out)?;
    let report = oscillation_experiment(b0, n, switches, tol)?;
    let mut csv = String::from("phase,radius,angle\n");
    for (radius, angle) in &report.recip_checks {
        csv.push_str(&format!("recip,{radius:?},{angle:?}\n"));
    }
    for (radius, angle) in &report.exp_checks {
        csv.push_str(&format!("exp,{radius:?},{angle:?}\n"));
    }
    write_text(&out.join("oscillate_checks.csv"), &csv)?;
    let verdict = report.verdict;
    let summary = serde_json::json!({
        "report": report,
        "verdict": verdict,
    });
    write_json(&out.join("oscillate_summary.json"), &summary)?;
    println!(
        "oscillate: separation {:.6}, {} reciprocal + {} exponential probes, verdict {}, wrote {}",
        report.separation,
        report.recip_checks.len(),
        report.exp_checks.len(),
        if verdict { "pass" } else { "fail" },
        out.display()
    );
    Ok(verdict)
}

#[derive(Debug, Args)]
pub struct ValidateLossArgs {
    /// Loss spec or loss JSON path.
    #[arg(long, value_name = "SPEC")]
    pub loss: Option<String>,
    /// Grid lower end; defaults to the risk layer's validation window.
    #[arg(long, value_name = "Z")]
    pub grid_lo: Option<f64>,
    /// Grid upper end; defaults to the risk layer's validation window.
    #[arg(long, value_name = "Z")]
    pub grid_hi: Option<f64>,
    /// Grid size.
    #[arg(long, value_name = "N")]
    pub grid_points: Option<usize>,
    #[command(flatten)]
    pub common: CommonArgs,
}

pub fn run_validate_loss(args: ValidateLossArgs) -> Result<bool> {
    let cfg = args.common.load()?;
    let out = args.common.out_dir(&cfg);
    let entry = resolve_loss(args.loss.as_ref(), &cfg)?;
    let finite: Vec<f64> = entry
        .loss
        .breakpoints
        .iter()
        .copied()
        .filter(|z| z.is_finite())
        .collect();
    let lo_default = finite.first().map_or(-4.0, |&z| (z - 2.0).min(-4.0));
    let hi_default = finite.last().map_or(60.0, |&z| (z * 1.1 + 10.0).max(60.0));
    let lo = args.grid_lo.or(cfg.grid_lo).unwrap_or(lo_default);
    let hi = args.grid_hi.or(cfg.grid_hi).unwrap_or(hi_default);
    let points = args.grid_points.or(cfg.grid_points).unwrap_or(4096);
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        bail!("grid must satisfy lo < hi with both finite, got {lo}..{hi}");
    }
    if points < 3 {
        bail!("grid needs at least 3 points, got {points}");
    }
    if args.common.dry_run {
        return dry_run_ok(&format!(
            "validate-loss loss={} grid={lo}..{hi} ({points} points) out={}",
            entry.key,
            out.display()
        ));
    }
    ensure_out(&out)?;
    let report = validate(&entry.loss, Grid::new(lo, hi, points));
    let mut csv = String::from("kind,z,detail\n");
    for v in &report.violations {
        let kind = serde_json::to_value(v.kind)?;
        csv.push_str(&format!(
            "{},{:?},{:?}\n",
            kind.as_str().unwrap_or("unknown"),
            v.z,
            v.detail
        ));
    }
    write_text(&out.join("validate_loss_violations.csv"), &csv)?;
    let worst_value_resid = report
        .breakpoint_residuals
        .iter()
        .map(|&(_, v, _)| v)
        .fold(0.0f64, f64::max);
    let worst_deriv_resid = report
        .breakpoint_residuals
        .iter()
        .map(|&(_, _, d)| d)
        .fold(0.0f64, f64::max);
    let verdict = report.is_clean();
    let summary = serde_json::json!({
        "loss": entry.key,
        "name": entry.loss.name,
        "grid": { "lo": lo, "hi": hi, "points": points },
        "violations": report.violations.len(),
        "measured_beta": report.measured_beta,
        "declared_smoothness": entry.loss.smoothness,
        "decay_ok": report.decay_ok,
        "worst_breakpoint_value_residual": worst_value_resid,
        "worst_breakpoint_deriv_residual": worst_deriv_resid,
        "verdict": verdict,
    });
    write_json(&out.join("validate_loss_summary.json"), &summary)?;
    println!(
        "validate-loss {}: {} violations on [{lo}, {hi}], verdict {}, wrote {}",
        entry.key,
        report.violations.len(),
        if verdict { "pass" } else { "fail" },
        out.display()
    );
    Ok(verdict)
}

#[derive(Debug, Args)]
pub struct GenDataArgs {
    /// Generator spec: margin_scaling:n=<count> or clouds[:seed=<seed>].
    #[arg(long, value_name = "SPEC")]
    pub data: Option<String>,
    /// Seed for generator specs that omit seed=.
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub common: CommonArgs,
}

pub fn run_gen_data(args: GenDataArgs) -> Result<bool> {
    let cfg = args.common.load()?;
    let out = args.common.out_dir(&cfg);
    let spec = args
        .data
        .or_else(|| cfg.data.clone())
        .ok_or_else(|| anyhow!("no generator given; pass --data or set \"data\" in the config"))?;
    if !is_generator_spec(&spec) {
        bail!("gen-data needs a generator spec, got a file path: {spec}");
    }
    let source = parse_data_spec(&spec, args.seed.or(cfg.seed), false)?;
    if args.common.dry_run {
        return dry_run_ok(&format!(
            "gen-data data={} (n={}, dim={}) out={}",
            source.describe,
            source.dataset.n(),
            source.dataset.dim(),
            out.display()
        ));
    }
    ensure_out(&out)?;
    save_csv(&source.dataset, &out.join("dataset.csv"))?;
    let summary = serde_json::json!({
        "data": source.describe,
        "n": source.dataset.n(),
        "dim": source.dataset.dim(),
        "file": "dataset.csv",
        "verdict": true,
    });
    write_json(&out.join("gen_data_summary.json"), &summary)?;
    println!(
        "gen-data: {} points in dimension {}, wrote {}",
        source.dataset.n(),
        source.dataset.dim(),
        out.display()
    );
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn run_jobs_preserves_input_order_under_concurrency() {
        let inputs: Vec<usize> = (0..32).collect();
        let outputs = run_jobs(4, inputs.clone(), |i| {
            std::thread::sleep(std::time::Duration::from_millis((32 - i) as u64 / 8));
            Ok(i * i)
        })
        .unwrap();
        let expected: Vec<usize> = inputs.iter().map(|i| i * i).collect();
        assert_eq!(outputs, expected);

        let err = run_jobs(4, vec![1usize, 2, 3], |i| {
            if i == 2 {
                Err(anyhow!("boom"))
            } else {
                Ok(i)
            }
        });
        assert!(err.is_err());
    }

    #[test]
    fn job_file_names_sort_in_merge_order() {
        let dir = Path::new("out");
        let mut files: Vec<PathBuf> = [160usize, 10, 1000, 80, 20, 40]
            .iter()
            .map(|&n| scaling_job_path(dir, n))
            .collect();
        files.sort();
        let expected: Vec<PathBuf> = [10usize, 20, 40, 80, 160, 1000]
            .iter()
            .map(|&n| scaling_job_path(dir, n))
            .collect();
        assert_eq!(files, expected);

        let mut keys = vec!["logistic", "exp", "poly-b-2"];
        keys.sort();
        let cells: Vec<PathBuf> = keys.iter().map(|k| compare_cell_path(dir, k)).collect();
        assert_eq!(
            cells,
            vec![
                PathBuf::from("out/compare_job_exp.json"),
                PathBuf::from("out/compare_job_logistic.json"),
                PathBuf::from("out/compare_job_poly-b-2.json"),
            ]
        );
    }
}
