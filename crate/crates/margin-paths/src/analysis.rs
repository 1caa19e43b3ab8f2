//! Experiment layer: does the gradient-descent direction agree with the
//! constrained-path direction, do the limit directions satisfy the margin
//! bounds, how does the poly-tail margin scale with n, how do the spanned
//! components converge, and can an alternating-tail loss keep the path
//! direction oscillating.

use crate::data::{
    make_margin_scaling_dataset, margin, margin_on, max_margin,
};
use crate::error::{Error, Result};
use crate::linalg;
use crate::losses::{
    build_oscillating, make_exponential, make_poly_tail, DatasetConstants,
};
use crate::regpath::{minimize_on_s, solve_path, RegPath};
use crate::risk::{GdTrace, RiskProblem};
use serde::{Deserialize, Serialize};

const DIRECTION_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Serialize)]
pub struct ComparisonPair {
    pub t: usize,
    pub b: f64,
    pub angle: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DirectionComparison {
    pub pairs: Vec<ComparisonPair>,
    pub final_angle: f64,
    /// Least-squares slope of angle against log2(B) over the matched pairs.
    pub trend_slope: f64,
    /// Angles nonincreasing across the last three matched octaves.
    pub decreasing_last_octaves: bool,
}

/// For each path radius B, finds the trace iterate whose norm is within 5%
/// of B and closest to it, and measures the angle between the two
/// directions.
pub fn compare_directions(trace: &GdTrace, path: &RegPath) -> Result<DirectionComparison> {
    let mut pairs = Vec::new();
    for pt in &path.points {
        let path_dir = match linalg::normalized(&pt.w_bar) {
            Some(dir) => dir,
            None => continue,
        };
        let mut best: Option<(f64, usize, &[f64])> = None;
        for rec in &trace.records {
            let dir = match &rec.direction {
                Some(dir) => dir,
                None => continue,
            };
            let gap = (rec.norm - pt.b).abs();
            if gap <= 0.05 * pt.b && best.as_ref().is_none_or(|(g, _, _)| gap < *g) {
                best = Some((gap, rec.t, dir));
            }
        }
        if let Some((_, t, dir)) = best {
            pairs.push(ComparisonPair {
                t,
                b: pt.b,
                angle: linalg::angle(dir, &path_dir),
            });
        }
    }
    if pairs.is_empty() {
        let trace_hi = trace
            .records
            .iter()
            .map(|r| r.norm)
            .fold(0.0f64, f64::max);
        return Err(Error::Coverage {
            trace_hi,
            path_lo: path.points.first().map_or(0.0, |p| p.b),
            path_hi: path.points.last().map_or(0.0, |p| p.b),
        });
    }
    let final_angle = pairs.last().unwrap().angle;
    let xs: Vec<f64> = pairs.iter().map(|p| p.b.log2()).collect();
    let ys: Vec<f64> = pairs.iter().map(|p| p.angle).collect();
    let trend_slope = fit_slope(&xs, &ys).0;
    let tail = &pairs[pairs.len().saturating_sub(4)..];
    let decreasing_last_octaves = tail
        .windows(2)
        .all(|w| w[1].angle <= w[0].angle + DIRECTION_SLACK);
    Ok(DirectionComparison {
        pairs,
        final_angle,
        trend_slope,
        decreasing_last_octaves,
    })
}

fn fit_slope(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = if sxx == 0.0 { 0.0 } else { sxy / sxx };
    let max_resid = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - (my + slope * (x - mx))).abs())
        .fold(0.0f64, f64::max);
    (slope, max_resid)
}

/// A limit-direction estimate from a solved path, carrying the convergence
/// evidence the margin check gates on.
#[derive(Debug, Clone, Serialize)]
pub struct PathDirection {
    pub dir: Vec<f64>,
    /// Angle between the last two direction estimates.
    pub consecutive_angle: f64,
    /// Consecutive angles nonincreasing over the last three octaves.
    pub decreasing: bool,
}

fn direction_from(dirs: &[Vec<f64>]) -> Result<PathDirection> {
    if dirs.len() < 2 {
        return Err(Error::Parameter(
            "need at least two direction estimates to assess convergence".into(),
        ));
    }
    let tail = &dirs[dirs.len().saturating_sub(4)..];
    let angles: Vec<f64> = tail
        .windows(2)
        .map(|w| linalg::angle(&w[0], &w[1]))
        .collect();
    let decreasing = angles
        .windows(2)
        .all(|a| a[1] <= a[0] + DIRECTION_SLACK);
    Ok(PathDirection {
        dir: dirs.last().unwrap().clone(),
        consecutive_angle: *angles.last().unwrap(),
        decreasing,
    })
}

impl PathDirection {
    /// Direction of the last path point, with consecutive-angle evidence
    /// from the preceding radii.
    pub fn from_radial(path: &RegPath) -> Result<Self> {
        let dirs: Vec<Vec<f64>> = path
            .points
            .iter()
            .filter_map(|p| linalg::normalized(&p.w_bar))
            .collect();
        direction_from(&dirs)
    }

    /// Direction of the last difference `w(B_k) - w(B_{k-1})`, which cancels
    /// any fixed offset the path carries in the spanned subspace.
    pub fn from_difference(path: &RegPath) -> Result<Self> {
        let dirs: Vec<Vec<f64>> = path
            .points
            .windows(2)
            .filter_map(|w| linalg::normalized(&linalg::sub(&w[1].w_bar, &w[0].w_bar)))
            .collect();
        direction_from(&dirs)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MarginReport {
    /// Margin of the supplied limit direction (restricted to the separable
    /// complement when the dataset has a spanned part).
    pub gamma_bar: f64,
    pub gamma_hat: f64,
    /// `gamma_hat^2 / (2n)`, or `gamma_hat^2 / (8 |D_c|)` in the general
    /// case.
    pub bound: f64,
    pub satisfied: bool,
}

/// Checks the lower bound on the limit direction's margin. Refuses
/// directions whose convergence evidence is stale: the consecutive angle
/// must be below 1e-3 and nonincreasing.
pub fn margin_bound_check(p: &RiskProblem, limit_dir: &PathDirection) -> Result<MarginReport> {
    if !(limit_dir.consecutive_angle < 1e-3 && limit_dir.decreasing) {
        return Err(Error::StaleDirection {
            angle: limit_dir.consecutive_angle,
            decreasing: limit_dir.decreasing,
        });
    }
    let general = p
        .decomposition
        .as_ref()
        .filter(|dec| !dec.sc_indices.is_empty());
    let (gamma_bar, gamma_hat, bound) = match general {
        Some(dec) => {
            let sep = dec.separator.as_ref().ok_or_else(|| {
                Error::Parameter("dataset has no separable complement to bound".into())
            })?;
            let gamma_bar = margin_on(&limit_dir.dir, &p.ds, &dec.comp_indices)?;
            let bound = sep.gamma * sep.gamma / (8.0 * dec.comp_indices.len() as f64);
            (gamma_bar, sep.gamma, bound)
        }
        None => {
            let mm = max_margin(&p.ds, 1e-10)?;
            let gamma_bar = margin(&limit_dir.dir, &p.ds)?;
            let bound = mm.gamma_hat * mm.gamma_hat / (2.0 * p.ds.n() as f64);
            (gamma_bar, mm.gamma_hat, bound)
        }
    };
    Ok(MarginReport {
        gamma_bar,
        gamma_hat,
        bound,
        satisfied: gamma_bar >= bound - 1e-6,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ScalingReport {
    /// Value-tail exponent: the loss decays like z^{-b}.
    pub b: f64,
    pub ns: Vec<usize>,
    /// Limit-direction margin on the lone far point, per n.
    pub margins: Vec<f64>,
    pub slope: f64,
    pub expected_slope: f64,
    pub max_fit_residual: f64,
    /// Per-point optimality-weight ratio m_near^{-(b+1)} / m_far^{-(b+1)}
    /// at the limit direction: one far point balances ~n cluster points, so
    /// this decays like 1/n.
    pub pq_ratios: Vec<f64>,
    pub pq_exponent: f64,
    pub min_u_gap: f64,
    pub gamma_hats: Vec<f64>,
    pub gamma_hat_spread: f64,
}

/// One cell of the scaling experiment: the limit-direction quantities for a
/// single cluster size. Cells are independent, so a runner may compute them
/// concurrently and assemble the fit afterwards.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScalingPoint {
    pub n: usize,
    /// Limit-direction margin on the lone far point.
    pub margin: f64,
    /// Optimality-weight ratio m_near^{-(b+1)} / m_far^{-(b+1)}.
    pub pq_ratio: f64,
    /// First-minus-second coordinate of the limit direction.
    pub u_gap: f64,
    pub gamma_hat: f64,
}

/// Solves one cluster size of the scaling experiment: runs the path with the
/// z^{-b} value tail on make_margin_scaling_dataset(n) over power-of-two
/// radii up to B_max and reads the margin structure off the endpoint.
pub fn scaling_point(b: f64, n: usize, b_max: f64, tol: f64) -> Result<ScalingPoint> {
    if !(b > 0.0) {
        return Err(Error::Parameter(format!(
            "tail exponent must be positive, got {b}"
        )));
    }
    if !(b_max >= 2.0 && b_max.is_finite()) {
        return Err(Error::Parameter(format!("B_max must be at least 2, got {b_max}")));
    }
    let kmax = b_max.log2().ceil() as i32;
    let bs: Vec<f64> = (0..=kmax).map(|k| 2f64.powi(k)).collect();
    let loss = make_poly_tail(1.0, b + 1.0)?;
    let ds = make_margin_scaling_dataset(n)?;
    let gamma_hat = max_margin(&ds, 1e-10)?.gamma_hat;
    let p = RiskProblem::new(loss, ds)?;
    let path = solve_path(&p, &bs, tol).map_err(|e| match e {
        Error::Convergence {
            context,
            iterations,
            residual,
        } => Error::Convergence {
            context: format!("{context} (n={n})"),
            iterations,
            residual,
        },
        other => other,
    })?;
    let last = path.points.last().unwrap();
    let dir = linalg::normalized(&last.w_bar)
        .ok_or_else(|| Error::Parameter(format!("degenerate path endpoint for n={n}")))?;
    let m_far = linalg::dot(&dir, p.ds.z(n - 1));
    let m_near = linalg::dot(&dir, p.ds.z(0));
    if !(m_far > 0.0 && m_near > 0.0) {
        return Err(Error::Parameter(format!(
            "limit direction fails to separate at n={n}: margins {m_near}, {m_far}"
        )));
    }
    Ok(ScalingPoint {
        n,
        margin: m_far,
        pq_ratio: m_near.powf(-(b + 1.0)) / m_far.powf(-(b + 1.0)),
        u_gap: dir[0] - dir[1],
        gamma_hat,
    })
}

/// Fits log(margin) against log(n) over solved scaling cells and assembles
/// the report; the cells must cover at least 4 sizes spanning a decade.
pub fn scaling_fit(b: f64, points: &[ScalingPoint]) -> Result<ScalingReport> {
    if !(b > 0.0) {
        return Err(Error::Parameter(format!(
            "tail exponent must be positive, got {b}"
        )));
    }
    if points.len() < 4 {
        return Err(Error::Parameter(format!(
            "need at least 4 cluster sizes, got {}",
            points.len()
        )));
    }
    let lo = points.iter().map(|pt| pt.n).min().unwrap();
    let hi = points.iter().map(|pt| pt.n).max().unwrap();
    if lo < 2 || hi < 10 * lo {
        return Err(Error::Parameter(format!(
            "cluster sizes must span a decade with min >= 2, got {lo}..{hi}"
        )));
    }
    let ln_ns: Vec<f64> = points.iter().map(|pt| (pt.n as f64).ln()).collect();
    let ln_ms: Vec<f64> = points.iter().map(|pt| pt.margin.ln()).collect();
    let (slope, max_fit_residual) = fit_slope(&ln_ns, &ln_ms);
    let ln_pq: Vec<f64> = points.iter().map(|pt| pt.pq_ratio.ln()).collect();
    let (pq_exponent, _) = fit_slope(&ln_ns, &ln_pq);
    let gamma_hats: Vec<f64> = points.iter().map(|pt| pt.gamma_hat).collect();
    Ok(ScalingReport {
        b,
        ns: points.iter().map(|pt| pt.n).collect(),
        margins: points.iter().map(|pt| pt.margin).collect(),
        slope,
        expected_slope: -1.0 / (b + 1.0),
        max_fit_residual,
        pq_ratios: points.iter().map(|pt| pt.pq_ratio).collect(),
        pq_exponent,
        min_u_gap: points.iter().map(|pt| pt.u_gap).fold(f64::INFINITY, f64::min),
        gamma_hats: gamma_hats.clone(),
        gamma_hat_spread: gamma_hats.iter().copied().fold(f64::NEG_INFINITY, f64::max)
            - gamma_hats.iter().copied().fold(f64::INFINITY, f64::min),
    })
}

/// Measures how the poly-tail limit margin shrinks with the cluster size on
/// the margin-scaling family: fits log(margin) against log(n) and reports
/// the weight-ratio structure behind the bound.
pub fn scaling_experiment(
    b: f64,
    n_grid: &[usize],
    b_max: f64,
    tol: f64,
) -> Result<ScalingReport> {
    if !(b > 0.0) {
        return Err(Error::Parameter(format!(
            "tail exponent must be positive, got {b}"
        )));
    }
    if n_grid.len() < 4 {
        return Err(Error::Parameter(format!(
            "need at least 4 cluster sizes, got {}",
            n_grid.len()
        )));
    }
    let lo = *n_grid.iter().min().unwrap();
    let hi = *n_grid.iter().max().unwrap();
    if lo < 2 || hi < 10 * lo {
        return Err(Error::Parameter(format!(
            "cluster sizes must span a decade with min >= 2, got {lo}..{hi}"
        )));
    }
    if !(b_max >= 2.0 && b_max.is_finite()) {
        return Err(Error::Parameter(format!("B_max must be at least 2, got {b_max}")));
    }
    let mut points = Vec::with_capacity(n_grid.len());
    for &n in n_grid {
        points.push(scaling_point(b, n, b_max, tol)?);
    }
    scaling_fit(b, &points)
}

#[derive(Debug, Clone, Serialize)]
pub struct DecompositionReport {
    pub v_bar: Vec<f64>,
    /// Distance of the projected iterate to v_bar, per recorded step.
    pub trace_dist: Vec<(usize, f64)>,
    /// Distance of the projected path point to v_bar, per radius.
    pub path_dist: Vec<(f64, f64)>,
    pub shared_dir: Vec<f64>,
    pub shared_dir_span_norm: f64,
    pub verdict: bool,
}

fn monotone_last_half(vals: &[f64]) -> bool {
    let tail = &vals[vals.len() / 2..];
    tail.windows(2).all(|w| w[1] <= w[0] + DIRECTION_SLACK)
}

/// Checks the decomposition picture at desk scale: the projections of both
/// the iterates and the path onto the spanned subspace converge to the
/// restricted minimizer, and the shared limit direction (extracted as a
/// path difference) has no spanned component.
pub fn decomposition_convergence(
    p: &RiskProblem,
    trace: &GdTrace,
    path: &RegPath,
) -> Result<DecompositionReport> {
    let dec = p
        .decomposition
        .as_ref()
        .filter(|dec| !dec.sc_indices.is_empty())
        .ok_or_else(|| {
            Error::Parameter("decomposition convergence needs a nonempty spanned part".into())
        })?;
    let v_bar = minimize_on_s(p)?.v_bar;
    let dist = |w: &[f64]| {
        let proj = linalg::project_onto_span(w, &dec.basis_s);
        linalg::norm(&linalg::sub(&proj, &v_bar))
    };
    let trace_dist: Vec<(usize, f64)> = trace
        .records
        .iter()
        .map(|r| (r.t, dist(&r.w)))
        .collect();
    let path_dist: Vec<(f64, f64)> = path
        .points
        .iter()
        .map(|pt| (pt.b, dist(&pt.w_bar)))
        .collect();
    let shared = PathDirection::from_difference(path)?;
    let span_norm = linalg::norm(&linalg::project_onto_span(&shared.dir, &dec.basis_s));
    let trace_vals: Vec<f64> = trace_dist.iter().map(|&(_, d)| d).collect();
    let path_vals: Vec<f64> = path_dist.iter().map(|&(_, d)| d).collect();
    let verdict = trace_vals.last().is_some_and(|&d| d < 1e-3)
        && path_vals.last().is_some_and(|&d| d < 1e-3)
        && monotone_last_half(&trace_vals)
        && monotone_last_half(&path_vals)
        && span_norm < 1e-3;
    Ok(DecompositionReport {
        v_bar,
        trace_dist,
        path_dist,
        shared_dir: shared.dir,
        shared_dir_span_norm: span_norm,
        verdict,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct OscillationReport {
    pub n: usize,
    pub b0: f64,
    pub switches: usize,
    pub u_bar_emp: Vec<f64>,
    pub u_hat_emp: Vec<f64>,
    pub gamma_bar: f64,
    /// Angle between the two empirical limit directions; the alternation is
    /// only meaningful when this is comfortably positive.
    pub separation: f64,
    /// Per reciprocal window: (probe radius d_k, angle to u_bar_emp).
    pub recip_checks: Vec<(f64, f64)>,
    /// Per exponential window: (probe radius b_k, angle to u_hat_emp).
    pub exp_checks: Vec<(f64, f64)>,
    pub verdict: bool,
}

/// Builds the alternating-tail loss for the margin-scaling dataset and
/// verifies that the constrained-path direction swings to the reciprocal
/// limit at each d_k and back to the exponential limit at each b_k.
///
/// The two empirical limit directions come from auxiliary reciprocal and
/// exponential paths; the reciprocal one settles early and fixes gamma_bar
/// (hence the window radii), the exponential one is read off at the top of
/// the oscillating range, where the comparison happens.
pub fn oscillation_experiment(
    b0: f64,
    n: usize,
    switches: usize,
    tol: f64,
) -> Result<OscillationReport> {
    if switches < 2 {
        return Err(Error::Parameter(format!(
            "the alternation needs at least two switches, got {switches}"
        )));
    }
    let ds = make_margin_scaling_dataset(n)?;
    let bs0: Vec<f64> = (0..=12).map(|k| 2f64.powi(k)).collect();
    let recip = RiskProblem::new(make_poly_tail(1.0, 2.0)?, ds.clone())?;
    let recip_path = solve_path(&recip, &bs0, tol)?;
    let u_bar = linalg::normalized(&recip_path.points.last().unwrap().w_bar)
        .ok_or_else(|| Error::Parameter("degenerate reciprocal path endpoint".into()))?;
    let gamma_bar = margin(&u_bar, &ds)?;
    let osc = build_oscillating(b0, DatasetConstants { n, gamma_bar }, switches)?;
    let top = osc
        .recip_windows
        .iter()
        .chain(&osc.exp_windows)
        .map(|&(_, hi)| hi)
        .fold(0.0f64, f64::max);
    let kmax = top.log2().ceil() as i32 + 1;
    let bs_aux: Vec<f64> = (0..=kmax).map(|k| 2f64.powi(k)).collect();
    let exp = RiskProblem::new(make_exponential(1.0, 1.0)?, ds.clone())?;
    let exp_path = solve_path(&exp, &bs_aux, tol)?;
    let u_hat = linalg::normalized(&exp_path.points.last().unwrap().w_bar)
        .ok_or_else(|| Error::Parameter("degenerate exponential path endpoint".into()))?;
    let separation = linalg::angle(&u_hat, &u_bar);
    if separation <= 0.05 {
        return Err(Error::Inconclusive { separation });
    }
    let mut radii: Vec<f64> = (0..kmax).map(|k| 2f64.powi(k)).collect();
    radii.extend(osc.recip_windows.iter().map(|&(_, d)| d));
    radii.extend(osc.exp_windows.iter().map(|&(_, b)| b));
    radii.sort_by(|a, b| a.partial_cmp(b).unwrap());
    radii.dedup();
    let osc_p = RiskProblem::new(osc.loss.clone(), ds)?;
    let osc_path = solve_path(&osc_p, &radii, tol)?;
    let dir_at = |radius: f64| -> Result<Vec<f64>> {
        let idx = radii
            .iter()
            .position(|&r| r == radius)
            .expect("probe radius is in the grid by construction");
        linalg::normalized(&osc_path.points[idx].w_bar)
            .ok_or_else(|| Error::Parameter(format!("degenerate path point at B={radius}")))
    };
    let mut recip_checks = Vec::new();
    for &(_, d) in &osc.recip_windows {
        recip_checks.push((d, linalg::angle(&dir_at(d)?, &u_bar)));
    }
    let mut exp_checks = Vec::new();
    for &(_, b) in &osc.exp_windows {
        exp_checks.push((b, linalg::angle(&dir_at(b)?, &u_hat)));
    }
    let bar = separation / 3.0;
    let verdict = recip_checks.iter().all(|&(_, a)| a < bar)
        && exp_checks.iter().all(|&(_, a)| a < bar);
    Ok(OscillationReport {
        n,
        b0,
        switches,
        u_bar_emp: u_bar,
        u_hat_emp: u_hat,
        gamma_bar,
        separation,
        recip_checks,
        exp_checks,
        verdict,
    })
}
