//! Empirical risk of a linear classifier under a margin loss, and the
//! gradient-descent runner that asserts the descent inequality at every
//! step.
//!
//! Deep into a separable run the raw risk underflows, so alongside the plain
//! value/gradient pair there is a log-space form: `log R(w)` and the scaled
//! gradient `grad R / R`, which stay finite as long as the loss's own log
//! forms do. The path solver works exclusively with those.

use crate::data::{Dataset, Decomposition};
use crate::error::{Error, Result};
use crate::linalg;
use crate::losses::{validate, Grid, Loss};
use std::path::Path;

/// A loss paired with a dataset (and optionally its decomposition). The loss
/// is validated on a grid spanning all its breakpoints at construction.
#[derive(Debug, Clone)]
pub struct RiskProblem {
    pub loss: Loss,
    pub ds: Dataset,
    pub decomposition: Option<Decomposition>,
}

impl RiskProblem {
    pub fn new(loss: Loss, ds: Dataset) -> Result<Self> {
        let finite: Vec<f64> = loss
            .breakpoints
            .iter()
            .copied()
            .filter(|b| b.is_finite())
            .collect();
        let lo = finite.first().map_or(-4.0, |&b| (b - 2.0).min(-4.0));
        let hi = finite.last().map_or(60.0, |&b| (b * 1.1 + 10.0).max(60.0));
        let report = validate(&loss, Grid::new(lo, hi, 4096));
        if !report.is_clean() {
            return Err(Error::Parameter(format!(
                "loss {} failed validation with {} violations (first: {:?})",
                loss.name,
                report.violations.len(),
                report.violations[0]
            )));
        }
        Ok(RiskProblem {
            loss,
            ds,
            decomposition: None,
        })
    }

    pub fn with_decomposition(loss: Loss, ds: Dataset, dec: Decomposition) -> Result<Self> {
        let mut p = RiskProblem::new(loss, ds)?;
        p.decomposition = Some(dec);
        Ok(p)
    }

    pub fn dim(&self) -> usize {
        self.ds.dim()
    }
}

pub fn risk(p: &RiskProblem, w: &[f64]) -> f64 {
    let n = p.ds.n() as f64;
    p.ds
        .signed()
        .iter()
        .map(|z| p.loss.value(linalg::dot(w, z)))
        .sum::<f64>()
        / n
}

pub fn grad(p: &RiskProblem, w: &[f64]) -> Vec<f64> {
    let n = p.ds.n() as f64;
    let mut g = vec![0.0; p.dim()];
    for z in p.ds.signed() {
        let d = p.loss.deriv(linalg::dot(w, z));
        for (gk, zk) in g.iter_mut().zip(z) {
            *gk += d * zk;
        }
    }
    for gk in g.iter_mut() {
        *gk /= n;
    }
    g
}

/// Risk restricted to the spanned part and to the complement; the two sum to
/// the full risk (same 1/n normalization on both sides).
pub fn risk_split(p: &RiskProblem, w: &[f64]) -> Result<(f64, f64)> {
    let dec = p
        .decomposition
        .as_ref()
        .ok_or_else(|| Error::Parameter("risk_split needs a decomposition".into()))?;
    let n = p.ds.n() as f64;
    let part = |idx: &[usize]| {
        idx.iter()
            .map(|&i| p.loss.value(linalg::dot(w, p.ds.z(i))))
            .sum::<f64>()
            / n
    };
    Ok((part(&dec.sc_indices), part(&dec.comp_indices)))
}

/// `(log R(w), grad R(w) / R(w))`, computed without leaving log space, so it
/// stays exact when the raw risk underflows.
pub(crate) fn log_risk_scaled_grad(p: &RiskProblem, w: &[f64]) -> (f64, Vec<f64>) {
    let n = p.ds.n();
    let mut lv = Vec::with_capacity(n);
    let mut ld = Vec::with_capacity(n);
    for z in p.ds.signed() {
        let m = linalg::dot(w, z);
        lv.push(p.loss.log_value(m));
        ld.push(p.loss.log_neg_deriv(m));
    }
    let mv = lv.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sv: f64 = lv.iter().map(|&v| (v - mv).exp()).sum();
    let log_r = mv + sv.ln() - (n as f64).ln();
    let md = ld.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut gz = vec![0.0; p.dim()];
    for (z, &l) in p.ds.signed().iter().zip(&ld) {
        let f = (l - md).exp();
        for (gk, zk) in gz.iter_mut().zip(z) {
            *gk += f * zk;
        }
    }
    let scale = -((md - mv).min(700.0)).exp() / sv;
    let g_r = linalg::scaled(&gz, scale);
    (log_r, g_r)
}

/// `|grad R(w)|` recovered from the log form; zero once the risk is too
/// small to represent.
pub(crate) fn abs_grad_norm(log_r: f64, g_r: &[f64]) -> f64 {
    if log_r <= -700.0 {
        0.0
    } else {
        linalg::norm(g_r) * log_r.exp()
    }
}

/// Largest step size under which the descent inequality is guaranteed:
/// `min(1/beta, 1/(2 R(w0)))`. Losses with exponential tails have no global
/// beta; there the initial-risk bound alone applies.
pub fn pick_step_size(p: &RiskProblem, w0: &[f64]) -> f64 {
    let r0 = risk(p, w0);
    let mut eta = 1.0 / (2.0 * r0);
    if p.loss.smoothness.is_finite() {
        eta = eta.min(1.0 / p.loss.smoothness);
    }
    eta
}

#[derive(Debug, Clone)]
pub struct GdRecord {
    pub t: usize,
    pub w: Vec<f64>,
    pub risk: f64,
    pub grad_norm: f64,
    pub norm: f64,
    pub direction: Option<Vec<f64>>,
    /// `R(w_{t+1}) - R(w_t) + (eta/2)|grad R(w_t)|^2` for the step leaving
    /// this record; 0 for the final record.
    pub descent_residual: f64,
    /// Whether the record was on the requested schedule (the final iterate
    /// is always appended, schedule or not).
    pub stored: bool,
}

#[derive(Debug, Clone)]
pub struct GdTrace {
    pub records: Vec<GdRecord>,
    pub eta: f64,
    pub w0: Vec<f64>,
    /// Largest descent residual seen over all steps, recorded or not.
    pub worst_descent: f64,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct StopRule {
    pub max_steps: usize,
    /// Stop once |w_t| reaches this.
    pub target_norm: Option<f64>,
    /// Stop once R(w_t) drops to this.
    pub target_risk: Option<f64>,
}

impl StopRule {
    pub fn steps(max_steps: usize) -> Self {
        StopRule {
            max_steps,
            ..Default::default()
        }
    }
}

fn on_schedule(t: usize, record_every: usize) -> bool {
    if record_every == 0 {
        t == 0 || t.is_power_of_two()
    } else {
        t % record_every == 0
    }
}

/// Runs `w_{t+1} = w_t - eta grad R(w_t)` until a stop criterion fires,
/// asserting the descent inequality at every step and aborting on violation
/// (the signature of a step size above the smoothness budget).
///
/// `record_every = 0` records on the power-of-two schedule {0, 1, 2, 4, ...};
/// `record_every = k` records every k-th step. The final iterate is always
/// appended. Dense recording (`record_every = 1`) is required by the
/// distance-inequality check, which compares consecutive iterates.
pub fn gd_run(
    p: &RiskProblem,
    w0: &[f64],
    eta: f64,
    stop: StopRule,
    record_every: usize,
) -> Result<GdTrace> {
    if !(eta > 0.0) {
        return Err(Error::Parameter(format!("step size must be positive, got {eta}")));
    }
    let mut w = w0.to_vec();
    let mut r = risk(p, &w);
    let mut g = grad(p, &w);
    let mut records = Vec::new();
    let mut worst = f64::NEG_INFINITY;
    let mut t = 0;
    while t < stop.max_steps {
        if stop.target_norm.is_some_and(|tn| linalg::norm(&w) >= tn) {
            break;
        }
        if stop.target_risk.is_some_and(|tr| r <= tr) {
            break;
        }
        let w2 = linalg::step(&w, eta, &g);
        let r2 = risk(p, &w2);
        let g2 = grad(p, &w2);
        let resid = r2 - r + 0.5 * eta * linalg::dot(&g, &g);
        if !r2.is_finite() || w2.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                step: t,
                what: "risk or iterate".into(),
            });
        }
        if resid > 1e-12 {
            return Err(Error::DescentViolation {
                step: t,
                residual: resid,
            });
        }
        worst = worst.max(resid);
        if on_schedule(t, record_every) {
            records.push(make_record(t, &w, r, &g, resid, true));
        }
        w = w2;
        r = r2;
        g = g2;
        t += 1;
    }
    records.push(make_record(t, &w, r, &g, 0.0, on_schedule(t, record_every)));
    Ok(GdTrace {
        records,
        eta,
        w0: w0.to_vec(),
        worst_descent: worst,
    })
}

fn make_record(t: usize, w: &[f64], r: f64, g: &[f64], resid: f64, stored: bool) -> GdRecord {
    let norm = linalg::norm(w);
    let direction = if norm < 1e-12 {
        None
    } else {
        linalg::normalized(w)
    };
    GdRecord {
        t,
        w: w.to_vec(),
        risk: r,
        grad_norm: linalg::norm(g),
        norm,
        direction,
        descent_residual: resid,
        stored,
    }
}

#[derive(Debug, Clone, Copy)]
pub struct DistanceReport {
    /// Max over consecutive pairs of
    /// `<w' - w, w' + w - 2a> - 2 eta (R(a) - R(w'))`; nonpositive means the
    /// squared-distance inequality held throughout.
    pub max_violation: f64,
    pub pairs_checked: usize,
}

/// Verifies, over every densely recorded consecutive pair, that one step
/// cannot move the iterate further from `anchor` than the risk gap allows.
/// The left side is expanded as `<w' - w, w' + w - 2a>`, which avoids the
/// cancellation of differencing two squared distances.
pub fn check_distance_inequality(
    trace: &GdTrace,
    anchor: &[f64],
    anchor_risk: f64,
) -> DistanceReport {
    let mut max_violation = f64::NEG_INFINITY;
    let mut pairs = 0;
    for pair in trace.records.windows(2) {
        if pair[1].t != pair[0].t + 1 {
            continue;
        }
        let (w, wn) = (&pair[0].w, &pair[1].w);
        let diff = linalg::sub(wn, w);
        let mid: Vec<f64> = wn
            .iter()
            .zip(w)
            .zip(anchor)
            .map(|((&a, &b), &c)| a + b - 2.0 * c)
            .collect();
        let lhs = linalg::dot(&diff, &mid);
        let rhs = 2.0 * trace.eta * (anchor_risk - pair[1].risk);
        max_violation = max_violation.max(lhs - rhs);
        pairs += 1;
    }
    if pairs == 0 {
        max_violation = 0.0;
    }
    DistanceReport {
        max_violation,
        pairs_checked: pairs,
    }
}

/// Trace export: t, risk, grad_norm, norm, dir_0..dir_{d-1},
/// descent_residual. A zero direction is written for near-zero iterates.
pub fn save_trace_csv(trace: &GdTrace, dim: usize, path: &Path) -> Result<()> {
    let mut out = String::from("t,risk,grad_norm,norm");
    for k in 0..dim {
        out.push_str(&format!(",dir_{k}"));
    }
    out.push_str(",descent_residual\n");
    for rec in &trace.records {
        out.push_str(&format!("{},{:?},{:?},{:?}", rec.t, rec.risk, rec.grad_norm, rec.norm));
        match &rec.direction {
            Some(dir) => {
                for v in dir {
                    out.push_str(&format!(",{v:?}"));
                }
            }
            None => {
                for _ in 0..dim {
                    out.push_str(",0.0");
                }
            }
        }
        out.push_str(&format!(",{:?}\n", rec.descent_residual));
    }
    std::fs::write(path, out)?;
    Ok(())
}
