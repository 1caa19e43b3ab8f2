//! The norm-constrained risk minimizer: for each radius B, the point
//! `argmin { R(w) : |w| <= B }`, certified either as interior (gradient
//! norm below tolerance) or as a boundary point where the iterate and the
//! gradient are anti-collinear.
//!
//! All solver arithmetic runs on `log R` and the scaled gradient
//! `grad R / R`, which keep their meaning long after the raw risk has
//! underflowed; the anti-collinearity residual `|w/B + g/|g||` is invariant
//! to the scaling, so certificates need no raw gradient at all.

use crate::error::{Error, Result};
use crate::linalg;
use crate::risk::{self, RiskProblem};
use std::path::Path;

#[derive(Debug, Clone)]
pub struct RegPathPoint {
    pub b: f64,
    pub w_bar: Vec<f64>,
    /// Raw risk value; 0 once it underflows. `log_risk` stays exact.
    pub risk: f64,
    pub log_risk: f64,
    pub boundary: bool,
    /// On the boundary: `|w/B + g/|g||`. Interior: `|grad R|`.
    pub collinearity_residual: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone)]
pub struct RegPath {
    pub points: Vec<RegPathPoint>,
}

fn sphere_residual(w: &[f64], b: f64, g_r: &[f64]) -> f64 {
    let gn = linalg::norm(g_r);
    if gn == 0.0 {
        return 0.0;
    }
    let combined: Vec<f64> = w.iter().zip(g_r).map(|(&wk, &gk)| wk / b + gk / gn).collect();
    linalg::norm(&combined)
}

struct Interior {
    w: Vec<f64>,
    log_r: f64,
    grad_norm: f64,
    iterations: usize,
}

/// Unconstrained descent from the origin on `log R`, accepting steps that
/// lower the risk or (at equal risk) the gradient norm. Succeeds when the
/// absolute gradient norm certifies stationarity; gives up when the iterate
/// wants to leave the ball or the step collapses, both signatures of a
/// boundary optimum.
fn interior_probe(p: &RiskProblem, b: f64, tol: f64, maxit: usize) -> Option<Interior> {
    let mut w = vec![0.0; p.dim()];
    let (mut log_r, mut g_r) = risk::log_risk_scaled_grad(p, &w);
    let mut gn_abs = risk::abs_grad_norm(log_r, &g_r);
    let mut delta = 1.0;
    for it in 0..maxit {
        if gn_abs <= tol {
            return Some(Interior {
                w,
                log_r,
                grad_norm: gn_abs,
                iterations: it,
            });
        }
        let w2 = linalg::step(&w, delta, &g_r);
        if linalg::norm(&w2) > b {
            return None;
        }
        let (log_r2, g_r2) = risk::log_risk_scaled_grad(p, &w2);
        let gn_abs2 = risk::abs_grad_norm(log_r2, &g_r2);
        if log_r2 < log_r - 1e-14 || (log_r2 <= log_r + 1e-14 && gn_abs2 < gn_abs) {
            w = w2;
            log_r = log_r2;
            g_r = g_r2;
            gn_abs = gn_abs2;
            delta *= 1.25;
        } else {
            delta /= 2.0;
            if delta < 1e-28 {
                return None;
            }
        }
    }
    None
}

fn check_radius(b: f64) -> Result<()> {
    if !(b.is_finite() && b > 0.0) {
        return Err(Error::Parameter(format!(
            "constraint radius must be positive and finite, got {b}"
        )));
    }
    Ok(())
}

/// Solves one ball. Cold starts probe the interior first; warm starts go
/// straight to the sphere and fall back to the probe only if the sphere
/// iteration stalls without certifying.
pub fn solve_ball(p: &RiskProblem, b: f64, warm: Option<&[f64]>, tol: f64) -> Result<RegPathPoint> {
    solve_ball_inner(p, b, warm, tol, 1.0).map(|(pt, _)| pt)
}

fn interior_point(b: f64, probe: Interior) -> RegPathPoint {
    RegPathPoint {
        b,
        w_bar: probe.w.clone(),
        risk: probe.log_r.exp(),
        log_risk: probe.log_r,
        boundary: false,
        collinearity_residual: probe.grad_norm,
        iterations: probe.iterations,
    }
}

fn solve_ball_inner(
    p: &RiskProblem,
    b: f64,
    warm: Option<&[f64]>,
    tol: f64,
    delta0: f64,
) -> Result<(RegPathPoint, f64)> {
    check_radius(b)?;
    if !(tol > 0.0) {
        return Err(Error::Parameter(format!("tolerance must be positive, got {tol}")));
    }
    let mut w = match warm {
        Some(v) if linalg::norm(v) >= 1e-12 => linalg::scaled(v, b / linalg::norm(v)),
        _ => {
            if let Some(probe) = interior_probe(p, b, tol, 20_000) {
                return Ok((interior_point(b, probe), delta0));
            }
            let g0 = risk::grad(p, &vec![0.0; p.dim()]);
            let dir = linalg::normalized(&g0).unwrap_or_else(|| {
                let mut e = vec![0.0; p.dim()];
                e[0] = 1.0;
                e
            });
            linalg::scaled(&dir, -b)
        }
    };
    let (mut log_r, mut g_r) = risk::log_risk_scaled_grad(p, &w);
    let mut res = sphere_residual(&w, b, &g_r);
    let mut delta = delta0;
    let mut rejects = 0usize;
    for it in 0..300_000 {
        if res <= tol {
            return Ok((
                RegPathPoint {
                    b,
                    w_bar: w,
                    risk: log_r.exp(),
                    log_risk: log_r,
                    boundary: true,
                    collinearity_residual: res,
                    iterations: it,
                },
                delta,
            ));
        }
        let mut cand = linalg::step(&w, 0.5 * delta, &g_r);
        let cn = linalg::norm(&cand);
        if cn < 1e-300 {
            delta /= 2.0;
            rejects += 1;
        } else {
            cand = linalg::scaled(&cand, b / cn);
            let (log_r2, g_r2) = risk::log_risk_scaled_grad(p, &cand);
            let res2 = sphere_residual(&cand, b, &g_r2);
            if res2 < res {
                w = cand;
                log_r = log_r2;
                g_r = g_r2;
                res = res2;
                delta *= 1.25;
                rejects = 0;
            } else {
                delta /= 2.0;
                rejects += 1;
            }
        }
        if rejects > 200 {
            if let Some(probe) = interior_probe(p, b, tol, 20_000) {
                return Ok((interior_point(b, probe), delta0));
            }
            return Err(Error::Convergence {
                context: format!("sphere step collapse at B={b}"),
                iterations: it,
                residual: res,
            });
        }
    }
    Err(Error::Convergence {
        context: format!("sphere iteration cap at B={b}"),
        iterations: 300_000,
        residual: res,
    })
}

/// Solves the whole path over a strictly increasing radius grid, warm
/// starting each ball from the previous solution rescaled and carrying the
/// adapted step size across radii.
pub fn solve_path(p: &RiskProblem, bs: &[f64], tol: f64) -> Result<RegPath> {
    if bs.is_empty() {
        return Err(Error::Parameter("radius grid is empty".into()));
    }
    for b in bs {
        check_radius(*b)?;
    }
    if bs.windows(2).any(|pair| pair[1] <= pair[0]) {
        return Err(Error::Parameter(format!(
            "radius grid must be strictly increasing, got {bs:?}"
        )));
    }
    let g0 = risk::grad(p, &vec![1e-12; p.dim()]);
    let dir = linalg::normalized(&g0).unwrap_or_else(|| {
        let mut e = vec![0.0; p.dim()];
        e[0] = 1.0;
        e
    });
    let mut warm = linalg::scaled(&dir, -bs[0]);
    let mut delta = 1.0;
    let mut prev_b = bs[0];
    let mut points = Vec::with_capacity(bs.len());
    for &b in bs {
        let delta0 = (delta * (prev_b / b).powi(2)).max(1e-24);
        let (point, delta_out) = solve_ball_inner(p, b, Some(&warm), tol, delta0)?;
        if let Some(prev) = points.last() {
            let prev: &RegPathPoint = prev;
            if point.log_risk > prev.log_risk + 1e-9 {
                return Err(Error::Convergence {
                    context: format!(
                        "path risk increased from B={} to B={b}: {} -> {}",
                        prev.b, prev.log_risk, point.log_risk
                    ),
                    iterations: point.iterations,
                    residual: point.log_risk - prev.log_risk,
                });
            }
        }
        warm = point.w_bar.clone();
        delta = delta_out;
        prev_b = b;
        points.push(point);
    }
    Ok(RegPath { points })
}

#[derive(Debug, Clone)]
pub struct SMinimizer {
    /// Ambient-coordinates minimizer of the spanned-part risk over the
    /// spanned subspace; zero when that subspace is trivial.
    pub v_bar: Vec<f64>,
    pub s_empty: bool,
    pub grad_norm: f64,
    pub iterations: usize,
}

/// Minimizes the spanned-part risk over the spanned subspace by descent in
/// subspace coordinates with Armijo backtracking, from the origin.
pub fn minimize_on_s(p: &RiskProblem) -> Result<SMinimizer> {
    minimize_in_coords(p, None)
}

/// Same, started from the projection of `w_init` onto the subspace.
pub fn minimize_on_s_from(p: &RiskProblem, w_init: &[f64]) -> Result<SMinimizer> {
    minimize_in_coords(p, Some(w_init))
}

fn minimize_in_coords(p: &RiskProblem, w_init: Option<&[f64]>) -> Result<SMinimizer> {
    let dec = p
        .decomposition
        .as_ref()
        .ok_or_else(|| Error::Parameter("minimize_on_s needs a decomposition".into()))?;
    let basis = &dec.basis_s;
    let d = p.dim();
    if basis.is_empty() {
        return Ok(SMinimizer {
            v_bar: vec![0.0; d],
            s_empty: true,
            grad_norm: 0.0,
            iterations: 0,
        });
    }
    let zs: Vec<&[f64]> = dec.sc_indices.iter().map(|&i| p.ds.z(i)).collect();
    let n = p.ds.n() as f64;
    let zb: Vec<Vec<f64>> = zs
        .iter()
        .map(|z| basis.iter().map(|bv| linalg::dot(z, bv)).collect())
        .collect();
    let value = |c: &[f64]| -> f64 {
        zs.iter()
            .zip(&zb)
            .map(|(_, zc)| p.loss.value(linalg::dot(c, zc)))
            .sum::<f64>()
            / n
    };
    let gradient = |c: &[f64]| -> Vec<f64> {
        let mut g = vec![0.0; basis.len()];
        for zc in &zb {
            let dv = p.loss.deriv(linalg::dot(c, zc));
            for (gk, zk) in g.iter_mut().zip(zc) {
                *gk += dv * zk;
            }
        }
        for gk in g.iter_mut() {
            *gk /= n;
        }
        g
    };
    let mut c: Vec<f64> = match w_init {
        Some(w) => basis.iter().map(|bv| linalg::dot(w, bv)).collect(),
        None => vec![0.0; basis.len()],
    };
    let mut f = value(&c);
    let mut step = 1.0;
    for it in 0..1_000_000 {
        let g = gradient(&c);
        let gn = linalg::norm(&g);
        if gn <= 1e-10 {
            let mut v = vec![0.0; d];
            for (ck, bv) in c.iter().zip(basis) {
                for (vk, bk) in v.iter_mut().zip(bv) {
                    *vk += ck * bk;
                }
            }
            return Ok(SMinimizer {
                v_bar: v,
                s_empty: false,
                grad_norm: gn,
                iterations: it,
            });
        }
        loop {
            let c2 = linalg::step(&c, step, &g);
            let f2 = value(&c2);
            if f2 <= f - 0.5 * step * gn * gn {
                c = c2;
                f = f2;
                step *= 1.25;
                break;
            }
            step *= 0.5;
            if step < 1e-300 {
                return Err(Error::Convergence {
                    context: "subspace line search collapsed".into(),
                    iterations: it,
                    residual: gn,
                });
            }
        }
    }
    Err(Error::Convergence {
        context: "subspace minimization cap".into(),
        iterations: 1_000_000,
        residual: f,
    })
}

/// Path export: B, risk, boundary, collinearity_residual, w_0..w_{d-1},
/// dir_0..dir_{d-1}.
pub fn save_path_csv(path_points: &RegPath, dim: usize, file: &Path) -> Result<()> {
    let mut out = String::from("B,risk,boundary,collinearity_residual");
    for k in 0..dim {
        out.push_str(&format!(",w_{k}"));
    }
    for k in 0..dim {
        out.push_str(&format!(",dir_{k}"));
    }
    out.push('\n');
    for pt in &path_points.points {
        out.push_str(&format!(
            "{:?},{:?},{},{:?}",
            pt.b, pt.risk, pt.boundary, pt.collinearity_residual
        ));
        for v in &pt.w_bar {
            out.push_str(&format!(",{v:?}"));
        }
        let nrm = linalg::norm(&pt.w_bar);
        if nrm < 1e-12 {
            for _ in 0..dim {
                out.push_str(",0.0");
            }
        } else {
            for v in &pt.w_bar {
                out.push_str(&format!(",{:?}", v / nrm));
            }
        }
        out.push('\n');
    }
    std::fs::write(file, out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{decompose, Dataset};
    use crate::losses::{make_exponential, make_logistic};

    fn problem(points: Vec<Vec<f64>>, labels: Vec<i8>, loss: crate::losses::Loss) -> RiskProblem {
        let ds = Dataset::new(points, labels).unwrap();
        RiskProblem::new(loss, ds).unwrap()
    }

    #[test]
    fn single_point_path_is_radial_with_closed_form_risk() {
        let p = problem(
            vec![vec![1.0, 0.0]],
            vec![1],
            make_exponential(1.0, 1.0).unwrap(),
        );
        let path = solve_path(&p, &[1.0, 2.0, 4.0, 8.0], 1e-8).unwrap();
        for pt in &path.points {
            assert!(pt.boundary);
            assert!(pt.collinearity_residual <= 1e-8);
            assert!((pt.w_bar[0] - pt.b).abs() < 1e-6 * pt.b);
            assert!(pt.w_bar[1].abs() < 1e-6);
            assert!((pt.log_risk + pt.w_bar[0]).abs() < 1e-9);
        }
    }

    #[test]
    fn antipodal_pair_certifies_the_origin_as_interior() {
        let p = problem(
            vec![vec![1.0, 0.0], vec![1.0, 0.0]],
            vec![1, -1],
            make_logistic(),
        );
        let pt = solve_ball(&p, 2.0, None, 1e-8).unwrap();
        assert!(!pt.boundary);
        assert!(linalg::norm(&pt.w_bar) <= 1e-8);
        assert!((pt.risk - std::f64::consts::LN_2).abs() < 1e-12);

        let path = solve_path(&p, &[1.0, 2.0, 4.0], 1e-8).unwrap();
        assert!(path.points.iter().all(|pt| !pt.boundary));
    }

    #[test]
    fn warm_started_path_matches_cold_solves() {
        let p = problem(
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            vec![1, 1],
            make_logistic(),
        );
        let bs = [1.0, 2.0, 4.0, 8.0, 16.0];
        let path = solve_path(&p, &bs, 1e-8).unwrap();
        for (pt, &b) in path.points.iter().zip(&bs) {
            let cold = solve_ball(&p, b, None, 1e-8).unwrap();
            assert!(linalg::angle(&pt.w_bar, &cold.w_bar) < 1e-6);
            assert!((pt.log_risk - cold.log_risk).abs() < 1e-9);
        }
        for pair in path.points.windows(2) {
            assert!(pair[1].log_risk <= pair[0].log_risk + 1e-12);
        }
    }

    #[test]
    fn boundary_certificate_matches_the_raw_gradient() {
        let p = problem(
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            vec![1, 1],
            make_logistic(),
        );
        let pt = solve_ball(&p, 4.0, None, 1e-8).unwrap();
        assert!(pt.boundary);
        let g = risk::grad(&p, &pt.w_bar);
        let gn = linalg::norm(&g);
        let combined: Vec<f64> = pt
            .w_bar
            .iter()
            .zip(&g)
            .map(|(&wk, &gk)| wk / pt.b + gk / gn)
            .collect();
        let raw_res = linalg::norm(&combined);
        assert!((raw_res - pt.collinearity_residual).abs() < 1e-12);
    }

    #[test]
    fn deep_radii_are_reached_after_raw_risk_underflow() {
        let p = problem(
            vec![vec![1.0, 0.0]],
            vec![1],
            make_exponential(1.0, 1.0).unwrap(),
        );
        let bs: Vec<f64> = (0..12).map(|k| 2f64.powi(k)).collect();
        let path = solve_path(&p, &bs, 1e-8).unwrap();
        let last = path.points.last().unwrap();
        assert_eq!(last.b, 2048.0);
        assert!((last.log_risk + 2048.0).abs() < 1e-6);
        assert!(last.risk == 0.0 || last.risk < 1e-300);
        assert!(linalg::angle(&last.w_bar, &[1.0, 0.0]) < 1e-8);
    }

    #[test]
    fn mixed_dataset_subspace_minimizer_matches_golden_section() {
        let ds = Dataset::new(
            vec![vec![0.5, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]],
            vec![1, -1, 1],
        )
        .unwrap();
        let dec = decompose(&ds, 1e-9).unwrap();
        let p = RiskProblem::with_decomposition(make_logistic(), ds, dec).unwrap();
        let m = minimize_on_s(&p).unwrap();
        assert!(!m.s_empty);
        assert!(m.grad_norm <= 1e-10);
        assert!(m.v_bar[1].abs() < 1e-12);

        let loss = &p.loss;
        let phi = |v: f64| (loss.value(0.5 * v) + loss.value(-v)) / 3.0;
        let (mut lo, mut hi) = (-5.0, 5.0);
        let inv = (5f64.sqrt() - 1.0) / 2.0;
        while hi - lo > 1e-12 {
            let a = hi - inv * (hi - lo);
            let b = lo + inv * (hi - lo);
            if phi(a) < phi(b) {
                hi = b;
            } else {
                lo = a;
            }
        }
        let golden = 0.5 * (lo + hi);
        assert!((golden - (-0.839235217100)).abs() < 1e-8);

        let dphi = |v: f64| 0.5 * loss.deriv(0.5 * v) - loss.deriv(-v);
        let (mut lo, mut hi) = (-0.9, -0.8);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if dphi(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let root = 0.5 * (lo + hi);
        assert!((m.v_bar[0] - root).abs() < 1e-8);
        // a value-based search cannot place the argmin better than
        // sqrt(2 eps f / f'') ~ 5e-8 on this flat bottom
        assert!((m.v_bar[0] - golden).abs() < 5e-8);

        let m2 = minimize_on_s_from(&p, &[0.7, 0.2]).unwrap();
        let m3 = minimize_on_s_from(&p, &[-2.0, 1.0]).unwrap();
        assert!((m2.v_bar[0] - m.v_bar[0]).abs() < 1e-8);
        assert!((m3.v_bar[0] - m.v_bar[0]).abs() < 1e-8);
    }

    #[test]
    fn separable_dataset_has_an_empty_subspace_minimizer() {
        let ds = Dataset::from_signed(vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let dec = decompose(&ds, 1e-9).unwrap();
        let p = RiskProblem::with_decomposition(make_logistic(), ds, dec).unwrap();
        let m = minimize_on_s(&p).unwrap();
        assert!(m.s_empty);
        assert_eq!(m.v_bar, vec![0.0, 0.0]);
        assert_eq!(m.iterations, 0);
    }

    #[test]
    fn bad_grids_and_radii_are_rejected() {
        let p = problem(
            vec![vec![1.0, 0.0]],
            vec![1],
            make_exponential(1.0, 1.0).unwrap(),
        );
        assert!(solve_path(&p, &[], 1e-8).is_err());
        assert!(solve_path(&p, &[1.0, 1.0], 1e-8).is_err());
        assert!(solve_path(&p, &[2.0, 1.0], 1e-8).is_err());
        assert!(solve_path(&p, &[-1.0, 1.0], 1e-8).is_err());
        assert!(solve_ball(&p, 0.0, None, 1e-8).is_err());
        assert!(solve_ball(&p, f64::INFINITY, None, 1e-8).is_err());
        assert!(solve_ball(&p, 1.0, None, 0.0).is_err());
    }

    #[test]
    fn path_csv_has_the_agreed_columns() {
        let p = problem(
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            vec![1, 1],
            make_logistic(),
        );
        let path = solve_path(&p, &[1.0, 2.0], 1e-8).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("path.csv");
        save_path_csv(&path, 2, &file).unwrap();
        let text = std::fs::read_to_string(&file).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "B,risk,boundary,collinearity_residual,w_0,w_1,dir_0,dir_1"
        );
        assert_eq!(lines.count(), 2);
        assert!(text.contains("true"));
    }
}
