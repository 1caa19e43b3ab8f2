//! Minimum-norm point of the signed-point hull, which is dual to the
//! maximum-margin direction: whenever the hull avoids the origin, the
//! min-norm point p* gives u_hat = p*/|p*| and gamma_hat = |p*|, and the
//! hull weights q certify it.

use super::Dataset;
use crate::error::{Error, Result};
use crate::linalg;

#[derive(Debug, Clone)]
pub struct MaxMargin {
    pub u_hat: Vec<f64>,
    pub gamma_hat: f64,
    /// Simplex weights q with p* = sum q_i z_i.
    pub certificate: Vec<f64>,
    pub duality_gap: f64,
    pub separable: bool,
    pub iterations: usize,
}

/// Frank-Wolfe with away steps on the hull of the signed points, exact line
/// search each step. Terminates when the Wolfe gap certifies the margin to
/// within `tol`, or when the min-norm point is within `tol` of the origin
/// (nonseparable case, where gamma_hat becomes the best margin found).
pub fn max_margin(ds: &Dataset, tol: f64) -> Result<MaxMargin> {
    let zs = ds.signed();
    let n = zs.len();
    let maxit = 1_000_000;

    let mut q = vec![0.0; n];
    let start = (0..n)
        .min_by(|&a, &b| {
            linalg::dot(&zs[a], &zs[a])
                .partial_cmp(&linalg::dot(&zs[b], &zs[b]))
                .unwrap()
        })
        .unwrap();
    q[start] = 1.0;

    let mut last_gap = f64::INFINITY;
    for it in 0..maxit {
        let mut p = vec![0.0; ds.dim()];
        for (qi, z) in q.iter().zip(zs) {
            for (pk, zk) in p.iter_mut().zip(z) {
                *pk += qi * zk;
            }
        }
        let g: Vec<f64> = zs.iter().map(|z| linalg::dot(z, &p)).collect();
        let pp = linalg::dot(&p, &p);
        let s = (0..n)
            .min_by(|&a, &b| g[a].partial_cmp(&g[b]).unwrap())
            .unwrap();
        let nrm = pp.max(0.0).sqrt();
        let fw_gap = pp - g[s];
        last_gap = fw_gap;
        if nrm > tol && fw_gap <= tol * nrm {
            return Ok(MaxMargin {
                u_hat: linalg::scaled(&p, 1.0 / nrm),
                gamma_hat: nrm,
                certificate: q,
                duality_gap: fw_gap / nrm.max(1e-300),
                separable: true,
                iterations: it,
            });
        }
        if fw_gap <= 0.5 * tol * tol && nrm <= tol {
            let u = linalg::scaled(&p, 1.0 / nrm.max(1e-300));
            let best = zs
                .iter()
                .map(|z| linalg::dot(&u, z))
                .fold(f64::INFINITY, f64::min);
            return Ok(MaxMargin {
                u_hat: u,
                gamma_hat: best,
                certificate: q,
                duality_gap: fw_gap,
                separable: false,
                iterations: it,
            });
        }
        let vidx = (0..n)
            .filter(|&i| q[i] > 0.0)
            .max_by(|&a, &b| g[a].partial_cmp(&g[b]).unwrap())
            .unwrap();
        let away_gap = g[vidx] - pp;
        if fw_gap >= away_gap {
            let dvec = linalg::sub(&zs[s], &p);
            let dd = linalg::dot(&dvec, &dvec);
            let step = if dd > 0.0 {
                (-linalg::dot(&p, &dvec) / dd).clamp(0.0, 1.0)
            } else {
                0.0
            };
            for qi in q.iter_mut() {
                *qi *= 1.0 - step;
            }
            q[s] += step;
        } else {
            let dvec = linalg::sub(&p, &zs[vidx]);
            let dd = linalg::dot(&dvec, &dvec);
            let gmax = if q[vidx] < 1.0 {
                q[vidx] / (1.0 - q[vidx])
            } else {
                1e18
            };
            let step = if dd > 0.0 {
                (-linalg::dot(&p, &dvec) / dd).clamp(0.0, gmax)
            } else {
                0.0
            };
            for qi in q.iter_mut() {
                *qi *= 1.0 + step;
            }
            q[vidx] -= step;
            q[vidx] = q[vidx].max(0.0);
        }
    }
    Err(Error::Convergence {
        context: "max-margin hull iteration".into(),
        iterations: maxit,
        residual: last_gap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{make_margin_scaling_dataset, margin};

    #[test]
    fn single_point_hull_is_the_point_itself() {
        let ds = Dataset::from_signed(vec![vec![1.0, 0.0]]).unwrap();
        let mm = max_margin(&ds, 1e-10).unwrap();
        assert!(mm.separable);
        assert!((mm.gamma_hat - 1.0).abs() < 1e-12);
        assert!((mm.u_hat[0] - 1.0).abs() < 1e-12 && mm.u_hat[1].abs() < 1e-12);
        assert!((mm.certificate[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn orthogonal_pair_splits_the_angle() {
        let ds = Dataset::from_signed(vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let mm = max_margin(&ds, 1e-10).unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert!((mm.gamma_hat - r).abs() < 1e-9);
        assert!((mm.u_hat[0] - r).abs() < 1e-8 && (mm.u_hat[1] - r).abs() < 1e-8);
        assert!(mm.duality_gap <= 1e-10);
    }

    #[test]
    fn margin_scaling_gamma_is_independent_of_n() {
        let mut gammas = Vec::new();
        for n in [2, 20, 100] {
            let ds = make_margin_scaling_dataset(n).unwrap();
            let mm = max_margin(&ds, 1e-10).unwrap();
            assert!((mm.gamma_hat - 0.135980020730).abs() < 1e-9, "n={n}: {}", mm.gamma_hat);
            assert!((mm.u_hat[0] - 0.874157).abs() < 1e-5);
            assert!((mm.u_hat[1] - 0.485643).abs() < 1e-5);
            gammas.push(mm.gamma_hat);
        }
        assert!((gammas[0] - gammas[2]).abs() < 1e-12);
    }

    #[test]
    fn duality_invariants_hold_on_separable_data() {
        let ds = make_margin_scaling_dataset(7).unwrap();
        let mm = max_margin(&ds, 1e-10).unwrap();
        assert!((linalg::norm(&mm.u_hat) - 1.0).abs() < 1e-10);
        let qsum: f64 = mm.certificate.iter().sum();
        assert!((qsum - 1.0).abs() < 1e-10);
        let worst = margin(&mm.u_hat, &ds).unwrap();
        assert!((mm.gamma_hat - worst).abs() <= mm.duality_gap + 1e-15);
    }

    #[test]
    fn antipodal_points_are_reported_nonseparable() {
        let ds = Dataset::new(vec![vec![1.0, 0.0], vec![1.0, 0.0]], vec![1, -1]).unwrap();
        let mm = max_margin(&ds, 1e-10).unwrap();
        assert!(!mm.separable);
        assert!(mm.gamma_hat <= 1e-10);
    }

    #[test]
    fn permuting_points_does_not_move_the_direction() {
        let ds = make_margin_scaling_dataset(6).unwrap();
        let mm = max_margin(&ds, 1e-10).unwrap();
        let mut rev: Vec<Vec<f64>> = (0..6).rev().map(|i| ds.x(i).to_vec()).collect();
        rev[0][0] += 0.0;
        let ds2 = Dataset::new(rev, vec![1; 6]).unwrap();
        let mm2 = max_margin(&ds2, 1e-10).unwrap();
        assert!(linalg::angle(&mm.u_hat, &mm2.u_hat) < 1e-6);
    }
}
