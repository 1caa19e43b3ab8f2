//! Partition of a dataset into the spanned part D_s (points no direction can
//! strictly separate while keeping every other point nonnegative) and its
//! complement D_c, plus the structures both sides carry: an orthonormal
//! basis of S = span{x_i : i in D_s} and a separator for D_c inside the
//! orthogonal complement of S.

use super::lp;
use super::maxmargin::max_margin;
use super::Dataset;
use crate::error::{Error, Result};
use crate::linalg;

#[derive(Debug, Clone)]
pub struct Separator {
    /// Unit vector in the orthogonal complement of S.
    pub u: Vec<f64>,
    pub gamma: f64,
}

#[derive(Debug, Clone)]
pub struct Decomposition {
    pub sc_indices: Vec<usize>,
    pub comp_indices: Vec<usize>,
    /// Orthonormal basis of S, one row per basis vector.
    pub basis_s: Vec<Vec<f64>>,
    pub separator: Option<Separator>,
    /// Minimizer of the spanned part's risk over S; computed by the risk
    /// layer, absent until then.
    pub v_bar: Option<Vec<f64>>,
    /// Optimal strict-separation value per point, as decided by the LP.
    pub deltas: Vec<f64>,
}

impl Decomposition {
    pub fn to_json(&self) -> String {
        let sep = match &self.separator {
            Some(s) => serde_json::json!({ "u": s.u, "gamma": s.gamma }),
            None => serde_json::Value::Null,
        };
        let doc = serde_json::json!({
            "sc_indices": self.sc_indices,
            "comp_indices": self.comp_indices,
            "basis_S": self.basis_s,
            "separator": sep,
        });
        serde_json::to_string_pretty(&doc).expect("decomposition serialization cannot fail")
    }
}

/// Optimal value of: max delta subject to <u, z_i> >= delta,
/// <u, z_j> >= 0 for all j, |u|_inf <= 1, delta >= 0. Strictly positive
/// exactly when some direction separates point i strictly while keeping the
/// rest nonnegative.
pub(crate) fn separation_value(ds: &Dataset, i: usize) -> Result<f64> {
    let d = ds.dim();
    let n = ds.n();
    let nv = 2 * d + 1;
    let mut c = vec![0.0; nv];
    c[2 * d] = 1.0;

    let mut a: Vec<Vec<f64>> = Vec::with_capacity(1 + n + 2 * d);
    let mut b = Vec::with_capacity(1 + n + 2 * d);

    let mut row = vec![0.0; nv];
    for k in 0..d {
        row[k] = -ds.z(i)[k];
        row[d + k] = ds.z(i)[k];
    }
    row[2 * d] = 1.0;
    a.push(row);
    b.push(0.0);

    for j in 0..n {
        let mut row = vec![0.0; nv];
        for k in 0..d {
            row[k] = -ds.z(j)[k];
            row[d + k] = ds.z(j)[k];
        }
        a.push(row);
        b.push(0.0);
    }
    for k in 0..2 * d {
        let mut row = vec![0.0; nv];
        row[k] = 1.0;
        a.push(row);
        b.push(1.0);
    }

    lp::maximize(&c, &a, &b, 100_000).map_err(|reason| Error::Lp { index: i, reason })
}

fn gram_schmidt(vectors: &[&[f64]], rank_tol: f64) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for v in vectors {
        let mut w = v.to_vec();
        for b in &basis {
            let proj = linalg::dot(&w, b);
            for (wk, bk) in w.iter_mut().zip(b) {
                *wk -= proj * bk;
            }
        }
        let nrm = linalg::norm(&w);
        if nrm > rank_tol {
            basis.push(linalg::scaled(&w, 1.0 / nrm));
        }
    }
    basis
}

/// Decides membership per point by the separation LP (ties below `tol` go to
/// D_s), orthonormalizes D_s into a basis of S, and separates the projected
/// D_c points inside the complement of S.
pub fn decompose(ds: &Dataset, tol: f64) -> Result<Decomposition> {
    let mut deltas = Vec::with_capacity(ds.n());
    let mut sc_indices = Vec::new();
    let mut comp_indices = Vec::new();
    for i in 0..ds.n() {
        let delta = separation_value(ds, i)?;
        if delta > tol {
            comp_indices.push(i);
        } else {
            sc_indices.push(i);
        }
        deltas.push(delta);
    }

    let spanned: Vec<&[f64]> = sc_indices.iter().map(|&i| ds.x(i)).collect();
    let basis_s = gram_schmidt(&spanned, 1e-10);

    let separator = if comp_indices.is_empty() {
        None
    } else {
        let projected: Vec<Vec<f64>> = comp_indices
            .iter()
            .map(|&i| {
                let z = ds.z(i);
                let on_s = linalg::project_onto_span(z, &basis_s);
                linalg::sub(z, &on_s)
            })
            .collect();
        let proj_ds = Dataset::from_signed(projected)?;
        let mm = max_margin(&proj_ds, 1e-10)?;
        Some(Separator {
            u: mm.u_hat,
            gamma: mm.gamma_hat,
        })
    };

    Ok(Decomposition {
        sc_indices,
        comp_indices,
        basis_s,
        separator,
        v_bar: None,
        deltas,
    })
}
