//! Small dense vector helpers. Dimensions in this crate are tiny (d <= 10),
//! so everything is plain slices and loops.

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn scaled(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|x| x * s).collect()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// `a - s * b`, the gradient-step workhorse.
pub fn step(a: &[f64], s: f64, b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - s * y).collect()
}

pub fn normalized(a: &[f64]) -> Option<Vec<f64>> {
    let n = norm(a);
    if n < 1e-300 {
        None
    } else {
        Some(scaled(a, 1.0 / n))
    }
}

/// Angle between two nonzero vectors via a clamped arccos; returns 0 when
/// either vector has negligible norm.
pub fn angle(u: &[f64], v: &[f64]) -> f64 {
    let nu = norm(u);
    let nv = norm(v);
    if nu < 1e-300 || nv < 1e-300 {
        return 0.0;
    }
    let c = (dot(u, v) / (nu * nv)).clamp(-1.0, 1.0);
    c.acos()
}

/// Projection of `w` onto the span of an orthonormal basis.
pub fn project_onto_span(w: &[f64], basis: &[Vec<f64>]) -> Vec<f64> {
    let mut out = vec![0.0; w.len()];
    for b in basis {
        let c = dot(w, b);
        for (o, bi) in out.iter_mut().zip(b) {
            *o += c * bi;
        }
    }
    out
}
