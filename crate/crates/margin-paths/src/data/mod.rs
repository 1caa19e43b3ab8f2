//! Datasets of labeled points, the maximum-margin problem, and the
//! decomposition into a spanned part and a separable complement.

mod decompose;
mod lp;
mod maxmargin;

pub use decompose::{decompose, Decomposition, Separator};
pub use maxmargin::{max_margin, MaxMargin};

use crate::error::{Error, Result};
use crate::linalg;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::path::Path;

/// Labeled points with cached signed points `z_i = y_i x_i`, all inside the
/// unit ball.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    xs: Vec<Vec<f64>>,
    ys: Vec<i8>,
    signed: Vec<Vec<f64>>,
}

impl Dataset {
    pub fn new(xs: Vec<Vec<f64>>, ys: Vec<i8>) -> Result<Self> {
        if xs.is_empty() {
            return Err(Error::Dataset("dataset needs at least one point".into()));
        }
        if xs.len() != ys.len() {
            return Err(Error::Dataset(format!(
                "{} points but {} labels",
                xs.len(),
                ys.len()
            )));
        }
        let d = xs[0].len();
        if d == 0 {
            return Err(Error::Dataset("points need at least one feature".into()));
        }
        for (i, x) in xs.iter().enumerate() {
            if x.len() != d {
                return Err(Error::Dataset(format!(
                    "point {i} has dimension {} but point 0 has {d}",
                    x.len()
                )));
            }
            let nrm = linalg::norm(x);
            if !(nrm <= 1.0 + 1e-12) {
                return Err(Error::Dataset(format!(
                    "point {i} has norm {nrm:.6} > 1; rescale the dataset first"
                )));
            }
        }
        for (i, &y) in ys.iter().enumerate() {
            if y != 1 && y != -1 {
                return Err(Error::Dataset(format!("label {y} at row {i} is not +1/-1")));
            }
        }
        let signed = xs
            .iter()
            .zip(&ys)
            .map(|(x, &y)| x.iter().map(|&v| f64::from(y) * v).collect())
            .collect();
        Ok(Dataset { xs, ys, signed })
    }

    /// Builds a dataset directly from signed points (all labels +1).
    pub fn from_signed(zs: Vec<Vec<f64>>) -> Result<Self> {
        let ys = vec![1; zs.len()];
        Dataset::new(zs, ys)
    }

    pub fn n(&self) -> usize {
        self.xs.len()
    }

    pub fn dim(&self) -> usize {
        self.xs[0].len()
    }

    pub fn x(&self, i: usize) -> &[f64] {
        &self.xs[i]
    }

    pub fn y(&self, i: usize) -> i8 {
        self.ys[i]
    }

    pub fn z(&self, i: usize) -> &[f64] {
        &self.signed[i]
    }

    pub fn signed(&self) -> &[Vec<f64>] {
        &self.signed
    }
}

/// Smallest inner product `<u, z_i>` over the dataset, for unit u.
pub fn margin(u: &[f64], ds: &Dataset) -> Result<f64> {
    let nrm = linalg::norm(u);
    if (nrm - 1.0).abs() > 1e-8 {
        return Err(Error::Parameter(format!(
            "margin needs a unit direction, got norm {nrm}"
        )));
    }
    Ok(ds
        .signed()
        .iter()
        .map(|z| linalg::dot(u, z))
        .fold(f64::INFINITY, f64::min))
}

/// Margin restricted to a subset of point indices.
pub fn margin_on(u: &[f64], ds: &Dataset, indices: &[usize]) -> Result<f64> {
    let nrm = linalg::norm(u);
    if (nrm - 1.0).abs() > 1e-8 {
        return Err(Error::Parameter(format!(
            "margin needs a unit direction, got norm {nrm}"
        )));
    }
    Ok(indices
        .iter()
        .map(|&i| linalg::dot(u, ds.z(i)))
        .fold(f64::INFINITY, f64::min))
}

/// Reads `d` feature columns followed by a +1/-1 label column. With
/// `normalize`, the whole dataset is rescaled by 1/max norm when any point
/// leaves the unit ball; otherwise such points are an error.
pub fn load_csv(path: &Path, normalize: bool) -> Result<Dataset> {
    let text = std::fs::read_to_string(path)?;
    let mut xs: Vec<Vec<f64>> = Vec::new();
    let mut ys: Vec<i8> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() < 2 {
            return Err(Error::Dataset(format!(
                "line {}: need at least one feature and a label",
                lineno + 1
            )));
        }
        let mut row = Vec::with_capacity(fields.len() - 1);
        for f in &fields[..fields.len() - 1] {
            row.push(f.parse::<f64>().map_err(|_| {
                Error::Dataset(format!("line {}: bad number {f:?}", lineno + 1))
            })?);
        }
        let label: f64 = fields[fields.len() - 1].parse().map_err(|_| {
            Error::Dataset(format!(
                "line {}: bad label {:?}",
                lineno + 1,
                fields[fields.len() - 1]
            ))
        })?;
        let y = if label == 1.0 {
            1
        } else if label == -1.0 {
            -1
        } else {
            return Err(Error::Dataset(format!(
                "line {}: label must be +1 or -1, got {label}",
                lineno + 1
            )));
        };
        if !xs.is_empty() && row.len() != xs[0].len() {
            return Err(Error::Dataset(format!(
                "line {}: ragged row ({} features, expected {})",
                lineno + 1,
                row.len(),
                xs[0].len()
            )));
        }
        xs.push(row);
        ys.push(y);
    }
    if xs.is_empty() {
        return Err(Error::Dataset("empty dataset file".into()));
    }
    if normalize {
        let mx = xs.iter().map(|x| linalg::norm(x)).fold(0.0, f64::max);
        if mx > 1.0 {
            for x in &mut xs {
                for v in x.iter_mut() {
                    *v /= mx;
                }
            }
        }
    }
    Dataset::new(xs, ys)
}

pub fn save_csv(ds: &Dataset, path: &Path) -> Result<()> {
    let mut out = String::new();
    for i in 0..ds.n() {
        for v in ds.x(i) {
            out.push_str(&format!("{v:?},"));
        }
        out.push_str(&format!("{}\n", ds.y(i)));
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// The two-cluster dataset whose maximum margin is the same universal
/// constant for every n: n-1 copies of (0.1, 0.1) and one (0.6, -0.8), all
/// labeled +1.
pub fn make_margin_scaling_dataset(n: usize) -> Result<Dataset> {
    if n < 2 {
        return Err(Error::Parameter(format!(
            "margin-scaling dataset needs n >= 2, got {n}"
        )));
    }
    let mut xs = vec![vec![0.1, 0.1]; n - 1];
    xs.push(vec![0.6, -0.8]);
    Dataset::new(xs, vec![1; n])
}

#[derive(Debug, Clone)]
pub struct CloudSpec {
    pub center: Vec<f64>,
    pub radius: f64,
    pub count: usize,
    pub label: i8,
}

/// One negative and two positive clouds, the qualitative-figure layout.
pub fn default_clouds_spec() -> Vec<CloudSpec> {
    vec![
        CloudSpec {
            center: vec![-0.7, 0.0],
            radius: 0.15,
            count: 10,
            label: -1,
        },
        CloudSpec {
            center: vec![0.7, 0.0],
            radius: 0.15,
            count: 10,
            label: 1,
        },
        CloudSpec {
            center: vec![0.35, 0.8],
            radius: 0.15,
            count: 5,
            label: 1,
        },
    ]
}

/// Samples each cloud uniformly from a ball of the given radius around its
/// center (rejection sampling), deterministically in the seed. If any point
/// leaves the unit ball the whole dataset is rescaled by 1/max norm.
pub fn make_clouds(spec: &[CloudSpec], seed: u64) -> Result<Dataset> {
    if spec.is_empty() {
        return Err(Error::Dataset("cloud spec is empty".into()));
    }
    let d = spec[0].center.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for cloud in spec {
        if cloud.center.len() != d {
            return Err(Error::Dataset("cloud centers disagree on dimension".into()));
        }
        if cloud.label != 1 && cloud.label != -1 {
            return Err(Error::Dataset(format!("cloud label {} is not +1/-1", cloud.label)));
        }
        for _ in 0..cloud.count {
            let u = loop {
                let u: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..=1.0)).collect();
                if linalg::dot(&u, &u) <= 1.0 {
                    break u;
                }
            };
            let x: Vec<f64> = cloud
                .center
                .iter()
                .zip(&u)
                .map(|(&c, &ui)| c + cloud.radius * ui)
                .collect();
            xs.push(x);
            ys.push(cloud.label);
        }
    }
    let mx = xs.iter().map(|x| linalg::norm(x)).fold(0.0, f64::max);
    if mx > 1.0 {
        for x in &mut xs {
            for v in x.iter_mut() {
                *v /= mx;
            }
        }
    }
    Dataset::new(xs, ys)
}
