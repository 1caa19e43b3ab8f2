#![allow(dead_code)]

use std::f64::consts::PI;

use margin_paths::data::{default_clouds_spec, make_clouds, make_margin_scaling_dataset, Dataset};
use margin_paths::linalg;
use margin_paths::losses::{
    make_exponential, make_figure_poly, make_logistic, make_poly_tail, Loss,
};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn six_losses() -> Vec<(&'static str, Loss)> {
    vec![
        ("exp", make_exponential(1.0, 1.0).unwrap()),
        ("logistic", make_logistic()),
        ("poly-b1", make_poly_tail(1.0, 2.0).unwrap()),
        ("poly-b2", make_poly_tail(1.0, 3.0).unwrap()),
        ("figure-poly-p1", make_figure_poly(1.0).unwrap()),
        ("figure-poly-p2", make_figure_poly(2.0).unwrap()),
    ]
}

pub fn single_point() -> Dataset {
    Dataset::from_signed(vec![vec![1.0, 0.0]]).unwrap()
}

pub fn two_point() -> Dataset {
    Dataset::from_signed(vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap()
}

pub fn mixed_dataset() -> Dataset {
    Dataset::new(
        vec![vec![0.5, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]],
        vec![1, -1, 1],
    )
    .unwrap()
}

/// The five-dataset test matrix; the flag marks the separable ones.
pub fn datasets_matrix() -> Vec<(&'static str, Dataset, bool)> {
    vec![
        ("single", single_point(), true),
        ("two", two_point(), true),
        ("margin-scaling-20", make_margin_scaling_dataset(20).unwrap(), true),
        ("clouds-1", make_clouds(&default_clouds_spec(), 1).unwrap(), true),
        ("mixed", mixed_dataset(), false),
    ]
}

pub fn powers_of_two(hi: i32) -> Vec<f64> {
    (0..=hi).map(|k| 2f64.powi(k)).collect()
}

/// log of the empirical risk via logsumexp, evaluated without the solver's
/// machinery so grid oracles stay independent of it.
pub fn log_risk(loss: &Loss, ds: &Dataset, w: &[f64]) -> f64 {
    let lvs: Vec<f64> = (0..ds.n())
        .map(|i| loss.log_value(linalg::dot(w, ds.z(i))))
        .collect();
    let m = lvs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let s: f64 = lvs.iter().map(|&v| (v - m).exp()).sum();
    m + s.ln() - (ds.n() as f64).ln()
}

fn linspace(lo: f64, hi: f64, m: usize) -> Vec<f64> {
    let step = (hi - lo) / (m - 1) as f64;
    (0..m).map(|k| lo + step * k as f64).collect()
}

/// Brute-force minimizer of the risk over the disk of radius `b` on a polar
/// r x theta grid (the boundary circle is sampled exactly), refined by three
/// zoom rounds of two cells around the best point.
pub fn polar_grid_argmin(loss: &Loss, ds: &Dataset, b: f64) -> (Vec<f64>, f64) {
    let (mut rlo, mut rhi) = (0.0f64, b);
    let (mut tlo, mut thi) = (-PI, PI);
    let mut best_w = vec![0.0, 0.0];
    let mut best_lr = f64::INFINITY;
    for stage in 0..4 {
        let (mr, mt) = if stage == 0 { (801, 2001) } else { (81, 161) };
        let rs = linspace(rlo, rhi, mr);
        let ts = linspace(tlo, thi, mt);
        let mut kr = 0;
        let mut kt = 0;
        let mut lr_best = f64::INFINITY;
        for (ir, &r) in rs.iter().enumerate() {
            for (it, &t) in ts.iter().enumerate() {
                let w = [r * t.cos(), r * t.sin()];
                let lr = log_risk(loss, ds, &w);
                if lr < lr_best {
                    lr_best = lr;
                    kr = ir;
                    kt = it;
                }
            }
        }
        best_w = vec![rs[kr] * ts[kt].cos(), rs[kr] * ts[kt].sin()];
        best_lr = lr_best;
        let dr = rs[1] - rs[0];
        let dt = ts[1] - ts[0];
        rlo = (rs[kr] - 2.0 * dr).max(0.0);
        rhi = (rs[kr] + 2.0 * dr).min(b);
        tlo = ts[kt] - 2.0 * dt;
        thi = ts[kt] + 2.0 * dt;
    }
    (best_w, best_lr)
}

/// Single-pass square-lattice minimizer over the disk of radius `b`,
/// `m` points per axis.
pub fn cartesian_grid_argmin(loss: &Loss, ds: &Dataset, b: f64, m: usize) -> (Vec<f64>, f64) {
    let xs = linspace(-b, b, m);
    let mut best_w = vec![0.0, 0.0];
    let mut best_lr = f64::INFINITY;
    for &x in &xs {
        for &y in &xs {
            if x * x + y * y > b * b {
                continue;
            }
            let lr = log_risk(loss, ds, &[x, y]);
            if lr < best_lr {
                best_lr = lr;
                best_w = vec![x, y];
            }
        }
    }
    (best_w, best_lr)
}

/// Angle between two minimizers, zero when either sits at the origin (the
/// interior case, where direction is meaningless).
pub fn oracle_angle(a: &[f64], b: &[f64]) -> f64 {
    if linalg::norm(a) < 1e-6 || linalg::norm(b) < 1e-6 {
        0.0
    } else {
        linalg::angle(a, b)
    }
}

pub fn golden_section_min(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let inv = (5f64.sqrt() - 1.0) / 2.0;
    while hi - lo > 1e-12 {
        let a = hi - inv * (hi - lo);
        let b = lo + inv * (hi - lo);
        if f(a) < f(b) {
            hi = b;
        } else {
            lo = a;
        }
    }
    0.5 * (lo + hi)
}

/// `m` unit directions: evenly spaced angles in d=2, a Fibonacci sphere in
/// d=3.
pub fn direction_grid(d: usize, m: usize) -> Vec<Vec<f64>> {
    match d {
        2 => (0..m)
            .map(|k| {
                let t = 2.0 * PI * k as f64 / m as f64;
                vec![t.cos(), t.sin()]
            })
            .collect(),
        3 => {
            let golden_angle = PI * (3.0 - 5f64.sqrt());
            (0..m)
                .map(|k| {
                    let y = 1.0 - 2.0 * (k as f64 + 0.5) / m as f64;
                    let r = (1.0 - y * y).max(0.0).sqrt();
                    let t = golden_angle * k as f64;
                    vec![r * t.cos(), y, r * t.sin()]
                })
                .collect()
        }
        _ => panic!("direction grid only covers d = 2 and 3"),
    }
}

/// Random dataset with d in {2,3}, n in 2..=8, coordinates uniform in the
/// unit cube, rescaled into the unit ball, labels uniform.
pub fn random_small_dataset(seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = 2 + (seed % 2) as usize;
    let n = 2 + (rng.gen_range(0..7u32)) as usize;
    let mut xs: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..d).map(|_| rng.gen_range(-1.0..=1.0)).collect())
        .collect();
    let mx = xs.iter().map(|x| linalg::norm(x)).fold(1.0, f64::max);
    for x in &mut xs {
        for v in x.iter_mut() {
            *v /= mx;
        }
    }
    let ys = (0..n).map(|_| if rng.gen_bool(0.5) { 1 } else { -1 }).collect();
    Dataset::new(xs, ys).unwrap()
}

/// Worst central-difference relative error of the derivative over random
/// probes in `[lo, hi]`, skipping a guard band around the joints where the
/// second derivative jumps.
pub fn fd_worst_rel_err(loss: &Loss, probes: usize, seed: u64, lo: f64, hi: f64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    let mut done = 0;
    while done < probes {
        let z = rng.gen_range(lo..hi);
        let h = 6e-6 * z.abs().max(1.0);
        if loss.breakpoints.iter().any(|&bp| (z - bp).abs() < 50.0 * h) {
            continue;
        }
        let fd = (loss.value(z + h) - loss.value(z - h)) / (2.0 * h);
        let d = loss.deriv(z);
        worst = worst.max((fd - d).abs() / d.abs().max(1e-300));
        done += 1;
    }
    worst
}
