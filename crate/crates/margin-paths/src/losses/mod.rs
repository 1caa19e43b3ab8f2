//! Convex, strictly decreasing scalar losses.
//!
//! Every loss is a piecewise-analytic function given by an ordered segment
//! table. Each piece knows its value and derivative in both plain and log
//! form; the log forms stay exact far out in the tail where the raw values
//! underflow, which the regularization-path solver depends on.

mod json;
mod oscillate;
mod splice;

pub use oscillate::{build_oscillating, DatasetConstants, Oscillating};
pub use splice::{splice_exp_to_recip, splice_recip_to_exp, BridgeSegment, SpliceResult};

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Floor used when taking logs of piece values that can underflow to zero.
const LOG_FLOOR: f64 = 1e-300;

/// One closed-form piece of a loss.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "piece", content = "params", rename_all = "kebab-case")]
pub enum Piece {
    /// `a * exp(-b z)`
    Exponential { a: f64, b: f64 },
    /// `a * z^(-p)`, meaningful for z > 0
    Power { a: f64, p: f64 },
    /// `a * (z - z0)^(-p)`
    ShiftedPower { a: f64, p: f64, z0: f64 },
    /// `c0 + c1 z`
    Affine { c0: f64, c1: f64 },
    /// `c0 + c1 (z - z0) + c2 (z - z0)^2`, anchored so that splice bridges at
    /// large z keep full precision
    Quadratic { z0: f64, c0: f64, c1: f64, c2: f64 },
    /// `(a / (b - 1)) * z^(-(b-1))`, the primitive of `a z^(-b)`
    RecipPrimitive { a: f64, b: f64 },
    /// `ln(1 + exp(-z))`
    Logistic,
    /// Affine piece stored in log form: value `exp(lv1) + exp(lns) * (z1 - z)`.
    /// Used where the slope magnitude underflows f64.
    LogAffine { z1: f64, lv1: f64, lns: f64 },
}

impl Piece {
    pub fn value(&self, z: f64) -> f64 {
        match *self {
            Piece::Exponential { a, b } => a * (-b * z).exp(),
            Piece::Power { a, p } => a * z.powf(-p),
            Piece::ShiftedPower { a, p, z0 } => a * (z - z0).powf(-p),
            Piece::Affine { c0, c1 } => c0 + c1 * z,
            Piece::Quadratic { z0, c0, c1, c2 } => {
                let t = z - z0;
                (c2 * t + c1) * t + c0
            }
            Piece::RecipPrimitive { a, b } => a / (b - 1.0) * z.powf(-(b - 1.0)),
            Piece::Logistic => {
                if z >= 0.0 {
                    (-z).exp().ln_1p()
                } else {
                    -z + z.exp().ln_1p()
                }
            }
            Piece::LogAffine { z1, lv1, lns } => lv1.exp() + lns.exp() * (z1 - z),
        }
    }

    pub fn deriv(&self, z: f64) -> f64 {
        match *self {
            Piece::Exponential { a, b } => -a * b * (-b * z).exp(),
            Piece::Power { a, p } => -a * p * z.powf(-p - 1.0),
            Piece::ShiftedPower { a, p, z0 } => -a * p * (z - z0).powf(-p - 1.0),
            Piece::Affine { c1, .. } => c1,
            Piece::Quadratic { z0, c1, c2, .. } => c1 + 2.0 * c2 * (z - z0),
            Piece::RecipPrimitive { a, b } => -a * z.powf(-b),
            Piece::Logistic => {
                if z >= 0.0 {
                    let e = (-z).exp();
                    -e / (1.0 + e)
                } else {
                    -1.0 / (1.0 + z.exp())
                }
            }
            Piece::LogAffine { lns, .. } => -lns.exp(),
        }
    }

    /// `ln l(z)`, exact in regimes where `value` underflows.
    pub fn log_value(&self, z: f64) -> f64 {
        match *self {
            Piece::Exponential { a, b } => a.ln() - b * z,
            Piece::Power { a, p } => a.ln() - p * z.ln(),
            Piece::ShiftedPower { a, p, z0 } => a.ln() - p * (z - z0).ln(),
            Piece::Affine { .. } | Piece::Quadratic { .. } => self.value(z).max(LOG_FLOOR).ln(),
            Piece::RecipPrimitive { a, b } => (a / (b - 1.0)).ln() - (b - 1.0) * z.ln(),
            Piece::Logistic => {
                if z > 30.0 {
                    -z + (-(-z).exp() / 2.0).ln_1p()
                } else {
                    self.value(z).ln()
                }
            }
            Piece::LogAffine { z1, lv1, lns } => {
                if z1 - z <= 0.0 {
                    lv1
                } else {
                    let other = lns + (z1 - z).ln();
                    let m = lv1.max(other);
                    m + ((lv1 - m).exp() + (other - m).exp()).ln()
                }
            }
        }
    }

    /// `ln(-l'(z))`, floored where the slope magnitude underflows.
    pub fn log_neg_deriv(&self, z: f64) -> f64 {
        match *self {
            Piece::Exponential { a, b } => (a * b).ln() - b * z,
            Piece::Power { a, p } => (a * p).ln() - (p + 1.0) * z.ln(),
            Piece::ShiftedPower { a, p, z0 } => (a * p).ln() - (p + 1.0) * (z - z0).ln(),
            Piece::Affine { .. } | Piece::Quadratic { .. } => {
                (-self.deriv(z)).max(LOG_FLOOR).ln()
            }
            Piece::RecipPrimitive { a, b } => a.ln() - b * z.ln(),
            Piece::Logistic => {
                if z >= 0.0 {
                    -(z + (-z).exp().ln_1p())
                } else {
                    -z.exp().ln_1p()
                }
            }
            Piece::LogAffine { lns, .. } => lns,
        }
    }
}

/// Tail behavior as z grows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Tail {
    /// `l(z) / (a exp(-b z)) -> 1`
    Exponential { a: f64, b: f64 },
    /// `-l'(z) / (a z^(-b)) -> 1`
    Polynomial { a: f64, b: f64 },
    Composite,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub lo: f64,
    pub hi: f64,
    pub piece: Piece,
}

/// Which constructor produced a loss; composites serialize their full
/// segment table, built-ins just their parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LossKind {
    Exponential { a: f64, b: f64 },
    Logistic,
    PolyTail { a: f64, b: f64 },
    FigurePoly { p: f64 },
    Composite,
}

/// A piecewise convex loss, strictly decreasing to 0.
///
/// `breakpoints` are the interior joints, strictly increasing; segment `i`
/// covers `[breakpoints[i-1], breakpoints[i])`. Evaluation at a breakpoint
/// uses the segment to its right. `smoothness` is a certified global
/// Lipschitz constant of the derivative, `f64::INFINITY` when no global
/// bound exists (exponential left tails).
#[derive(Debug, Clone, PartialEq)]
pub struct Loss {
    pub name: String,
    pub kind: LossKind,
    pub segments: Vec<Segment>,
    pub breakpoints: Vec<f64>,
    pub smoothness: f64,
    pub tail: Tail,
}

impl Loss {
    pub(crate) fn from_segments(
        name: impl Into<String>,
        kind: LossKind,
        segments: Vec<Segment>,
        smoothness: f64,
        tail: Tail,
    ) -> Self {
        let breakpoints = segments[..segments.len() - 1].iter().map(|s| s.hi).collect();
        Loss {
            name: name.into(),
            kind,
            segments,
            breakpoints,
            smoothness,
            tail,
        }
    }

    fn piece_at(&self, z: f64) -> &Piece {
        let idx = self.breakpoints.partition_point(|&b| b <= z);
        &self.segments[idx].piece
    }

    pub fn value(&self, z: f64) -> f64 {
        self.piece_at(z).value(z)
    }

    pub fn deriv(&self, z: f64) -> f64 {
        self.piece_at(z).deriv(z)
    }

    pub fn log_value(&self, z: f64) -> f64 {
        self.piece_at(z).log_value(z)
    }

    pub fn log_neg_deriv(&self, z: f64) -> f64 {
        self.piece_at(z).log_neg_deriv(z)
    }

    /// Lipschitz bound on the derivative over `[z_min, inf)`. For losses with
    /// a finite global constant this is just `smoothness`; for exponential
    /// pieces the bound decays with `z_min`.
    pub fn smoothness_on(&self, z_min: f64) -> f64 {
        let mut beta: f64 = 0.0;
        for seg in &self.segments {
            if seg.hi <= z_min {
                continue;
            }
            let lo = seg.lo.max(z_min);
            let local = match seg.piece {
                Piece::Exponential { a, b } => a * b * b * (-b * lo).exp(),
                Piece::Power { a, p } => a * p * (p + 1.0) * lo.powf(-p - 2.0),
                Piece::ShiftedPower { a, p, z0 } => a * p * (p + 1.0) * (lo - z0).powf(-p - 2.0),
                Piece::Affine { .. } => 0.0,
                Piece::Quadratic { c2, .. } => 2.0 * c2.abs(),
                Piece::RecipPrimitive { a, b } => a * b * lo.powf(-b - 1.0),
                Piece::Logistic => 0.25,
                Piece::LogAffine { .. } => 0.0,
            };
            beta = beta.max(local);
        }
        beta
    }

    pub fn to_json(&self) -> String {
        json::to_json(self)
    }

    pub fn from_json(text: &str) -> Result<Loss> {
        json::from_json(text)
    }
}

/// `a * exp(-b z)` on all of R.
///
/// The derivative's Lipschitz constant is unbounded globally, so
/// `smoothness` is infinite; `smoothness_on` gives the bound on `[z_min, inf)`.
pub fn make_exponential(a: f64, b: f64) -> Result<Loss> {
    if !(a > 0.0) || !(b > 0.0) {
        return Err(Error::Parameter(format!(
            "exponential loss needs a > 0 and b > 0, got a={a}, b={b}"
        )));
    }
    Ok(Loss::from_segments(
        format!("exp({a},{b})"),
        LossKind::Exponential { a, b },
        vec![Segment {
            lo: f64::NEG_INFINITY,
            hi: f64::INFINITY,
            piece: Piece::Exponential { a, b },
        }],
        f64::INFINITY,
        Tail::Exponential { a, b },
    ))
}

/// `ln(1 + exp(-z))`, overflow-safe on both sides.
pub fn make_logistic() -> Loss {
    Loss::from_segments(
        "logistic",
        LossKind::Logistic,
        vec![Segment {
            lo: f64::NEG_INFINITY,
            hi: f64::INFINITY,
            piece: Piece::Logistic,
        }],
        0.25,
        Tail::Exponential { a: 1.0, b: 1.0 },
    )
}

/// The polynomially-tailed loss with `-l'(z) = a z^(-b)` for z >= 1:
/// `(a/(b-1)) z^(-(b-1))` on `[1, inf)`, extended by its tangent line
/// `-a z + a b/(b-1)` below 1. Continuous and C1 at the joint.
pub fn make_poly_tail(a: f64, b: f64) -> Result<Loss> {
    if !(a > 0.0) {
        return Err(Error::Parameter(format!("poly tail needs a > 0, got a={a}")));
    }
    if !(b > 1.0) {
        return Err(Error::Parameter(format!(
            "poly tail needs b > 1 (the value integral diverges otherwise), got b={b}"
        )));
    }
    Ok(Loss::from_segments(
        format!("poly-tail({a},{b})"),
        LossKind::PolyTail { a, b },
        vec![
            Segment {
                lo: f64::NEG_INFINITY,
                hi: 1.0,
                piece: Piece::Affine {
                    c0: a * b / (b - 1.0),
                    c1: -a,
                },
            },
            Segment {
                lo: 1.0,
                hi: f64::INFINITY,
                piece: Piece::RecipPrimitive { a, b },
            },
        ],
        a * b,
        Tail::Polynomial { a, b },
    ))
}

/// `(1+z)^(-p)` for z >= 0 with the unique quadratic extension below 0 that
/// matches value, first, and second derivative at the joint.
pub fn make_figure_poly(p: f64) -> Result<Loss> {
    if !(p > 0.0) {
        return Err(Error::Parameter(format!("figure poly needs p > 0, got p={p}")));
    }
    Ok(Loss::from_segments(
        format!("figure-poly({p})"),
        LossKind::FigurePoly { p },
        vec![
            Segment {
                lo: f64::NEG_INFINITY,
                hi: 0.0,
                piece: Piece::Quadratic {
                    z0: 0.0,
                    c0: 1.0,
                    c1: -p,
                    c2: p * (p + 1.0) / 2.0,
                },
            },
            Segment {
                lo: 0.0,
                hi: f64::INFINITY,
                piece: Piece::ShiftedPower { a: 1.0, p, z0: -1.0 },
            },
        ],
        p * (p + 1.0),
        Tail::Polynomial { a: p, b: p + 1.0 },
    ))
}

/// Sampling grid for [`validate`].
#[derive(Debug, Clone, Copy)]
pub struct Grid {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

impl Grid {
    pub fn new(lo: f64, hi: f64, points: usize) -> Self {
        Grid { lo, hi, points }
    }

    fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        let step = (self.hi - self.lo) / (self.points.max(2) - 1) as f64;
        (0..self.points.max(2)).map(move |i| self.lo + step * i as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ViolationKind {
    Monotonicity,
    Convexity,
    Continuity,
    Smoothness,
    Decay,
}

#[derive(Debug, Clone, Serialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub z: f64,
    pub detail: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    /// Largest |dl'| / |dz| seen between consecutive grid points.
    pub measured_beta: f64,
    /// Per interior breakpoint: (z, value residual, derivative residual).
    pub breakpoint_residuals: Vec<(f64, f64, f64)>,
    pub decay_ok: bool,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Sweeps the loss over `grid` checking strict decrease, convexity of the
/// derivative, strict negativity of the derivative, and the declared
/// smoothness constant; checks value/derivative continuity at every interior
/// breakpoint and that the value keeps decaying at the far end of the grid.
///
/// Monotonicity is compared in log space so the checks stay meaningful where
/// raw values underflow. Violations are data, not errors.
pub fn validate(loss: &Loss, grid: Grid) -> ValidationReport {
    let mut violations = Vec::new();
    let mut measured_beta: f64 = 0.0;

    let zs: Vec<f64> = grid.iter().collect();
    let mut prev_lv = f64::NAN;
    let mut prev_d = f64::NAN;
    let mut prev_z = f64::NAN;
    for (i, &z) in zs.iter().enumerate() {
        let lv = loss.log_value(z);
        let d = loss.deriv(z);
        let lnd = loss.log_neg_deriv(z);
        if !(d < 0.0 || lnd.is_finite()) {
            violations.push(Violation {
                kind: ViolationKind::Monotonicity,
                z,
                detail: d,
            });
        }
        if i > 0 {
            if !(prev_lv > lv) {
                violations.push(Violation {
                    kind: ViolationKind::Monotonicity,
                    z,
                    detail: lv - prev_lv,
                });
            }
            if d < prev_d - 1e-12 {
                violations.push(Violation {
                    kind: ViolationKind::Convexity,
                    z,
                    detail: prev_d - d,
                });
            }
            let slope = ((d - prev_d) / (z - prev_z)).abs();
            measured_beta = measured_beta.max(slope);
            if loss.smoothness.is_finite() && slope > loss.smoothness * (1.0 + 1e-9) + 1e-12 {
                violations.push(Violation {
                    kind: ViolationKind::Smoothness,
                    z,
                    detail: slope,
                });
            }
        }
        prev_lv = lv;
        prev_d = d;
        prev_z = z;
    }

    let mut breakpoint_residuals = Vec::new();
    for (i, &bp) in loss.breakpoints.iter().enumerate() {
        let left = &loss.segments[i].piece;
        let right = &loss.segments[i + 1].piece;
        let dv = (left.value(bp) - right.value(bp)).abs();
        let dd = (left.deriv(bp) - right.deriv(bp)).abs();
        breakpoint_residuals.push((bp, dv, dd));
        if dv > 1e-12 || dd > 1e-12 {
            violations.push(Violation {
                kind: ViolationKind::Continuity,
                z: bp,
                detail: dv.max(dd),
            });
        }
    }

    let decay_ok = loss.log_value(grid.hi) < loss.log_value(grid.hi / 2.0);
    if !decay_ok {
        violations.push(Violation {
            kind: ViolationKind::Decay,
            z: grid.hi,
            detail: 0.0,
        });
    }

    ValidationReport {
        violations,
        measured_beta,
        breakpoint_residuals,
        decay_ok,
    }
}
