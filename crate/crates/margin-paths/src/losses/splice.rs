//! Convex bridges between exponential and reciprocal tails.
//!
//! Each splice joins two target tails with a three-piece derivative bridge:
//! an affine continuation of the left tail's tangent, a quadratic blend over
//! a unit interval, and an affine run into the right tail's tangent. The
//! switch point where the two tangent lines intersect is solved in closed
//! form so the bridged value meets the right tail exactly.

use super::{Loss, LossKind, Piece, Segment, Tail};
use crate::error::{Error, Result};

/// One piece of a derivative bridge; the derivative is linear from
/// `(lo, d_lo)` to `(hi, d_hi)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BridgeSegment {
    pub lo: f64,
    pub hi: f64,
    pub d_lo: f64,
    pub d_hi: f64,
}

impl BridgeSegment {
    pub fn integral(&self) -> f64 {
        0.5 * (self.d_lo + self.d_hi) * (self.hi - self.lo)
    }

    /// Lipschitz constant of the derivative on this piece.
    pub fn slope(&self) -> f64 {
        if self.hi > self.lo {
            (self.d_hi - self.d_lo).abs() / (self.hi - self.lo)
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone)]
pub struct SpliceResult {
    /// Intersection point of the two bridging tangent lines.
    pub c_switch: f64,
    /// Where the right tail takes over.
    pub upper: f64,
    /// Piecewise-linear derivative on `[C0, upper]`.
    pub derivative_bridge: Vec<BridgeSegment>,
    /// The bridged loss: left tail up to C0, bridge, right tail from `upper`.
    pub loss: Loss,
}

impl SpliceResult {
    /// Integral of the bridging derivative over `[C0, upper]`.
    pub fn bridge_integral(&self) -> f64 {
        self.derivative_bridge.iter().map(|s| s.integral()).sum()
    }
}

fn check_c0(c0: f64) -> Result<()> {
    if !(c0 >= 1.0) {
        return Err(Error::Parameter(format!(
            "splice lower end must satisfy C0 >= 1, got {c0}"
        )));
    }
    Ok(())
}

pub(super) struct Bridge {
    pub c_switch: f64,
    pub upper: f64,
    pub segments: Vec<Segment>,
    pub bridge: Vec<BridgeSegment>,
}

/// Bridge from `exp(-z)` ending at C0 to `1/z` starting at the smallest
/// feasible integer C1.
pub(super) fn exp_to_recip_bridge(c0: f64) -> Result<Bridge> {
    let e = (-c0).exp();
    let start = c0.ceil() as i64 + 2;
    let mut c1 = None;
    for c in start..1_000_000 {
        let cf = c as f64;
        let lhs = 1.0 / cf + (cf - c0) / (cf * cf) + e / 2.0 - 1.0 / (2.0 * cf * cf);
        if lhs < e && cf > c0 + 1.5 {
            c1 = Some(cf);
            break;
        }
    }
    let c1 = c1.ok_or(Error::Convergence {
        context: "exp-to-recip switch point search".into(),
        iterations: 1_000_000,
        residual: e,
    })?;
    let r = 1.0 / c1;
    let r2 = 1.0 / (c1 * c1);
    let c = (r + r2 * c1 + e / 2.0 - r2 / 2.0 - e - e * c0) / (r2 - e);
    let v_c = e - e * (c - c0);
    let segments = vec![
        Segment {
            lo: c0,
            hi: c,
            piece: Piece::Affine {
                c0: e + e * c0,
                c1: -e,
            },
        },
        Segment {
            lo: c,
            hi: c + 1.0,
            piece: Piece::Quadratic {
                z0: c,
                c0: v_c,
                c1: -e,
                c2: (e - r2) / 2.0,
            },
        },
        Segment {
            lo: c + 1.0,
            hi: c1,
            piece: Piece::Affine {
                c0: (v_c - e + (e - r2) / 2.0) + r2 * (c + 1.0),
                c1: -r2,
            },
        },
    ];
    let bridge = vec![
        BridgeSegment { lo: c0, hi: c, d_lo: -e, d_hi: -e },
        BridgeSegment { lo: c, hi: c + 1.0, d_lo: -e, d_hi: -r2 },
        BridgeSegment { lo: c + 1.0, hi: c1, d_lo: -r2, d_hi: -r2 },
    ];
    Ok(Bridge {
        c_switch: c,
        upper: c1,
        segments,
        bridge,
    })
}

/// Bridge from `1/z` ending at C0 to `exp(-z)` starting at the smallest
/// feasible integer C2 > 2 C0 + 1. The final run is stored in log form
/// because `exp(-C2)` underflows once C2 exceeds ~745.
pub(super) fn recip_to_exp_bridge(c0: f64) -> Result<Bridge> {
    let p = 1.0 / c0;
    let p2 = 1.0 / (c0 * c0);
    let start = c0.ceil() as i64 + 2;
    let mut c2 = None;
    for c in start..10_000_000 {
        let cf = c as f64;
        let e2 = if cf < 745.0 { (-cf).exp() } else { 0.0 };
        let rhs = e2 - e2 * (c0 - cf) + p2 / 2.0 - e2 / 2.0;
        if p > rhs && cf > 2.0 * c0 + 1.0 {
            c2 = Some(cf);
            break;
        }
    }
    let c2 = c2.ok_or(Error::Convergence {
        context: "recip-to-exp switch point search".into(),
        iterations: 10_000_000,
        residual: p,
    })?;
    let e2 = if c2 < 745.0 { (-c2).exp() } else { 0.0 };
    let cp = (e2 * (c2 + 0.5) + p2 / 2.0 - 2.0 * p) / (e2 - p2);
    let v_cp = p - p2 * (cp - c0);
    let segments = vec![
        Segment {
            lo: c0,
            hi: cp,
            piece: Piece::Affine {
                c0: p + p2 * c0,
                c1: -p2,
            },
        },
        Segment {
            lo: cp,
            hi: cp + 1.0,
            piece: Piece::Quadratic {
                z0: cp,
                c0: v_cp,
                c1: -p2,
                c2: (p2 - e2) / 2.0,
            },
        },
        Segment {
            lo: cp + 1.0,
            hi: c2,
            piece: Piece::LogAffine {
                z1: c2,
                lv1: -c2,
                lns: -c2,
            },
        },
    ];
    let bridge = vec![
        BridgeSegment { lo: c0, hi: cp, d_lo: -p2, d_hi: -p2 },
        BridgeSegment { lo: cp, hi: cp + 1.0, d_lo: -p2, d_hi: -e2 },
        BridgeSegment { lo: cp + 1.0, hi: c2, d_lo: -e2, d_hi: -e2 },
    ];
    Ok(Bridge {
        c_switch: cp,
        upper: c2,
        segments,
        bridge,
    })
}

/// Splices `exp(-z)` on `(-inf, C0]` to `1/z` on `[C1, inf)` with a convex,
/// C1-continuous bridge, picking the smallest integer C1 for which the
/// bridge's value gap closes.
pub fn splice_exp_to_recip(c0: f64) -> Result<SpliceResult> {
    check_c0(c0)?;
    let b = exp_to_recip_bridge(c0)?;
    let mut segments = vec![Segment {
        lo: f64::NEG_INFINITY,
        hi: c0,
        piece: Piece::Exponential { a: 1.0, b: 1.0 },
    }];
    segments.extend(b.segments);
    segments.push(Segment {
        lo: b.upper,
        hi: f64::INFINITY,
        piece: Piece::Power { a: 1.0, p: 1.0 },
    });
    let loss = Loss::from_segments(
        format!("splice-exp-recip({c0})"),
        LossKind::Composite,
        segments,
        f64::INFINITY,
        Tail::Polynomial { a: 1.0, b: 2.0 },
    );
    Ok(SpliceResult {
        c_switch: b.c_switch,
        upper: b.upper,
        derivative_bridge: b.bridge,
        loss,
    })
}

/// Mirror splice: `1/z` on `(-inf, C0]` to `exp(-z)` on `[C2, inf)`.
/// Only meaningful on the positive axis, where the reciprocal side lives.
pub fn splice_recip_to_exp(c0: f64) -> Result<SpliceResult> {
    check_c0(c0)?;
    let b = recip_to_exp_bridge(c0)?;
    let mut segments = vec![Segment {
        lo: f64::NEG_INFINITY,
        hi: c0,
        piece: Piece::Power { a: 1.0, p: 1.0 },
    }];
    segments.extend(b.segments);
    segments.push(Segment {
        lo: b.upper,
        hi: f64::INFINITY,
        piece: Piece::Exponential { a: 1.0, b: 1.0 },
    });
    let loss = Loss::from_segments(
        format!("splice-recip-exp({c0})"),
        LossKind::Composite,
        segments,
        f64::INFINITY,
        Tail::Exponential { a: 1.0, b: 1.0 },
    );
    Ok(SpliceResult {
        c_switch: b.c_switch,
        upper: b.upper,
        derivative_bridge: b.bridge,
        loss,
    })
}
