//! Loss whose tail alternates between exponential and reciprocal decay over
//! dataset-sized windows, so the constrained-minimizer direction keeps
//! swinging between the two limit directions instead of settling.

use super::splice::{exp_to_recip_bridge, recip_to_exp_bridge};
use super::{Loss, LossKind, Piece, Segment, Tail};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct DatasetConstants {
    pub n: usize,
    /// Margin of the reciprocal-tail limit direction, in (0, 1].
    pub gamma_bar: f64,
}

#[derive(Debug, Clone)]
pub struct Oscillating {
    pub loss: Loss,
    /// `(c_k, d_k)` intervals where the loss is exactly `1/z`.
    pub recip_windows: Vec<(f64, f64)>,
    /// `(a_k, b_k)` intervals where the loss is exactly `exp(-z)`.
    pub exp_windows: Vec<(f64, f64)>,
}

/// Builds the alternating-tail loss: `z^2 - z + 1` for z < 0, `exp(-z)` on
/// `[0, B0]`, then K spliced switches. Odd switches land on `1/z` over
/// `[c_k, d_k]` with `d_k = 2 n c_k / gamma_bar`; even switches land back on
/// `exp(-z)` over `[a_k, b_k]` with `b_k = 2 (a_k + ln n) / gamma_bar`. The
/// final window's tail continues to infinity.
///
/// With K = 0 this degenerates to the plain exponential with the quadratic
/// extension. Each switch widens the next window by roughly a factor of
/// `2n/gamma_bar`; once a window end is large enough that `exp(-z)`
/// underflows at the next splice, the feasibility search fails and the
/// construction reports a convergence error (in practice K <= 2 at these
/// scales).
pub fn build_oscillating(
    b0: f64,
    constants: DatasetConstants,
    switches: usize,
) -> Result<Oscillating> {
    if !(b0 >= 1.0) {
        return Err(Error::Parameter(format!(
            "oscillating loss needs B0 >= 1, got {b0}"
        )));
    }
    if constants.n < 1 {
        return Err(Error::Parameter("oscillating loss needs n >= 1".into()));
    }
    let gamma_bar = constants.gamma_bar;
    if !(gamma_bar > 0.0 && gamma_bar <= 1.0) {
        return Err(Error::Parameter(format!(
            "oscillating loss needs gamma_bar in (0, 1], got {gamma_bar}"
        )));
    }
    let n = constants.n as f64;

    let mut segments = vec![
        Segment {
            lo: f64::NEG_INFINITY,
            hi: 0.0,
            piece: Piece::Quadratic {
                z0: 0.0,
                c0: 1.0,
                c1: -1.0,
                c2: 1.0,
            },
        },
        Segment {
            lo: 0.0,
            hi: b0,
            piece: Piece::Exponential { a: 1.0, b: 1.0 },
        },
    ];
    let mut recip_windows = Vec::new();
    let mut exp_windows = Vec::new();
    let mut cur = b0;
    let mut tail = Tail::Exponential { a: 1.0, b: 1.0 };

    for j in 1..=switches {
        if j % 2 == 1 {
            let bridge = exp_to_recip_bridge(cur)?;
            segments.extend(bridge.segments);
            let c = bridge.upper;
            let d = 2.0 * n * c / gamma_bar;
            segments.push(Segment {
                lo: c,
                hi: d,
                piece: Piece::Power { a: 1.0, p: 1.0 },
            });
            recip_windows.push((c, d));
            cur = d;
            tail = Tail::Polynomial { a: 1.0, b: 2.0 };
        } else {
            let bridge = recip_to_exp_bridge(cur)?;
            segments.extend(bridge.segments);
            let a = bridge.upper;
            let b = 2.0 * (a + n.ln()) / gamma_bar;
            segments.push(Segment {
                lo: a,
                hi: b,
                piece: Piece::Exponential { a: 1.0, b: 1.0 },
            });
            exp_windows.push((a, b));
            cur = b;
            tail = Tail::Exponential { a: 1.0, b: 1.0 };
        }
    }

    segments.last_mut().unwrap().hi = f64::INFINITY;
    let tail = if switches == 0 { tail } else { Tail::Composite };
    let loss = Loss::from_segments(
        format!("oscillating(K={switches})"),
        LossKind::Composite,
        segments,
        2.0,
        tail,
    );
    Ok(Oscillating {
        loss,
        recip_windows,
        exp_windows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::losses::{validate, Grid};

    fn constants() -> DatasetConstants {
        DatasetConstants {
            n: 20,
            gamma_bar: 0.3,
        }
    }

    #[test]
    fn zero_switches_degenerates_to_exp_with_quadratic_head() {
        let osc = build_oscillating(1.0, constants(), 0).unwrap();
        assert_eq!(osc.loss.segments.len(), 2);
        assert_eq!(osc.loss.value(-1.0), 3.0);
        assert_eq!(osc.loss.value(0.0), 1.0);
        assert!((osc.loss.value(3.0) - (-3.0f64).exp()).abs() < 1e-15);
        assert!(osc.recip_windows.is_empty() && osc.exp_windows.is_empty());
    }

    #[test]
    fn quadratic_head_values() {
        let osc = build_oscillating(1.0, constants(), 2).unwrap();
        assert_eq!(osc.loss.value(-1.0), 3.0);
        assert_eq!(osc.loss.value(0.0), 1.0);
        assert_eq!(osc.loss.deriv(0.0), -1.0);
    }

    #[test]
    fn window_radii_follow_the_dataset_constants() {
        let osc = build_oscillating(1.0, constants(), 2).unwrap();
        assert_eq!(osc.recip_windows.len(), 1);
        assert_eq!(osc.exp_windows.len(), 1);
        let (c1, d1) = osc.recip_windows[0];
        assert_eq!(c1, 11.0);
        assert!((d1 / c1 - 2.0 * 20.0 / 0.3).abs() < 1e-9);
        let (a1, b1) = osc.exp_windows[0];
        assert!(a1 > 2.0 * d1 + 1.0);
        assert!((b1 - 2.0 * (a1 + (20.0f64).ln()) / 0.3).abs() < 1e-9);
    }

    #[test]
    fn loss_is_c1_across_every_breakpoint() {
        let osc = build_oscillating(1.0, constants(), 2).unwrap();
        let loss = &osc.loss;
        for (i, &bp) in loss.breakpoints.iter().enumerate() {
            let left = &loss.segments[i].piece;
            let right = &loss.segments[i + 1].piece;
            let dv = (left.value(bp) - right.value(bp)).abs();
            let dd = (left.deriv(bp) - right.deriv(bp)).abs();
            assert!(dv < 1e-10, "value jump {dv} at z={bp}");
            assert!(dd < 1e-10, "derivative jump {dd} at z={bp}");
        }
    }

    #[test]
    fn windows_evaluate_to_their_exact_tails() {
        let osc = build_oscillating(1.0, constants(), 2).unwrap();
        let (c1, d1) = osc.recip_windows[0];
        let mid = 0.5 * (c1 + d1);
        assert!((osc.loss.value(mid) * mid - 1.0).abs() < 1e-15);
        assert!((osc.loss.log_value(mid) + mid.ln()).abs() < 1e-12);
        let (a1, b1) = osc.exp_windows[0];
        let mid = 0.5 * (a1 + b1);
        assert_eq!(osc.loss.log_value(mid), -mid);
    }

    #[test]
    fn validation_sweep_is_clean() {
        let osc = build_oscillating(1.0, constants(), 2).unwrap();
        let hi = osc.exp_windows[0].1 * 1.1;
        let rep = validate(&osc.loss, Grid::new(-2.0, hi, 20_000));
        assert!(rep.is_clean(), "{:?}", rep.violations);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(build_oscillating(0.5, constants(), 1).is_err());
        let mut c = constants();
        c.gamma_bar = 0.0;
        assert!(build_oscillating(1.0, c, 1).is_err());
        c.gamma_bar = 1.5;
        assert!(build_oscillating(1.0, c, 1).is_err());
        c = constants();
        c.n = 0;
        assert!(build_oscillating(1.0, c, 1).is_err());
    }

    #[test]
    fn deep_switch_schedules_are_reported_infeasible() {
        let err = build_oscillating(1.0, constants(), 3).unwrap_err();
        match err {
            crate::Error::Convergence { .. } => {}
            other => panic!("expected a convergence error, got {other}"),
        }
    }
}
