//! Dense primal simplex for the tiny per-point feasibility programs.
//!
//! Solves max c.x subject to A x <= b, x >= 0 with b >= 0, so the slack
//! basis is feasible and a single phase suffices. Bland's rule everywhere,
//! which rules out cycling.

const EPS: f64 = 1e-12;

/// Returns the optimal objective value.
pub(crate) fn maximize(c: &[f64], a: &[Vec<f64>], b: &[f64], cap: usize) -> Result<f64, String> {
    let m = a.len();
    let nv = c.len();
    debug_assert!(b.iter().all(|&bi| bi >= 0.0));

    let width = nv + m + 1;
    let mut t = vec![vec![0.0; width]; m + 1];
    for i in 0..m {
        t[i][..nv].copy_from_slice(&a[i]);
        t[i][nv + i] = 1.0;
        t[i][width - 1] = b[i];
    }
    for j in 0..nv {
        t[m][j] = -c[j];
    }
    let mut basis: Vec<usize> = (nv..nv + m).collect();

    for _ in 0..cap {
        let Some(enter) = (0..nv + m).find(|&j| t[m][j] < -EPS) else {
            return Ok(t[m][width - 1]);
        };
        let mut leave: Option<usize> = None;
        let mut best_ratio = f64::INFINITY;
        for i in 0..m {
            if t[i][enter] <= EPS {
                continue;
            }
            let ratio = t[i][width - 1] / t[i][enter];
            let take = match leave {
                None => true,
                Some(l) => {
                    ratio < best_ratio - EPS
                        || (ratio <= best_ratio + EPS && basis[i] < basis[l])
                }
            };
            if take {
                best_ratio = best_ratio.min(ratio);
                leave = Some(i);
            }
        }
        let Some(leave) = leave else {
            return Err("unbounded program".into());
        };
        let pivot = t[leave][enter];
        for v in t[leave].iter_mut() {
            *v /= pivot;
        }
        for i in 0..=m {
            if i != leave {
                let f = t[i][enter];
                if f != 0.0 {
                    for j in 0..width {
                        t[i][j] -= f * t[leave][j];
                    }
                }
            }
        }
        basis[leave] = enter;
    }
    Err("pivot cap exceeded".into())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_a_textbook_program() {
        // max 3x + 2y s.t. x + y <= 4, x <= 2 -> 2*3 + 2*2 = 10
        let v = maximize(
            &[3.0, 2.0],
            &[vec![1.0, 1.0], vec![1.0, 0.0]],
            &[4.0, 2.0],
            1000,
        )
        .unwrap();
        assert!((v - 10.0).abs() < 1e-9);
    }

    #[test]
    fn degenerate_constraints_still_terminate() {
        let v = maximize(
            &[1.0],
            &[vec![1.0], vec![1.0], vec![1.0]],
            &[0.0, 0.0, 1.0],
            1000,
        )
        .unwrap();
        assert!(v.abs() < 1e-12);
    }

    #[test]
    fn all_negative_costs_keep_the_origin() {
        let v = maximize(&[-1.0, -2.0], &[vec![1.0, 1.0]], &[3.0], 1000).unwrap();
        assert_eq!(v, 0.0);
    }
}
