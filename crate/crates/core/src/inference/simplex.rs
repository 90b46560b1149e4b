//! Dense phase-one simplex for small equality systems `A x = b, x ≥ 0`.

use crate::error::{Error, Result};

const PIVOT_EPS: f64 = 1e-12;
const MAX_PIVOTS: usize = 10_000;

pub(crate) struct PhaseOne {
    /// Sum of artificial variables at the optimum; zero iff feasible.
    pub infeasibility: f64,
    pub x: Vec<f64>,
}

/// Minimizes the total artificial slack with Bland's rule.
pub(crate) fn phase_one(rows: &[Vec<f64>], rhs: &[f64]) -> Result<PhaseOne> {
    let m = rows.len();
    let nv = rows.first().map_or(0, Vec::len);
    let width = nv + m + 1;
    let last = width - 1;
    let mut t = vec![vec![0.0; width]; m];
    for (i, (row, &b)) in rows.iter().zip(rhs).enumerate() {
        let sign = if b < 0.0 { -1.0 } else { 1.0 };
        for (j, &a) in row.iter().enumerate() {
            t[i][j] = sign * a;
        }
        t[i][nv + i] = 1.0;
        t[i][last] = sign * b;
    }
    let mut basis: Vec<usize> = (nv..nv + m).collect();
    // Reduced costs of the phase-one objective (sum of artificials).
    let mut z = vec![0.0; width];
    for j in (0..nv).chain(std::iter::once(last)) {
        z[j] = -t.iter().map(|row| row[j]).sum::<f64>();
    }

    for _ in 0..MAX_PIVOTS {
        let Some(enter) = (0..nv + m).find(|&j| z[j] < -PIVOT_EPS) else {
            let mut x = vec![0.0; nv];
            for (i, &bv) in basis.iter().enumerate() {
                if bv < nv {
                    x[bv] = t[i][last];
                }
            }
            return Ok(PhaseOne {
                infeasibility: -z[last],
                x,
            });
        };
        let mut leave: Option<(usize, f64)> = None;
        for i in 0..m {
            if t[i][enter] > PIVOT_EPS {
                let ratio = t[i][last] / t[i][enter];
                leave = match leave {
                    Some((k, r)) if r < ratio || (r == ratio && basis[k] < basis[i]) => {
                        Some((k, r))
                    }
                    _ => Some((i, ratio)),
                };
            }
        }
        let Some((p, _)) = leave else {
            return Err(Error::Numerical("phase-one objective unbounded".into()));
        };
        let piv = t[p][enter];
        for v in t[p].iter_mut() {
            *v /= piv;
        }
        let pivot_row = t[p].clone();
        for (i, row) in t.iter_mut().enumerate() {
            if i != p && row[enter] != 0.0 {
                let f = row[enter];
                for (v, pv) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
            }
        }
        let f = z[enter];
        for (v, pv) in z.iter_mut().zip(&pivot_row) {
            *v -= f * pv;
        }
        basis[p] = enter;
    }
    Err(Error::Numerical(format!(
        "simplex did not terminate within {MAX_PIVOTS} pivots"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_feasible_point() {
        // x + y = 1, x - y = 0.5
        let r = phase_one(&[vec![1.0, 1.0], vec![1.0, -1.0]], &[1.0, 0.5]).unwrap();
        assert!(r.infeasibility < 1e-12);
        assert!((r.x[0] - 0.75).abs() < 1e-12 && (r.x[1] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn detects_infeasible_system() {
        // x + y = 1 and x + y = 2
        let r = phase_one(&[vec![1.0, 1.0], vec![1.0, 1.0]], &[1.0, 2.0]).unwrap();
        assert!((r.infeasibility - 1.0).abs() < 1e-12);
        // x = -1 with x >= 0
        let r = phase_one(&[vec![1.0]], &[-1.0]).unwrap();
        assert!(r.infeasibility > 0.5);
    }
}
