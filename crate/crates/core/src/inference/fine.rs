//! Joint probability distributions over the sixteen deterministic strategies.

use serde::Serialize;

use super::chsh::{chsh_from_correlations, chsh_variants, ChshVariant};
use super::simplex::phase_one;
use crate::error::{Error, Result};

pub const FEASIBILITY_TOLERANCE: f64 = 1e-9;

/// Wing-A/wing-B variable pairs behind `(C_ab, C_ab′, C_a′b, C_a′b′)`, indexing
/// the atom order `(A_a, A_a′, B_b, B_b′)`.
const PAIRS: [(usize, usize); 4] = [(0, 2), (0, 3), (1, 2), (1, 3)];

/// Deterministic strategy `k` in `0..16` as `(A_a, A_a′, B_b, B_b′)`; a clear bit
/// maps to `+1`, so atom 0 is all `+1`.
pub fn atom(k: usize) -> [i8; 4] {
    assert!(k < 16, "atom index out of range: {k}");
    [0, 1, 2, 3].map(|bit| if k >> bit & 1 == 1 { -1 } else { 1 })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JointFeasibility {
    pub feasible: bool,
    /// Weights over the sixteen atoms when feasible.
    pub witness: Option<Vec<f64>>,
    /// First CHSH variant exceeding 2 when infeasible.
    pub violated_variant: Option<ChshVariant>,
    pub max_variant: ChshVariant,
    /// `max_variant.value − 2`.
    pub slack: f64,
    pub reason: Option<String>,
}

fn check_unit(name: &str, v: &[f64]) -> Result<()> {
    for (i, &x) in v.iter().enumerate() {
        if !x.is_finite() || x.abs() > 1.0 {
            return Err(Error::Domain(format!("{name}[{i}] = {x} outside [-1, 1]")));
        }
    }
    Ok(())
}

/// Decides whether a probability vector over the sixteen atoms reproduces the
/// given correlations (and marginals, if supplied).
pub fn joint_feasibility(c: [f64; 4], marginals: Option<[f64; 4]>) -> Result<JointFeasibility> {
    check_unit("correlations", &c)?;
    if let Some(m) = &marginals {
        check_unit("marginals", m)?;
    }
    let atoms: Vec<[i8; 4]> = (0..16).map(atom).collect();
    let mut rows = vec![vec![1.0; 16]];
    let mut rhs = vec![1.0];
    for (&(i, j), &cij) in PAIRS.iter().zip(&c) {
        rows.push(atoms.iter().map(|s| f64::from(s[i] * s[j])).collect());
        rhs.push(cij);
    }
    if let Some(m) = marginals {
        for (i, &mi) in m.iter().enumerate() {
            rows.push(atoms.iter().map(|s| f64::from(s[i])).collect());
            rhs.push(mi);
        }
    }
    let lp = phase_one(&rows, &rhs)?;

    let max_variant = chsh_from_correlations(c);
    let slack = max_variant.value - 2.0;
    let violated_variant = chsh_variants(c)
        .into_iter()
        .find(|v| v.value > 2.0 + FEASIBILITY_TOLERANCE);

    let witness: Vec<f64> = lp.x.iter().map(|&p| p.max(0.0)).collect();
    let residual = rows
        .iter()
        .zip(&rhs)
        .map(|(row, &b)| (row.iter().zip(&witness).map(|(a, p)| a * p).sum::<f64>() - b).abs())
        .fold(0.0, f64::max);
    let feasible = lp.infeasibility <= FEASIBILITY_TOLERANCE && residual <= FEASIBILITY_TOLERANCE;

    if feasible {
        return Ok(JointFeasibility {
            feasible,
            witness: Some(witness),
            violated_variant: None,
            max_variant,
            slack,
            reason: None,
        });
    }
    let reason = match violated_variant {
        Some(v) => format!("CHSH variant {:?} = {} exceeds 2", v.signs, v.value),
        None if marginals.is_some() => {
            "marginals incompatible with the correlations (some atom weight would be negative)"
                .to_string()
        }
        None => "no non-negative atom weights reproduce the correlations".to_string(),
    };
    Ok(JointFeasibility {
        feasible,
        witness: None,
        violated_variant,
        max_variant,
        slack,
        reason: Some(reason),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reproduces(w: &[f64], c: [f64; 4]) -> bool {
        let sum: f64 = w.iter().sum();
        (sum - 1.0).abs() < 1e-9
            && PAIRS.iter().zip(c).all(|(&(i, j), cij)| {
                let got: f64 = w
                    .iter()
                    .enumerate()
                    .map(|(k, p)| p * f64::from(atom(k)[i] * atom(k)[j]))
                    .sum();
                (got - cij).abs() < 1e-9
            })
    }

    #[test]
    fn atom_order() {
        assert_eq!(atom(0), [1, 1, 1, 1]);
        assert_eq!(atom(1), [-1, 1, 1, 1]);
        assert_eq!(atom(15), [-1, -1, -1, -1]);
    }

    #[test]
    fn all_ones_is_feasible() {
        let r = joint_feasibility([1.0; 4], None).unwrap();
        assert!(r.feasible);
        assert!(reproduces(r.witness.as_ref().unwrap(), [1.0; 4]));
        assert_eq!(r.max_variant.value, 2.0);
    }

    #[test]
    fn deterministic_marginals_force_point_mass() {
        let r = joint_feasibility([1.0; 4], Some([1.0; 4])).unwrap();
        let w = r.witness.unwrap();
        assert!((w[0] - 1.0).abs() < 1e-9);
        assert!(w[1..].iter().all(|p| p.abs() < 1e-9));
    }

    #[test]
    fn pr_box_is_infeasible() {
        let r = joint_feasibility([1.0, 1.0, 1.0, -1.0], None).unwrap();
        assert!(!r.feasible);
        assert!(r.witness.is_none());
        assert_eq!(r.violated_variant.unwrap().value, 4.0);
        assert_eq!(r.slack, 2.0);
    }

    #[test]
    fn tsirelson_point_is_infeasible() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let r = joint_feasibility([-h, h, -h, -h], None).unwrap();
        assert!(!r.feasible);
        assert!(r.reason.unwrap().contains("CHSH"));
    }

    #[test]
    fn out_of_range_is_domain_error() {
        let e = joint_feasibility([1.2, 0.0, 0.0, 0.0], None).unwrap_err();
        assert_eq!(e.kind(), "domain");
        let e = joint_feasibility([0.0; 4], Some([0.0, 0.0, 0.0, -1.5])).unwrap_err();
        assert_eq!(e.kind(), "domain");
    }

    #[test]
    fn incompatible_marginals_without_chsh_violation() {
        // A_a = +1 surely, B_b = +1 surely, yet C_ab = -1.
        let r = joint_feasibility([-1.0, 0.0, 0.0, 0.0], Some([1.0, 0.0, 1.0, 0.0])).unwrap();
        assert!(!r.feasible);
        assert!(r.violated_variant.is_none());
        assert!(r.reason.unwrap().contains("marginals"));
    }
}
