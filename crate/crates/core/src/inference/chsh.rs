use std::io::Write;

use serde::Serialize;

use super::estimate::{estimate_correlation, CorrelationEstimate};
use crate::detection::{AnalyzerSetting, Simulator};
use crate::error::Result;
use crate::rng::derive_seed;

/// One of the eight CHSH combinations `|s₁C₁ + s₂C₂ + s₃C₃ + s₄C₄|` with an odd
/// number of negative signs, over `(C_ab, C_ab′, C_a′b, C_a′b′)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChshVariant {
    pub signs: [i8; 4],
    pub value: f64,
}

/// The textbook combination `C_ab − C_ab′ + C_a′b + C_a′b′`.
pub const STANDARD_SIGNS: [i8; 4] = [1, -1, 1, 1];

pub fn chsh_variants(c: [f64; 4]) -> [ChshVariant; 8] {
    let mut out = [ChshVariant {
        signs: [0; 4],
        value: 0.0,
    }; 8];
    let mut k = 0;
    for mask in 0u8..16 {
        if mask.count_ones() % 2 == 1 {
            let signs = [0, 1, 2, 3].map(|bit| if mask >> (3 - bit) & 1 == 1 { -1 } else { 1 });
            let value = signs
                .iter()
                .zip(c)
                .map(|(&s, c)| f64::from(s) * c)
                .sum::<f64>()
                .abs();
            out[k] = ChshVariant { signs, value };
            k += 1;
        }
    }
    out
}

/// Largest of the eight variants (first one on ties).
pub fn chsh_from_correlations(c: [f64; 4]) -> ChshVariant {
    chsh_variants(c)
        .into_iter()
        .reduce(|best, v| if v.value > best.value { v } else { best })
        .expect("eight variants")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SettingCorrelation {
    pub a: f64,
    pub b: f64,
    #[serde(flatten)]
    pub estimate: CorrelationEstimate,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChshResult {
    /// `(a,b), (a,b′), (a′,b), (a′,b′)`.
    pub correlations: [SettingCorrelation; 4],
    /// Maximum over the eight variants.
    pub s_value: f64,
    /// Root-sum-square of the four standard errors.
    pub s_stderr: f64,
    /// Signs of the maximizing variant.
    pub variant_signs: [i8; 4],
    /// Value of the standard combination `|C_ab − C_ab′ + C_a′b + C_a′b′|`.
    pub standard_value: f64,
    pub variants: [ChshVariant; 8],
}

impl ChshResult {
    pub fn from_correlations(correlations: [SettingCorrelation; 4]) -> Self {
        let c = correlations.map(|sc| sc.estimate.mean);
        let best = chsh_from_correlations(c);
        let variants = chsh_variants(c);
        let standard_value = variants
            .iter()
            .find(|v| v.signs == STANDARD_SIGNS)
            .map(|v| v.value)
            .expect("standard pattern has one minus sign");
        let s_stderr = correlations
            .iter()
            .map(|sc| sc.estimate.stderr * sc.estimate.stderr)
            .sum::<f64>()
            .sqrt();
        ChshResult {
            correlations,
            s_value: best.value,
            s_stderr,
            variant_signs: best.signs,
            standard_value,
            variants,
        }
    }

    /// `a,b,mean,stderr,n` rows, one per setting pair.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["a", "b", "mean", "stderr", "n"])?;
        for sc in &self.correlations {
            out.write_record([
                sc.a.to_string(),
                sc.b.to_string(),
                sc.estimate.mean.to_string(),
                sc.estimate.stderr.to_string(),
                sc.estimate.n_trials.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Estimates the four correlations at the scenario's angles, each from its own
/// sub-seed, and evaluates every CHSH variant.
pub fn chsh(sim: &Simulator, n: usize, seed: u64) -> Result<ChshResult> {
    let ang = sim.scenario().angles;
    let pairs = [
        (ang.a, ang.b),
        (ang.a, ang.b_prime),
        (ang.a_prime, ang.b),
        (ang.a_prime, ang.b_prime),
    ];
    let mut out = Vec::with_capacity(4);
    for (k, (a, b)) in pairs.into_iter().enumerate() {
        let (sa, sb) = (AnalyzerSetting::new(a), AnalyzerSetting::new(b));
        let estimate = estimate_correlation(sim, sa, sb, n, derive_seed(seed, 0x100 + k as u64))?;
        out.push(SettingCorrelation {
            a: sa.angle(),
            b: sb.angle(),
            estimate,
        });
    }
    let correlations: [SettingCorrelation; 4] = out.try_into().expect("four pairs");
    Ok(ChshResult::from_correlations(correlations))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eight_odd_variants() {
        let v = chsh_variants([1.0, 1.0, 1.0, 1.0]);
        assert_eq!(v.len(), 8);
        for x in &v {
            assert_eq!(x.signs.iter().filter(|&&s| s < 0).count() % 2, 1);
            assert_eq!(x.value, 2.0);
        }
        assert!(v.iter().any(|x| x.signs == STANDARD_SIGNS));
    }

    #[test]
    fn local_deterministic_point_gives_two() {
        assert_eq!(chsh_from_correlations([1.0, 1.0, 1.0, 1.0]).value, 2.0);
    }

    #[test]
    fn pr_pattern_gives_four() {
        let best = chsh_from_correlations([1.0, 1.0, 1.0, -1.0]);
        assert_eq!(best.value, 4.0);
    }

    #[test]
    fn singlet_values_give_tsirelson() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let best = chsh_from_correlations([-h, h, -h, -h]);
        assert!((best.value - 2.0 * std::f64::consts::SQRT_2).abs() < 1e-12);
    }
}
