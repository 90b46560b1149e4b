use rayon::prelude::*;
use serde::Serialize;

use crate::detection::{AnalyzerSetting, SigmaCFields, Simulator, Wing};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, trial_rng};

/// Monte Carlo mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CorrelationEstimate {
    pub mean: f64,
    /// Sample standard deviation over `√n`.
    pub stderr: f64,
    pub n_trials: usize,
}

impl CorrelationEstimate {
    /// Reduces in index order, so the result does not depend on how the
    /// values were produced.
    pub(crate) fn from_values(values: &[f64]) -> Self {
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
        let var = if n > 1 { ss / (n - 1) as f64 } else { 0.0 };
        CorrelationEstimate {
            mean,
            stderr: (var / n as f64).sqrt(),
            n_trials: n,
        }
    }
}

/// Evaluates `f(0..n)` sequentially or on a private pool, keeping index order.
pub(crate) fn map_indexed<T, F>(threads: usize, n: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync + Send,
{
    if threads <= 1 {
        return (0..n as u64).map(f).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("cannot start thread pool: {e}")))?;
    pool.install(|| (0..n as u64).into_par_iter().map(&f).collect())
}

pub(crate) fn check_count(name: &str, n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::Usage(format!("{name} must be >= 2, got {n}")));
    }
    Ok(())
}

/// Mean of `A·B` over `n` independent trials; trial `i` uses stream `i` of `seed`.
///
/// For local-field scenarios each trial goes initial data → propagation →
/// outcome, which is the measurement-time correlation rewritten on the
/// Cauchy slice.
pub fn estimate_correlation(
    sim: &Simulator,
    a: AnalyzerSetting,
    b: AnalyzerSetting,
    n: usize,
    seed: u64,
) -> Result<CorrelationEstimate> {
    check_count("n", n)?;
    let products = map_indexed(sim.threads(), n, |i| {
        Ok(f64::from(
            sim.trial(a, b, &mut trial_rng(seed, i))?.product(),
        ))
    })?;
    Ok(CorrelationEstimate::from_values(&products))
}

/// Mean outcome of one wing with settings `(a, b)`.
pub fn estimate_marginal(
    sim: &Simulator,
    a: AnalyzerSetting,
    b: AnalyzerSetting,
    wing: Wing,
    n: usize,
    seed: u64,
) -> Result<CorrelationEstimate> {
    check_count("n", n)?;
    let values = map_indexed(sim.threads(), n, |i| {
        let pair = sim.trial(a, b, &mut trial_rng(seed, i))?;
        let o = match wing {
            Wing::A => pair.a,
            Wing::B => pair.b,
        };
        Ok(f64::from(o.value()))
    })?;
    Ok(CorrelationEstimate::from_values(&values))
}

fn conditional_mean(
    sim: &Simulator,
    setting: AnalyzerSetting,
    wing: Wing,
    lambda_c: &SigmaCFields,
    m: usize,
    seed: u64,
) -> Result<f64> {
    let mut sum = 0.0;
    for j in 0..m as u64 {
        let o = sim.conditional_outcome(wing, setting, lambda_c, &mut trial_rng(seed, j))?;
        sum += f64::from(o.value());
    }
    Ok(sum / m as f64)
}

/// Average of one wing's outcome over `m` redraws of its own block
/// (`Σ_a` for A, `Σ_b` for B) with the `Σ_c` fields held at `lambda_c`.
pub fn conditional_average(
    sim: &Simulator,
    setting: AnalyzerSetting,
    wing: Wing,
    lambda_c: &SigmaCFields,
    m: usize,
    seed: u64,
) -> Result<f64> {
    sim.require_factorized()?;
    check_count("m", m)?;
    conditional_mean(sim, setting, wing, lambda_c, m, seed)
}

const OUTER_TAG: u64 = 0x0u64;
const WING_A_TAG: u64 = 0xA;
const WING_B_TAG: u64 = 0xB;

/// Correlation from block averages: an outer average over `Σ_c` draws of
/// `Ā_a[λ_c] · B̄_b[λ_c]`, each wing average taken over `m_inner` redraws.
pub fn estimate_correlation_eq4(
    sim: &Simulator,
    a: AnalyzerSetting,
    b: AnalyzerSetting,
    n_outer: usize,
    m_inner: usize,
    seed: u64,
) -> Result<CorrelationEstimate> {
    sim.require_factorized()?;
    check_count("n_outer", n_outer)?;
    check_count("m_inner", m_inner)?;
    let outer = derive_seed(seed, OUTER_TAG);
    let seed_a = derive_seed(seed, WING_A_TAG);
    let seed_b = derive_seed(seed, WING_B_TAG);
    let products = map_indexed(sim.threads(), n_outer, |i| {
        let lambda_c = sim.sample_sigma_c(&mut trial_rng(outer, i))?;
        let avg_a = conditional_mean(sim, a, Wing::A, &lambda_c, m_inner, derive_seed(seed_a, i))?;
        let avg_b = conditional_mean(sim, b, Wing::B, &lambda_c, m_inner, derive_seed(seed_b, i))?;
        Ok(avg_a * avg_b)
    })?;
    Ok(CorrelationEstimate::from_values(&products))
}
