//! Gaussian random initial fields on the discretized Cauchy slice.
//!
//! The two field components are independent zero-mean Gaussian random fields
//! with a squared-exponential kernel. Lattice points are tagged with the block
//! (`Σ_a`, `Σ_b`, `Σ_c`) they fall in, and the covariance between blocks is
//! scaled by a coupling factor: zero in factorized mode, `rho_cross` in coupled
//! mode. For Gaussian fields, zero cross-block covariance is the same thing as
//! the density factorizing into one density per block.

use std::io::Write;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{ExperimentDomains, ExperimentGeometry};

pub const DEFAULT_LATTICE_POINTS: usize = 257;

/// Fraction of the lattice spacing within which a position snaps to a node.
pub const SNAP_TOLERANCE: f64 = 1e-9;

/// Relative diagonal jitter (times `σ²`) added before the Cholesky factorization.
pub const PSD_JITTER: f64 = 1e-10;

/// Uniform grid of `n` points on `[x_min, x_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Lattice {
    pub x_min: f64,
    pub x_max: f64,
    pub n: usize,
}

impl Lattice {
    pub fn new(x_min: f64, x_max: f64, n: usize) -> Result<Self> {
        let l = Lattice { x_min, x_max, n };
        l.validate()?;
        Ok(l)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.x_min.is_finite() || !self.x_max.is_finite() || self.x_min >= self.x_max {
            return Err(Error::Config(format!(
                "lattice needs finite x_min < x_max, got [{}, {}]",
                self.x_min, self.x_max
            )));
        }
        if self.n < 2 {
            return Err(Error::Config(format!(
                "lattice needs n >= 2 points, got {}",
                self.n
            )));
        }
        Ok(())
    }

    /// Default grid `[-(D+T) - ξ, (D+T) + ξ]` with 257 points.
    pub fn default_for(g: &ExperimentGeometry, xi: f64) -> Self {
        let half = g.d + g.measurement_time() + xi;
        Lattice {
            x_min: -half,
            x_max: half,
            n: DEFAULT_LATTICE_POINTS,
        }
    }

    pub fn spacing(&self) -> f64 {
        (self.x_max - self.x_min) / (self.n - 1) as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        if i + 1 == self.n {
            self.x_max
        } else {
            self.x_min + i as f64 * self.spacing()
        }
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(|i| self.x(i))
    }

    /// Fractional index of position `x`.
    pub fn position(&self, x: f64) -> f64 {
        (x - self.x_min) / self.spacing()
    }

    /// Index of the node at `x`, if `x` is a node up to [`SNAP_TOLERANCE`].
    pub fn node_at(&self, x: f64) -> Option<usize> {
        let p = self.position(x);
        let r = p.round();
        ((p - r).abs() <= SNAP_TOLERANCE && r >= 0.0 && r <= (self.n - 1) as f64)
            .then_some(r as usize)
    }

    pub fn spans(&self, lo: f64, hi: f64) -> bool {
        self.x_min <= lo && hi <= self.x_max
    }
}

/// The three disjoint blocks of the causal support.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Region {
    #[serde(rename = "sigma_a")]
    SigmaA,
    #[serde(rename = "sigma_b")]
    SigmaB,
    #[serde(rename = "sigma_c")]
    SigmaC,
}

impl Region {
    pub const ALL: [Region; 3] = [Region::SigmaA, Region::SigmaB, Region::SigmaC];
}

/// Block membership of every lattice point; `None` outside `Ω_a ∪ Ω_b`.
pub fn region_layout(lattice: &Lattice, domains: &ExperimentDomains) -> Vec<Option<Region>> {
    lattice
        .points()
        .map(|x| {
            if domains.sigma_c.contains(x) {
                Some(Region::SigmaC)
            } else if domains.sigma_a.contains(x) {
                Some(Region::SigmaA)
            } else if domains.sigma_b.contains(x) {
                Some(Region::SigmaB)
            } else {
                None
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CovarianceMode {
    /// Zero covariance across block boundaries.
    Factorized,
    /// Cross-block covariance scaled by `rho_cross`.
    Coupled,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kernel {
    #[default]
    SquaredExponential,
}

/// Where the initial time-derivative `v₀` of the Cauchy data comes from.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VelocitySource {
    /// `v₀ ≡ 0`: outcomes see only the two cone-boundary points.
    Zero,
    /// `v₀` copies the sampled second component, so the whole cone base matters.
    #[default]
    SecondComponent,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CovarianceSpec {
    pub sigma: f64,
    pub xi: f64,
    #[serde(default)]
    pub rho_cross: f64,
    pub mode: CovarianceMode,
    #[serde(default)]
    pub kernel: Kernel,
    #[serde(default)]
    pub velocity: VelocitySource,
}

impl Default for CovarianceSpec {
    fn default() -> Self {
        CovarianceSpec {
            sigma: 1.0,
            xi: 0.25,
            rho_cross: 0.0,
            mode: CovarianceMode::Factorized,
            kernel: Kernel::SquaredExponential,
            velocity: VelocitySource::SecondComponent,
        }
    }
}

impl CovarianceSpec {
    pub fn factorized(sigma: f64, xi: f64) -> Self {
        CovarianceSpec {
            sigma,
            xi,
            ..Default::default()
        }
    }

    pub fn coupled(sigma: f64, xi: f64, rho_cross: f64) -> Self {
        CovarianceSpec {
            sigma,
            xi,
            rho_cross,
            mode: CovarianceMode::Coupled,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.sigma.is_finite() || self.sigma < 0.0 {
            return Err(Error::Config(format!(
                "sigma must be >= 0, got {}",
                self.sigma
            )));
        }
        if !self.xi.is_finite() || self.xi <= 0.0 {
            return Err(Error::Config(format!("xi must be > 0, got {}", self.xi)));
        }
        if !(0.0..=1.0).contains(&self.rho_cross) {
            return Err(Error::Config(format!(
                "rho_cross out of [0,1]: {}",
                self.rho_cross
            )));
        }
        if self.mode == CovarianceMode::Factorized && self.rho_cross != 0.0 {
            return Err(Error::Config(format!(
                "rho_cross must be 0 in factorized mode, got {}",
                self.rho_cross
            )));
        }
        Ok(())
    }

    fn coupling(&self, ri: Region, rj: Region) -> f64 {
        if ri == rj {
            1.0
        } else {
            match self.mode {
                CovarianceMode::Factorized => 0.0,
                CovarianceMode::Coupled => self.rho_cross,
            }
        }
    }

    fn kernel(&self, xi: f64, xj: f64) -> f64 {
        match self.kernel {
            Kernel::SquaredExponential => {
                let d = xi - xj;
                self.sigma * self.sigma * (-(d * d) / (2.0 * self.xi * self.xi)).exp()
            }
        }
    }
}

/// Per-component covariance of the initial fields on a lattice.
#[derive(Debug, Clone)]
pub struct Covariance {
    pub lattice: Lattice,
    pub spec: CovarianceSpec,
    pub regions: Vec<Option<Region>>,
    /// `n × n`; rows and columns of points outside the support are zero.
    pub matrix: DMatrix<f64>,
}

pub fn build_covariance(
    spec: &CovarianceSpec,
    lattice: &Lattice,
    domains: &ExperimentDomains,
) -> Result<Covariance> {
    spec.validate()?;
    lattice.validate()?;
    let support = domains.support();
    let (lo, hi) = support
        .hull()
        .ok_or_else(|| Error::Config("empty causal support".into()))?;
    if !lattice.spans(lo, hi) {
        return Err(Error::Config(format!(
            "lattice [{}, {}] does not cover the support {support}",
            lattice.x_min, lattice.x_max
        )));
    }
    let regions = region_layout(lattice, domains);
    let n = lattice.n;
    let xs: Vec<f64> = lattice.points().collect();
    let matrix = DMatrix::from_fn(n, n, |i, j| match (regions[i], regions[j]) {
        (Some(ri), Some(rj)) => {
            let m = spec.coupling(ri, rj);
            if m == 0.0 {
                0.0
            } else {
                m * spec.kernel(xs[i], xs[j])
            }
        }
        _ => 0.0,
    });
    Ok(Covariance {
        lattice: *lattice,
        spec: *spec,
        regions,
        matrix,
    })
}

impl Covariance {
    pub fn support_indices(&self) -> Vec<usize> {
        (0..self.lattice.n)
            .filter(|&i| self.regions[i].is_some())
            .collect()
    }

    pub fn region_indices(&self, region: Region) -> Vec<usize> {
        (0..self.lattice.n)
            .filter(|&i| self.regions[i] == Some(region))
            .collect()
    }

    /// Largest absolute covariance between points of different blocks.
    pub fn max_off_block(&self) -> f64 {
        let n = self.lattice.n;
        let mut worst = 0.0_f64;
        for i in 0..n {
            for j in 0..n {
                if let (Some(ri), Some(rj)) = (self.regions[i], self.regions[j]) {
                    if ri != rj {
                        worst = worst.max(self.matrix[(i, j)].abs());
                    }
                }
            }
        }
        worst
    }

    /// Cholesky-factors the support (per block in factorized mode).
    pub fn factorize(&self) -> Result<FieldSampler> {
        let groups: Vec<(Option<Region>, Vec<usize>)> = match self.spec.mode {
            CovarianceMode::Factorized => Region::ALL
                .iter()
                .map(|&r| (Some(r), self.region_indices(r)))
                .filter(|(_, idx)| !idx.is_empty())
                .collect(),
            CovarianceMode::Coupled => vec![(None, self.support_indices())],
        };
        let jitter = PSD_JITTER * self.spec.sigma * self.spec.sigma;
        let mut blocks = Vec::with_capacity(groups.len());
        for (region, indices) in groups {
            let m = indices.len();
            let lower = if self.spec.sigma == 0.0 {
                vec![0.0; m * (m + 1) / 2]
            } else {
                let sub = DMatrix::from_fn(m, m, |i, j| {
                    let v = self.matrix[(indices[i], indices[j])];
                    if i == j {
                        v + jitter
                    } else {
                        v
                    }
                });
                let chol = sub.cholesky().ok_or_else(|| {
                    Error::Numerical(format!(
                        "covariance block of {m} points is not positive definite after jitter"
                    ))
                })?;
                let l = chol.l();
                let mut packed = Vec::with_capacity(m * (m + 1) / 2);
                for r in 0..m {
                    for c in 0..=r {
                        packed.push(l[(r, c)]);
                    }
                }
                packed
            };
            blocks.push(FactorBlock {
                region,
                indices,
                lower,
            });
        }
        Ok(FieldSampler {
            lattice: self.lattice,
            mode: self.spec.mode,
            blocks,
        })
    }

    /// Long-format dump: `i,j,x_i,x_j,cov`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["i", "j", "x_i", "x_j", "cov"])?;
        for i in 0..self.lattice.n {
            for j in 0..self.lattice.n {
                out.write_record([
                    i.to_string(),
                    j.to_string(),
                    self.lattice.x(i).to_string(),
                    self.lattice.x(j).to_string(),
                    self.matrix[(i, j)].to_string(),
                ])?;
            }
        }
        out.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone)]
struct FactorBlock {
    region: Option<Region>,
    indices: Vec<usize>,
    /// Lower Cholesky factor, packed row by row.
    lower: Vec<f64>,
}

impl FactorBlock {
    fn draw<R: Rng + ?Sized>(&self, rng: &mut R, z: &mut Vec<f64>, out: &mut [f64]) {
        let m = self.indices.len();
        z.clear();
        z.extend((0..m).map(|_| rng.sample::<f64, _>(StandardNormal)));
        let mut offset = 0;
        for (r, &idx) in self.indices.iter().enumerate() {
            let row = &self.lower[offset..offset + r + 1];
            out[idx] = row.iter().zip(z.iter()).map(|(l, z)| l * z).sum();
            offset += r + 1;
        }
    }
}

/// Values of both components on one block of the support.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionSample {
    pub region: Region,
    pub indices: Vec<usize>,
    pub lambda1: Vec<f64>,
    pub lambda2: Vec<f64>,
}

/// A factored covariance ready for repeated sampling.
#[derive(Debug, Clone)]
pub struct FieldSampler {
    lattice: Lattice,
    mode: CovarianceMode,
    blocks: Vec<FactorBlock>,
}

impl FieldSampler {
    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn mode(&self) -> CovarianceMode {
        self.mode
    }

    /// Full configuration; component 1 is drawn before component 2, block by block.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> InitialFieldConfiguration {
        let mut cfg = InitialFieldConfiguration::zeros(self.lattice);
        let mut z = Vec::new();
        for block in &self.blocks {
            block.draw(rng, &mut z, &mut cfg.lambda1);
        }
        for block in &self.blocks {
            block.draw(rng, &mut z, &mut cfg.lambda2);
        }
        cfg
    }

    /// Draws one block on its own; only meaningful when blocks are independent.
    pub fn sample_region<R: Rng + ?Sized>(
        &self,
        region: Region,
        rng: &mut R,
    ) -> Result<RegionSample> {
        if self.mode != CovarianceMode::Factorized {
            return Err(Error::Precondition(
                "blocks can only be sampled separately under a factorized covariance".into(),
            ));
        }
        let Some(block) = self.blocks.iter().find(|b| b.region == Some(region)) else {
            return Ok(RegionSample {
                region,
                indices: Vec::new(),
                lambda1: Vec::new(),
                lambda2: Vec::new(),
            });
        };
        let mut l1 = vec![0.0; self.lattice.n];
        let mut l2 = vec![0.0; self.lattice.n];
        let mut z = Vec::new();
        block.draw(rng, &mut z, &mut l1);
        block.draw(rng, &mut z, &mut l2);
        Ok(RegionSample {
            region,
            indices: block.indices.clone(),
            lambda1: block.indices.iter().map(|&i| l1[i]).collect(),
            lambda2: block.indices.iter().map(|&i| l2[i]).collect(),
        })
    }
}

/// Factorizes `cov` and draws one configuration.
pub fn sample_initial_fields<R: Rng + ?Sized>(
    cov: &Covariance,
    rng: &mut R,
) -> Result<InitialFieldConfiguration> {
    Ok(cov.factorize()?.sample(rng))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FactorizationReport {
    pub factorized: bool,
    pub max_off_block: f64,
    pub tolerance: f64,
}

/// Whether the covariance is block-diagonal over `{Σ_a, Σ_b, Σ_c}` up to `tolerance`.
pub fn factorization_check(
    spec: &CovarianceSpec,
    lattice: &Lattice,
    domains: &ExperimentDomains,
    tolerance: f64,
) -> Result<FactorizationReport> {
    let cov = build_covariance(spec, lattice, domains)?;
    let max_off_block = cov.max_off_block();
    Ok(FactorizationReport {
        factorized: max_off_block <= tolerance,
        max_off_block,
        tolerance,
    })
}

/// Cauchy data on the lattice: two field components and an optional velocity.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialFieldConfiguration {
    pub lattice: Lattice,
    pub lambda1: Vec<f64>,
    pub lambda2: Vec<f64>,
    /// Initial time-derivative `v₀`; `None` means identically zero.
    pub velocity: Option<Vec<f64>>,
}

impl InitialFieldConfiguration {
    pub fn zeros(lattice: Lattice) -> Self {
        InitialFieldConfiguration {
            lattice,
            lambda1: vec![0.0; lattice.n],
            lambda2: vec![0.0; lattice.n],
            velocity: None,
        }
    }

    pub fn new(
        lattice: Lattice,
        lambda1: Vec<f64>,
        lambda2: Vec<f64>,
        velocity: Option<Vec<f64>>,
    ) -> Result<Self> {
        let cfg = InitialFieldConfiguration {
            lattice,
            lambda1,
            lambda2,
            velocity,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.lattice.validate()?;
        let n = self.lattice.n;
        let v_len = self.velocity.as_ref().map_or(n, Vec::len);
        if self.lambda1.len() != n || self.lambda2.len() != n || v_len != n {
            return Err(Error::Config(format!(
                "field arrays must have the lattice length {n}"
            )));
        }
        let all = self
            .lambda1
            .iter()
            .chain(&self.lambda2)
            .chain(self.velocity.iter().flatten());
        if all.clone().any(|v| !v.is_finite()) {
            return Err(Error::Config("field values must be finite".into()));
        }
        Ok(())
    }

    pub fn velocity_at(&self, i: usize) -> f64 {
        self.velocity.as_ref().map_or(0.0, |v| v[i])
    }

    pub fn apply_velocity_source(&mut self, source: VelocitySource) {
        self.velocity = match source {
            VelocitySource::Zero => None,
            VelocitySource::SecondComponent => Some(self.lambda2.clone()),
        };
    }

    /// Snapshot as `x,lambda1,lambda2,v0`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["x", "lambda1", "lambda2", "v0"])?;
        for i in 0..self.lattice.n {
            out.write_record([
                self.lattice.x(i).to_string(),
                self.lambda1[i].to_string(),
                self.lambda2[i].to_string(),
                self.velocity_at(i).to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::experiment_domains;
    use crate::rng::trial_rng;

    fn setup() -> (ExperimentDomains, Lattice) {
        let g = ExperimentGeometry::new(1.0, 0.5, 0.0).unwrap();
        let d = experiment_domains(&g).unwrap();
        (d, Lattice::new(-3.5, 3.5, 29).unwrap())
    }

    #[test]
    fn lattice_nodes() {
        let l = Lattice::new(-1.0, 1.0, 5).unwrap();
        assert_eq!(l.spacing(), 0.5);
        assert_eq!(l.x(4), 1.0);
        assert_eq!(l.node_at(0.5), Some(3));
        assert_eq!(l.node_at(0.25), None);
        assert!(Lattice::new(1.0, 1.0, 5).is_err());
        assert!(Lattice::new(0.0, 1.0, 1).is_err());
    }

    #[test]
    fn collapsed_kernel_is_diagonal() {
        let (d, l) = setup();
        let spec = CovarianceSpec::factorized(2.0, 1e-9 * l.spacing());
        let cov = build_covariance(&spec, &l, &d).unwrap();
        for i in 0..l.n {
            for j in 0..l.n {
                let expect = if i == j && cov.regions[i].is_some() {
                    4.0
                } else {
                    0.0
                };
                assert_eq!(cov.matrix[(i, j)], expect);
            }
        }
    }

    #[test]
    fn unit_kernel_diagonal() {
        let (d, l) = setup();
        let cov = build_covariance(&CovarianceSpec::factorized(1.0, 1.0), &l, &d).unwrap();
        let i = l.node_at(0.0).unwrap();
        assert_eq!(cov.matrix[(i, i)], 1.0);
    }

    #[test]
    fn factorized_cross_block_entries_are_zero() {
        let (d, l) = setup();
        let cov = build_covariance(&CovarianceSpec::factorized(1.0, 2.0), &l, &d).unwrap();
        let a = cov.region_indices(Region::SigmaA);
        let b = cov.region_indices(Region::SigmaB);
        let c = cov.region_indices(Region::SigmaC);
        assert!(!a.is_empty() && !b.is_empty() && !c.is_empty());
        for &i in &a {
            for &j in b.iter().chain(&c) {
                assert_eq!(cov.matrix[(i, j)].to_bits(), 0.0_f64.to_bits());
            }
        }
        assert_eq!(cov.max_off_block(), 0.0);
    }

    #[test]
    fn factorization_check_modes() {
        let (d, l) = setup();
        let r = factorization_check(&CovarianceSpec::factorized(1.0, 0.5), &l, &d, 0.0).unwrap();
        assert!(r.factorized);
        assert_eq!(r.max_off_block, 0.0);

        let r =
            factorization_check(&CovarianceSpec::coupled(1.0, 1.0, 0.5), &l, &d, 1e-12).unwrap();
        assert!(!r.factorized);
        assert!(r.max_off_block > 0.1);

        let r =
            factorization_check(&CovarianceSpec::coupled(1.0, 0.05, 0.0), &l, &d, 1e-12).unwrap();
        assert!(r.factorized);
    }

    #[test]
    fn rejects_bad_specs_and_coverage() {
        let (d, l) = setup();
        let mut s = CovarianceSpec::factorized(1.0, 0.5);
        s.rho_cross = 0.3;
        assert!(matches!(
            build_covariance(&s, &l, &d),
            Err(Error::Config(_))
        ));
        let narrow = Lattice::new(-2.0, 2.0, 17).unwrap();
        assert!(matches!(
            build_covariance(&CovarianceSpec::default(), &narrow, &d),
            Err(Error::Config(_))
        ));
        assert!(CovarianceSpec::factorized(-1.0, 1.0).validate().is_err());
        assert!(CovarianceSpec::factorized(1.0, 0.0).validate().is_err());
        assert!(CovarianceSpec::coupled(1.0, 1.0, 1.5).validate().is_err());
    }

    #[test]
    fn zero_sigma_gives_zero_field() {
        let (d, l) = setup();
        let cov = build_covariance(&CovarianceSpec::factorized(0.0, 0.5), &l, &d).unwrap();
        let f = sample_initial_fields(&cov, &mut trial_rng(1, 0)).unwrap();
        assert!(f.lambda1.iter().chain(&f.lambda2).all(|&v| v == 0.0));
    }

    #[test]
    fn sampling_is_seed_deterministic_with_compact_support() {
        let (d, l) = setup();
        let cov = build_covariance(&CovarianceSpec::coupled(1.0, 0.7, 0.4), &l, &d).unwrap();
        let sampler = cov.factorize().unwrap();
        let f1 = sampler.sample(&mut trial_rng(9, 2));
        let f2 = sampler.sample(&mut trial_rng(9, 2));
        assert_eq!(f1, f2);
        for i in 0..l.n {
            if cov.regions[i].is_none() {
                assert_eq!(f1.lambda1[i], 0.0);
                assert_eq!(f1.lambda2[i], 0.0);
            }
        }
        assert!(f1.lambda1.iter().any(|&v| v != 0.0));
    }

    #[test]
    fn single_point_variance() {
        // Monte Carlo check of a unit-variance Gaussian: sample variance of 4096
        // draws has standard error sqrt(2/4096) ≈ 0.022, so ±0.1 is > 4 SE.
        let (d, l) = setup();
        let cov = build_covariance(&CovarianceSpec::factorized(1.0, 0.5), &l, &d).unwrap();
        let sampler = cov.factorize().unwrap();
        let i = l.node_at(0.0).unwrap();
        let n = 4096;
        let xs: Vec<f64> = (0..n)
            .map(|k| sampler.sample(&mut trial_rng(3, k)).lambda1[i])
            .collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!((var - 1.0).abs() < 0.1, "variance {var}");
    }

    #[test]
    fn region_sampling_requires_factorized() {
        let (d, l) = setup();
        let cov = build_covariance(&CovarianceSpec::coupled(1.0, 0.5, 0.5), &l, &d).unwrap();
        let s = cov.factorize().unwrap();
        assert!(matches!(
            s.sample_region(Region::SigmaA, &mut trial_rng(0, 0)),
            Err(Error::Precondition(_))
        ));
        let cov = build_covariance(&CovarianceSpec::factorized(1.0, 0.5), &l, &d).unwrap();
        let s = cov.factorize().unwrap();
        let r = s
            .sample_region(Region::SigmaA, &mut trial_rng(0, 0))
            .unwrap();
        assert_eq!(r.indices, cov.region_indices(Region::SigmaA));
    }

    #[test]
    fn snapshot_csv_header() {
        let l = Lattice::new(0.0, 1.0, 2).unwrap();
        let mut buf = Vec::new();
        InitialFieldConfiguration::zeros(l)
            .write_csv(&mut buf)
            .unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("x,lambda1,lambda2,v0\n0,0,0,0\n"));
    }
}
