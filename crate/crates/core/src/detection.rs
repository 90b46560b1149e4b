//! Analyzers, single trials and the wing-locality audit.
//!
//! A local-field trial samples Cauchy data, optionally runs the Langevin
//! pre-evolution to `T`, and lets each wing's [`WingFunctional`] look at the
//! world through a [`Probe`]. The probe is where accesses are recorded, so the
//! same functional that produces the statistics is the one that gets audited.

use std::f64::consts::TAU;
use std::fmt;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{
    build_covariance, Covariance, CovarianceMode, FieldSampler, InitialFieldConfiguration, Lattice,
    Region, VelocitySource,
};
use crate::geometry::{experiment_domains, Event, ExperimentDomains};
use crate::propagation::{propagate, FieldValue, LangevinSpec};
use crate::rng::trial_rng;
use crate::scenario::{Scenario, ScenarioKind};

/// Analyzer direction, reduced to `[0, 2π)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct AnalyzerSetting {
    angle: f64,
}

impl AnalyzerSetting {
    pub fn new(angle: f64) -> Self {
        let mut reduced = angle.rem_euclid(TAU);
        if reduced >= TAU {
            reduced = 0.0;
        }
        AnalyzerSetting { angle: reduced }
    }

    pub fn angle(&self) -> f64 {
        self.angle
    }
}

/// A `±1` measurement result.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Outcome {
    Up,
    Down,
}

impl Outcome {
    /// `sign(x)` with `sign(0) = +1`.
    pub fn from_sign(x: f64) -> Self {
        if x >= 0.0 {
            Outcome::Up
        } else {
            Outcome::Down
        }
    }

    pub fn value(self) -> i8 {
        match self {
            Outcome::Up => 1,
            Outcome::Down => -1,
        }
    }

    pub fn flip(self) -> Self {
        match self {
            Outcome::Up => Outcome::Down,
            Outcome::Down => Outcome::Up,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct OutcomePair {
    pub a: Outcome,
    pub b: Outcome,
}

impl OutcomePair {
    pub fn product(&self) -> i8 {
        self.a.value() * self.b.value()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Wing {
    A,
    B,
}

impl Wing {
    fn index(self) -> usize {
        match self {
            Wing::A => 0,
            Wing::B => 1,
        }
    }

    pub fn other(self) -> Wing {
        match self {
            Wing::A => Wing::B,
            Wing::B => Wing::A,
        }
    }

    fn region(self) -> Region {
        match self {
            Wing::A => Region::SigmaA,
            Wing::B => Region::SigmaB,
        }
    }
}

impl fmt::Display for Wing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Wing::A => "A",
            Wing::B => "B",
        })
    }
}

/// Sign of the projection of the field onto the analyzer direction.
pub fn analyzer_outcome(v: FieldValue, s: AnalyzerSetting) -> Outcome {
    let (sin, cos) = s.angle().sin_cos();
    Outcome::from_sign(cos * v.lambda1 + sin * v.lambda2)
}

/// Something a wing functional read.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Access {
    Setting { wing: Wing },
    Field { x: f64, t: f64 },
}

impl fmt::Display for Access {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Access::Setting { wing } => write!(f, "setting of wing {wing}"),
            Access::Field { x, t } => write!(f, "field at (x={x}, t={t})"),
        }
    }
}

/// The view a wing functional has of one trial.
pub trait Probe {
    /// Wing being evaluated.
    fn wing(&self) -> Wing;
    /// That wing's detection event.
    fn detection_event(&self) -> Event;
    fn setting(&mut self, wing: Wing) -> Result<AnalyzerSetting>;
    /// Field propagated from the trial's Cauchy data to `e`.
    fn field_at(&mut self, e: Event) -> Result<FieldValue>;
}

/// Maps what a wing observes to its `±1` outcome.
pub trait WingFunctional: Send + Sync {
    fn outcome(&self, probe: &mut dyn Probe) -> Result<Outcome>;
}

/// Default functional: [`analyzer_outcome`] of the field at the wing's own
/// detection event, with the wing's own setting.
#[derive(Debug, Clone, Copy, Default)]
pub struct ProjectionAnalyzer;

impl WingFunctional for ProjectionAnalyzer {
    fn outcome(&self, probe: &mut dyn Probe) -> Result<Outcome> {
        let v = probe.field_at(probe.detection_event())?;
        let s = probe.setting(probe.wing())?;
        Ok(analyzer_outcome(v, s))
    }
}

struct TrialProbe<'a> {
    wing: Wing,
    data: &'a InitialFieldConfiguration,
    detection: [Event; 2],
    settings: [Option<AnalyzerSetting>; 2],
    log: Option<&'a mut Vec<Access>>,
}

impl Probe for TrialProbe<'_> {
    fn wing(&self) -> Wing {
        self.wing
    }

    fn detection_event(&self) -> Event {
        self.detection[self.wing.index()]
    }

    fn setting(&mut self, wing: Wing) -> Result<AnalyzerSetting> {
        if let Some(log) = self.log.as_deref_mut() {
            log.push(Access::Setting { wing });
        }
        self.settings[wing.index()].ok_or_else(|| {
            Error::Precondition(format!(
                "setting of wing {wing} is not available when evaluating wing {}",
                self.wing
            ))
        })
    }

    fn field_at(&mut self, e: Event) -> Result<FieldValue> {
        if let Some(log) = self.log.as_deref_mut() {
            log.push(Access::Field { x: e.x, t: e.t });
        }
        Ok(propagate(self.data, e)?.value)
    }
}

/// Field values on `Σ_c` at the time of propagation, shared by both wings.
#[derive(Debug, Clone, PartialEq)]
pub struct SigmaCFields {
    pub indices: Vec<usize>,
    pub lambda1: Vec<f64>,
    pub lambda2: Vec<f64>,
    /// Initial velocity on `Σ_c` (zeros when the velocity source is `Zero`).
    pub velocity: Vec<f64>,
}

pub(crate) struct LocalModel {
    pub(crate) lattice: Lattice,
    pub(crate) domains: ExperimentDomains,
    pub(crate) covariance: Covariance,
    sampler: FieldSampler,
    pub(crate) velocity: VelocitySource,
    pub(crate) langevin: Option<(LangevinSpec, usize)>,
    pub(crate) detection: [Event; 2],
}

impl LocalModel {
    fn build(sc: &Scenario) -> Result<Self> {
        let domains = experiment_domains(&sc.geometry)?;
        let lattice = sc.effective_lattice();
        let spec = sc.effective_covariance();
        let covariance = build_covariance(&spec, &lattice, &domains)?;
        let sampler = covariance.factorize()?;
        let langevin = match sc.langevin {
            Some(l) => Some((l, l.steps_for(sc.geometry.measurement_time())?)),
            None => None,
        };
        Ok(LocalModel {
            lattice,
            domains,
            covariance,
            sampler,
            velocity: spec.velocity,
            langevin,
            detection: [sc.geometry.detection_a(), sc.geometry.detection_b()],
        })
    }

    fn evolve<'v, R, I>(&self, values: I, rng: &mut R)
    where
        R: Rng + ?Sized,
        I: Iterator<Item = &'v mut f64>,
    {
        if let Some((spec, steps)) = &self.langevin {
            for v in values {
                spec.evolve_value(v, *steps, rng, &mut |_| {});
            }
        }
    }

    fn cauchy_data<R: Rng + ?Sized>(&self, rng: &mut R) -> InitialFieldConfiguration {
        let mut cfg = self.sampler.sample(rng);
        cfg.apply_velocity_source(self.velocity);
        self.evolve(cfg.lambda1.iter_mut().chain(cfg.lambda2.iter_mut()), rng);
        cfg
    }

    fn sigma_c<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<SigmaCFields> {
        let s = self.sampler.sample_region(Region::SigmaC, rng)?;
        let velocity = match self.velocity {
            VelocitySource::Zero => vec![0.0; s.indices.len()],
            VelocitySource::SecondComponent => s.lambda2.clone(),
        };
        let (mut lambda1, mut lambda2) = (s.lambda1, s.lambda2);
        self.evolve(lambda1.iter_mut().chain(lambda2.iter_mut()), rng);
        Ok(SigmaCFields {
            indices: s.indices,
            lambda1,
            lambda2,
            velocity,
        })
    }

    /// Cauchy data with `Σ_c` fixed and the wing's own block freshly drawn.
    fn wing_data<R: Rng + ?Sized>(
        &self,
        wing: Wing,
        lambda_c: &SigmaCFields,
        rng: &mut R,
    ) -> Result<InitialFieldConfiguration> {
        let own = self.sampler.sample_region(wing.region(), rng)?;
        let mut cfg = InitialFieldConfiguration::zeros(self.lattice);
        let mut velocity = vec![0.0; self.lattice.n];
        for (k, &i) in lambda_c.indices.iter().enumerate() {
            cfg.lambda1[i] = lambda_c.lambda1[k];
            cfg.lambda2[i] = lambda_c.lambda2[k];
            velocity[i] = lambda_c.velocity[k];
        }
        let mut l1 = own.lambda1;
        let mut l2 = own.lambda2;
        if self.velocity == VelocitySource::SecondComponent {
            for (k, &i) in own.indices.iter().enumerate() {
                velocity[i] = l2[k];
            }
        }
        self.evolve(l1.iter_mut().chain(l2.iter_mut()), rng);
        for (k, &i) in own.indices.iter().enumerate() {
            cfg.lambda1[i] = l1[k];
            cfg.lambda2[i] = l2[k];
        }
        if self.velocity == VelocitySource::SecondComponent {
            cfg.velocity = Some(velocity);
        }
        Ok(cfg)
    }
}

enum Model {
    Local(Box<LocalModel>),
    Oracle(ScenarioKind),
}

/// A validated scenario with its covariance factored, ready to run trials.
pub struct Simulator {
    scenario: Scenario,
    model: Model,
    functional: Arc<dyn WingFunctional>,
    custom_functional: bool,
    threads: usize,
}

impl Simulator {
    pub fn new(sc: &Scenario) -> Result<Self> {
        sc.validate()?;
        let model = match sc.kind {
            ScenarioKind::LocalField => Model::Local(Box::new(LocalModel::build(sc)?)),
            kind => Model::Oracle(kind),
        };
        Ok(Simulator {
            scenario: sc.clone(),
            model,
            functional: Arc::new(ProjectionAnalyzer),
            custom_functional: false,
            threads: 1,
        })
    }

    /// Replaces the analyzer functional used by local-field trials.
    pub fn with_functional(mut self, functional: Arc<dyn WingFunctional>) -> Self {
        self.functional = functional;
        self.custom_functional = true;
        self
    }

    /// Worker threads for trial maps (1 = sequential).
    pub fn with_threads(mut self, threads: usize) -> Self {
        self.threads = threads.max(1);
        self
    }

    pub fn threads(&self) -> usize {
        self.threads
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn kind(&self) -> ScenarioKind {
        self.scenario.kind
    }

    pub(crate) fn uses_projection_analyzer(&self) -> bool {
        !self.custom_functional
    }

    pub(crate) fn local(&self) -> Result<&LocalModel> {
        match &self.model {
            Model::Local(m) => Ok(m),
            Model::Oracle(kind) => Err(Error::Precondition(format!(
                "operation needs a local-field scenario, got {}",
                kind.name()
            ))),
        }
    }

    /// Domains of the scenario geometry (local-field only).
    pub fn domains(&self) -> Result<&ExperimentDomains> {
        Ok(&self.local()?.domains)
    }

    /// Requires the factorized covariance under which `Σ_a`, `Σ_b`, `Σ_c` are independent.
    pub(crate) fn require_factorized(&self) -> Result<&LocalModel> {
        let m = self.local()?;
        if m.covariance.spec.mode != CovarianceMode::Factorized {
            return Err(Error::Precondition(
                "covariance is not factorized: Σ_a, Σ_b and Σ_c are not independent".into(),
            ));
        }
        Ok(m)
    }

    /// Samples the Cauchy data of one local-field trial (after any Langevin step).
    pub fn sample_cauchy_data<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
    ) -> Result<InitialFieldConfiguration> {
        Ok(self.local()?.cauchy_data(rng))
    }

    /// One trial with settings `a` on wing A and `b` on wing B.
    pub fn trial<R: Rng + ?Sized>(
        &self,
        a: AnalyzerSetting,
        b: AnalyzerSetting,
        rng: &mut R,
    ) -> Result<OutcomePair> {
        match &self.model {
            Model::Local(m) => {
                let data = m.cauchy_data(rng);
                let settings = [Some(a), Some(b)];
                let out_a = self.evaluate(m, &data, Wing::A, settings, None)?;
                let out_b = self.evaluate(m, &data, Wing::B, settings, None)?;
                Ok(OutcomePair { a: out_a, b: out_b })
            }
            Model::Oracle(kind) => Ok(self.oracle_trial(*kind, a, b, rng)),
        }
    }

    fn evaluate(
        &self,
        m: &LocalModel,
        data: &InitialFieldConfiguration,
        wing: Wing,
        settings: [Option<AnalyzerSetting>; 2],
        log: Option<&mut Vec<Access>>,
    ) -> Result<Outcome> {
        let mut probe = TrialProbe {
            wing,
            data,
            detection: m.detection,
            settings,
            log,
        };
        self.functional.outcome(&mut probe)
    }

    fn oracle_trial<R: Rng + ?Sized>(
        &self,
        kind: ScenarioKind,
        a: AnalyzerSetting,
        b: AnalyzerSetting,
        rng: &mut R,
    ) -> OutcomePair {
        match kind {
            ScenarioKind::SingletOracle => {
                let out_a = if rng.random::<bool>() {
                    Outcome::Up
                } else {
                    Outcome::Down
                };
                // P(AB = -1) = (1 + cos(a - b)) / 2
                let p_anti = 0.5 * (1.0 + (a.angle() - b.angle()).cos());
                let out_b = if rng.random::<f64>() < p_anti {
                    out_a.flip()
                } else {
                    out_a
                };
                OutcomePair { a: out_a, b: out_b }
            }
            ScenarioKind::PrBox => {
                let out_a = if rng.random::<bool>() {
                    Outcome::Up
                } else {
                    Outcome::Down
                };
                let angles = &self.scenario.angles;
                let primed = a == AnalyzerSetting::new(angles.a_prime)
                    && b == AnalyzerSetting::new(angles.b_prime);
                let out_b = if primed { out_a.flip() } else { out_a };
                OutcomePair { a: out_a, b: out_b }
            }
            ScenarioKind::SharedPhase => {
                let phi = rng.random::<f64>() * TAU;
                OutcomePair {
                    a: Outcome::from_sign((a.angle() - phi).cos()),
                    b: Outcome::from_sign((b.angle() - phi).cos()).flip(),
                }
            }
            ScenarioKind::LocalField => unreachable!("local-field is not an oracle"),
        }
    }

    /// Draws the shared `Σ_c` fields for the block-averaged estimator.
    pub fn sample_sigma_c<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<SigmaCFields> {
        self.require_factorized()?.sigma_c(rng)
    }

    /// Outcome of one wing with `Σ_c` held fixed and the wing's own block resampled.
    /// The other wing's setting is not available to the functional.
    pub fn conditional_outcome<R: Rng + ?Sized>(
        &self,
        wing: Wing,
        setting: AnalyzerSetting,
        lambda_c: &SigmaCFields,
        rng: &mut R,
    ) -> Result<Outcome> {
        let m = self.require_factorized()?;
        let data = m.wing_data(wing, lambda_c, rng)?;
        let mut settings = [None, None];
        settings[wing.index()] = Some(setting);
        self.evaluate(m, &data, wing, settings, None)
    }
}

/// Builds a simulator for `sc` and runs a single trial.
pub fn run_trial<R: Rng + ?Sized>(
    sc: &Scenario,
    a: AnalyzerSetting,
    b: AnalyzerSetting,
    rng: &mut R,
) -> Result<OutcomePair> {
    Simulator::new(sc)?.trial(a, b, rng)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LocalityAudit {
    pub passed: bool,
    pub trials: usize,
    /// Accesses outside the wing's own setting and detection-event field.
    pub violations: Vec<String>,
}

/// Number of sampled trials per setting pair in the audit.
const AUDIT_TRIALS: u64 = 4;

/// Records what each wing's functional reads over all four setting pairs and
/// checks that wing A touches only setting `a` and the field at `(+D, T)`,
/// and symmetrically for wing B.
pub fn wing_locality_audit(sim: &Simulator, seed: u64) -> Result<LocalityAudit> {
    let m = sim.local().map_err(|_| {
        Error::Precondition(format!(
            "locality audit is not applicable to {} scenarios",
            sim.kind().name()
        ))
    })?;
    let angles = &sim.scenario.angles;
    let settings_a = [angles.a, angles.a_prime].map(AnalyzerSetting::new);
    let settings_b = [angles.b, angles.b_prime].map(AnalyzerSetting::new);
    let mut violations = Vec::new();
    let mut trials = 0;
    for &sa in &settings_a {
        for &sb in &settings_b {
            for k in 0..AUDIT_TRIALS {
                let data = m.cauchy_data(&mut trial_rng(seed, k));
                trials += 1;
                for wing in [Wing::A, Wing::B] {
                    let mut log = Vec::new();
                    // A functional that errors still leaves its trace in the log.
                    let _ = sim.evaluate(m, &data, wing, [Some(sa), Some(sb)], Some(&mut log));
                    let own = m.detection[wing.index()];
                    for access in log {
                        let allowed = match access {
                            Access::Setting { wing: w } => w == wing,
                            Access::Field { x, t } => x == own.x && t == own.t,
                        };
                        if !allowed {
                            violations.push(format!(
                                "wing {wing} read {access} (a={}, b={}, trial {k})",
                                sa.angle(),
                                sb.angle()
                            ));
                        }
                    }
                }
            }
        }
    }
    Ok(LocalityAudit {
        passed: violations.is_empty(),
        trials,
        violations,
    })
}
