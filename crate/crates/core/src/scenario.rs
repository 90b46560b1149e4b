//! Scenario configuration and its strict JSON schema.
//!
//! ```json
//! {
//!   "kind": "local-field",
//!   "geometry": {"D": 1.0, "beta": 0.5, "t_align": 0.0},
//!   "lattice": {"x_min": -3.25, "x_max": 3.25, "n": 257},
//!   "covariance": {"sigma": 1.0, "xi": 0.25, "rho_cross": 0.0, "mode": "factorized"},
//!   "langevin": {"drift_rate": 0.0, "noise_sigma": 0.1, "noise_bound": 0.3, "dt": 0.5},
//!   "angles": {"a": 0.0, "a_prime": 1.5707963267948966, "b": 0.7853981633974483, "b_prime": 2.356194490192345}
//! }
//! ```
//!
//! Unknown keys are rejected at every level. `lattice`, `covariance` and
//! `langevin` are only accepted for `local-field`.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{CovarianceSpec, Lattice};
use crate::geometry::{experiment_domains, ExperimentGeometry};
use crate::propagation::LangevinSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    /// Gaussian initial fields, propagated and measured locally.
    LocalField,
    /// Outcomes drawn from `P(A,B|a,b) = (1 − AB cos(a − b))/4`.
    SingletOracle,
    /// Popescu–Rohrlich box.
    PrBox,
    /// Both wings read a common uniformly random phase.
    SharedPhase,
}

impl ScenarioKind {
    pub fn is_oracle(self) -> bool {
        self != ScenarioKind::LocalField
    }

    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::LocalField => "local-field",
            ScenarioKind::SingletOracle => "singlet-oracle",
            ScenarioKind::PrBox => "pr-box",
            ScenarioKind::SharedPhase => "shared-phase",
        }
    }
}

/// Analyzer angles in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Angles {
    pub a: f64,
    pub a_prime: f64,
    pub b: f64,
    pub b_prime: f64,
}

impl Default for Angles {
    /// `(0, π/2, π/4, 3π/4)`, where the singlet reaches `2√2`.
    fn default() -> Self {
        Angles {
            a: 0.0,
            a_prime: FRAC_PI_2,
            b: FRAC_PI_4,
            b_prime: 3.0 * FRAC_PI_4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub kind: ScenarioKind,
    pub geometry: ExperimentGeometry,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lattice: Option<Lattice>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub covariance: Option<CovarianceSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub langevin: Option<LangevinSpec>,
    #[serde(default)]
    pub angles: Angles,
}

fn at<T>(field: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| {
        let msg = match e {
            Error::Domain(m) | Error::Config(m) => m,
            other => other.to_string(),
        };
        Error::Config(format!("{field}: {msg}"))
    })
}

impl Scenario {
    pub fn oracle(kind: ScenarioKind, geometry: ExperimentGeometry) -> Self {
        Scenario {
            kind,
            geometry,
            lattice: None,
            covariance: None,
            langevin: None,
            angles: Angles::default(),
        }
    }

    pub fn local_field(geometry: ExperimentGeometry, covariance: CovarianceSpec) -> Self {
        Scenario {
            kind: ScenarioKind::LocalField,
            geometry,
            lattice: None,
            covariance: Some(covariance),
            langevin: None,
            angles: Angles::default(),
        }
    }

    pub fn with_lattice(mut self, lattice: Lattice) -> Self {
        self.lattice = Some(lattice);
        self
    }

    pub fn with_langevin(mut self, langevin: LangevinSpec) -> Self {
        self.langevin = Some(langevin);
        self
    }

    pub fn with_angles(mut self, angles: Angles) -> Self {
        self.angles = angles;
        self
    }

    /// Physical and kind-specific checks, reported with the offending field path.
    pub fn validate(&self) -> Result<()> {
        at("geometry", self.geometry.validate())?;
        let g = &self.geometry;
        if let Some(c) = &g.choice_events {
            at("geometry.choice_events.a", c.a.validate())?;
            at("geometry.choice_events.b", c.b.validate())?;
        }
        for (name, v) in [
            ("angles.a", self.angles.a),
            ("angles.a_prime", self.angles.a_prime),
            ("angles.b", self.angles.b),
            ("angles.b_prime", self.angles.b_prime),
        ] {
            if !v.is_finite() {
                return Err(Error::Config(format!("{name}: angle must be finite")));
            }
        }
        if self.kind.is_oracle() {
            for (present, key) in [
                (self.lattice.is_some(), "lattice"),
                (self.covariance.is_some(), "covariance"),
                (self.langevin.is_some(), "langevin"),
            ] {
                if present {
                    return Err(Error::Config(format!(
                        "{key}: not allowed for kind {}",
                        self.kind.name()
                    )));
                }
            }
            return Ok(());
        }
        let cov = self.effective_covariance();
        at("covariance", cov.validate())?;
        let lattice = self.effective_lattice();
        at("lattice", lattice.validate())?;
        let support = experiment_domains(g)?.support();
        if let Some((lo, hi)) = support.hull() {
            if !lattice.spans(lo, hi) {
                return Err(Error::Config(format!(
                    "lattice: [{}, {}] does not cover the causal support {support}",
                    lattice.x_min, lattice.x_max
                )));
            }
        }
        if let Some(l) = &self.langevin {
            at("langevin", l.steps_for(g.measurement_time()).map(|_| ()))?;
        }
        Ok(())
    }

    /// Covariance in force for a local-field scenario (the default when absent).
    pub fn effective_covariance(&self) -> CovarianceSpec {
        self.covariance.unwrap_or_default()
    }

    pub fn effective_lattice(&self) -> Lattice {
        self.lattice
            .unwrap_or_else(|| Lattice::default_for(&self.geometry, self.effective_covariance().xi))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Parses and validates a scenario document.
pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let sc: Scenario =
        serde_json::from_str(text).map_err(|e| Error::Config(format!("scenario schema: {e}")))?;
    sc.validate()?;
    Ok(sc)
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_scenario(&text)
}
