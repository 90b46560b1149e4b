//! Exact Gaussian law of the fields at the two detection events.

use nalgebra::{DMatrix, DVector, Matrix4, SymmetricEigen, Vector4};
use rand::Rng;
use rand_distr::StandardNormal;

use super::estimate::{check_count, map_indexed, CorrelationEstimate};
use crate::detection::{analyzer_outcome, AnalyzerSetting, LocalModel, Simulator};
use crate::error::{Error, Result};
use crate::fields::{InitialFieldConfiguration, VelocitySource};
use crate::propagation::{propagate, FieldValue};
use crate::rng::trial_rng;

/// Joint covariance of `(λ₁(A), λ₂(A), λ₁(B), λ₂(B))`, with `A` and `B` the
/// detection events.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionLaw {
    pub covariance: Matrix4<f64>,
    root: Matrix4<f64>,
}

/// Coefficients of a detection value on the independent `λ₁` and `λ₂` node vectors.
type Response = [DVector<f64>; 2];

/// Linear response of `(λ₁, λ₂)` at an event to each lattice node. The
/// velocity, when present, is `λ₂` before any drift and feeds both components.
fn response(model: &LocalModel, event_index: usize, decay: f64) -> Result<[Response; 2]> {
    let n = model.lattice.n;
    let event = model.detection[event_index];
    let mut disp = DVector::zeros(n);
    let mut vel = DVector::zeros(n);
    for i in 0..n {
        let mut cfg = InitialFieldConfiguration::zeros(model.lattice);
        cfg.lambda1[i] = 1.0;
        disp[i] = propagate(&cfg, event)?.value.lambda1;
        if model.velocity == VelocitySource::SecondComponent {
            let mut cfg = InitialFieldConfiguration::zeros(model.lattice);
            let mut v = vec![0.0; n];
            v[i] = 1.0;
            cfg.velocity = Some(v);
            vel[i] = propagate(&cfg, event)?.value.lambda1;
        }
    }
    let disp = disp * decay;
    let zero = DVector::zeros(n);
    Ok([[disp.clone(), vel.clone()], [zero, disp + vel]])
}

impl DetectionLaw {
    pub(crate) fn from_model(model: &LocalModel) -> Result<Self> {
        let decay = match &model.langevin {
            Some((spec, _)) if spec.noise_sigma != 0.0 => {
                return Err(Error::Precondition(
                    "detection law needs noise-free Langevin evolution".into(),
                ))
            }
            Some((spec, steps)) if spec.drift_rate != 0.0 => {
                (1.0 - spec.drift_rate * spec.dt).powi(*steps as i32)
            }
            _ => 1.0,
        };
        let k: &DMatrix<f64> = &model.covariance.matrix;
        let [a1, a2] = response(model, 0, decay)?;
        let [b1, b2] = response(model, 1, decay)?;
        let g = [a1, a2, b1, b2];
        let mut cov = Matrix4::zeros();
        for (i, u) in g.iter().enumerate() {
            for (j, v) in g.iter().enumerate() {
                // The two components are independent with the same covariance.
                cov[(i, j)] = u[0].dot(&(k * &v[0])) + u[1].dot(&(k * &v[1]));
            }
        }
        let cov = (cov + cov.transpose()) * 0.5;
        let eig = SymmetricEigen::new(cov);
        let sqrt = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
        let root = eig.eigenvectors * Matrix4::from_diagonal(&sqrt) * eig.eigenvectors.transpose();
        Ok(DetectionLaw {
            covariance: cov,
            root,
        })
    }

    /// Law of the scenario behind `sim` (local-field, projection analyzer only).
    pub fn for_simulator(sim: &Simulator) -> Result<Self> {
        if !sim.uses_projection_analyzer() {
            return Err(Error::Precondition(
                "detection law is only available for the projection analyzer".into(),
            ));
        }
        Self::from_model(sim.local()?)
    }

    fn projections(&self, a: AnalyzerSetting, b: AnalyzerSetting) -> (f64, f64, f64) {
        let (sa, ca) = a.angle().sin_cos();
        let (sb, cb) = b.angle().sin_cos();
        let u = Vector4::new(ca, sa, 0.0, 0.0);
        let v = Vector4::new(0.0, 0.0, cb, sb);
        let c = &self.covariance;
        (u.dot(&(c * u)), v.dot(&(c * v)), u.dot(&(c * v)))
    }

    /// `E[A B]` for sign outcomes of jointly Gaussian projections.
    pub fn exact_correlation(&self, a: AnalyzerSetting, b: AnalyzerSetting) -> f64 {
        let (va, vb, cab) = self.projections(a, b);
        match (va > 0.0, vb > 0.0) {
            // Both projections vanish identically, so both outcomes are +1.
            (false, false) => 1.0,
            (true, true) => {
                let rho = (cab / (va * vb).sqrt()).clamp(-1.0, 1.0);
                std::f64::consts::FRAC_2_PI * rho.asin()
            }
            _ => 0.0,
        }
    }

    /// One draw of the four field values.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> [FieldValue; 2] {
        let z = Vector4::from_fn(|_, _| rng.sample::<f64, _>(StandardNormal));
        let x = self.root * z;
        [
            FieldValue {
                lambda1: x[0],
                lambda2: x[1],
            },
            FieldValue {
                lambda1: x[2],
                lambda2: x[3],
            },
        ]
    }
}

/// Correlation estimated by sampling the detection-event law directly.
pub fn estimate_correlation_measurement_time(
    sim: &Simulator,
    a: AnalyzerSetting,
    b: AnalyzerSetting,
    n: usize,
    seed: u64,
) -> Result<CorrelationEstimate> {
    check_count("n", n)?;
    let law = DetectionLaw::for_simulator(sim)?;
    let values = map_indexed(sim.threads(), n, |i| {
        let mut rng = trial_rng(seed, i);
        let [va, vb] = law.sample(&mut rng);
        Ok(f64::from(
            analyzer_outcome(va, a).value() * analyzer_outcome(vb, b).value(),
        ))
    })?;
    Ok(CorrelationEstimate::from_values(&values))
}
