//! Causal evolution of the Cauchy data.
//!
//! The field obeys the 1+1D wave equation with unit speed, whose solution is
//! d'Alembert's formula
//!
//! ```text
//! λ(x, t) = ½[λ₀(x − t) + λ₀(x + t)] + ½ ∫_{x−t}^{x+t} v₀(s) ds
//! ```
//!
//! The lattice data is reconstructed piecewise linearly, using only nodes that
//! lie inside the cone base `[x − t, x + t]`. Between inner nodes this is plain
//! linear interpolation; in the partial cells at the two ends the line through
//! the two innermost nodes is extended to the cone boundary. A node strictly
//! outside the cone base is therefore never read, which makes the dependence
//! support of the discrete propagator exactly the past light-cone base.

use std::io::Write;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{InitialFieldConfiguration, Lattice, SNAP_TOLERANCE};
use crate::geometry::{past_light_cone_base, CausalDomain, Event};

/// Two-component field value at a spacetime point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldValue {
    pub lambda1: f64,
    pub lambda2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PropagatedField {
    pub event: Event,
    pub value: FieldValue,
}

/// Initial data that `propagate(·, e)` may depend on.
pub fn dependence_support(e: Event) -> Result<CausalDomain> {
    past_light_cone_base(e)
}

/// Lattice nodes inside a cone base, with the geometry of the two end cells.
struct ConeWindow {
    lo: f64,
    hi: f64,
    first: usize,
    last: usize,
}

impl ConeWindow {
    fn new(lattice: &Lattice, lo: f64, hi: f64) -> Result<Self> {
        if !lattice.spans(lo, hi) {
            return Err(Error::Config(format!(
                "cone base [{lo}, {hi}] exceeds the lattice [{}, {}]",
                lattice.x_min, lattice.x_max
            )));
        }
        let last_index = lattice.n - 1;
        let mut first = (lattice.position(lo).ceil().max(0.0) as usize).min(last_index);
        while first > 0 && lattice.x(first - 1) >= lo {
            first -= 1;
        }
        while first < last_index && lattice.x(first) < lo {
            first += 1;
        }
        let mut last = (lattice.position(hi).floor().max(0.0) as usize).min(last_index);
        while last < last_index && lattice.x(last + 1) <= hi {
            last += 1;
        }
        while last > 0 && lattice.x(last) > hi {
            last -= 1;
        }
        if lattice.x(first) < lo || lattice.x(last) > hi || first > last {
            return Err(Error::Config(format!(
                "cone base [{lo}, {hi}] contains no lattice node"
            )));
        }
        Ok(ConeWindow {
            lo,
            hi,
            first,
            last,
        })
    }

    /// Reconstructed value at the lower cone boundary.
    fn value_at_lo(&self, lattice: &Lattice, data: &[f64]) -> f64 {
        let x0 = lattice.x(self.first);
        let gap = x0 - self.lo;
        if gap <= SNAP_TOLERANCE * lattice.spacing() || self.first == self.last {
            return data[self.first];
        }
        let x1 = lattice.x(self.first + 1);
        let slope = (data[self.first + 1] - data[self.first]) / (x1 - x0);
        data[self.first] - slope * gap
    }

    fn value_at_hi(&self, lattice: &Lattice, data: &[f64]) -> f64 {
        let x0 = lattice.x(self.last);
        let gap = self.hi - x0;
        if gap <= SNAP_TOLERANCE * lattice.spacing() || self.first == self.last {
            return data[self.last];
        }
        let xm = lattice.x(self.last - 1);
        let slope = (data[self.last] - data[self.last - 1]) / (x0 - xm);
        data[self.last] + slope * gap
    }

    /// Trapezoid integral of the reconstruction over `[lo, hi]`.
    fn integral(&self, lattice: &Lattice, data: &[f64]) -> f64 {
        let mut sum = 0.0;
        let mut prev_x = self.lo;
        let mut prev_v = self.value_at_lo(lattice, data);
        for (i, &v) in data.iter().enumerate().take(self.last + 1).skip(self.first) {
            let x = lattice.x(i);
            sum += 0.5 * (prev_v + v) * (x - prev_x);
            prev_x = x;
            prev_v = v;
        }
        sum + 0.5 * (prev_v + self.value_at_hi(lattice, data)) * (self.hi - prev_x)
    }

    fn dalembert(&self, lattice: &Lattice, field: &[f64], velocity: Option<&[f64]>) -> f64 {
        let edges = 0.5 * (self.value_at_lo(lattice, field) + self.value_at_hi(lattice, field));
        match velocity {
            Some(v) => edges + 0.5 * self.integral(lattice, v),
            None => edges,
        }
    }
}

/// Evaluates the field at `e` from the Cauchy data `f`.
pub fn propagate(f: &InitialFieldConfiguration, e: Event) -> Result<PropagatedField> {
    e.validate()?;
    let lattice = &f.lattice;
    let window = ConeWindow::new(lattice, e.x - e.t, e.x + e.t)?;
    let velocity = f.velocity.as_deref();
    Ok(PropagatedField {
        event: e,
        value: FieldValue {
            lambda1: window.dalembert(lattice, &f.lambda1, velocity),
            lambda2: window.dalembert(lattice, &f.lambda2, velocity),
        },
    })
}

/// Debug dump of propagated values: `x,t,lambda1,lambda2`.
pub fn write_propagated_csv<W: Write>(
    f: &InitialFieldConfiguration,
    events: &[Event],
    w: W,
) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["x", "t", "lambda1", "lambda2"])?;
    for &e in events {
        let p = propagate(f, e)?;
        out.write_record([
            e.x.to_string(),
            e.t.to_string(),
            p.value.lambda1.to_string(),
            p.value.lambda2.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Bounded-noise Euler–Maruyama relaxation of the Cauchy data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LangevinSpec {
    pub drift_rate: f64,
    pub noise_sigma: f64,
    pub noise_bound: f64,
    pub dt: f64,
}

impl LangevinSpec {
    pub fn validate(&self) -> Result<()> {
        let nonneg = |name: &str, v: f64| {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(Error::Config(format!(
                    "{name} must be finite and >= 0, got {v}"
                )))
            }
        };
        let pos = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::Config(format!(
                    "{name} must be finite and > 0, got {v}"
                )))
            }
        };
        nonneg("drift_rate", self.drift_rate)?;
        nonneg("noise_sigma", self.noise_sigma)?;
        pos("noise_bound", self.noise_bound)?;
        pos("dt", self.dt)
    }

    /// Number of steps of size `dt` covering `t_end`; `dt` must divide `t_end`
    /// to within 1e-12.
    pub fn steps_for(&self, t_end: f64) -> Result<usize> {
        self.validate()?;
        if !t_end.is_finite() || t_end < 0.0 {
            return Err(Error::Config(format!("t_end must be >= 0, got {t_end}")));
        }
        let k = (t_end / self.dt).round();
        if (k * self.dt - t_end).abs() > 1e-12 {
            return Err(Error::Config(format!(
                "dt = {} does not divide t_end = {t_end}",
                self.dt
            )));
        }
        Ok(k as usize)
    }

    /// Runs `steps` updates of one value, reporting each clipped noise increment.
    pub(crate) fn evolve_value<R, F>(&self, v: &mut f64, steps: usize, rng: &mut R, observe: &mut F)
    where
        R: Rng + ?Sized,
        F: FnMut(f64),
    {
        let scale = self.noise_sigma * self.dt.sqrt();
        for _ in 0..steps {
            if self.drift_rate != 0.0 {
                *v -= self.drift_rate * *v * self.dt;
            }
            if self.noise_sigma != 0.0 {
                let g: f64 = rng.sample(StandardNormal);
                let dw = (scale * g).clamp(-self.noise_bound, self.noise_bound);
                observe(dw);
                *v += dw;
            }
        }
    }
}

/// Field state at `t_end` under the Langevin pre-evolution.
pub fn evolve_langevin<R: Rng + ?Sized>(
    f: &InitialFieldConfiguration,
    spec: &LangevinSpec,
    t_end: f64,
    rng: &mut R,
) -> Result<InitialFieldConfiguration> {
    evolve_langevin_observed(f, spec, t_end, rng, |_| {})
}

/// Like [`evolve_langevin`], passing every noise increment to `observe`.
pub fn evolve_langevin_observed<R, F>(
    f: &InitialFieldConfiguration,
    spec: &LangevinSpec,
    t_end: f64,
    rng: &mut R,
    mut observe: F,
) -> Result<InitialFieldConfiguration>
where
    R: Rng + ?Sized,
    F: FnMut(f64),
{
    let steps = spec.steps_for(t_end)?;
    let mut out = f.clone();
    for v in out.lambda1.iter_mut().chain(out.lambda2.iter_mut()) {
        spec.evolve_value(v, steps, rng, &mut observe);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::trial_rng;

    fn lattice() -> Lattice {
        Lattice::new(-8.0, 8.0, 65).unwrap()
    }

    fn constant(c: f64, v: Option<f64>) -> InitialFieldConfiguration {
        let l = lattice();
        InitialFieldConfiguration::new(l, vec![c; l.n], vec![-c; l.n], v.map(|v| vec![v; l.n]))
            .unwrap()
    }

    #[test]
    fn constant_data_is_stationary() {
        let f = constant(1.7, None);
        for e in [
            Event { x: 0.3, t: 2.9 },
            Event { x: -1.0, t: 0.0 },
            Event { x: 2.0, t: 5.5 },
        ] {
            let p = propagate(&f, e).unwrap();
            assert_eq!(p.value.lambda1, 1.7);
            assert_eq!(p.value.lambda2, -1.7);
        }
    }

    #[test]
    fn constant_velocity_grows_linearly() {
        let f = constant(0.0, Some(0.8));
        let p = propagate(&f, Event { x: 0.1, t: 3.3 }).unwrap();
        assert!((p.value.lambda1 - 0.8 * 3.3).abs() < 1e-12);
        assert!((p.value.lambda2 - 0.8 * 3.3).abs() < 1e-12);
    }

    #[test]
    fn bump_splits_along_characteristics() {
        let l = lattice();
        let mut f = InitialFieldConfiguration::zeros(l);
        let i0 = l.node_at(-2.0).unwrap();
        f.lambda1[i0] = 3.0;
        // Left end of the cone base sits on the bump; the right end is far away.
        let p = propagate(&f, Event { x: 1.0, t: 3.0 }).unwrap();
        assert_eq!(p.value.lambda1, 1.5);
        assert_eq!(p.value.lambda2, 0.0);
    }

    #[test]
    fn time_zero_reproduces_nodes() {
        let l = lattice();
        let vals: Vec<f64> = (0..l.n).map(|i| (i as f64 * 0.37).sin()).collect();
        let f = InitialFieldConfiguration::new(l, vals.clone(), vals.clone(), Some(vals.clone()))
            .unwrap();
        for (i, &v) in vals.iter().enumerate() {
            let p = propagate(&f, Event { x: l.x(i), t: 0.0 }).unwrap();
            assert_eq!(p.value.lambda1, v);
        }
    }

    #[test]
    fn exterior_data_is_ignored() {
        let l = lattice();
        let e = Event { x: 1.0, t: 2.0 };
        let support = dependence_support(e).unwrap();
        let mut f = constant(0.5, Some(0.2));
        let before = propagate(&f, e).unwrap();
        let i5 = l.node_at(5.0).unwrap();
        f.lambda1[i5] = 100.0;
        f.velocity.as_mut().unwrap()[i5] = -7.0;
        assert!(!support.contains(5.0));
        assert_eq!(propagate(&f, e).unwrap(), before);

        let i0 = l.node_at(0.0).unwrap();
        f.velocity.as_mut().unwrap()[i0] = 9.0;
        assert_ne!(propagate(&f, e).unwrap(), before);
    }

    #[test]
    fn dependence_support_is_cone_base() {
        let s = dependence_support(Event { x: 1.0, t: 2.0 }).unwrap();
        assert_eq!(s.hull(), Some((-1.0, 3.0)));
    }

    #[test]
    fn off_lattice_cone_is_config_error() {
        let f = constant(1.0, None);
        assert!(matches!(
            propagate(&f, Event { x: 7.0, t: 2.0 }),
            Err(Error::Config(_))
        ));
        // A cone thinner than a cell with no node inside.
        assert!(matches!(
            propagate(&f, Event { x: 0.1, t: 0.01 }),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            propagate(&f, Event { x: 0.0, t: -1.0 }),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn smooth_data_is_second_order_accurate() {
        // λ₀ = sin x, v₀ = cos x has exact solution sin(x + t).
        let l = Lattice::new(-10.0, 10.0, 2001).unwrap();
        let xs: Vec<f64> = l.points().collect();
        let f = InitialFieldConfiguration::new(
            l,
            xs.iter().map(|x| x.sin()).collect(),
            xs.iter().map(|x| x.sin()).collect(),
            Some(xs.iter().map(|x| x.cos()).collect()),
        )
        .unwrap();
        let e = Event { x: 0.123, t: 2.345 };
        let p = propagate(&f, e).unwrap();
        assert!((p.value.lambda1 - (e.x + e.t).sin()).abs() < 1e-4);
    }

    #[test]
    fn langevin_identity_and_decay() {
        let f = constant(2.0, None);
        let id = LangevinSpec {
            drift_rate: 0.0,
            noise_sigma: 0.0,
            noise_bound: 1.0,
            dt: 0.1,
        };
        assert_eq!(
            evolve_langevin(&f, &id, 2.0, &mut trial_rng(1, 1)).unwrap(),
            f
        );

        let decay = LangevinSpec {
            drift_rate: 0.3,
            ..id
        };
        let out = evolve_langevin(&f, &decay, 2.0, &mut trial_rng(1, 1)).unwrap();
        let expect = 2.0 * (1.0_f64 - 0.3 * 0.1).powi(20);
        assert!((out.lambda1[0] - expect).abs() < 1e-12);
        let other_seed = evolve_langevin(&f, &decay, 2.0, &mut trial_rng(99, 5)).unwrap();
        assert_eq!(out, other_seed);
    }

    #[test]
    fn langevin_increments_are_clipped() {
        let f = constant(0.0, None);
        let spec = LangevinSpec {
            drift_rate: 0.1,
            noise_sigma: 5.0,
            noise_bound: 0.2,
            dt: 0.25,
        };
        let mut seen = 0usize;
        let mut clipped = 0usize;
        evolve_langevin_observed(&f, &spec, 1.0, &mut trial_rng(4, 0), |dw| {
            seen += 1;
            assert!(dw.abs() <= 0.2);
            if dw.abs() == 0.2 {
                clipped += 1;
            }
        })
        .unwrap();
        assert_eq!(seen, 2 * 65 * 4);
        assert!(clipped > 0);
    }

    #[test]
    fn langevin_rejects_non_dividing_step() {
        let f = constant(0.0, None);
        let spec = LangevinSpec {
            drift_rate: 0.0,
            noise_sigma: 1.0,
            noise_bound: 1.0,
            dt: 0.3,
        };
        assert!(matches!(
            evolve_langevin(&f, &spec, 1.0, &mut trial_rng(0, 0)),
            Err(Error::Config(_))
        ));
    }
}
