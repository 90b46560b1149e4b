//! Linearity, causality and Langevin properties of propagation.

use eprb_core::fields::{InitialFieldConfiguration, Lattice};
use eprb_core::geometry::Event;
use eprb_core::propagation::{
    dependence_support, evolve_langevin, evolve_langevin_observed, propagate, LangevinSpec,
};
use eprb_core::rng::trial_rng;
use proptest::prelude::*;

const N: usize = 65;

fn lattice() -> Lattice {
    Lattice::new(-4.0, 4.0, N).unwrap()
}

fn values() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0f64..10.0, N)
}

fn config() -> impl Strategy<Value = InitialFieldConfiguration> {
    (values(), values(), prop::option::of(values()))
        .prop_map(|(l1, l2, v)| InitialFieldConfiguration::new(lattice(), l1, l2, v).unwrap())
}

fn event() -> impl Strategy<Value = Event> {
    (-1.5f64..1.5, 0.13f64..2.4).prop_map(|(x, t)| Event::new(x, t).unwrap())
}

fn combine(a: f64, f: &[f64], b: f64, g: &[f64]) -> Vec<f64> {
    f.iter().zip(g).map(|(x, y)| a * x + b * y).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn propagation_is_linear(
        f in config(),
        g in config(),
        a in -3.0f64..3.0,
        b in -3.0f64..3.0,
        e in event(),
    ) {
        let v = match (&f.velocity, &g.velocity) {
            (None, None) => None,
            (fv, gv) => {
                let z = vec![0.0; N];
                Some(combine(a, fv.as_deref().unwrap_or(&z), b, gv.as_deref().unwrap_or(&z)))
            }
        };
        let h = InitialFieldConfiguration::new(
            lattice(),
            combine(a, &f.lambda1, b, &g.lambda1),
            combine(a, &f.lambda2, b, &g.lambda2),
            v,
        ).unwrap();
        let (pf, pg, ph) = (
            propagate(&f, e).unwrap().value,
            propagate(&g, e).unwrap().value,
            propagate(&h, e).unwrap().value,
        );
        let scale = 1.0 + a.abs() * pf.lambda1.abs().max(pf.lambda2.abs())
            + b.abs() * pg.lambda1.abs().max(pg.lambda2.abs());
        prop_assert!((ph.lambda1 - (a * pf.lambda1 + b * pg.lambda1)).abs() <= 1e-12 * scale);
        prop_assert!((ph.lambda2 - (a * pf.lambda2 + b * pg.lambda2)).abs() <= 1e-12 * scale);
    }

    #[test]
    fn exterior_perturbations_leave_the_value_unchanged(
        f in config(),
        e in event(),
        noise in values(),
    ) {
        let support = dependence_support(e).unwrap();
        let l = lattice();
        let mut g = f.clone();
        let mut touched = false;
        for i in 0..N {
            if !support.contains(l.x(i)) {
                g.lambda1[i] += noise[i];
                g.lambda2[i] -= noise[i];
                if let Some(v) = g.velocity.as_mut() {
                    v[i] *= 2.0;
                }
                touched = true;
            }
        }
        prop_assume!(touched);
        let (a, b) = (propagate(&f, e).unwrap().value, propagate(&g, e).unwrap().value);
        prop_assert_eq!(a.lambda1.to_bits(), b.lambda1.to_bits());
        prop_assert_eq!(a.lambda2.to_bits(), b.lambda2.to_bits());
    }

    #[test]
    fn langevin_is_deterministic_per_seed(f in config(), seed in any::<u64>()) {
        let spec = LangevinSpec { drift_rate: 0.3, noise_sigma: 0.5, noise_bound: 0.4, dt: 0.25 };
        let x = evolve_langevin(&f, &spec, 1.0, &mut trial_rng(seed, 0)).unwrap();
        let y = evolve_langevin(&f, &spec, 1.0, &mut trial_rng(seed, 0)).unwrap();
        prop_assert_eq!(x, y);
    }

    #[test]
    fn langevin_increments_stay_bounded(f in config(), bound in 0.01f64..1.0) {
        let spec = LangevinSpec { drift_rate: 0.0, noise_sigma: 2.0, noise_bound: bound, dt: 0.5 };
        let mut count = 0;
        let mut worst: f64 = 0.0;
        evolve_langevin_observed(&f, &spec, 2.0, &mut trial_rng(1, 2), |dw| {
            count += 1;
            worst = worst.max(dw.abs());
        }).unwrap();
        prop_assert_eq!(count, 2 * N * 4);
        prop_assert!(worst <= bound);
    }
}

#[test]
fn interior_velocity_perturbation_changes_the_value() {
    let l = lattice();
    let f = InitialFieldConfiguration::zeros(l);
    let e = Event::new(0.0, 1.0).unwrap();
    let support = dependence_support(e).unwrap();
    let base = propagate(&f, e).unwrap().value;
    for i in (0..N).filter(|&i| support.contains(l.x(i))) {
        let mut g = f.clone();
        let mut v = vec![0.0; N];
        v[i] = 1.0;
        g.velocity = Some(v);
        assert_ne!(
            propagate(&g, e).unwrap().value.lambda1,
            base.lambda1,
            "node {i}"
        );
    }
}

#[test]
fn noiseless_langevin_is_the_identity() {
    let l = lattice();
    let f = InitialFieldConfiguration::new(
        l,
        l.points().map(|x| x.sin()).collect(),
        l.points().map(|x| x.cos()).collect(),
        None,
    )
    .unwrap();
    let spec = LangevinSpec {
        drift_rate: 0.0,
        noise_sigma: 0.0,
        noise_bound: 1.0,
        dt: 0.25,
    };
    let g = evolve_langevin(&f, &spec, 2.0, &mut trial_rng(0, 0)).unwrap();
    assert_eq!(g, f);
    let e = Event::new(0.3, 1.7).unwrap();
    assert_eq!(propagate(&g, e).unwrap(), propagate(&f, e).unwrap());
}
