//! Sampling statistics of the initial Gaussian fields.

use eprb_core::fields::{build_covariance, factorization_check, CovarianceSpec, Lattice, Region};
use eprb_core::geometry::{experiment_domains, ExperimentGeometry};
use eprb_core::rng::trial_rng;

fn setup(spec: CovarianceSpec) -> (Lattice, eprb_core::fields::Covariance) {
    let g = ExperimentGeometry::new(1.0, 0.5, 0.0).unwrap();
    let dom = experiment_domains(&g).unwrap();
    let lattice = Lattice::new(-3.5, 3.5, 29).unwrap();
    let cov = build_covariance(&spec, &lattice, &dom).unwrap();
    (lattice, cov)
}

#[test]
fn empirical_covariance_matches_kernel() {
    let (lattice, cov) = setup(CovarianceSpec::coupled(1.3, 0.6, 0.4));
    let sampler = cov.factorize().unwrap();
    let n = 10_000;
    let samples: Vec<_> = (0..n)
        .map(|i| sampler.sample(&mut trial_rng(11, i)))
        .collect();
    let idx = cov.support_indices();
    let mut worst: f64 = 0.0;
    for &i in &idx {
        for &j in &idx {
            let emp = samples
                .iter()
                .map(|s| s.lambda1[i] * s.lambda1[j])
                .sum::<f64>()
                / n as f64;
            let k = &cov.matrix;
            let se = ((k[(i, i)] * k[(j, j)] + k[(i, j)] * k[(i, j)]) / n as f64).sqrt();
            let z = (emp - k[(i, j)]).abs() / se;
            worst = worst.max(z);
        }
    }
    assert!(worst < 5.0, "worst deviation {worst} standard errors");
    for s in &samples[..10] {
        for i in 0..lattice.n {
            if cov.regions[i].is_none() {
                assert_eq!(s.lambda1[i], 0.0);
                assert_eq!(s.lambda2[i], 0.0);
            }
        }
    }
}

#[test]
fn components_are_uncorrelated() {
    let (_, cov) = setup(CovarianceSpec::factorized(1.0, 0.5));
    let sampler = cov.factorize().unwrap();
    let i = cov.region_indices(Region::SigmaC)[0];
    let n = 10_000;
    let mean = (0..n)
        .map(|k| {
            let s = sampler.sample(&mut trial_rng(5, k));
            s.lambda1[i] * s.lambda2[i]
        })
        .sum::<f64>()
        / n as f64;
    let var = cov.matrix[(i, i)];
    assert!(mean.abs() < 5.0 * var / (n as f64).sqrt(), "{mean}");
}

#[test]
fn factorized_blocks_are_exactly_independent() {
    let g = ExperimentGeometry::new(1.0, 0.5, 0.0).unwrap();
    let dom = experiment_domains(&g).unwrap();
    let lattice = Lattice::new(-3.5, 3.5, 57).unwrap();
    let f =
        factorization_check(&CovarianceSpec::factorized(1.0, 0.4), &lattice, &dom, 0.0).unwrap();
    assert!(f.factorized);
    assert_eq!(f.max_off_block, 0.0);
    let c = factorization_check(
        &CovarianceSpec::coupled(1.0, 0.4, 0.5),
        &lattice,
        &dom,
        1e-9,
    )
    .unwrap();
    assert!(!c.factorized);
    assert!(c.max_off_block > 1e-9);
}

#[test]
fn region_samples_follow_block_law() {
    let (_, cov) = setup(CovarianceSpec::factorized(0.8, 0.5));
    let sampler = cov.factorize().unwrap();
    let n = 10_000;
    let first = cov.region_indices(Region::SigmaA)[0];
    let var = (0..n)
        .map(|k| {
            let r = sampler
                .sample_region(Region::SigmaA, &mut trial_rng(3, k))
                .unwrap();
            assert_eq!(r.indices[0], first);
            r.lambda1[0] * r.lambda1[0]
        })
        .sum::<f64>()
        / n as f64;
    let k = cov.matrix[(first, first)];
    assert!(
        (var - k).abs() < 5.0 * k * (2.0 / n as f64).sqrt(),
        "{var} vs {k}"
    );
}
