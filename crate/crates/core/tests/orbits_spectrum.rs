mod common;

use std::f64::consts::{PI, TAU};

use billiard_lab::geometry::build_domain;
use billiard_lab::orbits::{
    check_rotation_number, mls, rotation_report, solve_orbit, validate_rotation_number, OrbitCache, SolveOptions,
};
use billiard_lab::spectrum::{
    beta_derivative, beta_table, caustic_estimates, caustic_estimates_winding, caustics_from_samples,
    convexity_report, extrapolate_slope_at_zero, BetaSample,
};
use billiard_lab::Error;
use common::{circle, ellipse, perturbed_circle_spec, rel};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn perturbed(seed: u64) -> billiard_lab::geometry::SupportDomain {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    build_domain(&perturbed_circle_spec(&mut rng, 0.03)).unwrap()
}

#[test]
fn circle_star_pentagon() {
    let d = circle(1.0);
    let orbit = solve_orbit(&d, 2, 5, &SolveOptions::default()).unwrap();
    assert!(rel(orbit.length, 10.0 * (2.0 * PI / 5.0).sin()) < 1e-12);
    assert!(orbit.converged && orbit.degenerate);
    let report = rotation_report(&d, &orbit).unwrap();
    assert!(report.ok);
    assert!((report.lift_advance - 2.0 * TAU).abs() < 1e-9);
}

#[test]
fn circle_triangle_validates_and_corruption_is_caught() {
    let d = circle(1.0);
    let orbit = solve_orbit(&d, 1, 3, &SolveOptions::default()).unwrap();
    assert!(validate_rotation_number(&d, &orbit));
    let mut bad = orbit.clone();
    bad.thetas[1] += 0.3;
    assert!(!validate_rotation_number(&d, &bad));
    let mut short = orbit;
    short.thetas.pop();
    assert!(!validate_rotation_number(&d, &short));
}

#[test]
fn circle_polygons_and_perimeter_bound() {
    let d = circle(1.0);
    let samples = beta_table(&d, &(2..=64).map(|q| (1, q)).collect::<Vec<_>>(), &SolveOptions::default(), &OrbitCache::new())
        .unwrap();
    for s in &samples {
        let q = s.q as f64;
        assert!(rel(s.mls, 2.0 * q * (PI / q).sin()) < 1e-12, "q {}", s.q);
        assert!(s.mls < TAU);
    }
    assert!(samples.windows(2).all(|w| w[1].mls > w[0].mls));
    assert!(rel(samples[0].beta, -2.0) < 1e-14);
    assert!(rel(samples[1].beta, -(3f64).sqrt()) < 1e-13);
}

#[test]
fn ellipse_lengths_increase_to_the_perimeter() {
    let d = ellipse(2.0, 1.0);
    assert!(rel(mls(&d, 1, 2, &SolveOptions::default()).unwrap(), 8.0) < 1e-12);
    let samples = beta_table(&d, &(2..=48).map(|q| (1, q)).collect::<Vec<_>>(), &SolveOptions::default(), &OrbitCache::new())
        .unwrap();
    assert!(samples.windows(2).all(|w| w[1].mls > w[0].mls));
    assert!(samples.iter().all(|s| s.mls < d.perimeter()));
    assert!(d.perimeter() - samples.last().unwrap().mls < 1e-2 * d.perimeter());
    assert!(convexity_report(&samples).violations.is_empty());
}

#[test]
fn orbits_are_invariant_under_rotation_of_the_table() {
    let d = perturbed(31);
    let turned = d.rotated(1.1).unwrap();
    let opts = SolveOptions::default();
    for (p, q) in [(1, 2), (1, 5), (2, 7), (3, 11), (1, 24)] {
        let (a, b) = (mls(&d, p, q, &opts).unwrap(), mls(&turned, p, q, &opts).unwrap());
        assert!((a - b).abs() < 1e-9, "{p}/{q}: {a} vs {b}");
    }
}

#[test]
fn marking_symmetry_on_an_asymmetric_table() {
    let d = perturbed(32);
    let opts = SolveOptions::default();
    for (p, q) in [(1, 3), (2, 5), (3, 8), (4, 9), (5, 13), (7, 17), (11, 29), (13, 40)] {
        let a = solve_orbit(&d, p, q, &opts).unwrap();
        let b = solve_orbit(&d, q - p, q, &opts).unwrap();
        assert!((a.length - b.length).abs() < 1e-8, "{p}/{q}");
        // the same closed polygon, traversed the other way
        let sorted = |o: &billiard_lab::orbits::PeriodicOrbit| {
            let mut v: Vec<f64> = o.thetas.iter().map(|t| t.rem_euclid(TAU)).collect();
            v.sort_by(|x, y| x.partial_cmp(y).unwrap());
            v
        };
        let (va, vb) = (sorted(&a), sorted(&b));
        assert!(va.iter().zip(&vb).all(|(x, y)| (x - y).abs() < 1e-5), "{p}/{q}");
    }
}

#[test]
fn invalid_rotation_numbers_are_rejected() {
    let d = circle(1.0);
    let opts = SolveOptions::default();
    assert!(matches!(solve_orbit(&d, 2, 6, &opts), Err(Error::BadRotationNumber { .. })));
    assert!(matches!(solve_orbit(&d, 1, 1, &opts), Err(Error::BadRotationNumber { .. })));
    assert!(check_rotation_number(1, opts.q_max + 1, opts.q_max).is_err());
}

#[test]
fn circle_slopes_and_caustics() {
    let d = circle(1.0);
    let opts = SolveOptions::default();
    let samples = beta_table(&d, &[(1, 31), (1, 32), (1, 33)], &opts, &OrbitCache::new()).unwrap();
    let slope = beta_derivative(&samples).unwrap();
    let w = PI / 32.0;
    assert!(rel(slope.slope, -TAU * w.cos()) < 1e-3);
    assert!(slope.err_bar >= 0.0);
    assert!(matches!(beta_derivative(&samples[..2]), Err(Error::InsufficientSamples { .. })));

    let est = caustic_estimates(&d, 16..=64, &opts, &OrbitCache::new()).unwrap();
    for e in &est {
        let w = PI / e.q as f64;
        assert!(e.gamma_length < TAU && e.lazutkin_q > 0.0);
        // ℓ − |Γ| ≈ π³Rω²
        assert!(rel((TAU - e.gamma_length) / (PI.powi(3) / (e.q as f64).powi(2)), 1.0) < 0.05);
        assert!(rel(e.lazutkin_q, 2.0 * (w.sin() - w * w.cos())) < 1e-3);
    }
    assert!(est.windows(2).all(|p| p[1].lazutkin_q < p[0].lazutkin_q));
    // Q ~ ω³: doubling q divides Q by about 8
    let at = |q: u32| est.iter().find(|e| e.q == q).unwrap().lazutkin_q;
    assert!((at(16) / at(32) - 8.0).abs() < 0.1);
    assert!((at(32) / at(64) - 8.0).abs() < 0.05);
}

#[test]
fn slope_at_zero_is_minus_the_perimeter() {
    let opts = SolveOptions::default();
    for d in [circle(1.0), ellipse(1.2, 1.0), ellipse(2.0, 1.0)] {
        let samples = beta_table(&d, &[(1, 40), (1, 48), (1, 56)], &opts, &OrbitCache::new()).unwrap();
        let slope = extrapolate_slope_at_zero(&samples).unwrap();
        assert!(rel(slope, -d.perimeter()) < 1e-3, "{slope} vs {}", d.perimeter());
    }
}

#[test]
fn slopes_are_invariant_under_rotation_of_a_symmetric_table() {
    let d = ellipse(1.5, 1.0);
    let turned = d.rotated(0.8).unwrap();
    let opts = SolveOptions::default();
    let a = caustic_estimates(&d, 20..=24, &opts, &OrbitCache::new()).unwrap();
    let b = caustic_estimates(&turned, 20..=24, &opts, &OrbitCache::new()).unwrap();
    for (x, y) in a.iter().zip(&b) {
        assert!((x.gamma_length - y.gamma_length).abs() < 1e-8);
    }
}

#[test]
fn higher_winding_caustics_agree_with_closed_form() {
    let d = circle(1.0);
    let est = caustic_estimates_winding(&d, 2, 41..=61, &SolveOptions::default(), &OrbitCache::new()).unwrap();
    assert!(!est.is_empty());
    for e in &est {
        assert!(rel(e.gamma_length, TAU * (PI * e.omega_mid).cos()) < 1e-4);
    }
}

#[test]
fn broken_samples_are_flagged() {
    let good: Vec<BetaSample> = (10..=20).map(|q| BetaSample::new(1, q, 2.0 * q as f64 * (PI / q as f64).sin())).collect();
    assert!(caustics_from_samples(&good, Some(TAU)).is_ok());
    let mut bad = good.clone();
    bad[5] = BetaSample::new(1, 15, bad[5].mls * (1.0 - 1e-3));
    assert!(matches!(caustics_from_samples(&bad, Some(TAU)), Err(Error::NonMonotone { .. })));
    assert!(convexity_report(&good[..2]).differences.is_empty());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn solved_orbits_are_birkhoff_and_close_up(seed in 0u64..1000, p in 1u32..6, q in 2u32..24) {
        prop_assume!(check_rotation_number(p, q, 512).is_ok());
        let d = perturbed(seed);
        let orbit = solve_orbit(&d, p, q, &SolveOptions::default()).unwrap();
        prop_assert!(orbit.converged);
        let span = TAU * p as f64;
        let steps: Vec<f64> = (0..q as usize)
            .map(|i| if i + 1 < q as usize { orbit.thetas[i + 1] - orbit.thetas[i] } else { orbit.thetas[0] + span - orbit.thetas[i] })
            .collect();
        prop_assert!(steps.iter().all(|&s| s > 0.0 && s < TAU));
        prop_assert!(validate_rotation_number(&d, &orbit));
        prop_assert!(orbit.length < p as f64 * d.perimeter());
    }
}
