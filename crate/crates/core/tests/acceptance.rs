//! Acceptance suite. Runs each criterion in order, prints one PASS/FAIL line
//! per criterion and exits nonzero if any failed.

mod common;

use std::f64::consts::{PI, TAU};
use std::time::{Duration, Instant};

use billiard_lab::dynamics::{billiard_map, jacobian_determinant, twist_check, BilliardState, MapOptions, DEFAULT_PHI_MIN};
use billiard_lab::fitting::{fit_expansion, ratio_consistency, ratio_spread};
use billiard_lab::geometry::build_domain;
use billiard_lab::invariants::{
    compute_invariants, total_curvature, verify_completed_square, verify_ibp_identity, verify_log_curvature_bound,
};
use billiard_lab::orbits::{check_rotation_number, OrbitCache, SolveOptions};
use billiard_lab::spectrum::{beta_table, caustic_estimates, convexity_report, extrapolate_slope_at_zero};
use common::{circle, ellipse, perturbed_circle_spec, random_support_spec, rel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Verdict {
    pass: bool,
    detail: String,
}

fn criterion(n: u32, title: &str, budget: Duration, f: impl FnOnce() -> Verdict) -> bool {
    let start = Instant::now();
    let v = f();
    let elapsed = start.elapsed();
    let in_time = elapsed < budget;
    let pass = v.pass && in_time;
    println!(
        "criterion {n} {}: {title}: {} [{:.1}s / {}s]",
        if pass { "PASS" } else { "FAIL" },
        v.detail,
        elapsed.as_secs_f64(),
        budget.as_secs()
    );
    pass
}

fn circle_closed_form() -> Verdict {
    let d = circle(1.0);
    let opts = MapOptions::default();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut map_err: f64 = 0.0;
    for _ in 0..200 {
        let s = rng.gen_range(0.0..TAU);
        let phi = rng.gen_range(0.01..PI - 0.01);
        let next = billiard_map(&d, &BilliardState::new(&d, s, phi), &opts).unwrap();
        map_err = map_err.max((next.lift_s - (s + 2.0 * phi)).abs()).max((next.phi - phi).abs());
    }

    let rationals: Vec<(u32, u32)> = (3..=64).map(|q| (1, q)).collect();
    let samples = beta_table(&d, &rationals, &SolveOptions::default(), &OrbitCache::new()).unwrap();
    let mls_err = samples
        .iter()
        .map(|s| rel(s.mls, 2.0 * s.q as f64 * (PI / s.q as f64).sin()))
        .fold(0.0, f64::max);
    let slope0 = extrapolate_slope_at_zero(&samples).unwrap();
    let slope_err = rel(slope0, -TAU);
    Verdict {
        pass: map_err < 1e-10 && mls_err < 1e-8 && slope_err < 1e-3,
        detail: format!("map err {map_err:.1e} (<1e-10), mls rel err {mls_err:.1e} (<1e-8), slope(0) rel err {slope_err:.1e} (<1e-3)"),
    }
}

fn circle_invariants() -> Verdict {
    let expected = [TAU, TAU, 18.0 * PI, 18.0 * PI, 281.0 * PI / 22400.0];
    let base = compute_invariants(&circle(1.0)).unwrap();
    let value_err = (0..5).map(|k| rel(base.values[k], expected[k])).fold(0.0, f64::max);
    let mut scale_err: f64 = 0.0;
    for r in [0.25, 0.5, 2.0, 3.7, 10.0] {
        let inv = compute_invariants(&circle(r)).unwrap();
        for k in 0..5 {
            let exponent = 1.0 - 2.0 * k as f64 / 3.0;
            scale_err = scale_err.max(rel(inv.values[k], r.powf(exponent) * base.values[k]));
        }
    }
    Verdict {
        pass: value_err < 1e-10 && scale_err < 1e-9,
        detail: format!("values rel err {value_err:.1e} (<1e-10), dilation rel err {scale_err:.1e} (<1e-9)"),
    }
}

fn random_identities() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut gb, mut ibp, mut csq): (f64, f64, f64) = (0.0, 0.0, 0.0);
    let (mut negative_terms, mut chain_violations) = (0, 0);
    for _ in 0..100 {
        let d = build_domain(&random_support_spec(&mut rng, 8, 0.8)).unwrap();
        gb = gb.max(rel(total_curvature(&d).unwrap(), TAU));
        ibp = ibp.max(verify_ibp_identity(&d).unwrap().gap);
        let c = verify_completed_square(&d).unwrap();
        csq = csq.max(c.max_gap());
        negative_terms += c.branches.iter().filter(|b| !b.all_nonnegative).count();
        chain_violations += verify_log_curvature_bound(&d).unwrap().violations();
    }
    Verdict {
        pass: gb < 1e-9 && ibp < 1e-8 && csq < 1e-7 && negative_terms == 0 && chain_violations == 0,
        detail: format!(
            "100 domains: gauss-bonnet {gb:.1e} (<1e-9), ibp {ibp:.1e} (<1e-8), completed square {csq:.1e} (<1e-7), \
             negative terms {negative_terms}, chain violations {chain_violations}"
        ),
    }
}

fn circle_caustics() -> Verdict {
    let d = circle(1.0);
    let est = caustic_estimates(&d, 16..=128, &SolveOptions::default(), &OrbitCache::new()).unwrap();
    let mut gamma_err: f64 = 0.0;
    let mut q_err: f64 = 0.0;
    for e in &est {
        let w = PI / e.q as f64;
        gamma_err = gamma_err.max(rel(e.gamma_length, TAU * w.cos()));
        q_err = q_err.max(rel(e.lazutkin_q, 2.0 * (w.sin() - w * w.cos())));
    }
    let fit = fit_expansion(&est, d.perimeter(), 2).unwrap();
    let c1_expected = -(1.5f64).powf(2.0 / 3.0) * PI;
    let c1_err = rel(fit.coefficients[0], c1_expected);
    Verdict {
        pass: est.len() == 113 && gamma_err < 1e-4 && q_err < 1e-3 && c1_err < 1e-2,
        detail: format!(
            "{} estimates: caustic length rel err {gamma_err:.1e} (<1e-4), Q rel err {q_err:.1e} (<1e-3), c1 rel err {c1_err:.1e} (<1e-2)",
            est.len()
        ),
    }
}

fn universality() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let domains = [
        circle(1.0),
        circle(2.0),
        ellipse(1.2, 1.0),
        build_domain(&perturbed_circle_spec(&mut rng, 0.02)).unwrap(),
    ];
    let opts = SolveOptions::default();
    let mut fits = Vec::new();
    let mut invs = Vec::new();
    for d in &domains {
        let est = caustic_estimates(d, 16..=128, &opts, &OrbitCache::new()).unwrap();
        fits.push(fit_expansion(&est, d.perimeter(), 2).unwrap());
        invs.push(compute_invariants(d).unwrap());
    }
    let entries = ratio_consistency(&fits, &invs, 1).unwrap();
    let ratios: Vec<String> = entries.iter().map(|e| format!("{:.5}", e.ratio.unwrap_or(f64::NAN))).collect();
    let spread = ratio_spread(&entries);
    let determinate = entries.iter().all(|e| e.ratio.is_some());
    Verdict {
        pass: determinate && spread.is_some_and(|s| s < 0.05),
        detail: format!("r1 = [{}], spread {:.1e} (<5e-2)", ratios.join(", "), spread.unwrap_or(f64::NAN)),
    }
}

fn structural() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let perturbed = build_domain(&perturbed_circle_spec(&mut rng, 0.02)).unwrap();
    let ell = ellipse(1.2, 1.0);
    let opts = SolveOptions::default();

    // symmetry about 1/2 on an asymmetric table
    let mut pairs = Vec::new();
    while pairs.len() < 20 {
        let q = rng.gen_range(3..=40);
        let p = rng.gen_range(1..q);
        if check_rotation_number(p, q, opts.q_max).is_ok() && 2 * p != q && !pairs.contains(&(p, q)) {
            pairs.push((p, q));
        }
    }
    let rationals: Vec<(u32, u32)> = pairs.iter().flat_map(|&(p, q)| [(p, q), (q - p, q)]).collect();
    let samples = beta_table(&perturbed, &rationals, &opts, &OrbitCache::new()).unwrap();
    let sym_err = samples.chunks(2).map(|s| (s[0].beta - s[1].beta).abs()).fold(0.0, f64::max);

    // strict convexity on a Farey grid
    let farey: Vec<(u32, u32)> =
        (2..=12).flat_map(|q| (1..q).map(move |p| (p, q))).filter(|&(p, q)| check_rotation_number(p, q, 512).is_ok()).collect();
    let mut convexity_violations = 0;
    for d in [circle(1.0), ellipse(1.2, 1.0)] {
        let samples = beta_table(&d, &farey, &opts, &OrbitCache::new()).unwrap();
        convexity_violations += convexity_report(&samples).violations.len();
    }

    let mut twist_min = f64::INFINITY;
    let mut twist_bad = 0;
    for (i, d) in [circle(1.0), ell.clone(), perturbed.clone()].iter().enumerate() {
        let t = twist_check(d, 10_000, 100 + i as u64, DEFAULT_PHI_MIN);
        twist_min = twist_min.min(t.min_value);
        twist_bad += t.violations + (10_000 - t.samples);
    }

    let map_opts = MapOptions::default();
    let mut det_err: f64 = 0.0;
    for d in [&ell, &perturbed] {
        for _ in 0..50 {
            let st = BilliardState::new(d, rng.gen_range(0.0..d.perimeter()), rng.gen_range(0.1..PI - 0.1));
            det_err = det_err.max((jacobian_determinant(d, &st, 1e-5, &map_opts).unwrap() - 1.0).abs());
        }
    }
    Verdict {
        pass: sym_err < 1e-8 && convexity_violations == 0 && twist_bad == 0 && twist_min > 0.0 && det_err < 1e-6,
        detail: format!(
            "symmetry err {sym_err:.1e} (<1e-8), convexity violations {convexity_violations}, \
             twist min {twist_min:.2e} (>0, {twist_bad} bad), jacobian err {det_err:.1e} (<1e-6)"
        ),
    }
}

fn main() {
    let results = [
        criterion(1, "circle closed forms", Duration::from_secs(30), circle_closed_form),
        criterion(2, "invariant quadrature", Duration::from_secs(60), circle_invariants),
        criterion(3, "identity suite", Duration::from_secs(120), random_identities),
        criterion(4, "circle caustics", Duration::from_secs(180), circle_caustics),
        criterion(5, "universality of c1/I1", Duration::from_secs(600), universality),
        criterion(6, "structural properties", Duration::from_secs(600), structural),
    ];
    let failed = results.iter().filter(|p| !**p).count();
    println!("acceptance: {} of {} criteria passed", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
