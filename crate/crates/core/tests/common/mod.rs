#![allow(dead_code)]

use billiard_lab::geometry::{build_domain, DomainSpec, SupportDomain};
use rand::Rng;

pub const NODES: usize = 1024;

pub fn circle(r: f64) -> SupportDomain {
    build_domain(&DomainSpec::circle(r, NODES)).unwrap()
}

pub fn ellipse(a: f64, b: f64) -> SupportDomain {
    build_domain(&DomainSpec::ellipse(a, b, NODES)).unwrap()
}

/// Random support function with `Σ (n² − 1)(|a_n| + |b_n|) ≤ budget · a₀`, so the
/// radius of curvature stays above `(1 − budget) a₀`.
pub fn random_support_spec<R: Rng>(rng: &mut R, max_freq: u32, budget: f64) -> DomainSpec {
    let a0 = rng.gen_range(0.5..2.0);
    let freqs: Vec<u32> = (2..=max_freq).filter(|_| rng.gen_bool(0.7)).collect();
    let raw: Vec<(u32, f64, f64)> = freqs.iter().map(|&n| (n, rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
    let weight: f64 = raw.iter().map(|(n, a, b)| (n * n - 1) as f64 * (a.abs() + b.abs())).sum();
    let scale = if weight > 0.0 { rng.gen_range(0.2..1.0) * budget * a0 / weight } else { 0.0 };
    let coefficients = raw.into_iter().map(|(n, a, b)| (n, a * scale, b * scale)).collect();
    DomainSpec::support_fourier(a0, coefficients, NODES)
}

/// Unit circle with low-frequency perturbations of total amplitude `Σ|a_n| + |b_n| ≤ amplitude`.
pub fn perturbed_circle_spec<R: Rng>(rng: &mut R, amplitude: f64) -> DomainSpec {
    let raw: Vec<(u32, f64, f64)> = (2..=5).map(|n| (n, rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
    let total: f64 = raw.iter().map(|(_, a, b)| a.abs() + b.abs()).sum();
    let coefficients = raw.into_iter().map(|(n, a, b)| (n, a * amplitude / total, b * amplitude / total)).collect();
    DomainSpec::support_fourier(1.0, coefficients, NODES)
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}
