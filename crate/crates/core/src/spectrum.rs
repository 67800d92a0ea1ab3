//! Mather's β function from marked length spectrum data, and caustic estimates.
//!
//! Sign convention: the action of a chord is minus its length, so
//! `β(p/q) = −MLS(p/q)/q`. With this choice `β′(0) = −ℓ`, the caustic length is
//! `|Γ_ω| = −β′(ω)` and the Lazutkin parameter is `Q = α(β′(ω)) = ωβ′(ω) − β(ω)`.
//!
//! Slopes are taken on the mean action per winding `g(ω) = β(ω)/ω = −MLS/p`
//! instead of on β itself. Then `β′ = g + ωg′` and `Q = ω²g′`: the three-point
//! truncation error of `g′` enters `Q` with an extra factor of `ω` relative to
//! differencing β, which matters because `Q` is of order `ω³`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::SupportDomain;
use crate::orbits::{check_rotation_number, OrbitCache, SolveOptions};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaSample {
    pub p: u32,
    pub q: u32,
    pub omega: f64,
    pub mls: f64,
    pub beta: f64,
}

impl BetaSample {
    pub fn new(p: u32, q: u32, mls: f64) -> Self {
        Self { p, q, omega: p as f64 / q as f64, mls, beta: -mls / q as f64 }
    }

    /// `β/ω = −MLS/p`.
    pub fn mean_action(&self) -> f64 {
        -self.mls / self.p as f64
    }
}

/// β at each `(p, q)`, in input order. Orbits are solved in parallel on the
/// current rayon pool.
pub fn beta_table(
    domain: &SupportDomain,
    rationals: &[(u32, u32)],
    opts: &SolveOptions,
    cache: &OrbitCache,
) -> Result<Vec<BetaSample>> {
    for &(p, q) in rationals {
        check_rotation_number(p, q, opts.q_max)?;
    }
    rationals
        .par_iter()
        .map(|&(p, q)| cache.mls(domain, p, q, opts).map(|m| BetaSample::new(p, q, m)))
        .collect()
}

/// Slope of β at the middle of three samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeEstimate {
    pub omega: f64,
    /// Three-point estimate through the mean action `g = β/ω`.
    pub slope: f64,
    /// Two-point secant through the outer samples, same route.
    pub secant: f64,
    /// Plain three-point nonuniform difference of β, for comparison.
    pub direct: f64,
    /// `|slope − secant|`.
    pub err_bar: f64,
    /// `ω²g′ = ωβ′ − β`.
    pub lazutkin_q: f64,
}

fn three_point(x: [f64; 3], f: [f64; 3]) -> f64 {
    let h1 = x[1] - x[0];
    let h2 = x[2] - x[1];
    -h2 / (h1 * (h1 + h2)) * f[0] + (h2 - h1) / (h1 * h2) * f[1] + h1 / (h2 * (h1 + h2)) * f[2]
}

pub fn beta_derivative(samples: &[BetaSample]) -> Result<SlopeEstimate> {
    if samples.len() != 3 {
        return Err(Error::InsufficientSamples { needed: 3, got: samples.len() });
    }
    let mut s = [samples[0], samples[1], samples[2]];
    s.sort_by(|a, b| a.omega.partial_cmp(&b.omega).unwrap());
    if !(s[0].omega < s[1].omega && s[1].omega < s[2].omega) {
        return Err(Error::InvalidInput("slope samples must have distinct rotation numbers".into()));
    }
    let x = [s[0].omega, s[1].omega, s[2].omega];
    let g = [s[0].mean_action(), s[1].mean_action(), s[2].mean_action()];
    let dg = three_point(x, g);
    let dg_secant = (g[2] - g[0]) / (x[2] - x[0]);
    let w = x[1];
    let slope = g[1] + w * dg;
    let secant = g[1] + w * dg_secant;
    Ok(SlopeEstimate {
        omega: w,
        slope,
        secant,
        direct: three_point(x, [s[0].beta, s[1].beta, s[2].beta]),
        err_bar: (slope - secant).abs(),
        lazutkin_q: w * w * dg,
    })
}

/// `β′(0)` by polynomial extrapolation of `g = β/ω` in `ω²` through the three
/// samples with the smallest rotation number.
pub fn extrapolate_slope_at_zero(samples: &[BetaSample]) -> Result<f64> {
    if samples.len() < 3 {
        return Err(Error::InsufficientSamples { needed: 3, got: samples.len() });
    }
    let mut s = samples.to_vec();
    s.sort_by(|a, b| a.omega.partial_cmp(&b.omega).unwrap());
    let pts: Vec<(f64, f64)> = s[..3].iter().map(|b| (b.omega * b.omega, b.mean_action())).collect();
    // Lagrange interpolation evaluated at ω² = 0
    let mut acc = 0.0;
    for (i, &(xi, yi)) in pts.iter().enumerate() {
        let mut w = 1.0;
        for (j, &(xj, _)) in pts.iter().enumerate() {
            if i != j {
                w *= (0.0 - xj) / (xi - xj);
            }
        }
        acc += w * yi;
    }
    Ok(acc)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FdScheme {
    /// Three-point nonuniform difference of `β/ω` across neighbouring rationals.
    ThreePointMeanAction,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CausticEstimate {
    pub q: u32,
    pub omega_mid: f64,
    pub gamma_length: f64,
    pub lazutkin_q: f64,
    pub err_bar: f64,
    pub fd_order: FdScheme,
}

/// Caustic estimates at every sample whose neighbours `(p, q ∓ p)` are also
/// present. Output is sorted by `q`.
pub fn caustics_from_samples(samples: &[BetaSample], perimeter: Option<f64>) -> Result<Vec<CausticEstimate>> {
    let mut by_q: Vec<BetaSample> = samples.to_vec();
    by_q.sort_by_key(|s| (s.p, s.q));
    let lookup = |p: u32, q: u32| by_q.iter().find(|s| s.p == p && s.q == q).copied();
    let mut out = Vec::new();
    for s in &by_q {
        if s.q <= s.p {
            continue;
        }
        let (Some(lo), Some(hi)) = (lookup(s.p, s.q + s.p), lookup(s.p, s.q - s.p)) else {
            continue;
        };
        let est = beta_derivative(&[lo, *s, hi])?;
        out.push(CausticEstimate {
            q: s.q,
            omega_mid: est.omega,
            gamma_length: -est.slope,
            lazutkin_q: est.lazutkin_q,
            err_bar: est.err_bar,
            fd_order: FdScheme::ThreePointMeanAction,
        });
    }
    if out.is_empty() {
        return Err(Error::InsufficientSamples { needed: 3, got: samples.len() });
    }
    out.sort_by_key(|e| e.q);
    for w in out.windows(2) {
        if !(w[1].gamma_length > w[0].gamma_length) {
            return Err(Error::NonMonotone { q: w[1].q });
        }
    }
    for e in &out {
        let too_long = perimeter.is_some_and(|ell| e.gamma_length >= ell);
        if too_long || !(e.gamma_length > 0.0) || !(e.lazutkin_q > 0.0) {
            return Err(Error::NonMonotone { q: e.q });
        }
    }
    Ok(out)
}

/// Caustic estimates for `ω = p/q`, `q ∈ qs`, from orbits at `q` and `q ± p`.
pub fn caustic_estimates_winding(
    domain: &SupportDomain,
    p: u32,
    qs: std::ops::RangeInclusive<u32>,
    opts: &SolveOptions,
    cache: &OrbitCache,
) -> Result<Vec<CausticEstimate>> {
    let (lo, hi) = (*qs.start(), *qs.end());
    if lo <= 2 * p || hi < lo {
        return Err(Error::InvalidInput(format!("q range {lo}..={hi} too small for winding {p}")));
    }
    let mut rationals: Vec<(u32, u32)> = Vec::new();
    for q in lo..=hi {
        if check_rotation_number(p, q, opts.q_max).is_ok() {
            for r in [q - p, q, q + p] {
                if !rationals.contains(&(p, r)) {
                    rationals.push((p, r));
                }
            }
        }
    }
    rationals.sort_by_key(|r| r.1);
    let samples = beta_table(domain, &rationals, opts, cache)?;
    let all = caustics_from_samples(&samples, Some(domain.perimeter()))?;
    Ok(all.into_iter().filter(|e| qs.contains(&e.q)).collect())
}

/// Caustic estimates along the `ω = 1/q` family.
pub fn caustic_estimates(
    domain: &SupportDomain,
    qs: std::ops::RangeInclusive<u32>,
    opts: &SolveOptions,
    cache: &OrbitCache,
) -> Result<Vec<CausticEstimate>> {
    caustic_estimates_winding(domain, 1, qs, opts, cache)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SecondDifference {
    pub omega: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexityReport {
    pub differences: Vec<SecondDifference>,
    /// Indices into `differences` whose value is not strictly positive.
    pub violations: Vec<usize>,
}

/// Second divided differences of β over samples sorted by ω.
pub fn convexity_report(samples: &[BetaSample]) -> ConvexityReport {
    let mut s = samples.to_vec();
    s.sort_by(|a, b| a.omega.partial_cmp(&b.omega).unwrap());
    let differences: Vec<SecondDifference> = s
        .windows(3)
        .map(|w| {
            let d01 = (w[1].beta - w[0].beta) / (w[1].omega - w[0].omega);
            let d12 = (w[2].beta - w[1].beta) / (w[2].omega - w[1].omega);
            SecondDifference { omega: w[1].omega, value: (d12 - d01) / (w[2].omega - w[0].omega) }
        })
        .collect();
    let violations = differences
        .iter()
        .enumerate()
        .filter(|(_, d)| !(d.value > 0.0))
        .map(|(i, _)| i)
        .collect();
    ConvexityReport { differences, violations }
}
