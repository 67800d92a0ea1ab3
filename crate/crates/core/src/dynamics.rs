//! The billiard map on `ℝ/ℓℤ × (0, π)` and its generating function.
//!
//! `φ` is the angle from the forward (counterclockwise) unit tangent to the
//! outgoing ray. With `h(s, s′) = |x(s) − x(s′)|` the chord length, the partials
//! are `∂ₛh = −cos φ`, `∂ₛ′h = cos φ′` and `∂²h/∂s∂s′ = sin φ sin φ′ / h > 0`;
//! the action `−h` therefore satisfies the monotone twist condition with the
//! usual negative sign.

use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{SupportDomain, Vec2};
use crate::roots::safeguarded_newton;

pub const DEFAULT_PHI_MIN: f64 = 1e-4;

#[inline]
pub(crate) fn cross(a: &Vec2, b: &Vec2) -> f64 {
    a.x * b.y - a.y * b.x
}

/// A phase point of the billiard map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BilliardState {
    /// Arclength in `[0, ℓ)`.
    pub s: f64,
    /// Angle between the outgoing ray and the tangent, in `(0, π)`.
    pub phi: f64,
    /// Arclength on the universal cover; `s ≡ lift_s (mod ℓ)`.
    pub lift_s: f64,
}

impl BilliardState {
    pub fn new(domain: &SupportDomain, lift_s: f64, phi: f64) -> Self {
        Self { s: lift_s.rem_euclid(domain.perimeter()), phi, lift_s }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct MapOptions {
    /// Tangency guard: states need `phi_min ≤ φ ≤ π − phi_min`.
    pub phi_min: f64,
    pub max_iter: usize,
}

impl Default for MapOptions {
    fn default() -> Self {
        Self { phi_min: DEFAULT_PHI_MIN, max_iter: 100 }
    }
}

/// Chord length and its partial derivatives in arclength.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Chord {
    pub length: f64,
    pub d_s: f64,
    pub d_s_prime: f64,
    pub d_ss_prime: f64,
}

pub fn generating_function(domain: &SupportDomain, s: f64, s_prime: f64) -> Result<Chord> {
    let a = domain.frame(domain.theta_at_arclength(s));
    let b = domain.frame(domain.theta_at_arclength(s_prime));
    chord_from_frames(domain, &a.pos, &a.tangent, &b.pos, &b.tangent)
}

fn chord_from_frames(domain: &SupportDomain, xa: &Vec2, ta: &Vec2, xb: &Vec2, tb: &Vec2) -> Result<Chord> {
    let c = xb - xa;
    let len = c.norm();
    if len < 1e-12 * domain.perimeter() {
        return Err(Error::CoincidentPoints { separation: len });
    }
    let u = c / len;
    let (ca, cb) = (ta.dot(&u), tb.dot(&u));
    Ok(Chord {
        length: len,
        d_s: -ca,
        d_s_prime: cb,
        d_ss_prime: (ca * cb - ta.dot(tb)) / len,
    })
}

/// Forward step on the lifted normal angle. Returns `(θ′, φ′)` with `θ < θ′ < θ + 2π`.
pub(crate) fn step_theta(domain: &SupportDomain, theta: f64, phi: f64, opts: &MapOptions) -> Result<(f64, f64)> {
    if !(phi >= opts.phi_min && phi <= PI - opts.phi_min) {
        return Err(Error::TangencyGuard { phi, min: opts.phi_min });
    }
    let f0 = domain.frame(theta);
    let (sp, cp) = phi.sin_cos();
    let dir = f0.tangent * cp - f0.normal * sp;
    // signed angle from the ray to the chord x(θ) → x(t); increases from −φ to π − φ
    let angle = |t: f64| -> (f64, f64) {
        let f = domain.frame(t);
        let c = f.pos - f0.pos;
        let a = cross(&dir, &c).atan2(dir.dot(&c));
        let da = cross(&c, &(f.tangent * f.rho)) / c.norm_squared();
        (a, da)
    };
    // bracket by bisection over node-grid offsets
    let n = domain.node_count();
    let dt = TAU / n as f64;
    let (mut lo, mut hi) = (0usize, n);
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if angle(theta + mid as f64 * dt).0 < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let root = safeguarded_newton(
        angle,
        theta + lo as f64 * dt,
        theta + hi as f64 * dt,
        true,
        1e-15,
        1e-16,
        opts.max_iter,
    );
    let f1 = domain.frame(root.x);
    let miss = cross(&dir, &(f1.pos - f0.pos)).abs();
    if !(miss <= 1e-12 * domain.perimeter()) {
        return Err(Error::NoConvergence { what: "billiard map", residual: miss });
    }
    let phi_next = dir.dot(&f1.normal).atan2(dir.dot(&f1.tangent));
    Ok((root.x, phi_next))
}

fn state_theta(domain: &SupportDomain, state: &BilliardState) -> f64 {
    domain.theta_at_arclength(state.lift_s)
}

fn forward(domain: &SupportDomain, theta: f64, state: &BilliardState, opts: &MapOptions) -> Result<(f64, BilliardState)> {
    let (t1, phi1) = step_theta(domain, theta, state.phi, opts)?;
    let lift = state.lift_s + domain.arclength(t1) - domain.arclength(theta);
    Ok((t1, BilliardState::new(domain, lift, phi1)))
}

fn backward(domain: &SupportDomain, theta: f64, state: &BilliardState, opts: &MapOptions) -> Result<(f64, BilliardState)> {
    // time reversal: R ∘ map ∘ R with R(s, φ) = (s, π − φ)
    let (t1, phi1) = step_theta(domain, theta, PI - state.phi, opts)?;
    let t1 = t1 - TAU;
    let lift = state.lift_s + domain.arclength(t1) - domain.arclength(theta);
    Ok((t1, BilliardState::new(domain, lift, PI - phi1)))
}

/// One bounce.
pub fn billiard_map(domain: &SupportDomain, state: &BilliardState, opts: &MapOptions) -> Result<BilliardState> {
    forward(domain, state_theta(domain, state), state, opts).map(|(_, s)| s)
}

/// `n`-fold iteration; negative `n` runs the time-reversed map. The returned
/// trajectory starts with `state` and has `|n| + 1` entries.
pub fn iterate(domain: &SupportDomain, state: &BilliardState, n: i64, opts: &MapOptions) -> Result<Vec<BilliardState>> {
    let mut out = Vec::with_capacity(n.unsigned_abs() as usize + 1);
    out.push(*state);
    let mut theta = state_theta(domain, state);
    let mut cur = *state;
    for _ in 0..n.unsigned_abs() {
        let (t, next) = if n > 0 {
            forward(domain, theta, &cur, opts)?
        } else {
            backward(domain, theta, &cur, opts)?
        };
        theta = t;
        cur = next;
        out.push(cur);
    }
    Ok(out)
}

/// Twist diagnostics over random chords.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwistReport {
    /// `min ∂²h/∂s∂s′` for the chord length `h`, i.e. `min(−∂²H/∂s∂s′)` for the action `H = −h`.
    pub min_value: f64,
    pub samples: usize,
    pub violations: usize,
}

pub fn twist_check(domain: &SupportDomain, sample_count: usize, seed: u64, phi_min: f64) -> TwistReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut min_value = f64::INFINITY;
    let (mut samples, mut violations) = (0, 0);
    let mut attempts = 0;
    while samples < sample_count && attempts < 20 * sample_count.max(1) {
        attempts += 1;
        let a = domain.frame(rng.gen_range(0.0..TAU));
        let b = domain.frame(rng.gen_range(0.0..TAU));
        let Ok(ch) = chord_from_frames(domain, &a.pos, &a.tangent, &b.pos, &b.tangent) else {
            continue;
        };
        // near-tangent chords fall outside the guard band
        let (phi, phi1) = ((-ch.d_s).acos(), ch.d_s_prime.acos());
        if phi < phi_min || phi > PI - phi_min || phi1 < phi_min || phi1 > PI - phi_min {
            continue;
        }
        samples += 1;
        if ch.d_ss_prime <= 0.0 {
            violations += 1;
        }
        min_value = min_value.min(ch.d_ss_prime);
    }
    TwistReport { min_value, samples, violations }
}

/// Determinant of the map's Jacobian in `(s, cos φ)` coordinates, by central differences.
pub fn jacobian_determinant(domain: &SupportDomain, state: &BilliardState, eps: f64, opts: &MapOptions) -> Result<f64> {
    let eval = |s: f64, c: f64| -> Result<(f64, f64)> {
        let st = BilliardState::new(domain, s, c.acos());
        let next = billiard_map(domain, &st, opts)?;
        Ok((next.lift_s, next.phi.cos()))
    };
    let c0 = state.phi.cos();
    let (sp, cp_) = eval(state.lift_s + eps, c0)?;
    let (sm, cm) = eval(state.lift_s - eps, c0)?;
    let (sp2, cp2) = eval(state.lift_s, c0 + eps)?;
    let (sm2, cm2) = eval(state.lift_s, c0 - eps)?;
    let j11 = (sp - sm) / (2.0 * eps);
    let j21 = (cp_ - cm) / (2.0 * eps);
    let j12 = (sp2 - sm2) / (2.0 * eps);
    let j22 = (cp2 - cm2) / (2.0 * eps);
    Ok(j11 * j22 - j12 * j21)
}
