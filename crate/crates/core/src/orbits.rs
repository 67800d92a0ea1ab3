//! Maximal-length Birkhoff periodic orbits.
//!
//! A `(p, q)` configuration is a lift `θ₀ < θ₁ < … < θ_{q−1} < θ₀ + 2πp` of
//! normal angles; its action is the cyclic chord-length sum
//! `L = Σᵢ |x(θᵢ₊₁) − x(θᵢ)|` with `θ_{i+q} = θᵢ + 2πp`. Critical points of `L`
//! are billiard orbits and the maximum is the orbit realizing the marked length
//! spectrum. The solver starts from vertices equidistributed in `κ^{2/3} ds`,
//! runs cyclic coordinate ascent and finishes with a damped Newton iteration on
//! `∂L/∂θᵢ = 0`.

use std::collections::HashMap;
use std::f64::consts::{PI, TAU};
use std::sync::Mutex;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::{cross, iterate, BilliardState, MapOptions};
use crate::error::{Error, Result};
use crate::geometry::{SupportDomain, Vec2};
use crate::roots::safeguarded_newton;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    /// Converged when `max |cos φ_out − cos φ_in| < tol`.
    pub tol: f64,
    /// Perturbed restarts in addition to the default initialization.
    pub restarts: usize,
    pub q_max: u32,
    /// Coordinate sweeps hand over to Newton below this residual.
    pub sweep_switch: f64,
    pub max_sweeps: usize,
    /// Accepted Newton steps per polish.
    pub max_newton: usize,
    pub seed: u64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            restarts: 4,
            q_max: 512,
            sweep_switch: 1e-3,
            max_sweeps: 60,
            max_newton: 50,
            seed: 0x5eed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodicOrbit {
    pub p: u32,
    pub q: u32,
    /// Lifted normal angles of the vertices, strictly increasing, spanning less than `2πp`.
    pub thetas: Vec<f64>,
    pub length: f64,
    /// `max |cos φ_out − cos φ_in|` over vertices.
    pub residual: f64,
    pub converged: bool,
    /// Another start converged to a different orbit whose length agrees within `1e-10 ℓ`.
    pub degenerate: bool,
}

fn gcd(mut a: u32, mut b: u32) -> u32 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Checks `gcd(p, q) = 1`, `2 ≤ q ≤ q_max` and `1 ≤ p ≤ q − 1`. Rotation numbers
/// above 1/2 are accepted; they describe the reversed orbits of `(q − p)/q`.
pub fn check_rotation_number(p: u32, q: u32, q_max: u32) -> Result<()> {
    if q < 2 {
        return Err(Error::BadRotationNumber { p, q, reason: "q must be at least 2" });
    }
    if q > q_max {
        return Err(Error::BadRotationNumber { p, q, reason: "q exceeds q_max" });
    }
    if p == 0 || p >= q {
        return Err(Error::BadRotationNumber { p, q, reason: "p must lie in 1..q" });
    }
    if gcd(p, q) != 1 {
        return Err(Error::BadRotationNumber { p, q, reason: "p and q are not coprime" });
    }
    Ok(())
}

#[derive(Clone, Copy)]
struct Vertex {
    pos: Vec2,
    tangent: Vec2,
    normal: Vec2,
    rho: f64,
    drho: f64,
}

fn vertex(domain: &SupportDomain, theta: f64) -> Vertex {
    let f = domain.frame(theta);
    Vertex { pos: f.pos, tangent: f.tangent, normal: f.normal, rho: f.rho, drho: f.drho }
}

/// Second-order data of one chord `a → b` as a function of the two normal angles.
struct ChordTerms {
    #[allow(dead_code)]
    length: f64,
    ha: f64,
    hb: f64,
    haa: f64,
    hbb: f64,
    hab: f64,
}

fn chord_terms(a: &Vertex, b: &Vertex) -> ChordTerms {
    let c = b.pos - a.pos;
    let len = c.norm();
    let u = c / len;
    let xa = a.tangent * a.rho;
    let xb = b.tangent * b.rho;
    let xaa = a.tangent * a.drho - a.normal * a.rho;
    let xbb = b.tangent * b.drho - b.normal * b.rho;
    let (ua, ub) = (u.dot(&xa), u.dot(&xb));
    ChordTerms {
        length: len,
        ha: -ua,
        hb: ub,
        haa: -xaa.dot(&u) + (a.rho * a.rho - ua * ua) / len,
        hbb: xbb.dot(&u) + (b.rho * b.rho - ub * ub) / len,
        hab: (ua * ub - xa.dot(&xb)) / len,
    }
}

fn kahan_sum(values: impl Iterator<Item = f64>) -> f64 {
    let (mut sum, mut comp) = (0.0, 0.0);
    for v in values {
        let y = v - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
    sum
}

/// A `(p, q)` configuration with cached vertex data.
struct Config<'a> {
    domain: &'a SupportDomain,
    p: u32,
    thetas: Vec<f64>,
    verts: Vec<Vertex>,
}

impl<'a> Config<'a> {
    fn new(domain: &'a SupportDomain, p: u32, thetas: Vec<f64>) -> Self {
        let verts = thetas.iter().map(|&t| vertex(domain, t)).collect();
        Self { domain, p, thetas, verts }
    }

    fn q(&self) -> usize {
        self.thetas.len()
    }

    fn span(&self) -> f64 {
        TAU * self.p as f64
    }

    /// Every step, including the closing one, lies strictly between zero and one turn.
    fn is_ordered(thetas: &[f64], span: f64) -> bool {
        let step_ok = |d: f64| d > 0.0 && d < TAU;
        thetas.windows(2).all(|w| step_ok(w[1] - w[0])) && step_ok(thetas[0] + span - thetas[thetas.len() - 1])
    }

    fn length(&self) -> f64 {
        let q = self.q();
        kahan_sum((0..q).map(|i| (self.verts[(i + 1) % q].pos - self.verts[i].pos).norm()))
    }

    /// `(∂L/∂θᵢ, max |∂L/∂θᵢ| / ρᵢ)`.
    fn gradient(&self) -> (DVector<f64>, f64) {
        let q = self.q();
        let mut g = DVector::<f64>::zeros(q);
        for i in 0..q {
            let j = (i + 1) % q;
            let t = chord_terms(&self.verts[i], &self.verts[j]);
            g[i] += t.ha;
            g[j] += t.hb;
        }
        let res = (0..q).map(|i| (g[i] / self.verts[i].rho).abs()).fold(0.0, f64::max);
        (g, res)
    }

    fn hessian(&self) -> DMatrix<f64> {
        let q = self.q();
        let mut h = DMatrix::<f64>::zeros(q, q);
        for i in 0..q {
            let j = (i + 1) % q;
            let t = chord_terms(&self.verts[i], &self.verts[j]);
            h[(i, i)] += t.haa;
            h[(j, j)] += t.hbb;
            h[(i, j)] += t.hab;
            h[(j, i)] += t.hab;
        }
        h
    }

    fn neighbors(&self, i: usize) -> (f64, f64) {
        let q = self.q();
        let prev = if i == 0 { self.thetas[q - 1] - self.span() } else { self.thetas[i - 1] };
        let next = if i == q - 1 { self.thetas[0] + self.span() } else { self.thetas[i + 1] };
        (prev, next)
    }

    /// Maximizes the two chords through vertex `i` with its neighbours fixed.
    fn relax_vertex(&mut self, i: usize) {
        let q = self.q();
        let (prev_t, next_t) = self.neighbors(i);
        // steps stay below one turn; when that bound is active on the left the
        // local length decreases at both ends and there is nothing to bracket
        if next_t - TAU >= prev_t {
            return;
        }
        let (lo, hi) = (prev_t, next_t.min(prev_t + TAU));
        let prev = self.verts[(i + q - 1) % q].pos;
        let next = self.verts[(i + 1) % q].pos;
        let domain = self.domain;
        let local = |v: &Vertex| -> f64 { (v.pos - prev).norm() + (next - v.pos).norm() };
        // T·(e_in − e_out) is positive just after `lo` and negative just before `hi`
        let slope = |t: f64| -> (f64, f64) {
            let v = vertex(domain, t);
            let da = v.pos - prev;
            let db = next - v.pos;
            let (ra, rb) = (da.norm(), db.norm());
            let (ea, eb) = (da / ra, db / rb);
            let (ca, cb) = (v.tangent.dot(&ea), v.tangent.dot(&eb));
            let val = ca - cb;
            let der = -v.normal.dot(&(ea - eb)) + v.rho * ((1.0 - ca * ca) / ra + (1.0 - cb * cb) / rb);
            (val, der)
        };
        let root = safeguarded_newton(slope, lo, hi, false, 1e-15 * (1.0 + hi.abs()), 1e-15, 60);
        if !(root.x > lo && root.x < hi) {
            return;
        }
        let cand = vertex(domain, root.x);
        if local(&cand) >= local(&self.verts[i]) {
            self.thetas[i] = root.x;
            self.verts[i] = cand;
        }
    }

    fn sweep(&mut self) {
        for i in 0..self.q() {
            self.relax_vertex(i);
        }
    }

    /// If the Hessian has a positive eigenvalue, moves to the longer of the two
    /// trial points along its eigenvector and returns the length gained.
    fn escape_saddle(&mut self) -> Option<f64> {
        let h = self.hessian();
        let scale = (0..self.q()).map(|i| h[(i, i)].abs()).fold(0.0, f64::max);
        let eig = h.symmetric_eigen();
        let (k, lambda) = eig
            .eigenvalues
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
        if !(lambda > SADDLE_TOL * scale) {
            return None;
        }
        let dir = eig.eigenvectors.column(k).into_owned();
        let base = self.length();
        let mut best: Option<(Vec<f64>, f64)> = None;
        let mut amp = 0.25 * TAU / self.q() as f64;
        for _ in 0..30 {
            for sign in [1.0, -1.0] {
                let trial: Vec<f64> = self.thetas.iter().zip(dir.iter()).map(|(t, d)| t + sign * amp * d).collect();
                if !Self::is_ordered(&trial, self.span()) {
                    continue;
                }
                let len = Config::new(self.domain, self.p, trial.clone()).length();
                if len > base && best.as_ref().is_none_or(|b| len > b.1) {
                    best = Some((trial, len));
                }
            }
            if best.is_some() {
                break;
            }
            amp *= 0.5;
        }
        let (trial, len) = best?;
        self.set_thetas(trial);
        Some(len - base)
    }

    fn set_thetas(&mut self, thetas: Vec<f64>) {
        self.verts = thetas.iter().map(|&t| vertex(self.domain, t)).collect();
        self.thetas = thetas;
    }
}

/// Cumulative `κ^{2/3} ds = ρ^{1/3} dθ` on the node grid, normalized to `[0, 1]`.
fn lazutkin_table(domain: &SupportDomain) -> Vec<f64> {
    let n = domain.node_count();
    let dt = TAU / n as f64;
    let w: Vec<f64> = (0..=n).map(|j| domain.rho(dt * j as f64).cbrt()).collect();
    let mut cum = vec![0.0; n + 1];
    for j in 0..n {
        cum[j + 1] = cum[j] + 0.5 * dt * (w[j] + w[j + 1]);
    }
    let total = cum[n];
    cum.iter_mut().for_each(|v| *v /= total);
    cum
}

/// Inverse of the Lazutkin coordinate on the universal cover.
fn lazutkin_inverse(table: &[f64], lambda: f64) -> f64 {
    let turns = lambda.floor();
    let frac = lambda - turns;
    let n = table.len() - 1;
    let j = table.partition_point(|&v| v <= frac).clamp(1, n) - 1;
    let t = (frac - table[j]) / (table[j + 1] - table[j]);
    TAU * (turns + (j as f64 + t) / n as f64)
}

/// Hessian of `L` in its eigenbasis, with the gradient projected on each mode.
/// Near-null modes are dropped: integrable tables have an exact null mode along each
/// family of periodic orbits, and the gradient has no component there.
struct Eigenmodes {
    curvatures: Vec<f64>,
    slopes: Vec<f64>,
    vectors: DMatrix<f64>,
}

impl Eigenmodes {
    fn new(hessian: &DMatrix<f64>, g: &DVector<f64>) -> Self {
        let q = g.len();
        let scale = (0..q).map(|i| hessian[(i, i)].abs()).fold(0.0, f64::max).max(1e-300);
        let eig = hessian.clone().symmetric_eigen();
        let mut curvatures = Vec::new();
        let mut slopes = Vec::new();
        let mut columns = Vec::new();
        for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
            if lambda.abs() < NULL_MODE_TOL * scale {
                continue;
            }
            let v = eig.eigenvectors.column(k).into_owned();
            // −H is positive definite at a maximum; |λ| keeps the step uphill elsewhere
            curvatures.push(lambda.abs());
            slopes.push(v.dot(g));
            columns.push(v);
        }
        let vectors = if columns.is_empty() { DMatrix::zeros(q, 0) } else { DMatrix::from_columns(&columns) };
        Eigenmodes { curvatures, slopes, vectors }
    }

    /// Coefficients of the damped step `(|H| + ν)⁻¹ g` in the eigenbasis.
    fn coefficients(&self, nu: f64) -> Vec<f64> {
        self.curvatures.iter().zip(&self.slopes).map(|(c, g)| g / (c + nu)).collect()
    }

    /// Maximizer of the quadratic model within `radius`, and its predicted gain.
    fn step(&self, radius: f64) -> (DVector<f64>, f64) {
        let norm = |c: &[f64]| c.iter().map(|x| x * x).sum::<f64>().sqrt();
        let mut coef = self.coefficients(0.0);
        if norm(&coef) > radius {
            let (mut lo, mut hi) = (0.0, 1.0);
            while norm(&self.coefficients(hi)) > radius {
                hi *= 2.0;
            }
            for _ in 0..100 {
                let mid = 0.5 * (lo + hi);
                if norm(&self.coefficients(mid)) > radius {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            coef = self.coefficients(hi);
        }
        let model = coef
            .iter()
            .zip(&self.slopes)
            .zip(&self.curvatures)
            .map(|((c, g), k)| c * g - 0.5 * k * c * c)
            .sum();
        let step = if coef.is_empty() { DVector::zeros(self.vectors.nrows()) } else { &self.vectors * DVector::from_vec(coef) };
        (step, model)
    }
}

const NULL_MODE_TOL: f64 = 1e-11;
const MAX_ROUNDS: usize = 8;
/// Consecutive rejected trust-region steps before giving up on a round.
const MAX_REJECTS: usize = 60;
/// Largest residual accepted with a round-off stationarity certificate.
const STATIONARY_RESIDUAL: f64 = 1e-6;
/// Relative size of a Hessian eigenvalue that marks a critical point as a saddle.
const SADDLE_TOL: f64 = 1e-9;

/// Vertex `i` at Lazutkin coordinate `⌊ip/q⌋ + u_{ip mod q}` for random sorted
/// `u ∈ [0, 1)`: an arbitrary configuration in the cyclic order of a `p/q` rotation.
fn random_birkhoff_start(table: &[f64], p: u32, q: u32, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut u: Vec<f64> = (0..q).map(|_| rng.gen_range(0.0..1.0)).collect();
    u.sort_by(|a, b| a.partial_cmp(b).unwrap());
    (0..q as u64)
        .map(|i| {
            let ip = i * p as u64;
            lazutkin_inverse(table, (ip / q as u64) as f64 + u[(ip % q as u64) as usize])
        })
        .collect()
}

enum Attempt {
    Done { thetas: Vec<f64>, length: f64, residual: f64, converged: bool },
    Collapsed,
}

fn ascend(domain: &SupportDomain, p: u32, init: Vec<f64>, opts: &SolveOptions) -> Attempt {
    let mut cfg = Config::new(domain, p, init);
    if !Config::is_ordered(&cfg.thetas, cfg.span()) {
        return Attempt::Collapsed;
    }
    let mut length = cfg.length();
    let (_, mut residual) = cfg.gradient();
    // Set when Newton stalls although its model predicts no resolvable gain. Near
    // a separatrix the residual can stay above `tol` in almost flat directions
    // while the length is already exact to round-off.
    let mut stationary = false;
    for _round in 0..MAX_ROUNDS {
        if residual < opts.tol || stationary {
            // Newton also converges to saddles, such as the minimax orbit; leave
            // along an ascent direction of the Hessian and start over
            match cfg.escape_saddle() {
                Some(gain) => {
                    stationary = false;
                    length += gain;
                    residual = cfg.gradient().1;
                }
                None => break,
            }
        }
        let mut sweeps = 0;
        while residual > opts.sweep_switch && sweeps < opts.max_sweeps {
            cfg.sweep();
            sweeps += 1;
            let new_len = cfg.length();
            debug_assert!(Config::is_ordered(&cfg.thetas, cfg.span()));
            debug_assert!(new_len >= length - 1e-12 * length.abs());
            length = new_len;
            residual = cfg.gradient().1;
        }
        // Newton polish inside a trust region on the length
        let mut radius = f64::INFINITY;
        let mut accepted = 0;
        let mut rejected = 0;
        while residual >= opts.tol && accepted < opts.max_newton && rejected < MAX_REJECTS {
            let (g, _) = cfg.gradient();
            let eig = Eigenmodes::new(&cfg.hessian(), &g);
            let (step, model) = eig.step(radius);
            let size = step.norm();
            let noise = 64.0 * f64::EPSILON * length.abs();
            let trial: Vec<f64> = cfg.thetas.iter().zip(step.iter()).map(|(t, d)| t + d).collect();
            let cand = Config::is_ordered(&trial, cfg.span()).then(|| Config::new(domain, p, trial));
            let ratio = cand.as_ref().map_or(-1.0, |c| (c.length() - length) / model);
            let ok = cand.as_ref().is_some_and(|c| {
                if model > 10.0 * noise {
                    ratio > 1e-4
                } else {
                    c.length() - length >= -noise && c.gradient().1 < residual
                }
            });
            if !ok || ratio < 0.25 {
                radius = 0.25 * size;
            } else if ratio > 0.75 && size >= 0.99 * radius {
                radius *= 2.0;
            }
            if let (true, Some(c)) = (ok, cand) {
                length = c.length();
                cfg = c;
                residual = cfg.gradient().1;
                accepted += 1;
                rejected = 0;
            } else if model <= noise && residual < STATIONARY_RESIDUAL {
                // no resolvable gain left and the step does not improve the residual
                stationary = true;
                break;
            } else {
                rejected += 1;
            }
        }
    }
    if !Config::is_ordered(&cfg.thetas, cfg.span()) {
        return Attempt::Collapsed;
    }
    Attempt::Done { thetas: cfg.thetas, length, residual, converged: residual < opts.tol || stationary }
}

/// Largest distance from a vertex of `a` to the nearest vertex of `b`, as angles mod 2π.
fn vertex_set_distance(a: &[f64], b: &[f64]) -> f64 {
    let mut bs: Vec<f64> = b.iter().map(|t| t.rem_euclid(TAU)).collect();
    bs.sort_by(|x, y| x.partial_cmp(y).unwrap());
    a.iter()
        .map(|t| {
            let t = t.rem_euclid(TAU);
            let k = bs.partition_point(|&v| v < t);
            let cands = [bs[k % bs.len()], bs[(k + bs.len() - 1) % bs.len()]];
            cands
                .iter()
                .map(|v| {
                    let d = (t - v).rem_euclid(TAU);
                    d.min(TAU - d)
                })
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max)
}

/// Finds the maximal-length periodic orbit of rotation number `p/q`.
pub fn solve_orbit(domain: &SupportDomain, p: u32, q: u32, opts: &SolveOptions) -> Result<PeriodicOrbit> {
    check_rotation_number(p, q, opts.q_max)?;
    let table = lazutkin_table(domain);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ ((p as u64) << 32 | q as u64));
    let cell = 1.0 / q as f64;
    let mut results: Vec<(Vec<f64>, f64, f64, bool)> = Vec::new();
    let mut collapsed = 0;
    for k in 0..=opts.restarts {
        let phase = k as f64 * cell / (opts.restarts + 1) as f64;
        let init: Vec<f64> = if k % 2 == 0 {
            (0..q)
                .map(|i| {
                    let jitter = if k == 0 { 0.0 } else { rng.gen_range(-0.2..0.2) * cell };
                    let lambda = phase + (i as f64 * p as f64) / q as f64 + jitter;
                    lazutkin_inverse(&table, lambda)
                })
                .collect()
        } else {
            random_birkhoff_start(&table, p, q, &mut rng)
        };
        match ascend(domain, p, init, opts) {
            Attempt::Done { thetas, length, residual, converged } => {
                results.push((thetas, length, residual, converged))
            }
            Attempt::Collapsed => collapsed += 1,
        }
    }
    if results.is_empty() {
        debug_assert!(collapsed > 0);
        return Err(Error::OrderCollapse { p, q });
    }
    let best = results
        .iter()
        .enumerate()
        .filter(|(_, r)| r.3)
        .max_by(|a, b| a.1 .1.partial_cmp(&b.1 .1).unwrap())
        .map(|(i, _)| i);
    let Some(best) = best else {
        let res = results.iter().map(|r| r.2).fold(f64::INFINITY, f64::min);
        return Err(Error::NoConvergence { what: "periodic orbit solver", residual: res });
    };
    let ell = domain.perimeter();
    let (thetas, length, residual, _) = results[best].clone();
    let degenerate = results.iter().enumerate().any(|(i, r)| {
        i != best && r.3 && (r.1 - length).abs() <= 1e-10 * ell && vertex_set_distance(&r.0, &thetas) > 1e-6
    });
    // normalize the lift so that θ₀ ∈ [0, 2π)
    let shift = TAU * (thetas[0] / TAU).floor();
    let thetas = thetas.into_iter().map(|t| t - shift).collect();
    Ok(PeriodicOrbit { p, q, thetas, length, residual, converged: true, degenerate })
}

/// Outcome of re-running the billiard map along an orbit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RotationReport {
    pub lift_advance: f64,
    /// Largest distance between a reflected ray's landing point and the orbit vertex it should hit.
    pub vertex_error: f64,
    pub ok: bool,
}

/// Replays the orbit one bounce at a time: the ray from vertex `k` towards vertex
/// `k + 1` is reflected by the map and must land on vertex `k + 2`. Restarting at
/// every vertex keeps the check meaningful for hyperbolic orbits, along which a
/// single long trajectory separates exponentially from the orbit.
pub fn rotation_report(domain: &SupportDomain, orbit: &PeriodicOrbit) -> Result<RotationReport> {
    let ell = domain.perimeter();
    let q = orbit.thetas.len();
    if q < 2 || q != orbit.q as usize {
        return Err(Error::InvalidInput(format!("orbit has {q} vertices but q = {}", orbit.q)));
    }
    let opts = MapOptions::default();
    let mut advance = 0.0;
    let mut vertex_error: f64 = 0.0;
    for k in 0..q {
        let f0 = domain.frame(orbit.thetas[k]);
        let u = domain.position(orbit.thetas[(k + 1) % q]) - f0.pos;
        let phi = cross(&f0.tangent, &u).atan2(f0.tangent.dot(&u));
        if !(phi > 0.0 && phi < PI) {
            return Ok(RotationReport { lift_advance: f64::NAN, vertex_error: f64::INFINITY, ok: false });
        }
        let start = BilliardState::new(domain, domain.arclength(orbit.thetas[k]), phi);
        let traj = iterate(domain, &start, 2, &opts)?;
        advance += traj[1].lift_s - start.lift_s;
        let expected = domain.position(orbit.thetas[(k + 2) % q]);
        let got = domain.position(domain.theta_at_arclength(traj[2].lift_s));
        vertex_error = vertex_error.max((expected - got).norm());
    }
    let ok = (advance - orbit.p as f64 * ell).abs() < 1e-6 * ell && vertex_error < 1e-6 * ell;
    Ok(RotationReport { lift_advance: advance, vertex_error, ok })
}

/// True when the map reproduces every bounce of the orbit with total lift advance `pℓ`.
pub fn validate_rotation_number(domain: &SupportDomain, orbit: &PeriodicOrbit) -> bool {
    rotation_report(domain, orbit).map(|r| r.ok).unwrap_or(false)
}

/// Marked length spectrum value `MLS(p/q)` (uncached).
pub fn mls(domain: &SupportDomain, p: u32, q: u32, opts: &SolveOptions) -> Result<f64> {
    Ok(solve_orbit(domain, p, q, opts)?.length)
}

/// One cached value, as stored on disk.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub p: u32,
    pub q: u32,
    pub mls: f64,
}

/// MLS values keyed by `(domain hash, p, q)`. Safe to share across threads;
/// concurrent inserts for the same key store values that agree within tolerance.
#[derive(Debug, Default)]
pub struct OrbitCache {
    map: Mutex<HashMap<(String, u32, u32), f64>>,
}

impl OrbitCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.map.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn mls(&self, domain: &SupportDomain, p: u32, q: u32, opts: &SolveOptions) -> Result<f64> {
        let key = (domain.canonical_hash(), p, q);
        if let Some(v) = self.map.lock().unwrap().get(&key) {
            return Ok(*v);
        }
        let v = mls(domain, p, q, opts)?;
        self.map.lock().unwrap().insert(key, v);
        Ok(v)
    }

    /// Entries for one domain, sorted by `(q, p)`.
    pub fn entries(&self, domain_hash: &str) -> Vec<CacheEntry> {
        let map = self.map.lock().unwrap();
        let mut out: Vec<CacheEntry> = map
            .iter()
            .filter(|((h, _, _), _)| h == domain_hash)
            .map(|((_, p, q), v)| CacheEntry { p: *p, q: *q, mls: *v })
            .collect();
        out.sort_by_key(|e| (e.q, e.p));
        out
    }

    pub fn insert_entries(&self, domain_hash: &str, entries: &[CacheEntry]) {
        let mut map = self.map.lock().unwrap();
        for e in entries {
            map.insert((domain_hash.to_string(), e.p, e.q), e.mls);
        }
    }
}
