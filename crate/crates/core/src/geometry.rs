//! Strictly convex tables described by a truncated trigonometric support function.
//!
//! A table is stored as `h(θ) = a₀ + Σ_{n≥2} (aₙ cos nθ + bₙ sin nθ)`, where `θ` is
//! the angle of the outward normal. The boundary point with normal angle `θ` is
//! `x(θ) = h(θ)·n(θ) + h′(θ)·t(θ)` with `n = (cos θ, sin θ)` and `t = (−sin θ, cos θ)`,
//! and the radius of curvature is `ρ = h + h″`. Frequency one only translates the
//! table, so it is excluded.
//!
//! All θ-derivatives are taken on the coefficient arrays. Arclength derivatives of
//! the curvature use `d/ds = ρ⁻¹ d/dθ`, pushed through truncated Taylor series.

use std::f64::consts::{PI, TAU};

use nalgebra::Vector2;
use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::jet::Series;

pub type Vec2 = Vector2<f64>;

/// Highest arclength derivative of the curvature that `curvature_jet` supports.
pub const MAX_JET_ORDER: usize = 8;
/// Default quadrature / table resolution.
pub const DEFAULT_NODES: usize = 1024;
/// Tables with `min ρ < CONVEXITY_MARGIN · max ρ` are rejected.
pub const CONVEXITY_MARGIN: f64 = 1e-6;

const ELLIPSE_FFT_SIZE: usize = 4096;
const COEFF_CUTOFF: f64 = 1e-16;

fn default_nodes() -> usize {
    DEFAULT_NODES
}

/// The shape part of a domain description file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "params", rename_all = "snake_case")]
pub enum Shape {
    Circle {
        radius: f64,
    },
    Ellipse {
        a: f64,
        b: f64,
    },
    /// `coefficients` holds `[n, a_n, b_n]` triples with `n ≥ 2`.
    SupportFourier {
        a0: f64,
        #[serde(default)]
        coefficients: Vec<(u32, f64, f64)>,
    },
}

/// A domain description: `{"type": ..., "params": {...}, "nodes": N}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    #[serde(flatten)]
    pub shape: Shape,
    #[serde(default = "default_nodes")]
    pub nodes: usize,
}

impl DomainSpec {
    pub fn circle(radius: f64, nodes: usize) -> Self {
        Self { shape: Shape::Circle { radius }, nodes }
    }

    pub fn ellipse(a: f64, b: f64, nodes: usize) -> Self {
        Self { shape: Shape::Ellipse { a, b }, nodes }
    }

    pub fn support_fourier(a0: f64, coefficients: Vec<(u32, f64, f64)>, nodes: usize) -> Self {
        Self { shape: Shape::SupportFourier { a0, coefficients }, nodes }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// One retained harmonic of the support function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FourierMode {
    pub n: u32,
    pub a: f64,
    pub b: f64,
}

/// Curvature and its arclength derivatives `(κ, κ₁, …, κₘ)` at one boundary point.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureJet {
    pub values: Vec<f64>,
}

impl CurvatureJet {
    /// `κ_j`; panics if `j` exceeds the order the jet was built with.
    #[inline]
    pub fn k(&self, j: usize) -> f64 {
        self.values[j]
    }

    pub fn order(&self) -> usize {
        self.values.len() - 1
    }
}

/// Result of `boundary_point`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryPoint {
    pub position: Vec2,
    pub tangent_angle: f64,
    pub s: f64,
}

/// Position and first-order frame at a normal angle, used by the dynamics.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Frame {
    pub pos: Vec2,
    pub tangent: Vec2,
    pub normal: Vec2,
    pub rho: f64,
    pub drho: f64,
}

/// A validated strictly convex table. Immutable after construction.
#[derive(Debug, Clone)]
pub struct SupportDomain {
    a0: f64,
    modes: Vec<FourierMode>,
    node_count: usize,
    perimeter: f64,
    rho_min: f64,
    rho_max: f64,
    /// `s(θ_j)` for `θ_j = 2πj/N`, `j = 0..=N`.
    arclength_table: Vec<f64>,
}

/// Builds and validates a table from its description.
pub fn build_domain(spec: &DomainSpec) -> Result<SupportDomain> {
    match &spec.shape {
        Shape::Circle { radius } => {
            if !(radius.is_finite() && *radius > 0.0) {
                return Err(Error::BadSpec(format!("circle radius must be positive, got {radius}")));
            }
            SupportDomain::from_modes(*radius, Vec::new(), spec.nodes)
        }
        Shape::Ellipse { a, b } => {
            if !(a.is_finite() && b.is_finite() && *a > 0.0 && *b > 0.0) {
                return Err(Error::BadSpec(format!("ellipse semi-axes must be positive, got ({a}, {b})")));
            }
            let (a0, modes) = ellipse_coefficients(*a, *b);
            SupportDomain::from_modes(a0, modes, spec.nodes)
        }
        Shape::SupportFourier { a0, coefficients } => {
            let mut modes: Vec<FourierMode> = Vec::with_capacity(coefficients.len());
            for &(n, a, b) in coefficients {
                if n < 2 {
                    return Err(Error::BadSpec(format!(
                        "frequency {n} is not allowed (n = 0 is a0, n = 1 is a translation)"
                    )));
                }
                if modes.iter().any(|m| m.n == n) {
                    return Err(Error::BadSpec(format!("frequency {n} listed twice")));
                }
                modes.push(FourierMode { n, a, b });
            }
            modes.sort_by_key(|m| m.n);
            SupportDomain::from_modes(*a0, modes, spec.nodes)
        }
    }
}

/// Fourier coefficients of `h(θ) = √(a²cos²θ + b²sin²θ)`, truncated at round-off.
fn ellipse_coefficients(a: f64, b: f64) -> (f64, Vec<FourierMode>) {
    let m = ELLIPSE_FFT_SIZE;
    let mut buf: Vec<Complex<f64>> = (0..m)
        .map(|j| {
            let t = TAU * j as f64 / m as f64;
            let (s, c) = t.sin_cos();
            Complex::new((a * a * c * c + b * b * s * s).sqrt(), 0.0)
        })
        .collect();
    FftPlanner::new().plan_fft_forward(m).process(&mut buf);
    let scale = 1.0 / m as f64;
    let a0 = buf[0].re * scale;
    let cutoff = COEFF_CUTOFF * a0;
    // the axis-aligned ellipse has only even cosine harmonics; truncate at the
    // first one that drops below round-off
    let mut modes = Vec::new();
    for n in (2..m / 2).step_by(2) {
        let an = 2.0 * buf[n].re * scale;
        if an.abs() <= cutoff {
            break;
        }
        modes.push(FourierMode { n: n as u32, a: an, b: 0.0 });
    }
    (a0, modes)
}

/// `(cos, sin)` of `x + kπ/2`, given `(cos x, sin x)`.
#[inline]
fn quarter_shift(c: f64, s: f64, k: usize) -> (f64, f64) {
    match k % 4 {
        0 => (c, s),
        1 => (-s, c),
        2 => (-c, -s),
        _ => (s, -c),
    }
}

impl SupportDomain {
    fn from_modes(a0: f64, modes: Vec<FourierMode>, node_count: usize) -> Result<Self> {
        if !a0.is_finite() || modes.iter().any(|m| !(m.a.is_finite() && m.b.is_finite())) {
            return Err(Error::BadSpec("non-finite support coefficient".into()));
        }
        if node_count < 16 {
            return Err(Error::BadSpec(format!("node count {node_count} is below the minimum of 16")));
        }
        let mut dom = SupportDomain {
            a0,
            modes,
            node_count,
            perimeter: TAU * a0,
            rho_min: 0.0,
            rho_max: 0.0,
            arclength_table: Vec::new(),
        };
        // node grid and a 4x refinement of it
        let fine = 4 * node_count;
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for j in 0..fine {
            let r = dom.rho(TAU * j as f64 / fine as f64);
            lo = lo.min(r);
            hi = hi.max(r);
        }
        dom.rho_min = lo;
        dom.rho_max = hi;
        if !(lo > 0.0) || lo < CONVEXITY_MARGIN * hi {
            return Err(Error::ConvexityViolation { min_rho: lo, max_rho: hi });
        }
        dom.arclength_table = (0..=node_count)
            .map(|j| dom.arclength(TAU * j as f64 / node_count as f64))
            .collect();
        Ok(dom)
    }

    pub fn a0(&self) -> f64 {
        self.a0
    }

    pub fn modes(&self) -> &[FourierMode] {
        &self.modes
    }

    /// Highest retained frequency (0 for a circle).
    pub fn mode_count(&self) -> u32 {
        self.modes.last().map_or(0, |m| m.n)
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    /// `ℓ = ∫ρ dθ = 2π a₀`.
    pub fn perimeter(&self) -> f64 {
        self.perimeter
    }

    pub fn rho_range(&self) -> (f64, f64) {
        (self.rho_min, self.rho_max)
    }

    pub fn arclength_table(&self) -> &[f64] {
        &self.arclength_table
    }

    pub fn node_thetas(&self) -> impl Iterator<Item = f64> + '_ {
        let n = self.node_count as f64;
        (0..self.node_count).map(move |j| TAU * j as f64 / n)
    }

    /// Same table at a different quadrature resolution.
    pub fn with_nodes(&self, node_count: usize) -> Result<Self> {
        Self::from_modes(self.a0, self.modes.clone(), node_count)
    }

    /// The table rotated counterclockwise by `angle`.
    pub fn rotated(&self, angle: f64) -> Result<Self> {
        let modes = self
            .modes
            .iter()
            .map(|m| {
                let (s, c) = (m.n as f64 * angle).sin_cos();
                FourierMode { n: m.n, a: m.a * c - m.b * s, b: m.a * s + m.b * c }
            })
            .collect();
        Self::from_modes(self.a0, modes, self.node_count)
    }

    /// Mirror image in the horizontal axis.
    pub fn reflected(&self) -> Result<Self> {
        let modes = self.modes.iter().map(|m| FourierMode { b: -m.b, ..*m }).collect();
        Self::from_modes(self.a0, modes, self.node_count)
    }

    /// Dilation `Ω ↦ RΩ`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        if !(factor > 0.0) {
            return Err(Error::BadSpec(format!("scale factor must be positive, got {factor}")));
        }
        let modes = self
            .modes
            .iter()
            .map(|m| FourierMode { n: m.n, a: m.a * factor, b: m.b * factor })
            .collect();
        Self::from_modes(self.a0 * factor, modes, self.node_count)
    }

    /// Equivalent `support_fourier` description.
    pub fn to_spec(&self) -> DomainSpec {
        DomainSpec::support_fourier(
            self.a0,
            self.modes.iter().map(|m| (m.n, m.a, m.b)).collect(),
            self.node_count,
        )
    }

    /// Hex SHA-256 of the canonical coefficient list; keys orbit caches.
    pub fn canonical_hash(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.a0.to_bits().to_le_bytes());
        for m in &self.modes {
            hasher.update(m.n.to_le_bytes());
            hasher.update(m.a.to_bits().to_le_bytes());
            hasher.update(m.b.to_bits().to_le_bytes());
        }
        hex::encode(hasher.finalize())
    }

    /// `h^(k)(θ)`.
    pub fn support_derivative(&self, theta: f64, k: usize) -> f64 {
        let mut acc = if k == 0 { self.a0 } else { 0.0 };
        for m in &self.modes {
            let n = m.n as f64;
            let (s, c) = (n * theta).sin_cos();
            let (ck, sk) = quarter_shift(c, s, k);
            acc += n.powi(k as i32) * (m.a * ck + m.b * sk);
        }
        acc
    }

    /// `ρ^(k)(θ)` for `k = 0..=order`.
    pub fn rho_derivatives(&self, theta: f64, order: usize) -> Vec<f64> {
        let mut out = vec![0.0; order + 1];
        out[0] = self.a0;
        for m in &self.modes {
            let n = m.n as f64;
            let (s, c) = (n * theta).sin_cos();
            let base = 1.0 - n * n;
            let mut npow = base;
            for (k, slot) in out.iter_mut().enumerate() {
                let (ck, sk) = quarter_shift(c, s, k);
                *slot += npow * (m.a * ck + m.b * sk);
                npow *= n;
            }
        }
        out
    }

    /// Radius of curvature `ρ(θ) = h + h″`.
    pub fn rho(&self, theta: f64) -> f64 {
        let mut acc = self.a0;
        for m in &self.modes {
            let n = m.n as f64;
            let (s, c) = (n * theta).sin_cos();
            acc += (1.0 - n * n) * (m.a * c + m.b * s);
        }
        acc
    }

    pub(crate) fn frame(&self, theta: f64) -> Frame {
        let (mut h, mut dh, mut rho, mut drho) = (self.a0, 0.0, self.a0, 0.0);
        for m in &self.modes {
            let n = m.n as f64;
            let (s, c) = (n * theta).sin_cos();
            let v = m.a * c + m.b * s;
            let dv = n * (m.b * c - m.a * s);
            h += v;
            dh += dv;
            rho += (1.0 - n * n) * v;
            drho += (1.0 - n * n) * dv;
        }
        let (st, ct) = theta.sin_cos();
        let normal = Vec2::new(ct, st);
        let tangent = Vec2::new(-st, ct);
        Frame { pos: normal * h + tangent * dh, tangent, normal, rho, drho }
    }

    /// Boundary position with outward normal angle `theta`.
    pub fn position(&self, theta: f64) -> Vec2 {
        self.frame(theta).pos
    }

    pub fn boundary_point(&self, theta: f64) -> BoundaryPoint {
        BoundaryPoint {
            position: self.position(theta),
            tangent_angle: theta + 0.5 * PI,
            s: self.arclength(theta),
        }
    }

    /// Arclength from `θ = 0`, valid on the universal cover.
    pub fn arclength(&self, theta: f64) -> f64 {
        let mut acc = self.a0 * theta;
        for m in &self.modes {
            let n = m.n as f64;
            let (s, c) = (n * theta).sin_cos();
            acc += (1.0 - n * n) / n * (m.a * s + m.b * (1.0 - c));
        }
        acc
    }

    /// Inverse of `arclength` on the universal cover.
    pub fn theta_at_arclength(&self, s: f64) -> f64 {
        let turns = (s / self.perimeter).floor();
        let local = s - turns * self.perimeter;
        // locate the table cell, interpolate, then polish with Newton
        let tab = &self.arclength_table;
        let j = match tab.binary_search_by(|v| v.partial_cmp(&local).unwrap()) {
            Ok(j) => j.min(self.node_count - 1),
            Err(j) => j.saturating_sub(1).min(self.node_count - 1),
        };
        let dt = TAU / self.node_count as f64;
        let frac = (local - tab[j]) / (tab[j + 1] - tab[j]);
        let mut theta = dt * (j as f64 + frac);
        for _ in 0..50 {
            let step = (self.arclength(theta) - local) / self.rho(theta);
            theta -= step;
            if step.abs() < 1e-16 * (1.0 + theta.abs()) {
                break;
            }
        }
        theta + turns * TAU
    }

    /// `(κ, κ₁, …, κₘ)` at normal angle `theta`.
    pub fn curvature_jet(&self, theta: f64, order: usize) -> Result<CurvatureJet> {
        if order > MAX_JET_ORDER {
            return Err(Error::OrderTooHigh { order, max: MAX_JET_ORDER });
        }
        let rho = Series::from_derivatives(&self.rho_derivatives(theta, order));
        let inv_rho = rho.recip();
        let mut values = Vec::with_capacity(order + 1);
        let mut f = inv_rho.clone();
        values.push(f.0[0]);
        for _ in 0..order {
            f = inv_rho.mul(&f.derivative());
            values.push(f.0[0]);
        }
        Ok(CurvatureJet { values })
    }

    /// Jets at every quadrature node.
    pub fn node_jets(&self, order: usize) -> Result<Vec<CurvatureJet>> {
        self.node_thetas().map(|t| self.curvature_jet(t, order)).collect()
    }

    /// `∮ f ds` by the periodic trapezoid rule in θ with weight ρ.
    pub fn integrate_boundary<F>(&self, order: usize, f: F) -> Result<f64>
    where
        F: Fn(&CurvatureJet) -> f64,
    {
        let jets = self.node_jets(order)?;
        self.integrate_jets(&jets, f)
    }

    /// Same as `integrate_boundary` on precomputed node jets.
    pub fn integrate_jets<F>(&self, jets: &[CurvatureJet], f: F) -> Result<f64>
    where
        F: Fn(&CurvatureJet) -> f64,
    {
        let w = TAU / jets.len() as f64;
        let mut sum = 0.0;
        let mut comp = 0.0;
        for (j, jet) in jets.iter().enumerate() {
            // ds = ρ dθ = dθ / κ
            let v = f(jet) / jet.k(0);
            if !v.is_finite() {
                return Err(Error::NonFiniteIntegrand { theta: TAU * j as f64 / jets.len() as f64 });
            }
            let y = v - comp;
            let t = sum + y;
            comp = (t - sum) - y;
            sum = t;
        }
        Ok(sum * w)
    }
}
