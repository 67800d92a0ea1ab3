//! Boundary integral invariants `I₀ … I₄` and the identities/inequalities that
//! bound the curvature in terms of them.
//!
//! `I₂` and `I₃` are integrated against `ds` like the others.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::geometry::{CurvatureJet, SupportDomain};

/// `A² = 257·9/100` in the completed-square form of `I₃`.
pub const CSQ_A_SQUARED: f64 = 23.13;

/// The two admissible values of `B = √β` in the completed square, `√257/2 ± 1/2`.
pub fn csq_b_branches() -> [f64; 2] {
    let r = 257f64.sqrt() / 2.0;
    [r + 0.5, r - 0.5]
}

/// A coefficient and a monomial of an integrand; `(c, f)` contributes `c·f(jet)`.
type Term = (f64, fn(&CurvatureJet) -> f64);

/// Terms of the `I₄` integrand.
fn i4_terms() -> [Term; 11] {
    fn p(k: f64, e: f64) -> f64 {
        k.powf(e)
    }
    [
        (281.0 / 44800.0, |j| p(j.k(0), 8.0 / 3.0)),
        (281.0 / 8400.0, |j| j.k(1).powi(2) / p(j.k(0), 4.0 / 3.0)),
        (167.0 / 4200.0, |j| j.k(2).powi(2) / p(j.k(0), 10.0 / 3.0)),
        (-167.0 / 700.0, |j| j.k(1).powi(2) * j.k(2) / p(j.k(0), 13.0 / 3.0)),
        (1.0 / 42.0, |j| j.k(3).powi(2) / p(j.k(0), 16.0 / 3.0)),
        (559.0 / 2100.0, |j| j.k(1).powi(4) / p(j.k(0), 16.0 / 3.0)),
        (-473.0 / 4725.0, |j| j.k(2).powi(3) / p(j.k(0), 19.0 / 3.0)),
        (-10.0 / 21.0, |j| j.k(3) * j.k(1) * j.k(2) / p(j.k(0), 19.0 / 3.0)),
        (5.0 / 7.0, |j| j.k(3) * j.k(1).powi(3) / p(j.k(0), 22.0 / 3.0)),
        (10777.0 / 1575.0, |j| j.k(1).powi(4) * j.k(2) / p(j.k(0), 25.0 / 3.0)),
        (521897.0 / 127575.0, |j| j.k(1).powi(6) / p(j.k(0), 28.0 / 3.0)),
    ]
}

fn i3_terms() -> [Term; 5] {
    [
        (9.0, |j| j.k(0).powi(2)),
        (24.0, |j| j.k(1).powi(2) / j.k(0).powi(2)),
        (24.0, |j| j.k(2).powi(2) / j.k(0).powi(4)),
        (-144.0, |j| j.k(1).powi(2) * j.k(2) / j.k(0).powi(5)),
        (176.0, |j| j.k(1).powi(4) / j.k(0).powi(6)),
    ]
}

fn i2_terms() -> [Term; 2] {
    [(9.0, |j| j.k(0).powf(4.0 / 3.0)), (8.0, |j| j.k(1).powi(2) / j.k(0).powf(8.0 / 3.0))]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvariantBreakdown {
    pub i2: Vec<f64>,
    pub i3: Vec<f64>,
    pub i4: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvariantVector {
    /// `(I₀, I₁, I₂, I₃, I₄)`.
    pub values: [f64; 5],
    /// Integral of each coefficient-weighted monomial, in formula order.
    pub breakdown: InvariantBreakdown,
}

impl InvariantVector {
    pub fn get(&self, k: usize) -> f64 {
        self.values[k]
    }
}

fn integrate_terms(domain: &SupportDomain, jets: &[CurvatureJet], terms: &[Term]) -> Result<Vec<f64>> {
    terms
        .iter()
        .map(|(c, f)| domain.integrate_jets(jets, |j| c * f(j)))
        .collect()
}

pub fn compute_invariants(domain: &SupportDomain) -> Result<InvariantVector> {
    let jets = domain.node_jets(3)?;
    let i0 = domain.integrate_jets(&jets, |_| 1.0)?;
    let i1 = domain.integrate_jets(&jets, |j| j.k(0).powf(2.0 / 3.0))?;
    let i2 = integrate_terms(domain, &jets, &i2_terms())?;
    let i3 = integrate_terms(domain, &jets, &i3_terms())?;
    let i4 = integrate_terms(domain, &jets, &i4_terms())?;
    Ok(InvariantVector {
        values: [i0, i1, i2.iter().sum(), i3.iter().sum(), i4.iter().sum()],
        breakdown: InvariantBreakdown { i2, i3, i4 },
    })
}

/// `∮ κ ds`, which equals 2π.
pub fn total_curvature(domain: &SupportDomain) -> Result<f64> {
    domain.integrate_boundary(0, |j| j.k(0))
}

fn relative_gap(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IbpReport {
    /// `∮ κ₁⁴/κ⁶ ds`
    pub lhs: f64,
    /// `(3/5) ∮ κ₁²κ₂/κ⁵ ds`
    pub rhs: f64,
    pub gap: f64,
}

pub fn verify_ibp_identity(domain: &SupportDomain) -> Result<IbpReport> {
    let jets = domain.node_jets(2)?;
    let lhs = domain.integrate_jets(&jets, |j| j.k(1).powi(4) / j.k(0).powi(6))?;
    let rhs = 0.6 * domain.integrate_jets(&jets, |j| j.k(1).powi(2) * j.k(2) / j.k(0).powi(5))?;
    Ok(IbpReport { lhs, rhs, gap: relative_gap(lhs, rhs) })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CsqBranch {
    pub b: f64,
    pub i3: f64,
    /// Integrals of `9κ²`, `24κ₁²/κ²`, `(Aκ₂κ − Bκ₁²)²/κ⁶`, `(24 − A²)κ₂²κ²/κ⁶`.
    pub terms: [f64; 4],
    pub all_nonnegative: bool,
    pub gap: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CsqReport {
    pub i3_direct: f64,
    pub a: f64,
    pub branches: [CsqBranch; 2],
}

impl CsqReport {
    pub fn max_gap(&self) -> f64 {
        self.branches.iter().map(|b| b.gap).fold(0.0, f64::max)
    }
}

/// `I₃` rewritten as a sum of four nonnegative integrals, for both roots `B`.
pub fn verify_completed_square(domain: &SupportDomain) -> Result<CsqReport> {
    let jets = domain.node_jets(2)?;
    let i3_direct: f64 = integrate_terms(domain, &jets, &i3_terms())?.iter().sum();
    let a = CSQ_A_SQUARED.sqrt();
    let branch = |b: f64| -> Result<CsqBranch> {
        let t0 = domain.integrate_jets(&jets, |j| 9.0 * j.k(0).powi(2))?;
        let t1 = domain.integrate_jets(&jets, |j| 24.0 * j.k(1).powi(2) / j.k(0).powi(2))?;
        let t2 = domain.integrate_jets(&jets, |j| {
            (a * j.k(2) * j.k(0) - b * j.k(1).powi(2)).powi(2) / j.k(0).powi(6)
        })?;
        let t3 = domain.integrate_jets(&jets, |j| {
            (24.0 - CSQ_A_SQUARED) * j.k(2).powi(2) * j.k(0).powi(2) / j.k(0).powi(6)
        })?;
        let terms = [t0, t1, t2, t3];
        let i3 = terms.iter().sum();
        Ok(CsqBranch {
            b,
            i3,
            terms,
            all_nonnegative: terms.iter().all(|t| *t >= 0.0),
            gap: relative_gap(i3, i3_direct),
        })
    };
    let [bp, bm] = csq_b_branches();
    Ok(CsqReport { i3_direct, a, branches: [branch(bp)?, branch(bm)?] })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainCheck {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    /// `rhs − lhs`
    pub slack: f64,
    pub holds: bool,
}

impl ChainCheck {
    fn le(name: &str, lhs: f64, rhs: f64) -> Self {
        // equality cases (the circle) are allowed a few ulps of round-off
        let holds = lhs <= rhs + 1e-12 * rhs.abs().max(lhs.abs());
        Self { name: name.to_string(), lhs, rhs, slack: rhs - lhs, holds }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogCurvatureReport {
    /// `8∮κ^{−2/3}((log κ)′)² ds`
    pub weighted_log_slope: f64,
    /// `8∮κ₁²/κ^{8/3} ds`
    pub kappa1_term: f64,
    pub i1: f64,
    pub i2: f64,
    /// `∮|(log κ)′| ds`
    pub total_variation: f64,
    /// `max log κ − min log κ` on the node grid
    pub oscillation: f64,
    /// `C = |log(2π/ℓ)| + ∮|(log κ)′| ds`
    pub log_bound: f64,
    pub kappa_min: f64,
    pub kappa_max: f64,
    pub checks: Vec<ChainCheck>,
}

impl LogCurvatureReport {
    pub fn violations(&self) -> usize {
        self.checks.iter().filter(|c| !c.holds).count()
    }
}

pub fn verify_log_curvature_bound(domain: &SupportDomain) -> Result<LogCurvatureReport> {
    let jets = domain.node_jets(1)?;
    let ell = domain.perimeter();
    let log_slope = |j: &CurvatureJet| j.k(1) / j.k(0);
    let weighted_log_slope =
        8.0 * domain.integrate_jets(&jets, |j| j.k(0).powf(-2.0 / 3.0) * log_slope(j).powi(2))?;
    let kappa1_term = domain.integrate_jets(&jets, |j| 8.0 * j.k(1).powi(2) / j.k(0).powf(8.0 / 3.0))?;
    let i1 = domain.integrate_jets(&jets, |j| j.k(0).powf(2.0 / 3.0))?;
    let i2: f64 = integrate_terms(domain, &jets, &i2_terms())?.iter().sum();
    let total_variation = domain.integrate_jets(&jets, |j| log_slope(j).abs())?;
    let (kappa_min, kappa_max) = jets
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), j| (lo.min(j.k(0)), hi.max(j.k(0))));
    let oscillation = kappa_max.ln() - kappa_min.ln();
    let log_bound = (TAU / ell).ln().abs() + total_variation;
    let holder = TAU.powf(2.0 / 3.0) * ell.powf(1.0 / 3.0);

    let identity_gap = relative_gap(weighted_log_slope, kappa1_term);
    let checks = vec![
        ChainCheck::le("log-slope identity gap", identity_gap, 1e-12),
        ChainCheck::le("kappa1 term <= I2", kappa1_term, i2),
        ChainCheck::le("Cauchy-Schwarz", total_variation.powi(2), i1 * i2 / 8.0),
        ChainCheck::le("Holder + Gauss-Bonnet", i1, holder),
        ChainCheck::le("oscillation <= total variation", oscillation, total_variation),
        ChainCheck::le("kappa_max <= exp(C)", kappa_max, log_bound.exp()),
        ChainCheck::le("exp(-C) <= kappa_min", (-log_bound).exp(), kappa_min),
    ];
    Ok(LogCurvatureReport {
        weighted_log_slope,
        kappa1_term,
        i1,
        i2,
        total_variation,
        oscillation,
        log_bound,
        kappa_min,
        kappa_max,
        checks,
    })
}
