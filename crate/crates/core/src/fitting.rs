//! Least-squares fit of `|Γ| − ℓ = Σₖ cₖ Q^{2k/3}` to caustic estimates, and the
//! ratios `cₖ / Iₖ` used to test that the link to the integral invariants is
//! domain independent.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::invariants::InvariantVector;
use crate::spectrum::CausticEstimate;

pub const MAX_CONDITION: f64 = 1e12;
/// A coefficient is resolved when it exceeds this many standard errors.
pub const NOISE_SIGMAS: f64 = 3.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpansionFit {
    #[serde(rename = "K")]
    pub order: usize,
    /// `(c₁, …, c_K)`
    #[serde(rename = "c")]
    pub coefficients: Vec<f64>,
    pub stderr: Vec<f64>,
    pub residual_rms: f64,
    #[serde(rename = "cond")]
    pub condition_number: f64,
    pub q_window: (u32, u32),
    pub samples: usize,
}

impl ExpansionFit {
    pub fn predict(&self, lazutkin_q: f64) -> f64 {
        let u = lazutkin_q.powf(2.0 / 3.0);
        self.coefficients.iter().rev().fold(0.0, |acc, c| (acc + c) * u)
    }
}

pub fn fit_expansion(estimates: &[CausticEstimate], perimeter: f64, order: usize) -> Result<ExpansionFit> {
    if order == 0 {
        return Err(Error::InvalidInput("expansion order must be at least 1".into()));
    }
    let n = estimates.len();
    if n < order + 2 {
        return Err(Error::InsufficientSamples { needed: order + 2, got: n });
    }
    if estimates.iter().any(|e| !(e.lazutkin_q > 0.0 && e.lazutkin_q.is_finite())) {
        return Err(Error::InvalidInput("Lazutkin parameters must be positive".into()));
    }
    let mut qs: Vec<f64> = estimates.iter().map(|e| e.lazutkin_q).collect();
    qs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    if qs.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidInput("Lazutkin parameters must be distinct".into()));
    }

    let u: Vec<f64> = estimates.iter().map(|e| e.lazutkin_q.powf(2.0 / 3.0)).collect();
    let y: Vec<f64> = estimates.iter().map(|e| e.gamma_length - perimeter).collect();
    let weighted = estimates.iter().all(|e| e.err_bar > 0.0 && e.err_bar.is_finite());
    let mut w: Vec<f64> = if weighted {
        estimates.iter().map(|e| 1.0 / (e.err_bar * e.err_bar)).collect()
    } else {
        vec![1.0; n]
    };
    let wmax = w.iter().cloned().fold(0.0, f64::max);
    w.iter_mut().for_each(|v| *v /= wmax);

    let u_scale = u.iter().cloned().fold(0.0, f64::max);
    let mut a = DMatrix::<f64>::zeros(n, order);
    let mut b = DVector::<f64>::zeros(n);
    for j in 0..n {
        let sw = w[j].sqrt();
        let us = u[j] / u_scale;
        let mut pow = 1.0;
        for k in 0..order {
            pow *= us;
            a[(j, k)] = sw * pow;
        }
        b[j] = sw * y[j];
    }
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let cond = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if !(cond <= MAX_CONDITION) {
        return Err(Error::IllConditioned { cond });
    }
    let scaled = svd
        .solve(&b, 0.0)
        .map_err(|e| Error::InvalidInput(format!("least-squares solve failed: {e}")))?;

    let coefficients: Vec<f64> = (0..order).map(|k| scaled[k] / u_scale.powi(k as i32 + 1)).collect();
    let fit_at = |uj: f64| coefficients.iter().rev().fold(0.0, |acc, c| (acc + c) * uj);
    let resid: Vec<f64> = (0..n).map(|j| y[j] - fit_at(u[j])).collect();
    let residual_rms = (resid.iter().map(|r| r * r).sum::<f64>() / n as f64).sqrt();

    // covariance σ²(AᵀWA)⁻¹ in scaled coordinates
    let dof = (n - order) as f64;
    let sigma2 = (0..n).map(|j| w[j] * resid[j] * resid[j]).sum::<f64>() / dof;
    let normal = a.transpose() * &a;
    let stderr = match normal.try_inverse() {
        Some(inv) => (0..order)
            .map(|k| (sigma2 * inv[(k, k)]).max(0.0).sqrt() / u_scale.powi(k as i32 + 1))
            .collect(),
        None => vec![f64::INFINITY; order],
    };
    let q_lo = estimates.iter().map(|e| e.q).min().unwrap_or(0);
    let q_hi = estimates.iter().map(|e| e.q).max().unwrap_or(0);
    Ok(ExpansionFit {
        order,
        coefficients,
        stderr,
        residual_rms,
        condition_number: cond,
        q_window: (q_lo, q_hi),
        samples: n,
    })
}

/// `(u, y, y_fit)` rows for plotting, with `u = Q^{2/3}` and `y = |Γ| − ℓ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlotRow {
    pub u: f64,
    pub y: f64,
    pub y_fit: f64,
}

pub fn plot_rows(fit: &ExpansionFit, estimates: &[CausticEstimate], perimeter: f64) -> Vec<PlotRow> {
    estimates
        .iter()
        .map(|e| PlotRow {
            u: e.lazutkin_q.powf(2.0 / 3.0),
            y: e.gamma_length - perimeter,
            y_fit: fit.predict(e.lazutkin_q),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioEntry {
    pub k: usize,
    pub c_k: Option<f64>,
    pub i_k: f64,
    /// `None` when `c_k` is within fit noise or `I_k = 0`.
    pub ratio: Option<f64>,
    pub status: RatioStatus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RatioStatus {
    Determinate,
    Indeterminate,
}

/// `r_k = c_k / I_k` per domain.
pub fn ratio_consistency(fits: &[ExpansionFit], invariants: &[InvariantVector], k: usize) -> Result<Vec<RatioEntry>> {
    if fits.len() != invariants.len() {
        return Err(Error::InvalidInput(format!(
            "{} fits but {} invariant vectors",
            fits.len(),
            invariants.len()
        )));
    }
    if !(1..=4).contains(&k) {
        return Err(Error::InvalidInput(format!("ratio index k = {k} outside 1..=4")));
    }
    Ok(fits
        .iter()
        .zip(invariants)
        .map(|(fit, inv)| {
            let i_k = inv.get(k);
            let c_k = fit.coefficients.get(k - 1).copied();
            let resolved = match (c_k, fit.stderr.get(k - 1)) {
                (Some(c), Some(se)) => c.abs() > NOISE_SIGMAS * se && i_k != 0.0,
                _ => false,
            };
            RatioEntry {
                k,
                c_k,
                i_k,
                ratio: if resolved { c_k.map(|c| c / i_k) } else { None },
                status: if resolved { RatioStatus::Determinate } else { RatioStatus::Indeterminate },
            }
        })
        .collect())
}

/// `(max − min) / |mean|` over the determinate ratios.
pub fn ratio_spread(entries: &[RatioEntry]) -> Option<f64> {
    let vals: Vec<f64> = entries.iter().filter_map(|e| e.ratio).collect();
    if vals.len() < 2 {
        return None;
    }
    let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mean = vals.iter().sum::<f64>() / vals.len() as f64;
    Some((hi - lo) / mean.abs())
}
