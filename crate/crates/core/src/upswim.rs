//! Comparison model: the basic state is shared with the scattering model,
//! but the perturbed intensity only sees the collimated beam attenuated by
//! the perturbed concentration, with the diffuse part frozen as `χ = G_s^d`.

use crate::basicstate::BasicState;
use crate::error::{Error, Result};
use crate::numerics::{logspace, DiffMatrices};
use crate::perturbation::gamma12_with;
use crate::stability::{
    build_operator, Branch, Model, NeutralPoint, PhiAnchor, PhiCoefficients, StabilityOperator,
    StabilityProblem,
};
use faer::Mat;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// `Φ`-equation coefficients of the up-swimming model. `Γ₀` is absent and
/// the perturbed intensity is `(κ/cos θ₀) G_s Φ`.
pub fn upswim_coefficients(state: &BasicState, diff: &DiffMatrices, k: f64) -> Result<PhiCoefficients> {
    let n = state.n_z();
    if diff.n() != n {
        return Err(Error::GridMismatch(format!(
            "difference matrices have {} points, basic state has {n}",
            diff.n()
        )));
    }
    let v = state.params.swim_speed;
    let a = state.params.extinction / state.cos_theta0;
    let dg: Vec<f64> = (0..n).map(|i| state.dg_coll[i] + state.dg_diff[i]).collect();
    let extra: Vec<f64> = (0..n)
        .map(|i| {
            let chi = state.g_diff[i];
            v * state.dt_dg[i] * state.dg_diff[i] + a * v * state.n[i] * chi * state.dt_dg[i]
        })
        .collect();
    let (gamma1, gamma2) = gamma12_with(state, &state.g_total, &dg, &extra);
    let intensity = Mat::from_fn(n, n, |i, j| if i == j { a * state.g_total[i] } else { 0.0 });
    Ok(PhiCoefficients {
        k,
        gamma0: None,
        gamma1,
        gamma2,
        intensity,
    })
}

pub fn build_upswim_operator(
    state: &BasicState,
    diff: &DiffMatrices,
    k: f64,
    anchor: PhiAnchor,
) -> Result<StabilityOperator> {
    build_operator(state, diff, &upswim_coefficients(state, diff, k)?, anchor)
}

/// One wavenumber of a model comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub k: f64,
    pub r_full: Option<f64>,
    pub branch_full: Option<Branch>,
    pub r_upswim: Option<f64>,
    pub branch_upswim: Option<Branch>,
    /// `|R_upswim − R_full| / R_full` where both exist.
    pub rel_diff: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Comparison {
    pub rows: Vec<ComparisonRow>,
    /// Wavelength band `[2π/k_hi, 2π/k_lo]` of the rows whose relative
    /// difference is at least half the largest one.
    pub divergence_band: Option<(f64, f64)>,
    pub max_rel_diff: f64,
}

/// Leading neutral points of both models over `n_k` log-spaced wavenumbers.
pub fn compare_models(full: &StabilityProblem, k_min: f64, k_max: f64, n_k: usize) -> Result<Comparison> {
    if full.model != Model::Full {
        return Err(Error::InvalidParameter {
            name: "model",
            reason: "comparison starts from the scattering model".into(),
        });
    }
    if !(k_min > 0.0 && k_max > k_min) || n_k < 2 {
        return Err(Error::InvalidParameter {
            name: "k_min",
            reason: format!("need 0 < k_min < k_max and n_k ≥ 2, got [{k_min}, {k_max}] × {n_k}"),
        });
    }
    let up = StabilityProblem::with_state(full.state.clone(), &full.settings, Model::Upswim)?;
    let ks = logspace(k_min, k_max, n_k);
    let rows: Vec<ComparisonRow> = ks
        .par_iter()
        .map(|&k| {
            let a = full.neutral_r(k).ok();
            let b = up.neutral_r(k).ok();
            row(k, a, b)
        })
        .collect();
    Ok(summarise(rows))
}

fn row(k: f64, a: Option<NeutralPoint>, b: Option<NeutralPoint>) -> ComparisonRow {
    let rel_diff = match (a, b) {
        (Some(a), Some(b)) => Some((b.r - a.r).abs() / a.r),
        _ => None,
    };
    ComparisonRow {
        k,
        r_full: a.map(|p| p.r),
        branch_full: a.map(|p| p.branch),
        r_upswim: b.map(|p| p.r),
        branch_upswim: b.map(|p| p.branch),
        rel_diff,
    }
}

/// Sort rows by wavenumber and locate the band of largest disagreement.
pub fn summarise(mut rows: Vec<ComparisonRow>) -> Comparison {
    rows.sort_by(|a, b| a.k.total_cmp(&b.k));
    let max_rel_diff = rows.iter().filter_map(|r| r.rel_diff).fold(0.0, f64::max);
    let band: Vec<f64> = rows
        .iter()
        .filter(|r| max_rel_diff > 0.0 && r.rel_diff.is_some_and(|d| d >= 0.5 * max_rel_diff))
        .map(|r| r.k)
        .collect();
    let divergence_band = match (band.first(), band.last()) {
        (Some(&lo), Some(&hi)) => Some((2.0 * PI / hi, 2.0 * PI / lo)),
        _ => None,
    };
    Comparison {
        rows,
        divergence_band,
        max_rel_diff,
    }
}
