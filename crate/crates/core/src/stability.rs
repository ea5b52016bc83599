//! Linear stability of the basic state.
//!
//! Unknowns are the vertical velocity `W` and the integrated concentration
//! perturbation `Φ` on the basic-state grid. The system
//!
//! ```text
//! (γ/S_c)(D² − k²)W = (D² − k²)²W + R k² DΦ
//! γ DΦ = −Γ₀[Φ] − Γ₁Φ − (k² + Γ₂)DΦ − V_c T_s D²Φ + D³Φ − (Dn_s)W
//! ```
//!
//! is discretised with fourth-order differences, the seven boundary rows are
//! eliminated, and growth rates come from a dense standard eigenproblem. The
//! operator is affine in `R`, so one assembly per wavenumber serves every
//! Rayleigh number.

use crate::basicstate::{solve_basic_state, BasicState, DEFAULT_N_Z};
use crate::error::{Error, Result};
use crate::numerics::{brent_with_values, golden_section, logspace, DiffMatrices};
use crate::perturbation::{
    d_n_slope, gamma_profiles, radiation_coupling_matrices, AngularRule, CouplingInput, RteContext,
    DEFAULT_MU_NODES, DEFAULT_PHI_NODES,
};
use crate::photomodel::{BoundaryKind, SuspensionParams};
use crate::radiative::{solve_radiation, DEFAULT_N_TAU};
use faer::linalg::solvers::Solve;
use faer::Mat;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// `|Im γ|` below which a neutral point counts as stationary.
pub const STATIONARY_TOL: f64 = 1e-6;

/// Where the integration constant of `Φ` is fixed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhiAnchor {
    /// `Φ(0) = 0`.
    Bottom,
    /// `Φ(1) = 0`, matching `Φ = ∫₁^z Θ`.
    Top,
}

/// Which perturbation model closes the `Φ` equation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Model {
    /// Perturbed radiative transfer with scattering.
    Full,
    /// Frozen diffuse profile, vertical swimming only.
    Upswim,
}

/// Discretisation and search settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSettings {
    pub n_tau: usize,
    pub n_z: usize,
    pub mu_nodes: usize,
    pub phi_nodes: usize,
    pub anchor: PhiAnchor,
    pub r_min: f64,
    pub r_max: f64,
    pub r_panels: usize,
    pub k_min: f64,
    pub k_max: f64,
    pub n_k: usize,
    /// Accepted `|Re γ|` at a neutral point, relative to `max(1, |γ|)`.
    pub neutral_tol: f64,
    /// Relative width at which the critical wavenumber search stops.
    pub k_tol: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            n_tau: DEFAULT_N_TAU,
            n_z: DEFAULT_N_Z,
            mu_nodes: DEFAULT_MU_NODES,
            phi_nodes: DEFAULT_PHI_NODES,
            anchor: PhiAnchor::Top,
            r_min: 1.0,
            r_max: 5000.0,
            r_panels: 12,
            k_min: 0.3,
            k_max: 10.0,
            n_k: 40,
            neutral_tol: 1e-6,
            k_tol: 1e-3,
        }
    }
}

impl SolverSettings {
    pub fn validate(&self) -> Result<()> {
        let bad = |name, reason: &str| {
            Err(Error::InvalidParameter {
                name,
                reason: reason.into(),
            })
        };
        if self.n_z < 21 {
            return bad("n_z", "need at least 21 grid points");
        }
        if self.n_tau < 11 {
            return bad("n_tau", "need at least 11 optical-depth points");
        }
        if !(self.r_min > 0.0 && self.r_max > self.r_min) || self.r_panels == 0 {
            return bad("r_min", "need 0 < r_min < r_max and at least one panel");
        }
        if !(self.k_min > 0.0 && self.k_max > self.k_min) || self.n_k < 2 {
            return bad("k_min", "need 0 < k_min < k_max and n_k ≥ 2");
        }
        if !(self.neutral_tol > 0.0 && self.k_tol > 0.0) {
            return bad("neutral_tol", "tolerances must be positive");
        }
        Ok(())
    }
}

/// Coefficients of the `Φ` equation at one wavenumber.
#[derive(Debug, Clone)]
pub struct PhiCoefficients {
    pub k: f64,
    /// `Φ ↦ Γ₀`; real because `P` is `i` times a real map of `Φ`.
    pub gamma0: Option<Mat<f64>>,
    pub gamma1: Vec<f64>,
    pub gamma2: Vec<f64>,
    /// `Φ ↦ 𝒢`, the perturbed total intensity, used in the wall flux rows.
    pub intensity: Mat<f64>,
}

/// Coefficients of the full model, from the perturbed transfer equation.
pub fn full_coefficients(state: &BasicState, ctx: &RteContext, diff: &DiffMatrices, k: f64) -> Result<PhiCoefficients> {
    check_grid(state, diff)?;
    if state.flux.iter().any(|&q| !(q > 0.0)) {
        return Err(Error::Domain("basic-state flux must be positive".into()));
    }
    let m = radiation_coupling_matrices(state, ctx, k, CouplingInput::Phi, &diff.d[0])?;
    let v = state.params.swim_speed;
    let dns = d_n_slope(state);
    let n = state.n_z();
    let gamma0 = Mat::from_fn(n, n, |i, j| {
        v * (dns[i] * m.g_diff[(i, j)] + state.n[i] * state.dt_dg[i] * m.dg_diff[(i, j)])
            + k * v * state.n[i] * state.t[i] / state.flux[i] * m.flux_x[(i, j)]
    });
    let (gamma1, gamma2) = gamma_profiles(state);
    let intensity = &m.g_coll + &m.g_diff;
    Ok(PhiCoefficients {
        k,
        gamma0: Some(gamma0),
        gamma1,
        gamma2,
        intensity,
    })
}

fn check_grid(state: &BasicState, diff: &DiffMatrices) -> Result<()> {
    if diff.n() != state.n_z() {
        return Err(Error::GridMismatch(format!(
            "difference matrices have {} points, basic state has {}",
            diff.n(),
            state.n_z()
        )));
    }
    Ok(())
}

/// `A(R) x = γ B x` with `A(R) = a0 + R·a1`; `x = (W₀…W_{n−1}, Φ₀…Φ_{n−1})`.
#[derive(Debug, Clone)]
pub struct StabilityOperator {
    pub k: f64,
    pub z: Vec<f64>,
    pub a0: Mat<f64>,
    pub a1: Mat<f64>,
    pub b: Mat<f64>,
    /// Rows holding boundary conditions instead of field equations.
    pub bc_rows: Vec<usize>,
    /// Unknowns eliminated through the boundary rows.
    pub bc_cols: Vec<usize>,
}

impl StabilityOperator {
    pub fn n_z(&self) -> usize {
        self.z.len()
    }

    pub fn a(&self, r: f64) -> Mat<f64> {
        &self.a0 + Mat::from_fn(self.a1.nrows(), self.a1.ncols(), |i, j| r * self.a1[(i, j)])
    }

    /// `‖A x − γ B x‖∞ / (‖A‖∞ ‖x‖∞)`.
    pub fn residual(&self, r: f64, gamma: Complex64, x: &[Complex64]) -> f64 {
        let m = x.len();
        let mut worst: f64 = 0.0;
        let mut norm_a: f64 = 0.0;
        for i in 0..m {
            let mut acc = Complex64::new(0.0, 0.0);
            let mut row = 0.0;
            for j in 0..m {
                let a = self.a0[(i, j)] + r * self.a1[(i, j)];
                row += a.abs();
                acc += x[j] * (a - gamma * self.b[(i, j)]);
            }
            worst = worst.max(acc.norm());
            norm_a = norm_a.max(row);
        }
        let norm_x = x.iter().map(|v| v.norm()).fold(0.0, f64::max);
        worst / (norm_a * norm_x).max(f64::MIN_POSITIVE)
    }
}

/// Assemble the operator for one wavenumber.
pub fn build_operator(
    state: &BasicState,
    diff: &DiffMatrices,
    coeffs: &PhiCoefficients,
    anchor: PhiAnchor,
) -> Result<StabilityOperator> {
    check_grid(state, diff)?;
    let n = state.n_z();
    if coeffs.gamma1.len() != n || coeffs.intensity.nrows() != n {
        return Err(Error::GridMismatch("coefficients do not match the grid".into()));
    }
    let k = coeffs.k;
    let k2 = k * k;
    let p = &state.params;
    let v = p.swim_speed;
    let [d1, d2, d3, d4] = &diff.d;
    let m = 2 * n;
    let mut a0 = Mat::<f64>::zeros(m, m);
    let mut a1 = Mat::<f64>::zeros(m, m);
    let mut b = Mat::<f64>::zeros(m, m);
    for i in 0..n {
        for j in 0..n {
            let id = if i == j { 1.0 } else { 0.0 };
            a0[(i, j)] = d4[(i, j)] - 2.0 * k2 * d2[(i, j)] + k2 * k2 * id;
            a1[(i, n + j)] = k2 * d1[(i, j)];
            b[(i, j)] = (d2[(i, j)] - k2 * id) / p.schmidt;

            let g0 = coeffs.gamma0.as_ref().map_or(0.0, |g| g[(i, j)]);
            a0[(n + i, n + j)] = -(g0
                + coeffs.gamma1[i] * id
                + (k2 + coeffs.gamma2[i]) * d1[(i, j)]
                + v * state.t[i] * d2[(i, j)]
                - d3[(i, j)]);
            b[(n + i, n + j)] = d1[(i, j)];
        }
        a0[(n + i, i)] = -state.dn[i];
    }

    let top_w = match p.top_bc {
        BoundaryKind::Rigid => d1,
        BoundaryKind::StressFree => d2,
    };
    let anchor_row = match anchor {
        PhiAnchor::Bottom => n + 1,
        PhiAnchor::Top => 2 * n - 2,
    };
    let bc_rows = vec![0, 1, n - 2, n - 1, n, anchor_row, 2 * n - 1];
    for &r in &bc_rows {
        for j in 0..m {
            a0[(r, j)] = 0.0;
            a1[(r, j)] = 0.0;
            b[(r, j)] = 0.0;
        }
    }
    a0[(0, 0)] = 1.0;
    for j in 0..n {
        a0[(1, j)] = d1[(0, j)];
        a0[(n - 2, j)] = top_w[(n - 1, j)];
    }
    a0[(n - 1, n - 1)] = 1.0;
    for (row, w) in [(n, 0usize), (2 * n - 1, n - 1)] {
        let slope = v * state.n[w] * state.dt_dg[w];
        for j in 0..n {
            a0[(row, n + j)] = d2[(w, j)] - v * state.t[w] * d1[(w, j)] - slope * coeffs.intensity[(w, j)];
        }
    }
    match anchor {
        PhiAnchor::Bottom => a0[(anchor_row, n)] = 1.0,
        PhiAnchor::Top => a0[(anchor_row, 2 * n - 1)] = 1.0,
    }
    let bc_cols = vec![0, 1, n - 2, n - 1, n, anchor_row, 2 * n - 1];
    Ok(StabilityOperator {
        k,
        z: state.z.clone(),
        a0,
        a1,
        b,
        bc_rows,
        bc_cols,
    })
}

/// Operator with the boundary rows eliminated: `γ y = (m0 + R·m1) y` on the
/// remaining unknowns, with the eliminated ones recovered as `elim·y`.
#[derive(Debug, Clone)]
pub struct ReducedOperator {
    pub k: f64,
    pub n_z: usize,
    pub interior: Vec<usize>,
    pub boundary: Vec<usize>,
    pub elim: Mat<f64>,
    pub m0: Mat<f64>,
    pub m1: Mat<f64>,
}

fn select(m: &Mat<f64>, rows: &[usize], cols: &[usize]) -> Mat<f64> {
    Mat::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])])
}

fn eliminated(m: &Mat<f64>, rows: &[usize], ic: &[usize], bc: &[usize], elim: &Mat<f64>) -> Mat<f64> {
    select(m, rows, ic) + select(m, rows, bc) * elim
}

impl ReducedOperator {
    pub fn new(op: &StabilityOperator) -> Result<Self> {
        let m = op.a0.nrows();
        let interior: Vec<usize> = (0..m).filter(|c| !op.bc_cols.contains(c)).collect();
        let rows: Vec<usize> = (0..m).filter(|r| !op.bc_rows.contains(r)).collect();
        let cb = select(&op.a0, &op.bc_rows, &op.bc_cols);
        let ci = select(&op.a0, &op.bc_rows, &interior);
        let elim = -cb.partial_piv_lu().solve(&ci);
        let br = eliminated(&op.b, &rows, &interior, &op.bc_cols, &elim);
        let a0 = eliminated(&op.a0, &rows, &interior, &op.bc_cols, &elim);
        let a1 = eliminated(&op.a1, &rows, &interior, &op.bc_cols, &elim);
        let lu = br.partial_piv_lu();
        let m0 = lu.solve(&a0);
        let m1 = lu.solve(&a1);
        if !m0.as_ref().is_all_finite() || !m1.as_ref().is_all_finite() {
            return Err(Error::Linalg("singular mass matrix after boundary elimination".into()));
        }
        Ok(Self {
            k: op.k,
            n_z: op.n_z(),
            interior,
            boundary: op.bc_cols.clone(),
            elim,
            m0,
            m1,
        })
    }

    pub fn matrix(&self, r: f64) -> Mat<f64> {
        Mat::from_fn(self.m0.nrows(), self.m0.ncols(), |i, j| self.m0[(i, j)] + r * self.m1[(i, j)])
    }

    /// Growth rates sorted by decreasing real part.
    pub fn spectrum(&self, r: f64) -> Result<Vec<Complex64>> {
        let ev = self
            .matrix(r)
            .eigenvalues()
            .map_err(|e| Error::Linalg(format!("eigenvalue solver failed: {e:?}")))?;
        let mut ev: Vec<Complex64> = ev.into_iter().map(|c| Complex64::new(c.re, c.im)).collect();
        if ev.iter().any(|g| !g.re.is_finite() || !g.im.is_finite()) {
            return Err(Error::Linalg("non-finite growth rate".into()));
        }
        ev.sort_by(|a, b| b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im)));
        Ok(ev)
    }

    /// Leading growth rate, taken with `Im γ ≥ 0`.
    pub fn leading(&self, r: f64) -> Result<Complex64> {
        let g = self.spectrum(r)?[0];
        Ok(Complex64::new(g.re, g.im.abs()))
    }

    /// Leading eigenpair with the full unknown vector `(W, Φ)` recovered.
    pub fn eigenpair(&self, r: f64) -> Result<(Complex64, Vec<Complex64>)> {
        let eig = self
            .matrix(r)
            .eigen()
            .map_err(|e| Error::Linalg(format!("eigen decomposition failed: {e:?}")))?;
        let s = eig.S();
        let u = eig.U();
        let m = self.m0.nrows();
        let mut best = 0;
        for i in 1..m {
            let (a, b) = (s[i], s[best]);
            if a.re > b.re || (a.re == b.re && a.im > b.im) {
                best = i;
            }
        }
        let gamma = Complex64::new(s[best].re, s[best].im);
        let y: Vec<Complex64> = (0..m).map(|i| Complex64::new(u[(i, best)].re, u[(i, best)].im)).collect();
        let mut x = vec![Complex64::new(0.0, 0.0); 2 * self.n_z];
        for (idx, &c) in self.interior.iter().enumerate() {
            x[c] = y[idx];
        }
        for (bi, &c) in self.boundary.iter().enumerate() {
            x[c] = (0..m).map(|j| y[j] * self.elim[(bi, j)]).sum();
        }
        Ok((gamma, x))
    }

    /// Rayleigh numbers in `[lo, hi]` at which some real growth rate is
    /// exactly zero, ascending.
    pub fn stationary_rayleigh(&self, lo: f64, hi: f64) -> Result<Vec<f64>> {
        // (m0 + R m1) y = 0  ⇔  −m0⁻¹ m1 y = y / R
        let p = -self.m0.partial_piv_lu().solve(&self.m1);
        let ev = p
            .eigenvalues()
            .map_err(|e| Error::Linalg(format!("eigenvalue solver failed: {e:?}")))?;
        let mut rs: Vec<f64> = ev
            .into_iter()
            .filter(|mu| mu.re > 0.0 && mu.im.abs() <= 1e-9 * mu.re)
            .map(|mu| 1.0 / mu.re)
            .filter(|&r| r >= lo && r <= hi)
            .collect();
        rs.sort_by(f64::total_cmp);
        Ok(rs)
    }
}

/// Growth rates of an assembled operator at Rayleigh number `r`, sorted by
/// decreasing real part.
pub fn growth_spectrum(op: &StabilityOperator, r: f64) -> Result<Vec<Complex64>> {
    ReducedOperator::new(op)?.spectrum(r)
}

/// Which neutral-curve branch a point lies on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    Stationary,
    Oscillatory,
}

impl Branch {
    pub fn name(self) -> &'static str {
        match self {
            Branch::Stationary => "stationary",
            Branch::Oscillatory => "oscillatory",
        }
    }

    fn of(frequency: f64) -> Self {
        if frequency.abs() > STATIONARY_TOL {
            Branch::Oscillatory
        } else {
            Branch::Stationary
        }
    }
}

/// A point with `Re γ = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeutralPoint {
    pub k: f64,
    pub r: f64,
    /// `Im γ ≥ 0` of the neutral eigenvalue.
    pub frequency: f64,
    pub branch: Branch,
    /// Whether this is the first crossing as `R` grows from `r_min`.
    pub leading: bool,
}

/// Neutral points over a wavenumber sweep.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct NeutralCurve {
    pub points: Vec<NeutralPoint>,
    /// Wavenumbers where no neutral point was found, with the reason.
    pub gaps: Vec<(f64, String)>,
    /// Wavenumbers where the leading crossing changes branch.
    pub junctions: Vec<f64>,
}

impl NeutralCurve {
    /// First crossings, ascending in `k`.
    pub fn leading(&self) -> Vec<NeutralPoint> {
        let mut v: Vec<NeutralPoint> = self.points.iter().copied().filter(|p| p.leading).collect();
        v.sort_by(|a, b| a.k.total_cmp(&b.k));
        v
    }

    pub fn branch(&self, branch: Branch) -> Vec<NeutralPoint> {
        let mut v: Vec<NeutralPoint> = self.points.iter().copied().filter(|p| p.branch == branch).collect();
        v.sort_by(|a, b| a.k.total_cmp(&b.k));
        v
    }
}

/// The minimum of the neutral curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalSolution {
    pub k_c: f64,
    pub r_c: f64,
    pub lambda_c: f64,
    pub frequency: f64,
    pub mode: usize,
    pub overstable: bool,
}

/// Number of convection cells stacked vertically: one plus the sign changes
/// of `Re W` after rotating the largest sample onto the positive real axis.
pub fn classify_mode(w: &[Complex64]) -> Result<usize> {
    let wmax = w
        .iter()
        .max_by(|a, b| a.norm().total_cmp(&b.norm()))
        .ok_or(Error::EmptyCurve)?;
    let scale = wmax.norm();
    if !(scale > 1e-12) {
        return Err(Error::Linalg("eigenfunction W vanishes; mode is undefined".into()));
    }
    let phase = wmax.conj() / scale;
    let mut changes = 0;
    let mut last = 0.0f64;
    for v in w {
        let re = (v * phase).re;
        if re.abs() <= 1e-8 * scale {
            continue;
        }
        if last != 0.0 && re.signum() != last.signum() {
            changes += 1;
        }
        last = re;
    }
    Ok(1 + changes)
}

/// `w₁(x, z, t) = Re[W(z) e^{γt + ikx}]` on `n_x` samples of `x ∈ [0, 2λ]`.
#[derive(Debug, Clone)]
pub struct ModeField {
    pub t: f64,
    pub x: Vec<f64>,
    pub z: Vec<f64>,
    /// `values[ix][iz]`.
    pub values: Vec<Vec<f64>>,
}

pub fn eigenfunction_field(w: &[Complex64], z: &[f64], gamma: Complex64, k: f64, n_x: usize, t: f64) -> ModeField {
    let span = 2.0 * 2.0 * PI / k;
    let x: Vec<f64> = if n_x < 2 {
        vec![0.0]
    } else {
        (0..n_x).map(|i| span * i as f64 / (n_x - 1) as f64).collect()
    };
    let values = x
        .iter()
        .map(|&xi| {
            let e = (gamma * t + Complex64::new(0.0, k * xi)).exp();
            w.iter().map(|wj| (wj * e).re).collect()
        })
        .collect();
    ModeField {
        t,
        x,
        z: z.to_vec(),
        values,
    }
}

/// The vertical-velocity part of a full unknown vector, scaled so that the
/// largest sample is real and equal to one.
pub fn normalised_w(x: &[Complex64], n_z: usize) -> Vec<Complex64> {
    let w = &x[..n_z];
    let big = w.iter().copied().max_by(|a, b| a.norm().total_cmp(&b.norm())).unwrap_or_default();
    if big.norm() == 0.0 {
        return w.to_vec();
    }
    w.iter().map(|v| v / big).collect()
}

/// Basic state, grids and angular set for repeated stability solves.
#[derive(Debug, Clone)]
pub struct StabilityProblem {
    pub state: BasicState,
    pub settings: SolverSettings,
    pub model: Model,
    pub diff: DiffMatrices,
    ctx: RteContext,
}

impl StabilityProblem {
    pub fn new(params: &SuspensionParams, settings: &SolverSettings, model: Model) -> Result<Self> {
        settings.validate()?;
        let field = solve_radiation(params, settings.n_tau)?;
        let state = solve_basic_state(params, &field, settings.n_z)?;
        Self::with_state(state, settings, model)
    }

    /// Reuse an already solved basic state.
    pub fn with_state(state: BasicState, settings: &SolverSettings, model: Model) -> Result<Self> {
        settings.validate()?;
        let diff = DiffMatrices::uniform(state.n_z(), 0.0, 1.0)?;
        let rule = AngularRule::new(settings.mu_nodes, settings.phi_nodes)?;
        let ctx = RteContext::new(&state, rule);
        Ok(Self {
            state,
            settings: settings.clone(),
            model,
            diff,
            ctx,
        })
    }

    pub fn coefficients(&self, k: f64) -> Result<PhiCoefficients> {
        match self.model {
            Model::Full => full_coefficients(&self.state, &self.ctx, &self.diff, k),
            Model::Upswim => crate::upswim::upswim_coefficients(&self.state, &self.diff, k),
        }
    }

    pub fn operator(&self, k: f64) -> Result<StabilityOperator> {
        if !(k > 0.0) {
            return Err(Error::InvalidParameter {
                name: "k",
                reason: format!("wavenumber must be positive, got {k}"),
            });
        }
        build_operator(&self.state, &self.diff, &self.coefficients(k)?, self.settings.anchor)
    }

    pub fn reduced(&self, k: f64) -> Result<ReducedOperator> {
        ReducedOperator::new(&self.operator(k)?)
    }

    /// First neutral crossing as `R` grows through the scan bracket.
    pub fn neutral_r(&self, k: f64) -> Result<NeutralPoint> {
        self.neutral_from(&self.reduced(k)?, None)
    }

    /// As [`neutral_r`](Self::neutral_r) on a prepared operator; with a seed
    /// the bracket is grown geometrically from it instead of scanned.
    pub fn neutral_from(&self, red: &ReducedOperator, seed: Option<f64>) -> Result<NeutralPoint> {
        let s = &self.settings;
        let mut f = |r: f64| red.leading(r).map(|g| g.re);
        let (lo, flo, hi, fhi) = match seed {
            Some(r0) if r0 > s.r_min && r0 < s.r_max => grow_bracket(&mut f, r0, s.r_min, s.r_max)?,
            _ => scan_bracket(&mut f, s.r_min, s.r_max, s.r_panels)?,
        };
        // a stationary crossing sits exactly on a root of the R-pencil
        for r in red.stationary_rayleigh(lo, hi)? {
            let g = red.leading(r)?;
            if g.re.abs() <= s.neutral_tol * g.norm().max(1.0) && g.im.abs() <= STATIONARY_TOL {
                return Ok(NeutralPoint {
                    k: red.k,
                    r,
                    frequency: 0.0,
                    branch: Branch::Stationary,
                    leading: true,
                });
            }
        }
        let r = brent_with_values(&mut f, lo, flo, hi, fhi, 1e-10 * hi, "neutral Rayleigh number")?;
        let g = red.leading(r)?;
        if g.re.abs() > s.neutral_tol * g.norm().max(1.0) {
            return Err(Error::NonConvergence {
                what: "neutral Rayleigh number",
                residual: g.re.abs(),
            });
        }
        Ok(NeutralPoint {
            k: red.k,
            r,
            frequency: g.im,
            branch: Branch::of(g.im),
            leading: true,
        })
    }

    /// Neutral points at one wavenumber: the first crossing and, when that is
    /// oscillatory, the first stationary crossing above it.
    pub fn neutral_points(&self, k: f64) -> Result<Vec<NeutralPoint>> {
        let red = self.reduced(k)?;
        let first = self.neutral_from(&red, None)?;
        let mut out = vec![first];
        if first.branch == Branch::Oscillatory {
            if let Some(&r) = red
                .stationary_rayleigh(first.r, self.settings.r_max)?
                .iter()
                .find(|&&r| r > first.r)
            {
                out.push(NeutralPoint {
                    k,
                    r,
                    frequency: 0.0,
                    branch: Branch::Stationary,
                    leading: false,
                });
            }
        }
        Ok(out)
    }

    /// Neutral curve over `n_k` log-spaced wavenumbers, with branch
    /// junctions refined by bisection.
    pub fn trace_neutral_curve(&self, k_min: f64, k_max: f64, n_k: usize) -> Result<NeutralCurve> {
        if !(k_min > 0.0 && k_max > k_min) || n_k < 2 {
            return Err(Error::InvalidParameter {
                name: "k_min",
                reason: format!("need 0 < k_min < k_max and n_k ≥ 2, got [{k_min}, {k_max}] × {n_k}"),
            });
        }
        let ks = logspace(k_min, k_max, n_k);
        let results: Vec<(f64, Result<Vec<NeutralPoint>>)> =
            ks.par_iter().map(|&k| (k, self.neutral_points(k))).collect();
        let mut curve = NeutralCurve::default();
        for (k, res) in results {
            match res {
                Ok(pts) => curve.points.extend(pts),
                Err(e) => curve.gaps.push((k, e.to_string())),
            }
        }
        let lead = curve.leading();
        for pair in lead.windows(2) {
            if pair[0].branch != pair[1].branch {
                curve.junctions.push(self.refine_junction(pair[0], pair[1]));
            }
        }
        Ok(curve)
    }

    fn refine_junction(&self, a: NeutralPoint, b: NeutralPoint) -> f64 {
        let (mut lo, mut hi) = (a.k, b.k);
        let lo_branch = a.branch;
        for _ in 0..8 {
            let mid = (lo * hi).sqrt();
            match self.neutral_r(mid) {
                Ok(p) if p.branch == lo_branch => lo = mid,
                Ok(_) => hi = mid,
                Err(_) => break,
            }
        }
        (lo * hi).sqrt()
    }

    /// Global minimum of the traced curve, refined by golden-section search
    /// on the leading crossing around the best sample.
    pub fn find_critical(&self, curve: &NeutralCurve) -> Result<(CriticalSolution, Vec<Complex64>)> {
        let lead = curve.leading();
        if lead.is_empty() {
            return Err(Error::EmptyCurve);
        }
        let best = lead
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.r.total_cmp(&b.1.r))
            .map(|(i, _)| i)
            .unwrap();
        let lo = if best > 0 { lead[best - 1].k } else { lead[best].k / 1.1 };
        let hi = if best + 1 < lead.len() { lead[best + 1].k } else { lead[best].k * 1.1 };
        let seed = std::cell::Cell::new(lead[best].r);
        let (log_k, r_c) = golden_section(
            |lk: f64| {
                let red = self.reduced(lk.exp())?;
                let p = self
                    .neutral_from(&red, Some(seed.get()))
                    .or_else(|_| self.neutral_from(&red, None))?;
                seed.set(p.r);
                Ok(p.r)
            },
            lo.ln(),
            hi.ln(),
            self.settings.k_tol,
        )?;
        let (k_c, r_c) = if r_c <= lead[best].r {
            (log_k.exp(), r_c)
        } else {
            (lead[best].k, lead[best].r)
        };
        let red = self.reduced(k_c)?;
        let point = self.neutral_from(&red, Some(r_c)).or_else(|_| self.neutral_from(&red, None))?;
        let (gamma, x) = red.eigenpair(point.r)?;
        let w = normalised_w(&x, self.state.n_z());
        let mode = classify_mode(&w)?;
        Ok((
            CriticalSolution {
                k_c,
                r_c: point.r,
                lambda_c: 2.0 * PI / k_c,
                frequency: gamma.im.abs(),
                mode,
                overstable: point.branch == Branch::Oscillatory,
            },
            w,
        ))
    }

    /// Trace with the configured sweep and locate the critical point.
    pub fn critical(&self) -> Result<(CriticalSolution, NeutralCurve)> {
        let s = &self.settings;
        let curve = self.trace_neutral_curve(s.k_min, s.k_max, s.n_k)?;
        let (crit, _) = self.find_critical(&curve)?;
        Ok((crit, curve))
    }
}

type Bracket = (f64, f64, f64, f64);

fn scan_bracket<F: FnMut(f64) -> Result<f64>>(f: &mut F, lo: f64, hi: f64, panels: usize) -> Result<Bracket> {
    let rs = logspace(lo, hi, panels + 1);
    let mut prev: Option<(f64, f64)> = None;
    for r in rs {
        let v = f(r)?;
        if v > 0.0 {
            return match prev {
                Some((rp, vp)) => Ok((rp, vp, r, v)),
                None => Err(Error::Bracket {
                    what: "neutral point (unstable at the bottom of the range)",
                    lo,
                    hi,
                }),
            };
        }
        prev = Some((r, v));
    }
    Err(Error::Bracket {
        what: "no neutral point in range",
        lo,
        hi,
    })
}

fn grow_bracket<F: FnMut(f64) -> Result<f64>>(f: &mut F, r0: f64, lo: f64, hi: f64) -> Result<Bracket> {
    let step = 1.03;
    let v0 = f(r0)?;
    let (mut a, mut fa) = (r0, v0);
    for _ in 0..200 {
        let b = if v0 > 0.0 { (a / step).max(lo) } else { (a * step).min(hi) };
        let fb = f(b)?;
        if fb.signum() != fa.signum() {
            return Ok(if v0 > 0.0 { (b, fb, a, fa) } else { (a, fa, b, fb) });
        }
        if b == lo || b == hi {
            break;
        }
        a = b;
        fa = fb;
    }
    Err(Error::Bracket {
        what: "neutral point near the seed",
        lo,
        hi,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basicstate::uniform_state;
    use crate::photomodel::TaxisKind;

    fn problem(p: &SuspensionParams, n_z: usize) -> StabilityProblem {
        let s = SolverSettings {
            n_z,
            ..Default::default()
        };
        StabilityProblem::new(p, &s, Model::Full).unwrap()
    }

    #[test]
    fn operator_structure() {
        let p = SuspensionParams::default();
        let pr = problem(&p, 65);
        let op = pr.operator(2.0).unwrap();
        let n = 65;
        assert_eq!(op.a0.nrows(), 2 * n);
        assert_eq!(op.bc_rows.len(), 7);
        for &r in &op.bc_rows {
            for j in 0..2 * n {
                assert_eq!(op.b[(r, j)], 0.0);
                assert_eq!(op.a1[(r, j)], 0.0);
            }
        }
        // R enters only through the W rows, and only via Φ
        for i in 0..2 * n {
            for j in 0..2 * n {
                if i >= n || j < n {
                    assert_eq!(op.a1[(i, j)], 0.0);
                }
            }
        }
    }

    #[test]
    fn phototaxis_free_spectrum_is_diffusive() {
        // T ≡ 0: n_s ≡ 1, W decouples from Θ and Θ = cos(mπz) decays at
        // γ = −(k² + m²π²)
        let p = SuspensionParams {
            taxis: TaxisKind::Zero,
            ..Default::default()
        };
        let field = solve_radiation(&p, 101).unwrap();
        let st = uniform_state(&p, &field, 121).unwrap();
        let pr = StabilityProblem::with_state(st, &SolverSettings::default(), Model::Full).unwrap();
        let k = 1.7;
        let ev = pr.reduced(k).unwrap().spectrum(300.0).unwrap();
        for m in 0..4 {
            let target = -(k * k + (m as f64 * PI).powi(2));
            let near = ev.iter().map(|g| (g - target).norm()).fold(f64::INFINITY, f64::min);
            assert!(near < 5e-4 * target.abs(), "m={m}: {near}");
        }
    }

    #[test]
    fn spectrum_is_conjugate_symmetric_with_small_residuals() {
        let p = SuspensionParams {
            extinction: 1.0,
            diffuse: 0.5,
            incidence_deg: 40.0,
            ..Default::default()
        };
        let pr = problem(&p, 81);
        let red = pr.reduced(2.2).unwrap();
        let ev = red.spectrum(330.0).unwrap();
        for g in ev.iter().take(20) {
            let d = ev.iter().map(|h| (h - g.conj()).norm()).fold(f64::INFINITY, f64::min);
            assert!(d <= 1e-8 * g.norm().max(1.0), "{g}: {d}");
        }
        let op = pr.operator(2.2).unwrap();
        let (gamma, x) = red.eigenpair(330.0).unwrap();
        assert!((gamma.re - ev[0].re).abs() < 1e-9 * ev[0].norm().max(1.0));
        assert!(op.residual(330.0, gamma, &x) < 1e-8);
    }

    #[test]
    fn neutral_point_is_transversal() {
        let pr = problem(&SuspensionParams::default(), 81);
        let red = pr.reduced(2.8).unwrap();
        let pt = pr.neutral_from(&red, None).unwrap();
        let g = red.leading(pt.r).unwrap();
        assert!(g.re.abs() <= 1e-6 * g.norm().max(1.0));
        assert!(red.leading(pt.r * 1.01).unwrap().re > 0.0);
        assert!(red.leading(pt.r * 0.99).unwrap().re < 0.0);
        let seeded = pr.neutral_from(&red, Some(pt.r * 1.2)).unwrap();
        assert!((seeded.r - pt.r).abs() < 1e-8 * pt.r);
    }

    #[test]
    fn stationary_pencil_matches_crossing() {
        let pr = problem(&SuspensionParams::default(), 81);
        let red = pr.reduced(2.8).unwrap();
        let pt = pr.neutral_from(&red, None).unwrap();
        if pt.branch == Branch::Stationary {
            let rs = red.stationary_rayleigh(1.0, 5000.0).unwrap();
            assert!((rs[0] - pt.r).abs() < 1e-7 * pt.r, "{rs:?} vs {}", pt.r);
        }
        for r in red.stationary_rayleigh(1.0, 5000.0).unwrap().into_iter().take(3) {
            let ev = red.spectrum(r).unwrap();
            let near = ev.iter().map(|g| g.norm()).fold(f64::INFINITY, f64::min);
            assert!(near < 1e-6 * ev[0].norm().max(1.0), "R={r}: {near}");
        }
    }

    #[test]
    fn mode_counts_sign_changes() {
        let z: Vec<f64> = (0..51).map(|i| i as f64 / 50.0).collect();
        let phase = Complex64::from_polar(1.0, 0.7);
        let one: Vec<Complex64> = z.iter().map(|&z| phase * (PI * z).sin().powi(2)).collect();
        let two: Vec<Complex64> = z.iter().map(|&z| phase * (2.0 * PI * z).sin() * (PI * z).sin()).collect();
        assert_eq!(classify_mode(&one).unwrap(), 1);
        assert_eq!(classify_mode(&two).unwrap(), 2);
        assert!(classify_mode(&[Complex64::new(0.0, 0.0); 5]).is_err());
    }

    #[test]
    fn field_is_periodic() {
        let z = vec![0.0, 0.3, 0.6, 1.0];
        let w = vec![
            Complex64::new(0.0, 0.0),
            Complex64::new(0.4, 0.2),
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 0.0),
        ];
        let k = 2.0 * PI / 2.5;
        let f = eigenfunction_field(&w, &z, Complex64::new(0.0, 0.0), k, 41, 0.0);
        // samples 0 and 20 are one wavelength apart
        for j in 0..4 {
            assert!((f.values[0][j] - f.values[20][j]).abs() < 1e-12);
        }
        let gamma = Complex64::new(0.0, 12.07);
        let period = 2.0 * PI / gamma.im;
        let a = eigenfunction_field(&w, &z, gamma, k, 17, 0.1);
        let b = eigenfunction_field(&w, &z, gamma, k, 17, 0.1 + period);
        for (ra, rb) in a.values.iter().zip(&b.values) {
            for (u, v) in ra.iter().zip(rb) {
                assert!((u - v).abs() < 1e-10);
            }
        }
    }
}
