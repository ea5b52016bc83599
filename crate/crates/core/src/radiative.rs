//! Basic-state radiation in a slab of optical thickness κ.
//!
//! The normalised total intensity `Λ(τ) = G_s/I_t` solves
//!
//! ```text
//! Λ(τ) = (ω/2) ∫₀^κ Λ(t) E₁(|τ−t|) dt + e^{−τ/cos θ₀} + 2 (I_D/I_t) E₂(τ)
//! ```
//!
//! which is discretised by product integration: `Λ` is interpolated by
//! piecewise quadratics on panels of three nodes and the kernel moments are
//! integrated in closed form near the singularity, by Gauss–Legendre away from
//! it. The diagonal is then fixed so that every row reproduces
//! `∫₀^κ E₁(|τ−t|) dt = 2 − E₂(τ) − E₂(κ−τ)` exactly (singularity subtraction).

use crate::error::{Error, Result};
use crate::numerics::interp_cubic_uniform;
use crate::photomodel::SuspensionParams;
use crate::specfun::{
    azimuth_rule, exp_moments_real, expn_ladder, expn_unchecked, graded_cosine_rule,
    legendre_nodes, QuadratureRule,
};
use faer::linalg::solvers::Solve;
use faer::Mat;
use std::f64::consts::PI;
use std::sync::OnceLock;

pub const DEFAULT_N_TAU: usize = 201;
/// Direction cosines per hemisphere for the diffuse-intensity reconstruction.
pub const DEFAULT_FLUX_MU_NODES: usize = 32;
const FINE_FACTOR: usize = 4;
const RESIDUAL_TOL: f64 = 1e-9;

/// Which side of the evaluation point a kernel integral covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Below,
    Above,
    Both,
}

#[derive(Debug, Clone, Copy)]
enum Kernel {
    /// `E_n(|t−τ|)`, optionally times `sgn(t−τ)`.
    Expn { order: u32, odd: bool },
    /// `e^{−|t−τ|/μ}/μ`.
    Exp { mu: f64 },
}

fn reference_gauss(n: usize) -> &'static (Vec<f64>, Vec<f64>) {
    static G6: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    static G10: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    let cell = if n == 6 { &G6 } else { &G10 };
    cell.get_or_init(|| {
        let (x, w) = legendre_nodes(n);
        // map to [0, 1]
        (
            x.iter().map(|v| 0.5 * (v + 1.0)).collect(),
            w.iter().map(|v| 0.5 * v).collect(),
        )
    })
}

/// Uniform τ-mesh with product-integration weights for piecewise-quadratic
/// interpolants.
#[derive(Debug, Clone, PartialEq)]
pub struct TauMesh {
    pub kappa: f64,
    pub h: f64,
    pub nodes: Vec<f64>,
}

impl TauMesh {
    pub fn new(kappa: f64, n_tau: usize) -> Result<Self> {
        if n_tau < 33 || n_tau % 2 == 0 {
            return Err(Error::InvalidParameter {
                name: "n_tau",
                reason: format!("must be odd and at least 33, got {n_tau}"),
            });
        }
        if !(kappa > 0.0) {
            return Err(Error::InvalidParameter {
                name: "extinction",
                reason: "must be positive".into(),
            });
        }
        let h = kappa / (n_tau - 1) as f64;
        let mut nodes: Vec<f64> = (0..n_tau).map(|j| (j as f64 * h).min(kappa)).collect();
        nodes[n_tau - 1] = kappa;
        Ok(Self { kappa, h, nodes })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Weights `w_j` with `∫₀^κ Λ_h(t) K(t−τ) dt = Σ w_j Λ_j`, where `Λ_h` is
    /// the piecewise-quadratic interpolant of nodal values and
    /// `K(s) = E_n(|s|)` (`odd = false`) or `sgn(s) E_n(|s|)` (`odd = true`).
    /// With `deriv` the weights integrate `Λ_h'` instead of `Λ_h`.
    pub fn kernel_weights(&self, tau: f64, order: u32, odd: bool, deriv: bool) -> Vec<f64> {
        let mut w = vec![0.0; self.len()];
        self.accumulate(tau, Kernel::Expn { order, odd }, deriv, Side::Both, &mut w);
        w
    }

    /// Weights for `∫ Λ_h(t) e^{−|t−τ|/μ}/μ dt` over one side of `τ`.
    pub fn exp_weights(&self, tau: f64, mu: f64, side: Side) -> Vec<f64> {
        let mut w = vec![0.0; self.len()];
        self.accumulate(tau, Kernel::Exp { mu }, false, side, &mut w);
        w
    }

    fn accumulate(&self, tau: f64, kernel: Kernel, deriv: bool, side: Side, w: &mut [f64]) {
        let h = self.h;
        let n_panels = (self.len() - 1) / 2;
        let tau = tau.clamp(0.0, self.kappa);
        for p in 0..n_panels {
            let t0 = (2 * p) as f64 * h;
            let t1 = (2 * p + 1) as f64 * h;
            let t2 = (2 * p + 2) as f64 * h;
            // (near end, length, distance to tau, direction away from tau)
            let mut pieces: [(f64, f64, f64, f64); 2] = [(0.0, 0.0, 0.0, 0.0); 2];
            let mut count = 0;
            if t2 <= tau {
                pieces[0] = (t2, 2.0 * h, tau - t2, -1.0);
                count = 1;
            } else if t0 >= tau {
                pieces[0] = (t0, 2.0 * h, t0 - tau, 1.0);
                count = 1;
            } else {
                if tau - t0 > 0.0 {
                    pieces[count] = (tau, tau - t0, 0.0, -1.0);
                    count += 1;
                }
                if t2 - tau > 0.0 {
                    pieces[count] = (tau, t2 - tau, 0.0, 1.0);
                    count += 1;
                }
            }
            for &(near, len, dist, sigma) in &pieces[..count] {
                match side {
                    Side::Below if sigma > 0.0 => continue,
                    Side::Above if sigma < 0.0 => continue,
                    _ => {}
                }
                let Some(mut m) = piece_moments(kernel, dist, len) else {
                    continue;
                };
                if let Kernel::Expn { odd: true, .. } = kernel {
                    if sigma < 0.0 {
                        m.iter_mut().for_each(|v| *v = -*v);
                    }
                }
                let coef = basis_coefficients((near - t1) / h, sigma, h, deriv);
                for (k, ck) in coef.iter().enumerate() {
                    w[2 * p + k] += ck[0] * m[0] + ck[1] * m[1] + ck[2] * m[2];
                }
            }
        }
    }
}

/// `∫₀^L y^j K(d + y) dy` for `j = 0, 1, 2`, or `None` when negligible.
fn piece_moments(kernel: Kernel, d: f64, len: f64) -> Option<[f64; 3]> {
    match kernel {
        Kernel::Exp { mu } => {
            let a = d / mu;
            if a > 40.0 {
                return None;
            }
            let c = len / mu;
            let m = exp_moments_real(c);
            let e = (-a).exp() / mu;
            Some([e * len * m[0], e * len * len * m[1], e * len * len * len * m[2]])
        }
        Kernel::Expn { order, .. } => {
            if d > 700.0 {
                return None;
            }
            if d >= 2.0 * len {
                let (x, wg) = reference_gauss(if d >= 6.0 * len { 6 } else { 10 });
                let mut m = [0.0; 3];
                for (&xg, &wgt) in x.iter().zip(wg) {
                    let y = xg * len;
                    let e = wgt * len * expn_unchecked(order, d + y);
                    m[0] += e;
                    m[1] += e * y;
                    m[2] += e * y * y;
                }
                return Some(m);
            }
            let anti = |s: f64| -> [f64; 3] {
                let e = expn_ladder(s, order as usize + 3);
                let n = order as usize;
                // e[n] = E_{n+1}
                let (a, b, c) = (e[n], e[n + 1], e[n + 2]);
                [-a, -(s * a + b), -(s * s * a + 2.0 * s * b + 2.0 * c)]
            };
            let hi = anti(d + len);
            let lo = anti(d);
            let a0 = hi[0] - lo[0];
            let a1 = hi[1] - lo[1];
            let a2 = hi[2] - lo[2];
            Some([a0, a1 - d * a0, a2 - 2.0 * d * a1 + d * d * a0])
        }
    }
}

/// Coefficients of the quadratic Lagrange basis (or its derivative) as
/// polynomials in the distance `y` from the near end of a piece, where
/// `u = u0 + σ y/h` is the local panel coordinate.
fn basis_coefficients(u0: f64, sigma: f64, h: f64, deriv: bool) -> [[f64; 3]; 3] {
    if deriv {
        let s = sigma / (h * h);
        [
            [(2.0 * u0 - 1.0) / (2.0 * h), s, 0.0],
            [-2.0 * u0 / h, -2.0 * s, 0.0],
            [(2.0 * u0 + 1.0) / (2.0 * h), s, 0.0],
        ]
    } else {
        let u = [u0, sigma / h, 0.0];
        let u2 = [u0 * u0, 2.0 * u0 * sigma / h, 1.0 / (h * h)];
        [
            [0.5 * (u2[0] - u[0]), 0.5 * (u2[1] - u[1]), 0.5 * u2[2]],
            [1.0 - u2[0], -u2[1], -u2[2]],
            [0.5 * (u2[0] + u[0]), 0.5 * (u2[1] + u[1]), 0.5 * u2[2]],
        ]
    }
}

/// `∫₀^κ E₁(|τ−t|) dt`.
pub fn e1_row_sum(tau: f64, kappa: f64) -> f64 {
    let tau = tau.clamp(0.0, kappa);
    2.0 - expn_unchecked(2, tau) - expn_unchecked(2, kappa - tau)
}

/// Basic-state radiation field on the τ-mesh.
#[derive(Debug, Clone)]
pub struct RadiationField {
    pub mesh: TauMesh,
    pub tau_grid: Vec<f64>,
    pub lambda: Vec<f64>,
    pub g_coll: Vec<f64>,
    pub g_diff: Vec<f64>,
    /// `q_s = |q_s|`; empty until [`diffuse_flux`] has run.
    pub flux_mag: Vec<f64>,
    pub albedo: f64,
    pub collimated: f64,
    pub diffuse: f64,
    pub cos_theta0: f64,
    /// Sup-norm residual of the discrete Fredholm system.
    pub residual: f64,
    /// Largest horizontal flux moment seen by the angular reconstruction.
    pub horizontal_flux: f64,
    /// Largest gap between the reconstructed `G^d` and `I_t Λ − G^c`.
    pub diffuse_moment_gap: f64,
    fine_h: f64,
    fine_remainder: Vec<f64>,
}

fn forcing(tau: f64, c: f64, ratio: f64) -> f64 {
    (-tau / c).exp() + 2.0 * ratio * expn_unchecked(2, tau)
}

/// Assemble the product-integration matrix with the subtraction-corrected
/// diagonal.
fn kernel_matrix(mesh: &TauMesh) -> Mat<f64> {
    let n = mesh.len();
    let mut w = Mat::<f64>::zeros(n, n);
    for (i, &tau) in mesh.nodes.iter().enumerate() {
        let row = mesh.kernel_weights(tau, 1, false, false);
        let sum: f64 = row.iter().sum();
        for (j, v) in row.into_iter().enumerate() {
            w[(i, j)] = v;
        }
        w[(i, i)] += e1_row_sum(tau, mesh.kappa) - sum;
    }
    w
}

/// Solve the Fredholm equation for `Λ` by a direct dense solve.
pub fn solve_lambda(params: &SuspensionParams, theta0: f64, n_tau: usize) -> Result<RadiationField> {
    params.validate()?;
    let mesh = TauMesh::new(params.extinction, n_tau)?;
    let c = theta0.cos();
    let ratio = params.diffuse / params.collimated;
    let omega = params.albedo;
    let n = mesh.len();
    let w = kernel_matrix(&mesh);
    let a = Mat::<f64>::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 } - 0.5 * omega * w[(i, j)]);
    let f = Mat::<f64>::from_fn(n, 1, |i, _| forcing(mesh.nodes[i], c, ratio));
    let lam = a.partial_piv_lu().solve(&f);
    let r = &a * &lam - &f;
    let residual = (0..n).fold(0.0f64, |m, i| m.max(r[(i, 0)].abs()));
    if !(residual <= RESIDUAL_TOL) || !lam.as_ref().is_all_finite() {
        return Err(Error::NonConvergence {
            what: "Fredholm solve",
            residual,
        });
    }
    let lam: Vec<f64> = (0..n).map(|i| lam[(i, 0)]).collect();
    Ok(RadiationField::from_lambda(mesh, lam, params, c, residual))
}

/// Fixed-point iteration `Λ ← f + (ω/2) W Λ` on the same discretisation;
/// kept as an independent check on the direct solve.
pub fn solve_lambda_iterative(
    params: &SuspensionParams,
    theta0: f64,
    n_tau: usize,
    tol: f64,
    max_iter: usize,
) -> Result<Vec<f64>> {
    params.validate()?;
    let mesh = TauMesh::new(params.extinction, n_tau)?;
    let c = theta0.cos();
    let ratio = params.diffuse / params.collimated;
    let w = kernel_matrix(&mesh);
    let half_omega = 0.5 * params.albedo;
    let n = mesh.len();
    let f: Vec<f64> = mesh.nodes.iter().map(|&t| forcing(t, c, ratio)).collect();
    let mut lam = f.clone();
    let mut change = f64::INFINITY;
    for _ in 0..max_iter {
        let next: Vec<f64> = (0..n)
            .map(|i| f[i] + half_omega * (0..n).map(|j| w[(i, j)] * lam[j]).sum::<f64>())
            .collect();
        change = next.iter().zip(&lam).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        lam = next;
        if change <= tol {
            return Ok(lam);
        }
    }
    Err(Error::NonConvergence {
        what: "Fredholm fixed-point iteration",
        residual: change,
    })
}

impl RadiationField {
    fn from_lambda(
        mesh: TauMesh,
        lambda: Vec<f64>,
        params: &SuspensionParams,
        cos_theta0: f64,
        residual: f64,
    ) -> Self {
        let it = params.collimated;
        let g_coll: Vec<f64> = mesh.nodes.iter().map(|&t| it * (-t / cos_theta0).exp()).collect();
        let g_diff = lambda.iter().zip(&g_coll).map(|(l, gc)| it * l - gc).collect();
        let mut field = Self {
            tau_grid: mesh.nodes.clone(),
            mesh,
            lambda,
            g_coll,
            g_diff,
            flux_mag: Vec::new(),
            albedo: params.albedo,
            collimated: it,
            diffuse: params.diffuse,
            cos_theta0,
            residual,
            horizontal_flux: 0.0,
            diffuse_moment_gap: 0.0,
            fine_h: 0.0,
            fine_remainder: Vec::new(),
        };
        field.build_fine_table();
        field
    }

    /// Tabulate the kernel integral with its wall singularities removed, so
    /// that off-grid evaluation is a cheap cubic interpolation.
    fn build_fine_table(&mut self) {
        let kappa = self.mesh.kappa;
        let nf = FINE_FACTOR * (self.mesh.len() - 1) + 1;
        let hf = kappa / (nf - 1) as f64;
        let (l0, lk) = (self.lambda[0], *self.lambda.last().unwrap());
        self.fine_remainder = (0..nf)
            .map(|i| {
                let t = (i as f64 * hf).min(kappa);
                self.kernel_integral(t) + l0 * expn_unchecked(2, t) + lk * expn_unchecked(2, kappa - t)
            })
            .collect();
        self.fine_h = hf;
    }

    /// `∫₀^κ Λ_h(t) E₁(|τ−t|) dt` by product integration.
    pub fn kernel_integral(&self, tau: f64) -> f64 {
        dot(&self.mesh.kernel_weights(tau, 1, false, false), &self.lambda)
    }

    pub fn kappa(&self) -> f64 {
        self.mesh.kappa
    }

    fn ratio(&self) -> f64 {
        self.diffuse / self.collimated
    }

    /// `Λ(τ)` at any optical depth in `[0, κ]`.
    pub fn lambda_at(&self, tau: f64) -> f64 {
        let kappa = self.mesh.kappa;
        let tau = tau.clamp(0.0, kappa);
        let (l0, lk) = (self.lambda[0], *self.lambda.last().unwrap());
        let rem = interp_cubic_uniform(0.0, self.fine_h, &self.fine_remainder, tau);
        let j = rem - l0 * expn_unchecked(2, tau) - lk * expn_unchecked(2, kappa - tau);
        forcing(tau, self.cos_theta0, self.ratio()) + 0.5 * self.albedo * j
    }

    /// `Λ(τ)` by exact Nyström interpolation (slower, no table).
    pub fn lambda_nystrom(&self, tau: f64) -> f64 {
        let tau = tau.clamp(0.0, self.mesh.kappa);
        forcing(tau, self.cos_theta0, self.ratio()) + 0.5 * self.albedo * self.kernel_integral(tau)
    }

    pub fn g_total_at(&self, tau: f64) -> f64 {
        self.collimated * self.lambda_at(tau)
    }

    pub fn g_coll_at(&self, tau: f64) -> f64 {
        self.collimated * (-tau / self.cos_theta0).exp()
    }

    pub fn g_diff_at(&self, tau: f64) -> f64 {
        self.g_total_at(tau) - self.g_coll_at(tau)
    }

    /// `dG^d/dτ`; diverges logarithmically at either wall when the
    /// corresponding boundary intensity is nonzero.
    pub fn dgdiff_dtau(&self, tau: f64) -> f64 {
        let kappa = self.mesh.kappa;
        let tau = tau.clamp(0.0, kappa);
        let (l0, lk) = (self.lambda[0], *self.lambda.last().unwrap());
        let inner = dot(&self.mesh.kernel_weights(tau, 1, false, true), &self.lambda);
        let e_top = expn_unchecked(1, tau);
        let e_bot = expn_unchecked(1, kappa - tau);
        let jp = inner - lk * e_bot + l0 * e_top;
        self.collimated * (0.5 * self.albedo * jp - 2.0 * self.ratio() * e_top)
    }

    /// Downward flux magnitude from the `E₂`-kernel convolution of `Λ`.
    pub fn flux_at(&self, tau: f64) -> f64 {
        let tau = tau.clamp(0.0, self.mesh.kappa);
        let conv = dot(&self.mesh.kernel_weights(tau, 2, true, false), &self.lambda);
        self.cos_theta0 * self.collimated * (-tau / self.cos_theta0).exp()
            + 2.0 * self.diffuse * expn_unchecked(3, tau)
            - 0.5 * self.albedo * self.collimated * conv
    }

    /// Diffuse intensity `I^d(τ, ν)` along direction cosine `ν` (positive
    /// upward), by formal solution with the isotropic scattering source.
    pub fn diffuse_intensity(&self, tau: f64, nu: f64) -> f64 {
        let tau = tau.clamp(0.0, self.mesh.kappa);
        let mu = nu.abs();
        let src = self.albedo * self.collimated / (4.0 * PI);
        if nu < 0.0 {
            let w = self.mesh.exp_weights(tau, mu, Side::Below);
            self.diffuse / PI * (-tau / mu).exp() + src * dot(&w, &self.lambda)
        } else {
            let w = self.mesh.exp_weights(tau, mu, Side::Above);
            src * dot(&w, &self.lambda)
        }
    }

    /// Scattered part of the diffuse intensity only (no uncollided boundary
    /// term), for both hemispheres at once: `(down, up)`.
    fn scattered_pair(&self, tau: f64, mu: f64) -> (f64, f64) {
        let src = self.albedo * self.collimated / (4.0 * PI);
        let down = dot(&self.mesh.exp_weights(tau, mu, Side::Below), &self.lambda);
        let up = dot(&self.mesh.exp_weights(tau, mu, Side::Above), &self.lambda);
        (src * down, src * up)
    }

    /// Total intensity in a uniform suspension at height `z`.
    pub fn uniform_intensity(&self, z: f64) -> f64 {
        self.g_total_at(self.mesh.kappa * (1.0 - z))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Reconstruct the diffuse field by angular quadrature and fill in the flux.
///
/// The uncollided diffuse boundary beam contributes `2 I_D E₂(τ)` to `G^d` and
/// `2 I_D E₃(τ)` to the flux; these are added in closed form and only the
/// scattered part is integrated over direction cosines.
pub fn diffuse_flux(field: &RadiationField, params: &SuspensionParams, theta0: f64) -> Result<RadiationField> {
    diffuse_flux_with(field, params, theta0, DEFAULT_FLUX_MU_NODES)
}

pub fn diffuse_flux_with(
    field: &RadiationField,
    params: &SuspensionParams,
    theta0: f64,
    mu_nodes: usize,
) -> Result<RadiationField> {
    if field.lambda.is_empty() {
        return Err(Error::Domain("radiation field has no solved intensity".into()));
    }
    let c = theta0.cos();
    let mu_rule: QuadratureRule = graded_cosine_rule(mu_nodes)?;
    let phi_rule = azimuth_rule(24)?;
    let cos_sum: f64 = phi_rule.nodes.iter().zip(&phi_rule.weights).map(|(p, w)| w * p.cos()).sum();
    let sin_sum: f64 = phi_rule.nodes.iter().zip(&phi_rule.weights).map(|(p, w)| w * p.sin()).sum();
    let mut out = field.clone();
    let mut flux = Vec::with_capacity(field.tau_grid.len());
    let mut gap = 0.0f64;
    let mut horizontal = 0.0f64;
    for (i, &tau) in field.tau_grid.iter().enumerate() {
        let mut g_scat = 0.0;
        let mut q_scat = 0.0;
        let mut qh = 0.0;
        for (&mu, &wm) in mu_rule.nodes.iter().zip(&mu_rule.weights) {
            let (down, up) = field.scattered_pair(tau, mu);
            g_scat += wm * (down + up);
            q_scat += wm * mu * (down - up);
            let sin_t = (1.0 - mu * mu).sqrt();
            let i_down = down + params.diffuse / PI * (-tau / mu).exp();
            qh += wm * sin_t * (i_down + up);
        }
        let g_d = 2.0 * PI * g_scat + 2.0 * params.diffuse * expn_unchecked(2, tau);
        let q = c * params.collimated * (-tau / c).exp()
            + 2.0 * params.diffuse * expn_unchecked(3, tau)
            + 2.0 * PI * q_scat;
        gap = gap.max((g_d - field.g_diff[i]).abs());
        horizontal = horizontal.max((qh * cos_sum).abs()).max((qh * sin_sum).abs());
        flux.push(q);
    }
    if flux.iter().any(|&q| !(q > 0.0)) {
        return Err(Error::Domain("basic-state flux must be positive".into()));
    }
    out.flux_mag = flux;
    out.diffuse_moment_gap = gap;
    out.horizontal_flux = horizontal;
    Ok(out)
}

/// Solve for `Λ` and reconstruct the flux in one call.
pub fn solve_radiation(params: &SuspensionParams, n_tau: usize) -> Result<RadiationField> {
    let theta0 = params.theta0()?;
    let field = solve_lambda(params, theta0, n_tau)?;
    diffuse_flux(&field, params, theta0)
}

/// `G_s(z)` in a uniform suspension (`n ≡ 1`), at the default resolution.
pub fn uniform_intensity(params: &SuspensionParams, theta0: f64, z: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&z) {
        return Err(Error::Domain(format!("height must lie in [0, 1], got {z}")));
    }
    let field = solve_lambda(params, theta0, DEFAULT_N_TAU)?;
    Ok(field.uniform_intensity(z))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::specfun::gauss_rule;

    fn params(kappa: f64, omega: f64, id: f64, theta: f64) -> SuspensionParams {
        SuspensionParams {
            extinction: kappa,
            albedo: omega,
            diffuse: id,
            incidence_deg: theta,
            ..Default::default()
        }
    }

    /// Composite Gauss with geometric grading toward both ends of `[a, b]`,
    /// enough for integrands with logarithmic endpoint singularities.
    fn graded_integral<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
        if b - a <= 0.0 {
            return 0.0;
        }
        let mid = 0.5 * (a + b);
        let mut breaks = vec![a];
        let mut x = 1e-14 * (b - a);
        while a + x < mid {
            breaks.push(a + x);
            x *= 4.0;
        }
        breaks.push(mid);
        let mut x = (mid - a) / 4.0;
        let mut right = Vec::new();
        while x > 1e-14 * (b - a) {
            right.push(b - x);
            x /= 4.0;
        }
        breaks.extend(right);
        breaks.push(b);
        breaks
            .windows(2)
            .map(|w| gauss_rule(12, w[0], w[1]).unwrap().integrate(f))
            .sum()
    }

    #[test]
    fn row_sum_identity_against_quadrature() {
        let kappa = 0.7;
        for i in 1..=10 {
            let tau = kappa * i as f64 / 11.0;
            // integrate in the distance |τ - t| so no node lands on the singularity
            let f = |s: f64| expn_unchecked(1, s);
            let q = graded_integral(&f, 0.0, tau) + graded_integral(&f, 0.0, kappa - tau);
            assert!((q - e1_row_sum(tau, kappa)).abs() < 1e-10, "tau={tau}");
        }
    }

    #[test]
    fn product_weights_integrate_quadratics_exactly() {
        let mesh = TauMesh::new(0.5, 41).unwrap();
        let poly = |t: f64| 1.0 + 2.0 * t - 3.0 * t * t;
        let dpoly = |t: f64| 2.0 - 6.0 * t;
        let vals: Vec<f64> = mesh.nodes.iter().map(|&t| poly(t)).collect();
        for &tau in &[0.0, 0.1, 0.2337, 0.5] {
            for (order, odd) in [(1u32, false), (2, true), (2, false)] {
                let w = mesh.kernel_weights(tau, order, odd, false);
                let got = dot(&w, &vals);
                let k = |t: f64| {
                    let s = t - tau;
                    let e = expn_unchecked(order, s.abs());
                    poly(t) * if odd { s.signum() * e } else { e }
                };
                let exact = graded_integral(&k, 0.0, tau) + graded_integral(&k, tau, 0.5);
                assert!((got - exact).abs() < 1e-11, "tau={tau} n={order} odd={odd}: {got} {exact}");
            }
            let w = mesh.kernel_weights(tau, 1, false, true);
            let got = dot(&w, &vals);
            let k = |t: f64| dpoly(t) * expn_unchecked(1, (t - tau).abs());
            let exact = graded_integral(&k, 0.0, tau) + graded_integral(&k, tau, 0.5);
            assert!((got - exact).abs() < 1e-11);
            let mu = 0.07;
            let w = mesh.exp_weights(tau, mu, Side::Both);
            let got = dot(&w, &vals);
            let k = |t: f64| poly(t) * (-(t - tau).abs() / mu).exp() / mu;
            let exact = graded_integral(&k, 0.0, tau) + graded_integral(&k, tau, 0.5);
            assert!((got - exact).abs() < 1e-12);
        }
    }

    #[test]
    fn lambert_beer_limit() {
        let p = params(0.5, 0.0, 0.0, 40.0);
        let t0 = p.theta0().unwrap();
        let f = solve_lambda(&p, t0, 101).unwrap();
        for (&t, &l) in f.tau_grid.iter().zip(&f.lambda) {
            assert!((l - (-t / t0.cos()).exp()).abs() < 1e-15);
        }
    }

    #[test]
    fn diffuse_only_top_value() {
        let p = params(0.5, 0.0, 0.26, 0.0);
        let f = solve_lambda(&p, 0.0, 101).unwrap();
        assert!((f.lambda[0] - 1.52).abs() < 1e-14);
    }

    #[test]
    fn iterative_path_agrees_with_direct_solve() {
        let p = params(1.0, 0.9, 0.3, 30.0);
        let t0 = p.theta0().unwrap();
        let f = solve_lambda(&p, t0, 101).unwrap();
        let it = solve_lambda_iterative(&p, t0, 101, 1e-14, 2000).unwrap();
        for (a, b) in f.lambda.iter().zip(&it) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn table_interpolation_matches_nystrom() {
        let p = params(0.5, 0.4, 0.26, 0.0);
        let f = solve_lambda(&p, 0.0, DEFAULT_N_TAU).unwrap();
        for i in 0..=97 {
            let tau = 0.5 * i as f64 / 97.0;
            assert!((f.lambda_at(tau) - f.lambda_nystrom(tau)).abs() < 2e-8, "tau={tau}");
        }
        for (i, &t) in f.tau_grid.iter().enumerate() {
            assert!((f.lambda_at(t) - f.lambda[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn derivative_of_diffuse_intensity_matches_differences() {
        let p = params(1.0, 0.5, 0.3, 20.0);
        let t0 = p.theta0().unwrap();
        let f = solve_lambda(&p, t0, DEFAULT_N_TAU).unwrap();
        let h = 1e-5;
        for &tau in &[0.1, 0.33, 0.5, 0.77, 0.9] {
            let fd = (f.g_diff_at(tau + h) - f.g_diff_at(tau - h)) / (2.0 * h);
            let d = f.dgdiff_dtau(tau);
            assert!((fd - d).abs() < 2e-4 * d.abs().max(1.0), "tau={tau}: {fd} vs {d}");
        }
    }

    #[test]
    fn flux_routes_agree() {
        let p = params(1.0, 0.5, 0.3, 0.0);
        let f = solve_radiation(&p, DEFAULT_N_TAU).unwrap();
        assert!(f.horizontal_flux < 1e-10);
        // limited by the 32-node μ rule on grazing exponentials
        assert!(f.diffuse_moment_gap < 2e-6, "{}", f.diffuse_moment_gap);
        for (i, &tau) in f.tau_grid.iter().enumerate() {
            assert!((f.flux_mag[i] - f.flux_at(tau)).abs() < 2e-6);
        }
    }
}
