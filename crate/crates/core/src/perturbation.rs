//! Perturbed radiation field and the coefficient profiles of the linear
//! concentration equation.
//!
//! The horizontal wavevector is taken along `x` (`l = k`, `m = 0`). The
//! diffuse perturbation `Ψ^d` is found by discrete ordinates: along each
//! direction the transport equation is integrated cell by cell with the
//! attenuation treated exactly and the source interpolated by a cubic.
//!
//! For a real input the response has the symmetry `Ψ(−ξ) = conj Ψ(ξ)`, so
//! `𝒢^d` is real and `P` is purely imaginary. The coupling maps are stored
//! as real matrices with `P = i·flux_x·input`.

use crate::basicstate::BasicState;
use crate::error::{Error, Result};
use crate::numerics::cumulative_integral;
use crate::specfun::{azimuth_rule, exp_moments, gauss_rule, QuadratureRule};
use faer::linalg::solvers::Solve;
use faer::Mat;
use num_complex::Complex64;
use std::f64::consts::PI;

pub const DEFAULT_MU_NODES: usize = 16;
pub const DEFAULT_PHI_NODES: usize = 24;
pub const RTE_TOL: f64 = 1e-9;

/// Product rule over directions: Gauss in `μ = |ν|` per hemisphere and
/// periodic trapezoid in azimuth.
#[derive(Debug, Clone)]
pub struct AngularRule {
    pub mu: QuadratureRule,
    pub phi: QuadratureRule,
}

impl AngularRule {
    pub fn new(mu_nodes: usize, phi_nodes: usize) -> Result<Self> {
        if phi_nodes < 4 || phi_nodes % 2 != 0 {
            return Err(Error::InvalidParameter {
                name: "phi_nodes",
                reason: format!("need an even count of at least 4, got {phi_nodes}"),
            });
        }
        Ok(Self {
            mu: gauss_rule(mu_nodes, 0.0, 1.0)?,
            phi: azimuth_rule(phi_nodes)?,
        })
    }

    /// Azimuthal classes `(cos φ, weight, mirrored)`: directions with
    /// `cos φ < 0` are folded onto their mirror images.
    fn azimuth_classes(&self) -> Vec<(f64, f64, bool)> {
        let mut out: Vec<(f64, f64, bool)> = Vec::new();
        for (&p, &w) in self.phi.nodes.iter().zip(&self.phi.weights) {
            let c = p.cos();
            if c < -1e-12 {
                continue;
            }
            let (c, mirrored) = if c.abs() <= 1e-12 { (0.0, false) } else { (c, true) };
            match out.iter_mut().find(|e| (e.0 - c).abs() < 1e-12) {
                Some(e) => e.1 += w,
                None => out.push((c, w, mirrored)),
            }
        }
        out
    }
}

impl Default for AngularRule {
    fn default() -> Self {
        Self::new(DEFAULT_MU_NODES, DEFAULT_PHI_NODES).expect("default angular rule")
    }
}

/// Cell-by-cell propagator along one direction.
struct Transport {
    up: bool,
    trans: Vec<Complex64>,
    start: Vec<usize>,
    w: Vec<[Complex64; 4]>,
    /// Weights for a source `I·x` with `I` the basic intensity on the ray
    /// and `x` interpolated from the nodes.
    wt: Vec<[Complex64; 4]>,
}

const SUB_NODES: usize = 8;

/// Per-cell data for the source `I·x` along one ray, independent of the
/// wavenumber. The scattered part of `I` and the attenuation vary on the
/// scale `μ/κn`, below the grid spacing for grazing rays, so they are
/// sampled exactly at Gauss points inside every cell. The uncollided wall
/// light times the attenuation is constant along the ray and is kept as one
/// factor at the outgoing node.
#[derive(Debug, Clone)]
struct RaySource {
    /// `(y, amplitude)` per Gauss point, `y` measured from the outgoing node
    /// in grid spacings; the amplitude carries weight, attenuation and `I`.
    sub: Vec<[(f64, f64); SUB_NODES]>,
    u_out: Vec<f64>,
}

impl RaySource {
    fn new(state: &BasicState, mu: f64, up: bool, scattered: impl Fn(f64) -> f64, uncollided: &[f64]) -> Self {
        let n = state.n_z();
        let h = state.h;
        let g = gauss_rule(SUB_NODES, 0.0, 1.0).expect("fixed gauss rule");
        let mut sub = Vec::with_capacity(n - 1);
        let mut u_out = Vec::with_capacity(n - 1);
        for j in 0..n - 1 {
            let o = if up { j + 1 } else { j };
            let mut cell = [(0.0, 0.0); SUB_NODES];
            for (e, (&y, &w)) in cell.iter_mut().zip(g.nodes.iter().zip(&g.weights)) {
                let z = if up { state.z[o] - y * h } else { state.z[o] + y * h };
                let att = (-(state.tau_at(z) - state.tau[o]).abs() / mu).exp();
                *e = (y, w * h / mu * att * scattered(z));
            }
            sub.push(cell);
            u_out.push(uncollided[o]);
        }
        Self { sub, u_out }
    }
}

/// Chebyshev points of the first kind on `[0, 1]`.
const CHEB: [f64; 4] = [
    0.038060233744356624,
    0.30865828381745514,
    0.6913417161825449,
    0.9619397662556434,
];

fn cheb_monomials() -> [[f64; 4]; 4] {
    lagrange_monomials(&CHEB)
}

/// Lagrange basis on nodes `y` evaluated at `x`.
fn lagrange_at(y: &[f64; 4], x: f64) -> [f64; 4] {
    let mut out = [1.0; 4];
    for q in 0..4 {
        for l in 0..4 {
            if l != q {
                out[q] *= (x - y[l]) / (y[q] - y[l]);
            }
        }
    }
    out
}

/// Monomial coefficients of the Lagrange basis on four nodes.
fn lagrange_monomials(y: &[f64; 4]) -> [[f64; 4]; 4] {
    let mut out = [[0.0; 4]; 4];
    for q in 0..4 {
        let others: Vec<f64> = (0..4).filter(|&l| l != q).map(|l| y[l]).collect();
        let (a, b, c) = (others[0], others[1], others[2]);
        let denom: f64 = others.iter().map(|&o| y[q] - o).product();
        out[q] = [-a * b * c / denom, (a * b + b * c + c * a) / denom, -(a + b + c) / denom, 1.0 / denom];
    }
    out
}

impl Transport {
    /// `kxi = k·ξ`; `up` selects `ν = +μ`.
    fn new(state: &BasicState, mu: f64, up: bool, kxi: f64, source: &RaySource) -> Self {
        let n = state.n_z();
        let h = state.h;
        let s = if up { 1.0 } else { -1.0 };
        let mut trans = Vec::with_capacity(n - 1);
        let mut start = Vec::with_capacity(n - 1);
        let mut w = Vec::with_capacity(n - 1);
        let mut wt = Vec::with_capacity(n - 1);
        for j in 0..n - 1 {
            let (o, p) = if up { (j + 1, j) } else { (j, j + 1) };
            let st = j.saturating_sub(1).min(n - 4);
            let delta = s * (state.tau[p] - state.tau[o]);
            let c = Complex64::new(delta, kxi * h) / mu;
            let m = exp_moments(c);
            let mut y = [0.0; 4];
            for (q, yq) in y.iter_mut().enumerate() {
                *yq = s * (o as f64 - (st + q) as f64);
            }
            // source and optical depth interpolated from the four grid nodes;
            // the depth beyond the chord is folded into the integrand at
            // Chebyshev points inside the cell
            let taus = [0, 1, 2, 3].map(|q| s * (state.tau[st + q] - state.tau[o]));
            let inner = cheb_monomials();
            let mut wj = [Complex64::new(0.0, 0.0); 4];
            for (l, &yl) in CHEB.iter().enumerate() {
                let lag = lagrange_at(&y, yl);
                let dtau: f64 = (0..4).map(|q| lag[q] * taus[q]).sum();
                let r = dtau - delta * yl;
                let ml: Complex64 = (0..4).map(|e| m[e] * inner[l][e]).sum();
                let f = ml * (h / mu * (-r / mu).exp());
                for q in 0..4 {
                    wj[q] += f * lag[q];
                }
            }
            let mono = lagrange_monomials(&y);
            let mp = exp_moments(Complex64::new(0.0, kxi * h / mu));
            let mut wtj = [0, 1, 2, 3].map(|q| (0..4).map(|e| mp[e] * mono[q][e]).sum::<Complex64>() * (h / mu * source.u_out[j]));
            for &(ys, amp) in &source.sub[j] {
                let lag = lagrange_at(&y, ys);
                let f = Complex64::from_polar(amp, -kxi * h * ys / mu);
                for q in 0..4 {
                    wtj[q] += f * lag[q];
                }
            }
            wt.push(wtj);
            trans.push((-c).exp());
            start.push(st);
            w.push(wj);
        }
        Self { up, trans, start, w, wt }
    }

    fn cells(&self) -> Box<dyn Iterator<Item = (usize, usize, usize)> + '_> {
        let n = self.trans.len() + 1;
        if self.up {
            Box::new((0..n - 1).map(|j| (j, j + 1, j)))
        } else {
            Box::new((0..n - 1).rev().map(|j| (j, j, j + 1)))
        }
    }

    /// Intensity along the direction for the source `src + I·x`, both given
    /// at the nodes.
    fn propagate(&self, src: &[Complex64], x: &[Complex64]) -> Vec<Complex64> {
        let mut psi = vec![Complex64::new(0.0, 0.0); src.len()];
        for (j, o, p) in self.cells() {
            let st = self.start[j];
            let mut v = self.trans[j] * psi[p];
            for q in 0..4 {
                v += self.w[j][q] * src[st + q] + self.wt[j][q] * x[st + q];
            }
            psi[o] = v;
        }
        psi
    }

    /// Dense propagator, row-major `n × n`.
    fn matrix(&self, n: usize) -> Vec<Complex64> {
        let mut t = vec![Complex64::new(0.0, 0.0); n * n];
        for (j, o, p) in self.cells() {
            let st = self.start[j];
            let tr = self.trans[j];
            for col in 0..n {
                t[o * n + col] = tr * t[p * n + col];
            }
            for q in 0..4 {
                t[o * n + st + q] += self.w[j][q];
            }
        }
        t
    }

    /// Dense response to `x` of the source `I·x`.
    fn theta_matrix(&self, n: usize) -> Vec<Complex64> {
        let mut t = vec![Complex64::new(0.0, 0.0); n * n];
        for (j, o, p) in self.cells() {
            let st = self.start[j];
            let tr = self.trans[j];
            for col in 0..n {
                t[o * n + col] = tr * t[p * n + col];
            }
            for q in 0..4 {
                t[o * n + st + q] += self.wt[j][q];
            }
        }
        t
    }
}

/// One polar ordinate of the discrete-ordinates set.
#[derive(Debug, Clone, Copy)]
struct Ray {
    mu: f64,
    up: bool,
    weight: f64,
}

impl Ray {
    fn nu(&self) -> f64 {
        if self.up {
            self.mu
        } else {
            -self.mu
        }
    }
}

/// Direction set plus the basic-state diffuse intensity sampled along every
/// polar ordinate; independent of the wavenumber.
#[derive(Debug, Clone)]
pub struct RteContext {
    pub rule: AngularRule,
    rays: Vec<Ray>,
    intensity: Vec<Vec<f64>>,
    sources: Vec<RaySource>,
}

impl RteContext {
    pub fn new(state: &BasicState, rule: AngularRule) -> Self {
        let mut rays = Vec::new();
        for (&mu, &w) in rule.mu.nodes.iter().zip(&rule.mu.weights) {
            for up in [true, false] {
                rays.push(Ray { mu, up, weight: w });
            }
        }
        let intensity: Vec<Vec<f64>> = rays
            .iter()
            .map(|r| state.tau.iter().map(|&t| state.field.diffuse_intensity(t, r.nu())).collect())
            .collect();
        let id = state.params.diffuse;
        let sources = rays
            .iter()
            .map(|r| {
                // uncollided wall light (I_D/π)e^{−τ/μ} reaches downward rays only
                let unc = |t: f64| if r.up { 0.0 } else { id / PI * (-t / r.mu).exp() };
                let uncollided: Vec<f64> = state.tau.iter().map(|&t| unc(t)).collect();
                let scattered = |z: f64| {
                    let t = state.tau_at(z);
                    state.field.diffuse_intensity(t, r.nu()) - unc(t)
                };
                RaySource::new(state, r.mu, r.up, scattered, &uncollided)
            })
            .collect();
        Self { rule, rays, intensity, sources }
    }
}

/// Angular moments of the perturbed diffuse field for one input profile.
#[derive(Debug, Clone)]
pub struct PerturbedRadiation {
    pub g_coll: Vec<Complex64>,
    pub g_diff: Vec<Complex64>,
    /// `D𝒢^d` from the transport equation itself.
    pub dg_diff: Vec<Complex64>,
    /// `P`, the `x` moment.
    pub flux_x: Vec<Complex64>,
    /// `Q`, the `y` moment; zero with the wavevector along `x`.
    pub flux_y: Vec<Complex64>,
    /// Largest intensity on an entering ray at either wall.
    pub inflow_max: f64,
    pub iterations: usize,
    pub residual: f64,
}

/// `𝒢^c(z) = I_t e^{−τ/cos θ₀}(κ/cos θ₀)∫₁^z Θ`.
pub fn perturbed_collimated(state: &BasicState, theta: &[Complex64]) -> Result<Vec<Complex64>> {
    if theta.len() != state.n_z() {
        return Err(Error::GridMismatch(format!(
            "Θ has {} samples, grid has {}",
            theta.len(),
            state.n_z()
        )));
    }
    let phi = integral_from_top(theta, state.h);
    let a = state.params.extinction / state.cos_theta0;
    Ok(phi.iter().zip(&state.g_coll).map(|(p, g)| p * (a * g)).collect())
}

fn integral_from_top(theta: &[Complex64], h: f64) -> Vec<Complex64> {
    let re = cumulative_integral(&theta.iter().map(|v| v.re).collect::<Vec<_>>(), h);
    let im = cumulative_integral(&theta.iter().map(|v| v.im).collect::<Vec<_>>(), h);
    let (re1, im1) = (*re.last().unwrap(), *im.last().unwrap());
    re.iter().zip(&im).map(|(r, i)| Complex64::new(r - re1, i - im1)).collect()
}

/// Solve the perturbed transport equation for one `Θ` by source iteration
/// over every ordinate.
pub fn solve_perturbed_rte(
    state: &BasicState,
    ctx: &RteContext,
    theta: &[Complex64],
    k: f64,
    tol: f64,
    max_iter: usize,
) -> Result<PerturbedRadiation> {
    let n = state.n_z();
    let g_coll = perturbed_collimated(state, theta)?;
    let p = &state.params;
    let alpha = p.albedo * p.extinction / (4.0 * PI);
    let kappa = p.extinction;
    let relax = if p.albedo >= 0.9 { 0.5 } else { 1.0 };
    let zero = Complex64::new(0.0, 0.0);
    let mut transports = Vec::new();
    for (ri, ray) in ctx.rays.iter().enumerate() {
        let sin_t = (1.0 - ray.mu * ray.mu).sqrt();
        for (&phi, &wp) in ctx.rule.phi.nodes.iter().zip(&ctx.rule.phi.weights) {
            let xi = sin_t * phi.cos();
            transports.push((ri, xi, wp, Transport::new(state, ray.mu, ray.up, k * xi, &ctx.sources[ri])));
        }
    }
    let mut g_diff = vec![zero; n];
    let mut residual = f64::INFINITY;
    let mut out = None;
    let x_src: Vec<Complex64> = theta.iter().map(|t| -kappa * t).collect();
    for it in 1..=max_iter {
        let iso: Vec<Complex64> = (0..n)
            .map(|i| alpha * (state.n[i] * (g_coll[i] + g_diff[i]) + state.g_total[i] * theta[i]))
            .collect();
        let mut g_new = vec![zero; n];
        let mut dg = vec![zero; n];
        let mut px = vec![zero; n];
        let mut inflow = 0.0f64;
        for (ri, xi, wp, tr) in &transports {
            let ray = ctx.rays[*ri];
            let src: Vec<Complex64> = (0..n).map(|i| iso[i] - kappa * ctx.intensity[*ri][i] * theta[i]).collect();
            let psi = tr.propagate(&iso, &x_src);
            let w = ray.weight * wp;
            let wall = if ray.up { 0 } else { n - 1 };
            inflow = inflow.max(psi[wall].norm());
            for i in 0..n {
                g_new[i] += w * psi[i];
                px[i] += w * xi * psi[i];
                let att = Complex64::new(kappa * state.n[i], k * xi);
                dg[i] += w * (src[i] - att * psi[i]) / ray.nu();
            }
        }
        residual = g_new.iter().zip(&g_diff).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        let scale = g_new.iter().map(|v| v.norm()).fold(1e-300, f64::max);
        let converged = residual <= tol * scale.max(1.0) || p.albedo == 0.0;
        if converged {
            out = Some(PerturbedRadiation {
                g_coll: g_coll.clone(),
                g_diff: g_new,
                dg_diff: dg,
                flux_x: px,
                flux_y: vec![zero; n],
                inflow_max: inflow,
                iterations: it,
                residual,
            });
            break;
        }
        for i in 0..n {
            g_diff[i] = g_diff[i] + relax * (g_new[i] - g_diff[i]);
        }
    }
    out.ok_or(Error::NonConvergence {
        what: "perturbed radiative transfer source iteration",
        residual,
    })
}

/// What the coupling maps act on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CouplingInput {
    /// The concentration perturbation `Θ`.
    Theta,
    /// The integrated perturbation `Φ`, with `Θ = DΦ` and
    /// `𝒢^c = (κ/cos θ₀) G_s^c Φ`.
    Phi,
}

/// Dense real matrices mapping an input profile to the perturbed radiation
/// moments: `𝒢^c = g_coll·x`, `𝒢^d = g_diff·x`, `D𝒢^d = dg_diff·x` and
/// `P = i·flux_x·x`.
#[derive(Debug, Clone)]
pub struct RadiationCoupling {
    pub k: f64,
    pub input: CouplingInput,
    pub g_coll: Mat<f64>,
    pub g_diff: Mat<f64>,
    pub dg_diff: Mat<f64>,
    pub flux_x: Mat<f64>,
}

fn mat_from_rows(n: usize, f: impl Fn(usize, usize) -> f64) -> Mat<f64> {
    Mat::from_fn(n, n, f)
}

/// Matrix of the fourth-order cumulative integral `∫₁^z`.
fn integral_from_top_matrix(n: usize, h: f64) -> Mat<f64> {
    let mut m = Mat::<f64>::zeros(n, n);
    let mut e = vec![0.0; n];
    for col in 0..n {
        e[col] = 1.0;
        let c = cumulative_integral(&e, h);
        let last = c[n - 1];
        for row in 0..n {
            m[(row, col)] = c[row] - last;
        }
        e[col] = 0.0;
    }
    m
}

/// Build the coupling maps at wavenumber `k`. `d1` is the first-derivative
/// matrix on the state's grid, used when the input is `Φ`.
pub fn radiation_coupling_matrices(
    state: &BasicState,
    ctx: &RteContext,
    k: f64,
    input: CouplingInput,
    d1: &Mat<f64>,
) -> Result<RadiationCoupling> {
    let n = state.n_z();
    if d1.nrows() != n {
        return Err(Error::GridMismatch(format!(
            "derivative matrix is {}×{}, grid has {n} points",
            d1.nrows(),
            d1.ncols()
        )));
    }
    let p = &state.params;
    let kappa = p.extinction;
    let alpha = p.albedo * kappa / (4.0 * PI);
    let a_coll = kappa / state.cos_theta0;
    // input ↦ 𝒢^c and input ↦ Θ
    let (c_coll, c_theta) = match input {
        CouplingInput::Phi => (
            Mat::from_fn(n, n, |i, j| if i == j { a_coll * state.g_coll[i] } else { 0.0 }),
            d1.clone(),
        ),
        CouplingInput::Theta => {
            let j = integral_from_top_matrix(n, state.h);
            (
                Mat::from_fn(n, n, |r, c| a_coll * state.g_coll[r] * j[(r, c)]),
                Mat::from_fn(n, n, |r, c| if r == c { 1.0 } else { 0.0 }),
            )
        }
    };

    // aggregate over azimuth for every polar ordinate
    let classes = ctx.rule.azimuth_classes();
    let mut g_hat = Mat::<f64>::zeros(n, n);
    let mut g_hat_i = Mat::<f64>::zeros(n, n);
    let mut x_hat = Mat::<f64>::zeros(n, n);
    let mut x_hat_i = Mat::<f64>::zeros(n, n);
    let mut a_sum = Mat::<f64>::zeros(n, n);
    let mut b_sum = Mat::<f64>::zeros(n, n);
    let two_pi = 2.0 * PI;
    for (ri, ray) in ctx.rays.iter().enumerate() {
        let sin_t = (1.0 - ray.mu * ray.mu).sqrt();
        let mut g_r = vec![0.0; n * n];
        let mut x_r = vec![0.0; n * n];
        let mut gi_r = vec![0.0; n * n];
        let mut xi_r = vec![0.0; n * n];
        for &(cphi, wphi, mirrored) in &classes {
            let xi = sin_t * cphi;
            let tr = Transport::new(state, ray.mu, ray.up, k * xi, &ctx.sources[ri]);
            let t = tr.matrix(n);
            let ti = tr.theta_matrix(n);
            let f = if mirrored { 2.0 } else { 1.0 };
            for idx in 0..n * n {
                g_r[idx] += f * wphi * t[idx].re;
                x_r[idx] += f * wphi * xi * t[idx].im;
                gi_r[idx] += f * wphi * ti[idx].re;
                xi_r[idx] += f * wphi * xi * ti[idx].im;
            }
        }
        let intensity = &ctx.intensity[ri];
        let wr = ray.weight;
        let dw = wr / ray.nu();
        for r in 0..n {
            let kn = kappa * state.n[r];
            for c in 0..n {
                let (g, x) = (g_r[r * n + c], x_r[r * n + c]);
                let (gi, xi) = (gi_r[r * n + c], xi_r[r * n + c]);
                g_hat[(r, c)] += wr * g;
                g_hat_i[(r, c)] += wr * gi;
                x_hat[(r, c)] += wr * x;
                x_hat_i[(r, c)] += wr * xi;
                // φ-summed dΨ/dz = (2π S − κ n Ψ_G + k Ψ_X)/ν
                let local = if r == c { two_pi } else { 0.0 };
                a_sum[(r, c)] += dw * (local - kn * g + k * x);
                b_sum[(r, c)] += dw * (local * intensity[c] - kn * gi + k * xi);
            }
        }
    }

    // isotropic source without the diffuse feedback
    let s0 = mat_from_rows(n, |r, c| alpha * (state.n[r] * c_coll[(r, c)] + state.g_total[r] * c_theta[(r, c)]));
    let lhs = Mat::from_fn(n, n, |r, c| if r == c { 1.0 } else { 0.0 } - alpha * g_hat[(r, c)] * state.n[c]);
    let gi_c = &g_hat_i * &c_theta;
    let rhs = &g_hat * &s0 - Mat::from_fn(n, n, |r, c| kappa * gi_c[(r, c)]);
    let g_diff = lhs.partial_piv_lu().solve(&rhs);
    let q = Mat::from_fn(n, n, |r, c| s0[(r, c)] + alpha * state.n[r] * g_diff[(r, c)]);
    let gi_theta = &x_hat_i * &c_theta;
    let flux_x = &x_hat * &q - Mat::from_fn(n, n, |r, c| kappa * gi_theta[(r, c)]);
    let b_theta = &b_sum * &c_theta;
    let dg_diff = &a_sum * &q - Mat::from_fn(n, n, |r, c| kappa * b_theta[(r, c)]);
    Ok(RadiationCoupling {
        k,
        input,
        g_coll: c_coll,
        g_diff,
        dg_diff,
        flux_x,
    })
}

impl RadiationCoupling {
    /// Apply the maps to a (possibly complex) input profile.
    pub fn apply(&self, x: &[Complex64]) -> PerturbedRadiation {
        let n = x.len();
        let mv = |m: &Mat<f64>| -> Vec<Complex64> {
            (0..n).map(|r| (0..n).map(|c| x[c] * m[(r, c)]).sum()).collect()
        };
        let i = Complex64::new(0.0, 1.0);
        PerturbedRadiation {
            g_coll: mv(&self.g_coll),
            g_diff: mv(&self.g_diff),
            dg_diff: mv(&self.dg_diff),
            flux_x: mv(&self.flux_x).into_iter().map(|v| i * v).collect(),
            flux_y: vec![Complex64::new(0.0, 0.0); n],
            inflow_max: 0.0,
            iterations: 0,
            residual: 0.0,
        }
    }
}

/// The real profiles `Γ₁`, `Γ₂` of the full model, and `Γ₀` for one
/// perturbed field.
#[derive(Debug, Clone)]
pub struct GammaCoefficients {
    pub gamma0: Vec<Complex64>,
    pub gamma1: Vec<f64>,
    pub gamma2: Vec<f64>,
}

/// `D(n_s dT_s/dG)` by the product rule.
pub fn d_n_slope(state: &BasicState) -> Vec<f64> {
    (0..state.n_z())
        .map(|i| {
            let dg = state.dg_coll[i] + state.dg_diff[i];
            state.dn[i] * state.dt_dg[i] + state.n[i] * state.d2t_dg2[i] * dg
        })
        .collect()
}

/// `Γ₁` and `Γ₂` for a perturbed intensity `G₁ = (κ/cos θ₀)·g·Φ + …`,
/// with the coupled intensity profile `g` and extra `Γ₂` profile `extra`.
pub(crate) fn gamma12_with(state: &BasicState, g: &[f64], dg: &[f64], extra: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let v = state.params.swim_speed;
    let a = state.params.extinction / state.cos_theta0;
    let dns = d_n_slope(state);
    let g1 = (0..state.n_z())
        .map(|i| a * v * (dns[i] * g[i] + state.n[i] * state.dt_dg[i] * dg[i]))
        .collect();
    let g2 = (0..state.n_z())
        .map(|i| 2.0 * a * v * state.n[i] * state.g_coll[i] * state.dt_dg[i] + extra[i])
        .collect();
    (g1, g2)
}

/// `Γ₁`, `Γ₂` of the full model.
pub fn gamma_profiles(state: &BasicState) -> (Vec<f64>, Vec<f64>) {
    let v = state.params.swim_speed;
    let extra: Vec<f64> = (0..state.n_z()).map(|i| v * state.dt_dg[i] * state.dg_diff[i]).collect();
    gamma12_with(state, &state.g_coll, &state.dg_coll, &extra)
}

/// Coefficient profiles with `Γ₀` evaluated from a perturbed field.
pub fn gamma_coefficients(state: &BasicState, pert: &PerturbedRadiation, k: f64) -> Result<GammaCoefficients> {
    let n = state.n_z();
    if pert.g_diff.len() != n {
        return Err(Error::GridMismatch("perturbed field does not match the grid".into()));
    }
    if state.flux.iter().any(|&q| !(q > 0.0)) {
        return Err(Error::Domain("basic-state flux must be positive".into()));
    }
    let v = state.params.swim_speed;
    let dns = d_n_slope(state);
    let i = Complex64::new(0.0, 1.0);
    let gamma0 = (0..n)
        .map(|j| {
            let ns = state.n[j] * state.dt_dg[j];
            v * (dns[j] * pert.g_diff[j] + ns * pert.dg_diff[j])
                - i * (v * state.n[j] * state.t[j] / state.flux[j]) * (k * pert.flux_x[j])
        })
        .collect();
    let (gamma1, gamma2) = gamma_profiles(state);
    Ok(GammaCoefficients { gamma0, gamma1, gamma2 })
}
