//! Equilibrium concentration profile by shooting on `(n_s, τ)` from the top.

use crate::error::{Error, Result};
use crate::numerics::{bisect, brent, interp_cubic_uniform, logspace};
use crate::photomodel::{SuspensionParams, TaxisFunction, TaxisKind};
use crate::radiative::RadiationField;

pub const DEFAULT_N_Z: usize = 151;
const SUBSTEPS: usize = 4;
const SHOOT_TOL: f64 = 1e-10;

/// Basic state sampled on a uniform grid `z_i = i/(n_z − 1)`.
///
/// Vertical derivatives are with respect to `z`; the `dg_diff` wall samples
/// are evaluated a hair inside the slab because `dG^d/dz` diverges
/// logarithmically at a wall that receives diffuse light.
#[derive(Debug, Clone)]
pub struct BasicState {
    pub params: SuspensionParams,
    pub cos_theta0: f64,
    pub field: RadiationField,
    pub taxis: TaxisFunction,
    pub z: Vec<f64>,
    pub h: f64,
    pub n: Vec<f64>,
    pub tau: Vec<f64>,
    pub g_total: Vec<f64>,
    pub g_coll: Vec<f64>,
    pub g_diff: Vec<f64>,
    pub dg_coll: Vec<f64>,
    pub dg_diff: Vec<f64>,
    pub flux: Vec<f64>,
    pub t: Vec<f64>,
    pub dt_dg: Vec<f64>,
    pub d2t_dg2: Vec<f64>,
    /// `dn_s/dz = V_c T_s n_s`.
    pub dn: Vec<f64>,
    /// Concentration at the top, the shooting unknown.
    pub n_top: f64,
    /// `τ(0)/κ`, which is `∫₀¹ n_s dz` as integrated alongside `n_s`.
    pub mass: f64,
    pub sublayer: Vec<f64>,
}

fn rk4_profile(
    field: &RadiationField,
    taxis: &TaxisFunction,
    v: f64,
    kappa: f64,
    n_top: f64,
    n_z: usize,
) -> (Vec<f64>, Vec<f64>) {
    let rhs = |n: f64, tau: f64| (v * taxis.value(field.g_total_at(tau)) * n, -kappa * n);
    let dz = -1.0 / ((n_z - 1) * SUBSTEPS) as f64;
    let mut n_out = vec![0.0; n_z];
    let mut tau_out = vec![0.0; n_z];
    let (mut n, mut tau) = (n_top, 0.0);
    n_out[n_z - 1] = n;
    for i in (0..n_z - 1).rev() {
        for _ in 0..SUBSTEPS {
            let (a1, b1) = rhs(n, tau);
            let (a2, b2) = rhs(n + 0.5 * dz * a1, tau + 0.5 * dz * b1);
            let (a3, b3) = rhs(n + 0.5 * dz * a2, tau + 0.5 * dz * b2);
            let (a4, b4) = rhs(n + dz * a3, tau + dz * b3);
            n += dz / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4);
            tau += dz / 6.0 * (b1 + 2.0 * b2 + 2.0 * b3 + b4);
        }
        n_out[i] = n;
        tau_out[i] = tau;
    }
    (n_out, tau_out)
}

/// Shoot on `n_s(1)` until the column holds exactly one unit of cells.
pub fn solve_basic_state(params: &SuspensionParams, field: &RadiationField, n_z: usize) -> Result<BasicState> {
    if n_z < 65 {
        return Err(Error::GridMismatch(format!("basic state needs n_z >= 65, got {n_z}")));
    }
    params.validate()?;
    let kappa = params.extinction;
    if (field.kappa() - kappa).abs() > 1e-12 {
        return Err(Error::GridMismatch(format!(
            "radiation field solved for κ = {}, parameters give {kappa}",
            field.kappa()
        )));
    }
    let taxis = params.taxis_function();
    let v = params.swim_speed;
    if taxis.kind == TaxisKind::Zero {
        let tau = (0..n_z).map(|i| kappa * (1.0 - i as f64 / (n_z - 1) as f64)).collect();
        return Ok(assemble(params, field, taxis, vec![1.0; n_z], tau, 1.0));
    }
    let defect = |n_top: f64| -> Result<f64> {
        let (_, tau) = rk4_profile(field, &taxis, v, kappa, n_top, n_z);
        Ok(tau[0] / kappa - 1.0)
    };
    let (lo_scan, hi_scan) = (1e-12, 50.0);
    let grid = logspace(lo_scan, hi_scan, 128);
    let mut prev = (grid[0], defect(grid[0])?);
    let mut bracket = None;
    for &x in &grid[1..] {
        let fx = defect(x)?;
        if fx == 0.0 || fx.signum() != prev.1.signum() {
            bracket = Some((prev.0, x));
            break;
        }
        prev = (x, fx);
    }
    let (a, b) = bracket.ok_or(Error::Bracket {
        what: "basic-state shooting on n_s(1)",
        lo: lo_scan,
        hi: hi_scan,
    })?;
    let n_top = brent(&defect, a, b, 1e-14 * a, "basic-state shooting")?;
    let (n, tau) = rk4_profile(field, &taxis, v, kappa, n_top, n_z);
    let mass = tau[0] / kappa;
    if (mass - 1.0).abs() > SHOOT_TOL {
        return Err(Error::NonConvergence {
            what: "basic-state shooting",
            residual: (mass - 1.0).abs(),
        });
    }
    Ok(assemble(params, field, taxis, n, tau, n_top))
}

/// The uniform suspension `n ≡ 1` with its radiation field, useful as a
/// reference profile.
pub fn uniform_state(params: &SuspensionParams, field: &RadiationField, n_z: usize) -> Result<BasicState> {
    if n_z < 65 {
        return Err(Error::GridMismatch(format!("basic state needs n_z >= 65, got {n_z}")));
    }
    let kappa = params.extinction;
    let tau = (0..n_z).map(|i| kappa * (1.0 - i as f64 / (n_z - 1) as f64)).collect();
    let taxis = params.taxis_function();
    let mut st = assemble(params, field, taxis, vec![1.0; n_z], tau, 1.0);
    // a uniform suspension is not in equilibrium unless T ≡ 0
    st.dn = vec![0.0; n_z];
    Ok(st)
}

fn assemble(
    params: &SuspensionParams,
    field: &RadiationField,
    taxis: TaxisFunction,
    n: Vec<f64>,
    tau: Vec<f64>,
    n_top: f64,
) -> BasicState {
    let n_z = n.len();
    let h = 1.0 / (n_z - 1) as f64;
    let kappa = params.extinction;
    let c = field.cos_theta0;
    let v = params.swim_speed;
    let z: Vec<f64> = (0..n_z).map(|i| i as f64 * h).collect();
    let g_total: Vec<f64> = tau.iter().map(|&t| field.g_total_at(t)).collect();
    let g_coll: Vec<f64> = tau.iter().map(|&t| field.g_coll_at(t)).collect();
    let g_diff: Vec<f64> = g_total.iter().zip(&g_coll).map(|(g, gc)| g - gc).collect();
    let dg_coll = (0..n_z).map(|i| kappa * n[i] / c * g_coll[i]).collect();
    let eps = 1e-9 * kappa;
    let dg_diff = (0..n_z)
        .map(|i| -kappa * n[i] * field.dgdiff_dtau(tau[i].clamp(eps, kappa - eps)))
        .collect();
    let flux = tau.iter().map(|&t| field.flux_at(t)).collect();
    let t: Vec<f64> = g_total.iter().map(|&g| taxis.value(g)).collect();
    let dt_dg = g_total.iter().map(|&g| taxis.slope(g)).collect();
    let d2t_dg2 = g_total.iter().map(|&g| taxis.curvature(g)).collect();
    let dn = (0..n_z).map(|i| v * t[i] * n[i]).collect();
    let mass = tau[0] / kappa;
    let mut st = BasicState {
        params: params.clone(),
        cos_theta0: c,
        field: field.clone(),
        taxis,
        z,
        h,
        n,
        tau,
        g_total,
        g_coll,
        g_diff,
        dg_coll,
        dg_diff,
        flux,
        t,
        dt_dg,
        d2t_dg2,
        dn,
        n_top,
        mass,
        sublayer: Vec::new(),
    };
    st.sublayer = find_sublayer(&st);
    st
}

impl BasicState {
    pub fn n_z(&self) -> usize {
        self.z.len()
    }

    /// `τ(z)` between grid points by cubic interpolation.
    pub fn tau_at(&self, z: f64) -> f64 {
        interp_cubic_uniform(0.0, self.h, &self.tau, z.clamp(0.0, 1.0))
    }

    pub fn g_total_at(&self, z: f64) -> f64 {
        self.field.g_total_at(self.tau_at(z))
    }

    /// Heights of the local maxima of `n_s` (interior maxima and a maximum
    /// pinned at either wall).
    pub fn peaks(&self) -> Vec<f64> {
        let n = &self.n;
        let m = n.len();
        let mut out = Vec::new();
        if n[0] > n[1] {
            out.push(self.z[0]);
        }
        for i in 1..m - 1 {
            if n[i] > n[i - 1] && n[i] >= n[i + 1] {
                out.push(self.z[i]);
            }
        }
        if n[m - 1] > n[m - 2] {
            out.push(self.z[m - 1]);
        }
        out
    }
}

/// Heights where `G_s` crosses the root of the taxis curve, ascending.
pub fn find_sublayer(state: &BasicState) -> Vec<f64> {
    let Some(gc) = state.taxis.root else {
        return Vec::new();
    };
    let f = |z: f64| state.g_total_at(z) - gc;
    let mut out = Vec::new();
    for i in 0..state.n_z() - 1 {
        let (a, b) = (state.g_total[i] - gc, state.g_total[i + 1] - gc);
        if a == 0.0 {
            out.push(state.z[i]);
        } else if a.signum() != b.signum() && b != 0.0 {
            if let Some(r) = bisect(f, state.z[i], state.z[i + 1], 1e-10) {
                out.push(r);
            }
        }
    }
    if *state.g_total.last().unwrap() == gc {
        out.push(1.0);
    }
    out
}
