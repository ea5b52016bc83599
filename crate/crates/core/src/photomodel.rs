//! Suspension parameters, refraction at the free surface and the phototaxis
//! response curve.

use crate::error::{Error, Result};
use crate::numerics::bisect;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Which closed-form phototaxis curve to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TaxisKind {
    /// Critical intensity near 1.3 (shading rate 0.252).
    #[serde(rename = "GC13", alias = "gc13")]
    Gc13,
    /// Critical intensity near 1.9 (shading rate 0.135).
    #[serde(rename = "GC19", alias = "gc19")]
    Gc19,
    /// Degenerate `T ≡ 0`; cells do not respond to light.
    #[serde(rename = "zero")]
    Zero,
}

/// Mechanical boundary condition at the top surface.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryKind {
    Rigid,
    StressFree,
}

/// Nondimensional control parameters of a suspension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuspensionParams {
    pub schmidt: f64,
    pub swim_speed: f64,
    pub extinction: f64,
    pub albedo: f64,
    pub diffuse: f64,
    pub collimated: f64,
    /// Angle of incidence above the surface, degrees.
    pub incidence_deg: f64,
    pub refractive_index: f64,
    pub taxis: TaxisKind,
    pub top_bc: BoundaryKind,
}

impl Default for SuspensionParams {
    fn default() -> Self {
        Self {
            schmidt: 20.0,
            swim_speed: 15.0,
            extinction: 0.5,
            albedo: 0.4,
            diffuse: 0.26,
            collimated: 1.0,
            incidence_deg: 0.0,
            refractive_index: 1.333,
            taxis: TaxisKind::Gc13,
            top_bc: BoundaryKind::Rigid,
        }
    }
}

fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}

impl SuspensionParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.schmidt > 0.0) {
            return Err(invalid("schmidt", "must be positive"));
        }
        if !(self.swim_speed > 0.0) {
            return Err(invalid("swim_speed", "must be positive"));
        }
        if !(self.extinction > 0.0) {
            return Err(invalid("extinction", "must be positive"));
        }
        if !(0.0..=1.0).contains(&self.albedo) {
            return Err(invalid("albedo", "must lie in [0, 1]"));
        }
        if !(self.diffuse >= 0.0) {
            return Err(invalid("diffuse", "must be nonnegative"));
        }
        // q_s must stay positive for the perturbed swimming direction
        if !(self.collimated > 0.0) {
            return Err(invalid("collimated", "must be positive"));
        }
        if !(0.0..=80.0).contains(&self.incidence_deg) {
            return Err(invalid("incidence_deg", "must lie in [0, 80] degrees"));
        }
        if !(self.refractive_index > 1.0) {
            return Err(invalid("refractive_index", "must exceed 1"));
        }
        Ok(())
    }

    /// Refracted beam angle θ₀ in radians.
    pub fn theta0(&self) -> Result<f64> {
        refraction_angle(self.incidence_deg, self.refractive_index)
    }

    pub fn cos_theta0(&self) -> Result<f64> {
        Ok(self.theta0()?.cos())
    }

    pub fn taxis_function(&self) -> TaxisFunction {
        TaxisFunction::new(self.taxis)
    }
}

/// Snell refraction of a beam entering water: returns θ₀ in radians.
pub fn refraction_angle(incidence_deg: f64, n0: f64) -> Result<f64> {
    if !(0.0..90.0).contains(&incidence_deg) {
        return Err(Error::Domain(format!(
            "incidence angle must lie in [0, 90) degrees, got {incidence_deg}"
        )));
    }
    if !(n0 > 1.0) {
        return Err(Error::Domain(format!("refractive index must exceed 1, got {n0}")));
    }
    Ok((incidence_deg.to_radians().sin() / n0).asin())
}

/// The phototaxis response `T(G)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaxisFunction {
    pub kind: TaxisKind,
    /// Label used in the literature (1.3 or 1.9).
    pub nominal_gc: f64,
    pub shading_rate: f64,
    /// Actual sign change of `T` on `(0, 3.8)`.
    pub root: Option<f64>,
}

const G_MAX: f64 = 3.8;

impl TaxisFunction {
    pub fn new(kind: TaxisKind) -> Self {
        let (nominal_gc, shading_rate) = match kind {
            TaxisKind::Gc13 => (1.3, 0.252),
            TaxisKind::Gc19 => (1.9, 0.135),
            TaxisKind::Zero => (f64::NAN, 0.0),
        };
        let mut f = Self {
            kind,
            nominal_gc,
            shading_rate,
            root: None,
        };
        if kind != TaxisKind::Zero {
            f.root = f.find_root();
        }
        f
    }

    fn find_root(&self) -> Option<f64> {
        // T > 0 for small G and T(3.8) = -0.9; scan for the first sign change
        let n = 760;
        let mut prev = 1e-9;
        for i in 1..=n {
            let g = G_MAX * i as f64 / n as f64;
            if self.value(g) <= 0.0 {
                return bisect(|x| self.value(x), prev, g, 1e-12);
            }
            prev = g;
        }
        None
    }

    /// `Ξ(G)` and its first two derivatives.
    fn xi(&self, g: f64) -> (f64, f64, f64) {
        let c = self.shading_rate;
        let e = (c * (G_MAX - g)).exp();
        (g / G_MAX * e, e * (1.0 - c * g) / G_MAX, -c * e * (2.0 - c * g) / G_MAX)
    }

    pub fn value(&self, g: f64) -> f64 {
        if self.kind == TaxisKind::Zero {
            return 0.0;
        }
        let (xi, _, _) = self.xi(g);
        0.8 * (1.5 * PI * xi).sin() - 0.1 * (0.5 * PI * xi).sin()
    }

    /// `dT/dG`.
    pub fn slope(&self, g: f64) -> f64 {
        if self.kind == TaxisKind::Zero {
            return 0.0;
        }
        let (xi, dxi, _) = self.xi(g);
        (0.8 * 1.5 * PI * (1.5 * PI * xi).cos() - 0.1 * 0.5 * PI * (0.5 * PI * xi).cos()) * dxi
    }

    /// `d²T/dG²`.
    pub fn curvature(&self, g: f64) -> f64 {
        if self.kind == TaxisKind::Zero {
            return 0.0;
        }
        let (a, b) = (1.5 * PI, 0.5 * PI);
        let (xi, dxi, ddxi) = self.xi(g);
        let first = 0.8 * a * (a * xi).cos() - 0.1 * b * (b * xi).cos();
        let second = -0.8 * a * a * (a * xi).sin() + 0.1 * b * b * (b * xi).sin();
        second * dxi * dxi + first * ddxi
    }
}
