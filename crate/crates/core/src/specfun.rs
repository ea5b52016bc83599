//! Exponential integrals and quadrature rules.
//!
//! `E_n(x) = ∫₁^∞ e^{-xt} t^{-n} dt` is evaluated with a power series for
//! `x ≤ 1` and a modified Lentz continued fraction above that.

use crate::error::{Error, Result};
use num_complex::Complex64;
use std::f64::consts::PI;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
const MAX_ITER: usize = 200;

/// Exponential integral `E_n(x)` for `n ≥ 1`, `x ≥ 0`.
pub fn expn(n: u32, x: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::Domain("expn requires order n >= 1".into()));
    }
    if !(x >= 0.0) {
        return Err(Error::Domain(format!("expn requires x >= 0, got {x}")));
    }
    if x == 0.0 {
        if n == 1 {
            return Err(Error::Domain("E_1 diverges at x = 0".into()));
        }
        return Ok(1.0 / (n - 1) as f64);
    }
    if x > 740.0 {
        return Ok(0.0);
    }
    Ok(if x > 1.0 {
        continued_fraction(n, x)
    } else {
        power_series(n, x)
    })
}

/// `E_n` for a caller that has already checked the domain; panics never,
/// returns `f64::INFINITY` for `E_1(0)`.
#[inline]
pub(crate) fn expn_unchecked(n: u32, x: f64) -> f64 {
    if x == 0.0 {
        return if n == 1 {
            f64::INFINITY
        } else {
            1.0 / (n - 1) as f64
        };
    }
    if x > 740.0 {
        return 0.0;
    }
    if x > 1.0 {
        continued_fraction(n, x)
    } else {
        power_series(n, x)
    }
}

fn continued_fraction(n: u32, x: f64) -> f64 {
    let nf = n as f64;
    let tiny = 1e-300;
    let mut b = x + nf;
    let mut c = 1.0 / tiny;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..=MAX_ITER {
        let an = -(i as f64) * (nf - 1.0 + i as f64);
        b += 2.0;
        d = 1.0 / (an * d + b);
        c = b + an / c;
        let del = c * d;
        h *= del;
        if (del - 1.0).abs() < 1e-16 {
            break;
        }
    }
    h * (-x).exp()
}

fn power_series(n: u32, x: f64) -> f64 {
    let nm1 = (n - 1) as i64;
    let mut ans = if nm1 != 0 {
        1.0 / nm1 as f64
    } else {
        -x.ln() - EULER_GAMMA
    };
    let mut fact = 1.0;
    for i in 1..=MAX_ITER as i64 {
        fact *= -x / i as f64;
        let del = if i != nm1 {
            -fact / (i - nm1) as f64
        } else {
            let psi = -EULER_GAMMA + (1..=nm1).map(|k| 1.0 / k as f64).sum::<f64>();
            fact * (-x.ln() + psi)
        };
        ans += del;
        if del.abs() < ans.abs() * 1e-17 {
            break;
        }
    }
    ans
}

/// `[E_1(x), …, E_{n_max}(x)]`, with `E_1(0) = ∞`.
///
/// For `x ≤ 1` the orders above 2 follow from the upward recurrence
/// `E_{n+1} = (e^{-x} - x E_n)/n`; larger arguments are evaluated directly.
pub(crate) fn expn_ladder(x: f64, n_max: usize) -> [f64; 6] {
    debug_assert!(n_max <= 6);
    let mut out = [0.0; 6];
    out[0] = expn_unchecked(1, x);
    out[1] = expn_unchecked(2, x);
    // upward recurrence loses digits once x exceeds the order
    if x > 1.0 {
        for (k, v) in out.iter_mut().enumerate().take(n_max).skip(2) {
            *v = expn_unchecked(k as u32 + 1, x);
        }
        return out;
    }
    let ex = (-x).exp();
    for k in 2..n_max {
        // out[k] = E_{k+1}
        out[k] = (ex - x * out[k - 1]) / k as f64;
    }
    out
}

/// `m_j(c) = ∫₀¹ y^j e^{-c y} dy` for `j = 0..=3`.
///
/// Power series for `|c| < 2`, upward recurrence `m_j = (j m_{j-1} - e^{-c})/c`
/// otherwise (the amplification `j/|c|` stays below 2 for `j ≤ 3`).
pub fn exp_moments(c: Complex64) -> [Complex64; 4] {
    let mut m = [Complex64::new(0.0, 0.0); 4];
    if c.norm() < 2.0 {
        for (j, mj) in m.iter_mut().enumerate() {
            let mut term = Complex64::new(1.0, 0.0);
            let mut sum = Complex64::new(1.0 / (j + 1) as f64, 0.0);
            for k in 1..40 {
                term *= -c / k as f64;
                let add = term / (j + k + 1) as f64;
                sum += add;
                if add.norm() < 1e-18 * sum.norm() {
                    break;
                }
            }
            *mj = sum;
        }
    } else {
        let e = (-c).exp();
        m[0] = (1.0 - e) / c;
        for j in 1..4 {
            m[j] = (j as f64 * m[j - 1] - e) / c;
        }
    }
    m
}

/// Real-argument version of [`exp_moments`] for the first three moments.
pub fn exp_moments_real(c: f64) -> [f64; 3] {
    let mut m = [0.0; 3];
    if c.abs() < 2.0 {
        for (j, mj) in m.iter_mut().enumerate() {
            let mut term = 1.0;
            let mut sum = 1.0 / (j + 1) as f64;
            for k in 1..40 {
                term *= -c / k as f64;
                let add = term / (j + k + 1) as f64;
                sum += add;
                if add.abs() < 1e-18 * sum.abs() {
                    break;
                }
            }
            *mj = sum;
        }
    } else {
        let e = (-c).exp();
        m[0] = (1.0 - e) / c;
        for j in 1..3 {
            m[j] = (j as f64 * m[j - 1] - e) / c;
        }
    }
    m
}

/// Nodes and weights on an interval.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub interval: (f64, f64),
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }

    /// Concatenate rules on adjacent intervals.
    pub fn concat(parts: &[QuadratureRule]) -> QuadratureRule {
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        for p in parts {
            nodes.extend_from_slice(&p.nodes);
            weights.extend_from_slice(&p.weights);
        }
        let lo = parts.first().map_or(0.0, |p| p.interval.0);
        let hi = parts.last().map_or(0.0, |p| p.interval.1);
        QuadratureRule {
            nodes,
            weights,
            interval: (lo, hi),
        }
    }
}

/// Gauss–Legendre rule with `order` nodes on `[lo, hi]`.
pub fn gauss_rule(order: usize, lo: f64, hi: f64) -> Result<QuadratureRule> {
    if order < 1 {
        return Err(Error::Domain("gauss_rule needs at least one node".into()));
    }
    if !(lo < hi) {
        return Err(Error::Domain(format!("gauss_rule needs lo < hi, got [{lo}, {hi}]")));
    }
    let (x, w) = legendre_nodes(order);
    let half = 0.5 * (hi - lo);
    let mid = 0.5 * (hi + lo);
    Ok(QuadratureRule {
        nodes: x.iter().map(|&t| mid + half * t).collect(),
        weights: w.iter().map(|&v| half * v).collect(),
        interval: (lo, hi),
    })
}

/// Reference Gauss–Legendre nodes (ascending) and weights on `[-1, 1]`.
pub(crate) fn legendre_nodes(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_and_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_and_derivative(n, z);
        dp = if d != 0.0 { d } else { dp };
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

fn legendre_and_derivative(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let nf = n as f64;
    let dp = nf * (z * p1 - p0) / (z * z - 1.0);
    (p1, dp)
}

/// Composite Gauss rule on `[0, 1]` with geometrically graded panels toward
/// `μ = 0`, used for direction cosines so that boundary layers in `e^{-τ/μ}`
/// near grazing incidence are resolved.
pub fn graded_cosine_rule(total_nodes: usize) -> Result<QuadratureRule> {
    if total_nodes < 4 || total_nodes % 4 != 0 {
        return Err(Error::Domain(format!(
            "graded cosine rule needs a positive multiple of 4 nodes, got {total_nodes}"
        )));
    }
    let per = total_nodes / 4;
    let breaks = [0.0, 1e-3, 1e-2, 1e-1, 1.0];
    let parts = breaks
        .windows(2)
        .map(|b| gauss_rule(per, b[0], b[1]))
        .collect::<Result<Vec<_>>>()?;
    Ok(QuadratureRule::concat(&parts))
}

/// Periodic trapezoid rule on `[0, 2π)` with `n` equally spaced nodes.
pub fn azimuth_rule(n: usize) -> Result<QuadratureRule> {
    if n < 2 {
        return Err(Error::Domain("azimuthal rule needs at least 2 nodes".into()));
    }
    let dphi = 2.0 * PI / n as f64;
    Ok(QuadratureRule {
        nodes: (0..n).map(|i| i as f64 * dphi).collect(),
        weights: vec![dphi; n],
        interval: (0.0, 2.0 * PI),
    })
}
