//! Finite-difference stencils, scalar root finding and small interpolation
//! helpers shared by the solvers.

use crate::error::{Error, Result};
use faer::Mat;

/// Fornberg's algorithm: weights `c[m][j]` of the `m`-th derivative at `x0`
/// from samples at `xs[j]`, for `m = 0..=max_deriv`.
pub fn fornberg_weights(x0: f64, xs: &[f64], max_deriv: usize) -> Vec<Vec<f64>> {
    let n = xs.len();
    let mut c = vec![vec![0.0; n]; max_deriv + 1];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    let mut c4 = xs[0] - x0;
    for i in 1..n {
        let mn = i.min(max_deriv);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = xs[i] - x0;
        for j in 0..i {
            let c3 = xs[i] - xs[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c
}

/// Dense fourth-order differentiation matrices `D¹..D⁴` on a uniform grid.
///
/// Interior rows use centred stencils (5 points for `D¹`, `D²`; 7 points for
/// `D³`, `D⁴`); rows too close to a wall use the nearest window of `m + 4`
/// points, which keeps the truncation error at fourth order.
#[derive(Debug, Clone)]
pub struct DiffMatrices {
    pub z: Vec<f64>,
    pub h: f64,
    pub d: [Mat<f64>; 4],
}

impl DiffMatrices {
    pub fn uniform(n: usize, lo: f64, hi: f64) -> Result<Self> {
        if n < 9 {
            return Err(Error::GridMismatch(format!(
                "need at least 9 grid points for fourth-order stencils, got {n}"
            )));
        }
        let h = (hi - lo) / (n - 1) as f64;
        let z: Vec<f64> = (0..n).map(|i| lo + h * i as f64).collect();
        let d = [1usize, 2, 3, 4].map(|m| {
            let mut mat = Mat::<f64>::zeros(n, n);
            let width = if m <= 2 { 5 } else { 7 };
            let half = width / 2;
            let one_sided = m + 4;
            for i in 0..n {
                let (start, len) = if i >= half && i + half < n {
                    (i - half, width)
                } else {
                    let s = i.saturating_sub(one_sided / 2).min(n - one_sided);
                    (s, one_sided)
                };
                // stencils in units of h for conditioning
                let xs: Vec<f64> = (start..start + len).map(|j| j as f64 - i as f64).collect();
                let w = fornberg_weights(0.0, &xs, m);
                let scale = h.powi(m as i32);
                for (jj, &wj) in w[m].iter().enumerate() {
                    mat[(i, start + jj)] = wj / scale;
                }
            }
            mat
        });
        Ok(Self { z, h, d })
    }

    pub fn n(&self) -> usize {
        self.z.len()
    }

    /// Apply `D^m` to a real vector.
    pub fn apply(&self, m: usize, f: &[f64]) -> Vec<f64> {
        let mat = &self.d[m - 1];
        (0..f.len())
            .map(|i| (0..f.len()).map(|j| mat[(i, j)] * f[j]).sum())
            .collect()
    }
}

/// Cumulative integral `∫_{x_0}^{x_i} f` on a uniform grid, fourth order.
///
/// Each cell integrates the cubic through the four nearest samples.
pub fn cumulative_integral(f: &[f64], h: f64) -> Vec<f64> {
    let n = f.len();
    let mut out = vec![0.0; n];
    if n < 2 {
        return out;
    }
    if n < 4 {
        for i in 1..n {
            out[i] = out[i - 1] + 0.5 * h * (f[i - 1] + f[i]);
        }
        return out;
    }
    for i in 0..n - 1 {
        let cell = if i == 0 {
            (9.0 * f[0] + 19.0 * f[1] - 5.0 * f[2] + f[3]) / 24.0
        } else if i == n - 2 {
            (9.0 * f[n - 1] + 19.0 * f[n - 2] - 5.0 * f[n - 3] + f[n - 4]) / 24.0
        } else {
            (-f[i - 1] + 13.0 * f[i] + 13.0 * f[i + 1] - f[i + 2]) / 24.0
        };
        out[i + 1] = out[i] + h * cell;
    }
    out
}

/// Brent's method for a root of `f` in `[a, b]`; `f(a)` and `f(b)` must
/// differ in sign.
pub fn brent<F: FnMut(f64) -> Result<f64>>(
    mut f: F,
    a: f64,
    b: f64,
    xtol: f64,
    what: &'static str,
) -> Result<f64> {
    let fa = f(a)?;
    let fb = f(b)?;
    brent_with_values(&mut f, a, fa, b, fb, xtol, what)
}

/// As [`brent`], reusing already computed end values.
pub fn brent_with_values<F: FnMut(f64) -> Result<f64>>(
    f: &mut F,
    mut a: f64,
    mut fa: f64,
    mut b: f64,
    mut fb: f64,
    xtol: f64,
    what: &'static str,
) -> Result<f64> {
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::Bracket { what, lo: a, hi: b });
    }
    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut e = d;
    for _ in 0..200 {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol = 2.0 * f64::EPSILON * b.abs() + 0.5 * xtol;
        let m = 0.5 * (c - b);
        if m.abs() <= tol || fb == 0.0 {
            return Ok(b);
        }
        if e.abs() >= tol && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * m * s;
                q = 1.0 - s;
            } else {
                let qa = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * m * qa * (qa - r) - (b - a) * (r - 1.0));
                q = (qa - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * m * q - (tol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = m;
            }
        } else {
            d = m;
            e = m;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol { d } else { tol.copysign(m) };
        fb = f(b)?;
    }
    Err(Error::NonConvergence {
        what,
        residual: fb.abs(),
    })
}

/// Bisection to absolute tolerance `xtol`.
pub fn bisect<F: FnMut(f64) -> f64>(mut f: F, mut a: f64, mut b: f64, xtol: f64) -> Option<f64> {
    let mut fa = f(a);
    let fb = f(b);
    if fa == 0.0 {
        return Some(a);
    }
    if fb == 0.0 {
        return Some(b);
    }
    if fa.signum() == fb.signum() {
        return None;
    }
    while (b - a).abs() > xtol {
        let m = 0.5 * (a + b);
        let fm = f(m);
        if fm == 0.0 {
            return Some(m);
        }
        if fm.signum() == fa.signum() {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    Some(0.5 * (a + b))
}

/// Golden-section search for a minimum of `f` on `[a, b]`.
/// Returns `(x_min, f(x_min))`.
pub fn golden_section<F: FnMut(f64) -> Result<f64>>(
    mut f: F,
    mut a: f64,
    mut b: f64,
    xtol: f64,
) -> Result<(f64, f64)> {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = b - g * (b - a);
    let mut x2 = a + g * (b - a);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    while (b - a).abs() > xtol {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = f(x1)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = f(x2)?;
        }
    }
    Ok(if f1 <= f2 { (x1, f1) } else { (x2, f2) })
}

/// Cubic Lagrange interpolation of uniformly sampled data at `x`.
pub fn interp_cubic_uniform(lo: f64, h: f64, f: &[f64], x: f64) -> f64 {
    let n = f.len();
    let s = (x - lo) / h;
    let i = (s.floor() as isize - 1).clamp(0, n as isize - 4) as usize;
    let t = s - i as f64;
    let l0 = -(t - 1.0) * (t - 2.0) * (t - 3.0) / 6.0;
    let l1 = t * (t - 2.0) * (t - 3.0) / 2.0;
    let l2 = -t * (t - 1.0) * (t - 3.0) / 2.0;
    let l3 = t * (t - 1.0) * (t - 2.0) / 6.0;
    l0 * f[i] + l1 * f[i + 1] + l2 * f[i + 2] + l3 * f[i + 3]
}

/// Evenly spaced samples, endpoints included.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let h = (hi - lo) / (n - 1) as f64;
    (0..n).map(|i| lo + h * i as f64).collect()
}

/// Logarithmically spaced samples, endpoints included.
pub fn logspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    linspace(lo.ln(), hi.ln(), n).into_iter().map(f64::exp).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fornberg_reproduces_classic_stencils() {
        let w = fornberg_weights(0.0, &[-2.0, -1.0, 0.0, 1.0, 2.0], 2);
        let d1 = [1.0 / 12.0, -2.0 / 3.0, 0.0, 2.0 / 3.0, -1.0 / 12.0];
        let d2 = [-1.0 / 12.0, 4.0 / 3.0, -5.0 / 2.0, 4.0 / 3.0, -1.0 / 12.0];
        for j in 0..5 {
            assert!((w[1][j] - d1[j]).abs() < 1e-14);
            assert!((w[2][j] - d2[j]).abs() < 1e-14);
        }
    }

    fn max_err(n: usize, m: usize, q: f64) -> f64 {
        let dm = DiffMatrices::uniform(n, 0.0, 1.0).unwrap();
        let f: Vec<f64> = dm.z.iter().map(|&z| (q * z).exp()).collect();
        let g = dm.apply(m, &f);
        dm.z
            .iter()
            .zip(&g)
            .map(|(&z, &v)| (v - q.powi(m as i32) * (q * z).exp()).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn stencils_are_fourth_order() {
        for m in 1..=4 {
            let e1 = max_err(101, m, 5.0);
            let e2 = max_err(201, m, 5.0);
            let rate = (e1 / e2).log2();
            assert!(rate >= 3.7, "D{m}: rate {rate}");
        }
    }

    #[test]
    fn cumulative_integral_is_fourth_order() {
        let err = |n: usize| {
            let h = 1.0 / (n - 1) as f64;
            let f: Vec<f64> = (0..n).map(|i| (3.0 * i as f64 * h).cos()).collect();
            let c = cumulative_integral(&f, h);
            (0..n)
                .map(|i| (c[i] - (3.0 * i as f64 * h).sin() / 3.0).abs())
                .fold(0.0, f64::max)
        };
        let rate = (err(51) / err(101)).log2();
        assert!(rate > 3.7, "rate {rate}");
    }

    #[test]
    fn brent_and_golden() {
        let r = brent(|x| Ok(x * x - 2.0), 0.0, 2.0, 1e-14, "sqrt2").unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-12);
        assert!(brent(|x| Ok(x * x + 1.0), 0.0, 2.0, 1e-14, "none").is_err());
        let (x, fx) = golden_section(|x| Ok((x - 0.3).powi(2) + 1.0), 0.0, 1.0, 1e-9).unwrap();
        assert!((x - 0.3).abs() < 1e-7 && (fx - 1.0).abs() < 1e-14);
        let b = bisect(|x| x.cos(), 0.0, 3.0, 1e-12).unwrap();
        assert!((b - std::f64::consts::FRAC_PI_2).abs() < 1e-11);
    }

    #[test]
    fn cubic_interpolation_is_exact_for_cubics() {
        let h = 0.1;
        let f: Vec<f64> = (0..11).map(|i| (i as f64 * h).powi(3) - i as f64 * h).collect();
        for &x in &[0.0, 0.03, 0.47, 0.99, 1.0] {
            let v = interp_cubic_uniform(0.0, h, &f, x);
            assert!((v - (x * x * x - x)).abs() < 1e-13);
        }
    }
}
