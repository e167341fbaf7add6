//! One-dimensional Gauss rules.

use std::f64::consts::PI;

/// Gauss–Legendre rule with `m` nodes on `[-1, 1]`, nodes ascending.
///
/// Newton iteration on the Legendre recurrence; weights `2 / ((1 - x^2) P_m'(x)^2)`.
pub fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; m];
    let mut w = vec![0.0; m];
    let half = m.div_ceil(2);
    for i in 0..half {
        let mut z = (PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(m, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() <= 1e-16 * z.abs().max(1.0) {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(m, z);
        if d != 0.0 {
            dp = d;
        }
        x[i] = -z;
        x[m - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[m - 1 - i] = wi;
    }
    if m % 2 == 1 {
        x[m / 2] = 0.0;
    }
    (x, w)
}

fn legendre_with_derivative(m: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    if m == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=m {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = m as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// Gauss–Legendre rule mapped to `[a, b]`.
pub fn gauss_legendre_on(a: f64, b: f64, m: usize) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(m);
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    (
        x.iter().map(|&t| c + h * t).collect(),
        w.iter().map(|&v| h * v).collect(),
    )
}

/// Composite Gauss–Legendre: `panels` equal panels with `m` nodes each.
pub fn composite_gauss_legendre(a: f64, b: f64, panels: usize, m: usize) -> (Vec<f64>, Vec<f64>) {
    let (t, v) = gauss_legendre(m);
    let width = (b - a) / panels as f64;
    let mut xs = Vec::with_capacity(panels * m);
    let mut ws = Vec::with_capacity(panels * m);
    for p in 0..panels {
        let lo = a + p as f64 * width;
        let c = lo + 0.5 * width;
        for (&ti, &vi) in t.iter().zip(&v) {
            xs.push(c + 0.5 * width * ti);
            ws.push(0.5 * width * vi);
        }
    }
    (xs, ws)
}

/// Gauss–Hermite rule with `m` nodes for the weight `exp(-x^2)` on the real line,
/// nodes ascending.
///
/// Newton iteration on the orthonormal Hermite recurrence from the usual
/// asymptotic starting values; weights `2 / H̃_m'(x)^2` stay relatively
/// accurate far into the tails.
pub fn gauss_hermite(m: usize) -> (Vec<f64>, Vec<f64>) {
    let pim4 = PI.powf(-0.25);
    let mut x = vec![0.0; m];
    let mut w = vec![0.0; m];
    let half = m.div_ceil(2);
    let mf = m as f64;
    let mut z = 0.0;
    for i in 0..half {
        z = match i {
            0 => (2.0 * mf + 1.0).sqrt() - 1.85575 * (2.0 * mf + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * mf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * x[0],
            3 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..200 {
            let mut p1 = pim4;
            let mut p2 = 0.0;
            for j in 1..=m {
                let jf = j as f64;
                let p3 = p2;
                p2 = p1;
                p1 = z * (2.0 / jf).sqrt() * p2 - ((jf - 1.0) / jf).sqrt() * p3;
            }
            pp = (2.0 * mf).sqrt() * p2;
            let dz = p1 / pp;
            z -= dz;
            if dz.abs() <= 1e-15 * z.abs().max(1.0) {
                break;
            }
        }
        x[i] = z;
        x[m - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[m - 1 - i] = w[i];
    }
    if m % 2 == 1 {
        x[m / 2] = 0.0;
    }
    x.reverse();
    w.reverse();
    (x, w)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_point_legendre() {
        let (x, w) = gauss_legendre(2);
        let r = 1.0 / 3f64.sqrt();
        assert!((x[0] + r).abs() < 1e-15 && (x[1] - r).abs() < 1e-15);
        assert!((w[0] - 1.0).abs() < 1e-15 && (w[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn legendre_exact_for_degree_2m_minus_1() {
        for m in [1usize, 3, 8, 40, 401] {
            let (x, w) = gauss_legendre(m);
            for k in 0..(2 * m) {
                let q: f64 = x
                    .iter()
                    .zip(&w)
                    .map(|(&xi, &wi)| wi * xi.powi(k as i32))
                    .sum();
                let exact = if k % 2 == 1 {
                    0.0
                } else {
                    2.0 / (k as f64 + 1.0)
                };
                assert!((q - exact).abs() < 1e-12, "m={m} k={k} q={q}");
            }
        }
    }

    #[test]
    fn hermite_moments() {
        // ∫ x^{2k} e^{-x^2} = Γ(k + 1/2)
        for m in [1usize, 2, 5, 20, 160] {
            let (x, w) = gauss_hermite(m);
            for k in 0..m.min(40) {
                let q: f64 = x
                    .iter()
                    .zip(&w)
                    .map(|(&xi, &wi)| wi * xi.powi(2 * k as i32))
                    .sum();
                let exact = statrs::function::gamma::gamma(k as f64 + 0.5);
                assert!(((q - exact) / exact).abs() < 1e-11, "m={m} k={k}");
            }
            assert!(x.windows(2).all(|p| p[0] < p[1]));
        }
    }
}
