//! Gauss–Legendre rules.

use std::f64::consts::PI;

/// Nodes and weights of the `m`-point Gauss–Legendre rule on `[−1, 1]`, nodes ascending.
pub fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(m > 0, "rule needs at least one node");
    let mut x = vec![0.0; m];
    let mut w = vec![0.0; m];
    for i in 0..(m + 1) / 2 {
        // Tricomi initial guess, refined by Newton on P_m
        let mut z = (PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(m, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(m, z);
        dp = if d != 0.0 { d } else { dp };
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = -z;
        x[m - 1 - i] = z;
        w[i] = wi;
        w[m - 1 - i] = wi;
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
        let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = m as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// `m`-point rule mapped to `[a, b]`.
pub fn gauss_legendre_on(m: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(m);
    let h = 0.5 * (b - a);
    let c = 0.5 * (b + a);
    (x.iter().map(|t| c + h * t).collect(), w.iter().map(|v| v * h).collect())
}
