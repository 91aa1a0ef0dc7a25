//! Chebyshev collocation on the half-line.
//!
//! Nodes are Chebyshev–Gauss–Lobatto points `ξ_j = −cos(πj/(N−1))` mapped to `Y ∈ [0, L]`,
//! either through the algebraic map `Y = ℓ(1+ξ)/(1−ξ+2ℓ/L)` (clusters nodes near the wall and
//! reaches far into the tail) or linearly. The last node sits at `Y = L`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Coordinate map from the Chebyshev interval to `[0, L]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Mapping {
    /// `Y = ℓ(1+ξ)/(1−ξ+2ℓ/L)`; half of the nodes lie in `Y < ℓ`.
    Algebraic { ell: f64, length: f64 },
    /// `Y = L(1+ξ)/2`.
    TruncatedChebyshev { length: f64 },
}

impl Default for Mapping {
    fn default() -> Self {
        Mapping::Algebraic { ell: 2.0, length: 40.0 }
    }
}

impl Mapping {
    /// Algebraic map whose far end is pushed out until `e^{−αL} ≤ 10⁻¹⁰`, never below 40.
    pub fn algebraic_for_decay(ell: f64, alpha: f64) -> Mapping {
        let need = if alpha > 0.0 { 23.1 / alpha } else { 40.0 };
        Mapping::Algebraic { ell, length: need.clamp(40.0, 4000.0) }
    }

    pub fn length(&self) -> f64 {
        match *self {
            Mapping::Algebraic { length, .. } | Mapping::TruncatedChebyshev { length } => length,
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Mapping::Algebraic { ell, length } => {
                if !(ell > 0.0) || !(length > 0.0) {
                    return Err(Error::Config(format!(
                        "algebraic map needs positive ell and length, got ell={ell}, length={length}"
                    )));
                }
            }
            Mapping::TruncatedChebyshev { length } => {
                if !(length > 0.0) {
                    return Err(Error::Config(format!("truncated map needs positive length, got {length}")));
                }
            }
        }
        Ok(())
    }

    /// Returns `(Y, dξ/dY, d²ξ/dY²)` at the Chebyshev coordinate `xi`.
    fn eval(&self, xi: f64) -> (f64, f64, f64) {
        match *self {
            Mapping::Algebraic { ell, length } => {
                let eps = 2.0 * ell / length;
                let y = if xi >= 1.0 { length } else { ell * (1.0 + xi) / (1.0 - xi + eps) };
                let s = y + ell;
                let d1 = ell * (2.0 + eps) / (s * s);
                let d2 = -2.0 * ell * (2.0 + eps) / (s * s * s);
                (y, d1, d2)
            }
            Mapping::TruncatedChebyshev { length } => (0.5 * length * (1.0 + xi), 2.0 / length, 0.0),
        }
    }
}

/// Collocation grid with differentiation matrices and quadrature weights.
#[derive(Debug, Clone)]
pub struct HalfLineGrid {
    pub n: usize,
    pub mapping: Mapping,
    /// Ascending nodes, `nodes[0] = 0`, `nodes[n-1] = L`.
    pub nodes: Vec<f64>,
    pub d1: DMatrix<f64>,
    pub d2: DMatrix<f64>,
    pub d4: DMatrix<f64>,
    /// Clenshaw–Curtis weights times the map Jacobian.
    pub weights: Vec<f64>,
    /// 2-norm condition number of the Dirichlet-restricted second-derivative block.
    pub cond_d2: f64,
}

/// Builds the grid. `n ≥ 16` is required.
pub fn build_grid(n: usize, mapping: Mapping) -> Result<HalfLineGrid> {
    if n < 16 {
        return Err(Error::Config(format!("grid needs at least 16 nodes, got {n}")));
    }
    mapping.validate()?;
    let m = n - 1;
    let theta: Vec<f64> = (0..n).map(|j| PI * j as f64 / m as f64).collect();
    let xi: Vec<f64> = theta.iter().map(|t| -t.cos()).collect();

    // Barycentric differentiation on the Chebyshev coordinate, with differences taken in
    // trigonometric form to avoid cancellation near the ends.
    let bw: Vec<f64> = (0..n)
        .map(|j| {
            let s = if j % 2 == 0 { 1.0 } else { -1.0 };
            if j == 0 || j == m {
                0.5 * s
            } else {
                s
            }
        })
        .collect();
    let mut dxi = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        let mut row_sum = 0.0;
        for j in 0..n {
            if i != j {
                let diff = 2.0 * (0.5 * (theta[i] + theta[j])).sin() * (0.5 * (theta[i] - theta[j])).sin();
                let v = (bw[j] / bw[i]) / diff;
                dxi[(i, j)] = v;
                row_sum += v;
            }
        }
        dxi[(i, i)] = -row_sum;
    }
    let dxi2 = &dxi * &dxi;

    let mut nodes = Vec::with_capacity(n);
    let mut p1 = Vec::with_capacity(n);
    let mut p2 = Vec::with_capacity(n);
    for &x in &xi {
        let (y, a, b) = mapping.eval(x);
        nodes.push(y);
        p1.push(a);
        p2.push(b);
    }
    nodes[0] = 0.0;

    let mut d1 = DMatrix::<f64>::zeros(n, n);
    let mut d2 = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            d1[(i, j)] = p1[i] * dxi[(i, j)];
            d2[(i, j)] = p1[i] * p1[i] * dxi2[(i, j)] + p2[i] * dxi[(i, j)];
        }
    }
    let d4 = &d2 * &d2;

    let cc = clenshaw_curtis(m);
    let weights: Vec<f64> = (0..n).map(|j| cc[j] / p1[j]).collect();

    let inner = d2.view((1, 1), (n - 2, n - 2)).into_owned();
    let sv = inner.singular_values();
    let smax = sv.max();
    let smin = sv.min();
    let cond_d2 = if smin > 0.0 { smax / smin } else { f64::INFINITY };

    Ok(HalfLineGrid { n, mapping, nodes, d1, d2, d4, weights, cond_d2 })
}

/// Clenshaw–Curtis weights for the `m+1` Chebyshev–Lobatto points on `[−1, 1]`.
fn clenshaw_curtis(m: usize) -> Vec<f64> {
    let mf = m as f64;
    let mut w = vec![0.0; m + 1];
    let theta: Vec<f64> = (0..=m).map(|k| PI * k as f64 / mf).collect();
    if m % 2 == 0 {
        w[0] = 1.0 / (mf * mf - 1.0);
        w[m] = w[0];
        for k in 1..m {
            let mut v = 1.0;
            for j in 1..m / 2 {
                v -= 2.0 * (2.0 * j as f64 * theta[k]).cos() / (4.0 * (j * j) as f64 - 1.0);
            }
            v -= (mf * theta[k]).cos() / (mf * mf - 1.0);
            w[k] = 2.0 * v / mf;
        }
    } else {
        w[0] = 1.0 / (mf * mf);
        w[m] = w[0];
        for k in 1..m {
            let mut v = 1.0;
            for j in 1..=(m - 1) / 2 {
                v -= 2.0 * (2.0 * j as f64 * theta[k]).cos() / (4.0 * (j * j) as f64 - 1.0);
            }
            w[k] = 2.0 * v / mf;
        }
    }
    w
}

impl HalfLineGrid {
    /// Samples a real function at the nodes.
    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        self.nodes.iter().map(|&y| f(y)).collect()
    }

    /// Samples a complex function at the nodes.
    pub fn sample_c(&self, f: impl Fn(f64) -> Complex64) -> Vec<Complex64> {
        self.nodes.iter().map(|&y| f(y)).collect()
    }

    pub fn dy(&self, v: &[Complex64]) -> Vec<Complex64> {
        apply(&self.d1, v)
    }

    pub fn dyy(&self, v: &[Complex64]) -> Vec<Complex64> {
        apply(&self.d2, v)
    }

    /// `∫₀^L v dY` by the grid quadrature.
    pub fn integrate(&self, v: &[Complex64]) -> Complex64 {
        v.iter().zip(&self.weights).map(|(a, w)| a * w).sum()
    }

    pub fn integrate_real(&self, v: &[f64]) -> f64 {
        v.iter().zip(&self.weights).map(|(a, w)| a * w).sum()
    }

    /// Checks that a grid function has the grid's length.
    pub fn check_len(&self, v: &[Complex64]) -> Result<()> {
        if v.len() != self.n {
            return Err(Error::Shape { expected: self.n, got: v.len() });
        }
        Ok(())
    }

    /// Number of nodes with `Y ≤ y`.
    pub fn nodes_below(&self, y: f64) -> usize {
        self.nodes.iter().filter(|&&x| x <= y).count()
    }
}

/// Real matrix times complex vector.
pub fn apply(m: &DMatrix<f64>, v: &[Complex64]) -> Vec<Complex64> {
    let (r, c) = m.shape();
    assert_eq!(c, v.len(), "matrix/vector length mismatch");
    let mut out = vec![Complex64::new(0.0, 0.0); r];
    for (i, o) in out.iter_mut().enumerate() {
        let mut re = 0.0;
        let mut im = 0.0;
        for (j, x) in v.iter().enumerate() {
            let a = m[(i, j)];
            re += a * x.re;
            im += a * x.im;
        }
        *o = Complex64::new(re, im);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(v: &[f64]) -> Vec<Complex64> {
        v.iter().map(|&x| Complex64::new(x, 0.0)).collect()
    }

    #[test]
    fn derivative_of_exponential() {
        let g = build_grid(64, Mapping::default()).unwrap();
        let v = c(&g.sample(|y| (-y).exp()));
        let dv = g.dy(&v);
        let err = g.nodes.iter().zip(&dv).map(|(y, d)| (d.re + (-y).exp()).abs()).fold(0.0, f64::max);
        assert!(err < 1e-8, "err = {err}");
    }

    #[test]
    fn constant_has_zero_derivative() {
        for n in [16, 64, 128] {
            let g = build_grid(n, Mapping::default()).unwrap();
            let dv = g.dy(&vec![Complex64::new(1.0, 0.0); n]);
            let m = dv.iter().map(|z| z.norm()).fold(0.0, f64::max);
            assert!(m < 1e-10 * n as f64, "n={n}: {m}");
        }
    }

    #[test]
    fn quadrature_of_decaying_exponential() {
        for n in [64, 96, 128] {
            let g = build_grid(n, Mapping::default()).unwrap();
            let q = g.integrate_real(&g.sample(|y| (-2.0 * y).exp()));
            assert!((q - 0.5).abs() < 1e-8, "n={n}: {q}");
        }
        let g = build_grid(64, Mapping::TruncatedChebyshev { length: 40.0 }).unwrap();
        let q = g.integrate_real(&g.sample(|y| (-2.0 * y).exp()));
        assert!((q - 0.5).abs() < 1e-8);
    }

    #[test]
    fn second_derivative_composes() {
        let g = build_grid(96, Mapping::default()).unwrap();
        let v = c(&g.sample(|y| y * y * (-y).exp()));
        let a = g.dyy(&v);
        let b = g.dy(&g.dy(&v));
        let err = a.iter().zip(&b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
        assert!(err < 1e-8, "{err}");
        let exact = g.sample(|y| (2.0 - 4.0 * y + y * y) * (-y).exp());
        let err = a.iter().zip(&exact).map(|(x, y)| (x.re - y).abs()).fold(0.0, f64::max);
        assert!(err < 1e-8, "{err}");
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(build_grid(8, Mapping::default()).is_err());
        assert!(build_grid(32, Mapping::Algebraic { ell: -1.0, length: 40.0 }).is_err());
        assert!(build_grid(32, Mapping::TruncatedChebyshev { length: 0.0 }).is_err());
    }

    #[test]
    fn condition_number_is_reported() {
        let g = build_grid(32, Mapping::default()).unwrap();
        assert!(g.cond_d2.is_finite() && g.cond_d2 > 1.0);
    }
}
