//! Norm evaluators on collocation grids, the piecewise-linear wall weights, Gevrey mode norms
//! and the half-line interpolation inequality check.

use std::collections::BTreeMap;
use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::grid::HalfLineGrid;
use crate::error::{Error, Result};
use crate::report::EstimateReport;

/// Which wall weight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightKind {
    Rho,
    RhoLambda,
    /// The constant weight 1 (breakpoint 0).
    Unit,
}

/// Piecewise-linear weight rising from 0 at the wall to 1 at `breakpoint`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightSpec {
    pub kind: WeightKind,
    pub breakpoint: f64,
    pub slope: f64,
}

impl WeightSpec {
    /// Weight with slope `(|n|^{γ−2/3}/δ)^{3/2}`.
    pub fn rho(n: i64, gamma: f64, delta: f64) -> WeightSpec {
        let slope = ((n.unsigned_abs() as f64).powf(gamma - 2.0 / 3.0) / delta).powf(1.5);
        WeightSpec { kind: WeightKind::Rho, breakpoint: 1.0 / slope, slope }
    }

    /// Weight with slope `(|n|^{1/3} λ_i)^{3/2}`.
    pub fn rho_lambda(n: i64, lambda_i: f64) -> WeightSpec {
        let slope = ((n.unsigned_abs() as f64).cbrt() * lambda_i).powf(1.5);
        WeightSpec { kind: WeightKind::RhoLambda, breakpoint: 1.0 / slope, slope }
    }

    pub fn unit() -> WeightSpec {
        WeightSpec { kind: WeightKind::Unit, breakpoint: 0.0, slope: f64::INFINITY }
    }

    /// Weight with an explicit breakpoint (slope is its inverse).
    pub fn with_breakpoint(kind: WeightKind, breakpoint: f64) -> WeightSpec {
        WeightSpec { kind, breakpoint, slope: 1.0 / breakpoint }
    }

    pub fn eval(&self, y: f64) -> f64 {
        if self.kind == WeightKind::Unit || y >= self.breakpoint {
            1.0
        } else {
            (y * self.slope).clamp(0.0, 1.0)
        }
    }
}

/// Norm selector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NormKind {
    L2,
    Linf,
    WeightedL2(WeightSpec),
    /// `‖(∂_Y φ, α φ)‖_{L²}` of a stream function.
    H1Pair { alpha: f64 },
}

/// Evaluates a norm of a complex grid function.
pub fn norm(grid: &HalfLineGrid, values: &[Complex64], which: NormKind) -> Result<f64> {
    grid.check_len(values)?;
    Ok(match which {
        NormKind::L2 => l2(grid, values),
        NormKind::Linf => sup_norm(grid, &[values]),
        NormKind::WeightedL2(w) => weighted_l2(grid, values, &w),
        NormKind::H1Pair { alpha } => h1_pair(grid, values, alpha),
    })
}

pub fn l2(grid: &HalfLineGrid, v: &[Complex64]) -> f64 {
    v.iter().zip(&grid.weights).map(|(a, w)| a.norm_sqr() * w).sum::<f64>().max(0.0).sqrt()
}

/// `‖(a, b)‖_{L²}` for a pair of grid functions.
pub fn l2_pair(grid: &HalfLineGrid, a: &[Complex64], b: &[Complex64]) -> f64 {
    (l2(grid, a).powi(2) + l2(grid, b).powi(2)).sqrt()
}

pub fn weighted_l2(grid: &HalfLineGrid, v: &[Complex64], w: &WeightSpec) -> f64 {
    v.iter()
        .zip(&grid.weights)
        .zip(&grid.nodes)
        .map(|((a, q), &y)| w.eval(y) * a.norm_sqr() * q)
        .sum::<f64>()
        .max(0.0)
        .sqrt()
}

pub fn h1_pair(grid: &HalfLineGrid, phi: &[Complex64], alpha: f64) -> f64 {
    let d = grid.dy(phi);
    let ap: Vec<Complex64> = phi.iter().map(|z| z * alpha).collect();
    l2_pair(grid, &d, &ap)
}

/// `‖v‖_{L¹}`.
pub fn l1(grid: &HalfLineGrid, v: &[Complex64]) -> f64 {
    v.iter().zip(&grid.weights).map(|(a, w)| a.norm() * w).sum()
}

/// Supremum of the Euclidean norm of a vector of grid functions, refined by local cubic
/// interpolation between nodes.
pub fn sup_norm(grid: &HalfLineGrid, comps: &[&[Complex64]]) -> f64 {
    let n = grid.n;
    let y = &grid.nodes;
    let at_node = |j: usize| comps.iter().map(|c| c[j].norm_sqr()).sum::<f64>().sqrt();
    let mut best = (0..n).map(at_node).fold(0.0, f64::max);
    const SUB: usize = 8;
    for i in 0..n - 1 {
        // four-point stencil containing [y_i, y_{i+1}]
        let s = if i == 0 { 0 } else if i + 2 >= n { n - 4 } else { i - 1 };
        let ys = [y[s], y[s + 1], y[s + 2], y[s + 3]];
        for k in 1..SUB {
            let t = y[i] + (y[i + 1] - y[i]) * k as f64 / SUB as f64;
            let mut l = [1.0; 4];
            for a in 0..4 {
                for b in 0..4 {
                    if a != b {
                        l[a] *= (t - ys[b]) / (ys[a] - ys[b]);
                    }
                }
            }
            let mut acc = 0.0;
            for c in comps {
                let v: Complex64 = (0..4).map(|a| c[s + a] * l[a]).sum();
                acc += v.norm_sqr();
            }
            best = best.max(acc.sqrt());
        }
    }
    best
}

/// Sup norm of `(∂_Y φ, α φ)`.
pub fn h1_pair_sup(grid: &HalfLineGrid, phi: &[Complex64], alpha: f64) -> f64 {
    let d = grid.dy(phi);
    let ap: Vec<Complex64> = phi.iter().map(|z| z * alpha).collect();
    sup_norm(grid, &[&d, &ap])
}

/// Which Gevrey-type space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GevreyVariant {
    /// `sup_n (1+|n|^d) e^{K|n|^γ} ‖P_n f‖_{L²}`.
    X,
    /// Same weight as `X` applied to `L²_x H¹_y` mode norms supplied by the caller.
    X1,
    /// `sup_n (1+|n|^d) e^{K⟨n⟩^γ} ‖P_n f‖_{L²_x L^∞_y}` with `⟨n⟩ = (1+n²)^{1/2}`.
    Y,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GevreyNormParams {
    pub d: f64,
    pub gamma: f64,
    #[serde(rename = "K")]
    pub k: f64,
    pub variant: GevreyVariant,
}

/// `⟨n⟩ = (1+n²)^{1/2}`.
pub fn japanese(n: i64) -> f64 {
    (1.0 + (n as f64).powi(2)).sqrt()
}

impl GevreyNormParams {
    /// Mode weight for this variant.
    pub fn weight(&self, n: i64) -> f64 {
        let a = n.unsigned_abs() as f64;
        let poly = 1.0 + a.powf(self.d);
        let expo = match self.variant {
            GevreyVariant::X | GevreyVariant::X1 => a.powf(self.gamma),
            GevreyVariant::Y => japanese(n).powf(self.gamma),
        };
        poly * (self.k * expo).exp()
    }
}

/// Supremum over modes of weight times mode norm. An empty map gives 0.
pub fn gevrey_norm(mode_norms: &BTreeMap<i64, f64>, params: &GevreyNormParams) -> f64 {
    mode_norms.iter().map(|(&n, &v)| params.weight(n) * v).fold(0.0, f64::max)
}

/// Checks the half-line interpolation inequality
/// `‖(φ′,αφ)‖_∞ ≤ C(‖ρ^{1/2}w‖^{1/2}‖(φ′,αφ)‖^{1/2} + ‖(1−ρ^{1/2})w‖_{L¹} + |α|^{1/2}‖(φ′,αφ)‖)`
/// for a consistent pair `(∂²−α²)φ = w`, `φ(0) = 0`, and returns the fitted `C`.
pub fn check_interpolation(
    grid: &HalfLineGrid,
    phi: &[Complex64],
    w: &[Complex64],
    rho: &WeightSpec,
    alpha: f64,
) -> Result<EstimateReport> {
    grid.check_len(phi)?;
    grid.check_len(w)?;
    let lap = grid.dyy(phi);
    let n = grid.n;
    let mut res = 0.0f64;
    let mut scale = phi[0].norm();
    for j in 1..n - 1 {
        let r = lap[j] - phi[j] * alpha * alpha - w[j];
        res = res.max(r.norm());
        scale = scale.max(w[j].norm());
    }
    res = res.max(phi[0].norm());
    let tol = 1e-6 * scale.max(1e-300);
    if res > tol && scale > 0.0 {
        return Err(Error::Consistency { what: "(∂²−α²)φ ≠ w or φ(0) ≠ 0".into(), residual: res });
    }
    let lhs = h1_pair_sup(grid, phi, alpha);
    let h1 = h1_pair(grid, phi, alpha);
    let t1 = (weighted_l2(grid, w, rho) * h1).sqrt();
    let one_minus: Vec<Complex64> =
        w.iter().zip(&grid.nodes).map(|(z, &y)| z * (1.0 - rho.eval(y).sqrt())).collect();
    let t2 = l1(grid, &one_minus);
    let t3 = alpha.abs().sqrt() * h1;
    let params = serde_json::json!({
        "alpha": alpha, "rho_breakpoint": rho.breakpoint,
        "term_weighted": t1, "term_l1": t2, "term_alpha": t3,
    });
    Ok(EstimateReport::new("interpolation", lhs, t1 + t2 + t3, params, n))
}

/// Writes a grid function as `Y,Re,Im` CSV rows.
pub fn write_grid_csv<W: Write>(out: &mut W, grid: &HalfLineGrid, v: &[Complex64]) -> Result<()> {
    writeln!(out, "Y,Re,Im")?;
    for (y, z) in grid.nodes.iter().zip(v) {
        writeln!(out, "{y:.17e},{:.17e},{:.17e}", z.re, z.im)?;
    }
    Ok(())
}

/// JSON norm record `{name, value, params}`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct NormRecord {
    pub name: String,
    pub value: f64,
    pub params: serde_json::Value,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::grid::{build_grid, Mapping};

    fn grid(n: usize) -> HalfLineGrid {
        build_grid(n, Mapping::default()).unwrap()
    }

    #[test]
    fn l2_of_exponential() {
        let g = grid(64);
        let v = g.sample_c(|y| Complex64::new((-y).exp(), 0.0));
        let x = norm(&g, &v, NormKind::L2).unwrap();
        assert!((x - 0.5f64.sqrt()).abs() < 1e-9);
        let g2 = grid(128);
        let v2 = g2.sample_c(|y| Complex64::new((-y).exp(), 0.0));
        assert!((norm(&g2, &v2, NormKind::L2).unwrap() - x).abs() < 1e-8);
    }

    #[test]
    fn zero_has_zero_norms() {
        let g = grid(32);
        let z = vec![Complex64::new(0.0, 0.0); 32];
        for k in [
            NormKind::L2,
            NormKind::Linf,
            NormKind::WeightedL2(WeightSpec::rho(10, 0.7, 0.1)),
            NormKind::H1Pair { alpha: 2.0 },
        ] {
            assert_eq!(norm(&g, &z, k).unwrap(), 0.0);
        }
    }

    #[test]
    fn weighted_segment_integral() {
        // ρ(Y) = Y on [0,1]: ∫₀¹ Y dY = 1/2, integrated exactly on a linear grid over [0,1]
        let g = build_grid(33, Mapping::TruncatedChebyshev { length: 1.0 }).unwrap();
        let w = WeightSpec::with_breakpoint(WeightKind::Rho, 1.0);
        let ones = vec![Complex64::new(1.0, 0.0); 33];
        let v = weighted_l2(&g, &ones, &w);
        assert!((v * v - 0.5).abs() < 1e-12);
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let g = grid(32);
        let v = vec![Complex64::new(1.0, 0.0); 31];
        assert!(matches!(norm(&g, &v, NormKind::L2), Err(Error::Shape { .. })));
    }

    #[test]
    fn weights_are_piecewise_linear() {
        let r = WeightSpec::rho(100, 2.0 / 3.0, 0.5);
        assert_eq!(r.eval(0.0), 0.0);
        assert!((r.eval(r.breakpoint) - 1.0).abs() < 1e-15);
        assert_eq!(r.eval(10.0 * r.breakpoint), 1.0);
        assert!((r.eval(0.5 * r.breakpoint) - 0.5).abs() < 1e-12);
        let rl = WeightSpec::rho_lambda(8, 0.5);
        assert!((rl.slope - (2.0f64 * 0.5).powf(1.5)).abs() < 1e-14);
    }

    #[test]
    fn gevrey_examples() {
        let p = GevreyNormParams { d: 1.0, gamma: 2.0 / 3.0, k: 0.5, variant: GevreyVariant::X };
        let mut m = BTreeMap::new();
        m.insert(2, 1.0);
        let v = gevrey_norm(&m, &p);
        let expect = 3.0 * (0.5 * 2f64.powf(2.0 / 3.0)).exp();
        assert!((v - expect).abs() < 1e-12);
        assert!((v - 6.6347).abs() < 1e-3);
        assert_eq!(gevrey_norm(&BTreeMap::new(), &p), 0.0);
        let mut z = BTreeMap::new();
        z.insert(3, 0.0);
        assert_eq!(gevrey_norm(&z, &p), 0.0);
    }

    #[test]
    fn interpolation_closed_form_case() {
        let g = grid(96);
        let phi = g.sample_c(|y| Complex64::new(y * (-y).exp(), 0.0));
        // (∂²−1)(Y e^{−Y}) = −2 e^{−Y}
        let w = g.sample_c(|y| Complex64::new(-2.0 * (-y).exp(), 0.0));
        let r = check_interpolation(&g, &phi, &w, &WeightSpec::unit(), 1.0).unwrap();
        assert!(r.ratio <= 4.0 && r.ratio > 0.0, "{}", r.ratio);
        let zero = vec![Complex64::new(0.0, 0.0); 96];
        let r0 = check_interpolation(&g, &zero, &zero, &WeightSpec::unit(), 1.0).unwrap();
        assert_eq!(r0.lhs, 0.0);
        assert_eq!(r0.ratio, 0.0);
        let bad = g.sample_c(|y| Complex64::new((-y).exp(), 0.0));
        assert!(matches!(
            check_interpolation(&g, &phi, &bad, &WeightSpec::unit(), 1.0),
            Err(Error::Consistency { .. })
        ));
    }
}
