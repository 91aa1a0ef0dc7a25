//! The mode semigroup `e^{−τ𝕃}` in rescaled variables `(X, Y, τ) = (x, y, t)/ν^{1/2}`.
//!
//! Three independent evaluations are provided:
//! - contour quadrature of `e^{τμ}(μ + 𝕃)⁻¹` over the five-piece curve Γ, using the
//!   Orr–Sommerfeld collocation operator of [`crate::ossolve`] for each resolvent solve;
//! - the dense matrix exponential of the discrete generator;
//! - IMEX time stepping (Crank–Nicolson diffusion, Adams–Bashforth advection) with
//!   Richardson extrapolation.
//!
//! The generator acts on interior vorticity values. The stream function is recovered from
//! them with `φ(0) = φ(L) = 0`, vorticity vanishes at the far end, and the wall vorticity is
//! the multiplier that keeps `∂_Yφ(0) = 0` (the pressure projection of the velocity form).

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::numerics::grid::HalfLineGrid;
use crate::numerics::linalg::{matvec, CMat, Factored};
use crate::numerics::norms::{l2, l2_pair, sup_norm, weighted_l2, WeightSpec};
use crate::numerics::quadrature::gauss_legendre;
use crate::numerics::random::{mix_seed, smooth_draw};
use crate::ossolve::{Boundary, ModeContext, OsOperator, OsVariant, ProfileSamples};
use crate::profiles::ShearProfile;
use crate::report::EstimateReport;
use crate::resolvent::{classify_with, gradient_norm, FrequencyRegime};

type C = Complex64;

const I: C = C { re: 0.0, im: 1.0 };
const ZERO: C = C { re: 0.0, im: 0.0 };

pub use crate::resolvent::DEFAULT_THETA;

/// Largest node count for which the dense exponential is allowed.
pub const EXPM_MAX_NODES: usize = 96;
/// Gauss–Legendre points per contour panel.
pub const PANEL_NODES: usize = 16;
/// Bound on the discarded tail of `e^{τ Re μ}/|μ|` along Γ±.
pub const TAIL_TOL: f64 = 1e-12;
/// Largest `τρ₀` accepted by the contour route; beyond it `e^{τρ₀}` cancellation on l₀
/// would eat more than eight digits.
pub const MAX_CANCELLATION_EXPONENT: f64 = 18.0;
/// Upper bound on the total number of contour nodes.
pub const MAX_CONTOUR_NODES: usize = 40_000;

/// Length scales of the random initial data.
const DATA_SCALES: (f64, f64) = (0.2, 1.0);

/// A velocity Fourier mode `(u₁, u₂)` sampled on the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityMode {
    pub u1: Vec<C>,
    pub u2: Vec<C>,
}

impl VelocityMode {
    pub fn zeros(n: usize) -> VelocityMode {
        VelocityMode { u1: vec![ZERO; n], u2: vec![ZERO; n] }
    }

    /// `(−∂_Yφ, iαφ)` with the signed wavenumber `α = ν^{1/2} n`.
    pub fn from_stream(grid: &HalfLineGrid, alpha_signed: f64, phi: &[C]) -> VelocityMode {
        let d = grid.dy(phi);
        VelocityMode {
            u1: d.iter().map(|z| -z).collect(),
            u2: phi.iter().map(|z| I * alpha_signed * z).collect(),
        }
    }

    pub fn conj(&self) -> VelocityMode {
        VelocityMode {
            u1: self.u1.iter().map(|z| z.conj()).collect(),
            u2: self.u2.iter().map(|z| z.conj()).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.u1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u1.is_empty()
    }

    /// `‖(u₁, u₂)‖_{L²_Y}`.
    pub fn l2(&self, grid: &HalfLineGrid) -> f64 {
        l2_pair(grid, &self.u1, &self.u2)
    }

    /// `sup_Y |(u₁, u₂)|`.
    pub fn sup(&self, grid: &HalfLineGrid) -> f64 {
        sup_norm(grid, &[&self.u1, &self.u2])
    }

    /// `‖∂_Y(u₁, u₂)‖_{L²_Y}`.
    pub fn dy_l2(&self, grid: &HalfLineGrid) -> f64 {
        l2_pair(grid, &grid.dy(&self.u1), &grid.dy(&self.u2))
    }

    /// Relative size of the divergence `iαu₁ + ∂_Y u₂` and of the wall trace.
    pub fn constraint_defect(&self, grid: &HalfLineGrid, alpha_signed: f64) -> f64 {
        let d2 = grid.dy(&self.u2);
        let div: Vec<C> = self.u1.iter().zip(&d2).map(|(a, b)| I * alpha_signed * a + b).collect();
        let scale = self.l2(grid).max(1e-300);
        let wall = (self.u1[0].norm_sqr() + self.u2[0].norm_sqr()).sqrt();
        (l2(grid, &div) / scale).max(wall / self.sup(grid).max(1e-300))
    }

    pub fn max_abs_diff(&self, other: &VelocityMode) -> f64 {
        self.u1
            .iter()
            .zip(&other.u1)
            .chain(self.u2.iter().zip(&other.u2))
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// `‖self − other‖_{L²} / ‖other‖_{L²}`.
    pub fn rel_l2_diff(&self, other: &VelocityMode, grid: &HalfLineGrid) -> f64 {
        let d1: Vec<C> = self.u1.iter().zip(&other.u1).map(|(a, b)| a - b).collect();
        let d2: Vec<C> = self.u2.iter().zip(&other.u2).map(|(a, b)| a - b).collect();
        l2_pair(grid, &d1, &d2) / other.l2(grid).max(1e-300)
    }
}

/// Evaluation route for the semigroup.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SemigroupMethod {
    Contour,
    Expm,
    Timestep,
}

impl std::str::FromStr for SemigroupMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "contour" => Ok(SemigroupMethod::Contour),
            "expm" => Ok(SemigroupMethod::Expm),
            "timestep" => Ok(SemigroupMethod::Timestep),
            _ => Err(Error::Config(format!("unknown semigroup method `{s}` (contour, expm, timestep)"))),
        }
    }
}

/// The five pieces of Γ in orientation order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SegmentKind {
    /// Ray from `∞e^{−iθ}` into `−ic`.
    GammaMinus,
    /// Horizontal piece `(0, −c) → (ρ₀, −c)`.
    LMinus,
    /// Vertical piece on `Re μ = ρ₀`.
    LZero,
    /// Horizontal piece `(ρ₀, c) → (0, c)`.
    LPlus,
    /// Ray from `ic` out along `e^{iθ}`.
    GammaPlus,
}

/// Minimum panel counts per segment; more panels are added when the phase of `e^{τμ}`
/// requires it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeCounts {
    pub gamma: usize,
    pub l: usize,
    pub l0: usize,
}

impl Default for NodeCounts {
    fn default() -> Self {
        NodeCounts { gamma: 8, l: 2, l0: 8 }
    }
}

impl NodeCounts {
    /// Every count multiplied by `k`.
    pub fn scaled(&self, k: usize) -> NodeCounts {
        NodeCounts { gamma: self.gamma * k, l: self.l * k, l0: self.l0 * k }
    }
}

/// One straight piece of Γ with quadrature nodes and the weights `dμ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContourSegment {
    pub kind: SegmentKind,
    pub start: C,
    pub end: C,
    pub nodes: Vec<C>,
    pub weights: Vec<C>,
}

/// The curve Γ for one mode and one time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContourSpec {
    pub theta: f64,
    pub tau: f64,
    /// `|n|^γν^{1/2}/δ`, the abscissa of l₀.
    pub rho0: f64,
    /// `δ₁⁻¹(ν^{1/2}|n| + |tan θ||n|^γν^{1/2})`, the height of l±.
    pub height: f64,
    /// Largest `|Re μ|` reached on Γ±.
    pub truncation: f64,
    /// Panel counts actually used.
    pub node_counts: NodeCounts,
    pub segments: Vec<ContourSegment>,
}

impl ContourSpec {
    /// Largest distance between the end of one segment and the start of the next.
    pub fn max_gap(&self) -> f64 {
        self.segments.windows(2).map(|s| (s[0].end - s[1].start).norm()).fold(0.0, f64::max)
    }

    pub fn total_nodes(&self) -> usize {
        self.segments.iter().map(|s| s.nodes.len()).sum()
    }

    pub fn segment(&self, kind: SegmentKind) -> &ContourSegment {
        self.segments.iter().find(|s| s.kind == kind).expect("every kind is present")
    }
}

fn panels_on(kind: SegmentKind, start: C, end: C, panels: usize) -> ContourSegment {
    let (x, w) = gauss_legendre(PANEL_NODES);
    let mut nodes = Vec::with_capacity(panels * PANEL_NODES);
    let mut weights = Vec::with_capacity(panels * PANEL_NODES);
    let step = (end - start) / panels as f64;
    for p in 0..panels {
        let a = start + step * p as f64;
        for (xi, wi) in x.iter().zip(&w) {
            nodes.push(a + step * (0.5 * (xi + 1.0)));
            weights.push(step * (0.5 * wi));
        }
    }
    ContourSegment { kind, start, end, nodes, weights }
}

/// Panels so that the phase of `e^{τμ}` turns by at most this much across one panel.
const PHASE_PER_PANEL: f64 = 6.0;
/// Panels so that `|e^{τμ}|` changes by at most this factor (in log) across one panel.
const DECAY_PER_PANEL: f64 = 8.0;

fn required_panels(min: usize, phase: f64, decay: f64) -> usize {
    min.max((phase / PHASE_PER_PANEL).ceil() as usize).max((decay / DECAY_PER_PANEL).ceil() as usize).max(1)
}

/// Builds Γ for the mode of `ctx` and the time `τ`.
///
/// The rays Γ± are cut where the tail bound `e^{τ cos θ s}/(τ|cos θ| c)` drops below
/// [`TAIL_TOL`]; `c` is the height of l±.
pub fn build_contour(ctx: &ModeContext, theta: f64, node_counts: NodeCounts, tau: f64) -> Result<ContourSpec> {
    build_contour_with(ctx, theta, node_counts, tau, 1.0)
}

/// [`build_contour`] with the rays Γ± stretched by `ray_factor` beyond the tail cut.
pub fn build_contour_with(
    ctx: &ModeContext,
    theta: f64,
    node_counts: NodeCounts,
    tau: f64,
    ray_factor: f64,
) -> Result<ContourSpec> {
    if !(ray_factor > 0.0) {
        return Err(Error::Config(format!("ray factor must be positive, got {ray_factor}")));
    }
    if !(theta > PI / 2.0 && theta < PI) {
        return Err(Error::Config(format!("theta must lie in (π/2, π), got {theta}")));
    }
    let na = ctx.n.unsigned_abs() as f64;
    let regime = classify_with(ctx.delta_family.delta0, ctx.nu, ctx.n, ctx.gamma);
    if !regime.is_middle() {
        return Err(Error::Hypothesis(format!(
            "contour quadrature needs a middle-regime mode, n = {} is {:?}",
            ctx.n, regime
        )));
    }
    let sq = ctx.nu.sqrt();
    let threshold = 1.0 / (sq * na);
    if !(tau >= threshold * (1.0 - 1e-12)) {
        return Err(Error::Method(format!(
            "contour quadrature needs τ ≥ (ν^{{1/2}}|n|)⁻¹ = {threshold:.4e}, got τ = {tau:.4e}; use the expm or timestep method"
        )));
    }
    let rho0 = ctx.remu_threshold();
    if tau * rho0 > MAX_CANCELLATION_EXPONENT {
        return Err(Error::Method(format!(
            "τρ₀ = {:.2} exceeds {MAX_CANCELLATION_EXPONENT}: cancellation of e^{{τρ₀}} on l₀ would swamp the result; \
             increase δ or use the expm or timestep method",
            tau * rho0
        )));
    }
    let height = (sq * na + theta.tan().abs() * na.powf(ctx.gamma) * sq) / ctx.delta_family.delta1;
    let (sin_t, cos_t) = theta.sin_cos();
    let kappa = tau * cos_t.abs();
    let ray = ray_factor * ((1.0 / (TAIL_TOL * kappa * height)).ln() / kappa).max(0.0);
    let truncation = ray * cos_t.abs();

    let gamma_panels = required_panels(node_counts.gamma, tau * ray * sin_t, kappa * ray);
    let l_panels = required_panels(node_counts.l, 0.0, tau * rho0);
    let l0_panels = required_panels(node_counts.l0, tau * 2.0 * height, 0.0);
    let total = PANEL_NODES * (2 * gamma_panels + 2 * l_panels + l0_panels);
    if total > MAX_CONTOUR_NODES {
        return Err(Error::Method(format!(
            "τ = {tau:.4e} too small for the truncation bound: Γ would need {total} nodes (limit \
             {MAX_CONTOUR_NODES}); request a larger τ or raise the node budget"
        )));
    }

    let ci = I * height;
    let far_plus = ci + C::from_polar(ray, theta);
    let far_minus = -ci + C::from_polar(ray, -theta);
    let segments = vec![
        panels_on(SegmentKind::GammaMinus, far_minus, -ci, gamma_panels),
        panels_on(SegmentKind::LMinus, -ci, rho0 - ci, l_panels),
        panels_on(SegmentKind::LZero, rho0 - ci, rho0 + ci, l0_panels),
        panels_on(SegmentKind::LPlus, rho0 + ci, ci, l_panels),
        panels_on(SegmentKind::GammaPlus, ci, far_plus, gamma_panels),
    ];
    Ok(ContourSpec {
        theta,
        tau,
        rho0,
        height,
        truncation,
        node_counts: NodeCounts { gamma: gamma_panels, l: l_panels, l0: l0_panels },
        segments,
    })
}

/// Discrete generator `−𝕃` of one mode (`n > 0`) on interior vorticity values.
pub struct ModeGenerator {
    pub nu: f64,
    pub alpha: f64,
    n_nodes: usize,
    /// Interior vorticity to stream function on the full grid.
    phi_map: CMat,
    /// `∂_Yφ(0)` as a functional of interior vorticity.
    wall_functional: Vec<C>,
    /// Coefficient column of the wall vorticity in the interior vorticity equation.
    wall_column: Vec<C>,
    a_diff: CMat,
    a_adv: CMat,
}

impl ModeGenerator {
    /// Assembles the generator for `α = ν^{1/2}|n|` and the given profile samples.
    pub fn new(samples: &ProfileSamples, nu: f64, n: i64, grid: &HalfLineGrid) -> Result<ModeGenerator> {
        if !(nu > 0.0) {
            return Err(Error::Config(format!("viscosity must be positive, got {nu}")));
        }
        if n == 0 {
            return Err(Error::Config("mode n = 0 carries no stream-function dynamics".into()));
        }
        let nn = grid.n;
        for s in [&samples.v, &samples.vp, &samples.vpp] {
            if s.len() != nn {
                return Err(Error::Shape { expected: nn, got: s.len() });
            }
        }
        let m = nn - 2;
        let sq = nu.sqrt();
        let alpha = sq * n.unsigned_abs() as f64;
        let a2 = alpha * alpha;

        // (D2 − α²)φ = w in the interior, φ(0) = φ(L) = 0
        let mut k = DMatrix::<f64>::zeros(nn, nn);
        for i in 1..nn - 1 {
            for j in 0..nn {
                k[(i, j)] = grid.d2[(i, j)];
            }
            k[(i, i)] -= a2;
        }
        k[(0, 0)] = 1.0;
        k[(nn - 1, nn - 1)] = 1.0;
        let mut e = DMatrix::<f64>::zeros(nn, m);
        for j in 0..m {
            e[(j + 1, j)] = 1.0;
        }
        let lu = k.lu();
        let phi_real = lu
            .solve(&e)
            .ok_or_else(|| Error::Domain("stream-function Laplacian is singular on this grid".into()))?;
        let phi_map = phi_real.map(|x| C::new(x, 0.0));
        let wall_functional: Vec<C> =
            (0..m).map(|j| C::new((0..nn).map(|r| grid.d1[(0, r)] * phi_real[(r, j)]).sum(), 0.0)).collect();
        let wall_column: Vec<C> = (0..m).map(|i| C::new(sq * grid.d2[(i + 1, 0)], 0.0)).collect();

        let mut a_diff = CMat::zeros(m, m);
        let mut a_adv = CMat::zeros(m, m);
        for i in 0..m {
            for j in 0..m {
                a_diff[(i, j)] = C::new(sq * grid.d2[(i + 1, j + 1)], 0.0);
                a_adv[(i, j)] = I * alpha * samples.vpp[i + 1] * phi_map[(i + 1, j)];
            }
            a_diff[(i, i)] -= sq * a2;
            a_adv[(i, i)] -= I * alpha * samples.v[i + 1];
        }
        let gen = ModeGenerator { nu, alpha, n_nodes: nn, phi_map, wall_functional, wall_column, a_diff, a_adv };
        let cb = gen.influence();
        if !(cb.norm() > 0.0) || !cb.norm().is_finite() {
            return Err(Error::Domain("wall vorticity does not control the wall slip on this grid".into()));
        }
        Ok(gen)
    }

    /// The Stokes generator (`V ≡ 0`).
    pub fn stokes(nu: f64, n: i64, grid: &HalfLineGrid) -> Result<ModeGenerator> {
        let z = vec![0.0; grid.n];
        ModeGenerator::new(&ProfileSamples { v: z.clone(), vp: z.clone(), vpp: z }, nu, n, grid)
    }

    fn influence(&self) -> C {
        self.wall_functional.iter().zip(&self.wall_column).map(|(c, b)| c * b).sum()
    }

    pub fn interior_len(&self) -> usize {
        self.n_nodes - 2
    }

    /// Interior vorticity of a velocity mode (with `α > 0`).
    ///
    /// Discretely solenoidal data (`u₁ = −∂_Y(u₂/iα)` at the nodes) are read through their
    /// stream function `u₂/(iα)`, so that velocity round trips are exact; other data go
    /// through the curl `−∂_Y u₁ + iαu₂`, which drops their gradient part.
    pub fn state_from_velocity(&self, grid: &HalfLineGrid, f: &VelocityMode) -> Result<Vec<C>> {
        grid.check_len(&f.u1)?;
        grid.check_len(&f.u2)?;
        let phi: Vec<C> = f.u2.iter().map(|z| z / (I * self.alpha)).collect();
        let dphi = grid.dy(&phi);
        let scale = f.u1.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let mismatch = f.u1.iter().zip(&dphi).map(|(a, b)| (a + b).norm()).fold(0.0, f64::max);
        if mismatch <= 1e-10 * scale {
            let d2 = grid.dyy(&phi);
            return Ok((1..self.n_nodes - 1).map(|i| d2[i] - phi[i] * self.alpha * self.alpha).collect());
        }
        Ok(self.curl(grid, f))
    }

    /// Interior values of the curl `−∂_Y u₁ + iαu₂` (with `α > 0`).
    pub fn curl(&self, grid: &HalfLineGrid, f: &VelocityMode) -> Vec<C> {
        let d = grid.dy(&f.u1);
        (1..self.n_nodes - 1).map(|i| -d[i] + I * self.alpha * f.u2[i]).collect()
    }

    /// Stream function on the full grid.
    pub fn stream(&self, y: &[C]) -> Vec<C> {
        matvec(&self.phi_map, y)
    }

    /// Vorticity `(∂²_Y − α²)φ` on the full grid, wall value included.
    pub fn vorticity(&self, grid: &HalfLineGrid, y: &[C]) -> Vec<C> {
        let phi = self.stream(y);
        let d2 = grid.dyy(&phi);
        d2.iter().zip(&phi).map(|(a, p)| a - p * self.alpha * self.alpha).collect()
    }

    pub fn velocity(&self, grid: &HalfLineGrid, y: &[C]) -> VelocityMode {
        VelocityMode::from_stream(grid, self.alpha, &self.stream(y))
    }

    /// `y − b (cᵀy)/(cᵀb)`: removes the wall-slip component along the wall-vorticity column.
    pub fn project(&self, y: &[C]) -> Vec<C> {
        let cy: C = self.wall_functional.iter().zip(y).map(|(c, v)| c * v).sum();
        let s = cy / self.influence();
        y.iter().zip(&self.wall_column).map(|(v, b)| v - b * s).collect()
    }

    /// Relative wall slip `|∂_Yφ(0)|` of a state.
    pub fn slip(&self, y: &[C]) -> f64 {
        let cy: C = self.wall_functional.iter().zip(y).map(|(c, v)| c * v).sum();
        let scale: f64 = self.wall_functional.iter().zip(y).map(|(c, v)| (c * v).norm()).sum();
        if scale > 0.0 {
            cy.norm() / scale
        } else {
            0.0
        }
    }

    /// The projected generator `P(A + s)`, with `P` the projection along the wall column.
    pub fn matrix(&self, shift: f64) -> CMat {
        let m = self.interior_len();
        let mut a = &self.a_diff + &self.a_adv;
        for i in 0..m {
            a[(i, i)] += shift;
        }
        let cb = self.influence();
        let ca: Vec<C> = (0..m).map(|j| (0..m).map(|i| self.wall_functional[i] * a[(i, j)]).sum::<C>() / cb).collect();
        for i in 0..m {
            for j in 0..m {
                a[(i, j)] -= self.wall_column[i] * ca[j];
            }
        }
        a
    }

    /// `e^{τ(G + s)} y₀` by the dense exponential.
    pub fn expm(&self, y0: &[C], tau: f64, shift: f64) -> Result<Vec<C>> {
        if self.n_nodes > EXPM_MAX_NODES {
            return Err(Error::Method(format!(
                "dense exponential limited to N ≤ {EXPM_MAX_NODES}, got N = {}; use the timestep method",
                self.n_nodes
            )));
        }
        if tau == 0.0 {
            return Ok(y0.to_vec());
        }
        let g = self.matrix(shift) * C::new(tau, 0.0);
        let e = g.exp();
        let out = matvec(&e, y0);
        if out.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Overflow(format!("matrix exponential overflowed at τ = {tau:.3e}")));
        }
        Ok(out)
    }

    /// Advective CFL step bound.
    pub fn cfl_step(&self) -> f64 {
        let m = self.interior_len();
        let row = (0..m).map(|i| (0..m).map(|j| self.a_adv[(i, j)].norm()).sum::<f64>()).fold(0.0, f64::max);
        if row > 0.0 {
            0.5 / row
        } else {
            f64::INFINITY
        }
    }

    /// IMEX integration over `[0, τ]` with `steps` equal steps (see [`ImexStepper`]).
    pub fn integrate(&self, y0: &[C], tau: f64, steps: usize, shift: f64) -> Result<Vec<C>> {
        let m = self.interior_len();
        if y0.len() != m {
            return Err(Error::Shape { expected: m, got: y0.len() });
        }
        if tau == 0.0 || steps == 0 {
            return Ok(y0.to_vec());
        }
        let st = ImexStepper::new(self, tau / steps as f64, shift)?;
        let mut prev_adv = st.advection(y0);
        let mut cur = st.first(y0, None);
        for _ in 1..steps {
            let adv = st.advection(&cur);
            cur = st.ab2(&cur, &adv, &prev_adv);
            prev_adv = adv;
        }
        if cur.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Overflow(format!("time stepping blew up at dt = {:.3e}", st.dt)));
        }
        Ok(cur)
    }

    /// Time stepping with Richardson extrapolation `(4u_{h/2} − u_h)/3`; `h ≤ min(dt_max, CFL)`.
    pub fn timestep(&self, y0: &[C], tau: f64, dt_max: f64, shift: f64) -> Result<Vec<C>> {
        if tau == 0.0 {
            return Ok(y0.to_vec());
        }
        let h = dt_max.min(self.cfl_step());
        let steps = ((tau / h).ceil() as usize).max(1);
        let coarse = self.integrate(y0, tau, steps, shift)?;
        let fine = self.integrate(y0, tau, 2 * steps, shift)?;
        Ok(fine.iter().zip(&coarse).map(|(f, c)| (f * 4.0 - c) / 3.0).collect())
    }
}

/// Fixed-step IMEX scheme for one mode: Crank–Nicolson on diffusion (and on the shift),
/// second-order Adams–Bashforth on advection and on any extra explicit forcing, with the wall
/// vorticity acting as the multiplier of `∂_Yφ(0) = 0`. The first step treats the whole
/// linear operator by Crank–Nicolson.
pub struct ImexStepper {
    /// Step in rescaled time.
    pub dt: f64,
    m: usize,
    implicit: CMat,
    full: CMat,
    a_adv: CMat,
    first_fact: Factored,
    fact: Factored,
}

impl ImexStepper {
    pub fn new(gen: &ModeGenerator, dt: f64, shift: f64) -> Result<ImexStepper> {
        if !(dt > 0.0) {
            return Err(Error::Domain(format!("time step must be positive, got {dt}")));
        }
        let m = gen.interior_len();
        let mut implicit = gen.a_diff.clone();
        for i in 0..m {
            implicit[(i, i)] += shift;
        }
        let full = &implicit + &gen.a_adv;
        let half = C::new(0.5 * dt, 0.0);
        let bordered = |op: &CMat| -> Result<Factored> {
            let mut k = CMat::zeros(m + 1, m + 1);
            for i in 0..m {
                for j in 0..m {
                    k[(i, j)] = -op[(i, j)] * half;
                }
                k[(i, i)] += 1.0;
                k[(i, m)] = -gen.wall_column[i] * dt;
                k[(m, i)] = gen.wall_functional[i];
            }
            Factored::new(k)
        };
        let first_fact = bordered(&full)?;
        let fact = bordered(&implicit)?;
        Ok(ImexStepper { dt, m, implicit, full, a_adv: gen.a_adv.clone(), first_fact, fact })
    }

    /// Advection and stretching applied to a state.
    pub fn advection(&self, y: &[C]) -> Vec<C> {
        matvec(&self.a_adv, y)
    }

    fn solve(&self, fact: &Factored, mut rhs: Vec<C>) -> Vec<C> {
        rhs.push(ZERO);
        let x = fact.solve(&rhs);
        x[..self.m].to_vec()
    }

    /// First step from `y0`, with an optional explicit forcing taken by forward Euler.
    pub fn first(&self, y0: &[C], forcing: Option<&[C]>) -> Vec<C> {
        let half = 0.5 * self.dt;
        let fy = matvec(&self.full, y0);
        let rhs: Vec<C> = (0..self.m)
            .map(|i| y0[i] + fy[i] * half + forcing.map_or(ZERO, |f| f[i] * self.dt))
            .collect();
        self.solve(&self.first_fact, rhs)
    }

    /// Adams–Bashforth step from `cur`, given the explicit terms at the current and the
    /// previous step.
    pub fn ab2(&self, cur: &[C], explicit_cur: &[C], explicit_prev: &[C]) -> Vec<C> {
        let half = 0.5 * self.dt;
        let d = matvec(&self.implicit, cur);
        let rhs: Vec<C> = (0..self.m)
            .map(|i| cur[i] + d[i] * half + (explicit_cur[i] * 1.5 - explicit_prev[i] * 0.5) * self.dt)
            .collect();
        self.solve(&self.fact, rhs)
    }
}

/// Tunables for [`apply_semigroup`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SemigroupOptions {
    pub theta: f64,
    pub node_counts: NodeCounts,
    /// Upper bound on the time step (rescaled time).
    pub dt_max: f64,
    /// Evolve `e^{sτ}e^{−τ𝕃}` instead, to keep strongly damped modes away from underflow.
    pub shift: f64,
    /// Stretch of the contour rays beyond the tail cut (1 keeps the cut).
    pub ray_factor: f64,
}

impl Default for SemigroupOptions {
    fn default() -> Self {
        SemigroupOptions { theta: DEFAULT_THETA, node_counts: NodeCounts::default(), dt_max: 0.01, shift: 0.0, ray_factor: 1.0 }
    }
}

/// Grid for the mode of `ctx`: the default map of the context placed on l₀.
pub fn semigroup_grid(profile: &ShearProfile, ctx: &ModeContext, n_nodes: usize) -> Result<HalfLineGrid> {
    let at_l0 = ModeContext::from_mu(
        profile,
        ctx.nu,
        ctx.n,
        C::new(ctx.remu_threshold(), 0.0),
        ctx.gamma,
        ctx.delta,
        ctx.delta_family,
    )?;
    at_l0.default_grid(n_nodes)
}

/// Contour evaluation of `e^{τG}` applied to the interior vorticity `y0`, returning the
/// stream function.
fn contour_stream(
    profile: &ShearProfile,
    samples: &ProfileSamples,
    ctx: &ModeContext,
    grid: &HalfLineGrid,
    y0: &[C],
    tau: f64,
    opts: &SemigroupOptions,
) -> Result<Vec<C>> {
    let spec = build_contour_with(ctx, opts.theta, opts.node_counts, tau, opts.ray_factor)?;
    let nn = grid.n;
    let mut forcing = vec![ZERO; nn];
    forcing[1..nn - 1].copy_from_slice(y0);
    let pts: Vec<(C, C)> =
        spec.segments.iter().flat_map(|s| s.nodes.iter().copied().zip(s.weights.iter().copied())).collect();
    let na = ctx.n.unsigned_abs() as i64;
    let partial: Vec<Result<Vec<C>>> = pts
        .par_iter()
        .map(|&(mu, w)| {
            let c = ModeContext::from_mu(profile, ctx.nu, na, mu, ctx.gamma, ctx.delta, ctx.delta_family)?
                .exploratory();
            let op = OsOperator::new(samples, &c, grid, Boundary::Nonslip, OsVariant::Standard)?;
            let (phi, _) = op.solve_forcing(&forcing);
            let k = w * (tau * mu).exp() / (2.0 * PI * I);
            Ok(phi.into_iter().map(|p| p * k).collect())
        })
        .collect();
    let mut acc = vec![ZERO; nn];
    for p in partial {
        for (a, v) in acc.iter_mut().zip(p?) {
            *a += v;
        }
    }
    Ok(acc)
}

/// `e^{−τ𝕃_{ν,n}} f` for a velocity mode `f` on `grid` (rescaled time `τ`).
///
/// The data enter through their curl, which discards any gradient part; a wall slip left in
/// the data is removed by the same projection that the evolution uses. Negative modes are
/// handled by conjugation.
pub fn apply_semigroup(
    profile: &ShearProfile,
    ctx: &ModeContext,
    grid: &HalfLineGrid,
    f: &VelocityMode,
    tau: f64,
    method: SemigroupMethod,
    opts: &SemigroupOptions,
) -> Result<VelocityMode> {
    if !(tau >= 0.0) {
        return Err(Error::Domain(format!("time must be non-negative, got {tau}")));
    }
    let samples = ProfileSamples::new(profile, grid);
    let gen = ModeGenerator::new(&samples, ctx.nu, ctx.n, grid)?;
    let neg = ctx.n < 0;
    let fe = if neg { f.conj() } else { f.clone() };
    let y0 = gen.project(&gen.state_from_velocity(grid, &fe)?);
    let out = match method {
        SemigroupMethod::Expm => gen.velocity(grid, &gen.expm(&y0, tau, opts.shift)?),
        SemigroupMethod::Timestep => gen.velocity(grid, &gen.timestep(&y0, tau, opts.dt_max, opts.shift)?),
        SemigroupMethod::Contour => {
            if opts.shift != 0.0 {
                return Err(Error::Config("the contour route does not take a spectral shift".into()));
            }
            let phi = contour_stream(profile, &samples, ctx, grid, &y0, tau, opts)?;
            VelocityMode::from_stream(grid, gen.alpha, &phi)
        }
    };
    Ok(if neg { out.conj() } else { out })
}

/// Random velocity mode with stream function `Y²·(Laguerre draw)`, projected onto the
/// discrete nonslip space so that it is exactly invariant under `τ = 0`.
pub fn random_mode(grid: &HalfLineGrid, alpha_signed: f64, seed: u64) -> VelocityMode {
    let d = smooth_draw(seed, DATA_SCALES.0, DATA_SCALES.1, true);
    let phi: Vec<C> = grid.nodes.iter().map(|&y| d.eval(y) * y).collect();
    let raw = VelocityMode::from_stream(grid, alpha_signed, &phi);
    // the projection depends on the grid and |α| only, so the Stokes generator with ν = α² serves
    let a = alpha_signed.abs();
    let gen = ModeGenerator::stokes(a * a, 1, grid).expect("nonzero wavenumber on a valid grid");
    let fe = if alpha_signed < 0.0 { raw.conj() } else { raw };
    let y = gen.project(&gen.state_from_velocity(grid, &fe).expect("lengths match the grid"));
    let out = VelocityMode::from_stream(grid, a, &gen.stream(&y));
    if alpha_signed < 0.0 {
        out.conj()
    } else {
        out
    }
}

/// Norms of a mode state in original variables (one Fourier mode, the common `L²_x` factor
/// omitted).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OriginalNorms {
    pub l2: f64,
    pub sup: f64,
    /// `‖∇_{x,y} u‖_{L²}`.
    pub grad: f64,
    /// `(‖u‖²_{L²} + ‖∂_y u‖²_{L²})^{1/2}`.
    pub h1_y: f64,
}

impl OriginalNorms {
    /// From the stream function in rescaled variables: `L²_y = ν^{1/4}L²_Y`,
    /// `∇_{x,y} = ν^{−1/2}∇_{X,Y}`, sup norms unchanged.
    pub fn from_stream(grid: &HalfLineGrid, nu: f64, alpha: f64, phi: &[C]) -> OriginalNorms {
        let v = VelocityMode::from_stream(grid, alpha, phi);
        let q = nu.powf(0.25);
        let l2u = q * v.l2(grid);
        let dy = v.dy_l2(grid) / q;
        OriginalNorms {
            l2: l2u,
            sup: v.sup(grid),
            grad: gradient_norm(grid, phi, alpha) / q,
            h1_y: (l2u * l2u + dy * dy).sqrt(),
        }
    }
}

/// Which bound family a semigroup report belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundKind {
    L2,
    Gradient,
    L2Linf,
    H1Linf,
    RhoCurl,
}

impl BoundKind {
    pub fn id(self) -> &'static str {
        match self {
            BoundKind::L2 => "semigroup-L2",
            BoundKind::Gradient => "semigroup-grad",
            BoundKind::L2Linf => "semigroup-L2Linf",
            BoundKind::H1Linf => "semigroup-H1Linf",
            BoundKind::RhoCurl => "semigroup-rho-curl",
        }
    }
}

/// Right-hand sides of the regime-wise semigroup bounds with constants stripped, in original
/// variables and time `t`, for unit data norms. The exponential factors are returned
/// separately so that callers evolving a shifted semigroup can divide them out.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundShape {
    /// Coefficient of `‖f‖_{L²}` apart from `growth`.
    pub coeff: f64,
    /// Coefficient of `‖f‖_{L²_xH¹_y}` (only for the H¹→L∞ family).
    pub h1_coeff: f64,
    /// Exponential factor.
    pub growth: f64,
}

/// Shape of one bound for mode `n` at time `t` in `regime` (`δ`, `δ₀`, `γ`, `ν` as given).
pub fn bound_shape(
    kind: BoundKind,
    regime: FrequencyRegime,
    nu: f64,
    n: i64,
    gamma: f64,
    delta: f64,
    delta0: f64,
    t: f64,
) -> BoundShape {
    let na = n.unsigned_abs() as f64;
    let jn = (1.0 + na * na).sqrt();
    let c_low = na / delta0;
    let mid = (na.powf(gamma) * t / delta).exp();
    let mid_half = (na.powf(gamma) * t / (2.0 * delta)).exp();
    let high = (-0.25 * nu * na * na * t).exp();
    let q = nu.powf(-0.25);
    let s = |coeff: f64, growth: f64| BoundShape { coeff, h1_coeff: 0.0, growth };
    use BoundKind as K;
    use FrequencyRegime as R;
    match (kind, regime) {
        (K::L2, R::Low) => s(1.0, (c_low * t).exp()),
        (K::L2, R::MiddleSmall) => s(na.powf(2.0 * (1.0 - gamma)), mid),
        (K::L2, R::MiddleLarge) => s(na.powf(1.0 - gamma), mid),
        (K::L2, R::High) => s(1.0, high),
        (K::Gradient, R::Low) => {
            let e = (c_low * t).exp();
            s((1.0 + t * e) / (nu * t).sqrt(), 1.0)
        }
        (K::Gradient, R::MiddleSmall) => {
            let a = t.powf(-0.5) / mid;
            s((a + na.powf(1.25 * (1.0 - gamma) + 0.5)) / nu.sqrt(), mid)
        }
        (K::Gradient, R::MiddleLarge) => {
            let a = t.powf(-0.5) / mid;
            s((a + na.powf(1.0 - gamma / 2.0)) / nu.sqrt(), mid)
        }
        (K::Gradient, R::High) => s((1.0 + na * t) / (nu * t).sqrt(), high),
        (K::L2Linf, R::Low) => s(q * t.powf(-0.25), (c_low * t).exp()),
        (K::L2Linf, R::MiddleSmall) => {
            let lg = jn.ln().sqrt();
            let a = jn.powf(0.75 * (1.0 - gamma)) * lg * q * jn.powf(-0.25) * t.powf(-0.5);
            let b = jn.powf(1.0 - gamma) * q * t.powf(-0.25) * mid_half;
            let c = q * lg * jn.powf(1.5 - 1.25 * gamma);
            s((a + b) / mid + c, mid)
        }
        (K::L2Linf, R::MiddleLarge) => {
            let b = na.powf((1.0 - gamma) / 2.0) * q * t.powf(-0.25) * mid_half;
            let c = q * na.powf(1.0 - 0.75 * gamma);
            s(b / mid + c, mid)
        }
        (K::L2Linf, R::High) => s(q * t.powf(-0.25) * (1.0 + (na * t).sqrt()), high),
        (K::H1Linf, R::Low) | (K::H1Linf, R::MiddleSmall) => BoundShape {
            coeff: q * t.powf(0.75) * (1.0 + na.powf(3.0 - 2.0 * gamma)),
            h1_coeff: 1.0,
            growth: mid,
        },
        (K::H1Linf, R::MiddleLarge) => {
            BoundShape { coeff: q * t.powf(0.75) * na.powf(2.0 - gamma), h1_coeff: 1.0, growth: mid }
        }
        (K::H1Linf, R::High) => BoundShape { coeff: q * t.powf(0.75) * na, h1_coeff: 1.0, growth: high },
        // rescaled variables: ‖ρ^{1/2}ω(τ)‖ against (ν^{−1/4}τ^{−1/2} + |n|^{1−γ/2}e^{|n|^γν^{1/2}τ/δ})‖f_ν‖
        (K::RhoCurl, _) => {
            let tau = t / nu.sqrt();
            s(q * tau.powf(-0.5) / mid + na.powf(1.0 - gamma / 2.0), mid)
        }
    }
}

/// Options for [`verify_semigroup_bounds`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundSweepOptions {
    pub seed: u64,
    pub draws: usize,
    pub n_nodes: usize,
    pub dt_max: f64,
}

impl Default for BoundSweepOptions {
    fn default() -> Self {
        BoundSweepOptions { seed: 0, draws: 3, n_nodes: 64, dt_max: 0.01 }
    }
}

fn check_point_hypotheses(k: usize, ctx: &ModeContext, regime: FrequencyRegime, t: f64) -> Result<()> {
    if !(t > 0.0) {
        return Err(Error::Hypothesis(format!("sweep entry {k}: times must be positive, got {t}")));
    }
    if !(2.0 / 3.0 - 1e-12..=1.0 + 1e-12).contains(&ctx.gamma) {
        return Err(Error::Hypothesis(format!("sweep entry {k}: γ = {} outside [2/3, 1]", ctx.gamma)));
    }
    if regime.is_middle() && ctx.delta > ctx.delta_family.delta_star * (1.0 + 1e-12) {
        return Err(Error::Hypothesis(format!(
            "sweep entry {k}: δ = {} exceeds δ_* = {}",
            ctx.delta, ctx.delta_family.delta_star
        )));
    }
    Ok(())
}

/// Measures the regime-wise semigroup bounds over a sweep of modes (`ctx` supplies `ν, n, γ, δ`)
/// and original times `t`, on random nonslip data. Reports carry the ids of [`BoundKind`].
///
/// Modes in the high regime are evolved with the shift `νn²/4` (in original time) so that the
/// factor `e^{−νn²t/4}` is divided out of both sides instead of underflowing.
pub fn verify_semigroup_bounds(
    profile: &ShearProfile,
    sweep: &[ModeContext],
    times: &[f64],
    opts: &BoundSweepOptions,
) -> Result<Vec<EstimateReport>> {
    let mut plan = Vec::new();
    for (k, ctx) in sweep.iter().enumerate() {
        let regime = classify_with(ctx.delta_family.delta0, ctx.nu, ctx.n, ctx.gamma);
        for &t in times {
            check_point_hypotheses(k, ctx, regime, t)?;
        }
        plan.push((k, ctx, regime));
    }
    let results: Vec<Result<Vec<EstimateReport>>> = plan
        .par_iter()
        .map(|&(k, ctx, regime)| bounds_for_mode(profile, k, ctx, regime, times, opts))
        .collect();
    let mut out = Vec::new();
    for r in results {
        out.extend(r?);
    }
    Ok(out)
}

fn bounds_for_mode(
    profile: &ShearProfile,
    k: usize,
    ctx: &ModeContext,
    regime: FrequencyRegime,
    times: &[f64],
    opts: &BoundSweepOptions,
) -> Result<Vec<EstimateReport>> {
    let grid = semigroup_grid(profile, ctx, opts.n_nodes)?;
    let samples = ProfileSamples::new(profile, &grid);
    let gen = ModeGenerator::new(&samples, ctx.nu, ctx.n, &grid)?;
    let sq = ctx.nu.sqrt();
    // shift in rescaled time corresponding to e^{νn²t/4}
    let shift = if regime == FrequencyRegime::High { 0.25 * sq * gen.alpha * gen.alpha } else { 0.0 };
    let rho = WeightSpec::rho(ctx.n, ctx.gamma, ctx.delta);
    let mut out = Vec::new();
    for d in 0..opts.draws {
        let seed = mix_seed(opts.seed, "semigroup-bounds", &[k as u64, d as u64]);
        let f = random_mode(&grid, gen.alpha, seed);
        let y0 = gen.project(&gen.state_from_velocity(&grid, &f)?);
        let f_norms = OriginalNorms::from_stream(&grid, ctx.nu, gen.alpha, &gen.stream(&y0));
        let f_l2_rescaled = gen.velocity(&grid, &y0).l2(&grid);
        for &t in times {
            let tau = t / sq;
            let y = if opts.n_nodes <= EXPM_MAX_NODES {
                gen.expm(&y0, tau, shift)?
            } else {
                gen.timestep(&y0, tau, opts.dt_max, shift)?
            };
            let phi = gen.stream(&y);
            let u = OriginalNorms::from_stream(&grid, ctx.nu, gen.alpha, &phi);
            let params = json!({
                "nu": ctx.nu, "n": ctx.n, "gamma": ctx.gamma, "delta": ctx.delta, "t": t,
                "regime": format!("{regime:?}"), "draw": d, "shifted": shift != 0.0, "entry": k,
            });
            let divide = |growth: f64| if shift != 0.0 { 1.0 } else { growth };
            let mut kinds = vec![BoundKind::L2, BoundKind::Gradient, BoundKind::L2Linf, BoundKind::H1Linf];
            if regime == FrequencyRegime::MiddleSmall {
                kinds.push(BoundKind::RhoCurl);
            }
            for kind in kinds {
                let b = bound_shape(kind, regime, ctx.nu, ctx.n, ctx.gamma, ctx.delta, ctx.delta_family.delta0, t);
                let (lhs, rhs) = match kind {
                    BoundKind::L2 => (u.l2, b.coeff * divide(b.growth) * f_norms.l2),
                    BoundKind::Gradient => (u.grad, b.coeff * divide(b.growth) * f_norms.l2),
                    BoundKind::L2Linf => (u.sup, b.coeff * divide(b.growth) * f_norms.l2),
                    BoundKind::H1Linf => {
                        // the H¹ term carries no exponential, so a shifted state is unshifted here
                        let unshift = if shift != 0.0 { (-shift * tau).exp() } else { 1.0 };
                        (u.sup * unshift, b.h1_coeff * f_norms.h1_y + b.coeff * b.growth * f_norms.l2)
                    }
                    BoundKind::RhoCurl => {
                        let w = gen.vorticity(&grid, &y);
                        (weighted_l2(&grid, &w, &rho), b.coeff * b.growth * f_l2_rescaled)
                    }
                };
                out.push(EstimateReport::new(kind.id(), lhs, rhs, params.clone(), grid.n));
            }
        }
    }
    Ok(out)
}

/// `‖u(t)‖² + 2ν∫₀ᵗ‖∇u‖²` relative to `‖f‖²`, minus one, for the discrete Stokes evolution of
/// `f` at original time `t` (Gauss–Legendre in time on exact-in-time states).
pub fn stokes_energy_defect(nu: f64, n: i64, grid: &HalfLineGrid, f: &VelocityMode, t: f64, quad_nodes: usize) -> Result<f64> {
    let gen = ModeGenerator::stokes(nu, n, grid)?;
    let fe = if n < 0 { f.conj() } else { f.clone() };
    let y0 = gen.project(&gen.state_from_velocity(grid, &fe)?);
    let sq = nu.sqrt();
    let tau = t / sq;
    let e0 = gen.velocity(grid, &y0).l2(grid).powi(2);
    if e0 == 0.0 {
        return Ok(0.0);
    }
    let y_t = gen.expm(&y0, tau, 0.0)?;
    let e_t = gen.velocity(grid, &y_t).l2(grid).powi(2);
    // τ = T s² removes the square-root start-up of ‖∇u‖² from the quadrature
    let (x, w) = gauss_legendre(quad_nodes);
    let mut integral = 0.0;
    for (xi, wi) in x.iter().zip(&w) {
        let s = 0.5 * (xi + 1.0);
        let ts = tau * s * s;
        let y = gen.expm(&y0, ts, 0.0)?;
        let g = gradient_norm(grid, &gen.stream(&y), gen.alpha);
        integral += 0.5 * wi * g * g * 2.0 * tau * s;
    }
    // rescaled balance: ‖v‖² + 2ν^{1/2}∫‖∇v‖²dτ = ‖v₀‖²
    Ok((e_t + 2.0 * sq * integral) / e0 - 1.0)
}

/// Stokes-semigroup checks for a velocity mode `f` (rescaled grid, original times): per time,
/// the three displays `‖u(t)‖_{L²_xL^∞_y}` against `‖f‖_{L²_xH¹_y}`, `‖u(t)‖_{L²_xL^∞_y}`
/// against `(νt)^{−1/4}‖f‖`, and `‖∇u(t)‖` against `(νt)^{−1/2}‖f‖`. Uses the `V ≡ 0` path of
/// the time stepper; data with a gradient part or wall slip are projected and flagged.
pub fn check_stokes(nu: f64, n: i64, grid: &HalfLineGrid, f: &VelocityMode, times: &[f64], dt_max: f64) -> Result<Vec<EstimateReport>> {
    let gen = ModeGenerator::stokes(nu, n, grid)?;
    let alpha_signed = gen.alpha * n.signum() as f64;
    let projected = f.constraint_defect(grid, alpha_signed) > 1e-8;
    let fe = if n < 0 { f.conj() } else { f.clone() };
    let y0 = gen.project(&gen.state_from_velocity(grid, &fe)?);
    let sq = nu.sqrt();
    let f_norms = OriginalNorms::from_stream(grid, nu, gen.alpha, &gen.stream(&y0));
    let mut out = Vec::new();
    for &t in times {
        if !(t >= 0.0) {
            return Err(Error::Domain(format!("time must be non-negative, got {t}")));
        }
        let y = gen.timestep(&y0, t / sq, dt_max, 0.0)?;
        let u = OriginalNorms::from_stream(grid, nu, gen.alpha, &gen.stream(&y));
        let params = json!({ "nu": nu, "n": n, "t": t, "projected": projected });
        out.push(EstimateReport::new("stokes-H1-Linf", u.sup, f_norms.h1_y, params.clone(), grid.n));
        if t > 0.0 {
            let nt = nu * t;
            out.push(EstimateReport::new("stokes-L2-Linf", u.sup, nt.powf(-0.25) * f_norms.l2, params.clone(), grid.n));
            out.push(EstimateReport::new("stokes-grad", u.grad, nt.powf(-0.5) * f_norms.l2, params, grid.n));
        }
    }
    Ok(out)
}
