//! Fourier–collocation simulation of the perturbation equations around a shear profile, with
//! the projected nonlinearity, its convolution bound and Gevrey-norm tracking.
//!
//! Modes `u_n(Y)` for `|n| ≤ N_x` live on one half-line grid in `Y = y/ν^{1/2}`; time `t` and
//! the reported norms are in original variables. Mode norms are `L²_y` norms of the Fourier
//! coefficients (the common `2π` factor of `L²_x` is left out). Each mode `n ≠ 0` is evolved
//! through its interior vorticity with the generator of [`crate::semigroup`]; the mean mode
//! carries `u₁₀` only, since a solenoidal nonslip mean flow has `u₂₀ = 0`.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::numerics::grid::{build_grid, HalfLineGrid, Mapping};
use crate::numerics::linalg::{matvec, CMat, Factored};
use crate::numerics::norms::{gevrey_norm, japanese, l2, GevreyNormParams, GevreyVariant};
use crate::numerics::random::{mix_seed, smooth_draw};
use crate::ossolve::ProfileSamples;
use crate::profiles::ShearProfile;
use crate::report::EstimateReport;
use crate::semigroup::{random_mode, ImexStepper, ModeGenerator, VelocityMode};

type C = Complex64;

const I: C = C { re: 0.0, im: 1.0 };
const ZERO: C = C { re: 0.0, im: 0.0 };

/// Excess realizing the "+" in the first branch of the `β` formula.
pub const BETA_EXCESS: f64 = 1e-3;

/// Gevrey parameters of the a-priori norm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZNormParams {
    pub gamma: f64,
    /// Initial Gevrey radius `K`.
    #[serde(rename = "K")]
    pub k: f64,
    /// Requested final time; runs stop at `min(T, δK/2)`.
    #[serde(rename = "T")]
    pub t_final: f64,
    pub d: f64,
    pub delta: f64,
}

impl ZNormParams {
    pub fn new(gamma: f64, k: f64, t_final: f64, d: f64, delta: f64) -> Result<ZNormParams> {
        let z = ZNormParams { gamma, k, t_final, d, delta };
        z.validate()?;
        Ok(z)
    }

    pub fn validate(&self) -> Result<()> {
        if !(2.0 / 3.0 - 1e-12..=1.0 + 1e-12).contains(&self.gamma) {
            return Err(Error::Config(format!("gamma must lie in [2/3, 1], got {}", self.gamma)));
        }
        if !(self.k > 0.0) || !(self.delta > 0.0) || !(self.t_final > 0.0) {
            return Err(Error::Config("K, δ and T must be positive".into()));
        }
        let q = self.q();
        if !(q > 1.0 && q < self.d) {
            return Err(Error::Config(format!("q = d − 3(1−γ) − 1 = {q} must lie in (1, d = {})", self.d)));
        }
        Ok(())
    }

    /// `q = d − 3(1−γ) − 1`.
    pub fn q(&self) -> f64 {
        self.d - 3.0 * (1.0 - self.gamma) - 1.0
    }

    /// `K(t) = K − 2t/δ`.
    pub fn k_of_t(&self, t: f64) -> f64 {
        self.k - 2.0 * t / self.delta
    }

    /// `min(T, δK/2)`, the largest time with `K(t) ≥ 0`.
    pub fn horizon(&self) -> f64 {
        self.t_final.min(0.5 * self.delta * self.k)
    }

    /// `max{7(1−γ)/(8γ) + 1/(8γ) + ε₀, 3/16 + 15(1−γ)/16}` with `ε₀ = BETA_EXCESS`.
    pub fn beta(&self) -> f64 {
        let g = self.gamma;
        (7.0 * (1.0 - g) / (8.0 * g) + 1.0 / (8.0 * g) + BETA_EXCESS).max(3.0 / 16.0 + 15.0 * (1.0 - g) / 16.0)
    }

    fn weights(&self, d: f64, k: f64, variant: GevreyVariant) -> GevreyNormParams {
        GevreyNormParams { d, gamma: self.gamma, k, variant }
    }
}

/// One sample of the norm history.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub t: f64,
    /// `‖u‖_{X_{q,γ,K(t)}}`.
    pub x_norm: f64,
    /// `‖u‖_{Y_{q,γ,K(t)}}`.
    pub y_norm: f64,
    /// `‖∇u‖_{X_{q,γ,K(t)}}`.
    pub grad_norm: f64,
    /// `x + ν^{1/4}y + (νt)^{1/2}grad`.
    pub z_norm: f64,
    /// `Σ_n ‖u_n‖²`.
    pub energy: f64,
    /// `Σ_n ‖∇u_n‖²`.
    pub dissipation: f64,
}

/// Modes `n ↦ (u₁ₙ, u₂ₙ)` for `|n| ≤ N_x`, plus time and history.
#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub modes: BTreeMap<i64, VelocityMode>,
    pub time: f64,
    pub history: Vec<HistoryEntry>,
}

impl SimState {
    pub fn zeros(nx: usize, n_nodes: usize) -> SimState {
        let modes = (-(nx as i64)..=nx as i64).map(|n| (n, VelocityMode::zeros(n_nodes))).collect();
        SimState { modes, time: 0.0, history: Vec::new() }
    }

    pub fn nx(&self) -> usize {
        self.modes.keys().map(|n| n.unsigned_abs() as usize).max().unwrap_or(0)
    }

    /// Sets mode `n` and its conjugate partner.
    pub fn set_mode(&mut self, n: i64, v: VelocityMode) {
        if n != 0 {
            self.modes.insert(-n, v.conj());
        }
        self.modes.insert(n, v);
    }

    /// Multiplies mode `n` by `e^{inx₀}` (translation by `x₀`).
    pub fn translate(&self, x0: f64) -> SimState {
        let modes = self
            .modes
            .iter()
            .map(|(&n, v)| {
                let ph = C::from_polar(1.0, n as f64 * x0);
                (n, VelocityMode { u1: v.u1.iter().map(|z| z * ph).collect(), u2: v.u2.iter().map(|z| z * ph).collect() })
            })
            .collect();
        SimState { modes, time: self.time, history: self.history.clone() }
    }

    /// Largest relative divergence `‖inu₁ + ∂_yu₂‖/‖∇u‖`-type defect over modes (rescaled
    /// variables, where it reads `iαu₁ + ∂_Y u₂`).
    pub fn divergence_defect(&self, grid: &HalfLineGrid, nu: f64) -> f64 {
        let sq = nu.sqrt();
        self.modes
            .iter()
            .map(|(&n, v)| {
                let d2 = grid.dy(&v.u2);
                let a = sq * n as f64;
                let div: Vec<C> = v.u1.iter().zip(&d2).map(|(u, d)| I * a * u + d).collect();
                let scale = l2(grid, &grid.dy(&v.u1)).max(l2(grid, &d2)).max(a.abs() * v.l2(grid));
                if scale > 0.0 {
                    l2(grid, &div) / scale
                } else {
                    0.0
                }
            })
            .fold(0.0, f64::max)
    }

    /// Largest `|u_{−n} − conj(u_n)|` relative to the largest mode value.
    pub fn reality_defect(&self) -> f64 {
        let mut scale = 0.0f64;
        let mut worst = 0.0f64;
        for (&n, v) in &self.modes {
            scale = scale.max(v.u1.iter().chain(&v.u2).map(|z| z.norm()).fold(0.0, f64::max));
            if let Some(w) = self.modes.get(&-n) {
                worst = worst.max(v.max_abs_diff(&w.conj()));
            }
        }
        if scale > 0.0 {
            worst / scale
        } else {
            0.0
        }
    }

    /// Largest wall value over modes, relative to the largest mode value.
    pub fn wall_defect(&self) -> f64 {
        let mut scale = 0.0f64;
        let mut worst = 0.0f64;
        for v in self.modes.values() {
            scale = scale.max(v.u1.iter().chain(&v.u2).map(|z| z.norm()).fold(0.0, f64::max));
            worst = worst.max(v.u1[0].norm()).max(v.u2[0].norm());
        }
        if scale > 0.0 {
            worst / scale
        } else {
            0.0
        }
    }
}

/// Per-mode norms in original variables.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeNorms {
    pub l2: f64,
    pub sup: f64,
    pub grad: f64,
    pub h1_y: f64,
}

/// Norms of mode `n` (original variables) from its rescaled samples.
pub fn mode_norms(grid: &HalfLineGrid, nu: f64, n: i64, v: &VelocityMode) -> ModeNorms {
    let q = nu.powf(0.25);
    let l2u = q * v.l2(grid);
    let dy = v.dy_l2(grid) / q;
    let nx = n as f64;
    ModeNorms {
        l2: l2u,
        sup: v.sup(grid),
        grad: (nx * nx * l2u * l2u + dy * dy).sqrt(),
        h1_y: (l2u * l2u + dy * dy).sqrt(),
    }
}

/// `‖a‖_{X⁽¹⁾_{d,γ,K}}`.
pub fn x1_norm(state: &SimState, grid: &HalfLineGrid, nu: f64, z: &ZNormParams) -> f64 {
    let m: BTreeMap<i64, f64> = state.modes.iter().map(|(&n, v)| (n, mode_norms(grid, nu, n, v).h1_y)).collect();
    gevrey_norm(&m, &z.weights(z.d, z.k, GevreyVariant::X1))
}

/// The components of the `Z` norm at time `t` (weights `K(t)` and order `q`).
pub fn z_components(state: &SimState, grid: &HalfLineGrid, nu: f64, z: &ZNormParams, t: f64) -> HistoryEntry {
    let norms: BTreeMap<i64, ModeNorms> = state.modes.iter().map(|(&n, v)| (n, mode_norms(grid, nu, n, v))).collect();
    let kt = z.k_of_t(t);
    let q = z.q();
    let pick = |f: fn(&ModeNorms) -> f64| -> BTreeMap<i64, f64> { norms.iter().map(|(&n, m)| (n, f(m))).collect() };
    let x_norm = gevrey_norm(&pick(|m| m.l2), &z.weights(q, kt, GevreyVariant::X));
    let y_norm = gevrey_norm(&pick(|m| m.sup), &z.weights(q, kt, GevreyVariant::Y));
    let grad_norm = gevrey_norm(&pick(|m| m.grad), &z.weights(q, kt, GevreyVariant::X));
    let energy = norms.values().map(|m| m.l2 * m.l2).sum();
    let dissipation = norms.values().map(|m| m.grad * m.grad).sum();
    HistoryEntry {
        t,
        x_norm,
        y_norm,
        grad_norm,
        z_norm: x_norm + nu.powf(0.25) * y_norm + (nu * t).sqrt() * grad_norm,
        energy,
        dissipation,
    }
}

/// Common grid for a simulation: algebraic map whose far end resolves the decay of mode 1.
pub fn sim_grid(nu: f64, n_nodes: usize) -> Result<HalfLineGrid> {
    build_grid(n_nodes, Mapping::algebraic_for_decay(1.0, nu.sqrt()))
}

/// Gevrey-decaying random initial data: mode `n` is a random nonslip solenoidal shape of unit
/// `L²_xH¹_y` norm scaled by `amplitude·e^{−K|n|^γ}/(1+|n|^d)`, so that `‖a‖_{X⁽¹⁾} = amplitude`.
pub fn gevrey_initial_data(
    grid: &HalfLineGrid,
    nu: f64,
    nx: usize,
    z: &ZNormParams,
    amplitude: f64,
    seed: u64,
) -> SimState {
    let mut s = SimState::zeros(nx, grid.n);
    let sq = nu.sqrt();
    let w = z.weights(z.d, z.k, GevreyVariant::X1);
    for n in 0..=nx as i64 {
        let sd = mix_seed(seed, "initial-data", &[n as u64]);
        let shape = if n == 0 {
            let d = smooth_draw(sd, 0.2, 1.0, true);
            VelocityMode { u1: d.sample(&grid.nodes).iter().map(|z| C::new(z.re, 0.0)).collect(), u2: vec![ZERO; grid.n] }
        } else {
            random_mode(grid, sq * n as f64, sd)
        };
        let h1 = mode_norms(grid, nu, n, &shape).h1_y;
        let scale = if h1 > 0.0 { amplitude / (w.weight(n) * h1) } else { 0.0 };
        let v = VelocityMode {
            u1: shape.u1.iter().map(|z| z * scale).collect(),
            u2: shape.u2.iter().map(|z| z * scale).collect(),
        };
        s.set_mode(n, v);
    }
    s
}

/// `u·∇u` per mode `0 ≤ n ≤ N_x` by exact convolution over the retained modes (original
/// derivatives: `∂_x → in`, `∂_y → ν^{−1/2}∂_Y`).
fn convection(state: &SimState, grid: &HalfLineGrid, nu: f64) -> BTreeMap<i64, VelocityMode> {
    let nx = state.nx() as i64;
    let inv = 1.0 / nu.sqrt();
    let dy: BTreeMap<i64, (Vec<C>, Vec<C>)> =
        state.modes.iter().map(|(&n, v)| (n, (grid.dy(&v.u1), grid.dy(&v.u2)))).collect();
    let nn = grid.n;
    (0..=nx)
        .into_par_iter()
        .map(|n| {
            let mut a1 = vec![ZERO; nn];
            let mut a2 = vec![ZERO; nn];
            for j in (n - nx).max(-nx)..=nx.min(n + nx) {
                let k = n - j;
                if k.abs() > nx {
                    continue;
                }
                let (uj, uk) = (&state.modes[&j], &state.modes[&k]);
                let (d1k, d2k) = &dy[&k];
                let ik = I * k as f64;
                for i in 0..nn {
                    a1[i] += uj.u1[i] * ik * uk.u1[i] + uj.u2[i] * d1k[i] * inv;
                    a2[i] += uj.u1[i] * ik * uk.u2[i] + uj.u2[i] * d2k[i] * inv;
                }
            }
            (n, VelocityMode { u1: a1, u2: a2 })
        })
        .collect()
}

/// Leray projection of one mode: for `n ≠ 0` the velocity of the stream function with the same
/// curl and `φ(0) = φ(L) = 0`; for `n = 0` the tangential component alone.
pub fn leray_project(grid: &HalfLineGrid, nu: f64, n: i64, v: &VelocityMode) -> Result<VelocityMode> {
    if n == 0 {
        return Ok(VelocityMode { u1: v.u1.clone(), u2: vec![ZERO; grid.n] });
    }
    let gen = ModeGenerator::stokes(nu, n, grid)?;
    Ok(project_with(&gen, grid, n, v))
}

fn project_with(gen: &ModeGenerator, grid: &HalfLineGrid, n: i64, v: &VelocityMode) -> VelocityMode {
    let ve = if n < 0 { v.conj() } else { v.clone() };
    let y = gen.state_from_velocity(grid, &ve).expect("mode lengths match the grid");
    let out = VelocityMode::from_stream(grid, gen.alpha, &gen.stream(&y));
    if n < 0 {
        out.conj()
    } else {
        out
    }
}

/// `𝒫ₙℙ(u·∇u)` for every retained mode.
pub fn nonlinear_term(state: &SimState, grid: &HalfLineGrid, nu: f64) -> Result<BTreeMap<i64, VelocityMode>> {
    let conv = convection(state, grid, nu);
    let nx = state.nx() as i64;
    let mut out = BTreeMap::new();
    for n in 0..=nx {
        let p = leray_project(grid, nu, n, &conv[&n])?;
        if n != 0 {
            out.insert(-n, p.conj());
        }
        out.insert(n, p);
    }
    Ok(out)
}

/// Measures `‖𝒫ₙℙ(u·∇u)‖ ≤ C(νt)^{−1/2}e^{−K(t)⟨n⟩^γ}‖u‖²_Z/(1+|n|^{q−1/2})` on one state,
/// with `‖u‖_Z` the instantaneous sum of the three `Z` components at `t`. The report carries
/// the sup over modes of the ratio and the mode attaining it.
pub fn check_convolution_bound(
    state: &SimState,
    grid: &HalfLineGrid,
    z: &ZNormParams,
    nu: f64,
    t: f64,
) -> Result<EstimateReport> {
    if !(t > 0.0) {
        return Err(Error::Domain(format!("the bound needs t > 0, got {t}")));
    }
    let q = z.q();
    if !(q > 1.0) {
        return Err(Error::Config(format!("q = {q} must exceed 1")));
    }
    let comp = z_components(state, grid, nu, z, t);
    if !comp.z_norm.is_finite() {
        return Err(Error::Overflow("Z norm is not finite".into()));
    }
    let nl = nonlinear_term(state, grid, nu)?;
    let kt = z.k_of_t(t);
    let mut best = (0.0f64, 0i64, 0.0f64, 0.0f64);
    for (&n, v) in &nl {
        let lhs = nu.powf(0.25) * v.l2(grid);
        if comp.z_norm == 0.0 {
            if lhs > 0.0 {
                return Err(Error::Consistency { what: "zero Z norm with a nonzero nonlinearity".into(), residual: lhs });
            }
            continue;
        }
        let na = n.unsigned_abs() as f64;
        let shape = (nu * t).powf(-0.5) * (-kt * japanese(n).powf(z.gamma)).exp() / (1.0 + na.powf(q - 0.5))
            * comp.z_norm
            * comp.z_norm;
        let r = lhs / shape;
        if r > best.0 {
            best = (r, n, lhs, shape);
        }
    }
    let params = json!({
        "nu": nu, "t": t, "nx": state.nx(), "argmax_n": best.1, "z_norm": comp.z_norm,
        "gamma": z.gamma, "K": z.k, "d": z.d, "q": q,
    });
    let mut r = EstimateReport::new("convolution-bound", best.2, best.3, params, grid.n);
    r.ratio = best.0;
    Ok(r)
}

/// Tunables for [`simulate`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimOptions {
    /// Lower bound on the number of steps to the horizon.
    pub min_steps: usize,
    /// History sample every this many steps (the final state is always sampled).
    pub output_every: usize,
    /// Early stop once `Z/‖a‖_{X⁽¹⁾}` exceeds this.
    pub ceiling: f64,
    /// Stability flag threshold on `sup Z/‖a‖_{X⁽¹⁾}`.
    pub accept_c: f64,
    /// Advective CFL number.
    pub cfl: f64,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions { min_steps: 200, output_every: 10, ceiling: 1e6, accept_c: 10.0, cfl: 0.5 }
    }
}

/// Outcome of [`simulate`].
#[derive(Debug, Clone, PartialEq)]
pub struct SimRun {
    pub state: SimState,
    /// `‖a‖_{X⁽¹⁾_{d,γ,K}}`.
    pub a_norm: f64,
    /// `sup_t Z(t)/‖a‖_{X⁽¹⁾}`.
    pub fitted_c: f64,
    pub stable: bool,
    pub steps: usize,
    pub rejected_steps: usize,
    pub final_dt: f64,
    /// Diagnostic when the run stopped before the horizon.
    pub stopped_early: Option<String>,
}

struct MeanStepper {
    dt: f64,
    d2: CMat,
    fact: Factored,
}

impl MeanStepper {
    /// Crank–Nicolson for `∂_t u = ∂²_Y u` on the interior, `u(0) = u(L) = 0`.
    fn new(grid: &HalfLineGrid, dt: f64) -> Result<MeanStepper> {
        let m = grid.n - 2;
        let mut d2 = CMat::zeros(m, m);
        for i in 0..m {
            for j in 0..m {
                d2[(i, j)] = C::new(grid.d2[(i + 1, j + 1)], 0.0);
            }
        }
        let mut k = -&d2 * C::new(0.5 * dt, 0.0);
        for i in 0..m {
            k[(i, i)] += 1.0;
        }
        Ok(MeanStepper { dt, d2, fact: Factored::new(k)? })
    }

    fn step(&self, cur: &[C], ex_cur: &[C], ex_prev: &[C]) -> Vec<C> {
        let d = matvec(&self.d2, cur);
        let rhs: Vec<C> =
            (0..cur.len()).map(|i| cur[i] + d[i] * (0.5 * self.dt) + (ex_cur[i] * 1.5 - ex_prev[i] * 0.5) * self.dt).collect();
        self.fact.solve(&rhs)
    }
}

struct Integrator<'a> {
    grid: &'a HalfLineGrid,
    nu: f64,
    nx: usize,
    gens: &'a [ModeGenerator],
    steppers: Vec<ImexStepper>,
    mean: MeanStepper,
    dt: f64,
}

impl<'a> Integrator<'a> {
    fn new(grid: &'a HalfLineGrid, nu: f64, gens: &'a [ModeGenerator], dt: f64) -> Result<Integrator<'a>> {
        let sq = nu.sqrt();
        let steppers = gens.par_iter().map(|g| ImexStepper::new(g, dt / sq, 0.0)).collect::<Result<Vec<_>>>()?;
        Ok(Integrator { grid, nu, nx: gens.len(), gens, steppers, mean: MeanStepper::new(grid, dt)?, dt })
    }

    fn state_of(&self, mean: &[C], ys: &[Vec<C>], time: f64) -> SimState {
        let nn = self.grid.n;
        let mut s = SimState::zeros(self.nx, nn);
        let mut u1 = vec![ZERO; nn];
        u1[1..nn - 1].copy_from_slice(mean);
        s.set_mode(0, VelocityMode { u1, u2: vec![ZERO; nn] });
        for (k, y) in ys.iter().enumerate() {
            s.set_mode(k as i64 + 1, self.gens[k].velocity(self.grid, y));
        }
        s.time = time;
        s
    }

    /// Explicit terms in each mode's own time variable: `−N₁₀` for the mean mode and
    /// `A_adv y − ν^{1/2} curl N` for mode `n ≥ 1`.
    fn explicit(&self, state: &SimState, ys: &[Vec<C>]) -> (Vec<C>, Vec<Vec<C>>) {
        let conv = convection(state, self.grid, self.nu);
        let nn = self.grid.n;
        let mean: Vec<C> = conv[&0].u1[1..nn - 1].iter().map(|z| -z).collect();
        let sq = self.nu.sqrt();
        let modes = (0..self.nx)
            .into_par_iter()
            .map(|k| {
                let c = self.gens[k].curl(self.grid, &conv[&(k as i64 + 1)]);
                let a = self.steppers[k].advection(&ys[k]);
                a.iter().zip(&c).map(|(a, c)| a - c * sq).collect()
            })
            .collect();
        (mean, modes)
    }

    /// Advective CFL number of a state for this step.
    fn cfl_number(&self, state: &SimState) -> f64 {
        let h = self.grid.nodes.windows(2).map(|p| p[1] - p[0]).fold(f64::INFINITY, f64::min);
        let inv = 1.0 / self.nu.sqrt();
        let mut u1 = 0.0f64;
        let mut u2 = 0.0f64;
        for v in state.modes.values() {
            u1 += v.u1.iter().map(|z| z.norm()).fold(0.0, f64::max);
            u2 += v.u2.iter().map(|z| z.norm()).fold(0.0, f64::max);
        }
        self.dt * (u1 * self.nx as f64 + u2 * inv / h)
    }
}

/// Semi-implicit integration of the perturbation equations from `a` to `min(T, δK/2)`.
///
/// Diffusion and the pressure projection are implicit (Crank–Nicolson with the wall-vorticity
/// multiplier), shear advection, stretching and the nonlinearity explicit (Adams–Bashforth 2).
/// The step is the smallest of the linear advective CFL bound, `(ν N_x²)⁻¹/4` and
/// `horizon/min_steps`; a step whose nonlinear CFL number exceeds the limit is rejected and the
/// step halved.
pub fn simulate(
    profile: &ShearProfile,
    a: &SimState,
    grid: &HalfLineGrid,
    nu: f64,
    z: &ZNormParams,
    opts: &SimOptions,
) -> Result<SimRun> {
    z.validate()?;
    if !(nu > 0.0) {
        return Err(Error::Config(format!("viscosity must be positive, got {nu}")));
    }
    let nx = a.nx();
    for (n, v) in &a.modes {
        grid.check_len(&v.u1)?;
        grid.check_len(&v.u2)?;
        if n.unsigned_abs() as usize > nx {
            return Err(Error::Config(format!("mode {n} beyond N_x = {nx}")));
        }
    }
    if a.modes.len() != 2 * nx + 1 {
        return Err(Error::Config(format!("initial state needs every mode |n| ≤ {nx}")));
    }
    let horizon = z.horizon();
    let sq = nu.sqrt();
    let samples = ProfileSamples::new(profile, grid);
    let gens: Vec<ModeGenerator> =
        (1..=nx as i64).into_par_iter().map(|n| ModeGenerator::new(&samples, nu, n, grid)).collect::<Result<_>>()?;
    let lin_cfl = gens.iter().map(|g| g.cfl_step() * sq).fold(f64::INFINITY, f64::min) * (opts.cfl / 0.5);
    let diff_bound = if nx > 0 { 0.25 / (nu * (nx * nx) as f64) } else { f64::INFINITY };
    let mut dt = lin_cfl.min(diff_bound).min(horizon / opts.min_steps.max(1) as f64);
    let steps_for = |dt: f64, remaining: f64| ((remaining / dt).ceil() as usize).max(1);

    let a_norm = x1_norm(a, grid, nu, z);
    let nn = grid.n;
    let mut mean: Vec<C> = a.modes[&0].u1[1..nn - 1].to_vec();
    let mut ys: Vec<Vec<C>> = gens
        .iter()
        .enumerate()
        .map(|(k, g)| g.project(&g.state_from_velocity(grid, &a.modes[&(k as i64 + 1)]).expect("lengths checked")))
        .collect();

    let mut history = vec![z_components(a, grid, nu, z, 0.0)];
    let mut t = 0.0;
    let mut steps = 0usize;
    let mut rejected = 0usize;
    let mut stopped = None;
    let mut sup_z = history[0].z_norm;

    'outer: while t < horizon * (1.0 - 1e-12) {
        // uniform step to the horizon at the current dt
        let n_steps = steps_for(dt, horizon - t);
        let h = (horizon - t) / n_steps as f64;
        let integ = Integrator::new(grid, nu, &gens, h)?;
        let state = integ.state_of(&mean, &ys, t);
        if integ.cfl_number(&state) > opts.cfl {
            rejected += 1;
            dt = 0.5 * h;
            continue;
        }
        // first step: Crank–Nicolson on the linear part, forward Euler on the nonlinearity
        let (ex_mean0, ex_modes0) = integ.explicit(&state, &ys);
        let conv0: Vec<Vec<C>> = (0..nx)
            .map(|k| ex_modes0[k].iter().zip(&integ.steppers[k].advection(&ys[k])).map(|(e, a)| e - a).collect())
            .collect();
        let mut prev_mean_ex = ex_mean0.clone();
        let mut prev_modes_ex = ex_modes0;
        let d = matvec(&integ.mean.d2, &mean);
        let rhs: Vec<C> = (0..nn - 2).map(|i| mean[i] + d[i] * (0.5 * h) + ex_mean0[i] * h).collect();
        mean = integ.mean.fact.solve(&rhs);
        ys = (0..nx).into_par_iter().map(|k| integ.steppers[k].first(&ys[k], Some(&conv0[k]))).collect();
        t += h;
        steps += 1;
        for s in 1..=n_steps {
            let state = integ.state_of(&mean, &ys, t);
            if s % opts.output_every.max(1) == 0 || s == n_steps {
                let e = z_components(&state, grid, nu, z, t);
                sup_z = sup_z.max(e.z_norm);
                history.push(e);
                if !e.z_norm.is_finite() || (a_norm > 0.0 && e.z_norm / a_norm > opts.ceiling) {
                    stopped = Some(format!("Z norm {:.3e} passed the ceiling at t = {t:.4e}", e.z_norm));
                    break 'outer;
                }
            }
            if s == n_steps {
                break;
            }
            if integ.cfl_number(&state) > opts.cfl {
                rejected += 1;
                dt = 0.5 * h;
                continue 'outer;
            }
            let (ex_mean, ex_modes) = integ.explicit(&state, &ys);
            mean = integ.mean.step(&mean, &ex_mean, &prev_mean_ex);
            ys = (0..nx).into_par_iter().map(|k| integ.steppers[k].ab2(&ys[k], &ex_modes[k], &prev_modes_ex[k])).collect();
            prev_mean_ex = ex_mean;
            prev_modes_ex = ex_modes;
            t += h;
            steps += 1;
        }
        dt = h;
        break;
    }
    let integ_state = {
        let mut s = SimState::zeros(nx, nn);
        let mut u1 = vec![ZERO; nn];
        u1[1..nn - 1].copy_from_slice(&mean);
        s.set_mode(0, VelocityMode { u1, u2: vec![ZERO; nn] });
        for (k, y) in ys.iter().enumerate() {
            s.set_mode(k as i64 + 1, gens[k].velocity(grid, y));
        }
        s.time = t;
        s.history = history;
        s
    };
    let fitted_c = if a_norm > 0.0 { sup_z / a_norm } else { 0.0 };
    Ok(SimRun {
        state: integ_state,
        a_norm,
        fitted_c,
        stable: stopped.is_none() && fitted_c <= opts.accept_c,
        steps,
        rejected_steps: rejected,
        final_dt: dt,
        stopped_early: stopped,
    })
}

/// Writes the history as CSV `(t, X-norm, Y-norm, grad-norm, Z-norm)`.
pub fn write_history_csv<W: std::io::Write>(out: W, history: &[HistoryEntry]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Io(std::io::Error::other(e.to_string()));
    w.write_record(["t", "x_norm", "y_norm", "grad_norm", "z_norm"]).map_err(io)?;
    for h in history {
        w.write_record(&[h.t, h.x_norm, h.y_norm, h.grad_norm, h.z_norm].map(|v| format!("{v:.12e}"))).map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

/// Relative difference between a run and the mode-wise linear evolution of its initial data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearConsistency {
    /// `(Σ_{n≠0} ‖u_n − e^{−t𝕃_n}a_n‖²)^{1/2} / (Σ_{n≠0} ‖e^{−t𝕃_n}a_n‖²)^{1/2}` at the horizon.
    pub rel_diff: f64,
    pub horizon: f64,
    pub steps: usize,
}

/// Runs [`simulate`] from `a` and compares every mode `n ≠ 0` at the horizon with the
/// Richardson-extrapolated timestep evolution of the linearized problem (step `dt_max` in
/// original time). For data of small amplitude the two agree up to the quadratic term.
pub fn linear_consistency(
    profile: &ShearProfile,
    a: &SimState,
    grid: &HalfLineGrid,
    nu: f64,
    z: &ZNormParams,
    opts: &SimOptions,
    dt_max: f64,
) -> Result<LinearConsistency> {
    let run = simulate(profile, a, grid, nu, z, opts)?;
    let sq = nu.sqrt();
    let samples = ProfileSamples::new(profile, grid);
    let t = run.state.time;
    let nx = a.nx() as i64;
    let sums = (1..=nx)
        .into_par_iter()
        .map(|n| -> Result<(f64, f64)> {
            let gen = ModeGenerator::new(&samples, nu, n, grid)?;
            let y0 = gen.project(&gen.state_from_velocity(grid, &a.modes[&n])?);
            let lin = gen.velocity(grid, &gen.timestep(&y0, t / sq, dt_max / sq, 0.0)?);
            let got = &run.state.modes[&n];
            let diff = VelocityMode {
                u1: got.u1.iter().zip(&lin.u1).map(|(p, q)| p - q).collect(),
                u2: got.u2.iter().zip(&lin.u2).map(|(p, q)| p - q).collect(),
            };
            Ok((diff.l2(grid).powi(2), lin.l2(grid).powi(2)))
        })
        .collect::<Result<Vec<_>>>()?;
    let (num, den) = sums.iter().fold((0.0, 0.0), |acc, s| (acc.0 + s.0, acc.1 + s.1));
    let rel_diff = if den > 0.0 { (num / den).sqrt() } else { num.sqrt() };
    Ok(LinearConsistency { rel_diff, horizon: t, steps: run.steps })
}
