//! Mode-wise Orr–Sommerfeld solves in the vorticity/stream-function companion form
//!
//! `−√ν(∂²−α²)w + iα((V−λ)w − V″φ) = F`, `(∂²−α²)φ = w`,
//!
//! under nonslip (`φ = ∂φ = 0`) or Navier-slip (`φ = w = 0`) wall conditions and decay
//! (`φ = ∂φ = 0` at the far end of the truncated grid). Also the Navier-slip splitting
//! `w = w₁ + w₂`, the inviscid Rayleigh problem, the Airy boundary-layer corrector and the
//! nonslip assembly `w = w_Na − ∂φ_Na(0) W_b`.

use std::f64::consts::PI;
use std::io::Write;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::grid::{apply, build_grid, HalfLineGrid, Mapping};
use crate::numerics::linalg::{CMat, Factored};
use crate::numerics::norms::{h1_pair, h1_pair_sup, l2, l2_pair, sup_norm};
use crate::profiles::ShearProfile;
use crate::report::EstimateReport;
use crate::specfun::{airy_scaled, xi_of};

type C = Complex64;

const I: C = C { re: 0.0, im: 1.0 };
const ZERO: C = C { re: 0.0, im: 0.0 };

/// The family of small constants `δ₀ ≥ δ₁ = δ₂ ≥ δ_*`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeltaFamily {
    pub delta0: f64,
    pub delta1: f64,
    pub delta2: f64,
    pub delta_star: f64,
}

impl DeltaFamily {
    /// Defaults derived from the profile: `δ₁ = δ₂ = δ₀/4`, `δ_* = δ₁/4`.
    pub fn from_profile(profile: &ShearProfile) -> DeltaFamily {
        DeltaFamily::from_delta0(profile.delta0)
    }

    pub fn from_delta0(delta0: f64) -> DeltaFamily {
        let delta1 = delta0 / 4.0;
        DeltaFamily { delta0, delta1, delta2: delta1, delta_star: delta1 / 4.0 }
    }
}

/// Parameter bundle for one Fourier mode and one spectral parameter.
///
/// Negative modes are reduced to `|n|` by conjugation: the problem at `(−n, μ)` is the complex
/// conjugate of the problem at `(n, conj μ)`, so `λ` is computed from `conj μ` when `n < 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeContext {
    pub nu: f64,
    pub n: i64,
    /// `ν^{1/2}|n|`.
    pub alpha: f64,
    pub mu: C,
    /// `iμ/(|n|ν^{1/2})`.
    pub lambda: C,
    /// `λ + iν^{1/2}α`.
    pub lambda_nu: C,
    pub gamma: f64,
    pub delta: f64,
    pub delta_family: DeltaFamily,
    /// `|n|^{1/3}(1+|n|^{1/3}|λ_ν|)^{1/2}`.
    #[serde(rename = "A")]
    pub a_scale: f64,
    /// `−λ_ν/V′(0)`.
    pub d_shift: C,
    /// `V′(0)`.
    pub wall_slope: f64,
    /// `Re μ ≥ ν^{1/2}|n|^γ/δ`.
    pub admissible: bool,
    /// Solves are allowed outside the admissible region when set.
    pub exploratory: bool,
}

impl ModeContext {
    /// Context from the spectral parameter `μ`.
    pub fn from_mu(
        profile: &ShearProfile,
        nu: f64,
        n: i64,
        mu: C,
        gamma: f64,
        delta: f64,
        family: DeltaFamily,
    ) -> Result<ModeContext> {
        if !(nu > 0.0) {
            return Err(Error::Config(format!("viscosity must be positive, got {nu}")));
        }
        if n == 0 {
            return Err(Error::Config("mode n = 0 has no Orr–Sommerfeld reduction".into()));
        }
        if !(2.0 / 3.0 - 1e-12..=1.0 + 1e-12).contains(&gamma) {
            return Err(Error::Config(format!("gamma must lie in [2/3, 1], got {gamma}")));
        }
        if !(delta > 0.0) {
            return Err(Error::Config(format!("delta must be positive, got {delta}")));
        }
        let na = n.unsigned_abs() as f64;
        let alpha = nu.sqrt() * na;
        // a negative mode is the complex conjugate of the positive one at conj(μ)
        let mu_eff = if n < 0 { mu.conj() } else { mu };
        let lambda = I * mu_eff / (na * nu.sqrt());
        let lambda_nu = lambda + I * nu.sqrt() * alpha;
        let wall_slope = profile.slope_at_wall();
        let a_scale = na.cbrt() * (1.0 + na.cbrt() * lambda_nu.norm()).sqrt();
        let d_shift = -lambda_nu / wall_slope;
        // relative slack so contexts placed exactly on the bound stay admissible
        let admissible = mu.re >= nu.sqrt() * na.powf(gamma) / delta * (1.0 - 1e-12);
        Ok(ModeContext {
            nu,
            n,
            alpha,
            mu,
            lambda,
            lambda_nu,
            gamma,
            delta,
            delta_family: family,
            a_scale,
            d_shift,
            wall_slope,
            admissible,
            exploratory: false,
        })
    }

    /// Context from `λ`, using `μ = −iαλ` (conjugated for negative modes, so that the stored
    /// `λ` is the given one).
    pub fn from_lambda(
        profile: &ShearProfile,
        nu: f64,
        n: i64,
        lambda: C,
        gamma: f64,
        delta: f64,
        family: DeltaFamily,
    ) -> Result<ModeContext> {
        let alpha = nu.sqrt() * n.unsigned_abs() as f64;
        let mu = -I * alpha * lambda;
        let mu = if n < 0 { mu.conj() } else { mu };
        ModeContext::from_mu(profile, nu, n, mu, gamma, delta, family)
    }

    /// Marks the context as exploratory so that solves skip the admissibility gate.
    pub fn exploratory(mut self) -> ModeContext {
        self.exploratory = true;
        self
    }

    pub fn lambda_r(&self) -> f64 {
        self.lambda.re
    }

    pub fn lambda_i(&self) -> f64 {
        self.lambda.im
    }

    /// `|n V′(0)|^{1/3}`, the inverse Airy length.
    pub fn airy_scale(&self) -> f64 {
        (self.n.unsigned_abs() as f64 * self.wall_slope).cbrt()
    }

    /// `ν^{1/2}|n|^γ/δ`.
    pub fn remu_threshold(&self) -> f64 {
        self.nu.sqrt() * (self.n.unsigned_abs() as f64).powf(self.gamma) / self.delta
    }

    /// Algebraic map with its clustering length tied to the wall-layer scale `1/A` and the
    /// far end tied to the decay rate `α`.
    pub fn default_mapping(&self) -> Mapping {
        let ell = (256.0 / self.a_scale).clamp(0.01, 1.0);
        Mapping::algebraic_for_decay(ell, self.alpha)
    }

    pub fn default_grid(&self, n_nodes: usize) -> Result<HalfLineGrid> {
        build_grid(n_nodes, self.default_mapping())
    }

    /// JSON snapshot for reports.
    pub fn snapshot(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("context serializes")
    }

    /// Whether two contexts describe the same mode problem.
    pub fn same_problem(&self, other: &ModeContext) -> bool {
        self.n == other.n && self.nu == other.nu && self.mu == other.mu
    }

    fn gate(&self) -> Result<()> {
        if self.admissible || self.exploratory {
            Ok(())
        } else {
            Err(Error::Hypothesis(format!(
                "Re μ = {:.4e} is below ν^{{1/2}}|n|^γ/δ = {:.4e}; mark the context exploratory to solve anyway",
                self.mu.re,
                self.remu_threshold()
            )))
        }
    }
}

/// Right-hand side of the mode problem.
#[derive(Debug, Clone, PartialEq)]
pub enum RhsSpec {
    /// `F = −∂F₁ + iαF₂`.
    Pair { f1: Vec<C>, f2: Vec<C> },
    /// `F = V′h`.
    Weighted { h: Vec<C> },
    /// `F` given directly.
    Raw { f: Vec<C> },
}

impl RhsSpec {
    pub fn zero(n: usize) -> RhsSpec {
        RhsSpec::Raw { f: vec![ZERO; n] }
    }

    /// The forcing `F` at the nodes.
    pub fn forcing(&self, grid: &HalfLineGrid, alpha: f64, vprime: &[f64]) -> Result<Vec<C>> {
        match self {
            RhsSpec::Pair { f1, f2 } => {
                grid.check_len(f1)?;
                grid.check_len(f2)?;
                let d = grid.dy(f1);
                Ok(d.iter().zip(f2).map(|(a, b)| -a + I * alpha * b).collect())
            }
            RhsSpec::Weighted { h } => {
                grid.check_len(h)?;
                Ok(h.iter().zip(vprime).map(|(a, v)| a * v).collect())
            }
            RhsSpec::Raw { f } => {
                grid.check_len(f)?;
                Ok(f.clone())
            }
        }
    }

    /// `‖(F₁,F₂)‖`, `‖h‖` or `‖F‖` according to the variant.
    pub fn data_norm(&self, grid: &HalfLineGrid) -> f64 {
        match self {
            RhsSpec::Pair { f1, f2 } => l2_pair(grid, f1, f2),
            RhsSpec::Weighted { h } => l2(grid, h),
            RhsSpec::Raw { f } => l2(grid, f),
        }
    }

    fn check_finite(&self) -> Result<()> {
        let ok = |v: &[C]| v.iter().all(|z| z.re.is_finite() && z.im.is_finite());
        let fine = match self {
            RhsSpec::Pair { f1, f2 } => ok(f1) && ok(f2),
            RhsSpec::Weighted { h } => ok(h),
            RhsSpec::Raw { f } => ok(f),
        };
        if fine {
            Ok(())
        } else {
            Err(Error::Domain("right-hand side has non-finite entries".into()))
        }
    }
}

/// Wall condition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Boundary {
    Nonslip,
    Navier,
}

/// Which interior operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OsVariant {
    /// The Orr–Sommerfeld operator itself.
    Standard,
    /// The operator of the first splitting piece, which carries the extra `iαV′∂φ` term.
    Split,
}

/// Profile values at the grid nodes.
#[derive(Debug, Clone)]
pub struct ProfileSamples {
    pub v: Vec<f64>,
    pub vp: Vec<f64>,
    pub vpp: Vec<f64>,
}

impl ProfileSamples {
    pub fn new(profile: &ShearProfile, grid: &HalfLineGrid) -> ProfileSamples {
        let [v, vp, vpp] = profile.sample(&grid.nodes);
        ProfileSamples { v, vp, vpp }
    }
}

/// Factored collocation operator for one `(ctx, grid, boundary, variant)`, reusable for
/// many right-hand sides.
pub struct OsOperator {
    pub boundary: Boundary,
    pub variant: OsVariant,
    n: usize,
    interior: CMat,
    fact: Factored,
    row_scale: Vec<f64>,
    scaled: CMat,
}

impl OsOperator {
    pub fn new(
        samples: &ProfileSamples,
        ctx: &ModeContext,
        grid: &HalfLineGrid,
        boundary: Boundary,
        variant: OsVariant,
    ) -> Result<OsOperator> {
        let n = grid.n;
        let sq = ctx.nu.sqrt();
        let a = ctx.alpha;
        let ia = I * a;
        let mut m = CMat::zeros(2 * n, 2 * n);
        for i in 0..n {
            for j in 0..n {
                m[(i, n + j)] = C::new(-sq * grid.d2[(i, j)], 0.0);
                m[(n + i, j)] = C::new(grid.d2[(i, j)], 0.0);
            }
            m[(i, n + i)] += sq * a * a + ia * (samples.v[i] - ctx.lambda);
            m[(i, i)] += -ia * samples.vpp[i];
            if variant == OsVariant::Split {
                for j in 0..n {
                    m[(i, j)] += ia * samples.vp[i] * grid.d1[(i, j)];
                }
            }
            m[(n + i, i)] -= a * a;
            m[(n + i, n + i)] = C::new(-1.0, 0.0);
        }
        let interior = m.clone();
        let zero_row = |m: &mut CMat, r: usize| {
            for j in 0..2 * n {
                m[(r, j)] = ZERO;
            }
        };
        zero_row(&mut m, n);
        m[(n, 0)] = C::new(1.0, 0.0);
        zero_row(&mut m, 2 * n - 1);
        m[(2 * n - 1, n - 1)] = C::new(1.0, 0.0);
        // far end: w(L) = 0 rather than ∂φ(L) = 0, which would force a spurious layer at L
        zero_row(&mut m, n - 1);
        m[(n - 1, 2 * n - 1)] = C::new(1.0, 0.0);
        zero_row(&mut m, 0);
        match boundary {
            Boundary::Nonslip => {
                for j in 0..n {
                    m[(0, j)] = C::new(grid.d1[(0, j)], 0.0);
                }
            }
            Boundary::Navier => m[(0, n)] = C::new(1.0, 0.0),
        }
        let row_scale: Vec<f64> = (0..2 * n)
            .map(|r| {
                let mx = (0..2 * n).map(|c| m[(r, c)].norm()).fold(0.0, f64::max);
                if mx > 0.0 {
                    1.0 / mx
                } else {
                    1.0
                }
            })
            .collect();
        for r in 0..2 * n {
            for c in 0..2 * n {
                m[(r, c)] *= row_scale[r];
            }
        }
        let fact = Factored::new(m.clone())?;
        Ok(OsOperator { boundary, variant, n, interior, fact, row_scale, scaled: m })
    }

    /// The row-equilibrated collocation matrix (boundary rows included).
    pub fn equilibrated_matrix(&self) -> &CMat {
        &self.scaled
    }

    /// Solve for `(φ, w)` given the forcing `F` at the nodes.
    pub fn solve_forcing(&self, f: &[C]) -> (Vec<C>, Vec<C>) {
        let n = self.n;
        let mut b = vec![ZERO; 2 * n];
        b[1..n - 1].copy_from_slice(&f[1..n - 1]);
        for (r, s) in b.iter_mut().zip(&self.row_scale) {
            *r *= s;
        }
        let x = self.fact.solve(&b);
        (x[..n].to_vec(), x[n..].to_vec())
    }

    /// Solve for many forcings at once (columns of `f`); returns `(φ, w)` column blocks.
    pub fn solve_forcing_matrix(&self, f: &CMat) -> (CMat, CMat) {
        let n = self.n;
        let k = f.ncols();
        let mut b = CMat::zeros(2 * n, k);
        for c in 0..k {
            for r in 1..n - 1 {
                b[(r, c)] = f[(r, c)] * self.row_scale[r];
            }
        }
        let x = self.fact.solve_mat(&b);
        (x.rows(0, n).into_owned(), x.rows(n, n).into_owned())
    }

    /// Interior residual of both equations in the grid `L²` norm.
    pub fn residual(&self, grid: &HalfLineGrid, phi: &[C], w: &[C], f: &[C]) -> f64 {
        let n = self.n;
        let mut x = phi.to_vec();
        x.extend_from_slice(w);
        let ax = &self.interior * nalgebra::DVector::from_vec(x);
        let mut rw = vec![ZERO; n];
        let mut rp = vec![ZERO; n];
        for i in 1..n - 1 {
            rw[i] = ax[i] - f[i];
            rp[i] = ax[n + i];
        }
        l2_pair(grid, &rw, &rp)
    }
}

/// Norm summaries of a solution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolutionNorms {
    /// `‖(∂φ, αφ)‖_{L²}`.
    pub grad_pair: f64,
    pub w_l2: f64,
    pub phi_l2: f64,
    /// `‖∂φ‖_{L^∞}`.
    pub dphi_sup: f64,
    /// `‖(∂φ, αφ)‖_{L^∞}`.
    pub velocity_sup: f64,
}

impl SolutionNorms {
    pub fn compute(grid: &HalfLineGrid, phi: &[C], w: &[C], alpha: f64) -> SolutionNorms {
        let d = grid.dy(phi);
        SolutionNorms {
            grad_pair: h1_pair(grid, phi, alpha),
            w_l2: l2(grid, w),
            phi_l2: l2(grid, phi),
            dphi_sup: sup_norm(grid, &[&d]),
            velocity_sup: h1_pair_sup(grid, phi, alpha),
        }
    }
}

/// Wall data `(φ(0), ∂φ(0), w(0))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WallValues {
    pub phi0: C,
    pub dphi0: C,
    pub w0: C,
}

/// The two pieces of the Navier-slip splitting.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub phi1: Vec<C>,
    pub w1: Vec<C>,
    pub phi2: Vec<C>,
    pub w2: Vec<C>,
    /// `h = iα∂φ₁`, the datum of the second piece.
    pub h: Vec<C>,
    /// `max|w − w₁ − w₂| / max|w|`.
    pub identity_error: f64,
}

/// Collocation solution of a mode problem.
#[derive(Debug, Clone, PartialEq)]
pub struct OSSolution {
    pub phi: Vec<C>,
    pub w: Vec<C>,
    pub boundary: WallValues,
    pub residual_norm: f64,
    pub norms: SolutionNorms,
    pub context: ModeContext,
    pub wall_condition: Boundary,
    pub decomposition: Option<Decomposition>,
    /// At least 12 nodes inside the Airy layer `Y ≤ |nV′(0)|^{−1/3}`.
    pub resolved: bool,
}

impl OSSolution {
    fn assemble(
        grid: &HalfLineGrid,
        ctx: &ModeContext,
        phi: Vec<C>,
        w: Vec<C>,
        residual_norm: f64,
        wall: Boundary,
    ) -> OSSolution {
        let d = grid.dy(&phi);
        let boundary = WallValues { phi0: phi[0], dphi0: d[0], w0: w[0] };
        let norms = SolutionNorms::compute(grid, &phi, &w, ctx.alpha);
        OSSolution {
            phi,
            w,
            boundary,
            residual_norm,
            norms,
            context: ctx.clone(),
            wall_condition: wall,
            decomposition: None,
            resolved: layer_resolved(grid, ctx),
        }
    }

    /// Stream-function derivative at the nodes.
    pub fn dphi(&self, grid: &HalfLineGrid) -> Vec<C> {
        grid.dy(&self.phi)
    }
}

fn layer_resolved(grid: &HalfLineGrid, ctx: &ModeContext) -> bool {
    grid.nodes_below(1.0 / ctx.airy_scale()) >= 12
}

/// Solve a mode problem with a prebuilt operator.
pub fn solve_with(
    op: &OsOperator,
    samples: &ProfileSamples,
    ctx: &ModeContext,
    rhs: &RhsSpec,
    grid: &HalfLineGrid,
) -> Result<OSSolution> {
    rhs.check_finite()?;
    let f = rhs.forcing(grid, ctx.alpha, &samples.vp)?;
    let (phi, w) = op.solve_forcing(&f);
    let res = op.residual(grid, &phi, &w, &f);
    Ok(OSSolution::assemble(grid, ctx, phi, w, res, op.boundary))
}

/// Direct nonslip solve.
pub fn solve_os_nonslip(
    profile: &ShearProfile,
    ctx: &ModeContext,
    rhs: &RhsSpec,
    grid: &HalfLineGrid,
) -> Result<OSSolution> {
    ctx.gate()?;
    let samples = ProfileSamples::new(profile, grid);
    let op = OsOperator::new(&samples, ctx, grid, Boundary::Nonslip, OsVariant::Standard)?;
    solve_with(&op, &samples, ctx, rhs, grid)
}

/// Both operators of the Navier-slip problem, factored once.
pub struct NavierSolver {
    pub samples: ProfileSamples,
    pub full: OsOperator,
    pub split: OsOperator,
}

impl NavierSolver {
    pub fn new(profile: &ShearProfile, ctx: &ModeContext, grid: &HalfLineGrid) -> Result<NavierSolver> {
        ctx.gate()?;
        let samples = ProfileSamples::new(profile, grid);
        let full = OsOperator::new(&samples, ctx, grid, Boundary::Navier, OsVariant::Standard)?;
        let split = OsOperator::new(&samples, ctx, grid, Boundary::Navier, OsVariant::Split)?;
        Ok(NavierSolver { samples, full, split })
    }

    /// Full solve plus the splitting `w = w₁ + w₂`.
    pub fn solve(&self, ctx: &ModeContext, rhs: &RhsSpec, grid: &HalfLineGrid) -> Result<OSSolution> {
        let mut sol = solve_with(&self.full, &self.samples, ctx, rhs, grid)?;
        let f = rhs.forcing(grid, ctx.alpha, &self.samples.vp)?;
        let (phi1, w1) = self.split.solve_forcing(&f);
        let h: Vec<C> = grid.dy(&phi1).iter().map(|z| I * ctx.alpha * z).collect();
        let f2: Vec<C> = h.iter().zip(&self.samples.vp).map(|(a, v)| a * v).collect();
        let (phi2, w2) = self.full.solve_forcing(&f2);
        let wmax = sol.w.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let emax = (0..grid.n).map(|i| (sol.w[i] - w1[i] - w2[i]).norm()).fold(0.0, f64::max);
        let identity_error = if wmax > 0.0 { emax / wmax } else { emax };
        sol.decomposition = Some(Decomposition { phi1, w1, phi2, w2, h, identity_error });
        Ok(sol)
    }

    /// Full solve only (no splitting).
    pub fn solve_plain(&self, ctx: &ModeContext, rhs: &RhsSpec, grid: &HalfLineGrid) -> Result<OSSolution> {
        solve_with(&self.full, &self.samples, ctx, rhs, grid)
    }
}

/// Navier-slip solve with the splitting pieces.
pub fn solve_os_navier(
    profile: &ShearProfile,
    ctx: &ModeContext,
    rhs: &RhsSpec,
    grid: &HalfLineGrid,
) -> Result<OSSolution> {
    NavierSolver::new(profile, ctx, grid)?.solve(ctx, rhs, grid)
}

/// Dirichlet solve of `(∂²−α²)φ = w` with `φ(0) = φ(L) = 0`.
pub fn stream_from_vorticity(grid: &HalfLineGrid, alpha: f64, w: &[C]) -> Result<Vec<C>> {
    grid.check_len(w)?;
    let n = grid.n;
    let mut m = DMatrix::<f64>::zeros(n, n);
    for i in 1..n - 1 {
        for j in 0..n {
            m[(i, j)] = grid.d2[(i, j)];
        }
        m[(i, i)] -= alpha * alpha;
    }
    m[(0, 0)] = 1.0;
    m[(n - 1, n - 1)] = 1.0;
    let lu = m.lu();
    let solve = |part: Vec<f64>| -> Result<Vec<f64>> {
        lu.solve(&nalgebra::DVector::from_vec(part))
            .map(|x| x.iter().copied().collect())
            .ok_or_else(|| Error::NearSingular { sigma_min: 0.0, op_norm: 1.0 })
    };
    let mut re: Vec<f64> = w.iter().map(|z| z.re).collect();
    let mut im: Vec<f64> = w.iter().map(|z| z.im).collect();
    re[0] = 0.0;
    re[n - 1] = 0.0;
    im[0] = 0.0;
    im[n - 1] = 0.0;
    let (a, b) = (solve(re)?, solve(im)?);
    Ok(a.into_iter().zip(b).map(|(x, y)| C::new(x, y)).collect())
}

/// `∫₀^L w e^{−αY} dY`, the wall flux of the stream function.
pub fn wall_flux(grid: &HalfLineGrid, alpha: f64, w: &[C]) -> C {
    let g: Vec<C> = w.iter().zip(&grid.nodes).map(|(z, &y)| z * (-alpha * y).exp()).collect();
    grid.integrate(&g)
}

/// Rayleigh solve with its estimate report.
#[derive(Debug, Clone)]
pub struct RayleighSolution {
    pub solution: OSSolution,
    pub report: EstimateReport,
}

/// Inviscid problem `(V−λ)(∂²−α²)φ − V″φ = V′h₁ + ∂h₂ + iαh₃`, `φ(0) = 0`, decay.
pub fn solve_rayleigh(
    profile: &ShearProfile,
    ctx: &ModeContext,
    h1: &[C],
    h2: &[C],
    h3: &[C],
    grid: &HalfLineGrid,
) -> Result<RayleighSolution> {
    if !(ctx.lambda_i() > 0.0) {
        return Err(Error::Domain(format!(
            "Rayleigh solve needs Im λ > 0 (critical layer on the real axis), got {}",
            ctx.lambda_i()
        )));
    }
    grid.check_len(h1)?;
    grid.check_len(h2)?;
    grid.check_len(h3)?;
    let s = ProfileSamples::new(profile, grid);
    let n = grid.n;
    let a = ctx.alpha;
    let mut m = CMat::zeros(n, n);
    let mut interior = CMat::zeros(n, n);
    for i in 0..n {
        let c = s.v[i] - ctx.lambda;
        for j in 0..n {
            interior[(i, j)] = c * grid.d2[(i, j)];
        }
        interior[(i, i)] -= c * a * a + s.vpp[i];
    }
    m.copy_from(&interior);
    for j in 0..n {
        m[(0, j)] = ZERO;
        m[(n - 1, j)] = ZERO;
    }
    m[(0, 0)] = C::new(1.0, 0.0);
    m[(n - 1, n - 1)] = C::new(1.0, 0.0);
    let d2h = grid.dy(h2);
    let rhs: Vec<C> = (0..n).map(|i| s.vp[i] * h1[i] + d2h[i] + I * a * h3[i]).collect();
    let mut b = rhs.clone();
    b[0] = ZERO;
    b[n - 1] = ZERO;
    let fact = Factored::new(m)?;
    let phi = fact.solve(&b);
    let ax = crate::numerics::linalg::matvec(&interior, &phi);
    let mut r = vec![ZERO; n];
    for i in 1..n - 1 {
        r[i] = ax[i] - rhs[i];
    }
    let w: Vec<C> = grid.dyy(&phi).iter().zip(&phi).map(|(d, p)| d - p * a * a).collect();
    let solution = OSSolution::assemble(grid, ctx, phi, w, l2(grid, &r), Boundary::Navier);
    let li = ctx.lambda_i();
    let rhs_shape = l2(grid, h1) / li + l2_pair(grid, h2, h3) / (li * li);
    let report = EstimateReport::new("GMMray1", solution.norms.grad_pair, rhs_shape, ctx.snapshot(), n);
    Ok(RayleighSolution { solution, report })
}

/// How the right-hand side of the corrector error problem is fed to the solver.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CorrectorForm {
    /// `−∂F₁₁ + iαF₁₂` with `F₁₁, F₁₂` built from `Φ_a`.
    Divergence,
    /// `−iα(V − V′(0)Y)W_a + iαV″Φ_a` directly.
    Raw,
}

/// Airy boundary-layer corrector and its normalization.
#[derive(Debug, Clone)]
pub struct CorrectorBundle {
    pub w_a: Vec<C>,
    pub phi_a: Vec<C>,
    pub w_e: Vec<C>,
    pub phi_e: Vec<C>,
    pub w: Vec<C>,
    pub phi: Vec<C>,
    /// `∂Φ(0)` from the collocation derivative.
    pub j: C,
    /// `−∫ W e^{−αY}` by quadrature.
    pub j_quadrature: C,
    pub w_b: Vec<C>,
    pub phi_b: Vec<C>,
    /// The scale `A`.
    pub a_scale: f64,
    pub context: ModeContext,
    /// Data of the divergence form, `(F₁₁, F₁₂)`.
    pub f11: Vec<C>,
    pub f12: Vec<C>,
    /// `‖W_e^{div} − W_e^{raw}‖ / ‖W_e^{div}‖` when both forms were solved.
    pub form_discrepancy: Option<f64>,
    /// `L²` residual of `W_a` in its defining equation, with `∂²W_a` from the exact `∂W_a`.
    pub wa_residual: f64,
}

/// `W_a` and `∂W_a` at the nodes.
pub fn airy_layer(ctx: &ModeContext, grid: &HalfLineGrid) -> Result<(Vec<C>, Vec<C>)> {
    if !(ctx.wall_slope > 0.0) {
        return Err(Error::Hypothesis(format!("V′(0) = {} must be positive", ctx.wall_slope)));
    }
    let kappa = ctx.airy_scale();
    let rot = C::from_polar(1.0, PI / 6.0);
    let z0 = rot * kappa * ctx.d_shift;
    let (s0, _) = airy_scaled(z0)?;
    let xi0 = xi_of(z0);
    let mut wa = Vec::with_capacity(grid.n);
    let mut dwa = Vec::with_capacity(grid.n);
    for &y in &grid.nodes {
        let z = rot * kappa * (y + ctx.d_shift);
        let (s, sp) = airy_scaled(z)?;
        let e = (xi0 - xi_of(z)).exp();
        let e = if e.re.is_finite() && e.im.is_finite() { e } else { ZERO };
        wa.push(s / s0 * e);
        dwa.push(rot * kappa * sp / s0 * e);
    }
    wa[0] = C::new(1.0, 0.0);
    Ok((wa, dwa))
}

/// Corrector in the divergence form, cross-checked against the raw form.
pub fn build_corrector(profile: &ShearProfile, ctx: &ModeContext, grid: &HalfLineGrid) -> Result<CorrectorBundle> {
    let solver = NavierSolver::new(profile, ctx, grid)?;
    build_corrector_with(profile, ctx, grid, &solver, CorrectorForm::Divergence, true)
}

/// Corrector with a prebuilt Navier solver, choosing the form and whether to cross-check.
pub fn build_corrector_with(
    profile: &ShearProfile,
    ctx: &ModeContext,
    grid: &HalfLineGrid,
    solver: &NavierSolver,
    form: CorrectorForm,
    cross_check: bool,
) -> Result<CorrectorBundle> {
    if !(ctx.lambda_i() > 0.0) {
        return Err(Error::Hypothesis(format!("corrector needs Im λ > 0, got {}", ctx.lambda_i())));
    }
    let _ = profile;
    let a = ctx.alpha;
    let (w_a, dwa) = airy_layer(ctx, grid)?;
    let s = &solver.samples;
    let slope = ctx.wall_slope;
    // defining equation −√ν(∂²−α²)W_a + iα(V′(0)Y − λ)W_a = 0
    let d2wa = grid.dy(&dwa);
    let res: Vec<C> = (0..grid.n)
        .map(|i| {
            let y = grid.nodes[i];
            -ctx.nu.sqrt() * (d2wa[i] - a * a * w_a[i]) + I * a * (slope * y - ctx.lambda) * w_a[i]
        })
        .collect();
    let wa_residual = l2(grid, &res);
    let phi_a = stream_from_vorticity(grid, a, &w_a)?;
    let dphi_a = grid.dy(&phi_a);
    let shear_gap: Vec<f64> = (0..grid.n).map(|i| s.v[i] - slope * grid.nodes[i]).collect();
    let f11: Vec<C> = (0..grid.n)
        .map(|i| I * a * (shear_gap[i] * dphi_a[i] - (s.vp[i] - slope) * phi_a[i]))
        .collect();
    let f12: Vec<C> = (0..grid.n).map(|i| a * a * shear_gap[i] * phi_a[i]).collect();
    let raw: Vec<C> = (0..grid.n)
        .map(|i| -I * a * shear_gap[i] * w_a[i] + I * a * s.vpp[i] * phi_a[i])
        .collect();
    let div_rhs = RhsSpec::Pair { f1: f11.clone(), f2: f12.clone() };
    let raw_rhs = RhsSpec::Raw { f: raw };
    let (primary, secondary) = match form {
        CorrectorForm::Divergence => (&div_rhs, &raw_rhs),
        CorrectorForm::Raw => (&raw_rhs, &div_rhs),
    };
    let e = solver.solve_plain(ctx, primary, grid)?;
    let form_discrepancy = if cross_check {
        let other = solver.solve_plain(ctx, secondary, grid)?;
        let diff: Vec<C> = e.w.iter().zip(&other.w).map(|(x, y)| x - y).collect();
        let base = l2(grid, &e.w).max(1e-300);
        Some(l2(grid, &diff) / base)
    } else {
        None
    };
    let w: Vec<C> = w_a.iter().zip(&e.w).map(|(x, y)| x + y).collect();
    let phi: Vec<C> = phi_a.iter().zip(&e.phi).map(|(x, y)| x + y).collect();
    let j = grid.dy(&phi)[0];
    let j_quadrature = -wall_flux(grid, a, &w);
    let threshold = 1e-3 / ctx.a_scale;
    if j.norm() < threshold {
        return Err(Error::DegenerateCorrector { j_abs: j.norm(), threshold });
    }
    let w_b = w.iter().map(|z| z / j).collect();
    let phi_b = phi.iter().map(|z| z / j).collect();
    Ok(CorrectorBundle {
        w_a,
        phi_a,
        w_e: e.w,
        phi_e: e.phi,
        w,
        phi,
        j,
        j_quadrature,
        w_b,
        phi_b,
        a_scale: ctx.a_scale,
        context: ctx.clone(),
        f11,
        f12,
        form_discrepancy,
        wa_residual,
    })
}

/// Nonslip solution from a Navier-slip one: `w = w_Na − ∂φ_Na(0) W_b`, `φ = φ_Na − ∂φ_Na(0) Φ_b`.
pub fn assemble_nonslip(navier: &OSSolution, bundle: &CorrectorBundle, grid: &HalfLineGrid) -> Result<OSSolution> {
    if !navier.context.same_problem(&bundle.context) {
        return Err(Error::Config("Navier solution and corrector belong to different mode contexts".into()));
    }
    if navier.phi.len() != bundle.w_b.len() || navier.phi.len() != grid.n {
        return Err(Error::Config("Navier solution, corrector and grid have different sizes".into()));
    }
    let c = navier.boundary.dphi0;
    let w: Vec<C> = navier.w.iter().zip(&bundle.w_b).map(|(a, b)| a - c * b).collect();
    let phi: Vec<C> = navier.phi.iter().zip(&bundle.phi_b).map(|(a, b)| a - c * b).collect();
    let mut out = OSSolution::assemble(grid, &navier.context, phi, w, navier.residual_norm, Boundary::Nonslip);
    out.decomposition = None;
    Ok(out)
}

/// CSV export with columns `Y, Re φ, Im φ, Re w, Im w`.
pub fn write_solution_csv<W: Write>(out: &mut W, grid: &HalfLineGrid, sol: &OSSolution) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(["Y", "re_phi", "im_phi", "re_w", "im_w"]).map_err(csv_err)?;
    for i in 0..grid.n {
        wtr.write_record(&[
            format!("{:.17e}", grid.nodes[i]),
            format!("{:.17e}", sol.phi[i].re),
            format!("{:.17e}", sol.phi[i].im),
            format!("{:.17e}", sol.w[i].re),
            format!("{:.17e}", sol.w[i].im),
        ])
        .map_err(csv_err)?;
    }
    wtr.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::new(std::io::ErrorKind::Other, e.to_string()))
}

/// Apply the continuous mode operator to a given stream function (for manufactured solutions):
/// returns `F = −√ν(∂²−α²)²φ + iα((V−λ)(∂²−α²)φ − V″φ)` using the grid's fourth-derivative matrix.
pub fn apply_os(profile: &ShearProfile, ctx: &ModeContext, grid: &HalfLineGrid, phi: &[C]) -> Vec<C> {
    let s = ProfileSamples::new(profile, grid);
    let a = ctx.alpha;
    let d2 = grid.dyy(phi);
    let d4 = apply(&grid.d4, phi);
    (0..grid.n)
        .map(|i| {
            let lap = d2[i] - a * a * phi[i];
            let lap2 = d4[i] - 2.0 * a * a * d2[i] + a.powi(4) * phi[i];
            -ctx.nu.sqrt() * lap2 + I * a * ((s.v[i] - ctx.lambda) * lap - s.vpp[i] * phi[i])
        })
        .collect()
}
