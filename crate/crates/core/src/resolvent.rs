//! Frequency regimes, the spectral regions where the mode resolvent is controlled, discrete
//! resolvent operator norms, and sweep verification of the mode-wise estimates with fitted
//! constants.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::numerics::grid::HalfLineGrid;
use crate::numerics::linalg::CMat;
use crate::numerics::norms::{h1_pair, l2, l2_pair, sup_norm, weighted_l2, WeightSpec};
use crate::numerics::random::{mix_seed, smooth_draw, SmoothDraw};
use crate::ossolve::{
    build_corrector_with, solve_rayleigh, solve_with, Boundary, CorrectorForm, DeltaFamily, ModeContext,
    NavierSolver, OsOperator, OsVariant, ProfileSamples, RhsSpec,
};
use crate::profiles::ShearProfile;
use crate::report::{summarize, EstimateReport, SweepSummary};

type C = Complex64;

const I: C = C { re: 0.0, im: 1.0 };

/// Default sector angle, `π/2 + 0.1`.
pub const DEFAULT_THETA: f64 = PI / 2.0 + 0.1;

/// Cut-off for the `1/V′` weight: only `Y` with `V′(Y) ≥ V_CUTOFF · V′(0)` enter the norm.
pub const V_CUTOFF: f64 = 1e-8;

/// Range of the length scale of random draws; the upper end keeps the Laguerre tails below
/// `1e-10` at the shortest truncation length `L = 40`.
pub const DRAW_SCALES: (f64, f64) = (0.2, 1.0);

/// Relative tolerance for "on the line `Re μ = |n|^γ ν^{1/2}/δ`".
const LINE_RTOL: f64 = 1e-9;

/// Frequency regime of a mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FrequencyRegime {
    Low,
    MiddleSmall,
    MiddleLarge,
    High,
}

impl FrequencyRegime {
    pub fn is_middle(self) -> bool {
        matches!(self, FrequencyRegime::MiddleSmall | FrequencyRegime::MiddleLarge)
    }
}

/// Region of the spectral plane.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpectralTag {
    /// The sector `S_{ν,n}(θ)`.
    SSector,
    /// The bounded set `O_{ν,n}`.
    ODisc,
    /// `O_{ν,n}` on the line `Re μ = |n|^γν^{1/2}/δ` with `Re μ + n²ν^{3/2} ≤ δ₂⁻¹`.
    OLine,
    /// `Re μ + n²ν^{3/2} ≥ δ₂⁻¹` with `|n| ≥ δ₀⁻¹`.
    ImLarge,
    /// None of the above.
    Exploratory,
}

/// Frequency regime plus spectral tags.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegimeTag {
    pub frequency: FrequencyRegime,
    pub spectral: Vec<SpectralTag>,
}

/// Frequency regime for `(ν, n, γ)`; boundary ties go to the lower regime.
pub fn classify(profile: &ShearProfile, nu: f64, n: i64, gamma: f64) -> Result<FrequencyRegime> {
    if !(nu > 0.0) {
        return Err(Error::Config(format!("viscosity must be positive, got {nu}")));
    }
    if !(2.0 / 3.0 - 1e-12..=1.0 + 1e-12).contains(&gamma) {
        return Err(Error::Config(format!("gamma must lie in [2/3, 1], got {gamma}")));
    }
    Ok(classify_with(profile.delta0, nu, n, gamma))
}

pub(crate) fn classify_with(delta0: f64, nu: f64, n: i64, gamma: f64) -> FrequencyRegime {
    let na = n.unsigned_abs() as f64;
    if na <= 1.0 / delta0 {
        FrequencyRegime::Low
    } else if na > nu.powf(-0.75) / delta0 {
        FrequencyRegime::High
    } else if na.powf(gamma) * nu.sqrt() < 1.0 {
        FrequencyRegime::MiddleSmall
    } else {
        FrequencyRegime::MiddleLarge
    }
}

/// Regime and spectral tags of a context.
pub fn regime_of(ctx: &ModeContext, theta: f64) -> RegimeTag {
    let frequency = classify_with(ctx.delta_family.delta0, ctx.nu, ctx.n, ctx.gamma);
    let mut spectral = in_resolvent_region(ctx, theta);
    if spectral.is_empty() {
        spectral.push(SpectralTag::Exploratory);
    }
    RegimeTag { frequency, spectral }
}

/// All spectral regions containing `μ` (empty when none applies).
pub fn in_resolvent_region(ctx: &ModeContext, theta: f64) -> Vec<SpectralTag> {
    let f = &ctx.delta_family;
    let na = ctx.n.unsigned_abs() as f64;
    let sq = ctx.nu.sqrt();
    let mu = ctx.mu;
    let t = theta.tan();
    let mut tags = Vec::new();
    let s_line = t * mu.re + (sq * na + t.abs() * na.powf(ctx.gamma) * sq) / f.delta1;
    if mu.im.abs() >= s_line && mu.norm() >= sq * na / f.delta1 {
        tags.push(SpectralTag::SSector);
    }
    let threshold = ctx.remu_threshold();
    let in_o = mu.norm() <= na * sq / f.delta1 && mu.re >= threshold;
    if in_o {
        tags.push(SpectralTag::ODisc);
        let on_line = (mu.re - threshold).abs() <= LINE_RTOL * threshold;
        if on_line && mu.re + na * na * ctx.nu.powf(1.5) <= 1.0 / f.delta2 {
            tags.push(SpectralTag::OLine);
        }
    }
    if na >= 1.0 / f.delta0 && mu.re + na * na * ctx.nu.powf(1.5) >= 1.0 / f.delta2 {
        tags.push(SpectralTag::ImLarge);
    }
    tags
}

/// Output functional of a resolvent norm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NormTarget {
    /// `‖v‖ = ‖(∂φ, αφ)‖`.
    Velocity,
    /// `‖∇v‖ = (‖∂²φ‖² + 2α²‖∂φ‖² + α⁴‖φ‖²)^{1/2}`.
    Gradient,
    /// `‖ρ^{1/2} w‖` for the given weight.
    WeightedCurl(WeightSpec),
}

/// `‖∇v‖` of the velocity of a stream function.
pub fn gradient_norm(grid: &HalfLineGrid, phi: &[C], alpha: f64) -> f64 {
    let d1 = grid.dy(phi);
    let d2 = grid.dyy(phi);
    let a2 = alpha * alpha;
    (l2(grid, &d2).powi(2) + 2.0 * a2 * l2(grid, &d1).powi(2) + a2 * a2 * l2(grid, phi).powi(2)).sqrt()
}

/// Largest singular value of the discrete nonslip solution map `(f₁, f₂) ↦ target`, measured in
/// quadrature-weighted `L²` on both sides.
pub fn resolvent_norm(profile: &ShearProfile, ctx: &ModeContext, grid: &HalfLineGrid, target: NormTarget) -> Result<f64> {
    let n = grid.n;
    let a = ctx.alpha;
    let samples = ProfileSamples::new(profile, grid);
    let op = OsOperator::new(&samples, ctx, grid, Boundary::Nonslip, OsVariant::Standard)?;
    let sw: Vec<f64> = grid.weights.iter().map(|w| w.sqrt()).collect();
    // forcing F = −∂f₁ + iαf₂ for unit coordinate vectors in the weighted input space
    let mut f = CMat::zeros(n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            f[(i, j)] = C::new(-grid.d1[(i, j)] / sw[j], 0.0);
        }
        f[(i, n + i)] = I * a / sw[i];
    }
    let (phi, w) = op.solve_forcing_matrix(&f);
    let d1 = to_complex(&grid.d1) * &phi;
    let out = match target {
        NormTarget::Velocity => {
            let mut m = CMat::zeros(2 * n, 2 * n);
            for i in 0..n {
                for j in 0..2 * n {
                    m[(i, j)] = d1[(i, j)] * sw[i];
                    m[(n + i, j)] = phi[(i, j)] * a * sw[i];
                }
            }
            m
        }
        NormTarget::Gradient => {
            let d2 = to_complex(&grid.d2) * &phi;
            let mut m = CMat::zeros(3 * n, 2 * n);
            for i in 0..n {
                for j in 0..2 * n {
                    m[(i, j)] = d2[(i, j)] * sw[i];
                    m[(n + i, j)] = d1[(i, j)] * (2.0f64.sqrt() * a * sw[i]);
                    m[(2 * n + i, j)] = phi[(i, j)] * (a * a * sw[i]);
                }
            }
            m
        }
        NormTarget::WeightedCurl(spec) => {
            let mut m = CMat::zeros(n, 2 * n);
            for i in 0..n {
                let s = (spec.eval(grid.nodes[i]) * grid.weights[i]).sqrt();
                for j in 0..2 * n {
                    m[(i, j)] = w[(i, j)] * s;
                }
            }
            m
        }
    };
    Ok(out.singular_values().max())
}

fn to_complex(m: &DMatrix<f64>) -> CMat {
    m.map(|x| C::new(x, 0.0))
}

/// Smallest and largest singular values of the row-equilibrated nonslip collocation system.
pub fn discrete_singular_range(profile: &ShearProfile, ctx: &ModeContext, grid: &HalfLineGrid) -> Result<(f64, f64)> {
    let samples = ProfileSamples::new(profile, grid);
    let op = OsOperator::new(&samples, ctx, grid, Boundary::Nonslip, OsVariant::Standard)?;
    let sv = op.equilibrated_matrix().clone().singular_values();
    Ok((sv.min(), sv.max()))
}

/// Every verified display, keyed by the label it carries in the source analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum InequalityId {
    Mularge,
    MulargeNabla,
    Immularge,
    ImmulargeNa,
    Musmall,
    MusmallNabla,
    MusmallWeighted,
    LambdaLargeL2,
    LambdaLargeLinfinity,
    ImmuLarge1,
    ImmuLarge2,
    NavierResolvent,
    ResB3Stream,
    ResB3Weighted,
    RayleighTrickFirst,
    RayleighTrickSecond,
    RayleighInhomogeneous,
    WeBounds,
    WeBoundsLinf,
    WNormsStream,
    WNormsVorticity,
    WNormsWeighted,
    LowerJ,
    WbNormsStream,
    WbNormsVorticity,
    WbNormsWeighted,
    NonslipStream,
    NonslipVorticity,
    NonslipWeighted,
}

impl InequalityId {
    pub const ALL: [InequalityId; 29] = [
        InequalityId::Mularge,
        InequalityId::MulargeNabla,
        InequalityId::Immularge,
        InequalityId::ImmulargeNa,
        InequalityId::Musmall,
        InequalityId::MusmallNabla,
        InequalityId::MusmallWeighted,
        InequalityId::LambdaLargeL2,
        InequalityId::LambdaLargeLinfinity,
        InequalityId::ImmuLarge1,
        InequalityId::ImmuLarge2,
        InequalityId::NavierResolvent,
        InequalityId::ResB3Stream,
        InequalityId::ResB3Weighted,
        InequalityId::RayleighTrickFirst,
        InequalityId::RayleighTrickSecond,
        InequalityId::RayleighInhomogeneous,
        InequalityId::WeBounds,
        InequalityId::WeBoundsLinf,
        InequalityId::WNormsStream,
        InequalityId::WNormsVorticity,
        InequalityId::WNormsWeighted,
        InequalityId::LowerJ,
        InequalityId::WbNormsStream,
        InequalityId::WbNormsVorticity,
        InequalityId::WbNormsWeighted,
        InequalityId::NonslipStream,
        InequalityId::NonslipVorticity,
        InequalityId::NonslipWeighted,
    ];

    pub fn as_str(self) -> &'static str {
        use InequalityId::*;
        match self {
            Mularge => "mularge",
            MulargeNabla => "mularge-nabla",
            Immularge => "Immularge",
            ImmulargeNa => "Immularge-na",
            Musmall => "musmall",
            MusmallNabla => "musmall-nabla",
            MusmallWeighted => "musmall-weighted",
            LambdaLargeL2 => "lambda-large-L2",
            LambdaLargeLinfinity => "lambda-large-Linfinity",
            ImmuLarge1 => "ieq-Immu-large1",
            ImmuLarge2 => "ieq-Immu-large2",
            NavierResolvent => "B3resH-1",
            ResB3Stream => "resB3-stream",
            ResB3Weighted => "resB3-weighted",
            RayleighTrickFirst => "GMMray-first",
            RayleighTrickSecond => "GMMray-second",
            RayleighInhomogeneous => "GMMray1",
            WeBounds => "Webounds",
            WeBoundsLinf => "Webounds-Linf",
            WNormsStream => "Wnorms-stream",
            WNormsVorticity => "Wnorms-vorticity",
            WNormsWeighted => "Wnorms-weighted",
            LowerJ => "lowerJ",
            WbNormsStream => "Wbnorms-stream",
            WbNormsVorticity => "Wbnorms-vorticity",
            WbNormsWeighted => "Wbnorms-weighted",
            NonslipStream => "resdrsmall-stream",
            NonslipVorticity => "resdrsmall-vorticity",
            NonslipWeighted => "resdrsmall-weighted",
        }
    }

    fn family(self) -> Family {
        use InequalityId::*;
        match self {
            Mularge | MulargeNabla | Immularge | ImmulargeNa | Musmall | MusmallNabla | MusmallWeighted
            | LambdaLargeL2 | LambdaLargeLinfinity | ImmuLarge1 | ImmuLarge2 | NonslipStream | NonslipVorticity
            | NonslipWeighted => Family::Nonslip,
            NavierResolvent => Family::Navier,
            ResB3Stream | ResB3Weighted => Family::SplitSecond,
            RayleighTrickFirst | RayleighTrickSecond => Family::RayleighQuotient,
            RayleighInhomogeneous => Family::Rayleigh,
            WeBounds | WeBoundsLinf | WNormsStream | WNormsVorticity | WNormsWeighted | LowerJ | WbNormsStream
            | WbNormsVorticity | WbNormsWeighted => Family::Corrector,
        }
    }
}

impl fmt::Display for InequalityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for InequalityId {
    type Err = Error;

    fn from_str(s: &str) -> Result<InequalityId> {
        InequalityId::ALL
            .iter()
            .copied()
            .find(|id| id.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown inequality id `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Family {
    Nonslip,
    Navier,
    SplitSecond,
    RayleighQuotient,
    Rayleigh,
    Corrector,
}

/// Hypothesis clauses of a display, checked on one context.
pub fn check_hypotheses(id: InequalityId, ctx: &ModeContext, theta: f64) -> Result<()> {
    use InequalityId::*;
    let f = &ctx.delta_family;
    let regime = classify_with(f.delta0, ctx.nu, ctx.n, ctx.gamma);
    let tags = in_resolvent_region(ctx, theta);
    let fail = |clause: &str| Err(Error::Hypothesis(format!("{id}: {clause}")));
    let middle = || -> Result<()> {
        if regime.is_middle() {
            Ok(())
        } else {
            fail(&format!("middle frequency δ₀⁻¹ ≤ |n| ≤ δ₀⁻¹ν^{{−3/4}} (n = {}, regime {regime:?})", ctx.n))
        }
    };
    let remu = |delta_max: f64, name: &str| -> Result<()> {
        if !ctx.admissible {
            return fail(&format!("Re μ ≥ ν^{{1/2}}|n|^γ/δ (Re μ = {:.4e}, bound {:.4e})", ctx.mu.re, ctx.remu_threshold()));
        }
        if ctx.delta > delta_max * (1.0 + 1e-12) {
            return fail(&format!("δ ≤ {name} (δ = {:.4e}, {name} = {delta_max:.4e})", ctx.delta));
        }
        Ok(())
    };
    let small_lambda = || -> Result<()> {
        if ctx.lambda.norm() <= 1.0 / f.delta1 {
            Ok(())
        } else {
            fail(&format!("|λ| ≤ δ₁⁻¹ (|λ| = {:.4e})", ctx.lambda.norm()))
        }
    };
    let positive_li = || -> Result<()> {
        if ctx.lambda_i() > 0.0 {
            Ok(())
        } else {
            fail(&format!("Im λ > 0 (Im λ = {:.4e})", ctx.lambda_i()))
        }
    };
    match id {
        Mularge | MulargeNabla => {
            middle()?;
            if !tags.contains(&SpectralTag::SSector) {
                return fail("μ ∈ S_{ν,n}(θ)");
            }
        }
        Immularge | ImmulargeNa => {
            if !tags.contains(&SpectralTag::ImLarge) {
                return fail("|n| ≥ δ₀⁻¹ and Re μ + n²ν^{3/2} ≥ δ₂⁻¹");
            }
        }
        Musmall | MusmallNabla | MusmallWeighted => {
            middle()?;
            remu(f.delta_star, "δ_*")?;
            if !tags.contains(&SpectralTag::OLine) {
                return fail("μ ∈ O_{ν,n} with Re μ = |n|^γν^{1/2}/δ and Re μ + n²ν^{3/2} ≤ δ₂⁻¹");
            }
        }
        LambdaLargeL2 | LambdaLargeLinfinity => {
            if ctx.lambda.norm() < 1.0 / f.delta1 {
                return fail(&format!("|λ| ≥ δ₁⁻¹ (|λ| = {:.4e})", ctx.lambda.norm()));
            }
            remu(f.delta1, "δ₁")?;
        }
        ImmuLarge1 | ImmuLarge2 => {
            if ctx.alpha * ctx.lambda_i() + ctx.nu.sqrt() * ctx.alpha * ctx.alpha < 1.0 / f.delta2 {
                return fail("αλ_i + ν^{1/2}α² ≥ δ₂⁻¹");
            }
        }
        NavierResolvent | ResB3Stream | ResB3Weighted => {
            middle()?;
            remu(f.delta_star, "δ_*")?;
        }
        RayleighTrickFirst => positive_li()?,
        RayleighTrickSecond => {
            positive_li()?;
            if ctx.lambda_r() < 1.0 {
                return fail(&format!("Re λ ≥ 1 (Re λ = {:.4e})", ctx.lambda_r()));
            }
        }
        RayleighInhomogeneous => {
            positive_li()?;
            small_lambda()?;
        }
        WeBounds | WeBoundsLinf | WNormsStream | WNormsVorticity | WNormsWeighted | LowerJ | WbNormsStream
        | WbNormsVorticity | WbNormsWeighted | NonslipStream | NonslipVorticity | NonslipWeighted => {
            middle()?;
            remu(f.delta_star, "δ_*")?;
            small_lambda()?;
            if !(ctx.gamma >= 2.0 / 3.0 - 1e-12) {
                return fail("γ ∈ [2/3, 1]");
            }
        }
    }
    Ok(())
}

/// Options of a verification sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyOptions {
    pub seed: u64,
    /// Random right-hand sides per context (the maximum ratio is kept).
    pub draws: usize,
    pub theta: f64,
    /// Cross-check the sampled ratio against the full discrete operator norm.
    pub svd_check: bool,
    pub parallel: bool,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions { seed: 0, draws: 5, theta: DEFAULT_THETA, svd_check: false, parallel: true }
    }
}

/// Measures one display over a sweep: one report per context plus the max-reduction.
///
/// Each context gets its own grid (`ctx.default_grid(n_nodes)`), so the wall layer is resolved
/// uniformly across the sweep. A hypothesis violation rejects the whole sweep and names the
/// offending context and clause.
pub fn verify_inequality(
    profile: &ShearProfile,
    id: InequalityId,
    sweep: &[ModeContext],
    n_nodes: usize,
    opts: &VerifyOptions,
) -> Result<(Vec<EstimateReport>, SweepSummary)> {
    for (k, ctx) in sweep.iter().enumerate() {
        check_hypotheses(id, ctx, opts.theta).map_err(|e| match e {
            Error::Hypothesis(msg) => Error::Hypothesis(format!("sweep entry {k}: {msg}")),
            other => other,
        })?;
    }
    let run = |(k, ctx): (usize, &ModeContext)| evaluate(profile, id, ctx, k, n_nodes, opts);
    let reports: Vec<EstimateReport> = if opts.parallel {
        sweep.par_iter().enumerate().map(run).collect::<Result<Vec<_>>>()?
    } else {
        sweep.iter().enumerate().map(run).collect::<Result<Vec<_>>>()?
    };
    let summary = summarize(id.as_str(), &reports);
    Ok((reports, summary))
}

/// Keeps the contexts that satisfy the hypotheses of `id`.
pub fn admissible_subset(id: InequalityId, sweep: &[ModeContext], theta: f64) -> Vec<ModeContext> {
    sweep.iter().filter(|c| check_hypotheses(id, c, theta).is_ok()).cloned().collect()
}

fn draw(opts: &VerifyOptions, id: InequalityId, k: usize, d: usize, slot: u64, vanish: bool) -> SmoothDraw {
    smooth_draw(mix_seed(opts.seed, id.as_str(), &[k as u64, d as u64, slot]), DRAW_SCALES.0, DRAW_SCALES.1, vanish)
}

fn unit_pair(grid: &HalfLineGrid, a: &SmoothDraw, b: &SmoothDraw) -> (Vec<C>, Vec<C>) {
    let f1 = a.sample(&grid.nodes);
    let f2 = b.sample(&grid.nodes);
    let s = l2_pair(grid, &f1, &f2);
    (f1.iter().map(|z| z / s).collect(), f2.iter().map(|z| z / s).collect())
}

fn inverse_slope_norms(grid: &HalfLineGrid, w: &[C], vp: &[f64], alpha: f64) -> (f64, f64) {
    let v0 = vp[0];
    let dw = grid.dy(w);
    let mut a = 0.0;
    let mut b = 0.0;
    for i in 0..grid.n {
        if vp[i] < V_CUTOFF * v0 {
            continue;
        }
        let q = grid.weights[i] / (vp[i] * vp[i]);
        a += (dw[i].norm_sqr() + alpha * alpha * w[i].norm_sqr()) * q;
        b += w[i].norm_sqr() * q;
    }
    (a.sqrt(), b.sqrt())
}

fn evaluate(
    profile: &ShearProfile,
    id: InequalityId,
    ctx: &ModeContext,
    k: usize,
    n_nodes: usize,
    opts: &VerifyOptions,
) -> Result<EstimateReport> {
    use InequalityId::*;
    let ctx = &ctx.clone().exploratory();
    let grid = ctx.default_grid(n_nodes)?;
    let g = &grid;
    let a = ctx.alpha;
    let nu = ctx.nu;
    let li = ctx.lambda_i();
    let na = ctx.n.unsigned_abs() as f64;
    let mu = ctx.mu;
    let big_a = ctx.a_scale;
    let rho = WeightSpec::rho(ctx.n, ctx.gamma, ctx.delta);
    let rho_l = WeightSpec::rho_lambda(ctx.n, li.max(f64::MIN_POSITIVE));
    let mut params = ctx.snapshot();
    let mut best: Option<(f64, f64, usize)> = None;
    let mut keep = |lhs: f64, rhs: f64, d: usize| {
        let r = EstimateReport::new(id.as_str(), lhs, rhs, json!(null), n_nodes).ratio;
        if best.map_or(true, |(bl, br, _)| r > EstimateReport::new("", bl, br, json!(null), 0).ratio) {
            best = Some((lhs, rhs, d));
        }
    };
    match id.family() {
        Family::Nonslip => {
            let samples = ProfileSamples::new(profile, g);
            let op = OsOperator::new(&samples, ctx, g, Boundary::Nonslip, OsVariant::Standard)?;
            for d in 0..opts.draws {
                let (f1, f2) = unit_pair(g, &draw(opts, id, k, d, 0, false), &draw(opts, id, k, d, 1, false));
                let sol = solve_with(&op, &samples, ctx, &RhsSpec::Pair { f1, f2 }, g)?;
                let v = sol.norms.grad_pair;
                let grad = gradient_norm(g, &sol.phi, a);
                let (lhs, rhs) = match id {
                    Mularge => (v, 1.0 / mu.norm()),
                    MulargeNabla => (grad, 1.0 / (nu.powf(0.25) * mu.norm().sqrt())),
                    Immularge => (v, 1.0 / mu.re),
                    ImmulargeNa => (grad, 1.0 / (nu.powf(0.25) * mu.re.sqrt())),
                    Musmall => (v, na.powf(1.0 - ctx.gamma) / mu.re),
                    MusmallNabla => (grad, na.powf(0.5 + 0.25 * (1.0 - ctx.gamma)) / mu.re),
                    MusmallWeighted => (weighted_l2(g, &sol.w, &rho), 1.0 / (nu.powf(0.25) * mu.re.sqrt())),
                    LambdaLargeL2 => (v, 1.0 / (a * ctx.lambda.norm())),
                    LambdaLargeLinfinity => (sol.norms.w_l2, 1.0 / (nu.powf(0.25) * (a * ctx.lambda.norm()).sqrt())),
                    ImmuLarge1 => {
                        let s = a * li + nu.sqrt() * a * a;
                        (l2(g, &g.dy(&sol.phi)) + a * sol.norms.phi_l2, 1.0 / s)
                    }
                    ImmuLarge2 => {
                        let s = a * li + nu.sqrt() * a * a;
                        (sol.norms.w_l2, 1.0 / (nu.powf(0.25) * s.sqrt()))
                    }
                    NonslipStream => (v, 1.0 / (a * li * li)),
                    NonslipVorticity => (sol.norms.w_l2, 1.0 / (nu.powf(0.25) * a.sqrt() * li.powf(1.25))),
                    NonslipWeighted => (weighted_l2(g, &sol.w, &rho_l), 1.0 / (nu.powf(0.25) * a.sqrt() * li.sqrt())),
                    _ => unreachable!("nonslip family"),
                };
                keep(lhs, rhs, d);
            }
            if opts.svd_check {
                let (target, per_unit) = match id {
                    Mularge => (Some(NormTarget::Velocity), 1.0 / mu.norm()),
                    MulargeNabla => (Some(NormTarget::Gradient), 1.0 / (nu.powf(0.25) * mu.norm().sqrt())),
                    Immularge => (Some(NormTarget::Velocity), 1.0 / mu.re),
                    ImmulargeNa => (Some(NormTarget::Gradient), 1.0 / (nu.powf(0.25) * mu.re.sqrt())),
                    Musmall => (Some(NormTarget::Velocity), na.powf(1.0 - ctx.gamma) / mu.re),
                    MusmallNabla => (Some(NormTarget::Gradient), na.powf(0.5 + 0.25 * (1.0 - ctx.gamma)) / mu.re),
                    MusmallWeighted => (Some(NormTarget::WeightedCurl(rho)), 1.0 / (nu.powf(0.25) * mu.re.sqrt())),
                    LambdaLargeL2 => (Some(NormTarget::Velocity), 1.0 / (a * ctx.lambda.norm())),
                    NonslipStream => (Some(NormTarget::Velocity), 1.0 / (a * li * li)),
                    NonslipWeighted => {
                        (Some(NormTarget::WeightedCurl(rho_l)), 1.0 / (nu.powf(0.25) * a.sqrt() * li.sqrt()))
                    }
                    _ => (None, 1.0),
                };
                if let Some(t) = target {
                    let norm = resolvent_norm(profile, ctx, g, t)?;
                    params["svd_ratio"] = json!(norm / per_unit);
                }
            }
        }
        Family::Navier => {
            let solver = NavierSolver::new(profile, ctx, g)?;
            for d in 0..opts.draws {
                let (f1, f2) = unit_pair(g, &draw(opts, id, k, d, 0, false), &draw(opts, id, k, d, 1, false));
                let sol = solver.solve_plain(ctx, &RhsSpec::Pair { f1, f2 }, g)?;
                let lhs = nu.powf(0.25) * a.sqrt() / li.sqrt() * sol.norms.w_l2 + a * li * sol.norms.grad_pair;
                keep(lhs, 1.0 / li, d);
            }
        }
        Family::SplitSecond => {
            let solver = NavierSolver::new(profile, ctx, g)?;
            for d in 0..opts.draws {
                let h = draw(opts, id, k, d, 0, false).sample(&g.nodes);
                let s = l2(g, &h);
                let h: Vec<C> = h.iter().map(|z| z / s).collect();
                let sol = solver.solve_plain(ctx, &RhsSpec::Weighted { h }, g)?;
                let (lhs, rhs) = match id {
                    ResB3Stream => (a * li * sol.norms.grad_pair, 1.0),
                    ResB3Weighted => {
                        let (grad_w, w_only) = inverse_slope_norms(g, &sol.w, &solver.samples.vp, a);
                        (nu.powf(0.25) * (a * li).sqrt() * grad_w + a * li * w_only, 1.0)
                    }
                    _ => unreachable!("split family"),
                };
                keep(lhs, rhs, d);
            }
        }
        Family::RayleighQuotient => {
            let mut min_gap = f64::INFINITY;
            for d in 0..opts.draws {
                let phi = draw(opts, id, k, d, 0, true).sample(&g.nodes);
                let gap = rayleigh_gap(profile, ctx, g, &phi, id == RayleighTrickSecond)?;
                min_gap = min_gap.min(gap.rhs - gap.lhs);
                keep(gap.lhs, gap.rhs, d);
            }
            params["min_gap"] = json!(min_gap);
        }
        Family::Rayleigh => {
            for d in 0..opts.draws {
                let h1 = draw(opts, id, k, d, 0, false).sample(&g.nodes);
                let h2 = draw(opts, id, k, d, 1, false).sample(&g.nodes);
                let h3 = draw(opts, id, k, d, 2, false).sample(&g.nodes);
                let r = solve_rayleigh(profile, ctx, &h1, &h2, &h3, g)?;
                keep(r.report.lhs, r.report.rhs_shape, d);
            }
        }
        Family::Corrector => {
            let solver = NavierSolver::new(profile, ctx, g)?;
            let b = build_corrector_with(profile, ctx, g, &solver, CorrectorForm::Divergence, false)?;
            let (lhs, rhs) = match id {
                WeBounds => (
                    nu.powf(0.25) * a.sqrt() / li.sqrt() * l2(g, &b.w_e) + a * li * h1_pair(g, &b.phi_e, a),
                    a / li * big_a.powf(-3.5),
                ),
                WeBoundsLinf => {
                    let d = g.dy(&b.phi_e);
                    (sup_norm(g, &[&d]), na.powf(-1.0 / 3.0) * (big_a * li).powf(-1.75))
                }
                WNormsStream => (h1_pair(g, &b.phi, a), big_a.powf(-1.5)),
                WNormsVorticity => (l2(g, &b.w), big_a.powf(-0.5)),
                WNormsWeighted => (weighted_l2(g, &b.w, &rho_l), na.powf(0.25) * li.powf(0.75) / big_a),
                LowerJ => (1.0 / big_a, b.j.norm()),
                WbNormsStream => (h1_pair(g, &b.phi_b, a), big_a.powf(-0.5)),
                WbNormsVorticity => (l2(g, &b.w_b), big_a.sqrt()),
                WbNormsWeighted => (weighted_l2(g, &b.w_b, &rho_l), na.powf(0.25) * li.powf(0.75)),
                _ => unreachable!("corrector family"),
            };
            keep(lhs, rhs, 0);
            params["J"] = json!([b.j.re, b.j.im]);
        }
    }
    let (lhs, rhs, d) = best.expect("at least one draw");
    params["draw"] = json!(d);
    params["grid"] = serde_json::to_value(g.mapping)?;
    Ok(EstimateReport::new(id.as_str(), lhs, rhs, params, n_nodes))
}

/// Both sides of the Rayleigh-quotient inequality for one stream function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayleighGap {
    /// `‖(∂φ, αφ)‖² + M⁻¹‖(1−V)^{1/2}V′φ/(V−λ)‖²`.
    pub lhs: f64,
    /// `Re((1−λ)/(iλ_i) ∫ (Rφ)φ̄/(V−λ))`, or `−Re ∫ (Rφ)φ̄/(V−λ)` for the second form.
    pub rhs: f64,
}

/// Evaluates the Rayleigh-quotient inequality for `φ` with `φ(0) = 0`, normalized to
/// `‖(∂φ, αφ)‖ = 1` (so the gap `rhs − lhs` is on an absolute scale).
pub fn rayleigh_gap(
    profile: &ShearProfile,
    ctx: &ModeContext,
    grid: &HalfLineGrid,
    phi: &[C],
    second_form: bool,
) -> Result<RayleighGap> {
    grid.check_len(phi)?;
    let m = profile.concavity_m.ok_or_else(|| {
        Error::Hypothesis(format!("profile `{}` has no certified concavity constant", profile.name))
    })?;
    let li = ctx.lambda_i();
    if !(li > 0.0) {
        return Err(Error::Domain(format!("Im λ must be positive, got {li}")));
    }
    let a = ctx.alpha;
    let s = h1_pair(grid, phi, a);
    if !(s > 0.0) {
        return Err(Error::Domain("stream function vanishes".into()));
    }
    let phi: Vec<C> = phi.iter().map(|z| z / s).collect();
    let samples = ProfileSamples::new(profile, grid);
    let d2 = grid.dyy(&phi);
    let lam = ctx.lambda;
    let mut integrand = Vec::with_capacity(grid.n);
    let mut weighted = Vec::with_capacity(grid.n);
    for i in 0..grid.n {
        let c = samples.v[i] - lam;
        let r = c * (d2[i] - a * a * phi[i]) - samples.vpp[i] * phi[i];
        integrand.push(r * phi[i].conj() / c);
        weighted.push((1.0 - samples.v[i]).max(0.0).sqrt() * samples.vp[i] * phi[i] / c);
    }
    let quot = grid.integrate(&integrand);
    let lhs = h1_pair(grid, &phi, a).powi(2) + l2(grid, &weighted).powi(2) / m;
    let rhs = if second_form { -quot.re } else { ((1.0 - lam) / (I * li) * quot).re };
    Ok(RayleighGap { lhs, rhs })
}

/// The default constant family of a profile.
pub fn default_family(profile: &ShearProfile) -> DeltaFamily {
    DeltaFamily::from_profile(profile)
}

fn push_ctx(out: &mut Vec<ModeContext>, r: Result<ModeContext>) {
    if let Ok(c) = r {
        out.push(c);
    }
}

/// Deterministic sweep (at least 50 contexts) satisfying the hypotheses of `id` under the
/// default constant family.
pub fn standard_sweep(id: InequalityId, profile: &ShearProfile) -> Result<Vec<ModeContext>> {
    use InequalityId::*;
    let fam = default_family(profile);
    let mut out = Vec::new();
    match id {
        Mularge | MulargeNabla => {
            let (nu, gamma): (f64, f64) = (1e-4, 0.75);
            let t = DEFAULT_THETA.tan();
            for n in [16i64, 32, 64, 128, 256] {
                let na = n as f64;
                for re in [-2.0, -0.5, 0.0, 1.0, 4.0] {
                    let line = t * re + (nu.sqrt() * na + t.abs() * na.powf(gamma) * nu.sqrt()) / fam.delta1;
                    for scale in [1.05, 1.6] {
                        for sign in [1.0, -1.0] {
                            let mu = C::new(re, sign * scale * line.max(nu.sqrt() * na / fam.delta1));
                            push_ctx(&mut out, ModeContext::from_mu(profile, nu, n, mu, gamma, fam.delta_star, fam));
                        }
                    }
                }
            }
        }
        Immularge | ImmulargeNa | ImmuLarge1 | ImmuLarge2 => {
            let (nu, gamma): (f64, f64) = (1e-4, 0.75);
            for n in [16i64, 64, 256] {
                for j in 0..10 {
                    let re = (10f64).powf(2.0 * j as f64 / 9.0) / fam.delta2;
                    for im in [0.0, -0.5 * re] {
                        push_ctx(&mut out, ModeContext::from_mu(profile, nu, n, C::new(re, im), gamma, fam.delta_star, fam));
                    }
                }
            }
        }
        Musmall | MusmallNabla | MusmallWeighted => {
            let (nu, gamma): (f64, f64) = (1e-6, 2.0 / 3.0);
            let delta = fam.delta_star;
            for n in [100i64, 200, 400, 800, 1600] {
                let na = n as f64;
                let re = na.powf(gamma) * nu.sqrt() / delta;
                let alpha = nu.sqrt() * na;
                for lr in [-2.0, -0.5, 0.0, 0.3, 0.6, 0.9, 1.2, 2.0, 4.0, 8.0] {
                    // μ = −iαλ with Re μ = αλ_i fixed by the line
                    let mu = C::new(re, -alpha * lr);
                    push_ctx(&mut out, ModeContext::from_mu(profile, nu, n, mu, gamma, delta, fam));
                }
            }
        }
        LambdaLargeL2 | LambdaLargeLinfinity => {
            let (nu, gamma): (f64, f64) = (1e-4, 0.75);
            let delta = fam.delta1;
            for n in [16i64, 32, 64, 128, 256] {
                let na = n as f64;
                let li0 = na.powf(gamma - 1.0) / delta;
                for mag in [40.0, 80.0, 160.0, 320.0] {
                    for li in [li0, 2.0 * li0] {
                        if li > mag {
                            continue;
                        }
                        let lr = (mag * mag - li * li).sqrt();
                        for sign in [1.0, -1.0] {
                            let lam = C::new(sign * lr, li);
                            push_ctx(&mut out, ModeContext::from_lambda(profile, nu, n, lam, gamma, delta, fam));
                        }
                    }
                }
            }
        }
        RayleighTrickFirst | RayleighTrickSecond => {
            let lrs: &[f64] =
                if id == RayleighTrickSecond { &[1.0, 1.2, 1.5, 2.0, 4.0] } else { &[-1.0, 0.0, 0.3, 0.6, 0.95] };
            for n in [16i64, 64, 256] {
                for &lr in lrs {
                    for li in [0.05, 0.3, 1.0, 5.0] {
                        let lam = C::new(lr, li);
                        push_ctx(&mut out, ModeContext::from_lambda(profile, 1e-4, n, lam, 0.75, fam.delta_star, fam));
                    }
                }
            }
        }
        NavierResolvent | ResB3Stream | ResB3Weighted | RayleighInhomogeneous | WeBounds | WeBoundsLinf
        | WNormsStream | WNormsVorticity | WNormsWeighted | LowerJ | WbNormsStream | WbNormsVorticity
        | WbNormsWeighted | NonslipStream | NonslipVorticity | NonslipWeighted => {
            out = small_lambda_sweep(profile, &fam);
        }
    }
    Ok(out)
}

/// Contexts with `Re μ` at and slightly above the admissibility bound for `δ = δ_*`, `γ = 2/3`,
/// and `|λ| ≤ δ₁⁻¹`.
pub fn small_lambda_sweep(profile: &ShearProfile, fam: &DeltaFamily) -> Vec<ModeContext> {
    let (nu, gamma) = (1e-4, 2.0 / 3.0);
    let delta = fam.delta_star;
    let mut out = Vec::new();
    for n in [125i64, 216, 343, 512, 729, 1000] {
        let li0 = (n as f64).powf(gamma - 1.0) / delta;
        for factor in [1.0, 1.1, 1.25] {
            for lr in [0.0, 0.25, 0.5, 0.9, 1.5] {
                let lam = C::new(lr, li0 * factor);
                if lam.norm() > 1.0 / fam.delta1 {
                    continue;
                }
                push_ctx(&mut out, ModeContext::from_lambda(profile, nu, n, lam, gamma, delta, *fam));
            }
        }
    }
    out
}
