//! Scenario-driven runs: a TOML scenario names one kind of check, its profile, numerics and a
//! kind-specific parameter block; a run writes JSONL reports, a summary JSON and CSV data into
//! one output directory and maps the outcome onto an exit status.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::nonlinear::{
    check_convolution_bound, gevrey_initial_data, linear_consistency, sim_grid, simulate, write_history_csv,
    SimOptions, SimState, ZNormParams,
};
use crate::numerics::grid::{build_grid, HalfLineGrid, Mapping};
use crate::numerics::norms::{check_interpolation, h1_pair, WeightSpec};
use crate::numerics::random::{mix_seed, smooth_draw};
use crate::ossolve::{
    assemble_nonslip, build_corrector, solve_os_navier, solve_os_nonslip, write_solution_csv, Boundary,
    DeltaFamily, ModeContext, RhsSpec,
};
use crate::profiles::{check_sc, default_nodes, load_tabulated_profile, make_builtin_profile, ShearProfile, CATALOGUE};
use crate::report::{summarize, EstimateReport, SweepSummary, REPORT_SCHEMA};
use crate::resolvent::{
    admissible_subset, classify, standard_sweep, verify_inequality, FrequencyRegime, InequalityId, VerifyOptions,
    DEFAULT_THETA,
};
use crate::semigroup::{
    apply_semigroup, random_mode, EXPM_MAX_NODES, semigroup_grid, stokes_energy_defect, check_stokes, verify_semigroup_bounds,
    BoundSweepOptions, SemigroupMethod, SemigroupOptions, VelocityMode,
};
use crate::specfun::{a0, airy, check_airy_ratio_bounds};

type C = Complex64;

/// Schema tag a scenario file may carry; any other value is rejected.
pub const SCENARIO_SCHEMA: &str = "osr-scenario/1";
/// Schema tag of the per-run summary JSON.
pub const SUMMARY_SCHEMA: &str = "osr-summary/1";
/// Schema tag of the cross-run aggregate.
pub const AGGREGATE_SCHEMA: &str = "osr-aggregate/1";

const AI0: f64 = 0.355_028_053_887_817_24;
const AI0_PRIME: f64 = -0.258_819_403_792_806_8;

/// Kinds of scenario, one per CLI verb.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    ProfileCheck,
    OsSolve,
    Corrector,
    ResolventSweep,
    SemigroupCheck,
    StokesCheck,
    NonlinearSim,
    AiryCheck,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 8] = [
        ScenarioKind::ProfileCheck,
        ScenarioKind::OsSolve,
        ScenarioKind::Corrector,
        ScenarioKind::ResolventSweep,
        ScenarioKind::SemigroupCheck,
        ScenarioKind::StokesCheck,
        ScenarioKind::NonlinearSim,
        ScenarioKind::AiryCheck,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioKind::ProfileCheck => "profile-check",
            ScenarioKind::OsSolve => "os-solve",
            ScenarioKind::Corrector => "corrector",
            ScenarioKind::ResolventSweep => "resolvent-sweep",
            ScenarioKind::SemigroupCheck => "semigroup-check",
            ScenarioKind::StokesCheck => "stokes-check",
            ScenarioKind::NonlinearSim => "nonlinear-sim",
            ScenarioKind::AiryCheck => "airy-check",
        }
    }

    /// The CLI verb that runs this kind.
    pub fn verb(self) -> &'static str {
        match self {
            ScenarioKind::ProfileCheck => "check-profile",
            ScenarioKind::OsSolve => "solve",
            ScenarioKind::Corrector => "corrector",
            ScenarioKind::ResolventSweep => "sweep",
            ScenarioKind::SemigroupCheck => "semigroup",
            ScenarioKind::StokesCheck => "stokes",
            ScenarioKind::NonlinearSim => "simulate",
            ScenarioKind::AiryCheck => "airy",
        }
    }

    pub fn from_verb(verb: &str) -> Option<ScenarioKind> {
        ScenarioKind::ALL.into_iter().find(|k| k.verb() == verb)
    }
}

/// Grid and tolerance settings shared by every kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Numerics {
    /// Collocation nodes (before `--resolution-scale`).
    pub n_nodes: usize,
    /// Acceptance tolerance of the kind's primary check.
    pub tolerance: f64,
    /// Sector angle `θ ∈ (π/2, π)`.
    pub theta: f64,
}

impl Default for Numerics {
    fn default() -> Self {
        Numerics { n_nodes: 64, tolerance: 1e-6, theta: DEFAULT_THETA }
    }
}

/// Output artifact formats.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Jsonl,
    Json,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSpec {
    pub dir: String,
    pub formats: Vec<Format>,
}

impl Default for OutputSpec {
    fn default() -> Self {
        OutputSpec { dir: "osr-out".into(), formats: vec![Format::Jsonl, Format::Json, Format::Csv] }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    schema: Option<String>,
    kind: ScenarioKind,
    #[serde(default = "default_profile")]
    profile: String,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    numerics: Numerics,
    #[serde(default)]
    params: toml::Table,
    #[serde(default)]
    output: OutputSpec,
}

fn default_profile() -> String {
    "exp".into()
}

/// A validated scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub kind: ScenarioKind,
    /// Catalogue name or path of a CSV table (relative paths are taken from the config file).
    pub profile: String,
    pub seed: u64,
    pub numerics: Numerics,
    pub params: Params,
    pub output: OutputSpec,
    /// Directory of the config file, for relative paths.
    pub base_dir: PathBuf,
}

/// Kind-specific parameter blocks.
#[derive(Debug, Clone, PartialEq)]
pub enum Params {
    ProfileCheck(ProfileCheckParams),
    OsSolve(OsSolveParams),
    Corrector(CorrectorParams),
    ResolventSweep(ResolventSweepParams),
    SemigroupCheck(SemigroupCheckParams),
    StokesCheck(StokesCheckParams),
    NonlinearSim(NonlinearSimParams),
    AiryCheck(AiryCheckParams),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProfileCheckParams {
    /// Far end of the check grid.
    pub length: f64,
    /// Expected verdict; without it the check passes when the profile passes.
    pub expect_pass: Option<bool>,
    /// Expected minimal `M`, compared with relative tolerance `m_tolerance`.
    pub expected_m: Option<f64>,
    pub m_tolerance: f64,
    /// Upper bound on the witness node when a failure is expected.
    pub witness_below: Option<f64>,
}

impl Default for ProfileCheckParams {
    fn default() -> Self {
        ProfileCheckParams { length: 40.0, expect_pass: None, expected_m: None, m_tolerance: 0.01, witness_below: None }
    }
}

/// One mode problem: `ν, n, γ`, the spectral parameter as `μ` or `λ` (pairs `[re, im]`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeSpec {
    pub nu: f64,
    pub n: i64,
    #[serde(default)]
    pub mu: Option<[f64; 2]>,
    #[serde(default)]
    pub lambda: Option<[f64; 2]>,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    /// Defaults to `δ₀` of the profile.
    #[serde(default)]
    pub delta: Option<f64>,
    /// Skip the admissibility gate.
    #[serde(default)]
    pub exploratory: bool,
}

fn default_gamma() -> f64 {
    0.75
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OsSolveParams {
    #[serde(flatten)]
    pub mode: ModeSpec,
    #[serde(default = "default_boundary")]
    pub boundary: Boundary,
}

fn default_boundary() -> Boundary {
    Boundary::Nonslip
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorrectorParams {
    #[serde(flatten)]
    pub mode: ModeSpec,
    /// Bound on the `W_a` equation residual.
    #[serde(default = "default_wa_tolerance")]
    pub wa_tolerance: f64,
}

fn default_wa_tolerance() -> f64 {
    1e-7
}

/// Cartesian sweep over `ν × n × μ` (absolute `μ` values), filtered by the hypotheses of each id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepGrid {
    pub nu: Vec<f64>,
    pub n: Vec<i64>,
    pub mu: Vec<[f64; 2]>,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default)]
    pub delta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ResolventSweepParams {
    /// Inequality ids; empty means all.
    pub ids: Vec<String>,
    /// Resolutions compared for constant stability (scaled by `--resolution-scale`).
    pub resolutions: Vec<usize>,
    pub draws: usize,
    pub svd_check: bool,
    /// Largest allowed relative drift of the sup ratio between consecutive resolutions.
    pub stability: f64,
    /// Smallest admissible sweep size.
    pub min_points: usize,
    /// Custom sweep; the built-in sweep of each id is used otherwise.
    pub sweep: Option<SweepGrid>,
}

impl Default for ResolventSweepParams {
    fn default() -> Self {
        ResolventSweepParams {
            ids: Vec::new(),
            resolutions: vec![64, 128],
            draws: 5,
            svd_check: false,
            stability: 0.1,
            min_points: 50,
            sweep: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsBlock {
    pub n: Vec<i64>,
    pub times: Vec<f64>,
    #[serde(default = "default_bound_draws")]
    pub draws: usize,
    /// Defaults to `δ_*`.
    #[serde(default)]
    pub delta: Option<f64>,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
}

fn default_bound_draws() -> usize {
    3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SemigroupCheckParams {
    pub nu: f64,
    /// Modes of the cross-validation.
    pub modes: Vec<i64>,
    pub gamma: f64,
    /// Defaults to `δ₀`.
    pub delta: Option<f64>,
    /// Rescaled time `τ = tau_factor/(ν^{1/2}|n|)`.
    pub tau_factor: f64,
    pub methods: Vec<SemigroupMethod>,
    /// Pairwise relative agreement required between methods.
    pub agreement: f64,
    pub composition_tolerance: f64,
    /// Rescaled step bound of the timestep route.
    pub dt_max: f64,
    /// High-regime modes checked for `‖e^{−t𝔸}f‖ ≤ e^{−νn²t/4}‖f‖`.
    pub decay_modes: Vec<i64>,
    /// Original times of the decay check.
    pub decay_times: Vec<f64>,
    pub bounds: Option<BoundsBlock>,
}

impl Default for SemigroupCheckParams {
    fn default() -> Self {
        SemigroupCheckParams {
            nu: 1e-3,
            modes: vec![20],
            gamma: 0.75,
            delta: None,
            tau_factor: 2.0,
            methods: vec![SemigroupMethod::Contour, SemigroupMethod::Expm, SemigroupMethod::Timestep],
            agreement: 1e-6,
            composition_tolerance: 1e-8,
            dt_max: 0.01,
            decay_modes: Vec::new(),
            decay_times: vec![0.1, 1.0],
            bounds: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StokesCheckParams {
    pub nu: f64,
    /// Modes cycled through by the draws.
    pub modes: Vec<i64>,
    pub draws: usize,
    /// Original times of the display checks.
    pub times: Vec<f64>,
    pub dt_max: f64,
    /// Original times of the energy identity.
    pub energy_times: Vec<f64>,
    pub energy_tolerance: f64,
    /// Draws (from the first) on which the energy identity is evaluated.
    pub energy_draws: usize,
    /// Node count of the energy-identity grid.
    pub energy_nodes: usize,
    pub quad_nodes: usize,
    pub resolutions: Vec<usize>,
    pub stability: f64,
    /// Include the interpolation-inequality check.
    pub interpolation: bool,
    pub gamma: f64,
}

impl Default for StokesCheckParams {
    fn default() -> Self {
        StokesCheckParams {
            nu: 1e-3,
            modes: vec![1, 3, 10, 30],
            draws: 50,
            times: vec![0.01, 0.1, 1.0],
            dt_max: 0.02,
            energy_times: vec![0.01, 1.0],
            energy_tolerance: 1e-8,
            energy_draws: 8,
            energy_nodes: 96,
            quad_nodes: 24,
            resolutions: vec![96, 192],
            stability: 0.1,
            interpolation: true,
            gamma: 0.75,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NonlinearSimParams {
    pub nu: f64,
    /// Fourier truncation `N_x` (scaled by `--resolution-scale`).
    pub nx: usize,
    pub gamma: f64,
    #[serde(rename = "K")]
    pub k: f64,
    #[serde(rename = "T")]
    pub t_final: f64,
    /// Defaults to `5 − 3γ + 0.5`.
    pub d: Option<f64>,
    /// Defaults to `δ₀`.
    pub delta: Option<f64>,
    /// Initial amplitude `ε ν^{1/2+β}` in `X⁽¹⁾`.
    pub epsilon: f64,
    /// Overrides the amplitude law.
    pub amplitude: Option<f64>,
    /// CSV snapshot of the initial state (as written by a previous run).
    pub initial_csv: Option<String>,
    pub accept_c: f64,
    pub ceiling: f64,
    pub min_steps: usize,
    pub output_every: usize,
    pub linear_check: bool,
    pub linear_tolerance: f64,
    pub linear_dt: f64,
}

impl Default for NonlinearSimParams {
    fn default() -> Self {
        NonlinearSimParams {
            nu: 1e-3,
            nx: 16,
            gamma: 0.75,
            k: 2.0,
            t_final: 1.0,
            d: None,
            delta: None,
            epsilon: 1e-2,
            amplitude: None,
            initial_csv: None,
            accept_c: 10.0,
            ceiling: 1e6,
            min_steps: 200,
            output_every: 10,
            linear_check: true,
            linear_tolerance: 1e-4,
            linear_dt: 5e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaSweep {
    pub nu: Vec<f64>,
    pub n: Vec<i64>,
    pub lambda: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AiryCheckParams {
    /// Sector samples `z = r e^{iψ}`, `r ∈ (0, r_max)`, `ψ ∈ [−π, 0]`.
    pub r_max: f64,
    pub n_r: usize,
    pub n_theta: usize,
    /// Strip `Im z ≤ δ` of the ratio bounds.
    pub delta: f64,
    /// Tolerance of the values at the origin.
    pub value_tolerance: f64,
    pub wa_sweep: Option<WaSweep>,
    pub wa_tolerance: f64,
}

impl Default for AiryCheckParams {
    fn default() -> Self {
        AiryCheckParams {
            r_max: 30.0,
            n_r: 80,
            n_theta: 10,
            delta: 0.1,
            value_tolerance: 1e-10,
            wa_sweep: None,
            wa_tolerance: 1e-7,
        }
    }
}

fn parse_params<T: serde::de::DeserializeOwned>(table: toml::Table) -> Result<T> {
    T::deserialize(toml::Value::Table(table)).map_err(|e| Error::Config(format!("[params]: {}", e.message())))
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must be a positive number, got {v}")))
    }
}

fn nonempty<T>(name: &str, v: &[T]) -> Result<()> {
    if v.is_empty() {
        Err(Error::Config(format!("{name} must not be empty")))
    } else {
        Ok(())
    }
}

impl ModeSpec {
    fn validate(&self, prefix: &str) -> Result<()> {
        positive(&format!("{prefix}.nu"), self.nu)?;
        if self.n == 0 {
            return Err(Error::Config(format!("{prefix}.n must be nonzero")));
        }
        match (self.mu, self.lambda) {
            (Some(_), Some(_)) => Err(Error::Config(format!("{prefix}: give either mu or lambda, not both"))),
            (None, None) => Err(Error::Config(format!("{prefix}: one of mu or lambda is required"))),
            _ => Ok(()),
        }
    }

    fn context(&self, profile: &ShearProfile) -> Result<ModeContext> {
        let fam = DeltaFamily::from_profile(profile);
        let delta = self.delta.unwrap_or(fam.delta0);
        let ctx = match (self.mu, self.lambda) {
            (Some([re, im]), None) => {
                ModeContext::from_mu(profile, self.nu, self.n, C::new(re, im), self.gamma, delta, fam)?
            }
            (None, Some([re, im])) => {
                ModeContext::from_lambda(profile, self.nu, self.n, C::new(re, im), self.gamma, delta, fam)?
            }
            _ => return Err(Error::Config("one of mu or lambda is required".into())),
        };
        Ok(if self.exploratory { ctx.exploratory() } else { ctx })
    }
}

impl Params {
    fn parse(kind: ScenarioKind, table: toml::Table) -> Result<Params> {
        let p = match kind {
            ScenarioKind::ProfileCheck => Params::ProfileCheck(parse_params(table)?),
            ScenarioKind::OsSolve => Params::OsSolve(parse_params(table)?),
            ScenarioKind::Corrector => Params::Corrector(parse_params(table)?),
            ScenarioKind::ResolventSweep => Params::ResolventSweep(parse_params(table)?),
            ScenarioKind::SemigroupCheck => Params::SemigroupCheck(parse_params(table)?),
            ScenarioKind::StokesCheck => Params::StokesCheck(parse_params(table)?),
            ScenarioKind::NonlinearSim => Params::NonlinearSim(parse_params(table)?),
            ScenarioKind::AiryCheck => Params::AiryCheck(parse_params(table)?),
        };
        p.validate()?;
        Ok(p)
    }

    fn validate(&self) -> Result<()> {
        match self {
            Params::ProfileCheck(p) => {
                positive("params.length", p.length)?;
                positive("params.m_tolerance", p.m_tolerance)?;
                if let Some(m) = p.expected_m {
                    positive("params.expected_m", m)?;
                }
            }
            Params::OsSolve(p) => p.mode.validate("params")?,
            Params::Corrector(p) => {
                p.mode.validate("params")?;
                positive("params.wa_tolerance", p.wa_tolerance)?;
            }
            Params::ResolventSweep(p) => {
                nonempty("params.resolutions", &p.resolutions)?;
                positive("params.stability", p.stability)?;
                if p.draws == 0 {
                    return Err(Error::Config("params.draws must be at least 1".into()));
                }
                for id in &p.ids {
                    id.parse::<InequalityId>()?;
                }
                if let Some(s) = &p.sweep {
                    nonempty("params.sweep.nu", &s.nu)?;
                    nonempty("params.sweep.n", &s.n)?;
                    nonempty("params.sweep.mu", &s.mu)?;
                }
            }
            Params::SemigroupCheck(p) => {
                positive("params.nu", p.nu)?;
                positive("params.tau_factor", p.tau_factor)?;
                positive("params.agreement", p.agreement)?;
                positive("params.composition_tolerance", p.composition_tolerance)?;
                positive("params.dt_max", p.dt_max)?;
                if p.modes.iter().chain(&p.decay_modes).any(|&n| n == 0) {
                    return Err(Error::Config("params.modes and params.decay_modes must be nonzero".into()));
                }
                if let Some(b) = &p.bounds {
                    nonempty("params.bounds.n", &b.n)?;
                    nonempty("params.bounds.times", &b.times)?;
                }
            }
            Params::StokesCheck(p) => {
                positive("params.nu", p.nu)?;
                positive("params.dt_max", p.dt_max)?;
                positive("params.energy_tolerance", p.energy_tolerance)?;
                positive("params.stability", p.stability)?;
                nonempty("params.modes", &p.modes)?;
                nonempty("params.resolutions", &p.resolutions)?;
                if p.modes.contains(&0) {
                    return Err(Error::Config("params.modes must be nonzero".into()));
                }
            }
            Params::NonlinearSim(p) => {
                positive("params.nu", p.nu)?;
                positive("params.K", p.k)?;
                positive("params.T", p.t_final)?;
                positive("params.epsilon", p.epsilon)?;
                positive("params.accept_c", p.accept_c)?;
                positive("params.ceiling", p.ceiling)?;
                positive("params.linear_tolerance", p.linear_tolerance)?;
                positive("params.linear_dt", p.linear_dt)?;
                if let Some(a) = p.amplitude {
                    if !(a >= 0.0) {
                        return Err(Error::Config(format!("params.amplitude must be non-negative, got {a}")));
                    }
                }
            }
            Params::AiryCheck(p) => {
                positive("params.r_max", p.r_max)?;
                positive("params.value_tolerance", p.value_tolerance)?;
                positive("params.wa_tolerance", p.wa_tolerance)?;
                if p.n_r == 0 || p.n_theta < 2 {
                    return Err(Error::Config("params.n_r ≥ 1 and params.n_theta ≥ 2 are required".into()));
                }
            }
        }
        Ok(())
    }
}

impl Scenario {
    /// Parses and validates a scenario; every error is a configuration error naming the line
    /// or field at fault.
    pub fn parse(text: &str, base_dir: &Path) -> Result<Scenario> {
        let raw: RawScenario = toml::from_str(text).map_err(|e| Error::Config(e.to_string().trim_end().to_string()))?;
        if let Some(s) = &raw.schema {
            if s != SCENARIO_SCHEMA {
                return Err(Error::Schema { expected: SCENARIO_SCHEMA.into(), found: s.clone() });
            }
        }
        positive("numerics.tolerance", raw.numerics.tolerance)?;
        if raw.numerics.n_nodes < 8 {
            return Err(Error::Config(format!("numerics.n_nodes must be at least 8, got {}", raw.numerics.n_nodes)));
        }
        let th = raw.numerics.theta;
        if !(th > std::f64::consts::FRAC_PI_2 && th < std::f64::consts::PI) {
            return Err(Error::Config(format!("numerics.theta must lie in (π/2, π), got {th}")));
        }
        if raw.output.dir.is_empty() {
            return Err(Error::Config("output.dir must not be empty".into()));
        }
        let params = Params::parse(raw.kind, raw.params)?;
        Ok(Scenario {
            kind: raw.kind,
            profile: raw.profile,
            seed: raw.seed,
            numerics: raw.numerics,
            params,
            output: raw.output,
            base_dir: base_dir.to_path_buf(),
        })
    }

    pub fn load(path: &Path) -> Result<Scenario> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Scenario::parse(&text, &base)
    }

    fn resolve_profile(&self) -> Result<ShearProfile> {
        if CATALOGUE.contains(&self.profile.as_str()) {
            return make_builtin_profile(&self.profile);
        }
        let path = self.base_dir.join(&self.profile);
        if !path.exists() {
            return Err(Error::Config(format!(
                "profile `{}` is neither a catalogue name ({}) nor an existing file",
                self.profile,
                CATALOGUE.join(", ")
            )));
        }
        let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("tabulated").to_string();
        load_tabulated_profile(&path, &name)
    }

    fn resolve_path(&self, p: &str) -> PathBuf {
        self.base_dir.join(p)
    }
}

/// Command-line overrides.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    /// Multiplies every resolution (collocation nodes and Fourier truncation).
    pub resolution_scale: f64,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { out: None, seed: None, resolution_scale: 1.0 }
    }
}

/// One acceptance check of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub value: f64,
    pub threshold: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl Check {
    /// Passes when `value ≤ threshold` (and `value` is finite).
    pub fn at_most(name: &str, value: f64, threshold: f64) -> Check {
        Check { name: name.into(), pass: value.is_finite() && value <= threshold, value, threshold, detail: None }
    }

    pub fn flag(name: &str, pass: bool, detail: Option<String>) -> Check {
        Check { name: name.into(), pass, value: if pass { 1.0 } else { 0.0 }, threshold: 1.0, detail }
    }

    fn with_detail(mut self, d: String) -> Check {
        self.detail = Some(d);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Pass,
    Fail,
    Error,
}

impl RunStatus {
    /// 0 pass, 1 acceptance failure, 3 computational failure.
    pub fn exit_code(self) -> i32 {
        match self {
            RunStatus::Pass => 0,
            RunStatus::Fail => 1,
            RunStatus::Error => 3,
        }
    }
}

/// Exit code of configuration errors.
pub const EXIT_CONFIG: i32 = 2;

/// Exit code of an error: configuration-class errors give 2, everything else 3.
pub fn exit_code_of(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::Catalogue(_) | Error::Schema { .. } => EXIT_CONFIG,
        _ => RunStatus::Error.exit_code(),
    }
}

/// Summary JSON of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub schema: String,
    pub kind: ScenarioKind,
    pub profile: String,
    pub seed: u64,
    pub resolution_scale: f64,
    pub status: RunStatus,
    pub checks: Vec<Check>,
    pub summaries: Vec<SweepSummary>,
    pub data: Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub artifacts: Vec<String>,
}

/// What a kind produces before it is written out.
#[derive(Debug, Default)]
struct Outcome {
    reports: Vec<EstimateReport>,
    checks: Vec<Check>,
    data: Value,
    csv: Vec<(String, Vec<u8>)>,
}

fn scaled(n: usize, s: f64) -> usize {
    ((n as f64 * s).round() as usize).max(1)
}

fn id_summaries(reports: &[EstimateReport]) -> Vec<SweepSummary> {
    let mut by: BTreeMap<&str, Vec<EstimateReport>> = BTreeMap::new();
    for r in reports {
        by.entry(r.inequality_id.as_str()).or_default().push(r.clone());
    }
    by.iter().map(|(id, rs)| summarize(id, rs)).collect()
}

/// Sup ratio per `(id, resolution)`.
fn sup_by_resolution(reports: &[EstimateReport]) -> BTreeMap<(String, usize), f64> {
    let mut out: BTreeMap<(String, usize), f64> = BTreeMap::new();
    for r in reports {
        let e = out.entry((r.inequality_id.clone(), r.resolution)).or_insert(0.0);
        if r.ratio > *e || r.ratio.is_nan() {
            *e = r.ratio;
        }
    }
    out
}

/// Relative drift `|s₂ − s₁|/s₂` of the sup ratio between consecutive resolutions.
pub fn drift(coarse: f64, fine: f64) -> f64 {
    if coarse == fine {
        0.0
    } else {
        (fine - coarse).abs() / fine.abs()
    }
}

fn stability_checks(reports: &[EstimateReport], tol: f64) -> Vec<Check> {
    let sups = sup_by_resolution(reports);
    let mut ids: Vec<&String> = sups.keys().map(|(id, _)| id).collect();
    ids.dedup();
    let mut out = Vec::new();
    for id in ids {
        let row: Vec<(usize, f64)> = sups.iter().filter(|((i, _), _)| i == id).map(|((_, n), &s)| (*n, s)).collect();
        let finite = row.iter().all(|(_, s)| s.is_finite());
        out.push(Check::flag(&format!("{id}/finite"), finite, None));
        for w in row.windows(2) {
            out.push(
                Check::at_most(&format!("{id}/drift"), drift(w[0].1, w[1].1), tol)
                    .with_detail(format!("N = {} → {}: {:.6e} → {:.6e}", w[0].0, w[1].0, w[0].1, w[1].1)),
            );
        }
    }
    out
}

fn run_profile_check(profile: &ShearProfile, p: &ProfileCheckParams) -> Result<Outcome> {
    let nodes = default_nodes(p.length);
    let rep = check_sc(profile, &nodes);
    let mut checks = Vec::new();
    match p.expect_pass {
        Some(e) => checks.push(Check::flag("sc-verdict", rep.pass == e, rep.reason.clone())),
        None => checks.push(Check::flag("sc-pass", rep.pass, rep.reason.clone())),
    }
    if let Some(m) = p.expected_m {
        checks.push(Check::at_most("minimal-m", (rep.minimal_m - m).abs() / m, p.m_tolerance));
    }
    if let Some(yb) = p.witness_below {
        let w = rep.witness.unwrap_or(f64::INFINITY);
        checks.push(Check::at_most("witness-node", w, yb));
    }
    let [v, vp, vpp] = profile.sample(&nodes);
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["Y", "V", "dV", "d2V"]).map_err(csv_err)?;
    for i in 0..nodes.len() {
        w.write_record(&[nodes[i], v[i], vp[i], vpp[i]].map(|x| format!("{x:.17e}"))).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
    Ok(Outcome { reports: Vec::new(), checks, data: serde_json::to_value(&rep)?, csv: vec![("profile.csv".into(), bytes)] })
}

fn random_pair(grid: &HalfLineGrid, seed: u64, label: &str) -> RhsSpec {
    let a = smooth_draw(mix_seed(seed, label, &[0]), 0.2, 1.0, false);
    let b = smooth_draw(mix_seed(seed, label, &[1]), 0.2, 1.0, false);
    RhsSpec::Pair { f1: a.sample(&grid.nodes), f2: b.sample(&grid.nodes) }
}

fn run_os_solve(profile: &ShearProfile, sc: &Scenario, p: &OsSolveParams, nodes: usize, seed: u64) -> Result<Outcome> {
    let ctx = p.mode.context(profile)?;
    let grid = ctx.default_grid(nodes)?;
    let rhs = random_pair(&grid, seed, "os-solve");
    let sol = match p.boundary {
        Boundary::Nonslip => solve_os_nonslip(profile, &ctx, &rhs, &grid)?,
        Boundary::Navier => solve_os_navier(profile, &ctx, &rhs, &grid)?,
    };
    let data_norm = rhs.data_norm(&grid);
    let report = EstimateReport::new("os-solve-gradient", sol.norms.grad_pair, data_norm, ctx.snapshot(), grid.n);
    let mut checks = vec![Check::at_most("residual", sol.residual_norm, sc.numerics.tolerance)];
    checks.push(Check::flag("layer-resolved", sol.resolved, None));
    let mut buf = Vec::new();
    write_solution_csv(&mut buf, &grid, &sol)?;
    Ok(Outcome {
        reports: vec![report],
        checks,
        data: json!({
            "context": ctx.snapshot(), "boundary": sol.boundary, "norms": sol.norms,
            "residual": sol.residual_norm, "resolved": sol.resolved,
        }),
        csv: vec![("solution.csv".into(), buf)],
    })
}

fn run_corrector(profile: &ShearProfile, sc: &Scenario, p: &CorrectorParams, nodes: usize, seed: u64) -> Result<Outcome> {
    let ctx = p.mode.context(profile)?;
    let grid = ctx.default_grid(nodes)?;
    let bundle = build_corrector(profile, &ctx, &grid)?;
    let rhs = random_pair(&grid, seed, "corrector");
    let navier = solve_os_navier(profile, &ctx, &rhs, &grid)?;
    let direct = solve_os_nonslip(profile, &ctx, &rhs, &grid)?;
    let assembled = assemble_nonslip(&navier, &bundle, &grid)?;
    let diff: Vec<C> = assembled.phi.iter().zip(&direct.phi).map(|(a, b)| a - b).collect();
    let lhs = h1_pair(&grid, &diff, ctx.alpha);
    let rhs_n = h1_pair(&grid, &direct.phi, ctx.alpha);
    let report = EstimateReport::new("corrector-equivalence", lhs, rhs_n, ctx.snapshot(), grid.n);
    let checks = vec![
        Check::at_most("assembled-vs-direct", report.ratio, sc.numerics.tolerance),
        Check::at_most("wa-residual", bundle.wa_residual, p.wa_tolerance),
        Check::at_most("j-quadrature", (bundle.j - bundle.j_quadrature).norm() / bundle.j.norm(), 1e-6),
    ];
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["Y", "re_Wa", "im_Wa", "re_Wb", "im_Wb", "re_Phib", "im_Phib"]).map_err(csv_err)?;
    for i in 0..grid.n {
        let row = [grid.nodes[i], bundle.w_a[i].re, bundle.w_a[i].im, bundle.w_b[i].re, bundle.w_b[i].im, bundle.phi_b[i].re, bundle.phi_b[i].im];
        w.write_record(&row.map(|x| format!("{x:.17e}"))).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
    Ok(Outcome {
        reports: vec![report],
        checks,
        data: json!({
            "context": ctx.snapshot(), "J": [bundle.j.re, bundle.j.im],
            "J_quadrature": [bundle.j_quadrature.re, bundle.j_quadrature.im],
            "wa_residual": bundle.wa_residual, "form_discrepancy": bundle.form_discrepancy,
        }),
        csv: vec![("corrector.csv".into(), bytes)],
    })
}

fn custom_sweep(profile: &ShearProfile, g: &SweepGrid) -> Result<Vec<ModeContext>> {
    let fam = DeltaFamily::from_profile(profile);
    let delta = g.delta.unwrap_or(fam.delta0);
    let mut out = Vec::new();
    for &nu in &g.nu {
        for &n in &g.n {
            for &[re, im] in &g.mu {
                out.push(ModeContext::from_mu(profile, nu, n, C::new(re, im), g.gamma, delta, fam)?);
            }
        }
    }
    Ok(out)
}

fn run_resolvent_sweep(profile: &ShearProfile, sc: &Scenario, p: &ResolventSweepParams, scale: f64, seed: u64) -> Result<Outcome> {
    let ids: Vec<InequalityId> = if p.ids.is_empty() {
        InequalityId::ALL.to_vec()
    } else {
        p.ids.iter().map(|s| s.parse()).collect::<Result<_>>()?
    };
    let opts = VerifyOptions { seed, draws: p.draws, theta: sc.numerics.theta, svd_check: p.svd_check, parallel: true };
    let mut reports = Vec::new();
    let mut checks = Vec::new();
    let mut table = Vec::new();
    for id in ids {
        let sweep = match &p.sweep {
            Some(g) => admissible_subset(id, &custom_sweep(profile, g)?, sc.numerics.theta),
            None => standard_sweep(id, profile)?,
        };
        checks.push(Check {
            name: format!("{}/points", id.as_str()),
            pass: sweep.len() >= p.min_points,
            value: sweep.len() as f64,
            threshold: p.min_points as f64,
            detail: None,
        });
        for &n in &p.resolutions {
            let n = scaled(n, scale);
            let (rs, s) = verify_inequality(profile, id, &sweep, n, &opts)?;
            table.push((id.as_str().to_string(), n, s.count, s.sup_ratio));
            reports.extend(rs);
        }
    }
    checks.extend(stability_checks(&reports, p.stability));
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["inequality_id", "resolution", "count", "sup_ratio"]).map_err(csv_err)?;
    for (id, n, c, s) in &table {
        w.write_record(&[id.clone(), n.to_string(), c.to_string(), format!("{s:.12e}")]).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
    Ok(Outcome { reports, checks, data: json!({ "ids": table.len() / p.resolutions.len().max(1) }), csv: vec![("sweep.csv".into(), bytes)] })
}

fn mode_ctx(profile: &ShearProfile, nu: f64, n: i64, gamma: f64, delta: f64) -> Result<ModeContext> {
    ModeContext::from_mu(profile, nu, n, C::new(0.0, 0.0), gamma, delta, DeltaFamily::from_profile(profile))
}

fn run_semigroup_check(profile: &ShearProfile, sc: &Scenario, p: &SemigroupCheckParams, nodes: usize, seed: u64) -> Result<Outcome> {
    let fam = DeltaFamily::from_profile(profile);
    let delta = p.delta.unwrap_or(fam.delta0);
    let opts = SemigroupOptions { theta: sc.numerics.theta, dt_max: p.dt_max, ..SemigroupOptions::default() };
    let mut checks = Vec::new();
    let mut reports = Vec::new();
    let mut rows = Vec::new();
    for (k, &n) in p.modes.iter().enumerate() {
        let ctx = mode_ctx(profile, p.nu, n, p.gamma, delta)?;
        let grid = semigroup_grid(profile, &ctx, nodes)?;
        let f = random_mode(&grid, p.nu.sqrt() * n as f64, mix_seed(seed, "semigroup-data", &[k as u64]));
        let tau = p.tau_factor / ctx.alpha;
        let outs: Vec<(SemigroupMethod, VelocityMode)> = p
            .methods
            .iter()
            .map(|&m| apply_semigroup(profile, &ctx, &grid, &f, tau, m, &opts).map(|u| (m, u)))
            .collect::<Result<_>>()?;
        for i in 0..outs.len() {
            for j in i + 1..outs.len() {
                let d = outs[i].1.rel_l2_diff(&outs[j].1, &grid);
                let name = format!("n={n}/{:?}-vs-{:?}", outs[i].0, outs[j].0).to_lowercase();
                rows.push((n, name.clone(), d));
                checks.push(Check::at_most(&name, d, p.agreement));
            }
        }
        if grid.n <= 96 && p.methods.contains(&SemigroupMethod::Expm) {
            let half = apply_semigroup(profile, &ctx, &grid, &f, 0.5 * tau, SemigroupMethod::Expm, &opts)?;
            let twice = apply_semigroup(profile, &ctx, &grid, &half, 0.5 * tau, SemigroupMethod::Expm, &opts)?;
            let full = &outs.iter().find(|(m, _)| *m == SemigroupMethod::Expm).expect("expm requested").1;
            let d = twice.rel_l2_diff(full, &grid);
            rows.push((n, format!("n={n}/composition"), d));
            checks.push(Check::at_most(&format!("n={n}/composition"), d, p.composition_tolerance));
        }
    }
    for (k, &n) in p.decay_modes.iter().enumerate() {
        let ctx = mode_ctx(profile, p.nu, n, p.gamma, delta)?;
        if classify(profile, p.nu, n, p.gamma)? != FrequencyRegime::High {
            return Err(Error::Config(format!("decay mode {n} is not in the high regime")));
        }
        let grid = semigroup_grid(profile, &ctx, nodes)?;
        let f = random_mode(&grid, ctx.alpha * n.signum() as f64, mix_seed(seed, "semigroup-decay", &[k as u64]));
        let shift = 0.25 * p.nu.sqrt() * ctx.alpha * ctx.alpha;
        let o = SemigroupOptions { shift, ..opts };
        for &t in &p.decay_times {
            let u = apply_semigroup(profile, &ctx, &grid, &f, t / p.nu.sqrt(), SemigroupMethod::Timestep, &o)?;
            // ‖e^{νn²t/4}e^{−t𝔸}f‖/‖f‖ ≤ 1
            let r = u.l2(&grid) / f.l2(&grid);
            let name = format!("n={n}/t={t}/decay");
            rows.push((n, name.clone(), r));
            checks.push(Check::at_most(&name, r, 1.0));
        }
    }
    if let Some(b) = &p.bounds {
        let bd = b.delta.unwrap_or(fam.delta_star);
        let sweep: Vec<ModeContext> = b.n.iter().map(|&n| mode_ctx(profile, p.nu, n, b.gamma, bd)).collect::<Result<_>>()?;
        let bo = BoundSweepOptions { seed, draws: b.draws, n_nodes: nodes, dt_max: p.dt_max };
        let rs = verify_semigroup_bounds(profile, &sweep, &b.times, &bo)?;
        for s in id_summaries(&rs) {
            checks.push(Check::flag(&format!("{}/finite", s.inequality_id), s.sup_ratio.is_finite(), None));
        }
        reports.extend(rs);
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["n", "check", "value"]).map_err(csv_err)?;
    for (n, name, v) in &rows {
        w.write_record(&[n.to_string(), name.clone(), format!("{v:.12e}")]).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
    Ok(Outcome { reports, checks, data: json!({ "delta": delta, "tau_factor": p.tau_factor }), csv: vec![("semigroup.csv".into(), bytes)] })
}

/// Grid for a Stokes mode of rescaled wavenumber `α`.
pub fn stokes_grid(alpha: f64, n_nodes: usize) -> Result<HalfLineGrid> {
    build_grid(n_nodes, Mapping::algebraic_for_decay(1.0, alpha.abs().max(1e-3)))
}

/// Grid for the energy identity: same length as [`stokes_grid`] with the nodes spread over
/// `Y ≲ 6`, where the diffused vorticity lives at the checked times.
pub fn stokes_energy_grid(alpha: f64, n_nodes: usize) -> Result<HalfLineGrid> {
    let length = Mapping::algebraic_for_decay(1.0, alpha.abs().max(1e-3)).length();
    build_grid(n_nodes, Mapping::Algebraic { ell: 6.0, length })
}

/// Random consistent pair for the interpolation check: `φ = Y·(draw)`, `w = (∂²−α²)φ` on the grid.
pub fn interpolation_pair(grid: &HalfLineGrid, alpha: f64, seed: u64) -> (Vec<C>, Vec<C>) {
    let d = smooth_draw(seed, 0.2, 1.0, false);
    let phi: Vec<C> = grid.nodes.iter().map(|&y| d.eval(y) * y).collect();
    let lap = grid.dyy(&phi);
    let w = lap.iter().zip(&phi).map(|(l, p)| l - p * alpha * alpha).collect();
    (phi, w)
}

fn run_stokes_check(p: &StokesCheckParams, scale: f64, seed: u64, delta0: f64) -> Result<Outcome> {
    let fam = DeltaFamily::from_delta0(delta0);
    let mut reports = Vec::new();
    let mut checks = Vec::new();
    let mut worst_energy = 0.0f64;
    for (ri, &res) in p.resolutions.iter().enumerate() {
        let nn = scaled(res, scale);
        for k in 0..p.draws {
            let n = p.modes[k % p.modes.len()] * if (k / p.modes.len()) % 2 == 0 { 1 } else { -1 };
            let alpha = p.nu.sqrt() * n as f64;
            let grid = stokes_grid(alpha, nn)?;
            let f = random_mode(&grid, alpha, mix_seed(seed, "stokes-data", &[k as u64]));
            let mut rs = check_stokes(p.nu, n, &grid, &f, &p.times, p.dt_max)?;
            for r in &mut rs {
                r.params["draw"] = json!(k);
            }
            reports.extend(rs);
            if p.interpolation {
                let (phi, w) = interpolation_pair(&grid, alpha.abs(), mix_seed(seed, "interpolation", &[k as u64]));
                let rho = WeightSpec::rho(n, p.gamma, fam.delta1);
                let mut r = check_interpolation(&grid, &phi, &w, &rho, alpha.abs())?;
                r.params["draw"] = json!(k);
                r.params["n"] = json!(n);
                reports.push(r);
            }
            if ri == 0 && k < p.energy_draws {
                let eg = stokes_energy_grid(alpha, scaled(p.energy_nodes, scale).min(EXPM_MAX_NODES))?;
                let ef = random_mode(&eg, alpha, mix_seed(seed, "stokes-data", &[k as u64]));
                for &t in &p.energy_times {
                    let d = stokes_energy_defect(p.nu, n, &eg, &ef, t, p.quad_nodes)?;
                    worst_energy = worst_energy.max(d.abs());
                }
            }
        }
    }
    if !p.energy_times.is_empty() {
        checks.push(Check::at_most("stokes-energy-identity", worst_energy, p.energy_tolerance));
    }
    checks.extend(stability_checks(&reports, p.stability));
    let sups = sup_by_resolution(&reports);
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["inequality_id", "resolution", "sup_ratio"]).map_err(csv_err)?;
    for ((id, n), s) in &sups {
        w.write_record(&[id.clone(), n.to_string(), format!("{s:.12e}")]).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
    Ok(Outcome { reports, checks, data: json!({ "energy_defect": worst_energy }), csv: vec![("stokes.csv".into(), bytes)] })
}

/// Writes a simulation state as CSV rows `(n, index, Y, re_u1, im_u1, re_u2, im_u2)` for
/// `n ≥ 0`; the negative modes follow by conjugation.
pub fn write_state_csv<W: Write>(out: W, grid: &HalfLineGrid, s: &SimState) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["n", "index", "Y", "re_u1", "im_u1", "re_u2", "im_u2"]).map_err(csv_err)?;
    for (&n, v) in s.modes.range(0..) {
        for i in 0..grid.n {
            w.write_record(&[
                n.to_string(),
                i.to_string(),
                format!("{:.17e}", grid.nodes[i]),
                format!("{:.17e}", v.u1[i].re),
                format!("{:.17e}", v.u1[i].im),
                format!("{:.17e}", v.u2[i].re),
                format!("{:.17e}", v.u2[i].im),
            ])
            .map_err(csv_err)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads a state written by [`write_state_csv`]; the grid size must match.
pub fn read_state_csv(path: &Path, n_nodes: usize) -> Result<SimState> {
    let mut rdr = csv::Reader::from_path(path)
        .map_err(|e| Error::Config(format!("cannot read initial state {}: {e}", path.display())))?;
    let mut modes: BTreeMap<i64, VelocityMode> = BTreeMap::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let field = |k: usize| -> Result<&str> {
            rec.get(k).ok_or_else(|| Error::Config(format!("{} row {}: missing column {k}", path.display(), line + 2)))
        };
        let num = |k: usize| -> Result<f64> {
            field(k)?.trim().parse().map_err(|_| Error::Config(format!("{} row {}: bad number", path.display(), line + 2)))
        };
        let n: i64 = field(0)?.trim().parse().map_err(|_| Error::Config(format!("{} row {}: bad mode", path.display(), line + 2)))?;
        let i: usize = field(1)?.trim().parse().map_err(|_| Error::Config(format!("{} row {}: bad index", path.display(), line + 2)))?;
        if n < 0 || i >= n_nodes {
            return Err(Error::Config(format!("{} row {}: mode {n} / index {i} out of range", path.display(), line + 2)));
        }
        let v = modes.entry(n).or_insert_with(|| VelocityMode::zeros(n_nodes));
        v.u1[i] = C::new(num(3)?, num(4)?);
        v.u2[i] = C::new(num(5)?, num(6)?);
    }
    let nx = modes.keys().copied().max().unwrap_or(0) as usize;
    let mut s = SimState::zeros(nx, n_nodes);
    for (n, v) in modes {
        s.set_mode(n, v);
    }
    Ok(s)
}

fn run_nonlinear_sim(profile: &ShearProfile, sc: &Scenario, p: &NonlinearSimParams, nodes: usize, scale: f64, seed: u64) -> Result<Outcome> {
    let d = p.d.unwrap_or(5.0 - 3.0 * p.gamma + 0.5);
    let z = ZNormParams::new(p.gamma, p.k, p.t_final, d, p.delta.unwrap_or(profile.delta0))
        .map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("params: {m}")),
            other => other,
        })?;
    let nx = scaled(p.nx, scale);
    let grid = sim_grid(p.nu, nodes)?;
    let amp = p.amplitude.unwrap_or(p.epsilon * p.nu.powf(0.5 + z.beta()));
    let a = match &p.initial_csv {
        Some(path) => read_state_csv(&sc.resolve_path(path), grid.n)?,
        None => gevrey_initial_data(&grid, p.nu, nx, &z, amp, mix_seed(seed, "nonlinear-initial", &[])),
    };
    let opts = SimOptions { min_steps: p.min_steps, output_every: p.output_every, ceiling: p.ceiling, accept_c: p.accept_c, ..SimOptions::default() };
    let run = simulate(profile, &a, &grid, p.nu, &z, &opts)?;
    let sup_z = run.state.history.iter().map(|h| h.z_norm).fold(0.0, f64::max);
    let params = json!({
        "nu": p.nu, "nx": a.nx(), "gamma": p.gamma, "K": p.k, "d": d, "delta": z.delta, "beta": z.beta(),
        "horizon": z.horizon(), "amplitude": amp, "steps": run.steps, "rejected_steps": run.rejected_steps,
    });
    let mut reports = vec![EstimateReport::new("nonlinear-Z", sup_z, run.a_norm, params.clone(), grid.n)];
    if run.state.time > 0.0 && run.stopped_early.is_none() {
        reports.push(check_convolution_bound(&run.state, &grid, &z, p.nu, run.state.time)?);
    }
    let mut checks = vec![Check::at_most("fitted-C", run.fitted_c, p.accept_c)];
    if let Some(why) = &run.stopped_early {
        checks.push(Check::flag("reached-horizon", false, Some(why.clone())));
    }
    checks.push(Check::at_most("divergence", run.state.divergence_defect(&grid, p.nu), 1e-8));
    checks.push(Check::at_most("reality", run.state.reality_defect(), 1e-8));
    let mut data = json!({ "a_norm": run.a_norm, "fitted_c": run.fitted_c, "stable": run.stable, "run": params });
    if p.linear_check {
        let tiny = gevrey_initial_data(&grid, p.nu, nx, &z, 1e-8 * p.nu.powf(0.5 + z.beta()), mix_seed(seed, "nonlinear-initial", &[]));
        let lc = linear_consistency(profile, &tiny, &grid, p.nu, &z, &opts, p.linear_dt)?;
        checks.push(Check::at_most("linear-consistency", lc.rel_diff, p.linear_tolerance));
        data["linear_consistency"] = serde_json::to_value(lc)?;
    }
    let mut hist = Vec::new();
    write_history_csv(&mut hist, &run.state.history)?;
    let mut state = Vec::new();
    write_state_csv(&mut state, &grid, &run.state)?;
    Ok(Outcome { reports, checks, data, csv: vec![("history.csv".into(), hist), ("final_state.csv".into(), state)] })
}

/// Samples `z = r e^{iψ}` with `r` at midpoints of `(0, r_max)` and `ψ ∈ [−π, 0]`.
pub fn sector_samples(r_max: f64, n_r: usize, n_theta: usize) -> Vec<C> {
    let mut out = Vec::with_capacity(n_r * n_theta);
    for i in 0..n_r {
        for j in 0..n_theta {
            let r = r_max * (i as f64 + 0.5) / n_r as f64;
            let psi = -std::f64::consts::PI * j as f64 / (n_theta - 1) as f64;
            out.push(C::from_polar(r, psi));
        }
    }
    out
}

fn run_airy_check(profile: &ShearProfile, p: &AiryCheckParams, nodes: usize) -> Result<Outcome> {
    let zero = C::new(0.0, 0.0);
    let (ai, aip) = airy(zero)?;
    let a00 = a0(zero)?;
    let mut checks = vec![
        Check::at_most("Ai(0)", (ai - AI0).norm(), p.value_tolerance),
        Check::at_most("Ai'(0)", (aip - AI0_PRIME).norm(), p.value_tolerance),
        Check::at_most("A0(0)", (a00 - 1.0 / 3.0).norm(), p.value_tolerance),
    ];
    let reports = check_airy_ratio_bounds(&sector_samples(p.r_max, p.n_r, p.n_theta), p.delta)?;
    for r in &reports {
        checks.push(Check::flag(&format!("{}/finite", r.inequality_id), r.ratio.is_finite(), None));
    }
    let mut data = json!({ "Ai0": [ai.re, ai.im], "Ai0_prime": [aip.re, aip.im], "A0_0": [a00.re, a00.im] });
    if let Some(s) = &p.wa_sweep {
        let fam = DeltaFamily::from_profile(profile);
        let mut worst = 0.0f64;
        let mut count = 0usize;
        for &nu in &s.nu {
            for &n in &s.n {
                for &[re, im] in &s.lambda {
                    let ctx = ModeContext::from_lambda(profile, nu, n, C::new(re, im), 0.75, fam.delta0, fam)?;
                    if !ctx.admissible {
                        continue;
                    }
                    let grid = ctx.default_grid(nodes)?;
                    let b = build_corrector(profile, &ctx, &grid)?;
                    worst = worst.max(b.wa_residual);
                    count += 1;
                }
            }
        }
        checks.push(Check::at_most("wa-residual", worst, p.wa_tolerance).with_detail(format!("{count} admissible points")));
        data["wa_points"] = json!(count);
    }
    Ok(Outcome { reports, checks, data, csv: Vec::new() })
}

fn execute(sc: &Scenario, profile: &ShearProfile, opts: &RunOptions, seed: u64) -> Result<Outcome> {
    let nodes = scaled(sc.numerics.n_nodes, opts.resolution_scale);
    let s = opts.resolution_scale;
    match &sc.params {
        Params::ProfileCheck(p) => run_profile_check(profile, p),
        Params::OsSolve(p) => run_os_solve(profile, sc, p, nodes, seed),
        Params::Corrector(p) => run_corrector(profile, sc, p, nodes, seed),
        Params::ResolventSweep(p) => run_resolvent_sweep(profile, sc, p, s, seed),
        Params::SemigroupCheck(p) => run_semigroup_check(profile, sc, p, nodes, seed),
        Params::StokesCheck(p) => run_stokes_check(p, s, seed, profile.delta0),
        Params::NonlinearSim(p) => run_nonlinear_sim(profile, sc, p, nodes, s, seed),
        Params::AiryCheck(p) => run_airy_check(profile, p, nodes),
    }
}

fn write_file(dir: &Path, name: &str, bytes: &[u8]) -> Result<String> {
    fs::write(dir.join(name), bytes)?;
    Ok(name.to_string())
}

/// Runs a validated scenario and writes its artifacts. Configuration problems surface as
/// `Err`; computational failures are recorded in the summary with status `error`.
pub fn run(sc: &Scenario, opts: &RunOptions) -> Result<RunSummary> {
    if !(opts.resolution_scale > 0.0 && opts.resolution_scale.is_finite()) {
        return Err(Error::Config(format!("--resolution-scale must be positive, got {}", opts.resolution_scale)));
    }
    let profile = sc.resolve_profile()?;
    let seed = opts.seed.unwrap_or(sc.seed);
    let dir = opts.out.clone().unwrap_or_else(|| PathBuf::from(&sc.output.dir));
    fs::create_dir_all(&dir)?;
    let outcome = execute(sc, &profile, opts, seed);
    let mut summary = RunSummary {
        schema: SUMMARY_SCHEMA.into(),
        kind: sc.kind,
        profile: profile.name.clone(),
        seed,
        resolution_scale: opts.resolution_scale,
        status: RunStatus::Pass,
        checks: Vec::new(),
        summaries: Vec::new(),
        data: Value::Null,
        error: None,
        artifacts: Vec::new(),
    };
    match outcome {
        Err(e) if exit_code_of(&e) == EXIT_CONFIG => return Err(e),
        Err(e) => {
            summary.status = RunStatus::Error;
            summary.error = Some(e.to_string());
        }
        Ok(out) => {
            summary.status = if out.checks.iter().all(|c| c.pass) { RunStatus::Pass } else { RunStatus::Fail };
            summary.summaries = id_summaries(&out.reports);
            summary.checks = out.checks;
            summary.data = out.data;
            if sc.output.formats.contains(&Format::Jsonl) {
                let mut buf = Vec::new();
                for r in &out.reports {
                    serde_json::to_writer(&mut buf, r)?;
                    buf.push(b'\n');
                }
                summary.artifacts.push(write_file(&dir, "reports.jsonl", &buf)?);
            }
            if sc.output.formats.contains(&Format::Csv) {
                for (name, bytes) in &out.csv {
                    summary.artifacts.push(write_file(&dir, name, bytes)?);
                }
            }
        }
    }
    if sc.output.formats.contains(&Format::Json) {
        summary.artifacts.push("summary.json".into());
        let text = serde_json::to_string_pretty(&summary)?;
        write_file(&dir, "summary.json", text.as_bytes())?;
    }
    Ok(summary)
}

/// Loads and runs a scenario file.
pub fn run_scenario(path: &Path, opts: &RunOptions) -> Result<RunSummary> {
    run(&Scenario::load(path)?, opts)
}

/// Sup ratio of one id at one resolution inside an aggregate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolutionPoint {
    pub resolution: usize,
    pub count: usize,
    pub sup_ratio: f64,
}

/// Cross-run row for one inequality id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub inequality_id: String,
    pub count: usize,
    pub sup_ratio: f64,
    pub argmax: Option<EstimateReport>,
    pub by_resolution: Vec<ResolutionPoint>,
    /// Percent drift `100|s₂ − s₁|/s₂` between consecutive resolutions.
    pub drift_percent: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateSummary {
    pub schema: String,
    pub inputs: Vec<String>,
    pub rows: Vec<AggregateRow>,
}

/// Reads JSONL report files, checking the schema tag of every line.
pub fn read_reports(path: &Path) -> Result<Vec<EstimateReport>> {
    let f = fs::File::open(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (k, line) in BufReader::new(f).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let v: Value = serde_json::from_str(&line)
            .map_err(|e| Error::Config(format!("{} line {}: {e}", path.display(), k + 1)))?;
        let found = v.get("schema").and_then(Value::as_str).unwrap_or("<missing>");
        if found != REPORT_SCHEMA {
            return Err(Error::Schema { expected: REPORT_SCHEMA.into(), found: found.into() });
        }
        // JSON has no infinity; serialized infinite ratios come back as null
        let mut v = v;
        if v.get("ratio").map_or(false, Value::is_null) {
            v["ratio"] = json!(f64::MAX);
        }
        out.push(serde_json::from_value(v).map_err(|e| Error::Config(format!("{} line {}: {e}", path.display(), k + 1)))?);
    }
    Ok(out)
}

/// Merges reports: global sup per id, per-resolution sup and the drift between resolutions.
pub fn aggregate_reports(inputs: Vec<String>, reports: &[EstimateReport]) -> AggregateSummary {
    let mut by: BTreeMap<&str, Vec<&EstimateReport>> = BTreeMap::new();
    for r in reports {
        by.entry(r.inequality_id.as_str()).or_default().push(r);
    }
    let rows = by
        .into_iter()
        .map(|(id, rs)| {
            let owned: Vec<EstimateReport> = rs.iter().map(|r| (*r).clone()).collect();
            let s = summarize(id, &owned);
            let mut res: BTreeMap<usize, (usize, f64)> = BTreeMap::new();
            for r in &rs {
                let e = res.entry(r.resolution).or_insert((0, 0.0));
                e.0 += 1;
                e.1 = e.1.max(r.ratio);
            }
            let by_resolution: Vec<ResolutionPoint> =
                res.iter().map(|(&n, &(c, s))| ResolutionPoint { resolution: n, count: c, sup_ratio: s }).collect();
            let drift_percent = by_resolution.windows(2).map(|w| 100.0 * drift(w[0].sup_ratio, w[1].sup_ratio)).collect();
            AggregateRow {
                inequality_id: id.to_string(),
                count: s.count,
                sup_ratio: s.sup_ratio,
                argmax: s.argmax,
                by_resolution,
                drift_percent,
            }
        })
        .collect();
    AggregateSummary { schema: AGGREGATE_SCHEMA.into(), inputs, rows }
}

/// Aggregates report files and writes `aggregate.json` and `trend.csv` when `out` is given.
pub fn aggregate(paths: &[PathBuf], out: Option<&Path>) -> Result<AggregateSummary> {
    let mut all = Vec::new();
    for p in paths {
        all.extend(read_reports(p)?);
    }
    let summary = aggregate_reports(paths.iter().map(|p| p.display().to_string()).collect(), &all);
    if let Some(dir) = out {
        fs::create_dir_all(dir)?;
        write_file(dir, "aggregate.json", serde_json::to_string_pretty(&summary)?.as_bytes())?;
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["inequality_id", "resolution", "count", "sup_ratio", "drift_percent"]).map_err(csv_err)?;
        for row in &summary.rows {
            for (k, pt) in row.by_resolution.iter().enumerate() {
                let d = if k == 0 { String::new() } else { format!("{:.6}", row.drift_percent[k - 1]) };
                w.write_record(&[row.inequality_id.clone(), pt.resolution.to_string(), pt.count.to_string(), format!("{:.12e}", pt.sup_ratio), d])
                    .map_err(csv_err)?;
            }
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
        write_file(dir, "trend.csv", &bytes)?;
    }
    Ok(summary)
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e.to_string()))
}
