//! Acceptance suite: one test per criterion, each printing a single PASS/FAIL line with its
//! measured value and runtime. Scenario-driven criteria run the shipped scenario files through
//! the harness; the rest are computed directly against independent oracles.
//!
//! A shared lock serializes the criteria so that wall-clock budgets are measured without
//! competition from the other criteria on the same machine.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use num_complex::Complex64 as C;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::function::gamma::gamma;

use osr_core::harness::{run, Params, RunOptions, RunStatus, RunSummary, Scenario};
use osr_core::numerics::grid::{build_grid, HalfLineGrid, Mapping};
use osr_core::numerics::norms::h1_pair;
use osr_core::numerics::quadrature::gauss_legendre_on;
use osr_core::numerics::random::{mix_seed, smooth_draw};
use osr_core::ossolve::*;
use osr_core::profiles::{check_sc, default_nodes, make_builtin_profile, ShearProfile, DEFAULT_LENGTH};
use osr_core::resolvent::{check_hypotheses, classify, rayleigh_gap, InequalityId, DEFAULT_THETA};
use osr_core::specfun::{a0, airy};

static SERIAL: Mutex<()> = Mutex::new(());

const I: C = C { re: 0.0, im: 1.0 };

fn serial() -> std::sync::MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|e| e.into_inner())
}

/// Prints the criterion line on stderr (not captured by the test runner) and returns the verdict.
fn verdict(k: u32, name: &str, pass: bool, detail: &str, elapsed: Duration, budget_s: f64) -> bool {
    let in_time = elapsed.as_secs_f64() < budget_s;
    let ok = pass && in_time;
    let tag = if ok { "PASS" } else { "FAIL" };
    let _ = writeln!(
        std::io::stderr(),
        "{tag} criterion {k} {name}: {detail}; {:.1}s (budget {budget_s}s)",
        elapsed.as_secs_f64()
    );
    ok
}

fn exp_profile() -> ShearProfile {
    make_builtin_profile("exp").unwrap()
}

fn scenario(name: &str) -> Scenario {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(format!("{name}.toml"));
    Scenario::load(&path).unwrap()
}

fn out_dir(name: &str) -> PathBuf {
    Path::new(env!("CARGO_TARGET_TMPDIR")).join("acceptance").join(name)
}

fn run_scaled(sc: &Scenario, name: &str, scale: f64) -> RunSummary {
    let opts = RunOptions { out: Some(out_dir(name)), seed: None, resolution_scale: scale };
    run(sc, &opts).unwrap()
}

fn failing(s: &RunSummary) -> Vec<String> {
    s.checks.iter().filter(|c| !c.pass).map(|c| format!("{} = {:.3e}", c.name, c.value)).collect()
}

fn check_value(s: &RunSummary, name: &str) -> f64 {
    s.checks.iter().find(|c| c.name == name).unwrap_or_else(|| panic!("no check `{name}`")).value
}

fn worst_matching(s: &RunSummary, pred: impl Fn(&str) -> bool) -> (usize, f64) {
    let vals: Vec<f64> = s.checks.iter().filter(|c| pred(&c.name)).map(|c| c.value).collect();
    (vals.len(), vals.iter().cloned().fold(0.0, f64::max))
}

#[test]
fn criterion_1_wall_flux_identity() {
    let _g = serial();
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = 0.0f64;
    for k in 0..100u64 {
        let alpha: f64 = (rng.gen_range(0.1f64.ln()..3.0f64.ln())).exp();
        let draw = smooth_draw(mix_seed(11, "wall-flux", &[k]), 0.2, 1.0, false);
        let grid = build_grid(128, Mapping::algebraic_for_decay(1.0, alpha)).unwrap();
        let w = draw.sample(&grid.nodes);
        let phi = stream_from_vorticity(&grid, alpha, &w).unwrap();
        let lhs = -grid.dy(&phi)[0];
        // ∫₀^∞ w e^{−αY} on the continuous draw, Gauss–Legendre panels out to Y = 80 (w < 1e-30 beyond)
        let mut rhs = C::new(0.0, 0.0);
        for p in 0..80 {
            let (x, wt) = gauss_legendre_on(24, p as f64, p as f64 + 1.0);
            for (y, q) in x.iter().zip(&wt) {
                rhs += draw.eval(*y) * (-alpha * y).exp() * *q;
            }
        }
        worst = worst.max((lhs - rhs).norm() / rhs.norm().max(1.0));
    }
    let grid = build_grid(128, Mapping::Algebraic { ell: 2.0, length: 60.0 }).unwrap();
    let w = grid.sample_c(|y| C::new((-y).exp(), 0.0));
    let phi = stream_from_vorticity(&grid, 1.0, &w).unwrap();
    let closed = (grid.dy(&phi)[0] + 0.5).norm();
    let pass = worst <= 1e-8 && closed <= 1e-9;
    let detail = format!("100 draws worst {worst:.2e} (≤ 1e-8), e^(-Y) case |∂φ(0)+1/2| = {closed:.2e} (≤ 1e-9)");
    assert!(verdict(1, "wall-flux identity", pass, &detail, t0.elapsed(), 10.0));
}

#[test]
fn criterion_2_airy() {
    let _g = serial();
    let t0 = Instant::now();
    let z0 = C::new(0.0, 0.0);
    let (ai, aip) = airy(z0).unwrap();
    let ai_exact = 1.0 / (3f64.powf(2.0 / 3.0) * gamma(2.0 / 3.0));
    let aip_exact = -1.0 / (3f64.powf(1.0 / 3.0) * gamma(1.0 / 3.0));
    // A0(0) = ∫₀^∞ Ai against composite Simpson of the evaluator on [0, 20]
    let (h, m) = (1e-3, 20_000);
    let mut acc = 0.0;
    for i in 0..=m {
        let w = if i == 0 || i == m { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * airy(C::new(i as f64 * h, 0.0)).unwrap().0.re;
    }
    let quad = acc * h / 3.0;
    let a00 = a0(z0).unwrap();
    let e_ai = (ai - ai_exact).norm();
    let e_aip = (aip - aip_exact).norm();
    let e_a0 = (a00 - 1.0 / 3.0).norm().max((a00 - quad).norm());
    let summary = run_scaled(&scenario("airy"), "airy", 1.0);
    let points = summary.data["wa_points"].as_u64().unwrap_or(0);
    let wa = check_value(&summary, "wa-residual");
    let pass = e_ai <= 1e-10 && e_aip <= 1e-10 && e_a0 <= 1e-10 && points >= 30 && wa <= 1e-7 && summary.status == RunStatus::Pass;
    let detail = format!(
        "Ai(0) {e_ai:.1e}, Ai'(0) {e_aip:.1e}, A0(0) {e_a0:.1e} (≤ 1e-10); W_a residual {wa:.2e} on {points} points (≤ 1e-7); failing {:?}",
        failing(&summary)
    );
    assert!(verdict(2, "Airy functions", pass, &detail, t0.elapsed(), 30.0));
}

/// Forcing for a stream function given with four derivatives, for `V = 1 − e^{−Y}`.
fn forcing(c: &ModeContext, y: f64, d: [f64; 5]) -> C {
    let a = c.alpha;
    let (v, vpp) = (1.0 - (-y).exp(), -(-y).exp());
    let w = d[2] - a * a * d[0];
    let lap_w = d[4] - a * a * d[2] - a * a * w;
    -c.nu.sqrt() * lap_w + I * a * ((v - c.lambda) * w - vpp * d[0])
}

fn rel_pair(grid: &HalfLineGrid, a: &[C], b: &[C], alpha: f64) -> f64 {
    let d: Vec<C> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    h1_pair(grid, &d, alpha) / h1_pair(grid, b, alpha)
}

#[test]
fn criterion_3_solver_equivalence() {
    let _g = serial();
    let t0 = Instant::now();
    let p = exp_profile();
    let fam = DeltaFamily::from_profile(&p);
    let mut cases = Vec::new();
    'outer: for nu in [1e-4, 1e-3] {
        for n in [20i64, 64, 200, 600] {
            for lam in [(0.3, 7.0), (0.5, 10.0), (0.2, 3.0), (0.8, 15.0), (0.1, 5.0), (0.6, 25.0)] {
                let c = ModeContext::from_lambda(&p, nu, n, C::new(lam.0, lam.1), 0.75, fam.delta0, fam).unwrap();
                if c.admissible && classify(&p, nu, n, 0.75).unwrap().is_middle() {
                    cases.push(c);
                }
                if cases.len() == 20 {
                    break 'outer;
                }
            }
        }
    }
    let mut worst = 0.0f64;
    for (k, c) in cases.iter().enumerate() {
        let g = c.default_grid(128).unwrap();
        let b = build_corrector(&p, c, &g).unwrap();
        let d1 = smooth_draw(mix_seed(3, "equivalence", &[k as u64, 0]), 0.2, 1.0, false);
        let d2 = smooth_draw(mix_seed(3, "equivalence", &[k as u64, 1]), 0.2, 1.0, false);
        let rhs = RhsSpec::Pair { f1: d1.sample(&g.nodes), f2: d2.sample(&g.nodes) };
        let navier = solve_os_navier(&p, c, &rhs, &g).unwrap();
        let direct = solve_os_nonslip(&p, c, &rhs, &g).unwrap();
        let asm = assemble_nonslip(&navier, &b, &g).unwrap();
        worst = worst.max(rel_pair(&g, &asm.phi, &direct.phi, c.alpha));
    }
    // manufactured solutions at N = 96: Y²e^{−Y} for the nonslip and Y³e^{−Y} for the Navier problem
    let mut manufactured = 0.0f64;
    let g = build_grid(96, Mapping::Algebraic { ell: 2.0, length: 60.0 }).unwrap();
    for c in cases.iter().take(5) {
        let d2 = |y: f64| {
            let e = (-y).exp();
            [y * y * e, (2.0 * y - y * y) * e, (2.0 - 4.0 * y + y * y) * e, (-6.0 + 6.0 * y - y * y) * e, (12.0 - 8.0 * y + y * y) * e]
        };
        let d3 = |y: f64| {
            let e = (-y).exp();
            let (y2, y3) = (y * y, y * y * y);
            [y3 * e, (3.0 * y2 - y3) * e, (6.0 * y - 6.0 * y2 + y3) * e, (6.0 - 18.0 * y + 9.0 * y2 - y3) * e, (-24.0 + 36.0 * y - 12.0 * y2 + y3) * e]
        };
        let f = g.sample_c(|y| forcing(c, y, d2(y)));
        let sol = solve_os_nonslip(&p, c, &RhsSpec::Raw { f }, &g).unwrap();
        manufactured = manufactured.max(rel_pair(&g, &sol.phi, &g.sample_c(|y| C::new(d2(y)[0], 0.0)), c.alpha));
        let f = g.sample_c(|y| forcing(c, y, d3(y)));
        let sol = solve_os_navier(&p, c, &RhsSpec::Raw { f }, &g).unwrap();
        manufactured = manufactured.max(rel_pair(&g, &sol.phi, &g.sample_c(|y| C::new(d3(y)[0], 0.0)), c.alpha));
    }
    let pass = cases.len() == 20 && worst <= 1e-6 && manufactured <= 1e-6;
    let detail = format!(
        "{} admissible middle-regime cases, assembled vs direct {worst:.2e} (≤ 1e-6); manufactured {manufactured:.2e} (≤ 1e-6)",
        cases.len()
    );
    assert!(verdict(3, "solver equivalence", pass, &detail, t0.elapsed(), 120.0));
}

#[test]
fn criterion_4_resolvent_estimates() {
    let _g = serial();
    let t0 = Instant::now();
    let sc = scenario("sweep");
    let Params::ResolventSweep(p) = &sc.params else { panic!("sweep scenario has the wrong kind") };
    let summary = run_scaled(&sc, "sweep", 1.0);
    let ids = if p.ids.is_empty() { InequalityId::ALL.len() } else { p.ids.len() };
    let (n_points, _) = worst_matching(&summary, |n| n.ends_with("/points"));
    let (n_drift, drift) = worst_matching(&summary, |n| n.ends_with("/drift"));
    let (n_finite, _) = worst_matching(&summary, |n| n.ends_with("/finite"));
    let min_points = summary.checks.iter().filter(|c| c.name.ends_with("/points")).map(|c| c.value).fold(f64::INFINITY, f64::min);
    let pass = summary.status == RunStatus::Pass
        && ids >= 14
        && n_points == ids
        && n_finite == ids
        && n_drift == ids
        && p.resolutions == [64, 128]
        && min_points >= 50.0
        && drift < 0.1;
    let detail = format!(
        "{ids} ids, fewest points {min_points}, worst N=64→128 drift {:.2}% (< 10%); failing {:?}",
        100.0 * drift,
        failing(&summary)
    );
    assert!(verdict(4, "resolvent estimates", pass, &detail, t0.elapsed(), 900.0));
}

#[test]
fn criterion_5_rayleigh_trick_sign() {
    let _g = serial();
    let t0 = Instant::now();
    let p = exp_profile();
    let fam = DeltaFamily::from_profile(&p);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = f64::INFINITY;
    let (mut count, mut tries) = (0, 0);
    while count < 200 && tries < 20_000 {
        tries += 1;
        let nu = if rng.gen_bool(0.5) { 1e-4 } else { 1e-3 };
        let n = rng.gen_range(10i64..400);
        let lam = C::new(rng.gen_range(-1.0..1.0), rng.gen_range(0.05f64.ln()..5.0f64.ln()).exp());
        let ctx = ModeContext::from_lambda(&p, nu, n, lam, 0.75, fam.delta_star, fam).unwrap();
        if check_hypotheses(InequalityId::RayleighTrickFirst, &ctx, DEFAULT_THETA).is_err() {
            continue;
        }
        let grid = ctx.default_grid(64).unwrap();
        let phi = smooth_draw(rng.gen(), 0.2, 1.0, true).sample(&grid.nodes);
        let gap = rayleigh_gap(&p, &ctx, &grid, &phi, false).unwrap();
        worst = worst.min(gap.rhs - gap.lhs);
        count += 1;
    }
    let pass = count == 200 && worst >= -1e-8;
    let detail = format!("{count} admissible samples, smallest gap {worst:.3e} (≥ -1e-8)");
    assert!(verdict(5, "Rayleigh-trick sign", pass, &detail, t0.elapsed(), 60.0));
}

#[test]
fn criterion_6_semigroup() {
    let _g = serial();
    let t0 = Instant::now();
    let sc = scenario("semigroup");
    let Params::SemigroupCheck(p) = &sc.params else { panic!("semigroup scenario has the wrong kind") };
    let p0 = exp_profile();
    let middle = p.modes.iter().filter(|&&n| classify(&p0, p.nu, n, p.gamma).unwrap().is_middle()).count();
    let summary = run_scaled(&sc, "semigroup", 1.0);
    let (n_agree, agree) = worst_matching(&summary, |n| n.contains("-vs-"));
    let (n_comp, comp) = worst_matching(&summary, |n| n.ends_with("/composition"));
    let (n_decay, decay) = worst_matching(&summary, |n| n.ends_with("/decay"));
    let pass = summary.status == RunStatus::Pass
        && middle >= 5
        && p.tau_factor >= 1.0
        && n_agree >= 15
        && agree <= 1e-6
        && n_comp >= 5
        && comp <= 1e-8
        && n_decay >= 1
        && decay <= 1.0;
    let detail = format!(
        "{middle} middle-regime modes at tau = {}/alpha, pairwise {agree:.2e} (≤ 1e-6), composition {comp:.2e} (≤ 1e-8), decay ratio {decay:.2e} (≤ 1)",
        p.tau_factor
    );
    assert!(verdict(6, "semigroup cross-validation", pass, &detail, t0.elapsed(), 300.0));
}

#[test]
fn criterion_7_stokes() {
    let _g = serial();
    let t0 = Instant::now();
    let sc = scenario("stokes");
    let Params::StokesCheck(p) = &sc.params else { panic!("stokes scenario has the wrong kind") };
    let summary = run_scaled(&sc, "stokes", 1.0);
    let energy = check_value(&summary, "stokes-energy-identity");
    let (n_drift, drift) = worst_matching(&summary, |n| n.ends_with("/drift"));
    let pass = summary.status == RunStatus::Pass && p.draws >= 50 && n_drift == 4 && energy <= 1e-8 && drift < 0.1;
    let detail = format!(
        "energy defect {energy:.2e} (≤ 1e-8), {} draws, worst drift over 3 displays + interpolation {:.3}% (< 10%); failing {:?}",
        p.draws,
        100.0 * drift,
        failing(&summary)
    );
    assert!(verdict(7, "Stokes semigroup", pass, &detail, t0.elapsed(), 120.0));
}

#[test]
fn criterion_8_nonlinear() {
    let _g = serial();
    let t0 = Instant::now();
    let sc = scenario("simulate");
    let Params::NonlinearSim(p) = &sc.params else { panic!("simulate scenario has the wrong kind") };
    let coarse = run_scaled(&sc, "simulate-1", 1.0);
    let t_coarse = t0.elapsed();
    let fine = run_scaled(&sc, "simulate-2", 2.0);
    let c1 = coarse.data["fitted_c"].as_f64().unwrap_or(f64::NAN);
    let c2 = fine.data["fitted_c"].as_f64().unwrap_or(f64::NAN);
    let drift = (c2 - c1).abs() / c2;
    let lin = check_value(&coarse, "linear-consistency");
    let setup = p.nu == 1e-3 && p.gamma == 0.75 && p.nx == 16 && sc.numerics.n_nodes == 96 && p.epsilon == 1e-2;
    let pass = setup && coarse.status == RunStatus::Pass && fine.status == RunStatus::Pass && drift < 0.15 && lin <= 1e-4;
    let detail = format!(
        "C = {c1:.5} (16, 96) vs {c2:.5} (32, 192), drift {:.2}% (< 15%); linear consistency {lin:.2e} (≤ 1e-4); base run {:.1}s",
        100.0 * drift,
        t_coarse.as_secs_f64()
    );
    // the time budget is stated for the base resolution
    assert!(verdict(8, "nonlinear stability", pass, &detail, t_coarse, 1200.0));
}

#[test]
fn criterion_9_sc_gatekeeping() {
    let _g = serial();
    let t0 = Instant::now();
    let nodes = default_nodes(DEFAULT_LENGTH);
    let e = check_sc(&exp_profile(), &nodes);
    let t = check_sc(&make_builtin_profile("tanh").unwrap(), &nodes);
    let m_err = (e.minimal_m - 2.0).abs() / 2.0;
    let witness = t.witness.unwrap_or(f64::INFINITY);
    let pass = e.pass && m_err <= 0.01 && !t.pass && witness < 0.5;
    let detail = format!("exp M = {:.6} (2 ± 1%), tanh fails with witness Y = {witness}", e.minimal_m);
    assert!(verdict(9, "strong-concavity gate", pass, &detail, t0.elapsed(), 1.0));
}
