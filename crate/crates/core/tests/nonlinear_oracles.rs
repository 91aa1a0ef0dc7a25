use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64 as C;
use osr_core::nonlinear::*;
use osr_core::numerics::grid::HalfLineGrid;
use osr_core::profiles::{make_builtin_profile, ShearProfile};
use osr_core::semigroup::{random_mode, VelocityMode};
use osr_core::Error;
use proptest::prelude::*;

const NU: f64 = 1e-3;

fn exp_profile() -> ShearProfile {
    make_builtin_profile("exp").unwrap()
}

fn znorm(p: &ShearProfile) -> ZNormParams {
    let g = 0.75;
    ZNormParams::new(g, 2.0, 1.0, 5.0 - 3.0 * g + 0.5, p.delta0).unwrap()
}

fn rel(a: &VelocityMode, b: &VelocityMode) -> f64 {
    let scale = a.u1.iter().chain(&a.u2).chain(&b.u1).chain(&b.u2).map(|z| z.norm()).fold(0.0, f64::max);
    a.max_abs_diff(b) / scale.max(1e-300)
}

fn max_mode_diff(a: &BTreeMap<i64, VelocityMode>, b: &BTreeMap<i64, VelocityMode>) -> f64 {
    a.iter().map(|(n, v)| rel(v, &b[n])).fold(0.0, f64::max)
}

/// `u·∇u` evaluated pointwise on an `x` grid fine enough to resolve products of the retained
/// modes, then transformed back by a discrete Fourier sum.
fn physical_space_convection(s: &SimState, grid: &HalfLineGrid, nu: f64) -> BTreeMap<i64, VelocityMode> {
    let nx = s.nx() as i64;
    let m = (3 * nx + 1) as usize;
    let nn = grid.n;
    let inv = 1.0 / nu.sqrt();
    let dy: BTreeMap<i64, (Vec<C>, Vec<C>)> =
        s.modes.iter().map(|(&n, v)| (n, (grid.dy(&v.u1), grid.dy(&v.u2)))).collect();
    let mut out: BTreeMap<i64, VelocityMode> = (-nx..=nx).map(|n| (n, VelocityMode::zeros(nn))).collect();
    for j in 0..m {
        let x = 2.0 * PI * j as f64 / m as f64;
        for i in 0..nn {
            let (mut u1, mut u2, mut u1x, mut u2x, mut u1y, mut u2y) = (C::default(), C::default(), C::default(), C::default(), C::default(), C::default());
            for (&n, v) in &s.modes {
                let e = C::from_polar(1.0, n as f64 * x);
                let ine = C::new(0.0, n as f64) * e;
                u1 += v.u1[i] * e;
                u2 += v.u2[i] * e;
                u1x += v.u1[i] * ine;
                u2x += v.u2[i] * ine;
                u1y += dy[&n].0[i] * e * inv;
                u2y += dy[&n].1[i] * e * inv;
            }
            let n1 = u1 * u1x + u2 * u1y;
            let n2 = u1 * u2x + u2 * u2y;
            for (&n, o) in out.iter_mut() {
                let e = C::from_polar(1.0 / m as f64, -(n as f64) * x);
                o.u1[i] += n1 * e;
                o.u2[i] += n2 * e;
            }
        }
    }
    out
}

fn random_state(grid: &HalfLineGrid, nx: usize, seed: u64, z: &ZNormParams) -> SimState {
    gevrey_initial_data(grid, NU, nx, z, 1.0, seed)
}

#[test]
fn shear_states_have_no_nonlinearity() {
    let p = exp_profile();
    let grid = sim_grid(NU, 48).unwrap();
    let z = znorm(&p);
    let mut s = SimState::zeros(4, grid.n);
    let full = random_state(&grid, 4, 3, &z);
    s.set_mode(0, full.modes[&0].clone());
    let nl = nonlinear_term(&s, &grid, NU).unwrap();
    for v in nl.values() {
        assert_eq!(v.l2(&grid), 0.0);
    }
}

#[test]
fn convolution_matches_physical_space_products() {
    let p = exp_profile();
    let grid = sim_grid(NU, 48).unwrap();
    let s = random_state(&grid, 3, 11, &znorm(&p));
    let oracle: BTreeMap<i64, VelocityMode> = physical_space_convection(&s, &grid, NU)
        .into_iter()
        .map(|(n, v)| (n, leray_project(&grid, NU, n, &v).unwrap()))
        .collect();
    let got = nonlinear_term(&s, &grid, NU).unwrap();
    let d = max_mode_diff(&got, &oracle);
    assert!(d < 1e-10, "convolution vs physical-space products: {d:e}");
}

#[test]
fn leray_projection_is_idempotent_and_solenoidal() {
    let p = exp_profile();
    let grid = sim_grid(NU, 64).unwrap();
    let s = random_state(&grid, 3, 5, &znorm(&p));
    let conv = physical_space_convection(&s, &grid, NU);
    for n in 1..=3 {
        let once = leray_project(&grid, NU, n, &conv[&n]).unwrap();
        let twice = leray_project(&grid, NU, n, &once).unwrap();
        assert!(rel(&once, &twice) < 1e-12, "n={n}: {:e}", rel(&once, &twice));
        // the projection keeps the normal trace zero; the tangential trace is free
        let a = NU.sqrt() * n as f64;
        let d2 = grid.dy(&once.u2);
        let div: Vec<C> = once.u1.iter().zip(&d2).map(|(u, d)| C::new(0.0, a) * u + d).collect();
        let div_l2 = (grid.integrate(&div.iter().map(|z| C::new(z.norm_sqr(), 0.0)).collect::<Vec<_>>()).re).sqrt();
        assert!(div_l2 < 1e-10 * once.l2(&grid), "n={n}: divergence {div_l2:e}");
        assert!(once.u2[0].norm() < 1e-12 * once.sup(&grid));
    }
    // a field that is already solenoidal and nonslip is left alone
    let f = random_mode(&grid, NU.sqrt() * 2.0, 9);
    assert!(rel(&leray_project(&grid, NU, 2, &f).unwrap(), &f) < 1e-10);
}

#[test]
fn convolution_bound_on_trivial_and_translated_states() {
    let p = exp_profile();
    let z = znorm(&p);
    let grid = sim_grid(NU, 48).unwrap();
    let zero = SimState::zeros(4, grid.n);
    let r = check_convolution_bound(&zero, &grid, &z, NU, 0.01).unwrap();
    assert_eq!(r.ratio, 0.0);
    assert_eq!(r.inequality_id, "convolution-bound");

    let s = random_state(&grid, 4, 21, &z);
    let r0 = check_convolution_bound(&s, &grid, &z, NU, 0.01).unwrap();
    assert!(r0.ratio.is_finite() && r0.ratio > 0.0);
    for x0 in [0.3, 1.7, 4.0] {
        let r1 = check_convolution_bound(&s.translate(x0), &grid, &z, NU, 0.01).unwrap();
        assert!((r1.ratio - r0.ratio).abs() <= 1e-9 * r0.ratio, "x0={x0}: {} vs {}", r1.ratio, r0.ratio);
    }
    assert!(matches!(check_convolution_bound(&s, &grid, &z, NU, 0.0), Err(Error::Domain(_))));
}

#[test]
fn convolution_ratio_is_stable_under_truncation_doubling() {
    let p = exp_profile();
    let z = znorm(&p);
    let grid = sim_grid(NU, 64).unwrap();
    // a single-mode state has no content beyond 2|n|, so its ratio does not see N_x
    let mut single = [SimState::zeros(4, grid.n), SimState::zeros(8, grid.n)];
    let f = random_mode(&grid, NU.sqrt() * 2.0, 4);
    for s in &mut single {
        s.set_mode(2, f.clone());
    }
    let r: Vec<f64> = single.iter().map(|s| check_convolution_bound(s, &grid, &z, NU, 0.02).unwrap().ratio).collect();
    assert!((r[0] - r[1]).abs() <= 1e-12 * r[0], "single mode: {r:?}");

    // Gevrey-decaying random states: modes beyond N_x are negligible
    let r: Vec<f64> = [8usize, 16]
        .iter()
        .map(|&nx| check_convolution_bound(&random_state(&grid, nx, 13, &z), &grid, &z, NU, 0.02).unwrap().ratio)
        .collect();
    assert!((r[1] / r[0] - 1.0).abs() < 0.1, "random state: {r:?}");
}

#[test]
fn zero_data_stay_zero() {
    let p = exp_profile();
    let z = znorm(&p);
    let grid = sim_grid(NU, 48).unwrap();
    let run = simulate(&p, &SimState::zeros(4, grid.n), &grid, NU, &z, &SimOptions::default()).unwrap();
    assert_eq!(run.a_norm, 0.0);
    for v in run.state.modes.values() {
        assert_eq!(v.l2(&grid), 0.0);
    }
    assert!(run.state.history.iter().all(|h| h.z_norm == 0.0));
}

#[test]
fn small_data_follow_the_linear_evolution() {
    let p = exp_profile();
    let z = znorm(&p);
    let grid = sim_grid(NU, 64).unwrap();
    let amp = 1e-8 * NU.powf(0.5 + z.beta());
    let a = gevrey_initial_data(&grid, NU, 6, &z, amp, 17);
    let lc = linear_consistency(&p, &a, &grid, NU, &z, &SimOptions::default(), 5e-4).unwrap();
    assert!(lc.rel_diff < 1e-4, "{lc:?}");
    assert!((lc.horizon - z.horizon()).abs() < 1e-12);
}

#[test]
fn runs_preserve_invariants_and_satisfy_the_energy_inequality() {
    let p = exp_profile();
    let z = znorm(&p);
    let grid = sim_grid(NU, 64).unwrap();
    let nx = 6;
    // large enough for the nonlinearity to matter at this resolution
    let a = gevrey_initial_data(&grid, NU, nx, &z, 1e-2, 23);
    let opts = SimOptions { output_every: 1, ..SimOptions::default() };
    let run = simulate(&p, &a, &grid, NU, &z, &opts).unwrap();
    assert!(run.stopped_early.is_none());
    assert!(run.state.divergence_defect(&grid, NU) < 1e-8);
    assert!(run.state.reality_defect() < 1e-8);
    assert!(run.state.wall_defect() < 1e-8);

    // d/dt‖u‖² ≤ 2‖Y∂_Y U‖_∞ N_x ‖u‖² − 2ν‖∇u‖², with ‖Y e^{−Y}‖_∞ = 1/e for the exp profile
    let c = 2.0 * (-1.0f64).exp() * nx as f64;
    let h = &run.state.history;
    for w in h.windows(2) {
        let dt = w[1].t - w[0].t;
        let lhs = (w[1].energy - w[0].energy) / dt;
        let e = 0.5 * (w[0].energy + w[1].energy);
        let dis = 0.5 * (w[0].dissipation + w[1].dissipation);
        let rhs = c * e - 2.0 * NU * dis;
        assert!(lhs <= rhs + 1e-3 * (c * e + 2.0 * NU * dis), "t={}: {lhs:e} > {rhs:e}", w[1].t);
    }

    // K(t) decreases and the Z history has no jumps between outputs
    assert!(h.windows(2).all(|w| z.k_of_t(w[1].t) < z.k_of_t(w[0].t)));
    let jump = h.windows(2).map(|w| (w[1].z_norm / w[0].z_norm - 1.0).abs()).fold(0.0, f64::max);
    assert!(jump < 0.05, "largest relative Z jump {jump}");
    assert!((run.state.time - z.horizon()).abs() < 1e-12);
}

#[test]
fn fitted_constant_is_stable_under_resolution_doubling() {
    let p = exp_profile();
    let z = znorm(&p);
    let amp = 1e-2 * NU.powf(0.5 + z.beta());
    let c: Vec<f64> = [(4usize, 48usize), (8, 96)]
        .iter()
        .map(|&(nx, nn)| {
            let grid = sim_grid(NU, nn).unwrap();
            let a = gevrey_initial_data(&grid, NU, nx, &z, amp, 31);
            assert!((x1_norm(&a, &grid, NU, &z) / amp - 1.0).abs() < 1e-12);
            let run = simulate(&p, &a, &grid, NU, &z, &SimOptions::default()).unwrap();
            assert!(run.stable);
            run.fitted_c
        })
        .collect();
    assert!((c[1] / c[0] - 1.0).abs() < 0.15, "{c:?}");
}

#[test]
fn parameter_validation() {
    let p = exp_profile();
    // q = d − 3(1−γ) − 1 must exceed 1
    assert!(matches!(ZNormParams::new(0.75, 1.0, 1.0, 2.5, p.delta0), Err(Error::Config(_))));
    assert!(matches!(ZNormParams::new(0.5, 1.0, 1.0, 4.0, p.delta0), Err(Error::Config(_))));
    assert!(matches!(ZNormParams::new(0.75, -1.0, 1.0, 4.0, p.delta0), Err(Error::Config(_))));
    let z = znorm(&p);
    assert!((z.horizon() - 0.5 * p.delta0 * 2.0).abs() < 1e-15);
    // γ = 3/4: the first branch dominates
    assert!((z.beta() - (7.0 / 24.0 + 1.0 / 6.0 + BETA_EXCESS)).abs() < 1e-14);
    let grid = sim_grid(NU, 32).unwrap();
    let mut a = SimState::zeros(2, grid.n);
    a.modes.remove(&-2);
    assert!(matches!(simulate(&p, &a, &grid, NU, &z, &SimOptions::default()), Err(Error::Config(_))));
}

#[test]
fn history_csv_has_one_row_per_output() {
    let h = vec![
        HistoryEntry { t: 0.0, x_norm: 1.0, y_norm: 2.0, grad_norm: 3.0, z_norm: 4.0, energy: 0.0, dissipation: 0.0 };
        3
    ];
    let mut buf = Vec::new();
    write_history_csv(&mut buf, &h).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 4);
    assert_eq!(lines[0], "t,x_norm,y_norm,grad_norm,z_norm");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn gevrey_radius_decreases_and_beta_sits_in_range(g in 2.0f64/3.0..1.0, k in 0.1f64..5.0, t in 0.0f64..1.0) {
        let z = ZNormParams { gamma: g, k, t_final: 1.0, d: 5.0 - 3.0 * g + 0.5, delta: 0.1 };
        prop_assert!(z.k_of_t(t + 1e-3) < z.k_of_t(t));
        prop_assert!(z.k_of_t(z.horizon()) >= -1e-12);
        let b = z.beta();
        prop_assert!(b >= 3.0 / 16.0 && b <= 1.0);
        prop_assert!(z.q() > 1.0 && z.q() < z.d);
    }

    #[test]
    fn bound_ratio_is_translation_invariant(seed in 0u64..1000, x0 in 0.0f64..6.3) {
        let p = exp_profile();
        let z = znorm(&p);
        let grid = sim_grid(NU, 32).unwrap();
        let s = random_state(&grid, 3, seed, &z);
        let r0 = check_convolution_bound(&s, &grid, &z, NU, 0.05).unwrap().ratio;
        let r1 = check_convolution_bound(&s.translate(x0), &grid, &z, NU, 0.05).unwrap().ratio;
        prop_assert!((r0 - r1).abs() <= 1e-9 * r0);
    }
}
