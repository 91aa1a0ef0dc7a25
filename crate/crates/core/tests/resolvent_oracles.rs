use num_complex::Complex64 as C;
use osr_core::numerics::norms::{h1_pair, l2_pair, WeightSpec};
use osr_core::numerics::random::smooth_draw;
use osr_core::ossolve::{solve_os_nonslip, DeltaFamily, ModeContext, RhsSpec};
use osr_core::profiles::{make_builtin_profile, ShearProfile};
use osr_core::resolvent::*;
use osr_core::Error;
use proptest::prelude::*;

fn exp() -> ShearProfile {
    make_builtin_profile("exp").unwrap()
}

fn fam(p: &ShearProfile) -> DeltaFamily {
    DeltaFamily::from_profile(p)
}

#[test]
fn frequency_regimes_of_reference_modes() {
    let p = exp();
    assert_eq!(classify(&p, 1e-4, 100, 2.0 / 3.0).unwrap(), FrequencyRegime::MiddleSmall);
    assert_eq!(classify(&p, 1e-4, 1, 2.0 / 3.0).unwrap(), FrequencyRegime::Low);
    assert_eq!(classify(&p, 1e-4, 1_000_000, 2.0 / 3.0).unwrap(), FrequencyRegime::High);
    assert_eq!(classify(&p, 1e-4, 1000, 1.0).unwrap(), FrequencyRegime::MiddleLarge);
    assert_eq!(classify(&p, 1e-4, -100, 2.0 / 3.0).unwrap(), FrequencyRegime::MiddleSmall);
    assert!(matches!(classify(&p, 0.0, 100, 0.7), Err(Error::Config(_))));
    assert!(matches!(classify(&p, 1e-4, 100, 0.5), Err(Error::Config(_))));
}

#[test]
fn low_regime_boundary_is_inclusive() {
    let p = exp();
    // |n| ≤ δ₀⁻¹ is low; δ₀⁻¹ ≈ 8.94 for the exponential profile
    assert_eq!(classify(&p, 1e-4, 8, 0.75).unwrap(), FrequencyRegime::Low);
    assert_eq!(classify(&p, 1e-4, 9, 0.75).unwrap(), FrequencyRegime::MiddleSmall);
}

#[test]
fn zero_lies_in_no_region_and_line_points_are_tagged() {
    let p = exp();
    let f = fam(&p);
    let ctx = ModeContext::from_mu(&p, 1e-4, 100, C::new(0.0, 0.0), 2.0 / 3.0, f.delta_star, f).unwrap();
    assert!(in_resolvent_region(&ctx, DEFAULT_THETA).is_empty());
    assert_eq!(regime_of(&ctx, DEFAULT_THETA).spectral, vec![SpectralTag::Exploratory]);

    let probe = ModeContext::from_mu(&p, 1e-6, 400, C::new(1.0, 0.0), 2.0 / 3.0, f.delta_star, f).unwrap();
    let re = probe.remu_threshold();
    let ctx = ModeContext::from_mu(&p, 1e-6, 400, C::new(re, 0.1), 2.0 / 3.0, f.delta_star, f).unwrap();
    let tags = in_resolvent_region(&ctx, DEFAULT_THETA);
    assert!(tags.contains(&SpectralTag::ODisc), "{tags:?}");
    assert!(tags.contains(&SpectralTag::OLine), "{tags:?}");
    assert!(ctx.admissible);
}

#[test]
fn inequality_ids_round_trip() {
    for id in InequalityId::ALL {
        assert_eq!(id.as_str().parse::<InequalityId>().unwrap(), id);
        assert_eq!(id.to_string(), id.as_str());
    }
    assert!(matches!("not-an-id".parse::<InequalityId>(), Err(Error::Config(_))));
}

#[test]
fn every_standard_sweep_is_large_and_admissible() {
    let p = exp();
    for id in InequalityId::ALL {
        let sweep = standard_sweep(id, &p).unwrap();
        assert!(sweep.len() >= 50, "{id}: only {} contexts", sweep.len());
        assert_eq!(admissible_subset(id, &sweep, DEFAULT_THETA).len(), sweep.len(), "{id}");
    }
}

#[test]
fn empty_sweep_gives_empty_report() {
    let p = exp();
    let (reports, summary) =
        verify_inequality(&p, InequalityId::Mularge, &[], 64, &VerifyOptions::default()).unwrap();
    assert!(reports.is_empty());
    assert_eq!(summary.count, 0);
    assert_eq!(summary.sup_ratio, 0.0);
    assert!(summary.argmax.is_none());
}

#[test]
fn hypothesis_violation_names_entry_and_clause() {
    let p = exp();
    let f = fam(&p);
    let mut sweep = standard_sweep(InequalityId::Mularge, &p).unwrap();
    sweep.truncate(3);
    // a low-frequency mode breaks the middle-regime hypothesis
    sweep.push(ModeContext::from_mu(&p, 1e-4, 2, C::new(0.0, 100.0), 0.75, f.delta_star, f).unwrap());
    let err = verify_inequality(&p, InequalityId::Mularge, &sweep, 64, &VerifyOptions::default()).unwrap_err();
    match err {
        Error::Hypothesis(msg) => {
            assert!(msg.contains("sweep entry 3"), "{msg}");
            assert!(msg.contains("mularge"), "{msg}");
            assert!(msg.contains("middle"), "{msg}");
        }
        other => panic!("unexpected error {other:?}"),
    }
}

#[test]
fn remu_hypothesis_rejects_contexts_below_the_bound() {
    let p = exp();
    let f = fam(&p);
    let lam = C::new(0.5, 1.0);
    let ctx = ModeContext::from_lambda(&p, 1e-4, 216, lam, 2.0 / 3.0, f.delta_star, f).unwrap();
    assert!(!ctx.admissible);
    let err = check_hypotheses(InequalityId::NavierResolvent, &ctx, DEFAULT_THETA).unwrap_err();
    assert!(matches!(err, Error::Hypothesis(ref m) if m.contains("Re μ")), "{err:?}");
}

#[test]
fn shrinking_delta_shrinks_the_admissible_set() {
    let p = exp();
    let f = fam(&p);
    let id = InequalityId::NavierResolvent;
    let sweep = small_lambda_sweep(&p, &f);
    let (reports, summary) = verify_inequality(&p, id, &sweep, 64, &VerifyOptions::default()).unwrap();
    // rebuild each context with a smaller δ and keep the ones still admissible
    let tighter = 0.8 * f.delta_star;
    let mut kept = Vec::new();
    for (k, c) in sweep.iter().enumerate() {
        let c2 = ModeContext::from_mu(&p, c.nu, c.n, c.mu, c.gamma, tighter, f).unwrap();
        if check_hypotheses(id, &c2, DEFAULT_THETA).is_ok() {
            kept.push(k);
        }
    }
    assert!(!kept.is_empty() && kept.len() < sweep.len(), "kept {} of {}", kept.len(), sweep.len());
    let sub_sup = kept.iter().map(|&k| reports[k].ratio).fold(0.0, f64::max);
    assert!(sub_sup <= summary.sup_ratio);
}

#[test]
fn verification_is_deterministic_and_order_preserving() {
    let p = exp();
    let mut sweep = standard_sweep(InequalityId::LambdaLargeL2, &p).unwrap();
    sweep.truncate(6);
    let par = VerifyOptions { parallel: true, ..Default::default() };
    let ser = VerifyOptions { parallel: false, ..Default::default() };
    let (a, sa) = verify_inequality(&p, InequalityId::LambdaLargeL2, &sweep, 64, &par).unwrap();
    let (b, sb) = verify_inequality(&p, InequalityId::LambdaLargeL2, &sweep, 64, &ser).unwrap();
    assert_eq!(a.len(), sweep.len());
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.ratio, y.ratio);
        assert_eq!(x.params["n"], y.params["n"]);
    }
    for (x, c) in a.iter().zip(&sweep) {
        assert_eq!(x.params["n"].as_i64().unwrap(), c.n);
    }
    assert_eq!(sa.sup_ratio, sb.sup_ratio);
    let other = VerifyOptions { seed: 99, ..Default::default() };
    let (c, _) = verify_inequality(&p, InequalityId::LambdaLargeL2, &sweep, 64, &other).unwrap();
    assert!(a.iter().zip(&c).any(|(x, y)| x.ratio != y.ratio));
}

#[test]
fn operator_norm_dominates_sampled_ratios() {
    let p = exp();
    for id in [InequalityId::Mularge, InequalityId::MusmallWeighted, InequalityId::NonslipStream] {
        let mut sweep = standard_sweep(id, &p).unwrap();
        sweep.truncate(4);
        let opts = VerifyOptions { svd_check: true, ..Default::default() };
        let (reports, _) = verify_inequality(&p, id, &sweep, 48, &opts).unwrap();
        for r in reports {
            let svd = r.params["svd_ratio"].as_f64().unwrap();
            assert!(svd >= r.ratio * (1.0 - 1e-9), "{id}: svd {svd} < sampled {}", r.ratio);
        }
    }
}

#[test]
fn operator_norm_bounds_an_independent_solve() {
    let p = exp();
    let f = fam(&p);
    let ctx = ModeContext::from_lambda(&p, 1e-4, 64, C::new(0.4, 12.0), 0.75, f.delta_star, f).unwrap().exploratory();
    let grid = ctx.default_grid(48).unwrap();
    let norm = resolvent_norm(&p, &ctx, &grid, NormTarget::Velocity).unwrap();
    for seed in 0..5 {
        let f1 = smooth_draw(seed, 0.2, 1.0, false).sample(&grid.nodes);
        let f2 = smooth_draw(seed + 100, 0.2, 1.0, false).sample(&grid.nodes);
        let data = l2_pair(&grid, &f1, &f2);
        let sol = solve_os_nonslip(&p, &ctx, &RhsSpec::Pair { f1, f2 }, &grid).unwrap();
        let out = h1_pair(&grid, &sol.phi, ctx.alpha);
        assert!(out <= norm * data * (1.0 + 1e-9), "seed {seed}: {out} > {norm}·{data}");
    }
}

#[test]
fn operator_norm_is_conjugation_symmetric() {
    let p = exp();
    let f = fam(&p);
    let mu = C::new(0.9, 3.0);
    let a = ModeContext::from_mu(&p, 1e-4, 64, mu, 0.75, f.delta_star, f).unwrap();
    let b = ModeContext::from_mu(&p, 1e-4, -64, mu.conj(), 0.75, f.delta_star, f).unwrap();
    let grid = a.default_grid(48).unwrap();
    for target in [NormTarget::Velocity, NormTarget::Gradient] {
        let na = resolvent_norm(&p, &a, &grid, target).unwrap();
        let nb = resolvent_norm(&p, &b, &grid, target).unwrap();
        assert!((na - nb).abs() <= 1e-10 * na, "{target:?}: {na} vs {nb}");
    }
}

#[test]
fn weighted_norm_is_dominated_by_the_unweighted_norm() {
    let p = exp();
    let f = fam(&p);
    let ctx = ModeContext::from_lambda(&p, 1e-4, 125, C::new(0.3, 30.0), 2.0 / 3.0, f.delta_star, f).unwrap();
    let grid = ctx.default_grid(40).unwrap();
    let unit = resolvent_norm(&p, &ctx, &grid, NormTarget::WeightedCurl(WeightSpec::unit())).unwrap();
    let rho = WeightSpec::rho(125, 2.0 / 3.0, f.delta_star);
    let weighted = resolvent_norm(&p, &ctx, &grid, NormTarget::WeightedCurl(rho)).unwrap();
    // ρ ≤ 1 pointwise, so the weighted norm cannot exceed the unweighted one
    assert!(weighted <= unit * (1.0 + 1e-12));
    assert!(weighted > 0.0);
}

#[test]
fn admissible_contexts_have_invertible_discretizations() {
    let p = exp();
    for id in [InequalityId::Mularge, InequalityId::Musmall] {
        let sweep = standard_sweep(id, &p).unwrap();
        for ctx in sweep.iter().step_by(10) {
            let tags = in_resolvent_region(ctx, DEFAULT_THETA);
            assert!(tags.contains(&SpectralTag::SSector) || tags.contains(&SpectralTag::ODisc));
            let grid = ctx.default_grid(40).unwrap();
            let (lo, hi) = discrete_singular_range(&p, ctx, &grid).unwrap();
            assert!(lo / hi > 1e-10, "n = {}, μ = {}: {lo} / {hi}", ctx.n, ctx.mu);
        }
    }
}

#[test]
fn large_lambda_ratios_are_uniform_in_lambda() {
    let p = exp();
    let f = fam(&p);
    let mut sups = Vec::new();
    for mag in [40.0, 80.0, 160.0] {
        let n = 64i64;
        let li = (n as f64).powf(-0.25) / f.delta1;
        let lr = (mag * mag - li * li).sqrt();
        let sweep: Vec<_> = [1.0, -1.0]
            .iter()
            .map(|s| ModeContext::from_lambda(&p, 1e-4, n, C::new(s * lr, li), 0.75, f.delta1, f).unwrap())
            .collect();
        let (_, s) = verify_inequality(&p, InequalityId::LambdaLargeL2, &sweep, 64, &VerifyOptions::default()).unwrap();
        sups.push(s.sup_ratio);
    }
    let hi = sups.iter().cloned().fold(0.0, f64::max);
    let lo = sups.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(hi <= 2.0 * lo, "{sups:?}");
}

#[test]
fn rayleigh_quotient_gap_is_nonnegative_on_standard_sweeps() {
    let p = exp();
    for id in [InequalityId::RayleighTrickFirst, InequalityId::RayleighTrickSecond] {
        let sweep = standard_sweep(id, &p).unwrap();
        let (reports, _) = verify_inequality(&p, id, &sweep, 64, &VerifyOptions::default()).unwrap();
        for r in reports {
            let gap = r.params["min_gap"].as_f64().unwrap();
            assert!(gap >= -1e-8, "{id}: gap {gap}");
        }
    }
}

#[test]
fn rayleigh_quotient_needs_a_certified_profile() {
    let p = make_builtin_profile("tanh").unwrap();
    let f = fam(&p);
    let ctx = ModeContext::from_lambda(&p, 1e-4, 64, C::new(0.5, 1.0), 0.75, f.delta_star, f).unwrap();
    let grid = ctx.default_grid(32).unwrap();
    let phi = smooth_draw(1, 0.2, 1.0, true).sample(&grid.nodes);
    assert!(matches!(rayleigh_gap(&p, &ctx, &grid, &phi, false), Err(Error::Hypothesis(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sector_is_closed_under_moving_away_from_the_real_axis(
        n in 10i64..2000, re in -50.0f64..50.0, im in 0.0f64..5000.0, push in 0.0f64..1000.0, sign in prop::bool::ANY,
    ) {
        let p = exp();
        let f = fam(&p);
        let s = if sign { 1.0 } else { -1.0 };
        let a = ModeContext::from_mu(&p, 1e-4, n, C::new(re, s * im), 0.75, f.delta_star, f).unwrap();
        let b = ModeContext::from_mu(&p, 1e-4, n, C::new(re, s * (im + push)), 0.75, f.delta_star, f).unwrap();
        if in_resolvent_region(&a, DEFAULT_THETA).contains(&SpectralTag::SSector) {
            prop_assert!(in_resolvent_region(&b, DEFAULT_THETA).contains(&SpectralTag::SSector));
        }
    }

    #[test]
    fn regions_are_symmetric_under_mode_reflection(n in 10i64..2000, re in -50.0f64..500.0, im in -500.0f64..500.0) {
        let p = exp();
        let f = fam(&p);
        let a = ModeContext::from_mu(&p, 1e-4, n, C::new(re, im), 0.75, f.delta_star, f).unwrap();
        let b = ModeContext::from_mu(&p, 1e-4, -n, C::new(re, -im), 0.75, f.delta_star, f).unwrap();
        prop_assert_eq!(in_resolvent_region(&a, DEFAULT_THETA), in_resolvent_region(&b, DEFAULT_THETA));
    }

    #[test]
    fn regimes_partition_the_frequencies(n in 1i64..100_000_000, nu_exp in 2.0f64..8.0) {
        let p = exp();
        let nu = 10f64.powf(-nu_exp);
        let r = classify(&p, nu, n, 0.75).unwrap();
        let na = n as f64;
        let low = na <= 1.0 / p.delta0;
        let high = na > nu.powf(-0.75) / p.delta0;
        prop_assert_eq!(r == FrequencyRegime::Low, low);
        prop_assert_eq!(r == FrequencyRegime::High, high && !low);
    }
}
