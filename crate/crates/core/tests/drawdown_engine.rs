mod common;

use std::sync::Arc;

use common::{rel, simpson};
use gendd_core::engine::{evaluate, exit_transform, max_at_drawdown_density, total_drawdown_law};
use gendd_core::levy::{LevyExitParams, ScaleFunction};
use gendd_core::oujump::OuJumpExitParams;
use gendd_core::{
    factory_for, Boundary, DifferentialExitParams, DiffusionParams, DrawdownBoundary, EngineSettings,
    FamilySettings, FunctionalQuery, LevyParams, OuJumpParams, ProcessModel,
};
use proptest::prelude::*;

fn levy(p: LevyParams, f: DrawdownBoundary, q: f64, s: f64) -> LevyExitParams {
    LevyExitParams::new(p, Arc::new(f), q, s).unwrap()
}

/// `g` and `h` by cumulative trapezoid on a fine grid, independent of the
/// engine's quadrature.
fn brute_force(p: &dyn DifferentialExitParams, x: f64, k: f64, n: usize) -> (f64, f64) {
    let h = (k - x) / n as f64;
    let mut exponent = 0.0;
    let mut prev_b = p.b(x).unwrap();
    let mut prev_w = p.c(x).unwrap();
    let mut weighted = 0.0;
    for i in 1..=n {
        let y = x + h * i as f64;
        let b = p.b(y).unwrap();
        exponent += 0.5 * h * (prev_b + b);
        let w = (-exponent).exp() * p.c(y).unwrap();
        weighted += 0.5 * h * (prev_w + w);
        prev_b = b;
        prev_w = w;
    }
    ((-exponent).exp(), weighted)
}

#[test]
fn engine_matches_brute_force() {
    let p = levy(
        LevyParams::perturbed(0.5, 1.0, 1.0, 2.0),
        DrawdownBoundary::affine(0.4, 0.8),
        0.3,
        0.5,
    );
    let q = FunctionalQuery::new(0.2, 2.5, 0.3, 0.5).unwrap();
    let e = evaluate(&p, &q, &EngineSettings::default()).unwrap();
    let (g, h) = brute_force(&p, q.x, q.k, 40_000);
    assert!(rel(e.g, g) < 1e-8, "{} vs {g}", e.g);
    assert!(rel(e.h, h) < 1e-8, "{} vs {h}", e.h);
    assert!(e.g_error < 1e-9 && e.h_error < 1e-9);
}

/// As functions of the start level, `∂x g = b g` and `∂x h = b h - c`.
#[test]
fn start_level_derivatives_satisfy_the_odes() {
    let p = levy(LevyParams::brownian(0.2, 1.0), DrawdownBoundary::affine(0.5, 1.0), 0.4, 0.7);
    let k = 3.0;
    let at = |x: f64| evaluate(&p, &FunctionalQuery::new(x, k, 0.4, 0.7).unwrap(), &EngineSettings::default()).unwrap();
    for &x in &[0.0, 1.0, 2.0] {
        let step = 1e-4;
        let (up, down, mid) = (at(x + step), at(x - step), at(x));
        let dg = (up.g - down.g) / (2.0 * step);
        let dh = (up.h - down.h) / (2.0 * step);
        let b = p.b(x).unwrap();
        let c = p.c(x).unwrap();
        assert!(rel(dg, b * mid.g) < 1e-6, "g' at {x}");
        assert!(rel(dh, b * mid.h - c) < 1e-6, "h' at {x}");
    }
}

#[test]
fn density_of_the_maximum_integrates_to_h() {
    let p = levy(LevyParams::cramer_lundberg(2.0, 1.0, 1.0), DrawdownBoundary::classic(1.5), 0.1, 0.2);
    let q = FunctionalQuery::new(0.0, 2.0, 0.1, 0.2).unwrap();
    let h = evaluate(&p, &q, &EngineSettings::default()).unwrap().h;
    let total = simpson(|y| max_at_drawdown_density(&p, &q, y).unwrap(), q.x, q.k, 2000);
    assert!(rel(total, h) < 1e-9);
}

/// Ruin boundary: the exit transform is the classical scale-function ratio.
#[test]
fn ruin_boundary_gives_scale_ratio() {
    let params = LevyParams::perturbed(1.0, 0.5, 2.0, 3.0);
    let w = ScaleFunction::new(params, 0.25).unwrap();
    let p = levy(params, DrawdownBoundary::Ruin, 0.25, 0.0);
    for &(x, k) in &[(0.5, 1.0), (1.0, 4.0), (0.01, 2.0)] {
        let g = exit_transform(&p, &FunctionalQuery::new(x, k, 0.25, 0.0).unwrap()).unwrap();
        assert!(rel(g, w.w(x).unwrap() / w.w(k).unwrap()) < 1e-10);
    }
}

#[test]
fn classic_drawdown_law_is_exponential() {
    // BM(0, 1), f(m) = m - d, q = 0: b = 1/d, so g = e^{-(K-x)/d}.
    for &d in &[0.5, 1.0, 2.0] {
        let p = levy(LevyParams::brownian(0.0, 1.0), DrawdownBoundary::classic(d), 0.0, 0.0);
        let e = evaluate(&p, &FunctionalQuery::new(0.0, 1.0, 0.0, 0.0).unwrap(), &EngineSettings::default()).unwrap();
        assert!(rel(e.g, (-1.0 / d).exp()) < 1e-12);
        assert!((e.g + e.h - 1.0).abs() < 1e-12);
    }
}

#[test]
fn drawdown_is_certain_without_an_upper_target() {
    let p = levy(LevyParams::brownian(0.3, 1.0), DrawdownBoundary::classic(1.0), 0.0, 0.0);
    let e = total_drawdown_law(&p, 0.0, 0.0, 0.0, &EngineSettings::default()).unwrap();
    assert!((e.h - 1.0).abs() < 1e-8, "{}", e.h);
}

#[test]
fn complementary_at_zero_discount_for_each_family() {
    let f: Arc<dyn Boundary> = Arc::new(DrawdownBoundary::affine(0.5, 1.0));
    let settings = FamilySettings::default();
    let models = [
        ProcessModel::Levy(LevyParams::perturbed(0.3, 1.0, 1.0, 2.0)),
        ProcessModel::Diffusion(DiffusionParams::ornstein_uhlenbeck(1.0, 0.5, 1.0)),
    ];
    let q = FunctionalQuery::new(0.0, 2.0, 0.0, 0.0).unwrap();
    for m in &models {
        let factory = factory_for(m, &settings).unwrap();
        let p = factory.exit_params(f.clone(), 0.0, 0.0).unwrap();
        let e = evaluate(p.as_ref(), &q, &EngineSettings::default()).unwrap();
        assert!((e.g + e.h - 1.0).abs() < 1e-6, "{}: {}", m.family_name(), e.g + e.h);
    }
    let ou = OuJumpParams {
        theta: 1.0,
        mu: 0.0,
        sigma: 1.0,
        lambda: 1.0,
        eta: 1.0,
    };
    let p = OuJumpExitParams::new(ou, f, 0.0, 0.0).unwrap();
    let e = evaluate(&p, &FunctionalQuery::new(0.0, 1.0, 0.0, 0.0).unwrap(), &EngineSettings::default()).unwrap();
    assert!((e.g + e.h - 1.0).abs() < 2e-4, "ou-jump: {}", e.g + e.h);
}

fn levy_strategy() -> impl Strategy<Value = LevyParams> {
    prop_oneof![
        (-1.0..1.0f64, 0.3..2.0f64).prop_map(|(m, s)| LevyParams::brownian(m, s)),
        (0.5..3.0f64, 0.1..2.0f64, 0.5..3.0f64).prop_map(|(c, l, e)| LevyParams::cramer_lundberg(c, l, e)),
        (-1.0..2.0f64, 0.3..1.5f64, 0.1..2.0f64, 0.5..3.0f64)
            .prop_map(|(m, s, l, e)| LevyParams::perturbed(m, s, l, e)),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn functionals_are_monotone_subprobabilities(
        params in levy_strategy(), xi in 0.0..0.9f64, d in 0.2..2.0f64,
        q in 0.0..1.0f64, s in 0.0..2.0f64, x in 0.0..1.0f64, len in 0.1..2.0f64,
    ) {
        let p = levy(params, DrawdownBoundary::affine(xi, d), q, s);
        let settings = EngineSettings::default();
        let near = evaluate(&p, &FunctionalQuery::new(x, x + len, q, s).unwrap(), &settings).unwrap();
        let far = evaluate(&p, &FunctionalQuery::new(x, x + len + 0.5, q, s).unwrap(), &settings).unwrap();
        prop_assert!(near.g > 0.0 && near.g <= 1.0);
        prop_assert!(near.h >= 0.0);
        prop_assert!(near.g + near.h <= 1.0 + 1e-9);
        prop_assert!(far.g <= near.g);
        prop_assert!(far.h >= near.h - 1e-12);
    }
}
