mod common;

use std::sync::Arc;

use common::{one_sided_limit, rel};
use gendd_core::diffusion::{solve_phi, SolverSettings};
use gendd_core::oujump::{OuJumpExitParams, OuJumpKernel};
use gendd_core::{DifferentialExitParams, DiffusionParams, DrawdownBoundary, Error, OuJumpParams};
use proptest::prelude::*;

fn params(lambda: f64) -> OuJumpParams {
    OuJumpParams {
        theta: 1.0,
        mu: 0.0,
        sigma: 1.0,
        lambda,
        eta: 1.0,
    }
}

#[test]
fn convolution_routes_agree() {
    for &(q, u) in &[(0.5, -1.0), (0.5, 0.3), (2.0, -2.5), (0.01, -0.5)] {
        let k = OuJumpKernel::new(params(1.0), q).unwrap();
        let a = k.convolution(u).unwrap();
        let b = k.convolution_nested(u).unwrap();
        assert!(rel(a, b) < 1e-8, "q={q} u={u}: {a} vs {b}");
    }
}

#[test]
fn exit_derivatives_two_routes_agree() {
    let k = OuJumpKernel::new(params(1.0), 0.5).unwrap();
    for &(s, u, x) in &[(0.0, -1.0, 0.0), (0.3, -1.0, 0.0), (1.0, -0.2, 0.5), (0.0, -3.0, -1.0)] {
        let r = k.exit_derivatives(s, u, x).unwrap();
        let a = k.exit_derivatives_semi_analytic(s, u, x).unwrap();
        assert!(rel(r.b, a.b) < 1e-7, "b at s={s} u={u} x={x}");
        assert!(rel(r.c, a.c) < 1e-7, "c at s={s} u={u} x={x}");
    }
}

/// b and c are the first-order coefficients of `1 - B` and `C` in the gap
/// between the upper level and the start level.
#[test]
fn exit_derivatives_match_two_sided_transforms() {
    let k = OuJumpKernel::new(params(1.0), 0.5).unwrap();
    let (s, u, x) = (0.3, -1.0, 0.0);
    let d = k.exit_derivatives_semi_analytic(s, u, x).unwrap();
    let b = one_sided_limit(|e| (1.0 - k.first_passage(s, x, u, x + e).unwrap().b) / e, 2e-2);
    let c = one_sided_limit(|e| k.first_passage(s, x, u, x + e).unwrap().c / e, 2e-2);
    assert!(rel(d.b, b) < 1e-5, "{} vs {b}", d.b);
    assert!(rel(d.c, c) < 1e-5, "{} vs {c}", d.c);
}

/// As the jump intensity vanishes the parameters approach those of the
/// OU diffusion, at a rate proportional to λ.
#[test]
fn vanishing_jumps_approach_diffusion() {
    let sol = solve_phi(
        &DiffusionParams::ornstein_uhlenbeck(1.0, 0.0, 1.0),
        0.5,
        &SolverSettings {
            domain: (-8.0, 8.0),
            ..Default::default()
        },
    )
    .unwrap();
    let (u, x) = (-1.0, 0.0);
    let target = sol.b_pair(u, x).unwrap();
    let gap = |lambda: f64| {
        let k = OuJumpKernel::new(params(lambda), 0.5).unwrap();
        rel(k.exit_derivatives(0.0, u, x).unwrap().b, target)
    };
    let (g2, g3) = (gap(1e-2), gap(1e-3));
    assert!(g3 < 1e-3, "{g3}");
    assert!(g3 < 0.2 * g2, "{g2} -> {g3}");
}

#[test]
fn tail_cut_is_invisible() {
    let k = OuJumpKernel::new(params(1.0), 0.5).unwrap();
    let wide = k.clone().with_tail_drop(80.0);
    for &x in &[-2.0, 0.0, 1.5] {
        let (a, b) = (k.f_integrals(x).unwrap(), wide.f_integrals(x).unwrap());
        for (p, q) in [(a.f1, b.f1), (a.f2, b.f2), (a.f3, b.f3), (a.c1, b.c1), (a.c2, b.c2)] {
            assert!(rel(p, q) < 1e-12, "x={x}");
        }
    }
}

#[test]
fn small_discount_and_missing_jumps_rejected() {
    assert!(matches!(OuJumpKernel::new(params(1.0), 1e-4), Err(Error::SmallDiscount { .. })));
    assert!(matches!(OuJumpKernel::new(params(0.0), 0.5), Err(Error::UnsupportedModel(_))));
}

#[test]
fn zero_discount_is_extrapolated_and_flagged() {
    let f = Arc::new(DrawdownBoundary::classic(1.0));
    let p = OuJumpExitParams::new(params(1.0), f.clone(), 0.0, 0.0).unwrap();
    assert!(p.provenance().extrapolated);
    let near = OuJumpExitParams::new(params(1.0), f, 1e-3, 0.0).unwrap();
    // Linear in q near zero: the extrapolated value sits within O(q_min²) of q_min's.
    assert!(rel(p.b(0.0).unwrap(), near.b(0.0).unwrap()) < 1e-2);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn two_sided_transforms_are_subprobabilities(q in 0.05..2.0f64, s in 0.0..2.0f64,
                                                 x in -1.0..1.0f64, du in 0.1..1.5f64, dv in 0.1..1.5f64) {
        let k = OuJumpKernel::new(params(1.0), q).unwrap();
        let r = k.first_passage(s, x, x - du, x + dv).unwrap();
        prop_assert!(r.b > 0.0 && r.b < 1.0);
        prop_assert!(r.c > 0.0 && r.c < 1.0);
        prop_assert!(r.b + r.c < 1.0);
    }
}
