mod common;

use common::{one_sided_limit, rel, simpson};
use gendd_core::levy::{laplace_exponent, tilted_params, LevyScaleContext, ScaleFunction};
use gendd_core::LevyParams;
use proptest::prelude::*;

/// BM(μ, σ): W^(q)(x) = (e^{r₊x} - e^{r₋x}) / sqrt(μ² + 2qσ²), r± roots of ψ = q.
fn bm_scale(mu: f64, sigma: f64, q: f64, x: f64) -> f64 {
    let s2 = sigma * sigma;
    let disc = (mu * mu + 2.0 * q * s2).sqrt();
    let (rp, rm) = ((-mu + disc) / s2, (-mu - disc) / s2);
    ((rp * x).exp() - (rm * x).exp()) / disc
}

/// Cramér-Lundberg at q = 0: W(x) = (1 - (λ/(cη)) e^{-(η - λ/c)x}) / (c - λ/η).
fn cl_scale0(c: f64, lambda: f64, eta: f64, x: f64) -> f64 {
    (1.0 - lambda / (c * eta) * (-(eta - lambda / c) * x).exp()) / (c - lambda / eta)
}

#[test]
fn brownian_scale_matches_closed_form() {
    for &(mu, sigma) in &[(0.0, 1.0), (0.5, 1.0), (-0.3, 0.7), (2.0, 1.5)] {
        for &q in &[0.05, 0.5, 2.0] {
            let w = ScaleFunction::new(LevyParams::brownian(mu, sigma), q).unwrap();
            for &x in &[0.01, 0.3, 1.0, 4.0, 9.0] {
                let exact = bm_scale(mu, sigma, q, x);
                assert!(rel(w.w(x).unwrap(), exact) < 1e-12, "mu={mu} q={q} x={x}");
            }
        }
    }
}

#[test]
fn driftless_brownian_at_zero_discount_is_linear() {
    let w = ScaleFunction::new(LevyParams::brownian(0.0, 1.0), 0.0).unwrap();
    for &x in &[0.1, 1.0, 2.0, 7.5] {
        assert!(rel(w.w(x).unwrap(), 2.0 * x) < 1e-12);
    }
}

#[test]
fn cramer_lundberg_matches_closed_form() {
    let (c, lambda, eta) = (1.5, 1.0, 1.0);
    let w = ScaleFunction::new(LevyParams::cramer_lundberg(c, lambda, eta), 0.0).unwrap();
    assert!(rel(w.w(0.0).unwrap(), 1.0 / c) < 1e-12);
    for &x in &[0.2, 1.0, 3.0, 10.0] {
        assert!(rel(w.w(x).unwrap(), cl_scale0(c, lambda, eta, x)) < 1e-12, "x={x}");
    }
}

/// ∫_0^∞ e^{-βx} W^(q)(x) dx = 1 / (ψ(β) - q) for β > Φ(q).
#[test]
fn laplace_transform_identity() {
    for params in [
        LevyParams::perturbed(1.0, 0.8, 1.2, 2.0),
        LevyParams::cramer_lundberg(2.0, 1.0, 1.5),
        LevyParams::brownian(0.2, 1.0),
    ] {
        for &q in &[0.0, 0.3, 1.0] {
            let w = ScaleFunction::new(params, q).unwrap();
            let beta = w.phi() + 1.0;
            let integral = simpson(|x| (-beta * x).exp() * w.w(x).unwrap(), 0.0, 60.0, 60_000);
            let expected = 1.0 / (laplace_exponent(&params, beta).unwrap() - q);
            assert!(rel(integral, expected) < 1e-8, "{params:?} q={q}: {integral} vs {expected}");
        }
    }
}

/// `W_s^(p)` from the tilted process must equal `e^{-sx} W^(q)(x)`, and
/// `Z_s^(p)` must equal `1 + p ∫ W_s^(p)` by quadrature.
#[test]
fn tilted_route_agrees() {
    let params = LevyParams::perturbed(0.7, 1.0, 1.5, 2.0);
    for &(q, s) in &[(0.1, 0.5), (1.0, 2.0), (0.0, 0.25)] {
        let ctx = LevyScaleContext::new(params, q, s).unwrap();
        let tilted = ScaleFunction::for_rate(tilted_params(&params, s), ctx.p).unwrap();
        for &x in &[0.05, 0.5, 2.0, 5.0] {
            let direct = ctx.w_tilted(x).unwrap();
            let other = tilted.w(x).unwrap();
            assert!(rel(direct, other) < 1e-10, "q={q} s={s} x={x}: {direct} vs {other}");
            let z = 1.0 + ctx.p * simpson(|y| tilted.w(y).unwrap(), 0.0, x, 20_000);
            assert!(rel(ctx.z_tilted(x).unwrap(), z) < 1e-10, "Z at x={x}");
        }
    }
}

/// b and c are the first-order coefficients of `1 - B` and `C` as the upper
/// level tends to the start level.
#[test]
fn exit_parameters_are_upper_level_derivatives() {
    let params = LevyParams::perturbed(0.5, 1.0, 1.0, 1.5);
    for &(q, s) in &[(0.2, 0.0), (0.5, 1.0), (0.0, 0.7)] {
        let ctx = LevyScaleContext::new(params, q, s).unwrap();
        let (u, x) = (-1.3, 0.0);
        let b = one_sided_limit(|e| (1.0 - ctx.two_sided_b(x, u, x + e).unwrap()) / e, 1e-3);
        let c = one_sided_limit(|e| ctx.two_sided_c(x, u, x + e).unwrap() / e, 1e-3);
        assert!(rel(ctx.b_at_gap(x - u).unwrap(), b) < 1e-6, "b: q={q} s={s}");
        assert!(rel(ctx.c_at_gap(x - u).unwrap(), c) < 1e-6, "c: q={q} s={s}");
    }
}

#[test]
fn ruin_probability_for_cramer_lundberg() {
    // P(τ_0^- < ∞) = (λ/(cη)) e^{-(η - λ/c) x}: the limit v → ∞ of 1 - B and of C at q = s = 0.
    let (c, lambda, eta) = (1.5, 1.0, 1.0);
    let ctx = LevyScaleContext::new(LevyParams::cramer_lundberg(c, lambda, eta), 0.0, 0.0).unwrap();
    for &x in &[0.0, 1.0, 4.0] {
        let exact = lambda / (c * eta) * (-(eta - lambda / c) * x).exp();
        let via_b = 1.0 - ctx.two_sided_b(x, 0.0, 200.0).unwrap();
        let via_c = ctx.two_sided_c(x, 0.0, 200.0).unwrap();
        assert!(rel(via_b, exact) < 1e-9, "x={x}: {via_b} vs {exact}");
        assert!(rel(via_c, exact) < 1e-9, "x={x}: {via_c} vs {exact}");
    }
}

#[test]
fn continuous_paths_have_no_deficit() {
    let p = LevyParams::brownian(0.3, 1.1);
    let base = LevyScaleContext::new(p, 0.4, 0.0).unwrap();
    for &s in &[0.5, 2.0] {
        let ctx = LevyScaleContext::new(p, 0.4, s).unwrap();
        for &y in &[0.3, 1.0, 2.5] {
            assert!(rel(ctx.c_at_gap(y).unwrap(), base.c_at_gap(y).unwrap()) < 1e-12);
            assert!(rel(ctx.two_sided_c(0.0, -y, 1.0).unwrap(), base.two_sided_c(0.0, -y, 1.0).unwrap()) < 1e-12);
        }
    }
}

/// Strongly negative drift makes `W` grow like `e^{Φy}` with `Φy` in the
/// tens; `c` must still be smooth and equal the BM closed form
/// `Δ e^{θ- y} / (1 - e^{-Δy})`.
#[test]
fn steep_scale_function_keeps_c_accurate() {
    let (mu, sigma) = (-0.43, 0.3);
    let p = LevyParams::brownian(mu, sigma);
    let s2 = sigma * sigma;
    for &q in &[0.0, 0.05, 0.5] {
        let root = (mu * mu + 2.0 * q * s2).sqrt();
        let (up, down) = ((-mu + root) / s2, (-mu - root) / s2);
        let delta = up - down;
        for &s in &[0.0, 0.5, 3.0] {
            let ctx = LevyScaleContext::new(p, q, s).unwrap();
            for i in 1..=40 {
                let y = 0.1 * i as f64;
                let exact = delta * (down * y).exp() / -(-delta * y).exp_m1();
                let c = ctx.c_at_gap(y).unwrap();
                assert!(rel(c, exact) < 1e-12, "q={q} s={s} y={y}: {c} vs {exact}");
            }
        }
    }
}

#[test]
fn double_root_deficit_transform() {
    // Driftless BM at q = 0: W(y) = 2y, so c = b = 1 / y whatever s is.
    let p = LevyParams::brownian(0.0, 1.0);
    for &s in &[0.0, 0.1, 1.0, 4.0] {
        let ctx = LevyScaleContext::new(p, 0.0, s).unwrap();
        for &y in &[0.2, 1.0, 3.0] {
            assert!(rel(ctx.c_at_gap(y).unwrap(), 1.0 / y) < 1e-11, "s={s} y={y}");
            assert!(rel(ctx.two_sided_c(0.0, -y, 1.0).unwrap(), 1.0 / (1.0 + y)) < 1e-11);
        }
    }
}

/// Without a Gaussian part the first passage below `u` happens by a jump,
/// whose undershoot is Exp(η) and independent of the past.
#[test]
fn exponential_undershoot_factorizes() {
    let (c, lambda, eta) = (2.0, 1.0, 1.5);
    let p = LevyParams::cramer_lundberg(c, lambda, eta);
    for &q in &[0.0, 0.3] {
        let base = LevyScaleContext::new(p, q, 0.0).unwrap();
        for &s in &[0.2, 1.0, 3.0] {
            let ctx = LevyScaleContext::new(p, q, s).unwrap();
            let factor = eta / (eta + s);
            for &(x, u, v) in &[(0.0, -1.0, 1.0), (0.5, 0.0, 4.0)] {
                let expected = factor * base.two_sided_c(x, u, v).unwrap();
                assert!(rel(ctx.two_sided_c(x, u, v).unwrap(), expected) < 1e-10, "q={q} s={s}");
            }
            assert!(rel(ctx.c_at_gap(0.8).unwrap(), factor * base.c_at_gap(0.8).unwrap()) < 1e-10);
        }
    }
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
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn scale_function_positive_increasing(p in levy_strategy(), q in 0.0..2.0f64, x in 0.01..6.0f64) {
        let w = ScaleFunction::new(p, q).unwrap();
        prop_assert!(w.w(x).unwrap() > 0.0);
        prop_assert!(w.w_prime(x).unwrap() > 0.0);
        prop_assert!(w.w(x + 0.1).unwrap() > w.w(x).unwrap());
    }

    #[test]
    fn two_sided_transforms_are_subprobabilities(
        p in levy_strategy(), q in 0.0..2.0f64, s in 0.0..2.0f64,
        x in 0.0..3.0f64, dv in 0.01..3.0f64,
    ) {
        let ctx = LevyScaleContext::new(p, q, s).unwrap();
        let (u, v) = (-1.0, x + dv);
        let b = ctx.two_sided_b(x, u, v).unwrap();
        let c = ctx.two_sided_c(x, u, v).unwrap();
        prop_assert!((0.0..=1.0 + 1e-12).contains(&b));
        prop_assert!(c >= -1e-12);
        prop_assert!(b + c <= 1.0 + 1e-9);
        prop_assert!(ctx.two_sided_b(x, u, v + 0.5).unwrap() <= b + 1e-12);
        prop_assert!(ctx.b_at_gap(x - u).unwrap() > 0.0);
    }
}
