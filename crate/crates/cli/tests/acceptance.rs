//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails. Runs under `cargo test` (no harness).

use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use gendd_cli::{report, run_config, Config};
use gendd_core::diffusion::{solve_phi, DiffusionFamily, SolverSettings};
use gendd_core::engine::{evaluate, exit_transform};
use gendd_core::levy::{LevyExitParams, ScaleFunction};
use gendd_core::mc::{
    apply_tax_and_check, check_pathwise, check_sandwich, estimate_functionals, simulate_path_stream, McSettings,
    PathwiseReport,
};
use gendd_core::oujump::OuJumpKernel;
use gendd_core::tax::closed_form::AffineTaxSetup;
use gendd_core::tax::{tax_epv, tax_exit};
use gendd_core::{
    factory_for, Boundary, DifferentialExitParams, DiffusionParams, DrawdownBoundary, EngineSettings, EpvMode,
    ExitParamFactory, FamilySettings, FunctionalQuery, LevyParams, OuJumpParams, PayoutWeight, ProcessModel,
    TaxContext, TaxSchedule,
};

type Outcome = Result<(bool, String), String>;

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

fn shipped_config() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs/acceptance.toml")
}

fn levy_factory(p: LevyParams) -> Arc<dyn ExitParamFactory> {
    factory_for(&ProcessModel::Levy(p), &FamilySettings::default()).unwrap()
}

fn arc(f: DrawdownBoundary) -> Arc<dyn Boundary> {
    Arc::new(f)
}

/// Composite Simpson on `n` panels; used as an independent quadrature.
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut total = f(a) + f(b);
    for i in 1..n {
        total += if i % 2 == 1 { 4.0 } else { 2.0 } * f(a + h * i as f64);
    }
    total * h / 3.0
}

fn ruin_reduction() -> Outcome {
    let start = Instant::now();
    let p = LevyExitParams::new(LevyParams::brownian(0.0, 1.0), arc(DrawdownBoundary::Ruin), 0.0, 0.0).map_err(err)?;
    let g = exit_transform(&p, &FunctionalQuery::new(1.0, 2.0, 0.0, 0.0).map_err(err)?).map_err(err)?;
    let secs = start.elapsed().as_secs_f64();
    let diff = (g - 0.5).abs();
    Ok((diff <= 1e-10 && secs < 1.0, format!("g = {g:.15}, |g - 0.5| = {diff:.1e}, {secs:.3} s")))
}

fn classic_drawdown() -> Outcome {
    let start = Instant::now();
    let f = DrawdownBoundary::classic(1.0);
    let query = FunctionalQuery::new(0.0, 1.0, 0.0, 0.0).map_err(err)?;
    let p = LevyExitParams::new(LevyParams::brownian(0.0, 1.0), arc(f.clone()), 0.0, 0.0).map_err(err)?;
    let g = evaluate(&p, &query, &EngineSettings::default()).map_err(err)?.g;
    let exponent = simpson(|z| p.b(z).unwrap(), 0.0, 1.0, 2000);
    let quad = (-exponent).exp();
    let exact = (-1.0f64).exp();
    let settings = McSettings {
        n_paths: 100_000,
        dt: 1e-4,
        seed: 1,
        ..McSettings::default()
    };
    let model = ProcessModel::Levy(LevyParams::brownian(0.0, 1.0));
    let mc = estimate_functionals(&model, &f, None, &PayoutWeight::Constant(1.0), &query, &settings)
        .map_err(err)?
        .exit;
    let band = (3.0 * mc.std_error).max(1e-2);
    let secs = start.elapsed().as_secs_f64();
    let ok = (g - exact).abs() <= 1e-8 && (g - quad).abs() <= 1e-8 && (g - mc.value).abs() <= band && secs < 120.0;
    Ok((
        ok,
        format!(
            "g = {g:.12} (e^-1 diff {:.1e}, quadrature diff {:.1e}), MC {:.5} ± {:.5} (band {band:.4}), {secs:.1} s",
            (g - exact).abs(),
            (g - quad).abs(),
            mc.value,
            mc.std_error
        ),
    ))
}

fn normalization() -> Outcome {
    let start = Instant::now();
    let config = Config::load(&shipped_config()).map_err(err)?;
    let mut seen: Vec<(String, String)> = Vec::new();
    let mut worst: (f64, String) = (0.0, String::new());
    let mut ok = true;
    for e in &config.experiments {
        let key = (e.model.describe(), e.boundary.describe());
        if seen.contains(&key) {
            continue;
        }
        seen.push(key);
        let model = e.model.build();
        let ou = matches!(model, ProcessModel::OuJump(_));
        let factory = factory_for(&model, &config.family).map_err(err)?;
        let first = e.queries()[0];
        let query = FunctionalQuery { q: 0.0, s: 0.0, ..first };
        let params = factory.exit_params(arc(e.boundary.clone()), 0.0, 0.0).map_err(err)?;
        let r = evaluate(params.as_ref(), &query, &config.engine).map_err(err)?;
        let gap = (r.g + r.h - 1.0).abs();
        let tol = if ou { 2e-4 } else { 1e-6 };
        ok &= gap <= tol;
        if gap / tol > worst.0 {
            worst = (gap / tol, format!("{} / {}: |g + h - 1| = {gap:.1e}", e.name, e.boundary.describe()));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    ok &= secs < 300.0;
    Ok((ok, format!("{} pairs, worst {} (ratio to tolerance {:.2}), {secs:.1} s", seen.len(), worst.1, worst.0)))
}

fn affine_closed_form() -> Outcome {
    let models = [
        LevyParams::brownian(0.3, 1.0),
        LevyParams::cramer_lundberg(2.0, 1.0, 1.5),
        LevyParams::perturbed(0.5, 0.8, 1.0, 2.0),
    ];
    let (x, k, q) = (0.0, 1.5, 0.1);
    let mut worst = 0.0f64;
    for p in models {
        let w = ScaleFunction::new(p, q).map_err(err)?;
        for xi in [0.0, 0.2, 0.4, 0.6, 0.8] {
            for d in [0.25, 0.5, 1.0, 1.5, 2.0] {
                let gap = |z: f64| (1.0 - xi) * z + d;
                let closed = (w.w(gap(x)).map_err(err)? / w.w(gap(k)).map_err(err)?).powf(1.0 / (1.0 - xi));
                let params =
                    LevyExitParams::new(p, arc(DrawdownBoundary::affine(xi, d)), q, 0.0).map_err(err)?;
                let g = exit_transform(&params, &FunctionalQuery::new(x, k, q, 0.0).map_err(err)?).map_err(err)?;
                worst = worst.max(rel(g, closed));
            }
        }
    }
    Ok((worst <= 1e-8, format!("3 models x 25 (xi, d), worst relative error {worst:.1e}")))
}

fn tax_power_law() -> Outcome {
    let mut worst_power = 0.0f64;
    let mut worst_zero = 0.0f64;
    let (x, k, q) = (0.0, 1.5, 0.1);
    let query = FunctionalQuery::new(x, k, q, 0.0).map_err(err)?;
    for p in [LevyParams::brownian(0.0, 1.0), LevyParams::perturbed(0.5, 0.8, 1.0, 2.0)] {
        let factory = levy_factory(p);
        let w = ScaleFunction::new(p, q).map_err(err)?;
        for (xi, d) in [(0.0, 1.0), (0.5, 0.5), (0.8, 1.5)] {
            let f = DrawdownBoundary::affine(xi, d);
            let gap = |z: f64| (1.0 - xi) * z + d;
            let ratio = w.w(gap(x)).map_err(err)? / w.w(gap(k)).map_err(err)?;
            let untaxed = exit_transform(
                factory.exit_params(arc(f.clone()), q, 0.0).map_err(err)?.as_ref(),
                &query,
            )
            .map_err(err)?;
            let zero = TaxContext::new(TaxSchedule::constant(0.0), x).map_err(err)?;
            let g0 = tax_exit(factory.as_ref(), &zero, arc(f.clone()), &query).map_err(err)?;
            worst_zero = worst_zero.max((g0 - untaxed).abs());
            for i in 1..10 {
                let gamma = i as f64 / 10.0;
                let ctx = TaxContext::new(TaxSchedule::constant(gamma), x).map_err(err)?;
                let g = tax_exit(factory.as_ref(), &ctx, arc(f.clone()), &query).map_err(err)?;
                let closed = ratio.powf(1.0 / ((1.0 - xi) * (1.0 - gamma)));
                worst_power = worst_power.max(rel(g, closed));
            }
        }
    }
    Ok((
        worst_power <= 1e-6 && worst_zero <= 1e-10,
        format!("gamma in 0.1..0.9: worst relative error {worst_power:.1e}; gamma = 0 vs untaxed {worst_zero:.1e}"),
    ))
}

fn epv_formulas() -> Outcome {
    let settings = EngineSettings::default();
    let unit = PayoutWeight::Constant(1.0);
    let mut worst = 0.0f64;
    for p in [LevyParams::brownian(0.0, 1.0), LevyParams::perturbed(1.0, 0.5, 1.0, 2.0)] {
        let factory = levy_factory(p);
        for (gamma, xi, d, q) in [(0.2, 0.0, 1.0, 0.0), (0.5, 0.4, 0.6, 0.1), (0.7, 0.2, 1.0, 0.3)] {
            let ctx = TaxContext::new(TaxSchedule::constant(gamma), 0.0).map_err(err)?;
            let f = DrawdownBoundary::affine(xi, d);
            let query = FunctionalQuery::new(0.0, 1.2, q, 0.0).map_err(err)?;
            let setup = AffineTaxSetup { params: p, q, xi, d, gamma };
            for (mode, closed) in [
                (EpvMode::UntilEither, setup.epv_until_either(0.0, 1.2).map_err(err)?),
                (EpvMode::OnUpperExit, setup.epv_on_upper_exit(0.0, 1.2).map_err(err)?),
            ] {
                let v = tax_epv(factory.as_ref(), &ctx, arc(f.clone()), &unit, &query, mode, &settings)
                    .map_err(err)?
                    .value;
                worst = worst.max(rel(v, closed));
            }
        }
    }

    // MC on taxed paths
    let (gamma, xi, d, q) = (0.3, 0.5, 1.0, 0.1);
    let p = LevyParams::brownian(0.0, 1.0);
    let factory = levy_factory(p);
    let schedule = TaxSchedule::constant(gamma);
    let ctx = TaxContext::new(schedule.clone(), 0.0).map_err(err)?;
    let f = DrawdownBoundary::affine(xi, d);
    let query = FunctionalQuery::new(0.0, 1.0, q, 0.0).map_err(err)?;
    let mc = estimate_functionals(
        &ProcessModel::Levy(p),
        &f,
        Some(&schedule),
        &unit,
        &query,
        &McSettings {
            n_paths: 100_000,
            dt: 1e-3,
            seed: 6,
            ..McSettings::default()
        },
    )
    .map_err(err)?;
    let mut mc_ok = true;
    let mut detail = Vec::new();
    for (mode, est) in [(EpvMode::UntilEither, &mc.epv_until_either), (EpvMode::OnUpperExit, &mc.epv_on_upper_exit)] {
        let v = tax_epv(factory.as_ref(), &ctx, arc(f.clone()), &unit, &query, mode, &settings).map_err(err)?.value;
        let band = (3.0 * est.std_error).max(1e-2);
        mc_ok &= (v - est.value).abs() <= band;
        detail.push(format!("{v:.4} vs MC {:.4} ± {:.4}", est.value, est.std_error));
    }
    Ok((
        worst <= 1e-6 && mc_ok,
        format!("closed forms: worst relative error {worst:.1e}; {}", detail.join(", ")),
    ))
}

fn cross_family() -> Outcome {
    let (mu, sigma, q, s) = (0.3, 1.0, 0.2, 0.5);
    let f = arc(DrawdownBoundary::affine(0.4, 1.0));
    let levy = LevyExitParams::new(LevyParams::brownian(mu, sigma), f.clone(), q, s).map_err(err)?;
    let family = DiffusionFamily::new(DiffusionParams::brownian(mu, sigma), SolverSettings::default());
    let diff = family.exit_params(f, q, s).map_err(err)?;
    let mut worst = 0.0f64;
    for i in 0..50 {
        // gap 0.6 z + 1 stays positive on [-1.5, 2.5]
        let z = -1.5 + 4.0 * i as f64 / 49.0;
        worst = worst.max(rel(diff.b(z).map_err(err)?, levy.b(z).map_err(err)?));
        worst = worst.max(rel(diff.c(z).map_err(err)?, levy.c(z).map_err(err)?));
    }
    let query = FunctionalQuery::new(-1.0, 2.0, q, s).map_err(err)?;
    let a = evaluate(diff.as_ref(), &query, &EngineSettings::default()).map_err(err)?;
    let b = evaluate(&levy, &query, &EngineSettings::default()).map_err(err)?;
    let dg = rel(a.g, b.g).max(rel(a.h, b.h));
    Ok((
        worst <= 1e-6 && dg <= 1e-6,
        format!("b/c on 50 points: worst relative gap {worst:.1e}; g, h gap {dg:.1e}"),
    ))
}

fn diffusion_solver() -> Outcome {
    let (mu, sigma) = (1.0f64, 1.0f64);
    let mut worst = 0.0f64;
    for q in [0.1, 1.0] {
        let sol = solve_phi(&DiffusionParams::brownian(mu, sigma), q, &SolverSettings::default()).map_err(err)?;
        let root = (mu * mu + 2.0 * q * sigma * sigma).sqrt();
        let (tp, tm) = ((-mu + root) / (sigma * sigma), (-mu - root) / (sigma * sigma));
        let delta = tp - tm;
        let one_minus = |len: f64| -(-delta * len).exp_m1();
        for i in 0..40 {
            let u = -9.5 + 17.0 * i as f64 / 39.0;
            for len in [0.25, 1.0, 3.0] {
                let v = u + len;
                if v > 9.5 {
                    continue;
                }
                let x = u + 0.6 * len;
                // Φ(u, x) = e^{θ+ x + θ- u}(1 - e^{-Δ(x - u)})
                let b_pair = (tp - tm * (-delta * (x - u)).exp()) / one_minus(x - u);
                let c_pair = delta * (tm * (x - u)).exp() / one_minus(x - u);
                let two = (tp * (x - v)).exp() * one_minus(x - u) / one_minus(v - u);
                worst = worst.max(rel(sol.b_pair(u, x).map_err(err)?, b_pair));
                worst = worst.max(rel(sol.c_pair(u, x).map_err(err)?, c_pair));
                worst = worst.max(rel(sol.two_sided_b(x, u, v).map_err(err)?, two));
            }
        }
    }
    Ok((worst <= 1e-6, format!("Phi ratios over [-9.5, 9.5], q in {{0.1, 1}}: worst relative error {worst:.1e}")))
}

fn ou_jump() -> Outcome {
    let start = Instant::now();
    let params = OuJumpParams {
        theta: 1.0,
        mu: 0.0,
        sigma: 1.0,
        lambda: 1.0,
        eta: 1.0,
    };
    let (q, s, x, u, v) = (0.5, 0.5, 0.5, 0.0, 1.5);
    let kernel = OuJumpKernel::new(params, q).map_err(err)?;
    let fp = kernel.first_passage(s, x, u, v).map_err(err)?;
    let mut fubini = 0.0f64;
    for level in [-1.0, 0.0, 0.5, 1.5] {
        fubini = fubini.max((kernel.convolution(level).map_err(err)? - kernel.convolution_nested(level).map_err(err)?).abs());
    }
    let query = FunctionalQuery::new(x, v, q, s).map_err(err)?;
    let mc = estimate_functionals(
        &ProcessModel::OuJump(params),
        &DrawdownBoundary::Ruin,
        None,
        &PayoutWeight::Constant(1.0),
        &query,
        &McSettings {
            n_paths: 100_000,
            dt: 1e-4,
            seed: 9,
            ..McSettings::default()
        },
    )
    .map_err(err)?;
    let zb = (fp.b - mc.exit.value).abs() / mc.exit.std_error;
    let zc = (fp.c - mc.drawdown.value).abs() / mc.drawdown.std_error;
    let secs = start.elapsed().as_secs_f64();
    Ok((
        zb <= 3.0 && zc <= 3.0 && fubini <= 1e-8 && secs < 600.0,
        format!(
            "B = {:.5} vs MC {:.5} ({zb:.2} SE), C = {:.5} vs MC {:.5} ({zc:.2} SE), convolution routes {fubini:.1e}, {secs:.1} s",
            fp.b, mc.exit.value, fp.c, mc.drawdown.value
        ),
    ))
}

fn pathwise_suite() -> Outcome {
    let start = Instant::now();
    let families = [
        ProcessModel::Levy(LevyParams::brownian(0.1, 1.0)),
        ProcessModel::Levy(LevyParams::cramer_lundberg(1.5, 1.0, 1.0)),
        ProcessModel::Levy(LevyParams::perturbed(0.5, 0.5, 1.0, 2.0)),
        ProcessModel::Diffusion(DiffusionParams::ornstein_uhlenbeck(1.0, 0.5, 1.0)),
        ProcessModel::OuJump(OuJumpParams {
            theta: 1.0,
            mu: 0.5,
            sigma: 1.0,
            lambda: 1.0,
            eta: 2.0,
        }),
    ];
    let f = DrawdownBoundary::affine(0.5, 1.0);
    let shared: Arc<dyn Boundary> = Arc::new(f.clone());
    let schedules = [
        TaxSchedule::constant(0.5),
        TaxSchedule::PiecewiseConstant {
            breakpoints: vec![0.3, 0.8],
            rates: vec![0.1, 0.3, 0.6],
        },
    ];
    let x = 0.0;
    let eps: Vec<f64> = [0.01, 0.1, 0.5].iter().map(|c| c * f.gap(x).unwrap()).collect();
    let (n, batch) = (10_000u64, 1_000u64);
    let mut report = PathwiseReport::default();
    let mut sandwich_ok = true;
    for model in &families {
        for chunk in 0..n / batch {
            let paths: Vec<_> = (chunk * batch..(chunk + 1) * batch)
                .map(|i| simulate_path_stream(model, x, 5.0, 1e-3, 31, i))
                .collect::<Result<_, _>>()
                .map_err(err)?;
            for p in &paths {
                for &e in &eps {
                    report.merge(check_pathwise(p, &f, e, 0.2, 0.5).map_err(err)?);
                }
                for sch in &schedules {
                    report.merge(apply_tax_and_check(p, sch, shared.clone()).map_err(err)?.1);
                }
            }
            for &e in &eps {
                sandwich_ok &= check_sandwich(&paths, &f, e, 0.2, 0.5).map_err(err)?.holds;
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let first = report
        .violations
        .first()
        .map(|v| format!(" (first: {} on path {})", v.check, v.stream))
        .unwrap_or_default();
    Ok((
        report.passed() && sandwich_ok && secs < 300.0,
        format!(
            "5 families x {n} paths: {} checks, {} violations{first}, sandwich {}, {secs:.1} s",
            report.checks,
            report.violations.len(),
            if sandwich_ok { "holds" } else { "broken" }
        ),
    ))
}

fn determinism() -> Outcome {
    let config = Config::load(&shipped_config()).map_err(err)?;
    let render = || -> Result<(Vec<u8>, usize), String> {
        let rows = run_config(&config).map_err(err)?;
        let failing = rows.iter().filter(|r| r.status.failed()).count();
        let mut buf = Vec::new();
        report::write_csv(&rows, &mut buf).map_err(err)?;
        Ok((buf, failing))
    };
    let (a, failing) = render()?;
    let (b, _) = render()?;
    Ok((
        a == b && failing == 0,
        format!("{} bytes, identical: {}, failing rows: {failing}", a.len(), a == b),
    ))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("ruin reduction", ruin_reduction),
        ("classic drawdown", classic_drawdown),
        ("normalization", normalization),
        ("affine closed form", affine_closed_form),
        ("tax power law", tax_power_law),
        ("tax EPV formulas", epv_formulas),
        ("cross-family consistency", cross_family),
        ("diffusion solver", diffusion_solver),
        ("ou-jump vs MC", ou_jump),
        ("pathwise suite", pathwise_suite),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let (ok, detail) = match check() {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        if !ok {
            failed += 1;
        }
        println!("criterion {:>2} {:<26} {}  {detail}", i + 1, name, if ok { "PASS" } else { "FAIL" });
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
