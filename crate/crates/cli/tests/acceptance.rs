#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Acceptance suite: one pass/fail line per criterion, nonzero exit on any
//! failure.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use target_pricing::function::Grid2;
use target_pricing::market::simulate_market;
use target_pricing::menu::{feasible_interval, solve_menu, MenuScenario};
use target_pricing::numeric::linspace;
use target_pricing::profile::{build_profile, sensitivity_bounds, step_sizes};
use target_pricing::tradeoff::{empirical_region, homogeneous_region};
use target_pricing::verify::{crosscheck_windows, quadrature_windows, verify_menu, verify_profile};
use target_pricing::{
    DomainBox, Error, MarginSpec, ProfileScenario, ScalarFunction, TariffFunction,
};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn rng(stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(20240917);
    r.set_stream(stream);
    r
}

fn log_menu(db: f64, dc: f64, types: usize) -> MenuScenario {
    let budgets = (1..=types)
        .map(|i| ScalarFunction::log(db * i as f64).unwrap())
        .collect();
    let cost = ScalarFunction::linear(dc).unwrap();
    let profit = ScalarFunction::scaled(ScalarFunction::linear(dc).unwrap(), 0.1).unwrap();
    MenuScenario::new(budgets, cost, profit, 1e6).unwrap()
}

fn power_menu(a: f64, e: f64, dc: f64, types: usize) -> MenuScenario {
    let budgets = (1..=types)
        .map(|i| ScalarFunction::power(a * i as f64, e).unwrap())
        .collect();
    let cost = ScalarFunction::linear(dc).unwrap();
    let profit = ScalarFunction::linear(0.1 * dc).unwrap();
    MenuScenario::new(budgets, cost, profit, 1e6).unwrap()
}

fn random_log_params(r: &mut ChaCha8Rng) -> (f64, f64, usize) {
    let dc = r.gen_range(0.2..5.0);
    let db = r.gen_range(1.15..6.0) * dc;
    (db, dc, r.gen_range(1..=5))
}

/// Bilinear tariff on `s_j = j·δ`, `b_j = b·s_j`, `m_j = m·s_j`.
#[allow(clippy::too_many_arguments)]
fn bilinear_ladder(
    dp: f64,
    dc: f64,
    theta_low: f64,
    range: f64,
    step: f64,
    types: usize,
    b: f64,
    m: f64,
    tabulate: Option<usize>,
) -> ProfileScenario {
    let bounds = DomainBox::new(
        theta_low,
        theta_low + range,
        0.5 * step,
        step * types as f64,
    )
    .unwrap();
    let tariff = match tabulate {
        None => TariffFunction::bilinear(dp, bounds).unwrap(),
        Some(n) => {
            let grid = Grid2::from_fn(
                move |t, s| dp * t * s,
                bounds.theta(),
                bounds.quality(),
                n,
                n,
            )
            .unwrap();
            TariffFunction::tabulated(grid).unwrap()
        }
    };
    let q: Vec<f64> = (1..=types).map(|j| step * j as f64).collect();
    let margins = MarginSpec::proportional(b, m, &q).unwrap();
    ProfileScenario::new(
        q,
        tariff,
        ScalarFunction::linear(dc).unwrap(),
        bounds,
        margins,
    )
    .unwrap()
}

fn random_bilinear(r: &mut ChaCha8Rng) -> ProfileScenario {
    let dp = r.gen_range(2.0..6.0);
    let theta_low = r.gen_range(0.3..1.0);
    bilinear_ladder(
        dp,
        r.gen_range(0.1..0.9) * dp * theta_low,
        theta_low,
        r.gen_range(0.5..2.0),
        r.gen_range(0.5..2.0),
        r.gen_range(2..=5),
        r.gen_range(0.0..0.1),
        r.gen_range(0.0..0.01),
        None,
    )
}

/// `F = a·θ^e_θ·s^e_s` with qualities `1..=L`.
fn random_separable(r: &mut ChaCha8Rng) -> ProfileScenario {
    let (a, et, es) = (
        r.gen_range(1.0..5.0),
        r.gen_range(0.8..2.0),
        r.gen_range(1.0..1.5),
    );
    let theta_low = r.gen_range(0.5..1.0);
    let types = r.gen_range(2..=4);
    let bounds = DomainBox::new(
        theta_low,
        theta_low + r.gen_range(0.5..2.0),
        1.0,
        types as f64,
    )
    .unwrap();
    let tariff = TariffFunction::separable(
        ScalarFunction::power(a, et).unwrap(),
        ScalarFunction::power(1.0, es).unwrap(),
        bounds,
    )
    .unwrap();
    let cost = ScalarFunction::linear(0.5 * a * theta_low.powf(et) * es).unwrap();
    let q: Vec<f64> = (1..=types).map(|j| j as f64).collect();
    let margins =
        MarginSpec::proportional(r.gen_range(0.0..0.1), r.gen_range(0.0..0.005), &q).unwrap();
    ProfileScenario::new(q, tariff, cost, bounds, margins).unwrap()
}

fn worked_profile() -> ProfileScenario {
    let bounds = DomainBox::new(1.0 / 3.0, 1.0, 1.0, 3.0).unwrap();
    let margins = MarginSpec::new(vec![0.1, 0.2, 0.3], vec![0.01, 0.02, 0.03], None).unwrap();
    ProfileScenario::new(
        vec![1.0, 2.0, 3.0],
        TariffFunction::bilinear(4.0, bounds).unwrap(),
        ScalarFunction::linear(1.0).unwrap(),
        bounds,
        margins,
    )
    .unwrap()
}

fn menu_closed_form() -> Outcome {
    let mut r = rng(1);
    let cases: Vec<_> = (0..50).map(|_| random_log_params(&mut r)).collect();
    let start = Instant::now();
    let menus: Vec<_> = cases
        .iter()
        .map(|&(db, dc, l)| solve_menu(&log_menu(db, dc, l)))
        .collect();
    let elapsed = start.elapsed().as_secs_f64();
    let (mut worst_s, mut worst_p) = (0.0f64, 0.0f64);
    for (&(db, dc, _), menu) in cases.iter().zip(menus) {
        let menu = menu.map_err(|e| format!("D_b={db}, D_c={dc}: {e}"))?;
        for (k, e) in menu.entries.iter().enumerate() {
            let s = 10.0 * db / (11.0 * dc) * (k + 1) as f64 - 1.0;
            worst_s = worst_s.max((e.quality - s).abs());
            worst_p = worst_p.max((e.price - 1.1 * dc * e.quality).abs());
        }
    }
    ensure!(worst_s <= 1e-6, "quality error {worst_s:e} > 1e-6");
    ensure!(worst_p <= 1e-12, "price error {worst_p:e} > 1e-12");
    ensure!(elapsed < 1.0, "runtime {elapsed:.3}s >= 1s");
    Ok(format!(
        "50 menus, max |Δs| {worst_s:.1e}, max |Δp| {worst_p:.1e}, {elapsed:.3}s"
    ))
}

fn menu_certification() -> Outcome {
    let mut r = rng(2);
    let mut scenarios: Vec<MenuScenario> = (0..25)
        .map(|_| {
            let (db, dc, l) = random_log_params(&mut r);
            log_menu(db, dc, l)
        })
        .collect();
    scenarios.extend((0..25).map(|_| {
        power_menu(
            r.gen_range(0.5..2.0),
            r.gen_range(0.3..0.7),
            r.gen_range(0.5..2.0),
            r.gen_range(1..=4),
        )
    }));
    let (mut worst_margin, mut worst_gap) = (f64::INFINITY, f64::NEG_INFINITY);
    for sc in &scenarios {
        let menu = solve_menu(sc).map_err(|e| e.to_string())?;
        let report = verify_menu(&menu, sc);
        ensure!(
            report.passed && report.worst_margin >= -1e-9,
            "verification failed: {:?}",
            report.violations
        );
        worst_margin = worst_margin.min(report.worst_margin);
        for (i, e) in menu.entries.iter().enumerate() {
            let a = feasible_interval(i, sc).map_err(|e| e.to_string())?.upper;
            let own = sc.net(i, e.quality).map_err(|e| e.to_string())?;
            let best = linspace(0.0, a, 10_000)
                .into_iter()
                .map(|s| sc.net(i, s).unwrap())
                .fold(f64::NEG_INFINITY, f64::max);
            worst_gap = worst_gap.max(best - own);
        }
    }
    ensure!(worst_gap <= 1e-6, "grid beats solver by {worst_gap:e}");
    Ok(format!(
        "{} menus, worst margin {worst_margin:.1e}, grid excess {worst_gap:.1e}",
        scenarios.len()
    ))
}

fn profile_closed_forms() -> Outcome {
    let mut r = rng(3);
    let (mut exact_err, mut tab_err, mut step_err) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..20 {
        let dp = r.gen_range(2.0..6.0);
        let theta_low = r.gen_range(0.3..1.0);
        let range = r.gen_range(0.5..2.0);
        let step = r.gen_range(0.5..2.0);
        let types = r.gen_range(2..=5);
        let (b, m) = (r.gen_range(0.0..0.1), r.gen_range(0.0..0.01));
        let dc = 0.5 * dp * theta_low;
        let analytic = bilinear_ladder(dp, dc, theta_low, range, step, types, b, m, None);
        let tabulated = bilinear_ladder(dp, dc, theta_low, range, step, types, b, m, Some(201));
        for j0 in 1..types {
            let (eps, del) = (dp * j0 as f64 * step, dp * step);
            let a = sensitivity_bounds(&analytic, j0).map_err(|e| e.to_string())?;
            let t = sensitivity_bounds(&tabulated, j0).map_err(|e| e.to_string())?;
            exact_err = exact_err
                .max(((a.epsilon - eps) / eps).abs())
                .max(((a.delta - del) / del).abs());
            tab_err = tab_err
                .max((t.epsilon - eps).abs())
                .max((t.delta - del).abs());
        }
        let steps = step_sizes(&analytic).map_err(|e| e.to_string())?;
        for (j0, d) in steps.iter().enumerate().skip(1) {
            let j = (j0 + 1) as f64;
            step_err = step_err.max((d - (m * step * (2.0 * j - 1.0).powi(2) + b / dp)).abs());
        }
    }
    ensure!(
        exact_err <= 1e-12,
        "analytic sensitivity relative error {exact_err:e}"
    );
    ensure!(tab_err <= 1e-3, "tabulated sensitivity error {tab_err:e}");
    ensure!(step_err <= 1e-12, "step error {step_err:e}");
    Ok(format!(
        "ε/δ rel err {exact_err:.1e}, tabulated {tab_err:.1e}, Δ_j err {step_err:.1e}"
    ))
}

fn worked_profile_check() -> Outcome {
    let start = Instant::now();
    let sc = worked_profile();
    let profile = build_profile(&sc).map_err(|e| e.to_string())?;
    let report = verify_profile(&profile, &sc, 9);
    let sim = simulate_market(&profile, &sc, 1000, 42).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed().as_secs_f64();
    for (t, want) in profile.thetas().iter().zip([0.343333, 0.458333, 0.733333]) {
        ensure!((t - want).abs() <= 1e-6, "θ = {t}, expected {want}");
    }
    let w = profile.windows[1];
    ensure!(
        (w.lower - 2.81).abs() <= 1e-6 && (w.upper - 2.81).abs() <= 1e-6,
        "window 2 = [{}, {}]",
        w.lower,
        w.upper
    );
    ensure!(
        report.passed,
        "verification failed: {:?}",
        report.violations
    );
    for b in &sim.bands {
        ensure!(
            b.intended_fraction == 1.0,
            "band {} fraction {}",
            b.k,
            b.intended_fraction
        );
        ensure!(
            b.provider_profit >= b.profit_target,
            "band {} profit {} < {}",
            b.k,
            b.provider_profit,
            b.profit_target
        );
    }
    ensure!(elapsed < 1.0, "runtime {elapsed:.3}s >= 1s");
    Ok(format!(
        "θ = {:.6?}, A_2 = B_2 = {:.6}, 3000 draws all intended, {elapsed:.3}s",
        profile.thetas(),
        w.lower
    ))
}

fn window_equivalence() -> Outcome {
    let mut r = rng(5);
    let mut worst = 0.0f64;
    let mut counts = [0usize; 2];
    for (family, count) in counts.iter_mut().enumerate() {
        let mut attempts = 0;
        while *count < 20 {
            attempts += 1;
            ensure!(
                attempts < 200,
                "too few buildable scenarios for family {family}"
            );
            let sc = if family == 0 {
                random_bilinear(&mut r)
            } else {
                random_separable(&mut r)
            };
            let Ok(profile) = build_profile(&sc) else {
                continue;
            };
            let cross = crosscheck_windows(&sc, &profile, 256);
            ensure!(cross.passed, "crosscheck failed: {:?}", cross.violations);
            let quad = quadrature_windows(&sc, &profile, 256).map_err(|e| e.to_string())?;
            for (q, w) in quad.iter().zip(&profile.windows) {
                if let Some(q) = q {
                    worst = worst
                        .max((q.lower - w.lower).abs() / w.lower.abs().max(1.0))
                        .max((q.upper - w.upper).abs() / w.upper.abs().max(1.0));
                }
            }
            *count += 1;
        }
    }
    ensure!(worst <= 1e-6, "relative discrepancy {worst:e}");
    Ok(format!(
        "20 bilinear + 20 separable, max relative discrepancy {worst:.1e}"
    ))
}

fn tradeoff_reproduction() -> Outcome {
    let mut worst = 0.0f64;
    for &ds in &[0.5, 1.0, 2.0, 4.0] {
        for &dt in &[0.25, 2.0 / 3.0, 1.0, 3.0] {
            let c = homogeneous_region(ds, dt, 3, 3.0, 51).map_err(|e| e.to_string())?;
            for p in &c.points {
                worst = worst.max((36.0 * p.m * ds + p.b - dt).abs());
            }
        }
    }
    ensure!(worst <= 1e-12, "boundary residual {worst:e}");
    for m in linspace(0.0, 0.002, 11) {
        let b = |ds: f64, dt: f64| homogeneous_region(ds, dt, 3, 3.0, 2).unwrap().boundary_b(m);
        ensure!(
            b(2.0, 1.0) > b(2.0, 0.5),
            "b not increasing in Δθ at m = {m}"
        );
        if m == 0.0 {
            // the profit-only extreme does not depend on the quality range
            ensure!(b(3.0, 1.0) == b(2.0, 1.0), "b0 depends on ΔS");
        } else {
            ensure!(
                b(3.0, 1.0) < b(2.0, 1.0),
                "b not decreasing in ΔS at m = {m}"
            );
        }
    }
    Ok(format!(
        "16 curves, max residual {worst:.1e}, orderings hold"
    ))
}

fn run_cli(out: &Path, args: &[&str]) -> i32 {
    let mut argv = vec!["target-pricing", "--quiet", "--out", out.to_str().unwrap()];
    argv.extend_from_slice(args);
    target_pricing_cli::run(argv)
}

fn cli_outputs(dir: &Path) -> Result<Vec<(String, Vec<u8>)>, String> {
    let configs = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let cfg = |n: &str| configs.join(n).to_string_lossy().into_owned();
    let solution = dir.join("profile.json").to_string_lossy().into_owned();
    for args in [
        vec!["menu", &cfg("log_budget.json")],
        vec!["profile", &cfg("bilinear.json")],
        vec![
            "simulate",
            &cfg("bilinear.json"),
            &solution,
            "--samples",
            "1000",
            "--seed",
            "42",
        ],
        vec!["tradeoff", &cfg("tradeoff.json")],
    ] {
        let code = run_cli(dir, &args);
        ensure!(code == 0, "`{}` exited {code}", args.join(" "));
    }
    let mut files: Vec<_> = fs::read_dir(dir)
        .map_err(|e| e.to_string())?
        .map(|e| {
            let path = e.unwrap().path();
            (
                path.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read(&path).unwrap(),
            )
        })
        .collect();
    files.sort();
    Ok(files)
}

fn property_suite() -> Outcome {
    // (i) strict monotonicity of certified menus and profiles
    let mut r = rng(7);
    let mut certified = 0;
    for _ in 0..30 {
        let (db, dc, l) = random_log_params(&mut r);
        let menu = solve_menu(&log_menu(db, dc, l)).map_err(|e| e.to_string())?;
        for w in menu.entries.windows(2) {
            ensure!(
                w[1].quality > w[0].quality && w[1].price > w[0].price,
                "menu not strictly increasing"
            );
        }
        let sc = if certified % 2 == 0 {
            random_bilinear(&mut r)
        } else {
            random_separable(&mut r)
        };
        if let Ok(p) = build_profile(&sc) {
            for w in p.entries.windows(2) {
                ensure!(
                    w[1].theta > w[0].theta && w[1].price > w[0].price,
                    "profile not strictly increasing"
                );
            }
        }
        certified += 1;
    }

    // (ii) downward closure on a 20×20 grid
    let template = bilinear_ladder(
        3.0,
        0.25,
        1.0 / 3.0,
        2.0 / 3.0,
        2.0 / 3.0,
        3,
        0.0,
        0.0,
        None,
    );
    let b_grid: Vec<f64> = (1..=20).map(|k| 0.05 * k as f64).collect();
    let m_grid: Vec<f64> = (1..=20).map(|k| 0.001 * k as f64).collect();
    let region = empirical_region(&template, &b_grid, &m_grid).map_err(|e| e.to_string())?;
    let achievable = region.achievable.iter().flatten().filter(|a| **a).count();
    ensure!(region.is_downward_closed(), "region not downward closed");
    ensure!(
        achievable > 0 && achievable < 400,
        "degenerate region ({achievable} cells)"
    );

    // (iii) byte-identical CLI artifacts and simulation reports
    let a = tempfile::tempdir().map_err(|e| e.to_string())?;
    let b = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (fa, fb) = (cli_outputs(a.path())?, cli_outputs(b.path())?);
    ensure!(fa == fb, "CLI artifacts differ between runs");
    let sc = worked_profile();
    let p = build_profile(&sc).map_err(|e| e.to_string())?;
    ensure!(
        simulate_market(&p, &sc, 500, 9).unwrap() == simulate_market(&p, &sc, 500, 9).unwrap(),
        "simulation not deterministic"
    );

    // (iv) build failures are declared errors; successes certify
    let mut failures = 0;
    for i in 0..200 {
        let mut sc = if i % 2 == 0 {
            random_bilinear(&mut r)
        } else {
            random_separable(&mut r)
        };
        if i % 3 == 0 {
            let heavy = MarginSpec::proportional(
                r.gen_range(0.0..2.0),
                r.gen_range(0.0..0.2),
                sc.qualities(),
            )
            .unwrap();
            sc = sc.with_margins(heavy).unwrap();
        }
        match build_profile(&sc) {
            Ok(p) => ensure!(
                verify_profile(&p, &sc, 9).passed,
                "returned profile fails verification"
            ),
            Err(Error::NotAchievable { .. })
            | Err(Error::EmptyPriceWindow { .. })
            | Err(Error::Certification { .. })
            | Err(Error::DegenerateSensitivity { .. }) => failures += 1,
            Err(e) => return Err(format!("undeclared failure: {e:?}")),
        }
    }
    let flat = {
        let bounds = DomainBox::new(0.5, 1.5, 1.0, 3.0).unwrap();
        let grid =
            Grid2::from_fn(|t, s| t + 2.0 * s, bounds.theta(), bounds.quality(), 11, 11).unwrap();
        let q = vec![1.0, 2.0, 3.0];
        ProfileScenario::new(
            q.clone(),
            TariffFunction::tabulated(grid).unwrap(),
            ScalarFunction::linear(1.0).unwrap(),
            bounds,
            MarginSpec::proportional(0.05, 0.005, &q).unwrap(),
        )
        .unwrap()
    };
    ensure!(
        matches!(
            build_profile(&flat),
            Err(Error::DegenerateSensitivity { .. })
        ),
        "flat tariff did not report degenerate sensitivity"
    );
    Ok(format!(
        "monotone over {certified} cases, region {achievable}/400 closed, {} identical artifacts, {failures}/200 declared failures",
        fa.len()
    ))
}

fn main() {
    let criteria: [Criterion; 7] = [
        ("menu closed form", menu_closed_form),
        ("menu certification", menu_certification),
        ("sensitivity and step closed forms", profile_closed_forms),
        ("worked demand-price profile", worked_profile_check),
        ("window quadrature equivalence", window_equivalence),
        ("tradeoff boundary", tradeoff_reproduction),
        ("property suite", property_suite),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("[PASS] {} {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("[FAIL] {} {name}: {detail}", i + 1);
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
