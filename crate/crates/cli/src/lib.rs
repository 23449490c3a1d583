//! Command-line front end for the `target-pricing` solvers.
//!
//! [`run`] is the whole program: it parses arguments, loads the scenario
//! config, dispatches to a solver or checker, writes JSON/CSV artifacts and
//! returns the process exit code.
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | success, solution certified |
//! | 2 | config, usage or solution-file error (including a scenario hash mismatch) |
//! | 3 | constraint violation, failed condition or unachievable margins |
//! | 4 | numerical failure (bracketing, empty window, degenerate sensitivity) |

pub mod config;
pub mod output;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Serialize;
use target_pricing::market::simulate_market;
use target_pricing::menu::solve_menu;
use target_pricing::profile::{build_profile, check_achievability};
use target_pricing::regularity::{check_marginal_budget, check_menu_regularity, ConditionReport};
use target_pricing::tradeoff::{empirical_region, homogeneous_region};
use target_pricing::verify::{crosscheck_windows, verify_menu, verify_profile, VerificationReport};
use target_pricing::ErrorClass;

use config::{load_config, Format, Mode, ScenarioConfig};
use output::{to_json, write_artifact, RegionSummary, Solution, TradeoffSummary};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "TARGET_PRICING_OUT";
pub const DEFAULT_OUT_DIR: &str = "out";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{}{message}", if field.is_empty() { String::new() } else { format!("{field}: ") })]
    Config { field: String, message: String },
    #[error("{0}")]
    Usage(String),
    #[error("solution file: {0}")]
    Solution(String),
    #[error("solution was produced for scenario {found}, config hashes to {expected}")]
    HashMismatch { expected: String, found: String },
    #[error("{0}")]
    Io(String),
    #[error(transparent)]
    Core(target_pricing::Error),
    /// Verification, regularity or simulation found a failing constraint.
    #[error("{message}")]
    Failed { kind: &'static str, message: String },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. }
            | CliError::Usage(_)
            | CliError::Solution(_)
            | CliError::HashMismatch { .. }
            | CliError::Io(_) => 2,
            CliError::Failed { .. } => 3,
            CliError::Core(e) => match e.class() {
                ErrorClass::Input => 2,
                ErrorClass::ConditionFailure => 3,
                ErrorClass::Numerical => 4,
            },
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config { .. } => "config",
            CliError::Usage(_) => "usage",
            CliError::Solution(_) => "solution",
            CliError::HashMismatch { .. } => "scenario_hash_mismatch",
            CliError::Io(_) => "io",
            CliError::Core(e) => e.kind(),
            CliError::Failed { kind, .. } => kind,
        }
    }

    /// The JSON object written to standard error.
    pub fn to_json(&self) -> serde_json::Value {
        let mut body = serde_json::json!({
            "kind": self.kind(),
            "message": self.to_string(),
            "exit_code": self.exit_code(),
        });
        if let CliError::Config { field, .. } = self {
            if !field.is_empty() {
                body["field"] = field.clone().into();
            }
        }
        serde_json::json!({ "error": body })
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "target-pricing",
    version,
    about = "Quality-price menus and demand-price profiles for target profits"
)]
struct Cli {
    /// Output directory [default: $TARGET_PRICING_OUT, then the config, then "out"]
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Artifact format [default: the config's choice, then both]
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Suppress the human-readable summary on standard output
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve, certify and emit a quality-price menu
    Menu { config: PathBuf },
    /// Check achievability, build, certify and emit a demand-price profile
    Profile { config: PathBuf },
    /// Re-certify a solution file against its config
    Verify { config: PathBuf, solution: PathBuf },
    /// Monte Carlo market check of a profile solution
    Simulate {
        config: PathBuf,
        solution: PathBuf,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Emit the profit/satisfaction tradeoff curve
    Tradeoff {
        config: PathBuf,
        #[arg(long)]
        points: Option<usize>,
    },
    /// Regularity or achievability report only
    Check { config: PathBuf },
}

struct Ctx {
    out: Option<PathBuf>,
    format: Option<Format>,
    quiet: bool,
}

impl Ctx {
    fn out_dir(&self, cfg: &ScenarioConfig) -> PathBuf {
        self.out
            .clone()
            .or_else(|| {
                std::env::var_os(OUT_DIR_ENV)
                    .filter(|v| !v.is_empty())
                    .map(PathBuf::from)
            })
            .or_else(|| cfg.output.dir.clone())
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
    }

    fn format(&self, cfg: &ScenarioConfig) -> Format {
        self.format.or(cfg.output.format).unwrap_or(Format::Both)
    }

    fn say(&self, text: &str) {
        if !self.quiet {
            let mut out = std::io::stdout().lock();
            let _ = out.write_all(text.as_bytes());
        }
    }

    fn emit(&self, cfg: &ScenarioConfig, name: &str, contents: &str) -> Result<(), CliError> {
        let path = write_artifact(&self.out_dir(cfg), name, contents)?;
        self.say(&format!("wrote {}\n", path.display()));
        Ok(())
    }

    fn emit_json<T: Serialize>(
        &self,
        cfg: &ScenarioConfig,
        name: &str,
        value: &T,
    ) -> Result<(), CliError> {
        self.emit(cfg, name, &to_json(value)?)
    }
}

/// Runs the program on `argv` (including the program name) and returns the
/// exit code. Errors are reported as a JSON object on standard error.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return 0;
        }
        Err(e) => return report_error(&CliError::Usage(e.to_string().trim_end().to_string())),
    };
    let ctx = Ctx {
        out: cli.out,
        format: cli.format,
        quiet: cli.quiet,
    };
    let result = match &cli.command {
        Command::Menu { config } => cmd_menu(&ctx, config),
        Command::Profile { config } => cmd_profile(&ctx, config),
        Command::Verify { config, solution } => cmd_verify(&ctx, config, solution),
        Command::Simulate {
            config,
            solution,
            samples,
            seed,
        } => cmd_simulate(&ctx, config, solution, *samples, *seed),
        Command::Tradeoff { config, points } => cmd_tradeoff(&ctx, config, *points),
        Command::Check { config } => cmd_check(&ctx, config),
    };
    match result {
        Ok(()) => 0,
        Err(e) => report_error(&e),
    }
}

fn report_error(e: &CliError) -> i32 {
    eprintln!("{}", e.to_json());
    e.exit_code()
}

fn require_mode(cfg: &ScenarioConfig, modes: &[Mode], command: &str) -> Result<(), CliError> {
    if modes.contains(&cfg.mode) {
        Ok(())
    } else {
        Err(CliError::Config {
            field: "mode".into(),
            message: format!("`{command}` does not apply to mode {:?}", cfg.mode),
        })
    }
}

fn violations_error(what: &str, report: &VerificationReport) -> CliError {
    let first = report
        .violations
        .first()
        .map(|v| {
            format!(
                "; first: {} at {:?} with margin {:e}",
                v.constraint, v.indices, v.margin
            )
        })
        .unwrap_or_default();
    CliError::Failed {
        kind: "constraint_violation",
        message: format!("{what}: {} violation(s){first}", report.violations.len()),
    }
}

fn verification_table(report: &VerificationReport) -> String {
    let mut s = format!(
        "verification: {} ({} constraints, worst margin {:.3e})\n",
        if report.passed { "passed" } else { "FAILED" },
        report.checked,
        report.worst_margin
    );
    for v in report.violations.iter().take(20) {
        s += &format!(
            "  {:<18} {:?} margin {:.3e}\n",
            v.constraint, v.indices, v.margin
        );
    }
    s
}

fn cmd_menu(ctx: &Ctx, path: &Path) -> Result<(), CliError> {
    let cfg = load_config(path)?;
    require_mode(&cfg, &[Mode::Menu], "menu")?;
    let scenario = cfg.menu_scenario()?;
    let menu = solve_menu(&scenario).map_err(CliError::Core)?;
    let report = verify_menu(&menu, &scenario);
    let solution = Solution::from_menu(&menu, cfg.scenario_hash()?, &report);

    let mut table = format!(
        "{:>4} {:>14} {:>14} {:>14}\n",
        "type", "quality", "price", "net"
    );
    for (k, (e, net)) in menu.entries.iter().zip(&menu.net_values).enumerate() {
        table += &format!(
            "{:>4} {:>14.9} {:>14.9} {:>14.9}\n",
            k + 1,
            e.quality,
            e.price,
            net
        );
    }
    ctx.say(&table);
    ctx.say(&verification_table(&report));

    let format = ctx.format(&cfg);
    if format.json() {
        ctx.emit_json(&cfg, "menu.json", &solution)?;
    }
    if format.csv() {
        ctx.emit(&cfg, "menu.csv", &output::menu_csv(&menu, &scenario)?)?;
    }
    if report.passed {
        Ok(())
    } else {
        Err(violations_error("menu verification", &report))
    }
}

fn achievability_error(report: &target_pricing::profile::AchievabilityReport) -> Option<CliError> {
    report
        .first_failure()
        .map(|(condition, o)| CliError::Failed {
            kind: "not_achievable",
            message: format!("{condition} fails: {}", o.detail),
        })
}

fn cmd_profile(ctx: &Ctx, path: &Path) -> Result<(), CliError> {
    let cfg = load_config(path)?;
    require_mode(&cfg, &[Mode::Profile], "profile")?;
    let section = cfg.profile_section()?;
    let scenario = cfg.profile_scenario()?;
    let achievable = check_achievability(&scenario);
    if let Some(e) = achievability_error(&achievable) {
        ctx.say(&to_json(&achievable)?);
        return Err(e);
    }
    let profile = build_profile(&scenario).map_err(CliError::Core)?;
    let report = verify_profile(&profile, &scenario, section.probes);
    let crosscheck = crosscheck_windows(&scenario, &profile, section.quad_n);
    let solution = Solution::from_profile(&profile, cfg.scenario_hash()?, &report, &crosscheck);

    let mut table = format!(
        "{:>3} {:>14} {:>14} {:>14} {:>14}\n",
        "k", "theta", "price", "window_lo", "window_hi"
    );
    for (k, (e, w)) in profile.entries.iter().zip(&profile.windows).enumerate() {
        table += &format!(
            "{:>3} {:>14.9} {:>14.9} {:>14.9} {:>14.9}\n",
            k + 1,
            e.theta,
            e.price,
            w.lower,
            w.upper
        );
    }
    ctx.say(&table);
    ctx.say(&verification_table(&report));
    ctx.say(&format!(
        "window crosscheck: {}\n",
        if crosscheck.passed {
            "passed"
        } else {
            "FAILED"
        }
    ));

    let format = ctx.format(&cfg);
    if format.json() {
        ctx.emit_json(&cfg, "profile.json", &solution)?;
    }
    if format.csv() {
        ctx.emit(&cfg, "profile.csv", &output::profile_csv(&profile)?)?;
    }
    if !report.passed {
        return Err(violations_error("profile verification", &report));
    }
    if !crosscheck.passed {
        return Err(violations_error("window crosscheck", &crosscheck));
    }
    Ok(())
}

fn load_solution(cfg: &ScenarioConfig, path: &Path) -> Result<Solution, CliError> {
    let solution = Solution::load(path)?;
    let expected = cfg.scenario_hash()?;
    if solution.scenario_hash() != expected {
        return Err(CliError::HashMismatch {
            expected,
            found: solution.scenario_hash().to_string(),
        });
    }
    let matches = matches!(
        (cfg.mode, &solution),
        (Mode::Menu, Solution::Menu { .. }) | (Mode::Profile, Solution::Profile { .. })
    );
    if !matches {
        return Err(CliError::Solution(format!(
            "a {} solution does not match a {:?} config",
            solution.kind(),
            cfg.mode
        )));
    }
    Ok(solution)
}

#[derive(Serialize)]
struct VerifyOutput<'a> {
    kind: &'static str,
    scenario_hash: &'a str,
    verification: &'a VerificationReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    window_crosscheck: Option<&'a VerificationReport>,
}

fn cmd_verify(ctx: &Ctx, config: &Path, solution: &Path) -> Result<(), CliError> {
    let cfg = load_config(config)?;
    require_mode(&cfg, &[Mode::Menu, Mode::Profile], "verify")?;
    let sol = load_solution(&cfg, solution)?;
    let (report, crosscheck) = match cfg.mode {
        Mode::Menu => {
            let scenario = cfg.menu_scenario()?;
            (verify_menu(&sol.to_menu(&scenario)?, &scenario), None)
        }
        _ => {
            let section = cfg.profile_section()?;
            let scenario = cfg.profile_scenario()?;
            let profile = sol.to_profile()?;
            (
                verify_profile(&profile, &scenario, section.probes),
                Some(crosscheck_windows(&scenario, &profile, section.quad_n)),
            )
        }
    };
    ctx.say(&verification_table(&report));
    if ctx.format(&cfg).json() {
        let out = VerifyOutput {
            kind: "verification",
            scenario_hash: sol.scenario_hash(),
            verification: &report,
            window_crosscheck: crosscheck.as_ref(),
        };
        ctx.emit_json(&cfg, "verification.json", &out)?;
    }
    if !report.passed {
        return Err(violations_error("verification", &report));
    }
    if let Some(c) = crosscheck.filter(|c| !c.passed) {
        return Err(violations_error("window crosscheck", &c));
    }
    Ok(())
}

fn cmd_simulate(
    ctx: &Ctx,
    config: &Path,
    solution: &Path,
    samples: Option<usize>,
    seed: Option<u64>,
) -> Result<(), CliError> {
    let cfg = load_config(config)?;
    require_mode(&cfg, &[Mode::Profile], "simulate")?;
    let sol = load_solution(&cfg, solution)?;
    let scenario = cfg.profile_scenario()?;
    let profile = sol.to_profile()?;
    let samples = samples.unwrap_or(cfg.simulation.samples);
    let seed = seed.unwrap_or(cfg.simulation.seed);
    let report = simulate_market(&profile, &scenario, samples, seed).map_err(CliError::Core)?;

    let mut table = format!(
        "{:>3} {:>10} {:>12} {:>12} {:>12} {:>8}\n",
        "k", "intended", "min_saving", "profit", "target", "met"
    );
    for b in &report.bands {
        table += &format!(
            "{:>3} {:>10.6} {:>12.6} {:>12.6} {:>12.6} {:>8}\n",
            b.k,
            b.intended_fraction,
            b.min_saving,
            b.provider_profit,
            b.profit_target,
            b.profit_target_met
        );
    }
    table += &format!(
        "out of band: {} of {} draws, affordable {:.6}, chose assigned {:.6}\n",
        report.out_of_band.out_of_band,
        report.out_of_band.drawn,
        report.out_of_band.affordable_fraction,
        report.out_of_band.assigned_choice_fraction
    );
    ctx.say(&table);
    if ctx.format(&cfg).json() {
        ctx.emit_json(&cfg, "simulation.json", &report)?;
    }
    if report.all_bands_clean() {
        Ok(())
    } else {
        let bad: Vec<usize> = report
            .bands
            .iter()
            .filter(|b| b.intended_fraction < 1.0 || !b.profit_target_met)
            .map(|b| b.k)
            .collect();
        Err(CliError::Failed {
            kind: "simulation_violation",
            message: format!(
                "bands {bad:?} lose users to other qualities or miss their profit target"
            ),
        })
    }
}

fn cmd_tradeoff(ctx: &Ctx, config: &Path, points: Option<usize>) -> Result<(), CliError> {
    let cfg = load_config(config)?;
    require_mode(&cfg, &[Mode::Tradeoff], "tradeoff")?;
    let t = cfg.tradeoff_section()?;
    let n_points = points.unwrap_or(t.points);
    let curve = homogeneous_region(t.delta_s, t.delta_theta, t.types, t.slope, n_points)
        .map_err(CliError::Core)?;
    let region = match cfg.region_template()? {
        Some((template, b_grid, m_grid)) => {
            Some(empirical_region(&template, &b_grid, &m_grid).map_err(CliError::Core)?)
        }
        None => None,
    };

    let mut table = format!(
        "m0 = {:.9}, b0 = {:.9}\n",
        curve.extreme_m0, curve.extreme_b0
    );
    table += &format!("{:>14} {:>14} {:>14}\n", "m", "b", "normalized_m");
    for p in &curve.points {
        table += &format!("{:>14.9} {:>14.9} {:>14.9}\n", p.m, p.b, p.normalized_m);
    }
    if let Some(r) = &region {
        let s = RegionSummary::new(r);
        table += &format!(
            "region: {} of {} cells achievable, downward closed: {}\n",
            s.achievable_cells,
            s.b_points * s.m_points,
            s.downward_closed
        );
    }
    ctx.say(&table);

    let format = ctx.format(&cfg);
    if format.json() {
        let summary = TradeoffSummary {
            kind: "tradeoff",
            scenario_hash: cfg.scenario_hash()?,
            m0: curve.extreme_m0,
            b0: curve.extreme_b0,
            m_coefficient: curve.m_coefficient(),
            b_coefficient: curve.b_coefficient(),
            points: &curve.points,
            region: region.as_ref().map(RegionSummary::new),
        };
        ctx.emit_json(&cfg, "tradeoff.json", &summary)?;
    }
    if format.csv() {
        ctx.emit(&cfg, "tradeoff.csv", &output::tradeoff_csv(&curve)?)?;
        if let Some(r) = &region {
            ctx.emit(&cfg, "region.csv", &output::region_csv(r, &curve)?)?;
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct CheckOutput<'a> {
    kind: &'static str,
    passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    regularity: Option<&'a ConditionReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    achievability: Option<&'a target_pricing::profile::AchievabilityReport>,
}

fn cmd_check(ctx: &Ctx, path: &Path) -> Result<(), CliError> {
    let cfg = load_config(path)?;
    require_mode(&cfg, &[Mode::Menu, Mode::Profile], "check")?;
    let (regularity, achievability) = match cfg.mode {
        Mode::Menu => {
            let section = cfg.menu_section()?;
            let sc = cfg.menu_scenario()?;
            let report = check_menu_regularity(
                sc.budgets(),
                sc.cost(),
                sc.profit(),
                cfg.menu_probe()?,
                section.grid_n,
            );
            (Some(report), None)
        }
        _ => {
            let sc = cfg.profile_scenario()?;
            let marginal = check_marginal_budget(sc.tariff(), sc.cost(), sc.bounds(), sc.grid_n());
            (Some(marginal), Some(check_achievability(&sc)))
        }
    };
    let passed = regularity.as_ref().is_none_or(|r| r.passed)
        && achievability.as_ref().is_none_or(|a| a.passed);

    let mut table = String::new();
    if let Some(r) = &regularity {
        for c in &r.checks {
            table += &format!("{:<36} {}\n", c.id, if c.passed { "ok" } else { "FAILED" });
        }
    }
    if let Some(a) = &achievability {
        for (name, o) in [
            ("marginal_budget", &a.marginal_budget),
            ("entry", &a.entry),
            ("demand_range", &a.demand_range),
        ] {
            table += &format!(
                "{:<36} {}  {}\n",
                name,
                if o.passed { "ok" } else { "FAILED" },
                o.detail
            );
        }
    }
    ctx.say(&table);
    if ctx.format(&cfg).json() {
        let out = CheckOutput {
            kind: "check",
            passed,
            regularity: regularity.as_ref(),
            achievability: achievability.as_ref(),
        };
        ctx.emit_json(&cfg, "check.json", &out)?;
    }
    if passed {
        return Ok(());
    }
    if let Some(e) = achievability.as_ref().and_then(achievability_error) {
        return Err(e);
    }
    let failed: Vec<&str> = regularity
        .iter()
        .flat_map(|r| r.failures())
        .map(|c| c.id.as_str())
        .collect();
    Err(CliError::Failed {
        kind: "condition_failure",
        message: format!("failed conditions: {}", failed.join(", ")),
    })
}
