//! Scenario configuration files.
//!
//! A config is a single JSON object with a `mode` and the matching section:
//!
//! ```json
//! {
//!   "mode": "menu",
//!   "menu": {
//!     "budgets": [{"family": "log", "scale": 2.2}, {"family": "log", "scale": 4.4}],
//!     "cost": {"family": "linear", "slope": 1},
//!     "profit": {"family": "scaled", "base": {"family": "linear", "slope": 1}, "factor": 0.1}
//!   }
//! }
//! ```
//!
//! Unknown keys are rejected everywhere. Tabulated inputs point at CSV files
//! resolved relative to the config file.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use target_pricing::function::{Grid2, Table};
use target_pricing::menu::DEFAULT_SEARCH_MAX;
use target_pricing::profile::DEFAULT_PRICE_LAMBDA;
use target_pricing::regularity::DEFAULT_GRID_N;
use target_pricing::verify::{DEFAULT_PROBES, DEFAULT_QUAD_N};
use target_pricing::{
    DomainBox, Interval, MarginSpec, MenuScenario, ProfileScenario, ScalarFunction, TariffFunction,
};

use crate::CliError;

pub const DEFAULT_SAMPLES: usize = 1000;
pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_CURVE_POINTS: usize = 11;
pub const DEFAULT_PROBE: [f64; 2] = [0.0, 100.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Menu,
    Profile,
    Tradeoff,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Json,
    Csv,
    Both,
}

impl Format {
    pub fn json(self) -> bool {
        matches!(self, Format::Json | Format::Both)
    }

    pub fn csv(self) -> bool {
        matches!(self, Format::Csv | Format::Both)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum FunctionDecl {
    Linear {
        slope: f64,
    },
    Log {
        scale: f64,
    },
    Power {
        scale: f64,
        exponent: f64,
    },
    Scaled {
        base: Box<FunctionDecl>,
        factor: f64,
    },
    Tabulated {
        csv: PathBuf,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum TariffDecl {
    Bilinear {
        slope: f64,
    },
    Separable {
        theta: FunctionDecl,
        quality: FunctionDecl,
    },
    Tabulated {
        csv: PathBuf,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MenuConfig {
    pub budgets: Vec<FunctionDecl>,
    pub cost: FunctionDecl,
    pub profit: FunctionDecl,
    #[serde(default = "default_search_max")]
    pub s_search_max: f64,
    /// Interval scanned by the regularity check.
    #[serde(default = "default_probe")]
    pub probe: [f64; 2],
    #[serde(default = "default_grid_n")]
    pub grid_n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsDecl {
    pub theta: [f64; 2],
    pub s: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarginsDecl {
    pub b: Vec<f64>,
    pub m: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gap: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileConfig {
    pub tariff: TariffDecl,
    pub cost: FunctionDecl,
    pub bounds: BoundsDecl,
    pub qualities: Vec<f64>,
    pub margins: MarginsDecl,
    #[serde(default = "default_lambda")]
    pub price_lambda: f64,
    #[serde(default = "default_grid_n")]
    pub grid_n: usize,
    #[serde(default = "default_probes")]
    pub probes: usize,
    #[serde(default = "default_quad_n")]
    pub quad_n: usize,
}

/// Either an explicit list or `n` points `max·k/n`, `k = 1..=n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GridDecl {
    List(Vec<f64>),
    Range { max: f64, n: usize },
}

impl GridDecl {
    pub fn points(&self) -> Vec<f64> {
        match self {
            GridDecl::List(v) => v.clone(),
            GridDecl::Range { max, n } => (1..=*n).map(|k| max * k as f64 / *n as f64).collect(),
        }
    }
}

/// Empirical region scan on the homogeneous bilinear template
/// `s_j = j·ΔS/L`, `F = D_p·θ·s`, `C = cost_slope·s`,
/// `θ ∈ [theta_low, theta_low + Δθ]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionDecl {
    pub b_grid: GridDecl,
    pub m_grid: GridDecl,
    pub cost_slope: f64,
    pub theta_low: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TradeoffConfig {
    pub delta_s: f64,
    pub delta_theta: f64,
    pub types: usize,
    pub slope: f64,
    #[serde(default = "default_points")]
    pub points: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub region: Option<RegionDecl>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            samples: DEFAULT_SAMPLES,
            seed: DEFAULT_SEED,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default)]
    pub dir: Option<PathBuf>,
    #[serde(default)]
    pub format: Option<Format>,
}

/// Region scan inputs: a template scenario plus the `b` and `m` grids.
pub type RegionTemplate = (ProfileScenario, Vec<f64>, Vec<f64>);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub mode: Mode,
    #[serde(default)]
    pub menu: Option<MenuConfig>,
    #[serde(default)]
    pub profile: Option<ProfileConfig>,
    #[serde(default)]
    pub tradeoff: Option<TradeoffConfig>,
    #[serde(default)]
    pub simulation: SimulationConfig,
    #[serde(default)]
    pub output: OutputConfig,
    /// Directory that relative CSV paths resolve against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_search_max() -> f64 {
    DEFAULT_SEARCH_MAX
}
fn default_probe() -> [f64; 2] {
    DEFAULT_PROBE
}
fn default_grid_n() -> usize {
    DEFAULT_GRID_N
}
fn default_lambda() -> f64 {
    DEFAULT_PRICE_LAMBDA
}
fn default_probes() -> usize {
    DEFAULT_PROBES
}
fn default_quad_n() -> usize {
    DEFAULT_QUAD_N
}
fn default_points() -> usize {
    DEFAULT_CURVE_POINTS
}
fn default_samples() -> usize {
    DEFAULT_SAMPLES
}
fn default_seed() -> u64 {
    DEFAULT_SEED
}

fn config_error(field: impl Into<String>, message: impl Into<String>) -> CliError {
    CliError::Config {
        field: field.into(),
        message: message.into(),
    }
}

/// Parses and validates a config file. Referenced CSV files must exist and
/// parse.
pub fn load_config(path: &Path) -> Result<ScenarioConfig, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| config_error("", format!("cannot read {}: {e}", path.display())))?;
    let mut cfg = parse_config(&text)?;
    cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    cfg.validate()?;
    Ok(cfg)
}

pub fn parse_config(text: &str) -> Result<ScenarioConfig, CliError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let field = e.path().to_string();
        config_error(
            if field == "." { String::new() } else { field },
            e.into_inner().to_string(),
        )
    })
}

fn check_finite(field: &str, values: &[f64]) -> Result<(), CliError> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(config_error(field, format!("entry {i} is not finite"))),
        None => Ok(()),
    }
}

impl ScenarioConfig {
    fn validate(&self) -> Result<(), CliError> {
        match self.mode {
            Mode::Menu => {
                let menu = self.menu_section()?;
                check_finite("menu.s_search_max", &[menu.s_search_max])?;
                check_finite("menu.probe", &menu.probe)?;
                self.menu_scenario()?;
            }
            Mode::Profile => {
                let p = self.profile_section()?;
                check_finite("profile.qualities", &p.qualities)?;
                check_finite("profile.margins.b", &p.margins.b)?;
                check_finite("profile.margins.m", &p.margins.m)?;
                self.profile_scenario()?;
            }
            Mode::Tradeoff => {
                let t = self.tradeoff_section()?;
                check_finite("tradeoff", &[t.delta_s, t.delta_theta, t.slope])?;
                if t.points < 2 {
                    return Err(config_error(
                        "tradeoff.points",
                        "at least 2 points are required",
                    ));
                }
                if t.region.is_some() {
                    self.region_template()?;
                }
            }
        }
        Ok(())
    }

    pub fn menu_section(&self) -> Result<&MenuConfig, CliError> {
        self.menu
            .as_ref()
            .ok_or_else(|| config_error("menu", "mode \"menu\" requires a \"menu\" section"))
    }

    pub fn profile_section(&self) -> Result<&ProfileConfig, CliError> {
        self.profile.as_ref().ok_or_else(|| {
            config_error("profile", "mode \"profile\" requires a \"profile\" section")
        })
    }

    pub fn tradeoff_section(&self) -> Result<&TradeoffConfig, CliError> {
        self.tradeoff.as_ref().ok_or_else(|| {
            config_error(
                "tradeoff",
                "mode \"tradeoff\" requires a \"tradeoff\" section",
            )
        })
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn scalar(&self, field: &str, decl: &FunctionDecl) -> Result<ScalarFunction, CliError> {
        let wrap = |e: target_pricing::Error| config_error(field, e.to_string());
        match decl {
            FunctionDecl::Linear { slope } => ScalarFunction::linear(*slope).map_err(wrap),
            FunctionDecl::Log { scale } => ScalarFunction::log(*scale).map_err(wrap),
            FunctionDecl::Power { scale, exponent } => {
                ScalarFunction::power(*scale, *exponent).map_err(wrap)
            }
            FunctionDecl::Scaled { base, factor } => {
                let base = self.scalar(&format!("{field}.base"), base)?;
                ScalarFunction::scaled(base, *factor).map_err(wrap)
            }
            FunctionDecl::Tabulated { csv } => {
                let rows = read_rows(&self.resolve(csv), 2, field)?;
                let (xs, ys) = rows.into_iter().map(|r| (r[0], r[1])).unzip();
                Ok(ScalarFunction::tabulated(Table::new(xs, ys).map_err(wrap)?))
            }
        }
    }

    fn tariff(
        &self,
        field: &str,
        decl: &TariffDecl,
        bounds: DomainBox,
    ) -> Result<TariffFunction, CliError> {
        let wrap = |e: target_pricing::Error| config_error(field, e.to_string());
        match decl {
            TariffDecl::Bilinear { slope } => {
                TariffFunction::bilinear(*slope, bounds).map_err(wrap)
            }
            TariffDecl::Separable { theta, quality } => {
                let g = self.scalar(&format!("{field}.theta"), theta)?;
                let h = self.scalar(&format!("{field}.quality"), quality)?;
                TariffFunction::separable(g, h, bounds).map_err(wrap)
            }
            TariffDecl::Tabulated { csv } => {
                let rows = read_rows(&self.resolve(csv), 3, field)?;
                tariff_grid(rows)
                    .and_then(TariffFunction::tabulated)
                    .map_err(wrap)
            }
        }
    }

    pub fn menu_scenario(&self) -> Result<MenuScenario, CliError> {
        let menu = self.menu_section()?;
        let budgets = menu
            .budgets
            .iter()
            .enumerate()
            .map(|(i, d)| self.scalar(&format!("menu.budgets[{i}]"), d))
            .collect::<Result<Vec<_>, _>>()?;
        let cost = self.scalar("menu.cost", &menu.cost)?;
        let profit = self.scalar("menu.profit", &menu.profit)?;
        MenuScenario::new(budgets, cost, profit, menu.s_search_max)
            .map_err(|e| config_error("menu", e.to_string()))
    }

    pub fn menu_probe(&self) -> Result<Interval, CliError> {
        let p = self.menu_section()?.probe;
        Interval::new(p[0], p[1]).map_err(|e| config_error("menu.probe", e.to_string()))
    }

    pub fn profile_scenario(&self) -> Result<ProfileScenario, CliError> {
        let p = self.profile_section()?;
        let bounds = DomainBox::new(
            p.bounds.theta[0],
            p.bounds.theta[1],
            p.bounds.s[0],
            p.bounds.s[1],
        )
        .map_err(|e| config_error("profile.bounds", e.to_string()))?;
        let tariff = self.tariff("profile.tariff", &p.tariff, bounds)?;
        let cost = self.scalar("profile.cost", &p.cost)?;
        let margins = MarginSpec::new(
            p.margins.b.clone(),
            p.margins.m.clone(),
            p.margins.gap.clone(),
        )
        .map_err(|e| config_error("profile.margins", e.to_string()))?;
        let wrap = |field: &'static str| {
            move |e: target_pricing::Error| config_error(field, e.to_string())
        };
        ProfileScenario::new(p.qualities.clone(), tariff, cost, bounds, margins)
            .map_err(wrap("profile"))?
            .with_price_lambda(p.price_lambda)
            .map_err(wrap("profile.price_lambda"))?
            .with_grid_n(p.grid_n)
            .map_err(wrap("profile.grid_n"))
    }

    /// Homogeneous bilinear scenario used for the empirical region scan.
    pub fn region_template(&self) -> Result<Option<RegionTemplate>, CliError> {
        let t = self.tradeoff_section()?;
        let Some(region) = &t.region else {
            return Ok(None);
        };
        let wrap = |e: target_pricing::Error| config_error("tradeoff.region", e.to_string());
        if t.types == 0 {
            return Err(config_error(
                "tradeoff.types",
                "at least one type is required",
            ));
        }
        let step = t.delta_s / t.types as f64;
        let qualities: Vec<f64> = (1..=t.types).map(|j| step * j as f64).collect();
        let bounds = DomainBox::new(
            region.theta_low,
            region.theta_low + t.delta_theta,
            0.5 * step,
            t.delta_s,
        )
        .map_err(wrap)?;
        let tariff = TariffFunction::bilinear(t.slope, bounds).map_err(wrap)?;
        let cost = ScalarFunction::linear(region.cost_slope).map_err(wrap)?;
        let margins = MarginSpec::proportional(0.0, 0.0, &qualities).map_err(wrap)?;
        let sc = ProfileScenario::new(qualities, tariff, cost, bounds, margins).map_err(wrap)?;
        Ok(Some((sc, region.b_grid.points(), region.m_grid.points())))
    }

    /// SHA-256 over the canonical JSON of the active section plus the bytes
    /// of every referenced CSV file.
    pub fn scenario_hash(&self) -> Result<String, CliError> {
        let mut hasher = Sha256::new();
        let section = match self.mode {
            Mode::Menu => serde_json::to_string(&self.menu),
            Mode::Profile => serde_json::to_string(&self.profile),
            Mode::Tradeoff => serde_json::to_string(&self.tradeoff),
        }
        .map_err(|e| config_error("", e.to_string()))?;
        hasher.update(format!("{:?}", self.mode).as_bytes());
        hasher.update(section.as_bytes());
        for csv in self.csv_paths() {
            let bytes = fs::read(self.resolve(&csv))
                .map_err(|e| config_error("", format!("cannot read {}: {e}", csv.display())))?;
            hasher.update(&bytes);
        }
        Ok(hex(&hasher.finalize()))
    }

    fn csv_paths(&self) -> Vec<PathBuf> {
        fn walk(d: &FunctionDecl, out: &mut Vec<PathBuf>) {
            match d {
                FunctionDecl::Tabulated { csv } => out.push(csv.clone()),
                FunctionDecl::Scaled { base, .. } => walk(base, out),
                _ => {}
            }
        }
        let mut out = Vec::new();
        if let (Mode::Menu, Some(m)) = (self.mode, &self.menu) {
            m.budgets
                .iter()
                .chain([&m.cost, &m.profit])
                .for_each(|d| walk(d, &mut out));
        }
        if let (Mode::Profile, Some(p)) = (self.mode, &self.profile) {
            walk(&p.cost, &mut out);
            match &p.tariff {
                TariffDecl::Tabulated { csv } => out.push(csv.clone()),
                TariffDecl::Separable { theta, quality } => {
                    walk(theta, &mut out);
                    walk(quality, &mut out);
                }
                TariffDecl::Bilinear { .. } => {}
            }
        }
        out
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Numeric CSV rows with exactly `width` columns; a non-numeric first row
/// is taken as a header.
fn read_rows(path: &Path, width: usize, field: &str) -> Result<Vec<Vec<f64>>, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| config_error(field, format!("cannot read {}: {e}", path.display())))?;
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| config_error(field, format!("{}: {e}", path.display())))?;
        let parsed: Result<Vec<f64>, _> = record.iter().map(str::parse::<f64>).collect();
        match parsed {
            Ok(v) if v.len() == width => rows.push(v),
            Err(_) if i == 0 => continue,
            _ => {
                return Err(config_error(
                    field,
                    format!(
                        "{} row {}: expected {width} numeric columns",
                        path.display(),
                        i + 1
                    ),
                ))
            }
        }
    }
    Ok(rows)
}

/// Long-format `(theta, s, value)` rows covering a full rectangular grid.
fn tariff_grid(rows: Vec<Vec<f64>>) -> target_pricing::Result<Grid2> {
    let mut thetas: Vec<f64> = rows.iter().map(|r| r[0]).collect();
    let mut qualities: Vec<f64> = rows.iter().map(|r| r[1]).collect();
    for axis in [&mut thetas, &mut qualities] {
        axis.sort_by(f64::total_cmp);
        axis.dedup();
    }
    let mut values = vec![f64::NAN; thetas.len() * qualities.len()];
    for r in &rows {
        let i = thetas.partition_point(|&t| t < r[0]);
        let j = qualities.partition_point(|&s| s < r[1]);
        values[i * qualities.len() + j] = r[2];
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(target_pricing::Error::InvalidFunction(
            "tabulated tariff does not cover a full rectangular grid".into(),
        ));
    }
    Grid2::new(thetas, qualities, values)
}
