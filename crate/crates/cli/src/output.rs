//! Solution files and CSV tables.
//!
//! Every float in emitted JSON is rounded to 9 significant digits so that
//! repeated runs are byte-identical. Menu and profile entries also carry the
//! raw `f64` bit patterns so `verify` can re-certify the exact solution.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use target_pricing::menu::{MenuEntry, MenuScenario, QualityPriceMenu};
use target_pricing::profile::{DemandPriceProfile, PriceWindow, ProfileEntry};
use target_pricing::tradeoff::{RegionGrid, TradeoffCurve};
use target_pricing::verify::VerificationReport;

use crate::CliError;

/// Rounds to 9 significant digits.
pub fn round9(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.8e}").parse().unwrap_or(x)
}

fn round_value(v: &mut Value) {
    match v {
        Value::Number(n) if !(n.is_i64() || n.is_u64()) => {
            if let Some(x) = n.as_f64() {
                if let Some(r) = serde_json::Number::from_f64(round9(x)) {
                    *n = r;
                }
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_value),
        Value::Object(map) => map.values_mut().for_each(round_value),
        _ => {}
    }
}

/// Pretty JSON with rounded floats and a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> Result<String, CliError> {
    let mut v = serde_json::to_value(value).map_err(|e| CliError::Io(e.to_string()))?;
    round_value(&mut v);
    let mut text = serde_json::to_string_pretty(&v).map_err(|e| CliError::Io(e.to_string()))?;
    text.push('\n');
    Ok(text)
}

pub fn bits(x: f64) -> String {
    format!("{:016x}", x.to_bits())
}

/// The exact value behind a rounded decimal: the stored bit pattern when it
/// rounds to `decimal`, otherwise `decimal` itself (a hand-edited file).
fn exact(decimal: f64, stored: Option<&str>) -> f64 {
    stored
        .and_then(|b| u64::from_str_radix(b, 16).ok())
        .map(f64::from_bits)
        .filter(|x| round9(*x) == decimal)
        .unwrap_or(decimal)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MenuBits {
    pub s: String,
    pub p: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MenuRow {
    #[serde(rename = "type")]
    pub type_index: usize,
    pub s: f64,
    pub p: f64,
    pub net: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bits: Option<MenuBits>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileBits {
    pub theta: String,
    pub p: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileRow {
    pub k: usize,
    pub theta: f64,
    pub p: f64,
    pub window: [f64; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bits: Option<ProfileBits>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationSummary {
    pub passed: bool,
    pub worst_margin: Option<f64>,
    pub checked: usize,
    pub violations: usize,
}

impl From<&VerificationReport> for VerificationSummary {
    fn from(r: &VerificationReport) -> Self {
        Self {
            passed: r.passed,
            worst_margin: r.worst_margin.is_finite().then_some(r.worst_margin),
            checked: r.checked,
            violations: r.violations.len(),
        }
    }
}

/// A solution file as written by `menu` or `profile`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Solution {
    Menu {
        scenario_hash: String,
        entries: Vec<MenuRow>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        verification: Option<VerificationSummary>,
    },
    Profile {
        scenario_hash: String,
        entries: Vec<ProfileRow>,
        deltas: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        verification: Option<VerificationSummary>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        window_crosscheck: Option<VerificationSummary>,
    },
}

impl Solution {
    pub fn scenario_hash(&self) -> &str {
        match self {
            Solution::Menu { scenario_hash, .. } | Solution::Profile { scenario_hash, .. } => {
                scenario_hash
            }
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Solution::Menu { .. } => "menu",
            Solution::Profile { .. } => "profile",
        }
    }

    pub fn from_menu(menu: &QualityPriceMenu, hash: String, report: &VerificationReport) -> Self {
        let entries = menu
            .entries
            .iter()
            .zip(&menu.net_values)
            .enumerate()
            .map(|(k, (e, &net))| MenuRow {
                type_index: k + 1,
                s: e.quality,
                p: e.price,
                net,
                bits: Some(MenuBits {
                    s: bits(e.quality),
                    p: bits(e.price),
                }),
            })
            .collect();
        Solution::Menu {
            scenario_hash: hash,
            entries,
            verification: Some(report.into()),
        }
    }

    pub fn from_profile(
        profile: &DemandPriceProfile,
        hash: String,
        report: &VerificationReport,
        crosscheck: &VerificationReport,
    ) -> Self {
        let entries = profile
            .entries
            .iter()
            .zip(&profile.windows)
            .enumerate()
            .map(|(k, (e, w))| ProfileRow {
                k: k + 1,
                theta: e.theta,
                p: e.price,
                window: [w.lower, w.upper],
                bits: Some(ProfileBits {
                    theta: bits(e.theta),
                    p: bits(e.price),
                }),
            })
            .collect();
        Solution::Profile {
            scenario_hash: hash,
            entries,
            deltas: profile.step_sizes.clone(),
            verification: Some(report.into()),
            window_crosscheck: Some(crosscheck.into()),
        }
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Solution(format!("cannot read {}: {e}", path.display())))?;
        let de = &mut serde_json::Deserializer::from_str(&text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            CliError::Solution(format!("{}: {} at {}", path.display(), e.inner(), e.path()))
        })
    }

    pub fn to_menu(&self, scenario: &MenuScenario) -> Result<QualityPriceMenu, CliError> {
        let Solution::Menu { entries, .. } = self else {
            return Err(CliError::Solution("expected a menu solution".into()));
        };
        let entries = entries
            .iter()
            .map(|r| MenuEntry {
                quality: exact(r.s, r.bits.as_ref().map(|b| b.s.as_str())),
                price: exact(r.p, r.bits.as_ref().map(|b| b.p.as_str())),
            })
            .collect();
        QualityPriceMenu::from_entries(entries, scenario).map_err(CliError::Core)
    }

    pub fn to_profile(&self) -> Result<DemandPriceProfile, CliError> {
        let Solution::Profile {
            entries, deltas, ..
        } = self
        else {
            return Err(CliError::Solution("expected a profile solution".into()));
        };
        Ok(DemandPriceProfile {
            entries: entries
                .iter()
                .map(|r| ProfileEntry {
                    theta: exact(r.theta, r.bits.as_ref().map(|b| b.theta.as_str())),
                    price: exact(r.p, r.bits.as_ref().map(|b| b.p.as_str())),
                })
                .collect(),
            windows: entries
                .iter()
                .map(|r| PriceWindow {
                    lower: r.window[0],
                    upper: r.window[1],
                })
                .collect(),
            step_sizes: deltas.clone(),
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TradeoffSummary<'a> {
    pub kind: &'static str,
    pub scenario_hash: String,
    pub m0: f64,
    pub b0: f64,
    pub m_coefficient: f64,
    pub b_coefficient: f64,
    pub points: &'a [target_pricing::tradeoff::TradeoffPoint],
    #[serde(skip_serializing_if = "Option::is_none")]
    pub region: Option<RegionSummary>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RegionSummary {
    pub b_points: usize,
    pub m_points: usize,
    pub achievable_cells: usize,
    pub downward_closed: bool,
}

impl RegionSummary {
    pub fn new(grid: &RegionGrid) -> Self {
        Self {
            b_points: grid.b_grid.len(),
            m_points: grid.m_grid.len(),
            achievable_cells: grid.achievable.iter().flatten().filter(|a| **a).count(),
            downward_closed: grid.is_downward_closed(),
        }
    }
}

fn csv_text<I, R>(header: &[&str], rows: I) -> Result<String, CliError>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| CliError::Io(e.to_string());
    w.write_record(header).map_err(io)?;
    for row in rows {
        w.write_record(row).map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| CliError::Io(e.to_string()))
}

fn num(x: f64) -> String {
    round9(x).to_string()
}

pub fn menu_csv(menu: &QualityPriceMenu, scenario: &MenuScenario) -> Result<String, CliError> {
    let mut rows = Vec::new();
    for (k, (e, net)) in menu.entries.iter().zip(&menu.net_values).enumerate() {
        let budget = scenario.budget(k).eval(e.quality).map_err(CliError::Core)?;
        rows.push(vec![
            (k + 1).to_string(),
            num(e.quality),
            num(e.price),
            num(budget),
            num(*net),
        ]);
    }
    csv_text(
        &[
            "type",
            "quality",
            "price",
            "budget_at_quality",
            "net_saving",
        ],
        rows,
    )
}

pub fn profile_csv(profile: &DemandPriceProfile) -> Result<String, CliError> {
    let rows = profile
        .entries
        .iter()
        .zip(&profile.windows)
        .zip(&profile.step_sizes)
        .enumerate()
        .map(|(k, ((e, w), d))| {
            vec![
                (k + 1).to_string(),
                num(e.theta),
                num(e.price),
                num(w.lower),
                num(w.upper),
                num(*d),
            ]
        });
    csv_text(
        &["k", "theta", "price", "window_lo", "window_hi", "delta"],
        rows,
    )
}

const TRADEOFF_HEADER: [&str; 4] = ["m", "b", "normalized_m", "achievable"];

pub fn tradeoff_csv(curve: &TradeoffCurve) -> Result<String, CliError> {
    let rows = curve.points.iter().map(|p| {
        vec![
            num(p.m),
            num(p.b),
            num(p.normalized_m),
            curve.contains(p.b, p.m).to_string(),
        ]
    });
    csv_text(&TRADEOFF_HEADER, rows)
}

pub fn region_csv(grid: &RegionGrid, curve: &TradeoffCurve) -> Result<String, CliError> {
    let mut rows = Vec::new();
    for (i, &b) in grid.b_grid.iter().enumerate() {
        for (j, &m) in grid.m_grid.iter().enumerate() {
            rows.push(vec![
                num(m),
                num(b),
                num(curve.m_coefficient() * m),
                grid.achievable[i][j].to_string(),
            ]);
        }
    }
    csv_text(&TRADEOFF_HEADER, rows)
}

/// Writes `contents` to `dir/name`, creating `dir` as needed.
pub fn write_artifact(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, CliError> {
    fs::create_dir_all(dir)
        .map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))?;
    let path = dir.join(name);
    fs::write(&path, contents)
        .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
    Ok(path)
}
