//! Quality-price menus for a known set of user types.
//!
//! Type `i` nets `f_i(s) = P_i(s) - C(s) - B(s)` at quality `s`. Each type is
//! offered the unique maximizer `s_i` of its (concave) net value at price
//! `p_i = C(s_i) + B(s_i)`, so the provider's target profit is met exactly and
//! IC reduces to `f_i(s_i) ≥ f_i(s_j)`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::function::ScalarFunction;
use crate::numeric::bisect;
use crate::verify::verify_menu;

pub const DEFAULT_SEARCH_MAX: f64 = 1e6;

/// Relative bracket width at which the stationary-point search stops.
const STATIONARY_WIDTH: f64 = 1e-9;
/// Relative bracket width for the feasible-set root.
const ROOT_WIDTH: f64 = 1e-13;
/// Qualities closer than this (relative) count as tied.
const TIE_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct MenuScenario {
    budgets: Vec<ScalarFunction>,
    cost: ScalarFunction,
    profit: ScalarFunction,
    search_max: f64,
}

impl MenuScenario {
    pub fn new(
        budgets: Vec<ScalarFunction>,
        cost: ScalarFunction,
        profit: ScalarFunction,
        search_max: f64,
    ) -> Result<Self> {
        if budgets.is_empty() {
            return Err(Error::InvalidScenario(
                "menu needs at least one user type".into(),
            ));
        }
        if !(search_max.is_finite() && search_max > 0.0) {
            return Err(Error::InvalidScenario(format!(
                "s_search_max must be positive and finite, got {search_max}"
            )));
        }
        Ok(Self {
            budgets,
            cost,
            profit,
            search_max,
        })
    }

    pub fn types(&self) -> usize {
        self.budgets.len()
    }

    pub fn budgets(&self) -> &[ScalarFunction] {
        &self.budgets
    }

    pub fn budget(&self, i: usize) -> &ScalarFunction {
        &self.budgets[i]
    }

    pub fn cost(&self) -> &ScalarFunction {
        &self.cost
    }

    pub fn profit(&self) -> &ScalarFunction {
        &self.profit
    }

    pub fn search_max(&self) -> f64 {
        self.search_max
    }

    /// Cost plus target profit at `s`: the price floor.
    pub fn hurdle(&self, s: f64) -> Result<f64> {
        Ok(self.cost.eval(s)? + self.profit.eval(s)?)
    }

    /// `f_i(s)`; `i` is zero-based.
    pub fn net(&self, i: usize, s: f64) -> Result<f64> {
        Ok(self.budgets[i].eval(s)? - self.hurdle(s)?)
    }

    pub fn net_slope(&self, i: usize, s: f64) -> Result<f64> {
        Ok(
            self.budgets[i].derivative(s)?
                - self.cost.derivative(s)?
                - self.profit.derivative(s)?,
        )
    }

    fn check_index(&self, i: usize) -> Result<()> {
        if i < self.types() {
            Ok(())
        } else {
            Err(Error::InvalidScenario(format!(
                "type index {i} out of range for {} types",
                self.types()
            )))
        }
    }
}

/// Where type `i` can be served without loss: `[0, upper]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FeasibleInterval {
    pub upper: f64,
}

impl FeasibleInterval {
    pub fn is_degenerate(&self) -> bool {
        self.upper == 0.0
    }
}

/// `{s ≥ 0 : f_i(s) ≥ 0} = [0, a_i]`.
///
/// The upper bracket is found by doubling from 1 up to `s_search_max`, then a
/// point of positive net value by halving below it, then `a_i` by bisection.
pub fn feasible_interval(i: usize, scenario: &MenuScenario) -> Result<FeasibleInterval> {
    scenario.check_index(i)?;
    let f = |s| scenario.net(i, s);
    let s_max = scenario.search_max;

    let mut hi = 1.0_f64.min(s_max);
    while f(hi)? >= 0.0 {
        if hi >= s_max {
            return Err(Error::UnboundedFeasibleSet {
                type_index: i + 1,
                search_max: s_max,
            });
        }
        hi = (2.0 * hi).min(s_max);
    }

    let mut lo = hi;
    loop {
        lo *= 0.5;
        if lo < f64::MIN_POSITIVE {
            return Ok(FeasibleInterval { upper: 0.0 });
        }
        if f(lo)? > 0.0 {
            break;
        }
    }

    let upper = bisect(f, lo, hi, ROOT_WIDTH * hi.max(1.0))?;
    Ok(FeasibleInterval { upper })
}

/// The stationary point of `f_i` inside its feasible interval, by bisection
/// on the (decreasing) slope.
pub fn maximize_net(i: usize, scenario: &MenuScenario) -> Result<f64> {
    let interval = feasible_interval(i, scenario)?;
    let slope0 = scenario.net_slope(i, 0.0)?;
    if interval.is_degenerate() || slope0 <= 0.0 {
        return Err(Error::NoInteriorMaximizer {
            type_index: i + 1,
            slope: slope0,
        });
    }
    let a = interval.upper;
    let slope_a = scenario.net_slope(i, a)?;
    if slope_a >= 0.0 {
        return Err(Error::Bracket(format!(
            "net-value slope of type {} does not change sign on [0, {a}] (slope at a = {slope_a})",
            i + 1
        )));
    }
    bisect(
        |s| scenario.net_slope(i, s),
        0.0,
        a,
        STATIONARY_WIDTH * a.max(1.0),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MenuEntry {
    pub quality: f64,
    pub price: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QualityPriceMenu {
    pub entries: Vec<MenuEntry>,
    /// `P_k(s_k) - p_k` per type.
    pub net_values: Vec<f64>,
}

impl QualityPriceMenu {
    /// Rebuilds a menu from stored entries, recomputing net values.
    pub fn from_entries(entries: Vec<MenuEntry>, scenario: &MenuScenario) -> Result<Self> {
        if entries.len() != scenario.types() {
            return Err(Error::InvalidScenario(format!(
                "menu has {} entries but the scenario has {} types",
                entries.len(),
                scenario.types()
            )));
        }
        let net_values = entries
            .iter()
            .enumerate()
            .map(|(k, e)| Ok(scenario.budget(k).eval(e.quality)? - e.price))
            .collect::<Result<_>>()?;
        Ok(Self {
            entries,
            net_values,
        })
    }

    pub fn qualities(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.quality).collect()
    }

    pub fn prices(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.price).collect()
    }
}

/// Builds and certifies the menu. Fails if any type lacks a positive
/// maximizer; partial menus are never returned.
pub fn solve_menu(scenario: &MenuScenario) -> Result<QualityPriceMenu> {
    let mut entries = Vec::with_capacity(scenario.types());
    for i in 0..scenario.types() {
        let quality = maximize_net(i, scenario)?;
        if let Some(prev) = entries.last().map(|e: &MenuEntry| e.quality) {
            if quality - prev <= TIE_TOL * prev.max(1.0) {
                return Err(Error::QualityTie {
                    lower: i,
                    upper: i + 1,
                    quality,
                });
            }
        }
        let price = scenario.hurdle(quality)?;
        entries.push(MenuEntry { quality, price });
    }
    let menu = QualityPriceMenu::from_entries(entries, scenario)?;

    let report = verify_menu(&menu, scenario);
    if let Some(v) = report.violations.first() {
        return Err(Error::Certification {
            constraint: v.constraint.clone(),
            detail: format!(
                "{} violation(s), first at {:?} with margin {}",
                report.violations.len(),
                v.indices,
                v.margin
            ),
        });
    }
    Ok(menu)
}
