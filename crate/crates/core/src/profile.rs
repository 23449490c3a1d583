//! Demand-price profiles for a fixed quality ladder.
//!
//! Given qualities `s_1 < … < s_L`, the builder places nominal demands
//! `θ_k` and prices `p_k` so that every user whose demand lies within `m_k`
//! of `θ_k` can afford `s_k`, prefers it to every other quality, and the
//! provider clears profit `b_k` on it.

use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::function::{DomainBox, ScalarFunction, TariffFamily, TariffFunction};
use crate::numeric::linspace;
use crate::regularity::{check_marginal_budget, DEFAULT_GRID_N};
use crate::verify::{verify_profile, DEFAULT_PROBES};

pub const DEFAULT_PRICE_LAMBDA: f64 = 0.5;

/// Absolute slack tolerated when a price window is inverted by rounding.
pub const WINDOW_SLACK: f64 = 1e-9;
/// Rounding allowance on the entry condition and the final range check.
const ENTRY_TOL: f64 = 1e-12;

/// Per-quality profit targets `b`, demand half-widths `m` and profit gaps.
///
/// The gap vector has `L - 1` entries and defaults to `b_{k+1} - b_k`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarginSpec {
    b: Vec<f64>,
    m: Vec<f64>,
    gap: Vec<f64>,
}

impl MarginSpec {
    /// Strictly positive, strictly increasing targets and half-widths.
    pub fn new(b: Vec<f64>, m: Vec<f64>, gap: Option<Vec<f64>>) -> Result<Self> {
        for (name, v) in [("b", &b), ("m", &m)] {
            if v.iter().any(|&x| x <= 0.0) {
                return Err(Error::InvalidScenario(format!(
                    "margins.{name} must be positive"
                )));
            }
            if v.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::InvalidScenario(format!(
                    "margins.{name} must be strictly increasing"
                )));
            }
        }
        Self::relaxed(b, m, gap)
    }

    /// Nonnegative, nondecreasing margins; admits the zero limits used by
    /// region scans and degenerate bands.
    pub fn relaxed(b: Vec<f64>, m: Vec<f64>, gap: Option<Vec<f64>>) -> Result<Self> {
        if b.is_empty() || b.len() != m.len() {
            return Err(Error::InvalidScenario(format!(
                "margins.b and margins.m must be nonempty and of equal length (got {} and {})",
                b.len(),
                m.len()
            )));
        }
        for (name, v) in [("b", &b), ("m", &m)] {
            if v.iter().any(|&x| !x.is_finite() || x < 0.0) {
                return Err(Error::InvalidScenario(format!(
                    "margins.{name} must be finite and nonnegative"
                )));
            }
            if v.windows(2).any(|w| w[1] < w[0]) {
                return Err(Error::InvalidScenario(format!(
                    "margins.{name} must be nondecreasing"
                )));
            }
        }
        let increments: Vec<f64> = b.windows(2).map(|w| w[1] - w[0]).collect();
        let gap = match gap {
            None => increments,
            Some(g) => {
                if g.len() != increments.len() {
                    return Err(Error::InvalidScenario(format!(
                        "margins.gap must have {} entries, got {}",
                        increments.len(),
                        g.len()
                    )));
                }
                if let Some(k) = g
                    .iter()
                    .zip(&increments)
                    .position(|(g, d)| !g.is_finite() || g < d)
                {
                    return Err(Error::InvalidScenario(format!(
                        "margins.gap[{k}] must be at least b[{}] - b[{k}]",
                        k + 1
                    )));
                }
                g
            }
        };
        Ok(Self { b, m, gap })
    }

    /// `b_k = b·s_k`, `m_k = m·s_k`, default gaps.
    pub fn proportional(b: f64, m: f64, qualities: &[f64]) -> Result<Self> {
        Self::relaxed(
            qualities.iter().map(|s| b * s).collect(),
            qualities.iter().map(|s| m * s).collect(),
            None,
        )
    }

    pub fn len(&self) -> usize {
        self.b.len()
    }

    pub fn is_empty(&self) -> bool {
        self.b.is_empty()
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn m(&self) -> &[f64] {
        &self.m
    }

    pub fn gap(&self) -> &[f64] {
        &self.gap
    }
}

#[derive(Debug, Clone)]
pub struct ProfileScenario {
    qualities: Vec<f64>,
    tariff: TariffFunction,
    cost: ScalarFunction,
    bounds: DomainBox,
    margins: MarginSpec,
    price_lambda: f64,
    grid_n: usize,
}

impl ProfileScenario {
    pub fn new(
        qualities: Vec<f64>,
        tariff: TariffFunction,
        cost: ScalarFunction,
        bounds: DomainBox,
        margins: MarginSpec,
    ) -> Result<Self> {
        if qualities.is_empty() {
            return Err(Error::InvalidScenario(
                "at least one quality is required".into(),
            ));
        }
        if qualities.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidScenario(
                "qualities must be strictly increasing".into(),
            ));
        }
        let q = bounds.quality();
        if !(q.contains(qualities[0]) && q.contains(qualities[qualities.len() - 1])) {
            return Err(Error::InvalidScenario(format!(
                "qualities must lie in [{}, {}]",
                bounds.s_low, bounds.s_up
            )));
        }
        if !tariff.domain().contains_box(&bounds) {
            return Err(Error::InvalidScenario(
                "tariff domain does not cover the scenario bounds".into(),
            ));
        }
        if margins.len() != qualities.len() {
            return Err(Error::InvalidScenario(format!(
                "{} margins for {} qualities",
                margins.len(),
                qualities.len()
            )));
        }
        Ok(Self {
            qualities,
            tariff,
            cost,
            bounds,
            margins,
            price_lambda: DEFAULT_PRICE_LAMBDA,
            grid_n: DEFAULT_GRID_N,
        })
    }

    pub fn with_price_lambda(mut self, lambda: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&lambda) {
            return Err(Error::InvalidScenario(format!(
                "price_lambda must lie in [0, 1], got {lambda}"
            )));
        }
        self.price_lambda = lambda;
        Ok(self)
    }

    pub fn with_grid_n(mut self, grid_n: usize) -> Result<Self> {
        if grid_n < 2 {
            return Err(Error::InvalidScenario("grid_n must be at least 2".into()));
        }
        self.grid_n = grid_n;
        Ok(self)
    }

    pub fn with_margins(mut self, margins: MarginSpec) -> Result<Self> {
        if margins.len() != self.qualities.len() {
            return Err(Error::InvalidScenario(format!(
                "{} margins for {} qualities",
                margins.len(),
                self.qualities.len()
            )));
        }
        self.margins = margins;
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.qualities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.qualities.is_empty()
    }

    pub fn qualities(&self) -> &[f64] {
        &self.qualities
    }

    pub fn tariff(&self) -> &TariffFunction {
        &self.tariff
    }

    pub fn cost(&self) -> &ScalarFunction {
        &self.cost
    }

    pub fn bounds(&self) -> &DomainBox {
        &self.bounds
    }

    pub fn margins(&self) -> &MarginSpec {
        &self.margins
    }

    pub fn price_lambda(&self) -> f64 {
        self.price_lambda
    }

    pub fn grid_n(&self) -> usize {
        self.grid_n
    }

    /// Price floor `C(s_k) + b_k`.
    pub fn price_floor(&self, k: usize) -> Result<f64> {
        Ok(self.cost.eval(self.qualities[k])? + self.margins.b[k])
    }
}

/// `ε_j = sup_θ F_θ(θ, s_{j-1})` and `δ_j = inf_θ (F_θ(θ, s_j) - F_θ(θ, s_{j-1}))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Sensitivity {
    pub epsilon: f64,
    pub delta: f64,
}

/// Sensitivity bounds for the step into quality `j` (zero-based, `j ≥ 1`).
///
/// Bilinear tariffs are handled in closed form; everything else is scanned on
/// a `grid_n`-point demand grid.
pub fn sensitivity_bounds(scenario: &ProfileScenario, j: usize) -> Result<Sensitivity> {
    if j == 0 || j >= scenario.len() {
        return Err(Error::InvalidScenario(format!(
            "sensitivity index {j} must lie in 1..{}",
            scenario.len()
        )));
    }
    let (s_prev, s_cur) = (scenario.qualities[j - 1], scenario.qualities[j]);
    let out = match scenario.tariff.family() {
        TariffFamily::Bilinear { slope } => Sensitivity {
            epsilon: slope * s_prev,
            delta: slope * (s_cur - s_prev),
        },
        _ => {
            let b = &scenario.bounds;
            let mut epsilon = f64::NEG_INFINITY;
            let mut delta = f64::INFINITY;
            for t in linspace(b.theta_low, b.theta_up, scenario.grid_n) {
                let lo = scenario.tariff.partials(t, s_prev)?.theta;
                let hi = scenario.tariff.partials(t, s_cur)?.theta;
                epsilon = epsilon.max(lo);
                delta = delta.min(hi - lo);
            }
            Sensitivity { epsilon, delta }
        }
    };
    if !(out.delta > 0.0) {
        return Err(Error::DegenerateSensitivity {
            step: j + 1,
            delta: out.delta,
        });
    }
    Ok(out)
}

/// Demand steps `Δ_1 = m_1`, `Δ_j = (m_j + m_{j-1})(1 + 2ε_j/δ_j) + gap_{j-1}/δ_j`.
pub fn step_sizes(scenario: &ProfileScenario) -> Result<Vec<f64>> {
    let m = &scenario.margins.m;
    let mut steps = Vec::with_capacity(scenario.len());
    steps.push(m[0]);
    for j in 1..scenario.len() {
        let Sensitivity { epsilon, delta } = sensitivity_bounds(scenario, j)?;
        let step =
            (m[j] + m[j - 1]) * (1.0 + 2.0 * epsilon / delta) + scenario.margins.gap[j - 1] / delta;
        steps.push(step);
    }
    Ok(steps)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AchievabilityCondition {
    MarginalBudget,
    Entry,
    DemandRange,
}

impl fmt::Display for AchievabilityCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::MarginalBudget => "condition (1) marginal budget increase",
            Self::Entry => "condition (2) entry price F(θ_low, s_1) ≥ C(s_1) + b_1",
            Self::DemandRange => "condition (3) ΣΔ_j + m_L < θ_up − θ_low",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionOutcome {
    pub passed: bool,
    /// Signed slack; `None` when the quantity could not be evaluated.
    pub margin: Option<f64>,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AchievabilityReport {
    pub passed: bool,
    pub marginal_budget: ConditionOutcome,
    pub entry: ConditionOutcome,
    pub demand_range: ConditionOutcome,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub step_sizes: Option<Vec<f64>>,
}

impl AchievabilityReport {
    /// First failing condition, in order (1), (2), (3).
    pub fn first_failure(&self) -> Option<(AchievabilityCondition, &ConditionOutcome)> {
        [
            (
                AchievabilityCondition::MarginalBudget,
                &self.marginal_budget,
            ),
            (AchievabilityCondition::Entry, &self.entry),
            (AchievabilityCondition::DemandRange, &self.demand_range),
        ]
        .into_iter()
        .find(|(_, o)| !o.passed)
    }
}

fn outcome(passed: bool, margin: f64, detail: String) -> ConditionOutcome {
    ConditionOutcome {
        passed,
        margin: Some(margin),
        detail,
    }
}

fn unevaluable(e: &Error) -> ConditionOutcome {
    ConditionOutcome {
        passed: false,
        margin: None,
        detail: e.to_string(),
    }
}

fn marginal_budget_outcome(scenario: &ProfileScenario) -> ConditionOutcome {
    let r = check_marginal_budget(
        &scenario.tariff,
        &scenario.cost,
        &scenario.bounds,
        scenario.grid_n,
    );
    let c = &r.checks[0];
    ConditionOutcome {
        passed: r.passed,
        margin: c.margin,
        detail: c
            .witness
            .as_ref()
            .map(|w| w.detail.clone())
            .unwrap_or_default(),
    }
}

fn entry_outcome(scenario: &ProfileScenario) -> ConditionOutcome {
    let s1 = scenario.qualities[0];
    let eval = || -> Result<(f64, f64)> {
        Ok((
            scenario.tariff.eval(scenario.bounds.theta_low, s1)?,
            scenario.price_floor(0)?,
        ))
    };
    match eval() {
        Ok((budget, floor)) => {
            let margin = budget - floor;
            outcome(
                margin >= -ENTRY_TOL,
                margin,
                format!("F(θ_low, s_1) = {budget} vs C(s_1) + b_1 = {floor}"),
            )
        }
        Err(e) => unevaluable(&e),
    }
}

fn range_outcome(scenario: &ProfileScenario, steps: &[f64]) -> ConditionOutcome {
    let need: f64 = steps.iter().sum::<f64>() + scenario.margins.m[scenario.len() - 1];
    let have = scenario.bounds.theta_range();
    let margin = have - need;
    outcome(
        margin > 0.0,
        margin,
        format!("ΣΔ_j + m_L = {need} vs θ_up − θ_low = {have}"),
    )
}

/// Step sizes are computed first so that sensitivity failures propagate.
fn achievability(scenario: &ProfileScenario) -> Result<AchievabilityReport> {
    let steps = step_sizes(scenario)?;
    Ok(assemble(scenario, Some(steps), None))
}

fn assemble(
    scenario: &ProfileScenario,
    steps: Option<Vec<f64>>,
    step_error: Option<&Error>,
) -> AchievabilityReport {
    let marginal_budget = marginal_budget_outcome(scenario);
    let entry = entry_outcome(scenario);
    let demand_range = match (&steps, step_error) {
        (Some(s), _) => range_outcome(scenario, s),
        (None, Some(e)) => unevaluable(e),
        (None, None) => unreachable!("either steps or an error"),
    };
    AchievabilityReport {
        passed: marginal_budget.passed && entry.passed && demand_range.passed,
        marginal_budget,
        entry,
        demand_range,
        step_sizes: steps,
    }
}

/// Report-valued achievability test; never errors.
pub fn check_achievability(scenario: &ProfileScenario) -> AchievabilityReport {
    match step_sizes(scenario) {
        Ok(steps) => assemble(scenario, Some(steps), None),
        Err(e) => assemble(scenario, None, Some(&e)),
    }
}

/// Admissible price range `[A_j, B_j]` for quality `j` (zero-based, `j ≥ 1`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PriceWindow {
    pub lower: f64,
    pub upper: f64,
}

impl PriceWindow {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    /// `lower + λ·(upper - lower)`, pinned to `lower` when rounding inverts the window.
    pub fn pick(&self, lambda: f64) -> f64 {
        self.lower + lambda * self.width().max(0.0)
    }
}

/// `A_j` keeps the profit constraint of step `j-1`; `B_j` keeps quality `j`
/// preferred to `j-1` across band `j`. Both are closed-form tariff
/// differences.
pub fn price_window(
    scenario: &ProfileScenario,
    j: usize,
    theta_prev: f64,
    p_prev: f64,
    theta_j: f64,
) -> Result<PriceWindow> {
    if j == 0 || j >= scenario.len() {
        return Err(Error::InvalidScenario(format!(
            "price window index {j} must lie in 1..{}",
            scenario.len()
        )));
    }
    let f = &scenario.tariff;
    let (s_prev, s_cur) = (scenario.qualities[j - 1], scenario.qualities[j]);
    let (m_prev, m_cur) = (scenario.margins.m[j - 1], scenario.margins.m[j]);
    let lower = p_prev + f.eval(theta_prev + m_prev, s_cur)?
        - f.eval(theta_prev - m_prev, s_prev)?
        + scenario.margins.gap[j - 1];
    let upper = p_prev + f.eval(theta_j - m_cur, s_cur)? - f.eval(theta_j + m_cur, s_prev)?;
    if lower > upper + WINDOW_SLACK {
        return Err(Error::EmptyPriceWindow {
            step: j + 1,
            lower,
            upper,
        });
    }
    Ok(PriceWindow { lower, upper })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProfileEntry {
    pub theta: f64,
    pub price: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DemandPriceProfile {
    pub entries: Vec<ProfileEntry>,
    /// Window per quality; the first is `[C(s_1) + b_1, F(θ_low, s_1)]`.
    pub windows: Vec<PriceWindow>,
    pub step_sizes: Vec<f64>,
}

impl DemandPriceProfile {
    pub fn thetas(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.theta).collect()
    }

    pub fn prices(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.price).collect()
    }
}

/// Runs the recursion `θ_1 = θ_low + m_1`, `θ_j = θ_{j-1} + Δ_j`, picks each
/// price inside its window, and certifies the result before returning it.
pub fn build_profile(scenario: &ProfileScenario) -> Result<DemandPriceProfile> {
    let report = achievability(scenario)?;
    if let Some((condition, o)) = report.first_failure() {
        return Err(Error::NotAchievable {
            condition,
            margin: o.margin.unwrap_or(f64::NAN),
        });
    }
    let steps = report.step_sizes.expect("computed above");
    let lambda = scenario.price_lambda;
    let bounds = &scenario.bounds;
    let m = &scenario.margins.m;

    let first = PriceWindow {
        lower: scenario.price_floor(0)?,
        upper: scenario
            .tariff
            .eval(bounds.theta_low, scenario.qualities[0])?,
    };
    let mut entries = vec![ProfileEntry {
        theta: bounds.theta_low + m[0],
        price: first.pick(lambda),
    }];
    let mut windows = vec![first];

    for j in 1..scenario.len() {
        let prev = entries[j - 1];
        let theta = prev.theta + steps[j];
        let window = price_window(scenario, j, prev.theta, prev.price, theta)?;
        entries.push(ProfileEntry {
            theta,
            price: window.pick(lambda),
        });
        windows.push(window);
    }

    let last = entries[entries.len() - 1].theta + m[m.len() - 1];
    if last > bounds.theta_up + ENTRY_TOL * bounds.theta_up.max(1.0) {
        return Err(Error::Certification {
            constraint: "range".into(),
            detail: format!("θ_L + m_L = {last} exceeds θ_up = {}", bounds.theta_up),
        });
    }

    let profile = DemandPriceProfile {
        entries,
        windows,
        step_sizes: steps,
    };
    let verdict = verify_profile(&profile, scenario, DEFAULT_PROBES);
    if let Some(v) = verdict.violations.first() {
        return Err(Error::Certification {
            constraint: v.constraint.clone(),
            detail: format!(
                "{} violation(s), first at {:?} with margin {}",
                verdict.violations.len(),
                v.indices,
                v.margin
            ),
        });
    }
    Ok(profile)
}
