//! Profit/satisfaction tradeoffs.
//!
//! For the homogeneous bilinear family (`s_j = jδ`, `b_j = b·s_j`,
//! `m_j = m·s_j`, `F = D_p·θ·s`) the achievable pairs satisfy
//! `m·4ΔS·L² + b·L/D_p ≤ Δθ`. [`empirical_region`] probes any scenario
//! template with the solver's own achievability test instead.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::profile::{check_achievability, MarginSpec, ProfileScenario};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TradeoffPoint {
    pub m: f64,
    pub b: f64,
    /// `4·ΔS·L²·m`, the horizontal axis of the classic tradeoff plot.
    pub normalized_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TradeoffCurve {
    pub delta_s: f64,
    pub delta_theta: f64,
    pub types: usize,
    pub tariff_slope: f64,
    pub points: Vec<TradeoffPoint>,
    /// Largest margin at zero profit, capped at 1.
    pub extreme_m0: f64,
    /// Largest profit at zero margin.
    pub extreme_b0: f64,
}

impl TradeoffCurve {
    pub fn m_coefficient(&self) -> f64 {
        4.0 * self.delta_s * (self.types * self.types) as f64
    }

    pub fn b_coefficient(&self) -> f64 {
        self.types as f64 / self.tariff_slope
    }

    /// Boundary profit at margin `m` (may be negative past `m0`).
    pub fn boundary_b(&self, m: f64) -> f64 {
        (self.delta_theta - m * self.m_coefficient()) / self.b_coefficient()
    }

    /// Whether `(b, m)` lies in the closed analytic region.
    pub fn contains(&self, b: f64, m: f64) -> bool {
        b >= 0.0
            && (0.0..1.0).contains(&m)
            && m * self.m_coefficient() + b * self.b_coefficient() <= self.delta_theta
    }
}

/// Boundary of the homogeneous region, `n_points` spaced uniformly in `m`
/// from `(m0, b(m0))` down to `(0, b0)`.
pub fn homogeneous_region(
    delta_s: f64,
    delta_theta: f64,
    types: usize,
    tariff_slope: f64,
    n_points: usize,
) -> Result<TradeoffCurve> {
    for (name, v) in [
        ("delta_s", delta_s),
        ("delta_theta", delta_theta),
        ("D_p", tariff_slope),
    ] {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::InvalidScenario(format!(
                "{name} must be positive, got {v}"
            )));
        }
    }
    if types == 0 || n_points < 2 {
        return Err(Error::InvalidScenario(
            "need at least one type and two curve points".into(),
        ));
    }
    let mut curve = TradeoffCurve {
        delta_s,
        delta_theta,
        types,
        tariff_slope,
        points: Vec::with_capacity(n_points),
        extreme_m0: 0.0,
        extreme_b0: delta_theta * tariff_slope / types as f64,
    };
    curve.extreme_m0 = (delta_theta / curve.m_coefficient()).min(1.0);
    let last = (n_points - 1) as f64;
    curve.points = (0..n_points)
        .map(|i| {
            let m = curve.extreme_m0 * (1.0 - i as f64 / last);
            // exact zero at the unclipped end instead of a rounding residue
            let b = if i == 0 && curve.extreme_m0 < 1.0 {
                0.0
            } else {
                curve.boundary_b(m)
            };
            TradeoffPoint {
                m,
                b,
                normalized_m: curve.m_coefficient() * m,
            }
        })
        .collect();
    Ok(curve)
}

/// Achievability over a `(b, m)` grid; `achievable[i][j]` is for
/// `(b_grid[i], m_grid[j])`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegionGrid {
    pub b_grid: Vec<f64>,
    pub m_grid: Vec<f64>,
    pub achievable: Vec<Vec<bool>>,
}

impl RegionGrid {
    /// Downward closed in both coordinates.
    pub fn is_downward_closed(&self) -> bool {
        let a = &self.achievable;
        (0..a.len()).all(|i| {
            (0..a[i].len())
                .all(|j| !a[i][j] || ((i == 0 || a[i - 1][j]) && (j == 0 || a[i][j - 1])))
        })
    }
}

fn check_grid(name: &str, g: &[f64]) -> Result<()> {
    if g.is_empty()
        || g.iter().any(|v| !v.is_finite() || *v < 0.0)
        || g.windows(2).any(|w| w[1] <= w[0])
    {
        return Err(Error::InvalidScenario(format!(
            "{name} must be nonempty, nonnegative and strictly increasing"
        )));
    }
    Ok(())
}

/// Instantiates `b_j = b·s_j`, `m_j = m·s_j` on `template` for every grid
/// pair and records whether all three achievability conditions hold.
pub fn empirical_region(
    template: &ProfileScenario,
    b_grid: &[f64],
    m_grid: &[f64],
) -> Result<RegionGrid> {
    check_grid("b_grid", b_grid)?;
    check_grid("m_grid", m_grid)?;
    let achievable = b_grid
        .iter()
        .map(|&b| {
            m_grid
                .iter()
                .map(|&m| {
                    let margins = MarginSpec::proportional(b, m, template.qualities())?;
                    let sc = template.clone().with_margins(margins)?;
                    Ok(check_achievability(&sc).passed)
                })
                .collect::<Result<Vec<bool>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RegionGrid {
        b_grid: b_grid.to_vec(),
        m_grid: m_grid.to_vec(),
        achievable,
    })
}
