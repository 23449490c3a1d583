//! Grid-based checks of the regularity assumptions the two solvers rely on.
//!
//! Nothing here proves convexity or monotonicity; every check samples a
//! uniform grid and reports the first point where the property fails.

use serde::Serialize;

use crate::error::Result;
use crate::function::{DomainBox, Interval, ScalarFunction, TariffFamily, TariffFunction};
use crate::numeric::linspace;

pub const DEFAULT_GRID_N: usize = 512;
pub const MIN_GRID_N: usize = 16;

/// Slack on second differences when certifying convexity/concavity.
pub const CURVATURE_SLACK: f64 = 1e-9;
/// Required gap between consecutive budget slopes.
pub const SINGLE_CROSSING_MARGIN: f64 = 1e-12;
/// Tolerance for `f(0) == 0`.
const ORIGIN_TOL: f64 = 1e-12;
/// Tolerance below zero still counted as passing the marginal-budget test.
const MARGINAL_BUDGET_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Witness {
    pub s: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionCheck {
    /// Dotted id: group first (`a1`, `a2`, `a3`, `marginal_budget`).
    pub id: String,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub margin: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ConditionReport {
    pub passed: bool,
    pub checks: Vec<ConditionCheck>,
}

impl ConditionReport {
    fn push(&mut self, check: ConditionCheck) {
        self.checks.push(check);
    }

    fn finish(mut self) -> Self {
        self.passed = self.checks.iter().all(|c| c.passed);
        self
    }

    /// Whether every check whose id starts with `group` passed.
    pub fn group_passed(&self, group: &str) -> bool {
        self.checks
            .iter()
            .filter(|c| c.id == group || c.id.starts_with(&format!("{group}.")))
            .all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &ConditionCheck> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn get(&self, id: &str) -> Option<&ConditionCheck> {
        self.checks.iter().find(|c| c.id == id)
    }
}

fn check(id: impl Into<String>, failure: Option<Witness>) -> ConditionCheck {
    ConditionCheck {
        id: id.into(),
        passed: failure.is_none(),
        margin: None,
        witness: failure,
    }
}

fn at(s: f64, detail: impl Into<String>) -> Option<Witness> {
    Some(Witness {
        s,
        theta: None,
        detail: detail.into(),
    })
}

/// Probe grid: `grid_n` points `lo + (hi - lo)·k/grid_n`, `k = 1..=grid_n`.
/// Doubling `grid_n` keeps every earlier point.
pub fn probe_grid(probe: Interval, grid_n: usize) -> Vec<f64> {
    let h = probe.len() / grid_n as f64;
    (1..=grid_n)
        .map(|k| {
            if k == grid_n {
                probe.hi
            } else {
                probe.lo + h * k as f64
            }
        })
        .collect()
}

fn sample(f: &ScalarFunction, xs: &[f64]) -> std::result::Result<Vec<f64>, Witness> {
    xs.iter()
        .map(|&x| {
            f.eval(x).map_err(|e| Witness {
                s: x,
                theta: None,
                detail: e.to_string(),
            })
        })
        .collect()
}

fn origin_check(id: String, f: &ScalarFunction) -> ConditionCheck {
    match f.eval(0.0) {
        Ok(v) if v.abs() <= ORIGIN_TOL => check(id, None),
        Ok(v) => check(id, at(0.0, format!("value at 0 is {v}"))),
        Err(e) => check(id, at(0.0, e.to_string())),
    }
}

fn increasing_check(id: String, xs: &[f64], ys: &[f64], strict: bool) -> ConditionCheck {
    let bad = xs.windows(2).zip(ys.windows(2)).find(|(_, y)| {
        let d = y[1] - y[0];
        if strict {
            d <= 0.0
        } else {
            d < 0.0
        }
    });
    check(
        id,
        bad.and_then(|(x, y)| {
            at(
                x[1],
                format!("f({}) = {} not above f({}) = {}", x[1], y[1], x[0], y[0]),
            )
        }),
    )
}

/// `sign = 1` checks convexity, `sign = -1` concavity.
fn curvature_check(id: String, xs: &[f64], ys: &[f64], sign: f64) -> ConditionCheck {
    let bad = ys
        .windows(3)
        .enumerate()
        .map(|(k, y)| (xs[k + 1], sign * (y[2] - 2.0 * y[1] + y[0])))
        .find(|&(_, d2)| d2 < -CURVATURE_SLACK);
    check(
        id,
        bad.and_then(|(x, d2)| at(x, format!("signed second difference {d2}"))),
    )
}

/// Regularity conditions for the menu construction: (a1) cost and profit
/// increasing convex through the origin, (a2) budgets increasing, concave,
/// through the origin and single-crossing, (a3) the lowest type can afford
/// something and the highest type cannot afford everything.
///
/// Every curve is sampled on `{probe.lo} ∪ probe_grid(probe, grid_n)`.
pub fn check_menu_regularity(
    budgets: &[ScalarFunction],
    cost: &ScalarFunction,
    profit: &ScalarFunction,
    probe: Interval,
    grid_n: usize,
) -> ConditionReport {
    let grid_n = grid_n.max(MIN_GRID_N);
    let mut xs = vec![probe.lo];
    xs.extend(probe_grid(probe, grid_n));
    let mut report = ConditionReport::default();

    for (name, f, strict) in [("cost", cost, true), ("profit", profit, false)] {
        report.push(origin_check(format!("a1.{name}_origin"), f));
        match sample(f, &xs) {
            Ok(ys) => {
                report.push(increasing_check(
                    format!("a1.{name}_increasing"),
                    &xs,
                    &ys,
                    strict,
                ));
                report.push(curvature_check(format!("a1.{name}_convex"), &xs, &ys, 1.0));
            }
            Err(w) => report.push(check(format!("a1.{name}_domain"), Some(w))),
        }
    }

    let mut sampled = Vec::with_capacity(budgets.len());
    for (i, p) in budgets.iter().enumerate() {
        let k = i + 1;
        report.push(origin_check(format!("a2.budget{k}_origin"), p));
        match sample(p, &xs) {
            Ok(ys) => {
                report.push(increasing_check(
                    format!("a2.budget{k}_increasing"),
                    &xs,
                    &ys,
                    true,
                ));
                report.push(curvature_check(
                    format!("a2.budget{k}_concave"),
                    &xs,
                    &ys,
                    -1.0,
                ));
                sampled.push(Some(ys));
            }
            Err(w) => {
                report.push(check(format!("a2.budget{k}_domain"), Some(w)));
                sampled.push(None);
            }
        }
    }
    for (i, pair) in budgets.windows(2).enumerate() {
        let id = format!("a2.single_crossing_{}_{}", i + 1, i + 2);
        let mut failure = None;
        for &s in &xs[1..] {
            let slopes = pair[0]
                .derivative(s)
                .and_then(|lo| Ok((lo, pair[1].derivative(s)?)));
            match slopes {
                Ok((lo, hi)) if hi - lo >= SINGLE_CROSSING_MARGIN => {}
                Ok((lo, hi)) => {
                    failure = at(
                        s,
                        format!("slopes {lo} (type {}) vs {hi} (type {})", i + 1, i + 2),
                    );
                    break;
                }
                Err(e) => {
                    failure = at(s, e.to_string());
                    break;
                }
            }
        }
        report.push(check(id, failure));
    }

    let hurdle = sample(cost, &xs).and_then(|c| {
        let b = sample(profit, &xs)?;
        Ok(c.iter().zip(&b).map(|(c, b)| c + b).collect::<Vec<_>>())
    });
    match (hurdle, sampled.first(), sampled.last()) {
        (Ok(hurdle), Some(Some(first)), Some(Some(last))) => {
            let x1 = (1..xs.len()).find(|&k| first[k] >= hurdle[k]);
            report.push(ConditionCheck {
                id: "a3.lowest_type_affordable".into(),
                passed: x1.is_some(),
                margin: None,
                witness: Some(match x1 {
                    Some(k) => Witness {
                        s: xs[k],
                        theta: None,
                        detail: format!("x_1 = {}", xs[k]),
                    },
                    None => Witness {
                        s: probe.hi,
                        theta: None,
                        detail: "no x_1 found: lowest budget below cost + profit on the whole grid"
                            .into(),
                    },
                }),
            });
            let y_l = (1..xs.len()).find(|&k| last[k] < hurdle[k]);
            report.push(ConditionCheck {
                id: "a3.highest_type_bounded".into(),
                passed: y_l.is_some(),
                margin: None,
                witness: Some(match y_l {
                    Some(k) => Witness {
                        s: xs[k],
                        theta: None,
                        detail: format!("y_L = {}", xs[k]),
                    },
                    None => Witness {
                        s: probe.hi,
                        theta: None,
                        detail:
                            "no y_L found: highest budget covers cost + profit on the whole grid"
                                .into(),
                    },
                }),
            });
        }
        (Err(w), _, _) => report.push(check("a3.domain", Some(w))),
        _ => report.push(check(
            "a3.budgets",
            at(probe.lo, "no evaluable budget functions"),
        )),
    }

    report.finish()
}

/// Marginal budget increase: `min_θ F_s(θ, s) ≥ C'(s)` on an s-grid over the
/// box's quality range. The single check carries the worst margin.
pub fn check_marginal_budget(
    tariff: &TariffFunction,
    cost: &ScalarFunction,
    bounds: &DomainBox,
    grid_n: usize,
) -> ConditionReport {
    let grid_n = grid_n.max(MIN_GRID_N);
    // F_s = D_p·θ is monotone in θ, so its minimum sits at an end of the range
    let thetas = match tariff.family() {
        TariffFamily::Bilinear { slope } if *slope >= 0.0 => vec![bounds.theta_low],
        TariffFamily::Bilinear { .. } => vec![bounds.theta_up],
        _ => linspace(bounds.theta_low, bounds.theta_up, grid_n),
    };
    let qualities = linspace(bounds.s_low, bounds.s_up, grid_n);

    let scan = || -> Result<(f64, f64, f64)> {
        let mut worst = (f64::INFINITY, thetas[0], qualities[0]);
        for &s in &qualities {
            let dc = cost.derivative(s)?;
            for &t in &thetas {
                let margin = tariff.partials(t, s)?.s - dc;
                if margin < worst.0 {
                    worst = (margin, t, s);
                }
            }
        }
        Ok(worst)
    };

    let mut report = ConditionReport::default();
    report.push(match scan() {
        Ok((margin, theta, s)) => ConditionCheck {
            id: "marginal_budget".into(),
            passed: margin >= -MARGINAL_BUDGET_TOL,
            margin: Some(margin),
            witness: Some(Witness {
                s,
                theta: Some(theta),
                detail: format!("min F_s - C' = {margin}"),
            }),
        },
        Err(e) => check("marginal_budget", at(bounds.s_low, e.to_string())),
    });
    report.finish()
}
