//! Independent certification of menus and profiles.
//!
//! Every check recomputes the constraint from raw function evaluations; no
//! solver intermediates are trusted apart from the stored windows that
//! [`crosscheck_windows`] compares against quadrature.

use serde::Serialize;

use crate::error::Result;
use crate::menu::{MenuScenario, QualityPriceMenu};
use crate::numeric::{linspace, simpson};
use crate::profile::{DemandPriceProfile, PriceWindow, ProfileScenario};

/// Slack below zero accepted on every constraint margin.
pub const TOLERANCE: f64 = 1e-9;
pub const DEFAULT_PROBES: usize = 9;
pub const MIN_PROBES: usize = 3;
pub const DEFAULT_QUAD_N: usize = 256;
pub const MIN_QUAD_N: usize = 64;
/// Relative agreement required between quadrature and closed-form windows.
pub const WINDOW_AGREEMENT: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    /// Constraint id, e.g. `ir_budget`, `ic`, `profit_constraint`.
    pub constraint: String,
    /// One-based `(k, l)`; `l == k` for single-index constraints.
    pub indices: (usize, usize),
    pub margin: f64,
    pub witness: Vec<(String, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub passed: bool,
    pub violations: Vec<Violation>,
    /// Smallest margin seen over all checked constraints.
    pub worst_margin: f64,
    pub checked: usize,
}

#[derive(Default)]
struct Ledger {
    violations: Vec<Violation>,
    worst: Option<f64>,
    checked: usize,
}

impl Ledger {
    fn record(
        &mut self,
        constraint: &str,
        k: usize,
        l: usize,
        margin: f64,
        witness: &[(&str, f64)],
    ) {
        self.checked += 1;
        self.worst = Some(match self.worst {
            Some(w) if !(margin < w) => w,
            _ => margin,
        });
        if !(margin >= -TOLERANCE) {
            self.violations.push(Violation {
                constraint: constraint.to_string(),
                indices: (k + 1, l + 1),
                margin,
                witness: witness.iter().map(|(n, v)| (n.to_string(), *v)).collect(),
            });
        }
    }

    /// An evaluation error is a violation with margin −∞.
    fn record_eval<T>(&mut self, constraint: &str, k: usize, l: usize, r: Result<T>) -> Option<T> {
        match r {
            Ok(v) => Some(v),
            Err(_) => {
                self.record(constraint, k, l, f64::NEG_INFINITY, &[]);
                None
            }
        }
    }

    fn finish(self) -> VerificationReport {
        VerificationReport {
            passed: self.violations.is_empty(),
            violations: self.violations,
            worst_margin: self.worst.unwrap_or(0.0),
            checked: self.checked,
        }
    }
}

fn check_increasing(ledger: &mut Ledger, name: &str, values: &[f64]) {
    for (k, w) in values.windows(2).enumerate() {
        ledger.record(
            name,
            k,
            k + 1,
            w[1] - w[0],
            &[("lower", w[0]), ("upper", w[1])],
        );
        // strictness: a zero step is a violation even though it is within slack
        if w[1] <= w[0] && w[1] - w[0] >= -TOLERANCE {
            ledger.violations.push(Violation {
                constraint: name.to_string(),
                indices: (k + 1, k + 2),
                margin: w[1] - w[0],
                witness: vec![("lower".into(), w[0]), ("upper".into(), w[1])],
            });
        }
    }
}

/// Modified IR `P_k(s_k) ≥ p_k ≥ C(s_k) + B(s_k)` for every k, IC
/// `P_k(s_k) - p_k ≥ P_k(s_l) - p_l` for every ordered pair, plus strict
/// ordering and positivity of qualities and prices.
pub fn verify_menu(menu: &QualityPriceMenu, scenario: &MenuScenario) -> VerificationReport {
    let mut ledger = Ledger::default();
    let n = scenario.types();
    if menu.entries.len() != n {
        ledger.record(
            "shape",
            0,
            0,
            f64::NEG_INFINITY,
            &[("entries", menu.entries.len() as f64)],
        );
        return ledger.finish();
    }
    let s = menu.qualities();
    let p = menu.prices();
    ledger.record(
        "positive",
        0,
        0,
        s[0].min(p[0]),
        &[("s", s[0]), ("p", p[0])],
    );
    check_increasing(&mut ledger, "quality_order", &s);
    check_increasing(&mut ledger, "price_order", &p);

    for k in 0..n {
        let budget = scenario.budget(k);
        let Some(own) = ledger.record_eval("ir_budget", k, k, budget.eval(s[k])) else {
            continue;
        };
        ledger.record(
            "ir_budget",
            k,
            k,
            own - p[k],
            &[("budget", own), ("price", p[k])],
        );
        if let Some(floor) = ledger.record_eval("ir_profit", k, k, scenario.hurdle(s[k])) {
            ledger.record(
                "ir_profit",
                k,
                k,
                p[k] - floor,
                &[("price", p[k]), ("floor", floor)],
            );
        }
        for l in (0..n).filter(|&l| l != k) {
            if let Some(other) = ledger.record_eval("ic", k, l, budget.eval(s[l])) {
                let margin = (own - p[k]) - (other - p[l]);
                ledger.record(
                    "ic",
                    k,
                    l,
                    margin,
                    &[("own_saving", own - p[k]), ("alt_saving", other - p[l])],
                );
            }
        }
    }
    ledger.finish()
}

/// Demand probes across band `k`: both ends, the nominal demand, and
/// `probes` evenly spaced points.
pub fn band_probes(theta: f64, half_width: f64, probes: usize) -> Vec<f64> {
    let mut out = linspace(
        theta - half_width,
        theta + half_width,
        probes.max(MIN_PROBES),
    );
    out.push(theta);
    out.sort_by(f64::total_cmp);
    out.dedup();
    out
}

/// IR (i) and IC (ii) at probes across every band, the profit constraint
/// between neighbouring qualities, and the ordering/range invariants.
pub fn verify_profile(
    profile: &DemandPriceProfile,
    scenario: &ProfileScenario,
    probes_per_band: usize,
) -> VerificationReport {
    let mut ledger = Ledger::default();
    let n = scenario.len();
    if profile.entries.len() != n {
        ledger.record(
            "shape",
            0,
            0,
            f64::NEG_INFINITY,
            &[("entries", profile.entries.len() as f64)],
        );
        return ledger.finish();
    }
    let f = scenario.tariff();
    let s = scenario.qualities();
    let m = scenario.margins().m();
    let gap = scenario.margins().gap();
    let theta = profile.thetas();
    let p = profile.prices();
    let bounds = scenario.bounds();

    ledger.record(
        "range_low",
        0,
        0,
        theta[0] - bounds.theta_low,
        &[("theta", theta[0])],
    );
    ledger.record(
        "range_high",
        n - 1,
        n - 1,
        bounds.theta_up - (theta[n - 1] + m[n - 1]),
        &[("theta", theta[n - 1]), ("m", m[n - 1])],
    );
    ledger.record("positive", 0, 0, p[0], &[("p", p[0])]);
    check_increasing(&mut ledger, "theta_order", &theta);
    check_increasing(&mut ledger, "price_order", &p);

    for k in 0..n {
        if let Some(floor) = ledger.record_eval("ir_profit", k, k, scenario.price_floor(k)) {
            ledger.record(
                "ir_profit",
                k,
                k,
                p[k] - floor,
                &[("price", p[k]), ("floor", floor)],
            );
        }
        for t in band_probes(theta[k], m[k], probes_per_band) {
            let Some(own) = ledger.record_eval("ir_budget", k, k, f.eval(t, s[k])) else {
                continue;
            };
            ledger.record(
                "ir_budget",
                k,
                k,
                own - p[k],
                &[("theta", t), ("budget", own)],
            );
            for l in (0..n).filter(|&l| l != k) {
                if let Some(other) = ledger.record_eval("ic", k, l, f.eval(t, s[l])) {
                    ledger.record(
                        "ic",
                        k,
                        l,
                        (own - p[k]) - (other - p[l]),
                        &[
                            ("theta", t),
                            ("own_saving", own - p[k]),
                            ("alt_saving", other - p[l]),
                        ],
                    );
                }
            }
        }
        if k + 1 < n {
            let sides = f
                .eval(theta[k] - m[k], s[k])
                .and_then(|lo| Ok((lo, f.eval(theta[k] + m[k], s[k + 1])?)));
            if let Some((low_edge, next)) = ledger.record_eval("profit_constraint", k, k + 1, sides)
            {
                let omega = low_edge - p[k];
                ledger.record(
                    "profit_constraint",
                    k,
                    k + 1,
                    omega - (gap[k] + next - p[k + 1]),
                    &[
                        ("omega", omega),
                        ("gap", gap[k]),
                        ("next_saving", next - p[k + 1]),
                    ],
                );
            }
        }
    }
    ledger.finish()
}

/// Windows `[A_j, B_j]` for `j ≥ 2` (index 0 is left as `None`) computed by
/// composite Simpson quadrature of `F_s` along quality and `F_θ` along
/// demand, anchored on the profile's stored demands and prices.
pub fn quadrature_windows(
    scenario: &ProfileScenario,
    profile: &DemandPriceProfile,
    quad_n: usize,
) -> Result<Vec<Option<PriceWindow>>> {
    let n = scenario.len().min(profile.entries.len());
    let f = scenario.tariff();
    let s = scenario.qualities();
    let m = scenario.margins().m();
    let gap = scenario.margins().gap();

    let along_s =
        |theta: f64, a: f64, b: f64| simpson(|q| Ok(f.partials(theta, q)?.s), a, b, quad_n);
    let along_theta =
        |q: f64, a: f64, b: f64| simpson(|t| Ok(f.partials(t, q)?.theta), a, b, quad_n);

    let mut out = vec![None];
    for j in 1..n {
        let prev = profile.entries[j - 1];
        let cur = profile.entries[j];
        let lower = prev.price
            + along_s(prev.theta + m[j - 1], s[j - 1], s[j])?
            + along_theta(s[j - 1], prev.theta - m[j - 1], prev.theta + m[j - 1])?
            + gap[j - 1];
        let upper = prev.price + along_s(cur.theta - m[j], s[j - 1], s[j])?
            - along_theta(s[j - 1], cur.theta - m[j], cur.theta + m[j])?;
        out.push(Some(PriceWindow { lower, upper }));
    }
    Ok(out)
}

/// Compares every stored window against [`quadrature_windows`] and flags
/// relative disagreement above [`WINDOW_AGREEMENT`]. Margins are
/// `allowed - |quadrature - closed form|`.
pub fn crosscheck_windows(
    scenario: &ProfileScenario,
    profile: &DemandPriceProfile,
    quad_n: usize,
) -> VerificationReport {
    let mut ledger = Ledger::default();
    let n = scenario.len();
    if profile.entries.len() != n || profile.windows.len() != n {
        ledger.record("shape", 0, 0, f64::NEG_INFINITY, &[]);
        return ledger.finish();
    }
    let Some(quad) = ledger.record_eval(
        "window",
        0,
        0,
        quadrature_windows(scenario, profile, quad_n.max(MIN_QUAD_N)),
    ) else {
        return ledger.finish();
    };
    for (j, q) in quad.iter().enumerate().skip(1) {
        let q = q.expect("windows from index 1 on");
        let stored = profile.windows[j];
        for (name, q, c) in [
            ("window_lower", q.lower, stored.lower),
            ("window_upper", q.upper, stored.upper),
        ] {
            let allowed = WINDOW_AGREEMENT * c.abs().max(1.0);
            ledger.record(
                name,
                j,
                j,
                allowed - (q - c).abs(),
                &[("quadrature", q), ("closed_form", c)],
            );
        }
    }
    ledger.finish()
}
