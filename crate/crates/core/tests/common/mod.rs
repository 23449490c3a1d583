#![allow(dead_code)]

use target_pricing::function::Grid2;
use target_pricing::menu::MenuScenario;
use target_pricing::{
    DomainBox, Interval, MarginSpec, ProfileScenario, ScalarFunction, TariffFunction,
};

/// `P_i = i·D_b·ln(1+s)`, `C = D_c·s`, `B = C/10`.
pub fn log_menu(db: f64, dc: f64, types: usize) -> MenuScenario {
    let budgets = (1..=types)
        .map(|i| ScalarFunction::log(db * i as f64).unwrap())
        .collect();
    let cost = ScalarFunction::linear(dc).unwrap();
    let profit = ScalarFunction::scaled(ScalarFunction::linear(dc).unwrap(), 0.1).unwrap();
    MenuScenario::new(budgets, cost, profit, 1e6).unwrap()
}

/// Closed-form maximizer of `i·D_b·ln(1+s) − 1.1·D_c·s`.
pub fn log_menu_quality(db: f64, dc: f64, i: usize) -> f64 {
    10.0 * db / (11.0 * dc) * i as f64 - 1.0
}

/// `D_p = 4`, `C = s`, `θ ∈ [1/3, 1]`, `s = (1, 2, 3)`, `b_j = 0.1 j`,
/// `m_j = 0.01 j`.
pub fn worked_profile() -> ProfileScenario {
    let bounds = DomainBox::new(1.0 / 3.0, 1.0, 1.0, 3.0).unwrap();
    let f = TariffFunction::bilinear(4.0, bounds).unwrap();
    let c = ScalarFunction::linear(1.0).unwrap();
    let margins = MarginSpec::new(vec![0.1, 0.2, 0.3], vec![0.01, 0.02, 0.03], None).unwrap();
    ProfileScenario::new(vec![1.0, 2.0, 3.0], f, c, bounds, margins).unwrap()
}

/// Homogeneous bilinear ladder `s_j = j·δ` with `b_j = b·s_j`, `m_j = m·s_j`.
#[derive(Debug, Clone)]
pub struct Homogeneous {
    pub slope: f64,
    pub cost_slope: f64,
    pub theta_low: f64,
    pub theta_range: f64,
    pub step: f64,
    pub types: usize,
    pub b: f64,
    pub m: f64,
}

impl Homogeneous {
    pub fn qualities(&self) -> Vec<f64> {
        (1..=self.types).map(|j| self.step * j as f64).collect()
    }

    pub fn bounds(&self) -> DomainBox {
        DomainBox::new(
            self.theta_low,
            self.theta_low + self.theta_range,
            0.5 * self.step,
            self.step * self.types as f64,
        )
        .unwrap()
    }

    pub fn scenario(&self) -> ProfileScenario {
        let bounds = self.bounds();
        let q = self.qualities();
        let margins = MarginSpec::proportional(self.b, self.m, &q).unwrap();
        ProfileScenario::new(
            q,
            TariffFunction::bilinear(self.slope, bounds).unwrap(),
            ScalarFunction::linear(self.cost_slope).unwrap(),
            bounds,
            margins,
        )
        .unwrap()
    }

    /// Same tariff sampled on a rectangular grid.
    pub fn tabulated(&self, n: usize) -> ProfileScenario {
        let bounds = self.bounds();
        let slope = self.slope;
        let grid = Grid2::from_fn(
            move |t, s| slope * t * s,
            bounds.theta(),
            bounds.quality(),
            n,
            n,
        )
        .unwrap();
        let q = self.qualities();
        let margins = MarginSpec::proportional(self.b, self.m, &q).unwrap();
        ProfileScenario::new(
            q,
            TariffFunction::tabulated(grid).unwrap(),
            ScalarFunction::linear(self.cost_slope).unwrap(),
            bounds,
            margins,
        )
        .unwrap()
    }
}

/// `F = a·θ^e_θ · s^e_s` on `θ ∈ [θ_low, θ_low + range]`, `s ∈ [1, L]`,
/// qualities `1..=L`, cost slope half the smallest marginal budget.
#[allow(clippy::too_many_arguments)]
pub fn separable_profile(
    a: f64,
    e_theta: f64,
    e_s: f64,
    theta_low: f64,
    range: f64,
    types: usize,
    b: f64,
    m: f64,
) -> ProfileScenario {
    let bounds = DomainBox::new(theta_low, theta_low + range, 1.0, types as f64).unwrap();
    let g = ScalarFunction::power(a, e_theta).unwrap();
    let h = ScalarFunction::power(1.0, e_s).unwrap();
    let tariff = TariffFunction::separable(g, h, bounds).unwrap();
    let min_fs = a * theta_low.powf(e_theta) * e_s * 1f64.min((types as f64).powf(e_s - 1.0));
    let cost = ScalarFunction::linear(0.5 * min_fs).unwrap();
    let q: Vec<f64> = (1..=types).map(|j| j as f64).collect();
    let margins = MarginSpec::proportional(b, m, &q).unwrap();
    ProfileScenario::new(q, tariff, cost, bounds, margins).unwrap()
}

/// Adaptive Simpson quadrature to absolute tolerance `tol`.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = simpson(fa, flm, fm, a, m);
        let right = simpson(fm, frm, fb, m, b);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            return left + right + (left + right - whole) / 15.0;
        }
        recurse(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
            + recurse(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
    if a == b {
        return 0.0;
    }
    let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
    recurse(f, a, b, fa, fm, fb, simpson(fa, fm, fb, a, b), tol, 40)
}

/// Central-difference derivative with a fixed relative step.
pub fn central_difference(f: &dyn Fn(f64) -> f64, x: f64) -> f64 {
    let h = 1e-6 * x.abs().max(1.0);
    (f(x + h) - f(x - h)) / (2.0 * h)
}

pub fn unit_interval() -> Interval {
    Interval::new(0.0, 1.0).unwrap()
}
