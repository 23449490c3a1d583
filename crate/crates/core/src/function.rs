//! Scalar budget/cost/profit functions and bivariate tariffs.
//!
//! Parametric families carry analytic derivatives. Tabulated inputs are
//! interpolated piecewise-linearly and differentiated by finite differences.

use serde::Serialize;

use crate::error::{Error, Result};

/// Relative slack allowed when a coordinate lands a rounding error outside
/// its domain; such coordinates are clamped onto the boundary.
const DOMAIN_SLACK: f64 = 1e-12;

/// Finite-difference step used for tabulated inputs.
pub fn fd_step(x: f64) -> f64 {
    1e-5 * x.abs().max(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if lo.is_nan() || hi.is_nan() || lo > hi {
            return Err(Error::InvalidFunction(format!("bad interval [{lo}, {hi}]")));
        }
        Ok(Self { lo, hi })
    }

    pub fn nonnegative() -> Self {
        Self {
            lo: 0.0,
            hi: f64::INFINITY,
        }
    }

    pub fn len(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }

    fn admit(&self, coordinate: &'static str, x: f64) -> Result<f64> {
        if self.contains(x) {
            return Ok(x);
        }
        let lo_ok = x >= self.lo - DOMAIN_SLACK * self.lo.abs().max(1.0);
        let hi_ok = x <= self.hi + DOMAIN_SLACK * self.hi.abs().max(1.0);
        if x.is_finite() && lo_ok && hi_ok {
            Ok(x.clamp(self.lo, self.hi))
        } else {
            Err(Error::OutOfDomain {
                coordinate,
                value: x,
                lo: self.lo,
                hi: self.hi,
            })
        }
    }
}

/// Sampled one-dimensional function with piecewise-linear interpolation.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    xs: Vec<f64>,
    ys: Vec<f64>,
}

impl Table {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        if xs.len() != ys.len() {
            return Err(Error::InvalidFunction(format!(
                "table has {} coordinates but {} values",
                xs.len(),
                ys.len()
            )));
        }
        if xs.len() < 2 {
            return Err(Error::InvalidFunction(
                "table needs at least two rows".into(),
            ));
        }
        if xs.iter().chain(&ys).any(|v| !v.is_finite()) {
            return Err(Error::InvalidFunction(
                "table contains non-finite entries".into(),
            ));
        }
        if let Some(w) = xs.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::InvalidFunction(format!(
                "table coordinates must be strictly increasing (row {})",
                w + 2
            )));
        }
        Ok(Self { xs, ys })
    }

    /// Samples `f` at `n` evenly spaced points on `[lo, hi]`.
    pub fn from_fn(f: impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> Result<Self> {
        let xs = crate::numeric::linspace(lo, hi, n);
        let ys = xs.iter().map(|&x| f(x)).collect();
        Self::new(xs, ys)
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    pub fn ys(&self) -> &[f64] {
        &self.ys
    }

    pub fn domain(&self) -> Interval {
        Interval {
            lo: self.xs[0],
            hi: self.xs[self.xs.len() - 1],
        }
    }

    fn interpolate(&self, x: f64) -> f64 {
        let (i, t) = locate(&self.xs, x);
        self.ys[i] + t * (self.ys[i + 1] - self.ys[i])
    }
}

/// Segment index and fractional position of `x` inside a sorted knot vector.
fn locate(knots: &[f64], x: f64) -> (usize, f64) {
    let last = knots.len() - 2;
    let i = knots
        .partition_point(|&k| k <= x)
        .saturating_sub(1)
        .min(last);
    let t = (x - knots[i]) / (knots[i + 1] - knots[i]);
    (i, t)
}

#[derive(Debug, Clone, PartialEq)]
pub enum ScalarFamily {
    Linear {
        slope: f64,
    },
    /// `scale * ln(1 + s)`
    Log {
        scale: f64,
    },
    /// `scale * s^exponent`
    Power {
        scale: f64,
        exponent: f64,
    },
    Scaled {
        base: Box<ScalarFunction>,
        factor: f64,
    },
    Tabulated(Table),
}

/// Derivative value plus whether it came from a one-sided difference at a
/// table boundary (reduced accuracy).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivativeEstimate {
    pub value: f64,
    pub one_sided: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarFunction {
    family: ScalarFamily,
    domain: Interval,
}

impl ScalarFunction {
    pub fn linear(slope: f64) -> Result<Self> {
        finite("slope", slope)?;
        Ok(Self::parametric(ScalarFamily::Linear { slope }))
    }

    pub fn log(scale: f64) -> Result<Self> {
        finite("scale", scale)?;
        Ok(Self::parametric(ScalarFamily::Log { scale }))
    }

    pub fn power(scale: f64, exponent: f64) -> Result<Self> {
        finite("scale", scale)?;
        finite("exponent", exponent)?;
        if exponent <= 0.0 {
            return Err(Error::InvalidFunction(format!(
                "power exponent must be positive, got {exponent}"
            )));
        }
        Ok(Self::parametric(ScalarFamily::Power { scale, exponent }))
    }

    pub fn scaled(base: ScalarFunction, factor: f64) -> Result<Self> {
        finite("factor", factor)?;
        let domain = base.domain;
        Ok(Self {
            family: ScalarFamily::Scaled {
                base: Box::new(base),
                factor,
            },
            domain,
        })
    }

    pub fn tabulated(table: Table) -> Self {
        let domain = table.domain();
        Self {
            family: ScalarFamily::Tabulated(table),
            domain,
        }
    }

    fn parametric(family: ScalarFamily) -> Self {
        Self {
            family,
            domain: Interval::nonnegative(),
        }
    }

    pub fn family(&self) -> &ScalarFamily {
        &self.family
    }

    pub fn domain(&self) -> Interval {
        self.domain
    }

    /// True when derivatives are exact rather than finite differences.
    pub fn is_analytic(&self) -> bool {
        match &self.family {
            ScalarFamily::Tabulated(_) => false,
            ScalarFamily::Scaled { base, .. } => base.is_analytic(),
            _ => true,
        }
    }

    pub fn eval(&self, s: f64) -> Result<f64> {
        let s = self.domain.admit("s", s)?;
        Ok(self.eval_unchecked(s))
    }

    fn eval_unchecked(&self, s: f64) -> f64 {
        match &self.family {
            ScalarFamily::Linear { slope } => slope * s,
            ScalarFamily::Log { scale } => scale * s.ln_1p(),
            ScalarFamily::Power { scale, exponent } => scale * s.powf(*exponent),
            ScalarFamily::Scaled { base, factor } => factor * base.eval_unchecked(s),
            ScalarFamily::Tabulated(t) => t.interpolate(s),
        }
    }

    pub fn derivative(&self, s: f64) -> Result<f64> {
        self.derivative_estimate(s).map(|d| d.value)
    }

    pub fn derivative_estimate(&self, s: f64) -> Result<DerivativeEstimate> {
        let s = self.domain.admit("s", s)?;
        Ok(self.derivative_unchecked(s))
    }

    fn derivative_unchecked(&self, s: f64) -> DerivativeEstimate {
        let exact = |value| DerivativeEstimate {
            value,
            one_sided: false,
        };
        match &self.family {
            ScalarFamily::Linear { slope } => exact(*slope),
            ScalarFamily::Log { scale } => exact(scale / (1.0 + s)),
            ScalarFamily::Power { scale, exponent } => {
                exact(scale * exponent * s.powf(exponent - 1.0))
            }
            ScalarFamily::Scaled { base, factor } => {
                let d = base.derivative_unchecked(s);
                DerivativeEstimate {
                    value: factor * d.value,
                    one_sided: d.one_sided,
                }
            }
            ScalarFamily::Tabulated(t) => {
                let (a, b, one_sided) = stencil(self.domain, s);
                DerivativeEstimate {
                    value: (t.interpolate(b) - t.interpolate(a)) / (b - a),
                    one_sided,
                }
            }
        }
    }
}

/// Difference stencil around `x`, clipped to `domain`.
fn stencil(domain: Interval, x: f64) -> (f64, f64, bool) {
    let h = fd_step(x);
    let a = (x - h).max(domain.lo);
    let b = (x + h).min(domain.hi);
    (a, b, a != x - h || b != x + h)
}

fn finite(name: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidFunction(format!(
            "{name} must be finite, got {v}"
        )))
    }
}

/// Demand range `[theta_low, theta_up]` times quality range `[s_low, s_up]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DomainBox {
    pub theta_low: f64,
    pub theta_up: f64,
    pub s_low: f64,
    pub s_up: f64,
}

impl DomainBox {
    pub fn new(theta_low: f64, theta_up: f64, s_low: f64, s_up: f64) -> Result<Self> {
        let all = [theta_low, theta_up, s_low, s_up];
        if all.iter().any(|v| !v.is_finite() || *v <= 0.0) {
            return Err(Error::InvalidScenario(format!(
                "domain bounds must be finite and positive, got θ∈[{theta_low}, {theta_up}], s∈[{s_low}, {s_up}]"
            )));
        }
        if theta_low >= theta_up || s_low >= s_up {
            return Err(Error::InvalidScenario(format!(
                "domain intervals must be nonempty, got θ∈[{theta_low}, {theta_up}], s∈[{s_low}, {s_up}]"
            )));
        }
        Ok(Self {
            theta_low,
            theta_up,
            s_low,
            s_up,
        })
    }

    pub fn theta(&self) -> Interval {
        Interval {
            lo: self.theta_low,
            hi: self.theta_up,
        }
    }

    pub fn quality(&self) -> Interval {
        Interval {
            lo: self.s_low,
            hi: self.s_up,
        }
    }

    pub fn theta_range(&self) -> f64 {
        self.theta_up - self.theta_low
    }

    pub fn contains_box(&self, other: &DomainBox) -> bool {
        self.theta().contains(other.theta_low)
            && self.theta().contains(other.theta_up)
            && self.quality().contains(other.s_low)
            && self.quality().contains(other.s_up)
    }
}

/// Rectangular grid of tariff values, row-major by demand.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid2 {
    thetas: Vec<f64>,
    qualities: Vec<f64>,
    values: Vec<f64>,
}

impl Grid2 {
    pub fn new(thetas: Vec<f64>, qualities: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        for (name, axis) in [("theta", &thetas), ("s", &qualities)] {
            if axis.len() < 2 {
                return Err(Error::InvalidFunction(format!(
                    "tariff grid needs at least two {name} knots"
                )));
            }
            if axis.windows(2).any(|w| !(w[1] > w[0])) {
                return Err(Error::InvalidFunction(format!(
                    "tariff grid {name} knots must be strictly increasing"
                )));
            }
        }
        if values.len() != thetas.len() * qualities.len() {
            return Err(Error::InvalidFunction(format!(
                "tariff grid has {} values, expected {}",
                values.len(),
                thetas.len() * qualities.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidFunction(
                "tariff grid contains non-finite values".into(),
            ));
        }
        Ok(Self {
            thetas,
            qualities,
            values,
        })
    }

    pub fn from_fn(
        f: impl Fn(f64, f64) -> f64,
        theta: Interval,
        quality: Interval,
        n_theta: usize,
        n_quality: usize,
    ) -> Result<Self> {
        let thetas = crate::numeric::linspace(theta.lo, theta.hi, n_theta);
        let qualities = crate::numeric::linspace(quality.lo, quality.hi, n_quality);
        let values = thetas
            .iter()
            .flat_map(|&t| qualities.iter().map(move |&s| (t, s)))
            .map(|(t, s)| f(t, s))
            .collect();
        Self::new(thetas, qualities, values)
    }

    fn domain(&self) -> Result<DomainBox> {
        DomainBox::new(
            self.thetas[0],
            self.thetas[self.thetas.len() - 1],
            self.qualities[0],
            self.qualities[self.qualities.len() - 1],
        )
    }

    fn at(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.qualities.len() + j]
    }

    fn interpolate(&self, theta: f64, s: f64) -> f64 {
        let (i, u) = locate(&self.thetas, theta);
        let (j, v) = locate(&self.qualities, s);
        let f00 = self.at(i, j);
        let f01 = self.at(i, j + 1);
        let f10 = self.at(i + 1, j);
        let f11 = self.at(i + 1, j + 1);
        (1.0 - u) * ((1.0 - v) * f00 + v * f01) + u * ((1.0 - v) * f10 + v * f11)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TariffFamily {
    /// `slope * θ * s`
    Bilinear {
        slope: f64,
    },
    /// `g(θ) * h(s)`
    Separable {
        theta_factor: ScalarFunction,
        quality_factor: ScalarFunction,
    },
    Tabulated(Grid2),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TariffPartials {
    pub theta: f64,
    pub s: f64,
    pub mixed: f64,
}

/// Willingness to pay `F(θ, s)` of a user with demand θ for quality s.
#[derive(Debug, Clone, PartialEq)]
pub struct TariffFunction {
    family: TariffFamily,
    domain: DomainBox,
}

impl TariffFunction {
    pub fn bilinear(slope: f64, domain: DomainBox) -> Result<Self> {
        finite("slope", slope)?;
        Ok(Self {
            family: TariffFamily::Bilinear { slope },
            domain,
        })
    }

    pub fn separable(
        theta_factor: ScalarFunction,
        quality_factor: ScalarFunction,
        domain: DomainBox,
    ) -> Result<Self> {
        for (name, f, iv) in [
            ("theta factor", &theta_factor, domain.theta()),
            ("quality factor", &quality_factor, domain.quality()),
        ] {
            let d = f.domain();
            if !(d.contains(iv.lo) && d.contains(iv.hi)) {
                return Err(Error::InvalidFunction(format!(
                    "{name} domain [{}, {}] does not cover [{}, {}]",
                    d.lo, d.hi, iv.lo, iv.hi
                )));
            }
        }
        Ok(Self {
            family: TariffFamily::Separable {
                theta_factor,
                quality_factor,
            },
            domain,
        })
    }

    pub fn tabulated(grid: Grid2) -> Result<Self> {
        let domain = grid.domain()?;
        Ok(Self {
            family: TariffFamily::Tabulated(grid),
            domain,
        })
    }

    pub fn family(&self) -> &TariffFamily {
        &self.family
    }

    pub fn domain(&self) -> DomainBox {
        self.domain
    }

    fn admit(&self, theta: f64, s: f64) -> Result<(f64, f64)> {
        Ok((
            self.domain.theta().admit("theta", theta)?,
            self.domain.quality().admit("s", s)?,
        ))
    }

    pub fn eval(&self, theta: f64, s: f64) -> Result<f64> {
        let (theta, s) = self.admit(theta, s)?;
        Ok(match &self.family {
            TariffFamily::Bilinear { slope } => slope * theta * s,
            TariffFamily::Separable {
                theta_factor,
                quality_factor,
            } => theta_factor.eval_unchecked(theta) * quality_factor.eval_unchecked(s),
            TariffFamily::Tabulated(g) => g.interpolate(theta, s),
        })
    }

    /// `(F_θ, F_s, F_θs)` at `(theta, s)`.
    pub fn partials(&self, theta: f64, s: f64) -> Result<TariffPartials> {
        let (theta, s) = self.admit(theta, s)?;
        Ok(match &self.family {
            TariffFamily::Bilinear { slope } => TariffPartials {
                theta: slope * s,
                s: slope * theta,
                mixed: *slope,
            },
            TariffFamily::Separable {
                theta_factor: g,
                quality_factor: h,
            } => {
                let (gv, dg) = (g.eval_unchecked(theta), g.derivative_unchecked(theta).value);
                let (hv, dh) = (h.eval_unchecked(s), h.derivative_unchecked(s).value);
                TariffPartials {
                    theta: dg * hv,
                    s: gv * dh,
                    mixed: dg * dh,
                }
            }
            TariffFamily::Tabulated(g) => {
                let (t0, t1, _) = stencil(self.domain.theta(), theta);
                let (s0, s1, _) = stencil(self.domain.quality(), s);
                let f = |t, q| g.interpolate(t, q);
                TariffPartials {
                    theta: (f(t1, s) - f(t0, s)) / (t1 - t0),
                    s: (f(theta, s1) - f(theta, s0)) / (s1 - s0),
                    mixed: (f(t1, s1) - f(t1, s0) - f(t0, s1) + f(t0, s0))
                        / ((t1 - t0) * (s1 - s0)),
                }
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn log_family_values() {
        let p = ScalarFunction::log(2.2).unwrap();
        assert!(close(p.eval(1.0).unwrap(), 1.524_924, 1e-6));
        assert!(close(p.derivative(1.0).unwrap(), 1.1, 1e-15));
    }

    #[test]
    fn trivial_evaluations() {
        assert_eq!(ScalarFunction::linear(1.0).unwrap().eval(0.0).unwrap(), 0.0);
        assert_eq!(
            ScalarFunction::power(1.0, 2.0).unwrap().eval(3.0).unwrap(),
            9.0
        );
        assert_eq!(
            ScalarFunction::linear(1.1)
                .unwrap()
                .derivative(7.0)
                .unwrap(),
            1.1
        );
    }

    #[test]
    fn negative_coordinate_is_out_of_domain() {
        let err = ScalarFunction::log(1.0).unwrap().eval(-0.5).unwrap_err();
        assert!(matches!(
            err,
            Error::OutOfDomain {
                coordinate: "s",
                ..
            }
        ));
    }

    #[test]
    fn tabulated_square_derivative_at_knot() {
        let t = Table::from_fn(|s| s * s, 0.0, 10.0, 1001).unwrap();
        let f = ScalarFunction::tabulated(t);
        let d = f.derivative_estimate(3.0).unwrap();
        assert!(close(d.value, 6.0, 1e-3), "{}", d.value);
        assert!(!d.one_sided);
    }

    #[test]
    fn tabulated_boundary_derivative_is_flagged() {
        let t = Table::from_fn(|s| s * s, 0.0, 10.0, 1001).unwrap();
        let f = ScalarFunction::tabulated(t);
        assert!(f.derivative_estimate(10.0).unwrap().one_sided);
        assert!(f.derivative_estimate(0.0).unwrap().one_sided);
    }

    #[test]
    fn table_rejects_unsorted_coordinates() {
        assert!(Table::new(vec![0.0, 2.0, 1.0], vec![0.0, 1.0, 2.0]).is_err());
    }

    #[test]
    fn scaled_copy_tracks_base() {
        let c = ScalarFunction::linear(1.0).unwrap();
        let b = ScalarFunction::scaled(c, 0.1).unwrap();
        assert!(close(b.eval(5.0).unwrap(), 0.5, 1e-15));
        assert!(close(b.derivative(5.0).unwrap(), 0.1, 1e-15));
    }

    #[test]
    fn bilinear_partials() {
        let dom = DomainBox::new(0.1, 1.0, 0.5, 4.0).unwrap();
        let f = TariffFunction::bilinear(3.0, dom).unwrap();
        let p = f.partials(0.5, 2.0).unwrap();
        assert_eq!((p.theta, p.s, p.mixed), (6.0, 1.5, 3.0));
        let f = TariffFunction::bilinear(4.0, dom).unwrap();
        let p = f.partials(1.0 / 3.0, 1.0).unwrap();
        assert!(close(p.theta, 4.0, 1e-15));
        assert!(close(p.s, 4.0 / 3.0, 1e-15));
        assert!(close(p.mixed, 4.0, 1e-15));
    }

    #[test]
    fn separable_partials() {
        let dom = DomainBox::new(0.5, 2.0, 0.5, 2.0).unwrap();
        let g = ScalarFunction::power(1.0, 2.0).unwrap();
        let h = ScalarFunction::linear(1.0).unwrap();
        let f = TariffFunction::separable(g, h, dom).unwrap();
        let p = f.partials(1.0, 1.0).unwrap();
        assert_eq!((p.theta, p.s, p.mixed), (2.0, 1.0, 2.0));
    }

    #[test]
    fn tariff_outside_box_errors() {
        let dom = DomainBox::new(0.5, 2.0, 0.5, 2.0).unwrap();
        let f = TariffFunction::bilinear(1.0, dom).unwrap();
        let err = f.eval(3.0, 1.0).unwrap_err();
        assert!(matches!(
            err,
            Error::OutOfDomain {
                coordinate: "theta",
                ..
            }
        ));
    }

    #[test]
    fn tabulated_tariff_reproduces_bilinear() {
        let dom = DomainBox::new(1.0 / 3.0, 1.0, 1.0, 3.0).unwrap();
        let grid =
            Grid2::from_fn(|t, s| 4.0 * t * s, dom.theta(), dom.quality(), 201, 201).unwrap();
        let f = TariffFunction::tabulated(grid).unwrap();
        let p = f.partials(0.5, 2.0).unwrap();
        assert!(close(p.theta, 8.0, 1e-6));
        assert!(close(p.s, 2.0, 1e-6));
        assert!(close(p.mixed, 4.0, 1e-6));
        assert!(close(f.eval(0.6, 2.5).unwrap(), 6.0, 1e-12));
    }

    #[test]
    fn domain_box_rejects_empty_ranges() {
        assert!(DomainBox::new(1.0, 1.0, 0.5, 2.0).is_err());
        assert!(DomainBox::new(0.0, 1.0, 0.5, 2.0).is_err());
    }
}
