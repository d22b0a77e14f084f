//! Time-dependent scalar coefficients and reaction kinetics.
//!
//! Every coefficient that varies in time (diffusion floors, the linear
//! growth rate, the nonlinearity amplitude `c0(t)`, the modulation `phi(t)`,
//! certificate functions `mu(t)`) is a [`TimeProfile`]. The kinetics are
//!
//! ```text
//! F(u, x, t) = phi(t) * (A(x, t) u + B(u, t)),
//! B_i(u, t)  = -c0(t) * u_i * |u|^(p-1) / (1 + |u|^(p-1))
//! ```
//!
//! so `F(0, x, t) = 0` and `|B| <= c0 |u|^p`.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{ensure_finite, Error, Result};
use crate::stability::{numerical_abscissa, Mat2};

/// Number of samples used when a supremum or infimum over a time horizon is
/// taken by scanning.
const HORIZON_SAMPLES: usize = 2049;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TimeProfile {
    Constant {
        v0: f64,
    },
    /// `offset + v0 / (1 + t)^exponent`
    PowerDecay {
        v0: f64,
        exponent: f64,
        offset: f64,
    },
    /// `offset + v0 * (1 + t)^exponent`
    PowerGrowth {
        v0: f64,
        exponent: f64,
        offset: f64,
    },
    /// `offset + v0 * exp(rate * t)`
    Exponential {
        v0: f64,
        rate: f64,
        offset: f64,
    },
    /// Piecewise-linear interpolation of sorted `(t, value)` pairs starting at `t = 0`.
    Tabulated {
        points: Vec<(f64, f64)>,
    },
    Sum {
        terms: Vec<TimeProfile>,
    },
    Product {
        factors: Vec<TimeProfile>,
    },
}

impl TimeProfile {
    pub fn constant(v0: f64) -> Self {
        TimeProfile::Constant { v0 }
    }

    pub fn power_decay(v0: f64, exponent: f64) -> Self {
        TimeProfile::PowerDecay {
            v0,
            exponent,
            offset: 0.0,
        }
    }

    pub fn power_growth(v0: f64, exponent: f64) -> Self {
        TimeProfile::PowerGrowth {
            v0,
            exponent,
            offset: 0.0,
        }
    }

    pub fn exponential(v0: f64, rate: f64) -> Self {
        TimeProfile::Exponential {
            v0,
            rate,
            offset: 0.0,
        }
    }

    pub fn tabulated(points: Vec<(f64, f64)>) -> Result<Self> {
        let p = TimeProfile::Tabulated { points };
        p.validate()?;
        Ok(p)
    }

    pub fn sum(terms: Vec<TimeProfile>) -> Self {
        TimeProfile::Sum { terms }
    }

    pub fn product(factors: Vec<TimeProfile>) -> Self {
        TimeProfile::Product { factors }
    }

    pub fn scaled(self, s: f64) -> Self {
        match self {
            TimeProfile::Constant { v0 } => TimeProfile::Constant { v0: s * v0 },
            TimeProfile::PowerDecay { v0, exponent, offset } => TimeProfile::PowerDecay {
                v0: s * v0,
                exponent,
                offset: s * offset,
            },
            TimeProfile::PowerGrowth { v0, exponent, offset } => TimeProfile::PowerGrowth {
                v0: s * v0,
                exponent,
                offset: s * offset,
            },
            TimeProfile::Exponential { v0, rate, offset } => TimeProfile::Exponential {
                v0: s * v0,
                rate,
                offset: s * offset,
            },
            other => TimeProfile::product(vec![TimeProfile::constant(s), other]),
        }
    }

    /// Adds a constant offset to a parametric profile.
    pub fn with_offset(self, off: f64) -> Self {
        match self {
            TimeProfile::Constant { v0 } => TimeProfile::Constant { v0: v0 + off },
            TimeProfile::PowerDecay { v0, exponent, .. } => TimeProfile::PowerDecay {
                v0,
                exponent,
                offset: off,
            },
            TimeProfile::PowerGrowth { v0, exponent, .. } => TimeProfile::PowerGrowth {
                v0,
                exponent,
                offset: off,
            },
            TimeProfile::Exponential { v0, rate, .. } => TimeProfile::Exponential {
                v0,
                rate,
                offset: off,
            },
            other => TimeProfile::sum(vec![other, TimeProfile::constant(off)]),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, TimeProfile::Constant { v0 } if *v0 == 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            TimeProfile::Constant { v0 } => {
                ensure_finite("profile v0", *v0)?;
            }
            TimeProfile::PowerDecay {
                v0,
                exponent,
                offset,
            }
            | TimeProfile::PowerGrowth {
                v0,
                exponent,
                offset,
            } => {
                ensure_finite("profile v0", *v0)?;
                ensure_finite("profile exponent", *exponent)?;
                ensure_finite("profile offset", *offset)?;
            }
            TimeProfile::Exponential { v0, rate, offset } => {
                ensure_finite("profile v0", *v0)?;
                ensure_finite("profile rate", *rate)?;
                ensure_finite("profile offset", *offset)?;
            }
            TimeProfile::Tabulated { points } => {
                if points.len() < 2 {
                    return Err(Error::invalid("table", "need at least two (t, value) pairs"));
                }
                if points[0].0 != 0.0 {
                    return Err(Error::invalid("table", "first abscissa must be t = 0"));
                }
                for w in points.windows(2) {
                    if !(w[1].0 > w[0].0) {
                        return Err(Error::invalid("table", "abscissae must be strictly increasing"));
                    }
                }
                for &(t, v) in points {
                    ensure_finite("table t", t)?;
                    ensure_finite("table value", v)?;
                }
            }
            TimeProfile::Sum { terms } => terms.iter().try_for_each(|p| p.validate())?,
            TimeProfile::Product { factors } => factors.iter().try_for_each(|p| p.validate())?,
        }
        Ok(())
    }

    /// Largest time at which the profile is defined.
    pub fn t_max(&self) -> f64 {
        match self {
            TimeProfile::Tabulated { points } => points.last().map_or(0.0, |p| p.0),
            TimeProfile::Sum { terms } => terms.iter().map(|p| p.t_max()).fold(f64::INFINITY, f64::min),
            TimeProfile::Product { factors } => {
                factors.iter().map(|p| p.t_max()).fold(f64::INFINITY, f64::min)
            }
            _ => f64::INFINITY,
        }
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        if !t.is_finite() {
            return Err(Error::NonFinite("time"));
        }
        if t < 0.0 {
            return Err(Error::OutOfDomain { t, t_max: self.t_max() });
        }
        let v = match self {
            TimeProfile::Constant { v0 } => *v0,
            TimeProfile::PowerDecay {
                v0,
                exponent,
                offset,
            } => offset + v0 * (1.0 + t).powf(-exponent),
            TimeProfile::PowerGrowth {
                v0,
                exponent,
                offset,
            } => offset + v0 * (1.0 + t).powf(*exponent),
            TimeProfile::Exponential { v0, rate, offset } => offset + v0 * (rate * t).exp(),
            TimeProfile::Tabulated { points } => interpolate(points, t)?,
            TimeProfile::Sum { terms } => {
                let mut s = 0.0;
                for p in terms {
                    s += p.eval(t)?;
                }
                s
            }
            TimeProfile::Product { factors } => {
                let mut s = 1.0;
                for p in factors {
                    s *= p.eval(t)?;
                }
                s
            }
        };
        ensure_finite("profile value", v)
    }

    /// Evaluates and rejects non-positive values.
    pub fn eval_positive(&self, name: &'static str, t: f64) -> Result<f64> {
        let v = self.eval(t)?;
        if v > 0.0 {
            Ok(v)
        } else {
            Err(Error::NotPositive { name, t, value: v })
        }
    }

    /// Time derivative. Exact for parametric kinds; centered differences
    /// (refined until two successive estimates agree) for tables.
    pub fn derivative(&self, t: f64) -> Result<f64> {
        if t < 0.0 || !t.is_finite() {
            return Err(Error::OutOfDomain { t, t_max: self.t_max() });
        }
        let d = match self {
            TimeProfile::Constant { .. } => 0.0,
            TimeProfile::PowerDecay { v0, exponent, .. } => {
                -exponent * v0 * (1.0 + t).powf(-exponent - 1.0)
            }
            TimeProfile::PowerGrowth { v0, exponent, .. } => {
                exponent * v0 * (1.0 + t).powf(exponent - 1.0)
            }
            TimeProfile::Exponential { v0, rate, .. } => rate * v0 * (rate * t).exp(),
            TimeProfile::Tabulated { points } => table_derivative(self, points, t)?,
            TimeProfile::Sum { terms } => {
                let mut s = 0.0;
                for p in terms {
                    s += p.derivative(t)?;
                }
                s
            }
            TimeProfile::Product { factors } => {
                let values = factors.iter().map(|p| p.eval(t)).collect::<Result<Vec<_>>>()?;
                let mut s = 0.0;
                for (i, p) in factors.iter().enumerate() {
                    let rest: f64 = values
                        .iter()
                        .enumerate()
                        .filter(|(j, _)| *j != i)
                        .map(|(_, v)| v)
                        .product();
                    s += p.derivative(t)? * rest;
                }
                s
            }
        };
        ensure_finite("profile derivative", d)
    }

    /// Checks positivity on a dense sample of `[0, t_end]`.
    pub fn ensure_positive_on(&self, name: &'static str, t_end: f64) -> Result<()> {
        for t in horizon_samples(t_end) {
            self.eval_positive(name, t)?;
        }
        Ok(())
    }

    /// Sampled infimum over `[0, t_end]`.
    pub fn inf_on(&self, t_end: f64) -> Result<f64> {
        let mut m = f64::INFINITY;
        for t in horizon_samples(t_end) {
            m = m.min(self.eval(t)?);
        }
        Ok(m)
    }

    /// Sampled supremum over `[0, t_end]`.
    pub fn sup_on(&self, t_end: f64) -> Result<f64> {
        let mut m = f64::NEG_INFINITY;
        for t in horizon_samples(t_end) {
            m = m.max(self.eval(t)?);
        }
        Ok(m)
    }
}

pub(crate) fn horizon_samples(t_end: f64) -> impl Iterator<Item = f64> {
    let n = HORIZON_SAMPLES;
    (0..n).map(move |j| t_end * j as f64 / (n - 1) as f64)
}

fn interpolate(points: &[(f64, f64)], t: f64) -> Result<f64> {
    let t_max = points.last().map_or(0.0, |p| p.0);
    if t > t_max {
        return Err(Error::OutOfDomain { t, t_max });
    }
    let j = points.partition_point(|p| p.0 <= t);
    if j == 0 {
        return Ok(points[0].1);
    }
    if j == points.len() {
        return Ok(points[j - 1].1);
    }
    let (t0, v0) = points[j - 1];
    let (t1, v1) = points[j];
    let s = (t - t0) / (t1 - t0);
    Ok(v0 + s * (v1 - v0))
}

fn table_derivative(p: &TimeProfile, points: &[(f64, f64)], t: f64) -> Result<f64> {
    let t_max = points.last().map_or(0.0, |p| p.0);
    if t > t_max {
        return Err(Error::OutOfDomain { t, t_max });
    }
    let mut h = 1e-3 * t_max;
    let mut prev: Option<f64> = None;
    for _ in 0..40 {
        let lo = (t - h).max(0.0);
        let hi = (t + h).min(t_max);
        let est = (p.eval(hi)? - p.eval(lo)?) / (hi - lo);
        if let Some(prev) = prev {
            if (est - prev).abs() <= 1e-10 * est.abs().max(1.0) {
                return Ok(est);
            }
        }
        prev = Some(est);
        h *= 0.5;
    }
    Ok(prev.unwrap_or(0.0))
}

/// A space-time dependent 2x2 linear coefficient `A(x, t)`.
#[derive(Clone)]
pub struct CoefficientField(pub Arc<dyn Fn(f64, f64) -> Mat2 + Send + Sync>);

impl fmt::Debug for CoefficientField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("CoefficientField(..)")
    }
}

#[derive(Debug, Clone)]
pub enum LinearPart {
    None,
    /// `A(t) = a(t) * I`.
    Scalar(TimeProfile),
    /// Constant matrix. A single-component system uses the `a` entry only.
    Matrix(Mat2),
    Field(CoefficientField),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Nonlinearity {
    None,
    SaturatedPower,
}

#[derive(Debug, Clone)]
pub struct KineticsSpec {
    pub n_components: usize,
    pub linear: LinearPart,
    pub nonlinear: Nonlinearity,
    pub c0: TimeProfile,
    pub p: f64,
    pub modulation: TimeProfile,
    /// Lipschitz constant of `F`; carried as metadata only.
    pub lipschitz_cf: Option<f64>,
}

impl KineticsSpec {
    pub fn linear(n_components: usize, linear: LinearPart) -> Self {
        KineticsSpec {
            n_components,
            linear,
            nonlinear: Nonlinearity::None,
            c0: TimeProfile::constant(0.0),
            p: 2.0,
            modulation: TimeProfile::constant(1.0),
            lipschitz_cf: None,
        }
    }

    pub fn with_saturated_power(mut self, c0: TimeProfile, p: f64) -> Self {
        self.nonlinear = Nonlinearity::SaturatedPower;
        self.c0 = c0;
        self.p = p;
        self
    }

    pub fn with_modulation(mut self, phi: TimeProfile) -> Self {
        self.modulation = phi;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=2).contains(&self.n_components) {
            return Err(Error::invalid("n_components", "must be 1 or 2"));
        }
        if !(self.p > 1.0) || !self.p.is_finite() {
            return Err(Error::invalid("p", format!("growth exponent must exceed 1, got {}", self.p)));
        }
        if let Some(cf) = self.lipschitz_cf {
            if !(cf > 0.0) {
                return Err(Error::invalid("lipschitz_cF", "must be positive"));
            }
        }
        self.c0.validate()?;
        self.modulation.validate()?;
        match &self.linear {
            LinearPart::Scalar(a) => a.validate()?,
            LinearPart::Matrix(m) => m.validate()?,
            LinearPart::None | LinearPart::Field(_) => {}
        }
        Ok(())
    }

    /// Freezes all time-dependent coefficients at `t`.
    pub fn at(&self, t: f64) -> Result<FrozenKinetics<'_>> {
        let phi = self.modulation.eval(t)?;
        let c0 = match self.nonlinear {
            Nonlinearity::None => 0.0,
            Nonlinearity::SaturatedPower => self.c0.eval(t)?,
        };
        let scalar = match &self.linear {
            LinearPart::Scalar(a) => a.eval(t)?,
            _ => 0.0,
        };
        Ok(FrozenKinetics {
            spec: self,
            t,
            phi,
            c0,
            scalar,
        })
    }

    /// Sampled upper bound of `|F(u, x, t)|` over `|u| <= radius`, `t in [0, t_end]`
    /// and the given nodes. Exact in `u` (the bound is monotone in `|u|`).
    pub fn reaction_bound(&self, radius: f64, t_end: f64, nodes: &[f64]) -> Result<f64> {
        let mut m: f64 = 0.0;
        for t in horizon_samples(t_end) {
            let k = self.at(t)?;
            let lin_norm = match &self.linear {
                LinearPart::None => 0.0,
                LinearPart::Scalar(_) => k.scalar.abs(),
                LinearPart::Matrix(a) => self.matrix_norm(a),
                LinearPart::Field(f) => nodes
                    .iter()
                    .map(|&x| self.matrix_norm(&(f.0)(x, t)))
                    .fold(0.0, f64::max),
            };
            let sat = if self.nonlinear == Nonlinearity::SaturatedPower {
                let s = radius.powf(self.p - 1.0);
                k.c0.abs() * radius * s / (1.0 + s)
            } else {
                0.0
            };
            m = m.max(k.phi.abs() * (lin_norm * radius + sat));
        }
        Ok(m)
    }

    fn matrix_norm(&self, a: &Mat2) -> f64 {
        if self.n_components == 1 {
            a.a.abs()
        } else {
            a.operator_norm()
        }
    }
}

/// Kinetics with all time profiles evaluated.
#[derive(Debug, Clone, Copy)]
pub struct FrozenKinetics<'a> {
    spec: &'a KineticsSpec,
    t: f64,
    pub phi: f64,
    pub c0: f64,
    scalar: f64,
}

impl FrozenKinetics<'_> {
    /// Writes `F(u, x, t)` into `out`. `u` and `out` have length `n_components`.
    #[inline]
    pub fn apply(&self, u: &[f64], x: f64, out: &mut [f64]) {
        let n = self.spec.n_components;
        match &self.spec.linear {
            LinearPart::None => out[..n].iter_mut().for_each(|o| *o = 0.0),
            LinearPart::Scalar(_) => {
                for i in 0..n {
                    out[i] = self.scalar * u[i];
                }
            }
            LinearPart::Matrix(m) => apply_matrix(m, n, u, out),
            LinearPart::Field(f) => apply_matrix(&(f.0)(x, self.t), n, u, out),
        }
        if self.spec.nonlinear == Nonlinearity::SaturatedPower && self.c0 != 0.0 {
            let norm = u[..n].iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 0.0 {
                let s = norm.powf(self.spec.p - 1.0);
                let factor = self.c0 * s / (1.0 + s);
                for i in 0..n {
                    out[i] -= factor * u[i];
                }
            }
        }
        for o in &mut out[..n] {
            *o *= self.phi;
        }
    }
}

#[inline]
fn apply_matrix(m: &Mat2, n: usize, u: &[f64], out: &mut [f64]) {
    if n == 1 {
        out[0] = m.a * u[0];
    } else {
        out[0] = m.a * u[0] + m.b * u[1];
        out[1] = m.c * u[0] + m.d * u[1];
    }
}

/// `F(u, x, t)`; exactly zero at `u = 0`.
pub fn eval_reaction(kin: &KineticsSpec, u: &[f64], x: f64, t: f64) -> Result<Vec<f64>> {
    if u.len() != kin.n_components {
        return Err(Error::Shape(format!(
            "state has {} components, kinetics expects {}",
            u.len(),
            kin.n_components
        )));
    }
    if u.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("state"));
    }
    ensure_finite("position", x)?;
    let mut out = vec![0.0; kin.n_components];
    kin.at(t)?.apply(u, x, &mut out);
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("reaction"));
    }
    Ok(out)
}

/// Tightest `gamma(t)` with `(F_lin u, u) <= -gamma(t) |u|^2`, worst case over
/// `nodes` for space-dependent coefficients. Includes the modulation `phi(t)`.
pub fn gamma_of_t(kin: &KineticsSpec, t: f64, nodes: &[f64]) -> Result<f64> {
    let k = kin.at(t)?;
    let omega = match &kin.linear {
        LinearPart::None => 0.0,
        LinearPart::Scalar(_) => k.scalar,
        LinearPart::Matrix(m) => kin_abscissa(kin, m),
        LinearPart::Field(f) => {
            if nodes.is_empty() {
                return Err(Error::Degenerate("no nodes to evaluate A(x, t) on".into()));
            }
            nodes
                .iter()
                .map(|&x| kin_abscissa(kin, &(f.0)(x, t)))
                .fold(f64::NEG_INFINITY, f64::max)
        }
    };
    ensure_finite("gamma", -k.phi * omega)
}

fn kin_abscissa(kin: &KineticsSpec, m: &Mat2) -> f64 {
    if kin.n_components == 1 {
        m.a
    } else {
        numerical_abscissa(m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Gamma0 {
    pub gamma0: f64,
    /// `b + c >= 0`: the only regime where the cross term bound
    /// `(b + c) u1 u2 <= (b + c)(u1^2 + u2^2) / 2` holds.
    pub derivation_valid: bool,
}

/// `gamma0 = max(a + (b + c)/2, d + (b + c)/2)`, the bound of the quadratic
/// form `a u1^2 + (b + c) u1 u2 + d u2^2 <= gamma0 |u|^2` used for 2x2 kinetics.
pub fn gamma0_quadratic_bound(a: f64, b: f64, c: f64, d: f64) -> Gamma0 {
    let half = 0.5 * (b + c);
    Gamma0 {
        gamma0: (a + half).max(d + half),
        derivation_valid: b + c >= 0.0,
    }
}
