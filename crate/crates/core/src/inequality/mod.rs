//! The scalar inequality `g' <= -sigma(t) g + alpha(t) g^q` for the `L2` norm,
//! decay certificates `mu(t)` with the envelope `g <= 1/mu`, and the
//! comparison equation obtained by taking equality.
//!
//! A certificate is accepted when, on `[0, T]`,
//!
//! ```text
//! alpha(t) <= mu(t)^(q-1) * (sigma(t) - mu'(t)/mu(t))   and   mu(0) g(0) <= 1.
//! ```

mod dopri;

use serde::Serialize;

use crate::error::{ensure_finite, Error, Result};
use crate::profiles::TimeProfile;

/// Default number of grid points for [`check_certificate`].
pub const DEFAULT_GRID_POINTS: usize = 10_000;
/// Default relative tolerance of an envelope check against a PDE trajectory.
pub const DEFAULT_ENVELOPE_SLACK: f64 = 0.02;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalarProblem {
    pub sigma: TimeProfile,
    pub alpha: TimeProfile,
    pub q: f64,
    pub g0: f64,
}

impl ScalarProblem {
    pub fn new(sigma: TimeProfile, alpha: TimeProfile, q: f64, g0: f64) -> Result<Self> {
        if !(q > 1.0) || !q.is_finite() {
            return Err(Error::invalid("q", format!("exponent must exceed 1, got {q}")));
        }
        if !(g0 >= 0.0) || !g0.is_finite() {
            return Err(Error::invalid("g0", format!("initial value must be finite and >= 0, got {g0}")));
        }
        sigma.validate()?;
        alpha.validate()?;
        Ok(ScalarProblem { sigma, alpha, q, g0 })
    }

    pub fn constant(sigma: f64, alpha: f64, q: f64, g0: f64) -> Result<Self> {
        ScalarProblem::new(TimeProfile::constant(sigma), TimeProfile::constant(alpha), q, g0)
    }

    pub fn alpha_at(&self, t: f64) -> Result<f64> {
        let a = self.alpha.eval(t)?;
        if a < 0.0 {
            return Err(Error::invalid("alpha", format!("must be >= 0, got {a} at t = {t}")));
        }
        Ok(a)
    }

    /// Right-hand side of the comparison equation.
    pub fn rhs(&self, t: f64, g: f64) -> Result<f64> {
        let g = g.max(0.0);
        Ok(-self.sigma.eval(t)? * g + self.alpha_at(t)? * g.powf(self.q))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum CertificateFamily {
    /// `mu0 exp(nu t)`
    Exponential { mu0: f64, nu: f64 },
    /// `mu0 (1 + t)^m`
    Power { mu0: f64, m: f64 },
    /// `mu0 + mu1 (1 + t)^(-nu)`
    Bounded { mu0: f64, mu1: f64, nu: f64 },
    Custom,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Certificate {
    #[serde(flatten)]
    pub family: CertificateFamily,
    pub mu: TimeProfile,
}

impl Certificate {
    pub fn exponential(mu0: f64, nu: f64) -> Result<Self> {
        positive("mu0", mu0)?;
        ensure_finite("nu", nu)?;
        Ok(Certificate {
            family: CertificateFamily::Exponential { mu0, nu },
            mu: TimeProfile::exponential(mu0, nu),
        })
    }

    pub fn power(mu0: f64, m: f64) -> Result<Self> {
        positive("mu0", mu0)?;
        ensure_finite("m", m)?;
        Ok(Certificate {
            family: CertificateFamily::Power { mu0, m },
            mu: TimeProfile::power_growth(mu0, m),
        })
    }

    pub fn bounded(mu0: f64, mu1: f64, nu: f64) -> Result<Self> {
        positive("mu0", mu0)?;
        ensure_finite("mu1", mu1)?;
        if !(nu >= 0.0) || !nu.is_finite() {
            return Err(Error::invalid("nu", format!("must be finite and >= 0, got {nu}")));
        }
        if !(mu0 + mu1 > 0.0) {
            return Err(Error::invalid("mu1", "mu0 + mu1 must be positive"));
        }
        Ok(Certificate {
            family: CertificateFamily::Bounded { mu0, mu1, nu },
            mu: TimeProfile::power_decay(mu1, nu).with_offset(mu0),
        })
    }

    pub fn custom(mu: TimeProfile) -> Result<Self> {
        mu.validate()?;
        Ok(Certificate {
            family: CertificateFamily::Custom,
            mu,
        })
    }

    pub fn mu(&self, t: f64) -> Result<f64> {
        self.mu.eval(t)
    }

    /// `mu'(t) / mu(t)`, analytic for the parametric families.
    pub fn log_derivative(&self, t: f64) -> Result<f64> {
        match self.family {
            CertificateFamily::Exponential { nu, .. } => Ok(nu),
            CertificateFamily::Power { m, .. } => Ok(m / (1.0 + t)),
            CertificateFamily::Bounded { mu0, mu1, nu } => {
                let s = (1.0 + t).powf(-nu);
                Ok(-nu * mu1 * s / (1.0 + t) / (mu0 + mu1 * s))
            }
            CertificateFamily::Custom => Ok(self.mu.derivative(t)? / self.mu.eval(t)?),
        }
    }

    /// The certificate for `s * mu`.
    pub fn scaled(&self, s: f64) -> Result<Self> {
        match self.family {
            CertificateFamily::Exponential { mu0, nu } => Certificate::exponential(s * mu0, nu),
            CertificateFamily::Power { mu0, m } => Certificate::power(s * mu0, m),
            CertificateFamily::Bounded { mu0, mu1, nu } => Certificate::bounded(s * mu0, s * mu1, nu),
            CertificateFamily::Custom => Certificate::custom(self.mu.clone().scaled(s)),
        }
    }
}

fn positive(name: &'static str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::invalid(name, format!("must be positive and finite, got {v}")))
    }
}

/// `mu^(q-1) (sigma - mu'/mu) - alpha` at `t`; the growth condition holds where it is `>= 0`.
pub fn residual(p: &ScalarProblem, cert: &Certificate, t: f64) -> Result<f64> {
    let mu = cert.mu(t)?;
    if !(mu > 0.0) {
        return Err(Error::InvalidCertificate { t, value: mu });
    }
    let r = mu.powf(p.q - 1.0) * (p.sigma.eval(t)? - cert.log_derivative(t)?) - p.alpha_at(t)?;
    ensure_finite("certificate residual", r)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CheckOptions {
    pub grid_points: usize,
    /// A condition counts as violated only below `-tol`.
    pub tol: f64,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions {
            grid_points: DEFAULT_GRID_POINTS,
            tol: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    /// `alpha <= mu^(q-1) (sigma - mu'/mu)`
    GrowthBound,
    /// `mu(0) g(0) <= 1`
    InitialValue,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Failure {
    pub condition: Condition,
    pub t: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertificateReport {
    pub pass: bool,
    pub horizon: f64,
    pub grid_points: usize,
    pub tol: f64,
    pub worst_residual: f64,
    pub worst_residual_time: f64,
    /// `1 - mu(0) g(0)`.
    pub initial_slack: f64,
    pub first_failure: Option<Failure>,
    /// `(t, residual)` on the check grid.
    #[serde(skip)]
    pub residuals: Vec<(f64, f64)>,
}

/// Checks both certificate conditions on a uniform grid of `[0, t_end]`,
/// then refines around every discrete local minimum of the residual.
pub fn check_certificate(
    p: &ScalarProblem,
    cert: &Certificate,
    t_end: f64,
    opts: &CheckOptions,
) -> Result<CertificateReport> {
    if !(t_end > 0.0) || !t_end.is_finite() {
        return Err(Error::invalid("T", "horizon must be positive"));
    }
    if opts.grid_points < 2 {
        return Err(Error::invalid("grid_points", "need at least two points"));
    }
    if !(opts.tol >= 0.0) {
        return Err(Error::invalid("tol", "must be >= 0"));
    }
    let n = opts.grid_points;
    let times: Vec<f64> = (0..n).map(|j| t_end * j as f64 / (n - 1) as f64).collect();
    let mut residuals = Vec::with_capacity(n);
    for &t in &times {
        residuals.push((t, residual(p, cert, t)?));
    }

    let (mut worst_t, mut worst) = residuals
        .iter()
        .cloned()
        .fold((0.0, f64::INFINITY), |acc, (t, r)| if r < acc.1 { (t, r) } else { acc });
    let mut first_bad = residuals.iter().find(|(_, r)| *r < -opts.tol).map(|&(t, r)| (t, r));

    let mut minima: Vec<usize> = (0..n)
        .filter(|&j| {
            let r = residuals[j].1;
            (j == 0 || r <= residuals[j - 1].1) && (j + 1 == n || r <= residuals[j + 1].1)
        })
        .collect();
    minima.sort_by(|a, b| residuals[*a].1.total_cmp(&residuals[*b].1));
    minima.truncate(32);
    for j in minima {
        let lo = times[j.saturating_sub(1)];
        let hi = times[(j + 1).min(n - 1)];
        let (t, r) = golden_min(|t| residual(p, cert, t), lo, hi)?;
        if r < worst {
            worst = r;
            worst_t = t;
        }
        if r < -opts.tol && first_bad.map_or(true, |(tb, _)| t < tb) {
            first_bad = Some((t, r));
        }
    }

    let initial_slack = 1.0 - cert.mu(0.0)? * p.g0;
    // mu0 = 1/g0 may round to a product one ulp above 1
    let first_failure = if initial_slack < -(opts.tol + 4.0 * f64::EPSILON) {
        Some(Failure {
            condition: Condition::InitialValue,
            t: 0.0,
            value: initial_slack,
        })
    } else {
        first_bad.map(|(t, value)| Failure {
            condition: Condition::GrowthBound,
            t,
            value,
        })
    };
    Ok(CertificateReport {
        pass: first_failure.is_none(),
        horizon: t_end,
        grid_points: n,
        tol: opts.tol,
        worst_residual: worst,
        worst_residual_time: worst_t,
        initial_slack,
        first_failure,
        residuals,
    })
}

fn golden_min<F>(f: F, mut a: f64, mut b: f64) -> Result<(f64, f64)>
where
    F: Fn(f64) -> Result<f64>,
{
    let inv_phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    for _ in 0..80 {
        if b - a <= 1e-14 * b.abs().max(1.0) {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d)?;
        }
    }
    let (fa, fb) = (f(a)?, f(b)?);
    Ok([(a, fa), (b, fb), (c, fc), (d, fd)]
        .into_iter()
        .fold((a, fa), |acc, x| if x.1 < acc.1 { x } else { acc }))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnvelopeViolation {
    pub t: f64,
    pub g: f64,
    pub bound: f64,
    /// `g(t) mu(t)`; a violation has `ratio > 1 + slack`.
    pub ratio: f64,
}

/// Every sample where `g(t) mu(t) > 1 + slack`.
pub fn verify_envelope(
    times: &[f64],
    g: &[f64],
    cert: &Certificate,
    slack: f64,
) -> Result<Vec<EnvelopeViolation>> {
    if times.len() != g.len() {
        return Err(Error::Shape(format!("{} times but {} values", times.len(), g.len())));
    }
    let mut out = Vec::new();
    for (&t, &gv) in times.iter().zip(g) {
        let mu = cert.mu(t)?;
        if !(mu > 0.0) {
            return Err(Error::InvalidCertificate { t, value: mu });
        }
        let ratio = gv * mu;
        if ratio > 1.0 + slack {
            out.push(EnvelopeViolation {
                t,
                g: gv,
                bound: 1.0 / mu,
                ratio,
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonSolution {
    /// Requested times reached before any blow-up.
    pub times: Vec<f64>,
    pub g: Vec<f64>,
    pub blow_up: Option<f64>,
}

/// `n` uniformly spaced times from 0 to `t_end` inclusive.
pub fn uniform_times(t_end: f64, n: usize) -> Vec<f64> {
    let n = n.max(2);
    (0..n).map(|j| t_end * j as f64 / (n - 1) as f64).collect()
}

/// Integrates the comparison equation `g' = -sigma g + alpha g^q` with an
/// adaptive Dormand-Prince pair under relative local tolerance `tol`, reporting
/// `g` at the requested (sorted, non-negative) times.
///
/// Once `g` grows past `1e4 g0` the integration continues in
/// `w = g^(1-q)`, which satisfies the linear equation `w' = (q-1)(sigma w - alpha)`
/// and reaches zero exactly when `g` blows up; the crossing is located by
/// bisection on the step size.
pub fn comparison_solve(p: &ScalarProblem, times: &[f64], tol: f64) -> Result<ComparisonSolution> {
    if !(tol > 0.0) {
        return Err(Error::invalid("tol", "must be positive"));
    }
    if times.iter().any(|t| !(*t >= 0.0) || !t.is_finite()) || times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::invalid("times", "must be finite, non-negative and sorted"));
    }
    if p.g0 == 0.0 {
        return Ok(ComparisonSolution {
            times: times.to_vec(),
            g: vec![0.0; times.len()],
            blow_up: None,
        });
    }
    let q = p.q;
    let f_g = |t: f64, g: f64| p.rhs(t, g);
    let f_w = |t: f64, w: f64| Ok((q - 1.0) * (p.sigma.eval(t)? * w - p.alpha_at(t)?));
    let switch_at = 1e4 * p.g0;

    let mut in_w = false;
    let mut t = 0.0;
    let mut y = p.g0;
    let scale = p.sigma.eval(0.0)?.abs() + p.alpha_at(0.0)? * p.g0.powf(q - 1.0);
    let mut h = (1e-2 / scale.max(1e-12)).min(1.0);
    let mut out_t = Vec::with_capacity(times.len());
    let mut out_g = Vec::with_capacity(times.len());
    let mut steps = 0usize;

    for &target in times {
        while target - t > 1e-14 * target.max(1.0) {
            steps += 1;
            if steps > 10_000_000 {
                return Err(Error::Degenerate("comparison equation needs too many steps".into()));
            }
            let hit = h >= target - t;
            let step = if hit { target - t } else { h };
            let (y_new, err) = if in_w {
                dopri::step(&f_w, t, y, step)?
            } else {
                dopri::step(&f_g, t, y, step)?
            };
            let sc = tol * y.abs().max(y_new.abs()) + f64::MIN_POSITIVE;
            let en = (err / sc).abs();
            let factor = if en == 0.0 { 5.0 } else { (0.9 * en.powf(-0.2)).clamp(0.2, 5.0) };
            if !en.is_finite() || en > 1.0 {
                h = step * if en.is_finite() { factor } else { 0.2 };
                continue;
            }
            if in_w && y_new <= 0.0 {
                let time = t + bisect_zero(&f_w, t, y, step)?;
                return Ok(ComparisonSolution {
                    times: out_t,
                    g: out_g,
                    blow_up: Some(time),
                });
            }
            t = if hit { target } else { t + step };
            y = if in_w { y_new } else { y_new.max(0.0) };
            if !in_w && y > switch_at {
                in_w = true;
                y = y.powf(1.0 - q);
            }
            h = step * factor;
        }
        out_t.push(target);
        out_g.push(if in_w { y.powf(1.0 / (1.0 - q)) } else { y });
    }
    Ok(ComparisonSolution {
        times: out_t,
        g: out_g,
        blow_up: None,
    })
}

/// Largest `s` in `(0, h]` with `w(t + s) > 0`, given `w(t) > 0 >= w(t + h)`.
fn bisect_zero<F>(f: &F, t: f64, w: f64, h: f64) -> Result<f64>
where
    F: Fn(f64, f64) -> Result<f64>,
{
    let (mut lo, mut hi) = (0.0, h);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if dopri::step(f, t, w, mid)?.0 > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Bernoulli {
    Finite { g: f64 },
    BlowUp { time: f64 },
}

/// Finite-time blow-up of the constant-coefficient comparison equation, if any.
pub fn bernoulli_blow_up_time(sigma: f64, alpha: f64, q: f64, g0: f64) -> Option<f64> {
    if g0 == 0.0 || alpha == 0.0 {
        return None;
    }
    let w0 = g0.powf(1.0 - q);
    if sigma == 0.0 {
        return Some(w0 / ((q - 1.0) * alpha));
    }
    let r = sigma * w0 / alpha;
    if r >= 1.0 {
        return None;
    }
    Some(-(-r).ln_1p() / ((q - 1.0) * sigma))
}

/// Exact solution of `g' = -sigma g + alpha g^q`, `g(0) = g0`, for constants
/// `sigma` and `alpha >= 0`, through `w = g^(1-q)`:
/// `w(t) = w0 e^x - alpha (q-1) t (e^x - 1)/x` with `x = (q-1) sigma t`.
pub fn bernoulli_closed_form(sigma: f64, alpha: f64, q: f64, g0: f64, t: f64) -> Result<Bernoulli> {
    ensure_finite("sigma", sigma)?;
    if !(alpha >= 0.0) || !alpha.is_finite() {
        return Err(Error::invalid("alpha", format!("must be finite and >= 0, got {alpha}")));
    }
    if !(q > 1.0) || !q.is_finite() {
        return Err(Error::invalid("q", format!("exponent must exceed 1, got {q}")));
    }
    if !(g0 >= 0.0) || !g0.is_finite() {
        return Err(Error::invalid("g0", format!("must be finite and >= 0, got {g0}")));
    }
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::invalid("t", format!("must be finite and >= 0, got {t}")));
    }
    if g0 == 0.0 {
        return Ok(Bernoulli::Finite { g: 0.0 });
    }
    if let Some(time) = bernoulli_blow_up_time(sigma, alpha, q, g0) {
        if time <= t {
            return Ok(Bernoulli::BlowUp { time });
        }
    }
    let x = (q - 1.0) * sigma * t;
    let phi = if x == 0.0 { 1.0 } else { x.exp_m1() / x };
    let w = g0.powf(1.0 - q) * x.exp() - alpha * (q - 1.0) * t * phi;
    Ok(Bernoulli::Finite {
        g: w.powf(1.0 / (1.0 - q)),
    })
}

/// Nonzero equilibrium `(sigma/alpha)^(1/(q-1))` of the comparison equation.
pub fn bernoulli_equilibrium(sigma: f64, alpha: f64, q: f64) -> Option<f64> {
    (sigma > 0.0 && alpha > 0.0).then(|| (sigma / alpha).powf(1.0 / (q - 1.0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn finite(b: Bernoulli) -> f64 {
        match b {
            Bernoulli::Finite { g } => g,
            Bernoulli::BlowUp { time } => panic!("unexpected blow-up at {time}"),
        }
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn closed_form_examples() {
        for t in [0.0, 0.5, 3.0] {
            let g = finite(bernoulli_closed_form(0.7, 0.0, 1.5, 2.0, t).unwrap());
            assert!(rel(g, 2.0 * (-0.7 * t).exp()) < 1e-14);
        }
        let eq = bernoulli_equilibrium(1.0, 0.5, 1.25).unwrap();
        for t in [0.0, 1.0, 10.0] {
            assert!(rel(finite(bernoulli_closed_form(1.0, 0.5, 1.25, eq, t).unwrap()), eq) < 1e-12);
        }
        // reference from an independent 8th-order integration at rtol 1e-13
        let g = finite(bernoulli_closed_form(1.0, 0.5, 1.25, 0.5, 4.0).unwrap());
        assert!(rel(g, 0.0315117799290317) < 1e-12, "{g}");
        assert_eq!(
            bernoulli_closed_form(1.0, 0.5, 1.25, 0.0, 4.0).unwrap(),
            Bernoulli::Finite { g: 0.0 }
        );
    }

    #[test]
    fn closed_form_blow_up() {
        // sigma = 0: w = w0 - (q-1) alpha t
        let t_star = bernoulli_blow_up_time(0.0, 1.0, 2.0, 2.0).unwrap();
        assert!((t_star - 0.5).abs() < 1e-15);
        assert_eq!(
            bernoulli_closed_form(0.0, 1.0, 2.0, 2.0, 0.6).unwrap(),
            Bernoulli::BlowUp { time: t_star }
        );
        // q = 2, sigma = 1: g = 1 / (alpha + (1/g0 - alpha) e^t) blows up at ln(alpha/(alpha - 1/g0))
        let (alpha, g0) = (1.0f64, 2.0f64);
        let expected = (alpha / (alpha - 1.0 / g0)).ln();
        let t_star = bernoulli_blow_up_time(1.0, alpha, 2.0, g0).unwrap();
        assert!(rel(t_star, expected) < 1e-14);
        let g = finite(bernoulli_closed_form(1.0, alpha, 2.0, g0, 0.5).unwrap());
        assert!(rel(g, 1.0 / (alpha + (1.0 / g0 - alpha) * 0.5f64.exp())) < 1e-13);
        // below the equilibrium: no blow-up
        assert!(bernoulli_blow_up_time(1.0, 0.5, 1.25, 0.5).is_none());
    }

    #[test]
    fn closed_form_rejects_bad_input() {
        assert!(bernoulli_closed_form(1.0, -1.0, 1.5, 1.0, 1.0).is_err());
        assert!(bernoulli_closed_form(1.0, 1.0, 1.0, 1.0, 1.0).is_err());
        assert!(bernoulli_closed_form(1.0, 1.0, 1.5, -1.0, 1.0).is_err());
        assert!(bernoulli_closed_form(f64::NAN, 1.0, 1.5, 1.0, 1.0).is_err());
    }

    #[test]
    fn comparison_solve_examples() {
        let times = uniform_times(5.0, 11);
        let lin = comparison_solve(&ScalarProblem::constant(1.0, 0.0, 1.5, 1.0).unwrap(), &times, 1e-12).unwrap();
        for (t, g) in lin.times.iter().zip(&lin.g) {
            assert!(rel(*g, (-t).exp()) < 1e-9);
        }
        let zero = comparison_solve(&ScalarProblem::constant(1.0, 3.0, 1.5, 0.0).unwrap(), &times, 1e-12).unwrap();
        assert!(zero.g.iter().all(|g| *g == 0.0));

        let p = ScalarProblem::constant(1.0, 0.5, 1.25, 0.5).unwrap();
        let sol = comparison_solve(&p, &times, 1e-12).unwrap();
        for (t, g) in sol.times.iter().zip(&sol.g) {
            let exact = finite(bernoulli_closed_form(1.0, 0.5, 1.25, 0.5, *t).unwrap());
            assert!(rel(*g, exact) < 1e-8);
        }
    }

    #[test]
    fn comparison_solve_locates_blow_up() {
        let p = ScalarProblem::constant(1.0, 1.0, 2.0, 2.0).unwrap();
        let sol = comparison_solve(&p, &uniform_times(2.0, 21), 1e-12).unwrap();
        let expected = 2f64.ln();
        assert!((sol.blow_up.unwrap() - expected).abs() < 1e-9);
        assert_eq!(sol.times.len(), 7);
        assert!(sol.times.iter().all(|t| *t < expected));
    }

    #[test]
    fn comparison_solve_rejects_bad_input() {
        let p = ScalarProblem::constant(1.0, 1.0, 2.0, 2.0).unwrap();
        assert!(comparison_solve(&p, &[0.0, 1.0], 0.0).is_err());
        assert!(comparison_solve(&p, &[1.0, 0.5], 1e-8).is_err());
        assert!(ScalarProblem::constant(1.0, 1.0, 0.5, 1.0).is_err());
        assert!(ScalarProblem::constant(1.0, 1.0, 2.0, -1.0).is_err());
    }

    #[test]
    fn certificate_check_examples() {
        let cert = Certificate::exponential(1.0, 0.5).unwrap();
        let p = ScalarProblem::constant(1.0, 0.0, 1.25, 1.0).unwrap();
        let report = check_certificate(&p, &cert, 10.0, &CheckOptions::default()).unwrap();
        assert!(report.pass);
        assert_eq!(report.grid_points, DEFAULT_GRID_POINTS);
        assert_eq!(report.initial_slack, 0.0);
        for &(t, r) in report.residuals.iter().step_by(997) {
            assert!(rel(r, 0.5 * (0.125 * t).exp()) < 1e-12);
        }
        assert!((report.worst_residual - 0.5).abs() < 1e-12);

        let heavy = ScalarProblem::constant(1.0, 10.0, 1.25, 1.0).unwrap();
        let report = check_certificate(&heavy, &cert, 10.0, &CheckOptions::default()).unwrap();
        assert!(!report.pass);
        let f = report.first_failure.unwrap();
        assert_eq!(f.condition, Condition::GrowthBound);
        assert_eq!(f.t, 0.0);
        assert!((f.value + 9.5).abs() < 1e-12);
    }

    #[test]
    fn refinement_finds_dips_between_grid_points() {
        // residual 1 - 40 exp(-((t - 0.55)/0.004)^2) dips below zero only near t = 0.55
        let alpha = TimeProfile::tabulated(
            (0..=2000)
                .map(|j| {
                    let t = j as f64 * 5e-4;
                    (t, 40.0 * (-((t - 0.55) / 0.004f64).powi(2)).exp())
                })
                .collect(),
        )
        .unwrap();
        let p = ScalarProblem::new(TimeProfile::constant(1.0), alpha, 2.0, 0.5).unwrap();
        let cert = Certificate::exponential(1.0, 0.0).unwrap();
        let opts = CheckOptions { grid_points: 11, tol: 0.0 };
        let report = check_certificate(&p, &cert, 1.0, &opts).unwrap();
        assert!(report.residuals.iter().all(|(_, r)| *r > 0.0));
        assert!(!report.pass);
        assert!((report.worst_residual_time - 0.55).abs() < 1e-3);
    }

    #[test]
    fn non_positive_mu_is_invalid() {
        let mu = TimeProfile::tabulated(vec![(0.0, 1.0), (1.0, -1.0)]).unwrap();
        let cert = Certificate::custom(mu).unwrap();
        let p = ScalarProblem::constant(1.0, 0.0, 2.0, 0.5).unwrap();
        assert!(matches!(
            check_certificate(&p, &cert, 1.0, &CheckOptions::default()),
            Err(Error::InvalidCertificate { .. })
        ));
    }

    #[test]
    fn log_derivatives_match_profile_derivatives() {
        let certs = [
            Certificate::exponential(2.0, 0.3).unwrap(),
            Certificate::power(0.5, 1.5).unwrap(),
            Certificate::bounded(1.0, 2.0, 0.7).unwrap(),
            Certificate::bounded(1.0, -0.5, 1.2).unwrap(),
        ];
        for c in &certs {
            for t in [0.0, 0.3, 2.0, 17.0] {
                let direct = c.mu.derivative(t).unwrap() / c.mu(t).unwrap();
                assert!((c.log_derivative(t).unwrap() - direct).abs() < 1e-13);
            }
        }
        assert_eq!(Certificate::bounded(1.0, 2.0, 0.5).unwrap().mu(0.0).unwrap(), 3.0);
        assert!(Certificate::bounded(1.0, -1.0, 0.5).is_err());
        assert!(Certificate::power(0.0, 1.0).is_err());
    }

    #[test]
    fn envelope_examples() {
        let cert = Certificate::exponential(2.0, 0.5).unwrap();
        let times = uniform_times(4.0, 9);
        let zeros = vec![0.0; times.len()];
        assert!(verify_envelope(&times, &zeros, &cert, 0.0).unwrap().is_empty());

        let g: Vec<f64> = times.iter().map(|t| 0.5 * (-0.5 * t).exp()).collect();
        assert!(verify_envelope(&times, &g, &cert, DEFAULT_ENVELOPE_SLACK).unwrap().is_empty());
        let bad = verify_envelope(&times, &g, &cert.scaled(10.0).unwrap(), DEFAULT_ENVELOPE_SLACK).unwrap();
        assert_eq!(bad.len(), times.len());
        assert_eq!(bad[0].t, 0.0);
        assert!((bad[0].ratio - 10.0).abs() < 1e-12);
        assert!(verify_envelope(&times, &g[1..], &cert, 0.0).is_err());
    }

    fn admissible() -> impl Strategy<Value = (ScalarProblem, Certificate)> {
        (0usize..3, 0.2f64..3.0, 0.0f64..0.95, 0.2f64..4.0, 1.05f64..2.0, 0.0f64..0.99, 0.05f64..1.0)
            .prop_map(|(family, s, frac, mu0, q, theta, eta)| {
                let (cert, margin) = match family {
                    0 => (Certificate::exponential(mu0, frac * s).unwrap(), s * (1.0 - frac)),
                    1 => (Certificate::power(mu0, frac * s).unwrap(), s * (1.0 - frac)),
                    _ => (Certificate::bounded(mu0, 3.0 * frac, 1.0 + frac).unwrap(), s),
                };
                // alpha below the weakest point of mu^(q-1) (sigma - mu'/mu)
                let alpha = theta * mu0.powf(q - 1.0) * margin;
                let g0 = eta / cert.mu(0.0).unwrap();
                (ScalarProblem::constant(s, alpha, q, g0).unwrap(), cert)
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn passing_certificates_bound_the_comparison_solution((p, cert) in admissible()) {
            let opts = CheckOptions { grid_points: 2000, tol: 0.0 };
            let report = check_certificate(&p, &cert, 10.0, &opts).unwrap();
            prop_assert!(report.pass, "{:?}", report.first_failure);
            let sol = comparison_solve(&p, &uniform_times(10.0, 201), 1e-10).unwrap();
            prop_assert!(sol.blow_up.is_none());
            for (t, g) in sol.times.iter().zip(&sol.g) {
                prop_assert!(g * cert.mu(*t).unwrap() <= 1.0 + 1e-7, "t={} g mu={}", t, g * cert.mu(*t).unwrap());
            }
        }

        #[test]
        fn solver_matches_closed_form(
            sigma in -1.0f64..2.0, alpha in 0.0f64..1.0, q in 1.01f64..2.0, g0 in 0.01f64..1.0,
        ) {
            let p = ScalarProblem::constant(sigma, alpha, q, g0).unwrap();
            let t_star = bernoulli_blow_up_time(sigma, alpha, q, g0);
            let t_end = t_star.map_or(10.0, |ts| (0.9 * ts).min(10.0));
            let sol = comparison_solve(&p, &uniform_times(t_end, 41), 1e-12).unwrap();
            prop_assert!(sol.blow_up.is_none());
            for (t, g) in sol.times.iter().zip(&sol.g) {
                let exact = finite(bernoulli_closed_form(sigma, alpha, q, g0, *t).unwrap());
                prop_assert!(rel(*g, exact) <= 1e-8, "t={} g={} exact={}", t, g, exact);
            }
        }

        #[test]
        fn larger_alpha_gives_larger_solution(
            sigma in -0.5f64..2.0, alpha in 0.0f64..0.5, extra in 0.01f64..0.5, q in 1.1f64..2.0, g0 in 0.05f64..0.5,
        ) {
            let times = uniform_times(1.0, 21);
            let lo = comparison_solve(&ScalarProblem::constant(sigma, alpha, q, g0).unwrap(), &times, 1e-11).unwrap();
            let hi = comparison_solve(&ScalarProblem::constant(sigma, alpha + extra, q, g0).unwrap(), &times, 1e-11).unwrap();
            for (a, b) in lo.g.iter().zip(&hi.g) {
                prop_assert!(*b >= *a * (1.0 - 1e-10));
            }
        }

        #[test]
        fn unbounded_mu_forces_decay(nu in 0.1f64..2.0, m in 0.1f64..3.0, mu0 in 0.1f64..10.0) {
            let exp = Certificate::exponential(mu0, nu).unwrap();
            let pow = Certificate::power(mu0, m).unwrap();
            for (cert, far) in [(exp, 300.0), (pow, 1e6)] {
                let env = |t: f64| 1.0 / cert.mu(t).unwrap();
                prop_assert!(env(far) < env(10.0) && env(10.0) < env(1.0) && env(1.0) < env(0.0));
                prop_assert!(env(far) < 0.3 * env(0.0));
            }
        }
    }
}
