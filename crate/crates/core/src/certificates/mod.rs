//! Decay and boundedness certificates for four concrete settings, each with
//! a hypothesis report that checks the setting's sufficient conditions on a
//! time grid and then delegates the general condition to
//! [`check_certificate`](crate::inequality::check_certificate).
//!
//! | setting | geometry | certificate `mu(t)` | envelope |
//! |---|---|---|---|
//! | exponential decay | Dirichlet, constant `d0`, `a0` | `exp(sigma0 t / 2) / g0` | `g0 exp(-sigma0 t / 2)` |
//! | power decay | Dirichlet, `d0/(1+t)`, `gamma0/(1+t)^k` | `(1+t)^m / g0` | `g0 (1+t)^-m` |
//! | Neumann bounded | Neumann, `gamma0/(1+t)^k` growth | `mu0 + mu1 (1+t)^-nu` | `1/mu0` |
//! | two-component | Dirichlet, 2x2 kinetics, modulation `phi` | power or bounded by case | either |
//!
//! The nonlinearity enters as `alpha(t) = C phi(t) c0(t)` with the aggregate
//! constant `C` (see [`crate::apriori::agmon_aggregate`]).

pub mod pipeline;

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::inequality::{check_certificate, residual, Certificate, CertificateReport, CheckOptions, ScalarProblem};
use crate::profiles::{gamma0_quadratic_bound, TimeProfile};
use crate::stability::{default_k_max, dispersion_scan, Linearization2, Mat2};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Setting {
    ExponentialDecay,
    PowerDecay,
    NeumannBounded,
    TwoComponent,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Hypothesis {
    pub name: &'static str,
    /// Informational checks do not affect the overall verdict.
    pub required: bool,
    pub pass: bool,
    /// Margin of the condition; non-negative when it holds.
    pub margin: f64,
    /// First failing time, or the time of the smallest margin for time-dependent checks.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HypothesisReport {
    pub pass: bool,
    pub checks: Vec<Hypothesis>,
    pub certificate: CertificateReport,
    /// The aggregate constant `C` the check used.
    pub agmon: f64,
}

impl HypothesisReport {
    fn new(checks: Vec<Hypothesis>, certificate: CertificateReport, agmon: f64) -> Self {
        let pass = certificate.pass && checks.iter().all(|h| h.pass || !h.required);
        HypothesisReport {
            pass,
            checks,
            certificate,
            agmon,
        }
    }

    pub fn check(&self, name: &str) -> Option<&Hypothesis> {
        self.checks.iter().find(|h| h.name == name)
    }
}

/// How the admissible nonlinearity amplitude may behave in time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AmplitudeRegime {
    MustDecay,
    MayStayConstant,
    MayGrow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TwoComponentCase {
    /// `d0 c(Omega) > gamma0`: power decay.
    Decay,
    /// `d0 c(Omega) < gamma0`: boundedness only.
    Bounded,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StabilityCrossCheck {
    pub band: Option<(f64, f64)>,
    pub smallest_mode: f64,
    pub modes_in_band: usize,
    /// A decay case must have no admissible mode inside the instability band.
    pub consistent: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Certified {
    pub setting: Setting,
    pub problem: ScalarProblem,
    pub certificate: Certificate,
    pub report: HypothesisReport,
    /// `true` when `mu(t)` grows without bound, so the envelope forces decay.
    pub decay_certified: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub case: Option<TwoComponentCase>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub amplitude_regime: Option<AmplitudeRegime>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stability: Option<StabilityCrossCheck>,
}

/// `q = (p + 3)/4`, the exponent of the scalar inequality for growth exponent `p`.
pub fn inequality_exponent(p: f64) -> f64 {
    (p + 3.0) / 4.0
}

/// Dirichlet Poincare constant `(pi/L)^2`.
fn poincare(length: f64) -> f64 {
    (PI / length).powi(2)
}

fn check_common(p: f64, g0: f64, agmon: f64, horizon: f64) -> Result<()> {
    if !(p > 1.0) || !p.is_finite() {
        return Err(Error::invalid("p", format!("growth exponent must exceed 1, got {p}")));
    }
    if !(g0 >= 0.0) || !g0.is_finite() {
        return Err(Error::invalid("g0", format!("must be finite and >= 0, got {g0}")));
    }
    if g0 == 0.0 {
        return Err(Error::NotApplicable(
            "g(0) = 0: the solution is identically zero and needs no certificate".into(),
        ));
    }
    if !(agmon >= 0.0) || !agmon.is_finite() {
        return Err(Error::invalid("C", format!("must be finite and >= 0, got {agmon}")));
    }
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(Error::invalid("T", "horizon must be positive"));
    }
    Ok(())
}

fn positive(name: &'static str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::invalid(name, format!("must be positive, got {v}")))
    }
}

fn constant_check(name: &'static str, margin: f64, detail: String) -> Hypothesis {
    Hypothesis {
        name,
        required: true,
        pass: margin > 0.0,
        margin,
        t: None,
        detail,
    }
}

/// Evaluates `margin(t)` on the check grid; reports the first negative time or the worst one.
fn grid_check<F>(
    name: &'static str,
    required: bool,
    horizon: f64,
    opts: &CheckOptions,
    detail: String,
    margin: F,
) -> Result<Hypothesis>
where
    F: Fn(f64) -> Result<f64>,
{
    let n = opts.grid_points.max(2);
    let mut worst = (f64::INFINITY, 0.0);
    let mut first_bad = None;
    for j in 0..n {
        let t = horizon * j as f64 / (n - 1) as f64;
        let m = margin(t)?;
        if m < worst.0 {
            worst = (m, t);
        }
        if m < -opts.tol && first_bad.is_none() {
            first_bad = Some(t);
        }
    }
    Ok(Hypothesis {
        name,
        required,
        pass: first_bad.is_none(),
        margin: worst.0,
        t: Some(first_bad.unwrap_or(worst.1)),
        detail,
    })
}

/// Largest `s` such that `alpha = s C phi(t) shape(t)` keeps the certificate
/// residual non-negative at every check-grid point: the minimum over `t` of
/// `mu^(q-1)(sigma - mu'/mu) / (C phi shape)`.
pub fn max_admissible_amplitude(
    sigma: &TimeProfile,
    q: f64,
    cert: &Certificate,
    agmon: f64,
    phi: &TimeProfile,
    shape: &TimeProfile,
    horizon: f64,
    grid_points: usize,
) -> Result<f64> {
    let bare = ScalarProblem::new(sigma.clone(), TimeProfile::constant(0.0), q, 0.0)?;
    let n = grid_points.max(2);
    let mut best = f64::INFINITY;
    for j in 0..n {
        let t = horizon * j as f64 / (n - 1) as f64;
        let room = residual(&bare, cert, t)?;
        let weight = agmon * phi.eval(t)? * shape.eval(t)?;
        if weight > 0.0 {
            best = best.min(room / weight);
        } else if room < 0.0 {
            best = best.min(0.0);
        }
    }
    Ok(best.max(0.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExponentialDecayInputs {
    pub length: f64,
    pub d0: f64,
    /// Linear growth coefficient `A = a0`, so `gamma = -a0`.
    pub a0: f64,
    pub p: f64,
    pub g0: f64,
    pub c0: TimeProfile,
    pub agmon: f64,
    pub horizon: f64,
    pub check: CheckOptions,
}

/// Dirichlet problem with constant diffusion `d0` and constant linear rate
/// `a0`: requires `sigma0 = d0 (pi/L)^2 - a0 > 0`; certifies
/// `g(t) <= g0 exp(-sigma0 t / 2)` when
/// `C c0(t) <= (sigma0/2) g0^(1-q) exp((q-1) sigma0 t / 2)`.
pub fn exponential_decay_certificate(inp: &ExponentialDecayInputs) -> Result<Certified> {
    check_common(inp.p, inp.g0, inp.agmon, inp.horizon)?;
    positive("L", inp.length)?;
    positive("d0", inp.d0)?;
    let sigma0 = inp.d0 * poincare(inp.length) - inp.a0;
    if !(sigma0 > 0.0) {
        return Err(Error::NotApplicable(format!(
            "sigma0 = d0 (pi/L)^2 - a0 = {sigma0} is not positive (a0/d0 must stay below (pi/L)^2)"
        )));
    }
    let q = inequality_exponent(inp.p);
    let nu = 0.5 * sigma0;
    let certificate = Certificate::exponential(1.0 / inp.g0, nu)?;
    let problem = ScalarProblem::new(
        TimeProfile::constant(sigma0),
        inp.c0.clone().scaled(inp.agmon),
        q,
        inp.g0,
    )?;
    let amplitude = grid_check(
        "amplitude_bound",
        true,
        inp.horizon,
        &inp.check,
        "C c0(t) <= (sigma0/2) g0^(1-q) exp((q-1) sigma0 t/2)".into(),
        |t| Ok(nu * inp.g0.powf(1.0 - q) * ((q - 1.0) * nu * t).exp() - inp.agmon * inp.c0.eval(t)?),
    )?;
    let checks = vec![
        constant_check("decay_rate_positive", sigma0, format!("sigma0 = {sigma0}")),
        amplitude,
    ];
    let cert_report = check_certificate(&problem, &certificate, inp.horizon, &inp.check)?;
    Ok(Certified {
        setting: Setting::ExponentialDecay,
        report: HypothesisReport::new(checks, cert_report, inp.agmon),
        problem,
        certificate,
        decay_certified: true,
        case: None,
        amplitude_regime: None,
        stability: None,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerDecayInputs {
    pub length: f64,
    /// Diffusion `d0/(1+t)`.
    pub d0: f64,
    /// Linear growth `gamma0/(1+t)^k`.
    pub gamma0: f64,
    pub k: f64,
    pub m: f64,
    pub p: f64,
    pub g0: f64,
    pub c0: TimeProfile,
    pub agmon: f64,
    pub horizon: f64,
    pub check: CheckOptions,
}

/// `sigma(t) = c d0/(1+t) - gamma0/(1+t)^k` for the power-decay setting.
pub fn power_decay_sigma(length: f64, d0: f64, gamma0: f64, k: f64) -> TimeProfile {
    TimeProfile::sum(vec![
        TimeProfile::power_decay(poincare(length) * d0, 1.0),
        TimeProfile::power_decay(-gamma0, k),
    ])
}

/// Dirichlet problem with `d(t) = d0/(1+t)` and linear growth
/// `gamma0/(1+t)^k`, `k >= 1`: requires `c d0 > gamma0 + m`; certifies
/// `g(t) <= g0 (1+t)^-m`.
pub fn power_decay_certificate(inp: &PowerDecayInputs) -> Result<Certified> {
    check_common(inp.p, inp.g0, inp.agmon, inp.horizon)?;
    positive("L", inp.length)?;
    positive("d0", inp.d0)?;
    if !(inp.k >= 1.0) {
        return Err(Error::NotApplicable(format!("k = {} must be at least 1", inp.k)));
    }
    if !(inp.m >= 0.0) {
        return Err(Error::invalid("m", "must be >= 0"));
    }
    let cd0 = poincare(inp.length) * inp.d0;
    let margin = cd0 - inp.gamma0 - inp.m;
    if !(margin > 0.0) {
        return Err(Error::NotApplicable(format!(
            "c d0 = {cd0} does not exceed gamma0 + m = {}",
            inp.gamma0 + inp.m
        )));
    }
    let q = inequality_exponent(inp.p);
    let mu0 = 1.0 / inp.g0;
    let certificate = Certificate::power(mu0, inp.m)?;
    let sigma = power_decay_sigma(inp.length, inp.d0, inp.gamma0, inp.k);
    let problem = ScalarProblem::new(sigma, inp.c0.clone().scaled(inp.agmon), q, inp.g0)?;
    let amplitude = grid_check(
        "amplitude_bound",
        true,
        inp.horizon,
        &inp.check,
        "C c0(t) <= mu0^(q-1) (1+t)^(m(q-1)) (c d0/(1+t) - gamma0/(1+t)^k - m/(1+t))".into(),
        |t| {
            let s = 1.0 + t;
            let room = cd0 / s - inp.gamma0 * s.powf(-inp.k) - inp.m / s;
            Ok(mu0.powf(q - 1.0) * s.powf(inp.m * (q - 1.0)) * room - inp.agmon * inp.c0.eval(t)?)
        },
    )?;
    let exponent = inp.m * (q - 1.0);
    let regime = if (exponent - 1.0).abs() <= 1e-12 {
        AmplitudeRegime::MayStayConstant
    } else if exponent > 1.0 {
        AmplitudeRegime::MayGrow
    } else {
        AmplitudeRegime::MustDecay
    };
    let checks = vec![
        constant_check(
            "diffusion_dominates",
            margin,
            format!("c d0 - gamma0 - m = {margin}"),
        ),
        amplitude,
    ];
    let cert_report = check_certificate(&problem, &certificate, inp.horizon, &inp.check)?;
    Ok(Certified {
        setting: Setting::PowerDecay,
        report: HypothesisReport::new(checks, cert_report, inp.agmon),
        problem,
        certificate,
        decay_certified: inp.m > 0.0,
        case: None,
        amplitude_regime: Some(regime),
        stability: None,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct NeumannBoundedInputs {
    /// Linear growth `gamma0/(1+t)^k`; with Neumann ends `sigma = -gamma0/(1+t)^k`.
    pub gamma0: f64,
    pub k: f64,
    pub mu0: f64,
    pub mu1: f64,
    pub nu: f64,
    pub p: f64,
    pub g0: f64,
    pub c0: TimeProfile,
    pub agmon: f64,
    pub horizon: f64,
    pub check: CheckOptions,
}

/// Neumann problem with decaying linear growth: the decreasing certificate
/// `mu0 + mu1 (1+t)^-nu` (`mu0 + mu1 = 1/g0`) bounds `g` by `1/mu0` without
/// forcing decay. Requires `nu + 1 <= k`.
///
/// Two closed-form amplitude bounds are reported, neither required:
/// `C (1+t)^(nu+1) c0 <= mu0^(q-1) (nu mu1/mu0 - gamma0)` and the variant with
/// `nu mu1/(mu0 + mu1)`. Only the second implies the general condition,
/// because `mu(t)` ranges over `[mu0, mu0 + mu1]`; the verdict rests on the
/// direct certificate check.
pub fn neumann_bounded_certificate(inp: &NeumannBoundedInputs) -> Result<Certified> {
    check_common(inp.p, inp.g0, inp.agmon, inp.horizon)?;
    if !(inp.gamma0 >= 0.0) {
        return Err(Error::invalid("gamma0", "must be >= 0"));
    }
    positive("nu", inp.nu)?;
    if !(inp.nu + 1.0 <= inp.k) {
        return Err(Error::NotApplicable(format!(
            "nu + 1 = {} exceeds k = {}",
            inp.nu + 1.0,
            inp.k
        )));
    }
    let stated_room = inp.nu * inp.mu1 / inp.mu0 - inp.gamma0;
    if !(stated_room > 0.0) && !inp.c0.is_zero() {
        return Err(Error::NotApplicable(format!(
            "nu mu1/mu0 - gamma0 = {stated_room} leaves no room for a nonzero amplitude"
        )));
    }
    let q = inequality_exponent(inp.p);
    let certificate = Certificate::bounded(inp.mu0, inp.mu1, inp.nu)?;
    let sigma = TimeProfile::power_decay(-inp.gamma0, inp.k);
    let problem = ScalarProblem::new(sigma, inp.c0.clone().scaled(inp.agmon), q, inp.g0)?;
    let lhs = |t: f64| -> Result<f64> { Ok(inp.agmon * (1.0 + t).powf(inp.nu + 1.0) * inp.c0.eval(t)?) };
    let stated = grid_check(
        "stated_amplitude_bound",
        false,
        inp.horizon,
        &inp.check,
        "C (1+t)^(nu+1) c0(t) <= mu0^(q-1) (nu mu1/mu0 - gamma0)".into(),
        |t| Ok(inp.mu0.powf(q - 1.0) * stated_room - lhs(t)?),
    )?;
    let sufficient_room = inp.nu * inp.mu1 / (inp.mu0 + inp.mu1) - inp.gamma0;
    let sufficient = grid_check(
        "sufficient_amplitude_bound",
        false,
        inp.horizon,
        &inp.check,
        "C (1+t)^(nu+1) c0(t) <= mu0^(q-1) (nu mu1/(mu0+mu1) - gamma0)".into(),
        |t| Ok(inp.mu0.powf(q - 1.0) * sufficient_room - lhs(t)?),
    )?;
    let checks = vec![
        constant_check(
            "decay_exponent_order",
            inp.k - inp.nu - 1.0 + f64::MIN_POSITIVE,
            format!("k - (nu + 1) = {}", inp.k - inp.nu - 1.0),
        ),
        stated,
        sufficient,
    ];
    let cert_report = check_certificate(&problem, &certificate, inp.horizon, &inp.check)?;
    Ok(Certified {
        setting: Setting::NeumannBounded,
        report: HypothesisReport::new(checks, cert_report, inp.agmon),
        problem,
        certificate,
        decay_certified: false,
        case: None,
        amplitude_regime: None,
        stability: None,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwoComponentInputs {
    pub length: f64,
    pub kinetics: Mat2,
    pub d1: f64,
    pub d2: f64,
    /// Modulation `phi(t)` multiplying both diffusion and reaction.
    pub phi: TimeProfile,
    /// Power exponent for the decay case.
    pub m: f64,
    /// `mu1/mu0` and `nu` for the bounded case.
    pub mu_ratio: f64,
    pub nu: f64,
    pub p: f64,
    pub g0: f64,
    pub c0: TimeProfile,
    pub agmon: f64,
    pub horizon: f64,
    pub check: CheckOptions,
}

/// Effective `(d0, gamma0, d0 c - gamma0)` of a two-component Dirichlet setting.
pub fn two_component_rates(length: f64, kinetics: &Mat2, d1: f64, d2: f64) -> (f64, f64, f64) {
    let d0 = d1.min(d2);
    let g = gamma0_quadratic_bound(kinetics.a, kinetics.b, kinetics.c, kinetics.d).gamma0;
    (d0, g, d0 * poincare(length) - g)
}

/// Selects the case from the sign of `d0 c - gamma0` (`d0 = min(d1, d2)`,
/// `gamma0` the quadratic-form bound of the kinetics), with
/// `sigma(t) = phi(t)(d0 c - gamma0)` and `alpha(t) = C phi(t) c0(t)`.
/// The decay case uses `mu0 (1+t)^m`, `mu0 = 1/g0`; for `phi = phi0/(1+t)`
/// it requires `phi0 (d0 c - gamma0) > m`. The bounded case uses
/// `mu0 + mu1 (1+t)^-nu` with `mu0 + mu1 = 1/g0`.
pub fn two_component_certificate(inp: &TwoComponentInputs) -> Result<Certified> {
    check_common(inp.p, inp.g0, inp.agmon, inp.horizon)?;
    positive("L", inp.length)?;
    let lin = Linearization2::new(inp.kinetics, inp.d1, inp.d2)?;
    let (d0, gamma0, diff) = two_component_rates(inp.length, &inp.kinetics, inp.d1, inp.d2);
    let scale = (d0 * poincare(inp.length)).abs().max(gamma0.abs()).max(1.0);
    if diff.abs() <= 1e-12 * scale {
        return Err(Error::NotApplicable(
            "d0 c = gamma0: boundary case, neither decay nor boundedness is decided".into(),
        ));
    }
    let q = inequality_exponent(inp.p);
    let sigma = TimeProfile::product(vec![inp.phi.clone(), TimeProfile::constant(diff)]);
    let alpha = TimeProfile::product(vec![inp.phi.clone(), inp.c0.clone(), TimeProfile::constant(inp.agmon)]);
    let problem = ScalarProblem::new(sigma, alpha, q, inp.g0)?;
    let quad = gamma0_quadratic_bound(inp.kinetics.a, inp.kinetics.b, inp.kinetics.c, inp.kinetics.d);
    let mut checks = vec![Hypothesis {
        name: "cross_term_bound",
        required: false,
        pass: quad.derivation_valid,
        margin: inp.kinetics.b + inp.kinetics.c,
        t: None,
        detail: format!("gamma0 = {gamma0}; b + c >= 0 needed for the cross-term estimate"),
    }];

    let (case, certificate) = if diff > 0.0 {
        if !(inp.m >= 0.0) {
            return Err(Error::invalid("m", "must be >= 0"));
        }
        let phi_form = matches!(
            inp.phi,
            TimeProfile::PowerDecay { exponent, offset, .. } if exponent == 1.0 && offset == 0.0
        );
        let phi0 = inp.phi.eval(0.0)?;
        checks.push(Hypothesis {
            name: "modulated_rate_exceeds_m",
            required: phi_form,
            pass: phi0 * diff > inp.m,
            margin: phi0 * diff - inp.m,
            t: None,
            detail: format!("phi0 (d0 c - gamma0) = {} vs m = {}", phi0 * diff, inp.m),
        });
        (TwoComponentCase::Decay, Certificate::power(1.0 / inp.g0, inp.m)?)
    } else {
        positive("mu_ratio", inp.mu_ratio)?;
        let mu0 = 1.0 / (inp.g0 * (1.0 + inp.mu_ratio));
        (
            TwoComponentCase::Bounded,
            Certificate::bounded(mu0, inp.mu_ratio * mu0, inp.nu)?,
        )
    };

    let scan = dispersion_scan(&lin, default_k_max(&lin, inp.length), 2000, Some(inp.length))?;
    let modes_in_band = scan.modes.iter().filter(|m| m.in_band).count();
    let stability = StabilityCrossCheck {
        band: scan.band,
        smallest_mode: PI / inp.length,
        modes_in_band,
        consistent: case == TwoComponentCase::Bounded || modes_in_band == 0,
    };
    let cert_report = check_certificate(&problem, &certificate, inp.horizon, &inp.check)?;
    Ok(Certified {
        setting: Setting::TwoComponent,
        report: HypothesisReport::new(checks, cert_report, inp.agmon),
        problem,
        certificate,
        decay_certified: case == TwoComponentCase::Decay && inp.m > 0.0,
        case: Some(case),
        amplitude_regime: None,
        stability: Some(stability),
    })
}
