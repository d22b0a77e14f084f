//! End-to-end verification of a certificate against a simulated trajectory.
//!
//! 1. Build the PDE system of the setting.
//! 2. Measure the aggregate constant `C` on a pilot run without the
//!    nonlinearity (unless `C` is supplied).
//! 3. Choose the nonlinearity amplitude, construct the certificate and check
//!    its hypotheses.
//! 4. Simulate with the nonlinearity and verify the envelope `g <= 1/mu`,
//!    the pointwise a-priori bound, and that the run's own `C` does not
//!    exceed the one the certificate used.

use serde::Serialize;

use super::{
    exponential_decay_certificate, inequality_exponent, max_admissible_amplitude, neumann_bounded_certificate,
    power_decay_certificate, two_component_certificate, AmplitudeRegime, Certified, ExponentialDecayInputs,
    HypothesisReport, NeumannBoundedInputs, PowerDecayInputs, Setting, StabilityCrossCheck, TwoComponentCase,
    TwoComponentInputs,
};
use crate::apriori::{
    agmon_aggregate, build_constant_upper_solution, paraboloid_for_range, paraboloid_for_system, trajectory_range,
    verify_pointwise_bound, AgmonAggregate,
    UpperSolution,
};
use crate::error::{Error, Result};
use crate::grid::{discrete_norms, BoundaryCondition, Grid1D};
use crate::inequality::{verify_envelope, ScalarProblem, Certificate, CertificateFamily, CheckOptions, EnvelopeViolation};
use crate::profiles::{KineticsSpec, LinearPart, TimeProfile};
use crate::solver::{default_record_every, simulate, InitialCondition, SimOptions, SystemSpec, Trajectory};
use crate::stability::Mat2;

#[derive(Debug, Clone, PartialEq)]
pub enum Scenario {
    /// Dirichlet, constant diffusion `d0`, linear rate `a0`.
    ExponentialDecay { length: f64, d0: f64, a0: f64 },
    /// Dirichlet, diffusion `d0/(1+t)`, linear rate `gamma0/(1+t)^k`, envelope `(1+t)^-m`.
    PowerDecay {
        length: f64,
        d0: f64,
        gamma0: f64,
        k: f64,
        m: f64,
    },
    /// Neumann, constant diffusion, linear rate `gamma0/(1+t)^k`,
    /// certificate `mu0 + mu1 (1+t)^-nu` with `mu1 = mu_ratio mu0`.
    NeumannBounded {
        length: f64,
        diffusion: f64,
        gamma0: f64,
        k: f64,
        nu: f64,
        mu_ratio: f64,
    },
    /// Dirichlet 2x2 kinetics modulated by `phi(t)`.
    TwoComponent {
        length: f64,
        kinetics: Mat2,
        d1: f64,
        d2: f64,
        phi: TimeProfile,
        m: f64,
        nu: f64,
        mu_ratio: f64,
    },
}

impl Scenario {
    pub fn setting(&self) -> Setting {
        match self {
            Scenario::ExponentialDecay { .. } => Setting::ExponentialDecay,
            Scenario::PowerDecay { .. } => Setting::PowerDecay,
            Scenario::NeumannBounded { .. } => Setting::NeumannBounded,
            Scenario::TwoComponent { .. } => Setting::TwoComponent,
        }
    }

    pub fn n_components(&self) -> usize {
        match self {
            Scenario::TwoComponent { .. } => 2,
            _ => 1,
        }
    }

    pub fn grid(&self, n_nodes: usize) -> Result<Grid1D> {
        match *self {
            Scenario::ExponentialDecay { length, .. }
            | Scenario::PowerDecay { length, .. }
            | Scenario::TwoComponent { length, .. } => Grid1D::new(length, n_nodes, BoundaryCondition::Dirichlet),
            Scenario::NeumannBounded { length, .. } => Grid1D::new(length, n_nodes, BoundaryCondition::Neumann),
        }
    }

    /// Time dependence of the nonlinearity amplitude when it is chosen as a
    /// fraction of the admissible maximum.
    pub fn amplitude_shape(&self, p: f64) -> TimeProfile {
        let q = inequality_exponent(p);
        match *self {
            Scenario::ExponentialDecay { .. } | Scenario::TwoComponent { .. } => TimeProfile::constant(1.0),
            Scenario::PowerDecay { m, .. } => TimeProfile::power_growth(1.0, m * (q - 1.0) - 1.0),
            Scenario::NeumannBounded { nu, .. } => TimeProfile::power_decay(1.0, nu + 1.0),
        }
    }

    fn modulation(&self) -> TimeProfile {
        match self {
            Scenario::TwoComponent { phi, .. } => phi.clone(),
            _ => TimeProfile::constant(1.0),
        }
    }

    pub fn system(&self, p: f64, c0: TimeProfile, initial: &InitialCondition, n_nodes: usize) -> Result<SystemSpec> {
        let grid = self.grid(n_nodes)?;
        let field = initial.build(&grid, self.n_components())?;
        let (kinetics, diffusion) = match self {
            Scenario::ExponentialDecay { d0, a0, .. } => (
                KineticsSpec::linear(1, LinearPart::Scalar(TimeProfile::constant(*a0))),
                vec![TimeProfile::constant(*d0)],
            ),
            Scenario::PowerDecay { d0, gamma0, k, .. } => (
                KineticsSpec::linear(1, LinearPart::Scalar(TimeProfile::power_decay(*gamma0, *k))),
                vec![TimeProfile::power_decay(*d0, 1.0)],
            ),
            Scenario::NeumannBounded {
                diffusion, gamma0, k, ..
            } => (
                KineticsSpec::linear(1, LinearPart::Scalar(TimeProfile::power_decay(*gamma0, *k))),
                vec![TimeProfile::constant(*diffusion)],
            ),
            Scenario::TwoComponent {
                kinetics, d1, d2, phi, ..
            } => (
                KineticsSpec::linear(2, LinearPart::Matrix(*kinetics)).with_modulation(phi.clone()),
                vec![TimeProfile::constant(*d1), TimeProfile::constant(*d2)],
            ),
        };
        Ok(SystemSpec::new(kinetics.with_saturated_power(c0, p), diffusion, field)?.with_seed(initial.seed()))
    }

    /// Constructs and checks the certificate for initial norm `g0`.
    pub fn certify(&self, p: f64, g0: f64, c0: TimeProfile, agmon: f64, horizon: f64, check: CheckOptions) -> Result<Certified> {
        match self.clone() {
            Scenario::ExponentialDecay { length, d0, a0 } => exponential_decay_certificate(&ExponentialDecayInputs {
                length,
                d0,
                a0,
                p,
                g0,
                c0,
                agmon,
                horizon,
                check,
            }),
            Scenario::PowerDecay {
                length,
                d0,
                gamma0,
                k,
                m,
            } => power_decay_certificate(&PowerDecayInputs {
                length,
                d0,
                gamma0,
                k,
                m,
                p,
                g0,
                c0,
                agmon,
                horizon,
                check,
            }),
            Scenario::NeumannBounded {
                gamma0,
                k,
                nu,
                mu_ratio,
                ..
            } => {
                if !(mu_ratio > 0.0) {
                    return Err(Error::invalid("mu_ratio", "must be positive"));
                }
                let mu0 = 1.0 / (g0 * (1.0 + mu_ratio));
                neumann_bounded_certificate(&NeumannBoundedInputs {
                    gamma0,
                    k,
                    mu0,
                    mu1: mu_ratio * mu0,
                    nu,
                    p,
                    g0,
                    c0,
                    agmon,
                    horizon,
                    check,
                })
            }
            Scenario::TwoComponent {
                length,
                kinetics,
                d1,
                d2,
                phi,
                m,
                nu,
                mu_ratio,
            } => two_component_certificate(&TwoComponentInputs {
                length,
                kinetics,
                d1,
                d2,
                phi,
                m,
                mu_ratio,
                nu,
                p,
                g0,
                c0,
                agmon,
                horizon,
                check,
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Amplitude {
    /// `c0(t) = fraction * s_max * shape(t)` with `s_max` the largest admissible scale.
    Fraction(f64),
    Profile(TimeProfile),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub scenario: Scenario,
    pub p: f64,
    pub amplitude: Amplitude,
    pub initial: InitialCondition,
    pub n_nodes: usize,
    pub horizon: f64,
    pub dt: Option<f64>,
    pub record_every: Option<usize>,
    /// Supplied aggregate constant; measured on a pilot run when absent.
    pub agmon: Option<f64>,
    pub slack: f64,
    pub check: CheckOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AgmonUsed {
    pub value: f64,
    /// Measured on a pilot run rather than supplied.
    pub empirical: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pilot: Option<AgmonAggregate>,
    /// Aggregate measured on the verified run itself.
    pub run: AgmonAggregate,
    /// The run's aggregate does not exceed the one the certificate used.
    pub consistent: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointwiseSummary {
    pub upper: UpperSolution,
    /// Paraboloid only: `M1` covers the paraboloid's own range.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub self_consistent: Option<bool>,
    /// Set when `M1` was taken over the range the trajectory attained,
    /// because no self-consistent a priori level exists.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub observed_range: Option<f64>,
    pub violations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineReport {
    pub setting: Setting,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub case: Option<TwoComponentCase>,
    pub hypotheses: HypothesisReport,
    pub certificate: Certificate,
    pub decay_certified: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub amplitude_regime: Option<AmplitudeRegime>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stability: Option<StabilityCrossCheck>,
    pub c0: TimeProfile,
    pub agmon: AgmonUsed,
    pub g0: f64,
    pub horizon: f64,
    pub dt: f64,
    pub n_nodes: usize,
    pub slack: f64,
    pub envelope_verified: bool,
    /// `max_t g(t) mu(t)`.
    pub worst_ratio: f64,
    pub worst_ratio_time: f64,
    pub envelope_violations: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub first_violation: Option<EnvelopeViolation>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub blow_up: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pointwise: Option<PointwiseSummary>,
    /// Bounded certificates: `g(T) mu0`, the final norm relative to the limiting bound `1/mu0`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub persistence: Option<f64>,
}

impl PipelineReport {
    pub fn hypotheses_pass(&self) -> bool {
        self.hypotheses.pass
    }

    pub fn pointwise_verified(&self) -> bool {
        self.pointwise.as_ref().is_none_or(|p| p.violations == 0)
    }
}

#[derive(Debug, Clone)]
pub struct PipelineOutcome {
    pub report: PipelineReport,
    /// The scalar inequality the certificate was checked against.
    pub problem: ScalarProblem,
    pub system: SystemSpec,
    pub trajectory: Option<Trajectory>,
}

fn sim_options(cfg: &PipelineConfig, grid: &Grid1D) -> SimOptions {
    let mut opts = SimOptions::with_defaults(grid, cfg.horizon);
    if let Some(dt) = cfg.dt {
        opts.dt = dt;
        opts.record_every = default_record_every(cfg.horizon, dt);
    }
    if let Some(r) = cfg.record_every {
        opts.record_every = r;
    }
    opts
}

pub fn run_pipeline(cfg: &PipelineConfig) -> Result<PipelineOutcome> {
    if !(cfg.slack >= 0.0) {
        return Err(Error::invalid("slack", "must be >= 0"));
    }
    let zero = TimeProfile::constant(0.0);
    let pilot_sys = cfg.scenario.system(cfg.p, zero.clone(), &cfg.initial, cfg.n_nodes)?;
    let opts = sim_options(cfg, pilot_sys.grid());
    let g0 = discrete_norms(&pilot_sys.initial).l2;

    let (agmon, pilot) = match cfg.agmon {
        Some(c) => (c, None),
        None => {
            let traj = simulate(&pilot_sys, &opts)?;
            let agg = agmon_aggregate(&traj, cfg.p)?;
            (agg.value, Some(agg))
        }
    };

    let c0 = match &cfg.amplitude {
        Amplitude::Profile(p) => p.clone(),
        Amplitude::Fraction(frac) => {
            if !(*frac >= 0.0) {
                return Err(Error::invalid("fraction", "must be >= 0"));
            }
            let bare = cfg.scenario.certify(cfg.p, g0, zero.clone(), agmon, cfg.horizon, cfg.check)?;
            let shape = cfg.scenario.amplitude_shape(cfg.p);
            let scale = max_admissible_amplitude(
                &bare.problem.sigma,
                bare.problem.q,
                &bare.certificate,
                agmon,
                &cfg.scenario.modulation(),
                &shape,
                cfg.horizon,
                cfg.check.grid_points,
            )?;
            if scale.is_finite() {
                shape.scaled(frac * scale)
            } else {
                zero.clone()
            }
        }
    };
    let certified = cfg.scenario.certify(cfg.p, g0, c0.clone(), agmon, cfg.horizon, cfg.check)?;
    let sys = cfg.scenario.system(cfg.p, c0.clone(), &cfg.initial, cfg.n_nodes)?;

    let (trajectory, blow_up) = match simulate(&sys, &opts) {
        Ok(t) => (Some(t), None),
        Err(Error::BlowUp { time }) => (None, Some(time)),
        Err(e) => return Err(e),
    };

    let mut worst = (0.0, 0.0);
    let mut violations = Vec::new();
    let mut persistence = None;
    let mut pointwise = None;
    let mut run_agmon = AgmonAggregate {
        c_hat: 0.0,
        m2_hat: 0.0,
        p: cfg.p,
        value: 0.0,
        horizon: 0.0,
    };
    if let Some(traj) = &trajectory {
        let g = traj.g();
        violations = verify_envelope(&traj.times, &g, &certified.certificate, cfg.slack)?;
        for (t, gv) in traj.times.iter().zip(&g) {
            let r = gv * certified.certificate.mu(*t)?;
            if r > worst.0 {
                worst = (r, *t);
            }
        }
        if let CertificateFamily::Bounded { mu0, .. } = certified.certificate.family {
            persistence = g.last().map(|gt| gt * mu0);
        }
        if g0 > 0.0 {
            run_agmon = agmon_aggregate(traj, cfg.p)?;
        }
        pointwise = pointwise_summary(&sys, traj, cfg.horizon)?;
    }
    let consistent = run_agmon.value <= agmon * (1.0 + 1e-9);

    let problem = certified.problem;
    let report = PipelineReport {
        setting: certified.setting,
        case: certified.case,
        hypotheses: certified.report,
        certificate: certified.certificate,
        decay_certified: certified.decay_certified,
        amplitude_regime: certified.amplitude_regime,
        stability: certified.stability,
        c0,
        agmon: AgmonUsed {
            value: agmon,
            empirical: pilot.is_some(),
            pilot,
            run: run_agmon,
            consistent,
        },
        g0,
        horizon: cfg.horizon,
        dt: trajectory.as_ref().map_or(opts.dt, |t| t.dt),
        n_nodes: cfg.n_nodes,
        slack: cfg.slack,
        envelope_verified: blow_up.is_none() && violations.is_empty(),
        worst_ratio: worst.0,
        worst_ratio_time: worst.1,
        envelope_violations: violations.len(),
        first_violation: violations.first().copied(),
        blow_up,
        pointwise,
        persistence,
    };
    Ok(PipelineOutcome {
        report,
        problem,
        system: sys,
        trajectory,
    })
}

fn pointwise_summary(sys: &SystemSpec, traj: &Trajectory, horizon: f64) -> Result<Option<PointwiseSummary>> {
    let (upper, self_consistent, observed_range) = match sys.grid().bc() {
        BoundaryCondition::Dirichlet => match paraboloid_for_system(sys, horizon) {
            Ok(p) if p.self_consistent => (p.upper, Some(true), None),
            Ok(_) | Err(Error::NotApplicable(_)) => {
                let r = trajectory_range(traj);
                (paraboloid_for_range(sys, r, horizon)?, Some(false), Some(r))
            }
            Err(e) => return Err(e),
        },
        BoundaryCondition::Neumann => {
            match build_constant_upper_solution(&sys.kinetics, horizon, &sys.grid().nodes(), &sys.initial) {
                Ok(us) => (us, None, None),
                Err(Error::NotApplicable(_)) => return Ok(None),
                Err(e) => return Err(e),
            }
        }
    };
    let violations = verify_pointwise_bound(traj, &upper, None).len();
    Ok(Some(PointwiseSummary {
        upper,
        self_consistent,
        observed_range,
        violations,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(scenario: Scenario, horizon: f64, initial: InitialCondition) -> PipelineConfig {
        PipelineConfig {
            scenario,
            p: 2.0,
            amplitude: Amplitude::Fraction(0.5),
            initial,
            n_nodes: 48,
            horizon,
            dt: Some(2e-3),
            record_every: Some(50),
            agmon: None,
            slack: 0.02,
            check: CheckOptions {
                grid_points: 2000,
                tol: 0.0,
            },
        }
    }

    #[test]
    fn exponential_pipeline_verifies_envelope() {
        let cfg = config(
            Scenario::ExponentialDecay {
                length: 1.0,
                d0: 0.5,
                a0: 1.0,
            },
            5.0,
            InitialCondition::Mode { n: 1, amp: 0.2 },
        );
        let out = run_pipeline(&cfg).unwrap();
        let r = &out.report;
        assert!(r.hypotheses_pass(), "{:?}", r.hypotheses);
        assert!(r.envelope_verified, "worst ratio {}", r.worst_ratio);
        assert!(r.agmon.empirical && r.agmon.consistent);
        assert!(r.pointwise_verified());
        assert!(r.worst_ratio <= 1.0 + 1e-9);
    }

    #[test]
    fn neumann_pipeline_stays_bounded_without_decay() {
        let cfg = config(
            Scenario::NeumannBounded {
                length: 1.0,
                diffusion: 0.1,
                gamma0: 0.1,
                k: 2.0,
                nu: 1.0,
                mu_ratio: 1.0,
            },
            10.0,
            InitialCondition::Mode { n: 0, amp: 0.05 },
        );
        let out = run_pipeline(&cfg).unwrap();
        let r = &out.report;
        assert!(r.hypotheses_pass(), "{:?}", r.hypotheses);
        assert!(r.envelope_verified);
        assert!(!r.decay_certified);
        assert!(r.persistence.unwrap() > 0.1);
    }

    #[test]
    fn reports_are_deterministic() {
        let cfg = config(
            Scenario::ExponentialDecay {
                length: 1.0,
                d0: 0.5,
                a0: 1.0,
            },
            1.0,
            InitialCondition::Noise { eps: 0.05, seed: 3 },
        );
        let a = run_pipeline(&cfg).unwrap().report;
        let b = run_pipeline(&cfg).unwrap().report;
        assert_eq!(a, b);
    }
}
