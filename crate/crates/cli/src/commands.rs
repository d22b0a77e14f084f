use std::path::Path;

use anyhow::{anyhow, bail, Result};
use serde::Serialize;
use serde_json::json;

use rdcert::apriori::{
    agmon_aggregate, build_constant_upper_solution, estimate_agmon_constant, h2_monitor, paraboloid_for_range,
    paraboloid_for_system, trajectory_range, verify_pointwise_bound, UpperSolution,
};
use rdcert::certificates::pipeline::{run_pipeline, Amplitude, PipelineConfig, PipelineReport, Scenario};
use rdcert::grid::BoundaryCondition;
use rdcert::inequality::{
    check_certificate, residual, Certificate, CheckOptions, ScalarProblem, DEFAULT_ENVELOPE_SLACK,
    DEFAULT_GRID_POINTS,
};
use rdcert::profiles::{KineticsSpec, LinearPart, TimeProfile};
use rdcert::solver::{
    convergence_order, default_record_every, heat_mms, simulate, Refinement, Scheme, SimOptions, SystemSpec,
    Trajectory,
};
use rdcert::stability::{
    critical_d1, default_k_max, dispersion_scan, growth_rate_experiment, instability_band, turing_conditions,
    GrowthRateParams, Linearization2,
};

use crate::config::{Config, ConfigError};
use crate::output::{line_plot, write_csv, write_json, write_plot, write_snapshots, Series};

/// Process exit status of a completed run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    HypothesesFailed,
    Violated,
}

impl Verdict {
    pub fn code(self) -> u8 {
        match self {
            Verdict::Pass => 0,
            Verdict::HypothesesFailed => 2,
            Verdict::Violated => 3,
        }
    }
}

pub struct Ctx<'a> {
    pub cfg: &'a Config,
    pub out: &'a Path,
    pub plots: bool,
    pub seed: Option<u64>,
    pub grid_points: Option<usize>,
}

fn config_err(e: rdcert::Error, section: &str) -> anyhow::Error {
    match e {
        rdcert::Error::InvalidParameter { name, reason } => ConfigError(format!("[{section}].{name}: {reason}")).into(),
        other => other.into(),
    }
}

/// Builds the general system from `[domain]`, `[kinetics]`, `[diffusion]`, `[modulation]`, `[run]`.
fn build_system(ctx: &Ctx) -> Result<(SystemSpec, SimOptions, f64)> {
    let cfg = ctx.cfg;
    let matrix = cfg.matrix()?;
    let linear_profile = cfg.profile("kinetics", "")?;
    let (nc, linear) = match (matrix, linear_profile) {
        (Some(_), Some(_)) => bail!(ConfigError(
            "[kinetics]: give either matrix or a scalar rate profile, not both".into()
        )),
        (Some(m), None) => (2, LinearPart::Matrix(m)),
        (None, Some(p)) => (1, LinearPart::Scalar(p)),
        (None, None) => (1, LinearPart::None),
    };
    let grid = cfg.grid()?;
    let p = cfg.f64_or("kinetics", "p", 2.0)?;
    let mut kin = KineticsSpec::linear(nc, linear);
    if let Some(c0) = cfg.profile("kinetics", "c0_")? {
        kin = kin.with_saturated_power(c0, p);
    }
    if let Some(phi) = cfg.profile("modulation", "")? {
        kin = kin.with_modulation(phi);
    }
    kin.lipschitz_cf = cfg.f64_opt("kinetics", "lipschitz_cf")?;
    kin.validate().map_err(|e| config_err(e, "kinetics"))?;
    let diffusion = cfg.diffusion(nc)?;
    let initial = cfg.initial(&grid, nc, ctx.seed)?;
    let field = initial.build(&grid, nc).map_err(|e| config_err(e, "run"))?;
    let sys = SystemSpec::new(kin, diffusion, field)
        .map_err(|e| config_err(e, "kinetics"))?
        .with_seed(initial.seed());
    let opts = sim_options(cfg, &grid)?;
    Ok((sys, opts, p))
}

fn sim_options(cfg: &Config, grid: &rdcert::grid::Grid1D) -> Result<SimOptions> {
    let t_end = cfg.positive("run", "T")?;
    let mut opts = SimOptions::with_defaults(grid, t_end);
    if let Some(dt) = cfg.f64_opt("run", "dt")? {
        if !(dt > 0.0) {
            bail!(ConfigError(format!("[run].dt must be positive, got {dt}")));
        }
        opts.dt = dt;
        opts.record_every = default_record_every(t_end, dt);
    }
    if let Some(r) = cfg.usize_opt("run", "record_every")? {
        if r == 0 {
            bail!(ConfigError("[run].record_every must be at least 1".into()));
        }
        opts.record_every = r;
    }
    opts.scheme = cfg.scheme()?;
    Ok(opts)
}

fn write_norm_series(out: &Path, traj: &Trajectory) -> Result<()> {
    write_csv(
        &out.join("series.csv"),
        &["t", "g", "sup", "h1_semi", "h2"],
        traj.times
            .iter()
            .zip(&traj.norms)
            .map(|(t, n)| vec![*t, n.l2, n.sup, n.h1_semi, n.h2]),
    )
}

fn g_plot(traj: &Trajectory, envelope: Option<Vec<(f64, f64)>>) -> String {
    let mut series = vec![Series {
        label: "g(t)",
        points: traj.times.iter().copied().zip(traj.g()).collect(),
    }];
    if let Some(env) = envelope {
        series.push(Series {
            label: "1/mu(t)",
            points: env,
        });
    }
    line_plot("L2 norm", "t", "g", &series, true)
}

pub fn simulate_cmd(ctx: &Ctx) -> Result<Verdict> {
    let (sys, opts, _) = build_system(ctx)?;
    let traj = match simulate(&sys, &opts) {
        Ok(t) => t,
        Err(rdcert::Error::BlowUp { time }) => {
            write_json(&ctx.out.join("report.json"), &json!({ "blow_up": time }))?;
            eprintln!("solution blew up at t = {time}");
            return Ok(Verdict::Violated);
        }
        Err(e) => return Err(config_err(e, "run")),
    };
    write_norm_series(ctx.out, &traj)?;
    write_snapshots(ctx.out, &traj.snapshots)?;
    let last = traj.norms.last().copied().unwrap_or_default();
    let report = json!({
        "n_components": sys.n_components(),
        "n_nodes": sys.grid().n_nodes(),
        "bc": sys.grid().bc(),
        "t_end": opts.t_end,
        "dt": traj.dt,
        "steps": traj.times.len() - 1,
        "record_every": opts.record_every,
        "scheme": traj.scheme,
        "seed": traj.seed,
        "snapshots": traj.snapshots.len(),
        "final": last,
        "g_max": traj.g().into_iter().fold(0.0, f64::max),
        "h2_max": h2_monitor(&traj),
    });
    write_json(&ctx.out.join("report.json"), &report)?;
    if ctx.plots {
        write_plot(ctx.out, "g.svg", &g_plot(&traj, None))?;
    }
    Ok(Verdict::Pass)
}

pub fn estimate_constants_cmd(ctx: &Ctx) -> Result<Verdict> {
    let (sys, opts, p) = build_system(ctx)?;
    let traj = simulate(&sys, &opts).map_err(|e| config_err(e, "run"))?;
    let agg = agmon_aggregate(&traj, p)?;
    let (upper, self_consistent, observed_range) = match sys.grid().bc() {
        BoundaryCondition::Dirichlet => match paraboloid_for_system(&sys, opts.t_end) {
            Ok(c) if c.self_consistent => (Some(c.upper), Some(true), None),
            Ok(_) | Err(rdcert::Error::NotApplicable(_)) => {
                let r = trajectory_range(&traj);
                (Some(paraboloid_for_range(&sys, r, opts.t_end)?), Some(false), Some(r))
            }
            Err(e) => return Err(e.into()),
        },
        BoundaryCondition::Neumann => {
            match build_constant_upper_solution(&sys.kinetics, opts.t_end, &sys.grid().nodes(), &sys.initial) {
                Ok(u) => (Some(u), None, None),
                Err(rdcert::Error::NotApplicable(msg)) => {
                    eprintln!("no constant upper solution: {msg}");
                    (None, None, None)
                }
                Err(e) => return Err(e.into()),
            }
        }
    };
    let violations = upper
        .as_ref()
        .map(|u: &UpperSolution| verify_pointwise_bound(&traj, u, None));
    let report = json!({
        "M2_hat": agg.m2_hat,
        "c_hat": agg.c_hat,
        "C": agg.value,
        "p": p,
        "horizon": agg.horizon,
        "agmon_constant": estimate_agmon_constant(&traj)?,
        "upper_solution": upper,
        "self_consistent": self_consistent,
        "observed_range": observed_range,
        "pointwise_violations": violations.as_ref().map(Vec::len),
        "first_pointwise_violation": violations.as_ref().and_then(|v| v.first().cloned()),
    });
    write_json(&ctx.out.join("report.json"), &report)?;
    write_norm_series(ctx.out, &traj)?;
    Ok(match violations {
        Some(v) if !v.is_empty() => Verdict::Violated,
        _ => Verdict::Pass,
    })
}

fn two_component_linearization(cfg: &Config) -> Result<Linearization2> {
    let m = cfg
        .matrix()?
        .ok_or_else(|| ConfigError("missing key [kinetics].matrix".into()))?;
    let d = cfg.diffusion(2)?;
    let (d1, d2) = (constant_value(&d[0], "diffusion")?, constant_value(&d[1], "diffusion")?);
    Linearization2::new(m, d1, d2).map_err(|e| config_err(e, "diffusion"))
}

fn constant_value(p: &TimeProfile, section: &str) -> Result<f64> {
    match p {
        TimeProfile::Constant { v0 } => Ok(*v0),
        _ => bail!(ConfigError(format!("[{section}].kind must be constant here"))),
    }
}

pub fn analyze_dispersion_cmd(ctx: &Ctx) -> Result<Verdict> {
    let cfg = ctx.cfg;
    let lin = two_component_linearization(cfg)?;
    let length = cfg.f64_opt("domain", "L")?;
    if let Some(l) = length {
        if !(l > 0.0) {
            bail!(ConfigError(format!("[domain].L must be positive, got {l}")));
        }
    }
    let k_max = match cfg.f64_opt("dispersion", "k_max")? {
        Some(k) => k,
        None => match length {
            Some(l) => default_k_max(&lin, l),
            None => 2.0 * instability_band(&lin).map_or(10.0, |b| b.1.max(5.0)),
        },
    };
    let samples = cfg.usize_opt("dispersion", "samples")?.unwrap_or(400);
    let scan = dispersion_scan(&lin, k_max, samples, length).map_err(|e| config_err(e, "dispersion"))?;
    let conditions = turing_conditions(&lin);
    let crit = if scan.k_at_max_growth > 0.0 {
        Some(critical_d1(&lin.kinetics(), lin.d2, scan.k_at_max_growth)?)
    } else {
        None
    };
    let mut growth = Vec::new();
    if let Some(list) = cfg.raw("dispersion", "growth_modes") {
        let Some(l) = length else {
            bail!(ConfigError("[dispersion].growth_modes needs [domain].L".into()));
        };
        for s in list.split(',') {
            let n = s.trim().parse::<usize>().map_err(|_| {
                ConfigError(format!("[dispersion].growth_modes: expected integers, got `{}`", s.trim()))
            })?;
            let r = growth_rate_experiment(&lin, l, n, &GrowthRateParams::default())?;
            growth.push(json!({
                "mode": n,
                "k": r.k,
                "measured": r.measured,
                "predicted": r.predicted,
                "relative_error": r.relative_error(),
            }));
        }
    }
    write_csv(
        &ctx.out.join("dispersion.csv"),
        &["k", "detM", "trM", "reL1", "imL1", "reL2", "imL2"],
        scan.points
            .iter()
            .map(|p| vec![p.k, p.det, p.trace, p.lambda1.0, p.lambda1.1, p.lambda2.0, p.lambda2.1]),
    )?;
    let report = json!({
        "band": scan.band,
        "max_growth_rate": scan.max_growth_rate,
        "k_at_max_growth": scan.k_at_max_growth,
        "modes": scan.modes,
        "conditions": conditions,
        "kinetics_stable": conditions.kinetics_stable(),
        "turing_unstable": conditions.turing_unstable(),
        "critical_d1": crit,
        "growth_rates": growth,
        "k_max": k_max,
        "samples": samples,
    });
    write_json(&ctx.out.join("report.json"), &report)?;
    if ctx.plots {
        let series = [
            Series {
                label: "Re lambda1",
                points: scan.points.iter().map(|p| (p.k, p.lambda1.0)).collect(),
            },
            Series {
                label: "Re lambda2",
                points: scan.points.iter().map(|p| (p.k, p.lambda2.0)).collect(),
            },
        ];
        write_plot(ctx.out, "dispersion.svg", &line_plot("Dispersion relation", "k", "Re lambda", &series, false))?;
    }
    Ok(Verdict::Pass)
}

fn check_options(ctx: &Ctx) -> Result<CheckOptions> {
    let grid_points = match ctx.grid_points {
        Some(n) => n,
        None => ctx.cfg.usize_opt("certificate", "grid_points")?.unwrap_or(DEFAULT_GRID_POINTS),
    };
    let tol = ctx.cfg.f64_or("certificate", "tol", 0.0)?;
    if grid_points < 2 {
        bail!(ConfigError("[certificate].grid_points must be at least 2".into()));
    }
    if !(tol >= 0.0) {
        bail!(ConfigError(format!("[certificate].tol must be >= 0, got {tol}")));
    }
    Ok(CheckOptions { grid_points, tol })
}

fn certificate_from_config(cfg: &Config) -> Result<Certificate> {
    let family = cfg.str_req("certificate", "family")?;
    let cert = match family {
        "exponential" => Certificate::exponential(cfg.f64_req("certificate", "mu0")?, cfg.f64_req("certificate", "nu")?),
        "power" => Certificate::power(cfg.f64_req("certificate", "mu0")?, cfg.f64_req("certificate", "m")?),
        "bounded" => Certificate::bounded(
            cfg.f64_req("certificate", "mu0")?,
            cfg.f64_req("certificate", "mu1")?,
            cfg.f64_req("certificate", "nu")?,
        ),
        other => bail!(ConfigError(format!(
            "[certificate].family: expected exponential, power or bounded, got `{other}`"
        ))),
    };
    cert.map_err(|e| config_err(e, "certificate"))
}

pub fn check_certificate_cmd(ctx: &Ctx) -> Result<Verdict> {
    let cfg = ctx.cfg;
    let sigma = cfg
        .profile("certificate", "sigma_")?
        .ok_or_else(|| ConfigError("missing key [certificate].sigma_v0".into()))?;
    let alpha = cfg
        .profile("certificate", "alpha_")?
        .ok_or_else(|| ConfigError("missing key [certificate].alpha_v0".into()))?;
    let q = cfg.f64_req("certificate", "q")?;
    let g0 = cfg.f64_req("certificate", "g0")?;
    let horizon = cfg.positive("certificate", "horizon")?;
    let problem = ScalarProblem::new(sigma, alpha, q, g0).map_err(|e| config_err(e, "certificate"))?;
    let cert = certificate_from_config(cfg)?;
    let opts = check_options(ctx)?;
    let report = check_certificate(&problem, &cert, horizon, &opts).map_err(|e| config_err(e, "certificate"))?;
    write_json(
        &ctx.out.join("report.json"),
        &json!({
            "pass": report.pass,
            "worst_residual": report.worst_residual,
            "worst_residual_time": report.worst_residual_time,
            "initial_slack": report.initial_slack,
            "first_failure": report.first_failure,
            "grid_points": report.grid_points,
            "horizon": report.horizon,
            "tol": report.tol,
            "certificate": cert,
        }),
    )?;
    write_csv(
        &ctx.out.join("residuals.csv"),
        &["t", "residual"],
        report.residuals.iter().map(|&(t, r)| vec![t, r]),
    )?;
    if let Some(f) = report.first_failure {
        eprintln!("certificate fails: {:?} at t = {} (value {})", f.condition, f.t, f.value);
    }
    Ok(if report.pass { Verdict::Pass } else { Verdict::HypothesesFailed })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Theorem {
    Exponential,
    Power,
    Neumann,
    Turing,
}

impl Theorem {
    pub fn parse(s: &str) -> Option<Theorem> {
        Some(match s {
            "exponential" | "3.1" => Theorem::Exponential,
            "power" | "3.2" => Theorem::Power,
            "neumann" | "3.3" => Theorem::Neumann,
            "turing" | "3.4" => Theorem::Turing,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Theorem::Exponential => "exponential",
            Theorem::Power => "power",
            Theorem::Neumann => "neumann",
            Theorem::Turing => "turing",
        }
    }
}

fn power_decay_parts(p: &TimeProfile, section: &str) -> Result<(f64, f64)> {
    match *p {
        TimeProfile::PowerDecay { v0, exponent, offset } if offset == 0.0 => Ok((v0, exponent)),
        TimeProfile::Constant { v0 } if v0 == 0.0 => Ok((0.0, 1.0)),
        _ => bail!(ConfigError(format!(
            "[{section}].kind must be power_decay without offset for this theorem"
        ))),
    }
}

fn scenario_from_config(cfg: &Config, theorem: Theorem) -> Result<Scenario> {
    let length = cfg.positive("domain", "L")?;
    let expected_bc = match theorem {
        Theorem::Neumann => BoundaryCondition::Neumann,
        _ => BoundaryCondition::Dirichlet,
    };
    if let Some(bc) = cfg.bc()? {
        if bc != expected_bc {
            bail!(ConfigError(format!(
                "[domain].bc: the {} theorem needs {:?} ends",
                theorem.name(),
                expected_bc
            )));
        }
    }
    let rate = cfg.profile("kinetics", "")?.unwrap_or(TimeProfile::constant(0.0));
    Ok(match theorem {
        Theorem::Exponential => Scenario::ExponentialDecay {
            length,
            d0: constant_value(&cfg.diffusion(1)?[0], "diffusion")?,
            a0: constant_value(&rate, "kinetics")?,
        },
        Theorem::Power => {
            let (d0, e) = power_decay_parts(&cfg.diffusion(1)?[0], "diffusion")?;
            if e != 1.0 {
                bail!(ConfigError("[diffusion].exponent must be 1 for the power theorem".into()));
            }
            let (gamma0, k) = power_decay_parts(&rate, "kinetics")?;
            Scenario::PowerDecay {
                length,
                d0,
                gamma0,
                k,
                m: cfg.f64_req("certificate", "m")?,
            }
        }
        Theorem::Neumann => {
            let (gamma0, k) = power_decay_parts(&rate, "kinetics")?;
            Scenario::NeumannBounded {
                length,
                diffusion: constant_value(&cfg.diffusion(1)?[0], "diffusion")?,
                gamma0,
                k,
                nu: cfg.f64_req("certificate", "nu")?,
                mu_ratio: cfg.f64_or("certificate", "mu_ratio", 1.0)?,
            }
        }
        Theorem::Turing => {
            let lin = two_component_linearization(cfg)?;
            Scenario::TwoComponent {
                length,
                kinetics: lin.kinetics(),
                d1: lin.d1,
                d2: lin.d2,
                phi: cfg.profile("modulation", "")?.unwrap_or(TimeProfile::constant(1.0)),
                m: cfg.f64_or("certificate", "m", 0.0)?,
                nu: cfg.f64_or("certificate", "nu", 1.0)?,
                mu_ratio: cfg.f64_or("certificate", "mu_ratio", 1.0)?,
            }
        }
    })
}

#[derive(Serialize)]
struct TheoremReport<'a> {
    theorem: &'static str,
    #[serde(flatten)]
    report: &'a PipelineReport,
}

pub fn run_theorem_cmd(ctx: &Ctx, theorem: Option<Theorem>) -> Result<Verdict> {
    let cfg = ctx.cfg;
    let theorem = match theorem {
        Some(t) => t,
        None => {
            let name = cfg.str_req("theorem", "name")?;
            Theorem::parse(name).ok_or_else(|| {
                ConfigError(format!(
                    "[theorem].name: expected exponential, power, neumann or turing, got `{name}`"
                ))
            })?
        }
    };
    let scenario = scenario_from_config(cfg, theorem)?;
    let n_nodes = cfg.usize_req("domain", "N")?;
    let grid = scenario.grid(n_nodes).map_err(|e| config_err(e, "domain"))?;
    let initial = cfg.initial(&grid, scenario.n_components(), ctx.seed)?;
    let p = cfg.f64_or("kinetics", "p", 2.0)?;
    let amplitude = match cfg.profile("kinetics", "c0_")? {
        Some(c0) => Amplitude::Profile(c0),
        None => Amplitude::Fraction(cfg.f64_or("certificate", "fraction", 0.5)?),
    };
    let opts = sim_options(cfg, &grid)?;
    let pc = PipelineConfig {
        scenario,
        p,
        amplitude,
        initial,
        n_nodes,
        horizon: opts.t_end,
        dt: cfg.f64_opt("run", "dt")?,
        record_every: cfg.usize_opt("run", "record_every")?,
        agmon: cfg.f64_opt("certificate", "agmon")?,
        slack: cfg.f64_or("certificate", "slack", DEFAULT_ENVELOPE_SLACK)?,
        check: check_options(ctx)?,
    };
    let outcome = match run_pipeline(&pc) {
        Ok(o) => o,
        Err(rdcert::Error::NotApplicable(reason)) => {
            write_json(
                &ctx.out.join("report.json"),
                &json!({ "theorem": theorem.name(), "applicable": false, "reason": reason }),
            )?;
            eprintln!("theorem not applicable: {reason}");
            return Ok(Verdict::HypothesesFailed);
        }
        Err(e) => return Err(config_err(e, "certificate")),
    };
    let report = &outcome.report;
    write_json(
        &ctx.out.join("report.json"),
        &TheoremReport {
            theorem: theorem.name(),
            report,
        },
    )?;
    if let Some(traj) = &outcome.trajectory {
        let cert = &report.certificate;
        let mut rows = Vec::with_capacity(traj.times.len());
        for (t, n) in traj.times.iter().zip(&traj.norms) {
            let t = *t;
            rows.push(vec![
                t,
                n.l2,
                1.0 / cert.mu(t)?,
                n.sup,
                n.h1_semi,
                n.h2,
                outcome.problem.sigma.eval(t)?,
                outcome.problem.alpha_at(t)?,
                residual(&outcome.problem, cert, t)?,
            ]);
        }
        write_csv(
            &ctx.out.join("series.csv"),
            &["t", "g", "envelope", "sup", "h1_semi", "h2", "sigma_t", "alpha_t", "residual"],
            rows.iter().cloned(),
        )?;
        write_snapshots(ctx.out, &traj.snapshots)?;
        if ctx.plots {
            let env = rows.iter().map(|r| (r[0], r[2])).collect();
            write_plot(ctx.out, "envelope.svg", &g_plot(traj, Some(env)))?;
        }
    }
    Ok(theorem_verdict(report))
}

pub fn theorem_verdict(r: &PipelineReport) -> Verdict {
    if !r.hypotheses.pass {
        Verdict::HypothesesFailed
    } else if !r.envelope_verified || !r.pointwise_verified() || r.blow_up.is_some() {
        Verdict::Violated
    } else {
        Verdict::Pass
    }
}

pub fn convergence_cmd(ctx: &Ctx) -> Result<Verdict> {
    let cfg = ctx.cfg;
    let d = match cfg.raw("diffusion", "v0") {
        Some(_) => constant_value(&cfg.diffusion(1)?[0], "diffusion")?,
        None => 1.0,
    };
    let scheme = cfg.scheme()?;
    let levels = Refinement {
        scheme,
        ..Refinement::default()
    };
    let report = convergence_order(&heat_mms(d), &levels)?;
    let time_target = match scheme {
        Scheme::TwoStage => 1.9,
        Scheme::OneStage => 0.9,
    };
    let pass = report.space.order.at_least(1.9) && report.time.order.at_least(time_target);
    write_json(
        &ctx.out.join("report.json"),
        &json!({
            "diffusion": d,
            "scheme": scheme,
            "space": report.space,
            "time": report.time,
            "space_order_target": 1.9,
            "time_order_target": time_target,
            "pass": pass,
        }),
    )?;
    Ok(if pass { Verdict::Pass } else { Verdict::Violated })
}

pub fn require_section(cfg: &Config, section: &str) -> Result<()> {
    if cfg.has_section(section) {
        Ok(())
    } else {
        Err(anyhow!(ConfigError(format!("missing section [{section}]"))))
    }
}
