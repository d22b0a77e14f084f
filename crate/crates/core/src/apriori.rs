//! Pointwise a-priori bounds and the empirical constants behind the
//! nonlinear term of the energy inequality.
//!
//! Two upper solutions are supported: the paraboloid `v(x) = -a x^2 + b`
//! for Dirichlet problems (with `-2 a d_i + M1 <= 0` and `sqrt(b/a) >= L`),
//! and invariant constant levels for Neumann problems. The multiplicative
//! inequality `|u|_inf <= c |u|^(1/4) |u|_H2^(3/4)` is measured along a
//! trajectory; together with `M2 = sup |u|_H2` it gives the aggregate
//! `C = c^(p-1) M2^(3(p-1)/4)` that scales the nonlinearity amplitude.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::Field;
use crate::profiles::{horizon_samples, KineticsSpec};
use crate::solver::{SystemSpec, Trajectory};

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum UpperSolution {
    /// `v(x) = -a x^2 + b`, bounding every component from above and `-v` from below.
    Paraboloid {
        a: f64,
        b: f64,
        /// Reaction bound the coefficient `a` was built from.
        m1: f64,
    },
    /// `|u_i| <= levels[i]`.
    Constant { levels: Vec<f64> },
}

impl UpperSolution {
    pub fn bound(&self, component: usize, x: f64) -> f64 {
        match self {
            UpperSolution::Paraboloid { a, b, .. } => b - a * x * x,
            UpperSolution::Constant { levels } => levels[component.min(levels.len() - 1)],
        }
    }

    /// Largest value of the bound on the domain.
    pub fn scale(&self) -> f64 {
        match self {
            UpperSolution::Paraboloid { b, .. } => *b,
            UpperSolution::Constant { levels } => levels.iter().cloned().fold(0.0, f64::max),
        }
    }
}

/// `a = M1 / (2 d_min)` (one space dimension), then the smallest `b` with
/// `sqrt(b/a) >= L` and `|u0| <= v` at every node.
pub fn build_paraboloid(m1: f64, d_min: f64, length: f64, u0: &Field) -> Result<UpperSolution> {
    if !(m1 >= 0.0) || !m1.is_finite() {
        return Err(Error::invalid("M1", format!("must be finite and >= 0, got {m1}")));
    }
    if !(d_min > 0.0) || !d_min.is_finite() {
        return Err(Error::NotApplicable(format!(
            "diffusion floor {d_min} is not positive on the horizon; no paraboloid can be certified"
        )));
    }
    if !(length > 0.0) {
        return Err(Error::invalid("L", "must be positive"));
    }
    let a = if m1 > 0.0 { m1 / (2.0 * d_min) } else { f64::MIN_POSITIVE.sqrt() };
    let grid = u0.grid();
    let mut b = a * length * length;
    for i in 0..u0.n_components() {
        for (j, v) in u0.component(i).iter().enumerate() {
            let x = grid.x(j);
            b = b.max(v.abs() + a * x * x);
        }
    }
    Ok(UpperSolution::Paraboloid { a, b, m1 })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParaboloidCertificate {
    pub upper: UpperSolution,
    pub d_min: f64,
    /// `M1` bounds `|F|` on the whole range `|u| <= b` the paraboloid allows.
    pub self_consistent: bool,
    pub iterations: usize,
}

/// Builds a paraboloid for `sys` on `[0, t_end]`, taking `M1` as the sampled
/// sup of `|F|` over `|u| <= r` and enlarging `r` to `b` until it covers the
/// paraboloid's own range. Linear growth of `F` can make this fixed point
/// unreachable; the result then records `self_consistent = false`.
pub fn paraboloid_for_system(sys: &SystemSpec, t_end: f64) -> Result<ParaboloidCertificate> {
    let d_min = sys.diffusion_floor(t_end)?;
    let nodes = sys.grid().nodes();
    let mut radius = sys
        .initial
        .values()
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(f64::MIN_POSITIVE);
    let mut last = None;
    for it in 1..=40 {
        let m1 = sys.kinetics.reaction_bound(radius, t_end, &nodes)?;
        if !m1.is_finite() {
            break;
        }
        let upper = build_paraboloid(m1, d_min, sys.grid().length(), &sys.initial)?;
        let b = upper.scale();
        if b <= radius * (1.0 + 1e-12) {
            return Ok(ParaboloidCertificate {
                upper,
                d_min,
                self_consistent: true,
                iterations: it,
            });
        }
        if !b.is_finite() {
            break;
        }
        radius = b;
        last = Some((upper, it));
    }
    let Some((upper, iterations)) = last else {
        return Err(Error::NotApplicable("reaction bound is not finite on the initial range".into()));
    };
    Ok(ParaboloidCertificate {
        upper,
        d_min,
        self_consistent: false,
        iterations,
    })
}

/// Paraboloid with `M1` the sampled sup of `|F|` over `|u| <= radius`.
/// With `radius` the largest value a trajectory attains this is an a
/// posteriori bound: the comparison argument only needs `|F| <= M1` along
/// the solution itself.
pub fn paraboloid_for_range(sys: &SystemSpec, radius: f64, t_end: f64) -> Result<UpperSolution> {
    if !(radius >= 0.0) || !radius.is_finite() {
        return Err(Error::invalid("radius", format!("must be finite and >= 0, got {radius}")));
    }
    let d_min = sys.diffusion_floor(t_end)?;
    let m1 = sys.kinetics.reaction_bound(radius, t_end, &sys.grid().nodes())?;
    build_paraboloid(m1, d_min, sys.grid().length(), &sys.initial)
}

/// Largest recorded `sup |u|` of a trajectory.
pub fn trajectory_range(traj: &Trajectory) -> f64 {
    traj.norms.iter().fold(0.0, |m, n| m.max(n.sup))
}

/// Smallest common level `l >= max |u0|` (up to a factor 1.01) for which the
/// box `[-l, l]^n` is invariant on `[0, t_end]`: on each face `u_i = +-l`,
/// with the other component sampled across the face, `F_i` points inward.
pub fn build_constant_upper_solution(
    kin: &KineticsSpec,
    t_end: f64,
    nodes: &[f64],
    u0: &Field,
) -> Result<UpperSolution> {
    let start = u0.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut level = start.max(1e-12);
    let mut found = None;
    for _ in 0..200 {
        if box_is_invariant(kin, level, t_end, nodes)? {
            found = Some(level);
            break;
        }
        level *= 1.5;
    }
    let Some(mut hi) = found else {
        return Err(Error::NotApplicable(
            "no invariant constant level found: the reaction does not turn inward at large |u|".into(),
        ));
    };
    // shrink towards the smallest admissible level
    let mut lo = start;
    while hi > 1.01 * lo.max(1e-12) {
        let mid = 0.5 * (lo + hi);
        if mid >= start && box_is_invariant(kin, mid, t_end, nodes)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(UpperSolution::Constant {
        levels: vec![hi; kin.n_components],
    })
}

fn box_is_invariant(kin: &KineticsSpec, level: f64, t_end: f64, nodes: &[f64]) -> Result<bool> {
    let n = kin.n_components;
    let others: Vec<f64> = if n == 1 {
        vec![0.0]
    } else {
        (0..=8).map(|j| level * (-1.0 + j as f64 / 4.0)).collect()
    };
    let mut u = [0.0; 2];
    let mut f = [0.0; 2];
    for t in horizon_samples(t_end).step_by(8).chain(std::iter::once(t_end)) {
        let k = kin.at(t)?;
        for &x in nodes {
            for i in 0..n {
                for &o in &others {
                    for sign in [1.0, -1.0] {
                        u[i] = sign * level;
                        if n == 2 {
                            u[1 - i] = o;
                        }
                        k.apply(&u[..n], x, &mut f[..n]);
                        if sign * f[i] > 0.0 {
                            return Ok(false);
                        }
                    }
                }
            }
        }
    }
    Ok(true)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PointwiseViolation {
    pub t: f64,
    pub x: f64,
    pub component: usize,
    pub value: f64,
    pub bound: f64,
}

/// Every snapshot value with `|u_i(x, t)| > v_i(x) + tol`; `tol` defaults to
/// `1e-9` times the scale of the bound.
pub fn verify_pointwise_bound(traj: &Trajectory, us: &UpperSolution, tol: Option<f64>) -> Vec<PointwiseViolation> {
    let tol = tol.unwrap_or(1e-9 * us.scale());
    let mut out = Vec::new();
    for snap in &traj.snapshots {
        let grid = snap.field.grid();
        for i in 0..snap.field.n_components() {
            for (j, &v) in snap.field.component(i).iter().enumerate() {
                let x = grid.x(j);
                let bound = us.bound(i, x);
                if v.abs() > bound + tol {
                    out.push(PointwiseViolation {
                        t: snap.t,
                        x,
                        component: i,
                        value: v,
                        bound,
                    });
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct H2Max {
    pub value: f64,
    pub t: f64,
}

/// Largest recorded discrete `H2` norm and where it occurs.
pub fn h2_monitor(traj: &Trajectory) -> H2Max {
    traj.times
        .iter()
        .zip(&traj.norms)
        .fold(H2Max { value: 0.0, t: 0.0 }, |m, (t, n)| {
            if n.h2 > m.value {
                H2Max { value: n.h2, t: *t }
            } else {
                m
            }
        })
}

/// `max_t sup|u| / (|u|^(1/4) |u|_H2^(3/4))` over recorded nonzero states.
pub fn estimate_agmon_constant(traj: &Trajectory) -> Result<f64> {
    let c = traj
        .norms
        .iter()
        .filter(|n| n.l2 > 0.0 && n.h2 > 0.0)
        .map(|n| n.sup / (n.l2.powf(0.25) * n.h2.powf(0.75)))
        .fold(f64::NEG_INFINITY, f64::max);
    if c.is_finite() {
        Ok(c)
    } else {
        Err(Error::Degenerate("trajectory is identically zero; the constant is undefined".into()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AgmonAggregate {
    pub c_hat: f64,
    pub m2_hat: f64,
    pub p: f64,
    /// `c_hat^(p-1) m2_hat^(3(p-1)/4)`.
    pub value: f64,
    /// Horizon of the run the constants were measured on.
    pub horizon: f64,
}

pub fn agmon_aggregate(traj: &Trajectory, p: f64) -> Result<AgmonAggregate> {
    if !(p > 1.0) {
        return Err(Error::invalid("p", "must exceed 1"));
    }
    let c_hat = estimate_agmon_constant(traj)?;
    let m2_hat = h2_monitor(traj).value;
    Ok(AgmonAggregate {
        c_hat,
        m2_hat,
        p,
        value: c_hat.powf(p - 1.0) * m2_hat.powf(0.75 * (p - 1.0)),
        horizon: traj.times.last().copied().unwrap_or(0.0),
    })
}

/// Largest ratio over snapshots of `int |u|^(p+1)` to its bound
/// `c^(p-1) |u|_H2^(3(p-1)/4) g^((p+7)/4)`; at most 1 when `c` is a valid constant.
pub fn nonlinear_integral_ratio(traj: &Trajectory, p: f64, c: f64) -> f64 {
    let mut worst: f64 = 0.0;
    for snap in &traj.snapshots {
        let norms = crate::grid::discrete_norms(&snap.field);
        if norms.l2 == 0.0 {
            continue;
        }
        let lhs = snap.field.integral_of_power(p + 1.0);
        let rhs = c.powf(p - 1.0) * norms.h2.powf(0.75 * (p - 1.0)) * norms.l2.powf(0.25 * (p + 7.0));
        worst = worst.max(lhs / rhs);
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{discrete_norms, BoundaryCondition, Grid1D};
    use crate::profiles::{LinearPart, TimeProfile};
    use crate::solver::{simulate, InitialCondition, SimOptions};
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn heat_traj(length: f64, n: usize, amp: f64, t_end: f64) -> Trajectory {
        let grid = Grid1D::new(length, n, BoundaryCondition::Dirichlet).unwrap();
        let sys = SystemSpec::new(
            KineticsSpec::linear(1, LinearPart::None),
            vec![TimeProfile::constant(1.0)],
            InitialCondition::Mode { n: 1, amp }.build(&grid, 1).unwrap(),
        )
        .unwrap();
        simulate(&sys, &SimOptions::with_defaults(&grid, t_end)).unwrap()
    }

    #[test]
    fn paraboloid_examples() {
        let grid = Grid1D::new(1.0, 99, BoundaryCondition::Dirichlet).unwrap();
        let zero = Field::zeros(&grid, 1);
        let us = build_paraboloid(2.0, 1.0, 1.0, &zero).unwrap();
        match us {
            UpperSolution::Paraboloid { a, b, .. } => {
                assert_eq!(a, 1.0);
                assert_eq!(b, 1.0);
                assert!(-2.0 * a * 1.0 + 2.0 <= 0.0);
                assert!((b / a).sqrt() >= 1.0);
            }
            _ => unreachable!(),
        }
        // peak 5 at x = 0.5
        let bump = Field::from_fn(&grid, 1, |_, x| 5.0 * (PI * x).sin());
        match build_paraboloid(2.0, 1.0, 1.0, &bump).unwrap() {
            UpperSolution::Paraboloid { a, b, .. } => {
                assert!(b >= 5.0 + a * 0.25 - 1e-12);
                for j in 0..grid.n_nodes() {
                    let x = grid.x(j);
                    assert!(bump.component(0)[j] <= b - a * x * x);
                }
            }
            _ => unreachable!(),
        }
        let none = build_paraboloid(0.0, 1.0, 1.0, &bump).unwrap();
        assert!(none.scale() >= 5.0 && none.scale() < 5.0 + 1e-9);
        assert!(matches!(build_paraboloid(1.0, 0.0, 1.0, &zero), Err(Error::NotApplicable(_))));
    }

    #[test]
    fn pure_diffusion_respects_the_paraboloid() {
        let traj = heat_traj(1.0, 50, 2.0, 0.5);
        let us = build_paraboloid(0.0, 1.0, 1.0, &traj.snapshots[0].field).unwrap();
        assert!(verify_pointwise_bound(&traj, &us, None).is_empty());
        let corrupted = UpperSolution::Paraboloid { a: 1e-3, b: 1.0, m1: 0.0 };
        let bad = verify_pointwise_bound(&traj, &corrupted, None);
        assert!(!bad.is_empty());
        assert_eq!(bad[0].t, 0.0);
    }

    #[test]
    fn zero_trajectory_has_no_violations_and_no_constant() {
        let traj = heat_traj(1.0, 20, 0.0, 0.1);
        let us = UpperSolution::Constant { levels: vec![0.0] };
        assert!(verify_pointwise_bound(&traj, &us, None).is_empty());
        assert_eq!(h2_monitor(&traj).value, 0.0);
        assert!(matches!(estimate_agmon_constant(&traj), Err(Error::Degenerate(_))));
    }

    #[test]
    fn h2_of_a_decaying_mode_peaks_initially() {
        let (length, eps) = (2.0, 0.3);
        let traj = heat_traj(length, 400, eps, 0.2);
        let m = h2_monitor(&traj);
        assert_eq!(m.t, 0.0);
        let k2 = (PI / length).powi(2);
        let exact = eps * (1.0 + k2 + k2 * k2).sqrt() * (length / 2.0).sqrt();
        assert!((m.value - exact).abs() < 1e-4 * exact, "{} vs {exact}", m.value);
        let max_l2 = traj.norms.iter().map(|n| n.l2).fold(0.0, f64::max);
        assert!(m.value >= max_l2);
    }

    #[test]
    fn agmon_constant_of_a_sine_on_zero_to_pi() {
        let grid = Grid1D::new(PI, 2001, BoundaryCondition::Dirichlet).unwrap();
        let f = Field::from_fn(&grid, 1, |_, x| x.sin());
        let n = discrete_norms(&f);
        let c = n.sup / (n.l2.powf(0.25) * n.h2.powf(0.75));
        // sup = 1, l2 = sqrt(pi/2), h2 = sqrt(3 pi / 2)
        assert!((c - 0.528469090406337).abs() < 1e-6, "{c}");
    }

    #[test]
    fn constant_levels_for_a_saturating_scalar() {
        // F = u - 2 u s/(1+s), s = |u|: inward once s/(1+s) >= 1/2, i.e. |u| >= 1
        let kin = KineticsSpec::linear(1, LinearPart::Scalar(TimeProfile::constant(1.0)))
            .with_saturated_power(TimeProfile::constant(2.0), 2.0);
        let grid = Grid1D::new(1.0, 5, BoundaryCondition::Neumann).unwrap();
        let u0 = Field::from_fn(&grid, 1, |_, _| 0.1);
        match build_constant_upper_solution(&kin, 1.0, &grid.nodes(), &u0).unwrap() {
            UpperSolution::Constant { levels } => assert!(levels[0] >= 1.0 && levels[0] <= 1.02, "{levels:?}"),
            _ => unreachable!(),
        }
        let big = Field::from_fn(&grid, 1, |_, _| 3.0);
        assert_eq!(
            build_constant_upper_solution(&kin, 1.0, &grid.nodes(), &big).unwrap().scale(),
            3.0
        );
        let growing = KineticsSpec::linear(1, LinearPart::Scalar(TimeProfile::constant(1.0)));
        assert!(build_constant_upper_solution(&growing, 1.0, &grid.nodes(), &u0).is_err());
    }

    #[test]
    fn self_consistent_paraboloid_for_mild_growth() {
        let grid = Grid1D::new(1.0, 40, BoundaryCondition::Dirichlet).unwrap();
        let kin = KineticsSpec::linear(1, LinearPart::Scalar(TimeProfile::constant(0.5)));
        let sys = SystemSpec::new(
            kin,
            vec![TimeProfile::constant(1.0)],
            InitialCondition::Mode { n: 1, amp: 0.2 }.build(&grid, 1).unwrap(),
        )
        .unwrap();
        let cert = paraboloid_for_system(&sys, 2.0).unwrap();
        assert!(cert.self_consistent);
        let traj = simulate(&sys, &SimOptions::with_defaults(&grid, 2.0)).unwrap();
        assert!(verify_pointwise_bound(&traj, &cert.upper, None).is_empty());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn agmon_constant_is_scale_invariant(s in 1e-3f64..1e3, amp in 0.1f64..2.0) {
            let traj = heat_traj(1.0, 30, amp, 0.05);
            let mut scaled = traj.clone();
            for n in &mut scaled.norms {
                n.l2 *= s;
                n.sup *= s;
                n.h1_semi *= s;
                n.h2 *= s;
            }
            let a = estimate_agmon_constant(&traj).unwrap();
            let b = estimate_agmon_constant(&scaled).unwrap();
            prop_assert!((a - b).abs() <= 1e-13 * a);
        }

        #[test]
        fn monitors_grow_with_the_trajectory(cut in 2usize..40) {
            let traj = heat_traj(1.0, 30, 1.0, 0.05);
            let mut prefix = traj.clone();
            prefix.times.truncate(cut);
            prefix.norms.truncate(cut);
            prop_assert!(h2_monitor(&prefix).value <= h2_monitor(&traj).value);
            prop_assert!(estimate_agmon_constant(&prefix).unwrap() <= estimate_agmon_constant(&traj).unwrap());
        }

        #[test]
        fn nonlinear_integral_chain_holds(amp in 0.01f64..5.0, p in 1.5f64..4.0) {
            let traj = heat_traj(1.0, 60, amp, 0.2);
            let c = estimate_agmon_constant(&traj).unwrap();
            prop_assert!(nonlinear_integral_ratio(&traj, p, c) <= 1.0 + 1e-12);
        }
    }
}
