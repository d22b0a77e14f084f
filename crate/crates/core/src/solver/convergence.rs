//! Observed order of accuracy from manufactured solutions.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::Serialize;

use super::{simulate, Forcing, Scheme, SimOptions, SystemSpec};
use crate::error::{Error, Result};
use crate::grid::{discrete_norms, BoundaryCondition, Field, Grid1D};
use crate::profiles::{KineticsSpec, LinearPart, TimeProfile};

/// A system whose forcing makes `exact(component, x, t)` an exact solution.
#[derive(Clone)]
pub struct ManufacturedSolution {
    pub length: f64,
    pub bc: BoundaryCondition,
    pub kinetics: KineticsSpec,
    pub diffusion: Vec<TimeProfile>,
    pub exact: Arc<dyn Fn(usize, f64, f64) -> f64 + Send + Sync>,
    pub forcing: Forcing,
}

impl ManufacturedSolution {
    pub fn system(&self, n_nodes: usize) -> Result<SystemSpec> {
        let grid = Grid1D::new(self.length, n_nodes, self.bc)?;
        let initial = self.exact_field(&grid, 0.0);
        Ok(SystemSpec::new(self.kinetics.clone(), self.diffusion.clone(), initial)?
            .with_forcing(self.forcing.clone()))
    }

    pub fn exact_field(&self, grid: &Grid1D, t: f64) -> Field {
        Field::from_fn(grid, self.kinetics.n_components, |i, x| (self.exact)(i, x, t))
    }
}

/// `u = exp(-t) sin(pi x)` on `(0, 1)` with Dirichlet ends, pure diffusion `d`.
pub fn heat_mms(d: f64) -> ManufacturedSolution {
    ManufacturedSolution {
        length: 1.0,
        bc: BoundaryCondition::Dirichlet,
        kinetics: KineticsSpec::linear(1, LinearPart::None),
        diffusion: vec![TimeProfile::constant(d)],
        exact: Arc::new(|_, x, t| (-t).exp() * (PI * x).sin()),
        forcing: Forcing(Arc::new(move |_, x, t| (d * PI * PI - 1.0) * (-t).exp() * (PI * x).sin())),
    }
}

/// Steady `u = x (1 - x)` held by the constant source `2 d`. The three-point
/// Laplacian is exact on quadratics, so every discretisation reproduces it.
pub fn quadratic_steady_state(d: f64) -> ManufacturedSolution {
    ManufacturedSolution {
        length: 1.0,
        bc: BoundaryCondition::Dirichlet,
        kinetics: KineticsSpec::linear(1, LinearPart::None),
        diffusion: vec![TimeProfile::constant(d)],
        exact: Arc::new(|_, x, _| x * (1.0 - x)),
        forcing: Forcing(Arc::new(move |_, _, _| 2.0 * d)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Order {
    Observed(f64),
    /// Every error is at round-off level; no rate can be measured.
    Exact,
}

impl Order {
    pub fn at_least(&self, p: f64) -> bool {
        match self {
            Order::Observed(v) => *v >= p,
            Order::Exact => true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderEstimate {
    /// `h` or `dt` per level, coarse to fine.
    pub steps: Vec<f64>,
    pub errors: Vec<f64>,
    pub order: Order,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub space: OrderEstimate,
    pub time: OrderEstimate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Refinement {
    pub t_end: f64,
    pub scheme: Scheme,
    /// Node counts for the spatial study, coarse to fine.
    pub space_nodes: Vec<usize>,
    pub space_dt: f64,
    /// Steps for the temporal study, coarse to fine, on `time_nodes` nodes.
    pub time_steps: Vec<f64>,
    pub time_nodes: usize,
}

impl Default for Refinement {
    fn default() -> Self {
        Refinement {
            t_end: 0.5,
            scheme: Scheme::TwoStage,
            // Dirichlet interior counts giving N + 1 = 10, 20, 40, 80 intervals
            space_nodes: vec![9, 19, 39, 79],
            space_dt: 1e-4,
            time_steps: vec![0.05, 0.025, 0.0125, 0.00625],
            time_nodes: 399,
        }
    }
}

/// Spatial errors are measured against the manufactured solution; temporal
/// errors against a run with a 16x smaller step on the same grid, which
/// removes the spatial error from the comparison.
pub fn convergence_order(mms: &ManufacturedSolution, levels: &Refinement) -> Result<ConvergenceReport> {
    if levels.space_nodes.len() < 2 || levels.time_steps.len() < 2 {
        return Err(Error::invalid("levels", "need at least two refinement levels"));
    }
    let run = |n: usize, dt: f64| -> Result<Field> {
        let sys = mms.system(n)?;
        let opts = SimOptions {
            t_end: levels.t_end,
            dt,
            record_every: usize::MAX,
            scheme: levels.scheme,
        };
        Ok(simulate(&sys, &opts)?.final_field().clone())
    };

    let mut h = Vec::new();
    let mut e_space = Vec::new();
    for &n in &levels.space_nodes {
        let u = run(n, levels.space_dt)?;
        let exact = mms.exact_field(u.grid(), levels.t_end);
        h.push(u.grid().h());
        e_space.push(l2_distance(&u, &exact));
    }
    let scale = discrete_norms(&run(levels.time_nodes, levels.space_dt)?).l2.max(1.0);

    let finest = levels.time_steps.iter().cloned().fold(f64::INFINITY, f64::min);
    let reference = run(levels.time_nodes, finest / 16.0)?;
    let mut e_time = Vec::new();
    for &dt in &levels.time_steps {
        e_time.push(l2_distance(&run(levels.time_nodes, dt)?, &reference));
    }
    Ok(ConvergenceReport {
        space: estimate(h, e_space, scale)?,
        time: estimate(levels.time_steps.clone(), e_time, scale)?,
    })
}

fn l2_distance(a: &Field, b: &Field) -> f64 {
    let diff: Vec<f64> = a.values().iter().zip(b.values()).map(|(x, y)| x - y).collect();
    let d = Field::from_values(a.grid(), a.n_components(), diff).expect("same shape");
    discrete_norms(&d).l2
}

fn estimate(steps: Vec<f64>, errors: Vec<f64>, scale: f64) -> Result<OrderEstimate> {
    let round_off = 1e-11 * scale;
    if errors.iter().all(|e| *e <= round_off) {
        return Ok(OrderEstimate {
            steps,
            errors,
            order: Order::Exact,
        });
    }
    if errors.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::InconclusiveOrder { errors });
    }
    let k = errors.len() - 1;
    let p = (errors[k - 1] / errors[k]).ln() / (steps[k - 1] / steps[k]).ln();
    Ok(OrderEstimate {
        steps,
        errors,
        order: Order::Observed(p),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick() -> Refinement {
        Refinement {
            t_end: 0.2,
            space_nodes: vec![9, 19, 39],
            space_dt: 2e-4,
            time_steps: vec![0.05, 0.025, 0.0125],
            time_nodes: 99,
            ..Refinement::default()
        }
    }

    #[test]
    fn heat_mms_is_second_order() {
        let r = convergence_order(&heat_mms(1.0), &quick()).unwrap();
        assert!(r.space.order.at_least(1.9), "{:?}", r.space);
        assert!(r.time.order.at_least(1.9), "{:?}", r.time);
    }

    #[test]
    fn one_stage_is_first_order_in_time() {
        let levels = Refinement {
            scheme: Scheme::OneStage,
            ..quick()
        };
        let r = convergence_order(&heat_mms(1.0), &levels).unwrap();
        match r.time.order {
            Order::Observed(p) => assert!(p > 0.9 && p < 1.3, "{p}"),
            Order::Exact => panic!("expected measurable error"),
        }
    }

    #[test]
    fn steady_quadratic_is_exact() {
        let r = convergence_order(&quadratic_steady_state(0.8), &quick()).unwrap();
        assert_eq!(r.space.order, Order::Exact);
        assert_eq!(r.time.order, Order::Exact);
    }

    #[test]
    fn non_monotone_errors_are_inconclusive() {
        let e = estimate(vec![0.1, 0.05, 0.025], vec![1e-3, 2e-3, 1e-4], 1.0);
        assert!(matches!(e, Err(Error::InconclusiveOrder { .. })));
    }
}
