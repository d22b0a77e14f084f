//! IMEX time integration of `u_t = phi(t) D(t) u_xx + F(u, x, t)` on a 1-D grid.
//!
//! Diffusion is Crank-Nicolson with coefficients frozen at the step midpoint;
//! the reaction (plus an optional manufactured forcing) is explicit. The
//! two-stage variant is a Heun predictor-corrector on the reaction and is
//! second order in time; the one-stage variant is first order.

mod convergence;
mod tridiag;

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{discrete_norms, BoundaryCondition, Field, Grid1D, NormSet};
use crate::profiles::{KineticsSpec, TimeProfile};

pub use convergence::{
    convergence_order, heat_mms, quadratic_steady_state, ConvergenceReport, ManufacturedSolution,
    Order, OrderEstimate, Refinement,
};
pub use tridiag::Tridiagonal;

/// Extra source term `f(component, x, t)` added to the reaction.
#[derive(Clone)]
pub struct Forcing(pub Arc<dyn Fn(usize, f64, f64) -> f64 + Send + Sync>);

impl fmt::Debug for Forcing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Forcing(..)")
    }
}

#[derive(Debug, Clone)]
pub struct SystemSpec {
    pub kinetics: KineticsSpec,
    /// One profile `d_i(t)` per component; the effective coefficient is `phi(t) d_i(t)`.
    pub diffusion: Vec<TimeProfile>,
    pub initial: Field,
    pub forcing: Option<Forcing>,
    /// Seed the initial field was drawn with, if it is random; copied into trajectories.
    pub seed: Option<u64>,
}

impl SystemSpec {
    pub fn new(kinetics: KineticsSpec, diffusion: Vec<TimeProfile>, initial: Field) -> Result<Self> {
        kinetics.validate()?;
        if diffusion.len() != kinetics.n_components || initial.n_components() != kinetics.n_components {
            return Err(Error::Shape(format!(
                "kinetics has {} components, diffusion {}, initial field {}",
                kinetics.n_components,
                diffusion.len(),
                initial.n_components()
            )));
        }
        for d in &diffusion {
            d.validate()?;
        }
        if !initial.is_finite() {
            return Err(Error::NonFinite("initial field"));
        }
        Ok(SystemSpec {
            kinetics,
            diffusion,
            initial,
            forcing: None,
            seed: None,
        })
    }

    pub fn with_forcing(mut self, forcing: Forcing) -> Self {
        self.forcing = Some(forcing);
        self
    }

    pub fn with_seed(mut self, seed: Option<u64>) -> Self {
        self.seed = seed;
        self
    }

    pub fn grid(&self) -> &Grid1D {
        self.initial.grid()
    }

    pub fn n_components(&self) -> usize {
        self.kinetics.n_components
    }

    /// Effective diffusion coefficient of component `i` at time `t`.
    pub fn diffusion_at(&self, i: usize, t: f64) -> Result<f64> {
        let phi = self.kinetics.modulation.eval(t)?;
        let v = phi * self.diffusion[i].eval(t)?;
        if v > 0.0 {
            Ok(v)
        } else {
            Err(Error::NotPositive {
                name: "diffusion",
                t,
                value: v,
            })
        }
    }

    /// Sampled `inf_t min_i phi(t) d_i(t)` over `[0, t_end]`.
    pub fn diffusion_floor(&self, t_end: f64) -> Result<f64> {
        let mut m = f64::INFINITY;
        for t in crate::profiles::horizon_samples(t_end) {
            for i in 0..self.n_components() {
                m = m.min(self.diffusion_at(i, t)?);
            }
        }
        Ok(m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    OneStage,
    TwoStage,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimOptions {
    pub t_end: f64,
    pub dt: f64,
    /// Snapshot stride in steps; norms are recorded every step regardless.
    pub record_every: usize,
    pub scheme: Scheme,
}

impl SimOptions {
    /// `dt = min(1e-3, h)`, snapshots capped at about 2000.
    pub fn with_defaults(grid: &Grid1D, t_end: f64) -> Self {
        let dt = 1e-3f64.min(grid.h());
        SimOptions {
            t_end,
            dt,
            record_every: default_record_every(t_end, dt),
            scheme: Scheme::TwoStage,
        }
    }
}

pub fn default_record_every(t_end: f64, dt: f64) -> usize {
    ((t_end / dt / 2000.0) as usize).max(1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub field: Field,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub norms: Vec<NormSet>,
    pub snapshots: Vec<Snapshot>,
    pub dt: f64,
    pub scheme: Scheme,
    pub seed: Option<u64>,
}

impl Trajectory {
    /// The `L2` series `g(t)`.
    pub fn g(&self) -> Vec<f64> {
        self.norms.iter().map(|n| n.l2).collect()
    }

    pub fn final_field(&self) -> &Field {
        &self.snapshots.last().expect("trajectory always has snapshots").field
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialCondition {
    Zero,
    /// Uniform in `[-eps, eps]` per node, reproducible from `seed`.
    Noise { eps: f64, seed: u64 },
    /// `amp sin(n pi x / L)` (Dirichlet) or `amp cos(n pi x / L)` (Neumann) in every component.
    Mode { n: usize, amp: f64 },
    Values(Field),
}

impl InitialCondition {
    pub fn build(&self, grid: &Grid1D, n_components: usize) -> Result<Field> {
        match self {
            InitialCondition::Zero => Ok(Field::zeros(grid, n_components)),
            InitialCondition::Noise { eps, seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let vals = (0..n_components * grid.n_nodes())
                    .map(|_| rng.gen_range(-*eps..=*eps))
                    .collect();
                Field::from_values(grid, n_components, vals)
            }
            InitialCondition::Mode { n, amp } => {
                let k = *n as f64 * std::f64::consts::PI / grid.length();
                Ok(Field::from_fn(grid, n_components, |_, x| match grid.bc() {
                    BoundaryCondition::Dirichlet => amp * (k * x).sin(),
                    BoundaryCondition::Neumann => amp * (k * x).cos(),
                }))
            }
            InitialCondition::Values(f) => {
                if f.grid() != grid || f.n_components() != n_components {
                    return Err(Error::Shape("initial field does not match grid".into()));
                }
                Ok(f.clone())
            }
        }
    }

    pub fn seed(&self) -> Option<u64> {
        match self {
            InitialCondition::Noise { seed, .. } => Some(*seed),
            _ => None,
        }
    }
}

/// Reusable per-system workspace for [`step_imex`].
pub struct Stepper<'a> {
    sys: &'a SystemSpec,
    nodes: Vec<f64>,
    lower: Vec<f64>,
    diag: Vec<f64>,
    upper: Vec<f64>,
    explicit: Vec<f64>,
    react0: Vec<f64>,
    react1: Vec<f64>,
    predictor: Field,
    factors: Vec<Tridiagonal>,
}

impl<'a> Stepper<'a> {
    pub fn new(sys: &'a SystemSpec) -> Self {
        let grid = sys.grid();
        let n = grid.n_nodes();
        let nc = sys.n_components();
        Stepper {
            sys,
            nodes: grid.nodes(),
            lower: vec![0.0; n],
            diag: vec![0.0; n],
            upper: vec![0.0; n],
            explicit: vec![0.0; nc * n],
            react0: vec![0.0; nc * n],
            react1: vec![0.0; nc * n],
            predictor: Field::zeros(grid, nc),
            factors: vec![Tridiagonal::default(); nc],
        }
    }

    /// Advances `state` from `t` to `t + dt` in place.
    pub fn step(&mut self, state: &mut Field, t: f64, dt: f64, scheme: Scheme) -> Result<()> {
        if !(dt > 0.0) {
            return Err(Error::invalid("dt", "time step must be positive"));
        }
        let sys = self.sys;
        let grid = *sys.grid();
        if state.grid() != &grid || state.n_components() != sys.n_components() {
            return Err(Error::Shape("state does not live on the system grid".into()));
        }
        let n = grid.n_nodes();
        let nc = sys.n_components();
        let t_mid = t + 0.5 * dt;
        let h2 = grid.h() * grid.h();

        for i in 0..nc {
            let mu = 0.5 * dt * sys.diffusion_at(i, t_mid)? / h2;
            self.assemble(i, mu, state, grid.bc());
        }
        reaction(sys, &self.nodes, state, t, &mut self.react0)?;

        // predictor: explicit Euler on the reaction
        for i in 0..nc {
            let out = self.predictor.component_mut(i);
            for j in 0..n {
                out[j] = self.explicit[i * n + j] + dt * self.react0[i * n + j];
            }
            self.factors[i].solve_in_place(out);
        }

        match scheme {
            Scheme::OneStage => std::mem::swap(state, &mut self.predictor),
            Scheme::TwoStage => {
                reaction(sys, &self.nodes, &self.predictor, t + dt, &mut self.react1)?;
                for i in 0..nc {
                    let out = state.component_mut(i);
                    for j in 0..n {
                        let k = i * n + j;
                        out[j] = self.explicit[k] + 0.5 * dt * (self.react0[k] + self.react1[k]);
                    }
                    self.factors[i].solve_in_place(out);
                }
            }
        }
        if !state.is_finite() {
            return Err(Error::BlowUp { time: t + dt });
        }
        Ok(())
    }

    /// Factors `I - mu h^2 L` for component `i` and stores `(I + mu h^2 L) u`.
    fn assemble(&mut self, i: usize, mu: f64, state: &Field, bc: BoundaryCondition) {
        let u = state.component(i);
        let n = u.len();
        let out = &mut self.explicit[i * n..(i + 1) * n];
        self.diag.iter_mut().for_each(|d| *d = 1.0 + 2.0 * mu);
        self.lower.iter_mut().for_each(|d| *d = -mu);
        self.upper.iter_mut().for_each(|d| *d = -mu);
        for j in 1..n - 1 {
            out[j] = u[j] + mu * (u[j - 1] - 2.0 * u[j] + u[j + 1]);
        }
        match bc {
            BoundaryCondition::Dirichlet => {
                out[0] = u[0] + mu * (-2.0 * u[0] + u[1]);
                out[n - 1] = u[n - 1] + mu * (u[n - 2] - 2.0 * u[n - 1]);
            }
            BoundaryCondition::Neumann => {
                // ghost-node reflection u_{-1} = u_1
                self.upper[0] = -2.0 * mu;
                self.lower[n - 1] = -2.0 * mu;
                out[0] = u[0] + 2.0 * mu * (u[1] - u[0]);
                out[n - 1] = u[n - 1] + 2.0 * mu * (u[n - 2] - u[n - 1]);
            }
        }
        self.factors[i]
            .factor(&self.lower, &self.diag, &self.upper)
            .expect("I - mu L is strictly diagonally dominant for mu > 0");
    }
}

fn reaction(sys: &SystemSpec, nodes: &[f64], state: &Field, t: f64, out: &mut [f64]) -> Result<()> {
    let n = nodes.len();
    let nc = sys.n_components();
    let kin = sys.kinetics.at(t)?;
    let mut u = [0.0; 2];
    let mut f = [0.0; 2];
    for (j, &x) in nodes.iter().enumerate() {
        for i in 0..nc {
            u[i] = state.component(i)[j];
        }
        kin.apply(&u[..nc], x, &mut f[..nc]);
        for i in 0..nc {
            out[i * n + j] = f[i];
        }
    }
    if let Some(forcing) = &sys.forcing {
        for i in 0..nc {
            for (j, &x) in nodes.iter().enumerate() {
                out[i * n + j] += (forcing.0)(i, x, t);
            }
        }
    }
    Ok(())
}

/// One IMEX step from `t` to `t + dt`.
pub fn step_imex(state: &Field, t: f64, dt: f64, sys: &SystemSpec, scheme: Scheme) -> Result<Field> {
    let mut next = state.clone();
    Stepper::new(sys).step(&mut next, t, dt, scheme)?;
    Ok(next)
}

/// Integrates to `t_end` with a uniform step no larger than `opts.dt`,
/// recording norms every step and snapshots every `record_every` steps
/// (always including the first and last).
pub fn simulate(sys: &SystemSpec, opts: &SimOptions) -> Result<Trajectory> {
    if !(opts.t_end > 0.0) || !opts.t_end.is_finite() {
        return Err(Error::invalid("T", "horizon must be positive"));
    }
    if !(opts.dt > 0.0) || opts.dt > opts.t_end {
        return Err(Error::invalid("dt", "need 0 < dt <= T"));
    }
    for d in &sys.diffusion {
        d.ensure_positive_on("diffusion", opts.t_end)?;
    }
    sys.kinetics.modulation.ensure_positive_on("modulation", opts.t_end)?;

    let n_steps = (opts.t_end / opts.dt - 1e-9).ceil().max(1.0) as usize;
    let dt = opts.t_end / n_steps as f64;
    let every = opts.record_every.max(1);

    let mut state = sys.initial.clone();
    let mut times = Vec::with_capacity(n_steps + 1);
    let mut norms = Vec::with_capacity(n_steps + 1);
    let mut snapshots = vec![Snapshot {
        t: 0.0,
        field: state.clone(),
    }];
    times.push(0.0);
    norms.push(discrete_norms(&state));

    let mut stepper = Stepper::new(sys);
    for s in 1..=n_steps {
        let t = (s - 1) as f64 * dt;
        stepper.step(&mut state, t, dt, opts.scheme)?;
        let t_new = if s == n_steps { opts.t_end } else { s as f64 * dt };
        times.push(t_new);
        norms.push(discrete_norms(&state));
        if s % every == 0 || s == n_steps {
            snapshots.push(Snapshot {
                t: t_new,
                field: state.clone(),
            });
        }
    }
    Ok(Trajectory {
        times,
        norms,
        snapshots,
        dt,
        scheme: opts.scheme,
        seed: sys.seed,
    })
}
