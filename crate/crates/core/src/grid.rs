//! Uniform 1-D grids on `(0, L)`, multi-component fields and their discrete norms.
//!
//! Dirichlet grids store only the `N` interior nodes `x_j = j h`, `h = L/(N+1)`;
//! the boundary values are exact zeros. Neumann grids store `N` nodes including
//! both endpoints, `h = L/(N-1)`, and integrate with trapezoid weights.

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryCondition {
    Dirichlet,
    Neumann,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Grid1D {
    length: f64,
    n: usize,
    h: f64,
    bc: BoundaryCondition,
}

impl Grid1D {
    pub fn new(length: f64, n: usize, bc: BoundaryCondition) -> Result<Self> {
        if !(length > 0.0) || !length.is_finite() {
            return Err(Error::invalid("L", format!("interval length must be positive, got {length}")));
        }
        if n < 3 {
            return Err(Error::invalid("N", format!("need at least 3 nodes, got {n}")));
        }
        let h = match bc {
            BoundaryCondition::Dirichlet => length / (n + 1) as f64,
            BoundaryCondition::Neumann => length / (n - 1) as f64,
        };
        Ok(Grid1D { length, n, h, bc })
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    /// Number of stored nodes.
    pub fn n_nodes(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn bc(&self) -> BoundaryCondition {
        self.bc
    }

    pub fn x(&self, j: usize) -> f64 {
        match self.bc {
            BoundaryCondition::Dirichlet => (j + 1) as f64 * self.h,
            BoundaryCondition::Neumann => {
                if j + 1 == self.n {
                    self.length
                } else {
                    j as f64 * self.h
                }
            }
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.x(j)).collect()
    }

    /// Quadrature weight of node `j`.
    pub fn weight(&self, j: usize) -> f64 {
        match self.bc {
            BoundaryCondition::Neumann if j == 0 || j + 1 == self.n => 0.5 * self.h,
            _ => self.h,
        }
    }
}

/// Values of an `n_components`-vector field on a grid, stored component-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid1D,
    n_components: usize,
    values: Vec<f64>,
}

impl Field {
    pub fn zeros(grid: &Grid1D, n_components: usize) -> Self {
        Field {
            grid: *grid,
            n_components,
            values: vec![0.0; n_components * grid.n_nodes()],
        }
    }

    pub fn from_fn(grid: &Grid1D, n_components: usize, f: impl Fn(usize, f64) -> f64) -> Self {
        let n = grid.n_nodes();
        let mut values = Vec::with_capacity(n_components * n);
        for i in 0..n_components {
            values.extend((0..n).map(|j| f(i, grid.x(j))));
        }
        Field {
            grid: *grid,
            n_components,
            values,
        }
    }

    pub fn from_values(grid: &Grid1D, n_components: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n_components * grid.n_nodes() {
            return Err(Error::Shape(format!(
                "expected {} values, got {}",
                n_components * grid.n_nodes(),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("field values"));
        }
        Ok(Field {
            grid: *grid,
            n_components,
            values,
        })
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn n_components(&self) -> usize {
        self.n_components
    }

    pub fn component(&self, i: usize) -> &[f64] {
        let n = self.grid.n_nodes();
        &self.values[i * n..(i + 1) * n]
    }

    pub fn component_mut(&mut self, i: usize) -> &mut [f64] {
        let n = self.grid.n_nodes();
        &mut self.values[i * n..(i + 1) * n]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn scale(&mut self, s: f64) {
        self.values.iter_mut().for_each(|v| *v *= s);
    }

    /// Euclidean norm of the state vector at node `j`.
    pub fn pointwise_norm(&self, j: usize) -> f64 {
        (0..self.n_components)
            .map(|i| self.component(i)[j].powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// `sum_j w_j |u(x_j)|^s`, the discrete `int |u|^s dx`.
    pub fn integral_of_power(&self, s: f64) -> f64 {
        (0..self.grid.n_nodes())
            .map(|j| self.grid.weight(j) * self.pointwise_norm(j).powf(s))
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct NormSet {
    pub l2: f64,
    pub sup: f64,
    pub h1_semi: f64,
    pub h2: f64,
}

/// Discrete `L2`, `L-infinity`, `H1`-seminorm and `H2` norms, with the
/// pointwise magnitude taken as the Euclidean norm over components.
pub fn discrete_norms(f: &Field) -> NormSet {
    let g = f.grid();
    let n = g.n_nodes();
    let h = g.h();
    let mut l2 = 0.0;
    let mut grad = 0.0;
    let mut second = 0.0;
    for i in 0..f.n_components() {
        let u = f.component(i);
        for (j, &v) in u.iter().enumerate() {
            l2 += g.weight(j) * v * v;
        }
        match g.bc() {
            BoundaryCondition::Dirichlet => {
                // boundary zeros are part of the stencil
                let at = |j: isize| -> f64 {
                    if j < 0 || j as usize >= n {
                        0.0
                    } else {
                        u[j as usize]
                    }
                };
                for j in -1..n as isize {
                    let du = (at(j + 1) - at(j)) / h;
                    grad += h * du * du;
                }
                for j in 0..n as isize {
                    let d2 = (at(j - 1) - 2.0 * at(j) + at(j + 1)) / (h * h);
                    second += h * d2 * d2;
                }
            }
            BoundaryCondition::Neumann => {
                for w in u.windows(2) {
                    let du = (w[1] - w[0]) / h;
                    grad += h * du * du;
                }
                for j in 0..n {
                    let d2 = neumann_second_difference(u, j, h);
                    second += g.weight(j) * d2 * d2;
                }
            }
        }
    }
    let sup = (0..n).map(|j| f.pointwise_norm(j)).fold(0.0, f64::max);
    NormSet {
        l2: l2.sqrt(),
        sup,
        h1_semi: grad.sqrt(),
        h2: (l2 + grad + second).sqrt(),
    }
}

/// Centered second difference in the interior, second-order one-sided
/// closures at the endpoints (first-order when only three nodes exist).
fn neumann_second_difference(u: &[f64], j: usize, h: f64) -> f64 {
    let n = u.len();
    let h2 = h * h;
    if j > 0 && j + 1 < n {
        return (u[j - 1] - 2.0 * u[j] + u[j + 1]) / h2;
    }
    let at = |k: usize| if j == 0 { u[k] } else { u[n - 1 - k] };
    if n >= 4 {
        (2.0 * at(0) - 5.0 * at(1) + 4.0 * at(2) - at(3)) / h2
    } else {
        (at(0) - 2.0 * at(1) + at(2)) / h2
    }
}

/// Poincare constant `c(Omega)` used by the certificates: `(pi/L)^2` for
/// Dirichlet, `0` for Neumann.
pub fn poincare_constant(grid: &Grid1D) -> f64 {
    match grid.bc() {
        BoundaryCondition::Dirichlet => (std::f64::consts::PI / grid.length()).powi(2),
        BoundaryCondition::Neumann => 0.0,
    }
}

/// First eigenvalue of the three-point Dirichlet Laplacian on the grid,
/// `(2/h^2)(1 - cos(pi h / L))`. Approaches `(pi/L)^2` from below.
pub fn discrete_poincare_constant(length: f64, n_interior: usize) -> f64 {
    let h = length / (n_interior + 1) as f64;
    let s = (std::f64::consts::PI * h / (2.0 * length)).sin();
    4.0 * s * s / (h * h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn grid_layout() {
        let d = Grid1D::new(1.0, 9, BoundaryCondition::Dirichlet).unwrap();
        assert_eq!(d.h(), 0.1);
        assert!((d.x(0) - 0.1).abs() < 1e-15 && (d.x(8) - 0.9).abs() < 1e-15);
        let n = Grid1D::new(1.0, 11, BoundaryCondition::Neumann).unwrap();
        assert_eq!(n.h(), 0.1);
        assert_eq!(n.x(0), 0.0);
        assert_eq!(n.x(10), 1.0);
        let xs = n.nodes();
        assert!(xs.windows(2).all(|w| w[1] > w[0]));
        assert!(Grid1D::new(1.0, 2, BoundaryCondition::Dirichlet).is_err());
        assert!(Grid1D::new(-1.0, 10, BoundaryCondition::Neumann).is_err());
    }

    #[test]
    fn constant_field_on_neumann() {
        let g = Grid1D::new(1.0, 50, BoundaryCondition::Neumann).unwrap();
        let f = Field::from_fn(&g, 1, |_, _| 1.0);
        let n = discrete_norms(&f);
        assert!((n.l2 - 1.0).abs() < 1e-14);
        assert_eq!(n.sup, 1.0);
        assert_eq!(n.h1_semi, 0.0);
        assert!((n.h2 - 1.0).abs() < 1e-14);
    }

    #[test]
    fn zero_field_norms_vanish() {
        for bc in [BoundaryCondition::Dirichlet, BoundaryCondition::Neumann] {
            let g = Grid1D::new(2.0, 20, bc).unwrap();
            assert_eq!(discrete_norms(&Field::zeros(&g, 2)), NormSet::default());
        }
    }

    #[test]
    fn sine_l2_converges_at_second_order() {
        // int_0^1 sin^2(pi x) dx = 1/2
        let exact = 0.5f64.sqrt();
        let errs: Vec<f64> = [20, 40, 80]
            .iter()
            .map(|&n| {
                let g = Grid1D::new(1.0, n - 1, BoundaryCondition::Dirichlet).unwrap();
                let f = Field::from_fn(&g, 1, |_, x| (PI * x).sin());
                (discrete_norms(&f).l2 - exact).abs()
            })
            .collect();
        // the midpoint rule is spectrally accurate for this periodic integrand
        assert!(errs.iter().all(|e| *e < 1e-12), "{errs:?}");

        // the H1 seminorm carries the O(h^2) error: (pi^2/2) c_h / pi^2
        let g = Grid1D::new(1.0, 199, BoundaryCondition::Dirichlet).unwrap();
        let f = Field::from_fn(&g, 1, |_, x| (PI * x).sin());
        let n = discrete_norms(&f);
        assert!((n.h1_semi - (PI * PI / 2.0).sqrt()).abs() < 1e-4);
    }

    #[test]
    fn poincare_examples() {
        let pi_grid = Grid1D::new(PI, 10, BoundaryCondition::Dirichlet).unwrap();
        assert!((poincare_constant(&pi_grid) - 1.0).abs() < 1e-15);
        let unit = Grid1D::new(1.0, 10, BoundaryCondition::Dirichlet).unwrap();
        assert!((poincare_constant(&unit) - 9.8696).abs() < 1e-4);
        for l in [0.5, 1.0, 7.0] {
            let g = Grid1D::new(l, 10, BoundaryCondition::Neumann).unwrap();
            assert_eq!(poincare_constant(&g), 0.0);
        }
    }

    #[test]
    fn discrete_eigenvalue_from_below_at_second_order() {
        let l = 1.0;
        let exact = PI * PI;
        let errs: Vec<f64> = [50, 100, 200]
            .iter()
            .map(|&n| {
                let c = discrete_poincare_constant(l, n);
                assert!(c < exact);
                exact - c
            })
            .collect();
        for w in errs.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!(order > 1.9, "order {order}");
        }
    }

    #[test]
    fn eigenfunction_reproduces_discrete_eigenvalue() {
        let l = 3.0;
        let n = 64;
        let g = Grid1D::new(l, n, BoundaryCondition::Dirichlet).unwrap();
        let f = Field::from_fn(&g, 1, |_, x| (PI * x / l).sin());
        let norms = discrete_norms(&f);
        let ratio = norms.h1_semi.powi(2) / norms.l2.powi(2);
        let c_h = discrete_poincare_constant(l, n);
        assert!((ratio - c_h).abs() < 1e-12 * c_h);
    }

    #[test]
    fn multicomponent_sup_uses_euclidean_norm() {
        let g = Grid1D::new(1.0, 5, BoundaryCondition::Neumann).unwrap();
        let f = Field::from_fn(&g, 2, |i, _| if i == 0 { 3.0 } else { 4.0 });
        assert_eq!(discrete_norms(&f).sup, 5.0);
    }

    proptest! {
        #[test]
        fn discrete_poincare_inequality_holds(
            vals in proptest::collection::vec(-10.0f64..10.0, 3..60),
            l in 0.5f64..10.0,
        ) {
            let g = Grid1D::new(l, vals.len(), BoundaryCondition::Dirichlet).unwrap();
            let f = Field::from_values(&g, 1, vals.clone()).unwrap();
            let n = discrete_norms(&f);
            let c_h = discrete_poincare_constant(l, vals.len());
            prop_assert!(c_h * n.l2 * n.l2 <= n.h1_semi * n.h1_semi * (1.0 + 1e-12) + 1e-300);
        }

        #[test]
        fn norm_set_invariants(
            vals in proptest::collection::vec(-10.0f64..10.0, 6..60),
            l in 0.5f64..10.0,
            neumann in any::<bool>(),
        ) {
            let bc = if neumann { BoundaryCondition::Neumann } else { BoundaryCondition::Dirichlet };
            let g = Grid1D::new(l, vals.len() / 2, bc).unwrap();
            let f = Field::from_values(&g, 2, vals[..2 * (vals.len() / 2)].to_vec()).unwrap();
            let n = discrete_norms(&f);
            prop_assert!(n.l2 >= 0.0 && n.sup >= 0.0 && n.h1_semi >= 0.0 && n.h2 >= 0.0);
            prop_assert!(n.l2 <= l.sqrt() * n.sup * (1.0 + 1e-12));
            prop_assert!(n.h2 >= n.l2);
        }
    }
}
