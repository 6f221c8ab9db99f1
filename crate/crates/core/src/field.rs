//! Grid-function containers.

use crate::error::{Error, Result};
use crate::grid::GridSpec;

/// Default tolerance on boundary-condition residuals after `apply_bc`.
pub const BC_TOL: f64 = 1e-12;

/// Horizontal velocity `v = (u1, u2)` on every node of the 3D grid.
#[derive(Debug, Clone, PartialEq)]
pub struct HorizontalField {
    grid: GridSpec,
    pub u1: Vec<f64>,
    pub u2: Vec<f64>,
}

/// Scalar on the horizontal `(n1+1) x (n2+1)` node grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Scalar2D {
    grid: GridSpec,
    pub values: Vec<f64>,
}

/// Scalar on the full 3D node grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Scalar3D {
    grid: GridSpec,
    pub values: Vec<f64>,
}

impl HorizontalField {
    pub fn zeros(grid: &GridSpec) -> Self {
        let n = grid.len3();
        HorizontalField {
            grid: *grid,
            u1: vec![0.0; n],
            u2: vec![0.0; n],
        }
    }

    pub fn from_components(grid: &GridSpec, u1: Vec<f64>, u2: Vec<f64>) -> Result<Self> {
        let n = grid.len3();
        if u1.len() != n || u2.len() != n {
            return Err(Error::input(format!(
                "component lengths ({}, {}) do not match grid node count {n}",
                u1.len(),
                u2.len()
            )));
        }
        Ok(HorizontalField {
            grid: *grid,
            u1,
            u2,
        })
    }

    /// Samples `f(x, y, z)` at every node. No boundary conditions applied.
    pub fn from_fn(grid: &GridSpec, mut f: impl FnMut(f64, f64, f64) -> (f64, f64)) -> Self {
        let mut out = Self::zeros(grid);
        for k in 0..=grid.nz {
            let z = grid.z(k);
            for j in 0..=grid.n2 {
                let y = grid.y(j);
                for i in 0..=grid.n1 {
                    let (a, b) = f(grid.x(i), y, z);
                    let p = grid.idx(i, j, k);
                    out.u1[p] = a;
                    out.u2[p] = b;
                }
            }
        }
        out
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.u1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u1.is_empty()
    }

    pub fn components(&self) -> [&[f64]; 2] {
        [&self.u1, &self.u2]
    }

    pub fn components_mut(&mut self) -> [&mut Vec<f64>; 2] {
        [&mut self.u1, &mut self.u2]
    }

    pub fn check_grid(&self, other: &GridSpec) -> Result<()> {
        if &self.grid != other {
            return Err(Error::input(format!(
                "field grid {:?} does not match {:?}",
                self.grid, other
            )));
        }
        Ok(())
    }

    pub fn check_same(&self, other: &HorizontalField) -> Result<()> {
        other.check_grid(&self.grid)
    }

    pub fn is_finite(&self) -> bool {
        self.u1.iter().chain(&self.u2).all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.u1
            .iter()
            .chain(&self.u2)
            .fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// `self += a * x`
    pub fn axpy(&mut self, a: f64, x: &HorizontalField) {
        for (s, v) in self.u1.iter_mut().zip(&x.u1) {
            *s += a * v;
        }
        for (s, v) in self.u2.iter_mut().zip(&x.u2) {
            *s += a * v;
        }
    }

    pub fn scale(&mut self, a: f64) {
        self.u1.iter_mut().chain(self.u2.iter_mut()).for_each(|v| *v *= a);
    }

    pub fn scaled(&self, a: f64) -> Self {
        let mut out = self.clone();
        out.scale(a);
        out
    }

    pub fn add(&self, other: &HorizontalField) -> Self {
        let mut out = self.clone();
        out.axpy(1.0, other);
        out
    }

    pub fn sub(&self, other: &HorizontalField) -> Self {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }

    /// Zeroes every Dirichlet node (bottom, sides and their edges).
    /// The top Neumann condition is carried by the ghost convention.
    pub fn apply_bc(&mut self) {
        let g = self.grid;
        for k in 0..=g.nz {
            for j in 0..=g.n2 {
                for i in 0..=g.n1 {
                    if g.is_dirichlet(i, j, k) {
                        let p = g.idx(i, j, k);
                        self.u1[p] = 0.0;
                        self.u2[p] = 0.0;
                    }
                }
            }
        }
    }

    /// Largest `|v|` on Dirichlet nodes. The top condition holds identically
    /// under the even ghost reflection, so it contributes nothing here.
    pub fn bc_residual(&self) -> f64 {
        let g = self.grid;
        let mut r = 0.0_f64;
        for k in 0..=g.nz {
            for j in 0..=g.n2 {
                for i in 0..=g.n1 {
                    if g.is_dirichlet(i, j, k) {
                        let p = g.idx(i, j, k);
                        r = r.max(self.u1[p].abs()).max(self.u2[p].abs());
                    }
                }
            }
        }
        r
    }

    pub fn check_bc(&self, tol: f64) -> Result<()> {
        let r = self.bc_residual();
        if r > tol {
            return Err(Error::input(format!(
                "boundary-condition residual {r:.3e} exceeds tolerance {tol:.1e}"
            )));
        }
        Ok(())
    }
}

impl Scalar2D {
    pub fn zeros(grid: &GridSpec) -> Self {
        Scalar2D {
            grid: *grid,
            values: vec![0.0; grid.len2()],
        }
    }

    pub fn from_values(grid: &GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len2() {
            return Err(Error::input(format!(
                "2D field length {} does not match {}",
                values.len(),
                grid.len2()
            )));
        }
        Ok(Scalar2D {
            grid: *grid,
            values,
        })
    }

    pub fn from_fn(grid: &GridSpec, mut f: impl FnMut(f64, f64) -> f64) -> Self {
        let mut out = Self::zeros(grid);
        for j in 0..=grid.n2 {
            for i in 0..=grid.n1 {
                out.values[grid.idx2(i, j)] = f(grid.x(i), grid.y(j));
            }
        }
        out
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.idx2(i, j)]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Area-weighted mean (trapezoidal).
    pub fn mean(&self) -> f64 {
        let w = self.grid.weights2();
        let s: f64 = self.values.iter().zip(&w).map(|(v, w)| v * w).sum();
        s / (self.grid.l1 * self.grid.l2)
    }

    pub fn remove_mean(&mut self) {
        let m = self.mean();
        self.values.iter_mut().for_each(|v| *v -= m);
    }
}

impl Scalar3D {
    pub fn zeros(grid: &GridSpec) -> Self {
        Scalar3D {
            grid: *grid,
            values: vec![0.0; grid.len3()],
        }
    }

    pub fn from_fn(grid: &GridSpec, mut f: impl FnMut(f64, f64, f64) -> f64) -> Self {
        let mut out = Self::zeros(grid);
        for k in 0..=grid.nz {
            for j in 0..=grid.n2 {
                for i in 0..=grid.n1 {
                    out.values[grid.idx(i, j, k)] = f(grid.x(i), grid.y(j), grid.z(k));
                }
            }
        }
        out
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn at(&self, i: usize, j: usize, k: usize) -> f64 {
        self.values[self.grid.idx(i, j, k)]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Horizontal slice at level `k`.
    pub fn level(&self, k: usize) -> Scalar2D {
        let n = self.grid.len2();
        Scalar2D {
            grid: self.grid,
            values: self.values[k * n..(k + 1) * n].to_vec(),
        }
    }
}
