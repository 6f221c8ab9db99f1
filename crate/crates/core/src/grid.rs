//! Box domain `[0,L1] x [0,L2] x [-h,0]` on a node-centred uniform grid.
//!
//! Node `(i, j, k)` sits at `(i*d1, j*d2, -h + k*dz)`; `k = 0` is the bottom
//! and `k = nz` the top. Storage is z-major, then y, then x (x fastest).
//!
//! Boundary conditions: `v = 0` on the bottom and sides (Dirichlet nodes are
//! never unknowns), `dz v = 0` on the top through an even ghost reflection.
//! Where the top meets a side, Dirichlet wins.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest admissible cell count per axis.
pub const MIN_CELLS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub l1: f64,
    pub l2: f64,
    pub h: f64,
    pub n1: usize,
    pub n2: usize,
    pub nz: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundaryClass {
    Interior,
    /// `z = 0`, away from the sides.
    Top,
    /// `z = -h`, away from the sides.
    Bottom,
    /// Lateral faces, away from top and bottom.
    Side,
    /// Any node on two or more faces.
    Edge,
}

impl BoundaryClass {
    pub fn is_dirichlet(self) -> bool {
        matches!(
            self,
            BoundaryClass::Bottom | BoundaryClass::Side | BoundaryClass::Edge
        )
    }
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            l1: 1.0,
            l2: 1.0,
            h: 1.0,
            n1: 24,
            n2: 24,
            nz: 24,
        }
    }
}

impl GridSpec {
    pub fn new(l1: f64, l2: f64, h: f64, n1: usize, n2: usize, nz: usize) -> Result<Self> {
        let grid = GridSpec {
            l1,
            l2,
            h,
            n1,
            n2,
            nz,
        };
        grid.validate()?;
        Ok(grid)
    }

    /// Unit box with `n` cells on every axis.
    pub fn cube(n: usize) -> Result<Self> {
        Self::new(1.0, 1.0, 1.0, n, n, n)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("L1", self.l1), ("L2", self.l2), ("h", self.h)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::input(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, n) in [("n1", self.n1), ("n2", self.n2), ("nz", self.nz)] {
            if n < MIN_CELLS {
                return Err(Error::input(format!(
                    "{name} must be at least {MIN_CELLS}, got {n}"
                )));
            }
        }
        Ok(())
    }

    pub fn d1(&self) -> f64 {
        self.l1 / self.n1 as f64
    }

    pub fn d2(&self) -> f64 {
        self.l2 / self.n2 as f64
    }

    pub fn dz(&self) -> f64 {
        self.h / self.nz as f64
    }

    pub fn min_spacing(&self) -> f64 {
        self.d1().min(self.d2()).min(self.dz())
    }

    pub fn max_spacing(&self) -> f64 {
        self.d1().max(self.d2()).max(self.dz())
    }

    /// Nodes per axis.
    pub fn shape(&self) -> (usize, usize, usize) {
        (self.n1 + 1, self.n2 + 1, self.nz + 1)
    }

    pub fn len3(&self) -> usize {
        (self.n1 + 1) * (self.n2 + 1) * (self.nz + 1)
    }

    pub fn len2(&self) -> usize {
        (self.n1 + 1) * (self.n2 + 1)
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize, k: usize) -> usize {
        (k * (self.n2 + 1) + j) * (self.n1 + 1) + i
    }

    #[inline]
    pub fn idx2(&self, i: usize, j: usize) -> usize {
        j * (self.n1 + 1) + i
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        i as f64 * self.d1()
    }

    #[inline]
    pub fn y(&self, j: usize) -> f64 {
        j as f64 * self.d2()
    }

    #[inline]
    pub fn z(&self, k: usize) -> f64 {
        -self.h + k as f64 * self.dz()
    }

    pub fn classify(&self, i: usize, j: usize, k: usize) -> BoundaryClass {
        let side_x = i == 0 || i == self.n1;
        let side_y = j == 0 || j == self.n2;
        let bottom = k == 0;
        let top = k == self.nz;
        let faces = side_x as u8 + side_y as u8 + bottom as u8 + top as u8;
        match (faces, top, bottom) {
            (0, _, _) => BoundaryClass::Interior,
            (1, true, _) => BoundaryClass::Top,
            (1, _, true) => BoundaryClass::Bottom,
            (1, _, _) => BoundaryClass::Side,
            _ => BoundaryClass::Edge,
        }
    }

    /// True where the velocity is pinned to zero.
    #[inline]
    pub fn is_dirichlet(&self, i: usize, j: usize, k: usize) -> bool {
        i == 0 || i == self.n1 || j == 0 || j == self.n2 || k == 0
    }

    /// True for nodes off the lateral boundary.
    #[inline]
    pub fn is_horizontal_interior(&self, i: usize, j: usize) -> bool {
        i > 0 && i < self.n1 && j > 0 && j < self.n2
    }

    /// Per-node boundary labels in storage order.
    pub fn boundary_classes(&self) -> Vec<BoundaryClass> {
        let mut out = Vec::with_capacity(self.len3());
        for k in 0..=self.nz {
            for j in 0..=self.n2 {
                for i in 0..=self.n1 {
                    out.push(self.classify(i, j, k));
                }
            }
        }
        out
    }

    /// 1D trapezoidal weights along x.
    pub fn weights_x(&self) -> Vec<f64> {
        trapezoid_weights(self.n1, self.d1())
    }

    pub fn weights_y(&self) -> Vec<f64> {
        trapezoid_weights(self.n2, self.d2())
    }

    pub fn weights_z(&self) -> Vec<f64> {
        trapezoid_weights(self.nz, self.dz())
    }

    /// Product trapezoidal weights on the horizontal grid.
    pub fn weights2(&self) -> Vec<f64> {
        let wx = self.weights_x();
        let wy = self.weights_y();
        let mut w = Vec::with_capacity(self.len2());
        for wyj in &wy {
            for wxi in &wx {
                w.push(wxi * wyj);
            }
        }
        w
    }

    /// Product trapezoidal weights on the full node grid.
    pub fn weights3(&self) -> Vec<f64> {
        let w2 = self.weights2();
        let wz = self.weights_z();
        let mut w = Vec::with_capacity(self.len3());
        for wzk in &wz {
            for w2ij in &w2 {
                w.push(w2ij * wzk);
            }
        }
        w
    }

    /// Trapezoidal depth seen by unknown nodes (`k >= 1`): `h - dz/2`.
    pub fn effective_depth(&self) -> f64 {
        self.h - 0.5 * self.dz()
    }

    pub fn volume(&self) -> f64 {
        self.l1 * self.l2 * self.h
    }

    /// Same grid with every cell count multiplied by `factor`.
    pub fn refined(&self, factor: usize) -> Self {
        GridSpec {
            n1: self.n1 * factor,
            n2: self.n2 * factor,
            nz: self.nz * factor,
            ..*self
        }
    }
}

fn trapezoid_weights(n: usize, d: f64) -> Vec<f64> {
    (0..=n)
        .map(|i| if i == 0 || i == n { 0.5 * d } else { d })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    #[test]
    fn rejects_bad_dimensions() {
        assert!(GridSpec::new(1.0, 1.0, 1.0, 3, 8, 8).is_err());
        assert!(GridSpec::new(0.0, 1.0, 1.0, 8, 8, 8).is_err());
        assert!(GridSpec::new(1.0, -1.0, 1.0, 8, 8, 8).is_err());
        assert!(GridSpec::new(1.0, 1.0, f64::NAN, 8, 8, 8).is_err());
        assert!(GridSpec::new(2.0, 1.0, 0.5, 4, 4, 4).is_ok());
    }

    #[test]
    fn spacings_are_exact_quotients() {
        let g = GridSpec::new(2.0, 3.0, 0.7, 8, 12, 7).unwrap();
        assert_eq!(g.d1(), 2.0 / 8.0);
        assert_eq!(g.d2(), 3.0 / 12.0);
        assert_eq!(g.dz(), 0.7 / 7.0);
        assert!((g.z(g.nz)).abs() < 1e-15);
        assert_eq!(g.z(0), -0.7);
    }

    #[test]
    fn labels_partition_nodes() {
        let g = GridSpec::new(1.0, 1.0, 1.0, 4, 5, 6).unwrap();
        let labels = g.boundary_classes();
        assert_eq!(labels.len(), g.len3());
        let mut counts: HashMap<BoundaryClass, usize> = HashMap::new();
        for l in &labels {
            *counts.entry(*l).or_default() += 1;
        }
        let (a, b, c) = (g.n1 - 1, g.n2 - 1, g.nz - 1);
        assert_eq!(counts[&BoundaryClass::Interior], a * b * c);
        assert_eq!(counts[&BoundaryClass::Top], a * b);
        assert_eq!(counts[&BoundaryClass::Bottom], a * b);
        assert_eq!(counts[&BoundaryClass::Side], 2 * (a + b) * c);
        let total: usize = counts.values().sum();
        assert_eq!(total, g.len3());
        // Top face minus the side edges.
        assert_eq!(g.classify(0, 2, g.nz), BoundaryClass::Edge);
        assert!(g.classify(0, 2, g.nz).is_dirichlet());
        assert!(!g.classify(2, 2, g.nz).is_dirichlet());
    }

    #[test]
    fn weights_integrate_volume() {
        let g = GridSpec::new(2.0, 1.5, 0.5, 6, 5, 4).unwrap();
        let vol: f64 = g.weights3().iter().sum();
        assert!((vol - g.volume()).abs() < 1e-13);
        let area: f64 = g.weights2().iter().sum();
        assert!((area - 3.0).abs() < 1e-13);
    }
}
