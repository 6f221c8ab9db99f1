#![allow(dead_code, clippy::neg_cmp_op_on_partial_ord)]

use pe3d_core::kick::smooth_random_field;
use pe3d_core::norms::{inner_h, norm_h};
use pe3d_core::projection::{constraint_norm, project_h, PoissonSolveParams, PROJ_TOL};
use pe3d_core::{GridSpec, HorizontalField};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Uniform(-1, 1) nodal values, boundary conditions not applied.
pub fn white_noise(grid: &GridSpec, seed: u64) -> HorizontalField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = grid.len3();
    let u1 = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let u2 = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    HorizontalField::from_components(grid, u1, u2).unwrap()
}

/// Even seeds give smooth fields, odd seeds white noise; unit H-norm.
pub fn test_field(grid: &GridSpec, seed: u64) -> HorizontalField {
    let v = if seed.is_multiple_of(2) {
        smooth_random_field(grid, seed).unwrap()
    } else {
        white_noise(grid, seed)
    };
    v.scaled(1.0 / norm_h(&v))
}

#[derive(Debug, Default, Clone, Copy)]
pub struct ProjectionCheck {
    pub idempotence: f64,
    pub orthogonality: f64,
    pub contraction: f64,
    pub residual: f64,
}

impl ProjectionCheck {
    pub fn failures(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        if !(self.idempotence <= 10.0 * PoissonSolveParams::default().rel_tol) {
            out.push("idempotence");
        }
        if !(self.orthogonality <= ORTHO_RTOL) {
            out.push("orthogonality");
        }
        if !(self.contraction <= 1.0 + 1e-10) {
            out.push("contraction");
        }
        if !(self.residual <= PROJ_TOL) {
            out.push("constraint residual");
        }
        out
    }
}

/// Relative orthogonality tolerance: |<w - Pw, v>| / (|w - Pw| |v|).
pub const ORTHO_RTOL: f64 = 1e-9;

/// Measures the four projection invariants of `w` against a basis of
/// already projected fields. Idempotence and orthogonality are relative.
pub fn check_projection(w: &HorizontalField, basis: &[HorizontalField]) -> ProjectionCheck {
    let p = PoissonSolveParams::default();
    let pw = project_h(w, &p).unwrap();
    let ppw = project_h(&pw, &p).unwrap();
    let wn = norm_h(w);
    let mut wb = w.clone();
    wb.apply_bc();
    let d = wb.sub(&pw);
    let dn = norm_h(&d);
    let orthogonality = basis
        .iter()
        .map(|v| {
            let s = dn * norm_h(v);
            if s == 0.0 {
                0.0
            } else {
                inner_h(&d, v).unwrap().abs() / s
            }
        })
        .fold(0.0, f64::max);
    ProjectionCheck {
        idempotence: norm_h(&ppw.sub(&pw)) / wn,
        orthogonality,
        contraction: norm_h(&pw) / wn,
        residual: constraint_norm(&pw),
    }
}

pub fn projected_basis(grid: &GridSpec, seeds: std::ops::Range<u64>) -> Vec<HorizontalField> {
    seeds
        .map(|s| project_h(&test_field(grid, 1_000 + s), &PoissonSolveParams::default()).unwrap())
        .collect()
}
