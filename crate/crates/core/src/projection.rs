//! Discrete projection onto the constrained space H and the Stokes-type
//! operator `A = -P lap`.
//!
//! A field in H vanishes on Dirichlet nodes and satisfies
//! `div2(int v dz) = 0` at every horizontal node. The orthogonal complement
//! (in the trapezoid-weighted product, within fields that vanish on
//! Dirichlet nodes) consists of z-independent fields `grad2 q` restricted to
//! the unknown nodes: lateral boundary columns and the bottom level are cut
//! off. Enforcing the constraint on `v - grad2 q` gives
//! `h_eff * div2(mask(grad2 q)) = div2(int v dz)` with `h_eff = h - dz/2`,
//! which is solved by conjugate gradients.

use std::cell::RefCell;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{HorizontalField, Scalar2D};
use crate::grid::GridSpec;
use crate::linalg::{pcg, CgOutcome, CgTolerance, SeparableSolver};
use crate::norms::{inner_h_unchecked, norm_2d};
use crate::operators::{constraint_residual, div2, laplacian_into, transport};

/// Absolute bound on the weighted L2 norm of `div2(int v dz)` after projection.
pub const PROJ_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoissonSolveParams {
    pub rel_tol: f64,
    /// Defaults to `10 * n1 * n2` when absent.
    pub max_iter: Option<usize>,
}

impl Default for PoissonSolveParams {
    fn default() -> Self {
        PoissonSolveParams {
            rel_tol: 1e-10,
            max_iter: None,
        }
    }
}

impl PoissonSolveParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.rel_tol < 1.0) {
            return Err(Error::input(format!("rel_tol must lie in (0,1), got {}", self.rel_tol)));
        }
        if self.max_iter == Some(0) {
            return Err(Error::input("max_iter must be at least 1"));
        }
        Ok(())
    }

    fn max_iter_for(&self, g: &GridSpec) -> usize {
        self.max_iter.unwrap_or(10 * g.n1 * g.n2)
    }
}

fn dot_w(w: &[f64]) -> impl Fn(&[f64], &[f64]) -> f64 + '_ {
    move |a, b| {
        let mut s = 0.0;
        for i in 0..w.len() {
            s += w[i] * a[i] * b[i];
        }
        s
    }
}

/// Compact 5-point Neumann Laplacian (even ghost on all four sides), negated.
fn neg_neumann_laplacian(g: &GridSpec, q: &[f64], out: &mut [f64]) {
    let (n1, n2) = (g.n1, g.n2);
    let (cx, cy) = (1.0 / (g.d1() * g.d1()), 1.0 / (g.d2() * g.d2()));
    for j in 0..=n2 {
        for i in 0..=n1 {
            let p = g.idx2(i, j);
            let c = q[p];
            let xl = if i == 0 { q[p + 1] } else { q[p - 1] };
            let xr = if i == n1 { q[p - 1] } else { q[p + 1] };
            let yl = if j == 0 { q[p + n1 + 1] } else { q[p - n1 - 1] };
            let yr = if j == n2 { q[p - n1 - 1] } else { q[p + n1 + 1] };
            out[p] = -((xl - 2.0 * c + xr) * cx + (yl - 2.0 * c + yr) * cy);
        }
    }
}

/// Solves `lap2 q = rhs - mean(rhs)` with homogeneous Neumann conditions and
/// returns the zero-mean solution.
pub fn solve_poisson_neumann(rhs: &Scalar2D, params: &PoissonSolveParams) -> Result<Scalar2D> {
    params.validate()?;
    let g = *rhs.grid();
    let mut b = rhs.clone();
    b.remove_mean();
    b.values.iter_mut().for_each(|v| *v = -*v);
    let w = g.weights2();
    let mut q = vec![0.0; g.len2()];
    let tol = CgTolerance {
        rel_tol: params.rel_tol,
        abs_tol: 0.0,
        max_iter: params.max_iter_for(&g),
    };
    pcg(
        "neumann poisson",
        &b.values,
        &mut q,
        |x, y| neg_neumann_laplacian(&g, x, y),
        |r, z| z.copy_from_slice(r),
        dot_w(&w),
        tol,
    )?;
    let mut out = Scalar2D::from_values(&g, q)?;
    out.remove_mean();
    Ok(out)
}

/// Centred gradient on horizontal-interior nodes, zero on the lateral ring.
fn masked_grad(g: &GridSpec, q: &[f64], g1: &mut [f64], g2: &mut [f64]) {
    let (i2d1, i2d2) = (0.5 / g.d1(), 0.5 / g.d2());
    let sy = g.n1 + 1;
    g1.iter_mut().for_each(|v| *v = 0.0);
    g2.iter_mut().for_each(|v| *v = 0.0);
    for j in 1..g.n2 {
        for i in 1..g.n1 {
            let p = g.idx2(i, j);
            g1[p] = (q[p + 1] - q[p - 1]) * i2d1;
            g2[p] = (q[p + sy] - q[p - sy]) * i2d2;
        }
    }
}

/// `div2` with the constraint stencils on raw horizontal arrays.
fn div2_raw(g: &GridSpec, w1: &[f64], w2: &[f64], out: &mut [f64]) {
    let (n1, n2) = (g.n1, g.n2);
    let (d1, d2) = (g.d1(), g.d2());
    let sy = n1 + 1;
    for j in 0..=n2 {
        for i in 0..=n1 {
            let p = g.idx2(i, j);
            let dx = if i == 0 {
                (w1[p + 1] - w1[p]) / d1
            } else if i == n1 {
                (w1[p] - w1[p - 1]) / d1
            } else {
                (w1[p + 1] - w1[p - 1]) / (2.0 * d1)
            };
            let dy = if j == 0 {
                (w2[p + sy] - w2[p]) / d2
            } else if j == n2 {
                (w2[p] - w2[p - sy]) / d2
            } else {
                (w2[p + sy] - w2[p - sy]) / (2.0 * d2)
            };
            out[p] = dx + dy;
        }
    }
}

/// Projector bound to one grid; reuses scratch buffers across calls.
#[derive(Debug, Clone)]
pub struct Projector {
    grid: GridSpec,
    params: PoissonSolveParams,
    w2: Vec<f64>,
    /// Potential from the previous call.
    last_q: Vec<f64>,
    pub last_outcome: Option<CgOutcome>,
}

impl Projector {
    pub fn new(grid: &GridSpec, params: PoissonSolveParams) -> Result<Self> {
        grid.validate()?;
        params.validate()?;
        Ok(Projector {
            grid: *grid,
            params,
            w2: grid.weights2(),
            last_q: vec![0.0; grid.len2()],
            last_outcome: None,
        })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    /// Projects in place. Dirichlet values of `v` are discarded first.
    pub fn project(&mut self, v: &mut HorizontalField) -> Result<()> {
        v.check_grid(&self.grid)?;
        if !v.is_finite() {
            return Err(Error::input("project_H: field has non-finite entries"));
        }
        v.apply_bc();
        let g = self.grid;
        let (w1, w2) = transport(v);
        let r = div2(&w1, &w2).expect("same grid");
        let heff = g.effective_depth();
        let rnorm = norm_2d(&r);
        // Round-off in div2(W) is about eps * |W| / d and carries components
        // in the null space of the potential operator, which no solve can
        // remove. The floor keeps the target above that level.
        let scale = (norm_2d(&w1).powi(2) + norm_2d(&w2).powi(2)).sqrt() / g.d1().min(g.d2());
        let floor = 1e-13 * scale;
        if rnorm <= floor {
            self.last_outcome = Some(CgOutcome {
                iterations: 0,
                residual: 0.0,
            });
            return Ok(());
        }
        // (-L) q = -r / h_eff, with L = div2 . mask . grad2
        let b: Vec<f64> = r.values.iter().map(|x| -x / heff).collect();
        let tol = CgTolerance {
            rel_tol: self.params.rel_tol.min(1e-2 * PROJ_TOL / rnorm),
            abs_tol: floor / heff,
            max_iter: self.params.max_iter_for(&g),
        };
        let n2d = g.len2();
        let mut g1 = vec![0.0; n2d];
        let mut g2 = vec![0.0; n2d];
        let mut q = vec![0.0; n2d];
        let outcome = pcg(
            "projection potential",
            &b,
            &mut q,
            |x, y| {
                masked_grad(&g, x, &mut g1, &mut g2);
                div2_raw(&g, &g1, &g2, y);
                y.iter_mut().for_each(|v| *v = -*v);
            },
            |r, z| z.copy_from_slice(r),
            dot_w(&self.w2),
            tol,
        )?;
        self.last_outcome = Some(outcome);
        masked_grad(&g, &q, &mut g1, &mut g2);
        for k in 1..=g.nz {
            let off = k * n2d;
            for p in 0..n2d {
                v.u1[off + p] -= g1[p];
                v.u2[off + p] -= g2[p];
            }
        }
        self.last_q = q;
        Ok(())
    }

    /// Potential of the most recent projection.
    pub fn last_potential(&self) -> Scalar2D {
        let mut q = Scalar2D::from_values(&self.grid, self.last_q.clone()).expect("len");
        q.remove_mean();
        q
    }
}

/// Orthogonal projection onto discrete H.
pub fn project_h(w: &HorizontalField, params: &PoissonSolveParams) -> Result<HorizontalField> {
    let mut p = Projector::new(w.grid(), *params)?;
    let mut v = w.clone();
    p.project(&mut v)?;
    Ok(v)
}

/// Weighted L2 norm of `div2(int v dz)`.
pub fn constraint_norm(v: &HorizontalField) -> f64 {
    norm_2d(&constraint_residual(v))
}

/// `A v = P(-lap v)`.
pub fn apply_a(v: &HorizontalField, params: &PoissonSolveParams) -> Result<HorizontalField> {
    let lap = crate::operators::laplacian3(v, v.grid())?;
    project_h(&lap.scaled(-1.0), params)
}

pub(crate) fn to_flat(v: &HorizontalField) -> Vec<f64> {
    let mut out = Vec::with_capacity(2 * v.len());
    out.extend_from_slice(&v.u1);
    out.extend_from_slice(&v.u2);
    out
}

pub(crate) fn from_flat(g: &GridSpec, x: &[f64]) -> HorizontalField {
    let n = g.len3();
    HorizontalField::from_components(g, x[..n].to_vec(), x[n..].to_vec()).expect("len")
}

pub(crate) fn flat_h_dot(g: &GridSpec) -> impl Fn(&[f64], &[f64]) -> f64 {
    let w = g.weights3();
    move |a, b| {
        let n = w.len();
        let mut s = 0.0;
        for p in 0..n {
            s += w[p] * (a[p] * b[p] + a[n + p] * b[n + p]);
        }
        s
    }
}

#[derive(Debug, Clone)]
pub struct EigenEstimate {
    pub lambda: f64,
    /// Unit-H-norm eigenvector in H.
    pub mode: HorizontalField,
    pub iterations: usize,
}

/// Smallest eigenvalue of `A` on discrete H by inverse iteration. Each
/// iteration solves `A x = u` with conjugate gradients preconditioned by the
/// projected inverse Laplacian.
pub fn smallest_eigenvalue_a(grid: &GridSpec, params: &PoissonSolveParams) -> Result<EigenEstimate> {
    grid.validate()?;
    let g = *grid;
    let n = g.len3();
    let proj = RefCell::new(Projector::new(&g, *params)?);
    let sep = SeparableSolver::new(&g);
    let dot = flat_h_dot(&g);

    // smooth start with a little deterministic noise so no symmetry class is missed
    let mut seed = 0x9e3779b97f4a7c15_u64;
    let mut start = HorizontalField::from_fn(&g, |x, y, z| {
        let s = (std::f64::consts::PI * x / g.l1).sin() * (std::f64::consts::PI * y / g.l2).sin();
        let c = (std::f64::consts::PI * z / (2.0 * g.h)).cos();
        seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let noise = ((seed >> 11) as f64 / (1u64 << 53) as f64) - 0.5;
        (s * c * (1.0 + 0.3 * y) + 1e-2 * noise, s * c * (1.0 - 0.2 * x) - 1e-2 * noise)
    });
    proj.borrow_mut().project(&mut start)?;
    let mut u = to_flat(&start);
    let nu = dot(&u, &u).sqrt();
    u.iter_mut().for_each(|v| *v /= nu);

    let err: RefCell<Option<Error>> = RefCell::new(None);
    let project_flat = |y: &mut [f64]| {
        let mut f = from_flat(&g, y);
        if let Err(e) = proj.borrow_mut().project(&mut f) {
            err.borrow_mut().get_or_insert(e);
        }
        y[..n].copy_from_slice(&f.u1);
        y[n..].copy_from_slice(&f.u2);
    };
    let apply_op = |x: &[f64], y: &mut [f64]| {
        laplacian_into(&g, &x[..n], &mut y[..n]);
        laplacian_into(&g, &x[n..], &mut y[n..]);
        y.iter_mut().for_each(|v| *v = -*v);
        project_flat(y);
    };
    let precond = |r: &[f64], z: &mut [f64]| {
        sep.solve(0.0, 1.0, &r[..n], &mut z[..n]);
        sep.solve(0.0, 1.0, &r[n..], &mut z[n..]);
        project_flat(z);
    };
    let take_err = || err.borrow_mut().take().map_or(Ok(()), Err);

    let mut au = vec![0.0; 2 * n];
    apply_op(&u, &mut au);
    take_err()?;
    let mut lambda = dot(&u, &au);
    let max_outer = 500;
    for it in 1..=max_outer {
        let mut x: Vec<f64> = u.iter().map(|v| v / lambda).collect();
        pcg(
            "inverse iteration",
            &u,
            &mut x,
            apply_op,
            precond,
            &dot,
            CgTolerance {
                rel_tol: params.rel_tol,
                abs_tol: 0.0,
                max_iter: 2000,
            },
        )?;
        take_err()?;
        let nx = dot(&x, &x).sqrt();
        x.iter_mut().for_each(|v| *v /= nx);
        u = x;
        apply_op(&u, &mut au);
        take_err()?;
        let new = dot(&u, &au);
        let change = (new - lambda).abs();
        lambda = new;
        if change <= 1e-8 * lambda {
            return Ok(EigenEstimate {
                lambda,
                mode: from_flat(&g, &u),
                iterations: it,
            });
        }
    }
    Err(Error::Solver {
        solver: "inverse iteration",
        iterations: max_outer,
        residual: f64::NAN,
    })
}

/// Rayleigh quotient `<A v, v> / <v, v>` for `v` in H.
pub fn rayleigh_quotient(v: &HorizontalField, params: &PoissonSolveParams) -> Result<f64> {
    let av = apply_a(v, params)?;
    Ok(inner_h_unchecked(&av, v) / inner_h_unchecked(v, v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::norms::{inner_h, norm_h, norm_v2};
    use crate::operators::transport;
    use std::f64::consts::PI;

    fn params() -> PoissonSolveParams {
        PoissonSolveParams::default()
    }

    #[test]
    fn neumann_solver_trivial_cases() {
        let g = GridSpec::cube(8).unwrap();
        let z = Scalar2D::zeros(&g);
        assert_eq!(solve_poisson_neumann(&z, &params()).unwrap().max_abs(), 0.0);
        let one = Scalar2D::from_fn(&g, |_, _| 1.0);
        assert!(solve_poisson_neumann(&one, &params()).unwrap().max_abs() < 1e-14);
    }

    #[test]
    fn neumann_solver_cosine_mode_second_order() {
        let mut errs = Vec::new();
        for n in [8, 16, 32] {
            let g = GridSpec::new(2.0, 1.0, 1.0, n, n, 4).unwrap();
            let rhs = Scalar2D::from_fn(&g, |x, _| (PI * x / 2.0).cos());
            let q = solve_poisson_neumann(&rhs, &params()).unwrap();
            let exact = Scalar2D::from_fn(&g, |x, _| -(2.0 / PI).powi(2) * (PI * x / 2.0).cos());
            let e = q
                .values
                .iter()
                .zip(&exact.values)
                .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
            errs.push(e);
        }
        assert!((errs[0] / errs[1]).log2() > 1.9, "{errs:?}");
        assert!((errs[1] / errs[2]).log2() > 1.9, "{errs:?}");
    }

    #[test]
    fn neumann_solver_reports_nonconvergence() {
        let g = GridSpec::cube(16).unwrap();
        let rhs = Scalar2D::from_fn(&g, |x, y| (3.0 * x).sin() + y * y);
        let p = PoissonSolveParams {
            rel_tol: 1e-10,
            max_iter: Some(2),
        };
        assert!(matches!(solve_poisson_neumann(&rhs, &p), Err(Error::Solver { .. })));
    }

    fn smooth_field(g: &GridSpec, a: f64) -> HorizontalField {
        let mut v = HorizontalField::from_fn(g, |x, y, z| {
            (
                (a * x + y).sin() * (z + 0.3).cos() + x * y,
                (x - a * y * z).cos() + 0.5 * z,
            )
        });
        v.apply_bc();
        v
    }

    #[test]
    fn projection_enforces_constraint_and_is_idempotent() {
        let g = GridSpec::new(1.0, 1.5, 0.8, 10, 12, 8).unwrap();
        let w = smooth_field(&g, 1.3);
        let v = project_h(&w, &params()).unwrap();
        assert!(constraint_norm(&v) <= PROJ_TOL);
        assert!(v.bc_residual() == 0.0);
        let vv = project_h(&v, &params()).unwrap();
        assert!(norm_h(&vv.sub(&v)) <= 10.0 * 1e-10 * norm_h(&w));
        assert!(norm_h(&v) <= norm_h(&w) * (1.0 + 1e-10));
        // u3 at the top vanishes with the constraint
        let u3 = crate::operators::u3_diagnostic(&v);
        let top = u3.level(g.nz);
        assert!(norm_2d(&top) <= PROJ_TOL);
    }

    #[test]
    fn projection_is_orthogonal() {
        let g = GridSpec::new(1.0, 1.0, 1.0, 8, 8, 6).unwrap();
        let w = smooth_field(&g, 2.1);
        let pw = project_h(&w, &params()).unwrap();
        let mut wb = w.clone();
        wb.apply_bc();
        let d = wb.sub(&pw);
        for a in [0.3, 1.7, -2.2] {
            let v = project_h(&smooth_field(&g, a), &params()).unwrap();
            let ip = inner_h(&d, &v).unwrap();
            assert!(ip.abs() <= 1e-9 * norm_h(&d) * norm_h(&v), "{ip}");
        }
    }

    #[test]
    fn gradient_field_is_annihilated() {
        // Centred differences of cos(pi x) cos(pi y) are proportional to the
        // analytic gradient, so this one is removed to solver accuracy.
        let g = GridSpec::cube(12).unwrap();
        let w = HorizontalField::from_fn(&g, |x, y, _| {
            let (sx, cx) = (PI * x).sin_cos();
            let (sy, cy) = (PI * y).sin_cos();
            (-PI * sx * cy, -PI * cx * sy)
        });
        let out = project_h(&w, &params()).unwrap();
        assert!(norm_h(&out) <= 10.0 * 1e-10 * norm_h(&w));

        // p = x^2 y^3: annihilated up to O(d^2)
        let mut errs = Vec::new();
        for n in [8, 16, 32] {
            let g = GridSpec::cube(n).unwrap();
            let w = HorizontalField::from_fn(&g, |x, y, _| (2.0 * x * y.powi(3), 3.0 * x * x * y * y));
            let out = project_h(&w, &params()).unwrap();
            errs.push(norm_h(&out) / norm_h(&w));
        }
        assert!(errs[2] < 0.05, "{errs:?}");
        assert!((errs[0] / errs[1]).log2() > 1.5, "{errs:?}");
        assert!((errs[1] / errs[2]).log2() > 1.5, "{errs:?}");
    }

    #[test]
    fn divergence_free_transport_is_fixed() {
        let g = GridSpec::cube(8).unwrap();
        let v = project_h(&smooth_field(&g, 0.7), &params()).unwrap();
        let again = project_h(&v, &params()).unwrap();
        assert!(norm_h(&again.sub(&v)) <= 1e-10 * norm_h(&v));
        let (w1, w2) = transport(&v);
        let d = crate::operators::div2(&w1, &w2).unwrap();
        assert!(norm_2d(&d) <= PROJ_TOL);
    }

    #[test]
    fn operator_a_symmetric_and_positive() {
        let g = GridSpec::new(1.0, 1.0, 1.0, 8, 8, 8).unwrap();
        let u = project_h(&smooth_field(&g, 0.4), &params()).unwrap();
        let w = project_h(&smooth_field(&g, -1.9), &params()).unwrap();
        let au = apply_a(&u, &params()).unwrap();
        let aw = apply_a(&w, &params()).unwrap();
        let l = inner_h(&au, &w).unwrap();
        let r = inner_h(&u, &aw).unwrap();
        assert!((l - r).abs() <= 1e-8 * l.abs().max(r.abs()));
        let e = inner_h(&au, &u).unwrap();
        let nv = norm_v2(&u).unwrap();
        assert!(e > 0.0);
        assert!((e - nv).abs() <= 0.15 * nv, "{e} vs {nv}");
        assert_eq!(
            apply_a(&HorizontalField::zeros(&g), &params()).unwrap().max_abs(),
            0.0
        );
    }

    #[test]
    fn eigenvalue_bounded_by_rayleigh_quotient() {
        let g = GridSpec::cube(8).unwrap();
        let est = smallest_eigenvalue_a(&g, &params()).unwrap();
        assert!(est.lambda > 0.0);
        let trial = project_h(&smooth_field(&g, 1.1), &params()).unwrap();
        let rq = rayleigh_quotient(&trial, &params()).unwrap();
        assert!(est.lambda <= rq * (1.0 + 1e-10));
        let rq_mode = rayleigh_quotient(&est.mode, &params()).unwrap();
        assert!((rq_mode - est.lambda).abs() <= 1e-7 * est.lambda);
    }
}
