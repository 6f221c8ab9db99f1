//! Discrete differential and integral operators with the boundary
//! conditions built in.
//!
//! Two families of difference stencils live here:
//!
//! * the *constraint* stencils used by [`div2`], [`grad2`] and
//!   [`perp_grad2`]: centred in the interior, first-order one-sided at the
//!   lateral boundary (an odd reflection about the boundary value). Because
//!   x and y differences commute, `div2(perp_grad2(psi))` vanishes exactly;
//! * the *norm* stencils of [`Axis`] derivatives: centred in the interior,
//!   second-order one-sided on every face.
//!
//! All kernels run sequentially in storage order so results are bitwise
//! reproducible.

use crate::error::{Error, Result};
use crate::field::{HorizontalField, Scalar2D, Scalar3D, BC_TOL};
use crate::grid::GridSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
    Z,
}

/// Second-order 7-point Laplacian of both components.
///
/// Ghost values: odd reflection across bottom and sides (the node values
/// there are zero), even reflection across the top. The result is zero on
/// Dirichlet nodes.
pub fn laplacian3(v: &HorizontalField, grid: &GridSpec) -> Result<HorizontalField> {
    v.check_grid(grid)?;
    v.check_bc(BC_TOL)?;
    let mut out = HorizontalField::zeros(grid);
    laplacian_into(grid, &v.u1, &mut out.u1);
    laplacian_into(grid, &v.u2, &mut out.u2);
    Ok(out)
}

/// Unchecked scalar Laplacian on unknown nodes; Dirichlet entries of `out`
/// are set to zero.
pub(crate) fn laplacian_into(g: &GridSpec, f: &[f64], out: &mut [f64]) {
    let (sx, sy) = (1, g.n1 + 1);
    let sz = (g.n1 + 1) * (g.n2 + 1);
    let (cx, cy, cz) = (
        1.0 / (g.d1() * g.d1()),
        1.0 / (g.d2() * g.d2()),
        1.0 / (g.dz() * g.dz()),
    );
    out.iter_mut().for_each(|o| *o = 0.0);
    for k in 1..=g.nz {
        for j in 1..g.n2 {
            for i in 1..g.n1 {
                let p = g.idx(i, j, k);
                let c = f[p];
                let lx = (f[p + sx] - 2.0 * c + f[p - sx]) * cx;
                let ly = (f[p + sy] - 2.0 * c + f[p - sy]) * cy;
                let lz = if k < g.nz {
                    (f[p + sz] - 2.0 * c + f[p - sz]) * cz
                } else {
                    2.0 * (f[p - sz] - c) * cz
                };
                out[p] = lx + ly + lz;
            }
        }
    }
}

#[inline]
fn constraint_diff(n: usize, d: f64, at: impl Fn(usize) -> f64, i: usize) -> f64 {
    if i == 0 {
        (at(1) - at(0)) / d
    } else if i == n {
        (at(n) - at(n - 1)) / d
    } else {
        (at(i + 1) - at(i - 1)) / (2.0 * d)
    }
}

/// x-derivative of a horizontal scalar with the constraint stencil.
pub fn dx2(f: &Scalar2D) -> Scalar2D {
    let g = *f.grid();
    let mut out = Scalar2D::zeros(&g);
    for j in 0..=g.n2 {
        for i in 0..=g.n1 {
            out.values[g.idx2(i, j)] = constraint_diff(g.n1, g.d1(), |m| f.at(m, j), i);
        }
    }
    out
}

/// y-derivative of a horizontal scalar with the constraint stencil.
pub fn dy2(f: &Scalar2D) -> Scalar2D {
    let g = *f.grid();
    let mut out = Scalar2D::zeros(&g);
    for j in 0..=g.n2 {
        for i in 0..=g.n1 {
            out.values[g.idx2(i, j)] = constraint_diff(g.n2, g.d2(), |m| f.at(i, m), j);
        }
    }
    out
}

/// Horizontal divergence `dx w1 + dy w2`.
pub fn div2(w1: &Scalar2D, w2: &Scalar2D) -> Result<Scalar2D> {
    if w1.grid() != w2.grid() {
        return Err(Error::input("div2: component grids differ"));
    }
    let a = dx2(w1);
    let b = dy2(w2);
    let mut out = a;
    out.values.iter_mut().zip(&b.values).for_each(|(o, v)| *o += v);
    Ok(out)
}

/// Horizontal gradient `(dx q, dy q)`.
pub fn grad2(q: &Scalar2D) -> (Scalar2D, Scalar2D) {
    (dx2(q), dy2(q))
}

/// Perpendicular gradient `(-dy psi, dx psi)` with the same stencils as
/// [`div2`].
pub fn perp_grad2(psi: &Scalar2D) -> (Scalar2D, Scalar2D) {
    let mut a = dy2(psi);
    a.values.iter_mut().for_each(|v| *v = -*v);
    (a, dx2(psi))
}

/// Trapezoidal integral over `z in [-h, 0]` at every horizontal node.
pub fn vertical_integral(f: &Scalar3D) -> Scalar2D {
    let g = *f.grid();
    Scalar2D::from_values(&g, vertical_integral_raw(&g, &f.values)).expect("length matches")
}

pub(crate) fn vertical_integral_raw(g: &GridSpec, f: &[f64]) -> Vec<f64> {
    let n2d = g.len2();
    let wz = g.weights_z();
    let mut out = vec![0.0; n2d];
    for (k, w) in wz.iter().enumerate() {
        let level = &f[k * n2d..(k + 1) * n2d];
        for (o, v) in out.iter_mut().zip(level) {
            *o += w * v;
        }
    }
    out
}

/// Vertical average `M(f) = vertical_integral(f) / h`.
pub fn vertical_mean(f: &Scalar3D) -> Scalar2D {
    let mut out = vertical_integral(f);
    let h = f.grid().h;
    out.values.iter_mut().for_each(|v| *v /= h);
    out
}

/// Barotropic transport `W = (int u1 dz, int u2 dz)`.
pub fn transport(v: &HorizontalField) -> (Scalar2D, Scalar2D) {
    let g = *v.grid();
    (
        Scalar2D::from_values(&g, vertical_integral_raw(&g, &v.u1)).expect("same grid"),
        Scalar2D::from_values(&g, vertical_integral_raw(&g, &v.u2)).expect("same grid"),
    )
}

/// Discrete constraint `div2(int v dz)` evaluated at every horizontal node.
pub fn constraint_residual(v: &HorizontalField) -> Scalar2D {
    let (w1, w2) = transport(v);
    div2(&w1, &w2).expect("same grid")
}

/// `div2` of the horizontal velocity on each level.
pub fn div2_levels(v: &HorizontalField) -> Scalar3D {
    let g = *v.grid();
    let n2d = g.len2();
    let mut out = Scalar3D::zeros(&g);
    for k in 0..=g.nz {
        let a = Scalar2D::from_values(&g, v.u1[k * n2d..(k + 1) * n2d].to_vec()).expect("len");
        let b = Scalar2D::from_values(&g, v.u2[k * n2d..(k + 1) * n2d].to_vec()).expect("len");
        let d = div2(&a, &b).expect("same grid");
        out.values[k * n2d..(k + 1) * n2d].copy_from_slice(&d.values);
    }
    out
}

/// Vertical velocity `u3(z) = -int_{-h}^{z} div2 v dz'` by the cumulative
/// trapezoidal rule; `u3 = 0` on the bottom by construction.
pub fn u3_diagnostic(v: &HorizontalField) -> Scalar3D {
    let g = *v.grid();
    let n2d = g.len2();
    let div = div2_levels(v);
    let mut u3 = Scalar3D::zeros(&g);
    let half_dz = 0.5 * g.dz();
    for k in 1..=g.nz {
        for p in 0..n2d {
            let below = (k - 1) * n2d + p;
            let here = k * n2d + p;
            u3.values[here] =
                u3.values[below] - half_dz * (div.values[below] + div.values[here]);
        }
    }
    u3
}

/// Derivative along `axis` with the norm stencils: centred inside,
/// second-order one-sided on each face.
pub fn derivative(g: &GridSpec, f: &[f64], axis: Axis) -> Vec<f64> {
    let mut out = vec![0.0; f.len()];
    derivative_into(g, f, axis, &mut out);
    out
}

pub(crate) fn derivative_into(g: &GridSpec, f: &[f64], axis: Axis, out: &mut [f64]) {
    let (n, d, stride) = match axis {
        Axis::X => (g.n1, g.d1(), 1),
        Axis::Y => (g.n2, g.d2(), g.n1 + 1),
        Axis::Z => (g.nz, g.dz(), (g.n1 + 1) * (g.n2 + 1)),
    };
    let inv2d = 0.5 / d;
    for k in 0..=g.nz {
        for j in 0..=g.n2 {
            for i in 0..=g.n1 {
                let p = g.idx(i, j, k);
                let pos = match axis {
                    Axis::X => i,
                    Axis::Y => j,
                    Axis::Z => k,
                };
                out[p] = if pos == 0 {
                    (-3.0 * f[p] + 4.0 * f[p + stride] - f[p + 2 * stride]) * inv2d
                } else if pos == n {
                    (3.0 * f[p] - 4.0 * f[p - stride] + f[p - 2 * stride]) * inv2d
                } else {
                    (f[p + stride] - f[p - stride]) * inv2d
                };
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn mode_field(g: &GridSpec) -> HorizontalField {
        let (l1, l2, h) = (g.l1, g.l2, g.h);
        let mut v = HorizontalField::from_fn(g, |x, y, z| {
            (
                (PI * z / (2.0 * h)).cos() * (PI * x / l1).sin() * (PI * y / l2).sin(),
                0.0,
            )
        });
        v.apply_bc();
        v
    }

    #[test]
    fn laplacian_of_zero_is_zero() {
        let g = GridSpec::cube(6).unwrap();
        let v = HorizontalField::zeros(&g);
        assert_eq!(laplacian3(&v, &g).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn laplacian_rejects_field_violating_side_bc() {
        let g = GridSpec::cube(6).unwrap();
        let v = HorizontalField::from_fn(&g, |x, _, _| (x, 0.0));
        assert!(matches!(laplacian3(&v, &g), Err(Error::Input(_))));
        let other = GridSpec::cube(8).unwrap();
        assert!(laplacian3(&HorizontalField::zeros(&g), &other).is_err());
    }

    /// Max interior relative error of the Laplacian against the analytic
    /// eigenvalue, on a 3-level ladder.
    #[test]
    fn laplacian_second_order_on_eigenmode() {
        let mut errs = Vec::new();
        for n in [8, 16, 32] {
            let g = GridSpec::new(1.0, 2.0, 0.5, n, n, n).unwrap();
            let v = mode_field(&g);
            let lap = laplacian3(&v, &g).unwrap();
            let lam = PI * PI * (1.0 / (g.l1 * g.l1) + 1.0 / (g.l2 * g.l2) + 0.25 / (g.h * g.h));
            let scale = v.max_abs();
            let mut e = 0.0_f64;
            for k in 1..=g.nz {
                for j in 1..g.n2 {
                    for i in 1..g.n1 {
                        let p = g.idx(i, j, k);
                        e = e.max((lap.u1[p] + lam * v.u1[p]).abs());
                    }
                }
            }
            errs.push(e / (lam * scale));
        }
        for w in errs.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!(order >= 1.9, "order {order} errs {errs:?}");
        }
    }

    #[test]
    fn laplacian_is_symmetric_under_trapezoid_weights() {
        let g = GridSpec::new(1.0, 1.3, 0.8, 5, 6, 7).unwrap();
        let w = g.weights3();
        let mut seed = 1u64;
        let mut rnd = || {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((seed >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let mut a = HorizontalField::from_fn(&g, |_, _, _| (0.0, 0.0));
        let mut b = a.clone();
        for p in 0..g.len3() {
            a.u1[p] = rnd();
            a.u2[p] = rnd();
            b.u1[p] = rnd();
            b.u2[p] = rnd();
        }
        a.apply_bc();
        b.apply_bc();
        let la = laplacian3(&a, &g).unwrap();
        let lb = laplacian3(&b, &g).unwrap();
        let ip = |x: &HorizontalField, y: &HorizontalField| -> f64 {
            (0..g.len3())
                .map(|p| w[p] * (x.u1[p] * y.u1[p] + x.u2[p] * y.u2[p]))
                .sum()
        };
        let lhs = ip(&la, &b);
        let rhs = ip(&a, &lb);
        assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs().max(rhs.abs()));
        // positive definite: <-lap a, a> > 0
        assert!(-ip(&la, &a) > 0.0);
    }

    #[test]
    fn div2_identities() {
        let g = GridSpec::new(2.0, 1.0, 1.0, 8, 6, 4).unwrap();
        let c1 = Scalar2D::from_fn(&g, |_, _| 3.0);
        let c2 = Scalar2D::from_fn(&g, |_, _| -1.5);
        assert!(div2(&c1, &c2).unwrap().max_abs() < 1e-14);

        let x = Scalar2D::from_fn(&g, |x, _| x);
        let y = Scalar2D::from_fn(&g, |_, y| y);
        let d = div2(&x, &y).unwrap();
        for v in &d.values {
            assert!((v - 2.0).abs() < 1e-12);
        }

        let psi = Scalar2D::from_fn(&g, |x, y| (1.7 * x).sin() * (y * y + 0.3 * x).cos());
        let (a, b) = perp_grad2(&psi);
        assert!(div2(&a, &b).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn div2_second_order_in_interior() {
        let mut errs = Vec::new();
        for n in [8, 16, 32] {
            let g = GridSpec::new(1.0, 1.0, 1.0, n, n, 4).unwrap();
            let a = Scalar2D::from_fn(&g, |x, y| (2.0 * x).sin() * y.cos());
            let b = Scalar2D::from_fn(&g, |x, y| (x * y).exp());
            let d = div2(&a, &b).unwrap();
            let mut e = 0.0_f64;
            for j in 1..g.n2 {
                for i in 1..g.n1 {
                    let (x, y) = (g.x(i), g.y(j));
                    let exact = 2.0 * (2.0 * x).cos() * y.cos() + x * (x * y).exp();
                    e = e.max((d.at(i, j) - exact).abs());
                }
            }
            errs.push(e);
        }
        for w in errs.windows(2) {
            assert!((w[0] / w[1]).log2() >= 1.9, "{errs:?}");
        }
    }

    #[test]
    fn vertical_integral_examples() {
        let g = GridSpec::new(1.0, 1.0, 0.7, 4, 4, 10).unwrap();
        let one = Scalar3D::from_fn(&g, |_, _, _| 1.0);
        for v in vertical_integral(&one).values {
            assert!((v - 0.7).abs() < 1e-14);
        }
        let z = Scalar3D::from_fn(&g, |_, _, z| z);
        for v in vertical_integral(&z).values {
            assert!((v + 0.49 / 2.0).abs() < 1e-14);
        }
        // z^2: trapezoid error is h * dz^2 / 6 * (f'' = 2) / 2 ... check O(dz^2)
        let mut errs = Vec::new();
        for nz in [8, 16, 32] {
            let g = GridSpec::new(1.0, 1.0, 0.7, 4, 4, nz).unwrap();
            let z2 = Scalar3D::from_fn(&g, |_, _, z| z * z);
            let exact = 0.7_f64.powi(3) / 3.0;
            errs.push((vertical_integral(&z2).values[0] - exact).abs());
        }
        assert!((errs[0] / errs[1]).log2() > 1.95);
        assert!((errs[1] / errs[2]).log2() > 1.95);
        let m = vertical_mean(&one);
        assert!((m.values[3] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn u3_examples() {
        let g = GridSpec::new(1.0, 1.0, 0.5, 6, 6, 8).unwrap();
        // x * g(z) with g = 1: div2 = 1 everywhere (one-sided stencils are
        // exact on linears), so u3 = -(z + h).
        let v = HorizontalField::from_fn(&g, |x, _, _| (x, 0.0));
        let u3 = u3_diagnostic(&v);
        for k in 0..=g.nz {
            for j in 0..=g.n2 {
                for i in 0..=g.n1 {
                    let exact = -(g.z(k) + g.h);
                    assert!((u3.at(i, j, k) - exact).abs() < 1e-13);
                }
            }
        }
        // divergence-free on each level -> u3 = 0
        let psi = Scalar2D::from_fn(&g, |x, y| (3.0 * x).sin() * (2.0 * y).cos());
        let (a, b) = perp_grad2(&psi);
        let v = HorizontalField::from_fn(&g, |x, y, z| {
            let i = (x / g.d1()).round() as usize;
            let j = (y / g.d2()).round() as usize;
            let s = (z + 0.3).cos();
            (a.at(i, j) * s, b.at(i, j) * s)
        });
        assert!(u3_diagnostic(&v).max_abs() < 1e-12);
    }

    #[test]
    fn norm_stencil_exact_on_quadratics() {
        let g = GridSpec::new(1.0, 1.0, 1.0, 5, 5, 5).unwrap();
        let f = Scalar3D::from_fn(&g, |x, y, z| x * x + 2.0 * y * z - z * z);
        let dz = derivative(&g, &f.values, Axis::Z);
        for k in 0..=g.nz {
            for j in 0..=g.n2 {
                for i in 0..=g.n1 {
                    let exact = 2.0 * g.y(j) - 2.0 * g.z(k);
                    assert!((dz[g.idx(i, j, k)] - exact).abs() < 1e-12);
                }
            }
        }
        let dx = derivative(&g, &f.values, Axis::X);
        assert!((dx[g.idx(0, 1, 1)] - 0.0).abs() < 1e-12);
        assert!((dx[g.idx(5, 1, 1)] - 2.0).abs() < 1e-12);
    }
}
