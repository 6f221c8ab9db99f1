//! Krylov solvers and the separable Helmholtz preconditioner.

use crate::error::{Error, Result};
use crate::grid::GridSpec;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgOutcome {
    pub iterations: usize,
    /// Final true residual relative to the right-hand side.
    pub residual: f64,
}

/// Stopping rule: `|r| <= max(rel_tol * |b|, abs_tol)`.
#[derive(Debug, Clone, Copy)]
pub struct CgTolerance {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_iter: usize,
}

/// Preconditioned conjugate gradients for an operator that is symmetric and
/// positive (semi)definite in the inner product `dot`. Starts from the
/// incoming `x`. The recursive residual is checked against the true one on
/// convergence and the iteration restarts if they disagree.
pub fn pcg(
    name: &'static str,
    b: &[f64],
    x: &mut [f64],
    mut apply: impl FnMut(&[f64], &mut [f64]),
    mut precond: impl FnMut(&[f64], &mut [f64]),
    dot: impl Fn(&[f64], &[f64]) -> f64,
    tol: CgTolerance,
) -> Result<CgOutcome> {
    let n = b.len();
    let bnorm = dot(b, b).sqrt();
    let target = (tol.rel_tol * bnorm).max(tol.abs_tol);
    let rel = |r: f64| if bnorm > 0.0 { r / bnorm } else { r };
    let mut r = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut q = vec![0.0; n];
    let true_residual = |x: &[f64], r: &mut [f64], apply: &mut dyn FnMut(&[f64], &mut [f64])| {
        apply(x, r);
        for (ri, bi) in r.iter_mut().zip(b) {
            *ri = bi - *ri;
        }
    };
    true_residual(x, &mut r, &mut apply);
    let mut rnorm = dot(&r, &r).sqrt();
    let mut it = 0;
    let mut restarts = 0;
    while rnorm > target {
        precond(&r, &mut z);
        p.copy_from_slice(&z);
        let mut rz = dot(&r, &z);
        loop {
            if it >= tol.max_iter {
                return Err(Error::Solver {
                    solver: name,
                    iterations: it,
                    residual: rel(rnorm),
                });
            }
            it += 1;
            apply(&p, &mut q);
            let pq = dot(&p, &q);
            if !(pq > 0.0) || !rz.is_finite() {
                break;
            }
            let alpha = rz / pq;
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * q[i];
            }
            rnorm = dot(&r, &r).sqrt();
            if rnorm <= target {
                break;
            }
            precond(&r, &mut z);
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
        }
        true_residual(x, &mut r, &mut apply);
        rnorm = dot(&r, &r).sqrt();
        if !rnorm.is_finite() || restarts > 20 {
            return Err(Error::Solver {
                solver: name,
                iterations: it,
                residual: rel(rnorm),
            });
        }
        restarts += 1;
    }
    Ok(CgOutcome {
        iterations: it,
        residual: rel(rnorm),
    })
}

/// Direct solver for `(alpha - beta * lap) u = f` on the unknown nodes of a
/// scalar grid function, where `lap` is the 7-point Laplacian with
/// Dirichlet sides and bottom and the even top ghost.
///
/// The operator is separable: sine modes `sin(m pi i / n)` diagonalise the
/// horizontal second differences, and `sin(theta_m k)` with
/// `theta_m = (m - 1/2) pi / nz` diagonalise the vertical one including the
/// top row. Transforms are dense matrix products along each axis.
#[derive(Debug, Clone)]
pub struct SeparableSolver {
    grid: GridSpec,
    x: AxisBasis,
    y: AxisBasis,
    z: AxisBasis,
}

#[derive(Debug, Clone)]
struct AxisBasis {
    /// Row-major `modes x points` basis values.
    phi: Vec<f64>,
    /// Forward transform rows, `phi * weight / norm`.
    fwd: Vec<f64>,
    /// Positive eigenvalues of `-d^2/dx^2`.
    lambda: Vec<f64>,
    len: usize,
}

impl AxisBasis {
    fn dirichlet(n: usize, d: f64) -> Self {
        let len = n - 1;
        let mut phi = vec![0.0; len * len];
        let mut lambda = vec![0.0; len];
        for m in 1..n {
            let th = m as f64 * std::f64::consts::PI / n as f64;
            for i in 1..n {
                phi[(m - 1) * len + (i - 1)] = (th * i as f64).sin();
            }
            lambda[m - 1] = 4.0 / (d * d) * (0.5 * th).sin().powi(2);
        }
        Self::finish(phi, vec![1.0; len], lambda, len)
    }

    fn dirichlet_neumann(n: usize, d: f64) -> Self {
        let len = n;
        let mut phi = vec![0.0; len * len];
        let mut lambda = vec![0.0; len];
        for m in 1..=n {
            let th = (m as f64 - 0.5) * std::f64::consts::PI / n as f64;
            for k in 1..=n {
                phi[(m - 1) * len + (k - 1)] = (th * k as f64).sin();
            }
            lambda[m - 1] = 4.0 / (d * d) * (0.5 * th).sin().powi(2);
        }
        let mut w = vec![1.0; len];
        w[len - 1] = 0.5;
        Self::finish(phi, w, lambda, len)
    }

    fn finish(phi: Vec<f64>, w: Vec<f64>, lambda: Vec<f64>, len: usize) -> Self {
        let mut fwd = vec![0.0; len * len];
        for m in 0..len {
            let row = &phi[m * len..(m + 1) * len];
            let norm: f64 = row.iter().zip(&w).map(|(p, w)| w * p * p).sum();
            for i in 0..len {
                fwd[m * len + i] = row[i] * w[i] / norm;
            }
        }
        AxisBasis {
            phi,
            fwd,
            lambda,
            len,
        }
    }
}

/// `out[.., m, ..] = sum_i mat[m * len + i] * inp[.., i, ..]` along an axis of a
/// `(a, len, c)` array (c fastest).
fn transform_axis(mat: &[f64], len: usize, inp: &[f64], out: &mut [f64], a: usize, c: usize, transpose: bool) {
    for ai in 0..a {
        let base = ai * len * c;
        for m in 0..len {
            let o = &mut out[base + m * c..base + (m + 1) * c];
            o.iter_mut().for_each(|v| *v = 0.0);
            for i in 0..len {
                let coef = if transpose { mat[i * len + m] } else { mat[m * len + i] };
                if coef == 0.0 {
                    continue;
                }
                let src = &inp[base + i * c..base + (i + 1) * c];
                for (ov, sv) in o.iter_mut().zip(src) {
                    *ov += coef * sv;
                }
            }
        }
    }
}

impl SeparableSolver {
    pub fn new(grid: &GridSpec) -> Self {
        SeparableSolver {
            grid: *grid,
            x: AxisBasis::dirichlet(grid.n1, grid.d1()),
            y: AxisBasis::dirichlet(grid.n2, grid.d2()),
            z: AxisBasis::dirichlet_neumann(grid.nz, grid.dz()),
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    /// Solves `(alpha - beta * lap) u = f` on unknown nodes. Dirichlet
    /// entries of `f` are ignored and those of `u` set to zero. With
    /// `alpha = 0` this is the inverse of `-beta * lap`.
    pub fn solve(&self, alpha: f64, beta: f64, f: &[f64], u: &mut [f64]) {
        let g = &self.grid;
        let (nx, ny, nz) = (self.x.len, self.y.len, self.z.len);
        let mut a = vec![0.0; nx * ny * nz];
        // gather unknowns into a dense (z, y, x) block
        for k in 0..nz {
            for j in 0..ny {
                let src = g.idx(1, j + 1, k + 1);
                let dst = (k * ny + j) * nx;
                a[dst..dst + nx].copy_from_slice(&f[src..src + nx]);
            }
        }
        let mut b = vec![0.0; a.len()];
        transform_axis(&self.x.fwd, nx, &a, &mut b, nz * ny, 1, false);
        transform_axis(&self.y.fwd, ny, &b, &mut a, nz, nx, false);
        transform_axis(&self.z.fwd, nz, &a, &mut b, 1, ny * nx, false);
        for k in 0..nz {
            for j in 0..ny {
                for i in 0..nx {
                    let l = self.x.lambda[i] + self.y.lambda[j] + self.z.lambda[k];
                    b[(k * ny + j) * nx + i] /= alpha + beta * l;
                }
            }
        }
        transform_axis(&self.z.phi, nz, &b, &mut a, 1, ny * nx, true);
        transform_axis(&self.y.phi, ny, &a, &mut b, nz, nx, true);
        transform_axis(&self.x.phi, nx, &b, &mut a, nz * ny, 1, true);
        u.iter_mut().for_each(|v| *v = 0.0);
        for k in 0..nz {
            for j in 0..ny {
                let dst = g.idx(1, j + 1, k + 1);
                let src = (k * ny + j) * nx;
                u[dst..dst + nx].copy_from_slice(&a[src..src + nx]);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::laplacian_into;

    fn rand_vec(n: usize, seed: u64) -> Vec<f64> {
        let mut s = seed;
        (0..n)
            .map(|_| {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
            })
            .collect()
    }

    fn zero_dirichlet(g: &GridSpec, f: &mut [f64]) {
        for k in 0..=g.nz {
            for j in 0..=g.n2 {
                for i in 0..=g.n1 {
                    if g.is_dirichlet(i, j, k) {
                        f[g.idx(i, j, k)] = 0.0;
                    }
                }
            }
        }
    }

    #[test]
    fn separable_solver_inverts_helmholtz() {
        let g = GridSpec::new(1.0, 2.0, 0.5, 5, 7, 6).unwrap();
        let s = SeparableSolver::new(&g);
        let mut u = rand_vec(g.len3(), 3);
        zero_dirichlet(&g, &mut u);
        let mut lap = vec![0.0; u.len()];
        laplacian_into(&g, &u, &mut lap);
        for (alpha, beta) in [(1.0, 0.01), (1.0, 3.0), (0.0, 1.0)] {
            let f: Vec<f64> = u.iter().zip(&lap).map(|(u, l)| alpha * u - beta * l).collect();
            let mut back = vec![0.0; u.len()];
            s.solve(alpha, beta, &f, &mut back);
            let err = back.iter().zip(&u).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
            assert!(err < 1e-11, "alpha {alpha} beta {beta}: {err}");
        }
    }

    #[test]
    fn pcg_solves_spd_system_and_reports_failure() {
        // 1D Dirichlet Laplacian
        let n = 50;
        let apply = |x: &[f64], y: &mut [f64]| {
            for i in 0..n {
                let l = if i > 0 { x[i - 1] } else { 0.0 };
                let r = if i + 1 < n { x[i + 1] } else { 0.0 };
                y[i] = 2.0 * x[i] - l - r;
            }
        };
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(a, b)| a * b).sum::<f64>();
        let b = rand_vec(n, 9);
        let mut x = vec![0.0; n];
        let tol = CgTolerance {
            rel_tol: 1e-12,
            abs_tol: 0.0,
            max_iter: 500,
        };
        let out = pcg("test", &b, &mut x, apply, |r, z| z.copy_from_slice(r), dot, tol).unwrap();
        assert!(out.residual <= 1e-12);
        let mut ax = vec![0.0; n];
        apply(&x, &mut ax);
        let err = ax.iter().zip(&b).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(err < 1e-10);

        let mut x = vec![0.0; n];
        let short = CgTolerance { max_iter: 3, ..tol };
        let e = pcg("test", &b, &mut x, apply, |r, z| z.copy_from_slice(r), dot, short);
        assert!(matches!(e, Err(Error::Solver { iterations: 3, .. })));
    }
}
