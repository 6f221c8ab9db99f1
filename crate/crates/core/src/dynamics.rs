//! Nonlinear term, time stepping and the solution operator `S(t)`.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{HorizontalField, BC_TOL};
use crate::grid::GridSpec;
use crate::linalg::{pcg, CgTolerance, SeparableSolver};
use crate::norms::{dirichlet_form, inner_h_unchecked, norm_h2};
use crate::operators::{laplacian_into, u3_diagnostic};
use crate::projection::{flat_h_dot, from_flat, to_flat, PoissonSolveParams, Projector};

/// Floor on the velocity scale in the CFL denominator.
pub const EPS_VEL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Solve the implicit diffusion on the full field, then project.
    #[default]
    DiffuseThenProject,
    /// Solve the projected implicit problem `P(I - dt nu lap) v = P w` on H
    /// (a backward-Euler Stokes step).
    StokesImplicit,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::DiffuseThenProject => "diffuse_then_project",
            Scheme::StokesImplicit => "stokes_implicit",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "diffuse_then_project" => Some(Scheme::DiffuseThenProject),
            "stokes_implicit" => Some(Scheme::StokesImplicit),
            _ => None,
        }
    }
}

pub type ForcingFn = Arc<dyn Fn(f64) -> HorizontalField + Send + Sync>;

#[derive(Clone, Default)]
pub enum Forcing {
    #[default]
    Zero,
    Constant(HorizontalField),
    /// Evaluated at the end of each step; used by manufactured solutions.
    TimeDependent(ForcingFn),
}

impl fmt::Debug for Forcing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Forcing::Zero => write!(f, "Zero"),
            Forcing::Constant(v) => write!(f, "Constant(max |f| = {:.3e})", v.max_abs()),
            Forcing::TimeDependent(_) => write!(f, "TimeDependent"),
        }
    }
}

impl Forcing {
    pub fn is_zero(&self) -> bool {
        matches!(self, Forcing::Zero)
    }

    fn at(&self, t: f64) -> Option<HorizontalField> {
        match self {
            Forcing::Zero => None,
            Forcing::Constant(f) => Some(f.clone()),
            Forcing::TimeDependent(f) => Some(f(t)),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimulationParams {
    pub nu: f64,
    pub dt_max: f64,
    pub cfl: f64,
    pub t_end: f64,
    pub forcing: Forcing,
    /// Switches the nonlinear term off (linear Stokes dynamics).
    pub advection: bool,
    pub scheme: Scheme,
    /// Relative tolerance of the implicit solve.
    pub solver_rel_tol: f64,
    pub poisson: PoissonSolveParams,
}

impl Default for SimulationParams {
    fn default() -> Self {
        SimulationParams {
            nu: 1.0,
            dt_max: 1e-3,
            cfl: 0.4,
            t_end: 1.0,
            forcing: Forcing::Zero,
            advection: true,
            scheme: Scheme::default(),
            solver_rel_tol: 1e-10,
            poisson: PoissonSolveParams::default(),
        }
    }
}

impl SimulationParams {
    pub fn validate(&self, grid: &GridSpec) -> Result<()> {
        if !(self.nu > 0.0 && self.nu.is_finite()) {
            return Err(Error::input(format!("nu must be positive, got {}", self.nu)));
        }
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return Err(Error::input(format!("cfl must lie in (0,1], got {}", self.cfl)));
        }
        if !(self.dt_max > 0.0 && self.dt_max.is_finite()) {
            return Err(Error::input(format!("dt_max must be positive, got {}", self.dt_max)));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(Error::input(format!("t_end must be >= 0, got {}", self.t_end)));
        }
        if !(self.solver_rel_tol > 0.0 && self.solver_rel_tol < 1.0) {
            return Err(Error::input("solver_rel_tol must lie in (0,1)"));
        }
        self.poisson.validate()?;
        if let Forcing::Constant(f) = &self.forcing {
            f.check_grid(grid)?;
            if !f.is_finite() {
                return Err(Error::input("forcing has non-finite entries"));
            }
        }
        Ok(())
    }

    pub fn unforced(&self) -> Self {
        SimulationParams {
            forcing: Forcing::Zero,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub t: f64,
    pub v: HorizontalField,
    pub step_count: u64,
}

impl SimState {
    pub fn new(v: HorizontalField) -> Self {
        SimState {
            t: 0.0,
            v,
            step_count: 0,
        }
    }
}

/// Per-step bookkeeping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepInfo {
    pub dt: f64,
    /// `|v1|^2 + 2 dt nu D(v1) - |v0|^2 - 2 dt <f, v1>` with `D` the
    /// Dirichlet form of the discrete Laplacian.
    pub slack: f64,
    /// `D(v1)`
    pub dissipation: f64,
    pub h2_before: f64,
    pub solver_iterations: usize,
}

/// Skew-symmetric advection `1/2 [(u.grad) v + div(u v)]` with
/// `u = (v_adv, u3(v_adv))`, centred differences on unknown nodes and zero on
/// Dirichlet nodes. Top ghosts: `v` even, `u3` odd.
pub fn nonlinear_b(v_adv: &HorizontalField, v: &HorizontalField) -> Result<HorizontalField> {
    v_adv.check_same(v)?;
    v.check_bc(BC_TOL)?;
    let g = *v.grid();
    let u3 = u3_diagnostic(v_adv);
    let mut out = HorizontalField::zeros(&g);
    let (sx, sy, sz) = (1, g.n1 + 1, (g.n1 + 1) * (g.n2 + 1));
    let (h1, h2, h3) = (0.5 / g.d1(), 0.5 / g.d2(), 0.5 / g.dz());
    let a1 = &v_adv.u1;
    let a2 = &v_adv.u2;
    let w = &u3.values;
    for c in 0..2 {
        let f = if c == 0 { &v.u1 } else { &v.u2 };
        let o = if c == 0 { &mut out.u1 } else { &mut out.u2 };
        for k in 1..=g.nz {
            let top = k == g.nz;
            for j in 1..g.n2 {
                for i in 1..g.n1 {
                    let p = g.idx(i, j, k);
                    let adv_x = a1[p] * (f[p + sx] - f[p - sx]) * h1;
                    let adv_y = a2[p] * (f[p + sy] - f[p - sy]) * h2;
                    let div_x = (a1[p + sx] * f[p + sx] - a1[p - sx] * f[p - sx]) * h1;
                    let div_y = (a2[p + sy] * f[p + sy] - a2[p - sy] * f[p - sy]) * h2;
                    let (adv_z, div_z) = if top {
                        (0.0, -2.0 * w[p - sz] * f[p - sz] * h3)
                    } else {
                        (
                            w[p] * (f[p + sz] - f[p - sz]) * h3,
                            (w[p + sz] * f[p + sz] - w[p - sz] * f[p - sz]) * h3,
                        )
                    };
                    o[p] = 0.5 * (adv_x + adv_y + adv_z + div_x + div_y + div_z);
                }
            }
        }
    }
    Ok(out)
}

/// Advective CFL step capped by `dt_max`.
pub fn choose_dt(v: &HorizontalField, params: &SimulationParams) -> f64 {
    if !params.advection {
        return params.dt_max;
    }
    let u3 = u3_diagnostic(v);
    let umax = v.max_abs().max(u3.max_abs()).max(EPS_VEL);
    params.dt_max.min(params.cfl * v.grid().min_spacing() / umax)
}

/// Time stepper bound to one grid; holds the solver workspaces.
pub struct Stepper {
    grid: GridSpec,
    params: SimulationParams,
    sep: SeparableSolver,
    proj: Projector,
}

impl Stepper {
    pub fn new(grid: &GridSpec, params: &SimulationParams) -> Result<Self> {
        grid.validate()?;
        params.validate(grid)?;
        Ok(Stepper {
            grid: *grid,
            params: params.clone(),
            sep: SeparableSolver::new(grid),
            proj: Projector::new(grid, params.poisson)?,
        })
    }

    pub fn params(&self) -> &SimulationParams {
        &self.params
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn project(&mut self, v: &mut HorizontalField) -> Result<()> {
        self.proj.project(v)
    }

    /// One step with the CFL-limited time step.
    pub fn step(&mut self, state: &SimState) -> Result<(SimState, StepInfo)> {
        let dt = choose_dt(&state.v, &self.params);
        self.step_dt(state, dt)
    }

    /// One step of length `dt`.
    pub fn step_dt(&mut self, state: &SimState, dt: f64) -> Result<(SimState, StepInfo)> {
        state.v.check_grid(&self.grid)?;
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::input(format!("time step must be positive, got {dt}")));
        }
        let g = self.grid;
        let nu = self.params.nu;
        let t1 = state.t + dt;
        let mut w = state.v.clone();
        if self.params.advection {
            let b = nonlinear_b(&state.v, &state.v)?;
            w.axpy(-dt, &b);
        }
        let f = self.params.forcing.at(t1);
        if let Some(f) = &f {
            w.axpy(dt, f);
        }
        w.apply_bc();
        if !w.is_finite() {
            return Err(self.diverged(state, "non-finite explicit update"));
        }

        let n = g.len3();
        let c = dt * nu;
        let tol = CgTolerance {
            rel_tol: self.params.solver_rel_tol,
            abs_tol: 0.0,
            max_iter: 500,
        };
        let dot = flat_h_dot(&g);
        let (v1, iters) = match self.params.scheme {
            Scheme::DiffuseThenProject => {
                let b = to_flat(&w);
                let mut x = vec![0.0; 2 * n];
                self.sep.solve(1.0, c, &b[..n], &mut x[..n]);
                self.sep.solve(1.0, c, &b[n..], &mut x[n..]);
                let sep = &self.sep;
                let out = pcg(
                    "implicit diffusion",
                    &b,
                    &mut x,
                    |x, y| helmholtz(&g, c, x, y),
                    |r, z| {
                        sep.solve(1.0, c, &r[..n], &mut z[..n]);
                        sep.solve(1.0, c, &r[n..], &mut z[n..]);
                    },
                    &dot,
                    tol,
                )?;
                let mut v1 = from_flat(&g, &x);
                self.proj.project(&mut v1)?;
                (v1, out.iterations)
            }
            Scheme::StokesImplicit => {
                self.proj.project(&mut w)?;
                let b = to_flat(&w);
                let mut x = vec![0.0; 2 * n];
                self.sep.solve(1.0, c, &b[..n], &mut x[..n]);
                self.sep.solve(1.0, c, &b[n..], &mut x[n..]);
                let mut guess = from_flat(&g, &x);
                self.proj.project(&mut guess)?;
                let mut x = to_flat(&guess);
                let sep = &self.sep;
                let proj = std::cell::RefCell::new(&mut self.proj);
                let err: std::cell::RefCell<Option<Error>> = std::cell::RefCell::new(None);
                let project_flat = |y: &mut [f64]| {
                    let mut f = from_flat(&g, y);
                    if let Err(e) = proj.borrow_mut().project(&mut f) {
                        err.borrow_mut().get_or_insert(e);
                    }
                    y[..n].copy_from_slice(&f.u1);
                    y[n..].copy_from_slice(&f.u2);
                };
                let out = pcg(
                    "implicit stokes",
                    &b,
                    &mut x,
                    |x, y| {
                        helmholtz(&g, c, x, y);
                        project_flat(y);
                    },
                    |r, z| {
                        sep.solve(1.0, c, &r[..n], &mut z[..n]);
                        sep.solve(1.0, c, &r[n..], &mut z[n..]);
                        project_flat(z);
                    },
                    &dot,
                    tol,
                )?;
                if let Some(e) = err.into_inner() {
                    return Err(e);
                }
                let mut v1 = from_flat(&g, &x);
                // the Krylov iterate is in H up to projection round-off
                proj.into_inner().project(&mut v1)?;
                (v1, out.iterations)
            }
        };
        if !v1.is_finite() {
            return Err(self.diverged(state, "non-finite velocity after implicit solve"));
        }

        let h2_before = norm_h2(&state.v);
        let dissipation = dirichlet_form(&v1)?;
        let mut slack = norm_h2(&v1) + 2.0 * dt * nu * dissipation - h2_before;
        if let Some(f) = &f {
            slack -= 2.0 * dt * inner_h_unchecked(f, &v1);
        }
        let next = SimState {
            t: t1,
            v: v1,
            step_count: state.step_count + 1,
        };
        Ok((
            next,
            StepInfo {
                dt,
                slack,
                dissipation,
                h2_before,
                solver_iterations: iters,
            },
        ))
    }

    fn diverged(&self, state: &SimState, reason: &str) -> Error {
        Error::Divergence {
            t: state.t,
            step: state.step_count,
            reason: reason.to_string(),
            state: Box::new(state.clone()),
        }
    }

    /// Advances by `duration`, landing exactly on `state.t + duration`.
    /// `observe` sees every accepted step.
    pub fn advance(
        &mut self,
        state: SimState,
        duration: f64,
        mut observe: impl FnMut(&SimState, &StepInfo),
    ) -> Result<SimState> {
        if !(duration >= 0.0 && duration.is_finite()) {
            return Err(Error::input(format!("duration must be >= 0, got {duration}")));
        }
        let t_final = state.t + duration;
        let eps = 1e-12 * t_final.abs().max(1.0);
        let mut s = state;
        while t_final - s.t > eps {
            let remaining = t_final - s.t;
            let mut dt = choose_dt(&s.v, &self.params);
            if dt >= remaining - eps {
                dt = remaining;
            }
            let (mut next, info) = self.step_dt(&s, dt)?;
            if dt == remaining {
                next.t = t_final;
            }
            observe(&next, &info);
            s = next;
        }
        Ok(s)
    }
}

/// `(I - c lap) x` for a flattened two-component field.
fn helmholtz(g: &GridSpec, c: f64, x: &[f64], y: &mut [f64]) {
    let n = g.len3();
    laplacian_into(g, &x[..n], &mut y[..n]);
    laplacian_into(g, &x[n..], &mut y[n..]);
    // x vanishes on Dirichlet nodes, and so does the Laplacian output
    for p in 0..2 * n {
        y[p] = x[p] - c * y[p];
    }
}

/// One CFL-limited step from `state`.
pub fn step(state: &SimState, params: &SimulationParams) -> Result<SimState> {
    let mut s = Stepper::new(state.v.grid(), params)?;
    Ok(s.step(state)?.0)
}

/// `S(t) v0`. The input should already lie in H; it is not re-projected.
pub fn solve_s(v0: &HorizontalField, t: f64, params: &SimulationParams) -> Result<HorizontalField> {
    let mut s = Stepper::new(v0.grid(), params)?;
    Ok(s.advance(SimState::new(v0.clone()), t, |_, _| {})?.v)
}
