//! Experiment drivers shared by the CLI and the acceptance suite.
//!
//! Initial data and forcings come from [`smooth_random_field`], so a seed
//! names the same continuous field on every grid.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{Forcing, SimState, SimulationParams, Stepper};
use crate::error::{Error, Result};
use crate::estimates::{
    check_growth_inequality, confirm_absorbing, continuity_probe, detect_absorbing, eta_partition,
    fit_growth_constant, measure_decay_time, record_trajectory, AbsorbReport, GrowthFit, GrowthParams,
    ProbeResult, TrajectoryDiagnostics,
};
use crate::field::HorizontalField;
use crate::grid::GridSpec;
use crate::kick::{
    analyze_chains, measure_kick_period, run_ensemble, scaled_to_e2, smooth_random_field, ChainAnalysis, ChainRun,
    KickConfig, PeriodReport,
};
use crate::norms::{norm_h2, norm_v};
use crate::projection::smallest_eigenvalue_a;

/// Offset between initial-data seeds and the forcing seed.
const FORCING_SEED_OFFSET: u64 = 1_000_003;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayConfig {
    pub r: f64,
    pub eps: f64,
    pub n_initial: usize,
    pub seed: u64,
    pub t_end: f64,
    pub record_every: usize,
    /// Use the slowest Stokes mode as the first initial condition.
    pub include_slowest_mode: bool,
}

impl Default for DecayConfig {
    fn default() -> Self {
        DecayConfig {
            r: 1.0,
            eps: 1e-3,
            n_initial: 5,
            seed: 0,
            t_end: 0.2,
            record_every: 5,
            include_slowest_mode: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayReport {
    pub r: f64,
    pub eps: f64,
    pub lambda1: Option<f64>,
    /// Entry time into `E2 <= eps` per initial condition; `None` if not reached.
    pub t_v: Vec<Option<f64>>,
    pub t_v_max: Option<f64>,
    /// `max_t |v(t)|^2 / (|v0|^2 exp(-2 nu lambda1 t))` per initial condition.
    pub h_decay_ratio: Vec<f64>,
    pub max_rel_slack: f64,
}

/// Unforced runs from `|v0|_V^2 = R`.
pub fn run_decay(
    grid: &GridSpec,
    params: &SimulationParams,
    cfg: &DecayConfig,
) -> Result<(DecayReport, Vec<TrajectoryDiagnostics>)> {
    if !(cfg.r >= 0.0 && cfg.eps > 0.0 && cfg.n_initial > 0) {
        return Err(Error::input("decay needs R >= 0, eps > 0 and at least one initial condition"));
    }
    let params = params.unforced();
    let eig = if cfg.r > 0.0 {
        Some(smallest_eigenvalue_a(grid, &params.poisson)?)
    } else {
        None
    };
    let mut inits = Vec::with_capacity(cfg.n_initial);
    for i in 0..cfg.n_initial {
        let v = match (&eig, i == 0 && cfg.include_slowest_mode) {
            (Some(e), true) => e.mode.clone(),
            _ => smooth_random_field(grid, cfg.seed.wrapping_add(i as u64))?,
        };
        inits.push(scaled_to_e2(&v, cfg.r)?);
    }
    let runs = inits
        .into_par_iter()
        .map(|v0| {
            let mut st = Stepper::new(grid, &params)?;
            record_trajectory(&mut st, SimState::new(v0), cfg.t_end, cfg.record_every)
        })
        .collect::<Result<Vec<_>>>()?;
    let lambda1 = eig.as_ref().map(|e| e.lambda);
    let mut t_v = Vec::new();
    let mut ratio = Vec::new();
    let mut slack = f64::NEG_INFINITY;
    for run in &runs {
        t_v.push(measure_decay_time(&run.diag, cfg.eps));
        let s = &run.diag.samples;
        let h0 = s[0].norms.h2;
        let r = match lambda1 {
            Some(l) if h0 > 0.0 => s
                .iter()
                .map(|x| x.norms.h2 / (h0 * (-2.0 * params.nu * l * (x.t - s[0].t)).exp()))
                .fold(0.0, f64::max),
            _ => 0.0,
        };
        ratio.push(r);
        slack = slack.max(run.budget.max_rel_slack);
    }
    let t_v_max = t_v.iter().try_fold(0.0f64, |m, t| t.map(|t| m.max(t)));
    Ok((
        DecayReport {
            r: cfg.r,
            eps: cfg.eps,
            lambda1,
            t_v,
            t_v_max,
            h_decay_ratio: ratio,
            max_rel_slack: slack,
        },
        runs.into_iter().map(|r| r.diag).collect(),
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbsorbConfig {
    pub r: f64,
    pub f_h2: f64,
    pub n_initial: usize,
    pub seed: u64,
    pub t_end: f64,
    pub window: f64,
    pub record_every: usize,
}

impl Default for AbsorbConfig {
    fn default() -> Self {
        AbsorbConfig {
            r: 1.0,
            f_h2: 0.1,
            n_initial: 5,
            seed: 0,
            t_end: 20.0,
            window: 0.3,
            record_every: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbsorbOutcome {
    /// Detection on `[0, t_end]`, confirmed against `[0, 2 t_end]`.
    pub report: AbsorbReport,
    pub f_h2: f64,
    pub max_rel_slack: f64,
}

/// Constant smooth forcing with `|f|_H^2 = f_h2`.
pub fn smooth_forcing(grid: &GridSpec, seed: u64, f_h2: f64) -> Result<HorizontalField> {
    if !(f_h2 >= 0.0) {
        return Err(Error::input(format!("|f|^2 must be >= 0, got {f_h2}")));
    }
    let f = smooth_random_field(grid, seed.wrapping_add(FORCING_SEED_OFFSET))?;
    Ok(f.scaled((f_h2 / norm_h2(&f)).sqrt()))
}

/// Forced ensemble run to `2 t_end`; the absorbing ball is measured on the
/// `t_end` prefix and confirmed on the full run. Returns the prefix and
/// full diagnostics.
pub fn run_absorb(
    grid: &GridSpec,
    params: &SimulationParams,
    cfg: &AbsorbConfig,
) -> Result<(AbsorbOutcome, Vec<TrajectoryDiagnostics>, Vec<TrajectoryDiagnostics>)> {
    if cfg.n_initial == 0 || !(cfg.t_end > 0.0) || !(cfg.r >= 0.0) {
        return Err(Error::input("absorb needs initial conditions, t_end > 0 and R >= 0"));
    }
    let f = smooth_forcing(grid, cfg.seed, cfg.f_h2)?;
    let params = SimulationParams {
        forcing: Forcing::Constant(f),
        ..params.clone()
    };
    let n = cfg.n_initial;
    let runs = (0..n)
        .into_par_iter()
        .map(|i| {
            let e2 = cfg.r * (n - i) as f64 / n as f64;
            let v0 = scaled_to_e2(&smooth_random_field(grid, cfg.seed.wrapping_add(i as u64))?, e2)?;
            let mut st = Stepper::new(grid, &params)?;
            record_trajectory(&mut st, SimState::new(v0), 2.0 * cfg.t_end, cfg.record_every)
        })
        .collect::<Result<Vec<_>>>()?;
    let full: Vec<TrajectoryDiagnostics> = runs.iter().map(|r| r.diag.clone()).collect();
    let prefix: Vec<TrajectoryDiagnostics> = full.iter().map(|d| d.truncated(cfg.t_end)).collect();
    let first = detect_absorbing(&prefix, cfg.window)?;
    let report = confirm_absorbing(&first, &full)?;
    let max_rel_slack = runs.iter().map(|r| r.budget.max_rel_slack).fold(f64::NEG_INFINITY, f64::max);
    Ok((
        AbsorbOutcome {
            report,
            f_h2: cfg.f_h2,
            max_rel_slack,
        },
        prefix,
        full,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthSummary {
    pub eta: f64,
    pub fits: Vec<GrowthFit>,
    /// Largest fitted constant over all trajectories.
    pub c: f64,
    pub intervals: usize,
    pub degenerate_intervals: usize,
    /// Samples satisfying the growth inequality with the common `c`.
    pub holds: usize,
    pub total: usize,
}

/// Fits one growth constant per trajectory and checks the common maximum
/// against every trajectory.
pub fn growth_summary(diags: &[TrajectoryDiagnostics], eta: f64) -> Result<GrowthSummary> {
    if diags.is_empty() {
        return Err(Error::input("growth fit needs at least one trajectory"));
    }
    let fits = diags
        .iter()
        .map(|d| fit_growth_constant(d, eta))
        .collect::<Result<Vec<_>>>()?;
    let c = fits.iter().map(|f| f.params.c).fold(0.0, f64::max);
    let mut holds = 0;
    let mut total = 0;
    let mut intervals = 0;
    let mut degenerate = 0;
    for d in diags {
        let parts = eta_partition(d, eta)?;
        intervals += parts.len();
        degenerate += parts.iter().filter(|p| p.degenerate).count();
        let gp = GrowthParams { c, eta, f_h2: d.f_h2 };
        let (ok, n) = check_growth_inequality(d, &gp)?;
        holds += ok;
        total += n;
    }
    Ok(GrowthSummary {
        eta,
        fits,
        c,
        intervals,
        degenerate_intervals: degenerate,
        holds,
        total,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KickExperimentConfig {
    pub kick: KickConfig,
    pub n_chains: usize,
    pub windows: usize,
    /// Random initial fields (besides the slowest mode) used to measure T.
    pub period_samples: usize,
    /// Measure `T = T_V(4R, R)` instead of using `kick.t_kick`.
    pub measure_period: bool,
}

impl Default for KickExperimentConfig {
    fn default() -> Self {
        KickExperimentConfig {
            kick: KickConfig::default(),
            n_chains: 10,
            windows: 10,
            period_samples: 4,
            measure_period: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KickOutcome {
    pub kick: KickConfig,
    pub period: Option<PeriodReport>,
    pub analysis: ChainAnalysis,
    pub initial_e2: f64,
}

/// Measures `T`, runs the chains from a common `X_0` with `|X_0|_V^2 = R`,
/// and analyses the pooled measures.
pub fn run_kicks(
    grid: &GridSpec,
    params: &SimulationParams,
    cfg: &KickExperimentConfig,
) -> Result<(KickOutcome, Vec<ChainRun>)> {
    let mut kick = cfg.kick;
    let period = if cfg.measure_period {
        let p = measure_kick_period(grid, params, kick.r, cfg.period_samples, kick.seed)?;
        kick.t_kick = p.t_kick;
        Some(p)
    } else {
        None
    };
    kick.validate()?;
    let v0 = if kick.r > 0.0 {
        scaled_to_e2(&smooth_random_field(grid, kick.seed)?, kick.r)?
    } else {
        HorizontalField::zeros(grid)
    };
    let runs = run_ensemble(&kick, params, &v0, cfg.n_chains)?;
    let analysis = analyze_chains(&runs, &kick, cfg.windows)?;
    Ok((
        KickOutcome {
            kick,
            period,
            analysis,
            initial_e2: kick.r,
        },
        runs,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeConfig {
    pub t: f64,
    pub deltas: Vec<f64>,
    pub e2_initial: f64,
    pub seed: u64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig {
            t: 0.5,
            deltas: vec![1e-2, 1e-3, 1e-4, 1e-5],
            e2_initial: 1.0,
            seed: 0,
        }
    }
}

/// Continuity probe from a smooth random `v0` along a unit-V random direction.
pub fn run_probe(grid: &GridSpec, params: &SimulationParams, cfg: &ProbeConfig) -> Result<ProbeResult> {
    let v0 = scaled_to_e2(&smooth_random_field(grid, cfg.seed)?, cfg.e2_initial)?;
    let w = smooth_random_field(grid, cfg.seed.wrapping_add(1))?;
    let w = w.scaled(1.0 / norm_v(&w)?);
    continuity_probe(&v0, &w, &cfg.deltas, cfg.t, params)
}
