//! Kick-forced Markov chain `X_n = S(T) X_{n-1} + xi_n` and empirical
//! invariant-measure estimates.
//!
//! Kicks are built from stream functions, so every draw satisfies the
//! boundary conditions and the discrete constraint exactly. The RNG is
//! ChaCha8 seeded from a `u64`; a chain with index `i` in an ensemble uses
//! seed `seed + i`.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{SimState, SimulationParams, Stepper};
use crate::error::{Error, Result};
use crate::estimates::{measure_decay_time, record_trajectory, TrajectoryDiagnostics};
use crate::field::{HorizontalField, Scalar2D};
use crate::grid::GridSpec;
use crate::measure::{wasserstein1, EmpiricalMeasure, DEFAULT_BINS};
use crate::norms::{norm_h, norm_lap2, norm_v2, NormReport};
use crate::operators::perp_grad2;
use crate::projection::smallest_eigenvalue_a;

/// Observables pooled into the empirical measures.
pub const OBSERVABLES: [&str; 4] = ["H2", "E2", "J", "K"];

/// Relative size of the projection correction tolerated after a kick.
pub const KICK_PROJ_RTOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KickConfig {
    /// Time between kicks.
    pub t_kick: f64,
    /// Bound on `|lap xi|^2`.
    pub r: f64,
    pub modes_h: usize,
    pub modes_z: usize,
    pub seed: u64,
    /// Chain length.
    pub n_steps: usize,
    pub burn_in: usize,
}

impl Default for KickConfig {
    fn default() -> Self {
        KickConfig {
            t_kick: 0.05,
            r: 0.25,
            modes_h: 4,
            modes_z: 3,
            seed: 0,
            n_steps: 300,
            burn_in: 50,
        }
    }
}

impl KickConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_kick > 0.0 && self.t_kick.is_finite()) {
            return Err(Error::input(format!("kick period must be positive, got {}", self.t_kick)));
        }
        if !(self.r >= 0.0 && self.r.is_finite()) {
            return Err(Error::input(format!("kick bound R must be >= 0, got {}", self.r)));
        }
        if self.modes_h == 0 || self.modes_z == 0 {
            return Err(Error::input("kick mode cutoffs must be at least 1"));
        }
        if self.burn_in >= self.n_steps {
            return Err(Error::input(format!(
                "burn_in ({}) must be below the chain length ({})",
                self.burn_in, self.n_steps
            )));
        }
        Ok(())
    }
}

/// Stream-function basis for one grid.
#[derive(Debug, Clone)]
pub struct KickSampler {
    grid: GridSpec,
    config: KickConfig,
    /// `perp_grad2` of each horizontal stream function, `(m, n)` row-major.
    horizontal: Vec<(Scalar2D, Scalar2D)>,
    weights: Vec<f64>,
    /// Vertical profiles `cos((k + 1/2) pi z / h)` per node level.
    vertical: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct Kick {
    pub field: HorizontalField,
    pub lap2: f64,
    pub v2: f64,
    pub rescaled: bool,
}

/// `sin^2(m pi s)` on the interior `[d, L - d]`, zero on the two outer
/// nodes of each side so that the one-sided boundary stencils vanish too.
fn shrunk_sin2(m: usize, x: f64, l: f64, d: f64) -> f64 {
    let s = ((x - d) / (l - 2.0 * d)).clamp(0.0, 1.0);
    (m as f64 * PI * s).sin().powi(2)
}

impl KickSampler {
    pub fn new(grid: &GridSpec, config: &KickConfig) -> Result<Self> {
        grid.validate()?;
        config.validate()?;
        let g = *grid;
        let mut horizontal = Vec::new();
        let mut weights = Vec::new();
        for kz in 0..config.modes_z {
            for n in 1..=config.modes_h {
                for m in 1..=config.modes_h {
                    let a = 1.0 + (m * m + n * n + kz * kz) as f64;
                    weights.push(1.0 / (a * a));
                }
            }
        }
        for n in 1..=config.modes_h {
            for m in 1..=config.modes_h {
                let psi = Scalar2D::from_fn(&g, |x, y| {
                    shrunk_sin2(m, x, g.l1, g.d1()) * shrunk_sin2(n, y, g.l2, g.d2())
                });
                horizontal.push(perp_grad2(&psi));
            }
        }
        let vertical = (0..config.modes_z)
            .map(|kz| {
                (0..=g.nz)
                    .map(|k| {
                        if k == 0 {
                            0.0
                        } else {
                            ((kz as f64 + 0.5) * PI * g.z(k) / g.h).cos()
                        }
                    })
                    .collect()
            })
            .collect();
        Ok(KickSampler {
            grid: g,
            config: *config,
            horizontal,
            weights,
            vertical,
        })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    /// Unscaled draw. Consumes exactly one uniform per mode.
    pub fn sample_raw(&self, rng: &mut ChaCha8Rng) -> HorizontalField {
        let g = self.grid;
        let n2d = g.len2();
        let nh = self.horizontal.len();
        let mut v = HorizontalField::zeros(&g);
        let mut level1 = vec![0.0; n2d];
        let mut level2 = vec![0.0; n2d];
        for (kz, profile) in self.vertical.iter().enumerate() {
            level1.iter_mut().for_each(|x| *x = 0.0);
            level2.iter_mut().for_each(|x| *x = 0.0);
            for (h, (g1, g2)) in self.horizontal.iter().enumerate() {
                let a = rng.random_range(-1.0..1.0) * self.weights[kz * nh + h];
                for p in 0..n2d {
                    level1[p] += a * g1.values[p];
                    level2[p] += a * g2.values[p];
                }
            }
            for (k, &c) in profile.iter().enumerate() {
                if c == 0.0 {
                    continue;
                }
                let off = k * n2d;
                for p in 0..n2d {
                    v.u1[off + p] += c * level1[p];
                    v.u2[off + p] += c * level2[p];
                }
            }
        }
        v
    }

    /// Draw rescaled so that `|lap xi|^2 <= R` and `|xi|_V^2 <= R`.
    pub fn sample(&self, rng: &mut ChaCha8Rng) -> Result<Kick> {
        if self.config.r == 0.0 {
            return Ok(Kick {
                field: HorizontalField::zeros(&self.grid),
                lap2: 0.0,
                v2: 0.0,
                rescaled: false,
            });
        }
        let r = self.config.r;
        let mut field = self.sample_raw(rng);
        let mut lap2 = norm_lap2(&field)?;
        let mut v2 = norm_v2(&field)?;
        let mut rescaled = false;
        if lap2 > r {
            let s = (r / lap2).sqrt();
            field.scale(s);
            lap2 *= s * s;
            v2 *= s * s;
            rescaled = true;
        }
        if v2 > r {
            let s = (r / v2).sqrt();
            field.scale(s);
            lap2 *= s * s;
            v2 *= s * s;
            rescaled = true;
        }
        Ok(Kick {
            field,
            lap2,
            v2,
            rescaled,
        })
    }
}

/// One draw with a throwaway sampler.
pub fn sample_kick(rng: &mut ChaCha8Rng, config: &KickConfig, grid: &GridSpec) -> Result<HorizontalField> {
    Ok(KickSampler::new(grid, config)?.sample(rng)?.field)
}

/// Smooth random field in discrete H from the kick basis with default mode
/// cutoffs. The same seed gives the same continuous field on every grid.
pub fn smooth_random_field(grid: &GridSpec, seed: u64) -> Result<HorizontalField> {
    let sampler = KickSampler::new(
        grid,
        &KickConfig {
            r: 1.0,
            ..Default::default()
        },
    )?;
    Ok(sampler.sample_raw(&mut ChaCha8Rng::seed_from_u64(seed)))
}

/// `v` scaled to `|v|_V^2 = e2`.
pub fn scaled_to_e2(v: &HorizontalField, e2: f64) -> Result<HorizontalField> {
    let cur = norm_v2(v)?;
    if cur == 0.0 {
        return if e2 == 0.0 {
            Ok(v.clone())
        } else {
            Err(Error::input("cannot rescale a field with zero V-norm"))
        };
    }
    Ok(v.scaled((e2 / cur).sqrt()))
}

#[derive(Debug, Clone)]
pub struct ChainState {
    pub n: u64,
    pub x: HorizontalField,
    pub rng: ChaCha8Rng,
}

impl ChainState {
    pub fn new(x: HorizontalField, seed: u64) -> Self {
        ChainState {
            n: 0,
            x,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainRecord {
    pub n: u64,
    pub h2: f64,
    pub e2: f64,
    pub j: f64,
    pub k: f64,
    pub kick_v2: f64,
    pub rescaled: bool,
    /// `|S(T) X_{n-1}|_V^2`
    pub decayed_e2: f64,
}

impl ChainRecord {
    fn initial(x: &HorizontalField) -> Result<Self> {
        let r = NormReport::of(x)?;
        Ok(ChainRecord {
            n: 0,
            h2: r.h2,
            e2: r.e2,
            j: r.j,
            k: r.k,
            kick_v2: 0.0,
            rescaled: false,
            decayed_e2: r.e2,
        })
    }
}

/// Advances the chain by one kick. `stepper` must be unforced.
pub fn chain_step(
    state: ChainState,
    config: &KickConfig,
    stepper: &mut Stepper,
    sampler: &KickSampler,
) -> Result<(ChainState, ChainRecord)> {
    if !stepper.params().forcing.is_zero() {
        return Err(Error::input("the chain flow must be unforced"));
    }
    let ChainState { n, x, mut rng } = state;
    let decayed = stepper.advance(SimState::new(x), config.t_kick, |_, _| {})?.v;
    let decayed_e2 = norm_v2(&decayed)?;
    let kick = sampler.sample(&mut rng)?;
    let sum = decayed.add(&kick.field);
    let mut next = sum.clone();
    stepper.project(&mut next)?;
    let moved = norm_h(&next.sub(&sum));
    if moved > KICK_PROJ_RTOL * norm_h(&sum) + 1e-300 {
        return Err(Error::Assertion(format!(
            "kick step {}: projection moved the state by {moved:.3e}",
            n + 1
        )));
    }
    let r = NormReport::of(&next)?;
    if r.e2 > (2.0 * decayed_e2 + 2.0 * kick.v2) * (1.0 + 1e-9) + 1e-300 {
        return Err(Error::Assertion(format!(
            "kick step {}: |X|_V^2 = {} exceeds 2|S(T)X|_V^2 + 2|xi|_V^2 = {}",
            n + 1,
            r.e2,
            2.0 * decayed_e2 + 2.0 * kick.v2
        )));
    }
    let rec = ChainRecord {
        n: n + 1,
        h2: r.h2,
        e2: r.e2,
        j: r.j,
        k: r.k,
        kick_v2: kick.v2,
        rescaled: kick.rescaled,
        decayed_e2,
    };
    Ok((ChainState { n: n + 1, x: next, rng }, rec))
}

#[derive(Debug, Clone)]
pub struct ChainRun {
    /// Rows `n = 0..=N`; row 0 is the initial state.
    pub trace: Vec<ChainRecord>,
    pub measure: EmpiricalMeasure,
    pub final_state: ChainState,
    pub warnings: Vec<String>,
}

impl ChainRun {
    pub fn rescale_count(&self) -> usize {
        self.trace.iter().filter(|r| r.rescaled).count()
    }

    /// Post-burn-in values of `E2`.
    pub fn post_burn_in_e2(&self, burn_in: usize) -> Vec<f64> {
        self.trace[burn_in + 1..].iter().map(|r| r.e2).collect()
    }
}

fn observable_columns(rows: &[ChainRecord]) -> Vec<(&'static str, Vec<f64>)> {
    vec![
        (OBSERVABLES[0], rows.iter().map(|r| r.h2).collect()),
        (OBSERVABLES[1], rows.iter().map(|r| r.e2).collect()),
        (OBSERVABLES[2], rows.iter().map(|r| r.j).collect()),
        (OBSERVABLES[3], rows.iter().map(|r| r.k).collect()),
    ]
}

/// Runs `N` kicks from `v0` with RNG seed `config.seed`.
pub fn run_chain(config: &KickConfig, params: &SimulationParams, v0: &HorizontalField) -> Result<ChainRun> {
    config.validate()?;
    let grid = *v0.grid();
    let unforced = params.unforced();
    let mut stepper = Stepper::new(&grid, &unforced)?;
    let sampler = KickSampler::new(&grid, config)?;
    let mut warnings = Vec::new();
    let first = ChainRecord::initial(v0)?;
    if first.e2 > config.r {
        warnings.push(format!(
            "initial |v0|_V^2 = {:.6e} exceeds R = {:.6e}",
            first.e2, config.r
        ));
    }
    let mut trace = vec![first];
    let mut state = ChainState::new(v0.clone(), config.seed);
    for _ in 0..config.n_steps {
        let (next, rec) = chain_step(state, config, &mut stepper, &sampler)?;
        trace.push(rec);
        state = next;
    }
    let measure = EmpiricalMeasure::from_columns(&observable_columns(&trace[config.burn_in + 1..]), DEFAULT_BINS)?;
    Ok(ChainRun {
        trace,
        measure,
        final_state: state,
        warnings,
    })
}

/// Chains with seeds `config.seed + i`, run in parallel.
pub fn run_ensemble(
    config: &KickConfig,
    params: &SimulationParams,
    v0: &HorizontalField,
    n_chains: usize,
) -> Result<Vec<ChainRun>> {
    (0..n_chains as u64)
        .into_par_iter()
        .map(|i| {
            let c = KickConfig {
                seed: config.seed.wrapping_add(i),
                ..*config
            };
            run_chain(&c, params, v0)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodReport {
    /// `T_V(4R, R)`: the largest decay time over the sampled initial data.
    pub t_kick: f64,
    pub per_initial: Vec<f64>,
    pub lambda1: f64,
}

/// Measures the time for unforced trajectories to go from `|v|_V^2 = 4R`
/// to `R`. Initial data: the slowest Stokes mode plus `n_random` smooth
/// random fields.
pub fn measure_kick_period(
    grid: &GridSpec,
    params: &SimulationParams,
    r: f64,
    n_random: usize,
    seed: u64,
) -> Result<PeriodReport> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::input(format!("measuring T needs R > 0, got {r}")));
    }
    let unforced = params.unforced();
    let eig = smallest_eigenvalue_a(grid, &unforced.poisson)?;
    let sampler = KickSampler::new(
        grid,
        &KickConfig {
            r,
            ..Default::default()
        },
    )?;
    let mut inits = vec![eig.mode.clone()];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..n_random {
        inits.push(sampler.sample_raw(&mut rng));
    }
    let per_initial = inits
        .par_iter()
        .map(|v| {
            decay_time(scaled_to_e2(v, 4.0 * r)?, r, &unforced)
        })
        .collect::<Result<Vec<_>>>()?;
    let t_kick = per_initial.iter().copied().fold(0.0, f64::max);
    Ok(PeriodReport {
        t_kick,
        per_initial,
        lambda1: eig.lambda,
    })
}

fn decay_time(v0: HorizontalField, eps: f64, params: &SimulationParams) -> Result<f64> {
    let mut stepper = Stepper::new(v0.grid(), params)?;
    let mut state = SimState::new(v0);
    let mut chunk = 0.05;
    let mut diag = TrajectoryDiagnostics::new(0.0);
    for _ in 0..12 {
        let rec = record_trajectory(&mut stepper, state, chunk, 1)?;
        let skip = usize::from(!diag.is_empty());
        diag.samples.extend_from_slice(&rec.diag.samples[skip..]);
        state = rec.state;
        if let Some(t) = measure_decay_time(&diag, eps) {
            return Ok(t);
        }
        chunk *= 2.0;
    }
    Err(Error::Assertion(format!(
        "|v|_V^2 did not fall below {eps} within t = {}",
        state.t
    )))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainAnalysis {
    pub r: f64,
    /// `max_n |X_n|_V^2 / (4R)` over all chains.
    pub max_e2_ratio: f64,
    /// W1 between successive cumulative post-burn-in measures of `E2`,
    /// evaluated at equal-width window boundaries.
    pub w1_series: Vec<f64>,
    /// W1 between the pooled `E2` measures of the two halves of the seeds.
    pub w1_split: f64,
    pub iqr: f64,
    pub rescaled: usize,
    pub pooled: EmpiricalMeasure,
}

/// Cumulative pooled samples up to each of `windows` equal-width window
/// boundaries of the post-burn-in index range.
pub fn cumulative_windows(series: &[Vec<f64>], windows: usize) -> Result<Vec<Vec<f64>>> {
    let len = series.first().map_or(0, |s| s.len());
    if windows == 0 || len < windows || series.iter().any(|s| s.len() != len) {
        return Err(Error::input("windowing needs equal-length series with at least one sample per window"));
    }
    Ok((1..=windows)
        .map(|w| {
            let end = (w * len).div_ceil(windows);
            series.iter().flat_map(|s| s[..end].iter().copied()).collect()
        })
        .collect())
}

pub fn analyze_chains(runs: &[ChainRun], config: &KickConfig, windows: usize) -> Result<ChainAnalysis> {
    if runs.len() < 2 {
        return Err(Error::input("chain analysis needs at least two chains"));
    }
    let post: Vec<Vec<f64>> = runs.iter().map(|r| r.post_burn_in_e2(config.burn_in)).collect();
    let cum = cumulative_windows(&post, windows)?;
    let w1_series = cum
        .windows(2)
        .map(|p| wasserstein1(&p[0], &p[1]))
        .collect::<Result<Vec<_>>>()?;
    let half = runs.len() / 2;
    let a: Vec<f64> = post[..half].concat();
    let b: Vec<f64> = post[half..].concat();
    let w1_split = wasserstein1(&a, &b)?;
    let rows: Vec<ChainRecord> = runs
        .iter()
        .flat_map(|r| r.trace[config.burn_in + 1..].iter().copied())
        .collect();
    let pooled = EmpiricalMeasure::from_columns(&observable_columns(&rows), DEFAULT_BINS)?;
    let iqr = pooled.get("E2").expect("E2 observable").iqr();
    let max_e2 = runs
        .iter()
        .flat_map(|r| r.trace.iter().map(|x| x.e2))
        .fold(0.0, f64::max);
    Ok(ChainAnalysis {
        r: config.r,
        max_e2_ratio: if config.r > 0.0 { max_e2 / (4.0 * config.r) } else { 0.0 },
        w1_series,
        w1_split,
        iqr,
        rescaled: runs.iter().map(|r| r.rescale_count()).sum(),
        pooled,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::div2_levels;
    use crate::projection::{constraint_norm, PROJ_TOL};

    fn cfg(r: f64) -> KickConfig {
        KickConfig {
            t_kick: 0.01,
            r,
            n_steps: 4,
            burn_in: 1,
            ..Default::default()
        }
    }

    #[test]
    fn zero_bound_gives_zero_kick() {
        let g = GridSpec::cube(6).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let xi = sample_kick(&mut rng, &cfg(0.0), &g).unwrap();
        assert_eq!(xi, HorizontalField::zeros(&g));
    }

    #[test]
    fn kicks_satisfy_constraints_and_bounds() {
        let g = GridSpec::cube(8).unwrap();
        let c = cfg(0.5);
        let s = KickSampler::new(&g, &c).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let k = s.sample(&mut rng).unwrap();
            assert!(constraint_norm(&k.field) <= PROJ_TOL);
            assert!(div2_levels(&k.field).max_abs() < 1e-10);
            assert!(k.field.bc_residual() <= 1e-12);
            assert!(norm_lap2(&k.field).unwrap() <= c.r * (1.0 + 1e-10));
            assert!(norm_v2(&k.field).unwrap() <= c.r * (1.0 + 1e-10));
        }
    }

    #[test]
    fn sampler_is_deterministic() {
        let g = GridSpec::cube(6).unwrap();
        let c = cfg(1.0);
        let a = sample_kick(&mut ChaCha8Rng::seed_from_u64(42), &c, &g).unwrap();
        let b = sample_kick(&mut ChaCha8Rng::seed_from_u64(42), &c, &g).unwrap();
        assert_eq!(a, b);
        let d = sample_kick(&mut ChaCha8Rng::seed_from_u64(43), &c, &g).unwrap();
        assert_ne!(a, d);
    }

    #[test]
    fn first_kick_from_rest_is_the_kick() {
        let g = GridSpec::cube(6).unwrap();
        let c = cfg(0.3);
        let s = KickSampler::new(&g, &c).unwrap();
        let xi = s.sample(&mut ChaCha8Rng::seed_from_u64(c.seed)).unwrap().field;
        let mut st = Stepper::new(&g, &SimulationParams::default()).unwrap();
        let (next, rec) = chain_step(ChainState::new(HorizontalField::zeros(&g), c.seed), &c, &mut st, &s).unwrap();
        assert!(norm_h(&next.x.sub(&xi)) <= 1e-12 * norm_h(&xi));
        assert_eq!(rec.n, 1);
    }

    #[test]
    fn zero_kicks_reduce_to_decay() {
        let g = GridSpec::cube(6).unwrap();
        let c = cfg(0.0);
        let p = SimulationParams {
            dt_max: 2e-3,
            ..Default::default()
        };
        let s = KickSampler::new(&g, &cfg(1.0)).unwrap();
        let v0 = s.sample(&mut ChaCha8Rng::seed_from_u64(3)).unwrap().field;
        let run = run_chain(&c, &p, &v0).unwrap();
        let mut x = v0.clone();
        for n in 1..=c.n_steps {
            x = crate::dynamics::solve_s(&x, c.t_kick, &p).unwrap();
            assert!((run.trace[n].h2 - crate::norms::norm_h2(&x)).abs() <= 1e-12 * run.trace[0].h2);
        }
        assert_eq!(run.measure.n_samples, c.n_steps - c.burn_in);
    }

    #[test]
    fn single_post_burn_in_sample() {
        let g = GridSpec::cube(5).unwrap();
        let c = KickConfig {
            n_steps: 3,
            burn_in: 2,
            ..cfg(0.1)
        };
        let run = run_chain(&c, &SimulationParams::default(), &HorizontalField::zeros(&g)).unwrap();
        assert_eq!(run.measure.n_samples, 1);
        assert_eq!(run.measure.get("E2").unwrap().histogram.total(), 1);
    }

    #[test]
    fn windows_are_cumulative() {
        let series = vec![vec![1.0, 2.0, 3.0, 4.0], vec![5.0, 6.0, 7.0, 8.0]];
        let w = cumulative_windows(&series, 2).unwrap();
        assert_eq!(w[0], vec![1.0, 2.0, 5.0, 6.0]);
        assert_eq!(w[1].len(), 8);
        assert!(cumulative_windows(&series, 5).is_err());
    }

    #[test]
    fn invalid_config_rejected() {
        assert!(KickConfig { burn_in: 300, ..Default::default() }.validate().is_err());
        assert!(KickConfig { t_kick: 0.0, ..Default::default() }.validate().is_err());
        assert!(KickConfig { r: -1.0, ..Default::default() }.validate().is_err());
    }
}
