//! Trajectory diagnostics and the a priori machinery built on them: the
//! growth-control function, interval partitions with bounded dissipation,
//! absorbing-ball and decay-time measurement, and the continuity probe.

use serde::{Deserialize, Serialize};

use crate::dynamics::{SimState, SimulationParams, Stepper};
use crate::error::{Error, Result};
use crate::field::HorizontalField;
use crate::norms::{norm_h2, norm_v, norm_v2, NormReport};

/// Relative slack used when comparing recorded quantities against budgets.
pub const COMPARE_RTOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagSample {
    pub t: f64,
    pub norms: NormReport,
    /// Sum of per-step energy slacks since the previous sample.
    pub budget_slack: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrajectoryDiagnostics {
    pub samples: Vec<DiagSample>,
    /// `|f|_H^2` of the forcing that produced the trajectory.
    pub f_h2: f64,
}

impl TrajectoryDiagnostics {
    pub fn new(f_h2: f64) -> Self {
        TrajectoryDiagnostics {
            samples: Vec::new(),
            f_h2,
        }
    }

    pub fn push(&mut self, s: DiagSample) -> Result<()> {
        if let Some(last) = self.samples.last() {
            if !(s.t > last.t) {
                return Err(Error::input(format!(
                    "timestamps must increase strictly: {} after {}",
                    s.t, last.t
                )));
            }
        }
        if !(s.t.is_finite() && s.norms.is_finite() && s.budget_slack.is_finite()) {
            return Err(Error::input(format!("non-finite diagnostic sample at t = {}", s.t)));
        }
        self.samples.push(s);
        Ok(())
    }

    pub fn from_samples(samples: Vec<DiagSample>, f_h2: f64) -> Result<Self> {
        let mut d = TrajectoryDiagnostics::new(f_h2);
        for s in samples {
            d.push(s)?;
        }
        Ok(d)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }

    pub fn e2(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.norms.e2).collect()
    }

    /// Trapezoidal integral of `E2` between sample indices `a <= b`.
    pub fn integral_e2(&self, a: usize, b: usize) -> f64 {
        let s = &self.samples;
        (a..b)
            .map(|i| 0.5 * (s[i + 1].t - s[i].t) * (s[i].norms.e2 + s[i + 1].norms.e2))
            .sum()
    }

    /// Samples with `t <= t_max`.
    pub fn truncated(&self, t_max: f64) -> Self {
        TrajectoryDiagnostics {
            samples: self
                .samples
                .iter()
                .copied()
                .filter(|s| s.t <= t_max * (1.0 + 1e-12))
                .collect(),
            f_h2: self.f_h2,
        }
    }
}

/// Per-step energy-budget statistics of a run.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BudgetSummary {
    pub steps: u64,
    /// Largest `slack / |v^n|_H^2` over steps with a nonzero state.
    pub max_rel_slack: f64,
    pub positive_slack_sum: f64,
    /// `sum dt D(v^{n+1})` over the steps.
    pub dissipation_integral: f64,
}

#[derive(Debug, Clone)]
pub struct Recorded {
    pub state: SimState,
    pub diag: TrajectoryDiagnostics,
    pub budget: BudgetSummary,
}

/// Runs `duration` from `state`, sampling the norms every `record_every`
/// steps (and always at the final time).
pub fn record_trajectory(
    stepper: &mut Stepper,
    state: SimState,
    duration: f64,
    record_every: usize,
) -> Result<Recorded> {
    if record_every == 0 {
        return Err(Error::input("record_every must be at least 1"));
    }
    let f_h2 = match &stepper.params().forcing {
        crate::dynamics::Forcing::Constant(f) => norm_h2(f),
        _ => 0.0,
    };
    let mut diag = TrajectoryDiagnostics::new(f_h2);
    diag.push(DiagSample {
        t: state.t,
        norms: NormReport::of(&state.v)?,
        budget_slack: 0.0,
    })?;
    let t_final = state.t + duration;
    let mut budget = BudgetSummary {
        max_rel_slack: f64::NEG_INFINITY,
        ..Default::default()
    };
    let mut pending = 0.0;
    let mut since = 0;
    let mut failure: Option<Error> = None;
    let end = stepper.advance(state, duration, |s, info| {
        budget.steps += 1;
        if info.h2_before > 0.0 {
            budget.max_rel_slack = budget.max_rel_slack.max(info.slack / info.h2_before);
        }
        budget.positive_slack_sum += info.slack.max(0.0);
        budget.dissipation_integral += info.dt * info.dissipation;
        pending += info.slack;
        since += 1;
        if since == record_every || s.t >= t_final {
            if failure.is_none() {
                let r = NormReport::of(&s.v).and_then(|norms| {
                    diag.push(DiagSample {
                        t: s.t,
                        norms,
                        budget_slack: pending,
                    })
                });
                if let Err(e) = r {
                    failure = Some(e);
                }
            }
            pending = 0.0;
            since = 0;
        }
    })?;
    if let Some(e) = failure {
        return Err(e);
    }
    if budget.steps == 0 {
        budget.max_rel_slack = 0.0;
    }
    Ok(Recorded {
        state: end,
        diag,
        budget,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthParams {
    pub c: f64,
    pub eta: f64,
    pub f_h2: f64,
}

impl GrowthParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.c >= 0.0 && self.c.is_finite()) {
            return Err(Error::input(format!("C must be finite and >= 0, got {}", self.c)));
        }
        if !(self.eta > 0.0) {
            return Err(Error::input(format!("eta must be positive, got {}", self.eta)));
        }
        if !(self.f_h2 >= 0.0) {
            return Err(Error::input(format!("f_H2 must be >= 0, got {}", self.f_h2)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaValue {
    pub value: f64,
    /// Set when the exponential overflowed and `value` is `+inf`.
    pub overflow: bool,
}

/// `Gamma(y) = exp(C (1 + y)^4) (y + |f|^2)`.
pub fn gamma(y: f64, gp: &GrowthParams) -> Result<GammaValue> {
    if !(y >= 0.0) {
        return Err(Error::input(format!("gamma needs y >= 0, got {y}")));
    }
    gp.validate()?;
    let base = y + gp.f_h2;
    if base == 0.0 {
        return Ok(GammaValue {
            value: 0.0,
            overflow: false,
        });
    }
    let e = (gp.c * (1.0 + y).powi(4)).exp();
    if e.is_infinite() {
        return Ok(GammaValue {
            value: f64::INFINITY,
            overflow: true,
        });
    }
    let value = e * base;
    Ok(GammaValue {
        value,
        overflow: value.is_infinite(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EtaInterval {
    pub start: usize,
    pub end: usize,
    pub t0: f64,
    pub t1: f64,
    pub integral_e2: f64,
    /// A single step that already breaks the length or budget condition.
    pub degenerate: bool,
}

/// Greedy left-to-right partition of the recorded span into maximal
/// intervals of length at most 1 with `int E2 <= eta`.
pub fn eta_partition(diag: &TrajectoryDiagnostics, eta: f64) -> Result<Vec<EtaInterval>> {
    if diag.is_empty() {
        return Err(Error::input("eta_partition needs a nonempty trajectory"));
    }
    if !(eta > 0.0) {
        return Err(Error::input(format!("eta must be positive, got {eta}")));
    }
    let s = &diag.samples;
    let n = s.len();
    let mut out = Vec::new();
    let mut a = 0;
    while a + 1 < n {
        let mut b = a;
        let mut integral = 0.0;
        while b + 1 < n {
            let step = 0.5 * (s[b + 1].t - s[b].t) * (s[b].norms.e2 + s[b + 1].norms.e2);
            let len = s[b + 1].t - s[a].t;
            if len > 1.0 + COMPARE_RTOL || integral + step > eta * (1.0 + COMPARE_RTOL) {
                break;
            }
            integral += step;
            b += 1;
        }
        let degenerate = b == a;
        if degenerate {
            b = a + 1;
            integral = diag.integral_e2(a, b);
        }
        out.push(EtaInterval {
            start: a,
            end: b,
            t0: s[a].t,
            t1: s[b].t,
            integral_e2: integral,
            degenerate,
        });
        a = b;
    }
    if out.is_empty() {
        out.push(EtaInterval {
            start: 0,
            end: 0,
            t0: s[0].t,
            t1: s[0].t,
            integral_e2: 0.0,
            degenerate: false,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthFit {
    pub params: GrowthParams,
    pub intervals: usize,
    pub samples: usize,
    pub degenerate_intervals: usize,
    /// Samples where `E2(tau1) = 0`, `f = 0`, and `E2(tau2) > 0`.
    pub violations: usize,
}

/// Smallest `C` for which `E2(tau2) <= Gamma(E2(tau1))` holds on every
/// `(interval, tau2)` pair of the eta partition.
pub fn fit_growth_constant(diag: &TrajectoryDiagnostics, eta: f64) -> Result<GrowthFit> {
    let parts = eta_partition(diag, eta)?;
    if parts.iter().all(|p| p.end == p.start) {
        return Err(Error::input("trajectory does not cover a single eta interval"));
    }
    let f = diag.f_h2;
    let mut c: f64 = 0.0;
    let mut samples = 0;
    let mut violations = 0;
    let mut degenerate = 0;
    for p in &parts {
        if p.degenerate {
            degenerate += 1;
            continue;
        }
        let y1 = diag.samples[p.start].norms.e2;
        for i in p.start + 1..=p.end {
            samples += 1;
            let y2 = diag.samples[i].norms.e2;
            let base = y1 + f;
            if base == 0.0 {
                if y2 > 0.0 {
                    violations += 1;
                }
                continue;
            }
            if y2 > base {
                c = c.max((y2 / base).ln() / (1.0 + y1).powi(4));
            }
        }
    }
    Ok(GrowthFit {
        params: GrowthParams { c, eta, f_h2: f },
        intervals: parts.len(),
        samples,
        degenerate_intervals: degenerate,
        violations,
    })
}

/// Counts `(interval, tau2)` pairs where the growth inequality holds.
/// Returns `(holding, total)`.
pub fn check_growth_inequality(diag: &TrajectoryDiagnostics, gp: &GrowthParams) -> Result<(usize, usize)> {
    let parts = eta_partition(diag, gp.eta)?;
    let mut ok = 0;
    let mut total = 0;
    for p in parts.iter().filter(|p| !p.degenerate) {
        let g = gamma(diag.samples[p.start].norms.e2, gp)?;
        for i in p.start + 1..=p.end {
            total += 1;
            if diag.samples[i].norms.e2 <= g.value * (1.0 + 1e-12) {
                ok += 1;
            }
        }
    }
    Ok((ok, total))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbsorbReport {
    pub k_ball: f64,
    /// Entry time per trajectory.
    pub t_v: Vec<f64>,
    pub stayed: Vec<bool>,
    /// Tail maximum attained at the final sample while still rising.
    pub inconclusive: Vec<bool>,
    pub window: f64,
}

fn tail_start(d: &TrajectoryDiagnostics, window: f64) -> usize {
    let t_end = d.samples.last().map_or(0.0, |s| s.t);
    let t_start = d.samples.first().map_or(0.0, |s| s.t);
    let cut = t_end - window * (t_end - t_start);
    d.samples.iter().position(|s| s.t >= cut).unwrap_or(0)
}

/// Measures a common absorbing radius from the tail windows (last `window`
/// fraction of each run) and the entry time of every trajectory.
pub fn detect_absorbing(diags: &[TrajectoryDiagnostics], window: f64) -> Result<AbsorbReport> {
    if !(window > 0.0 && window <= 1.0) {
        return Err(Error::input(format!("window must lie in (0,1], got {window}")));
    }
    if diags.is_empty() || diags.iter().any(|d| d.len() < 2) {
        return Err(Error::input("detect_absorbing needs trajectories with at least two samples"));
    }
    let mut k_ball: f64 = 0.0;
    let mut inconclusive = Vec::with_capacity(diags.len());
    for d in diags {
        let a = tail_start(d, window);
        let tail = &d.samples[a..];
        let (imax, max) = tail
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, s)| {
                if s.norms.e2 >= bv {
                    (i, s.norms.e2)
                } else {
                    (bi, bv)
                }
            });
        k_ball = k_ball.max(max);
        let rising = tail.len() > 1 && tail[tail.len() - 1].norms.e2 > tail[0].norms.e2;
        inconclusive.push(imax == tail.len() - 1 && rising && max > 0.0);
    }
    let limit = k_ball * (1.0 + COMPARE_RTOL);
    let mut t_v = Vec::with_capacity(diags.len());
    let mut stayed = Vec::with_capacity(diags.len());
    for d in diags {
        let (tv, ok) = entry_time(d, limit);
        t_v.push(tv);
        stayed.push(ok);
    }
    Ok(AbsorbReport {
        k_ball,
        t_v,
        stayed,
        inconclusive,
        window,
    })
}

/// First recorded time after which `E2 <= limit` for the rest of the run.
fn entry_time(d: &TrajectoryDiagnostics, limit: f64) -> (f64, bool) {
    let s = &d.samples;
    match s.iter().rposition(|x| x.norms.e2 > limit) {
        None => (s[0].t, true),
        Some(i) if i + 1 < s.len() => (s[i + 1].t, true),
        Some(i) => (s[i].t, false),
    }
}

/// Re-checks a report against longer runs from the same initial data:
/// `stayed[i]` holds if run `i` never leaves the ball after its entry time.
pub fn confirm_absorbing(report: &AbsorbReport, longer: &[TrajectoryDiagnostics]) -> Result<AbsorbReport> {
    if longer.len() != report.t_v.len() {
        return Err(Error::input("confirmation needs one trajectory per original run"));
    }
    let limit = report.k_ball * (1.0 + COMPARE_RTOL);
    let mut out = report.clone();
    for (i, d) in longer.iter().enumerate() {
        out.stayed[i] = d
            .samples
            .iter()
            .filter(|s| s.t >= report.t_v[i])
            .all(|s| s.norms.e2 <= limit);
    }
    Ok(out)
}

/// First time after which `E2 <= eps` for the rest of the recorded run, or
/// `None` if the final sample is still above `eps`.
pub fn measure_decay_time(diag: &TrajectoryDiagnostics, eps: f64) -> Option<f64> {
    let s = diag.samples.last()?;
    if s.norms.e2 > eps {
        return None;
    }
    Some(entry_time(diag, eps).0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeResult {
    pub deltas: Vec<f64>,
    pub ratios: Vec<f64>,
    /// Whether every perturbed run took the same step sequence as the base run.
    pub same_steps: bool,
}

/// `|S(t)(v0 + d w) - S(t) v0|_V / (d |w|_V)` for each `d` in `deltas`.
pub fn continuity_probe(
    v0: &HorizontalField,
    w: &HorizontalField,
    deltas: &[f64],
    t: f64,
    params: &SimulationParams,
) -> Result<ProbeResult> {
    v0.check_same(w)?;
    if deltas.is_empty() {
        return Err(Error::input("continuity_probe needs at least one delta"));
    }
    for pair in deltas.windows(2) {
        if !(pair[1] < pair[0]) {
            return Err(Error::input("deltas must be strictly decreasing"));
        }
    }
    if !(deltas[deltas.len() - 1] > 0.0) {
        return Err(Error::input("deltas must be positive"));
    }
    let wv = norm_v(w)?;
    if wv == 0.0 {
        return Err(Error::input("direction has zero V-norm"));
    }
    let mut stepper = Stepper::new(v0.grid(), params)?;
    let mut base_steps = Vec::new();
    let base = stepper.advance(SimState::new(v0.clone()), t, |_, i| base_steps.push(i.dt))?;
    let mut ratios = Vec::with_capacity(deltas.len());
    let mut same = true;
    for &d in deltas {
        let mut start = v0.clone();
        start.axpy(d, w);
        let mut steps = Vec::new();
        let end = stepper.advance(SimState::new(start), t, |_, i| steps.push(i.dt))?;
        same &= steps == base_steps;
        let diff = end.v.sub(&base.v);
        ratios.push(norm_v2(&diff)?.sqrt() / (d * wv));
    }
    Ok(ProbeResult {
        deltas: deltas.to_vec(),
        ratios,
        same_steps: same,
    })
}

/// Cumulative energy budget of a recorded run, in the scheme's own terms:
/// `nu sum dt D(v^{n+1}) <= |v(s)|^2 + (t - s) |f|^2 / nu + accumulated
/// positive slack`. Summing the per-step identity and applying Young's
/// inequality with a Poincare constant of at least 1 gives the bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForcedBudget {
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub holds: bool,
    /// `slack / rhs`
    pub rel_slack: f64,
}

pub fn forced_budget(rec: &Recorded, nu: f64) -> Result<ForcedBudget> {
    let (first, last) = match (rec.diag.samples.first(), rec.diag.samples.last()) {
        (Some(a), Some(b)) if rec.budget.steps > 0 => (a, b),
        _ => return Err(Error::input("forced_budget needs a run with at least one step")),
    };
    let lhs = nu * rec.budget.dissipation_integral;
    let rhs = first.norms.h2 + (last.t - first.t) * rec.diag.f_h2 / nu;
    let slack = rec.budget.positive_slack_sum;
    Ok(ForcedBudget {
        lhs,
        rhs,
        slack,
        holds: lhs <= rhs + slack,
        rel_slack: if rhs > 0.0 { slack / rhs } else { 0.0 },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;

    fn synthetic(ts: &[f64], e2: &[f64], f_h2: f64) -> TrajectoryDiagnostics {
        let samples = ts
            .iter()
            .zip(e2)
            .map(|(&t, &e)| DiagSample {
                t,
                norms: NormReport {
                    e2: e,
                    ..Default::default()
                },
                budget_slack: 0.0,
            })
            .collect();
        TrajectoryDiagnostics::from_samples(samples, f_h2).unwrap()
    }

    fn grid_times(t_end: f64, n: usize) -> Vec<f64> {
        (0..=n).map(|i| t_end * i as f64 / n as f64).collect()
    }

    #[test]
    fn gamma_examples() {
        let gp = GrowthParams {
            c: 1.0,
            eta: 0.05,
            f_h2: 1.0,
        };
        assert!((gamma(0.0, &gp).unwrap().value - std::f64::consts::E).abs() < 1e-15);
        let unforced = GrowthParams { f_h2: 0.0, ..gp };
        assert_eq!(gamma(0.0, &unforced).unwrap().value, 0.0);
        assert!(gamma(1e-12, &unforced).unwrap().value < 1e-11);
        assert!(gamma(-1.0, &gp).is_err());
        let big = gamma(1e3, &gp).unwrap();
        assert!(big.overflow && big.value.is_infinite());
        let mut prev = 0.0;
        for i in 0..200 {
            let v = gamma(i as f64 * 0.05, &gp).unwrap().value;
            assert!(v >= prev);
            prev = v;
        }
    }

    #[test]
    fn partition_zero_trajectory_gives_unit_intervals() {
        let ts = grid_times(5.0, 50);
        let d = synthetic(&ts, &vec![0.0; ts.len()], 0.0);
        let p = eta_partition(&d, 0.05).unwrap();
        assert_eq!(p.len(), 5);
        for (k, iv) in p.iter().enumerate() {
            assert!((iv.t0 - k as f64).abs() < 1e-12 && (iv.t1 - iv.t0 - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn partition_budget_binds() {
        let eta = 0.05;
        let ts = grid_times(3.0, 300);
        let d = synthetic(&ts, &vec![2.0 * eta; ts.len()], 0.0);
        let p = eta_partition(&d, eta).unwrap();
        assert_eq!(p.len(), 6);
        for iv in &p {
            assert!((iv.t1 - iv.t0 - 0.5).abs() < 1e-9);
            assert!(iv.integral_e2 <= eta * (1.0 + 1e-9));
        }
    }

    #[test]
    fn partition_flags_single_step_violations() {
        let d = synthetic(&[0.0, 0.1, 0.2], &[10.0, 10.0, 0.0], 0.0);
        let p = eta_partition(&d, 0.05).unwrap();
        assert!(p[0].degenerate);
        assert_eq!((p[0].start, p[0].end), (0, 1));
    }

    #[test]
    fn growth_constant_examples() {
        // E2 doubles within one interval, f = 0, E2(tau1) = 1: C = ln 2 / 16
        let d = synthetic(&[0.0, 0.01], &[1.0, 2.0], 0.0);
        let fit = fit_growth_constant(&d, 1.0).unwrap();
        assert!((fit.params.c - 2f64.ln() / 16.0).abs() < 1e-15);
        let (ok, total) = check_growth_inequality(&d, &fit.params).unwrap();
        assert_eq!(ok, total);

        let ts = grid_times(2.0, 40);
        let e2: Vec<f64> = ts.iter().map(|t| (-t).exp() * 0.01).collect();
        let fit = fit_growth_constant(&synthetic(&ts, &e2, 0.0), 0.05).unwrap();
        assert_eq!(fit.params.c, 0.0);

        let d = synthetic(&[0.0, 0.1], &[0.0, 1e-3], 0.0);
        assert_eq!(fit_growth_constant(&d, 0.05).unwrap().violations, 1);
    }

    #[test]
    fn absorbing_trivial_cases() {
        let ts = grid_times(1.0, 10);
        let zero = synthetic(&ts, &[0.0; 11], 0.0);
        let r = detect_absorbing(&[zero.clone(), zero], 0.3).unwrap();
        assert_eq!(r.k_ball, 0.0);
        assert_eq!(r.t_v, vec![0.0, 0.0]);
        assert!(r.stayed.iter().all(|s| *s));

        let e2: Vec<f64> = ts.iter().map(|t| (-3.0 * t).exp()).collect();
        let d = synthetic(&ts, &e2, 0.0);
        let r = detect_absorbing(std::slice::from_ref(&d), 0.3).unwrap();
        assert!((r.t_v[0] - 0.7).abs() < 1e-15);
        assert!((r.k_ball - e2[7]).abs() < 1e-15);
        assert!(!r.inconclusive[0]);
    }

    #[test]
    fn absorbing_flags_rising_tail_and_confirms() {
        let ts = grid_times(1.0, 10);
        let up: Vec<f64> = ts.iter().map(|t| t * t).collect();
        let r = detect_absorbing(&[synthetic(&ts, &up, 0.0)], 0.3).unwrap();
        assert!(r.inconclusive[0]);

        let flat = synthetic(&ts, &[0.5; 11], 0.0);
        let r = detect_absorbing(std::slice::from_ref(&flat), 0.3).unwrap();
        let longer = synthetic(&grid_times(2.0, 20), &[vec![0.5; 20], vec![0.9]].concat(), 0.0);
        assert!(!confirm_absorbing(&r, &[longer]).unwrap().stayed[0]);
    }

    #[test]
    fn decay_time_examples() {
        let ts = grid_times(1.0, 100);
        let zero = synthetic(&ts, &vec![0.0; 101], 0.0);
        assert_eq!(measure_decay_time(&zero, 1e-3), Some(0.0));
        let e2: Vec<f64> = ts.iter().map(|t| (-10.0 * t).exp()).collect();
        let d = synthetic(&ts, &e2, 0.0);
        assert_eq!(measure_decay_time(&d, 2.0), Some(0.0));
        let mut prev = 0.0;
        for eps in [0.5, 1e-1, 1e-2, 1e-3, 1e-4] {
            let t = measure_decay_time(&d, eps).unwrap();
            assert!(t >= prev);
            prev = t;
        }
        assert_eq!(measure_decay_time(&d, 1e-6), None);
    }

    #[test]
    fn probe_at_zero_time_is_one() {
        let g = GridSpec::cube(6).unwrap();
        let mut w = HorizontalField::from_fn(&g, |x, y, z| ((3.0 * x).sin() * y * (z + 1.0), 0.0));
        w = crate::projection::project_h(&w, &Default::default()).unwrap();
        let v0 = HorizontalField::zeros(&g);
        let r = continuity_probe(&v0, &w, &[1e-2, 1e-3], 0.0, &SimulationParams::default()).unwrap();
        for x in r.ratios {
            assert!((x - 1.0).abs() < 1e-12);
        }
        assert!(continuity_probe(&v0, &w, &[1e-3, 1e-2], 0.0, &SimulationParams::default()).is_err());
    }
}
