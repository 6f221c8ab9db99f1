//! Runs a configured experiment, writes its artifacts and checks the
//! property it exercises.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;

use crate::error::{Error, Result};
use crate::estimates::TrajectoryDiagnostics;
use crate::experiments::{growth_summary, run_absorb, run_decay, run_kicks, run_probe};
use crate::io::config::{Experiment, RunConfig};
use crate::io::snapshot::{write_snapshot, SnapshotHeader};
use crate::io::tables::{read_trajectory_file, write_chain_csv, write_trajectory_file};
use crate::manufactured::verify_manufactured;

/// Thresholds of the per-experiment checks.
pub const MIN_SPATIAL_ORDER: f64 = 1.8;
pub const MIN_TEMPORAL_ORDER: f64 = 0.9;
pub const CHAIN_BOUND_RTOL: f64 = 1e-6;
pub const PROBE_MAX_SPREAD: f64 = 3.0;
/// Allowed excess of `|v(t)|_H^2` over the discrete Poincare envelope.
pub const H_DECAY_SLACK: f64 = 0.10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub experiment: Experiment,
    pub output_dir: PathBuf,
    pub artifacts: Vec<PathBuf>,
    pub checks: Vec<Check>,
    pub passed: bool,
}

struct Out {
    dir: PathBuf,
    artifacts: Vec<PathBuf>,
    checks: Vec<Check>,
}

impl Out {
    fn path(&mut self, name: &str) -> PathBuf {
        let p = self.dir.join(name);
        self.artifacts.push(p.clone());
        p
    }

    fn json(&mut self, name: &str, value: &impl Serialize) -> Result<()> {
        let p = self.path(name);
        serde_json::to_writer_pretty(BufWriter::new(File::create(p)?), value)?;
        Ok(())
    }

    fn trajectories(&mut self, prefix: &str, diags: &[TrajectoryDiagnostics]) -> Result<()> {
        for (i, d) in diags.iter().enumerate() {
            let p = self.path(&format!("{prefix}_{i}.csv"));
            write_trajectory_file(&p, d)?;
        }
        Ok(())
    }

    fn check(&mut self, name: &str, passed: bool, detail: String) {
        self.checks.push(Check {
            name: name.to_string(),
            passed,
            detail,
        });
    }
}

/// Runs `cfg.experiment`. Artifacts and `summary.json` are written even when
/// a check fails; the failure is then returned as an assertion error.
pub fn run_experiment(cfg: &RunConfig) -> Result<RunSummary> {
    let exp = cfg
        .experiment
        .ok_or_else(|| Error::input("no experiment selected"))?;
    cfg.check_for(exp)?;
    fs::create_dir_all(&cfg.output_dir)?;
    let mut out = Out {
        dir: cfg.output_dir.clone(),
        artifacts: Vec::new(),
        checks: Vec::new(),
    };
    out.json("config.json", cfg)?;
    match exp {
        Experiment::Verify => {
            let report = verify_manufactured(&cfg.grid()?, &cfg.params()?, &cfg.verify)?;
            out.json("convergence_report.json", &report)?;
            let (s, t) = (report.min_spatial_order(), report.min_temporal_order());
            out.check("spatial_order", s >= MIN_SPATIAL_ORDER, format!("min order {s:.3} (need {MIN_SPATIAL_ORDER})"));
            out.check("temporal_order", t >= MIN_TEMPORAL_ORDER, format!("min order {t:.3} (need {MIN_TEMPORAL_ORDER})"));
        }
        Experiment::Decay => {
            let (report, diags) = run_decay(&cfg.grid()?, &cfg.params()?, &cfg.decay_config())?;
            out.trajectories("trajectory", &diags)?;
            out.json("decay_report.json", &report)?;
            let reached = report.t_v.iter().all(|t| t.is_some());
            out.check(
                "decay_reached",
                reached,
                format!("T_V = {:?} for eps = {}", report.t_v_max, report.eps),
            );
            let worst = report.h_decay_ratio.iter().copied().fold(0.0, f64::max);
            out.check(
                "poincare_decay",
                worst <= 1.0 + H_DECAY_SLACK,
                format!("max |v|_H^2 / envelope = {worst:.6} (lambda1 = {:?})", report.lambda1),
            );
        }
        Experiment::Absorb => {
            let (outcome, _, full) = run_absorb(&cfg.grid()?, &cfg.params()?, &cfg.absorb_config())?;
            out.trajectories("trajectory", &full)?;
            out.json("absorb_report.json", &outcome)?;
            let r = &outcome.report;
            out.check(
                "absorbed",
                r.stayed.iter().all(|s| *s),
                format!("K_ball = {:.6e}, T_V = {:?}", r.k_ball, r.t_v),
            );
            out.check(
                "tail_settled",
                !r.inconclusive.iter().any(|x| *x),
                format!("inconclusive = {:?}", r.inconclusive),
            );
        }
        Experiment::Kicks => {
            let kc = cfg.kick_config().expect("checked above");
            let (outcome, runs) = run_kicks(&cfg.grid()?, &cfg.params()?, &kc)?;
            for (i, run) in runs.iter().enumerate() {
                let p = out.path(&format!("chain_{i}.csv"));
                write_chain_csv(BufWriter::new(File::create(p)?), &run.trace)?;
            }
            out.json("measure.json", &outcome.analysis.pooled)?;
            out.json("kick_report.json", &outcome)?;
            let a = &outcome.analysis;
            out.check(
                "chain_bounded",
                a.max_e2_ratio <= 1.0 + CHAIN_BOUND_RTOL,
                format!("max |X|_V^2 / 4R = {:.6e}", a.max_e2_ratio),
            );
        }
        Experiment::Diag => {
            let f_h2 = cfg.sim.as_ref().map_or(0.0, |s| s.forcing_h2);
            let diags = cfg
                .diag
                .inputs
                .iter()
                .map(|p| read_trajectory_file(p, f_h2))
                .collect::<Result<Vec<_>>>()?;
            let summary = growth_summary(&diags, cfg.diag.eta)?;
            out.json("diag_report.json", &summary)?;
            out.check(
                "partition_valid",
                summary.degenerate_intervals == 0,
                format!("{} intervals, {} degenerate", summary.intervals, summary.degenerate_intervals),
            );
            out.check(
                "growth_inequality",
                summary.holds == summary.total,
                format!("C = {:.6e}: {}/{} samples", summary.c, summary.holds, summary.total),
            );
        }
        Experiment::Probe => {
            let r = run_probe(&cfg.grid()?, &cfg.params()?, &cfg.probe_config())?;
            out.json("probe_report.json", &r)?;
            let max = r.ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let min = r.ratios.iter().copied().fold(f64::INFINITY, f64::min);
            let spread = max / min;
            out.check(
                "bounded_ratios",
                spread.is_finite() && spread <= PROBE_MAX_SPREAD,
                format!("max/min = {spread:.6} over {:?}", r.deltas),
            );
        }
    }
    let passed = out.checks.iter().all(|c| c.passed);
    let summary_path = out.dir.join("summary.json");
    out.artifacts.push(summary_path.clone());
    let summary = RunSummary {
        experiment: exp,
        output_dir: out.dir,
        artifacts: out.artifacts,
        checks: out.checks,
        passed,
    };
    serde_json::to_writer_pretty(BufWriter::new(File::create(&summary_path)?), &summary)?;
    if !passed {
        let failed: Vec<String> = summary
            .checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| format!("{}: {}", c.name, c.detail))
            .collect();
        return Err(Error::Assertion(failed.join("; ")));
    }
    Ok(summary)
}

/// Writes `failure.json` (and the last state for divergences) into `dir`,
/// falling back to the working directory. Returns the JSON path.
pub fn write_failure(dir: &Path, experiment: Option<Experiment>, err: &Error) -> PathBuf {
    let target = if fs::create_dir_all(dir).is_ok() { dir } else { Path::new(".") };
    let kind = match err {
        Error::Input(_) => "input",
        Error::Solver { .. } => "solver",
        Error::Divergence { .. } => "divergence",
        Error::Config { .. } => "config",
        Error::Format { .. } => "format",
        Error::Assertion(_) => "assertion",
        Error::Io(_) => "io",
        Error::Csv(_) => "csv",
        Error::Json(_) => "json",
    };
    let mut doc = json!({
        "experiment": experiment.map(|e| e.name()),
        "kind": kind,
        "message": err.to_string(),
        "exit_code": err.exit_code(),
    });
    match err {
        Error::Divergence { t, step, state, .. } => {
            let snap = target.join("failure_state.pe3d");
            let saved = write_snapshot(&state.v, &SnapshotHeader::new(state.v.grid(), state.t), &snap).is_ok();
            doc["t"] = json!(t);
            doc["step"] = json!(step);
            if saved {
                doc["last_state"] = json!(snap);
            }
        }
        Error::Solver {
            solver,
            iterations,
            residual,
        } => {
            doc["solver"] = json!(solver);
            doc["iterations"] = json!(iterations);
            doc["residual"] = json!(residual);
        }
        Error::Config { line, .. } => doc["line"] = json!(line),
        _ => {}
    }
    let mut path = target.join("failure.json");
    let text = serde_json::to_string_pretty(&doc).unwrap_or_else(|_| doc.to_string());
    if fs::write(&path, text.as_bytes()).is_err() {
        path = PathBuf::from("failure.json");
        let _ = fs::write(&path, text.as_bytes());
    }
    path
}
