//! Line-oriented run configuration.
//!
//! ```text
//! # comment
//! experiment = decay
//! output_dir = out
//!
//! [grid]
//! n1 = 16
//! n2 = 16
//! nz = 16
//!
//! [sim]
//! dt_max = 1e-3
//! ```
//!
//! Top-level keys come before the first `[section]`. Blank lines and lines
//! starting with `#` are ignored. Lists are comma separated. Unknown keys,
//! duplicate keys and duplicate sections are errors, reported with their
//! line number.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dynamics::{Forcing, Scheme, SimulationParams};
use crate::error::{Error, Result};
use crate::experiments::{smooth_forcing, AbsorbConfig, DecayConfig, KickExperimentConfig, ProbeConfig};
use crate::grid::GridSpec;
use crate::kick::KickConfig;
use crate::manufactured::ManufacturedConfig;
use crate::projection::PoissonSolveParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Experiment {
    Verify,
    Decay,
    Absorb,
    Kicks,
    Diag,
    Probe,
}

impl Experiment {
    pub const ALL: [Experiment; 6] = [
        Experiment::Verify,
        Experiment::Decay,
        Experiment::Absorb,
        Experiment::Kicks,
        Experiment::Diag,
        Experiment::Probe,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Verify => "verify",
            Experiment::Decay => "decay",
            Experiment::Absorb => "absorb",
            Experiment::Kicks => "kicks",
            Experiment::Diag => "diag",
            Experiment::Probe => "probe",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|e| e.name() == s)
    }

    fn needs_grid(self) -> bool {
        self != Experiment::Diag
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimSection {
    pub nu: f64,
    pub dt_max: f64,
    pub cfl: f64,
    pub t_end: f64,
    pub advection: bool,
    pub scheme: Scheme,
    pub solver_rel_tol: f64,
    pub poisson_rel_tol: f64,
    pub poisson_max_iter: Option<usize>,
    /// `|f|_H^2` of the smooth constant forcing; 0 means unforced.
    pub forcing_h2: f64,
}

impl Default for SimSection {
    fn default() -> Self {
        let p = SimulationParams::default();
        SimSection {
            nu: p.nu,
            dt_max: p.dt_max,
            cfl: p.cfl,
            t_end: p.t_end,
            advection: p.advection,
            scheme: p.scheme,
            solver_rel_tol: p.solver_rel_tol,
            poisson_rel_tol: p.poisson.rel_tol,
            poisson_max_iter: p.poisson.max_iter,
            forcing_h2: 0.0,
        }
    }
}

impl SimSection {
    /// Parameters with the forcing built on `grid` from `seed`.
    pub fn params(&self, grid: &GridSpec, seed: u64) -> Result<SimulationParams> {
        let forcing = if self.forcing_h2 > 0.0 {
            Forcing::Constant(smooth_forcing(grid, seed, self.forcing_h2)?)
        } else {
            Forcing::Zero
        };
        let p = SimulationParams {
            nu: self.nu,
            dt_max: self.dt_max,
            cfl: self.cfl,
            t_end: self.t_end,
            forcing,
            advection: self.advection,
            scheme: self.scheme,
            solver_rel_tol: self.solver_rel_tol,
            poisson: PoissonSolveParams {
                rel_tol: self.poisson_rel_tol,
                max_iter: self.poisson_max_iter,
            },
        };
        p.validate(grid)?;
        Ok(p)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecaySection {
    pub r: f64,
    pub eps: f64,
    pub n_initial: usize,
    pub include_slowest_mode: bool,
}

impl Default for DecaySection {
    fn default() -> Self {
        let d = DecayConfig::default();
        DecaySection {
            r: d.r,
            eps: d.eps,
            n_initial: d.n_initial,
            include_slowest_mode: d.include_slowest_mode,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbsorbSection {
    pub r: f64,
    pub n_initial: usize,
    pub window: f64,
}

impl Default for AbsorbSection {
    fn default() -> Self {
        let a = AbsorbConfig::default();
        AbsorbSection {
            r: a.r,
            n_initial: a.n_initial,
            window: a.window,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KickSection {
    /// Inter-kick time; measured as `T_V(4R, R)` when absent.
    pub t_kick: Option<f64>,
    pub r: f64,
    pub modes_h: usize,
    pub modes_z: usize,
    pub n_steps: usize,
    pub burn_in: usize,
    pub n_chains: usize,
    pub windows: usize,
    pub period_samples: usize,
}

impl Default for KickSection {
    fn default() -> Self {
        let k = KickConfig::default();
        let e = KickExperimentConfig::default();
        KickSection {
            t_kick: None,
            r: k.r,
            modes_h: k.modes_h,
            modes_z: k.modes_z,
            n_steps: k.n_steps,
            burn_in: k.burn_in,
            n_chains: e.n_chains,
            windows: e.windows,
            period_samples: e.period_samples,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagSection {
    pub inputs: Vec<PathBuf>,
    pub eta: f64,
}

impl Default for DiagSection {
    fn default() -> Self {
        DiagSection {
            inputs: Vec::new(),
            eta: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub experiment: Option<Experiment>,
    pub output_dir: PathBuf,
    /// Steps between diagnostic samples.
    pub record_every: usize,
    pub seed: u64,
    pub grid: Option<GridSpec>,
    pub sim: Option<SimSection>,
    pub decay: DecaySection,
    pub absorb: AbsorbSection,
    pub kick: Option<KickSection>,
    pub probe: ProbeConfig,
    pub verify: ManufacturedConfig,
    pub diag: DiagSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            experiment: None,
            output_dir: PathBuf::from("pe3d_out"),
            record_every: 5,
            seed: 0,
            grid: None,
            sim: None,
            decay: DecaySection::default(),
            absorb: AbsorbSection::default(),
            kick: None,
            probe: ProbeConfig::default(),
            verify: ManufacturedConfig::default(),
            diag: DiagSection::default(),
        }
    }
}

impl RunConfig {
    /// Checks that the blocks the experiment needs are present.
    pub fn check_for(&self, exp: Experiment) -> Result<()> {
        let missing = |what: &str| Error::Config {
            line: 0,
            message: format!("experiment {} needs a [{what}] section", exp.name()),
        };
        if exp.needs_grid() {
            if self.grid.is_none() {
                return Err(missing("grid"));
            }
            if self.sim.is_none() {
                return Err(missing("sim"));
            }
        }
        if exp == Experiment::Kicks && self.kick.is_none() {
            return Err(missing("kick"));
        }
        if exp == Experiment::Diag && self.diag.inputs.is_empty() {
            return Err(Error::Config {
                line: 0,
                message: "experiment diag needs [diag] inputs".into(),
            });
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<GridSpec> {
        self.grid.ok_or_else(|| Error::input("no [grid] section"))
    }

    pub fn params(&self) -> Result<SimulationParams> {
        let g = self.grid()?;
        self.sim
            .as_ref()
            .ok_or_else(|| Error::input("no [sim] section"))?
            .params(&g, self.seed)
    }

    pub fn decay_config(&self) -> DecayConfig {
        DecayConfig {
            r: self.decay.r,
            eps: self.decay.eps,
            n_initial: self.decay.n_initial,
            seed: self.seed,
            t_end: self.sim.as_ref().map_or(1.0, |s| s.t_end),
            record_every: self.record_every,
            include_slowest_mode: self.decay.include_slowest_mode,
        }
    }

    pub fn absorb_config(&self) -> AbsorbConfig {
        let sim = self.sim.clone().unwrap_or_default();
        AbsorbConfig {
            r: self.absorb.r,
            f_h2: sim.forcing_h2,
            n_initial: self.absorb.n_initial,
            seed: self.seed,
            t_end: sim.t_end,
            window: self.absorb.window,
            record_every: self.record_every,
        }
    }

    pub fn kick_config(&self) -> Option<KickExperimentConfig> {
        let k = self.kick.as_ref()?;
        Some(KickExperimentConfig {
            kick: KickConfig {
                t_kick: k.t_kick.unwrap_or(1.0),
                r: k.r,
                modes_h: k.modes_h,
                modes_z: k.modes_z,
                seed: self.seed,
                n_steps: k.n_steps,
                burn_in: k.burn_in,
            },
            n_chains: k.n_chains,
            windows: k.windows,
            period_samples: k.period_samples,
            measure_period: k.t_kick.is_none(),
        })
    }

    pub fn probe_config(&self) -> ProbeConfig {
        ProbeConfig {
            seed: self.seed,
            ..self.probe.clone()
        }
    }

    /// Text that [`parse_config`] maps back to an equal config.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        if let Some(e) = self.experiment {
            kv(&mut s, "experiment", e.name());
        }
        kv(&mut s, "output_dir", self.output_dir.display());
        kv(&mut s, "record_every", self.record_every);
        kv(&mut s, "seed", self.seed);
        if let Some(g) = &self.grid {
            s.push_str("\n[grid]\n");
            kv(&mut s, "l1", g.l1);
            kv(&mut s, "l2", g.l2);
            kv(&mut s, "h", g.h);
            kv(&mut s, "n1", g.n1);
            kv(&mut s, "n2", g.n2);
            kv(&mut s, "nz", g.nz);
        }
        if let Some(p) = &self.sim {
            s.push_str("\n[sim]\n");
            kv(&mut s, "nu", p.nu);
            kv(&mut s, "dt_max", p.dt_max);
            kv(&mut s, "cfl", p.cfl);
            kv(&mut s, "t_end", p.t_end);
            kv(&mut s, "advection", p.advection);
            kv(&mut s, "scheme", p.scheme.name());
            kv(&mut s, "solver_rel_tol", p.solver_rel_tol);
            kv(&mut s, "poisson_rel_tol", p.poisson_rel_tol);
            if let Some(m) = p.poisson_max_iter {
                kv(&mut s, "poisson_max_iter", m);
            }
            kv(&mut s, "forcing_h2", p.forcing_h2);
        }
        s.push_str("\n[decay]\n");
        kv(&mut s, "r", self.decay.r);
        kv(&mut s, "eps", self.decay.eps);
        kv(&mut s, "n_initial", self.decay.n_initial);
        kv(&mut s, "include_slowest_mode", self.decay.include_slowest_mode);
        s.push_str("\n[absorb]\n");
        kv(&mut s, "r", self.absorb.r);
        kv(&mut s, "n_initial", self.absorb.n_initial);
        kv(&mut s, "window", self.absorb.window);
        if let Some(k) = &self.kick {
            s.push_str("\n[kick]\n");
            if let Some(t) = k.t_kick {
                kv(&mut s, "t_kick", t);
            }
            kv(&mut s, "r", k.r);
            kv(&mut s, "modes_h", k.modes_h);
            kv(&mut s, "modes_z", k.modes_z);
            kv(&mut s, "n_steps", k.n_steps);
            kv(&mut s, "burn_in", k.burn_in);
            kv(&mut s, "n_chains", k.n_chains);
            kv(&mut s, "windows", k.windows);
            kv(&mut s, "period_samples", k.period_samples);
        }
        s.push_str("\n[probe]\n");
        kv(&mut s, "t", self.probe.t);
        kv(&mut s, "deltas", join(&self.probe.deltas));
        kv(&mut s, "e2_initial", self.probe.e2_initial);
        let v = &self.verify;
        s.push_str("\n[verify]\n");
        kv(&mut s, "amplitude", v.amplitude);
        kv(&mut s, "decay", v.decay);
        kv(&mut s, "t_final", v.t_final);
        kv(&mut s, "spatial_ns", join(&v.spatial_ns));
        kv(&mut s, "dt_coeff", v.dt_coeff);
        kv(&mut s, "temporal_n", v.temporal_n);
        kv(&mut s, "temporal_t_final", v.temporal_t_final);
        kv(&mut s, "temporal_dts", join(&v.temporal_dts));
        s.push_str("\n[diag]\n");
        let inputs: Vec<String> = self.diag.inputs.iter().map(|p| p.display().to_string()).collect();
        if !inputs.is_empty() {
            kv(&mut s, "inputs", inputs.join(", "));
        }
        kv(&mut s, "eta", self.diag.eta);
        s
    }
}

fn kv(s: &mut String, key: &str, value: impl std::fmt::Display) {
    let _ = writeln!(s, "{key} = {value}");
}

fn join<T: std::fmt::Display>(xs: &[T]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ")
}

struct Entry {
    key: String,
    value: String,
    line: usize,
}

struct Section {
    name: String,
    line: usize,
    entries: Vec<Entry>,
}

fn config_err(line: usize, message: impl Into<String>) -> Error {
    Error::Config {
        line,
        message: message.into(),
    }
}

fn lex(text: &str) -> Result<Vec<Section>> {
    let mut sections = vec![Section {
        name: String::new(),
        line: 0,
        entries: Vec::new(),
    }];
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let l = raw.trim();
        if l.is_empty() || l.starts_with('#') {
            continue;
        }
        if let Some(rest) = l.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| config_err(line, format!("malformed section header {l:?}")))?
                .trim();
            if name.is_empty() {
                return Err(config_err(line, "empty section name"));
            }
            if sections.iter().any(|s| s.name == name) {
                return Err(config_err(line, format!("duplicate section [{name}]")));
            }
            sections.push(Section {
                name: name.to_string(),
                line,
                entries: Vec::new(),
            });
            continue;
        }
        let (k, v) = l
            .split_once('=')
            .ok_or_else(|| config_err(line, format!("expected key = value, got {l:?}")))?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() {
            return Err(config_err(line, "missing key before '='"));
        }
        let sec = sections.last_mut().expect("top-level section");
        if sec.entries.iter().any(|e| e.key == k) {
            return Err(config_err(line, format!("duplicate key {k:?}")));
        }
        sec.entries.push(Entry {
            key: k.to_string(),
            value: v.to_string(),
            line,
        });
    }
    Ok(sections)
}

/// Typed access to one section; tracks which keys were consumed.
struct Reader<'a> {
    sec: &'a Section,
    used: Vec<bool>,
}

impl<'a> Reader<'a> {
    fn new(sec: &'a Section) -> Self {
        Reader {
            sec,
            used: vec![false; sec.entries.len()],
        }
    }

    fn label(&self, key: &str) -> String {
        if self.sec.name.is_empty() {
            key.to_string()
        } else {
            format!("{}.{key}", self.sec.name)
        }
    }

    fn raw(&mut self, key: &str) -> Option<(&'a str, usize)> {
        let i = self.sec.entries.iter().position(|e| e.key == key)?;
        self.used[i] = true;
        let e = &self.sec.entries[i];
        Some((e.value.as_str(), e.line))
    }

    fn parse<T: FromStr>(&mut self, key: &str, what: &str) -> Result<Option<(T, usize)>> {
        match self.raw(key) {
            None => Ok(None),
            Some((v, line)) => v.parse::<T>().map(|x| Some((x, line))).map_err(|_| {
                config_err(line, format!("{}: expected {what}, got {v:?}", self.label(key)))
            }),
        }
    }

    fn get<T: FromStr + Copy>(
        &mut self,
        key: &str,
        what: &str,
        default: Option<T>,
        ok: impl Fn(T) -> bool,
        bound: &str,
    ) -> Result<T> {
        match self.parse::<T>(key, what)? {
            Some((x, line)) => {
                if ok(x) {
                    Ok(x)
                } else {
                    Err(config_err(line, format!("{} must be {bound}", self.label(key))))
                }
            }
            None => default.ok_or_else(|| {
                config_err(self.sec.line, format!("missing required key {}", self.label(key)))
            }),
        }
    }

    fn f64(&mut self, key: &str, default: Option<f64>, ok: impl Fn(f64) -> bool, bound: &str) -> Result<f64> {
        self.get(key, "a number", default, |x: f64| x.is_finite() && ok(x), bound)
    }

    fn usize(&mut self, key: &str, default: Option<usize>, ok: impl Fn(usize) -> bool, bound: &str) -> Result<usize> {
        self.get(key, "a nonnegative integer", default, ok, bound)
    }

    fn bool(&mut self, key: &str, default: bool) -> Result<bool> {
        Ok(self.parse::<bool>(key, "true or false")?.map_or(default, |x| x.0))
    }

    fn list<T: FromStr>(&mut self, key: &str, what: &str) -> Result<Option<(Vec<T>, usize)>> {
        let Some((v, line)) = self.raw(key) else {
            return Ok(None);
        };
        let items = v
            .split(',')
            .map(|x| {
                x.trim().parse::<T>().map_err(|_| {
                    config_err(line, format!("{}: expected a list of {what}, got {v:?}", self.label(key)))
                })
            })
            .collect::<Result<Vec<T>>>()?;
        if items.is_empty() {
            return Err(config_err(line, format!("{} must not be empty", self.label(key))));
        }
        Ok(Some((items, line)))
    }

    fn finish(self) -> Result<()> {
        for (e, used) in self.sec.entries.iter().zip(&self.used) {
            if !used {
                let where_ = if self.sec.name.is_empty() {
                    "at top level".to_string()
                } else {
                    format!("in [{}]", self.sec.name)
                };
                return Err(config_err(e.line, format!("unknown key {:?} {where_}", e.key)));
            }
        }
        Ok(())
    }
}

fn positive(x: f64) -> bool {
    x > 0.0
}

fn nonneg(x: f64) -> bool {
    x >= 0.0
}

/// Parses and validates a run configuration.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let sections = lex(text)?;
    let d = RunConfig::default();
    let mut cfg = RunConfig::default();
    for sec in &sections {
        let mut r = Reader::new(sec);
        match sec.name.as_str() {
            "" => {
                if let Some((v, line)) = r.raw("experiment") {
                    cfg.experiment = Some(Experiment::parse(v).ok_or_else(|| {
                        config_err(
                            line,
                            format!("unknown experiment {v:?} (verify, decay, absorb, kicks, diag, probe)"),
                        )
                    })?);
                }
                if let Some((v, _)) = r.raw("output_dir") {
                    cfg.output_dir = PathBuf::from(v);
                }
                cfg.record_every = r.usize("record_every", Some(d.record_every), |n| n >= 1, "at least 1")?;
                cfg.seed = r.parse::<u64>("seed", "a 64-bit unsigned integer")?.map_or(d.seed, |x| x.0);
            }
            "grid" => {
                let g = GridSpec {
                    l1: r.f64("l1", Some(1.0), positive, "positive")?,
                    l2: r.f64("l2", Some(1.0), positive, "positive")?,
                    h: r.f64("h", Some(1.0), positive, "positive")?,
                    n1: r.usize("n1", None, |n| n >= crate::grid::MIN_CELLS, "at least 4")?,
                    n2: r.usize("n2", None, |n| n >= crate::grid::MIN_CELLS, "at least 4")?,
                    nz: r.usize("nz", None, |n| n >= crate::grid::MIN_CELLS, "at least 4")?,
                };
                g.validate().map_err(|e| config_err(sec.line, e.to_string()))?;
                cfg.grid = Some(g);
            }
            "sim" => {
                let s = SimSection::default();
                let scheme = match r.raw("scheme") {
                    None => s.scheme,
                    Some((v, line)) => Scheme::parse(v).ok_or_else(|| {
                        config_err(
                            line,
                            format!("sim.scheme: unknown scheme {v:?} (diffuse_then_project, stokes_implicit)"),
                        )
                    })?,
                };
                let tol = |x: f64| x > 0.0 && x < 1.0;
                cfg.sim = Some(SimSection {
                    nu: r.f64("nu", Some(s.nu), positive, "positive")?,
                    dt_max: r.f64("dt_max", Some(s.dt_max), positive, "positive")?,
                    cfl: r.f64("cfl", Some(s.cfl), |x| x > 0.0 && x <= 1.0, "in (0, 1]")?,
                    t_end: r.f64("t_end", Some(s.t_end), nonneg, ">= 0")?,
                    advection: r.bool("advection", s.advection)?,
                    scheme,
                    solver_rel_tol: r.f64("solver_rel_tol", Some(s.solver_rel_tol), tol, "in (0, 1)")?,
                    poisson_rel_tol: r.f64("poisson_rel_tol", Some(s.poisson_rel_tol), tol, "in (0, 1)")?,
                    poisson_max_iter: match r.parse::<usize>("poisson_max_iter", "a positive integer")? {
                        Some((0, line)) => return Err(config_err(line, "sim.poisson_max_iter must be at least 1")),
                        x => x.map(|x| x.0),
                    },
                    forcing_h2: r.f64("forcing_h2", Some(s.forcing_h2), nonneg, ">= 0")?,
                });
            }
            "decay" => {
                let s = DecaySection::default();
                cfg.decay = DecaySection {
                    r: r.f64("r", Some(s.r), nonneg, ">= 0")?,
                    eps: r.f64("eps", Some(s.eps), positive, "positive")?,
                    n_initial: r.usize("n_initial", Some(s.n_initial), |n| n >= 1, "at least 1")?,
                    include_slowest_mode: r.bool("include_slowest_mode", s.include_slowest_mode)?,
                };
            }
            "absorb" => {
                let s = AbsorbSection::default();
                cfg.absorb = AbsorbSection {
                    r: r.f64("r", Some(s.r), nonneg, ">= 0")?,
                    n_initial: r.usize("n_initial", Some(s.n_initial), |n| n >= 1, "at least 1")?,
                    window: r.f64("window", Some(s.window), |x| x > 0.0 && x <= 1.0, "in (0, 1]")?,
                };
            }
            "kick" => {
                let s = KickSection::default();
                let t_kick = match r.parse::<f64>("t_kick", "a number")? {
                    Some((t, line)) if !(t > 0.0 && t.is_finite()) => {
                        return Err(config_err(line, "kick.t_kick must be positive"))
                    }
                    x => x.map(|x| x.0),
                };
                let k = KickSection {
                    t_kick,
                    r: r.f64("r", Some(s.r), nonneg, ">= 0")?,
                    modes_h: r.usize("modes_h", Some(s.modes_h), |n| n >= 1, "at least 1")?,
                    modes_z: r.usize("modes_z", Some(s.modes_z), |n| n >= 1, "at least 1")?,
                    n_steps: r.usize("n_steps", Some(s.n_steps), |n| n >= 1, "at least 1")?,
                    burn_in: r.usize("burn_in", Some(s.burn_in), |_| true, "")?,
                    n_chains: r.usize("n_chains", Some(s.n_chains), |n| n >= 2, "at least 2")?,
                    windows: r.usize("windows", Some(s.windows), |n| n >= 2, "at least 2")?,
                    period_samples: r.usize("period_samples", Some(s.period_samples), |_| true, "")?,
                };
                if k.burn_in >= k.n_steps {
                    return Err(config_err(sec.line, "kick.burn_in must be below kick.n_steps"));
                }
                if k.windows > k.n_steps - k.burn_in {
                    return Err(config_err(sec.line, "kick.windows exceeds the post-burn-in length"));
                }
                cfg.kick = Some(k);
            }
            "probe" => {
                let s = ProbeConfig::default();
                let t = r.f64("t", Some(s.t), nonneg, ">= 0")?;
                let deltas = match r.list::<f64>("deltas", "numbers")? {
                    None => s.deltas,
                    Some((ds, line)) => {
                        let ok = ds.iter().all(|x| *x > 0.0) && ds.windows(2).all(|w| w[1] < w[0]);
                        if !ok {
                            return Err(config_err(line, "probe.deltas must be positive and strictly decreasing"));
                        }
                        ds
                    }
                };
                cfg.probe = ProbeConfig {
                    t,
                    deltas,
                    e2_initial: r.f64("e2_initial", Some(s.e2_initial), nonneg, ">= 0")?,
                    seed: 0,
                };
            }
            "verify" => {
                let s = ManufacturedConfig::default();
                let spatial_ns = match r.list::<usize>("spatial_ns", "integers")? {
                    None => s.spatial_ns,
                    Some((ns, line)) => {
                        if ns.len() < 2 || !ns.windows(2).all(|w| w[1] > w[0]) || ns[0] < crate::grid::MIN_CELLS {
                            return Err(config_err(
                                line,
                                "verify.spatial_ns needs at least two increasing sizes of at least 4",
                            ));
                        }
                        ns
                    }
                };
                let temporal_dts = match r.list::<f64>("temporal_dts", "numbers")? {
                    None => s.temporal_dts,
                    Some((ds, line)) => {
                        if ds.len() < 3 || !ds.iter().all(|x| *x > 0.0) || !ds.windows(2).all(|w| w[1] < w[0]) {
                            return Err(config_err(
                                line,
                                "verify.temporal_dts needs at least three positive decreasing steps",
                            ));
                        }
                        ds
                    }
                };
                cfg.verify = ManufacturedConfig {
                    amplitude: r.f64("amplitude", Some(s.amplitude), nonneg, ">= 0")?,
                    decay: r.f64("decay", Some(s.decay), |_| true, "")?,
                    t_final: r.f64("t_final", Some(s.t_final), positive, "positive")?,
                    spatial_ns,
                    dt_coeff: r.f64("dt_coeff", Some(s.dt_coeff), positive, "positive")?,
                    temporal_n: r.usize("temporal_n", Some(s.temporal_n), |n| n >= crate::grid::MIN_CELLS, "at least 4")?,
                    temporal_t_final: r.f64("temporal_t_final", Some(s.temporal_t_final), positive, "positive")?,
                    temporal_dts,
                };
            }
            "diag" => {
                let s = DiagSection::default();
                let inputs = match r.raw("inputs") {
                    None => Vec::new(),
                    Some((v, _)) => v.split(',').map(|p| PathBuf::from(p.trim())).collect(),
                };
                cfg.diag = DiagSection {
                    inputs,
                    eta: r.f64("eta", Some(s.eta), positive, "positive")?,
                };
            }
            other => return Err(config_err(sec.line, format!("unknown section [{other}]"))),
        }
        r.finish()?;
    }
    if let Some(e) = cfg.experiment {
        cfg.check_for(e)?;
    }
    Ok(cfg)
}
