use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use pe3d_core::io::{parse_config, run_experiment, write_failure, Experiment};
use pe3d_core::{Error, Result};

/// Simplified 3D primitive equations: experiments and property checks.
#[derive(Parser, Debug)]
#[command(name = "pe3d", version)]
struct Cli {
    /// One of: verify, decay, absorb, kicks, diag, probe.
    experiment: String,
    /// Line-oriented config file.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the config output directory.
    #[arg(long)]
    output: Option<PathBuf>,
}

fn init_threads() -> Result<()> {
    let Ok(raw) = std::env::var("PE3D_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|n| *n >= 1)
        .ok_or_else(|| Error::input(format!("PE3D_THREADS must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::input(format!("thread pool: {e}")))
}

fn run(cli: &Cli, exp: Experiment, out: &mut Option<PathBuf>) -> Result<()> {
    init_threads()?;
    let text = std::fs::read_to_string(&cli.config)
        .map_err(|e| Error::input(format!("cannot read {}: {e}", cli.config.display())))?;
    let mut cfg = parse_config(&text)?;
    if let Some(c) = cfg.experiment {
        if c != exp {
            return Err(Error::input(format!(
                "config selects experiment {} but {} was requested",
                c.name(),
                exp.name()
            )));
        }
    }
    cfg.experiment = Some(exp);
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = &cli.output {
        cfg.output_dir = o.clone();
    }
    *out = Some(cfg.output_dir.clone());
    let summary = run_experiment(&cfg)?;
    for c in &summary.checks {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    println!("artifacts in {}", summary.output_dir.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            let err = Error::input(e.kind().to_string());
            let p = write_failure(&PathBuf::from("."), None, &err);
            eprintln!("diagnostics: {}", p.display());
            return ExitCode::from(err.exit_code() as u8);
        }
    };
    let exp = Experiment::parse(&cli.experiment);
    let mut out = cli.output.clone();
    let result = match exp {
        Some(exp) => run(&cli, exp, &mut out),
        None => Err(Error::input(format!(
            "unknown experiment {:?} (verify, decay, absorb, kicks, diag, probe)",
            cli.experiment
        ))),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("pe3d: {err}");
            let dir = out.unwrap_or_else(|| PathBuf::from("pe3d_out"));
            let p = write_failure(&dir, exp, &err);
            eprintln!("diagnostics: {}", p.display());
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
