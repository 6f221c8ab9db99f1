//! CSV tables: trajectories (`t,H2,E2,J,K,Kbar,budget_slack`) and chain
//! traces (`n,H2,E2,J,K,kick_V2,rescaled`). Floats carry 17 significant
//! digits so values survive the text round trip exactly.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::estimates::{DiagSample, TrajectoryDiagnostics};
use crate::kick::ChainRecord;
use crate::norms::NormReport;

pub const TRAJECTORY_HEADER: [&str; 7] = ["t", "H2", "E2", "J", "K", "Kbar", "budget_slack"];
pub const CHAIN_HEADER: [&str; 7] = ["n", "H2", "E2", "J", "K", "kick_V2", "rescaled"];

fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_trajectory_csv<W: Write>(out: W, diag: &TrajectoryDiagnostics) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRAJECTORY_HEADER)?;
    for s in &diag.samples {
        let n = &s.norms;
        w.write_record([s.t, n.h2, n.e2, n.j, n.k, n.kbar, s.budget_slack].map(fmt))?;
    }
    w.flush()?;
    Ok(())
}

fn format_err(path: &Path, message: String) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        message,
    }
}

fn check_header(path: &Path, got: &csv::StringRecord, want: &[&str]) -> Result<()> {
    if got.iter().ne(want.iter().copied()) {
        return Err(format_err(path, format!("expected header {}, got {}", want.join(","), got.iter().collect::<Vec<_>>().join(","))));
    }
    Ok(())
}

fn parse_f64(path: &Path, row: usize, col: &str, s: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| format_err(path, format!("row {row}, column {col}: not a number: {s:?}")))
}

/// Reads a trajectory table. Timestamps must increase strictly and norms
/// must be nonnegative; violations are input errors.
pub fn read_trajectory_csv<R: Read>(input: R, path: &Path, f_h2: f64) -> Result<TrajectoryDiagnostics> {
    let mut r = csv::Reader::from_reader(input);
    check_header(path, r.headers()?, &TRAJECTORY_HEADER)?;
    let mut diag = TrajectoryDiagnostics::new(f_h2);
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let row = i + 1;
        if rec.len() != 7 {
            return Err(format_err(path, format!("row {row}: expected 7 fields, got {}", rec.len())));
        }
        let mut v = [0.0; 7];
        for (c, x) in v.iter_mut().enumerate() {
            *x = parse_f64(path, row, TRAJECTORY_HEADER[c], &rec[c])?;
        }
        if v[1..6].iter().any(|x| *x < 0.0) {
            return Err(Error::input(format!("{}: row {row} has a negative norm", path.display())));
        }
        diag.push(DiagSample {
            t: v[0],
            norms: NormReport {
                h2: v[1],
                e2: v[2],
                j: v[3],
                k: v[4],
                kbar: v[5],
            },
            budget_slack: v[6],
        })
        .map_err(|e| match e {
            Error::Input(m) => Error::input(format!("{}: row {row}: {m}", path.display())),
            e => e,
        })?;
    }
    if diag.is_empty() {
        return Err(Error::input(format!("{}: no samples", path.display())));
    }
    Ok(diag)
}

pub fn write_chain_csv<W: Write>(out: W, trace: &[ChainRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CHAIN_HEADER)?;
    for r in trace {
        w.write_record([
            r.n.to_string(),
            fmt(r.h2),
            fmt(r.e2),
            fmt(r.j),
            fmt(r.k),
            fmt(r.kick_v2),
            u8::from(r.rescaled).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Rows of a chain trace as `(n, [H2, E2, J, K, kick_V2], rescaled)`.
pub type ChainRow = (u64, [f64; 5], bool);

pub fn read_chain_csv<R: Read>(input: R, path: &Path) -> Result<Vec<ChainRow>> {
    let mut r = csv::Reader::from_reader(input);
    check_header(path, r.headers()?, &CHAIN_HEADER)?;
    let mut rows: Vec<ChainRow> = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let row = i + 1;
        if rec.len() != 7 {
            return Err(format_err(path, format!("row {row}: expected 7 fields, got {}", rec.len())));
        }
        let n: u64 = rec[0]
            .trim()
            .parse()
            .map_err(|_| format_err(path, format!("row {row}: bad index {:?}", &rec[0])))?;
        if let Some(prev) = rows.last() {
            if n <= prev.0 {
                return Err(Error::input(format!("{}: row {row}: chain index not increasing", path.display())));
            }
        }
        let mut v = [0.0; 5];
        for (c, x) in v.iter_mut().enumerate() {
            *x = parse_f64(path, row, CHAIN_HEADER[c + 1], &rec[c + 1])?;
            if *x < 0.0 {
                return Err(Error::input(format!("{}: row {row} has a negative norm", path.display())));
            }
        }
        let rescaled = match rec[6].trim() {
            "0" => false,
            "1" => true,
            other => return Err(format_err(path, format!("row {row}: rescaled must be 0 or 1, got {other:?}"))),
        };
        rows.push((n, v, rescaled));
    }
    Ok(rows)
}

pub fn write_trajectory_file(path: &Path, diag: &TrajectoryDiagnostics) -> Result<()> {
    write_trajectory_csv(File::create(path)?, diag)
}

pub fn read_trajectory_file(path: &Path, f_h2: f64) -> Result<TrajectoryDiagnostics> {
    read_trajectory_csv(File::open(path)?, path, f_h2)
}
