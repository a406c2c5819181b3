//! CSV and event-log file formats.
//!
//! * Simulated and limit paths share one schema:
//!   `t,X,Z1..ZK,Q1..QK,A,B,D,W,AQ`.
//! * Grid paths (map inputs/outputs) use `t,x,z1..zK`.
//! * Event logs are line-oriented text: `time kind customer_id phase`.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use mshw_core::des::{EventKind, EventRecord, SimPath};
use mshw_core::grid::GridPath;
use mshw_core::limits::LimitPath;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CsvError {
    #[error("cannot access {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {msg}")]
    Malformed { path: String, line: usize, msg: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CsvError + '_ {
    move |source| CsvError::Io { path: path.display().to_string(), source }
}

pub fn write_sim_path(path: &Path, sim: &SimPath) -> Result<(), CsvError> {
    let mut w = BufWriter::new(File::create(path).map_err(io_err(path))?);
    let k = sim.phases;
    let mut header = String::from("t,X");
    for i in 1..=k {
        header.push_str(&format!(",Z{i}"));
    }
    for i in 1..=k {
        header.push_str(&format!(",Q{i}"));
    }
    header.push_str(",A,B,D,W,AQ");
    writeln!(w, "{header}").map_err(io_err(path))?;
    for i in 0..sim.num_points() {
        let mut line = format!("{:.6},{}", sim.time(i), sim.x[i]);
        for kk in 0..k {
            line.push_str(&format!(",{}", sim.z_at(i, kk)));
        }
        for kk in 0..k {
            line.push_str(&format!(",{}", sim.q_at(i, kk)));
        }
        let wv = sim.virtual_wait.as_ref().map(|w| w[i]).unwrap_or(0.0);
        line.push_str(&format!(
            ",{},{},{},{:.9},{}",
            sim.abandonments[i], sim.entries[i], sim.completions[i], wv, sim.queued_abandoners[i]
        ));
        writeln!(w, "{line}").map_err(io_err(path))?;
    }
    Ok(())
}

/// Limit paths follow the simulated-path schema; the queue columns carry the
/// collapsed value `p_k (X̃)⁺`, the entry/completion columns have no limit
/// analog and are written as zero.
pub fn write_limit_path(path: &Path, lp: &LimitPath, initial_law: &[f64]) -> Result<(), CsvError> {
    let mut w = BufWriter::new(File::create(path).map_err(io_err(path))?);
    let k = lp.phases;
    let mut header = String::from("t,X");
    for i in 1..=k {
        header.push_str(&format!(",Z{i}"));
    }
    for i in 1..=k {
        header.push_str(&format!(",Q{i}"));
    }
    header.push_str(",A,B,D,W,AQ");
    writeln!(w, "{header}").map_err(io_err(path))?;
    for i in 0..lp.num_points() {
        let xp = lp.x[i].max(0.0);
        let mut line = format!("{:.6},{:.9}", lp.time(i), lp.x[i]);
        for kk in 0..k {
            line.push_str(&format!(",{:.9}", lp.z_at(i, kk)));
        }
        for kk in 0..k {
            line.push_str(&format!(",{:.9}", initial_law[kk] * xp));
        }
        line.push_str(&format!(",{:.9},0,0,{:.9},0", lp.abandon[i], lp.w[i]));
        writeln!(w, "{line}").map_err(io_err(path))?;
    }
    Ok(())
}

pub fn write_grid_path(path: &Path, gp: &GridPath) -> Result<(), CsvError> {
    let mut w = BufWriter::new(File::create(path).map_err(io_err(path))?);
    let k = gp.zdim();
    let mut header = String::from("t,x");
    for i in 1..=k {
        header.push_str(&format!(",z{i}"));
    }
    writeln!(w, "{header}").map_err(io_err(path))?;
    for i in 0..gp.num_points() {
        let mut line = format!("{:.9},{:.12}", gp.time(i), gp.x(i));
        for v in gp.z(i) {
            line.push_str(&format!(",{v:.12}"));
        }
        writeln!(w, "{line}").map_err(io_err(path))?;
    }
    Ok(())
}

/// Reads a grid path written by [`write_grid_path`]; the time column must be
/// uniform starting at zero.
pub fn read_grid_path(path: &Path) -> Result<GridPath, CsvError> {
    let file = File::open(path).map_err(io_err(path))?;
    let reader = BufReader::new(file);
    let pname = path.display().to_string();
    let mut values: Vec<f64> = Vec::new();
    let mut times: Vec<f64> = Vec::new();
    let mut width: Option<usize> = None;
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if lineno == 0 {
            continue; // header
        }
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').collect();
        if fields.len() < 2 {
            return Err(CsvError::Malformed {
                path: pname,
                line: lineno + 1,
                msg: "expected at least t and x columns".into(),
            });
        }
        match width {
            None => width = Some(fields.len() - 1),
            Some(w) if w == fields.len() - 1 => {}
            Some(w) => {
                return Err(CsvError::Malformed {
                    path: pname,
                    line: lineno + 1,
                    msg: format!("expected {} value columns, found {}", w, fields.len() - 1),
                })
            }
        }
        let parse = |s: &str, what: &str| -> Result<f64, CsvError> {
            s.parse::<f64>().map_err(|e| CsvError::Malformed {
                path: path.display().to_string(),
                line: lineno + 1,
                msg: format!("bad {what} '{s}': {e}"),
            })
        };
        times.push(parse(fields[0], "time")?);
        for f in &fields[1..] {
            values.push(parse(f, "value")?);
        }
    }
    let width = width.ok_or_else(|| CsvError::Malformed {
        path: path.display().to_string(),
        line: 1,
        msg: "no data rows".into(),
    })?;
    if times.len() < 2 {
        return Err(CsvError::Malformed {
            path: path.display().to_string(),
            line: 2,
            msg: "need at least two grid points".into(),
        });
    }
    let dt = times[1] - times[0];
    for (i, &t) in times.iter().enumerate() {
        if (t - i as f64 * dt).abs() > 1e-9 * (1.0 + t.abs()) {
            return Err(CsvError::Malformed {
                path: path.display().to_string(),
                line: i + 2,
                msg: "time column is not a uniform grid from zero".into(),
            });
        }
    }
    GridPath::from_values(width - 1, dt, values).map_err(|e| CsvError::Malformed {
        path: path.display().to_string(),
        line: 2,
        msg: e.to_string(),
    })
}

/// Line-oriented audit log: `time kind customer_id phase`. Phase transfers
/// produce a `phase_end`/`phase_start` pair.
pub fn write_event_log(path: &Path, events: &[EventRecord]) -> Result<(), CsvError> {
    let mut w = BufWriter::new(File::create(path).map_err(io_err(path))?);
    for ev in events {
        match ev.kind {
            EventKind::Arrival { first_phase } => {
                writeln!(w, "{:.9} arrival {} {}", ev.time, ev.customer, first_phase + 1)
            }
            EventKind::EnterService { phase } => {
                writeln!(w, "{:.9} enter_service {} {}", ev.time, ev.customer, phase + 1)
            }
            EventKind::PhaseTransfer { from, to } => {
                writeln!(w, "{:.9} phase_end {} {}", ev.time, ev.customer, from + 1).and_then(
                    |_| writeln!(w, "{:.9} phase_start {} {}", ev.time, ev.customer, to + 1),
                )
            }
            EventKind::Departure { phase } => {
                writeln!(w, "{:.9} departure {} {}", ev.time, ev.customer, phase + 1)
            }
            EventKind::Abandonment { first_phase } => {
                writeln!(w, "{:.9} abandonment {} {}", ev.time, ev.customer, first_phase + 1)
            }
        }
        .map_err(io_err(path))?;
    }
    Ok(())
}

/// Two-column plot data.
pub fn write_plotdata(path: &Path, header: (&str, &str), rows: &[(f64, f64)]) -> Result<(), CsvError> {
    let mut w = BufWriter::new(File::create(path).map_err(io_err(path))?);
    writeln!(w, "{},{}", header.0, header.1).map_err(io_err(path))?;
    for (a, b) in rows {
        writeln!(w, "{a},{b}").map_err(io_err(path))?;
    }
    Ok(())
}

/// Scaled marginal samples, one row per replication: `x,z1..zK`.
pub fn write_marginals(path: &Path, x: &[f64], z: &[Vec<f64>]) -> Result<(), CsvError> {
    let mut w = BufWriter::new(File::create(path).map_err(io_err(path))?);
    let k = z.len();
    let mut header = String::from("x");
    for i in 1..=k {
        header.push_str(&format!(",z{i}"));
    }
    writeln!(w, "{header}").map_err(io_err(path))?;
    for (i, xv) in x.iter().enumerate() {
        let mut line = format!("{xv:.9}");
        for zk in z {
            line.push_str(&format!(",{:.9}", zk[i]));
        }
        writeln!(w, "{line}").map_err(io_err(path))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_path_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("path.csv");
        let mut gp = GridPath::zeros(2, 0.25, 1.0).unwrap();
        for i in 0..gp.num_points() {
            let row = gp.point_mut(i);
            row[0] = i as f64;
            row[1] = -(i as f64);
            row[2] = 0.5 * i as f64;
        }
        write_grid_path(&file, &gp).unwrap();
        let back = read_grid_path(&file).unwrap();
        assert_eq!(back.zdim(), 2);
        assert!((back.dt() - 0.25).abs() < 1e-12);
        assert!(gp.sup_distance(&back) < 1e-9);
    }

    #[test]
    fn malformed_grid_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("bad.csv");
        std::fs::write(&file, "t,x\n0.0,1.0\n0.5,2.0\n1.5,3.0\n").unwrap();
        assert!(matches!(read_grid_path(&file), Err(CsvError::Malformed { .. })));
        std::fs::write(&file, "t,x\n0.0,1.0\n0.5,oops\n").unwrap();
        assert!(matches!(read_grid_path(&file), Err(CsvError::Malformed { .. })));
    }
}
