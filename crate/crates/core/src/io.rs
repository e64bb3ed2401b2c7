//! CSV and JSON artifacts.
//!
//! Trace CSV, one row per generation per run, ordered by `(run_id, t)`:
//!
//! ```text
//! run_id,t,gamma_h,gamma_i,descendants_h,descendants_i,resources_total,tau_t,alpha_t,served_h,served_i
//! ```
//!
//! With a number of sub-populations other than two the suffixes are the
//! sub-population indices (`gamma_0`, `gamma_1`, ...). `alpha_t` is empty
//! when undefined. Floats are written in shortest round-trip form, so
//! re-parsing reproduces the in-memory values exactly.
//!
//! Transport matrix CSV: the first row holds the demand masses `b` after an
//! ignored corner cell, the first column holds the supply masses `a`, and the
//! body is the cost matrix:
//!
//! ```text
//! a\b,1,2
//! 2,0,1
//! 1,1,0
//! ```
//!
//! Flow CSV: the plan's flow matrix, one row per supply bin, no header.

use crate::sim::TrajectoryOutcome;
use crate::transport::{CostMatrix, DiscreteMarginal, TransportError, TransportPlan};
use serde::Serialize;
use std::io::Write;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("{0}")]
    Format(String),
    #[error(transparent)]
    Transport(#[from] TransportError),
}

fn format_err(msg: impl Into<String>) -> IoError {
    IoError::Format(msg.into())
}

/// Writes to a temporary file next to `path` and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), IoError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| IoError::Io(e.error))?;
    Ok(())
}

/// Pretty JSON with a trailing newline.
pub fn json_bytes<T: Serialize + ?Sized>(value: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(value).expect("serializable value");
    out.push(b'\n');
    out
}

pub fn column_suffixes(subpopulations: usize) -> Vec<String> {
    if subpopulations == 2 {
        vec!["h".into(), "i".into()]
    } else {
        (0..subpopulations).map(|k| k.to_string()).collect()
    }
}

pub fn trace_header(subpopulations: usize) -> Vec<String> {
    let suffixes = column_suffixes(subpopulations);
    let group = |name: &str| suffixes.iter().map(|s| format!("{name}_{s}")).collect::<Vec<_>>();
    let mut h = vec!["run_id".to_string(), "t".to_string()];
    h.extend(group("gamma"));
    h.extend(group("descendants"));
    h.extend(["resources_total", "tau_t", "alpha_t"].map(String::from));
    h.extend(group("served"));
    h
}

/// One trace row.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub run_id: usize,
    pub t: usize,
    pub gamma: Vec<u64>,
    pub descendants: Vec<u64>,
    pub resources_total: f64,
    pub tau: f64,
    pub alpha: Option<f64>,
    pub served: Vec<u64>,
}

pub fn trace_rows(trajectories: &[TrajectoryOutcome]) -> Vec<TraceRow> {
    trajectories
        .iter()
        .enumerate()
        .flat_map(|(run_id, tr)| {
            tr.trace.iter().map(move |r| TraceRow {
                run_id,
                t: r.t,
                gamma: r.counts.clone(),
                descendants: r.descendants.clone(),
                resources_total: r.resources_total,
                tau: r.threshold,
                alpha: r.ratio,
                served: r.served.clone(),
            })
        })
        .collect()
}

pub fn trace_csv(trajectories: &[TrajectoryOutcome], subpopulations: usize) -> Result<Vec<u8>, IoError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(trace_header(subpopulations))?;
    for row in trace_rows(trajectories) {
        let mut rec = vec![row.run_id.to_string(), row.t.to_string()];
        rec.extend(row.gamma.iter().map(u64::to_string));
        rec.extend(row.descendants.iter().map(u64::to_string));
        rec.push(row.resources_total.to_string());
        rec.push(row.tau.to_string());
        rec.push(row.alpha.map(|a| a.to_string()).unwrap_or_default());
        rec.extend(row.served.iter().map(u64::to_string));
        w.write_record(&rec)?;
    }
    w.into_inner().map_err(|e| IoError::Io(e.into_error()))
}

pub fn read_trace_csv(bytes: &[u8]) -> Result<Vec<TraceRow>, IoError> {
    let mut r = csv::Reader::from_reader(bytes);
    let header: Vec<String> = r.headers()?.iter().map(String::from).collect();
    if header.len() < 5 || (header.len() - 5) % 3 != 0 {
        return Err(format_err(format!("unexpected trace header with {} columns", header.len())));
    }
    let s = (header.len() - 5) / 3;
    if header != trace_header(s) {
        return Err(format_err(format!("trace header mismatch: {}", header.join(","))));
    }
    let mut rows = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let bad = |col: usize| format_err(format!("row {}: column {} = {:?}", line + 2, header[col], &rec[col]));
        let int = |col: usize| rec[col].parse::<u64>().map_err(|_| bad(col));
        let float = |col: usize| rec[col].parse::<f64>().map_err(|_| bad(col));
        let ints = |start: usize| (start..start + s).map(int).collect::<Result<Vec<_>, _>>();
        let alpha_col = 2 + 2 * s + 2;
        rows.push(TraceRow {
            run_id: int(0)? as usize,
            t: int(1)? as usize,
            gamma: ints(2)?,
            descendants: ints(2 + s)?,
            resources_total: float(2 + 2 * s)?,
            tau: float(2 + 2 * s + 1)?,
            alpha: if rec[alpha_col].is_empty() { None } else { Some(float(alpha_col)?) },
            served: ints(alpha_col + 1)?,
        });
    }
    Ok(rows)
}

/// Parses the transport matrix CSV into `(a, b, cost)`.
pub fn read_transport_csv(text: &str) -> Result<(DiscreteMarginal, DiscreteMarginal, CostMatrix), IoError> {
    let mut r = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_reader(text.as_bytes());
    let mut lines = Vec::new();
    for rec in r.records() {
        lines.push(rec?.iter().map(String::from).collect::<Vec<_>>());
    }
    let (first, body) = lines.split_first().ok_or_else(|| format_err("empty transport CSV"))?;
    let num = |s: &str, at: (usize, usize)| {
        s.parse::<f64>().map_err(|_| format_err(format!("row {}, column {}: not a number: {s:?}", at.0 + 1, at.1 + 1)))
    };
    let b = first[1..].iter().enumerate().map(|(j, s)| num(s, (0, j + 1))).collect::<Result<Vec<_>, _>>()?;
    let mut a = Vec::with_capacity(body.len());
    let mut entries = Vec::with_capacity(body.len() * b.len());
    for (i, row) in body.iter().enumerate() {
        if row.len() != b.len() + 1 {
            return Err(format_err(format!("row {} has {} cells, expected {}", i + 2, row.len(), b.len() + 1)));
        }
        a.push(num(&row[0], (i + 1, 0))?);
        for (j, s) in row[1..].iter().enumerate() {
            entries.push(num(s, (i + 1, j + 1))?);
        }
    }
    let rows = a.len();
    let cols = b.len();
    Ok((DiscreteMarginal::new(a)?, DiscreteMarginal::new(b)?, CostMatrix::new(rows, cols, entries)?))
}

pub fn transport_csv(a: &DiscreteMarginal, b: &DiscreteMarginal, cost: &CostMatrix) -> Result<Vec<u8>, IoError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut first = vec!["a\\b".to_string()];
    first.extend(b.masses.iter().map(f64::to_string));
    w.write_record(&first)?;
    for (i, m) in a.masses.iter().enumerate() {
        let mut rec = vec![m.to_string()];
        rec.extend(cost.row(i).iter().map(f64::to_string));
        w.write_record(&rec)?;
    }
    w.into_inner().map_err(|e| IoError::Io(e.into_error()))
}

pub fn flows_csv(plan: &TransportPlan) -> Result<Vec<u8>, IoError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in plan.flow_rows() {
        w.write_record(row.iter().map(f64::to_string))?;
    }
    w.into_inner().map_err(|e| IoError::Io(e.into_error()))
}

pub fn read_flows_csv(bytes: &[u8]) -> Result<Vec<Vec<f64>>, IoError> {
    let mut r = csv::ReaderBuilder::new().has_headers(false).from_reader(bytes);
    let mut out = Vec::new();
    for rec in r.records() {
        let row = rec?
            .iter()
            .map(|s| s.parse::<f64>().map_err(|_| format_err(format!("not a number: {s:?}"))))
            .collect::<Result<Vec<_>, _>>()?;
        out.push(row);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dists::{ClaimDistribution, OffspringDistribution, ResourceModel};
    use crate::sim::{monte_carlo, SimOptions};
    use crate::society::SubPopulationSpec;
    use crate::transport::{northwest_plan, Balance};

    #[test]
    fn trace_round_trips_exactly() {
        let specs = vec![
            SubPopulationSpec::new(
                "home",
                OffspringDistribution::poisson(2.0).unwrap(),
                ResourceModel::gamma(2.0, 0.45).unwrap(),
                ClaimDistribution::uniform(0.0, 1.0).unwrap(),
            ),
            SubPopulationSpec::new(
                "immigrant",
                OffspringDistribution::poisson(3.0).unwrap(),
                ResourceModel::deterministic(0.5).unwrap(),
                ClaimDistribution::exponential(1.0).unwrap(),
            ),
        ];
        let opts = SimOptions { horizon: 12, ..Default::default() };
        let mc = monte_carlo(&specs, &[30, 30], &opts, 3, 11).unwrap();
        let bytes = trace_csv(&mc.trajectories, 2).unwrap();
        let text = std::str::from_utf8(&bytes).unwrap();
        assert!(text.starts_with(
            "run_id,t,gamma_h,gamma_i,descendants_h,descendants_i,resources_total,tau_t,alpha_t,served_h,served_i\n"
        ));
        let rows = read_trace_csv(&bytes).unwrap();
        assert_eq!(rows, trace_rows(&mc.trajectories));
        assert!(rows.windows(2).all(|w| (w[0].run_id, w[0].t) < (w[1].run_id, w[1].t)));
    }

    #[test]
    fn header_for_three_populations() {
        assert_eq!(trace_header(3)[2..5], ["gamma_0", "gamma_1", "gamma_2"]);
        assert!(read_trace_csv(b"run_id,t\n").is_err());
    }

    #[test]
    fn transport_csv_round_trip() {
        let text = "a\\b,1,2\n2,0,1\n1,1,0\n";
        let (a, b, c) = read_transport_csv(text).unwrap();
        assert_eq!(a.masses, vec![2.0, 1.0]);
        assert_eq!(b.masses, vec![1.0, 2.0]);
        assert_eq!(c.get(1, 0), 1.0);
        assert_eq!(String::from_utf8(transport_csv(&a, &b, &c).unwrap()).unwrap(), text);
        let plan = northwest_plan(&a, &b, Balance::Strict).unwrap();
        let flows = flows_csv(&plan).unwrap();
        assert_eq!(std::str::from_utf8(&flows).unwrap(), "1,1\n0,1\n");
        assert_eq!(read_flows_csv(&flows).unwrap(), plan.flow_rows());
        assert!(read_transport_csv("x,1\n1,zz\n").is_err());
        assert!(read_transport_csv("x,1,2\n1,0\n").is_err());
    }

    #[test]
    fn atomic_write_replaces_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("out.json");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), b"two");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
