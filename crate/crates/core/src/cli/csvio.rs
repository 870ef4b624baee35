//! Plot-ready CSV files. Floats use 17 significant digits so that every
//! value reads back to the identical `f64`.

use std::io::{Read, Write};

use nalgebra::Vector4;

use crate::model::TrajectoryPoint;
use crate::sim::SimLog;

pub const LOG_HEADER: [&str; 12] = [
    "t",
    "beta_t",
    "psidot_t",
    "edot",
    "e",
    "delta_t",
    "z",
    "triggered",
    "xi1",
    "xi2",
    "xi3",
    "xi4",
];
pub const TRAJECTORY_HEADER: [&str; 4] = ["X", "Y", "X_ref", "Y_ref"];
pub const SUMMARY_HEADER: [&str; 6] = [
    "strategy",
    "triggers",
    "min_iet",
    "mean_iet",
    "tau",
    "savings_pct",
];

pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

fn writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out)
}

pub fn write_log<W: Write>(out: W, log: &SimLog) -> csv::Result<()> {
    let mut w = writer(out);
    w.write_record(LOG_HEADER)?;
    for i in 0..log.len() {
        let x = &log.states[i];
        let xi = &log.disturbances[i];
        let flag = if log.triggered[i] { "1" } else { "0" };
        let mut row: Vec<String> = [
            log.times[i],
            x[0],
            x[1],
            x[2],
            x[3],
            log.inputs[i],
            log.clock[i],
        ]
        .iter()
        .map(|&v| fmt_float(v))
        .collect();
        row.push(flag.to_string());
        row.extend(xi.iter().map(|&v| fmt_float(v)));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, thiserror::Error)]
pub enum ReadLogError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("line {line}: {reason}")]
    Malformed { line: u64, reason: String },
}

pub fn read_log<R: Read>(input: R) -> Result<SimLog, ReadLogError> {
    let mut reader = csv::Reader::from_reader(input);
    let header = reader.headers()?.clone();
    if header.iter().ne(LOG_HEADER.iter().copied()) {
        return Err(ReadLogError::Malformed {
            line: 1,
            reason: format!("unexpected header {header:?}"),
        });
    }
    let mut log = SimLog::default();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let num = |i: usize| -> Result<f64, ReadLogError> {
            record[i]
                .parse::<f64>()
                .map_err(|e| ReadLogError::Malformed {
                    line,
                    reason: format!("column {}: {e}", LOG_HEADER[i]),
                })
        };
        let t = num(0)?;
        log.times.push(t);
        log.states
            .push(Vector4::new(num(1)?, num(2)?, num(3)?, num(4)?));
        log.inputs.push(num(5)?);
        log.clock.push(num(6)?);
        let fired = match &record[7] {
            "1" => true,
            "0" => false,
            other => {
                return Err(ReadLogError::Malformed {
                    line,
                    reason: format!("triggered flag `{other}`"),
                })
            }
        };
        log.triggered.push(fired);
        if fired {
            log.triggers.push(t);
        }
        log.disturbances
            .push(Vector4::new(num(8)?, num(9)?, num(10)?, num(11)?));
    }
    Ok(log)
}

pub fn write_trajectory<W: Write>(out: W, points: &[TrajectoryPoint]) -> csv::Result<()> {
    let mut w = writer(out);
    w.write_record(TRAJECTORY_HEADER)?;
    for p in points {
        w.write_record([p.x, p.y, p.x_ref, p.y_ref].map(fmt_float))?;
    }
    w.flush()?;
    Ok(())
}

/// One row of the triggering comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub strategy: String,
    pub triggers: usize,
    pub min_iet: Option<f64>,
    pub mean_iet: Option<f64>,
    /// Guaranteed minimum inter-event time (the period for periodic sampling).
    pub tau: f64,
    pub savings_pct: f64,
}

pub fn write_summary<W: Write>(out: W, rows: &[SummaryRow]) -> csv::Result<()> {
    let mut w = writer(out);
    w.write_record(SUMMARY_HEADER)?;
    let opt = |v: Option<f64>| v.map(fmt_float).unwrap_or_default();
    for r in rows {
        w.write_record([
            r.strategy.clone(),
            r.triggers.to_string(),
            opt(r.min_iet),
            opt(r.mean_iet),
            fmt_float(r.tau),
            fmt_float(r.savings_pct),
        ])?;
    }
    w.flush()?;
    Ok(())
}
