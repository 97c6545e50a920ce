//! CSV and JSON serialization of sets, telemetry and run summaries.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::control::Mode;
use crate::error::{Error, Result};
use crate::reachability::{ControllableSets, DiscretizationGrid, Interval, VelocityProfile};
use crate::sim::{SimResult, TerminalStatus};

/// One row of `sets.csv`. Empty sets are written with blank bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SetRow {
    pub stage: usize,
    pub s: f64,
    #[serde(rename = "K_lo")]
    pub k_lo: Option<f64>,
    #[serde(rename = "K_hi")]
    pub k_hi: Option<f64>,
}

pub fn set_rows(sets: &ControllableSets, grid: &DiscretizationGrid) -> Vec<SetRow> {
    sets.sets
        .iter()
        .enumerate()
        .map(|(i, k)| SetRow { stage: i, s: grid.s(i), k_lo: k.map(|k| k.lo), k_hi: k.map(|k| k.hi) })
        .collect()
}

pub fn write_sets_csv<W: Write>(out: W, sets: &ControllableSets, grid: &DiscretizationGrid) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in set_rows(sets, grid) {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads `sets.csv` back into the grid points and sets.
pub fn read_sets_csv<R: Read>(input: R) -> Result<(Vec<f64>, ControllableSets)> {
    let mut r = csv::Reader::from_reader(input);
    let mut s = Vec::new();
    let mut sets = Vec::new();
    for (i, row) in r.deserialize::<SetRow>().enumerate() {
        let row = row?;
        if row.stage != i {
            return Err(Error::InvalidConfig(format!("sets.csv: expected stage {i}, found {}", row.stage)));
        }
        s.push(row.s);
        sets.push(match (row.k_lo, row.k_hi) {
            (Some(lo), Some(hi)) => Some(Interval { lo, hi }),
            _ => None,
        });
    }
    let first_empty = sets.iter().rposition(Option::is_none);
    Ok((s, ControllableSets { sets, first_empty }))
}

/// Sets for several radii in one tidy table: `radius, stage, s, K_lo, K_hi`.
pub fn write_sets_plot_csv<W: Write>(out: W, sets: &[(f64, ControllableSets)], grid: &DiscretizationGrid) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["radius", "stage", "s", "K_lo", "K_hi"])?;
    let opt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
    for (r, k) in sets {
        for row in set_rows(k, grid) {
            w.write_record([r.to_string(), row.stage.to_string(), row.s.to_string(), opt(row.k_lo), opt(row.k_hi)])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Squared-velocity profile: `stage, s, x`.
pub fn write_profile_csv<W: Write>(out: W, profile: &VelocityProfile, grid: &DiscretizationGrid) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["stage", "s", "x"])?;
    for (i, x) in profile.x.iter().enumerate() {
        w.write_record([i.to_string(), grid.s(i).to_string(), x.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Per-step telemetry: `t, s, x, u, tau1..taun, err_norm, infeasible_flag`.
pub fn write_telemetry_csv<W: Write>(out: W, result: &SimResult) -> Result<()> {
    let n = result.samples.first().map_or(0, |s| s.tau.len());
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["t".to_string(), "s".into(), "x".into(), "u".into()];
    header.extend((1..=n).map(|j| format!("tau{j}")));
    header.extend(["err_norm".to_string(), "infeasible_flag".into()]);
    w.write_record(&header)?;
    for smp in &result.samples {
        let mut rec = vec![smp.t.to_string(), smp.s.to_string(), smp.x.to_string(), smp.u.to_string()];
        rec.extend(smp.tau.iter().map(f64::to_string));
        rec.push(smp.err_norm.to_string());
        rec.push(u8::from(smp.infeasible).to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// One telemetry row as read back from CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct TelemetryRow {
    pub t: f64,
    pub s: f64,
    pub x: f64,
    pub u: f64,
    pub tau: Vec<f64>,
    pub err_norm: f64,
    pub infeasible: bool,
}

pub fn read_telemetry_csv<R: Read>(input: R) -> Result<Vec<TelemetryRow>> {
    let mut r = csv::Reader::from_reader(input);
    let width = r.headers()?.len();
    if width < 6 {
        return Err(Error::InvalidConfig("telemetry needs at least 6 columns".into()));
    }
    let n = width - 6;
    let num = |rec: &csv::StringRecord, i: usize| -> Result<f64> {
        rec[i].parse().map_err(|_| Error::InvalidConfig(format!("bad number {:?}", &rec[i])))
    };
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        rows.push(TelemetryRow {
            t: num(&rec, 0)?,
            s: num(&rec, 1)?,
            x: num(&rec, 2)?,
            u: num(&rec, 3)?,
            tau: (0..n).map(|j| num(&rec, 4 + j)).collect::<Result<_>>()?,
            err_norm: num(&rec, 4 + n)?,
            infeasible: &rec[5 + n] == "1",
        });
    }
    Ok(rows)
}

/// JSON summary of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub mode: Mode,
    pub duration: f64,
    pub max_err_norm: f64,
    pub infeasible_count: usize,
    pub excursion_count: usize,
    pub status: TerminalStatus,
}

impl RunSummary {
    pub fn new(mode: Mode, result: &SimResult) -> Self {
        Self {
            mode,
            duration: result.duration,
            max_err_norm: result.max_err_norm(),
            infeasible_count: result.infeasible_count(),
            excursion_count: result.excursion_count(),
            status: result.status,
        }
    }
}

pub fn write_summary_json<W: Write>(out: W, summary: &RunSummary) -> Result<()> {
    serde_json::to_writer_pretty(out, summary)?;
    Ok(())
}

pub fn read_summary_json<R: Read>(input: R) -> Result<RunSummary> {
    Ok(serde_json::from_reader(input)?)
}

/// Comparison table: one row per controller plus the nominal optimum.
pub fn write_compare_csv<W: Write>(out: W, rows: &[RunSummary], nominal_duration: f64) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["controller", "max_err_norm", "duration", "infeasible_count", "status"])?;
    for r in rows {
        w.write_record([
            r.mode.name().to_string(),
            r.max_err_norm.to_string(),
            r.duration.to_string(),
            r.infeasible_count.to_string(),
            serde_json::to_value(r.status)?.as_str().unwrap_or_default().to_string(),
        ])?;
    }
    w.write_record(["nominal", "", &nominal_duration.to_string(), "", ""])?;
    w.flush()?;
    Ok(())
}

/// Rows of a comparison table as read back: `(controller, max_err, duration)`,
/// with the nominal row carrying no error.
pub fn read_compare_csv<R: Read>(input: R) -> Result<Vec<(String, Option<f64>, f64)>> {
    let mut r = csv::Reader::from_reader(input);
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let err = if rec[1].is_empty() { None } else { Some(rec[1].parse().map_err(|_| Error::InvalidConfig("bad error".into()))?) };
        let dur = rec[2].parse().map_err(|_| Error::InvalidConfig("bad duration".into()))?;
        rows.push((rec[0].to_string(), err, dur));
    }
    Ok(rows)
}
