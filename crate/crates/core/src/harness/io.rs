//! Report files: control schedules, study tables, the run summary log.
//!
//! Every run directory gets `config.toml` holding the fully resolved configuration,
//! so a run can be repeated from its own output.

use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::dynamics::{format_time, ControlSchedule, Grid};
use crate::error::{Error, Result};
use crate::harness::config::ExperimentConfig;
use crate::harness::experiments::{BenchmarkReport, ErrorStudyReport};

pub const CONFIG_FILE: &str = "config.toml";
pub const SUMMARY_FILE: &str = "summary.jsonl";

/// Write `u` as `t,driver,coord0..` rows, one per step and driver.
pub fn write_control_csv<W: Write>(u: &ControlSchedule, grid: &Grid, mut w: W) -> Result<()> {
    write!(w, "t,driver")?;
    for c in 0..u.dim {
        write!(w, ",coord{c}")?;
    }
    writeln!(w)?;
    for n in 0..u.n_steps() {
        let row = u.at(n);
        let t = format_time(grid.time(n));
        for j in 0..u.n_drivers {
            write!(w, "{t},{j}")?;
            for c in &row[j * u.dim..(j + 1) * u.dim] {
                write!(w, ",{c}")?;
            }
            writeln!(w)?;
        }
    }
    Ok(())
}

/// Read a control CSV written by [`write_control_csv`].
pub fn read_control_csv<R: Read>(r: R, n_drivers: usize, dim: usize) -> Result<ControlSchedule> {
    let bad = |line: u64, msg: &str| Error::Config(format!("control csv line {line}: {msg}"));
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let header = rdr.headers().map_err(|e| bad(1, &e.to_string()))?;
    if header.len() != 2 + dim || &header[0] != "t" || &header[1] != "driver" {
        return Err(bad(1, &format!("expected header t,driver and {dim} coordinates")));
    }
    let mut values = Vec::new();
    let mut rows = 0usize;
    for rec in rdr.records() {
        let rec = rec.map_err(|e| bad(e.position().map_or(0, |p| p.line()), &e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        let driver: usize = rec[1].parse().map_err(|_| bad(line, "driver index is not an integer"))?;
        if driver != rows % n_drivers {
            return Err(bad(line, &format!("expected driver {}, found {driver}", rows % n_drivers)));
        }
        for f in rec.iter().skip(2) {
            values.push(f.parse::<f64>().map_err(|_| bad(line, "coordinate is not a number"))?);
        }
        rows += 1;
    }
    if rows == 0 || rows % n_drivers != 0 {
        return Err(bad(rows as u64 + 1, &format!("row count {rows} is not a positive multiple of {n_drivers} drivers")));
    }
    Ok(ControlSchedule {
        n_drivers,
        dim,
        values,
    })
}

/// `p,t,pos_median,pos_q25,pos_q75,pos_lo,pos_hi,vel_median,...` with `lo`/`hi` the
/// 2.5% and 97.5% percentiles.
pub fn write_error_study_csv<W: Write>(report: &ErrorStudyReport, mut w: W) -> Result<()> {
    writeln!(
        w,
        "p,t,pos_median,pos_q25,pos_q75,pos_lo,pos_hi,vel_median,vel_q25,vel_q75,vel_lo,vel_hi"
    )?;
    for r in &report.rows {
        let (x, v) = (&r.position, &r.velocity);
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            r.batch_size,
            format_time(r.t),
            x.median,
            x.q25,
            x.q75,
            x.lo,
            x.hi,
            v.median,
            v.q25,
            v.q75,
            v.lo,
            v.hi
        )?;
    }
    Ok(())
}

/// Table-style benchmark rows; ratios are relative to the `P=2` row.
pub fn write_benchmark_csv<W: Write>(report: &BenchmarkReport, mut w: W) -> Result<()> {
    writeln!(w, "mode,mean_ms,median_ms,time_ratio,interactions,count_ratio")?;
    for r in &report.rows {
        writeln!(
            w,
            "{},{:.6},{:.6},{:.6},{},{:.6}",
            r.label, r.mean_ms, r.median_ms, r.time_ratio, r.interactions, r.count_ratio
        )?;
    }
    Ok(())
}

/// An output directory for one run.
#[derive(Debug, Clone)]
pub struct RunDir {
    pub path: PathBuf,
}

impl RunDir {
    /// Create the directory and write the resolved configuration into it.
    pub fn create(path: &Path, config: &ExperimentConfig) -> Result<Self> {
        fs::create_dir_all(path)?;
        fs::write(path.join(CONFIG_FILE), config.to_toml_string())?;
        Ok(Self { path: path.to_path_buf() })
    }

    pub fn file(&self, name: &str) -> Result<BufWriter<File>> {
        Ok(BufWriter::new(File::create(self.path.join(name))?))
    }

    /// Write a file through `f`, flushing at the end.
    pub fn write_with<F>(&self, name: &str, f: F) -> Result<()>
    where
        F: FnOnce(&mut BufWriter<File>) -> Result<()>,
    {
        let mut w = self.file(name)?;
        f(&mut w)?;
        w.flush()?;
        Ok(())
    }

    /// Append one JSON record to the run's summary log.
    pub fn append_summary<T: Serialize>(&self, record: &T) -> Result<()> {
        let mut f = OpenOptions::new().create(true).append(true).open(self.path.join(SUMMARY_FILE))?;
        let line = serde_json::to_string(record).map_err(|e| Error::Io(std::io::Error::other(e)))?;
        writeln!(f, "{line}")?;
        Ok(())
    }
}
