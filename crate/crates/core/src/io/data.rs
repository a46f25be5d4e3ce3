//! CSV ingestion and export of time series.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use chrono::{DateTime, NaiveDateTime};
use serde::{Deserialize, Serialize};

use super::IoError;
use crate::thermal::{Exogenous, TimeSeriesDataset};

/// Parsing options for [`load_csv`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CsvOptions {
    /// Sampling interval in hours. Required when the file has no `time`
    /// column; otherwise it must agree with the timestamps.
    pub dt_hint: Option<f64>,
    /// Temperatures (`y`, `ta`) are in °F.
    pub fahrenheit: bool,
    /// `phi_h` is an on/off signal scaled by the `Phi_h` parameter.
    pub binary_hvac: bool,
    /// Keep only the first `take` rows.
    pub take: Option<usize>,
}

pub fn fahrenheit_to_celsius(f: f64) -> f64 {
    (f - 32.0) * 5.0 / 9.0
}

/// Epoch seconds from ISO-8601 text or a number.
pub fn parse_time(text: &str) -> Option<f64> {
    let t = text.trim();
    if let Ok(v) = t.parse::<f64>() {
        return v.is_finite().then_some(v);
    }
    if let Ok(dt) = DateTime::parse_from_rfc3339(t) {
        return Some(dt.timestamp() as f64 + dt.timestamp_subsec_nanos() as f64 * 1e-9);
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M"] {
        if let Ok(dt) = NaiveDateTime::parse_from_str(t, fmt) {
            let utc = dt.and_utc();
            return Some(utc.timestamp() as f64 + utc.timestamp_subsec_nanos() as f64 * 1e-9);
        }
    }
    None
}

struct Table {
    columns: HashMap<String, usize>,
    rows: Vec<csv::StringRecord>,
}

impl Table {
    fn read<R: Read>(reader: R) -> Result<Self, IoError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let columns = rdr
            .headers()?
            .iter()
            .enumerate()
            .map(|(i, h)| (h.to_ascii_lowercase(), i))
            .collect();
        let rows = rdr.records().collect::<Result<Vec<_>, _>>()?;
        Ok(Table { columns, rows })
    }

    fn has(&self, name: &str) -> bool {
        self.columns.contains_key(name)
    }

    fn numbers(&self, name: &str) -> Result<Vec<f64>, IoError> {
        let idx = *self
            .columns
            .get(name)
            .ok_or_else(|| IoError::MissingColumn(name.to_string()))?;
        self.rows
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let field = r.get(idx).unwrap_or("");
                field
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| IoError::Parse {
                        row: i + 2,
                        column: name.to_string(),
                        message: format!("`{field}` is not a finite number"),
                    })
            })
            .collect()
    }

    fn times(&self) -> Result<Vec<f64>, IoError> {
        let idx = self.columns["time"];
        self.rows
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let field = r.get(idx).unwrap_or("");
                parse_time(field).ok_or_else(|| IoError::Parse {
                    row: i + 2,
                    column: "time".into(),
                    message: format!("`{field}` is neither ISO-8601 nor epoch seconds"),
                })
            })
            .collect()
    }
}

fn check_spacing(times: &[f64]) -> Result<f64, IoError> {
    if times.len() < 2 {
        return Err(IoError::Parse {
            row: times.len() + 1,
            column: "time".into(),
            message: "need at least 2 rows".into(),
        });
    }
    let step = times[1] - times[0];
    for (i, w) in times.windows(2).enumerate() {
        let s = w[1] - w[0];
        if !(step > 0.0) || (s - step).abs() > 1e-6 * step {
            return Err(IoError::NonUniformSampling {
                row: i + 3,
                step: s,
                expected: step,
            });
        }
    }
    Ok(step)
}

/// Reads columns `time,y,ta,phi_h,phi_s` (in any order, extra columns
/// ignored). Rows must be uniformly spaced.
pub fn read_dataset<R: Read>(reader: R, options: &CsvOptions) -> Result<TimeSeriesDataset, IoError> {
    let table = Table::read(reader)?;
    for col in ["y", "ta", "phi_h", "phi_s"] {
        if !table.has(col) {
            return Err(IoError::MissingColumn(col.into()));
        }
    }
    let mut y = table.numbers("y")?;
    let mut ta = table.numbers("ta")?;
    let phi_h = table.numbers("phi_h")?;
    let phi_s = table.numbers("phi_s")?;
    if options.fahrenheit {
        y.iter_mut().chain(ta.iter_mut()).for_each(|v| *v = fahrenheit_to_celsius(*v));
    }
    let timestamps = if table.has("time") {
        let times = table.times()?;
        let step = check_spacing(&times)?;
        if let Some(dt) = options.dt_hint {
            if (step / 3600.0 - dt).abs() > 1e-9 * dt.max(1.0) {
                return Err(IoError::StepMismatch {
                    file_hours: step / 3600.0,
                    requested: dt,
                });
            }
        }
        times
    } else {
        let dt = options.dt_hint.ok_or_else(|| IoError::MissingColumn("time".into()))?;
        (0..y.len()).map(|i| i as f64 * dt * 3600.0).collect()
    };
    let exo = Exogenous::new(ta, phi_h, phi_s)?;
    let data = TimeSeriesDataset::new(timestamps, y, exo, options.binary_hvac)?;
    match options.take {
        Some(n) => Ok(data.take(n)?),
        None => Ok(data),
    }
}

pub fn load_csv(path: &Path, options: &CsvOptions) -> Result<TimeSeriesDataset, IoError> {
    let file = std::fs::File::open(path).map_err(|e| IoError::File(path.display().to_string(), e))?;
    read_dataset(file, options)
}

/// Future drivers: columns `ta` and `phi_s`, optionally `phi_h`. Missing
/// `phi_h` is returned as `None` so the caller can hold the last HVAC mode.
pub fn read_drivers<R: Read>(reader: R, fahrenheit: bool) -> Result<(Vec<f64>, Option<Vec<f64>>, Vec<f64>), IoError> {
    let table = Table::read(reader)?;
    let mut ta = table.numbers("ta")?;
    if fahrenheit {
        ta.iter_mut().for_each(|v| *v = fahrenheit_to_celsius(*v));
    }
    let phi_s = table.numbers("phi_s")?;
    let phi_h = if table.has("phi_h") { Some(table.numbers("phi_h")?) } else { None };
    Ok((ta, phi_h, phi_s))
}

/// Writes a dataset with the columns `load_csv` reads.
pub fn write_dataset<W: Write>(data: &TimeSeriesDataset, w: W) -> Result<(), IoError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["time", "y", "ta", "phi_h", "phi_s"])?;
    for n in 0..data.len() {
        out.serialize((
            data.timestamps[n],
            data.y[n],
            data.exo.ta[n],
            data.exo.phi_h[n],
            data.exo.phi_s[n],
        ))?;
    }
    out.flush().map_err(csv::Error::from)?;
    Ok(())
}
