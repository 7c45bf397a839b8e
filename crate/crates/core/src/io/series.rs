//! Load/PV series files: CSV with the fixed header `timestamp,load_kw,pv_kw`,
//! ISO-8601 local timestamps, one row per grid step.

use std::path::Path;

use chrono::{NaiveDateTime, TimeDelta};
use thiserror::Error;

use crate::timegrid::TimeGrid;
use crate::{Error, Result};

pub const SERIES_HEADER: [&str; 3] = ["timestamp", "load_kw", "pv_kw"];
const TIMESTAMP_FORMAT: &str = "%Y-%m-%dT%H:%M:%S";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SeriesError {
    #[error("cannot read: {0}")]
    Unreadable(String),
    #[error("header must be `timestamp,load_kw,pv_kw`, found `{0}`")]
    Header(String),
    #[error("line {line}: {msg}")]
    Malformed { line: usize, msg: String },
    #[error("line {line}: {column} = {value} is not allowed ({reason})")]
    InvalidValue {
        line: usize,
        column: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("series starts at {found}, grid starts at {expected}")]
    Start {
        expected: NaiveDateTime,
        found: NaiveDateTime,
    },
    #[error("line {line}: missing row for {missing}")]
    Gap { line: usize, missing: NaiveDateTime },
    #[error("line {line}: spacing of {found_minutes} min, grid step is {expected_minutes} min")]
    Spacing {
        line: usize,
        found_minutes: i64,
        expected_minutes: i64,
    },
    #[error("series has {found} rows, grid has {expected} steps")]
    Length { expected: usize, found: usize },
}

/// Validated load and PV aligned with a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub load_kw: Vec<f64>,
    pub pv_kw: Vec<f64>,
}

impl Series {
    pub fn len(&self) -> usize {
        self.load_kw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.load_kw.is_empty()
    }
}

fn parse_timestamp(s: &str) -> Option<NaiveDateTime> {
    let s = s.trim();
    NaiveDateTime::parse_from_str(s, TIMESTAMP_FORMAT)
        .or_else(|_| NaiveDateTime::parse_from_str(s, "%Y-%m-%dT%H:%M"))
        .or_else(|_| NaiveDateTime::parse_from_str(s, "%Y-%m-%d %H:%M:%S"))
        .or_else(|_| NaiveDateTime::parse_from_str(s, "%Y-%m-%d %H:%M"))
        .ok()
}

/// Read a series file and check it against `grid`.
pub fn load_timeseries(path: &Path, grid: &TimeGrid) -> Result<Series> {
    let data_err = |source| Error::Data {
        path: path.to_path_buf(),
        source,
    };
    let file = std::fs::File::open(path).map_err(|e| data_err(SeriesError::Unreadable(e.to_string())))?;
    read_timeseries(file, grid).map_err(data_err)
}

/// [`load_timeseries`] over any reader.
pub fn read_timeseries<R: std::io::Read>(reader: R, grid: &TimeGrid) -> std::result::Result<Series, SeriesError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| SeriesError::Malformed {
            line: 1,
            msg: e.to_string(),
        })?
        .clone();
    if header.iter().ne(SERIES_HEADER) {
        return Err(SeriesError::Header(header.iter().collect::<Vec<_>>().join(",")));
    }

    let step = TimeDelta::minutes(i64::from(grid.step_minutes()));
    let mut out = Series {
        load_kw: Vec::with_capacity(grid.n_steps()),
        pv_kw: Vec::with_capacity(grid.n_steps()),
    };
    let mut prev: Option<NaiveDateTime> = None;
    for (k, rec) in rdr.records().enumerate() {
        let line = k + 2;
        let rec = rec.map_err(|e| SeriesError::Malformed {
            line,
            msg: e.to_string(),
        })?;
        let ts = parse_timestamp(&rec[0]).ok_or_else(|| SeriesError::Malformed {
            line,
            msg: format!("bad timestamp `{}`", &rec[0]),
        })?;
        let number = |i: usize, column: &'static str| {
            rec[i].parse::<f64>().map_err(|_| SeriesError::Malformed {
                line,
                msg: format!("bad {column} `{}`", &rec[i]),
            })
        };
        let load = number(1, "load_kw")?;
        let pv = number(2, "pv_kw")?;
        for (column, value) in [("load_kw", load), ("pv_kw", pv)] {
            if !value.is_finite() {
                return Err(SeriesError::InvalidValue {
                    line,
                    column,
                    value,
                    reason: "not finite",
                });
            }
            if value < 0.0 {
                return Err(SeriesError::InvalidValue {
                    line,
                    column,
                    value,
                    reason: "negative",
                });
            }
        }

        match prev {
            None => {
                let expected = grid.timestamp(0);
                if ts != expected {
                    return Err(SeriesError::Start { expected, found: ts });
                }
            }
            Some(p) => {
                let delta = ts - p;
                if delta != step {
                    // a first spacing off the step means the whole file has
                    // another resolution; later multiples of it are holes
                    let whole = delta > step && (delta.num_seconds() % step.num_seconds() == 0);
                    if whole && out.len() > 1 {
                        return Err(SeriesError::Gap {
                            line,
                            missing: p + step,
                        });
                    }
                    return Err(SeriesError::Spacing {
                        line,
                        found_minutes: delta.num_minutes(),
                        expected_minutes: step.num_minutes(),
                    });
                }
            }
        }
        prev = Some(ts);
        out.load_kw.push(load);
        out.pv_kw.push(pv);
    }
    if out.len() != grid.n_steps() {
        return Err(SeriesError::Length {
            expected: grid.n_steps(),
            found: out.len(),
        });
    }
    Ok(out)
}

/// Write a series file for `grid`. Values use the shortest representation
/// that parses back to the same `f64`.
pub fn write_timeseries(path: &Path, grid: &TimeGrid, load_kw: &[f64], pv_kw: &[f64]) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_timeseries_to(file, grid, load_kw, pv_kw)
}

pub fn write_timeseries_to<W: std::io::Write>(
    writer: W,
    grid: &TimeGrid,
    load_kw: &[f64],
    pv_kw: &[f64],
) -> Result<()> {
    if load_kw.len() != grid.n_steps() || pv_kw.len() != grid.n_steps() {
        return Err(Error::Config(format!(
            "series of {}/{} values for a grid of {} steps",
            load_kw.len(),
            pv_kw.len(),
            grid.n_steps()
        )));
    }
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(SERIES_HEADER)?;
    for t in 0..grid.n_steps() {
        w.write_record([
            grid.timestamp(t).format(TIMESTAMP_FORMAT).to_string(),
            load_kw[t].to_string(),
            pv_kw[t].to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;

    fn day_grid() -> TimeGrid {
        TimeGrid::new(NaiveDate::from_ymd_opt(2019, 3, 1).unwrap(), 1, 15).unwrap()
    }

    fn csv_for(grid: &TimeGrid, skip: Option<usize>, every: usize) -> String {
        let mut s = String::from("timestamp,load_kw,pv_kw\n");
        for t in (0..grid.n_steps()).step_by(every) {
            if Some(t) == skip {
                continue;
            }
            s += &format!(
                "{},{},{}\n",
                grid.timestamp(t).format(TIMESTAMP_FORMAT),
                100.0 + t as f64,
                0.5
            );
        }
        s
    }

    #[test]
    fn accepts_a_full_day() {
        let g = day_grid();
        let s = read_timeseries(csv_for(&g, None, 1).as_bytes(), &g).unwrap();
        assert_eq!(s.len(), 96);
        assert_eq!(s.load_kw[95], 195.0);
    }

    #[test]
    fn missing_row_is_a_gap_naming_it() {
        let g = day_grid();
        let err = read_timeseries(csv_for(&g, Some(53), 1).as_bytes(), &g).unwrap_err();
        let missing = NaiveDate::from_ymd_opt(2019, 3, 1)
            .unwrap()
            .and_hms_opt(13, 15, 0)
            .unwrap();
        assert_eq!(err, SeriesError::Gap { line: 55, missing });
        assert!(err.to_string().contains("2019-03-01 13:15:00"));
    }

    #[test]
    fn coarser_file_is_a_spacing_error() {
        let g = day_grid();
        let err = read_timeseries(csv_for(&g, None, 2).as_bytes(), &g).unwrap_err();
        assert!(matches!(
            err,
            SeriesError::Spacing {
                found_minutes: 30,
                expected_minutes: 15,
                ..
            }
        ));
    }

    #[test]
    fn other_rejections() {
        let g = day_grid();
        let full = csv_for(&g, None, 1);
        let short: String = full.lines().take(50).map(|l| format!("{l}\n")).collect();
        assert_eq!(
            read_timeseries(short.as_bytes(), &g).unwrap_err(),
            SeriesError::Length {
                expected: 96,
                found: 49
            }
        );
        let neg = full.replacen("100,0.5", "-1,0.5", 1);
        assert!(matches!(
            read_timeseries(neg.as_bytes(), &g).unwrap_err(),
            SeriesError::InvalidValue { column: "load_kw", .. }
        ));
        let nan = full.replacen("100,0.5", "100,NaN", 1);
        assert!(matches!(
            read_timeseries(nan.as_bytes(), &g).unwrap_err(),
            SeriesError::InvalidValue { column: "pv_kw", .. }
        ));
        let bad = full.replacen("load_kw", "load", 1);
        assert!(matches!(
            read_timeseries(bad.as_bytes(), &g).unwrap_err(),
            SeriesError::Header(_)
        ));
        let late = full.replacen("2019-03-01T00:00:00", "2019-03-01T00:15:00", 1);
        assert!(matches!(
            read_timeseries(late.as_bytes(), &g).unwrap_err(),
            SeriesError::Start { .. }
        ));
        let garbage = full.replacen("101,0.5", "abc,0.5", 1);
        assert!(matches!(
            read_timeseries(garbage.as_bytes(), &g).unwrap_err(),
            SeriesError::Malformed { line: 3, .. }
        ));
    }

    #[test]
    fn round_trip_is_exact() {
        let g = day_grid();
        let load: Vec<f64> = (0..96).map(|t| 1.0 / (t as f64 + 3.0) * 1234.5678).collect();
        let pv: Vec<f64> = (0..96).map(|t| (t as f64 * 0.1).sin().abs() * 1e-7).collect();
        let mut buf = Vec::new();
        write_timeseries_to(&mut buf, &g, &load, &pv).unwrap();
        let back = read_timeseries(buf.as_slice(), &g).unwrap();
        assert_eq!(back.load_kw, load);
        assert_eq!(back.pv_kw, pv);
    }
}
