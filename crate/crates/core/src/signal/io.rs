//! Signal CSV: header `t_s,<channel>[,<channel>...]`, one sample per row,
//! strictly increasing `t_s`. The rate is inferred from the median time step;
//! every step must lie within 1 % of it.

use std::fmt::Write as _;

use super::TimeSeries;
use crate::error::{Error, Result};

const RATE_TOLERANCE: f64 = 0.01;

#[derive(Debug, Clone, PartialEq)]
pub struct SignalTable {
    pub times: Vec<f64>,
    pub channels: Vec<String>,
    /// Column-major: one vector per channel.
    pub columns: Vec<Vec<f64>>,
}

impl SignalTable {
    /// Extracts one channel as a uniformly sampled series. When `fs` is `None`
    /// the rate is inferred from the time column.
    pub fn series(&self, channel: Option<&str>, fs: Option<f64>) -> Result<TimeSeries> {
        let idx = match channel {
            Some(name) => self
                .channels
                .iter()
                .position(|c| c == name)
                .ok_or_else(|| Error::InvalidParameter(format!("no channel named `{name}`")))?,
            None => 0,
        };
        let fs = match fs {
            Some(fs) => fs,
            None => self.inferred_rate()?,
        };
        Ok(TimeSeries::new(fs, self.columns[idx].clone())?
            .with_t0(self.times[0])
            .with_label(self.channels[idx].clone(), ""))
    }

    pub fn inferred_rate(&self) -> Result<f64> {
        if self.times.len() < 2 {
            return Err(Error::InsufficientData(
                "need at least two rows to infer the sampling rate".into(),
            ));
        }
        let mut dt: Vec<f64> = self.times.windows(2).map(|w| w[1] - w[0]).collect();
        let steps = dt.clone();
        dt.sort_by(f64::total_cmp);
        let median = dt[dt.len() / 2];
        for (i, step) in steps.iter().enumerate() {
            if ((step - median) / median).abs() > RATE_TOLERANCE {
                return Err(Error::Parse {
                    // header is line 1, first data row line 2
                    line: i + 3,
                    message: format!("irregular time step {step} s (median {median} s)"),
                });
            }
        }
        Ok(1.0 / median)
    }
}

pub fn parse_signal_csv(text: &str) -> Result<SignalTable> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or(Error::Parse {
        line: 1,
        message: "empty file".into(),
    })?;
    let names: Vec<&str> = header.split(',').map(str::trim).collect();
    if names.len() < 2 || names[0] != "t_s" {
        return Err(Error::Parse {
            line: 1,
            message: "header must be `t_s,<channel>`".into(),
        });
    }
    let channels: Vec<String> = names[1..].iter().map(|s| s.to_string()).collect();
    let mut times = Vec::new();
    let mut columns = vec![Vec::new(); channels.len()];
    for (i, line) in lines {
        let line_no = i + 1;
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        if cells.len() != names.len() {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected {} fields, found {}", names.len(), cells.len()),
            });
        }
        let parse = |s: &str, col: &str| -> Result<f64> {
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Parse {
                    line: line_no,
                    message: format!("bad number `{s}` in column `{col}`"),
                })
        };
        let t = parse(cells[0], "t_s")?;
        if let Some(&prev) = times.last() {
            if t <= prev {
                return Err(Error::Parse {
                    line: line_no,
                    message: "t_s must be strictly increasing".into(),
                });
            }
        }
        times.push(t);
        for (c, cell) in cells[1..].iter().enumerate() {
            columns[c].push(parse(cell, &channels[c])?);
        }
    }
    if times.is_empty() {
        return Err(Error::Parse {
            line: 2,
            message: "no data rows".into(),
        });
    }
    Ok(SignalTable {
        times,
        channels,
        columns,
    })
}

pub fn write_signal_csv(series: &[&TimeSeries]) -> Result<String> {
    let first = series
        .first()
        .ok_or_else(|| Error::InvalidParameter("no series to write".into()))?;
    if let Some(bad) = series.iter().find(|s| s.len() != first.len()) {
        return Err(Error::LengthMismatch {
            left: first.len(),
            right: bad.len(),
        });
    }
    let mut out = String::from("t_s");
    for s in series {
        out.push(',');
        out.push_str(if s.label.is_empty() { "value" } else { &s.label });
    }
    out.push('\n');
    for i in 0..first.len() {
        let _ = write!(out, "{}", first.time_at(i));
        for s in series {
            let _ = write!(out, ",{}", s.samples[i]);
        }
        out.push('\n');
    }
    Ok(out)
}
