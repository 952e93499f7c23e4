use std::io::{Read, Write};

use crate::error::{invalid, Result};

/// Uniformly sampled scalar channel.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    pub name: String,
    t0: f64,
    dt: f64,
    values: Vec<f64>,
}

impl TimeSeries {
    pub fn new(name: impl Into<String>, t0: f64, dt: f64, values: Vec<f64>) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(invalid(format!("sample step must be positive, got {dt}")));
        }
        if !t0.is_finite() {
            return Err(invalid("start time must be finite"));
        }
        if values.is_empty() {
            return Err(invalid("time series must contain at least one sample"));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(invalid(format!("non-finite sample at index {i}")));
        }
        Ok(Self {
            name: name.into(),
            t0,
            dt,
            values,
        })
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.dt
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.values.len()).map(move |i| self.time(i))
    }

    pub fn duration(&self) -> f64 {
        (self.values.len() - 1) as f64 * self.dt
    }

    /// Same time grid, new samples.
    pub fn with_values(&self, name: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        if values.len() != self.values.len() {
            return Err(invalid(format!(
                "length mismatch: {} samples for a {}-sample grid",
                values.len(),
                self.values.len()
            )));
        }
        Self::new(name, self.t0, self.dt, values)
    }

    pub fn map(&self, name: impl Into<String>, f: impl Fn(f64) -> f64) -> Result<Self> {
        self.with_values(name, self.values.iter().map(|&v| f(v)).collect())
    }

    /// Samples `[start, end)`, keeping the original timestamps.
    pub fn slice(&self, start: usize, end: usize) -> Result<Self> {
        if start >= end || end > self.values.len() {
            return Err(invalid(format!(
                "slice {start}..{end} out of range for {} samples",
                self.values.len()
            )));
        }
        Self::new(
            self.name.clone(),
            self.time(start),
            self.dt,
            self.values[start..end].to_vec(),
        )
    }

    /// Writes `time,<name>` with one row per sample.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["time", self.name.as_str()])?;
        for (t, v) in self.times().zip(&self.values) {
            w.write_record([format_time(t), format!("{v}")])?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let headers = r.headers()?.clone();
        if headers.len() != 2 || &headers[0] != "time" {
            return Err(invalid(format!(
                "expected header `time,<name>`, got `{}`",
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let name = headers[1].to_string();
        let mut times = Vec::new();
        let mut values = Vec::new();
        for (line, rec) in r.records().enumerate() {
            let rec = rec?;
            times.push(parse_field(&rec[0], line + 2, "time")?);
            values.push(parse_field(&rec[1], line + 2, &name)?);
        }
        let (t0, dt) = uniform_grid(&times)?;
        Self::new(name, t0, dt, values)
    }
}

/// Times are written with microsecond resolution.
pub(crate) fn format_time(t: f64) -> String {
    format!("{t:.6}")
}

pub(crate) fn parse_field(field: &str, line: usize, column: &str) -> Result<f64> {
    field
        .trim()
        .parse::<f64>()
        .map_err(|e| invalid(format!("line {line}, column `{column}`: {e}")))
}

/// Largest tolerated deviation of a sample interval from the nominal step.
pub(crate) const GRID_JITTER: f64 = 1e-9;

/// Recovers `(t0, dt)` from timestamps and rejects non-uniform sampling.
pub(crate) fn uniform_grid(times: &[f64]) -> Result<(f64, f64)> {
    match times.len() {
        0 => Err(invalid("no samples")),
        1 => Ok((times[0], 1.0)),
        n => {
            let dt = (times[n - 1] - times[0]) / (n - 1) as f64;
            if !(dt > 0.0) {
                return Err(invalid("timestamps must be strictly increasing"));
            }
            for (i, w) in times.windows(2).enumerate() {
                let step = w[1] - w[0];
                if (step - dt).abs() > GRID_JITTER {
                    return Err(invalid(format!(
                        "non-uniform sampling at row {}: step {step} differs from {dt}",
                        i + 1
                    )));
                }
            }
            Ok((times[0], dt))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_construction() {
        assert!(TimeSeries::new("x", 0.0, 0.0, vec![1.0]).is_err());
        assert!(TimeSeries::new("x", 0.0, 0.01, vec![]).is_err());
        assert!(TimeSeries::new("x", 0.0, 0.01, vec![1.0, f64::NAN]).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let s = TimeSeries::new("omega", 0.0, 0.01, vec![35.0, 35.1, 35.25]).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("time,omega\n0.000000,35\n0.010000,35.1\n"));
        let back = TimeSeries::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.values(), s.values());
        assert!((back.dt() - 0.01).abs() < 1e-12);
    }

    #[test]
    fn jittered_grid_rejected() {
        let text = "time,x\n0.0,1\n0.01,1\n0.0200001,1\n0.03,1\n";
        assert!(TimeSeries::read_csv(text.as_bytes()).is_err());
    }
}
