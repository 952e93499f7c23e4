use std::io::{Read, Write};

use super::series::{format_time, parse_field, uniform_grid};
use super::TimeSeries;
use crate::error::{invalid, Result};

/// Measured input and speed channels on a shared uniform grid, optionally
/// with a reference thrust channel.
#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    pub t0: f64,
    pub dt: f64,
    pub u: Vec<f64>,
    /// Measured (quantized) speed, kRPM.
    pub omega: Vec<f64>,
    /// Reference thrust, N, when available.
    pub thrust: Option<Vec<f64>>,
}

impl Recording {
    pub fn new(u: &TimeSeries, omega: &TimeSeries, thrust: Option<&TimeSeries>) -> Result<Self> {
        let same_grid = |s: &TimeSeries| {
            s.len() == u.len() && (s.t0() - u.t0()).abs() <= 1e-9 && (s.dt() - u.dt()).abs() <= 1e-12
        };
        if !same_grid(omega) || thrust.is_some_and(|t| !same_grid(t)) {
            return Err(invalid("channels must share the same time grid"));
        }
        Ok(Self {
            t0: u.t0(),
            dt: u.dt(),
            u: u.values().to_vec(),
            omega: omega.values().to_vec(),
            thrust: thrust.map(|t| t.values().to_vec()),
        })
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.dt
    }

    pub fn u_series(&self) -> Result<TimeSeries> {
        TimeSeries::new("u", self.t0, self.dt, self.u.clone())
    }

    pub fn omega_series(&self) -> Result<TimeSeries> {
        TimeSeries::new("omega", self.t0, self.dt, self.omega.clone())
    }

    /// Samples `start..end` as a new recording.
    pub fn slice(&self, start: usize, end: usize) -> Result<Self> {
        if start > end || end > self.len() {
            return Err(invalid(format!("slice {start}..{end} out of range for {} samples", self.len())));
        }
        Ok(Self {
            t0: self.time(start),
            dt: self.dt,
            u: self.u[start..end].to_vec(),
            omega: self.omega[start..end].to_vec(),
            thrust: self.thrust.as_ref().map(|t| t[start..end].to_vec()),
        })
    }

    /// Reads a CSV with columns `time`, `u` and `omega_meas` (or `omega`), and
    /// optionally `thrust_true`. Other columns are ignored.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let headers = r.headers()?.clone();
        let find = |name: &str| headers.iter().position(|h| h.trim() == name);
        let missing = |name: &str| invalid(format!("missing column `{name}`"));
        let i_t = find("time").ok_or_else(|| missing("time"))?;
        let i_u = find("u").ok_or_else(|| missing("u"))?;
        let (i_w, w_name) = find("omega_meas")
            .map(|i| (i, "omega_meas"))
            .or_else(|| find("omega").map(|i| (i, "omega")))
            .ok_or_else(|| missing("omega_meas"))?;
        let i_thrust = find("thrust_true");

        let (mut times, mut u, mut omega, mut thrust) = (vec![], vec![], vec![], vec![]);
        for (row, rec) in r.records().enumerate() {
            let rec = rec?;
            let line = row + 2;
            times.push(parse_field(&rec[i_t], line, "time")?);
            u.push(parse_field(&rec[i_u], line, "u")?);
            omega.push(parse_field(&rec[i_w], line, w_name)?);
            if let Some(i) = i_thrust {
                thrust.push(parse_field(&rec[i], line, "thrust_true")?);
            }
        }
        let (t0, dt) = if times.is_empty() { (0.0, 1.0) } else { uniform_grid(&times)? };
        Ok(Self {
            t0,
            dt,
            u,
            omega,
            thrust: i_thrust.map(|_| thrust),
        })
    }

    /// Writes `time,u,omega_meas` and `thrust_true` when present.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["time", "u", "omega_meas"];
        if self.thrust.is_some() {
            header.push("thrust_true");
        }
        w.write_record(&header)?;
        for i in 0..self.len() {
            let mut row = vec![format_time(self.time(i)), self.u[i].to_string(), self.omega[i].to_string()];
            if let Some(t) = &self.thrust {
                row.push(t[i].to_string());
            }
            w.write_record(&row)?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}
