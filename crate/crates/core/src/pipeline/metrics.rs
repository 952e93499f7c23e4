use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::plant::EngineSpec;
use crate::regress::goodness;

/// What a metric measures, which fixes its unit and percentage reference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    /// Shaft speed in kRPM; percentages of `ω_max − ω_idle`.
    Speed,
    /// Thrust in N; percentages of rated thrust.
    Thrust,
}

impl Quantity {
    pub fn unit(self) -> &'static str {
        match self {
            Quantity::Speed => "kRPM",
            Quantity::Thrust => "N",
        }
    }

    pub fn reference_range(self, spec: &EngineSpec) -> f64 {
        match self {
            Quantity::Speed => spec.speed_range(),
            Quantity::Thrust => spec.thrust_max,
        }
    }
}

impl fmt::Display for Quantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Quantity::Speed => "speed",
            Quantity::Thrust => "thrust",
        })
    }
}

/// Absolute and relative error of an estimate against a reference channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricsReport {
    pub quantity: Quantity,
    pub samples: usize,
    pub mae: f64,
    pub mae_pct: f64,
    pub max_err: f64,
    pub max_err_pct: f64,
    pub reference_range: f64,
}

impl MetricsReport {
    pub fn new(reference: &[f64], estimate: &[f64], quantity: Quantity, reference_range: f64) -> Result<Self> {
        if !(reference_range > 0.0) {
            return Err(invalid(format!("reference range must be positive, got {reference_range}")));
        }
        let g = goodness(reference, estimate)?;
        Ok(Self {
            quantity,
            samples: reference.len(),
            mae: g.mae,
            mae_pct: 100.0 * g.mae / reference_range,
            max_err: g.max_err,
            max_err_pct: 100.0 * g.max_err / reference_range,
            reference_range,
        })
    }

    /// Human-readable summary; speed errors are also given in RPM.
    pub fn report(&self) -> String {
        let unit = self.quantity.unit();
        let mut out = format!(
            "quantity = {}\nsamples = {}\nmae = {:.6} {unit} ({:.3}%)\nmax_err = {:.6} {unit} ({:.3}%)\nreference_range = {} {unit}\n",
            self.quantity, self.samples, self.mae, self.mae_pct, self.max_err, self.max_err_pct, self.reference_range
        );
        if self.quantity == Quantity::Speed {
            out.push_str(&format!(
                "mae_rpm = {:.1}\nmax_err_rpm = {:.1}\n",
                1e3 * self.mae,
                1e3 * self.max_err
            ));
        }
        out
    }

    /// Single-row CSV with header.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.serialize(self)?;
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}
