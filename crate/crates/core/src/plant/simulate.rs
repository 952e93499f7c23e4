use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{OmegaUModel, ThrustMap};
use crate::error::{invalid, Error, Result};
use crate::signals::series::format_time;
use crate::signals::{quantize_value, Recording, TimeSeries, U_MAX, U_MIN};

pub const DEFAULT_INTEGRATOR_DT: f64 = 1e-3;
/// Shaft-speed sensor resolution, kRPM (100 RPM).
pub const DEFAULT_QUANTIZATION_STEP: f64 = 0.1;

/// Fraction of a failure's duration spent ramping the idle constant down.
const FAILURE_RAMP_FRACTION: f64 = 0.1;

/// Temporary loss of idle constant: `c1` ramps down by `c1_drop` over the
/// first 10% of `duration`, holds, and recovers at `recovery_rate` once the
/// event ends.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FailureEvent {
    /// s
    pub t_start: f64,
    /// s
    pub duration: f64,
    /// kRPM
    pub c1_drop: f64,
    /// kRPM/s
    pub recovery_rate: f64,
}

impl FailureEvent {
    pub fn validate(&self) -> Result<()> {
        if !self.t_start.is_finite() {
            return Err(invalid("failure t_start must be finite"));
        }
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(invalid(format!("failure duration must be positive, got {}", self.duration)));
        }
        if !(self.c1_drop >= 0.0 && self.c1_drop.is_finite()) {
            return Err(invalid(format!("c1_drop must be non-negative, got {}", self.c1_drop)));
        }
        if !(self.recovery_rate > 0.0 && self.recovery_rate.is_finite()) {
            return Err(invalid(format!(
                "recovery_rate must be positive, got {}",
                self.recovery_rate
            )));
        }
        Ok(())
    }

    /// Amount by which the idle constant is depressed at time `t`.
    pub fn depression(&self, t: f64) -> f64 {
        let ramp = FAILURE_RAMP_FRACTION * self.duration;
        let since = t - self.t_start;
        if since <= 0.0 {
            0.0
        } else if since < ramp {
            self.c1_drop * since / ramp
        } else if since <= self.duration {
            self.c1_drop
        } else {
            (self.c1_drop - self.recovery_rate * (since - self.duration)).max(0.0)
        }
    }

    /// Time at which the idle constant is fully restored.
    pub fn t_recovered(&self) -> f64 {
        self.t_start + self.duration + self.c1_drop / self.recovery_rate
    }
}

/// Effective idle constant under a set of (possibly overlapping) failures.
fn effective_c1(c1: f64, failures: &[FailureEvent], t: f64) -> f64 {
    (c1 - failures.iter().map(|f| f.depression(t)).sum::<f64>()).max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantState {
    /// kRPM
    pub omega: f64,
    /// kRPM/s
    pub omega_dot: f64,
    /// kRPM
    pub c1_eff: f64,
    /// s
    pub t: f64,
}

/// Integration and measurement settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimOptions {
    pub integrator_dt: f64,
    /// Measurement quantization, kRPM; `0` disables it.
    pub quantization_step: f64,
    /// Standard deviation of Gaussian sensor noise added before quantization.
    pub noise_std: f64,
    pub seed: u64,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            integrator_dt: DEFAULT_INTEGRATOR_DT,
            quantization_step: DEFAULT_QUANTIZATION_STEP,
            noise_std: 0.0,
            seed: 0,
        }
    }
}

/// Plant trajectory sampled on the input grid.
///
/// `omega_ddot_true` and `c1_eff` are kept for analysis but are not part of
/// the CSV format.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationLog {
    pub t0: f64,
    pub dt: f64,
    pub u: Vec<f64>,
    pub omega_true: Vec<f64>,
    pub omega_dot_true: Vec<f64>,
    pub omega_ddot_true: Vec<f64>,
    pub omega_meas: Vec<f64>,
    pub thrust_true: Vec<f64>,
    pub c1_eff: Vec<f64>,
}

impl SimulationLog {
    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.dt
    }

    /// Plant state at sample `i`.
    pub fn state(&self, i: usize) -> PlantState {
        PlantState {
            omega: self.omega_true[i],
            omega_dot: self.omega_dot_true[i],
            c1_eff: self.c1_eff[i],
            t: self.time(i),
        }
    }

    fn series(&self, name: &str, values: &[f64]) -> TimeSeries {
        TimeSeries::new(name, self.t0, self.dt, values.to_vec()).expect("log channels are finite")
    }

    pub fn u_series(&self) -> TimeSeries {
        self.series("u", &self.u)
    }

    pub fn omega_meas_series(&self) -> TimeSeries {
        self.series("omega_meas", &self.omega_meas)
    }

    pub fn omega_true_series(&self) -> TimeSeries {
        self.series("omega_true", &self.omega_true)
    }

    pub fn thrust_true_series(&self) -> TimeSeries {
        self.series("thrust_true", &self.thrust_true)
    }

    /// Measured channels with the true thrust as reference.
    pub fn recording(&self) -> Recording {
        Recording {
            t0: self.t0,
            dt: self.dt,
            u: self.u.clone(),
            omega: self.omega_meas.clone(),
            thrust: Some(self.thrust_true.clone()),
        }
    }

    /// Writes `time,u,omega_true,omega_dot_true,omega_meas,thrust_true`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["time", "u", "omega_true", "omega_dot_true", "omega_meas", "thrust_true"])?;
        for i in 0..self.len() {
            w.write_record([
                format_time(self.time(i)),
                self.u[i].to_string(),
                self.omega_true[i].to_string(),
                self.omega_dot_true[i].to_string(),
                self.omega_meas[i].to_string(),
                self.thrust_true[i].to_string(),
            ])?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

/// Simulates the plant with quantized, noise-free measurements.
pub fn simulate(
    model: &OmegaUModel,
    map: &ThrustMap,
    u: &TimeSeries,
    failures: &[FailureEvent],
    integrator_dt: f64,
) -> Result<SimulationLog> {
    let options = SimOptions {
        integrator_dt,
        ..SimOptions::default()
    };
    simulate_with(model, map, u, failures, &options)
}

/// RK4 integration with zero-order hold on `u`, sampled on the input grid.
/// The engine starts at the equilibrium for `u(0)`.
pub fn simulate_with(
    model: &OmegaUModel,
    map: &ThrustMap,
    u: &TimeSeries,
    failures: &[FailureEvent],
    options: &SimOptions,
) -> Result<SimulationLog> {
    model.validate()?;
    map.validate()?;
    for f in failures {
        f.validate()?;
    }
    let h_max = options.integrator_dt;
    if !(h_max > 0.0) || h_max > u.dt() * (1.0 + 1e-9) {
        return Err(invalid(format!(
            "integrator_dt must lie in (0, {}], got {h_max}",
            u.dt()
        )));
    }
    if let Some(bad) = u.values().iter().find(|v| !(U_MIN..=U_MAX).contains(*v)) {
        return Err(invalid(format!("input u = {bad} outside [{U_MIN}, {U_MAX}]")));
    }
    if options.quantization_step < 0.0 || !(options.noise_std >= 0.0) {
        return Err(invalid("quantization step and noise level must be non-negative"));
    }

    let substeps = ((u.dt() / h_max) - 1e-9).ceil().max(1.0) as usize;
    let h = u.dt() / substeps as f64;
    let limit = 10.0 * model.omega_max();
    let c1_at = |t: f64| effective_c1(model.c1, failures, t);
    let rhs = |t: f64, w: f64, wd: f64, uk: f64| (wd, model.accel(w, wd, uk, c1_at(t)));

    let n = u.len();
    let mut log = SimulationLog {
        t0: u.t0(),
        dt: u.dt(),
        u: u.values().to_vec(),
        omega_true: Vec::with_capacity(n),
        omega_dot_true: Vec::with_capacity(n),
        omega_ddot_true: Vec::with_capacity(n),
        omega_meas: Vec::with_capacity(n),
        thrust_true: Vec::with_capacity(n),
        c1_eff: Vec::with_capacity(n),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let noise = Normal::new(0.0, options.noise_std).map_err(|e| invalid(e.to_string()))?;

    let u0 = u.values()[0];
    let mut w = model.steady_state().omega(u0) - model.c1 + c1_at(u.t0());
    let mut wd = 0.0;
    for (k, &uk) in u.values().iter().enumerate() {
        let tk = u.time(k);
        let c1k = c1_at(tk);
        log.omega_true.push(w);
        log.omega_dot_true.push(wd);
        log.omega_ddot_true.push(model.accel(w, wd, uk, c1k));
        log.thrust_true.push(map.thrust(w));
        log.c1_eff.push(c1k);
        let noisy = if options.noise_std > 0.0 { w + noise.sample(&mut rng) } else { w };
        log.omega_meas.push(if options.quantization_step > 0.0 {
            quantize_value(noisy, options.quantization_step)
        } else {
            noisy
        });
        if k + 1 == n {
            break;
        }
        for s in 0..substeps {
            let t = tk + s as f64 * h;
            let (k1w, k1d) = rhs(t, w, wd, uk);
            let (k2w, k2d) = rhs(t + 0.5 * h, w + 0.5 * h * k1w, wd + 0.5 * h * k1d, uk);
            let (k3w, k3d) = rhs(t + 0.5 * h, w + 0.5 * h * k2w, wd + 0.5 * h * k2d, uk);
            let (k4w, k4d) = rhs(t + h, w + h * k3w, wd + h * k3d, uk);
            w += h / 6.0 * (k1w + 2.0 * k2w + 2.0 * k3w + k4w);
            wd += h / 6.0 * (k1d + 2.0 * k2d + 2.0 * k3d + k4d);
            if !w.is_finite() || !wd.is_finite() || w.abs() > limit {
                return Err(Error::Divergence { t: t + h, omega: w });
            }
        }
    }
    Ok(log)
}
