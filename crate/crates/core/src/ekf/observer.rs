use std::io::Write;

use nalgebra::{Matrix1, Matrix3, Vector1, Vector3};
use serde::{Deserialize, Serialize};

use super::EkfInstance;
use crate::error::{invalid, Error, Result};
use crate::plant::{OmegaUModel, ThrustMap};
use crate::signals::series::format_time;
use crate::signals::{Recording, U_MAX, U_MIN};

/// Variance of uniform quantization error for a 0.1 kRPM step, kRPM².
const QUANTIZATION_VARIANCE: f64 = 0.1 * 0.1 / 12.0;

/// Observer tuning. All covariances are per 10 ms step unless stated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ObserverConfig {
    /// Pull of the idle-speed estimate back to nominal, 1/s.
    pub k_c1: f64,
    /// Nominal idle speed, kRPM; the model's `c1` when absent.
    pub c1_nominal: Option<f64>,
    /// Process noise on ω, kRPM².
    pub q_omega: f64,
    /// Process noise on ω̇, (kRPM/s)².
    pub q_omega_dot: f64,
    /// Process noise on `c1`, kRPM².
    pub q_c1: f64,
    /// Measurement noise on ω, kRPM².
    pub r: f64,
    pub p0_omega: f64,
    pub p0_omega_dot: f64,
    pub p0_c1: f64,
}

impl Default for ObserverConfig {
    fn default() -> Self {
        Self {
            k_c1: 0.05,
            c1_nominal: None,
            q_omega: 0.0,
            q_omega_dot: 0.5 * 0.5 * 0.01,
            q_c1: 0.2 * 0.2,
            r: QUANTIZATION_VARIANCE,
            p0_omega: QUANTIZATION_VARIANCE,
            p0_omega_dot: 10.0,
            p0_c1: 1.0,
        }
    }
}

impl ObserverConfig {
    /// The same filter with the idle-speed estimate pinned at nominal.
    pub fn frozen_c1(&self) -> Self {
        Self {
            q_c1: 0.0,
            p0_c1: 0.0,
            ..*self
        }
    }

    pub fn validate(&self) -> Result<()> {
        let entries = [
            ("k_c1", self.k_c1),
            ("q_omega", self.q_omega),
            ("q_omega_dot", self.q_omega_dot),
            ("q_c1", self.q_c1),
            ("p0_omega", self.p0_omega),
            ("p0_omega_dot", self.p0_omega_dot),
            ("p0_c1", self.p0_c1),
        ];
        if let Some((name, v)) = entries.iter().find(|(_, v)| !(*v >= 0.0 && v.is_finite())) {
            return Err(invalid(format!("observer setting {name} must be non-negative, got {v}")));
        }
        if !(self.r > 0.0 && self.r.is_finite()) {
            return Err(invalid(format!("observer setting r must be positive, got {}", self.r)));
        }
        if let Some(c1) = self.c1_nominal {
            if !(c1 > 0.0 && c1.is_finite()) {
                return Err(invalid(format!("c1_nominal must be positive, got {c1}")));
            }
        }
        Ok(())
    }

    fn nominal(&self, model: &OmegaUModel) -> f64 {
        self.c1_nominal.unwrap_or(model.c1)
    }
}

/// Observer state `[ω, ω̇, c1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThrustObserverState {
    pub omega: f64,
    pub omega_dot: f64,
    pub c1_online: f64,
}

impl ThrustObserverState {
    fn from_vector(x: &Vector3<f64>) -> Self {
        Self {
            omega: x[0],
            omega_dot: x[1],
            c1_online: x[2],
        }
    }
}

/// Observer output for one sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObserverEstimate {
    pub state: ThrustObserverState,
    pub thrust: f64,
    pub thrust_rate: f64,
}

/// Euler transition of the observer:
/// `[ω, ω̇, c1] ← [ω, ω̇, c1] + [ω̇, f(ω, ω̇, u; c1), −K_c1 (c1 − c1_nom)]·dt`.
pub fn observer_transition(
    model: OmegaUModel,
    c1_nominal: f64,
    k_c1: f64,
    dt: f64,
) -> impl Fn(&Vector3<f64>, &f64) -> Vector3<f64> {
    move |x, &u| {
        Vector3::new(
            x[0] + x[1] * dt,
            x[1] + model.accel(x[0], x[1], u, x[2]) * dt,
            x[2] - k_c1 * (x[2] - c1_nominal) * dt,
        )
    }
}

fn measure(x: &Vector3<f64>) -> Vector1<f64> {
    Vector1::new(x[0])
}

fn check_u(u: f64) -> Result<()> {
    if (U_MIN..=U_MAX).contains(&u) {
        Ok(())
    } else {
        Err(invalid(format!("input u = {u} outside [{U_MIN}, {U_MAX}]")))
    }
}

fn clamp_c1(mut filter: EkfInstance<3, 1>, c1_nominal: f64) -> EkfInstance<3, 1> {
    filter.x[2] = filter.x[2].clamp(1.0, 2.0 * c1_nominal);
    filter
}

fn estimate(filter: &EkfInstance<3, 1>, map: &ThrustMap) -> ObserverEstimate {
    let state = ThrustObserverState::from_vector(&filter.x);
    ObserverEstimate {
        state,
        thrust: map.thrust(state.omega),
        thrust_rate: map.thrust_rate(state.omega, state.omega_dot),
    }
}

/// One predict-update cycle of the thrust observer.
///
/// `u` is the input held since the previous sample and `omega_meas` the new
/// speed measurement. The idle-speed estimate is clamped to `[1, 2·c1_nom]`.
pub fn observer_step(
    filter: &EkfInstance<3, 1>,
    u: f64,
    omega_meas: f64,
    model: &OmegaUModel,
    map: &ThrustMap,
    config: &ObserverConfig,
) -> Result<(EkfInstance<3, 1>, ObserverEstimate)> {
    check_u(u)?;
    let c1_nominal = config.nominal(model);
    let f = observer_transition(*model, c1_nominal, config.k_c1, filter.dt);
    let next = super::ekf_step(filter, f, measure, &u, &Vector1::new(omega_meas))?;
    let next = clamp_c1(next, c1_nominal);
    Ok((next, estimate(&next, map)))
}

/// Streaming thrust observer.
#[derive(Debug, Clone)]
pub struct ThrustObserver {
    model: OmegaUModel,
    map: ThrustMap,
    config: ObserverConfig,
    filter: Option<EkfInstance<3, 1>>,
    dt: f64,
}

impl ThrustObserver {
    pub fn new(model: OmegaUModel, map: ThrustMap, config: ObserverConfig, dt: f64) -> Result<Self> {
        model.validate()?;
        map.validate()?;
        config.validate()?;
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(invalid(format!("sample step must be positive, got {dt}")));
        }
        Ok(Self {
            model,
            map,
            config,
            filter: None,
            dt,
        })
    }

    /// Filter state after the last sample, if any.
    pub fn filter(&self) -> Option<&EkfInstance<3, 1>> {
        self.filter.as_ref()
    }

    /// Processes the next sample. The first call initialises the state from
    /// the measurement (`ω̇ = 0`, `c1` at nominal) and applies one update;
    /// later calls predict with `u_prev`, the input held since the previous
    /// sample, then update.
    pub fn step(&mut self, u_prev: f64, omega_meas: f64) -> Result<ObserverEstimate> {
        let c1_nominal = self.config.nominal(&self.model);
        let next = match &self.filter {
            None => {
                if !omega_meas.is_finite() {
                    return Err(invalid("measurement must be finite"));
                }
                let c = &self.config;
                let x0 = Vector3::new(omega_meas, 0.0, c1_nominal);
                let p0 = Matrix3::from_diagonal(&Vector3::new(c.p0_omega, c.p0_omega_dot, c.p0_c1));
                let q = Matrix3::from_diagonal(&Vector3::new(c.q_omega, c.q_omega_dot, c.q_c1));
                let init = EkfInstance::new(x0, p0, q, Matrix1::new(c.r), self.dt)?;
                clamp_c1(init.update(measure, &Vector1::new(omega_meas))?, c1_nominal)
            }
            Some(filter) => observer_step(filter, u_prev, omega_meas, &self.model, &self.map, &self.config)?.0,
        };
        self.filter = Some(next);
        Ok(estimate(&next, &self.map))
    }
}

/// Observer outputs aligned with the input record.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateLog {
    pub t0: f64,
    pub dt: f64,
    pub u: Vec<f64>,
    pub omega_meas: Vec<f64>,
    pub omega_hat: Vec<f64>,
    pub omega_dot_hat: Vec<f64>,
    pub c1_hat: Vec<f64>,
    pub thrust_hat: Vec<f64>,
    pub thrust_rate_hat: Vec<f64>,
}

impl EstimateLog {
    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.dt
    }

    /// Writes `time,u,omega_meas,omega_hat,omega_dot_hat,c1_hat,thrust_hat,thrust_rate_hat`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record([
            "time",
            "u",
            "omega_meas",
            "omega_hat",
            "omega_dot_hat",
            "c1_hat",
            "thrust_hat",
            "thrust_rate_hat",
        ])?;
        for i in 0..self.len() {
            let row = [
                self.u[i],
                self.omega_meas[i],
                self.omega_hat[i],
                self.omega_dot_hat[i],
                self.c1_hat[i],
                self.thrust_hat[i],
                self.thrust_rate_hat[i],
            ];
            let mut record = vec![format_time(self.time(i))];
            record.extend(row.iter().map(f64::to_string));
            w.write_record(&record)?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

/// Runs the observer over a record, one measurement per sample.
pub fn run_observer(
    record: &Recording,
    model: &OmegaUModel,
    map: &ThrustMap,
    config: &ObserverConfig,
) -> Result<EstimateLog> {
    let n = record.len();
    if record.omega.len() != n {
        return Err(invalid("input and speed channels differ in length"));
    }
    let mut log = EstimateLog {
        t0: record.t0,
        dt: record.dt,
        u: record.u.clone(),
        omega_meas: record.omega.clone(),
        omega_hat: Vec::with_capacity(n),
        omega_dot_hat: Vec::with_capacity(n),
        c1_hat: Vec::with_capacity(n),
        thrust_hat: Vec::with_capacity(n),
        thrust_rate_hat: Vec::with_capacity(n),
    };
    if n == 0 {
        return Ok(log);
    }
    let mut observer = ThrustObserver::new(*model, *map, *config, record.dt)?;
    for k in 0..n {
        let u_prev = if k == 0 { record.u[0] } else { record.u[k - 1] };
        let e = observer.step(u_prev, record.omega[k]).map_err(|err| match err {
            Error::InvalidInput(msg) => invalid(format!("sample {k}: {msg}")),
            other => other,
        })?;
        log.omega_hat.push(e.state.omega);
        log.omega_dot_hat.push(e.state.omega_dot);
        log.c1_hat.push(e.state.c1_online);
        log.thrust_hat.push(e.thrust);
        log.thrust_rate_hat.push(e.thrust_rate);
    }
    Ok(log)
}
