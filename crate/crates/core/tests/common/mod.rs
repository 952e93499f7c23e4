#![allow(dead_code)]

use jetthrust::plant::{simulate_with, Engine, SimOptions, SimulationLog};
use jetthrust::signals::{generate_schedule, identification_schedule, TimeSeries};
use jetthrust::sindy::StateSample;

pub const DT: f64 = 0.01;

pub fn identification_input() -> TimeSeries {
    generate_schedule(&identification_schedule(), DT).unwrap()
}

/// Identification run with the given measurement settings.
pub fn identification_run(engine: &Engine, quantization_step: f64, noise_std: f64) -> SimulationLog {
    let options = SimOptions {
        quantization_step,
        noise_std,
        ..SimOptions::default()
    };
    simulate_with(&engine.omega_u, &engine.thrust, &identification_input(), &[], &options).unwrap()
}

/// Exact regression rows and target from the true trajectory.
pub fn exact_rows(log: &SimulationLog) -> (Vec<StateSample>, Vec<f64>) {
    let rows = (0..log.len())
        .map(|i| StateSample {
            omega: log.omega_true[i],
            omega_dot: log.omega_dot_true[i],
            u: log.u[i],
        })
        .collect();
    (rows, log.omega_ddot_true.clone())
}
