use nalgebra::{Matrix1, SMatrix, SVector, Vector1};
use serde::{Deserialize, Serialize};

use super::{ekf_step, EkfInstance};
use crate::error::{invalid, Error, Result};
use crate::plant::{simulate_with, OmegaUModel, SimOptions, ThrustMap};
use crate::regress::goodness;
use crate::signals::Recording;

/// Refiner state `[ω, ω̇, K_ss, K_d, K_wd, K_wwd]`.
pub type RefinerState = SVector<f64, 6>;

/// Settings of the augmented-state refinement filter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RefinerConfig {
    /// Process noise on ω̇ per step, (kRPM/s)².
    pub q_omega_dot: f64,
    /// Random-walk standard deviation of each gain per step, relative to its
    /// starting magnitude.
    pub q_gain_rel: f64,
    /// Initial standard deviation of each gain, relative to its magnitude.
    pub p0_gain_rel: f64,
    pub p0_omega_dot: f64,
    /// Measurement noise on ω, kRPM².
    pub r: f64,
    pub max_passes: usize,
    /// Gains beyond this magnitude abort refinement.
    pub max_gain: f64,
}

impl Default for RefinerConfig {
    fn default() -> Self {
        Self {
            q_omega_dot: 0.5 * 0.5 * 0.01,
            q_gain_rel: 1e-5,
            p0_gain_rel: 1e-5 * 1e3f64.sqrt(),
            p0_omega_dot: 10.0,
            r: 0.1 * 0.1 / 12.0,
            max_passes: 5,
            max_gain: 1e4,
        }
    }
}

impl RefinerConfig {
    pub fn validate(&self) -> Result<()> {
        let entries = [
            ("q_omega_dot", self.q_omega_dot),
            ("q_gain_rel", self.q_gain_rel),
            ("p0_gain_rel", self.p0_gain_rel),
            ("p0_omega_dot", self.p0_omega_dot),
        ];
        if let Some((name, v)) = entries.iter().find(|(_, v)| !(*v >= 0.0 && v.is_finite())) {
            return Err(invalid(format!("refiner setting {name} must be non-negative, got {v}")));
        }
        if !(self.r > 0.0) || !(self.max_gain > 0.0) {
            return Err(invalid("refiner r and max_gain must be positive"));
        }
        Ok(())
    }
}

/// Error of a model re-simulated against the measured speed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PassRecord {
    pub pass: usize,
    pub gains: [f64; 4],
    pub mae: f64,
    pub max_err: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RefineDiagnostics {
    /// Pass 0 is the starting model; later entries are accepted passes
    /// followed by the first rejected one, if any.
    pub passes: Vec<PassRecord>,
    /// Index into `passes` of the returned model.
    pub best: usize,
    /// Why refinement stopped early, when it did not simply stop improving.
    pub aborted: Option<String>,
}

/// Euler transition of the refiner with the gains taken from the state.
pub fn refiner_transition(model: OmegaUModel, dt: f64) -> impl Fn(&RefinerState, &f64) -> RefinerState {
    move |x, &u| {
        let m = OmegaUModel {
            k_ss: x[2],
            k_d: x[3],
            k_wd: x[4],
            k_wwd: x[5],
            ..model
        };
        let mut next = *x;
        next[0] = x[0] + x[1] * dt;
        next[1] = x[1] + m.accel(x[0], x[1], u, model.c1) * dt;
        next
    }
}

fn resimulate(model: &OmegaUModel, record: &Recording, pass: usize) -> Result<PassRecord> {
    let u = record.u_series()?;
    let options = SimOptions {
        quantization_step: 0.0,
        ..SimOptions::default()
    };
    // the thrust map is irrelevant here; any valid one will do
    let map = ThrustMap::new(1.0, 2.0, 0.0)?;
    let log = simulate_with(model, &map, &u, &[], &options)?;
    let g = goodness(&record.omega, &log.omega_true)?;
    Ok(PassRecord {
        pass,
        gains: model.gains(),
        mae: g.mae,
        max_err: g.max_err,
    })
}

/// One filter pass over the record, starting from `model`'s gains.
fn filter_pass(model: &OmegaUModel, record: &Recording, config: &RefinerConfig) -> Result<[f64; 4]> {
    let gains = model.gains();
    let mut x0 = RefinerState::zeros();
    x0[0] = record.omega[0];
    let mut p0 = SVector::<f64, 6>::zeros();
    let mut q = SVector::<f64, 6>::zeros();
    p0[0] = config.r;
    p0[1] = config.p0_omega_dot;
    q[1] = config.q_omega_dot;
    for i in 0..4 {
        x0[2 + i] = gains[i];
        p0[2 + i] = (config.p0_gain_rel * gains[i]).powi(2);
        q[2 + i] = (config.q_gain_rel * gains[i]).powi(2);
    }
    let measure = |x: &RefinerState| Vector1::new(x[0]);
    let mut filter = EkfInstance::<6, 1>::new(
        x0,
        SMatrix::from_diagonal(&p0),
        SMatrix::from_diagonal(&q),
        Matrix1::new(config.r),
        record.dt,
    )?
    .update(measure, &Vector1::new(record.omega[0]))?;
    let f = refiner_transition(*model, record.dt);
    for k in 1..record.len() {
        filter = ekf_step(&filter, &f, measure, &record.u[k - 1], &Vector1::new(record.omega[k]))?;
        if let Some(g) = filter.x.rows(2, 4).iter().find(|g| g.abs() > config.max_gain) {
            return Err(Error::InvalidModel(format!("gain diverged to {g} at sample {k}")));
        }
    }
    Ok([filter.x[2], filter.x[3], filter.x[4], filter.x[5]])
}

/// Refines the dynamic gains of `model0` by running the augmented-state EKF
/// repeatedly over the record.
///
/// Each pass starts from the previous pass's gains. After every pass the
/// model is re-simulated on the record's input; refinement continues while
/// the speed MAE decreases and the best model is returned. A pass whose gains
/// diverge or fail model validation ends refinement with the last good model.
pub fn refine_parameters(
    model0: &OmegaUModel,
    record: &Recording,
    config: &RefinerConfig,
) -> Result<(OmegaUModel, RefineDiagnostics)> {
    model0.validate()?;
    config.validate()?;
    if record.len() < 2 {
        return Err(invalid("refinement needs at least two samples"));
    }
    let mut diag = RefineDiagnostics {
        passes: vec![resimulate(model0, record, 0)?],
        ..RefineDiagnostics::default()
    };
    let mut best = *model0;
    let mut best_mae = diag.passes[0].mae;
    for pass in 1..=config.max_passes {
        let candidate = match filter_pass(&best, record, config).and_then(|g| best.with_gains(g)) {
            Ok(m) => m,
            Err(e) if !matches!(e, Error::Io { .. }) => {
                diag.aborted = Some(format!("pass {pass}: {e}"));
                break;
            }
            Err(e) => return Err(e),
        };
        let rec = match resimulate(&candidate, record, pass) {
            Ok(r) => r,
            Err(e) => {
                diag.aborted = Some(format!("pass {pass}: {e}"));
                break;
            }
        };
        diag.passes.push(rec);
        if rec.mae < best_mae {
            best = candidate;
            best_mae = rec.mae;
            diag.best = diag.passes.len() - 1;
        } else {
            break;
        }
    }
    Ok((best, diag))
}
