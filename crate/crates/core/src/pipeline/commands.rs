use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;

use super::{ExperimentConfig, MetricsReport, Quantity};
use crate::ekf::{refine_parameters, run_observer, EstimateLog, ObserverConfig, RefineDiagnostics};
use crate::error::{invalid, Error, Result};
use crate::plant::{
    simulate_with, Engine, EngineSpec, FailureEvent, OmegaUModel, SimOptions, SimulationLog, SteadyStateMap,
    ThrustMap,
};
use crate::regress::{fit_power_law, read_xy_csv, PowerLawFit};
use crate::signals::series::{parse_field, uniform_grid};
use crate::signals::{
    discrepancy_smoothing, generate_schedule, smooth_spline_derivatives, Recording, SignalSpec, TimeSeries,
};
use crate::sindy::{assemble_omega_u_model, build_library_b, stlsq, SparseModel, StateSample};

/// Description of a simulation run, written next to its data.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest {
    pub engine: String,
    pub seed: u64,
    pub sample_rate: f64,
    pub quantization_step: f64,
    pub noise_std: f64,
    pub integrator_dt: f64,
    pub samples: usize,
    #[serde(rename = "signal")]
    pub signals: Vec<SignalSpec>,
    #[serde(rename = "failure")]
    pub failures: Vec<FailureEvent>,
}

#[derive(Debug, Clone)]
pub struct SimulationRun {
    pub engine: Engine,
    pub log: SimulationLog,
    pub manifest: Manifest,
}

fn sim_options(config: &ExperimentConfig, seed: u64) -> SimOptions {
    SimOptions {
        integrator_dt: config.integrator_dt.min(config.dt()),
        quantization_step: config.quantization_step,
        noise_std: config.noise_std,
        seed,
    }
}

/// Simulates the configured engine over the configured schedule.
pub fn run_simulation(config: &ExperimentConfig) -> Result<SimulationRun> {
    let engine = config.engine()?;
    let u = generate_schedule(&config.signals, config.dt())?;
    let options = sim_options(config, config.seed);
    let log = simulate_with(&engine.omega_u, &engine.thrust, &u, &config.failures, &options)?;
    let manifest = Manifest {
        engine: engine.spec.name.clone(),
        seed: config.seed,
        sample_rate: config.sample_rate,
        quantization_step: config.quantization_step,
        noise_std: config.noise_std,
        integrator_dt: options.integrator_dt,
        samples: log.len(),
        signals: config.signals.clone(),
        failures: config.failures.clone(),
    };
    Ok(SimulationRun { engine, log, manifest })
}

/// Held-out record from the configured engine on the validation schedule.
/// Uses a seed distinct from the identification run.
pub fn synthesize_validation(engine: &Engine, config: &ExperimentConfig) -> Result<Recording> {
    let u = generate_schedule(&config.validation_signals, config.dt())?;
    let options = sim_options(config, config.seed.wrapping_add(1));
    Ok(simulate_with(&engine.omega_u, &engine.thrust, &u, &[], &options)?.recording())
}

/// Steady-state points `(u, ω)` from constant-input segments of at least
/// `min_hold` seconds, averaging ω over the final `window` seconds.
pub fn extract_steady_points(record: &Recording, min_hold: f64, window: f64) -> Vec<(f64, f64)> {
    let min_len = (min_hold / record.dt).round().max(1.0) as usize;
    let avg_len = ((window / record.dt).round().max(1.0) as usize).min(min_len);
    let mut points = Vec::new();
    let mut start = 0;
    for end in 1..=record.len() {
        if end < record.len() && record.u[end] == record.u[start] {
            continue;
        }
        if end - start >= min_len {
            let tail = &record.omega[end - avg_len..end];
            points.push((record.u[start], tail.iter().sum::<f64>() / tail.len() as f64));
        }
        start = end;
    }
    points
}

/// Outcome of the identification pipeline.
#[derive(Debug, Clone)]
pub struct Identification {
    pub steady_points: Vec<(f64, f64)>,
    pub steady_fit: PowerLawFit,
    pub smoothing: f64,
    pub sparse: SparseModel,
    /// Model assembled from the sparse regression, before refinement.
    pub initial_model: OmegaUModel,
    pub model: OmegaUModel,
    pub refine: RefineDiagnostics,
    /// Re-simulation error on the held-out record.
    pub validation: MetricsReport,
}

impl Identification {
    pub fn report(&self) -> String {
        let s = &self.steady_fit;
        let mut out = format!(
            "[steady_state]\npoints = {}\na1 = {}\nb1 = {}\nc1 = {}\nrmse = {}\nr_squared = {}\n\n",
            self.steady_points.len(),
            s.a,
            s.b,
            s.c,
            s.rmse,
            s.r_squared
        );
        out.push_str(&format!(
            "[sparse]\nsmoothing = {:e}\nthreshold = {}\nresidual_rms = {}\n{}",
            self.smoothing, self.sparse.threshold_used, self.sparse.residual_rms,
            self.sparse.report()
        ));
        for w in &self.sparse.warnings {
            out.push_str(&format!("# warning: {w}\n"));
        }
        out.push_str("\n[refinement]\n");
        for p in &self.refine.passes {
            out.push_str(&format!(
                "pass {}: mae = {:.6} kRPM, max_err = {:.6} kRPM, gains = {:?}\n",
                p.pass, p.mae, p.max_err, p.gains
            ));
        }
        if let Some(reason) = &self.refine.aborted {
            out.push_str(&format!("# stopped: {reason}\n"));
        }
        out.push_str("\n[validation]\n");
        out.push_str(&self.validation.report());
        out
    }
}

/// Identifies the ω–u model from a quantized record.
///
/// The steady-state map is fitted to constant-input segments with `c1` fixed
/// at the engine's idle speed. The speed is then spline-differentiated, the
/// anchored library regressed on `ω̈` with sequential thresholding, the model
/// assembled and refined, and finally re-simulated on `validation`.
pub fn identify(
    record: &Recording,
    engine: &Engine,
    config: &ExperimentConfig,
    validation: &Recording,
) -> Result<Identification> {
    let ic = &config.identify;
    let steady_points = extract_steady_points(record, ic.steady_min_hold, ic.steady_window);
    if steady_points.len() < 4 {
        return Err(invalid(format!(
            "dataset has {} constant-input segments of at least {} s; the steady-state fit needs 4",
            steady_points.len(),
            ic.steady_min_hold
        )));
    }
    let (us, ws): (Vec<f64>, Vec<f64>) = steady_points.iter().copied().unzip();
    let steady_fit = fit_power_law(&us, &ws, Some(engine.spec.omega_idle))?;
    let steady = SteadyStateMap {
        a1: steady_fit.a,
        b1: steady_fit.b,
        c1: steady_fit.c,
    };

    let omega = record.omega_series()?;
    let noise_rms = (config.quantization_step.powi(2) / 12.0 + config.noise_std.powi(2)).sqrt();
    let smoothing = match ic.smoothing {
        Some(l) => l,
        None => discrepancy_smoothing(&omega, noise_rms)?,
    };
    let d = smooth_spline_derivatives(&omega, smoothing)?;
    let n = record.len();
    if n <= 2 * ic.trim {
        return Err(invalid(format!("dataset of {n} samples is shorter than the trimmed edges")));
    }
    let rows = ic.trim..n - ic.trim;
    let data: Vec<StateSample> = rows
        .clone()
        .map(|i| StateSample {
            omega: d.smooth.values()[i],
            omega_dot: d.first.values()[i],
            u: record.u[i],
        })
        .collect();
    let target: Vec<f64> = rows.map(|i| d.second.values()[i]).collect();
    let library = build_library_b(steady, ic.max_degree);
    let sparse = stlsq(&library, &data, &target, ic.threshold, ic.max_iters)?;
    let initial_model = assemble_omega_u_model(&sparse, steady)?;
    let (model, refine) = refine_parameters(&initial_model, record, &config.refiner)?;

    let validation = validate(&model, engine, validation)?;
    Ok(Identification {
        steady_points,
        steady_fit,
        smoothing,
        sparse,
        initial_model,
        model,
        refine,
        validation,
    })
}

fn validate(model: &OmegaUModel, engine: &Engine, record: &Recording) -> Result<MetricsReport> {
    let options = SimOptions {
        quantization_step: 0.0,
        ..SimOptions::default()
    };
    let log = simulate_with(model, &engine.thrust, &record.u_series()?, &[], &options)?;
    MetricsReport::new(
        &record.omega,
        &log.omega_true,
        Quantity::Speed,
        Quantity::Speed.reference_range(&engine.spec),
    )
}

/// Observer output, with thrust metrics when the record carries a reference.
#[derive(Debug, Clone)]
pub struct Estimation {
    pub log: EstimateLog,
    pub metrics: Option<MetricsReport>,
}

pub fn estimate(
    record: &Recording,
    model: &OmegaUModel,
    map: &ThrustMap,
    config: &ObserverConfig,
    spec: &EngineSpec,
) -> Result<Estimation> {
    let log = run_observer(record, model, map, config)?;
    let metrics = match &record.thrust {
        Some(truth) if !truth.is_empty() => Some(MetricsReport::new(
            truth,
            &log.thrust_hat,
            Quantity::Thrust,
            Quantity::Thrust.reference_range(spec),
        )?),
        _ => None,
    };
    Ok(Estimation { log, metrics })
}

/// Which static map a power-law fit describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StaticMap {
    /// `ω = a1·u^b1 + c1`, with `c1` fixed at the idle speed.
    OmegaU,
    /// `T = a2·ω^b2 + c2`, all coefficients free.
    ThrustOmega,
}

impl FromStr for StaticMap {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "omega_u" | "omega-u" => Ok(StaticMap::OmegaU),
            "thrust_omega" | "thrust-omega" => Ok(StaticMap::ThrustOmega),
            other => Err(invalid(format!("unknown static map `{other}` (expected omega_u or thrust_omega)"))),
        }
    }
}

pub fn fit_static(x: &[f64], y: &[f64], which: StaticMap, spec: &EngineSpec) -> Result<PowerLawFit> {
    let fix_c = match which {
        StaticMap::OmegaU => Some(spec.omega_idle),
        StaticMap::ThrustOmega => None,
    };
    fit_power_law(x, y, fix_c)
}

/// Reads `time` and one named column from a CSV file.
pub fn read_channel(path: &Path, column: &str) -> Result<TimeSeries> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = csv::Reader::from_reader(file);
    let headers = r.headers()?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| invalid(format!("{}: missing column `{name}`", path.display())))
    };
    let (i_t, i_v) = (find("time")?, find(column)?);
    let (mut times, mut values) = (vec![], vec![]);
    for (row, rec) in r.records().enumerate() {
        let rec = rec?;
        times.push(parse_field(&rec[i_t], row + 2, "time")?);
        values.push(parse_field(&rec[i_v], row + 2, column)?);
    }
    let (t0, dt) = uniform_grid(&times)?;
    TimeSeries::new(column, t0, dt, values)
}

fn create(dir: &Path, name: &str) -> Result<(BufWriter<File>, PathBuf)> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join(name);
    let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
    Ok((BufWriter::new(file), path))
}

fn write_text(dir: &Path, name: &str, text: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join(name);
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

fn read_recording(path: &Path) -> Result<Recording> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Recording::read_csv(file).map_err(|e| match e {
        Error::InvalidInput(msg) => invalid(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// Writes `simulation.csv` and `manifest.toml` into `out_dir`.
pub fn cmd_simulate(config: &ExperimentConfig, out_dir: &Path) -> Result<SimulationRun> {
    let run = run_simulation(config)?;
    let (w, _) = create(out_dir, "simulation.csv")?;
    run.log.write_csv(w)?;
    let manifest = toml::to_string(&run.manifest).map_err(|e| invalid(e.to_string()))?;
    write_text(out_dir, "manifest.toml", &manifest)?;
    Ok(run)
}

/// Identifies a model from `dataset` and writes `model.toml`,
/// `identify_report.txt` and `identify_metrics.csv`. Without a validation
/// file, a held-out record is synthesised from the configured engine.
pub fn cmd_identify(
    dataset: &Path,
    validation: Option<&Path>,
    config: &ExperimentConfig,
    out_dir: &Path,
) -> Result<Identification> {
    let engine = config.engine()?;
    let record = read_recording(dataset)?;
    let held_out = match validation {
        Some(p) => read_recording(p)?,
        None => synthesize_validation(&engine, config)?,
    };
    let id = identify(&record, &engine, config, &held_out)?;
    write_text(out_dir, "model.toml", &id.model.to_toml())?;
    write_text(out_dir, "identify_report.txt", &id.report())?;
    let (w, _) = create(out_dir, "identify_metrics.csv")?;
    id.validation.write_csv(w)?;
    Ok(id)
}

/// Runs the observer on `measurement` and writes `estimate.csv`, plus
/// `estimate_report.txt` and `estimate_metrics.csv` when a thrust reference
/// is present. Model and map default to the configured engine's.
pub fn cmd_estimate(
    measurement: &Path,
    model_path: Option<&Path>,
    map_path: Option<&Path>,
    config: &ExperimentConfig,
    out_dir: &Path,
) -> Result<Estimation> {
    let engine = config.engine()?;
    let model = model_path.map(OmegaUModel::load).transpose()?.unwrap_or(engine.omega_u);
    let map = map_path.map(ThrustMap::load).transpose()?.unwrap_or(engine.thrust);
    let record = read_recording(measurement)?;
    let est = estimate(&record, &model, &map, &config.observer, &engine.spec)?;
    let (w, _) = create(out_dir, "estimate.csv")?;
    est.log.write_csv(w)?;
    if let Some(m) = &est.metrics {
        write_text(out_dir, "estimate_report.txt", &m.report())?;
        let (w, _) = create(out_dir, "estimate_metrics.csv")?;
        m.write_csv(w)?;
    }
    Ok(est)
}

/// Fits a static map to a two-column CSV and writes the coefficients
/// (`steady_state.toml` or `thrust_map.toml`), `fit_report.txt` and `fit.csv`.
pub fn cmd_fit_static(xy: &Path, which: StaticMap, config: &ExperimentConfig, out_dir: &Path) -> Result<PowerLawFit> {
    let engine = config.engine()?;
    let file = File::open(xy).map_err(|e| Error::io(xy, e))?;
    let (x, y) = read_xy_csv(file)?;
    let fit = fit_static(&x, &y, which, &engine.spec)?;
    let (name, coefficients) = match which {
        StaticMap::OmegaU => (
            "steady_state.toml",
            toml::to_string(&SteadyStateMap {
                a1: fit.a,
                b1: fit.b,
                c1: fit.c,
            }),
        ),
        StaticMap::ThrustOmega => (
            "thrust_map.toml",
            toml::to_string(&ThrustMap {
                a2: fit.a,
                b2: fit.b,
                c2: fit.c,
            }),
        ),
    };
    write_text(out_dir, name, &coefficients.map_err(|e| invalid(e.to_string()))?)?;
    write_text(out_dir, "fit_report.txt", &fit.report())?;
    let (w, _) = create(out_dir, "fit.csv")?;
    fit.write_csv(w)?;
    Ok(fit)
}

/// Metrics of column `estimate_column` of `estimate` against column
/// `reference_column` of `reference`, on a shared time grid.
pub fn cmd_evaluate(
    reference: (&Path, &str),
    estimate: (&Path, &str),
    quantity: Quantity,
    spec: &EngineSpec,
) -> Result<MetricsReport> {
    let r = read_channel(reference.0, reference.1)?;
    let e = read_channel(estimate.0, estimate.1)?;
    if r.len() != e.len() || (r.t0() - e.t0()).abs() > 1e-9 || (r.dt() - e.dt()).abs() > 1e-9 {
        return Err(invalid("reference and estimate are not on the same time grid"));
    }
    MetricsReport::new(r.values(), e.values(), quantity, quantity.reference_range(spec))
}
