use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::ekf::{ObserverConfig, RefinerConfig};
use crate::error::{invalid, Result};
use crate::plant::{parse_toml, read_text, Engine, FailureEvent, DEFAULT_INTEGRATOR_DT, DEFAULT_QUANTIZATION_STEP};
use crate::signals::{identification_schedule, validation_schedule, SignalSpec};
use crate::sindy::{DEFAULT_MAX_ITERS, DEFAULT_THRESHOLD};

/// Settings of the identification pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IdentifyConfig {
    /// Pruning threshold on normalised coefficients.
    pub threshold: f64,
    pub max_degree: u32,
    pub max_iters: usize,
    /// Spline penalty; chosen from the measurement noise level when absent.
    pub smoothing: Option<f64>,
    /// Samples discarded at each end of the differentiated record.
    pub trim: usize,
    /// Shortest constant-input segment used as a steady-state point, s.
    pub steady_min_hold: f64,
    /// Trailing part of each such segment that is averaged, s.
    pub steady_window: f64,
}

impl Default for IdentifyConfig {
    fn default() -> Self {
        Self {
            threshold: DEFAULT_THRESHOLD,
            max_degree: 3,
            max_iters: DEFAULT_MAX_ITERS,
            smoothing: None,
            trim: 50,
            steady_min_hold: 6.0,
            steady_window: 2.0,
        }
    }
}

/// Everything a run needs besides its input files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Preset name (`P160`, `P220`) or path to an engine file.
    pub engine: String,
    /// Hz
    pub sample_rate: f64,
    /// kRPM; `0` disables quantization.
    pub quantization_step: f64,
    /// Gaussian sensor noise added before quantization, kRPM.
    pub noise_std: f64,
    pub seed: u64,
    /// s
    pub integrator_dt: f64,
    #[serde(rename = "signal")]
    pub signals: Vec<SignalSpec>,
    #[serde(rename = "failure")]
    pub failures: Vec<FailureEvent>,
    /// Held-out input used to validate identified models.
    #[serde(rename = "validation_signal")]
    pub validation_signals: Vec<SignalSpec>,
    pub identify: IdentifyConfig,
    pub refiner: RefinerConfig,
    pub observer: ObserverConfig,
    pub output_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            engine: "P220".into(),
            sample_rate: 100.0,
            quantization_step: DEFAULT_QUANTIZATION_STEP,
            noise_std: 0.0,
            seed: 0,
            integrator_dt: DEFAULT_INTEGRATOR_DT,
            signals: identification_schedule(),
            failures: vec![],
            validation_signals: validation_schedule(),
            identify: IdentifyConfig::default(),
            refiner: RefinerConfig::default(),
            observer: ObserverConfig::default(),
            output_dir: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str, origin: &Path) -> Result<Self> {
        let config: Self = parse_toml(text, origin)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&read_text(path)?, path)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.sample_rate
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sample_rate > 0.0 && self.sample_rate.is_finite()) {
            return Err(invalid(format!("sample_rate must be positive, got {}", self.sample_rate)));
        }
        if !(self.quantization_step >= 0.0) || !(self.noise_std >= 0.0) {
            return Err(invalid("quantization_step and noise_std must be non-negative"));
        }
        if !(self.integrator_dt > 0.0) {
            return Err(invalid("integrator_dt must be positive"));
        }
        if self.signals.is_empty() {
            return Err(invalid("at least one [[signal]] segment is required"));
        }
        for f in &self.failures {
            f.validate()?;
        }
        self.observer.validate()?;
        self.refiner.validate()?;
        // referenced engine files must exist
        self.engine()?;
        Ok(())
    }

    pub fn engine(&self) -> Result<Engine> {
        Engine::resolve(&self.engine)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signals::SignalKind;

    #[test]
    fn defaults_from_empty_file() {
        let c = ExperimentConfig::from_toml("", Path::new("c.toml")).unwrap();
        assert_eq!(c, ExperimentConfig::default());
        assert_eq!(c.dt(), 0.01);
    }

    #[test]
    fn parses_schedules_and_sections() {
        let text = r#"
engine = "P160"
seed = 4

[[signal]]
kind = "hold"
level = 30.0
duration = 30.0

[[failure]]
t_start = 10.0
duration = 10.0
c1_drop = 10.0
recovery_rate = 5.0

[observer]
k_c1 = 0.1
"#;
        let c = ExperimentConfig::from_toml(text, Path::new("c.toml")).unwrap();
        assert_eq!(c.engine, "P160");
        assert_eq!(c.signals, vec![SignalSpec::new(SignalKind::Hold { level: 30.0 }, 30.0)]);
        assert_eq!(c.failures[0].c1_drop, 10.0);
        assert_eq!(c.observer.k_c1, 0.1);
        let back = ExperimentConfig::from_toml(&c.to_toml(), Path::new("c.toml")).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn diagnostics_name_line_and_key() {
        let err = ExperimentConfig::from_toml("seed = 1\nsampel_rate = 50\n", Path::new("run.toml"))
            .unwrap_err()
            .to_string();
        assert!(err.contains("run.toml") && err.contains("line 2") && err.contains("sampel_rate"), "{err}");
        let err = ExperimentConfig::from_toml("engine = \"/missing/engine.toml\"\n", Path::new("run.toml"))
            .unwrap_err()
            .to_string();
        assert!(err.contains("/missing/engine.toml"), "{err}");
        assert!(ExperimentConfig::from_toml("sample_rate = 0\n", Path::new("run.toml")).is_err());
    }
}
