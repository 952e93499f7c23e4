use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::signals::{U_MAX, U_MIN};

fn check_u(u: f64) -> Result<()> {
    if !(U_MIN..=U_MAX).contains(&u) {
        return Err(invalid(format!("input u = {u} outside [{U_MIN}, {U_MAX}]")));
    }
    Ok(())
}

/// `u^b` with the continuous limit `0^b = 0`.
fn input_power(u: f64, b: f64) -> f64 {
    if u > 0.0 {
        u.powf(b)
    } else {
        0.0
    }
}

/// Steady-state speed map `ω_ss(u) = a1·u^b1 + c1` (kRPM).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SteadyStateMap {
    pub a1: f64,
    pub b1: f64,
    /// Idle speed, kRPM.
    pub c1: f64,
}

impl SteadyStateMap {
    pub fn omega(&self, u: f64) -> f64 {
        self.a1 * input_power(u, self.b1) + self.c1
    }

    /// `f_ss(ω, u) = ω − a1·u^b1 − c1`; zero on the equilibrium manifold.
    pub fn residual(&self, omega: f64, u: f64) -> f64 {
        omega - self.a1 * input_power(u, self.b1) - self.c1
    }
}

/// Second-order ω–u model:
///
/// `ω̈ = K_ss (ω − a1 u^b1 − c1) + K_d ω̇ + K_wd ω ω̇ + K_wwd ω² ω̇`
///
/// with ω in kRPM, ω̇ in kRPM/s and `u ∈ [0, 100]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OmegaUModel {
    pub a1: f64,
    pub b1: f64,
    pub c1: f64,
    pub k_ss: f64,
    pub k_d: f64,
    pub k_wd: f64,
    pub k_wwd: f64,
}

impl OmegaUModel {
    pub fn new(steady: SteadyStateMap, k_ss: f64, k_d: f64, k_wd: f64, k_wwd: f64) -> Result<Self> {
        let model = Self {
            a1: steady.a1,
            b1: steady.b1,
            c1: steady.c1,
            k_ss,
            k_d,
            k_wd,
            k_wwd,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn steady_state(&self) -> SteadyStateMap {
        SteadyStateMap {
            a1: self.a1,
            b1: self.b1,
            c1: self.c1,
        }
    }

    /// Coefficients `[K_ss, K_d, K_wd, K_wwd]`.
    pub fn gains(&self) -> [f64; 4] {
        [self.k_ss, self.k_d, self.k_wd, self.k_wwd]
    }

    pub fn with_gains(&self, gains: [f64; 4]) -> Result<Self> {
        Self::new(self.steady_state(), gains[0], gains[1], gains[2], gains[3])
    }

    /// Upper end of the operating envelope, `ω_ss(100)`.
    pub fn omega_max(&self) -> f64 {
        self.steady_state().omega(U_MAX)
    }

    /// Velocity-feedback gain `K_d + K_wd ω + K_wwd ω²`.
    pub fn damping(&self, omega: f64) -> f64 {
        self.k_d + self.k_wd * omega + self.k_wwd * omega * omega
    }

    /// Checks parameter signs and that damping is negative over `[c1, ω_max]`.
    pub fn validate(&self) -> Result<()> {
        let fields = [self.a1, self.b1, self.c1, self.k_ss, self.k_d, self.k_wd, self.k_wwd];
        if fields.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidModel("non-finite coefficient".into()));
        }
        if !(self.c1 > 0.0) {
            return Err(Error::InvalidModel(format!("c1 must be positive, got {}", self.c1)));
        }
        if !(self.a1 > 0.0) {
            return Err(Error::InvalidModel(format!("a1 must be positive, got {}", self.a1)));
        }
        if !(self.b1 > 0.0 && self.b1 < 1.0) {
            return Err(Error::InvalidModel(format!("b1 must lie in (0, 1), got {}", self.b1)));
        }
        if !(self.k_ss < 0.0) {
            return Err(Error::InvalidModel(format!(
                "K_ss must be negative, got {}",
                self.k_ss
            )));
        }
        // a quadratic attains its maximum over an interval at an end point or the vertex
        let (lo, hi) = (self.c1, self.omega_max());
        let mut probes = vec![lo, hi];
        if self.k_wwd != 0.0 {
            let vertex = -self.k_wd / (2.0 * self.k_wwd);
            if vertex > lo && vertex < hi {
                probes.push(vertex);
            }
        }
        if let Some(&w) = probes.iter().find(|&&w| self.damping(w) >= 0.0) {
            return Err(Error::InvalidModel(format!(
                "damping K_d + K_wd ω + K_wwd ω² = {} is not negative at ω = {w:.3} kRPM",
                self.damping(w)
            )));
        }
        Ok(())
    }

    /// Right-hand side of the model with the idle constant replaced by `c1`.
    /// Unchecked; used inside integrators and filters.
    #[inline]
    pub fn accel(&self, omega: f64, omega_dot: f64, u: f64, c1: f64) -> f64 {
        self.k_ss * (omega - self.a1 * input_power(u, self.b1) - c1) + self.damping(omega) * omega_dot
    }

    /// `ω̈` for the given state and input, using `c1_override` as idle constant.
    pub fn eval_dynamics(&self, omega: f64, omega_dot: f64, u: f64, c1_override: f64) -> Result<f64> {
        check_u(u)?;
        if !(omega > 0.0) {
            return Err(invalid(format!("omega must be positive, got {omega}")));
        }
        Ok(self.accel(omega, omega_dot, u, c1_override))
    }

    /// Equilibrium speed for a constant input.
    pub fn steady_state_omega(&self, u: f64) -> Result<f64> {
        check_u(u)?;
        Ok(self.steady_state().omega(u))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("flat struct of floats serializes")
    }

    pub fn from_toml(text: &str, origin: &Path) -> Result<Self> {
        let model: Self = parse_toml(text, origin)?;
        model.validate()?;
        Ok(model)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&read_text(path)?, path)
    }
}

/// Static thrust map `T(ω) = a2·ω^b2 + c2` (N, ω in kRPM).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThrustMap {
    pub a2: f64,
    pub b2: f64,
    pub c2: f64,
}

impl ThrustMap {
    pub fn new(a2: f64, b2: f64, c2: f64) -> Result<Self> {
        let map = Self { a2, b2, c2 };
        map.validate()?;
        Ok(map)
    }

    pub fn validate(&self) -> Result<()> {
        if ![self.a2, self.b2, self.c2].iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidModel("non-finite thrust coefficient".into()));
        }
        if !(self.a2 > 0.0) {
            return Err(Error::InvalidModel(format!("a2 must be positive, got {}", self.a2)));
        }
        if !(self.b2 > 1.0) {
            return Err(Error::InvalidModel(format!("b2 must exceed 1, got {}", self.b2)));
        }
        Ok(())
    }

    /// Thrust in N; non-positive speeds map to the `ω → 0⁺` limit `c2`.
    pub fn thrust(&self, omega: f64) -> f64 {
        if omega > 0.0 {
            self.a2 * omega.powf(self.b2) + self.c2
        } else {
            self.c2
        }
    }

    /// `dT/dt = a2·b2·ω^(b2−1)·ω̇` in N/s.
    pub fn thrust_rate(&self, omega: f64, omega_dot: f64) -> f64 {
        if omega > 0.0 {
            self.a2 * self.b2 * omega.powf(self.b2 - 1.0) * omega_dot
        } else {
            0.0
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("flat struct of floats serializes")
    }

    pub fn from_toml(text: &str, origin: &Path) -> Result<Self> {
        let map: Self = parse_toml(text, origin)?;
        map.validate()?;
        Ok(map)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&read_text(path)?, path)
    }
}

/// Manufacturer ratings of an engine.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineSpec {
    pub name: String,
    pub omega_idle: f64,
    pub omega_max: f64,
    pub thrust_idle: f64,
    pub thrust_max: f64,
}

impl EngineSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.omega_idle < self.omega_max) {
            return Err(Error::InvalidModel(format!(
                "idle speed {} must be below max speed {}",
                self.omega_idle, self.omega_max
            )));
        }
        if !(self.thrust_idle < self.thrust_max) {
            return Err(Error::InvalidModel(format!(
                "idle thrust {} must be below max thrust {}",
                self.thrust_idle, self.thrust_max
            )));
        }
        Ok(())
    }

    /// `ω_max − ω_idle`, the reference for speed error percentages.
    pub fn speed_range(&self) -> f64 {
        self.omega_max - self.omega_idle
    }
}

/// An engine: ratings plus ground-truth ω–u model and thrust map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Engine {
    #[serde(flatten)]
    pub spec: EngineSpec,
    pub omega_u: OmegaUModel,
    pub thrust: ThrustMap,
}

const P160: &str = include_str!("../../engines/p160.toml");
const P220: &str = include_str!("../../engines/p220.toml");

impl Engine {
    pub fn from_toml(text: &str, origin: &Path) -> Result<Self> {
        let engine: Self = parse_toml(text, origin)?;
        engine.spec.validate()?;
        engine.omega_u.validate()?;
        engine.thrust.validate()?;
        Ok(engine)
    }

    /// Built-in preset by name (`P160`, `P220`; case-insensitive).
    pub fn preset(name: &str) -> Option<Self> {
        let text = match name.to_ascii_uppercase().as_str() {
            "P160" => P160,
            "P220" => P220,
            _ => return None,
        };
        Some(Self::from_toml(text, Path::new(name)).expect("bundled presets are valid"))
    }

    pub fn p160() -> Self {
        Self::preset("P160").unwrap()
    }

    pub fn p220() -> Self {
        Self::preset("P220").unwrap()
    }

    /// Preset name or path to an engine file.
    pub fn resolve(name_or_path: &str) -> Result<Self> {
        if let Some(engine) = Self::preset(name_or_path) {
            return Ok(engine);
        }
        let path = Path::new(name_or_path);
        Self::from_toml(&read_text(path)?, path)
    }
}

pub(crate) fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn parse_toml<T: serde::de::DeserializeOwned>(text: &str, origin: &Path) -> Result<T> {
    toml::from_str(text).map_err(|e| Error::Config {
        path: origin.to_path_buf(),
        message: e.to_string().trim_end().to_string(),
    })
}
