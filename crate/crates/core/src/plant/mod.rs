//! The ω–u dynamics, the thrust map and the synthetic engine used as ground truth.

mod model;
mod simulate;

pub(crate) use model::{parse_toml, read_text};
pub use model::{Engine, EngineSpec, OmegaUModel, SteadyStateMap, ThrustMap};
pub use simulate::{
    simulate, simulate_with, FailureEvent, PlantState, SimOptions, SimulationLog,
    DEFAULT_INTEGRATOR_DT, DEFAULT_QUANTIZATION_STEP,
};
