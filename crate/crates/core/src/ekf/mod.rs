//! Discrete extended Kalman filtering: a generic fixed-size filter, the
//! augmented-state parameter refiner and the thrust observer with online
//! idle-speed estimation.

mod filter;
mod observer;
mod refine;

pub use filter::{ekf_step, jacobian, EkfInstance};
pub use observer::{
    observer_step, observer_transition, run_observer, EstimateLog, ObserverConfig, ObserverEstimate,
    ThrustObserver, ThrustObserverState,
};
pub use refine::{
    refine_parameters, refiner_transition, PassRecord, RefineDiagnostics, RefinerConfig, RefinerState,
};
