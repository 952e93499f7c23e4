//! Sampled signals and the preprocessing used by identification and estimation.

mod generate;
mod quantize;
mod recording;
mod savgol;
pub(crate) mod series;
mod spline;

pub use generate::{
    generate, generate_schedule, identification_schedule, validation_schedule, FrequencyBand,
    SignalKind, SignalSpec, U_MAX, U_MIN,
};
pub use quantize::{quantize, quantize_value};
pub use recording::Recording;
pub use savgol::{savitzky_golay, SavitzkyGolay};
pub use series::TimeSeries;
pub use spline::{
    default_smoothing, discrepancy_smoothing, smooth_spline_derivatives, SplineDerivatives,
};
