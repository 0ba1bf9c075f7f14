//! Decomposition of non-stationary time series into time-windowed sinusoids
//! by evolving binary-encoded parameter sets with a genetic algorithm.

pub mod cli;
pub mod decomposition;
pub mod encoding;
pub mod error;
pub mod ga;
pub mod io;
pub mod local_search;
pub mod signal;

pub use decomposition::{
    decompose_adaptive, decompose_fixed, profile_to_windows, windows_to_profile, AdaptiveConfig,
    CountProfile, DecompositionResult,
};
pub use encoding::{
    bit_count, build_layout, decode_components, decode_field, encode_components, encode_field,
    Chromosome, ChromosomeLayout, ComponentSpecs, ParameterSpec,
};
pub use error::{Error, Result};
pub use ga::{ConvergenceTrace, GaConfig, Individual};
pub use signal::{
    component_value, fitness, instantaneous_profile, residual, synthesize, Grid,
    InstantaneousProfile, Norm, SinusoidalComponent, TimeSeries,
};
