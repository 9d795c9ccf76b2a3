//! Experiments on top of the normal-form engine: the resonant-set measure
//! Monte Carlo, finite differences of the frequency map, and the long-time
//! stability run around a constructed torus.

pub mod error;
pub mod measure;
pub mod stability;

pub use error::{LabError, Result};
pub use measure::{
    enumerate_queries, frequency_derivative_check, keep_query, measure_estimate, FrequencyModel, KamRecipe,
    MeasureConfig, MeasureReport, ResonanceQuery, ThresholdMode,
};
pub use stability::{
    build_pipeline, stability_experiment, torus_distance, Pipeline, PipelineConfig, StabilityConfig, StabilityReport,
    Torus, TransformChain,
};
