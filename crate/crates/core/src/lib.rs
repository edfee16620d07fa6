//! Desk-scale laboratory for forecast-driven adaptive signal control.
//!
//! A single signalised intersection is simulated in one-second ticks
//! ([`sim`]), vehicle counts pass through a noisy detector ([`detector`]), an
//! LSTM forecasts the next hours of demand ([`forecast`]), and Webster's
//! cycle formula with a fuzzy adjustment turns the forecast into signal plans
//! ([`control`]). [`metrics`] scores a run and [`harness`] compares the
//! adaptive controller against fixed-time control on paired arrival streams.
//!
//! Timing, forecasting and metric formulas are generic over the scalar type
//! through [`Real`]; the simulator and scenario types use `f64`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod control;
pub mod detector;
pub mod error;
pub mod float;
pub mod forecast;
pub mod harness;
pub mod metrics;
pub mod scenario;
pub mod seed;
pub mod sim;

pub use control::{
    critical_volumes, fuzzy_adjust, green_splits, plan_for_interval, round_to_nearest_5,
    webster_cycle, webster_raw, CriticalVolumes, CycleLength,
};
pub use detector::DetectorModel;
pub use error::{Error, Result};
pub use float::Real;
pub use forecast::{
    build_features, evaluate, predict_horizon, FeatureVector, ForecastResult, HourlySeries,
};
pub use harness::{
    emit_report, generate_suite, run_comparison, ComparisonReport, ControllerKind, ExperimentConfig,
};
pub use metrics::{los_grade, Los, MetricsReport};
pub use scenario::{load_scenario, Approach, DemandProfile, Phase, Scenario, SignalPlan};
pub use sim::{run_simulation, FixedTime, SignalController, SimLog, VehicleRecord};

/// Double-precision forecaster.
pub type Lstm = forecast::LstmModel<f64>;
/// Single-precision forecaster.
pub type Lstm32 = forecast::LstmModel<f32>;
pub type ControlConfig = control::ControlConfig<f64>;
pub type ControlConfig32 = control::ControlConfig<f32>;
pub type FuzzyConfig = control::FuzzyConfig<f64>;
pub type FuzzyConfig32 = control::FuzzyConfig<f32>;
pub type Normalizer = forecast::Normalizer<f64>;
