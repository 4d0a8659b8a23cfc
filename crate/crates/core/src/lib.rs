//! Monte Carlo simulation and analysis of heralded spin-wave/photon
//! entanglement with a tunable write-pulse duration.
//!
//! - [`model`]: closed-form detection probabilities, g², polarization
//!   correlations and the CHSH prediction.
//! - [`trialsim`]: seeded, partition-invariant trial engine producing
//!   time-tagged [`EventLog`]s; [`eventlog`] reads and writes them as JSON Lines.
//! - [`analysis`]: estimators with counting-statistics uncertainties.
//! - [`fitting`]: calibration-curve fits (background slope, memory decay,
//!   readout branching ratio, visibility).
//! - [`pipeline`]: runs the campaigns for one configuration and reduces them.

// `!(x > 0.0)` is used on purpose so NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod error;
pub mod eventlog;
pub mod fitting;
pub mod model;
pub mod params;
pub mod pipeline;
pub mod rng;
pub mod trialsim;

pub use analysis::{BellEstimate, CountsTable, EstimateWithError, SettingCounts};
pub use error::{Error, Result};
pub use fitting::{FitParameter, FitResult, SweepPoint};
pub use params::{AngleSettings, Envelope, ExperimentParams, GammaTable, Setting};
pub use pipeline::{MeasurementPlan, PointMeasurement, Summary};
pub use trialsim::{Channel, DetectionEvent, Detector, EventLog, LogHeader, TrialMode, Window};
