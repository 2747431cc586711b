//! Climate networks of extreme events built with event synchronization,
//! corrected for spatial boundary effects with surrogate network ensembles.
//!
//! The pipeline runs in stages, each in its own module:
//!
//! * [`grid_io`]: gridded daily series, seasonal extraction and the on-disk
//!   artifact formats.
//! * [`events`]: percentile thresholds and extreme-event series.
//! * [`sync`]: event synchronization, the shuffle null model and network
//!   construction.
//! * [`netmetrics`]: degree, clustering, mean geographic distance and
//!   betweenness.
//! * [`surrogate`]: distance-dependent link probability and surrogate
//!   ensembles.
//! * [`correction`]: subtraction and division corrections with min-max
//!   normalization.
//! * [`stats`]: paired t-test, two-sample Kolmogorov-Smirnov test and the
//!   method comparison report.
//! * [`synth`]: seeded synthetic inputs with known structure.

pub mod correction;
pub mod error;
pub mod events;
pub mod grid_io;
pub mod netmetrics;
pub mod network;
pub mod rng;
pub mod stats;
pub mod surrogate;
pub mod sync;
pub mod synth;

pub use error::{Error, Result};
pub use events::{EventSeries, ThresholdSpec};
pub use grid_io::{GridSpec, GriddedSeries, Season};
pub use netmetrics::{Metric, MetricField};
pub use network::Network;
