//! Path smoothing, arrest detection, arena-boundary estimation and
//! simulation tools for rodent open-field tracking data.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop, clippy::single_range_in_vec_init)]

pub mod arena;
pub mod error;
pub mod io;
pub mod kinematics;
pub mod local_fit;
pub mod pipeline;
pub mod radius_mse;
pub mod rrm;
pub mod simulator;
pub mod stats;

pub use arena::{distance_from_wall, estimate_boundary, BoundaryCurve, BoundaryEstimate, BoundaryParams, CenterEstimate};
pub use error::{Error, Result};
pub use io::{parse_session, run_pipeline, write_session, ResultBundle, SessionConfig};
pub use kinematics::{smooth_path, KinematicSeries, LowessParams, RawPath};
pub use pipeline::{smooth_session, EndpointSummary, Segment, SegmentKind, SegmentList, SmoothedSession, SmootherParams};
pub use radius_mse::{Estimator, RadialLaw, RadialModel};
pub use rrm::{repeated_running_median, ArrestMask, RrmSchedule};
pub use simulator::{Method, Scenario, SimulatedPath, SimulationMetrics};
