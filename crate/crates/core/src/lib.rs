//! Decentralized collaborative indoor tracking.
//!
//! Each simulated device dead-reckons from its inertial stream ([`inertial`],
//! [`pdr`]), detects nearby peers through a log-distance path-loss channel
//! ([`radio`]) and corrects accumulated drift with the accumulation-of-errors
//! exchange ([`collab`]). The [`replay`] engine drives many devices on a
//! shared clock and [`metrics`] scores the resulting trajectories against
//! groundtruth.

// `!(x > 0.0)` guards are used on purpose: they reject NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod collab;
pub mod export;
pub mod geodesy;
pub mod inertial;
pub mod metrics;
pub mod pdr;
pub mod radio;
pub mod replay;

pub use collab::{aoe_step, CollabConfig, DeviceState};
pub use geodesy::{haversine, intermediate_point, GeoPoint, LocalFrame};
pub use inertial::{InertialSample, PeakDetectorConfig, StepEvent};
pub use metrics::{MetricsReport, Trajectory};
pub use pdr::PdrState;
pub use radio::{AdvertisementPayload, PathLossModel};
pub use replay::{RunRecord, Scenario};
