//! Delay-aware V2I platoon control toolkit.
//!
//! An RSU-hosted controller commands a platoon of M followers through a
//! shared communication/processing delay. This crate simulates the resulting
//! closed-loop delay differential equations, decides plant and string
//! stability of a gain choice, and plans the radio side: coverage, platoon
//! velocity and inter-site distance under a rate and handover budget.
//!
//! The `parallel` feature (on by default) runs sweeps and the
//! characteristic-root grid scan on rayon; without it everything falls back
//! to sequential loops with identical results.

pub mod dynamics;
pub mod error;
pub mod radio;
pub mod scenario;
pub mod stability;
pub mod types;
pub mod units;

pub use error::{Error, Result};
pub use types::{
    derive_lambda_eta, ControlGains, DisturbanceProfile, LambdaEta, PlatoonConfig, RadioParams,
    StabilityVerdict, Trajectory,
};
