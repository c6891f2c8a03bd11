//! Dynamic coded caching for multi-antenna networks: cache placement,
//! shared-cache delivery schedules, unicast fallback and DoF analytics.

pub mod cc_elevation;
pub mod dof_analytics;
pub mod error;
pub mod experiment;
pub mod export;
pub mod rational;
pub mod selftest;
pub mod system_model;
pub mod uc_scheduler;
pub mod virtual_scheduler;

pub use error::{Error, Result};
pub use rational::Rational;
pub use system_model::{NetworkSnapshot, PlacementMatrix, SystemParams, UserId};
