//! Radio resource allocation for V2V traffic inside a delimited
//! out-of-coverage area (DOCA).
//!
//! Base stations delimiting the area reserve part of the radio grid for
//! unschedulable ad hoc safety messages and pre-schedule the periodic
//! unicast traffic of vehicles about to enter, working purely from predicted
//! trajectories. This crate holds the analytic reservation math, the
//! pre-scheduler, and the simulation engine that measures how prediction
//! errors degrade the resulting schedules.

pub mod engine;
pub mod model;
pub mod reservation;
pub mod scheduler;

pub use engine::{run_scenario, KpiReport, ScenarioOutput};
pub use model::{ScenarioConfig, SpeedModel, Vehicle};
pub use scheduler::{run_batches, validate_schedule, Schedule};
