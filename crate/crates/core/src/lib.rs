//! Control stack for a cable-driven continuum puppet.
//!
//! Layers, bottom up: [`kinematics`] and [`actuation`] model the puppet and
//! its motors, [`gestures`] holds the affective gesture library, [`dsl`]
//! parses and schedules action sequences, [`perception`] turns utterances
//! into sequences, and [`orchestrator`] ties everything into one fixed-tick
//! loop with a [`console`] server for live operation.

pub mod actuation;
pub mod config;
pub mod console;
pub mod diagnostics;
pub mod dsl;
pub mod gestures;
pub mod kinematics;
pub mod orchestrator;
pub mod perception;
pub mod tolerance;
