//! Low-level actuation: bend state to cable commands, phase-shifted sinusoidal
//! drive, a deterministic simulated motor backend with torque-limit
//! detection, and the serial wire codec for the hardware base.

pub mod codec;
mod log;
mod sim;

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

pub use self::log::{TrajectoryLog, TrajectoryRecord};
pub use self::sim::{FaultEvent, SerialBackend, SimBackend, StepReport};

use crate::kinematics::{cable_displacement, BendState, KinematicsError, PlaneKey, PuppetModel};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ActuationError {
    #[error("no motor channel drives plane `{0}`")]
    UnmappedPlane(PlaneKey),
    #[error("unknown channel {0}")]
    UnknownChannel(u8),
    #[error("time step must be positive, got {0}")]
    InvalidTimeStep(f64),
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
    #[error("serial write failed: {0}")]
    Io(String),
}

/// One motor channel and the bend plane it pulls.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MotorChannelConfig {
    pub channel_id: u8,
    pub target: PlaneKey,
    pub displacement_limit_mm: f64,
    pub velocity_limit_mm_s: f64,
    /// Abstract torque unit.
    pub torque_limit: f64,
    /// Simulated torque per millimetre of tracking error.
    pub torque_gain: f64,
}

impl MotorChannelConfig {
    /// Channel with the default demo limits.
    pub fn demo(channel_id: u8, target: PlaneKey) -> Self {
        Self {
            channel_id,
            target,
            displacement_limit_mm: 25.0,
            velocity_limit_mm_s: 200.0,
            torque_limit: 25.0,
            torque_gain: 1.0,
        }
    }

    /// One demo channel per plane of `model`, numbered from 1.
    pub fn demo_channels(model: &PuppetModel) -> Vec<Self> {
        model
            .plane_keys()
            .into_iter()
            .enumerate()
            .map(|(i, key)| Self::demo(i as u8 + 1, key))
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MotorCommand {
    pub channel_id: u8,
    pub target_displacement_mm: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelTelemetry {
    pub channel_id: u8,
    pub position_mm: f64,
    pub velocity_mm_s: f64,
    pub torque_estimate: f64,
    pub faulted: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SinusoidSpec {
    pub amplitude_mm: f64,
    pub freq_hz: f64,
    pub phase_rad: f64,
    pub offset_mm: f64,
}

impl SinusoidSpec {
    pub fn with_phase(self, phase_rad: f64) -> Self {
        Self { phase_rad, ..self }
    }
}

pub fn evaluate_sinusoid(spec: &SinusoidSpec, t_s: f64) -> f64 {
    spec.amplitude_mm * (TAU * spec.freq_hz * t_s + spec.phase_rad).sin() + spec.offset_mm
}

/// `count` copies of `base`, channel `k` lagging by `k * phase_step_rad`.
pub fn phase_shifted_bank(base: SinusoidSpec, count: usize, phase_step_rad: f64) -> Vec<SinusoidSpec> {
    (0..count)
        .map(|k| base.with_phase(base.phase_rad + k as f64 * phase_step_rad))
        .collect()
}

/// Samples a sinusoid per channel at `t_s`, clamped to each channel's limit.
pub fn sinusoid_commands(
    channels: &[MotorChannelConfig],
    drives: &[(u8, SinusoidSpec)],
    t_s: f64,
) -> Result<Vec<MotorCommand>, ActuationError> {
    drives
        .iter()
        .map(|(id, spec)| {
            let ch = channels
                .iter()
                .find(|c| c.channel_id == *id)
                .ok_or(ActuationError::UnknownChannel(*id))?;
            Ok(MotorCommand {
                channel_id: *id,
                target_displacement_mm: clamp_displacement(ch, evaluate_sinusoid(spec, t_s)),
            })
        })
        .collect()
}

/// What to do with a bent plane that no channel drives.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnmappedPolicy {
    #[default]
    Error,
    Ignore,
}

fn clamp_displacement(ch: &MotorChannelConfig, mm: f64) -> f64 {
    mm.clamp(-ch.displacement_limit_mm, ch.displacement_limit_mm)
}

/// One command per channel: the cable displacement of its plane, clamped to
/// the channel's displacement limit. Planes missing from `state` are straight.
pub fn map_bend_to_commands(
    model: &PuppetModel,
    channels: &[MotorChannelConfig],
    state: &BendState,
    policy: UnmappedPolicy,
) -> Result<Vec<MotorCommand>, ActuationError> {
    if policy == UnmappedPolicy::Error {
        if let Some(key) = state.keys().find(|k| !channels.iter().any(|c| &c.target == *k)) {
            return Err(ActuationError::UnmappedPlane(key.clone()));
        }
    }
    channels
        .iter()
        .map(|ch| {
            let (seg, _) = model
                .plane(&ch.target)
                .ok_or_else(|| KinematicsError::UnknownPlane(ch.target.to_string()))?;
            let bend = state.get(&ch.target).unwrap_or(0.0);
            let mm = cable_displacement(seg, &ch.target.plane, bend)?;
            Ok(MotorCommand {
                channel_id: ch.channel_id,
                target_displacement_mm: clamp_displacement(ch, mm),
            })
        })
        .collect()
}

/// A motor base that executes commands one fixed step at a time.
pub trait ActuatorBackend: Send {
    fn apply(&mut self, commands: &[MotorCommand], dt_s: f64) -> Result<StepReport, ActuationError>;

    /// Clears latched faults; channels hold their current position.
    fn reset_faults(&mut self);

    fn telemetry(&self) -> Vec<ChannelTelemetry>;
}

/// Positions keyed by channel, for logging.
pub fn positions(telemetry: &[ChannelTelemetry]) -> BTreeMap<u8, f64> {
    telemetry.iter().map(|t| (t.channel_id, t.position_mm)).collect()
}
