use std::io::Write;

use serde::{Deserialize, Serialize};

use super::codec::{encode_frame, mm_to_um, Payload};
use super::{ActuationError, ActuatorBackend, ChannelTelemetry, MotorChannelConfig, MotorCommand};

/// A channel tripped its torque limit on this step.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FaultEvent {
    pub channel_id: u8,
    pub torque_estimate: f64,
    pub torque_limit: f64,
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct StepReport {
    pub telemetry: Vec<ChannelTelemetry>,
    /// Channels that faulted during this step (not those already latched).
    pub faults: Vec<FaultEvent>,
}

#[derive(Clone, Debug)]
struct SimChannel {
    config: MotorChannelConfig,
    position_mm: f64,
    velocity_mm_s: f64,
    target_mm: f64,
    torque: f64,
    faulted: bool,
}

impl SimChannel {
    fn telemetry(&self) -> ChannelTelemetry {
        ChannelTelemetry {
            channel_id: self.config.channel_id,
            position_mm: self.position_mm,
            velocity_mm_s: self.velocity_mm_s,
            torque_estimate: self.torque,
            faulted: self.faulted,
        }
    }
}

/// Rate-limited first-order tracking per channel.
///
/// Each step the tracking error is turned into a torque estimate
/// (`torque_gain * |target - position|`). Above the limit the channel
/// latches a fault and holds position; otherwise it moves toward the target
/// by at most `velocity_limit * dt`. Targets persist between commands.
#[derive(Clone, Debug)]
pub struct SimBackend {
    channels: Vec<SimChannel>,
}

impl SimBackend {
    pub fn new(configs: &[MotorChannelConfig]) -> Self {
        let mut channels: Vec<SimChannel> = configs
            .iter()
            .map(|c| SimChannel {
                config: c.clone(),
                position_mm: 0.0,
                velocity_mm_s: 0.0,
                target_mm: 0.0,
                torque: 0.0,
                faulted: false,
            })
            .collect();
        channels.sort_by_key(|c| c.config.channel_id);
        Self { channels }
    }

    /// Overrides a channel's position and target (for setting up scenarios).
    pub fn set_position(&mut self, channel_id: u8, position_mm: f64) -> Result<(), ActuationError> {
        let ch = self.channel_mut(channel_id)?;
        ch.position_mm = position_mm;
        ch.target_mm = position_mm;
        Ok(())
    }

    fn channel_mut(&mut self, channel_id: u8) -> Result<&mut SimChannel, ActuationError> {
        self.channels
            .iter_mut()
            .find(|c| c.config.channel_id == channel_id)
            .ok_or(ActuationError::UnknownChannel(channel_id))
    }

    pub fn step(&mut self, commands: &[MotorCommand], dt_s: f64) -> Result<StepReport, ActuationError> {
        if !(dt_s > 0.0 && dt_s.is_finite()) {
            return Err(ActuationError::InvalidTimeStep(dt_s));
        }
        if let Some(bad) = commands
            .iter()
            .find(|cmd| !self.channels.iter().any(|c| c.config.channel_id == cmd.channel_id))
        {
            return Err(ActuationError::UnknownChannel(bad.channel_id));
        }
        for cmd in commands {
            self.channel_mut(cmd.channel_id)?.target_mm = cmd.target_displacement_mm;
        }

        let mut faults = Vec::new();
        for ch in &mut self.channels {
            let error = ch.target_mm - ch.position_mm;
            ch.torque = ch.config.torque_gain * error.abs();
            if ch.faulted {
                ch.velocity_mm_s = 0.0;
                continue;
            }
            if ch.torque > ch.config.torque_limit {
                ch.faulted = true;
                ch.velocity_mm_s = 0.0;
                faults.push(FaultEvent {
                    channel_id: ch.config.channel_id,
                    torque_estimate: ch.torque,
                    torque_limit: ch.config.torque_limit,
                });
                continue;
            }
            let max_step = ch.config.velocity_limit_mm_s * dt_s;
            let delta = error.clamp(-max_step, max_step);
            ch.position_mm += delta;
            ch.velocity_mm_s = delta / dt_s;
        }
        Ok(StepReport {
            telemetry: self.telemetry(),
            faults,
        })
    }

    pub fn telemetry(&self) -> Vec<ChannelTelemetry> {
        self.channels.iter().map(SimChannel::telemetry).collect()
    }

    pub fn reset_faults(&mut self) {
        for ch in &mut self.channels {
            ch.faulted = false;
            ch.target_mm = ch.position_mm;
            ch.torque = 0.0;
            ch.velocity_mm_s = 0.0;
        }
    }
}

impl ActuatorBackend for SimBackend {
    fn apply(&mut self, commands: &[MotorCommand], dt_s: f64) -> Result<StepReport, ActuationError> {
        self.step(commands, dt_s)
    }

    fn reset_faults(&mut self) {
        SimBackend::reset_faults(self)
    }

    fn telemetry(&self) -> Vec<ChannelTelemetry> {
        SimBackend::telemetry(self)
    }
}

/// Writes `SET_TARGET` frames to a serial link.
///
/// The link is write-only here, so telemetry is open loop: each channel
/// reports its last commanded target and never faults.
pub struct SerialBackend<W: Write + Send> {
    link: W,
    last: Vec<ChannelTelemetry>,
}

impl<W: Write + Send> SerialBackend<W> {
    pub fn new(link: W, configs: &[MotorChannelConfig]) -> Self {
        let mut last: Vec<ChannelTelemetry> = configs
            .iter()
            .map(|c| ChannelTelemetry {
                channel_id: c.channel_id,
                position_mm: 0.0,
                velocity_mm_s: 0.0,
                torque_estimate: 0.0,
                faulted: false,
            })
            .collect();
        last.sort_by_key(|t| t.channel_id);
        Self { link, last }
    }

    pub fn into_inner(self) -> W {
        self.link
    }
}

impl<W: Write + Send> ActuatorBackend for SerialBackend<W> {
    fn apply(&mut self, commands: &[MotorCommand], dt_s: f64) -> Result<StepReport, ActuationError> {
        if !(dt_s > 0.0 && dt_s.is_finite()) {
            return Err(ActuationError::InvalidTimeStep(dt_s));
        }
        for cmd in commands {
            let slot = self
                .last
                .iter_mut()
                .find(|t| t.channel_id == cmd.channel_id)
                .ok_or(ActuationError::UnknownChannel(cmd.channel_id))?;
            let frame = encode_frame(
                cmd.channel_id,
                &Payload::SetTarget {
                    target_um: mm_to_um(cmd.target_displacement_mm),
                },
            );
            self.link
                .write_all(&frame)
                .map_err(|e| ActuationError::Io(e.to_string()))?;
            slot.velocity_mm_s = (cmd.target_displacement_mm - slot.position_mm) / dt_s;
            slot.position_mm = cmd.target_displacement_mm;
        }
        self.link.flush().map_err(|e| ActuationError::Io(e.to_string()))?;
        Ok(StepReport {
            telemetry: self.last.clone(),
            faults: Vec::new(),
        })
    }

    fn reset_faults(&mut self) {}

    fn telemetry(&self) -> Vec<ChannelTelemetry> {
        self.last.clone()
    }
}
