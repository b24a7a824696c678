//! The affective expression loop: push-to-talk input, perception,
//! scheduling, gesture sampling, actuation and console broadcast in one
//! fixed-tick state machine.
//!
//! All loop state is owned by [`Orchestrator`] and changes only inside
//! [`Orchestrator::handle_event`] and [`Orchestrator::control_tick`].
//! Perception runs elsewhere and reports back through events.

pub mod protocol;
mod session;

use std::collections::{BTreeSet, VecDeque};
use std::io::Write;

use serde::{Deserialize, Serialize};
use serde_json::json;

pub use protocol::{ClientMessage, ConfigUpdate, PoseMessage, ServerMessage};
pub use session::{
    make_backend, run_live, run_session, run_session_with, LiveOptions, Perception, Script, ScriptEvent, SessionError,
    SessionOutput, SharedBuffer, SimOptions,
};

use crate::actuation::{
    map_bend_to_commands, positions, ActuationError, ActuatorBackend, ChannelTelemetry, MotorChannelConfig,
    TrajectoryLog, TrajectoryRecord, UnmappedPolicy,
};
use crate::config::{check_channels, AppConfig, BusyPolicy};
use crate::dsl::{build_schedule, compile_sequence, ResolveMode, SchedulerEvent, SchedulerState};
use crate::gestures::{GestureKind, GestureLibrary, IdleSway};
use crate::kinematics::{forward_kinematics, validate_model, BendState, PuppetModel};
use crate::perception::{PerceptResult, ResponderOutput};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Idle,
    Listening,
    Processing,
    Performing,
    Faulted,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum SessionEvent {
    PttStart,
    PttStop { utterance: String },
    PerceptReady(PerceptResult),
    SequenceReady(ResponderOutput),
    TriggerGesture { name: String, number_s: Option<f64> },
    Preempt { text: String },
    FaultRaised { channel: u8 },
    Reset,
    SequenceFinished,
    UpdateConfig(ConfigUpdate),
}

impl SessionEvent {
    fn name(&self) -> &'static str {
        match self {
            SessionEvent::PttStart => "ptt_start",
            SessionEvent::PttStop { .. } => "ptt_stop",
            SessionEvent::PerceptReady(_) => "percept_ready",
            SessionEvent::SequenceReady(_) => "sequence_ready",
            SessionEvent::TriggerGesture { .. } => "trigger_gesture",
            SessionEvent::Preempt { .. } => "preempt",
            SessionEvent::FaultRaised { .. } => "fault_raised",
            SessionEvent::Reset => "reset",
            SessionEvent::SequenceFinished => "sequence_finished",
            SessionEvent::UpdateConfig(_) => "update_config",
        }
    }
}

/// Converts a console message into loop events.
pub fn client_events(msg: ClientMessage) -> Vec<SessionEvent> {
    match msg {
        ClientMessage::Utterance { text } => vec![SessionEvent::PttStart, SessionEvent::PttStop { utterance: text }],
        ClientMessage::PttStart => vec![SessionEvent::PttStart],
        ClientMessage::PttStop { text } => vec![SessionEvent::PttStop { utterance: text }],
        ClientMessage::TriggerGesture { name, number_s } => vec![SessionEvent::TriggerGesture { name, number_s }],
        ClientMessage::Preempt { sequence } => vec![SessionEvent::Preempt { text: sequence }],
        ClientMessage::UpdateConfig(u) => vec![SessionEvent::UpdateConfig(u)],
        ClientMessage::Reset => vec![SessionEvent::Reset],
    }
}

/// Work the loop hands to the perception layer.
#[derive(Clone, Debug, PartialEq)]
pub enum Command {
    Transcribe { utterance: String },
    Respond { percept: PerceptResult },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExecutedSequence {
    pub t_s: f64,
    pub source: String,
    pub raw: String,
    pub sequence: String,
    pub repairs: Vec<crate::dsl::RepairNote>,
    pub queued: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rejection {
    pub t_s: f64,
    pub input: String,
    pub code: String,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FaultRecord {
    pub tick: u64,
    pub t_s: f64,
    pub channel: u8,
    pub torque_estimate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionReport {
    pub ticks: u64,
    pub duration_s: f64,
    pub sequences: Vec<ExecutedSequence>,
    pub rejections: Vec<Rejection>,
    pub faults: Vec<FaultRecord>,
    pub ignored_events: u64,
    pub final_phase: Phase,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TickOutput {
    pub tick: u64,
    pub telemetry: Vec<ChannelTelemetry>,
    pub messages: Vec<ServerMessage>,
}

pub type LogSink = Box<dyn Write + Send>;

pub struct Orchestrator {
    model: PuppetModel,
    library: GestureLibrary,
    channels: Vec<MotorChannelConfig>,
    busy_policy: BusyPolicy,
    dt_s: f64,
    seed: u64,
    phase: Phase,
    scheduler: SchedulerState,
    idle: Option<IdleSway>,
    idle_since_s: f64,
    backend: Box<dyn ActuatorBackend>,
    log: Option<TrajectoryLog<LogSink>>,
    tick: u64,
    pending: VecDeque<SessionEvent>,
    queued: VecDeque<ResponderOutput>,
    capturing: bool,
    awaiting_response: bool,
    last_pose: BendState,
    faulted: BTreeSet<u8>,
    outbox: Vec<ServerMessage>,
    report: SessionReport,
}

impl Orchestrator {
    pub fn new(config: &AppConfig, backend: Box<dyn ActuatorBackend>, log: Option<LogSink>) -> Self {
        let idle = config.library.idle().map(|s| IdleSway::new(s.clone(), config.seed));
        let last_pose = config.library.neutral_pose(&config.model);
        Self {
            model: config.model.clone(),
            library: config.library.clone(),
            channels: config.channels.clone(),
            busy_policy: config.busy_policy,
            dt_s: config.dt_s(),
            seed: config.seed,
            phase: Phase::Idle,
            scheduler: SchedulerState::new(),
            idle,
            idle_since_s: 0.0,
            backend,
            log: log.map(TrajectoryLog::new),
            tick: 0,
            pending: VecDeque::new(),
            queued: VecDeque::new(),
            capturing: false,
            awaiting_response: false,
            last_pose,
            faulted: BTreeSet::new(),
            outbox: Vec::new(),
            report: SessionReport {
                ticks: 0,
                duration_s: 0.0,
                sequences: Vec::new(),
                rejections: Vec::new(),
                faults: Vec::new(),
                ignored_events: 0,
                final_phase: Phase::Idle,
            },
        }
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn tick_index(&self) -> u64 {
        self.tick
    }

    pub fn dt_s(&self) -> f64 {
        self.dt_s
    }

    /// Virtual time of the next tick.
    pub fn now_s(&self) -> f64 {
        self.tick as f64 * self.dt_s
    }

    pub fn model(&self) -> &PuppetModel {
        &self.model
    }

    pub fn library(&self) -> &GestureLibrary {
        &self.library
    }

    pub fn scheduler(&self) -> &SchedulerState {
        &self.scheduler
    }

    pub fn last_pose(&self) -> &BendState {
        &self.last_pose
    }

    pub fn awaiting_response(&self) -> bool {
        self.awaiting_response
    }

    /// Nothing is playing, pending or in flight.
    pub fn is_quiescent(&self) -> bool {
        matches!(self.phase, Phase::Idle | Phase::Faulted)
            && self.pending.is_empty()
            && !self.awaiting_response
            && !self.capturing
    }

    pub fn report(&self) -> SessionReport {
        let mut r = self.report.clone();
        r.ticks = self.tick;
        r.duration_s = self.now_s();
        r.final_phase = self.phase;
        r
    }

    /// Flushes and returns the trajectory log sink.
    pub fn finish(self) -> std::io::Result<(SessionReport, Option<LogSink>)> {
        let report = self.report();
        let log = self.log.map(|l| l.into_inner()).transpose()?;
        Ok((report, log))
    }

    /// Messages produced by events since the last tick.
    pub fn take_messages(&mut self) -> Vec<ServerMessage> {
        std::mem::take(&mut self.outbox)
    }

    fn set_phase(&mut self, to: Phase) {
        if to == self.phase {
            return;
        }
        let from = self.phase;
        self.phase = to;
        if to == Phase::Idle {
            self.idle_since_s = self.now_s();
        }
        log::debug!("phase {from:?} -> {to:?} at {:.3}s", self.now_s());
        self.outbox.push(ServerMessage::event(
            "phase_changed",
            json!({ "from": from, "to": to, "t_s": self.now_s() }),
        ));
    }

    fn ignore(&mut self, event: &SessionEvent) {
        log::info!("ignored {} in {:?}", event.name(), self.phase);
        self.report.ignored_events += 1;
        self.outbox.push(ServerMessage::event(
            "ignored",
            json!({ "event": event.name(), "phase": self.phase }),
        ));
    }

    fn reject(&mut self, input: &str, code: &str, message: String) {
        log::warn!("rejected `{input}`: {message}");
        self.outbox.push(ServerMessage::event(
            "rejected",
            json!({ "input": input, "code": code, "message": message }),
        ));
        self.report.rejections.push(Rejection {
            t_s: self.now_s(),
            input: input.to_string(),
            code: code.to_string(),
            message,
        });
    }

    fn start(&mut self, out: &ResponderOutput, source: &str, blend: bool) {
        let timeline = build_schedule(&out.sequence);
        if blend {
            self.scheduler.preempt(timeline, self.last_pose.clone());
        } else {
            self.scheduler.install(timeline);
        }
        self.report.sequences.push(ExecutedSequence {
            t_s: self.now_s(),
            source: source.to_string(),
            raw: out.raw_text.clone(),
            sequence: out.sequence.to_text(),
            repairs: out.repairs.clone(),
            queued: false,
        });
        if self.scheduler.is_active() {
            self.set_phase(Phase::Performing);
        } else {
            self.finish_sequence();
        }
    }

    fn finish_sequence(&mut self) {
        if let Some(next) = self.queued.pop_front() {
            self.start(&next, "queue", false);
        } else if self.awaiting_response {
            self.set_phase(Phase::Processing);
        } else {
            self.set_phase(Phase::Idle);
        }
    }

    /// Sequence text for a single triggered gesture: discrete gestures get
    /// no trailing pause, continuous ones play one period.
    fn trigger_text(&self, name: &str, number_s: Option<f64>) -> Option<String> {
        let def = self.library.resolve(name)?;
        let n = number_s.unwrap_or(match def.kind {
            GestureKind::Discrete => 0.0,
            GestureKind::Continuous => def.nominal_duration_s,
        });
        Some(format!("[{}][{}]", def.name, crate::dsl::format_number(n)))
    }

    fn operator_sequence(&mut self, text: &str, source: &str) {
        match compile_sequence(text, &self.library, ResolveMode::Strict) {
            Ok(seq) => {
                let out = ResponderOutput {
                    raw_text: text.to_string(),
                    sequence: seq,
                    repairs: Vec::new(),
                };
                self.outbox.push(ServerMessage::echo(text, &out.sequence, &[]));
                self.start(&out, source, true);
            }
            Err(e) => self.reject(text, e.code(), e.to_string()),
        }
    }

    /// Starts `sequence` at once with no blend. Ignored while faulted.
    pub fn play(&mut self, raw: &str, sequence: crate::dsl::ResolvedSequence) -> bool {
        if self.phase == Phase::Faulted {
            return false;
        }
        let out = ResponderOutput {
            raw_text: raw.to_string(),
            sequence,
            repairs: Vec::new(),
        };
        self.outbox.push(ServerMessage::echo(raw, &out.sequence, &[]));
        self.start(&out, "play", false);
        true
    }

    /// Applies one event. Returned commands must be run by the caller; their
    /// results come back as further events.
    pub fn handle_event(&mut self, event: SessionEvent) -> Vec<Command> {
        use Phase::*;
        let mut commands = Vec::new();
        match (self.phase, event) {
            (_, SessionEvent::FaultRaised { channel }) => {
                self.faulted.insert(channel);
                if self.phase != Faulted {
                    self.scheduler.cancel();
                    self.queued.clear();
                    self.capturing = false;
                    self.awaiting_response = false;
                    self.set_phase(Faulted);
                }
            }
            (_, SessionEvent::Reset) => {
                self.backend.reset_faults();
                self.faulted.clear();
                self.scheduler.cancel();
                self.queued.clear();
                self.capturing = false;
                self.awaiting_response = false;
                self.set_phase(Idle);
            }
            (_, SessionEvent::UpdateConfig(update)) => self.update_config(update),
            (Idle, SessionEvent::PttStart) => self.set_phase(Listening),
            (Performing, SessionEvent::PttStart) => self.capturing = true,
            (Listening, SessionEvent::PttStop { utterance }) => {
                self.awaiting_response = true;
                self.set_phase(Processing);
                commands.push(Command::Transcribe { utterance });
            }
            (Performing, SessionEvent::PttStop { utterance }) if self.capturing => {
                self.capturing = false;
                self.awaiting_response = true;
                commands.push(Command::Transcribe { utterance });
            }
            (Processing | Performing, SessionEvent::PerceptReady(percept)) if self.awaiting_response => {
                self.outbox.push(ServerMessage::event("percept", json!(percept)));
                commands.push(Command::Respond { percept });
            }
            (Processing | Performing, SessionEvent::SequenceReady(out)) if self.awaiting_response => {
                self.awaiting_response = false;
                self.outbox
                    .push(ServerMessage::echo(&out.raw_text, &out.sequence, &out.repairs));
                if out.sequence.is_empty() {
                    self.reject(&out.raw_text, "EmptySequence", "no executable items".into());
                    if self.phase == Processing {
                        self.set_phase(Idle);
                    }
                } else if self.phase == Performing {
                    match self.busy_policy {
                        BusyPolicy::Preempt => self.start(&out, "utterance", true),
                        BusyPolicy::Queue => {
                            self.report.sequences.push(ExecutedSequence {
                                t_s: self.now_s(),
                                source: "utterance".into(),
                                raw: out.raw_text.clone(),
                                sequence: out.sequence.to_text(),
                                repairs: out.repairs.clone(),
                                queued: true,
                            });
                            self.queued.push_back(out);
                        }
                    }
                } else {
                    self.start(&out, "utterance", false);
                }
            }
            (Performing, SessionEvent::SequenceFinished) => self.finish_sequence(),
            (phase, SessionEvent::TriggerGesture { name, number_s }) if phase != Faulted => {
                match self.trigger_text(&name, number_s) {
                    Some(text) => self.operator_sequence(&text, "trigger"),
                    None => self.reject(&name, "UnknownGesture", format!("unknown gesture `{name}`")),
                }
            }
            (phase, SessionEvent::Preempt { text }) if phase != Faulted => self.operator_sequence(&text, "preempt"),
            (_, event) => self.ignore(&event),
        }
        commands
    }

    fn update_config(&mut self, update: ConfigUpdate) {
        let model = update.model.clone().unwrap_or_else(|| self.model.clone());
        let channels = update.channels.clone().unwrap_or_else(|| self.channels.clone());
        let mut errors: Vec<String> = validate_model(&model).iter().map(ToString::to_string).collect();
        let library = match update.gestures.clone() {
            Some(doc) => match GestureLibrary::from_document(doc) {
                Ok(lib) => Some(lib),
                Err(e) => {
                    errors.extend(e.diagnostics().iter().map(ToString::to_string));
                    if e.diagnostics().is_empty() {
                        errors.push(e.to_string());
                    }
                    None
                }
            },
            None => Some(self.library.clone()),
        };
        if errors.is_empty() {
            if let Some(lib) = &library {
                errors.extend(lib.check_against(&model).iter().map(ToString::to_string));
            }
            errors.extend(check_channels(&model, &channels).iter().map(ToString::to_string));
        }
        if !errors.is_empty() {
            self.outbox.push(ServerMessage::ConfigAck { ok: false, errors });
            return;
        }
        let library = library.expect("checked above");
        let model_changed = model != self.model || channels != self.channels;
        self.model = model;
        self.channels = channels;
        self.idle = library.idle().map(|s| IdleSway::new(s.clone(), self.seed));
        self.library = library;
        self.scheduler.clear_cache();
        if model_changed {
            // running trajectories and the held pose may name removed planes
            self.scheduler.cancel();
            self.queued.clear();
            self.last_pose = self.library.neutral_pose(&self.model);
            if self.phase != Phase::Faulted {
                self.set_phase(if self.awaiting_response {
                    Phase::Processing
                } else {
                    Phase::Idle
                });
            }
        }
        self.outbox.push(ServerMessage::ConfigAck {
            ok: true,
            errors: Vec::new(),
        });
    }

    fn scheduler_message(e: &SchedulerEvent) -> ServerMessage {
        match e {
            SchedulerEvent::GestureStarted { gesture, at_s } => {
                ServerMessage::event("gesture_started", json!({ "gesture": gesture, "at_s": at_s }))
            }
            SchedulerEvent::GestureFinished { gesture, at_s } => {
                ServerMessage::event("gesture_finished", json!({ "gesture": gesture, "at_s": at_s }))
            }
            SchedulerEvent::SequencePreempted => ServerMessage::event("sequence_preempted", json!({})),
            SchedulerEvent::SequenceFinished => ServerMessage::event("sequence_finished", json!({})),
        }
    }

    fn pose_message(&self, phase: Phase, t_s: f64, pose: &BendState) -> PoseMessage {
        let frames = forward_kinematics(&self.model, pose).unwrap_or_default();
        let point = |f: &crate::kinematics::Frame| {
            let p = f.position_mm;
            [p.x, p.y, p.z]
        };
        PoseMessage {
            tick: self.tick,
            t_s,
            phase,
            angles_deg: pose.clone(),
            tips_mm: frames
                .iter()
                .filter_map(|(k, v)| v.last().map(|f| (k.clone(), point(f))))
                .collect(),
            polylines_mm: frames
                .iter()
                .map(|(k, v)| (k.clone(), v.iter().map(point).collect()))
                .collect(),
            faulted_channels: self.faulted.iter().copied().collect(),
        }
    }

    /// Advances the loop by one fixed step.
    pub fn control_tick(&mut self) -> Result<TickOutput, ActuationError> {
        while let Some(e) = self.pending.pop_front() {
            let cmds = self.handle_event(e);
            debug_assert!(cmds.is_empty(), "internal events never dispatch perception");
        }
        let t_s = self.now_s();
        let phase = self.phase;
        let mut finished = false;
        let pose = match phase {
            Phase::Performing => {
                let out = self.scheduler.tick(&self.library, &self.model, self.dt_s);
                for e in &out.events {
                    self.outbox.push(Self::scheduler_message(e));
                    finished |= *e == SchedulerEvent::SequenceFinished;
                }
                out.pose
            }
            Phase::Idle => {
                let neutral = self.library.neutral_pose(&self.model);
                let local = (t_s - self.idle_since_s).max(0.0);
                match self.idle.as_mut() {
                    Some(sway) => sway.pose(local, &neutral),
                    None => neutral,
                }
            }
            Phase::Listening | Phase::Processing => self.library.neutral_pose(&self.model),
            Phase::Faulted => self.last_pose.clone(),
        };
        let pose = pose.clamped(&self.model).unwrap_or(pose);
        let commands = map_bend_to_commands(&self.model, &self.channels, &pose, UnmappedPolicy::Error)?;
        let step = self.backend.apply(&commands, self.dt_s)?;

        let mut messages = std::mem::take(&mut self.outbox);
        let mut fault_ids = Vec::new();
        for f in &step.faults {
            fault_ids.push(f.channel_id);
            self.report.faults.push(FaultRecord {
                tick: self.tick,
                t_s,
                channel: f.channel_id,
                torque_estimate: f.torque_estimate,
            });
            messages.push(ServerMessage::Fault {
                tick: self.tick,
                channel: f.channel_id,
                torque_estimate: f.torque_estimate,
                torque_limit: f.torque_limit,
            });
            messages.push(ServerMessage::event("fault_raised", json!({ "channel": f.channel_id })));
            self.pending
                .push_back(SessionEvent::FaultRaised { channel: f.channel_id });
        }
        if let Some(log) = self.log.as_mut() {
            log.append(&TrajectoryRecord {
                tick: self.tick,
                t_s,
                positions_mm: positions(&step.telemetry),
                bends_deg: pose.clone(),
                faults: fault_ids,
            })
            .map_err(|e| ActuationError::Io(e.to_string()))?;
        }
        messages.push(ServerMessage::Pose(self.pose_message(phase, t_s, &pose)));
        self.last_pose = pose;
        let tick = self.tick;
        self.tick += 1;
        if finished {
            self.handle_event(SessionEvent::SequenceFinished);
            messages.append(&mut self.outbox);
        }
        Ok(TickOutput {
            tick,
            telemetry: step.telemetry,
            messages,
        })
    }
}
