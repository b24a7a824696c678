use std::fs::OpenOptions;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use crossbeam_channel::{Receiver, Sender};
use serde::{Deserialize, Serialize};

use crate::actuation::{
    map_bend_to_commands, ActuationError, ActuatorBackend, SerialBackend, SimBackend, UnmappedPolicy,
};
use crate::config::{AppConfig, BackendConfig, ResponderConfig};
use crate::gestures::GestureLibrary;
use crate::perception::{LlmResponder, MockTranscriber, Responder, RuleResponder, Transcriber};
use crate::tolerance;

use super::protocol::{encode, ClientMessage};
use super::{client_events, Command, LogSink, Orchestrator, ServerMessage, SessionEvent, SessionReport};

#[derive(Debug, thiserror::Error)]
pub enum SessionError {
    #[error("actuation failed: {0}")]
    Actuation(#[from] ActuationError),
    #[error("cannot open backend device {0}: {1}")]
    Device(String, String),
    #[error("script did not settle within {0} s")]
    Runaway(f64),
    #[error("log write failed: {0}")]
    Io(#[from] std::io::Error),
}

/// Builds the configured backend. The simulator starts at the neutral pose
/// so the first tick does not jump.
pub fn make_backend(config: &AppConfig) -> Result<Box<dyn ActuatorBackend>, SessionError> {
    match &config.backend {
        BackendConfig::Sim => {
            let mut sim = SimBackend::new(&config.channels);
            let neutral = config.library.neutral_pose(&config.model);
            for cmd in map_bend_to_commands(&config.model, &config.channels, &neutral, UnmappedPolicy::Ignore)? {
                sim.set_position(cmd.channel_id, cmd.target_displacement_mm)?;
            }
            Ok(Box::new(sim))
        }
        BackendConfig::Serial { device } => {
            let file = OpenOptions::new()
                .write(true)
                .open(device)
                .map_err(|e| SessionError::Device(device.display().to_string(), e.to_string()))?;
            Ok(Box::new(SerialBackend::new(file, &config.channels)))
        }
    }
}

/// Transcriber and responder pair used by a session.
#[derive(Clone)]
pub struct Perception {
    pub transcriber: Arc<dyn Transcriber>,
    pub responder: Arc<dyn Responder>,
}

impl Perception {
    pub fn from_config(responder: &ResponderConfig) -> Self {
        let responder: Arc<dyn Responder> = match responder {
            ResponderConfig::Rule => Arc::new(RuleResponder),
            ResponderConfig::Llm { llm } => Arc::new(LlmResponder { config: llm.clone() }),
        };
        Self {
            transcriber: Arc::new(MockTranscriber),
            responder,
        }
    }

    pub fn execute(&self, command: &Command, library: &GestureLibrary) -> SessionEvent {
        match command {
            Command::Transcribe { utterance } => SessionEvent::PerceptReady(self.transcriber.transcribe(utterance)),
            Command::Respond { percept } => SessionEvent::SequenceReady(self.responder.respond(percept, library)),
        }
    }
}

/// A console message scheduled at a virtual time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScriptEvent {
    pub t_s: f64,
    #[serde(flatten)]
    pub message: ClientMessage,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Script {
    #[serde(default)]
    pub events: Vec<ScriptEvent>,
    /// Idle time simulated after the loop settles. Default 1 s.
    #[serde(default)]
    pub tail_s: Option<f64>,
}

impl Script {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimOptions {
    pub collect_transcript: bool,
    /// Upper bound on simulated time.
    pub max_duration_s: f64,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            collect_transcript: true,
            max_duration_s: 3600.0,
        }
    }
}

pub struct SessionOutput {
    pub report: SessionReport,
    /// Every broadcast message, encoded, in order.
    pub transcript: Vec<String>,
    pub log: Option<LogSink>,
}

fn dispatch(orch: &mut Orchestrator, perception: &Perception, event: SessionEvent) {
    let mut work = vec![event];
    while let Some(ev) = work.pop() {
        for cmd in orch.handle_event(ev) {
            work.push(perception.execute(&cmd, orch.library()));
        }
    }
}

/// Runs `script` under virtual time with perception executed inline.
///
/// Events fire at the first tick whose time reaches their timestamp. After
/// the last event the loop runs until it is idle again, then for the tail.
pub fn run_session(
    config: &AppConfig,
    script: &Script,
    log: Option<LogSink>,
    options: SimOptions,
) -> Result<SessionOutput, SessionError> {
    let perception = Perception::from_config(&config.responder);
    run_session_with(config, script, log, options, &perception)
}

pub fn run_session_with(
    config: &AppConfig,
    script: &Script,
    log: Option<LogSink>,
    options: SimOptions,
    perception: &Perception,
) -> Result<SessionOutput, SessionError> {
    let mut orch = Orchestrator::new(config, make_backend(config)?, log);
    let mut events = script.events.clone();
    events.sort_by(|a, b| a.t_s.total_cmp(&b.t_s));
    let tail_s = script.tail_s.unwrap_or(1.0).max(0.0);
    let mut transcript = Vec::new();
    let mut next = 0;
    let mut settle_end: Option<f64> = None;
    loop {
        let t = orch.now_s();
        while next < events.len() && events[next].t_s <= t + tolerance::TIME_S {
            for ev in client_events(events[next].message.clone()) {
                dispatch(&mut orch, perception, ev);
            }
            next += 1;
        }
        if next == events.len() && orch.is_quiescent() {
            let end = *settle_end.get_or_insert(t + tail_s);
            if t >= end - tolerance::TIME_S {
                break;
            }
        } else {
            settle_end = None;
        }
        if t > options.max_duration_s {
            return Err(SessionError::Runaway(options.max_duration_s));
        }
        let out = orch.control_tick()?;
        if options.collect_transcript {
            transcript.extend(out.messages.iter().map(encode));
        }
    }
    if options.collect_transcript {
        transcript.extend(orch.take_messages().iter().map(encode));
    }
    let (report, log) = orch.finish()?;
    Ok(SessionOutput {
        report,
        transcript,
        log,
    })
}

/// In-memory log sink that can be read while the session owns a handle.
#[derive(Clone, Debug, Default)]
pub struct SharedBuffer(Arc<std::sync::Mutex<Vec<u8>>>);

impl SharedBuffer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn contents(&self) -> Vec<u8> {
        self.0.lock().unwrap().clone()
    }
}

impl std::io::Write for SharedBuffer {
    fn write(&mut self, buf: &[u8]) -> std::io::Result<usize> {
        self.0.lock().unwrap().extend_from_slice(buf);
        Ok(buf.len())
    }

    fn flush(&mut self) -> std::io::Result<()> {
        Ok(())
    }
}

/// Options for a wall-clock (or free-running) session fed by a console.
pub struct LiveOptions {
    pub inbound: Receiver<ClientMessage>,
    /// Receives every encoded broadcast message.
    pub broadcast: Box<dyn FnMut(&str) + Send>,
    pub shutdown: Arc<AtomicBool>,
    /// `None` disables perception: utterances are rejected.
    pub perception: Option<Perception>,
    /// Sleep to keep ticks on the wall clock. Off, ticks run back to back.
    pub wall_clock: bool,
    pub max_ticks: Option<u64>,
    pub log: Option<LogSink>,
}

/// Runs until `shutdown` is set or `max_ticks` ticks have run. Perception
/// calls run on worker threads and report back through a queue; the loop
/// owner is the only writer of loop state.
pub fn run_live(config: &AppConfig, mut options: LiveOptions) -> Result<SessionReport, SessionError> {
    let mut orch = Orchestrator::new(config, make_backend(config)?, options.log.take());
    let (results_tx, results_rx): (Sender<SessionEvent>, Receiver<SessionEvent>) = crossbeam_channel::unbounded();
    let dt = Duration::from_secs_f64(orch.dt_s());
    let start = Instant::now();
    let broadcast = &mut options.broadcast;
    loop {
        if options.shutdown.load(Ordering::SeqCst) {
            break;
        }
        if options.max_ticks.is_some_and(|m| orch.tick_index() >= m) {
            break;
        }
        let mut incoming: Vec<SessionEvent> = results_rx.try_iter().collect();
        for msg in options.inbound.try_iter() {
            incoming.extend(client_events(msg));
        }
        for ev in incoming {
            let perception_off = options.perception.is_none();
            if perception_off && matches!(ev, SessionEvent::PttStart | SessionEvent::PttStop { .. }) {
                broadcast(&encode(&ServerMessage::event(
                    "rejected",
                    serde_json::json!({ "code": "PerceptionDisabled", "message": "utterances need perception" }),
                )));
                continue;
            }
            for cmd in orch.handle_event(ev) {
                let Some(perception) = options.perception.clone() else {
                    continue;
                };
                let library = orch.library().clone();
                let tx = results_tx.clone();
                std::thread::spawn(move || {
                    let _ = tx.send(perception.execute(&cmd, &library));
                });
            }
        }
        let out = orch.control_tick()?;
        for m in &out.messages {
            broadcast(&encode(m));
        }
        if options.wall_clock {
            let due = start + dt * orch.tick_index() as u32;
            let now = Instant::now();
            if due > now {
                std::thread::sleep(due - now);
            }
        }
    }
    let (report, _) = orch.finish()?;
    Ok(report)
}
