//! Action-sequence text (`[Waving][1][Joy][1]`): parsing, canonical
//! formatting, resolution against a gesture library, and scheduling.
//!
//! The number after a gesture means different things per kind. For a
//! discrete gesture it is a pause *after* the gesture plays for its nominal
//! duration; for a continuous gesture it is the total looping playback time.

mod parse;
mod scheduler;

use serde::{Deserialize, Serialize};

pub use parse::{format_number, format_sequence, parse_sequence, ActionSequence, ParseError, SequenceItem};
pub use scheduler::{SchedulerEvent, SchedulerState, SchedulerStatus, SchedulerTick, BLEND_WINDOW_S};

use crate::gestures::{GestureKind, GestureLibrary};

/// How unknown gesture names are handled.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResolveMode {
    /// Any unknown name rejects the whole sequence (operator input).
    #[default]
    Strict,
    /// Unknown items are dropped and reported (model output).
    Repair,
}

/// Something that was changed or retried to obtain an executable sequence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RepairNote {
    DroppedUnknown { name: String, index: usize },
    Retried { attempt: u32, error: String },
    FallbackUsed { reason: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResolvedItem {
    pub canonical: String,
    pub kind: GestureKind,
    pub number_s: f64,
    pub nominal_duration_s: f64,
}

impl ResolvedItem {
    /// Time this item occupies on the timeline.
    pub fn span_s(&self) -> f64 {
        match self.kind {
            GestureKind::Discrete => self.nominal_duration_s + self.number_s,
            GestureKind::Continuous => self.number_s,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ResolvedSequence {
    pub items: Vec<ResolvedItem>,
    pub notes: Vec<RepairNote>,
}

impl ResolvedSequence {
    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Canonical text using canonical gesture names.
    pub fn to_text(&self) -> String {
        self.items
            .iter()
            .map(|i| format!("[{}][{}]", i.canonical, format_number(i.number_s)))
            .collect()
    }

    pub fn total_duration_s(&self) -> f64 {
        self.items.iter().map(ResolvedItem::span_s).sum()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum ResolveError {
    #[error("unknown gesture `{name}` at item {index}")]
    UnknownGesture { name: String, index: usize },
}

pub fn resolve_sequence(
    seq: &ActionSequence,
    library: &GestureLibrary,
    mode: ResolveMode,
) -> Result<ResolvedSequence, ResolveError> {
    let mut out = ResolvedSequence::default();
    for (index, item) in seq.items.iter().enumerate() {
        match library.resolve(&item.gesture_name) {
            Some(def) => out.items.push(ResolvedItem {
                canonical: def.name.clone(),
                kind: def.kind,
                number_s: item.number_s,
                nominal_duration_s: def.nominal_duration_s,
            }),
            None if mode == ResolveMode::Strict => {
                return Err(ResolveError::UnknownGesture {
                    name: item.gesture_name.clone(),
                    index,
                })
            }
            None => out.notes.push(RepairNote::DroppedUnknown {
                name: item.gesture_name.clone(),
                index,
            }),
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntryPhase {
    Play,
    Pause,
}

/// A span of the timeline. Pause entries carry the gesture they follow.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScheduleEntry {
    pub gesture: String,
    pub start_s: f64,
    pub end_s: f64,
    pub phase: EntryPhase,
}

/// Lays items end to end from t = 0. Zero-length spans are omitted.
pub fn build_schedule(resolved: &ResolvedSequence) -> Vec<ScheduleEntry> {
    let mut entries = Vec::new();
    let mut t = 0.0;
    let mut push = |gesture: &str, len: f64, phase: EntryPhase, t: &mut f64| {
        if len > 0.0 {
            entries.push(ScheduleEntry {
                gesture: gesture.to_string(),
                start_s: *t,
                end_s: *t + len,
                phase,
            });
            *t += len;
        }
    };
    for item in &resolved.items {
        match item.kind {
            GestureKind::Discrete => {
                push(&item.canonical, item.nominal_duration_s, EntryPhase::Play, &mut t);
                push(&item.canonical, item.number_s, EntryPhase::Pause, &mut t);
            }
            GestureKind::Continuous => {
                push(&item.canonical, item.number_s, EntryPhase::Play, &mut t);
            }
        }
    }
    entries
}

/// Parses and resolves in one step.
pub fn compile_sequence(
    text: &str,
    library: &GestureLibrary,
    mode: ResolveMode,
) -> Result<ResolvedSequence, SequenceError> {
    let seq = parse_sequence(text)?;
    Ok(resolve_sequence(&seq, library, mode)?)
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum SequenceError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Resolve(#[from] ResolveError),
}

impl SequenceError {
    pub fn code(&self) -> &'static str {
        match self {
            SequenceError::Parse(p) => p.code(),
            SequenceError::Resolve(ResolveError::UnknownGesture { .. }) => "UnknownGesture",
        }
    }
}
