use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::gestures::{sample_trajectory, GestureLibrary, Trajectory};
use crate::kinematics::{BendState, PuppetModel};
use crate::tolerance;

use super::{EntryPhase, ScheduleEntry};

/// Length of the cross-fade applied when a running sequence is preempted.
pub const BLEND_WINDOW_S: f64 = 0.3;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchedulerStatus {
    #[default]
    Idle,
    Running,
    Blending,
    Done,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum SchedulerEvent {
    GestureStarted { gesture: String, at_s: f64 },
    GestureFinished { gesture: String, at_s: f64 },
    SequencePreempted,
    SequenceFinished,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SchedulerTick {
    pub pose: BendState,
    pub events: Vec<SchedulerEvent>,
}

#[derive(Clone, Debug)]
struct Blend {
    from: BendState,
    total_ticks: Option<u32>,
    done_ticks: u32,
}

/// Plays a timeline one control tick at a time.
///
/// Each tick samples the pose at the cursor and then advances it by `dt`, so
/// a timeline of length `T` takes `ceil(T / dt)` ticks.
#[derive(Clone, Debug, Default)]
pub struct SchedulerState {
    timeline: Vec<ScheduleEntry>,
    cursor_s: f64,
    ticks_run: u64,
    status: SchedulerStatus,
    entry: usize,
    entry_started: bool,
    blend: Option<Blend>,
    cache: BTreeMap<String, Trajectory>,
    last_pose: Option<BendState>,
}

impl SchedulerState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn status(&self) -> SchedulerStatus {
        self.status
    }

    pub fn timeline(&self) -> &[ScheduleEntry] {
        &self.timeline
    }

    pub fn cursor_s(&self) -> f64 {
        self.cursor_s
    }

    pub fn is_active(&self) -> bool {
        matches!(self.status, SchedulerStatus::Running | SchedulerStatus::Blending)
    }

    /// The gesture under the cursor, if a play entry is active.
    pub fn current_gesture(&self) -> Option<&str> {
        match self.status {
            SchedulerStatus::Running => self
                .timeline
                .get(self.entry)
                .filter(|e| e.phase == EntryPhase::Play)
                .map(|e| e.gesture.as_str()),
            _ => None,
        }
    }

    /// Last pose emitted by [`SchedulerState::tick`].
    pub fn last_pose(&self) -> Option<&BendState> {
        self.last_pose.as_ref()
    }

    /// Drops compiled trajectories, e.g. after the library changed.
    pub fn clear_cache(&mut self) {
        self.cache.clear();
    }

    /// Starts `timeline` immediately, discarding whatever was playing.
    pub fn install(&mut self, timeline: Vec<ScheduleEntry>) {
        self.timeline = timeline;
        self.cursor_s = 0.0;
        self.ticks_run = 0;
        self.entry = 0;
        self.entry_started = false;
        self.blend = None;
        self.status = if self.timeline.is_empty() {
            SchedulerStatus::Done
        } else {
            SchedulerStatus::Running
        };
    }

    /// Replaces the running timeline after a linear blend from `from` to the
    /// first pose of `timeline` lasting [`BLEND_WINDOW_S`].
    pub fn preempt(&mut self, timeline: Vec<ScheduleEntry>, from: BendState) {
        self.install(timeline);
        self.status = SchedulerStatus::Blending;
        self.blend = Some(Blend {
            from,
            total_ticks: None,
            done_ticks: 0,
        });
    }

    /// Stops playback without emitting further events.
    pub fn cancel(&mut self) {
        self.install(Vec::new());
        self.status = SchedulerStatus::Idle;
    }

    fn entry_pose(
        &mut self,
        idx: usize,
        local_s: f64,
        library: &GestureLibrary,
        model: &PuppetModel,
        tick_hz: f64,
        neutral: &BendState,
    ) -> BendState {
        let Some(entry) = self.timeline.get(idx) else {
            return neutral.clone();
        };
        if entry.phase == EntryPhase::Pause {
            return neutral.clone();
        }
        if !self.cache.contains_key(&entry.gesture) {
            match library.compile(&entry.gesture, model, tick_hz) {
                Some(Ok(traj)) => {
                    self.cache.insert(entry.gesture.clone(), traj);
                }
                _ => {
                    log::warn!("gesture `{}` unavailable, holding neutral", entry.gesture);
                    return neutral.clone();
                }
            }
        }
        sample_trajectory(&self.cache[&entry.gesture], local_s).clone()
    }

    /// Advances one tick of length `dt_s`.
    pub fn tick(&mut self, library: &GestureLibrary, model: &PuppetModel, dt_s: f64) -> SchedulerTick {
        let tick_hz = 1.0 / dt_s;
        let neutral = library.neutral_pose(model);
        let mut events = Vec::new();

        let pose = match self.status {
            SchedulerStatus::Idle | SchedulerStatus::Done => neutral,
            SchedulerStatus::Blending => {
                let target = self.entry_pose(0, 0.0, library, model, tick_hz, &neutral);
                let blend = self.blend.as_mut().expect("blending without blend state");
                let total = *blend
                    .total_ticks
                    .get_or_insert_with(|| ((BLEND_WINDOW_S / dt_s - tolerance::TIME_S).ceil() as u32).max(1));
                if blend.done_ticks == 0 {
                    events.push(SchedulerEvent::SequencePreempted);
                }
                blend.done_ticks += 1;
                let alpha = blend.done_ticks as f64 / total as f64;
                let pose = blend.from.lerp(&target, alpha);
                if blend.done_ticks >= total {
                    self.blend = None;
                    if self.timeline.is_empty() {
                        self.status = SchedulerStatus::Done;
                        events.push(SchedulerEvent::SequenceFinished);
                    } else {
                        self.status = SchedulerStatus::Running;
                    }
                }
                pose
            }
            SchedulerStatus::Running => {
                let idx = self.entry;
                let entry = self.timeline[idx].clone();
                if !self.entry_started {
                    self.entry_started = true;
                    if entry.phase == EntryPhase::Play {
                        events.push(SchedulerEvent::GestureStarted {
                            gesture: entry.gesture.clone(),
                            at_s: entry.start_s,
                        });
                    }
                }
                let local = self.cursor_s - entry.start_s;
                let pose = self.entry_pose(idx, local, library, model, tick_hz, &neutral);

                self.ticks_run += 1;
                self.cursor_s = self.ticks_run as f64 * dt_s;
                let total = self.timeline.last().map_or(0.0, |e| e.end_s);
                let finished = self.cursor_s >= total - tolerance::TIME_S;
                // crossing one or more entry boundaries
                while self.entry < self.timeline.len()
                    && (finished || self.cursor_s >= self.timeline[self.entry].end_s - tolerance::TIME_S)
                {
                    let e = &self.timeline[self.entry];
                    if self.entry_started && e.phase == EntryPhase::Play {
                        events.push(SchedulerEvent::GestureFinished {
                            gesture: e.gesture.clone(),
                            at_s: e.end_s,
                        });
                    }
                    self.entry += 1;
                    self.entry_started = false;
                }
                if finished {
                    self.status = SchedulerStatus::Done;
                    events.push(SchedulerEvent::SequenceFinished);
                }
                pose
            }
        };
        self.last_pose = Some(pose.clone());
        SchedulerTick { pose, events }
    }
}
