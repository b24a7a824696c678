use std::fmt;

use serde::Serialize;

/// Machine-readable diagnostic codes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum DiagCode {
    // model
    DuplicateSection,
    DuplicatePlane,
    DuplicateOrientation,
    EmptySection,
    PlaneCount,
    NonPositiveFlexLength,
    NegativeRigidLength,
    ZeroUnits,
    NonPositiveUnitAngle,
    BadOrientation,
    NonPositiveCableOffset,
    RangeExcludesZero,
    RangeExceedsMaxBend,
    UnknownParent,
    MountCycle,
    // gestures
    DuplicateName,
    AliasCollision,
    NonMonotoneKeyframes,
    KeyframeAfterDuration,
    NegativeKeyframeTime,
    EmptyKeyframes,
    NonPositiveDuration,
    OpenLoop,
    LoopableMismatch,
    UnknownPlaneInKeyframe,
    BadIdleRange,
    // config
    UnknownChannelTarget,
    DuplicateChannel,
    NonPositiveChannelLimit,
    UncoveredPlane,
}

impl fmt::Display for DiagCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// A located problem: `path` names the offending element
/// (e.g. `sections/left_arm/segments/0/planes/vertical`).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Diagnostic {
    pub path: String,
    pub code: DiagCode,
    pub message: String,
}

impl Diagnostic {
    pub fn new(path: impl Into<String>, code: DiagCode, message: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            code,
            message: message.into(),
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] {}: {}", self.code, self.path, self.message)
    }
}

pub(crate) fn summarize(diags: &[Diagnostic]) -> String {
    diags.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}
