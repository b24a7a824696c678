//! Affective gesture library.
//!
//! Gestures are keyframed bend trajectories over the puppet's planes. Each
//! keyframe lists only the planes it moves; every other plane sits at the
//! neutral pose at that keyframe. The `interpolation` of a keyframe shapes
//! the segment arriving at it.

mod idle;
mod trajectory;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

pub use idle::{idle_pose, IdleSpec, IdleSway};
pub use trajectory::{compile_gesture, sample_trajectory, Trajectory};

use crate::diagnostics::{DiagCode, Diagnostic};
use crate::kinematics::{BendState, PlaneKey, PuppetModel};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interpolation {
    #[default]
    Linear,
    /// Cubic ease-in-out.
    Smooth,
}

impl Interpolation {
    pub fn shape(self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        match self {
            Interpolation::Linear => u,
            Interpolation::Smooth => u * u * (3.0 - 2.0 * u),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Keyframe {
    pub time_s: f64,
    #[serde(default)]
    pub targets: BTreeMap<PlaneKey, f64>,
    #[serde(default)]
    pub interpolation: Interpolation,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GestureKind {
    /// Finite action unit.
    Discrete,
    /// Sustained, looping state.
    Continuous,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GestureDef {
    pub name: String,
    pub kind: GestureKind,
    pub keyframes: Vec<Keyframe>,
    /// Discrete: playback length. Continuous: one loop period.
    pub nominal_duration_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loopable: Option<bool>,
    #[serde(default)]
    pub aliases: Vec<String>,
}

impl GestureDef {
    pub fn is_loopable(&self) -> bool {
        self.kind == GestureKind::Continuous
    }

    /// Full pose at keyframe `i`: neutral overlaid with its targets.
    pub fn keyframe_pose(&self, i: usize, neutral: &BendState) -> BendState {
        let mut pose = neutral.clone();
        for (k, v) in &self.keyframes[i].targets {
            pose.set(k.clone(), *v);
        }
        pose
    }

    /// Unclamped interpolated pose at `t_s`, holding the end keyframes
    /// outside their time span.
    pub fn pose_at(&self, t_s: f64, neutral: &BendState) -> BendState {
        let kfs = &self.keyframes;
        if kfs.is_empty() {
            return neutral.clone();
        }
        let next = kfs.partition_point(|k| k.time_s <= t_s);
        if next == 0 {
            return self.keyframe_pose(0, neutral);
        }
        if next == kfs.len() {
            return self.keyframe_pose(kfs.len() - 1, neutral);
        }
        let (a, b) = (&kfs[next - 1], &kfs[next]);
        let u = (t_s - a.time_s) / (b.time_s - a.time_s);
        let alpha = b.interpolation.shape(u);
        self.keyframe_pose(next - 1, neutral)
            .lerp(&self.keyframe_pose(next, neutral), alpha)
    }

    fn planes(&self) -> BTreeSet<&PlaneKey> {
        self.keyframes.iter().flat_map(|k| k.targets.keys()).collect()
    }
}

/// The serialized form of a library.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct LibraryDocument {
    #[serde(default)]
    pub neutral: BendState,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub idle: Option<IdleSpec>,
    #[serde(default)]
    pub gestures: Vec<GestureDef>,
}

#[derive(Debug, thiserror::Error)]
pub enum LibraryError {
    #[error("gesture document is malformed: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("gesture library failed validation: {}", crate::diagnostics::summarize(.0))]
    Invalid(Vec<Diagnostic>),
    #[error("gesture library does not fit the model: {}", crate::diagnostics::summarize(.0))]
    ModelShapeMismatch(Vec<Diagnostic>),
}

impl LibraryError {
    pub fn diagnostics(&self) -> &[Diagnostic] {
        match self {
            LibraryError::Parse(_) => &[],
            LibraryError::Invalid(d) | LibraryError::ModelShapeMismatch(d) => d,
        }
    }
}

/// Validated gestures with case-insensitive name and alias lookup.
#[derive(Clone, Debug, PartialEq)]
pub struct GestureLibrary {
    gestures: Vec<GestureDef>,
    alias_index: BTreeMap<String, String>,
    neutral: BendState,
    idle: Option<IdleSpec>,
}

pub const BUILTIN_GESTURES_JSON: &str = include_str!("../../assets/gestures.json");

impl GestureLibrary {
    pub fn from_document(doc: LibraryDocument) -> Result<Self, LibraryError> {
        let diags = validate_document(&doc);
        if !diags.is_empty() {
            return Err(LibraryError::Invalid(diags));
        }
        let mut alias_index = BTreeMap::new();
        for g in &doc.gestures {
            alias_index.insert(g.name.to_lowercase(), g.name.clone());
            for a in &g.aliases {
                alias_index.insert(a.to_lowercase(), g.name.clone());
            }
        }
        Ok(Self {
            gestures: doc.gestures,
            alias_index,
            neutral: doc.neutral,
            idle: doc.idle,
        })
    }

    pub fn to_document(&self) -> LibraryDocument {
        LibraryDocument {
            neutral: self.neutral.clone(),
            idle: self.idle.clone(),
            gestures: self.gestures.clone(),
        }
    }

    pub fn gestures(&self) -> &[GestureDef] {
        &self.gestures
    }

    pub fn len(&self) -> usize {
        self.gestures.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gestures.is_empty()
    }

    pub fn neutral(&self) -> &BendState {
        &self.neutral
    }

    /// Zero pose of `model` overlaid with the library's neutral angles.
    pub fn neutral_pose(&self, model: &PuppetModel) -> BendState {
        let mut base = BendState::zero(model);
        for (k, v) in self.neutral.iter() {
            if model.plane(k).is_some() {
                base.set(k.clone(), v);
            }
        }
        base
    }

    pub fn idle(&self) -> Option<&IdleSpec> {
        self.idle.as_ref()
    }

    pub fn alias_index(&self) -> &BTreeMap<String, String> {
        &self.alias_index
    }

    /// Looks a gesture up by canonical name or alias, ignoring case.
    pub fn resolve(&self, name: &str) -> Option<&GestureDef> {
        let canonical = self.alias_index.get(&name.trim().to_lowercase())?;
        self.get(canonical)
    }

    pub fn get(&self, canonical: &str) -> Option<&GestureDef> {
        self.gestures.iter().find(|g| g.name == canonical)
    }

    /// Problems that only show up against a concrete model: keyframe,
    /// neutral and idle planes that the model lacks.
    pub fn check_against(&self, model: &PuppetModel) -> Vec<Diagnostic> {
        let mut diags = Vec::new();
        for key in self.neutral.keys() {
            if model.plane(key).is_none() {
                diags.push(Diagnostic::new(
                    format!("neutral/{key}"),
                    DiagCode::UnknownPlaneInKeyframe,
                    format!("neutral pose names unknown plane `{key}`"),
                ));
            }
        }
        if let Some(idle) = &self.idle {
            if model.plane(&idle.plane).is_none() {
                diags.push(Diagnostic::new(
                    "idle/plane",
                    DiagCode::UnknownPlaneInKeyframe,
                    format!("idle sway plane `{}` is not in the model", idle.plane),
                ));
            }
        }
        for g in &self.gestures {
            for key in g.planes() {
                if model.plane(key).is_none() {
                    diags.push(Diagnostic::new(
                        format!("gestures/{}/keyframes", g.name),
                        DiagCode::UnknownPlaneInKeyframe,
                        format!("keyframe targets unknown plane `{key}`"),
                    ));
                }
            }
        }
        diags
    }

    /// Compiles a gesture by canonical name or alias.
    pub fn compile(&self, name: &str, model: &PuppetModel, tick_hz: f64) -> Option<Result<Trajectory, GestureError>> {
        self.resolve(name)
            .map(|g| compile_gesture(g, model, &self.neutral, tick_hz))
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GestureError {
    #[error("gesture `{gesture}` targets unknown plane `{plane}`")]
    UnknownPlaneInKeyframe { gesture: String, plane: PlaneKey },
    #[error("tick rate must be positive, got {0}")]
    InvalidTickRate(f64),
}

pub fn load_library(text: &str) -> Result<GestureLibrary, LibraryError> {
    let doc: LibraryDocument = serde_json::from_str(text)?;
    GestureLibrary::from_document(doc)
}

/// The bundled gesture set, checked against `model`.
pub fn builtin_library(model: &PuppetModel) -> Result<GestureLibrary, LibraryError> {
    let lib = load_library(BUILTIN_GESTURES_JSON)?;
    let diags = lib.check_against(model);
    if diags.is_empty() {
        Ok(lib)
    } else {
        Err(LibraryError::ModelShapeMismatch(diags))
    }
}

fn validate_document(doc: &LibraryDocument) -> Vec<Diagnostic> {
    let mut diags = Vec::new();
    // lowercased name -> owner, covering canonical names and aliases
    let mut names: BTreeMap<String, String> = BTreeMap::new();
    for g in &doc.gestures {
        let lower = g.name.to_lowercase();
        if let Some(prev) = names.get(&lower) {
            diags.push(Diagnostic::new(
                format!("gestures/{}/name", g.name),
                DiagCode::DuplicateName,
                format!("`{}` clashes with `{prev}`", g.name),
            ));
        } else {
            names.insert(lower, g.name.clone());
        }
    }
    for g in &doc.gestures {
        for alias in &g.aliases {
            let lower = alias.to_lowercase();
            match names.get(&lower) {
                Some(owner) => diags.push(Diagnostic::new(
                    format!("gestures/{}/aliases/{alias}", g.name),
                    DiagCode::AliasCollision,
                    format!("alias `{alias}` already names `{owner}`"),
                )),
                None => {
                    names.insert(lower, g.name.clone());
                }
            }
        }
        validate_gesture(g, &doc.neutral, &mut diags);
    }
    if let Some(idle) = &doc.idle {
        idle.validate(&mut diags);
    }
    diags
}

fn validate_gesture(g: &GestureDef, neutral: &BendState, diags: &mut Vec<Diagnostic>) {
    let path = format!("gestures/{}", g.name);
    if !(g.nominal_duration_s > 0.0 && g.nominal_duration_s.is_finite()) {
        diags.push(Diagnostic::new(
            format!("{path}/nominal_duration_s"),
            DiagCode::NonPositiveDuration,
            format!("duration must be positive, got {}", g.nominal_duration_s),
        ));
    }
    if g.loopable.is_some_and(|l| l != g.is_loopable()) {
        diags.push(Diagnostic::new(
            format!("{path}/loopable"),
            DiagCode::LoopableMismatch,
            "loopable must be true exactly for continuous gestures",
        ));
    }
    if g.keyframes.is_empty() {
        diags.push(Diagnostic::new(
            format!("{path}/keyframes"),
            DiagCode::EmptyKeyframes,
            "gesture has no keyframes",
        ));
        return;
    }
    for (i, k) in g.keyframes.iter().enumerate() {
        let kpath = format!("{path}/keyframes/{i}/time_s");
        if k.time_s.is_nan() || k.time_s < 0.0 {
            diags.push(Diagnostic::new(
                &kpath,
                DiagCode::NegativeKeyframeTime,
                format!("keyframe time must be non-negative, got {}", k.time_s),
            ));
        }
        if i > 0 && k.time_s.partial_cmp(&g.keyframes[i - 1].time_s) != Some(std::cmp::Ordering::Greater) {
            diags.push(Diagnostic::new(
                &kpath,
                DiagCode::NonMonotoneKeyframes,
                format!(
                    "keyframe times must strictly increase ({} after {})",
                    k.time_s,
                    g.keyframes[i - 1].time_s
                ),
            ));
        }
        if k.time_s > g.nominal_duration_s {
            diags.push(Diagnostic::new(
                &kpath,
                DiagCode::KeyframeAfterDuration,
                format!("keyframe at {} s exceeds duration {} s", k.time_s, g.nominal_duration_s),
            ));
        }
    }
    if g.kind == GestureKind::Continuous {
        let first = g.keyframe_pose(0, neutral);
        let last = g.keyframe_pose(g.keyframes.len() - 1, neutral);
        if first != last {
            diags.push(Diagnostic::new(
                format!("{path}/keyframes"),
                DiagCode::OpenLoop,
                "continuous gesture must end on its first keyframe",
            ));
        }
    }
}
