//! Constant-curvature kinematics of cable-driven continuum segments.
//!
//! A segment's deformable length is divided into `n` equal deformation units,
//! each contributing at most `unit_angle_deg` of bend, so the segment bends up
//! to `n * unit_angle_deg`. Each unit is modelled as a circular arc. A segment
//! may bend in up to two planes; within a unit the plane-0 arc is applied
//! before the plane-1 arc, the unit length being shared between them in
//! proportion to their bend magnitudes (both arcs then have equal curvature,
//! and a single-plane bend reduces to one full-length arc).
//!
//! Angles are degrees at every public interface.

mod frame;
mod model;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use frame::Frame;
pub use model::{
    BendPlane, ModelError, Mount, PlaneKey, PlaneKeyParseError, PuppetModel, Section, SegmentError, SegmentSpec,
    DEMO_MODEL_JSON,
};

use crate::diagnostics::{DiagCode, Diagnostic};
use crate::tolerance;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum KinematicsError {
    #[error("unknown section `{0}`")]
    UnknownSection(String),
    #[error("unknown plane `{0}`")]
    UnknownPlane(String),
    #[error("bend {angle_deg} deg on `{plane}` is outside [{min}, {max}]")]
    AngleOutOfRange {
        plane: String,
        angle_deg: f64,
        min: f64,
        max: f64,
    },
    #[error("mount graph is not a tree rooted at the base")]
    InvalidMountGraph,
}

/// Bend angle per plane, in degrees. Planes absent from the map are straight.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BendState {
    angles: BTreeMap<PlaneKey, f64>,
}

impl BendState {
    pub fn new() -> Self {
        Self::default()
    }

    /// All planes of `model` at 0 degrees.
    pub fn zero(model: &PuppetModel) -> Self {
        Self {
            angles: model.plane_keys().into_iter().map(|k| (k, 0.0)).collect(),
        }
    }

    pub fn get(&self, key: &PlaneKey) -> Option<f64> {
        self.angles.get(key).copied()
    }

    pub fn angle(&self, section: &str, plane: &str) -> f64 {
        self.get(&PlaneKey::new(section, plane)).unwrap_or(0.0)
    }

    pub fn set(&mut self, key: PlaneKey, deg: f64) {
        self.angles.insert(key, deg);
    }

    pub fn with(mut self, section: &str, plane: &str, deg: f64) -> Self {
        self.set(PlaneKey::new(section, plane), deg);
        self
    }

    pub fn iter(&self) -> impl Iterator<Item = (&PlaneKey, f64)> {
        self.angles.iter().map(|(k, v)| (k, *v))
    }

    pub fn keys(&self) -> impl Iterator<Item = &PlaneKey> {
        self.angles.keys()
    }

    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles.is_empty()
    }

    /// Component-wise interpolation, exact at both ends; keys missing on one
    /// side count as 0.
    pub fn lerp(&self, other: &BendState, alpha: f64) -> BendState {
        let mut out = BTreeMap::new();
        for key in self.angles.keys().chain(other.angles.keys()) {
            let a = self.get(key).unwrap_or(0.0);
            let b = other.get(key).unwrap_or(0.0);
            out.insert(key.clone(), a * (1.0 - alpha) + b * alpha);
        }
        BendState { angles: out }
    }

    /// Clamps every angle into its plane's range. Unknown keys are an error.
    pub fn clamped(&self, model: &PuppetModel) -> Result<BendState, KinematicsError> {
        let mut out = BTreeMap::new();
        for (key, deg) in &self.angles {
            let (seg, _) = model.plane(key).ok_or_else(|| unknown_key_error(model, key))?;
            out.insert(key.clone(), clamp_bend(seg, &key.plane, *deg)?);
        }
        Ok(BendState { angles: out })
    }

    /// Checks the state against the model: known keys, angles within range.
    pub fn validate(&self, model: &PuppetModel) -> Result<(), KinematicsError> {
        for (key, deg) in &self.angles {
            let (_, plane) = model.plane(key).ok_or_else(|| unknown_key_error(model, key))?;
            check_range(plane, &key.to_string(), *deg)?;
        }
        Ok(())
    }
}

impl FromIterator<(PlaneKey, f64)> for BendState {
    fn from_iter<T: IntoIterator<Item = (PlaneKey, f64)>>(iter: T) -> Self {
        Self {
            angles: iter.into_iter().collect(),
        }
    }
}

fn unknown_key_error(model: &PuppetModel, key: &PlaneKey) -> KinematicsError {
    if model.section(&key.section).is_none() {
        KinematicsError::UnknownSection(key.section.clone())
    } else {
        KinematicsError::UnknownPlane(key.to_string())
    }
}

fn check_range(plane: &BendPlane, label: &str, deg: f64) -> Result<(), KinematicsError> {
    let ok = deg.is_finite()
        && deg >= plane.min_deg() - tolerance::ANGLE_RANGE_DEG
        && deg <= plane.max_deg() + tolerance::ANGLE_RANGE_DEG;
    if ok {
        Ok(())
    } else {
        Err(KinematicsError::AngleOutOfRange {
            plane: label.to_string(),
            angle_deg: deg,
            min: plane.min_deg(),
            max: plane.max_deg(),
        })
    }
}

pub fn max_bend_angle(spec: &SegmentSpec) -> f64 {
    spec.max_bend_deg()
}

/// Pose of the distal end of one constant-curvature arc of length
/// `unit_length_mm` bent by `unit_bend_deg` in `plane`, relative to its base.
pub fn unit_arc_transform(unit_length_mm: f64, unit_bend_deg: f64, plane: &BendPlane) -> Frame {
    arc_transform(
        unit_length_mm,
        unit_bend_deg.to_radians(),
        plane.orientation_deg.to_radians(),
    )
}

fn arc_transform(length: f64, bend_rad: f64, orientation_rad: f64) -> Frame {
    if bend_rad.abs() < tolerance::ZERO_BEND_RAD {
        return Frame::translation(0.0, 0.0, length);
    }
    // In-plane offsets R(1 - cos φ) and R sin φ with R = l/φ, written so the
    // small-angle limit stays well conditioned.
    let half = 0.5 * bend_rad;
    let lateral = length * 2.0 * half.sin() * half.sin() / bend_rad;
    let axial = length * bend_rad.sin() / bend_rad;
    let (s, c) = bend_rad.sin_cos();
    let planar = Frame::new(
        nalgebra::Vector3::new(lateral, 0.0, axial),
        nalgebra::Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c),
    );
    if orientation_rad == 0.0 {
        return planar;
    }
    Frame::rot_z(orientation_rad) * planar * Frame::rot_z(-orientation_rad)
}

/// One deformation unit bent simultaneously in each listed plane.
///
/// `bends` pairs a per-unit bend (degrees) with its plane, in plane order.
pub fn unit_transform(unit_length_mm: f64, bends: &[(f64, &BendPlane)]) -> Frame {
    let total: f64 = bends.iter().map(|(b, _)| b.to_radians().abs()).sum();
    if total < tolerance::ZERO_BEND_RAD {
        return Frame::translation(0.0, 0.0, unit_length_mm);
    }
    bends
        .iter()
        .filter(|(b, _)| b.to_radians().abs() >= tolerance::ZERO_BEND_RAD)
        .fold(Frame::identity(), |acc, (b, plane)| {
            let rad = b.to_radians();
            let share = unit_length_mm * rad.abs() / total;
            acc * arc_transform(share, rad, plane.orientation_deg.to_radians())
        })
}

/// Frames along each section: the section root, every unit boundary, and
/// the end of each rigid tail. Child sections start from their parent's tip.
pub fn forward_kinematics(
    model: &PuppetModel,
    state: &BendState,
) -> Result<BTreeMap<String, Vec<Frame>>, KinematicsError> {
    state.validate(model)?;
    let order = model.mount_order().ok_or(KinematicsError::InvalidMountGraph)?;
    let mut out: BTreeMap<String, Vec<Frame>> = BTreeMap::new();
    for section in order {
        let parent_tip = match section.mount.parent.as_deref() {
            None => Frame::identity(),
            Some(p) => *out
                .get(p)
                .and_then(|f| f.last())
                .ok_or_else(|| KinematicsError::UnknownSection(p.to_string()))?,
        };
        let root =
            parent_tip * Frame::from_translation_rpy_deg(section.mount.translation_mm, section.mount.rotation_deg);
        out.insert(section.name.clone(), section_frames(section, state, root));
    }
    Ok(out)
}

fn section_frames(section: &Section, state: &BendState, root: Frame) -> Vec<Frame> {
    let mut frames = vec![root];
    let mut current = root;
    for seg in &section.segments {
        let n = seg.unit_count as f64;
        let bends: Vec<(f64, &BendPlane)> = seg
            .planes
            .iter()
            .map(|p| (state.angle(&section.name, &p.plane_id) / n, p))
            .collect();
        let unit = unit_transform(seg.unit_length_mm(), &bends);
        for _ in 0..seg.unit_count {
            current = current * unit;
            frames.push(current);
        }
        current = current * Frame::translation(0.0, 0.0, seg.rigid_length_mm);
        frames.push(current);
    }
    frames
}

/// Tip frame of each section.
pub fn section_tips(model: &PuppetModel, state: &BendState) -> Result<BTreeMap<String, Frame>, KinematicsError> {
    Ok(forward_kinematics(model, state)?
        .into_iter()
        .filter_map(|(k, v)| v.last().copied().map(|f| (k, f)))
        .collect())
}

/// Cable length the plane's motor must reel in for a total bend of `bend_deg`.
///
/// Negative bends on planes with elastic return need no payout: the rope
/// on the opposite side takes up the slack.
pub fn cable_displacement(spec: &SegmentSpec, plane_id: &str, bend_deg: f64) -> Result<f64, KinematicsError> {
    let plane = spec
        .plane(plane_id)
        .ok_or_else(|| KinematicsError::UnknownPlane(plane_id.to_string()))?;
    check_range(plane, plane_id, bend_deg)?;
    if bend_deg < 0.0 && plane.elastic_return {
        return Ok(0.0);
    }
    Ok(plane.cable_offset_mm * bend_deg.to_radians())
}

/// Clamps a bend into the plane's active range. NaN maps to 0 before clamping.
pub fn clamp_bend(spec: &SegmentSpec, plane_id: &str, bend_deg: f64) -> Result<f64, KinematicsError> {
    let plane = spec
        .plane(plane_id)
        .ok_or_else(|| KinematicsError::UnknownPlane(plane_id.to_string()))?;
    let deg = if bend_deg.is_nan() { 0.0 } else { bend_deg };
    Ok(deg.clamp(plane.min_deg(), plane.max_deg()))
}

/// Checks every model invariant. An empty result means the model is valid.
pub fn validate_model(model: &PuppetModel) -> Vec<Diagnostic> {
    let mut diags = Vec::new();
    let mut seen = std::collections::BTreeSet::new();
    for section in &model.sections {
        let spath = format!("sections/{}", section.name);
        if !seen.insert(section.name.as_str()) {
            diags.push(Diagnostic::new(
                &spath,
                DiagCode::DuplicateSection,
                format!("section `{}` defined more than once", section.name),
            ));
        }
        if section.segments.is_empty() {
            diags.push(Diagnostic::new(
                &spath,
                DiagCode::EmptySection,
                "section has no segments",
            ));
        }
        let mut plane_ids = std::collections::BTreeSet::new();
        for (i, seg) in section.segments.iter().enumerate() {
            let gpath = format!("{spath}/segments/{i}");
            validate_segment(seg, &gpath, &mut diags);
            for p in &seg.planes {
                if !plane_ids.insert(p.plane_id.as_str()) {
                    diags.push(Diagnostic::new(
                        format!("{gpath}/planes/{}", p.plane_id),
                        DiagCode::DuplicatePlane,
                        format!("plane id `{}` repeats within section", p.plane_id),
                    ));
                }
            }
        }
        if let Some(parent) = &section.mount.parent {
            if model.section(parent).is_none() {
                diags.push(Diagnostic::new(
                    format!("{spath}/mount/parent"),
                    DiagCode::UnknownParent,
                    format!("parent section `{parent}` does not exist"),
                ));
            }
        }
    }
    let parents_known = !diags.iter().any(|d| d.code == DiagCode::UnknownParent);
    if parents_known && model.mount_order().is_none() {
        diags.push(Diagnostic::new(
            "sections",
            DiagCode::MountCycle,
            "mount graph contains a cycle",
        ));
    }
    diags
}

fn validate_segment(seg: &SegmentSpec, path: &str, diags: &mut Vec<Diagnostic>) {
    if !(seg.flex_length_mm > 0.0 && seg.flex_length_mm.is_finite()) {
        diags.push(Diagnostic::new(
            format!("{path}/flex_length_mm"),
            DiagCode::NonPositiveFlexLength,
            format!("flex length must be positive, got {}", seg.flex_length_mm),
        ));
    }
    if !(seg.rigid_length_mm >= 0.0 && seg.rigid_length_mm.is_finite()) {
        diags.push(Diagnostic::new(
            format!("{path}/rigid_length_mm"),
            DiagCode::NegativeRigidLength,
            format!("rigid length must be non-negative, got {}", seg.rigid_length_mm),
        ));
    }
    if seg.unit_count == 0 {
        diags.push(Diagnostic::new(
            format!("{path}/unit_count"),
            DiagCode::ZeroUnits,
            "unit count must be at least 1",
        ));
    }
    if !(seg.unit_angle_deg > 0.0 && seg.unit_angle_deg.is_finite()) {
        diags.push(Diagnostic::new(
            format!("{path}/unit_angle_deg"),
            DiagCode::NonPositiveUnitAngle,
            format!("unit angle must be positive, got {}", seg.unit_angle_deg),
        ));
    }
    if seg.planes.is_empty() || seg.planes.len() > 2 {
        diags.push(Diagnostic::new(
            format!("{path}/planes"),
            DiagCode::PlaneCount,
            format!("a segment has 1 or 2 bend planes, got {}", seg.planes.len()),
        ));
    }
    let max_bend = seg.max_bend_deg();
    for (i, p) in seg.planes.iter().enumerate() {
        let ppath = format!("{path}/planes/{}", p.plane_id);
        if !(0.0..360.0).contains(&p.orientation_deg) {
            diags.push(Diagnostic::new(
                format!("{ppath}/orientation_deg"),
                DiagCode::BadOrientation,
                format!("orientation must lie in [0, 360), got {}", p.orientation_deg),
            ));
        }
        if !(p.cable_offset_mm > 0.0 && p.cable_offset_mm.is_finite()) {
            diags.push(Diagnostic::new(
                format!("{ppath}/cable_offset_mm"),
                DiagCode::NonPositiveCableOffset,
                format!("cable offset must be positive, got {}", p.cable_offset_mm),
            ));
        }
        let [lo, hi] = p.active_range;
        if !(lo <= 0.0 && 0.0 <= hi) {
            diags.push(Diagnostic::new(
                format!("{ppath}/active_range"),
                DiagCode::RangeExcludesZero,
                format!("active range [{lo}, {hi}] must contain 0"),
            ));
        }
        if lo < -max_bend || hi > max_bend {
            diags.push(Diagnostic::new(
                format!("{ppath}/active_range"),
                DiagCode::RangeExceedsMaxBend,
                format!("active range [{lo}, {hi}] exceeds max bend {max_bend}"),
            ));
        }
        if seg.planes[..i]
            .iter()
            .any(|q| (q.orientation_deg - p.orientation_deg).abs() < 1e-12)
        {
            diags.push(Diagnostic::new(
                format!("{ppath}/orientation_deg"),
                DiagCode::DuplicateOrientation,
                "two planes of a segment share an orientation",
            ));
        }
    }
}
