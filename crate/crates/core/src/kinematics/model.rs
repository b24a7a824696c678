use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::de::{self, MapAccess, Visitor};
use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::diagnostics::Diagnostic;

/// Address of one bend plane: `section:plane`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PlaneKey {
    pub section: String,
    pub plane: String,
}

impl PlaneKey {
    pub fn new(section: impl Into<String>, plane: impl Into<String>) -> Self {
        Self {
            section: section.into(),
            plane: plane.into(),
        }
    }
}

impl fmt::Display for PlaneKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.section, self.plane)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("plane key must look like `section:plane`, got `{0}`")]
pub struct PlaneKeyParseError(pub String);

impl FromStr for PlaneKey {
    type Err = PlaneKeyParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.split_once(':') {
            Some((section, plane)) if !section.is_empty() && !plane.is_empty() => Ok(PlaneKey::new(section, plane)),
            _ => Err(PlaneKeyParseError(s.to_string())),
        }
    }
}

impl Serialize for PlaneKey {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for PlaneKey {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(de::Error::custom)
    }
}

/// One bending plane of a segment, driven by a single cable.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BendPlane {
    pub plane_id: String,
    /// Angle of the bending plane about the segment axis, measured from local +x.
    pub orientation_deg: f64,
    /// Radial distance of the driving cable from the neutral axis.
    pub cable_offset_mm: f64,
    /// Commandable bend range `[min, max]` in degrees.
    pub active_range: [f64; 2],
    /// Passive elastic rope restores the plane to 0 degrees.
    pub elastic_return: bool,
}

impl BendPlane {
    pub fn min_deg(&self) -> f64 {
        self.active_range[0]
    }

    pub fn max_deg(&self) -> f64 {
        self.active_range[1]
    }
}

/// A deformable section split into equal deformation units, plus a rigid tail.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentSpec {
    pub flex_length_mm: f64,
    pub rigid_length_mm: f64,
    pub unit_count: u32,
    pub unit_angle_deg: f64,
    pub planes: Vec<BendPlane>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SegmentError {
    #[error("flex length must be positive, got {0}")]
    NonPositiveFlexLength(f64),
    #[error("rigid length must be non-negative, got {0}")]
    NegativeRigidLength(f64),
    #[error("unit count must be at least 1")]
    ZeroUnits,
    #[error("unit angle must be positive, got {0}")]
    NonPositiveUnitAngle(f64),
}

impl SegmentSpec {
    /// Checked constructor for the scalar geometry. Plane checks happen in
    /// [`validate_model`](super::validate_model).
    pub fn new(
        flex_length_mm: f64,
        rigid_length_mm: f64,
        unit_count: u32,
        unit_angle_deg: f64,
        planes: Vec<BendPlane>,
    ) -> Result<Self, SegmentError> {
        if !(flex_length_mm > 0.0 && flex_length_mm.is_finite()) {
            return Err(SegmentError::NonPositiveFlexLength(flex_length_mm));
        }
        if !(rigid_length_mm >= 0.0 && rigid_length_mm.is_finite()) {
            return Err(SegmentError::NegativeRigidLength(rigid_length_mm));
        }
        if unit_count == 0 {
            return Err(SegmentError::ZeroUnits);
        }
        if !(unit_angle_deg > 0.0 && unit_angle_deg.is_finite()) {
            return Err(SegmentError::NonPositiveUnitAngle(unit_angle_deg));
        }
        Ok(Self {
            flex_length_mm,
            rigid_length_mm,
            unit_count,
            unit_angle_deg,
            planes,
        })
    }

    pub fn max_bend_deg(&self) -> f64 {
        self.unit_count as f64 * self.unit_angle_deg
    }

    pub fn total_length_mm(&self) -> f64 {
        self.flex_length_mm + self.rigid_length_mm
    }

    pub fn unit_length_mm(&self) -> f64 {
        self.flex_length_mm / self.unit_count as f64
    }

    pub fn plane(&self, plane_id: &str) -> Option<&BendPlane> {
        self.planes.iter().find(|p| p.plane_id == plane_id)
    }
}

/// Rigid attachment of a section root. `parent = None` attaches to the base;
/// otherwise the transform is relative to the parent section's tip frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct Mount {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent: Option<String>,
    #[serde(default)]
    pub translation_mm: [f64; 3],
    /// Roll, pitch, yaw in degrees, applied as `Rz(yaw) * Ry(pitch) * Rx(roll)`.
    #[serde(default)]
    pub rotation_deg: [f64; 3],
}

#[derive(Clone, Debug, PartialEq)]
pub struct Section {
    pub name: String,
    pub mount: Mount,
    pub segments: Vec<SegmentSpec>,
}

impl Section {
    pub fn total_length_mm(&self) -> f64 {
        self.segments.iter().map(SegmentSpec::total_length_mm).sum()
    }

    /// The segment owning `plane_id`, if any.
    pub fn find_plane(&self, plane_id: &str) -> Option<(&SegmentSpec, &BendPlane)> {
        self.segments.iter().find_map(|s| s.plane(plane_id).map(|p| (s, p)))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SectionBody {
    #[serde(default)]
    mount: Mount,
    segments: Vec<SegmentSpec>,
}

/// A puppet: named sections, each a chain of segments, mounted in a tree.
///
/// Sections keep document order. Duplicate names survive parsing so that
/// [`validate_model`](super::validate_model) can report them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PuppetModel {
    pub name: String,
    #[serde(serialize_with = "serialize_sections", deserialize_with = "deserialize_sections")]
    pub sections: Vec<Section>,
}

fn serialize_sections<S: Serializer>(sections: &[Section], serializer: S) -> Result<S::Ok, S::Error> {
    let mut map = serializer.serialize_map(Some(sections.len()))?;
    for s in sections {
        map.serialize_entry(
            &s.name,
            &SectionBody {
                mount: s.mount.clone(),
                segments: s.segments.clone(),
            },
        )?;
    }
    map.end()
}

fn deserialize_sections<'de, D: Deserializer<'de>>(deserializer: D) -> Result<Vec<Section>, D::Error> {
    struct SectionsVisitor;

    impl<'de> Visitor<'de> for SectionsVisitor {
        type Value = Vec<Section>;

        fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
            f.write_str("a map of section name to section")
        }

        fn visit_map<A: MapAccess<'de>>(self, mut access: A) -> Result<Self::Value, A::Error> {
            let mut out = Vec::new();
            while let Some((name, body)) = access.next_entry::<String, SectionBody>()? {
                out.push(Section {
                    name,
                    mount: body.mount,
                    segments: body.segments,
                });
            }
            Ok(out)
        }
    }

    deserializer.deserialize_map(SectionsVisitor)
}

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("model document is malformed: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("model failed validation with {} diagnostic(s): {}", .0.len(), crate::diagnostics::summarize(.0))]
    Invalid(Vec<Diagnostic>),
}

impl PuppetModel {
    /// Parses a JSON model document and rejects it if any invariant fails.
    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        let model: PuppetModel = serde_json::from_str(text)?;
        let diags = super::validate_model(&model);
        if diags.is_empty() {
            Ok(model)
        } else {
            Err(ModelError::Invalid(diags))
        }
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    /// Body plus two arms with the reference dimensions.
    pub fn demo() -> Self {
        Self::from_json(DEMO_MODEL_JSON).expect("bundled demo model is valid")
    }

    pub fn section(&self, name: &str) -> Option<&Section> {
        self.sections.iter().find(|s| s.name == name)
    }

    pub fn plane(&self, key: &PlaneKey) -> Option<(&SegmentSpec, &BendPlane)> {
        self.section(&key.section)?.find_plane(&key.plane)
    }

    /// Every addressable plane, in section then segment order.
    pub fn plane_keys(&self) -> Vec<PlaneKey> {
        self.sections
            .iter()
            .flat_map(|s| {
                s.segments
                    .iter()
                    .flat_map(|seg| seg.planes.iter())
                    .map(move |p| PlaneKey::new(&s.name, &p.plane_id))
            })
            .collect()
    }

    /// Section names ordered so every parent precedes its children.
    /// Returns `None` if the mount graph is not a tree rooted at the base.
    pub fn mount_order(&self) -> Option<Vec<&Section>> {
        let names: BTreeSet<&str> = self.sections.iter().map(|s| s.name.as_str()).collect();
        let mut placed: BTreeSet<&str> = BTreeSet::new();
        let mut order = Vec::with_capacity(names.len());
        while placed.len() < names.len() {
            let before = placed.len();
            for s in &self.sections {
                if placed.contains(s.name.as_str()) {
                    continue;
                }
                let ready = match s.mount.parent.as_deref() {
                    None => true,
                    Some(p) => placed.contains(p),
                };
                if ready {
                    placed.insert(&s.name);
                    order.push(s);
                }
            }
            if placed.len() == before {
                return None;
            }
        }
        Some(order)
    }

    /// Sections keyed by name; later duplicates are ignored.
    pub fn section_map(&self) -> BTreeMap<&str, &Section> {
        let mut m = BTreeMap::new();
        for s in &self.sections {
            m.entry(s.name.as_str()).or_insert(s);
        }
        m
    }
}

pub const DEMO_MODEL_JSON: &str = include_str!("../../assets/demo_model.json");
