use std::ops::Mul;

use nalgebra::{Matrix3, Rotation3, Vector3};

use crate::tolerance;

/// Rigid-body pose: a position in millimetres and a rotation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Frame {
    pub position_mm: Vector3<f64>,
    pub rotation: Matrix3<f64>,
}

impl Frame {
    pub fn identity() -> Self {
        Self {
            position_mm: Vector3::zeros(),
            rotation: Matrix3::identity(),
        }
    }

    pub fn translation(x: f64, y: f64, z: f64) -> Self {
        Self {
            position_mm: Vector3::new(x, y, z),
            rotation: Matrix3::identity(),
        }
    }

    pub fn new(position_mm: Vector3<f64>, rotation: Matrix3<f64>) -> Self {
        Self { position_mm, rotation }
    }

    /// Rotation about the local z axis (the segment axis).
    pub fn rot_z(angle_rad: f64) -> Self {
        Self {
            position_mm: Vector3::zeros(),
            rotation: *Rotation3::from_axis_angle(&Vector3::z_axis(), angle_rad).matrix(),
        }
    }

    /// Mount transform from a translation and roll/pitch/yaw in degrees,
    /// composed as `Rz(yaw) * Ry(pitch) * Rx(roll)`.
    pub fn from_translation_rpy_deg(translation_mm: [f64; 3], rpy_deg: [f64; 3]) -> Self {
        let [roll, pitch, yaw] = rpy_deg.map(f64::to_radians);
        let rotation = Rotation3::from_euler_angles(roll, pitch, yaw);
        Self {
            position_mm: Vector3::from(translation_mm),
            rotation: *rotation.matrix(),
        }
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Self {
            position_mm: -(rt * self.position_mm),
            rotation: rt,
        }
    }

    /// Local z axis expressed in the parent frame.
    pub fn axis(&self) -> Vector3<f64> {
        self.rotation.column(2).into_owned()
    }

    pub fn is_orthonormal(&self, tol: f64) -> bool {
        let err = (self.rotation.transpose() * self.rotation - Matrix3::identity())
            .abs()
            .max();
        err <= tol && (self.rotation.determinant() - 1.0).abs() <= tol
    }

    pub fn is_valid(&self) -> bool {
        self.is_orthonormal(tolerance::ROTATION)
    }
}

impl Default for Frame {
    fn default() -> Self {
        Self::identity()
    }
}

impl Mul for Frame {
    type Output = Frame;

    fn mul(self, rhs: Frame) -> Frame {
        Frame {
            position_mm: self.position_mm + self.rotation * rhs.position_mm,
            rotation: self.rotation * rhs.rotation,
        }
    }
}

impl Mul<&Frame> for &Frame {
    type Output = Frame;

    fn mul(self, rhs: &Frame) -> Frame {
        *self * *rhs
    }
}
