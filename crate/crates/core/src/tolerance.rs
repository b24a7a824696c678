//! Numeric tolerances shared across the crate.

/// Bends with magnitude below this (radians) are treated as straight.
pub const ZERO_BEND_RAD: f64 = 1e-12;

/// Slack allowed when checking a bend against its plane range (degrees).
pub const ANGLE_RANGE_DEG: f64 = 1e-9;

/// Orthonormality / determinant tolerance for rotation matrices.
pub const ROTATION: f64 = 1e-9;

/// Time comparisons on the scheduler timeline (seconds).
pub const TIME_S: f64 = 1e-9;
