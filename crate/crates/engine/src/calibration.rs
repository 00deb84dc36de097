//! Range-of-motion calibration: neutral anchor, movement axis, maximum range.
//!
//! A completed [`CalibrationProfile`] fixes the neutral head pose, a unit
//! axis of increasing displacement, and the maximum range `R` in meters.
//! Level targets elsewhere are fractions of `R`. Two calibration modes
//! exist: manual (the range is supplied directly) and automatic (the range
//! is the projection of a start→end mark displacement onto the axis).
//!
//! The axis is frozen at calibration time; live orientation never re-derives
//! it, so rotation during the exercise cannot masquerade as translation.

use crate::pose::{head_forward, vec3, PoseSample, Quat};
use serde::{Deserialize, Serialize};

/// Default accepted range bounds for `R`, in meters.
pub const DEFAULT_RANGE_MIN_M: f64 = 0.005;
pub const DEFAULT_RANGE_MAX_M: f64 = 0.30;

/// Horizontal-component norm below which the head is considered to be
/// looking straight up/down and no horizontal axis can be derived.
const DEGENERATE_EPS: f64 = 1e-3;

#[derive(Debug, thiserror::Error)]
pub enum CalibrationError {
    #[error("degenerate pose: head forward is nearly vertical (horizontal norm {norm:.2e})")]
    DegeneratePose { norm: f64 },
    #[error("range {got} m outside accepted bounds [{min} m, {max} m]")]
    RangeOutOfBounds { got: f64, min: f64, max: f64 },
    #[error("insufficient motion: projected range {got:.4} m is below the minimum {min} m")]
    InsufficientMotion { got: f64, min: f64 },
    #[error("marked motion points opposite the {0:?} axis")]
    WrongDirection(MovementKind),
    #[error("neutral pose has not been captured")]
    NeutralMissing,
    #[error("custom axis must be a finite non-zero vector")]
    BadCustomAxis,
    #[error("profile invalid: {0}")]
    Invalid(String),
}

/// Exercise movement measured by a profile. `Custom` carries its own
/// world-frame axis of increasing displacement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MovementKind {
    Retraction,
    Bending,
    Extension,
    Custom([f64; 3]),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CalibrationMode {
    Manual,
    Automatic,
}

/// Completed calibration: immutable, freely shareable between threads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationProfile {
    pub neutral_position: [f64; 3],
    pub neutral_orientation: Quat,
    /// Unit vector (world frame) along which displacement increases.
    pub axis: [f64; 3],
    /// Maximum range `R` in meters.
    pub max_range_m: f64,
    pub mode: CalibrationMode,
    pub movement: MovementKind,
}

impl CalibrationProfile {
    /// Instantaneous displacement of `sample` from the neutral position,
    /// projected on the calibrated axis and clamped at zero (protraction
    /// never reads as negative retraction).
    pub fn retraction_distance(&self, sample: &PoseSample) -> f64 {
        vec3::dot(vec3::sub(sample.position, self.neutral_position), self.axis).max(0.0)
    }

    /// Validates invariants on profiles coming from disk or the network.
    pub fn validate(&self) -> Result<(), CalibrationError> {
        let n = vec3::norm(self.axis);
        if !n.is_finite() || (n - 1.0).abs() > 1e-6 {
            return Err(CalibrationError::Invalid(format!(
                "axis norm {n} is not unit length"
            )));
        }
        if !self.max_range_m.is_finite() || self.max_range_m <= 0.0 {
            return Err(CalibrationError::Invalid(format!(
                "max_range_m {} must be positive",
                self.max_range_m
            )));
        }
        if matches!(self.movement, MovementKind::Retraction) && self.axis[1].abs() > 1e-9 {
            return Err(CalibrationError::Invalid(
                "retraction axis must have zero vertical component".into(),
            ));
        }
        if !vec3::is_finite(self.neutral_position) {
            return Err(CalibrationError::Invalid(
                "neutral position must be finite".into(),
            ));
        }
        Ok(())
    }
}

/// Builder for a calibration profile. Single-threaded by design; the
/// completed profile is the shareable artifact.
#[derive(Debug, Clone)]
pub struct Calibrator {
    movement: MovementKind,
    range_min_m: f64,
    range_max_m: f64,
    neutral: Option<(PoseSample, [f64; 3])>,
}

impl Calibrator {
    pub fn new(movement: MovementKind) -> Self {
        Calibrator {
            movement,
            range_min_m: DEFAULT_RANGE_MIN_M,
            range_max_m: DEFAULT_RANGE_MAX_M,
            neutral: None,
        }
    }

    /// Overrides the accepted `R` bounds.
    pub fn with_range_bounds(mut self, min_m: f64, max_m: f64) -> Self {
        self.range_min_m = min_m;
        self.range_max_m = max_m;
        self
    }

    /// Captures the neutral (resting) pose and derives the movement axis
    /// from it. Errors if the pose admits no axis for the chosen movement.
    pub fn capture_neutral(&mut self, sample: &PoseSample) -> Result<(), CalibrationError> {
        let axis = derive_axis(&self.movement, sample.orientation)?;
        self.neutral = Some((sample.clone(), axis));
        Ok(())
    }

    /// Axis derived at the last neutral capture, if any.
    pub fn axis(&self) -> Option<[f64; 3]> {
        self.neutral.as_ref().map(|(_, a)| *a)
    }

    /// Completes calibration with an operator-chosen maximum range.
    pub fn set_manual_range(&self, range_m: f64) -> Result<CalibrationProfile, CalibrationError> {
        let (neutral, axis) = self
            .neutral
            .as_ref()
            .ok_or(CalibrationError::NeutralMissing)?;
        if !range_m.is_finite() || range_m < self.range_min_m || range_m > self.range_max_m {
            return Err(CalibrationError::RangeOutOfBounds {
                got: range_m,
                min: self.range_min_m,
                max: self.range_max_m,
            });
        }
        Ok(self.finish(neutral, *axis, range_m, CalibrationMode::Manual))
    }

    /// Completes calibration from two marked samples: the maximum range is
    /// the start→end displacement projected on the axis. If no neutral was
    /// captured, `mark_start` doubles as the neutral pose.
    pub fn auto_calibrate(
        &mut self,
        mark_start: &PoseSample,
        mark_end: &PoseSample,
    ) -> Result<CalibrationProfile, CalibrationError> {
        if self.neutral.is_none() {
            self.capture_neutral(mark_start)?;
        }
        let (neutral, axis) = self.neutral.as_ref().unwrap();
        let projected = vec3::dot(
            vec3::sub(mark_end.position, mark_start.position),
            *axis,
        );
        if projected < 0.0 {
            return Err(CalibrationError::WrongDirection(self.movement.clone()));
        }
        if projected < self.range_min_m {
            return Err(CalibrationError::InsufficientMotion {
                got: projected,
                min: self.range_min_m,
            });
        }
        if projected > self.range_max_m {
            return Err(CalibrationError::RangeOutOfBounds {
                got: projected,
                min: self.range_min_m,
                max: self.range_max_m,
            });
        }
        Ok(self.finish(neutral, *axis, projected, CalibrationMode::Automatic))
    }

    fn finish(
        &self,
        neutral: &PoseSample,
        axis: [f64; 3],
        range_m: f64,
        mode: CalibrationMode,
    ) -> CalibrationProfile {
        CalibrationProfile {
            neutral_position: neutral.position,
            neutral_orientation: neutral.orientation,
            axis,
            max_range_m: range_m,
            mode,
            movement: self.movement.clone(),
        }
    }
}

fn derive_axis(movement: &MovementKind, orientation: Quat) -> Result<[f64; 3], CalibrationError> {
    match movement {
        // Backward translation in the horizontal plane.
        MovementKind::Retraction => {
            let f = head_forward(orientation);
            horizontal_unit([-f[0], 0.0, -f[2]])
        }
        // Backward along the full (vertical-plane) direction the head faces.
        MovementKind::Extension => {
            let f = head_forward(orientation);
            Ok(vec3::normalize([-f[0], -f[1], -f[2]]))
        }
        // Sideways translation: horizontal component of the head's local +X.
        MovementKind::Bending => {
            let right = orientation.rotate([1.0, 0.0, 0.0]);
            horizontal_unit([right[0], 0.0, right[2]])
        }
        MovementKind::Custom(axis) => {
            let n = vec3::norm(*axis);
            if !n.is_finite() || n < DEGENERATE_EPS {
                return Err(CalibrationError::BadCustomAxis);
            }
            Ok(vec3::normalize(*axis))
        }
    }
}

fn horizontal_unit(v: [f64; 3]) -> Result<[f64; 3], CalibrationError> {
    let n = vec3::norm(v);
    if n < DEGENERATE_EPS {
        return Err(CalibrationError::DegeneratePose { norm: n });
    }
    Ok(vec3::normalize(v))
}
