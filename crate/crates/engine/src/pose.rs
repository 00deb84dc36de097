//! 6-DoF pose samples and the newline-delimited JSON wire format.
//!
//! A [`PoseSample`] is one timestamped headset reading: world-frame position,
//! world-from-head orientation, and (optionally) angular velocity and linear
//! acceleration. Coordinate convention, fixed by this crate's wire format:
//! right-handed, Y up, head-local forward is (0, 0, -1).
//!
//! One record per line:
//!
//! ```text
//! {"t":<s>,"p":[x,y,z],"q":[w,x,y,z],"w":[wx,wy,wz],"a":[ax,ay,az]}
//! ```
//!
//! `w` and `a` are optional; absence means the channel is unavailable.

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::io::BufRead;

/// Accepted band for incoming quaternion norms. Outside the band the record
/// is rejected rather than silently renormalized; inside it is normalized.
pub const QUAT_NORM_MIN: f64 = 0.99;
pub const QUAT_NORM_MAX: f64 = 1.01;

pub(crate) mod vec3 {
    pub fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
        a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
    }

    pub fn norm(v: [f64; 3]) -> f64 {
        dot(v, v).sqrt()
    }

    pub fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
        [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
    }

    pub fn add(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
        [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
    }

    pub fn scale(v: [f64; 3], s: f64) -> [f64; 3] {
        [v[0] * s, v[1] * s, v[2] * s]
    }

    pub fn normalize(v: [f64; 3]) -> [f64; 3] {
        let n = norm(v);
        scale(v, 1.0 / n)
    }

    pub fn is_finite(v: [f64; 3]) -> bool {
        v.iter().all(|c| c.is_finite())
    }
}

/// Errors produced while parsing or validating pose data.
#[derive(Debug, thiserror::Error)]
pub enum PoseError {
    #[error("malformed pose record: {0}")]
    Json(#[from] serde_json::Error),
    #[error("missing field `{0}`")]
    MissingField(&'static str),
    #[error("field `{field}`: {reason}")]
    BadField { field: String, reason: String },
    #[error("non-finite value in field `{0}`")]
    NonFinite(String),
    #[error("quaternion norm {norm:.6} outside [{QUAT_NORM_MIN}, {QUAT_NORM_MAX}]")]
    QuaternionNorm { norm: f64 },
    #[error("line {line}: {source}")]
    AtLine {
        line: usize,
        #[source]
        source: Box<PoseError>,
    },
    #[error("timestamps must be strictly increasing: sample {index} has t={t} after t={prev}")]
    NonMonotonic { index: usize, t: f64, prev: f64 },
    #[error("trace contains no samples")]
    Empty,
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Unit quaternion (w, x, y, z) representing a world-from-head rotation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quat {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Quat {
    pub const IDENTITY: Quat = Quat {
        w: 1.0,
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    pub fn new(w: f64, x: f64, y: f64, z: f64) -> Self {
        Quat { w, x, y, z }
    }

    pub fn from_axis_angle(axis: [f64; 3], angle_rad: f64) -> Self {
        let axis = vec3::normalize(axis);
        let (s, c) = (angle_rad / 2.0).sin_cos();
        Quat {
            w: c,
            x: axis[0] * s,
            y: axis[1] * s,
            z: axis[2] * s,
        }
    }

    pub fn norm(&self) -> f64 {
        (self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn normalized(&self) -> Quat {
        let n = self.norm();
        Quat {
            w: self.w / n,
            x: self.x / n,
            y: self.y / n,
            z: self.z / n,
        }
    }

    /// Rotates a world-frame vector by this quaternion (q v q*), expanded form.
    pub fn rotate(&self, v: [f64; 3]) -> [f64; 3] {
        let (w, x, y, z) = (self.w, self.x, self.y, self.z);
        [
            (1.0 - 2.0 * (y * y + z * z)) * v[0]
                + 2.0 * (x * y - w * z) * v[1]
                + 2.0 * (x * z + w * y) * v[2],
            2.0 * (x * y + w * z) * v[0]
                + (1.0 - 2.0 * (x * x + z * z)) * v[1]
                + 2.0 * (y * z - w * x) * v[2],
            2.0 * (x * z - w * y) * v[0]
                + 2.0 * (y * z + w * x) * v[1]
                + (1.0 - 2.0 * (x * x + y * y)) * v[2],
        ]
    }

    pub fn mul(self, rhs: Quat) -> Quat {
        Quat {
            w: self.w * rhs.w - self.x * rhs.x - self.y * rhs.y - self.z * rhs.z,
            x: self.w * rhs.x + self.x * rhs.w + self.y * rhs.z - self.z * rhs.y,
            y: self.w * rhs.y - self.x * rhs.z + self.y * rhs.w + self.z * rhs.x,
            z: self.w * rhs.z + self.x * rhs.y - self.y * rhs.x + self.z * rhs.w,
        }
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.w, self.x, self.y, self.z]
    }
}

impl Serialize for Quat {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.as_array().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Quat {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let [w, x, y, z] = <[f64; 4]>::deserialize(deserializer)?;
        let q = Quat::new(w, x, y, z);
        if !q.as_array().iter().all(|c| c.is_finite()) {
            return Err(D::Error::custom("non-finite quaternion component"));
        }
        let n = q.norm();
        if !(QUAT_NORM_MIN..=QUAT_NORM_MAX).contains(&n) {
            return Err(D::Error::custom(format!(
                "quaternion norm {n:.6} outside [{QUAT_NORM_MIN}, {QUAT_NORM_MAX}]"
            )));
        }
        Ok(q.normalized())
    }
}

/// World-frame direction of the head's local forward axis (0, 0, -1).
pub fn head_forward(orientation: Quat) -> [f64; 3] {
    orientation.rotate([0.0, 0.0, -1.0])
}

/// One timestamped 6-DoF sensor reading.
///
/// Immutable after construction; `t` is seconds on a monotonic session clock.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PoseSample {
    pub t: f64,
    #[serde(rename = "p")]
    pub position: [f64; 3],
    #[serde(rename = "q")]
    pub orientation: Quat,
    #[serde(rename = "w", skip_serializing_if = "Option::is_none")]
    pub angular_velocity: Option<[f64; 3]>,
    #[serde(rename = "a", skip_serializing_if = "Option::is_none")]
    pub linear_acceleration: Option<[f64; 3]>,
}

fn field_f64(v: &serde_json::Value, field: &str) -> Result<f64, PoseError> {
    let x = v.as_f64().ok_or_else(|| PoseError::BadField {
        field: field.to_string(),
        reason: format!("expected a number, got {v}"),
    })?;
    if !x.is_finite() {
        return Err(PoseError::NonFinite(field.to_string()));
    }
    Ok(x)
}

fn field_vec3(obj: &serde_json::Value, field: &str) -> Result<[f64; 3], PoseError> {
    let arr = obj
        .get(field)
        .ok_or(PoseError::MissingField(match field {
            "p" => "p",
            _ => "q",
        }))?
        .as_array()
        .ok_or_else(|| PoseError::BadField {
            field: field.to_string(),
            reason: "expected an array of 3 numbers".into(),
        })?;
    if arr.len() != 3 {
        return Err(PoseError::BadField {
            field: field.to_string(),
            reason: format!("expected 3 components, got {}", arr.len()),
        });
    }
    let mut out = [0.0; 3];
    for (i, v) in arr.iter().enumerate() {
        out[i] = field_f64(v, &format!("{field}[{i}]"))?;
    }
    Ok(out)
}

fn optional_vec3(obj: &serde_json::Value, field: &str) -> Result<Option<[f64; 3]>, PoseError> {
    match obj.get(field) {
        None | Some(serde_json::Value::Null) => Ok(None),
        Some(_) => field_vec3(obj, field).map(Some),
    }
}

impl PoseSample {
    /// Parses one JSONL pose record, validating finiteness and renormalizing
    /// the orientation quaternion.
    pub fn parse(line: &str) -> Result<PoseSample, PoseError> {
        let v: serde_json::Value = serde_json::from_str(line)?;
        let t = field_f64(v.get("t").ok_or(PoseError::MissingField("t"))?, "t")?;
        let position = field_vec3(&v, "p")?;

        let q_arr = v
            .get("q")
            .ok_or(PoseError::MissingField("q"))?
            .as_array()
            .ok_or_else(|| PoseError::BadField {
                field: "q".into(),
                reason: "expected an array of 4 numbers".into(),
            })?;
        if q_arr.len() != 4 {
            return Err(PoseError::BadField {
                field: "q".into(),
                reason: format!("expected 4 components, got {}", q_arr.len()),
            });
        }
        let mut q = [0.0; 4];
        for (i, c) in q_arr.iter().enumerate() {
            q[i] = field_f64(c, &format!("q[{i}]"))?;
        }
        let quat = Quat::new(q[0], q[1], q[2], q[3]);
        let n = quat.norm();
        if !(QUAT_NORM_MIN..=QUAT_NORM_MAX).contains(&n) {
            return Err(PoseError::QuaternionNorm { norm: n });
        }

        Ok(PoseSample {
            t,
            position,
            orientation: quat.normalized(),
            angular_velocity: optional_vec3(&v, "w")?,
            linear_acceleration: optional_vec3(&v, "a")?,
        })
    }

    /// Serializes this sample as a single JSONL record (no trailing newline).
    pub fn to_jsonl(&self) -> String {
        serde_json::to_string(self).expect("pose sample serializes")
    }
}

/// Ordered sequence of pose samples with strictly increasing timestamps.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub samples: Vec<PoseSample>,
    /// Nominal sampling rate in Hz; metadata only.
    pub nominal_rate: f64,
}

impl Trace {
    pub fn new(samples: Vec<PoseSample>, nominal_rate: f64) -> Result<Trace, PoseError> {
        if samples.is_empty() {
            return Err(PoseError::Empty);
        }
        for i in 1..samples.len() {
            if samples[i].t <= samples[i - 1].t {
                return Err(PoseError::NonMonotonic {
                    index: i,
                    t: samples[i].t,
                    prev: samples[i - 1].t,
                });
            }
        }
        Ok(Trace {
            samples,
            nominal_rate,
        })
    }

    /// Reads a JSONL pose trace; errors carry 1-based line numbers. The
    /// nominal rate is estimated from the mean sample spacing.
    pub fn from_jsonl(reader: impl BufRead) -> Result<Trace, PoseError> {
        let mut samples = Vec::new();
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let sample = PoseSample::parse(&line).map_err(|e| PoseError::AtLine {
                line: idx + 1,
                source: Box::new(e),
            })?;
            samples.push(sample);
        }
        let rate = estimate_rate(&samples);
        Trace::new(samples, rate)
    }

    pub fn to_jsonl(&self, mut writer: impl std::io::Write) -> Result<(), PoseError> {
        for s in &self.samples {
            writeln!(writer, "{}", s.to_jsonl())?;
        }
        Ok(())
    }

    pub fn duration_s(&self) -> f64 {
        match (self.samples.first(), self.samples.last()) {
            (Some(a), Some(b)) => b.t - a.t,
            _ => 0.0,
        }
    }
}

fn estimate_rate(samples: &[PoseSample]) -> f64 {
    if samples.len() < 2 {
        return 0.0;
    }
    let span = samples[samples.len() - 1].t - samples[0].t;
    if span <= 0.0 {
        return 0.0;
    }
    (samples.len() - 1) as f64 / span
}
