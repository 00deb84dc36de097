//! Deterministic synthetic pose traces with ground-truth labels.
//!
//! A [`TraceScript`] describes a sequence of displacement excursions along a
//! profile's calibrated axis. Each excursion follows a raised-cosine shape
//! (C¹-smooth, so clean traces never trip the motion guard):
//!
//! ```text
//! d(u) = A · (1 − cos(πu)) / 2      u ∈ [0, 1] over the rise, mirrored
//!                                   over the fall, d = A during the hold
//! ```
//!
//! Determinism contract: the generator is a pure function of (script,
//! profile). Random noise comes from a ChaCha8 stream cipher seeded with
//! `script.seed` (Gaussian displacement noise, then one uniform draw per
//! sample for spikes, then a unit-sphere direction per spike, in that
//! order), so the same script yields bit-identical traces on every run and
//! platform.
//!
//! Besides the uniform sample grid, the generator inserts samples exactly at
//! each excursion's phase boundaries. The clean peak therefore equals
//! `amplitude_fraction · R` exactly, whatever the sample rate.

use crate::calibration::CalibrationProfile;
use crate::level::{LevelKind, LevelSpec};
use crate::pose::{vec3, PoseSample, Trace};
use crate::session::{EngineParams, RejectReason};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, UnitSphere};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::PI;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcursionSpec {
    /// Peak displacement as a fraction of the profile's maximum range.
    pub amplitude_fraction: f64,
    pub rise_s: f64,
    pub hold_s: f64,
    pub fall_s: f64,
    /// Rest at neutral after the fall, before the next excursion.
    pub rest_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseSpec {
    /// Std-dev of i.i.d. Gaussian noise added to each position component, m.
    pub gaussian_sigma_m: f64,
    /// Per-sample probability of a single-sample displacement outlier.
    pub spike_probability_per_sample: f64,
    /// Magnitude of a spike outlier, m (random direction).
    pub spike_magnitude_m: f64,
}

/// A single-sample angular-velocity impulse, for exercising the guard.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JerkEvent {
    pub t: f64,
    pub angular_speed_rad_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceScript {
    pub excursions: Vec<ExcursionSpec>,
    pub sample_rate_hz: f64,
    #[serde(default)]
    pub noise: NoiseSpec,
    #[serde(default)]
    pub jerk_events: Vec<JerkEvent>,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, thiserror::Error)]
pub enum SynthError {
    #[error("invalid script: {0}")]
    InvalidScript(String),
    #[error("calibration profile: {0}")]
    Profile(#[from] crate::calibration::CalibrationError),
}

/// Expected engine outcome for one scripted excursion under one level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExpectedOutcome {
    Valid,
    Rejected(RejectReason),
    /// The excursion never crosses the release threshold.
    NotDetected,
}

/// What the generator knows about one excursion it produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcursionTruth {
    pub index: u32,
    pub start_t: f64,
    /// Instant the clean displacement first equals the full amplitude.
    pub crest_t: f64,
    /// End of the fall phase (start of the rest).
    pub end_t: f64,
    pub amplitude_m: f64,
    /// Expected classification per built-in level (1–6) at default engine
    /// parameters, from the clean analytic displacement. Reliable when
    /// margins to the thresholds exceed roughly one sample period and the
    /// noise amplitude.
    pub outcomes: BTreeMap<u8, ExpectedOutcome>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct GroundTruth {
    pub excursions: Vec<ExcursionTruth>,
}

impl TraceScript {
    pub fn validate(&self) -> Result<(), SynthError> {
        if !(self.sample_rate_hz > 0.0) {
            return Err(SynthError::InvalidScript(format!(
                "sample_rate_hz {} must be positive",
                self.sample_rate_hz
            )));
        }
        for (i, e) in self.excursions.iter().enumerate() {
            if !(0.0..=1.5).contains(&e.amplitude_fraction) {
                return Err(SynthError::InvalidScript(format!(
                    "excursion {i}: amplitude_fraction {} outside [0, 1.5]",
                    e.amplitude_fraction
                )));
            }
            for (name, v) in [
                ("rise_s", e.rise_s),
                ("hold_s", e.hold_s),
                ("fall_s", e.fall_s),
                ("rest_s", e.rest_s),
            ] {
                if !(v >= 0.0 && v.is_finite()) {
                    return Err(SynthError::InvalidScript(format!(
                        "excursion {i}: {name} {v} must be finite and >= 0"
                    )));
                }
            }
        }
        let n = &self.noise;
        if n.gaussian_sigma_m < 0.0 || n.spike_magnitude_m < 0.0 {
            return Err(SynthError::InvalidScript(
                "noise magnitudes must be >= 0".into(),
            ));
        }
        if !(0.0..=1.0).contains(&n.spike_probability_per_sample) {
            return Err(SynthError::InvalidScript(format!(
                "spike probability {} outside [0, 1]",
                n.spike_probability_per_sample
            )));
        }
        for (i, j) in self.jerk_events.iter().enumerate() {
            if j.t < 0.0 || j.angular_speed_rad_s < 0.0 {
                return Err(SynthError::InvalidScript(format!(
                    "jerk event {i} must have t >= 0 and speed >= 0"
                )));
            }
        }
        Ok(())
    }

    /// Generates the trace and its ground truth.
    pub fn generate(
        &self,
        profile: &CalibrationProfile,
    ) -> Result<(Trace, GroundTruth), SynthError> {
        self.validate()?;
        profile.validate()?;

        let timeline = Timeline::from_script(self);
        let total = timeline.total_s;

        // Uniform grid plus exact phase-boundary instants.
        let dt = 1.0 / self.sample_rate_hz;
        let mut times: Vec<f64> = Vec::new();
        let n_grid = (total / dt).floor() as usize;
        for i in 0..=n_grid {
            times.push(i as f64 * dt);
        }
        for seg in &timeline.segments {
            times.extend([seg.start_t, seg.crest_t, seg.fall_start_t, seg.end_t]);
        }
        if total > 0.0 {
            times.push(total);
        }
        times.sort_by(|a, b| a.partial_cmp(b).unwrap());
        times.dedup();

        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let gaussian = Normal::new(0.0, self.noise.gaussian_sigma_m)
            .map_err(|e| SynthError::InvalidScript(e.to_string()))?;

        let mut samples: Vec<PoseSample> = Vec::with_capacity(times.len());
        for &t in &times {
            let (d, accel) = timeline.displacement_and_accel(t, profile.max_range_m);
            let mut position = vec3::add(profile.neutral_position, vec3::scale(profile.axis, d));
            if self.noise.gaussian_sigma_m > 0.0 {
                for component in &mut position {
                    *component += gaussian.sample(&mut rng);
                }
            }
            if self.noise.spike_probability_per_sample > 0.0
                && rng.gen::<f64>() < self.noise.spike_probability_per_sample
            {
                let dir: [f64; 3] = UnitSphere.sample(&mut rng);
                position = vec3::add(position, vec3::scale(dir, self.noise.spike_magnitude_m));
            }
            samples.push(PoseSample {
                t,
                position,
                orientation: profile.neutral_orientation,
                angular_velocity: Some([0.0; 3]),
                linear_acceleration: Some(vec3::scale(profile.axis, accel)),
            });
        }

        // Jerk impulses: the first sample at/after each event time carries
        // the requested angular speed (about the vertical axis).
        for jerk in &self.jerk_events {
            let idx = samples.partition_point(|s| s.t < jerk.t);
            if let Some(sample) = samples.get_mut(idx) {
                let current = sample.angular_velocity.unwrap_or([0.0; 3])[1];
                sample.angular_velocity = Some([0.0, current.max(jerk.angular_speed_rad_s), 0.0]);
            }
        }

        let truth = self.ground_truth(profile, &timeline);
        let trace = Trace::new(samples, self.sample_rate_hz)
            .map_err(|e| SynthError::InvalidScript(e.to_string()))?;
        Ok((trace, truth))
    }

    fn ground_truth(&self, profile: &CalibrationProfile, timeline: &Timeline) -> GroundTruth {
        let excursions = timeline
            .segments
            .iter()
            .enumerate()
            .map(|(i, seg)| {
                let spec = &self.excursions[i];
                let mut outcomes = BTreeMap::new();
                for level in crate::level::builtin_levels() {
                    outcomes.insert(
                        level.level_index,
                        classify_excursion(
                            spec,
                            profile.max_range_m,
                            &level,
                            &EngineParams::default(),
                        ),
                    );
                }
                ExcursionTruth {
                    index: i as u32 + 1,
                    start_t: seg.start_t,
                    crest_t: seg.crest_t,
                    end_t: seg.end_t,
                    amplitude_m: spec.amplitude_fraction * profile.max_range_m,
                    outcomes,
                }
            })
            .collect();
        GroundTruth { excursions }
    }
}

/// Closed-form fraction of the rise spent below a threshold `y` of the
/// amplitude `a`: the raised cosine crosses y at u = acos(1 − 2y/a)/π.
fn crossing_fraction(y: f64, a: f64) -> f64 {
    (1.0 - 2.0 * y / a).clamp(-1.0, 1.0).acos() / PI
}

/// Time the clean excursion spends at/above threshold `y_m` (meters).
fn time_above(spec: &ExcursionSpec, amplitude_m: f64, y_m: f64) -> f64 {
    if amplitude_m <= y_m {
        return 0.0;
    }
    let u = crossing_fraction(y_m, amplitude_m);
    spec.hold_s + (1.0 - u) * (spec.rise_s + spec.fall_s)
}

/// Expected classification of one clean scripted excursion under a level.
pub fn classify_excursion(
    spec: &ExcursionSpec,
    max_range_m: f64,
    level: &LevelSpec,
    params: &EngineParams,
) -> ExpectedOutcome {
    let amplitude_m = spec.amplitude_fraction * max_range_m;
    let release_m = params.release_fraction * max_range_m;
    let target_m = level.target_fraction * max_range_m;
    if amplitude_m <= release_m {
        return ExpectedOutcome::NotDetected;
    }
    if amplitude_m < target_m {
        return ExpectedOutcome::Rejected(RejectReason::TargetNotReached);
    }
    let movement_s = time_above(spec, amplitude_m, release_m);
    if movement_s < level.min_movement_s {
        return ExpectedOutcome::Rejected(RejectReason::TooShort);
    }
    if level.kind == LevelKind::Endurance {
        let band_m = (level.target_fraction - params.hysteresis_band) * max_range_m;
        let hold_s = time_above(spec, amplitude_m, band_m);
        if hold_s < level.min_hold_s {
            return ExpectedOutcome::Rejected(RejectReason::HoldTooShort);
        }
    }
    ExpectedOutcome::Valid
}

struct Segment {
    start_t: f64,
    crest_t: f64,
    fall_start_t: f64,
    end_t: f64,
}

struct Timeline {
    segments: Vec<Segment>,
    specs: Vec<ExcursionSpec>,
    total_s: f64,
}

impl Timeline {
    fn from_script(script: &TraceScript) -> Timeline {
        let mut segments = Vec::with_capacity(script.excursions.len());
        let mut t = 0.0;
        for e in &script.excursions {
            let start_t = t;
            let crest_t = start_t + e.rise_s;
            let fall_start_t = crest_t + e.hold_s;
            let end_t = fall_start_t + e.fall_s;
            segments.push(Segment {
                start_t,
                crest_t,
                fall_start_t,
                end_t,
            });
            t = end_t + e.rest_s;
        }
        Timeline {
            segments,
            specs: script.excursions.clone(),
            total_s: t,
        }
    }

    /// Clean displacement (m) and its second derivative along the axis
    /// (m/s²) at time `t`.
    fn displacement_and_accel(&self, t: f64, max_range_m: f64) -> (f64, f64) {
        // segments are ordered and non-overlapping; find the first one
        // whose span could contain t
        let idx = self.segments.partition_point(|s| s.end_t < t);
        let Some(seg) = self.segments.get(idx) else {
            return (0.0, 0.0);
        };
        if t < seg.start_t {
            return (0.0, 0.0);
        }
        let spec = &self.specs[idx];
        let a = spec.amplitude_fraction * max_range_m;
        if t < seg.crest_t {
            // t >= start_t and t < crest_t imply rise_s > 0
            let u = (t - seg.start_t) / spec.rise_s;
            let d = a * (1.0 - (PI * u).cos()) / 2.0;
            let dd = a * (PI / spec.rise_s).powi(2) / 2.0 * (PI * u).cos();
            (d, dd)
        } else if t < seg.fall_start_t {
            (a, 0.0)
        } else if spec.fall_s > 0.0 && t <= seg.end_t {
            // u = 1 at the end boundary gives exactly 0
            let u = (t - seg.fall_start_t) / spec.fall_s;
            let d = a * (1.0 + (PI * u).cos()) / 2.0;
            let dd = -a * (PI / spec.fall_s).powi(2) / 2.0 * (PI * u).cos();
            (d, dd)
        } else if t == seg.end_t {
            // zero-width fall: the boundary instant still reads the crest
            (a, 0.0)
        } else {
            (0.0, 0.0)
        }
    }
}

/// Convenience script: `count` identical clean excursions.
pub fn uniform_script(
    count: usize,
    amplitude_fraction: f64,
    rise_s: f64,
    hold_s: f64,
    fall_s: f64,
    rest_s: f64,
    sample_rate_hz: f64,
    seed: u64,
) -> TraceScript {
    TraceScript {
        excursions: vec![
            ExcursionSpec {
                amplitude_fraction,
                rise_s,
                hold_s,
                fall_s,
                rest_s,
            };
            count
        ],
        sample_rate_hz,
        noise: NoiseSpec::default(),
        jerk_events: Vec::new(),
        seed,
    }
}
