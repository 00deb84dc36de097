//! Streaming repetition detection and session scoring.
//!
//! A [`Session`] consumes pose samples against a calibration profile and a
//! level, tracking one excursion at a time. An excursion runs from the first
//! sample at/above `release_fraction · R` to the first sample back below it.
//! On return to neutral the excursion is scored:
//!
//! * the peak must reach `target_fraction · R`,
//! * the whole movement must last at least `min_movement_s`, and
//! * endurance levels additionally need a continuous hold of `min_hold_s`
//!   at/above `(target_fraction − hysteresis_band) · R`; dips below that
//!   band shorter than `hold_dropout_tolerance_s` are forgiven and the hold
//!   timer keeps accruing through them.
//!
//! Failing excursions are rejected with a single reason, checked in the
//! order: target not reached, movement too short, hold too short. Warnings
//! from the motion guard are forwarded as events and never invalidate reps.
//!
//! The engine is deterministic: the same profile, level, parameters, and
//! trace always produce the same event log.

use crate::calibration::CalibrationProfile;
use crate::guard::{GuardChannel, GuardError, GuardParams, MotionGuard};
use crate::level::{LevelError, LevelKind, LevelSpec};
use crate::pose::{PoseError, PoseSample, Trace};
use serde::{Deserialize, Serialize};

/// Detection thresholds shared by every level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EngineParams {
    /// An excursion begins/ends when displacement crosses this fraction of R.
    pub release_fraction: f64,
    /// The hold band extends this fraction of R below the target.
    pub hysteresis_band: f64,
    /// Dips below the hold band shorter than this are forgiven.
    pub hold_dropout_tolerance_s: f64,
}

impl Default for EngineParams {
    fn default() -> Self {
        EngineParams {
            release_fraction: 0.10,
            hysteresis_band: 0.05,
            hold_dropout_tolerance_s: 0.15,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    TargetNotReached,
    TooShort,
    HoldTooShort,
}

/// One completed repetition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RepRecord {
    pub peak_m: f64,
    pub movement_s: f64,
    pub hold_s: f64,
}

/// Aggregate statistics over per-rep peak displacements.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistanceStats {
    pub max_m: f64,
    pub min_m: f64,
    pub mean_m: f64,
    /// Exactly `max_m - min_m`.
    pub range_m: f64,
}

impl DistanceStats {
    /// `None` for an empty peak list.
    pub fn from_peaks(peaks: &[f64]) -> Option<DistanceStats> {
        if peaks.is_empty() {
            return None;
        }
        let max_m = peaks.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min_m = peaks.iter().cloned().fold(f64::INFINITY, f64::min);
        let mean_m = peaks.iter().sum::<f64>() / peaks.len() as f64;
        Some(DistanceStats {
            max_m,
            min_m,
            mean_m,
            range_m: max_m - min_m,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionSummary {
    pub reps: Vec<RepRecord>,
    pub distance_stats: Option<DistanceStats>,
    pub completed: bool,
    /// Elapsed session clock (first to last ingested sample), seconds.
    pub wall_time_s: f64,
    pub warning_count: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EventKind {
    RepCompleted {
        index: u32,
        peak_m: f64,
        movement_s: f64,
        hold_s: f64,
    },
    RepRejected {
        reason: RejectReason,
    },
    WarningIssued {
        channel: GuardChannel,
        value: f64,
    },
    LevelCompleted {
        summary: SessionSummary,
    },
}

/// One entry in the session event log; `t` is the triggering sample's time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionEvent {
    pub t: f64,
    #[serde(flatten)]
    pub kind: EventKind,
}

impl SessionEvent {
    pub fn to_jsonl(&self) -> String {
        serde_json::to_string(self).expect("session event serializes")
    }

    pub fn parse(line: &str) -> Result<SessionEvent, serde_json::Error> {
        serde_json::from_str(line)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("release fraction {release} must be positive and below the target fraction {target}")]
    ReleaseNotBelowTarget { release: f64, target: f64 },
    #[error("hysteresis band {band} must be non-negative and below the release fraction {release}")]
    BadHysteresis { band: f64, release: f64 },
    #[error("hold dropout tolerance must be non-negative, got {0}")]
    BadDropoutTolerance(f64),
    #[error(transparent)]
    Level(#[from] LevelError),
    #[error("calibration profile: {0}")]
    Profile(#[from] crate::calibration::CalibrationError),
    #[error("guard: {0}")]
    Guard(#[from] GuardError),
}

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("session already completed")]
    SessionClosed,
    #[error("out-of-order sample: t={t} does not advance past t={prev}")]
    NonMonotonic { t: f64, prev: f64 },
    #[error(transparent)]
    Guard(#[from] GuardError),
}

/// Where the state machine currently is; informational.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnginePhase {
    /// Below the release threshold.
    Neutral,
    /// Left neutral, target not yet reached.
    Moving,
    /// Target reached and currently in the hold band.
    AtTarget,
    /// Target was reached earlier; currently below the hold band.
    Returning,
}

#[derive(Debug, Clone)]
struct HoldTracker {
    run_start: Option<f64>,
    last_in_band: Option<f64>,
    dipped: bool,
    best_s: f64,
}

impl HoldTracker {
    fn new() -> Self {
        HoldTracker {
            run_start: None,
            last_in_band: None,
            dipped: false,
            best_s: 0.0,
        }
    }

    fn update(&mut self, t: f64, in_band: bool, tolerance_s: f64) {
        if in_band {
            match (self.run_start, self.last_in_band) {
                (Some(_), Some(last)) if self.dipped && t - last >= tolerance_s => {
                    // dip too long: the previous run is already folded into
                    // best_s, start a fresh one
                    self.run_start = Some(t);
                }
                (None, _) => self.run_start = Some(t),
                _ => {}
            }
            self.last_in_band = Some(t);
            self.dipped = false;
            self.best_s = self.best_s.max(t - self.run_start.unwrap());
        } else if self.run_start.is_some() {
            self.dipped = true;
        }
    }
}

#[derive(Debug, Clone)]
struct Excursion {
    start_t: f64,
    peak_m: f64,
    reached_target: bool,
    hold: HoldTracker,
}

/// Single-owner streaming state machine. May move between threads, never
/// mutated concurrently.
#[derive(Debug, Clone)]
pub struct Session {
    profile: CalibrationProfile,
    level: LevelSpec,
    params: EngineParams,
    guard: MotionGuard,
    release_m: f64,
    target_m: f64,
    hold_band_m: f64,
    excursion: Option<Excursion>,
    events: Vec<SessionEvent>,
    reps: Vec<RepRecord>,
    warning_count: u32,
    first_t: Option<f64>,
    last_t: Option<f64>,
    completed: Option<SessionSummary>,
}

impl Session {
    pub fn new(
        profile: CalibrationProfile,
        level: LevelSpec,
        params: EngineParams,
        guard_params: GuardParams,
    ) -> Result<Session, ConfigError> {
        profile.validate()?;
        level.validate()?;
        if !(params.release_fraction > 0.0 && params.release_fraction < level.target_fraction) {
            return Err(ConfigError::ReleaseNotBelowTarget {
                release: params.release_fraction,
                target: level.target_fraction,
            });
        }
        if !(params.hysteresis_band >= 0.0 && params.hysteresis_band < params.release_fraction) {
            return Err(ConfigError::BadHysteresis {
                band: params.hysteresis_band,
                release: params.release_fraction,
            });
        }
        if params.hold_dropout_tolerance_s < 0.0 {
            return Err(ConfigError::BadDropoutTolerance(
                params.hold_dropout_tolerance_s,
            ));
        }
        let guard = MotionGuard::new(guard_params)?;
        let release_m = params.release_fraction * profile.max_range_m;
        let target_m = level.target_fraction * profile.max_range_m;
        let hold_band_m = (level.target_fraction - params.hysteresis_band) * profile.max_range_m;
        Ok(Session {
            profile,
            level,
            params,
            guard,
            release_m,
            target_m,
            hold_band_m,
            excursion: None,
            events: Vec::new(),
            reps: Vec::new(),
            warning_count: 0,
            first_t: None,
            last_t: None,
            completed: None,
        })
    }

    /// Convenience constructor with default engine and guard parameters.
    pub fn with_defaults(
        profile: CalibrationProfile,
        level: LevelSpec,
    ) -> Result<Session, ConfigError> {
        Session::new(profile, level, EngineParams::default(), GuardParams::default())
    }

    pub fn level(&self) -> &LevelSpec {
        &self.level
    }

    pub fn params(&self) -> &EngineParams {
        &self.params
    }

    pub fn profile(&self) -> &CalibrationProfile {
        &self.profile
    }

    pub fn rep_count(&self) -> u32 {
        self.reps.len() as u32
    }

    pub fn is_completed(&self) -> bool {
        self.completed.is_some()
    }

    /// Full event log so far.
    pub fn events(&self) -> &[SessionEvent] {
        &self.events
    }

    pub fn phase(&self) -> EnginePhase {
        match &self.excursion {
            None => EnginePhase::Neutral,
            Some(e) if !e.reached_target => EnginePhase::Moving,
            Some(e) => {
                let in_band = e.hold.run_start.is_some() && !e.hold.dipped;
                if in_band {
                    EnginePhase::AtTarget
                } else {
                    EnginePhase::Returning
                }
            }
        }
    }

    /// Feeds one sample, in session-clock order. Returns the events this
    /// sample produced, in emission order.
    pub fn ingest(&mut self, sample: &PoseSample) -> Result<Vec<SessionEvent>, IngestError> {
        if self.completed.is_some() {
            return Err(IngestError::SessionClosed);
        }
        if let Some(prev) = self.last_t {
            if sample.t <= prev {
                return Err(IngestError::NonMonotonic {
                    t: sample.t,
                    prev,
                });
            }
        }
        let exceedances = self.guard.check(sample)?;

        self.first_t.get_or_insert(sample.t);
        self.last_t = Some(sample.t);

        let mut emitted: Vec<SessionEvent> = exceedances
            .into_iter()
            .map(|e| SessionEvent {
                t: sample.t,
                kind: EventKind::WarningIssued {
                    channel: e.channel,
                    value: e.value,
                },
            })
            .collect();
        self.warning_count += emitted.len() as u32;

        let d = self.profile.retraction_distance(sample);
        match &mut self.excursion {
            None => {
                if d >= self.release_m {
                    let mut excursion = Excursion {
                        start_t: sample.t,
                        peak_m: d,
                        reached_target: d >= self.target_m,
                        hold: HoldTracker::new(),
                    };
                    excursion.hold.update(
                        sample.t,
                        d >= self.hold_band_m,
                        self.params.hold_dropout_tolerance_s,
                    );
                    self.excursion = Some(excursion);
                }
            }
            Some(excursion) => {
                if d < self.release_m {
                    let finished = self.excursion.take().unwrap();
                    self.score_excursion(finished, sample.t, &mut emitted);
                } else {
                    excursion.peak_m = excursion.peak_m.max(d);
                    excursion.reached_target |= d >= self.target_m;
                    excursion.hold.update(
                        sample.t,
                        d >= self.hold_band_m,
                        self.params.hold_dropout_tolerance_s,
                    );
                }
            }
        }

        self.events.extend(emitted.iter().cloned());
        Ok(emitted)
    }

    fn score_excursion(&mut self, excursion: Excursion, end_t: f64, emitted: &mut Vec<SessionEvent>) {
        let movement_s = end_t - excursion.start_t;
        let hold_s = excursion.hold.best_s;
        let reason = if !excursion.reached_target {
            Some(RejectReason::TargetNotReached)
        } else if movement_s < self.level.min_movement_s {
            Some(RejectReason::TooShort)
        } else if self.level.kind == LevelKind::Endurance && hold_s < self.level.min_hold_s {
            Some(RejectReason::HoldTooShort)
        } else {
            None
        };
        match reason {
            Some(reason) => emitted.push(SessionEvent {
                t: end_t,
                kind: EventKind::RepRejected { reason },
            }),
            None => {
                self.reps.push(RepRecord {
                    peak_m: excursion.peak_m,
                    movement_s,
                    hold_s,
                });
                let index = self.reps.len() as u32;
                emitted.push(SessionEvent {
                    t: end_t,
                    kind: EventKind::RepCompleted {
                        index,
                        peak_m: excursion.peak_m,
                        movement_s,
                        hold_s,
                    },
                });
                if index == self.level.required_reps {
                    let summary = self.make_summary(true);
                    self.completed = Some(summary.clone());
                    emitted.push(SessionEvent {
                        t: end_t,
                        kind: EventKind::LevelCompleted { summary },
                    });
                }
            }
        }
    }

    fn make_summary(&self, completed: bool) -> SessionSummary {
        let peaks: Vec<f64> = self.reps.iter().map(|r| r.peak_m).collect();
        SessionSummary {
            reps: self.reps.clone(),
            distance_stats: DistanceStats::from_peaks(&peaks),
            completed,
            wall_time_s: match (self.first_t, self.last_t) {
                (Some(a), Some(b)) => b - a,
                _ => 0.0,
            },
            warning_count: self.warning_count,
        }
    }

    /// Closes the session and returns the summary. An excursion still in
    /// progress is discarded unscored.
    pub fn finish(self) -> SessionSummary {
        match self.completed {
            Some(summary) => summary,
            None => self.make_summary(self.reps.len() as u32 == self.level.required_reps),
        }
    }
}

/// Outcome of feeding a whole recorded trace through a fresh session.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayOutcome {
    pub events: Vec<SessionEvent>,
    pub summary: SessionSummary,
}

#[derive(Debug, thiserror::Error)]
pub enum ReplayError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Pose(#[from] PoseError),
}

/// Deterministically re-scores a trace: feeds every sample until the level
/// completes or the trace ends.
pub fn replay_trace(
    profile: &CalibrationProfile,
    level: &LevelSpec,
    params: &EngineParams,
    guard: &GuardParams,
    trace: &Trace,
) -> Result<ReplayOutcome, ReplayError> {
    if trace.samples.is_empty() {
        return Err(PoseError::Empty.into());
    }
    let mut session = Session::new(profile.clone(), level.clone(), *params, guard.clone())?;
    let mut events = Vec::new();
    for sample in &trace.samples {
        events.extend(session.ingest(sample)?);
        if session.is_completed() {
            break;
        }
    }
    let summary = session.finish();
    Ok(ReplayOutcome { events, summary })
}
