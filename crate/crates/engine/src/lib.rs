//! Headless session engine for neck-retraction rehabilitation exercises.
//!
//! The engine consumes 6-DoF head-pose streams (recorded, synthetic, or
//! live over TCP) and turns them into scored exercise sessions:
//!
//! * [`pose`] — the sample data model and JSONL wire format.
//! * [`calibration`] — neutral anchor, movement axis, and maximum range.
//! * [`level`] — the six built-in strength/endurance levels.
//! * [`session`] — the streaming repetition state machine and event log.
//! * [`guard`] — erroneous-motion (too fast) warnings.
//! * [`synth`] — deterministic synthetic trace generation with ground truth.
//! * [`store`] — session persistence and reporting.
//! * [`server`] — live TCP ingestion, one session per connection.
//! * [`ux`] — subjective-evaluation instruments and scoring.
//!
//! See the guide under `book/` for concepts and worked examples.

pub mod calibration;
pub mod guard;
pub mod level;
pub mod pose;
pub mod server;
pub mod session;
pub mod store;
pub mod synth;
pub mod ux;

pub use calibration::{CalibrationMode, CalibrationProfile, Calibrator, MovementKind};
pub use guard::{GuardChannel, GuardParams, MissingChannelPolicy, MotionGuard};
pub use level::{builtin_levels, LevelKind, LevelSpec};
pub use pose::{head_forward, PoseSample, Quat, Trace};
pub use session::{
    replay_trace, DistanceStats, EngineParams, EventKind, RejectReason, RepRecord, ReplayOutcome,
    Session, SessionEvent, SessionSummary,
};
pub use synth::{ExcursionSpec, GroundTruth, JerkEvent, NoiseSpec, TraceScript};
