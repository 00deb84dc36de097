//! Session persistence, replayable on-disk layout, and reporting.
//!
//! One directory per session:
//!
//! ```text
//! <session-id>/
//!   meta.json      schema version, creation time, level, event-log name
//!   profile.json   calibration profile
//!   params.json    engine + guard tunables
//!   events.jsonl   one SessionEvent per line
//!   summary.json   SessionSummary
//! ```
//!
//! Streams are JSONL, documents are JSON, reports are CSV or plain text.
//! Every numeric field round-trips losslessly. `created_at` is the only
//! wall-clock value; everything else is deterministic given the inputs.

use crate::calibration::CalibrationProfile;
use crate::guard::GuardParams;
use crate::level::{LevelKind, LevelSpec};
use crate::session::{DistanceStats, EngineParams, SessionEvent, SessionSummary};
use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

/// Current on-disk schema version; newer files refuse to load.
pub const SCHEMA_VERSION: u32 = 1;

const EVENTS_FILE: &str = "events.jsonl";

/// The single tunables document (`params.json`, also the CLI `--params`
/// file): engine thresholds plus guard thresholds.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct SessionParams {
    pub engine: EngineParams,
    pub guard: GuardParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct SessionMeta {
    schema_version: u32,
    created_at: DateTime<Utc>,
    level: LevelSpec,
    events_file: String,
}

/// Everything known about one stored session.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionRecord {
    pub profile: CalibrationProfile,
    pub level: LevelSpec,
    pub params: SessionParams,
    pub events: Vec<SessionEvent>,
    pub summary: SessionSummary,
    pub created_at: DateTime<Utc>,
    pub schema_version: u32,
}

impl SessionRecord {
    pub fn new(
        profile: CalibrationProfile,
        level: LevelSpec,
        params: SessionParams,
        events: Vec<SessionEvent>,
        summary: SessionSummary,
    ) -> SessionRecord {
        SessionRecord {
            profile,
            level,
            params,
            events,
            summary,
            created_at: Utc::now(),
            schema_version: SCHEMA_VERSION,
        }
    }
}

/// Paths written by [`save_session`].
#[derive(Debug, Clone, PartialEq)]
pub struct SavedPaths {
    pub dir: PathBuf,
    pub meta: PathBuf,
    pub profile: PathBuf,
    pub params: PathBuf,
    pub events: PathBuf,
    pub summary: PathBuf,
}

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("{path} line {line}: {source}")]
    EventLogLine {
        path: PathBuf,
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("missing file: {0}")]
    MissingFile(PathBuf),
    #[error("schema version {found} is newer than supported version {supported}")]
    UnsupportedVersion { found: u32, supported: u32 },
    #[error("no session records given")]
    NoRecords,
    #[error("invalid stored session: {0}")]
    Invalid(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> StoreError + '_ {
    move |source| {
        if source.kind() == std::io::ErrorKind::NotFound {
            StoreError::MissingFile(path.to_path_buf())
        } else {
            StoreError::Io {
                path: path.to_path_buf(),
                source,
            }
        }
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), StoreError> {
    let body = serde_json::to_string_pretty(value).map_err(|source| StoreError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    fs::write(path, body + "\n").map_err(io_err(path))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, StoreError> {
    let body = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&body).map_err(|source| StoreError::Json {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes a complete session directory. Creates `dir` if needed.
pub fn save_session(dir: &Path, record: &SessionRecord) -> Result<SavedPaths, StoreError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let paths = SavedPaths {
        dir: dir.to_path_buf(),
        meta: dir.join("meta.json"),
        profile: dir.join("profile.json"),
        params: dir.join("params.json"),
        events: dir.join(EVENTS_FILE),
        summary: dir.join("summary.json"),
    };
    write_json(
        &paths.meta,
        &SessionMeta {
            schema_version: record.schema_version,
            created_at: record.created_at,
            level: record.level.clone(),
            events_file: EVENTS_FILE.to_string(),
        },
    )?;
    write_json(&paths.profile, &record.profile)?;
    write_json(&paths.params, &record.params)?;
    write_json(&paths.summary, &record.summary)?;

    let mut out = fs::File::create(&paths.events).map_err(io_err(&paths.events))?;
    for event in &record.events {
        writeln!(out, "{}", event.to_jsonl()).map_err(io_err(&paths.events))?;
    }
    Ok(paths)
}

/// Loads a session directory written by [`save_session`].
pub fn load_session(dir: &Path) -> Result<SessionRecord, StoreError> {
    let meta_path = dir.join("meta.json");
    let meta: SessionMeta = read_json(&meta_path)?;
    if meta.schema_version > SCHEMA_VERSION {
        return Err(StoreError::UnsupportedVersion {
            found: meta.schema_version,
            supported: SCHEMA_VERSION,
        });
    }
    let profile: CalibrationProfile = read_json(&dir.join("profile.json"))?;
    profile
        .validate()
        .map_err(|e| StoreError::Invalid(e.to_string()))?;
    let params: SessionParams = read_json(&dir.join("params.json"))?;
    let summary: SessionSummary = read_json(&dir.join("summary.json"))?;
    meta.level
        .validate()
        .map_err(|e| StoreError::Invalid(e.to_string()))?;

    let events_path = dir.join(&meta.events_file);
    let file = fs::File::open(&events_path).map_err(io_err(&events_path))?;
    let mut events = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(&events_path))?;
        if line.trim().is_empty() {
            continue;
        }
        let event = SessionEvent::parse(&line).map_err(|source| StoreError::EventLogLine {
            path: events_path.clone(),
            line: idx + 1,
            source,
        })?;
        events.push(event);
    }

    Ok(SessionRecord {
        profile,
        level: meta.level,
        params,
        events,
        summary,
        created_at: meta.created_at,
        schema_version: meta.schema_version,
    })
}

/// True if `dir` looks like a stored session.
pub fn is_session_dir(dir: &Path) -> bool {
    dir.join("meta.json").is_file()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub session: String,
    pub level_index: u8,
    pub kind: LevelKind,
    pub reps: u32,
    pub required_reps: u32,
    pub completed: bool,
    pub stats: Option<DistanceStats>,
    pub warning_count: u32,
    pub wall_time_s: f64,
}

/// Per-session rows plus a cross-session aggregate.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub rows: Vec<ReportRow>,
    pub total_reps: u32,
    pub completed_sessions: usize,
    pub cross_session_stats: Option<DistanceStats>,
}

/// Builds the therapist-facing report over one or more stored sessions.
pub fn report(records: &[(String, SessionRecord)]) -> Result<Report, StoreError> {
    if records.is_empty() {
        return Err(StoreError::NoRecords);
    }
    let mut rows = Vec::with_capacity(records.len());
    let mut all_peaks: Vec<f64> = Vec::new();
    for (name, record) in records {
        let summary = &record.summary;
        all_peaks.extend(summary.reps.iter().map(|r| r.peak_m));
        rows.push(ReportRow {
            session: name.clone(),
            level_index: record.level.level_index,
            kind: record.level.kind,
            reps: summary.reps.len() as u32,
            required_reps: record.level.required_reps,
            completed: summary.completed,
            stats: summary.distance_stats,
            warning_count: summary.warning_count,
            wall_time_s: summary.wall_time_s,
        });
    }
    Ok(Report {
        total_reps: rows.iter().map(|r| r.reps).sum(),
        completed_sessions: rows.iter().filter(|r| r.completed).count(),
        cross_session_stats: DistanceStats::from_peaks(&all_peaks),
        rows,
    })
}

impl Report {
    const CSV_HEADER: [&'static str; 10] = [
        "session",
        "level",
        "kind",
        "reps",
        "required_reps",
        "completed",
        "peak_max_m",
        "peak_min_m",
        "peak_mean_m",
        "warnings",
    ];

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(Self::CSV_HEADER).expect("csv header");
        for row in &self.rows {
            let (max, min, mean) = match row.stats {
                Some(s) => (
                    format!("{:.6}", s.max_m),
                    format!("{:.6}", s.min_m),
                    format!("{:.6}", s.mean_m),
                ),
                None => (String::new(), String::new(), String::new()),
            };
            w.write_record([
                row.session.as_str(),
                &row.level_index.to_string(),
                match row.kind {
                    LevelKind::Strength => "strength",
                    LevelKind::Endurance => "endurance",
                },
                &row.reps.to_string(),
                &row.required_reps.to_string(),
                &row.completed.to_string(),
                &max,
                &min,
                &mean,
                &row.warning_count.to_string(),
            ])
            .expect("csv row");
        }
        String::from_utf8(w.into_inner().expect("csv flush")).expect("utf8 csv")
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:<24} {:>5} {:>9} {:>7} {:>9} {:>10} {:>10} {:>10} {:>8}\n",
            "session", "level", "kind", "reps", "completed", "peak_max", "peak_min", "peak_mean",
            "warnings"
        ));
        for row in &self.rows {
            let fmt = |v: Option<f64>| match v {
                Some(x) => format!("{x:.4}"),
                None => "-".to_string(),
            };
            out.push_str(&format!(
                "{:<24} {:>5} {:>9} {:>7} {:>9} {:>10} {:>10} {:>10} {:>8}\n",
                row.session,
                row.level_index,
                match row.kind {
                    LevelKind::Strength => "strength",
                    LevelKind::Endurance => "endurance",
                },
                format!("{}/{}", row.reps, row.required_reps),
                if row.completed { "yes" } else { "no" },
                fmt(row.stats.map(|s| s.max_m)),
                fmt(row.stats.map(|s| s.min_m)),
                fmt(row.stats.map(|s| s.mean_m)),
                row.warning_count,
            ));
        }
        out.push_str(&format!(
            "\nsessions: {}   completed: {}   total reps: {}\n",
            self.rows.len(),
            self.completed_sessions,
            self.total_reps
        ));
        if let Some(s) = self.cross_session_stats {
            out.push_str(&format!(
                "cross-session peaks: max {:.4} m, min {:.4} m, mean {:.4} m, range {:.4} m\n",
                s.max_m, s.min_m, s.mean_m, s.range_m
            ));
        }
        out
    }
}
