//! Exercise level definitions.
//!
//! Six built-in levels: levels 1–3 train strength (reach the target and keep
//! the movement above a minimum duration), levels 4–6 train endurance (the
//! same, plus a minimum continuous hold at the target). Targets are 30%,
//! 60%, and 90% of the calibrated maximum range, 30 repetitions each.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LevelKind {
    Strength,
    Endurance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelSpec {
    pub level_index: u8,
    pub kind: LevelKind,
    /// Target displacement as a fraction of the calibrated maximum range.
    pub target_fraction: f64,
    pub required_reps: u32,
    /// Minimum duration of a repetition, leaving neutral to returning.
    pub min_movement_s: f64,
    /// Minimum continuous hold at/above target; zero for strength levels.
    pub min_hold_s: f64,
}

/// Default minimum movement duration, applied to every built-in level.
pub const DEFAULT_MIN_MOVEMENT_S: f64 = 6.0;
/// Default minimum hold, applied to the endurance levels.
pub const DEFAULT_MIN_HOLD_S: f64 = 10.0;
/// Repetitions required to complete any built-in level.
pub const DEFAULT_REQUIRED_REPS: u32 = 30;

const TARGET_FRACTIONS: [f64; 3] = [0.30, 0.60, 0.90];

#[derive(Debug, thiserror::Error)]
pub enum LevelError {
    #[error("no built-in level {0}; valid levels are 1..=6")]
    UnknownLevel(u8),
    #[error("level {index}: {reason}")]
    Invalid { index: u8, reason: String },
}

/// The six built-in levels.
pub fn builtin_levels() -> [LevelSpec; 6] {
    let mut out: Vec<LevelSpec> = Vec::with_capacity(6);
    for (kind, base) in [(LevelKind::Strength, 0u8), (LevelKind::Endurance, 3u8)] {
        for (i, &fraction) in TARGET_FRACTIONS.iter().enumerate() {
            out.push(LevelSpec {
                level_index: base + i as u8 + 1,
                kind,
                target_fraction: fraction,
                required_reps: DEFAULT_REQUIRED_REPS,
                min_movement_s: DEFAULT_MIN_MOVEMENT_S,
                min_hold_s: match kind {
                    LevelKind::Strength => 0.0,
                    LevelKind::Endurance => DEFAULT_MIN_HOLD_S,
                },
            });
        }
    }
    out.try_into().expect("exactly six levels")
}

impl LevelSpec {
    /// Looks up one of the six built-in levels by 1-based index.
    pub fn builtin(index: u8) -> Result<LevelSpec, LevelError> {
        if !(1..=6).contains(&index) {
            return Err(LevelError::UnknownLevel(index));
        }
        Ok(builtin_levels()[index as usize - 1].clone())
    }

    pub fn validate(&self) -> Result<(), LevelError> {
        let fail = |reason: String| LevelError::Invalid {
            index: self.level_index,
            reason,
        };
        if !(self.target_fraction > 0.0 && self.target_fraction <= 1.0) {
            return Err(fail(format!(
                "target_fraction {} must be in (0, 1]",
                self.target_fraction
            )));
        }
        if self.required_reps < 1 {
            return Err(fail("required_reps must be at least 1".into()));
        }
        if self.min_movement_s < 0.0 || self.min_hold_s < 0.0 {
            return Err(fail("durations must be non-negative".into()));
        }
        if self.kind == LevelKind::Strength && self.min_hold_s != 0.0 {
            return Err(fail("strength levels must have min_hold_s = 0".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_table() {
        let levels = builtin_levels();
        assert_eq!(levels.len(), 6);
        for (i, level) in levels.iter().enumerate() {
            assert_eq!(level.level_index as usize, i + 1);
            assert_eq!(level.required_reps, 30);
            assert_eq!(level.min_movement_s, 6.0);
            assert_eq!(level.target_fraction, [0.30, 0.60, 0.90][i % 3]);
            level.validate().unwrap();
        }
        assert_eq!(levels[0].kind, LevelKind::Strength);
        assert_eq!(levels[0].min_hold_s, 0.0);
        assert_eq!(levels[2].kind, LevelKind::Strength);
        assert_eq!(levels[2].target_fraction, 0.90);
        assert_eq!(levels[5].kind, LevelKind::Endurance);
        assert_eq!(levels[5].target_fraction, 0.90);
        assert_eq!(levels[5].min_hold_s, 10.0);
    }

    #[test]
    fn builtin_lookup_bounds() {
        assert!(LevelSpec::builtin(0).is_err());
        assert!(LevelSpec::builtin(7).is_err());
        assert_eq!(LevelSpec::builtin(3).unwrap().target_fraction, 0.90);
    }

    #[test]
    fn validation_rejects_bad_specs() {
        let mut level = LevelSpec::builtin(1).unwrap();
        level.required_reps = 0;
        assert!(level.validate().is_err());

        let mut level = LevelSpec::builtin(1).unwrap();
        level.target_fraction = 1.2;
        assert!(level.validate().is_err());

        let mut level = LevelSpec::builtin(1).unwrap();
        level.min_hold_s = 3.0; // strength level
        assert!(level.validate().is_err());
    }
}
