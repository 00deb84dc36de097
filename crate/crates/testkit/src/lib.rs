//! Test-support code for the retraction engine: an offline brute-force
//! segmenter used as an independence oracle for the streaming state machine,
//! plus random script/level generators for property-style tests.
//!
//! The oracle deliberately avoids the engine's streaming path: it computes
//! the whole displacement series up front, segments it by release-threshold
//! crossings, and applies the validity rules to each complete segment.

use rand::Rng;
use retraction_engine::calibration::CalibrationProfile;
use retraction_engine::level::{LevelKind, LevelSpec};
use retraction_engine::pose::Trace;
use retraction_engine::session::{EngineParams, RejectReason};
use retraction_engine::synth::{ExcursionSpec, NoiseSpec, TraceScript};

/// Offline verdict for one complete excursion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Verdict {
    Valid,
    Rejected(RejectReason),
}

/// One excursion found by the offline segmenter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleRep {
    /// Time of the first sample at/above the release threshold.
    pub t_start: f64,
    /// Time of the first sample back below the release threshold.
    pub t_end: f64,
    pub peak_m: f64,
    pub movement_s: f64,
    pub hold_s: f64,
    pub verdict: Verdict,
}

/// Brute-force segmentation of a whole trace.
///
/// Finds maximal runs of samples with displacement at/above the release
/// threshold; a run followed by a below-threshold sample is a complete
/// excursion (a run that hits the end of the trace is discarded, matching
/// the engine). Hold time is the longest span of in-band samples, where
/// gaps between in-band samples that contain out-of-band samples are
/// forgiven (and counted) when strictly shorter than the dropout tolerance.
pub fn segment_trace(
    trace: &Trace,
    profile: &CalibrationProfile,
    level: &LevelSpec,
    params: &EngineParams,
) -> Vec<OracleRep> {
    let release_m = params.release_fraction * profile.max_range_m;
    let target_m = level.target_fraction * profile.max_range_m;
    let band_m = (level.target_fraction - params.hysteresis_band) * profile.max_range_m;

    let d: Vec<f64> = trace
        .samples
        .iter()
        .map(|s| profile.retraction_distance(s))
        .collect();
    let t: Vec<f64> = trace.samples.iter().map(|s| s.t).collect();
    let n = d.len();

    let mut reps = Vec::new();
    let mut i = 0;
    while i < n {
        if d[i] < release_m {
            i += 1;
            continue;
        }
        let start = i;
        while i < n && d[i] >= release_m {
            i += 1;
        }
        let end = i - 1; // last in-run index
        if i >= n {
            break; // incomplete trailing excursion: never scored
        }

        let peak_m = d[start..=end]
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max);
        let movement_s = t[i] - t[start];
        let hold_s = best_hold(
            &t[start..=end],
            &d[start..=end],
            band_m,
            params.hold_dropout_tolerance_s,
        );

        let verdict = if peak_m < target_m {
            Verdict::Rejected(RejectReason::TargetNotReached)
        } else if movement_s < level.min_movement_s {
            Verdict::Rejected(RejectReason::TooShort)
        } else if level.kind == LevelKind::Endurance && hold_s < level.min_hold_s {
            Verdict::Rejected(RejectReason::HoldTooShort)
        } else {
            Verdict::Valid
        };
        reps.push(OracleRep {
            t_start: t[start],
            t_end: t[i],
            peak_m,
            movement_s,
            hold_s,
            verdict,
        });
    }
    reps
}

/// Longest hold over one excursion's samples: maximal runs of in-band
/// samples, merged across gaps strictly shorter than the tolerance.
fn best_hold(t: &[f64], d: &[f64], band_m: f64, tolerance_s: f64) -> f64 {
    // collect in-band runs as (start_time, end_time)
    let mut runs: Vec<(f64, f64)> = Vec::new();
    let mut i = 0;
    while i < t.len() {
        if d[i] < band_m {
            i += 1;
            continue;
        }
        let start = t[i];
        let mut end = t[i];
        while i < t.len() && d[i] >= band_m {
            end = t[i];
            i += 1;
        }
        runs.push((start, end));
    }
    // merge runs separated by forgivable gaps (the gap time counts)
    let mut best: f64 = 0.0;
    let mut merged: Option<(f64, f64)> = None;
    for (start, end) in runs {
        merged = match merged {
            Some((m_start, m_end)) if start - m_end < tolerance_s => Some((m_start, end)),
            Some((m_start, m_end)) => {
                best = best.max(m_end - m_start);
                Some((start, end))
            }
            None => Some((start, end)),
        };
    }
    if let Some((m_start, m_end)) = merged {
        best = best.max(m_end - m_start);
    }
    best
}

/// Valid repetitions in segmentation order.
pub fn valid_reps(reps: &[OracleRep]) -> Vec<OracleRep> {
    reps.iter()
        .filter(|r| r.verdict == Verdict::Valid)
        .cloned()
        .collect()
}

/// A level used purely for equivalence tests: a custom target with a rep
/// requirement no random trace can reach, so the completion cap never
/// hides a mismatch.
pub fn random_level(rng: &mut impl Rng) -> LevelSpec {
    let kind = if rng.gen_bool(0.5) {
        LevelKind::Strength
    } else {
        LevelKind::Endurance
    };
    LevelSpec {
        level_index: 1,
        kind,
        target_fraction: rng.gen_range(0.15..=1.0),
        required_reps: 1_000_000,
        min_movement_s: rng.gen_range(0.0..10.0),
        min_hold_s: match kind {
            LevelKind::Strength => 0.0,
            LevelKind::Endurance => rng.gen_range(0.0..8.0),
        },
    }
}

/// Engine parameters consistent with `level` (release below target,
/// hysteresis below release).
pub fn random_params(rng: &mut impl Rng, level: &LevelSpec) -> EngineParams {
    let release_fraction = level.target_fraction * rng.gen_range(0.2..0.8);
    EngineParams {
        release_fraction,
        hysteresis_band: release_fraction * rng.gen_range(0.05..0.9),
        hold_dropout_tolerance_s: rng.gen_range(0.0..0.4),
    }
}

/// An unconstrained random script: amplitudes above, below, and around the
/// thresholds, with optional noise and spikes. Good for oracle equivalence,
/// not for known-outcome assertions.
pub fn random_script(rng: &mut impl Rng) -> TraceScript {
    let count = rng.gen_range(1..=6);
    let excursions = (0..count)
        .map(|_| ExcursionSpec {
            amplitude_fraction: rng.gen_range(0.0..1.4),
            rise_s: rng.gen_range(0.3..4.0),
            hold_s: rng.gen_range(0.0..12.0),
            fall_s: rng.gen_range(0.3..4.0),
            rest_s: rng.gen_range(0.3..2.0),
        })
        .collect();
    let noisy = rng.gen_bool(0.5);
    TraceScript {
        excursions,
        sample_rate_hz: rng.gen_range(15.0..80.0),
        noise: if noisy {
            NoiseSpec {
                gaussian_sigma_m: rng.gen_range(0.0..0.006),
                spike_probability_per_sample: rng.gen_range(0.0..0.02),
                spike_magnitude_m: rng.gen_range(0.0..0.15),
            }
        } else {
            NoiseSpec::default()
        },
        jerk_events: Vec::new(),
        seed: rng.gen(),
    }
}

/// A script whose every excursion comfortably passes `level` at the default
/// engine parameters: margins of at least `0.08·R` in amplitude and about a
/// second in duration, so bounded noise below a third of the hysteresis
/// band cannot change the completed-rep count.
pub fn clean_passing_script(
    rng: &mut impl Rng,
    level: &LevelSpec,
    count: usize,
    seed: u64,
) -> TraceScript {
    let params = EngineParams::default();
    let excursions = (0..count)
        .map(|_| {
            let amplitude_fraction =
                rng.gen_range((level.target_fraction + 0.08)..=(level.target_fraction + 0.3));
            let rise_s: f64 = rng.gen_range(1.0..3.0);
            let fall_s: f64 = rng.gen_range(1.0..3.0);
            // closed-form raised-cosine crossing fractions, as in the
            // generator's ground truth
            let frac_above = |y: f64| {
                1.0 - (1.0 - 2.0 * y / amplitude_fraction)
                    .clamp(-1.0, 1.0)
                    .acos()
                    / std::f64::consts::PI
            };
            let shoulders_release = frac_above(params.release_fraction) * (rise_s + fall_s);
            let shoulders_band =
                frac_above(level.target_fraction - params.hysteresis_band) * (rise_s + fall_s);
            let mut hold_s: f64 = rng.gen_range(0.5..3.0);
            hold_s = hold_s.max(level.min_movement_s + 1.0 - shoulders_release);
            if level.kind == LevelKind::Endurance {
                hold_s = hold_s.max(level.min_hold_s + 1.0 - shoulders_band);
            }
            ExcursionSpec {
                amplitude_fraction,
                rise_s,
                hold_s,
                fall_s,
                rest_s: rng.gen_range(1.0..2.5),
            }
        })
        .collect();
    TraceScript {
        excursions,
        sample_rate_hz: rng.gen_range(25.0..60.0),
        noise: NoiseSpec::default(),
        jerk_events: Vec::new(),
        seed,
    }
}

/// A fixed calibration profile for tests.
pub fn test_profile(max_range_m: f64) -> CalibrationProfile {
    use retraction_engine::calibration::{CalibrationMode, MovementKind};
    use retraction_engine::pose::Quat;
    CalibrationProfile {
        neutral_position: [0.02, 1.58, -0.11],
        neutral_orientation: Quat::IDENTITY,
        axis: [0.0, 0.0, 1.0],
        max_range_m,
        mode: CalibrationMode::Manual,
        movement: MovementKind::Retraction,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn oracle_finds_scripted_excursions() {
        let profile = test_profile(0.05);
        let script =
            retraction_engine::synth::uniform_script(3, 0.9, 2.0, 4.0, 2.0, 2.0, 50.0, 1);
        let (trace, _) = script.generate(&profile).unwrap();
        let level = LevelSpec::builtin(1).unwrap();
        let reps = segment_trace(&trace, &profile, &level, &EngineParams::default());
        assert_eq!(reps.len(), 3);
        for rep in &reps {
            assert_eq!(rep.verdict, Verdict::Valid);
            assert!((rep.peak_m - 0.045).abs() < 1e-9);
            assert!(rep.movement_s > 6.0);
        }
    }

    #[test]
    fn oracle_ignores_incomplete_trailing_excursion() {
        let profile = test_profile(0.05);
        let script =
            retraction_engine::synth::uniform_script(1, 0.9, 2.0, 30.0, 2.0, 2.0, 50.0, 1);
        let (mut trace, _) = script.generate(&profile).unwrap();
        // cut the trace mid-hold
        trace.samples.truncate(trace.samples.len() / 2);
        let level = LevelSpec::builtin(1).unwrap();
        let reps = segment_trace(&trace, &profile, &level, &EngineParams::default());
        assert!(reps.is_empty());
    }

    #[test]
    fn clean_passing_scripts_pass_their_level() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for level_index in 1..=6u8 {
            let level = LevelSpec::builtin(level_index).unwrap();
            let script = clean_passing_script(&mut rng, &level, 4, 99);
            let profile = test_profile(0.05);
            let (trace, _) = script.generate(&profile).unwrap();
            let reps = segment_trace(&trace, &profile, &level, &EngineParams::default());
            assert_eq!(reps.len(), 4, "level {level_index}");
            assert!(
                reps.iter().all(|r| r.verdict == Verdict::Valid),
                "level {level_index}: {reps:?}"
            );
        }
    }
}
