//! Acceptance suite: one test per criterion, each printing a PASS/FAIL line.
//!
//! Run with:
//!
//! ```text
//! cargo test -p retraction-cli --test acceptance -- --nocapture
//! ```
//!
//! Every tolerance and threshold is pinned here in code; nothing is left to
//! later calibration.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use retraction_engine::calibration::{Calibrator, MovementKind};
use retraction_engine::guard::GuardParams;
use retraction_engine::level::{builtin_levels, LevelKind, LevelSpec};
use retraction_engine::pose::{PoseSample, Quat, Trace};
use retraction_engine::server::{StreamConfig, StreamServer};
use retraction_engine::session::{
    replay_trace, DistanceStats, EngineParams, EventKind, RejectReason, SessionEvent,
};
use retraction_engine::synth::{uniform_script, JerkEvent, TraceScript};
use retraction_testkit as testkit;
use std::io::{BufRead, BufReader, Write};
use std::net::TcpStream;
use std::process::Command;
use std::time::{Duration, Instant};

const R: f64 = 0.05;

fn criterion(number: u32, name: &str, budget: Option<Duration>, body: impl FnOnce() -> Result<(), String>) {
    let started = Instant::now();
    let outcome = body();
    let elapsed = started.elapsed();
    let within_budget = budget.map_or(true, |b| elapsed <= b);
    match (&outcome, within_budget) {
        (Ok(()), true) => println!("[PASS] criterion {number}: {name} ({elapsed:.2?})"),
        (Ok(()), false) => {
            println!(
                "[FAIL] criterion {number}: {name} — runtime {elapsed:.2?} over budget {budget:?}"
            );
            panic!("criterion {number} exceeded its runtime budget");
        }
        (Err(e), _) => {
            println!("[FAIL] criterion {number}: {name} — {e}");
            panic!("criterion {number} failed: {e}");
        }
    }
}

fn check(ok: bool, message: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(message.into())
    }
}

fn completed_count(events: &[SessionEvent]) -> usize {
    events
        .iter()
        .filter(|e| matches!(e.kind, EventKind::RepCompleted { .. }))
        .count()
}

fn rejected_count(events: &[SessionEvent], expect: RejectReason) -> usize {
    events
        .iter()
        .filter(|e| matches!(e.kind, EventKind::RepRejected { reason } if reason == expect))
        .count()
}

fn level_completed_count(events: &[SessionEvent]) -> usize {
    events
        .iter()
        .filter(|e| matches!(e.kind, EventKind::LevelCompleted { .. }))
        .count()
}

fn warning_count(events: &[SessionEvent]) -> usize {
    events
        .iter()
        .filter(|e| matches!(e.kind, EventKind::WarningIssued { .. }))
        .count()
}

fn replay(level: &LevelSpec, trace: &Trace) -> retraction_engine::session::ReplayOutcome {
    replay_trace(
        &testkit::test_profile(R),
        level,
        &EngineParams::default(),
        &GuardParams::default(),
        trace,
    )
    .expect("replay succeeds")
}

/// Level-3 clean trace used by criteria 2 and 6: thirty 8 s excursions to
/// 0.95 R.
fn clean_level3_script(seed: u64) -> TraceScript {
    uniform_script(30, 0.95, 2.0, 4.0, 2.0, 2.0, 50.0, seed)
}

#[test]
fn criterion_1_level_table_fidelity() {
    criterion(1, "built-in level table fidelity", None, || {
        let levels = builtin_levels();
        check(levels.len() == 6, "expected six levels")?;
        let expected_fractions = [0.30, 0.60, 0.90, 0.30, 0.60, 0.90];
        for (i, level) in levels.iter().enumerate() {
            check(
                level.level_index == i as u8 + 1,
                format!("level {} index", i + 1),
            )?;
            check(
                level.target_fraction == expected_fractions[i],
                format!("level {} fraction {}", i + 1, level.target_fraction),
            )?;
            check(level.required_reps == 30, format!("level {} reps", i + 1))?;
            check(
                level.min_movement_s == 6.0,
                format!("level {} movement duration", i + 1),
            )?;
            let expected_kind = if i < 3 {
                LevelKind::Strength
            } else {
                LevelKind::Endurance
            };
            check(level.kind == expected_kind, format!("level {} kind", i + 1))?;
            let expected_hold = if i < 3 { 0.0 } else { 10.0 };
            check(
                level.min_hold_s == expected_hold,
                format!("level {} hold", i + 1),
            )?;
        }
        Ok(())
    });
}

#[test]
fn criterion_2_clean_trace_completion_replay_and_serve() {
    criterion(
        2,
        "clean level-3 trace: 30 reps + completion, replay == serve",
        Some(Duration::from_secs(5)),
        || {
            let profile = testkit::test_profile(R);
            let (trace, _) = clean_level3_script(20).generate(&profile).unwrap();
            let level = LevelSpec::builtin(3).unwrap();

            let offline = replay(&level, &trace);
            check(
                completed_count(&offline.events) == 30,
                format!("expected 30 reps, got {}", completed_count(&offline.events)),
            )?;
            check(
                level_completed_count(&offline.events) == 1,
                "expected exactly one level completion",
            )?;
            check(
                warning_count(&offline.events) == 0,
                "clean trace must not warn",
            )?;
            check(offline.summary.completed, "summary must be completed")?;

            // the same trace over a real loopback connection
            let dir = tempfile::tempdir().unwrap();
            let mut config = StreamConfig::new("127.0.0.1:0", profile, level);
            config.sessions_dir = dir.path().to_path_buf();
            config.idle_timeout_s = 10.0;
            let handle = StreamServer::bind(config).unwrap().spawn();
            let addr = handle.addr();

            let stream = TcpStream::connect(addr).unwrap();
            let mut writer = stream.try_clone().unwrap();
            let reader = BufReader::new(stream);
            let lines: Vec<String> = trace.samples.iter().map(|s| s.to_jsonl()).collect();
            let feeder = std::thread::spawn(move || {
                for line in lines {
                    if writeln!(writer, "{line}").is_err() {
                        break;
                    }
                }
                let _ = writer.flush();
                let _ = writer.shutdown(std::net::Shutdown::Write);
            });
            let wire_lines: Vec<String> = reader.lines().map_while(Result::ok).collect();
            feeder.join().unwrap();
            handle.shutdown().unwrap();

            let offline_lines: Vec<String> =
                offline.events.iter().map(|e| e.to_jsonl()).collect();
            check(
                wire_lines == offline_lines,
                format!(
                    "wire log ({} lines) differs from replay log ({} lines)",
                    wire_lines.len(),
                    offline_lines.len()
                ),
            )?;

            // and through the CLI replay subcommand
            let trace_path = dir.path().join("trace.jsonl");
            let mut buf = Vec::new();
            trace.to_jsonl(&mut buf).unwrap();
            std::fs::write(&trace_path, buf).unwrap();
            let profile_path = dir.path().join("profile.json");
            std::fs::write(
                &profile_path,
                serde_json::to_string(&testkit::test_profile(R)).unwrap(),
            )
            .unwrap();
            let output = Command::new(env!("CARGO_BIN_EXE_retrac"))
                .args([
                    "replay",
                    trace_path.to_str().unwrap(),
                    "--profile",
                    profile_path.to_str().unwrap(),
                    "--level",
                    "3",
                ])
                .output()
                .unwrap();
            check(output.status.code() == Some(0), "replay subcommand failed")?;
            let cli_stdout = String::from_utf8_lossy(&output.stdout);
            let cli_event_lines: Vec<&str> = cli_stdout
                .lines()
                .take_while(|l| l.contains("\"kind\""))
                .collect();
            check(
                cli_event_lines == offline_lines.iter().map(String::as_str).collect::<Vec<_>>(),
                "CLI replay log differs from library replay log",
            )?;
            Ok(())
        },
    );
}

#[test]
fn criterion_3_target_gating() {
    criterion(
        3,
        "0.50 R trace: 30 reps at level 1, 30 target rejections at level 2",
        Some(Duration::from_secs(5)),
        || {
            let profile = testkit::test_profile(R);
            let script = uniform_script(30, 0.50, 2.0, 4.0, 2.0, 2.0, 50.0, 30);
            let (trace, _) = script.generate(&profile).unwrap();

            let at_level_1 = replay(&LevelSpec::builtin(1).unwrap(), &trace);
            check(
                completed_count(&at_level_1.events) == 30,
                format!(
                    "level 1: expected 30 reps, got {}",
                    completed_count(&at_level_1.events)
                ),
            )?;
            check(at_level_1.summary.completed, "level 1 must complete")?;

            let at_level_2 = replay(&LevelSpec::builtin(2).unwrap(), &trace);
            check(
                completed_count(&at_level_2.events) == 0,
                "level 2 must complete zero reps",
            )?;
            check(
                rejected_count(&at_level_2.events, RejectReason::TargetNotReached) == 30,
                format!(
                    "level 2: expected 30 target rejections, got {}",
                    rejected_count(&at_level_2.events, RejectReason::TargetNotReached)
                ),
            )?;
            Ok(())
        },
    );
}

#[test]
fn criterion_4_endurance_hold() {
    criterion(
        4,
        "endurance hold: 9 s rejected, 11 s accepted, 0.1 s dips forgiven",
        Some(Duration::from_secs(5)),
        || {
            let profile = testkit::test_profile(R);
            let level6 = LevelSpec::builtin(6).unwrap();

            let (nine, _) = uniform_script(1, 0.95, 2.0, 9.0, 2.0, 2.0, 50.0, 41)
                .generate(&profile)
                .unwrap();
            let outcome = replay(&level6, &nine);
            check(
                rejected_count(&outcome.events, RejectReason::HoldTooShort) == 1
                    && completed_count(&outcome.events) == 0,
                "9 s hold must be rejected as hold-too-short",
            )?;

            let (eleven, _) = uniform_script(1, 0.95, 2.0, 11.0, 2.0, 2.0, 50.0, 42)
                .generate(&profile)
                .unwrap();
            let outcome = replay(&level6, &eleven);
            check(
                completed_count(&outcome.events) == 1,
                "11 s hold must be accepted",
            )?;

            // hand-built plateau with two 0.1 s dips below the hold band
            let mut samples = Vec::new();
            let dt = 0.02;
            let mut t = 0.0;
            let plateau = 0.95 * R;
            let dip = 0.80 * R; // below the (0.90 - 0.05) R band
            while t < 0.5 {
                samples.push((t, plateau * t / 0.5));
                t += dt;
            }
            let dips = [(4.0, 4.1), (8.0, 8.1)];
            while t < 12.5 {
                let in_dip = dips.iter().any(|&(a, b)| t >= a && t < b);
                samples.push((t, if in_dip { dip } else { plateau }));
                t += dt;
            }
            samples.push((t, 0.0));
            let trace = Trace::new(
                samples
                    .iter()
                    .map(|&(t, d)| PoseSample {
                        t,
                        position: [0.02, 1.58, -0.11 + d],
                        orientation: Quat::IDENTITY,
                        angular_velocity: Some([0.0; 3]),
                        linear_acceleration: Some([0.0; 3]),
                    })
                    .collect(),
                50.0,
            )
            .unwrap();
            let outcome = replay(&level6, &trace);
            let hold = outcome.events.iter().find_map(|e| match e.kind {
                EventKind::RepCompleted { hold_s, .. } => Some(hold_s),
                _ => None,
            });
            match hold {
                Some(hold_s) => check(
                    hold_s >= 10.0,
                    format!("dips must not reset the timer; hold was {hold_s:.2} s"),
                )?,
                None => return Err(format!("dip trace was not accepted: {:?}", outcome.events)),
            }
            Ok(())
        },
    );
}

#[test]
fn criterion_5_oracle_equivalence_1000_traces() {
    criterion(
        5,
        "1000 random traces: streaming engine == offline segmenter",
        Some(Duration::from_secs(60)),
        || {
            let mut master = ChaCha8Rng::seed_from_u64(0x0A11_CE5E);
            let profile = testkit::test_profile(R);
            for case in 0..1000 {
                let script = testkit::random_script(&mut master);
                let level = testkit::random_level(&mut master);
                let params = testkit::random_params(&mut master, &level);
                let (trace, _) = script.generate(&profile).unwrap();

                let outcome = replay_trace(
                    &profile,
                    &level,
                    &params,
                    &GuardParams::default(),
                    &trace,
                )
                .map_err(|e| format!("case {case}: replay failed: {e}"))?;
                let oracle = testkit::segment_trace(&trace, &profile, &level, &params);

                let engine_reps = completed_count(&outcome.events);
                let oracle_valid = testkit::valid_reps(&oracle);
                check(
                    engine_reps == oracle_valid.len(),
                    format!(
                        "case {case}: engine counted {engine_reps} reps, oracle {}",
                        oracle_valid.len()
                    ),
                )?;
                let engine_peaks: Vec<f64> =
                    outcome.summary.reps.iter().map(|r| r.peak_m).collect();
                for (i, (engine_peak, oracle_rep)) in
                    engine_peaks.iter().zip(&oracle_valid).enumerate()
                {
                    check(
                        (engine_peak - oracle_rep.peak_m).abs() <= 1e-9,
                        format!(
                            "case {case} rep {i}: peak {engine_peak} vs oracle {}",
                            oracle_rep.peak_m
                        ),
                    )?;
                }
            }
            Ok(())
        },
    );
}

#[test]
fn criterion_6_noise_robustness() {
    criterion(
        6,
        "Gaussian noise at band/5: rep count stays 30 on >= 99% of 100 seeds",
        Some(Duration::from_secs(30)),
        || {
            let profile = testkit::test_profile(R);
            let level = LevelSpec::builtin(3).unwrap();
            let sigma = EngineParams::default().hysteresis_band * R / 5.0;
            let mut successes = 0;
            for seed in 0..100u64 {
                let mut script = clean_level3_script(seed);
                script.noise.gaussian_sigma_m = sigma;
                let (trace, _) = script.generate(&profile).unwrap();
                let outcome = replay(&level, &trace);
                if completed_count(&outcome.events) == 30 {
                    successes += 1;
                }
            }
            check(
                successes >= 99,
                format!("only {successes}/100 noisy traces kept all 30 reps"),
            )?;
            Ok(())
        },
    );
}

#[test]
fn criterion_7_warning_mechanics() {
    criterion(
        7,
        "2.5 rad/s jerks: one warning each, cooldown-spaced, reps unchanged",
        Some(Duration::from_secs(5)),
        || {
            let profile = testkit::test_profile(R);
            let level = LevelSpec::builtin(1).unwrap();
            let base = uniform_script(5, 0.9, 2.0, 4.0, 2.0, 2.0, 50.0, 70);
            let (clean_trace, _) = base.generate(&profile).unwrap();
            let clean = replay(&level, &clean_trace);

            let jerk_times = [5.0, 15.0, 25.0];
            let mut jerky = base.clone();
            jerky.jerk_events = jerk_times
                .iter()
                .map(|&t| JerkEvent {
                    t,
                    angular_speed_rad_s: 2.5,
                })
                .collect();
            let (jerky_trace, _) = jerky.generate(&profile).unwrap();
            let outcome = replay(&level, &jerky_trace);

            let warnings: Vec<&SessionEvent> = outcome
                .events
                .iter()
                .filter(|e| matches!(e.kind, EventKind::WarningIssued { .. }))
                .collect();
            check(
                warnings.len() == jerk_times.len(),
                format!(
                    "expected {} warnings, got {}",
                    jerk_times.len(),
                    warnings.len()
                ),
            )?;
            let cooldown = GuardParams::default().warning_cooldown_s;
            for pair in warnings.windows(2) {
                check(
                    pair[1].t - pair[0].t >= cooldown,
                    format!(
                        "warnings at {} and {} closer than the {} s cooldown",
                        pair[0].t, pair[1].t, cooldown
                    ),
                )?;
            }
            for w in &warnings {
                if let EventKind::WarningIssued { value, .. } = w.kind {
                    check(
                        (value - 2.5).abs() < 1e-9,
                        format!("warning magnitude {value}"),
                    )?;
                }
            }
            check(
                clean.summary.reps == outcome.summary.reps,
                "rep outcomes must not change under jerks",
            )?;
            Ok(())
        },
    );
}

#[test]
fn criterion_8_summary_statistics() {
    criterion(8, "peak statistics: max/min/range over {40, 50, 45} mm", None, || {
        let stats = DistanceStats::from_peaks(&[0.040, 0.050, 0.045])
            .ok_or("stats must exist for a non-empty peak list")?;
        check(stats.max_m == 0.050, format!("max {}", stats.max_m))?;
        check(stats.min_m == 0.040, format!("min {}", stats.min_m))?;
        check(
            stats.range_m == stats.max_m - stats.min_m,
            "range must equal max - min exactly",
        )?;
        check(
            (stats.range_m - 0.010).abs() < 1e-12,
            format!("range {}", stats.range_m),
        )?;
        check(
            (stats.mean_m - 0.045).abs() < 1e-12,
            format!("mean {}", stats.mean_m),
        )?;

        // the engine aggregates its own rep peaks the same way
        let profile = testkit::test_profile(R);
        let mut level = LevelSpec::builtin(1).unwrap();
        level.required_reps = 3;
        let script = TraceScript {
            excursions: [0.8, 1.0, 0.9]
                .iter()
                .map(|&a| retraction_engine::synth::ExcursionSpec {
                    amplitude_fraction: a,
                    rise_s: 2.0,
                    hold_s: 4.0,
                    fall_s: 2.0,
                    rest_s: 2.0,
                })
                .collect(),
            sample_rate_hz: 50.0,
            noise: Default::default(),
            jerk_events: Vec::new(),
            seed: 8,
        };
        let (trace, _) = script.generate(&profile).unwrap();
        let outcome = replay(&level, &trace);
        let summary_stats = outcome.summary.distance_stats.ok_or("stats missing")?;
        let peaks: Vec<f64> = outcome.summary.reps.iter().map(|r| r.peak_m).collect();
        let recomputed = DistanceStats::from_peaks(&peaks).unwrap();
        check(summary_stats == recomputed, "summary stats mismatch")?;
        check(
            (summary_stats.max_m - 0.050).abs() < 1e-9
                && (summary_stats.min_m - 0.040).abs() < 1e-9
                && (summary_stats.range_m - 0.010).abs() < 1e-9,
            format!("engine-driven stats {summary_stats:?}"),
        )?;
        Ok(())
    });
}

#[test]
fn criterion_9_bipolar_score_table_reproduction() {
    criterion(
        9,
        "3-participant bipolar CSV scores to 1, 0.67, 0.33, 0.33, -0.67, 0.67, 0",
        None,
        || {
            // per-aspect response multisets derived by brute force over all
            // 27 triples: {1,1,1}, {1,1,0}, {1,0,0}, {1,0,0}, {-1,-1,0},
            // {1,1,0}, {1,-1,0}
            let dir = tempfile::tempdir().unwrap();
            let csv_path = dir.path().join("table1_responses.csv");
            std::fs::write(
                &csv_path,
                "participant_id,q1,q2,q3,q4,q5,q6,q7\n\
                 p1,1,1,1,1,-1,1,1\n\
                 p2,1,1,0,0,-1,1,-1\n\
                 p3,1,0,0,0,0,0,0\n",
            )
            .unwrap();
            let output = Command::new(env!("CARGO_BIN_EXE_retrac"))
                .args([
                    "score-ux",
                    "--instrument",
                    "bipolar",
                    "--in",
                    csv_path.to_str().unwrap(),
                ])
                .output()
                .unwrap();
            check(output.status.code() == Some(0), "score-ux failed")?;
            let table = String::from_utf8_lossy(&output.stdout).into_owned();
            let means: Vec<f64> = table
                .lines()
                .skip(1)
                .map(|l| l.rsplit(',').next().unwrap().parse().unwrap())
                .collect();
            let expected = [1.0, 0.67, 0.33, 0.33, -0.67, 0.67, 0.0];
            check(
                means == expected,
                format!("means {means:?} != expected {expected:?}"),
            )?;
            for (aspect, line) in ["supportive", "easy", "clear", "exciting", "interesting", "inventive", "leading edge"]
                .iter()
                .zip(table.lines().skip(1))
            {
                check(
                    line.contains(aspect),
                    format!("row `{line}` missing aspect label {aspect}"),
                )?;
            }
            Ok(())
        },
    );
}

#[test]
fn criterion_10_calibration_properties() {
    criterion(
        10,
        "auto-calibration identity, protraction clamp, translation equivariance",
        Some(Duration::from_secs(5)),
        || {
            let mut rng = ChaCha8Rng::seed_from_u64(1010);
            for case in 0..100 {
                let yaw = rng.gen_range(-1.2..1.2);
                let orientation = Quat::from_axis_angle([0.0, 1.0, 0.0], yaw);
                let start_pos = [
                    rng.gen_range(-2.0..2.0),
                    rng.gen_range(0.5..2.0),
                    rng.gen_range(-2.0..2.0),
                ];
                let range = rng.gen_range(0.01..0.25);
                let start = PoseSample {
                    t: 0.0,
                    position: start_pos,
                    orientation,
                    angular_velocity: None,
                    linear_acceleration: None,
                };
                let mut calibrator = Calibrator::new(MovementKind::Retraction);
                calibrator.capture_neutral(&start).map_err(|e| e.to_string())?;
                let axis = calibrator.axis().unwrap();
                let at = |scale: f64, extra: [f64; 3]| PoseSample {
                    t: 1.0,
                    position: [
                        start_pos[0] + axis[0] * scale + extra[0],
                        start_pos[1] + axis[1] * scale + extra[1],
                        start_pos[2] + axis[2] * scale + extra[2],
                    ],
                    orientation,
                    angular_velocity: None,
                    linear_acceleration: None,
                };
                let end = at(range, [0.0; 3]);
                let profile = calibrator
                    .auto_calibrate(&start, &end)
                    .map_err(|e| e.to_string())?;
                check(
                    (profile.retraction_distance(&end) - profile.max_range_m).abs() < 1e-9,
                    format!("case {case}: end-mark distance != R"),
                )?;
                check(
                    profile.retraction_distance(&at(-range, [0.0; 3])) == 0.0,
                    format!("case {case}: protraction must clamp to zero"),
                )?;

                // translation equivariance under a random world offset
                let offset = [
                    rng.gen_range(-5.0..5.0),
                    rng.gen_range(-5.0..5.0),
                    rng.gen_range(-5.0..5.0),
                ];
                let probe = at(range * 0.6, [0.013, -0.007, 0.021]);
                let mut shifted_probe = probe.clone();
                for i in 0..3 {
                    shifted_probe.position[i] += offset[i];
                }
                let mut shifted_profile = profile.clone();
                for i in 0..3 {
                    shifted_profile.neutral_position[i] += offset[i];
                }
                let a = profile.retraction_distance(&probe);
                let b = shifted_profile.retraction_distance(&shifted_probe);
                check(
                    (a - b).abs() < 1e-9,
                    format!("case {case}: translation equivariance broke: {a} vs {b}"),
                )?;
            }
            Ok(())
        },
    );
}
