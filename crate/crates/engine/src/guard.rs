//! Erroneous-motion detection.
//!
//! Motion faster than the configured angular-velocity or linear-acceleration
//! thresholds produces a warning. Warnings are rate-limited per channel: a
//! new one fires only when strictly more than `warning_cooldown_s` has
//! passed since that channel's previous warning, which bounds the count on
//! any trace by `ceil(duration / cooldown)` per channel.
//!
//! The default thresholds are engineering defaults for a runnable system,
//! not clinically validated values.

use crate::pose::{vec3, PoseSample};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize,
)]
#[serde(rename_all = "snake_case")]
pub enum GuardChannel {
    AngularVelocity,
    LinearAcceleration,
}

/// What to do when an enabled channel is absent from a sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MissingChannelPolicy {
    /// Fail the sample (default).
    #[default]
    Error,
    /// Disable the channel for the rest of the session and continue.
    Disable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GuardParams {
    /// Warning threshold on |angular velocity|, rad/s.
    pub max_angular_speed: f64,
    /// Warning threshold on |linear acceleration|, m/s².
    pub max_linear_accel: f64,
    /// Per-channel minimum spacing between warnings, seconds.
    pub warning_cooldown_s: f64,
    pub enabled_channels: BTreeSet<GuardChannel>,
    pub missing_channel: MissingChannelPolicy,
}

impl Default for GuardParams {
    fn default() -> Self {
        GuardParams {
            max_angular_speed: 2.0,
            max_linear_accel: 8.0,
            warning_cooldown_s: 1.0,
            enabled_channels: [GuardChannel::AngularVelocity, GuardChannel::LinearAcceleration]
                .into_iter()
                .collect(),
            missing_channel: MissingChannelPolicy::default(),
        }
    }
}

impl GuardParams {
    pub fn validate(&self) -> Result<(), GuardError> {
        if self.max_angular_speed <= 0.0 || self.max_linear_accel <= 0.0 {
            return Err(GuardError::BadParams(
                "thresholds must be positive".into(),
            ));
        }
        if self.warning_cooldown_s < 0.0 {
            return Err(GuardError::BadParams("cooldown must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum GuardError {
    #[error("channel {0:?} is enabled but missing from the sample")]
    ChannelUnavailable(GuardChannel),
    #[error("invalid guard parameters: {0}")]
    BadParams(String),
}

/// A threshold exceedance on one channel: the measured magnitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Exceedance {
    pub channel: GuardChannel,
    pub value: f64,
}

/// Stateful rate-limited detector; state is only the per-channel timestamp
/// of the last warning. Owned by one session, never shared.
#[derive(Debug, Clone)]
pub struct MotionGuard {
    params: GuardParams,
    last_warning: [Option<f64>; 2],
    disabled: BTreeSet<GuardChannel>,
}

fn channel_index(channel: GuardChannel) -> usize {
    match channel {
        GuardChannel::AngularVelocity => 0,
        GuardChannel::LinearAcceleration => 1,
    }
}

impl MotionGuard {
    pub fn new(params: GuardParams) -> Result<Self, GuardError> {
        params.validate()?;
        Ok(MotionGuard {
            params,
            last_warning: [None, None],
            disabled: BTreeSet::new(),
        })
    }

    pub fn params(&self) -> &GuardParams {
        &self.params
    }

    /// Channels disabled mid-session because their data went missing
    /// (only under [`MissingChannelPolicy::Disable`]).
    pub fn disabled_channels(&self) -> &BTreeSet<GuardChannel> {
        &self.disabled
    }

    /// Checks one sample, in timestamp order. Returns the warnings to emit
    /// (at most one per enabled channel).
    pub fn check(&mut self, sample: &PoseSample) -> Result<Vec<Exceedance>, GuardError> {
        let mut exceedances = Vec::new();
        for channel in [GuardChannel::AngularVelocity, GuardChannel::LinearAcceleration] {
            if !self.params.enabled_channels.contains(&channel) || self.disabled.contains(&channel)
            {
                continue;
            }
            let (data, threshold) = match channel {
                GuardChannel::AngularVelocity => {
                    (sample.angular_velocity, self.params.max_angular_speed)
                }
                GuardChannel::LinearAcceleration => {
                    (sample.linear_acceleration, self.params.max_linear_accel)
                }
            };
            let Some(v) = data else {
                match self.params.missing_channel {
                    MissingChannelPolicy::Error => {
                        return Err(GuardError::ChannelUnavailable(channel))
                    }
                    MissingChannelPolicy::Disable => {
                        self.disabled.insert(channel);
                        continue;
                    }
                }
            };
            let magnitude = vec3::norm(v);
            if magnitude > threshold {
                let idx = channel_index(channel);
                let suppressed = self.last_warning[idx]
                    .is_some_and(|last| sample.t - last <= self.params.warning_cooldown_s);
                if !suppressed {
                    self.last_warning[idx] = Some(sample.t);
                    exceedances.push(Exceedance {
                        channel,
                        value: magnitude,
                    });
                }
            }
        }
        Ok(exceedances)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pose::Quat;

    fn sample(t: f64, w: Option<[f64; 3]>, a: Option<[f64; 3]>) -> PoseSample {
        PoseSample {
            t,
            position: [0.0; 3],
            orientation: Quat::IDENTITY,
            angular_velocity: w,
            linear_acceleration: a,
        }
    }

    fn guard() -> MotionGuard {
        MotionGuard::new(GuardParams::default()).unwrap()
    }

    #[test]
    fn below_threshold_is_silent() {
        let mut g = guard();
        let out = g
            .check(&sample(0.0, Some([0.0; 3]), Some([0.0; 3])))
            .unwrap();
        assert!(out.is_empty());
    }

    #[test]
    fn angular_speed_exceedance_reports_magnitude() {
        let mut g = guard();
        let out = g
            .check(&sample(0.0, Some([0.0, 2.5, 0.0]), Some([0.0; 3])))
            .unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].channel, GuardChannel::AngularVelocity);
        assert!((out[0].value - 2.5).abs() < 1e-12);
    }

    #[test]
    fn cooldown_suppresses_near_repeats() {
        let mut g = guard();
        let hot = |t| sample(t, Some([0.0, 3.0, 0.0]), Some([0.0; 3]));
        assert_eq!(g.check(&hot(0.0)).unwrap().len(), 1);
        assert_eq!(g.check(&hot(0.2)).unwrap().len(), 0);
        // exactly at the cooldown boundary is still suppressed
        assert_eq!(g.check(&hot(1.0)).unwrap().len(), 0);
        assert_eq!(g.check(&hot(1.2)).unwrap().len(), 1);
    }

    #[test]
    fn channels_cool_down_independently() {
        let mut g = guard();
        let both = |t| sample(t, Some([0.0, 3.0, 0.0]), Some([0.0, 9.0, 0.0]));
        let out = g.check(&both(0.0)).unwrap();
        assert_eq!(out.len(), 2);
        let out = g
            .check(&sample(0.5, Some([0.0; 3]), Some([10.0, 0.0, 0.0])))
            .unwrap();
        assert!(out.is_empty(), "linear channel still cooling down");
    }

    #[test]
    fn missing_channel_errors_by_default() {
        let mut g = guard();
        let err = g.check(&sample(0.0, None, Some([0.0; 3]))).unwrap_err();
        assert!(matches!(
            err,
            GuardError::ChannelUnavailable(GuardChannel::AngularVelocity)
        ));
    }

    #[test]
    fn missing_channel_can_downgrade_to_disable() {
        let params = GuardParams {
            missing_channel: MissingChannelPolicy::Disable,
            ..GuardParams::default()
        };
        let mut g = MotionGuard::new(params).unwrap();
        assert!(g.check(&sample(0.0, None, Some([0.0; 3]))).unwrap().is_empty());
        assert!(g
            .disabled_channels()
            .contains(&GuardChannel::AngularVelocity));
        // once disabled, later hot samples on that channel are ignored
        let out = g
            .check(&sample(1.0, Some([9.0, 0.0, 0.0]), Some([0.0; 3])))
            .unwrap();
        assert!(out.is_empty());
    }

    #[test]
    fn warning_count_bounded_by_cooldown() {
        let mut g = guard();
        let mut count = 0;
        let (t0, t1, dt) = (0.0, 10.0, 0.05);
        let mut t = t0;
        while t <= t1 {
            count += g
                .check(&sample(t, Some([0.0, 5.0, 0.0]), Some([0.0; 3])))
                .unwrap()
                .len();
            t += dt;
        }
        let bound = ((t1 - t0) / 1.0).ceil() as usize;
        assert!(count <= bound, "{count} warnings > bound {bound}");
        assert!(count > 0);
    }

    #[test]
    fn lowering_threshold_never_decreases_count() {
        let trace: Vec<PoseSample> = (0..200)
            .map(|i| {
                let t = i as f64 * 0.07;
                let speed = 1.5 + (i as f64 * 0.9).sin() * 1.5;
                sample(t, Some([0.0, speed, 0.0]), Some([0.0; 3]))
            })
            .collect();
        let count_at = |threshold: f64| {
            let params = GuardParams {
                max_angular_speed: threshold,
                ..GuardParams::default()
            };
            let mut g = MotionGuard::new(params).unwrap();
            trace
                .iter()
                .map(|s| g.check(s).unwrap().len())
                .sum::<usize>()
        };
        let mut prev = count_at(3.2);
        for threshold in [2.8, 2.4, 2.0, 1.6, 1.2, 0.8] {
            let n = count_at(threshold);
            assert!(n >= prev, "count dropped from {prev} to {n} at {threshold}");
            prev = n;
        }
    }

    #[test]
    fn params_validation() {
        assert!(MotionGuard::new(GuardParams {
            max_angular_speed: 0.0,
            ..GuardParams::default()
        })
        .is_err());
        assert!(MotionGuard::new(GuardParams {
            warning_cooldown_s: -1.0,
            ..GuardParams::default()
        })
        .is_err());
    }
}
