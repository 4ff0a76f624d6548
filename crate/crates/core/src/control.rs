//! PID heading regulation and the turn / stop command generators.
//!
//! The law is the firmware's positional PID on integer accelerometer error:
//! `e = ep*kp + ei*ki + ed*kd` with `ei` the running sum of errors and `ed`
//! the last difference. Straight driving splits `e` across the wheels around a
//! reference duty; turns counter-rotate the wheels and finish once the error
//! has changed sign `flip_target` times.

use serde::{Deserialize, Serialize};

use crate::dynamics::{MotorCommand, DUTY_MAX};
use crate::sensors::{AccelFrame, PresetValues};

/// Bound on the accumulated error applied by the behavior layer.
pub const INTEGRAL_CAP: f64 = 10_000.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PidGains {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
}

impl Default for PidGains {
    fn default() -> Self {
        Self {
            kp: 20.0,
            ki: 2.0,
            kd: 10.0,
        }
    }
}

impl PidGains {
    pub fn is_finite(&self) -> bool {
        self.kp.is_finite() && self.ki.is_finite() && self.kd.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PidState {
    pub ei: f64,
    pub prev_error: f64,
}

impl PidState {
    fn capped(self) -> Self {
        Self {
            ei: self.ei.clamp(-INTEGRAL_CAP, INTEGRAL_CAP),
            ..self
        }
    }
}

pub fn pid_step(state: PidState, error: f64, gains: &PidGains) -> (f64, PidState) {
    let ep = error;
    let ei = state.ei + error;
    let ed = error - state.prev_error;
    let e = (ep * gains.kp) + (ei * gains.ki) + (ed * gains.kd);
    (
        e,
        PidState {
            ei,
            prev_error: error,
        },
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpeedRefs {
    pub ref_up: i32,
    pub ref_down: i32,
    pub ref_turn: i32,
    pub ref_lateral: i32,
}

impl Default for SpeedRefs {
    fn default() -> Self {
        Self {
            ref_up: 800,
            ref_down: 100,
            ref_turn: 500,
            ref_lateral: 300,
        }
    }
}

impl SpeedRefs {
    pub fn all_in_range(&self) -> bool {
        [self.ref_up, self.ref_down, self.ref_turn, self.ref_lateral]
            .iter()
            .all(|r| (0..=DUTY_MAX).contains(r))
    }
}

/// Straight-line behaviors. `Lateral` drives along the array away from the
/// dock, `Return` drives back toward it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DriveMode {
    Ascend,
    Descend,
    Lateral,
    Return,
}

impl DriveMode {
    /// (uses the x axis, setpoint, reference duty, error sign)
    fn table(self, presets: &PresetValues, refs: &SpeedRefs) -> (bool, i32, i32, f64) {
        match self {
            DriveMode::Ascend => (true, presets.x1_set_up, refs.ref_up, 1.0),
            // Facing down-slope the sideways tilt flips sign for the same
            // steering correction.
            DriveMode::Descend => (true, presets.x1_set_down, refs.ref_down, -1.0),
            DriveMode::Lateral => (false, presets.y1_set_turn, refs.ref_lateral, 1.0),
            DriveMode::Return => (false, presets.y1_set_turn, refs.ref_lateral, -1.0),
        }
    }

    pub fn error(self, frame: &AccelFrame, presets: &PresetValues, refs: &SpeedRefs) -> f64 {
        let (use_x, set, _, sign) = self.table(presets, refs);
        let axis = if use_x { frame.x1 } else { frame.y1 };
        sign * f64::from(axis - set)
    }
}

fn to_duty(v: f64) -> i32 {
    v.round().clamp(0.0, f64::from(DUTY_MAX)) as i32
}

pub fn heading_command(
    mode: DriveMode,
    frame: &AccelFrame,
    presets: &PresetValues,
    refs: &SpeedRefs,
    pid: PidState,
    gains: &PidGains,
) -> (MotorCommand, PidState) {
    let (_, _, reference, _) = mode.table(presets, refs);
    let error = mode.error(frame, presets, refs);
    let (e, next) = pid_step(pid, error, gains);
    let r = f64::from(reference);
    (
        MotorCommand::new(to_duty(r + e), to_duty(r - e)),
        next.capped(),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AlignAxis {
    X,
    Y,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TurnProgress {
    /// `true` for non-negative output. `None` before the first call.
    pub last_sign: Option<bool>,
    pub flip_count: u32,
    pub flip_target: u32,
}

impl Default for TurnProgress {
    fn default() -> Self {
        Self::new(5)
    }
}

impl TurnProgress {
    pub fn new(flip_target: u32) -> Self {
        Self {
            last_sign: None,
            flip_count: 0,
            flip_target,
        }
    }

    pub fn done(&self) -> bool {
        self.flip_count >= self.flip_target
    }

    /// Records the sign of the latest output and reports completion.
    pub fn observe(&mut self, e: f64) -> bool {
        let sign = e >= 0.0;
        if let Some(last) = self.last_sign {
            if last != sign && self.flip_count < self.flip_target {
                self.flip_count += 1;
            }
        }
        self.last_sign = Some(sign);
        self.done()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TurnOutput {
    pub cmd: MotorCommand,
    pub pid: PidState,
    pub progress: TurnProgress,
    pub done: bool,
}

/// One tick of an in-place turn.
///
/// Non-negative output spins clockwise (left wheel forward), negative spins
/// counter-clockwise; `negate` swaps the two. Wheel speed follows `|e|` up to
/// `ref_turn`. While the output is saturated the integral is frozen so the
/// turn does not wind up during the long slew toward the setpoint.
#[allow(clippy::too_many_arguments)]
pub fn turn_command(
    frame: &AccelFrame,
    presets: &PresetValues,
    align_axis: AlignAxis,
    negate: bool,
    refs: &SpeedRefs,
    pid: PidState,
    gains: &PidGains,
    mut progress: TurnProgress,
) -> TurnOutput {
    let error = match align_axis {
        AlignAxis::X => f64::from(frame.x1 - presets.x1_set_turn),
        AlignAxis::Y => f64::from(frame.y1 - presets.y1_set_turn),
    };
    let limit = f64::from(refs.ref_turn);
    let (mut e, mut next) = pid_step(pid, error, gains);
    if e.abs() > limit {
        next.ei = pid.ei;
        e -= error * gains.ki;
    }
    if negate {
        e = -e;
    }
    let done = progress.observe(e);
    let magnitude = e.abs().min(limit).round() as i32;
    let cmd = if e >= 0.0 {
        MotorCommand::new(magnitude, -magnitude)
    } else {
        MotorCommand::new(-magnitude, magnitude)
    };
    TurnOutput {
        cmd,
        pid: next.capped(),
        progress,
        done,
    }
}

pub fn stop_command() -> MotorCommand {
    MotorCommand::default()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frame(x1: i32, y1: i32) -> AccelFrame {
        AccelFrame { x1, y1, z1: 0 }
    }

    #[test]
    fn pid_hand_values() {
        let g = PidGains::default();
        let (e, s) = pid_step(PidState::default(), 0.0, &g);
        assert_eq!(e, 0.0);
        let (e, s) = pid_step(s, 1.0, &g);
        assert_eq!(e, 32.0);
        let (e, _) = pid_step(s, 1.0, &g);
        assert_eq!(e, 24.0);
    }

    #[test]
    fn heading_zero_error_drives_straight() {
        let p = PresetValues::default();
        let r = SpeedRefs::default();
        for (mode, x, y, reference) in [
            (DriveMode::Ascend, p.x1_set_up, 0, r.ref_up),
            (DriveMode::Descend, p.x1_set_down, 0, r.ref_down),
            (DriveMode::Lateral, 0, p.y1_set_turn, r.ref_lateral),
        ] {
            let (cmd, _) = heading_command(mode, &frame(x, y), &p, &r, PidState::default(), &PidGains::default());
            assert_eq!(cmd, MotorCommand::new(reference, reference));
        }
    }

    #[test]
    fn heading_ascend_positive_error() {
        let p = PresetValues::default();
        let (cmd, _) = heading_command(
            DriveMode::Ascend,
            &frame(p.x1_set_up + 1, 0),
            &p,
            &SpeedRefs::default(),
            PidState::default(),
            &PidGains::default(),
        );
        assert_eq!(cmd, MotorCommand::new(832, 768));
    }

    #[test]
    fn heading_descend_clamps_left_at_zero() {
        let p = PresetValues::default();
        let g = PidGains {
            kp: 150.0,
            ki: 0.0,
            kd: 0.0,
        };
        // Descend flips the error, so a +1 reading gives e_total = -150.
        let (cmd, _) = heading_command(
            DriveMode::Descend,
            &frame(p.x1_set_down + 1, 0),
            &p,
            &SpeedRefs::default(),
            PidState::default(),
            &g,
        );
        assert_eq!(cmd, MotorCommand::new(0, 250));
    }

    #[test]
    fn integral_is_capped() {
        let p = PresetValues::default();
        let mut pid = PidState::default();
        for _ in 0..200 {
            (_, pid) = heading_command(
                DriveMode::Ascend,
                &frame(p.x1_set_up + 100, 0),
                &p,
                &SpeedRefs::default(),
                pid,
                &PidGains::default(),
            );
        }
        assert_eq!(pid.ei, INTEGRAL_CAP);
    }

    #[test]
    fn turn_without_oscillation_never_finishes() {
        let p = PresetValues::default();
        let mut pid = PidState::default();
        let mut progress = TurnProgress::default();
        for _ in 0..100 {
            let out = turn_command(&frame(p.x1_set_turn + 3, 0), &p, AlignAxis::X, false, &SpeedRefs::default(), pid, &PidGains::default(), progress);
            assert!(!out.done);
            assert!(out.cmd.duty_left > 0 && out.cmd.duty_right < 0);
            pid = out.pid;
            progress = out.progress;
        }
    }

    #[test]
    fn alternating_error_finishes_after_five_flips() {
        let p = PresetValues::default();
        let g = PidGains {
            kp: 1.0,
            ki: 0.0,
            kd: 0.0,
        };
        let mut progress = TurnProgress::default();
        let mut calls = 0;
        for i in 0.. {
            let err = if i % 2 == 0 { 1 } else { -1 };
            let out = turn_command(&frame(0, p.y1_set_turn + err), &p, AlignAxis::Y, false, &SpeedRefs::default(), PidState::default(), &g, progress);
            progress = out.progress;
            calls += 1;
            if out.done {
                break;
            }
        }
        assert_eq!(calls, 6);
    }

    #[test]
    fn zero_output_counts_as_non_negative() {
        let mut progress = TurnProgress::default();
        progress.observe(1.0);
        progress.observe(0.0);
        assert_eq!(progress.flip_count, 0);
        progress.observe(-0.5);
        assert_eq!(progress.flip_count, 1);
    }

    #[test]
    fn negate_reverses_spin() {
        let p = PresetValues::default();
        let out = turn_command(&frame(p.x1_set_turn + 5, 0), &p, AlignAxis::X, true, &SpeedRefs::default(), PidState::default(), &PidGains::default(), TurnProgress::default());
        assert!(out.cmd.duty_left < 0 && out.cmd.duty_right > 0);
        assert_eq!(out.cmd.duty_right, 160);
    }

    #[test]
    fn stop_is_constant() {
        assert_eq!(stop_command(), MotorCommand::new(0, 0));
        assert_eq!(stop_command(), stop_command());
    }
}
