//! First-order kinematics of the differential-drive base.
//!
//! Headings are measured counter-clockwise from the lateral `+x` axis, so
//! `PI/2` points straight up-slope. Gravity shows up as a speed bias along the
//! body axis, proportional to the slope component in the direction of travel.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const DUTY_MAX: i32 = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KinematicParams {
    pub track_width_m: f64,
    pub wheel_diameter_m: f64,
    /// Wheel surface speed at full duty on level ground.
    pub free_speed_mps: f64,
    /// Speed lost per unit of `sin(incline)` when driving straight up-slope.
    pub gravity_gain_mps: f64,
    pub bump_slow_factor: f64,
    /// Heading change applied per step while a wheel is on a bump.
    pub bump_heading_kick_rad: f64,
    /// A wheel is on a seam while its center is within this distance of it.
    pub bump_half_width_m: f64,
}

impl Default for KinematicParams {
    fn default() -> Self {
        let base = Self {
            track_width_m: 0.2,
            wheel_diameter_m: 0.113,
            free_speed_mps: 0.1,
            gravity_gain_mps: 0.05,
            bump_slow_factor: 0.3,
            bump_heading_kick_rad: 0.0008,
            bump_half_width_m: 0.01,
        };
        calibrate_speed_band(&base, &SpeedBand::default()).expect("default speed band is feasible")
    }
}

impl KinematicParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("track_width_m", self.track_width_m),
            ("wheel_diameter_m", self.wheel_diameter_m),
            ("free_speed_mps", self.free_speed_mps),
            ("bump_slow_factor", self.bump_slow_factor),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid("kinematics", format!("{name} = {v} must be > 0")));
            }
        }
        if !(self.gravity_gain_mps.is_finite() && self.gravity_gain_mps >= 0.0) {
            return Err(Error::invalid("kinematics", "gravity_gain_mps must be >= 0"));
        }
        if !(self.bump_half_width_m.is_finite() && self.bump_half_width_m >= 0.0) {
            return Err(Error::invalid("kinematics", "bump_half_width_m must be >= 0"));
        }
        if !(self.bump_heading_kick_rad.is_finite() && self.bump_heading_kick_rad >= 0.0) {
            return Err(Error::invalid("kinematics", "bump_heading_kick_rad must be >= 0"));
        }
        if self.bump_slow_factor > 1.0 {
            return Err(Error::invalid("kinematics", "bump_slow_factor must be <= 1"));
        }
        Ok(())
    }
}

/// Signed per-wheel PWM compare values; the sign is the H-bridge direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct MotorCommand {
    pub duty_left: i32,
    pub duty_right: i32,
}

impl MotorCommand {
    pub fn new(duty_left: i32, duty_right: i32) -> Self {
        Self {
            duty_left: duty_left.clamp(-DUTY_MAX, DUTY_MAX),
            duty_right: duty_right.clamp(-DUTY_MAX, DUTY_MAX),
        }
    }

    /// Both H-bridge legs held: the wheels are braked.
    pub fn is_brake(&self) -> bool {
        self.duty_left == 0 && self.duty_right == 0
    }

    pub fn is_forward(&self) -> bool {
        self.duty_left > 0 && self.duty_right > 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Pose {
    pub x_m: f64,
    pub y_m: f64,
    pub heading_rad: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobotState {
    pub pose: Pose,
    pub speed_mps: f64,
}

impl RobotState {
    pub fn at(x_m: f64, y_m: f64, heading_rad: f64) -> Self {
        Self {
            pose: Pose {
                x_m,
                y_m,
                heading_rad: normalize_angle(heading_rad),
            },
            speed_mps: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Wheel {
    Left,
    Right,
}

/// Wraps into `(-PI, PI]`.
pub fn normalize_angle(a: f64) -> f64 {
    let mut r = a.rem_euclid(2.0 * PI);
    if r > PI {
        r -= 2.0 * PI;
    }
    r
}

pub fn wheel_speed(duty: i32, incline_deg: f64, heading_rad: f64, params: &KinematicParams) -> f64 {
    let drive = params.free_speed_mps * f64::from(duty) / f64::from(DUTY_MAX);
    // cos(heading - PI/2) == sin(heading): alignment with the up-slope axis.
    drive - params.gravity_gain_mps * incline_deg.to_radians().sin() * heading_rad.sin()
}

/// Advances one forward-Euler step. `bump` names the wheel that reached the
/// seam first while the robot is in contact with one.
pub fn step(
    state: &RobotState,
    cmd: MotorCommand,
    incline_deg: f64,
    bump: Option<Wheel>,
    dt: f64,
    params: &KinematicParams,
) -> Result<RobotState> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::invalid("dt", format!("{dt} must be > 0")));
    }
    let heading = state.pose.heading_rad;
    if cmd.is_brake() {
        return Ok(RobotState {
            pose: state.pose,
            speed_mps: 0.0,
        });
    }
    let left = wheel_speed(cmd.duty_left, incline_deg, heading, params);
    let right = wheel_speed(cmd.duty_right, incline_deg, heading, params);
    // The slope bias acts on common-mode drive only; a pure spin holds its
    // place on the panel.
    let total = f64::from(cmd.duty_left.abs() + cmd.duty_right.abs());
    let common = f64::from((cmd.duty_left + cmd.duty_right).abs()) / total;
    let slope = params.gravity_gain_mps * incline_deg.to_radians().sin() * heading.sin();
    let mut v = 0.5 * (left + right) + (1.0 - common) * slope;
    let omega = (right - left) / params.track_width_m;
    let kick = match bump {
        Some(wheel) => {
            v *= params.bump_slow_factor;
            match wheel {
                Wheel::Left => params.bump_heading_kick_rad,
                Wheel::Right => -params.bump_heading_kick_rad,
            }
        }
        None => 0.0,
    };
    let (s, c) = heading.sin_cos();
    Ok(RobotState {
        pose: Pose {
            x_m: state.pose.x_m + v * c * dt,
            y_m: state.pose.y_m + v * s * dt,
            heading_rad: normalize_angle(heading + omega * dt + kick),
        },
        speed_mps: v,
    })
}

/// Target speeds used to pin `free_speed_mps` and `gravity_gain_mps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpeedBand {
    pub incline_deg: f64,
    pub duty_up: i32,
    pub duty_down: i32,
    pub target_up_mps: f64,
    pub target_down_mps: f64,
    pub min_mps: f64,
    pub max_mps: f64,
}

impl Default for SpeedBand {
    fn default() -> Self {
        Self {
            incline_deg: 30.0,
            duty_up: 800,
            duty_down: 100,
            target_up_mps: 0.04,
            target_down_mps: 0.04,
            min_mps: 0.02,
            max_mps: 0.06,
        }
    }
}

/// Solves for free speed and gravity gain so that climbing at `duty_up` and
/// descending at `duty_down` on `incline_deg` hit the two target speeds.
///
/// Climbing: `f*du - g*s = v_up`; descending: `f*dd + g*s = v_down`, with
/// `s = sin(incline)` and duties as fractions of full scale.
pub fn calibrate_speed_band(params: &KinematicParams, band: &SpeedBand) -> Result<KinematicParams> {
    let in_band = |v: f64| v >= band.min_mps && v <= band.max_mps;
    if !(band.min_mps > 0.0 && band.min_mps <= band.max_mps) {
        return Err(Error::InfeasibleCalibration("empty speed band".into()));
    }
    if !in_band(band.target_up_mps) || !in_band(band.target_down_mps) {
        return Err(Error::InfeasibleCalibration("targets lie outside the band".into()));
    }
    if band.duty_up <= 0 || band.duty_down <= 0 || band.duty_up > DUTY_MAX || band.duty_down > DUTY_MAX {
        return Err(Error::InfeasibleCalibration("duties must be in (0, 1000]".into()));
    }
    let du = f64::from(band.duty_up) / f64::from(DUTY_MAX);
    let dd = f64::from(band.duty_down) / f64::from(DUTY_MAX);
    let s = band.incline_deg.to_radians().sin();

    let (free, gravity) = if s.abs() < 1e-12 {
        let free = band.target_up_mps / du;
        if (free * dd - band.target_down_mps).abs() > 1e-12 {
            return Err(Error::InfeasibleCalibration(
                "level ground needs speeds proportional to duty".into(),
            ));
        }
        (free, 0.0)
    } else {
        let free = (band.target_up_mps + band.target_down_mps) / (du + dd);
        (free, (free * du - band.target_up_mps) / s)
    };
    if !(free > 0.0) || gravity < 0.0 {
        return Err(Error::InfeasibleCalibration(format!(
            "solution free_speed={free}, gravity_gain={gravity} is unphysical"
        )));
    }
    Ok(KinematicParams {
        free_speed_mps: free,
        gravity_gain_mps: gravity,
        ..*params
    })
}
