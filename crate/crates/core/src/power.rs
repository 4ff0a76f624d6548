//! Battery ledger, CC/CV charger and buck-converter design formulas.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::dynamics::{MotorCommand, DUTY_MAX};
use crate::{Error, Result};

/// Three-cell LiPo at 4.2 V per cell.
pub const V_FULL: f64 = 12.6;
/// Headroom allowed above the CV setpoint.
pub const CV_MARGIN_V: f64 = 1e-3;

fn positive(what: &'static str, name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(what, format!("{name} = {v} must be > 0")))
    }
}

/// Open-circuit voltage is affine in state of charge between `v_empty` and
/// `v_full`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BatteryModel {
    pub capacity_ah: f64,
    pub soc: f64,
    pub v_full: f64,
    pub v_empty: f64,
}

impl Default for BatteryModel {
    fn default() -> Self {
        Self {
            capacity_ah: 10.0,
            soc: 1.0,
            v_full: V_FULL,
            v_empty: 9.0,
        }
    }
}

impl BatteryModel {
    pub fn validate(&self) -> Result<()> {
        positive("battery", "capacity_ah", self.capacity_ah)?;
        if !(0.0..=1.0).contains(&self.soc) {
            return Err(Error::invalid("battery", format!("soc {} outside [0, 1]", self.soc)));
        }
        if !(self.v_empty >= 0.0 && self.v_empty < self.v_full) {
            return Err(Error::invalid("battery", "need 0 <= v_empty < v_full"));
        }
        Ok(())
    }

    pub fn terminal_v(&self) -> f64 {
        self.v_empty + (self.v_full - self.v_empty) * self.soc
    }

    /// State of charge at which the terminal voltage equals `v`.
    pub fn soc_at(&self, v: f64) -> f64 {
        ((v - self.v_empty) / (self.v_full - self.v_empty)).clamp(0.0, 1.0)
    }

    fn add_amp_seconds(&mut self, amp_s: f64) {
        self.soc = (self.soc + amp_s / 3600.0 / self.capacity_ah).clamp(0.0, 1.0);
    }
}

pub fn discharge_step(batt: &BatteryModel, loads_w: f64, dt: f64) -> Result<BatteryModel> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::invalid("dt", format!("{dt} must be > 0")));
    }
    if !(loads_w >= 0.0 && loads_w.is_finite()) {
        return Err(Error::invalid("loads", format!("{loads_w} W must be >= 0")));
    }
    let mut next = *batt;
    let current = loads_w / batt.terminal_v();
    next.add_amp_seconds(-current * dt);
    Ok(next)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChargerConfig {
    pub i_cc: f64,
    pub v_cv: f64,
    pub i_term: f64,
    pub cv_tau_s: f64,
}

impl Default for ChargerConfig {
    fn default() -> Self {
        Self {
            i_cc: 2.0,
            v_cv: V_FULL,
            i_term: 0.1,
            cv_tau_s: 600.0,
        }
    }
}

impl ChargerConfig {
    pub fn validate(&self, batt: &BatteryModel) -> Result<()> {
        positive("charger", "i_cc", self.i_cc)?;
        positive("charger", "i_term", self.i_term)?;
        positive("charger", "cv_tau_s", self.cv_tau_s)?;
        if self.i_term >= self.i_cc {
            return Err(Error::invalid("charger", "i_term must be below i_cc"));
        }
        if (self.v_cv - batt.v_full).abs() > 1e-9 {
            return Err(Error::invalid("charger", "v_cv must equal the battery's v_full"));
        }
        Ok(())
    }

    /// Time spent in CV before the current decays to `i_term`.
    pub fn cv_duration_s(&self) -> f64 {
        self.cv_tau_s * (self.i_cc / self.i_term).ln()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ChargePhase {
    Cc,
    Cv { elapsed_s: f64 },
    Done,
}

impl ChargePhase {
    pub fn name(&self) -> &'static str {
        match self {
            ChargePhase::Cc => "CC",
            ChargePhase::Cv { .. } => "CV",
            ChargePhase::Done => "Done",
        }
    }

    /// Position in the CC, CV, Done sequence.
    pub fn rank(&self) -> u8 {
        match self {
            ChargePhase::Cc => 0,
            ChargePhase::Cv { .. } => 1,
            ChargePhase::Done => 2,
        }
    }

    pub fn is_done(&self) -> bool {
        matches!(self, ChargePhase::Done)
    }
}

impl fmt::Display for ChargePhase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChargeStep {
    pub battery: BatteryModel,
    pub current_a: f64,
    pub phase: ChargePhase,
}

/// Advances the charger by `dt`. The returned current is the one that flowed
/// during this step; `phase` is the phase for the next step.
pub fn charge_step(
    batt: &BatteryModel,
    cfg: &ChargerConfig,
    phase: ChargePhase,
    dt: f64,
) -> Result<ChargeStep> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::invalid("dt", format!("{dt} must be > 0")));
    }
    let mut battery = *batt;
    let (current_a, phase) = match phase {
        ChargePhase::Cc => {
            battery.add_amp_seconds(cfg.i_cc * dt);
            let next = if battery.terminal_v() >= cfg.v_cv - 1e-12 {
                ChargePhase::Cv { elapsed_s: 0.0 }
            } else {
                ChargePhase::Cc
            };
            (cfg.i_cc, next)
        }
        ChargePhase::Cv { elapsed_s } => {
            let current = cfg.i_cc * (-elapsed_s / cfg.cv_tau_s).exp();
            if current < cfg.i_term {
                (0.0, ChargePhase::Done)
            } else {
                battery.add_amp_seconds(current * dt);
                (
                    current,
                    ChargePhase::Cv {
                        elapsed_s: elapsed_s + dt,
                    },
                )
            }
        }
        ChargePhase::Done => (0.0, ChargePhase::Done),
    };
    Ok(ChargeStep {
        battery,
        current_a,
        phase,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChargeSample {
    pub t_s: f64,
    pub phase: ChargePhase,
    pub terminal_v: f64,
    pub current_a: f64,
    pub soc: f64,
}

/// Runs a full charge from `batt` until the charger disconnects or
/// `max_s` elapses. Each row holds the phase and current of the step that
/// starts at `t_s` and the battery state at `t_s`.
pub fn charge_profile(
    batt: &BatteryModel,
    cfg: &ChargerConfig,
    dt: f64,
    max_s: f64,
) -> Result<Vec<ChargeSample>> {
    batt.validate()?;
    cfg.validate(batt)?;
    positive("charge profile", "max_s", max_s)?;
    let mut rows = Vec::new();
    let mut battery = *batt;
    let mut phase = ChargePhase::Cc;
    let mut tick: u64 = 0;
    loop {
        let t_s = tick as f64 * dt;
        let step = charge_step(&battery, cfg, phase, dt)?;
        // A zero-current step means the charger has already disconnected.
        let label = if step.current_a == 0.0 {
            ChargePhase::Done
        } else {
            phase
        };
        rows.push(ChargeSample {
            t_s,
            phase: label,
            terminal_v: battery.terminal_v(),
            current_a: step.current_a,
            soc: battery.soc,
        });
        if label.is_done() || t_s >= max_s {
            break;
        }
        battery = step.battery;
        phase = step.phase;
        tick += 1;
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LoadLedger {
    /// Watts per motor at full duty.
    pub drive_w_per_duty: f64,
    pub brush_w: f64,
    pub vacuum_w: f64,
    pub idle_w: f64,
}

impl Default for LoadLedger {
    fn default() -> Self {
        Self {
            drive_w_per_duty: 6.0,
            brush_w: 10.0,
            vacuum_w: 250.0,
            idle_w: 2.0,
        }
    }
}

impl LoadLedger {
    pub fn validate(&self) -> Result<()> {
        let all = [self.drive_w_per_duty, self.brush_w, self.vacuum_w, self.idle_w];
        if all.iter().all(|v| v.is_finite() && *v >= 0.0) {
            Ok(())
        } else {
            Err(Error::invalid("loads", "all loads must be >= 0"))
        }
    }

    /// Brush and vacuum share one enable line.
    pub fn total_w(&self, cmd: MotorCommand, cleaning_on: bool) -> f64 {
        let duty = f64::from(cmd.duty_left.abs() + cmd.duty_right.abs()) / f64::from(DUTY_MAX);
        let cleaning = if cleaning_on {
            self.brush_w + self.vacuum_w
        } else {
            0.0
        };
        self.idle_w + self.drive_w_per_duty * duty + cleaning
    }
}

/// `L = ((v_in - v_out) * D) / (f_sw * 2 * delta_i)`.
pub fn buck_inductance(v_in: f64, v_out: f64, duty_d: f64, f_sw: f64, delta_i: f64) -> Result<f64> {
    positive("buck", "v_out", v_out)?;
    positive("buck", "f_sw", f_sw)?;
    positive("buck", "delta_i", delta_i)?;
    if !(v_in.is_finite() && v_in >= v_out) {
        return Err(Error::invalid("buck", format!("v_in {v_in} must be >= v_out {v_out}")));
    }
    if !(duty_d > 0.0 && duty_d <= 1.0) {
        return Err(Error::invalid("buck", format!("duty {duty_d} outside (0, 1]")));
    }
    Ok(((v_in - v_out) * duty_d) / (f_sw * 2.0 * delta_i))
}

pub fn lc_corner_frequency(l_h: f64, c_f: f64) -> Result<f64> {
    positive("lc filter", "l_h", l_h)?;
    positive("lc filter", "c_f", c_f)?;
    Ok(1.0 / (2.0 * PI * (l_h * c_f).sqrt()))
}

pub fn filter_capacitance(l_h: f64, f_target: f64) -> Result<f64> {
    positive("lc filter", "l_h", l_h)?;
    positive("lc filter", "f_target", f_target)?;
    Ok(1.0 / ((2.0 * PI * f_target).powi(2) * l_h))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BuckDesign {
    pub v_in: f64,
    pub v_out: f64,
    pub duty_d: f64,
    pub f_sw: f64,
    pub delta_i: f64,
    pub l_h: f64,
    /// Output capacitor for the requested corner frequency, if one was given.
    pub c_f: Option<f64>,
    pub f_corner: Option<f64>,
}

/// LM2675 default switching frequency.
pub const DEFAULT_F_SW: f64 = 260e3;

impl BuckDesign {
    pub fn new(v_in: f64, v_out: f64, f_sw: f64, delta_i: f64, f_corner: Option<f64>) -> Result<Self> {
        positive("buck", "v_in", v_in)?;
        if !(v_out > 0.0 && v_out < v_in) {
            return Err(Error::invalid("buck", "need 0 < v_out < v_in"));
        }
        let duty_d = v_out / v_in;
        let l_h = buck_inductance(v_in, v_out, duty_d, f_sw, delta_i)?;
        let c_f = f_corner.map(|f| filter_capacitance(l_h, f)).transpose()?;
        Ok(Self {
            v_in,
            v_out,
            duty_d,
            f_sw,
            delta_i,
            l_h,
            c_f,
            f_corner,
        })
    }
}
