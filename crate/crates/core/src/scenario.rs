//! Scenario files: every knob of a simulation run in one JSON document.

use std::f64::consts::FRAC_PI_2;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::control::{PidGains, SpeedRefs};
use crate::dynamics::{KinematicParams, Pose};
use crate::mission::MissionConfig;
use crate::power::{BatteryModel, ChargerConfig, LoadLedger};
use crate::sensors::{AccelConfig, PresetValues, UltrasonicConfig};
use crate::world::{ArrayLayout, DEFAULT_CELL_SIZE_M, DEFAULT_EFFICIENCY};
use crate::{Error, Result};

/// Brush and vacuum head. The head is a rectangle around the drive axle;
/// every cell that enters it gets one pass per stage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CleaningConfig {
    pub head_front_m: f64,
    pub head_rear_m: f64,
    /// Extra head width beyond the nozzle, split across both sides.
    pub head_overlap_m: f64,
    pub efficiency: f64,
    /// Brush then vacuum.
    pub stages: u32,
    pub cell_size_m: f64,
    pub clean_threshold: f64,
}

impl Default for CleaningConfig {
    fn default() -> Self {
        Self {
            head_front_m: 0.10,
            head_rear_m: 0.10,
            head_overlap_m: 0.02,
            efficiency: DEFAULT_EFFICIENCY,
            stages: 2,
            cell_size_m: DEFAULT_CELL_SIZE_M,
            clean_threshold: 0.1,
        }
    }
}

impl CleaningConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.head_front_m >= 0.0 && self.head_rear_m >= 0.0 && self.head_overlap_m >= 0.0) {
            return Err(Error::invalid("cleaning", "head dimensions must be >= 0"));
        }
        if !(self.head_front_m + self.head_rear_m > 0.0) {
            return Err(Error::invalid("cleaning", "head must have non-zero length"));
        }
        if !(self.efficiency > 0.0 && self.efficiency <= 1.0) {
            return Err(Error::invalid("cleaning", "efficiency must be in (0, 1]"));
        }
        if self.stages == 0 {
            return Err(Error::invalid("cleaning", "stages must be >= 1"));
        }
        if !(self.cell_size_m.is_finite() && self.cell_size_m > 0.0) {
            return Err(Error::invalid("cleaning", "cell_size_m must be > 0"));
        }
        if !(0.0..1.0).contains(&self.clean_threshold) {
            return Err(Error::invalid("cleaning", "clean_threshold must be in [0, 1)"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub layout: ArrayLayout,
    #[serde(default)]
    pub kinematics: KinematicParams,
    #[serde(default)]
    pub accel_cfg: AccelConfig,
    #[serde(default)]
    pub ultrasonic: UltrasonicConfig,
    /// Defaults to setpoints derived from the sensor model at the first
    /// panel's incline.
    #[serde(default)]
    pub presets: Option<PresetValues>,
    #[serde(default)]
    pub gains: PidGains,
    #[serde(default)]
    pub refs: SpeedRefs,
    #[serde(default)]
    pub mission_cfg: MissionConfig,
    #[serde(default)]
    pub battery: BatteryModel,
    #[serde(default)]
    pub charger: ChargerConfig,
    #[serde(default)]
    pub loads: LoadLedger,
    #[serde(default)]
    pub cleaning: CleaningConfig,
    /// Defaults to the bottom of the first column, facing up-slope.
    #[serde(default)]
    pub start: Option<Pose>,
    #[serde(default = "default_dt")]
    pub dt_s: f64,
    #[serde(default = "default_max_sim")]
    pub max_sim_s: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_flip_target")]
    pub turn_flip_target: u32,
}

fn default_dt() -> f64 {
    0.02
}

fn default_max_sim() -> f64 {
    10_000.0
}

fn default_flip_target() -> u32 {
    5
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            layout: ArrayLayout::default(),
            kinematics: KinematicParams::default(),
            accel_cfg: AccelConfig::default(),
            ultrasonic: UltrasonicConfig::default(),
            presets: None,
            gains: PidGains::default(),
            refs: SpeedRefs::default(),
            mission_cfg: MissionConfig::default(),
            battery: BatteryModel::default(),
            charger: ChargerConfig::default(),
            loads: LoadLedger::default(),
            cleaning: CleaningConfig::default(),
            start: None,
            dt_s: default_dt(),
            max_sim_s: default_max_sim(),
            seed: 0,
            turn_flip_target: default_flip_target(),
        }
    }
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self> {
        let s: Scenario = serde_json::from_str(text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt_s.is_finite() && self.dt_s > 0.0) {
            return Err(Error::invalid("scenario", "dt_s must be > 0"));
        }
        if !(self.max_sim_s.is_finite() && self.max_sim_s > 0.0) {
            return Err(Error::invalid("scenario", "max_sim_s must be > 0"));
        }
        if self.turn_flip_target == 0 {
            return Err(Error::invalid("scenario", "turn_flip_target must be >= 1"));
        }
        self.layout.validate()?;
        self.kinematics.validate()?;
        self.accel_cfg.validate()?;
        self.ultrasonic.validate()?;
        self.presets().validate(&self.accel_cfg)?;
        if !self.gains.is_finite() {
            return Err(Error::invalid("gains", "gains must be finite"));
        }
        if !self.refs.all_in_range() {
            return Err(Error::invalid("refs", "reference duties must be in [0, 1000]"));
        }
        self.mission_cfg.validate()?;
        self.battery.validate()?;
        self.charger.validate(&self.battery)?;
        self.loads.validate()?;
        self.cleaning.validate()?;
        if let Some(p) = self.start {
            if !(p.x_m.is_finite() && p.y_m.is_finite() && p.heading_rad.is_finite()) {
                return Err(Error::invalid("start", "pose must be finite"));
            }
        }
        Ok(())
    }

    pub fn presets(&self) -> PresetValues {
        self.presets.unwrap_or_else(|| {
            let incline = self.layout.panels.first().map_or(0.0, |p| p.incline_deg);
            PresetValues::from_model(&self.accel_cfg, incline)
        })
    }

    /// Head width: one nozzle plus the overlap.
    pub fn head_width_m(&self) -> f64 {
        self.mission_cfg.nozzle_width_m + self.cleaning.head_overlap_m
    }

    pub fn start_pose(&self) -> Pose {
        self.start.unwrap_or_else(|| {
            let x0 = if self.layout.dock_offset_m > 0.0 {
                self.layout.dock_offset_m
            } else {
                0.0
            };
            Pose {
                x_m: x0 + self.mission_cfg.nozzle_width_m / 2.0,
                y_m: self.cleaning.head_rear_m,
                heading_rad: FRAC_PI_2,
            }
        })
    }
}
