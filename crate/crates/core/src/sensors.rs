//! Accelerometer, ultrasonic ranger and battery indicator models.
//!
//! Accelerometer readings follow the firmware pipeline: raw 10-bit counts from
//! two sensors, averaged over `2 * n_samples` reads and converted to integer
//! centi-g (including the zero-g bias). The body frame has `x` pointing to the
//! robot's right and `y` forward, so on a slope `x` reads the sideways tilt
//! and `y` the pitch.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::world::Workspace;
use crate::{Error, Result};

/// Microseconds of round-trip echo per inch of range, one way.
pub const US_PER_INCH: f64 = 74.07;
pub const DEFAULT_CLIFF_THRESHOLD_IN: f64 = 4.0;
pub const FULL_CHARGE_V: f64 = 12.6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AccelConfig {
    pub sensitivity_v_per_g: f64,
    pub zero_g_offset_v: f64,
    pub vref_v: f64,
    pub adc_full_scale: u16,
    pub noise_sd_counts: f64,
    pub n_samples: usize,
}

impl Default for AccelConfig {
    fn default() -> Self {
        Self {
            sensitivity_v_per_g: 0.8,
            zero_g_offset_v: 1.65,
            vref_v: 3.3,
            adc_full_scale: 1023,
            noise_sd_counts: 2.0,
            n_samples: 5,
        }
    }
}

impl AccelConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sensitivity_v_per_g > 0.0 && self.vref_v > 0.0) {
            return Err(Error::invalid("accel", "sensitivity and vref must be > 0"));
        }
        if !(0.0..=self.vref_v).contains(&self.zero_g_offset_v) {
            return Err(Error::invalid("accel", "zero_g_offset_v must lie in [0, vref]"));
        }
        if self.n_samples == 0 {
            return Err(Error::invalid("accel", "n_samples must be >= 1"));
        }
        if !(self.noise_sd_counts.is_finite() && self.noise_sd_counts >= 0.0) {
            return Err(Error::invalid("accel", "noise_sd_counts must be >= 0"));
        }
        if self.adc_full_scale == 0 {
            return Err(Error::invalid("accel", "adc_full_scale must be > 0"));
        }
        Ok(())
    }

    /// Largest value a reduced axis can take.
    pub fn max_centi_g(&self) -> i32 {
        (100.0 * self.vref_v / self.sensitivity_v_per_g).round() as i32
    }

    /// Centi-g value of a raw (possibly averaged) count.
    pub fn counts_to_centi_g(&self, mean_counts: f64) -> i32 {
        (100.0 * ((mean_counts / 1024.0) * self.vref_v) / self.sensitivity_v_per_g).round() as i32
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct AccelFrame {
    pub x1: i32,
    pub y1: i32,
    pub z1: i32,
}

/// Accelerometer setpoints in centi-g counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PresetValues {
    pub x1_set_up: i32,
    pub x1_set_down: i32,
    pub x1_set_turn: i32,
    pub y1_set_turn: i32,
}

impl Default for PresetValues {
    /// The hand-tuned firmware values.
    fn default() -> Self {
        Self {
            x1_set_up: 218,
            x1_set_down: 218,
            x1_set_turn: 217,
            y1_set_turn: 247,
        }
    }
}

impl PresetValues {
    /// Setpoints that match the noise-free sensor model: each one is the
    /// reading of the controlled axis when the robot points exactly where
    /// that behavior wants it to.
    pub fn from_model(cfg: &AccelConfig, incline_deg: f64) -> Self {
        use std::f64::consts::FRAC_PI_2;
        let reduce_ideal = |heading: f64| {
            let counts = ideal_counts(body_accel_g(incline_deg, heading), cfg);
            AccelFrame {
                x1: cfg.counts_to_centi_g(f64::from(counts[0])),
                y1: cfg.counts_to_centi_g(f64::from(counts[1])),
                z1: cfg.counts_to_centi_g(f64::from(counts[2])),
            }
        };
        let up = reduce_ideal(FRAC_PI_2);
        let down = reduce_ideal(-FRAC_PI_2);
        let lateral = reduce_ideal(0.0);
        Self {
            x1_set_up: up.x1,
            x1_set_down: down.x1,
            x1_set_turn: up.x1,
            y1_set_turn: lateral.y1,
        }
    }

    pub fn validate(&self, cfg: &AccelConfig) -> Result<()> {
        let max = cfg.max_centi_g();
        for v in [self.x1_set_up, self.x1_set_down, self.x1_set_turn, self.y1_set_turn] {
            if !(0..=max).contains(&v) {
                return Err(Error::invalid("presets", format!("{v} outside [0, {max}]")));
            }
        }
        Ok(())
    }
}

/// Specific force in g along the body axes `[right, forward, normal]` for a
/// robot at `heading_rad` on a surface inclined by `incline_deg`.
pub fn body_accel_g(incline_deg: f64, heading_rad: f64) -> [f64; 3] {
    let (si, ci) = incline_deg.to_radians().sin_cos();
    // Relative to up-slope, alpha = heading - PI/2.
    let (sin_alpha, cos_alpha) = (-heading_rad.cos(), heading_rad.sin());
    [si * sin_alpha, si * cos_alpha, ci]
}

fn ideal_counts(accel_g: [f64; 3], cfg: &AccelConfig) -> [u16; 3] {
    accel_g.map(|a| to_count(ideal_count(a, cfg), cfg))
}

fn ideal_count(a: f64, cfg: &AccelConfig) -> f64 {
    (cfg.zero_g_offset_v + cfg.sensitivity_v_per_g * a) * f64::from(cfg.adc_full_scale) / cfg.vref_v
}

fn to_count(value: f64, cfg: &AccelConfig) -> u16 {
    value.round().clamp(0.0, f64::from(cfg.adc_full_scale)) as u16
}

/// One raw ADC read of all three axes.
pub fn sample_accel_counts<R: Rng + ?Sized>(
    true_accel_g: [f64; 3],
    cfg: &AccelConfig,
    rng: &mut R,
) -> [u16; 3] {
    if cfg.noise_sd_counts > 0.0 {
        let noise = Normal::new(0.0, cfg.noise_sd_counts).expect("sd validated as finite");
        true_accel_g.map(|a| to_count(ideal_count(a, cfg) + noise.sample(rng), cfg))
    } else {
        ideal_counts(true_accel_g, cfg)
    }
}

/// Averages `n_samples` reads from each of the two sensors and converts the
/// mean to centi-g.
pub fn accel_reduce(
    sensor_a: &[[u16; 3]],
    sensor_b: &[[u16; 3]],
    cfg: &AccelConfig,
) -> Result<AccelFrame> {
    for s in [sensor_a, sensor_b] {
        if s.len() != cfg.n_samples {
            return Err(Error::SampleCount {
                expected: cfg.n_samples,
                got: s.len(),
            });
        }
    }
    let mut sums = [0u64; 3];
    for frame in sensor_a.iter().chain(sensor_b) {
        for (sum, &c) in sums.iter_mut().zip(frame) {
            *sum += u64::from(c);
        }
    }
    let n = (2 * cfg.n_samples) as f64;
    let [x, y, z] = sums.map(|s| cfg.counts_to_centi_g(s as f64 / n));
    Ok(AccelFrame { x1: x, y1: y, z1: z })
}

/// Both accelerometers plus the random stream that feeds their noise.
#[derive(Debug, Clone)]
pub struct AccelPair<R> {
    pub cfg: AccelConfig,
    rng: R,
    buf_a: Vec<[u16; 3]>,
    buf_b: Vec<[u16; 3]>,
}

impl<R: Rng> AccelPair<R> {
    pub fn new(cfg: AccelConfig, rng: R) -> Self {
        Self {
            cfg,
            rng,
            buf_a: Vec::with_capacity(cfg.n_samples),
            buf_b: Vec::with_capacity(cfg.n_samples),
        }
    }

    pub fn read(&mut self, incline_deg: f64, heading_rad: f64) -> AccelFrame {
        let accel = body_accel_g(incline_deg, heading_rad);
        self.buf_a.clear();
        self.buf_b.clear();
        for _ in 0..self.cfg.n_samples {
            self.buf_a.push(sample_accel_counts(accel, &self.cfg, &mut self.rng));
            self.buf_b.push(sample_accel_counts(accel, &self.cfg, &mut self.rng));
        }
        accel_reduce(&self.buf_a, &self.buf_b, &self.cfg).expect("buffers hold n_samples frames")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct UltrasonicConfig {
    /// Distance of the look-down point ahead of the drive axle.
    pub forward_offset_m: f64,
    pub mount_height_in: f64,
    pub max_range_in: f64,
    pub cliff_threshold_in: f64,
}

impl Default for UltrasonicConfig {
    fn default() -> Self {
        Self {
            forward_offset_m: 0.04,
            mount_height_in: 2.0,
            max_range_in: 100.0,
            cliff_threshold_in: DEFAULT_CLIFF_THRESHOLD_IN,
        }
    }
}

impl UltrasonicConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.forward_offset_m >= 0.0 && self.mount_height_in >= 0.0) {
            return Err(Error::invalid("ultrasonic", "offset and mount height must be >= 0"));
        }
        if !(self.max_range_in > self.cliff_threshold_in && self.cliff_threshold_in >= 0.0) {
            return Err(Error::invalid("ultrasonic", "max_range_in must exceed the cliff threshold"));
        }
        Ok(())
    }

    pub fn look_point(&self, x_m: f64, y_m: f64, heading_rad: f64) -> (f64, f64) {
        let (s, c) = heading_rad.sin_cos();
        (x_m + self.forward_offset_m * c, y_m + self.forward_offset_m * s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UltrasonicReading {
    pub echo_duration_us: f64,
    pub distance_in: f64,
}

impl UltrasonicReading {
    pub fn from_echo(echo_duration_us: f64) -> Result<Self> {
        Ok(Self {
            echo_duration_us,
            distance_in: ultra_distance(echo_duration_us)?,
        })
    }
}

pub fn ultra_distance(echo_duration_us: f64) -> Result<f64> {
    if !(echo_duration_us >= 0.0) {
        return Err(Error::invalid(
            "echo_duration_us",
            format!("{echo_duration_us} must be >= 0"),
        ));
    }
    Ok((echo_duration_us / 2.0) / US_PER_INCH)
}

fn echo_for(distance_in: f64) -> f64 {
    distance_in * 2.0 * US_PER_INCH
}

/// Echo time seen by a ranger whose look-down ray hits `(x, y)`.
pub fn simulate_echo(x_m: f64, y_m: f64, ws: &Workspace, cfg: &UltrasonicConfig) -> f64 {
    if ws.region_at(x_m, y_m).is_off_surface() {
        echo_for(cfg.max_range_in)
    } else {
        echo_for(cfg.mount_height_in)
    }
}

pub fn detect_cliff(distance_in: f64, threshold_in: f64) -> bool {
    distance_in > threshold_in
}

/// Ten-LED dot-mode level indicator calibrated so `full_v` lights the top LED.
pub fn battery_dot_level(v: f64, full_v: f64) -> u8 {
    // The small epsilon keeps exact fractions such as 6.3 / 12.6 on their step.
    (10.0 * v / full_v + 1e-9).floor().clamp(0.0, 10.0) as u8
}
