//! Trace CSV and run summary serialization.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::mission::MissionState;
use crate::{Error, Result};

pub const TRACE_HEADER: &str =
    "t_s,state,ultra_in,duty_left,duty_right,accel_x,accel_y,battery_v,x_m,y_m,heading_rad,vacuum_on";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub t_s: f64,
    pub state: MissionState,
    pub ultra_in: f64,
    pub duty_left: i32,
    pub duty_right: i32,
    pub accel_x: i32,
    pub accel_y: i32,
    pub battery_v: f64,
    pub x_m: f64,
    pub y_m: f64,
    pub heading_rad: f64,
    pub vacuum_on: bool,
}

/// Mission state transition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Event {
    pub t_s: f64,
    pub from: MissionState,
    pub to: MissionState,
    pub column_index: u32,
    pub distance_from_dock: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RunSummary {
    pub coverage_fraction: f64,
    pub columns_completed: u32,
    pub dock_events: u32,
    /// Column the robot went back to after its last charge, if it resumed.
    pub resume_column: Option<u32>,
    /// Column that was pending when the battery went low, if it did.
    pub interrupt_column: Option<u32>,
    pub final_distance_from_dock: u64,
    pub mean_ascend_speed_mps: f64,
    pub mean_descend_speed_mps: f64,
    pub sim_time_s: f64,
    pub final_state: MissionState,
    /// Simulated seconds per wall-clock second.
    pub sim_wall_ratio: f64,
}

/// Formats like C's `%.6g`.
pub fn fmt_sig6(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return v.to_string();
    }
    // Exponent after rounding to six digits, as %g decides.
    let sci = format!("{v:.5e}");
    let (mantissa, e) = sci.split_once('e').expect("exponent form");
    let exp: i32 = e.parse().expect("integer exponent");
    if !(-4..6).contains(&exp) {
        return format!("{}e{}", trim_zeros(mantissa), exp);
    }
    let decimals = (5 - exp) as usize;
    trim_zeros(&format!("{v:.decimals$}")).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Time stamps keep full microsecond resolution so long runs stay strictly
/// increasing.
fn fmt_time(t: f64) -> String {
    let s = format!("{t:.6}");
    let trimmed = trim_zeros(&s);
    if trimmed == "-0" { "0".into() } else { trimmed.into() }
}

pub fn emit_trace_csv(trace: &[TraceRow]) -> Result<String> {
    if trace.is_empty() {
        return Err(Error::EmptyTrace);
    }
    let mut out = String::with_capacity(80 * (trace.len() + 1));
    out.push_str(TRACE_HEADER);
    out.push('\n');
    for r in trace {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            fmt_time(r.t_s),
            r.state.name(),
            fmt_sig6(r.ultra_in),
            r.duty_left,
            r.duty_right,
            r.accel_x,
            r.accel_y,
            fmt_sig6(r.battery_v),
            fmt_sig6(r.x_m),
            fmt_sig6(r.y_m),
            fmt_sig6(r.heading_rad),
            u8::from(r.vacuum_on),
        )
        .expect("writing to a String cannot fail");
    }
    Ok(out)
}

/// Flat `key = value` document.
pub fn emit_summary(s: &RunSummary) -> String {
    let opt = |v: Option<u32>| v.map_or_else(|| "none".to_string(), |c| c.to_string());
    let lines = [
        ("coverage_fraction", fmt_sig6(s.coverage_fraction)),
        ("columns_completed", s.columns_completed.to_string()),
        ("dock_events", s.dock_events.to_string()),
        ("resume_column", opt(s.resume_column)),
        ("interrupt_column", opt(s.interrupt_column)),
        ("final_distance_from_dock", s.final_distance_from_dock.to_string()),
        ("mean_ascend_speed_mps", fmt_sig6(s.mean_ascend_speed_mps)),
        ("mean_descend_speed_mps", fmt_sig6(s.mean_descend_speed_mps)),
        ("sim_time_s", fmt_time(s.sim_time_s)),
        ("final_state", s.final_state.name().to_string()),
        ("sim_wall_ratio", fmt_sig6(s.sim_wall_ratio)),
    ];
    let mut out = String::new();
    for (k, v) in lines {
        writeln!(out, "{k} = {v}").expect("writing to a String cannot fail");
    }
    out
}

pub fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}
