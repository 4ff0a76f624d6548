//! Python bindings. Exposed as the `panelbot` module.

use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use panelbot_core::control::{pid_step as core_pid_step, PidGains, PidState};
use panelbot_core::engine::run;
use panelbot_core::power::{self, BatteryModel, BuckDesign, ChargerConfig};
use panelbot_core::scenario::Scenario;
use panelbot_core::sensors;
use panelbot_core::trace::{emit_summary, emit_trace_csv};
use panelbot_core::Error;

fn to_py(e: Error) -> PyErr {
    if e.is_validation() {
        PyValueError::new_err(e.to_string())
    } else {
        PyOSError::new_err(e.to_string())
    }
}

/// Scenario document with every default filled in.
#[pyfunction]
fn default_scenario_json() -> String {
    Scenario::default().to_json()
}

/// Runs a scenario given as JSON. Returns a dict with `trace_csv`,
/// `summary_text`, `summary` and `events`.
#[pyfunction]
#[pyo3(signature = (scenario_json, seed=None, max_sim_s=None))]
fn simulate<'py>(
    py: Python<'py>,
    scenario_json: &str,
    seed: Option<u64>,
    max_sim_s: Option<f64>,
) -> PyResult<Bound<'py, PyDict>> {
    let mut sc = Scenario::from_json(scenario_json).map_err(to_py)?;
    if let Some(s) = seed {
        sc.seed = s;
    }
    if let Some(m) = max_sim_s {
        sc.max_sim_s = m;
    }
    sc.validate().map_err(to_py)?;
    let out = py.detach(|| run(&sc)).map_err(to_py)?;

    let s = &out.summary;
    let summary = PyDict::new(py);
    summary.set_item("coverage_fraction", s.coverage_fraction)?;
    summary.set_item("columns_completed", s.columns_completed)?;
    summary.set_item("dock_events", s.dock_events)?;
    summary.set_item("resume_column", s.resume_column)?;
    summary.set_item("interrupt_column", s.interrupt_column)?;
    summary.set_item("final_distance_from_dock", s.final_distance_from_dock)?;
    summary.set_item("mean_ascend_speed_mps", s.mean_ascend_speed_mps)?;
    summary.set_item("mean_descend_speed_mps", s.mean_descend_speed_mps)?;
    summary.set_item("sim_time_s", s.sim_time_s)?;
    summary.set_item("final_state", s.final_state.name())?;

    let events: Vec<(f64, &str, &str, u32, u64)> = out
        .events
        .iter()
        .map(|e| (e.t_s, e.from.name(), e.to.name(), e.column_index, e.distance_from_dock))
        .collect();

    let d = PyDict::new(py);
    d.set_item("trace_csv", emit_trace_csv(&out.trace).map_err(to_py)?)?;
    d.set_item("summary_text", emit_summary(s))?;
    d.set_item("summary", summary)?;
    d.set_item("events", events)?;
    Ok(d)
}

/// One PID update. Returns `(e, ei, prev_error)`.
#[pyfunction]
#[pyo3(signature = (error, ei=0.0, prev_error=0.0, kp=20.0, ki=2.0, kd=10.0))]
fn pid_step(error: f64, ei: f64, prev_error: f64, kp: f64, ki: f64, kd: f64) -> (f64, f64, f64) {
    let (e, st) = core_pid_step(PidState { ei, prev_error }, error, &PidGains { kp, ki, kd });
    (e, st.ei, st.prev_error)
}

/// Echo duration in microseconds to distance in inches.
#[pyfunction]
fn ultra_distance(echo_us: f64) -> PyResult<f64> {
    sensors::ultra_distance(echo_us).map_err(to_py)
}

#[pyfunction]
fn buck_inductance(v_in: f64, v_out: f64, duty_d: f64, f_sw: f64, delta_i: f64) -> PyResult<f64> {
    power::buck_inductance(v_in, v_out, duty_d, f_sw, delta_i).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (v_in, v_out, f_sw, delta_i, f_corner=None))]
fn buck_design<'py>(
    py: Python<'py>,
    v_in: f64,
    v_out: f64,
    f_sw: f64,
    delta_i: f64,
    f_corner: Option<f64>,
) -> PyResult<Bound<'py, PyDict>> {
    let b = BuckDesign::new(v_in, v_out, f_sw, delta_i, f_corner).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("duty_d", b.duty_d)?;
    d.set_item("l_h", b.l_h)?;
    d.set_item("c_f", b.c_f)?;
    d.set_item("f_corner", b.f_corner)?;
    Ok(d)
}

type ChargeRow = (f64, &'static str, f64, f64, f64);

/// CC/CV charge rows as `(t_s, phase, terminal_v, current_a, soc)`.
#[pyfunction]
#[pyo3(signature = (capacity_ah, i_cc, i_term, cv_tau_s, soc=0.0, dt=1.0, max_s=None))]
fn charge_profile(
    capacity_ah: f64,
    i_cc: f64,
    i_term: f64,
    cv_tau_s: f64,
    soc: f64,
    dt: f64,
    max_s: Option<f64>,
) -> PyResult<Vec<ChargeRow>> {
    let batt = BatteryModel {
        capacity_ah,
        soc,
        ..BatteryModel::default()
    };
    let cfg = ChargerConfig {
        i_cc,
        i_term,
        cv_tau_s,
        v_cv: batt.v_full,
    };
    batt.validate().map_err(to_py)?;
    cfg.validate(&batt).map_err(to_py)?;
    let max_s = max_s.unwrap_or(2.0 * (capacity_ah * 3600.0 / i_cc + cfg.cv_duration_s()) + dt);
    let rows = power::charge_profile(&batt, &cfg, dt, max_s).map_err(to_py)?;
    Ok(rows
        .iter()
        .map(|r| (r.t_s, r.phase.name(), r.terminal_v, r.current_a, r.soc))
        .collect())
}

#[pymodule]
fn panelbot(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(default_scenario_json, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(pid_step, m)?)?;
    m.add_function(wrap_pyfunction!(ultra_distance, m)?)?;
    m.add_function(wrap_pyfunction!(buck_inductance, m)?)?;
    m.add_function(wrap_pyfunction!(buck_design, m)?)?;
    m.add_function(wrap_pyfunction!(charge_profile, m)?)?;
    Ok(())
}
