mod common;

use panelbot::engine::{run, Engine};
use panelbot::mission::MissionState;
use panelbot::scenario::Scenario;
use panelbot::sensors::AccelConfig;
use panelbot::trace::{emit_trace_csv, TRACE_HEADER};
use panelbot::world::{ArrayLayout, PanelSpec};
use panelbot::Error;

use common::{mean_abs_duty, segments};

fn short(seed: u64, max_sim_s: f64) -> Scenario {
    Scenario {
        seed,
        max_sim_s,
        ..Scenario::default()
    }
}

#[test]
fn same_seed_same_bytes() {
    let sc = short(77, 120.0);
    let a = emit_trace_csv(&run(&sc).unwrap().trace).unwrap();
    let b = emit_trace_csv(&run(&sc).unwrap().trace).unwrap();
    assert_eq!(a, b);
    assert!(a.starts_with(TRACE_HEADER));
}

#[test]
fn rows_advance_by_dt() {
    let sc = short(1, 30.0);
    let out = run(&sc).unwrap();
    assert_eq!(out.trace.len(), 1501);
    for (i, r) in out.trace.iter().enumerate() {
        assert_eq!(r.t_s, i as f64 * sc.dt_s);
    }
}

#[test]
fn invalid_scenario_fails_before_tick_zero() {
    let sc = Scenario {
        dt_s: -1.0,
        ..Scenario::default()
    };
    assert!(matches!(run(&sc), Err(Error::Invalid { .. })));
    assert!(Engine::new(&sc).is_err());
}

#[test]
fn forced_low_battery_resumes_at_interrupted_column() {
    let mut sc = short(11, 20_000.0);
    sc.mission_cfg.force_low_battery_after_columns = Some(2);
    let out = run(&sc).unwrap();
    let tos: Vec<MissionState> = out.events.iter().map(|e| e.to).collect();
    for s in [
        MissionState::TransitToDock,
        MissionState::Charging,
        MissionState::ResumeTransit,
    ] {
        assert!(tos.contains(&s), "missing {s}");
    }
    assert_eq!(out.summary.interrupt_column, Some(2));
    assert_eq!(out.summary.resume_column, Some(2));
    // The first column finished after the resume is the third one.
    let after = out
        .events
        .iter()
        .skip_while(|e| e.from != MissionState::ResumeTransit)
        .find(|e| e.from == MissionState::Ascend)
        .unwrap();
    assert_eq!(after.column_index, 3);
}

#[test]
fn distance_from_dock_only_moves_in_transit_states() {
    let mut sc = short(12, 20_000.0);
    sc.mission_cfg.force_low_battery_after_columns = Some(1);
    let mut engine = Engine::new(&sc).unwrap();
    let mut prev = engine.memory().distance_from_dock;
    while let Some(row) = engine.tick().unwrap() {
        let d = engine.memory().distance_from_dock;
        if d > prev {
            assert_eq!(row.state, MissionState::TransitToDock);
        }
        if d < prev {
            assert!(matches!(
                row.state,
                MissionState::ResumeTransit | MissionState::TurnToAscend
            ));
        }
        prev = d;
    }
}

#[test]
fn flat_noise_free_ascent_holds_heading() {
    let sc = Scenario {
        layout: ArrayLayout {
            panels: vec![PanelSpec::new(1.0, 0.6, 0.0)],
            ..ArrayLayout::default()
        },
        accel_cfg: AccelConfig {
            noise_sd_counts: 0.0,
            ..AccelConfig::default()
        },
        max_sim_s: 60.0,
        ..Scenario::default()
    };
    let out = run(&sc).unwrap();
    let first = segments(&out.trace)[0];
    assert_eq!(first.state, MissionState::Ascend);
    let h0 = out.trace[0].heading_rad;
    assert!(first.rows(&out.trace).iter().all(|r| r.heading_rad == h0));
}

#[test]
fn descent_uses_less_duty_than_ascent() {
    let out = run(&short(4, 250.0)).unwrap();
    let segs = segments(&out.trace);
    let up: Vec<f64> = segs
        .iter()
        .filter(|s| s.state == MissionState::Ascend)
        .map(|s| mean_abs_duty(s.rows(&out.trace)))
        .collect();
    let down: Vec<f64> = segs
        .iter()
        .filter(|s| s.state == MissionState::Descend)
        .map(|s| mean_abs_duty(s.rows(&out.trace)))
        .collect();
    assert!(!up.is_empty() && !down.is_empty());
    let min_up = up.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(down.iter().all(|&d| d < min_up));
}

#[test]
fn battery_only_rises_while_charging() {
    let out = run(&short(5, 20_000.0)).unwrap();
    for w in out.trace.windows(2) {
        if w[1].battery_v > w[0].battery_v {
            assert_eq!(w[0].state, MissionState::Charging, "at t = {}", w[0].t_s);
        }
    }
}

#[test]
fn vacuum_follows_state_and_region() {
    let out = run(&short(6, 20_000.0)).unwrap();
    for r in &out.trace {
        if matches!(
            r.state,
            MissionState::TransitToDock
                | MissionState::Docking
                | MissionState::Charging
                | MissionState::ResumeTransit
                | MissionState::Idle
        ) {
            assert!(!r.vacuum_on);
        }
    }
    assert!(out.trace.iter().any(|r| r.vacuum_on));
}

#[test]
fn two_panels_with_a_rail() {
    let sc = Scenario {
        layout: ArrayLayout {
            panels: vec![PanelSpec::new(1.0, 0.4, 30.0), PanelSpec::new(1.0, 0.4, 30.0)],
            rail_length_m: 0.3,
            ..ArrayLayout::default()
        },
        seed: 8,
        ..Scenario::default()
    };
    let out = run(&sc).unwrap();
    let s = &out.summary;
    assert_eq!(s.final_state, MissionState::Idle);
    assert!(s.columns_completed >= 8, "{s:?}");
    assert!(s.coverage_fraction > 0.9, "{s:?}");
    // Both panels were worked on.
    for p in &out.grid.panels {
        assert!(p.pass_count.iter().any(|&c| c > 0));
    }
}
