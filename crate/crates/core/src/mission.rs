//! Coverage, battery supervision and docking state machine.
//!
//! The robot sweeps the array column by column: climb until the ranger sees
//! the top edge, back off, turn, step sideways one nozzle width, turn and
//! descend. After every descent it checks the battery; a low pack sends it
//! back along the bottom edge to the dock, counting ticks so it can retrace
//! the same distance and resume where it stopped. A confirmed edge during the
//! bottom lateral step means the array is finished.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::control::{AlignAxis, DriveMode};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MissionConfig {
    /// Lateral step between columns.
    pub nozzle_width_m: f64,
    /// Consecutive edge readings that must be exceeded to confirm a cliff.
    pub cliff_debounce: u32,
    pub lateral_step_count: u32,
    /// Length of one lateral control tick.
    pub lateral_tick_s: f64,
    pub low_battery_v: f64,
    pub reverse_duration_s: f64,
    pub reverse_duty: i32,
    /// Safety cap on a single turn.
    pub turn_timeout_s: f64,
    pub dock_tolerance_m: f64,
    /// Test hook: report a low battery at the first check after this many
    /// columns are done.
    pub force_low_battery_after_columns: Option<u32>,
}

impl Default for MissionConfig {
    fn default() -> Self {
        Self {
            nozzle_width_m: 0.10,
            cliff_debounce: 20,
            lateral_step_count: 10,
            lateral_tick_s: 0.5,
            low_battery_v: 10.5,
            reverse_duration_s: 0.5,
            reverse_duty: 800,
            turn_timeout_s: 30.0,
            dock_tolerance_m: 0.05,
            force_low_battery_after_columns: None,
        }
    }
}

impl MissionConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("nozzle_width_m", self.nozzle_width_m),
            ("lateral_tick_s", self.lateral_tick_s),
            ("low_battery_v", self.low_battery_v),
            ("reverse_duration_s", self.reverse_duration_s),
            ("turn_timeout_s", self.turn_timeout_s),
            ("dock_tolerance_m", self.dock_tolerance_m),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid("mission", format!("{name} = {v} must be > 0")));
            }
        }
        if self.cliff_debounce < 1 || self.lateral_step_count < 1 {
            return Err(Error::invalid("mission", "cliff_debounce and lateral_step_count must be >= 1"));
        }
        if !(1..=1000).contains(&self.reverse_duty) {
            return Err(Error::invalid("mission", "reverse_duty must be in [1, 1000]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MissionState {
    Ascend,
    ReverseTop,
    TurnAtTop,
    LateralTop,
    TurnToDescend,
    Descend,
    ReverseBottom,
    BatteryCheck,
    TurnAtBottom,
    LateralBottom,
    TurnToAscend,
    TransitToDock,
    Docking,
    Charging,
    ResumeTransit,
    Idle,
}

impl MissionState {
    pub const ALL: [MissionState; 16] = [
        MissionState::Ascend,
        MissionState::ReverseTop,
        MissionState::TurnAtTop,
        MissionState::LateralTop,
        MissionState::TurnToDescend,
        MissionState::Descend,
        MissionState::ReverseBottom,
        MissionState::BatteryCheck,
        MissionState::TurnAtBottom,
        MissionState::LateralBottom,
        MissionState::TurnToAscend,
        MissionState::TransitToDock,
        MissionState::Docking,
        MissionState::Charging,
        MissionState::ResumeTransit,
        MissionState::Idle,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MissionState::Ascend => "Ascend",
            MissionState::ReverseTop => "ReverseTop",
            MissionState::TurnAtTop => "TurnAtTop",
            MissionState::LateralTop => "LateralTop",
            MissionState::TurnToDescend => "TurnToDescend",
            MissionState::Descend => "Descend",
            MissionState::ReverseBottom => "ReverseBottom",
            MissionState::BatteryCheck => "BatteryCheck",
            MissionState::TurnAtBottom => "TurnAtBottom",
            MissionState::LateralBottom => "LateralBottom",
            MissionState::TurnToAscend => "TurnToAscend",
            MissionState::TransitToDock => "TransitToDock",
            MissionState::Docking => "Docking",
            MissionState::Charging => "Charging",
            MissionState::ResumeTransit => "ResumeTransit",
            MissionState::Idle => "Idle",
        }
    }

    pub fn is_turn(self) -> bool {
        matches!(
            self,
            MissionState::TurnAtTop
                | MissionState::TurnToDescend
                | MissionState::TurnAtBottom
                | MissionState::TurnToAscend
        )
    }

    pub fn is_lateral(self) -> bool {
        matches!(self, MissionState::LateralTop | MissionState::LateralBottom)
    }
}

impl fmt::Display for MissionState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MissionState {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MissionState::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::invalid("mission state", format!("unknown state {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MissionMemory {
    /// Columns finished so far; also the column the robot resumes at.
    pub column_index: u32,
    pub distance_from_dock: u64,
    pub battery_was_low: bool,
    pub cliff_streak: u32,
    /// Time spent in the current state.
    pub state_elapsed_s: f64,
    /// Lateral time spent on panels during the current lateral step.
    pub lateral_elapsed_s: f64,
    /// Alignment turns left before `TransitToDock` starts driving. Coming
    /// from a descent one turn faces the dock; coming from a bottom lateral
    /// step the robot first turns to face down-slope.
    pub transit_turns: u8,
    /// A confirmed edge ended a bottom lateral step: nothing left to clean.
    pub array_done: bool,
}

/// Per-tick inputs, already reduced by the engine.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Observations {
    /// Instantaneous cliff detector output.
    pub cliff: bool,
    pub turn_done: bool,
    pub battery_low: bool,
    pub charge_complete: bool,
    /// The current lateral step has covered one nozzle width.
    pub lateral_done: bool,
    pub on_rail: bool,
    pub at_dock: bool,
    pub dt: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Behavior {
    Drive(DriveMode),
    Turn { axis: AlignAxis, negate: bool },
    /// Back away from an edge at `reverse_duty`.
    Reverse,
    /// Retrace the dock transit backwards at lateral speed.
    Retrace,
    Stop,
    Charge,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BehaviorDirective {
    pub behavior: Behavior,
    /// Brush and vacuum share one enable line.
    pub cleaning: bool,
}

impl BehaviorDirective {
    fn new(behavior: Behavior) -> Self {
        Self {
            behavior,
            cleaning: false,
        }
    }

    fn cleaning(behavior: Behavior) -> Self {
        Self {
            behavior,
            cleaning: true,
        }
    }
}

/// Counts consecutive edge readings; confirms once the streak exceeds the
/// debounce count and starts over.
pub fn debounce_cliff(mem: &MissionMemory, cliff: bool, cfg: &MissionConfig) -> (bool, MissionMemory) {
    let mut next = *mem;
    if !cliff {
        next.cliff_streak = 0;
        return (false, next);
    }
    next.cliff_streak += 1;
    if next.cliff_streak > cfg.cliff_debounce {
        next.cliff_streak = 0;
        (true, next)
    } else {
        (false, next)
    }
}

/// Lateral control ticks left in the current lateral step.
pub fn lateral_budget(mem: &MissionMemory, cfg: &MissionConfig) -> u32 {
    let used = (mem.lateral_elapsed_s / cfg.lateral_tick_s + 1e-9).floor() as u32;
    cfg.lateral_step_count.saturating_sub(used)
}

fn turn(axis: AlignAxis, negate: bool) -> BehaviorDirective {
    BehaviorDirective::new(Behavior::Turn { axis, negate })
}

/// Behavior for a tick spent in `state`.
fn entry_directive(state: MissionState, m: &MissionMemory) -> BehaviorDirective {
    use MissionState::*;
    match state {
        Ascend => BehaviorDirective::cleaning(Behavior::Drive(DriveMode::Ascend)),
        Descend => BehaviorDirective::cleaning(Behavior::Drive(DriveMode::Descend)),
        LateralTop | LateralBottom => BehaviorDirective::cleaning(Behavior::Drive(DriveMode::Lateral)),
        ReverseTop | ReverseBottom => BehaviorDirective::new(Behavior::Reverse),
        TurnAtTop => turn(AlignAxis::Y, false),
        TurnToDescend => turn(AlignAxis::X, true),
        TurnAtBottom => turn(AlignAxis::Y, false),
        TurnToAscend => turn(AlignAxis::X, false),
        TransitToDock => match m.transit_turns {
            0 => BehaviorDirective::new(Behavior::Stop),
            1 => turn(AlignAxis::Y, true),
            // Same swing as `TurnToDescend`.
            _ => turn(AlignAxis::X, true),
        },
        ResumeTransit => BehaviorDirective::new(Behavior::Retrace),
        Charging => BehaviorDirective::new(Behavior::Charge),
        BatteryCheck | Docking | Idle => BehaviorDirective::new(Behavior::Stop),
    }
}

/// One tick of the mission.
pub fn mission_step(
    state: MissionState,
    mem: &MissionMemory,
    obs: &Observations,
    cfg: &MissionConfig,
) -> (MissionState, MissionMemory, BehaviorDirective) {
    use MissionState::*;
    let mut m = *mem;
    m.state_elapsed_s += obs.dt;
    let turn_finished = obs.turn_done || m.state_elapsed_s >= cfg.turn_timeout_s;

    let next = match state {
        Ascend | Descend => {
            let (confirmed, after) = debounce_cliff(&m, obs.cliff, cfg);
            m = after;
            if confirmed {
                m.column_index += 1;
                if state == Ascend {
                    ReverseTop
                } else {
                    ReverseBottom
                }
            } else if obs.cliff {
                return (state, m, BehaviorDirective::cleaning(Behavior::Stop));
            } else {
                state
            }
        }
        ReverseTop if m.state_elapsed_s >= cfg.reverse_duration_s => TurnAtTop,
        // The descent backs off twice as long to climb away from the edge.
        ReverseBottom if m.state_elapsed_s >= 2.0 * cfg.reverse_duration_s => BatteryCheck,
        TurnAtTop if turn_finished => LateralTop,
        TurnToDescend if turn_finished => Descend,
        TurnAtBottom if turn_finished => LateralBottom,
        TurnToAscend if turn_finished => Ascend,
        LateralTop | LateralBottom => {
            if !obs.on_rail {
                m.lateral_elapsed_s += obs.dt;
            }
            if state == LateralBottom {
                let (confirmed, after) = debounce_cliff(&m, obs.cliff, cfg);
                m = after;
                if confirmed {
                    m.array_done = true;
                    TransitToDock
                } else if obs.lateral_done || lateral_budget(&m, cfg) == 0 {
                    // A full step that ends right at the side edge still
                    // leaves a column to clean there.
                    TurnToAscend
                } else if obs.cliff {
                    return (state, m, BehaviorDirective::cleaning(Behavior::Stop));
                } else {
                    state
                }
            } else if obs.cliff || obs.lateral_done || lateral_budget(&m, cfg) == 0 {
                TurnToDescend
            } else {
                state
            }
        }
        BatteryCheck => {
            if obs.battery_low {
                m.battery_was_low = true;
                TransitToDock
            } else {
                TurnAtBottom
            }
        }
        TransitToDock => {
            if m.transit_turns > 0 {
                if turn_finished {
                    m.transit_turns -= 1;
                    m.state_elapsed_s = 0.0;
                    return (state, m, BehaviorDirective::new(Behavior::Stop));
                }
                state
            } else if obs.at_dock {
                Docking
            } else {
                m.distance_from_dock += 1;
                return (state, m, BehaviorDirective::new(Behavior::Drive(DriveMode::Return)));
            }
        }
        Docking => Charging,
        Charging if obs.charge_complete => {
            if m.battery_was_low && !m.array_done {
                m.battery_was_low = false;
                ResumeTransit
            } else {
                Idle
            }
        }
        ResumeTransit => {
            if m.distance_from_dock == 0 {
                TurnToAscend
            } else {
                m.distance_from_dock -= 1;
                state
            }
        }
        other => other,
    };

    if next != state {
        m.state_elapsed_s = 0.0;
        m.cliff_streak = 0;
        m.lateral_elapsed_s = 0.0;
        if next == TransitToDock {
            m.transit_turns = if state == LateralBottom { 2 } else { 1 };
        }
        // Both the retrace and a stop use this tick's command; the retrace
        // decrements before moving.
        if next == ResumeTransit && m.distance_from_dock > 0 {
            m.distance_from_dock -= 1;
        }
    }
    (next, m, entry_directive(next, &m))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn obs() -> Observations {
        Observations {
            dt: 0.02,
            ..Observations::default()
        }
    }

    #[test]
    fn debounce_confirms_after_exceeding() {
        let cfg = MissionConfig::default();
        let mut mem = MissionMemory::default();
        for i in 1..=21 {
            let (confirmed, m) = debounce_cliff(&mem, true, &cfg);
            mem = m;
            assert_eq!(confirmed, i == 21, "reading {i}");
            assert!(mem.cliff_streak <= cfg.cliff_debounce);
        }
    }

    #[test]
    fn debounce_resets_on_clear() {
        let cfg = MissionConfig::default();
        let mut mem = MissionMemory::default();
        for _ in 0..19 {
            (_, mem) = debounce_cliff(&mem, true, &cfg);
        }
        let (confirmed, mem) = debounce_cliff(&mem, false, &cfg);
        assert!(!confirmed);
        assert_eq!(mem.cliff_streak, 0);
    }

    #[test]
    fn debounce_of_one() {
        let cfg = MissionConfig {
            cliff_debounce: 1,
            ..MissionConfig::default()
        };
        let (c1, mem) = debounce_cliff(&MissionMemory::default(), true, &cfg);
        let (c2, _) = debounce_cliff(&mem, true, &cfg);
        assert!(!c1 && c2);
    }

    #[test]
    fn lateral_budget_counts_down() {
        let cfg = MissionConfig::default();
        let mut mem = MissionMemory::default();
        assert_eq!(lateral_budget(&mem, &cfg), 10);
        mem.lateral_elapsed_s = 10.0 * cfg.lateral_tick_s;
        assert_eq!(lateral_budget(&mem, &cfg), 0);
    }

    #[test]
    fn lateral_exits_early_on_displacement() {
        let cfg = MissionConfig::default();
        let mem = MissionMemory {
            lateral_elapsed_s: 6.0 * cfg.lateral_tick_s,
            ..MissionMemory::default()
        };
        let o = Observations {
            lateral_done: true,
            ..obs()
        };
        let (next, _, _) = mission_step(MissionState::LateralTop, &mem, &o, &cfg);
        assert_eq!(next, MissionState::TurnToDescend);
        let (next, _, _) = mission_step(MissionState::LateralBottom, &mem, &o, &cfg);
        assert_eq!(next, MissionState::TurnToAscend);
    }

    #[test]
    fn descend_reverses_on_twenty_first_cliff() {
        let cfg = MissionConfig::default();
        let mut mem = MissionMemory::default();
        let mut state = MissionState::Descend;
        let o = Observations { cliff: true, ..obs() };
        for i in 1..=21 {
            let (next, m, d) = mission_step(state, &mem, &o, &cfg);
            assert!(!matches!(d.behavior, Behavior::Drive(_)));
            state = next;
            mem = m;
            if i < 21 {
                assert_eq!(state, MissionState::Descend);
            }
        }
        assert_eq!(state, MissionState::ReverseBottom);
        assert_eq!(mem.column_index, 1);
    }

    #[test]
    fn low_battery_goes_home() {
        let cfg = MissionConfig::default();
        let o = Observations {
            battery_low: true,
            ..obs()
        };
        let (next, mem, d) = mission_step(MissionState::BatteryCheck, &MissionMemory::default(), &o, &cfg);
        assert_eq!(next, MissionState::TransitToDock);
        assert!(mem.battery_was_low);
        assert!(!d.cleaning);
        let (next, _, _) = mission_step(MissionState::BatteryCheck, &MissionMemory::default(), &obs(), &cfg);
        assert_eq!(next, MissionState::TurnAtBottom);
    }

    #[test]
    fn resume_replays_dock_distance() {
        let cfg = MissionConfig::default();
        let mem = MissionMemory {
            column_index: 3,
            distance_from_dock: 57,
            battery_was_low: true,
            ..MissionMemory::default()
        };
        let o = Observations {
            charge_complete: true,
            ..obs()
        };
        let (mut state, mut mem, mut d) = mission_step(MissionState::Charging, &mem, &o, &cfg);
        assert_eq!(state, MissionState::ResumeTransit);
        let mut retraced = 0;
        while state == MissionState::ResumeTransit {
            assert_eq!(d.behavior, Behavior::Retrace);
            retraced += 1;
            (state, mem, d) = mission_step(state, &mem, &obs(), &cfg);
        }
        assert_eq!(retraced, 57);
        assert_eq!(mem.distance_from_dock, 0);
        assert_eq!(state, MissionState::TurnToAscend);
        let done = Observations {
            turn_done: true,
            ..obs()
        };
        let (state, mem, _) = mission_step(state, &mem, &done, &cfg);
        assert_eq!(state, MissionState::Ascend);
        assert_eq!(mem.column_index, 3);
    }

    #[test]
    fn transit_counts_steps_until_dock() {
        let cfg = MissionConfig::default();
        let mut mem = MissionMemory {
            battery_was_low: true,
            transit_turns: 1,
            ..MissionMemory::default()
        };
        let mut state = MissionState::TransitToDock;
        let aligned = Observations {
            turn_done: true,
            ..obs()
        };
        (state, mem, _) = mission_step(state, &mem, &aligned, &cfg);
        assert_eq!(mem.transit_turns, 0);
        for _ in 0..40 {
            let d;
            (state, mem, d) = mission_step(state, &mem, &obs(), &cfg);
            assert_eq!(d.behavior, Behavior::Drive(DriveMode::Return));
        }
        assert_eq!(mem.distance_from_dock, 40);
        let at_dock = Observations { at_dock: true, ..obs() };
        (state, mem, _) = mission_step(state, &mem, &at_dock, &cfg);
        assert_eq!(state, MissionState::Docking);
        (state, _, _) = mission_step(state, &mem, &obs(), &cfg);
        assert_eq!(state, MissionState::Charging);
    }

    #[test]
    fn array_end_leads_to_idle_after_charge() {
        let cfg = MissionConfig::default();
        let mut mem = MissionMemory::default();
        let mut state = MissionState::LateralBottom;
        let o = Observations { cliff: true, ..obs() };
        while state == MissionState::LateralBottom {
            (state, mem, _) = mission_step(state, &mem, &o, &cfg);
        }
        assert_eq!(state, MissionState::TransitToDock);
        assert!(mem.array_done);
        assert_eq!(mem.transit_turns, 2);
        let (_, _, d) = mission_step(state, &mem, &obs(), &cfg);
        assert_eq!(
            d.behavior,
            Behavior::Turn {
                axis: AlignAxis::X,
                negate: true
            }
        );
        let done = Observations {
            charge_complete: true,
            ..obs()
        };
        let (state, _, _) = mission_step(MissionState::Charging, &mem, &done, &cfg);
        assert_eq!(state, MissionState::Idle);
    }

    #[test]
    fn vacuum_off_outside_cleaning_states() {
        let cfg = MissionConfig::default();
        let idle = [
            MissionState::TransitToDock,
            MissionState::Docking,
            MissionState::Charging,
            MissionState::ResumeTransit,
            MissionState::Idle,
        ];
        for s in idle {
            let (_, _, d) = mission_step(s, &MissionMemory::default(), &obs(), &cfg);
            assert!(!d.cleaning, "{s}");
        }
    }

    #[test]
    fn state_names_round_trip() {
        for s in MissionState::ALL {
            assert_eq!(s.name().parse::<MissionState>().unwrap(), s);
        }
        assert!("Hover".parse::<MissionState>().is_err());
    }
}
