//! Fixed-step simulation loop.
//!
//! Every tick runs the same sequence: sense the pre-step state, reduce the
//! readings, step the mission, run the behavior's controller, integrate the
//! base, clean the cells the head just reached and book the energy.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::control::{
    heading_command, stop_command, turn_command, PidState, TurnProgress,
};
use crate::dynamics::{self, MotorCommand, RobotState, Wheel};
use crate::mission::{
    mission_step, Behavior, BehaviorDirective, MissionMemory, MissionState, Observations,
};
use crate::power::{charge_step, discharge_step, BatteryModel, ChargePhase};
use crate::scenario::Scenario;
use crate::sensors::{detect_cliff, simulate_echo, ultra_distance, AccelPair, PresetValues};
use crate::trace::{Event, RunSummary, TraceRow};
use crate::world::{build_workspace, BodyRect, CellId, CoverageGrid, Location, RegionKind, Workspace};
use crate::Result;

/// Random stream ids derived from the scenario seed, one per noisy sensor.
const ACCEL_STREAM: u64 = 1;

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub trace: Vec<TraceRow>,
    pub events: Vec<Event>,
    pub summary: RunSummary,
    pub grid: CoverageGrid,
}

#[derive(Debug, Default, Clone, Copy)]
struct SpeedStat {
    sum: f64,
    n: u64,
}

impl SpeedStat {
    fn push(&mut self, v: f64) {
        self.sum += v;
        self.n += 1;
    }

    fn mean(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            self.sum / self.n as f64
        }
    }
}

/// A running simulation. `run` drives one to completion; callers that want to
/// inspect intermediate state can call `tick` themselves.
pub struct Engine {
    sc: Scenario,
    ws: Workspace,
    presets: PresetValues,
    accel: AccelPair<ChaCha8Rng>,
    grid: CoverageGrid,
    robot: RobotState,
    battery: BatteryModel,
    state: MissionState,
    mem: MissionMemory,
    tick: u64,
    max_ticks: u64,

    behavior: Option<Behavior>,
    pid: PidState,
    progress: TurnProgress,
    turn_done: bool,
    charge_phase: ChargePhase,
    /// Lateral start point and the distance still to cover from it.
    lateral_origin: Option<(f64, f64, f64)>,
    was_on_panel: bool,
    bump_wheel: Option<Wheel>,
    head_cells: Vec<CellId>,
    scratch: Vec<CellId>,
    forced_low_used: bool,

    trace: Vec<TraceRow>,
    events: Vec<Event>,
    dock_events: u32,
    resume_column: Option<u32>,
    interrupt_column: Option<u32>,
    ascend_speed: SpeedStat,
    descend_speed: SpeedStat,
}

impl Engine {
    pub fn new(scenario: &Scenario) -> Result<Self> {
        scenario.validate()?;
        let sc = scenario.clone();
        let ws = build_workspace(&sc.layout)?;
        let grid = CoverageGrid::new(&ws, sc.cleaning.cell_size_m)?;
        let mut rng = ChaCha8Rng::seed_from_u64(sc.seed);
        rng.set_stream(ACCEL_STREAM);
        let start = sc.start_pose();
        let max_ticks = (sc.max_sim_s / sc.dt_s + 1e-9).floor() as u64;
        Ok(Self {
            presets: sc.presets(),
            accel: AccelPair::new(sc.accel_cfg, rng),
            robot: RobotState::at(start.x_m, start.y_m, start.heading_rad),
            battery: sc.battery,
            state: MissionState::Ascend,
            mem: MissionMemory::default(),
            tick: 0,
            max_ticks,
            behavior: None,
            pid: PidState::default(),
            progress: TurnProgress::new(sc.turn_flip_target),
            turn_done: false,
            charge_phase: ChargePhase::Cc,
            lateral_origin: None,
            was_on_panel: true,
            bump_wheel: None,
            head_cells: Vec::new(),
            scratch: Vec::new(),
            forced_low_used: false,
            trace: Vec::new(),
            events: Vec::new(),
            dock_events: 0,
            resume_column: None,
            interrupt_column: None,
            ascend_speed: SpeedStat::default(),
            descend_speed: SpeedStat::default(),
            ws,
            grid,
            sc,
        })
    }

    pub fn state(&self) -> MissionState {
        self.state
    }

    pub fn memory(&self) -> &MissionMemory {
        &self.mem
    }

    pub fn robot(&self) -> &RobotState {
        &self.robot
    }

    pub fn battery(&self) -> &BatteryModel {
        &self.battery
    }

    pub fn grid(&self) -> &CoverageGrid {
        &self.grid
    }

    pub fn trace(&self) -> &[TraceRow] {
        &self.trace
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    /// True once the mission is idle or simulated time has run out.
    pub fn finished(&self) -> bool {
        self.state == MissionState::Idle || self.tick > self.max_ticks
    }

    fn location(&self, x: f64, y: f64) -> Location {
        self.ws.region_at(x, y)
    }

    fn incline_at(&self, x: f64, y: f64) -> f64 {
        match self.location(x, y) {
            Location::Region(r) => r.incline_deg,
            Location::OffSurface => 0.0,
        }
    }

    fn region_kind(&self, x: f64, y: f64) -> Option<RegionKind> {
        match self.location(x, y) {
            Location::Region(r) => Some(r.kind),
            Location::OffSurface => None,
        }
    }

    fn at_dock(&self) -> bool {
        let p = self.robot.pose;
        match self.ws.dock_region() {
            Some(dock) => {
                dock.bounds.contains(p.x_m, p.y_m)
                    && dock.bounds.x_max - p.x_m >= self.sc.mission_cfg.dock_tolerance_m
            }
            // Without a dock band the array's start edge is the dock.
            None => p.x_m <= self.sc.mission_cfg.dock_tolerance_m,
        }
    }

    fn battery_low(&self) -> bool {
        if self.battery.terminal_v() < self.sc.mission_cfg.low_battery_v {
            return true;
        }
        match self.sc.mission_cfg.force_low_battery_after_columns {
            Some(n) => !self.forced_low_used && self.mem.column_index >= n,
            None => false,
        }
    }

    /// Wheel on a seam, if any. When both are, the one that got there first
    /// keeps the contact.
    fn bump_contact(&mut self) -> Option<Wheel> {
        let p = self.robot.pose;
        let k = &self.sc.kinematics;
        let (s, c) = p.heading_rad.sin_cos();
        let half = k.track_width_m / 2.0;
        let left = (p.x_m - s * half, p.y_m + c * half);
        let right = (p.x_m + s * half, p.y_m - c * half);
        let touching = |w: (f64, f64)| {
            self.ws
                .bump_lines
                .iter()
                .any(|b| b.distance_to(w.0, w.1) <= k.bump_half_width_m)
        };
        let (l, r) = (touching(left), touching(right));
        let wheel = match (l, r) {
            (false, false) => None,
            (true, false) => Some(Wheel::Left),
            (false, true) => Some(Wheel::Right),
            (true, true) => self.bump_wheel.or_else(|| {
                let ahead = |w: (f64, f64)| w.0 * c + w.1 * s;
                Some(if ahead(right) > ahead(left) {
                    Wheel::Right
                } else {
                    Wheel::Left
                })
            }),
        };
        self.bump_wheel = wheel;
        wheel
    }

    fn command(&mut self, directive: BehaviorDirective, frame: &crate::sensors::AccelFrame) -> MotorCommand {
        if self.behavior != Some(directive.behavior) {
            self.pid = PidState::default();
            self.progress = TurnProgress::new(self.sc.turn_flip_target);
            self.turn_done = false;
            if directive.behavior == Behavior::Charge {
                self.charge_phase = ChargePhase::Cc;
            }
            self.behavior = Some(directive.behavior);
        }
        let sc = &self.sc;
        match directive.behavior {
            Behavior::Drive(mode) => {
                let (cmd, pid) = heading_command(mode, frame, &self.presets, &sc.refs, self.pid, &sc.gains);
                self.pid = pid;
                cmd
            }
            Behavior::Turn { axis, negate } => {
                let out = turn_command(
                    frame,
                    &self.presets,
                    axis,
                    negate,
                    &sc.refs,
                    self.pid,
                    &sc.gains,
                    self.progress,
                );
                self.pid = out.pid;
                self.progress = out.progress;
                self.turn_done = out.done;
                out.cmd
            }
            Behavior::Reverse => {
                let d = sc.mission_cfg.reverse_duty;
                MotorCommand::new(-d, -d)
            }
            Behavior::Retrace => {
                let d = sc.refs.ref_lateral;
                MotorCommand::new(-d, -d)
            }
            Behavior::Stop | Behavior::Charge => stop_command(),
        }
    }

    fn clean(&mut self, on: bool) -> Result<()> {
        if !on {
            self.head_cells.clear();
            return Ok(());
        }
        let p = self.robot.pose;
        let head = BodyRect {
            x: p.x_m,
            y: p.y_m,
            heading: p.heading_rad,
            front: self.sc.cleaning.head_front_m,
            rear: self.sc.cleaning.head_rear_m,
            half_width: self.sc.head_width_m() / 2.0,
        };
        self.grid.cells_in_into(&head, &mut self.scratch);
        // Only cells that just came under the head get a pass; both lists are
        // sorted.
        let mut entered = Vec::new();
        let mut prev = self.head_cells.iter().peekable();
        for &id in &self.scratch {
            while prev.next_if(|&&q| q < id).is_some() {}
            if prev.peek() != Some(&&id) {
                entered.push(id);
            }
        }
        for _ in 0..self.sc.cleaning.stages {
            self.grid.clean_cells(&entered, self.sc.cleaning.efficiency)?;
        }
        std::mem::swap(&mut self.head_cells, &mut self.scratch);
        Ok(())
    }

    /// Advances one tick and returns the row it recorded, or `None` once the
    /// run is over.
    pub fn tick(&mut self) -> Result<Option<TraceRow>> {
        if self.finished() {
            return Ok(None);
        }
        let dt = self.sc.dt_s;
        let t_s = self.tick as f64 * dt;
        let pose = self.robot.pose;

        // Sense and reduce.
        let incline = self.incline_at(pose.x_m, pose.y_m);
        let frame = self.accel.read(incline, pose.heading_rad);
        let (lx, ly) = self.sc.ultrasonic.look_point(pose.x_m, pose.y_m, pose.heading_rad);
        let ultra_in = ultra_distance(simulate_echo(lx, ly, &self.ws, &self.sc.ultrasonic))?;
        let cliff = detect_cliff(ultra_in, self.sc.ultrasonic.cliff_threshold_in);
        let kind = self.region_kind(pose.x_m, pose.y_m);
        let on_panel = matches!(kind, Some(RegionKind::Panel(_)));
        if self.state.is_lateral() && on_panel && !self.was_on_panel && self.lateral_origin.is_some() {
            // Crossed a rail onto the next panel: the column sits half a
            // nozzle in from its edge.
            self.lateral_origin = Some((pose.x_m, pose.y_m, self.sc.mission_cfg.nozzle_width_m / 2.0));
        }
        let lateral_done = match self.lateral_origin {
            Some((x0, y0, need)) if self.state.is_lateral() => {
                on_panel && (pose.x_m - x0).hypot(pose.y_m - y0) >= need
            }
            _ => false,
        };
        let obs = Observations {
            cliff,
            turn_done: self.turn_done,
            battery_low: self.battery_low(),
            charge_complete: self.charge_phase.is_done(),
            lateral_done,
            on_rail: !on_panel,
            at_dock: self.at_dock(),
            dt,
        };

        // Mission.
        let (next, mem, directive) = mission_step(self.state, &self.mem, &obs, &self.sc.mission_cfg);
        if next != self.state {
            self.on_transition(t_s, next, &mem, obs.battery_low);
        }
        self.state = next;
        self.mem = mem;
        if next.is_lateral() {
            let nozzle = self.sc.mission_cfg.nozzle_width_m;
            self.lateral_origin.get_or_insert((pose.x_m, pose.y_m, nozzle));
        } else {
            self.lateral_origin = None;
        }

        // Control and dynamics. Level ground gives the heading loop nothing
        // to regulate against, so it starts over at every panel boundary.
        if on_panel != self.was_on_panel {
            self.pid = PidState::default();
            self.was_on_panel = on_panel;
        }
        let cmd = self.command(directive, &frame);
        let bump = self.bump_contact();
        let before = self.robot;
        self.robot = dynamics::step(&before, cmd, incline, bump, dt, &self.sc.kinematics)?;
        if matches!(directive.behavior, Behavior::Drive(_)) {
            let moved = (self.robot.pose.x_m - before.pose.x_m).hypot(self.robot.pose.y_m - before.pose.y_m);
            match next {
                MissionState::Ascend => self.ascend_speed.push(moved / dt),
                MissionState::Descend => self.descend_speed.push(moved / dt),
                _ => {}
            }
        }

        // Cleaning and power.
        let vacuum_on = directive.cleaning && on_panel;
        self.clean(vacuum_on)?;
        let battery_v = self.battery.terminal_v();
        if directive.behavior == Behavior::Charge {
            let step = charge_step(&self.battery, &self.sc.charger, self.charge_phase, dt)?;
            self.battery = step.battery;
            self.charge_phase = step.phase;
        } else {
            let load = self.sc.loads.total_w(cmd, vacuum_on);
            self.battery = discharge_step(&self.battery, load, dt)?;
        }

        let row = TraceRow {
            t_s,
            state: next,
            ultra_in,
            duty_left: cmd.duty_left,
            duty_right: cmd.duty_right,
            accel_x: frame.x1,
            accel_y: frame.y1,
            battery_v,
            x_m: pose.x_m,
            y_m: pose.y_m,
            heading_rad: pose.heading_rad,
            vacuum_on,
        };
        self.trace.push(row);
        self.tick += 1;
        Ok(Some(row))
    }

    fn on_transition(&mut self, t_s: f64, next: MissionState, mem: &MissionMemory, battery_low: bool) {
        let from = self.state;
        if from == MissionState::BatteryCheck && next == MissionState::TransitToDock && battery_low {
            self.interrupt_column = Some(mem.column_index);
            self.forced_low_used = true;
        }
        if next == MissionState::Docking {
            self.dock_events += 1;
        }
        if from == MissionState::ResumeTransit {
            self.resume_column = Some(mem.column_index);
        }
        self.events.push(Event {
            t_s,
            from,
            to: next,
            column_index: mem.column_index,
            distance_from_dock: mem.distance_from_dock,
        });
    }

    fn summary(&self, wall_s: f64) -> Result<RunSummary> {
        // Time stamp of the last trace row.
        let sim_time_s = self.tick.saturating_sub(1) as f64 * self.sc.dt_s;
        Ok(RunSummary {
            coverage_fraction: self.grid.coverage_fraction(self.sc.cleaning.clean_threshold)?,
            columns_completed: self.mem.column_index,
            dock_events: self.dock_events,
            resume_column: self.resume_column,
            interrupt_column: self.interrupt_column,
            final_distance_from_dock: self.mem.distance_from_dock,
            mean_ascend_speed_mps: self.ascend_speed.mean(),
            mean_descend_speed_mps: self.descend_speed.mean(),
            sim_time_s,
            final_state: self.state,
            sim_wall_ratio: if wall_s > 0.0 { sim_time_s / wall_s } else { f64::INFINITY },
        })
    }

    pub fn finish(self, wall_s: f64) -> Result<RunOutput> {
        let summary = self.summary(wall_s)?;
        Ok(RunOutput {
            trace: self.trace,
            events: self.events,
            summary,
            grid: self.grid,
        })
    }
}

/// Runs a scenario until the mission idles or `max_sim_s` elapses.
pub fn run(scenario: &Scenario) -> Result<RunOutput> {
    let started = Instant::now();
    let mut engine = Engine::new(scenario)?;
    while engine.tick()?.is_some() {}
    engine.finish(started.elapsed().as_secs_f64())
}
