//! Trace analysis shared by the integration and acceptance tests.
#![allow(dead_code)]

use panelbot::mission::MissionState;
use panelbot::trace::TraceRow;

/// Maximal run of rows sharing one mission state.
#[derive(Debug, Clone, Copy)]
pub struct Segment {
    pub state: MissionState,
    pub start: usize,
    /// Exclusive.
    pub end: usize,
}

impl Segment {
    pub fn rows<'a>(&self, trace: &'a [TraceRow]) -> &'a [TraceRow] {
        &trace[self.start..self.end]
    }
}

pub fn segments(trace: &[TraceRow]) -> Vec<Segment> {
    let mut out: Vec<Segment> = Vec::new();
    for (i, r) in trace.iter().enumerate() {
        match out.last_mut() {
            Some(s) if s.state == r.state => s.end = i + 1,
            _ => out.push(Segment {
                state: r.state,
                start: i,
                end: i + 1,
            }),
        }
    }
    out
}

/// Straight-line distance between the first pose of a segment and the first
/// pose after it.
pub fn displacement(trace: &[TraceRow], seg: &Segment) -> f64 {
    let a = &trace[seg.start];
    let b = trace.get(seg.end).unwrap_or(&trace[seg.end - 1]);
    (b.x_m - a.x_m).hypot(b.y_m - a.y_m)
}

/// Mean ground speed over the rows that commanded motion.
pub fn mean_moving_speed(trace: &[TraceRow], seg: &Segment, dt: f64) -> Option<f64> {
    let mut dist = 0.0;
    let mut n = 0u32;
    for i in seg.start..seg.end {
        let (r, next) = (&trace[i], trace.get(i + 1)?);
        if r.duty_left == 0 && r.duty_right == 0 {
            continue;
        }
        dist += (next.x_m - r.x_m).hypot(next.y_m - r.y_m);
        n += 1;
    }
    (n > 0).then(|| dist / (f64::from(n) * dt))
}

pub fn counter_rotates(rows: &[TraceRow]) -> bool {
    rows.iter()
        .any(|r| i64::from(r.duty_left) * i64::from(r.duty_right) < 0)
}

pub fn mean_abs_duty(rows: &[TraceRow]) -> f64 {
    let sum: f64 = rows
        .iter()
        .map(|r| f64::from(r.duty_left.abs() + r.duty_right.abs()) / 2.0)
        .sum();
    sum / rows.len() as f64
}

pub fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// One column as seen in the trace: the drive, the edge handling and the
/// lateral step that leads into the next column.
#[derive(Debug, Clone)]
pub struct ColumnCheck {
    pub drive: MissionState,
    pub edge_spike: bool,
    pub first_turn_counter_rotates: bool,
    pub lateral_m: f64,
    /// The lateral step was cut short by the array's side edge.
    pub lateral_hit_edge: bool,
    pub second_turn_counter_rotates: bool,
    pub next_drive: Option<MissionState>,
}

/// Walks the segment list and collects every drive that is followed by the
/// full reverse, turn, lateral, turn sequence.
pub fn column_checks(trace: &[TraceRow]) -> Vec<ColumnCheck> {
    use MissionState::*;
    let segs = segments(trace);
    let mut out = Vec::new();
    for (i, s) in segs.iter().enumerate() {
        let (turn1, lateral, turn2, next) = match s.state {
            Ascend => (TurnAtTop, LateralTop, TurnToDescend, Descend),
            Descend => (TurnAtBottom, LateralBottom, TurnToAscend, Ascend),
            _ => continue,
        };
        let find = |state: MissionState, from: usize| {
            segs[from..]
                .iter()
                .take(4)
                .position(|x| x.state == state)
                .map(|p| p + from)
        };
        let Some(t1) = find(turn1, i + 1) else { continue };
        let Some(l) = find(lateral, t1 + 1) else { continue };
        let Some(t2) = find(turn2, l + 1) else { continue };
        let rows = s.rows(trace);
        let tail = &rows[rows.len().saturating_sub(50)..];
        out.push(ColumnCheck {
            drive: s.state,
            edge_spike: tail.iter().any(|r| r.ultra_in > 4.0),
            first_turn_counter_rotates: counter_rotates(segs[t1].rows(trace)),
            lateral_m: displacement(trace, &segs[l]),
            // Rows carry the state chosen on that tick, so the reading that
            // ended the step is the first row of the following turn.
            lateral_hit_edge: trace[segs[l].start..=segs[l].end.min(trace.len() - 1)]
                .iter()
                .any(|r| r.ultra_in > 4.0),
            second_turn_counter_rotates: counter_rotates(segs[t2].rows(trace)),
            next_drive: segs.get(t2 + 1).map(|x| x.state).filter(|&x| x == next),
        });
    }
    out
}

/// Looks for the longest window of at least `min_len` rows inside `rows_range`
/// where one duty falls monotonically while the other rises, each by at least
/// `min_change`.
pub fn opposing_window(
    trace: &[TraceRow],
    range: std::ops::Range<usize>,
    min_len: usize,
    min_change: i32,
) -> Option<(usize, usize)> {
    let mut best: Option<(usize, usize)> = None;
    for sign in [1, -1] {
        let mut start = range.start;
        for i in range.start + 1..=range.end {
            let ok = i < range.end && {
                let (a, b) = (&trace[i - 1], &trace[i]);
                sign * (b.duty_left - a.duty_left) < 0 && sign * (b.duty_right - a.duty_right) > 0
            };
            if !ok {
                let end = i - 1;
                let (a, b) = (&trace[start], &trace[end]);
                let long = end - start + 1 >= min_len;
                let big = (b.duty_left - a.duty_left).abs() >= min_change
                    && (b.duty_right - a.duty_right).abs() >= min_change;
                if long && big && best.is_none_or(|(s, e)| end - start > e - s) {
                    best = Some((start, end));
                }
                start = i;
            }
        }
    }
    best
}

/// Seconds after `from` until the median `|duty_left - duty_right|` over the
/// next `window` rows is below `limit`, searching at most `horizon_s`.
pub fn settle_time(
    trace: &[TraceRow],
    from: usize,
    window: usize,
    limit: f64,
    horizon_s: f64,
) -> Option<f64> {
    let t0 = trace[from].t_s;
    for i in from..trace.len() {
        if trace[i].t_s - t0 > horizon_s || i + window > trace.len() {
            break;
        }
        let m = median(
            trace[i..i + window]
                .iter()
                .map(|r| f64::from((r.duty_left - r.duty_right).abs()))
                .collect(),
        );
        if m < limit {
            return Some(trace[i].t_s - t0);
        }
    }
    None
}
