//! Panel array geometry and per-cell dust bookkeeping.
//!
//! The array is unfolded into a planar strip. `x` runs laterally along the
//! array (dock first, then panels separated by rails) and `y` points up-slope
//! on every panel. Rails and the dock are flat bands along the bottom edge.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const MAX_INCLINE_DEG: f64 = 30.0;
pub const DEFAULT_CELL_SIZE_M: f64 = 0.02;
pub const DEFAULT_EFFICIENCY: f64 = 0.8;

fn default_rail_width() -> f64 {
    0.3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PanelSpec {
    pub length_m: f64,
    pub width_m: f64,
    pub incline_deg: f64,
    /// Heights (panel-local, meters) of lateral seams where two modules meet.
    #[serde(default)]
    pub bumps_y_m: Vec<f64>,
}

impl PanelSpec {
    pub fn new(length_m: f64, width_m: f64, incline_deg: f64) -> Self {
        Self {
            length_m,
            width_m,
            incline_deg,
            bumps_y_m: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.length_m.is_finite() && self.length_m > 0.0) {
            return Err(Error::invalid("panel", format!("length_m {} must be > 0", self.length_m)));
        }
        if !(self.width_m.is_finite() && self.width_m > 0.0) {
            return Err(Error::invalid("panel", format!("width_m {} must be > 0", self.width_m)));
        }
        if !(0.0..=MAX_INCLINE_DEG).contains(&self.incline_deg) {
            return Err(Error::invalid(
                "panel",
                format!("incline_deg {} outside [0, {MAX_INCLINE_DEG}]", self.incline_deg),
            ));
        }
        if let Some(b) = self.bumps_y_m.iter().find(|&&b| !(b > 0.0 && b < self.length_m)) {
            return Err(Error::invalid("panel", format!("bump at {b} m is not inside the panel")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ArrayLayout {
    pub panels: Vec<PanelSpec>,
    pub rail_length_m: f64,
    pub dock_offset_m: f64,
    /// Up-slope extent of the rail and dock bands.
    pub rail_width_m: f64,
}

impl Default for ArrayLayout {
    fn default() -> Self {
        Self {
            panels: vec![PanelSpec::new(1.0, 0.6, 30.0)],
            rail_length_m: 0.0,
            dock_offset_m: 0.2,
            rail_width_m: default_rail_width(),
        }
    }
}

impl ArrayLayout {
    pub fn validate(&self) -> Result<()> {
        if self.panels.is_empty() {
            return Err(Error::invalid("layout", "at least one panel is required"));
        }
        for p in &self.panels {
            p.validate()?;
        }
        if !(self.rail_length_m.is_finite() && self.rail_length_m >= 0.0) {
            return Err(Error::invalid("layout", "rail_length_m must be >= 0"));
        }
        if !(self.dock_offset_m.is_finite() && self.dock_offset_m >= 0.0) {
            return Err(Error::invalid("layout", "dock_offset_m must be >= 0"));
        }
        if !(self.rail_width_m.is_finite() && self.rail_width_m > 0.0) {
            return Err(Error::invalid("layout", "rail_width_m must be > 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RegionKind {
    Dock,
    Panel(usize),
    Rail(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Rect {
    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Self {
        Self {
            x_min,
            x_max,
            y_min,
            y_max,
        }
    }

    /// Closed containment.
    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x_min && x <= self.x_max && y >= self.y_min && y <= self.y_max
    }

    pub fn intersects(&self, other: &Rect) -> bool {
        self.x_min <= other.x_max
            && other.x_min <= self.x_max
            && self.y_min <= other.y_max
            && other.y_min <= self.y_max
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub kind: RegionKind,
    pub bounds: Rect,
    pub incline_deg: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionInfo {
    pub index: usize,
    pub kind: RegionKind,
    pub incline_deg: f64,
}

impl RegionInfo {
    pub fn is_panel(&self) -> bool {
        matches!(self.kind, RegionKind::Panel(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Location {
    Region(RegionInfo),
    OffSurface,
}

impl Location {
    pub fn region(&self) -> Option<RegionInfo> {
        match *self {
            Location::Region(r) => Some(r),
            Location::OffSurface => None,
        }
    }

    pub fn is_off_surface(&self) -> bool {
        matches!(self, Location::OffSurface)
    }
}

/// Zero-width seam the wheels have to climb over.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BumpLine {
    pub start: (f64, f64),
    pub end: (f64, f64),
}

impl BumpLine {
    pub fn distance_to(&self, x: f64, y: f64) -> f64 {
        let (ax, ay) = self.start;
        let (dx, dy) = (self.end.0 - ax, self.end.1 - ay);
        let len2 = dx * dx + dy * dy;
        let t = if len2 > 0.0 {
            (((x - ax) * dx + (y - ay) * dy) / len2).clamp(0.0, 1.0)
        } else {
            0.0
        };
        ((x - ax - t * dx).powi(2) + (y - ay - t * dy).powi(2)).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Workspace {
    pub regions: Vec<Region>,
    pub bump_lines: Vec<BumpLine>,
}

/// Lays out the dock, panels and rails left to right.
///
/// Zero-length rails are not emitted as regions; adjoining panels then share
/// an edge directly. A junction bump sits at the left edge of every panel
/// after the first. Seams listed in `PanelSpec::bumps_y_m` become lateral
/// bump lines across their panel.
pub fn build_workspace(layout: &ArrayLayout) -> Result<Workspace> {
    layout.validate()?;
    let band = layout.rail_width_m;
    let mut regions = Vec::with_capacity(2 * layout.panels.len() + 1);
    let mut bump_lines = Vec::new();
    let mut x = 0.0;

    if layout.dock_offset_m > 0.0 {
        regions.push(Region {
            kind: RegionKind::Dock,
            bounds: Rect::new(0.0, layout.dock_offset_m, 0.0, band),
            incline_deg: 0.0,
        });
        x = layout.dock_offset_m;
    }

    for (i, panel) in layout.panels.iter().enumerate() {
        if i > 0 {
            if layout.rail_length_m > 0.0 {
                regions.push(Region {
                    kind: RegionKind::Rail(i - 1),
                    bounds: Rect::new(x, x + layout.rail_length_m, 0.0, band),
                    incline_deg: 0.0,
                });
                x += layout.rail_length_m;
            }
            bump_lines.push(BumpLine {
                start: (x, 0.0),
                end: (x, panel.length_m),
            });
        }
        let x_max = x + panel.width_m;
        regions.push(Region {
            kind: RegionKind::Panel(i),
            bounds: Rect::new(x, x_max, 0.0, panel.length_m),
            incline_deg: panel.incline_deg,
        });
        for &y in &panel.bumps_y_m {
            bump_lines.push(BumpLine {
                start: (x, y),
                end: (x_max, y),
            });
        }
        x = x_max;
    }

    Ok(Workspace {
        regions,
        bump_lines,
    })
}

impl Workspace {
    /// Region containing the point. Shared edges resolve to the lower index.
    pub fn region_at(&self, x: f64, y: f64) -> Location {
        self.regions
            .iter()
            .enumerate()
            .find(|(_, r)| r.bounds.contains(x, y))
            .map(|(index, r)| {
                Location::Region(RegionInfo {
                    index,
                    kind: r.kind,
                    incline_deg: r.incline_deg,
                })
            })
            .unwrap_or(Location::OffSurface)
    }

    pub fn panel_region(&self, panel: usize) -> Option<&Region> {
        self.regions.iter().find(|r| r.kind == RegionKind::Panel(panel))
    }

    pub fn dock_region(&self) -> Option<&Region> {
        self.regions.iter().find(|r| r.kind == RegionKind::Dock)
    }

    pub fn panel_count(&self) -> usize {
        self.regions
            .iter()
            .filter(|r| matches!(r.kind, RegionKind::Panel(_)))
            .count()
    }
}

/// Anything that can answer "is this point under the cleaning head".
pub trait Footprint {
    fn contains(&self, x: f64, y: f64) -> bool;
    fn bounds(&self) -> Rect;
}

impl Footprint for Rect {
    fn contains(&self, x: f64, y: f64) -> bool {
        Rect::contains(self, x, y)
    }

    fn bounds(&self) -> Rect {
        *self
    }
}

/// Rectangle attached to the robot body: `front`/`rear` along the heading,
/// `half_width` to each side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BodyRect {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub front: f64,
    pub rear: f64,
    pub half_width: f64,
}

impl Footprint for BodyRect {
    fn contains(&self, x: f64, y: f64) -> bool {
        let (s, c) = self.heading.sin_cos();
        let (dx, dy) = (x - self.x, y - self.y);
        let along = dx * c + dy * s;
        let across = -dx * s + dy * c;
        along >= -self.rear && along <= self.front && across.abs() <= self.half_width
    }

    fn bounds(&self) -> Rect {
        let (s, c) = self.heading.sin_cos();
        let corners = [
            (self.front, self.half_width),
            (self.front, -self.half_width),
            (-self.rear, self.half_width),
            (-self.rear, -self.half_width),
        ];
        let mut r = Rect::new(f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for (a, b) in corners {
            let px = self.x + a * c - b * s;
            let py = self.y + a * s + b * c;
            r.x_min = r.x_min.min(px);
            r.x_max = r.x_max.max(px);
            r.y_min = r.y_min.min(py);
            r.y_max = r.y_max.max(py);
        }
        r
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PanelCells {
    pub panel: usize,
    pub bounds: Rect,
    pub nx: usize,
    pub ny: usize,
    /// Row-major, `iy * nx + ix`.
    pub dust: Vec<f64>,
    pub pass_count: Vec<u32>,
}

impl PanelCells {
    fn cell_w(&self) -> f64 {
        (self.bounds.x_max - self.bounds.x_min) / self.nx as f64
    }

    fn cell_h(&self) -> f64 {
        (self.bounds.y_max - self.bounds.y_min) / self.ny as f64
    }

    pub fn center(&self, ix: usize, iy: usize) -> (f64, f64) {
        (
            self.bounds.x_min + (ix as f64 + 0.5) * self.cell_w(),
            self.bounds.y_min + (iy as f64 + 0.5) * self.cell_h(),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CellId {
    pub panel: usize,
    pub index: usize,
}

/// Dust fraction and pass count for every panel cell. Panels are divided into
/// whole cells whose size is as close to `cell_size_m` as the panel allows.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverageGrid {
    pub cell_size_m: f64,
    pub panels: Vec<PanelCells>,
}

impl CoverageGrid {
    /// Fresh grid with every panel cell fully dusty.
    pub fn new(ws: &Workspace, cell_size_m: f64) -> Result<Self> {
        if !(cell_size_m.is_finite() && cell_size_m > 0.0) {
            return Err(Error::invalid("cell_size_m", format!("{cell_size_m} must be > 0")));
        }
        let panels = ws
            .regions
            .iter()
            .filter_map(|r| match r.kind {
                RegionKind::Panel(panel) => {
                    let b = r.bounds;
                    let nx = (((b.x_max - b.x_min) / cell_size_m).round() as usize).max(1);
                    let ny = (((b.y_max - b.y_min) / cell_size_m).round() as usize).max(1);
                    Some(PanelCells {
                        panel,
                        bounds: b,
                        nx,
                        ny,
                        dust: vec![1.0; nx * ny],
                        pass_count: vec![0; nx * ny],
                    })
                }
                _ => None,
            })
            .collect();
        Ok(Self {
            cell_size_m,
            panels,
        })
    }

    pub fn cell_count(&self) -> usize {
        self.panels.iter().map(|p| p.dust.len()).sum()
    }

    pub fn dust(&self, id: CellId) -> f64 {
        self.panels[id.panel].dust[id.index]
    }

    pub fn pass_count(&self, id: CellId) -> u32 {
        self.panels[id.panel].pass_count[id.index]
    }

    /// Cells whose centers lie inside the footprint, in ascending id order.
    pub fn cells_in<F: Footprint>(&self, footprint: &F) -> Vec<CellId> {
        let mut out = Vec::new();
        self.cells_in_into(footprint, &mut out);
        out
    }

    pub fn cells_in_into<F: Footprint>(&self, footprint: &F, out: &mut Vec<CellId>) {
        out.clear();
        let fb = footprint.bounds();
        for (p, cells) in self.panels.iter().enumerate() {
            if !cells.bounds.intersects(&fb) {
                continue;
            }
            let (cw, ch) = (cells.cell_w(), cells.cell_h());
            let ix0 = (((fb.x_min - cells.bounds.x_min) / cw).floor().max(0.0)) as usize;
            let ix1 = ((((fb.x_max - cells.bounds.x_min) / cw).ceil()) as usize).min(cells.nx);
            let iy0 = (((fb.y_min - cells.bounds.y_min) / ch).floor().max(0.0)) as usize;
            let iy1 = ((((fb.y_max - cells.bounds.y_min) / ch).ceil()) as usize).min(cells.ny);
            for iy in iy0..iy1 {
                for ix in ix0..ix1 {
                    let (cx, cy) = cells.center(ix, iy);
                    if footprint.contains(cx, cy) {
                        out.push(CellId {
                            panel: p,
                            index: iy * cells.nx + ix,
                        });
                    }
                }
            }
        }
    }

    /// One cleaning pass over the listed cells.
    pub fn clean_cells(&mut self, cells: &[CellId], efficiency: f64) -> Result<()> {
        check_efficiency(efficiency)?;
        let keep = 1.0 - efficiency;
        for id in cells {
            let panel = &mut self.panels[id.panel];
            panel.dust[id.index] *= keep;
            panel.pass_count[id.index] += 1;
        }
        Ok(())
    }

    pub fn coverage_fraction(&self, clean_threshold: f64) -> Result<f64> {
        coverage_fraction(self, clean_threshold)
    }
}

fn check_efficiency(efficiency: f64) -> Result<()> {
    if efficiency > 0.0 && efficiency <= 1.0 {
        Ok(())
    } else {
        Err(Error::invalid("efficiency", format!("{efficiency} outside (0, 1]")))
    }
}

/// Returns a copy of `grid` with one cleaning pass applied under `footprint`.
pub fn apply_cleaning<F: Footprint>(
    grid: &CoverageGrid,
    footprint: &F,
    efficiency: f64,
) -> Result<CoverageGrid> {
    let mut out = grid.clone();
    let cells = grid.cells_in(footprint);
    out.clean_cells(&cells, efficiency)?;
    Ok(out)
}

pub fn coverage_fraction(grid: &CoverageGrid, clean_threshold: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&clean_threshold) {
        return Err(Error::invalid(
            "clean_threshold",
            format!("{clean_threshold} outside [0, 1)"),
        ));
    }
    let total = grid.cell_count();
    if total == 0 {
        return Err(Error::EmptyGrid);
    }
    let clean = grid
        .panels
        .iter()
        .flat_map(|p| p.dust.iter())
        .filter(|&&d| d <= clean_threshold)
        .count();
    Ok(clean as f64 / total as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn three_panels() -> ArrayLayout {
        ArrayLayout {
            panels: vec![PanelSpec::new(1.0, 0.6, 20.0); 3],
            rail_length_m: 0.3,
            dock_offset_m: 0.2,
            rail_width_m: 0.3,
        }
    }

    #[test]
    fn single_panel_has_dock_and_panel() {
        let layout = ArrayLayout {
            panels: vec![PanelSpec::new(1.0, 0.6, 30.0)],
            rail_length_m: 0.0,
            dock_offset_m: 0.2,
            rail_width_m: 0.3,
        };
        let ws = build_workspace(&layout).unwrap();
        let kinds: Vec<_> = ws.regions.iter().map(|r| r.kind).collect();
        assert_eq!(kinds, vec![RegionKind::Dock, RegionKind::Panel(0)]);
        assert!(ws.bump_lines.is_empty());
    }

    #[test]
    fn three_panels_enumerate_by_construction() {
        let layout = three_panels();
        let ws = build_workspace(&layout).unwrap();
        // Expected order built independently from the layout description.
        let mut expected = vec![(RegionKind::Dock, 0.0, 0.2)];
        let mut x = 0.2;
        for i in 0..3 {
            if i > 0 {
                expected.push((RegionKind::Rail(i - 1), x, x + 0.3));
                x += 0.3;
            }
            expected.push((RegionKind::Panel(i), x, x + 0.6));
            x += 0.6;
        }
        assert_eq!(ws.regions.len(), 6);
        for (r, (k, x0, x1)) in ws.regions.iter().zip(&expected) {
            assert_eq!(r.kind, *k);
            assert!((r.bounds.x_min - x0).abs() < 1e-12);
            assert!((r.bounds.x_max - x1).abs() < 1e-12);
        }
        assert_eq!(ws.bump_lines.len(), 2);
        assert!(ws.regions.iter().all(|r| match r.kind {
            RegionKind::Panel(_) => r.incline_deg == 20.0,
            _ => r.incline_deg == 0.0,
        }));
    }

    #[test]
    fn rejects_bad_layouts() {
        let mut layout = ArrayLayout::default();
        layout.panels[0].incline_deg = 31.0;
        assert!(build_workspace(&layout).is_err());
        layout.panels.clear();
        assert!(build_workspace(&layout).is_err());
        let mut layout = ArrayLayout::default();
        layout.panels[0].width_m = 0.0;
        assert!(build_workspace(&layout).is_err());
        let mut layout = ArrayLayout::default();
        layout.panels[0].length_m = -1.0;
        assert!(build_workspace(&layout).is_err());
    }

    #[test]
    fn region_lookup_and_tie_break() {
        let ws = build_workspace(&ArrayLayout::default()).unwrap();
        assert_eq!(ws.region_at(0.5, 0.5).region().unwrap().kind, RegionKind::Panel(0));
        assert!(ws.region_at(0.5, 2.0).is_off_surface());
        // x = 0.2 is the dock/panel edge; the dock has the lower index.
        assert_eq!(ws.region_at(0.2, 0.1).region().unwrap().kind, RegionKind::Dock);
        // Above the dock band but left of the panel: nothing there.
        assert!(ws.region_at(0.1, 0.5).is_off_surface());
    }

    #[test]
    fn full_efficiency_clears_column() {
        let ws = build_workspace(&ArrayLayout::default()).unwrap();
        let grid = CoverageGrid::new(&ws, 0.02).unwrap();
        let column = Rect::new(0.2, 0.22, 0.0, 1.0);
        let after = apply_cleaning(&grid, &column, 1.0).unwrap();
        let cells = grid.cells_in(&column);
        assert_eq!(cells.len(), 50);
        assert!(cells.iter().all(|&c| after.dust(c) == 0.0 && after.pass_count(c) == 1));
    }

    #[test]
    fn two_passes_leave_residual() {
        let ws = build_workspace(&ArrayLayout::default()).unwrap();
        let grid = CoverageGrid::new(&ws, 0.02).unwrap();
        let fp = Rect::new(0.2, 0.4, 0.0, 0.2);
        let once = apply_cleaning(&grid, &fp, 0.8).unwrap();
        let twice = apply_cleaning(&once, &fp, 0.8).unwrap();
        for c in grid.cells_in(&fp) {
            assert!((twice.dust(c) - 0.04).abs() < 1e-12);
            assert_eq!(twice.pass_count(c), 2);
        }
    }

    #[test]
    fn cleaning_over_rail_is_noop() {
        let ws = build_workspace(&three_panels()).unwrap();
        let grid = CoverageGrid::new(&ws, 0.02).unwrap();
        let rail = ws.regions[2].bounds;
        assert_eq!(ws.regions[2].kind, RegionKind::Rail(0));
        let inner = Rect::new(rail.x_min + 0.01, rail.x_max - 0.01, 0.0, 0.3);
        assert_eq!(apply_cleaning(&grid, &inner, 0.8).unwrap(), grid);
    }

    #[test]
    fn coverage_fraction_counts() {
        let ws = build_workspace(&ArrayLayout::default()).unwrap();
        let mut grid = CoverageGrid::new(&ws, 0.02).unwrap();
        assert_eq!(grid.coverage_fraction(0.1).unwrap(), 0.0);
        let n = grid.panels[0].dust.len();
        for (i, d) in grid.panels[0].dust.iter_mut().enumerate() {
            *d = if i < n / 2 { 0.05 } else { 0.5 };
        }
        assert_eq!(grid.coverage_fraction(0.1).unwrap(), 0.5);
        grid.panels[0].dust.iter_mut().for_each(|d| *d = 0.0);
        assert_eq!(grid.coverage_fraction(0.1).unwrap(), 1.0);
        assert!(grid.coverage_fraction(1.0).is_err());
        let empty = CoverageGrid {
            cell_size_m: 0.02,
            panels: vec![],
        };
        assert!(matches!(empty.coverage_fraction(0.1), Err(Error::EmptyGrid)));
    }

    #[test]
    fn body_rect_matches_axis_aligned_when_heading_zero() {
        let b = BodyRect {
            x: 1.0,
            y: 1.0,
            heading: 0.0,
            front: 0.1,
            rear: 0.2,
            half_width: 0.05,
        };
        assert!(b.contains(1.09, 1.04));
        assert!(!b.contains(1.11, 1.0));
        assert!(b.contains(0.81, 0.96));
        let r = b.bounds();
        assert!((r.x_min - 0.8).abs() < 1e-12 && (r.y_max - 1.05).abs() < 1e-12);
    }
}
