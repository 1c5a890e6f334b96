//! Physical polygon DRV reports to grid DRVs.
//!
//! A sign-off report marks each violation with a polygon in physical units. The
//! grid DRV is the set of layout components whose physical footprint overlaps the
//! polygon with positive area.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::model::{Drv, DrvKind, GridKey, Layer, Layout};
use crate::rules::{RuleKind, TechFile};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReportEntry {
    pub rule_id: String,
    pub layer: Layer,
    pub polygon: Vec<Point>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PhysicalDrvReport {
    /// Set by an optional `cell <name>` line.
    pub cell_name: Option<String>,
    pub entries: Vec<ReportEntry>,
}

/// Maps grid indices to physical coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridTransform {
    pub x_origin: f64,
    pub y_origin: f64,
    pub x_pitch: f64,
    pub y_pitch: f64,
    /// Half-extent of a unit component's square footprint.
    pub footprint_halfwidth: f64,
}

impl Default for GridTransform {
    fn default() -> Self {
        GridTransform { x_origin: 0.0, y_origin: 0.0, x_pitch: 24.0, y_pitch: 24.0, footprint_halfwidth: 9.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rect {
    pub fn area(&self) -> f64 {
        (self.x1 - self.x0).max(0.0) * (self.y1 - self.y0).max(0.0)
    }

    pub fn overlap(&self, o: &Rect) -> f64 {
        let w = self.x1.min(o.x1) - self.x0.max(o.x0);
        let h = self.y1.min(o.y1) - self.y0.max(o.y0);
        if w <= 0.0 || h <= 0.0 {
            0.0
        } else {
            w * h
        }
    }
}

impl GridTransform {
    pub fn validate(&self) -> Result<(), ConvertError> {
        let ok = self.x_pitch > 0.0
            && self.y_pitch > 0.0
            && self.footprint_halfwidth > 0.0
            && self.footprint_halfwidth <= self.x_pitch / 2.0
            && self.footprint_halfwidth <= self.y_pitch / 2.0;
        if ok {
            Ok(())
        } else {
            Err(ConvertError::InvalidTransform(*self))
        }
    }

    pub fn center(&self, x: f64, y: f64) -> Point {
        Point::new(self.x_origin + x * self.x_pitch, self.y_origin + y * self.y_pitch)
    }

    pub fn footprint(&self, k: GridKey) -> Rect {
        let c = self.center(k.x as f64, k.y as f64);
        let h = self.footprint_halfwidth;
        Rect { x0: c.x - h, y0: c.y - h, x1: c.x + h, y1: c.y + h }
    }

    fn min_area(&self) -> f64 {
        1e-9 * self.x_pitch * self.y_pitch
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ReportParseError {
    MalformedBlock { line: usize, text: String },
    OddCoordinateCount { line: usize, count: usize },
    TooFewVertices { line: usize, count: usize },
    BadNumber { line: usize, token: String },
    UnknownLayer { line: usize, layer: String },
}

impl fmt::Display for ReportParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ReportParseError::MalformedBlock { line, text } => write!(f, "line {line}: malformed block `{text}`"),
            ReportParseError::OddCoordinateCount { line, count } => {
                write!(f, "line {line}: odd coordinate count {count}")
            }
            ReportParseError::TooFewVertices { line, count } => {
                write!(f, "line {line}: polygon needs at least 3 vertices, found {count}")
            }
            ReportParseError::BadNumber { line, token } => write!(f, "line {line}: bad coordinate `{token}`"),
            ReportParseError::UnknownLayer { line, layer } => write!(f, "line {line}: unknown layer `{layer}`"),
        }
    }
}

/// Parses the line-oriented report format:
///
/// ```text
/// # comment
/// cell INV_X1
/// M0.S.1 M0 (48,0) (72,0) (72,48) (48,48)
/// ```
pub fn parse_physical_report(text: &str) -> Result<PhysicalDrvReport, ReportParseError> {
    let mut report = PhysicalDrvReport::default();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let mut head = body.splitn(3, char::is_whitespace);
        let first = head.next().unwrap_or("");
        let second = head.next().map(str::trim).unwrap_or("");
        let rest = head.next().unwrap_or("").trim();
        if first == "cell" && rest.is_empty() && !second.is_empty() {
            report.cell_name = Some(second.into());
            continue;
        }
        if second.is_empty() || rest.is_empty() || second.contains('(') {
            return Err(ReportParseError::MalformedBlock { line, text: body.into() });
        }
        let layer: Layer = second
            .parse()
            .map_err(|_| ReportParseError::UnknownLayer { line, layer: second.into() })?;

        let mut depth = 0i32;
        for ch in rest.chars() {
            match ch {
                '(' => depth += 1,
                ')' => depth -= 1,
                _ => {}
            }
            if !(0..=1).contains(&depth) {
                return Err(ReportParseError::MalformedBlock { line, text: body.into() });
            }
        }
        if depth != 0 {
            return Err(ReportParseError::MalformedBlock { line, text: body.into() });
        }
        let numbers = rest
            .split(|c: char| c == '(' || c == ')' || c == ',' || c.is_whitespace())
            .filter(|t| !t.is_empty())
            .map(|t| t.parse::<f64>().map_err(|_| ReportParseError::BadNumber { line, token: t.into() }))
            .collect::<Result<Vec<f64>, _>>()?;
        if numbers.len() % 2 != 0 {
            return Err(ReportParseError::OddCoordinateCount { line, count: numbers.len() });
        }
        if numbers.len() < 6 {
            return Err(ReportParseError::TooFewVertices { line, count: numbers.len() / 2 });
        }
        let polygon = numbers.chunks(2).map(|c| Point::new(c[0], c[1])).collect();
        report.entries.push(ReportEntry { rule_id: first.into(), layer, polygon });
    }
    Ok(report)
}

/// Writes a report in the format read by [`parse_physical_report`].
pub fn format_physical_report(report: &PhysicalDrvReport) -> String {
    let mut out = String::new();
    if let Some(cell) = &report.cell_name {
        let _ = writeln!(out, "cell {cell}");
    }
    for e in &report.entries {
        let _ = write!(out, "{} {}", e.rule_id, e.layer);
        for p in &e.polygon {
            let _ = write!(out, " ({},{})", p.x, p.y);
        }
        out.push('\n');
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub enum ConvertError {
    CellMismatch { report: String, layout: String },
    InvalidTransform(GridTransform),
}

impl fmt::Display for ConvertError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConvertError::CellMismatch { report, layout } => {
                write!(f, "report is for cell `{report}` but layout is `{layout}`")
            }
            ConvertError::InvalidTransform(t) => write!(
                f,
                "invalid grid transform (pitches {}x{}, halfwidth {}): need pitches > 0 and 0 < halfwidth <= pitch/2",
                t.x_pitch, t.y_pitch, t.footprint_halfwidth
            ),
        }
    }
}

/// Non-fatal conversion findings, indexed by report entry.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum ConversionWarning {
    /// The polygon overlaps no component on its layer.
    Unmatched { entry: usize, rule_id: String },
    /// More than two components overlap; only the closest pairs were kept.
    Crowded { entry: usize, rule_id: String, components: usize },
    /// Overlapping components belong to more than one net.
    MixedNets { entry: usize, rule_id: String, nets: Vec<String> },
}

impl fmt::Display for ConversionWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConversionWarning::Unmatched { entry, rule_id } => {
                write!(f, "entry {entry} ({rule_id}): polygon intersects no component")
            }
            ConversionWarning::Crowded { entry, rule_id, components } => write!(
                f,
                "entry {entry} ({rule_id}): {components} components intersect; kept closest pairs"
            ),
            ConversionWarning::MixedNets { entry, rule_id, nets } => {
                write!(f, "entry {entry} ({rule_id}): intersects nets {}", nets.join(", "))
            }
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Conversion {
    pub drvs: BTreeSet<Drv>,
    pub warnings: Vec<ConversionWarning>,
}

impl Conversion {
    pub fn unmatched(&self) -> usize {
        self.warnings.iter().filter(|w| matches!(w, ConversionWarning::Unmatched { .. })).count()
    }
}

fn shoelace(poly: &[Point]) -> f64 {
    let n = poly.len();
    let mut s = 0.0;
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        s += a.x * b.y - b.x * a.y;
    }
    s / 2.0
}

/// Returns the polygon as a rectangle when it has four axis-aligned edges.
fn as_rect(poly: &[Point]) -> Option<Rect> {
    if poly.len() != 4 {
        return None;
    }
    for i in 0..4 {
        let (a, b) = (poly[i], poly[(i + 1) % 4]);
        if a.x != b.x && a.y != b.y {
            return None;
        }
    }
    let xs = poly.iter().map(|p| p.x);
    let ys = poly.iter().map(|p| p.y);
    Some(Rect {
        x0: xs.clone().fold(f64::INFINITY, f64::min),
        x1: xs.fold(f64::NEG_INFINITY, f64::max),
        y0: ys.clone().fold(f64::INFINITY, f64::min),
        y1: ys.fold(f64::NEG_INFINITY, f64::max),
    })
}

/// Clips a simple polygon to an axis-aligned rectangle (Sutherland-Hodgman).
///
/// The clip window is convex, so the signed area of the result equals the
/// intersection area even for concave subjects.
type Inside = fn(&Point, &Rect) -> bool;
type Cut = fn(&Point, &Point, &Rect) -> Point;

fn clip_to_rect(poly: &[Point], r: &Rect) -> Vec<Point> {
    // (inside test, intersection with the clip line)
    let edges: [(Inside, Cut); 4] = [
        (|p, r| p.x >= r.x0, |a, b, r| lerp_x(a, b, r.x0)),
        (|p, r| p.x <= r.x1, |a, b, r| lerp_x(a, b, r.x1)),
        (|p, r| p.y >= r.y0, |a, b, r| lerp_y(a, b, r.y0)),
        (|p, r| p.y <= r.y1, |a, b, r| lerp_y(a, b, r.y1)),
    ];
    let mut out: Vec<Point> = poly.to_vec();
    for (inside, cut) in edges {
        if out.is_empty() {
            break;
        }
        let input = core::mem::take(&mut out);
        let mut prev = *input.last().unwrap();
        for &cur in &input {
            match (inside(&prev, r), inside(&cur, r)) {
                (true, true) => out.push(cur),
                (true, false) => out.push(cut(&prev, &cur, r)),
                (false, true) => {
                    out.push(cut(&prev, &cur, r));
                    out.push(cur);
                }
                (false, false) => {}
            }
            prev = cur;
        }
    }
    out
}

fn lerp_x(a: &Point, b: &Point, x: f64) -> Point {
    let t = (x - a.x) / (b.x - a.x);
    Point::new(x, a.y + t * (b.y - a.y))
}

fn lerp_y(a: &Point, b: &Point, y: f64) -> Point {
    let t = (y - a.y) / (b.y - a.y);
    Point::new(a.x + t * (b.x - a.x), y)
}

/// Overlap area of a polygon and a rectangle.
pub fn intersection_area(poly: &[Point], r: &Rect) -> f64 {
    match as_rect(poly) {
        Some(pr) => pr.overlap(r),
        None => libm::fabs(shoelace(&clip_to_rect(poly, r))),
    }
}

/// Converts every report entry to grid DRVs.
///
/// `tech` supplies rule kinds: enclosure entries also collect same-net metal on
/// the enclosing layer. Entries of unknown rules are classified by member count.
pub fn to_grid_drvs(
    report: &PhysicalDrvReport,
    layout: &Layout,
    transform: &GridTransform,
    tech: Option<&TechFile>,
) -> Result<Conversion, ConvertError> {
    transform.validate()?;
    if let Some(cell) = &report.cell_name {
        if cell != layout.cell_name() {
            return Err(ConvertError::CellMismatch { report: cell.clone(), layout: layout.cell_name().into() });
        }
    }
    let min_area = transform.min_area();
    let mut result = Conversion::default();

    for (i, entry) in report.entries.iter().enumerate() {
        let rule = tech.and_then(|t| t.rule(&entry.rule_id));
        let enclosing = rule.filter(|r| r.kind == RuleKind::Enclosure).and_then(|r| r.enclosing_layer);
        let hits_on = |layer: Layer| -> Vec<(GridKey, &str)> {
            layout
                .on_layer(layer)
                .filter(|(k, _)| intersection_area(&entry.polygon, &transform.footprint(*k)) > min_area)
                .collect()
        };

        let mut hits = hits_on(entry.layer);
        if let Some(metal) = enclosing {
            let via_nets: BTreeSet<&str> = hits.iter().map(|(_, n)| *n).collect();
            hits.extend(hits_on(metal).into_iter().filter(|(_, n)| via_nets.contains(n)));
        }

        let kind = |n: usize| match rule.map(|r| r.kind) {
            Some(RuleKind::Enclosure) => DrvKind::Enclosure,
            _ if n == 1 => DrvKind::Boundary,
            _ => DrvKind::Spacing,
        };
        let rule_id = entry.rule_id.as_str();

        let nets: BTreeSet<&str> = hits.iter().map(|(_, n)| *n).collect();
        if nets.len() > 1 && enclosing.is_none() && hits.len() > 2 {
            result.warnings.push(ConversionWarning::MixedNets {
                entry: i,
                rule_id: rule_id.into(),
                nets: nets.iter().map(|n| n.to_string()).collect(),
            });
        }

        match hits.as_slice() {
            [] => result.warnings.push(ConversionWarning::Unmatched { entry: i, rule_id: rule_id.into() }),
            [(k, _)] => {
                result.drvs.insert(Drv::single(rule_id, kind(1), *k));
            }
            [(a, _), (b, _)] => {
                result.drvs.insert(Drv::pair(rule_id, kind(2), *a, *b));
            }
            many => {
                result.warnings.push(ConversionWarning::Crowded {
                    entry: i,
                    rule_id: rule_id.into(),
                    components: many.len(),
                });
                for (a, b) in closest_pairs(many.iter().map(|(k, _)| *k)) {
                    result.drvs.insert(Drv::pair(rule_id, kind(2), a, b));
                }
            }
        }
    }
    Ok(result)
}

fn closest_pairs(keys: impl Iterator<Item = GridKey>) -> Vec<(GridKey, GridKey)> {
    let keys: Vec<GridKey> = keys.collect();
    let mut by_dist: BTreeMap<i64, Vec<(GridKey, GridKey)>> = BTreeMap::new();
    for (i, a) in keys.iter().enumerate() {
        for b in &keys[i + 1..] {
            let dx = a.x as i64 - b.x as i64;
            let dy = a.y as i64 - b.y as i64;
            by_dist.entry(dx * dx + dy * dy).or_default().push((*a, *b));
        }
    }
    by_dist.into_iter().next().map(|(_, v)| v).unwrap_or_default()
}

/// Builds a polygon that overlaps exactly the footprints of the DRV's members.
///
/// Members at one grid location get a small square. Distinct locations are joined
/// by a thin strip routed through the gaps between footprints, so no other
/// component on the same layers is touched. Requires `halfwidth < pitch/2`.
pub fn synthesize_polygon(drv: &Drv, t: &GridTransform) -> Vec<Point> {
    let m = drv.members();
    let (a, b) = (m[0], m[m.len() - 1]);
    if (a.x, a.y) == (b.x, b.y) {
        let c = t.center(a.x as f64, a.y as f64);
        let h = t.footprint_halfwidth / 2.0;
        return alloc::vec![
            Point::new(c.x - h, c.y - h),
            Point::new(c.x + h, c.y - h),
            Point::new(c.x + h, c.y + h),
            Point::new(c.x - h, c.y + h),
        ];
    }

    // Work in grid units, mirrored so that b lies in the first quadrant of a.
    let sx = if b.x >= a.x { 1.0 } else { -1.0 };
    let sy = if b.y >= a.y { 1.0 } else { -1.0 };
    let u_end = (b.x as f64 - a.x as f64) * sx;
    let v_end = (b.y as f64 - a.y as f64) * sy;
    let corner_b = match (u_end == 0.0, v_end == 0.0) {
        (true, _) => (0.5, v_end - 0.5),
        (_, true) => (u_end - 0.5, 0.5),
        _ => (u_end - 0.5, v_end - 0.5),
    };
    let mut route: Vec<(f64, f64)> = alloc::vec![(0.0, 0.0), (0.5, 0.5), (corner_b.0, 0.5), corner_b, (u_end, v_end)];
    route.dedup();

    let gap_x = 0.5 - t.footprint_halfwidth / t.x_pitch;
    let gap_y = 0.5 - t.footprint_halfwidth / t.y_pitch;
    let eps = (gap_x.min(gap_y) / 4.0).max(1e-6);

    let (left, right) = offset_polyline(&route, eps);
    let to_phys = |(u, v): (f64, f64)| t.center(a.x as f64 + sx * u, a.y as f64 + sy * v);
    left.into_iter().chain(right.into_iter().rev()).map(to_phys).collect()
}

/// Miter offsets of a polyline to both sides at distance `eps`.
type Polyline = Vec<(f64, f64)>;

fn offset_polyline(route: &[(f64, f64)], eps: f64) -> (Polyline, Polyline) {
    let normals: Vec<(f64, f64)> = route
        .windows(2)
        .map(|w| {
            let (dx, dy) = (w[1].0 - w[0].0, w[1].1 - w[0].1);
            let len = libm::sqrt(dx * dx + dy * dy);
            (-dy / len, dx / len)
        })
        .collect();
    let mut left = Vec::with_capacity(route.len());
    let mut right = Vec::with_capacity(route.len());
    for (i, p) in route.iter().enumerate() {
        let (mx, my) = if i == 0 {
            normals[0]
        } else if i == route.len() - 1 {
            normals[i - 1]
        } else {
            let (n1, n2) = (normals[i - 1], normals[i]);
            let c = 1.0 + n1.0 * n2.0 + n1.1 * n2.1;
            ((n1.0 + n2.0) / c, (n1.1 + n2.1) / c)
        };
        left.push((p.0 + eps * mx, p.1 + eps * my));
        right.push((p.0 - eps * mx, p.1 - eps * my));
    }
    (left, right)
}

/// Renders grid DRVs back into a physical report, one entry per DRV. Entries are
/// placed on the layer of the DRV's first member.
pub fn drvs_to_report(cell: &str, drvs: &BTreeSet<Drv>, t: &GridTransform) -> PhysicalDrvReport {
    PhysicalDrvReport {
        cell_name: Some(cell.into()),
        entries: drvs
            .iter()
            .map(|d| ReportEntry {
                rule_id: d.rule_id().into(),
                layer: entry_layer(d),
                polygon: synthesize_polygon(d, t),
            })
            .collect(),
    }
}

fn entry_layer(d: &Drv) -> Layer {
    // Enclosure DRVs pair a via with metal; the report names the via layer.
    d.members().iter().map(|k| k.layer).find(|l| l.is_via()).unwrap_or(d.members()[0].layer)
}
