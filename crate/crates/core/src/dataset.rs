//! Synthetic standard-cell-like layouts with seeded violations.
//!
//! Each layout starts as a set of legal routes (M0/M1/M2 wires joined by vias at
//! their crossings, clean under every rule of the deck). Mutation passes then
//! shift wires, extend them, move vias and delete metal under vias without any
//! repair, which produces spacing, boundary and enclosure violations.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::model::{Drv, GridComponent, GridKey, Layer, Layout, RoutingDirection};
use crate::rules::{check_rule, RuleError, TechFile};

/// Generator knobs. All ranges are inclusive.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenParams {
    pub max_x: (u32, u32),
    pub max_y: (u32, u32),
    /// Routed nets per 16 grid points. Zero yields empty layouts and disables
    /// the coverage guarantee.
    pub density: f64,
    pub mutations: (u32, u32),
    /// Layout regenerations allowed while satisfying rule coverage.
    pub retry_budget: u32,
}

impl Default for GenParams {
    fn default() -> Self {
        GenParams { max_x: (8, 24), max_y: (6, 12), density: 0.5, mutations: (0, 3), retry_budget: 20_000 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum DatasetError {
    ZeroCount,
    InvalidParams(&'static str),
    Rule(RuleError),
    Coverage { rule: String, have: usize, need: usize },
}

impl fmt::Display for DatasetError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DatasetError::ZeroCount => f.write_str("count must be at least 1"),
            DatasetError::InvalidParams(why) => write!(f, "invalid generator parameters: {why}"),
            DatasetError::Rule(e) => write!(f, "{e}"),
            DatasetError::Coverage { rule, have, need } => write!(
                f,
                "rule {rule}: only {have} of the required {need} layouts violate it after exhausting the retry budget"
            ),
        }
    }
}

impl From<RuleError> for DatasetError {
    fn from(e: RuleError) -> Self {
        DatasetError::Rule(e)
    }
}

/// Golden DRVs of one layout, keyed by rule id.
pub type Labels = BTreeMap<String, BTreeSet<Drv>>;

/// Number of layouts that must violate each rule.
pub fn coverage_target(count: usize) -> usize {
    count.div_ceil(10)
}

fn rng_for(seed: u64, index: u64, attempt: u64) -> ChaCha8Rng {
    let mut s = [0u8; 32];
    s[..8].copy_from_slice(&seed.to_le_bytes());
    s[8..16].copy_from_slice(&index.to_le_bytes());
    s[16..24].copy_from_slice(&attempt.to_le_bytes());
    s[24..].copy_from_slice(b"gridrcds");
    ChaCha8Rng::from_seed(s)
}

fn validate(p: &GenParams) -> Result<(), DatasetError> {
    if p.max_x.0 < 1 || p.max_y.0 < 1 {
        return Err(DatasetError::InvalidParams("grid bounds must be at least 1"));
    }
    if p.max_x.0 > p.max_x.1 || p.max_y.0 > p.max_y.1 || p.mutations.0 > p.mutations.1 {
        return Err(DatasetError::InvalidParams("range lower bound exceeds upper bound"));
    }
    if !(p.density >= 0.0 && p.density.is_finite()) {
        return Err(DatasetError::InvalidParams("density must be a finite non-negative number"));
    }
    Ok(())
}

/// Deterministically generates `count` layouts named `cell_000`, `cell_001`, ...
///
/// Unless density is zero, at least [`coverage_target`] layouts violate each rule
/// of `tech`; deficient rules are fixed by regenerating layouts that are not
/// needed for any other rule's coverage.
pub fn generate_dataset(seed: u64, count: usize, params: &GenParams, tech: &TechFile) -> Result<Vec<Layout>, DatasetError> {
    if count == 0 {
        return Err(DatasetError::ZeroCount);
    }
    validate(params)?;
    tech.validate()?;
    let width = if count > 1000 { 4 } else { 3 };
    let name = |i: usize| alloc::format!("cell_{i:0width$}");

    let mut layouts = Vec::with_capacity(count);
    let mut violated = Vec::with_capacity(count);
    for i in 0..count {
        let l = generate_layout(&mut rng_for(seed, i as u64, 0), name(i), params, tech, None);
        violated.push(violated_rules(&l, tech));
        layouts.push(l);
    }
    if params.density == 0.0 {
        return Ok(layouts);
    }

    let need = coverage_target(count);
    let mut budget = params.retry_budget as u64;
    let mut attempt = 1u64;
    for (r, rule) in tech.rules.iter().enumerate() {
        let mut have = violated.iter().filter(|v| v[r]).count();
        let mut slot = count;
        while have < need {
            // Next layout, scanning from the end, whose loss keeps every rule covered.
            let counts: Vec<usize> = (0..tech.rules.len()).map(|q| violated.iter().filter(|v| v[q]).count()).collect();
            let spare = (0..slot).rev().find(|&i| {
                !violated[i][r] && violated[i].iter().enumerate().all(|(q, &hit)| !hit || counts[q] > need)
            });
            let Some(i) = spare else {
                return Err(DatasetError::Coverage { rule: rule.rule_id.clone(), have, need });
            };
            slot = i;
            loop {
                if budget == 0 {
                    return Err(DatasetError::Coverage { rule: rule.rule_id.clone(), have, need });
                }
                budget -= 1;
                let l = generate_layout(&mut rng_for(seed, i as u64, attempt), name(i), params, tech, Some(rule.layer));
                attempt += 1;
                let v = violated_rules(&l, tech);
                if v[r] {
                    layouts[i] = l;
                    violated[i] = v;
                    have += 1;
                    break;
                }
            }
        }
    }
    Ok(layouts)
}

fn violated_rules(l: &Layout, tech: &TechFile) -> Vec<bool> {
    tech.rules.iter().map(|r| check_rule(l, r).map(|d| !d.is_empty()).unwrap_or(false)).collect()
}

/// Applies every rule of `tech` to every layout.
pub fn label_dataset(layouts: &[Layout], tech: &TechFile) -> Result<Vec<Labels>, RuleError> {
    layouts.iter().map(|l| tech.check_all(l)).collect()
}

/// Fraction of occupied grids that belong to at least one golden DRV, pooled
/// over the corpus. Returns 0 for a corpus without components.
pub fn violating_grid_fraction(layouts: &[Layout], labels: &[Labels]) -> f64 {
    let (mut bad, mut total) = (0usize, 0usize);
    for (l, lab) in layouts.iter().zip(labels) {
        total += l.len();
        let grids: BTreeSet<GridKey> = lab.values().flatten().flat_map(|d| d.members().iter().copied()).collect();
        bad += grids.len();
    }
    if total == 0 {
        0.0
    } else {
        bad as f64 / total as f64
    }
}

fn is_clean(l: &Layout, tech: &TechFile) -> bool {
    tech.rules.iter().all(|r| check_rule(l, r).map(|d| d.is_empty()).unwrap_or(true))
}

/// One layout: legal routes, then unrepaired mutations.
///
/// With `focus`, every mutation acts on that layer and at least one is applied;
/// coverage resampling uses this to reach rules that random mutations rarely hit.
pub fn generate_layout(
    rng: &mut ChaCha8Rng,
    cell: String,
    p: &GenParams,
    tech: &TechFile,
    focus: Option<Layer>,
) -> Layout {
    let max_x = rng.gen_range(p.max_x.0..=p.max_x.1);
    let max_y = rng.gen_range(p.max_y.0..=p.max_y.1);
    let mut layout = Layout::empty(cell, max_x, max_y).expect("bounds validated");
    let points = ((max_x + 1) * (max_y + 1)) as f64;
    let nets = libm::round(p.density * points / 16.0) as usize;

    for n in 0..nets {
        let net = alloc::format!("N{}", n + 1);
        for _ in 0..24 {
            let anchor = match focus {
                Some(f) if f.is_via() && rng.gen_bool(0.75) => near_via(rng, &layout, f),
                _ => None,
            };
            let route = random_route(rng, max_x, max_y, &net, anchor);
            if try_place(&mut layout, route, tech) {
                break;
            }
        }
    }
    if layout.is_empty() {
        return layout;
    }
    let mut k = rng.gen_range(p.mutations.0..=p.mutations.1);
    if focus.is_some() {
        k = k.max(1);
    }
    for _ in 0..k {
        // A mutation whose target is occupied or out of bounds is redrawn.
        for _ in 0..8 {
            if mutate(rng, &mut layout, focus) {
                break;
            }
        }
    }
    layout
}

fn try_place(layout: &mut Layout, route: Option<Vec<GridComponent>>, tech: &TechFile) -> bool {
    let Some(route) = route else { return false };
    let mut placed = Vec::new();
    let mut ok = true;
    for c in route {
        let key = c.key();
        if layout.insert(c).is_err() {
            ok = false;
            break;
        }
        placed.push(key);
    }
    if ok && is_clean(layout, tech) {
        return true;
    }
    for k in placed {
        layout.remove(&k);
    }
    false
}

fn span(rng: &mut ChaCha8Rng, center: i64, min_side: i64, max_side: i64) -> (i64, i64) {
    (center - rng.gen_range(min_side..=max_side), center + rng.gen_range(min_side..=max_side))
}

/// A crossing point a few grids away from an existing via on `layer`.
fn near_via(rng: &mut ChaCha8Rng, layout: &Layout, layer: Layer) -> Option<(i64, i64, Layer)> {
    let vias: Vec<GridKey> = layout.on_layer(layer).map(|(k, _)| k).collect();
    if vias.is_empty() {
        return None;
    }
    let v = vias[rng.gen_range(0..vias.len())];
    let along = rng.gen_range(2..=4i64) * if rng.gen_bool(0.5) { 1 } else { -1 };
    let across = rng.gen_range(-1..=1i64);
    let (dx, dy) = if rng.gen_bool(0.5) { (along, across) } else { (across, along) };
    Some((v.x as i64 + dx, v.y as i64 + dy, layer))
}

/// A route in signed coordinates; `None` when it leaves the grid.
///
/// An `anchor` forces a route whose via on the anchor's layer sits at the anchor.
fn random_route(
    rng: &mut ChaCha8Rng,
    max_x: u32,
    max_y: u32,
    net: &str,
    anchor: Option<(i64, i64, Layer)>,
) -> Option<Vec<GridComponent>> {
    let (mx, my) = (max_x as i64, max_y as i64);
    let mut pts: Vec<(i64, i64, Layer)> = Vec::new();
    let hrun = |pts: &mut Vec<(i64, i64, Layer)>, y: i64, x0: i64, x1: i64, layer: Layer| {
        pts.extend((x0..=x1).map(|x| (x, y, layer)));
    };
    let vrun = |pts: &mut Vec<(i64, i64, Layer)>, x: i64, y0: i64, y1: i64| {
        pts.extend((y0..=y1).map(|y| (x, y, Layer::M1)));
    };
    let kind = match anchor {
        Some((_, _, Layer::Via0)) => rng.gen_range(2..=4u32),
        Some(_) => rng.gen_range(5..=6u32),
        None => rng.gen_range(0..9u32),
    };
    let crossing = |rng: &mut ChaCha8Rng| match anchor {
        Some((x, y, _)) => (x, y),
        None => (rng.gen_range(0..=mx), rng.gen_range(0..=my)),
    };
    match kind {
        // M0 stub.
        0 | 1 => {
            let y = rng.gen_range(0..=my);
            let x0 = rng.gen_range(0..=mx);
            let len = rng.gen_range(1..=5);
            hrun(&mut pts, y, x0, x0 + len - 1, Layer::M0);
        }
        // M0 crossing M1 through VIA0.
        2..=4 => {
            let (xc, yc) = crossing(rng);
            let (x0, x1) = span(rng, xc, 0, 2);
            let (y0, y1) = span(rng, yc, 0, 2);
            hrun(&mut pts, yc, x0, x1, Layer::M0);
            vrun(&mut pts, xc, y0, y1);
            pts.push((xc, yc, Layer::Via0));
        }
        // M1 crossing M2 through VIA1.
        5 | 6 => {
            let (xc, yc) = crossing(rng);
            let (x0, x1) = span(rng, xc, 1, 2);
            let (y0, y1) = span(rng, yc, 0, 2);
            vrun(&mut pts, xc, y0, y1);
            hrun(&mut pts, yc, x0, x1, Layer::M2);
            pts.push((xc, yc, Layer::Via1));
        }
        // M0 up to M2 through an M1 riser.
        _ => {
            let xc = rng.gen_range(0..=mx);
            let (ya, yb) = (rng.gen_range(0..=my), rng.gen_range(0..=my));
            if ya == yb {
                return None;
            }
            let (a0, a1) = span(rng, xc, 0, 2);
            let (b0, b1) = span(rng, xc, 1, 2);
            hrun(&mut pts, ya, a0, a1, Layer::M0);
            hrun(&mut pts, yb, b0, b1, Layer::M2);
            vrun(&mut pts, xc, ya.min(yb) - 1, ya.max(yb) + 1);
            pts.push((xc, ya, Layer::Via0));
            pts.push((xc, yb, Layer::Via1));
        }
    }
    pts.iter()
        .map(|&(x, y, layer)| {
            (0..=mx).contains(&x).then_some(())?;
            (0..=my).contains(&y).then_some(())?;
            Some(GridComponent::new(x as u32, y as u32, layer, net))
        })
        .collect()
}

/// Maximal same-net run through `k` along its layer's routing direction.
fn segment(layout: &Layout, k: GridKey) -> Vec<GridKey> {
    let Some(net) = layout.net_at(&k) else { return Vec::new() };
    let (sx, sy): (i64, i64) = match k.layer.routing_direction() {
        RoutingDirection::Horizontal => (1, 0),
        RoutingDirection::Vertical => (0, 1),
        RoutingDirection::None => return alloc::vec![k],
    };
    let at = |i: i64| -> Option<GridKey> {
        let (x, y) = (k.x as i64 + sx * i, k.y as i64 + sy * i);
        if x < 0 || y < 0 {
            return None;
        }
        let key = GridKey::new(x as u32, y as u32, k.layer);
        (layout.net_at(&key) == Some(net)).then_some(key)
    };
    let mut lo = 0;
    while at(lo - 1).is_some() {
        lo -= 1;
    }
    let mut hi = 0;
    while at(hi + 1).is_some() {
        hi += 1;
    }
    (lo..=hi).filter_map(at).collect()
}

fn offset(k: GridKey, dx: i64, dy: i64, layout: &Layout) -> Option<GridKey> {
    let (x, y) = (k.x as i64 + dx, k.y as i64 + dy);
    if x < 0 || y < 0 || x > layout.max_x() as i64 || y > layout.max_y() as i64 {
        return None;
    }
    Some(GridKey::new(x as u32, y as u32, k.layer))
}

/// Moves `from` keys by `(dx, dy)` if every target is free; returns success.
fn relocate(layout: &mut Layout, from: &[GridKey], dx: i64, dy: i64) -> bool {
    let moving: BTreeSet<GridKey> = from.iter().copied().collect();
    let mut targets = Vec::with_capacity(from.len());
    for &k in from {
        match offset(k, dx, dy, layout) {
            Some(t) if !layout.contains(&t) || moving.contains(&t) => targets.push(t),
            _ => return false,
        }
    }
    let nets: Vec<String> = from.iter().map(|k| layout.net_at(k).unwrap_or_default().into()).collect();
    for k in from {
        layout.remove(k);
    }
    for (t, net) in targets.into_iter().zip(nets) {
        layout.insert(GridComponent::new(t.x, t.y, t.layer, net)).expect("target checked free");
    }
    true
}

const STEPS: [(i64, i64); 4] = [(1, 0), (-1, 0), (0, 1), (0, -1)];

fn mutate(rng: &mut ChaCha8Rng, layout: &mut Layout, focus: Option<Layer>) -> bool {
    let keys: Vec<GridKey> = layout.iter().map(|(k, _)| k).filter(|k| focus.is_none_or(|f| k.layer == f)).collect();
    let metals: Vec<GridKey> = keys.iter().copied().filter(|k| !k.layer.is_via()).collect();
    let vias: Vec<GridKey> = keys.iter().copied().filter(|k| k.layer.is_via()).collect();
    let op = match focus {
        Some(f) if f.is_via() => rng.gen_range(2..4u32),
        Some(_) => rng.gen_range(0..2u32),
        None => rng.gen_range(0..4u32),
    };
    match op {
        // Shift a wire segment by one grid.
        0 if !metals.is_empty() => {
            let seg = segment(layout, metals[rng.gen_range(0..metals.len())]);
            let (dx, dy) = STEPS[rng.gen_range(0..4)];
            relocate(layout, &seg, dx, dy)
        }
        // Extend a wire by one grid at either end.
        1 if !metals.is_empty() => {
            let seg = segment(layout, metals[rng.gen_range(0..metals.len())]);
            let (first, last) = (seg[0], seg[seg.len() - 1]);
            let (sx, sy) = match first.layer.routing_direction() {
                RoutingDirection::Vertical => (0, 1),
                _ => (1, 0),
            };
            let (end, dx, dy) = if rng.gen_bool(0.5) { (last, sx, sy) } else { (first, -sx, -sy) };
            let net: String = layout.net_at(&end).unwrap_or_default().into();
            match offset(end, dx, dy, layout) {
                Some(t) if !layout.contains(&t) => {
                    layout.insert(GridComponent::new(t.x, t.y, t.layer, net)).is_ok()
                }
                _ => false,
            }
        }
        // Move a via by one grid.
        2 if !vias.is_empty() => {
            let v = vias[rng.gen_range(0..vias.len())];
            let (dx, dy) = STEPS[rng.gen_range(0..4)];
            relocate(layout, &[v], dx, dy)
        }
        // Delete enclosing metal at or next to a via.
        3 if !vias.is_empty() => {
            let v = vias[rng.gen_range(0..vias.len())];
            let Some(net) = layout.net_at(&v).map(String::from) else { return false };
            let (below, above) = v.layer.via_neighbors().expect("via layer");
            let mut cands = Vec::new();
            for layer in [below, above] {
                let at = GridKey::new(v.x, v.y, layer);
                let (sx, sy) = match layer.routing_direction() {
                    RoutingDirection::Vertical => (0, 1),
                    _ => (1, 0),
                };
                for (dx, dy) in [(0, 0), (sx, sy), (-sx, -sy)] {
                    if let Some(t) = offset(at, dx, dy, layout) {
                        if layout.net_at(&t) == Some(net.as_str()) {
                            cands.push(t);
                        }
                    }
                }
            }
            if cands.is_empty() {
                return false;
            }
            let t = cands[rng.gen_range(0..cands.len())];
            layout.remove(&t).is_some()
        }
        _ => false,
    }
}
