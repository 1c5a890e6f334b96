//! Geometry kernel shared by the rule oracle and the rule DSL interpreter.
//!
//! Both callers go through the same PRL definition, shape merging and pair
//! enumeration so that a DSL program and the equivalent [`RuleSpec`](crate::rules::RuleSpec)
//! cannot disagree on semantics.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::model::{GridKey, Layer, Layout, RoutingDirection};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
}

impl Axis {
    pub fn of(self, k: GridKey) -> i64 {
        match self {
            Axis::X => k.x as i64,
            Axis::Y => k.y as i64,
        }
    }

    pub fn other(self) -> Axis {
        match self {
            Axis::X => Axis::Y,
            Axis::Y => Axis::X,
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Axis::X => "x",
            Axis::Y => "y",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Cmp {
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">")]
    Gt,
    #[serde(rename = ">=")]
    Ge,
}

impl Cmp {
    pub fn holds(self, lhs: i64, rhs: i64) -> bool {
        match self {
            Cmp::Lt => lhs < rhs,
            Cmp::Le => lhs <= rhs,
            Cmp::Gt => lhs > rhs,
            Cmp::Ge => lhs >= rhs,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Cmp::Lt => "<",
            Cmp::Le => "<=",
            Cmp::Gt => ">",
            Cmp::Ge => ">=",
        }
    }
}

impl fmt::Display for Cmp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

/// Parallel run length of two unit components projected on `axis`:
/// `1 - |a.axis - b.axis|`. Aligned components give 1, adjacent rows 0.
pub fn prl(a: GridKey, b: GridKey, axis: Axis) -> i64 {
    1 - (axis.of(a) - axis.of(b)).abs()
}

/// Connected same-net shapes of one layer.
///
/// Points merge when they carry the same net and are adjacent along the layer's
/// routing direction. Via layers have no direction, so every via is its own shape.
#[derive(Clone, Debug)]
pub struct ShapeIndex {
    shape_of: BTreeMap<(u32, u32), usize>,
}

impl ShapeIndex {
    pub fn build(layout: &Layout, layer: Layer) -> Self {
        let points: Vec<(GridKey, &str)> = layout.on_layer(layer).collect();
        let slot: BTreeMap<(u32, u32), usize> =
            points.iter().enumerate().map(|(i, (k, _))| ((k.x, k.y), i)).collect();
        let mut parent: Vec<usize> = (0..points.len()).collect();

        fn find(parent: &mut [usize], mut i: usize) -> usize {
            while parent[i] != i {
                parent[i] = parent[parent[i]];
                i = parent[i];
            }
            i
        }

        let step = match layer.routing_direction() {
            RoutingDirection::Horizontal => Some((1, 0)),
            RoutingDirection::Vertical => Some((0, 1)),
            RoutingDirection::None => None,
        };
        if let Some((sx, sy)) = step {
            for (i, (k, net)) in points.iter().enumerate() {
                if let Some(&j) = slot.get(&(k.x + sx, k.y + sy)) {
                    if points[j].1 == *net {
                        let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                        parent[ri.max(rj)] = ri.min(rj);
                    }
                }
            }
        }

        let shape_of = points
            .iter()
            .enumerate()
            .map(|(i, (k, _))| ((k.x, k.y), find(&mut parent, i)))
            .collect();
        ShapeIndex { shape_of }
    }

    pub fn shape(&self, k: GridKey) -> Option<usize> {
        self.shape_of.get(&(k.x, k.y)).copied()
    }

    pub fn same_shape(&self, a: GridKey, b: GridKey) -> bool {
        matches!((self.shape(a), self.shape(b)), (Some(x), Some(y)) if x == y)
    }
}

/// Which pairs a spacing check skips.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Exemption {
    /// Pairs inside one contiguous same-net shape are not checked.
    SameShape,
    /// Every pair is checked.
    None,
}

/// Parameters of one directional spacing scan.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SpacingQuery {
    pub layer: Layer,
    /// Axis the spacing is measured along (`X` for horizontal spacing).
    pub axis: Axis,
    /// A pair violates when `0 < distance <= max_distance`.
    pub max_distance: i64,
    /// Optional PRL condition, evaluated on the axis orthogonal to `axis`.
    pub prl: Option<(Cmp, i64)>,
    pub exemption: Exemption,
}

impl SpacingQuery {
    fn pair_matches(&self, a: GridKey, b: GridKey) -> bool {
        let d = (self.axis.of(a) - self.axis.of(b)).abs();
        if d == 0 || d > self.max_distance {
            return false;
        }
        match self.prl {
            Some((cmp, t)) => cmp.holds(prl(a, b, self.axis.other()), t),
            None => true,
        }
    }

    /// Largest orthogonal offset that can still satisfy the PRL condition.
    fn orthogonal_window(&self, limit: i64) -> i64 {
        match self.prl {
            Some((Cmp::Ge, t)) => (1 - t).min(limit),
            Some((Cmp::Gt, t)) => (-t).min(limit),
            _ => limit,
        }
    }
}

/// Enumerates violating pairs for one spacing query, each pair reported once with
/// the lower coordinate first along `axis`.
///
/// Small windows probe a coordinate index; wide windows fall back to a pairwise scan.
pub fn spacing_pairs(layout: &Layout, q: &SpacingQuery) -> Vec<(GridKey, GridKey)> {
    if q.max_distance < 1 {
        return Vec::new();
    }
    let points: Vec<(GridKey, &str)> = layout.on_layer(q.layer).collect();
    let shapes = match q.exemption {
        Exemption::SameShape => Some(ShapeIndex::build(layout, q.layer)),
        Exemption::None => None,
    };
    let exempt = |a: GridKey, b: GridKey| shapes.as_ref().is_some_and(|s| s.same_shape(a, b));

    let ortho_limit = match q.axis {
        Axis::X => layout.max_y() as i64,
        Axis::Y => layout.max_x() as i64,
    };
    let window = q.orthogonal_window(ortho_limit);
    let mut out = Vec::new();
    if window < 0 {
        return out;
    }
    let probes = q.max_distance.saturating_mul(2 * window + 1);

    if (probes as usize) <= points.len() {
        let at: BTreeMap<(i64, i64), GridKey> =
            points.iter().map(|(k, _)| ((k.x as i64, k.y as i64), *k)).collect();
        for &(a, _) in &points {
            for d in 1..=q.max_distance {
                for o in -window..=window {
                    let (bx, by) = match q.axis {
                        Axis::X => (a.x as i64 + d, a.y as i64 + o),
                        Axis::Y => (a.x as i64 + o, a.y as i64 + d),
                    };
                    if let Some(&b) = at.get(&(bx, by)) {
                        if q.pair_matches(a, b) && !exempt(a, b) {
                            out.push((a, b));
                        }
                    }
                }
            }
        }
    } else {
        for (i, &(a, _)) in points.iter().enumerate() {
            for &(b, _) in &points[i + 1..] {
                if q.pair_matches(a, b) && !exempt(a, b) {
                    if q.axis.of(a) <= q.axis.of(b) {
                        out.push((a, b));
                    } else {
                        out.push((b, a));
                    }
                }
            }
        }
    }
    out
}

/// Components on `layer` whose coordinate along `axis` satisfies `coord <cmp> bound`.
pub fn boundary_hits(layout: &Layout, layer: Layer, axis: Axis, cmp: Cmp, bound: i64) -> Vec<GridKey> {
    layout
        .on_layer(layer)
        .map(|(k, _)| k)
        .filter(|k| cmp.holds(axis.of(*k), bound))
        .collect()
}

/// One via whose metal fails to enclose it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct EnclosureFailure {
    pub via: GridKey,
    /// Last same-net metal reached before the missing extension, or `None` when
    /// the metal directly over the via is missing.
    pub metal: Option<GridKey>,
}

/// Checks that every via on `via_layer` is covered by same-net metal on
/// `metal_layer`, extending `extension` grids to both sides along `axis`.
pub fn enclosure_failures(
    layout: &Layout,
    via_layer: Layer,
    metal_layer: Layer,
    extension: u32,
    axis: Axis,
) -> Vec<EnclosureFailure> {
    let mut out = Vec::new();
    let (mx, my) = (layout.max_x() as i64, layout.max_y() as i64);
    let metal_with_net = |x: i64, y: i64, net: &str| -> Option<GridKey> {
        if x < 0 || y < 0 || x > mx || y > my {
            return None;
        }
        let key = GridKey::new(x as u32, y as u32, metal_layer);
        (layout.net_at(&key) == Some(net)).then_some(key)
    };

    for (via, net) in layout.on_layer(via_layer) {
        let Some(under) = metal_with_net(via.x as i64, via.y as i64, net) else {
            out.push(EnclosureFailure { via, metal: None });
            continue;
        };
        for side in [-1i64, 1] {
            let mut last = under;
            for d in 1..=extension as i64 {
                let (x, y) = match axis {
                    Axis::X => (via.x as i64 + side * d, via.y as i64),
                    Axis::Y => (via.x as i64, via.y as i64 + side * d),
                };
                match metal_with_net(x, y, net) {
                    Some(k) => last = k,
                    None => {
                        out.push(EnclosureFailure { via, metal: Some(last) });
                        break;
                    }
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::GridComponent;

    fn k(x: u32, y: u32) -> GridKey {
        GridKey::new(x, y, Layer::M0)
    }

    #[test]
    fn prl_examples() {
        assert_eq!(prl(k(2, 0), k(3, 2), Axis::Y), -1);
        assert_eq!(prl(k(2, 3), k(7, 3), Axis::Y), 1);
        assert_eq!(prl(k(0, 0), k(0, 5), Axis::Y), -4);
    }

    #[test]
    fn shapes_merge_along_routing_direction_only() {
        let layout = Layout::new(
            "c",
            9,
            9,
            [
                GridComponent::new(2, 3, Layer::M0, "A"),
                GridComponent::new(3, 3, Layer::M0, "A"),
                GridComponent::new(4, 3, Layer::M0, "B"),
                GridComponent::new(2, 4, Layer::M0, "A"),
            ],
        )
        .unwrap();
        let s = ShapeIndex::build(&layout, Layer::M0);
        assert!(s.same_shape(k(2, 3), k(3, 3)));
        assert!(!s.same_shape(k(3, 3), k(4, 3)));
        assert!(!s.same_shape(k(2, 3), k(2, 4)));
    }

    #[test]
    fn indexed_and_pairwise_scans_agree() {
        let comps = [(1, 1), (2, 1), (3, 3), (5, 2), (6, 2), (6, 5), (2, 5)]
            .iter()
            .enumerate()
            .map(|(i, &(x, y))| GridComponent::new(x, y, Layer::M0, if i % 2 == 0 { "A" } else { "B" }));
        let layout = Layout::new("c", 9, 9, comps).unwrap();
        // A wide window forces the pairwise path, a narrow one the index path.
        let narrow = SpacingQuery {
            layer: Layer::M0,
            axis: Axis::X,
            max_distance: 1,
            prl: Some((Cmp::Ge, 1)),
            exemption: Exemption::SameShape,
        };
        let wide = SpacingQuery { max_distance: 9, prl: None, ..narrow };
        // No two same-net points are contiguous here, so nothing is exempt.
        let brute = |q: &SpacingQuery| {
            let pts: Vec<GridKey> = layout.iter().map(|(k, _)| k).collect();
            let mut v = Vec::new();
            for a in &pts {
                for b in &pts {
                    if a.x < b.x && q.pair_matches(*a, *b) {
                        v.push((*a, *b));
                    }
                }
            }
            v.sort();
            v
        };
        for q in [narrow, wide] {
            let mut got = spacing_pairs(&layout, &q);
            got.sort();
            assert_eq!(got, brute(&q));
        }
    }

    #[test]
    fn enclosure_reports_missing_metal_and_short_extension() {
        let layout = Layout::new(
            "c",
            9,
            9,
            [
                GridComponent::new(4, 4, Layer::Via1, "A"),
                GridComponent::new(4, 4, Layer::M2, "A"),
                GridComponent::new(5, 4, Layer::M2, "A"),
                GridComponent::new(7, 2, Layer::Via1, "B"),
            ],
        )
        .unwrap();
        let f = enclosure_failures(&layout, Layer::Via1, Layer::M2, 1, Axis::X);
        assert_eq!(
            f,
            [
                EnclosureFailure { via: GridKey::new(4, 4, Layer::Via1), metal: Some(GridKey::new(4, 4, Layer::M2)) },
                EnclosureFailure { via: GridKey::new(7, 2, Layer::Via1), metal: None },
            ]
        );
    }
}
