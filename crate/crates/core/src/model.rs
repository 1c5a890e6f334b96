//! Grid layout domain types.
//!
//! A layout is a set of unit grid components, each identified by `(x, y, layer)` and
//! tagged with a net name. All layers share one coordinate system.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

/// Preferred routing direction of a layer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RoutingDirection {
    Horizontal,
    Vertical,
    None,
}

/// One of the five routing layers of a standard cell, bottom to top.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Layer {
    #[serde(rename = "M0")]
    M0,
    #[serde(rename = "VIA0")]
    Via0,
    #[serde(rename = "M1")]
    M1,
    #[serde(rename = "VIA1")]
    Via1,
    #[serde(rename = "M2")]
    M2,
}

impl Layer {
    pub const ALL: [Layer; 5] = [Layer::M0, Layer::Via0, Layer::M1, Layer::Via1, Layer::M2];

    pub fn name(self) -> &'static str {
        match self {
            Layer::M0 => "M0",
            Layer::Via0 => "VIA0",
            Layer::M1 => "M1",
            Layer::Via1 => "VIA1",
            Layer::M2 => "M2",
        }
    }

    pub fn is_via(self) -> bool {
        matches!(self, Layer::Via0 | Layer::Via1)
    }

    /// M0 and M2 run horizontally, M1 vertically; vias have no direction.
    pub fn routing_direction(self) -> RoutingDirection {
        match self {
            Layer::M0 | Layer::M2 => RoutingDirection::Horizontal,
            Layer::M1 => RoutingDirection::Vertical,
            Layer::Via0 | Layer::Via1 => RoutingDirection::None,
        }
    }

    /// Metal layers a via connects, `(below, above)`.
    pub fn via_neighbors(self) -> Option<(Layer, Layer)> {
        match self {
            Layer::Via0 => Some((Layer::M0, Layer::M1)),
            Layer::Via1 => Some((Layer::M1, Layer::M2)),
            _ => None,
        }
    }
}

impl fmt::Display for Layer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UnknownLayer(pub String);

impl fmt::Display for UnknownLayer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "unknown layer `{}` (expected one of M0, VIA0, M1, VIA1, M2)", self.0)
    }
}

impl FromStr for Layer {
    type Err = UnknownLayer;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Layer::ALL
            .iter()
            .copied()
            .find(|l| l.name() == s)
            .ok_or_else(|| UnknownLayer(s.into()))
    }
}

/// Identity of a grid component. Ordered lexicographically by `(x, y, layer)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GridKey {
    pub x: u32,
    pub y: u32,
    pub layer: Layer,
}

impl GridKey {
    pub const fn new(x: u32, y: u32, layer: Layer) -> Self {
        GridKey { x, y, layer }
    }
}

impl fmt::Display for GridKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.x, self.y, self.layer)
    }
}

/// One occupied routing grid.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GridComponent {
    pub x: u32,
    pub y: u32,
    pub layer: Layer,
    pub net: String,
}

impl GridComponent {
    pub fn new(x: u32, y: u32, layer: Layer, net: impl Into<String>) -> Self {
        GridComponent { x, y, layer, net: net.into() }
    }

    pub fn key(&self) -> GridKey {
        GridKey::new(self.x, self.y, self.layer)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LayoutError {
    InvalidBounds { max_x: u32, max_y: u32 },
    Duplicate { key: GridKey, first_net: String, second_net: String },
    OutOfBounds { component: GridComponent, max_x: u32, max_y: u32 },
    MissingNet { key: GridKey },
}

impl fmt::Display for LayoutError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LayoutError::InvalidBounds { max_x, max_y } => {
                write!(f, "invalid layout bounds max_x={max_x}, max_y={max_y} (both must be >= 1)")
            }
            LayoutError::Duplicate { key, first_net, second_net } => write!(
                f,
                "duplicate component at {key} (nets `{first_net}` and `{second_net}`)"
            ),
            LayoutError::OutOfBounds { component: c, max_x, max_y } => write!(
                f,
                "component ({}, {}, {}, {}) lies outside [0, {max_x}] x [0, {max_y}]",
                c.x, c.y, c.layer, c.net
            ),
            LayoutError::MissingNet { key } => write!(f, "component at {key} has an empty net name"),
        }
    }
}

/// A named standard cell: components plus maximum grid coordinates.
///
/// Invariants (checked by [`Layout::new`]): keys unique, every component inside
/// `[0, max_x] x [0, max_y]`, every net non-empty.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Layout {
    cell_name: String,
    max_x: u32,
    max_y: u32,
    components: BTreeMap<GridKey, String>,
}

impl Layout {
    pub fn new(
        cell_name: impl Into<String>,
        max_x: u32,
        max_y: u32,
        components: impl IntoIterator<Item = GridComponent>,
    ) -> Result<Self, LayoutError> {
        let mut layout = Layout::empty(cell_name, max_x, max_y)?;
        for c in components {
            layout.insert(c)?;
        }
        Ok(layout)
    }

    pub fn empty(cell_name: impl Into<String>, max_x: u32, max_y: u32) -> Result<Self, LayoutError> {
        if max_x < 1 || max_y < 1 {
            return Err(LayoutError::InvalidBounds { max_x, max_y });
        }
        Ok(Layout { cell_name: cell_name.into(), max_x, max_y, components: BTreeMap::new() })
    }

    /// Adds one component, rejecting duplicates and out-of-bounds coordinates.
    pub fn insert(&mut self, c: GridComponent) -> Result<(), LayoutError> {
        if c.net.is_empty() {
            return Err(LayoutError::MissingNet { key: c.key() });
        }
        if c.x > self.max_x || c.y > self.max_y {
            return Err(LayoutError::OutOfBounds { component: c, max_x: self.max_x, max_y: self.max_y });
        }
        let key = c.key();
        if let Some(first) = self.components.get(&key) {
            return Err(LayoutError::Duplicate { key, first_net: first.clone(), second_net: c.net });
        }
        self.components.insert(key, c.net);
        Ok(())
    }

    pub fn remove(&mut self, key: &GridKey) -> Option<String> {
        self.components.remove(key)
    }

    pub fn cell_name(&self) -> &str {
        &self.cell_name
    }

    pub fn set_cell_name(&mut self, name: impl Into<String>) {
        self.cell_name = name.into();
    }

    pub fn max_x(&self) -> u32 {
        self.max_x
    }

    pub fn max_y(&self) -> u32 {
        self.max_y
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn net_at(&self, key: &GridKey) -> Option<&str> {
        self.components.get(key).map(String::as_str)
    }

    pub fn contains(&self, key: &GridKey) -> bool {
        self.components.contains_key(key)
    }

    /// Components in canonical `(x, y, layer)` order.
    pub fn iter(&self) -> impl Iterator<Item = (GridKey, &str)> + '_ {
        self.components.iter().map(|(k, n)| (*k, n.as_str()))
    }

    pub fn components(&self) -> impl Iterator<Item = GridComponent> + '_ {
        self.components.iter().map(|(k, n)| GridComponent::new(k.x, k.y, k.layer, n.clone()))
    }

    pub fn on_layer(&self, layer: Layer) -> impl Iterator<Item = (GridKey, &str)> + '_ {
        self.iter().filter(move |(k, _)| k.layer == layer)
    }

    pub fn nets(&self) -> BTreeSet<&str> {
        self.components.values().map(String::as_str).collect()
    }
}

/// Violation class of a [`Drv`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DrvKind {
    Boundary,
    Spacing,
    Enclosure,
}

impl DrvKind {
    pub fn name(self) -> &'static str {
        match self {
            DrvKind::Boundary => "boundary",
            DrvKind::Spacing => "spacing",
            DrvKind::Enclosure => "enclosure",
        }
    }
}

impl fmt::Display for DrvKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DrvKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "boundary" => Ok(DrvKind::Boundary),
            "spacing" => Ok(DrvKind::Spacing),
            "enclosure" => Ok(DrvKind::Enclosure),
            other => Err(alloc::format!("unknown DRV kind `{other}`")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DrvError {
    MemberCount { kind: DrvKind, count: usize },
    RepeatedMember(GridKey),
}

impl fmt::Display for DrvError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DrvError::MemberCount { kind, count } => {
                write!(f, "{kind} DRV cannot have {count} member(s)")
            }
            DrvError::RepeatedMember(k) => write!(f, "DRV lists {k} twice"),
        }
    }
}

/// One design rule violation: one or two component keys plus the rule that fired.
///
/// Boundary DRVs have one member and spacing DRVs two. Enclosure DRVs have two
/// (via and the metal that fails to extend) or one (the via alone, when the metal
/// under it is missing). Two-member tuples are kept in canonical order.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Drv {
    // Single-member DRVs repeat the member in both slots.
    keys: [GridKey; 2],
    len: u8,
    kind: DrvKind,
    rule_id: String,
}

impl Drv {
    pub fn single(rule_id: impl Into<String>, kind: DrvKind, member: GridKey) -> Self {
        Drv { keys: [member, member], len: 1, kind, rule_id: rule_id.into() }
    }

    /// Builds a two-member DRV; the members are sorted into canonical order.
    pub fn pair(rule_id: impl Into<String>, kind: DrvKind, a: GridKey, b: GridKey) -> Self {
        let keys = if a <= b { [a, b] } else { [b, a] };
        Drv { keys, len: 2, kind, rule_id: rule_id.into() }
    }

    pub fn boundary(rule_id: impl Into<String>, member: GridKey) -> Self {
        Drv::single(rule_id, DrvKind::Boundary, member)
    }

    pub fn spacing(rule_id: impl Into<String>, a: GridKey, b: GridKey) -> Self {
        Drv::pair(rule_id, DrvKind::Spacing, a, b)
    }

    /// Validating constructor used by file readers.
    pub fn from_members(rule_id: impl Into<String>, kind: DrvKind, members: &[GridKey]) -> Result<Self, DrvError> {
        match (kind, members) {
            (DrvKind::Boundary | DrvKind::Enclosure, [m]) => Ok(Drv::single(rule_id, kind, *m)),
            (DrvKind::Spacing | DrvKind::Enclosure, [a, b]) => {
                if a == b {
                    Err(DrvError::RepeatedMember(*a))
                } else {
                    Ok(Drv::pair(rule_id, kind, *a, *b))
                }
            }
            _ => Err(DrvError::MemberCount { kind, count: members.len() }),
        }
    }

    pub fn rule_id(&self) -> &str {
        &self.rule_id
    }

    pub fn kind(&self) -> DrvKind {
        self.kind
    }

    pub fn members(&self) -> &[GridKey] {
        &self.keys[..self.len as usize]
    }

    pub fn is_pair(&self) -> bool {
        self.len == 2
    }

    pub fn with_rule_id(mut self, rule_id: impl Into<String>) -> Self {
        self.rule_id = rule_id.into();
        self
    }
}

impl fmt::Display for Drv {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.members() {
            [a, b] => write!(f, "{} {} ({a}, {b})", self.rule_id, self.kind),
            [m] => write!(f, "{} {} ({m})", self.rule_id, self.kind),
            _ => unreachable!(),
        }
    }
}

/// Sorts member tuples canonically and removes exact duplicates.
///
/// [`Drv`] constructors already keep pairs ordered, so this reduces to collecting
/// into an ordered set.
pub fn canonicalize_drvs(drvs: impl IntoIterator<Item = Drv>) -> BTreeSet<Drv> {
    drvs.into_iter().collect()
}
