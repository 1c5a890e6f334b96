//! Parameterized reference checkers for the seven rule archetypes.
//!
//! [`check_rule`] is the golden labeler: dataset labels and acceptance checks are
//! computed with it.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::convert::GridTransform;
use crate::kernel::{self, Axis, Cmp, Exemption, SpacingQuery};
use crate::model::{Drv, DrvKind, Layer, Layout, RoutingDirection};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleKind {
    Spacing,
    ViaSpacing,
    Enclosure,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpacingDirection {
    Horizontal,
    Vertical,
    Both,
}

impl SpacingDirection {
    /// Axes along which spacing is measured.
    pub fn axes(self) -> &'static [Axis] {
        match self {
            SpacingDirection::Horizontal => &[Axis::X],
            SpacingDirection::Vertical => &[Axis::Y],
            SpacingDirection::Both => &[Axis::X, Axis::Y],
        }
    }
}

/// One design rule. A pair is compliant when its spacing is `> spacing_threshold`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RuleSpec {
    pub rule_id: String,
    pub kind: RuleKind,
    pub layer: Layer,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub enclosing_layer: Option<Layer>,
    #[serde(default)]
    pub spacing_threshold: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub direction: Option<SpacingDirection>,
    /// The spacing condition applies only when PRL `>=` this value.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prl_threshold: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_boundary_margin: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y_boundary_margin: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub enclosure_extension: Option<u32>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RuleError {
    MissingField { rule: String, field: &'static str },
    ForbiddenField { rule: String, field: &'static str },
    WrongLayer { rule: String, layer: Layer, reason: &'static str },
    DuplicateRule(String),
    EmptyRuleId,
    UnknownRule(String),
}

impl fmt::Display for RuleError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RuleError::MissingField { rule, field } => write!(f, "rule {rule}: missing `{field}`"),
            RuleError::ForbiddenField { rule, field } => {
                write!(f, "rule {rule}: `{field}` is not allowed for this rule kind")
            }
            RuleError::WrongLayer { rule, layer, reason } => write!(f, "rule {rule}: layer {layer} {reason}"),
            RuleError::DuplicateRule(id) => write!(f, "duplicate rule id `{id}`"),
            RuleError::EmptyRuleId => f.write_str("rule id must not be empty"),
            RuleError::UnknownRule(id) => write!(f, "unknown rule `{id}`"),
        }
    }
}

impl RuleSpec {
    pub fn validate(&self) -> Result<(), RuleError> {
        let rule = || self.rule_id.clone();
        if self.rule_id.is_empty() {
            return Err(RuleError::EmptyRuleId);
        }
        match self.kind {
            RuleKind::Enclosure => {
                let Some(metal) = self.enclosing_layer else {
                    return Err(RuleError::MissingField { rule: rule(), field: "enclosing_layer" });
                };
                if self.enclosure_extension.is_none() {
                    return Err(RuleError::MissingField { rule: rule(), field: "enclosure_extension" });
                }
                if !self.layer.is_via() {
                    return Err(RuleError::WrongLayer { rule: rule(), layer: self.layer, reason: "is not a via layer" });
                }
                if metal.is_via() || metal.routing_direction() == RoutingDirection::None {
                    return Err(RuleError::WrongLayer { rule: rule(), layer: metal, reason: "cannot enclose a via" });
                }
                if self.direction.is_some() {
                    return Err(RuleError::ForbiddenField { rule: rule(), field: "direction" });
                }
                if self.prl_threshold.is_some() {
                    return Err(RuleError::ForbiddenField { rule: rule(), field: "prl_threshold" });
                }
            }
            RuleKind::Spacing | RuleKind::ViaSpacing => {
                if self.enclosing_layer.is_some() {
                    return Err(RuleError::ForbiddenField { rule: rule(), field: "enclosing_layer" });
                }
                if self.enclosure_extension.is_some() {
                    return Err(RuleError::ForbiddenField { rule: rule(), field: "enclosure_extension" });
                }
                if self.kind == RuleKind::Spacing && self.direction.is_none() {
                    return Err(RuleError::MissingField { rule: rule(), field: "direction" });
                }
                if self.kind == RuleKind::ViaSpacing {
                    if !self.layer.is_via() {
                        return Err(RuleError::WrongLayer { rule: rule(), layer: self.layer, reason: "is not a via layer" });
                    }
                    if matches!(self.direction, Some(d) if d != SpacingDirection::Both) {
                        return Err(RuleError::ForbiddenField { rule: rule(), field: "direction" });
                    }
                }
            }
        }
        Ok(())
    }

    pub fn spacing_direction(&self) -> SpacingDirection {
        match self.kind {
            RuleKind::ViaSpacing => SpacingDirection::Both,
            _ => self.direction.unwrap_or(SpacingDirection::Both),
        }
    }

    /// Axis along which the enclosing metal must extend past the via.
    pub fn enclosure_axis(&self) -> Option<Axis> {
        match self.enclosing_layer?.routing_direction() {
            RoutingDirection::Horizontal => Some(Axis::X),
            RoutingDirection::Vertical => Some(Axis::Y),
            RoutingDirection::None => None,
        }
    }

    /// The kernel queries a spacing rule expands to, one per measured axis.
    pub fn spacing_queries(&self) -> Vec<SpacingQuery> {
        if self.kind == RuleKind::Enclosure {
            return Vec::new();
        }
        let exemption = match self.kind {
            RuleKind::ViaSpacing => Exemption::None,
            _ => Exemption::SameShape,
        };
        self.spacing_direction()
            .axes()
            .iter()
            .map(|&axis| SpacingQuery {
                layer: self.layer,
                axis,
                max_distance: self.spacing_threshold as i64,
                prl: self.prl_threshold.map(|t| (Cmp::Ge, t)),
                exemption,
            })
            .collect()
    }
}

/// A named rule deck with optional report-to-grid transform.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TechFile {
    pub name: String,
    pub rules: Vec<RuleSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_transform: Option<GridTransform>,
}

impl TechFile {
    pub fn validate(&self) -> Result<(), RuleError> {
        let mut seen = BTreeSet::new();
        for r in &self.rules {
            r.validate()?;
            if !seen.insert(r.rule_id.as_str()) {
                return Err(RuleError::DuplicateRule(r.rule_id.clone()));
            }
        }
        Ok(())
    }

    pub fn rule(&self, id: &str) -> Option<&RuleSpec> {
        self.rules.iter().find(|r| r.rule_id == id)
    }

    pub fn require_rule(&self, id: &str) -> Result<&RuleSpec, RuleError> {
        self.rule(id).ok_or_else(|| RuleError::UnknownRule(id.into()))
    }

    pub fn rule_ids(&self) -> impl Iterator<Item = &str> {
        self.rules.iter().map(|r| r.rule_id.as_str())
    }

    /// Runs every rule on `layout`.
    pub fn check_all(&self, layout: &Layout) -> Result<BTreeMap<String, BTreeSet<Drv>>, RuleError> {
        self.rules.iter().map(|r| Ok((r.rule_id.clone(), check_rule(layout, r)?))).collect()
    }
}

fn spacing(
    rule_id: &str,
    kind: RuleKind,
    layer: Layer,
    direction: Option<SpacingDirection>,
    threshold: u32,
    prl_threshold: Option<i64>,
) -> RuleSpec {
    RuleSpec {
        rule_id: rule_id.into(),
        kind,
        layer,
        enclosing_layer: None,
        spacing_threshold: threshold,
        direction,
        prl_threshold,
        x_boundary_margin: None,
        y_boundary_margin: None,
        enclosure_extension: None,
    }
}

/// Seven-rule demonstration deck.
///
/// M0.S.1 uses `> 1` spacing at PRL `>= -1` with an x-boundary margin of 1. All
/// other values are synthetic and do not describe any foundry process.
pub fn builtin_demo_techfile() -> TechFile {
    use RuleKind::*;
    use SpacingDirection::*;
    let rules = alloc::vec![
        RuleSpec {
            x_boundary_margin: Some(1),
            ..spacing("M0.S.1", Spacing, Layer::M0, Some(Horizontal), 1, Some(-1))
        },
        spacing("M0.S.2", Spacing, Layer::M0, Some(Horizontal), 2, Some(1)),
        spacing("VIA0.S.1", ViaSpacing, Layer::Via0, Some(Both), 2, Some(0)),
        RuleSpec {
            y_boundary_margin: Some(1),
            ..spacing("M1.S.1", Spacing, Layer::M1, Some(Vertical), 1, Some(-1))
        },
        spacing("M1.S.2", Spacing, Layer::M1, Some(Vertical), 2, Some(1)),
        spacing("VIA1.S.1", ViaSpacing, Layer::Via1, Some(Both), 3, Some(1)),
        RuleSpec {
            rule_id: "M2.S.1".into(),
            kind: Enclosure,
            layer: Layer::Via1,
            enclosing_layer: Some(Layer::M2),
            spacing_threshold: 0,
            direction: None,
            prl_threshold: None,
            x_boundary_margin: None,
            y_boundary_margin: None,
            enclosure_extension: Some(1),
        },
    ];
    TechFile {
        name: "demo-synthetic".into(),
        rules,
        grid_transform: Some(GridTransform::default()),
    }
}

/// Checks one rule on a layout and returns the canonical DRV set.
pub fn check_rule(layout: &Layout, spec: &RuleSpec) -> Result<BTreeSet<Drv>, RuleError> {
    spec.validate()?;
    let id = spec.rule_id.as_str();
    let mut out = BTreeSet::new();

    if let Some(m) = spec.x_boundary_margin {
        boundary(layout, spec.layer, Axis::X, m, layout.max_x(), id, &mut out);
    }
    if let Some(m) = spec.y_boundary_margin {
        boundary(layout, spec.layer, Axis::Y, m, layout.max_y(), id, &mut out);
    }

    for q in spec.spacing_queries() {
        for (a, b) in kernel::spacing_pairs(layout, &q) {
            out.insert(Drv::spacing(id, a, b));
        }
    }

    if spec.kind == RuleKind::Enclosure {
        let (Some(metal), Some(ext), Some(axis)) =
            (spec.enclosing_layer, spec.enclosure_extension, spec.enclosure_axis())
        else {
            unreachable!("validated enclosure rule")
        };
        for f in kernel::enclosure_failures(layout, spec.layer, metal, ext, axis) {
            out.insert(match f.metal {
                Some(m) => Drv::pair(id, DrvKind::Enclosure, f.via, m),
                None => Drv::single(id, DrvKind::Enclosure, f.via),
            });
        }
    }
    Ok(out)
}

fn boundary(layout: &Layout, layer: Layer, axis: Axis, margin: u32, max: u32, id: &str, out: &mut BTreeSet<Drv>) {
    let m = margin as i64;
    let hits = kernel::boundary_hits(layout, layer, axis, Cmp::Le, m)
        .into_iter()
        .chain(kernel::boundary_hits(layout, layer, axis, Cmp::Ge, max as i64 - m));
    out.extend(hits.map(|k| Drv::boundary(id, k)));
}
