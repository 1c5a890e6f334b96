//! Helpers shared by the integration tests: a deliberately naive checker and
//! random layout sources.
#![allow(dead_code)]

use std::collections::{BTreeSet, VecDeque};

use gridrc_core::model::{Drv, DrvKind, GridComponent, GridKey, Layer, Layout, RoutingDirection};
use gridrc_core::rules::{RuleKind, RuleSpec, SpacingDirection};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Same-shape labels by flood fill over explicit neighbor scans.
fn shape_labels(comps: &[GridComponent]) -> Vec<usize> {
    let mut label = vec![usize::MAX; comps.len()];
    let mut next = 0;
    for start in 0..comps.len() {
        if label[start] != usize::MAX {
            continue;
        }
        label[start] = next;
        let mut queue = VecDeque::from([start]);
        while let Some(i) = queue.pop_front() {
            for j in 0..comps.len() {
                if label[j] != usize::MAX {
                    continue;
                }
                let (a, b) = (&comps[i], &comps[j]);
                let touching = match a.layer.routing_direction() {
                    RoutingDirection::Horizontal => a.y == b.y && a.x.abs_diff(b.x) == 1,
                    RoutingDirection::Vertical => a.x == b.x && a.y.abs_diff(b.y) == 1,
                    RoutingDirection::None => false,
                };
                if touching && a.net == b.net {
                    label[j] = next;
                    queue.push_back(j);
                }
            }
        }
        next += 1;
    }
    label
}

/// Exhaustive pairwise reference checker. Shares no code with the kernel.
pub fn brute_check(layout: &Layout, spec: &RuleSpec) -> BTreeSet<Drv> {
    let id = spec.rule_id.as_str();
    let comps: Vec<GridComponent> = layout.components().filter(|c| c.layer == spec.layer).collect();
    let mut out = BTreeSet::new();

    for c in &comps {
        if let Some(m) = spec.x_boundary_margin {
            if c.x <= m || c.x as i64 >= layout.max_x() as i64 - m as i64 {
                out.insert(Drv::boundary(id, c.key()));
            }
        }
        if let Some(m) = spec.y_boundary_margin {
            if c.y <= m || c.y as i64 >= layout.max_y() as i64 - m as i64 {
                out.insert(Drv::boundary(id, c.key()));
            }
        }
    }

    if spec.kind != RuleKind::Enclosure {
        let labels = shape_labels(&comps);
        let direction = if spec.kind == RuleKind::ViaSpacing {
            SpacingDirection::Both
        } else {
            spec.direction.unwrap()
        };
        let (horizontal, vertical) = match direction {
            SpacingDirection::Horizontal => (true, false),
            SpacingDirection::Vertical => (false, true),
            SpacingDirection::Both => (true, true),
        };
        for i in 0..comps.len() {
            for j in i + 1..comps.len() {
                let (a, b) = (&comps[i], &comps[j]);
                if spec.kind == RuleKind::Spacing && labels[i] == labels[j] {
                    continue;
                }
                let dx = a.x.abs_diff(b.x) as i64;
                let dy = a.y.abs_diff(b.y) as i64;
                let t = spec.spacing_threshold as i64;
                let ok_prl = |overlap: i64| spec.prl_threshold.is_none_or(|p| overlap >= p);
                if (horizontal && dx > 0 && dx <= t && ok_prl(1 - dy)) || (vertical && dy > 0 && dy <= t && ok_prl(1 - dx)) {
                    out.insert(Drv::spacing(id, a.key(), b.key()));
                }
            }
        }
    } else {
        let metal = spec.enclosing_layer.unwrap();
        let ext = spec.enclosure_extension.unwrap() as i64;
        let horizontal = metal.routing_direction() == RoutingDirection::Horizontal;
        let all: Vec<GridComponent> = layout.components().collect();
        let find = |x: i64, y: i64, net: &str| {
            all.iter().find(|c| c.layer == metal && c.x as i64 == x && c.y as i64 == y && c.net == net).map(|c| c.key())
        };
        for v in &comps {
            let Some(under) = find(v.x as i64, v.y as i64, &v.net) else {
                out.insert(Drv::single(id, DrvKind::Enclosure, v.key()));
                continue;
            };
            for side in [-1, 1] {
                let mut last = under;
                for d in 1..=ext {
                    let (x, y) = if horizontal { (v.x as i64 + side * d, v.y as i64) } else { (v.x as i64, v.y as i64 + side * d) };
                    match find(x, y, &v.net) {
                        Some(k) => last = k,
                        None => {
                            out.insert(Drv::pair(id, DrvKind::Enclosure, v.key(), last));
                            break;
                        }
                    }
                }
            }
        }
    }
    out
}

/// Uniformly scattered components; few nets so same-net shapes are common.
pub fn random_layout(rng: &mut ChaCha8Rng, max_components: usize) -> Layout {
    let max_x = rng.gen_range(3..=14);
    let max_y = rng.gen_range(3..=10);
    let mut layout = Layout::empty("rand", max_x, max_y).unwrap();
    let n = rng.gen_range(0..=max_components);
    for _ in 0..n {
        let layer = Layer::ALL[rng.gen_range(0..5)];
        let c = GridComponent::new(
            rng.gen_range(0..=max_x),
            rng.gen_range(0..=max_y),
            layer,
            format!("N{}", rng.gen_range(0..3)),
        );
        let _ = layout.insert(c);
    }
    layout
}

/// Layouts built from short same-net wires, which exercise shape merging and
/// enclosure much more than scattered points.
pub fn wired_layout(rng: &mut ChaCha8Rng, max_components: usize) -> Layout {
    let max_x = rng.gen_range(4..=16);
    let max_y = rng.gen_range(4..=10);
    let mut layout = Layout::empty("wired", max_x, max_y).unwrap();
    while layout.len() < max_components {
        let layer = Layer::ALL[rng.gen_range(0..5)];
        let net = format!("N{}", rng.gen_range(0..4));
        let (x, y) = (rng.gen_range(0..=max_x), rng.gen_range(0..=max_y));
        let len = if layer.is_via() { 1 } else { rng.gen_range(1..=4) };
        let before = layout.len();
        for i in 0..len {
            let (cx, cy) = match layer.routing_direction() {
                RoutingDirection::Vertical => (x, y + i),
                _ => (x + i, y),
            };
            if cx > max_x || cy > max_y || layout.len() >= max_components {
                break;
            }
            let _ = layout.insert(GridComponent::new(cx, cy, layer, net.clone()));
            if layer == Layer::Via1 && rng.gen_bool(0.7) {
                for dx in [-1i64, 0, 1] {
                    let mx = cx as i64 + dx;
                    if (0..=max_x as i64).contains(&mx) && layout.len() < max_components {
                        let _ = layout.insert(GridComponent::new(mx as u32, cy, Layer::M2, net.clone()));
                    }
                }
            }
        }
        if layout.len() == before && rng.gen_bool(0.05) {
            break;
        }
    }
    layout
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn key(x: u32, y: u32, layer: Layer) -> GridKey {
    GridKey::new(x, y, layer)
}
