use alloc::collections::BTreeSet;

use super::{Clause, RuleProgram};
use crate::kernel::{self, SpacingQuery};
use crate::model::{Drv, DrvKind, Layout};

/// Evaluates every clause and returns the union of their DRVs.
pub fn run_program(prog: &RuleProgram, layout: &Layout) -> BTreeSet<Drv> {
    let id = prog.rule_id.as_str();
    let mut out = BTreeSet::new();
    for clause in &prog.clauses {
        match clause {
            Clause::Boundary { axis, cmp, bound } => {
                let b = bound.eval(layout.max_x(), layout.max_y());
                for k in kernel::boundary_hits(layout, prog.layer, *axis, *cmp, b) {
                    out.insert(Drv::boundary(id, k));
                }
            }
            Clause::Spacing { axis, prl, exemption, .. } => {
                let q = SpacingQuery {
                    layer: prog.layer,
                    axis: *axis,
                    max_distance: clause.max_distance().unwrap_or(0),
                    prl: *prl,
                    exemption: *exemption,
                };
                for (a, b) in kernel::spacing_pairs(layout, &q) {
                    out.insert(Drv::spacing(id, a, b));
                }
            }
            Clause::Enclosure { metal, extension, axis } => {
                for f in kernel::enclosure_failures(layout, prog.layer, *metal, *extension, *axis) {
                    out.insert(match f.metal {
                        Some(m) => Drv::pair(id, DrvKind::Enclosure, f.via, m),
                        None => Drv::single(id, DrvKind::Enclosure, f.via),
                    });
                }
            }
        }
    }
    out
}
