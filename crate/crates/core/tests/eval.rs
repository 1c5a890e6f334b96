mod common;

use std::collections::BTreeSet;

use common::{key, random_layout, rng};
use gridrc_core::dataset::{generate_dataset, label_dataset, GenParams, Labels};
use gridrc_core::dsl::{parse_program, reference_program, Clause};
use gridrc_core::eval::{evaluate_program, render_report, score, EvalConfig, Fraction};
use gridrc_core::model::{Drv, DrvKind, Layer, Layout};
use gridrc_core::rules::builtin_demo_techfile;
use proptest::prelude::*;

fn dataset(count: usize) -> (Vec<Layout>, Vec<Labels>) {
    let tech = builtin_demo_techfile();
    let layouts = generate_dataset(2, count, &GenParams::default(), &tech).unwrap();
    let labels = label_dataset(&layouts, &tech).unwrap();
    (layouts, labels)
}

fn cases<'a>(layouts: &'a [Layout], labels: &'a [Labels], rule: &str) -> Vec<(&'a Layout, &'a BTreeSet<Drv>)> {
    layouts.iter().zip(labels).map(|(l, g)| (l, &g[rule])).collect()
}

#[test]
fn reference_programs_are_perfect() {
    let (layouts, labels) = dataset(80);
    for spec in builtin_demo_techfile().rules {
        let prog = parse_program(reference_program(&spec.rule_id).unwrap()).unwrap();
        let r = evaluate_program(&prog, &spec.rule_id, cases(&layouts, &labels, &spec.rule_id), &EvalConfig::default());
        assert_eq!(r.score.f1, Fraction::ONE, "{}", spec.rule_id);
        assert!(r.false_negatives.is_empty() && r.false_positives.is_empty());
        assert_eq!(r.tuple_score.f1, Fraction::ONE);
    }
}

#[test]
fn dropping_boundary_clauses_leaves_only_boundary_misses() {
    let (layouts, labels) = dataset(80);
    let full = parse_program(reference_program("M0.S.1").unwrap()).unwrap();
    let spacing_only = full.with_clauses(full.clauses.iter().filter(|c| matches!(c, Clause::Spacing { .. })).cloned().collect());
    let cfg = EvalConfig::default().with_boundary_axes(true, false);
    let r = evaluate_program(&spacing_only, "M0.S.1", cases(&layouts, &labels, "M0.S.1"), &cfg);
    assert!(!r.false_negatives.is_empty());
    assert!(r.false_negatives.iter().all(|s| s.kind == DrvKind::Boundary && s.dy == 0));
    assert!(r.false_positives.is_empty());
    assert_eq!(r.score.precision, Fraction::ONE);

    // Count the missed grids by hand.
    let mut missed = 0;
    for (l, g) in layouts.iter().zip(&labels) {
        let golden: BTreeSet<_> = g["M0.S.1"].iter().flat_map(|d| d.members().to_vec()).collect();
        let predicted: BTreeSet<_> = gridrc_core::dsl::run_program(&spacing_only, l)
            .iter()
            .flat_map(|d| d.members().to_vec())
            .collect();
        missed += golden.difference(&predicted).count() as u64;
    }
    assert_eq!(r.score.counts.golden - r.score.counts.true_positives, missed);
}

#[test]
fn loose_threshold_reports_distance_two_false_positives() {
    let (layouts, labels) = dataset(207);
    let src = reference_program("M0.S.1").unwrap().replace("spacing horizontal <= 1", "spacing horizontal <= 2");
    let prog = parse_program(&src).unwrap();
    let r = evaluate_program(&prog, "M0.S.1", cases(&layouts, &labels, "M0.S.1"), &EvalConfig::default());
    assert!(r.f1 < 1.0);
    assert!(r.false_negatives.is_empty());
    assert!(r.false_positives.iter().any(|s| (s.kind, s.dx, s.dy) == (DrvKind::Spacing, 2, 0)), "{:?}", r.false_positives);
    let text = render_report(&r);
    assert!(text.contains("spacing violation, dx=2, dy=0"));
    assert_eq!(text, render_report(&evaluate_program(&prog, "M0.S.1", cases(&layouts, &labels, "M0.S.1"), &EvalConfig::default())));
}

#[test]
fn hand_computed_partial_score() {
    let g: BTreeSet<Drv> = [
        Drv::spacing("R", key(0, 0, Layer::M0), key(1, 0, Layer::M0)),
        Drv::spacing("R", key(4, 0, Layer::M0), key(5, 0, Layer::M0)),
    ]
    .into();
    let p: BTreeSet<Drv> = [Drv::spacing("R", key(0, 0, Layer::M0), key(1, 0, Layer::M0))].into();
    let s = score(&p, &g);
    assert_eq!((s.precision, s.recall, s.f1), (Fraction::ONE, Fraction::new(1, 2), Fraction::new(2, 3)));
    assert_eq!(format!("{:.3}", s.f1.to_f64()), "0.667");
}

fn arb_drvs() -> impl Strategy<Value = BTreeSet<Drv>> {
    any::<u64>().prop_map(|seed| {
        let layout = random_layout(&mut rng(seed), 20);
        let keys: Vec<_> = layout.iter().map(|(k, _)| k).collect();
        let mut out = BTreeSet::new();
        for w in keys.windows(2).step_by(2) {
            out.insert(Drv::spacing("R", w[0], w[1]));
        }
        if let Some(k) = keys.last() {
            out.insert(Drv::boundary("R", *k));
        }
        out
    })
}

proptest! {
    #[test]
    fn swapping_sides_swaps_precision_and_recall(p in arb_drvs(), g in arb_drvs()) {
        let a = score(&p, &g);
        let b = score(&g, &p);
        prop_assert_eq!(a.precision, b.recall);
        prop_assert_eq!(a.recall, b.precision);
        prop_assert_eq!(a.f1, b.f1);
    }
}
