//! Scoring of candidate checkers against golden DRV sets, and the debugging
//! report handed back to the agents.
//!
//! Scores are computed on grids: a grid is "violating" when it is a member of
//! any DRV. Per-cell counts are pooled before division (micro-average).

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::dsl::{run_program, RuleProgram};
use crate::kernel::Axis;
use crate::model::{Drv, DrvKind, GridKey, Layout};

/// Union of the member keys of all DRVs.
pub fn grid_sets<'a>(drvs: impl IntoIterator<Item = &'a Drv>) -> BTreeSet<GridKey> {
    drvs.into_iter().flat_map(|d| d.members().iter().copied()).collect()
}

/// A non-negative rational in lowest terms.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Fraction {
    pub num: u64,
    pub den: u64,
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

impl Fraction {
    pub const ZERO: Fraction = Fraction { num: 0, den: 1 };
    pub const ONE: Fraction = Fraction { num: 1, den: 1 };

    /// Panics when `den` is zero.
    pub fn new(num: u64, den: u64) -> Self {
        Self::reduce(num as u128, den as u128)
    }

    fn reduce(num: u128, den: u128) -> Self {
        assert!(den != 0, "zero denominator");
        let g = gcd(num, den).max(1);
        Fraction { num: (num / g) as u64, den: (den / g) as u64 }
    }

    pub fn to_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }

    pub fn is_one(self) -> bool {
        self.num == self.den
    }

    /// Harmonic mean `2pr / (p + r)`, or zero when `p + r = 0`.
    pub fn harmonic(p: Fraction, r: Fraction) -> Fraction {
        let (a, b, c, d) = (p.num as u128, p.den as u128, r.num as u128, r.den as u128);
        let sum = a * d + c * b;
        if sum == 0 {
            return Fraction::ZERO;
        }
        Self::reduce(2 * a * c, sum)
    }
}

impl fmt::Display for Fraction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

/// How precision and recall are defined when a denominator is empty.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmptyConvention {
    /// Empty predictions have precision 1, an empty golden set recall 1.
    #[default]
    Perfect,
    /// Any empty denominator scores 0.
    Zero,
}

/// Set sizes behind a score.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub true_positives: u64,
    pub predicted: u64,
    pub golden: u64,
}

impl Counts {
    pub fn of<T: Ord>(predicted: &BTreeSet<T>, golden: &BTreeSet<T>) -> Self {
        Counts {
            true_positives: predicted.intersection(golden).count() as u64,
            predicted: predicted.len() as u64,
            golden: golden.len() as u64,
        }
    }

    pub fn score(self, conv: EmptyConvention) -> Score {
        let Counts { true_positives: tp, predicted, golden } = self;
        let precision;
        let recall;
        match (conv, predicted, golden) {
            (EmptyConvention::Perfect, 0, 0) => {
                return Score { counts: self, precision: Fraction::ONE, recall: Fraction::ONE, f1: Fraction::ONE }
            }
            (EmptyConvention::Perfect, 0, g) => {
                precision = Fraction::ONE;
                recall = Fraction::new(tp, g);
            }
            (EmptyConvention::Perfect, p, 0) => {
                precision = Fraction::new(tp, p);
                recall = Fraction::ONE;
            }
            (_, p, g) => {
                precision = if p == 0 { Fraction::ZERO } else { Fraction::new(tp, p) };
                recall = if g == 0 { Fraction::ZERO } else { Fraction::new(tp, g) };
            }
        }
        Score { counts: self, precision, recall, f1: Fraction::harmonic(precision, recall) }
    }
}

impl core::ops::Add for Counts {
    type Output = Counts;

    fn add(self, o: Counts) -> Counts {
        Counts {
            true_positives: self.true_positives + o.true_positives,
            predicted: self.predicted + o.predicted,
            golden: self.golden + o.golden,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Score {
    pub counts: Counts,
    pub precision: Fraction,
    pub recall: Fraction,
    pub f1: Fraction,
}

impl Score {
    pub fn as_f64(&self) -> (f64, f64, f64) {
        (self.precision.to_f64(), self.recall.to_f64(), self.f1.to_f64())
    }
}

/// Grid-level score with the default empty-set convention.
pub fn score(predicted: &BTreeSet<Drv>, golden: &BTreeSet<Drv>) -> Score {
    score_with(predicted, golden, EmptyConvention::Perfect)
}

pub fn score_with(predicted: &BTreeSet<Drv>, golden: &BTreeSet<Drv>, conv: EmptyConvention) -> Score {
    Counts::of(&grid_sets(predicted), &grid_sets(golden)).score(conv)
}

/// One deduplicated false negative or false positive.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MismatchSummary {
    pub kind: DrvKind,
    pub dx: u32,
    pub dy: u32,
    pub example_cell: String,
    pub example_members: Vec<GridKey>,
    /// DRVs across the dataset sharing this signature.
    pub occurrences: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellScore {
    pub cell: String,
    pub counts: Counts,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EvalConfig {
    /// Summaries shown per category.
    pub cap: usize,
    pub convention: EmptyConvention,
    /// Axes that carry boundary conditions for this rule. When empty, a
    /// boundary DRV is measured against the nearest boundary on either axis.
    pub boundary_axes: &'static [Axis],
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig { cap: 8, convention: EmptyConvention::Perfect, boundary_axes: &[] }
    }
}

impl EvalConfig {
    pub fn with_boundary_axes(mut self, x: bool, y: bool) -> Self {
        self.boundary_axes = match (x, y) {
            (true, true) => &[Axis::X, Axis::Y],
            (true, false) => &[Axis::X],
            (false, true) => &[Axis::Y],
            (false, false) => &[],
        };
        self
    }
}

/// Result of one layout, before aggregation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CellOutcome {
    pub cell: String,
    pub max_x: u32,
    pub max_y: u32,
    pub grid: Counts,
    pub tuple: Counts,
    pub false_negatives: Vec<Drv>,
    pub false_positives: Vec<Drv>,
}

/// Compares one layout's predictions with its golden set.
///
/// Predictions are relabeled with the golden rule id. A DRV counts as a false
/// negative (positive) only when some member grid is missing from the other
/// side's grid set, matching the grid-level score.
pub fn compare_cell(layout: &Layout, rule_id: &str, predicted: &BTreeSet<Drv>, golden: &BTreeSet<Drv>) -> CellOutcome {
    let predicted: BTreeSet<Drv> = predicted.iter().map(|d| d.clone().with_rule_id(rule_id)).collect();
    let pg = grid_sets(&predicted);
    let gg = grid_sets(golden);
    let outside = |d: &Drv, grids: &BTreeSet<GridKey>| d.members().iter().any(|k| !grids.contains(k));
    CellOutcome {
        cell: layout.cell_name().into(),
        max_x: layout.max_x(),
        max_y: layout.max_y(),
        grid: Counts::of(&pg, &gg),
        tuple: Counts::of(&predicted, golden),
        false_negatives: golden.difference(&predicted).filter(|d| outside(d, &pg)).cloned().collect(),
        false_positives: predicted.difference(golden).filter(|d| outside(d, &gg)).cloned().collect(),
    }
}

/// Runs a program on one layout and compares it with the golden set.
pub fn evaluate_cell(prog: &RuleProgram, rule_id: &str, layout: &Layout, golden: &BTreeSet<Drv>) -> CellOutcome {
    compare_cell(layout, rule_id, &run_program(prog, layout), golden)
}

/// Per-rule evaluation summary, serialized as JSON and rendered as prose.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub rule_id: String,
    pub cells: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub score: Score,
    /// Exact-match DRV tuple score, logged alongside the grid score.
    pub tuple_score: Score,
    pub per_cell: Vec<CellScore>,
    pub false_negatives: Vec<MismatchSummary>,
    pub false_positives: Vec<MismatchSummary>,
    /// Unique signatures before the cap.
    pub false_negative_signatures: usize,
    pub false_positive_signatures: usize,
    pub footer: String,
}

impl EvalReport {
    pub fn is_perfect(&self) -> bool {
        self.score.f1.is_one()
    }
}

/// `(dx, dy)` signature of a mismatched DRV.
pub fn signature(d: &Drv, max_x: u32, max_y: u32, boundary_axes: &[Axis]) -> (u32, u32) {
    match (d.kind(), d.members()) {
        (_, [a, b]) => (a.x.abs_diff(b.x), a.y.abs_diff(b.y)),
        (DrvKind::Boundary, [m]) => {
            let dx = m.x.min(max_x.saturating_sub(m.x));
            let dy = m.y.min(max_y.saturating_sub(m.y));
            let axis = match boundary_axes {
                [only] => *only,
                _ if dy < dx => Axis::Y,
                _ => Axis::X,
            };
            match axis {
                Axis::X => (dx, 0),
                Axis::Y => (0, dy),
            }
        }
        _ => (0, 0),
    }
}

fn summarize<'a>(
    outcomes: &'a [CellOutcome],
    pick: impl Fn(&'a CellOutcome) -> &'a [Drv],
    cfg: &EvalConfig,
) -> (Vec<MismatchSummary>, usize) {
    let mut by_sig: BTreeMap<(DrvKind, u32, u32), MismatchSummary> = BTreeMap::new();
    for o in outcomes {
        for d in pick(o) {
            let (dx, dy) = signature(d, o.max_x, o.max_y, cfg.boundary_axes);
            by_sig
                .entry((d.kind(), dx, dy))
                .and_modify(|s| s.occurrences += 1)
                .or_insert_with(|| MismatchSummary {
                    kind: d.kind(),
                    dx,
                    dy,
                    example_cell: o.cell.clone(),
                    example_members: d.members().to_vec(),
                    occurrences: 1,
                });
        }
    }
    let total = by_sig.len();
    (by_sig.into_values().take(cfg.cap).collect(), total)
}

/// Fixed closing section of every report.
pub const REPORT_FOOTER: &str = "\
Goal: reach F1 = 1.000, i.e. the program must flag exactly the golden violating grids on every layout.
Available actions:
- Planner: call FoundryRuleAnalysis to re-read the rule description, or LayoutDRVAnalysis with cell names from this report to inspect the DRVs around those grids, then revise the grid-domain rule conditions.
- Programmer: edit the previous program to remove the false negatives and false positives listed above and resubmit it in one drcdsl block.
- Planner: reply TERMINATE once the report shows F1 = 1.000.";

/// Aggregates per-cell outcomes, in dataset order, into a report.
pub fn assemble_report(rule_id: &str, outcomes: &[CellOutcome], cfg: &EvalConfig) -> EvalReport {
    let grid = outcomes.iter().fold(Counts::default(), |acc, o| acc + o.grid);
    let tuple = outcomes.iter().fold(Counts::default(), |acc, o| acc + o.tuple);
    let score = grid.score(cfg.convention);
    let (p, r, f) = score.as_f64();
    let (false_negatives, fn_total) = summarize(outcomes, |o| &o.false_negatives, cfg);
    let (false_positives, fp_total) = summarize(outcomes, |o| &o.false_positives, cfg);
    EvalReport {
        rule_id: rule_id.into(),
        cells: outcomes.len(),
        precision: p,
        recall: r,
        f1: f,
        score,
        tuple_score: tuple.score(cfg.convention),
        per_cell: outcomes.iter().map(|o| CellScore { cell: o.cell.clone(), counts: o.grid }).collect(),
        false_negatives,
        false_positives,
        false_negative_signatures: fn_total,
        false_positive_signatures: fp_total,
        footer: REPORT_FOOTER.into(),
    }
}

/// Runs `prog` on every layout and scores it against the golden sets.
pub fn evaluate_program<'a>(
    prog: &RuleProgram,
    rule_id: &str,
    dataset: impl IntoIterator<Item = (&'a Layout, &'a BTreeSet<Drv>)>,
    cfg: &EvalConfig,
) -> EvalReport {
    let outcomes: Vec<CellOutcome> =
        dataset.into_iter().map(|(l, g)| evaluate_cell(prog, rule_id, l, g)).collect();
    assemble_report(rule_id, &outcomes, cfg)
}

fn write_summaries(out: &mut String, title: &str, list: &[MismatchSummary], total: usize) {
    let _ = write!(out, "{title}: {total} unique (kind, dx, dy) signature");
    if total != 1 {
        out.push('s');
    }
    if total > list.len() {
        let _ = write!(out, ", showing the first {}", list.len());
    }
    out.push('\n');
    for s in list {
        let _ = write!(out, "  - {} violation, dx={}, dy={}: e.g. {} at", s.kind, s.dx, s.dy, s.example_cell);
        for m in &s.example_members {
            let _ = write!(out, " {m}");
        }
        let _ = writeln!(out, " ({} DRV{})", s.occurrences, if s.occurrences == 1 { "" } else { "s" });
    }
}

/// The prose form sent to the agents.
pub fn render_report(r: &EvalReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "DRCCodeEval report for rule {} over {} layouts", r.rule_id, r.cells);
    let _ = writeln!(
        out,
        "Average performance (violating grids): precision {:.3}, recall {:.3}, F1 {:.3}",
        r.precision, r.recall, r.f1
    );
    let c = r.score.counts;
    let _ = writeln!(
        out,
        "Grids: {} flagged by the program, {} golden, {} in common",
        c.predicted, c.golden, c.true_positives
    );
    write_summaries(&mut out, "False negatives (golden DRVs the program missed)", &r.false_negatives, r.false_negative_signatures);
    write_summaries(&mut out, "False positives (DRVs the program reported wrongly)", &r.false_positives, r.false_positive_signatures);
    out.push_str(&r.footer);
    out.push('\n');
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Layer;

    fn k(x: u32, y: u32) -> GridKey {
        GridKey::new(x, y, Layer::M0)
    }

    #[test]
    fn grid_sets_union() {
        let a = Drv::spacing("R", k(2, 0), k(3, 2));
        let b = Drv::boundary("R", k(2, 0));
        let g = grid_sets([&a, &b]);
        assert_eq!(g.into_iter().collect::<Vec<_>>(), [k(2, 0), k(3, 2)]);
        assert!(grid_sets(&BTreeSet::new()).is_empty());
    }

    #[test]
    fn partial_recall() {
        let golden: BTreeSet<Drv> =
            [Drv::spacing("R", k(0, 0), k(1, 0)), Drv::spacing("R", k(5, 0), k(6, 0))].into_iter().collect();
        let pred: BTreeSet<Drv> = [Drv::spacing("R", k(0, 0), k(1, 0))].into_iter().collect();
        let s = score(&pred, &golden);
        assert_eq!((s.precision, s.recall, s.f1), (Fraction::ONE, Fraction::new(1, 2), Fraction::new(2, 3)));
        let t = score(&golden, &pred);
        assert_eq!((t.precision, t.recall), (s.recall, s.precision));
    }

    #[test]
    fn empty_conventions() {
        let e = BTreeSet::new();
        let one: BTreeSet<Drv> = [Drv::boundary("R", k(0, 0))].into_iter().collect();
        let s = score(&e, &e);
        assert!(s.f1.is_one() && s.precision.is_one() && s.recall.is_one());
        let s = score(&e, &one);
        assert_eq!((s.precision, s.recall, s.f1), (Fraction::ONE, Fraction::ZERO, Fraction::ZERO));
        let s = score(&one, &e);
        assert_eq!((s.precision, s.recall, s.f1), (Fraction::ZERO, Fraction::ONE, Fraction::ZERO));
        let z = score_with(&e, &e, EmptyConvention::Zero);
        assert_eq!(z.f1, Fraction::ZERO);
    }

    #[test]
    fn boundary_signature_uses_axis_hint() {
        let d = Drv::boundary("R", k(1, 0));
        assert_eq!(signature(&d, 8, 6, &[Axis::X]), (1, 0));
        assert_eq!(signature(&d, 8, 6, &[]), (0, 0));
        assert_eq!(signature(&Drv::boundary("R", k(7, 3)), 8, 6, &[]), (1, 0));
    }

    #[test]
    fn filtered_mismatches_and_cap() {
        let layout = Layout::empty("c", 20, 6).unwrap();
        let golden: BTreeSet<Drv> = [Drv::spacing("R", k(0, 0), k(1, 0))].into_iter().collect();
        // (1,0)-(2,0) is a tuple-level FP but (2,0) is not a golden grid, so it is kept.
        // (0,0) boundary is a tuple-level FP fully covered by golden grids, so it is dropped.
        let pred: BTreeSet<Drv> =
            [Drv::spacing("X", k(1, 0), k(2, 0)), Drv::boundary("X", k(0, 0))].into_iter().collect();
        let o = compare_cell(&layout, "R", &pred, &golden);
        assert_eq!(o.false_positives, [Drv::spacing("R", k(1, 0), k(2, 0))]);
        assert!(o.false_negatives.is_empty());

        let many: Vec<CellOutcome> = (0..12)
            .map(|i| {
                let p = [Drv::spacing("R", k(0, 0), k(i + 1, 0))].into_iter().collect();
                compare_cell(&layout, "R", &p, &BTreeSet::new())
            })
            .collect();
        let r = assemble_report("R", &many, &EvalConfig::default());
        assert_eq!(r.false_positives.len(), 8);
        assert_eq!(r.false_positive_signatures, 12);
        let text = render_report(&r);
        assert!(text.contains("showing the first 8"));
        assert!(text.ends_with(&alloc::format!("{REPORT_FOOTER}\n")));
    }
}
