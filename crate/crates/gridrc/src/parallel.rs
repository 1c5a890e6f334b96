//! Data-parallel evaluation over a dataset.

use std::collections::BTreeSet;

use gridrc_core::dsl::RuleProgram;
use gridrc_core::eval::{assemble_report, evaluate_cell, CellOutcome, EvalConfig, EvalReport};
use gridrc_core::model::{Drv, Layout};
use gridrc_core::rules::RuleSpec;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Report settings for a rule: boundary signatures use the rule's margin axes.
pub fn eval_config(spec: &RuleSpec) -> EvalConfig {
    EvalConfig::default().with_boundary_axes(spec.x_boundary_margin.is_some(), spec.y_boundary_margin.is_some())
}

/// Thread pool with `jobs` workers; `None` or 0 uses one per core.
pub fn pool(jobs: Option<usize>) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| Error::Usage(format!("cannot start {} worker threads: {e}", jobs.unwrap_or(0))))
}

/// Same result as the sequential evaluator, independent of the worker count.
pub fn evaluate_parallel(
    pool: &rayon::ThreadPool,
    prog: &RuleProgram,
    rule_id: &str,
    cases: &[(&Layout, &BTreeSet<Drv>)],
    cfg: &EvalConfig,
) -> EvalReport {
    let outcomes: Vec<CellOutcome> =
        pool.install(|| cases.par_iter().map(|(l, g)| evaluate_cell(prog, rule_id, l, g)).collect());
    assemble_report(rule_id, &outcomes, cfg)
}
