//! Initial prompt: a fixed part shared by every rule and a rule-dependent part.

use std::collections::BTreeSet;

use gridrc_core::dsl::GRAMMAR;
use gridrc_core::model::{Drv, Layout};
use gridrc_core::render::render_ascii;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::backend::Image;
use crate::dataset_dir::Dataset;
use crate::error::{Error, Result};

pub const TASK: &str = "\
Task: write a design rule checker for one design rule of a grid-based standard-cell layout.
A layout has routing layers M0 (horizontal), VIA0, M1 (vertical), VIA1 and M2 (horizontal). Every
component occupies one routing grid (x, y) on one layer and belongs to a net. The cell spans
grids 0..=max_x by 0..=max_y.";

pub const CONTRACT: &str = "\
Input/output contract: the checker is drc(layout, max_x, max_y) -> [DRV]. A DRV is either a pair
((x1, y1, layer), (x2, y2, layer)) of components that violate the rule together, or a single
(x, y, layer) component. Reply with exactly one fenced code block tagged drcdsl containing the
whole program; the program is scored by the violating grids it reports.";

pub const STEPS: &str = "\
Step-by-step guide:
1. Read the rule description and decide which components the rule constrains.
2. Translate every condition into the grid domain: distances in grids, the measurement
   direction, parallel run length (PRL) conditions and implicit cell-boundary conditions.
3. Decide which pairs are exempt, e.g. grids of one contiguous wire.
4. Express each condition as one clause of the language below.
5. Compare the result with the example layouts and their golden DRVs.";

/// Fixed part: task, contract, guide and grammar.
pub fn fixed_part() -> String {
    format!("{TASK}\n\n{CONTRACT}\n\n{STEPS}\n\nChecker language (EBNF):\n{GRAMMAR}")
}

pub struct Prompt {
    pub text: String,
    pub images: Vec<Image>,
    pub example_cells: Vec<String>,
}

/// Components and golden DRVs of one layout as text.
pub fn describe_cell(layout: &Layout, rule_id: &str, golden: &BTreeSet<Drv>) -> String {
    let mut s = format!("Components of {} (x, y, layer, net):\n", layout.cell_name());
    for c in layout.components() {
        s.push_str(&format!("  ({}, {}, {}) {}\n", c.x, c.y, c.layer, c.net));
    }
    s.push_str(&format!("Golden {rule_id} DRVs of {}:", layout.cell_name()));
    if golden.is_empty() {
        s.push_str(" none\n");
    } else {
        s.push('\n');
        for d in golden {
            s.push_str(&format!("  {d}\n"));
        }
    }
    s
}

pub fn svg_image(layout: &Layout, golden: &BTreeSet<Drv>) -> Image {
    Image {
        name: format!("{}.svg", layout.cell_name()),
        media_type: "image/svg+xml".into(),
        data: gridrc_core::render::render_svg(layout, Some(golden)).into_bytes(),
    }
}

/// Rule text plus, with vision, the rule image; otherwise an omission notice.
pub fn rule_section(ds: &Dataset, rule_id: &str, vision: bool) -> Result<(String, Vec<Image>)> {
    let mut text = format!("Design rule description:\n{}", ds.rule_text(rule_id)?);
    let mut images = Vec::new();
    match ds.rule_image(rule_id) {
        Some((media_type, data)) if vision => {
            let name = format!("rule {rule_id} figure");
            text.push_str(&format!("The attached image `{name}` illustrates the rule.\n"));
            images.push(Image { name, media_type, data });
        }
        Some(_) => text.push_str("[image omitted] The rule figure is not shown to this backend; rely on the text.\n"),
        None => {}
    }
    Ok((text, images))
}

/// Two distinct layouts containing the rule's DRVs, drawn with `seed`.
pub fn pick_examples(ds: &Dataset, rule_id: &str, seed: u64) -> Result<Vec<usize>> {
    let violating: Vec<usize> =
        ds.labels.iter().enumerate().filter(|(_, l)| l.get(rule_id).is_some_and(|d| !d.is_empty())).map(|(i, _)| i).collect();
    if violating.len() < 2 {
        return Err(Error::data(format!(
            "rule {rule_id} needs two layouts with DRVs for the prompt, dataset has {}",
            violating.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked: Vec<usize> = sample(&mut rng, violating.len(), 2).into_iter().map(|i| violating[i]).collect();
    picked.sort_unstable();
    Ok(picked)
}

pub fn build_initial_prompt(ds: &Dataset, rule_id: &str, seed: u64, vision: bool) -> Result<Prompt> {
    ds.rule(rule_id)?;
    let picked = pick_examples(ds, rule_id, seed)?;
    let (rule_text, mut images) = rule_section(ds, rule_id, vision)?;
    let mut text = fixed_part();
    text.push_str(&format!("\nTarget rule: {rule_id}\n\n{rule_text}\nExample layouts with golden DRVs:\n"));
    let mut example_cells = Vec::new();
    for i in picked {
        let (layout, golden) = (&ds.layouts[i], &ds.labels[i][rule_id]);
        text.push('\n');
        text.push_str(&render_ascii(layout, Some(golden)));
        text.push_str(&describe_cell(layout, rule_id, golden));
        if vision {
            images.push(svg_image(layout, golden));
        }
        example_cells.push(layout.cell_name().to_string());
    }
    Ok(Prompt { text, images, example_cells })
}
