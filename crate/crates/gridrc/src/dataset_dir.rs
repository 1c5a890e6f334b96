//! On-disk dataset: `cells/`, `golden/<rule>/`, `render/`, `rules/`, `techfile.json`
//! and `manifest.json`.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use gridrc_core::dataset::{coverage_target, generate_dataset, violating_grid_fraction, GenParams, Labels};
use gridrc_core::model::{Drv, Layout, RoutingDirection};
use gridrc_core::render::render_svg;
use gridrc_core::rules::{RuleKind, RuleSpec, SpacingDirection, TechFile};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub format: u32,
    pub seed: u64,
    pub count: usize,
    pub params: GenParams,
    pub techfile: String,
    pub rules: Vec<String>,
    pub cells: Vec<String>,
    /// Violating layouts per rule.
    pub coverage: BTreeMap<String, usize>,
    pub coverage_target: usize,
    pub violating_grid_fraction: f64,
}

/// A loaded dataset directory.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub root: PathBuf,
    pub manifest: Manifest,
    pub tech: TechFile,
    pub layouts: Vec<Layout>,
    pub labels: Vec<Labels>,
}

impl Dataset {
    pub fn rule(&self, id: &str) -> Result<&RuleSpec> {
        self.tech.require_rule(id).map_err(|e| Error::Usage(e.to_string()))
    }

    /// `(layout, golden)` pairs for one rule, in manifest order.
    pub fn cases(&self, rule: &str) -> Vec<(&Layout, &BTreeSet<Drv>)> {
        static EMPTY: BTreeSet<Drv> = BTreeSet::new();
        self.layouts.iter().zip(&self.labels).map(|(l, g)| (l, g.get(rule).unwrap_or(&EMPTY))).collect()
    }

    pub fn layout(&self, cell: &str) -> Option<(&Layout, &Labels)> {
        self.layouts.iter().zip(&self.labels).find(|(l, _)| l.cell_name() == cell)
    }

    pub fn rule_text(&self, id: &str) -> Result<String> {
        io::read_text(&self.root.join("rules").join(format!("{id}.txt")))
    }

    /// Rule figure, preferring an operator-supplied PNG over the generated SVG.
    pub fn rule_image(&self, id: &str) -> Option<(String, Vec<u8>)> {
        for (ext, mime) in [("png", "image/png"), ("svg", "image/svg+xml")] {
            let p = self.root.join("rules").join(format!("{id}.{ext}"));
            if let Ok(bytes) = std::fs::read(&p) {
                return Some((mime.to_string(), bytes));
            }
        }
        None
    }
}


/// Foundry-style prose for a rule, written to `rules/<ID>.txt`.
pub fn describe_rule(spec: &RuleSpec) -> String {
    let layer = spec.layer;
    let mut s = format!("Rule {}\n", spec.rule_id);
    match spec.kind {
        RuleKind::Spacing | RuleKind::ViaSpacing => {
            let dir = match spec.spacing_direction() {
                SpacingDirection::Horizontal => "horizontal (x-direction) space",
                SpacingDirection::Vertical => "vertical (y-direction) space",
                SpacingDirection::Both => "space in both the x- and y-direction",
            };
            let what = if spec.kind == RuleKind::ViaSpacing { format!("{layer} vias") } else { format!("{layer} metals") };
            s.push_str(&format!("The {dir} between two {what} must be > {}", spec.spacing_threshold));
            match spec.prl_threshold {
                Some(p) => s.push_str(&format!(" when their parallel run length (PRL) is >= {p}.\n")),
                None => s.push_str(".\n"),
            }
            if spec.kind == RuleKind::ViaSpacing {
                s.push_str("This applies to every pair of vias, including vias of the same net.\n");
            } else {
                let along = match layer.routing_direction() {
                    RoutingDirection::Vertical => "vertically",
                    _ => "horizontally",
                };
                s.push_str(&format!(
                    "Grids of the same net that are connected {along} form one metal shape and are not checked against each other.\n"
                ));
            }
        }
        RuleKind::Enclosure => {
            let metal = spec.enclosing_layer.map(|l| l.name()).unwrap_or("?");
            s.push_str(&format!(
                "Each {layer} via must be covered by {metal} metal of the same net, and the {metal} metal must extend beyond the via boundary by >= {} along the {metal} routing direction on both sides.\n",
                spec.enclosure_extension.unwrap_or(0)
            ));
        }
    }
    if let Some(m) = spec.x_boundary_margin {
        s.push_str(&format!("The space between the x-boundary of the cell and {layer} metals must be > {m}.\n"));
    }
    if let Some(m) = spec.y_boundary_margin {
        s.push_str(&format!("The space between the y-boundary of the cell and {layer} metals must be > {m}.\n"));
    }
    s.push_str("Distances are counted in routing grids. The cell spans grids 0..=max_x by 0..=max_y on every layer.\n");
    s
}

/// Generates, labels and writes a dataset. Returns its manifest.
pub fn write_dataset(out: &Path, seed: u64, count: usize, params: &GenParams, tech: &TechFile) -> Result<Manifest> {
    let layouts = generate_dataset(seed, count, params, tech).map_err(Error::data)?;
    let labels: Vec<Labels> = layouts
        .par_iter()
        .map(|l| tech.check_all(l))
        .collect::<std::result::Result<_, _>>()
        .map_err(Error::data)?;

    let rules: Vec<String> = tech.rule_ids().map(String::from).collect();
    let coverage = rules
        .iter()
        .map(|r| (r.clone(), labels.iter().filter(|l| !l[r].is_empty()).count()))
        .collect();
    let manifest = Manifest {
        format: FORMAT_VERSION,
        seed,
        count,
        params: params.clone(),
        techfile: tech.name.clone(),
        rules: rules.clone(),
        cells: layouts.iter().map(|l| l.cell_name().to_string()).collect(),
        coverage,
        coverage_target: if params.density == 0.0 { 0 } else { coverage_target(count) },
        violating_grid_fraction: violating_grid_fraction(&layouts, &labels),
    };

    layouts.par_iter().zip(&labels).try_for_each(|(l, lab)| -> Result<()> {
        let name = l.cell_name();
        io::save_layout(&out.join("cells").join(format!("{name}.json")), l)?;
        for (rule, drvs) in lab {
            io::save_drvs(&out.join("golden").join(rule).join(format!("{name}.json")), name, rule, drvs)?;
        }
        let all: BTreeSet<Drv> = lab.values().flatten().cloned().collect();
        io::write_text(&out.join("render").join(format!("{name}.svg")), &render_svg(l, Some(&all)))
    })?;

    for spec in &tech.rules {
        let dir = out.join("rules");
        io::write_text(&dir.join(format!("{}.txt", spec.rule_id)), &describe_rule(spec))?;
        if let Some((l, lab)) = layouts.iter().zip(&labels).find(|(_, lab)| !lab[&spec.rule_id].is_empty()) {
            let svg = render_svg(l, Some(&lab[&spec.rule_id]));
            io::write_text(&dir.join(format!("{}.svg", spec.rule_id)), &svg)?;
        }
    }
    io::write_json(&out.join("techfile.json"), tech)?;
    io::write_json(&out.join("manifest.json"), &manifest)?;
    Ok(manifest)
}

pub fn load_dataset(root: &Path) -> Result<Dataset> {
    let manifest: Manifest = io::read_json(&root.join("manifest.json"))?;
    if manifest.format != FORMAT_VERSION {
        return Err(Error::parse(&root.join("manifest.json"), format!("unsupported format {}", manifest.format)));
    }
    let tech = io::load_techfile(&root.join("techfile.json"))?;
    let loaded: Vec<(Layout, Labels)> = manifest
        .cells
        .par_iter()
        .map(|cell| -> Result<(Layout, Labels)> {
            let layout = io::load_layout(&root.join("cells").join(format!("{cell}.json")))?;
            let mut labels = Labels::new();
            for rule in &manifest.rules {
                let path = root.join("golden").join(rule).join(format!("{cell}.json"));
                let (file, drvs) = io::load_drvs(&path)?;
                if file.cell != *cell || file.rule != *rule {
                    return Err(Error::parse(&path, format!("expected cell {cell} rule {rule}")));
                }
                labels.insert(rule.clone(), drvs);
            }
            Ok((layout, labels))
        })
        .collect::<Result<_>>()?;
    let (layouts, labels) = loaded.into_iter().unzip();
    if manifest.cells.is_empty() {
        return Err(Error::data(format!("{}: dataset has no cells", root.display())));
    }
    Ok(Dataset { root: root.to_path_buf(), manifest, tech, layouts, labels })
}
