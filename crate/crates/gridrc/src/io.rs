//! JSON layout, DRV and techfile files, and physical report text files.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use gridrc_core::convert::{parse_physical_report, PhysicalDrvReport};
use gridrc_core::model::{Drv, DrvKind, GridComponent, GridKey, Layer, Layout};
use gridrc_core::rules::TechFile;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentJson {
    pub x: u32,
    pub y: u32,
    pub layer: Layer,
    pub net: String,
}

/// `{"cell", "max_x", "max_y", "components": [{"x", "y", "layer", "net"}]}`
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayoutJson {
    pub cell: String,
    pub max_x: u32,
    pub max_y: u32,
    pub components: Vec<ComponentJson>,
}

impl LayoutJson {
    pub fn from_layout(l: &Layout) -> Self {
        LayoutJson {
            cell: l.cell_name().into(),
            max_x: l.max_x(),
            max_y: l.max_y(),
            components: l
                .components()
                .map(|c| ComponentJson { x: c.x, y: c.y, layer: c.layer, net: c.net })
                .collect(),
        }
    }

    /// Validates the invariants; errors name the offending component index.
    pub fn into_layout(self) -> std::result::Result<Layout, String> {
        let mut layout = Layout::empty(self.cell, self.max_x, self.max_y).map_err(|e| e.to_string())?;
        for (i, c) in self.components.into_iter().enumerate() {
            layout
                .insert(GridComponent::new(c.x, c.y, c.layer, c.net))
                .map_err(|e| format!("components[{i}]: {e}"))?;
        }
        Ok(layout)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DrvJson {
    pub kind: DrvKind,
    pub members: Vec<(u32, u32, Layer)>,
}

/// `{"cell", "rule", "drvs": [{"kind", "members": [[x, y, layer], ...]}]}`
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DrvFile {
    pub cell: String,
    pub rule: String,
    pub drvs: Vec<DrvJson>,
}

impl DrvFile {
    pub fn new(cell: &str, rule: &str, drvs: &BTreeSet<Drv>) -> Self {
        DrvFile {
            cell: cell.into(),
            rule: rule.into(),
            drvs: drvs
                .iter()
                .map(|d| DrvJson { kind: d.kind(), members: d.members().iter().map(|k| (k.x, k.y, k.layer)).collect() })
                .collect(),
        }
    }

    pub fn to_drvs(&self) -> std::result::Result<BTreeSet<Drv>, String> {
        self.drvs
            .iter()
            .enumerate()
            .map(|(i, d)| {
                let keys: Vec<GridKey> = d.members.iter().map(|&(x, y, l)| GridKey::new(x, y, l)).collect();
                Drv::from_members(self.rule.as_str(), d.kind, &keys).map_err(|e| format!("drvs[{i}]: {e}"))
            })
            .collect()
    }
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    serde_json::from_str(&read_text(path)?).map_err(|e| Error::parse(path, e))
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable value");
    s.push('\n');
    s
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_text(path, &to_json(value))
}

pub fn parse_layout(text: &str) -> std::result::Result<Layout, String> {
    serde_json::from_str::<LayoutJson>(text).map_err(|e| e.to_string())?.into_layout()
}

pub fn load_layout(path: &Path) -> Result<Layout> {
    parse_layout(&read_text(path)?).map_err(|e| Error::parse(path, e))
}

pub fn save_layout(path: &Path, layout: &Layout) -> Result<()> {
    write_json(path, &LayoutJson::from_layout(layout))
}

pub fn load_drvs(path: &Path) -> Result<(DrvFile, BTreeSet<Drv>)> {
    let file: DrvFile = read_json(path)?;
    let drvs = file.to_drvs().map_err(|e| Error::parse(path, e))?;
    Ok((file, drvs))
}

pub fn save_drvs(path: &Path, cell: &str, rule: &str, drvs: &BTreeSet<Drv>) -> Result<()> {
    write_json(path, &DrvFile::new(cell, rule, drvs))
}

/// Techfiles are JSON documents mirroring [`TechFile`]; see `docs/techfile.md`.
pub fn load_techfile(path: &Path) -> Result<TechFile> {
    let tech: TechFile = read_json(path)?;
    tech.validate().map_err(|e| Error::parse(path, e))?;
    Ok(tech)
}

pub fn load_report(path: &Path) -> Result<PhysicalDrvReport> {
    parse_physical_report(&read_text(path)?).map_err(|e| Error::parse(path, e))
}
