//! ASCII and SVG views of a layout and its DRVs.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use core::fmt::Write as _;

use crate::model::{Drv, GridKey, Layer, Layout};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Ascii,
    Svg,
}

pub fn render_layout(layout: &Layout, drvs: Option<&BTreeSet<Drv>>, format: Format) -> String {
    match format {
        Format::Ascii => render_ascii(layout, drvs),
        Format::Svg => render_svg(layout, drvs),
    }
}

fn glyph(layer: Layer) -> char {
    match layer {
        Layer::M0 => '-',
        Layer::Via0 => 'o',
        Layer::M1 => '|',
        Layer::Via1 => '@',
        Layer::M2 => '=',
    }
}

// Vias win over metal, upper metal over lower.
fn precedence(layer: Layer) -> u8 {
    match layer {
        Layer::M0 => 0,
        Layer::M1 => 1,
        Layer::M2 => 2,
        Layer::Via0 => 3,
        Layer::Via1 => 4,
    }
}

fn drv_points(drvs: Option<&BTreeSet<Drv>>) -> BTreeSet<(u32, u32)> {
    drvs.into_iter().flatten().flat_map(|d| d.members().iter().map(|k| (k.x, k.y))).collect()
}

/// One character per grid, `y = 0` at the bottom.
///
/// Each grid shows the glyph of its top-precedence layer and `X` where any
/// DRV member sits. Axis indices run along the left and bottom edges.
pub fn render_ascii(layout: &Layout, drvs: Option<&BTreeSet<Drv>>) -> String {
    let mut top: BTreeMap<(u32, u32), Layer> = BTreeMap::new();
    for (k, _) in layout.iter() {
        let e = top.entry((k.x, k.y)).or_insert(k.layer);
        if precedence(k.layer) > precedence(*e) {
            *e = k.layer;
        }
    }
    let marks = drv_points(drvs);
    let (mx, my) = (layout.max_x(), layout.max_y());
    let label_w = alloc::format!("{my}").len();

    let mut out = String::new();
    let _ = writeln!(out, "cell {} (max_x={mx}, max_y={my})", layout.cell_name());
    for y in (0..=my).rev() {
        let _ = write!(out, "{y:>label_w$} ");
        for x in 0..=mx {
            let c = if marks.contains(&(x, y)) {
                'X'
            } else {
                top.get(&(x, y)).map(|l| glyph(*l)).unwrap_or('.')
            };
            out.push(c);
        }
        out.push('\n');
    }
    let digits = alloc::format!("{mx}").len();
    for pos in (0..digits).rev() {
        let _ = write!(out, "{:label_w$} ", "");
        for x in 0..=mx {
            let d = (x / 10u32.pow(pos as u32)) % 10;
            out.push(if pos > 0 && x < 10u32.pow(pos as u32) { ' ' } else { char::from(b'0' + d as u8) });
        }
        out.push('\n');
    }
    out.push_str("legend: - M0  o VIA0  | M1  @ VIA1  = M2  X DRV member  . empty\n");
    out
}

const CELL: u32 = 20;
const MARGIN: u32 = 36;

fn fill(layer: Layer) -> &'static str {
    match layer {
        Layer::M0 => "#f2d13a",
        Layer::Via0 => "#d9534f",
        Layer::M1 => "#5cb85c",
        Layer::Via1 => "#1f5fbf",
        Layer::M2 => "#c9a7e8",
    }
}

/// Colored unit squares per layer, black crosses at DRV grids, grid indices on both axes.
pub fn render_svg(layout: &Layout, drvs: Option<&BTreeSet<Drv>>) -> String {
    let (mx, my) = (layout.max_x(), layout.max_y());
    let w = (mx + 1) * CELL + 2 * MARGIN;
    let h = (my + 1) * CELL + 2 * MARGIN + 24;
    // Top-left corner of grid (x, y) in pixels.
    let px = |x: u32| MARGIN + x * CELL;
    let py = |y: u32| MARGIN + (my - y) * CELL;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="monospace" font-size="10">"#
    );
    let _ = writeln!(s, r#"<title>{}</title>"#, escape(layout.cell_name()));
    let _ = writeln!(s, r##"<rect x="0" y="0" width="{w}" height="{h}" fill="#ffffff"/>"##);
    let _ = writeln!(
        s,
        r##"<rect x="{}" y="{}" width="{}" height="{}" fill="none" stroke="#999999"/>"##,
        MARGIN,
        MARGIN,
        (mx + 1) * CELL,
        (my + 1) * CELL
    );
    for x in 0..=mx {
        let cx = px(x) + CELL / 2;
        let _ = writeln!(s, r#"<text x="{cx}" y="{}" text-anchor="middle">{x}</text>"#, MARGIN + (my + 1) * CELL + 12);
    }
    for y in 0..=my {
        let cy = py(y) + CELL / 2 + 3;
        let _ = writeln!(s, r#"<text x="{}" y="{cy}" text-anchor="end">{y}</text>"#, MARGIN - 4);
    }

    for layer in Layer::ALL {
        let keys: alloc::vec::Vec<GridKey> = layout.on_layer(layer).map(|(k, _)| k).collect();
        if keys.is_empty() {
            continue;
        }
        let _ = writeln!(s, r#"<g id="{}" fill="{}" fill-opacity="0.75">"#, layer.name(), fill(layer));
        let inset = if layer.is_via() { 5 } else { 1 };
        for k in keys {
            let _ = writeln!(
                s,
                r#"<rect x="{}" y="{}" width="{}" height="{}"/>"#,
                px(k.x) + inset,
                py(k.y) + inset,
                CELL - 2 * inset,
                CELL - 2 * inset
            );
        }
        s.push_str("</g>\n");
    }

    let marks = drv_points(drvs);
    if !marks.is_empty() {
        s.push_str("<g id=\"drv\" stroke=\"#000000\" stroke-width=\"2\">\n");
        for (x, y) in marks {
            let (x0, y0) = (px(x) + 3, py(y) + 3);
            let (x1, y1) = (px(x) + CELL - 3, py(y) + CELL - 3);
            let _ = writeln!(s, r#"<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y1}"/>"#);
            let _ = writeln!(s, r#"<line x1="{x0}" y1="{y1}" x2="{x1}" y2="{y0}"/>"#);
        }
        s.push_str("</g>\n");
    }

    let mut lx = MARGIN;
    let ly = h - 14;
    for layer in Layer::ALL {
        let _ = writeln!(s, r#"<rect x="{lx}" y="{}" width="10" height="10" fill="{}"/>"#, ly - 9, fill(layer));
        let _ = writeln!(s, r#"<text x="{}" y="{ly}">{}</text>"#, lx + 13, layer.name());
        lx += 50;
    }
    s.push_str("</svg>\n");
    s
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}
