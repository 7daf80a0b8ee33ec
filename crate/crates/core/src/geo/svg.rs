//! Static SVG sketch of cells and region estimates.

use std::fmt::Write;

use super::{CellDb, LocalFrame, RegionEstimate, RegionKind};

const SIZE: f64 = 800.0;

/// Renders cells as dots and regions as outlines, north up, in a frame
/// anchored at the database reference cell.
pub fn render(db: &CellDb, regions: &[RegionEstimate]) -> String {
    let Some(origin) = db.reference_point() else {
        return format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{SIZE}\" height=\"{SIZE}\"/>\n"
        );
    };
    let frame = LocalFrame::new(origin);
    let mut shapes: Vec<&RegionEstimate> = Vec::new();
    for r in regions {
        if r.kind == RegionKind::Intersection {
            shapes.extend(r.parts.iter());
        }
        shapes.push(r);
    }

    let mut pts: Vec<(f64, f64)> = db.cells().map(|c| frame.to_local(c.position())).collect();
    for r in &shapes {
        let (x, y) = frame.to_local(r.center);
        pts.push((x - r.r_max, y - r.r_max));
        pts.push((x + r.r_max, y + r.r_max));
    }
    let (mut x0, mut y0, mut x1, mut y1) = (
        f64::INFINITY,
        f64::INFINITY,
        f64::NEG_INFINITY,
        f64::NEG_INFINITY,
    );
    for (x, y) in pts {
        (x0, y0, x1, y1) = (x0.min(x), y0.min(y), x1.max(x), y1.max(y));
    }
    let span = (x1 - x0).max(y1 - y0).max(1.0) * 1.1;
    let (cx, cy) = ((x0 + x1) / 2.0, (y0 + y1) / 2.0);
    let scale = SIZE / span;
    let px = |x: f64, y: f64| (SIZE / 2.0 + (x - cx) * scale, SIZE / 2.0 - (y - cy) * scale);

    let mut out = String::new();
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{SIZE}\" height=\"{SIZE}\" viewBox=\"0 0 {SIZE} {SIZE}\">"
    );
    for r in shapes {
        let (x, y) = frame.to_local(r.center);
        let (sx, sy) = px(x, y);
        match (r.kind, r.sector()) {
            (RegionKind::Point, _) => {
                let _ = writeln!(
                    out,
                    "  <circle cx=\"{sx:.2}\" cy=\"{sy:.2}\" r=\"4\" fill=\"red\"/>"
                );
            }
            (RegionKind::Intersection, _) => {
                let _ = writeln!(
                    out,
                    "  <circle cx=\"{sx:.2}\" cy=\"{sy:.2}\" r=\"{:.2}\" fill=\"red\" fill-opacity=\"0.3\"/>",
                    (r.r_max * scale).max(2.0)
                );
            }
            (_, Some(s)) => {
                let arc = |rad: f64, deg: f64| {
                    let a = deg.to_radians();
                    px(x + rad * a.sin(), y + rad * a.cos())
                };
                let large = u8::from(s.width_deg > 180.0);
                let (a0, a1) = (s.start_deg, s.start_deg + s.width_deg);
                let (o0, o1, i0, i1) = (
                    arc(r.r_max, a0),
                    arc(r.r_max, a1),
                    arc(r.r_min, a1),
                    arc(r.r_min, a0),
                );
                let (ro, ri) = (r.r_max * scale, r.r_min * scale);
                let _ = writeln!(
                    out,
                    "  <path d=\"M {:.2} {:.2} A {ro:.2} {ro:.2} 0 {large} 1 {:.2} {:.2} L {:.2} {:.2} A {ri:.2} {ri:.2} 0 {large} 0 {:.2} {:.2} Z\" fill=\"none\" stroke=\"blue\"/>",
                    o0.0, o0.1, o1.0, o1.1, i0.0, i0.1, i1.0, i1.1
                );
            }
            _ => {
                for rad in [r.r_min, r.r_max].into_iter().filter(|&v| v > 0.0) {
                    let _ = writeln!(
                        out,
                        "  <circle cx=\"{sx:.2}\" cy=\"{sy:.2}\" r=\"{:.2}\" fill=\"none\" stroke=\"blue\"/>",
                        rad * scale
                    );
                }
            }
        }
    }
    for c in db.cells() {
        let (x, y) = frame.to_local(c.position());
        let (sx, sy) = px(x, y);
        let _ = writeln!(
            out,
            "  <circle cx=\"{sx:.2}\" cy=\"{sy:.2}\" r=\"3\" fill=\"black\"><title>cell {}</title></circle>",
            c.cell_id
        );
    }
    out.push_str("</svg>\n");
    out
}
