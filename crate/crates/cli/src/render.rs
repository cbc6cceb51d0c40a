use std::fmt::Write as _;

/// Outline shapes in unit-square coordinates (y up).
#[derive(Debug, Clone, PartialEq)]
pub enum Shape {
    Rect { class: &'static str, label: String, x0: f64, y0: f64, x1: f64, y1: f64 },
    /// Quarter annulus facing away from the centre of the unit square.
    Sector { label: String, cx: f64, cy: f64, r_in: f64, r_out: f64 },
}

#[derive(Debug, Clone, Default)]
pub struct Scene {
    pub comment: String,
    pub outlines: Vec<Shape>,
    /// Arrow glyphs as (tail, head).
    pub glyphs: Vec<((f64, f64), (f64, f64))>,
    pub path: Vec<(f64, f64)>,
}

const STYLE: &str = ".square{fill:none;stroke:#555;stroke-width:0.002}\
.hole{fill:#eee;stroke:#555;stroke-width:0.002}\
.track{fill:none;stroke:#555;stroke-width:0.002}\
.glyph{stroke:#4a7;stroke-width:0.002}\
.trajectory{fill:none;stroke:#c33;stroke-width:0.003}";

fn y(v: f64) -> f64 {
    1.0 - v
}

fn sector_path(cx: f64, cy: f64, r_in: f64, r_out: f64) -> String {
    let sx = if cx < 0.5 { -1.0 } else { 1.0 };
    let sy = if cy < 0.5 { -1.0 } else { 1.0 };
    // corners in svg coordinates
    let p = |r: f64, dx: f64, dy: f64| (cx + r * dx, y(cy + r * dy));
    let (a0, a1) = ((sx, 0.0), (0.0, sy));
    let o0 = p(r_out, a0.0, a0.1);
    let o1 = p(r_out, a1.0, a1.1);
    let i1 = p(r_in, a1.0, a1.1);
    let i0 = p(r_in, a0.0, a0.1);
    let c = (cx, y(cy));
    let cross = (o0.0 - c.0) * (o1.1 - c.1) - (o0.1 - c.1) * (o1.0 - c.0);
    let sweep = u8::from(cross > 0.0);
    format!(
        "M {} {} A {r_out} {r_out} 0 0 {sweep} {} {} L {} {} A {r_in} {r_in} 0 0 {} {} {} Z",
        o0.0,
        o0.1,
        o1.0,
        o1.1,
        i1.0,
        i1.1,
        1 - sweep,
        i0.0,
        i0.1
    )
}

pub fn to_svg(scene: &Scene) -> String {
    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" viewBox="0 0 1 1" width="800" height="800">"#
    );
    let _ = writeln!(s, "<!-- {} -->", scene.comment.replace("--", "- -"));
    let _ = writeln!(s, "<defs><style>{STYLE}</style>");
    let _ = writeln!(
        s,
        r##"<marker id="arrow" viewBox="0 0 10 10" refX="10" refY="5" markerWidth="4" markerHeight="4" orient="auto"><path d="M 0 0 L 10 5 L 0 10 z" fill="#4a7"/></marker></defs>"##
    );
    for shape in &scene.outlines {
        match shape {
            Shape::Rect { class, label, x0, y0, x1, y1 } => {
                let _ = writeln!(
                    s,
                    r#"<rect class="{class}" x="{x0}" y="{}" width="{}" height="{}"><title>{label}</title></rect>"#,
                    y(*y1),
                    x1 - x0,
                    y1 - y0
                );
            }
            Shape::Sector { label, cx, cy, r_in, r_out } => {
                let _ = writeln!(
                    s,
                    r#"<path class="track" d="{}"><title>{label}</title></path>"#,
                    sector_path(*cx, *cy, *r_in, *r_out)
                );
            }
        }
    }
    for &((x0, y0), (x1, y1)) in &scene.glyphs {
        let _ = writeln!(
            s,
            r#"<line class="glyph" x1="{x0}" y1="{}" x2="{x1}" y2="{}" marker-end="url(#arrow)"/>"#,
            y(y0),
            y(y1)
        );
    }
    if !scene.path.is_empty() {
        let pts: Vec<String> = scene.path.iter().map(|&(a, b)| format!("{a},{}", y(b))).collect();
        let _ = writeln!(s, r#"<polyline class="trajectory" points="{}"/>"#, pts.join(" "));
    }
    s.push_str("</svg>\n");
    s
}

/// Affine map of a bounding box into `[0.05, 0.95]^2`, aspect preserved.
pub fn fit(points: &[(f64, f64)]) -> impl Fn((f64, f64)) -> (f64, f64) {
    let (mut lo, mut hi) = ((f64::INFINITY, f64::INFINITY), (f64::NEG_INFINITY, f64::NEG_INFINITY));
    for &(a, b) in points {
        lo = (lo.0.min(a), lo.1.min(b));
        hi = (hi.0.max(a), hi.1.max(b));
    }
    let span = (hi.0 - lo.0).max(hi.1 - lo.1).max(1e-12);
    let scale = 0.9 / span;
    let off = (0.5 - 0.5 * (hi.0 - lo.0) * scale, 0.5 - 0.5 * (hi.1 - lo.1) * scale);
    move |(a, b)| (off.0 + (a - lo.0) * scale, off.1 + (b - lo.1) * scale)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Number of line segments in the trajectory polyline of an SVG document.
    fn polyline_segments(svg: &str) -> usize {
        svg.lines()
            .filter(|l| l.starts_with("<polyline"))
            .filter_map(|l| l.split("points=\"").nth(1))
            .map(|p| p.split('"').next().unwrap_or("").split_whitespace().count().saturating_sub(1))
            .sum()
    }

    #[test]
    fn counts_segments() {
        let scene = Scene { path: vec![(0.0, 0.0), (0.5, 0.5), (1.0, 0.0)], ..Default::default() };
        assert_eq!(polyline_segments(&to_svg(&scene)), 2);
    }

    #[test]
    fn fit_keeps_aspect() {
        let f = fit(&[(-2.0, -1.0), (2.0, 1.0)]);
        let close = |a: (f64, f64), b: (f64, f64)| (a.0 - b.0).abs() < 1e-12 && (a.1 - b.1).abs() < 1e-12;
        assert!(close(f((-2.0, -1.0)), (0.05, 0.275)));
        assert!(close(f((2.0, 1.0)), (0.95, 0.725)));
    }
}
