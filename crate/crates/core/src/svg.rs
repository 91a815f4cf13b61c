//! Minimal deterministic SVG emission for curves, domains, meshes, fiber
//! overlays and nodal-field heatmaps.

use crate::fibers::FiberArray;
use crate::geometry::{PrefractalCurve, PrefractalDomain};
use crate::mesh::Mesh;
use crate::point::Point2;
use std::fmt::Write as _;

const CANVAS: f64 = 1000.0;

struct Frame {
    lo: Point2,
    scale: f64,
    height: f64,
}

impl Frame {
    fn fit(points: impl Iterator<Item = Point2>) -> Frame {
        let mut lo = Point2::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Point2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in points {
            lo = Point2::new(lo.x.min(p.x), lo.y.min(p.y));
            hi = Point2::new(hi.x.max(p.x), hi.y.max(p.y));
        }
        let span = (hi.x - lo.x).max(hi.y - lo.y).max(1e-12);
        let pad = 0.03 * span;
        lo = lo - Point2::new(pad, pad);
        let scale = CANVAS / (span + 2.0 * pad);
        Frame {
            lo,
            scale,
            height: (hi.y - lo.y + pad) * scale + 0.03 * span * scale,
        }
    }

    fn map(&self, p: Point2) -> (f64, f64) {
        // Flip y so the picture is upright.
        (
            (p.x - self.lo.x) * self.scale,
            self.height - (p.y - self.lo.y) * self.scale,
        )
    }
}

fn document(body: &str, width: f64, height: f64) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {width:.2} {height:.2}\">\n{body}</svg>\n"
    )
}

fn polyline(frame: &Frame, pts: &[Point2], closed: bool, class: &str) -> String {
    let mut d = String::new();
    for (i, &p) in pts.iter().enumerate() {
        let (x, y) = frame.map(p);
        let _ = write!(d, "{}{x:.3},{y:.3} ", if i == 0 { "M" } else { "L" });
    }
    if closed {
        d.push('Z');
    }
    format!("<path class=\"{class}\" d=\"{}\"/>\n", d.trim_end())
}

const STYLE: &str = "<style>\n\
    .boundary{fill:none;stroke:#1f3552;stroke-width:1.4}\n\
    .curve{fill:none;stroke:#1f3552;stroke-width:1.2}\n\
    .mesh{fill:none;stroke:#7a8ba3;stroke-width:0.35}\n\
    .inner-fiber{fill:none;stroke:#c0392b;stroke-width:0.7}\n\
    .outer-fiber{fill:none;stroke:#27ae60;stroke-width:0.7}\n\
    </style>\n";

pub fn curve_svg(curve: &PrefractalCurve) -> String {
    let frame = Frame::fit(curve.vertices.iter().copied());
    let body = format!(
        "{STYLE}{}",
        polyline(&frame, &curve.vertices, false, "curve")
    );
    document(&body, CANVAS, frame.height)
}

pub fn domain_svg(domain: &PrefractalDomain) -> String {
    let frame = Frame::fit(domain.boundary.iter().copied());
    let body = format!(
        "{STYLE}{}",
        polyline(&frame, &domain.boundary, true, "boundary")
    );
    document(&body, CANVAS, frame.height)
}

pub fn mesh_svg(mesh: &Mesh) -> String {
    let frame = Frame::fit(mesh.vertices.iter().copied());
    let mut body = String::from(STYLE);
    for t in 0..mesh.triangles.len() {
        let pts = mesh.triangle_points(t);
        body.push_str(&polyline(&frame, &pts, true, "mesh"));
    }
    document(&body, CANVAS, frame.height)
}

/// Domain boundary with inner and outer fiber triangles in distinct stroke
/// classes.
pub fn fibers_svg(domain: &PrefractalDomain, fibers: &FiberArray) -> String {
    let frame = Frame::fit(
        domain
            .boundary
            .iter()
            .copied()
            .chain(fibers.outer.iter().map(|t| t.apex)),
    );
    let mut body = String::from(STYLE);
    for t in &fibers.inner {
        body.push_str(&polyline(
            &frame,
            &[t.base_a, t.base_b, t.apex],
            true,
            "inner-fiber",
        ));
    }
    for t in &fibers.outer {
        body.push_str(&polyline(
            &frame,
            &[t.base_a, t.base_b, t.apex],
            true,
            "outer-fiber",
        ));
    }
    body.push_str(&polyline(&frame, &domain.boundary, true, "boundary"));
    document(&body, CANVAS, frame.height)
}

fn heat_color(t: f64) -> String {
    // Compact blue -> white -> red diverging map.
    let t = t.clamp(0.0, 1.0);
    let (r, g, b) = if t < 0.5 {
        let s = t / 0.5;
        (
            (59.0 + s * (255.0 - 59.0)) as u8,
            (76.0 + s * (255.0 - 76.0)) as u8,
            (192.0 + s * (255.0 - 192.0)) as u8,
        )
    } else {
        let s = (t - 0.5) / 0.5;
        (
            (255.0 - s * (255.0 - 180.0)) as u8,
            (255.0 - s * (255.0 - 4.0)) as u8,
            (255.0 - s * (255.0 - 38.0)) as u8,
        )
    };
    format!("#{r:02x}{g:02x}{b:02x}")
}

/// Per-triangle fill from the mean of the nodal values.
pub fn heatmap_svg(mesh: &Mesh, values: &[f64]) -> String {
    assert_eq!(values.len(), mesh.vertices.len());
    let frame = Frame::fit(mesh.vertices.iter().copied());
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &v in values {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    let span = (hi - lo).max(1e-300);
    let mut body = String::new();
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let mean =
            (values[tri[0] as usize] + values[tri[1] as usize] + values[tri[2] as usize]) / 3.0;
        let pts = mesh.triangle_points(t);
        let mut d = String::new();
        for (i, &p) in pts.iter().enumerate() {
            let (x, y) = frame.map(p);
            let _ = write!(d, "{}{x:.3},{y:.3} ", if i == 0 { "M" } else { "L" });
        }
        let _ = writeln!(
            body,
            "<path fill=\"{}\" stroke=\"none\" d=\"{}Z\"/>",
            heat_color((mean - lo) / span),
            d.trim_end()
        );
    }
    document(&body, CANVAS, frame.height)
}
