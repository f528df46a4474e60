//! Deterministic SVG rendering of an eigenfunction and its nodal set: filled
//! triangles colored by a diverging palette about zero, nodal polylines drawn
//! on top, the domain outline, and an optional zoom inset around the center.

use std::fmt::Write as _;

use crate::mesh::NodalField;
use crate::nodal::{NodalSet, Rect};

#[derive(Debug, Clone, Copy)]
pub struct RenderOptions {
    pub width_px: f64,
    /// Zoom window drawn as an inset; defaults to the gap window when `Some`.
    pub zoom: Option<Rect>,
    /// Number of color bands on each side of zero.
    pub bands: usize,
}

impl Default for RenderOptions {
    fn default() -> Self {
        Self {
            width_px: 900.0,
            zoom: None,
            bands: 8,
        }
    }
}

/// Diverging palette: deep blue at -1 over white at 0 to deep red at +1,
/// quantized into bands for a deterministic, compact output.
fn band_color(t: f64, bands: usize) -> String {
    let t = t.clamp(-1.0, 1.0);
    let level = ((t.abs() * bands as f64).ceil() as usize).min(bands);
    let frac = level as f64 / bands as f64;
    let (r, g, b) = if t >= 0.0 {
        (
            255.0,
            (255.0 * (1.0 - 0.75 * frac)).round(),
            (255.0 * (1.0 - 0.88 * frac)).round(),
        )
    } else {
        (
            (255.0 * (1.0 - 0.88 * frac)).round(),
            (255.0 * (1.0 - 0.65 * frac)).round(),
            255.0,
        )
    };
    format!("#{:02x}{:02x}{:02x}", r as u8, g as u8, b as u8)
}

fn fmt(v: f64) -> String {
    format!("{v:.4}")
}

/// Render the field, nodal polylines, and domain outline into an SVG string.
/// Identical inputs produce identical bytes.
pub fn render_svg(field: &NodalField, nodal: &NodalSet, options: &RenderOptions) -> String {
    let mesh = &field.mesh;
    let pad = 0.05 * mesh.n.max(1.0);
    let x_lo = -mesh.eta.abs() - pad;
    let x_hi = mesh.n + pad;
    let y_lo = -pad;
    let y_hi = 1.0 + pad;
    let scale = options.width_px / (x_hi - x_lo);
    let height_px = (y_hi - y_lo) * scale;
    let tx = |x: f64| (x - x_lo) * scale;
    let ty = |y: f64| (y_hi - y) * scale;

    let max_abs = field.max_abs().max(1e-300);
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" viewBox=\"0 0 {} {}\">",
        fmt(options.width_px),
        fmt(height_px),
        fmt(options.width_px),
        fmt(height_px)
    );
    let _ = writeln!(svg, "<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>");

    // Field as flat-filled triangles keyed by centroid value.
    let _ = writeln!(svg, "<g stroke=\"none\">");
    for tri in &mesh.triangles {
        let pts = tri.map(|v| mesh.nodes[v as usize]);
        let t = (field.values[tri[0] as usize]
            + field.values[tri[1] as usize]
            + field.values[tri[2] as usize])
            / (3.0 * max_abs);
        let _ = writeln!(
            svg,
            "<polygon points=\"{},{} {},{} {},{}\" fill=\"{}\"/>",
            fmt(tx(pts[0][0])),
            fmt(ty(pts[0][1])),
            fmt(tx(pts[1][0])),
            fmt(ty(pts[1][1])),
            fmt(tx(pts[2][0])),
            fmt(ty(pts[2][1])),
            band_color(t, options.bands)
        );
    }
    let _ = writeln!(svg, "</g>");

    // Nodal polylines.
    let _ = writeln!(
        svg,
        "<g fill=\"none\" stroke=\"#000000\" stroke-width=\"{}\">",
        fmt(0.002 * options.width_px)
    );
    for branch in &nodal.branches {
        let mut path = String::new();
        for (i, p) in branch.points.iter().enumerate() {
            let cmd = if i == 0 { 'M' } else { 'L' };
            let _ = write!(path, "{cmd}{},{} ", fmt(tx(p[0])), fmt(ty(p[1])));
        }
        if branch.closed {
            path.push('Z');
        }
        let _ = writeln!(svg, "<path d=\"{}\"/>", path.trim_end());
    }
    let _ = writeln!(svg, "</g>");

    // Domain outline: left column of mesh nodes plus the three straight sides.
    let mut outline = String::new();
    let _ = write!(
        outline,
        "M{},{} ",
        fmt(tx(mesh.left_boundary_x(0))),
        fmt(ty(0.0))
    );
    let _ = write!(outline, "L{},{} ", fmt(tx(mesh.n)), fmt(ty(0.0)));
    let _ = write!(outline, "L{},{} ", fmt(tx(mesh.n)), fmt(ty(1.0)));
    for iy in (0..mesh.n_y).rev() {
        let y = iy as f64 / (mesh.n_y - 1) as f64;
        let _ = write!(
            outline,
            "L{},{} ",
            fmt(tx(mesh.left_boundary_x(iy))),
            fmt(ty(y))
        );
    }
    let _ = writeln!(
        svg,
        "<path d=\"{}Z\" fill=\"none\" stroke=\"#333333\" stroke-width=\"{}\"/>",
        outline,
        fmt(0.0015 * options.width_px)
    );

    if let Some(zoom) = options.zoom {
        let zw = zoom.x_max - zoom.x_min;
        let zh = zoom.y_max - zoom.y_min;
        let inset_w = 0.3 * options.width_px;
        let zscale = inset_w / zw;
        let inset_h = zh * zscale;
        let ox = 0.02 * options.width_px;
        let oy = 0.02 * options.width_px;
        let ztx = |x: f64| ox + (x - zoom.x_min) * zscale;
        let zty = |y: f64| oy + (zoom.y_max - y) * zscale;
        let _ = writeln!(
            svg,
            "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"#ffffff\" stroke=\"#333333\" stroke-width=\"1\"/>",
            fmt(ox),
            fmt(oy),
            fmt(inset_w),
            fmt(inset_h)
        );
        let _ = writeln!(
            svg,
            "<g fill=\"none\" stroke=\"#aa0000\" stroke-width=\"{}\">",
            fmt(0.0015 * options.width_px)
        );
        for branch in &nodal.branches {
            let mut path = String::new();
            let mut pen_down = false;
            for w in branch.points.windows(2) {
                match zoom.clip_segment(w[0], w[1]) {
                    Some((a, b)) => {
                        if !pen_down {
                            let _ = write!(path, "M{},{} ", fmt(ztx(a[0])), fmt(zty(a[1])));
                            pen_down = true;
                        }
                        let _ = write!(path, "L{},{} ", fmt(ztx(b[0])), fmt(zty(b[1])));
                    }
                    None => pen_down = false,
                }
            }
            if !path.is_empty() {
                let _ = writeln!(svg, "<path d=\"{}\"/>", path.trim_end());
            }
        }
        let _ = writeln!(svg, "</g>");
    }

    svg.push_str("</svg>\n");
    svg
}
