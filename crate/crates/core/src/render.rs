//! Static pictures of a cluster: a pixel map for cycle bases (one pixel
//! per site, colored by stick order) and a load bar chart for the rest.

use std::fmt::Write as _;

use crate::snapshot::Snapshot;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RenderStyle {
    #[default]
    Pixels,
    Bars,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImageFormat {
    /// Binary portable pixmap.
    Ppm,
    Svg,
}

impl ImageFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ImageFormat::Ppm => "ppm",
            ImageFormat::Svg => "svg",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rendered {
    pub format: ImageFormat,
    pub bytes: Vec<u8>,
    pub warning: Option<String>,
}

const EMPTY: [u8; 3] = [255, 255, 255];
const BASE: [u8; 3] = [40, 40, 40];
const RAMP: [[u8; 3]; 5] = [[68, 1, 84], [59, 82, 139], [33, 145, 140], [94, 201, 98], [253, 231, 37]];

/// Monotone color ramp, `x` in `[0, 1]`.
pub fn ramp(x: f64) -> [u8; 3] {
    let x = x.clamp(0.0, 1.0) * (RAMP.len() - 1) as f64;
    let i = (x.floor() as usize).min(RAMP.len() - 2);
    let f = x - i as f64;
    let mut out = [0u8; 3];
    for (c, o) in out.iter_mut().enumerate() {
        let (a, b) = (RAMP[i][c] as f64, RAMP[i + 1][c] as f64);
        *o = (a + (b - a) * f).round() as u8;
    }
    out
}

/// Row-major RGB, `n` wide and `M` tall, layer 0 in the bottom row.
pub fn pixel_grid(snap: &Snapshot) -> (usize, usize, Vec<[u8; 3]>) {
    let (w, h) = (snap.n, snap.m as usize);
    let mut px = vec![EMPTY; w * h];
    let t = snap.t.max(1) as f64;
    for s in &snap.sites {
        let row = h - 1 - s.layer as usize;
        px[row * w + s.vertex] = if s.order == 0 { BASE } else { ramp((s.order - 1) as f64 / t) };
    }
    (w, h, px)
}

/// RGBA bytes of [`pixel_grid`], for canvas drawing.
pub fn rgba(snap: &Snapshot) -> (usize, usize, Vec<u8>) {
    let (w, h, px) = pixel_grid(snap);
    (w, h, px.iter().flat_map(|p| [p[0], p[1], p[2], 255]).collect())
}

pub fn ppm(snap: &Snapshot, scale: usize) -> Vec<u8> {
    let scale = scale.max(1);
    let (w, h, px) = pixel_grid(snap);
    let mut out = format!("P6\n{} {}\n255\n", w * scale, h * scale).into_bytes();
    for row in 0..h {
        for _ in 0..scale {
            for col in 0..w {
                for _ in 0..scale {
                    out.extend_from_slice(&px[row * w + col]);
                }
            }
        }
    }
    out
}

/// One bar per layer with height `L(i) / n`.
pub fn bar_chart_svg(snap: &Snapshot) -> String {
    let loads = snap.loads();
    let (bar, height, pad) = (12.0, 200.0, 20.0);
    let width = loads.len() as f64 * bar + 2.0 * pad;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{:.0}" viewBox="0 0 {width:.0} {:.0}">"#,
        height + 2.0 * pad,
        height + 2.0 * pad
    );
    let _ = writeln!(
        out,
        r#"<text x="{pad:.0}" y="14" font-family="monospace" font-size="11">L(i)/n, n={} d={} t={}</text>"#,
        snap.n, snap.d, snap.t
    );
    for (i, &l) in loads.iter().enumerate() {
        let frac = l as f64 / snap.n as f64;
        let h = frac * height;
        let x = pad + i as f64 * bar;
        let y = pad + height - h;
        let [r, g, b] = if i == 0 { BASE } else { ramp(frac) };
        let _ = writeln!(
            out,
            r##"<rect x="{x:.2}" y="{y:.2}" width="{:.2}" height="{h:.2}" fill="#{r:02x}{g:02x}{b:02x}"/>"##,
            bar - 1.0
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Pixel style needs a cycle base (degree 2); anything else falls back to
/// the bar chart with a warning.
pub fn render(snap: &Snapshot, style: RenderStyle, scale: usize) -> Rendered {
    match style {
        RenderStyle::Pixels if snap.d == 2 => Rendered { format: ImageFormat::Ppm, bytes: ppm(snap, scale), warning: None },
        RenderStyle::Pixels => Rendered {
            format: ImageFormat::Svg,
            bytes: bar_chart_svg(snap).into_bytes(),
            warning: Some(format!("base graph has degree {}, not a cycle; drawing layer loads instead", snap.d)),
        },
        RenderStyle::Bars => Rendered { format: ImageFormat::Svg, bytes: bar_chart_svg(snap).into_bytes(), warning: None },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dla::{Cluster, DropOptions, GrowUntil};
    use crate::graph::RegularGraph;
    use crate::rng;

    #[test]
    fn fresh_cluster_is_one_dark_row() {
        let snap = Snapshot::from_cluster(&Cluster::from_graph(RegularGraph::cycle(5).unwrap()));
        let (w, h, px) = pixel_grid(&snap);
        assert_eq!((w, h), (5, 1));
        assert!(px.iter().all(|&p| p == BASE));
        let img = ppm(&snap, 2);
        assert!(img.starts_with(b"P6\n10 2\n255\n"));
        assert_eq!(img.len(), "P6\n10 2\n255\n".len() + 10 * 2 * 3);
    }

    #[test]
    fn rendering_is_deterministic() {
        let mut c = Cluster::from_graph(RegularGraph::cycle(16).unwrap());
        c.grow(GrowUntil::Particles(60), &mut rng::from_seed(2), &DropOptions::default()).unwrap();
        let snap = Snapshot::from_cluster(&c);
        assert_eq!(render(&snap, RenderStyle::Pixels, 3), render(&snap, RenderStyle::Pixels, 3));
        let (w, h, px) = pixel_grid(&snap);
        let filled = px.iter().filter(|&&p| p != EMPTY).count();
        assert_eq!(filled, 16 + 60);
        assert_eq!((w, h), (16, c.lowest_empty_layer() as usize));
    }

    #[test]
    fn non_cycle_falls_back_to_bars() {
        let snap = Snapshot::from_cluster(&Cluster::from_graph(RegularGraph::complete(4).unwrap()));
        let r = render(&snap, RenderStyle::Pixels, 1);
        assert_eq!(r.format, ImageFormat::Svg);
        assert!(r.warning.is_some());
        let svg = String::from_utf8(r.bytes).unwrap();
        assert_eq!(svg.matches("<rect").count(), 1);
    }

    #[test]
    fn ramp_endpoints() {
        assert_eq!(ramp(0.0), RAMP[0]);
        assert_eq!(ramp(1.0), RAMP[4]);
        assert_eq!(ramp(0.5), RAMP[2]);
    }
}
