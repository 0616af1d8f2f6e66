//! SVG rendering of planar segment measures. Positive segments are blue,
//! negative ones red; the y axis points up.

use std::fmt::Write;

use crate::beckmann::SegmentMeasure;
use crate::error::{Error, Result};

pub const POSITIVE: &str = "#1f4fd1";
pub const NEGATIVE: &str = "#d1281f";

#[derive(Debug, Clone)]
pub struct SvgStyle {
    /// Width of the canvas in pixels; the height follows the aspect ratio.
    pub width_px: f64,
    /// Stroke width per unit of midpoint density, in user units. `None`
    /// scales the densest segment to `max_stroke` of the larger extent.
    pub gain: Option<f64>,
    pub max_stroke: f64,
}

impl Default for SvgStyle {
    fn default() -> Self {
        Self { width_px: 800.0, gain: None, max_stroke: 0.01 }
    }
}

fn num(v: f64) -> String {
    // avoid "-0" in the output
    let s = format!("{:.6}", v + 0.0);
    if s == "-0.000000" { "0.000000".into() } else { s }
}

pub fn render_svg(sigma: &SegmentMeasure, style: &SvgStyle) -> Result<String> {
    if sigma.dim != 2 && !(sigma.segments.is_empty() && sigma.dim == 0) {
        return Err(Error::Dimension { expected: 2, found: sigma.dim });
    }
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for s in &sigma.segments {
        for p in [&s.a, &s.b] {
            for k in 0..2 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
    }
    if sigma.segments.is_empty() {
        (lo, hi) = ([-1.0, -1.0], [1.0, 1.0]);
    }
    let extent = (hi[0] - lo[0]).max(hi[1] - lo[1]).max(1e-12);
    let pad = 0.05 * extent;
    let (w, h) = (hi[0] - lo[0] + 2.0 * pad, hi[1] - lo[1] + 2.0 * pad);
    let densest = sigma.segments.iter().map(|s| s.midpoint_density()).fold(0.0f64, f64::max);
    let gain = style.gain.unwrap_or(if densest > 0.0 { style.max_stroke * extent / densest } else { 0.0 });
    let height_px = style.width_px * h / w;

    let mut out = String::new();
    let _ = writeln!(out, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{}" height="{}" viewBox="{} {} {} {}">"#,
        num(style.width_px),
        num(height_px),
        num(lo[0] - pad),
        num(-hi[1] - pad),
        num(w),
        num(h)
    );
    let _ = writeln!(out, r#"<g fill="none" stroke-linecap="round">"#);
    for s in &sigma.segments {
        let colour = if s.sign >= 0 { POSITIVE } else { NEGATIVE };
        let _ = writeln!(
            out,
            r#"<path d="M {} {} L {} {}" stroke="{colour}" stroke-width="{}"/>"#,
            num(s.a[0]),
            num(-s.a[1]),
            num(s.b[0]),
            num(-s.b[1]),
            num(gain * s.midpoint_density()),
        );
    }
    out.push_str("</g>\n</svg>\n");
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::beckmann::Segment;

    #[test]
    fn empty_canvas() {
        let svg = render_svg(&SegmentMeasure { dim: 2, segments: vec![] }, &SvgStyle::default()).unwrap();
        assert!(svg.contains("<svg") && svg.ends_with("</svg>\n"));
        assert!(!svg.contains("<path"));
        assert!(render_svg(&SegmentMeasure::default(), &SvgStyle::default()).is_ok());
    }

    #[test]
    fn one_blue_path_flipped() {
        let seg = Segment { a: vec![0.0, 0.0], b: vec![1.0, 2.0], weight: 1.0, sign: 1 };
        let svg = render_svg(&SegmentMeasure { dim: 2, segments: vec![seg] }, &SvgStyle::default()).unwrap();
        assert_eq!(svg.matches("<path").count(), 1);
        assert!(svg.contains(POSITIVE) && !svg.contains(NEGATIVE));
        assert!(svg.contains("L 1.000000 -2.000000"));
    }

    #[test]
    fn rejects_3d() {
        let seg = Segment { a: vec![0.0; 3], b: vec![1.0; 3], weight: 1.0, sign: -1 };
        let r = render_svg(&SegmentMeasure { dim: 3, segments: vec![seg] }, &SvgStyle::default());
        assert!(matches!(r, Err(Error::Dimension { .. })));
    }
}
