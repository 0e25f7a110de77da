//! Static SVG figures: region maps and decision-boundary maps.

use std::fmt::Write as _;

use crate::datasets::Dataset2D;
use crate::geometry::{split_unchecked, ConvexPolygon, GeomTolerance, Point2};
use crate::persist::fnv1a;
use crate::regions::{DecisionCell, RegionArrangement};

/// Class colours, cycled for more than ten classes.
const CLASS_COLORS: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf",
];

pub fn class_color(class: usize) -> &'static str {
    CLASS_COLORS[class % CLASS_COLORS.len()]
}

/// Fill colour keyed by an activation bitstring, so a region keeps its
/// colour across epochs as long as its pattern survives.
pub fn pattern_color(bitstring: &str) -> String {
    let h = fnv1a(bitstring.as_bytes());
    let hue = h % 360;
    let sat = 45 + (h >> 16) % 35;
    let light = 55 + (h >> 32) % 25;
    format!("hsl({hue},{sat}%,{light}%)")
}

struct Frame {
    min: Point2,
    max: Point2,
}

impl Frame {
    fn of(domain: &ConvexPolygon) -> Self {
        let v = domain.vertices();
        let fold = |f: fn(f64, f64) -> f64, init: f64, get: fn(&Point2) -> f64| {
            v.iter().map(get).fold(init, f)
        };
        Frame {
            min: Point2::new(fold(f64::min, f64::INFINITY, |p| p.x), fold(f64::min, f64::INFINITY, |p| p.y)),
            max: Point2::new(
                fold(f64::max, f64::NEG_INFINITY, |p| p.x),
                fold(f64::max, f64::NEG_INFINITY, |p| p.y),
            ),
        }
    }

    /// SVG y grows downwards; negate it.
    fn header(&self, out: &mut String) {
        let (w, h) = (self.max.x - self.min.x, self.max.y - self.min.y);
        writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="{} {} {} {}" width="800" height="{}">"#,
            self.min.x,
            -self.max.y,
            w,
            h,
            (800.0 * h / w).round()
        )
        .unwrap();
    }

    fn stroke(&self) -> f64 {
        (self.max.x - self.min.x) / 800.0
    }
}

fn path_data(poly: &ConvexPolygon) -> String {
    let mut d = String::new();
    for (i, p) in poly.vertices().iter().enumerate() {
        let cmd = if i == 0 { 'M' } else { 'L' };
        write!(d, "{cmd}{:.6} {:.6} ", p.x, -p.y).unwrap();
    }
    d.push('Z');
    d
}

fn domain_border(domain: &ConvexPolygon, frame: &Frame, out: &mut String) {
    writeln!(
        out,
        r#"<path class="domain" d="{}" fill="none" stroke="black" stroke-width="{}"/>"#,
        path_data(domain),
        2.0 * frame.stroke()
    )
    .unwrap();
}

/// One filled `class="region"` path per region.
pub fn render_regions_svg(arrangement: &RegionArrangement) -> String {
    let frame = Frame::of(&arrangement.domain);
    let mut out = String::new();
    frame.header(&mut out);
    for r in &arrangement.regions {
        writeln!(
            out,
            r#"<path class="region" d="{}" fill="{}" stroke="white" stroke-width="{}"/>"#,
            path_data(&r.cell),
            pattern_color(&r.pattern.to_bitstring()),
            0.5 * frame.stroke()
        )
        .unwrap();
    }
    domain_border(&arrangement.domain, &frame, &mut out);
    out.push_str("</svg>\n");
    out
}

/// 2% of the largest absolute logit over all region vertices.
pub fn default_gap_threshold(arrangement: &RegionArrangement) -> f64 {
    let max = arrangement
        .regions
        .iter()
        .flat_map(|r| {
            r.cell
                .vertices()
                .iter()
                .flat_map(move |v| r.logits_at(*v))
        })
        .map(f64::abs)
        .fold(0.0, f64::max);
    0.02 * max
}

/// Class-coloured decision map. Inside each class piece, the part where
/// the winning logit leads some other logit by less than `gap_threshold`
/// is painted white. Dataset points are drawn on top.
pub fn render_decision_svg(
    arrangement: &RegionArrangement,
    cells: &[DecisionCell],
    dataset: Option<&Dataset2D>,
    gap_threshold: f64,
    tol: &GeomTolerance,
) -> String {
    let frame = Frame::of(&arrangement.domain);
    let mut out = String::new();
    frame.header(&mut out);
    for (region, cell) in arrangement.regions.iter().zip(cells) {
        for (k, piece) in &cell.class_pieces {
            writeln!(
                out,
                r#"<path class="decision" d="{}" fill="{}" fill-opacity="0.55" stroke="none"/>"#,
                path_data(piece),
                class_color(*k)
            )
            .unwrap();
            if gap_threshold <= 0.0 {
                continue;
            }
            let f = &region.logit_affines;
            for j in (0..f.len()).filter(|&j| j != *k) {
                let mut lead = f[*k].sub(&f[j]);
                lead.offset -= gap_threshold;
                if let (_, Some(band)) = split_unchecked(piece, &lead, tol) {
                    writeln!(
                        out,
                        r#"<path class="band" d="{}" fill="white" stroke="none"/>"#,
                        path_data(&band)
                    )
                    .unwrap();
                }
            }
        }
    }
    if let Some(ds) = dataset {
        let r = 3.0 * frame.stroke();
        for (p, &y) in ds.points.iter().zip(&ds.labels) {
            writeln!(
                out,
                r#"<circle class="point" cx="{:.6}" cy="{:.6}" r="{r}" fill="{}" stroke="black" stroke-width="{}"/>"#,
                p.x,
                -p.y,
                class_color(y),
                0.3 * frame.stroke()
            )
            .unwrap();
        }
    }
    domain_border(&arrangement.domain, &frame, &mut out);
    out.push_str("</svg>\n");
    out
}
