use std::collections::HashMap;
use std::fmt::Write;

use crate::linefit::TopViewPoint;
use crate::scalar::Scalar;
use crate::threshold::SpringFlags;

use super::{jet_color, Rgb};

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 320.0;
const MARGIN: f64 = 40.0;
const RADIUS: f64 = 6.0;

/// Top view of the queue: the fitted axis runs horizontally through the
/// middle, each person is a circle at (along, offset) colored by scaled net
/// force. Spring outliers get a red outline.
pub fn render_topview<T: Scalar>(projected: &[TopViewPoint<T>], spring: &SpringFlags<T>) -> String {
    let along: Vec<f64> = projected.iter().map(|p| p.along.to_f64_lossy()).collect();
    let offset: Vec<f64> = projected.iter().map(|p| p.offset.to_f64_lossy()).collect();
    let mean_along = if along.is_empty() {
        0.0
    } else {
        along.iter().sum::<f64>() / along.len() as f64
    };
    let half_span = along
        .iter()
        .map(|a| (a - mean_along).abs())
        .fold(0.0, f64::max);
    let max_off = offset.iter().map(|o| o.abs()).fold(0.0, f64::max);

    let sx = if half_span > 0.0 { (WIDTH / 2.0 - MARGIN) / half_span } else { f64::INFINITY };
    let sy = if max_off > 0.0 { (HEIGHT / 2.0 - MARGIN) / max_off } else { f64::INFINITY };
    let scale = match sx.min(sy) {
        s if s.is_finite() => s,
        _ => 1.0,
    };
    let (mid_x, mid_y) = (WIDTH / 2.0, HEIGHT / 2.0);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(svg, r##"<rect width="{WIDTH}" height="{HEIGHT}" fill="#ffffff"/>"##);

    if max_off > 0.0 {
        for frac in [-1.0, -0.5, 0.5, 1.0] {
            let y = mid_y + frac * max_off * scale;
            let _ = writeln!(
                svg,
                r##"<line class="grid" x1="0" y1="{y:.2}" x2="{WIDTH}" y2="{y:.2}" stroke="#cccccc" stroke-dasharray="4 4"/>"##
            );
            let _ = writeln!(
                svg,
                r##"<text x="4" y="{:.2}" font-size="10" fill="#888888">{:+.1}</text>"##,
                y - 2.0,
                frac * max_off
            );
        }
    }
    let _ = writeln!(
        svg,
        r##"<line class="axis" x1="0" y1="{mid_y:.2}" x2="{WIDTH}" y2="{mid_y:.2}" stroke="#000000" stroke-width="1.5"/>"##
    );

    let by_id: HashMap<u64, _> = spring.entries.iter().map(|e| (e.person_id, e)).collect();
    for (k, p) in projected.iter().enumerate() {
        let entry = by_id.get(&p.person_id);
        let fill = entry.map_or(jet_color(0.0), |e| jet_color(e.scaled_force.to_f64_lossy() / 255.0));
        let outlier = entry.is_some_and(|e| e.is_outlier);
        let stroke = if outlier { Rgb::new(255, 0, 0) } else { Rgb::new(0, 0, 0) };
        let cx = mid_x + (along[k] - mean_along) * scale;
        let cy = mid_y + offset[k] * scale;
        let _ = writeln!(
            svg,
            r#"<circle data-person="{}" cx="{cx:.2}" cy="{cy:.2}" r="{RADIUS}" fill="{}" stroke="{}" stroke-width="{}"/>"#,
            p.person_id,
            fill.hex(),
            stroke.hex(),
            if outlier { 2 } else { 1 }
        );
    }
    svg.push_str("</svg>\n");
    svg
}
