//! SVG scene overlays: firearm boxes in green, human boxes in blue, and
//! the enclosing box of each predicted carried pair in red.

use pairhold_core::{ImageRecord, PairPrediction};

fn rect(out: &mut String, x1: f64, y1: f64, x2: f64, y2: f64, color: &str, width: f64) {
    out.push_str(&format!(
        "  <rect x=\"{x1}\" y=\"{y1}\" width=\"{w}\" height=\"{h}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"{width}\"/>\n",
        w = x2 - x1,
        h = y2 - y1,
    ));
}

/// Renders one image's detections and its positive pair predictions as a
/// standalone SVG document.
pub fn render_overlay(record: &ImageRecord, preds: &[&PairPrediction]) -> String {
    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n",
        w = record.width,
        h = record.height,
    );
    svg.push_str(&format!(
        "  <rect x=\"0\" y=\"0\" width=\"{}\" height=\"{}\" fill=\"white\"/>\n",
        record.width, record.height
    ));
    for human in &record.humans {
        let b = &human.bbox;
        rect(&mut svg, b.x1, b.y1, b.x2, b.y2, "blue", 2.0);
    }
    for firearm in &record.firearms {
        let b = &firearm.bbox;
        rect(&mut svg, b.x1, b.y1, b.x2, b.y2, "green", 2.0);
    }
    for pred in preds {
        // The pair box spans both members; fall back to the raw extremes
        // so a malformed prediction still draws something visible.
        let (h, f) = (&pred.human_bbox, &pred.firearm_bbox);
        let x1 = h.x1.min(f.x1);
        let y1 = h.y1.min(f.y1);
        let x2 = h.x2.max(f.x2);
        let y2 = h.y2.max(f.y2);
        rect(&mut svg, x1, y1, x2, y2, "red", 1.5);
    }
    svg.push_str("</svg>\n");
    svg
}

/// File-system-safe stem for an image id.
pub fn sanitize_stem(image_id: &str) -> String {
    let cleaned: String = image_id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect();
    if cleaned.is_empty() {
        "image".to_string()
    } else {
        cleaned
    }
}
