//! Predicted-versus-actual scatter as a standalone SVG plus its data CSV.

use std::fmt::Write as _;

const SIZE: f64 = 480.0;
const MARGIN: f64 = 60.0;
const TICKS: usize = 5;

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Common range for both axes so that `x = y` is the diagonal.
fn axis_range(points: &[(f64, f64)]) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &(a, p) in points {
        lo = lo.min(a).min(p);
        hi = hi.max(a).max(p);
    }
    if !lo.is_finite() || !hi.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        return (lo - 0.5, hi + 0.5);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

/// `points` are `(actual, predicted)` pairs on the model's target scale.
pub fn scatter_svg(points: &[(f64, f64)], title: &str, x_label: &str, y_label: &str) -> String {
    let (lo, hi) = axis_range(points);
    let span = SIZE - 2.0 * MARGIN;
    let sx = |v: f64| MARGIN + (v - lo) / (hi - lo) * span;
    let sy = |v: f64| SIZE - MARGIN - (v - lo) / (hi - lo) * span;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
    );
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{SIZE}" height="{SIZE}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="30" text-anchor="middle" font-size="16">{}</text>"#,
        SIZE / 2.0,
        escape(title)
    );
    let (x0, x1, y0, y1) = (MARGIN, SIZE - MARGIN, SIZE - MARGIN, MARGIN);
    let _ = writeln!(
        s,
        r#"<g stroke="black" stroke-width="1"><line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}"/><line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}"/></g>"#
    );
    let _ = writeln!(s, r#"<g font-size="11">"#);
    for i in 0..TICKS {
        let v = lo + (hi - lo) * i as f64 / (TICKS - 1) as f64;
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{v:.2}</text>"#,
            sx(v),
            y0 + 16.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{v:.2}</text>"#,
            x0 - 6.0,
            sy(v) + 4.0
        );
    }
    let _ = writeln!(s, "</g>");
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="13">{}</text>"#,
        SIZE / 2.0,
        SIZE - 18.0,
        escape(x_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="18" y="{:.1}" text-anchor="middle" font-size="13" transform="rotate(-90 18 {:.1})">{}</text>"#,
        SIZE / 2.0,
        SIZE / 2.0,
        escape(y_label)
    );
    let _ = writeln!(s, r#"<g fill="steelblue" fill-opacity="0.7">"#);
    for &(a, p) in points {
        let _ = writeln!(s, r#"<circle cx="{:.3}" cy="{:.3}" r="3"/>"#, sx(a), sy(p));
    }
    let _ = writeln!(s, "</g>");
    let _ = writeln!(
        s,
        r#"<path class="reference" d="M {:.3} {:.3} L {:.3} {:.3}" stroke="red" stroke-width="1.5" stroke-dasharray="6,4" fill="none"/>"#,
        sx(lo),
        sy(lo),
        sx(hi),
        sy(hi)
    );
    s.push_str("</svg>\n");
    s
}

/// `actual,predicted` with one row per point.
pub fn scatter_csv(points: &[(f64, f64)]) -> String {
    let mut s = String::from("actual,predicted\n");
    for (a, p) in points {
        let _ = writeln!(s, "{a},{p}");
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pts() -> Vec<(f64, f64)> {
        (0..25).map(|i| (i as f64 * 0.2, i as f64 * 0.19 + 0.1)).collect()
    }

    #[test]
    fn svg_is_well_formed_with_one_reference_line() {
        let svg = scatter_svg(&pts(), "TDS, PMI <fit> & more", "Actual ln(PMI)", "Predicted ln(PMI)");
        let doc = roxmltree::Document::parse(&svg).unwrap();
        let dashed: Vec<_> = doc
            .descendants()
            .filter(|n| n.has_tag_name("path") && n.attribute("stroke-dasharray").is_some())
            .collect();
        assert_eq!(dashed.len(), 1);
        assert_eq!(dashed[0].attribute("stroke"), Some("red"));
        assert_eq!(doc.descendants().filter(|n| n.has_tag_name("circle")).count(), 25);
        let texts: Vec<_> = doc.descendants().filter_map(|n| n.text()).collect();
        assert!(texts.contains(&"Actual ln(PMI)"));
        assert!(texts.contains(&"Predicted ln(PMI)"));
    }

    #[test]
    fn reference_line_is_the_diagonal() {
        let svg = scatter_svg(&pts(), "t", "x", "y");
        let doc = roxmltree::Document::parse(&svg).unwrap();
        let d = doc
            .descendants()
            .find(|n| n.has_tag_name("path"))
            .unwrap()
            .attribute("d")
            .unwrap()
            .to_string();
        let nums: Vec<f64> = d
            .split_whitespace()
            .filter_map(|t| t.parse().ok())
            .collect();
        assert_eq!(nums, vec![MARGIN, SIZE - MARGIN, SIZE - MARGIN, MARGIN]);
    }

    #[test]
    fn degenerate_inputs_still_render() {
        for p in [vec![], vec![(2.0, 2.0)]] {
            let svg = scatter_svg(&p, "t", "x", "y");
            assert!(roxmltree::Document::parse(&svg).is_ok());
            assert!(!svg.contains("NaN"));
        }
    }

    #[test]
    fn csv_round_trips() {
        let p = pts();
        let text = scatter_csv(&p);
        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        assert_eq!(rdr.headers().unwrap(), vec!["actual", "predicted"]);
        let back: Vec<(f64, f64)> = rdr.deserialize().map(|r| r.unwrap()).collect();
        assert_eq!(back, p);
    }
}
