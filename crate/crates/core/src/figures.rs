//! SVG rendering of the dissimilarity heatmap and of a single alignment.
//!
//! Output is plain text with fixed numeric precision, so identical inputs
//! give byte-identical files.

use std::fmt::Write;

use crate::matrix::DissimMatrix;
use crate::warp::AlignmentPath;

/// Light-to-dark blue ramp used for the heatmap.
const RAMP: [(u8, u8, u8); 9] = [
    (0xf7, 0xfb, 0xff),
    (0xde, 0xeb, 0xf7),
    (0xc6, 0xdb, 0xef),
    (0x9e, 0xca, 0xe1),
    (0x6b, 0xae, 0xd6),
    (0x42, 0x92, 0xc6),
    (0x21, 0x71, 0xb5),
    (0x08, 0x51, 0x9c),
    (0x08, 0x30, 0x6b),
];

/// Color for `t` in [0, 1]; values outside are clamped.
pub fn ramp_color(t: f64) -> String {
    let t = if t.is_nan() { 0.0 } else { t.clamp(0.0, 1.0) };
    let pos = t * (RAMP.len() - 1) as f64;
    let lo = (pos.floor() as usize).min(RAMP.len() - 2);
    let frac = pos - lo as f64;
    let mix = |a: u8, b: u8| (a as f64 + (b as f64 - a as f64) * frac).round() as u8;
    let (a, b) = (RAMP[lo], RAMP[lo + 1]);
    format!(
        "#{:02x}{:02x}{:02x}",
        mix(a.0, b.0),
        mix(a.1, b.1),
        mix(a.2, b.2)
    )
}

fn xml_comments(out: &mut String, comments: &[String]) {
    for c in comments {
        // "--" may not appear inside an XML comment.
        let _ = writeln!(out, "<!-- {} -->", c.replace("--", "- -"));
    }
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// Label every `stride`-th year so axes stay legible for long records.
fn label_stride(n: usize) -> usize {
    match n {
        0..=40 => 1,
        41..=80 => 2,
        81..=200 => 5,
        _ => 10,
    }
}

/// Heatmap of the full matrix, rows and columns in label order.
pub fn heatmap_svg(matrix: &DissimMatrix, title: &str, comments: &[String]) -> String {
    let n = matrix.len();
    let cell = if n <= 40 { 12.0 } else { 4.0 };
    let margin = 56.0;
    let side = cell * n as f64;
    let legend_w = 16.0;
    let width = margin + side + 24.0 + legend_w + 64.0;
    let height = margin + side + 24.0;
    let vmax = matrix.max_value();
    let scale = |v: f64| if vmax > 0.0 { v / vmax } else { 0.0 };

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}" font-family="sans-serif">"#
    );
    xml_comments(&mut s, comments);
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{margin:.1}" y="18" font-size="13">{}</text>"#,
        escape(title)
    );
    let _ = writeln!(s, r#"<g shape-rendering="crispEdges">"#);
    for i in 0..n {
        for j in 0..n {
            let _ = writeln!(
                s,
                r#"<rect x="{:.1}" y="{:.1}" width="{cell:.1}" height="{cell:.1}" fill="{}"/>"#,
                margin + j as f64 * cell,
                margin + i as f64 * cell,
                ramp_color(scale(matrix.get(i, j)))
            );
        }
    }
    let _ = writeln!(s, "</g>");

    let stride = label_stride(n);
    let _ = writeln!(s, r##"<g font-size="8" fill="#333">"##);
    for (i, label) in matrix.labels().iter().enumerate().step_by(stride) {
        let centre = margin + (i as f64 + 0.5) * cell;
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{centre:.1}" text-anchor="end" dominant-baseline="middle">{label}</text>"#,
            margin - 3.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{centre:.1}" y="{:.1}" text-anchor="start" transform="rotate(-60 {centre:.1} {:.1})">{label}</text>"#,
            margin - 3.0,
            margin - 3.0
        );
    }
    let _ = writeln!(s, "</g>");

    // Vertical legend, dark (max) at the top.
    let lx = margin + side + 24.0;
    let steps = 32;
    let step_h = side / steps as f64;
    for k in 0..steps {
        let t = 1.0 - (k as f64 + 0.5) / steps as f64;
        let _ = writeln!(
            s,
            r#"<rect x="{lx:.1}" y="{:.1}" width="{legend_w:.1}" height="{:.1}" fill="{}"/>"#,
            margin + k as f64 * step_h,
            step_h + 0.2,
            ramp_color(t)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" font-size="9">{vmax:.4}</text>"#,
        lx + legend_w + 4.0,
        margin + 8.0
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" font-size="9">0</text>"#,
        lx + legend_w + 4.0,
        margin + side
    );
    s.push_str("</svg>\n");
    s
}

/// Two series drawn one above the other with a line for every path step
/// linking the aligned days.
pub fn alignment_svg(
    labels: (&str, &str),
    a: &[f64],
    b: &[f64],
    path: &AlignmentPath,
    comments: &[String],
) -> String {
    let (width, panel_h, gap, margin) = (960.0, 120.0, 80.0, 48.0);
    let height = margin * 2.0 + panel_h * 2.0 + gap;
    let plot_w = width - margin * 2.0;
    let longest = a.len().max(b.len()).max(2);
    let x = |i: usize| margin + plot_w * i as f64 / (longest - 1) as f64;
    let vmax = a.iter().chain(b).copied().fold(0.0, f64::max);
    let top_base = margin + panel_h;
    let bottom_base = margin + panel_h * 2.0 + gap;
    let y = |base: f64, v: f64| {
        if vmax > 0.0 {
            base - panel_h * v / vmax
        } else {
            base
        }
    };

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}" font-family="sans-serif">"#
    );
    xml_comments(&mut s, comments);
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);

    let _ = writeln!(
        s,
        r##"<g stroke="#9e9e9e" stroke-width="0.4" stroke-opacity="0.6">"##
    );
    for &(i, j) in &path.steps {
        let _ = writeln!(
            s,
            r#"<line x1="{:.2}" y1="{top_base:.2}" x2="{:.2}" y2="{:.2}"/>"#,
            x(i),
            x(j),
            bottom_base - panel_h
        );
    }
    let _ = writeln!(s, "</g>");

    for (series, base, color, label) in [
        (a, top_base, "#08519c", labels.0),
        (b, bottom_base, "#b2182b", labels.1),
    ] {
        let mut points = String::new();
        for (i, &v) in series.iter().enumerate() {
            let _ = write!(
                points,
                "{}{:.2},{:.2}",
                if i > 0 { " " } else { "" },
                x(i),
                y(base, v)
            );
        }
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1" points="{points}"/>"#
        );
        let _ = writeln!(
            s,
            r##"<line x1="{margin:.1}" y1="{base:.2}" x2="{:.1}" y2="{base:.2}" stroke="#333" stroke-width="0.5"/>"##,
            width - margin
        );
        let _ = writeln!(
            s,
            r#"<text x="{margin:.1}" y="{:.2}" font-size="12" fill="{color}">{}</text>"#,
            base - panel_h - 6.0,
            escape(label)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" font-size="11" text-anchor="end">max offset {} days, normalized cost {:.6}</text>"#,
        width - margin,
        height - 12.0,
        path.max_offset(),
        path.normalized_cost
    );
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::warp::{dtw_exact, WarpConfig};

    #[test]
    fn ramp_endpoints() {
        assert_eq!(ramp_color(0.0), "#f7fbff");
        assert_eq!(ramp_color(1.0), "#08306b");
        assert_eq!(ramp_color(-3.0), "#f7fbff");
        assert_eq!(ramp_color(f64::NAN), "#f7fbff");
    }

    #[test]
    fn heatmap_has_one_cell_per_entry_and_is_stable() {
        let m = DissimMatrix::from_rows(
            vec![1990, 1991, 1992],
            vec![
                vec![0.0, 1.0, 2.0],
                vec![1.0, 0.0, 3.0],
                vec![2.0, 3.0, 0.0],
            ],
            0.0,
        )
        .unwrap();
        let comments = vec!["stage -- dissim".to_string()];
        let svg = heatmap_svg(&m, "D", &comments);
        assert_eq!(svg, heatmap_svg(&m, "D", &comments));
        assert_eq!(svg.matches("crispEdges").count(), 1);
        let cells = svg
            .split("<g shape-rendering")
            .nth(1)
            .unwrap()
            .split("</g>")
            .next()
            .unwrap();
        assert_eq!(cells.matches("<rect").count(), 9);
        assert!(svg.contains(">1991</text>"));
        assert!(svg.contains("<!-- stage - - dissim -->"));
        assert!(svg.contains("#08306b"));
    }

    #[test]
    fn alignment_draws_every_step() {
        let a = [0.0, 1.0, 0.0, 2.0];
        let b = [0.0, 0.0, 1.0, 0.0, 2.0];
        let path = dtw_exact(&a, &b, &WarpConfig::unbounded()).unwrap();
        let svg = alignment_svg(("1890", "1900"), &a, &b, &path, &[]);
        let links = svg
            .split("stroke-opacity")
            .nth(1)
            .unwrap()
            .split("</g>")
            .next()
            .unwrap();
        assert_eq!(links.matches("<line").count(), path.steps.len());
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains("1890") && svg.contains("1900"));
    }
}
