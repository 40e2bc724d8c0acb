//! Static SVG figures drawn from the CSV-level stats.

use std::fmt::Write;

use crate::stats::{ReferenceLine, ScaleGridCell, SeatsVotesPoint, EFFICIENCY_GAP_ZERO, PROPORTIONALITY, REFERENCE_SCALES};

const W: f64 = 640.0;
const H: f64 = 480.0;
const PAD: f64 = 50.0;

fn px(x: f64) -> f64 {
    PAD + x * (W - 2.0 * PAD)
}

fn py(y: f64) -> f64 {
    H - PAD - y * (H - 2.0 * PAD)
}

fn header(out: &mut String, title: &str, x_label: &str, y_label: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(out, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#, W / 2.0, escape(title));
    let _ = writeln!(
        out,
        r#"<rect x="{PAD}" y="{PAD}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        W - 2.0 * PAD,
        H - 2.0 * PAD
    );
    let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, W / 2.0, H - 12.0, escape(x_label));
    let _ = writeln!(
        out,
        r#"<text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">{}</text>"#,
        H / 2.0,
        H / 2.0,
        escape(y_label)
    );
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Heatmap of seat-share frequency against number of districts, with dashed
/// vertical lines at the reference scales.
pub fn scale_grid_svg(cells: &[ScaleGridCell]) -> String {
    let mut out = String::new();
    header(&mut out, "Seat share by number of districts", "districts (k)", "Democratic seat share");
    let k_max = cells.iter().map(|c| c.k).max().unwrap_or(1).max(2) as f64;
    let col = (W - 2.0 * PAD) / k_max;
    for c in cells {
        let h = ((H - 2.0 * PAD) / (c.k as f64 + 1.0)).max(1.0);
        let shade = (255.0 * (1.0 - c.frequency.clamp(0.0, 1.0))).round() as u8;
        let _ = writeln!(
            out,
            r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="rgb({shade},{shade},255)"/>"#,
            px((c.k as f64 - 1.0) / k_max),
            py(c.seat_fraction) - h / 2.0,
            col.max(1.0),
            h
        );
    }
    for &(k, name) in &REFERENCE_SCALES {
        if (k as f64) <= k_max {
            let x = px((k as f64 - 0.5) / k_max);
            let _ = writeln!(
                out,
                r#"<line x1="{x:.2}" y1="{PAD}" x2="{x:.2}" y2="{}" stroke="gray" stroke-dasharray="4 3"><title>{}</title></line>"#,
                H - PAD,
                escape(name)
            );
        }
    }
    out.push_str("</svg>\n");
    out
}

fn line(out: &mut String, l: &ReferenceLine, color: &str) {
    let (x0, x1) = (l.from.0.max(0.0), l.to.0.min(1.0));
    let _ = writeln!(
        out,
        r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{color}"><title>{}</title></line>"#,
        px(x0),
        py(l.at(x0)),
        px(x1),
        py(l.at(x1)),
        l.name
    );
}

/// Seats-votes point cloud with the proportionality and zero efficiency
/// gap lines. Dot radius grows with frequency.
pub fn seats_votes_svg(points: &[SeatsVotesPoint]) -> String {
    let mut out = String::new();
    header(&mut out, "Seats and votes", "Democratic vote share", "Democratic seat share");
    line(&mut out, &PROPORTIONALITY, "black");
    line(&mut out, &EFFICIENCY_GAP_ZERO, "green");
    for p in points {
        let _ = writeln!(
            out,
            r#"<circle cx="{:.2}" cy="{:.2}" r="{:.2}" fill="steelblue" fill-opacity="0.6"><title>{} k={}</title></circle>"#,
            px(p.vote_share),
            py(p.seat_fraction),
            1.0 + 6.0 * p.frequency.sqrt(),
            escape(&p.contest),
            p.k
        );
    }
    out.push_str("</svg>\n");
    out
}
