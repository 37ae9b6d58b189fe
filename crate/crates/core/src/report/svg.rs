use std::fmt::Write as _;

use crate::droid::DepthProfile;
use crate::volume::Tissue;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const LEFT: f64 = 60.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 50.0;
const COLOURS: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

fn x_of(position: f64) -> f64 {
    LEFT + position / 100.0 * (WIDTH - LEFT - RIGHT)
}

fn y_of(dice: f64) -> f64 {
    HEIGHT - BOTTOM - dice * (HEIGHT - TOP - BOTTOM)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Polyline per model of mean slice Dice at each occupied bin centre.
pub fn droid_svg(tissue: Tissue, profiles: &[&DepthProfile]) -> String {
    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    )
    .unwrap();
    writeln!(s, r#"<text x="{LEFT}" y="20" font-family="sans-serif" font-size="14">{tissue}</text>"#).unwrap();
    let (x0, x1, y0, y1) = (x_of(0.0), x_of(100.0), y_of(0.0), y_of(1.0));
    writeln!(s, r#"<line x1="{x0:.2}" y1="{y0:.2}" x2="{x1:.2}" y2="{y0:.2}" stroke="black"/>"#).unwrap();
    writeln!(s, r#"<line x1="{x0:.2}" y1="{y0:.2}" x2="{x0:.2}" y2="{y1:.2}" stroke="black"/>"#).unwrap();
    for p in [0.0, 25.0, 50.0, 75.0, 100.0] {
        let x = x_of(p);
        writeln!(s, r#"<line x1="{x:.2}" y1="{y0:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/>"#, y0 + 5.0).unwrap();
        writeln!(
            s,
            r#"<text x="{x:.2}" y="{:.2}" font-family="sans-serif" font-size="11" text-anchor="middle">{p}%</text>"#,
            y0 + 18.0
        )
        .unwrap();
    }
    for d in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let y = y_of(d);
        writeln!(s, r#"<line x1="{:.2}" y1="{y:.2}" x2="{x0:.2}" y2="{y:.2}" stroke="black"/>"#, x0 - 5.0).unwrap();
        writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="11" text-anchor="end">{d}</text>"#,
            x0 - 8.0,
            y + 4.0
        )
        .unwrap();
    }
    writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="12" text-anchor="middle">normalized slice position</text>"#,
        (x0 + x1) / 2.0,
        HEIGHT - 10.0
    )
    .unwrap();
    writeln!(
        s,
        r#"<text x="15" y="{:.2}" font-family="sans-serif" font-size="12" text-anchor="middle" transform="rotate(-90 15 {:.2})">slice Dice</text>"#,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0
    )
    .unwrap();
    for (i, profile) in profiles.iter().enumerate() {
        let colour = COLOURS[i % COLOURS.len()];
        let points: Vec<String> = profile
            .bins
            .iter()
            .filter_map(|b| b.mean_dice.map(|d| format!("{:.2},{:.2}", x_of((b.low + b.high) / 2.0), y_of(d))))
            .collect();
        writeln!(
            s,
            r#"<polyline fill="none" stroke="{colour}" stroke-width="2" points="{}"/>"#,
            points.join(" ")
        )
        .unwrap();
        let ly = TOP + 16.0 * i as f64;
        writeln!(
            s,
            r#"<line x1="{:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{colour}" stroke-width="2"/>"#,
            x1 + 10.0,
            x1 + 30.0
        )
        .unwrap();
        writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="11">{}</text>"#,
            x1 + 35.0,
            ly + 4.0,
            escape(&profile.model)
        )
        .unwrap();
    }
    s.push_str("</svg>\n");
    s
}

/// Parse the `index`-th polyline's points back into (x, y) pairs.
pub fn polyline_points(svg: &str, index: usize) -> Vec<(f64, f64)> {
    svg.split("<polyline")
        .nth(index + 1)
        .and_then(|rest| rest.split("points=\"").nth(1))
        .and_then(|rest| rest.split('"').next())
        .map(|pts| {
            pts.split_whitespace()
                .filter_map(|p| {
                    let (x, y) = p.split_once(',')?;
                    Some((x.parse().ok()?, y.parse().ok()?))
                })
                .collect()
        })
        .unwrap_or_default()
}

/// Y coordinate of a Dice value in the chart.
pub fn dice_to_y(dice: f64) -> f64 {
    (y_of(dice) * 100.0).round() / 100.0
}
