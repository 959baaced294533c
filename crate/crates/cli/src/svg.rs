use std::fmt::Write as _;

use stereobox::eval::DepthBin;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 56.0;

/// Median depth error per bin with interquartile bars.
pub fn depth_curve_svg(bins: &[DepthBin], focal_baseline: f64) -> String {
    let x_max = bins.iter().map(|b| b.center).fold(10.0, f64::max) + 10.0;
    let y_max = bins
        .iter()
        .map(|b| b.depth_error.q75)
        .fold(0.0, f64::max)
        .max(1e-3)
        * 1.1;
    let px = |x: f64| MARGIN + x / x_max * (WIDTH - 2.0 * MARGIN);
    let py = |y: f64| HEIGHT - MARGIN - y / y_max * (HEIGHT - 2.0 * MARGIN);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let (x0, y0, x1, y1) = (px(0.0), py(0.0), px(x_max), py(y_max));
    let _ = writeln!(
        s,
        r#"<path d="M{x0:.1} {y1:.1} L{x0:.1} {y0:.1} L{x1:.1} {y0:.1}" stroke="black" fill="none"/>"#
    );
    for k in 0..=((x_max / 10.0) as usize) {
        let x = 10.0 * k as f64;
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{x:.0}</text>"#,
            px(x),
            y0 + 18.0
        );
    }
    for k in 0..=4 {
        let y = y_max * k as f64 / 4.0;
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{y:.2}</text>"#,
            x0 - 6.0,
            py(y) + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">depth (m)</text>"#,
        (x0 + x1) / 2.0,
        HEIGHT - 12.0
    );
    let _ = writeln!(
        s,
        r#"<text transform="translate(14 {:.1}) rotate(-90)" text-anchor="middle">|depth error| (m)</text>"#,
        (y0 + y1) / 2.0
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="20" text-anchor="middle">median and quartiles per bin, focal*baseline = {focal_baseline:.2} px m</text>"#,
        WIDTH / 2.0
    );

    for b in bins {
        let (x, e) = (px(b.center), &b.depth_error);
        let _ = writeln!(
            s,
            r#"<line x1="{x:.1}" y1="{:.1}" x2="{x:.1}" y2="{:.1}" stroke="steelblue"/>"#,
            py(e.q25),
            py(e.q75)
        );
    }
    if !bins.is_empty() {
        let points: Vec<String> = bins
            .iter()
            .map(|b| format!("{:.1},{:.1}", px(b.center), py(b.depth_error.median)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline points="{}" stroke="steelblue" fill="none"/>"#,
            points.join(" ")
        );
    }
    for b in bins {
        let _ = writeln!(
            s,
            r#"<circle cx="{:.1}" cy="{:.1}" r="3" fill="steelblue"><title>{:.0} m: n={}</title></circle>"#,
            px(b.center),
            py(b.depth_error.median),
            b.center,
            b.count
        );
    }
    s.push_str("</svg>\n");
    s
}
