use std::fmt::Write;

fn color(i: usize) -> String {
    let hue = (i as f64 * 137.507_764) % 360.0;
    format!("hsl({hue:.1},55%,62%)")
}

/// Pixel map of cell indices, `cells` row-major from the top row, drawn
/// as horizontal runs over the window `[lo, hi]²`.
pub fn cells(px: usize, lo: f64, hi: f64, cells: &[Option<usize>]) -> String {
    let size = 600.0;
    let s = size / px as f64;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}">"#
    );
    let _ = writeln!(out, r#"<rect width="{size}" height="{size}" fill="white"/>"#);
    for j in 0..px {
        let row = &cells[j * px..(j + 1) * px];
        let mut i = 0;
        while i < px {
            let c = row[i];
            let start = i;
            while i < px && row[i] == c {
                i += 1;
            }
            if let Some(k) = c {
                let _ = writeln!(
                    out,
                    r#"<rect x="{:.3}" y="{:.3}" width="{:.3}" height="{:.3}" fill="{}"/>"#,
                    start as f64 * s,
                    j as f64 * s,
                    (i - start) as f64 * s,
                    s,
                    color(k)
                );
            }
        }
    }
    // the unit square [0, 1]² in window coordinates
    let to = |v: f64| (v - lo) / (hi - lo) * size;
    let _ = writeln!(
        out,
        r#"<rect x="{:.3}" y="{:.3}" width="{:.3}" height="{:.3}" fill="none" stroke="black"/>"#,
        to(0.0),
        size - to(1.0),
        to(1.0) - to(0.0),
        to(1.0) - to(0.0)
    );
    out.push_str("</svg>\n");
    out
}

/// The boundary curve `(θ, r)` with the unit circle and the two sandwich
/// circles.
pub fn lemniscate(curve: &[(f64, f64)], r_in: f64, r_out: f64) -> String {
    let size = 600.0;
    let c = size / 2.0;
    let scale = 0.95 * c;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}">"#
    );
    let _ = writeln!(out, r#"<rect width="{size}" height="{size}" fill="white"/>"#);
    let mut d = String::new();
    for (k, (t, r)) in curve.iter().enumerate() {
        let (x, y) = (c + scale * r * t.cos(), c - scale * r * t.sin());
        let _ = write!(d, "{}{x:.3},{y:.3} ", if k == 0 { "M" } else { "L" });
    }
    let _ = writeln!(out, r##"<path d="{}Z" fill="#cfe3f7" stroke="#1f5f9f" stroke-width="1"/>"##, d.trim_end());
    for (r, stroke) in [(1.0, "black"), (r_in.max(0.0), "#2e8b57"), (r_out.max(0.0), "#c0392b")] {
        let _ = writeln!(
            out,
            r#"<circle cx="{c}" cy="{c}" r="{:.3}" fill="none" stroke="{stroke}" stroke-dasharray="4 3"/>"#,
            scale * r
        );
    }
    out.push_str("</svg>\n");
    out
}
