use std::fmt::Write;

const CELL_W: usize = 48;
const CELL_H: usize = 32;
const MARGIN_L: usize = 70;
const MARGIN_T: usize = 40;
const MARGIN_B: usize = 50;
const LEGEND_W: usize = 80;

/// Linear ramp from dark purple (0) to yellow (1).
fn color(v: f64) -> String {
    let t = if v.is_finite() { v.clamp(0.0, 1.0) } else { 0.0 };
    let lo = [68.0, 1.0, 84.0];
    let hi = [253.0, 231.0, 37.0];
    let c: Vec<u8> = (0..3).map(|i| (lo[i] + t * (hi[i] - lo[i])).round() as u8).collect();
    format!("#{:02x}{:02x}{:02x}", c[0], c[1], c[2])
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Heatmap of `values[row][col]` in `[0, 1]`; row 0 is drawn at the bottom.
pub fn heatmap_svg(
    title: &str,
    x_label: &str,
    y_label: &str,
    x_ticks: &[String],
    y_ticks: &[String],
    values: &[Vec<f64>],
) -> String {
    let cols = x_ticks.len();
    let rows = y_ticks.len();
    let width = MARGIN_L + cols * CELL_W + LEGEND_W;
    let height = MARGIN_T + rows * CELL_H + MARGIN_B;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="20" font-size="14" text-anchor="middle">{}</text>"#,
        width / 2,
        escape(title)
    );
    for (r, row) in values.iter().enumerate().take(rows) {
        let y = MARGIN_T + (rows - 1 - r) * CELL_H;
        for (c, &v) in row.iter().enumerate().take(cols) {
            let x = MARGIN_L + c * CELL_W;
            let _ = writeln!(
                s,
                r#"<rect x="{x}" y="{y}" width="{CELL_W}" height="{CELL_H}" fill="{}"><title>{:.2}</title></rect>"#,
                color(v),
                v
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#,
            MARGIN_L - 6,
            y + CELL_H / 2 + 4,
            escape(&y_ticks[r])
        );
    }
    let base = MARGIN_T + rows * CELL_H;
    for (c, t) in x_ticks.iter().enumerate() {
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            MARGIN_L + c * CELL_W + CELL_W / 2,
            base + 16,
            escape(t)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        MARGIN_L + cols * CELL_W / 2,
        base + 38,
        escape(x_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
        MARGIN_T + rows * CELL_H / 2,
        MARGIN_T + rows * CELL_H / 2,
        escape(y_label)
    );
    let lx = MARGIN_L + cols * CELL_W + 20;
    let steps = 10;
    let lh = (rows * CELL_H).max(steps);
    for i in 0..steps {
        let v = (i as f64 + 0.5) / steps as f64;
        let y0 = MARGIN_T + lh - (i + 1) * lh / steps;
        let y1 = MARGIN_T + lh - i * lh / steps;
        let _ = writeln!(
            s,
            r#"<rect x="{lx}" y="{y0}" width="14" height="{}" fill="{}"/>"#,
            y1 - y0,
            color(v)
        );
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}">1</text>"#, lx + 18, MARGIN_T + 10);
    let _ = writeln!(s, r#"<text x="{}" y="{}">0</text>"#, lx + 18, MARGIN_T + lh);
    s.push_str("</svg>\n");
    s
}
