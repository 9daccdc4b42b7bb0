//! Static SVG figures: transfer heatmaps, strategy box plots and residual
//! quantile plots. Self-contained documents with no external references.

use std::fmt::Write as _;

use curricula_core::scores::{Grid, StrategySummary};

const FONT: &str = "font-family=\"sans-serif\"";

pub fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            _ => out.push(c),
        }
    }
    out
}

fn open(width: f64, height: f64) -> String {
    format!(
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" viewBox=\"0 0 {width} {height}\">\n<rect x=\"0\" y=\"0\" width=\"{width}\" height=\"{height}\" fill=\"#ffffff\"/>\n"
    )
}

/// Diverging colour for a normalized score: white at `anchor`, blue below
/// (saturating at 0), red above (saturating at `2 * anchor`). Missing cells
/// are grey.
pub fn diverging_color(value: Option<f64>, anchor: f64) -> String {
    let Some(v) = value else {
        return "#cccccc".to_string();
    };
    let t = ((v - anchor) / anchor).clamp(-1.0, 1.0);
    let fade = |full: f64| -> u8 { (255.0 - (255.0 - full) * t.abs()).round() as u8 };
    let (r, g, b) = if t < 0.0 {
        (fade(33.0), fade(102.0), fade(172.0))
    } else {
        (fade(178.0), fade(24.0), fade(43.0))
    };
    format!("#{r:02x}{g:02x}{b:02x}")
}

/// Targets on rows, sources on columns; each cell labelled with its value.
pub fn heatmap(grid: &Grid, title: &str, anchor: f64) -> String {
    let cell = 34.0;
    let (left, top) = (50.0, 60.0);
    let width = left + cell * grid.sources.len() as f64 + 80.0;
    let height = top + cell * grid.targets.len() as f64 + 20.0;
    let mut s = open(width, height);
    let _ = writeln!(s, "<text x=\"{left}\" y=\"16\" {FONT} font-size=\"12\">{}</text>", escape(title));
    let _ = writeln!(s, "<text x=\"{left}\" y=\"30\" {FONT} font-size=\"10\">rows: target, columns: source</text>");
    for (j, src) in grid.sources.iter().enumerate() {
        let x = left + cell * (j as f64 + 0.5);
        let _ = writeln!(
            s,
            "<text x=\"{x}\" y=\"{}\" {FONT} font-size=\"10\" text-anchor=\"middle\">{src}</text>",
            top - 6.0
        );
    }
    for (i, tgt) in grid.targets.iter().enumerate() {
        let y = top + cell * i as f64;
        let _ = writeln!(
            s,
            "<text x=\"{}\" y=\"{}\" {FONT} font-size=\"10\" text-anchor=\"end\">{tgt}</text>",
            left - 4.0,
            y + cell / 2.0 + 3.0
        );
        for (j, v) in grid.cells[i].iter().enumerate() {
            let x = left + cell * j as f64;
            let label = v.map(|v| format!("{v:.0}")).unwrap_or_else(|| "n/a".into());
            let _ = writeln!(
                s,
                "<rect x=\"{x}\" y=\"{y}\" width=\"{cell}\" height=\"{cell}\" fill=\"{}\" stroke=\"#ffffff\"/><text x=\"{}\" y=\"{}\" {FONT} font-size=\"8\" text-anchor=\"middle\">{label}</text>",
                diverging_color(*v, anchor),
                x + cell / 2.0,
                y + cell / 2.0 + 3.0
            );
        }
    }
    // Legend: 0, anchor, 2 * anchor.
    let lx = left + cell * grid.sources.len() as f64 + 20.0;
    for (k, v) in [2.0 * anchor, anchor, 0.0].iter().enumerate() {
        let ly = top + 24.0 * k as f64;
        let _ = writeln!(
            s,
            "<rect x=\"{lx}\" y=\"{ly}\" width=\"14\" height=\"14\" fill=\"{}\" stroke=\"#888888\"/><text x=\"{}\" y=\"{}\" {FONT} font-size=\"10\">{v}</text>",
            diverging_color(Some(*v), anchor),
            lx + 18.0,
            ly + 11.0
        );
    }
    s.push_str("</svg>\n");
    s
}

/// One box per strategy: whiskers at the extremes, box at the quartiles,
/// line at the median.
pub fn boxplot(summaries: &[StrategySummary], title: &str) -> String {
    let (left, top, plot_h, slot) = (50.0, 30.0, 240.0, 80.0);
    let width = left + slot * summaries.len() as f64 + 20.0;
    let height = top + plot_h + 40.0;
    let values = summaries.iter().flat_map(|s| s.per_target.values().copied());
    let (lo, hi) = values.fold((0.0f64, 100.0f64), |(a, b), v| (a.min(v), b.max(v)));
    let y = |v: f64| top + plot_h * (hi - v) / (hi - lo);
    let mut s = open(width, height);
    let _ = writeln!(s, "<text x=\"{left}\" y=\"16\" {FONT} font-size=\"12\">{}</text>", escape(title));
    let _ = writeln!(
        s,
        "<line x1=\"{left}\" y1=\"{top}\" x2=\"{left}\" y2=\"{}\" stroke=\"#000000\"/>",
        top + plot_h
    );
    for v in [lo, 0.0, 40.0, 100.0, hi] {
        let _ = writeln!(
            s,
            "<text x=\"{}\" y=\"{}\" {FONT} font-size=\"10\" text-anchor=\"end\">{v:.0}</text><line x1=\"{left}\" y1=\"{yy}\" x2=\"{}\" y2=\"{yy}\" stroke=\"#dddddd\"/>",
            left - 4.0,
            y(v) + 3.0,
            width - 20.0,
            yy = y(v)
        );
    }
    for (k, sum) in summaries.iter().enumerate() {
        let cx = left + slot * (k as f64 + 0.5);
        let (min, max) = sum
            .per_target
            .values()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
        let half = slot * 0.3;
        let _ = writeln!(
            s,
            "<line x1=\"{cx}\" y1=\"{}\" x2=\"{cx}\" y2=\"{}\" stroke=\"#000000\"/>",
            y(max),
            y(min)
        );
        let _ = writeln!(
            s,
            "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"#9ecae1\" stroke=\"#000000\"/>",
            cx - half,
            y(sum.upper_quartile),
            2.0 * half,
            (y(sum.lower_quartile) - y(sum.upper_quartile)).max(0.5)
        );
        let _ = writeln!(
            s,
            "<line x1=\"{}\" y1=\"{ym}\" x2=\"{}\" y2=\"{ym}\" stroke=\"#b2182b\" stroke-width=\"2\"/>",
            cx - half,
            cx + half,
            ym = y(sum.median)
        );
        let _ = writeln!(
            s,
            "<text x=\"{cx}\" y=\"{}\" {FONT} font-size=\"10\" text-anchor=\"middle\">{}</text>",
            top + plot_h + 16.0,
            sum.strategy
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Normal quantile (x) against standardized residual (y), with the identity line.
pub fn quantile_plot(points: &[(f64, f64)], title: &str) -> String {
    let (left, top, size) = (50.0, 30.0, 260.0);
    let bound = points
        .iter()
        .fold(3.0f64, |m, (a, b)| m.max(a.abs()).max(b.abs()))
        .ceil();
    let px = |v: f64| left + size * (v + bound) / (2.0 * bound);
    let py = |v: f64| top + size * (bound - v) / (2.0 * bound);
    let mut s = open(left + size + 20.0, top + size + 40.0);
    let _ = writeln!(s, "<text x=\"{left}\" y=\"16\" {FONT} font-size=\"12\">{}</text>", escape(title));
    let _ = writeln!(
        s,
        "<rect x=\"{left}\" y=\"{top}\" width=\"{size}\" height=\"{size}\" fill=\"none\" stroke=\"#000000\"/>"
    );
    let _ = writeln!(
        s,
        "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#b2182b\"/>",
        px(-bound),
        py(-bound),
        px(bound),
        py(bound)
    );
    for (q, r) in points {
        let _ = writeln!(
            s,
            "<circle cx=\"{:.3}\" cy=\"{:.3}\" r=\"2\" fill=\"#2166ac\"/>",
            px(*q),
            py(*r)
        );
    }
    let _ = writeln!(
        s,
        "<text x=\"{}\" y=\"{}\" {FONT} font-size=\"10\" text-anchor=\"middle\">theoretical quantile</text>",
        left + size / 2.0,
        top + size + 20.0
    );
    s.push_str("</svg>\n");
    s
}
