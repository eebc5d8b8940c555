use std::fmt::Write;

use super::experiment::{ExperimentReport, PieceCurve};
use crate::models::Variant;

#[derive(Clone, Copy)]
enum Measure {
    Mse,
    R2,
    R,
    RawMse,
}

impl Measure {
    fn heading(self) -> &'static str {
        match self {
            Measure::Mse => "MSE",
            Measure::R2 => "R²",
            Measure::R => "r",
            Measure::RawMse => "MSE (LU²)",
        }
    }

    fn lower_is_better(self) -> bool {
        matches!(self, Measure::Mse | Measure::RawMse)
    }
}

/// Aligned plain-text table: one row per piece, one column group per
/// measure, one column per variant. The best value of each group is marked
/// with `*` when more than one variant ran. `raw` appends MSE in loudness
/// units.
pub fn format_table(report: &ExperimentReport, raw: bool) -> String {
    let variants = &report.config.variants;
    let mut measures = vec![Measure::Mse, Measure::R2, Measure::R];
    if raw {
        measures.push(Measure::RawMse);
    }

    let mut grid: Vec<Vec<String>> = Vec::new();
    let mut head1 = vec!["Piece".to_string()];
    let mut head2 = vec![String::new()];
    for &m in &measures {
        for (i, v) in variants.iter().enumerate() {
            head1.push(if i == 0 { m.heading().to_string() } else { String::new() });
            head2.push(v.heading().to_string());
        }
    }
    grid.push(head1);
    grid.push(head2);

    for id in report.piece_ids() {
        let mut row = vec![id.to_string()];
        for &m in &measures {
            let vals: Vec<Option<f64>> = variants.iter().map(|&v| value(report, id, v, m)).collect();
            let best = vals.iter().flatten().copied().reduce(|a, b| {
                if m.lower_is_better() { a.min(b) } else { a.max(b) }
            });
            for v in vals {
                row.push(match v {
                    None => "-".to_string(),
                    Some(x) => {
                        let flag = variants.len() > 1 && Some(x) == best;
                        format!("{x:.2}{}", if flag { "*" } else { "" })
                    }
                });
            }
        }
        grid.push(row);
    }

    let ncols = grid[0].len();
    let widths: Vec<usize> = (0..ncols)
        .map(|c| grid.iter().map(|r| r[c].chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for row in &grid {
        let mut line = String::new();
        for (c, cell) in row.iter().enumerate() {
            let pad = widths[c] - cell.chars().count();
            if c == 0 {
                line.push_str(cell);
                line.push_str(&" ".repeat(pad));
            } else {
                line.push_str("  ");
                line.push_str(&" ".repeat(pad));
                line.push_str(cell);
            }
        }
        out.push_str(line.trim_end());
        out.push('\n');
    }
    out
}

fn value(report: &ExperimentReport, id: &str, v: Variant, m: Measure) -> Option<f64> {
    let f = report.fold(id, v).filter(|f| f.is_ok())?;
    match m {
        Measure::Mse => Some(f.mse),
        Measure::R2 => Some(f.r2),
        Measure::R => f.pearson,
        Measure::RawMse => Some(f.raw_mse),
    }
}

const WIDTH: f64 = 800.0;
const PANEL: f64 = 160.0;
const MARGIN: f64 = 20.0;
const COLORS: [&str; 3] = ["#c0392b", "#2471a3", "#7d8c1f"];

/// Two stacked panels: the recorded curve above, predictions below.
pub fn curve_svg(curve: &PieceCurve) -> String {
    let height = 2.0 * PANEL + 3.0 * MARGIN;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" viewBox="0 0 {WIDTH} {height}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let xs: Vec<f64> = curve.onsets.iter().map(|o| o.to_f64()).collect();
    let (x0, x1) = bounds(xs.iter().copied());
    let preds: Vec<&Vec<f64>> = curve.predicted.iter().filter_map(|(_, p)| p.as_ref()).collect();
    let (lo, hi) = bounds(curve.actual.iter().chain(preds.iter().flat_map(|p| p.iter())).copied());

    let top = MARGIN;
    let bottom = 2.0 * MARGIN + PANEL;
    panel(&mut s, top, &format!("{} actual", curve.piece_id));
    polyline(&mut s, &xs, &curve.actual, (x0, x1), (lo, hi), top, "black");
    panel(&mut s, bottom, "predicted");
    for (i, (v, p)) in curve.predicted.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        if let Some(p) = p {
            polyline(&mut s, &xs, p, (x0, x1), (lo, hi), bottom, color);
        }
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-size="11" fill="{color}">{}</text>"#,
            WIDTH - MARGIN - 40.0 * (curve.predicted.len() - i) as f64,
            bottom + 12.0,
            v.heading()
        );
    }
    s.push_str("</svg>\n");
    s
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if hi - lo < 1e-12 {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

fn panel(s: &mut String, y: f64, title: &str) {
    let _ = writeln!(
        s,
        r##"<rect x="{MARGIN}" y="{y}" width="{}" height="{PANEL}" fill="none" stroke="#999"/>"##,
        WIDTH - 2.0 * MARGIN
    );
    let _ = writeln!(s, r#"<text x="{}" y="{}" font-size="11">{}</text>"#, MARGIN + 4.0, y + 12.0, escape(title));
}

fn polyline(s: &mut String, xs: &[f64], ys: &[f64], (x0, x1): (f64, f64), (lo, hi): (f64, f64), y: f64, color: &str) {
    let w = WIDTH - 2.0 * MARGIN;
    let sx = if x1 > x0 { w / (x1 - x0) } else { 0.0 };
    let pts: Vec<String> = xs
        .iter()
        .zip(ys)
        .map(|(&x, &v)| {
            let px = MARGIN + (x - x0) * sx;
            let py = y + PANEL - (v - lo) / (hi - lo) * PANEL;
            format!("{px:.2},{py:.2}")
        })
        .collect();
    let _ = writeln!(
        s,
        r#"<polyline fill="none" stroke="{color}" stroke-width="1" points="{}"/>"#,
        pts.join(" ")
    );
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
