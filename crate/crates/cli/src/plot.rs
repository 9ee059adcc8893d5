//! Minimal SVG line charts from report CSVs.

use crate::error::{CliError, Result};
use std::fmt::Write as _;
use std::path::Path;

const W: f64 = 640.0;
const H: f64 = 420.0;
const PAD: f64 = 56.0;
const COLORS: [&str; 6] = [
    "#000000", "#d62728", "#1f77b4", "#2ca02c", "#9467bd", "#ff7f0e",
];

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

/// Parses a numeric CSV; `#` lines are comments, the first other line is
/// the header. Non-numeric cells read as NaN.
pub fn parse_csv(text: &str) -> std::result::Result<Table, String> {
    let mut lines = text
        .lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty());
    let columns: Vec<String> = lines
        .next()
        .ok_or("no header line")?
        .split(',')
        .map(|s| s.trim().to_string())
        .collect();
    let mut rows = Vec::new();
    for (i, l) in lines.enumerate() {
        let row: Vec<f64> = l
            .split(',')
            .map(|c| c.trim().parse().unwrap_or(f64::NAN))
            .collect();
        if row.len() != columns.len() {
            return Err(format!("row {} has {} cells", i + 1, row.len()));
        }
        rows.push(row);
    }
    Ok(Table { columns, rows })
}

/// Line chart of every column against the first; `log` uses log10 axes and
/// skips nonpositive points.
pub fn render_svg(t: &Table, title: &str, log: bool) -> String {
    let tx = |v: f64| if log { v.log10() } else { v };
    let pts: Vec<Vec<(f64, f64)>> = (1..t.columns.len())
        .map(|c| {
            t.rows
                .iter()
                .filter(|r| !log || (r[0] > 0.0 && r[c] > 0.0))
                .map(|r| (tx(r[0]), tx(r[c])))
                .filter(|(x, y)| x.is_finite() && y.is_finite())
                .collect()
        })
        .collect();
    let all = pts.iter().flatten();
    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for &(x, y) in all {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if x0 > x1 {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 == x0 {
        x1 = x0 + 1.0;
    }
    if y1 == y0 {
        y1 = y0 + 1.0;
    }
    let sx = |x: f64| PAD + (x - x0) / (x1 - x0) * (W - 2.0 * PAD);
    let sy = |y: f64| H - PAD - (y - y0) / (y1 - y0) * (H - 2.0 * PAD);
    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" font-family=\"sans-serif\" font-size=\"12\">\n"
    );
    let _ = writeln!(s, "<rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>");
    let _ = writeln!(
        s,
        "<rect x=\"{PAD}\" y=\"{PAD}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#888\"/>",
        W - 2.0 * PAD,
        H - 2.0 * PAD
    );
    let _ = writeln!(
        s,
        "<text x=\"{PAD}\" y=\"24\" font-size=\"14\">{}</text>",
        escape(title)
    );
    let label = |v: f64| {
        if log {
            format!("1e{v:.1}")
        } else {
            format!("{v:.3e}")
        }
    };
    let _ = writeln!(
        s,
        "<text x=\"{PAD}\" y=\"{}\">{}</text>",
        H - PAD + 18.0,
        label(x0)
    );
    let _ = writeln!(
        s,
        "<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{}</text>",
        W - PAD,
        H - PAD + 18.0,
        label(x1)
    );
    let _ = writeln!(s, "<text x=\"4\" y=\"{}\">{}</text>", H - PAD, label(y0));
    let _ = writeln!(s, "<text x=\"4\" y=\"{}\">{}</text>", PAD + 4.0, label(y1));
    let _ = writeln!(
        s,
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>",
        W / 2.0,
        H - 12.0,
        escape(&t.columns[0])
    );
    for (c, p) in pts.iter().enumerate() {
        let color = COLORS[c % COLORS.len()];
        if !p.is_empty() {
            let path: Vec<String> = p
                .iter()
                .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
                .collect();
            let _ = writeln!(
                s,
                "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>",
                path.join(" ")
            );
        }
        let ly = PAD + 16.0 + 16.0 * c as f64;
        let _ = writeln!(
            s,
            "<text x=\"{}\" y=\"{ly}\" fill=\"{color}\" text-anchor=\"end\">{}</text>",
            W - PAD - 6.0,
            escape(&t.columns[c + 1])
        );
    }
    s.push_str("</svg>\n");
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

pub fn plot_file(input: &Path, out: &Path, log: bool) -> Result<()> {
    let text = std::fs::read_to_string(input).map_err(|e| CliError::io(input, e))?;
    let table = parse_csv(&text).map_err(|e| CliError::format(input, e))?;
    if table.columns.len() < 2 {
        return Err(CliError::format(input, "need at least two columns"));
    }
    let title = input
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let svg = render_svg(&table, &title, log);
    std::fs::write(out, svg).map_err(|e| CliError::io(out, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_report_csv_with_comment() {
        let t =
            parse_csv("# config_hash=ab\nkappa,truth,none\n1e-5,2.0,3.0\n2e-5,nan,1.0\n").unwrap();
        assert_eq!(t.columns, vec!["kappa", "truth", "none"]);
        assert_eq!(t.rows.len(), 2);
        assert!(t.rows[1][1].is_nan());
        assert!(parse_csv("a,b\n1\n").is_err());
        assert!(parse_csv("# only\n").is_err());
    }

    #[test]
    fn svg_has_one_polyline_per_series() {
        let t = parse_csv("x,a,b\n1,1,2\n10,10,0\n100,100,5\n").unwrap();
        let svg = render_svg(&t, "t<1>", true);
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains("t&lt;1&gt;"));
        assert!(svg.ends_with("</svg>\n"));
    }
}
