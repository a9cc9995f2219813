//! Minimal SVG line charts.

use std::fmt::Write as _;

use consistency_lab::report::{format_float, Table};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 56.0;
const COLOURS: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf",
];

/// One polyline.
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

/// What to draw for a table: x column, y columns and an optional grouping
/// column that splits rows into separate series.
pub struct PlotSpec {
    pub x: &'static str,
    pub ys: &'static [&'static str],
    pub group: Option<&'static [&'static str]>,
}

pub fn spec_for(table: &str) -> Option<PlotSpec> {
    let spec = match table {
        "error_curve" => PlotSpec {
            x: "n",
            ys: &["alpha_mc", "beta_mc", "sum_exact", "alpha_bound"],
            group: None,
        },
        "epsilon_sweep" => PlotSpec {
            x: "epsilon",
            ys: &["sum_exact", "sum_mc"],
            group: None,
        },
        "prefix_bounds" => PlotSpec {
            x: "m",
            ys: &["hull_variation", "kraft_bound"],
            group: None,
        },
        "member_distances" => PlotSpec {
            x: "alternative",
            ys: &["tv_discretized", "tv_exact"],
            group: None,
        },
        "margins" => PlotSpec {
            x: "alternative",
            ys: &["margin"],
            group: None,
        },
        "projection" => PlotSpec {
            x: "m",
            ys: &["margin"],
            group: None,
        },
        "discernibility" => PlotSpec {
            x: "k",
            ys: &["error_after", "tail_bound"],
            group: Some(&["role", "member"]),
        },
        _ => return None,
    };
    Some(spec)
}

fn text(table: &Table, row: usize, col: &str) -> String {
    let idx = table.columns.iter().position(|c| c == col).expect("group column exists");
    match &table.rows[row][idx] {
        consistency_lab::report::Field::Text(s) => s.clone(),
        other => other.as_f64().map(format_float).unwrap_or_default(),
    }
}

pub fn series(table: &Table, spec: &PlotSpec) -> Vec<Series> {
    let Some(xs) = table.column(spec.x) else {
        return Vec::new();
    };
    let mut out: Vec<Series> = Vec::new();
    for y in spec.ys {
        let Some(ys) = table.column(y) else { continue };
        for (row, (x, v)) in xs.iter().zip(&ys).enumerate() {
            let (Some(x), Some(v)) = (x, v) else { continue };
            if !x.is_finite() || !v.is_finite() {
                continue;
            }
            let name = match spec.group {
                Some(cols) => {
                    let g: Vec<String> = cols.iter().map(|c| text(table, row, c)).collect();
                    format!("{y} {}", g.join(" "))
                }
                None => y.to_string(),
            };
            match out.iter_mut().find(|s| s.name == name) {
                Some(s) => s.points.push((*x, *v)),
                None => out.push(Series {
                    name,
                    points: vec![(*x, *v)],
                }),
            }
        }
    }
    out
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-300 {
        return (lo - 0.5, hi + 0.5);
    }
    (lo, hi)
}

pub fn render(title: &str, x_label: &str, series: &[Series]) -> String {
    let (x0, x1) = range(series.iter().flat_map(|s| s.points.iter().map(|p| p.0)));
    let (y0, y1) = range(series.iter().flat_map(|s| s.points.iter().map(|p| p.1)));
    let sx = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
    let sy = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(svg, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#, WIDTH / 2.0, escape(title));
    let (left, right, top, bottom) = (MARGIN, WIDTH - MARGIN, MARGIN, HEIGHT - MARGIN);
    let _ = writeln!(
        svg,
        r#"<path d="M{left} {top} L{left} {bottom} L{right} {bottom}" stroke="black" fill="none"/>"#
    );
    for i in 0..=4 {
        let t = i as f64 / 4.0;
        let (xv, yv) = (x0 + t * (x1 - x0), y0 + t * (y1 - y0));
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            sx(xv),
            bottom + 16.0,
            tick(xv)
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
            left - 4.0,
            sy(yv) + 4.0,
            tick(yv)
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        WIDTH / 2.0,
        HEIGHT - 12.0,
        escape(x_label)
    );
    for (i, s) in series.iter().enumerate() {
        let colour = COLOURS[i % COLOURS.len()];
        let pts: Vec<String> = s.points.iter().map(|(x, y)| format!("{:.2},{:.2}", sx(*x), sy(*y))).collect();
        let _ = writeln!(
            svg,
            r#"<polyline points="{}" stroke="{colour}" stroke-width="1.5" fill="none"/>"#,
            pts.join(" ")
        );
        let ly = top + 14.0 * i as f64;
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{ly:.1}" fill="{colour}" text-anchor="end">{}</text>"#,
            right,
            escape(&s.name)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn tick(v: f64) -> String {
    if v != 0.0 && (v.abs() < 1e-2 || v.abs() >= 1e4) {
        format!("{v:.1e}")
    } else {
        format!("{v:.3}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_polylines_and_legend() {
        let s = vec![
            Series {
                name: "a<b".into(),
                points: vec![(0.0, 0.0), (1.0, 1.0)],
            },
            Series {
                name: "flat".into(),
                points: vec![(0.0, 0.5), (1.0, 0.5)],
            },
        ];
        let svg = render("t", "x", &s);
        assert!(svg.starts_with("<svg"));
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains("a&lt;b"));
        assert!(svg.trim_end().ends_with("</svg>"));
    }

    #[test]
    fn grouped_series_split_by_member() {
        let mut t = Table::new("discernibility", &["role", "member", "k", "error_after", "tail_bound"]);
        for (role, k, e) in [("hypothesis", 0u64, 0.5), ("hypothesis", 4, 0.1), ("alternative", 0, 0.3)] {
            t.push(vec![role.into(), 1u64.into(), k.into(), e.into(), 1.0.into()]);
        }
        let s = series(&t, &spec_for("discernibility").unwrap());
        assert_eq!(s.len(), 4);
        assert_eq!(s[0].points.len(), 2);
    }

    #[test]
    fn degenerate_ranges_do_not_divide_by_zero() {
        let svg = render("t", "x", &[Series { name: "p".into(), points: vec![(1.0, 2.0)] }]);
        assert!(!svg.contains("NaN"));
        assert!(render("empty", "x", &[]).contains("</svg>"));
    }
}
