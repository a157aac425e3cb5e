//! Line plots of aggregate CSV metrics as standalone SVG files.

use std::fmt::Write as _;

/// Metric columns that can be plotted against K.
pub const METRICS: &[&str] = &["far", "mr", "sr", "cee", "wall_s"];

fn column_index(metric: &str) -> Option<usize> {
    match metric {
        "far" => Some(6),
        "mr" => Some(7),
        "sr" => Some(8),
        "cee" => Some(9),
        "wall_s" => Some(10),
        _ => None,
    }
}

/// One algorithm's `(K, value)` points, labeled.
pub type Series = (String, Vec<(f64, f64)>);

/// Pull `(K, metric)` pairs from the aggregate rows (trial = -1) of a CSV
/// produced by the runner, one series per algorithm label.
pub fn aggregate_series(csv: &str, metric: &str) -> Result<Vec<Series>, String> {
    let col = column_index(metric)
        .ok_or_else(|| format!("unknown metric {metric:?} (expected one of {METRICS:?})"))?;
    let mut series: Vec<Series> = Vec::new();
    for (ln, line) in csv.lines().enumerate().skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 11 {
            return Err(format!("line {}: expected 11 columns, got {}", ln + 1, fields.len()));
        }
        if fields[1] != "-1" {
            continue;
        }
        let k: f64 = fields[0].parse().map_err(|e| format!("line {}: bad K: {e}", ln + 1))?;
        let value: f64 = if fields[col] == "NaN" {
            continue;
        } else {
            fields[col].parse().map_err(|e| format!("line {}: bad value: {e}", ln + 1))?
        };
        let label = fields[3].to_string();
        match series.iter_mut().find(|(name, _)| *name == label) {
            Some((_, points)) => points.push((k, value)),
            None => series.push((label, vec![(k, value)])),
        }
    }
    if series.is_empty() {
        return Err("no aggregate rows (trial = -1) found in the CSV".into());
    }
    Ok(series)
}

const COLORS: &[&str] = &["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

/// Render one metric across sweep points as a self-contained SVG document.
pub fn render_svg(series: &[Series], metric: &str) -> String {
    let (width, height) = (640.0, 420.0);
    let (left, right, top, bottom) = (70.0, 20.0, 30.0, 50.0);
    let (pw, ph) = (width - left - right, height - top - bottom);
    let all: Vec<(f64, f64)> = series.iter().flat_map(|(_, pts)| pts.iter().copied()).collect();
    let (mut x0, mut x1) = all.iter().fold((f64::MAX, f64::MIN), |(lo, hi), &(x, _)| {
        (lo.min(x), hi.max(x))
    });
    let (mut y0, mut y1) = all.iter().fold((f64::MAX, f64::MIN), |(lo, hi), &(_, y)| {
        (lo.min(y), hi.max(y))
    });
    if x0 == x1 {
        x0 -= 1.0;
        x1 += 1.0;
    }
    if y0 == y1 {
        y0 -= 0.5;
        y1 += 0.5;
    }
    let y_pad = 0.05 * (y1 - y0);
    y0 -= y_pad;
    y1 += y_pad;
    let sx = move |x: f64| left + (x - x0) / (x1 - x0) * pw;
    let sy = move |y: f64| top + (1.0 - (y - y0) / (y1 - y0)) * ph;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" \
         viewBox=\"0 0 {width} {height}\" font-family=\"sans-serif\" font-size=\"12\">"
    );
    let _ = writeln!(svg, "<rect width=\"{width}\" height=\"{height}\" fill=\"white\"/>");
    // Axes and ticks.
    let _ = writeln!(
        svg,
        "<line x1=\"{left}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>",
        height - bottom,
        width - right,
        height - bottom
    );
    let _ = writeln!(
        svg,
        "<line x1=\"{left}\" y1=\"{top}\" x2=\"{left}\" y2=\"{}\" stroke=\"black\"/>",
        height - bottom
    );
    for i in 0..=4 {
        let fx = x0 + (x1 - x0) * i as f64 / 4.0;
        let fy = y0 + (y1 - y0) * i as f64 / 4.0;
        let _ = writeln!(
            svg,
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{:.0}</text>",
            sx(fx),
            height - bottom + 18.0,
            fx
        );
        let _ = writeln!(
            svg,
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{:.3}</text>",
            left - 6.0,
            sy(fy) + 4.0,
            fy
        );
        let _ = writeln!(
            svg,
            "<line x1=\"{left}\" y1=\"{:.1}\" x2=\"{}\" y2=\"{:.1}\" stroke=\"#ddd\"/>",
            sy(fy),
            width - right,
            sy(fy)
        );
    }
    let _ = writeln!(
        svg,
        "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">K (active devices)</text>",
        left + pw / 2.0,
        height - 12.0
    );
    let _ = writeln!(
        svg,
        "<text x=\"16\" y=\"{:.1}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {:.1})\">{metric}</text>",
        top + ph / 2.0,
        top + ph / 2.0
    );
    for (i, (label, points)) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let path: Vec<String> =
            points.iter().map(|&(x, y)| format!("{:.1},{:.1}", sx(x), sy(y))).collect();
        let _ = writeln!(
            svg,
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.8\" points=\"{}\"/>",
            path.join(" ")
        );
        for &(x, y) in points {
            let _ = writeln!(
                svg,
                "<circle cx=\"{:.1}\" cy=\"{:.1}\" r=\"3\" fill=\"{color}\"/>",
                sx(x),
                sy(y)
            );
        }
        let _ = writeln!(
            svg,
            "<text x=\"{:.1}\" y=\"{:.1}\" fill=\"{color}\">{label}</text>",
            width - right - 80.0,
            top + 16.0 * (i + 1) as f64
        );
    }
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "K,trial,seed,algorithm,n_output,n_incell,far,mr,sr,cee,wall_s\n\
        40,0,1,alg2,41,40,0.024390,0.000000,1.000000,0.000000,0.000000\n\
        40,-1,1,alg2,41,40,0.020000,0.010000,0.990000,0.005000,0.000000\n\
        80,-1,1,alg2,83,80,0.050000,0.030000,0.970000,NaN,0.000000\n";

    #[test]
    fn extracts_aggregate_rows_only() {
        let series = aggregate_series(SAMPLE, "sr").unwrap();
        assert_eq!(series.len(), 1);
        assert_eq!(series[0].0, "alg2");
        assert_eq!(series[0].1, vec![(40.0, 0.99), (80.0, 0.97)]);
    }

    #[test]
    fn nan_points_are_skipped() {
        let series = aggregate_series(SAMPLE, "cee").unwrap();
        assert_eq!(series[0].1, vec![(40.0, 0.005)]);
    }

    #[test]
    fn unknown_metric_rejected() {
        assert!(aggregate_series(SAMPLE, "nope").is_err());
    }

    #[test]
    fn svg_is_well_formed_enough() {
        let series = aggregate_series(SAMPLE, "sr").unwrap();
        let svg = render_svg(&series, "sr");
        assert!(svg.starts_with("<svg"));
        assert!(svg.ends_with("</svg>\n"));
        assert!(svg.contains("polyline"));
        assert!(svg.contains("alg2"));
    }
}
