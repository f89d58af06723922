//! Minimal SVG line charts of one metric against `N` (log2 axis).

use std::collections::BTreeMap;
use std::fmt::Write;

use super::record::ExperimentRecord;
use crate::error::{Error, Result};

/// Metric plotted when none is requested.
pub fn default_metric(experiment: &str) -> &'static str {
    match experiment {
        "hilbert_scaling" => "th_over_log",
        "growth_cn" => "lower_bound_over_log2",
        _ => "max_ratio",
    }
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 56.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

/// One series per `(n, p)` combination.
pub fn render_svg(records: &[ExperimentRecord], metric: &str) -> Result<String> {
    let mut series: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    for r in records {
        let (Some(dim), Some(v)) = (r.point.dim, r.metric(metric)) else {
            continue;
        };
        let mut label = String::new();
        if let Some(n) = r.point.n {
            write!(label, "n={n} ").unwrap();
        }
        if let Some(p) = r.point.p {
            write!(label, "p={p}").unwrap();
        }
        let label = if label.is_empty() { metric.to_string() } else { label.trim().to_string() };
        series.entry(label).or_default().push(((dim as f64).log2(), v));
    }
    if series.is_empty() {
        return Err(Error::Invalid(format!("no rows with N and metric `{metric}`")));
    }
    let pts = series.values().flatten();
    let (x0, x1) = pts.clone().fold((f64::INFINITY, f64::NEG_INFINITY), |a, p| (a.0.min(p.0), a.1.max(p.0)));
    let (y0, y1) = pts.fold((f64::INFINITY, f64::NEG_INFINITY), |a, p| (a.0.min(p.1), a.1.max(p.1)));
    let (x1, y1) = (if x1 > x0 { x1 } else { x0 + 1.0 }, if y1 > y0 { y1 } else { y0 + 1.0 });
    let sx = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
    let sy = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);

    let mut s = String::new();
    writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" font-family="sans-serif" font-size="12">"#).unwrap();
    writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
    let (l, r, t, b) = (MARGIN, WIDTH - MARGIN, MARGIN, HEIGHT - MARGIN);
    writeln!(s, r#"<path d="M{l},{t} L{l},{b} L{r},{b}" stroke="black" fill="none"/>"#).unwrap();
    for k in x0.ceil() as i64..=x1.floor() as i64 {
        let x = sx(k as f64);
        writeln!(s, r#"<text x="{x:.1}" y="{:.1}" text-anchor="middle">{}</text>"#, b + 16.0, 1u64 << k.max(0)).unwrap();
    }
    for (y, anchor) in [(y0, b), (y1, t)] {
        writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{y:.4}</text>"#, l - 4.0, anchor + 4.0).unwrap();
    }
    writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">N</text>"#, WIDTH / 2.0, HEIGHT - 12.0).unwrap();
    writeln!(s, r#"<text x="{l}" y="{:.1}">{metric}</text>"#, t - 12.0).unwrap();
    for (i, (label, pts)) in series.iter_mut().enumerate() {
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        let color = COLORS[i % COLORS.len()];
        let d: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.1},{:.1}", sx(x), sy(y))).collect();
        writeln!(s, r#"<polyline points="{}" stroke="{color}" fill="none" stroke-width="1.5"/>"#, d.join(" ")).unwrap();
        for &(x, y) in pts.iter() {
            writeln!(s, r#"<circle cx="{:.1}" cy="{:.1}" r="2.5" fill="{color}"/>"#, sx(x), sy(y)).unwrap();
        }
        writeln!(s, r#"<text x="{:.1}" y="{:.1}" fill="{color}">{label}</text>"#, r - 90.0, t + 14.0 * (i as f64 + 1.0)).unwrap();
    }
    s.push_str("</svg>\n");
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::record::GridPoint;

    #[test]
    fn renders_series() {
        let recs: Vec<ExperimentRecord> = [2, 4, 8]
            .iter()
            .map(|&d| ExperimentRecord {
                experiment: "hilbert_scaling".into(),
                config_hash: "h".into(),
                point: GridPoint::new(Some(d), None, None),
                seed: 0,
                metrics: vec![("th_over_log".into(), d as f64 * 0.1)],
                wall_time: 0.0,
            })
            .collect();
        let svg = render_svg(&recs, default_metric("hilbert_scaling")).unwrap();
        assert!(svg.starts_with("<svg") && svg.contains("<polyline"));
        assert_eq!(svg.matches("<circle").count(), 3);
        assert!(render_svg(&recs, "missing").is_err());
    }
}
