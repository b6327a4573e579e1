//! Report emission: requirement-level CSV tables and static SVG figures
//! (per-requirement mean with CI, readiness percentile with CI, and the
//! external-signal scatter).

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::aggregation::RequirementSummary;
use crate::requirement::RequirementId;

/// Per-requirement dimension means plus GapScore and Readiness
/// (`Requirement, E, M, G, K, GapScore, Readiness`).
pub fn table3_csv(summaries: &[RequirementSummary]) -> String {
    let mut out = String::from("Requirement,E,M,G,K,GapScore,Readiness\n");
    for s in summaries {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            s.requirement_id,
            s.dim_means[0],
            s.dim_means[1],
            s.dim_means[2],
            s.dim_means[3],
            s.gap_mean,
            s.readiness_p
        );
    }
    out
}

/// Extended per-requirement statistics with confidence intervals.
pub fn table5_csv(summaries: &[RequirementSummary]) -> String {
    let mut out = String::from(
        "Requirement,n,GapScore_mean,GapScore_CI_low,GapScore_CI_high,Readiness_P,Readiness_CI_low,Readiness_CI_high,Share_Readiness_ge3\n",
    );
    for s in summaries {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            s.requirement_id,
            s.n,
            s.gap_mean,
            s.gap_ci.0,
            s.gap_ci.1,
            s.readiness_p,
            s.readiness_ci.0,
            s.readiness_ci.1,
            s.share_ge3
        );
    }
    out
}

/// Priority tier assignment per requirement.
pub fn table6_csv(summaries: &[RequirementSummary]) -> String {
    let mut out = String::from("Requirement,GapScore,Readiness,Priority,Tier\n");
    for s in summaries {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            s.requirement_id, s.gap_mean, s.readiness_p, s.priority, s.tier
        );
    }
    out
}

/// One labeled value with a confidence interval.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorBarPoint {
    pub label: String,
    pub value: f64,
    pub lo: f64,
    pub hi: f64,
}

/// One labeled scatter point.
#[derive(Debug, Clone, PartialEq)]
pub struct ScatterPoint {
    pub label: String,
    pub x: f64,
    pub y: f64,
}

pub fn gap_figure_points(summaries: &[RequirementSummary]) -> Vec<ErrorBarPoint> {
    summaries
        .iter()
        .map(|s| ErrorBarPoint {
            label: s.requirement_id.to_string(),
            value: s.gap_mean,
            lo: s.gap_ci.0,
            hi: s.gap_ci.1,
        })
        .collect()
}

pub fn readiness_figure_points(summaries: &[RequirementSummary]) -> Vec<ErrorBarPoint> {
    summaries
        .iter()
        .map(|s| ErrorBarPoint {
            label: s.requirement_id.to_string(),
            value: s.readiness_p,
            lo: s.readiness_ci.0,
            hi: s.readiness_ci.1,
        })
        .collect()
}

/// Signal-rate (x) versus readiness (y) scatter points, one per requirement
/// present in both inputs.
pub fn signal_scatter_points(
    rates: &BTreeMap<RequirementId, f64>,
    summaries: &[RequirementSummary],
) -> Vec<ScatterPoint> {
    summaries
        .iter()
        .filter_map(|s| {
            rates.get(&s.requirement_id).map(|rate| ScatterPoint {
                label: s.requirement_id.to_string(),
                x: *rate,
                y: s.readiness_p,
            })
        })
        .collect()
}

pub fn error_bar_csv(points: &[ErrorBarPoint]) -> String {
    let mut out = String::from("label,value,ci_low,ci_high\n");
    for p in points {
        let _ = writeln!(out, "{},{},{},{}", p.label, p.value, p.lo, p.hi);
    }
    out
}

pub fn scatter_csv(points: &[ScatterPoint]) -> String {
    let mut out = String::from("label,x,y\n");
    for p in points {
        let _ = writeln!(out, "{},{},{}", p.label, p.x, p.y);
    }
    out
}

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 420.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 30.0;
const MARGIN_TOP: f64 = 50.0;
const MARGIN_BOTTOM: f64 = 60.0;

fn escape_xml(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn svg_header(title: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"sans-serif\" font-size=\"12\">\n\
         <rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n\
         <text x=\"{x}\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">{title}</text>\n",
        x = WIDTH / 2.0,
        title = escape_xml(title)
    )
}

fn y_axis(out: &mut String, y_min: f64, y_max: f64, label: &str) {
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let _ = writeln!(
        out,
        "<line x1=\"{MARGIN_LEFT}\" y1=\"{MARGIN_TOP}\" x2=\"{MARGIN_LEFT}\" y2=\"{}\" stroke=\"black\"/>",
        MARGIN_TOP + plot_h
    );
    let ticks = 5usize;
    for i in 0..=ticks {
        let frac = i as f64 / ticks as f64;
        let value = y_min + frac * (y_max - y_min);
        let y = MARGIN_TOP + plot_h * (1.0 - frac);
        let _ = writeln!(
            out,
            "<line x1=\"{}\" y1=\"{y:.2}\" x2=\"{MARGIN_LEFT}\" y2=\"{y:.2}\" stroke=\"black\"/>",
            MARGIN_LEFT - 5.0
        );
        let _ = writeln!(
            out,
            "<text x=\"{}\" y=\"{:.2}\" text-anchor=\"end\">{value:.1}</text>",
            MARGIN_LEFT - 9.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        out,
        "<text x=\"18\" y=\"{:.2}\" transform=\"rotate(-90 18 {:.2})\" text-anchor=\"middle\">{}</text>",
        MARGIN_TOP + plot_h / 2.0,
        MARGIN_TOP + plot_h / 2.0,
        escape_xml(label)
    );
}

/// Point-and-error-bar chart over categorical labels.
pub fn error_bar_chart_svg(
    title: &str,
    y_label: &str,
    y_range: (f64, f64),
    points: &[ErrorBarPoint],
) -> String {
    let (y_min, y_max) = y_range;
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let to_y = |v: f64| {
        let clamped = v.clamp(y_min, y_max);
        MARGIN_TOP + plot_h * (1.0 - (clamped - y_min) / (y_max - y_min))
    };

    let mut out = svg_header(title);
    y_axis(&mut out, y_min, y_max, y_label);
    let _ = writeln!(
        out,
        "<line x1=\"{MARGIN_LEFT}\" y1=\"{y}\" x2=\"{x2}\" y2=\"{y}\" stroke=\"black\"/>",
        y = MARGIN_TOP + plot_h,
        x2 = MARGIN_LEFT + plot_w
    );
    let n = points.len().max(1) as f64;
    for (i, p) in points.iter().enumerate() {
        let x = MARGIN_LEFT + plot_w * (i as f64 + 0.5) / n;
        let _ = writeln!(
            out,
            "<line x1=\"{x:.2}\" y1=\"{:.2}\" x2=\"{x:.2}\" y2=\"{:.2}\" stroke=\"steelblue\" stroke-width=\"2\"/>",
            to_y(p.hi),
            to_y(p.lo)
        );
        for cap in [p.lo, p.hi] {
            let _ = writeln!(
                out,
                "<line x1=\"{:.2}\" y1=\"{y:.2}\" x2=\"{:.2}\" y2=\"{y:.2}\" stroke=\"steelblue\" stroke-width=\"2\"/>",
                x - 5.0,
                x + 5.0,
                y = to_y(cap)
            );
        }
        let _ = writeln!(
            out,
            "<circle cx=\"{x:.2}\" cy=\"{:.2}\" r=\"4\" fill=\"steelblue\"/>",
            to_y(p.value)
        );
        let _ = writeln!(
            out,
            "<text x=\"{x:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{}</text>",
            MARGIN_TOP + plot_h + 18.0,
            escape_xml(&p.label)
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Labeled scatter plot with automatic ranges.
pub fn scatter_svg(
    title: &str,
    x_label: &str,
    y_label: &str,
    points: &[ScatterPoint],
) -> String {
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let (mut x_min, mut x_max) = (0.0f64, 1.0f64);
    let (mut y_min, mut y_max) = (0.0f64, 5.0f64);
    for p in points {
        x_min = x_min.min(p.x);
        x_max = x_max.max(p.x);
        y_min = y_min.min(p.y);
        y_max = y_max.max(p.y);
    }
    let to_x = |v: f64| MARGIN_LEFT + plot_w * (v - x_min) / (x_max - x_min);
    let to_y = |v: f64| MARGIN_TOP + plot_h * (1.0 - (v - y_min) / (y_max - y_min));

    let mut out = svg_header(title);
    y_axis(&mut out, y_min, y_max, y_label);
    let _ = writeln!(
        out,
        "<line x1=\"{MARGIN_LEFT}\" y1=\"{y}\" x2=\"{x2}\" y2=\"{y}\" stroke=\"black\"/>",
        y = MARGIN_TOP + plot_h,
        x2 = MARGIN_LEFT + plot_w
    );
    let _ = writeln!(
        out,
        "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{}</text>",
        MARGIN_LEFT + plot_w / 2.0,
        HEIGHT - 16.0,
        escape_xml(x_label)
    );
    for p in points {
        let _ = writeln!(
            out,
            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"4\" fill=\"firebrick\"/>",
            to_x(p.x),
            to_y(p.y)
        );
        let _ = writeln!(
            out,
            "<text x=\"{:.2}\" y=\"{:.2}\">{}</text>",
            to_x(p.x) + 6.0,
            to_y(p.y) - 6.0,
            escape_xml(&p.label)
        );
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aggregation::Tier;

    fn summary(r: RequirementId, gap: f64, readiness: f64) -> RequirementSummary {
        RequirementSummary {
            requirement_id: r,
            n: 10,
            gap_mean: gap,
            gap_ci: (gap - 0.2, gap + 0.2),
            readiness_p: readiness,
            readiness_ci: (readiness - 1.0, readiness),
            share_ge3: 0.3,
            priority: gap * (1.0 - readiness / 5.0),
            tier: Tier::P2,
            dim_means: [gap; 4],
        }
    }

    #[test]
    fn table_shapes() {
        let summaries = vec![
            summary(RequirementId::R1, 4.16, 3.0),
            summary(RequirementId::R2, 3.66, 3.0),
        ];
        let t3 = table3_csv(&summaries);
        assert!(t3.starts_with("Requirement,E,M,G,K,GapScore,Readiness\n"));
        assert_eq!(t3.lines().count(), 3);
        assert!(t3.contains("R1,4.16,4.16,4.16,4.16,4.16,3"));

        let t5 = table5_csv(&summaries);
        assert!(t5.contains("GapScore_CI_low"));
        assert_eq!(t5.lines().count(), 3);

        let t6 = table6_csv(&summaries);
        assert!(t6.contains("P2"));
        assert_eq!(t6.lines().count(), 3);
    }

    #[test]
    fn svg_contains_points_and_labels() {
        let summaries = vec![
            summary(RequirementId::R1, 4.16, 3.0),
            summary(RequirementId::R5, 4.5, 3.0),
        ];
        let svg = error_bar_chart_svg(
            "Gap by requirement",
            "GapScore",
            (1.0, 5.0),
            &gap_figure_points(&summaries),
        );
        assert_eq!(svg.matches("<circle").count(), 2);
        assert!(svg.contains(">R5<"));
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));

        let mut rates = BTreeMap::new();
        rates.insert(RequirementId::R1, 0.4);
        rates.insert(RequirementId::R5, 0.9);
        let scatter = scatter_svg(
            "Signal vs readiness",
            "signal rate",
            "Readiness",
            &signal_scatter_points(&rates, &summaries),
        );
        assert_eq!(scatter.matches("<circle").count(), 2);
    }

    #[test]
    fn csv_helpers() {
        let points = vec![ErrorBarPoint {
            label: "R1".into(),
            value: 4.0,
            lo: 3.8,
            hi: 4.2,
        }];
        assert_eq!(error_bar_csv(&points), "label,value,ci_low,ci_high\nR1,4,3.8,4.2\n");
        let scatter = vec![ScatterPoint {
            label: "R1".into(),
            x: 0.5,
            y: 3.0,
        }];
        assert_eq!(scatter_csv(&scatter), "label,x,y\nR1,0.5,3\n");
    }
}
