//! Minimal static SVG rendering for run inspection: stacked time panels
//! with auto-scaled axes, step or line series, and horizontal marker lines.
//! No external tooling; the output opens in any browser.

/// One time series: label and (t, value) points.
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    /// Draw as a staircase (for integer-valued signals).
    pub step: bool,
}

/// One stacked panel.
pub struct Panel {
    pub title: String,
    pub series: Vec<Series>,
    /// Dashed horizontal markers: (y, label).
    pub hlines: Vec<(f64, String)>,
}

const PANEL_W: f64 = 900.0;
const PANEL_H: f64 = 170.0;
const MARGIN_L: f64 = 64.0;
const MARGIN_R: f64 = 12.0;
const MARGIN_T: f64 = 22.0;
const MARGIN_B: f64 = 18.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

fn finite(points: &[(f64, f64)]) -> impl Iterator<Item = &(f64, f64)> {
    points.iter().filter(|(t, v)| t.is_finite() && v.is_finite())
}

/// Render stacked panels over a shared time axis into an SVG document.
pub fn render(panels: &[Panel]) -> String {
    let total_h = PANEL_H * panels.len() as f64;
    let mut out = String::new();
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{PANEL_W}\" height=\"{total_h}\" \
         viewBox=\"0 0 {PANEL_W} {total_h}\" font-family=\"sans-serif\" font-size=\"11\">\n"
    ));
    out.push_str(&format!(
        "<rect width=\"{PANEL_W}\" height=\"{total_h}\" fill=\"white\"/>\n"
    ));

    // Shared time range across panels.
    let (mut t0, mut t1) = (f64::INFINITY, f64::NEG_INFINITY);
    for p in panels {
        for s in &p.series {
            for (t, _) in finite(&s.points) {
                t0 = t0.min(*t);
                t1 = t1.max(*t);
            }
        }
    }
    if !t0.is_finite() || t1 <= t0 {
        t0 = 0.0;
        t1 = 1.0;
    }

    for (pi, p) in panels.iter().enumerate() {
        let top = pi as f64 * PANEL_H;
        let (mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY);
        for s in &p.series {
            for (_, v) in finite(&s.points) {
                y0 = y0.min(*v);
                y1 = y1.max(*v);
            }
        }
        for (y, _) in &p.hlines {
            if y.is_finite() {
                y0 = y0.min(*y);
                y1 = y1.max(*y);
            }
        }
        if !y0.is_finite() || !y1.is_finite() {
            y0 = 0.0;
            y1 = 1.0;
        }
        if y1 - y0 < 1e-12 {
            y0 -= 0.5;
            y1 += 0.5;
        }
        let pad = 0.06 * (y1 - y0);
        y0 -= pad;
        y1 += pad;

        let px = |t: f64| MARGIN_L + (t - t0) / (t1 - t0) * (PANEL_W - MARGIN_L - MARGIN_R);
        let py =
            |v: f64| top + MARGIN_T + (y1 - v) / (y1 - y0) * (PANEL_H - MARGIN_T - MARGIN_B);

        // Frame and labels.
        out.push_str(&format!(
            "<rect x=\"{:.1}\" y=\"{:.1}\" width=\"{:.1}\" height=\"{:.1}\" fill=\"none\" \
             stroke=\"#888\" stroke-width=\"0.7\"/>\n",
            MARGIN_L,
            top + MARGIN_T,
            PANEL_W - MARGIN_L - MARGIN_R,
            PANEL_H - MARGIN_T - MARGIN_B
        ));
        out.push_str(&format!(
            "<text x=\"{MARGIN_L}\" y=\"{:.1}\" font-weight=\"bold\">{}</text>\n",
            top + 14.0,
            xml_escape(&p.title)
        ));
        out.push_str(&format!(
            "<text x=\"4\" y=\"{:.1}\" fill=\"#555\">{:.3}</text>\n",
            top + MARGIN_T + 9.0,
            y1
        ));
        out.push_str(&format!(
            "<text x=\"4\" y=\"{:.1}\" fill=\"#555\">{:.3}</text>\n",
            top + PANEL_H - MARGIN_B,
            y0
        ));
        if pi == panels.len() - 1 {
            out.push_str(&format!(
                "<text x=\"{:.1}\" y=\"{:.1}\" fill=\"#555\" text-anchor=\"end\">{:.0} s</text>\n",
                PANEL_W - MARGIN_R,
                top + PANEL_H - 4.0,
                t1
            ));
        }

        for (y, label) in &p.hlines {
            if !y.is_finite() || *y < y0 || *y > y1 {
                continue;
            }
            out.push_str(&format!(
                "<line x1=\"{:.1}\" y1=\"{:.2}\" x2=\"{:.1}\" y2=\"{:.2}\" stroke=\"#b00\" \
                 stroke-width=\"0.8\" stroke-dasharray=\"5,4\"/>\n",
                MARGIN_L,
                py(*y),
                PANEL_W - MARGIN_R,
                py(*y)
            ));
            out.push_str(&format!(
                "<text x=\"{:.1}\" y=\"{:.2}\" fill=\"#b00\">{}</text>\n",
                MARGIN_L + 6.0,
                py(*y) - 3.0,
                xml_escape(label)
            ));
        }

        for (si, s) in p.series.iter().enumerate() {
            let color = PALETTE[si % PALETTE.len()];
            let mut d = String::new();
            let mut prev: Option<(f64, f64)> = None;
            for (t, v) in finite(&s.points) {
                let (x, y) = (px(*t), py(*v));
                match prev {
                    None => d.push_str(&format!("M{x:.2},{y:.2}")),
                    Some((_, py_prev)) if s.step => {
                        d.push_str(&format!("L{x:.2},{py_prev:.2}L{x:.2},{y:.2}"))
                    }
                    Some(_) => d.push_str(&format!("L{x:.2},{y:.2}")),
                }
                prev = Some((x, y));
            }
            if !d.is_empty() {
                out.push_str(&format!(
                    "<path d=\"{d}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.1\"/>\n"
                ));
            }
            if !s.label.is_empty() {
                out.push_str(&format!(
                    "<text x=\"{:.1}\" y=\"{:.1}\" fill=\"{color}\">{}</text>\n",
                    MARGIN_L + 60.0 * si as f64 + 6.0,
                    top + MARGIN_T + 12.0,
                    xml_escape(&s.label)
                ));
            }
        }
    }
    out.push_str("</svg>\n");
    out
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn panel_with(points: Vec<(f64, f64)>) -> Panel {
        Panel {
            title: "demo".to_string(),
            series: vec![Series { label: "s".to_string(), points, step: false }],
            hlines: vec![(0.5, "mark".to_string())],
        }
    }

    #[test]
    fn renders_wellformed_document() {
        let svg = render(&[panel_with(vec![(0.0, 0.0), (1.0, 1.0)])]);
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<path").count(), 1);
        assert!(svg.contains("mark"));
    }

    #[test]
    fn skips_non_finite_points_instead_of_poisoning_the_path() {
        let svg = render(&[panel_with(vec![(0.0, 0.0), (0.5, f64::NAN), (1.0, 1.0)])]);
        assert!(!svg.contains("NaN"));
        assert_eq!(svg.matches("<path").count(), 1);
    }

    #[test]
    fn empty_series_produce_no_paths() {
        let svg = render(&[panel_with(vec![])]);
        assert_eq!(svg.matches("<path").count(), 0);
        assert!(svg.contains("</svg>"));
    }

    #[test]
    fn step_series_double_the_segments() {
        let line = render(&[panel_with(vec![(0.0, 0.0), (1.0, 1.0), (2.0, 0.0)])]);
        let steppy = render(&[Panel {
            title: "demo".to_string(),
            series: vec![Series {
                label: "s".to_string(),
                points: vec![(0.0, 0.0), (1.0, 1.0), (2.0, 0.0)],
                step: true,
            }],
            hlines: vec![],
        }]);
        let count = |s: &str| s.matches('L').count();
        assert!(count(&steppy) > count(&line));
    }
}
