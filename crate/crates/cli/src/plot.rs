//! Minimal static SVG charts. The CSV tables are the real outputs; these
//! exist so a run can be eyeballed without firing up a plotting stack.

use std::fmt::Write;

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 520.0;
const MARGIN_LEFT: f64 = 72.0;
const MARGIN_RIGHT: f64 = 24.0;
const MARGIN_TOP: f64 = 42.0;
const MARGIN_BOTTOM: f64 = 52.0;

pub struct Series<'a> {
    pub label: &'a str,
    pub color: &'a str,
    pub points: Vec<(f64, f64)>,
    /// Scatter only; no connecting polyline.
    pub markers_only: bool,
}

/// Round `span / 5` up to the nearest 1/2/5 decade step.
fn tick_step(span: f64) -> f64 {
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.abs().log10().floor());
    let frac = raw / mag;
    let nice = if frac <= 1.0 {
        1.0
    } else if frac <= 2.0 {
        2.0
    } else if frac <= 5.0 {
        5.0
    } else {
        10.0
    };
    nice * mag
}

fn format_tick(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    let text = format!("{v:.6}");
    let trimmed = text.trim_end_matches('0').trim_end_matches('.');
    if trimmed.len() > 9 {
        format!("{v:.3e}")
    } else {
        trimmed.to_string()
    }
}

fn bounds(series: &[Series]) -> ((f64, f64), (f64, f64)) {
    let mut x = (f64::INFINITY, f64::NEG_INFINITY);
    let mut y = (f64::INFINITY, f64::NEG_INFINITY);
    for s in series {
        for &(px, py) in &s.points {
            if px.is_finite() {
                x = (x.0.min(px), x.1.max(px));
            }
            if py.is_finite() {
                y = (y.0.min(py), y.1.max(py));
            }
        }
    }
    let widen = |(lo, hi): (f64, f64)| -> (f64, f64) {
        if !(lo.is_finite() && hi.is_finite()) {
            return (0.0, 1.0);
        }
        let span = (hi - lo).max(1e-12 * (1.0 + hi.abs()));
        (lo - 0.05 * span, hi + 0.05 * span)
    };
    (widen(x), widen(y))
}

/// Renders one chart. Only finite sample points are drawn.
pub fn chart(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let ((x0, x1), (y0, y1)) = bounds(series);
    let px = |x: f64| MARGIN_LEFT + (x - x0) / (x1 - x0) * (WIDTH - MARGIN_LEFT - MARGIN_RIGHT);
    let py = |y: f64| HEIGHT - MARGIN_BOTTOM - (y - y0) / (y1 - y0) * (HEIGHT - MARGIN_TOP - MARGIN_BOTTOM);

    let mut svg = String::new();
    let _ = write!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"monospace\" font-size=\"12\">\n"
    );
    let _ = write!(svg, "<rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n");
    let _ = write!(
        svg,
        "<text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-size=\"14\">{}</text>\n",
        WIDTH / 2.0,
        escape(title)
    );

    // Grid and tick labels.
    let xstep = tick_step(x1 - x0);
    let mut t = (x0 / xstep).ceil() * xstep;
    while t <= x1 + 1e-9 * xstep {
        let gx = px(t);
        let _ = write!(
            svg,
            "<line x1=\"{gx:.1}\" y1=\"{MARGIN_TOP}\" x2=\"{gx:.1}\" y2=\"{:.1}\" stroke=\"#ddd\"/>\n\
             <text x=\"{gx:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>\n",
            HEIGHT - MARGIN_BOTTOM,
            HEIGHT - MARGIN_BOTTOM + 18.0,
            format_tick(t)
        );
        t += xstep;
    }
    let ystep = tick_step(y1 - y0);
    let mut t = (y0 / ystep).ceil() * ystep;
    while t <= y1 + 1e-9 * ystep {
        let gy = py(t);
        let _ = write!(
            svg,
            "<line x1=\"{MARGIN_LEFT}\" y1=\"{gy:.1}\" x2=\"{:.1}\" y2=\"{gy:.1}\" stroke=\"#ddd\"/>\n\
             <text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{}</text>\n",
            WIDTH - MARGIN_RIGHT,
            MARGIN_LEFT - 6.0,
            gy + 4.0,
            format_tick(t)
        );
        t += ystep;
    }
    // Zero axes, when in range, darker than the grid.
    if x0 < 0.0 && x1 > 0.0 {
        let gx = px(0.0);
        let _ = write!(
            svg,
            "<line x1=\"{gx:.1}\" y1=\"{MARGIN_TOP}\" x2=\"{gx:.1}\" y2=\"{:.1}\" stroke=\"#999\"/>\n",
            HEIGHT - MARGIN_BOTTOM
        );
    }
    if y0 < 0.0 && y1 > 0.0 {
        let gy = py(0.0);
        let _ = write!(
            svg,
            "<line x1=\"{MARGIN_LEFT}\" y1=\"{gy:.1}\" x2=\"{:.1}\" y2=\"{gy:.1}\" stroke=\"#999\"/>\n",
            WIDTH - MARGIN_RIGHT
        );
    }

    for s in series {
        let finite: Vec<(f64, f64)> = s
            .points
            .iter()
            .copied()
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .collect();
        if !s.markers_only && finite.len() > 1 {
            let mut path = String::new();
            for (x, y) in &finite {
                let _ = write!(path, "{:.2},{:.2} ", px(*x), py(*y));
            }
            let _ = write!(
                svg,
                "<polyline points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\"/>\n",
                path.trim_end(),
                s.color
            );
        }
        if s.markers_only {
            for (x, y) in &finite {
                let _ = write!(
                    svg,
                    "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"{}\"/>\n",
                    px(*x),
                    py(*y),
                    s.color
                );
            }
        }
    }

    // Legend, top right inside the frame.
    for (i, s) in series.iter().enumerate() {
        let ly = MARGIN_TOP + 16.0 + 16.0 * i as f64;
        let lx = WIDTH - MARGIN_RIGHT - 170.0;
        let _ = write!(
            svg,
            "<rect x=\"{lx}\" y=\"{:.1}\" width=\"10\" height=\"10\" fill=\"{}\"/>\n\
             <text x=\"{:.1}\" y=\"{:.1}\">{}</text>\n",
            ly - 9.0,
            s.color,
            lx + 16.0,
            ly,
            escape(s.label)
        );
    }

    let _ = write!(
        svg,
        "<text x=\"{}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>\n\
         <text x=\"16\" y=\"{:.1}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {:.1})\">{}</text>\n",
        (MARGIN_LEFT + WIDTH - MARGIN_RIGHT) / 2.0,
        HEIGHT - 14.0,
        escape(x_label),
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        escape(y_label)
    );
    svg.push_str("</svg>\n");
    svg
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tick_steps_land_on_nice_decades() {
        assert_eq!(tick_step(10.0), 2.0);
        assert_eq!(tick_step(1.0), 0.2);
        assert_eq!(tick_step(0.37), 0.1);
        assert_eq!(tick_step(250.0), 50.0);
    }

    #[test]
    fn chart_mentions_every_series_label() {
        let s = vec![
            Series {
                label: "alpha",
                color: "#1f77b4",
                points: vec![(0.0, 0.0), (1.0, 1.0)],
                markers_only: false,
            },
            Series {
                label: "beta",
                color: "#d62728",
                points: vec![(0.5, -1.0)],
                markers_only: true,
            },
        ];
        let svg = chart("t", "x", "y", &s);
        assert!(svg.contains("alpha") && svg.contains("beta"));
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
    }

    #[test]
    fn degenerate_single_point_still_renders() {
        let s = vec![Series {
            label: "point",
            color: "#000",
            points: vec![(2.0, 3.0)],
            markers_only: true,
        }];
        let svg = chart("t", "x", "y", &s);
        assert!(svg.contains("<circle"));
    }
}
