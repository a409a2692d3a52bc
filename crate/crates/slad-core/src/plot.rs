//! Hand-rolled SVG scatter and line plots; keeps results emission free of
//! plotting dependencies.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::Result;
use crate::tensor::Tensor;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 640.0;
const MARGIN: f64 = 50.0;
const COLORS: &[&str] = &[
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf",
];

pub struct Series<'a> {
    pub name: &'a str,
    /// (x, y) pairs.
    pub points: Vec<(f64, f64)>,
}

impl<'a> Series<'a> {
    /// First two coordinates of each tensor row.
    pub fn from_rows(name: &'a str, rows: &Tensor) -> Self {
        let pts = (0..rows.rows())
            .map(|i| {
                let r = rows.row(i);
                (r[0], if r.len() > 1 { r[1] } else { 0.0 })
            })
            .collect();
        Series { name, points: pts }
    }
}

struct Frame {
    x_min: f64,
    x_max: f64,
    y_min: f64,
    y_max: f64,
}

impl Frame {
    fn of(series: &[Series]) -> Frame {
        let mut f = Frame { x_min: f64::MAX, x_max: f64::MIN, y_min: f64::MAX, y_max: f64::MIN };
        for s in series {
            for &(x, y) in &s.points {
                f.x_min = f.x_min.min(x);
                f.x_max = f.x_max.max(x);
                f.y_min = f.y_min.min(y);
                f.y_max = f.y_max.max(y);
            }
        }
        if f.x_min > f.x_max {
            f = Frame { x_min: 0.0, x_max: 1.0, y_min: 0.0, y_max: 1.0 };
        }
        let pad_x = 0.05 * (f.x_max - f.x_min).max(1e-9);
        let pad_y = 0.05 * (f.y_max - f.y_min).max(1e-9);
        f.x_min -= pad_x;
        f.x_max += pad_x;
        f.y_min -= pad_y;
        f.y_max += pad_y;
        f
    }

    fn px(&self, x: f64) -> f64 {
        MARGIN + (x - self.x_min) / (self.x_max - self.x_min) * (WIDTH - 2.0 * MARGIN)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - MARGIN - (y - self.y_min) / (self.y_max - self.y_min) * (HEIGHT - 2.0 * MARGIN)
    }
}

fn document(title: &str, series: &[Series], as_lines: bool) -> String {
    let frame = Frame::of(series);
    let mut svg = String::new();
    let _ = write!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
    );
    let _ = write!(svg, "<rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n");
    let _ = write!(
        svg,
        "<text x=\"{}\" y=\"24\" font-family=\"sans-serif\" font-size=\"16\" text-anchor=\"middle\">{title}</text>\n",
        WIDTH / 2.0
    );
    let _ = write!(
        svg,
        "<rect x=\"{MARGIN}\" y=\"{MARGIN}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#999\"/>\n",
        WIDTH - 2.0 * MARGIN,
        HEIGHT - 2.0 * MARGIN
    );
    for (i, s) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        if as_lines {
            let path: Vec<String> = s
                .points
                .iter()
                .map(|&(x, y)| format!("{:.2},{:.2}", frame.px(x), frame.py(y)))
                .collect();
            let _ = write!(
                svg,
                "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>\n",
                path.join(" ")
            );
            for &(x, y) in &s.points {
                let _ = write!(
                    svg,
                    "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"{color}\"/>\n",
                    frame.px(x),
                    frame.py(y)
                );
            }
        } else {
            for &(x, y) in &s.points {
                let _ = write!(
                    svg,
                    "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"2\" fill=\"{color}\" fill-opacity=\"0.6\"/>\n",
                    frame.px(x),
                    frame.py(y)
                );
            }
        }
        let _ = write!(
            svg,
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" fill=\"{color}\">{}</text>\n",
            WIDTH - MARGIN - 150.0,
            MARGIN + 18.0 * (i + 1) as f64,
            s.name
        );
    }
    svg.push_str("</svg>\n");
    svg
}

pub fn scatter(path: &Path, title: &str, series: &[Series]) -> Result<()> {
    std::fs::write(path, document(title, series, false))?;
    Ok(())
}

pub fn lines(path: &Path, title: &str, series: &[Series]) -> Result<()> {
    std::fs::write(path, document(title, series, true))?;
    Ok(())
}
