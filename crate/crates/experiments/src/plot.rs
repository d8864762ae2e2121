//! SVG figures of emitted CSV artifacts.

use std::path::{Path, PathBuf};

use plotters::coord::ranged1d::{AsRangedCoord, ValueFormatter};
use plotters::prelude::*;
use rbfmol::io;

use crate::{ExpError, ExpResult};

const SIZE: (u32, u32) = (720, 440);
const PALETTE: [RGBColor; 8] = [
    RGBColor(31, 119, 180),
    RGBColor(214, 39, 40),
    RGBColor(44, 160, 44),
    RGBColor(255, 127, 14),
    RGBColor(148, 103, 189),
    RGBColor(140, 86, 75),
    RGBColor(227, 119, 194),
    RGBColor(23, 190, 207),
];

/// One labelled data set of a figure.
#[derive(Clone, Debug, Default)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Style {
    Markers,
    Lines,
}

/// Axis labels and scaling of a figure.
#[derive(Clone, Debug)]
pub struct Figure<'a> {
    pub title: &'a str,
    pub x_label: &'a str,
    pub y_label: &'a str,
    pub log_y: bool,
    pub style: Style,
}

type DrawResult = Result<(), Box<dyn std::error::Error>>;

fn plottable(fig: &Figure, series: &Series) -> Vec<(f64, f64)> {
    series
        .points
        .iter()
        .copied()
        .filter(|(x, y)| x.is_finite() && y.is_finite() && (!fig.log_y || *y > 0.0))
        .collect()
}

fn padded(lo: f64, hi: f64) -> std::ops::Range<f64> {
    let span = hi - lo;
    let d = if span > 0.0 {
        0.05 * span
    } else {
        0.5 * lo.abs().max(1.0)
    };
    lo - d..hi + d
}

fn draw<Y>(
    area: &DrawingArea<SVGBackend, plotters::coord::Shift>,
    fig: &Figure,
    data: &[(String, Vec<(f64, f64)>)],
    x: std::ops::Range<f64>,
    y: Y,
) -> DrawResult
where
    Y: AsRangedCoord<Value = f64>,
    Y::CoordDescType: ValueFormatter<f64>,
{
    let mut chart = ChartBuilder::on(area)
        .caption(fig.title, ("sans-serif", 18))
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(64)
        .build_cartesian_2d(x, y)?;
    chart.configure_mesh().x_desc(fig.x_label).y_desc(fig.y_label).draw()?;
    for (k, (label, pts)) in data.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        match fig.style {
            Style::Markers => chart
                .draw_series(pts.iter().map(|&p| Circle::new(p, 2, color.mix(0.7).filled())))?
                .label(label.as_str())
                .legend(move |(x, y)| Rectangle::new([(x, y - 5), (x + 10, y + 5)], color.filled())),
            Style::Lines => chart
                .draw_series(LineSeries::new(pts.iter().copied(), color.stroke_width(2)))?
                .label(label.as_str())
                .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 16, y)], color.stroke_width(2))),
        };
    }
    chart
        .configure_series_labels()
        .position(SeriesLabelPosition::UpperRight)
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()?;
    Ok(())
}

/// Renders the series as one SVG document. Markers are circles, one per
/// finite data point; the legend has one entry per series.
pub fn render(fig: &Figure, series: &[Series]) -> ExpResult<String> {
    let data: Vec<(String, Vec<(f64, f64)>)> = series.iter().map(|s| (s.label.clone(), plottable(fig, s))).collect();
    let all = data.iter().flat_map(|(_, p)| p.iter());
    let (x0, x1, y0, y1) = all.fold(
        (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY),
        |(a, b, c, d), &(x, y)| (a.min(x), b.max(x), c.min(y), d.max(y)),
    );
    let mut svg = String::new();
    {
        let area = SVGBackend::with_string(&mut svg, SIZE).into_drawing_area();
        let result: DrawResult = (|| {
            area.fill(&WHITE)?;
            if !x0.is_finite() {
                area.titled(fig.title, ("sans-serif", 18))?;
                let (w, h) = SIZE;
                area.draw(&Text::new(
                    "no data",
                    (w as i32 / 2 - 24, h as i32 / 2),
                    ("sans-serif", 16).into_font().color(&BLACK.mix(0.5)),
                ))?;
                return Ok(());
            }
            let x = padded(x0, x1);
            if fig.log_y {
                draw(&area, fig, &data, x, (y0 / 2.0..y1 * 2.0).log_scale())
            } else {
                draw(&area, fig, &data, x, padded(y0, y1))
            }
        })();
        result.map_err(|e| ExpError::Io(format!("plot `{}`: {e}", fig.title)))?;
        area.present().map_err(|e| ExpError::Io(e.to_string()))?;
    }
    Ok(svg)
}

fn label_of(dir: &Path) -> String {
    dir.file_name()
        .map_or_else(|| dir.display().to_string(), |n| n.to_string_lossy().into_owned())
}

fn load(dirs: &[PathBuf], file: &str, header: &[&str], pick: fn(&[f64]) -> (f64, f64)) -> Vec<Series> {
    dirs.iter()
        .filter_map(|d| {
            let rows = io::read_csv(&d.join(file), header).ok()?;
            Some(Series {
                label: label_of(d),
                points: rows.iter().map(|r| pick(r)).collect(),
            })
        })
        .collect()
}

/// Renders `spectra.svg`, `steps.svg` and `errors.svg` into `out` from the
/// CSV files found in `dirs`. Figures without any source file are skipped.
pub fn emit_plots(dirs: &[PathBuf], out: &Path) -> ExpResult<Vec<PathBuf>> {
    let figures = [
        (
            "spectra.svg",
            load(dirs, "spectrum.csv", &["re", "im"], |r| (r[0], r[1])),
            Figure {
                title: "Eigenvalues of the ODE matrix",
                x_label: "Re",
                y_label: "Im",
                log_y: false,
                style: Style::Markers,
            },
        ),
        (
            "steps.svg",
            load(dirs, "steps.csv", &["step_index", "t", "dt"], |r| (r[0], r[1])),
            Figure {
                title: "Adaptive time steps",
                x_label: "# step",
                y_label: "time t",
                log_y: false,
                style: Style::Lines,
            },
        ),
        (
            "errors.svg",
            load(dirs, "errors.csv", &["t", "linf_err"], |r| (r[0], r[1])),
            Figure {
                title: "Maximum error",
                x_label: "time t",
                y_label: "max error",
                log_y: true,
                style: Style::Lines,
            },
        ),
    ];
    std::fs::create_dir_all(out)?;
    let mut written = Vec::new();
    for (name, series, fig) in figures {
        if series.is_empty() {
            continue;
        }
        let path = out.join(name);
        io::write_atomic(&path, render(&fig, &series)?.as_bytes())?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fig(style: Style) -> Figure<'static> {
        Figure {
            title: "t",
            x_label: "x",
            y_label: "y",
            log_y: false,
            style,
        }
    }

    #[test]
    fn one_marker_per_point() {
        let s = Series {
            label: "a".into(),
            points: (0..658).map(|k| (k as f64, (k as f64).sin())).collect(),
        };
        let svg = render(&fig(Style::Markers), &[s]).unwrap();
        assert_eq!(svg.matches("<circle").count(), 658);
    }

    #[test]
    fn empty_series_say_no_data() {
        let svg = render(
            &fig(Style::Lines),
            &[Series {
                label: "e".into(),
                points: vec![],
            }],
        )
        .unwrap();
        assert!(svg.contains("no data"));
    }

    #[test]
    fn legend_has_one_entry_per_series() {
        let mk = |l: &str| Series {
            label: l.into(),
            points: vec![(0.0, 1.0), (1.0, 2.0)],
        };
        let svg = render(&fig(Style::Lines), &[mk("alpha"), mk("beta")]).unwrap();
        assert_eq!(svg.lines().filter(|l| l.trim() == "alpha").count(), 1);
        assert_eq!(svg.lines().filter(|l| l.trim() == "beta").count(), 1);
    }

    #[test]
    fn log_axis_drops_nonpositive_values() {
        let f = Figure {
            log_y: true,
            ..fig(Style::Markers)
        };
        let s = Series {
            label: "e".into(),
            points: vec![(0.0, 1e-8), (1.0, 0.0), (2.0, f64::NAN), (3.0, 1e-3)],
        };
        let svg = render(&f, &[s]).unwrap();
        assert_eq!(svg.matches("<circle").count(), 2);
    }

    #[test]
    fn labels_are_escaped() {
        let svg = render(
            &fig(Style::Lines),
            &[Series {
                label: "<&>".into(),
                points: vec![(0.0, 1.0)],
            }],
        )
        .unwrap();
        assert!(svg.contains("&lt;&amp;&gt;"));
    }
}
