//! Minimal SVG scatter plots.

use std::fmt::Write as _;
use std::path::Path;

use crate::data::{Dataset, Label};
use crate::error::{Error, Result};
use crate::relearn::SecondLevelDataset;

pub const BLUE: &str = "#1f77b4";
pub const RED: &str = "#d62728";

const WIDTH: f64 = 480.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 50.0;

struct Point {
    x: f64,
    y: f64,
    color: &'static str,
    class: &'static str,
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if hi - lo < 1e-12 {
        (lo - 0.5, hi + 0.5)
    } else {
        let pad = (hi - lo) * 0.05;
        (lo - pad, hi + pad)
    }
}

fn scatter(points: &[Point], x_label: &str, y_label: &str, title: &str) -> String {
    let (x0, x1) = range(points.iter().map(|p| p.x));
    let (y0, y1) = range(points.iter().map(|p| p.y));
    let px = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
    let py = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="20" text-anchor="middle" font-family="sans-serif" font-size="14">{}</text>"#,
        WIDTH / 2.0,
        title
    );
    let (left, right, top, bottom) = (MARGIN, WIDTH - MARGIN, MARGIN, HEIGHT - MARGIN);
    let _ = writeln!(
        s,
        r#"<path d="M{left} {top} L{left} {bottom} L{right} {bottom}" stroke="black" fill="none"/>"#
    );
    for (v, anchor_x) in [(x0, left), (x1, right)] {
        let _ = writeln!(
            s,
            r#"<text x="{anchor_x}" y="{}" text-anchor="middle" font-family="sans-serif" font-size="10">{v:.3}</text>"#,
            bottom + 14.0
        );
    }
    for (v, anchor_y) in [(y0, bottom), (y1, top)] {
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{anchor_y}" text-anchor="end" font-family="sans-serif" font-size="10">{v:.3}</text>"#,
            left - 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text class="x-label" x="{}" y="{}" text-anchor="middle" font-family="sans-serif" font-size="12">{x_label}</text>"#,
        WIDTH / 2.0,
        HEIGHT - 12.0
    );
    let _ = writeln!(
        s,
        r#"<text class="y-label" x="14" y="{}" text-anchor="middle" font-family="sans-serif" font-size="12" transform="rotate(-90 14 {})">{y_label}</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0
    );
    for p in points {
        let _ = writeln!(
            s,
            r#"<circle class="point {}" cx="{:.2}" cy="{:.2}" r="3" fill="{}" fill-opacity="0.7" data-x="{}" data-y="{}"/>"#,
            p.class,
            px(p.x),
            py(p.y),
            p.color,
            p.x,
            p.y
        );
    }
    s.push_str("</svg>\n");
    s
}

fn write(path: &Path, body: String) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    std::fs::write(path, body).map_err(|e| Error::io(path, e))
}

/// σ⁻ against σ⁺ for one member; blue marks objects the member got right.
pub fn sigma_plot_svg(meta: &SecondLevelDataset) -> Result<String> {
    if meta.is_empty() {
        return Err(Error::Input("meta-dataset is empty".into()));
    }
    let points: Vec<Point> = meta
        .rows
        .iter()
        .map(|r| {
            let correct = r.target == 1;
            Point {
                x: r.generated.sigma_minus,
                y: r.generated.sigma_plus,
                color: if correct { BLUE } else { RED },
                class: if correct { "correct" } else { "incorrect" },
            }
        })
        .collect();
    Ok(scatter(
        &points,
        "σ(−1)",
        "σ(+1)",
        &format!("member {}: correct (blue) and incorrect (red)", meta.classifier_index),
    ))
}

pub fn emit_sigma_plot(meta: &SecondLevelDataset, path: impl AsRef<Path>) -> Result<()> {
    write(path.as_ref(), sigma_plot_svg(meta)?)
}

/// Two-dimensional dataset colored by class: blue for −1, red for +1.
pub fn dataset_plot_svg(dataset: &Dataset) -> Result<String> {
    if dataset.dim() != 2 {
        return Err(Error::Input(format!(
            "dataset plot needs 2 features, {} has {}",
            dataset.name(),
            dataset.dim()
        )));
    }
    let points: Vec<Point> = dataset
        .samples()
        .iter()
        .map(|s| {
            let neg = s.label == Label::Negative;
            Point {
                x: s.features[0],
                y: s.features[1],
                color: if neg { BLUE } else { RED },
                class: if neg { "negative" } else { "positive" },
            }
        })
        .collect();
    Ok(scatter(&points, "x1", "x2", dataset.name()))
}

pub fn emit_dataset_plot(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    write(path.as_ref(), dataset_plot_svg(dataset)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic, LabeledSample, SyntheticParams};
    use crate::relearn::{GeneratedFeatures, SecondLevelRow};

    fn meta(targets: &[u8]) -> SecondLevelDataset {
        SecondLevelDataset {
            rows: targets
                .iter()
                .enumerate()
                .map(|(i, &t)| SecondLevelRow {
                    raw_features: vec![i as f64],
                    generated: GeneratedFeatures {
                        base_score: 0.1,
                        sigma_minus: i as f64 * 0.01,
                        sigma_plus: 0.3 - i as f64 * 0.001,
                    },
                    target: t,
                })
                .collect(),
            classifier_index: 0,
            d: 1,
        }
    }

    #[test]
    fn sigma_plot_counts_points_by_color() {
        let targets: Vec<u8> = (0..200).map(|i| (i % 4 != 0) as u8).collect();
        let svg = sigma_plot_svg(&meta(&targets)).unwrap();
        assert_eq!(svg.matches("<circle").count(), 200);
        assert_eq!(svg.matches(&format!("fill=\"{RED}\"")).count(), 50);
        assert!(svg.contains("σ(−1)") && svg.contains("σ(+1)"));

        let all = sigma_plot_svg(&meta(&[1; 30])).unwrap();
        assert_eq!(all.matches(RED).count(), 0);
        assert!(sigma_plot_svg(&meta(&[])).is_err());
    }

    #[test]
    fn dataset_plot_synthetic() {
        let ds = generate_synthetic(&SyntheticParams::default()).unwrap();
        let svg = dataset_plot_svg(&ds).unwrap();
        assert_eq!(svg.matches("<circle").count(), 400);
        assert_eq!(svg.matches(BLUE).count(), 200);
        assert_eq!(svg.matches(RED).count(), 200);
        assert_eq!(svg, dataset_plot_svg(&ds).unwrap());
    }

    #[test]
    fn dataset_plot_edge_cases() {
        let one = Dataset::new(
            "one",
            (0..5)
                .map(|i| LabeledSample::new(vec![i as f64, 1.0], Label::Positive))
                .collect(),
        )
        .unwrap();
        let svg = dataset_plot_svg(&one).unwrap();
        assert_eq!(svg.matches(BLUE).count(), 0);
        assert_eq!(svg.matches(RED).count(), 5);

        let wide = Dataset::new("wide", vec![LabeledSample::new(vec![0.0; 3], Label::Positive)]).unwrap();
        assert!(matches!(dataset_plot_svg(&wide), Err(Error::Input(_))));
    }
}
