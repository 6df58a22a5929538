use std::fmt::Write as _;
use std::path::Path;

use strobe_core::path::FullPathVector;
use strobe_core::pods::{Color, PodPartition};
use strobe_core::scenarios::CircleGridField;
use strobe_core::Error;

use crate::Result;

const SIZE: f64 = 500.0;

fn px(v: f64) -> f64 {
    v * SIZE
}

/// Unit-square y grows upward; SVG y grows downward.
fn py(v: f64) -> f64 {
    (1.0 - v) * SIZE
}

fn color_name(c: Color) -> &'static str {
    match c {
        Color::Blue => "#1f5fbf",
        Color::Red => "#c8322d",
    }
}

/// SVG of a 2-D path over a circle field. Each circle is drawn as a halo out
/// to `falloff` at half intensity and a solid core of `radius`. Waypoints are
/// dots, grouped and colored by pod when `partition` is given, joined by one
/// polyline.
pub fn render_2d(
    path: &FullPathVector,
    field: &CircleGridField,
    partition: Option<&PodPartition>,
) -> Result<String> {
    if path.dim() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            actual: path.dim(),
        }
        .into());
    }
    if let Some(p) = partition {
        if p.waypoints() != path.len() {
            return Err(Error::InvalidPartition(format!(
                "partition covers {} waypoints, path has {}",
                p.waypoints(),
                path.len()
            ))
            .into());
        }
    }

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
    );
    let _ = writeln!(svg, r##"<rect width="{SIZE}" height="{SIZE}" fill="#ffffff"/>"##);
    let _ = writeln!(svg, r##"<g class="field" fill="#000000">"##);
    for c in &field.centers {
        let (x, y) = (px(c[0]), py(c[1]));
        let _ = writeln!(svg, r#"<circle cx="{x:.3}" cy="{y:.3}" r="{:.3}" fill-opacity="0.35"/>"#, px(field.falloff));
        let _ = writeln!(svg, r#"<circle cx="{x:.3}" cy="{y:.3}" r="{:.3}" fill-opacity="0.9"/>"#, px(field.radius));
    }
    let _ = writeln!(svg, "</g>");

    let points: Vec<String> = path.waypoints().map(|q| format!("{:.3},{:.3}", px(q[0]), py(q[1]))).collect();
    let _ = writeln!(
        svg,
        r##"<polyline class="path" points="{}" fill="none" stroke="#444444" stroke-width="1.5"/>"##,
        points.join(" ")
    );

    let dot = |svg: &mut String, i: usize| {
        let q = path.waypoint(i);
        let _ = writeln!(svg, r#"<circle class="waypoint" cx="{:.3}" cy="{:.3}" r="3"/>"#, px(q[0]), py(q[1]));
    };
    match partition {
        Some(p) => {
            for (k, pod) in p.pods().iter().enumerate() {
                let _ = writeln!(
                    svg,
                    r#"<g class="pod" data-pod="{k}" data-color="{}" fill="{}">"#,
                    pod.color,
                    color_name(pod.color)
                );
                (pod.start..=pod.end).for_each(|i| dot(&mut svg, i));
                let _ = writeln!(svg, "</g>");
            }
        }
        None => {
            let _ = writeln!(svg, r##"<g class="waypoints" fill="#222222">"##);
            (0..path.len()).for_each(|i| dot(&mut svg, i));
            let _ = writeln!(svg, "</g>");
        }
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

pub fn write_svg(
    path: &FullPathVector,
    field: &CircleGridField,
    partition: Option<&PodPartition>,
    out: &Path,
) -> Result<()> {
    std::fs::write(out, render_2d(path, field, partition)?)?;
    Ok(())
}
