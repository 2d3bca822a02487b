//! Trajectory artifacts: a top-down SVG with obstacle footprints, an
//! altitude-versus-time SVG and a CSV of the samples. Output bytes depend
//! only on the log.

use std::fmt::Write;

use crate::mission::{LogError, MissionLog};
use crate::world::Shape;

const WIDTH: f64 = 640.0;
const PAD: f64 = 40.0;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlotArtifacts {
    pub top_down_svg: String,
    pub altitude_svg: String,
    pub csv: String,
}

/// Renders all three artifacts for `log`.
pub fn render(log: &MissionLog) -> Result<PlotArtifacts, LogError> {
    Ok(PlotArtifacts { top_down_svg: top_down(log)?, altitude_svg: altitude(log), csv: samples_csv(log) })
}

pub fn samples_csv(log: &MissionLog) -> String {
    let mut out = String::from("t,x,y,z,yaw,roll,pitch\n");
    for s in &log.trajectory {
        let p = s.pose;
        let _ = writeln!(
            out,
            "{:.3},{:.4},{:.4},{:.4},{:.5},{:.5},{:.5}",
            s.t, p.position.x, p.position.y, p.position.z, p.yaw, p.roll, p.pitch
        );
    }
    out
}

fn top_down(log: &MissionLog) -> Result<String, LogError> {
    let world = log.world()?;
    let e = &world.extent;
    let scale = (WIDTH - 2.0 * PAD) / (e.x_max - e.x_min).max(e.y_max - e.y_min);
    let w = (e.x_max - e.x_min) * scale + 2.0 * PAD;
    let h = (e.y_max - e.y_min) * scale + 2.0 * PAD;
    // y grows north, SVG y grows down.
    let sx = |x: f64| PAD + (x - e.x_min) * scale;
    let sy = |y: f64| h - PAD - (y - e.y_min) * scale;

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.1}" height="{h:.1}" viewBox="0 0 {w:.1} {h:.1}">"#
    );
    let _ = writeln!(out, r#"<title>{} top-down</title>"#, xml_escape(&log.mission.id));
    let _ = writeln!(
        out,
        r##"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="#fafafa" stroke="#333"/>"##,
        sx(e.x_min),
        sy(e.y_max),
        (e.x_max - e.x_min) * scale,
        (e.y_max - e.y_min) * scale
    );
    for o in &world.obstacles {
        match o.shape {
            Shape::Cube { center, edge_lengths } => {
                let (x0, y1) = (center.x - edge_lengths.x / 2.0, center.y + edge_lengths.y / 2.0);
                let c = o.clearance;
                let _ = writeln!(
                    out,
                    r##"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="#d08" stroke-dasharray="4 3"/>"##,
                    sx(x0 - c),
                    sy(y1 + c),
                    (edge_lengths.x + 2.0 * c) * scale,
                    (edge_lengths.y + 2.0 * c) * scale
                );
                let _ = writeln!(
                    out,
                    r##"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="#d08" fill-opacity="0.5"><title>{}</title></rect>"##,
                    sx(x0),
                    sy(y1),
                    edge_lengths.x * scale,
                    edge_lengths.y * scale,
                    xml_escape(&o.id)
                );
            }
            Shape::Sphere { center, radius } => {
                let _ = writeln!(
                    out,
                    r##"<circle cx="{:.2}" cy="{:.2}" r="{:.2}" fill="none" stroke="#08d" stroke-dasharray="4 3"/>"##,
                    sx(center.x),
                    sy(center.y),
                    (radius + o.clearance) * scale
                );
                let _ = writeln!(
                    out,
                    r##"<circle cx="{:.2}" cy="{:.2}" r="{:.2}" fill="#08d" fill-opacity="0.5"><title>{}</title></circle>"##,
                    sx(center.x),
                    sy(center.y),
                    radius * scale,
                    xml_escape(&o.id)
                );
            }
        }
    }
    let points: Vec<String> = log
        .trajectory
        .iter()
        .map(|s| format!("{:.2},{:.2}", sx(s.pose.position.x), sy(s.pose.position.y)))
        .collect();
    if !points.is_empty() {
        let _ = writeln!(
            out,
            r##"<polyline points="{}" fill="none" stroke="#111" stroke-width="2"/>"##,
            points.join(" ")
        );
    }
    for (p, color, label) in [(log.mission.start, "#2a2", "start"), (log.mission.goal, "#c22", "goal")] {
        let _ = writeln!(
            out,
            r#"<circle cx="{:.2}" cy="{:.2}" r="5" fill="{color}"><title>{label}</title></circle>"#,
            sx(p.x),
            sy(p.y)
        );
    }
    out.push_str("</svg>\n");
    Ok(out)
}

fn altitude(log: &MissionLog) -> String {
    let (w, h) = (WIDTH, 320.0);
    let t_max = log.trajectory.last().map_or(0.0, |s| s.t).max(1.0);
    let z_top = log
        .trajectory
        .iter()
        .map(|s| s.pose.position.z)
        .chain(log.mission.height_bound)
        .fold(1.0, f64::max)
        * 1.2;
    let sx = |t: f64| PAD + t / t_max * (w - 2.0 * PAD);
    let sy = |z: f64| h - PAD - z / z_top * (h - 2.0 * PAD);

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.1}" height="{h:.1}" viewBox="0 0 {w:.1} {h:.1}">"#
    );
    let _ = writeln!(out, r#"<title>{} altitude</title>"#, xml_escape(&log.mission.id));
    let _ = writeln!(
        out,
        r##"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#333"/>"##,
        sx(0.0),
        sy(0.0),
        sx(t_max),
        sy(0.0)
    );
    let _ = writeln!(
        out,
        r##"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#333"/>"##,
        sx(0.0),
        sy(0.0),
        sx(0.0),
        sy(z_top)
    );
    if let Some(b) = log.mission.height_bound {
        let _ = writeln!(
            out,
            r##"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#c22" stroke-dasharray="6 4"><title>height bound {b} m</title></line>"##,
            sx(0.0),
            sy(b),
            sx(t_max),
            sy(b)
        );
    }
    let points: Vec<String> =
        log.trajectory.iter().map(|s| format!("{:.2},{:.2}", sx(s.t), sy(s.pose.position.z))).collect();
    if !points.is_empty() {
        let _ = writeln!(
            out,
            r##"<polyline points="{}" fill="none" stroke="#111" stroke-width="2"/>"##,
            points.join(" ")
        );
    }
    out.push_str("</svg>\n");
    out
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}
