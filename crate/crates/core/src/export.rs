//! CSV and SVG output for diagrams, CSV for trajectories.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::bifurcation::{Branch, Diagram, DiagramSample, SingularKind, SingularPoint};
use crate::dynamics::Trajectory;
use crate::error::{Error, Result};

/// Seventeen significant digits: enough to round-trip every `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::InvalidParams(format!("malformed CSV: {other:?}")),
    }
}

pub const DIAGRAM_HEADER: [&str; 6] = ["s", "branch", "g", "k", "dg_ds", "dk_ds"];

pub fn write_samples_csv<W: std::io::Write>(samples: &[DiagramSample], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(DIAGRAM_HEADER).map_err(csv_error)?;
    for x in samples {
        let f = fmt_f64;
        w.write_record([f(x.s), x.branch.name().to_string(), f(x.g), f(x.k), f(x.dg_ds), f(x.dk_ds)])
            .map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_samples_csv<R: std::io::Read>(input: R) -> Result<Vec<DiagramSample>> {
    let mut r = csv::Reader::from_reader(input);
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_error)?;
        let num = |i: usize| -> Result<f64> {
            rec.get(i)
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| Error::InvalidParams(format!("bad number in column {i}")))
        };
        let branch: Branch = rec.get(1).unwrap_or_default().parse()?;
        out.push(DiagramSample { s: num(0)?, branch, g: num(2)?, k: num(3)?, dg_ds: num(4)?, dk_ds: num(5)? });
    }
    Ok(out)
}

pub fn trajectory_header() -> Vec<&'static str> {
    vec![
        "t", "omega1", "omega2", "omega3", "alpha1", "alpha2", "alpha3", "beta1", "beta2", "beta3", "h", "k", "g",
        "drift_h", "drift_k", "drift_g",
    ]
}

pub fn write_trajectory_csv<W: std::io::Write>(tr: &Trajectory, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(trajectory_header()).map_err(csv_error)?;
    for i in 0..tr.times.len() {
        let mut row = vec![fmt_f64(tr.times[i])];
        row.extend(tr.states[i].to_array().iter().map(|x| fmt_f64(*x)));
        let (j, d) = (tr.integrals[i], tr.drift[i]);
        row.extend([j.h, j.k, j.g, d.h, d.k, d.g].map(fmt_f64));
        w.write_record(&row).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

/// File name of one branch of the slice at `h`.
pub fn diagram_file_name(h: f64, branch: Branch) -> String {
    format!("sigma_h_{h}_{}.csv", branch.name())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Svg,
}

impl std::str::FromStr for Format {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "csv" => Ok(Format::Csv),
            "svg" => Ok(Format::Svg),
            other => Err(Error::InvalidParams(format!("unknown format {other}"))),
        }
    }
}

/// Writes one CSV per branch, the singular points as JSON, and the SVG.
/// Returns the written paths.
pub fn export_diagram(d: &Diagram, dir: &Path, formats: &[Format]) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    if formats.contains(&Format::Csv) {
        for b in Branch::ALL {
            let path = dir.join(diagram_file_name(d.h, b));
            let samples: Vec<DiagramSample> = d.branch_samples(b).copied().collect();
            write_samples_csv(&samples, std::fs::File::create(&path)?)?;
            written.push(path);
        }
        let path = dir.join(format!("sigma_h_{}_singular.json", d.h));
        std::fs::write(&path, serde_json::to_string_pretty(&d.singular)?)?;
        written.push(path);
    }
    if formats.contains(&Format::Svg) {
        let path = dir.join(format!("sigma_h_{}.svg", d.h));
        std::fs::write(&path, render_svg(&d.samples, &d.singular))?;
        written.push(path);
    }
    Ok(written)
}

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 600.0;
const MARGIN: f64 = 50.0;

fn branch_color(b: Branch) -> &'static str {
    match b {
        Branch::GammaPlus => "#d62728",
        Branch::GammaMinus => "#9467bd",
        Branch::Gamma1 => "#1f77b4",
        Branch::Gamma2 => "#2ca02c",
    }
}

fn percentile(v: &mut [f64], q: f64) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    v[((v.len() - 1) as f64 * q).round() as usize]
}

/// View window: central 90% of the curve samples, widened to contain the
/// singular points that are not asymptote markers.
fn view_box(samples: &[DiagramSample], singular: &[SingularPoint]) -> (f64, f64, f64, f64) {
    let mut gs: Vec<f64> = samples.iter().map(|s| s.g).filter(|x| x.is_finite()).collect();
    let mut ks: Vec<f64> = samples.iter().map(|s| s.k).filter(|x| x.is_finite()).collect();
    if gs.is_empty() {
        return (-1.0, 1.0, -1.0, 1.0);
    }
    let (mut g0, mut g1) = (percentile(&mut gs, 0.05), percentile(&mut gs, 0.95));
    let (mut k0, mut k1) = (percentile(&mut ks, 0.05), percentile(&mut ks, 0.95));
    for p in singular.iter().filter(|p| p.kind != SingularKind::SZeroAsymptote) {
        g0 = g0.min(p.g);
        g1 = g1.max(p.g);
        k0 = k0.min(p.k);
        k1 = k1.max(p.k);
    }
    let pad = |a: f64, b: f64| {
        let w = (b - a).max(1e-9);
        (a - 0.1 * w, b + 0.1 * w)
    };
    let (g0, g1) = pad(g0, g1);
    let (k0, k1) = pad(k0, k1);
    (g0, g1, k0, k1)
}

/// Static plot in the `(g, k)` plane: branches as polylines, singular points
/// as glyphs.
pub fn render_svg(samples: &[DiagramSample], singular: &[SingularPoint]) -> String {
    let (g0, g1, k0, k1) = view_box(samples, singular);
    let px = |g: f64| MARGIN + (g - g0) / (g1 - g0) * (WIDTH - 2.0 * MARGIN);
    let py = |k: f64| HEIGHT - MARGIN - (k - k0) / (k1 - k0) * (HEIGHT - 2.0 * MARGIN);
    let inside = |g: f64, k: f64| g >= g0 && g <= g1 && k >= k0 && k <= k1;
    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let (xa, xb, ya, yb) = (MARGIN, WIDTH - MARGIN, HEIGHT - MARGIN, MARGIN);
    let _ = writeln!(s, r#"<g class="axes" stroke="black" stroke-width="1">"#);
    let _ = writeln!(s, r#"<line x1="{xa}" y1="{ya}" x2="{xb}" y2="{ya}"/>"#);
    let _ = writeln!(s, r#"<line x1="{xa}" y1="{ya}" x2="{xa}" y2="{yb}"/>"#);
    let _ = writeln!(s, "</g>");
    let _ = writeln!(s, r#"<g class="labels" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(s, r#"<text x="{}" y="{}">g</text>"#, xb + 8.0, ya + 4.0);
    let _ = writeln!(s, r#"<text x="{}" y="{}">k</text>"#, xa - 4.0, yb - 10.0);
    let _ = writeln!(s, r#"<text x="{xa}" y="{}">{g0:.4}</text>"#, ya + 16.0);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{g1:.4}</text>"#, xb, ya + 16.0);
    let _ = writeln!(s, r#"<text x="{}" y="{ya}" text-anchor="end">{k0:.4}</text>"#, xa - 4.0);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{k1:.4}</text>"#, xa - 4.0, yb + 4.0);
    let _ = writeln!(s, "</g>");
    for b in Branch::ALL {
        let _ = writeln!(s, r#"<g class="{}" stroke="{}" fill="none" stroke-width="1.5">"#, b.name(), branch_color(b));
        let mut run: Vec<(f64, f64)> = Vec::new();
        let mut prev_sign = 0.0;
        let flush = |run: &mut Vec<(f64, f64)>, s: &mut String| {
            if run.len() >= 2 {
                let pts: Vec<String> = run.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
                let _ = writeln!(s, r#"<polyline points="{}"/>"#, pts.join(" "));
            }
            run.clear();
        };
        for x in samples.iter().filter(|x| x.branch == b) {
            if x.s.signum() != prev_sign {
                flush(&mut run, &mut s);
                prev_sign = x.s.signum();
            }
            if inside(x.g, x.k) {
                run.push((px(x.g), py(x.k)));
            } else {
                flush(&mut run, &mut s);
            }
        }
        flush(&mut run, &mut s);
        let _ = writeln!(s, "</g>");
    }
    let _ = writeln!(s, r#"<g class="singular">"#);
    for p in singular.iter().filter(|p| inside(p.g, p.k)) {
        let (x, y) = (px(p.g), py(p.k));
        let _ = match p.kind {
            SingularKind::Cusp => writeln!(s, r#"<circle class="cusp" cx="{x:.2}" cy="{y:.2}" r="4" fill="black"/>"#),
            SingularKind::DoublePoint => writeln!(
                s,
                r#"<circle class="double_point" cx="{x:.2}" cy="{y:.2}" r="4" fill="none" stroke="black"/>"#
            ),
            SingularKind::Intersection => writeln!(
                s,
                r#"<rect class="intersection" x="{:.2}" y="{:.2}" width="7" height="7" fill="orange" stroke="black"/>"#,
                x - 3.5,
                y - 3.5
            ),
            SingularKind::SZeroAsymptote => Ok(()),
        };
    }
    let _ = writeln!(s, "</g>");
    let _ = writeln!(s, "</svg>");
    s
}
