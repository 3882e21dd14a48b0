//! CSV and SVG emission.
//!
//! `raw.csv`: `recipe,n,replication,observable,time,value,seed`.
//! `aggregate.csv`: `recipe,n,observable,stat,value,lo95,hi95`.
//! `checks.csv`: `name,value,relation,threshold,pass`.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::report::{CurvePanel, EcdfPanel, ExperimentReport};
use crate::LabError;

const RAW_HEADER: [&str; 7] = ["recipe", "n", "replication", "observable", "time", "value", "seed"];
const AGG_HEADER: [&str; 7] = ["recipe", "n", "observable", "stat", "value", "lo95", "hi95"];

fn write_rows<W: Write, T: serde::Serialize>(out: W, header: &[&str], rows: &[T]) -> Result<(), LabError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(header)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_raw<W: Write>(report: &ExperimentReport, out: W) -> Result<(), LabError> {
    write_rows(out, &RAW_HEADER, &report.raw)
}

pub fn write_aggregate<W: Write>(report: &ExperimentReport, out: W) -> Result<(), LabError> {
    write_rows(out, &AGG_HEADER, &report.aggregate)
}

pub fn write_checks<W: Write>(report: &ExperimentReport, out: W) -> Result<(), LabError> {
    write_rows(out, &["name", "value", "relation", "threshold", "pass"], &report.checks)
}

/// Writes every CSV and SVG of `report` under `dir` and returns the paths.
pub fn emit(report: &ExperimentReport, dir: &Path) -> Result<Vec<PathBuf>, LabError> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut file = |name: String| -> Result<fs::File, LabError> {
        let p = dir.join(name);
        let f = fs::File::create(&p)?;
        written.push(p);
        Ok(f)
    };
    write_raw(report, file("raw.csv".into())?)?;
    write_aggregate(report, file("aggregate.csv".into())?)?;
    write_checks(report, file("checks.csv".into())?)?;
    for (i, panel) in report.ecdfs.iter().enumerate() {
        file(format!("ecdf_{i}.svg"))?.write_all(ecdf_svg(panel).as_bytes())?;
    }
    for (i, panel) in report.curves.iter().enumerate() {
        file(format!("curve_{i}.svg"))?.write_all(curve_svg(panel).as_bytes())?;
    }
    Ok(written)
}

const W: f64 = 640.0;
const H: f64 = 420.0;
const PAD: f64 = 56.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        let widen = |a: f64, b: f64| if b > a { (a, b) } else { (a - 0.5, a + 0.5) };
        let (x0, x1) = widen(x0, x1);
        let (y0, y1) = widen(y0, y1);
        Frame { x0, x1, y0, y1 }
    }

    fn px(&self, x: f64) -> f64 {
        PAD + (x - self.x0) / (self.x1 - self.x0) * (W - 2.0 * PAD)
    }

    fn py(&self, y: f64) -> f64 {
        H - PAD - (y - self.y0) / (self.y1 - self.y0) * (H - 2.0 * PAD)
    }

    fn axes(&self, s: &mut String, title: &str, x_label: &str, y_label: &str) {
        let _ = write!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="12">
<rect width="100%" height="100%" fill="white"/>
<text x="{cx}" y="24" text-anchor="middle" font-size="14">{title}</text>
<line x1="{PAD}" y1="{b}" x2="{r}" y2="{b}" stroke="black"/>
<line x1="{PAD}" y1="{PAD}" x2="{PAD}" y2="{b}" stroke="black"/>
<text x="{cx}" y="{xl}" text-anchor="middle">{x_label}</text>
<text x="16" y="{cy}" text-anchor="middle" transform="rotate(-90 16 {cy})">{y_label}</text>
"#,
            cx = W / 2.0,
            cy = H / 2.0,
            b = H - PAD,
            r = W - PAD,
            xl = H - 14.0,
            title = escape(title),
        );
        for (v, p) in [(self.x0, self.px(self.x0)), (self.x1, self.px(self.x1))] {
            let _ = writeln!(s, r#"<text x="{p:.1}" y="{:.1}" text-anchor="middle">{v:.3}</text>"#, H - PAD + 16.0);
        }
        for (v, p) in [(self.y0, self.py(self.y0)), (self.y1, self.py(self.y1))] {
            let _ = writeln!(s, r#"<text x="{:.1}" y="{p:.1}" text-anchor="end">{v:.3}</text>"#, PAD - 4.0);
        }
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn legend(s: &mut String, labels: impl Iterator<Item = String>) {
    for (i, l) in labels.enumerate() {
        let y = PAD + 16.0 * i as f64;
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{y:.1}" fill="{}">{}</text>"#,
            W - PAD - 150.0,
            COLORS[i % COLORS.len()],
            escape(&l)
        );
    }
}

/// Step-function ECDFs of every sample set in the panel.
pub fn ecdf_svg(panel: &EcdfPanel) -> String {
    let all = panel.sets.iter().flat_map(|s| s.values.iter().copied());
    let (lo, hi) = all.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    let frame = if lo.is_finite() { Frame::new(lo, hi, 0.0, 1.0) } else { Frame::new(0.0, 1.0, 0.0, 1.0) };
    let mut s = String::new();
    frame.axes(&mut s, &panel.title, "value", "empirical CDF");
    for (i, set) in panel.sets.iter().enumerate() {
        let mut v = set.values.clone();
        v.sort_by(f64::total_cmp);
        let n = v.len() as f64;
        let mut pts = format!("{:.1},{:.1}", frame.px(frame.x0), frame.py(0.0));
        for (j, x) in v.iter().enumerate() {
            let _ = write!(
                pts,
                " {:.1},{:.1} {:.1},{:.1}",
                frame.px(*x),
                frame.py(j as f64 / n),
                frame.px(*x),
                frame.py((j + 1) as f64 / n)
            );
        }
        let _ = write!(pts, " {:.1},{:.1}", frame.px(frame.x1), frame.py(1.0));
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{}" stroke-width="1.5" points="{pts}"/>"#,
            COLORS[i % COLORS.len()]
        );
    }
    legend(&mut s, panel.sets.iter().map(|set| format!("{} ({})", set.label, set.len())));
    s.push_str("</svg>\n");
    s
}

/// Polylines of `y` against `log10 n`.
pub fn curve_svg(panel: &CurvePanel) -> String {
    let pts = panel.series.iter().flat_map(|(_, p)| p.iter().copied());
    let (x0, x1, y0, y1) = pts.fold((f64::INFINITY, f64::NEG_INFINITY, 0.0f64, f64::NEG_INFINITY), |a, (x, y)| {
        let lx = x.log10();
        (a.0.min(lx), a.1.max(lx), a.2.min(y), a.3.max(y))
    });
    let frame = if x0.is_finite() { Frame::new(x0, x1, y0, y1.max(y0)) } else { Frame::new(0.0, 1.0, 0.0, 1.0) };
    let mut s = String::new();
    frame.axes(&mut s, &panel.title, "log10 n", &panel.y_label);
    for (i, (_, p)) in panel.series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let line: Vec<String> =
            p.iter().map(|(x, y)| format!("{:.1},{:.1}", frame.px(x.log10()), frame.py(*y))).collect();
        let _ = writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#, line.join(" "));
        for (x, y) in p {
            let _ = writeln!(
                s,
                r#"<circle cx="{:.1}" cy="{:.1}" r="3" fill="{color}"/>"#,
                frame.px(x.log10()),
                frame.py(*y)
            );
        }
    }
    legend(&mut s, panel.series.iter().map(|(l, _)| l.clone()));
    s.push_str("</svg>\n");
    s
}
