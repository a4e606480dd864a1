//! Figure-style tables and SVG line charts built from simulation results.
//!
//! The SVG is written by hand on a fixed 800x500 canvas. Coordinates are
//! printed with two decimals and elements are emitted in a fixed order, so
//! identical inputs give identical bytes.

use std::fmt::Write as _;
use std::str::FromStr;

use frtpp_core::{Hypothesis, Method, Predictiveness, RejectionSummary, StatKind, ETA_C0_GRID};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReportError {
    #[error("no series")]
    NoSeries,
    #[error("series {0} is absent from the results for this figure")]
    SeriesAbsent(String),
    #[error("duplicate result for {series} at eta_c0={eta_c0} ({panel})")]
    Duplicate { series: String, eta_c0: f64, panel: String },
    #[error("unknown figure {0:?} (fig1..fig6)")]
    UnknownFigure(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Figure {
    Fig1,
    Fig2,
    Fig3,
    Fig4,
    Fig5,
    Fig6,
}

impl FromStr for Figure {
    type Err = ReportError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "fig1" => Figure::Fig1,
            "fig2" => Figure::Fig2,
            "fig3" => Figure::Fig3,
            "fig4" => Figure::Fig4,
            "fig5" => Figure::Fig5,
            "fig6" => Figure::Fig6,
            other => return Err(ReportError::UnknownFigure(other.to_owned())),
        })
    }
}

impl Figure {
    pub fn name(&self) -> &'static str {
        match self {
            Figure::Fig1 => "fig1",
            Figure::Fig2 => "fig2",
            Figure::Fig3 => "fig3",
            Figure::Fig4 => "fig4",
            Figure::Fig5 => "fig5",
            Figure::Fig6 => "fig6",
        }
    }

    pub fn predictiveness(&self) -> Predictiveness {
        match self {
            Figure::Fig1 | Figure::Fig4 => Predictiveness::None,
            Figure::Fig2 | Figure::Fig5 => Predictiveness::Medium,
            Figure::Fig3 | Figure::Fig6 => Predictiveness::High,
        }
    }

    /// Figures 4-6 compare correct and misspecified imputation models.
    pub fn compares_misspecification(&self) -> bool {
        matches!(self, Figure::Fig4 | Figure::Fig5 | Figure::Fig6)
    }

    /// Figures 1-3: every imputation method with both test quantities.
    /// Figures 4-6: discrepancies plus the two model-based tests.
    pub fn default_series(&self) -> Vec<Method> {
        if self.compares_misspecification() {
            let mut v: Vec<Method> =
                (1..=4).map(|imputation| Method::Frt { imputation, kind: StatKind::Discrepancy }).collect();
            v.extend([Method::Model { covariates: false }, Method::Model { covariates: true }]);
            v
        } else {
            Method::FRT_ALL.to_vec()
        }
    }

    pub fn panels(&self) -> Vec<Panel> {
        let specs: &[bool] = if self.compares_misspecification() { &[false, true] } else { &[false] };
        specs
            .iter()
            .flat_map(|&misspecified| {
                [Hypothesis::H0, Hypothesis::H1].map(|hypothesis| Panel {
                    hypothesis,
                    misspecified,
                    labelled: self.compares_misspecification(),
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Panel {
    pub hypothesis: Hypothesis,
    pub misspecified: bool,
    labelled: bool,
}

impl Panel {
    fn matches(&self, row: &RejectionSummary) -> bool {
        row.misspecified == self.misspecified && (row.tau == 0.0) == (self.hypothesis == Hypothesis::H0)
    }

    fn short(&self) -> String {
        let h = match self.hypothesis {
            Hypothesis::H0 => "H0",
            Hypothesis::H1 => "H1",
        };
        if self.labelled {
            format!("{h}/{}", if self.misspecified { "misspecified" } else { "correct" })
        } else {
            h.to_owned()
        }
    }

    fn title(&self) -> String {
        let base = match self.hypothesis {
            Hypothesis::H0 => "H0: type I error",
            Hypothesis::H1 => "H1: power",
        };
        if self.labelled {
            format!("{base} ({})", if self.misspecified { "misspecified" } else { "correct model" })
        } else {
            base.to_owned()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FigureSpec {
    pub figure: Figure,
    pub series: Vec<Method>,
    /// Height of the horizontal reference line.
    pub alpha_level: f64,
}

impl FigureSpec {
    pub fn new(figure: Figure) -> Self {
        Self { figure, series: figure.default_series(), alpha_level: 0.05 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub table: String,
    pub svg: String,
}

/// Points of one series in one panel, sorted by `eta_c0 - eta_n`.
type Points = Vec<(f64, f64)>;

pub fn report(rows: &[RejectionSummary], spec: &FigureSpec) -> Result<Report, ReportError> {
    if spec.series.is_empty() {
        return Err(ReportError::NoSeries);
    }
    let pred = spec.figure.predictiveness();
    let panels = spec.figure.panels();

    let mut data: Vec<Vec<Points>> = vec![vec![Vec::new(); spec.series.len()]; panels.len()];
    for row in rows.iter().filter(|r| r.predictiveness == pred) {
        let Some(s) = spec.series.iter().position(|m| *m == row.method) else { continue };
        for (p, panel) in panels.iter().enumerate() {
            if !panel.matches(row) {
                continue;
            }
            let x = row.eta_difference();
            if data[p][s].iter().any(|&(px, _)| px == x) {
                return Err(ReportError::Duplicate { series: row.method.series_id(), eta_c0: x, panel: panel.short() });
            }
            data[p][s].push((x, row.rejection_rate));
        }
    }
    for (s, method) in spec.series.iter().enumerate() {
        if data.iter().all(|panel| panel[s].is_empty()) {
            return Err(ReportError::SeriesAbsent(method.series_id()));
        }
    }
    for panel in &mut data {
        for points in panel.iter_mut() {
            points.sort_by(|a, b| a.0.total_cmp(&b.0));
        }
    }

    Ok(Report { table: table(spec, &panels, &data), svg: svg(spec, &panels, &data) })
}

fn table(spec: &FigureSpec, panels: &[Panel], data: &[Vec<Points>]) -> String {
    let names: Vec<String> = spec.series.iter().map(Method::series_id).collect();
    let mut header = vec!["panel".to_owned(), "eta_c0-eta_n".to_owned()];
    header.extend(names.iter().cloned());

    let mut body: Vec<Vec<String>> = Vec::new();
    for (p, panel) in panels.iter().enumerate() {
        let mut xs: Vec<f64> = data[p].iter().flatten().map(|&(x, _)| x).collect();
        xs.sort_by(f64::total_cmp);
        xs.dedup();
        for x in xs {
            let mut line = vec![panel.short(), format!("{x:.1}")];
            for points in &data[p] {
                line.push(
                    points.iter().find(|&&(px, _)| px == x).map_or_else(|| "-".to_owned(), |&(_, y)| format!("{y:.3}")),
                );
            }
            body.push(line);
        }
    }

    let widths: Vec<usize> = (0..header.len())
        .map(|c| body.iter().map(|l| l[c].len()).chain([header[c].len()]).max().unwrap_or(0))
        .collect();
    let mut out = format!("# {} predictiveness={}\n", spec.figure.name(), spec.figure.predictiveness());
    for line in std::iter::once(&header).chain(&body) {
        let cells: Vec<String> = line
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(c, (cell, &w))| if c == 0 { format!("{cell:<w$}") } else { format!("{cell:>w$}") })
            .collect();
        out.push_str(cells.join("  ").trim_end());
        out.push('\n');
    }
    out
}

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 500.0;
const LEGEND_HEIGHT: f64 = 64.0;
const BLUE: &str = "#1f5fbf";
const RED: &str = "#c8102e";
const GREEN: &str = "#2e8b3e";

struct Style {
    color: &'static str,
    dashed: bool,
    marker: Marker,
}

#[derive(Clone, Copy)]
enum Marker {
    Circle,
    Square,
    Diamond,
}

fn style(method: &Method) -> Style {
    let (color, dashed) = match method {
        Method::Frt { imputation: 1, .. } => (BLUE, false),
        Method::Frt { imputation: 2, .. } => (RED, false),
        Method::Frt { imputation: 3, .. } => (BLUE, true),
        Method::Frt { .. } => (RED, true),
        Method::Model { covariates } => (GREEN, *covariates),
    };
    let marker = match method {
        Method::Frt { kind: StatKind::IvStatistic, .. } => Marker::Circle,
        Method::Frt { kind: StatKind::Discrepancy, .. } => Marker::Square,
        Method::Model { .. } => Marker::Diamond,
    };
    Style { color, dashed, marker }
}

fn marker(out: &mut String, m: Marker, x: f64, y: f64, color: &str) {
    match m {
        Marker::Circle => {
            writeln!(out, r#"<circle class="marker" cx="{x:.2}" cy="{y:.2}" r="3" fill="{color}"/>"#).unwrap();
        }
        Marker::Square => {
            let (x0, y0) = (x - 3.0, y - 3.0);
            writeln!(out, r#"<rect class="marker" x="{x0:.2}" y="{y0:.2}" width="6" height="6" fill="{color}"/>"#)
                .unwrap();
        }
        Marker::Diamond => {
            writeln!(
                out,
                r#"<polygon class="marker" points="{:.2},{:.2} {:.2},{:.2} {:.2},{:.2} {:.2},{:.2}" fill="{color}"/>"#,
                x,
                y - 4.0,
                x + 4.0,
                y,
                x,
                y + 4.0,
                x - 4.0,
                y
            )
            .unwrap();
        }
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn svg(spec: &FigureSpec, panels: &[Panel], data: &[Vec<Points>]) -> String {
    let mut out = String::new();
    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">"#
    )
    .unwrap();
    writeln!(
        out,
        "<title>{} rejection rates, {} predictiveness</title>",
        spec.figure.name(),
        spec.figure.predictiveness()
    )
    .unwrap();
    writeln!(out, r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#).unwrap();

    // Legend: up to four entries per row above the panels.
    out.push_str("<g class=\"legend\">\n");
    for (i, method) in spec.series.iter().enumerate() {
        let st = style(method);
        let x = 60.0 + (i % 4) as f64 * 180.0;
        let y = 18.0 + (i / 4) as f64 * 20.0;
        let dash = if st.dashed { r#" stroke-dasharray="6,4""# } else { "" };
        writeln!(
            out,
            r#"<line x1="{x:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="{}" stroke-width="2"{dash}/>"#,
            x + 30.0,
            st.color
        )
        .unwrap();
        marker(&mut out, st.marker, x + 15.0, y, st.color);
        writeln!(out, r#"<text x="{:.2}" y="{:.2}">{}</text>"#, x + 38.0, y + 4.0, escape(&method.series_id()))
            .unwrap();
    }
    out.push_str("</g>\n");

    let (mut lo, mut hi) = (ETA_C0_GRID[0], ETA_C0_GRID[ETA_C0_GRID.len() - 1]);
    for (x, _) in data.iter().flatten().flatten() {
        lo = lo.min(*x);
        hi = hi.max(*x);
    }

    let cols = 2usize;
    let rows = panels.len().div_ceil(cols);
    let cell_w = WIDTH / cols as f64;
    let cell_h = (HEIGHT - LEGEND_HEIGHT) / rows as f64;
    for (p, panel) in panels.iter().enumerate() {
        let (left, top) = ((p % cols) as f64 * cell_w, LEGEND_HEIGHT + (p / cols) as f64 * cell_h);
        let (x0, x1) = (left + 60.0, left + cell_w - 20.0);
        let (y0, y1) = (top + cell_h - 40.0, top + 24.0);
        let sx = |x: f64| x0 + (x - lo) / (hi - lo) * (x1 - x0);
        let sy = |y: f64| y0 + y.clamp(0.0, 1.0) * (y1 - y0);

        writeln!(out, "<g class=\"panel\" data-panel=\"{}\">", panel.short()).unwrap();
        writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="12">{}</text>"#,
            (x0 + x1) / 2.0,
            top + 14.0,
            panel.title()
        )
        .unwrap();
        writeln!(
            out,
            r#"<rect x="{x0:.2}" y="{y1:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="black"/>"#,
            x1 - x0,
            y0 - y1
        )
        .unwrap();
        for &t in &ETA_C0_GRID {
            let x = sx(t);
            writeln!(out, r#"<line x1="{x:.2}" y1="{y0:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/>"#, y0 + 4.0)
                .unwrap();
            writeln!(out, r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{t}</text>"#, y0 + 15.0).unwrap();
        }
        for i in 0..=4 {
            let v = i as f64 * 0.25;
            let y = sy(v);
            writeln!(out, r#"<line x1="{:.2}" y1="{y:.2}" x2="{x0:.2}" y2="{y:.2}" stroke="black"/>"#, x0 - 4.0)
                .unwrap();
            writeln!(out, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{v:.2}</text>"#, x0 - 6.0, y + 4.0).unwrap();
        }
        writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">eta_c0 - eta_n</text>"#,
            (x0 + x1) / 2.0,
            y0 + 30.0
        )
        .unwrap();
        writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" transform="rotate(-90 {:.2} {:.2})">rejection rate</text>"#,
            left + 16.0,
            (y0 + y1) / 2.0,
            left + 16.0,
            (y0 + y1) / 2.0
        )
        .unwrap();
        let ry = sy(spec.alpha_level);
        writeln!(
            out,
            r#"<line class="reference" x1="{x0:.2}" y1="{ry:.2}" x2="{x1:.2}" y2="{ry:.2}" stroke="gray" stroke-dasharray="2,3"/>"#
        )
        .unwrap();

        for (method, points) in spec.series.iter().zip(&data[p]) {
            if points.is_empty() {
                continue;
            }
            let st = style(method);
            writeln!(out, "<g class=\"series\" data-series=\"{}\">", method.series_id()).unwrap();
            if points.len() > 1 {
                let coords: Vec<String> = points.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
                let dash = if st.dashed { r#" stroke-dasharray="6,4""# } else { "" };
                writeln!(
                    out,
                    r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="1.5"{dash}/>"#,
                    coords.join(" "),
                    st.color
                )
                .unwrap();
            }
            for &(x, y) in points {
                marker(&mut out, st.marker, sx(x), sy(y), st.color);
            }
            out.push_str("</g>\n");
        }
        out.push_str("</g>\n");
    }
    out.push_str("</svg>\n");
    out
}
