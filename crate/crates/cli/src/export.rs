//! Serialization of estimates, diagnostics and impulse responses.

use std::fmt::Write as _;

use anyhow::Result;
use serde::{Deserialize, Serialize};
use spillover_core::bootstrap::{BootstrapConfig, IrfResult};
use spillover_core::gmm::{Diagnostics, EstimationResult, GmmOptions, SampleMeta};
use spillover_core::irf::{Group, Panel, ShockProfile};
use spillover_core::model::Equation;

use crate::config::Transform;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquationReport {
    pub equation: Equation,
    pub diagnostics: Diagnostics,
    pub sample: SampleMeta,
    pub options: GmmOptions,
    pub instruments: Vec<String>,
    pub warnings: Vec<String>,
}

impl EquationReport {
    pub fn new(res: &EstimationResult<f64>) -> Self {
        Self {
            equation: res.equation,
            diagnostics: res.diagnostics.clone(),
            sample: res.sample,
            options: res.options.clone(),
            instruments: res.instrument_labels.clone(),
            warnings: res.warnings.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesMeta {
    pub panel: Panel,
    pub group: Group,
    pub point_explosive: bool,
    pub explosive_draws: usize,
    pub used_draws: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IrfMeta {
    pub horizon: usize,
    pub profile: ShockProfile,
    pub shock_size: f64,
    pub bootstrap: BootstrapConfig,
    pub clipped_eigenvalue_price: f64,
    pub clipped_eigenvalue_spread: f64,
    pub series: Vec<SeriesMeta>,
}

/// Everything reported for one (r, p) combination besides the tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub r: String,
    pub p: String,
    pub y: String,
    pub r_transform: Transform,
    pub r_sign_flip: bool,
    pub lag_order: usize,
    pub controls: Vec<String>,
    pub price: EquationReport,
    pub spread: EquationReport,
    pub irf: IrfMeta,
}

pub fn irf_meta(irfs: &[IrfResult<f64>]) -> Option<IrfMeta> {
    let first = irfs.first()?;
    Some(IrfMeta {
        horizon: first.request.horizon,
        profile: first.request.profile,
        shock_size: first.request.shock_size,
        bootstrap: first.meta.config,
        clipped_eigenvalue_price: first.meta.clipped_eigenvalue_price,
        clipped_eigenvalue_spread: first.meta.clipped_eigenvalue_spread,
        series: irfs
            .iter()
            .map(|b| SeriesMeta {
                panel: b.request.panel,
                group: b.request.group,
                point_explosive: b.point.explosive,
                explosive_draws: b.meta.explosive_draws,
                used_draws: b.meta.used_draws,
            })
            .collect(),
    })
}

/// `term,estimate,std_error`.
pub fn coefficient_csv(res: &EstimationResult<f64>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["term", "estimate", "std_error"])?;
    let se = res.std_errors();
    for (k, name) in res.names.iter().enumerate() {
        w.write_record([
            name.clone(),
            number(res.coefficients[k]),
            number(se[k]),
        ])?;
    }
    Ok(w.into_inner()?)
}

/// `horizon,point,lo,hi`.
pub fn irf_csv(b: &IrfResult<f64>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["horizon", "point", "lo", "hi"])?;
    for (h, &point) in b.point_series().iter().enumerate() {
        w.write_record([h.to_string(), number(point), number(b.lo[h]), number(b.hi[h])])?;
    }
    Ok(w.into_inner()?)
}

pub fn diagnostics_json(report: &DiagnosticsReport) -> Result<Vec<u8>> {
    let mut out = serde_json::to_vec_pretty(report)?;
    out.push(b'\n');
    Ok(out)
}

pub fn read_diagnostics(bytes: &[u8]) -> Result<DiagnosticsReport> {
    Ok(serde_json::from_slice(bytes)?)
}

/// Shortest decimal that parses back to the same `f64`.
pub fn number(v: f64) -> String {
    format!("{v:?}")
}

pub fn irf_file_stem(r: &str, p: &str, panel: Panel, group: Group) -> String {
    format!("irf_{r}_{p}_{}_{}", panel.as_str(), group.as_str())
}

/// Line chart of the point response with a shaded band. The chart has three
/// `<path>` elements (point, lo, hi); the band is a polygon.
pub fn irf_svg(b: &IrfResult<f64>, title: &str) -> String {
    const W: f64 = 640.0;
    const H: f64 = 400.0;
    const M: f64 = 48.0;
    let point = b.point_series();
    let n = point.len();
    let all = point.iter().chain(&b.lo).chain(&b.hi).copied().chain([0.0]);
    let (mut lo, mut hi) = all.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, c), v| (a.min(v), c.max(v)));
    if !(hi - lo).is_normal() {
        lo -= 1.0;
        hi += 1.0;
    }
    let pad = 0.05 * (hi - lo);
    let (lo, hi) = (lo - pad, hi + pad);
    let sx = |h: usize| M + (W - 2.0 * M) * h as f64 / (n.max(2) - 1) as f64;
    let sy = |v: f64| H - M - (H - 2.0 * M) * (v - lo) / (hi - lo);
    let line = |s: &[f64]| {
        let mut d = String::new();
        for (h, &v) in s.iter().enumerate() {
            let _ = write!(d, "{}{:.2},{:.2} ", if h == 0 { "M" } else { "L" }, sx(h), sy(v));
        }
        d.trim_end().to_string()
    };
    let mut band = String::new();
    for (h, &v) in b.hi.iter().enumerate() {
        let _ = write!(band, "{:.2},{:.2} ", sx(h), sy(v));
    }
    for (h, &v) in b.lo.iter().enumerate().rev() {
        let _ = write!(band, "{:.2},{:.2} ", sx(h), sy(v));
    }

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#);
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{M}" y="{:.0}" font-family="sans-serif" font-size="14">{}</text>"#, M / 2.0, escape(title));
    let _ = writeln!(s, r##"<polygon points="{}" fill="#9ecae1" fill-opacity="0.5" stroke="none"/>"##, band.trim_end());
    let _ = writeln!(s, r#"<line x1="{M}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="black" stroke-width="0.5"/>"#, sy(0.0), W - M, sy(0.0));
    let _ = writeln!(s, r#"<line x1="{M}" y1="{M}" x2="{M}" y2="{:.2}" stroke="black" stroke-width="0.5"/>"#, H - M);
    let _ = writeln!(s, r##"<path d="{}" fill="none" stroke="#3182bd" stroke-dasharray="4 3"/>"##, line(&b.lo));
    let _ = writeln!(s, r##"<path d="{}" fill="none" stroke="#3182bd" stroke-dasharray="4 3"/>"##, line(&b.hi));
    let _ = writeln!(s, r#"<path d="{}" fill="none" stroke="black" stroke-width="2"/>"#, line(point));
    let _ = writeln!(s, r#"<text x="{M}" y="{:.0}" font-family="sans-serif" font-size="11">{:.3e}</text>"#, M - 6.0, hi);
    let _ = writeln!(s, r#"<text x="{M}" y="{:.0}" font-family="sans-serif" font-size="11">{:.3e}</text>"#, H - M + 14.0, lo);
    let _ = writeln!(s, r#"<text x="{:.0}" y="{:.0}" font-family="sans-serif" font-size="11" text-anchor="end">h = {}</text>"#, W - M, H - M + 14.0, n - 1);
    s.push_str("</svg>\n");
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
