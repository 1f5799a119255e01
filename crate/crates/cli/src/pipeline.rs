//! End-to-end driver: estimate both equations for every (r, p) pair, build
//! the 3-panel × 2-group response grid with bands, and write the outputs.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use rayon::prelude::*;
use spillover_core::bootstrap::{bootstrap_grid, BootstrapConfig, IrfResult};
use spillover_core::classify::{classify_records, GroupAssignment, TradeRecord};
use spillover_core::dgp::{preset, replication_seed, simulate_panel};
use spillover_core::gmm::{estimate, EstimationResult};
use spillover_core::irf::{Group, IrfRequest, Panel};
use spillover_core::model::{build_price_equation, build_spread_equation, ModelSpec};
use spillover_core::panel::{sample_sd, LongRecord, PanelDataset};

use crate::config::{file_label, RunConfig, ShockVariable, Transform};
use crate::export::{
    coefficient_csv, diagnostics_json, irf_csv, irf_file_stem, irf_meta, irf_svg, number,
    DiagnosticsReport, EquationReport,
};
use crate::manifest::{CombinationStatus, Manifest, ManifestBuilder};

/// Estimates and bands for one (r, p) combination.
#[derive(Debug, Clone)]
pub struct PairResult {
    pub price: EstimationResult<f64>,
    pub spread: EstimationResult<f64>,
    pub shock_size: f64,
    /// Panels A, B, C, each for exporters then importers.
    pub irfs: Vec<IrfResult<f64>>,
}

impl PairResult {
    pub fn irf(&self, panel: Panel, group: Group) -> &IrfResult<f64> {
        self.irfs
            .iter()
            .find(|b| b.request.panel == panel && b.request.group == group)
            .expect("full grid")
    }
}

#[derive(Debug, Clone)]
pub struct PairOutcome {
    pub r: String,
    pub p: String,
    pub result: std::result::Result<PairResult, String>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub manifest: Manifest,
    pub pairs: Vec<PairOutcome>,
}

impl RunOutcome {
    pub fn all_ok(&self) -> bool {
        self.manifest.all_ok()
    }

    pub fn pair(&self, r: &str, p: &str) -> Option<&PairResult> {
        self.pairs
            .iter()
            .find(|o| o.r == r && o.p == p)
            .and_then(|o| o.result.as_ref().ok())
    }
}

pub fn read_panel_csv(path: &Path) -> Result<PanelDataset<f64>> {
    let mut rdr = csv::Reader::from_path(path)
        .with_context(|| format!("opening {}", path.display()))?;
    let records = rdr
        .deserialize::<LongRecord>()
        .collect::<std::result::Result<Vec<_>, _>>()
        .with_context(|| format!("reading {}", path.display()))?;
    Ok(PanelDataset::from_records(&records)?)
}

pub fn read_trade_csv(path: &Path) -> Result<Vec<TradeRecord<f64>>> {
    let mut rdr = csv::Reader::from_path(path)
        .with_context(|| format!("opening {}", path.display()))?;
    rdr.deserialize::<TradeRecord<f64>>()
        .collect::<std::result::Result<Vec<_>, _>>()
        .with_context(|| format!("reading {}", path.display()))
}

pub fn write_panel_csv(data: &PanelDataset<f64>, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for rec in data.to_records() {
        w.serialize(rec)?;
    }
    w.flush()?;
    Ok(())
}

fn shock_dataset(data: &PanelDataset<f64>, r: &ShockVariable) -> Result<PanelDataset<f64>> {
    let mut out = match r.transform {
        Transform::Level => data.clone(),
        Transform::Log => data.transform_variable(&r.name, f64::ln)?,
    };
    if r.flips_sign() {
        out = out.transform_variable(&r.name, |v| -v)?;
    }
    let finite = if out.is_global(&r.name) {
        out.global_series(&r.name)?.observed().all(f64::is_finite)
    } else {
        (0..out.n_entities()).all(|e| {
            out.series(e, &r.name)
                .map(|s| s.observed().all(f64::is_finite))
                .unwrap_or(true)
        })
    };
    if !finite {
        bail!("`{}` is not finite after its {:?} transform", r.name, r.transform);
    }
    Ok(out)
}

/// Sample sd of r over the price-equation estimation window.
fn default_shock_size(data: &PanelDataset<f64>, spec: &ModelSpec, rows: &[spillover_core::panel::RowId]) -> Result<f64> {
    let values: Vec<f64> = if data.is_global(&spec.r_variable) {
        let periods: BTreeSet<usize> = rows.iter().map(|r| r.period).collect();
        let s = data.global_series(&spec.r_variable)?;
        periods.into_iter().filter_map(|t| s.get(t)).collect()
    } else {
        rows.iter()
            .filter_map(|r| data.value(r.entity, &spec.r_variable, r.period, 0).ok().flatten())
            .collect()
    };
    Ok(sample_sd(&values)?)
}

fn run_pair(
    data: &PanelDataset<f64>,
    cfg: &RunConfig,
    r: &ShockVariable,
    p: &str,
    boot: &BootstrapConfig,
) -> Result<PairResult> {
    let data = shock_dataset(data, r)?;
    let controls: Vec<&str> = cfg.variables.controls.iter().map(String::as_str).collect();
    let spec = ModelSpec::new(p, &cfg.variables.y, &r.name, &controls, cfg.model.lag_order);
    spec.validate(&data)?;
    let dp = build_price_equation(&spec, &data)?;
    let dy = build_spread_equation(&spec, &data)?;
    let price = estimate(&dp, &cfg.model.gmm).context("price equation")?;
    let spread = estimate(&dy, &cfg.model.gmm).context("spread equation")?;
    let shock_size = match cfg.irf.shock_size {
        Some(s) => s,
        None => default_shock_size(&data, &spec, &dp.rows)?,
    };
    if shock_size.is_nan() || shock_size <= 0.0 {
        bail!("shock size is zero: `{}` does not vary over the sample", r.name);
    }
    let requests: Vec<IrfRequest<f64>> = Panel::ALL
        .iter()
        .flat_map(|&panel| {
            Group::BOTH.iter().map(move |&group| IrfRequest {
                profile: cfg.irf.profile,
                ..IrfRequest::new(shock_size, cfg.irf.horizon, group, panel)
            })
        })
        .collect();
    let irfs = bootstrap_grid(&price, &spread, &requests, boot)?;
    Ok(PairResult {
        price,
        spread,
        shock_size,
        irfs,
    })
}

fn group_table(groups: &GroupAssignment<f64>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["entity", "ratio", "group"])?;
    for (e, a) in groups {
        w.write_record([e.clone(), number(a.ratio), (a.group as u8).to_string()])?;
    }
    Ok(w.into_inner()?)
}

/// Runs every combination on an in-memory dataset and writes to `cfg.output`.
pub fn run_on_dataset(
    data: &PanelDataset<f64>,
    cfg: &RunConfig,
    preset_name: Option<&str>,
    groups: Option<&GroupAssignment<f64>>,
) -> Result<RunOutcome> {
    cfg.validate()?;
    let pairs: Vec<(usize, &ShockVariable, &String)> = cfg
        .variables
        .r
        .iter()
        .flat_map(|r| cfg.variables.p.iter().map(move |p| (r, p)))
        .enumerate()
        .map(|(i, (r, p))| (i, r, p))
        .collect();
    let results: Vec<PairOutcome> = pairs
        .par_iter()
        .map(|&(i, r, p)| {
            let boot = BootstrapConfig {
                seed: replication_seed(cfg.bootstrap.seed, i as u64),
                ..cfg.bootstrap
            };
            PairOutcome {
                r: r.name.clone(),
                p: p.clone(),
                result: run_pair(data, cfg, r, p, &boot).map_err(|e| format!("{e:#}")),
            }
        })
        .collect();

    let mut out = ManifestBuilder::new(&cfg.output)?;
    if let Some(g) = groups {
        out.write("groups.csv", &group_table(g)?)?;
    }
    let mut status = Vec::new();
    for (o, &(_, r, _)) in results.iter().zip(&pairs) {
        status.push(CombinationStatus {
            r: o.r.clone(),
            p: o.p.clone(),
            ok: o.result.is_ok(),
            error: o.result.as_ref().err().cloned(),
        });
        let Ok(res) = &o.result else { continue };
        let (rl, pl) = (file_label(&o.r), file_label(&o.p));
        out.write(&format!("coef_{rl}_{pl}_price.csv"), &coefficient_csv(&res.price)?)?;
        out.write(&format!("coef_{rl}_{pl}_spread.csv"), &coefficient_csv(&res.spread)?)?;
        let report = DiagnosticsReport {
            r: o.r.clone(),
            p: o.p.clone(),
            y: cfg.variables.y.clone(),
            r_transform: r.transform,
            r_sign_flip: r.flips_sign(),
            lag_order: cfg.model.lag_order,
            controls: cfg.variables.controls.clone(),
            price: EquationReport::new(&res.price),
            spread: EquationReport::new(&res.spread),
            irf: irf_meta(&res.irfs).ok_or_else(|| anyhow!("empty response grid"))?,
        };
        out.write(&format!("diagnostics_{rl}_{pl}.json"), &diagnostics_json(&report)?)?;
        for b in &res.irfs {
            let stem = irf_file_stem(&rl, &pl, b.request.panel, b.request.group);
            out.write(&format!("{stem}.csv"), &irf_csv(b)?)?;
            if cfg.plots {
                let title = format!(
                    "{} → {}: panel {}, {}",
                    o.r,
                    if b.request.panel == Panel::A { &o.p } else { &cfg.variables.y },
                    b.request.panel.as_str(),
                    b.request.group.as_str()
                );
                out.write(&format!("{stem}.svg"), irf_svg(b, &title).as_bytes())?;
            }
        }
    }
    let manifest = out.finish(cfg.bootstrap.seed, preset_name.map(str::to_string), status)?;
    Ok(RunOutcome {
        manifest,
        pairs: results,
    })
}

/// Loads the configured data files, assigns groups, and runs the pipeline.
pub fn run_pipeline(cfg: &RunConfig) -> Result<RunOutcome> {
    cfg.validate()?;
    let path = cfg
        .data
        .panel
        .as_ref()
        .ok_or_else(|| anyhow!("no panel data path configured"))?;
    let mut data = read_panel_csv(path)?;
    let groups = match &cfg.data.trade {
        Some(t) => {
            let g = classify_records(&read_trade_csv(t)?)?;
            let flags: BTreeMap<String, bool> =
                g.iter().map(|(k, a)| (k.clone(), a.group.is_exporter())).collect();
            data = data.with_group_flags(&flags)?;
            Some(g)
        }
        None => None,
    };
    run_on_dataset(&data, cfg, None, groups.as_ref())
}

/// Simulates a named preset and runs the pipeline on it. The seed drives
/// both the simulation and the bootstrap; the lag order follows the preset.
pub fn run_preset(name: &str, seed: u64, base: Option<&RunConfig>) -> Result<RunOutcome> {
    let dgp = preset(name, seed)?;
    let data = simulate_panel::<f64>(&dgp)?;
    let mut cfg = base.cloned().unwrap_or_else(|| RunConfig::synthetic(dgp.lag_order()));
    cfg.variables.y = dgp.names.y.clone();
    cfg.variables.p = vec![dgp.names.p.clone()];
    cfg.variables.r = vec![ShockVariable::new(&dgp.names.r)];
    cfg.variables.controls.clear();
    cfg.model.lag_order = dgp.lag_order();
    cfg.bootstrap.seed = seed;
    run_on_dataset(&data, &cfg, Some(name), None)
}
