//! Run configuration, read from TOML.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use spillover_core::bootstrap::BootstrapConfig;
use spillover_core::gmm::GmmOptions;
use spillover_core::irf::ShockProfile;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Transform {
    #[default]
    Level,
    Log,
}

/// One global shock variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShockVariable {
    pub name: String,
    #[serde(default)]
    pub transform: Transform,
    /// Negate the series so that a positive shock means tightening.
    /// Defaults to true for a variable named `cgf`.
    #[serde(default)]
    pub sign_flip: Option<bool>,
}

impl ShockVariable {
    pub fn new(name: &str) -> Self {
        Self {
            name: name.into(),
            transform: Transform::Level,
            sign_flip: None,
        }
    }

    pub fn flips_sign(&self) -> bool {
        self.sign_flip
            .unwrap_or_else(|| self.name.eq_ignore_ascii_case("cgf"))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DataPaths {
    /// Long-format panel CSV (`entity,period,variable,value`).
    pub panel: Option<PathBuf>,
    /// Trade records (`entity,year,commodity_exports,commodity_imports`)
    /// used to assign groups; otherwise the `exporter` variable is used.
    pub trade: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Variables {
    pub y: String,
    pub p: Vec<String>,
    pub r: Vec<ShockVariable>,
    #[serde(default)]
    pub controls: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub lag_order: usize,
    pub gmm: GmmOptions,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            lag_order: 2,
            gmm: GmmOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IrfConfig {
    pub horizon: usize,
    pub profile: ShockProfile,
    /// Fixed shock size; by default the sample sd of r over the estimation window.
    pub shock_size: Option<f64>,
}

impl Default for IrfConfig {
    fn default() -> Self {
        Self {
            horizon: 20,
            profile: ShockProfile::Transitory,
            shock_size: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(default)]
    pub data: DataPaths,
    pub variables: Variables,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub irf: IrfConfig,
    #[serde(default)]
    pub bootstrap: BootstrapConfig,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    #[serde(default = "default_plots")]
    pub plots: bool,
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

fn default_plots() -> bool {
    true
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).context("parsing run configuration")
    }

    /// Loads a config file; relative data paths resolve against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading {}", path.display()))?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.data.panel, &mut cfg.data.trade].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    /// Configuration for a synthetic dataset carrying `p`, `y` and `r`.
    pub fn synthetic(lag_order: usize) -> Self {
        Self {
            data: DataPaths::default(),
            variables: Variables {
                y: "y".into(),
                p: vec!["p".into()],
                r: vec![ShockVariable::new("r")],
                controls: Vec::new(),
            },
            model: ModelConfig {
                lag_order,
                gmm: GmmOptions::default(),
            },
            irf: IrfConfig::default(),
            bootstrap: BootstrapConfig::default(),
            output: default_output(),
            plots: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let v = &self.variables;
        if v.p.is_empty() || v.r.is_empty() {
            bail!("at least one p and one r variable required");
        }
        if self.model.lag_order == 0 {
            bail!("lag_order must be at least 1");
        }
        if self.irf.horizon == 0 {
            bail!("irf horizon must be at least 1");
        }
        if let Some(s) = self.irf.shock_size {
            if !(s > 0.0 && s.is_finite()) {
                bail!("shock_size must be positive");
            }
        }
        self.model.gmm.validate()?;
        self.bootstrap.validate()?;
        let mut labels: Vec<String> = v.r.iter().map(|r| file_label(&r.name)).collect();
        labels.sort();
        labels.dedup();
        if labels.len() != v.r.len() {
            bail!("r variable names collide after sanitizing");
        }
        Ok(())
    }
}

/// File-name-safe form of a variable name.
pub fn file_label(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' })
        .collect()
}
