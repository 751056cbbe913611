use std::path::Path;

use anyhow::Context;
use clap::{Args, ValueEnum};
use massimo_core::{BandMode, Config, DirectionMode, ModelSpec};

pub const CONFIG_ENV: &str = "MASSIMO_CONFIG";

#[derive(Clone, Copy, ValueEnum)]
pub enum ModelArg {
    Linear,
    Polynomial,
    Ridge,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum BandArg {
    Constant,
    Prediction,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum DirectionArg {
    Endpoints,
    Regression,
}

/// Command-line settings that take precedence over the config file.
#[derive(Args, Clone, Default)]
pub struct Overrides {
    #[arg(long, value_enum)]
    pub model: Option<ModelArg>,
    #[arg(long)]
    pub degree: Option<usize>,
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Two-sided confidence level of the band.
    #[arg(long)]
    pub level: Option<f64>,
    #[arg(long, value_enum)]
    pub band_mode: Option<BandArg>,
    /// Spring constant.
    #[arg(long)]
    pub k: Option<f64>,
    #[arg(long, value_enum)]
    pub direction: Option<DirectionArg>,
    /// Minimum keypoint confidence for a hip to count.
    #[arg(long)]
    pub conf: Option<f64>,
    /// Overlay opacity.
    #[arg(long)]
    pub alpha: Option<f64>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut Config) {
        if let Some(m) = self.model {
            cfg.model = match m {
                ModelArg::Linear => ModelSpec::linear(),
                ModelArg::Polynomial => ModelSpec::polynomial(ModelSpec::DEFAULT_POLY_DEGREE),
                ModelArg::Ridge => ModelSpec::ridge(ModelSpec::DEFAULT_RIDGE_LAMBDA),
            };
        }
        if let Some(d) = self.degree {
            cfg.model.degree = d;
        }
        if let Some(l) = self.lambda {
            cfg.model.lambda = l;
        }
        if let Some(level) = self.level {
            cfg.band.level = level;
        }
        if let Some(mode) = self.band_mode {
            cfg.band.mode = match mode {
                BandArg::Constant => BandMode::Constant,
                BandArg::Prediction => BandMode::Prediction,
            };
        }
        if let Some(k) = self.k {
            cfg.spring.k = k;
        }
        if let Some(d) = self.direction {
            cfg.direction = match d {
                DirectionArg::Endpoints => DirectionMode::Endpoints,
                DirectionArg::Regression => DirectionMode::Regression,
            };
        }
        if let Some(c) = self.conf {
            cfg.conf_threshold = c;
        }
        if let Some(a) = self.alpha {
            cfg.style.overlay_alpha = a;
        }
    }
}

/// Defaults, then the config file (explicit path or `$MASSIMO_CONFIG`), then
/// command-line overrides.
pub fn load_config(explicit: Option<&Path>, overrides: &Overrides) -> anyhow::Result<Config> {
    let from_env = std::env::var_os(CONFIG_ENV).filter(|v| !v.is_empty());
    let path = explicit.map(Path::to_path_buf).or_else(|| from_env.map(Into::into));
    let mut cfg = match &path {
        Some(p) => {
            let bytes = std::fs::read(p).with_context(|| format!("reading config {}", p.display()))?;
            Config::from_json(&bytes).with_context(|| format!("config {}", p.display()))?
        }
        None => Config::default(),
    };
    overrides.apply(&mut cfg);
    cfg.validate().context("invalid settings")?;
    Ok(cfg)
}
