use std::path::{Path, PathBuf};

use cbe_core::montecarlo::McConfig;
use cbe_core::specfun::QuadratureSpec;
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McBlock {
    pub samples: usize,
    pub burn: usize,
    pub thin: usize,
    pub seed: u64,
    pub chains: usize,
    pub proposal_scale: Option<f64>,
}

impl Default for McBlock {
    fn default() -> Self {
        let d = McConfig::default();
        Self {
            samples: d.n_samples,
            burn: d.n_burn,
            thin: d.thinning,
            seed: d.seed,
            chains: d.n_chains,
            proposal_scale: None,
        }
    }
}

/// Everything a command needs. Loaded from JSON, then overridden by flags.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(rename = "N")]
    pub n: u64,
    pub beta: f64,
    pub delta: f64,
    pub x: Vec<f64>,
    pub x_grid: Option<String>,
    pub mc: McBlock,
    pub quadrature: QuadratureSpec,
    pub out: Option<PathBuf>,
    pub format: Format,
    pub quick: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            n: 10,
            beta: 2.0,
            delta: 0.0,
            x: Vec::new(),
            x_grid: None,
            mc: McBlock::default(),
            quadrature: QuadratureSpec::default(),
            out: None,
            format: Format::Csv,
            quick: false,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Input(format!("config {}: {e}", path.display())))
    }

    /// Points requested through `x` and `x_grid`, in that order.
    pub fn points(&self) -> Result<Vec<f64>, CliError> {
        let mut out = self.x.clone();
        if let Some(g) = &self.x_grid {
            out.extend(parse_grid(g)?);
        }
        Ok(out)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.n == 0 {
            return Err(CliError::Input("N must be >= 1".into()));
        }
        if !(self.beta > 0.0) || !self.beta.is_finite() {
            return Err(CliError::Input(format!("beta must be > 0, got {}", self.beta)));
        }
        if !(self.delta >= 0.0) || !self.delta.is_finite() {
            return Err(CliError::Input(format!("delta must be >= 0, got {}", self.delta)));
        }
        if let Some(bad) = self.x.iter().find(|v| !v.is_finite()) {
            return Err(CliError::Input(format!("x must be finite, got {bad}")));
        }
        self.quadrature.validate().map_err(|e| CliError::Input(e.to_string()))?;
        self.mc_config(1).validate().map_err(|e| CliError::Input(e.to_string()))?;
        self.points()?;
        Ok(())
    }

    pub fn n_usize(&self) -> Result<usize, CliError> {
        usize::try_from(self.n).map_err(|_| CliError::Input(format!("N = {} is too large", self.n)))
    }

    pub fn mc_config(&self, threads: usize) -> McConfig {
        McConfig {
            n_samples: self.mc.samples,
            n_burn: self.mc.burn,
            thinning: self.mc.thin,
            proposal_scale: self.mc.proposal_scale,
            n_chains: self.mc.chains,
            seed: self.mc.seed,
            threads,
        }
    }
}

/// Parse `A:B:STEP` into A, A+STEP, ... up to B inclusive.
pub fn parse_grid(s: &str) -> Result<Vec<f64>, CliError> {
    let bad = || CliError::Input(format!("x-grid must look like A:B:STEP with STEP > 0 and A <= B, got {s:?}"));
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(bad());
    }
    let nums: Vec<f64> = parts
        .iter()
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| bad())?;
    let (a, b, step) = (nums[0], nums[1], nums[2]);
    if !(step > 0.0) || !(a <= b) || !a.is_finite() || !b.is_finite() {
        return Err(bad());
    }
    let count = ((b - a) / step + 1e-9).floor() as usize;
    if count > 10_000_000 {
        return Err(CliError::Input(format!("x-grid {s:?} has too many points")));
    }
    Ok((0..=count).map(|i| a + i as f64 * step).collect())
}
