//! Run configuration: one JSON document, individual fields overridable from
//! the command line.

use anyhow::{bail, Context, Result};
use eap_core::network::{GameParams, Topology};
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub topology: Topology,
    pub mu1: f64,
    pub mu2: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    #[serde(default)]
    pub gamma1: Option<f64>,
    #[serde(default)]
    pub gamma2: Option<f64>,
    /// Raw cost coefficients; used when the gammas are absent.
    #[serde(default)]
    pub alpha1: Option<f64>,
    #[serde(default)]
    pub beta1: Option<f64>,
    #[serde(default)]
    pub alpha2: Option<f64>,
    #[serde(default)]
    pub beta2: Option<f64>,
    /// Equilibrium tolerance for verification.
    #[serde(default = "default_eps")]
    pub eps: f64,
    /// Oracle grid spacing.
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default)]
    pub seed: u64,
    /// Uniform sample count for trace output.
    #[serde(default = "default_rows")]
    pub rows: usize,
    #[serde(default)]
    pub max_iters: Option<usize>,
    #[serde(default)]
    pub stop_tol: Option<f64>,
    #[serde(default)]
    pub sweep: Option<SweepSpec>,
}

fn default_eps() -> f64 {
    1e-9
}

fn default_dt() -> f64 {
    0.01
}

fn default_rows() -> usize {
    200
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub from: f64,
    pub to: f64,
    pub steps: usize,
    #[serde(default)]
    pub axis2: Option<Box<SweepSpec>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    Mu1,
    Mu2,
    Lambda1,
    Lambda2,
    Gamma1,
    Gamma2,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Mu1 => "mu1",
            SweepAxis::Mu2 => "mu2",
            SweepAxis::Lambda1 => "lambda1",
            SweepAxis::Lambda2 => "lambda2",
            SweepAxis::Gamma1 => "gamma1",
            SweepAxis::Gamma2 => "gamma2",
        }
    }

    pub fn apply(self, p: &mut GameParams, value: f64) {
        match self {
            SweepAxis::Mu1 => p.mu1 = value,
            SweepAxis::Mu2 => p.mu2 = value,
            SweepAxis::Lambda1 => p.lambda1 = value,
            SweepAxis::Lambda2 => p.lambda2 = value,
            SweepAxis::Gamma1 => p.gamma1 = value,
            SweepAxis::Gamma2 => p.gamma2 = value,
        }
    }
}

impl SweepSpec {
    pub fn values(&self) -> Result<Vec<f64>> {
        if self.steps == 0 {
            bail!("sweep needs at least one step");
        }
        if self.steps == 1 {
            return Ok(vec![self.from]);
        }
        let n = self.steps;
        Ok((0..n)
            .map(|i| self.from + (self.to - self.from) * i as f64 / (n - 1) as f64)
            .collect())
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        let cfg: RunConfig = serde_json::from_str(&text)
            .with_context(|| format!("malformed config {}", path.display()))?;
        Ok(cfg)
    }

    /// Builds validated game parameters, deriving the gammas from raw
    /// alpha/beta pairs when necessary.
    pub fn params(&self) -> Result<GameParams> {
        let p = match (self.gamma1, self.gamma2) {
            (Some(g1), Some(g2)) => GameParams::new(
                self.topology,
                self.mu1,
                self.mu2,
                self.lambda1,
                self.lambda2,
                g1,
                g2,
            ),
            (None, None) => match (self.alpha1, self.beta1, self.alpha2, self.beta2) {
                (Some(a1), Some(b1), Some(a2), Some(b2)) => GameParams::from_alpha_beta(
                    self.topology,
                    self.mu1,
                    self.mu2,
                    self.lambda1,
                    self.lambda2,
                    (a1, b1),
                    (a2, b2),
                ),
                _ => bail!("config needs either gamma1/gamma2 or all of alpha1/beta1/alpha2/beta2"),
            },
            _ => bail!("gamma1 and gamma2 must be given together"),
        };
        p.map_err(|e| anyhow::anyhow!("invalid parameters: {e}"))
    }
}
