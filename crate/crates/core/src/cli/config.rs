//! JSON run configuration.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::certify::ClassifyConfig;
use crate::construct::ConstructionConfig;
use crate::field::FieldSpec;
use crate::flow::{TOL_MAX, TOL_MIN};
use crate::geom::Vec2;

use super::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowSpec {
    pub center: Vec2,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Windows {
    List(Vec<WindowSpec>),
    /// `n` windows centered on the detected orbit, radii drawn from `r_range`.
    Auto { auto: usize, r_range: [f64; 2] },
}

impl Default for Windows {
    fn default() -> Self {
        Windows::List(Vec::new())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Outputs {
    pub csv: String,
    pub svg: String,
    pub report: String,
    pub trace: String,
    pub timing: String,
}

impl Default for Outputs {
    fn default() -> Self {
        Self {
            csv: "trajectory.csv".into(),
            svg: "phase.svg".into(),
            report: "report.json".into(),
            trace: "trace.json".into(),
            timing: "timing.json".into(),
        }
    }
}

fn default_tol() -> f64 {
    1e-10
}
fn default_t_end() -> f64 {
    50.0
}
fn default_eps_t() -> f64 {
    1e-4
}
fn default_eps_x() -> f64 {
    1e-7
}
fn default_tol_eq() -> f64 {
    1e-9
}
fn default_i_max() -> usize {
    8
}
fn default_t_max() -> f64 {
    1e4
}
fn default_t_pre() -> f64 {
    50.0
}
fn default_t_probe() -> f64 {
    20.0
}
fn default_radii() -> Vec<f64> {
    vec![0.1, 0.05, 0.025]
}
fn default_retries() -> usize {
    5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub field: FieldSpec,
    pub x0: Vec2,
    #[serde(default = "default_tol")]
    pub tol: f64,
    /// Horizon of `simulate`.
    #[serde(default = "default_t_end")]
    pub t_end: f64,
    #[serde(default = "default_eps_t")]
    pub eps_t: f64,
    #[serde(default = "default_eps_x")]
    pub eps_x: f64,
    #[serde(default = "default_tol_eq")]
    pub tol_eq: f64,
    #[serde(default = "default_i_max")]
    pub i_max: usize,
    #[serde(default = "default_t_max")]
    pub t_max: f64,
    #[serde(default = "default_t_pre")]
    pub t_pre: f64,
    #[serde(default = "default_t_probe")]
    pub t_probe: f64,
    /// Decreasing radii of the equilibrium certificate.
    #[serde(default = "default_radii")]
    pub radii: Vec<f64>,
    #[serde(default)]
    pub windows: Windows,
    /// Radius re-draws allowed per window when it grazes the trajectory.
    #[serde(default = "default_retries")]
    pub retries: usize,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub outputs: Outputs,
}

impl RunConfig {
    /// Reads and validates a config; `seed` overrides the file's seed.
    pub fn load(path: &Path, seed: Option<u64>) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_json(&text, seed).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn from_json(text: &str, seed: Option<u64>) -> Result<Self, CliError> {
        let mut cfg: RunConfig = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        if seed.is_some() {
            cfg.seed = seed;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        if !(TOL_MIN..=TOL_MAX).contains(&self.tol) {
            return bad(format!("tol = {} outside [{TOL_MIN:e}, {TOL_MAX:e}]", self.tol));
        }
        if !self.x0.is_finite() {
            return bad("x0 must be finite".into());
        }
        for (name, v) in [
            ("t_end", self.t_end),
            ("eps_t", self.eps_t),
            ("eps_x", self.eps_x),
            ("tol_eq", self.tol_eq),
            ("t_max", self.t_max),
            ("t_probe", self.t_probe),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive and finite"));
            }
        }
        if !(self.t_pre >= 0.0 && self.t_pre.is_finite()) {
            return bad("t_pre must be non-negative".into());
        }
        if self.i_max < 1 {
            return bad("i_max must be at least 1".into());
        }
        if self.radii.is_empty() || self.radii.iter().any(|r| !(*r > 0.0)) || self.radii.windows(2).any(|w| w[1] >= w[0]) {
            return bad("radii must be positive and strictly decreasing".into());
        }
        match &self.windows {
            Windows::List(ws) => {
                if let Some(w) = ws.iter().find(|w| !(w.radius > 0.0) || !w.center.is_finite()) {
                    return bad(format!("invalid window {w:?}"));
                }
            }
            Windows::Auto { r_range: [lo, hi], .. } => {
                if !(*lo > 0.0 && hi >= lo) {
                    return bad("r_range must satisfy 0 < lo <= hi".into());
                }
                if self.seed.is_none() {
                    return bad("auto windows require a seed".into());
                }
            }
        }
        if self.retries > 0 && self.seed.is_none() && !matches!(&self.windows, Windows::List(ws) if ws.is_empty()) {
            return bad("radius perturbation retries require a seed".into());
        }
        Ok(())
    }

    pub fn construction(&self) -> ConstructionConfig {
        ConstructionConfig {
            i_max: self.i_max,
            t_max: self.t_max,
            t_probe: self.t_probe,
            eps_t: self.eps_t,
            eps_x: self.eps_x,
            ..ConstructionConfig::default()
        }
    }

    pub fn classify(&self) -> ClassifyConfig {
        ClassifyConfig {
            tol: self.tol,
            tol_eq: self.tol_eq,
            t_pre: self.t_pre,
            radii: self.radii.clone(),
            construction: self.construction(),
        }
    }
}
