//! Declarative run configuration, loaded from TOML or JSON.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::catalog::Params;
use crate::error::{Error, Result};
use crate::verifier::Tolerances;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Verify,
    Identities,
    Flow,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub nodes: usize,
    pub half_width: f64,
    /// Fixed step; the stability bound is used when absent.
    pub dt: Option<f64>,
    pub t_end: f64,
    pub sigma: f64,
    pub snapshot_every: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            nodes: 201,
            half_width: 2.0,
            dt: None,
            t_end: 0.01,
            sigma: 0.2,
            snapshot_every: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FlowConfig {
    /// Defaults to `−m`.
    pub lambda: Option<f64>,
    /// Puncture and amplitude of the map; length `n`. Default `(1)`.
    pub a: Option<Vec<f64>>,
    pub b: Option<Vec<f64>>,
    pub printed_forms: bool,
    pub integrate: bool,
    pub deturck: bool,
    pub deturck_t: f64,
    pub residual_t: f64,
    pub residual_dt: f64,
    pub integrator_tolerance: f64,
    pub deturck_tolerance: f64,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self {
            lambda: None,
            a: None,
            b: None,
            printed_forms: false,
            integrate: true,
            deturck: true,
            deturck_t: 0.005,
            residual_t: 0.1,
            residual_dt: 1e-3,
            integrator_tolerance: 1e-3,
            deturck_tolerance: 1e-2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub command: Option<Command>,
    pub geometry: Option<String>,
    pub params: Params,
    pub tolerances: Tolerances,
    pub samples: usize,
    pub seed: u64,
    /// Dimension for `identities` and `flow`.
    pub m: usize,
    pub quadrature_order: usize,
    pub grid: GridConfig,
    pub flow: FlowConfig,
    pub out: Option<PathBuf>,
    pub traj: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            command: None,
            geometry: None,
            params: Params::new(),
            tolerances: Tolerances::default(),
            samples: 100,
            seed: 0,
            m: 2,
            quadrature_order: 32,
            grid: GridConfig::default(),
            flow: FlowConfig::default(),
            out: None,
            traj: None,
        }
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::param(format!("{name} > 0 violated ({name} = {v})")))
    }
}

impl RunConfig {
    /// Reads a config file; the format follows the extension (`.json`,
    /// otherwise TOML).
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
        if json {
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
        } else {
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
        }
    }

    /// Range checks on every numeric field.
    pub fn validate(&self) -> Result<()> {
        if self.samples == 0 || self.samples > 100_000 {
            return Err(Error::param(format!("1 ≤ samples ≤ 100000 violated ({})", self.samples)));
        }
        if self.m < 2 || self.m > crate::jet::MAX_DIM {
            return Err(Error::param(format!(
                "2 ≤ m ≤ {} violated (m = {})",
                crate::jet::MAX_DIM,
                self.m
            )));
        }
        if self.quadrature_order == 0 || self.quadrature_order > 256 {
            return Err(Error::param(format!(
                "1 ≤ quadrature order ≤ 256 violated ({})",
                self.quadrature_order
            )));
        }
        let t = &self.tolerances;
        positive("tolerances.pointwise", t.pointwise)?;
        positive("tolerances.pointwise_fd", t.pointwise_fd)?;
        positive("tolerances.integral", t.integral)?;
        let g = &self.grid;
        if g.nodes < 7 || g.nodes > 100_001 {
            return Err(Error::param(format!("7 ≤ N ≤ 100001 violated (N = {})", g.nodes)));
        }
        positive("L", g.half_width)?;
        if !(g.t_end >= 0.0 && g.t_end.is_finite()) {
            return Err(Error::param(format!("T ≥ 0 violated (T = {})", g.t_end)));
        }
        if !(g.sigma > 0.0 && g.sigma <= 1.0) {
            return Err(Error::param(format!("0 < σ ≤ 1 violated (σ = {})", g.sigma)));
        }
        if let Some(dt) = g.dt {
            positive("dt", dt)?;
        }
        let f = &self.flow;
        if !(f.deturck_t >= 0.0 && f.deturck_t.is_finite()) {
            return Err(Error::param(format!("DeTurck T ≥ 0 violated ({})", f.deturck_t)));
        }
        positive("residual dt", f.residual_dt)?;
        positive("integrator tolerance", f.integrator_tolerance)?;
        positive("DeTurck tolerance", f.deturck_tolerance)?;
        if !f.residual_t.is_finite() {
            return Err(Error::param("residual time must be finite"));
        }
        if let (Some(a), Some(b)) = (&f.a, &f.b) {
            if a.len() != b.len() {
                return Err(Error::param(format!(
                    "a and b must have the same length ({} vs {})",
                    a.len(),
                    b.len()
                )));
            }
        }
        Ok(())
    }
}
